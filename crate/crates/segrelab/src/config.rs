//! Flat `key = value` configuration with dotted keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segrelab_core::evolve::{Problem, StepperConfig, STABILIZATION_WINDOW};
use segrelab_core::mesh::{Field, Grid};
use segrelab_core::model::{
    make_segregated_bumps, BoundaryMode, BoundarySchedule, Bump, InitialData, ReactionKind, ReactionModel,
};
use segrelab_core::steady::STEADY_TOLERANCE;

use crate::io::read_snapshot;
use crate::{LabError, Result};

pub const WORKERS_ENV: &str = "SEGRELAB_WORKERS";

const KEYS: &[&str] = &[
    "grid.dim",
    "grid.n",
    "grid.L",
    "reaction.kind",
    "boundary.mode",
    "boundary.gamma",
    "boundary.psi_inf",
    "boundary.rho",
    "boundary.zeta_inf",
    "boundary.zeta_rho",
    "init.type",
    "init.centers",
    "init.radii",
    "init.amplitudes",
    "init.seed",
    "init.u_file",
    "init.v_file",
    "model.kappa",
    "sweep.kappas",
    "sweep.workers",
    "time.dt",
    "time.horizon",
    "time.max_steps",
    "time.threshold",
    "time.window",
    "time.sample_stride",
    "output.dir",
    "steady.tol",
];

/// Boundary values: taken from the initial data, one value for every node,
/// or one value per boundary node.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceSpec {
    FromInit,
    Values(Vec<f64>),
}

impl TraceSpec {
    fn resolve(&self, init_trace: &[f64]) -> Result<Vec<f64>> {
        match self {
            TraceSpec::FromInit => Ok(init_trace.to_vec()),
            TraceSpec::Values(v) if v.len() == 1 => Ok(vec![v[0]; init_trace.len()]),
            TraceSpec::Values(v) if v.len() == init_trace.len() => Ok(v.clone()),
            TraceSpec::Values(v) => Err(LabError::config(format!(
                "boundary list has {} values but the grid has {} boundary nodes",
                v.len(),
                init_trace.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    pub mode: BoundaryMode,
    pub gamma: f64,
    pub psi_inf: TraceSpec,
    pub rho: TraceSpec,
    pub zeta_inf: TraceSpec,
    pub zeta_rho: TraceSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Zero,
    /// Bumps tagged `u` or `v`.
    Bumps {
        u: Vec<Bump>,
        v: Vec<Bump>,
    },
    Random {
        seed: u64,
    },
    File {
        u: PathBuf,
        v: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSpec {
    pub dt: f64,
    pub horizon: Option<f64>,
    pub max_steps: usize,
    pub threshold: f64,
    pub window: usize,
    pub sample_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub lengths: Vec<f64>,
    pub counts: Vec<usize>,
    pub reaction: ReactionKind,
    pub boundary: BoundarySpec,
    pub init: InitSpec,
    pub kappa: f64,
    pub kappas: Vec<f64>,
    pub workers: usize,
    pub time: TimeSpec,
    pub output_dir: PathBuf,
    pub steady_tol: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            lengths: vec![1.0],
            counts: vec![63],
            reaction: ReactionKind::Logistic,
            boundary: BoundarySpec {
                mode: BoundaryMode::Stationary,
                gamma: 1.0,
                psi_inf: TraceSpec::FromInit,
                rho: TraceSpec::Values(vec![0.0]),
                zeta_inf: TraceSpec::FromInit,
                zeta_rho: TraceSpec::Values(vec![0.0]),
            },
            init: InitSpec::Zero,
            kappa: 1.0,
            kappas: vec![1.0, 10.0, 100.0],
            workers: 1,
            time: TimeSpec {
                dt: 0.02,
                horizon: None,
                max_steps: 1_000_000,
                threshold: 1e-9,
                window: STABILIZATION_WINDOW,
                sample_stride: 50,
            },
            output_dir: PathBuf::from("segrelab-out"),
            steady_tol: STEADY_TOLERANCE,
        }
    }
}

fn numbers(key: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| LabError::config(format!("{key}: `{}` is not a number", s.trim())))
        })
        .collect()
}

fn number(key: &str, raw: &str) -> Result<f64> {
    match numbers(key, raw)?.as_slice() {
        [x] => Ok(*x),
        _ => Err(LabError::config(format!("{key} takes a single number"))),
    }
}

fn integer(key: &str, raw: &str) -> Result<usize> {
    let x = number(key, raw)?;
    if x < 0.0 || x.fract() != 0.0 || x > u32::MAX as f64 * 1e3 {
        return Err(LabError::config(format!("{key} must be a nonnegative integer, got {raw}")));
    }
    Ok(x as usize)
}

fn trace_spec(key: &str, raw: &str) -> Result<TraceSpec> {
    if raw == "init" {
        return Ok(TraceSpec::FromInit);
    }
    Ok(TraceSpec::Values(numbers(key, raw)?))
}

/// `u@x[:y]; v@x[:y]; ...`
fn tagged_centers(raw: &str) -> Result<Vec<(char, [f64; 2])>> {
    raw.split(';')
        .map(|item| {
            let item = item.trim();
            let (tag, at) = item
                .split_once('@')
                .ok_or_else(|| LabError::config(format!("init.centers: `{item}` must look like u@x or v@x:y")))?;
            let tag = match tag.trim() {
                "u" => 'u',
                "v" => 'v',
                other => return Err(LabError::config(format!("init.centers: unknown species `{other}`"))),
            };
            let coords = at
                .split(':')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| LabError::config(format!("init.centers: bad coordinates in `{item}`")))?;
            match coords.as_slice() {
                [x] => Ok((tag, [*x, 0.0])),
                [x, y] => Ok((tag, [*x, *y])),
                _ => Err(LabError::config(format!("init.centers: `{item}` needs one or two coordinates"))),
            }
        })
        .collect()
}

fn per_bump(key: &str, raw: Option<&String>, count: usize, default: f64) -> Result<Vec<f64>> {
    let Some(raw) = raw else { return Ok(vec![default; count]) };
    let v: Vec<f64> = raw.split(';').map(|s| number(key, s)).collect::<Result<_>>()?;
    match v.len() {
        1 => Ok(vec![v[0]; count]),
        n if n == count => Ok(v),
        n => Err(LabError::config(format!("{key} has {n} entries for {count} bumps"))),
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let InitSpec::File { u, v } = &mut cfg.init {
            let base = path.parent().unwrap_or(Path::new("."));
            *u = base.join(&*u);
            *v = base.join(&*v);
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::config(format!("line {}: expected key = value", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(LabError::config(format!("line {}: unknown key `{k}`", no + 1)));
            }
            if kv.insert(k.to_string(), v.to_string()).is_some() {
                return Err(LabError::config(format!("line {}: duplicate key `{k}`", no + 1)));
            }
        }
        let mut cfg = Config::default();
        let get = |k: &str| kv.get(k);

        let dim = match get("grid.dim") {
            Some(d) => integer("grid.dim", d)?,
            None => get("grid.n").map_or(1, |n| n.split(',').count()),
        };
        if !(1..=2).contains(&dim) {
            return Err(LabError::config(format!("grid.dim must be 1 or 2, got {dim}")));
        }
        if let Some(n) = get("grid.n") {
            cfg.counts = numbers("grid.n", n)?.into_iter().map(|x| x as usize).collect();
        } else {
            cfg.counts = vec![63; dim];
        }
        if let Some(l) = get("grid.L") {
            cfg.lengths = numbers("grid.L", l)?;
        } else {
            cfg.lengths = vec![1.0; dim];
        }
        if cfg.counts.len() == 1 && dim == 2 {
            cfg.counts.push(cfg.counts[0]);
        }
        if cfg.lengths.len() == 1 && dim == 2 {
            cfg.lengths.push(cfg.lengths[0]);
        }
        if cfg.counts.len() != dim || cfg.lengths.len() != dim {
            return Err(LabError::config("grid.n and grid.L must have one entry per dimension"));
        }

        if let Some(k) = get("reaction.kind") {
            cfg.reaction = k.parse().map_err(|e: segrelab_core::Error| LabError::config(e.to_string()))?;
        }
        let b = &mut cfg.boundary;
        if let Some(m) = get("boundary.mode") {
            b.mode = m.parse().map_err(|e: segrelab_core::Error| LabError::config(e.to_string()))?;
        }
        if let Some(g) = get("boundary.gamma") {
            b.gamma = number("boundary.gamma", g)?;
        }
        for (key, slot) in [
            ("boundary.psi_inf", &mut b.psi_inf),
            ("boundary.rho", &mut b.rho),
            ("boundary.zeta_inf", &mut b.zeta_inf),
            ("boundary.zeta_rho", &mut b.zeta_rho),
        ] {
            if let Some(raw) = get(key) {
                *slot = trace_spec(key, raw)?;
            }
        }
        if b.mode == BoundaryMode::Stationary
            && [&b.rho, &b.zeta_rho].iter().any(|r| matches!(r, TraceSpec::Values(v) if v.iter().any(|x| *x != 0.0)))
        {
            return Err(LabError::config("boundary.rho and boundary.zeta_rho need boundary.mode = decaying"));
        }

        cfg.init = match get("init.type").map(String::as_str).unwrap_or("zero") {
            "zero" => InitSpec::Zero,
            "random" => InitSpec::Random { seed: get("init.seed").map_or(Ok(0), |s| integer("init.seed", s))? as u64 },
            "file" => {
                let (Some(u), Some(v)) = (get("init.u_file"), get("init.v_file")) else {
                    return Err(LabError::config("init.type = file needs init.u_file and init.v_file"));
                };
                InitSpec::File { u: PathBuf::from(u), v: PathBuf::from(v) }
            }
            "bumps" => {
                let centers = tagged_centers(
                    get("init.centers").ok_or_else(|| LabError::config("init.type = bumps needs init.centers"))?,
                )?;
                let radii = per_bump("init.radii", get("init.radii"), centers.len(), 0.25)?;
                let amps = per_bump("init.amplitudes", get("init.amplitudes"), centers.len(), 1.0)?;
                let (mut u, mut v) = (Vec::new(), Vec::new());
                for ((tag, center), (radius, amplitude)) in centers.into_iter().zip(radii.into_iter().zip(amps)) {
                    let bump = Bump { center, radius, amplitude };
                    if tag == 'u' {
                        u.push(bump)
                    } else {
                        v.push(bump)
                    }
                }
                InitSpec::Bumps { u, v }
            }
            other => {
                return Err(LabError::config(format!("init.type must be zero, bumps, random or file; got {other}")))
            }
        };

        if let Some(k) = get("model.kappa") {
            cfg.kappa = number("model.kappa", k)?;
        }
        if let Some(k) = get("sweep.kappas") {
            cfg.kappas = numbers("sweep.kappas", k)?;
        }
        if let Some(w) = get("sweep.workers") {
            cfg.workers = integer("sweep.workers", w)?;
        }
        let t = &mut cfg.time;
        if let Some(x) = get("time.dt") {
            t.dt = number("time.dt", x)?;
        }
        if let Some(x) = get("time.horizon") {
            t.horizon = Some(number("time.horizon", x)?);
        }
        if let Some(x) = get("time.max_steps") {
            t.max_steps = integer("time.max_steps", x)?;
        }
        if let Some(x) = get("time.threshold") {
            t.threshold = number("time.threshold", x)?;
        }
        if let Some(x) = get("time.window") {
            t.window = integer("time.window", x)?;
        }
        if let Some(x) = get("time.sample_stride") {
            t.sample_stride = integer("time.sample_stride", x)?;
        }
        if let Some(x) = get("output.dir") {
            cfg.output_dir = PathBuf::from(x);
        }
        if let Some(x) = get("steady.tol") {
            cfg.steady_tol = number("steady.tol", x)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(LabError::config(format!("model.kappa must be finite and nonnegative, got {}", self.kappa)));
        }
        if self.kappas.is_empty() || self.kappas.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(LabError::config("sweep.kappas must be a nonempty list of positive numbers"));
        }
        if self.kappas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::config("sweep.kappas must be strictly ascending"));
        }
        if self.workers == 0 {
            return Err(LabError::config("sweep.workers must be at least 1"));
        }
        if !(self.time.threshold > 0.0) || !(self.steady_tol > 0.0) {
            return Err(LabError::config("time.threshold and steady.tol must be positive"));
        }
        let probe = Problem::symmetric(
            ReactionModel::new(self.reaction),
            self.kappa,
            BoundarySchedule::stationary(vec![0.0])?,
            BoundarySchedule::stationary(vec![0.0])?,
        )?;
        self.stepper().validate(&probe)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(&self.lengths, &self.counts)?)
    }

    /// Worker count, overridden by `SEGRELAB_WORKERS` when set.
    pub fn effective_workers(&self) -> Result<usize> {
        match std::env::var(WORKERS_ENV) {
            Ok(s) => match s.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(LabError::config(format!("{WORKERS_ENV} must be a positive integer, got `{s}`"))),
            },
            Err(_) => Ok(self.workers),
        }
    }

    pub fn stepper(&self) -> StepperConfig {
        let mut s = StepperConfig::new(self.time.dt)
            .with_threshold(self.time.threshold)
            .with_max_steps(self.time.max_steps)
            .with_sample_stride(self.time.sample_stride);
        s.window = self.time.window;
        s.horizon = self.time.horizon;
        s
    }

    pub fn initial_data(&self) -> Result<InitialData> {
        let grid = self.grid()?;
        let data = match &self.init {
            InitSpec::Zero => InitialData::new(Field::zeros(grid), Field::zeros(grid))?,
            InitSpec::Bumps { u, v } => make_segregated_bumps(&grid, u, v)?,
            InitSpec::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let u: Vec<f64> = (0..grid.node_count()).map(|_| rng.random::<f64>()).collect();
                let v: Vec<f64> = (0..grid.node_count()).map(|_| rng.random::<f64>()).collect();
                InitialData::new(Field::new(grid, u)?, Field::new(grid, v)?)?
            }
            InitSpec::File { u, v } => {
                let (fu, _) = read_snapshot(u)?;
                let (fv, _) = read_snapshot(v)?;
                if fu.grid() != &grid || fv.grid() != &grid {
                    return Err(LabError::config("snapshot grid does not match grid.n / grid.L"));
                }
                InitialData::new(fu, fv)?
            }
        };
        Ok(data)
    }

    /// Schedules `(ψ, ζ)` resolved against the initial traces.
    pub fn schedules(&self, init: &InitialData) -> Result<(BoundarySchedule, BoundarySchedule)> {
        let b = &self.boundary;
        let make = |inf: &TraceSpec, rho: &TraceSpec, trace: &[f64]| -> Result<BoundarySchedule> {
            let terminal = inf.resolve(trace)?;
            Ok(match b.mode {
                BoundaryMode::Stationary => BoundarySchedule::stationary(terminal)?,
                BoundaryMode::Decaying => BoundarySchedule::decaying(terminal, rho.resolve(trace)?, b.gamma)?,
            })
        };
        let psi = make(&b.psi_inf, &b.rho, &init.u0.trace())?;
        let zeta = make(&b.zeta_inf, &b.zeta_rho, &init.v0.trace())?;
        init.check_traces(&psi, &zeta)?;
        Ok((psi, zeta))
    }

    pub fn problem(&self, init: &InitialData, kappa: f64) -> Result<Problem> {
        let (psi, zeta) = self.schedules(init)?;
        Ok(Problem::symmetric(ReactionModel::new(self.reaction), kappa, psi, zeta)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = "
        # two half bumps
        grid.n = 255
        grid.L = 6
        reaction.kind = smooth_logistic
        init.type = bumps
        init.centers = u@0; v@6
        init.radii = 2.4
        init.amplitudes = 0.2
        sweep.kappas = 1, 10, 100, 1000, 10000
    ";

    #[test]
    fn parses_the_default_sweep() {
        let c = Config::parse(SWEEP).unwrap();
        assert_eq!(c.counts, vec![255]);
        assert_eq!(c.lengths, vec![6.0]);
        assert_eq!(c.reaction, ReactionKind::SmoothLogistic);
        let InitSpec::Bumps { u, v } = &c.init else { panic!() };
        assert_eq!((u.len(), v.len()), (1, 1));
        assert_eq!(v[0].center, [6.0, 0.0]);
        let init = c.initial_data().unwrap();
        let (psi, zeta) = c.schedules(&init).unwrap();
        assert_eq!(psi.terminal()[0], 0.2);
        assert_eq!(zeta.terminal(), &[0.0, 0.2]);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(Config::parse("grid.nodes = 3").unwrap_err().to_string().contains("unknown key"));
        assert!(Config::parse("time.dt = 0.1\ntime.dt = 0.2").unwrap_err().to_string().contains("duplicate"));
        assert!(Config::parse("time.dt").is_err());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::parse("sweep.kappas = 10, 1").is_err());
        assert!(Config::parse("time.dt = 2").is_err());
        assert!(Config::parse("reaction.kind = cubic").is_err());
        assert!(Config::parse("boundary.rho = 0.1").is_err());
        assert!(Config::parse("init.type = bumps").is_err());
        assert!(Config::parse("grid.dim = 3").is_err());
    }

    #[test]
    fn two_dimensional_broadcast() {
        let c = Config::parse("grid.dim = 2\ngrid.n = 15\ninit.type = random\ninit.seed = 4").unwrap();
        assert_eq!(c.counts, vec![15, 15]);
        let a = c.initial_data().unwrap();
        let b = c.initial_data().unwrap();
        assert_eq!(a.u0.values(), b.u0.values());
        let (psi, _) = c.schedules(&a).unwrap();
        assert_eq!(psi.terminal(), a.u0.trace().as_slice());
    }

    #[test]
    fn explicit_trace_must_match_initial_data() {
        let c = Config::parse("init.type = random\nboundary.psi_inf = 0.5").unwrap();
        let init = c.initial_data().unwrap();
        assert!(c.schedules(&init).is_err());
        let z = Config::parse("boundary.mode = decaying\nboundary.rho = 0.1\nboundary.gamma = 2").unwrap();
        let init = z.initial_data().unwrap();
        let (psi, _) = z.schedules(&init).unwrap();
        assert_eq!(psi.mode(), BoundaryMode::Decaying);
        assert!(psi.at(1.0)[0] > 0.0);
    }
}

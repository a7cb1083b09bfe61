//! Snapshot, CSV and JSON-lines writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use segrelab_core::energy::AuditRow;
use segrelab_core::evolve::SeriesRow;
use segrelab_core::heatkernel::DecayCertificate;
use segrelab_core::mesh::{Field, Grid};
use serde::{Deserialize, Serialize};

use crate::{LabError, Result};

const SNAPSHOT_MAGIC: &str = "segrelab-field v1";

/// Shortest decimal that reads back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn join(xs: impl IntoIterator<Item = String>) -> String {
    xs.into_iter().collect::<Vec<_>>().join(",")
}

pub fn snapshot_string(f: &Field, t: f64) -> String {
    let g = f.grid();
    let n = join(g.counts().iter().map(|c| c.to_string()));
    let l = join(g.lengths().iter().map(|&x| num(x)));
    let mut out = format!("{SNAPSHOT_MAGIC} dim={} n={n} L={l} t={}\n", g.dim(), num(t));
    for &v in f.values() {
        writeln!(out, "{}", num(v)).unwrap();
    }
    out
}

pub fn write_snapshot(path: &Path, f: &Field, t: f64) -> Result<()> {
    fs::write(path, snapshot_string(f, t)).map_err(|e| LabError::io(path, e))
}

pub fn parse_snapshot(text: &str) -> std::result::Result<(Field, f64), String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let rest = header.strip_prefix(SNAPSHOT_MAGIC).ok_or("missing segrelab-field v1 header")?;
    let (mut dim, mut counts, mut lengths, mut t) = (None, None, None, None);
    for tok in rest.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| format!("bad header token `{tok}`"))?;
        let list = || v.split(',').map(str::parse::<f64>).collect::<std::result::Result<Vec<_>, _>>();
        match k {
            "dim" => dim = Some(v.parse::<usize>().map_err(|_| "bad dim")?),
            "n" => counts = Some(list().map_err(|_| "bad n")?.into_iter().map(|x| x as usize).collect::<Vec<_>>()),
            "L" => lengths = Some(list().map_err(|_| "bad L")?),
            "t" => t = Some(v.parse::<f64>().map_err(|_| "bad t")?),
            _ => return Err(format!("unknown header field `{k}`")),
        }
    }
    let (Some(dim), Some(counts), Some(lengths), Some(t)) = (dim, counts, lengths, t) else {
        return Err("header needs dim, n, L and t".into());
    };
    if counts.len() != dim {
        return Err(format!("dim={dim} but n has {} entries", counts.len()));
    }
    let grid = Grid::new(&lengths, &counts).map_err(|e| e.to_string())?;
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|_| format!("bad value `{l}`")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let field = Field::new(grid, values).map_err(|e| e.to_string())?;
    Ok((field, t))
}

pub fn read_snapshot(path: &Path) -> Result<(Field, f64)> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    parse_snapshot(&text).map_err(|msg| LabError::Format { path: path.to_path_buf(), msg })
}

/// Consecutive snapshot blocks in one file.
pub fn write_snapshot_series(path: &Path, frames: &[(&Field, f64)]) -> Result<()> {
    let text: String = frames.iter().map(|(f, t)| snapshot_string(f, *t)).collect();
    write_text(path, &text)
}

pub fn read_snapshot_series(path: &Path) -> Result<Vec<(Field, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let mut blocks: Vec<String> = Vec::new();
    for line in text.lines() {
        if line.starts_with(SNAPSHOT_MAGIC) || blocks.is_empty() {
            blocks.push(String::new());
        }
        let b = blocks.last_mut().unwrap();
        b.push_str(line);
        b.push('\n');
    }
    blocks.iter().map(|b| parse_snapshot(b).map_err(|msg| LabError::Format { path: path.to_path_buf(), msg })).collect()
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut out = String::from(SeriesRow::HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            r.step.to_string(),
            num(r.t),
            num(r.energy),
            num(r.overlap_l2sq),
            num(r.ku2v2),
            num(r.du_norm),
            num(r.dv_norm),
            num(r.u_h1),
            num(r.v_h1),
            num(r.u_min),
            num(r.u_max),
            num(r.v_min),
            num(r.v_max),
        ];
        out.push_str(&join(fields));
        out.push('\n');
    }
    out
}

pub fn audit_csv(rows: &[AuditRow]) -> String {
    let mut out = String::from(AuditRow::HEADER);
    out.push('\n');
    for r in rows {
        let f = [r.kappa, r.max_h1, r.min_energy, r.max_energy, r.mu, r.fitted_r, r.slope, r.slope_ci];
        out.push_str(&join(f.into_iter().map(num)));
        out.push('\n');
    }
    out
}

pub fn decay_csv(certs: &[DecayCertificate]) -> String {
    let mut out = String::from(DecayCertificate::HEADER);
    out.push('\n');
    for c in certs {
        let nums = [c.alpha, c.omega, c.c_alpha, c.max_violation, c.lambda_min, c.lambda_max].map(num);
        out.push_str(&join(nums.into_iter().chain([c.grid_id.clone()])));
        out.push('\n');
    }
    out
}

/// One line of the per-κ certificate file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub kappa: f64,
    pub residual_u: f64,
    pub residual_v: f64,
    pub overlap: f64,
    pub kappa_overlap: f64,
    pub vi_u: f64,
    pub vi_v: f64,
    pub holder_ratio: Option<f64>,
    pub method: String,
    pub iterations: usize,
    /// Where the Newton guess came from.
    pub guess: String,
}

pub fn jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| LabError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip_is_exact() {
        let g = Grid::new_2d([1.0, 0.3], [4, 3]).unwrap();
        let f = Field::from_fn(g, |x| (x[0] * 7.1).sin() * 1e-17 + x[1] / 3.0);
        let text = snapshot_string(&f, 0.1 + 0.2);
        assert!(text.starts_with("segrelab-field v1 dim=2 n=4,3 L=1.0,0.3 t=0.30000000000000004\n"));
        let (back, t) = parse_snapshot(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(t, 0.1 + 0.2);
    }

    #[test]
    fn malformed_snapshots_are_rejected() {
        assert!(parse_snapshot("").is_err());
        assert!(parse_snapshot("field v1 dim=1 n=3 L=1 t=0\n").is_err());
        assert!(parse_snapshot("segrelab-field v1 dim=1 n=3 L=1 t=0\n0\n0\n").is_err());
        assert!(parse_snapshot("segrelab-field v1 dim=2 n=3 L=1 t=0\n").is_err());
    }

    #[test]
    fn certificate_line_has_the_documented_keys() {
        let r = CertificateRecord {
            kappa: 10.0,
            residual_u: 0.0,
            residual_v: 0.0,
            overlap: 0.0,
            kappa_overlap: 0.0,
            vi_u: 0.0,
            vi_v: 0.0,
            holder_ratio: None,
            method: "newton".into(),
            iterations: 1,
            guess: "final_state".into(),
        };
        let line = jsonl(&[r]).unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        for k in [
            "kappa",
            "residual_u",
            "residual_v",
            "overlap",
            "kappa_overlap",
            "vi_u",
            "vi_v",
            "holder_ratio",
            "method",
            "iterations",
        ] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}

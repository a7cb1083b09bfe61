//! Uniform box grids, nodal fields, the Dirichlet Laplacian and its exact
//! sine eigensystem, harmonic extensions, and discrete norms.

mod eigen;
mod field;
mod grid;
mod harmonic;
mod norms;
mod ops;

pub use eigen::{eigensystem, poincare_constant, EigenSystem};
pub use field::Field;
pub use grid::{BoundaryFace, Grid};
pub use harmonic::{harmonic_extension, HARMONIC_TOLERANCE};
pub use norms::{
    h1_norm, h1_seminorm, l2_norm, linf_norm, lp_norm, norms, pair_h1_distance, pair_h1_norm, pair_l2_distance,
    pair_linf_distance, Norms,
};
pub use ops::{dirichlet_form, inner, laplacian_apply, neg_laplacian, normal_derivative};

pub(crate) use ops::interior_sum;

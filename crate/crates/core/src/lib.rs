//! Elasticity tensors in Kelvin notation.
//!
//! A stiffness tensor is stored as a symmetric positive definite Kelvin matrix
//! (3×3 in 2D, 6×6 in 3D) and factored as `C = T(Q)ᵀ V Λ Vᵀ T(Q)`: a spatial
//! rotation `Q`, eigen-strain distributors `V` and Kelvin moduli `Λ`. Each
//! symmetry class fixes which parts of `(Q, V, Λ)` are free, giving a flat
//! parameter vector `z = (q, p, μ)`.
//!
//! On top of this representation the crate provides:
//!
//! * [`classes`]: the 12 symmetry classes, reduced forms and class checks;
//! * [`metrics`]: Euclidean, log-Euclidean and product distances and geodesics;
//! * [`means`]: weighted Fréchet means, including Karcher means of rotations;
//! * [`stochastic`]: reproducible random Kelvin matrices;
//! * [`field`]: 1D interpolated and Karhunen-Loève random fields;
//! * [`cli`]: the `kelvin` command-line tool.
//!
//! ```
//! use kelvin_tensor::{build_full, ParamVector, SymmetryClass};
//!
//! let z = ParamVector::new(vec![], vec![], vec![3f64.ln(), 2f64.ln()]);
//! let (c, _) = build_full(SymmetryClass::Iso3D, &z).unwrap();
//! let mut ev: Vec<f64> = c.eigenvalues().iter().copied().collect();
//! ev.sort_by(|a, b| b.total_cmp(a));
//! assert!((ev[0] - 3.0).abs() < 1e-12 && (ev[5] - 2.0).abs() < 1e-12);
//! ```

pub mod classes;
pub mod cli;
pub mod error;
pub mod field;
pub mod kelvin;
pub mod lie;
pub mod linalg;
pub mod means;
pub mod metrics;
pub mod stochastic;

pub use classes::{
    build_full, build_reduced, check_reduced_form, class_spec, ClassSpec, LieTriple, ParamVector, SymmetryClass,
};
pub use error::{Error, Result};
pub use field::{interpolate_field, kl_decompose, matern_cov, sample_random_field, Grid1D, KLExpansion, MaternCov};
pub use kelvin::{directional_young_modulus, orthotropic_kelvin, KelvinMatrix, OrthotropicConstants};
pub use lie::{exp_so3, log_rotation, trep, trep_rot};
pub use means::{mean_euclid, mean_product, mean_rotation, MeanResult, WeightedEnsemble};
pub use metrics::{dist_euclid, dist_product, geodesic, MetricKind, MetricWeights};
pub use stochastic::{random_kelvin, sample_params, GenConfig, SampleBatch};

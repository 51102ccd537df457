//! Weighted Fréchet means of Kelvin-matrix ensembles.
//!
//! The product distance is a weighted sum of squared factor distances, so the
//! weighted variance `Σ w_j θ_E(x, x_j)²` splits into three independent
//! variances (moduli, `Q`, `V`) and is minimized factor by factor.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::LieTriple;
use crate::error::{Error, Result};
use crate::kelvin::{KelvinMatrix, REF_MODULUS_GPA};
use crate::lie::{expm, log_rotation, max_rotation_angle};
use crate::linalg::{sym_map, tree_sum, tree_sum_mat};
use crate::metrics::{dist_euclid, dist_log_euclid, dist_product, log_spd, MetricKind, MetricWeights};

/// Ensembles above this size score the Karcher starting point on a shortlist.
const EXACT_INIT_MAX: usize = 64;
const INIT_SHORTLIST: usize = 16;
/// Items per parallel work unit; below this, evaluation stays sequential.
const PAR_MIN: usize = 256;

/// Items with positive weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEnsemble<T> {
    items: Vec<T>,
    weights: Vec<f64>,
}

impl<T> WeightedEnsemble<T> {
    pub fn new(items: Vec<T>, weights: Vec<f64>) -> Result<Self> {
        check_weights(items.len(), &weights)?;
        Ok(Self { items, weights })
    }

    pub fn uniform(items: Vec<T>) -> Result<Self> {
        let n = items.len();
        Self::new(items, vec![1.0 / n.max(1) as f64; n])
    }

    /// Rescales arbitrary positive weights to sum to one.
    pub fn normalized(items: Vec<T>, weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Invalid("weights must be positive".into()));
        }
        let s = tree_sum(&weights);
        Self::new(items, weights.iter().map(|w| w / s).collect())
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn check_weights(n: usize, w: &[f64]) -> Result<()> {
    if n == 0 {
        return Err(Error::Invalid("ensemble is empty".into()));
    }
    if w.len() != n {
        return Err(Error::DimMismatch { expected: n, got: w.len() });
    }
    if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Invalid("weights must be positive".into()));
    }
    let s = tree_sum(w);
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::Invalid(format!("weights sum to {s}, expected 1")));
    }
    Ok(())
}

fn same_kelvin_dims(items: &[KelvinMatrix]) -> Result<()> {
    let k = items[0].dim();
    match items.iter().find(|c| c.dim() != k) {
        Some(c) => Err(Error::DimMismatch { expected: k, got: c.dim() }),
        None => Ok(()),
    }
}

/// Stopping rule of the Karcher iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KarcherOptions {
    /// Bound on the Frobenius norm of the Riemannian gradient.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KarcherOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 200 }
    }
}

/// Outcome of a mean computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanResult {
    pub metric: MetricKind,
    pub mean: KelvinMatrix,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub triple: Option<LieTriple>,
    pub variance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

/// Weighted sum of per-item values with a fixed (pairwise) summation order.
///
/// Items are evaluated in parallel for large ensembles; the result is
/// bit-identical to the sequential evaluation.
fn weighted_sum<T: Sync>(items: &[T], w: &[f64], f: impl Fn(&T) -> Result<f64> + Sync) -> Result<f64> {
    let terms: Vec<f64> = if items.len() >= PAR_MIN {
        items.par_iter().zip(w.par_iter()).map(|(x, &wi)| Ok(wi * f(x)?)).collect::<Result<_>>()?
    } else {
        items.iter().zip(w).map(|(x, &wi)| Ok(wi * f(x)?)).collect::<Result<_>>()?
    };
    Ok(tree_sum(&terms))
}

fn weighted_mat_sum<T: Sync>(
    items: &[T],
    w: &[f64],
    f: impl Fn(&T) -> Result<DMatrix<f64>> + Sync,
) -> Result<DMatrix<f64>> {
    let terms: Vec<DMatrix<f64>> = if items.len() >= PAR_MIN {
        items.par_iter().zip(w.par_iter()).map(|(x, &wi)| Ok(f(x)? * wi)).collect::<Result<_>>()?
    } else {
        items.iter().zip(w).map(|(x, &wi)| Ok(f(x)? * wi)).collect::<Result<_>>()?
    };
    Ok(tree_sum_mat(&terms))
}

/// Weighted arithmetic mean.
pub fn mean_euclid(e: &WeightedEnsemble<KelvinMatrix>) -> Result<MeanResult> {
    same_kelvin_dims(&e.items)?;
    let m = weighted_mat_sum(&e.items, &e.weights, |c| Ok(c.matrix().clone()))?;
    let mean = KelvinMatrix::new(m)?;
    let variance = weighted_sum(&e.items, &e.weights, |c| Ok(dist_euclid(&mean, c)?.powi(2)))?;
    Ok(MeanResult { metric: MetricKind::Euclid, mean, triple: None, variance, iterations: 0, converged: true, gradient_norm: 0.0 })
}

/// `exp(Σ w_j log C_j)`.
pub fn mean_log_euclid(e: &WeightedEnsemble<KelvinMatrix>) -> Result<MeanResult> {
    same_kelvin_dims(&e.items)?;
    let l = weighted_mat_sum(&e.items, &e.weights, |c| Ok(log_spd(c)))?;
    let mean = KelvinMatrix::new(sym_map(&l, |x| x.exp() * REF_MODULUS_GPA))?;
    let variance = weighted_sum(&e.items, &e.weights, |c| Ok(dist_log_euclid(&mean, c)?.powi(2)))?;
    Ok(MeanResult { metric: MetricKind::LogEuclid, mean, triple: None, variance, iterations: 0, converged: true, gradient_norm: 0.0 })
}

/// Weighted geometric mean `exp(Σ w_j log Λ_j)` of positive diagonals.
pub fn mean_logdiag(ls: &[DVector<f64>], w: &[f64]) -> Result<DVector<f64>> {
    check_weights(ls.len(), w)?;
    let k = ls[0].len();
    if let Some(l) = ls.iter().find(|l| l.len() != k) {
        return Err(Error::DimMismatch { expected: k, got: l.len() });
    }
    if ls.iter().flatten().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Invalid("diagonal entries must be positive".into()));
    }
    Ok(DVector::from_fn(k, |i, _| {
        let terms: Vec<f64> = ls.iter().zip(w).map(|(l, wi)| wi * l[i].ln()).collect();
        tree_sum(&terms).exp()
    }))
}

/// Karcher mean of rotations (or of orthogonal matrices sharing one determinant).
#[derive(Debug, Clone)]
pub struct RotationMean {
    pub mean: DMatrix<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

fn sq_dist(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    Ok(log_rotation(&(a * b.transpose()))?.norm_squared())
}

fn max_angle_from(qs: &[DMatrix<f64>], c: &DMatrix<f64>) -> f64 {
    qs.iter()
        .map(|q| max_rotation_angle(&(q * c.transpose())).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}

/// Member with the smallest weighted sum of squared distances.
///
/// Exact for small ensembles; larger ones score only the members closest to
/// the orthogonal projection of the chordal mean.
fn karcher_init(qs: &[DMatrix<f64>], w: &[f64]) -> Result<usize> {
    let n = qs.len();
    let candidates: Vec<usize> = if n <= EXACT_INIT_MAX {
        (0..n).collect()
    } else {
        let chordal = weighted_mat_sum(qs, w, |q| Ok(q.clone()))?;
        let svd = chordal.svd(true, true);
        let proj = svd.u.unwrap() * svd.v_t.unwrap();
        let mut by_chord: Vec<(f64, usize)> = qs.iter().enumerate().map(|(i, q)| ((q - &proj).norm(), i)).collect();
        by_chord.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        by_chord.iter().take(INIT_SHORTLIST).map(|&(_, i)| i).collect()
    };
    let mut best = (f64::INFINITY, candidates[0]);
    for &c in &candidates {
        let s = weighted_sum(qs, w, |q| sq_dist(q, &qs[c]).or(Ok(f64::INFINITY)))?;
        if s < best.0 {
            best = (s, c);
        }
    }
    Ok(best.1)
}

/// Weighted Karcher mean: fixed point of `Q ← exp(Σ w_j log(Q_j Qᵀ))·Q`.
///
/// The ensemble must lie within a ball of radius π/2 (largest invariant-plane
/// angle) around one of its members, and the returned mean must as well.
pub fn mean_rotation(qs: &[DMatrix<f64>], w: &[f64], opts: &KarcherOptions) -> Result<RotationMean> {
    check_weights(qs.len(), w)?;
    let n = qs[0].nrows();
    if let Some(q) = qs.iter().find(|q| q.nrows() != n || q.ncols() != n) {
        return Err(Error::DimMismatch { expected: n, got: q.nrows() });
    }
    let limit = std::f64::consts::FRAC_PI_2;
    let start = karcher_init(qs, w)?;
    if max_angle_from(qs, &qs[start]) >= limit {
        let centered = (0..qs.len()).any(|c| max_angle_from(qs, &qs[c]) < limit);
        if !centered {
            let angle = max_angle_from(qs, &qs[start]);
            return Err(Error::Dispersion { angle, limit });
        }
    }
    let mut q = qs[start].clone();
    let mut iterations = 0;
    loop {
        let g = weighted_mat_sum(qs, w, |qj| log_rotation(&(qj * q.transpose())))?;
        let gn = g.norm();
        if gn <= opts.tol {
            let angle = max_angle_from(qs, &q);
            if angle >= limit {
                return Err(Error::Dispersion { angle, limit });
            }
            return Ok(RotationMean { mean: q, iterations, gradient_norm: gn });
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: gn });
        }
        q = expm(&g) * &q;
        // Re-orthogonalize to keep rounding drift out of the iteration.
        let svd = q.clone().svd(true, true);
        q = svd.u.unwrap() * svd.v_t.unwrap();
        iterations += 1;
    }
}

/// `Σ w_j θ_E(mean, item_j)²`.
pub fn variance_product(mean: &LieTriple, e: &WeightedEnsemble<LieTriple>, w: &MetricWeights) -> Result<f64> {
    weighted_sum(&e.items, &e.weights, |t| Ok(dist_product(mean, t, w)?.powi(2)))
}

/// Product-metric mean: per-factor Karcher means of `Q` and `V`, geometric mean of `Λ`.
///
/// The factor weights `c_V`, `c_T` scale each factor variance but do not move
/// its minimizer.
pub fn mean_product(e: &WeightedEnsemble<LieTriple>, w: &MetricWeights, opts: &KarcherOptions) -> Result<MeanResult> {
    let k = e.items[0].kelvin_dim();
    if let Some(t) = e.items.iter().find(|t| t.kelvin_dim() != k) {
        return Err(Error::DimMismatch { expected: k, got: t.kelvin_dim() });
    }
    let qs: Vec<DMatrix<f64>> = e.items.iter().map(|t| t.q.clone()).collect();
    let vs: Vec<DMatrix<f64>> = e.items.iter().map(|t| t.v.clone()).collect();
    let ls: Vec<DVector<f64>> = e.items.iter().map(|t| t.lambda.clone()).collect();
    let qm = mean_rotation(&qs, &e.weights, opts)?;
    let vm = mean_rotation(&vs, &e.weights, opts)?;
    let lm = mean_logdiag(&ls, &e.weights)?;
    let triple = LieTriple::new(qm.mean, vm.mean, lm)?;
    let variance = variance_product(&triple, e, w)?;
    Ok(MeanResult {
        metric: MetricKind::Product,
        mean: triple.to_kelvin()?,
        triple: Some(triple),
        variance,
        iterations: qm.iterations.max(vm.iterations),
        converged: true,
        gradient_norm: qm.gradient_norm.hypot(vm.gradient_norm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{build_full, ParamVector, SymmetryClass};
    use crate::lie::exp_so3;
    use crate::metrics::{geodesic, rotation_geodesic};
    use approx::assert_relative_eq;

    fn ortho(q: [f64; 3], p: [f64; 3], mu: [f64; 6]) -> LieTriple {
        build_full(SymmetryClass::Ortho3D, &ParamVector::new(q.to_vec(), p.to_vec(), mu.to_vec())).unwrap().1
    }

    #[test]
    fn weights_validated() {
        let i = KelvinMatrix::identity(3).unwrap();
        assert!(WeightedEnsemble::new(vec![i.clone()], vec![0.9]).is_err());
        assert!(WeightedEnsemble::new(vec![i.clone(), i.clone()], vec![1.5, -0.5]).is_err());
        assert!(WeightedEnsemble::<KelvinMatrix>::uniform(vec![]).is_err());
        assert!(WeightedEnsemble::normalized(vec![i.clone(), i], vec![1.0, 3.0]).is_ok());
    }

    #[test]
    fn euclid_examples() {
        let i = KelvinMatrix::identity(6).unwrap();
        let r = mean_euclid(&WeightedEnsemble::uniform(vec![i.clone(), i.scale(3.0).unwrap()]).unwrap()).unwrap();
        assert_relative_eq!(r.mean.into_matrix(), DMatrix::identity(6, 6) * 2.0, epsilon = 1e-15);
        let e = WeightedEnsemble::new(vec![i.clone(), i.scale(5.0).unwrap()], vec![0.25, 0.75]).unwrap();
        assert_relative_eq!(mean_euclid(&e).unwrap().mean.into_matrix(), DMatrix::identity(6, 6) * 4.0, epsilon = 1e-15);
    }

    #[test]
    fn logdiag_examples() {
        let e2 = std::f64::consts::E.powi(2);
        let m = mean_logdiag(&[DVector::from_element(3, 1.0), DVector::from_element(3, e2)], &[0.5, 0.5]).unwrap();
        assert_relative_eq!(m, DVector::from_element(3, std::f64::consts::E), epsilon = 1e-15);
        let l = DVector::from_vec(vec![3.0, 2.0, 1.0]);
        assert_relative_eq!(mean_logdiag(&[l.clone(), l.clone()], &[0.5, 0.5]).unwrap(), l, epsilon = 1e-15);
    }

    #[test]
    fn rotation_examples() {
        let opts = KarcherOptions::default();
        let q = exp_so3(&[0.3, -0.2, 0.5]);
        let r = mean_rotation(&[q.clone(), q.clone(), q.clone()], &[0.2, 0.3, 0.5], &opts).unwrap();
        assert_relative_eq!(r.mean, q, epsilon = 1e-15);
        assert!(r.iterations <= 1);

        let r = mean_rotation(&[exp_so3(&[0.0, 0.0, 0.7]), exp_so3(&[0.0, 0.0, -0.7])], &[0.5, 0.5], &opts).unwrap();
        assert_relative_eq!(r.mean, DMatrix::identity(3, 3), epsilon = 1e-12);

        let a = exp_so3(&[0.3, -0.2, 0.5]);
        let b = exp_so3(&[-0.4, 0.6, 0.1]);
        let mid = rotation_geodesic(&a, &b, 0.5).unwrap();
        let r = mean_rotation(&[a, b], &[0.5, 0.5], &opts).unwrap();
        assert_relative_eq!(r.mean, mid, epsilon = 1e-9);
        assert!(r.gradient_norm <= 1e-11);
    }

    #[test]
    fn rotation_dispersion_rejected() {
        let qs = [exp_so3(&[0.0, 0.0, 0.0]), exp_so3(&[0.0, 0.0, 2.0]), exp_so3(&[0.0, 0.0, -2.0])];
        let r = mean_rotation(&qs, &[1.0 / 3.0; 3], &KarcherOptions::default());
        assert!(matches!(r, Err(Error::Dispersion { .. })));
    }

    #[test]
    fn product_examples() {
        let w = MetricWeights::default();
        let opts = KarcherOptions::default();
        let a = ortho([0.2, 0.1, -0.3], [0.1, 0.2, 0.3], [3.0, 2.5, 2.0, 1.5, 1.0, 0.5]);
        let r = mean_product(&WeightedEnsemble::uniform(vec![a.clone()]).unwrap(), &w, &opts).unwrap();
        assert_relative_eq!(r.triple.unwrap().v, a.v, epsilon = 1e-15);

        let mut b = a.clone();
        b.lambda = a.lambda.map(|x| x * 9.0);
        let r = mean_product(&WeightedEnsemble::uniform(vec![a.clone(), b.clone()]).unwrap(), &w, &opts).unwrap();
        let t = r.triple.unwrap();
        assert_relative_eq!(t.q, a.q, epsilon = 1e-14);
        assert_relative_eq!(t.lambda, a.lambda.map(|x| x * 3.0), epsilon = 1e-12);

        let c = ortho([-0.3, 0.4, 0.1], [0.3, -0.2, 0.0], [2.0, 2.2, 1.0, 1.5, 0.7, 0.9]);
        let r = mean_product(&WeightedEnsemble::uniform(vec![a.clone(), c.clone()]).unwrap(), &w, &opts).unwrap();
        let mid = geodesic(&a, &c, MetricKind::Product, 0.5).unwrap();
        assert_relative_eq!(r.mean.into_matrix(), mid.into_matrix(), epsilon = 1e-9);
    }

    #[test]
    fn variance_at_mean_not_above_members() {
        let w = MetricWeights::new(0.5, 2.0).unwrap();
        let items = vec![
            ortho([0.2, 0.1, -0.3], [0.1, 0.2, 0.3], [3.0, 2.5, 2.0, 1.5, 1.0, 0.5]),
            ortho([0.1, 0.3, -0.1], [0.0, 0.1, 0.2], [2.0, 2.5, 2.4, 1.0, 1.2, 0.5]),
            ortho([0.0, 0.2, -0.2], [0.2, 0.3, 0.1], [4.0, 2.0, 2.0, 1.1, 1.0, 0.6]),
        ];
        let e = WeightedEnsemble::new(items, vec![0.2, 0.5, 0.3]).unwrap();
        let r = mean_product(&e, &w, &KarcherOptions::default()).unwrap();
        for m in e.items() {
            assert!(r.variance <= variance_product(m, &e, &w).unwrap() + 1e-12);
        }
    }

    #[test]
    fn parallel_equals_sequential() {
        let qs: Vec<DMatrix<f64>> = (0..600).map(|i| exp_so3(&[0.001 * i as f64, 0.2, -0.1])).collect();
        let w = vec![1.0 / 600.0; 600];
        let par = weighted_mat_sum(&qs, &w, log_rotation).unwrap();
        let seq = tree_sum_mat(&qs.iter().zip(&w).map(|(q, wi)| log_rotation(q).unwrap() * *wi).collect::<Vec<_>>());
        assert_eq!(par, seq);
    }
}

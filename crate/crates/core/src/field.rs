//! One-dimensional fields of Kelvin matrices on `x ∈ [0, 1]`.
//!
//! Two kinds of fields are provided: geodesic interpolation between two
//! endpoint matrices, and Gaussian random parameter fields synthesized from a
//! discrete Karhunen-Loève expansion of a Matérn kernel. Parameter correlation
//! is separable, `Cov(z̃_i(x), z̃_j(y)) = σ_i σ_j R_ij ρ(|x − y|)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{build_full, class_spec, LieTriple, ParamVector, SymmetryClass};
use crate::error::{Error, Result};
use crate::kelvin::KelvinMatrix;
use crate::linalg::{from_rows, sym_eig_desc, upper_triangle};
use crate::metrics::{geodesic, upper_triangle_names, MetricKind};
use crate::stochastic::{cov_factor, sample_rng};

/// Strictly increasing points in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Grid1D(Vec<f64>);

impl Grid1D {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Invalid("a grid needs at least 2 points".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("grid points must be strictly increasing".into()));
        }
        if points[0] < 0.0 || points[points.len() - 1] > 1.0 {
            return Err(Error::Invalid("grid points must lie in [0, 1]".into()));
        }
        Ok(Self(points))
    }

    /// `n` equally spaced points including 0 and 1.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Invalid("a grid needs at least 2 points".into()));
        }
        Self::new((0..n).map(|i| i as f64 / (n - 1) as f64).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Trapezoidal quadrature weights.
    pub fn weights(&self) -> DVector<f64> {
        let x = &self.0;
        let n = x.len();
        DVector::from_fn(n, |i, _| {
            let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
            0.5 * (left + right)
        })
    }
}

impl TryFrom<Vec<f64>> for Grid1D {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Grid1D> for Vec<f64> {
    fn from(g: Grid1D) -> Self {
        g.0
    }
}

/// Matérn covariance `σ² 2^{1−ν}/Γ(ν) (√(2ν) h/ℓ)^ν K_ν(√(2ν) h/ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternCov {
    pub nu: f64,
    pub ell: f64,
    #[serde(default = "one")]
    pub sigma2: f64,
}

fn one() -> f64 {
    1.0
}

impl MaternCov {
    pub fn new(nu: f64, ell: f64, sigma2: f64) -> Result<Self> {
        let m = Self { nu, ell, sigma2 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("nu", self.nu), ("ell", self.ell), ("sigma2", self.sigma2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("Matérn {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Same kernel with unit variance.
    pub fn correlation(&self) -> Self {
        Self { sigma2: 1.0, ..*self }
    }
}

/// Covariance at distance `h ≥ 0`; closed forms for ν ∈ {½, 3/2, 5/2}.
pub fn matern_cov(h: f64, m: &MaternCov) -> f64 {
    let h = h.abs();
    let r = h / m.ell;
    if m.nu == 0.5 {
        m.sigma2 * (-r).exp()
    } else if m.nu == 1.5 {
        let s = 3f64.sqrt() * r;
        m.sigma2 * (1.0 + s) * (-s).exp()
    } else if m.nu == 2.5 {
        let s = 5f64.sqrt() * r;
        m.sigma2 * (1.0 + s + s * s / 3.0) * (-s).exp()
    } else {
        matern_cov_bessel(h, m)
    }
}

/// General-ν evaluation through the modified Bessel function `K_ν`.
pub fn matern_cov_bessel(h: f64, m: &MaternCov) -> f64 {
    let h = h.abs();
    if h == 0.0 {
        return m.sigma2;
    }
    let s = (2.0 * m.nu).sqrt() * h / m.ell;
    let log_pref = (1.0 - m.nu) * 2f64.ln() - statrs::function::gamma::ln_gamma(m.nu) + m.nu * s.ln();
    // K_ν(s) = e^{−s}·bessel_k_scaled(ν, s), combined in log space.
    m.sigma2 * (log_pref - s + bessel_k_scaled(m.nu, s).ln()).exp()
}

/// `e^{x} K_ν(x)` for `x > 0`, from `K_ν(x) = ∫₀^∞ e^{−x cosh t} cosh(νt) dt`.
///
/// The integrand is analytic and decays double-exponentially, so the
/// trapezoidal rule converges geometrically in the step size.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    let h = 0.01;
    let f = |t: f64| (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
    let mut sum = 0.5 * f(0.0);
    let mut t = h;
    loop {
        let v = f(t);
        sum += v;
        if x * (t.cosh() - 1.0) - nu * t > 45.0 {
            break;
        }
        t += h;
    }
    sum * h
}

/// Discrete Karhunen-Loève expansion on a grid.
///
/// Eigenpairs solve `K W r = μ r` with `W` the trapezoidal weights; the `r_ℓ`
/// are orthonormal in the weighted inner product `Σ_i w_i r(x_i) s(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KLExpansion {
    pub eigenvalues: DVector<f64>,
    /// Columns are the eigenvector fields `r_ℓ` on the grid.
    pub vectors: DMatrix<f64>,
    pub weights: DVector<f64>,
    /// Number of retained terms.
    pub rank: usize,
}

/// Eigen-decomposes the kernel matrix `K_ij = k(x_i, x_j)`.
pub fn kl_decompose(grid: &Grid1D, kernel: impl Fn(f64, f64) -> f64) -> Result<KLExpansion> {
    let x = grid.points();
    let k = DMatrix::from_fn(x.len(), x.len(), |i, j| kernel(x[i], x[j]));
    kl_decompose_matrix(grid, &k)
}

/// KL expansion of the Matérn kernel on a grid.
pub fn kl_matern(grid: &Grid1D, m: &MaternCov) -> Result<KLExpansion> {
    m.validate()?;
    kl_decompose(grid, |a, b| matern_cov(a - b, m))
}

pub fn kl_decompose_matrix(grid: &Grid1D, k: &DMatrix<f64>) -> Result<KLExpansion> {
    let n = grid.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::DimMismatch { expected: n, got: k.nrows() });
    }
    let w = grid.weights();
    let sw = w.map(f64::sqrt);
    let a = DMatrix::from_fn(n, n, |i, j| sw[i] * k[(i, j)] * sw[j]);
    let (vals, u) = sym_eig_desc(&a);
    let trace = a.trace().abs();
    let min = vals[n - 1];
    if min < -1e-10 * trace {
        return Err(Error::NotPsd { value: min });
    }
    let vectors = DMatrix::from_fn(n, n, |i, l| u[(i, l)] / sw[i]);
    Ok(KLExpansion { eigenvalues: vals, vectors, weights: w, rank: n })
}

impl KLExpansion {
    /// Scalings `α_ℓ = √μ_ℓ` (negative round-off clipped to zero).
    pub fn scalings(&self) -> DVector<f64> {
        self.eigenvalues.map(|m| m.max(0.0).sqrt())
    }

    /// Keeps the leading `rank` terms.
    pub fn truncate(mut self, rank: usize) -> Result<Self> {
        if rank == 0 || rank > self.eigenvalues.len() {
            return Err(Error::Invalid(format!("rank {rank} outside 1..={}", self.eigenvalues.len())));
        }
        self.rank = rank;
        Ok(self)
    }

    /// Smallest rank whose eigenvalues capture `fraction` of the trace.
    pub fn rank_for_energy(&self, fraction: f64) -> usize {
        let total: f64 = self.eigenvalues.iter().map(|m| m.max(0.0)).sum();
        let mut acc = 0.0;
        for (l, m) in self.eigenvalues.iter().enumerate() {
            acc += m.max(0.0);
            if acc >= fraction * total {
                return l + 1;
            }
        }
        self.eigenvalues.len()
    }

    /// `Σ_{ℓ<rank} μ_ℓ r_ℓ(x_i) r_ℓ(x_j)`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let r = self.vectors.columns(0, self.rank);
        let m = DMatrix::from_diagonal(&self.eigenvalues.rows(0, self.rank).into_owned());
        r * m * r.transpose()
    }

    /// Truncation error `√(Σ_{ℓ≥rank} μ_ℓ²)`.
    ///
    /// This equals [`weighted_frobenius`] of `K − reconstruct()`.
    pub fn truncation_error(&self) -> f64 {
        self.eigenvalues.rows_range(self.rank..).norm()
    }

    /// Gram matrix `Rᵀ W R` of the retained eigenvector fields.
    pub fn gram(&self) -> DMatrix<f64> {
        let r = self.vectors.columns(0, self.rank);
        r.transpose() * DMatrix::from_diagonal(&self.weights) * r
    }

    /// Recovers `ζ_ℓ = ⟨f, r_ℓ⟩_W / α_ℓ` from a scalar field for the retained terms
    /// with positive eigenvalue (others are returned as zero).
    pub fn project(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        if f.len() != self.weights.len() {
            return Err(Error::DimMismatch { expected: self.weights.len(), got: f.len() });
        }
        let wf = f.component_mul(&self.weights);
        let floor = 1e-14 * self.eigenvalues[0].abs();
        Ok(DVector::from_fn(self.rank, |l, _| {
            let mu = self.eigenvalues[l];
            if mu > floor {
                self.vectors.column(l).dot(&wf) / mu.sqrt()
            } else {
                0.0
            }
        }))
    }

    /// `Σ_{ℓ<rank} α_ℓ ζ_ℓ r_ℓ`.
    pub fn synthesize(&self, zeta: &DVector<f64>) -> Result<DVector<f64>> {
        if zeta.len() != self.rank {
            return Err(Error::DimMismatch { expected: self.rank, got: zeta.len() });
        }
        let a = self.scalings();
        Ok(self.vectors.columns(0, self.rank) * DVector::from_fn(self.rank, |l, _| a[l] * zeta[l]))
    }
}

/// `‖W^{1/2} M W^{1/2}‖_F`, the Hilbert-Schmidt norm of a kernel matrix under quadrature.
pub fn weighted_frobenius(m: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let sw = w.map(f64::sqrt);
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| sw[i] * m[(i, j)] * sw[j]).norm()
}

/// Field value at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    pub x: f64,
    pub kelvin: KelvinMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triple: Option<LieTriple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<ParamVector>,
}

/// A realized (or interpolated) Kelvin-matrix field on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub index: u64,
    pub points: Vec<FieldPoint>,
}

impl FieldSample {
    pub fn dets(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.kelvin.det()).collect()
    }

    /// Comment line, then `x, det, λ1…λk, C11…Ckk` (moduli descending, GPa).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# unit: GPa; realization: {}", self.index)?;
        let k = self.points.first().map_or(6, |p| p.kelvin.dim());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["x".to_string(), "det".to_string()];
        header.extend((1..=k).map(|i| format!("lambda{i}")));
        header.extend(upper_triangle_names(k));
        w.write_record(&header)?;
        for p in &self.points {
            let mut ev: Vec<f64> = p.kelvin.eigenvalues().iter().copied().collect();
            ev.sort_by(|a, b| b.total_cmp(a));
            let mut row = vec![p.x.to_string(), p.kelvin.det().to_string()];
            row.extend(ev.iter().map(|x| x.to_string()));
            row.extend(upper_triangle(p.kelvin.matrix()).iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One JSON object per grid point.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            realization: u64,
            det: f64,
            #[serde(flatten)]
            point: &'a FieldPoint,
        }
        for p in &self.points {
            serde_json::to_writer(&mut out, &Line { realization: self.index, det: p.kelvin.det(), point: p })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// `field(x_i) = geodesic(A, B, x_i)`.
pub fn interpolate_field(a: &LieTriple, b: &LieTriple, grid: &Grid1D, kind: MetricKind) -> Result<FieldSample> {
    let points = grid
        .points()
        .iter()
        .map(|&x| {
            let triple = match kind {
                MetricKind::Product => Some(crate::metrics::geodesic_triple(a, b, x)?),
                _ => None,
            };
            let kelvin = match &triple {
                Some(t) => t.to_kelvin()?,
                None => geodesic(a, b, kind, x)?,
            };
            Ok(FieldPoint { x, kelvin, triple, z: None })
        })
        .collect::<Result<_>>()?;
    Ok(FieldSample { index: 0, points })
}

/// Random parameter field configuration (JSON config file format).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub class: SymmetryClass,
    /// Constant mean parameters.
    pub z0: ParamVector,
    /// Optional per-grid-point mean parameters (overrides `z0`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0_field: Option<Vec<ParamVector>>,
    /// Shared spatial kernel; its `sigma2` is ignored in favour of `sigma`.
    pub kernel: MaternCov,
    /// Per-parameter standard deviations (`n` entries).
    pub sigma: Vec<f64>,
    /// Cross-correlation at lag zero (`n×n`); absent means independent parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corr: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_grid")]
    pub grid_n: usize,
    /// Truncation rank; absent keeps all terms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_grid() -> usize {
    101
}

impl FieldConfig {
    pub fn new(class: SymmetryClass, z0: ParamVector, kernel: MaternCov, sigma: Vec<f64>) -> Self {
        Self { class, z0, z0_field: None, kernel, sigma, corr: None, grid_n: default_grid(), rank: None, seed: 0 }
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::uniform(self.grid_n)
    }

    /// Factor `D L_R` of the lag-zero parameter covariance.
    fn cross_factor(&self) -> Result<DMatrix<f64>> {
        let n = class_spec(self.class).n();
        if self.sigma.len() != n {
            return Err(Error::DimMismatch { expected: n, got: self.sigma.len() });
        }
        if self.sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::Invalid("standard deviations must be non-negative".into()));
        }
        let r = match &self.corr {
            None => DMatrix::identity(n, n),
            Some(rows) => from_rows(rows).ok_or_else(|| Error::Invalid("correlation rows have unequal lengths".into()))?,
        };
        if r.nrows() != n || r.ncols() != n {
            return Err(Error::DimMismatch { expected: n, got: r.nrows() });
        }
        if (0..n).any(|i| (r[(i, i)] - 1.0).abs() > 1e-12) {
            return Err(Error::Invalid("correlation matrix must have a unit diagonal".into()));
        }
        let d = DMatrix::from_diagonal(&DVector::from_vec(self.sigma.clone()));
        Ok(d * cov_factor(&r)?)
    }

    fn mean_at(&self, i: usize) -> &ParamVector {
        self.z0_field.as_ref().map_or(&self.z0, |f| &f[i])
    }

    fn validate(&self, grid: &Grid1D) -> Result<()> {
        self.kernel.validate()?;
        self.z0.validate(self.class)?;
        if let Some(f) = &self.z0_field {
            if f.len() != grid.len() {
                return Err(Error::DimMismatch { expected: grid.len(), got: f.len() });
            }
            for z in f {
                z.validate(self.class)?;
            }
        }
        Ok(())
    }
}

/// Prepared sampler: KL expansion plus cross factor.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    pub config: FieldConfig,
    pub grid: Grid1D,
    pub kl: KLExpansion,
    cross: DMatrix<f64>,
}

impl FieldSampler {
    pub fn new(config: FieldConfig) -> Result<Self> {
        let grid = config.grid()?;
        config.validate(&grid)?;
        let mut kl = kl_matern(&grid, &config.kernel.correlation())?;
        if let Some(r) = config.rank {
            kl = kl.truncate(r)?;
        }
        let cross = config.cross_factor()?;
        Ok(Self { config, grid, kl, cross })
    }

    /// Parameter fluctuations `z̃(x_i)` as an `N×n` matrix for realization `index`.
    ///
    /// `z̃(x) = Σ_ℓ α_ℓ r_ℓ(x) D L_R ζ_ℓ` with independent standard normal `ζ_ℓ ∈ Rⁿ`.
    pub fn fluctuation(&self, index: u64) -> DMatrix<f64> {
        let n = self.cross.nrows();
        let mut rng = sample_rng(self.config.seed, index);
        let zeta: DMatrix<f64> = DMatrix::from_fn(self.kl.rank, n, |_, _| StandardNormal.sample(&mut rng));
        let a = self.kl.scalings();
        let scaled = DMatrix::from_fn(self.kl.rank, n, |l, j| a[l] * zeta[(l, j)]);
        self.kl.vectors.columns(0, self.kl.rank) * scaled * self.cross.transpose()
    }

    /// Parameter vectors on the grid for realization `index`.
    pub fn params(&self, index: u64) -> Result<Vec<ParamVector>> {
        let f = self.fluctuation(index);
        (0..self.grid.len())
            .map(|i| {
                let z0 = self.config.mean_at(i).as_vec();
                let z: Vec<f64> = z0.iter().enumerate().map(|(j, v)| v + f[(i, j)]).collect();
                ParamVector::from_vec(self.config.class, &z)
            })
            .collect()
    }

    /// One realization with each point's parameters fed through `build_full`.
    pub fn sample(&self, index: u64) -> Result<FieldSample> {
        let zs = self.params(index)?;
        let points = self
            .grid
            .points()
            .iter()
            .zip(zs)
            .map(|(&x, z)| {
                let (kelvin, triple) = build_full(self.config.class, &z)?;
                Ok(FieldPoint { x, kelvin, triple: Some(triple), z: Some(z) })
            })
            .collect::<Result<_>>()?;
        Ok(FieldSample { index, points })
    }
}

/// `count` realizations, generated in parallel with per-realization RNG streams.
pub fn sample_random_field(config: &FieldConfig, count: usize) -> Result<Vec<FieldSample>> {
    let s = FieldSampler::new(config.clone())?;
    (0..count as u64).into_par_iter().map(|i| s.sample(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{check_reduced_form, CHECK_TOL};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn grid_validation_and_weights() {
        assert!(Grid1D::new(vec![0.0]).is_err());
        assert!(Grid1D::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(Grid1D::new(vec![-0.1, 0.5]).is_err());
        let g = Grid1D::uniform(5).unwrap();
        assert_relative_eq!(g.weights().sum(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(g.weights()[0], 0.125);
    }

    #[test]
    fn matern_examples() {
        let m = MaternCov::new(0.5, 0.3, 2.0).unwrap();
        assert_eq!(matern_cov(0.0, &m), 2.0);
        assert_relative_eq!(matern_cov(0.3, &m), 2.0 / std::f64::consts::E, epsilon = 1e-15);
        for nu in [0.5, 1.5, 2.5] {
            let m = MaternCov::new(nu, 0.2, 1.5).unwrap();
            for h in [1e-4, 0.05, 0.2, 0.7, 2.0] {
                assert_relative_eq!(matern_cov(h, &m), matern_cov_bessel(h, &m), max_relative = 1e-10);
            }
        }
        let m = MaternCov::new(1.2, 0.2, 1.0).unwrap();
        let vals: Vec<f64> = (0..50).map(|i| matern_cov(i as f64 * 0.02, &m)).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert!(MaternCov::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn bessel_half_integer_oracle() {
        // K_{1/2}(x) = √(π/2x) e^{−x}, K_{3/2}(x) = √(π/2x) e^{−x}(1 + 1/x).
        for x in [0.01, 0.3, 1.0, 4.0, 30.0] {
            let base = (PI / (2.0 * x)).sqrt();
            assert_relative_eq!(bessel_k_scaled(0.5, x), base, max_relative = 1e-12);
            assert_relative_eq!(bessel_k_scaled(1.5, x), base * (1.0 + 1.0 / x), max_relative = 1e-12);
        }
    }

    #[test]
    fn kl_rank_one_and_full_rank() {
        let g = Grid1D::uniform(21).unwrap();
        let r: Vec<f64> = g.points().iter().map(|x| 1.0 + x * x).collect();
        let kl = kl_decompose(&g, |a, b| 2.0 * (1.0 + a * a) * (1.0 + b * b)).unwrap();
        let norm_w: f64 = r.iter().zip(g.weights().iter()).map(|(v, w)| w * v * v).sum();
        assert_relative_eq!(kl.eigenvalues[0], 2.0 * norm_w, max_relative = 1e-12);
        assert!(kl.eigenvalues[1].abs() < 1e-12);

        let g = Grid1D::uniform(101).unwrap();
        let m = MaternCov::new(0.5, 0.2, 1.0).unwrap();
        let kl = kl_matern(&g, &m).unwrap();
        let x = g.points();
        let k = DMatrix::from_fn(101, 101, |i, j| matern_cov(x[i] - x[j], &m));
        assert!((kl.reconstruct() - &k).norm() <= 1e-10 * k.norm());
        assert_relative_eq!(kl.gram(), DMatrix::identity(101, 101), epsilon = 1e-10);
        assert!(kl.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let r95 = kl.rank_for_energy(0.95);
        assert!(r95 > 1 && r95 < 101);
        let t = kl.clone().truncate(r95).unwrap();
        let err = weighted_frobenius(&(&k - t.reconstruct()), &t.weights);
        assert_relative_eq!(err, t.truncation_error(), epsilon = 1e-10);
    }

    #[test]
    fn non_psd_kernel_rejected() {
        let g = Grid1D::uniform(11).unwrap();
        assert!(matches!(kl_decompose(&g, |a, b| if a == b { 0.0 } else { 1.0 }), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn projection_inverts_synthesis() {
        let g = Grid1D::uniform(41).unwrap();
        let kl = kl_matern(&g, &MaternCov::new(1.5, 0.3, 1.0).unwrap()).unwrap().truncate(8).unwrap();
        let zeta = DVector::from_vec(vec![0.3, -1.0, 0.5, 2.0, -0.2, 0.1, 0.0, 1.1]);
        let f = kl.synthesize(&zeta).unwrap();
        assert_relative_eq!(kl.project(&f).unwrap(), zeta, epsilon = 1e-8);
    }

    fn ortho_cfg() -> FieldConfig {
        let z0 = ParamVector::new(vec![0.1, 0.0, 0.2], vec![0.1, 0.2, 0.3], vec![3.0, 2.5, 2.0, 1.5, 1.0, 0.5]);
        let mut c = FieldConfig::new(SymmetryClass::Ortho3D, z0, MaternCov::new(0.5, 0.2, 1.0).unwrap(), vec![0.1; 12]);
        c.grid_n = 41;
        c
    }

    #[test]
    fn zero_sigma_gives_constant_field() {
        let mut cfg = ortho_cfg();
        cfg.sigma = vec![0.0; 12];
        let s = &sample_random_field(&cfg, 1).unwrap()[0];
        let (c, _) = build_full(cfg.class, &cfg.z0).unwrap();
        for p in &s.points {
            assert_eq!(p.kelvin.matrix(), c.matrix());
        }
    }

    #[test]
    fn realizations_conform_and_repeat() {
        let cfg = ortho_cfg();
        let a = sample_random_field(&cfg, 3).unwrap();
        let b = sample_random_field(&cfg, 3).unwrap();
        assert_eq!(a, b);
        for s in &a {
            for p in &s.points {
                let r = KelvinMatrix::new(p.triple.as_ref().unwrap().reduced_matrix()).unwrap();
                assert!(check_reduced_form(&r, cfg.class, CHECK_TOL).unwrap().passed);
            }
        }
    }

    #[test]
    fn cross_correlation_respected() {
        let mut cfg = ortho_cfg();
        let mut r: DMatrix<f64> = DMatrix::identity(12, 12);
        r[(6, 7)] = 0.8;
        r[(7, 6)] = 0.8;
        cfg.corr = Some(crate::linalg::rows_of(&r));
        cfg.sigma = vec![1.0; 12];
        let s = FieldSampler::new(cfg).unwrap();
        let n = 4000;
        let mid = 20;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let f = s.fluctuation(i);
            sxy += f[(mid, 6)] * f[(mid, 7)];
            sxx += f[(mid, 6)].powi(2);
            syy += f[(mid, 7)].powi(2);
        }
        assert!((sxy / (sxx * syy).sqrt() - 0.8).abs() < 0.03);
    }

    #[test]
    fn csv_layout() {
        let cfg = ortho_cfg();
        let s = &sample_random_field(&cfg, 1).unwrap()[0];
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2 + 41);
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 2 + 6 + 21);
    }
}

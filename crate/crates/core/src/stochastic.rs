//! Random parameter vectors and random Kelvin matrices.
//!
//! A sample is `z = z0 + z̃` with Gaussian `z̃ ~ N(0, cov)`. The fluctuation
//! parts act multiplicatively on the deterministic factors:
//!
//! ```text
//! Q = Q1(q̃)·Q0,   V = V1(p̃)·V0,   Λ = Λ0·exp(μ̃)
//! C = T(Q)ᵀ V Λ Vᵀ T(Q)
//! ```
//!
//! Each sample draws from its own ChaCha20 stream keyed by `(seed, index)`,
//! so a batch does not depend on how the work is scheduled.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma, Normal};

use crate::classes::{
    build_full, check_reduced_form, class_spec, eigvec_fluctuation, reduced_eigvecs, spatial_rotation, LieTriple,
    ParamVector, SymmetryClass,
};
use crate::error::{Error, Result};
use crate::kelvin::{KelvinMatrix, REF_MODULUS_GPA};
use crate::linalg::{from_rows, max_asymmetry, rows_of, sym_eig_desc, upper_triangle};
use crate::means::{mean_product, KarcherOptions, WeightedEnsemble};
use crate::metrics::{upper_triangle_names, MetricWeights};

/// Relative tolerance for negative covariance eigenvalues.
pub const PSD_TOL: f64 = 1e-12;

/// Marginal law of the random moduli factors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointTransform {
    /// `λ = λ0·exp(μ̃)`.
    #[default]
    LogNormal,
    /// `λ = λ0·F⁻¹(Φ(μ̃/σ)) / F⁻¹(½)` with `F` a Gamma law of the given shape;
    /// normalized to median one like the log-normal factor.
    Gamma { shape: f64 },
}

/// Generator configuration (JSON config file format).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub class: SymmetryClass,
    pub z0: ParamVector,
    /// Covariance of `z̃` as rows (`n×n`, `n = m_Q + m_V + m_Λ`); absent means zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<Vec<Vec<f64>>>,
    /// Reinterpret the log-moduli block as `(τ_1, …, τ_{m−1}, μ_m)` and build
    /// strictly decreasing moduli.
    #[serde(default)]
    pub ordering: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub transform: PointTransform,
}

impl GenConfig {
    pub fn new(class: SymmetryClass, z0: ParamVector) -> Self {
        Self { class, z0, cov: None, ordering: false, seed: 0, transform: PointTransform::LogNormal }
    }

    /// Independent fluctuations with standard deviation `sigma` on every parameter.
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        let n = class_spec(self.class).n();
        self.cov = Some(rows_of(&(DMatrix::identity(n, n) * (sigma * sigma))));
        self
    }

    pub fn with_cov(mut self, cov: &DMatrix<f64>) -> Self {
        self.cov = Some(rows_of(cov));
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn cov_matrix(&self) -> Result<DMatrix<f64>> {
        let n = class_spec(self.class).n();
        match &self.cov {
            None => Ok(DMatrix::zeros(n, n)),
            Some(rows) => {
                let m = from_rows(rows).ok_or_else(|| Error::Invalid("covariance rows have unequal lengths".into()))?;
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::DimMismatch { expected: n, got: m.nrows().max(m.ncols()) });
                }
                Ok(m)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.z0.validate(self.class)?;
        cov_factor(&self.cov_matrix()?)?;
        if let PointTransform::Gamma { shape } = self.transform {
            if !(shape > 0.0 && shape.is_finite()) {
                return Err(Error::Invalid(format!("gamma shape must be positive, got {shape}")));
            }
            if self.ordering {
                return Err(Error::Invalid("point transforms cannot be combined with ordered moduli".into()));
            }
        }
        Ok(())
    }

    /// Stable 64-bit FNV-1a hash of the canonical JSON form, as 16 hex digits.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// `L` with `L Lᵀ = cov`: Cholesky, or a spectral square root for singular
/// positive semidefinite matrices.
pub fn cov_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = cov.abs().max().max(f64::MIN_POSITIVE);
    if max_asymmetry(cov) > PSD_TOL * scale {
        return Err(Error::NotSymmetric { max_asym: max_asymmetry(cov) });
    }
    if let Some(ch) = cov.clone().cholesky() {
        return Ok(ch.l());
    }
    let (vals, vecs) = sym_eig_desc(cov);
    let min = vals[vals.len() - 1];
    if min < -PSD_TOL * scale {
        return Err(Error::NotPsd { value: min });
    }
    Ok(vecs * DMatrix::from_diagonal(&vals.map(|x| x.max(0.0).sqrt())))
}

/// RNG of sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn fluctuation(l: &DMatrix<f64>, rng: &mut ChaCha20Rng) -> DVector<f64> {
    let xi = DVector::from_fn(l.ncols(), |_, _| StandardNormal.sample(rng));
    l * xi
}

fn draw_z(cfg: &GenConfig, l: &DMatrix<f64>, index: u64) -> Result<(ParamVector, DVector<f64>)> {
    let mut rng = sample_rng(cfg.seed, index);
    let zt = fluctuation(l, &mut rng);
    let z0 = DVector::from_vec(cfg.z0.as_vec());
    Ok((ParamVector::from_vec(cfg.class, (&z0 + &zt).as_slice())?, zt))
}

/// Parameter samples `z_i = z0 + L ξ_i`.
pub fn sample_params(cfg: &GenConfig, count: usize) -> Result<Vec<ParamVector>> {
    cfg.validate()?;
    let l = cov_factor(&cfg.cov_matrix()?)?;
    (0..count as u64).into_par_iter().map(|i| Ok(draw_z(cfg, &l, i)?.0)).collect()
}

/// Strictly decreasing moduli `λ_m = e^{μ_m}`, `λ_k = λ_{k+1} + e^{τ_k}`.
pub fn ordered_moduli(mu_last: f64, tau: &[f64]) -> Vec<f64> {
    let m = tau.len() + 1;
    let mut out = vec![0.0; m];
    out[m - 1] = mu_last.exp();
    for k in (0..m - 1).rev() {
        out[k] = out[k + 1] + tau[k].exp();
    }
    out
}

/// Ordered moduli with additive fluctuations `(τ̃_1, …, τ̃_{m−1}, μ̃_m)`.
pub fn sample_ordered_moduli(mu_base: f64, tau: &[f64], fluct: &[f64]) -> Result<Vec<f64>> {
    if fluct.len() != tau.len() + 1 {
        return Err(Error::DimMismatch { expected: tau.len() + 1, got: fluct.len() });
    }
    let t: Vec<f64> = tau.iter().zip(fluct).map(|(a, b)| a + b).collect();
    Ok(ordered_moduli(mu_base + fluct[tau.len()], &t))
}

fn gamma_factor(shape: f64, x: f64, sigma: f64) -> Result<f64> {
    if sigma == 0.0 {
        return Ok(1.0);
    }
    let g = Gamma::new(shape, 1.0).map_err(|e| Error::Invalid(e.to_string()))?;
    let u = Normal::new(0.0, 1.0).expect("standard normal").cdf(x / sigma);
    let u = u.clamp(1e-300, 1.0 - 1e-16);
    Ok(g.inverse_cdf(u) / g.inverse_cdf(0.5))
}

/// One realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub index: u64,
    pub z: ParamVector,
    pub kelvin: KelvinMatrix,
    pub triple: LieTriple,
}

/// Per-config quantities shared by all samples.
struct Prepared {
    l: DMatrix<f64>,
    q0: DMatrix<f64>,
    v0: DMatrix<f64>,
    sigma_mu: Vec<f64>,
}

fn prepare(cfg: &GenConfig) -> Result<Prepared> {
    cfg.validate()?;
    let cov = cfg.cov_matrix()?;
    let s = class_spec(cfg.class);
    let off = s.m_q + s.m_v;
    Ok(Prepared {
        l: cov_factor(&cov)?,
        q0: spatial_rotation(cfg.class, &cfg.z0.q)?,
        v0: reduced_eigvecs(cfg.class, &cfg.z0.mu, &cfg.z0.p)?,
        sigma_mu: (0..s.m_lambda).map(|i| cov[(off + i, off + i)].max(0.0).sqrt()).collect(),
    })
}

fn make_sample(cfg: &GenConfig, pre: &Prepared, index: u64) -> Result<Sample> {
    let s = class_spec(cfg.class);
    let (z, zt) = draw_z(cfg, &pre.l, index)?;
    let q1 = spatial_rotation(cfg.class, &zt.as_slice()[..s.m_q])?;
    let v1 = eigvec_fluctuation(cfg.class, &zt.as_slice()[s.m_q..s.m_q + s.m_v])?;
    let mu_t = &zt.as_slice()[s.m_q + s.m_v..];
    let distinct: Vec<f64> = if cfg.ordering {
        let m = s.m_lambda;
        ordered_moduli(z.mu[m - 1], &z.mu[..m - 1])
    } else {
        match cfg.transform {
            PointTransform::LogNormal => z.mu.iter().map(|x| x.exp()).collect(),
            PointTransform::Gamma { shape } => cfg
                .z0
                .mu
                .iter()
                .zip(mu_t)
                .zip(&pre.sigma_mu)
                .map(|((m0, x), sg)| Ok(m0.exp() * gamma_factor(shape, *x, *sg)?))
                .collect::<Result<_>>()?,
        }
    };
    let lambda = DVector::from_iterator(s.k(), s.layout.iter().map(|&i| distinct[i] * REF_MODULUS_GPA));
    let triple = LieTriple::new(q1 * &pre.q0, v1 * &pre.v0, lambda)?;
    Ok(Sample { index, z, kelvin: triple.to_kelvin()?, triple })
}

/// How batch generation is scheduled; the result does not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Immutable batch of realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub class: SymmetryClass,
    pub seed: u64,
    pub config_hash: String,
    pub samples: Vec<Sample>,
}

/// `count` random Kelvin matrices of `cfg.class`.
pub fn random_kelvin(cfg: &GenConfig, count: usize) -> Result<SampleBatch> {
    random_kelvin_with(cfg, count, Execution::Parallel)
}

pub fn random_kelvin_with(cfg: &GenConfig, count: usize, exec: Execution) -> Result<SampleBatch> {
    let pre = prepare(cfg)?;
    let samples: Vec<Sample> = match exec {
        Execution::Parallel => (0..count as u64).into_par_iter().map(|i| make_sample(cfg, &pre, i)).collect::<Result<_>>(),
        Execution::Sequential => (0..count as u64).map(|i| make_sample(cfg, &pre, i)).collect::<Result<_>>(),
    }?;
    Ok(SampleBatch { class: cfg.class, seed: cfg.seed, config_hash: cfg.hash(), samples })
}

#[derive(Serialize)]
struct JsonLine<'a> {
    seed: u64,
    config_hash: &'a str,
    class: SymmetryClass,
    #[serde(flatten)]
    sample: &'a Sample,
}

impl SampleBatch {
    pub fn triples(&self) -> Vec<LieTriple> {
        self.samples.iter().map(|s| s.triple.clone()).collect()
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.samples {
            let line = JsonLine { seed: self.seed, config_hash: &self.config_hash, class: self.class, sample: s };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// A comment line, then `index, z1…zn, C11…Ckk` (upper triangle, GPa).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# unit: GPa; class: {}; seed: {}; config_hash: {}", self.class, self.seed, self.config_hash)?;
        let n = class_spec(self.class).n();
        let k = self.class.kelvin_dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string()];
        header.extend((1..=n).map(|i| format!("z{i}")));
        header.extend(upper_triangle_names(k));
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![s.index.to_string()];
            row.extend(s.z.as_vec().iter().map(|x| x.to_string()));
            row.extend(upper_triangle(s.kelvin.matrix()).iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of [`ensemble_mean_symmetry_check`].
#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    pub mean_class: SymmetryClass,
    pub member_class: SymmetryClass,
    pub count: usize,
    /// Sampling tolerance `base_tol / √count` applied to the mean.
    pub tolerance: f64,
    pub mean_violation: f64,
    pub mean_passed: bool,
    pub member_max_violation: f64,
    pub members_passed: bool,
    pub mean: LieTriple,
}

impl SymmetryReport {
    pub fn passed(&self) -> bool {
        self.mean_passed && self.members_passed
    }
}

/// Checks the product-metric mean of a batch against a class of equal or higher symmetry.
///
/// Members are checked against `member_class` at `member_tol`; the mean is
/// checked against `mean_class` at `base_tol / √count`.
pub fn ensemble_mean_symmetry_check(
    batch: &SampleBatch,
    mean_class: SymmetryClass,
    member_class: SymmetryClass,
    base_tol: f64,
    member_tol: f64,
) -> Result<SymmetryReport> {
    if !mean_class.is_subclass_of(member_class) {
        return Err(Error::Invalid(format!(
            "{mean_class} is not of equal or higher symmetry than {member_class}"
        )));
    }
    if batch.samples.is_empty() {
        return Err(Error::Invalid("batch is empty".into()));
    }
    let reduced = |t: &LieTriple| KelvinMatrix::new(t.reduced_matrix());
    let mut member_max_violation: f64 = 0.0;
    for s in &batch.samples {
        let r = check_reduced_form(&reduced(&s.triple)?, member_class, member_tol)?;
        member_max_violation = member_max_violation.max(r.max_violation);
    }
    let e = WeightedEnsemble::uniform(batch.triples())?;
    let mean = mean_product(&e, &MetricWeights::default(), &KarcherOptions::default())?
        .triple
        .expect("product mean has a triple");
    let count = batch.samples.len();
    let tolerance = base_tol / (count as f64).sqrt();
    let mean_violation = check_reduced_form(&reduced(&mean)?, mean_class, tolerance)?.max_violation;
    Ok(SymmetryReport {
        mean_class,
        member_class,
        count,
        tolerance,
        mean_violation,
        mean_passed: mean_violation <= tolerance,
        member_max_violation,
        members_passed: member_max_violation <= member_tol,
        mean,
    })
}

/// Deterministic reference `build_full(class, z0)` of a config (ordering-aware).
pub fn reference_triple(cfg: &GenConfig) -> Result<LieTriple> {
    if cfg.ordering {
        let zero = GenConfig { cov: None, ..cfg.clone() };
        return Ok(make_sample(&zero, &prepare(&zero)?, 0)?.triple);
    }
    Ok(build_full(cfg.class, &cfg.z0)?.1)
}

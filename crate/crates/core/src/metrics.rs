//! Distances between Kelvin matrices and geodesic interpolation.
//!
//! The product distance combines a log-Euclidean distance on the moduli with
//! bi-invariant distances on the spatial rotation and the eigenvector factor:
//!
//! ```text
//! θ_E² = θ_L(Λ1, Λ2)² + c_V·θ_R(Q1, Q2)² + c_T·θ_R(V1, V2)²
//! θ_R(A, B) = ‖log(A Bᵀ)‖_F,   θ_L(Λ1, Λ2) = ‖log Λ1 − log Λ2‖_F
//! ```

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classes::{equal_groups, LieTriple};
use crate::error::{Error, Result};
use crate::kelvin::{KelvinMatrix, REF_MODULUS_GPA};
use crate::lie::{expm, log_rotation};
use crate::linalg::{sym_map, upper_triangle};

/// Which geometry to use for distances, geodesics and means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Euclid,
    Product,
    LogEuclid,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Euclid => "euclid",
            MetricKind::Product => "product",
            MetricKind::LogEuclid => "log_euclid",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclid" => Ok(MetricKind::Euclid),
            "product" => Ok(MetricKind::Product),
            "log_euclid" => Ok(MetricKind::LogEuclid),
            _ => Err(Error::Invalid(format!("unknown metric {s:?}; expected euclid, product or log_euclid"))),
        }
    }
}

/// Weights `c_V` (spatial rotation) and `c_T` (eigenvectors) of the product distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricWeights {
    pub c_v: f64,
    pub c_t: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self { c_v: 1.0, c_t: 1.0 }
    }
}

impl MetricWeights {
    pub fn new(c_v: f64, c_t: f64) -> Result<Self> {
        if !(c_v > 0.0 && c_t > 0.0 && c_v.is_finite() && c_t.is_finite()) {
            return Err(Error::Invalid(format!("metric weights must be positive, got c_v={c_v}, c_t={c_t}")));
        }
        Ok(Self { c_v, c_t })
    }
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimMismatch { expected: a, got: b });
    }
    Ok(())
}

/// Frobenius distance.
pub fn dist_euclid(a: &KelvinMatrix, b: &KelvinMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    Ok((a.matrix() - b.matrix()).norm())
}

/// Matrix logarithm of an SPD matrix after division by the reference modulus.
pub fn log_spd(c: &KelvinMatrix) -> DMatrix<f64> {
    sym_map(c.matrix(), |x| (x / REF_MODULUS_GPA).ln())
}

/// Log-Euclidean distance `‖log C1 − log C2‖_F` (comparison metric).
pub fn dist_log_euclid(a: &KelvinMatrix, b: &KelvinMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    Ok((log_spd(a) - log_spd(b)).norm())
}

/// `‖log(Q1 Q2ᵀ)‖_F`.
pub fn dist_rot(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> Result<f64> {
    same_dim(q1.nrows(), q2.nrows())?;
    Ok(log_rotation(&(q1 * q2.transpose()))?.norm())
}

fn check_positive(l: &DVector<f64>) -> Result<()> {
    if l.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Invalid("diagonal entries must be positive".into()));
    }
    Ok(())
}

/// `‖log Λ1 − log Λ2‖_F` on positive diagonals.
pub fn dist_logdiag(l1: &DVector<f64>, l2: &DVector<f64>) -> Result<f64> {
    same_dim(l1.len(), l2.len())?;
    check_positive(l1)?;
    check_positive(l2)?;
    Ok(l1.iter().zip(l2.iter()).map(|(a, b)| (a / b).ln().powi(2)).sum::<f64>().sqrt())
}

/// Product distance of two triples.
pub fn dist_product(t1: &LieTriple, t2: &LieTriple, w: &MetricWeights) -> Result<f64> {
    same_dim(t1.kelvin_dim(), t2.kelvin_dim())?;
    let l = dist_logdiag(&t1.lambda, &t2.lambda)?;
    let q = dist_rot(&t1.q, &t2.q)?;
    let v = dist_rot(&t1.v, &t2.v)?;
    Ok((l * l + w.c_v * q * q + w.c_t * v * v).sqrt())
}

/// Product distance minimized over the finite representation ambiguity of `t2`.
///
/// Candidates are all column sign flips of `V2` combined with all permutations
/// of `V2` columns inside groups of equal moduli. Sign patterns that put
/// `V1 V2ᵀ` outside `SO(k)` have no logarithm and are skipped. This is a
/// finite stand-in for the quotient metric over all representations.
pub fn dist_product_canonical(t1: &LieTriple, t2: &LieTriple, w: &MetricWeights) -> Result<f64> {
    same_dim(t1.kelvin_dim(), t2.kelvin_dim())?;
    let k = t2.kelvin_dim();
    let groups = equal_groups_unsorted(&t2.lambda);
    let perms = group_permutations(&groups, k);
    let mut best: Option<f64> = None;
    let mut last_err = None;
    for perm in &perms {
        let vp = DMatrix::from_fn(k, k, |i, j| t2.v[(i, perm[j])]);
        let lp = DVector::from_fn(k, |i, _| t2.lambda[perm[i]]);
        for signs in 0u32..(1 << k) {
            let mut v = vp.clone();
            for j in 0..k {
                if signs & (1 << j) != 0 {
                    v.column_mut(j).neg_mut();
                }
            }
            if (t1.v.determinant() * v.determinant()) < 0.0 {
                continue;
            }
            let cand = LieTriple { q: t2.q.clone(), v, lambda: lp.clone() };
            match dist_product(t1, &cand, w) {
                Ok(d) => best = Some(best.map_or(d, |b: f64| b.min(d))),
                Err(e) => last_err = Some(e),
            }
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Numerical("no admissible representation".into())))
}

/// Groups of indices with equal values (any order), relative tolerance 1e-10.
fn equal_groups_unsorted(vals: &DVector<f64>) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let sorted = DVector::from_iterator(vals.len(), idx.iter().map(|&i| vals[i]));
    equal_groups(&sorted, 1e-10)
        .into_iter()
        .map(|g| g.into_iter().map(|i| idx[i]).collect())
        .collect()
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Column maps `perm` (new column j takes old column perm[j]) permuting within groups.
fn group_permutations(groups: &[Vec<usize>], k: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![(0..k).collect()];
    for g in groups.iter().filter(|g| g.len() > 1) {
        let mut sorted = g.clone();
        sorted.sort();
        let mut next = Vec::new();
        for base in &out {
            for p in permutations(&sorted) {
                let mut m = base.clone();
                for (slot, src) in sorted.iter().zip(&p) {
                    m[*slot] = base[*src];
                }
                next.push(m);
            }
        }
        out = next;
    }
    out
}

/// Geodesic `exp(t·log(B Aᵀ))·A` on a rotation group (or its coset).
pub fn rotation_geodesic(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let l = log_rotation(&(b * a.transpose()))?;
    Ok(expm(&(l * t)) * a)
}

/// Per-factor geodesic point of the product metric.
pub fn geodesic_triple(t1: &LieTriple, t2: &LieTriple, t: f64) -> Result<LieTriple> {
    same_dim(t1.kelvin_dim(), t2.kelvin_dim())?;
    check_positive(&t1.lambda)?;
    check_positive(&t2.lambda)?;
    let q = rotation_geodesic(&t1.q, &t2.q, t)?;
    let v = rotation_geodesic(&t1.v, &t2.v, t)?;
    let lambda = t1.lambda.zip_map(&t2.lambda, |a, b| ((1.0 - t) * a.ln() + t * b.ln()).exp());
    LieTriple::new(q, v, lambda)
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Invalid(format!("path parameter t = {t} outside [0, 1]")));
    }
    Ok(())
}

/// Point at parameter `t` of the geodesic from `t1` to `t2` under `kind`.
///
/// The Euclidean path is checked for SPD-ness and reported as an error if a
/// mid-path matrix is not positive definite.
pub fn geodesic(t1: &LieTriple, t2: &LieTriple, kind: MetricKind, t: f64) -> Result<KelvinMatrix> {
    check_t(t)?;
    match kind {
        MetricKind::Product => geodesic_triple(t1, t2, t)?.to_kelvin(),
        MetricKind::Euclid => {
            let (a, b) = (t1.to_kelvin()?, t2.to_kelvin()?);
            same_dim(a.dim(), b.dim())?;
            KelvinMatrix::new(a.matrix() * (1.0 - t) + b.matrix() * t)
        }
        MetricKind::LogEuclid => {
            let (a, b) = (t1.to_kelvin()?, t2.to_kelvin()?);
            same_dim(a.dim(), b.dim())?;
            let l = log_spd(&a) * (1.0 - t) + log_spd(&b) * t;
            KelvinMatrix::new(sym_map(&l, |x| x.exp() * REF_MODULUS_GPA))
        }
    }
}

/// Distance between triples under `kind`.
pub fn distance(t1: &LieTriple, t2: &LieTriple, kind: MetricKind, w: &MetricWeights) -> Result<f64> {
    match kind {
        MetricKind::Product => dist_product(t1, t2, w),
        MetricKind::Euclid => dist_euclid(&t1.to_kelvin()?, &t2.to_kelvin()?),
        MetricKind::LogEuclid => dist_log_euclid(&t1.to_kelvin()?, &t2.to_kelvin()?),
    }
}

/// Sampled geodesic between two triples.
#[derive(Debug, Clone)]
pub struct InterpolationPath {
    pub kind: MetricKind,
    pub samples: Vec<(f64, KelvinMatrix)>,
}

impl InterpolationPath {
    /// Samples the geodesic at strictly increasing `ts` in `[0, 1]`.
    pub fn new(t1: &LieTriple, t2: &LieTriple, kind: MetricKind, ts: &[f64]) -> Result<Self> {
        if ts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("path parameters must be strictly increasing".into()));
        }
        let samples = ts
            .iter()
            .map(|&t| Ok((t, geodesic(t1, t2, kind, t)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, samples })
    }

    /// `n ≥ 2` equally spaced samples including both endpoints.
    pub fn uniform(t1: &LieTriple, t2: &LieTriple, kind: MetricKind, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Invalid("a path needs at least 2 samples".into()));
        }
        let ts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        Self::new(t1, t2, kind, &ts)
    }

    pub fn dets(&self) -> Vec<f64> {
        self.samples.iter().map(|(_, c)| c.det()).collect()
    }

    /// CSV with a unit comment line, then `t, det, C11, C12, …` (upper triangle).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# unit: GPa; metric: {}", self.kind)?;
        let k = self.samples.first().map_or(6, |(_, c)| c.dim());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "det".to_string()];
        header.extend(upper_triangle_names(k));
        w.write_record(&header)?;
        for (t, c) in &self.samples {
            let mut row = vec![t.to_string(), c.det().to_string()];
            row.extend(upper_triangle(c.matrix()).iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Column names `C11, C12, …, Ckk` of the upper triangle.
pub fn upper_triangle_names(k: usize) -> Vec<String> {
    let mut out = Vec::new();
    for i in 1..=k {
        for j in i..=k {
            out.push(format!("C{i}{j}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{build_full, ParamVector, SymmetryClass};
    use crate::lie::{exp_so3, trep_rot};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_3, SQRT_2};

    fn triple(c: SymmetryClass, z: &ParamVector) -> LieTriple {
        build_full(c, z).unwrap().1
    }

    fn ortho_z() -> ParamVector {
        ParamVector::new(vec![0.2, -0.1, 0.3], vec![0.4, 0.1, -0.2], vec![3.0, 2.5, 2.2, 2.0, 1.5, 1.0])
    }

    #[test]
    fn euclid_examples() {
        let i6 = KelvinMatrix::identity(6).unwrap();
        let two = i6.scale(2.0).unwrap();
        assert_eq!(dist_euclid(&i6, &i6).unwrap(), 0.0);
        assert_relative_eq!(dist_euclid(&i6, &two).unwrap(), 6f64.sqrt(), epsilon = 1e-15);
        assert!(dist_euclid(&i6, &KelvinMatrix::identity(3).unwrap()).is_err());
    }

    #[test]
    fn rot_examples() {
        for theta in [0.1, 1.0, 2.5, 3.0] {
            let q = exp_so3(&[0.0, 0.0, theta]);
            assert_relative_eq!(dist_rot(&DMatrix::identity(3, 3), &q).unwrap(), SQRT_2 * theta, epsilon = 1e-12);
        }
        let q = exp_so3(&[0.3, 0.2, -0.1]);
        assert_eq!(dist_rot(&q, &q).unwrap(), 0.0);
    }

    #[test]
    fn logdiag_examples() {
        let e = DVector::from_element(6, std::f64::consts::E);
        assert_relative_eq!(dist_logdiag(&DVector::from_element(6, 1.0), &e).unwrap(), 6f64.sqrt(), epsilon = 1e-15);
        let mut a = DVector::from_element(6, 1.0);
        let mut b = a.clone();
        a[0] = 2.0;
        b[0] = 8.0;
        assert_relative_eq!(dist_logdiag(&a, &b).unwrap(), 4f64.ln(), epsilon = 1e-15);
        assert!(dist_logdiag(&a, &DVector::from_element(6, -1.0)).is_err());
    }

    #[test]
    fn product_examples() {
        let w = MetricWeights::default();
        let t = triple(SymmetryClass::Ortho3D, &ortho_z());
        assert_eq!(dist_product(&t, &t, &w).unwrap(), 0.0);
        let mut t2 = t.clone();
        t2.lambda[0] *= 3.0;
        assert_relative_eq!(
            dist_product(&t, &t2, &w).unwrap(),
            dist_logdiag(&t.lambda, &t2.lambda).unwrap(),
            epsilon = 1e-14
        );
        let mut t3 = t.clone();
        t3.q = exp_so3(&[0.0, FRAC_PI_3, 0.0]) * &t.q;
        assert_relative_eq!(dist_product(&t, &t3, &w).unwrap(), FRAC_PI_3 * SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn canonical_examples() {
        let w = MetricWeights::default();
        let t = triple(SymmetryClass::Ortho3D, &ortho_z());
        let mut flipped = t.clone();
        flipped.v.column_mut(0).neg_mut();
        assert!(dist_product(&t, &flipped, &w).is_err());
        assert!(dist_product_canonical(&t, &flipped, &w).unwrap() < 1e-12);

        let iso = triple(SymmetryClass::TransIso3D, &ParamVector::new(vec![0.1, 0.2], vec![0.3], vec![3.0, 2.0, 1.5, 1.0]));
        let mut swapped = iso.clone();
        swapped.v.swap_columns(3, 4);
        swapped.v.column_mut(3).neg_mut();
        assert!(dist_product_canonical(&iso, &swapped, &w).unwrap() < 1e-12);

        // Non-degenerate: equals the brute-force minimum over sign patterns.
        let other = triple(SymmetryClass::Ortho3D, &ParamVector { p: vec![0.5, 0.0, -0.1], ..ortho_z() });
        let mut brute = f64::INFINITY;
        for s in 0u32..64 {
            let mut v = other.v.clone();
            for j in 0..6 {
                if s & (1 << j) != 0 {
                    v.column_mut(j).neg_mut();
                }
            }
            let cand = LieTriple { v, ..other.clone() };
            if let Ok(d) = dist_product(&t, &cand, &w) {
                brute = brute.min(d);
            }
        }
        assert_relative_eq!(dist_product_canonical(&t, &other, &w).unwrap(), brute, epsilon = 1e-14);
    }

    #[test]
    fn geodesic_examples() {
        let a = triple(SymmetryClass::Ortho3D, &ortho_z());
        let mut b = a.clone();
        b.lambda = a.lambda.map(|x| x * 4.0);
        let mid = geodesic(&a, &b, MetricKind::Product, 0.5).unwrap();
        let expect = LieTriple { lambda: a.lambda.map(|x| x * 2.0), ..a.clone() }.to_kelvin().unwrap();
        assert_relative_eq!(mid.into_matrix(), expect.into_matrix(), epsilon = 1e-12);
        for kind in [MetricKind::Euclid, MetricKind::Product, MetricKind::LogEuclid] {
            let c = geodesic(&a, &b, kind, 0.0).unwrap();
            assert_relative_eq!(c.into_matrix(), a.to_kelvin().unwrap().into_matrix(), epsilon = 1e-10);
            let c = geodesic(&a, &b, kind, 1.0).unwrap();
            assert_relative_eq!(c.into_matrix(), b.to_kelvin().unwrap().into_matrix(), epsilon = 1e-10);
        }
        assert!(geodesic(&a, &b, MetricKind::Euclid, 1.5).is_err());
    }

    #[test]
    fn rotation_path_keeps_det_and_scales_distance() {
        let a = triple(SymmetryClass::Ortho3D, &ortho_z());
        let b = LieTriple { q: exp_so3(&[0.0, FRAC_PI_3, 0.0]) * &a.q, v: exp_so3(&[0.1, 0.2, 0.3]).clone(), ..a.clone() };
        let b = LieTriple { v: crate::linalg::block_diag(&b.v, &DMatrix::identity(3, 3)) * &a.v, ..b };
        let w = MetricWeights::default();
        let total = dist_product(&a, &b, &w).unwrap();
        let det0 = a.to_kelvin().unwrap().det();
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let p = geodesic_triple(&a, &b, t).unwrap();
            assert_relative_eq!(dist_product(&a, &p, &w).unwrap(), t * total, epsilon = 1e-9);
            assert_relative_eq!(p.to_kelvin().unwrap().det(), det0, max_relative = 1e-10);
        }
    }

    #[test]
    fn conjugation_invariance() {
        let w = MetricWeights::new(0.7, 1.3).unwrap();
        let a = triple(SymmetryClass::Ortho3D, &ortho_z());
        let b = triple(SymmetryClass::Ortho3D, &ParamVector::new(vec![-0.3, 0.5, 0.1], vec![0.0, 0.3, 0.2], vec![2.0; 6]));
        let wq = exp_so3(&[1.0, -0.4, 0.2]);
        let conj = |t: &LieTriple| LieTriple { q: &t.q * wq.transpose(), ..t.clone() };
        // The conjugated triples represent T(W) C T(W)ᵀ.
        let tw = trep_rot(&wq).unwrap();
        let ca = conj(&a).to_kelvin().unwrap();
        assert_relative_eq!(ca.into_matrix(), &tw * a.to_kelvin().unwrap().matrix() * tw.transpose(), epsilon = 1e-10);
        assert_relative_eq!(dist_product(&a, &b, &w).unwrap(), dist_product(&conj(&a), &conj(&b), &w).unwrap(), epsilon = 1e-10);
    }

    #[test]
    fn csv_layout() {
        let a = triple(SymmetryClass::Iso3D, &ParamVector::new(vec![], vec![], vec![3.0, 2.0]));
        let p = InterpolationPath::uniform(&a, &a, MetricKind::Product, 3).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert!(lines[0].starts_with("# unit: GPa"));
        assert_eq!(lines[1].split(',').count(), 2 + 21);
        assert_eq!(lines.len(), 5);
    }
}

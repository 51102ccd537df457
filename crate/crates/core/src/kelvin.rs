//! Kelvin notation for symmetric second-order tensors and elasticity tensors.
//!
//! A symmetric `d×d` tensor maps to a `k`-vector (`k = 3` in 2D, `k = 6` in 3D)
//! with the shear components scaled by √2, ordered `(11, 22, 33, 23, 13, 12)`
//! in 3D and `(11, 22, 12)` in 2D. The map is an isometry, so a fourth-order
//! elasticity tensor with major and minor symmetries becomes a symmetric
//! `k×k` matrix whose eigenvalues are the Kelvin moduli.
//!
//! Units are GPa throughout.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{from_rows, max_asymmetry, rows_of, sym_eig_desc, symmetrize};

/// Reference modulus (GPa) used to non-dimensionalize moduli before logarithms.
pub const REF_MODULUS_GPA: f64 = 1.0;

/// Relative threshold of the SPD gate: smallest eigenvalue must exceed this times ‖C‖₂.
pub const SPD_REL_TOL: f64 = 1e-12;

const SYM_REL_TOL: f64 = 1e-10;

/// Number of Kelvin components for spatial dimension `d`.
pub fn kelvin_dim(d: usize) -> Result<usize> {
    match d {
        2 => Ok(3),
        3 => Ok(6),
        _ => Err(Error::BadDim(d)),
    }
}

/// Spatial dimension for `k` Kelvin components.
pub fn spatial_dim(k: usize) -> Result<usize> {
    match k {
        3 => Ok(2),
        6 => Ok(3),
        _ => Err(Error::BadDim(k)),
    }
}

/// Index pairs `(i, j)` of each Kelvin component.
fn kelvin_pairs(d: usize) -> &'static [(usize, usize)] {
    if d == 2 {
        &[(0, 0), (1, 1), (0, 1)]
    } else {
        &[(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)]
    }
}

/// A symmetric 2nd-order tensor in 2 or 3 dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor2(DMatrix<f64>);

impl SymTensor2 {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let d = m.nrows();
        if m.ncols() != d || !(d == 2 || d == 3) {
            return Err(Error::BadDim(d));
        }
        let asym = max_asymmetry(&m);
        if asym > 1e-12 * m.abs().max().max(1.0) {
            return Err(Error::NotSymmetric { max_asym: asym });
        }
        Ok(Self(symmetrize(&m)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// Kelvin vector of a symmetric tensor.
pub fn vrep(t: &SymTensor2) -> DVector<f64> {
    let m = t.matrix();
    let pairs = kelvin_pairs(t.dim());
    DVector::from_iterator(
        pairs.len(),
        pairs
            .iter()
            .map(|&(i, j)| if i == j { m[(i, i)] } else { SQRT_2 * m[(i, j)] }),
    )
}

/// Kelvin vector of a plain matrix, validating symmetry first.
pub fn vrep_mat(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(vrep(&SymTensor2::new(m.clone())?))
}

/// Inverse of [`vrep`].
pub fn vrep_inv(v: &DVector<f64>) -> Result<SymTensor2> {
    let d = spatial_dim(v.len())?;
    let mut m = DMatrix::zeros(d, d);
    for (c, &(i, j)) in kelvin_pairs(d).iter().enumerate() {
        if i == j {
            m[(i, i)] = v[c];
        } else {
            m[(i, j)] = v[c] / SQRT_2;
            m[(j, i)] = v[c] / SQRT_2;
        }
    }
    Ok(SymTensor2(m))
}

/// The orthonormal strain vectors `(n, y)` in 2D and `(n, y, z)` in 3D.
///
/// `n` is the volumetric direction, `y` and `z` are deviatoric.
pub fn special_basis(d: usize) -> Result<Vec<DVector<f64>>> {
    match d {
        2 => Ok(vec![
            DVector::from_vec(vec![1.0, 1.0, 0.0]) / SQRT_2,
            DVector::from_vec(vec![-1.0, 1.0, 0.0]) / SQRT_2,
        ]),
        3 => Ok(vec![
            DVector::from_vec(vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]) / 3f64.sqrt(),
            DVector::from_vec(vec![-1.0, 1.0, 0.0, 0.0, 0.0, 0.0]) / SQRT_2,
            DVector::from_vec(vec![1.0, 1.0, -2.0, 0.0, 0.0, 0.0]) / 6f64.sqrt(),
        ]),
        _ => Err(Error::BadDim(d)),
    }
}

/// Elasticity tensor in Kelvin notation: symmetric positive definite, GPa.
#[derive(Debug, Clone, PartialEq)]
pub struct KelvinMatrix(DMatrix<f64>);

impl KelvinMatrix {
    /// Validates shape, symmetry and positive definiteness.
    ///
    /// Asymmetry up to `1e-10·‖C‖_F` is treated as round-off and removed.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let k = m.nrows();
        if m.ncols() != k {
            return Err(Error::DimMismatch { expected: k, got: m.ncols() });
        }
        spatial_dim(k)?;
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("matrix has non-finite entries".into()));
        }
        let asym = max_asymmetry(&m);
        if asym > SYM_REL_TOL * m.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric { max_asym: asym });
        }
        let m = symmetrize(&m);
        let (vals, _) = sym_eig_desc(&m);
        let threshold = SPD_REL_TOL * vals[0].abs();
        let last = k - 1;
        if vals[last] <= threshold {
            return Err(Error::NotSpd { index: last + 1, value: vals[last], threshold });
        }
        Ok(Self(m))
    }

    pub fn identity(k: usize) -> Result<Self> {
        Self::new(DMatrix::identity(k, k))
    }

    /// Number of Kelvin components (3 or 6).
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Spatial dimension (2 or 3).
    pub fn spatial_dim(&self) -> usize {
        if self.dim() == 3 {
            2
        } else {
            3
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Kelvin moduli, descending.
    pub fn eigenvalues(&self) -> DVector<f64> {
        sym_eig_desc(&self.0).0
    }

    pub fn det(&self) -> f64 {
        self.eigenvalues().iter().product()
    }

    /// Compliance in Kelvin notation.
    pub fn inverse(&self) -> KelvinMatrix {
        let (vals, vecs) = sym_eig_desc(&self.0);
        let d = DMatrix::from_diagonal(&vals.map(|x| 1.0 / x));
        KelvinMatrix(symmetrize(&(&vecs * d * vecs.transpose())))
    }

    /// `αC`.
    pub fn scale(&self, alpha: f64) -> Result<KelvinMatrix> {
        KelvinMatrix::new(&self.0 * alpha)
    }

    /// `T C Tᵀ` for an orthogonal `T`.
    pub fn conjugate(&self, t: &DMatrix<f64>) -> Result<KelvinMatrix> {
        KelvinMatrix::new(t * &self.0 * t.transpose())
    }
}

#[derive(Serialize, Deserialize)]
struct KelvinJson {
    dim: usize,
    unit: String,
    rows: Vec<Vec<f64>>,
}

impl Serialize for KelvinMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        KelvinJson { dim: self.dim(), unit: "GPa".into(), rows: rows_of(&self.0) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for KelvinMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = KelvinJson::deserialize(d)?;
        if j.unit != "GPa" {
            return Err(D::Error::custom(format!("unit must be \"GPa\", got {:?}", j.unit)));
        }
        if j.rows.len() != j.dim {
            return Err(D::Error::custom(format!(
                "dim is {} but {} rows given",
                j.dim,
                j.rows.len()
            )));
        }
        let m = from_rows(&j.rows).ok_or_else(|| D::Error::custom("ragged rows"))?;
        KelvinMatrix::new(m).map_err(D::Error::custom)
    }
}

/// Isotropic 3D Kelvin matrix from bulk modulus `K` and shear modulus `G`.
pub fn iso_kelvin(bulk: f64, shear: f64) -> Result<KelvinMatrix> {
    let n = &special_basis(3)?[0];
    let nn = n * n.transpose();
    let m = &nn * (3.0 * bulk) + (DMatrix::identity(6, 6) - &nn) * (2.0 * shear);
    KelvinMatrix::new(m)
}

/// Engineering constants of an orthotropic material (moduli in GPa).
///
/// `nu_ij` is the Poisson ratio for loading along axis `i` and contraction
/// along axis `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthotropicConstants {
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
    pub nu21: f64,
    pub nu12: f64,
    pub nu31: f64,
    pub nu13: f64,
    pub nu32: f64,
    pub nu23: f64,
    pub g12: f64,
    pub g13: f64,
    pub g23: f64,
}

impl OrthotropicConstants {
    /// Human cortical femoral bone.
    pub fn cortical_bone() -> Self {
        Self {
            y1: 12.0,
            y2: 13.4,
            y3: 20.0,
            nu21: 0.422,
            nu12: 0.376,
            nu31: 0.371,
            nu13: 0.222,
            nu32: 0.35,
            nu23: 0.235,
            g12: 4.53,
            g13: 5.61,
            g23: 6.23,
        }
    }

    /// All slots filled from a single `(Y, ν)` pair.
    pub fn isotropic(y: f64, nu: f64) -> Self {
        let g = y / (2.0 * (1.0 + nu));
        Self {
            y1: y,
            y2: y,
            y3: y,
            nu21: nu,
            nu12: nu,
            nu31: nu,
            nu13: nu,
            nu32: nu,
            nu23: nu,
            g12: g,
            g13: g,
            g23: g,
        }
    }

    /// Largest mismatch `|ν_ji/Y_j − ν_ij/Y_i|` of the reciprocity relations.
    ///
    /// Measured data rarely satisfy reciprocity exactly; the compliance uses
    /// the upper-triangle ratios and ignores the others.
    pub fn reciprocity_residual(&self) -> f64 {
        [
            (self.nu21 / self.y2 - self.nu12 / self.y1).abs(),
            (self.nu31 / self.y3 - self.nu13 / self.y1).abs(),
            (self.nu32 / self.y3 - self.nu23 / self.y2).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Voigt compliance (GPa⁻¹), ordering `(11, 22, 33, 23, 13, 12)`.
///
/// Off-diagonal normal terms follow `S_ij = −ν_ji / Y_j` for `i < j`, mirrored
/// into the lower triangle; the shear diagonal is `(1/G23, 1/G13, 1/G12)`.
pub fn compliance_from_orthotropic(c: &OrthotropicConstants) -> Result<DMatrix<f64>> {
    let positive = [c.y1, c.y2, c.y3, c.g12, c.g13, c.g23];
    if positive.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Invalid("moduli must be positive and finite".into()));
    }
    let mut s = DMatrix::zeros(6, 6);
    s[(0, 0)] = 1.0 / c.y1;
    s[(1, 1)] = 1.0 / c.y2;
    s[(2, 2)] = 1.0 / c.y3;
    s[(0, 1)] = -c.nu21 / c.y2;
    s[(0, 2)] = -c.nu31 / c.y3;
    s[(1, 2)] = -c.nu32 / c.y3;
    s[(1, 0)] = s[(0, 1)];
    s[(2, 0)] = s[(0, 2)];
    s[(2, 1)] = s[(1, 2)];
    s[(3, 3)] = 1.0 / c.g23;
    s[(4, 4)] = 1.0 / c.g13;
    s[(5, 5)] = 1.0 / c.g12;
    let (vals, _) = sym_eig_desc(&s);
    for (i, &v) in vals.iter().enumerate() {
        if v <= SPD_REL_TOL * vals[0] {
            return Err(Error::NotSpd { index: i + 1, value: v, threshold: SPD_REL_TOL * vals[0] });
        }
    }
    Ok(s)
}

fn voigt_scaling() -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0, SQRT_2, SQRT_2, SQRT_2]))
}

/// Voigt stiffness to Kelvin: `D·C·D` with `D = diag(1, 1, 1, √2, √2, √2)`.
pub fn voigt_to_kelvin(voigt: &DMatrix<f64>) -> Result<KelvinMatrix> {
    if voigt.nrows() != 6 || voigt.ncols() != 6 {
        return Err(Error::DimMismatch { expected: 6, got: voigt.nrows() });
    }
    let d = voigt_scaling();
    KelvinMatrix::new(&d * voigt * &d)
}

/// Kelvin stiffness back to Voigt stiffness.
pub fn kelvin_to_voigt(c: &KelvinMatrix) -> Result<DMatrix<f64>> {
    if c.dim() != 6 {
        return Err(Error::DimMismatch { expected: 6, got: c.dim() });
    }
    let dinv = voigt_scaling().map(|x| if x != 0.0 { 1.0 / x } else { 0.0 });
    Ok(&dinv * c.matrix() * &dinv)
}

/// Orthotropic Kelvin stiffness from engineering constants.
pub fn orthotropic_kelvin(c: &OrthotropicConstants) -> Result<KelvinMatrix> {
    let s = compliance_from_orthotropic(c)?;
    let stiff = s
        .try_inverse()
        .ok_or_else(|| Error::Numerical("compliance inversion failed".into()))?;
    voigt_to_kelvin(&symmetrize(&stiff))
}

/// A unit loading direction in 3D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction(Vector3<f64>);

impl Direction {
    /// Normalizes `v`; rejects (near) zero vectors.
    pub fn new(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if n.is_nan() || n <= 1e-300 || !n.is_finite() {
            return Err(Error::Invalid("direction must be a non-zero finite vector".into()));
        }
        Ok(Self(v / n))
    }

    /// Polar angle `theta` from axis 3, azimuth `phi` from axis 1 (radians).
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self(Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()))
    }

    pub fn axis(i: usize) -> Self {
        let mut v = Vector3::zeros();
        v[i] = 1.0;
        Self(v)
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Young's modulus (GPa) along `d`: `1/Y = vrep(d⊗d)ᵀ C⁻¹ vrep(d⊗d)`.
pub fn directional_young_modulus(c: &KelvinMatrix, d: &Direction) -> Result<f64> {
    if c.dim() != 6 {
        return Err(Error::DimMismatch { expected: 6, got: c.dim() });
    }
    let v = d.vector();
    let dd = DMatrix::from_fn(3, 3, |i, j| v[i] * v[j]);
    let w = vrep(&SymTensor2(dd));
    let s = c.inverse();
    let inv_y = (w.transpose() * s.matrix() * &w)[(0, 0)];
    if inv_y.is_nan() || inv_y <= 0.0 {
        return Err(Error::Numerical(format!("non-positive directional compliance {inv_y}")));
    }
    Ok(1.0 / inv_y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sym3(a: [f64; 6]) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[a[0], a[5], a[4], a[5], a[1], a[3], a[4], a[3], a[2]])
    }

    #[test]
    fn vrep_examples() {
        let id = SymTensor2::new(DMatrix::identity(3, 3)).unwrap();
        assert_eq!(vrep(&id).as_slice(), &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        let e12 = SymTensor2::new(sym3([0.0, 0.0, 0.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(vrep(&e12).as_slice(), &[0.0, 0.0, 0.0, 0.0, 0.0, SQRT_2]);
        let t2 = SymTensor2::new(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0])).unwrap();
        assert_eq!(vrep(&t2).as_slice(), &[2.0, 3.0, SQRT_2]);
    }

    #[test]
    fn vrep_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        match SymTensor2::new(m) {
            Err(Error::NotSymmetric { max_asym }) => assert_eq!(max_asym, 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vrep_inv_examples() {
        let v = DVector::from_vec(vec![0.0, 0.0, 0.0, SQRT_2, 0.0, 0.0]);
        let t = vrep_inv(&v).unwrap();
        assert_relative_eq!(t.matrix()[(1, 2)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(t.matrix()[(2, 1)], 1.0, epsilon = 1e-15);
        assert_eq!(t.matrix().iter().filter(|x| **x != 0.0).count(), 2);
        assert!(vrep_inv(&DVector::zeros(4)).is_err());
    }

    #[test]
    fn special_basis_orthonormal() {
        for d in [2, 3] {
            let b = special_basis(d).unwrap();
            for (i, u) in b.iter().enumerate() {
                for (j, w) in b.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert_relative_eq!(u.dot(w), e, epsilon = 1e-15);
                }
            }
            let id = SymTensor2::new(DMatrix::identity(d, d)).unwrap();
            assert!(vrep(&id).dot(&b[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn bone_compliance_entries() {
        let s = compliance_from_orthotropic(&OrthotropicConstants::cortical_bone()).unwrap();
        assert_relative_eq!(s[(2, 2)], 0.05, epsilon = 1e-15);
        assert_relative_eq!(s[(5, 5)], 1.0 / 4.53, epsilon = 1e-15);
        assert_eq!(s, s.transpose());
    }

    #[test]
    fn isotropic_compliance_matches_textbook() {
        let (y, nu) = (70.0, 0.3);
        let s = compliance_from_orthotropic(&OrthotropicConstants::isotropic(y, nu)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 / y } else { -nu / y };
                assert_relative_eq!(s[(i, j)], e, epsilon = 1e-15);
            }
            assert_relative_eq!(s[(i + 3, i + 3)], 2.0 * (1.0 + nu) / y, epsilon = 1e-15);
        }
    }

    #[test]
    fn non_spd_compliance_rejected() {
        let mut c = OrthotropicConstants::isotropic(10.0, 0.3);
        c.nu21 = 0.9;
        c.nu31 = 0.9;
        c.nu32 = 0.9;
        assert!(matches!(compliance_from_orthotropic(&c), Err(Error::NotSpd { .. })));
    }

    #[test]
    fn voigt_identity_and_blocks() {
        let k = voigt_to_kelvin(&DMatrix::identity(6, 6)).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0]));
        assert_relative_eq!(k.matrix().clone(), expect, epsilon = 1e-15);
        let v = kelvin_to_voigt(&k).unwrap();
        assert_relative_eq!(v, DMatrix::identity(6, 6), epsilon = 1e-15);
    }

    #[test]
    fn bone_kelvin_round_trip() {
        let c = orthotropic_kelvin(&OrthotropicConstants::cortical_bone()).unwrap();
        let m = c.matrix();
        for i in 0..6 {
            for j in 0..6 {
                let in_block = (i < 3 && j < 3) || i == j;
                if !in_block {
                    assert_eq!(m[(i, j)], 0.0, "({i},{j})");
                }
            }
        }
        assert_relative_eq!(m[(3, 3)], 2.0 * 6.23, epsilon = 1e-12);
        assert_relative_eq!(m[(5, 5)], 2.0 * 4.53, epsilon = 1e-12);
        // Independent oracle: Gauss-Jordan inversion of the compliance block.
        let s = compliance_from_orthotropic(&OrthotropicConstants::cortical_bone()).unwrap();
        let prod = m * kelvin_to_voigt(&KelvinMatrix::new(s.clone()).unwrap()).unwrap();
        assert_relative_eq!(prod, DMatrix::identity(6, 6), epsilon = 1e-12);
    }

    #[test]
    fn bone_young_moduli() {
        let c = orthotropic_kelvin(&OrthotropicConstants::cortical_bone()).unwrap();
        for (axis, y) in [(0, 12.0), (1, 13.4), (2, 20.0)] {
            let got = directional_young_modulus(&c, &Direction::axis(axis)).unwrap();
            assert_relative_eq!(got, y, max_relative = 1e-12);
        }
    }

    #[test]
    fn spd_gate() {
        let mut m = DMatrix::identity(6, 6);
        m[(5, 5)] = 0.0;
        assert!(matches!(KelvinMatrix::new(m), Err(Error::NotSpd { index: 6, .. })));
        assert!(KelvinMatrix::new(DMatrix::identity(4, 4)).is_err());
    }

    #[test]
    fn json_round_trip_exact() {
        let c = orthotropic_kelvin(&OrthotropicConstants::cortical_bone()).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.starts_with("{\"dim\":6,\"unit\":\"GPa\",\"rows\":"));
        let back: KelvinMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}

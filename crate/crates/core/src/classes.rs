//! The four 2D and eight 3D elasticity symmetry classes.
//!
//! Every class is described by how many parameters it spends on the spatial
//! orientation (`m_Q`), the eigen-strain distributors (`m_V`) and the distinct
//! Kelvin moduli (`m_Λ`). A parameter vector `z = (q, p, μ)` builds
//!
//! ```text
//! C = T(Q)ᵀ · V Λ Vᵀ · T(Q),   T = trep_rot,  Λ = exp(diag♯ μ)
//! ```
//!
//! where `V Λ Vᵀ` is the reduced form of the class in its canonical frame
//! (the distinguished axis is axis 3, the two-fold axis of the monoclinic and
//! trigonal classes is axis 1).

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kelvin::{kelvin_dim, special_basis, vrep, vrep_inv, KelvinMatrix, SymTensor2};
use crate::lie::{
    axis_rotation, exp_so2, exp_so3, expm, skwr4, subspace_bases, trep_rot, validate_rotation,
};
use crate::linalg::{block_diag, orthogonality_residual, rows_of, from_rows, sym_eig_desc, symmetrize};

/// Default relative tolerance of [`check_reduced_form`].
pub const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SymmetryClass {
    #[serde(rename = "iso_2d")]
    Iso2D,
    #[serde(rename = "tetra_2d")]
    Tetra2D,
    #[serde(rename = "ortho_2d")]
    Ortho2D,
    #[serde(rename = "triclinic_2d")]
    Triclinic2D,
    #[serde(rename = "iso_3d")]
    Iso3D,
    #[serde(rename = "cubic_3d")]
    Cubic3D,
    #[serde(rename = "trans_iso_3d")]
    TransIso3D,
    #[serde(rename = "trigonal_3d")]
    Trigonal3D,
    #[serde(rename = "tetra_3d")]
    Tetra3D,
    #[serde(rename = "ortho_3d")]
    Ortho3D,
    #[serde(rename = "monoclinic_3d")]
    Monoclinic3D,
    #[serde(rename = "triclinic_3d")]
    Triclinic3D,
}

use SymmetryClass::*;

impl SymmetryClass {
    pub const ALL: [SymmetryClass; 12] = [
        Triclinic2D,
        Ortho2D,
        Tetra2D,
        Iso2D,
        Triclinic3D,
        Monoclinic3D,
        Ortho3D,
        Trigonal3D,
        Tetra3D,
        Cubic3D,
        TransIso3D,
        Iso3D,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Iso2D => "iso_2d",
            Tetra2D => "tetra_2d",
            Ortho2D => "ortho_2d",
            Triclinic2D => "triclinic_2d",
            Iso3D => "iso_3d",
            Cubic3D => "cubic_3d",
            TransIso3D => "trans_iso_3d",
            Trigonal3D => "trigonal_3d",
            Tetra3D => "tetra_3d",
            Ortho3D => "ortho_3d",
            Monoclinic3D => "monoclinic_3d",
            Triclinic3D => "triclinic_3d",
        }
    }

    /// Spatial dimension.
    pub fn dim(self) -> usize {
        match self {
            Iso2D | Tetra2D | Ortho2D | Triclinic2D => 2,
            _ => 3,
        }
    }

    /// Kelvin dimension.
    pub fn kelvin_dim(self) -> usize {
        if self.dim() == 2 {
            3
        } else {
            6
        }
    }

    /// Immediate lower-symmetry neighbours in the Hasse diagram.
    ///
    /// Every matrix of this class also belongs to each parent class.
    pub fn hasse_parents(self) -> &'static [SymmetryClass] {
        match self {
            Triclinic2D | Triclinic3D => &[],
            Ortho2D => &[Triclinic2D],
            Tetra2D => &[Ortho2D],
            Iso2D => &[Tetra2D],
            Monoclinic3D => &[Triclinic3D],
            Ortho3D | Trigonal3D => &[Monoclinic3D],
            Tetra3D => &[Ortho3D],
            Cubic3D => &[Tetra3D],
            TransIso3D => &[Tetra3D, Trigonal3D],
            Iso3D => &[Cubic3D, TransIso3D],
        }
    }

    /// All lower-symmetry classes reachable upward in the Hasse diagram.
    pub fn ancestors(self) -> Vec<SymmetryClass> {
        let mut out = Vec::new();
        let mut stack: Vec<SymmetryClass> = self.hasse_parents().to_vec();
        while let Some(c) = stack.pop() {
            if !out.contains(&c) {
                out.push(c);
                stack.extend_from_slice(c.hasse_parents());
            }
        }
        out.sort();
        out
    }

    /// True if every matrix of `self` also belongs to `other`.
    pub fn is_subclass_of(self, other: SymmetryClass) -> bool {
        self == other || self.ancestors().contains(&other)
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SymmetryClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SymmetryClass::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SymmetryClass::ALL.iter().map(|c| c.name()).collect();
                Error::Invalid(format!("unknown class {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// A linear relation `Σ coef·C_ij = 0` on the upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint(pub Vec<(f64, usize, usize)>);

impl Constraint {
    fn zero(i: usize, j: usize) -> Self {
        Constraint(vec![(1.0, i, j)])
    }

    fn equal(a: (usize, usize), b: (usize, usize)) -> Self {
        Constraint(vec![(1.0, a.0, a.1), (-1.0, b.0, b.1)])
    }

    pub fn residual(&self, c: &DMatrix<f64>) -> f64 {
        self.0.iter().map(|&(w, i, j)| w * c[(i, j)]).sum::<f64>().abs()
    }

    pub fn is_zero_entry(&self) -> Option<(usize, usize)> {
        match self.0.as_slice() {
            [(w, i, j)] if *w == 1.0 => Some((*i, *j)),
            _ => None,
        }
    }
}

/// Parameter counts, modulus layout and invariance pattern of a class.
#[derive(Debug, Clone)]
pub struct ClassSpec {
    pub class: SymmetryClass,
    pub m_q: usize,
    pub m_v: usize,
    pub m_lambda: usize,
    /// Distinct-modulus index (0-based) feeding each of the `k` diagonal slots.
    pub layout: Vec<usize>,
    /// Linear relations satisfied by every matrix of the class in its canonical frame.
    pub constraints: Vec<Constraint>,
}

impl ClassSpec {
    pub fn n(&self) -> usize {
        self.m_q + self.m_v + self.m_lambda
    }

    pub fn k(&self) -> usize {
        self.layout.len()
    }

    /// `mask[(i, j)]` is true where the canonical form has a structural zero.
    pub fn zero_mask(&self) -> DMatrix<bool> {
        let k = self.k();
        let mut m = DMatrix::from_element(k, k, false);
        for c in &self.constraints {
            if let Some((i, j)) = c.is_zero_entry() {
                m[(i, j)] = true;
                m[(j, i)] = true;
            }
        }
        m
    }
}

fn ortho3_zeros() -> Vec<Constraint> {
    let mut v = Vec::new();
    for i in 0..6 {
        for j in (i + 1)..6 {
            if j >= 3 {
                v.push(Constraint::zero(i, j));
            }
        }
    }
    v
}

fn tetra3_constraints() -> Vec<Constraint> {
    let mut v = ortho3_zeros();
    v.push(Constraint::equal((1, 1), (0, 0)));
    v.push(Constraint::equal((1, 2), (0, 2)));
    v.push(Constraint::equal((4, 4), (3, 3)));
    v
}

fn cubic3_constraints() -> Vec<Constraint> {
    let mut v = ortho3_zeros();
    v.push(Constraint::equal((1, 1), (0, 0)));
    v.push(Constraint::equal((2, 2), (0, 0)));
    v.push(Constraint::equal((0, 2), (0, 1)));
    v.push(Constraint::equal((1, 2), (0, 1)));
    v.push(Constraint::equal((4, 4), (3, 3)));
    v.push(Constraint::equal((5, 5), (3, 3)));
    v
}

/// `C_ab = C11 − C12`.
fn shear_relation(a: usize) -> Constraint {
    Constraint(vec![(1.0, a, a), (-1.0, 0, 0), (1.0, 0, 1)])
}

/// Descriptor of a class.
pub fn class_spec(c: SymmetryClass) -> ClassSpec {
    let (m_q, m_v, m_lambda, layout, constraints): (usize, usize, usize, Vec<usize>, Vec<Constraint>) =
        match c {
            Triclinic2D => (1, 2, 3, vec![0, 1, 2], vec![]),
            Ortho2D => (1, 1, 3, vec![0, 1, 2], vec![Constraint::zero(0, 2), Constraint::zero(1, 2)]),
            Tetra2D => (
                1,
                0,
                3,
                vec![0, 1, 2],
                vec![Constraint::zero(0, 2), Constraint::zero(1, 2), Constraint::equal((1, 1), (0, 0))],
            ),
            Iso2D => (
                0,
                0,
                2,
                vec![0, 1, 1],
                vec![
                    Constraint::zero(0, 2),
                    Constraint::zero(1, 2),
                    Constraint::equal((1, 1), (0, 0)),
                    shear_relation(2),
                ],
            ),
            Triclinic3D => (3, 12, 6, vec![0, 1, 2, 3, 4, 5], vec![]),
            Monoclinic3D => {
                let mut v = Vec::new();
                for i in 0..4 {
                    for j in 4..6 {
                        v.push(Constraint::zero(i, j));
                    }
                }
                (3, 6, 6, vec![0, 1, 2, 3, 4, 5], v)
            }
            Ortho3D => (3, 3, 6, vec![0, 1, 2, 3, 4, 5], ortho3_zeros()),
            Trigonal3D => {
                let mut v: Vec<Constraint> = [(0, 4), (0, 5), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5), (3, 4), (3, 5)]
                    .into_iter()
                    .map(|(i, j)| Constraint::zero(i, j))
                    .collect();
                v.push(Constraint::equal((1, 1), (0, 0)));
                v.push(Constraint::equal((1, 2), (0, 2)));
                v.push(Constraint(vec![(1.0, 1, 3), (1.0, 0, 3)]));
                v.push(Constraint::equal((4, 4), (3, 3)));
                v.push(Constraint(vec![(1.0, 4, 5), (-SQRT_2, 0, 3)]));
                v.push(shear_relation(5));
                (3, 2, 4, vec![0, 1, 2, 2, 3, 3], v)
            }
            Tetra3D => (3, 1, 5, vec![0, 1, 2, 3, 3, 4], tetra3_constraints()),
            TransIso3D => {
                let mut v = tetra3_constraints();
                v.push(shear_relation(5));
                (2, 1, 4, vec![0, 1, 2, 3, 3, 2], v)
            }
            Cubic3D => (3, 0, 3, vec![0, 1, 1, 2, 2, 2], cubic3_constraints()),
            Iso3D => {
                let mut v = cubic3_constraints();
                v.push(shear_relation(3));
                (0, 0, 2, vec![0, 1, 1, 1, 1, 1], v)
            }
        };
    ClassSpec { class: c, m_q, m_v, m_lambda, layout, constraints }
}

/// Real parameters `z = (q, p, μ)` of a class.
///
/// `q` are spatial rotation parameters (radians), `p` eigen-strain parameters
/// (angle-like, radians) and `μ` log-moduli (log of GPa / reference modulus).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamVector {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub mu: Vec<f64>,
}

impl ParamVector {
    pub fn new(q: Vec<f64>, p: Vec<f64>, mu: Vec<f64>) -> Self {
        Self { q, p, mu }
    }

    pub fn zeros(c: SymmetryClass) -> Self {
        let s = class_spec(c);
        Self { q: vec![0.0; s.m_q], p: vec![0.0; s.m_v], mu: vec![0.0; s.m_lambda] }
    }

    pub fn validate(&self, c: SymmetryClass) -> Result<()> {
        let s = class_spec(c);
        for (name, got, expected) in
            [("q", self.q.len(), s.m_q), ("p", self.p.len(), s.m_v), ("mu", self.mu.len(), s.m_lambda)]
        {
            if got != expected {
                return Err(Error::Invalid(format!(
                    "{c}: parameter block {name} has length {got}, expected {expected}"
                )));
            }
        }
        if self.as_vec().iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("parameters must be finite".into()));
        }
        Ok(())
    }

    /// Concatenation `(q, p, μ)`.
    pub fn as_vec(&self) -> Vec<f64> {
        self.q.iter().chain(&self.p).chain(&self.mu).copied().collect()
    }

    pub fn from_vec(c: SymmetryClass, z: &[f64]) -> Result<Self> {
        let s = class_spec(c);
        if z.len() != s.n() {
            return Err(Error::DimMismatch { expected: s.n(), got: z.len() });
        }
        Ok(Self {
            q: z[..s.m_q].to_vec(),
            p: z[s.m_q..s.m_q + s.m_v].to_vec(),
            mu: z[s.m_q + s.m_v..].to_vec(),
        })
    }
}

/// Product representation `(Q, V, Λ)` of a Kelvin matrix.
///
/// `q` is the spatial rotation (`d×d`), `v` the eigen-strain distributors
/// (`k×k`, orthogonal) and `lambda` the Kelvin moduli (GPa).
#[derive(Debug, Clone, PartialEq)]
pub struct LieTriple {
    pub q: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub lambda: DVector<f64>,
}

impl LieTriple {
    pub fn new(q: DMatrix<f64>, v: DMatrix<f64>, lambda: DVector<f64>) -> Result<Self> {
        validate_rotation(&q)?;
        let k = kelvin_dim(q.nrows())?;
        if v.nrows() != k || v.ncols() != k {
            return Err(Error::DimMismatch { expected: k, got: v.nrows() });
        }
        if lambda.len() != k {
            return Err(Error::DimMismatch { expected: k, got: lambda.len() });
        }
        let orth = orthogonality_residual(&v);
        if orth > 1e-9 * k as f64 {
            return Err(Error::NotRotation { orth, det: v.determinant() });
        }
        if lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Invalid("moduli must be positive and finite".into()));
        }
        Ok(Self { q, v, lambda })
    }

    pub fn spatial_dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn kelvin_dim(&self) -> usize {
        self.v.nrows()
    }

    /// `V Λ Vᵀ`, the matrix in the frame of `Q`.
    pub fn reduced_matrix(&self) -> DMatrix<f64> {
        symmetrize(&(&self.v * DMatrix::from_diagonal(&self.lambda) * self.v.transpose()))
    }

    /// `T(Q)ᵀ V Λ Vᵀ T(Q)`.
    pub fn to_kelvin(&self) -> Result<KelvinMatrix> {
        let t = trep_rot(&self.q)?;
        KelvinMatrix::new(t.transpose() * self.reduced_matrix() * t)
    }

    /// Spectral decomposition of `C` in the frame of the given spatial rotation.
    ///
    /// Moduli are sorted in descending order. Column signs (and bases inside
    /// groups of equal moduli) are aligned with `reference` when given, and
    /// otherwise fixed so that each column's largest entry is positive and
    /// `det V = +1`.
    pub fn from_kelvin(c: &KelvinMatrix, q: DMatrix<f64>, reference: Option<&LieTriple>) -> Result<Self> {
        validate_rotation(&q)?;
        let k = c.dim();
        if kelvin_dim(q.nrows())? != k {
            return Err(Error::DimMismatch { expected: k, got: kelvin_dim(q.nrows())? });
        }
        let t = trep_rot(&q)?;
        let (vals, mut vecs) = sym_eig_desc(&(&t * c.matrix() * t.transpose()));
        let groups = equal_groups(&vals, 1e-8);
        match reference {
            Some(r) if r.kelvin_dim() == k => {
                for g in &groups {
                    let vg = DMatrix::from_fn(k, g.len(), |i, j| vecs[(i, g[j])]);
                    let rg = DMatrix::from_fn(k, g.len(), |i, j| r.v[(i, g[j])]);
                    let svd = (vg.transpose() * &rg).svd(true, true);
                    let w = svd.u.unwrap() * svd.v_t.unwrap();
                    let aligned = vg * w;
                    for (j, &col) in g.iter().enumerate() {
                        vecs.set_column(col, &aligned.column(j));
                    }
                }
                if vecs.determinant() * r.v.determinant() < 0.0 {
                    let worst = (0..k)
                        .min_by(|&a, &b| {
                            let da = vecs.column(a).dot(&r.v.column(a)).abs();
                            let db = vecs.column(b).dot(&r.v.column(b)).abs();
                            da.total_cmp(&db)
                        })
                        .unwrap();
                    vecs.column_mut(worst).neg_mut();
                }
            }
            _ => {
                for j in 0..k {
                    let col = vecs.column(j);
                    let imax = col.iamax();
                    if col[imax] < 0.0 {
                        vecs.column_mut(j).neg_mut();
                    }
                }
                if vecs.determinant() < 0.0 {
                    vecs.column_mut(k - 1).neg_mut();
                }
            }
        }
        LieTriple::new(q, vecs, vals)
    }
}

/// Index groups of (relatively) equal consecutive values of a sorted vector.
pub fn equal_groups(vals: &DVector<f64>, rel_tol: f64) -> Vec<Vec<usize>> {
    let scale = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..vals.len() {
        match groups.last_mut() {
            Some(g) if (vals[*g.last().unwrap()] - vals[i]).abs() <= rel_tol * scale => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

#[derive(Serialize, Deserialize)]
struct TripleJson {
    q: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    lambda: Vec<f64>,
}

impl Serialize for LieTriple {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TripleJson { q: rows_of(&self.q), v: rows_of(&self.v), lambda: self.lambda.iter().copied().collect() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LieTriple {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = TripleJson::deserialize(d)?;
        let q = from_rows(&j.q).ok_or_else(|| D::Error::custom("q: ragged rows"))?;
        let v = from_rows(&j.v).ok_or_else(|| D::Error::custom("v: ragged rows"))?;
        LieTriple::new(q, v, DVector::from_vec(j.lambda)).map_err(D::Error::custom)
    }
}

/// Spatial rotation of a class from its `q` parameters.
///
/// With two parameters (transversely isotropic) the rotation vector is `(q1, q2, 0)`.
pub fn spatial_rotation(c: SymmetryClass, q: &[f64]) -> Result<DMatrix<f64>> {
    let s = class_spec(c);
    if q.len() != s.m_q {
        return Err(Error::DimMismatch { expected: s.m_q, got: q.len() });
    }
    Ok(match (c.dim(), s.m_q) {
        (2, 0) => DMatrix::identity(2, 2),
        (2, _) => exp_so2(q[0]),
        (_, 0) => DMatrix::identity(3, 3),
        (_, 2) => exp_so3(&[q[0], q[1], 0.0]),
        _ => exp_so3(q),
    })
}

fn unit(k: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(k);
    v[i] = 1.0;
    v
}

fn from_columns(cols: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_columns(cols)
}

/// `u = (e1 + e2)/√2`, the in-plane volumetric direction in 3D strain space.
fn u_vec() -> DVector<f64> {
    (unit(6, 0) + unit(6, 1)) / SQRT_2
}

/// `a = (e1 − e2)/√2`.
fn a_vec() -> DVector<f64> {
    (unit(6, 0) - unit(6, 1)) / SQRT_2
}

/// Angle at which `(v1, v2)` coincide with `(n, z)`.
pub fn trigonal_alpha0() -> f64 {
    (1.0 / SQRT_2).atan()
}

fn tetra_pair(alpha: f64) -> (DVector<f64>, DVector<f64>) {
    let (u, e3) = (u_vec(), unit(6, 2));
    let (s, c) = alpha.sin_cos();
    (&u * c + &e3 * s, &u * s - &e3 * c)
}

fn plane_rotation(k: usize, i: usize, j: usize, s: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(k, k);
    let (sn, cs) = s.sin_cos();
    m[(i, i)] = cs;
    m[(j, j)] = cs;
    m[(i, j)] = -sn;
    m[(j, i)] = sn;
    m
}

/// Generators `G` with `V(p0 + p1) = exp(Σ p1_j G_j)·V(p0)` for the classes
/// whose eigenvector family is a one-parameter subgroup orbit.
fn orbit_generators(c: SymmetryClass) -> Vec<DMatrix<f64>> {
    let outer = |x: &DVector<f64>, y: &DVector<f64>| x * y.transpose();
    match c {
        Ortho2D => {
            let mut g = DMatrix::zeros(3, 3);
            g[(1, 0)] = 1.0;
            g[(0, 1)] = -1.0;
            vec![g]
        }
        Tetra3D | TransIso3D | Trigonal3D => {
            let (u, e3) = (u_vec(), unit(6, 2));
            let g1 = outer(&e3, &u) - outer(&u, &e3);
            if c != Trigonal3D {
                return vec![g1];
            }
            let (a, e4, e5, e6) = (a_vec(), unit(6, 3), unit(6, 4), unit(6, 5));
            let g2 = outer(&a, &e4) - outer(&e4, &a) + outer(&e6, &e5) - outer(&e5, &e6);
            vec![g1, g2]
        }
        _ => vec![],
    }
}

/// Eigen-strain distributors `V(p)` of a class (columns are eigenvectors).
///
/// For the triclinic classes this is the raw parametrized family; the
/// reduced form additionally normalizes the spatial frame (see [`build_reduced`]).
pub fn build_eigvecs(c: SymmetryClass, p: &[f64]) -> Result<DMatrix<f64>> {
    let s = class_spec(c);
    if p.len() != s.m_v {
        return Err(Error::DimMismatch { expected: s.m_v, got: p.len() });
    }
    let k = s.k();
    Ok(match c {
        Triclinic2D => plane_rotation(3, 1, 2, p[0]) * plane_rotation(3, 0, 1, p[1]),
        Ortho2D => plane_rotation(3, 0, 1, p[0]),
        Tetra2D | Iso2D => {
            let b = special_basis(2)?;
            from_columns(&[b[0].clone(), b[1].clone(), unit(3, 2)])
        }
        Triclinic3D => expm(&subspace_bases(3)?.complement_skew(p)),
        Monoclinic3D => block_diag(&expm(&skwr4(p)), &DMatrix::identity(2, 2)),
        Ortho3D => block_diag(&exp_so3(p), &DMatrix::identity(3, 3)),
        Trigonal3D => {
            let (v1, v2) = tetra_pair(trigonal_alpha0() + p[0]);
            let (sn, cs) = p[1].sin_cos();
            let (a, e4, e5, e6) = (a_vec(), unit(6, 3), unit(6, 4), unit(6, 5));
            let v3 = &a * cs - &e4 * sn;
            let v4 = &e6 * cs - &e5 * sn;
            let v5 = &a * sn + &e4 * cs;
            // Sign of the last column chosen so that det V = +1.
            let v6 = -(&e5 * cs + &e6 * sn);
            from_columns(&[v1, v2, v3, v4, v5, v6])
        }
        Tetra3D | TransIso3D => {
            let (v1, v2) = tetra_pair(p[0]);
            let y = special_basis(3)?[1].clone();
            from_columns(&[v1, v2, y, unit(k, 3), unit(k, 4), unit(k, 5)])
        }
        Cubic3D | Iso3D => {
            let b = special_basis(3)?;
            // (n, y, z, e4, e5, −e6): the last sign makes det V = +1.
            from_columns(&[b[0].clone(), b[1].clone(), b[2].clone(), unit(6, 3), unit(6, 4), -unit(6, 5)])
        }
    })
}

/// Left factor `V1(p1)` such that `V1·V0` stays inside the eigenvector family.
///
/// For orbit families this is `exp(Σ p1_j G_j)`; for the triclinic, monoclinic
/// and orthotropic classes it is the exponential of the class sub-algebra.
pub fn eigvec_fluctuation(c: SymmetryClass, p1: &[f64]) -> Result<DMatrix<f64>> {
    let s = class_spec(c);
    if p1.len() != s.m_v {
        return Err(Error::DimMismatch { expected: s.m_v, got: p1.len() });
    }
    let k = s.k();
    Ok(match c {
        Triclinic2D => expm(&subspace_bases(2)?.complement_skew(p1)),
        Triclinic3D => expm(&subspace_bases(3)?.complement_skew(p1)),
        Monoclinic3D => block_diag(&expm(&skwr4(p1)), &DMatrix::identity(2, 2)),
        Ortho3D => block_diag(&exp_so3(p1), &DMatrix::identity(3, 3)),
        _ => {
            let gens = orbit_generators(c);
            let mut a = DMatrix::zeros(k, k);
            for (g, &x) in gens.iter().zip(p1) {
                a += g * x;
            }
            if gens.is_empty() {
                DMatrix::identity(k, k)
            } else {
                expm(&a)
            }
        }
    })
}

/// Diagonal of `Λ = exp(diag♯ μ)` in GPa (`REF_MODULUS_GPA = 1`).
pub fn build_moduli(c: SymmetryClass, mu: &[f64]) -> Result<DVector<f64>> {
    let s = class_spec(c);
    if mu.len() != s.m_lambda {
        return Err(Error::DimMismatch { expected: s.m_lambda, got: mu.len() });
    }
    if mu.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid("log-moduli must be finite".into()));
    }
    Ok(DVector::from_iterator(s.k(), s.layout.iter().map(|&i| mu[i].exp() * crate::kelvin::REF_MODULUS_GPA)))
}

/// Fourth-order components `C_ijkl` of a Kelvin matrix, flattened as `((i·d + j)·d + k)·d + l`.
pub fn fourth_order(c: &DMatrix<f64>) -> Result<Vec<f64>> {
    let k = c.nrows();
    let d = crate::kelvin::spatial_dim(k)?;
    let mut out = vec![0.0; d * d * d * d];
    for a in 0..k {
        let ea = vrep_inv(&unit(k, a))?.into_matrix();
        for b in 0..k {
            let eb = vrep_inv(&unit(k, b))?.into_matrix();
            for i in 0..d {
                for j in 0..d {
                    for m in 0..d {
                        for n in 0..d {
                            out[((i * d + j) * d + m) * d + n] += c[(a, b)] * ea[(i, j)] * eb[(m, n)];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `T(a)_ij = C_ijkl a_k a_l` and `U(a)_ik = C_ijkl a_j a_l`.
fn contractions(c4: &[f64], a: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = a.len();
    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * d + j) * d + k) * d + l;
    let mut t = DMatrix::zeros(d, d);
    let mut u = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    t[(i, j)] += c4[idx(i, j, k, l)] * a[k] * a[l];
                    u[(i, k)] += c4[idx(i, j, k, l)] * a[j] * a[l];
                }
            }
        }
    }
    (t, u)
}

fn tangent_basis(a: &DVector<f64>) -> Vec<DVector<f64>> {
    if a.len() == 2 {
        return vec![DVector::from_vec(vec![-a[1], a[0]])];
    }
    let a3 = Vector3::new(a[0], a[1], a[2]);
    let helper = if a3.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let b1 = a3.cross(&helper).normalize();
    let b2 = a3.cross(&b1);
    vec![DVector::from_column_slice(b1.as_slice()), DVector::from_column_slice(b2.as_slice())]
}

fn grid_directions(d: usize) -> Vec<DVector<f64>> {
    if d == 2 {
        return (0..360)
            .map(|i| {
                let t = PI * i as f64 / 360.0;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect();
    }
    let n = 800;
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            DVector::from_vec(vec![r * t.cos(), r * t.sin(), z])
        })
        .collect()
}

/// Spatial rotation `R` bringing a Kelvin matrix to the triclinic normal form.
///
/// The direction `a` maximizing the longitudinal stiffness `C_ijkl a_i a_j a_k a_l`
/// becomes axis 1; at such a critical point `C_111j = 0` for `j ≠ 1`, and
/// choosing axes 2, 3 along the eigenvectors of `C_ij11` restricted to the
/// plane orthogonal to `a` also removes `C_1123`. In Kelvin terms the rotated
/// matrix `T(R) C T(R)ᵀ` has zeros at (1,4), (1,5), (1,6) in 3D and (1,3) in 2D.
pub fn group_reduction(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = c.nrows();
    let d = match k {
        3 => 2,
        6 => 3,
        _ => return Err(Error::BadDim(k)),
    };
    let scale = c.norm();
    let c4 = fourth_order(c)?;
    let g = |a: &DVector<f64>| (a.transpose() * contractions(&c4, a).0 * a)[(0, 0)];
    let mut a = grid_directions(d)
        .into_iter()
        .max_by(|x, y| g(x).total_cmp(&g(y)))
        .expect("non-empty grid");
    let mut converged = false;
    for _ in 0..100 {
        let (t, u) = contractions(&c4, &a);
        let hess = (&t + &u * 2.0) * 4.0;
        let ga = (a.transpose() * &t * &a)[(0, 0)];
        let basis = tangent_basis(&a);
        let m = basis.len();
        let r = DVector::from_fn(m, |i, _| 4.0 * (basis[i].transpose() * &t * &a)[(0, 0)]);
        if r.norm() <= 1e-14 * scale {
            converged = true;
            break;
        }
        let h = DMatrix::from_fn(m, m, |i, j| {
            (basis[i].transpose() * &hess * &basis[j])[(0, 0)] - if i == j { 4.0 * ga } else { 0.0 }
        });
        let (hv, _) = sym_eig_desc(&h);
        let step = if hv[0] < -1e-12 * scale {
            -h.clone().lu().solve(&r).unwrap_or_else(|| DVector::zeros(m))
        } else {
            &r / (12.0 * scale)
        };
        let mut next = a.clone();
        for (bi, si) in basis.iter().zip(step.iter()) {
            next += bi * *si;
        }
        a = next.normalize();
    }
    if !converged {
        let t = contractions(&c4, &a).0;
        let res: f64 = tangent_basis(&a).iter().map(|b| (b.transpose() * &t * &a)[(0, 0)].abs()).sum();
        if res > 1e-11 * scale {
            return Err(Error::NoConvergence { iterations: 100, residual: res / scale });
        }
    }
    let rows: Vec<DVector<f64>> = if d == 2 {
        vec![a.clone(), DVector::from_vec(vec![-a[1], a[0]])]
    } else {
        let t = contractions(&c4, &a).0;
        let basis = tangent_basis(&a);
        let h = DMatrix::from_fn(2, 2, |i, j| (basis[i].transpose() * &t * &basis[j])[(0, 0)]);
        let (_, w) = sym_eig_desc(&h);
        let e2 = (&basis[0] * w[(0, 0)] + &basis[1] * w[(1, 0)]).normalize();
        let a3 = Vector3::new(a[0], a[1], a[2]);
        let e3 = a3.cross(&Vector3::new(e2[0], e2[1], e2[2]));
        vec![a.clone(), e2, DVector::from_column_slice(e3.as_slice())]
    };
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn is_triclinic(c: SymmetryClass) -> bool {
    matches!(c, Triclinic2D | Triclinic3D)
}

/// Eigenvectors of the reduced form: `V(p)`, or `T(R)·V(p)` for triclinic classes.
pub fn reduced_eigvecs(c: SymmetryClass, mu: &[f64], p: &[f64]) -> Result<DMatrix<f64>> {
    let v = build_eigvecs(c, p)?;
    if !is_triclinic(c) {
        return Ok(v);
    }
    let lam = build_moduli(c, mu)?;
    let m = symmetrize(&(&v * DMatrix::from_diagonal(&lam) * v.transpose()));
    let r = group_reduction(&m)?;
    Ok(trep_rot(&r)? * v)
}

/// Reduced (canonical-frame) Kelvin matrix `V Λ Vᵀ` of a class.
pub fn build_reduced(c: SymmetryClass, mu: &[f64], p: &[f64]) -> Result<KelvinMatrix> {
    let v = reduced_eigvecs(c, mu, p)?;
    let lam = build_moduli(c, mu)?;
    KelvinMatrix::new(&v * DMatrix::from_diagonal(&lam) * v.transpose())
}

/// Fully oriented Kelvin matrix `T(Q)ᵀ·reduced·T(Q)` and its product representation.
pub fn build_full(c: SymmetryClass, z: &ParamVector) -> Result<(KelvinMatrix, LieTriple)> {
    z.validate(c)?;
    let q = spatial_rotation(c, &z.q)?;
    let v = reduced_eigvecs(c, &z.mu, &z.p)?;
    let lam = build_moduli(c, &z.mu)?;
    let triple = LieTriple::new(q, v, lam)?;
    Ok((triple.to_kelvin()?, triple))
}

/// Outcome of a class membership check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    /// Largest constraint residual relative to `‖C‖_F`.
    pub max_violation: f64,
}

/// Checks the zero pattern and equality relations of a class in its canonical frame.
pub fn check_reduced_form(c: &KelvinMatrix, class: SymmetryClass, tol: f64) -> Result<CheckReport> {
    if c.dim() != class.kelvin_dim() {
        return Err(Error::DimMismatch { expected: class.kelvin_dim(), got: c.dim() });
    }
    let m = c.matrix();
    let scale = m.norm();
    let max_violation = class_spec(class)
        .constraints
        .iter()
        .map(|k| k.residual(m) / scale)
        .fold(0.0, f64::max);
    Ok(CheckReport { passed: max_violation <= tol, max_violation })
}

/// Strain-space images of generators of the class symmetry group.
///
/// 3D generators are proper rotations about the canonical axes. The 2D
/// classes are distinguished by mirror symmetry, so their list includes the
/// reflection `x2 ↦ −x2`.
pub fn symmetry_generators(c: SymmetryClass) -> Vec<DMatrix<f64>> {
    let t = |m: DMatrix<f64>| orthogonal_action(&m);
    let mirror = || DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
    match c {
        Triclinic2D => vec![t(exp_so2(PI))],
        Ortho2D => vec![t(mirror())],
        Tetra2D => vec![t(mirror()), t(exp_so2(PI / 2.0))],
        Iso2D => vec![t(mirror()), t(exp_so2(0.37)), t(exp_so2(1.9))],
        Triclinic3D => vec![DMatrix::identity(6, 6)],
        Monoclinic3D => vec![t(axis_rotation(0, PI))],
        Ortho3D => vec![t(axis_rotation(0, PI)), t(axis_rotation(1, PI))],
        Trigonal3D => vec![t(axis_rotation(2, 2.0 * PI / 3.0)), t(axis_rotation(0, PI))],
        Tetra3D => vec![t(axis_rotation(2, PI / 2.0)), t(axis_rotation(0, PI))],
        TransIso3D => vec![t(axis_rotation(2, 0.4)), t(axis_rotation(2, 2.1)), t(axis_rotation(0, PI))],
        Cubic3D => vec![t(axis_rotation(2, PI / 2.0)), t(axis_rotation(0, PI / 2.0))],
        Iso3D => vec![t(exp_so3(&[0.3, -0.7, 1.1])), t(exp_so3(&[-1.2, 0.4, 0.25]))],
    }
}

/// Kelvin action `vrep(M t Mᵀ) = A·vrep(t)` of any orthogonal `M` (proper or not).
pub fn orthogonal_action(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    let k = kelvin_dim(d).expect("2 or 3");
    let mut out = DMatrix::zeros(k, k);
    for j in 0..k {
        let e = vrep_inv(&unit(k, j)).expect("valid length");
        let rotated = symmetrize(&(m * e.matrix() * m.transpose()));
        out.set_column(j, &vrep(&SymTensor2::new(rotated).expect("symmetric")));
    }
    out
}

/// Isotropic log-moduli `(ln 3K, ln 2G)`.
pub fn iso_params(bulk: f64, shear: f64) -> Vec<f64> {
    vec![(3.0 * bulk).ln(), (2.0 * shear).ln()]
}

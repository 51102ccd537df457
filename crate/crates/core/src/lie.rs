//! Rotations, skew parametrizations and the strain-space representation.
//!
//! A spatial rotation `Q ∈ SO(d)` acts on symmetric tensors by `t ↦ Q t Qᵀ`.
//! In Kelvin coordinates this action is a rotation `trep_rot(Q) ∈ SO(k)`, and
//! its differential at the identity maps `so(d)` into `so(k)` ([`trep`]).
//! Skew matrices of `so(6)` are parametrized by 15 numbers laid out along the
//! five upper diagonals ([`skwr6`]); the image of `so(3)` under [`trep`] is
//! spanned by three of those parameter vectors and its orthogonal complement
//! by the remaining twelve ([`subspace_bases`]).

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kelvin::{kelvin_dim, vrep, vrep_inv, SymTensor2};
use crate::linalg::{orthogonality_residual, sym_eig_desc, symmetrize};

/// Angles within this distance of π are treated as the branch boundary of log.
pub const BRANCH_TOL: f64 = 1e-10;

const ROT_TOL: f64 = 1e-9;

/// Skew matrix with `skw3(p)·x = p × x`.
pub fn skw3(p: &[f64]) -> DMatrix<f64> {
    assert_eq!(p.len(), 3, "skw3 expects 3 parameters");
    DMatrix::from_row_slice(3, 3, &[0.0, -p[2], p[1], p[2], 0.0, -p[0], -p[1], p[0], 0.0])
}

/// Inverse of [`skw3`] (reads the skew part only).
pub fn vee3(r: &DMatrix<f64>) -> [f64; 3] {
    [
        0.5 * (r[(2, 1)] - r[(1, 2)]),
        0.5 * (r[(0, 2)] - r[(2, 0)]),
        0.5 * (r[(1, 0)] - r[(0, 1)]),
    ]
}

/// Rotation about the axis `q/‖q‖` by the angle `‖q‖` (Rodrigues).
pub fn exp_so3(q: &[f64]) -> DMatrix<f64> {
    let theta = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
    if theta == 0.0 {
        return DMatrix::identity(3, 3);
    }
    let r = skw3(&[q[0] / theta, q[1] / theta, q[2] / theta]);
    let r2 = &r * &r;
    DMatrix::identity(3, 3) + r * theta.sin() + r2 * (1.0 - theta.cos())
}

/// Planar rotation by `theta`.
pub fn exp_so2(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Rotation about spatial axis `axis` (0-based) by `theta`.
pub fn axis_rotation(axis: usize, theta: f64) -> DMatrix<f64> {
    let mut q = [0.0; 3];
    q[axis] = theta;
    exp_so3(&q)
}

/// Checks `QQᵀ = I` and `det Q = +1`.
pub fn validate_rotation(q: &DMatrix<f64>) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(Error::DimMismatch { expected: q.nrows(), got: q.ncols() });
    }
    let orth = orthogonality_residual(q);
    let det = q.determinant();
    if orth > ROT_TOL * (q.nrows() as f64) || (det - 1.0).abs() > ROT_TOL {
        return Err(Error::NotRotation { orth, det });
    }
    Ok(())
}

/// Principal logarithm of a rotation.
///
/// `Q` is split into its commuting symmetric part `S` (eigenvalues `cos φ`)
/// and skew part `K` (acting as `sin φ` on each invariant plane); the
/// logarithm is `g(S)·K` with `g = φ / sin φ` evaluated per eigenvector of `S`.
/// An invariant plane turned by π (within [`BRANCH_TOL`]) is an error.
pub fn log_rotation(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    validate_rotation(q)?;
    let n = q.nrows();
    let s = symmetrize(q);
    let k = (q - q.transpose()) * 0.5;
    let (cs, vecs) = sym_eig_desc(&s);
    let mut g = DVector::zeros(n);
    for i in 0..n {
        let v = vecs.column(i);
        let sn = (&k * v).norm();
        let phi = sn.atan2(cs[i]);
        if PI - phi < BRANCH_TOL {
            return Err(Error::BranchBoundary { angle: phi });
        }
        g[i] = if phi < 1e-4 {
            1.0 + phi * phi / 6.0 + 7.0 * phi.powi(4) / 360.0
        } else {
            phi / sn
        };
    }
    let gs = &vecs * DMatrix::from_diagonal(&g) * vecs.transpose();
    let l = gs * k;
    Ok((&l - l.transpose()) * 0.5)
}

/// Largest invariant-plane angle of a rotation (spectral norm of its log).
pub fn max_rotation_angle(q: &DMatrix<f64>) -> Result<f64> {
    let l = log_rotation(q)?;
    let (vals, _) = sym_eig_desc(&(l.transpose() * &l));
    Ok(vals[0].max(0.0).sqrt())
}

/// Matrix exponential (Padé, via nalgebra).
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.exp()
}

/// Strict-upper-triangle positions of the diagonal-wise skew layout of size `n`.
///
/// Parameters fill the upper diagonals from the outermost one inward, each
/// diagonal from its bottom entry upward: for `n = 6`, `p1` sits at (1,6),
/// `p2` at (2,6), `p3` at (1,5), …, `p15` at (1,2) (1-based).
pub fn skwr_layout(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for d in (1..n).rev() {
        for row in (0..n - d).rev() {
            out.push((row, row + d));
        }
    }
    out
}

/// Skew matrix of size `n` from `n(n−1)/2` parameters in the diagonal layout.
pub fn skwr(n: usize, p: &[f64]) -> DMatrix<f64> {
    let layout = skwr_layout(n);
    assert_eq!(p.len(), layout.len(), "skwr({n}) expects {} parameters", layout.len());
    let mut m = DMatrix::zeros(n, n);
    for (&(i, j), &v) in layout.iter().zip(p) {
        m[(i, j)] = v;
        m[(j, i)] = -v;
    }
    m
}

/// Parameters of a skew matrix in the diagonal layout.
pub fn skwr_params(m: &DMatrix<f64>) -> Vec<f64> {
    skwr_layout(m.nrows())
        .into_iter()
        .map(|(i, j)| 0.5 * (m[(i, j)] - m[(j, i)]))
        .collect()
}

pub fn skwr6(p: &[f64]) -> DMatrix<f64> {
    skwr(6, p)
}

pub fn skwr4(p: &[f64]) -> DMatrix<f64> {
    skwr(4, p)
}

/// Constant generator of the 2D strain-space rotation: `trep` of `[[0,−1],[1,0]]`.
pub fn trep2_generator() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -SQRT_2, 0.0, 0.0, SQRT_2, SQRT_2, -SQRT_2, 0.0])
}

/// Strain-space generator induced by a spatial skew matrix (`so(d) → so(k)`).
pub fn trep(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match r.nrows() {
        2 => Ok(trep2_generator() * (0.5 * (r[(1, 0)] - r[(0, 1)]))),
        3 => {
            let [r1, r2, r3] = vee3(r);
            let s = SQRT_2;
            #[rustfmt::skip]
            let upper = DMatrix::from_row_slice(6, 6, &[
                0.0, 0.0, 0.0,     0.0,     s * r2, -s * r3,
                0.0, 0.0, 0.0,     -s * r1, 0.0,    s * r3,
                0.0, 0.0, 0.0,     s * r1,  -s * r2, 0.0,
                0.0, 0.0, 0.0,     0.0,     r3,     -r2,
                0.0, 0.0, 0.0,     0.0,     0.0,    r1,
                0.0, 0.0, 0.0,     0.0,     0.0,    0.0,
            ]);
            Ok(&upper - upper.transpose())
        }
        d => Err(Error::BadDim(d)),
    }
}

/// Strain-space rotation induced by a spatial rotation:
/// `vrep(Q t Qᵀ) = trep_rot(Q)·vrep(t)`.
pub fn trep_rot(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    validate_rotation(q)?;
    let d = q.nrows();
    let k = kelvin_dim(d)?;
    let mut out = DMatrix::zeros(k, k);
    for j in 0..k {
        let e = vrep_inv(&DVector::from_fn(k, |i, _| if i == j { 1.0 } else { 0.0 }))?;
        let rotated = q * e.matrix() * q.transpose();
        let col = vrep(&SymTensor2::new(symmetrize(&rotated))?);
        out.set_column(j, &col);
    }
    Ok(out)
}

/// Closed form of `exp(θ·trep(skw3(r)))` for a unit axis `r`.
///
/// The generator has eigen-rates 1 and 2, which gives the five-term formula
/// `I + sinθ P + (1−cosθ) P² + ⅓ sinθ (1−cosθ)(P + P³) + ⅙ (1−cosθ)² (P² + P⁴)`.
pub fn exp_trep3(theta: f64, axis: &[f64]) -> DMatrix<f64> {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let p = trep(&skw3(&[axis[0] / n, axis[1] / n, axis[2] / n])).expect("3x3 input");
    let p2 = &p * &p;
    let p3 = &p2 * &p;
    let p4 = &p2 * &p2;
    let (s, c) = theta.sin_cos();
    let omc = 1.0 - c;
    DMatrix::identity(6, 6)
        + &p * s
        + &p2 * omc
        + (&p + p3) * (s * omc / 3.0)
        + (p2 + p4) * (omc * omc / 6.0)
}

/// Closed form of `exp(θ·trep2_generator())`.
///
/// The generator has eigenvalues `0, ±2i`, so
/// `exp(θR) = I + ½ sin2θ R + ¼ (1 − cos2θ) R²`.
pub fn exp_trep2(theta: f64) -> DMatrix<f64> {
    let r = trep2_generator();
    let r2 = &r * &r;
    DMatrix::identity(3, 3) + r * (0.5 * (2.0 * theta).sin()) + r2 * (0.25 * (1.0 - (2.0 * theta).cos()))
}

/// Spatial basis `{h_j}` and its complement `{k_j}` in the skew parameter space.
#[derive(Debug, Clone)]
pub struct SubspaceBases {
    pub spatial: Vec<DVector<f64>>,
    pub complement: Vec<DVector<f64>>,
}

impl SubspaceBases {
    /// Skew matrix `Σ s_j k_j` in strain space.
    pub fn complement_skew(&self, s: &[f64]) -> DMatrix<f64> {
        assert_eq!(s.len(), self.complement.len());
        let mut p = DVector::zeros(self.complement[0].len());
        for (sj, kj) in s.iter().zip(&self.complement) {
            p += kj * *sj;
        }
        param_to_skew(&p)
    }
}

/// Skew matrix of a parameter vector: `skw3` in 2D strain space, `skwr6` in 3D.
pub fn param_to_skew(p: &DVector<f64>) -> DMatrix<f64> {
    match p.len() {
        3 => skw3(p.as_slice()),
        15 => skwr6(p.as_slice()),
        n => panic!("no skew parametrization with {n} parameters"),
    }
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i - 1] = 1.0;
    v
}

/// Bases of the spatial subspace and its complement (1-based unit vectors `e_i`).
pub fn subspace_bases(d: usize) -> Result<SubspaceBases> {
    match d {
        2 => {
            let g = |i| unit(3, i);
            Ok(SubspaceBases {
                spatial: vec![-(g(1) + g(2)) * SQRT_2],
                complement: vec![(g(1) - g(2)) * SQRT_2, g(3)],
            })
        }
        3 => {
            let e = |i| unit(15, i);
            let s = SQRT_2;
            let spatial = vec![
                -e(9) * s + e(13) * s + e(11),
                e(3) * s - e(8) * s - e(7),
                -e(1) * s + e(2) * s + e(12),
            ];
            let complement = vec![
                e(4),
                e(5),
                e(6),
                e(10),
                e(14),
                e(15),
                e(9) + e(13),
                e(3) + e(8),
                e(1) + e(2),
                e(9) - e(13) + e(11) * (2.0 * s),
                e(3) - e(8) + e(7) * (2.0 * s),
                e(1) - e(2) + e(12) * (2.0 * s),
            ];
            Ok(SubspaceBases { spatial, complement })
        }
        _ => Err(Error::BadDim(d)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // 30-term Taylor series on A/2^s, squared back s times.
    fn series_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let s = a.norm().log2().ceil().max(0.0) as i32;
        let b = a / 2f64.powi(s);
        let mut term = DMatrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &b / k as f64;
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn skw3_layout_and_cross_product() {
        let m = skw3(&[0.0, 0.0, 1.0]);
        assert_eq!(m, DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        let p = nalgebra::Vector3::new(0.3, -1.2, 2.0);
        let x = nalgebra::Vector3::new(-0.7, 0.4, 1.1);
        let px = skw3(p.as_slice()) * DVector::from_column_slice(x.as_slice());
        let c = p.cross(&x);
        for i in 0..3 {
            assert_relative_eq!(px[i], c[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn exp_so3_examples() {
        assert_eq!(exp_so3(&[0.0; 3]), DMatrix::identity(3, 3));
        let q = exp_so3(&[0.0, 0.0, PI / 2.0]);
        let expect = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_relative_eq!(q, expect, epsilon = 1e-15);
        assert_relative_eq!(q, series_exp(&skw3(&[0.0, 0.0, PI / 2.0])), epsilon = 1e-14);
        assert_relative_eq!(exp_so3(&[0.0, 0.0, 2.0 * PI]), DMatrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn exp_so2_examples() {
        assert_eq!(exp_so2(0.0), DMatrix::identity(2, 2));
        let gen = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert_relative_eq!(exp_so2(PI / 2.0), series_exp(&(gen * (PI / 2.0))), epsilon = 1e-14);
        assert_relative_eq!(exp_so2(PI), exp_so2(-PI), epsilon = 1e-15);
    }

    #[test]
    fn log_examples() {
        assert_relative_eq!(log_rotation(&DMatrix::identity(3, 3)).unwrap(), DMatrix::zeros(3, 3));
        let p = [0.3, -0.2, 0.1];
        assert_relative_eq!(log_rotation(&exp_so3(&p)).unwrap(), skw3(&p), epsilon = 1e-13);
        let a = skwr6(&(1..=15).map(|i| 0.05 * (i as f64).sin()).collect::<Vec<_>>());
        assert_relative_eq!(log_rotation(&expm(&a)).unwrap(), a, epsilon = 1e-12);
    }

    #[test]
    fn log_branch_boundary_is_error() {
        let q = exp_so3(&[0.0, PI, 0.0]);
        assert!(matches!(log_rotation(&q), Err(Error::BranchBoundary { .. })));
        let flip = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -1.0, 1.0, 1.0]));
        assert!(matches!(log_rotation(&flip), Err(Error::BranchBoundary { .. })));
    }

    #[test]
    fn log_handles_cyclic_permutation() {
        // A rotation with three eigenvalues on the unit circle and exact zeros.
        let q = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let l = log_rotation(&q).unwrap();
        assert_relative_eq!(expm(&l), q, epsilon = 1e-13);
    }

    #[test]
    fn skwr6_examples() {
        let mut p = [0.0; 15];
        p[0] = 1.0;
        let m = skwr6(&p);
        assert_eq!(m[(0, 5)], 1.0);
        assert_eq!(m[(5, 0)], -1.0);
        assert_eq!(m.iter().filter(|x| **x != 0.0).count(), 2);
        let layout = skwr_layout(6);
        assert_eq!(layout[14], (0, 1));
        assert_eq!(layout[9], (0, 2));
        assert_eq!(layout[10], (4, 5));
        assert_eq!(skwr6(&[0.0; 15]), DMatrix::zeros(6, 6));
    }

    #[test]
    fn trep_matches_derivative_of_trep_rot() {
        let h = 1e-6;
        for r in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.3, -0.5, 0.8]] {
            let fd = (trep_rot(&exp_so3(&r.map(|x| x * h))).unwrap()
                - trep_rot(&exp_so3(&r.map(|x| -x * h))).unwrap())
                / (2.0 * h);
            assert_relative_eq!(fd, trep(&skw3(&r)).unwrap(), epsilon = 1e-8);
        }
        let fd2 = (trep_rot(&exp_so2(h)).unwrap() - trep_rot(&exp_so2(-h)).unwrap()) / (2.0 * h);
        assert_relative_eq!(fd2, trep2_generator(), epsilon = 1e-8);
    }

    #[test]
    fn trep_examples() {
        let t = trep(&skw3(&[1.0, 0.0, 0.0])).unwrap();
        assert_relative_eq!(t[(1, 3)], -SQRT_2);
        assert_relative_eq!(t[(2, 3)], SQRT_2);
        assert_relative_eq!(t[(4, 5)], 1.0);
        assert_eq!(trep(&DMatrix::zeros(3, 3)).unwrap(), DMatrix::zeros(6, 6));
        let theta = 0.37;
        let r = DMatrix::from_row_slice(2, 2, &[0.0, -theta, theta, 0.0]);
        assert_relative_eq!(trep(&r).unwrap(), trep2_generator() * theta, epsilon = 1e-15);
    }

    #[test]
    fn trep_rot_2d_entries() {
        let theta = 0.7f64;
        let t = trep_rot(&exp_so2(theta)).unwrap();
        let (s, c) = theta.sin_cos();
        assert_relative_eq!(t[(0, 0)], c * c, epsilon = 1e-15);
        assert_relative_eq!(t[(0, 2)], -SQRT_2 * s * c, epsilon = 1e-15);
        assert_relative_eq!(trep_rot(&DMatrix::identity(3, 3)).unwrap(), DMatrix::identity(6, 6));
    }

    #[test]
    fn closed_forms_match_series() {
        for (i, theta) in [0.1, 1.0, 2.5, -3.0].into_iter().enumerate() {
            let axis = [1.0, (i as f64) - 1.5, 0.3];
            let n = (axis.iter().map(|x| x * x).sum::<f64>()).sqrt();
            let unit_axis = axis.map(|x| x / n);
            let p = trep(&skw3(&unit_axis)).unwrap() * theta;
            assert_relative_eq!(exp_trep3(theta, &axis), series_exp(&p), epsilon = 1e-12);
            assert_relative_eq!(exp_trep2(theta), series_exp(&(trep2_generator() * theta)), epsilon = 1e-12);
        }
    }

    #[test]
    fn subspace_examples() {
        let b = subspace_bases(3).unwrap();
        assert_eq!(b.spatial.len(), 3);
        assert_eq!(b.complement.len(), 12);
        for (i, r) in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].iter().enumerate() {
            assert_relative_eq!(skwr6(b.spatial[i].as_slice()), trep(&skw3(r)).unwrap(), epsilon = 1e-15);
        }
        for h in &b.spatial {
            for k in &b.complement {
                assert!(h.dot(k).abs() < 1e-15);
            }
        }
        let b2 = subspace_bases(2).unwrap();
        assert_relative_eq!(skw3(b2.spatial[0].as_slice()), trep2_generator(), epsilon = 1e-15);
        let w = b2.complement_skew(&[0.4, -1.3]);
        assert_relative_eq!(w.clone(), -w.transpose());
        assert!((w.component_mul(&trep2_generator())).sum().abs() < 1e-15);
    }
}

//! Property tests over random inputs.

use kelvin_tensor::classes::{
    build_eigvecs, build_moduli, check_reduced_form, class_spec, CHECK_TOL,
};
use kelvin_tensor::kelvin::{vrep, KelvinMatrix, SymTensor2};
use kelvin_tensor::lie::{exp_so3, log_rotation, skw3, trep_rot, vee3};
use kelvin_tensor::means::{mean_euclid, mean_logdiag, WeightedEnsemble};
use kelvin_tensor::metrics::{dist_euclid, dist_product, geodesic_triple, MetricWeights};
use kelvin_tensor::stochastic::{ensemble_mean_symmetry_check, ordered_moduli, random_kelvin, GenConfig};
use kelvin_tensor::{build_full, LieTriple, ParamVector, SymmetryClass};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn rot_vec(max: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3).prop_filter_map("non-zero", move |v| {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        (n > 1e-3 && n < 1.0).then(|| v.iter().map(|x| x * max).collect())
    })
}

fn class_and_params() -> impl Strategy<Value = (SymmetryClass, ParamVector)> {
    (0..12usize).prop_flat_map(|i| {
        let c = SymmetryClass::ALL[i];
        let s = class_spec(c);
        (
            Just(c),
            prop::collection::vec(-1.5f64..1.5, s.m_q),
            prop::collection::vec(-1.5f64..1.5, s.m_v),
            prop::collection::vec(-1.0f64..3.0, s.m_lambda),
        )
            .prop_map(|(c, q, p, mu)| (c, ParamVector::new(q, p, mu)))
    })
}

fn ortho_triple() -> impl Strategy<Value = LieTriple> {
    (rot_vec(1.2), rot_vec(1.0), prop::collection::vec(-1.0f64..3.0, 6)).prop_map(|(q, p, mu)| {
        build_full(SymmetryClass::Ortho3D, &ParamVector::new(q, p, mu)).unwrap().1
    })
}

fn sym3() -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-5.0f64..5.0, 6).prop_map(|v| {
        DMatrix::from_row_slice(3, 3, &[v[0], v[5], v[4], v[5], v[1], v[3], v[4], v[3], v[2]])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vrep_preserves_inner_products(a in sym3(), b in sym3()) {
        let va = vrep(&SymTensor2::new(a.clone()).unwrap());
        let vb = vrep(&SymTensor2::new(b.clone()).unwrap());
        prop_assert!((va.dot(&vb) - (&a * &b).trace()).abs() < 1e-12 * (1.0 + a.norm() * b.norm()));
    }

    #[test]
    fn trep_is_a_homomorphism(a in rot_vec(3.0), b in rot_vec(3.0)) {
        let (qa, qb) = (exp_so3(&a), exp_so3(&b));
        let lhs = trep_rot(&(&qa * &qb)).unwrap();
        let rhs = trep_rot(&qa).unwrap() * trep_rot(&qb).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn log_inverts_exp(q in rot_vec(3.1)) {
        let l = log_rotation(&exp_so3(&q)).unwrap();
        let back = vee3(&l);
        for i in 0..3 {
            prop_assert!((back[i] - q[i]).abs() < 1e-9);
        }
        prop_assert!((l - skw3(&q)).norm() < 1e-9);
    }

    #[test]
    fn every_build_is_spd_and_in_class((c, z) in class_and_params()) {
        let (k, t) = build_full(c, &z).unwrap();
        prop_assert!(k.eigenvalues().min() > 0.0);
        let r = check_reduced_form(&KelvinMatrix::new(t.reduced_matrix()).unwrap(), c, CHECK_TOL).unwrap();
        prop_assert!(r.passed, "{} violation {}", c, r.max_violation);
        let json = serde_json::to_string(&z).unwrap();
        prop_assert_eq!(serde_json::from_str::<ParamVector>(&json).unwrap(), z);
        let json = serde_json::to_string(&k).unwrap();
        prop_assert_eq!(serde_json::from_str::<KelvinMatrix>(&json).unwrap(), k);
    }

    #[test]
    fn product_distance_is_a_metric(a in ortho_triple(), b in ortho_triple(), c in ortho_triple()) {
        let w = MetricWeights::new(0.6, 1.4).unwrap();
        let ab = dist_product(&a, &b, &w).unwrap();
        let ba = dist_product(&b, &a, &w).unwrap();
        let bc = dist_product(&b, &c, &w).unwrap();
        let ac = dist_product(&a, &c, &w).unwrap();
        prop_assert!((ab - ba).abs() < 1e-10);
        prop_assert!(ac <= ab + bc + 1e-10);
        prop_assert!(dist_product(&a, &a, &w).unwrap() < 1e-12);
    }

    #[test]
    fn geodesics_have_constant_speed(a in ortho_triple(), b in ortho_triple(), t in 0.0f64..1.0) {
        let w = MetricWeights::default();
        let d = dist_product(&a, &b, &w).unwrap();
        let p = geodesic_triple(&a, &b, t).unwrap();
        prop_assert!((dist_product(&a, &p, &w).unwrap() - t * d).abs() < 1e-8);
        prop_assert!((dist_product(&p, &b, &w).unwrap() - (1.0 - t) * d).abs() < 1e-8);
    }

    #[test]
    fn geometric_mean_commutes_with_inversion(
        ls in prop::collection::vec(prop::collection::vec(0.01f64..100.0, 4), 1..6),
    ) {
        let ls: Vec<DVector<f64>> = ls.into_iter().map(DVector::from_vec).collect();
        let w = vec![1.0 / ls.len() as f64; ls.len()];
        let m = mean_logdiag(&ls, &w).unwrap();
        let inv: Vec<DVector<f64>> = ls.iter().map(|l| l.map(|x| 1.0 / x)).collect();
        let mi = mean_logdiag(&inv, &w).unwrap();
        for i in 0..4 {
            prop_assert!((mi[i] * m[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ordered_moduli_strictly_decrease(mu in -5.0f64..5.0, tau in prop::collection::vec(-8.0f64..8.0, 0..6)) {
        let l = ordered_moduli(mu, &tau);
        prop_assert_eq!(l.len(), tau.len() + 1);
        prop_assert!(l.iter().all(|x| *x > 0.0));
        prop_assert!(l.windows(2).all(|w| w[0] > w[1]));
    }
}

#[test]
fn euclidean_mean_is_not_inversion_invariant() {
    // {I, diag(9, 1, 1, 1, 1, 1)}: arithmetic mean diag(5, …) versus the
    // inverse of the mean of inverses, diag(9/5, …).
    let i6 = KelvinMatrix::identity(6).unwrap();
    let mut m = DMatrix::identity(6, 6);
    m[(0, 0)] = 9.0;
    let b = KelvinMatrix::new(m).unwrap();
    let mean = mean_euclid(&WeightedEnsemble::uniform(vec![i6.clone(), b.clone()]).unwrap()).unwrap().mean;
    let mean_inv = mean_euclid(&WeightedEnsemble::uniform(vec![i6.inverse(), b.inverse()]).unwrap()).unwrap().mean;
    let gap = dist_euclid(&mean, &mean_inv.inverse()).unwrap();
    assert!((gap - 3.2).abs() < 1e-12);
    assert!(gap > 1e-3);
}

/// Ortho3D parameters whose matrix is tetragonal: the normal-strain block of
/// the tetragonal eigenvectors as an SO(3) rotation, and the tetragonal moduli.
fn tetragonal_point() -> ParamVector {
    let v = build_eigvecs(SymmetryClass::Tetra3D, &[0.35]).unwrap();
    let mut r = v.view((0, 0), (3, 3)).into_owned();
    if r.determinant() < 0.0 {
        r.column_mut(2).neg_mut();
    }
    assert!((v.view((3, 3), (3, 3)).into_owned() - DMatrix::identity(3, 3)).norm() < 1e-14);
    let p = vee3(&log_rotation(&r).unwrap()).to_vec();
    let lam = build_moduli(SymmetryClass::Tetra3D, &[3.0, 2.0, 1.5, 1.0, 0.4]).unwrap();
    ParamVector::new(vec![0.3, -0.2, 0.5], p, lam.iter().map(|x| x.ln()).collect())
}

#[test]
fn ensemble_mean_recovers_tetragonal_symmetry() {
    let z0 = tetragonal_point();
    let (c0, _) = build_full(SymmetryClass::Ortho3D, &z0).unwrap();
    let t0 = build_full(SymmetryClass::Ortho3D, &z0).unwrap().1;
    assert!(check_reduced_form(&KelvinMatrix::new(t0.reduced_matrix()).unwrap(), SymmetryClass::Tetra3D, 1e-12)
        .unwrap()
        .passed);
    assert!(c0.det() > 0.0);

    let n = class_spec(SymmetryClass::Ortho3D).n();
    let mut cov = DMatrix::zeros(n, n);
    for i in 3..6 {
        cov[(i, i)] = 0.1f64.powi(2);
    }
    let cfg = GenConfig::new(SymmetryClass::Ortho3D, z0).with_cov(&cov).with_seed(99);
    let mut violations = Vec::new();
    for count in [64, 1024] {
        let batch = random_kelvin(&cfg, count).unwrap();
        // Individual members are orthotropic but not tetragonal.
        let member = KelvinMatrix::new(batch.samples[0].triple.reduced_matrix()).unwrap();
        assert!(!check_reduced_form(&member, SymmetryClass::Tetra3D, 1e-6).unwrap().passed);
        let r = ensemble_mean_symmetry_check(&batch, SymmetryClass::Tetra3D, SymmetryClass::Ortho3D, 1.0, CHECK_TOL)
            .unwrap();
        assert!(r.members_passed);
        assert!(r.mean_passed, "count {count}: violation {} > {}", r.mean_violation, r.tolerance);
        violations.push(r.mean_violation);
    }
    assert!(violations[1] < violations[0]);

    let still = GenConfig::new(SymmetryClass::Ortho3D, tetragonal_point());
    let batch = random_kelvin(&still, 5).unwrap();
    let r = ensemble_mean_symmetry_check(&batch, SymmetryClass::Tetra3D, SymmetryClass::Ortho3D, 1e-9, CHECK_TOL)
        .unwrap();
    assert!(r.mean_violation < 1e-13);
}

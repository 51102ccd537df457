//! Builds a tetragonal stiffness from `(q, p, μ)` and checks its class.

use kelvin_tensor::classes::CHECK_TOL;
use kelvin_tensor::{build_full, check_reduced_form, KelvinMatrix, ParamVector, SymmetryClass};

fn main() -> kelvin_tensor::Result<()> {
    let z = ParamVector::new(vec![0.2, -0.1, 0.4], vec![0.3], vec![3.0, 2.0, 1.5, 1.0, 0.4]);
    let (c, t) = build_full(SymmetryClass::Tetra3D, &z)?;
    println!("C (GPa):\n{:.4}", c.matrix());
    println!("Kelvin moduli: {:.4}", t.lambda.transpose());

    let reduced = KelvinMatrix::new(t.reduced_matrix())?;
    for class in [SymmetryClass::Ortho3D, SymmetryClass::Tetra3D, SymmetryClass::Cubic3D] {
        let r = check_reduced_form(&reduced, class, CHECK_TOL)?;
        println!("{:<12} passed={} violation={:.2e}", class.to_string(), r.passed, r.max_violation);
    }
    Ok(())
}

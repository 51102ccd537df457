//! Compares Euclidean, log-Euclidean and product geodesics between two
//! orthotropic stiffnesses.

use kelvin_tensor::metrics::{distance, InterpolationPath};
use kelvin_tensor::{build_full, MetricKind, MetricWeights, ParamVector, SymmetryClass};

fn main() -> kelvin_tensor::Result<()> {
    let mu = vec![3.0, 2.5, 2.2, 1.5, 1.2, 0.8];
    let (_, a) = build_full(SymmetryClass::Ortho3D, &ParamVector::new(vec![0.0; 3], vec![0.0; 3], mu.clone()))?;
    let (_, b) = build_full(SymmetryClass::Ortho3D, &ParamVector::new(vec![0.0, 1.0, 0.0], vec![0.2, 0.0, 0.1], mu))?;

    for kind in [MetricKind::Euclid, MetricKind::LogEuclid, MetricKind::Product] {
        let d = distance(&a, &b, kind, &MetricWeights::default())?;
        let path = InterpolationPath::uniform(&a, &b, kind, 5)?;
        let dets: Vec<String> = path.dets().iter().map(|x| format!("{x:.3}")).collect();
        println!("{:<10} d = {d:.4}  det along path: {}", kind.to_string(), dets.join(" "));
    }
    Ok(())
}

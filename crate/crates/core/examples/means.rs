//! Euclidean versus product means of a rotated ensemble.

use kelvin_tensor::means::KarcherOptions;
use kelvin_tensor::{build_full, mean_euclid, mean_product, MetricWeights, ParamVector, SymmetryClass, WeightedEnsemble};

fn main() -> kelvin_tensor::Result<()> {
    let mu = vec![3.0, 2.5, 2.2, 1.5, 1.2, 0.8];
    let mut kelvins = Vec::new();
    let mut triples = Vec::new();
    for k in 0..8 {
        let a = 0.15 * k as f64;
        let (c, t) = build_full(SymmetryClass::Ortho3D, &ParamVector::new(vec![a, 0.5 * a, -a], vec![0.0; 3], mu.clone()))?;
        kelvins.push(c);
        triples.push(t);
    }
    let det0 = kelvins[0].det();
    let e = mean_euclid(&WeightedEnsemble::uniform(kelvins)?)?;
    let p = mean_product(&WeightedEnsemble::uniform(triples)?, &MetricWeights::default(), &KarcherOptions::default())?;
    println!("member det   {det0:.4}");
    println!("euclid mean  det {:.4}", e.mean.det());
    println!("product mean det {:.4} after {} iterations (gradient {:.1e})", p.mean.det(), p.iterations, p.gradient_norm);
    Ok(())
}

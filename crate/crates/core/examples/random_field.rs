//! Matérn Karhunen-Loève expansion and a random orthotropic field on [0, 1].

use kelvin_tensor::field::{kl_matern, FieldConfig, FieldSampler};
use kelvin_tensor::{Grid1D, MaternCov, ParamVector, SymmetryClass};

fn main() -> kelvin_tensor::Result<()> {
    let kernel = MaternCov::new(1.5, 0.2, 1.0)?;
    let kl = kl_matern(&Grid1D::uniform(101)?, &kernel)?;
    let rank = kl.rank_for_energy(0.95);
    println!("leading eigenvalues: {:.4?}", &kl.eigenvalues.as_slice()[..5]);
    println!("rank for 95% energy: {rank}");

    let z0 = ParamVector::new(vec![0.0; 3], vec![0.0; 3], vec![3.0, 2.5, 2.2, 1.5, 1.2, 0.8]);
    let mut cfg = FieldConfig::new(SymmetryClass::Ortho3D, z0, kernel, vec![0.1; 12]);
    cfg.grid_n = 51;
    cfg.rank = Some(rank);
    let f = FieldSampler::new(cfg)?.sample(0)?;
    for (x, d) in f.points.iter().zip(f.dets()).step_by(10) {
        println!("x = {:.2}  det = {d:.4}", x.x);
    }
    Ok(())
}

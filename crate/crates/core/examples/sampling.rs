//! Draws reproducible random orthotropic stiffnesses and writes them as CSV.

use kelvin_tensor::{random_kelvin, GenConfig, ParamVector, SymmetryClass};

fn main() -> kelvin_tensor::Result<()> {
    let z0 = ParamVector::new(vec![0.0; 3], vec![0.0; 3], vec![3.0, 2.5, 2.2, 1.5, 1.2, 0.8]);
    let cfg = GenConfig::new(SymmetryClass::Ortho3D, z0).with_sigma(0.1).with_seed(42);
    let batch = random_kelvin(&cfg, 5)?;
    batch.write_csv(std::io::stdout().lock())?;

    let again = random_kelvin(&cfg, 5)?;
    assert_eq!(batch.samples[4].z, again.samples[4].z);
    eprintln!("config hash {}", batch.config_hash);
    Ok(())
}

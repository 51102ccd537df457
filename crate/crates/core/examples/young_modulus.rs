//! Directional Young's modulus of cortical bone.

use kelvin_tensor::kelvin::Direction;
use kelvin_tensor::{directional_young_modulus, orthotropic_kelvin, OrthotropicConstants};

fn main() -> kelvin_tensor::Result<()> {
    let c = orthotropic_kelvin(&OrthotropicConstants::cortical_bone())?;
    for deg in (0..=90).step_by(15) {
        let theta = (deg as f64).to_radians();
        let y = directional_young_modulus(&c, &Direction::from_angles(theta, 0.0))?;
        println!("θ = {deg:>2}°  Y = {y:.3} GPa");
    }
    Ok(())
}

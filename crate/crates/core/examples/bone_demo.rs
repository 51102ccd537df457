//! Interpolates cortical bone towards scaled, rotated and eigen-strain-varied
//! endpoints and reports determinant behaviour per metric.

use kelvin_tensor::cli::bone_demo;

fn main() -> kelvin_tensor::Result<()> {
    let demo = bone_demo(101)?;
    println!("Young's moduli along the axes: {:.2?} GPa", demo.young);
    for (s, _) in &demo.traces {
        println!(
            "{:<12} {:<8} det {:.3} -> {:.3}  max rel change {:.2e}  swelling {}",
            s.name, s.metric.to_string(), s.det_start, s.det_end, s.max_rel_det_change, s.swelling
        );
    }
    Ok(())
}

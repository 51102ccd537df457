//! Prints the symmetry-class lattice with parameter counts.

use kelvin_tensor::{class_spec, SymmetryClass};

fn main() {
    println!("{:<14} {:>3} {:>3} {:>3} {:>3}  parents", "class", "m_q", "m_v", "m_l", "n");
    for c in SymmetryClass::ALL {
        let s = class_spec(c);
        let parents: Vec<String> = c.hasse_parents().iter().map(|p| p.to_string()).collect();
        println!("{:<14} {:>3} {:>3} {:>3} {:>3}  {}", c.to_string(), s.m_q, s.m_v, s.m_lambda, s.n(), parents.join(" "));
    }
}

//! Effective coefficients of a periodic 1D coefficient: the cell-problem value
//! against the closed forms, for p = 2 and p = 3.

use std::f64::consts::PI;

use anisofrac::homogenize::{cell_problem_1d, EffectiveCoefficients, PeriodicCoefficient};

fn main() -> anisofrac::error::Result<()> {
    for p in [2.0, 3.0] {
        let c = PeriodicCoefficient::new(p, |y| 2.0 + (2.0 * PI * y).sin())?;
        println!("p = {p}: {}", EffectiveCoefficients::new(&c)?.summary());
        for xi in [0.5, 2.0] {
            println!("  cell value at xi = {xi}: {:.8}", cell_problem_1d(&c, xi)?);
        }
    }
    Ok(())
}

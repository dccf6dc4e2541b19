//! One energy evaluation split into near-diagonal, bulk and tail parts, plus
//! the two-sided comparison with the Gagliardo seminorm and the interpolation
//! inequality between two orders.

use anisofrac::energy::{anisotropic_energy, bbm_upper_bound_check, gagliardo, interpolation_check};
use anisofrac::expr::bump;
use anisofrac::gridfn::{FractionalParams, Grid, GridFunction};
use anisofrac::kernel::builtin;
use anisofrac::kernel::KernelParams;

fn main() -> anisofrac::error::Result<()> {
    let k = builtin("periodic-1d", &KernelParams::new())?;
    let u = GridFunction::from_fn(Grid::new_1d(-1.0, 1.0, 129)?, true, |x| bump(-0.8, 0.6, x[0]));
    let fp = FractionalParams::new(0.4, 2.5)?;
    let r = anisotropic_energy(&k, &u, fp)?;
    println!("J        {:.8e} +- {:.1e}", r.value, r.error_bound);
    println!("near     {:.8e}\nbulk     {:.8e}\ntail     {:.8e}", r.near_diagonal, r.bulk, r.tail);
    println!("gagliardo {:.8e}", gagliardo(&u, fp)?.value);
    for c in bbm_upper_bound_check(&k, &u, fp)? {
        println!("bound: {:.6e} <= {:.6e} ({})", c.lhs, c.rhs, c.passed);
    }
    let c = interpolation_check(&k, &u, 0.3, 0.7, 2.0)?;
    println!("interpolation: {:.6e} <= {:.6e} ({})", c.lhs, c.rhs, c.passed);
    Ok(())
}

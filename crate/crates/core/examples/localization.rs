//! Distance between nonlocal and local minimizers as s -> 1.

use anisofrac::gridfn::{Grid, GridFunction};
use anisofrac::kernel::{builtin, KernelParams};
use anisofrac::variational::localization_sweep;

fn main() -> anisofrac::error::Result<()> {
    let k = builtin("periodic-1d", &KernelParams::new())?;
    let f = GridFunction::from_fn(Grid::new_1d(-1.0, 1.0, 129)?, false, |x| 1.0 + x[0]);
    let t = localization_sweep(&k, 2.0, &f, &[0.75, 0.875, 0.9375, 0.96875, 0.984375])?;
    print!("{}", t.to_csv());
    println!("{}", t.summary("localize"));
    Ok(())
}

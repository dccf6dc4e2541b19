//! Homogenize-then-localize against localize-then-homogenize for the kernel
//! m(x, h) = 2 + sin(2πx), p = 2, f = 1 on (-1, 1).

use anisofrac::gridfn::{Grid, GridFunction};
use anisofrac::homogenize::commute_experiment;
use anisofrac::kernel::{builtin, KernelParams};
use anisofrac::limits::default_bbm_s_list;
use anisofrac::variational::SolverSettings;

fn main() -> anisofrac::error::Result<()> {
    let k = builtin("periodic-1d", &KernelParams::new())?;
    let f = GridFunction::from_fn(Grid::new_1d(-1.0, 1.0, 129)?, false, |_| 1.0);
    let start = std::time::Instant::now();
    let r = commute_experiment(&k, 2.0, &f, &[0.25, 0.125, 0.0625], &default_bbm_s_list(), SolverSettings::default())?;
    print!("{}", r.to_csv());
    println!("{}", r.summary());
    println!("paths within 10%: {}, elapsed {:.1?}", r.paths_converge(), start.elapsed());
    Ok(())
}

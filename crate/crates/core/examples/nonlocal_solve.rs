//! Minimizers of the nonlocal problem for p = 2 and p = 3 with f = 1, next to
//! the minimizer of the local problem built from the same kernel.

use anisofrac::gridfn::{FractionalParams, Grid, GridFunction};
use anisofrac::kernel::{builtin, KernelParams};
use anisofrac::variational::{solve_local, solve_nonlocal, Coefficient, LocalProblem, NonlocalProblem};

fn main() -> anisofrac::error::Result<()> {
    let k = builtin("periodic-1d", &KernelParams::new())?;
    let f = GridFunction::from_fn(Grid::new_1d(-1.0, 1.0, 65)?, false, |_| 1.0);
    for p in [2.0, 3.0] {
        let r = solve_nonlocal(&NonlocalProblem::new(&k, FractionalParams::new(0.9, p)?, &f))?.ensure_converged()?;
        let l = solve_local(&LocalProblem::new(Coefficient::density(&k, p)?, p, &f))?.ensure_converged()?;
        println!(
            "p = {p}: nonlocal max {:.6} ({} its, residual {:.1e}), local max {:.6}",
            r.minimizer.max_abs(),
            r.iterations,
            r.residual,
            l.minimizer.max_abs()
        );
    }
    Ok(())
}

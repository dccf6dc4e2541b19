//! s times the double integral as s -> 0 for a kernel with a direction-dependent
//! tail. The support of u is kept away from the box edge.

use anisofrac::expr::bump;
use anisofrac::gridfn::{Grid, GridFunction};
use anisofrac::kernel::{tabulated, Kernel};
use anisofrac::limits::{default_ms_s_list, ms_limit_integral, ms_sweep, ms_weight_extrapolated};

fn main() -> anisofrac::error::Result<()> {
    // 1.5 for h < 0, 2.5 for h > 0, blended near the diagonal.
    let mut rows = Vec::new();
    for i in 0..=12 {
        let x = i as f64 * 0.25;
        for h in [-40.0f64, -1.0, 0.0, 1.0, 40.0] {
            rows.push((x, h, 2.0 + 0.5 * (h / (1.0 + h * h).sqrt())));
        }
    }
    let k: Kernel = tabulated(&rows)?;
    let u = GridFunction::from_fn(Grid::new_1d(0.0, 3.0, 257)?, true, |x| bump(1.0, 2.0, x[0]));
    println!("weight at x = 1.5: {:.6}", ms_weight_extrapolated(&k, &[1.5], 2.0)?);
    println!("limit integral: {:.6}", ms_limit_integral(&k, &u, 2.0)?);
    let t = ms_sweep(&k, &u, 2.0, &default_ms_s_list())?;
    print!("{}", t.to_csv());
    println!("{}", t.summary("ms"));
    Ok(())
}

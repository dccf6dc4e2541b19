//! (1-s) times the double integral as s -> 1, for a 2D anisotropic kernel and
//! u(x, y) = bump(x) bump(y), compared against the limit energy.

use anisofrac::expr::bump;
use anisofrac::gridfn::{Grid, GridFunction};
use anisofrac::kernel::{builtin, KernelParams, ParamValue};
use anisofrac::limits::{bbm_sweep, LimitDensity};

fn main() -> anisofrac::error::Result<()> {
    let mut params = KernelParams::new();
    params.insert("m11".into(), ParamValue::Number(2.0));
    params.insert("m12".into(), ParamValue::Number(0.5));
    params.insert("alpha".into(), ParamValue::Number(0.5));
    let k = builtin("matrix-alpha", &params)?;
    let u = GridFunction::from_fn(Grid::new_2d([-2.0, 2.0], [-2.0, 2.0], 33)?, true, |x| {
        bump(-1.0, 1.0, x[0]) * bump(-1.0, 1.0, x[1])
    });
    let ld = LimitDensity::new(&k, 2.0)?;
    println!("limit matrix at the origin: {}", ld.limit_matrix(&[0.0, 0.0])?);
    let t = bbm_sweep(&k, &u, 2.0, &[0.9, 0.95, 0.975])?;
    print!("{}", t.to_csv());
    println!("{}", t.summary("bbm"));
    Ok(())
}

//! Randomized audit of every built-in kernel, then of a kernel that fails the
//! symmetry condition before and after symmetrizing it.

use std::f64::consts::PI;

use anisofrac::kernel::{builtin, symmetrize, verify_hypotheses, Kernel, KernelParams, BUILTIN_KERNELS};

fn main() -> anisofrac::error::Result<()> {
    for name in BUILTIN_KERNELS.iter().filter(|n| **n != "tabulated") {
        let k = builtin(name, &KernelParams::new())?;
        let r = verify_hypotheses(&k, 500, 7)?;
        println!("{name:18} passes {}  h2 {:.1e}  slope {:?}", r.passes(&k), r.h2_violation, r.h3_min_slope);
    }
    let lopsided = Kernel::new(
        "lopsided",
        1,
        (1.5, 2.5),
        |x, h| 2.0 + 0.5 * (2.0 * PI * x[0] + h[0]).sin(),
        |x, _| 2.0 + 0.5 * (2.0 * PI * x[0]).sin(),
    )?;
    for k in [lopsided.clone(), symmetrize(&lopsided)] {
        let r = verify_hypotheses(&k, 500, 7)?;
        println!("{:18} passes {}  h2 {:.1e} witness {:?}", k.name(), r.passes(&k), r.h2_violation, r.h2_witness);
    }
    Ok(())
}

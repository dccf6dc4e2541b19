//! Running a validated config: one CSV artifact and one summary line.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::energy::anisotropic_energy;
use crate::error::{Error, Result};
use crate::gridfn::FractionalParams;
use crate::homogenize::{coefficient_from_kernel, commute_experiment, EffectiveCoefficients};
use crate::kernel::verify_hypotheses;
use crate::limits::{bbm_sweep, ms_sweep};
use crate::variational::{
    localization_sweep_with, solve_local, solve_nonlocal, Coefficient, LocalProblem, NonlocalProblem, SolveResult,
};

use super::config::{ExperimentConfig, Task};

/// What a run produced. `converged = false` maps to exit status 3.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub csv: String,
    pub summary: String,
    pub converged: bool,
}

fn solved(task: Task, r: SolveResult) -> Artifact {
    let summary = format!(
        "{task}: objective {:.6e} residual {:.3e} iterations {} converged {} max|u| {:.6e}",
        r.objective,
        r.residual,
        r.iterations,
        r.converged,
        r.minimizer.max_abs()
    );
    Artifact { csv: r.minimizer.to_csv(), summary, converged: r.converged }
}

fn table(label: &str, t: crate::table::ConvergenceTable) -> Artifact {
    Artifact { summary: t.summary(label), csv: t.to_csv(), converged: true }
}

/// Runs the experiment and returns its artifact without touching the disk.
pub fn execute(cfg: &ExperimentConfig) -> Result<Artifact> {
    let k = &cfg.kernel;
    let task = cfg.task;
    Ok(match task {
        Task::Energy => {
            let r = anisotropic_energy(k, &cfg.u_function(), FractionalParams::new(cfg.s, cfg.p)?)?;
            let csv = if cfg.breakdown {
                format!(
                    "value,near_diagonal,bulk,tail,error_bound\n{},{},{},{},{}\n",
                    r.value, r.near_diagonal, r.bulk, r.tail, r.error_bound
                )
            } else {
                format!("value,error_bound\n{},{}\n", r.value, r.error_bound)
            };
            let summary = format!("energy: J = {:.6e} +- {:.2e} (s = {}, p = {})", r.value, r.error_bound, cfg.s, cfg.p);
            Artifact { csv, summary, converged: true }
        }
        Task::BbmSweep => table("bbm-sweep", bbm_sweep(k, &cfg.u_function(), cfg.p, &cfg.s_list)?),
        Task::MsSweep => table("ms-sweep", ms_sweep(k, &cfg.u_function(), cfg.p, &cfg.s_list)?),
        Task::SolveNonlocal => {
            let prob = NonlocalProblem::new(k, FractionalParams::new(cfg.s, cfg.p)?, &cfg.source())
                .with_settings(cfg.solver_settings());
            solved(task, solve_nonlocal(&prob)?)
        }
        Task::SolveLocal => {
            let prob = LocalProblem::new(Coefficient::density(k, cfg.p)?, cfg.p, &cfg.source())
                .with_settings(cfg.solver_settings());
            solved(task, solve_local(&prob)?)
        }
        Task::Localize => {
            let t = localization_sweep_with(k, cfg.p, &cfg.source(), &cfg.s_list, cfg.solver_settings())?;
            table("localize", t)
        }
        Task::Homogenize => {
            let e = EffectiveCoefficients::new(&coefficient_from_kernel(k, cfg.p)?)?;
            Artifact { csv: e.to_csv(), summary: e.summary(), converged: true }
        }
        Task::Commute => {
            let r = commute_experiment(k, cfg.p, &cfg.source(), &cfg.eps_list, &cfg.s_list, cfg.solver_settings())?;
            Artifact { csv: r.to_csv(), summary: r.summary(), converged: true }
        }
        Task::VerifyKernel => {
            let r = verify_hypotheses(k, cfg.samples, cfg.seed)?;
            let mut csv = String::from("check,value,passed\n");
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(csv, "h1_violation,{},{}", r.h1_violation, r.h1_passes(k));
            let _ = writeln!(csv, "h2_violation,{},{}", r.h2_violation, r.h2_passes(k));
            let _ = writeln!(csv, "h3_min_slope,{},{}", opt(r.h3_min_slope), r.h3_passes());
            let _ = writeln!(csv, "h3_residual,{},{}", r.h3_residual, r.h3_passes());
            let _ = writeln!(csv, "limit_bound_violation,{},{}", r.limit_bound_violation, r.h1_passes(k));
            let _ = writeln!(csv, "all,{},{}", r.samples, r.passes(k));
            let summary = format!(
                "verify-kernel: {} on {} samples: {}",
                k.name(),
                r.samples,
                if r.passes(k) { "passes" } else { "FAILS" }
            );
            Artifact { csv, summary, converged: true }
        }
    })
}

/// Writes `text` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

//! One module per task. Each writes its tables and a `plot_manifest.json`
//! into the output directory.

mod analytic;
mod simulated;

use crate::config::{RunConfig, Task};
use crate::error::CliError;
use crate::output::Artifacts;

pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    pub allow_instability: bool,
    pub artifacts: Artifacts,
}

pub fn run(task: Task, ctx: &mut Context) -> Result<(), CliError> {
    match task {
        Task::Derive => analytic::derive(ctx),
        Task::Spectrum => analytic::spectrum(ctx),
        Task::Sweep => analytic::sweep(ctx),
        Task::Optimize => analytic::optimize(ctx),
        Task::Simulate => simulated::simulate(ctx),
        Task::Compare => simulated::compare(ctx),
        Task::Asymmetry => simulated::asymmetry(ctx),
    }
}

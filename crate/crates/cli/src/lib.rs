//! Experiment harness behind the `rnd` binary: configuration, the
//! convergence and cost sweeps, and the single-fit commands.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_bench, cmd_convergence, cmd_effdim, cmd_effdim_file, cmd_estimate, cmd_estimate_files, cmd_evaluate,
    cmd_generate, BenchReport, ConvergenceReport, CostRecord, EstimateOutcome,
};
pub use config::{Overrides, RunConfig};

/// Caps the global rayon pool from `RND_THREADS`, if set. Call once, early.
pub fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("RND_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| anyhow::anyhow!("RND_THREADS must be a positive integer, got `{v}`"))?;
        anyhow::ensure!(n > 0, "RND_THREADS must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use rnd_core::{io, Label};
use rnd_harness::commands::values_csv;
use rnd_harness::{Overrides, RunConfig};

/// Density-ratio estimation with kernel regularization and Nystrom subsampling.
#[derive(Parser)]
#[command(name = "rnd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a ratio model on two sample CSVs and write <out>/model.json.
    Estimate {
        p_csv: PathBuf,
        q_csv: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a saved model at the points of a CSV.
    Evaluate {
        model: PathBuf,
        points_csv: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Error-versus-sample-size sweep on the configured synthetic pair.
    Convergence {
        #[command(flatten)]
        common: Common,
    },
    /// Deterministic cost sweep, Nystrom and full.
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Effective dimension and uniform capacity of a p-sample over an alpha grid.
    Effdim {
        p_csv: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Draw a sample from the configured synthetic pair as CSV.
    Generate {
        /// `p` or `q`.
        #[arg(long, default_value = "p")]
        which: String,
        #[arg(long)]
        n: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Default)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gaussian | laplacian | polynomial
    #[arg(long)]
    kernel: Option<String>,
    /// Number, or `median` for the median pairwise distance of the p-sample.
    #[arg(long)]
    bandwidth: Option<String>,
    /// Shorthand for `--bandwidth median`.
    #[arg(long, conflicts_with = "bandwidth")]
    median_bandwidth: bool,
    /// Number or `auto`.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    c_sub: Option<f64>,
    /// in_rkhs | out_of_rkhs
    #[arg(long)]
    regime: Option<String>,
    /// `auto`, an integer, or a fraction of min(N, M).
    #[arg(long)]
    subsample: Option<String>,
    /// nystrom | full
    #[arg(long)]
    mode: Option<String>,
    /// Shorthand for `--mode full`.
    #[arg(long, conflicts_with = "mode")]
    full: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mc_points: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let overrides = Overrides {
            kernel: self.kernel.clone(),
            bandwidth: if self.median_bandwidth { Some("median".into()) } else { self.bandwidth.clone() },
            alpha: self.alpha.clone(),
            s: self.s,
            r: self.r,
            delta: self.delta,
            c_sub: self.c_sub,
            regime: self.regime.clone(),
            subsample: self.subsample.clone(),
            mode: if self.full { Some("full".into()) } else { self.mode.clone() },
            seed: self.seed,
            out: self.out.clone(),
            mc_points: self.mc_points,
        };
        cfg.apply(&overrides)?;
        Ok(cfg)
    }
}

fn write_or_print(output: Option<&PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Exit code: 0 on full success, 2 when some rows failed.
fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Estimate { p_csv, q_csv, common } => {
            let outcome = rnd_harness::cmd_estimate_files(&common.config()?, &p_csv, &q_csv)?;
            println!("{}", outcome.summary());
            Ok(0)
        }
        Command::Evaluate { model, points_csv, output } => {
            let values = rnd_harness::cmd_evaluate(&model, &points_csv)?;
            write_or_print(output.as_ref(), &values_csv(&values))?;
            Ok(0)
        }
        Command::Convergence { common } => {
            let report = rnd_harness::cmd_convergence(&common.config()?)?;
            for s in &report.summaries {
                println!("N={} M={} median_l2p_error={:e} ok={}", s.n, s.m_q, s.median_error, s.successes);
            }
            println!("slope_vs_inv_u={} csv={}", report.slope, report.csv_path.display());
            Ok(if report.failed_rows() > 0 { 2 } else { 0 })
        }
        Command::Bench { common } => {
            let report = rnd_harness::cmd_bench(&common.config()?)?;
            println!(
                "exponent_nystrom={} exponent_full={} csv={}",
                report.exponent_nystrom,
                report.exponent_full,
                report.csv_path.display()
            );
            Ok(if report.failed_rows() > 0 { 2 } else { 0 })
        }
        Command::Effdim { p_csv, common } => {
            let (profile, path) = rnd_harness::cmd_effdim_file(&common.config()?, &p_csv)?;
            println!("alpha_star={:e} points={} csv={}", profile.alpha_star, profile.n_points, path.display());
            Ok(0)
        }
        Command::Generate { which, n, output, common } => {
            let label = match which.as_str() {
                "p" => Label::P,
                "q" => Label::Q,
                other => anyhow::bail!("--which must be `p` or `q`, got `{other}`"),
            };
            let sample = rnd_harness::cmd_generate(&common.config()?, label, n)?;
            let mut buf = Vec::new();
            io::write_sample(&mut buf, &sample)?;
            write_or_print(output.as_ref(), &String::from_utf8(buf)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = rnd_harness::init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

//! The harness commands. Each returns a structured result and, where it
//! writes files, the path it wrote; the binary only formats and exits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;

use rnd_core::capacity::{capacity_sup, CapacityProfile};
use rnd_core::estimator::CostLedger;
use rnd_core::selection::{choose_alpha, choose_subsample_size, sample_scale};
use rnd_core::{io, persist, stats, synth};
use rnd_core::{fit_full, fit_nystrom, subsample_plan, FitMode, KernelSpec, Label, RatioModel, Sample};

use crate::config::{AlphaChoice, RunConfig};

/// Alpha grid size for `effdim`.
pub const EFFDIM_GRID: usize = 20;

/// splitmix64 finalizer; spreads `(base, n, m, tag)` into unrelated seeds.
pub fn derive_seed(base: u64, n: usize, m: usize, tag: u64) -> u64 {
    let mut z = base
        ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (m as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ tag.wrapping_mul(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_P: u64 = 1;
const TAG_Q: u64 = 2;
const TAG_PLAN: u64 = 3;
const TAG_MC: u64 = 4;

/// One fit, with the parameters that were actually used.
#[derive(Clone, Debug)]
pub struct Fit {
    pub model: RatioModel,
    pub alpha: f64,
    /// Subsample size; `N` for full fits.
    pub m: usize,
    /// Uniform capacity at `alpha`, when the subsample rule needed it.
    pub n_inf: Option<f64>,
    pub ledger: CostLedger,
}

/// Picks alpha and m per the config and fits.
pub fn fit_with_config(cfg: &RunConfig, kernel: &KernelSpec, xp: &Sample, xq: &Sample, plan_seed: u64) -> Result<Fit> {
    let (n, m_q) = (xp.len(), xq.len());
    let alpha = match cfg.alpha {
        AlphaChoice::Auto => choose_alpha(&cfg.policy, n, m_q),
        AlphaChoice::Fixed(a) => a,
    };
    let (model, m, n_inf) = match cfg.mode {
        FitMode::Full => (fit_full(kernel, xp, xq, alpha)?, n, None),
        FitMode::Nystrom => {
            let (m, n_inf) = match cfg.subsample.resolve_fixed(n, m_q) {
                Some(m) => (m, None),
                None => {
                    let n_inf = capacity_sup(kernel, xp, alpha)?;
                    (choose_subsample_size(&cfg.policy, n_inf, alpha, n, m_q), Some(n_inf))
                }
            };
            let plan = subsample_plan(n, m_q, m, plan_seed)?;
            (fit_nystrom(kernel, xp, xq, alpha, &plan)?, m, n_inf)
        }
    };
    let ledger = model.ledger();
    Ok(Fit { model, alpha, m, n_inf, ledger })
}

#[derive(Clone, Debug)]
pub struct EstimateOutcome {
    pub fit: Fit,
    pub model_path: PathBuf,
    /// `max |beta_model|` over the pooled input points.
    pub probe_max_abs: f64,
}

impl EstimateOutcome {
    pub fn summary(&self) -> String {
        let f = &self.fit;
        format!(
            "mode={} alpha={:e} m={} n_inf={} kernel_evals={} solver_flops={} probe_max_abs={:e} model={}",
            f.model.mode(),
            f.alpha,
            f.m,
            f.n_inf.map_or("-".to_string(), |v| format!("{v:e}")),
            f.ledger.kernel_evals,
            f.ledger.solver_flops,
            self.probe_max_abs,
            self.model_path.display()
        )
    }
}

/// Fits on the two samples and writes `<out>/model.json`.
pub fn cmd_estimate(cfg: &RunConfig, xp: &Sample, xq: &Sample) -> Result<EstimateOutcome> {
    let kernel = cfg.kernel.resolve(xp)?;
    let fit = fit_with_config(cfg, &kernel, xp, xq, cfg.seed)?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let model_path = cfg.out.join("model.json");
    persist::save(&fit.model, &model_path)?;
    let probe_max_abs = rnd_core::evaluate(&fit.model, xp)?
        .into_iter()
        .chain(rnd_core::evaluate(&fit.model, xq)?)
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    Ok(EstimateOutcome { fit, model_path, probe_max_abs })
}

pub fn cmd_estimate_files(cfg: &RunConfig, p_csv: &Path, q_csv: &Path) -> Result<EstimateOutcome> {
    let xp = io::read_sample_file(p_csv, Some(Label::P)).with_context(|| format!("reading {}", p_csv.display()))?;
    let xq = io::read_sample_file(q_csv, Some(Label::Q)).with_context(|| format!("reading {}", q_csv.display()))?;
    cmd_estimate(cfg, &xp, &xq)
}

/// Evaluates a saved model; one value per point, in order.
pub fn cmd_evaluate(model_path: &Path, points_csv: &Path) -> Result<Vec<f64>> {
    let model = persist::load(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let t = io::read_sample_file(points_csv, None).with_context(|| format!("reading {}", points_csv.display()))?;
    Ok(rnd_core::evaluate(&model, &t)?)
}

pub fn values_csv(values: &[f64]) -> String {
    let mut out = String::from("beta\n");
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}

/// Draws from the configured pair.
pub fn cmd_generate(cfg: &RunConfig, which: Label, n: usize) -> Result<Sample> {
    Ok(cfg.pair.draw(which, n, cfg.seed)?)
}

fn csv_field(msg: &str) -> String {
    msg.replace([',', '\n', '\r'], ";")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:e}"))
}

#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub n: usize,
    pub m_q: usize,
    pub seed: u64,
    pub alpha: Option<f64>,
    pub m: Option<usize>,
    pub l2p_error: Option<f64>,
    pub ledger: Option<CostLedger>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SizeSummary {
    pub n: usize,
    pub m_q: usize,
    /// Sample scale `1/sqrt(N) + 1/sqrt(M)`.
    pub u: f64,
    pub median_error: f64,
    pub successes: usize,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub summaries: Vec<SizeSummary>,
    /// Least-squares slope of `ln(median error)` on `ln(1/u)`; negative when
    /// the error shrinks as the samples grow.
    pub slope: f64,
    pub csv_path: PathBuf,
}

impl ConvergenceReport {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,N,M,seed,alpha,m,l2p_error,fit_flops,kernel_evals,slope_vs_inv_u,error\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "row,{},{},{},{},{},{},{},{},,{}",
                r.n,
                r.m_q,
                r.seed,
                fmt_opt(r.alpha),
                r.m.map_or(String::new(), |m| m.to_string()),
                fmt_opt(r.l2p_error),
                r.ledger.map_or(String::new(), |l| l.solver_flops.to_string()),
                r.ledger.map_or(String::new(), |l| l.kernel_evals.to_string()),
                r.error.as_deref().map(csv_field).unwrap_or_default()
            );
        }
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "summary,{},{},,,,{:e},,,{:e},",
                s.n, s.m_q, s.median_error, self.slope
            );
        }
        out
    }
}

fn convergence_row(cfg: &RunConfig, n: usize, m_q: usize, seed: u64) -> Result<(Fit, f64)> {
    let xp = cfg.pair.draw(Label::P, n, derive_seed(seed, n, m_q, TAG_P))?;
    let xq = cfg.pair.draw(Label::Q, m_q, derive_seed(seed, n, m_q, TAG_Q))?;
    let kernel = cfg.kernel.resolve(&xp)?;
    let fit = fit_with_config(cfg, &kernel, &xp, &xq, derive_seed(seed, n, m_q, TAG_PLAN))?;
    let report = synth::l2p_error(&cfg.pair, &fit.model, cfg.mc_points, derive_seed(seed, n, m_q, TAG_MC))?;
    Ok((fit, report.l2p_error))
}

/// Runs every (size, seed) cell, then summarizes per size. Failed cells are
/// kept with their error message; the CSV is written regardless.
pub fn cmd_convergence(cfg: &RunConfig) -> Result<ConvergenceReport> {
    let cells: Vec<(usize, usize, u64)> = cfg
        .sizes
        .iter()
        .flat_map(|&(n, m)| cfg.seeds.iter().map(move |&s| (n, m, s)))
        .collect();
    let rows: Vec<ConvergenceRow> = cells
        .par_iter()
        .map(|&(n, m_q, seed)| match convergence_row(cfg, n, m_q, seed) {
            Ok((fit, err)) => ConvergenceRow {
                n,
                m_q,
                seed,
                alpha: Some(fit.alpha),
                m: Some(fit.m),
                l2p_error: Some(err),
                ledger: Some(fit.ledger),
                error: None,
            },
            Err(e) => {
                log::warn!("convergence cell N={n} M={m_q} seed={seed} failed: {e:#}");
                ConvergenceRow { n, m_q, seed, alpha: None, m: None, l2p_error: None, ledger: None, error: Some(format!("{e:#}")) }
            }
        })
        .collect();

    let summaries: Vec<SizeSummary> = cfg
        .sizes
        .iter()
        .map(|&(n, m_q)| {
            let errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n && r.m_q == m_q)
                .filter_map(|r| r.l2p_error)
                .collect();
            SizeSummary {
                n,
                m_q,
                u: sample_scale(n, m_q),
                median_error: if errs.is_empty() { f64::NAN } else { stats::median(&errs) },
                successes: errs.len(),
            }
        })
        .collect();
    let inv_us: Vec<f64> = summaries.iter().map(|s| 1.0 / s.u).collect();
    let meds: Vec<f64> = summaries.iter().map(|s| s.median_error).collect();
    let slope = if summaries.len() >= 2 && meds.iter().all(|m| m.is_finite() && *m > 0.0) {
        stats::log_log_slope(&inv_us, &meds)
    } else {
        f64::NAN
    };

    let report = ConvergenceReport { rows, summaries, slope, csv_path: cfg.out.join("convergence.csv") };
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    fs::write(&report.csv_path, report.to_csv())?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostRecord {
    pub n: usize,
    pub m_sub: usize,
    pub mode: FitMode,
    pub kernel_evals: u64,
    pub solver_flops: u64,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

impl CostRecord {
    pub fn total(&self) -> u64 {
        self.kernel_evals + self.solver_flops
    }
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub records: Vec<CostRecord>,
    /// Log-log slope of total deterministic cost against N.
    pub exponent_nystrom: f64,
    pub exponent_full: f64,
    pub csv_path: PathBuf,
}

impl BenchReport {
    pub fn failed_rows(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,m_sub,mode,kernel_evals,solver_flops,total_cost,wall_seconds,error\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.6},{}",
                r.n,
                r.m_sub,
                r.mode,
                r.kernel_evals,
                r.solver_flops,
                r.total(),
                r.wall_seconds,
                r.error.as_deref().map(csv_field).unwrap_or_default()
            );
        }
        let _ = writeln!(out, "# exponent_nystrom={}", self.exponent_nystrom);
        let _ = writeln!(out, "# exponent_full={}", self.exponent_full);
        out
    }
}

/// Subsample size used by the bench sweep: `ceil(sqrt(N) ln N)`.
pub fn bench_subsample(n: usize) -> usize {
    let nf = n as f64;
    ((nf.sqrt() * nf.ln()).ceil() as usize).clamp(1, n)
}

fn bench_row(cfg: &RunConfig, n: usize, mode: FitMode) -> Result<CostRecord> {
    let cap = match mode {
        FitMode::Full => cfg.bench.max_full_n,
        FitMode::Nystrom => cfg.bench.max_n,
    };
    anyhow::ensure!(n <= cap, rnd_core::Error::TooLarge { n, cap });
    let xp = cfg.pair.draw(Label::P, n, derive_seed(cfg.seed, n, n, TAG_P))?;
    let xq = cfg.pair.draw(Label::Q, n, derive_seed(cfg.seed, n, n, TAG_Q))?;
    let kernel = cfg.kernel.resolve(&xp)?;
    let alpha = match cfg.alpha {
        AlphaChoice::Auto => choose_alpha(&cfg.policy, n, n),
        AlphaChoice::Fixed(a) => a,
    };
    let start = Instant::now();
    let (model, m_sub) = match mode {
        FitMode::Full => (fit_full(&kernel, &xp, &xq, alpha)?, n),
        FitMode::Nystrom => {
            let m = bench_subsample(n);
            let plan = subsample_plan(n, n, m, derive_seed(cfg.seed, n, n, TAG_PLAN))?;
            (fit_nystrom(&kernel, &xp, &xq, alpha, &plan)?, m)
        }
    };
    let wall_seconds = start.elapsed().as_secs_f64();
    let l = model.ledger();
    Ok(CostRecord { n, m_sub, mode, kernel_evals: l.kernel_evals, solver_flops: l.solver_flops, wall_seconds, error: None })
}

fn cost_exponent(records: &[CostRecord], mode: FitMode) -> f64 {
    let ok: Vec<&CostRecord> = records.iter().filter(|r| r.mode == mode && r.error.is_none()).collect();
    if ok.len() < 2 {
        return f64::NAN;
    }
    let ns: Vec<f64> = ok.iter().map(|r| r.n as f64).collect();
    let cs: Vec<f64> = ok.iter().map(|r| r.total() as f64).collect();
    stats::log_log_slope(&ns, &cs)
}

/// Cost sweep over the configured Nystrom and full sizes. Rows run one at a
/// time so wall-clock numbers are not skewed by each other.
pub fn cmd_bench(cfg: &RunConfig) -> Result<BenchReport> {
    let plan: Vec<(usize, FitMode)> = cfg
        .bench
        .nystrom_sizes
        .iter()
        .map(|&n| (n, FitMode::Nystrom))
        .chain(cfg.bench.full_sizes.iter().map(|&n| (n, FitMode::Full)))
        .collect();
    let records: Vec<CostRecord> = plan
        .into_iter()
        .map(|(n, mode)| {
            bench_row(cfg, n, mode).unwrap_or_else(|e| {
                log::warn!("bench row N={n} mode={mode} failed: {e:#}");
                CostRecord { n, m_sub: 0, mode, kernel_evals: 0, solver_flops: 0, wall_seconds: 0.0, error: Some(format!("{e:#}")) }
            })
        })
        .collect();
    let report = BenchReport {
        exponent_nystrom: cost_exponent(&records, FitMode::Nystrom),
        exponent_full: cost_exponent(&records, FitMode::Full),
        records,
        csv_path: cfg.out.join("bench.csv"),
    };
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    fs::write(&report.csv_path, report.to_csv())?;
    Ok(report)
}

/// Capacity profile of the p-sample on the default alpha grid; writes
/// `<out>/effdim.csv`.
pub fn cmd_effdim(cfg: &RunConfig, xp: &Sample) -> Result<(CapacityProfile, PathBuf)> {
    let kernel = cfg.kernel.resolve(xp)?;
    let profile = CapacityProfile::default_grid(&kernel, xp, EFFDIM_GRID)?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let path = cfg.out.join("effdim.csv");
    fs::write(&path, profile.to_csv())?;
    Ok((profile, path))
}

pub fn cmd_effdim_file(cfg: &RunConfig, p_csv: &Path) -> Result<(CapacityProfile, PathBuf)> {
    let xp = io::read_sample_file(p_csv, Some(Label::P)).with_context(|| format!("reading {}", p_csv.display()))?;
    cmd_effdim(cfg, &xp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(1, 250, 250, TAG_P);
        assert_ne!(a, derive_seed(1, 250, 250, TAG_Q));
        assert_ne!(a, derive_seed(2, 250, 250, TAG_P));
        assert_ne!(a, derive_seed(1, 500, 250, TAG_P));
        assert_eq!(a, derive_seed(1, 250, 250, TAG_P));
    }

    #[test]
    fn bench_subsample_size() {
        assert_eq!(bench_subsample(2000), (2000f64.sqrt() * 2000f64.ln()).ceil() as usize);
        assert_eq!(bench_subsample(3), 2);
        assert_eq!(bench_subsample(1), 1);
    }

    #[test]
    fn csv_fields_are_sanitized() {
        assert_eq!(csv_field("a,b\nc"), "a;b;c");
    }
}

//! Acceptance suite. Runs as a plain binary (no libtest harness) so every
//! criterion prints exactly one line:
//!
//! `[PASS] <id> <name> (<seconds>s): <measured values>`
//!
//! The process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};

use rnd_core::capacity::{alpha_star, capacity_diag, effective_dimension, log_grid, Spectrum};
use rnd_core::linalg::brute_inverse;
use rnd_core::selection::{choose_alpha, theory_rate_exponent, IndexFunctions, RateMetric, Regime, SelectionPolicy};
use rnd_core::stats::{count_increases, median};
use rnd_core::synth::SyntheticPair;
use rnd_core::{evaluate, fit_full, fit_nystrom, persist, rkhs_distance, subsample_plan};
use rnd_core::{KernelSpec, Label, Sample};
use rnd_harness::commands::derive_seed;
use rnd_harness::{cmd_bench, cmd_convergence, RunConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gaussian_pair_sample(n: usize, m: usize, seed: u64) -> (Sample, Sample) {
    let pair = SyntheticPair::default_pair();
    let xp = pair.draw(Label::P, n, derive_seed(seed, n, m, 11)).unwrap();
    let xq = pair.draw(Label::Q, m, derive_seed(seed, n, m, 12)).unwrap();
    (xp, xq)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn probes(count: usize, seed: u64) -> Sample {
    let pair = SyntheticPair::default_pair();
    pair.draw(Label::P, count, seed).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let alphas = [1e-2, 1e-1, 1.0];
    let mut worst_c = 0.0f64;
    let mut worst_eval = 0.0f64;
    for i in 0..20u64 {
        let n = 5 + (derive_seed(i, 0, 0, 99) % 36) as usize;
        let alpha = alphas[i as usize % 3];
        let (xp, xq) = gaussian_pair_sample(n, n, i);
        let k = KernelSpec::gaussian(1.0, 1).unwrap();
        let full = fit_full(&k, &xp, &xq, alpha).unwrap();
        let plan = subsample_plan(n, n, n, i).unwrap();
        let nys = fit_nystrom(&k, &xp, &xq, alpha, &plan).unwrap();
        worst_c = worst_c.max(max_abs_diff(full.c(), nys.c()));
        worst_c = worst_c.max(max_abs_diff(&full.c_prime(), &nys.c_prime()));
        let t = probes(20, 1000 + i);
        worst_eval = worst_eval.max(max_abs_diff(&evaluate(&full, &t).unwrap(), &evaluate(&nys, &t).unwrap()));
    }
    outcome(
        worst_c <= 1e-10 && worst_eval <= 1e-10,
        format!("max coef diff {worst_c:e}, max eval diff {worst_eval:e} (tol 1e-10)"),
    )
}

/// The two-Gram system assembled entry by entry, solved by explicit inverse.
fn dense_oracle_coefficients(k: &KernelSpec, xp: &Sample, xq: &Sample, alpha: f64) -> Vec<f64> {
    let (n, m) = (xp.len(), xq.len());
    let nf = n as f64;
    let mf = m as f64;
    let mut a = Array2::<f64>::zeros((n, n));
    let mut rhs = Array1::<f64>::zeros(n);
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] = k.eval(xp.row(i), xp.row(j)).unwrap() / nf + if i == j { alpha } else { 0.0 };
        }
        let s: f64 = (0..m).map(|j| k.eval(xp.row(i), xq.row(j)).unwrap()).sum();
        rhs[i] = -s / (alpha * mf * nf);
    }
    brute_inverse(&a).unwrap().dot(&rhs).to_vec()
}

fn dense_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_closed = 0.0f64;
    for i in 0..12u64 {
        let n = 3 + (derive_seed(i, 1, 0, 77) % 28) as usize;
        let m = 3 + (derive_seed(i, 2, 0, 77) % 28) as usize;
        let alpha = [1e-2, 1e-1, 1.0][i as usize % 3];
        let (xp, xq) = gaussian_pair_sample(n, m, 50 + i);
        let k = KernelSpec::gaussian(0.7, 1).unwrap();
        let model = fit_full(&k, &xp, &xq, alpha).unwrap();
        let oracle = dense_oracle_coefficients(&k, &xp, &xq, alpha);
        worst = worst.max(max_abs_diff(model.c(), &oracle));

        // Closed form at the p-points: (alpha I + K_pp/N)^{-1} K_pq 1 / M.
        let mut a = Array2::<f64>::zeros((n, n));
        let mut b = Array1::<f64>::zeros(n);
        for r in 0..n {
            for c in 0..n {
                a[[r, c]] = k.eval(xp.row(r), xp.row(c)).unwrap() / n as f64 + if r == c { alpha } else { 0.0 };
            }
            b[r] = (0..m).map(|j| k.eval(xp.row(r), xq.row(j)).unwrap()).sum::<f64>() / m as f64;
        }
        let closed = brute_inverse(&a).unwrap().dot(&b).to_vec();
        worst_closed = worst_closed.max(max_abs_diff(&evaluate(&model, &xp).unwrap(), &closed));
    }
    outcome(
        worst <= 1e-9 && worst_closed <= 1e-8,
        format!("max coef diff {worst:e} (tol 1e-9), closed-form eval diff {worst_closed:e} (tol 1e-8)"),
    )
}

fn capacity_dual_path() -> Outcome {
    let mut worst_mean = 0.0f64;
    let mut order_ok = true;
    let mut monotone_ok = true;
    for i in 0..20u64 {
        let n = 10 + (derive_seed(i, 3, 0, 55) % 91) as usize;
        let pair = SyntheticPair::gauss_scale(1 + (i as usize % 3), 1.0, 0.8).unwrap();
        let xp = pair.draw(Label::P, n, 300 + i).unwrap();
        let k = KernelSpec::gaussian(1.0, xp.dim()).unwrap();
        let spectrum = Spectrum::of(&k, &xp).unwrap();
        let grid = log_grid(1e-4, 10.0, 20);
        let mut prev: Option<(f64, f64)> = None;
        for &alpha in &grid {
            let diag = capacity_diag(&k, &xp, alpha).unwrap();
            let mean = diag.iter().sum::<f64>() / n as f64;
            let sup = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let n_eff = spectrum.effective_dimension(alpha);
            worst_mean = worst_mean.max((n_eff - mean).abs());
            order_ok &= n_eff <= sup + 1e-12;
            if let Some((pe, ps)) = prev {
                monotone_ok &= n_eff <= pe && sup <= ps + 1e-9;
            }
            prev = Some((n_eff, sup));
        }
    }
    outcome(
        worst_mean <= 1e-8 && order_ok && monotone_ok,
        format!("max |N_eff - mean diag| {worst_mean:e} (tol 1e-8), N_eff <= N_inf {order_ok}, nonincreasing {monotone_ok}"),
    )
}

fn alpha_star_contract() -> Outcome {
    let mut worst_rel = 0.0f64;
    for i in 0..10u64 {
        let n = 20 + 20 * i as usize;
        let xp = SyntheticPair::default_pair().draw(Label::P, n, 400 + i).unwrap();
        let k = KernelSpec::gaussian(1.0, 1).unwrap();
        let a = alpha_star(&k, &xp).unwrap();
        let resid = (effective_dimension(&k, &xp, a).unwrap() / a - n as f64).abs() / n as f64;
        worst_rel = worst_rel.max(resid);
    }
    let fixture = Sample::from_scalars(&[0.3; 4], Some(Label::P)).unwrap();
    let k = KernelSpec::gaussian(1.0, 1).unwrap();
    let a = alpha_star(&k, &fixture).unwrap();
    let resid = (effective_dimension(&k, &fixture, a).unwrap() / a - 4.0).abs() / 4.0;
    worst_rel = worst_rel.max(resid);
    // All-ones Gram: N(alpha) = 1/(1+alpha), so 4 alpha^2 + 4 alpha - 1 = 0.
    let exact = (-4.0 + (16.0f64 + 16.0).sqrt()) / 8.0;
    let fixture_err = (a - exact).abs();
    outcome(
        worst_rel <= 1e-6 && fixture_err <= 1e-8,
        format!("max relative residual {worst_rel:e} (tol 1e-6), fixture alpha* {a:.10} vs {exact:.10} (tol 1e-8)"),
    )
}

fn self_ratio() -> Outcome {
    let xp = SyntheticPair::default_pair().draw(Label::P, 200, 500).unwrap();
    let k = KernelSpec::gaussian(1.0, 1).unwrap();
    let model = fit_full(&k, &xp, &xp, 1e-6).unwrap();
    let v = evaluate(&model, &xp).unwrap();
    let mad = v.iter().map(|b| (b - 1.0).abs()).sum::<f64>() / v.len() as f64;
    outcome(mad <= 1e-3, format!("mean |beta - 1| {mad:e} (tol 1e-3)"))
}

fn convergence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.out = dir.path().to_path_buf();
    let report = cmd_convergence(&cfg).unwrap();
    let medians: Vec<f64> = report.summaries.iter().map(|s| s.median_error).collect();
    let inversions = count_increases(&medians);
    // Slope against 1/u, so shrinking error gives a negative value.
    let decay_slope = report.slope;
    let pass = report.failed_rows() == 0 && decay_slope <= -0.2 && inversions <= 1;
    let meds: Vec<String> = medians.iter().map(|m| format!("{m:.4}")).collect();
    outcome(
        pass,
        format!(
            "slope of median error vs 1/u {decay_slope:.4} (need <= -0.2), medians [{}], inversions {inversions}, failed rows {}",
            meds.join(", "),
            report.failed_rows()
        ),
    )
}

fn subquadratic_cost() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.out = dir.path().to_path_buf();
    let first = cmd_bench(&cfg).unwrap();
    let second = cmd_bench(&cfg).unwrap();
    let ledger = |r: &rnd_harness::BenchReport| {
        r.records.iter().map(|c| (c.n, c.m_sub, c.kernel_evals, c.solver_flops)).collect::<Vec<_>>()
    };
    let identical = ledger(&first) == ledger(&second);
    let pass = first.failed_rows() == 0 && first.exponent_nystrom <= 1.9 && first.exponent_full >= 2.5 && identical;
    outcome(
        pass,
        format!(
            "nystrom exponent {:.4} (need <= 1.9), full exponent {:.4} (need >= 2.5), ledger identical across runs {identical}",
            first.exponent_nystrom, first.exponent_full
        ),
    )
}

fn nystrom_distance() -> Outcome {
    let n = 1000;
    let (xp, xq) = gaussian_pair_sample(n, n, 800);
    let k = KernelSpec::gaussian(1.0, 1).unwrap();
    let idx = IndexFunctions::new(0.5, 0.5, Regime::InRkhs).unwrap();
    let alpha = choose_alpha(&SelectionPolicy::with_defaults(idx), n, n);
    let full = fit_full(&k, &xp, &xq, alpha).unwrap();
    let mut medians = Vec::new();
    for m in [25, 50, 100, 200, 400] {
        let d: Vec<f64> = (0..5u64)
            .map(|s| {
                let plan = subsample_plan(n, n, m, derive_seed(s, m, 0, 81)).unwrap();
                rkhs_distance(&k, &fit_nystrom(&k, &xp, &xq, alpha, &plan).unwrap(), &full).unwrap()
            })
            .collect();
        medians.push(median(&d));
    }
    let inversions = count_increases(&medians);
    let meds: Vec<String> = medians.iter().map(|m| format!("{m:.4}")).collect();
    outcome(inversions <= 1, format!("alpha {alpha:.4}, medians [{}], inversions {inversions}", meds.join(", ")))
}

fn selection_algebra() -> Outcome {
    let mut worst = 0.0f64;
    for regime in [Regime::InRkhs, Regime::OutOfRkhs] {
        for &(s, r) in &[(0.5, 0.5), (0.25, 0.1), (0.5, 0.05), (0.1, 0.4)] {
            let idx = IndexFunctions::new(s, r, regime).unwrap();
            for &t in &[1e-6, 1e-3, 0.01, 0.1, 0.5, 0.9] {
                let a = idx.theta_inverse(idx.theta(t).unwrap()).unwrap();
                let b = idx.theta_bar_inverse(idx.theta_bar(t).unwrap()).unwrap();
                worst = worst.max(((a - t) / t).abs()).max(((b - t) / t).abs());
            }
        }
    }
    let half = IndexFunctions::new(0.5, 0.5, Regime::InRkhs).unwrap();
    let hk = theory_rate_exponent(&half, RateMetric::Hk);
    let l2 = theory_rate_exponent(&half, RateMetric::L2);
    outcome(
        worst <= 1e-12 && hk == 0.5 && l2 == 1.0,
        format!("max relative round-trip error {worst:e} (tol 1e-12), exponents hk {hk} l2 {l2}"),
    )
}

fn persistence() -> Outcome {
    let (xp, xq) = gaussian_pair_sample(300, 250, 900);
    let k = KernelSpec::gaussian(0.9, 1).unwrap();
    let plan = subsample_plan(300, 250, 60, 901).unwrap();
    let model = fit_nystrom(&k, &xp, &xq, 0.05, &plan).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    persist::save(&model, &path).unwrap();
    let loaded = persist::load(&path).unwrap();
    let t = probes(100, 902);
    let a = evaluate(&model, &t).unwrap();
    let b = evaluate(&loaded, &t).unwrap();
    let identical = a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
    outcome(identical, format!("100 probe evaluations bitwise identical: {identical}"))
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 10] = [
        (1, "oracle-equivalence", Duration::from_secs(5), oracle_equivalence),
        (2, "dense-oracle-consistency", Duration::from_secs(5), dense_oracle),
        (3, "capacity-dual-path", Duration::from_secs(10), capacity_dual_path),
        (4, "alpha-star-contract", Duration::from_secs(10), alpha_star_contract),
        (5, "self-ratio-recovery", Duration::from_secs(10), self_ratio),
        (6, "convergence-experiment", Duration::from_secs(300), convergence),
        (7, "subquadratic-cost", Duration::from_secs(300), subquadratic_cost),
        (8, "nystrom-distance-shrinks", Duration::from_secs(120), nystrom_distance),
        (9, "selection-algebra", Duration::from_secs(10), selection_algebra),
        (10, "persistence-round-trip", Duration::from_secs(10), persistence),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= budget;
        let pass = out.pass && in_budget;
        if !pass {
            failed += 1;
        }
        let budget_note = if in_budget { String::new() } else { format!(" [over budget {}s]", budget.as_secs()) };
        println!(
            "[{}] {id} {name} ({:.2}s): {}{budget_note}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            out.detail
        );
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}

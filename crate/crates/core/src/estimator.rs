//! Tikhonov-regularized density-ratio estimator.
//!
//! The fitted function is a finite kernel expansion
//!
//! ```text
//! beta(x) = sum_i c_i k(x, x_i) + c' sum_j k(x, x'_j),    c' = 1 / (alpha M)
//! ```
//!
//! over centers taken from the p-sample (`x_i`) and the q-sample (`x'_j`).
//! The p-coefficients solve
//!
//! ```text
//! (alpha I + K_pp / N) c = -(1 / (alpha M N)) K_pq 1
//! ```
//!
//! With Nystrom subsampling both center sets are replaced by random subsets
//! of size `m`, the Gram blocks shrink to `m x m`, and the scalings keep the
//! full sample sizes `N` and `M`. The q-sum on the right-hand side runs over
//! the subsampled q-points only.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{cross_gram_row_sums, gram, KernelSpec, Sample};
use crate::linalg::{solve_spd, SpdSystem};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    Full,
    Nystrom,
}

impl std::fmt::Display for FitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitMode::Full => "full",
            FitMode::Nystrom => "nystrom",
        })
    }
}

/// Deterministic operation counts for one fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CostLedger {
    pub kernel_evals: u64,
    pub solver_flops: u64,
}

impl CostLedger {
    pub fn total(&self) -> u64 {
        self.kernel_evals + self.solver_flops
    }
}

/// A fitted (or hand-assembled) kernel expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioModel {
    kernel: KernelSpec,
    alpha: f64,
    p_centers: Sample,
    q_centers: Sample,
    c: Vec<f64>,
    c_prime: f64,
    n_full: usize,
    m_full: usize,
    mode: FitMode,
    ledger: CostLedger,
}

impl RatioModel {
    /// Assembles a model from raw parts. Fitted models always satisfy
    /// `c_prime == 1 / (alpha * m_full)`; this constructor does not insist
    /// on it so that arbitrary expansions can be compared.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        kernel: KernelSpec,
        alpha: f64,
        p_centers: Sample,
        q_centers: Sample,
        c: Vec<f64>,
        c_prime: f64,
        n_full: usize,
        m_full: usize,
        mode: FitMode,
    ) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        kernel.check_sample(&p_centers)?;
        kernel.check_sample(&q_centers)?;
        if c.len() != p_centers.len() {
            return Err(Error::DimensionMismatch { expected: p_centers.len(), found: c.len() });
        }
        if !c.iter().all(|v| v.is_finite()) || !c_prime.is_finite() {
            return Err(Error::InvalidParameter("coefficients must be finite".into()));
        }
        if n_full < p_centers.len() || m_full < q_centers.len() {
            return Err(Error::InvalidParameter(
                "full sample sizes cannot be smaller than the center sets".into(),
            ));
        }
        Ok(Self {
            kernel,
            alpha,
            p_centers,
            q_centers,
            c,
            c_prime,
            n_full,
            m_full,
            mode,
            ledger: CostLedger::default(),
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn p_centers(&self) -> &Sample {
        &self.p_centers
    }
    pub fn q_centers(&self) -> &Sample {
        &self.q_centers
    }
    pub fn c(&self) -> &[f64] {
        &self.c
    }
    /// Common value of every q-coefficient.
    pub fn c_prime_scalar(&self) -> f64 {
        self.c_prime
    }
    /// q-coefficients, one per q-center.
    pub fn c_prime(&self) -> Vec<f64> {
        vec![self.c_prime; self.q_centers.len()]
    }
    pub fn n_full(&self) -> usize {
        self.n_full
    }
    pub fn m_full(&self) -> usize {
        self.m_full
    }
    pub fn mode(&self) -> FitMode {
        self.mode
    }
    /// Cost of the fit that produced this model (zero for assembled models).
    pub fn ledger(&self) -> CostLedger {
        self.ledger
    }

    /// `beta(x)` at a single admissible point.
    pub fn eval_point(&self, x: &[f64]) -> f64 {
        let k = &self.kernel;
        let p: f64 = (0..self.p_centers.len())
            .map(|i| self.c[i] * k.eval_unchecked(x, self.p_centers.row(i)))
            .sum();
        let q: f64 = (0..self.q_centers.len())
            .map(|j| k.eval_unchecked(x, self.q_centers.row(j)))
            .sum();
        p + self.c_prime * q
    }

    /// Centers and per-center coefficients of the whole expansion.
    fn expansion(&self) -> (Vec<&[f64]>, Vec<f64>) {
        let mut pts = Vec::with_capacity(self.p_centers.len() + self.q_centers.len());
        let mut coef = Vec::with_capacity(pts.capacity());
        for i in 0..self.p_centers.len() {
            pts.push(self.p_centers.row(i));
            coef.push(self.c[i]);
        }
        for j in 0..self.q_centers.len() {
            pts.push(self.q_centers.row(j));
            coef.push(self.c_prime);
        }
        (pts, coef)
    }
}

/// Random subsample of both samples for the Nystrom fit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NystromPlan {
    pub m: usize,
    pub p_indices: Vec<usize>,
    pub q_indices: Vec<usize>,
    pub seed: u64,
}

impl NystromPlan {
    pub fn validate(&self, n_p: usize, n_q: usize) -> Result<()> {
        if self.m == 0 || self.m > n_p.min(n_q) {
            return Err(Error::InvalidPlan(format!(
                "subsample size {} outside 1..={}",
                self.m,
                n_p.min(n_q)
            )));
        }
        for (name, idx, n) in [("p", &self.p_indices, n_p), ("q", &self.q_indices, n_q)] {
            if idx.len() != self.m {
                return Err(Error::InvalidPlan(format!(
                    "{name}-indices hold {} entries, expected {}",
                    idx.len(),
                    self.m
                )));
            }
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidPlan(format!("{name}-indices must be sorted and distinct")));
            }
            if idx.last().is_some_and(|&i| i >= n) {
                return Err(Error::InvalidPlan(format!("{name}-index out of bounds for {n} points")));
            }
        }
        Ok(())
    }
}

/// Uniform subsampling without replacement, independently for the p- and
/// q-sample (streams 0 and 1 of the seed).
pub fn subsample_plan(n_p: usize, n_q: usize, m: usize, seed: u64) -> Result<NystromPlan> {
    if m == 0 || m > n_p.min(n_q) {
        return Err(Error::InvalidPlan(format!("subsample size {m} outside 1..={}", n_p.min(n_q))));
    }
    let mut p_indices = rng::sample_without_replacement(&mut rng::stream(seed, 0), n_p, m);
    let mut q_indices = rng::sample_without_replacement(&mut rng::stream(seed, 1), n_q, m);
    p_indices.sort_unstable();
    q_indices.sort_unstable();
    Ok(NystromPlan { m, p_indices, q_indices, seed })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")))
    }
}

/// Shared system for both fit modes: centers, full sizes for the scalings.
fn solve_expansion(
    kernel: &KernelSpec,
    p_centers: &Sample,
    q_centers: &Sample,
    alpha: f64,
    n_full: usize,
    m_full: usize,
) -> Result<(Vec<f64>, f64, u64)> {
    let n = n_full as f64;
    let m = m_full as f64;
    let mut k_pp = gram(kernel, p_centers)?;
    k_pp.mapv_inplace(|v| v / n);
    let scale = alpha * m * n;
    let rhs: Array1<f64> =
        cross_gram_row_sums(kernel, p_centers, q_centers)?.into_iter().map(|s| -s / scale).collect();
    let sys = SpdSystem::new(k_pp, alpha)?;
    let solved = solve_spd(&sys, &rhs)?;
    Ok((solved.x.to_vec(), 1.0 / (alpha * m), solved.flops))
}

fn check_pair(kernel: &KernelSpec, xp: &Sample, xq: &Sample) -> Result<()> {
    kernel.check_sample(xp)?;
    kernel.check_sample(xq)
}

/// Fit on the whole samples.
pub fn fit_full(kernel: &KernelSpec, xp: &Sample, xq: &Sample, alpha: f64) -> Result<RatioModel> {
    check_alpha(alpha)?;
    check_pair(kernel, xp, xq)?;
    let (n, m) = (xp.len(), xq.len());
    let (c, c_prime, flops) = solve_expansion(kernel, xp, xq, alpha, n, m)?;
    let (nn, mm) = (n as u64, m as u64);
    Ok(RatioModel {
        kernel: *kernel,
        alpha,
        p_centers: xp.clone(),
        q_centers: xq.clone(),
        c,
        c_prime,
        n_full: n,
        m_full: m,
        mode: FitMode::Full,
        ledger: CostLedger { kernel_evals: nn * nn + nn * mm, solver_flops: flops },
    })
}

/// Fit on the subsample selected by `plan`.
pub fn fit_nystrom(
    kernel: &KernelSpec,
    xp: &Sample,
    xq: &Sample,
    alpha: f64,
    plan: &NystromPlan,
) -> Result<RatioModel> {
    check_alpha(alpha)?;
    check_pair(kernel, xp, xq)?;
    plan.validate(xp.len(), xq.len())?;
    let p_centers = xp.select(&plan.p_indices)?;
    let q_centers = xq.select(&plan.q_indices)?;
    let (n, m) = (xp.len(), xq.len());
    let (c, c_prime, flops) = solve_expansion(kernel, &p_centers, &q_centers, alpha, n, m)?;
    let sub = plan.m as u64;
    Ok(RatioModel {
        kernel: *kernel,
        alpha,
        p_centers,
        q_centers,
        c,
        c_prime,
        n_full: n,
        m_full: m,
        mode: FitMode::Nystrom,
        ledger: CostLedger { kernel_evals: 2 * sub * sub, solver_flops: flops },
    })
}

/// `beta(t_k)` for every row of `t`.
pub fn evaluate(model: &RatioModel, t: &Sample) -> Result<Vec<f64>> {
    model.kernel.check_sample(t)?;
    Ok((0..t.len()).into_par_iter().map(|k| model.eval_point(t.row(k))).collect())
}

fn quad_form(kernel: &KernelSpec, u: &[&[f64]], a: &[f64], v: &[&[f64]], b: &[f64]) -> f64 {
    (0..u.len())
        .into_par_iter()
        .map(|i| {
            let inner: f64 = (0..v.len()).map(|j| b[j] * kernel.eval_unchecked(u[i], v[j])).sum();
            a[i] * inner
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// RKHS norm of `f - g` for two finite expansions over the same kernel.
pub fn rkhs_distance(kernel: &KernelSpec, f: &RatioModel, g: &RatioModel) -> Result<f64> {
    if f.kernel != *kernel || g.kernel != *kernel {
        return Err(Error::KernelMismatch);
    }
    let (u, a) = f.expansion();
    let (v, b) = g.expansion();
    let ff = quad_form(kernel, &u, &a, &u, &a);
    let fg = quad_form(kernel, &u, &a, &v, &b);
    let gg = quad_form(kernel, &v, &b, &v, &b);
    Ok((ff - 2.0 * fg + gg).max(0.0).sqrt())
}

/// RKHS norm of a single expansion.
pub fn rkhs_norm(model: &RatioModel) -> f64 {
    let (u, a) = model.expansion();
    quad_form(&model.kernel, &u, &a, &u, &a).max(0.0).sqrt()
}

/// Dense `K_pp / N` and right-hand side of the full-sample system, for
/// callers that want to check a fit against an independent solver.
pub fn full_system(kernel: &KernelSpec, xp: &Sample, xq: &Sample, alpha: f64) -> Result<(Array2<f64>, Array1<f64>)> {
    check_alpha(alpha)?;
    check_pair(kernel, xp, xq)?;
    let n = xp.len() as f64;
    let m = xq.len() as f64;
    let a = gram(kernel, xp)? / n;
    let k_pq = crate::kernel::cross_gram(kernel, xp, xq)?;
    let rhs = k_pq.sum_axis(ndarray::Axis(1)) * (-1.0 / (alpha * m * n));
    Ok((a, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::brute_inverse;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k1() -> KernelSpec {
        KernelSpec::gaussian(1.0, 1).unwrap()
    }

    fn random_sample(n: usize, d: usize, seed: u64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        Sample::from_rows(&rows, None).unwrap()
    }

    #[test]
    fn one_point_fit() {
        let x = Sample::from_scalars(&[0.0], None).unwrap();
        let model = fit_full(&k1(), &x, &x, 0.5).unwrap();
        assert_eq!(model.c_prime(), vec![2.0]);
        assert_abs_diff_eq!(model.c()[0], -4.0 / 3.0, epsilon = 1e-14);
        let b = evaluate(&model, &x).unwrap();
        assert_abs_diff_eq!(b[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_eq!(model.ledger(), CostLedger { kernel_evals: 2, solver_flops: 1 });
    }

    #[test]
    fn full_matches_brute_inverse() {
        let k = k1();
        let xp = random_sample(5, 1, 1);
        let xq = random_sample(5, 1, 2);
        let alpha = 0.1;
        let model = fit_full(&k, &xp, &xq, alpha).unwrap();
        let (a, rhs) = full_system(&k, &xp, &xq, alpha).unwrap();
        let mut shifted = a.clone();
        for i in 0..5 {
            shifted[[i, i]] += alpha;
        }
        let oracle = brute_inverse(&shifted).unwrap().dot(&rhs);
        for i in 0..5 {
            assert_abs_diff_eq!(model.c()[i], oracle[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn nystrom_full_plan_equals_full() {
        let k = KernelSpec::gaussian(0.8, 2).unwrap();
        let xp = random_sample(12, 2, 3);
        let xq = random_sample(12, 2, 4);
        let plan = subsample_plan(12, 12, 12, 9).unwrap();
        assert_eq!(plan.p_indices, (0..12).collect::<Vec<_>>());
        let full = fit_full(&k, &xp, &xq, 0.05).unwrap();
        let nys = fit_nystrom(&k, &xp, &xq, 0.05, &plan).unwrap();
        for (a, b) in full.c().iter().zip(nys.c()) {
            assert!((a - b).abs() <= 1e-10);
        }
        assert_eq!(nys.mode(), FitMode::Nystrom);
        assert_eq!(nys.ledger().kernel_evals, 2 * 144);
    }

    #[test]
    fn nystrom_one_center_closed_form() {
        let k = k1();
        let xp = random_sample(7, 1, 5);
        let xq = random_sample(9, 1, 6);
        let plan = subsample_plan(7, 9, 1, 2).unwrap();
        let alpha = 0.3;
        let model = fit_nystrom(&k, &xp, &xq, alpha, &plan).unwrap();
        let x1 = xp.row(plan.p_indices[0]);
        let y1 = xq.row(plan.q_indices[0]);
        let (n, m) = (7.0, 9.0);
        let expected = -k.eval(x1, y1).unwrap() / (alpha * m * n * (alpha + k.eval(x1, x1).unwrap() / n));
        assert_abs_diff_eq!(model.c()[0], expected, epsilon = 1e-14);
        assert_eq!(model.c_prime_scalar(), 1.0 / (alpha * m));
        assert_eq!(model.p_centers().len(), 1);
        assert_eq!(model.q_centers().len(), 1);
    }

    #[test]
    fn fit_rejects_bad_alpha_and_plans() {
        let k = k1();
        let x = random_sample(4, 1, 1);
        assert!(fit_full(&k, &x, &x, 0.0).is_err());
        assert!(fit_full(&k, &x, &x, -1.0).is_err());
        let bad = NystromPlan { m: 2, p_indices: vec![1, 1], q_indices: vec![0, 1], seed: 0 };
        assert!(matches!(fit_nystrom(&k, &x, &x, 0.1, &bad), Err(Error::InvalidPlan(_))));
        let oob = NystromPlan { m: 2, p_indices: vec![0, 4], q_indices: vec![0, 1], seed: 0 };
        assert!(fit_nystrom(&k, &x, &x, 0.1, &oob).is_err());
        assert!(subsample_plan(4, 3, 4, 0).is_err());
        assert!(subsample_plan(4, 3, 0, 0).is_err());
        let x2 = random_sample(4, 2, 1);
        assert!(matches!(fit_full(&k, &x, &x2, 0.1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_expansion_evaluates_to_zero() {
        let k = k1();
        let x = random_sample(3, 1, 8);
        let model = RatioModel::from_parts(k, 1.0, x.clone(), x.clone(), vec![0.0; 3], 0.0, 3, 3, FitMode::Full).unwrap();
        let t = random_sample(10, 1, 9);
        assert!(evaluate(&model, &t).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn large_alpha_shrinks() {
        let k = k1();
        let xp = random_sample(15, 1, 10);
        let xq = random_sample(15, 1, 11);
        let t = random_sample(20, 1, 12);
        let mut prev = f64::INFINITY;
        for alpha in [1e2, 1e4, 1e6] {
            let model = fit_full(&k, &xp, &xq, alpha).unwrap();
            let mx = evaluate(&model, &t).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(mx < prev);
            prev = mx;
        }
    }

    #[test]
    fn c_prime_is_exact() {
        let k = k1();
        let xp = random_sample(6, 1, 13);
        let xq = random_sample(11, 1, 14);
        let alpha = 0.037;
        let model = fit_full(&k, &xp, &xq, alpha).unwrap();
        assert!(model.c_prime().iter().all(|&v| v == 1.0 / (alpha * 11.0)));
    }

    #[test]
    fn rkhs_distance_basics() {
        let k = k1();
        let xp = random_sample(6, 1, 15);
        let xq = random_sample(6, 1, 16);
        let model = fit_full(&k, &xp, &xq, 0.2).unwrap();
        assert!(rkhs_distance(&k, &model, &model).unwrap() <= 1e-12);

        let u = Sample::from_scalars(&[0.4], None).unwrap();
        let single = RatioModel::from_parts(k, 1.0, u.clone(), u.clone(), vec![-2.5], 0.0, 1, 1, FitMode::Full).unwrap();
        let zero = RatioModel::from_parts(k, 1.0, u.clone(), u, vec![0.0], 0.0, 1, 1, FitMode::Full).unwrap();
        assert_abs_diff_eq!(rkhs_distance(&k, &single, &zero).unwrap(), 2.5, epsilon = 1e-12);

        let other = KernelSpec::gaussian(2.0, 1).unwrap();
        assert!(matches!(rkhs_distance(&other, &model, &model), Err(Error::KernelMismatch)));
    }

    #[test]
    fn rkhs_distance_matches_dense_quadratic_form() {
        let k = KernelSpec::laplacian(1.5, 2).unwrap();
        let pts = |s| random_sample(3, 2, s);
        let f = RatioModel::from_parts(k, 1.0, pts(20), pts(21), vec![0.3, -1.2, 0.7], 0.25, 3, 3, FitMode::Full).unwrap();
        let g = RatioModel::from_parts(k, 1.0, pts(22), pts(23), vec![1.1, 0.4, -0.5], -0.3, 3, 3, FitMode::Full).unwrap();
        // difference as one expansion with negated g-coefficients
        let mut rows = Vec::new();
        let mut coef = Vec::new();
        for (m, sign) in [(&f, 1.0), (&g, -1.0)] {
            for i in 0..3 {
                rows.push(m.p_centers().row(i).to_vec());
                coef.push(sign * m.c()[i]);
            }
            for j in 0..3 {
                rows.push(m.q_centers().row(j).to_vec());
                coef.push(sign * m.c_prime_scalar());
            }
        }
        let s = Sample::from_rows(&rows, None).unwrap();
        let gm = crate::kernel::gram(&k, &s).unwrap();
        let a = Array1::from(coef);
        let expected = a.dot(&gm.dot(&a)).sqrt();
        assert_abs_diff_eq!(rkhs_distance(&k, &f, &g).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn plan_is_deterministic_and_uniform() {
        assert_eq!(subsample_plan(30, 40, 10, 77).unwrap(), subsample_plan(30, 40, 10, 77).unwrap());
        let mut counts = [0usize; 10];
        for seed in 0..10_000u64 {
            let plan = subsample_plan(10, 10, 1, seed).unwrap();
            counts[plan.p_indices[0]] += 1;
        }
        // binomial(10000, 0.1): mean 1000, sd 30
        for c in counts {
            assert!((c as f64 - 1000.0).abs() <= 90.0, "{counts:?}");
        }
    }
}

//! Empirical capacity of the kernel space relative to the p-sample.
//!
//! With `A = K / N` the normalized p-sample Gram matrix:
//!
//! * pointwise capacity at sample point `i`: `[(alpha I + A)^{-1} K]_ii`,
//! * effective dimension: `trace((alpha I + A)^{-1} A) = sum_i l_i / (l_i + alpha)`,
//! * uniform capacity: maximum of the pointwise values over the sample,
//! * `alpha_star`: root of `N(alpha) / alpha = N`.
//!
//! The effective dimension is available through two independent routes, the
//! eigenvalues of `A` and the mean of the pointwise capacities, which must
//! agree. The population supremum is approximated by the sample maximum.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kernel::{gram, KernelSpec, Sample};
use crate::linalg::{eigh, Cholesky, SpdSystem};

const ALPHA_STAR_LOWER: f64 = 1e-12;
const ALPHA_STAR_REL_WIDTH: f64 = 1e-10;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")))
    }
}

fn normalized_gram(kernel: &KernelSpec, xp: &Sample) -> Result<ndarray::Array2<f64>> {
    let n = xp.len() as f64;
    let mut a = gram(kernel, xp)?;
    a.mapv_inplace(|v| v / n);
    Ok(a)
}

/// Pointwise capacity from an already normalized Gram matrix `A = K / N`.
pub fn capacity_diag_from_normalized(a: &ndarray::Array2<f64>, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let n = a.nrows() as f64;
    let chol = Cholesky::factor(&SpdSystem::new(a.clone(), alpha)?)?;
    // (alpha I + A)^{-1} K = N (I - alpha (alpha I + A)^{-1})
    Ok(chol.inverse_diagonal().into_iter().map(|d| n * (1.0 - alpha * d)).collect())
}

pub fn capacity_diag(kernel: &KernelSpec, xp: &Sample, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    capacity_diag_from_normalized(&normalized_gram(kernel, xp)?, alpha)
}

pub fn capacity_sup(kernel: &KernelSpec, xp: &Sample, alpha: f64) -> Result<f64> {
    Ok(capacity_diag(kernel, xp, alpha)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Eigenvalues of `K / N`, reusable across many regularization values.
#[derive(Clone, Debug)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    n_points: usize,
}

impl Spectrum {
    pub fn of(kernel: &KernelSpec, xp: &Sample) -> Result<Self> {
        Self::from_normalized(&normalized_gram(kernel, xp)?)
    }

    pub fn from_normalized(a: &ndarray::Array2<f64>) -> Result<Self> {
        let eig = eigh(a)?;
        Ok(Self::from_eigenvalues(eig.eigenvalues))
    }

    /// Negative round-off eigenvalues are clamped to zero.
    pub fn from_eigenvalues(eigenvalues: Vec<f64>) -> Self {
        let n_points = eigenvalues.len();
        let eigenvalues = eigenvalues.into_iter().map(|l| l.max(0.0)).collect();
        Self { eigenvalues, n_points }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn effective_dimension(&self, alpha: f64) -> f64 {
        self.eigenvalues.iter().map(|&l| l / (l + alpha)).sum()
    }

    /// Bisection for `N(alpha) / alpha = N` in log scale.
    pub fn alpha_star(&self) -> Result<f64> {
        let n = self.n_points as f64;
        let trace = self.trace();
        if !(trace > 0.0) {
            return Err(Error::NotBracketed("Gram matrix has zero trace".into()));
        }
        let f = |a: f64| self.effective_dimension(a) / a - n;
        let mut lo = ALPHA_STAR_LOWER;
        if !(f(lo) > 0.0) {
            return Err(Error::NotBracketed(format!("N(alpha)/alpha <= N already at alpha = {lo:e}")));
        }
        let mut hi = trace.max(lo * 2.0);
        let mut widen = 0;
        while f(hi) >= 0.0 {
            hi *= 2.0;
            widen += 1;
            if widen > 200 {
                return Err(Error::NotBracketed("upper end could not be found".into()));
            }
        }
        while hi - lo > ALPHA_STAR_REL_WIDTH * hi {
            let mid = (lo * hi).sqrt();
            let mid = if mid > lo && mid < hi { mid } else { 0.5 * (lo + hi) };
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

pub fn effective_dimension(kernel: &KernelSpec, xp: &Sample, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(Spectrum::of(kernel, xp)?.effective_dimension(alpha))
}

pub fn alpha_star(kernel: &KernelSpec, xp: &Sample) -> Result<f64> {
    Spectrum::of(kernel, xp)?.alpha_star()
}

/// Capacity quantities over a grid of regularization values.
#[derive(Clone, Debug)]
pub struct CapacityProfile {
    pub alphas: Vec<f64>,
    pub n_eff: Vec<f64>,
    pub n_inf: Vec<f64>,
    pub alpha_star: f64,
    pub n_points: usize,
}

impl CapacityProfile {
    pub fn compute(kernel: &KernelSpec, xp: &Sample, alphas: &[f64]) -> Result<Self> {
        let a = normalized_gram(kernel, xp)?;
        let spectrum = Spectrum::from_normalized(&a)?;
        let alpha_star = spectrum.alpha_star()?;
        Self::with_spectrum(&a, &spectrum, alpha_star, alphas)
    }

    /// Default grid: `count` log-spaced values from `alpha_star / 10` to 1.
    pub fn default_grid(kernel: &KernelSpec, xp: &Sample, count: usize) -> Result<Self> {
        let a = normalized_gram(kernel, xp)?;
        let spectrum = Spectrum::from_normalized(&a)?;
        let alpha_star = spectrum.alpha_star()?;
        let alphas = log_grid(alpha_star / 10.0, 1.0, count);
        Self::with_spectrum(&a, &spectrum, alpha_star, &alphas)
    }

    fn with_spectrum(
        a: &ndarray::Array2<f64>,
        spectrum: &Spectrum,
        alpha_star: f64,
        alphas: &[f64],
    ) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidParameter("empty alpha grid".into()));
        }
        let mut n_eff = Vec::with_capacity(alphas.len());
        let mut n_inf = Vec::with_capacity(alphas.len());
        for &alpha in alphas {
            check_alpha(alpha)?;
            n_eff.push(spectrum.effective_dimension(alpha));
            let diag = capacity_diag_from_normalized(a, alpha)?;
            n_inf.push(diag.into_iter().fold(f64::NEG_INFINITY, f64::max));
        }
        Ok(Self { alphas: alphas.to_vec(), n_eff, n_inf, alpha_star, n_points: a.nrows() })
    }

    /// `alpha,n_eff,n_inf` rows followed by `# alpha_star=<value>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,n_eff,n_inf\n");
        for i in 0..self.alphas.len() {
            let _ = writeln!(out, "{:e},{:e},{:e}", self.alphas[i], self.n_eff[i], self.n_inf[i]);
        }
        let _ = writeln!(out, "# alpha_star={:e}", self.alpha_star);
        out
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
        }
    }
}

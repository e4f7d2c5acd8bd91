//! A priori choice of the regularization parameter and the subsample size.
//!
//! Index functions are power functions: the source condition uses
//! `phi(t) = t^s` and the kernel-section smoothness uses `zeta(t) = t^r`,
//! with `s, r` in `(0, 1/2]`. Then
//!
//! ```text
//! theta(t)     = t phi(t) / zeta(t)       = t^(1 + s - r)
//! theta_bar(t) = sqrt(t) phi(t) / zeta(t) = t^(1/2 + s - r)
//! ```
//!
//! and the regularization parameter is `theta^{-1}(u)` (or `theta_bar^{-1}(u)`
//! for the L2 rule), `u = 1/sqrt(N) + 1/sqrt(M)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// The ratio lies in the kernel space; error measured in its norm.
    InRkhs,
    /// The ratio lies outside the kernel space; error measured in L2(p).
    OutOfRkhs,
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in_rkhs" => Ok(Regime::InRkhs),
            "out_of_rkhs" => Ok(Regime::OutOfRkhs),
            other => Err(Error::InvalidParameter(format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexFunctions {
    s: f64,
    r: f64,
    regime: Regime,
}

fn check_t(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("argument must be positive, got {t}")))
    }
}

impl IndexFunctions {
    pub fn new(s: f64, r: f64, regime: Regime) -> Result<Self> {
        for (name, v) in [("s", s), ("r", r)] {
            if !(v > 0.0 && v <= 0.5) {
                return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1/2], got {v}")));
            }
        }
        Ok(Self { s, r, regime })
    }

    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn regime(&self) -> Regime {
        self.regime
    }

    fn theta_power(&self) -> f64 {
        1.0 + self.s - self.r
    }

    fn theta_bar_power(&self) -> f64 {
        0.5 + self.s - self.r
    }

    pub fn theta(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        Ok(t.powf(self.theta_power()))
    }

    pub fn theta_inverse(&self, u: f64) -> Result<f64> {
        check_t(u)?;
        Ok(u.powf(1.0 / self.theta_power()))
    }

    pub fn theta_bar(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        Ok(t.powf(self.theta_bar_power()))
    }

    pub fn theta_bar_inverse(&self, u: f64) -> Result<f64> {
        check_t(u)?;
        Ok(u.powf(1.0 / self.theta_bar_power()))
    }
}

/// The parameters that drive both a priori rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub idx: IndexFunctions,
    pub delta: f64,
    pub c_subsample: f64,
}

impl SelectionPolicy {
    pub const DEFAULT_DELTA: f64 = 0.1;
    pub const DEFAULT_C_SUBSAMPLE: f64 = 1.0;

    pub fn new(idx: IndexFunctions, delta: f64, c_subsample: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(c_subsample.is_finite() && c_subsample > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "subsample constant must be positive, got {c_subsample}"
            )));
        }
        Ok(Self { idx, delta, c_subsample })
    }

    pub fn with_defaults(idx: IndexFunctions) -> Self {
        Self { idx, delta: Self::DEFAULT_DELTA, c_subsample: Self::DEFAULT_C_SUBSAMPLE }
    }
}

/// `u = 1/sqrt(N) + 1/sqrt(M)`.
pub fn sample_scale(n: usize, m: usize) -> f64 {
    1.0 / (n as f64).sqrt() + 1.0 / (m as f64).sqrt()
}

/// Lower end of the admissible range, `log(N / delta) / N`.
pub fn alpha_lower_bound(n: usize, delta: f64) -> f64 {
    let n = n as f64;
    (n / delta).ln() / n
}

/// A priori regularization parameter for sample sizes `n` (p) and `m` (q).
/// Values below the admissible lower end are raised to it with a warning.
pub fn choose_alpha(policy: &SelectionPolicy, n: usize, m: usize) -> f64 {
    assert!(n >= 1 && m >= 1, "sample sizes must be positive");
    let u = sample_scale(n, m);
    let idx = &policy.idx;
    let alpha = match idx.regime {
        Regime::InRkhs => u.powf(1.0 / idx.theta_power()),
        Regime::OutOfRkhs => u.powf(1.0 / idx.theta_bar_power()),
    };
    let lower = alpha_lower_bound(n, policy.delta);
    if alpha < lower {
        log::warn!("alpha {alpha:e} is below the admissible lower end {lower:e}; clamping");
        lower
    } else {
        alpha
    }
}

/// `ceil(C * n_inf * max(log(1/alpha), 1) * log(1/delta))`, clamped to `1..=min(N, M)`.
pub fn choose_subsample_size(policy: &SelectionPolicy, n_inf_alpha: f64, alpha: f64, n: usize, m: usize) -> usize {
    let raw = policy.c_subsample * n_inf_alpha * (1.0 / alpha).ln().max(1.0) * (1.0 / policy.delta).ln();
    let cap = n.min(m).max(1);
    if !raw.is_finite() {
        return cap;
    }
    (raw.ceil().max(1.0) as usize).min(cap)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateMetric {
    /// kernel-space norm, ratio in the space
    Hk,
    /// L2(p) norm, ratio in the space
    L2,
    /// embedded kernel-space norm, ratio outside the space
    EmbeddedHk,
    /// L2(p) norm, ratio outside the space
    EmbeddedL2,
}

/// Exponent `e` of the guaranteed rate `u^e`.
pub fn theory_rate_exponent(idx: &IndexFunctions, metric: RateMetric) -> f64 {
    let (s, r) = (idx.s, idx.r);
    match metric {
        RateMetric::Hk => s / (s + 1.0 - r),
        RateMetric::L2 => (1.0 + 2.0 * s) / (2.0 * (s + 1.0 - r)),
        RateMetric::EmbeddedHk => (1.0 + 2.0 * s) / (2.0 * (s - r + 1.0)),
        RateMetric::EmbeddedL2 => 2.0 * s / (2.0 * (s - r) + 1.0),
    }
}

/// Experimental: a general source-condition index function given by a table
/// of `(t, phi(t))` pairs, interpolated linearly, with `zeta(t) = t^r`.
/// `theta^{-1}` is found by bisection.
#[derive(Clone, Debug)]
pub struct TabulatedIndex {
    ts: Vec<f64>,
    phis: Vec<f64>,
    r: f64,
}

impl TabulatedIndex {
    pub fn new(table: Vec<(f64, f64)>, r: f64) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::InvalidParameter("table needs at least two entries".into()));
        }
        if !(r > 0.0 && r <= 0.5) {
            return Err(Error::InvalidParameter(format!("r must lie in (0, 1/2], got {r}")));
        }
        if table.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) || table[0].0 <= 0.0 {
            return Err(Error::InvalidParameter("table must be strictly increasing in t and phi".into()));
        }
        let (ts, phis) = table.into_iter().unzip();
        Ok(Self { ts, phis, r })
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        let (lo, hi) = (self.ts[0], *self.ts.last().unwrap());
        if !(t >= lo && t <= hi) {
            return Err(Error::InvalidParameter(format!("t = {t} outside tabulated range [{lo}, {hi}]")));
        }
        let k = self.ts.partition_point(|&x| x <= t).clamp(1, self.ts.len() - 1);
        let (t0, t1) = (self.ts[k - 1], self.ts[k]);
        let w = (t - t0) / (t1 - t0);
        Ok(self.phis[k - 1] * (1.0 - w) + self.phis[k] * w)
    }

    pub fn theta(&self, t: f64) -> Result<f64> {
        Ok(t * self.phi(t)? / t.powf(self.r))
    }

    pub fn theta_inverse(&self, u: f64) -> Result<f64> {
        let mut lo = self.ts[0];
        let mut hi = *self.ts.last().unwrap();
        let (flo, fhi) = (self.theta(lo)?, self.theta(hi)?);
        if !(u >= flo && u <= fhi) {
            return Err(Error::NotBracketed(format!("{u} outside [{flo}, {fhi}]")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.theta(mid)? < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

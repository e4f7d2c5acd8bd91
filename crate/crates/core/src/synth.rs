//! Synthetic (p, q) pairs with closed-form density ratio, sample
//! generation and Monte Carlo error metrics.
//!
//! The p-distribution is always an isotropic centered Gaussian
//! `N(0, sigma_p^2 I)`. The q-distribution is a single isotropic Gaussian or
//! a finite mixture of them, each with standard deviation at most
//! `sigma_p`, so the ratio `dq/dp` is bounded.
//!
//! Sampling is chunked: chunk `c` of [`rng::CHUNK`] points uses stream `c`
//! of the seed, so results do not depend on how chunks are scheduled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::RatioModel;
use crate::kernel::{Label, Sample};
use crate::rng::{self, Normals, CHUNK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairFamily {
    GaussScale,
    GaussShiftScale,
    MixtureVsGauss,
}

/// Isotropic Gaussian component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticPair {
    family: PairFamily,
    dim: usize,
    sigma_p: f64,
    q: Vec<Component>,
    b0: f64,
}

fn check_std(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

impl SyntheticPair {
    /// `p = N(0, sigma_p^2 I)`, `q = N(0, sigma_q^2 I)`.
    pub fn gauss_scale(dim: usize, sigma_p: f64, sigma_q: f64) -> Result<Self> {
        Self::build(
            PairFamily::GaussScale,
            dim,
            sigma_p,
            vec![Component { weight: 1.0, mean: vec![0.0; dim], std: sigma_q }],
        )
    }

    /// `p = N(0, sigma_p^2 I)`, `q = N(mu, sigma_q^2 I)`.
    pub fn gauss_shift_scale(sigma_p: f64, mean_q: Vec<f64>, sigma_q: f64) -> Result<Self> {
        let dim = mean_q.len();
        Self::build(
            PairFamily::GaussShiftScale,
            dim,
            sigma_p,
            vec![Component { weight: 1.0, mean: mean_q, std: sigma_q }],
        )
    }

    /// `p = N(0, sigma_p^2 I)`, `q` a Gaussian mixture.
    pub fn mixture_vs_gauss(sigma_p: f64, components: Vec<Component>) -> Result<Self> {
        let dim = components.first().map(|c| c.mean.len()).unwrap_or(0);
        Self::build(PairFamily::MixtureVsGauss, dim, sigma_p, components)
    }

    /// One-dimensional `p = N(0, 1)`, `q = N(0, 0.8^2)`; `b0 = 1.25`.
    pub fn default_pair() -> Self {
        Self::gauss_scale(1, 1.0, 0.8).expect("valid default pair")
    }

    fn build(family: PairFamily, dim: usize, sigma_p: f64, q: Vec<Component>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        check_std("sigma_p", sigma_p)?;
        if q.is_empty() {
            return Err(Error::InvalidParameter("q needs at least one component".into()));
        }
        let total: f64 = q.iter().map(|c| c.weight).sum();
        for c in &q {
            check_std("component std", c.std)?;
            if !(c.weight > 0.0) {
                return Err(Error::InvalidParameter("component weights must be positive".into()));
            }
            if c.mean.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: c.mean.len() });
            }
            if !c.mean.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter("component mean must be finite".into()));
            }
            let centered = c.mean.iter().all(|&v| v == 0.0);
            if c.std > sigma_p || (c.std == sigma_p && !centered) {
                return Err(Error::InvalidParameter(format!(
                    "q-component std {} must be below sigma_p {sigma_p} for a bounded ratio",
                    c.std
                )));
            }
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}, expected 1")));
        }
        let mut pair = Self { family, dim, sigma_p, q, b0: 0.0 };
        pair.b0 = pair.certify_sup();
        Ok(pair)
    }

    pub fn family(&self) -> PairFamily {
        self.family
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn sigma_p(&self) -> f64 {
        self.sigma_p
    }
    pub fn components(&self) -> &[Component] {
        &self.q
    }
    /// Supremum of the ratio.
    pub fn b0(&self) -> f64 {
        self.b0
    }

    fn term(&self, c: &Component, x: &[f64]) -> f64 {
        let d = self.dim as f64;
        let sq = c.std * c.std;
        let sp = self.sigma_p * self.sigma_p;
        let dx: f64 = x.iter().zip(&c.mean).map(|(a, m)| (a - m) * (a - m)).sum();
        let x2: f64 = x.iter().map(|a| a * a).sum();
        c.weight * (d * (self.sigma_p / c.std).ln() - dx / (2.0 * sq) + x2 / (2.0 * sp)).exp()
    }

    /// `dq/dp (x)`.
    pub fn true_ratio(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(self.ratio_unchecked(x))
    }

    fn ratio_unchecked(&self, x: &[f64]) -> f64 {
        self.q.iter().map(|c| self.term(c, x)).sum()
    }

    /// Exact for a single component; multi-start fixed-point ascent for
    /// mixtures (each term is a Gaussian bump in `x`).
    fn certify_sup(&self) -> f64 {
        let sp = self.sigma_p * self.sigma_p;
        if self.q.len() == 1 {
            let c = &self.q[0];
            let sq = c.std * c.std;
            let mu2: f64 = c.mean.iter().map(|v| v * v).sum();
            let scale = (self.dim as f64 * (self.sigma_p / c.std).ln()).exp();
            return if sq == sp { scale } else { scale * (mu2 / (2.0 * (sp - sq))).exp() };
        }
        let precision = |c: &Component| 1.0 / (c.std * c.std) - 1.0 / sp;
        if self.q.iter().all(|c| precision(c) == 0.0) {
            return self.ratio_unchecked(&vec![0.0; self.dim]);
        }
        let mut best = f64::NEG_INFINITY;
        for start in &self.q {
            let a = precision(start);
            let mut x: Vec<f64> = if a > 0.0 {
                start.mean.iter().map(|m| m / (start.std * start.std * a)).collect()
            } else {
                vec![0.0; self.dim]
            };
            for _ in 0..100_000 {
                let mut num = vec![0.0; self.dim];
                let mut den = 0.0;
                for c in &self.q {
                    let f = self.term(c, &x);
                    let inv = 1.0 / (c.std * c.std);
                    for (n, m) in num.iter_mut().zip(&c.mean) {
                        *n += f * m * inv;
                    }
                    den += f * precision(c);
                }
                let next: Vec<f64> = num.iter().map(|n| n / den).collect();
                let step: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                x = next;
                if step <= 1e-14 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                    break;
                }
            }
            best = best.max(self.ratio_unchecked(&x));
        }
        best
    }

    /// `n` i.i.d. points from p or q.
    pub fn draw(&self, which: Label, n: usize, seed: u64) -> Result<Sample> {
        Ok(self.draw_with_components(which, n, seed)?.0)
    }

    /// Like [`draw`](Self::draw), also returning the mixture component of each
    /// point (always 0 for p).
    pub fn draw_with_components(&self, which: Label, n: usize, seed: u64) -> Result<(Sample, Vec<usize>)> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let d = self.dim;
        let chunks: Vec<(Vec<f64>, Vec<usize>)> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let len = CHUNK.min(n - c * CHUNK);
                let mut z = Normals::new(rng::stream(seed, c as u64));
                let mut pts = Vec::with_capacity(len * d);
                let mut comp = Vec::with_capacity(len);
                for _ in 0..len {
                    match which {
                        Label::P => {
                            comp.push(0);
                            for _ in 0..d {
                                pts.push(self.sigma_p * z.next());
                            }
                        }
                        Label::Q => {
                            let u = z.uniform();
                            let k = self.pick_component(u);
                            comp.push(k);
                            let cmp = &self.q[k];
                            for j in 0..d {
                                pts.push(cmp.mean[j] + cmp.std * z.next());
                            }
                        }
                    }
                }
                (pts, comp)
            })
            .collect();
        let mut flat = Vec::with_capacity(n * d);
        let mut comps = Vec::with_capacity(n);
        for (p, c) in chunks {
            flat.extend(p);
            comps.extend(c);
        }
        let points = ndarray::Array2::from_shape_vec((n, d), flat).expect("shape");
        Ok((Sample::new(points, Some(which))?, comps))
    }

    fn pick_component(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, c) in self.q.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                return k;
            }
        }
        self.q.len() - 1
    }
}

/// Monte Carlo `L2(p)` error of a fitted ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub l2p_error: f64,
    pub mc_points: usize,
    pub seed: u64,
    pub embedded_hk_error: Option<f64>,
}

/// `sqrt(mean_i f(t_i)^2)` over `t_count` draws from p, chunk sums added in order.
fn mc_rms<F>(pair: &SyntheticPair, t_count: usize, seed: u64, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if t_count == 0 {
        return Err(Error::InvalidParameter("need at least one Monte Carlo point".into()));
    }
    let mc_seed = seed.wrapping_add(rng::MC_SEED_OFFSET);
    let d = pair.dim;
    let sums: Vec<f64> = (0..t_count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(t_count - c * CHUNK);
            let mut z = Normals::new(rng::stream(mc_seed, c as u64));
            let mut x = vec![0.0; d];
            let mut s = 0.0;
            for _ in 0..len {
                for v in x.iter_mut() {
                    *v = pair.sigma_p * z.next();
                }
                let e = f(&x);
                s += e * e;
            }
            s
        })
        .collect();
    Ok((sums.iter().sum::<f64>() / t_count as f64).sqrt())
}

/// Evaluation points for the Monte Carlo metrics: `t_count` draws from p,
/// seeded disjointly from the training draws.
pub fn mc_points(pair: &SyntheticPair, t_count: usize, seed: u64) -> Result<Sample> {
    pair.draw(Label::P, t_count, seed.wrapping_add(rng::MC_SEED_OFFSET))
}

fn check_model_dim(pair: &SyntheticPair, model: &RatioModel) -> Result<()> {
    if model.kernel().dim() != pair.dim {
        return Err(Error::DimensionMismatch { expected: pair.dim, found: model.kernel().dim() });
    }
    Ok(())
}

/// `||beta - beta_model||_{L2(p)}` by Monte Carlo.
pub fn l2p_error(pair: &SyntheticPair, model: &RatioModel, t_count: usize, seed: u64) -> Result<ErrorReport> {
    check_model_dim(pair, model)?;
    let err = mc_rms(pair, t_count, seed, |x| pair.ratio_unchecked(x) - model.eval_point(x))?;
    Ok(ErrorReport { l2p_error: err, mc_points: t_count, seed, embedded_hk_error: None })
}

/// `||f - g||_{L2(p)}` by Monte Carlo.
pub fn l2p_distance(pair: &SyntheticPair, f: &RatioModel, g: &RatioModel, t_count: usize, seed: u64) -> Result<f64> {
    check_model_dim(pair, f)?;
    check_model_dim(pair, g)?;
    mc_rms(pair, t_count, seed, |x| f.eval_point(x) - g.eval_point(x))
}

/// Largest Monte Carlo size accepted by [`embedded_error`].
pub const EMBEDDED_MAX_POINTS: usize = 5000;

/// Kernel-space norm of the Monte Carlo embedding
/// `(1/T) sum_i k(., t_i) (beta(t_i) - beta_model(t_i))`, `t_i ~ p`.
pub fn embedded_error(pair: &SyntheticPair, model: &RatioModel, t_count: usize, seed: u64) -> Result<f64> {
    check_model_dim(pair, model)?;
    if t_count == 0 || t_count > EMBEDDED_MAX_POINTS {
        return Err(Error::InvalidParameter(format!(
            "embedded error needs 1..={EMBEDDED_MAX_POINTS} points, got {t_count}"
        )));
    }
    let t = mc_points(pair, t_count, seed)?;
    let w: Vec<f64> = (0..t.len())
        .map(|i| pair.ratio_unchecked(t.row(i)) - model.eval_point(t.row(i)))
        .collect();
    let kernel = model.kernel();
    let rows: Vec<f64> = (0..t.len())
        .into_par_iter()
        .map(|i| {
            let ti = t.row(i);
            w[i] * (0..t.len()).map(|j| w[j] * kernel.eval_unchecked(ti, t.row(j))).sum::<f64>()
        })
        .collect();
    let q: f64 = rows.iter().sum();
    let tt = t_count as f64;
    Ok((q.max(0.0)).sqrt() / tt)
}

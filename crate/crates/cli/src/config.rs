//! Experiment configuration: a TOML file with one table per concern, plus
//! command-line overrides applied on top.
//!
//! ```toml
//! [kernel]
//! family = "gaussian"     # gaussian | laplacian | polynomial
//! bandwidth = 1.0         # or "median"
//!
//! [pair]
//! family = "gauss_scale"  # gauss_scale | gauss_shift_scale | mixture_vs_gauss
//! dim = 1
//! sigma_p = 1.0
//! sigma_q = 0.8
//!
//! [selection]
//! s = 0.5
//! r = 0.5
//! delta = 0.1
//! c_sub = 1.0
//! regime = "in_rkhs"
//!
//! [experiment]
//! sizes = [[250, 250], [500, 500]]
//! seeds = [1, 2, 3]
//! alpha = "auto"
//! subsample = "auto"      # "auto", an integer, or a fraction in (0, 1)
//! mode = "nystrom"
//! mc_points = 20000
//! out = "out"
//!
//! [bench]
//! nystrom_sizes = [2000, 4000, 8000, 16000]
//! full_sizes = [250, 500, 1000, 2000]
//! ```

use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;

use rnd_core::selection::{IndexFunctions, Regime, SelectionPolicy};
use rnd_core::synth::{Component, SyntheticPair};
use rnd_core::kernel::median_heuristic;
use rnd_core::{FitMode, KernelFamily, KernelSpec, Sample};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] rnd_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, ConfigError>;

/// Points used by the median bandwidth heuristic.
const MEDIAN_CAP: usize = 2000;

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError::Invalid(msg.into()))
}

/// Either a number or the literal `"median"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    Median,
}

impl FromStr for Bandwidth {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self> {
        if s == "median" {
            return Ok(Bandwidth::Median);
        }
        s.parse::<f64>()
            .map(Bandwidth::Fixed)
            .map_err(|_| ConfigError::Invalid(format!("bandwidth must be a number or `median`, got `{s}`")))
    }
}

/// Number or `"auto"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaChoice {
    Auto,
    Fixed(f64),
}

impl FromStr for AlphaChoice {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(AlphaChoice::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(AlphaChoice::Fixed(v)),
            _ => invalid(format!("alpha must be a positive number or `auto`, got `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Subsample {
    /// From the subsample-size rule with the sample's uniform capacity.
    Auto,
    Fixed(usize),
    /// Fraction of `min(N, M)`, rounded up.
    Fraction(f64),
}

impl Subsample {
    pub fn resolve_fixed(&self, n: usize, m: usize) -> Option<usize> {
        let cap = n.min(m);
        match *self {
            Subsample::Auto => None,
            Subsample::Fixed(k) => Some(k.min(cap)),
            Subsample::Fraction(f) => Some(((f * cap as f64).ceil() as usize).clamp(1, cap)),
        }
    }
}

impl FromStr for Subsample {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Subsample::Auto);
        }
        if let Ok(k) = s.parse::<usize>() {
            if k == 0 {
                return invalid("subsample size must be positive");
            }
            return Ok(Subsample::Fixed(k));
        }
        match s.parse::<f64>() {
            Ok(f) if f > 0.0 && f <= 1.0 => Ok(Subsample::Fraction(f)),
            _ => invalid(format!("subsample must be `auto`, a positive integer or a fraction, got `{s}`")),
        }
    }
}

/// Strings or bare numbers in TOML.
#[derive(Deserialize)]
#[serde(untagged)]
enum Scalar {
    Str(String),
    Int(i64),
    Float(f64),
}

impl Scalar {
    fn text(&self) -> String {
        match self {
            Scalar::Str(s) => s.clone(),
            Scalar::Int(i) => i.to_string(),
            Scalar::Float(f) => {
                let s = f.to_string();
                if s.contains(['.', 'e', 'E']) {
                    s
                } else {
                    format!("{s}.0")
                }
            }
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    family: Option<String>,
    bandwidth: Option<Scalar>,
    degree: Option<u32>,
    offset: Option<f64>,
    radius: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PairSection {
    family: Option<String>,
    dim: Option<usize>,
    sigma_p: Option<f64>,
    sigma_q: Option<f64>,
    mean_q: Option<Vec<f64>>,
    components: Option<Vec<Component>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SelectionSection {
    s: Option<f64>,
    r: Option<f64>,
    delta: Option<f64>,
    c_sub: Option<f64>,
    regime: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    sizes: Option<Vec<[usize; 2]>>,
    seeds: Option<Vec<u64>>,
    alpha: Option<Scalar>,
    subsample: Option<Scalar>,
    mode: Option<String>,
    mc_points: Option<usize>,
    out: Option<PathBuf>,
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct BenchSection {
    nystrom_sizes: Option<Vec<usize>>,
    full_sizes: Option<Vec<usize>>,
    max_n: Option<usize>,
    max_full_n: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    kernel: KernelSection,
    #[serde(default)]
    pair: PairSection,
    #[serde(default)]
    selection: SelectionSection,
    #[serde(default)]
    experiment: ExperimentSection,
    #[serde(default)]
    bench: BenchSection,
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelKind {
    Gaussian,
    Laplacian,
    Polynomial { degree: u32, offset: f64, radius: f64 },
}

/// Kernel choice before the data dimension (and possibly the bandwidth) is known.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub bandwidth: Bandwidth,
}

impl KernelConfig {
    pub fn resolve(&self, xp: &Sample) -> rnd_core::Result<KernelSpec> {
        let dim = xp.dim();
        let bandwidth = match self.bandwidth {
            Bandwidth::Fixed(b) => b,
            Bandwidth::Median => median_heuristic(xp, MEDIAN_CAP),
        };
        let family = match self.kind {
            KernelKind::Gaussian => KernelFamily::Gaussian { bandwidth },
            KernelKind::Laplacian => KernelFamily::Laplacian { bandwidth },
            KernelKind::Polynomial { degree, offset, radius } => KernelFamily::Polynomial { degree, offset, radius },
        };
        KernelSpec::new(family, dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub nystrom_sizes: Vec<usize>,
    pub full_sizes: Vec<usize>,
    /// Largest N accepted for the Nystrom rows.
    pub max_n: usize,
    /// Largest N accepted for the full rows (dense N x N storage).
    pub max_full_n: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            nystrom_sizes: vec![2000, 4000, 8000, 16000],
            full_sizes: vec![250, 500, 1000, 2000],
            max_n: 100_000,
            max_full_n: 5000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub kernel: KernelConfig,
    pub pair: SyntheticPair,
    pub sizes: Vec<(usize, usize)>,
    pub seeds: Vec<u64>,
    pub policy: SelectionPolicy,
    pub alpha: AlphaChoice,
    pub subsample: Subsample,
    pub mode: FitMode,
    pub mc_points: usize,
    pub out: PathBuf,
    /// Seed for single-shot commands (`estimate`).
    pub seed: u64,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let idx = IndexFunctions::new(0.5, 0.5, Regime::InRkhs).expect("valid default");
        Self {
            kernel: KernelConfig { kind: KernelKind::Gaussian, bandwidth: Bandwidth::Fixed(1.0) },
            pair: SyntheticPair::default_pair(),
            sizes: [250, 500, 1000, 2000, 4000].iter().map(|&n| (n, n)).collect(),
            seeds: (1..=10).collect(),
            policy: SelectionPolicy::with_defaults(idx),
            alpha: AlphaChoice::Auto,
            subsample: Subsample::Auto,
            mode: FitMode::Nystrom,
            mc_points: 20_000,
            out: PathBuf::from("out"),
            seed: 0,
            bench: BenchConfig::default(),
        }
    }
}

/// Command-line overrides; `None` keeps the configured value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub kernel: Option<String>,
    pub bandwidth: Option<String>,
    pub alpha: Option<String>,
    pub s: Option<f64>,
    pub r: Option<f64>,
    pub delta: Option<f64>,
    pub c_sub: Option<f64>,
    pub regime: Option<String>,
    pub subsample: Option<String>,
    pub mode: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mc_points: Option<usize>,
}

fn parse_mode(s: &str) -> Result<FitMode> {
    match s {
        "nystrom" => Ok(FitMode::Nystrom),
        "full" => Ok(FitMode::Full),
        other => invalid(format!("mode must be `nystrom` or `full`, got `{other}`")),
    }
}

fn kernel_kind(name: &str, degree: Option<u32>, offset: Option<f64>, radius: Option<f64>) -> Result<KernelKind> {
    match name {
        "gaussian" => Ok(KernelKind::Gaussian),
        "laplacian" => Ok(KernelKind::Laplacian),
        "polynomial" => {
            let Some(radius) = radius else {
                return invalid("polynomial kernel requires a domain `radius`");
            };
            Ok(KernelKind::Polynomial { degree: degree.unwrap_or(2), offset: offset.unwrap_or(1.0), radius })
        }
        other => invalid(format!("unknown kernel family `{other}`")),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text)?;
        let mut cfg = RunConfig::default();

        let k = &file.kernel;
        if let Some(name) = &k.family {
            cfg.kernel.kind = kernel_kind(name, k.degree, k.offset, k.radius)?;
        }
        if let Some(b) = &k.bandwidth {
            cfg.kernel.bandwidth = b.text().parse()?;
        }

        let p = &file.pair;
        if p.family.is_some() || p.sigma_p.is_some() || p.sigma_q.is_some() || p.components.is_some() {
            let family = p.family.as_deref().unwrap_or("gauss_scale");
            let sigma_p = p.sigma_p.unwrap_or(1.0);
            cfg.pair = match family {
                "gauss_scale" => SyntheticPair::gauss_scale(p.dim.unwrap_or(1), sigma_p, p.sigma_q.unwrap_or(0.8))?,
                "gauss_shift_scale" => {
                    let mean = p.mean_q.clone().unwrap_or_else(|| vec![0.0; p.dim.unwrap_or(1)]);
                    SyntheticPair::gauss_shift_scale(sigma_p, mean, p.sigma_q.unwrap_or(0.8))?
                }
                "mixture_vs_gauss" => {
                    let Some(components) = p.components.clone() else {
                        return invalid("mixture_vs_gauss requires `components`");
                    };
                    SyntheticPair::mixture_vs_gauss(sigma_p, components)?
                }
                other => return invalid(format!("unknown pair family `{other}`")),
            };
        }

        let s = &file.selection;
        let regime = match &s.regime {
            Some(r) => r.parse::<Regime>()?,
            None => cfg.policy.idx.regime(),
        };
        let idx = IndexFunctions::new(s.s.unwrap_or(cfg.policy.idx.s()), s.r.unwrap_or(cfg.policy.idx.r()), regime)?;
        cfg.policy = SelectionPolicy::new(
            idx,
            s.delta.unwrap_or(cfg.policy.delta),
            s.c_sub.unwrap_or(cfg.policy.c_subsample),
        )?;

        let e = &file.experiment;
        if let Some(sizes) = &e.sizes {
            cfg.sizes = sizes.iter().map(|[n, m]| (*n, *m)).collect();
        }
        if let Some(seeds) = &e.seeds {
            cfg.seeds = seeds.clone();
        }
        if let Some(a) = &e.alpha {
            cfg.alpha = a.text().parse()?;
        }
        if let Some(sub) = &e.subsample {
            cfg.subsample = sub.text().parse()?;
        }
        if let Some(mode) = &e.mode {
            cfg.mode = parse_mode(mode)?;
        }
        if let Some(mc) = e.mc_points {
            cfg.mc_points = mc;
        }
        if let Some(out) = &e.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = e.seed {
            cfg.seed = seed;
        }

        let b = &file.bench;
        if let Some(v) = &b.nystrom_sizes {
            cfg.bench.nystrom_sizes = v.clone();
        }
        if let Some(v) = &b.full_sizes {
            cfg.bench.full_sizes = v.clone();
        }
        if let Some(v) = b.max_n {
            cfg.bench.max_n = v;
        }
        if let Some(v) = b.max_full_n {
            cfg.bench.max_full_n = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Applies flag overrides; flags win over the file.
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(k) = &o.kernel {
            let (degree, offset, radius) = match self.kernel.kind {
                KernelKind::Polynomial { degree, offset, radius } => (Some(degree), Some(offset), Some(radius)),
                _ => (None, None, None),
            };
            self.kernel.kind = kernel_kind(k, degree, offset, radius)?;
        }
        if let Some(b) = &o.bandwidth {
            self.kernel.bandwidth = b.parse()?;
        }
        if let Some(a) = &o.alpha {
            self.alpha = a.parse()?;
        }
        let regime = match &o.regime {
            Some(r) => r.parse::<Regime>()?,
            None => self.policy.idx.regime(),
        };
        let idx = IndexFunctions::new(o.s.unwrap_or(self.policy.idx.s()), o.r.unwrap_or(self.policy.idx.r()), regime)?;
        self.policy = SelectionPolicy::new(
            idx,
            o.delta.unwrap_or(self.policy.delta),
            o.c_sub.unwrap_or(self.policy.c_subsample),
        )?;
        if let Some(s) = &o.subsample {
            self.subsample = s.parse()?;
        }
        if let Some(m) = &o.mode {
            self.mode = parse_mode(m)?;
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(mc) = o.mc_points {
            self.mc_points = mc;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return invalid("size grid is empty");
        }
        if self.sizes.iter().any(|&(n, m)| n < 2 || m < 2) {
            return invalid("sample sizes must be at least 2");
        }
        if self.seeds.is_empty() {
            return invalid("seed list is empty");
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return invalid("seeds must be distinct");
        }
        if self.mc_points == 0 {
            return invalid("mc_points must be positive");
        }
        if self.bench.nystrom_sizes.iter().chain(&self.bench.full_sizes).any(|&n| n < 2) {
            return invalid("bench sizes must be at least 2");
        }
        Ok(())
    }
}

//! Versioned JSON model documents.
//!
//! ```json
//! {"format_version":1,
//!  "kernel":{"family":"gaussian","params":{"bandwidth":1.0},"d":1},
//!  "alpha":0.1,"n_full":100,"m_full":100,"mode":"nystrom",
//!  "p_centers":[[...]],"q_centers":[[...]],"c":[...],"c_prime_scalar":0.1}
//! ```
//!
//! Floats are written in the shortest decimal form that parses back to the
//! same bits, so a saved model evaluates identically after loading on any
//! platform.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{FitMode, RatioModel};
use crate::kernel::{KernelFamily, KernelSpec, Label, Sample};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
enum KernelParams {
    Gaussian { bandwidth: f64 },
    Laplacian { bandwidth: f64 },
    Polynomial { degree: u32, offset: f64, radius: f64 },
}

#[derive(Serialize, Deserialize)]
struct KernelDoc {
    #[serde(flatten)]
    params: KernelParams,
    d: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    kernel: KernelDoc,
    alpha: f64,
    n_full: usize,
    m_full: usize,
    mode: FitMode,
    p_centers: Vec<Vec<f64>>,
    q_centers: Vec<Vec<f64>>,
    c: Vec<f64>,
    c_prime_scalar: f64,
}

fn kernel_doc(k: &KernelSpec) -> KernelDoc {
    let params = match k.family() {
        KernelFamily::Gaussian { bandwidth } => KernelParams::Gaussian { bandwidth },
        KernelFamily::Laplacian { bandwidth } => KernelParams::Laplacian { bandwidth },
        KernelFamily::Polynomial { degree, offset, radius } => KernelParams::Polynomial { degree, offset, radius },
    };
    KernelDoc { params, d: k.dim() }
}

fn kernel_from_doc(doc: &KernelDoc) -> Result<KernelSpec> {
    let family = match doc.params {
        KernelParams::Gaussian { bandwidth } => KernelFamily::Gaussian { bandwidth },
        KernelParams::Laplacian { bandwidth } => KernelFamily::Laplacian { bandwidth },
        KernelParams::Polynomial { degree, offset, radius } => KernelFamily::Polynomial { degree, offset, radius },
    };
    KernelSpec::new(family, doc.d)
}

pub fn to_json(model: &RatioModel) -> Result<String> {
    let doc = ModelDoc {
        format_version: FORMAT_VERSION,
        kernel: kernel_doc(model.kernel()),
        alpha: model.alpha(),
        n_full: model.n_full(),
        m_full: model.m_full(),
        mode: model.mode(),
        p_centers: model.p_centers().to_rows(),
        q_centers: model.q_centers().to_rows(),
        c: model.c().to_vec(),
        c_prime_scalar: model.c_prime_scalar(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn from_json(text: &str) -> Result<RatioModel> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(doc.format_version));
    }
    let kernel = kernel_from_doc(&doc.kernel)?;
    let centers = |rows: &[Vec<f64>], label| {
        Sample::from_rows(rows, Some(label)).map_err(|e| Error::MalformedModel(e.to_string()))
    };
    let p = centers(&doc.p_centers, Label::P)?;
    let q = centers(&doc.q_centers, Label::Q)?;
    RatioModel::from_parts(kernel, doc.alpha, p, q, doc.c, doc.c_prime_scalar, doc.n_full, doc.m_full, doc.mode)
}

pub fn save(model: &RatioModel, path: &Path) -> Result<()> {
    fs::write(path, to_json(model)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<RatioModel> {
    from_json(&fs::read_to_string(path)?)
}

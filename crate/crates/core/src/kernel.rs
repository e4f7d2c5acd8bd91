//! Kernel functions and Gram matrix assembly.
//!
//! All kernels here are symmetric and positive definite. Gaussian and
//! Laplacian kernels are bounded by one on the whole space; the polynomial
//! kernel is only bounded on a ball, so it carries a declared domain radius
//! and rejects points outside it.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel family together with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-|x-y|^2 / (2 bandwidth^2))`
    Gaussian { bandwidth: f64 },
    /// `exp(-|x-y| / bandwidth)`
    Laplacian { bandwidth: f64 },
    /// `(<x,y> + offset)^degree` restricted to `|x| <= radius`.
    Polynomial { degree: u32, offset: f64, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    dim: usize,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("kernel dimension must be positive".into()));
        }
        match family {
            KernelFamily::Gaussian { bandwidth } | KernelFamily::Laplacian { bandwidth } => {
                if !(bandwidth.is_finite() && bandwidth > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "bandwidth must be positive and finite, got {bandwidth}"
                    )));
                }
            }
            KernelFamily::Polynomial { degree, offset, radius } => {
                if degree == 0 {
                    return Err(Error::InvalidParameter("polynomial degree must be positive".into()));
                }
                if !(offset.is_finite() && offset >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "polynomial offset must be non-negative, got {offset}"
                    )));
                }
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "polynomial kernel needs a finite positive domain radius, got {radius}"
                    )));
                }
            }
        }
        Ok(Self { family, dim })
    }

    pub fn gaussian(bandwidth: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Gaussian { bandwidth }, dim)
    }

    pub fn laplacian(bandwidth: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Laplacian { bandwidth }, dim)
    }

    pub fn polynomial(degree: u32, offset: f64, radius: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Polynomial { degree, offset, radius }, dim)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Bound `kappa` with `k(x,x) <= kappa^2` on the admissible domain.
    pub fn kappa(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian { .. } | KernelFamily::Laplacian { .. } => 1.0,
            KernelFamily::Polynomial { degree, offset, radius } => {
                (radius * radius + offset).powi(degree as i32).sqrt()
            }
        }
    }

    /// Evaluates `k(x, y)` after validating both points.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x, 0)?;
        self.check_point(y, 0)?;
        Ok(self.eval_unchecked(x, y))
    }

    /// Evaluates `k(x, y)` for points already known to be admissible.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian { bandwidth } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelFamily::Laplacian { bandwidth } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2.sqrt() / bandwidth).exp()
            }
            KernelFamily::Polynomial { degree, offset, .. } => {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                (dot + offset).powi(degree as i32)
            }
        }
    }

    fn check_point(&self, x: &[f64], row: usize) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        if let Some(col) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        if let KernelFamily::Polynomial { radius, .. } = self.family {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                return Err(Error::OutsideDomain { norm, radius });
            }
        }
        Ok(())
    }

    /// Checks that every point of `sample` is admissible for this kernel.
    pub fn check_sample(&self, sample: &Sample) -> Result<()> {
        if sample.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: sample.dim() });
        }
        if let KernelFamily::Polynomial { .. } = self.family {
            for i in 0..sample.len() {
                self.check_point(sample.row(i), i)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    P,
    Q,
}

/// A finite set of points in `R^d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    points: Array2<f64>,
    label: Option<Label>,
}

impl Sample {
    pub fn new(points: Array2<f64>, label: Option<Label>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::EmptySample);
        }
        for ((row, col), v) in points.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
        let points = points.as_standard_layout().into_owned();
        Ok(Self { points, label })
    }

    pub fn from_rows(rows: &[Vec<f64>], label: Option<Label>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let d = rows[0].len();
        let mut flat = Vec::with_capacity(n * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: r.len() });
            }
            flat.extend_from_slice(r);
        }
        let points = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Self::new(points, label)
    }

    /// One-dimensional sample from a slice of scalars.
    pub fn from_scalars(values: &[f64], label: Option<Label>) -> Result<Self> {
        let points = Array2::from_shape_vec((values.len(), 1), values.to_vec())
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Self::new(points, label)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn label(&self) -> Option<Label> {
        self.label
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn row_view(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Sample> {
        if indices.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidPlan(format!("index {bad} out of bounds for {} points", self.len())));
        }
        let points = self.points.select(ndarray::Axis(0), indices);
        Ok(Sample { points, label: self.label })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.points.outer_iter().map(|r| r.to_vec()).collect()
    }
}

/// Single evaluation with full validation.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.eval(x, y)
}

/// `G[i][j] = k(a_i, a_j)`. Only the upper triangle is evaluated; the lower
/// triangle is a mirror, so the result is exactly symmetric.
pub fn gram(spec: &KernelSpec, a: &Sample) -> Result<Array2<f64>> {
    spec.check_sample(a)?;
    let n = a.len();
    let mut g = Array2::<f64>::zeros((n, n));
    g.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            let xi = a.row(i);
            for (j, slot) in row.iter_mut().enumerate().skip(i) {
                *slot = spec.eval_unchecked(xi, a.row(j));
            }
        });
    for i in 1..n {
        for j in 0..i {
            g[[i, j]] = g[[j, i]];
        }
    }
    Ok(g)
}

/// `M[i][j] = k(a_i, b_j)`.
pub fn cross_gram(spec: &KernelSpec, a: &Sample, b: &Sample) -> Result<Array2<f64>> {
    spec.check_sample(a)?;
    spec.check_sample(b)?;
    let (na, nb) = (a.len(), b.len());
    let mut m = Array2::<f64>::zeros((na, nb));
    m.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(nb)
        .enumerate()
        .for_each(|(i, row)| {
            let xi = a.row(i);
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = spec.eval_unchecked(xi, b.row(j));
            }
        });
    Ok(m)
}

/// Row sums of the cross Gram matrix, `s_i = sum_j k(a_i, b_j)`, without
/// materializing it.
pub fn cross_gram_row_sums(spec: &KernelSpec, a: &Sample, b: &Sample) -> Result<Vec<f64>> {
    spec.check_sample(a)?;
    spec.check_sample(b)?;
    Ok((0..a.len())
        .into_par_iter()
        .map(|i| {
            let xi = a.row(i);
            (0..b.len()).map(|j| spec.eval_unchecked(xi, b.row(j))).sum()
        })
        .collect())
}

/// Median of pairwise Euclidean distances, a common bandwidth heuristic.
/// Uses at most the first `cap` points.
pub fn median_heuristic(sample: &Sample, cap: usize) -> f64 {
    let n = sample.len().min(cap.max(2));
    let mut d = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = sample
                .row(i)
                .iter()
                .zip(sample.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d.push(s.sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(|a, b| a.total_cmp(b));
    let med = d[d.len() / 2];
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

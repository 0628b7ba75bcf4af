//! Exact loss gradients and the central finite-difference oracle.
//!
//! The analytic path combines adjoint-mode statevector differentiation for
//! every circuit parameter with ordinary backpropagation through the head.
//! Per-sample gradients may be computed in parallel; they are always summed
//! in sample order so results do not depend on the thread count.

use rayon::prelude::*;

use crate::circuit::Workspace;
use crate::model::{Model, ModelError};
use crate::qconv::ImageTensor;

/// Labeled example borrowed from a dataset.
pub type SampleRef<'a> = (&'a ImageTensor, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl GradientVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The entries at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> GradientVector {
        GradientVector {
            names: indices.iter().map(|&i| self.names[i].clone()).collect(),
            values: indices.iter().map(|&i| self.values[i]).collect(),
        }
    }

    fn check_finite(&self) -> Result<(), ModelError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(ModelError::NonFinite(self.names[i].clone())),
            None => Ok(()),
        }
    }
}

/// Mean cross-entropy over `batch`.
pub fn batch_loss(model: &Model, batch: &[SampleRef<'_>]) -> Result<f64, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let losses: Vec<f64> = batch
        .par_iter()
        .map_init(Workspace::default, |ws, &(img, label)| {
            model.loss(img, label, ws)
        })
        .collect::<Result<_, _>>()?;
    Ok(losses.iter().sum::<f64>() / batch.len() as f64)
}

/// Per-batch outcome of a forward/backward pass.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub loss: f64,
    pub correct: usize,
    pub gradient: Vec<f64>,
}

/// Mean loss, number of arg-max hits, and the flat gradient.
pub fn loss_and_gradient(
    model: &Model,
    batch: &[SampleRef<'_>],
) -> Result<BatchResult, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let n = model.num_params();
    let scale = 1.0 / batch.len() as f64;
    let per_sample: Vec<(f64, bool, Vec<f64>)> = batch
        .par_iter()
        .map_init(Workspace::default, |ws, &(img, label)| {
            let mut g = vec![0.0; n];
            let (loss, probs) = model.loss_and_grad(img, label, scale, &mut g, ws)?;
            Ok((loss, argmax(&probs) == label, g))
        })
        .collect::<Result<_, ModelError>>()?;

    let mut gradient = vec![0.0; n];
    let mut loss = 0.0;
    let mut correct = 0;
    for (l, hit, g) in &per_sample {
        loss += l;
        correct += usize::from(*hit);
        for (acc, v) in gradient.iter_mut().zip(g) {
            *acc += v;
        }
    }
    Ok(BatchResult {
        loss: loss * scale,
        correct,
        gradient,
    })
}

/// d(mean cross-entropy)/d(every parameter).
pub fn loss_gradient(model: &Model, batch: &[SampleRef<'_>]) -> Result<GradientVector, ModelError> {
    let r = loss_and_gradient(model, batch)?;
    let gv = GradientVector {
        names: model.param_names(),
        values: r.gradient,
    };
    gv.check_finite()?;
    Ok(gv)
}

/// Central differences `(L(p + h) - L(p - h)) / 2h` for every parameter.
pub fn finite_diff_gradient(
    model: &Model,
    batch: &[SampleRef<'_>],
    h: f64,
) -> Result<GradientVector, ModelError> {
    let all: Vec<usize> = (0..model.num_params()).collect();
    finite_diff_subset(model, batch, h, &all)
}

/// Central differences for the parameters at `indices` (positions in
/// [`Model::flat_params`]).
pub fn finite_diff_subset(
    model: &Model,
    batch: &[SampleRef<'_>],
    h: f64,
    indices: &[usize],
) -> Result<GradientVector, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let base = model.flat_params();
    let names = model.param_names();
    let mut probe = model.clone();
    let mut p = base.clone();
    let mut values = Vec::with_capacity(indices.len());
    for &i in indices {
        p[i] = base[i] + h;
        probe.set_flat_params(&p);
        let up = batch_loss(&probe, batch)?;
        p[i] = base[i] - h;
        probe.set_flat_params(&p);
        let down = batch_loss(&probe, batch)?;
        p[i] = base[i];
        values.push((up - down) / (2.0 * h));
    }
    let gv = GradientVector {
        names: indices.iter().map(|&i| names[i].clone()).collect(),
        values,
    };
    gv.check_finite()?;
    Ok(gv)
}

/// Central differences of an arbitrary scalar function.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub const RELATIVE_FLOOR: f64 = 1e-7;

/// `|a - b| / max(|a|, |b|, 1e-7)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub name: String,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn compare(analytic: &GradientVector, numeric: &GradientVector) -> Self {
        let entries = analytic
            .names
            .iter()
            .zip(analytic.values.iter().zip(&numeric.values))
            .map(|(name, (&a, &n))| GradCheckEntry {
                name: name.clone(),
                analytic: a,
                numeric: n,
                rel_error: relative_error(a, n),
            })
            .collect();
        GradCheckReport { entries }
    }

    pub fn worst(&self) -> Option<&GradCheckEntry> {
        self.entries
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }

    pub fn max_rel_error(&self) -> f64 {
        self.worst().map_or(0.0, |e| e.rel_error)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.max_rel_error() < threshold
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_difference_of_square() {
        let g = central_difference(|x| x[0] * x[0], &[1.0], 1e-4);
        assert!((g[0] - 2.0).abs() < 1e-7);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 1e-2).abs() < 1e-12);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn argmax_first_of_ties() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
    }
}

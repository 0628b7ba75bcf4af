//! Hybrid model: quantum convolution filters feeding the classical head.

use thiserror::Error;

use crate::ansatz::{AnsatzError, ParamStore};
use crate::circuit::Workspace;
use crate::head::{cross_entropy, init_head_with, Head};
use crate::qconv::{ConvConfig, ImageTensor, QconvError, QuantumFilter, WevInit};
use crate::rng::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("non-finite value in `{0}`")]
    NonFinite(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error(transparent)]
    Qconv(#[from] QconvError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub conv: ConvConfig,
    pub filters: usize,
    pub hidden: usize,
    pub image_len: usize,
    pub image_width: usize,
    pub channels: usize,
    pub classes: usize,
    pub wev_init: WevInit,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.conv.validate()?;
        let bad = |m: &str| Err(ModelError::Spec(m.to_string()));
        if self.filters == 0 {
            return bad("at least one filter is required");
        }
        if self.hidden == 0 {
            return bad("hidden width must be at least 1");
        }
        if self.classes < 2 {
            return bad("at least two classes are required");
        }
        if self.channels == 0 {
            return bad("at least one channel is required");
        }
        self.conv.output_dims(self.image_len, self.image_width)?;
        Ok(())
    }

    pub fn grid(&self) -> (usize, usize) {
        self.conv
            .output_dims(self.image_len, self.image_width)
            .expect("validated spec")
    }

    pub fn feature_len(&self) -> usize {
        let (r, c) = self.grid();
        self.filters * r * c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    filters: Vec<QuantumFilter>,
    /// Start of each filter's parameters inside `quantum`.
    offsets: Vec<usize>,
    quantum: ParamStore,
    head: Head,
}

impl Model {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self, ModelError> {
        spec.validate()?;
        let mut rng = Rng::new(seed);
        let grid = spec.grid();
        let mut filters = Vec::with_capacity(spec.filters);
        let mut offsets = Vec::with_capacity(spec.filters);
        let mut quantum = ParamStore::new();
        for k in 0..spec.filters {
            let filter = QuantumFilter::new(spec.conv, spec.channels, grid, &format!("f{k}"))?;
            let values = filter.init_params(&mut rng, spec.wev_init);
            offsets.push(quantum.len());
            for (name, v) in filter.param_names().iter().zip(values) {
                quantum.insert(name.clone(), v)?;
            }
            filters.push(filter);
        }
        let head = init_head_with(spec.feature_len(), spec.hidden, spec.classes, &mut rng);
        Ok(Model {
            spec,
            filters,
            offsets,
            quantum,
            head,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn filters(&self) -> &[QuantumFilter] {
        &self.filters
    }

    pub fn quantum_params(&self) -> &ParamStore {
        &self.quantum
    }

    pub fn quantum_params_mut(&mut self) -> &mut ParamStore {
        &mut self.quantum
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut Head {
        &mut self.head
    }

    pub fn num_params(&self) -> usize {
        self.quantum.len() + self.head.num_params()
    }

    /// Quantum parameters (in filter order) followed by the head.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = self.quantum.names().to_vec();
        names.extend(self.head.param_names());
        names
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = self.quantum.values().to_vec();
        v.extend(self.head.flat_params());
        v
    }

    pub fn set_flat_params(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.num_params());
        let (q, h) = values.split_at(self.quantum.len());
        self.quantum.values_mut().copy_from_slice(q);
        self.head.set_flat_params(h);
    }

    fn check_image(&self, image: &ImageTensor) -> Result<(), ModelError> {
        if image.len() != self.spec.image_len
            || image.width() != self.spec.image_width
            || image.channels() != self.spec.channels
        {
            return Err(ModelError::Spec(format!(
                "image is {}x{}x{}, model expects {}x{}x{}",
                image.len(),
                image.width(),
                image.channels(),
                self.spec.image_len,
                self.spec.image_width,
                self.spec.channels
            )));
        }
        Ok(())
    }

    fn filter_params(&self, k: usize) -> &[f64] {
        let start = self.offsets[k];
        let end = start + self.filters[k].num_params();
        &self.quantum.values()[start..end]
    }

    /// Flattened feature maps, filter-major then row-major.
    pub fn features(
        &self,
        image: &ImageTensor,
        ws: &mut Workspace,
    ) -> Result<Vec<f64>, ModelError> {
        self.check_image(image)?;
        let mut out = Vec::with_capacity(self.spec.feature_len());
        for (k, filter) in self.filters.iter().enumerate() {
            let fm = filter.feature_map(image, self.filter_params(k), ws)?;
            out.extend(fm.values);
        }
        Ok(out)
    }

    pub fn predict(&self, image: &ImageTensor, ws: &mut Workspace) -> Result<Vec<f64>, ModelError> {
        let x = self.features(image, ws)?;
        Ok(self.head.forward(&x).probs)
    }

    pub fn loss(
        &self,
        image: &ImageTensor,
        label: usize,
        ws: &mut Workspace,
    ) -> Result<f64, ModelError> {
        self.check_label(label)?;
        Ok(cross_entropy(&self.predict(image, ws)?, label))
    }

    fn check_label(&self, label: usize) -> Result<(), ModelError> {
        if label >= self.spec.classes {
            return Err(ModelError::Label {
                label,
                classes: self.spec.classes,
            });
        }
        Ok(())
    }

    /// Loss, class probabilities and `scale * d loss / d params` (added into
    /// `grad`, laid out as [`Model::flat_params`]) for a single sample.
    pub fn loss_and_grad(
        &self,
        image: &ImageTensor,
        label: usize,
        scale: f64,
        grad: &mut [f64],
        ws: &mut Workspace,
    ) -> Result<(f64, Vec<f64>), ModelError> {
        self.check_image(image)?;
        self.check_label(label)?;
        let (rows, cols) = self.spec.grid();
        let positions = rows * cols;

        // per-window Jacobians of the filter output w.r.t. local parameters
        let mut features = Vec::with_capacity(self.spec.feature_len());
        let mut jacobians: Vec<Vec<f64>> = Vec::with_capacity(self.filters.len());
        for (k, filter) in self.filters.iter().enumerate() {
            let params = self.filter_params(k);
            let p = filter.num_params();
            let mut jac = vec![0.0; positions * p];
            for i in 0..rows {
                for j in 0..cols {
                    let pos = i * cols + j;
                    let windows = filter.windows_at(image, i, j)?;
                    let v = filter.evaluate_with_grad(
                        params,
                        &windows,
                        pos,
                        ws,
                        1.0,
                        &mut jac[pos * p..(pos + 1) * p],
                    )?;
                    features.push(v);
                }
            }
            jacobians.push(jac);
        }

        let trace = self.head.forward(&features);
        let loss = cross_entropy(&trace.probs, label);
        let nq = self.quantum.len();
        let dx = self
            .head
            .backward(&features, &trace, label, scale, &mut grad[nq..]);

        for (k, filter) in self.filters.iter().enumerate() {
            let p = filter.num_params();
            let g = &mut grad[self.offsets[k]..self.offsets[k] + p];
            let dfeat = &dx[k * positions..(k + 1) * positions];
            for (pos, &d) in dfeat.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &jacobians[k][pos * p..(pos + 1) * p];
                for (gi, &ji) in g.iter_mut().zip(row) {
                    *gi += d * ji;
                }
            }
        }
        Ok((loss, trace.probs))
    }

    /// Restores a model from its spec and a flat parameter vector.
    pub fn from_parts(spec: ModelSpec, values: &[f64]) -> Result<Self, ModelError> {
        let mut m = Model::new(spec, 0)?;
        if values.len() != m.num_params() {
            return Err(ModelError::Spec(format!(
                "expected {} parameters, got {}",
                m.num_params(),
                values.len()
            )));
        }
        m.set_flat_params(values);
        Ok(m)
    }
}

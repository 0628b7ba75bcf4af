//! Classical two-layer head, loss and Adam.

use crate::ansatz::xavier_bound;
use crate::rng::Rng;

pub const PROB_FLOOR: f64 = 1e-12;

/// Fully connected layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    /// Xavier-uniform weights, zero biases.
    pub fn xavier(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let bound = xavier_bound(inputs, outputs);
        let weights = (0..inputs * outputs)
            .map(|_| rng.uniform_range(-bound, bound))
            .collect();
        DenseLayer {
            inputs,
            outputs,
            weights,
            biases: vec![0.0; outputs],
        }
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.inputs);
        for (o, row) in self.weights.chunks_exact(self.inputs).enumerate() {
            out[o] = self.biases[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// Accumulates parameter gradients into `gw`/`gb` and writes the input
    /// gradient into `dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], gw: &mut [f64], gb: &mut [f64], dx: &mut [f64]) {
        dx.iter_mut().for_each(|v| *v = 0.0);
        for o in 0..self.outputs {
            let d = dy[o];
            gb[o] += d;
            if d == 0.0 {
                continue;
            }
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut gw[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += d * x[i];
                dx[i] += d * row[i];
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.biases)
            .all(|v| v.is_finite())
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln(max(p_label, 1e-12))`.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}

/// Hidden layer (ReLU) followed by the softmax output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct HeadTrace {
    pub pre: Vec<f64>,
    pub act: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Head {
    pub fn num_params(&self) -> usize {
        self.hidden.num_params() + self.output.num_params()
    }

    pub fn forward(&self, x: &[f64]) -> HeadTrace {
        let mut pre = vec![0.0; self.hidden.outputs];
        self.hidden.forward(x, &mut pre);
        let act: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
        let mut logits = vec![0.0; self.output.outputs];
        self.output.forward(&act, &mut logits);
        HeadTrace {
            probs: softmax(&logits),
            pre,
            act,
        }
    }

    /// Backward pass of `cross_entropy(probs, label)`. `grad` is laid out as
    /// `[hidden.w, hidden.b, output.w, output.b]`; returns d loss / d x.
    pub fn backward(
        &self,
        x: &[f64],
        trace: &HeadTrace,
        label: usize,
        scale: f64,
        grad: &mut [f64],
    ) -> Vec<f64> {
        let k = self.output.outputs;
        let mut dlogits = vec![0.0; k];
        if trace.probs[label] >= PROB_FLOOR {
            for (c, d) in dlogits.iter_mut().enumerate() {
                let target = if c == label { 1.0 } else { 0.0 };
                *d = scale * (trace.probs[c] - target);
            }
        }
        let (hw, rest) = grad.split_at_mut(self.hidden.weights.len());
        let (hb, rest) = rest.split_at_mut(self.hidden.biases.len());
        let (ow, ob) = rest.split_at_mut(self.output.weights.len());

        let mut dact = vec![0.0; self.hidden.outputs];
        self.output
            .backward(&trace.act, &dlogits, ow, ob, &mut dact);
        let dpre: Vec<f64> = dact
            .iter()
            .zip(&trace.pre)
            .map(|(&d, &p)| if p > 0.0 { d } else { 0.0 })
            .collect();
        let mut dx = vec![0.0; self.hidden.inputs];
        self.hidden.backward(x, &dpre, hw, hb, &mut dx);
        dx
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(&self.hidden.weights);
        v.extend_from_slice(&self.hidden.biases);
        v.extend_from_slice(&self.output.weights);
        v.extend_from_slice(&self.output.biases);
        v
    }

    pub fn set_flat_params(&mut self, v: &[f64]) {
        let mut off = 0;
        for buf in [
            &mut self.hidden.weights,
            &mut self.hidden.biases,
            &mut self.output.weights,
            &mut self.output.biases,
        ] {
            let n = buf.len();
            buf.copy_from_slice(&v[off..off + n]);
            off += n;
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.num_params());
        for (tag, layer) in [("hidden", &self.hidden), ("output", &self.output)] {
            for o in 0..layer.outputs {
                for i in 0..layer.inputs {
                    names.push(format!("head.{tag}.w.{o}.{i}"));
                }
            }
            for o in 0..layer.outputs {
                names.push(format!("head.{tag}.b.{o}"));
            }
        }
        names
    }
}

/// Xavier-initialised head for `inputs -> hidden -> classes`.
pub fn init_head(inputs: usize, hidden: usize, classes: usize, seed: u64) -> Head {
    let mut rng = Rng::new(seed);
    init_head_with(inputs, hidden, classes, &mut rng)
}

pub fn init_head_with(inputs: usize, hidden: usize, classes: usize, rng: &mut Rng) -> Head {
    Head {
        hidden: DenseLayer::xavier(inputs, hidden, rng),
        output: DenseLayer::xavier(hidden, classes, rng),
    }
}

pub fn head_forward(features: &[f64], head: &Head) -> Vec<f64> {
    head.forward(features).probs
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            t: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }
}

/// Bias-corrected Adam update, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_head_is_uniform() {
        let head = Head {
            hidden: DenseLayer::zeros(5, 4),
            output: DenseLayer::zeros(4, 7),
        };
        let p = head_forward(&[0.3, -0.1, 0.5, 0.9, 0.0], &head);
        for v in p {
            assert!((v - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_basics() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let a = softmax(&[0.3, -2.0, 1.7]);
        let b = softmax(&[100.3, 98.0, 101.7]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_values() {
        assert_eq!(cross_entropy(&[0.0, 1.0], 1), 0.0);
        assert!((cross_entropy(&[0.5, 0.5], 0) - std::f64::consts::LN_2).abs() < 1e-15);
        let uniform = vec![0.1; 10];
        assert!((cross_entropy(&uniform, 3) - 10f64.ln()).abs() < 1e-12);
        assert!((cross_entropy(&[1.0, 0.0], 1) - 1e12f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn adam_first_step() {
        let mut p = vec![0.5];
        let mut s = AdamState::new(1, 0.001);
        adam_step(&mut p, &[1.0], &mut s);
        let expected = 0.5 - 0.001 / (1.0 + 1e-7);
        assert!((p[0] - expected).abs() < 1e-15);
        let d1 = 0.5 - p[0];
        let before = p[0];
        adam_step(&mut p, &[1.0], &mut s);
        let d2 = before - p[0];
        assert!(d2 <= d1 * (1.0 + 1e-6));
    }

    #[test]
    fn adam_zero_gradient() {
        let mut p = vec![0.5, -1.0];
        let mut s = AdamState::new(2, 0.01);
        adam_step(&mut p, &[0.0, 0.0], &mut s);
        assert_eq!(p, vec![0.5, -1.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_head(81, 128, 10, 4);
        let b = init_head(81, 128, 10, 4);
        assert_eq!(a, b);
        let bound = (6.0f64 / 209.0).sqrt();
        assert!(a.hidden.weights.iter().all(|w| w.abs() <= bound));
        assert!(a.hidden.biases.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = Rng::new(5);
        let mut head = init_head_with(6, 5, 3, &mut rng);
        head.hidden
            .biases
            .iter_mut()
            .for_each(|b| *b = rng.uniform_range(-0.2, 0.2));
        let x: Vec<f64> = (0..6).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let label = 2;
        let trace = head.forward(&x);
        let mut grad = vec![0.0; head.num_params()];
        let dx = head.backward(&x, &trace, label, 1.0, &mut grad);
        let params = head.flat_params();
        let h = 1e-6;
        let loss = |hd: &Head, x: &[f64]| cross_entropy(&hd.forward(x).probs, label);
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += h;
            let mut hp = head.clone();
            hp.set_flat_params(&p);
            p[i] -= 2.0 * h;
            let mut hm = head.clone();
            hm.set_flat_params(&p);
            let fd = (loss(&hp, &x) - loss(&hm, &x)) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-7, "param {i}");
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (loss(&head, &xp) - loss(&head, &xm)) / (2.0 * h);
            assert!((fd - dx[i]).abs() < 1e-7);
        }
    }
}

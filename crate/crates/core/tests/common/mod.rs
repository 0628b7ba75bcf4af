//! Test-only reference implementations: a dense full-unitary simulator that
//! rebuilds every filter circuit from its documented layout, plus small
//! fixtures shared by several test targets.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use qmc_core::ansatz::ParamStore;
use qmc_core::qconv::{AnsatzKind, ConvConfig, Method};
use qmc_core::Rng;

pub type M2 = [[C; 2]; 2];

const I2: M2 = [
    [C::new(1.0, 0.0), C::new(0.0, 0.0)],
    [C::new(0.0, 0.0), C::new(1.0, 0.0)],
];
const P0: M2 = [
    [C::new(1.0, 0.0), C::new(0.0, 0.0)],
    [C::new(0.0, 0.0), C::new(0.0, 0.0)],
];
const P1: M2 = [
    [C::new(0.0, 0.0), C::new(0.0, 0.0)],
    [C::new(0.0, 0.0), C::new(1.0, 0.0)],
];

pub fn rx(t: f64) -> M2 {
    let (s, c) = (t / 2.0).sin_cos();
    [
        [C::new(c, 0.0), C::new(0.0, -s)],
        [C::new(0.0, -s), C::new(c, 0.0)],
    ]
}

pub fn rz(t: f64) -> M2 {
    [
        [C::from_polar(1.0, -t / 2.0), C::new(0.0, 0.0)],
        [C::new(0.0, 0.0), C::from_polar(1.0, t / 2.0)],
    ]
}

pub fn phase(t: f64) -> M2 {
    [
        [C::new(1.0, 0.0), C::new(0.0, 0.0)],
        [C::new(0.0, 0.0), C::from_polar(1.0, t)],
    ]
}

/// `X^t = e^{i pi t/2} (cos(pi t/2) I - i sin(pi t/2) X)`.
pub fn xpow(t: f64) -> M2 {
    let g = C::from_polar(1.0, PI * t / 2.0);
    let (s, c) = (PI * t / 2.0).sin_cos();
    [[g * c, g * C::new(0.0, -s)], [g * C::new(0.0, -s), g * c]]
}

pub fn hadamard() -> M2 {
    let h = C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

pub const PAULI_X: M2 = [
    [C::new(0.0, 0.0), C::new(1.0, 0.0)],
    [C::new(1.0, 0.0), C::new(0.0, 0.0)],
];
pub const PAULI_Z: M2 = [
    [C::new(1.0, 0.0), C::new(0.0, 0.0)],
    [C::new(0.0, 0.0), C::new(-1.0, 0.0)],
];

/// Dense `2^n x 2^n` matrix, row-major.
pub struct Dense {
    pub dim: usize,
    pub m: Vec<C>,
}

/// Kronecker product over all `n` qubits (qubit 0 least significant) of
/// `factors[q]`, identity where absent.
pub fn kron(n: usize, factors: &[(usize, M2)]) -> Dense {
    let mut per = vec![I2; n];
    for &(q, f) in factors {
        per[q] = f;
    }
    // build from the most significant qubit down
    let mut m = vec![C::new(1.0, 0.0)];
    let mut dim = 1;
    for q in (0..n).rev() {
        let f = per[q];
        let nd = dim * 2;
        let mut next = vec![C::new(0.0, 0.0); nd * nd];
        for i in 0..dim {
            for j in 0..dim {
                let v = m[i * dim + j];
                for a in 0..2 {
                    for b in 0..2 {
                        next[(i * 2 + a) * nd + (j * 2 + b)] = v * f[a][b];
                    }
                }
            }
        }
        m = next;
        dim = nd;
    }
    Dense { dim, m }
}

pub fn add(a: &Dense, b: &Dense) -> Dense {
    Dense {
        dim: a.dim,
        m: a.m.iter().zip(&b.m).map(|(x, y)| x + y).collect(),
    }
}

/// Full matrix of `g` on `target`, optionally controlled by `control`.
pub fn full_gate(n: usize, g: M2, target: usize, control: Option<usize>) -> Dense {
    match control {
        None => kron(n, &[(target, g)]),
        Some(c) => add(&kron(n, &[(c, P0)]), &kron(n, &[(c, P1), (target, g)])),
    }
}

pub fn matvec(a: &Dense, v: &[C]) -> Vec<C> {
    (0..a.dim)
        .map(|i| {
            a.m[i * a.dim..(i + 1) * a.dim]
                .iter()
                .zip(v)
                .map(|(x, y)| x * y)
                .sum()
        })
        .collect()
}

/// Gate list of a circuit on `n` qubits.
pub struct DenseCircuit {
    pub n: usize,
    pub gates: Vec<(M2, usize, Option<usize>)>,
}

impl DenseCircuit {
    pub fn new(n: usize) -> Self {
        DenseCircuit {
            n,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, g: M2, target: usize, control: Option<usize>) {
        self.gates.push((g, target, control));
    }

    /// `U_k ... U_1 |0>`, each `U_i` the dense embedding of one gate.
    pub fn state(&self) -> Vec<C> {
        let mut v = vec![C::new(0.0, 0.0); 1 << self.n];
        v[0] = C::new(1.0, 0.0);
        for &(g, t, c) in &self.gates {
            v = matvec(&full_gate(self.n, g, t, c), &v);
        }
        v
    }

    /// `<psi| P_q |psi>` with the observable built densely.
    pub fn expectation(&self, pauli: M2, qubit: usize) -> f64 {
        let psi = self.state();
        let obs = kron(self.n, &[(qubit, pauli)]);
        let o_psi = matvec(&obs, &psi);
        psi.iter()
            .zip(&o_psi)
            .map(|(a, b)| a.conj() * b)
            .sum::<C>()
            .re
    }
}

fn p(params: &ParamStore, name: &str) -> f64 {
    params
        .get(name)
        .unwrap_or_else(|| panic!("missing parameter {name}"))
}

/// Kernel block on `qubits`, parameters named `<prefix>.<label>.<k>`.
fn kernel(
    c: &mut DenseCircuit,
    kind: AnsatzKind,
    qubits: &[usize],
    params: &ParamStore,
    prefix: &str,
) {
    let n = qubits.len();
    match kind {
        AnsatzKind::U1 => {
            for (k, &q) in qubits.iter().enumerate() {
                c.push(rx(p(params, &format!("{prefix}.rx.{k}"))), q, None);
            }
            for (k, &q) in qubits.iter().enumerate() {
                c.push(rz(p(params, &format!("{prefix}.rz.{}", n + k))), q, None);
            }
            for k in 0..n {
                let t = p(params, &format!("{prefix}.cp.{}", 2 * n + k));
                c.push(phase(t), qubits[(k + 1) % n], Some(qubits[k]));
            }
        }
        AnsatzKind::U2 => {
            for (k, &q) in qubits.iter().enumerate() {
                c.push(xpow(p(params, &format!("{prefix}.x.{k}"))), q, None);
            }
            for k in 0..n - 1 {
                let t = p(params, &format!("{prefix}.cx.{}", n + k));
                c.push(xpow(t), qubits[k + 1], Some(qubits[k]));
            }
            let t = p(params, &format!("{prefix}.xf.{}", 2 * n - 1));
            c.push(xpow(t), qubits[0], None);
        }
    }
}

/// Reference output of one filter on per-channel windows.
pub fn oracle_forward(cfg: &ConvConfig, windows: &[Vec<f64>], params: &ParamStore) -> f64 {
    let area = cfg.filter_size * cfg.filter_size;
    match cfg.method {
        Method::Wev | Method::Control => {
            let mut total = 0.0;
            for (ch, w) in windows.iter().enumerate() {
                let mut c = DenseCircuit::new(area);
                for (q, &x) in w.iter().enumerate() {
                    c.push(rx(PI * x), q, None);
                }
                let qubits: Vec<usize> = (0..area).collect();
                kernel(&mut c, cfg.ansatz, &qubits, params, "f0.u");
                let e = c.expectation(PAULI_Z, 0);
                total += if cfg.method == Method::Wev {
                    p(params, &format!("f0.wev.w.{ch}")) * e + p(params, &format!("f0.wev.b.{ch}"))
                } else {
                    e
                };
            }
            total
        }
        Method::Co | Method::Pco | Method::PcoT => {
            let regs = if cfg.method == Method::Co {
                1
            } else {
                cfg.registers
            };
            let anc = if cfg.method == Method::PcoT {
                cfg.ancillas
            } else {
                1
            };
            let n = anc + regs * area;
            let reg = |r: usize, q: usize| anc + r * area + q;
            let mut c = DenseCircuit::new(n);
            for a in 0..anc {
                c.push(hadamard(), a, None);
            }
            let groups = windows.len().div_ceil(regs);
            let zero = vec![0.0; area];
            for g in 0..groups {
                for r in 0..regs {
                    let w = windows.get(g * regs + r).unwrap_or(&zero);
                    for (q, &x) in w.iter().enumerate() {
                        c.push(rx(PI * x), reg(r, q), None);
                    }
                }
                for r in 0..regs {
                    let qubits: Vec<usize> = (0..area).map(|q| reg(r, q)).collect();
                    kernel(&mut c, cfg.ansatz, &qubits, params, "f0.u");
                }
                if regs > 1 {
                    for k in 0..regs {
                        let t = p(params, &format!("f0.uc.cx.{k}"));
                        c.push(xpow(t), reg((k + 1) % regs, 0), Some(reg(k, 0)));
                    }
                }
                for r in 0..regs {
                    let slot = g * regs + r;
                    if cfg.cp_fanout {
                        for q in 0..area {
                            let t = p(params, &format!("f0.cp.{slot}.{q}"));
                            c.push(phase(t), reg(r, q), Some(r % anc));
                        }
                    } else {
                        let t = p(params, &format!("f0.cp.{slot}"));
                        c.push(phase(t), reg(r, 0), Some(r % anc));
                    }
                }
            }
            if anc > 1 {
                for a in 0..anc {
                    c.push(rx(p(params, &format!("f0.ua.rx.{a}"))), a, None);
                }
                for a in 0..anc - 1 {
                    let t = p(params, &format!("f0.ua.cx.{}", anc + a));
                    c.push(xpow(t), a + 1, Some(a));
                }
            }
            c.expectation(PAULI_X, 0)
        }
    }
}

/// Store with every name set to a uniform draw in `[-pi, pi)`.
pub fn random_params(names: &[String], rng: &mut Rng) -> ParamStore {
    let mut store = ParamStore::new();
    for n in names {
        store.insert(n.clone(), rng.uniform_range(-PI, PI)).unwrap();
    }
    store
}

pub fn random_windows(channels: usize, area: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..channels)
        .map(|_| (0..area).map(|_| rng.uniform()).collect())
        .collect()
}

use qmc_core::qconv::ImageTensor;
use qmc_core::{Model, ModelSpec, WevInit, Workspace};

/// Random image with values in `[0, 1)`.
pub fn random_image(len: usize, width: usize, channels: usize, rng: &mut Rng) -> ImageTensor {
    let data = (0..len * width * channels)
        .map(|_| rng.uniform() as f32)
        .collect();
    ImageTensor::new(len, width, channels, data).unwrap()
}

/// Conv settings for gradient checks: F=2 everywhere, two registers and two
/// ancillas where used.
pub fn small_conv(method: Method, ansatz: AnsatzKind) -> ConvConfig {
    ConvConfig {
        method,
        ansatz,
        filter_size: 2,
        registers: 2,
        ancillas: 2,
        ..Default::default()
    }
}

/// Smallest `|pre-activation|` of the head's hidden layer over `samples`.
pub fn relu_margin(model: &Model, samples: &[(ImageTensor, usize)]) -> f64 {
    let mut ws = Workspace::default();
    samples
        .iter()
        .flat_map(|(img, _)| {
            let x = model.features(img, &mut ws).unwrap();
            model.head().forward(&x).pre
        })
        .fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

/// A 3-class model on 3x3x3 images (2x2 feature map, hidden width 6) and
/// four labeled samples. Samples are redrawn until every hidden ReLU input
/// is at least 0.01 from its kink, so central differences stay valid.
pub fn small_problem(conv: ConvConfig, seed: u64) -> (Model, Vec<(ImageTensor, usize)>) {
    let spec = ModelSpec {
        conv,
        filters: 1,
        hidden: 6,
        image_len: 3,
        image_width: 3,
        channels: 3,
        classes: 3,
        wev_init: WevInit::Normal,
    };
    let model = Model::new(spec, seed).unwrap();
    let mut rng = Rng::with_stream(seed, 7);
    loop {
        let samples: Vec<_> = (0..4)
            .map(|k| (random_image(3, 3, 3, &mut rng), k % 3))
            .collect();
        if relu_margin(&model, &samples) > 1e-2 {
            return (model, samples);
        }
    }
}

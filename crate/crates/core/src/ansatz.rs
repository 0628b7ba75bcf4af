//! Parameterised unitary blocks used as convolution kernels and entanglers.
//!
//! Layouts (qubit lists are in the order given by the caller):
//!
//! * `U1` on n >= 2 qubits: `Rx(theta_i)` on every qubit, then `Rz(phi_i)` on
//!   every qubit, then a closed ring of controlled-phase gates where qubit k
//!   controls qubit k+1 (mod n). 3n parameters.
//! * `U2` on n >= 1 qubits: `X^theta_i` on every qubit, then a chain of
//!   controlled `X^lambda_j` (qubit k controls k+1), then `X^mu` on the first
//!   qubit. 2n parameters.
//! * `UC` over register lead qubits: a ring of controlled `X^theta` gates.
//!   Empty for a single register.
//! * `UA` over ancillas: `Rx(theta_i)` on every ancilla followed by a chain of
//!   controlled `X^lambda_j`. Empty for a single ancilla.

use std::collections::HashMap;

use thiserror::Error;

use crate::rng::Rng;
use crate::sim::{
    gate_phase, gate_rx, gate_rz, gate_xpow, GateOp, Mat2, SimError, Statevector, C64,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnsatzError {
    #[error("{kind:?} block needs at least {min} qubits, got {got}")]
    TooFewQubits {
        kind: BlockKind,
        min: usize,
        got: usize,
    },
    #[error("duplicate qubit {0} in block")]
    DuplicateQubit(usize),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{0}` already defined")]
    DuplicateParam(String),
    #[error("parameter `{name}` is not finite ({value})")]
    NonFinite { name: String, value: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    U1,
    U2,
    UC,
    UA,
}

/// Single-qubit gate families with one real parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGate {
    Rx,
    Rz,
    Phase,
    XPow,
}

impl ParamGate {
    pub fn matrix(self, value: f64) -> Mat2 {
        match self {
            ParamGate::Rx => gate_rx(value),
            ParamGate::Rz => gate_rz(value),
            ParamGate::Phase => gate_phase(value),
            ParamGate::XPow => gate_xpow(value),
        }
    }

    /// Element-wise derivative of `matrix(value)` with respect to `value`.
    pub fn derivative(self, value: f64) -> Mat2 {
        let i = C64::new(0.0, 1.0);
        let z = C64::new(0.0, 0.0);
        match self {
            ParamGate::Rx => {
                let (s, c) = (value / 2.0).sin_cos();
                let d = C64::new(-0.5 * s, 0.0);
                let o = C64::new(0.0, -0.5 * c);
                Mat2::new(d, o, o, d)
            }
            ParamGate::Rz => {
                let m = gate_rz(value);
                Mat2::diag(m.0[0][0] * (-0.5 * i), m.0[1][1] * (0.5 * i))
            }
            ParamGate::Phase => Mat2::diag(z, i * C64::from_polar(1.0, value)),
            ParamGate::XPow => {
                // d/dt of e^{i a} [[cos a, -i sin a], [-i sin a, cos a]], a = pi t / 2
                let k = std::f64::consts::PI / 2.0;
                let a = k * value;
                let g = C64::from_polar(1.0, a);
                let (s, c) = a.sin_cos();
                let diag = g * (i * c - s) * k;
                let off = g * (s - i * c) * k;
                Mat2::new(diag, off, off, diag)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockGate {
    pub gate: ParamGate,
    pub target: usize,
    pub control: Option<usize>,
    /// Index into the owning block's `param_names`.
    pub param: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzBlock {
    kind: BlockKind,
    qubits: Vec<usize>,
    param_names: Vec<String>,
    gates: Vec<BlockGate>,
}

impl AnsatzBlock {
    pub fn kind(&self) -> BlockKind {
        self.kind
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    pub fn gates(&self) -> &[BlockGate] {
        &self.gates
    }

    pub fn num_params(&self) -> usize {
        self.param_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Xavier bound with fan-in = fan-out = qubits spanned.
    pub fn xavier_bound(&self) -> f64 {
        xavier_bound(self.qubits.len(), self.qubits.len())
    }

    /// The same block (same parameter names) placed on other qubits.
    pub fn relocated(&self, qubits: &[usize]) -> AnsatzBlock {
        assert_eq!(
            qubits.len(),
            self.qubits.len(),
            "relocation must keep qubit count"
        );
        let map: HashMap<usize, usize> = self
            .qubits
            .iter()
            .copied()
            .zip(qubits.iter().copied())
            .collect();
        AnsatzBlock {
            kind: self.kind,
            qubits: qubits.to_vec(),
            param_names: self.param_names.clone(),
            gates: self
                .gates
                .iter()
                .map(|g| BlockGate {
                    target: map[&g.target],
                    control: g.control.map(|c| map[&c]),
                    ..*g
                })
                .collect(),
        }
    }

    pub fn gate_ops(&self, params: &ParamStore) -> Result<Vec<GateOp>, AnsatzError> {
        let values = self
            .param_names
            .iter()
            .map(|n| {
                params
                    .get(n)
                    .ok_or_else(|| AnsatzError::UnknownParam(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.gates
            .iter()
            .map(|g| {
                Ok(GateOp::new(
                    g.gate.matrix(values[g.param]),
                    g.target,
                    g.control,
                )?)
            })
            .collect()
    }

    pub fn apply(&self, state: &mut Statevector, params: &ParamStore) -> Result<(), AnsatzError> {
        for op in self.gate_ops(params)? {
            state.apply(&op)?;
        }
        Ok(())
    }
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn check_qubits(kind: BlockKind, qubits: &[usize], min: usize) -> Result<(), AnsatzError> {
    if qubits.len() < min {
        return Err(AnsatzError::TooFewQubits {
            kind,
            min,
            got: qubits.len(),
        });
    }
    let mut seen = qubits.to_vec();
    seen.sort_unstable();
    if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
        return Err(AnsatzError::DuplicateQubit(w[0]));
    }
    Ok(())
}

struct Builder {
    kind: BlockKind,
    qubits: Vec<usize>,
    prefix: String,
    param_names: Vec<String>,
    gates: Vec<BlockGate>,
}

impl Builder {
    fn new(kind: BlockKind, qubits: &[usize], prefix: &str) -> Self {
        Builder {
            kind,
            qubits: qubits.to_vec(),
            prefix: prefix.to_string(),
            param_names: Vec::new(),
            gates: Vec::new(),
        }
    }

    fn push(&mut self, gate: ParamGate, label: &str, target: usize, control: Option<usize>) {
        let param = self.param_names.len();
        self.param_names
            .push(format!("{}.{}.{}", self.prefix, label, param));
        self.gates.push(BlockGate {
            gate,
            target,
            control,
            param,
        });
    }

    fn finish(self) -> AnsatzBlock {
        AnsatzBlock {
            kind: self.kind,
            qubits: self.qubits,
            param_names: self.param_names,
            gates: self.gates,
        }
    }
}

pub fn build_u1(qubits: &[usize], prefix: &str) -> Result<AnsatzBlock, AnsatzError> {
    check_qubits(BlockKind::U1, qubits, 2)?;
    let mut b = Builder::new(BlockKind::U1, qubits, prefix);
    for &q in qubits {
        b.push(ParamGate::Rx, "rx", q, None);
    }
    for &q in qubits {
        b.push(ParamGate::Rz, "rz", q, None);
    }
    let n = qubits.len();
    for k in 0..n {
        b.push(ParamGate::Phase, "cp", qubits[(k + 1) % n], Some(qubits[k]));
    }
    Ok(b.finish())
}

pub fn build_u2(qubits: &[usize], prefix: &str) -> Result<AnsatzBlock, AnsatzError> {
    check_qubits(BlockKind::U2, qubits, 1)?;
    let mut b = Builder::new(BlockKind::U2, qubits, prefix);
    for &q in qubits {
        b.push(ParamGate::XPow, "x", q, None);
    }
    for w in qubits.windows(2) {
        b.push(ParamGate::XPow, "cx", w[1], Some(w[0]));
    }
    b.push(ParamGate::XPow, "xf", qubits[0], None);
    Ok(b.finish())
}

pub fn build_uc(register_leads: &[usize], prefix: &str) -> Result<AnsatzBlock, AnsatzError> {
    check_qubits(BlockKind::UC, register_leads, 1)?;
    let mut b = Builder::new(BlockKind::UC, register_leads, prefix);
    let n = register_leads.len();
    if n > 1 {
        for k in 0..n {
            b.push(
                ParamGate::XPow,
                "cx",
                register_leads[(k + 1) % n],
                Some(register_leads[k]),
            );
        }
    }
    Ok(b.finish())
}

pub fn build_ua(ancillas: &[usize], prefix: &str) -> Result<AnsatzBlock, AnsatzError> {
    check_qubits(BlockKind::UA, ancillas, 1)?;
    let mut b = Builder::new(BlockKind::UA, ancillas, prefix);
    if ancillas.len() > 1 {
        for &q in ancillas {
            b.push(ParamGate::Rx, "rx", q, None);
        }
        for w in ancillas.windows(2) {
            b.push(ParamGate::XPow, "cx", w[1], Some(w[0]));
        }
    }
    Ok(b.finish())
}

/// Named real parameters, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<f64>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: f64) -> Result<usize, AnsatzError> {
        let name = name.into();
        if !value.is_finite() {
            return Err(AnsatzError::NonFinite { name, value });
        }
        if self.index.contains_key(&name) {
            return Err(AnsatzError::DuplicateParam(name));
        }
        let idx = self.values.len();
        self.index.insert(name.clone(), idx);
        self.names.push(name);
        self.values.push(value);
        Ok(idx)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index.get(name).map(|&i| self.values[i])
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), AnsatzError> {
        let i = self.index_of(name)?;
        self.values[i] = value;
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Result<usize, AnsatzError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| AnsatzError::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().copied())
    }

    /// Every parameter set to the same value (handy for identity checks).
    pub fn filled(names: &[String], value: f64) -> Self {
        let mut s = ParamStore::new();
        for n in names {
            // duplicates are shared parameters; keep the first
            if !s.contains(n) {
                s.insert(n.clone(), value).expect("finite");
            }
        }
        s
    }
}

/// Xavier-uniform initial values for every distinct parameter of `blocks`.
/// A parameter shared by several blocks takes the bound of the first block
/// that declares it.
pub fn init_params_xavier(blocks: &[&AnsatzBlock], seed: u64) -> ParamStore {
    let mut rng = Rng::new(seed);
    let mut store = ParamStore::new();
    for block in blocks {
        let bound = block.xavier_bound();
        for name in block.param_names() {
            if store.contains(name) {
                continue;
            }
            let v = rng.uniform_range(-bound, bound);
            store.insert(name.clone(), v).expect("finite");
        }
    }
    store
}

//! Compiled parameterised circuits with forward evaluation and adjoint
//! differentiation.
//!
//! A [`Circuit`] is a template: gate angles refer either to a slot in a flat
//! parameter slice or to a pixel of an input window (angle-encoded as
//! `Rx(pi * x)`). Binding a template to concrete values fuses runs of
//! uncontrolled single-qubit gates on the same qubit into one 2x2 matrix;
//! gates on disjoint qubits commute, so the fused sequence is equivalent.
//!
//! The adjoint pass keeps two vectors, the state `psi` and the co-state
//! `lambda = O psi`, and walks the fused gates backwards. For a fused gate
//! `F = M_k ... M_1` the cross matrix `S_ab = sum conj(lambda_a) psi_b` over
//! the gate's index pairs gives every partial in closed form:
//! `d<O>/dtheta_j = 2 Re sum_ab (M_k..M_{j+1} dM_j M_{j-1}..M_1)_ab S_ab`.

use std::f64::consts::PI;

use crate::ansatz::{AnsatzBlock, ParamGate};
use crate::kernel::{self, SplitState};
use crate::sim::{gate_rx, Mat2, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpAngle {
    Fixed(Mat2),
    Param {
        gate: ParamGate,
        index: usize,
    },
    /// `Rx(pi * inputs[slot][pixel])`.
    Encode {
        slot: usize,
        pixel: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitOp {
    pub angle: OpAngle,
    pub target: usize,
    pub control: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    PauliZ(usize),
    /// Hadamard-basis measurement: `<Z>` after `H`, i.e. `<X>`.
    PauliX(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    ops: Vec<CircuitOp>,
    readout: Readout,
}

impl Circuit {
    pub fn new(num_qubits: usize, readout: Readout) -> Self {
        Circuit {
            num_qubits,
            ops: Vec::new(),
            readout,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn ops(&self) -> &[CircuitOp] {
        &self.ops
    }

    pub fn readout(&self) -> Readout {
        self.readout
    }

    pub fn set_readout(&mut self, readout: Readout) {
        self.readout = readout;
    }

    pub fn push_fixed(&mut self, matrix: Mat2, target: usize, control: Option<usize>) {
        self.push(OpAngle::Fixed(matrix), target, control);
    }

    pub fn push_param(
        &mut self,
        gate: ParamGate,
        index: usize,
        target: usize,
        control: Option<usize>,
    ) {
        self.push(OpAngle::Param { gate, index }, target, control);
    }

    pub fn push_encode(&mut self, slot: usize, pixel: usize, target: usize) {
        self.push(OpAngle::Encode { slot, pixel }, target, None);
    }

    /// Appends every gate of `block`, mapping its parameter names to local
    /// indices through `index_of`.
    pub fn push_block(&mut self, block: &AnsatzBlock, index_of: impl Fn(&str) -> usize) {
        let idx: Vec<usize> = block.param_names().iter().map(|n| index_of(n)).collect();
        for g in block.gates() {
            self.push_param(g.gate, idx[g.param], g.target, g.control);
        }
    }

    fn push(&mut self, angle: OpAngle, target: usize, control: Option<usize>) {
        assert!(target < self.num_qubits, "target {target} out of range");
        if let Some(c) = control {
            assert!(c < self.num_qubits && c != target, "bad control {c}");
        }
        self.ops.push(CircuitOp {
            angle,
            target,
            control,
        });
    }

    /// Longest chain of gates sharing a qubit (controls count as occupied).
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.num_qubits];
        for op in &self.ops {
            let mut d = level[op.target];
            if let Some(c) = op.control {
                d = d.max(level[c]);
            }
            level[op.target] = d + 1;
            if let Some(c) = op.control {
                level[c] = d + 1;
            }
        }
        level.into_iter().max().unwrap_or(0)
    }

    pub fn gate_count(&self) -> usize {
        self.ops.len()
    }

    pub fn count_where(&self, pred: impl Fn(&CircuitOp) -> bool) -> usize {
        self.ops.iter().filter(|op| pred(op)).count()
    }

    fn bind(&self, params: &[f64], inputs: &[&[f64]], ws: &mut Workspace, with_derivs: bool) {
        ws.gates.clear();
        ws.parts.clear();
        ws.pending.clear();
        ws.pending.resize(self.num_qubits, Vec::new());
        for op in &self.ops {
            let part = match op.angle {
                OpAngle::Fixed(m) => Part {
                    matrix: m,
                    deriv: None,
                },
                OpAngle::Param { gate, index } => {
                    let v = params[index];
                    Part {
                        matrix: gate.matrix(v),
                        deriv: with_derivs.then(|| (index, gate.derivative(v))),
                    }
                }
                OpAngle::Encode { slot, pixel } => Part {
                    matrix: gate_rx(PI * inputs[slot][pixel]),
                    deriv: None,
                },
            };
            match op.control {
                None => ws.pending[op.target].push(part),
                Some(c) => {
                    ws.flush(c);
                    ws.flush(op.target);
                    let start = ws.parts.len();
                    ws.parts.push(part);
                    ws.gates.push(FusedGate {
                        matrix: part.matrix,
                        target: op.target,
                        control: Some(c),
                        parts: start..start + 1,
                        has_params: part.deriv.is_some(),
                        diag_only: part.is_diagonal(),
                    });
                }
            }
        }
        for q in 0..self.num_qubits {
            ws.flush(q);
        }
    }

    fn run_forward(&self, ws: &mut Workspace) {
        ws.psi.reset(self.num_qubits);
        for g in &ws.gates {
            kernel::apply(&mut ws.psi, &g.matrix, g.target, g.control);
        }
    }

    fn measure(&self, state: &SplitState) -> f64 {
        match self.readout {
            Readout::PauliZ(q) => state.expectation_z(q),
            Readout::PauliX(q) => state.expectation_x(q),
        }
    }

    pub fn expectation(&self, params: &[f64], inputs: &[&[f64]], ws: &mut Workspace) -> f64 {
        self.bind(params, inputs, ws, false);
        self.run_forward(ws);
        self.measure(&ws.psi)
    }

    /// Final statevector amplitudes (for tests and inspection).
    pub fn final_state(&self, params: &[f64], inputs: &[&[f64]]) -> Vec<C64> {
        let mut ws = Workspace::default();
        self.bind(params, inputs, &mut ws, false);
        self.run_forward(&mut ws);
        ws.psi.to_complex()
    }

    /// Returns `<O>` and adds `scale * d<O>/dparams[i]` into `grad[i]`.
    pub fn expectation_and_grad(
        &self,
        params: &[f64],
        inputs: &[&[f64]],
        ws: &mut Workspace,
        scale: f64,
        grad: &mut [f64],
    ) -> f64 {
        self.bind(params, inputs, ws, true);
        self.run_forward(ws);
        let value = self.measure(&ws.psi);

        ws.lam.copy_from(&ws.psi);
        match self.readout {
            Readout::PauliZ(q) => ws.lam.negate_bit(q),
            Readout::PauliX(q) => ws.lam.flip_bit(q),
        }

        let Workspace {
            psi,
            lam,
            gates,
            parts,
            ..
        } = ws;
        for g in gates.iter().rev() {
            let s = kernel::unapply_pair(
                psi,
                lam,
                &g.matrix.adjoint(),
                g.target,
                g.control,
                g.has_params,
                g.diag_only,
            );
            if g.has_params {
                accumulate_partials(&parts[g.parts.clone()], &s, scale, grad);
            }
        }
        value
    }
}

#[derive(Debug, Clone, Copy)]
struct Part {
    matrix: Mat2,
    deriv: Option<(usize, Mat2)>,
}

impl Part {
    fn is_diagonal(&self) -> bool {
        self.matrix.is_diagonal() && self.deriv.is_none_or(|(_, d)| d.is_diagonal())
    }
}

#[derive(Debug, Clone)]
struct FusedGate {
    matrix: Mat2,
    target: usize,
    control: Option<usize>,
    parts: std::ops::Range<usize>,
    has_params: bool,
    /// Every part and derivative is diagonal, so only the diagonal of the
    /// cross matrix matters.
    diag_only: bool,
}

/// Reusable scratch buffers for circuit evaluation.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    psi: SplitState,
    lam: SplitState,
    gates: Vec<FusedGate>,
    parts: Vec<Part>,
    pending: Vec<Vec<Part>>,
}

impl Workspace {
    fn flush(&mut self, q: usize) {
        if self.pending[q].is_empty() {
            return;
        }
        let start = self.parts.len();
        let mut matrix = Mat2::IDENTITY;
        let mut has_params = false;
        let mut diag_only = true;
        for p in self.pending[q].drain(..) {
            matrix = p.matrix * matrix;
            has_params |= p.deriv.is_some();
            diag_only &= p.is_diagonal();
            self.parts.push(p);
        }
        self.gates.push(FusedGate {
            matrix,
            target: q,
            control: None,
            parts: start..self.parts.len(),
            has_params,
            diag_only,
        });
    }
}

fn accumulate_partials(parts: &[Part], s: &[[C64; 2]; 2], scale: f64, grad: &mut [f64]) {
    let k = parts.len();
    // suffix[j] = M_k ... M_{j+1}
    let mut suffix = vec![Mat2::IDENTITY; k];
    for j in (0..k.saturating_sub(1)).rev() {
        suffix[j] = suffix[j + 1] * parts[j + 1].matrix;
    }
    let mut prefix = Mat2::IDENTITY;
    for (j, p) in parts.iter().enumerate() {
        if let Some((index, dm)) = p.deriv {
            let full = suffix[j] * dm * prefix;
            let acc: C64 = full
                .0
                .iter()
                .flatten()
                .zip(s.iter().flatten())
                .map(|(x, y)| x * y)
                .sum();
            grad[index] += scale * 2.0 * acc.re;
        }
        prefix = p.matrix * prefix;
    }
}

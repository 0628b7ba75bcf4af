//! Dense statevector simulation.
//!
//! Qubit `q` is bit `q` of the amplitude index: qubit 0 is the least
//! significant bit. Every kernel, oracle and circuit layout in this crate
//! relies on that convention.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

pub const MAX_QUBITS: usize = 20;
const UNITARY_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("qubit count {0} outside supported range 1..={MAX_QUBITS}")]
    QubitCount(usize),
    #[error("qubit index {index} out of range for a {num_qubits}-qubit state")]
    QubitIndex { index: usize, num_qubits: usize },
    #[error("control and target are both qubit {0}")]
    ControlIsTarget(usize),
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
}

/// A 2x2 complex matrix, row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);

    pub fn new(m00: C64, m01: C64, m10: C64, m11: C64) -> Self {
        Mat2([[m00, m01], [m10, m11]])
    }

    pub fn diag(d0: C64, d1: C64) -> Self {
        Mat2([[d0, ZERO], [ZERO, d1]])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2::new(
            m[0][0].conj(),
            m[1][0].conj(),
            m[0][1].conj(),
            m[1][1].conj(),
        )
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn is_diagonal(&self) -> bool {
        self.0[0][1] == ZERO && self.0[1][0] == ZERO
    }

    /// Max-abs deviation of `M^dagger M` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.adjoint() * *self;
        let mut err: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let target = if r == c { ONE } else { ZERO };
                err = err.max((p.0[r][c] - target).norm());
            }
        }
        err
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut err: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                err = err.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        err
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.0;
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            m[0][0], m[0][1], m[1][0], m[1][1]
        )
    }
}

/// Standard rotation about the Pauli-X axis, `exp(-i theta X / 2)`.
pub fn gate_rx(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    let off = C64::new(0.0, -s);
    Mat2::new(C64::new(c, 0.0), off, off, C64::new(c, 0.0))
}

/// Rotation about the Pauli-Z axis, `diag(e^{-i theta/2}, e^{i theta/2})`.
pub fn gate_rz(theta: f64) -> Mat2 {
    Mat2::diag(
        C64::from_polar(1.0, -theta / 2.0),
        C64::from_polar(1.0, theta / 2.0),
    )
}

pub fn gate_h() -> Mat2 {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    Mat2::new(h, h, h, -h)
}

pub fn gate_phase(theta: f64) -> Mat2 {
    Mat2::diag(ONE, C64::from_polar(1.0, theta))
}

/// Fractional power of X with the global phase `e^{i pi t / 2}`.
pub fn gate_xpow(t: f64) -> Mat2 {
    let half = PI * t / 2.0;
    let g = C64::from_polar(1.0, half);
    let (s, c) = half.sin_cos();
    let diag = g * c;
    let off = g * C64::new(0.0, -s);
    Mat2::new(diag, off, off, diag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn matrix(self) -> Mat2 {
        match self {
            PauliAxis::X => Mat2::new(ZERO, ONE, ONE, ZERO),
            PauliAxis::Y => Mat2::new(ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO),
            PauliAxis::Z => Mat2::diag(ONE, -ONE),
        }
    }
}

/// A single-qubit unitary on `target`, optionally conditioned on `control`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateOp {
    matrix: Mat2,
    target: usize,
    control: Option<usize>,
}

impl GateOp {
    pub fn new(matrix: Mat2, target: usize, control: Option<usize>) -> Result<Self, SimError> {
        let err = matrix.unitarity_error();
        if err > UNITARY_TOL {
            return Err(SimError::NotUnitary(err));
        }
        if control == Some(target) {
            return Err(SimError::ControlIsTarget(target));
        }
        Ok(GateOp {
            matrix,
            target,
            control,
        })
    }

    pub fn single(matrix: Mat2, target: usize) -> Result<Self, SimError> {
        Self::new(matrix, target, None)
    }

    pub fn controlled(matrix: Mat2, control: usize, target: usize) -> Result<Self, SimError> {
        Self::new(matrix, target, Some(control))
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.matrix
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn control(&self) -> Option<usize> {
        self.control
    }
}

#[derive(Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amps: Vec<C64>,
}

impl fmt::Debug for Statevector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Statevector")
            .field("num_qubits", &self.num_qubits)
            .field("amps", &self.amps)
            .finish()
    }
}

impl Statevector {
    /// The all-zeros basis state.
    pub fn new(num_qubits: usize) -> Result<Self, SimError> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(SimError::QubitCount(num_qubits));
        }
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[0] = ONE;
        Ok(Statevector { num_qubits, amps })
    }

    /// Wraps raw amplitudes. The caller is responsible for normalisation.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self, SimError> {
        let n = amps.len().trailing_zeros() as usize;
        if !amps.len().is_power_of_two() || !(1..=MAX_QUBITS).contains(&n) {
            return Err(SimError::QubitCount(n));
        }
        Ok(Statevector {
            num_qubits: n,
            amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    /// Resets to |0...0> without reallocating.
    pub fn reset(&mut self) {
        self.amps.fill(ZERO);
        self.amps[0] = ONE;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<(), SimError> {
        if q >= self.num_qubits {
            return Err(SimError::QubitIndex {
                index: q,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<(), SimError> {
        self.check_qubit(gate.target)?;
        if let Some(c) = gate.control {
            self.check_qubit(c)?;
        }
        apply_mat2(&mut self.amps, &gate.matrix, gate.target, gate.control);
        Ok(())
    }

    pub fn expectation_z(&self, qubit: usize) -> Result<f64, SimError> {
        self.check_qubit(qubit)?;
        Ok(expectation_z_raw(&self.amps, qubit))
    }

    /// `<X>` on `qubit`: the Z expectation after a Hadamard on that qubit.
    pub fn expectation_hadamard_basis(&self, qubit: usize) -> Result<f64, SimError> {
        self.check_qubit(qubit)?;
        Ok(expectation_x_raw(&self.amps, qubit))
    }

    pub fn expectation(&self, axis: PauliAxis, qubit: usize) -> Result<f64, SimError> {
        self.check_qubit(qubit)?;
        let m = axis.matrix();
        let mut acc = 0.0;
        for_each_pair(self.amps.len(), qubit, |i, j| {
            let (a, b) = (self.amps[i], self.amps[j]);
            let ma = m.0[0][0] * a + m.0[0][1] * b;
            let mb = m.0[1][0] * a + m.0[1][1] * b;
            acc += (a.conj() * ma + b.conj() * mb).re;
        });
        Ok(acc)
    }
}

/// Calls `f(i, i | bit)` for every index pair differing only in `qubit`.
#[inline]
pub(crate) fn for_each_pair(len: usize, qubit: usize, mut f: impl FnMut(usize, usize)) {
    let stride = 1usize << qubit;
    let mut base = 0;
    while base < len {
        for i in base..base + stride {
            f(i, i + stride);
        }
        base += stride << 1;
    }
}

/// Calls `f(lo, hi, n)` for runs of `n` index pairs `(lo + k, hi + k)` that
/// differ only in bit `target` and have the `control` bit set (if any).
#[inline(always)]
pub(crate) fn for_each_run(
    len: usize,
    target: usize,
    control: Option<usize>,
    mut f: impl FnMut(usize, usize, usize),
) {
    let st = 1usize << target;
    match control {
        None => {
            for base in (0..len).step_by(st << 1) {
                f(base, base + st, st);
            }
        }
        Some(c) if c > target => {
            let sc = 1usize << c;
            for block in (sc..len).step_by(sc << 1) {
                for base in (block..block + sc).step_by(st << 1) {
                    f(base, base + st, st);
                }
            }
        }
        Some(c) => {
            let sc = 1usize << c;
            for base in (0..len).step_by(st << 1) {
                for sub in (base + sc..base + st).step_by(sc << 1) {
                    f(sub, sub + st, sc);
                }
            }
        }
    }
}

/// Splits `amps` into the two disjoint runs `[lo, lo + n)` and `[hi, hi + n)`.
#[inline(always)]
pub(crate) fn run_pair(
    amps: &mut [C64],
    lo: usize,
    hi: usize,
    n: usize,
) -> (&mut [C64], &mut [C64]) {
    let (a, b) = amps.split_at_mut(hi);
    (&mut a[lo..lo + n], &mut b[..n])
}

/// In-place 2x2 kernel over raw amplitudes; no range checks beyond slicing.
pub(crate) fn apply_mat2(amps: &mut [C64], m: &Mat2, target: usize, control: Option<usize>) {
    let len = amps.len();
    if m.is_diagonal() {
        let (d0, d1) = (m.0[0][0], m.0[1][1]);
        let skip0 = d0 == ONE;
        for_each_run(len, target, control, |lo, hi, n| {
            let (a, b) = run_pair(amps, lo, hi, n);
            if !skip0 {
                a.iter_mut().for_each(|x| *x *= d0);
            }
            b.iter_mut().for_each(|x| *x *= d1);
        });
        return;
    }
    let [[m00, m01], [m10, m11]] = m.0;
    for_each_run(len, target, control, |lo, hi, n| {
        let (a, b) = run_pair(amps, lo, hi, n);
        for (a, b) in a.iter_mut().zip(b.iter_mut()) {
            let (x, y) = (*a, *b);
            *a = m00 * x + m01 * y;
            *b = m10 * x + m11 * y;
        }
    });
}

pub(crate) fn expectation_z_raw(amps: &[C64], qubit: usize) -> f64 {
    let mask = 1usize << qubit;
    amps.iter()
        .enumerate()
        .map(|(i, a)| {
            if i & mask == 0 {
                a.norm_sqr()
            } else {
                -a.norm_sqr()
            }
        })
        .sum()
}

pub(crate) fn expectation_x_raw(amps: &[C64], qubit: usize) -> f64 {
    let mut acc = 0.0;
    for_each_pair(amps.len(), qubit, |i, j| {
        acc += 2.0 * (amps[i].conj() * amps[j]).re;
    });
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    fn state(amps: &[C64]) -> Statevector {
        Statevector::from_amplitudes(amps.to_vec()).unwrap()
    }

    fn applied(mut s: Statevector, m: Mat2, target: usize, control: Option<usize>) -> Statevector {
        s.apply(&GateOp::new(m, target, control).unwrap()).unwrap();
        s
    }

    #[test]
    fn fresh_states() {
        assert_eq!(Statevector::new(1).unwrap().amplitudes(), &[ONE, ZERO]);
        assert_eq!(
            Statevector::new(2).unwrap().amplitudes(),
            &[ONE, ZERO, ZERO, ZERO]
        );
        let s = Statevector::new(5).unwrap();
        assert_eq!(s.amplitudes().len(), 32);
        assert_eq!(s.amplitudes()[0], ONE);
        assert!(Statevector::new(0).is_err());
        assert!(Statevector::new(MAX_QUBITS + 1).is_err());
    }

    #[test]
    fn rotation_values() {
        assert!(gate_rx(0.0).max_abs_diff(&Mat2::diag(ONE, ONE)) < 1e-15);
        let s = applied(Statevector::new(1).unwrap(), gate_rx(PI), 0, None);
        assert!(close(s.amplitudes()[0], ZERO));
        assert!(close(s.amplitudes()[1], C64::new(0.0, -1.0)));
        let s = applied(Statevector::new(1).unwrap(), gate_rx(PI / 2.0), 0, None);
        assert!(close(s.amplitudes()[0], C64::new(FRAC_1_SQRT_2, 0.0)));
        assert!(close(s.amplitudes()[1], C64::new(0.0, -FRAC_1_SQRT_2)));
    }

    #[test]
    fn hadamard_values() {
        let plus = applied(Statevector::new(1).unwrap(), gate_h(), 0, None);
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        assert!(close(plus.amplitudes()[0], h) && close(plus.amplitudes()[1], h));
        let minus = applied(state(&[ZERO, ONE]), gate_h(), 0, None);
        assert!(close(minus.amplitudes()[0], h) && close(minus.amplitudes()[1], -h));
        let back = applied(plus, gate_h(), 0, None);
        assert!(close(back.amplitudes()[0], ONE) && close(back.amplitudes()[1], ZERO));
    }

    #[test]
    fn phase_and_xpow_values() {
        assert!(gate_phase(0.0).max_abs_diff(&Mat2::diag(ONE, ONE)) < 1e-15);
        assert!(gate_phase(PI).max_abs_diff(&PauliAxis::Z.matrix()) < 1e-15);
        assert!(gate_xpow(0.0).max_abs_diff(&Mat2::diag(ONE, ONE)) < 1e-15);
        assert!(gate_xpow(1.0).max_abs_diff(&PauliAxis::X.matrix()) < 1e-15);
        let half = gate_xpow(0.5);
        for row in half.0 {
            for v in row {
                assert!((v.norm() - FRAC_1_SQRT_2).abs() < 1e-12);
            }
        }
        assert!(half.unitarity_error() < 1e-12);
        // two half powers make a full flip
        assert!((half * half).max_abs_diff(&PauliAxis::X.matrix()) < 1e-12);
    }

    #[test]
    fn controlled_gates() {
        // control clear: |00> untouched
        let s = applied(
            Statevector::new(2).unwrap(),
            PauliAxis::X.matrix(),
            1,
            Some(0),
        );
        assert_eq!(s.amplitudes()[0], ONE);
        // |11> picks up the phase
        let theta = 0.7;
        let s = applied(
            state(&[ZERO, ZERO, ZERO, ONE]),
            gate_phase(theta),
            1,
            Some(0),
        );
        assert!(close(s.amplitudes()[3], C64::from_polar(1.0, theta)));
        // qubit 0 is the least significant bit
        let s = applied(Statevector::new(2).unwrap(), PauliAxis::X.matrix(), 0, None);
        assert_eq!(s.amplitudes()[1], ONE);
    }

    #[test]
    fn expectation_values() {
        let zero = Statevector::new(1).unwrap();
        let one = state(&[ZERO, ONE]);
        assert_eq!(zero.expectation_z(0).unwrap(), 1.0);
        assert_eq!(one.expectation_z(0).unwrap(), -1.0);
        let plus = applied(zero.clone(), gate_h(), 0, None);
        let minus = applied(one, gate_h(), 0, None);
        assert!(plus.expectation_z(0).unwrap().abs() < 1e-12);
        assert!((plus.expectation_hadamard_basis(0).unwrap() - 1.0).abs() < 1e-12);
        assert!((minus.expectation_hadamard_basis(0).unwrap() + 1.0).abs() < 1e-12);
        assert!(zero.expectation_hadamard_basis(0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn invalid_gates_are_rejected() {
        let bad = Mat2::new(ONE, ONE, ZERO, ONE);
        assert!(matches!(
            GateOp::single(bad, 0),
            Err(SimError::NotUnitary(_))
        ));
        assert!(matches!(
            GateOp::controlled(gate_h(), 1, 1),
            Err(SimError::ControlIsTarget(1))
        ));
        let mut s = Statevector::new(2).unwrap();
        assert!(s.apply(&GateOp::single(gate_h(), 2).unwrap()).is_err());
        assert!(s.expectation_z(5).is_err());
    }
}

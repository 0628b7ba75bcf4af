//! Multi-channel quantum convolution.
//!
//! Qubit layout for the sequential methods (CO, PCO, PCO-T): working
//! register `r` occupies qubits `r*F^2 .. (r+1)*F^2`, its first qubit being
//! the register lead; ancillas follow at `R*F^2 + a`. Channels are consumed
//! in groups of `R` (CO is the `R = 1` case) and the working qubits are
//! re-encoded for every group without reset. Channel counts that are not a
//! multiple of `R` are padded with all-zero windows.
//!
//! WEV and Control evaluate a fresh `F^2`-qubit circuit per channel and read
//! `<Z>` on qubit 0.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ansatz::{
    build_u1, build_u2, build_ua, build_uc, xavier_bound, AnsatzBlock, AnsatzError, ParamGate,
    ParamStore,
};
use crate::circuit::{Circuit, Readout, Workspace};
use crate::rng::Rng;
use crate::sim::gate_h;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QconvError {
    #[error("invalid convolution config: {0}")]
    Config(String),
    #[error("no channel windows supplied")]
    NoChannels,
    #[error("window length {got} does not match filter area {expected}")]
    WindowLength { expected: usize, got: usize },
    #[error(
        "window at ({l}, {w}) channel {c} with size {f} exceeds image {len}x{width}x{channels}"
    )]
    WindowBounds {
        l: usize,
        w: usize,
        c: usize,
        f: usize,
        len: usize,
        width: usize,
        channels: usize,
    },
    #[error("image tensor: {0}")]
    Image(String),
    #[error("expected {expected} channels, image has {got}")]
    ChannelCount { expected: usize, got: usize },
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Co,
    Pco,
    PcoT,
    Wev,
    Control,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Co,
        Method::Pco,
        Method::PcoT,
        Method::Wev,
        Method::Control,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Co => "co",
            Method::Pco => "pco",
            Method::PcoT => "pcot",
            Method::Wev => "wev",
            Method::Control => "control",
        }
    }

    pub fn is_sequential(self) -> bool {
        matches!(self, Method::Co | Method::Pco | Method::PcoT)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "co" => Ok(Method::Co),
            "pco" => Ok(Method::Pco),
            "pcot" | "pco-t" => Ok(Method::PcoT),
            "wev" => Ok(Method::Wev),
            "control" => Ok(Method::Control),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnsatzKind {
    U1,
    U2,
}

impl fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnsatzKind::U1 => "u1",
            AnsatzKind::U2 => "u2",
        })
    }
}

impl FromStr for AnsatzKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "u1" => Ok(AnsatzKind::U1),
            "u2" => Ok(AnsatzKind::U2),
            other => Err(format!("unknown ansatz `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvConfig {
    pub filter_size: usize,
    pub stride: usize,
    pub method: Method,
    /// Working registers (PCO, PCO-T).
    pub registers: usize,
    /// Ancilla qubits (PCO-T).
    pub ancillas: usize,
    pub ansatz: AnsatzKind,
    /// Controlled phase from the ancilla to every working qubit instead of
    /// only the register lead.
    pub cp_fanout: bool,
    /// WEV weights indexed by output position as well as channel.
    pub wev_per_position: bool,
}

impl Default for ConvConfig {
    fn default() -> Self {
        ConvConfig {
            filter_size: 2,
            stride: 1,
            method: Method::Co,
            registers: 3,
            ancillas: 3,
            ansatz: AnsatzKind::U1,
            cp_fanout: false,
            wev_per_position: false,
        }
    }
}

impl ConvConfig {
    pub fn new(method: Method, filter_size: usize) -> Self {
        ConvConfig {
            method,
            filter_size,
            ..Default::default()
        }
    }

    pub fn area(&self) -> usize {
        self.filter_size * self.filter_size
    }

    /// Registers actually used by the method.
    pub fn effective_registers(&self) -> usize {
        match self.method {
            Method::Pco | Method::PcoT => self.registers,
            _ => 1,
        }
    }

    pub fn effective_ancillas(&self) -> usize {
        match self.method {
            Method::Co | Method::Pco => 1,
            Method::PcoT => self.ancillas,
            Method::Wev | Method::Control => 0,
        }
    }

    /// Circuit width in qubits.
    pub fn qubit_width(&self) -> usize {
        self.effective_registers() * self.area() + self.effective_ancillas()
    }

    pub fn validate(&self) -> Result<(), QconvError> {
        let bad = |m: &str| Err(QconvError::Config(m.to_string()));
        if self.filter_size == 0 {
            return bad("filter size must be at least 1");
        }
        if self.stride == 0 {
            return bad("stride must be at least 1");
        }
        if self.registers == 0 {
            return bad("register count must be at least 1");
        }
        if self.ancillas == 0 {
            return bad("ancilla count must be at least 1");
        }
        if self.ansatz == AnsatzKind::U1 && self.area() < 2 {
            return bad("the u1 ansatz needs a filter area of at least 2 qubits");
        }
        if self.qubit_width() > crate::sim::MAX_QUBITS {
            return Err(QconvError::Config(format!(
                "circuit width {} exceeds {} qubits",
                self.qubit_width(),
                crate::sim::MAX_QUBITS
            )));
        }
        Ok(())
    }

    /// Output grid for an `len x width` input.
    pub fn output_dims(&self, len: usize, width: usize) -> Result<(usize, usize), QconvError> {
        let f = self.filter_size;
        if f > len || f > width {
            return Err(QconvError::Config(format!(
                "filter {f} larger than image {len}x{width}"
            )));
        }
        Ok(((len - f) / self.stride + 1, (width - f) / self.stride + 1))
    }
}

/// Real-valued `L x W x C` tensor, row-major with channels last, values in
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    len: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(
        len: usize,
        width: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, QconvError> {
        if len == 0 || width == 0 || channels == 0 {
            return Err(QconvError::Image("dimensions must be positive".into()));
        }
        if data.len() != len * width * channels {
            return Err(QconvError::Image(format!(
                "expected {} values, got {}",
                len * width * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(QconvError::Image(format!("value {v} outside [0, 1]")));
        }
        Ok(ImageTensor {
            len,
            width,
            channels,
            data,
        })
    }

    pub fn filled(
        len: usize,
        width: usize,
        channels: usize,
        value: f32,
    ) -> Result<Self, QconvError> {
        Self::new(len, width, channels, vec![value; len * width * channels])
    }

    /// Builds from a function of `(l, w, c)`; values are validated.
    pub fn from_fn(
        len: usize,
        width: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> f32,
    ) -> Result<Self, QconvError> {
        let mut data = Vec::with_capacity(len * width * channels);
        for l in 0..len {
            for w in 0..width {
                for c in 0..channels {
                    data.push(f(l, w, c));
                }
            }
        }
        Self::new(len, width, channels, data)
    }

    /// Rows, not element count.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, l: usize, w: usize, c: usize) -> f32 {
        self.data[(l * self.width + w) * self.channels + c]
    }

    /// Row-major flattening of the `f x f` patch of channel `c` at `(l, w)`.
    pub fn extract_window(
        &self,
        l: usize,
        w: usize,
        c: usize,
        f: usize,
    ) -> Result<Vec<f64>, QconvError> {
        if f == 0 || l + f > self.len || w + f > self.width || c >= self.channels {
            return Err(QconvError::WindowBounds {
                l,
                w,
                c,
                f,
                len: self.len,
                width: self.width,
                channels: self.channels,
            });
        }
        let mut out = Vec::with_capacity(f * f);
        for dl in 0..f {
            for dw in 0..f {
                out.push(self.get(l + dl, w + dw, c) as f64);
            }
        }
        Ok(out)
    }
}

/// Per-window convolution outputs, `rows x cols` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl FeatureMap {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }
}

/// How WEV weights and biases are initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WevInit {
    /// `w ~ N(1, 0.1^2)`, `b ~ N(0, 0.1^2)`.
    Normal,
    /// Xavier-uniform with fan-in = channels, fan-out = 1.
    Xavier,
}

#[derive(Debug, Clone, PartialEq)]
struct WevLayout {
    /// Local index of the first weight; biases follow all weights.
    weights: usize,
    biases: usize,
    per_position: bool,
}

/// One quantum convolution filter: a compiled circuit template plus the
/// local parameter list it reads from.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumFilter {
    cfg: ConvConfig,
    channels: usize,
    grid: (usize, usize),
    circuit: Circuit,
    blocks: Vec<AnsatzBlock>,
    param_names: Vec<String>,
    /// Xavier bound per local parameter (WEV entries carry 0 and use
    /// `WevInit` instead).
    init_bounds: Vec<f64>,
    wev: Option<WevLayout>,
}

impl QuantumFilter {
    /// Builds the filter for `channels` input channels and an output grid of
    /// `grid` positions; parameter names are prefixed with `prefix`.
    pub fn new(
        cfg: ConvConfig,
        channels: usize,
        grid: (usize, usize),
        prefix: &str,
    ) -> Result<Self, QconvError> {
        cfg.validate()?;
        if channels == 0 {
            return Err(QconvError::NoChannels);
        }
        let area = cfg.area();
        let mut names: Vec<String> = Vec::new();
        let mut bounds: Vec<f64> = Vec::new();
        let mut blocks = Vec::new();

        let kernel_qubits: Vec<usize> = (0..area).collect();
        let kernel = match cfg.ansatz {
            AnsatzKind::U1 => build_u1(&kernel_qubits, &format!("{prefix}.u"))?,
            AnsatzKind::U2 => build_u2(&kernel_qubits, &format!("{prefix}.u"))?,
        };
        register_block(&kernel, &mut names, &mut bounds);

        let circuit = if cfg.method.is_sequential() {
            let regs = cfg.effective_registers();
            let anc = cfg.effective_ancillas();
            // ancillas on the low qubits, register r on anc + r*area ..
            let reg = |r: usize, p: usize| anc + r * area + p;
            let leads: Vec<usize> = (0..regs).map(|r| reg(r, 0)).collect();
            let ancillas: Vec<usize> = (0..anc).collect();
            let uc = build_uc(&leads, &format!("{prefix}.uc"))?;
            let ua = build_ua(&ancillas, &format!("{prefix}.ua"))?;
            register_block(&uc, &mut names, &mut bounds);
            register_block(&ua, &mut names, &mut bounds);

            let groups = channels.div_ceil(regs);
            let cp_bound = xavier_bound(2, 2);
            let mut cp_index = Vec::new();
            for slot in 0..groups * regs {
                if cfg.cp_fanout {
                    let row: Vec<usize> = (0..area)
                        .map(|q| {
                            push_name(
                                &mut names,
                                &mut bounds,
                                format!("{prefix}.cp.{slot}.{q}"),
                                cp_bound,
                            )
                        })
                        .collect();
                    cp_index.push(row);
                } else {
                    let i = push_name(
                        &mut names,
                        &mut bounds,
                        format!("{prefix}.cp.{slot}"),
                        cp_bound,
                    );
                    cp_index.push(vec![i]);
                }
            }

            let lookup = |n: &str| names.iter().position(|m| m == n).expect("registered");
            let mut c = Circuit::new(cfg.qubit_width(), Readout::PauliX(ancillas[0]));
            for &a in &ancillas {
                c.push_fixed(gate_h(), a, None);
            }
            let reg_blocks: Vec<AnsatzBlock> = (0..regs)
                .map(|r| kernel.relocated(&(0..area).map(|p| reg(r, p)).collect::<Vec<_>>()))
                .collect();
            for g in 0..groups {
                for r in 0..regs {
                    let slot = g * regs + r;
                    for p in 0..area {
                        c.push_encode(slot, p, reg(r, p));
                    }
                }
                for b in &reg_blocks {
                    c.push_block(b, lookup);
                }
                c.push_block(&uc, lookup);
                for r in 0..regs {
                    let slot = g * regs + r;
                    let anc_q = ancillas[r % anc];
                    for (k, &pi) in cp_index[slot].iter().enumerate() {
                        c.push_param(ParamGate::Phase, pi, reg(r, k), Some(anc_q));
                    }
                }
            }
            c.push_block(&ua, lookup);
            blocks.push(kernel);
            blocks.push(uc);
            blocks.push(ua);
            c
        } else {
            let lookup = |n: &str| names.iter().position(|m| m == n).expect("registered");
            let mut c = Circuit::new(area, Readout::PauliZ(0));
            for p in 0..area {
                c.push_encode(0, p, p);
            }
            c.push_block(&kernel, lookup);
            blocks.push(kernel);
            c
        };

        let wev = if cfg.method == Method::Wev {
            let count = if cfg.wev_per_position {
                grid.0 * grid.1 * channels
            } else {
                channels
            };
            let weights = names.len();
            for k in 0..count {
                let label = wev_label(cfg.wev_per_position, grid, channels, k);
                push_name(
                    &mut names,
                    &mut bounds,
                    format!("{prefix}.wev.w.{label}"),
                    0.0,
                );
            }
            let biases = names.len();
            for k in 0..count {
                let label = wev_label(cfg.wev_per_position, grid, channels, k);
                push_name(
                    &mut names,
                    &mut bounds,
                    format!("{prefix}.wev.b.{label}"),
                    0.0,
                );
            }
            Some(WevLayout {
                weights,
                biases,
                per_position: cfg.wev_per_position,
            })
        } else {
            None
        };

        Ok(QuantumFilter {
            cfg,
            channels,
            grid,
            circuit,
            blocks,
            param_names: names,
            init_bounds: bounds,
            wev,
        })
    }

    pub fn config(&self) -> &ConvConfig {
        &self.cfg
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn blocks(&self) -> &[AnsatzBlock] {
        &self.blocks
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    pub fn num_params(&self) -> usize {
        self.param_names.len()
    }

    /// Number of channel groups the sequential circuit walks through.
    pub fn groups(&self) -> usize {
        self.channels.div_ceil(self.cfg.effective_registers())
    }

    /// Initial values: Xavier-uniform for circuit parameters, `wev_init` for
    /// WEV weights and biases.
    pub fn init_params(&self, rng: &mut Rng, wev_init: WevInit) -> Vec<f64> {
        let mut values = Vec::with_capacity(self.num_params());
        for &b in &self.init_bounds {
            values.push(if b > 0.0 {
                rng.uniform_range(-b, b)
            } else {
                0.0
            });
        }
        if let Some(w) = &self.wev {
            let count = w.biases - w.weights;
            let xb = xavier_bound(self.channels, 1);
            for k in 0..count {
                values[w.weights + k] = match wev_init {
                    WevInit::Normal => rng.normal(1.0, 0.1),
                    WevInit::Xavier => rng.uniform_range(-xb, xb),
                };
            }
            for k in 0..count {
                values[w.biases + k] = match wev_init {
                    WevInit::Normal => rng.normal(0.0, 0.1),
                    WevInit::Xavier => rng.uniform_range(-xb, xb),
                };
            }
        }
        values
    }

    /// Gathers this filter's parameters from a named store.
    pub fn gather(&self, store: &ParamStore) -> Result<Vec<f64>, QconvError> {
        self.param_names
            .iter()
            .map(|n| {
                store
                    .get(n)
                    .ok_or_else(|| AnsatzError::UnknownParam(n.clone()).into())
            })
            .collect()
    }

    fn check_windows(&self, windows: &[Vec<f64>]) -> Result<(), QconvError> {
        if windows.is_empty() {
            return Err(QconvError::NoChannels);
        }
        if windows.len() != self.channels {
            return Err(QconvError::ChannelCount {
                expected: self.channels,
                got: windows.len(),
            });
        }
        let area = self.cfg.area();
        if let Some(w) = windows.iter().find(|w| w.len() != area) {
            return Err(QconvError::WindowLength {
                expected: area,
                got: w.len(),
            });
        }
        Ok(())
    }

    /// Filter output for one window position (`position` indexes the output
    /// grid row-major; only per-position WEV weights depend on it).
    pub fn evaluate(
        &self,
        params: &[f64],
        windows: &[Vec<f64>],
        position: usize,
        ws: &mut Workspace,
    ) -> Result<f64, QconvError> {
        self.check_windows(windows)?;
        Ok(self.evaluate_inner(params, windows, position, ws, None))
    }

    /// Output and its gradient with respect to every local parameter,
    /// scaled by `scale` and added into `grad`.
    pub fn evaluate_with_grad(
        &self,
        params: &[f64],
        windows: &[Vec<f64>],
        position: usize,
        ws: &mut Workspace,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<f64, QconvError> {
        self.check_windows(windows)?;
        Ok(self.evaluate_inner(params, windows, position, ws, Some((scale, grad))))
    }

    fn evaluate_inner(
        &self,
        params: &[f64],
        windows: &[Vec<f64>],
        position: usize,
        ws: &mut Workspace,
        mut grad: Option<(f64, &mut [f64])>,
    ) -> f64 {
        if self.cfg.method.is_sequential() {
            let zero = vec![0.0; self.cfg.area()];
            let slots = self.groups() * self.cfg.effective_registers();
            let inputs: Vec<&[f64]> = (0..slots)
                .map(|s| windows.get(s).map_or(zero.as_slice(), Vec::as_slice))
                .collect();
            return match grad {
                None => self.circuit.expectation(params, &inputs, ws),
                Some((scale, g)) => self
                    .circuit
                    .expectation_and_grad(params, &inputs, ws, scale, g),
            };
        }
        let mut total = 0.0;
        for (c, window) in windows.iter().enumerate() {
            let inputs: [&[f64]; 1] = [window];
            let (wi, bi) = match &self.wev {
                Some(w) => {
                    let k = if w.per_position {
                        position * self.channels + c
                    } else {
                        c
                    };
                    (Some(w.weights + k), Some(w.biases + k))
                }
                None => (None, None),
            };
            let weight = wi.map_or(1.0, |i| params[i]);
            let bias = bi.map_or(0.0, |i| params[i]);
            let e = match grad.as_mut() {
                None => self.circuit.expectation(params, &inputs, ws),
                Some((scale, g)) => {
                    let e =
                        self.circuit
                            .expectation_and_grad(params, &inputs, ws, *scale * weight, g);
                    if let (Some(wi), Some(bi)) = (wi, bi) {
                        g[wi] += *scale * e;
                        g[bi] += *scale;
                    }
                    e
                }
            };
            total += e * weight + bias;
        }
        total
    }

    /// All channel windows at output position `(i, j)`.
    pub fn windows_at(
        &self,
        image: &ImageTensor,
        i: usize,
        j: usize,
    ) -> Result<Vec<Vec<f64>>, QconvError> {
        let (l, w) = (i * self.cfg.stride, j * self.cfg.stride);
        (0..image.channels())
            .map(|c| image.extract_window(l, w, c, self.cfg.filter_size))
            .collect()
    }

    pub fn check_image(&self, image: &ImageTensor) -> Result<(), QconvError> {
        if image.channels() != self.channels {
            return Err(QconvError::ChannelCount {
                expected: self.channels,
                got: image.channels(),
            });
        }
        let dims = self.cfg.output_dims(image.len(), image.width())?;
        if dims != self.grid {
            return Err(QconvError::Config(format!(
                "image yields a {}x{} grid, filter built for {}x{}",
                dims.0, dims.1, self.grid.0, self.grid.1
            )));
        }
        Ok(())
    }

    /// Slides the filter over `image`.
    pub fn feature_map(
        &self,
        image: &ImageTensor,
        params: &[f64],
        ws: &mut Workspace,
    ) -> Result<FeatureMap, QconvError> {
        self.check_image(image)?;
        let (rows, cols) = self.grid;
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let windows = self.windows_at(image, i, j)?;
                values.push(self.evaluate_inner(params, &windows, i * cols + j, ws, None));
            }
        }
        Ok(FeatureMap { rows, cols, values })
    }
}

fn wev_label(per_position: bool, grid: (usize, usize), channels: usize, k: usize) -> String {
    if per_position {
        let pos = k / channels;
        format!("{}.{}.{}", pos / grid.1, pos % grid.1, k % channels)
    } else {
        k.to_string()
    }
}

fn push_name(names: &mut Vec<String>, bounds: &mut Vec<f64>, name: String, bound: f64) -> usize {
    names.push(name);
    bounds.push(bound);
    names.len() - 1
}

fn register_block(block: &AnsatzBlock, names: &mut Vec<String>, bounds: &mut Vec<f64>) {
    let b = block.xavier_bound();
    for n in block.param_names() {
        push_name(names, bounds, n.clone(), b);
    }
}

/// Applies `Rx(pi * x_i)` to `working_qubits[i]` for each window element.
pub fn encode_channel(
    state: &mut crate::sim::Statevector,
    window: &[f64],
    working_qubits: &[usize],
) -> Result<(), QconvError> {
    if window.len() != working_qubits.len() {
        return Err(QconvError::WindowLength {
            expected: working_qubits.len(),
            got: window.len(),
        });
    }
    for (&x, &q) in window.iter().zip(working_qubits) {
        let op = crate::sim::GateOp::single(crate::sim::gate_rx(std::f64::consts::PI * x), q)
            .map_err(AnsatzError::from)?;
        state.apply(&op).map_err(AnsatzError::from)?;
    }
    Ok(())
}

/// Evaluates a single-filter circuit whose parameters are named with the
/// `f0` prefix in `params`.
pub fn forward(
    windows: &[Vec<f64>],
    params: &ParamStore,
    cfg: &ConvConfig,
) -> Result<f64, QconvError> {
    if windows.is_empty() {
        return Err(QconvError::NoChannels);
    }
    let filter = QuantumFilter::new(*cfg, windows.len(), (1, 1), "f0")?;
    let local = filter.gather(params)?;
    filter.evaluate(&local, windows, 0, &mut Workspace::default())
}

fn forward_as(
    method: Method,
    windows: &[Vec<f64>],
    params: &ParamStore,
    cfg: &ConvConfig,
) -> Result<f64, QconvError> {
    let cfg = ConvConfig { method, ..*cfg };
    forward(windows, params, &cfg)
}

pub fn co_forward(
    windows: &[Vec<f64>],
    params: &ParamStore,
    cfg: &ConvConfig,
) -> Result<f64, QconvError> {
    forward_as(Method::Co, windows, params, cfg)
}

pub fn pco_forward(
    windows: &[Vec<f64>],
    params: &ParamStore,
    cfg: &ConvConfig,
) -> Result<f64, QconvError> {
    forward_as(Method::Pco, windows, params, cfg)
}

pub fn pcot_forward(
    windows: &[Vec<f64>],
    params: &ParamStore,
    cfg: &ConvConfig,
) -> Result<f64, QconvError> {
    forward_as(Method::PcoT, windows, params, cfg)
}

pub fn wev_forward(
    windows: &[Vec<f64>],
    params: &ParamStore,
    cfg: &ConvConfig,
) -> Result<f64, QconvError> {
    forward_as(Method::Wev, windows, params, cfg)
}

pub fn control_forward(
    windows: &[Vec<f64>],
    params: &ParamStore,
    cfg: &ConvConfig,
) -> Result<f64, QconvError> {
    forward_as(Method::Control, windows, params, cfg)
}

/// Names of every parameter the single-filter evaluators read for `cfg`
/// and `channels` channels.
pub fn param_names_for(cfg: &ConvConfig, channels: usize) -> Result<Vec<String>, QconvError> {
    Ok(QuantumFilter::new(*cfg, channels, (1, 1), "f0")?
        .param_names()
        .to_vec())
}

/// Sliding-window convolution of `image` with a single filter whose
/// parameters are read from `params` (prefix `f0`).
pub fn conv2d_quantum(
    image: &ImageTensor,
    params: &ParamStore,
    cfg: &ConvConfig,
) -> Result<FeatureMap, QconvError> {
    let grid = cfg.output_dims(image.len(), image.width())?;
    let filter = QuantumFilter::new(*cfg, image.channels(), grid, "f0")?;
    let local = filter.gather(params)?;
    filter.feature_map(image, &local, &mut Workspace::default())
}

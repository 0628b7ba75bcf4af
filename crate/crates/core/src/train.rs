//! Training harness: run configuration, the epoch loop with per-epoch CSV
//! metrics, evaluation, model files, resource reports and gradient checks.
//!
//! Seeds: synthetic datasets are generated from `seed`, model parameters
//! are initialised from `seed + 1`, and batch order is drawn from stream
//! `SHUFFLE_STREAM` of `seed`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::circuit::Workspace;
use crate::datasets::{
    gen_high_channel, gen_noisy_colors, gen_noisy_shapes, load_cifar10, load_dataset,
    read_sections, save_dataset, write_sections, DatasetError, DatasetKind, DatasetPair,
    LabeledDataset, Section, SectionData, Split, CIFAR_CLASS_ORDER,
};
use crate::gradients::{
    argmax, finite_diff_subset, loss_and_gradient, loss_gradient, GradCheckReport, SampleRef,
};
use crate::head::{adam_step, cross_entropy, AdamState};
use crate::model::{Model, ModelError, ModelSpec};
use crate::qconv::{AnsatzKind, ConvConfig, Method, QuantumFilter, WevInit};
use crate::rng::Rng;

pub const SHUFFLE_STREAM: u64 = 1 << 48;
pub const METRICS_HEADER: &str = "epoch,train_loss,train_acc,test_loss,test_acc,seconds";
pub const METRICS_FILE: &str = "metrics.csv";
pub const MODEL_FILE: &str = "model.qmc";
pub const CONFIG_FILE: &str = "config.txt";
pub const TRAIN_DATA_FILE: &str = "train.qmc";
pub const TEST_DATA_FILE: &str = "test.qmc";
pub const DATA_DIR_ENV: &str = "QMC_DATA_DIR";

const CIFAR_TRAIN_PER_CLASS: usize = 500;
const CIFAR_TEST_PER_CLASS: usize = 100;
const CIFAR_DEFAULT_CLASSES: usize = 2;
const SIDE: usize = 10;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn config_err(msg: impl Into<String>) -> TrainError {
    TrainError::Config(msg.into())
}

/// Where samples come from: a named generator or loader, or a directory
/// holding `train.qmc` and `test.qmc`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSource {
    Named(DatasetKind),
    Files(PathBuf),
}

impl DatasetSource {
    fn parse(s: &str) -> Self {
        match s.parse::<DatasetKind>() {
            Ok(kind) => DatasetSource::Named(kind),
            Err(_) => DatasetSource::Files(PathBuf::from(s)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DatasetSource::Named(kind) => kind.name().to_string(),
            DatasetSource::Files(path) => path.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub ansatz: AnsatzKind,
    pub dataset: DatasetSource,
    /// Number of classes to keep (CIFAR: taken in the fixed accumulation
    /// order; default 2).
    pub classes: Option<usize>,
    pub filter: usize,
    pub stride: usize,
    pub registers: usize,
    pub ancillas: usize,
    pub filters: usize,
    pub hidden: usize,
    pub batch: usize,
    pub epochs: usize,
    /// Default 0.01 on the 12-channel dataset, 0.001 otherwise.
    pub lr: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
    /// 0 lets the pool pick.
    pub threads: usize,
    pub deterministic: bool,
    pub cp_fanout: bool,
    pub wev_per_position: bool,
    /// Default Xavier on the 12-channel dataset, normal otherwise.
    pub wev_init: Option<WevInit>,
    pub data_dir: Option<PathBuf>,
    pub train_per_class: Option<usize>,
    pub test_per_class: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Co,
            ansatz: AnsatzKind::U1,
            dataset: DatasetSource::Named(DatasetKind::NoisyColors),
            classes: None,
            filter: 2,
            stride: 1,
            registers: 3,
            ancillas: 3,
            filters: 1,
            hidden: 128,
            batch: 32,
            epochs: 20,
            lr: None,
            seed: 0,
            out: PathBuf::from("runs/latest"),
            threads: 0,
            deterministic: false,
            cp_fanout: false,
            wev_per_position: false,
            wev_init: None,
            data_dir: None,
            train_per_class: None,
            test_per_class: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, TrainError> {
    value
        .parse()
        .map_err(|_| config_err(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, TrainError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(config_err(format!(
            "`{key}`: expected a boolean, got `{value}`"
        ))),
    }
}

fn parse_wev_init(value: &str) -> Result<WevInit, TrainError> {
    match value {
        "normal" => Ok(WevInit::Normal),
        "xavier" => Ok(WevInit::Xavier),
        other => Err(config_err(format!("`wev-init`: unknown scheme `{other}`"))),
    }
}

fn wev_init_name(w: WevInit) -> &'static str {
    match w {
        WevInit::Normal => "normal",
        WevInit::Xavier => "xavier",
    }
}

impl RunConfig {
    /// Keys accepted by [`RunConfig::set`]; each is also a CLI flag.
    pub const KEYS: [&'static str; 23] = [
        "method",
        "ansatz",
        "dataset",
        "classes",
        "filter",
        "stride",
        "registers",
        "ancillas",
        "filters",
        "hidden",
        "batch",
        "epochs",
        "lr",
        "seed",
        "out",
        "threads",
        "deterministic",
        "cp-fanout",
        "wev-per-position",
        "wev-init",
        "data-dir",
        "train-per-class",
        "test-per-class",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        let v = value.trim();
        match key {
            "method" => self.method = v.parse().map_err(config_err)?,
            "ansatz" => self.ansatz = v.parse().map_err(config_err)?,
            "dataset" => self.dataset = DatasetSource::parse(v),
            "classes" => self.classes = Some(parse_num(key, v)?),
            "filter" => self.filter = parse_num(key, v)?,
            "stride" => self.stride = parse_num(key, v)?,
            "registers" => self.registers = parse_num(key, v)?,
            "ancillas" => self.ancillas = parse_num(key, v)?,
            "filters" => self.filters = parse_num(key, v)?,
            "hidden" => self.hidden = parse_num(key, v)?,
            "batch" => self.batch = parse_num(key, v)?,
            "epochs" => self.epochs = parse_num(key, v)?,
            "lr" => self.lr = Some(parse_num(key, v)?),
            "seed" => self.seed = parse_num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "threads" => self.threads = parse_num(key, v)?,
            "deterministic" => self.deterministic = parse_bool(key, v)?,
            "cp-fanout" => self.cp_fanout = parse_bool(key, v)?,
            "wev-per-position" => self.wev_per_position = parse_bool(key, v)?,
            "wev-init" => self.wev_init = Some(parse_wev_init(v)?),
            "data-dir" => self.data_dir = Some(PathBuf::from(v)),
            "train-per-class" => self.train_per_class = Some(parse_num(key, v)?),
            "test-per-class" => self.test_per_class = Some(parse_num(key, v)?),
            other => return Err(config_err(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), TrainError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key=value", n + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| config_err(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, TrainError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Every key with its resolved value, one `key=value` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<usize>| v.map_or(String::new(), |n| n.to_string());
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or(String::new(), |p| p.display().to_string())
        };
        let lines: [(&str, String); 23] = [
            ("method", self.method.to_string()),
            ("ansatz", self.ansatz.to_string()),
            ("dataset", self.dataset.describe()),
            ("classes", opt(self.classes)),
            ("filter", self.filter.to_string()),
            ("stride", self.stride.to_string()),
            ("registers", self.registers.to_string()),
            ("ancillas", self.ancillas.to_string()),
            ("filters", self.filters.to_string()),
            ("hidden", self.hidden.to_string()),
            ("batch", self.batch.to_string()),
            ("epochs", self.epochs.to_string()),
            ("lr", self.learning_rate().to_string()),
            ("seed", self.seed.to_string()),
            ("out", self.out.display().to_string()),
            ("threads", self.threads.to_string()),
            ("deterministic", self.deterministic.to_string()),
            ("cp-fanout", self.cp_fanout.to_string()),
            ("wev-per-position", self.wev_per_position.to_string()),
            (
                "wev-init",
                wev_init_name(self.resolved_wev_init()).to_string(),
            ),
            ("data-dir", path(&self.data_dir)),
            ("train-per-class", opt(self.train_per_class)),
            ("test-per-class", opt(self.test_per_class)),
        ];
        for (k, v) in lines {
            if !v.is_empty() {
                let _ = writeln!(s, "{k}={v}");
            }
        }
        s
    }

    fn is_high_channel(&self) -> bool {
        self.dataset == DatasetSource::Named(DatasetKind::HighChannel)
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
            .unwrap_or(if self.is_high_channel() { 0.01 } else { 0.001 })
    }

    pub fn resolved_wev_init(&self) -> WevInit {
        self.wev_init.unwrap_or(if self.is_high_channel() {
            WevInit::Xavier
        } else {
            WevInit::Normal
        })
    }

    pub fn conv(&self) -> ConvConfig {
        ConvConfig {
            filter_size: self.filter,
            stride: self.stride,
            method: self.method,
            registers: self.registers,
            ancillas: self.ancillas,
            ansatz: self.ansatz,
            cp_fanout: self.cp_fanout,
            wev_per_position: self.wev_per_position,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.conv()
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        if self.epochs == 0 {
            return Err(config_err("epochs must be at least 1"));
        }
        if self.batch == 0 {
            return Err(config_err("batch size must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(config_err("hidden width must be at least 1"));
        }
        if self.filters == 0 {
            return Err(config_err("at least one filter is required"));
        }
        if self.classes.is_some_and(|c| c < 2) {
            return Err(config_err("at least two classes are required"));
        }
        let lr = self.learning_rate();
        if !(lr.is_finite() && lr > 0.0) {
            return Err(config_err("learning rate must be positive and finite"));
        }
        Ok(())
    }

    /// `(len, width, channels)` of the configured dataset, without loading
    /// named datasets.
    pub fn input_dims(&self) -> Result<(usize, usize, usize), TrainError> {
        match &self.dataset {
            DatasetSource::Named(DatasetKind::HighChannel) => Ok((SIDE, SIDE, 12)),
            DatasetSource::Named(_) => Ok((SIDE, SIDE, 3)),
            DatasetSource::Files(dir) => {
                let test = load_dataset(&dir.join(TEST_DATA_FILE), Split::Test)?;
                test.dims()
                    .ok_or_else(|| config_err(format!("{} has no samples", dir.display())))
            }
        }
    }

    pub fn model_spec(&self, data: &DatasetPair) -> Result<ModelSpec, TrainError> {
        let (len, width, channels) = data
            .train
            .dims()
            .ok_or_else(|| config_err("training set is empty"))?;
        let spec = ModelSpec {
            conv: self.conv(),
            filters: self.filters,
            hidden: self.hidden,
            image_len: len,
            image_width: width,
            channels,
            classes: data.train.num_classes(),
            wev_init: self.resolved_wev_init(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn data_root(&self) -> Option<PathBuf> {
        self.data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
    }
}

/// Loads or generates the configured dataset, then applies the class and
/// per-class limits.
pub fn load_data(cfg: &RunConfig) -> Result<DatasetPair, TrainError> {
    let pair = match &cfg.dataset {
        DatasetSource::Named(DatasetKind::NoisyColors) => gen_noisy_colors(cfg.seed),
        DatasetSource::Named(DatasetKind::NoisyShapes) => gen_noisy_shapes(cfg.seed),
        DatasetSource::Named(DatasetKind::HighChannel) => gen_high_channel(cfg.seed),
        DatasetSource::Named(DatasetKind::Cifar) => {
            let root = cfg
                .data_root()
                .ok_or_else(|| config_err(format!("cifar needs --data-dir or {DATA_DIR_ENV}")))?;
            let n = cfg.classes.unwrap_or(CIFAR_DEFAULT_CLASSES);
            if n > CIFAR_CLASS_ORDER.len() {
                return Err(config_err(format!(
                    "cifar has {} classes",
                    CIFAR_CLASS_ORDER.len()
                )));
            }
            return Ok(load_cifar10(
                &root,
                &CIFAR_CLASS_ORDER[..n],
                cfg.train_per_class.unwrap_or(CIFAR_TRAIN_PER_CLASS),
                cfg.test_per_class.unwrap_or(CIFAR_TEST_PER_CLASS),
                cfg.seed,
            )?);
        }
        DatasetSource::Files(dir) => DatasetPair {
            train: load_dataset(&dir.join(TRAIN_DATA_FILE), Split::Train)?,
            test: load_dataset(&dir.join(TEST_DATA_FILE), Split::Test)?,
        },
    };
    let classes = cfg.classes.unwrap_or(pair.train.num_classes());
    if classes > pair.train.num_classes() {
        return Err(config_err(format!(
            "dataset has {} classes, {classes} requested",
            pair.train.num_classes()
        )));
    }
    Ok(DatasetPair {
        train: pair.train.restrict(classes, cfg.train_per_class)?,
        test: pair.test.restrict(classes, cfg.test_per_class)?,
    })
}

/// Writes `train.qmc` and `test.qmc` under `dir`.
pub fn write_data(data: &DatasetPair, dir: &Path) -> Result<(), TrainError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    save_dataset(&dir.join(TRAIN_DATA_FILE), &data.train)?;
    save_dataset(&dir.join(TEST_DATA_FILE), &data.test)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
    pub seconds: f64,
}

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.8},{:.6},{:.8},{:.6},{:.3}",
            self.epoch,
            self.train_loss,
            self.train_acc,
            self.test_loss,
            self.test_acc,
            self.seconds
        )
    }
}

pub fn metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.confusion.len())
            .map(|i| self.confusion[i][i])
            .sum()
    }
}

/// Arg-max accuracy, mean cross-entropy and confusion counts over `data`.
pub fn evaluate(model: &Model, data: &LabeledDataset) -> Result<Evaluation, TrainError> {
    let classes = model.spec().classes;
    if data.num_classes() > classes {
        return Err(config_err(format!(
            "dataset has {} classes, model has {classes}",
            data.num_classes()
        )));
    }
    let outcomes: Vec<(f64, usize, usize)> = data
        .samples
        .par_iter()
        .map_init(Workspace::default, |ws, (img, label)| {
            let probs = model.predict(img, ws)?;
            Ok((cross_entropy(&probs, *label), *label, argmax(&probs)))
        })
        .collect::<Result<_, ModelError>>()?;
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut loss = 0.0;
    for (l, truth, pred) in &outcomes {
        loss += l;
        confusion[*truth][*pred] += 1;
    }
    let n = outcomes.len().max(1) as f64;
    let eval = Evaluation {
        accuracy: 0.0,
        loss: loss / n,
        confusion,
    };
    Ok(Evaluation {
        accuracy: eval.correct() as f64 / n,
        ..eval
    })
}

pub fn thread_pool(cfg: &RunConfig) -> Result<rayon::ThreadPool, TrainError> {
    let threads = if cfg.deterministic { 1 } else { cfg.threads };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| TrainError::ThreadPool(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: Vec<EpochMetrics>,
    pub model: Model,
    pub class_names: Vec<String>,
}

/// Loads data, trains, and writes `config.txt`, `metrics.csv` (rewritten
/// after every epoch) and `model.qmc` under `cfg.out`.
pub fn train(
    cfg: &RunConfig,
    on_epoch: &mut (dyn FnMut(&EpochMetrics) + Send),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let data = load_data(cfg)?;
    fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    let config_path = cfg.out.join(CONFIG_FILE);
    fs::write(&config_path, cfg.to_text()).map_err(io_err(&config_path))?;
    let metrics_path = cfg.out.join(METRICS_FILE);
    let outcome = train_on(cfg, &data, &mut |rows: &[EpochMetrics]| {
        on_epoch(rows.last().expect("at least one row"));
        fs::write(&metrics_path, metrics_csv(rows)).map_err(io_err(&metrics_path))
    })?;
    save_model(
        &cfg.out.join(MODEL_FILE),
        &outcome.model,
        cfg,
        &outcome.class_names,
    )?;
    Ok(outcome)
}

/// The epoch loop on already-loaded data. `after_epoch` sees all rows so
/// far. In deterministic mode the seconds column is 0.
pub fn train_on(
    cfg: &RunConfig,
    data: &DatasetPair,
    after_epoch: &mut (dyn FnMut(&[EpochMetrics]) -> Result<(), TrainError> + Send),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if data.train.is_empty() || data.test.is_empty() {
        return Err(config_err("train and test splits must be nonempty"));
    }
    let spec = cfg.model_spec(data)?;
    let pool = thread_pool(cfg)?;
    let mut model = Model::new(spec, cfg.seed.wrapping_add(1))?;
    let mut adam = AdamState::new(model.num_params(), cfg.learning_rate());
    let mut shuffle = Rng::with_stream(cfg.seed, SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut rows = Vec::with_capacity(cfg.epochs);

    pool.install(|| {
        for epoch in 1..=cfg.epochs {
            let start = Instant::now();
            shuffle.shuffle(&mut order);
            let mut loss_sum = 0.0;
            let mut correct = 0;
            for (b, idx) in order.chunks(cfg.batch).enumerate() {
                let batch: Vec<SampleRef<'_>> = idx
                    .iter()
                    .map(|&i| {
                        let (img, label) = &data.train.samples[i];
                        (img, *label)
                    })
                    .collect();
                let r = loss_and_gradient(&model, &batch)?;
                if !r.loss.is_finite() || r.gradient.iter().any(|g| !g.is_finite()) {
                    return Err(TrainError::NonFiniteLoss { epoch, batch: b });
                }
                loss_sum += r.loss * batch.len() as f64;
                correct += r.correct;
                let mut params = model.flat_params();
                adam_step(&mut params, &r.gradient, &mut adam);
                model.set_flat_params(&params);
            }
            let test = evaluate(&model, &data.test)?;
            let n = data.train.len() as f64;
            rows.push(EpochMetrics {
                epoch,
                train_loss: loss_sum / n,
                train_acc: correct as f64 / n,
                test_loss: test.loss,
                test_acc: test.accuracy,
                seconds: if cfg.deterministic {
                    0.0
                } else {
                    start.elapsed().as_secs_f64()
                },
            });
            after_epoch(&rows)?;
        }
        Ok(())
    })?;
    Ok(TrainOutcome {
        metrics: rows,
        model,
        class_names: data.train.class_names.clone(),
    })
}

fn spec_text(spec: &ModelSpec) -> String {
    format!(
        "image-len={}\nimage-width={}\nchannels={}\nclasses={}\n",
        spec.image_len, spec.image_width, spec.channels, spec.classes
    )
}

/// Model file: the run config, image/class dimensions, class names,
/// parameter names and values as named sections.
pub fn save_model(
    path: &Path,
    model: &Model,
    cfg: &RunConfig,
    class_names: &[String],
) -> Result<(), TrainError> {
    let sections = vec![
        Section::text("run", cfg.to_text()),
        Section::text("spec", spec_text(model.spec())),
        Section::text("classes", class_names.join("\n")),
        Section::text("params.names", model.param_names().join("\n")),
        Section::values("params", model.flat_params()),
    ];
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    write_sections(&mut out, &sections)?;
    out.flush().map_err(io_err(path))
}

#[derive(Debug, Clone)]
pub struct SavedModel {
    pub model: Model,
    pub config: RunConfig,
    pub class_names: Vec<String>,
}

pub fn load_model(path: &Path) -> Result<SavedModel, TrainError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let sections = read_sections(&mut BufReader::new(file))?;
    let find = |name: &str| {
        sections
            .iter()
            .find(|s| s.name == name)
            .map(|s| &s.data)
            .ok_or_else(|| config_err(format!("model file lacks section `{name}`")))
    };
    let text = |name: &str| match find(name)? {
        SectionData::Text(t) => Ok(t.clone()),
        SectionData::F64(_) => Err(config_err(format!("section `{name}` should be text"))),
    };
    let mut config = RunConfig::default();
    config.apply_text(&text("run")?)?;
    let mut dims = [0usize; 4];
    for line in text("spec")?.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_err("malformed spec section"))?;
        let slot = ["image-len", "image-width", "channels", "classes"]
            .iter()
            .position(|&n| n == k)
            .ok_or_else(|| config_err(format!("unknown spec key `{k}`")))?;
        dims[slot] = parse_num(k, v)?;
    }
    let spec = ModelSpec {
        conv: config.conv(),
        filters: config.filters,
        hidden: config.hidden,
        image_len: dims[0],
        image_width: dims[1],
        channels: dims[2],
        classes: dims[3],
        wev_init: config.resolved_wev_init(),
    };
    let values = match find("params")? {
        SectionData::F64(v) => v.clone(),
        SectionData::Text(_) => return Err(config_err("section `params` should be f64")),
    };
    let model = Model::from_parts(spec, &values)?;
    let names = text("params.names")?;
    if names
        .lines()
        .ne(model.param_names().iter().map(String::as_str))
    {
        return Err(config_err("parameter names do not match the model layout"));
    }
    let class_names = text("classes")?.lines().map(str::to_string).collect();
    Ok(SavedModel {
        model,
        config,
        class_names,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceReport {
    pub width: usize,
    pub gates: usize,
    pub two_qubit_gates: usize,
    pub depth: usize,
    /// Quantum parameters per filter.
    pub quantum_params: usize,
    pub channels: usize,
}

/// Width, gate counts and depth of one filter's circuit.
pub fn report_resources(cfg: &RunConfig) -> Result<ResourceReport, TrainError> {
    cfg.validate()?;
    let (len, width, channels) = cfg.input_dims()?;
    let conv = cfg.conv();
    let grid = conv
        .output_dims(len, width)
        .map_err(|e| config_err(e.to_string()))?;
    let filter = QuantumFilter::new(conv, channels, grid, "f0").map_err(ModelError::from)?;
    let circuit = filter.circuit();
    Ok(ResourceReport {
        width: circuit.num_qubits(),
        gates: circuit.gate_count(),
        two_qubit_gates: circuit.count_where(|op| op.control.is_some()),
        depth: circuit.depth(),
        quantum_params: filter.num_params(),
        channels,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckOptions {
    pub samples: usize,
    pub h: f64,
    pub threshold: f64,
    /// Head parameters checked (evenly spaced); every quantum parameter is
    /// always checked.
    pub head_params: usize,
    /// Negates this analytic partial before comparing.
    pub fault: Option<String>,
    pub sweep: Vec<f64>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            samples: 4,
            h: 1e-4,
            threshold: 1e-4,
            head_params: 64,
            fault: None,
            sweep: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckOutcome {
    pub report: GradCheckReport,
    /// `(h, max relative error)` per swept step.
    pub sweep: Vec<(f64, f64)>,
    pub threshold: f64,
    /// Smallest `|hidden pre-activation|` over the batch; central
    /// differences are unreliable when a step can cross a ReLU kink.
    pub relu_margin: f64,
}

impl GradcheckOutcome {
    pub fn passed(&self) -> bool {
        self.report.passes(self.threshold)
    }
}

/// Compares exact gradients against central differences on the first
/// `opts.samples` training samples of the configured dataset.
pub fn gradcheck(cfg: &RunConfig, opts: &GradcheckOptions) -> Result<GradcheckOutcome, TrainError> {
    cfg.validate()?;
    let data = load_data(cfg)?;
    let spec = cfg.model_spec(&data)?;
    let model = Model::new(spec, cfg.seed.wrapping_add(1))?;
    let batch: Vec<SampleRef<'_>> = data
        .train
        .samples
        .iter()
        .take(opts.samples.max(1))
        .map(|(img, l)| (img, *l))
        .collect();
    thread_pool(cfg)?.install(|| gradcheck_model(&model, &batch, opts))
}

/// [`gradcheck`] on a given model and batch.
pub fn gradcheck_model(
    model: &Model,
    batch: &[SampleRef<'_>],
    opts: &GradcheckOptions,
) -> Result<GradcheckOutcome, TrainError> {
    let nq = model.quantum_params().len();
    let nh = model.num_params() - nq;
    let mut indices: Vec<usize> = (0..nq).collect();
    let picks = opts.head_params.min(nh);
    indices.extend((0..picks).map(|k| nq + k * nh / picks));
    indices.dedup();

    let mut analytic = loss_gradient(model, batch)?.select(&indices);
    if let Some(name) = &opts.fault {
        let i = analytic
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| config_err(format!("no checked parameter named `{name}`")))?;
        analytic.values[i] = -analytic.values[i];
    }
    let numeric = finite_diff_subset(model, batch, opts.h, &indices)?;
    let report = GradCheckReport::compare(&analytic, &numeric);
    let sweep = opts
        .sweep
        .iter()
        .map(|&h| {
            let fd = finite_diff_subset(model, batch, h, &indices)?;
            Ok((h, GradCheckReport::compare(&analytic, &fd).max_rel_error()))
        })
        .collect::<Result<_, TrainError>>()?;
    let relu_margin = batch
        .par_iter()
        .map_init(Workspace::default, |ws, (img, _)| {
            let x = model.features(img, ws)?;
            Ok(model
                .head()
                .forward(&x)
                .pre
                .iter()
                .fold(f64::INFINITY, |m, v| m.min(v.abs())))
        })
        .collect::<Result<Vec<f64>, ModelError>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(GradcheckOutcome {
        report,
        sweep,
        threshold: opts.threshold,
        relu_margin,
    })
}

//! `qmc`: generate datasets, train, evaluate, check gradients and report
//! circuit resources for multi-channel quantum convolution models.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qmc_core::train::{
    self, evaluate, gradcheck, load_data, load_model, report_resources, write_data,
    GradcheckOptions, RunConfig, MODEL_FILE,
};

#[derive(Parser)]
#[command(name = "qmc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write train.qmc and test.qmc for the configured dataset into --out.
    GenerateData(RunArgs),
    /// Train a model; writes config.txt, metrics.csv and model.qmc into --out.
    Train(RunArgs),
    /// Accuracy and confusion matrix of a saved model on a test split.
    Evaluate {
        /// Model file (default: <out>/model.qmc).
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare exact gradients with central finite differences.
    Gradcheck {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        check: CheckArgs,
    },
    /// Circuit width, gate counts and depth of one filter.
    Report(RunArgs),
}

/// Run settings. Flags override values read from --config.
#[derive(Args, Default)]
struct RunArgs {
    /// key=value file with '#' comments; keys match the flag names.
    #[arg(long)]
    config: Option<PathBuf>,
    /// co, pco, pcot, wev or control.
    #[arg(long)]
    method: Option<String>,
    /// u1 or u2.
    #[arg(long)]
    ansatz: Option<String>,
    /// noisy-colors, noisy-shapes, high-channel, cifar, or a directory with
    /// train.qmc and test.qmc.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    classes: Option<String>,
    #[arg(long)]
    filter: Option<String>,
    #[arg(long)]
    stride: Option<String>,
    #[arg(long)]
    registers: Option<String>,
    #[arg(long)]
    ancillas: Option<String>,
    /// Number of quantum filters.
    #[arg(long)]
    filters: Option<String>,
    /// Hidden width of the dense head.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    batch: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    /// Single thread, seconds column written as 0.
    #[arg(long)]
    deterministic: bool,
    /// Couple the ancilla to every working qubit.
    #[arg(long)]
    cp_fanout: bool,
    /// WEV weights per output position.
    #[arg(long)]
    wev_per_position: bool,
    /// normal or xavier.
    #[arg(long)]
    wev_init: Option<String>,
    /// Dataset root (default: $QMC_DATA_DIR).
    #[arg(long)]
    data_dir: Option<String>,
    #[arg(long)]
    train_per_class: Option<String>,
    #[arg(long)]
    test_per_class: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let values = [
            ("method", &self.method),
            ("ansatz", &self.ansatz),
            ("dataset", &self.dataset),
            ("classes", &self.classes),
            ("filter", &self.filter),
            ("stride", &self.stride),
            ("registers", &self.registers),
            ("ancillas", &self.ancillas),
            ("filters", &self.filters),
            ("hidden", &self.hidden),
            ("batch", &self.batch),
            ("epochs", &self.epochs),
            ("lr", &self.lr),
            ("seed", &self.seed),
            ("out", &self.out),
            ("threads", &self.threads),
            ("wev-init", &self.wev_init),
            ("data-dir", &self.data_dir),
            ("train-per-class", &self.train_per_class),
            ("test-per-class", &self.test_per_class),
        ];
        let mut out: Vec<_> = values
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect();
        for (k, on) in [
            ("deterministic", self.deterministic),
            ("cp-fanout", self.cp_fanout),
            ("wev-per-position", self.wev_per_position),
        ] {
            if on {
                out.push((k, "true".into()));
            }
        }
        out
    }

    /// `base`, then the --config file, then the flags.
    fn resolve(&self, mut cfg: RunConfig) -> Result<RunConfig> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_text(&text)?;
        }
        for (k, v) in self.overrides() {
            cfg.set(k, &v).with_context(|| format!("--{k}"))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct CheckArgs {
    /// Batch size of the check.
    #[arg(long, default_value_t = 4)]
    samples: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-4)]
    h: f64,
    /// Maximum allowed relative error.
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
    /// Head parameters checked alongside every quantum parameter.
    #[arg(long, default_value_t = 64)]
    head_params: usize,
    /// Negate the named analytic partial before comparing.
    #[arg(long)]
    fault: Option<String>,
    /// Also report the error at h = 1e-3, 1e-4 and 1e-5.
    #[arg(long)]
    sweep: bool,
    /// Print every checked parameter.
    #[arg(long)]
    verbose: bool,
}

fn run_generate(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.resolve(RunConfig::default())?;
    let data = load_data(&cfg)?;
    write_data(&data, &cfg.out)?;
    println!(
        "wrote {} train / {} test samples, {} classes, to {}",
        data.train.len(),
        data.test.len(),
        data.train.num_classes(),
        cfg.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run_train(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.resolve(RunConfig::default())?;
    println!(
        "training {} ({}) on {}: {} epochs, lr {}, batch {}",
        cfg.method,
        cfg.ansatz,
        cfg.dataset.describe(),
        cfg.epochs,
        cfg.learning_rate(),
        cfg.batch
    );
    println!("{}", train::METRICS_HEADER);
    let outcome = train::train(&cfg, &mut |m| println!("{}", m.csv_row()))?;
    let last = outcome.metrics.last().expect("epochs >= 1");
    println!(
        "final test accuracy {:.4}; outputs in {}",
        last.test_acc,
        cfg.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run_evaluate(model: &Option<PathBuf>, args: &RunArgs) -> Result<ExitCode> {
    let path = match model {
        Some(p) => p.clone(),
        None => args.resolve(RunConfig::default())?.out.join(MODEL_FILE),
    };
    let saved = load_model(&path).with_context(|| format!("loading {}", path.display()))?;
    let cfg = args.resolve(saved.config.clone())?;
    let data = load_data(&cfg)?;
    let eval = train::thread_pool(&cfg)?.install(|| evaluate(&saved.model, &data.test))?;
    println!(
        "accuracy {:.4} ({}/{}), loss {:.6}",
        eval.accuracy,
        eval.correct(),
        eval.total(),
        eval.loss
    );
    println!("confusion (rows: true class, columns: predicted)");
    for (name, row) in saved.class_names.iter().zip(&eval.confusion) {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>5}")).collect();
        println!("{name:>20} {}", cells.join(""));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_gradcheck(args: &RunArgs, check: &CheckArgs) -> Result<ExitCode> {
    let cfg = args.resolve(RunConfig::default())?;
    let opts = GradcheckOptions {
        samples: check.samples,
        h: check.h,
        threshold: check.threshold,
        head_params: check.head_params,
        fault: check.fault.clone(),
        sweep: if check.sweep {
            vec![1e-3, 1e-4, 1e-5]
        } else {
            Vec::new()
        },
    };
    let outcome = gradcheck(&cfg, &opts)?;
    if check.verbose {
        println!(
            "{:>32} {:>16} {:>16} {:>10}",
            "parameter", "analytic", "numeric", "rel_err"
        );
        for e in &outcome.report.entries {
            println!(
                "{:>32} {:>16.9e} {:>16.9e} {:>10.2e}",
                e.name, e.analytic, e.numeric, e.rel_error
            );
        }
    }
    for (h, err) in &outcome.sweep {
        println!("h={h:e} max_rel_err={err:.3e}");
    }
    if outcome.relu_margin < 10.0 * check.h {
        println!(
            "warning: a hidden ReLU input is {:.2e} from its kink; finite differences may straddle it",
            outcome.relu_margin
        );
    }
    let worst = outcome.report.worst();
    let (name, err) = worst.map_or(("-", 0.0), |e| (e.name.as_str(), e.rel_error));
    println!(
        "checked {} parameters, max relative error {err:.3e} at {name}",
        outcome.report.entries.len()
    );
    if outcome.passed() {
        println!("PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL: {name} exceeds {:e}", outcome.threshold);
        Ok(ExitCode::FAILURE)
    }
}

fn run_report(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.resolve(RunConfig::default())?;
    let r = report_resources(&cfg)?;
    println!("method           {}", cfg.method);
    println!("ansatz           {}", cfg.ansatz);
    println!("channels         {}", r.channels);
    println!("width            {}", r.width);
    println!("gates            {}", r.gates);
    println!("two-qubit gates  {}", r.two_qubit_gates);
    println!("depth            {}", r.depth);
    println!("quantum params   {}", r.quantum_params);
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    match &Cli::parse().command {
        Command::GenerateData(args) => run_generate(args),
        Command::Train(args) => run_train(args),
        Command::Evaluate { model, run } => run_evaluate(model, run),
        Command::Gradcheck { run, check } => run_gradcheck(run, check),
        Command::Report(args) => run_report(args),
    }
}

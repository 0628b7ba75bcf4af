use qmc_core::head::{DenseLayer, Head};
use qmc_core::train::{
    self, evaluate, load_data, load_model, metrics_csv, train_on, EpochMetrics, RunConfig,
    TrainError, CONFIG_FILE, METRICS_FILE, METRICS_HEADER, MODEL_FILE,
};
use qmc_core::Model;

/// Three noisy-color classes, few samples, coarse stride.
fn tiny(method: &str) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.apply_text(&format!(
        "method={method}\ndataset=noisy-colors\nclasses=3\ntrain-per-class=8\n\
         test-per-class=4\nstride=4\nhidden=8\nbatch=6\nepochs=3\ndeterministic=true\n\
         lr=0.05\nregisters=2\nancillas=2\n"
    ))
    .unwrap();
    cfg
}

fn no_callback() -> impl FnMut(&[EpochMetrics]) -> Result<(), TrainError> + Send {
    |_| Ok(())
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let cfg = tiny("co");
    let data = load_data(&cfg).unwrap();
    let a = train_on(&cfg, &data, &mut no_callback()).unwrap();
    let b = train_on(&cfg, &data, &mut no_callback()).unwrap();
    assert_eq!(metrics_csv(&a.metrics), metrics_csv(&b.metrics));
    assert!(a.metrics.iter().all(|m| m.seconds == 0.0));
    let pa = a.model.flat_params();
    let pb = b.model.flat_params();
    assert!(pa.iter().zip(&pb).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn training_lowers_the_loss_for_every_method() {
    for method in ["co", "pco", "pcot", "wev", "control"] {
        let mut cfg = tiny(method);
        cfg.set("epochs", "5").unwrap();
        cfg.set("dataset", "high-channel").unwrap();
        cfg.set("lr", "0.01").unwrap();
        cfg.set("registers", "3").unwrap();
        cfg.set("ancillas", "3").unwrap();
        let data = load_data(&cfg).unwrap();
        let out = train_on(&cfg, &data, &mut no_callback()).unwrap();
        let first = out.metrics[0].train_loss;
        let last = out.metrics[4].train_loss;
        assert!(last < first, "{method}: {first} -> {last}");
        assert!(out.metrics.iter().all(|m| m.train_loss.is_finite()));
    }
}

#[test]
fn train_writes_outputs_that_reload() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny("wev");
    cfg.set("out", dir.path().to_str().unwrap()).unwrap();
    let mut seen = Vec::new();
    let outcome = train::train(&cfg, &mut |m| seen.push(m.epoch)).unwrap();
    assert_eq!(seen, vec![1, 2, 3]);

    let csv = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], METRICS_HEADER);
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));

    let config = RunConfig::from_file(&dir.path().join(CONFIG_FILE)).unwrap();
    assert_eq!(config.to_text(), cfg.to_text());

    let saved = load_model(&dir.path().join(MODEL_FILE)).unwrap();
    assert_eq!(saved.config.to_text(), cfg.to_text());
    assert_eq!(saved.class_names, outcome.class_names);
    let a = outcome.model.flat_params();
    let b = saved.model.flat_params();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(outcome.model.param_names(), saved.model.param_names());

    let data = load_data(&cfg).unwrap();
    let e1 = evaluate(&outcome.model, &data.test).unwrap();
    let e2 = evaluate(&saved.model, &data.test).unwrap();
    assert_eq!(e1.confusion, e2.confusion);
    assert_eq!(e1.loss.to_bits(), e2.loss.to_bits());
    assert!((outcome.metrics[2].test_acc - e1.accuracy).abs() < 1e-15);
}

#[test]
fn confusion_matrix_is_consistent() {
    let cfg = tiny("control");
    let data = load_data(&cfg).unwrap();
    let out = train_on(&cfg, &data, &mut no_callback()).unwrap();
    let eval = evaluate(&out.model, &data.test).unwrap();
    let trace: usize = (0..3).map(|k| eval.confusion[k][k]).sum();
    assert_eq!(eval.total(), data.test.len());
    assert_eq!(trace, eval.correct());
    assert!((eval.accuracy - trace as f64 / eval.total() as f64).abs() < 1e-15);
    let rows: Vec<usize> = eval.confusion.iter().map(|r| r.iter().sum()).collect();
    assert_eq!(rows, data.test.class_counts());
}

#[test]
fn constant_model_scores_chance() {
    let mut cfg = RunConfig::default();
    cfg.apply_text("dataset=noisy-colors\nstride=9\nhidden=4")
        .unwrap();
    let data = load_data(&cfg).unwrap();
    let mut model = Model::new(cfg.model_spec(&data).unwrap(), 0).unwrap();
    let inputs = model.spec().feature_len();
    *model.head_mut() = Head {
        hidden: DenseLayer::zeros(inputs, 4),
        output: DenseLayer::zeros(4, 9),
    };
    let eval = evaluate(&model, &data.test).unwrap();
    assert_eq!(eval.total(), 720);
    assert!((eval.accuracy - 1.0 / 9.0).abs() < 1e-12);
    assert!((eval.loss - 9f64.ln()).abs() < 1e-12);
}

#[test]
fn invalid_runs_fail_before_training() {
    let mut cfg = tiny("co");
    cfg.set("hidden", "0").unwrap();
    assert!(cfg.validate().is_err());
    let mut cfg = tiny("co");
    cfg.set("classes", "12").unwrap();
    assert!(load_data(&cfg).is_err());
    assert!(tiny("co").set("method", "nope").is_err());
}

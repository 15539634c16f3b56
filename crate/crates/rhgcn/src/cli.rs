//! Command-line entry points.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rhgcn_core::diagnostics::{
    energy_trace, rescale_weights, row_stochastic_check, row_stochastic_tightness, run_decay_bound, spectral_premise,
    DEFAULT_SLACK,
};
use rhgcn_core::model::accuracy;
use rhgcn_core::synth::synth_graph_with;
use rhgcn_core::train::{grad_check_model, grad_check_model_with_fault, train, TrainOutcome, GRAD_CHECK_TOLERANCE};
use rhgcn_core::{NodeDataset, RHgcn};
use serde_json::json;

use crate::checkpoint::Checkpoint;
use crate::config::{DataSource, RunConfig, SynthKind};
use crate::dataset::{load_dataset, write_dataset};
use crate::error::{CliError, ExitCode};
use crate::report::{metrics_row, with_echo, write_bound_rows, write_energy_trace, write_json, CsvOut, METRICS_HEADER};

#[derive(Debug, Parser)]
#[command(name = "rhgcn", version, about = "Residual hyperbolic graph convolution networks")]
pub struct Cli {
    /// Only print final results.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every command. Flags override `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Product layout, e.g. `2x2` or `16x1,4x2`.
    #[arg(long)]
    pub signature: Option<String>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta_base: Option<f64>,
    #[arg(long)]
    pub drop_rate: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long, conflicts_with = "synth")]
    pub dataset: Option<PathBuf>,
    /// Generated dataset: sbm, tree, path or karate.
    #[arg(long)]
    pub synth: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// adam or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// relu or identity.
    #[arg(long)]
    pub activation: Option<String>,
    /// Any configuration key, as `key=value`. Repeatable; applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiagnoseMode {
    Energy,
    Bound,
    RowStochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    MatmulBackward,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and write metrics.csv, checkpoint.json and results.json.
    Train {
        #[command(flatten)]
        common: Common,
        /// Train this many consecutive seeds concurrently, one
        /// subdirectory each, and summarize them in sweep.csv.
        #[arg(long)]
        sweep: Option<usize>,
    },
    /// Evaluate a checkpoint on its dataset or on `--dataset`/`--synth`.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Energy traces, the per-layer decay bound, or the norm bound
    /// ‖Xu‖ ≤ √n for row-stochastic X and unit u.
    Diagnose {
        #[arg(value_enum)]
        mode: DiagnoseMode,
        #[command(flatten)]
        common: Common,
        /// Use trained weights instead of seeded random ones.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Rescale every layer weight to this spectral norm.
        #[arg(long)]
        weight_norm: Option<f64>,
        /// Check the bound with ReLU, skipping layers it changes.
        #[arg(long)]
        allow_relu: bool,
        #[arg(long, default_value_t = DEFAULT_SLACK)]
        slack: f64,
        /// Matrix size for row-stochastic.
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Compare parameter gradients with central differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, value_enum, hide = true)]
        fault: Option<FaultArg>,
    },
    /// Write a generated dataset in the directory format.
    Synth {
        #[command(flatten)]
        common: Common,
    },
}

/// Parses arguments, runs, reports errors on stderr and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::Usage as i32 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .try_init();
    match dispatch(cli.command) {
        Ok(code) => code as i32,
        Err(e) => {
            eprintln!("rhgcn: {e}");
            e.exit_code() as i32
        }
    }
}

/// Applies `--config`, then the named flags, then `--set` onto `base`.
pub fn resolve(common: &Common, mut base: RunConfig) -> Result<RunConfig, CliError> {
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        base.apply_text(&text, &path.display().to_string())?;
    }
    let c = &mut base;
    let flags: [(&str, Option<String>); 14] = [
        ("seed", common.seed.map(|v| v.to_string())),
        ("signature", common.signature.clone()),
        ("layers", common.layers.map(|v| v.to_string())),
        ("alpha", common.alpha.map(|v| v.to_string())),
        ("beta_base", common.beta_base.map(|v| v.to_string())),
        ("drop_rate", common.drop_rate.map(|v| v.to_string())),
        ("out", common.out.as_ref().map(|p| p.display().to_string())),
        ("dataset", common.dataset.as_ref().map(|p| p.display().to_string())),
        ("synth", common.synth.clone()),
        ("epochs", common.epochs.map(|v| v.to_string())),
        ("patience", common.patience.map(|v| v.to_string())),
        ("lr", common.lr.map(|v| v.to_string())),
        ("optimizer", common.optimizer.clone()),
        ("activation", common.activation.clone()),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            c.set(k, &v)?;
        }
    }
    for kv in &common.set {
        let (k, v) =
            kv.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        c.set(k, v)?;
    }
    base.validate()?;
    Ok(base)
}

pub fn load_data(cfg: &RunConfig) -> Result<NodeDataset, CliError> {
    match &cfg.data {
        DataSource::Dir(dir) => load_dataset(dir),
        DataSource::Synth(_) => {
            let spec = cfg.synth_spec().expect("synthetic source");
            synth_graph_with(&spec, cfg.data_seed(), cfg.split_fractions()).map_err(|e| match e {
                rhgcn_core::Error::Numeric(m) => CliError::Numeric(m),
                other => CliError::Config(other.to_string()),
            })
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Train { common, sweep } => {
            let cfg = resolve(&common, RunConfig::default())?;
            match sweep {
                None | Some(1) => cmd_train(&cfg).map(|_| ExitCode::Ok),
                Some(0) => Err(CliError::Usage("--sweep needs at least one seed".into())),
                Some(n) => cmd_sweep(&cfg, n),
            }
        }
        Command::Eval { common, checkpoint } => cmd_eval(&common, &checkpoint),
        Command::Diagnose { mode, common, checkpoint, weight_norm, allow_relu, slack, n, trials } => {
            let opts = DiagnoseOptions { checkpoint, weight_norm, allow_relu, slack, n, trials };
            cmd_diagnose(mode, &common, &opts)
        }
        Command::Gradcheck { common, step, fault } => cmd_gradcheck(&common, step, fault),
        Command::Synth { common } => cmd_synth(&common),
    }
}

/// Trains one configuration and writes its artifacts under `cfg.out`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome, CliError> {
    let data = load_data(cfg)?;
    let model_cfg = cfg.model_config()?;
    let train_cfg = cfg.train_config()?;
    ensure_dir(&cfg.out)?;
    // Reusable as `--config` to repeat the run.
    let config_path = cfg.out.join("config.txt");
    std::fs::write(&config_path, cfg.to_text()).map_err(|e| CliError::io(&config_path, e))?;
    let mut model = RHgcn::new(model_cfg, data.num_features(), data.num_classes)?;
    info!(
        "training {} layers on {} nodes, {} features, {} classes, seed {}",
        cfg.layers,
        data.num_nodes(),
        data.num_features(),
        data.num_classes,
        cfg.seed
    );
    let metrics_path = cfg.out.join("metrics.csv");
    let mut metrics = CsvOut::create(&metrics_path, cfg, METRICS_HEADER)?;
    let mut write_err = None;
    let result = train(&mut model, &data, &train_cfg, |m| {
        if write_err.is_none() {
            write_err = metrics.row(&metrics_row(m)).err();
        }
        if m.epoch % 50 == 0 {
            info!("epoch {:>5}  loss {:.4}  val {:.4}  test {:.4}", m.epoch, m.train_loss, m.val_acc, m.test_acc);
        }
    });
    metrics.finish()?;
    if let Some(e) = write_err {
        return Err(e);
    }
    let outcome = result?;
    Checkpoint::new(&model, cfg, outcome.best_epoch).save(&cfg.out.join("checkpoint.json"))?;
    let results = with_echo(
        cfg,
        json!({
            "seed": cfg.seed,
            "best_epoch": outcome.best_epoch,
            "best_val_acc": outcome.best_val_acc,
            "test_acc": outcome.test_acc,
            "epochs_run": outcome.history.len() - 1,
            "stopped_early": outcome.stopped_early,
            "num_parameters": model.params.num_scalars(),
        }),
    );
    write_json(&cfg.out.join("results.json"), &results)?;
    println!(
        "test_acc {} best_val_acc {} best_epoch {} seed {}",
        outcome.test_acc, outcome.best_val_acc, outcome.best_epoch, cfg.seed
    );
    Ok(outcome)
}

fn cmd_sweep(cfg: &RunConfig, n: usize) -> Result<ExitCode, CliError> {
    ensure_dir(&cfg.out)?;
    let runs: Vec<RunConfig> = (0..n as u64)
        .map(|i| {
            let mut c = cfg.clone();
            c.seed = cfg.seed + i;
            c.out = cfg.out.join(format!("seed-{}", c.seed));
            c
        })
        .collect();
    let results: Vec<Result<TrainOutcome, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = runs.iter().map(|c| s.spawn(move || cmd_train(c))).collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });
    let mut table =
        CsvOut::create(&cfg.out.join("sweep.csv"), cfg, &["seed", "best_epoch", "best_val_acc", "test_acc"])?;
    let mut accs = Vec::new();
    let mut first_err = None;
    for (c, r) in runs.iter().zip(results) {
        match r {
            Ok(o) => {
                table.row(&[
                    c.seed.to_string(),
                    o.best_epoch.to_string(),
                    o.best_val_acc.to_string(),
                    o.test_acc.to_string(),
                ])?;
                accs.push(o.test_acc);
            }
            Err(e) => {
                warn!("seed {} failed: {e}", c.seed);
                first_err.get_or_insert(e);
            }
        }
    }
    table.finish()?;
    if let Some(e) = first_err {
        return Err(e);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let sd = (accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / accs.len() as f64).sqrt();
    write_json(
        &cfg.out.join("sweep.json"),
        &with_echo(cfg, json!({ "seeds": n, "test_acc": accs, "mean": mean, "std": sd })),
    )?;
    println!("mean test_acc {mean} std {sd} over {n} seeds");
    Ok(ExitCode::Ok)
}

fn cmd_eval(common: &Common, path: &Path) -> Result<ExitCode, CliError> {
    let ckpt = Checkpoint::load(path)?;
    let model = ckpt.model()?;
    let cfg = resolve(common, ckpt.run_config()?)?;
    let data = load_data(&cfg)?;
    if data.num_features() != model.num_features || data.num_classes > model.num_classes {
        return Err(CliError::Usage(format!(
            "checkpoint expects {} features and at most {} classes; dataset has {} and {}",
            model.num_features,
            model.num_classes,
            data.num_features(),
            data.num_classes
        )));
    }
    let lp = model.predict(&data.features, &data.graph)?;
    let s = &data.splits;
    let (train_acc, val_acc, test_acc) = (
        accuracy(&lp, &data.labels, &s.train),
        accuracy(&lp, &data.labels, &s.val),
        accuracy(&lp, &data.labels, &s.test),
    );
    if common.out.is_some() || common.config.is_some() {
        ensure_dir(&cfg.out)?;
        let report = with_echo(
            &cfg,
            json!({ "checkpoint": path.display().to_string(), "train_acc": train_acc, "val_acc": val_acc, "test_acc": test_acc }),
        );
        write_json(&cfg.out.join("eval.json"), &report)?;
    }
    println!("test_acc {test_acc} val_acc {val_acc} train_acc {train_acc}");
    Ok(ExitCode::Ok)
}

#[derive(Debug, Clone)]
pub struct DiagnoseOptions {
    pub checkpoint: Option<PathBuf>,
    pub weight_norm: Option<f64>,
    pub allow_relu: bool,
    pub slack: f64,
    pub n: usize,
    pub trials: usize,
}

fn diagnostic_model(cfg: &RunConfig, data: &NodeDataset, opts: &DiagnoseOptions) -> Result<RHgcn, CliError> {
    let mut model = match &opts.checkpoint {
        Some(p) => {
            let m = Checkpoint::load(p)?.model()?;
            if m.num_features != data.num_features() {
                return Err(CliError::Usage("checkpoint and dataset feature counts differ".into()));
            }
            m
        }
        None => RHgcn::new(cfg.model_config()?, data.num_features(), data.num_classes.max(2))?,
    };
    if let Some(s) = opts.weight_norm {
        if !(s.is_finite() && s >= 0.0) {
            return Err(CliError::Usage(format!("--weight-norm must be a nonnegative number, got {s}")));
        }
        rescale_weights(&mut model, s);
    }
    Ok(model)
}

fn cmd_diagnose(mode: DiagnoseMode, common: &Common, opts: &DiagnoseOptions) -> Result<ExitCode, CliError> {
    let cfg = resolve(common, RunConfig::default())?;
    ensure_dir(&cfg.out)?;
    match mode {
        DiagnoseMode::RowStochastic => {
            if opts.n == 0 {
                return Err(CliError::Usage("--n must be at least 1".into()));
            }
            let r = row_stochastic_check(opts.trials, opts.n, cfg.seed)?;
            let tight = row_stochastic_tightness(opts.n, 0)?;
            let tight_ok = (tight - 1.0).abs() <= 1e-9;
            let passed = r.violations == 0 && tight_ok;
            write_json(
                &cfg.out.join("row_stochastic.json"),
                &with_echo(
                    &cfg,
                    json!({
                        "n": r.n, "trials": r.trials, "violations": r.violations,
                        "max_ratio": r.max_ratio, "tightness_ratio": tight, "passed": passed,
                    }),
                ),
            )?;
            println!(
                "row_stochastic n {} trials {} violations {} max_ratio {} tightness {}",
                r.n, r.trials, r.violations, r.max_ratio, tight
            );
            Ok(if passed { ExitCode::Ok } else { ExitCode::CheckFailed })
        }
        DiagnoseMode::Energy => {
            let data = load_data(&cfg)?;
            let model = diagnostic_model(&cfg, &data, opts)?;
            let trace = energy_trace(&model, &data.features, &data.graph)?;
            write_energy_trace(&cfg.out.join("energy_trace.csv"), &cfg, &trace)?;
            let ratio = if trace.initial() > 0.0 { trace.last() / trace.initial() } else { 0.0 };
            let summary = json!({
                "spectral_gap": trace.spectral_gap,
                "alpha": trace.alpha,
                "betas": trace.betas,
                "initial_max_energy": trace.initial(),
                "final_max_energy": trace.last(),
                "ratio": ratio,
            });
            write_json(&cfg.out.join("energy_summary.json"), &with_echo(&cfg, summary))?;
            println!("initial {} final {} ratio {}", trace.initial(), trace.last(), ratio);
            Ok(ExitCode::Ok)
        }
        DiagnoseMode::Bound => {
            let data = load_data(&cfg)?;
            let model = diagnostic_model(&cfg, &data, opts)?;
            let (premise, worst) = spectral_premise(&data.graph)?;
            if !premise {
                warn!("spectral premise fails: max |1 - mu| = {worst} exceeds 1 - lambda");
            }
            let report = run_decay_bound(&model, &data.features, &data.graph, opts.allow_relu, opts.slack)?;
            write_bound_rows(&cfg.out.join("bound_report.csv"), &cfg, &report)?;
            let skipped = report.rows.iter().filter(|r| r.skipped).count();
            let summary = json!({
                "spectral_gap": report.spectral_gap,
                "spectral_premise": premise,
                "max_abs_one_minus_mu": worst,
                "slack": report.slack,
                "checked": report.rows.len() - skipped,
                "skipped": skipped,
                "violations": report.violations,
                "passed": report.passed(),
            });
            write_json(&cfg.out.join("bound_summary.json"), &with_echo(&cfg, summary))?;
            println!(
                "bound layers {} violations {} lambda {}",
                report.rows.len(),
                report.violations,
                report.spectral_gap
            );
            Ok(if report.passed() { ExitCode::Ok } else { ExitCode::CheckFailed })
        }
    }
}

fn cmd_gradcheck(common: &Common, step: f64, fault: Option<FaultArg>) -> Result<ExitCode, CliError> {
    let base = RunConfig { data: DataSource::Synth(SynthKind::Tree), ..RunConfig::default() };
    let cfg = resolve(common, base)?;
    if cfg.drop_rate > 0.0 {
        return Err(CliError::Usage(format!("gradcheck needs drop_rate = 0, got {}", cfg.drop_rate)));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::Usage(format!("--step must be positive, got {step}")));
    }
    let data = load_data(&cfg)?;
    let model = RHgcn::new(cfg.model_config()?, data.num_features(), data.num_classes.max(2))?;
    let report = match fault {
        None => grad_check_model(&model, &data, step)?,
        Some(FaultArg::MatmulBackward) => {
            grad_check_model_with_fault(&model, &data, step, rhgcn_core::autodiff::Fault::MatMulBackward)?
        }
    };
    let passed = report.max_rel_error < GRAD_CHECK_TOLERANCE;
    if common.out.is_some() || common.config.is_some() {
        ensure_dir(&cfg.out)?;
        let summary = json!({
            "max_rel_error": report.max_rel_error,
            "worst": report.worst,
            "checked": report.checked,
            "excluded": report.excluded,
            "tolerance": GRAD_CHECK_TOLERANCE,
            "passed": passed,
        });
        write_json(&cfg.out.join("gradcheck.json"), &with_echo(&cfg, summary))?;
    }
    println!(
        "max_rel_error {:e} checked {} excluded {} {}",
        report.max_rel_error,
        report.checked,
        report.excluded,
        if passed { "pass" } else { "FAIL" }
    );
    Ok(if passed { ExitCode::Ok } else { ExitCode::CheckFailed })
}

fn cmd_synth(common: &Common) -> Result<ExitCode, CliError> {
    let cfg = resolve(common, RunConfig::default())?;
    if !matches!(cfg.data, DataSource::Synth(_)) {
        return Err(CliError::Usage("synth writes generated data; drop --dataset".into()));
    }
    let data = load_data(&cfg)?;
    write_dataset(&cfg.out, &data)?;
    let manifest = json!({
        "nodes": data.num_nodes(),
        "edges": data.graph.edges().len(),
        "features": data.num_features(),
        "classes": data.num_classes,
    });
    write_json(&cfg.out.join("synth.json"), &with_echo(&cfg, manifest))?;
    println!("wrote {} nodes, {} edges to {}", data.num_nodes(), data.graph.edges().len(), cfg.out.display());
    Ok(ExitCode::Ok)
}

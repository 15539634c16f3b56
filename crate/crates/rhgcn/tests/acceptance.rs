//! Acceptance criteria A1 to A9. Prints one line per criterion and exits
//! non-zero if any fails. Thresholds and configurations are read from
//! `tests/data/expected_values.toml`.
//!
//! A8 needs the Cora citation graph in the dataset directory format; set
//! `CORA_DIR` to run it (see docs/datasets.md). Without it the line reads
//! SKIP.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rhgcn::cli::load_data;
use rhgcn::config::{DataSource, RunConfig, SynthKind};
use rhgcn::dataset::load_dataset;
use rhgcn_core::diagnostics::{
    energy_trace, rescale_weights, row_stochastic_check, row_stochastic_tightness, run_decay_bound, spectral_premise,
};
use rhgcn_core::lorentz::{
    exp_map, log_map, lorentz_distance, lorentz_inner, lorentz_norm, parallel_transport, project_to_tangent,
    LorentzPoint, TangentVector,
};
use rhgcn_core::train::{grad_check_model, train};
use rhgcn_core::{Activation, Matrix, ModelConfig, NodeDataset, NoiseSpec, RHgcn, SparseGraph, TangentFrame};
use serde::Deserialize;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

#[derive(Deserialize)]
struct Expected {
    geometry: Geometry,
    gradcheck: Gradcheck,
    row_stochastic: RowStochastic,
    oversmoothing: Oversmoothing,
    decay_bound: DecayBound,
    hyperdrop: Hyperdrop,
    sbm: Sbm,
    karate: Karate,
    cora: Cora,
    determinism: Determinism,
}

#[derive(Deserialize)]
struct Geometry {
    dims: Vec<usize>,
    samples: usize,
    roundtrip_tol: f64,
    isometry_tol: f64,
    distance_log_tol: f64,
    constraint_tol: f64,
    max_seconds: f64,
}

#[derive(Deserialize)]
struct Gradcheck {
    tree_branching: usize,
    tree_depth: usize,
    layers: usize,
    signature: String,
    step: f64,
    tol: f64,
    max_seconds: f64,
}

#[derive(Deserialize)]
struct RowStochastic {
    sizes: Vec<usize>,
    trials: usize,
    tightness_tol: f64,
}

#[derive(Deserialize)]
struct Oversmoothing {
    path_nodes: usize,
    feature_dim: usize,
    data_seed: u64,
    signature: String,
    layers: usize,
    beta_base: f64,
    origin_radius: f64,
    model_seeds: Vec<u64>,
    plain_alpha: f64,
    residual_alpha: f64,
    plain_max_ratio: f64,
    residual_min_ratio: f64,
    max_seconds: f64,
}

#[derive(Deserialize)]
struct DecayBound {
    configs: usize,
    max_nodes: usize,
    slack: f64,
    seed: u64,
}

#[derive(Deserialize)]
struct Hyperdrop {
    drop_rates: Vec<f64>,
    draws: usize,
    mean_tol: f64,
    variance_rel_tol: f64,
    seed: u64,
}

#[derive(Deserialize)]
struct Sbm {
    layers: usize,
    signature: String,
    epochs: usize,
    min_test_acc: f64,
    seeds: Vec<u64>,
}

#[derive(Deserialize)]
struct Karate {
    layers: usize,
    signature: String,
    min_mean_test_acc: f64,
    seeds: Vec<u64>,
}

#[derive(Deserialize)]
struct Cora {
    signature: String,
    layers: usize,
    epochs: usize,
    seeds: Vec<u64>,
    min_mean_test_acc: f64,
    drop_rates: Vec<f64>,
    max_hyperdrop_loss: f64,
}

#[derive(Deserialize)]
struct Determinism {
    epochs: usize,
    layers: usize,
    drop_rate: f64,
    seed: u64,
}

fn random_unit(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let s = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if s > 1e-9 {
            return g.into_iter().map(|v| v / s).collect();
        }
    }
}

/// A point at hyperbolic distance up to `r_max` from the canonical origin.
fn random_point(d: usize, r_max: f64, rng: &mut ChaCha8Rng) -> LorentzPoint {
    let r = rng.random_range(0.0..r_max);
    let spatial: Vec<f64> = random_unit(d, rng).into_iter().map(|u| r.sinh() * u).collect();
    LorentzPoint::from_spatial(&spatial).expect("finite spatial part")
}

/// A tangent vector at `x` with Lorentz norm up to `t_max`.
fn random_tangent(x: &LorentzPoint, t_max: f64, rng: &mut ChaCha8Rng) -> TangentVector {
    let raw: Vec<f64> = (0..=x.dim()).map(|_| StandardNormal.sample(rng)).collect();
    let v = project_to_tangent(x, &raw).expect("tangent projection");
    let n = lorentz_norm(&v);
    let t = rng.random_range(0.0..t_max);
    let scaled: Vec<f64> = v.coords().iter().map(|c| c * t / n.max(1e-300)).collect();
    TangentVector::new(x.clone(), scaled).expect("scaled tangent")
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn scale(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).fold(1.0, f64::max)
}

fn constraint_error(x: &LorentzPoint) -> f64 {
    let c = x.coords();
    (lorentz_inner(c, c).unwrap() + 1.0).abs() / (c[0] * c[0]).max(1.0)
}

fn a1(e: &Geometry) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut constraint, mut roundtrip, mut isometry, mut dist_log) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &d in &e.dims {
        for _ in 0..e.samples {
            let x = random_point(d, 3.0, &mut rng);
            let y = random_point(d, 3.0, &mut rng);
            let v = random_tangent(&x, 3.0, &mut rng);
            let w = random_tangent(&x, 3.0, &mut rng);

            let ev = exp_map(&v);
            constraint = constraint.max(constraint_error(&x)).max(constraint_error(&ev));

            // exp_x(log_x y) = y and log_x(exp_x v) = v, relative to coordinate scale
            let l = log_map(&x, &y).map_err(err)?;
            let back = exp_map(&l);
            roundtrip = roundtrip.max(max_abs_diff(back.coords(), y.coords()) / scale(y.coords()));
            let lv = log_map(&x, &ev).map_err(err)?;
            roundtrip = roundtrip.max(max_abs_diff(lv.coords(), v.coords()) / scale(v.coords()));

            // transport preserves Lorentz inner products and tangency
            let pv = parallel_transport(&v, &y).map_err(err)?;
            let pw = parallel_transport(&w, &y).map_err(err)?;
            let before = lorentz_inner(v.coords(), w.coords()).unwrap();
            let after = lorentz_inner(pv.coords(), pw.coords()).unwrap();
            let mag = lorentz_norm(&v).max(1.0) * lorentz_norm(&w).max(1.0);
            isometry = isometry.max((after - before).abs() / mag);
            isometry = isometry.max((lorentz_norm(&pv) - lorentz_norm(&v)).abs() / lorentz_norm(&v).max(1.0));
            let tangency =
                lorentz_inner(y.coords(), pv.coords()).unwrap().abs() / scale(y.coords()) / scale(pv.coords());
            isometry = isometry.max(tangency);

            // ‖log_x y‖_L = d_L(x, y)
            let dxy = lorentz_distance(&x, &y).map_err(err)?;
            dist_log = dist_log.max((lorentz_norm(&l) - dxy).abs() / dxy.max(1.0));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = constraint <= e.constraint_tol
        && roundtrip <= e.roundtrip_tol
        && isometry <= e.isometry_tol
        && dist_log <= e.distance_log_tol
        && secs < e.max_seconds;
    check(
        ok,
        format!(
            "dims {:?} x {} samples: constraint {constraint:.1e}, roundtrip {roundtrip:.1e}, isometry {isometry:.1e}, \
             distance/log {dist_log:.1e}, {secs:.2}s",
            e.dims, e.samples
        ),
    )
}

fn a2(e: &Gradcheck) -> Outcome {
    let start = Instant::now();
    let cfg = RunConfig {
        data: DataSource::Synth(SynthKind::Tree),
        synth_branching: e.tree_branching,
        synth_depth: e.tree_depth,
        layers: e.layers,
        signature: e.signature.clone(),
        ..RunConfig::default()
    };
    let data = load_data(&cfg).map_err(err)?;
    let model = RHgcn::new(cfg.model_config().map_err(err)?, data.num_features(), data.num_classes).map_err(err)?;
    let r = grad_check_model(&model, &data, e.step).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    check(
        r.max_rel_error < e.tol && r.excluded == 0 && data.num_nodes() == 15 && secs < e.max_seconds,
        format!(
            "{} nodes, {} scalars checked, {} excluded, max relative error {:.2e}, {secs:.2}s",
            data.num_nodes(),
            r.checked,
            r.excluded,
            r.max_rel_error
        ),
    )
}

fn a3(e: &RowStochastic) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, &n) in e.sizes.iter().enumerate() {
        let r = row_stochastic_check(e.trials, n, i as u64).map_err(err)?;
        let t = row_stochastic_tightness(n, n / 2).map_err(err)?;
        ok &= r.violations == 0 && (t - 1.0).abs() <= e.tightness_tol;
        parts.push(format!("n={n}: {} violations, max ratio {:.4}, tight {t}", r.violations, r.max_ratio));
    }
    check(ok, format!("{} trials each; {}", e.trials, parts.join("; ")))
}

fn a4(e: &Oversmoothing) -> Outcome {
    let start = Instant::now();
    let base = RunConfig {
        data: DataSource::Synth(SynthKind::Path),
        synth_nodes: e.path_nodes,
        synth_feature_dim: e.feature_dim,
        data_seed: Some(e.data_seed),
        signature: e.signature.clone(),
        layers: e.layers,
        beta_base: e.beta_base,
        origin_radius: e.origin_radius,
        frame: TangentFrame::Transported,
        activation: Activation::Identity,
        ..RunConfig::default()
    };
    let data = load_data(&base).map_err(err)?;
    let ratio = |alpha: f64, seed: u64| -> Result<f64, String> {
        let cfg = RunConfig { alpha, seed, ..base.clone() };
        let model = RHgcn::new(cfg.model_config().map_err(err)?, data.num_features(), data.num_classes).map_err(err)?;
        let t = energy_trace(&model, &data.features, &data.graph).map_err(err)?;
        Ok(t.last() / t.initial())
    };
    let (mut plain_max, mut residual_min) = (0.0f64, f64::INFINITY);
    for &s in &e.model_seeds {
        plain_max = plain_max.max(ratio(e.plain_alpha, s)?);
        residual_min = residual_min.min(ratio(e.residual_alpha, s)?);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        plain_max <= e.plain_max_ratio && residual_min >= e.residual_min_ratio && secs < e.max_seconds,
        format!(
            "{}-node path, L={}, seeds {:?}: alpha={} max E_L/E_0 {plain_max:.2e} (<= {:.0e}), alpha={} min {residual_min:.2e} \
             (>= {:.0e}), {secs:.2}s",
            e.path_nodes, e.layers, e.model_seeds, e.plain_alpha, e.plain_max_ratio, e.residual_alpha, e.residual_min_ratio
        ),
    )
}

fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> SparseGraph {
    let p = rng.random_range(0.15..0.9);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1));
    }
    SparseGraph::new(n, &edges).expect("valid edges")
}

fn a5(e: &DecayBound) -> Outcome {
    const SIGNATURES: [&str; 4] = ["2x2", "3x1", "1x3", "2x1,4x1"];
    let mut rng = ChaCha8Rng::seed_from_u64(e.seed);
    let (mut rejected, mut rows, mut violations, mut worst) = (0usize, 0usize, 0usize, 0.0f64);
    for c in 0..e.configs {
        let graph = loop {
            let n = rng.random_range(3..=e.max_nodes);
            let g = random_graph(n, &mut rng);
            if spectral_premise(&g).map_err(err)?.0 {
                break g;
            }
            rejected += 1;
        };
        let n = graph.n();
        let f = rng.random_range(2..=5);
        let features =
            Matrix::from_vec(n, f, (0..n * f).map(|_| StandardNormal.sample(&mut rng)).collect()).map_err(err)?;
        let config = ModelConfig {
            signature: SIGNATURES[rng.random_range(0..SIGNATURES.len())].parse().map_err(err)?,
            origin_radius: 0.0,
            layers: rng.random_range(1..=8),
            alpha: 0.0,
            beta_base: rng.random_range(0.0..1.7),
            activation: Activation::Identity,
            seed: c as u64,
            ..ModelConfig::default()
        };
        let mut model = RHgcn::new(config, f, 2).map_err(err)?;
        if rng.random::<bool>() {
            rescale_weights(&mut model, rng.random_range(0.3..2.0));
        }
        let r = run_decay_bound(&model, &features, &graph, false, e.slack).map_err(err)?;
        rows += r.rows.len();
        violations += r.violations;
        for row in &r.rows {
            if row.bound > 0.0 {
                worst = worst.max(row.energy / row.bound);
            }
        }
    }
    check(
        violations == 0,
        format!(
            "{} configs (n <= {}), {rows} layer checks, {violations} violations, max energy/bound {worst:.4}, \
             {rejected} graphs rejected by the spectral premise",
            e.configs, e.max_nodes
        ),
    )
}

fn a6(e: &Hyperdrop) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for &eta in &e.drop_rates {
        let spec = NoiseSpec::new(eta).map_err(err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(e.seed);
        let (mut mean, mut m2) = (0.0f64, 0.0f64);
        for k in 1..=e.draws {
            let x = spec.sample(&mut rng);
            let d = x - mean;
            mean += d / k as f64;
            m2 += d * (x - mean);
        }
        let var = m2 / (e.draws - 1) as f64;
        let target = eta / (1.0 - eta);
        ok &= (mean - 1.0).abs() <= e.mean_tol && (var - target).abs() <= e.variance_rel_tol * target;
        parts.push(format!("eta={eta}: mean {mean:.4}, variance {var:.4} (target {target:.4})"));
    }
    check(ok, format!("{} draws; {}", e.draws, parts.join("; ")))
}

fn train_accuracy(cfg: &RunConfig, data: &NodeDataset) -> Result<f64, String> {
    let mut model = RHgcn::new(cfg.model_config().map_err(err)?, data.num_features(), data.num_classes).map_err(err)?;
    let out = train(&mut model, data, &cfg.train_config().map_err(err)?, |_| {}).map_err(err)?;
    Ok(out.test_acc)
}

/// Test accuracy for each seed, trained concurrently.
fn seed_accuracies(base: &RunConfig, seeds: &[u64]) -> Result<Vec<f64>, String> {
    std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                s.spawn(move || {
                    let cfg = RunConfig { seed, ..base.clone() };
                    let data = load_data(&cfg).map_err(err)?;
                    train_accuracy(&cfg, &data)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread")).collect()
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn a7(sbm: &Sbm, karate: &Karate) -> Outcome {
    let start = Instant::now();
    let sbm_cfg =
        RunConfig { layers: sbm.layers, signature: sbm.signature.clone(), epochs: sbm.epochs, ..RunConfig::default() };
    let sbm_acc = seed_accuracies(&sbm_cfg, &sbm.seeds)?;
    let karate_cfg = RunConfig {
        data: DataSource::Synth(SynthKind::Karate),
        layers: karate.layers,
        signature: karate.signature.clone(),
        ..RunConfig::default()
    };
    let karate_acc = seed_accuracies(&karate_cfg, &karate.seeds)?;
    let sbm_min = sbm_acc.iter().copied().fold(f64::INFINITY, f64::min);
    let karate_mean = mean(&karate_acc);
    check(
        sbm_min >= sbm.min_test_acc && karate_mean >= karate.min_mean_test_acc,
        format!(
            "SBM {}-layer, {} epochs: test {:?} (min >= {}); karate {}-layer: test {:?}, mean {karate_mean:.3} (>= {}); {:.1}s",
            sbm.layers,
            sbm.epochs,
            sbm_acc,
            sbm.min_test_acc,
            karate.layers,
            karate_acc,
            karate.min_mean_test_acc,
            start.elapsed().as_secs_f64()
        ),
    )
}

/// `None` when `CORA_DIR` is unset.
fn a8(e: &Cora) -> Option<Outcome> {
    let dir = PathBuf::from(std::env::var_os("CORA_DIR")?);
    Some((|| {
        let data = load_dataset(&dir).map_err(err)?;
        let base = RunConfig {
            data: DataSource::Dir(dir.clone()),
            signature: e.signature.clone(),
            layers: e.layers,
            epochs: e.epochs,
            ..RunConfig::default()
        };
        let run = |drop_rate: f64| -> Result<f64, String> {
            let accs = e
                .seeds
                .iter()
                .map(|&seed| train_accuracy(&RunConfig { seed, drop_rate, ..base.clone() }, &data))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(mean(&accs))
        };
        let plain = run(0.0)?;
        let mut best = (0.0, f64::NEG_INFINITY);
        for &eta in &e.drop_rates {
            let m = run(eta)?;
            if m > best.1 {
                best = (eta, m);
            }
        }
        check(
            plain >= e.min_mean_test_acc && best.1 >= plain - e.max_hyperdrop_loss,
            format!(
                "mean test over {} seeds: eta=0 {plain:.4} (>= {}), best eta={} {:.4} (>= eta=0 - {})",
                e.seeds.len(),
                e.min_mean_test_acc,
                best.0,
                best.1,
                e.max_hyperdrop_loss
            ),
        )
    })())
}

fn a9(e: &Determinism) -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let out = dir.path().join("run");
    let run = |out: &Path| -> Result<Vec<u8>, String> {
        let o = Command::new(env!("CARGO_BIN_EXE_rhgcn"))
            .args(["train", "--quiet", "--epochs", &e.epochs.to_string(), "--layers", &e.layers.to_string()])
            .args(["--drop-rate", &e.drop_rate.to_string(), "--seed", &e.seed.to_string(), "--out"])
            .arg(out)
            .output()
            .map_err(err)?;
        if !o.status.success() {
            return Err(format!("train exited with {}: {}", o.status, String::from_utf8_lossy(&o.stderr)));
        }
        std::fs::read(out.join("metrics.csv")).map_err(err)
    };
    // Same output directory, so the echoed configuration matches too.
    let first = run(&out)?;
    let second = run(&out)?;
    check(
        first == second && !first.is_empty(),
        format!(
            "two runs with seed {}, noise {}: metrics.csv {} bytes, identical: {}",
            e.seed,
            e.drop_rate,
            first.len(),
            first == second
        ),
    )
}

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/expected_values.toml");
    let text = std::fs::read_to_string(&path).expect("expected values file");
    let e: Expected = toml::from_str(&text).expect("valid expected values");

    let mut failed = 0;
    let mut report = |name: &str, outcome: Option<Outcome>| match outcome {
        Some(Ok(d)) => println!("{name} PASS {d}"),
        Some(Err(d)) => {
            failed += 1;
            println!("{name} FAIL {d}");
        }
        None => println!("{name} SKIP set CORA_DIR to a dataset directory holding the Cora citation graph"),
    };
    report("A1", Some(a1(&e.geometry)));
    report("A2", Some(a2(&e.gradcheck)));
    report("A3", Some(a3(&e.row_stochastic)));
    report("A4", Some(a4(&e.oversmoothing)));
    report("A5", Some(a5(&e.decay_bound)));
    report("A6", Some(a6(&e.hyperdrop)));
    report("A7", Some(a7(&e.sbm, &e.karate)));
    report("A8", a8(&e.cora));
    report("A9", Some(a9(&e.determinism)));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

//! Full-batch semi-supervised training with early stopping.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::gradcheck::{grad_check, grad_check_with_fault};
use crate::autodiff::{Fault, GradCheckReport, Tape, Var};
use crate::error::{bail, Result};
use crate::graph::NodeDataset;
use crate::model::{accuracy, loss, Mode, Params, RHgcn};

/// Largest graph accepted by [`grad_check_model`].
pub const GRAD_CHECK_MAX_NODES: usize = 50;
/// Pass threshold on the maximum relative error.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;
use crate::optim::{Optimizer, OptimizerConfig};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    /// Upper bound on optimizer steps.
    pub epochs: usize,
    /// Stop after this many epochs without a validation gain.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { optimizer: OptimizerConfig::default(), epochs: 1000, patience: 100 }
    }
}

/// One row of the training log. Epoch 0 is the untrained model; there the
/// training loss is measured without noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// Test accuracy of the best-validation parameters.
    pub test_acc: f64,
    pub best_params: Params,
    pub history: Vec<EpochMetrics>,
    pub stopped_early: bool,
}

fn evaluate(model: &RHgcn, data: &NodeDataset) -> Result<(f64, f64, f64, f64)> {
    let lp = model.predict(&data.features, &data.graph)?;
    if !lp.is_finite() {
        bail!(Numeric, "non-finite class scores");
    }
    let s = &data.splits;
    let train_loss = loss(&lp, &data.labels, &s.train)?;
    let val_loss = if s.val.is_empty() { f64::NAN } else { loss(&lp, &data.labels, &s.val)? };
    Ok((train_loss, val_loss, accuracy(&lp, &data.labels, &s.val), accuracy(&lp, &data.labels, &s.test)))
}

/// Trains `model` in place and leaves it holding the best-validation
/// parameters (highest accuracy, then lowest loss). `observer` sees every log row as it is produced.
pub fn train(
    model: &mut RHgcn,
    data: &NodeDataset,
    config: &TrainConfig,
    mut observer: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    model.validate()?;
    if data.splits.train.is_empty() {
        bail!(Usage, "training split is empty");
    }
    if data.num_classes > model.num_classes {
        bail!(Dimension, "dataset has {} classes, model predicts {}", data.num_classes, model.num_classes);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
    rng.set_stream(2);
    let mut opt = Optimizer::new(config.optimizer, &model.params)?;

    let (tl, vl, va, ta) = evaluate(model, data)?;
    let first = EpochMetrics { epoch: 0, train_loss: tl, val_loss: vl, val_acc: va, test_acc: ta };
    observer(&first);
    let mut history = alloc::vec![first];
    let (mut best_epoch, mut best_val, mut best_test, mut best_loss) = (0, va, ta, vl);
    let mut best_params = model.params.clone();
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.epochs {
        let mut tape = Tape::new();
        let vars = model.params.register(&mut tape, true);
        let fw = model.forward(&mut tape, &vars, &data.features, &data.graph, Mode::Train(&mut rng))?;
        let targets: Vec<usize> = data.splits.train.iter().map(|&i| data.labels[i]).collect();
        let l = tape.nll(fw.log_probs, &data.splits.train, &targets)?;
        let train_loss = tape.value(l).get(0, 0);
        if !train_loss.is_finite() {
            bail!(Numeric, "training loss diverged at epoch {epoch}");
        }
        let grads = tape.backward(l)?;
        let g = model.params.gradients(&vars, &grads)?;
        if !g.is_finite() {
            bail!(Numeric, "non-finite gradient at epoch {epoch}");
        }
        opt.step(&mut model.params, &g)?;
        if !model.params.is_finite() {
            bail!(Numeric, "parameters diverged at epoch {epoch}");
        }

        let (_, val_loss, val_acc, test_acc) = evaluate(model, data)?;
        let row = EpochMetrics { epoch, train_loss, val_loss, val_acc, test_acc };
        observer(&row);
        history.push(row);
        // Accuracy first; on small validation sets it saturates, so a lower
        // validation loss breaks ties.
        if val_acc > best_val || (val_acc == best_val && val_loss < best_loss) {
            best_val = val_acc;
            best_loss = val_loss;
            best_test = test_acc;
            best_epoch = epoch;
            best_params = model.params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }
    model.params = best_params.clone();
    Ok(TrainOutcome { best_epoch, best_val_acc: best_val, test_acc: best_test, best_params, history, stopped_early })
}

/// Finite-difference check of every parameter gradient of the training loss
/// on `data`. Noise must be off, since the objective has to be
/// deterministic.
pub fn grad_check_model(model: &RHgcn, data: &NodeDataset, step: f64) -> Result<GradCheckReport> {
    grad_check_model_inner(model, data, step, None)
}

#[doc(hidden)]
pub fn grad_check_model_with_fault(
    model: &RHgcn,
    data: &NodeDataset,
    step: f64,
    fault: Fault,
) -> Result<GradCheckReport> {
    grad_check_model_inner(model, data, step, Some(fault))
}

fn grad_check_model_inner(
    model: &RHgcn,
    data: &NodeDataset,
    step: f64,
    fault: Option<Fault>,
) -> Result<GradCheckReport> {
    model.validate()?;
    if model.config.noise.is_active() {
        bail!(Usage, "gradient checking needs HyperDrop off (drop rate {})", model.config.noise.drop_rate);
    }
    if data.num_nodes() > GRAD_CHECK_MAX_NODES {
        bail!(Usage, "gradient checking is limited to {GRAD_CHECK_MAX_NODES} nodes, graph has {}", data.num_nodes());
    }
    if data.splits.train.is_empty() {
        bail!(Usage, "training split is empty");
    }
    let targets: Vec<usize> = data.splits.train.iter().map(|&i| data.labels[i]).collect();
    let objective = |t: &mut Tape, vars: &[Var]| {
        let fw = model.forward(t, vars, &data.features, &data.graph, Mode::Eval)?;
        t.nll(fw.log_probs, &data.splits.train, &targets)
    };
    let params = model.params.to_list();
    match fault {
        None => grad_check(&objective, &params, step),
        Some(f) => grad_check_with_fault(&objective, &params, step, f),
    }
}

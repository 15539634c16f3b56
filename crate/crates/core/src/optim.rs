//! First-order optimizers over [`Params`].
//!
//! Weight decay is added to the gradient of layer weights `W` only; input
//! maps and the classifier are not decayed.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::linalg::Matrix;
use crate::model::{ParamKind, Params};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum OptimizerConfig {
    Sgd { lr: f64, momentum: f64, weight_decay: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64, weight_decay: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam { lr: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 5e-4 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let (lr, wd) = match *self {
            OptimizerConfig::Sgd { lr, momentum, weight_decay } => {
                if !(0.0..1.0).contains(&momentum) {
                    bail!(Config, "momentum must lie in [0, 1), got {momentum}");
                }
                (lr, weight_decay)
            }
            OptimizerConfig::Adam { lr, beta1, beta2, eps, weight_decay } => {
                if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2)) {
                    bail!(Config, "Adam betas must lie in [0, 1), got {beta1} and {beta2}");
                }
                if !(eps > 0.0 && eps.is_finite()) {
                    bail!(Config, "Adam epsilon must be positive, got {eps}");
                }
                (lr, weight_decay)
            }
        };
        if !(lr > 0.0 && lr.is_finite()) {
            bail!(Config, "learning rate must be positive, got {lr}");
        }
        if !(wd >= 0.0 && wd.is_finite()) {
            bail!(Config, "weight decay must be nonnegative, got {wd}");
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerConfig::Sgd { .. } => "sgd",
            OptimizerConfig::Adam { .. } => "adam",
        }
    }
}

/// Optimizer state; one slot per parameter tensor.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, params: &Params) -> Result<Self> {
        config.validate()?;
        let zeros: Vec<Matrix> = params.iter().map(|(_, m)| Matrix::zeros(m.rows(), m.cols())).collect();
        Ok(Self { config, second: zeros.clone(), first: zeros, steps: 0 })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update in place.
    pub fn step(&mut self, params: &mut Params, grads: &Params) -> Result<()> {
        if grads.iter().count() != self.first.len() || params.iter().count() != self.first.len() {
            bail!(Dimension, "optimizer state does not match the parameter layout");
        }
        self.steps += 1;
        let t = self.steps as f64;
        let config = self.config;
        for (slot, ((kind, p), (_, g))) in params.iter_mut().zip(grads.iter()).enumerate() {
            if p.shape() != g.shape() {
                bail!(Dimension, "gradient shape {:?} for parameter {:?}", g.shape(), p.shape());
            }
            let (m, v) = (&mut self.first[slot], &mut self.second[slot]);
            let pd = p.as_mut_slice();
            let gd = g.as_slice();
            match config {
                OptimizerConfig::Sgd { lr, momentum, weight_decay } => {
                    let wd = if kind == ParamKind::Weight { weight_decay } else { 0.0 };
                    for ((x, &gi), mi) in pd.iter_mut().zip(gd).zip(m.as_mut_slice()) {
                        let gi = gi + wd * *x;
                        *mi = momentum * *mi + gi;
                        *x -= lr * *mi;
                    }
                }
                OptimizerConfig::Adam { lr, beta1, beta2, eps, weight_decay } => {
                    let wd = if kind == ParamKind::Weight { weight_decay } else { 0.0 };
                    let c1 = 1.0 - libm::pow(beta1, t);
                    let c2 = 1.0 - libm::pow(beta2, t);
                    for (((x, &gi), mi), vi) in pd.iter_mut().zip(gd).zip(m.as_mut_slice()).zip(v.as_mut_slice()) {
                        let gi = gi + wd * *x;
                        *mi = beta1 * *mi + (1.0 - beta1) * gi;
                        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                        *x -= lr * (*mi / c1) / (libm::sqrt(*vi / c2) + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, RHgcn};

    fn model() -> RHgcn {
        RHgcn::new(ModelConfig::default(), 3, 2).unwrap()
    }

    #[test]
    fn sgd_step_and_decay_scope() {
        let m = model();
        let mut p = m.params.clone();
        let zero =
            p.with_list(&p.to_list().iter().map(|x| Matrix::zeros(x.rows(), x.cols())).collect::<Vec<_>>()).unwrap();
        let cfg = OptimizerConfig::Sgd { lr: 0.1, momentum: 0.0, weight_decay: 0.5 };
        let mut opt = Optimizer::new(cfg, &p).unwrap();
        opt.step(&mut p, &zero).unwrap();
        // zero gradient: only W shrinks, by lr · wd
        assert_eq!(p.input_maps, m.params.input_maps);
        assert_eq!(p.classifier, m.params.classifier);
        assert!(p.weights[0][0].max_abs_diff(&m.params.weights[0][0].scale(0.95)) < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let m = model();
        let mut p = m.params.clone();
        let ones = p
            .with_list(&p.to_list().iter().map(|x| Matrix::filled(x.rows(), x.cols(), 2.0)).collect::<Vec<_>>())
            .unwrap();
        let cfg = OptimizerConfig::Adam { lr: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 };
        let mut opt = Optimizer::new(cfg, &p).unwrap();
        opt.step(&mut p, &ones).unwrap();
        let d = m.params.bias.get(0, 0) - p.bias.get(0, 0);
        assert!((d - 0.01).abs() < 1e-9);
    }

    #[test]
    fn invalid_settings() {
        let p = model().params;
        assert!(Optimizer::new(OptimizerConfig::Sgd { lr: 0.0, momentum: 0.9, weight_decay: 0.0 }, &p).is_err());
        assert!(Optimizer::new(OptimizerConfig::Sgd { lr: 0.1, momentum: 1.0, weight_decay: 0.0 }, &p).is_err());
    }
}

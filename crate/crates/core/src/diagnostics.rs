//! Dirichlet-energy diagnostics for over-smoothing.
//!
//! The energy of a batch is `tr(log_o(H)ᵀ Δ̃ log_o(H))` with `Δ̃ = I − P̃` and
//! `o` the batch's origin; a product representation reports the maximum over
//! its components. Without the residual term (`α = 0`) each layer satisfies
//!
//! ```text
//! E(H⁽ˡ⁾) ≤ (1−λ)² ‖(1−β_ℓ)I + β_ℓ W⁽ˡ⁾‖₂² E(H⁽ˡ⁻¹⁾)
//! ```
//!
//! with `λ` the smallest non-zero eigenvalue of `Δ̃`, provided the activation
//! leaves the tangents untouched and every eigenvalue `μ ≠ 0` of `Δ̃` has
//! `|1 − μ| ≤ 1 − λ`. [`decay_bound_check`] evaluates the inequality layer
//! by layer; [`spectral_premise`] reports whether the second condition holds.
//!
//! Note that `Δ̃` annihilates `D̃^{1/2}·1`, not the constant vector: identical
//! rows have zero energy only on regular graphs.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{bail, Result};
use crate::graph::{Csr, SparseGraph, DENSE_LIMIT, EIGEN_ZERO_TOL};
use crate::linalg::{euclidean_norm, Matrix};
use crate::model::{hgc_layer, Activation, ModelConfig, RHgcn};
use crate::ops::LorentzBatch;

/// Energy of tangent rows: `Σ_c L[:,c]ᵀ Δ̃ L[:,c]`.
pub fn tangent_energy(logs: &Matrix, laplacian: &Csr) -> Result<f64> {
    if logs.rows() != laplacian.n() {
        bail!(Dimension, "{} rows against a {}-node Laplacian", logs.rows(), laplacian.n());
    }
    let lx = laplacian.mul_dense(logs)?;
    Ok(logs.as_slice().iter().zip(lx.as_slice()).map(|(a, b)| a * b).sum())
}

/// Energy of one component at its own origin.
pub fn dirichlet_energy(h: &LorentzBatch, laplacian: &Csr) -> Result<f64> {
    tangent_energy(&h.log_at_origin(), laplacian)
}

/// Per-component energies and their maximum.
pub fn product_energy(parts: &[LorentzBatch], laplacian: &Csr) -> Result<(Vec<f64>, f64)> {
    if parts.is_empty() {
        bail!(Dimension, "product energy of zero components");
    }
    let e = parts.iter().map(|p| dirichlet_energy(p, laplacian)).collect::<Result<Vec<_>>>()?;
    let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((e, max))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerEnergy {
    pub layer: usize,
    pub energies: Vec<f64>,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnergyTrace {
    /// Layer 0 is the lifted input.
    pub layers: Vec<LayerEnergy>,
    /// `None` when the graph exceeds the dense-solve cap.
    pub spectral_gap: Option<f64>,
    pub alpha: f64,
    /// `β_ℓ` for `ℓ = 1..=L`.
    pub betas: Vec<f64>,
    pub seed: u64,
}

impl EnergyTrace {
    pub fn initial(&self) -> f64 {
        self.layers.first().map_or(0.0, |l| l.max)
    }

    pub fn last(&self) -> f64 {
        self.layers.last().map_or(0.0, |l| l.max)
    }
}

fn gap_if_small(graph: &SparseGraph) -> Result<Option<f64>> {
    if graph.n() > DENSE_LIMIT {
        return Ok(None);
    }
    graph.spectral_gap().map(Some)
}

/// Evaluation-mode energy after every layer of `model`.
pub fn energy_trace(model: &RHgcn, features: &Matrix, graph: &SparseGraph) -> Result<EnergyTrace> {
    let hidden = model.hidden_states(features, graph)?;
    let lap = graph.laplacian_norm();
    let layers = hidden
        .iter()
        .enumerate()
        .map(|(layer, parts)| {
            let (energies, max) = product_energy(parts, lap)?;
            Ok(LayerEnergy { layer, energies, max })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyTrace {
        layers,
        spectral_gap: gap_if_small(graph)?,
        alpha: model.config.alpha,
        betas: (1..=model.config.layers).map(|l| model.config.beta(l)).collect(),
        seed: model.config.seed,
    })
}

/// Whether `|1 − μ| ≤ 1 − λ` for every non-zero eigenvalue `μ` of `Δ̃`, with
/// the largest `|1 − μ|` found.
pub fn spectral_premise(graph: &SparseGraph) -> Result<(bool, f64)> {
    if graph.n() > DENSE_LIMIT {
        bail!(Capability, "dense eigen-solve refused for {} nodes (limit {DENSE_LIMIT})", graph.n());
    }
    let ev = graph.laplacian_norm().to_dense().symmetric_eigenvalues()?;
    let nonzero: Vec<f64> = ev.into_iter().filter(|&m| m > EIGEN_ZERO_TOL).collect();
    let Some(&lambda) = nonzero.first() else {
        return Ok((true, 0.0));
    };
    let worst = nonzero.iter().map(|m| (1.0 - m).abs()).fold(0.0, f64::max);
    Ok((worst <= 1.0 - lambda + 1e-12, worst))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundRow {
    pub layer: usize,
    pub component: usize,
    pub energy: f64,
    pub bound: f64,
    pub op_norm: f64,
    pub holds: bool,
    /// Layer skipped because the activation changed the tangents.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundReport {
    pub spectral_gap: f64,
    pub slack: f64,
    pub rows: Vec<BoundRow>,
    pub violations: usize,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub const DEFAULT_SLACK: f64 = 1e-6;

/// Evaluates the decay inequality per layer and component on a recorded
/// trace. `op_norms[ℓ−1][j] = ‖(1−β_ℓ)I + β_ℓ W_ℓj‖₂`.
pub fn decay_bound_check(trace: &EnergyTrace, lambda: f64, op_norms: &[Vec<f64>], slack: f64) -> Result<BoundReport> {
    if trace.alpha != 0.0 {
        bail!(Usage, "the decay bound applies without the residual term; got alpha = {}", trace.alpha);
    }
    if op_norms.len() + 1 != trace.layers.len() {
        bail!(Dimension, "{} operator-norm rows for {} layers", op_norms.len(), trace.layers.len() - 1);
    }
    let factor = (1.0 - lambda) * (1.0 - lambda);
    let mut rows = Vec::new();
    for (l, norms) in op_norms.iter().enumerate() {
        let (prev, cur) = (&trace.layers[l], &trace.layers[l + 1]);
        if norms.len() != cur.energies.len() {
            bail!(Dimension, "{} operator norms for {} components", norms.len(), cur.energies.len());
        }
        for (j, &norm) in norms.iter().enumerate() {
            let bound = factor * norm * norm * prev.energies[j];
            let energy = cur.energies[j];
            // relative slack on the bound, with a round-off floor
            let holds = energy <= bound * (1.0 + slack) + 1e-12 * trace.initial().max(1e-300);
            rows.push(BoundRow { layer: l + 1, component: j, energy, bound, op_norm: norm, holds, skipped: false });
        }
    }
    let violations = rows.iter().filter(|r| !r.holds).count();
    Ok(BoundReport { spectral_gap: lambda, slack, rows, violations })
}

/// Runs `model` layer by layer through the point-wise route and checks the
/// decay inequality. With ReLU the caller must opt in; a layer is then
/// checked only when every pre-activation tangent coordinate is nonnegative.
pub fn run_decay_bound(
    model: &RHgcn,
    features: &Matrix,
    graph: &SparseGraph,
    allow_relu: bool,
    slack: f64,
) -> Result<BoundReport> {
    model.validate()?;
    let cfg = &model.config;
    if cfg.alpha != 0.0 {
        bail!(Usage, "the decay bound applies without the residual term; got alpha = {}", cfg.alpha);
    }
    if cfg.activation == Activation::Relu && !allow_relu {
        bail!(Usage, "the decay bound is checked with the identity activation unless ReLU is explicitly allowed");
    }
    let lambda = graph.spectral_gap()?;
    let lap = graph.laplacian_norm();
    let factor = (1.0 - lambda) * (1.0 - lambda);
    let hidden = model.hidden_states(features, graph)?;
    let h0 = &hidden[0];
    let mut current = h0.clone();
    let mut rows = Vec::new();
    for l in 0..cfg.layers {
        let mut next = Vec::with_capacity(current.len());
        for (j, h) in current.iter().enumerate() {
            let lp = model.layer_params(l, j);
            let pre = hgc_layer(h, &h0[j], graph, &lp, Activation::Identity)?;
            let skipped =
                cfg.activation == Activation::Relu && pre.log_at_origin().as_slice().iter().any(|&v| v < -1e-12);
            let out = if cfg.activation == Activation::Identity {
                pre
            } else {
                hgc_layer(h, &h0[j], graph, &lp, cfg.activation)?
            };
            let norm = lp.mixed_weight().spectral_norm();
            let before = dirichlet_energy(h, lap)?;
            let energy = dirichlet_energy(&out, lap)?;
            let bound = factor * norm * norm * before;
            let floor = 1e-12 * dirichlet_energy(&h0[j], lap)?.max(1e-300);
            let holds = skipped || energy <= bound * (1.0 + slack) + floor;
            rows.push(BoundRow { layer: l + 1, component: j, energy, bound, op_norm: norm, holds, skipped });
            next.push(out);
        }
        current = next;
    }
    let violations = rows.iter().filter(|r| !r.holds).count();
    Ok(BoundReport { spectral_gap: lambda, slack, rows, violations })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RowStochasticReport {
    pub n: usize,
    pub trials: usize,
    pub violations: usize,
    /// Largest `‖Xu‖₂ / √n` seen.
    pub max_ratio: f64,
    pub seed: u64,
}

/// `‖Xu‖₂ / √n`.
pub fn row_stochastic_ratio(x: &Matrix, u: &[f64]) -> Result<f64> {
    let xu = x.mul_vec(u)?;
    Ok(euclidean_norm(&xu) / libm::sqrt(x.rows() as f64))
}

fn random_stochastic(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut x = Matrix::zeros(n, n);
    for i in 0..n {
        let row = x.row_mut(i);
        match rng.random_range(0..3u8) {
            // flat Dirichlet
            0 => row.iter_mut().for_each(|v| *v = Exp1.sample(rng)),
            // sparse: a few random entries
            1 => {
                let k = rng.random_range(1..=n.min(3));
                for _ in 0..k {
                    row[rng.random_range(0..n)] += rng.random::<f64>() + 1e-3;
                }
            }
            // peaked on one column
            _ => {
                row.iter_mut().for_each(|v| *v = 1e-3 * rng.random::<f64>());
                row[rng.random_range(0..n)] = 1.0;
            }
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    x
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let s = euclidean_norm(&g);
        if s > 1e-12 {
            return g.into_iter().map(|v| v / s).collect();
        }
    }
}

/// Monte-Carlo check of `‖Xu‖₂ ≤ √n` over random row-stochastic `X` and unit
/// `u`.
pub fn row_stochastic_check(trials: usize, n: usize, seed: u64) -> Result<RowStochasticReport> {
    if n == 0 {
        bail!(Config, "matrix size must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut violations, mut max_ratio) = (0, 0.0f64);
    for _ in 0..trials {
        let x = random_stochastic(n, &mut rng);
        let u = random_unit(n, &mut rng);
        let r = row_stochastic_ratio(&x, &u)?;
        if r * libm::sqrt(n as f64) > libm::sqrt(n as f64) + 1e-9 {
            violations += 1;
        }
        max_ratio = max_ratio.max(r);
    }
    Ok(RowStochasticReport { n, trials, violations, max_ratio, seed })
}

/// Ratio reached by `X = 1·e_kᵀ`, `u = e_k`; the bound is attained.
pub fn row_stochastic_tightness(n: usize, k: usize) -> Result<f64> {
    if k >= n {
        return Err(crate::Error::Index { index: k, bound: n });
    }
    let mut x = Matrix::zeros(n, n);
    for i in 0..n {
        x.set(i, k, 1.0);
    }
    let mut u = vec![0.0; n];
    u[k] = 1.0;
    row_stochastic_ratio(&x, &u)
}

/// Rescales every layer weight to the given spectral norm.
pub fn rescale_weights(model: &mut RHgcn, spectral_norm: f64) {
    for w in model.params.weights.iter_mut().flatten() {
        let s = w.spectral_norm();
        if s > 0.0 {
            *w = w.scale(spectral_norm / s);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmoothingRow {
    pub alpha: f64,
    pub layers: usize,
    pub initial: f64,
    pub last: f64,
    pub ratio: f64,
}

/// Seeded random-weight forward passes for every `(alpha, depth)` pair.
/// `base` supplies everything except `alpha` and `layers`; `weight_norm`
/// optionally fixes the spectral norm of every `W`.
pub fn oversmoothing_report(
    features: &Matrix,
    graph: &SparseGraph,
    base: &ModelConfig,
    alphas: &[f64],
    depths: &[usize],
    weight_norm: Option<f64>,
) -> Result<(Vec<EnergyTrace>, Vec<SmoothingRow>)> {
    if graph.n() > DENSE_LIMIT {
        bail!(Capability, "diagnostics are limited to {DENSE_LIMIT} nodes, graph has {}", graph.n());
    }
    let mut traces = Vec::new();
    let mut rows = Vec::new();
    for &layers in depths {
        for &alpha in alphas {
            let cfg = ModelConfig { alpha, layers, ..base.clone() };
            let mut model = RHgcn::new(cfg, features.cols(), 2)?;
            if let Some(s) = weight_norm {
                rescale_weights(&mut model, s);
            }
            let trace = energy_trace(&model, features, graph)?;
            let (initial, last) = (trace.initial(), trace.last());
            let ratio = if initial > 0.0 { last / initial } else { 0.0 };
            rows.push(SmoothingRow { alpha, layers, initial, last, ratio });
            traces.push(trace);
        }
    }
    Ok((traces, rows))
}

//! The residual hyperbolic graph convolution network.
//!
//! Per layer `ℓ` and product component `j` with origin `o`:
//!
//! ```text
//! H̄   = ((1−α) ⊙ (P̃ ⊗ H)) ⊕ (α ⊙ H⁽⁰⁾)
//! H'  = σ_L(((1−β_ℓ) I + β_ℓ W_ℓj) ⊗ H̄)
//! β_ℓ = ln(1 + λ_β / ℓ)
//! ```
//!
//! followed by HyperDrop while training. The classifier reads the concatenated
//! `log_{o_j}` tangents of the last layer.
//!
//! Two evaluation routes exist. [`hgc_layer`] composes the point-wise
//! primitives of [`crate::ops`] row by row. [`RHgcn::forward`] records the
//! same computation on a [`Tape`] in batched form for training, using
//! `log_o ∘ exp_o = id` on `T_o` to skip redundant round trips. Tests hold the
//! two to agreement.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::autodiff::geometry::Frame;
use crate::autodiff::{Gradients, Tape, Var};
use crate::error::{bail, Error, Result};
use crate::graph::SparseGraph;
use crate::linalg::Matrix;
use crate::lorentz::{canonical_origin, LorentzPoint};
use crate::ops::{
    lorentz_activation_in, lorentz_add, lorentz_matvec_in, lorentz_scalar_mul, relu, LorentzBatch, TangentFrame,
};
use crate::product::{build_product, ProductSpec, Signature};

/// Tangent-space nonlinearity inside `σ_L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu(x),
            Activation::Identity => x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

impl core::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "identity" | "none" | "linear" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

/// Which noise draws are shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseGranularity {
    /// One `ξ` per node and component.
    #[default]
    PerNodeComponent,
    /// One `ξ` per component, shared by all nodes.
    PerComponent,
}

impl core::str::FromStr for NoiseGranularity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "per_node_component" => Ok(Self::PerNodeComponent),
            "per_component" => Ok(Self::PerComponent),
            other => Err(Error::Config(format!("unknown noise granularity {other:?}"))),
        }
    }
}

impl NoiseGranularity {
    pub fn name(self) -> &'static str {
        match self {
            Self::PerNodeComponent => "per_node_component",
            Self::PerComponent => "per_component",
        }
    }
}

/// HyperDrop: `ξ ~ N(1, η/(1−η))` applied as `ξ ⊙ x`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseSpec {
    pub drop_rate: f64,
    pub granularity: NoiseGranularity,
    /// Replace negative draws by 0.
    pub clamp_nonnegative: bool,
}

impl NoiseSpec {
    pub fn new(drop_rate: f64) -> Result<Self> {
        let s = Self { drop_rate, ..Self::default() };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.drop_rate) {
            bail!(Config, "drop rate must lie in [0, 1), got {}", self.drop_rate);
        }
        Ok(())
    }

    /// `σ² = η / (1 − η)`.
    pub fn variance(&self) -> f64 {
        self.drop_rate / (1.0 - self.drop_rate)
    }

    pub fn is_active(&self) -> bool {
        self.variance() > 0.0
    }

    /// One multiplier.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let var = self.variance();
        if var <= 0.0 {
            return 1.0;
        }
        // sd > 0 and finite, so construction cannot fail
        let xi = Normal::new(1.0, libm::sqrt(var)).map(|d| d.sample(rng)).unwrap_or(1.0);
        if self.clamp_nonnegative {
            xi.max(0.0)
        } else {
            xi
        }
    }
}

/// HyperDrop on a single point. At evaluation, or with `η = 0`, the point is
/// returned unchanged.
pub fn hyperdrop(
    x: &LorentzPoint,
    noise: &NoiseSpec,
    rng: &mut ChaCha8Rng,
    training: bool,
    origin: &LorentzPoint,
) -> Result<LorentzPoint> {
    noise.validate()?;
    if !training || !noise.is_active() {
        return Ok(x.clone());
    }
    lorentz_scalar_mul(noise.sample(rng), x, origin)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelConfig {
    pub signature: Signature,
    /// Tangent length separating each component origin from the canonical one.
    pub origin_radius: f64,
    pub layers: usize,
    pub alpha: f64,
    /// `λ_β` in `β_ℓ = ln(1 + λ_β/ℓ)`.
    pub beta_base: f64,
    pub noise: NoiseSpec,
    pub activation: Activation,
    /// Frame in which `W` and `σ` act on tangents at each origin.
    pub frame: TangentFrame,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            signature: Signature::new(vec![(2, 2)]).expect("static signature"),
            origin_radius: 1.0,
            layers: 2,
            alpha: 0.1,
            beta_base: 0.5,
            noise: NoiseSpec::default(),
            activation: Activation::Relu,
            frame: TangentFrame::Transported,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            bail!(Config, "at least one layer is required");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            bail!(Config, "alpha must lie in [0, 1], got {}", self.alpha);
        }
        if !(self.beta_base >= 0.0 && libm::log1p(self.beta_base) <= 1.0) {
            bail!(Config, "beta_base must lie in [0, e − 1] so that every β stays in [0, 1], got {}", self.beta_base);
        }
        if !(self.origin_radius.is_finite() && self.origin_radius >= 0.0) {
            bail!(Config, "origin radius must be finite and nonnegative, got {}", self.origin_radius);
        }
        self.noise.validate()
    }

    /// `β_ℓ` for `ℓ = 1..=L`.
    pub fn beta(&self, layer: usize) -> f64 {
        libm::log1p(self.beta_base / layer as f64)
    }
}

/// Everything one hgc layer needs for one component.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Matrix,
    pub alpha: f64,
    pub beta: f64,
    pub frame: TangentFrame,
}

impl LayerParams {
    /// `(1−β) I + β W`.
    pub fn mixed_weight(&self) -> Matrix {
        let n = self.weight.rows();
        let mut m = self.weight.scale(self.beta);
        for i in 0..n {
            m.set(i, i, m.get(i, i) + 1.0 - self.beta);
        }
        m
    }
}

/// One hgc layer on one component, composed row by row from the Lorentz
/// primitives.
pub fn hgc_layer(
    h: &LorentzBatch,
    h0: &LorentzBatch,
    graph: &SparseGraph,
    params: &LayerParams,
    activation: Activation,
) -> Result<LorentzBatch> {
    let n = graph.n();
    let width = h.dim() + 1;
    if h.len() != n || h0.len() != n {
        bail!(Dimension, "batches of {} and {} rows on a graph of {n} nodes", h.len(), h0.len());
    }
    if h0.dim() != h.dim() || h.origin() != h0.origin() {
        bail!(Dimension, "current and initial batches live on different components");
    }
    if params.weight.shape() != (width, width) {
        bail!(Dimension, "weight is {:?}, expected {width}x{width}", params.weight.shape());
    }
    if !((0.0..=1.0).contains(&params.alpha) && (0.0..=1.0).contains(&params.beta)) {
        bail!(Config, "alpha {} and beta {} must lie in [0, 1]", params.alpha, params.beta);
    }
    let o = h.origin();
    let aggregated = graph.adj_norm().mul_dense(&h.log_at_origin())?;
    let mixed = params.mixed_weight();
    let mut out = Matrix::zeros(n, width);
    for i in 0..n {
        let p =
            crate::lorentz::exp_map(&crate::lorentz::TangentVector::from_raw(o.clone(), aggregated.row(i).to_vec()));
        let left = lorentz_scalar_mul(1.0 - params.alpha, &p, o)?;
        let right = lorentz_scalar_mul(params.alpha, &h0.point(i), o)?;
        let bar = lorentz_add(&left, &right, o)?;
        let moved = lorentz_matvec_in(&mixed, &bar, o, params.frame)?;
        let y = lorentz_activation_in(&moved, o, params.frame, |x| activation.apply(x))?;
        out.row_mut(i).copy_from_slice(y.coords());
    }
    Ok(LorentzBatch::from_raw(out, o.clone()))
}

/// Role of a trainable tensor; weight decay touches `Weight` only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    InputMap,
    Weight,
    ClassifierWeight,
    ClassifierBias,
}

/// All trainable tensors.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Params {
    /// `d_j × F` per component.
    pub input_maps: Vec<Matrix>,
    /// `[layer][component]`, each `(d_j+1) × (d_j+1)`.
    pub weights: Vec<Vec<Matrix>>,
    /// `Σ_j (d_j+1) × classes`.
    pub classifier: Matrix,
    /// `1 × classes`.
    pub bias: Matrix,
}

impl Params {
    pub fn iter(&self) -> impl Iterator<Item = (ParamKind, &Matrix)> {
        self.input_maps
            .iter()
            .map(|m| (ParamKind::InputMap, m))
            .chain(self.weights.iter().flatten().map(|m| (ParamKind::Weight, m)))
            .chain(core::iter::once((ParamKind::ClassifierWeight, &self.classifier)))
            .chain(core::iter::once((ParamKind::ClassifierBias, &self.bias)))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamKind, &mut Matrix)> {
        self.input_maps
            .iter_mut()
            .map(|m| (ParamKind::InputMap, m))
            .chain(self.weights.iter_mut().flatten().map(|m| (ParamKind::Weight, m)))
            .chain(core::iter::once((ParamKind::ClassifierWeight, &mut self.classifier)))
            .chain(core::iter::once((ParamKind::ClassifierBias, &mut self.bias)))
    }

    pub fn num_scalars(&self) -> usize {
        self.iter().map(|(_, m)| m.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|(_, m)| m.is_finite())
    }

    /// Flat list in [`Params::iter`] order.
    pub fn to_list(&self) -> Vec<Matrix> {
        self.iter().map(|(_, m)| m.clone()).collect()
    }

    /// Inverse of [`Params::to_list`] against this layout.
    pub fn with_list(&self, list: &[Matrix]) -> Result<Params> {
        let mut out = self.clone();
        let count = out.iter().count();
        if list.len() != count {
            bail!(Dimension, "{} tensors for a layout of {count}", list.len());
        }
        for ((_, slot), m) in out.iter_mut().zip(list) {
            if slot.shape() != m.shape() {
                bail!(Dimension, "tensor of shape {:?} where {:?} is expected", m.shape(), slot.shape());
            }
            *slot = m.clone();
        }
        Ok(out)
    }

    /// Records every tensor on `tape`, in [`Params::iter`] order.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.iter().map(|(_, m)| if trainable { tape.param(m.clone()) } else { tape.constant(m.clone()) }).collect()
    }

    /// Gradients laid out like `self`.
    pub fn gradients(&self, vars: &[Var], grads: &Gradients) -> Result<Params> {
        let list: Vec<Matrix> = vars.iter().map(|v| grads.wrt(*v)).collect();
        self.with_list(&list)
    }
}

/// Borrowed view of registered parameter variables.
struct ParamVars<'a> {
    input_maps: &'a [Var],
    weights: &'a [Var],
    classifier: Var,
    bias: Var,
}

/// Whether HyperDrop is active, and its random source.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Output of a recorded forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `n × classes`.
    pub log_probs: Var,
    /// `hidden[ℓ][j]` for `ℓ = 0..=L`; `ℓ = 0` is the lifted input.
    pub hidden: Vec<Vec<Var>>,
}

/// A configured network with its parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RHgcn {
    pub config: ModelConfig,
    pub spec: ProductSpec,
    pub num_features: usize,
    pub num_classes: usize,
    pub params: Params,
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let limit = libm::sqrt(6.0 / (rows + cols) as f64);
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite Glorot limit");
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| dist.sample(rng)).collect()).expect("length matches shape")
}

impl RHgcn {
    /// Glorot-uniform weights and zero bias; component origins from
    /// `(signature, seed, origin_radius)`.
    pub fn new(config: ModelConfig, num_features: usize, num_classes: usize) -> Result<Self> {
        config.validate()?;
        if num_features == 0 || num_classes < 2 {
            bail!(Config, "need at least one feature and two classes, got {num_features} and {num_classes}");
        }
        let spec = build_product(&config.signature, config.seed, config.origin_radius)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        let dims: Vec<usize> = spec.components.iter().map(|c| c.dim).collect();
        let input_maps = dims.iter().map(|&d| glorot(d, num_features, &mut rng)).collect();
        let weights =
            (0..config.layers).map(|_| dims.iter().map(|&d| glorot(d + 1, d + 1, &mut rng)).collect()).collect();
        let width = spec.ambient_width();
        let classifier = glorot(width, num_classes, &mut rng);
        let params = Params { input_maps, weights, classifier, bias: Matrix::zeros(1, num_classes) };
        Ok(Self { config, spec, num_features, num_classes, params })
    }

    /// Checks that `params` fits the configuration.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let dims: Vec<usize> = self.spec.components.iter().map(|c| c.dim).collect();
        if dims != self.config.signature.dims() {
            bail!(Dimension, "product layout does not match the signature");
        }
        let p = &self.params;
        let ok = p.input_maps.len() == dims.len()
            && p.input_maps.iter().zip(&dims).all(|(m, &d)| m.shape() == (d, self.num_features))
            && p.weights.len() == self.config.layers
            && p.weights.iter().all(|layer| {
                layer.len() == dims.len() && layer.iter().zip(&dims).all(|(w, &d)| w.shape() == (d + 1, d + 1))
            })
            && p.classifier.shape() == (self.spec.ambient_width(), self.num_classes)
            && p.bias.shape() == (1, self.num_classes);
        if !ok {
            bail!(Dimension, "parameter shapes do not match the configuration");
        }
        Ok(())
    }

    pub fn layer_params(&self, layer: usize, component: usize) -> LayerParams {
        LayerParams {
            weight: self.params.weights[layer][component].clone(),
            alpha: self.config.alpha,
            beta: self.config.beta(layer + 1),
            frame: self.config.frame,
        }
    }

    fn check_inputs(&self, features: &Matrix, graph: &SparseGraph) -> Result<()> {
        if features.cols() != self.num_features {
            bail!(Dimension, "{} feature columns, model expects {}", features.cols(), self.num_features);
        }
        if features.rows() != graph.n() {
            bail!(Dimension, "{} feature rows on a graph of {} nodes", features.rows(), graph.n());
        }
        Ok(())
    }

    /// Records the full network on `tape`. `vars` must come from
    /// [`Params::register`] on the same tape.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        features: &Matrix,
        graph: &SparseGraph,
        mut mode: Mode<'_>,
    ) -> Result<Forward> {
        self.check_inputs(features, graph)?;
        let k = self.spec.num_components();
        let layers = self.config.layers;
        if vars.len() != k + k * layers + 2 {
            bail!(Usage, "{} parameter variables for a layout of {}", vars.len(), k + k * layers + 2);
        }
        let pv = ParamVars {
            input_maps: &vars[..k],
            weights: &vars[k..k + k * layers],
            classifier: vars[k + k * layers],
            bias: vars[k + k * layers + 1],
        };
        let n = graph.n();
        let adj = graph.adj_norm();
        let x = tape.constant(features.clone());

        let mut frames = Vec::with_capacity(k);
        let mut origins = Vec::with_capacity(k);
        let mut canons = Vec::with_capacity(k);
        let mut h0 = Vec::with_capacity(k);
        let mut h0_log = Vec::with_capacity(k);
        for (j, comp) in self.spec.components.iter().enumerate() {
            let f = Frame::new(tape, comp.dim + 1)?;
            let o = tape.constant(Matrix::row_vector(comp.origin.coords()));
            let canon = tape.constant(Matrix::row_vector(canonical_origin(comp.dim)?.coords()));
            let mt = tape.transpose(pv.input_maps[j])?;
            let z = tape.matmul(x, mt)?;
            let tan = f.with_zero_time(tape, z)?;
            let moved = f.transport(tape, canon, o, tan)?;
            let h = f.exp(tape, o, moved)?;
            h0_log.push(f.log(tape, o, h)?);
            h0.push(h);
            frames.push(f);
            origins.push(o);
            canons.push(canon);
        }

        let mut hidden = vec![h0.clone()];
        let mut current = h0;
        for l in 0..layers {
            let alpha = self.config.alpha;
            let beta = self.config.beta(l + 1);
            let mut next = Vec::with_capacity(k);
            for j in 0..k {
                let (f, o) = (frames[j], origins[j]);
                let width = f.width();
                // P̃ ⊗ H, then (1−α) ⊙ ·, both expressed in T_o.
                let lh = f.log(tape, o, current[j])?;
                let agg = tape.spmm(adj, lh)?;
                let agg = tape.scale(agg, 1.0 - alpha)?;
                let left = f.exp(tape, o, agg)?;
                // ⊕ (α ⊙ H⁽⁰⁾): transport α·log_o H⁽⁰⁾ to the left operand.
                let right = tape.scale(h0_log[j], alpha)?;
                let right = f.transport(tape, o, left, right)?;
                let bar = f.exp(tape, left, right)?;
                // ((1−β)I + βW) ⊗ H̄
                let lb = f.log(tape, o, bar)?;
                let (base, lb) = match self.config.frame {
                    TangentFrame::Ambient => (o, lb),
                    TangentFrame::Transported => (canons[j], f.transport(tape, o, canons[j], lb)?),
                };
                let w = tape.scale(pv.weights[l * k + j], beta)?;
                let eye = tape.constant(Matrix::identity(width).scale(1.0 - beta));
                let m = tape.add(w, eye)?;
                let mt = tape.transpose(m)?;
                let v = tape.matmul(lb, mt)?;
                let v = f.project_tangent(tape, base, v)?;
                // σ_L: log_o(exp_o v) = v, so σ acts on v directly.
                let v = match self.config.activation {
                    Activation::Identity => v,
                    Activation::Relu => {
                        let r = tape.relu(v)?;
                        f.project_tangent(tape, base, r)?
                    }
                };
                let v = match self.config.frame {
                    TangentFrame::Ambient => v,
                    TangentFrame::Transported => f.transport(tape, base, o, v)?,
                };
                let mut out = f.exp(tape, o, v)?;
                if let Mode::Train(rng) = &mut mode {
                    let noise = self.config.noise;
                    if noise.is_active() {
                        let xi = match noise.granularity {
                            NoiseGranularity::PerNodeComponent => {
                                Matrix::from_vec(n, 1, (0..n).map(|_| noise.sample(rng)).collect())?
                            }
                            NoiseGranularity::PerComponent => Matrix::scalar(noise.sample(rng)),
                        };
                        let xi = tape.constant(xi);
                        let lo = f.log(tape, o, out)?;
                        let scaled = tape.mul(lo, xi)?;
                        out = f.exp(tape, o, scaled)?;
                    }
                }
                next.push(out);
            }
            hidden.push(next.clone());
            current = next;
        }

        let mut tangents = Vec::with_capacity(k);
        for j in 0..k {
            tangents.push(frames[j].log(tape, origins[j], current[j])?);
        }
        let z = tape.concat_cols(&tangents)?;
        let logits = tape.matmul(z, pv.classifier)?;
        let logits = tape.add(logits, pv.bias)?;
        let log_probs = tape.log_softmax(logits)?;
        Ok(Forward { log_probs, hidden })
    }

    /// Evaluation-mode class log-probabilities.
    pub fn predict(&self, features: &Matrix, graph: &SparseGraph) -> Result<Matrix> {
        let mut tape = Tape::new();
        let vars = self.params.register(&mut tape, false);
        let fw = self.forward(&mut tape, &vars, features, graph, Mode::Eval)?;
        Ok(tape.value(fw.log_probs).clone())
    }

    /// Evaluation-mode hidden states as batches, `[layer][component]`.
    pub fn hidden_states(&self, features: &Matrix, graph: &SparseGraph) -> Result<Vec<Vec<LorentzBatch>>> {
        let mut tape = Tape::new();
        let vars = self.params.register(&mut tape, false);
        let fw = self.forward(&mut tape, &vars, features, graph, Mode::Eval)?;
        Ok(fw
            .hidden
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .zip(&self.spec.components)
                    .map(|(v, c)| LorentzBatch::from_raw(tape.value(*v).clone(), c.origin.clone()))
                    .collect()
            })
            .collect())
    }
}

/// Mean negative log-likelihood of `labels[i]` over `idx`.
pub fn loss(log_probs: &Matrix, labels: &[usize], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        bail!(Usage, "loss over an empty index set");
    }
    let mut total = 0.0;
    for &i in idx {
        if i >= log_probs.rows() || i >= labels.len() {
            return Err(Error::Index { index: i, bound: log_probs.rows().min(labels.len()) });
        }
        let c = labels[i];
        if c >= log_probs.cols() {
            return Err(Error::Index { index: c, bound: log_probs.cols() });
        }
        total -= log_probs.get(i, c);
    }
    Ok(total / idx.len() as f64)
}

/// Fraction of `idx` whose arg-max prediction equals the label; ties go to
/// the lowest class index.
pub fn accuracy(log_probs: &Matrix, labels: &[usize], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let hits = idx
        .iter()
        .filter(|&&i| {
            let row = log_probs.row(i);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            labels.get(i) == Some(&best)
        })
        .count();
    hits as f64 / idx.len() as f64
}

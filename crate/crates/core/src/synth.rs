//! Small seeded datasets for tests, diagnostics and desk-scale training.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{bail, Result};
use crate::graph::{NodeDataset, SparseGraph, Splits};
use crate::linalg::Matrix;

/// Generator parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum SynthSpec {
    /// Complete `branching`-ary tree of the given depth. Features are one-hot
    /// depth; the label of a node is the root child its subtree hangs from
    /// (the root gets label 0).
    BalancedTree { branching: usize, depth: usize },
    /// Path `0 − 1 − … − (n−1)`. Features are `feature_dim` smooth random
    /// signals along the path (cumulative Gaussian steps, centred and scaled
    /// to unit RMS); labels split the path into two halves.
    Path { n: usize, feature_dim: usize },
    /// Stochastic block model. Labels are block ids; features are one-hot
    /// block indicators plus Gaussian noise of standard deviation `noise`.
    Sbm { sizes: Vec<usize>, p_in: f64, p_out: f64, noise: f64 },
    /// Zachary's karate club, two factions, one-hot node-id features.
    Karate,
}

/// Fractions of each class placed in train and validation; the rest is test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.2, val: 0.2 }
    }
}

pub fn synth_graph(spec: &SynthSpec, seed: u64) -> Result<NodeDataset> {
    synth_graph_with(spec, seed, SplitFractions::default())
}

pub fn synth_graph_with(spec: &SynthSpec, seed: u64, fractions: SplitFractions) -> Result<NodeDataset> {
    if !(fractions.train > 0.0 && fractions.val >= 0.0 && fractions.train + fractions.val < 1.0) {
        bail!(Config, "split fractions {fractions:?} must leave room for a test set");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, edges, features, labels) = match spec {
        SynthSpec::BalancedTree { branching, depth } => tree(*branching, *depth)?,
        SynthSpec::Path { n, feature_dim } => path(*n, *feature_dim, &mut rng)?,
        SynthSpec::Sbm { sizes, p_in, p_out, noise } => sbm(sizes, *p_in, *p_out, *noise, &mut rng)?,
        SynthSpec::Karate => karate(),
    };
    let graph = SparseGraph::new(n, &edges)?;
    let splits = stratified_splits(&labels, fractions, &mut rng);
    NodeDataset::new(graph, features, labels, splits)
}

type Parts = (usize, Vec<(usize, usize)>, Matrix, Vec<usize>);

fn tree(branching: usize, depth: usize) -> Result<Parts> {
    if branching == 0 {
        bail!(Config, "tree branching must be >= 1");
    }
    let mut level_of = vec![0usize];
    let mut label = vec![0usize];
    let mut edges = Vec::new();
    let mut frontier = vec![0usize];
    for level in 1..=depth {
        let mut next = Vec::new();
        for &parent in &frontier {
            for c in 0..branching {
                let id = level_of.len();
                level_of.push(level);
                label.push(if level == 1 { c } else { label[parent] });
                edges.push((parent, id));
                next.push(id);
            }
        }
        frontier = next;
        if level_of.len() > 1_000_000 {
            bail!(Config, "tree with branching {branching} and depth {depth} is too large");
        }
    }
    let n = level_of.len();
    let mut x = Matrix::zeros(n, depth + 1);
    for (i, &l) in level_of.iter().enumerate() {
        x.set(i, l, 1.0);
    }
    Ok((n, edges, x, label))
}

fn path(n: usize, feature_dim: usize, rng: &mut ChaCha8Rng) -> Result<Parts> {
    if n < 2 || feature_dim == 0 {
        bail!(Config, "path needs n >= 2 and feature_dim >= 1");
    }
    let edges = (0..n - 1).map(|i| (i, i + 1)).collect();
    let mut x = Matrix::zeros(n, feature_dim);
    for c in 0..feature_dim {
        let mut acc = 0.0;
        for i in 0..n {
            let step: f64 = StandardNormal.sample(rng);
            acc += step;
            x.set(i, c, acc);
        }
        let mean = (0..n).map(|i| x.get(i, c)).sum::<f64>() / n as f64;
        let rms = libm::sqrt(
            (0..n)
                .map(|i| {
                    let d = x.get(i, c) - mean;
                    d * d
                })
                .sum::<f64>()
                / n as f64,
        );
        for i in 0..n {
            x.set(i, c, (x.get(i, c) - mean) / rms.max(1e-12));
        }
    }
    let labels = (0..n).map(|i| usize::from(2 * i >= n)).collect();
    Ok((n, edges, x, labels))
}

fn sbm(sizes: &[usize], p_in: f64, p_out: f64, noise: f64, rng: &mut ChaCha8Rng) -> Result<Parts> {
    if sizes.is_empty() || sizes.contains(&0) {
        bail!(Config, "SBM blocks must be non-empty");
    }
    for p in [p_in, p_out] {
        if !(0.0..=1.0).contains(&p) {
            bail!(Config, "SBM probability {p} outside [0, 1]");
        }
    }
    if !(noise.is_finite() && noise >= 0.0) {
        bail!(Config, "SBM noise must be finite and nonnegative");
    }
    let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| core::iter::repeat_n(b, s)).collect();
    let n = labels.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let k = sizes.len();
    let mut x = Matrix::zeros(n, k);
    for (i, &label) in labels.iter().enumerate() {
        for c in 0..k {
            let z: f64 = StandardNormal.sample(rng);
            x.set(i, c, f64::from(u8::from(label == c)) + noise * z);
        }
    }
    Ok((n, edges, x, labels))
}

const KARATE_EDGES: [(usize, usize); 78] = [
    (0, 1),
    (0, 2),
    (0, 3),
    (0, 4),
    (0, 5),
    (0, 6),
    (0, 7),
    (0, 8),
    (0, 10),
    (0, 11),
    (0, 12),
    (0, 13),
    (0, 17),
    (0, 19),
    (0, 21),
    (0, 31),
    (1, 2),
    (1, 3),
    (1, 7),
    (1, 13),
    (1, 17),
    (1, 19),
    (1, 21),
    (1, 30),
    (2, 3),
    (2, 7),
    (2, 8),
    (2, 9),
    (2, 13),
    (2, 27),
    (2, 28),
    (2, 32),
    (3, 7),
    (3, 12),
    (3, 13),
    (4, 6),
    (4, 10),
    (5, 6),
    (5, 10),
    (5, 16),
    (6, 16),
    (8, 30),
    (8, 32),
    (8, 33),
    (9, 33),
    (13, 33),
    (14, 32),
    (14, 33),
    (15, 32),
    (15, 33),
    (18, 32),
    (18, 33),
    (19, 33),
    (20, 32),
    (20, 33),
    (22, 32),
    (22, 33),
    (23, 25),
    (23, 27),
    (23, 29),
    (23, 32),
    (23, 33),
    (24, 25),
    (24, 27),
    (24, 31),
    (25, 31),
    (26, 29),
    (26, 33),
    (27, 33),
    (28, 31),
    (28, 33),
    (29, 32),
    (29, 33),
    (30, 32),
    (30, 33),
    (31, 32),
    (31, 33),
    (32, 33),
];

const KARATE_FACTION: [usize; 34] =
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 0, 1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1];

fn karate() -> Parts {
    (34, KARATE_EDGES.to_vec(), Matrix::identity(34), KARATE_FACTION.to_vec())
}

/// Per class: shuffle, take `ceil(train·m)` (at least one) for training,
/// `round(val·m)` for validation and the rest for test.
pub fn stratified_splits(labels: &[usize], fractions: SplitFractions, rng: &mut ChaCha8Rng) -> Splits {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut splits = Splits::default();
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(rng);
        let m = members.len() as f64;
        let n_train = (libm::ceil(fractions.train * m) as usize).clamp(1, members.len());
        let n_val = (libm::round(fractions.val * m) as usize).min(members.len() - n_train);
        splits.train.extend_from_slice(&members[..n_train]);
        splits.val.extend_from_slice(&members[n_train..n_train + n_val]);
        splits.test.extend_from_slice(&members[n_train + n_val..]);
    }
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    splits
}

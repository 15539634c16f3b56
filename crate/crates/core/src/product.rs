//! Products of Lorentz components, each with its own origin.
//!
//! A [`Signature`] such as `2x8` (eight 2-dimensional components) or
//! `4x2,8x1` fixes the component dimensions; [`build_product`] then draws
//! one origin per component by pushing a seeded random tangent direction of
//! fixed length away from the canonical origin.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{bail, Error, Result};
use crate::linalg::{euclidean_norm, Matrix};
use crate::lorentz::{canonical_origin, kernel, LorentzPoint, TangentVector, Tolerances};
use crate::ops::LorentzBatch;

/// Component layout: a list of `(dimension, count)` groups.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "String", into = "String"))]
pub struct Signature(Vec<(usize, usize)>);

impl Signature {
    pub fn new(groups: Vec<(usize, usize)>) -> Result<Self> {
        if groups.is_empty() || groups.iter().all(|&(_, m)| m == 0) {
            bail!(Config, "a product needs at least one component");
        }
        if let Some(&(d, _)) = groups.iter().find(|&&(d, _)| d == 0) {
            bail!(Config, "component dimension must be >= 1, got {d}");
        }
        Ok(Self(groups))
    }

    pub fn groups(&self) -> &[(usize, usize)] {
        &self.0
    }

    /// Dimension of every component in order.
    pub fn dims(&self) -> Vec<usize> {
        self.0.iter().flat_map(|&(d, m)| core::iter::repeat_n(d, m)).collect()
    }

    pub fn num_components(&self) -> usize {
        self.0.iter().map(|&(_, m)| m).sum()
    }

    /// Model label in the `[d×m]` style.
    pub fn label(&self) -> String {
        let mut s = String::from("[");
        for (i, (d, m)) in self.0.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&alloc::format!("{d}×{m}"));
        }
        s.push(']');
        s
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (d, m)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}x{m}")?;
        }
        Ok(())
    }
}

impl FromStr for Signature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut groups = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let Some((d, m)) = part.split_once(['x', 'X', '×']) else {
                bail!(Config, "signature group `{part}` is not of the form <dim>x<count>");
            };
            let parse = |t: &str| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(alloc::format!("bad number `{t}` in signature `{s}`")))
            };
            groups.push((parse(d)?, parse(m)?));
        }
        Self::new(groups)
    }
}

impl TryFrom<String> for Signature {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Signature> for String {
    fn from(s: Signature) -> String {
        alloc::format!("{s}")
    }
}

/// One Lorentz component of a product.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Component {
    pub dim: usize,
    pub origin: LorentzPoint,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProductSpec {
    pub signature: Signature,
    pub components: Vec<Component>,
    pub seed: u64,
    pub origin_radius: f64,
}

impl ProductSpec {
    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn origins(&self) -> impl Iterator<Item = &LorentzPoint> {
        self.components.iter().map(|c| &c.origin)
    }

    /// Total ambient width `Σ (d_j + 1)`.
    pub fn ambient_width(&self) -> usize {
        self.components.iter().map(|c| c.dim + 1).sum()
    }
}

/// A point of the product: one Lorentz point per component.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    pub parts: Vec<LorentzPoint>,
}

/// Draw per-component origins `o_j = exp_o(r_j)` with `‖r_j‖_L = origin_radius`
/// and a uniformly random direction, seeded.
pub fn build_product(signature: &Signature, seed: u64, origin_radius: f64) -> Result<ProductSpec> {
    if !(origin_radius.is_finite() && origin_radius >= 0.0) {
        bail!(Config, "origin radius must be finite and nonnegative, got {origin_radius}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut components = Vec::with_capacity(signature.num_components());
    for d in signature.dims() {
        let origin = if origin_radius == 0.0 {
            canonical_origin(d)?
        } else {
            let dir = loop {
                let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = euclidean_norm(&g);
                if n > 1e-12 {
                    break g.into_iter().map(|x| x / n * origin_radius).collect::<Vec<_>>();
                }
            };
            let mut v = vec![0.0];
            v.extend(dir);
            crate::lorentz::exp_map(&TangentVector::new(canonical_origin(d)?, v)?)
        };
        components.push(Component { dim: d, origin });
    }
    Ok(ProductSpec { signature: signature.clone(), components, seed, origin_radius })
}

fn check_parts(a: usize, b: usize) -> Result<()> {
    if a != b {
        bail!(Dimension, "product with {a} components against {b} parts");
    }
    Ok(())
}

/// Componentwise `exp`; `v[j]` is read as a tangent at `x.parts[j]`.
pub fn product_exp(x: &ProductPoint, v: &[Vec<f64>]) -> Result<ProductPoint> {
    check_parts(x.parts.len(), v.len())?;
    let tol = Tolerances::DEFAULT;
    let parts = x
        .parts
        .iter()
        .zip(v)
        .map(|(p, t)| {
            if p.coords().len() != t.len() {
                bail!(Dimension, "tangent part of length {} at a point of length {}", t.len(), p.coords().len());
            }
            let mut out = vec![0.0; t.len()];
            kernel::exp(p.coords(), t, &tol, &mut out);
            Ok(LorentzPoint::from_raw(out))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProductPoint { parts })
}

/// Componentwise `log`.
pub fn product_log(x: &ProductPoint, y: &ProductPoint) -> Result<Vec<Vec<f64>>> {
    check_parts(x.parts.len(), y.parts.len())?;
    x.parts.iter().zip(&y.parts).map(|(a, b)| Ok(crate::lorentz::log_map(a, b)?.into_coords())).collect()
}

/// Initial node features on every component.
///
/// For component `j` and node `i`: `z = M_j X_i`, then
/// `H_i = exp_{o_j}(P_{o→o_j}([0, z]))`, i.e. the canonical-origin lift
/// carried over to the component's own origin.
pub fn lift_to_product(features: &Matrix, spec: &ProductSpec, input_maps: &[Matrix]) -> Result<Vec<LorentzBatch>> {
    check_parts(spec.num_components(), input_maps.len())?;
    let tol = Tolerances::DEFAULT;
    let n = features.rows();
    spec.components
        .iter()
        .zip(input_maps)
        .map(|(comp, map)| {
            if map.shape() != (comp.dim, features.cols()) {
                bail!(
                    Dimension,
                    "input map is {}x{}, expected {}x{}",
                    map.rows(),
                    map.cols(),
                    comp.dim,
                    features.cols()
                );
            }
            let canonical = canonical_origin(comp.dim)?;
            let projected = features.matmul(&map.transpose())?;
            let mut rows = Matrix::zeros(n, comp.dim + 1);
            let mut tangent = vec![0.0; comp.dim + 1];
            let mut moved = vec![0.0; comp.dim + 1];
            for i in 0..n {
                tangent[0] = 0.0;
                tangent[1..].copy_from_slice(projected.row(i));
                kernel::transport(canonical.coords(), comp.origin.coords(), &tangent, &tol, &mut moved);
                kernel::exp(comp.origin.coords(), &moved, &tol, rows.row_mut(i));
            }
            Ok(LorentzBatch::from_raw(rows, comp.origin.clone()))
        })
        .collect()
}

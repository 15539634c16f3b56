//! Lorentz-space neural primitives.
//!
//! Each operation pulls its inputs back to the tangent space at a reference
//! origin, acts there with the Euclidean counterpart and pushes the result
//! forward with `exp`. The origin is an explicit argument because every
//! product component carries its own.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::linalg::{euclidean_norm, Matrix};
use crate::lorentz::{kernel, LorentzPoint, Tolerances};

/// `n` points of one Lorentz component, stored as the rows of an
/// `n × (d+1)` matrix, together with the component's origin.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzBatch {
    rows: Matrix,
    origin: LorentzPoint,
}

impl LorentzBatch {
    pub fn new(rows: Matrix, origin: LorentzPoint) -> Result<Self> {
        if rows.cols() != origin.coords().len() {
            bail!(Dimension, "batch rows have {} coordinates, origin has {}", rows.cols(), origin.coords().len());
        }
        for (i, r) in rows.row_iter().enumerate() {
            let q = kernel::inner(r, r);
            let tol = Tolerances::DEFAULT.manifold_eps * {
                let m = r[0].max(1.0);
                m * m
            };
            if !(q + 1.0).abs().le(&tol) || r[0] <= 0.0 {
                bail!(Numeric, "row {i} is off the hyperboloid (<x,x>_L = {q})");
            }
        }
        Ok(Self { rows, origin })
    }

    pub(crate) fn from_raw(rows: Matrix, origin: LorentzPoint) -> Self {
        Self { rows, origin }
    }

    /// Every row at the origin.
    pub fn at_origin(n: usize, origin: LorentzPoint) -> Self {
        let mut rows = Matrix::zeros(n, origin.coords().len());
        for r in 0..n {
            rows.row_mut(r).copy_from_slice(origin.coords());
        }
        Self { rows, origin }
    }

    pub fn from_points(points: &[LorentzPoint], origin: LorentzPoint) -> Result<Self> {
        let rows: Vec<Vec<f64>> = points.iter().map(|p| p.coords().to_vec()).collect();
        let rows = if rows.is_empty() { Matrix::zeros(0, origin.coords().len()) } else { Matrix::from_rows(&rows)? };
        Self::new(rows, origin)
    }

    #[inline]
    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    #[inline]
    pub fn origin(&self) -> &LorentzPoint {
        &self.origin
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rows.rows() == 0
    }

    /// Intrinsic dimension of the component.
    pub fn dim(&self) -> usize {
        self.rows.cols() - 1
    }

    pub fn point(&self, i: usize) -> LorentzPoint {
        LorentzPoint::from_raw(self.rows.row(i).to_vec())
    }

    /// Row-wise `log_origin`, an `n × (d+1)` matrix of tangent vectors.
    pub fn log_at_origin(&self) -> Matrix {
        let tol = Tolerances::DEFAULT;
        let mut out = Matrix::zeros(self.rows.rows(), self.rows.cols());
        for i in 0..self.rows.rows() {
            kernel::log(self.origin.coords(), self.rows.row(i), &tol, out.row_mut(i));
        }
        out
    }

    /// Largest `|⟨x,x⟩_L + 1|` over the rows.
    pub fn max_constraint_violation(&self) -> f64 {
        self.rows.row_iter().map(|r| (kernel::inner(r, r) + 1.0).abs()).fold(0.0, f64::max)
    }
}

fn check_same(x: &LorentzPoint, origin: &LorentzPoint) -> Result<()> {
    if x.coords().len() != origin.coords().len() {
        return Err(Error::Dimension(format!(
            "point of dimension {} against origin of dimension {}",
            x.dim(),
            origin.dim()
        )));
    }
    Ok(())
}

fn log_o(x: &LorentzPoint, origin: &LorentzPoint) -> Vec<f64> {
    let mut v = vec![0.0; x.coords().len()];
    kernel::log(origin.coords(), x.coords(), &Tolerances::DEFAULT, &mut v);
    v
}

fn exp_o(v: &[f64], origin: &LorentzPoint) -> LorentzPoint {
    let mut out = vec![0.0; v.len()];
    kernel::exp(origin.coords(), v, &Tolerances::DEFAULT, &mut out);
    LorentzPoint::from_raw(out)
}

/// `W ⊗ x = exp_o(Π_o(W · log_o x))`.
///
/// An arbitrary `W` need not keep `log_o x` in `T_o`, so the product is
/// projected back onto the tangent space before the exponential.
pub fn lorentz_matvec(w: &Matrix, x: &LorentzPoint, origin: &LorentzPoint) -> Result<LorentzPoint> {
    check_same(x, origin)?;
    let n = x.coords().len();
    if w.shape() != (n, n) {
        bail!(Dimension, "weight is {}x{}, expected {n}x{n}", w.rows(), w.cols());
    }
    let mut v = w.mul_vec(&log_o(x, origin))?;
    kernel::project_to_tangent(origin.coords(), &mut v);
    Ok(exp_o(&v, origin))
}

/// `ξ ⊙ x = exp_o(ξ · log_o x)`.
pub fn lorentz_scalar_mul(xi: f64, x: &LorentzPoint, origin: &LorentzPoint) -> Result<LorentzPoint> {
    check_same(x, origin)?;
    if !xi.is_finite() {
        bail!(Numeric, "scalar {xi} is not finite");
    }
    let v: Vec<f64> = log_o(x, origin).iter().map(|c| xi * c).collect();
    Ok(exp_o(&v, origin))
}

/// `x ⊕ y = exp_x(P_{o→x}(log_o y))`.
pub fn lorentz_add(x: &LorentzPoint, y: &LorentzPoint, origin: &LorentzPoint) -> Result<LorentzPoint> {
    check_same(x, origin)?;
    check_same(y, origin)?;
    let tol = Tolerances::DEFAULT;
    let u = log_o(y, origin);
    let mut moved = vec![0.0; u.len()];
    kernel::transport(origin.coords(), x.coords(), &u, &tol, &mut moved);
    let mut out = vec![0.0; u.len()];
    kernel::exp(x.coords(), &moved, &tol, &mut out);
    Ok(LorentzPoint::from_raw(out))
}

/// `σ_L(x) = exp_o(Π_o(σ(log_o x)))` with `σ` applied coordinate-wise.
pub fn lorentz_activation(x: &LorentzPoint, origin: &LorentzPoint, sigma: impl Fn(f64) -> f64) -> Result<LorentzPoint> {
    check_same(x, origin)?;
    let mut v: Vec<f64> = log_o(x, origin).into_iter().map(sigma).collect();
    kernel::project_to_tangent(origin.coords(), &mut v);
    Ok(exp_o(&v, origin))
}

/// How a matrix or a coordinate-wise map reads tangent vectors at `o`.
///
/// `Ambient` uses the raw ambient coordinates of `T_o` and projects the
/// result back onto `T_o`. Away from the canonical origin that projection
/// conjugates the map by a boost, so its gain can exceed `‖W‖₂` by up to
/// `e^{2r}` at origin radius `r`. `Transported` first carries the tangent to
/// the canonical origin, acts on the spatial coordinates there and carries
/// the result back, which keeps the gain at `‖W‖₂`. The two coincide when
/// `o` is the canonical origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TangentFrame {
    #[default]
    Transported,
    Ambient,
}

impl TangentFrame {
    pub fn name(self) -> &'static str {
        match self {
            TangentFrame::Transported => "transported",
            TangentFrame::Ambient => "ambient",
        }
    }
}

impl core::str::FromStr for TangentFrame {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "transported" => Ok(TangentFrame::Transported),
            "ambient" => Ok(TangentFrame::Ambient),
            other => Err(Error::Config(alloc::format!("unknown tangent frame {other:?}"))),
        }
    }
}

/// Applies `f` to `log_o x` in the given frame and maps back with `exp_o`.
fn act_in_frame(
    x: &LorentzPoint,
    origin: &LorentzPoint,
    frame: TangentFrame,
    f: impl FnOnce(&[f64]) -> Result<Vec<f64>>,
) -> Result<LorentzPoint> {
    check_same(x, origin)?;
    let tol = Tolerances::DEFAULT;
    let u = log_o(x, origin);
    match frame {
        TangentFrame::Ambient => {
            let mut v = f(&u)?;
            kernel::project_to_tangent(origin.coords(), &mut v);
            Ok(exp_o(&v, origin))
        }
        TangentFrame::Transported => {
            let mut canon = vec![0.0; u.len()];
            canon[0] = 1.0;
            let mut c = vec![0.0; u.len()];
            kernel::transport(origin.coords(), &canon, &u, &tol, &mut c);
            let mut v = f(&c)?;
            v[0] = 0.0;
            let mut back = vec![0.0; u.len()];
            kernel::transport(&canon, origin.coords(), &v, &tol, &mut back);
            Ok(exp_o(&back, origin))
        }
    }
}

/// [`lorentz_matvec`] with an explicit [`TangentFrame`].
pub fn lorentz_matvec_in(
    w: &Matrix,
    x: &LorentzPoint,
    origin: &LorentzPoint,
    frame: TangentFrame,
) -> Result<LorentzPoint> {
    let n = x.coords().len();
    if w.shape() != (n, n) {
        bail!(Dimension, "weight is {}x{}, expected {n}x{n}", w.rows(), w.cols());
    }
    act_in_frame(x, origin, frame, |u| w.mul_vec(u))
}

/// [`lorentz_activation`] with an explicit [`TangentFrame`].
pub fn lorentz_activation_in(
    x: &LorentzPoint,
    origin: &LorentzPoint,
    frame: TangentFrame,
    sigma: impl Fn(f64) -> f64,
) -> Result<LorentzPoint> {
    act_in_frame(x, origin, frame, |u| Ok(u.iter().map(|&c| sigma(c)).collect()))
}

/// Lift a Euclidean feature vector onto `L^d` through the canonical origin:
/// `[cosh‖x‖, sinh‖x‖ · x/‖x‖]`.
pub fn lift_features(features: &[f64]) -> Result<LorentzPoint> {
    if features.is_empty() {
        bail!(Dimension, "cannot lift an empty feature vector");
    }
    if features.iter().any(|x| !x.is_finite()) {
        bail!(Numeric, "non-finite feature value");
    }
    let n = euclidean_norm(features);
    let mut coords = Vec::with_capacity(features.len() + 1);
    if n < Tolerances::DEFAULT.taylor_cutoff {
        coords.push(1.0);
        coords.extend(core::iter::repeat_n(0.0, features.len()));
        return Ok(LorentzPoint::from_raw(coords));
    }
    let s = libm::sinh(n) / n;
    coords.push(libm::cosh(n));
    coords.extend(features.iter().map(|x| s * x));
    kernel::project_to_manifold(&mut coords);
    Ok(LorentzPoint::from_raw(coords))
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

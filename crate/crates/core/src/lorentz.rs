//! The Lorentz (hyperboloid) model of hyperbolic space at curvature −1.
//!
//! Points are ambient vectors `x ∈ R^{d+1}` with `⟨x,x⟩_L = −1` and `x₀ > 0`,
//! where `⟨u,v⟩_L = −u₀v₀ + Σ uᵢvᵢ`. A tangent vector at `x` satisfies
//! `⟨x,v⟩_L = 0`.
//!
//! The formulas for `exp`, `log` and parallel transport are singular at
//! coincident points and at zero-length tangents. [`Tolerances`] holds the
//! thresholds below which series or limit forms take over, and every
//! operation that returns a point finishes with [`project_to_manifold`] so
//! round-off does not accumulate across deep stacks.
//!
//! The slice-level kernels in [`kernel`] do the arithmetic; the typed
//! [`LorentzPoint`] / [`TangentVector`] API validates invariants around them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};

/// Numerical thresholds of the geometry kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tolerances {
    /// Accepted deviation of `⟨x,x⟩_L` from −1 (and of `⟨x,v⟩_L` from 0).
    pub manifold_eps: f64,
    /// Margin kept above 1 for `arcosh` arguments.
    pub arcosh_clamp: f64,
    /// Norm (or distance) below which series fallbacks apply.
    pub taylor_cutoff: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances { manifold_eps: 1e-6, arcosh_clamp: 1e-12, taylor_cutoff: 1e-6 };

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !(ok(self.manifold_eps) && ok(self.arcosh_clamp) && ok(self.taylor_cutoff)) {
            bail!(Config, "tolerances must be finite and strictly positive: {self:?}");
        }
        Ok(())
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Slice kernels. Callers guarantee equal lengths ≥ 2.
pub mod kernel {
    use super::Tolerances;
    use crate::linalg::dot;

    /// Minkowski bilinear form.
    #[inline]
    pub fn inner(u: &[f64], v: &[f64]) -> f64 {
        -u[0] * v[0] + dot(&u[1..], &v[1..])
    }

    /// `√max(⟨v,v⟩_L, 0)`.
    #[inline]
    pub fn norm(v: &[f64]) -> f64 {
        libm::sqrt(inner(v, v).max(0.0))
    }

    /// Recompute the time coordinate from the spatial part.
    #[inline]
    pub fn project_to_manifold(x: &mut [f64]) {
        x[0] = libm::sqrt(1.0 + dot(&x[1..], &x[1..]));
    }

    /// `v ← v + ⟨x,v⟩_L x`.
    #[inline]
    pub fn project_to_tangent(x: &[f64], v: &mut [f64]) {
        let c = inner(x, v);
        for (vi, xi) in v.iter_mut().zip(x) {
            *vi += c * xi;
        }
    }

    pub fn exp(x: &[f64], v: &[f64], tol: &Tolerances, out: &mut [f64]) {
        let n = norm(v);
        if n < tol.taylor_cutoff {
            for ((o, xi), vi) in out.iter_mut().zip(x).zip(v) {
                *o = xi + vi;
            }
        } else {
            let (c, s) = (libm::cosh(n), libm::sinh(n) / n);
            for ((o, xi), vi) in out.iter_mut().zip(x).zip(v) {
                *o = c * xi + s * vi;
            }
        }
        project_to_manifold(out);
    }

    /// `arcosh(a) / √(a²−1)`, continuous through `a = 1`.
    pub fn arcosh_ratio(a: f64, tol: &Tolerances) -> f64 {
        let t = a - 1.0;
        if t < tol.taylor_cutoff.max(1e-4) {
            // Series in t = a − 1; exact limit 1 at coincident points.
            let t = t.max(0.0);
            1.0 - t / 3.0 + 2.0 * t * t / 15.0 - 2.0 * t * t * t / 35.0
        } else {
            let a = a.max(1.0 + tol.arcosh_clamp);
            libm::acosh(a) / libm::sqrt(t * (2.0 + t))
        }
    }

    pub fn log(x: &[f64], y: &[f64], tol: &Tolerances, out: &mut [f64]) {
        let a = -inner(x, y);
        let coef = arcosh_ratio(a, tol);
        for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
            *o = coef * (yi - a * xi);
        }
        project_to_tangent(x, out);
    }

    pub fn distance(x: &[f64], y: &[f64], tol: &Tolerances) -> f64 {
        let a = -inner(x, y);
        if a - 1.0 < tol.taylor_cutoff {
            // arcosh loses half its digits next to 1; the log map does not.
            let mut l = alloc::vec![0.0; x.len()];
            log(x, y, tol, &mut l);
            return norm(&l);
        }
        libm::acosh(a.max(1.0))
    }

    /// Transport of `v ∈ T_x` to `T_y` along the geodesic, in the
    /// `v − ⟨log_x y, v⟩/d² · (log_x y + log_y x)` form.
    pub fn transport(x: &[f64], y: &[f64], v: &[f64], tol: &Tolerances, out: &mut [f64]) {
        out.copy_from_slice(v);
        let d = distance(x, y, tol);
        if d >= tol.taylor_cutoff {
            let mut lxy = alloc::vec![0.0; x.len()];
            let mut lyx = alloc::vec![0.0; x.len()];
            log(x, y, tol, &mut lxy);
            log(y, x, tol, &mut lyx);
            let c = inner(&lxy, v) / (d * d);
            for ((o, a), b) in out.iter_mut().zip(&lxy).zip(&lyx) {
                *o -= c * (a + b);
            }
        }
        project_to_tangent(y, out);
    }
}

/// A point on the hyperboloid `⟨x,x⟩_L = −1`, `x₀ > 0`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LorentzPoint {
    coords: Vec<f64>,
}

impl LorentzPoint {
    /// Validates the manifold constraint at [`Tolerances::DEFAULT`].
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_ambient(&coords)?;
        let q = kernel::inner(&coords, &coords);
        if (q + 1.0).abs() >= Tolerances::DEFAULT.manifold_eps || coords[0] <= 0.0 {
            bail!(Numeric, "point is off the hyperboloid: <x,x>_L = {q}, x0 = {}", coords[0]);
        }
        Ok(Self { coords })
    }

    /// Canonical origin `[1, 0, …, 0]` of `L^d`.
    pub fn origin(d: usize) -> Result<Self> {
        canonical_origin(d)
    }

    /// Builds a point from its spatial coordinates; the time coordinate is derived.
    pub fn from_spatial(spatial: &[f64]) -> Result<Self> {
        let mut raw = Vec::with_capacity(spatial.len() + 1);
        raw.push(0.0);
        raw.extend_from_slice(spatial);
        project_to_manifold(&raw)
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        debug_assert!(coords.len() >= 2);
        Self { coords }
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Intrinsic dimension `d` (ambient length minus one).
    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    /// `|⟨x,x⟩_L + 1|`.
    pub fn constraint_violation(&self) -> f64 {
        (kernel::inner(&self.coords, &self.coords) + 1.0).abs()
    }
}

/// A vector in the tangent space of `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    coords: Vec<f64>,
    base: LorentzPoint,
}

impl TangentVector {
    /// Validates `⟨base, v⟩_L = 0` at [`Tolerances::DEFAULT`].
    pub fn new(base: LorentzPoint, coords: Vec<f64>) -> Result<Self> {
        same_len(base.coords(), &coords)?;
        check_finite(&coords)?;
        let c = kernel::inner(base.coords(), &coords);
        let scale = 1.0 + crate::linalg::euclidean_norm(&coords) * crate::linalg::euclidean_norm(base.coords());
        if c.abs() >= Tolerances::DEFAULT.manifold_eps * scale {
            bail!(Numeric, "vector is not tangent: <x,v>_L = {c}");
        }
        if kernel::inner(&coords, &coords) < -1e-9 * scale {
            bail!(Numeric, "tangent vector has a negative Lorentz square");
        }
        Ok(Self { coords, base })
    }

    pub fn zero(base: LorentzPoint) -> Self {
        let coords = vec![0.0; base.coords().len()];
        Self { coords, base }
    }

    pub(crate) fn from_raw(base: LorentzPoint, coords: Vec<f64>) -> Self {
        Self { coords, base }
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn base(&self) -> &LorentzPoint {
        &self.base
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        kernel::norm(&self.coords)
    }

    /// `a·self + b·other`, both at the same base.
    pub fn lin_comb(&self, a: f64, other: &TangentVector, b: f64) -> Result<TangentVector> {
        same_len(&self.coords, &other.coords)?;
        let coords = self.coords.iter().zip(&other.coords).map(|(u, v)| a * u + b * v).collect();
        Ok(Self { coords, base: self.base.clone() })
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        bail!(Numeric, "non-finite coordinate in {v:?}");
    }
    Ok(())
}

fn check_ambient(v: &[f64]) -> Result<()> {
    if v.len() < 2 {
        bail!(Dimension, "ambient vectors need length >= 2, got {}", v.len());
    }
    check_finite(v)
}

fn same_len(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::Dimension(format!("lengths {} and {} differ", u.len(), v.len())));
    }
    if u.len() < 2 {
        bail!(Dimension, "ambient vectors need length >= 2, got {}", u.len());
    }
    Ok(())
}

/// `−u₀v₀ + Σ_{i≥1} uᵢvᵢ`.
pub fn lorentz_inner(u: &[f64], v: &[f64]) -> Result<f64> {
    same_len(u, v)?;
    Ok(kernel::inner(u, v))
}

/// `√max(⟨v,v⟩_L, 0)`; the clamp absorbs negative round-off.
pub fn lorentz_norm(v: &TangentVector) -> f64 {
    v.norm()
}

/// `exp_x(v)` for `v` tangent at `x = v.base()`.
pub fn exp_map(v: &TangentVector) -> LorentzPoint {
    let mut out = vec![0.0; v.coords.len()];
    kernel::exp(v.base.coords(), &v.coords, &Tolerances::DEFAULT, &mut out);
    LorentzPoint::from_raw(out)
}

/// `log_x(y)`, the tangent at `x` pointing along the geodesic to `y`.
pub fn log_map(x: &LorentzPoint, y: &LorentzPoint) -> Result<TangentVector> {
    same_len(x.coords(), y.coords())?;
    let mut out = vec![0.0; x.coords().len()];
    kernel::log(x.coords(), y.coords(), &Tolerances::DEFAULT, &mut out);
    Ok(TangentVector::from_raw(x.clone(), out))
}

/// Geodesic distance `arcosh(−⟨x,y⟩_L)`.
pub fn lorentz_distance(x: &LorentzPoint, y: &LorentzPoint) -> Result<f64> {
    same_len(x.coords(), y.coords())?;
    Ok(kernel::distance(x.coords(), y.coords(), &Tolerances::DEFAULT))
}

/// Parallel transport of `v` from `v.base()` to `y`.
pub fn parallel_transport(v: &TangentVector, y: &LorentzPoint) -> Result<TangentVector> {
    same_len(v.coords(), y.coords())?;
    let mut out = vec![0.0; y.coords().len()];
    kernel::transport(v.base.coords(), y.coords(), &v.coords, &Tolerances::DEFAULT, &mut out);
    Ok(TangentVector::from_raw(y.clone(), out))
}

/// Snap an ambient vector onto the hyperboloid by recomputing its time coordinate.
pub fn project_to_manifold(raw: &[f64]) -> Result<LorentzPoint> {
    check_ambient(raw)?;
    let mut coords = raw.to_vec();
    kernel::project_to_manifold(&mut coords);
    Ok(LorentzPoint::from_raw(coords))
}

/// `raw + ⟨x,raw⟩_L x`, the Lorentz-orthogonal projection onto `T_x`.
pub fn project_to_tangent(x: &LorentzPoint, raw: &[f64]) -> Result<TangentVector> {
    same_len(x.coords(), raw)?;
    check_finite(raw)?;
    let mut coords = raw.to_vec();
    kernel::project_to_tangent(x.coords(), &mut coords);
    Ok(TangentVector::from_raw(x.clone(), coords))
}

pub fn canonical_origin(d: usize) -> Result<LorentzPoint> {
    if d == 0 {
        bail!(Dimension, "the Lorentz model needs dimension d >= 1");
    }
    let mut coords = vec![0.0; d + 1];
    coords[0] = 1.0;
    Ok(LorentzPoint::from_raw(coords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn origin(d: usize) -> LorentzPoint {
        canonical_origin(d).unwrap()
    }

    fn tangent_at_origin(spatial: &[f64]) -> TangentVector {
        let mut c = vec![0.0];
        c.extend_from_slice(spatial);
        TangentVector::new(origin(spatial.len()), c).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn inner_examples() {
        assert_eq!(lorentz_inner(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap(), -1.0);
        let r2 = 2f64.sqrt();
        let v = lorentz_inner(&[r2, 1.0, 0.0], &[r2, 0.0, 1.0]).unwrap();
        assert!((v + 2.0).abs() < 1e-15);
        assert_eq!(lorentz_inner(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(lorentz_inner(&[1.0, 0.0], &[1.0, 0.0, 0.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(tangent_at_origin(&[3.0, 4.0]).norm(), 5.0);
        assert_eq!(TangentVector::zero(origin(2)).norm(), 0.0);
        // Slightly timelike round-off is clamped to zero.
        let v = TangentVector::from_raw(origin(2), vec![1e-6, 0.0, 0.0]);
        assert!(kernel::inner(v.coords(), v.coords()) < 0.0);
        assert_eq!(lorentz_norm(&v), 0.0);
    }

    #[test]
    fn exp_examples() {
        assert_eq!(exp_map(&TangentVector::zero(origin(2))).coords(), &[1.0, 0.0, 0.0]);
        let p = exp_map(&tangent_at_origin(&[1.0, 0.0]));
        assert!(close(p.coords(), &[1f64.cosh(), 1f64.sinh(), 0.0], 1e-14));
        assert!(p.constraint_violation() < 1e-14);
    }

    #[test]
    fn log_examples() {
        let o = origin(2);
        let zero = log_map(&o, &o).unwrap();
        assert!(zero.coords().iter().all(|&c| c == 0.0));
        let p = LorentzPoint::new(vec![1f64.cosh(), 1f64.sinh(), 0.0]).unwrap();
        let l = log_map(&o, &p).unwrap();
        assert!(close(l.coords(), &[0.0, 1.0, 0.0], 1e-12));
        let q = exp_map(&tangent_at_origin(&[0.3, -1.2]));
        assert!(close(log_map(&q, &q).unwrap().coords(), &[0.0; 3], 1e-12));
    }

    #[test]
    fn distance_examples() {
        let o = origin(2);
        assert_eq!(lorentz_distance(&o, &o).unwrap(), 0.0);
        let p = LorentzPoint::new(vec![2f64.cosh(), 2f64.sinh(), 0.0]).unwrap();
        assert!((lorentz_distance(&o, &p).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn transport_examples() {
        let x = exp_map(&tangent_at_origin(&[0.4, -0.7]));
        let v = project_to_tangent(&x, &[0.1, 0.5, 2.0]).unwrap();
        let same = parallel_transport(&v, &x).unwrap();
        assert!(close(same.coords(), v.coords(), 1e-12));
    }

    #[test]
    fn transport_matches_closed_form() {
        // Independent route: P(v) = v + ⟨y,v⟩/(1 − ⟨x,y⟩)·(x + y).
        let x = exp_map(&tangent_at_origin(&[0.4, -0.7, 1.1]));
        let y = exp_map(&tangent_at_origin(&[-1.3, 0.2, 0.5]));
        let v = project_to_tangent(&x, &[0.3, -0.5, 2.0, 0.7]).unwrap();
        let p = parallel_transport(&v, &y).unwrap();
        let c = kernel::inner(y.coords(), v.coords()) / (1.0 - kernel::inner(x.coords(), y.coords()));
        let expected: Vec<f64> = (0..4).map(|i| v.coords()[i] + c * (x.coords()[i] + y.coords()[i])).collect();
        assert!(close(p.coords(), &expected, 1e-10));
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_to_manifold(&[0.9, 0.0, 0.0]).unwrap().coords(), &[1.0, 0.0, 0.0]);
        let p = project_to_manifold(&[5.0, 3.0, 4.0]).unwrap();
        assert_eq!(p.coords(), &[26f64.sqrt(), 3.0, 4.0]);
        let again = project_to_manifold(p.coords()).unwrap();
        assert_eq!(again, p);
        assert!(matches!(project_to_manifold(&[1.0, f64::NAN]), Err(Error::Numeric(_))));

        let t = project_to_tangent(&origin(2), &[7.0, 1.0, 2.0]).unwrap();
        assert_eq!(t.coords(), &[0.0, 1.0, 2.0]);
        let t2 = project_to_tangent(&origin(2), t.coords()).unwrap();
        assert_eq!(t2.coords(), t.coords());
    }

    #[test]
    fn origin_examples() {
        let o = canonical_origin(2).unwrap();
        assert_eq!(o.coords(), &[1.0, 0.0, 0.0]);
        assert_eq!(lorentz_inner(o.coords(), o.coords()).unwrap(), -1.0);
        assert!(matches!(canonical_origin(0), Err(Error::Dimension(_))));
    }

    #[test]
    fn point_validation() {
        assert!(LorentzPoint::new(vec![1.0, 1.0]).is_err());
        assert!(LorentzPoint::new(vec![-1.0, 0.0]).is_err());
        assert!(TangentVector::new(origin(1), vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn arcosh_ratio_is_continuous_at_the_series_switch() {
        let tol = Tolerances::DEFAULT;
        for &t in &[1e-4 * (1.0 - 1e-9), 1e-4 * (1.0 + 1e-9)] {
            let exact = libm::acosh(1.0 + t) / libm::sqrt(t * (2.0 + t));
            assert!((kernel::arcosh_ratio(1.0 + t, &tol) - exact).abs() < 1e-12);
        }
        assert_eq!(kernel::arcosh_ratio(1.0, &tol), 1.0);
    }

    #[test]
    fn total_on_large_coordinates() {
        let x = LorentzPoint::from_spatial(&[1e4, -1e4]).unwrap();
        let y = LorentzPoint::from_spatial(&[-3e3, 2e3]).unwrap();
        let l = log_map(&x, &y).unwrap();
        assert!(l.coords().iter().all(|c| c.is_finite()));
        assert!(lorentz_distance(&x, &y).unwrap().is_finite());
        let v = project_to_tangent(&x, &[1.0, 2.0, 3.0]).unwrap();
        let p = parallel_transport(&v, &y).unwrap();
        assert!(p.coords().iter().all(|c| c.is_finite()));
    }

    fn point_strategy(d: usize, radius: f64) -> impl Strategy<Value = LorentzPoint> {
        (proptest::collection::vec(-1.0f64..1.0, d), 0.0..radius).prop_filter_map(
            "nonzero direction",
            move |(dir, r)| {
                let n = crate::linalg::euclidean_norm(&dir);
                (n > 1e-3).then(|| {
                    let s: Vec<f64> = dir.iter().map(|x| x / n * r).collect();
                    exp_map(&tangent_at_origin(&s))
                })
            },
        )
    }

    proptest! {
        #[test]
        fn exp_output_on_manifold(d in 1usize..8, scale in 0.0f64..5.0, seed in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let x = exp_map(&tangent_at_origin(&seed[..d].iter().map(|s| s * scale).collect::<Vec<_>>()));
            prop_assert!(x.constraint_violation() < 1e-6 * x.coords()[0].powi(2));
            prop_assert!(x.coords()[0] > 0.0);
        }

        #[test]
        fn transport_is_linear(x in point_strategy(3, 2.0), y in point_strategy(3, 2.0),
                               u in proptest::collection::vec(-1.0f64..1.0, 4),
                               v in proptest::collection::vec(-1.0f64..1.0, 4),
                               a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let u = project_to_tangent(&x, &u).unwrap();
            let v = project_to_tangent(&x, &v).unwrap();
            let lhs = parallel_transport(&u.lin_comb(a, &v, b).unwrap(), &y).unwrap();
            let rhs = parallel_transport(&u, &y).unwrap().lin_comb(a, &parallel_transport(&v, &y).unwrap(), b).unwrap();
            prop_assert!(close(lhs.coords(), rhs.coords(), 1e-9));
        }

        #[test]
        fn tangent_projection_is_orthogonal(x in point_strategy(4, 3.0), raw in proptest::collection::vec(-10.0f64..10.0, 5)) {
            let t = project_to_tangent(&x, &raw).unwrap();
            let scale = 1.0 + crate::linalg::euclidean_norm(&raw) * x.coords()[0].powi(2);
            prop_assert!(kernel::inner(x.coords(), t.coords()).abs() < 1e-12 * scale);
        }

        #[test]
        fn distance_is_symmetric(x in point_strategy(2, 4.0), y in point_strategy(2, 4.0)) {
            let a = lorentz_distance(&x, &y).unwrap();
            let b = lorentz_distance(&y, &x).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

//! Lorentz maps recorded on a [`Tape`].
//!
//! Each row of an `n×(d+1)` variable is a point or a tangent vector. A
//! `1×(d+1)` base point broadcasts over every row. The maps agree with the
//! slice kernels in [`crate::lorentz::kernel`] but are built from the smooth
//! coefficient functions in [`super::special`], so their gradients stay finite
//! when a row coincides with its base point.

use alloc::vec::Vec;

use super::{Tape, Var};
use crate::error::{bail, Result};
use crate::linalg::Matrix;

/// Metric constants for one ambient width on one tape.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    signature: Var,
    width: usize,
}

impl Frame {
    /// `width = d + 1`.
    pub fn new(tape: &mut Tape, width: usize) -> Result<Self> {
        if width < 2 {
            bail!(Dimension, "ambient width {width} is below 2");
        }
        let mut sig = alloc::vec![1.0; width];
        sig[0] = -1.0;
        Ok(Self { signature: tape.constant(Matrix::row_vector(&sig)), width })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Row-wise `⟨u, v⟩_L` as an `n×1` column.
    pub fn inner(&self, t: &mut Tape, u: Var, v: Var) -> Result<Var> {
        let uv = t.mul(u, v)?;
        let w = t.mul(uv, self.signature)?;
        t.sum_rows(w)
    }

    /// `v + ⟨x, v⟩_L x`.
    pub fn project_tangent(&self, t: &mut Tape, x: Var, v: Var) -> Result<Var> {
        let c = self.inner(t, x, v)?;
        let cx = t.mul(c, x)?;
        t.add(v, cx)
    }

    /// Recomputes the time coordinate from the spatial ones.
    pub fn project_manifold(&self, t: &mut Tape, x: Var) -> Result<Var> {
        let sp = t.slice_cols(x, 1, self.width)?;
        let sq = t.mul(sp, sp)?;
        let s = t.sum_rows(sq)?;
        let s = t.add_scalar(s, 1.0)?;
        let time = t.sqrt(s)?;
        t.concat_cols(&[time, sp])
    }

    /// `exp_x(v) = cosh √q · x + (sinh √q / √q) · v`, `q = ⟨v, v⟩_L`.
    pub fn exp(&self, t: &mut Tape, x: Var, v: Var) -> Result<Var> {
        let q = self.inner(t, v, v)?;
        let c = t.cosh_sqrt(q)?;
        let s = t.sinhc_sqrt(q)?;
        let cx = t.mul(c, x)?;
        let sv = t.mul(s, v)?;
        let y = t.add(cx, sv)?;
        self.project_manifold(t, y)
    }

    /// `log_x(y) = R(a) (y − a x)`, `a = −⟨x, y⟩_L`, `R(a) = arcosh a / √(a²−1)`.
    pub fn log(&self, t: &mut Tape, x: Var, y: Var) -> Result<Var> {
        let ip = self.inner(t, x, y)?;
        let a = t.neg(ip)?;
        let r = t.arcosh_ratio(a)?;
        let ax = t.mul(a, x)?;
        let d = t.sub(y, ax)?;
        let v = t.mul(r, d)?;
        self.project_tangent(t, x, v)
    }

    /// Transport of `v ∈ T_x` to `T_y`:
    /// `v + ⟨y, v⟩_L / (1 − ⟨x, y⟩_L) · (x + y)`.
    pub fn transport(&self, t: &mut Tape, x: Var, y: Var, v: Var) -> Result<Var> {
        let num = self.inner(t, y, v)?;
        let xy = self.inner(t, x, y)?;
        let den = t.neg(xy)?;
        let den = t.add_scalar(den, 1.0)?;
        let c = t.div(num, den)?;
        let s = t.add(x, y)?;
        let cs = t.mul(c, s)?;
        let out = t.add(v, cs)?;
        self.project_tangent(t, y, out)
    }

    /// Prepends a zero time column to `n×d` spatial coordinates.
    pub fn with_zero_time(&self, t: &mut Tape, spatial: Var) -> Result<Var> {
        let (n, d) = t.shape(spatial);
        if d + 1 != self.width {
            bail!(Dimension, "{d} spatial columns for ambient width {}", self.width);
        }
        let z = t.constant(Matrix::zeros(n, 1));
        t.concat_cols(&[z, spatial])
    }
}

/// Convenience for tests and callers holding plain rows.
pub fn rows_constant(t: &mut Tape, rows: &[Vec<f64>]) -> Result<Var> {
    Ok(t.constant(Matrix::from_rows(rows)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use crate::lorentz::{kernel, Tolerances};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const D: usize = 4;

    fn random_point(rng: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
        let mut p = alloc::vec![0.0];
        p.extend((0..D).map(|_| rng.random_range(-scale..scale)));
        kernel::project_to_manifold(&mut p);
        p
    }

    fn random_tangent(rng: &mut ChaCha8Rng, x: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = (0..=D).map(|_| rng.random_range(-1.0..1.0)).collect();
        kernel::project_to_tangent(x, &mut v);
        v
    }

    fn mat(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn values_agree_with_slice_kernels() {
        let tol = Tolerances::DEFAULT;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = random_point(&mut rng, 1.0);
            let y = random_point(&mut rng, 1.0);
            let v = random_tangent(&mut rng, &x);
            let mut t = Tape::new();
            let f = Frame::new(&mut t, D + 1).unwrap();
            let (xv, yv, vv) = (
                rows_constant(&mut t, core::slice::from_ref(&x)).unwrap(),
                rows_constant(&mut t, core::slice::from_ref(&y)).unwrap(),
                rows_constant(&mut t, core::slice::from_ref(&v)).unwrap(),
            );
            let e = f.exp(&mut t, xv, vv).unwrap();
            let l = f.log(&mut t, xv, yv).unwrap();
            let p = f.transport(&mut t, xv, yv, vv).unwrap();
            let mut want = alloc::vec![0.0; D + 1];
            kernel::exp(&x, &v, &tol, &mut want);
            assert!(t.value(e).max_abs_diff(&mat(core::slice::from_ref(&want))) < 1e-10);
            kernel::log(&x, &y, &tol, &mut want);
            assert!(t.value(l).max_abs_diff(&mat(core::slice::from_ref(&want))) < 1e-10);
            kernel::transport(&x, &y, &v, &tol, &mut want);
            assert!(t.value(p).max_abs_diff(&mat(&[want])) < 1e-10);
        }
    }

    #[test]
    fn log_of_base_point_is_zero_with_finite_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_point(&mut rng, 0.7);
        let w: Vec<f64> = (0..=D).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut t = Tape::new();
        let fr = Frame::new(&mut t, D + 1).unwrap();
        let xv = rows_constant(&mut t, core::slice::from_ref(&x)).unwrap();
        let l = fr.log(&mut t, xv, xv).unwrap();
        assert!(t.value(l).as_slice().iter().all(|v| v.abs() < 1e-15));
        let f = move |t: &mut Tape, p: &[Var]| {
            let fr = Frame::new(t, D + 1)?;
            let l = fr.log(t, p[0], p[1])?;
            let k = t.constant(Matrix::row_vector(&w));
            let s = t.mul(l, k)?;
            t.sum(s)
        };
        let r = grad_check(&f, &[mat(core::slice::from_ref(&x)), mat(&[x])], 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn composites_pass_grad_check_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let x = random_point(&mut rng, 1.0);
            let y = random_point(&mut rng, 1.0);
            let v = random_tangent(&mut rng, &x);
            let w: Vec<f64> = (0..=D).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = move |t: &mut Tape, p: &[Var]| {
                let fr = Frame::new(t, D + 1)?;
                let (x, y, v) = (p[0], p[1], p[2]);
                let v = fr.project_tangent(t, x, v)?;
                let e = fr.exp(t, x, v)?;
                let l = fr.log(t, y, e)?;
                let m = fr.transport(t, y, x, l)?;
                let k = t.constant(Matrix::row_vector(&w));
                let s = t.mul(m, k)?;
                let s2 = t.mul(e, k)?;
                let s = t.add(s, s2)?;
                t.sum(s)
            };
            let r = grad_check(&f, &[mat(&[x]), mat(&[y]), mat(&[v])], 1e-5).unwrap();
            assert!(r.max_rel_error < 1e-4, "{r:?}");
        }
    }

    #[test]
    fn broadcast_base_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let o = random_point(&mut rng, 0.5);
        let ys: Vec<Vec<f64>> = (0..3).map(|_| random_point(&mut rng, 1.0)).collect();
        let mut t = Tape::new();
        let f = Frame::new(&mut t, D + 1).unwrap();
        let ov = rows_constant(&mut t, core::slice::from_ref(&o)).unwrap();
        let yv = rows_constant(&mut t, &ys).unwrap();
        let l = f.log(&mut t, ov, yv).unwrap();
        let back = f.exp(&mut t, ov, l).unwrap();
        assert_eq!(t.shape(l), (3, D + 1));
        assert!(t.value(back).max_abs_diff(&mat(&ys)) < 1e-10);
    }
}

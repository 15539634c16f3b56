//! Entire/analytic scalar functions used by the recorded Lorentz maps.
//!
//! With `q = ⟨v,v⟩_L`, the exponential map is `C(q)·x + S(q)·v` where
//! `C(q) = cosh √q` and `S(q) = sinh √q / √q`. Both are entire in `q`, so
//! they and their derivatives are finite at `q = 0` (and for the slightly
//! negative `q` that round-off produces, where they continue as `cos`/`sin`).
//! The log map coefficient `R(a) = arcosh(a)/√(a²−1)` is likewise analytic
//! through `a = 1`.

const SERIES_Q: f64 = 1e-3;
const SERIES_T: f64 = 1e-3;

/// `cosh √q`.
pub fn cosh_sqrt(q: f64) -> f64 {
    if q.abs() < SERIES_Q {
        1.0 + q * (0.5 + q * (1.0 / 24.0 + q * (1.0 / 720.0 + q / 40_320.0)))
    } else if q > 0.0 {
        libm::cosh(libm::sqrt(q))
    } else {
        libm::cos(libm::sqrt(-q))
    }
}

/// `sinh √q / √q`.
pub fn sinhc_sqrt(q: f64) -> f64 {
    if q.abs() < SERIES_Q {
        1.0 + q * (1.0 / 6.0 + q * (1.0 / 120.0 + q * (1.0 / 5_040.0 + q / 362_880.0)))
    } else if q > 0.0 {
        let r = libm::sqrt(q);
        libm::sinh(r) / r
    } else {
        let r = libm::sqrt(-q);
        libm::sin(r) / r
    }
}

/// `d/dq cosh √q = S(q)/2`.
pub fn d_cosh_sqrt(q: f64) -> f64 {
    0.5 * sinhc_sqrt(q)
}

/// `d/dq sinh √q / √q = (C(q) − S(q)) / (2q)`.
pub fn d_sinhc_sqrt(q: f64) -> f64 {
    if q.abs() < SERIES_Q {
        1.0 / 6.0 + q * (1.0 / 60.0 + q * (1.0 / 1_680.0 + q / 90_720.0))
    } else {
        (cosh_sqrt(q) - sinhc_sqrt(q)) / (2.0 * q)
    }
}

/// `arcosh(a) / √(a²−1)`, equal to 1 at `a = 1`.
pub fn arcosh_ratio(a: f64) -> f64 {
    let t = a - 1.0;
    if t.abs() < SERIES_T {
        1.0 + t * (-1.0 / 3.0 + t * (2.0 / 15.0 + t * (-2.0 / 35.0 + t * (8.0 / 315.0 - t * 8.0 / 693.0))))
    } else if t > 0.0 {
        libm::acosh(a) / libm::sqrt(t * (2.0 + t))
    } else {
        libm::acos(a) / libm::sqrt((1.0 - a) * (1.0 + a))
    }
}

/// `R'(a) = (1 − a R(a)) / (a² − 1)`.
pub fn d_arcosh_ratio(a: f64) -> f64 {
    let t = a - 1.0;
    if t.abs() < SERIES_T {
        -1.0 / 3.0 + t * (4.0 / 15.0 + t * (-6.0 / 35.0 + t * (32.0 / 315.0 - t * 40.0 / 693.0)))
    } else {
        (1.0 - a * arcosh_ratio(a)) / (t * (2.0 + t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn values_match_closed_forms_across_the_switch() {
        for &q in &[0.0f64, 1e-6, 9.99e-4, 1.001e-3, 0.5, 4.0, 25.0] {
            let r: f64 = q.sqrt();
            assert!((cosh_sqrt(q) - r.cosh()).abs() < 1e-14 * r.cosh());
            let s = if q == 0.0 { 1.0 } else { r.sinh() / r };
            assert!((sinhc_sqrt(q) - s).abs() < 1e-14 * s);
        }
        for &a in &[1.0f64 + 1e-9, 1.0 + 9.99e-4, 1.0 + 1.001e-3, 1.5, 10.0, 1e4] {
            let s = ((a - 1.0) * (a + 1.0)).sqrt();
            let exact = s.asinh() / s;
            assert!((arcosh_ratio(a) - exact).abs() < 1e-12, "a = {a}");
        }
        assert_eq!(arcosh_ratio(1.0), 1.0);
    }

    #[test]
    fn derivatives_match_central_differences() {
        for &q in &[-0.5, -1e-4, 0.0, 2e-4, 0.7, 3.0, 16.0] {
            let h = 1e-6;
            assert!((d_cosh_sqrt(q) - central(cosh_sqrt, q, h)).abs() < 1e-7 * (1.0 + d_cosh_sqrt(q).abs()));
            assert!((d_sinhc_sqrt(q) - central(sinhc_sqrt, q, h)).abs() < 1e-7 * (1.0 + d_sinhc_sqrt(q).abs()));
        }
        for &a in &[1.0, 1.0 + 5e-4, 1.002, 1.3, 4.0, 50.0] {
            let h = 1e-7;
            let fd = central(arcosh_ratio, a, h);
            assert!((d_arcosh_ratio(a) - fd).abs() < 1e-6, "a = {a}: {} vs {fd}", d_arcosh_ratio(a));
        }
    }
}

//! Central-difference verification of tape gradients.

use alloc::vec::Vec;

use super::{Fault, Tape, Var};
use crate::error::{bail, Result};
use crate::linalg::Matrix;

/// A deterministic scalar function of a list of parameter matrices.
pub trait Objective {
    /// Records the objective on `tape` given the parameter leaves.
    fn record(&self, tape: &mut Tape, params: &[Var]) -> Result<Var>;
}

impl<F> Objective for F
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    fn record(&self, tape: &mut Tape, params: &[Var]) -> Result<Var> {
        self(tape, params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter, flat index)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    /// Coordinates whose stencil crossed a kink.
    pub excluded: usize,
}

fn evaluate(objective: &dyn Objective, params: &[Matrix]) -> Result<(f64, u64)> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.constant(p.clone())).collect();
    let out = objective.record(&mut tape, &vars)?;
    if tape.shape(out) != (1, 1) {
        bail!(Usage, "objective must be scalar, found {:?}", tape.shape(out));
    }
    Ok((tape.value(out).get(0, 0), tape.branch_signature()))
}

/// Compares analytic and central-difference gradients coordinate by
/// coordinate. The relative error is `|a − n| / max(|a|, |n|, 1e-8)`.
/// A coordinate is skipped when the kink sides taken at `θ − h`, `θ` and
/// `θ + h` differ; kinks use the subgradient 0.
pub fn grad_check(objective: &dyn Objective, params: &[Matrix], step: f64) -> Result<GradCheckReport> {
    run(objective, params, step, None)
}

#[doc(hidden)]
pub fn grad_check_with_fault(
    objective: &dyn Objective,
    params: &[Matrix],
    step: f64,
    fault: Fault,
) -> Result<GradCheckReport> {
    run(objective, params, step, Some(fault))
}

fn run(objective: &dyn Objective, params: &[Matrix], step: f64, fault: Option<Fault>) -> Result<GradCheckReport> {
    if !(step > 0.0 && step.is_finite()) {
        bail!(Usage, "finite-difference step must be positive, got {step}");
    }
    let mut tape = match fault {
        Some(f) => Tape::with_fault(f),
        None => Tape::new(),
    };
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = objective.record(&mut tape, &vars)?;
    let base_sig = tape.branch_signature();
    let grads = tape.backward(out)?;

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, checked: 0, excluded: 0 };
    let mut work: Vec<Matrix> = params.to_vec();
    for (p, var) in vars.iter().enumerate() {
        let analytic = grads.wrt(*var);
        for k in 0..params[p].len() {
            let orig = params[p].as_slice()[k];
            work[p].as_mut_slice()[k] = orig + step;
            let (fp, sp) = evaluate(objective, &work)?;
            work[p].as_mut_slice()[k] = orig - step;
            let (fm, sm) = evaluate(objective, &work)?;
            work[p].as_mut_slice()[k] = orig;
            if sp != base_sig || sm != base_sig {
                report.excluded += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * step);
            let a = analytic.as_slice()[k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if !err.is_finite() {
                bail!(Numeric, "non-finite gradient at parameter {p}, coordinate {k}");
            }
            report.checked += 1;
            if err >= report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((p, k));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn linear_objective_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = random(3, 4, &mut rng);
        let f = move |t: &mut Tape, p: &[Var]| {
            let k = t.constant(c.clone());
            let prod = t.mul(p[0], k)?;
            t.sum(prod)
        };
        let r = grad_check(&f, &[random(3, 4, &mut rng)], 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-9, "{r:?}");
        assert_eq!(r.checked, 12);
    }

    #[test]
    fn matmul_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = |t: &mut Tape, p: &[Var]| {
            let y = t.matmul(p[0], p[1])?;
            let y = t.cosh(y)?;
            t.sum(y)
        };
        let r = grad_check(&f, &[random(3, 4, &mut rng), random(4, 2, &mut rng)], 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-5, "{r:?}");
    }

    #[test]
    fn kinks_are_excluded() {
        // relu at exactly 0 and clamp at its threshold: both stencils cross.
        let f = |t: &mut Tape, p: &[Var]| {
            let r = t.relu(p[0])?;
            let c = t.clamp_min(p[0], 0.5)?;
            let s = t.add(r, c)?;
            t.sum(s)
        };
        let x = Matrix::row_vector(&[0.0, 0.5, 2.0]);
        let r = grad_check(&f, &[x], 1e-5).unwrap();
        assert_eq!(r.excluded, 2);
        assert_eq!(r.checked, 1);
        assert!(r.max_rel_error < 1e-9);
    }

    #[test]
    fn corrupted_backward_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = |t: &mut Tape, p: &[Var]| {
            let y = t.matmul(p[0], p[1])?;
            t.sum(y)
        };
        let params = [random(2, 3, &mut rng), random(3, 2, &mut rng)];
        let r = grad_check_with_fault(&f, &params, 1e-5, Fault::MatMulBackward).unwrap();
        assert!(r.max_rel_error > 1e-3);
    }

    #[test]
    fn every_primitive_passes_at_random_points() {
        type Build = fn(&mut Tape, Var) -> Result<Var>;
        // (name, primitive, sampling range)
        let cases: [(&str, Build, (f64, f64)); 13] = [
            ("exp", |t, v| t.exp(v), (-2.0, 2.0)),
            ("ln", |t, v| t.ln(v), (0.1, 3.0)),
            ("sqrt", |t, v| t.sqrt(v), (0.1, 3.0)),
            ("cosh", |t, v| t.cosh(v), (-2.0, 2.0)),
            ("sinh", |t, v| t.sinh(v), (-2.0, 2.0)),
            ("arcosh", |t, v| t.arcosh(v), (1.05, 4.0)),
            ("relu", |t, v| t.relu(v), (-2.0, 2.0)),
            ("clamp", |t, v| t.clamp_min(v, 0.3), (-2.0, 2.0)),
            ("cosh_sqrt", |t, v| t.cosh_sqrt(v), (-1.0, 4.0)),
            ("sinhc_sqrt", |t, v| t.sinhc_sqrt(v), (-1.0, 4.0)),
            ("arcosh_ratio", |t, v| t.arcosh_ratio(v), (1.0, 4.0)),
            ("transpose", |t, v| t.transpose(v), (-2.0, 2.0)),
            ("log_softmax", |t, v| t.log_softmax(v), (-2.0, 2.0)),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (name, build, (lo, hi)) in cases {
            for _ in 0..100 {
                let mut x: f64 = rng.random_range(lo..hi);
                // keep 1e-3 away from kinks
                if (name == "relu" && x.abs() < 1e-3) || (name == "clamp" && (x - 0.3).abs() < 1e-3) {
                    x += 2e-3;
                }
                let w = random(2, 2, &mut rng);
                let x = Matrix::filled(2, 2, x).add(&random(2, 2, &mut rng).scale(1e-2)).unwrap();
                let f = move |t: &mut Tape, p: &[Var]| {
                    let y = build(t, p[0])?;
                    let k = t.constant(w.clone());
                    let y = t.mul(y, k)?;
                    t.sum(y)
                };
                let r = grad_check(&f, &[x], 1e-5).unwrap();
                assert!(r.max_rel_error < 1e-4, "{name}: {r:?}");
            }
        }
    }

    #[test]
    fn structural_primitives() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let csr = alloc::sync::Arc::new(crate::graph::normalized_adjacency(4, &[(0, 1), (1, 2), (2, 3)]).unwrap());
        let w = random(4, 6, &mut rng);
        let f = move |t: &mut Tape, p: &[Var]| {
            let a = t.spmm(&csr, p[0])?;
            let b = t.slice_cols(a, 1, 3)?;
            let c = t.concat_cols(&[a, b, p[1]])?;
            let d = t.sum_rows(c)?;
            let e = t.div(c, d)?;
            let k = t.constant(w.clone());
            let e = t.sub(e, k)?;
            let e = t.add_scalar(e, 0.5)?;
            let e = t.scale(e, 1.5)?;
            let e = t.mul(e, e)?;
            t.mean(e)
        };
        let x = random(4, 3, &mut rng).map(|v| v + 2.0);
        let y = random(4, 1, &mut rng).map(|v| v + 3.0);
        let r = grad_check(&f, &[x, y], 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }
}

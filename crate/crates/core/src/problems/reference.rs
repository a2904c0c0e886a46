use super::{quadratic::solve_quadratic, Family, Oracle, ProblemInstance};
use crate::error::{Error, Result};
use crate::linalg;

pub const REFERENCE_ITERATION_CAP: usize = 500_000;

/// Computes and caches `(x_star, f_star)` for the average objective.
///
/// Quadratics are solved exactly. Other families run an accelerated gradient
/// method with gradient restarts until `|∇f(x)| ≤ tol · max(1, |x|)`.
/// A cached solution that already meets the tolerance is returned as is.
pub fn reference_solve(p: &mut ProblemInstance, tol: f64) -> Result<(Vec<f64>, f64)> {
    if !(tol > 0.0) {
        return Err(Error::param("reference tolerance must be positive"));
    }
    if let (Some(x), Some(f)) = (&p.x_star, p.f_star) {
        if linalg::norm(&p.grad(x)) <= tol * linalg::norm(x).max(1.0) {
            return Ok((x.clone(), f));
        }
    }
    if p.family == Family::Quadratic {
        solve_quadratic(p)?;
    } else {
        let x = accelerated_descent(&p.objective(), vec![0.0; p.d], tol)?;
        p.f_star = Some(p.value(&x));
        p.x_star = Some(x);
    }
    Ok((p.x_star.clone().unwrap(), p.f_star.unwrap()))
}

fn accelerated_descent(f: &dyn Oracle, x0: Vec<f64>, tol: f64) -> Result<Vec<f64>> {
    let l = f.smoothness();
    let mu = f.convexity();
    if !(l > 0.0) {
        return Ok(x0);
    }
    let strong = mu > 0.0;
    let beta_const = {
        let q = (l / mu.max(f64::MIN_POSITIVE)).sqrt();
        (q - 1.0) / (q + 1.0)
    };
    let mut x = x0.clone();
    let mut y = x0;
    let mut t = 1.0f64;
    let mut best = (f64::INFINITY, x.clone());
    for _ in 0..REFERENCE_ITERATION_CAP {
        let g = f.grad(&y);
        let gn = linalg::norm(&g);
        if gn < best.0 {
            best = (gn, y.clone());
        }
        if gn <= tol * linalg::norm(&y).max(1.0) {
            return Ok(y);
        }
        let mut x_next = y.clone();
        linalg::axpy(-1.0 / l, &g, &mut x_next);
        let step = linalg::sub(&x_next, &x);
        // Gradient restart: drop momentum once it points uphill.
        if linalg::dot(&g, &step) > 0.0 {
            t = 1.0;
            y = x_next.clone();
        } else {
            let beta = if strong {
                beta_const
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let b = (t - 1.0) / t_next;
                t = t_next;
                b
            };
            y = x_next.clone();
            linalg::axpy(beta, &step, &mut y);
        }
        x = x_next;
    }
    Err(Error::ReferenceSolve { best_x: best.1, grad_norm: best.0 })
}

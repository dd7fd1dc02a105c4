//! Damped Newton minimisation for the small smooth convex problems behind
//! the Elo fit and the per-agent lower bounds.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub(crate) struct NewtonSettings {
    /// Stop once no coordinate moves by more than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub what: &'static str,
}

/// Minimise a twice-differentiable function. `value` evaluates the objective
/// and `derivatives` returns `(value, gradient, hessian)`.
pub(crate) fn minimise(
    x0: DVector<f64>,
    settings: NewtonSettings,
    mut value: impl FnMut(&DVector<f64>) -> f64,
    mut derivatives: impl FnMut(&DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>),
) -> Result<DVector<f64>> {
    let n = x0.len();
    let mut x = x0;
    let mut last_grad = f64::NAN;
    for _ in 0..settings.max_iterations {
        let (f, g, h) = derivatives(&x);
        last_grad = g.norm();
        if !f.is_finite() || !last_grad.is_finite() {
            break;
        }
        if g.amax() == 0.0 {
            return Ok(x);
        }
        let step = newton_direction(h, &g, n);
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-20 {
            let candidate = &x + &step * t;
            let fc = value(&candidate);
            if fc.is_finite() && fc <= f + 1e-4 * t * slope {
                accepted = Some(candidate);
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some(next) => {
                let moved = (&next - &x).amax();
                x = next;
                if moved < settings.tolerance {
                    return Ok(x);
                }
            }
            // no representable decrease left along the Newton direction
            None => return Ok(x),
        }
    }
    Err(Error::NoConvergence {
        what: settings.what,
        iterations: settings.max_iterations,
        grad_norm: last_grad,
    })
}

/// Solve `H d = -g`, shifting the spectrum until the Cholesky factorisation
/// succeeds.
fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>, n: usize) -> DVector<f64> {
    let scale = h.diagonal().amax().max(1e-300);
    let mut shift = 0.0;
    loop {
        let shifted = &h + DMatrix::identity(n, n) * shift;
        if let Some(chol) = shifted.cholesky() {
            let d = chol.solve(&(-g));
            if d.iter().all(|v| v.is_finite()) {
                return d;
            }
        }
        shift = if shift == 0.0 { scale * 1e-12 } else { shift * 10.0 };
        if shift > scale * 1e12 {
            return -g.clone();
        }
    }
}

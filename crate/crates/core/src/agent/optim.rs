//! Conjugate gradient for symmetric positive-definite systems given only a
//! matrix-vector product.

use super::AgentError;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Approximately solves `A x = b`, starting from zero. Stops after `iters`
/// iterations or once the residual norm drops below `tol`.
pub fn conjugate_gradient<F>(mut apply_a: F, b: &[f64], iters: usize, tol: f64) -> Result<Vec<f64>, AgentError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rr = dot(&r, &r);
    if !rr.is_finite() {
        return Err(AgentError::NumericalFailure("non-finite right-hand side".into()));
    }
    for _ in 0..iters {
        if rr.sqrt() < tol {
            break;
        }
        let ap = apply_a(&p);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(AgentError::NumericalFailure(format!("curvature pᵀAp = {pap}")));
        }
        let alpha = rr / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() {
            return Err(AgentError::NumericalFailure("non-finite residual".into()));
        }
        let beta = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Ok(x)
}

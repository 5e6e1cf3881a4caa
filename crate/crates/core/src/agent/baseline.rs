//! Linear state-time value baseline fitted by ridge regression.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::optim::conjugate_gradient;

pub const RIDGE: f64 = 1e-5;
/// Above this feature count the normal equations are solved matrix-free.
const DENSE_LIMIT: usize = 512;

/// Features `[obs, obs², t/T, (t/T)², (t/T)³, 1]` for step `t` of a path.
pub fn features(obs: &[f64], t: usize, horizon: usize) -> Vec<f64> {
    let s = t as f64 / horizon.max(1) as f64;
    let mut f = Vec::with_capacity(2 * obs.len() + 4);
    f.extend(obs.iter().map(|&o| o.clamp(-10.0, 10.0)));
    f.extend(obs.iter().map(|&o| o.clamp(-10.0, 10.0).powi(2)));
    f.extend([s, s * s, s * s * s, 1.0]);
    f
}

pub fn feature_dim(obs_dim: usize) -> usize {
    2 * obs_dim + 4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBaseline {
    pub coeffs: Option<Vec<f64>>,
    pub ridge: f64,
}

impl Default for LinearBaseline {
    fn default() -> Self {
        Self { coeffs: None, ridge: RIDGE }
    }
}

impl LinearBaseline {
    /// Predicts zero until the first fit.
    pub fn predict_row(&self, f: &[f64]) -> f64 {
        self.coeffs.as_ref().map_or(0.0, |w| w.iter().zip(f).map(|(a, b)| a * b).sum())
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        match &self.coeffs {
            None => vec![0.0; x.nrows()],
            Some(w) => (x * DVector::from_column_slice(w)).as_slice().to_vec(),
        }
    }

    /// Least-squares fit of `targets` on the rows of `x` with ridge penalty.
    pub fn fit(&mut self, x: &DMatrix<f64>, targets: &[f64]) {
        let y = DVector::from_column_slice(targets);
        let d = x.ncols();
        let xty = x.transpose() * &y;
        let w = if d <= DENSE_LIMIT {
            let a = x.transpose() * x;
            // Escalate the ridge if the system is numerically singular.
            let mut ridge = self.ridge;
            let mut solved = None;
            for _ in 0..8 {
                let mut reg = a.clone();
                for i in 0..d {
                    reg[(i, i)] += ridge;
                }
                if let Some(w) = reg.cholesky().map(|ch| ch.solve(&xty)).filter(|w| w.iter().all(|v| v.is_finite())) {
                    solved = Some(w);
                    break;
                }
                ridge *= 10.0;
            }
            solved.unwrap_or_else(|| DVector::zeros(d))
        } else {
            let apply = |v: &[f64]| {
                let v = DVector::from_column_slice(v);
                let out = x.transpose() * (x * &v) + &v * self.ridge;
                out.as_slice().to_vec()
            };
            let w = conjugate_gradient(apply, xty.as_slice(), 50, 1e-10).unwrap_or_else(|_| vec![0.0; d]);
            DVector::from_vec(w)
        };
        self.coeffs = Some(w.as_slice().to_vec());
    }
}

//! Diagonal Gaussian policy over a feed-forward network.
//!
//! Hidden layers use ReLU; the output layer goes through `tanh` and is mapped
//! affinely onto the action box, so the mean always lies inside the box. The
//! log standard deviation is a free per-dimension parameter that does not
//! depend on the observation.
//!
//! All parameters live in one flat vector: for each layer its weight matrix
//! (row-major, `out × in`) followed by its bias, and finally the log-std.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::env::{BoxSpace, RngState};

pub const DEFAULT_HIDDEN: [usize; 3] = [100, 50, 25];
const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyArch {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub hidden: Vec<usize>,
}

impl PolicyArch {
    pub fn new(obs_dim: usize, act_dim: usize, hidden: &[usize]) -> Self {
        Self { obs_dim, act_dim, hidden: hidden.to_vec() }
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.obs_dim];
        w.extend(&self.hidden);
        w.push(self.act_dim);
        w
    }

    pub fn n_layers(&self) -> usize {
        self.hidden.len() + 1
    }

    /// `(weight offset, bias offset, in, out)` for each layer.
    pub fn layer_offsets(&self) -> Vec<(usize, usize, usize, usize)> {
        let w = self.widths();
        let mut off = 0;
        (0..self.n_layers())
            .map(|l| {
                let (i, o) = (w[l], w[l + 1]);
                let entry = (off, off + i * o, i, o);
                off += i * o + o;
                entry
            })
            .collect()
    }

    pub fn log_std_offset(&self) -> usize {
        let w = self.widths();
        (0..self.n_layers()).map(|l| w[l] * w[l + 1] + w[l + 1]).sum()
    }

    pub fn n_params(&self) -> usize {
        self.log_std_offset() + self.act_dim
    }
}

/// Intermediate values of a batch forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Layer inputs: `inputs[0]` is the observation batch (`N × obs_dim`).
    pub inputs: Vec<DMatrix<f64>>,
    /// Pre-activations of every layer.
    pub pre: Vec<DMatrix<f64>>,
    /// `tanh` of the final pre-activation.
    pub squashed: DMatrix<f64>,
    /// Action means (`N × act_dim`).
    pub mean: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub arch: PolicyArch,
    pub params: Vec<f64>,
    /// Midpoint of the action box per dimension.
    pub center: Vec<f64>,
    /// Half-width of the action box per dimension.
    pub half_range: Vec<f64>,
}

fn weight(params: &[f64], off: usize, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, &params[off..off + rows * cols])
}

fn add_bias(m: &mut DMatrix<f64>, bias: &[f64]) {
    for (j, b) in bias.iter().enumerate() {
        m.column_mut(j).add_scalar_mut(*b);
    }
}

impl GaussianPolicy {
    /// Fresh policy: scaled random orthogonal-like weights, zero biases, the
    /// output layer shrunk ×0.01 so initial means sit near the box centre, and
    /// unit standard deviation.
    pub fn new(arch: PolicyArch, action_space: &BoxSpace, rng: &mut RngState) -> Result<Self, AgentError> {
        if action_space.dim() != arch.act_dim {
            return Err(AgentError::DimensionMismatch { expected: arch.act_dim, got: action_space.dim() });
        }
        let mut params = vec![0.0; arch.n_params()];
        let last = arch.n_layers() - 1;
        for (l, (w_off, _, fan_in, fan_out)) in arch.layer_offsets().into_iter().enumerate() {
            let gain = if l == last { 0.01 } else { std::f64::consts::SQRT_2 };
            let block = orthogonal_like(fan_out, fan_in, rng);
            for (k, v) in block.iter().enumerate() {
                params[w_off + k] = gain * v;
            }
        }
        let (center, half_range) = box_affine(action_space);
        Ok(Self { arch, params, center, half_range })
    }

    /// Policy with every parameter zero (mean at box centre, std 1).
    pub fn zeros(arch: PolicyArch, action_space: &BoxSpace) -> Self {
        let (center, half_range) = box_affine(action_space);
        Self { params: vec![0.0; arch.n_params()], arch, center, half_range }
    }

    pub fn log_std(&self) -> &[f64] {
        &self.params[self.arch.log_std_offset()..]
    }

    pub fn with_params(&self, params: Vec<f64>) -> Self {
        debug_assert_eq!(params.len(), self.params.len());
        Self { params, ..self.clone() }
    }

    fn check_obs(&self, cols: usize) -> Result<(), AgentError> {
        if cols != self.arch.obs_dim {
            return Err(AgentError::DimensionMismatch { expected: self.arch.obs_dim, got: cols });
        }
        Ok(())
    }

    pub fn forward_batch(&self, obs: &DMatrix<f64>) -> Result<ForwardCache, AgentError> {
        self.check_obs(obs.ncols())?;
        let layers = self.arch.layer_offsets();
        let mut inputs = vec![obs.clone()];
        let mut pre = Vec::with_capacity(layers.len());
        for (l, &(w_off, b_off, i, o)) in layers.iter().enumerate() {
            let w = weight(&self.params, w_off, o, i);
            let mut z = &inputs[l] * w.transpose();
            add_bias(&mut z, &self.params[b_off..b_off + o]);
            if l + 1 < layers.len() {
                inputs.push(z.map(|v| v.max(0.0)));
            }
            pre.push(z);
        }
        let squashed = pre.last().expect("at least one layer").map(f64::tanh);
        let mut mean = squashed.clone();
        for j in 0..self.arch.act_dim {
            let (c, h) = (self.center[j], self.half_range[j]);
            mean.column_mut(j).apply(|v| *v = c + h * *v);
        }
        Ok(ForwardCache { inputs, pre, squashed, mean })
    }

    /// Mean and log-std for one observation.
    pub fn forward(&self, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>), AgentError> {
        self.check_obs(obs.len())?;
        let layers = self.arch.layer_offsets();
        let mut h = obs.to_vec();
        for (l, &(w_off, b_off, i, o)) in layers.iter().enumerate() {
            let hidden = l + 1 < layers.len();
            h = (0..o)
                .map(|r| {
                    let row = &self.params[w_off + r * i..w_off + (r + 1) * i];
                    let z = self.params[b_off + r] + row.iter().zip(&h).map(|(w, x)| w * x).sum::<f64>();
                    if hidden {
                        z.max(0.0)
                    } else {
                        z
                    }
                })
                .collect();
        }
        let mean = h.iter().enumerate().map(|(j, z)| self.center[j] + self.half_range[j] * z.tanh()).collect();
        Ok((mean, self.log_std().to_vec()))
    }

    /// Draws `mean + std · ε` with standard normal `ε`.
    pub fn sample(&self, obs: &[f64], rng: &mut RngState) -> Result<Vec<f64>, AgentError> {
        let (mean, log_std) = self.forward(obs)?;
        Ok(perturb(&mean, &log_std, rng))
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64, AgentError> {
        let (mean, log_std) = self.forward(obs)?;
        Ok(gaussian_log_prob(&mean, &log_std, action))
    }

    /// Backpropagates output gradients into a flat parameter gradient.
    /// `d_mean` is `N × act_dim`; `d_log_std` is added to the log-std slots.
    pub fn backward(&self, cache: &ForwardCache, d_mean: &DMatrix<f64>, d_log_std: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        let layers = self.arch.layer_offsets();
        // Through the affine map and tanh.
        let mut gz = d_mean.clone();
        for j in 0..self.arch.act_dim {
            let h = self.half_range[j];
            for n in 0..gz.nrows() {
                let t = cache.squashed[(n, j)];
                gz[(n, j)] *= h * (1.0 - t * t);
            }
        }
        for l in (0..layers.len()).rev() {
            let (w_off, b_off, i, o) = layers[l];
            let dw = gz.transpose() * &cache.inputs[l];
            for r in 0..o {
                for c in 0..i {
                    grad[w_off + r * i + c] = dw[(r, c)];
                }
                grad[b_off + r] = gz.column(r).sum();
            }
            if l > 0 {
                let w = weight(&self.params, w_off, o, i);
                let mut gh = &gz * w;
                gh.zip_apply(&cache.pre[l - 1], |g, z| {
                    if z <= 0.0 {
                        *g = 0.0
                    }
                });
                gz = gh;
            }
        }
        let ls = self.arch.log_std_offset();
        for (k, d) in d_log_std.iter().enumerate() {
            grad[ls + k] = *d;
        }
        grad
    }

    /// Directional derivative of the batch means along parameter direction `v`.
    pub fn mean_jvp(&self, cache: &ForwardCache, v: &[f64]) -> DMatrix<f64> {
        let layers = self.arch.layer_offsets();
        let n = cache.inputs[0].nrows();
        let mut dh = DMatrix::<f64>::zeros(n, self.arch.obs_dim);
        let mut dz = dh.clone();
        for (l, &(w_off, b_off, i, o)) in layers.iter().enumerate() {
            let w = weight(&self.params, w_off, o, i);
            let dw = weight(v, w_off, o, i);
            dz = &cache.inputs[l] * dw.transpose();
            if l > 0 {
                dz += &dh * w.transpose();
            }
            add_bias(&mut dz, &v[b_off..b_off + o]);
            if l + 1 < layers.len() {
                let mut next = dz.clone();
                next.zip_apply(&cache.pre[l], |d, z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
                dh = next;
            }
        }
        for j in 0..self.arch.act_dim {
            let h = self.half_range[j];
            for r in 0..n {
                let t = cache.squashed[(r, j)];
                dz[(r, j)] *= h * (1.0 - t * t);
            }
        }
        dz
    }
}

/// Mean/half-width of the action box; unbounded dimensions map with unit scale.
fn box_affine(space: &BoxSpace) -> (Vec<f64>, Vec<f64>) {
    space
        .low()
        .iter()
        .zip(space.high())
        .map(
            |(&lo, &hi)| if lo.is_finite() && hi.is_finite() { ((lo + hi) / 2.0, (hi - lo) / 2.0) } else { (0.0, 1.0) },
        )
        .unzip()
}

/// Random `rows × cols` matrix with orthonormal rows or columns (whichever is
/// fewer), stored row-major.
fn orthogonal_like(rows: usize, cols: usize, rng: &mut RngState) -> Vec<f64> {
    let tall = rows >= cols;
    let (r, c) = if tall { (rows, cols) } else { (cols, rows) };
    let a = DMatrix::<f64>::from_fn(r, c, |_, _| rng.sample(StandardNormal));
    let q = a.qr().q();
    let m = if tall { q } else { q.transpose() };
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// `mean + exp(log_std) · ε` with standard normal `ε`.
pub fn perturb(mean: &[f64], log_std: &[f64], rng: &mut RngState) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .map(|(m, s)| {
            let e: f64 = rng.sample(StandardNormal);
            m + s.exp() * e
        })
        .collect()
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// Gradient of `log π(a|s)` with respect to the flat parameters.
pub fn log_prob_grad(policy: &GaussianPolicy, obs: &[f64], action: &[f64]) -> Result<Vec<f64>, AgentError> {
    let cache = policy.forward_batch(&DMatrix::from_row_slice(1, obs.len(), obs))?;
    let ls = policy.log_std();
    let mut d_mean = DMatrix::zeros(1, policy.arch.act_dim);
    let mut d_ls = vec![0.0; policy.arch.act_dim];
    for j in 0..policy.arch.act_dim {
        let var = (2.0 * ls[j]).exp();
        let diff = action[j] - cache.mean[(0, j)];
        d_mean[(0, j)] = diff / var;
        d_ls[j] = diff * diff / var - 1.0;
    }
    Ok(policy.backward(&cache, &d_mean, &d_ls))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(rng: &mut RngState) -> GaussianPolicy {
        let arch = PolicyArch::new(3, 2, &[5, 4]);
        let mut p = GaussianPolicy::new(arch, &BoxSpace::uniform(2, -2.0, 2.0), rng).unwrap();
        // Perturb everything so no unit is exactly at zero.
        for v in p.params.iter_mut() {
            *v += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
        p
    }

    #[test]
    fn parameter_count() {
        let a = PolicyArch::new(11, 3, &DEFAULT_HIDDEN);
        assert_eq!(a.n_params(), 11 * 100 + 100 + 100 * 50 + 50 + 50 * 25 + 25 + 25 * 3 + 3 + 3);
    }

    #[test]
    fn zero_weights_give_centre_mean() {
        let p = GaussianPolicy::zeros(PolicyArch::new(4, 2, &DEFAULT_HIDDEN), &BoxSpace::uniform(2, -1.0, 1.0));
        let (m, ls) = p.forward(&[0.3, -2.0, 5.0, 1.0]).unwrap();
        assert_eq!(m, vec![0.0, 0.0]);
        assert_eq!(ls, vec![0.0, 0.0]);
    }

    #[test]
    fn mean_stays_inside_box_for_huge_inputs() {
        let mut rng = RngState::new(4);
        let mut p = small(&mut rng);
        for v in p.params.iter_mut() {
            *v *= 50.0;
        }
        for scale in [1.0, 1e3, 1e6, -1e6] {
            let (m, _) = p.forward(&[scale, -scale, 0.5 * scale]).unwrap();
            assert!(m.iter().all(|v| v.is_finite() && (-2.0..=2.0).contains(v)), "{m:?}");
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut rng = RngState::new(1);
        let p = small(&mut rng);
        assert!(matches!(p.forward(&[1.0]), Err(AgentError::DimensionMismatch { expected: 3, got: 1 })));
    }

    #[test]
    fn standard_normal_density_at_zero() {
        let p = GaussianPolicy::zeros(PolicyArch::new(2, 3, &[4]), &BoxSpace::uniform(3, -1.0, 1.0));
        let lp = p.log_prob(&[0.1, 0.2], &[0.0; 3]).unwrap();
        assert!((lp + 1.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn density_peaks_at_mean() {
        let mut rng = RngState::new(2);
        let p = small(&mut rng);
        let obs = [0.4, -0.1, 0.9];
        let (mean, _) = p.forward(&obs).unwrap();
        let at_mean = p.log_prob(&obs, &mean).unwrap();
        for _ in 0..100 {
            let a: Vec<f64> = mean.iter().map(|m| m + rng.random_range(-1.0..1.0)).collect();
            assert!(p.log_prob(&obs, &a).unwrap() <= at_mean);
        }
    }

    #[test]
    fn log_prob_gradient_matches_finite_differences() {
        let mut rng = RngState::new(3);
        for _ in 0..5 {
            let p = small(&mut rng);
            let obs = [0.7, -0.3, 1.2];
            let a = [0.5, -1.1];
            let g = log_prob_grad(&p, &obs, &a).unwrap();
            let h = 1e-6;
            for k in 0..p.params.len() {
                let mut plus = p.params.clone();
                plus[k] += h;
                let mut minus = p.params.clone();
                minus[k] -= h;
                let fd = (p.with_params(plus).log_prob(&obs, &a).unwrap()
                    - p.with_params(minus).log_prob(&obs, &a).unwrap())
                    / (2.0 * h);
                let denom = g[k].abs().max(fd.abs()).max(1e-3);
                assert!((g[k] - fd).abs() / denom <= 1e-5, "param {k}: {} vs {fd}", g[k]);
            }
        }
    }

    #[test]
    fn jvp_matches_finite_differences() {
        let mut rng = RngState::new(6);
        let p = small(&mut rng);
        let obs = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let v: Vec<f64> = (0..p.params.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cache = p.forward_batch(&obs).unwrap();
        let jvp = p.mean_jvp(&cache, &v);
        let h = 1e-6;
        let shifted = |s: f64| {
            let q: Vec<f64> = p.params.iter().zip(&v).map(|(a, b)| a + s * b).collect();
            p.with_params(q).forward_batch(&obs).unwrap().mean
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        assert!((jvp - fd).abs().max() < 1e-6);
    }

    #[test]
    fn single_and_batch_forward_agree() {
        let mut rng = RngState::new(8);
        let p = small(&mut rng);
        let obs = DMatrix::from_fn(5, 3, |_, _| rng.random_range(-2.0..2.0));
        let batch = p.forward_batch(&obs).unwrap().mean;
        for n in 0..5 {
            let row: Vec<f64> = obs.row(n).iter().copied().collect();
            let (m, _) = p.forward(&row).unwrap();
            for j in 0..2 {
                assert!((m[j] - batch[(n, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn init_shrinks_output_layer() {
        let mut rng = RngState::new(0);
        let arch = PolicyArch::new(11, 3, &DEFAULT_HIDDEN);
        let p = GaussianPolicy::new(arch.clone(), &BoxSpace::uniform(3, -1.0, 1.0), &mut rng).unwrap();
        let (w_off, b_off, _, _) = *arch.layer_offsets().last().unwrap();
        assert!(p.params[w_off..b_off].iter().all(|v| v.abs() <= 0.01 + 1e-12));
        assert_eq!(p.log_std(), &[0.0; 3]);
    }
}

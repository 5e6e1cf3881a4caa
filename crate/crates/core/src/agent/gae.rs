//! Discounted returns and generalized advantage estimation.

/// `out[t] = Σ_k γ^k x[t+k]` within one path.
pub fn discount_cumsum(x: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let mut acc = 0.0;
    for t in (0..x.len()).rev() {
        acc = x[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Advantages for one path. The value after the final step is taken as zero.
pub fn gae_path(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), values.len());
    let t_len = rewards.len();
    let deltas: Vec<f64> = (0..t_len)
        .map(|t| {
            let next = if t + 1 < t_len { values[t + 1] } else { 0.0 };
            rewards[t] + gamma * next - values[t]
        })
        .collect();
    discount_cumsum(&deltas, gamma * lambda)
}

/// Advantages over a batch whose paths are delimited by `bounds`
/// (`bounds[i]..bounds[i + 1]` is path `i`).
pub fn compute_gae(rewards: &[f64], values: &[f64], bounds: &[usize], gamma: f64, lambda: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(rewards.len());
    for w in bounds.windows(2) {
        out.extend(gae_path(&rewards[w[0]..w[1]], &values[w[0]..w[1]], gamma, lambda));
    }
    out
}

/// Shifts to zero mean and scales to unit (population) standard deviation.
pub fn normalize(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    for v in x.iter_mut() {
        *v = (*v - mean) / std;
    }
}

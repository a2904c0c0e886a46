use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccStep {
    pub a_next: f64,
    pub a_sum_next: f64,
    pub b_next: f64,
}

/// Positive root of λ a² = (A + a) B, then A' = A + a, B' = B + μ a.
pub fn acc_coefficients(a_sum: f64, b: f64, lambda: f64, mu: f64) -> AccStep {
    debug_assert!(lambda > 0.0 && b > 0.0 && a_sum >= 0.0);
    let disc = b * b + 4.0 * lambda * a_sum * b;
    let a_next = (b + disc.sqrt()) / (2.0 * lambda);
    AccStep { a_next, a_sum_next: a_sum + a_next, b_next: b + mu * a_next }
}

/// (μ x̄ + λ v - ḡ) / (μ + λ); at μ = 0 the extra-gradient step v - ḡ/λ.
pub fn sdane_prox_center(v: &[f64], x_bar: &[f64], g_bar: &[f64], lambda: f64, mu: f64) -> Vec<f64> {
    if mu == 0.0 {
        return (0..v.len()).map(|k| v[k] - g_bar[k] / lambda).collect();
    }
    let denom = mu + lambda;
    (0..v.len()).map(|k| (mu * x_bar[k] + lambda * v[k] - g_bar[k]) / denom).collect()
}

/// (a μ x̄ + B v - a ḡ) / (B + a μ)
pub fn acc_prox_center(v: &[f64], x_bar: &[f64], g_bar: &[f64], a_next: f64, b: f64, mu: f64) -> Vec<f64> {
    let denom = b + a_next * mu;
    (0..v.len()).map(|k| (a_next * mu * x_bar[k] + b * v[k] - a_next * g_bar[k]) / denom).collect()
}

/// γ x̄ + (1 - γ) v - η ḡ
pub fn dl_prox_center(v: &[f64], x_bar: &[f64], g_bar: &[f64], gamma: f64, eta: f64) -> Vec<f64> {
    (0..v.len()).map(|k| gamma * x_bar[k] + (1.0 - gamma) * v[k] - eta * g_bar[k]).collect()
}

/// Local dissimilarity estimate
/// sqrt((1/n) Σ |∇h_i(v) - ∇h_i(v_prev)|² / |v - v_prev|²), floored at
/// `floor`. A zero step keeps `lambda_prev`.
pub fn adaptive_lambda(
    v_curr: &[f64],
    v_prev: &[f64],
    grads_h_curr: &[Vec<f64>],
    grads_h_prev: &[Vec<f64>],
    lambda_prev: f64,
    floor: f64,
) -> f64 {
    let step = linalg::dist_sq(v_curr, v_prev);
    if !(step > 0.0) || grads_h_curr.is_empty() {
        return lambda_prev;
    }
    let n = grads_h_curr.len() as f64;
    let num = grads_h_curr.iter().zip(grads_h_prev).map(|(a, b)| linalg::dist_sq(a, b)).sum::<f64>() / n;
    (num / step).sqrt().max(floor)
}

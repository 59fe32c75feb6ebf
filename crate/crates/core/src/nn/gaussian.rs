//! Diagonal Gaussian policy heads with tanh squashing.

use crate::scalar::Scalar;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Stabilizer inside the tanh change-of-variables term.
pub const SQUASH_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHeadOutput<T> {
    pub mean: Vec<T>,
    /// Clamped to `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub log_std: Vec<T>,
    /// Which entries of `log_std` were clamped (their gradient is zero).
    pub clamped: Vec<bool>,
}

impl<T: Scalar> GaussianHeadOutput<T> {
    /// Splits a raw network output row `[mean..., log_std...]`.
    pub fn from_raw(raw: &[T]) -> Self {
        let d = raw.len() / 2;
        let (lo, hi) = (T::lit(LOG_STD_MIN), T::lit(LOG_STD_MAX));
        let mut log_std = Vec::with_capacity(d);
        let mut clamped = Vec::with_capacity(d);
        for &r in &raw[d..] {
            log_std.push(r.max(lo).min(hi));
            clamped.push(r < lo || r > hi);
        }
        Self { mean: raw[..d].to_vec(), log_std, clamped }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Deterministic action `tanh(mean)`.
    pub fn mode(&self) -> Vec<T> {
        self.mean.iter().map(|m| m.tanh()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquashedSample<T> {
    pub pre_tanh: Vec<T>,
    pub action: Vec<T>,
    pub log_prob: T,
}

/// Reparameterized sample `tanh(mean + std * noise)` and its log-density,
/// including the tanh change-of-variables correction.
pub fn sample_squashed<T: Scalar>(head: &GaussianHeadOutput<T>, noise: &[T]) -> SquashedSample<T> {
    debug_assert_eq!(noise.len(), head.dim());
    let half_ln_2pi = T::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
    let half = T::lit(0.5);
    let eps = T::lit(SQUASH_EPS);
    let mut pre_tanh = Vec::with_capacity(head.dim());
    let mut action = Vec::with_capacity(head.dim());
    let mut log_prob = T::zero();
    for ((&m, &ls), &e) in head.mean.iter().zip(&head.log_std).zip(noise) {
        let u = m + ls.exp() * e;
        let a = u.tanh();
        log_prob = log_prob - half * e * e - ls - half_ln_2pi - (T::one() - a * a + eps).ln();
        pre_tanh.push(u);
        action.push(a);
    }
    // tanh saturates in floating point; keep actions strictly inside (-1, 1)
    let edge = T::one() - T::epsilon();
    for a in &mut action {
        *a = a.max(-edge).min(edge);
    }
    SquashedSample { pre_tanh, action, log_prob }
}

/// Chain rule through [`sample_squashed`] for fixed noise.
///
/// Given `d_action = dL/da` and `d_log_prob = dL/dlogp`, returns the
/// gradient with respect to the raw head row `[mean..., log_std...]`.
pub fn squashed_backward<T: Scalar>(
    head: &GaussianHeadOutput<T>,
    noise: &[T],
    sample: &SquashedSample<T>,
    d_action: &[T],
    d_log_prob: T,
) -> Vec<T> {
    let d = head.dim();
    let two = T::lit(2.0);
    let eps = T::lit(SQUASH_EPS);
    let mut out = vec![T::zero(); 2 * d];
    for j in 0..d {
        let a = sample.pre_tanh[j].tanh();
        let sech2 = T::one() - a * a;
        let g_u = d_action[j] * sech2 + d_log_prob * two * a * sech2 / (sech2 + eps);
        out[j] = g_u;
        if !head.clamped[j] {
            out[d + j] = g_u * head.log_std[j].exp() * noise[j] - d_log_prob;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn head(mean: Vec<f64>, log_std: Vec<f64>) -> GaussianHeadOutput<f64> {
        let raw: Vec<f64> = mean.into_iter().chain(log_std).collect();
        GaussianHeadOutput::from_raw(&raw)
    }

    #[test]
    fn standard_normal_at_mean() {
        let s = sample_squashed(&head(vec![0.0], vec![0.0]), &[0.0]);
        assert_eq!(s.action, vec![0.0]);
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln() - (1.0f64 + 1e-6).ln();
        assert!((s.log_prob - expected).abs() < 1e-15);
        assert!((s.log_prob + 0.9189385).abs() < 1e-5);
    }

    #[test]
    fn two_dim_closed_form() {
        let s = sample_squashed(&head(vec![0.0, 0.0], vec![0.0, 0.0]), &[1.0, -1.0]);
        let t = 1.0f64.tanh();
        let term = -0.5 - 0.5 * (2.0 * std::f64::consts::PI).ln() - (1.0 - t * t + 1e-6).ln();
        assert!((s.log_prob - 2.0 * term).abs() < 1e-12);
        assert!((s.action[0] - t).abs() < 1e-15 && (s.action[1] + t).abs() < 1e-15);
    }

    #[test]
    fn actions_strictly_inside() {
        let s = sample_squashed(&head(vec![30.0, -30.0], vec![2.0, 2.0]), &[5.0, -5.0]);
        assert!(s.action.iter().all(|a| a.abs() < 1.0));
        assert!(s.log_prob.is_finite());
    }

    #[test]
    fn log_std_clamped() {
        let h = head(vec![0.0, 0.0], vec![-30.0, 5.0]);
        assert_eq!(h.log_std, vec![-20.0, 2.0]);
        assert_eq!(h.clamped, vec![true, true]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let raw: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let noise: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let k = 0.37;
            let loss = |r: &[f64]| {
                let s = sample_squashed(&GaussianHeadOutput::from_raw(r), &noise);
                s.action.iter().zip(&c).map(|(a, c)| a * c).sum::<f64>() + k * s.log_prob
            };
            let h = GaussianHeadOutput::from_raw(&raw);
            let s = sample_squashed(&h, &noise);
            let g = squashed_backward(&h, &noise, &s, &c, k);
            for j in 0..6 {
                let mut p = raw.clone();
                p[j] += 1e-6;
                let mut m = raw.clone();
                m[j] -= 1e-6;
                let fd = (loss(&p) - loss(&m)) / 2e-6;
                assert!((fd - g[j]).abs() < 1e-6 * (1.0 + fd.abs()), "{j}: {fd} vs {}", g[j]);
            }
        }
    }

    /// Change of variables: the squashed density integrates to one over
    /// `(-1, 1)`. Importance-sample with a uniform proposal.
    #[test]
    fn squashed_density_normalizes() {
        let h = head(vec![0.3], vec![-0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let u = a.atanh();
            let e = (u - h.mean[0]) / h.log_std[0].exp();
            let s = sample_squashed(&h, &[e]);
            acc += s.log_prob.exp() * 2.0;
        }
        let est = acc / n as f64;
        assert!((est - 1.0).abs() < 0.02, "{est}");
    }
}

//! Conjugate Gaussian belief updates and discrete type classification.

use serde::{Deserialize, Serialize};

use crate::econ::{Ability, PerClass};
use crate::error::{Error, Result};

/// Variance assigned to a belief formed from a noiseless signal. Keeps the
/// belief a proper Gaussian so later precision arithmetic stays finite.
pub const PERFECT_SIGNAL_VARIANCE: f64 = 1e-300;

/// Normal belief `N(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianBelief {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !mean.is_finite() {
            return Err(Error::domain(format!(
                "belief requires finite mean and positive variance, got N({mean}, {variance})"
            )));
        }
        Ok(GaussianBelief { mean, variance })
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Additive Gaussian noise channel `s = x + eps`, `eps ~ N(0, noise_variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalChannel {
    pub noise_variance: f64,
}

impl SignalChannel {
    pub fn new(noise_variance: f64) -> Result<Self> {
        if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
            return Err(Error::domain(format!(
                "noise variance must be finite and non-negative, got {noise_variance}"
            )));
        }
        Ok(SignalChannel { noise_variance })
    }

    pub fn from_sd(sd: f64) -> Result<Self> {
        SignalChannel::new(sd * sd)
    }

    pub fn perfect() -> Self {
        SignalChannel { noise_variance: 0.0 }
    }

    pub fn is_perfect(&self) -> bool {
        self.noise_variance == 0.0
    }

    pub fn sd(&self) -> f64 {
        self.noise_variance.sqrt()
    }

    /// Channel for the mean of `n` independent draws through this channel.
    pub fn averaged(&self, n: usize) -> Self {
        SignalChannel {
            noise_variance: self.noise_variance / n.max(1) as f64,
        }
    }
}

/// Single-signal conjugate update.
///
/// Posterior precision is the sum of prior and signal precisions; the mean is
/// the precision-weighted average. A perfect channel pins the belief at the
/// signal with [`PERFECT_SIGNAL_VARIANCE`].
pub fn normal_posterior(prior: GaussianBelief, signal: f64, channel: SignalChannel) -> Result<GaussianBelief> {
    if !(prior.variance > 0.0) {
        return Err(Error::domain(format!(
            "prior variance must be positive, got {}",
            prior.variance
        )));
    }
    if channel.is_perfect() {
        return Ok(GaussianBelief {
            mean: signal,
            variance: PERFECT_SIGNAL_VARIANCE,
        });
    }
    let prior_precision = 1.0 / prior.variance;
    let signal_precision = 1.0 / channel.noise_variance;
    let variance = 1.0 / (prior_precision + signal_precision);
    let mean = variance * (prior.mean * prior_precision + signal * signal_precision);
    Ok(GaussianBelief { mean, variance })
}

/// Folds [`normal_posterior`] over a signal history. An empty history leaves
/// the prior untouched.
pub fn sequential_posterior(
    prior: GaussianBelief,
    signals: &[f64],
    channel: SignalChannel,
) -> Result<GaussianBelief> {
    signals
        .iter()
        .try_fold(prior, |belief, &s| normal_posterior(belief, s, channel))
}

/// Posterior probabilities over ability classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypePosterior {
    pub probabilities: PerClass<f64>,
}

impl TypePosterior {
    pub fn probability(&self, ability: Ability) -> f64 {
        self.probabilities.get(ability)
    }

    /// Maximum a-posteriori class. Ties go to the more able class.
    pub fn map_class(&self) -> Ability {
        let mut best = Ability::High;
        for a in Ability::ALL {
            if self.probability(a) > self.probability(best) {
                best = a;
            }
        }
        best
    }

    /// Posterior mean of an arbitrary per-class quantity.
    pub fn expectation(&self, values: &PerClass<f64>) -> f64 {
        Ability::ALL
            .iter()
            .map(|&a| self.probability(a) * values.get(a))
            .sum()
    }
}

/// Bayes classification of a type signal against class anchors, computed in
/// the log domain so tiny noise variances never underflow to `0/0`.
pub fn classify_type(
    signal: f64,
    priors: &PerClass<f64>,
    anchors: &PerClass<f64>,
    channel: SignalChannel,
) -> Result<TypePosterior> {
    let prior = priors.to_array();
    if prior.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::domain("class priors must be non-negative"));
    }
    let total: f64 = prior.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("class priors sum to {total}, expected 1")));
    }
    let anchor = anchors.to_array();

    let mut post = [0.0; 3];
    if channel.is_perfect() {
        // Degenerate likelihood: all mass on the nearest supported anchor(s).
        let mut best = f64::INFINITY;
        for i in 0..3 {
            if prior[i] > 0.0 {
                best = best.min((signal - anchor[i]).abs());
            }
        }
        let winners: Vec<usize> = (0..3)
            .filter(|&i| prior[i] > 0.0 && (signal - anchor[i]).abs() == best)
            .collect();
        for &i in &winners {
            post[i] = 1.0 / winners.len() as f64;
        }
    } else {
        let mut log_w = [f64::NEG_INFINITY; 3];
        for i in 0..3 {
            if prior[i] > 0.0 {
                let d = signal - anchor[i];
                log_w[i] = prior[i].ln() - d * d / (2.0 * channel.noise_variance);
            }
        }
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for i in 0..3 {
            post[i] = (log_w[i] - max).exp();
            z += post[i];
        }
        for p in &mut post {
            *p /= z;
        }
    }
    Ok(TypePosterior {
        probabilities: PerClass::new(post[0], post[1], post[2]),
    })
}

/// Joint Gaussian belief over two agents' types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBelief {
    pub means: [f64; 2],
    pub covariance: [[f64; 2]; 2],
}

impl PairBelief {
    pub fn new(means: [f64; 2], variances: [f64; 2], rho: f64) -> Result<Self> {
        if !(variances[0] > 0.0 && variances[1] > 0.0) {
            return Err(Error::domain("pair belief variances must be positive"));
        }
        if !(rho.abs() < 1.0) {
            return Err(Error::domain(format!("correlation must lie in (-1, 1), got {rho}")));
        }
        let cov = rho * (variances[0] * variances[1]).sqrt();
        Ok(PairBelief {
            means,
            covariance: [[variances[0], cov], [cov, variances[1]]],
        })
    }

    pub fn marginal(&self, agent: usize) -> GaussianBelief {
        GaussianBelief {
            mean: self.means[agent],
            variance: self.covariance[agent][agent],
        }
    }

    pub fn correlation(&self) -> f64 {
        self.covariance[0][1] / (self.covariance[0][0] * self.covariance[1][1]).sqrt()
    }

    /// Same belief with the agent labels exchanged.
    pub fn swapped(&self) -> Self {
        let c = &self.covariance;
        PairBelief {
            means: [self.means[1], self.means[0]],
            covariance: [[c[1][1], c[1][0]], [c[0][1], c[0][0]]],
        }
    }

    fn determinant(&self) -> f64 {
        let c = &self.covariance;
        c[0][0] * c[1][1] - c[0][1] * c[1][0]
    }
}

/// Conditions the pair on a noisy signal about agent 1's type. Agent 2's
/// belief moves through the prior covariance.
pub fn pair_posterior(prior: PairBelief, signal_for_agent_1: f64, channel: SignalChannel) -> Result<PairBelief> {
    let c = prior.covariance;
    if (c[0][1] - c[1][0]).abs() > 1e-12 * (c[0][0] + c[1][1]) {
        return Err(Error::domain("pair covariance must be symmetric"));
    }
    if !(c[0][0] > 0.0 && c[1][1] > 0.0 && prior.determinant() > 0.0) {
        return Err(Error::domain("pair covariance must be positive definite"));
    }
    let innovation_var = c[0][0] + channel.noise_variance;
    let gain = [c[0][0] / innovation_var, c[1][0] / innovation_var];
    let residual = signal_for_agent_1 - prior.means[0];
    let means = [
        prior.means[0] + gain[0] * residual,
        prior.means[1] + gain[1] * residual,
    ];
    let v00 = c[0][0] - gain[0] * c[0][0];
    let v01 = c[0][1] - gain[0] * c[0][1];
    let v11 = c[1][1] - gain[1] * c[0][1];
    // A perfect signal collapses agent 1's variance; keep it representable.
    let v00 = if v00 > 0.0 { v00 } else { PERFECT_SIGNAL_VARIANCE };
    Ok(PairBelief {
        means,
        covariance: [[v00, v01], [v01, v11]],
    })
}

/// Weight a Gaussian effort estimate puts on the observed effort signal when
/// the prior over effort has variance `prior_variance`. `None` means a flat
/// prior, i.e. the estimate is the raw signal.
pub fn effort_signal_weight(prior_variance: Option<f64>, channel: SignalChannel) -> f64 {
    match prior_variance {
        None => 1.0,
        Some(_) if channel.is_perfect() => 1.0,
        Some(v) => v / (v + channel.noise_variance),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn belief(m: f64, v: f64) -> GaussianBelief {
        GaussianBelief::new(m, v).unwrap()
    }

    fn ch(v: f64) -> SignalChannel {
        SignalChannel::new(v).unwrap()
    }

    /// Posterior mean and variance of theta by direct quadrature of prior x
    /// likelihood on a uniform grid.
    fn grid_posterior(prior: GaussianBelief, s: f64, noise: f64, lo: f64, hi: f64, n: usize) -> (f64, f64) {
        let h = (hi - lo) / n as f64;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = (-(x - prior.mean).powi(2) / (2.0 * prior.variance) - (s - x).powi(2) / (2.0 * noise)).exp();
            z += w;
            m1 += w * x;
            m2 += w * x * x;
        }
        let mean = m1 / z;
        (mean, m2 / z - mean * mean)
    }

    #[test]
    fn equal_precision_update_averages() {
        let b = normal_posterior(belief(0.0, 1.0), 2.0, ch(1.0)).unwrap();
        assert_eq!(b.mean, 1.0);
        assert_eq!(b.variance, 0.5);
    }

    #[test]
    fn perfect_signal_pins_belief() {
        let b = normal_posterior(belief(0.0, 1.0), 0.7, SignalChannel::perfect()).unwrap();
        assert_eq!(b.mean, 0.7);
        assert_eq!(b.variance, PERFECT_SIGNAL_VARIANCE);
    }

    #[test]
    fn unequal_precision_update_matches_quadrature() {
        let b = normal_posterior(belief(1.0, 4.0), 3.0, ch(2.0)).unwrap();
        assert!((b.mean - 7.0 / 3.0).abs() < 1e-14);
        assert!((b.variance - 4.0 / 3.0).abs() < 1e-14);
        let (m, v) = grid_posterior(belief(1.0, 4.0), 3.0, 2.0, -20.0, 20.0, 400_000);
        assert!((m - 7.0 / 3.0).abs() < 1e-6);
        assert!((v - 4.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn invalid_prior_rejected() {
        let bad = GaussianBelief { mean: 0.0, variance: 0.0 };
        assert!(normal_posterior(bad, 1.0, ch(1.0)).is_err());
        assert!(GaussianBelief::new(0.0, -1.0).is_err());
        assert!(SignalChannel::new(-1e-3).is_err());
    }

    #[test]
    fn sequential_examples() {
        let prior = belief(0.3, 0.2);
        assert_eq!(sequential_posterior(prior, &[], ch(1.0)).unwrap(), prior);

        let b = sequential_posterior(belief(0.0, 1.0), &[1.0, 1.0, 1.0, 1.0], ch(1.0)).unwrap();
        // batch form: (1/s0 + T/s)^-1 and mean = var * T * sbar / s
        let batch_var = 1.0 / (1.0 + 4.0);
        let batch_mean = batch_var * 4.0;
        assert!((b.variance - batch_var).abs() < 1e-12);
        assert!((b.mean - batch_mean).abs() < 1e-12);
        assert!((b.variance - 0.2).abs() < 1e-12 && (b.mean - 0.8).abs() < 1e-12);

        let one = sequential_posterior(prior, &[0.9], ch(0.05)).unwrap();
        assert_eq!(one, normal_posterior(prior, 0.9, ch(0.05)).unwrap());
    }

    #[test]
    fn classify_symmetric_midpoint() {
        let priors = PerClass::new(0.5, 0.5, 0.0);
        let anchors = PerClass::new(1.0, 0.6, 0.3);
        let p = classify_type(0.8, &priors, &anchors, ch(0.04)).unwrap();
        assert!((p.probability(Ability::High) - 0.5).abs() < 1e-12);
        assert!((p.probability(Ability::Medium) - 0.5).abs() < 1e-12);
        assert_eq!(p.probability(Ability::Low), 0.0);
    }

    #[test]
    fn classify_separation_limit() {
        let priors = PerClass::new(0.3, 0.2, 0.5);
        let anchors = PerClass::new(1.0, 0.6, 0.3);
        let p = classify_type(1.0, &priors, &anchors, ch(1e-6)).unwrap();
        assert!(p.probability(Ability::High) > 0.999_999);
        // far enough in the tail that naive densities underflow
        let p = classify_type(40.0, &priors, &anchors, ch(1e-8)).unwrap();
        assert_eq!(p.map_class(), Ability::High);
        assert!(p.probability(Ability::High).is_finite());
    }

    #[test]
    fn classify_three_class_example() {
        let priors = PerClass::new(0.3, 0.2, 0.5);
        let anchors = PerClass::new(1.0, 0.6, 0.3);
        let p = classify_type(0.8, &priors, &anchors, ch(0.04)).unwrap();
        // 40-digit reference evaluation of the three-term Bayes ratio
        assert!((p.probability(Ability::High) - 0.559_471_985_316_222_54).abs() < 1e-14);
        assert!((p.probability(Ability::Medium) - 0.372_981_323_544_148_36).abs() < 1e-14);
        assert!((p.probability(Ability::Low) - 0.067_546_691_139_629_104).abs() < 1e-14);
        let sum: f64 = p.probabilities.to_array().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classify_rejects_bad_priors() {
        let anchors = PerClass::new(1.0, 0.6, 0.3);
        assert!(classify_type(0.5, &PerClass::new(0.3, 0.2, 0.4), &anchors, ch(0.01)).is_err());
        assert!(classify_type(0.5, &PerClass::new(1.2, -0.2, 0.0), &anchors, ch(0.01)).is_err());
    }

    #[test]
    fn classify_perfect_channel() {
        let priors = PerClass::new(0.3, 0.2, 0.5);
        let anchors = PerClass::new(1.0, 0.6, 0.3);
        let p = classify_type(0.62, &priors, &anchors, SignalChannel::perfect()).unwrap();
        assert_eq!(p.probability(Ability::Medium), 1.0);
    }

    #[test]
    fn pair_independent_reduces_to_single_updates() {
        let prior = PairBelief::new([0.2, 0.7], [0.5, 0.3], 0.0).unwrap();
        let post = pair_posterior(prior, 1.1, ch(0.25)).unwrap();
        let single = normal_posterior(prior.marginal(0), 1.1, ch(0.25)).unwrap();
        assert!((post.means[0] - single.mean).abs() < 1e-12);
        assert!((post.covariance[0][0] - single.variance).abs() < 1e-12);
        assert_eq!(post.marginal(1), prior.marginal(1));
    }

    #[test]
    fn pair_near_perfect_correlation_moves_partner() {
        let prior = PairBelief::new([0.0, 0.0], [1.0, 1.0], 0.999_999).unwrap();
        let post = pair_posterior(prior, 2.0, ch(1.0)).unwrap();
        assert!((post.means[0] - post.means[1]).abs() < 1e-5);
        assert!((post.covariance[0][0] - post.covariance[1][1]).abs() < 1e-5);
    }

    #[test]
    fn pair_example_matches_grid_integration() {
        let prior = PairBelief::new([0.0, 0.0], [1.0, 1.0], 0.5).unwrap();
        let post = pair_posterior(prior, 2.0, ch(1.0)).unwrap();
        assert!((post.means[0] - 1.0).abs() < 1e-14);
        assert!((post.means[1] - 0.5).abs() < 1e-14);
        assert!((post.covariance[0][0] - 0.5).abs() < 1e-14);
        assert!((post.covariance[0][1] - 0.25).abs() < 1e-14);
        assert!((post.covariance[1][1] - 0.875).abs() < 1e-14);

        // 2000 x 2000 grid over [-8, 8]^2 of prior density x likelihood
        let n = 2000;
        let (lo, hi) = (-8.0, 8.0);
        let h = (hi - lo) / (n - 1) as f64;
        let det = 1.0 - 0.25;
        let (mut z, mut m1, mut m2, mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let x = lo + i as f64 * h;
            for j in 0..n {
                let y = lo + j as f64 * h;
                let q = (x * x - 2.0 * 0.5 * x * y + y * y) / det;
                let w = (-0.5 * q - (2.0 - x) * (2.0 - x) / 2.0).exp();
                z += w;
                m1 += w * x;
                m2 += w * y;
                s11 += w * x * x;
                s12 += w * x * y;
                s22 += w * y * y;
            }
        }
        let (gx, gy) = (m1 / z, m2 / z);
        assert!((post.means[0] - gx).abs() < 1e-4);
        assert!((post.means[1] - gy).abs() < 1e-4);
        assert!((post.covariance[0][0] - (s11 / z - gx * gx)).abs() < 1e-4);
        assert!((post.covariance[0][1] - (s12 / z - gx * gy)).abs() < 1e-4);
        assert!((post.covariance[1][1] - (s22 / z - gy * gy)).abs() < 1e-4);
    }

    #[test]
    fn pair_rejects_singular_covariance() {
        let singular = PairBelief {
            means: [0.0, 0.0],
            covariance: [[1.0, 1.0], [1.0, 1.0]],
        };
        assert!(pair_posterior(singular, 0.0, ch(1.0)).is_err());
        assert!(PairBelief::new([0.0, 0.0], [1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn effort_weight_limits() {
        assert_eq!(effort_signal_weight(None, ch(0.3)), 1.0);
        assert_eq!(effort_signal_weight(Some(0.1), SignalChannel::perfect()), 1.0);
        assert!((effort_signal_weight(Some(0.1), ch(0.1)) - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn posterior_variance_increases_with_noise(m in -2.0f64..2.0, v0 in 0.01f64..5.0, a in 0.001f64..5.0, b in 0.001f64..5.0) {
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let pa = normal_posterior(belief(m, v0), 0.3, ch(lo)).unwrap();
            let pb = normal_posterior(belief(m, v0), 0.3, ch(hi)).unwrap();
            prop_assert!(pa.variance < pb.variance);
        }

        #[test]
        fn posterior_variance_below_both_sources(m in -2.0f64..2.0, v0 in 0.001f64..5.0, noise in 0.001f64..5.0, s in -3.0f64..3.0) {
            let p = normal_posterior(belief(m, v0), s, ch(noise)).unwrap();
            prop_assert!(p.variance <= v0.min(noise));
        }

        #[test]
        fn sequential_is_order_invariant(signals in proptest::collection::vec(-2.0f64..2.0, 1..12), seed in 0usize..1000) {
            let prior = belief(0.5, 0.3);
            let fwd = sequential_posterior(prior, &signals, ch(0.2)).unwrap();
            let mut perm = signals.clone();
            perm.reverse();
            perm.rotate_left(seed % signals.len());
            let other = sequential_posterior(prior, &perm, ch(0.2)).unwrap();
            prop_assert!((fwd.mean - other.mean).abs() < 1e-12);
            prop_assert!((fwd.variance - other.variance).abs() < 1e-12);
        }

        #[test]
        fn sequential_equals_batch(signals in proptest::collection::vec(-2.0f64..2.0, 1..20), v0 in 0.05f64..2.0, noise in 0.01f64..2.0) {
            let prior = belief(0.1, v0);
            let seq = sequential_posterior(prior, &signals, ch(noise)).unwrap();
            let t = signals.len() as f64;
            let mean_signal = signals.iter().sum::<f64>() / t;
            let batch = normal_posterior(prior, mean_signal, ch(noise / t)).unwrap();
            prop_assert!((seq.mean - batch.mean).abs() < 1e-12);
            prop_assert!((seq.variance - batch.variance).abs() < 1e-12);
        }

        #[test]
        fn pair_rho_zero_is_two_independent_updates(m1 in -1.0f64..1.0, m2 in -1.0f64..1.0, v1 in 0.05f64..2.0, v2 in 0.05f64..2.0, s1 in -2.0f64..2.0, s2 in -2.0f64..2.0) {
            let prior = PairBelief::new([m1, m2], [v1, v2], 0.0).unwrap();
            let noise = ch(0.3);
            let post = pair_posterior(prior, s1, noise).unwrap();
            let post = pair_posterior(post.swapped(), s2, noise).unwrap().swapped();
            let a = normal_posterior(prior.marginal(0), s1, noise).unwrap();
            let b = normal_posterior(prior.marginal(1), s2, noise).unwrap();
            prop_assert!((post.means[0] - a.mean).abs() < 1e-12);
            prop_assert!((post.means[1] - b.mean).abs() < 1e-12);
            prop_assert!((post.covariance[0][0] - a.variance).abs() < 1e-12);
            prop_assert!((post.covariance[1][1] - b.variance).abs() < 1e-12);
        }

        #[test]
        fn pair_partner_variance_drops_iff_correlated(rho in -0.95f64..0.95, s in -2.0f64..2.0) {
            let prior = PairBelief::new([0.0, 0.0], [1.0, 1.0], rho).unwrap();
            let post = pair_posterior(prior, s, ch(0.5)).unwrap();
            if rho.abs() > 1e-6 {
                prop_assert!(post.covariance[1][1] < 1.0);
            } else {
                prop_assert!((post.covariance[1][1] - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn classify_probabilities_are_normalized(s in -1.0f64..2.0, noise in 1e-6f64..1.0) {
            let p = classify_type(s, &PerClass::new(0.3, 0.2, 0.5), &PerClass::new(1.0, 0.6, 0.3), ch(noise)).unwrap();
            let arr = p.probabilities.to_array();
            prop_assert!(arr.iter().all(|x| (0.0..=1.0).contains(x)));
            prop_assert!((arr.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

use serde::{Deserialize, Serialize};

use super::config::{Arm, MarketConfig};
use crate::econ::{Ability, PerClass};
use crate::error::{Error, Result};
use crate::optimize::bisect;

const INTEGRATION_STEPS: usize = 20_000;

/// Probability that the MAP class of `theta + N(0, sigma^2)` is the true
/// class, when classes are drawn with `shares` and sit at `anchors`.
///
/// Computed as the integral of `max_k share_k * phi(s; anchor_k, sigma)`
/// with composite Simpson's rule.
pub fn map_accuracy(sigma: f64, anchors: &PerClass<f64>, shares: &PerClass<f64>) -> f64 {
    let th = anchors.to_array();
    let p = shares.to_array();
    if sigma == 0.0 {
        return 1.0;
    }
    let lo = th.iter().copied().fold(f64::INFINITY, f64::min) - 12.0 * sigma;
    let hi = th.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 12.0 * sigma;
    let norm = 1.0 / (sigma * (std::f64::consts::TAU).sqrt());
    let f = |s: f64| {
        let mut best = 0.0f64;
        for k in 0..3 {
            let z = (s - th[k]) / sigma;
            best = best.max(p[k] * norm * (-0.5 * z * z).exp());
        }
        best
    };
    let n = INTEGRATION_STEPS;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Type-signal noise sd at which MAP classification accuracy equals
/// `accuracy`, never below `floor`.
pub fn calibrate_control_sigma(
    accuracy: f64,
    anchors: &PerClass<f64>,
    shares: &PerClass<f64>,
    floor: f64,
) -> Result<f64> {
    if map_accuracy(floor, anchors, shares) <= accuracy {
        return Ok(floor);
    }
    let chance = shares.to_array().into_iter().fold(0.0, f64::max);
    if accuracy <= chance {
        return Err(Error::constraint(
            "control_accuracy",
            format!("must exceed the largest ability share ({chance})"),
        ));
    }
    let mut hi = floor.max(1e-3);
    while map_accuracy(hi, anchors, shares) > accuracy {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::constraint("control_accuracy", "cannot be reached by any noise level"));
        }
    }
    Ok(bisect(|s| map_accuracy(s, anchors, shares) - accuracy, floor, hi, 1e-12))
}

/// Noise sds of one arm's signal channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPair {
    pub theta_sd: f64,
    pub effort_sd: f64,
}

/// Signal channels of both arms. The control arm's type channel is
/// calibrated to the configured accuracy; its effort channel is at least as
/// noisy as its type channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmChannels {
    pub with_ai: ChannelPair,
    pub without_ai: ChannelPair,
}

impl ArmChannels {
    pub fn for_config(config: &MarketConfig) -> Result<Self> {
        let control = calibrate_control_sigma(
            config.control_accuracy,
            &config.theta_anchors,
            &config.ability_shares,
            config.sigma_theta,
        )?;
        Ok(ArmChannels {
            with_ai: ChannelPair {
                theta_sd: config.sigma_theta,
                effort_sd: config.sigma_e,
            },
            without_ai: ChannelPair {
                theta_sd: control,
                effort_sd: control.max(config.sigma_e),
            },
        })
    }

    pub fn get(&self, arm: Arm) -> ChannelPair {
        match arm {
            Arm::WithAi => self.with_ai,
            Arm::WithoutAi => self.without_ai,
        }
    }
}

/// Observed signal: the true value plus the arm's noise, scaled from a
/// standard normal draw `z`.
pub fn degrade_signal(true_value: f64, noise_sd: f64, z: f64) -> f64 {
    true_value + noise_sd * z
}

/// Fraction of draws whose MAP class matches the true class, by simulation.
/// Used to cross-check [`map_accuracy`].
pub fn simulated_map_accuracy(
    sigma: f64,
    anchors: &PerClass<f64>,
    shares: &PerClass<f64>,
    draws: u64,
    seed: u64,
) -> Result<f64> {
    use crate::bayes::{classify_type, SignalChannel};
    use crate::rng::derive_stream;
    let channel = SignalChannel::from_sd(sigma)?;
    let stream = derive_stream(seed, 0, 0, 0);
    let p = shares.to_array();
    let mut hits = 0u64;
    for i in 0..draws {
        let u = stream.uniform(3 * i);
        let class = if u < p[0] {
            Ability::High
        } else if u < p[0] + p[1] {
            Ability::Medium
        } else {
            Ability::Low
        };
        let s = degrade_signal(anchors.get(class), sigma, stream.normal(3 * i + 1));
        if classify_type(s, shares, anchors, channel)?.map_class() == class {
            hits += 1;
        }
    }
    Ok(hits as f64 / draws as f64)
}

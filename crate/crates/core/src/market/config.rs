use serde::{Deserialize, Serialize};

use crate::contract::TypeAnchor;
use crate::econ::{Ability, EffortBounds, PerClass};
use crate::error::{Error, Result};
use crate::manipulation::PenaltyScheme;

/// Upper limit on `cycles`.
pub const MAX_CYCLES: usize = 1000;

/// How principals compete for agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    /// Many principals bid wages up to zero expected profit.
    Competitive,
    /// `k` principals; each offer blends a screening item with the
    /// competitive contract, weight `1/k` on the screening item.
    Oligopoly(u32),
    /// One principal posting a screening menu.
    Monopoly,
}

impl Structure {
    pub fn label(&self) -> String {
        match self {
            Structure::Competitive => "competitive".to_string(),
            Structure::Oligopoly(k) => format!("oligopoly{k}"),
            Structure::Monopoly => "monopoly".to_string(),
        }
    }

    pub fn n_principals(&self) -> Option<u32> {
        match self {
            Structure::Competitive => None,
            Structure::Oligopoly(k) => Some(*k),
            Structure::Monopoly => Some(1),
        }
    }
}

impl std::fmt::Display for Structure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "competitive" => Ok(Structure::Competitive),
            "monopoly" => Ok(Structure::Monopoly),
            _ => s
                .strip_prefix("oligopoly")
                .and_then(|k| k.parse().ok())
                .map(Structure::Oligopoly)
                .ok_or_else(|| Error::Parse(format!("unknown market structure `{s}`"))),
        }
    }
}

/// Treatment (precise AI signals) or control (calibrated noisy signals).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    WithAi,
    WithoutAi,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::WithAi, Arm::WithoutAi];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::WithAi => "with_ai",
            Arm::WithoutAi => "without_ai",
        }
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the wage is paid on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WageMode {
    /// Estimated output minus a fee, with effort estimated by shrinking the
    /// effort signal toward the predicted effort.
    #[default]
    EstimatedOutput,
    /// Affine in the raw effort signal.
    Signal,
}

/// Everything a market simulation needs. Defaults are the standard
/// calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketConfig {
    pub n_agents: usize,
    pub ability_shares: PerClass<f64>,
    pub theta_anchors: PerClass<f64>,
    pub gamma: PerClass<f64>,
    pub reservation_utility: PerClass<f64>,
    pub effort_bounds: EffortBounds,
    /// Half-width of the uniform within-class spread of theta.
    pub theta_jitter: f64,
    /// Type-signal noise sd with AI.
    pub sigma_theta: f64,
    /// Effort-signal noise sd with AI.
    pub sigma_e: f64,
    /// MAP classification accuracy of the control arm's type signal.
    pub control_accuracy: f64,
    pub structure: Structure,
    pub wage_mode: WageMode,
    /// Prior variance of effort around the principal's prediction; `null`
    /// means the effort signal is taken at face value.
    pub effort_prior_variance: Option<f64>,
    /// Minimum posterior class probability for a class to get a menu item.
    pub menu_min_probability: f64,
    /// Menu interval half-width is `menu_scale * sigma_theta^2`.
    pub menu_scale: f64,
    pub cycles: usize,
    pub discount: f64,
    /// Weight on the latest realized utility in the agents' acceptance
    /// benchmark.
    pub learning_weight: f64,
    /// Accept while cumulative discounted surplus stays non-negative instead
    /// of requiring per-period participation.
    pub lifetime_ir: bool,
    pub replications: usize,
    pub master_seed: u64,
    pub manipulation: Option<PenaltyScheme>,
    /// Prior correlation of types within agent pairs (0, 1), (2, 3), ...
    pub correlation_rho: f64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            n_agents: 300,
            ability_shares: PerClass::new(0.3, 0.2, 0.5),
            theta_anchors: PerClass::new(1.0, 0.6, 0.3),
            gamma: PerClass::new(1.0, 1.5, 2.5),
            reservation_utility: PerClass::new(0.0, 0.0, 0.018),
            effort_bounds: EffortBounds::default(),
            theta_jitter: 0.05,
            sigma_theta: 0.03,
            sigma_e: 0.03,
            control_accuracy: 0.8,
            structure: Structure::Competitive,
            wage_mode: WageMode::EstimatedOutput,
            effort_prior_variance: Some(0.1),
            menu_min_probability: 0.01,
            menu_scale: 2.0,
            cycles: 10,
            discount: 0.95,
            learning_weight: 0.3,
            lifetime_ir: false,
            replications: 30,
            master_seed: 20240601,
            manipulation: None,
            correlation_rho: 0.0,
        }
    }
}

fn finite_nonneg(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::constraint(field, format!("must be finite and >= 0, got {v}")))
    }
}

impl MarketConfig {
    pub fn validate(&self) -> Result<()> {
        let shares = self.ability_shares.to_array();
        if shares.iter().any(|s| !(*s >= 0.0 && *s <= 1.0)) {
            return Err(Error::constraint("ability_shares", "each share must lie in [0, 1]"));
        }
        let total: f64 = shares.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::constraint("ability_shares", format!("shares must sum to 1, got {total}")));
        }
        let th = self.theta_anchors;
        if !(th.low > 0.0 && th.low < th.medium && th.medium < th.high && th.high.is_finite()) {
            return Err(Error::constraint(
                "theta_anchors",
                "must be positive and strictly increasing from low to high",
            ));
        }
        let g = self.gamma;
        if !(g.high > 0.0 && g.high <= g.medium && g.medium <= g.low && g.low.is_finite()) {
            return Err(Error::constraint(
                "gamma",
                "must be positive and non-increasing from low to high",
            ));
        }
        if self.reservation_utility.to_array().iter().any(|u| !u.is_finite()) {
            return Err(Error::constraint("reservation_utility", "must be finite"));
        }
        let b = self.effort_bounds;
        if !(b.lo >= 0.0 && b.lo < b.hi && b.hi.is_finite()) {
            return Err(Error::constraint("effort_bounds", "need 0 <= lo < hi"));
        }
        finite_nonneg("theta_jitter", self.theta_jitter)?;
        if self.theta_jitter >= th.low {
            return Err(Error::constraint("theta_jitter", "must be smaller than the lowest anchor"));
        }
        finite_nonneg("sigma_theta", self.sigma_theta)?;
        finite_nonneg("sigma_e", self.sigma_e)?;
        if !(self.control_accuracy > 0.0 && self.control_accuracy <= 1.0) {
            return Err(Error::constraint("control_accuracy", "must lie in (0, 1]"));
        }
        if let Structure::Oligopoly(k) = self.structure {
            if k < 2 {
                return Err(Error::constraint("structure", "oligopoly needs at least 2 firms"));
            }
        }
        if let Some(v) = self.effort_prior_variance {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::constraint("effort_prior_variance", "must be positive when set"));
            }
        }
        if !(self.menu_min_probability >= 0.0 && self.menu_min_probability < 1.0) {
            return Err(Error::constraint("menu_min_probability", "must lie in [0, 1)"));
        }
        finite_nonneg("menu_scale", self.menu_scale)?;
        if self.cycles < 1 || self.cycles > MAX_CYCLES {
            return Err(Error::constraint("cycles", format!("must lie in 1..={MAX_CYCLES}")));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::constraint("discount", "must lie in (0, 1)"));
        }
        if !(self.learning_weight >= 0.0 && self.learning_weight <= 1.0) {
            return Err(Error::constraint("learning_weight", "must lie in [0, 1]"));
        }
        if self.replications < 1 {
            return Err(Error::constraint("replications", "must be at least 1"));
        }
        if let Some(s) = &self.manipulation {
            s.validate()?;
        }
        if !(self.correlation_rho > -1.0 && self.correlation_rho < 1.0) {
            return Err(Error::constraint("correlation_rho", "must lie in (-1, 1)"));
        }
        Ok(())
    }

    /// Anchors sorted by increasing theta (low, medium, high).
    pub fn anchors_ascending(&self) -> [TypeAnchor; 3] {
        [Ability::Low, Ability::Medium, Ability::High].map(|a| TypeAnchor {
            ability: a,
            theta: self.theta_anchors.get(a),
            gamma: self.gamma.get(a),
            reservation: self.reservation_utility.get(a),
        })
    }

    /// Population mean and variance of theta, counting the within-class
    /// spread.
    pub fn theta_moments(&self) -> (f64, f64) {
        let mut mean = 0.0;
        for a in Ability::ALL {
            mean += self.ability_shares.get(a) * self.theta_anchors.get(a);
        }
        let mut var = self.theta_jitter * self.theta_jitter / 3.0;
        for a in Ability::ALL {
            let d = self.theta_anchors.get(a) - mean;
            var += self.ability_shares.get(a) * d * d;
        }
        (mean, var)
    }
}

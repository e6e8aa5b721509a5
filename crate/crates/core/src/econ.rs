//! Economic primitives: agent types, effort cost, production and the
//! full-information benchmark.
//!
//! Cost is quadratic, `c(e) = gamma / 2 * e^2`, and production is linear in
//! effort, `V(e, theta) = theta * e`. Under these forms the welfare-maximizing
//! effort has the closed form `theta / gamma` (clamped to the effort bounds),
//! which every optimizer in the crate is checked against.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete ability class. Ordered from most to least able.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ability {
    High,
    Medium,
    Low,
}

impl Ability {
    pub const ALL: [Ability; 3] = [Ability::High, Ability::Medium, Ability::Low];

    pub fn index(self) -> usize {
        match self {
            Ability::High => 0,
            Ability::Medium => 1,
            Ability::Low => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Ability> {
        Ability::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Ability::High => "high",
            Ability::Medium => "medium",
            Ability::Low => "low",
        }
    }
}

impl fmt::Display for Ability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ability {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high" => Ok(Ability::High),
            "medium" => Ok(Ability::Medium),
            "low" => Ok(Ability::Low),
            other => Err(Error::domain(format!("unknown ability class `{other}`"))),
        }
    }
}

/// Per-class values indexed by [`Ability`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerClass<T> {
    pub high: T,
    pub medium: T,
    pub low: T,
}

impl<T: Copy> PerClass<T> {
    pub fn new(high: T, medium: T, low: T) -> Self {
        PerClass { high, medium, low }
    }

    pub fn get(&self, ability: Ability) -> T {
        match ability {
            Ability::High => self.high,
            Ability::Medium => self.medium,
            Ability::Low => self.low,
        }
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.high, self.medium, self.low]
    }
}

/// An agent's private characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub theta: f64,
    pub ability: Ability,
    pub gamma: f64,
    pub reservation_utility: f64,
}

impl AgentProfile {
    pub fn new(theta: f64, ability: Ability, gamma: f64, reservation_utility: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::domain(format!("theta must be positive, got {theta}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
        }
        Ok(AgentProfile {
            theta,
            ability,
            gamma,
            reservation_utility,
        })
    }
}

/// Admissible effort interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffortBounds {
    pub lo: f64,
    pub hi: f64,
}

impl EffortBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::domain(format!(
                "effort bounds require 0 <= lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(EffortBounds { lo, hi })
    }

    pub fn clamp(&self, e: f64) -> f64 {
        e.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, e: f64) -> bool {
        e >= self.lo && e <= self.hi
    }
}

impl Default for EffortBounds {
    fn default() -> Self {
        EffortBounds { lo: 0.0, hi: 1.0 }
    }
}

/// Realized single-period outcome of an accepted contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub effort: f64,
    pub output: f64,
    pub wage: f64,
    pub agent_utility: f64,
    pub principal_utility: f64,
}

impl Outcome {
    /// Builds the outcome for a realized wage. Utilities are computed as
    /// `wage - cost` and `output - wage`.
    pub fn realize(effort: f64, wage: f64, profile: &AgentProfile, bounds: &EffortBounds) -> Result<Self> {
        let c = cost(effort, profile, bounds)?;
        let output = production(effort, profile.theta)?;
        Ok(Outcome {
            effort,
            output,
            wage,
            agent_utility: wage - c,
            principal_utility: output - wage,
        })
    }

    pub fn welfare(&self) -> f64 {
        self.agent_utility + self.principal_utility
    }
}

/// Effort cost `gamma / 2 * e^2`.
pub fn cost(e: f64, profile: &AgentProfile, bounds: &EffortBounds) -> Result<f64> {
    if !bounds.contains(e) {
        return Err(Error::domain(format!(
            "effort {e} outside [{}, {}]",
            bounds.lo, bounds.hi
        )));
    }
    Ok(quadratic_cost(e, profile.gamma))
}

#[inline]
pub(crate) fn quadratic_cost(e: f64, gamma: f64) -> f64 {
    0.5 * gamma * e * e
}

/// Output `theta * e`.
pub fn production(e: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::domain(format!("theta must be positive, got {theta}")));
    }
    Ok(theta * e)
}

/// Welfare-maximizing effort, `clamp(theta / gamma)`.
pub fn first_best_effort(theta: f64, gamma: f64, bounds: &EffortBounds) -> f64 {
    bounds.clamp(theta / gamma)
}

/// Full-information surplus `V - c` at [`first_best_effort`].
pub fn first_best_welfare(theta: f64, gamma: f64, bounds: &EffortBounds) -> f64 {
    let e = first_best_effort(theta, gamma, bounds);
    theta * e - quadratic_cost(e, gamma)
}

//! Contract optimization for a risk-neutral agent with quadratic effort cost.
//!
//! All wage schedules are affine in the effort signal, `w = alpha * s_e + beta`.
//! Because the signal is unbiased, the agent's problem reduces to
//! `max_e alpha * e + beta - gamma / 2 * e^2`, so the best response is
//! `alpha / gamma` clamped to the effort bounds. Payment noise never enters the
//! agent's choice; it only shows up in [`payment_variance`].

use serde::{Deserialize, Serialize};

use crate::bayes::{GaussianBelief, SignalChannel};
use crate::econ::{quadratic_cost, Ability, AgentProfile, EffortBounds};
use crate::error::{Error, Result};

/// Affine wage on the effort signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearContract {
    /// Incentive slope.
    pub alpha: f64,
    /// Fixed transfer.
    pub beta: f64,
}

impl LinearContract {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) || !beta.is_finite() {
            return Err(Error::domain(format!(
                "contract requires finite alpha >= 0 and finite beta, got ({alpha}, {beta})"
            )));
        }
        Ok(LinearContract { alpha, beta })
    }

    pub fn flat(beta: f64) -> Self {
        LinearContract { alpha: 0.0, beta }
    }

    pub fn wage(&self, effort_signal: f64) -> f64 {
        self.alpha * effort_signal + self.beta
    }

    /// Expected wage at true effort `e` (the signal is unbiased).
    pub fn expected_wage(&self, e: f64) -> f64 {
        self.wage(e)
    }
}

#[inline]
pub(crate) fn effort_for_slope(alpha: f64, gamma: f64, bounds: &EffortBounds) -> f64 {
    bounds.clamp(alpha / gamma)
}

/// `alpha * e - c(e)` at the best response: what the incentive part of a
/// contract is worth to a type with cost sensitivity `gamma`.
#[inline]
pub(crate) fn incentive_surplus(alpha: f64, gamma: f64, bounds: &EffortBounds) -> f64 {
    let e = effort_for_slope(alpha, gamma, bounds);
    alpha * e - quadratic_cost(e, gamma)
}

pub fn best_response_effort(contract: &LinearContract, profile: &AgentProfile, bounds: &EffortBounds) -> f64 {
    effort_for_slope(contract.alpha, profile.gamma, bounds)
}

/// Expected wage minus effort cost at the best response (reservation utility
/// not subtracted).
pub fn expected_agent_utility(contract: &LinearContract, gamma: f64, bounds: &EffortBounds) -> f64 {
    incentive_surplus(contract.alpha, gamma, bounds) + contract.beta
}

/// Fixed transfer that leaves the agent exactly at its reservation utility.
pub fn ir_binding_transfer(alpha: f64, profile: &AgentProfile, bounds: &EffortBounds) -> f64 {
    transfer_for_reservation(alpha, profile.gamma, profile.reservation_utility, bounds)
}

fn transfer_for_reservation(alpha: f64, gamma: f64, reservation: f64, bounds: &EffortBounds) -> f64 {
    reservation - incentive_surplus(alpha, gamma, bounds)
}

/// A posted contract together with what the principal expects from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractQuote {
    pub contract: LinearContract,
    pub expected_effort: f64,
    pub expected_wage: f64,
    pub expected_profit: f64,
    pub payment_variance: f64,
}

/// Profit-maximizing linear contract against a Gaussian belief over the
/// agent's productivity, with the participation constraint binding.
///
/// With linear production the expected-profit maximizer is `alpha = E[theta]`,
/// capped where the induced effort would leave the bounds. A non-positive
/// belief mean yields the no-trade contract (`alpha = 0`).
pub fn optimal_contract(
    belief: &GaussianBelief,
    effort_channel: SignalChannel,
    gamma: f64,
    reservation: f64,
    bounds: &EffortBounds,
) -> ContractQuote {
    let alpha = if belief.mean <= 0.0 {
        0.0
    } else {
        belief.mean.min(gamma * bounds.hi)
    };
    let beta = transfer_for_reservation(alpha, gamma, reservation, bounds);
    let contract = LinearContract { alpha, beta };
    let effort = effort_for_slope(alpha, gamma, bounds);
    let expected_wage = contract.expected_wage(effort);
    ContractQuote {
        contract,
        expected_effort: effort,
        expected_wage,
        expected_profit: belief.mean * effort - expected_wage,
        payment_variance: payment_variance(&contract, effort_channel),
    }
}

/// Expected principal profit of `contract` if the agent has productivity
/// `theta` and cost sensitivity `gamma` and best-responds.
pub fn expected_principal_profit(contract: &LinearContract, theta: f64, gamma: f64, bounds: &EffortBounds) -> f64 {
    let e = effort_for_slope(contract.alpha, gamma, bounds);
    theta * e - contract.expected_wage(e)
}

/// Wage paid on the principal's effort estimate rather than the raw signal:
/// `w = rate * e_hat - fee`, with `e_hat = weight * s_e + (1 - weight) * predicted`.
///
/// This is the "estimated output minus a fee" form of [`dynamic_wage`]. Seen
/// from the agent it is an ordinary [`LinearContract`] with slope
/// `rate * weight`; [`EstimatedOutputContract::effective`] gives that view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedOutputContract {
    pub rate: f64,
    pub fee: f64,
    pub estimate_weight: f64,
    pub predicted_effort: f64,
}

impl EstimatedOutputContract {
    /// Contract with the given rate whose effective intercept is `intercept`.
    pub fn with_intercept(rate: f64, estimate_weight: f64, predicted_effort: f64, intercept: f64) -> Self {
        EstimatedOutputContract {
            rate,
            fee: rate * (1.0 - estimate_weight) * predicted_effort - intercept,
            estimate_weight,
            predicted_effort,
        }
    }

    pub fn effective(&self) -> LinearContract {
        LinearContract {
            alpha: self.rate * self.estimate_weight,
            beta: self.rate * (1.0 - self.estimate_weight) * self.predicted_effort - self.fee,
        }
    }

    pub fn effort_estimate(&self, effort_signal: f64) -> f64 {
        self.estimate_weight * effort_signal + (1.0 - self.estimate_weight) * self.predicted_effort
    }

    pub fn wage(&self, effort_signal: f64) -> f64 {
        dynamic_wage(self.rate, self.effort_estimate(effort_signal), self.fee)
    }
}

/// Type the principal designs a menu item for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeAnchor {
    pub ability: Ability,
    pub theta: f64,
    pub gamma: f64,
    pub reservation: f64,
}

/// Closed interval of type-signal values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SignalInterval {
    pub fn contains(&self, s: f64) -> bool {
        s >= self.lo && s <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn distance(&self, s: f64) -> f64 {
        if s < self.lo {
            self.lo - s
        } else if s > self.hi {
            s - self.hi
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MenuItem {
    pub anchor: TypeAnchor,
    pub interval: SignalInterval,
    pub pay: EstimatedOutputContract,
    /// The item as a wage on the raw effort signal.
    pub contract: LinearContract,
}

impl MenuItem {
    /// Expected profit if the item is taken by the type it was designed for.
    pub fn anchor_profit(&self, bounds: &EffortBounds) -> f64 {
        expected_principal_profit(&self.contract, self.anchor.theta, self.anchor.gamma, bounds)
    }
}

/// Screening menu ordered by anchor productivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractMenu {
    pub items: Vec<MenuItem>,
}

impl ContractMenu {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Item whose interval holds `s`; a signal in a gap between intervals goes
    /// to the nearest one, and exact ties go to the lower item.
    pub fn item_for_signal(&self, s: f64) -> Option<&MenuItem> {
        let mut best: Option<(&MenuItem, f64)> = None;
        for item in &self.items {
            let d = item.interval.distance(s);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((item, d));
            }
        }
        best.map(|(item, _)| item)
    }

    /// Utility-maximizing item for a type with cost sensitivity `gamma`.
    /// Near-ties (within 1e-12) resolve to the higher-powered item, which is
    /// the one the menu intends under a binding downward constraint.
    pub fn best_item(&self, gamma: f64, bounds: &EffortBounds) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, item) in self.items.iter().enumerate() {
            let u = expected_agent_utility(&item.contract, gamma, bounds);
            match best {
                Some((_, bu)) if u < bu - 1e-12 => {}
                _ => best = Some((i, u)),
            }
        }
        best
    }

    /// Number of anchor types whose own item is not among their
    /// utility-maximizing choices.
    pub fn self_selection_violations(&self, bounds: &EffortBounds) -> usize {
        self.items
            .iter()
            .enumerate()
            .filter(|(k, item)| {
                let own = expected_agent_utility(&item.contract, item.anchor.gamma, bounds);
                self.items.iter().enumerate().any(|(j, other)| {
                    j != *k && expected_agent_utility(&other.contract, item.anchor.gamma, bounds) > own + 1e-12
                })
            })
            .count()
    }
}

/// Builds a self-selecting screening menu, one item per anchor.
///
/// Each item's rate is the optimal slope for its anchor. Transfers bind the
/// lowest anchor's participation constraint and every downward
/// self-selection constraint, so higher anchors keep exactly the rent needed
/// to stop them from taking a lower item. Signal intervals are centered on
/// the anchors with half-width `scale * sigma_theta^2`, cut at midpoints
/// between neighbours.
pub fn design_menu(
    anchors: &[TypeAnchor],
    sigma_theta: f64,
    scale: f64,
    estimate_weight: f64,
    bounds: &EffortBounds,
) -> Result<ContractMenu> {
    if anchors.is_empty() {
        return Err(Error::domain("menu needs at least one anchor"));
    }
    if anchors.windows(2).any(|w| !(w[0].theta < w[1].theta)) {
        return Err(Error::domain("menu anchors must be strictly increasing in theta"));
    }
    if !(sigma_theta >= 0.0) || !(scale >= 0.0) {
        return Err(Error::domain("sigma_theta and scale must be non-negative"));
    }
    if !(estimate_weight > 0.0 && estimate_weight <= 1.0) {
        return Err(Error::domain(format!(
            "estimate weight must lie in (0, 1], got {estimate_weight}"
        )));
    }

    let half_width = scale * sigma_theta * sigma_theta;
    let mut items: Vec<MenuItem> = Vec::with_capacity(anchors.len());
    for (k, anchor) in anchors.iter().enumerate() {
        let rate = anchor.theta.min(anchor.gamma * bounds.hi);
        let slope = rate * estimate_weight;
        let own = incentive_surplus(slope, anchor.gamma, bounds);
        let mut intercept = anchor.reservation - own;
        for lower in &items {
            let mimic = incentive_surplus(lower.contract.alpha, anchor.gamma, bounds) + lower.contract.beta;
            intercept = intercept.max(mimic - own);
        }
        let predicted = effort_for_slope(slope, anchor.gamma, bounds);
        let pay = EstimatedOutputContract::with_intercept(rate, estimate_weight, predicted, intercept);

        let mut lo = anchor.theta - half_width;
        let mut hi = anchor.theta + half_width;
        if k > 0 {
            lo = lo.max(0.5 * (anchors[k - 1].theta + anchor.theta));
        }
        if k + 1 < anchors.len() {
            hi = hi.min(0.5 * (anchor.theta + anchors[k + 1].theta));
        }
        items.push(MenuItem {
            anchor: *anchor,
            interval: SignalInterval { lo, hi },
            pay,
            contract: LinearContract {
                alpha: slope,
                beta: intercept,
            },
        });
    }
    Ok(ContractMenu { items })
}

/// Decomposition of what an agent earns from a contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RentReport {
    pub expected_wage: f64,
    pub effort_cost: f64,
    pub rent: f64,
}

pub fn information_rent(contract: &LinearContract, profile: &AgentProfile, bounds: &EffortBounds) -> RentReport {
    let e = best_response_effort(contract, profile, bounds);
    let expected_wage = contract.expected_wage(e);
    let effort_cost = quadratic_cost(e, profile.gamma);
    RentReport {
        expected_wage,
        effort_cost,
        rent: expected_wage - effort_cost - profile.reservation_utility,
    }
}

/// Variance of the wage induced by effort-signal noise, `alpha^2 * sigma_e^2`.
pub fn payment_variance(contract: &LinearContract, effort_channel: SignalChannel) -> f64 {
    contract.alpha * contract.alpha * effort_channel.noise_variance
}

/// Per-period wage in the repeated relationship: estimated output
/// `V(e, theta_hat)` less the participation transfer.
pub fn dynamic_wage(theta_hat: f64, effort: f64, transfer: f64) -> f64 {
    theta_hat * effort - transfer
}

/// Wage in the multi-agent scheme, loading on both the effort signal and the
/// type signal. `type_loading` is not a fixed transfer.
pub fn multi_agent_wage(alpha: f64, type_loading: f64, effort_signal: f64, type_signal: f64) -> f64 {
    alpha * effort_signal + type_loading * type_signal
}

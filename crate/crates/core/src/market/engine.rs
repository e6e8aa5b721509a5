use rayon::prelude::*;

use super::channel::{degrade_signal, ArmChannels, ChannelPair};
use super::config::{Arm, MarketConfig, Structure, WageMode};
use super::population::draw_population;
use super::record::CycleRecord;
use crate::bayes::{
    classify_type, effort_signal_weight, normal_posterior, pair_posterior, GaussianBelief, PairBelief, SignalChannel,
};
use crate::contract::{
    design_menu, effort_for_slope, expected_agent_utility, optimal_contract, ContractMenu, EstimatedOutputContract,
    LinearContract, TypeAnchor,
};
use crate::econ::{quadratic_cost, AgentProfile, EffortBounds};
use crate::error::{Error, Result};
use crate::manipulation::best_manipulation;
use crate::rng::derive_stream;

// word layout of a (replication, agent, cycle) stream
const TYPE_NOISE: u64 = 0;
const EFFORT_NOISE: u64 = 2;
const DETECTION: u64 = 4;

/// Offers an agent faces under `structure`, given the competitive contract
/// and the screening menu (if any items survived).
///
/// Competitive markets offer the zero-profit contract; a monopolist offers its
/// menu; `k` oligopolists offer each menu item blended with the competitive
/// contract, weight `1/k` on the item.
pub fn apply_structure(
    structure: Structure,
    competitive: LinearContract,
    menu: Option<&ContractMenu>,
) -> Vec<LinearContract> {
    let items = || menu.map(|m| m.items.iter().map(|i| i.contract).collect::<Vec<_>>()).unwrap_or_default();
    match structure {
        Structure::Competitive => vec![competitive],
        Structure::Monopoly => items(),
        Structure::Oligopoly(k) => {
            let w = 1.0 / k as f64;
            let blended: Vec<_> = items()
                .into_iter()
                .map(|c| LinearContract {
                    alpha: w * c.alpha + (1.0 - w) * competitive.alpha,
                    beta: w * c.beta + (1.0 - w) * competitive.beta,
                })
                .collect();
            if blended.is_empty() {
                vec![competitive]
            } else {
                blended
            }
        }
    }
}

/// Utility-maximizing offer; near-ties go to the steeper contract.
fn choose_offer(offers: &[LinearContract], gamma: f64, bounds: &EffortBounds) -> Option<(LinearContract, f64)> {
    let mut best: Option<(LinearContract, f64)> = None;
    for c in offers {
        let u = expected_agent_utility(c, gamma, bounds);
        best = match best {
            None => Some((*c, u)),
            Some((bc, bu)) => {
                if u > bu + 1e-15 || ((u - bu).abs() <= 1e-15 && c.alpha > bc.alpha) {
                    Some((*c, u))
                } else {
                    Some((bc, bu))
                }
            }
        };
    }
    best
}

/// Per-agent state the principal and the agent carry across periods.
#[derive(Debug, Clone)]
struct AgentState {
    belief: GaussianBelief,
    signal_sum: f64,
    benchmark: f64,
    lifetime_surplus: f64,
}

/// A calibrated market, ready to simulate replications.
#[derive(Debug, Clone)]
pub struct Market {
    config: MarketConfig,
    channels: ArmChannels,
    prior: GaussianBelief,
    anchors: [TypeAnchor; 3],
}

impl Market {
    pub fn new(config: &MarketConfig) -> Result<Self> {
        config.validate()?;
        let channels = ArmChannels::for_config(config)?;
        let (mean, var) = config.theta_moments();
        Ok(Market {
            config: config.clone(),
            channels,
            prior: GaussianBelief::new(mean, var.max(1e-12))?,
            anchors: config.anchors_ascending(),
        })
    }

    pub fn config(&self) -> &MarketConfig {
        &self.config
    }

    pub fn channels(&self) -> ArmChannels {
        self.channels
    }

    /// Prior over theta that every principal starts from.
    pub fn prior(&self) -> GaussianBelief {
        self.prior
    }

    /// Both arms of one replication, treatment first. The two arms face the
    /// same population and the same noise draws.
    pub fn run_replication(&self, replication: usize) -> Result<Vec<CycleRecord>> {
        let population = draw_population(&self.config, replication)?;
        let mut out = Vec::with_capacity(2 * population.len() * self.config.cycles);
        for arm in Arm::BOTH {
            self.run_arm(replication, arm, &population, &mut out)?;
        }
        Ok(out)
    }

    /// Screening menu over the classes the principal still finds plausible,
    /// without items that lose money on the type they target.
    fn plausible_menu(
        &self,
        probabilities: [f64; 3],
        theta_sd: f64,
        weight: f64,
    ) -> Result<Option<ContractMenu>> {
        let bounds = &self.config.effort_bounds;
        let mut anchors: Vec<TypeAnchor> = self
            .anchors
            .iter()
            .filter(|a| probabilities[a.ability.index()] >= self.config.menu_min_probability)
            .copied()
            .collect();
        loop {
            if anchors.is_empty() {
                return Ok(None);
            }
            let menu = design_menu(&anchors, theta_sd, self.config.menu_scale, weight, bounds)?;
            let before = anchors.len();
            anchors.retain(|a| {
                let item = menu.items.iter().find(|i| i.anchor.ability == a.ability);
                item.is_some_and(|i| i.anchor_profit(bounds) >= -1e-12)
            });
            if anchors.len() == before {
                return Ok(Some(menu));
            }
        }
    }

    fn run_arm(
        &self,
        replication: usize,
        arm: Arm,
        population: &[AgentProfile],
        out: &mut Vec<CycleRecord>,
    ) -> Result<()> {
        let cfg = &self.config;
        let bounds = cfg.effort_bounds;
        let ChannelPair { theta_sd, effort_sd } = self.channels.get(arm);
        let type_channel = SignalChannel::from_sd(theta_sd)?;
        let effort_channel = SignalChannel::from_sd(effort_sd)?;
        let weight = match cfg.wage_mode {
            WageMode::EstimatedOutput => effort_signal_weight(cfg.effort_prior_variance, effort_channel),
            WageMode::Signal => 1.0,
        };
        let paired = cfg.correlation_rho != 0.0 && !type_channel.is_perfect();

        let mut states: Vec<AgentState> = population
            .iter()
            .map(|p| AgentState {
                belief: self.prior,
                signal_sum: 0.0,
                benchmark: p.reservation_utility,
                lifetime_surplus: 0.0,
            })
            .collect();
        let mut pairs: Vec<PairBelief> = if paired {
            (0..population.len() / 2)
                .map(|_| {
                    PairBelief::new(
                        [self.prior.mean; 2],
                        [self.prior.variance; 2],
                        cfg.correlation_rho,
                    )
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };

        let mut discount_weight = 1.0;
        let mut signals = vec![0.0; population.len()];
        for cycle in 0..cfg.cycles {
            for (i, p) in population.iter().enumerate() {
                let stream = derive_stream(cfg.master_seed, replication as u64, i as u64, cycle as u64);
                signals[i] = degrade_signal(p.theta, theta_sd, stream.normal(TYPE_NOISE));
                states[i].signal_sum += signals[i];
            }
            for (i, state) in states.iter_mut().enumerate() {
                if paired && i / 2 < pairs.len() {
                    continue;
                }
                state.belief = normal_posterior(state.belief, signals[i], type_channel)?;
            }
            for (j, pair) in pairs.iter_mut().enumerate() {
                let (a, b) = (2 * j, 2 * j + 1);
                let first = pair_posterior(*pair, signals[a], type_channel)?;
                *pair = pair_posterior(first.swapped(), signals[b], type_channel)?.swapped();
                states[a].belief = pair.marginal(0);
                states[b].belief = pair.marginal(1);
            }

            let mean_channel = type_channel.averaged(cycle + 1);
            for (i, p) in population.iter().enumerate() {
                let stream = derive_stream(cfg.master_seed, replication as u64, i as u64, cycle as u64);
                let state = &mut states[i];
                let mean_signal = state.signal_sum / (cycle + 1) as f64;
                let posterior = classify_type(mean_signal, &cfg.ability_shares, &cfg.theta_anchors, mean_channel)?;
                let gamma_hat = cfg.gamma.get(posterior.map_class());

                let rate = optimal_contract(&state.belief, effort_channel, gamma_hat, 0.0, &bounds).contract.alpha;
                let competitive = EstimatedOutputContract {
                    rate,
                    fee: 0.0,
                    estimate_weight: weight,
                    predicted_effort: effort_for_slope(rate * weight, gamma_hat, &bounds),
                }
                .effective();
                let menu = match cfg.structure {
                    Structure::Competitive => None,
                    _ => self.plausible_menu(posterior.probabilities.to_array(), theta_sd, weight)?,
                };
                let offers = apply_structure(cfg.structure, competitive, menu.as_ref());

                let mut record = CycleRecord {
                    replication,
                    structure: cfg.structure,
                    arm,
                    cycle,
                    agent_id: i,
                    ability: p.ability,
                    theta: p.theta,
                    theta_hat: state.belief.mean,
                    belief_variance: state.belief.variance,
                    accepted: false,
                    effort: 0.0,
                    output: 0.0,
                    cost: 0.0,
                    wage: 0.0,
                    agent_utility: 0.0,
                    principal_profit: 0.0,
                    welfare_contribution: 0.0,
                    rent: 0.0,
                    manipulated: false,
                    manipulation_cost: 0.0,
                    fine_paid: 0.0,
                    discount_weight,
                };

                let chosen = choose_offer(&offers, p.gamma, &bounds);
                let accept = chosen.is_some_and(|(_, u)| {
                    if cfg.lifetime_ir {
                        state.lifetime_surplus + discount_weight * (u - p.reservation_utility) >= -1e-12
                    } else {
                        u >= p.reservation_utility.min(state.benchmark) - 1e-12
                    }
                });
                let realized = if let (true, Some((contract, expected))) = (accept, chosen) {
                    let effort = effort_for_slope(contract.alpha, p.gamma, &bounds);
                    let (policy, manip_cost, fine) = match &cfg.manipulation {
                        Some(scheme) => {
                            let policy = best_manipulation([0.0, contract.alpha], scheme);
                            let caught = !policy.is_zero()
                                && stream.uniform(DETECTION) < scheme.detection_probability(&policy);
                            (policy, scheme.manipulation_cost(&policy), if caught { scheme.fine } else { 0.0 })
                        }
                        None => (Default::default(), 0.0, 0.0),
                    };
                    let signal = degrade_signal(effort + policy.delta_e, effort_sd, stream.normal(EFFORT_NOISE));
                    let wage = contract.wage(signal);
                    let output = p.theta * effort;
                    let cost = quadratic_cost(effort, p.gamma);
                    record.accepted = true;
                    record.effort = effort;
                    record.output = output;
                    record.cost = cost;
                    record.wage = wage;
                    record.agent_utility = wage - cost - manip_cost - fine;
                    record.principal_profit = output - wage + fine;
                    record.welfare_contribution = output - cost - manip_cost;
                    record.rent = expected - p.reservation_utility;
                    record.manipulated = !policy.is_zero();
                    record.manipulation_cost = manip_cost;
                    record.fine_paid = fine;
                    record.agent_utility
                } else {
                    p.reservation_utility
                };
                if accept {
                    state.lifetime_surplus += discount_weight * (realized - p.reservation_utility);
                }
                state.benchmark = (1.0 - cfg.learning_weight) * state.benchmark + cfg.learning_weight * realized;
                out.push(record);
            }
            discount_weight *= cfg.discount;
        }
        Ok(())
    }
}

/// All replications of a multi-period market, ordered by (replication, arm,
/// cycle, agent). Replications run in parallel.
pub fn run_cycles(config: &MarketConfig) -> Result<Vec<CycleRecord>> {
    let market = Market::new(config)?;
    let per_rep: Vec<Result<Vec<CycleRecord>>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| market.run_replication(rep))
        .collect();
    let mut out = Vec::new();
    for r in per_rep {
        out.extend(r?);
    }
    check_accounting(&out)?;
    Ok(out)
}

/// The one-shot market: [`run_cycles`] with a single period.
pub fn run_single_period(config: &MarketConfig) -> Result<Vec<CycleRecord>> {
    let mut c = config.clone();
    c.cycles = 1;
    run_cycles(&c)
}

/// Fails if any record breaks `U_A + U_P = W`.
pub fn check_accounting(records: &[CycleRecord]) -> Result<()> {
    for r in records {
        let scale = 1.0 + r.wage.abs() + r.output.abs();
        if r.accounting_gap().abs() > 1e-12 * scale {
            return Err(Error::Invariant(format!(
                "accounting identity broken for replication {} cycle {} agent {}: gap {}",
                r.replication,
                r.cycle,
                r.agent_id,
                r.accounting_gap()
            )));
        }
        if !r.accepted && r.welfare_contribution != 0.0 {
            return Err(Error::Invariant("rejected record carries welfare".into()));
        }
    }
    Ok(())
}

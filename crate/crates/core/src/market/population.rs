use statrs::distribution::{ContinuousCDF, Normal};

use super::config::MarketConfig;
use crate::econ::{Ability, AgentProfile};
use crate::error::Result;
use crate::rng::{derive_stream, Stream};

/// Cycle index reserved for population draws.
pub const POPULATION_CYCLE: u64 = u64::MAX;

fn class_from_uniform(u: f64, config: &MarketConfig) -> Ability {
    let s = config.ability_shares;
    if u < s.high {
        Ability::High
    } else if u < s.high + s.medium {
        Ability::Medium
    } else {
        Ability::Low
    }
}

fn population_stream(config: &MarketConfig, replication: usize, agent: usize) -> Stream {
    derive_stream(config.master_seed, replication as u64, agent as u64, POPULATION_CYCLE)
}

/// Agents of one replication.
///
/// Per agent, word 0 picks the class and word 1 the within-class offset.
/// With a non-zero `correlation_rho`, agents `2i` and `2i + 1` instead pick
/// their classes through a Gaussian copula on words 2-3 so that their types
/// are positively (or negatively) associated.
pub fn draw_population(config: &MarketConfig, replication: usize) -> Result<Vec<AgentProfile>> {
    let rho = config.correlation_rho;
    let std_normal = Normal::standard();
    let mut latent_prev = 0.0;
    let mut out = Vec::with_capacity(config.n_agents);
    for agent in 0..config.n_agents {
        let stream = population_stream(config, replication, agent);
        let u_class = if rho == 0.0 {
            stream.uniform(0)
        } else {
            let z = stream.normal(2);
            let latent = if agent % 2 == 1 {
                rho * latent_prev + (1.0 - rho * rho).sqrt() * z
            } else {
                z
            };
            latent_prev = latent;
            std_normal.cdf(latent)
        };
        let ability = class_from_uniform(u_class, config);
        let offset = config.theta_jitter * (2.0 * stream.uniform(1) - 1.0);
        out.push(AgentProfile::new(
            config.theta_anchors.get(ability) + offset,
            ability,
            config.gamma.get(ability),
            config.reservation_utility.get(ability),
        )?);
    }
    Ok(out)
}

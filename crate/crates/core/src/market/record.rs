use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::config::{Arm, Structure};
use crate::econ::Ability;

/// Outcome of one agent in one period of one arm.
///
/// Rejected offers leave effort, pay, utilities and welfare at zero; belief
/// columns are still filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub replication: usize,
    #[serde(serialize_with = "ser_structure", deserialize_with = "de_structure")]
    pub structure: Structure,
    pub arm: Arm,
    pub cycle: usize,
    pub agent_id: usize,
    pub ability: Ability,
    pub theta: f64,
    pub theta_hat: f64,
    pub belief_variance: f64,
    pub accepted: bool,
    pub effort: f64,
    pub output: f64,
    pub cost: f64,
    pub wage: f64,
    pub agent_utility: f64,
    pub principal_profit: f64,
    pub welfare_contribution: f64,
    pub rent: f64,
    pub manipulated: bool,
    pub manipulation_cost: f64,
    pub fine_paid: f64,
    pub discount_weight: f64,
}

fn ser_structure<S: Serializer>(s: &Structure, ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_str(&s.label())
}

fn de_structure<'de, D: Deserializer<'de>>(de: D) -> Result<Structure, D::Error> {
    let s = String::deserialize(de)?;
    s.parse().map_err(serde::de::Error::custom)
}

impl CycleRecord {
    /// Accounting gap `U_A + U_P - W`; zero up to rounding for every record.
    pub fn accounting_gap(&self) -> f64 {
        self.agent_utility + self.principal_profit - self.welfare_contribution
    }
}

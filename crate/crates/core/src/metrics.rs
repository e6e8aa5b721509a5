//! Aggregation of simulation records and the significance tests applied to
//! them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::econ::{Ability, PerClass};
use crate::error::{Error, Result};
use crate::market::{Arm, CycleRecord, Structure};

/// Total welfare `sum(V - c)` over accepted records.
pub fn welfare(records: &[CycleRecord]) -> f64 {
    records.iter().filter(|r| r.accepted).map(|r| r.welfare_contribution).sum()
}

/// Running count, mean and sum of squared deviations (Welford), mergeable in
/// any order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64,
        }
    }

    /// Sample variance; zero with fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

fn arm_records(records: &[CycleRecord], arm: Arm) -> Result<Vec<&CycleRecord>> {
    let v: Vec<_> = records.iter().filter(|r| r.arm == arm).collect();
    if v.is_empty() {
        return Err(Error::MissingData(format!("no records for arm {arm}")));
    }
    Ok(v)
}

fn selection_shares(records: &[&CycleRecord]) -> PerClass<f64> {
    let accepted: Vec<_> = records.iter().filter(|r| r.accepted).collect();
    let total = accepted.len() as f64;
    let share = |a: Ability| {
        if total == 0.0 {
            0.0
        } else {
            accepted.iter().filter(|r| r.ability == a).count() as f64 / total
        }
    };
    PerClass::new(share(Ability::High), share(Ability::Medium), share(Ability::Low))
}

/// Per class: share of accepted contracts held by the class with AI minus the
/// same share without AI.
pub fn selection_improvement(records: &[CycleRecord]) -> Result<PerClass<f64>> {
    let with = selection_shares(&arm_records(records, Arm::WithAi)?);
    let without = selection_shares(&arm_records(records, Arm::WithoutAi)?);
    Ok(PerClass::new(
        with.high - without.high,
        with.medium - without.medium,
        with.low - without.low,
    ))
}

/// Change in a class's mean effort, absolute and relative to the control arm.
/// `None` when the class has no accepted records in one of the arms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EffortChange {
    pub absolute: Option<f64>,
    pub percent: Option<f64>,
}

fn mean_accepted_effort(records: &[&CycleRecord], ability: Ability) -> Option<f64> {
    let m: Moments = records
        .iter()
        .filter(|r| r.accepted && r.ability == ability)
        .map(|r| r.effort)
        .collect();
    (m.n > 0).then_some(m.mean)
}

/// Per class mean effort of accepted agents, with AI minus without AI.
pub fn effort_improvement(records: &[CycleRecord]) -> Result<PerClass<EffortChange>> {
    let with = arm_records(records, Arm::WithAi)?;
    let without = arm_records(records, Arm::WithoutAi)?;
    let change = |a: Ability| match (mean_accepted_effort(&with, a), mean_accepted_effort(&without, a)) {
        (Some(w), Some(o)) => EffortChange {
            absolute: Some(w - o),
            percent: (o != 0.0).then(|| 100.0 * (w - o) / o),
        },
        _ => EffortChange::default(),
    };
    Ok(PerClass::new(change(Ability::High), change(Ability::Medium), change(Ability::Low)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Welch's unequal-variance t test of `mean(a) - mean(b)`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::domain("welch_t needs at least two observations per sample"));
    }
    let ma: Moments = a.iter().copied().collect();
    let mb: Moments = b.iter().copied().collect();
    welch_from_moments(&ma, &mb)
}

pub fn welch_from_moments(a: &Moments, b: &Moments) -> Result<WelchTest> {
    if a.n < 2 || b.n < 2 {
        return Err(Error::domain("welch_t needs at least two observations per sample"));
    }
    let va = a.variance() / a.n as f64;
    let vb = b.variance() / b.n as f64;
    let diff = a.mean - b.mean;
    let se2 = va + vb;
    if se2 == 0.0 {
        return Ok(if diff == 0.0 {
            WelchTest { t: 0.0, df: f64::NAN, p: 1.0 }
        } else {
            WelchTest {
                t: diff.signum() * f64::INFINITY,
                df: f64::NAN,
                p: 0.0,
            }
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.n - 1) as f64 + vb * vb / (b.n - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::domain(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(WelchTest { t, df, p })
}

/// Mann-Kendall trend test with the normal approximation and tie correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannKendall {
    pub s: i64,
    pub variance: f64,
    pub z: f64,
    pub p_two_sided: f64,
    /// One-sided p-value against a decreasing trend.
    pub p_decreasing: f64,
    pub p_increasing: f64,
}

pub fn mann_kendall(series: &[f64]) -> Result<MannKendall> {
    let n = series.len();
    if n < 3 {
        return Err(Error::domain("Mann-Kendall needs at least three points"));
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            s += match series[j].partial_cmp(&series[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * (t - 1.0) * (2.0 * t + 5.0);
        i = j + 1;
    }
    let nf = n as f64;
    let variance = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - tie_term) / 18.0;
    let z = match s.cmp(&0) {
        std::cmp::Ordering::Greater => (s - 1) as f64 / variance.sqrt(),
        std::cmp::Ordering::Less => (s + 1) as f64 / variance.sqrt(),
        std::cmp::Ordering::Equal => 0.0,
    };
    let z = if z.is_finite() { z } else { 0.0 };
    let std_normal = Normal::standard();
    Ok(MannKendall {
        s,
        variance,
        z,
        p_two_sided: (2.0 * std_normal.sf(z.abs())).min(1.0),
        p_decreasing: std_normal.cdf(z),
        p_increasing: std_normal.sf(z),
    })
}

/// Aggregates of one (structure, arm, ability) group. Outcome statistics are
/// over accepted records; `welfare_per_record` spreads total welfare over all
/// records of the group, rejected ones included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// Sweep value the row belongs to; empty outside sweeps.
    #[serde(default)]
    pub sweep_point: Option<String>,
    pub structure: String,
    pub arm: Arm,
    pub ability: Ability,
    pub records: u64,
    pub accepted: u64,
    pub selection_share: f64,
    pub effort_mean: f64,
    pub effort_std: f64,
    pub principal_profit_mean: f64,
    pub principal_profit_std: f64,
    pub agent_utility_mean: f64,
    pub agent_utility_std: f64,
    pub welfare_mean: f64,
    pub welfare_std: f64,
    pub rent_mean: f64,
    pub rent_std: f64,
    pub welfare_per_record: f64,
}

/// With-AI minus without-AI differences for one (structure, ability) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    #[serde(default)]
    pub sweep_point: Option<String>,
    pub structure: String,
    pub ability: Ability,
    pub selection_change: f64,
    pub effort_change: Option<f64>,
    pub effort_change_pct: Option<f64>,
    pub welfare_change: f64,
    pub profit_change: Option<f64>,
    pub rent_change: Option<f64>,
    pub effort_t: Option<f64>,
    pub effort_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
    pub improvements: Vec<ImprovementRow>,
}

impl SummaryTable {
    /// Tags every row with a sweep value.
    pub fn with_sweep_point(mut self, point: &str) -> Self {
        for r in &mut self.rows {
            r.sweep_point = Some(point.to_string());
        }
        for r in &mut self.improvements {
            r.sweep_point = Some(point.to_string());
        }
        self
    }

    pub fn extend(&mut self, other: SummaryTable) {
        self.rows.extend(other.rows);
        self.improvements.extend(other.improvements);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, structure: Structure, arm: Arm, ability: Ability) -> Option<&SummaryRow> {
        let label = structure.label();
        self.rows
            .iter()
            .find(|r| r.structure == label && r.arm == arm && r.ability == ability)
    }

    pub fn improvement(&self, structure: Structure, ability: Ability) -> Option<&ImprovementRow> {
        let label = structure.label();
        self.improvements
            .iter()
            .find(|r| r.structure == label && r.ability == ability)
    }
}

#[derive(Debug, Clone, Default)]
struct Group {
    records: u64,
    effort: Moments,
    profit: Moments,
    utility: Moments,
    welfare: Moments,
    rent: Moments,
    welfare_total: f64,
    efforts: Vec<f64>,
}

impl Group {
    fn push(&mut self, r: &CycleRecord) {
        self.records += 1;
        self.welfare_total += r.welfare_contribution;
        if r.accepted {
            self.effort.push(r.effort);
            self.profit.push(r.principal_profit);
            self.utility.push(r.agent_utility);
            self.welfare.push(r.welfare_contribution);
            self.rent.push(r.rent);
            self.efforts.push(r.effort);
        }
    }
}

/// Groups records by (structure, arm, ability), in that sort order, and adds
/// an improvement row for every (structure, ability) present in both arms.
pub fn summarize(records: &[CycleRecord]) -> SummaryTable {
    let mut groups: BTreeMap<(Structure, Arm, Ability), Group> = BTreeMap::new();
    for r in records {
        groups.entry((r.structure, r.arm, r.ability)).or_default().push(r);
    }
    let mut accepted_total: BTreeMap<(Structure, Arm), u64> = BTreeMap::new();
    for ((s, a, _), g) in &groups {
        *accepted_total.entry((*s, *a)).or_default() += g.effort.n;
    }

    let rows = groups
        .iter()
        .map(|((s, arm, ability), g)| {
            let total = accepted_total[&(*s, *arm)];
            SummaryRow {
                sweep_point: None,
                structure: s.label(),
                arm: *arm,
                ability: *ability,
                records: g.records,
                accepted: g.effort.n,
                selection_share: if total == 0 { 0.0 } else { g.effort.n as f64 / total as f64 },
                effort_mean: g.effort.mean,
                effort_std: g.effort.std(),
                principal_profit_mean: g.profit.mean,
                principal_profit_std: g.profit.std(),
                agent_utility_mean: g.utility.mean,
                agent_utility_std: g.utility.std(),
                welfare_mean: g.welfare.mean,
                welfare_std: g.welfare.std(),
                rent_mean: g.rent.mean,
                rent_std: g.rent.std(),
                welfare_per_record: g.welfare_total / g.records as f64,
            }
        })
        .collect::<Vec<_>>();

    let mut improvements = Vec::new();
    let structures: Vec<Structure> = {
        let mut v: Vec<_> = groups.keys().map(|k| k.0).collect();
        v.dedup();
        v
    };
    for s in structures {
        for ability in Ability::ALL {
            let (Some(w), Some(o)) = (
                groups.get(&(s, Arm::WithAi, ability)),
                groups.get(&(s, Arm::WithoutAi, ability)),
            ) else {
                continue;
            };
            let share = |arm: Arm, g: &Group| {
                let total = accepted_total[&(s, arm)];
                if total == 0 {
                    0.0
                } else {
                    g.effort.n as f64 / total as f64
                }
            };
            let both = w.effort.n > 0 && o.effort.n > 0;
            let test = welch_t(&w.efforts, &o.efforts).ok();
            improvements.push(ImprovementRow {
                sweep_point: None,
                structure: s.label(),
                ability,
                selection_change: share(Arm::WithAi, w) - share(Arm::WithoutAi, o),
                effort_change: both.then_some(w.effort.mean - o.effort.mean),
                effort_change_pct: (both && o.effort.mean != 0.0)
                    .then(|| 100.0 * (w.effort.mean - o.effort.mean) / o.effort.mean),
                welfare_change: w.welfare_total / w.records as f64 - o.welfare_total / o.records as f64,
                profit_change: both.then_some(w.profit.mean - o.profit.mean),
                rent_change: both.then_some(w.rent.mean - o.rent.mean),
                effort_t: test.map(|t| t.t),
                effort_p: test.map(|t| t.p),
            });
        }
    }
    SummaryTable { rows, improvements }
}

/// Mean of `value` over accepted records of each cycle, one entry per cycle
/// present.
pub fn per_cycle_mean<F: Fn(&CycleRecord) -> f64>(records: &[CycleRecord], value: F) -> Vec<f64> {
    let mut by_cycle: BTreeMap<usize, Moments> = BTreeMap::new();
    for r in records.iter().filter(|r| r.accepted) {
        by_cycle.entry(r.cycle).or_default().push(value(r));
    }
    by_cycle.values().map(|m| m.mean).collect()
}

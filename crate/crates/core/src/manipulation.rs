//! Signal manipulation: the agent can inflate its type and effort signals at a
//! quadratic cost, and is caught with a probability that rises linearly in the
//! total manipulation until it reaches one.
//!
//! ```text
//! k(d)  = kappa_theta / 2 * d_theta^2 + kappa_e / 2 * d_e^2
//! p(d)  = min(1, lambda * (d_theta + d_e))
//! gain  = g_theta * d_theta + g_e * d_e - k(d) - p(d) * F
//! ```
//!
//! `g_theta` and `g_e` are the wage loadings on the two signals. For a
//! [`LinearContract`] only the effort signal is paid on, so `g_theta = 0`.

use serde::{Deserialize, Serialize};

use crate::contract::{best_response_effort, LinearContract};
use crate::econ::{AgentProfile, EffortBounds};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ManipulationPolicy {
    pub delta_theta: f64,
    pub delta_e: f64,
}

impl ManipulationPolicy {
    pub fn is_zero(&self) -> bool {
        self.delta_theta == 0.0 && self.delta_e == 0.0
    }

    pub fn total(&self) -> f64 {
        self.delta_theta + self.delta_e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyScheme {
    pub kappa_theta: f64,
    pub kappa_e: f64,
    /// Detection probability per unit of total manipulation.
    pub detection_slope: f64,
    pub fine: f64,
}

impl PenaltyScheme {
    pub fn new(kappa_theta: f64, kappa_e: f64, detection_slope: f64, fine: f64) -> Result<Self> {
        let s = PenaltyScheme {
            kappa_theta,
            kappa_e,
            detection_slope,
            fine,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_theta > 0.0 && self.kappa_theta.is_finite()) {
            return Err(Error::constraint("kappa_theta", "must be positive and finite"));
        }
        if !(self.kappa_e > 0.0 && self.kappa_e.is_finite()) {
            return Err(Error::constraint("kappa_e", "must be positive and finite"));
        }
        if !(self.detection_slope >= 0.0 && self.detection_slope.is_finite()) {
            return Err(Error::constraint("detection_slope", "must be non-negative and finite"));
        }
        if !(self.fine >= 0.0 && self.fine.is_finite()) {
            return Err(Error::constraint("fine", "must be non-negative and finite"));
        }
        Ok(())
    }

    pub fn with_fine(&self, fine: f64) -> Self {
        PenaltyScheme { fine, ..*self }
    }

    /// Scheme whose detection slope scales with signal precision: a channel
    /// with noise sd `sigma` detects `sigma_ref / sigma` times as well as one
    /// with sd `sigma_ref`.
    pub fn at_precision(&self, sigma: f64, sigma_ref: f64) -> Self {
        PenaltyScheme {
            detection_slope: self.detection_slope * sigma_ref / sigma,
            ..*self
        }
    }

    pub fn manipulation_cost(&self, policy: &ManipulationPolicy) -> f64 {
        0.5 * self.kappa_theta * policy.delta_theta * policy.delta_theta
            + 0.5 * self.kappa_e * policy.delta_e * policy.delta_e
    }

    pub fn detection_probability(&self, policy: &ManipulationPolicy) -> f64 {
        (self.detection_slope * policy.total()).min(1.0)
    }

    /// Net expected gain of `policy` given wage loadings `[g_theta, g_e]`.
    pub fn net_gain(&self, gains: [f64; 2], policy: &ManipulationPolicy) -> f64 {
        gains[0] * policy.delta_theta + gains[1] * policy.delta_e
            - self.manipulation_cost(policy)
            - self.detection_probability(policy) * self.fine
    }

    fn kappas(&self) -> [f64; 2] {
        [self.kappa_theta, self.kappa_e]
    }
}

fn policy(d: [f64; 2]) -> ManipulationPolicy {
    ManipulationPolicy {
        delta_theta: d[0],
        delta_e: d[1],
    }
}

/// Maximizer of `g . d - k(d)` on the segment `lambda * (d_theta + d_e) = 1`,
/// `d >= 0`.
fn best_on_kink(gains: [f64; 2], kappa: [f64; 2], lambda: f64) -> [f64; 2] {
    let total = 1.0 / lambda;
    let value = |d: [f64; 2]| gains[0] * d[0] + gains[1] * d[1] - 0.5 * kappa[0] * d[0] * d[0] - 0.5 * kappa[1] * d[1] * d[1];
    let mut candidates = vec![[total, 0.0], [0.0, total]];
    let inv = 1.0 / kappa[0] + 1.0 / kappa[1];
    let mu = (gains[0] / kappa[0] + gains[1] / kappa[1] - total) / inv;
    let interior = [(gains[0] - mu) / kappa[0], (gains[1] - mu) / kappa[1]];
    if interior[0] >= 0.0 && interior[1] >= 0.0 {
        candidates.push(interior);
    }
    candidates
        .into_iter()
        .fold(None::<([f64; 2], f64)>, |best, d| {
            let v = value(d);
            match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((d, v)),
            }
        })
        .map(|(d, _)| d)
        .unwrap_or([0.0, 0.0])
}

/// Gain-maximizing manipulation for wage loadings `[g_theta, g_e]`.
///
/// The objective is concave on each side of the `p = 1` kink, so the optimum
/// is one of: the interior point below the kink, the interior point above it,
/// the best point on the kink, or no manipulation. Ties go to no
/// manipulation.
pub fn best_manipulation(gains: [f64; 2], scheme: &PenaltyScheme) -> ManipulationPolicy {
    let kappa = scheme.kappas();
    let lambda = scheme.detection_slope;
    let g = [gains[0].max(0.0), gains[1].max(0.0)];

    let mut candidates: Vec<[f64; 2]> = Vec::with_capacity(3);
    if lambda == 0.0 {
        candidates.push([g[0] / kappa[0], g[1] / kappa[1]]);
    } else {
        let fine_rate = lambda * scheme.fine;
        // at F = F* the excess is rounding noise; treat it as zero
        let excess = |gi: f64| {
            let x = gi - fine_rate;
            if x <= 4.0 * f64::EPSILON * gi {
                0.0
            } else {
                x
            }
        };
        let below = [excess(g[0]) / kappa[0], excess(g[1]) / kappa[1]];
        if lambda * (below[0] + below[1]) <= 1.0 {
            candidates.push(below);
        }
        let above = [g[0] / kappa[0], g[1] / kappa[1]];
        if lambda * (above[0] + above[1]) >= 1.0 {
            candidates.push(above);
        }
        candidates.push(best_on_kink(g, kappa, lambda));
    }

    let mut best = (ManipulationPolicy::default(), 0.0);
    for d in candidates {
        let p = policy(d);
        let v = scheme.net_gain(g, &p);
        if v > best.1 {
            best = (p, v);
        }
    }
    best.0
}

/// Agent's joint choice of manipulation and effort under a linear contract.
/// Manipulation is additively separable from effort, so the effort choice is
/// the ordinary best response.
pub fn manip_best_response(
    contract: &LinearContract,
    profile: &AgentProfile,
    scheme: &PenaltyScheme,
    bounds: &EffortBounds,
) -> (ManipulationPolicy, f64) {
    (
        best_manipulation([0.0, contract.alpha], scheme),
        best_response_effort(contract, profile, bounds),
    )
}

/// Smallest fine at which no manipulation is a best response, for wage
/// loadings `[g_theta, g_e]`.
///
/// Below the kink the marginal fine `lambda * F` must cover each loading; at
/// and beyond the kink the fine must exceed the best gross gain available
/// there. With `lambda = 0` fines never bite and the result is infinite.
pub fn deterrence_threshold_for(gains: [f64; 2], scheme: &PenaltyScheme) -> f64 {
    let lambda = scheme.detection_slope;
    if lambda == 0.0 {
        return f64::INFINITY;
    }
    let g = [gains[0].max(0.0), gains[1].max(0.0)];
    let kappa = scheme.kappas();
    let gross = |d: [f64; 2]| g[0] * d[0] + g[1] * d[1] - 0.5 * kappa[0] * d[0] * d[0] - 0.5 * kappa[1] * d[1] * d[1];

    let marginal = g[0].max(g[1]) / lambda;
    let mut capped = gross(best_on_kink(g, kappa, lambda));
    let above = [g[0] / kappa[0], g[1] / kappa[1]];
    if lambda * (above[0] + above[1]) >= 1.0 {
        capped = capped.max(gross(above));
    }
    marginal.max(capped).max(0.0)
}

/// Deterrence threshold for a linear contract (wage loads on the effort
/// signal only). The fine in `scheme` is ignored.
pub fn deterrence_threshold(contract: &LinearContract, scheme: &PenaltyScheme) -> f64 {
    deterrence_threshold_for([0.0, contract.alpha], scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econ::Ability;
    use crate::optimize::bisect;
    use proptest::prelude::*;

    fn scheme(kt: f64, ke: f64, lambda: f64, fine: f64) -> PenaltyScheme {
        PenaltyScheme::new(kt, ke, lambda, fine).unwrap()
    }

    /// Exhaustive search over a square grid of manipulation pairs.
    fn grid_best(gains: [f64; 2], s: &PenaltyScheme, hi: f64, step: f64) -> ManipulationPolicy {
        let n = (hi / step).round() as usize;
        let mut best = (ManipulationPolicy::default(), 0.0);
        for i in 0..=n {
            for j in 0..=n {
                let p = policy([i as f64 * step, j as f64 * step]);
                let v = s.net_gain(gains, &p);
                if v > best.1 {
                    best = (p, v);
                }
            }
        }
        best.0
    }

    #[test]
    fn examples() {
        let s = scheme(1.0, 1.0, 1.0, 0.2);
        let p = best_manipulation([0.0, 0.5], &s);
        assert!((p.delta_e - 0.3).abs() < 1e-15);
        assert_eq!(p.delta_theta, 0.0);
        let g = grid_best([0.0, 0.5], &s, 1.0, 1e-3);
        assert!((g.delta_e - 0.3).abs() < 1e-3 && g.delta_theta == 0.0);

        assert!(best_manipulation([0.0, 0.5], &s.with_fine(0.5)).is_zero());
        assert!(best_manipulation([0.0, 0.0], &s).is_zero());

        let profile = AgentProfile::new(1.0, Ability::High, 1.0, 0.0).unwrap();
        let (pol, e) = manip_best_response(&LinearContract::new(0.5, 0.0).unwrap(), &profile, &s, &EffortBounds::default());
        assert!((pol.delta_e - 0.3).abs() < 1e-15);
        assert_eq!(e, 0.5);
    }

    #[test]
    fn threshold_examples() {
        let s = scheme(1.0, 1.0, 1.0, 0.0);
        let c = LinearContract::new(0.5, 0.0).unwrap();
        assert!((deterrence_threshold(&c, &s) - 0.5).abs() < 1e-15);
        assert_eq!(deterrence_threshold(&LinearContract::flat(0.0), &s), 0.0);
        let doubled = scheme(1.0, 1.0, 2.0, 0.0);
        assert!((deterrence_threshold(&c, &doubled) - 0.25).abs() < 1e-15);
        assert_eq!(deterrence_threshold(&c, &scheme(1.0, 1.0, 0.0, 0.0)), f64::INFINITY);

        // bisection on the best-response oracle lands on the same fine
        let f_star = bisect(
            |f| if best_manipulation([0.0, 0.5], &s.with_fine(f)).is_zero() { 1.0 } else { -1.0 },
            0.0,
            5.0,
            1e-12,
        );
        assert!((f_star - 0.5).abs() < 1e-9);
    }

    #[test]
    fn threshold_beyond_the_kink() {
        // strong incentive, cheap manipulation, weak detection: the capped
        // region sets the threshold
        let s = scheme(1.0, 0.2, 1.0, 0.0);
        let gains = [0.0, 1.0];
        let f_star = deterrence_threshold_for(gains, &s);
        assert!((f_star - 2.5).abs() < 1e-12);
        assert!(best_manipulation(gains, &s.with_fine(f_star)).is_zero());
        assert!(!best_manipulation(gains, &s.with_fine(f_star - 1e-6)).is_zero());
    }

    #[test]
    fn scheme_validation() {
        assert!(PenaltyScheme::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(PenaltyScheme::new(1.0, 1.0, -1.0, 0.0).is_err());
        assert!(PenaltyScheme::new(1.0, 1.0, 1.0, f64::NAN).is_err());
        let s = scheme(2.0, 3.0, 1.0, 1.0);
        assert_eq!(s.manipulation_cost(&ManipulationPolicy::default()), 0.0);
        assert_eq!(s.detection_probability(&ManipulationPolicy::default()), 0.0);
        assert_eq!(s.detection_probability(&policy([2.0, 2.0])), 1.0);
    }

    #[test]
    fn weak_fines_can_flip_detection_monotonicity() {
        // the capped region becomes reachable as detection rises
        let (ge, ke, f) = (1.1177866863781627, 1.7955457334715852, 0.1449004836192941);
        let lo = best_manipulation([0.0, ge], &scheme(1.0, ke, 1.5133095791173214, f));
        let hi = best_manipulation([0.0, ge], &scheme(1.0, ke, 1.835, f));
        assert!(hi.delta_e > lo.delta_e);
    }

    #[test]
    fn precision_scaling() {
        let s = scheme(1.0, 1.0, 1.0, 0.5).at_precision(0.05, 0.1);
        assert_eq!(s.detection_slope, 2.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn closed_form_matches_grid(
            gt in 0.0f64..1.2, ge in 0.0f64..1.2,
            kt in 0.5f64..3.0, ke in 0.5f64..3.0,
            lambda in 0.2f64..3.0, fine in 0.0f64..1.0,
        ) {
            let s = scheme(kt, ke, lambda, fine);
            let gains = [gt, ge];
            let closed = best_manipulation(gains, &s);
            let grid = grid_best(gains, &s, 2.5, 5e-3);
            // the grid can only do worse, and by no more than its resolution allows
            let vc = s.net_gain(gains, &closed);
            let vg = s.net_gain(gains, &grid);
            prop_assert!(vc >= vg - 1e-12);
            prop_assert!(vc - vg < 2e-2 * 5e-3 * (1.0 + gt + ge + kt + ke + lambda * fine));
        }

        #[test]
        fn monotone_in_fine(ge in 0.0f64..1.5, ke in 0.3f64..3.0, lambda in 0.1f64..3.0, f1 in 0.0f64..1.0, df in 0.0f64..1.0) {
            let s = scheme(1.0, ke, lambda, f1);
            let base = best_manipulation([0.0, ge], &s);
            let more_fine = best_manipulation([0.0, ge], &s.with_fine(f1 + df));
            prop_assert!(more_fine.delta_e <= base.delta_e + 1e-12);
        }

        // Once the fine exceeds what can be earned at certain detection,
        // stronger detection only shrinks manipulation.
        #[test]
        fn monotone_in_detection(ge in 0.0f64..1.5, ke in 0.3f64..3.0, lambda in 0.1f64..3.0, extra in 0.0f64..1.0, dl in 0.0f64..1.0) {
            let fine = ge * ge / (2.0 * ke) + extra;
            let base = best_manipulation([0.0, ge], &scheme(1.0, ke, lambda, fine));
            let more_detect = best_manipulation([0.0, ge], &scheme(1.0, ke, lambda + dl, fine));
            prop_assert!(more_detect.delta_e <= base.delta_e + 1e-12);
        }

        #[test]
        fn fines_at_threshold_deter(gt in 0.0f64..1.5, ge in 0.0f64..1.5, kt in 0.2f64..3.0, ke in 0.2f64..3.0, lambda in 0.05f64..3.0, extra in 0.0f64..1.0) {
            let s = scheme(kt, ke, lambda, 0.0);
            let f_star = deterrence_threshold_for([gt, ge], &s);
            prop_assert!(best_manipulation([gt, ge], &s.with_fine(f_star + extra)).is_zero());
        }
    }
}

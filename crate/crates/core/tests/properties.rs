use contract_sim::manipulation::{ManipulationPolicy, PenaltyScheme};
use contract_sim::market::{run_single_period, Arm, CycleRecord, MarketConfig, Structure};
use contract_sim::metrics::{welch_t, Moments};
use contract_sim::rng::derive_stream;
use statrs::function::gamma::ln_gamma;

const SIGMAS: [f64; 10] = [0.2, 0.15, 0.12, 0.1, 0.08, 0.06, 0.04, 0.03, 0.02, 0.01];

fn replication_means(records: &[CycleRecord], value: impl Fn(&CycleRecord) -> Option<f64>, reps: usize) -> Moments {
    let mut per_rep = vec![Moments::default(); reps];
    for r in records.iter().filter(|r| r.arm == Arm::WithAi) {
        if let Some(v) = value(r) {
            per_rep[r.replication].push(v);
        }
    }
    per_rep.iter().filter(|m| m.n > 0).map(|m| m.mean).collect()
}

/// Asserts a series never moves against `direction` by more than its 95% band.
fn monotone_within_ci(series: &[Moments], direction: f64, what: &str) {
    for (i, w) in series.windows(2).enumerate() {
        let band = 1.96 * (w[0].std_error().powi(2) + w[1].std_error().powi(2)).sqrt();
        assert!(
            direction * (w[1].mean - w[0].mean) >= -band,
            "{what}: step {i} goes {} -> {}",
            w[0].mean,
            w[1].mean
        );
    }
}

fn sweep(structure: Structure, set: fn(&mut MarketConfig, f64)) -> (Vec<Moments>, Vec<Moments>) {
    let mut rent = Vec::new();
    let mut welfare = Vec::new();
    for &s in &SIGMAS {
        let mut config = MarketConfig {
            structure,
            control_accuracy: 1.0,
            ..MarketConfig::default()
        };
        set(&mut config, s);
        let records = run_single_period(&config).unwrap();
        rent.push(replication_means(&records, |r| r.accepted.then_some(r.rent), config.replications));
        welfare.push(replication_means(&records, |r| Some(r.welfare_contribution), config.replications));
    }
    (rent, welfare)
}

#[test]
fn screening_rent_and_welfare_follow_type_signal_precision() {
    let (rent, welfare) = sweep(Structure::Monopoly, |c, s| c.sigma_theta = s);
    monotone_within_ci(&rent, -1.0, "rent");
    monotone_within_ci(&welfare, 1.0, "welfare");
    assert!(rent[0].mean > rent[9].mean);
}

#[test]
fn screening_rent_and_welfare_follow_effort_signal_precision() {
    let (rent, welfare) = sweep(Structure::Monopoly, |c, s| c.sigma_e = s);
    monotone_within_ci(&rent, -1.0, "rent");
    monotone_within_ci(&welfare, 1.0, "welfare");
    assert!(welfare[9].mean > welfare[0].mean);
}

#[test]
fn competitive_welfare_rises_with_either_signal() {
    let (_, by_theta) = sweep(Structure::Competitive, |c, s| c.sigma_theta = s);
    let (_, by_effort) = sweep(Structure::Competitive, |c, s| c.sigma_e = s);
    monotone_within_ci(&by_theta, 1.0, "welfare vs sigma_theta");
    monotone_within_ci(&by_effort, 1.0, "welfare vs sigma_e");
}

#[test]
fn manipulation_pays_less_as_signals_sharpen() {
    // re-optimized slope on the estimated effort, detection scaled by precision
    let base = PenaltyScheme::new(1.0, 1.0, 1.0, 3.0).unwrap();
    let tau2 = 0.1;
    let step = ManipulationPolicy {
        delta_theta: 0.0,
        delta_e: 0.1,
    };
    let gains: Vec<f64> = SIGMAS
        .iter()
        .map(|&s| {
            let alpha = tau2 / (tau2 + s * s);
            base.at_precision(s, 0.03).net_gain([0.0, alpha], &step)
        })
        .collect();
    assert!(gains.windows(2).all(|w| w[1] < w[0]), "{gains:?}");
}

fn student_t_two_sided(t: f64, df: f64) -> f64 {
    let log_c = ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * std::f64::consts::PI).ln();
    let density = |x: f64| (log_c - 0.5 * (df + 1.0) * (1.0 + x * x / df).ln()).exp();
    let n = 200_000;
    let h = t.abs() / n as f64;
    let mut area = density(0.0) + density(t.abs());
    for i in 1..n {
        area += density(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * area * h / 3.0
}

#[test]
fn welch_matches_brute_force() {
    for k in 0..100u64 {
        let s = derive_stream(123, k, 0, 0);
        let mut c = s.cursor();
        let n1 = 3 + (c.next_uniform() * 40.0) as usize;
        let n2 = 3 + (c.next_uniform() * 40.0) as usize;
        let shift = c.next_uniform() - 0.5;
        let scale = 0.2 + 2.0 * c.next_uniform();
        let a: Vec<f64> = (0..n1).map(|_| c.next_normal()).collect();
        let b: Vec<f64> = (0..n2).map(|_| shift + scale * c.next_normal()).collect();

        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (m, v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64)
        };
        let ((ma, va), (mb, vb)) = (stats(&a), stats(&b));
        let (qa, qb) = (va / n1 as f64, vb / n2 as f64);
        let t = (ma - mb) / (qa + qb).sqrt();
        let df = (qa + qb).powi(2) / (qa * qa / (n1 - 1) as f64 + qb * qb / (n2 - 1) as f64);
        let p = student_t_two_sided(t, df);

        let w = welch_t(&a, &b).unwrap();
        assert!((w.t - t).abs() < 1e-9, "case {k}: t {} vs {t}", w.t);
        assert!((w.df - df).abs() < 1e-9 * df, "case {k}: df {} vs {df}", w.df);
        assert!((w.p - p).abs() < 1e-6, "case {k}: p {} vs {p}", w.p);
    }
}

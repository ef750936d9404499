mod common;

use std::sync::Arc;

use consensus_core::model::SineField;
use consensus_core::sim::{decay_window, log_linear_slope, time_average, ObserverInit};
use consensus_core::{
    certify, run, theorem_bounds, BoundInputs, ChuaField, Error, GainSet, ScenarioConfig, Topology,
};
use nalgebra::DVector;

fn short(mut cfg: ScenarioConfig, horizon: f64) -> ScenarioConfig {
    cfg.horizon = horizon;
    cfg
}

#[test]
fn consensus_state_is_invariant() {
    let mut cfg = short(ScenarioConfig::chua_clean(), 5.0);
    let x0 = DVector::from_vec(vec![0.3, -0.2, 0.1, 0.5, 0.0, -0.4]);
    cfg.initial.leader = Some(x0.clone());
    cfg.initial.followers = Some(vec![x0; 10]);
    cfg.initial.observers = ObserverInit::Exact;
    let tr = run(&cfg).unwrap();
    let worst = tr
        .metrics
        .tracking_error
        .iter()
        .flatten()
        .fold(0.0_f64, |a, &v| a.max(v));
    assert!(worst < 1e-9, "{worst}");
    assert!(tr.inputs.iter().flatten().all(|u| u.abs() < 1e-9));
}

#[test]
fn leader_estimates_stay_exact_without_noise() {
    let mut cfg = short(ScenarioConfig::chua_clean(), 10.0);
    cfg.initial.observers = ObserverInit::Exact;
    let tr = run(&cfg).unwrap();
    for &(i, j) in tr.pairs.iter().filter(|p| p.1 == 0) {
        let e = tr.metrics.estimation_error(i, j).unwrap();
        let worst = e
            .position
            .iter()
            .chain(&e.velocity)
            .fold(0.0_f64, |a, &v| a.max(v));
        assert!(worst <= 1e-6, "observer ({i},{j}): {worst}");
    }
}

#[test]
fn single_edge_observer_converges() {
    let mut cfg = ScenarioConfig::chua_clean();
    cfg.topology = Topology::from_edges(1, &[], &[1]).unwrap();
    cfg.horizon = 10.0;
    let tr = run(&cfg).unwrap();
    let e = tr.metrics.estimation_error(1, 0).unwrap();
    let norm = |k: usize| e.position[k].hypot(e.velocity[k]);
    let (first, last) = (norm(0), norm(e.position.len() - 1));
    assert!(last < 1e-3 * first, "{last} vs {first}");
}

#[test]
fn halving_the_step_barely_moves_the_final_state() {
    let cfg = short(ScenarioConfig::chua_clean(), 10.0);
    let mut fine = cfg.clone();
    fine.dt = cfg.dt / 2.0;
    let (a, b) = (run(&cfg).unwrap(), run(&fine).unwrap());
    let (xa, xb) = (a.states.last().unwrap(), b.states.last().unwrap());
    let diff: f64 = xa
        .iter()
        .zip(xb)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = xa.iter().map(|p| p * p).sum::<f64>().sqrt();
    assert!(diff / norm < 1e-6, "relative change {}", diff / norm);
    assert_eq!(a.events.len(), b.events.len());
}

#[test]
fn events_follow_the_schedule_bounds() {
    let cfg = short(ScenarioConfig::chua_clean(), 5.0);
    let tr = run(&cfg).unwrap();
    for &(i, j) in &tr.pairs {
        let t = tr.sample_times(i, j);
        assert!(!t.is_empty() && t[0] > 0.0 && t[0] < cfg.tuning.tau_max);
        for w in t.windows(2) {
            let gap = w[1] - w[0];
            assert!(
                gap > cfg.tuning.tau_m && gap < cfg.tuning.tau_max,
                "({i},{j}) gap {gap}"
            );
        }
    }
    let noiseless = tr.events.iter().all(|e| e.clean == e.received);
    assert!(noiseless);
}

#[test]
fn noise_is_drawn_per_transmission() {
    let cfg = short(ScenarioConfig::chua_noisy(), 2.0);
    let tr = run(&cfg).unwrap();
    let w: Vec<f64> = tr
        .events
        .iter()
        .flat_map(|e| e.clean.iter().zip(&e.received).map(|(c, r)| r - c))
        .collect();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
    assert!(mean.abs() < 0.02, "{mean}");
    assert!((var - 0.1).abs() < 0.01, "{var}");
}

#[test]
fn blowup_guard_stops_the_run() {
    let mut cfg = short(ScenarioConfig::chua_clean(), 5.0);
    cfg.blowup_guard = 0.5;
    assert!(matches!(run(&cfg), Err(Error::NumericalBlowup { .. })));
}

#[test]
fn missing_self_observation_is_a_config_error() {
    let mut cfg = ScenarioConfig::chua_clean();
    cfg.topology = cfg
        .topology
        .clone()
        .with_self_observe(vec![false; 10])
        .unwrap();
    assert!(matches!(run(&cfg), Err(Error::ConfigInvalid(_))));
}

#[test]
fn sampling_faster_does_not_hurt_the_clean_steady_error() {
    let steady = |tau: f64| -> f64 {
        let runs: Vec<f64> = std::thread::scope(|s| {
            let handles: Vec<_> = (1..=5u64)
                .map(|seed| {
                    s.spawn(move || {
                        let mut cfg = ScenarioConfig::chua_clean();
                        cfg.tuning.tau_max = tau;
                        cfg.tuning.tau_m = tau / 2.0;
                        cfg.seed = seed;
                        let tr = run(&cfg).unwrap();
                        time_average(&tr.times, &tr.metrics.mean_position_error, 20.0)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        runs.iter().sum::<f64>() / runs.len() as f64
    };
    let (slow, fast) = (steady(0.04), steady(0.01));
    assert!(
        fast <= slow,
        "τ_M = 0.01 gives {fast}, τ_M = 0.04 gives {slow}"
    );
}

#[test]
fn certified_configuration_stays_under_the_envelope() {
    let cfg = ScenarioConfig::certified_small().unwrap();
    let cert = certify(&cfg.topology).unwrap();
    let gains = GainSet::synthesize(cfg.bs).unwrap();
    let init = cfg.initial_states().errors(&cfg.topology);
    let inputs = BoundInputs::new(cert, gains, cfg.l_phi, cfg.tuning, &cfg.disturbances, init);
    let report = theorem_bounds(&inputs).unwrap();
    assert!(report.satisfied.all(), "{:?}", report.satisfied);
    let tr = run(&cfg).unwrap();
    for (t, e) in tr.times.iter().zip(&tr.metrics.tracking_error[0]) {
        assert!(*e <= report.envelope.eval(*t), "t={t}: {e}");
    }
    let e = &tr.metrics.mean_position_error;
    let (t0, t1) = decay_window(&tr.times, e, 1e-3);
    assert!(log_linear_slope(&tr.times, e, t0, t1).unwrap() < 0.0);
}

#[test]
fn custom_fields_plug_in() {
    let mut cfg = ScenarioConfig::certified_small().unwrap();
    cfg.field = Arc::new(SineField { n: 1, gain: -0.05 });
    cfg.horizon = 0.5;
    assert!(run(&cfg).is_ok());
    let mut chua = ScenarioConfig::certified_small().unwrap();
    chua.field = Arc::new(ChuaField::default());
    assert!(matches!(run(&chua), Err(Error::ConfigInvalid(_))));
}

mod common;

use common::{delay_oracle, random_lemma2, rng};
use consensus_core::{lemma2_bound, Error, Lemma2Params};

#[test]
fn scalar_case_without_delay_term() {
    let p = Lemma2Params {
        gamma: vec![1.0],
        a: vec![1.0],
        b: vec![0.0],
        delta: 0.1,
        k: 0.0,
        v0: vec![1.0],
    };
    for t in [0.0, 1.0, 3.5] {
        assert!((lemma2_bound(&p, t).unwrap() - (-t / 2.0_f64).exp()).abs() < 1e-15);
    }
    // exact solution e^{-t} sits below e^{-t/2}
    for (t, e) in delay_oracle(&p, 20.0) {
        assert!(e <= lemma2_bound(&p, t).unwrap() + 1e-9);
    }
}

#[test]
fn offset_limit() {
    let p = Lemma2Params {
        gamma: vec![2.0, 1.0],
        a: vec![1.0, 4.0],
        b: vec![0.0, 0.5],
        delta: 0.05,
        k: 0.3,
        v0: vec![0.0, 0.0],
    };
    let limit = 2.0 * 0.3 * 2.0;
    assert!((lemma2_bound(&p, 1e6).unwrap() - limit).abs() < 1e-12);
}

#[test]
fn two_dimensional_random_cases_are_dominated() {
    let mut r = rng(11);
    for _ in 0..20 {
        let p = random_lemma2(&mut r, 2);
        let horizon = 50.0 / p.rate();
        for (t, e) in delay_oracle(&p, horizon) {
            let bound = lemma2_bound(&p, t).unwrap();
            assert!(e <= bound + 1e-9, "t={t}: {e} > {bound} for {p:?}");
        }
    }
}

#[test]
fn oversized_delay_is_rejected() {
    let mut p = random_lemma2(&mut rng(3), 3);
    p.delta = 1.01 * p.delta_limit();
    assert!(matches!(
        lemma2_bound(&p, 0.0),
        Err(Error::DeltaTooLarge { .. })
    ));
}

use pdob_core::pdob::{
    compute_delay_n, fundamental_suppression_gain, sensitivity_gain, Pdob, PdobConfig,
};
use pdob_core::signal::{BandPassResonator, FirstOrderLowPass};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 100,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// Peak of `|x|` over the last `samples` entries.
fn tail_peak(trace: &[f64], samples: usize) -> f64 {
    trace[trace.len() - samples..].iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn bandpass_selectivity_loosens_with_width() {
    let t = 1e-4;
    for off in [50.0, 150.0, 300.0] {
        let gains: Vec<f64> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&w| BandPassResonator::new(100.0, w, t).unwrap().response(off).norm())
            .collect();
        assert!(gains.windows(2).all(|g| g[0] < g[1]), "{off}: {gains:?}");
    }
}

#[test]
fn bandpass_time_response_matches_gain() {
    let t = 1e-4;
    let mut bp = BandPassResonator::new(100.0, 10.0, t).unwrap();
    let expected = bp.response(150.0).norm();
    let out: Vec<f64> = (0..100_000).map(|k| bp.step((150.0 * t * k as f64).sin())).collect();
    let measured = tail_peak(&out, 1000);
    assert!((measured - expected).abs() < 0.02 * expected, "{measured} vs {expected}");
}

#[test]
fn corrected_delay_places_the_stop_band() {
    let (omega0, t) = (100.0, 1e-5);
    for mu in [0.05, 0.1, 0.2] {
        let g = omega0 / mu;
        let cfg = PdobConfig::new(omega0, 0.5, g, t).unwrap();
        let uncorrected = cfg.with_delay(cfg.design().unwrap().uncorrected).unwrap();
        let corrected = sensitivity_gain(&cfg, omega0);
        let predicted = fundamental_suppression_gain(omega0, g).unwrap();
        assert!(corrected <= 1.5 * predicted, "mu={mu}: {corrected} vs {predicted}");
        assert!(corrected < sensitivity_gain(&uncorrected, omega0), "mu={mu}");
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn simulated_residual_matches_sensitivity(omega in 20.0f64..2000.0) {
        let t = 1e-4;
        let cfg = PdobConfig::new(100.0, 0.5, 1000.0, t).unwrap();
        let mut pdob = Pdob::new(cfg).unwrap();
        let period = (2.0 * std::f64::consts::PI / (omega * t)).ceil() as usize;
        let steps = 4 * cfg.delay + 2 * period;
        let mut previous = 0.0;
        let mut residual = Vec::with_capacity(steps);
        for k in 0..steps {
            let eps = (omega * t * k as f64).sin();
            residual.push(eps - previous);
            previous = pdob.step_raw(eps).unwrap();
        }
        let measured = tail_peak(&residual, 2 * period);
        let expected = sensitivity_gain(&cfg, omega);
        prop_assert!((measured - expected).abs() <= 0.05 * expected + 1e-6,
            "omega {}: {} vs {}", omega, measured, expected);
    }

    #[test]
    fn periodic_input_is_annihilated(
        pattern in prop::collection::vec(-10.0f64..10.0, 2..200),
        cycles in 2usize..5,
    ) {
        let n = pattern.len();
        let cfg = PdobConfig::new(10.0, 1.0, 1000.0, 1e-4)
            .unwrap()
            .with_delay(n)
            .unwrap()
            .with_unity_lowpass();
        let mut pdob = Pdob::new(cfg).unwrap();
        for k in 0..cycles * n {
            let eps = pattern[k % n];
            let estimate = pdob.step_raw(eps).unwrap();
            if k >= n {
                prop_assert!((estimate - eps).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lowpass_never_exceeds_running_peak(
        input in prop::collection::vec(-1e3f64..1e3, 1..500),
        cutoff in 1.0f64..1e4,
    ) {
        let mut lp = FirstOrderLowPass::new(cutoff, 1e-4).unwrap();
        let mut peak = 0.0f64;
        for x in input {
            peak = peak.max(x.abs());
            let y = lp.step(x).unwrap();
            prop_assert!(y.abs() <= peak * (1.0 + 1e-12));
        }
    }

    #[test]
    fn corrected_delay_is_shorter(omega0 in 1.0f64..500.0, ratio in 5.0f64..100.0) {
        let g = omega0 * ratio;
        let design = compute_delay_n(omega0, g, 0.5, 1e-5).unwrap();
        prop_assert!(design.corrected < design.uncorrected);
        prop_assert!(design.corrected_raw > 0.0);
    }
}

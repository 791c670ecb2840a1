//! Property tests for the algebraic and statistical invariants.

use std::f64::consts::PI;

use apsi::channel::{apply_channel, random_scenario, superpose, ChannelResponse, ScenarioSpec};
use apsi::freqset::{decorrelate, difference, intersect, set_equal, union, FrequencySet};
use apsi::identify::{estimate_frf, fit_ode, FrequencyResponse};
use apsi::signal::{autocorrelation, average_power, synthesize, ApSignal};
use apsi::spectral::{extract_frequency_set, AnalysisConfig};
use apsi::ComplexValue;
use proptest::prelude::*;

/// Lines on `[lo, ∞)` with adjacent gaps in `[gap, 2·gap]`.
fn spaced_signal(lo: f64, gap: f64, max_lines: usize) -> impl Strategy<Value = ApSignal> {
    prop::collection::vec((gap..2.0 * gap, 0.2f64..2.0, -PI..PI), 1..=max_lines).prop_map(move |raw| {
        let mut w = lo;
        let triples: Vec<_> = raw
            .into_iter()
            .map(|(step, a, p)| {
                let line = (w, a, p);
                w += step;
                line
            })
            .collect();
        ApSignal::from_triples(&triples).unwrap()
    })
}

fn freq_set(delta: f64) -> impl Strategy<Value = FrequencySet> {
    prop::collection::vec(0.0f64..10.0, 0..12).prop_map(move |f| FrequencySet::new(f, delta).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, .. ProptestConfig::default() })]

    #[test]
    fn parseval_holds_on_long_records(s in spaced_signal(1.0, 1.0, 4)) {
        let r = synthesize(&s, 200.0, 0.01).unwrap();
        let p = average_power(&r).unwrap();
        let exact = s.average_power();
        prop_assert!((p - exact).abs() < 0.02 * exact, "{p} vs {exact}");
    }

    #[test]
    fn autocorrelation_at_zero_lag_is_power(s in spaced_signal(0.5, 0.5, 3)) {
        let r = synthesize(&s, 50.0, 0.01).unwrap();
        let r0 = autocorrelation(&r, &[0.0]).unwrap()[0];
        prop_assert!((r0 - average_power(&r).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn synthesis_is_linear(a in spaced_signal(1.0, 0.7, 3), b in spaced_signal(1.35, 0.7, 3), g in -3.0f64..3.0) {
        let sum = superpose(&[&a, &apply_channel(&b, &ChannelResponse::gain(ComplexValue::new(g, 0.0)))]);
        let ra = synthesize(&a, 20.0, 0.01).unwrap();
        let rb = synthesize(&b, 20.0, 0.01).unwrap();
        let rs = synthesize(&sum, 20.0, 0.01).unwrap();
        for ((x, y), z) in ra.samples().iter().zip(rb.samples()).zip(rs.samples()) {
            prop_assert!((x + g * y - z).abs() < 1e-9);
        }
    }

    #[test]
    fn set_operations_commute(a in freq_set(0.05), b in freq_set(0.05)) {
        prop_assert!(set_equal(&union(&a, &b), &union(&b, &a)));
        prop_assert!(set_equal(&intersect(&a, &b), &intersect(&b, &a)));
    }

    #[test]
    fn difference_is_disjoint_from_subtrahend(a in freq_set(0.05), b in freq_set(0.05)) {
        prop_assert!(intersect(&difference(&a, &b), &b).is_empty());
    }

    #[test]
    fn sets_are_canonical(a in freq_set(0.05), b in freq_set(0.05)) {
        for s in [&a, &union(&a, &b), &intersect(&a, &b), &difference(&a, &b)] {
            let f = s.frequencies();
            prop_assert!(f.windows(2).all(|w| w[1] - w[0] >= 2.0 * s.delta()), "{s}");
        }
    }

    #[test]
    fn intersection_is_monotone(a in freq_set(0.05), b in freq_set(0.05)) {
        let i = intersect(&a, &b);
        prop_assert!(i.len() <= a.len().min(b.len()));
        prop_assert!(difference(&i, &a).is_empty());
    }

    #[test]
    fn decorrelated_sets_are_disjoint(
        link in prop::collection::vec(0.0f64..3.0, 0..3),
        own in prop::collection::vec(prop::collection::vec(3.5f64..20.0, 0..4), 2..4),
    ) {
        // Distinct offsets keep the private parts of different inputs apart.
        let sets: Vec<FrequencySet> = own
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let mine = f.iter().map(|w| (w.floor() + 0.25 * i as f64) * 2.0);
                FrequencySet::new(link.iter().copied().chain(mine).collect(), 0.01).unwrap()
            })
            .collect();
        let d = decorrelate(&sets).unwrap();
        for (i, a) in d.conditional.iter().enumerate() {
            prop_assert!(intersect(a, &d.link).is_empty());
            for b in &d.conditional[i + 1..] {
                prop_assert!(intersect(a, b).is_empty());
            }
        }
    }

    #[test]
    fn channels_preserve_support_and_linearity(s in spaced_signal(0.5, 0.5, 4), c in prop::collection::vec(0.1f64..2.0, 2..4)) {
        let k = ChannelResponse::ode(c).unwrap();
        let y = apply_channel(&s, &k);
        prop_assert_eq!(y.frequencies(), s.frequencies());
        let doubled = apply_channel(&superpose(&[&s, &s]), &k);
        for (a, b) in doubled.components().iter().zip(y.components()) {
            prop_assert!((a.amplitude() - 2.0 * b.amplitude()).abs() < 1e-12 * a.amplitude().max(1.0));
        }
    }

    #[test]
    fn fit_recovers_exact_responses(c in prop::collection::vec(0.2f64..2.0, 2..5)) {
        let order = c.len() - 1;
        let omegas: Vec<f64> = (0..2 * order + 2).map(|i| 0.3 + 0.4 * i as f64).collect();
        let frf = FrequencyResponse::from_channel(&ChannelResponse::ode(c.clone()).unwrap(), &omegas).unwrap();
        let m = fit_ode(&frf, order).unwrap();
        for (got, want) in m.coefficients().iter().zip(&c) {
            prop_assert!((got - want).abs() < 1e-8 * want.abs());
        }
        prop_assert!(m.residual() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, .. ProptestConfig::default() })]

    #[test]
    fn extraction_is_gain_equivariant(s in spaced_signal(1.0, 0.8, 4), g in 0.1f64..10.0) {
        let cfg = AnalysisConfig::for_band(0.5, 10.0);
        let r = synthesize(&s, 60.0, 0.01).unwrap();
        let base = extract_frequency_set(&r, &cfg).unwrap();
        let scaled = extract_frequency_set(&r.scaled(g), &cfg).unwrap();
        prop_assert!(set_equal(&base.set, &scaled.set));
        // Rounding may land the search anywhere inside its final bracket; a
        // frequency shift δ turns the exponent phase by about δ·T/2.
        let tol = cfg.refine_tolerance;
        prop_assert_eq!(base.spectrum.lines().len(), scaled.spectrum.lines().len());
        for (a, b) in base.spectrum.lines().iter().zip(scaled.spectrum.lines()) {
            prop_assert!((a.omega - b.omega).abs() <= 2.0 * tol);
            prop_assert!((b.exponent - a.exponent * g).norm() <= tol * r.duration() * g * a.exponent.norm());
        }
    }

    #[test]
    fn frf_is_invariant_to_common_gain(s in spaced_signal(1.0, 0.8, 3), g in 0.1f64..10.0) {
        let k = ChannelResponse::ode(vec![1.0, 0.3]).unwrap();
        let x = synthesize(&s, 60.0, 0.01).unwrap();
        let y = synthesize(&apply_channel(&s, &k), 60.0, 0.01).unwrap();
        let set = FrequencySet::new(s.frequencies(), x.resolution()).unwrap();
        let a = estimate_frf(&x, &y, &set).unwrap().response;
        let b = estimate_frf(&x.scaled(g), &y.scaled(g), &set).unwrap().response;
        for ((_, u), (_, v)) in a.points().iter().zip(b.points()) {
            prop_assert!((u - v).norm() < 1e-9 * u.norm());
        }
    }

    #[test]
    fn random_scenarios_keep_truth_sets_disjoint(seed in 0u64..10_000) {
        let sc = random_scenario(&ScenarioSpec::default(), seed).unwrap();
        let t = sc.truth();
        let mut all: Vec<&FrequencySet> = t.inputs.iter().collect();
        all.push(&t.link);
        all.extend(&t.input_noises);
        all.extend(&t.output_noises);
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                prop_assert!(intersect(a, b).is_empty());
            }
        }
    }
}

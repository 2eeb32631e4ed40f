use covshift::detector::{detect, fit, violation_terms};
use covshift::eval::{gen_scores, ScoreDist};
use covshift::scores::ScoreSample;
use covshift::stats::Rng;
use proptest::prelude::*;

fn raw(v: Vec<f64>) -> ScoreSample {
    ScoreSample::new(v, "raw_passthrough", "test").unwrap()
}

#[test]
fn large_shifted_windows_are_detected() {
    let mut rng = Rng::new(21);
    let train = gen_scores(&ScoreDist::Beta { a: 5.0, b: 1.0 }, 5000, &mut rng).unwrap();
    let model = fit(&train, 0.01, 10).unwrap();
    let shifted = ScoreDist::Beta { a: 2.0, b: 2.0 };
    let hits = (0..100)
        .filter(|_| {
            let w = gen_scores(&shifted, 1000, &mut rng).unwrap();
            detect(&model, &w, 0.05).unwrap().p_value < 0.01
        })
        .count();
    assert!(hits >= 95, "{hits}/100 windows with p < 0.01");
}

#[test]
fn detection_is_thread_safe_and_pure() {
    let mut rng = Rng::new(22);
    let train = gen_scores(&ScoreDist::Beta { a: 5.0, b: 1.0 }, 3000, &mut rng).unwrap();
    let model = fit(&train, 0.01, 10).unwrap();
    let window = gen_scores(&ScoreDist::Uniform, 64, &mut rng).unwrap();
    let expected = detect(&model, &window, 0.05).unwrap();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..8)
            .map(|_| s.spawn(|| detect(&model, &window, 0.05).unwrap()))
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), expected);
        }
    });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn monotone_transform_leaves_decisions_unchanged(
        train in prop::collection::vec(0.0f64..1.0, 20..400),
        window in prop::collection::vec(0.0f64..1.0, 2..60),
    ) {
        // x ↦ 8x + 1 is exact in binary floating point on [0, 1)
        let phi = |v: &[f64]| v.iter().map(|x| 8.0 * x + 1.0).collect::<Vec<_>>();
        let a = fit(&raw(train.clone()), 0.01, 10).unwrap();
        let b = fit(&raw(phi(&train)), 0.01, 10).unwrap();
        let ra = detect(&a, &raw(window.clone()), 0.05).unwrap();
        let rb = detect(&b, &raw(phi(&window)), 0.05).unwrap();
        prop_assert_eq!(ra.v_statistic, rb.v_statistic);
        prop_assert_eq!(ra.p_value, rb.p_value);
        for (x, y) in ra.per_coverage.iter().zip(&rb.per_coverage) {
            prop_assert_eq!(x.empirical_coverage, y.empirical_coverage);
            prop_assert_eq!(x.violated, y.violated);
        }
    }

    #[test]
    fn v_is_the_mean_of_the_terms_and_nonnegative(
        train in prop::collection::vec(0.0f64..1.0, 20..300),
        window in prop::collection::vec(0.0f64..1.0, 2..80),
    ) {
        let model = fit(&raw(train), 0.05, 10).unwrap();
        let w = raw(window);
        let r = detect(&model, &w, 0.05).unwrap();
        let terms = violation_terms(&model, &w).unwrap();
        prop_assert_eq!(terms.len(), w.len() * 10);
        let mean = terms.iter().sum::<f64>() / terms.len() as f64;
        prop_assert!(r.v_statistic >= 0.0);
        prop_assert!((mean - r.v_statistic).abs() < 1e-12);
        prop_assert_eq!(r.shift_detected, r.p_value < 0.05);
    }
}

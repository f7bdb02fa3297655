use partition_measures::catalog::{make, CatalogName};
use partition_measures::diagnostics::{
    concentration_experiment, degenerate_shape_probe, degenerate_statistic, scaled_diagram, variance_ratio_probe,
    young_function, young_integral, SamplerChoice,
};
use partition_measures::verify::CONCENTRATION_GRID;
use partition_measures::{Ensemble64, Error, Partition, Regime};
use proptest::prelude::*;

fn partition() -> impl Strategy<Value = Partition> {
    prop::collection::vec(1u64..40, 0..30).prop_map(|parts| Partition::from_parts(&parts).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn young_function_is_a_nonincreasing_step_function(p in partition(), t in 0.0f64..45.0, s in 0.0f64..45.0) {
        let (a, b) = if t <= s { (t, s) } else { (s, t) };
        prop_assert!(young_function(&p, a) >= young_function(&p, b));
        let k = t.floor();
        prop_assert_eq!(young_function(&p, t), young_function(&p, k));
        prop_assert_eq!(young_function(&p, k + 0.999), young_function(&p, k));
        prop_assert_eq!(young_function(&p, p.largest_part() as f64), 0);
    }

    #[test]
    fn young_integral_is_the_weight(p in partition()) {
        prop_assert_eq!(young_integral(&p), p.weight());
    }

    #[test]
    fn scaled_diagram_at_unit_scale(p in partition(), t in 0.0f64..40.0) {
        prop_assume!(p.weight() > 0);
        let v = scaled_diagram(&p, 1.0, 1.0, &[t]);
        prop_assert_eq!(v[0], young_function(&p, t) as f64);
    }
}

fn uniform() -> Ensemble64 {
    make(&CatalogName::Uniform).unwrap()
}

#[test]
fn miss_fraction_does_not_grow_with_n() {
    let e = uniform();
    let replicas = 400;
    let miss: Vec<Vec<f64>> = [1_000u64, 10_000, 40_000]
        .iter()
        .map(|&n| {
            let r = concentration_experiment(&e, n, replicas, &CONCENTRATION_GRID, 0.05, 5, SamplerChoice::Auto).unwrap();
            r.points.iter().map(|p| 1.0 - p.hit_fraction).collect()
        })
        .collect();
    for w in miss.windows(2) {
        for (i, (a, b)) in w[0].iter().zip(&w[1]).enumerate() {
            let se = ((a * (1.0 - a) + b * (1.0 - b)) / replicas as f64).sqrt();
            assert!(*b <= a + 2.0 * se, "t={}: {a} -> {b}", CONCENTRATION_GRID[i]);
        }
    }
}

#[test]
fn sup_distance_shrinks() {
    let e = uniform();
    let median = |n| {
        concentration_experiment(&e, n, 200, &CONCENTRATION_GRID, 0.05, 9, SamplerChoice::Auto)
            .unwrap()
            .sup_distance
            .median
    };
    let (small, large) = (median(100), median(40_000));
    assert!(large < small, "{small} -> {large}");
}

#[test]
fn concentration_report_outputs() {
    let e = uniform();
    let r = concentration_experiment(&e, 300, 10, &[0.5, 1.0], 0.1, 1, SamplerChoice::Exact).unwrap();
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["n"], 300);
    assert_eq!(json["ensemble"], "uniform");
    assert_eq!(json["points"].as_array().unwrap().len(), 2);
    let csv = r.sup_csv();
    assert_eq!(csv.lines().next(), Some("replica,sup_distance"));
    assert_eq!(csv.lines().count(), 11);
    let again = concentration_experiment(&e, 300, 10, &[0.5, 1.0], 0.1, 1, SamplerChoice::Exact).unwrap();
    assert_eq!(r.sup_distances, again.sup_distances);
}

#[test]
fn concentration_requires_an_ergodic_ensemble() {
    let e: Ensemble64 = make(&CatalogName::Weighted { y: 2.0 }).unwrap();
    let err = concentration_experiment(&e, 100, 4, &[1.0], 0.1, 1, SamplerChoice::Auto).unwrap_err();
    assert!(matches!(err, Error::Regime { regime: Regime::NonergodicGrandCanonical, .. }));
}

#[test]
fn variance_ratio_flags_the_nonergodic_regime() {
    let e: Ensemble64 = make(&CatalogName::Weighted { y: 2.0 }).unwrap();
    let r = variance_ratio_probe(&e, &[0.45, 0.49, 0.499]).unwrap();
    assert!(r.nonergodic);
    assert_eq!(r.expected_limit, 2.0);
    assert!((r.points[2].1 / 2.0 - 1.0).abs() < 0.01);
    assert!(variance_ratio_probe(&uniform(), &[0.5]).is_err());
}

#[test]
fn degenerate_statistic_shrinks_for_weighted_two() {
    let e: Ensemble64 = make(&CatalogName::Weighted { y: 2.0 }).unwrap();
    let small = degenerate_shape_probe(&e, 100, 200, 3).unwrap();
    let large = degenerate_shape_probe(&e, 1000, 200, 3).unwrap();
    assert!(large.mean < small.mean);
    assert!(!small.conjectural);
    assert_eq!(degenerate_statistic(&Partition::from_parts(&[1, 1, 2]).unwrap()), 0.5);
}

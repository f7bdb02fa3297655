use partition_measures::asymptotics::{limit_shape, omega, shape_curve, sigma_sq, solve_tilt, StepKind};
use partition_measures::catalog::{make, CatalogName};
use partition_measures::{Ensemble64, PartSet};
use proptest::prelude::*;

fn ergodic_entries() -> Vec<CatalogName> {
    vec![
        CatalogName::Uniform,
        CatalogName::Weighted { y: 0.5 },
        CatalogName::Restricted(PartSet::odds()),
        CatalogName::Gibbs { theta: 1.0, beta: 1.0 },
        CatalogName::Gibbs { theta: 2.0, beta: 0.5 },
        CatalogName::Gibbs { theta: 0.7, beta: 2.0 },
    ]
}

fn entry(i: usize) -> Ensemble64 {
    make(&ergodic_entries()[i]).unwrap()
}

/// `(1−x)^{β+1} E_x N / θ` and `(1−x)^{β+2} Var_x N / θ`.
fn normalized_moments(e: &Ensemble64, x: f64) -> (f64, f64) {
    let m = e.moments(x).unwrap();
    let (b, t) = (e.beta(), e.theta());
    ((1.0 - x).powf(b + 1.0) * m.mean / t, (1.0 - x).powf(b + 2.0) * m.var / t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn moments_increase_in_x(i in 0usize..6, a in 0.01f64..0.99, d in 0.001f64..0.5) {
        let e = entry(i);
        let (x1, x2) = (a, (a + d).min(0.995));
        prop_assume!(x2 > x1);
        let (m1, m2) = (e.moments(x1).unwrap(), e.moments(x2).unwrap());
        prop_assert!(m2.mean > m1.mean && m2.var > m1.var);
    }

    #[test]
    fn newton_steps_contract(i in 0usize..6, n in 10u64..2_000_000) {
        let s = solve_tilt(&entry(i), n).unwrap();
        prop_assert!(s.residual.abs() <= 1e-10 * n as f64);
        for w in s.trace.windows(2) {
            if w[1].kind == StepKind::Newton {
                prop_assert!(w[1].residual.abs() < w[0].residual.abs());
            }
        }
    }
}

#[test]
fn mean_and_variance_approach_their_constants() {
    for (i, name) in ergodic_entries().iter().enumerate() {
        let e = entry(i);
        let (om, s2) = (omega(&e).unwrap(), sigma_sq(&e).unwrap());
        let xs = [0.9, 0.99, 0.999];
        let gaps: Vec<(f64, f64)> = xs
            .iter()
            .map(|&x| {
                let (m, v) = normalized_moments(&e, x);
                ((m / om - 1.0).abs(), (v / s2 - 1.0).abs())
            })
            .collect();
        for w in gaps.windows(2) {
            assert!(w[1].0 < w[0].0 && w[1].1 < w[0].1, "{}: {gaps:?}", name.label());
        }
        assert!(gaps[2].0 < 0.05 && gaps[2].1 < 0.05, "{}: {gaps:?}", name.label());
        let (m, _) = normalized_moments(&e, 0.9999);
        assert!((m / om - 1.0).abs() < 0.01, "{}", name.label());
    }
}

#[test]
fn sigma_squared_is_beta_plus_one_omega() {
    for i in 0..6 {
        let e = entry(i);
        let (om, s2) = (omega(&e).unwrap(), sigma_sq(&e).unwrap());
        assert!((s2 - (e.beta() + 1.0) * om).abs() <= 1e-6 * s2);
    }
}

#[test]
fn exponential_variance_constant() {
    // f = e^z, b_k = 1: Var N = Σ k² x^k, so (1−x)³ Var → 2.
    let e = make::<f64>(&CatalogName::OrderedLists).unwrap();
    let s2 = sigma_sq(&e).unwrap();
    let x: f64 = 0.999;
    let direct: f64 = (1..200_000).map(|k| (k as f64).powi(2) * x.powi(k)).sum();
    assert!(((1.0 - x).powi(3) * direct / s2 - 1.0).abs() < 0.02);
    assert!((s2 - 2.0).abs() < 1e-8);
}

#[test]
fn shapes_are_nonincreasing_and_have_unit_mass() {
    for i in 0..6 {
        let c = shape_curve(&entry(i), 8.0, 1000).unwrap();
        assert!(c.is_nonincreasing());
        assert!((c.mass - 1.0).abs() < 1e-3, "mass {}", c.mass);
    }
}

#[test]
fn tail_sums_of_mean_counts_follow_the_shape() {
    let x: f64 = 0.999;
    for i in 0..6 {
        let e = entry(i);
        let om = omega(&e).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let k0 = (t / (1.0 - x)).floor() as u64;
            let mut tail = 0.0;
            for k in k0 + 1..k0 + 100_000 {
                let u = x.powi(k as i32);
                let d = e.series().eval_with_derivatives(u).unwrap();
                tail += e.b(k) * u * d.h;
            }
            let lhs = (1.0 - x).powf(e.beta()) / e.theta() * tail;
            let rhs = om * limit_shape(&e, t).unwrap();
            assert!((lhs / rhs - 1.0).abs() < 0.02, "entry {i} t={t}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn frozen_values() {
    let u = make::<f64>(&CatalogName::Uniform).unwrap();
    let direct: f64 = (1..200).map(|k| k as f64 * 0.5f64.powi(k) / (1.0 - 0.5f64.powi(k))).sum();
    assert!((u.mean_n(0.5).unwrap() - direct).abs() < 1e-13);
    assert!((direct - 2.744).abs() < 1e-3);
    let h = 1e-6;
    let fd = 0.5 * (u.mean_n(0.5 + h).unwrap() - u.mean_n(0.5 - h).unwrap()) / (2.0 * h);
    assert!((u.var_n(0.5).unwrap() / fd - 1.0).abs() < 1e-5);
    let ex = make::<f64>(&CatalogName::OrderedLists).unwrap();
    let sum: f64 = (1..200).map(|k| (k * k) as f64 * 0.5f64.powi(k)).sum();
    assert!((sum - 0.5 * 1.5 / 0.125).abs() < 1e-12);
    assert!((ex.var_n(0.5).unwrap() - sum).abs() < 1e-12);
    assert!((omega(&u).unwrap() - 1.644934066848226).abs() < 1e-10);
    assert!((sigma_sq(&u).unwrap() - 3.289868133696453).abs() < 1e-9);
    assert!((limit_shape(&u, 2f64.ln()).unwrap() - 0.421383).abs() < 1e-6);

    let s = solve_tilt(&u, 100).unwrap();
    assert!(s.residual.abs() <= 1e-8 && s.x > 0.85 && s.x < 0.90);
    let s = solve_tilt(&u, 1_000_000).unwrap();
    let asymptote = std::f64::consts::PI / 6e6f64.sqrt();
    assert!((s.tau / asymptote - 1.0).abs() < 0.05);
    assert!((s.alpha() / (6e6f64.sqrt() / std::f64::consts::PI) - 1.0).abs() < 0.05);

    let w = make::<f64>(&CatalogName::Weighted { y: 2.0 }).unwrap();
    let s = solve_tilt(&w, 10_000).unwrap();
    assert!(((0.5 - s.x) * 1e4 / 0.5 - 1.0).abs() < 0.1);
}

#[test]
fn scaling_factor_matches_closed_forms() {
    use partition_measures::catalog::{reference_alpha, reference_omega, reference_shape};
    use partition_measures::scaling_alpha;
    for name in ergodic_entries().into_iter().chain([CatalogName::OrderedLists]) {
        let e: Ensemble64 = make(&name).unwrap();
        let Ok(reference) = reference_alpha(&name, 1e6) else { continue };
        let a = scaling_alpha(&e, 1_000_000).unwrap();
        assert!((a / reference - 1.0).abs() < 0.05, "{}: {a} vs {reference}", name.label());
        let om = reference_omega(&name).unwrap();
        assert!((omega(&e).unwrap() / om - 1.0).abs() < 1e-8, "{}", name.label());
        for t in [0.3, 1.0, 2.5] {
            let want = reference_shape(&name, t).unwrap();
            assert!((limit_shape(&e, t).unwrap() - want).abs() < 1e-8, "{} t={t}", name.label());
        }
    }
}

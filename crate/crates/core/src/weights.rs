//! Exponent sequences `b_k`, their partial sums `B_k`, and the regularity
//! diagnostics applied to them.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A set of admissible part sizes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PartSet {
    /// `{k ≥ 1 : k mod modulus ∈ residues}`.
    Residues { modulus: u64, residues: BTreeSet<u64> },
    /// A finite set; its partial sums stay bounded.
    Finite(BTreeSet<u64>),
}

impl PartSet {
    pub fn evens() -> Self {
        PartSet::Residues {
            modulus: 2,
            residues: [0].into_iter().collect(),
        }
    }

    pub fn odds() -> Self {
        PartSet::Residues {
            modulus: 2,
            residues: [1].into_iter().collect(),
        }
    }

    pub fn residues(modulus: u64, residues: impl IntoIterator<Item = u64>) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::param("modulus must be positive"));
        }
        let residues: BTreeSet<u64> = residues.into_iter().map(|r| r % modulus).collect();
        if residues.is_empty() {
            return Err(Error::param("part set is empty"));
        }
        Ok(PartSet::Residues { modulus, residues })
    }

    pub fn finite(parts: impl IntoIterator<Item = u64>) -> Result<Self> {
        let parts: BTreeSet<u64> = parts.into_iter().filter(|&k| k > 0).collect();
        if parts.is_empty() {
            return Err(Error::param("part set is empty"));
        }
        Ok(PartSet::Finite(parts))
    }

    pub fn contains(&self, k: u64) -> bool {
        match self {
            PartSet::Residues { modulus, residues } => residues.contains(&(k % modulus)),
            PartSet::Finite(s) => s.contains(&k),
        }
    }

    fn count_up_to(&self, k: u64) -> u64 {
        match self {
            PartSet::Residues { modulus, residues } => {
                let full = k / modulus;
                let rem = k % modulus;
                residues
                    .iter()
                    .map(|&r| {
                        // members r, r+m, ... that are ≥ 1 and ≤ k
                        let base = if r == 0 { full } else { full + u64::from(r <= rem) };
                        base
                    })
                    .sum()
            }
            PartSet::Finite(s) => s.range(..=k).count() as u64,
        }
    }

    /// Asymptotic density of the set.
    pub fn density(&self) -> f64 {
        match self {
            PartSet::Residues { modulus, residues } => residues.len() as f64 / *modulus as f64,
            PartSet::Finite(_) => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WeightRule<T> {
    /// `b_k = value` for every `k`.
    Constant(T),
    /// `b_k = 1` on the set, 0 elsewhere.
    Indicator(PartSet),
    /// `b_k = θ(k^β − (k−1)^β)`, so `B_k = θ k^β` exactly.
    PowerLaw { theta: T, beta: T },
    /// `b_k = k^exponent`.
    Monomial { exponent: T },
    /// `b_k = θ/k` (cycle-type weights; partial sums grow logarithmically).
    Harmonic { theta: T },
    /// The listed values repeated cyclically: `b_k = values[(k−1) mod len]`.
    Explicit(Vec<T>),
}

/// Declared regular-variation data `B_k ≈ θ k^β` and the optional constants of
/// the sharper remainder condition (`ζ`) and the arithmetic-progression
/// condition (`χ`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Declared<T> {
    pub beta: T,
    pub theta: T,
    pub zeta: Option<T>,
    pub chi: Option<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightSequence<T> {
    rule: WeightRule<T>,
    declared: Declared<T>,
}

impl<T: Real> WeightSequence<T> {
    /// Builds a sequence, deriving `β` and `θ` from the rule.
    pub fn new(rule: WeightRule<T>) -> Result<Self> {
        let (beta, theta) = match &rule {
            WeightRule::Constant(v) => {
                if !(*v > T::zero()) {
                    return Err(Error::param("constant weight must be positive"));
                }
                (T::one(), *v)
            }
            WeightRule::Indicator(set) => (
                if set.density() > 0.0 { T::one() } else { T::zero() },
                T::lit(set.density()),
            ),
            WeightRule::PowerLaw { theta, beta } => {
                if !(*theta > T::zero() && *beta > T::zero()) {
                    return Err(Error::param("power law needs θ > 0 and β > 0"));
                }
                (*beta, *theta)
            }
            WeightRule::Monomial { exponent } => {
                let beta = *exponent + T::one();
                if !(beta > T::zero()) {
                    return Err(Error::param("monomial exponent must exceed -1"));
                }
                (beta, T::one() / beta)
            }
            WeightRule::Harmonic { theta } => {
                if !(*theta > T::zero()) {
                    return Err(Error::param("harmonic weight needs θ > 0"));
                }
                (T::zero(), *theta)
            }
            WeightRule::Explicit(values) => {
                if values.is_empty() || values.iter().any(|v| !(*v >= T::zero())) {
                    return Err(Error::param("explicit weights must be nonempty and nonnegative"));
                }
                let mean = values.iter().fold(T::zero(), |a, v| a + *v)
                    / T::lit(values.len() as f64);
                if !(mean > T::zero()) {
                    return Err(Error::param("explicit weights are identically zero"));
                }
                (T::one(), mean)
            }
        };
        Ok(Self {
            rule,
            declared: Declared {
                beta,
                theta,
                zeta: None,
                chi: None,
            },
        })
    }

    /// Overrides the declared constants.
    pub fn with_declared(mut self, declared: Declared<T>) -> Result<Self> {
        if !(declared.theta >= T::zero() && declared.beta >= T::zero()) {
            return Err(Error::param("declared θ and β must be nonnegative"));
        }
        if let Some(chi) = declared.chi {
            if !(chi > T::zero() && chi < T::one()) {
                return Err(Error::param("declared χ must lie in (0, 1)"));
            }
        }
        self.declared = declared;
        Ok(self)
    }

    pub fn rule(&self) -> &WeightRule<T> {
        &self.rule
    }

    pub fn declared(&self) -> &Declared<T> {
        &self.declared
    }

    /// `b_k` for `k ≥ 1`.
    pub fn b(&self, k: u64) -> T {
        debug_assert!(k >= 1);
        match &self.rule {
            WeightRule::Constant(v) => *v,
            WeightRule::Indicator(set) => {
                if set.contains(k) {
                    T::one()
                } else {
                    T::zero()
                }
            }
            WeightRule::PowerLaw { theta, beta } => {
                let kf = T::lit(k as f64);
                // k^β − (k−1)^β = k^β(1 − (1 − 1/k)^β), written to avoid cancellation.
                let tail = (*beta * (-T::one() / kf).ln_1p()).exp_m1();
                -*theta * kf.powf(*beta) * tail
            }
            WeightRule::Monomial { exponent } => T::lit(k as f64).powf(*exponent),
            WeightRule::Harmonic { theta } => *theta / T::lit(k as f64),
            WeightRule::Explicit(values) => values[((k - 1) % values.len() as u64) as usize],
        }
    }

    /// Partial sum `B_k = Σ_{j≤k} b_j`.
    pub fn prefix_sum(&self, k: u64) -> T {
        match &self.rule {
            WeightRule::Constant(v) => *v * T::lit(k as f64),
            WeightRule::Indicator(set) => T::lit(set.count_up_to(k) as f64),
            WeightRule::PowerLaw { theta, beta } => *theta * T::lit(k as f64).powf(*beta),
            WeightRule::Explicit(values) => {
                let len = values.len() as u64;
                let period: T = values.iter().fold(T::zero(), |a, v| a + *v);
                let partial = values[..(k % len) as usize]
                    .iter()
                    .fold(T::zero(), |a, v| a + *v);
                period * T::lit((k / len) as f64) + partial
            }
            WeightRule::Monomial { .. } | WeightRule::Harmonic { .. } => {
                let mut s = crate::scalar::CompensatedSum::new();
                for j in 1..=k {
                    s.add(self.b(j));
                }
                s.value()
            }
        }
    }

    /// Constants `(c, p)` with `b_j ≤ c·j^p` for every `j ≥ 1`; used for
    /// rigorous tail bounds on the moment sums.
    pub fn growth_bound(&self) -> (T, T) {
        match &self.rule {
            WeightRule::Constant(v) => (*v, T::zero()),
            WeightRule::Indicator(_) => (T::one(), T::zero()),
            WeightRule::PowerLaw { theta, beta } => {
                if *beta >= T::one() {
                    (*theta * *beta, *beta - T::one())
                } else {
                    (*theta, T::zero())
                }
            }
            WeightRule::Monomial { exponent } => (T::one(), exponent.max(T::zero())),
            WeightRule::Harmonic { theta } => (*theta, T::zero()),
            WeightRule::Explicit(values) => (
                values.iter().fold(T::zero(), |a, v| a.max(*v)),
                T::zero(),
            ),
        }
    }

    /// Whether `b_1..=b_k` are all integers.
    pub fn integral_up_to(&self, k: u64) -> bool {
        match &self.rule {
            WeightRule::Indicator(_) => true,
            WeightRule::Constant(v) => v.fract() == T::zero(),
            WeightRule::Explicit(values) => values.iter().all(|v| v.fract() == T::zero()),
            _ => (1..=k).all(|j| self.b(j).fract() == T::zero()),
        }
    }

    /// Whether `b_k ≥ b > 0` for some uniform `b`.
    pub fn bounded_below(&self) -> bool {
        match &self.rule {
            WeightRule::Constant(_) => true,
            WeightRule::Indicator(_) => false,
            WeightRule::PowerLaw { beta, .. } => *beta >= T::one(),
            WeightRule::Monomial { exponent } => *exponent >= T::zero(),
            WeightRule::Harmonic { .. } => false,
            WeightRule::Explicit(values) => values.iter().all(|v| *v > T::zero()),
        }
    }

    /// A copy with every exponent divided by `scale` (the `f ↦ f^scale` trade).
    pub(crate) fn divided_by(&self, scale: T) -> WeightSequence<T> {
        let rule = match &self.rule {
            WeightRule::Constant(v) => WeightRule::Constant(*v / scale),
            WeightRule::PowerLaw { theta, beta } => WeightRule::PowerLaw {
                theta: *theta / scale,
                beta: *beta,
            },
            WeightRule::Harmonic { theta } => WeightRule::Harmonic {
                theta: *theta / scale,
            },
            WeightRule::Explicit(values) => {
                WeightRule::Explicit(values.iter().map(|v| *v / scale).collect())
            }
            other => other.clone(),
        };
        let mut declared = self.declared;
        declared.theta = declared.theta / scale;
        WeightSequence { rule, declared }
    }
}

/// Whether `k ∈ K_s = {k : ∃ j, |k − s·j| < 1/2}`.
pub fn in_progression_set(k: u64, s: f64) -> bool {
    if s <= 1.0 {
        return true;
    }
    let q = k as f64 / s;
    [q.floor(), q.ceil()]
        .iter()
        .any(|&j| (k as f64 - s * j).abs() < 0.5)
}

#[derive(Clone, Debug, Serialize)]
pub struct ProgressionRatio {
    pub s: f64,
    /// `max_k Σ_{j≤k, j∈K_s} b_j / B_k` over `k ≤ k_max` with `B_k > 0`.
    pub worst_ratio: f64,
    pub worst_k: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Condition10Report {
    pub k_max: u64,
    pub per_s: Vec<ProgressionRatio>,
    pub worst_ratio: f64,
    pub worst_s: f64,
}

impl Condition10Report {
    /// The bound holds on the checked range for the given `χ`.
    pub fn holds_for(&self, chi: f64) -> bool {
        self.worst_ratio <= chi
    }
}

/// Checks the arithmetic-progression condition `Σ_{j≤k, j∈K_s} b_j ≤ χ B_k`
/// on the listed `s` values and all `k ≤ k_max`.
pub fn check_condition_10_at<T: Real>(
    w: &WeightSequence<T>,
    s_values: &[f64],
    k_max: u64,
) -> Result<Condition10Report> {
    if s_values.is_empty() || s_values.iter().any(|s| *s < 2.0) {
        return Err(Error::param("the regularity ratio is defined for s ≥ 2"));
    }
    let b: Vec<f64> = (1..=k_max).map(|k| w.b(k).as_f64()).collect();
    let mut per_s = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let (mut total, mut inside) = (0.0, 0.0);
        let (mut worst, mut worst_k) = (0.0f64, 0);
        for k in 1..=k_max {
            let bk = b[(k - 1) as usize];
            total += bk;
            if in_progression_set(k, s) {
                inside += bk;
            }
            if total > 0.0 {
                let r = inside / total;
                if r > worst {
                    worst = r;
                    worst_k = k;
                }
            }
        }
        per_s.push(ProgressionRatio {
            s,
            worst_ratio: worst,
            worst_k,
        });
    }
    let top = per_s
        .iter()
        .max_by(|a, b| a.worst_ratio.partial_cmp(&b.worst_ratio).unwrap())
        .expect("nonempty");
    Ok(Condition10Report {
        k_max,
        worst_ratio: top.worst_ratio,
        worst_s: top.s,
        per_s,
    })
}

/// [`check_condition_10_at`] on the grid `s = 2, 2.25, …, s_max`.
pub fn check_condition_10<T: Real>(
    w: &WeightSequence<T>,
    s_max: f64,
    k_max: u64,
) -> Result<Condition10Report> {
    if s_max < 2.0 {
        return Err(Error::param("s_max must be at least 2"));
    }
    let steps = ((s_max - 2.0) / 0.25).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| 2.0 + 0.25 * i as f64).collect();
    check_condition_10_at(w, &grid, k_max)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub enum Remainder {
    /// `B_k − θk^β` vanishes on the whole grid.
    ExactlyZero,
    /// Fitted exponent `e` in `|B_k − θk^β| ≈ C k^e`.
    Exponent(f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct Condition11Report {
    pub fitted_theta: f64,
    pub fitted_beta: f64,
    pub remainder: Remainder,
    /// `Some(true)` when the remainder exponent is at most `β − ζ` for the
    /// declared `ζ`, and `ζ > 1 − β/2`.
    pub zeta_compliant: Option<bool>,
    /// Partial sums do not grow like a positive power.
    pub out_of_scope: bool,
}

/// Smallest fitted growth exponent still treated as a positive power.
pub const MIN_FITTED_BETA: f64 = 0.2;

/// Fits `B_k ≈ θk^β` on a dyadic grid and estimates the growth exponent of
/// the remainder `B_k − θ_decl k^{β_decl}` from its maximum over each dyadic
/// block.
pub fn check_condition_11<T: Real>(w: &WeightSequence<T>, k_max: u64) -> Result<Condition11Report> {
    if k_max < 64 {
        return Err(Error::param("k_max must be at least 64"));
    }
    let top = 63 - k_max.leading_zeros();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 2..=top {
        let k = 1u64 << i;
        let bk = w.prefix_sum(k).as_f64();
        if bk > 0.0 {
            xs.push((k as f64).ln());
            ys.push(bk.ln());
        }
    }
    let (slope, intercept) = least_squares(&xs, &ys)
        .ok_or_else(|| Error::FitUnstable("partial sums vanish on the grid".into()))?;
    let declared = w.declared();
    let beta = declared.beta.as_f64();
    let theta = declared.theta.as_f64();
    let out_of_scope = slope < MIN_FITTED_BETA || beta <= 0.0;

    // Running prefix sums so each dyadic block maximum is O(block) work.
    let mut rx = Vec::new();
    let mut ry = Vec::new();
    let mut all_zero = true;
    let mut acc = crate::scalar::CompensatedSum::<f64>::new();
    let mut block_max = 0.0f64;
    let mut block = 2u32;
    let tol = 1e-9;
    for k in 1..=(1u64 << top) {
        acc.add(w.b(k).as_f64());
        if k < 4 {
            continue;
        }
        let r = (acc.value() - theta * (k as f64).powf(beta)).abs();
        let scale = theta * (k as f64).powf(beta);
        if r > tol * scale.max(1.0) {
            all_zero = false;
            block_max = block_max.max(r);
        }
        if k == (1u64 << (block + 1)) - 1 || k == (1u64 << top) {
            if block_max > 0.0 {
                rx.push(((1u64 << block) as f64).ln());
                ry.push(block_max.ln());
            }
            block += 1;
            block_max = 0.0;
        }
    }
    let remainder = if all_zero {
        Remainder::ExactlyZero
    } else if rx.len() >= 2 {
        Remainder::Exponent(least_squares(&rx, &ry).expect("two points").0)
    } else {
        return Err(Error::FitUnstable("remainder vanishes on all but one block".into()));
    };
    let zeta_compliant = declared.zeta.map(|z| {
        let z = z.as_f64();
        let ok_zeta = z > 1.0 - beta / 2.0;
        match remainder {
            Remainder::ExactlyZero => ok_zeta,
            Remainder::Exponent(e) => ok_zeta && e <= beta - z + 0.05,
        }
    });
    Ok(Condition11Report {
        fitted_theta: intercept.exp(),
        fitted_beta: slope,
        remainder,
        zeta_compliant,
        out_of_scope,
    })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_sums() {
        let c = WeightSequence::new(WeightRule::Constant(1.0)).unwrap();
        assert_eq!(c.prefix_sum(10), 10.0);
        let p = WeightSequence::new(WeightRule::PowerLaw {
            theta: 1.0,
            beta: 2.0,
        })
        .unwrap();
        assert_eq!(p.prefix_sum(4), 16.0);
        let direct: f64 = (1..=4).map(|k| p.b(k)).sum();
        assert!((direct - 16.0).abs() < 1e-12);
        let e = WeightSequence::<f64>::new(WeightRule::Indicator(PartSet::evens())).unwrap();
        assert_eq!(e.prefix_sum(7), 3.0);
        let o = WeightSequence::<f64>::new(WeightRule::Indicator(PartSet::odds())).unwrap();
        assert_eq!(o.prefix_sum(7), 4.0);
        let x = WeightSequence::new(WeightRule::Explicit(vec![1.0, 3.0])).unwrap();
        assert_eq!(x.prefix_sum(5), 9.0);
    }

    #[test]
    fn indicator_counts_match_enumeration() {
        let set = PartSet::residues(5, [0, 2, 3]).unwrap();
        for k in 0..40 {
            let direct = (1..=k).filter(|&j| set.contains(j)).count() as u64;
            assert_eq!(set.count_up_to(k), direct, "k = {k}");
        }
    }

    #[test]
    fn growth_bound_dominates() {
        let rules = vec![
            WeightRule::PowerLaw { theta: 2.0, beta: 2.5 },
            WeightRule::PowerLaw { theta: 1.0, beta: 0.5 },
            WeightRule::Monomial { exponent: 0.7 },
            WeightRule::Monomial { exponent: -0.5 },
            WeightRule::Harmonic { theta: 3.0 },
        ];
        for rule in rules {
            let w = WeightSequence::new(rule).unwrap();
            let (c, p) = w.growth_bound();
            for k in 1..2000u64 {
                assert!(w.b(k) <= c * (k as f64).powf(p) * (1.0 + 1e-12), "{w:?} at {k}");
            }
        }
    }

    #[test]
    fn progression_sets() {
        let k3: Vec<u64> = (1..=12).filter(|&k| in_progression_set(k, 3.0)).collect();
        assert_eq!(k3, vec![3, 6, 9, 12]);
        assert!((1..20).all(|k| in_progression_set(k, 1.0)));
        // 2.5·j lands on half-integers for odd j, which are excluded.
        let k25: Vec<u64> = (1..=10).filter(|&k| in_progression_set(k, 2.5)).collect();
        assert_eq!(k25, vec![5, 10]);
    }

    #[test]
    fn condition_10_constant_and_evens() {
        let c = WeightSequence::new(WeightRule::Constant(1.0)).unwrap();
        let r = check_condition_10_at(&c, &[2.0], 100).unwrap();
        // K_2 ∩ [1,100] holds the 50 evens.
        let at_100 = (1..=100).filter(|&k| in_progression_set(k, 2.0)).count();
        assert_eq!(at_100, 50);
        assert!((r.worst_ratio - 0.5).abs() < 1e-15);
        let e = WeightSequence::<f64>::new(WeightRule::Indicator(PartSet::evens())).unwrap();
        let r = check_condition_10_at(&e, &[2.0], 1000).unwrap();
        assert_eq!(r.worst_ratio, 1.0);
        assert!(!r.holds_for(0.99));
    }

    #[test]
    fn condition_11_exact_power_law() {
        let w = WeightSequence::new(WeightRule::PowerLaw {
            theta: 1.0,
            beta: 1.0,
        })
        .unwrap();
        let r = check_condition_11(&w, 1 << 12).unwrap();
        assert_eq!(r.remainder, Remainder::ExactlyZero);
        assert!((r.fitted_beta - 1.0).abs() < 1e-9);
    }

    #[test]
    fn condition_11_bounded_remainder() {
        // b_k = 1 + (−1)^k/2, normalised by b_1 = 1/2: 1, 3, 1, 3, ...
        let w = WeightSequence::new(WeightRule::Explicit(vec![1.0, 3.0]))
            .unwrap()
            .with_declared(Declared {
                beta: 1.0,
                theta: 2.0,
                zeta: Some(0.9),
                chi: None,
            })
            .unwrap();
        let r = check_condition_11(&w, 1 << 14).unwrap();
        match r.remainder {
            Remainder::Exponent(e) => assert!(e.abs() < 0.05, "{e}"),
            other => panic!("{other:?}"),
        }
        assert_eq!(r.zeta_compliant, Some(true));
        assert!((r.fitted_theta - 2.0).abs() < 0.05);
    }

    #[test]
    fn condition_11_flags_logarithmic_growth() {
        let w = WeightSequence::new(WeightRule::Harmonic { theta: 1.0 }).unwrap();
        let r = check_condition_11(&w, 1 << 16).unwrap();
        assert!(r.out_of_scope);
        assert!(r.fitted_beta < MIN_FITTED_BETA);
    }
}

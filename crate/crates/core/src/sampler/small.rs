//! Samplers for the measure conditioned on `N = n`.

use rand::Rng;

use super::counts::GrandCanonical;
use super::Partition;
use crate::asymptotics::solve_tilt;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::partition_function::{coefficients, CoefficientTable, Scale, TableOptions, PREFIX_CAP};
use crate::scalar::{Coefficient, Real};

/// `γ = (β+2)/(2β+2)`, the exponent in the rejection budget `n^γ`.
pub fn budget_exponent(beta: f64) -> f64 {
    let beta = if beta > 0.0 { beta } else { 0.0 };
    (beta + 2.0) / (2.0 * beta + 2.0)
}

/// Default budget `20⌈n^γ⌉`.
pub fn default_budget(beta: f64, n: u64) -> u64 {
    20 * (n as f64).powf(budget_exponent(beta)).ceil() as u64
}

/// Grand-canonical draws at `x_n` kept only when `N = n`.
#[derive(Clone, Debug)]
pub struct RejectionSampler {
    pub n: u64,
    pub x: f64,
    pub budget: u64,
    expected_rate: f64,
    grand: GrandCanonical,
}

impl RejectionSampler {
    pub fn new<T: Real>(e: &Ensemble<T>, n: u64, budget: Option<u64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n must be at least 1"));
        }
        let beta = e.beta().as_f64();
        let budget = budget.unwrap_or_else(|| default_budget(beta, n));
        if budget == 0 {
            return Err(Error::param("budget must be at least 1"));
        }
        let tilt = solve_tilt(e, n)?;
        Ok(Self {
            n,
            x: tilt.x.as_f64(),
            budget,
            expected_rate: (n as f64).powf(-budget_exponent(beta)),
            grand: GrandCanonical::new(e, tilt.x)?,
        })
    }

    /// One accepted draw and the number of attempts it took.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Partition, u64)> {
        for attempt in 1..=self.budget {
            if let Some((counts, w)) = self.grand.sample_bounded(rng, self.n) {
                if w == self.n {
                    let p = Partition::from_sorted(counts);
                    assert_eq!(p.weight(), self.n);
                    return Ok((p, attempt));
                }
            }
        }
        Err(Error::BudgetExhausted {
            attempts: self.budget,
            acceptance_rate: 0.0,
            expected_rate: self.expected_rate,
        })
    }
}

/// Exact conditional sampler from retained prefix tables: counts are drawn
/// top-down with `P(R_k = j | m) ∝ w_k(j) T_{k−1}(m − kj)`.
///
/// With `d < n` levels only parts `k ≤ d` come from the tables; larger parts
/// are drawn independently at the table scale `x` and the draw is accepted
/// with probability `T̃_d(r)/max_r T̃_d(r)` for the residual `r`.
#[derive(Clone, Debug)]
pub struct ExactSampler {
    n: usize,
    d: usize,
    /// `ln T̃` for each distinct prefix level.
    levels: Vec<Vec<f64>>,
    /// `level_of[k]` indexes `levels` for `T̃_k`.
    level_of: Vec<usize>,
    /// `ln w_k(j)`, scaled by the table scale.
    ln_w: Vec<Vec<f64>>,
    large: Option<GrandCanonical>,
    ln_accept_max: f64,
    max_attempts: u64,
}

/// Attempt cap of the divide-and-conquer acceptance step.
pub const EXACT_MAX_ATTEMPTS: u64 = 1_000_000;

impl ExactSampler {
    /// Full-table sampler for `n ≤ 5000`.
    pub fn new<T: Real>(e: &Ensemble<T>, n: usize) -> Result<Self> {
        if n > PREFIX_CAP {
            return Err(Error::Table(format!(
                "full exact sampling is capped at n = {PREFIX_CAP}; use divide_and_conquer"
            )));
        }
        let table: CoefficientTable<f64> = coefficients(
            e,
            n,
            &TableOptions {
                retain_prefix: true,
                scale: Scale::Tilt,
                ..Default::default()
            },
        )?;
        Self::from_table(e, n, &table)
    }

    /// Exact tables for parts `k ≤ d ≈ 1/(1 − x_n)`, independent draws above.
    pub fn divide_and_conquer<T: Real>(e: &Ensemble<T>, n: usize) -> Result<Self> {
        if n == 0 {
            return Self::new(e, 0);
        }
        let x = solve_tilt(e, n as u64)?.x;
        let d = ((T::one() / (T::one() - x)).as_f64().ceil() as usize).clamp(1, n);
        let table: CoefficientTable<f64> = coefficients(
            e,
            n,
            &TableOptions {
                retain_prefix: true,
                scale: Scale::Fixed(x.as_f64()),
                max_part: Some(d),
                ..Default::default()
            },
        )?;
        Self::from_table(e, n, &table)
    }

    /// Uses a caller-built table; prefix tables must be retained and the
    /// table must reach `n`.
    pub fn from_table<C: Coefficient, T: Real>(
        e: &Ensemble<T>,
        n: usize,
        table: &CoefficientTable<C>,
    ) -> Result<Self> {
        if !table.has_prefix() {
            return Err(Error::Table("prefix tables were not retained".into()));
        }
        if table.n_max() < n {
            return Err(Error::Table(format!(
                "table reaches {} but n = {n}",
                table.n_max()
            )));
        }
        let d = table.max_part().min(n);
        let s = table.scale();
        let mut levels: Vec<Vec<f64>> = Vec::new();
        let mut level_of = Vec::with_capacity(d + 1);
        let mut last: Option<*const C> = None;
        for k in 0..=d {
            let t = table.prefix(k).expect("prefix retained");
            if last != Some(t.as_ptr()) {
                levels.push(t[..=n].iter().map(|c| c.ln()).collect());
                last = Some(t.as_ptr());
            }
            level_of.push(levels.len() - 1);
        }
        let mut ln_w = vec![Vec::new()];
        for k in 1..=d {
            let b = e.b(k as u64).as_f64();
            let fk = e.series().dilated(T::lit(s.powi(k as i32)));
            let w: Vec<C> = fk.power_coefficients_in(b, n / k)?;
            ln_w.push(w.iter().map(|c| c.ln()).collect());
        }
        let (large, ln_accept_max) = if d < n {
            let x = T::lit(s);
            let k_star = e.grand_cutoff(x, T::lit(e.numerics().grand_tail))?;
            if k_star > d as u64 {
                let g = GrandCanonical::with_range(e, x, d as u64 + 1, k_star)?;
                let top = levels[level_of[d]].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (Some(g), top)
            } else {
                (None, 0.0)
            }
        } else {
            (None, 0.0)
        };
        Ok(Self {
            n,
            d,
            levels,
            level_of,
            ln_w,
            large,
            ln_accept_max,
            max_attempts: EXACT_MAX_ATTEMPTS,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of part sizes sampled from the tables.
    pub fn table_levels(&self) -> usize {
        self.d
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Partition> {
        let (mut counts, residual) = match &self.large {
            None => (Vec::new(), self.n),
            Some(g) => self.draw_large(g, rng)?,
        };
        self.draw_small(residual, &mut counts, rng)?;
        counts.sort_unstable();
        let p = Partition::from_sorted(counts);
        assert_eq!(p.weight(), self.n as u64);
        Ok(p)
    }

    fn draw_large<R: Rng + ?Sized>(
        &self,
        g: &GrandCanonical,
        rng: &mut R,
    ) -> Result<(Vec<(u64, u64)>, usize)> {
        let top = &self.levels[self.level_of[self.d]];
        for _ in 0..self.max_attempts {
            let Some((counts, w)) = g.sample_bounded(rng, self.n as u64) else {
                continue;
            };
            let r = self.n - w as usize;
            let ln_p = top[r] - self.ln_accept_max;
            let v: f64 = 1.0 - rng.random::<f64>();
            if v.ln() < ln_p {
                return Ok((counts, r));
            }
        }
        Err(Error::BudgetExhausted {
            attempts: self.max_attempts,
            acceptance_rate: 0.0,
            expected_rate: f64::NAN,
        })
    }

    fn draw_small<R: Rng + ?Sized>(
        &self,
        residual: usize,
        counts: &mut Vec<(u64, u64)>,
        rng: &mut R,
    ) -> Result<()> {
        let mut m = residual;
        let mut k = self.d.min(m);
        let mut logs = Vec::new();
        while m > 0 && k > 0 {
            let w = &self.ln_w[k];
            if w.len() > 1 {
                let prev = &self.levels[self.level_of[k - 1]];
                logs.clear();
                let j_top = (m / k).min(w.len() - 1);
                for j in 0..=j_top {
                    logs.push(w[j] + prev[m - k * j]);
                }
                let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if top == f64::NEG_INFINITY {
                    return Err(Error::Table(format!("no admissible partition of {m} with parts ≤ {k}")));
                }
                let total: f64 = logs.iter().map(|l| (l - top).exp()).sum();
                let mut v = rng.random::<f64>() * total;
                let mut pick = j_top;
                for (j, l) in logs.iter().enumerate() {
                    let p = (l - top).exp();
                    if v < p {
                        pick = j;
                        break;
                    }
                    v -= p;
                }
                // Rounding can leave v past the last positive cell.
                while (logs[pick] - top).exp() == 0.0 {
                    pick -= 1;
                }
                if pick > 0 {
                    counts.push((k as u64, pick as u64));
                    m -= k * pick;
                }
            }
            k = (k - 1).min(m);
        }
        if m != 0 {
            return Err(Error::Table(format!("residual {m} left after the smallest level")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use num_rational::BigRational;

    use super::*;
    use crate::sampler::RngStream;
    use crate::series::SeriesFunction;
    use crate::weights::{PartSet, WeightRule, WeightSequence};

    fn weighted(y: f64) -> Ensemble<f64> {
        Ensemble::new(
            SeriesFunction::geometric(y).unwrap(),
            WeightSequence::new(WeightRule::Constant(1.0)).unwrap(),
        )
    }

    #[test]
    fn budget_formula() {
        assert_eq!(budget_exponent(1.0), 0.75);
        assert_eq!(default_budget(1.0, 16), 160);
    }

    #[test]
    fn single_part() {
        let e = weighted(1.0);
        let mut rng = RngStream::new(1, 0).rng();
        let r = RejectionSampler::new(&e, 1, Some(10_000)).unwrap();
        for _ in 0..20 {
            assert_eq!(r.sample(&mut rng).unwrap().0.counts(), &[(1, 1)]);
        }
        let x = ExactSampler::new(&e, 1).unwrap();
        assert_eq!(x.sample(&mut rng).unwrap().counts(), &[(1, 1)]);
        assert_eq!(ExactSampler::new(&e, 0).unwrap().sample(&mut rng).unwrap().weight(), 0);
    }

    #[test]
    fn parity_obstruction_exhausts_budget() {
        let e = Ensemble::new(
            SeriesFunction::geometric(1.0).unwrap(),
            WeightSequence::new(WeightRule::Indicator(PartSet::evens())).unwrap(),
        );
        let r = RejectionSampler::new(&e, 7, None).unwrap();
        let err = r.sample(&mut RngStream::new(3, 0).rng()).unwrap_err();
        assert!(matches!(err, Error::BudgetExhausted { attempts, .. } if attempts == default_budget(1.0, 7)));
        assert!(matches!(
            ExactSampler::new(&e, 7).unwrap().sample(&mut RngStream::new(3, 0).rng()),
            Err(Error::Table(_))
        ));
    }

    #[test]
    fn exact_rational_table() {
        let e = weighted(2.0);
        let t: CoefficientTable<BigRational> = coefficients(
            &e,
            5,
            &TableOptions {
                retain_prefix: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(t.render(5), "74");
        let s = ExactSampler::from_table(&e, 5, &t).unwrap();
        let mut rng = RngStream::new(11, 0).rng();
        let m = 40_000;
        let ones = (0..m)
            .filter(|_| s.sample(&mut rng).unwrap().counts() == [(1, 5)])
            .count() as f64
            / m as f64;
        let p = 32.0 / 74.0;
        assert!((ones - p).abs() < 5.0 * (p * (1.0 - p) / m as f64).sqrt(), "{ones}");
    }

    #[test]
    fn divide_and_conquer_matches_full_table() {
        let e = weighted(1.0);
        let n = 300;
        let full = ExactSampler::new(&e, n).unwrap();
        let dc = ExactSampler::divide_and_conquer(&e, n).unwrap();
        assert!(dc.table_levels() < n);
        let m = 4000;
        let parts = |s: &ExactSampler, seed| {
            let mut rng = RngStream::new(seed, 0).rng();
            (0..m).map(|_| s.sample(&mut rng).unwrap().num_parts() as f64).sum::<f64>() / m as f64
        };
        let (a, b) = (parts(&full, 5), parts(&dc, 6));
        // Number of parts of a uniform partition of 300 has sd ≈ 10.
        assert!((a - b).abs() < 5.0 * 10.0 * (2.0 / m as f64).sqrt(), "{a} vs {b}");
    }
}

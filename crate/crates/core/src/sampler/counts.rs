//! Count laws `P(R_k = j) ∝ [z^j] f(z)^{b_k} · x^{kj}` and the grand-canonical
//! sampler built from them.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use super::Partition;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::SeriesKind;

/// Tail mass at which custom count laws are truncated.
pub const CUSTOM_TAIL: f64 = 1e-12;
/// Term budget for custom count laws.
pub const CUSTOM_MAX_TERMS: usize = 1_000_000;

#[derive(Clone, Debug)]
pub enum CountLaw {
    Zero,
    /// `P(j) = (1 − q) q^j`, stored as `ln q`.
    Geometric { ln_q: f64 },
    /// Negative binomial with real shape, as a Gamma mixture of Poissons.
    NegativeBinomial { mixing: Gamma<f64> },
    Poisson(Poisson<f64>),
    /// Cumulative probabilities of a truncated law.
    Table(Vec<f64>),
}

impl CountLaw {
    /// Law of `R_k` under `μ_x`.
    pub fn new<T: Real>(e: &Ensemble<T>, k: u64, x: T) -> Result<Self> {
        e.check_x(x)?;
        let b = e.b(k).as_f64();
        let u = (x.ln() * T::lit(k as f64)).exp();
        if b == 0.0 || x == T::zero() || u == T::zero() {
            return Ok(CountLaw::Zero);
        }
        Ok(match e.series().kind() {
            SeriesKind::Geometric { y } => {
                let q = (y.as_f64()) * u.as_f64();
                if q == 0.0 {
                    CountLaw::Zero
                } else if b == 1.0 {
                    CountLaw::Geometric { ln_q: q.ln() }
                } else {
                    let mixing = Gamma::new(b, q / (1.0 - q))
                        .map_err(|err| Error::param(format!("negative binomial law: {err}")))?;
                    CountLaw::NegativeBinomial { mixing }
                }
            }
            SeriesKind::Exponential { rate } => {
                let lambda = b * rate.as_f64() * u.as_f64();
                if lambda == 0.0 {
                    CountLaw::Zero
                } else {
                    CountLaw::Poisson(
                        Poisson::new(lambda)
                            .map_err(|err| Error::param(format!("Poisson law: {err}")))?,
                    )
                }
            }
            SeriesKind::Custom { .. } => custom_law(e, b, u)?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            CountLaw::Zero => 0,
            CountLaw::Geometric { ln_q } => {
                // 1 − U lies in (0, 1].
                let v: f64 = 1.0 - rng.random::<f64>();
                (v.ln() / ln_q).floor() as u64
            }
            CountLaw::NegativeBinomial { mixing } => {
                let lambda = mixing.sample(rng);
                if lambda > 0.0 {
                    Poisson::new(lambda).map(|p| p.sample(rng) as u64).unwrap_or(0)
                } else {
                    0
                }
            }
            CountLaw::Poisson(p) => p.sample(rng) as u64,
            CountLaw::Table(cdf) => {
                let v: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
                cdf.partition_point(|c| *c <= v) as u64
            }
        }
    }
}

fn custom_law<T: Real>(e: &Ensemble<T>, b: f64, u: T) -> Result<CountLaw> {
    let total = (T::lit(b) * e.series().ln_value(u)?).exp().as_f64();
    let fu = e.series().dilated(u);
    let mut j_max = 16usize;
    loop {
        let w = fu.power_coefficients(T::lit(b), j_max)?;
        let mut cdf = Vec::with_capacity(w.len());
        let mut acc = 0.0;
        for c in &w {
            acc += c.as_f64();
            cdf.push(acc);
        }
        if 1.0 - acc / total < CUSTOM_TAIL {
            return Ok(CountLaw::Table(cdf));
        }
        if j_max >= CUSTOM_MAX_TERMS {
            return Err(Error::Tail { terms: j_max });
        }
        j_max = (j_max * 4).min(CUSTOM_MAX_TERMS);
    }
}

/// One draw of `R_k` under `μ_x`.
pub fn sample_count<T: Real, R: Rng + ?Sized>(e: &Ensemble<T>, k: u64, x: T, rng: &mut R) -> Result<u64> {
    Ok(CountLaw::new(e, k, x)?.sample(rng))
}

/// Independent count laws for `k = 1..=K*`, where the union bound on any
/// larger part appearing is below the ensemble's `grand_tail`.
#[derive(Clone, Debug)]
pub struct GrandCanonical {
    pub x: f64,
    pub k_star: u64,
    laws: Vec<CountLaw>,
}

impl GrandCanonical {
    pub fn new<T: Real>(e: &Ensemble<T>, x: T) -> Result<Self> {
        let k_star = e.grand_cutoff(x, T::lit(e.numerics().grand_tail))?;
        Self::with_range(e, x, 1, k_star)
    }

    /// Laws for `k = lo..=K*` only; smaller sizes are left to the caller.
    pub fn with_range<T: Real>(e: &Ensemble<T>, x: T, lo: u64, k_star: u64) -> Result<Self> {
        let mut laws = vec![CountLaw::Zero; lo.saturating_sub(1) as usize];
        for k in lo.max(1)..=k_star {
            laws.push(CountLaw::new(e, k, x)?);
        }
        Ok(Self {
            x: x.as_f64(),
            k_star,
            laws,
        })
    }

    pub fn law(&self, k: u64) -> Option<&CountLaw> {
        self.laws.get((k as usize).checked_sub(1)?)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Partition {
        let mut counts = Vec::new();
        for (i, law) in self.laws.iter().enumerate() {
            let r = law.sample(rng);
            if r > 0 {
                counts.push((i as u64 + 1, r));
            }
        }
        Partition::from_sorted(counts)
    }

    /// Draws the counts from `K*` downwards, stopping as soon as the weight
    /// exceeds `limit`. Returns the counts and their weight, or `None` on
    /// overshoot.
    pub fn sample_bounded<R: Rng + ?Sized>(&self, rng: &mut R, limit: u64) -> Option<(Vec<(u64, u64)>, u64)> {
        let mut counts = Vec::new();
        let mut weight = 0u64;
        for (i, law) in self.laws.iter().enumerate().rev() {
            let r = law.sample(rng);
            if r > 0 {
                let k = i as u64 + 1;
                weight = weight.checked_add(k.checked_mul(r)?)?;
                if weight > limit {
                    return None;
                }
                counts.push((k, r));
            }
        }
        counts.reverse();
        Some((counts, weight))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::RngStream;
    use crate::series::{SeriesFunction, Singularity};
    use crate::weights::{WeightRule, WeightSequence};

    fn empirical<F: FnMut() -> u64>(mut draw: F, m: usize, cells: usize) -> Vec<f64> {
        let mut h = vec![0.0; cells];
        for _ in 0..m {
            let j = draw() as usize;
            if j < cells {
                h[j] += 1.0;
            }
        }
        h.iter().map(|c| c / m as f64).collect()
    }

    fn check_law(law: &CountLaw, expected: &[f64], seed: u64) {
        let mut rng = RngStream::new(seed, 0).rng();
        let m = 200_000;
        let h = empirical(|| law.sample(&mut rng), m, expected.len());
        for (j, (p, q)) in h.iter().zip(expected).enumerate() {
            let se = (q * (1.0 - q) / m as f64).sqrt();
            assert!((p - q).abs() < 5.0 * se + 1e-12, "cell {j}: {p} vs {q}");
        }
    }

    #[test]
    fn geometric_counts() {
        let e = Ensemble::new(
            SeriesFunction::geometric(1.0).unwrap(),
            WeightSequence::new(WeightRule::Constant(1.0)).unwrap(),
        );
        let law = CountLaw::new(&e, 1, 0.5).unwrap();
        let expected: Vec<f64> = (0..6).map(|j| 0.5 * 0.5f64.powi(j)).collect();
        check_law(&law, &expected, 1);
    }

    #[test]
    fn negative_binomial_counts() {
        // b = 2.5, q = 0.3: P(j) = (1−q)^b Γ(b+j)/(Γ(b) j!) q^j
        let e = Ensemble::new(
            SeriesFunction::geometric(1.0).unwrap(),
            WeightSequence::new(WeightRule::Constant(2.5)).unwrap(),
        );
        let law = CountLaw::new(&e, 1, 0.3).unwrap();
        let mut expected = vec![0.7f64.powf(2.5)];
        for j in 1..8 {
            let prev = expected[j - 1];
            expected.push(prev * 0.3 * (2.5 + j as f64 - 1.0) / j as f64);
        }
        check_law(&law, &expected, 2);
    }

    #[test]
    fn poisson_and_custom_counts() {
        let e = Ensemble::new(
            SeriesFunction::exponential(),
            WeightSequence::new(WeightRule::Constant(1.0)).unwrap(),
        );
        let law = CountLaw::new(&e, 1, 0.7).unwrap();
        let mut expected = vec![(-0.7f64).exp()];
        for j in 1..8 {
            let prev = expected[j - 1];
            expected.push(prev * 0.7 / j as f64);
        }
        check_law(&law, &expected, 3);
        // Same law through the custom path: e^z truncated far past double precision.
        let mut g = vec![1.0];
        for j in 1..40 {
            let prev: f64 = g[j - 1];
            g.push(prev / j as f64);
        }
        let c = Ensemble::new(
            SeriesFunction::custom(g, f64::INFINITY, Singularity::None).unwrap(),
            WeightSequence::new(WeightRule::Constant(1.0)).unwrap(),
        );
        let law = CountLaw::new(&c, 1, 0.7).unwrap();
        assert!(matches!(law, CountLaw::Table(_)));
        check_law(&law, &expected, 4);
    }

    #[test]
    fn zero_tilt_gives_zero() {
        let e = Ensemble::new(
            SeriesFunction::geometric(1.0).unwrap(),
            WeightSequence::new(WeightRule::Constant(1.0)).unwrap(),
        );
        let mut rng = RngStream::new(0, 0).rng();
        assert_eq!(sample_count(&e, 3, 0.0, &mut rng).unwrap(), 0);
        let g = GrandCanonical::new(&e, 0.0).unwrap();
        assert_eq!(g.sample(&mut rng).weight(), 0);
    }
}

//! Young-diagram functionals, concentration of scaled diagrams around the
//! limit shape, and probes of the nonergodic regime.

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{limit_shape_derivative, limit_shape_with, omega, solve_tilt};
use crate::ensemble::{Ensemble, Regime};
use crate::error::{Error, Result};
use crate::sampler::{ExactSampler, Partition, RejectionSampler, RngStream};
use crate::scalar::{format_float, Real};
use crate::series::Singularity;

/// `φ_λ(t) = Σ_{k>t} R_k`, the number of parts strictly larger than `t`.
pub fn young_function(p: &Partition, t: f64) -> u64 {
    p.counts()
        .iter()
        .rev()
        .take_while(|(k, _)| *k as f64 > t)
        .map(|(_, r)| r)
        .sum()
}

/// `∫_0^∞ φ_λ`, summed over the unit steps of the diagram.
pub fn young_integral(p: &Partition) -> u64 {
    (0..p.largest_part()).map(|j| young_function(p, j as f64)).sum()
}

/// `(α/ν) φ_λ(α t)` on the grid.
pub fn scaled_diagram(p: &Partition, alpha: f64, normalizer: f64, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&t| alpha / normalizer * young_function(p, alpha * t) as f64)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SamplerChoice {
    /// Full exact tables up to `n = 2000`, divide-and-conquer above.
    Auto,
    Rejection,
    Exact,
    DivideAndConquer,
}

/// Sampler used by the Monte Carlo experiments.
pub enum SmallSampler {
    Rejection(RejectionSampler),
    Exact(ExactSampler),
}

impl SmallSampler {
    pub fn new<T: Real>(e: &Ensemble<T>, n: u64, choice: SamplerChoice) -> Result<Self> {
        Ok(match choice {
            SamplerChoice::Rejection => SmallSampler::Rejection(RejectionSampler::new(e, n, None)?),
            SamplerChoice::Exact => SmallSampler::Exact(ExactSampler::new(e, n as usize)?),
            SamplerChoice::DivideAndConquer => {
                SmallSampler::Exact(ExactSampler::divide_and_conquer(e, n as usize)?)
            }
            SamplerChoice::Auto if n <= 2000 => SmallSampler::Exact(ExactSampler::new(e, n as usize)?),
            SamplerChoice::Auto => {
                SmallSampler::Exact(ExactSampler::divide_and_conquer(e, n as usize)?)
            }
        })
    }

    pub fn sample(&self, stream: RngStream) -> Result<Partition> {
        let mut rng = stream.rng();
        let p = match self {
            SmallSampler::Rejection(s) => s.sample(&mut rng)?.0,
            SmallSampler::Exact(s) => s.sample(&mut rng)?,
        };
        assert_eq!(young_integral(&p), p.weight(), "diagram area differs from weight");
        Ok(p)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let q = |p: f64| {
            if v.is_empty() {
                return f64::NAN;
            }
            let pos = p * (v.len() - 1) as f64;
            let i = pos.floor() as usize;
            let j = (i + 1).min(v.len() - 1);
            v[i] + (pos - i as f64) * (v[j] - v[i])
        };
        Self {
            min: q(0.0),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            max: q(1.0),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GridPoint {
    pub t: f64,
    pub phi: f64,
    pub hit_fraction: f64,
    /// `|φ'(t)|·Δt < ε/4`, where `Δt` is the grid spacing.
    pub admissible: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConcentrationReport {
    pub ensemble: Option<String>,
    pub n: u64,
    pub replicas: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub alpha: f64,
    pub sampler: SamplerChoice,
    pub points: Vec<GridPoint>,
    pub sup_distance: Quantiles,
    /// Per replica, in stream order.
    pub sup_distances: Vec<f64>,
}

impl ConcentrationReport {
    pub fn min_hit_fraction(&self) -> f64 {
        self.points.iter().map(|p| p.hit_fraction).fold(1.0, f64::min)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// CSV with header `replica,sup_distance`.
    pub fn sup_csv(&self) -> String {
        let mut s = String::from("replica,sup_distance\n");
        for (i, d) in self.sup_distances.iter().enumerate() {
            s.push_str(&format!("{i},{}\n", format_float(*d)));
        }
        s
    }
}

/// Draws `replicas` partitions of `n` (stream index = replica index) and
/// compares `(α/n) φ_λ(α t)` with `φ(t)` on the grid.
pub fn concentration_experiment<T: Real>(
    e: &Ensemble<T>,
    n: u64,
    replicas: usize,
    grid: &[f64],
    epsilon: f64,
    seed: u64,
    choice: SamplerChoice,
) -> Result<ConcentrationReport> {
    if !e.regime().is_ergodic() {
        return Err(Error::Regime {
            regime: e.regime(),
            operation: "concentration_experiment",
        });
    }
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::param("grid points must be positive"));
    }
    let om = omega(e)?;
    let alpha = solve_tilt(e, n)?.alpha().as_f64();
    let phi: Vec<f64> = grid
        .iter()
        .map(|&t| limit_shape_with(e, om, T::lit(t)).map(|v| v.as_f64()))
        .collect::<Result<_>>()?;
    let spacing = grid
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(f64::INFINITY, f64::min);
    let spacing = if spacing.is_finite() { spacing } else { grid[0] };
    let admissible: Vec<bool> = grid
        .iter()
        .map(|&t| {
            limit_shape_derivative(e, om, T::lit(t))
                .map(|d| d.as_f64().abs() * spacing < epsilon / 4.0)
        })
        .collect::<Result<_>>()?;
    let sampler = SmallSampler::new(e, n, choice)?;
    let per_replica: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let p = sampler.sample(RngStream::new(seed, r))?;
            let vals = scaled_diagram(&p, alpha, n as f64, grid);
            Ok(vals.iter().zip(&phi).map(|(a, b)| (a - b).abs()).collect())
        })
        .collect::<Result<_>>()?;
    let points = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| GridPoint {
            t,
            phi: phi[i],
            hit_fraction: per_replica.iter().filter(|d| d[i] < epsilon).count() as f64
                / replicas.max(1) as f64,
            admissible: admissible[i],
        })
        .collect();
    let sup: Vec<f64> = per_replica
        .iter()
        .map(|d| d.iter().cloned().fold(0.0, f64::max))
        .collect();
    Ok(ConcentrationReport {
        ensemble: e.name().map(str::to_owned),
        n,
        replicas,
        epsilon,
        seed,
        alpha,
        sampler: choice,
        points,
        sup_distance: Quantiles::of(&sup),
        sup_distances: sup,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct VarianceRatioReport {
    /// `(x, E_x N² / (E_x N)²)`.
    pub points: Vec<(f64, f64)>,
    /// `(m+1)/m` for a pole of order `m` of `f^{b_1}`.
    pub expected_limit: f64,
    /// `ratio − 1 > 1/2` at every grid point.
    pub nonergodic: bool,
}

/// `E_x N² / (E_x N)²` on a grid below a pole at `ρ₁ < 1`.
pub fn variance_ratio_probe<T: Real>(e: &Ensemble<T>, x_grid: &[f64]) -> Result<VarianceRatioReport> {
    let m = match (e.series().singularity(), e.series().radius() < T::one()) {
        (Singularity::Pole(m), true) if e.regime() == Regime::NonergodicGrandCanonical => {
            m as f64 * e.scale().as_f64()
        }
        _ => {
            return Err(Error::Regime {
                regime: e.regime(),
                operation: "variance_ratio_probe",
            })
        }
    };
    let points: Vec<(f64, f64)> = x_grid
        .iter()
        .map(|&x| {
            let mo = e.moments(T::lit(x))?;
            let (mean, var) = (mo.mean.as_f64(), mo.var.as_f64());
            Ok((x, (var + mean * mean) / (mean * mean)))
        })
        .collect::<Result<_>>()?;
    let nonergodic = !points.is_empty() && points.iter().all(|(_, r)| r - 1.0 > 0.5);
    Ok(VarianceRatioReport {
        points,
        expected_limit: (m + 1.0) / m,
        nonergodic,
    })
}

/// `Σ_{k≥2} k R_k / n`, the share of the weight outside parts of size 1.
pub fn degenerate_statistic(p: &Partition) -> f64 {
    let n = p.weight();
    if n == 0 {
        return 0.0;
    }
    (n - p.count(1)) as f64 / n as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct DegenerateReport {
    pub n: u64,
    pub replicas: usize,
    pub seed: u64,
    pub mean: f64,
    pub quantiles: Quantiles,
    /// The weights are not bounded below, so the degenerate shape is only
    /// conjectured.
    pub conjectural: bool,
}

/// Mean and quantiles of [`degenerate_statistic`] over exact samples of `n`.
pub fn degenerate_shape_probe<T: Real>(
    e: &Ensemble<T>,
    n: u64,
    replicas: usize,
    seed: u64,
) -> Result<DegenerateReport> {
    if e.regime() != Regime::NonergodicGrandCanonical {
        return Err(Error::Regime {
            regime: e.regime(),
            operation: "degenerate_shape_probe",
        });
    }
    let sampler = SmallSampler::new(e, n, SamplerChoice::Auto)?;
    let stats: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| sampler.sample(RngStream::new(seed, r)).map(|p| degenerate_statistic(&p)))
        .collect::<Result<_>>()?;
    Ok(DegenerateReport {
        n,
        replicas,
        seed,
        mean: stats.iter().sum::<f64>() / replicas.max(1) as f64,
        quantiles: Quantiles::of(&stats),
        conjectural: !e.weights().bounded_below(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::SeriesFunction;
    use crate::weights::{WeightRule, WeightSequence};

    #[test]
    fn young_function_values() {
        let p = Partition::from_parts(&[3, 1, 1]).unwrap();
        assert_eq!(young_function(&p, 0.0), 3);
        assert_eq!(young_function(&p, 2.5), 1);
        assert_eq!(young_function(&p, 3.0), 0);
        assert_eq!(young_function(&p, 0.999), 3);
        assert_eq!(young_function(&p, 1.0), 1);
        assert_eq!(young_integral(&p), 5);
    }

    #[test]
    fn scaled_single_part() {
        let n = 100u64;
        let p = Partition::from_parts(&[n]).unwrap();
        let a = (n as f64).sqrt();
        let v = scaled_diagram(&p, a, n as f64, &[0.0, 5.0, 9.99, 10.0]);
        assert_eq!(v, vec![0.1, 0.1, 0.1, 0.0]);
        let q = Partition::from_parts(&[4, 2, 1]).unwrap();
        assert_eq!(scaled_diagram(&q, 1.0, 7.0, &[0.0]), vec![3.0 / 7.0]);
    }

    #[test]
    fn degenerate_statistic_values() {
        assert_eq!(degenerate_statistic(&Partition::from_parts(&[7]).unwrap()), 1.0);
        assert_eq!(degenerate_statistic(&Partition::from_parts(&[1, 1, 1]).unwrap()), 0.0);
    }

    #[test]
    fn quantiles() {
        let q = Quantiles::of(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!((q.min, q.q25, q.median, q.q75, q.max), (1.0, 2.0, 3.0, 4.0, 5.0));
    }

    #[test]
    fn ratio_probe_requires_pole_below_one() {
        let e = Ensemble::new(
            SeriesFunction::geometric(1.0).unwrap(),
            WeightSequence::new(WeightRule::Constant(1.0)).unwrap(),
        );
        assert!(matches!(variance_ratio_probe(&e, &[0.5]), Err(Error::Regime { .. })));
        let w = Ensemble::new(
            SeriesFunction::geometric(2.0).unwrap(),
            WeightSequence::new(WeightRule::Constant(1.0)).unwrap(),
        );
        let r = variance_ratio_probe(&w, &[0.4, 0.49, 0.5 * (1.0 - 1e-4)]).unwrap();
        assert!(r.nonergodic);
        assert_eq!(r.expected_limit, 2.0);
        let last = r.points.last().unwrap().1;
        assert!((last - 2.0).abs() < 0.1, "{last}");
    }
}

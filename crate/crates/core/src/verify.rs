//! Acceptance checks with independent oracles.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::asymptotics::{limit_shape, omega, shape_curve, solve_tilt, symmetric_rescale};
use crate::catalog::{self, CatalogName};
use crate::diagnostics::{concentration_experiment, degenerate_shape_probe, variance_ratio_probe, SamplerChoice};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::partition_function::{coefficients, local_limit_probe, point_masses, ExactTable, FloatTable, Scale, TableOptions};
use crate::sampler::{ExactSampler, GrandCanonical, Partition, RejectionSampler, RngStream};
use crate::weights::{check_condition_10, PartSet, WeightRule, WeightSequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Criterion {
    Coefficients,
    Omega,
    Shapes,
    Tilt,
    Moments,
    SmallCanonical,
    LocalLimit,
    Concentration,
    VarianceRatio,
    DegenerateShape,
    PointMassFloor,
    Condition10,
}

impl Criterion {
    pub const ALL: [Criterion; 12] = [
        Criterion::Coefficients,
        Criterion::Omega,
        Criterion::Shapes,
        Criterion::Tilt,
        Criterion::Moments,
        Criterion::SmallCanonical,
        Criterion::LocalLimit,
        Criterion::Concentration,
        Criterion::VarianceRatio,
        Criterion::DegenerateShape,
        Criterion::PointMassFloor,
        Criterion::Condition10,
    ];

    pub fn number(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).expect("listed") + 1
    }

    /// Suite name accepted by `verify`.
    pub fn suite(self) -> &'static str {
        match self {
            Criterion::Coefficients => "coefficients",
            Criterion::Omega => "omega",
            Criterion::Shapes => "shapes",
            Criterion::Tilt => "tilt",
            Criterion::Moments => "moments",
            Criterion::SmallCanonical => "small-canonical",
            Criterion::LocalLimit => "local-limit",
            Criterion::Concentration => "concentration",
            Criterion::VarianceRatio => "variance-ratio",
            Criterion::DegenerateShape => "degenerate-shape",
            Criterion::PointMassFloor => "point-mass-floor",
            Criterion::Condition10 => "condition-10",
        }
    }

    pub fn from_suite(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.suite() == name)
    }

    fn time_limit(self) -> Option<Duration> {
        match self {
            Criterion::Coefficients => Some(Duration::from_secs(5)),
            Criterion::Moments => Some(Duration::from_secs(10)),
            Criterion::LocalLimit => Some(Duration::from_secs(60)),
            Criterion::Concentration => Some(Duration::from_secs(300)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Overrides the problem size of the concentration and point-mass checks.
    pub n: Option<u64>,
    /// Replaces the catalog entries of the concentration check.
    pub ensemble: Option<Ensemble<f64>>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 20240601,
            n: None,
            ensemble: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub criterion: usize,
    pub suite: &'static str,
    pub passed: bool,
    pub seconds: f64,
    pub details: Vec<String>,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} {:<17} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.suite,
            self.seconds
        )
    }
}

struct Log {
    ok: bool,
    details: Vec<String>,
}

impl Log {
    fn new() -> Self {
        Self {
            ok: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        let msg = msg.into();
        self.details.push(format!("{} {msg}", if ok { "ok  " } else { "fail" }));
        self.ok &= ok;
    }
}

/// Runs one criterion. Numerical errors are reported as failures.
pub fn run(c: Criterion, opts: &VerifyOptions) -> CheckResult {
    let start = Instant::now();
    let mut log = Log::new();
    let outcome = match c {
        Criterion::Coefficients => coefficients_check(&mut log),
        Criterion::Omega => omega_check(&mut log),
        Criterion::Shapes => shapes_check(&mut log),
        Criterion::Tilt => tilt_check(&mut log),
        Criterion::Moments => moments_check(&mut log, opts),
        Criterion::SmallCanonical => small_canonical_check(&mut log, opts),
        Criterion::LocalLimit => local_limit_check(&mut log),
        Criterion::Concentration => concentration_check(&mut log, opts),
        Criterion::VarianceRatio => variance_ratio_check(&mut log),
        Criterion::DegenerateShape => degenerate_check(&mut log, opts),
        Criterion::PointMassFloor => point_mass_floor_check(&mut log, opts),
        Criterion::Condition10 => condition_10_check(&mut log),
    };
    if let Err(e) = outcome {
        log.check(false, format!("error: {e}"));
    }
    let elapsed = start.elapsed();
    if let Some(limit) = c.time_limit() {
        log.check(
            elapsed <= limit,
            format!("runtime {:.2}s within {}s", elapsed.as_secs_f64(), limit.as_secs()),
        );
    }
    CheckResult {
        criterion: c.number(),
        suite: c.suite(),
        passed: log.ok,
        seconds: elapsed.as_secs_f64(),
        details: log.details,
    }
}

/// Partition numbers by Euler's pentagonal recurrence.
pub fn pentagonal_partition_numbers(n: usize) -> Vec<BigInt> {
    let mut p = vec![BigInt::zero(); n + 1];
    p[0] = BigInt::one();
    for m in 1..=n {
        let mut acc = BigInt::zero();
        for j in 1.. {
            let g1 = j * (3 * j - 1) / 2;
            if g1 > m {
                break;
            }
            let g2 = j * (3 * j + 1) / 2;
            let mut term = p[m - g1].clone();
            if g2 <= m {
                term += &p[m - g2];
            }
            if j % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        p[m] = acc;
    }
    p
}

/// All partitions of `n`, parts nonincreasing.
pub fn enumerate_partitions(n: u64) -> Vec<Vec<u64>> {
    fn rec(rest: u64, max: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        for k in (1..=max.min(rest)).rev() {
            cur.push(k);
            rec(rest - k, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

fn coefficients_check(log: &mut Log) -> Result<()> {
    let e = catalog::make::<f64>(&CatalogName::Uniform)?;
    let table: ExactTable = coefficients(&e, 500, &TableOptions::default())?;
    let p = pentagonal_partition_numbers(500);
    let bad = (0..=500)
        .filter(|&m| table.scaled()[m] != BigRational::from_integer(p[m].clone()))
        .count();
    log.check(bad == 0, format!("a_n = p(n) for n ≤ 500 ({bad} mismatches), p(500) = {}", p[500]));
    let enum_bad = (0..=30)
        .filter(|&m| BigInt::from(enumerate_partitions(m as u64).len()) != p[m])
        .count();
    log.check(enum_bad == 0, format!("enumeration agrees for n ≤ 30 ({enum_bad} mismatches)"));
    Ok(())
}

fn omega_check(log: &mut Log) -> Result<()> {
    let u = omega(&catalog::make::<f64>(&CatalogName::Uniform)?)?;
    let target = PI * PI / 6.0;
    log.check((u - target).abs() <= 1e-8, format!("Ω(uniform) = {u:.15}, π²/6 = {target:.15}"));
    let w = omega(&catalog::make::<f64>(&CatalogName::Weighted { y: 0.5 })?)?;
    let li = dilog_half_oracle();
    log.check((w - li).abs() <= 1e-8, format!("Ω(weighted(0.5)) = {w:.15}, Li₂(1/2) = {li:.15}"));
    Ok(())
}

/// `Li₂(1/2)` by direct summation.
fn dilog_half_oracle() -> f64 {
    (1..200).map(|j| 0.5f64.powi(j) / (j as f64 * j as f64)).sum()
}

fn shapes_check(log: &mut Log) -> Result<()> {
    let u = catalog::make::<f64>(&CatalogName::Uniform)?;
    let g = catalog::make::<f64>(&CatalogName::Gibbs { theta: 1.0, beta: 1.0 })?;
    let mut worst_u = 0.0f64;
    let mut worst_g = 0.0f64;
    for t in [0.1, 0.5, 1.0, 2.0, 4.0] {
        let closed = -6.0 / (PI * PI) * (1.0 - (-t as f64).exp()).ln();
        worst_u = worst_u.max((limit_shape(&u, t)? - closed).abs());
        worst_g = worst_g.max((limit_shape(&g, t)? - (-t as f64).exp()).abs());
    }
    log.check(worst_u <= 1e-6, format!("uniform closed form, max error {worst_u:.2e}"));
    log.check(worst_g <= 1e-6, format!("gibbs(1,1) = e^(-t), max error {worst_g:.2e}"));
    let curve = shape_curve(&u, 5.0, 50)?;
    let c = PI / 6f64.sqrt();
    let worst = symmetric_rescale(&curve.grid, curve.omega)
        .iter()
        .map(|(s, psi)| ((-c * psi).exp() + (-c * s).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    log.check(worst <= 1e-6, format!("rescaled uniform: |e^(-cφ) + e^(-ct) - 1| ≤ {worst:.2e}"));
    Ok(())
}

fn tilt_check(log: &mut Log) -> Result<()> {
    for entry in catalog::standard_entries() {
        let e = catalog::make::<f64>(&entry)?;
        if !e.regime().is_ergodic() {
            continue;
        }
        let om = omega(&e)?;
        for n in [100u64, 10_000, 1_000_000] {
            let start = Instant::now();
            let s = solve_tilt(&e, n)?;
            let secs = start.elapsed().as_secs_f64();
            let resid = (s.mean - n as f64).abs();
            log.check(
                resid <= 1e-10 * n as f64 && secs < 1.0,
                format!("{} n={n}: residual {resid:.2e}, {secs:.3}s", entry.label()),
            );
            if n == 1_000_000 {
                let beta = e.beta();
                let r = s.tau * (n as f64 / (om * e.theta())).powf(1.0 / (beta + 1.0));
                log.check(
                    (0.95..=1.05).contains(&r),
                    format!("{} τ_n (n/Ωθ)^(1/(β+1)) = {r:.4}", entry.label()),
                );
            }
        }
    }
    Ok(())
}

/// Sample mean and variance with their standard errors.
pub fn mean_variance_with_errors(values: &[f64]) -> (f64, f64, f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let c2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    let c4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / m;
    let var = c2 * m / (m - 1.0);
    (mean, (var / m).sqrt(), var, ((c4 - c2 * c2) / m).sqrt())
}

fn moments_check(log: &mut Log, opts: &VerifyOptions) -> Result<()> {
    let e = catalog::make::<f64>(&CatalogName::Uniform)?;
    let x = 0.9;
    let g = GrandCanonical::new(&e, x)?;
    let mut rng = RngStream::new(opts.seed, 0).rng();
    let draws: Vec<f64> = (0..10_000).map(|_| g.sample(&mut rng).weight() as f64).collect();
    let (mean, se_mean, var, se_var) = mean_variance_with_errors(&draws);
    let oracle = oracle_moments(x);
    log.check(
        (mean - oracle.0).abs() <= 3.0 * se_mean,
        format!("mean {mean:.3} vs {:.3} (se {se_mean:.3})", oracle.0),
    );
    log.check(
        (var - oracle.1).abs() <= 3.0 * se_var,
        format!("variance {var:.2} vs {:.2} (se {se_var:.2})", oracle.1),
    );
    Ok(())
}

/// Mean and variance of `N` for the uniform ensemble: `Σ k x^k/(1−x^k)` and
/// `Σ k² x^k/(1−x^k)²`.
fn oracle_moments(x: f64) -> (f64, f64) {
    let (mut m, mut v) = (0.0, 0.0);
    for k in 1..5000 {
        let u = x.powi(k);
        m += k as f64 * u / (1.0 - u);
        v += (k * k) as f64 * u / ((1.0 - u) * (1.0 - u));
    }
    (m, v)
}

fn chi_square_p(observed: &[f64], expected: &[f64]) -> f64 {
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    ChiSquared::new((observed.len() - 1) as f64)
        .expect("df ≥ 1")
        .sf(stat)
}

fn two_sample_p(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let mut stat = 0.0;
    let mut cells = 0;
    for (x, y) in a.iter().zip(b) {
        let tot = x + y;
        if tot == 0.0 {
            continue;
        }
        cells += 1;
        let ea = tot * na / (na + nb);
        let eb = tot * nb / (na + nb);
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    ChiSquared::new((cells - 1) as f64).expect("df ≥ 1").sf(stat)
}

/// Histogram of draws over the partitions of `n`.
fn histogram(cells: &HashMap<Partition, usize>, draws: impl Iterator<Item = Result<Partition>>) -> Result<Vec<f64>> {
    let mut h = vec![0.0; cells.len()];
    for d in draws {
        let p = d?;
        let i = cells
            .get(&p)
            .ok_or_else(|| Error::Table(format!("draw of weight {} outside the cells", p.weight())))?;
        h[*i] += 1.0;
    }
    Ok(h)
}

fn small_canonical_check(log: &mut Log, opts: &VerifyOptions) -> Result<()> {
    let n = 5u64;
    let parts = enumerate_partitions(n);
    let cells: HashMap<Partition, usize> = parts
        .iter()
        .enumerate()
        .map(|(i, p)| (Partition::from_parts(p).expect("positive parts"), i))
        .collect();
    let draws = 70_000usize;
    for (entry, y) in [(CatalogName::Uniform, 1.0), (CatalogName::Weighted { y: 2.0 }, 2.0f64)] {
        let e = catalog::make::<f64>(&entry)?;
        let weights: Vec<f64> = parts.iter().map(|p| y.powi(p.len() as i32)).collect();
        let total: f64 = weights.iter().sum();
        let expected: Vec<f64> = weights.iter().map(|w| w / total * draws as f64).collect();
        let exact = ExactSampler::new(&e, n as usize)?;
        let mut rng = RngStream::new(opts.seed, 1).rng();
        let h = histogram(&cells, (0..draws).map(|_| exact.sample(&mut rng)))?;
        let p = chi_square_p(&h, &expected);
        log.check(p > 0.01, format!("{} exact sampler vs enumeration: p = {p:.3}", entry.label()));
        let rej = RejectionSampler::new(&e, n, Some(1_000_000))?;
        let mut rng = RngStream::new(opts.seed, 2).rng();
        let m = 20_000;
        let hr = histogram(&cells, (0..m).map(|_| rej.sample(&mut rng).map(|(p, _)| p)))?;
        let mut rng = RngStream::new(opts.seed, 3).rng();
        let he = histogram(&cells, (0..m).map(|_| exact.sample(&mut rng)))?;
        let p2 = two_sample_p(&he, &hr);
        log.check(p2 > 0.01, format!("{} exact vs rejection two-sample: p = {p2:.3}", entry.label()));
    }
    Ok(())
}

fn local_limit_check(log: &mut Log) -> Result<()> {
    let e = catalog::make::<f64>(&CatalogName::Uniform)?;
    for pt in local_limit_probe(&e, 0.99, &[-1.0, 0.0, 1.0])? {
        let rel = (pt.scaled_mass / pt.gaussian - 1.0).abs();
        log.check(
            rel <= 0.10,
            format!("u = {}: √Var·μ(m={}) = {:.5}, Gaussian {:.5} ({:.1}%)", pt.u, pt.m, pt.scaled_mass, pt.gaussian, 100.0 * rel),
        );
    }
    Ok(())
}

pub const CONCENTRATION_GRID: [f64; 12] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0];

fn concentration_check(log: &mut Log, opts: &VerifyOptions) -> Result<()> {
    let runs: Vec<(Ensemble<f64>, u64)> = match &opts.ensemble {
        Some(e) => vec![(e.clone(), opts.n.unwrap_or(40_000))],
        None => vec![
            (catalog::make(&CatalogName::Uniform)?, opts.n.unwrap_or(40_000)),
            (catalog::make(&CatalogName::Gibbs { theta: 1.0, beta: 1.0 })?, opts.n.unwrap_or(10_000)),
        ],
    };
    for (e, n) in runs {
        let r = concentration_experiment(&e, n, 100, &CONCENTRATION_GRID, 0.05, opts.seed, SamplerChoice::Auto)?;
        let name = e.name().unwrap_or("ensemble").to_owned();
        for p in &r.points {
            log.check(
                p.hit_fraction >= 0.9,
                format!("{name} n={n} t={}: hit fraction {:.2}{}", p.t, p.hit_fraction, if p.admissible { "" } else { " (steep)" }),
            );
        }
        log.details.push(format!("     {name} sup distance median {:.4}", r.sup_distance.median));
    }
    Ok(())
}

fn variance_ratio_check(log: &mut Log) -> Result<()> {
    let e = catalog::make::<f64>(&CatalogName::Weighted { y: 2.0 })?;
    let x = e.rho() * (1.0 - 1e-4);
    let r = variance_ratio_probe(&e, &[x])?;
    let ratio = r.points[0].1;
    log.check(
        (ratio / 2.0 - 1.0).abs() <= 0.05,
        format!("E N²/(E N)² = {ratio:.5} at ρ - x = 1e-4 ρ"),
    );
    Ok(())
}

fn degenerate_check(log: &mut Log, opts: &VerifyOptions) -> Result<()> {
    let e = catalog::make::<f64>(&CatalogName::Weighted { y: 2.0 })?;
    let small = degenerate_shape_probe(&e, 200, 200, opts.seed)?;
    let large = degenerate_shape_probe(&e, 2000, 200, opts.seed)?;
    log.check(large.mean < 0.05, format!("mean statistic at n = 2000: {:.5}", large.mean));
    log.check(
        large.mean < small.mean,
        format!("decreasing: {:.5} (n = 200) > {:.5} (n = 2000)", small.mean, large.mean),
    );
    Ok(())
}

/// `μ_{x_n}{N = n}` from a float table long enough to hold the mass.
pub fn point_mass_at_tilt(e: &Ensemble<f64>, n: u64) -> Result<f64> {
    let s = solve_tilt(e, n)?;
    let len = (s.mean + 12.0 * s.variance.sqrt()).ceil() as usize + 16;
    let table: FloatTable = coefficients(
        e,
        len,
        &TableOptions {
            scale: Scale::Fixed(s.x),
            ..Default::default()
        },
    )?;
    Ok(point_masses(e, s.x, &table)?.masses[n as usize])
}

fn point_mass_floor_check(log: &mut Log, opts: &VerifyOptions) -> Result<()> {
    let e = catalog::make::<f64>(&CatalogName::Uniform)?;
    let beta = e.beta();
    let gamma = (beta + 2.0) / (2.0 * beta + 2.0) + 0.1;
    let ns: Vec<u64> = match opts.n {
        Some(n) => vec![n],
        None => vec![100, 500, 1000],
    };
    for n in ns {
        let p = point_mass_at_tilt(&e, n)?;
        let floor = (n as f64).powf(-gamma);
        log.check(p >= floor, format!("n = {n}: μ(N = n) = {p:.5e}, n^-γ = {floor:.5e}"));
    }
    Ok(())
}

fn condition_10_check(log: &mut Log) -> Result<()> {
    let c = WeightSequence::new(WeightRule::Constant(1.0))?;
    let r = check_condition_10(&c, 10.0, 10_000)?;
    log.check(
        r.worst_ratio <= 0.51,
        format!("constant weights: worst ratio {:.4} at s = {}", r.worst_ratio, r.worst_s),
    );
    let ev = WeightSequence::<f64>::new(WeightRule::Indicator(PartSet::evens()))?;
    let r = check_condition_10(&ev, 10.0, 10_000)?;
    let at2 = r.per_s.iter().find(|p| p.s == 2.0).expect("s = 2 on grid");
    log.check(
        at2.worst_ratio >= 1.0 - 1e-12,
        format!("evens: ratio {:.4} at s = 2 (no χ < 1 works)", at2.worst_ratio),
    );
    Ok(())
}

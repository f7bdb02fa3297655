//! Ensembles `F(x) = Π_k f(x^k)^{b_k}` and the moments of the total weight `N`
//! under the grand-canonical measure `μ_x`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureOptions;
use crate::scalar::{CompensatedSum, Real};
use crate::series::{SeriesFunction, SeriesKind, Singularity};
use crate::weights::WeightSequence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `ρ₁ > 1`.
    ErgodicSupercritical,
    /// `ρ₁ = 1` with a pole.
    ErgodicPoleAtOne,
    /// `ρ₁ < 1` with a pole.
    NonergodicGrandCanonical,
    /// `ρ₁ < 1` with an essential singularity.
    EssentialSubcritical,
    /// `b_1 = 0`, `β ≤ 0`, or a singularity type not covered.
    OutOfScope,
}

impl Regime {
    pub fn is_ergodic(self) -> bool {
        matches!(self, Regime::ErgodicSupercritical | Regime::ErgodicPoleAtOne)
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::ErgodicSupercritical => "ErgodicSupercritical",
            Regime::ErgodicPoleAtOne => "ErgodicPoleAtOne",
            Regime::NonergodicGrandCanonical => "NonergodicGrandCanonical",
            Regime::EssentialSubcritical => "EssentialSubcritical",
            Regime::OutOfScope => "OutOfScope",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tolerances and cutoffs shared by the numerical routines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Relative tail bound at which the moment sums stop.
    pub sum_rel_tol: f64,
    /// Hard cap on the number of terms in any `k`-sum.
    pub max_terms: u64,
    /// Iteration cap of the tilt solver.
    pub tilt_max_iter: usize,
    /// Target residual of the tilt solver, relative to `n`.
    pub tilt_rel_tol: f64,
    pub quad_abs_tol: f64,
    pub quad_rel_tol: f64,
    pub quad_max_intervals: usize,
    /// Width of the interval near `v = 0` where the pole part of the shape
    /// integrand is integrated analytically.
    pub singular_cutoff: f64,
    /// Union bound on the probability that a grand-canonical draw has a part
    /// beyond the sampled range.
    pub grand_tail: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            sum_rel_tol: 1e-14,
            max_terms: 100_000_000,
            tilt_max_iter: 200,
            tilt_rel_tol: 1e-10,
            quad_abs_tol: 1e-13,
            quad_rel_tol: 1e-12,
            quad_max_intervals: 4000,
            singular_cutoff: 1e-3,
            grand_tail: 1e-9,
        }
    }
}

impl Numerics {
    pub fn quadrature(&self) -> QuadratureOptions {
        QuadratureOptions {
            abs_tol: self.quad_abs_tol,
            rel_tol: self.quad_rel_tol,
            max_intervals: self.quad_max_intervals,
        }
    }
}

/// Mean and variance of `N` under `μ_x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments<T> {
    pub mean: T,
    pub var: T,
    /// Number of `k` terms summed.
    pub terms: u64,
}

#[derive(Clone, Debug)]
pub struct Ensemble<T> {
    name: Option<String>,
    f: SeriesFunction<T>,
    weights: WeightSequence<T>,
    numerics: Numerics,
    scale: T,
    regime: Regime,
}

impl<T: Real> Ensemble<T> {
    pub fn new(f: SeriesFunction<T>, weights: WeightSequence<T>) -> Self {
        let b1 = weights.b(1);
        let scale = if b1 > T::zero() { b1 } else { T::one() };
        let regime = classify_regime(&f, &weights);
        Self {
            name: None,
            f,
            weights,
            numerics: Numerics::default(),
            scale,
            regime,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_numerics(mut self, numerics: Numerics) -> Self {
        self.numerics = numerics;
        self
    }

    /// Forces a regime tag (used for catalog entries known to sit outside the
    /// ergodic theory).
    pub(crate) fn with_regime(mut self, regime: Regime) -> Self {
        self.regime = regime;
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn series(&self) -> &SeriesFunction<T> {
        &self.f
    }

    pub fn weights(&self) -> &WeightSequence<T> {
        &self.weights
    }

    pub fn numerics(&self) -> &Numerics {
        &self.numerics
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// `b_1`, the power moved into `f` when normalising to `b_1 = 1`.
    pub fn scale(&self) -> T {
        self.scale
    }

    /// The same measure written with `b_1 = 1`: `f ↦ f^{b_1}`, `b_k ↦ b_k/b_1`.
    /// Returns the rescaled weights; `h` of the rescaled `f` is
    /// [`normalized_h_factor`](Self::normalized_h_factor) times the original.
    pub fn normalized_weights(&self) -> WeightSequence<T> {
        self.weights.divided_by(self.scale)
    }

    pub fn normalized_h_factor(&self) -> T {
        self.scale
    }

    /// Declared `β`.
    pub fn beta(&self) -> T {
        self.weights.declared().beta
    }

    /// Declared `θ` after normalising to `b_1 = 1`.
    pub fn theta(&self) -> T {
        self.weights.declared().theta / self.scale
    }

    /// `ρ = min(ρ₁, 1)`, the radius of convergence of `F`.
    pub fn rho(&self) -> T {
        self.f.radius().min(T::one())
    }

    pub fn pole_order(&self) -> Option<u32> {
        match self.f.singularity() {
            Singularity::Pole(m) => Some(m),
            _ => None,
        }
    }

    pub fn b(&self, k: u64) -> T {
        self.weights.b(k)
    }

    pub fn check_x(&self, x: T) -> Result<()> {
        if !(x >= T::zero()) {
            return Err(Error::domain(format!("x = {x} is negative")));
        }
        if !(x < self.rho()) {
            return Err(Error::domain(format!(
                "x = {x} is not below the radius of convergence {}",
                self.rho()
            )));
        }
        Ok(())
    }

    pub fn mean_n(&self, x: T) -> Result<T> {
        Ok(self.moments(x)?.mean)
    }

    pub fn var_n(&self, x: T) -> Result<T> {
        Ok(self.moments(x)?.var)
    }

    /// `E_x N = Σ k b_k x^k h(x^k)` and
    /// `Var_x N = Σ k² b_k (x^k h(x^k) + x^{2k} h'(x^k))`.
    pub fn moments(&self, x: T) -> Result<Moments<T>> {
        self.check_x(x)?;
        if x == T::zero() {
            return Ok(Moments {
                mean: T::zero(),
                var: T::zero(),
                terms: 0,
            });
        }
        let lnx = x.ln();
        if -lnx * T::lit(self.numerics.max_terms as f64) < T::one() {
            return Err(Error::Convergence {
                iterations: 0,
                residual: f64::NAN,
            });
        }
        let (c, p) = self.weights.growth_bound();
        let rel = self.rel_tol();
        let mut mean = CompensatedSum::new();
        let mut var = CompensatedSum::new();
        let mut k = 1u64;
        loop {
            let kf = T::lit(k as f64);
            let u = (lnx * kf).exp();
            let b = self.weights.b(k);
            if b > T::zero() {
                let d = self.f.eval_with_derivatives(u)?;
                let uh = u * d.h;
                mean.add(kf * b * uh);
                var.add(kf * kf * b * (uh + u * u * d.dh));
            }
            if self.tail_check_due(u, k) {
                let (f1, f2, q) = self.derivative_bounds(lnx, k)?;
                let tm = tail_power_sum(x, lnx, k, p + T::one());
                let tv = tail_power_sum(x, lnx, k, p + T::lit(2.0));
                if let (Some(tm), Some(tv)) = (tm, tv) {
                    let floor = T::min_positive_value();
                    if c * f1 * tm <= rel * mean.value() + floor
                        && c * (f1 + q * f2) * tv <= rel * var.value() + floor
                    {
                        return Ok(Moments {
                            mean: mean.value(),
                            var: var.value(),
                            terms: k,
                        });
                    }
                }
            }
            k += 1;
            if k > self.numerics.max_terms {
                return Err(Error::Convergence {
                    iterations: k as usize,
                    residual: f64::NAN,
                });
            }
        }
    }

    /// `ln F(x) = Σ b_k ln f(x^k)`, with absolute error below `~1e-15`.
    pub fn ln_partition_function(&self, x: T) -> Result<T> {
        self.check_x(x)?;
        if x == T::zero() {
            return Ok(T::zero());
        }
        let lnx = x.ln();
        let (c, p) = self.weights.growth_bound();
        let tol = self.rel_tol() * T::lit(0.1);
        let mut s = CompensatedSum::new();
        let mut k = 1u64;
        loop {
            let u = (lnx * T::lit(k as f64)).exp();
            let b = self.weights.b(k);
            if b > T::zero() {
                s.add(b * self.f.ln_value(u)?);
            }
            if self.tail_check_due(u, k) {
                let (f1, _, _) = self.derivative_bounds(lnx, k)?;
                if let Some(t) = tail_power_sum(x, lnx, k, p) {
                    if c * f1 * t <= tol * s.value().max(T::one()) {
                        return Ok(s.value());
                    }
                }
            }
            k += 1;
            if k > self.numerics.max_terms {
                return Err(Error::Convergence {
                    iterations: k as usize,
                    residual: f64::NAN,
                });
            }
        }
    }

    /// Smallest `K` with `Σ_{k>K} b_k (f(x^k) − 1) < tol`, the union bound on
    /// a grand-canonical draw having any part larger than `K`.
    pub fn grand_cutoff(&self, x: T, tol: T) -> Result<u64> {
        self.check_x(x)?;
        if x == T::zero() {
            return Ok(0);
        }
        let lnx = x.ln();
        let (c, p) = self.weights.growth_bound();
        let mut k = 1u64;
        loop {
            let u = (lnx * T::lit(k as f64)).exp();
            if self.tail_check_due(u, k) || u < self.rho() * T::lit(0.5) {
                let (f1, _, _) = self.derivative_bounds(lnx, k)?;
                if let Some(t) = tail_power_sum(x, lnx, k, p) {
                    if c * f1 * t < tol {
                        return Ok(k);
                    }
                }
            }
            k += 1;
            if k > self.numerics.max_terms {
                return Err(Error::Convergence {
                    iterations: k as usize,
                    residual: f64::NAN,
                });
            }
        }
    }

    fn rel_tol(&self) -> T {
        T::lit(self.numerics.sum_rel_tol).max(T::epsilon() * T::lit(4.0))
    }

    /// Tail bounds need `x^{k+1}` well inside the disk; checking is cheap
    /// but not free, so it runs on a sparse schedule once that holds.
    fn tail_check_due(&self, u: T, k: u64) -> bool {
        u < T::lit(0.5) * self.rho() && (k < 64 || k % 16 == 0)
    }

    /// `f'(q)`, `f''(q)` and `q = x^{k+1}`; every `u ≤ q` has
    /// `u h(u) ≤ u f'(q)` and `(u h)'(u) ≤ f'(q) + q f''(q)`.
    fn derivative_bounds(&self, lnx: T, k: u64) -> Result<(T, T, T)> {
        let q = (lnx * T::lit((k + 1) as f64)).exp();
        let d = self.f.eval_with_derivatives(q)?;
        let f1 = d.f * d.h;
        let f2 = d.f * (d.dh + d.h * d.h);
        Ok((f1, f2, q))
    }
}

/// Upper bound on `Σ_{j>k} j^s x^j`, valid once the ratio of consecutive
/// terms at `j = k+1` is below one (the ratio decreases in `j`).
pub(crate) fn tail_power_sum<T: Real>(x: T, lnx: T, k: u64, s: T) -> Option<T> {
    let k1 = T::lit((k + 1) as f64);
    let k2 = T::lit((k + 2) as f64);
    let first = (s * k1.ln() + lnx * k1).exp();
    let ratio = x * (k2 / k1).powf(s);
    (ratio < T::one()).then(|| first / (T::one() - ratio))
}

/// Regime classification from `ρ₁`, the singularity type, `b_1` and the
/// declared `β`.
pub fn classify_regime<T: Real>(f: &SeriesFunction<T>, w: &WeightSequence<T>) -> Regime {
    if !(w.b(1) > T::zero()) || !(w.declared().beta > T::zero()) {
        return Regime::OutOfScope;
    }
    let r = f.radius();
    if r > T::one() {
        return Regime::ErgodicSupercritical;
    }
    match (r == T::one(), f.singularity()) {
        (true, Singularity::Pole(_)) => Regime::ErgodicPoleAtOne,
        (true, _) => Regime::OutOfScope,
        (false, Singularity::Pole(_)) => Regime::NonergodicGrandCanonical,
        (false, Singularity::Essential) => Regime::EssentialSubcritical,
        (false, Singularity::None) => Regime::OutOfScope,
    }
}

impl<T: Real> Ensemble<T> {
    /// Whether every count law has a closed form (no custom series).
    pub fn closed_form(&self) -> bool {
        !matches!(self.f.kind(), SeriesKind::Custom { .. })
    }
}

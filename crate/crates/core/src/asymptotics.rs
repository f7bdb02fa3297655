//! Normalisation `Ω`, variance constant `σ²`, limit shape `φ`, and the tilt
//! `x_n` solving `E_x N = n`.
//!
//! Integrals are taken in `v = −ln u`, `u = e^{−v}`, with `h` the logarithmic
//! derivative of `f` after normalising to `b_1 = 1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::{Ensemble, Moments, Regime};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_pieces, QuadratureOptions};
use crate::scalar::Real;
use crate::series::{Derivatives, Singularity};

fn require_ergodic<T: Real>(e: &Ensemble<T>, operation: &'static str) -> Result<()> {
    if e.regime().is_ergodic() {
        Ok(())
    } else {
        Err(Error::Regime {
            regime: e.regime(),
            operation,
        })
    }
}

/// `f, h, h', h''` of the normalised series at `u = e^{−v}`.
fn derivs<T: Real>(e: &Ensemble<T>, v: T) -> Result<Derivatives<T>> {
    let d = e.series().eval_neg_log(v)?;
    let s = e.normalized_h_factor();
    Ok(Derivatives {
        f: d.f.powf(s),
        h: d.h * s,
        dh: d.dh * s,
        d2h: d.d2h * s,
    })
}

/// Order of the pole at `u = 1` after normalisation, if there is one.
fn pole_at_one<T: Real>(e: &Ensemble<T>) -> Option<T> {
    match (e.regime(), e.series().singularity()) {
        (Regime::ErgodicPoleAtOne, Singularity::Pole(m)) => {
            Some(T::lit(m as f64) * e.normalized_h_factor())
        }
        _ => None,
    }
}

/// Integrand evaluation wrapper: quadrature callbacks cannot return errors,
/// so failures are recorded and surface as NaN.
struct Guard {
    failure: std::sync::Mutex<Option<Error>>,
}

impl Guard {
    fn new() -> Self {
        Self {
            failure: std::sync::Mutex::new(None),
        }
    }

    fn eval<T: Real>(&self, r: Result<T>) -> T {
        match r {
            Ok(v) => v,
            Err(err) => {
                let mut slot = self.failure.lock().expect("unpoisoned");
                slot.get_or_insert(err);
                T::nan()
            }
        }
    }

    fn finish<T>(self, r: Result<T>) -> Result<T> {
        match self.failure.into_inner().expect("unpoisoned") {
            Some(err) => Err(err),
            None => r,
        }
    }
}

/// Upper cutoff where `v^{p} e^{−v} max(1, h)` drops below `1e−17`.
fn upper_cutoff<T: Real>(e: &Ensemble<T>, start: T, p: T) -> Result<T> {
    let mut v = start.max(T::lit(40.0));
    for _ in 0..60 {
        let d = derivs(e, v)?;
        let bound = (p * v.ln() - v).exp() * d.h.max(T::one()) * (T::one() + v);
        if bound < T::lit(1e-17) {
            return Ok(v);
        }
        v = v * T::lit(1.5);
    }
    Err(Error::Quadrature("integrand tail does not decay".into()))
}

fn breakpoints<T: Real>(lo: T, hi: T, extra: &[f64]) -> Vec<T> {
    let mut pts = vec![lo];
    for &p in extra {
        let p = T::lit(p);
        if p > lo && p < hi {
            pts.push(p);
        }
    }
    pts.push(hi);
    pts
}

fn quad_opts<T: Real>(e: &Ensemble<T>) -> QuadratureOptions {
    let mut o = e.numerics().quadrature();
    // Tolerances below single-precision resolution are unattainable in f32.
    let floor = (T::epsilon() * T::lit(64.0)).as_f64();
    o.abs_tol = o.abs_tol.max(floor);
    o.rel_tol = o.rel_tol.max(floor);
    o
}

const SPLITS: [f64; 6] = [1e-3, 0.1, 1.0, 4.0, 12.0, 25.0];

/// `Ω = ∫_0^∞ [v^{β+1}(h + uh') − v^β h] u dv` (the `θ = 1` normalisation).
pub fn omega<T: Real>(e: &Ensemble<T>) -> Result<T> {
    require_ergodic(e, "omega")?;
    let beta = e.beta();
    let pole = pole_at_one(e).is_some();
    let guard = Guard::new();
    let integrand = |v: T| {
        guard.eval(derivs(e, v).map(|d| {
            let u = (-v).exp();
            let val = (v.powf(beta + T::one()) * (d.h + u * d.dh) - v.powf(beta) * d.h) * u;
            // The combined integrand is O(v^β) at a pole; below the range
            // where h' is representable it is replaced by that limit.
            if !val.is_finite() && pole && v < T::lit(1e-3) {
                T::zero()
            } else {
                val
            }
        }))
    };
    let vmax = upper_cutoff(e, T::lit(40.0), beta + T::one())?;
    let r = integrate_pieces(integrand, &breakpoints(T::zero(), vmax, &SPLITS), &quad_opts(e));
    guard.finish(r).map(|est| est.value)
}

/// `σ² = ∫_0^∞ [v^{β+2}(h + 3uh' + u²h'') − 2v^{β+1}(h + uh')] u dv`,
/// the limit of `(1−x)^{β+2} Var_x N / θ`.
pub fn sigma_sq<T: Real>(e: &Ensemble<T>) -> Result<T> {
    require_ergodic(e, "sigma_sq")?;
    let beta = e.beta();
    let pole = pole_at_one(e).is_some();
    let guard = Guard::new();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let integrand = |v: T| {
        guard.eval(derivs(e, v).map(|d| {
            let u = (-v).exp();
            let first = v.powf(beta + two) * (d.h + three * u * d.dh + u * u * d.d2h);
            let second = two * v.powf(beta + T::one()) * (d.h + u * d.dh);
            let val = (first - second) * u;
            if !val.is_finite() && pole && v < T::lit(1e-3) {
                T::zero()
            } else {
                val
            }
        }))
    };
    let vmax = upper_cutoff(e, T::lit(40.0), beta + two)?;
    let r = integrate_pieces(integrand, &breakpoints(T::zero(), vmax, &SPLITS), &quad_opts(e));
    guard.finish(r).map(|est| est.value)
}

/// Value of `φ` at `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum PhiAtZero<T> {
    Finite(T),
    Infinite,
}

/// `φ(0)` is infinite exactly when `F` has its pole at 1 and `β ≤ 1`.
pub fn phi_at_zero_is_infinite<T: Real>(e: &Ensemble<T>) -> bool {
    pole_at_one(e).is_some() && e.beta() <= T::one()
}

/// Limit shape `φ(t) = (1/Ω)[∫_t^∞ v^β (h + uh') u dv − t^β u_t h(u_t)]`.
pub fn limit_shape<T: Real>(e: &Ensemble<T>, t: T) -> Result<T> {
    let om = omega(e)?;
    limit_shape_with(e, om, t)
}

/// [`limit_shape`] with a precomputed `Ω`.
pub fn limit_shape_with<T: Real>(e: &Ensemble<T>, omega: T, t: T) -> Result<T> {
    require_ergodic(e, "limit_shape")?;
    let beta = e.beta();
    if !(t >= T::zero()) || (t == T::zero() && phi_at_zero_is_infinite(e)) {
        return Err(Error::domain(format!("limit shape at t = {t} is not finite")));
    }
    let pole = pole_at_one(e);
    let v0 = T::lit(e.numerics().singular_cutoff);
    let guard = Guard::new();
    let body = |v: T| {
        guard.eval(derivs(e, v).map(|d| {
            let u = (-v).exp();
            v.powf(beta) * (d.h + u * d.dh) * u
        }))
    };
    let vmax = upper_cutoff(e, t + T::lit(40.0), beta)?;
    let opts = quad_opts(e);
    let mut total = T::zero();
    let mut lower = t;
    if let (Some(m), true) = (pole, t < v0) {
        // Near the pole the body is m·v^{β−2} + O(v^β); the singular part is
        // integrated in closed form on [t, v0].
        let two = T::lit(2.0);
        let reg = |v: T| body(v) - m * v.powf(beta - two);
        let est = integrate(reg, t, v0, &opts);
        total = total + guard_value(&guard, est)?;
        let analytic = if (beta - T::one()).abs() < T::lit(1e-12) {
            m * (v0 / t).ln()
        } else {
            m * (v0.powf(beta - T::one()) - t.powf(beta - T::one())) / (beta - T::one())
        };
        total = total + analytic;
        lower = v0;
    }
    let est = integrate_pieces(&body, &breakpoints(lower, vmax, &SPLITS), &opts);
    total = total + guard_value(&guard, est)?;
    let boundary = if t == T::zero() {
        T::zero()
    } else {
        let d = derivs(e, t)?;
        t.powf(beta) * (-t).exp() * d.h
    };
    let phi = (total - boundary) / omega;
    guard.finish(Ok(phi.max(T::zero())))
}

fn guard_value<T: Real>(
    guard: &Guard,
    r: Result<crate::quadrature::Estimate<T>>,
) -> Result<T> {
    match r {
        Ok(est) => Ok(est.value),
        Err(err) => {
            let mut slot = guard.failure.lock().expect("unpoisoned");
            Err(slot.take().unwrap_or(err))
        }
    }
}

/// `φ'(t) = −(β/Ω) t^{β−1} u_t h(u_t)`.
pub fn limit_shape_derivative<T: Real>(e: &Ensemble<T>, omega: T, t: T) -> Result<T> {
    require_ergodic(e, "limit_shape_derivative")?;
    if !(t > T::zero()) {
        return Err(Error::domain("derivative needs t > 0"));
    }
    let beta = e.beta();
    let d = derivs(e, t)?;
    Ok(-beta / omega * t.powf(beta - T::one()) * (-t).exp() * d.h)
}

#[derive(Clone, Debug, Serialize)]
pub struct ShapeCurve<T> {
    /// `(t, φ(t))`, `t` ascending.
    pub grid: Vec<(T, T)>,
    pub omega: T,
    pub beta: T,
    pub theta: T,
    pub phi_at_zero: PhiAtZero<T>,
    /// `∫_0^∞ φ` from the trapezoid rule on the grid plus exact head and tail.
    pub mass: T,
}

impl<T: Real> ShapeCurve<T> {
    pub fn is_nonincreasing(&self) -> bool {
        self.grid.windows(2).all(|w| w[1].1 <= w[0].1)
    }

    /// CSV with header `t,phi`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,phi\n");
        for (t, phi) in &self.grid {
            s.push_str(&crate::scalar::format_float(t.as_f64()));
            s.push(',');
            s.push_str(&crate::scalar::format_float(phi.as_f64()));
            s.push('\n');
        }
        s
    }
}

/// Evaluates `φ` on `grid_size` equally spaced points of `(0, t_max]`.
pub fn shape_curve<T: Real>(e: &Ensemble<T>, t_max: T, grid_size: usize) -> Result<ShapeCurve<T>> {
    require_ergodic(e, "shape_curve")?;
    if !(t_max > T::zero()) || grid_size == 0 {
        return Err(Error::param("shape curve needs t_max > 0 and a nonempty grid"));
    }
    let om = omega(e)?;
    let step = t_max / T::lit(grid_size as f64);
    let grid: Vec<(T, T)> = (1..=grid_size)
        .into_par_iter()
        .map(|i| {
            let t = step * T::lit(i as f64);
            limit_shape_with(e, om, t).map(|phi| (t, phi))
        })
        .collect::<Result<_>>()?;
    let phi_at_zero = if phi_at_zero_is_infinite(e) {
        PhiAtZero::Infinite
    } else {
        PhiAtZero::Finite(limit_shape_with(e, om, T::zero())?)
    };
    let mass = shape_mass(e, om, &grid)?;
    Ok(ShapeCurve {
        grid,
        omega: om,
        beta: e.beta(),
        theta: e.theta(),
        phi_at_zero,
        mass,
    })
}

/// `∫_0^{t_1} φ = t_1 φ(t_1) + (β/Ω)∫_0^{t_1} v^β u h dv`,
/// trapezoid on the grid, and `∫_{t_max}^∞ φ = (β/Ω)∫_{t_max}^∞ (v − t_max) v^{β−1} u h dv`.
fn shape_mass<T: Real>(e: &Ensemble<T>, omega: T, grid: &[(T, T)]) -> Result<T> {
    let beta = e.beta();
    let opts = quad_opts(e);
    let (t1, phi1) = grid[0];
    let (tn, _) = grid[grid.len() - 1];
    let guard = Guard::new();
    let head_body = |v: T| {
        guard.eval(derivs(e, v).map(|d| v.powf(beta) * (-v).exp() * d.h))
    };
    let head = guard_value(&guard, integrate(head_body, T::zero(), t1, &opts))?;
    let head = t1 * phi1 + beta / omega * head;
    let mut trap = T::zero();
    for w in grid.windows(2) {
        trap = trap + (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * T::lit(0.5);
    }
    let vmax = upper_cutoff(e, tn + T::lit(40.0), beta)?;
    let tail_body = |v: T| {
        guard.eval(
            derivs(e, v).map(|d| (v - tn) * v.powf(beta - T::one()) * (-v).exp() * d.h),
        )
    };
    let tail = guard_value(
        &guard,
        integrate_pieces(tail_body, &breakpoints(tn, vmax, &SPLITS), &opts),
    )?;
    guard.finish(Ok(head + trap + beta / omega * tail))
}

/// Maps a curve from the `α = 1/(1−x_n)` scaling to the symmetric one,
/// `(t, φ) ↦ (t/√Ω, φ√Ω)`. For the uniform measure the image satisfies
/// `e^{−cφ} + e^{−ct} = 1` with `c = π/√6`.
pub fn symmetric_rescale<T: Real>(grid: &[(T, T)], omega: T) -> Vec<(T, T)> {
    let r = omega.sqrt();
    grid.iter().map(|&(t, phi)| (t / r, phi * r)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TiltSolution<T> {
    pub n: u64,
    pub x: T,
    /// `1 − x_n`.
    pub tau: T,
    /// `|E_{x_n} N − n|`.
    pub residual: T,
    pub mean: T,
    pub variance: T,
    pub iterations: usize,
    /// Residual after each iteration.
    pub trace: Vec<TiltStep<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StepKind {
    Initial,
    Newton,
    Bisection,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TiltStep<T> {
    pub kind: StepKind,
    pub x: T,
    pub residual: T,
}

impl<T: Real> TiltSolution<T> {
    pub fn alpha(&self) -> T {
        T::one() / self.tau
    }
}

/// Solves `E_x N = n` on `(0, ρ)` by bisection safeguarded Newton steps with
/// derivative `Var_x N / x`.
pub fn solve_tilt<T: Real>(e: &Ensemble<T>, n: u64) -> Result<TiltSolution<T>> {
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    let nf = T::lit(n as f64);
    let rho = e.rho();
    let tol = nf * T::lit(e.numerics().tilt_rel_tol).max(T::epsilon() * T::lit(64.0));
    let max_iter = e.numerics().tilt_max_iter;

    let mut lo = T::zero();
    let mut hi = rho;
    let mut x = initial_guess(e, nf);
    let mut m = e.moments(x)?;
    let mut trace = vec![TiltStep {
        kind: StepKind::Initial,
        x,
        residual: (m.mean - nf).abs(),
    }];
    for iter in 1..=max_iter {
        let res = m.mean - nf;
        if res.abs() <= tol {
            return Ok(TiltSolution {
                n,
                x,
                tau: T::one() - x,
                residual: res.abs(),
                mean: m.mean,
                variance: m.var,
                iterations: iter - 1,
                trace,
            });
        }
        if res < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let mut accepted = false;
        if m.var > T::zero() {
            let cand = x - res * x / m.var;
            if cand > lo && cand < hi {
                let mc = match e.moments(cand) {
                    Ok(mc) => mc,
                    Err(Error::Convergence { .. }) => Moments {
                        mean: T::infinity(),
                        var: T::infinity(),
                        terms: 0,
                    },
                    Err(err) => return Err(err),
                };
                if (mc.mean - nf).abs() < res.abs() {
                    x = cand;
                    m = mc;
                    accepted = true;
                    trace.push(TiltStep {
                        kind: StepKind::Newton,
                        x,
                        residual: (m.mean - nf).abs(),
                    });
                } else if mc.mean < nf {
                    lo = lo.max(cand);
                } else {
                    hi = hi.min(cand);
                }
            }
        }
        if !accepted {
            let mid = lo + (hi - lo) * T::lit(0.5);
            if !(mid > lo && mid < hi) {
                return Err(Error::Convergence {
                    iterations: iter,
                    residual: res.abs().as_f64(),
                });
            }
            x = mid;
            m = e.moments(x)?;
            trace.push(TiltStep {
                kind: StepKind::Bisection,
                x,
                residual: (m.mean - nf).abs(),
            });
        }
    }
    let res = (m.mean - nf).abs();
    if res <= tol {
        return Ok(TiltSolution {
            n,
            x,
            tau: T::one() - x,
            residual: res,
            mean: m.mean,
            variance: m.var,
            iterations: max_iter,
            trace,
        });
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual: res.as_f64(),
    })
}

/// `1 − (Ωθ/n)^{1/(β+1)}` when ergodic, `ρ − mρ/n` below a pole at `ρ₁ < 1`,
/// else `ρ/2`.
fn initial_guess<T: Real>(e: &Ensemble<T>, n: T) -> T {
    let rho = e.rho();
    let clamp = |x: T| {
        if x > T::zero() && x < rho {
            x
        } else {
            rho * T::lit(0.5)
        }
    };
    match e.regime() {
        Regime::ErgodicSupercritical | Regime::ErgodicPoleAtOne => match omega(e) {
            Ok(om) => {
                let tau = (om * e.theta() / n).powf(T::one() / (e.beta() + T::one()));
                clamp(T::one() - tau)
            }
            Err(_) => rho * T::lit(0.5),
        },
        Regime::NonergodicGrandCanonical => {
            let m = T::lit(e.pole_order().unwrap_or(1) as f64) * e.scale();
            clamp(rho - m * rho / n)
        }
        _ => rho * T::lit(0.5),
    }
}

/// `α⁽ⁿ⁾ = 1/(1 − x_n)`.
pub fn scaling_alpha<T: Real>(e: &Ensemble<T>, n: u64) -> Result<T> {
    require_ergodic(e, "scaling_alpha")?;
    Ok(solve_tilt(e, n)?.alpha())
}

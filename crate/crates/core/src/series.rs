//! The component generating function `f` and its powers.
//!
//! Every count distribution of a multiplicative measure in this crate is built
//! from a single series `f(z) = Σ g_j z^j` with `g_0 = 1`: the count of parts
//! of size `k` has generating function `f(z)^{b_k}`. This module evaluates `f`,
//! its logarithmic derivative `h = f'/f` with two derivatives, and extracts
//! Taylor coefficients of real powers `f^b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Coefficient, Real};

/// Relative tolerance below which a negative power coefficient is treated as
/// rounding noise rather than an inadmissible exponent.
pub const NEGATIVE_COEFFICIENT_TOLERANCE: f64 = 1e-12;

/// Custom series are only evaluated up to this fraction of their radius.
pub const CUSTOM_RADIUS_FRACTION: f64 = 0.999;

#[derive(Clone, Debug, PartialEq)]
pub enum SeriesKind<T> {
    /// `f(z) = 1/(1 - y z)`.
    Geometric { y: T },
    /// `f(z) = exp(rate · z)`; `rate = 1` is the plain exponential.
    Exponential { rate: T },
    /// Finite list of Taylor coefficients, normalised so that `g_0 = 1`.
    Custom { coefficients: Vec<T> },
}

/// Nature of the singularity on the circle of convergence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Singularity {
    Pole(u32),
    Essential,
    None,
}

/// `f`, `h = f'/f`, `h'` and `h''` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivatives<T> {
    pub f: T,
    pub h: T,
    pub dh: T,
    pub d2h: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesFunction<T> {
    kind: SeriesKind<T>,
    radius: T,
    singularity: Singularity,
}

impl<T: Real> SeriesFunction<T> {
    pub fn geometric(y: T) -> Result<Self> {
        if !(y > T::zero() && y.is_finite()) {
            return Err(Error::param(format!("geometric parameter y must be positive, got {y}")));
        }
        Ok(Self {
            kind: SeriesKind::Geometric { y },
            radius: T::one() / y,
            singularity: Singularity::Pole(1),
        })
    }

    pub fn exponential() -> Self {
        Self {
            kind: SeriesKind::Exponential { rate: T::one() },
            radius: T::infinity(),
            singularity: Singularity::None,
        }
    }

    pub fn exponential_rate(rate: T) -> Result<Self> {
        if !(rate > T::zero() && rate.is_finite()) {
            return Err(Error::param(format!("exponential rate must be positive, got {rate}")));
        }
        Ok(Self {
            kind: SeriesKind::Exponential { rate },
            radius: T::infinity(),
            singularity: Singularity::None,
        })
    }

    /// Builds a series from explicit coefficients. The list is divided by its
    /// first entry; `g_1` must be positive. A finite list is a polynomial, so
    /// the radius is normally `+∞`, but a declared finite radius is honoured
    /// (the list is then read as a truncation of a series with that radius).
    pub fn custom(coefficients: Vec<T>, radius: T, singularity: Singularity) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::param("custom series needs at least g_0 and g_1"));
        }
        let g0 = coefficients[0];
        if !(g0 > T::zero()) {
            return Err(Error::param("custom series needs g_0 > 0"));
        }
        if coefficients.iter().any(|g| *g < T::zero() || !g.is_finite()) {
            return Err(Error::param("custom series coefficients must be finite and nonnegative"));
        }
        let coefficients: Vec<T> = coefficients.into_iter().map(|g| g / g0).collect();
        if !(coefficients[1] > T::zero()) {
            return Err(Error::param("custom series needs g_1 > 0"));
        }
        if !(radius > T::zero()) {
            return Err(Error::param("radius of convergence must be positive"));
        }
        Ok(Self {
            kind: SeriesKind::Custom { coefficients },
            radius,
            singularity,
        })
    }

    /// `z ↦ f(c z)` for `c > 0`.
    pub fn dilated(&self, c: T) -> Self {
        let kind = match &self.kind {
            SeriesKind::Geometric { y } => SeriesKind::Geometric { y: *y * c },
            SeriesKind::Exponential { rate } => SeriesKind::Exponential { rate: *rate * c },
            SeriesKind::Custom { coefficients } => {
                let mut p = T::one();
                SeriesKind::Custom {
                    coefficients: coefficients
                        .iter()
                        .map(|g| {
                            let v = *g * p;
                            p = p * c;
                            v
                        })
                        .collect(),
                }
            }
        };
        Self {
            kind,
            radius: self.radius / c,
            singularity: self.singularity,
        }
    }

    pub fn kind(&self) -> &SeriesKind<T> {
        &self.kind
    }

    /// Radius of convergence `ρ₁` (possibly infinite).
    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn singularity(&self) -> Singularity {
        self.singularity
    }

    pub fn g1(&self) -> T {
        match &self.kind {
            SeriesKind::Geometric { y } => *y,
            SeriesKind::Exponential { rate } => *rate,
            SeriesKind::Custom { coefficients } => coefficients[1],
        }
    }

    /// Taylor coefficients `g_0..=g_{j_max}`.
    pub fn taylor(&self, j_max: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(j_max + 1);
        match &self.kind {
            SeriesKind::Geometric { y } => {
                let mut c = T::one();
                for _ in 0..=j_max {
                    out.push(c);
                    c = c * *y;
                }
            }
            SeriesKind::Exponential { rate } => {
                let mut c = T::one();
                for j in 0..=j_max {
                    out.push(c);
                    c = c * *rate / T::lit((j + 1) as f64);
                }
            }
            SeriesKind::Custom { coefficients } => {
                for j in 0..=j_max {
                    out.push(coefficients.get(j).copied().unwrap_or_else(T::zero));
                }
            }
        }
        out
    }

    /// Taylor coefficients in another scalar type, converting parameters exactly.
    pub fn taylor_in<C: Coefficient>(&self, j_max: usize) -> Result<Vec<C>> {
        let conv = |x: T| {
            C::from_f64_exact(x.as_f64())
                .ok_or_else(|| Error::param(format!("{x} has no exact representation")))
        };
        let mut out = Vec::with_capacity(j_max + 1);
        match &self.kind {
            SeriesKind::Geometric { y } => {
                let y = conv(*y)?;
                let mut c = C::one();
                for _ in 0..=j_max {
                    out.push(c.clone());
                    c = c * y.clone();
                }
            }
            SeriesKind::Exponential { rate } => {
                let r = conv(*rate)?;
                let mut c = C::one();
                for j in 0..=j_max {
                    out.push(c.clone());
                    c = c * r.clone() / C::from_u64(j as u64 + 1);
                }
            }
            SeriesKind::Custom { coefficients } => {
                for j in 0..=j_max {
                    out.push(match coefficients.get(j) {
                        Some(g) => conv(*g)?,
                        None => C::zero(),
                    });
                }
            }
        }
        Ok(out)
    }

    fn check_domain(&self, u: T) -> Result<()> {
        if !(u >= T::zero()) {
            return Err(Error::domain(format!("argument {u} is negative")));
        }
        if self.radius.is_finite() && u >= self.radius {
            return Err(Error::domain(format!(
                "argument {u} is outside the disk of convergence (radius {})",
                self.radius
            )));
        }
        if let SeriesKind::Custom { .. } = self.kind {
            if self.radius.is_finite() && u >= self.radius * T::lit(CUSTOM_RADIUS_FRACTION) {
                return Err(Error::domain(format!(
                    "custom series evaluated too close to its radius ({u} vs {})",
                    self.radius
                )));
            }
        }
        Ok(())
    }

    /// Evaluates `f(u)`, `h(u)`, `h'(u)` and `h''(u)` for `0 ≤ u < ρ₁`.
    pub fn eval_with_derivatives(&self, u: T) -> Result<Derivatives<T>> {
        self.check_domain(u)?;
        Ok(match &self.kind {
            SeriesKind::Geometric { y } => geometric_derivatives(*y, T::one() - *y * u),
            SeriesKind::Exponential { rate } => Derivatives {
                f: (*rate * u).exp(),
                h: *rate,
                dh: T::zero(),
                d2h: T::zero(),
            },
            SeriesKind::Custom { coefficients } => custom_derivatives(coefficients, u),
        })
    }

    /// Same as [`eval_with_derivatives`](Self::eval_with_derivatives) at
    /// `u = e^{-v}`, computing `1 - y·e^{-v}` without cancellation so that
    /// integrands stay accurate as `v → 0` for a pole at 1.
    pub fn eval_neg_log(&self, v: T) -> Result<Derivatives<T>> {
        match &self.kind {
            SeriesKind::Geometric { y } => {
                let d = -(y.ln() - v).exp_m1();
                if !(d > T::zero()) {
                    return Err(Error::domain(format!(
                        "e^-{v} is outside the disk of convergence"
                    )));
                }
                Ok(geometric_derivatives(*y, d))
            }
            _ => self.eval_with_derivatives((-v).exp()),
        }
    }

    /// `ln f(u)`.
    pub fn ln_value(&self, u: T) -> Result<T> {
        self.check_domain(u)?;
        Ok(match &self.kind {
            SeriesKind::Geometric { y } => -(-*y * u).ln_1p(),
            SeriesKind::Exponential { rate } => *rate * u,
            SeriesKind::Custom { coefficients } => horner(coefficients, u).ln(),
        })
    }

    /// `f(u) - 1`, accurate for small `u`.
    pub fn value_minus_one(&self, u: T) -> Result<T> {
        self.check_domain(u)?;
        Ok(match &self.kind {
            SeriesKind::Geometric { y } => *y * u / (T::one() - *y * u),
            SeriesKind::Exponential { rate } => (*rate * u).exp_m1(),
            SeriesKind::Custom { coefficients } => u * horner(&coefficients[1..], u),
        })
    }

    /// Taylor coefficients `c_0..=c_{j_max}` of `f(z)^b`.
    ///
    /// Closed-form kinds use their binomial and exponential series; custom
    /// series use the power recurrence [`series_power`].
    pub fn power_coefficients(&self, b: T, j_max: usize) -> Result<Vec<T>> {
        check_exponent(b.as_f64())?;
        let mut out = Vec::with_capacity(j_max + 1);
        if b == T::zero() {
            out.push(T::one());
            out.resize(j_max + 1, T::zero());
            return Ok(out);
        }
        match &self.kind {
            SeriesKind::Geometric { y } => {
                let mut c = T::one();
                for j in 0..=j_max {
                    out.push(c);
                    let jf = T::lit(j as f64);
                    c = c * *y * (b + jf) / (jf + T::one());
                }
            }
            SeriesKind::Exponential { rate } => {
                let mut c = T::one();
                for j in 0..=j_max {
                    out.push(c);
                    c = c * *rate * b / T::lit((j + 1) as f64);
                }
            }
            SeriesKind::Custom { coefficients } => {
                return series_power_real(coefficients, b, j_max);
            }
        }
        Ok(out)
    }

    /// [`power_coefficients`](Self::power_coefficients) in an arbitrary
    /// coefficient type; the exponent is converted exactly.
    pub fn power_coefficients_in<C: Coefficient>(&self, b: f64, j_max: usize) -> Result<Vec<C>> {
        check_exponent(b)?;
        let bc = C::from_f64_exact(b).ok_or_else(|| Error::param("exponent not representable"))?;
        let mut out = Vec::with_capacity(j_max + 1);
        if b == 0.0 {
            out.push(C::one());
            out.resize(j_max + 1, C::zero());
            return Ok(out);
        }
        match &self.kind {
            SeriesKind::Geometric { y } => {
                let y = C::from_f64_exact(y.as_f64())
                    .ok_or_else(|| Error::param("parameter not representable"))?;
                let mut c = C::one();
                for j in 0..=j_max {
                    out.push(c.clone());
                    let jc = C::from_u64(j as u64);
                    c = c * y.clone() * (bc.clone() + jc.clone()) / (jc + C::one());
                }
            }
            SeriesKind::Exponential { rate } => {
                let r = C::from_f64_exact(rate.as_f64())
                    .ok_or_else(|| Error::param("parameter not representable"))?;
                let rb = r * bc;
                let mut c = C::one();
                for j in 0..=j_max {
                    out.push(c.clone());
                    c = c * rb.clone() / C::from_u64(j as u64 + 1);
                }
            }
            SeriesKind::Custom { .. } => {
                let g = self.taylor_in::<C>(j_max)?;
                return series_power(&g, &bc, j_max);
            }
        }
        Ok(out)
    }
}

fn check_exponent(b: f64) -> Result<()> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::param(format!("power exponent must be nonnegative, got {b}")));
    }
    Ok(())
}

fn geometric_derivatives<T: Real>(y: T, d: T) -> Derivatives<T> {
    let h = y / d;
    Derivatives {
        f: T::one() / d,
        h,
        dh: h * h,
        d2h: T::lit(2.0) * h * h * h,
    }
}

fn horner<T: Real>(c: &[T], u: T) -> T {
    c.iter().rev().fold(T::zero(), |acc, g| acc * u + *g)
}

fn custom_derivatives<T: Real>(g: &[T], u: T) -> Derivatives<T> {
    // f, f', f'', f''' by simultaneous Horner.
    let (mut f0, mut f1, mut f2, mut f3) = (T::zero(), T::zero(), T::zero(), T::zero());
    for c in g.iter().rev() {
        f3 = f3 * u + T::lit(3.0) * f2;
        f2 = f2 * u + T::lit(2.0) * f1;
        f1 = f1 * u + f0;
        f0 = f0 * u + *c;
    }
    let h = f1 / f0;
    let r2 = f2 / f0;
    let r3 = f3 / f0;
    Derivatives {
        f: f0,
        h,
        dh: r2 - h * h,
        d2h: r3 - T::lit(3.0) * h * r2 + T::lit(2.0) * h * h * h,
    }
}

/// Coefficients of `g(z)^b` for `g_0 = 1` by the power recurrence
/// `j·c_j = Σ_{i=1}^{j} (i(b+1) − j) g_i c_{j−i}`, `c_0 = 1`.
///
/// In exact arithmetic every negative coefficient is reported; in floating
/// point values above `-1e-12·max|c|` are clamped to zero.
pub fn series_power<C: Coefficient>(g: &[C], b: &C, j_max: usize) -> Result<Vec<C>> {
    if g.is_empty() || g[0] != C::one() {
        return Err(Error::param("power recurrence needs g_0 = 1"));
    }
    let mut c: Vec<C> = Vec::with_capacity(j_max + 1);
    c.push(C::one());
    let bp1 = b.clone() + C::one();
    let last = g.iter().rposition(|x| !x.is_zero()).unwrap_or(0);
    let mut max_abs = 1.0f64;
    for j in 1..=j_max {
        let jc = C::from_u64(j as u64);
        let mut acc = C::zero();
        for i in 1..=j.min(last) {
            if g[i].is_zero() {
                continue;
            }
            let w = C::from_u64(i as u64) * bp1.clone() - jc.clone();
            acc = acc + w * g[i].clone() * c[j - i].clone();
        }
        let mut cj = acc / jc;
        if cj < C::zero() {
            let v = cj.to_f64();
            if C::EXACT || v < -NEGATIVE_COEFFICIENT_TOLERANCE * max_abs {
                return Err(Error::NegativeCoefficient {
                    index: j,
                    value: v,
                    exponent: b.to_f64(),
                });
            }
            cj = C::zero();
        }
        max_abs = max_abs.max(cj.to_f64().abs());
        c.push(cj);
    }
    Ok(c)
}

fn series_power_real<T: Real>(g: &[T], b: T, j_max: usize) -> Result<Vec<T>> {
    // Same recurrence over the generic float type.
    let mut c = Vec::with_capacity(j_max + 1);
    c.push(T::one());
    let last = g.iter().rposition(|x| *x != T::zero()).unwrap_or(0);
    let bp1 = b + T::one();
    let mut max_abs = T::one();
    for j in 1..=j_max {
        let jf = T::lit(j as f64);
        let mut acc = T::zero();
        for i in 1..=j.min(last) {
            acc = acc + (T::lit(i as f64) * bp1 - jf) * g[i] * c[j - i];
        }
        let mut cj = acc / jf;
        if cj < T::zero() {
            if cj < -T::lit(NEGATIVE_COEFFICIENT_TOLERANCE) * max_abs {
                return Err(Error::NegativeCoefficient {
                    index: j,
                    value: cj.as_f64(),
                    exponent: b.as_f64(),
                });
            }
            cj = T::zero();
        }
        max_abs = max_abs.max(cj.abs());
        c.push(cj);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn geometric_closed_form_at_half() {
        let f = SeriesFunction::geometric(1.0).unwrap();
        let d = f.eval_with_derivatives(0.5).unwrap();
        assert_eq!((d.f, d.h, d.dh, d.d2h), (2.0, 2.0, 4.0, 16.0));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let step = 1e-5;
        let fns = [
            SeriesFunction::geometric(1.0).unwrap(),
            SeriesFunction::geometric(0.3).unwrap(),
            SeriesFunction::exponential_rate(2.0).unwrap(),
            SeriesFunction::custom(vec![1.0, 2.0, 0.5, 0.25], f64::INFINITY, Singularity::None)
                .unwrap(),
        ];
        for f in &fns {
            for &u in &[0.1, 0.35, 0.6] {
                let ln = |x: f64| f.ln_value(x).unwrap();
                let d = f.eval_with_derivatives(u).unwrap();
                let fd_h = (ln(u + step) - ln(u - step)) / (2.0 * step);
                assert!(close(d.h, fd_h, 1e-6), "{f:?} h at {u}");
                let h = |x: f64| f.eval_with_derivatives(x).unwrap().h;
                let fd_dh = (h(u + step) - h(u - step)) / (2.0 * step);
                let dh = |x: f64| f.eval_with_derivatives(x).unwrap().dh;
                let fd_d2h = (dh(u + step) - dh(u - step)) / (2.0 * step);
                if d.dh != 0.0 {
                    assert!(close(d.dh, fd_dh, 1e-6), "{f:?} h' at {u}");
                    assert!(close(d.d2h, fd_d2h, 1e-6), "{f:?} h'' at {u}");
                } else {
                    assert!(fd_dh.abs() < 1e-8 && fd_d2h.abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn exponential_has_constant_log_derivative() {
        let f = SeriesFunction::<f64>::exponential();
        let d = f.eval_with_derivatives(0.7).unwrap();
        assert!((d.f - 0.7f64.exp()).abs() < 1e-15);
        assert_eq!((d.h, d.dh, d.d2h), (1.0, 0.0, 0.0));
    }

    #[test]
    fn value_at_zero_is_normalised() {
        let f = SeriesFunction::custom(vec![2.0, 3.0, 1.0], f64::INFINITY, Singularity::None)
            .unwrap();
        let d = f.eval_with_derivatives(0.0).unwrap();
        assert_eq!(d.f, 1.0);
        assert_eq!(d.h, 1.5);
        let g = SeriesFunction::geometric(0.25).unwrap();
        assert_eq!(g.eval_with_derivatives(0.0).unwrap().h, 0.25);
    }

    #[test]
    fn domain_errors() {
        let f = SeriesFunction::geometric(2.0).unwrap();
        assert!(matches!(f.eval_with_derivatives(0.5), Err(Error::Domain(_))));
        assert!(matches!(f.eval_with_derivatives(-0.1), Err(Error::Domain(_))));
        let c = SeriesFunction::custom(vec![1.0, 1.0], 1.0, Singularity::Pole(1)).unwrap();
        assert!(matches!(c.eval_with_derivatives(0.9995), Err(Error::Domain(_))));
        assert!(c.eval_with_derivatives(0.99).is_ok());
    }

    #[test]
    fn negative_log_form_is_accurate_near_pole() {
        let f = SeriesFunction::geometric(1.0).unwrap();
        let v = 1e-9;
        let d = f.eval_neg_log(v).unwrap();
        // h(e^{-v}) = 1/(1 - e^{-v}) ≈ 1/v + 1/2
        assert!(close(d.h, 1.0 / v + 0.5, 1e-12));
    }

    #[test]
    fn power_of_geometric_oracle_by_multiplication() {
        let f = SeriesFunction::geometric(1.0).unwrap();
        let c = f.power_coefficients(2.0, 3).unwrap();
        // (1 + z + z^2 + z^3)^2 truncated
        let g = [1.0, 1.0, 1.0, 1.0];
        let mut prod = [0.0; 4];
        for i in 0..4 {
            for j in 0..4 - i {
                prod[i + j] += g[i] * g[j];
            }
        }
        assert_eq!(c, prod.to_vec());
        assert_eq!(c, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn power_of_exponential() {
        let f = SeriesFunction::<f64>::exponential();
        let theta = 1.7;
        let c = f.power_coefficients(theta, 3).unwrap();
        let expect = [1.0, theta, theta * theta / 2.0, theta.powi(3) / 6.0];
        for (a, b) in c.iter().zip(expect) {
            assert!(close(*a, b, 1e-15));
        }
    }

    #[test]
    fn zero_power_is_one() {
        let f = SeriesFunction::geometric(3.0).unwrap();
        assert_eq!(f.power_coefficients(0.0, 4).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn closed_forms_agree_with_recurrence() {
        for f in [
            SeriesFunction::geometric(0.7).unwrap(),
            SeriesFunction::exponential_rate(1.3).unwrap(),
        ] {
            let g = f.taylor(30);
            for b in [0.5, 1.0, 2.5] {
                let direct = f.power_coefficients(b, 30).unwrap();
                let rec = series_power_real(&g, b, 30).unwrap();
                let top = direct.iter().cloned().fold(0.0, f64::max);
                for (a, r) in direct.iter().zip(&rec) {
                    assert!((a - r).abs() <= 1e-13 * top, "{a} vs {r}");
                }
            }
        }
    }

    #[test]
    fn exact_power_coefficients() {
        let f = SeriesFunction::<f64>::exponential();
        let c: Vec<BigRational> = f.power_coefficients_in(2.0, 4).unwrap();
        let shown: Vec<String> = c.iter().map(|x| x.to_string()).collect();
        assert_eq!(shown, ["1", "2", "2", "4/3", "2/3"]);
        let g = SeriesFunction::geometric(1.0).unwrap();
        let c: Vec<BigRational> = g.power_coefficients_in(0.5, 3).unwrap();
        let shown: Vec<String> = c.iter().map(|x| x.to_string()).collect();
        assert_eq!(shown, ["1", "1/2", "3/8", "5/16"]);
    }

    #[test]
    fn inadmissible_power_is_detected() {
        // (1 + z)^{1/2} has a negative z^2 coefficient.
        let f = SeriesFunction::custom(vec![1.0, 1.0], f64::INFINITY, Singularity::None).unwrap();
        let err = f.power_coefficients(0.5, 4).unwrap_err();
        assert!(matches!(err, Error::NegativeCoefficient { index: 2, .. }));
        let err = f.power_coefficients_in::<BigRational>(0.5, 4).unwrap_err();
        assert!(matches!(err, Error::NegativeCoefficient { index: 2, .. }));
    }

    #[test]
    fn constructor_preconditions() {
        assert!(SeriesFunction::geometric(0.0).is_err());
        assert!(SeriesFunction::custom(vec![1.0, 0.0, 1.0], f64::INFINITY, Singularity::None)
            .is_err());
        assert!(SeriesFunction::custom(vec![1.0, -1.0], f64::INFINITY, Singularity::None).is_err());
    }
}

//! Taylor coefficients `a_n` of `F`, point masses `μ_x{N = m}` and the local
//! limit probe.
//!
//! Tables store scaled prefix products
//! `T̃_k(m) = [z^m] Π_{j≤k} f(s^j z^j)^{b_j} = s^m T_k(m)`, so a float table
//! stays in range when `s` is near the tilt matched to its length. Exact
//! tables use `s = 1`.

use num_rational::BigRational;
use serde::Serialize;

use crate::asymptotics::solve_tilt;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::scalar::{format_float, Coefficient, CompensatedSum, Real};
use crate::series::SeriesKind;

/// Largest table length for which full prefix tables may be retained.
pub const PREFIX_CAP: usize = 5000;

/// Entry budget for retained prefix levels, `(PREFIX_CAP + 1)²`.
pub const PREFIX_ENTRY_CAP: usize = (PREFIX_CAP + 1) * (PREFIX_CAP + 1);

/// Deficit `1 − Σ_{m≤N} μ_x{N = m}` above which point masses are refused.
pub const TRUNCATION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scale {
    /// `s = 1`.
    One,
    /// `s = x_N`, the tilt whose mean equals the table length.
    Tilt,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableOptions {
    pub retain_prefix: bool,
    pub scale: Scale,
    /// Float tables drop scaled factor weights below this fraction of the
    /// largest weight of the same factor.
    pub drop_below: f64,
    /// Only factors `k ≤ max_part` are multiplied in.
    pub max_part: Option<usize>,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            retain_prefix: false,
            scale: Scale::One,
            drop_below: 1e-20,
            max_part: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoefficientTable<C> {
    n_max: usize,
    max_part: usize,
    scale: f64,
    /// `T̃_N(0..=N)`.
    a: Vec<C>,
    /// `prefix[k] = T̃_k(0..=N)` for `k = 0..=N`; `None` entries repeat the
    /// previous level (factor with `b_k = 0`).
    prefix: Option<Vec<Option<Vec<C>>>>,
}

pub type ExactTable = CoefficientTable<BigRational>;
pub type FloatTable = CoefficientTable<f64>;

impl<C: Coefficient> CoefficientTable<C> {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Largest part size whose factor is included.
    pub fn max_part(&self) -> usize {
        self.max_part
    }

    pub fn is_exact(&self) -> bool {
        C::EXACT
    }

    /// Scaled coefficients `a_m s^m`.
    pub fn scaled(&self) -> &[C] {
        &self.a
    }

    /// `ln a_m`.
    pub fn ln_a(&self, m: usize) -> f64 {
        self.a[m].ln() - m as f64 * self.scale.ln()
    }

    /// `a_m` as text: the exact value in exact mode, 17 significant digits
    /// otherwise.
    pub fn render(&self, m: usize) -> String {
        if self.scale == 1.0 {
            self.a[m].render()
        } else {
            format_float(self.ln_a(m).exp())
        }
    }

    /// CSV with header `n,a_n`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,a_n\n");
        for m in 0..=self.n_max {
            s.push_str(&m.to_string());
            s.push(',');
            s.push_str(&self.render(m));
            s.push('\n');
        }
        s
    }

    pub fn has_prefix(&self) -> bool {
        self.prefix.is_some()
    }

    /// `T̃_k`, or `None` if prefix tables were not retained.
    pub fn prefix(&self, k: usize) -> Option<&[C]> {
        let levels = self.prefix.as_ref()?;
        let k = k.min(self.max_part);
        (0..=k).rev().find_map(|j| levels[j].as_deref())
    }
}

/// Builds `a_0..=a_N` by multiplying in the factors `f(x^k)^{b_k}`,
/// `k = 1..=N`.
pub fn coefficients<C: Coefficient, T: Real>(
    e: &Ensemble<T>,
    n: usize,
    opts: &TableOptions,
) -> Result<CoefficientTable<C>> {
    let max_part = opts.max_part.unwrap_or(n).min(n);
    if opts.retain_prefix && (max_part + 1).saturating_mul(n + 1) > PREFIX_ENTRY_CAP {
        return Err(Error::Table(format!(
            "prefix tables are capped at N = {PREFIX_CAP}, requested {n} with {max_part} levels"
        )));
    }
    let scale = match opts.scale {
        Scale::One => 1.0,
        Scale::Fixed(s) => s,
        Scale::Tilt => {
            if n == 0 {
                1.0
            } else {
                solve_tilt(e, n as u64)?.x.as_f64()
            }
        }
    };
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::param(format!("table scale must be positive, got {scale}")));
    }
    if C::EXACT && scale != 1.0 {
        return Err(Error::param("exact tables use scale 1"));
    }
    let mut t = vec![C::zero(); n + 1];
    t[0] = C::one();
    let mut prefix = opts.retain_prefix.then(|| vec![Some(t.clone())]);
    let f = e.series();
    for k in 1..=max_part {
        let b = e.b(k as u64).as_f64();
        if b == 0.0 {
            if let Some(p) = prefix.as_mut() {
                p.push(None);
            }
            continue;
        }
        let sk = scale.powi(k as i32);
        let fk = f.dilated(T::lit(sk));
        let geometric_integer = matches!(fk.kind(), SeriesKind::Geometric { .. })
            && b.fract() == 0.0
            && b <= 64.0;
        if geometric_integer {
            let y = match fk.kind() {
                SeriesKind::Geometric { y } => y.as_f64(),
                _ => unreachable!(),
            };
            if C::EXACT || y >= opts.drop_below {
                let yc = C::from_f64_exact(y)
                    .ok_or_else(|| Error::param("parameter not representable"))?;
                for _ in 0..b as u64 {
                    for m in k..=n {
                        let add = yc.clone() * t[m - k].clone();
                        t[m] = t[m].clone() + add;
                    }
                }
            }
        } else {
            let j_max = n / k;
            let mut w: Vec<C> = fk.power_coefficients_in(b, j_max)?;
            if !C::EXACT {
                truncate_weights(&mut w, opts.drop_below);
            }
            if w.len() > 1 {
                for m in (k..=n).rev() {
                    let mut acc = t[m].clone();
                    for (j, wj) in w.iter().enumerate().skip(1) {
                        if j * k > m {
                            break;
                        }
                        acc = acc + wj.clone() * t[m - j * k].clone();
                    }
                    t[m] = acc;
                }
            }
        }
        if let Some(p) = prefix.as_mut() {
            p.push(Some(t.clone()));
        }
    }
    if !t.iter().all(|v| v.to_f64().is_finite()) && !C::EXACT {
        return Err(Error::Table("coefficients overflow; use a smaller scale".into()));
    }
    Ok(CoefficientTable {
        n_max: n,
        max_part,
        scale,
        a: t,
        prefix,
    })
}

/// Drops the tail of a unimodal weight list once it falls below `rel` of its
/// maximum.
fn truncate_weights<C: Coefficient>(w: &mut Vec<C>, rel: f64) {
    let vals: Vec<f64> = w.iter().map(|c| c.to_f64()).collect();
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let peak = vals.iter().position(|v| *v == top).unwrap_or(0);
    if let Some(cut) = (peak..vals.len()).find(|&j| vals[j] < rel * top) {
        w.truncate(cut.max(1));
    }
}

/// Chooses exact arithmetic when every exponent up to `n` is an integer.
pub fn prefers_exact<T: Real>(e: &Ensemble<T>, n: usize) -> bool {
    e.weights().integral_up_to(n as u64)
}

/// `μ_x{N = m}` for `m ≤ N`.
#[derive(Clone, Debug, Serialize)]
pub struct PointMasses {
    pub x: f64,
    pub masses: Vec<f64>,
    /// `1 − Σ masses`.
    pub deficit: f64,
}

/// `μ_x{N = m} = a_m x^m / F(x)` for every `m` in the table.
pub fn point_masses<C: Coefficient, T: Real>(
    e: &Ensemble<T>,
    x: T,
    table: &CoefficientTable<C>,
) -> Result<PointMasses> {
    e.check_x(x)?;
    let xf = x.as_f64();
    if xf == 0.0 {
        let mut masses = vec![0.0; table.n_max + 1];
        masses[0] = 1.0;
        return Ok(PointMasses {
            x: xf,
            masses,
            deficit: 0.0,
        });
    }
    let ln_f = e.ln_partition_function(x)?.as_f64();
    let shift = (xf / table.scale).ln();
    let masses: Vec<f64> = table
        .a
        .iter()
        .enumerate()
        .map(|(m, c)| {
            if c.to_f64() == 0.0 && !C::EXACT {
                0.0
            } else {
                (c.ln() + m as f64 * shift - ln_f).exp()
            }
        })
        .collect();
    let mut s = CompensatedSum::new();
    for p in &masses {
        s.add(*p);
    }
    let deficit = 1.0 - s.value();
    if deficit > TRUNCATION_TOLERANCE {
        return Err(Error::Truncation(format!(
            "table of length {} misses mass {deficit:e} at x = {xf}",
            table.n_max
        )));
    }
    Ok(PointMasses {
        x: xf,
        masses,
        deficit,
    })
}

/// `μ_x{N = m}` for a single `m`.
pub fn point_mass<C: Coefficient, T: Real>(
    e: &Ensemble<T>,
    x: T,
    m: usize,
    table: &CoefficientTable<C>,
) -> Result<f64> {
    if m > table.n_max {
        return Err(Error::Table(format!("m = {m} exceeds table length {}", table.n_max)));
    }
    Ok(point_masses(e, x, table)?.masses[m])
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LocalLimitPoint {
    pub u: f64,
    pub m: u64,
    /// `√Var_x N · μ_x{N = m}`.
    pub scaled_mass: f64,
    /// `e^{−u²/2}/√(2π)`.
    pub gaussian: f64,
}

/// Evaluates `√Var_x N · μ_x{N = m(u)}`, `m(u) = round(E_x N + u √Var_x N)`,
/// with a float table scaled at `s = x` and long enough to hold all but
/// `1e−6` of the mass.
pub fn local_limit_probe<T: Real>(e: &Ensemble<T>, x: T, u_grid: &[f64]) -> Result<Vec<LocalLimitPoint>> {
    let mo = e.moments(x)?;
    let (mean, sd) = (mo.mean.as_f64(), mo.var.as_f64().sqrt());
    let hi = u_grid.iter().cloned().fold(0.0, f64::max);
    let n = (mean + (hi.max(0.0) + 10.0) * sd).ceil() as usize;
    let table: FloatTable = coefficients(
        e,
        n,
        &TableOptions {
            retain_prefix: false,
            scale: Scale::Fixed(x.as_f64()),
            ..Default::default()
        },
    )?;
    local_limit_probe_with(e, x, u_grid, &table)
}

/// [`local_limit_probe`] against a caller-supplied table.
pub fn local_limit_probe_with<C: Coefficient, T: Real>(
    e: &Ensemble<T>,
    x: T,
    u_grid: &[f64],
    table: &CoefficientTable<C>,
) -> Result<Vec<LocalLimitPoint>> {
    let mo = e.moments(x)?;
    let (mean, sd) = (mo.mean.as_f64(), mo.var.as_f64().sqrt());
    let pm = point_masses(e, x, table)?;
    u_grid
        .iter()
        .map(|&u| {
            let m = (mean + u * sd).round();
            if m < 0.0 || m as usize > table.n_max {
                return Err(Error::Table(format!("m({u}) = {m} outside the table")));
            }
            Ok(LocalLimitPoint {
                u,
                m: m as u64,
                scaled_mass: sd * pm.masses[m as usize],
                gaussian: (-u * u / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            })
        })
        .collect()
}

//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
    pub intervals: usize,
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
    floor: T,
}

fn kronrod<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Result<Segment<T>> {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut res_k = fc * T::lit(WGK[7]);
    let mut res_g = fc * T::lit(WG[3]);
    let mut abs_k = res_k.abs();
    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        if !(f1.is_finite() && f2.is_finite()) {
            return Err(Error::Quadrature(format!(
                "integrand not finite near {:?}",
                (center - dx).as_f64()
            )));
        }
        res_k = res_k + T::lit(WGK[j]) * (f1 + f2);
        abs_k = abs_k + T::lit(WGK[j]) * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g = res_g + T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    if !fc.is_finite() {
        return Err(Error::Quadrature(format!(
            "integrand not finite at {:?}",
            center.as_f64()
        )));
    }
    let value = res_k * half_len;
    let raw = ((res_k - res_g) * half_len).abs();
    // Roundoff floor relative to the absolute integrand mass.
    let floor = T::epsilon() * T::lit(50.0) * abs_k * half_len.abs();
    Ok(Segment {
        a,
        b,
        value,
        error: raw.max(floor),
        floor,
    })
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    opts: &QuadratureOptions,
) -> Result<Estimate<T>> {
    if a == b {
        return Ok(Estimate {
            value: T::zero(),
            error: T::zero(),
            intervals: 0,
        });
    }
    let mut segments = vec![kronrod(&f, a, b)?];
    let abs_tol = T::lit(opts.abs_tol);
    let rel_tol = T::lit(opts.rel_tol);
    loop {
        let total: T = segments.iter().fold(T::zero(), |acc, s| acc + s.value);
        let err: T = segments.iter().fold(T::zero(), |acc, s| acc + s.error);
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(Estimate {
                value: total,
                error: err,
                intervals: segments.len(),
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap())
            .map(|(i, _)| i)
            .expect("nonempty");
        // Every remaining error is at the roundoff floor; bisection cannot help.
        if segments[worst].error <= segments[worst].floor {
            return Ok(Estimate {
                value: total,
                error: err,
                intervals: segments.len(),
            });
        }
        if segments.len() >= opts.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {:e} after {} intervals",
                err.as_f64(),
                segments.len()
            )));
        }
        let seg = segments.swap_remove(worst);
        let mid = T::lit(0.5) * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval can no longer be split; keep its estimate.
            segments.push(Segment {
                error: seg.floor,
                ..seg
            });
            continue;
        }
        segments.push(kronrod(&f, seg.a, mid)?);
        segments.push(kronrod(&f, mid, seg.b)?);
    }
}

/// Integrates over `[a, b]` after splitting at the given interior breakpoints.
pub fn integrate_pieces<T: Real, F: Fn(T) -> T>(
    f: F,
    points: &[T],
    opts: &QuadratureOptions,
) -> Result<Estimate<T>> {
    let mut value = T::zero();
    let mut error = T::zero();
    let mut intervals = 0;
    for w in points.windows(2) {
        let est = integrate(&f, w[0], w[1], opts)?;
        value = value + est.value;
        error = error + est.error;
        intervals += est.intervals;
    }
    Ok(Estimate {
        value,
        error,
        intervals,
    })
}

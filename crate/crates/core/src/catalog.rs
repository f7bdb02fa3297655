//! Named ensembles and their closed-form reference data.
//!
//! Names accepted by [`parse`]:
//!
//! | name | f | weights |
//! |---|---|---|
//! | `uniform` | `1/(1−z)` | `b_k = 1` |
//! | `weighted(y)` | `1/(1−yz)` | `b_k = 1` |
//! | `restricted(S)` | `1/(1−z)` | indicator of `S` |
//! | `gibbs(θ,β)` | `e^{θz}` | `b_k = k^{β−1}` |
//! | `ordered_lists` | `gibbs(1,1)` | |
//! | `ewens(θ)` | `e^{θz}` | `b_k = 1/k` |
//!
//! `S` is `evens`, `odds`, a list `1,2,5`, or residues `m|r1,r2`.

use std::f64::consts::PI;

use crate::ensemble::{Ensemble, Regime};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::SeriesFunction;
use crate::special::{dilog, gamma, upper_incomplete_gamma};
use crate::weights::{Declared, PartSet, WeightRule, WeightSequence};

#[derive(Clone, Debug, PartialEq)]
pub enum CatalogName {
    Uniform,
    Weighted { y: f64 },
    Restricted(PartSet),
    Gibbs { theta: f64, beta: f64 },
    OrderedLists,
    Ewens { theta: f64 },
}

impl CatalogName {
    /// Canonical spelling, parseable by [`parse`].
    pub fn label(&self) -> String {
        match self {
            CatalogName::Uniform => "uniform".into(),
            CatalogName::Weighted { y } => format!("weighted({y})"),
            CatalogName::Restricted(s) => format!("restricted({})", set_label(s)),
            CatalogName::Gibbs { theta, beta } => format!("gibbs({theta},{beta})"),
            CatalogName::OrderedLists => "ordered_lists".into(),
            CatalogName::Ewens { theta } => format!("ewens({theta})"),
        }
    }

    pub fn expected_regime(&self) -> Regime {
        match self {
            CatalogName::Uniform => Regime::ErgodicPoleAtOne,
            CatalogName::OrderedLists | CatalogName::Gibbs { .. } => Regime::ErgodicSupercritical,
            CatalogName::Weighted { y } if *y > 1.0 => Regime::NonergodicGrandCanonical,
            CatalogName::Weighted { y } if *y == 1.0 => Regime::ErgodicPoleAtOne,
            CatalogName::Weighted { .. } => Regime::ErgodicSupercritical,
            CatalogName::Restricted(s) if s.contains(1) => Regime::ErgodicPoleAtOne,
            CatalogName::Restricted(_) | CatalogName::Ewens { .. } => Regime::OutOfScope,
        }
    }

    /// `1/(β+1)`.
    pub fn scaling_exponent(&self) -> Option<f64> {
        match self {
            CatalogName::Gibbs { beta, .. } => Some(1.0 / (beta + 1.0)),
            CatalogName::Ewens { .. } => None,
            _ => Some(0.5),
        }
    }
}

fn set_label(s: &PartSet) -> String {
    if *s == PartSet::evens() {
        return "evens".into();
    }
    if *s == PartSet::odds() {
        return "odds".into();
    }
    let join = |v: &std::collections::BTreeSet<u64>| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
    match s {
        PartSet::Residues { modulus, residues } => format!("{modulus}|{}", join(residues)),
        PartSet::Finite(parts) => join(parts),
    }
}

fn parse_number(s: &str, what: &str) -> Result<f64> {
    let v = s.split_once('=').map_or(s, |(_, v)| v).trim();
    v.parse::<f64>()
        .map_err(|_| Error::param(format!("{what}: cannot parse {v:?} as a number")))
}

pub(crate) fn parse_set(s: &str) -> Result<PartSet> {
    let s = s.trim();
    let list = |t: &str| -> Result<Vec<u64>> {
        t.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                p.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::param(format!("restricted: bad part size {p:?}")))
            })
            .collect()
    };
    match s {
        "evens" => Ok(PartSet::evens()),
        "odds" => Ok(PartSet::odds()),
        _ => match s.split_once('|') {
            Some((m, r)) => {
                let m = m
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| Error::param(format!("restricted: bad modulus {m:?}")))?;
                PartSet::residues(m, list(r)?)
            }
            None => PartSet::finite(list(s)?),
        },
    }
}

/// Parses a catalog name such as `weighted(2)` or `gibbs(theta=1, beta=2)`.
pub fn parse(name: &str) -> Result<CatalogName> {
    let name = name.trim();
    let (head, args) = match name.split_once('(') {
        Some((h, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| Error::param(format!("unbalanced parentheses in {name:?}")))?;
            (h.trim(), Some(inner))
        }
        None => (name, None),
    };
    let numbers = |n: usize| -> Result<Vec<f64>> {
        let a = args.unwrap_or("");
        let parts: Vec<&str> = a.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
        if parts.len() != n {
            return Err(Error::param(format!("{head} takes {n} parameter(s), got {}", parts.len())));
        }
        parts.iter().map(|p| parse_number(p, head)).collect()
    };
    let entry = match head {
        "uniform" if args.is_none_or(|a| a.trim().is_empty()) => CatalogName::Uniform,
        "ordered_lists" if args.is_none_or(|a| a.trim().is_empty()) => CatalogName::OrderedLists,
        "weighted" => CatalogName::Weighted { y: numbers(1)?[0] },
        "gibbs" => {
            let v = numbers(2)?;
            CatalogName::Gibbs {
                theta: v[0],
                beta: v[1],
            }
        }
        "ewens" => CatalogName::Ewens { theta: numbers(1)?[0] },
        "restricted" => CatalogName::Restricted(parse_set(args.unwrap_or(""))?),
        _ => return Err(Error::UnknownName(name.to_owned())),
    };
    Ok(entry)
}

/// The ensemble for a catalog entry.
pub fn make<T: Real>(entry: &CatalogName) -> Result<Ensemble<T>> {
    let e = match entry {
        CatalogName::Uniform => Ensemble::new(
            SeriesFunction::geometric(T::one())?,
            WeightSequence::new(WeightRule::Constant(T::one()))?,
        ),
        CatalogName::Weighted { y } => {
            if !(*y > 0.0) {
                return Err(Error::param("weighted: y must be positive"));
            }
            Ensemble::new(
                SeriesFunction::geometric(T::lit(*y))?,
                WeightSequence::new(WeightRule::Constant(T::one()))?,
            )
        }
        CatalogName::Restricted(set) => Ensemble::new(
            SeriesFunction::geometric(T::one())?,
            WeightSequence::new(WeightRule::Indicator(set.clone()))?,
        ),
        CatalogName::Gibbs { theta, beta } => gibbs(*theta, *beta)?,
        CatalogName::OrderedLists => gibbs(1.0, 1.0)?,
        CatalogName::Ewens { theta } => {
            if !(*theta > 0.0) {
                return Err(Error::param("ewens: θ must be positive"));
            }
            Ensemble::new(
                SeriesFunction::exponential_rate(T::lit(*theta))?,
                WeightSequence::new(WeightRule::Harmonic { theta: T::one() })?,
            )
            .with_regime(Regime::OutOfScope)
        }
    };
    Ok(e.with_name(entry.label()))
}

/// `c_k = θ k^β` written as `f = e^{θz}` with `b_k = k^{β−1}`.
fn gibbs<T: Real>(theta: f64, beta: f64) -> Result<Ensemble<T>> {
    if !(theta > 0.0 && beta > 0.0) {
        return Err(Error::param("gibbs: θ and β must be positive"));
    }
    let w = WeightSequence::new(WeightRule::Monomial {
        exponent: T::lit(beta - 1.0),
    })?
    .with_declared(Declared {
        beta: T::lit(beta),
        theta: T::lit(1.0 / beta),
        zeta: None,
        chi: None,
    })?;
    Ok(Ensemble::new(SeriesFunction::exponential_rate(T::lit(theta))?, w))
}

/// Parses and builds in one step.
pub fn make_named<T: Real>(name: &str) -> Result<Ensemble<T>> {
    make(&parse(name)?)
}

/// Closed-form `φ(t)`, in the scaling `α = 1/(1−x_n)`.
pub fn reference_shape(entry: &CatalogName, t: f64) -> Result<f64> {
    match entry {
        CatalogName::Uniform => Ok(-6.0 / (PI * PI) * (-(-t).exp()).ln_1p()),
        CatalogName::Weighted { y } if *y <= 1.0 && *y > 0.0 => {
            Ok(-(-y * (-t).exp()).ln_1p() / dilog(*y)?)
        }
        CatalogName::Gibbs { beta, .. } => Ok(gibbs_shape(*beta, t)),
        CatalogName::OrderedLists => Ok(gibbs_shape(1.0, t)),
        _ => Err(Error::Unavailable(format!(
            "no closed-form shape for {}",
            entry.label()
        ))),
    }
}

fn gibbs_shape(beta: f64, t: f64) -> f64 {
    (upper_incomplete_gamma(beta + 1.0, t) - t.powf(beta) * (-t).exp()) / (beta * gamma(beta + 1.0))
}

/// Closed-form `Ω`.
pub fn reference_omega(entry: &CatalogName) -> Result<f64> {
    match entry {
        CatalogName::Uniform => Ok(PI * PI / 6.0),
        CatalogName::Weighted { y } if *y <= 1.0 && *y > 0.0 => dilog(*y),
        CatalogName::Gibbs { theta, beta } => Ok(beta * theta * gamma(beta + 1.0)),
        CatalogName::OrderedLists => Ok(1.0),
        _ => Err(Error::Unavailable(format!("no closed-form Ω for {}", entry.label()))),
    }
}

/// Leading-order scaling factor `α⁽ⁿ⁾`.
pub fn reference_alpha(entry: &CatalogName, n: f64) -> Result<f64> {
    match entry {
        CatalogName::Uniform => Ok((6.0 * n).sqrt() / PI),
        CatalogName::Weighted { y } if *y <= 1.0 && *y > 0.0 => Ok((n / dilog(*y)?).sqrt()),
        CatalogName::Gibbs { theta, beta } => {
            Ok((n / (theta * gamma(beta + 1.0))).powf(1.0 / (beta + 1.0)))
        }
        CatalogName::OrderedLists => Ok(n.sqrt()),
        _ => Err(Error::Unavailable(format!("no closed-form α for {}", entry.label()))),
    }
}

/// The entries exercised by default test suites.
pub fn standard_entries() -> Vec<CatalogName> {
    vec![
        CatalogName::Uniform,
        CatalogName::Weighted { y: 0.5 },
        CatalogName::Weighted { y: 2.0 },
        CatalogName::Restricted(PartSet::odds()),
        CatalogName::Restricted(PartSet::evens()),
        CatalogName::Gibbs { theta: 1.0, beta: 1.0 },
        CatalogName::Gibbs { theta: 2.0, beta: 0.5 },
        CatalogName::OrderedLists,
        CatalogName::Ewens { theta: 1.0 },
    ]
}

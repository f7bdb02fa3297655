//! TOML ensemble descriptions.
//!
//! ```toml
//! name = "my-ensemble"          # optional
//!
//! [catalog]                     # either this table ...
//! name = "gibbs"
//! params = { theta = 1.0, beta = 2.0 }
//!
//! [f]                           # ... or [f] and [weights]
//! kind = "custom"               # geometric (y) | exponential (rate) | custom
//! coefficients = [1.0, 1.0, 0.5]
//! radius = inf
//! singularity = "none"          # pole (with pole_order) | essential | none
//!
//! [weights]
//! rule = "power_law"            # constant (value) | indicator (set) | power_law (theta, beta)
//! theta = 1.0                   # | monomial (exponent) | harmonic (theta) | explicit (values)
//! beta = 1.0
//!
//! [declared]                    # optional overrides
//! beta = 1.0
//!
//! [numerics]                    # optional overrides of `Numerics`
//! tilt_rel_tol = 1e-12
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::catalog::{self, CatalogName};
use crate::ensemble::{Ensemble, Numerics};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::{SeriesFunction, Singularity};
use crate::weights::{Declared, WeightRule, WeightSequence};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    catalog: Option<RawCatalog>,
    f: Option<RawSeries>,
    weights: Option<RawWeights>,
    declared: Option<RawDeclared>,
    numerics: Option<Numerics>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    name: String,
    #[serde(default)]
    params: BTreeMap<String, toml::Value>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawSeries {
    Geometric {
        #[serde(default = "one")]
        y: f64,
    },
    Exponential {
        #[serde(default = "one")]
        rate: f64,
    },
    Custom {
        coefficients: Vec<f64>,
        #[serde(default = "infinity")]
        radius: f64,
        #[serde(default = "none")]
        singularity: String,
        pole_order: Option<u32>,
    },
}

fn one() -> f64 {
    1.0
}

fn infinity() -> f64 {
    f64::INFINITY
}

fn none() -> String {
    "none".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
enum RawWeights {
    Constant { value: f64 },
    Indicator { set: String },
    PowerLaw { theta: f64, beta: f64 },
    Monomial { exponent: f64 },
    Harmonic { theta: f64 },
    Explicit { values: Vec<f64> },
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeclared {
    beta: Option<f64>,
    theta: Option<f64>,
    zeta: Option<f64>,
    chi: Option<f64>,
}

#[derive(Clone, Debug)]
enum Source {
    Catalog(CatalogName),
    Explicit {
        f: RawSeries,
        weights: RawWeights,
    },
}

/// A validated ensemble description.
#[derive(Clone, Debug)]
pub struct EnsembleConfig {
    pub name: Option<String>,
    source: Source,
    declared: RawDeclared,
    pub numerics: Numerics,
}

fn config_err(field: &str, message: impl ToString) -> Error {
    Error::Config {
        field: field.to_owned(),
        message: message.to_string(),
    }
}

fn at<T>(field: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| config_err(field, e))
}

fn catalog_string(c: &RawCatalog) -> Result<String> {
    if c.params.is_empty() {
        return Ok(c.name.clone());
    }
    let get = |key: &str| -> Result<String> {
        let field = format!("catalog.params.{key}");
        match c.params.get(key) {
            Some(toml::Value::Float(v)) => Ok(v.to_string()),
            Some(toml::Value::Integer(v)) => Ok(v.to_string()),
            Some(toml::Value::String(s)) => Ok(s.clone()),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    toml::Value::Integer(i) => Ok(i.to_string()),
                    _ => Err(config_err(&field, "expected integer part sizes")),
                })
                .collect::<Result<Vec<_>>>()
                .map(|v| v.join(",")),
            Some(_) => Err(config_err(&field, "unsupported value type")),
            None => Err(config_err(&field, "missing parameter")),
        }
    };
    let keys: &[&str] = match c.name.as_str() {
        "weighted" => &["y"],
        "gibbs" => &["theta", "beta"],
        "ewens" => &["theta"],
        "restricted" => &["set"],
        _ => &[],
    };
    if let Some(k) = c.params.keys().find(|k| !keys.contains(&k.as_str())) {
        return Err(config_err(
            &format!("catalog.params.{k}"),
            format!("unknown parameter for `{}`", c.name),
        ));
    }
    let args = keys.iter().map(|k| get(k)).collect::<Result<Vec<_>>>()?;
    Ok(format!("{}({})", c.name, args.join(",")))
}

fn check_numerics(n: &Numerics) -> Result<()> {
    let positive = [
        ("numerics.sum_rel_tol", n.sum_rel_tol),
        ("numerics.tilt_rel_tol", n.tilt_rel_tol),
        ("numerics.quad_abs_tol", n.quad_abs_tol),
        ("numerics.quad_rel_tol", n.quad_rel_tol),
        ("numerics.singular_cutoff", n.singular_cutoff),
        ("numerics.grand_tail", n.grand_tail),
    ];
    for (field, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(config_err(field, "must be positive and finite"));
        }
    }
    if n.max_terms == 0 || n.tilt_max_iter == 0 || n.quad_max_intervals == 0 {
        return Err(config_err("numerics", "iteration and term caps must be positive"));
    }
    Ok(())
}

impl EnsembleConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "document".into());
            config_err(&field, e.message())
        })?;
        let source = match (raw.catalog, raw.f, raw.weights) {
            (Some(c), None, None) => {
                let s = catalog_string(&c)?;
                Source::Catalog(at("catalog.name", catalog::parse(&s))?)
            }
            (None, Some(f), Some(weights)) => Source::Explicit { f, weights },
            (Some(_), _, _) => {
                return Err(config_err("catalog", "cannot be combined with [f] or [weights]"))
            }
            (None, None, _) => return Err(config_err("f", "missing: give [catalog] or [f] and [weights]")),
            (None, Some(_), None) => return Err(config_err("weights", "missing")),
        };
        let numerics = raw.numerics.unwrap_or_default();
        check_numerics(&numerics)?;
        let cfg = Self {
            name: raw.name,
            source,
            declared: raw.declared.unwrap_or_default(),
            numerics,
        };
        cfg.build::<f64>()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("document", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Builds the ensemble in the requested precision.
    pub fn build<T: Real>(&self) -> Result<Ensemble<T>> {
        let mut e = match &self.source {
            Source::Catalog(c) => at("catalog", catalog::make::<T>(c))?,
            Source::Explicit { f, weights } => {
                let f = build_series::<T>(f)?;
                let mut w = build_weights::<T>(weights)?;
                let d = self.declared;
                if d.beta.is_some() || d.theta.is_some() || d.zeta.is_some() || d.chi.is_some() {
                    let cur = *w.declared();
                    w = at(
                        "declared",
                        w.with_declared(Declared {
                            beta: d.beta.map_or(cur.beta, T::lit),
                            theta: d.theta.map_or(cur.theta, T::lit),
                            zeta: d.zeta.map(T::lit).or(cur.zeta),
                            chi: d.chi.map(T::lit).or(cur.chi),
                        }),
                    )?;
                }
                Ensemble::new(f, w)
            }
        };
        if let Some(n) = &self.name {
            e = e.with_name(n.clone());
        }
        Ok(e.with_numerics(self.numerics))
    }
}

fn build_series<T: Real>(f: &RawSeries) -> Result<SeriesFunction<T>> {
    match f {
        RawSeries::Geometric { y } => at("f.y", SeriesFunction::geometric(T::lit(*y))),
        RawSeries::Exponential { rate } => at("f.rate", SeriesFunction::exponential_rate(T::lit(*rate))),
        RawSeries::Custom {
            coefficients,
            radius,
            singularity,
            pole_order,
        } => {
            let sing = match (singularity.as_str(), pole_order) {
                ("pole", Some(m)) if *m > 0 => Singularity::Pole(*m),
                ("pole", _) => return Err(config_err("f.pole_order", "a positive pole order is required")),
                (_, Some(_)) => return Err(config_err("f.pole_order", "only valid with singularity = \"pole\"")),
                ("essential", None) => Singularity::Essential,
                ("none", None) => Singularity::None,
                (other, _) => {
                    return Err(config_err(
                        "f.singularity",
                        format!("expected pole, essential or none, got {other:?}"),
                    ))
                }
            };
            at(
                "f.coefficients",
                SeriesFunction::custom(coefficients.iter().map(|c| T::lit(*c)).collect(), T::lit(*radius), sing),
            )
        }
    }
}

fn build_weights<T: Real>(w: &RawWeights) -> Result<WeightSequence<T>> {
    let (field, rule) = match w {
        RawWeights::Constant { value } => ("weights.value", WeightRule::Constant(T::lit(*value))),
        RawWeights::Indicator { set } => (
            "weights.set",
            WeightRule::Indicator(at("weights.set", catalog::parse_set(set))?),
        ),
        RawWeights::PowerLaw { theta, beta } => (
            "weights",
            WeightRule::PowerLaw {
                theta: T::lit(*theta),
                beta: T::lit(*beta),
            },
        ),
        RawWeights::Monomial { exponent } => (
            "weights.exponent",
            WeightRule::Monomial {
                exponent: T::lit(*exponent),
            },
        ),
        RawWeights::Harmonic { theta } => ("weights.theta", WeightRule::Harmonic { theta: T::lit(*theta) }),
        RawWeights::Explicit { values } => (
            "weights.values",
            WeightRule::Explicit(values.iter().map(|v| T::lit(*v)).collect()),
        ),
    };
    at(field, WeightSequence::new(rule))
}

/// Resolves a `--ensemble` argument: a catalog name, or a path to a TOML file.
pub fn resolve(arg: &str) -> Result<EnsembleConfig> {
    match catalog::parse(arg) {
        Ok(c) => Ok(EnsembleConfig {
            name: None,
            source: Source::Catalog(c),
            declared: RawDeclared::default(),
            numerics: Numerics::default(),
        }),
        Err(Error::UnknownName(_)) if Path::new(arg).exists() => EnsembleConfig::from_path(Path::new(arg)),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Regime;

    #[test]
    fn catalog_tables() {
        let c = EnsembleConfig::from_toml("[catalog]\nname = \"weighted\"\nparams = { y = 2 }\n").unwrap();
        assert_eq!(c.build::<f64>().unwrap().regime(), Regime::NonergodicGrandCanonical);
        let c = EnsembleConfig::from_toml("[catalog]\nname = \"gibbs(1,1)\"\n").unwrap();
        assert_eq!(c.build::<f64>().unwrap().name(), Some("gibbs(1,1)"));
        let c = EnsembleConfig::from_toml("[catalog]\nname = \"restricted\"\nparams = { set = [1, 3, 5] }\n")
            .unwrap();
        assert!(c.build::<f64>().unwrap().b(3) == 1.0);
    }

    #[test]
    fn explicit_tables() {
        let text = r#"
name = "ordered"
[f]
kind = "exponential"
[weights]
rule = "constant"
value = 1.0
[numerics]
tilt_rel_tol = 1e-12
"#;
        let e = EnsembleConfig::from_toml(text).unwrap().build::<f64>().unwrap();
        assert_eq!(e.regime(), Regime::ErgodicSupercritical);
        assert_eq!(e.numerics().tilt_rel_tol, 1e-12);
        assert_eq!(e.name(), Some("ordered"));
        let text = r#"
[f]
kind = "custom"
coefficients = [1, 1, 1]
[weights]
rule = "monomial"
exponent = 0.5
[declared]
theta = 0.5
"#;
        let e = EnsembleConfig::from_toml(text).unwrap().build::<f64>().unwrap();
        assert_eq!(e.weights().declared().theta, 0.5);
        assert_eq!(e.weights().declared().beta, 1.5);
    }

    fn field_of(text: &str) -> String {
        match EnsembleConfig::from_toml(text) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of("[f]\nkind = \"geometric\"\ny = -1\n[weights]\nrule = \"constant\"\nvalue = 1\n"), "f.y");
        assert_eq!(field_of("[f]\nkind = \"geometric\"\n"), "weights");
        assert_eq!(field_of("[catalog]\nname = \"weighted\"\nparams = { z = 2 }\n"), "catalog.params.z");
        assert_eq!(field_of("[catalog]\nname = \"nope\"\n"), "catalog.name");
        assert_eq!(field_of("[catalog]\nname = \"uniform\"\n[numerics]\ngrand_tail = 0\n"), "numerics.grand_tail");
        assert_eq!(field_of("\n\n[catalog]\nnam = \"uniform\"\n"), "line 4");
        assert_eq!(
            field_of("[f]\nkind = \"custom\"\ncoefficients = [1, 1]\nsingularity = \"pole\"\n[weights]\nrule = \"constant\"\nvalue = 1\n"),
            "f.pole_order"
        );
    }

    #[test]
    fn resolve_names_and_paths() {
        assert!(resolve("uniform").is_ok());
        assert!(matches!(resolve("no-such-thing"), Err(Error::UnknownName(_))));
        let dir = std::env::temp_dir().join(format!("pm-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("e.toml");
        std::fs::write(&p, "[catalog]\nname = \"uniform\"\n").unwrap();
        assert!(resolve(p.to_str().unwrap()).is_ok());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}

//! TOML model definition files.
//!
//! ```toml
//! [model]
//! d = 1.0
//! tau = 0.5
//! nonlinearity = "vector_disease"   # or: expression = "-a*u + b*(1-u)*v"
//! K = 0.5                           # optional for named nonlinearities
//! M = 0.5                           # optional, with sigma
//! sigma = 1.0
//!
//! [model.params]
//! a = 1.0
//! b = 2.0
//!
//! [kernel]
//! kind = "gaussian"                 # dirac | gaussian | uniform | tabulated
//! variance = 1.0
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::kernel::KernelSpec;
use crate::model::{Nonlinearity, ReactionModel};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    model: ModelSection,
    #[serde(default)]
    kernel: Option<KernelSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    d: f64,
    #[serde(default)]
    tau: f64,
    #[serde(rename = "K")]
    k: Option<f64>,
    nonlinearity: Option<String>,
    expression: Option<String>,
    #[serde(rename = "M")]
    m: Option<f64>,
    sigma: Option<f64>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    kind: String,
    variance: Option<f64>,
    half_width: Option<f64>,
    path: Option<PathBuf>,
    points: Option<Vec<[f64; 2]>>,
    lambda0: Option<f64>,
}

/// Parses a model file; relative table paths resolve against `base_dir`.
pub fn parse_model(text: &str, base_dir: &Path) -> Result<ReactionModel> {
    let file: ModelFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let m = file.model;
    let kernel = match file.kernel {
        Some(k) => build_kernel(k, base_dir)?,
        None => KernelSpec::dirac(),
    };
    let param = |name: &str| -> Result<f64> {
        m.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("missing parameter '{name}' in [model.params]")))
    };
    let allowed: &[&str] = match m.nonlinearity.as_deref() {
        Some("fisher") => &[],
        Some("vector_disease") => &["a", "b"],
        Some("nicholson") => &["a", "p", "q"],
        Some("age_structured") => &["b", "gamma", "delta"],
        Some("logistic") => &[],
        _ => &[],
    };
    if m.nonlinearity.is_some() {
        if let Some(extra) = m.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown parameter '{extra}' for this nonlinearity")));
        }
    }
    let nonlinearity = match (m.nonlinearity.as_deref(), &m.expression) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("give either 'nonlinearity' or 'expression', not both".into()))
        }
        (None, None) => return Err(Error::Config("missing 'nonlinearity' or 'expression'".into())),
        (None, Some(src)) => {
            let mut consts = m.params.clone();
            consts.insert("d".into(), m.d);
            consts.insert("tau".into(), m.tau);
            if let Some(k) = m.k {
                consts.insert("K".into(), k);
            }
            Nonlinearity::Expression(Expression::parse(src, &consts)?)
        }
        (Some("fisher"), None) => Nonlinearity::Fisher,
        (Some("vector_disease"), None) => Nonlinearity::VectorDisease {
            a: param("a")?,
            b: param("b")?,
        },
        (Some("nicholson"), None) => Nonlinearity::Nicholson {
            a: param("a")?,
            p: param("p")?,
            q: param("q")?,
        },
        (Some("age_structured"), None) => Nonlinearity::AgeStructured {
            b: param("b")?,
            gamma: param("gamma")?,
            delta: param("delta")?,
            tau: m.tau,
        },
        (Some("logistic"), None) => Nonlinearity::Logistic {
            k: m.k.ok_or_else(|| Error::Config("logistic needs K".into()))?,
        },
        (Some(other), None) => return Err(Error::Config(format!("unknown nonlinearity '{other}'"))),
    };
    let model = ReactionModel::new(m.d, m.tau, m.k, nonlinearity, kernel)?;
    match (m.m, m.sigma) {
        (Some(mm), Some(s)) => model.with_f2(mm, s),
        (Some(mm), None) => model.with_f2(mm, 1.0),
        (None, Some(_)) => Err(Error::Config("'sigma' given without 'M'".into())),
        (None, None) => Ok(model),
    }
}

/// Reads and parses a model file from disk.
pub fn load_model(path: &Path) -> Result<ReactionModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read model file {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_model(&text, base)
}

fn build_kernel(k: KernelSection, base_dir: &Path) -> Result<KernelSpec> {
    let unexpected = |field: &str| Error::Config(format!("kernel kind '{}' does not take '{field}'", k.kind));
    let spec = match k.kind.as_str() {
        "dirac" => {
            if k.variance.is_some() || k.half_width.is_some() || k.path.is_some() || k.points.is_some() {
                return Err(unexpected("parameters"));
            }
            KernelSpec::dirac()
        }
        "gaussian" => {
            if k.half_width.is_some() || k.path.is_some() || k.points.is_some() {
                return Err(unexpected("half_width/path/points"));
            }
            KernelSpec::gaussian(k.variance.ok_or_else(|| Error::Config("gaussian kernel needs 'variance'".into()))?)?
        }
        "uniform" => {
            if k.variance.is_some() || k.path.is_some() || k.points.is_some() {
                return Err(unexpected("variance/path/points"));
            }
            KernelSpec::uniform(
                k.half_width.ok_or_else(|| Error::Config("uniform kernel needs 'half_width'".into()))?,
            )?
        }
        "tabulated" => {
            if k.variance.is_some() || k.half_width.is_some() {
                return Err(unexpected("variance/half_width"));
            }
            let points = match (&k.points, &k.path) {
                (Some(p), None) => p.iter().map(|[a, b]| (*a, *b)).collect(),
                (None, Some(path)) => read_table(&base_dir.join(path))?,
                _ => return Err(Error::Config("tabulated kernel needs exactly one of 'points' or 'path'".into())),
            };
            KernelSpec::tabulated(points)?
        }
        other => return Err(Error::Config(format!("unknown kernel kind '{other}'"))),
    };
    match k.lambda0 {
        Some(l) => spec.with_lambda0(l),
        None => Ok(spec),
    }
}

/// Two columns `offset density`, separated by whitespace or commas; `#` starts a comment.
fn read_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read kernel table {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("{}:{}: bad number '{s}'", path.display(), no + 1)))
        };
        if cols.len() != 2 {
            return Err(Error::Config(format!("{}:{}: expected two columns", path.display(), no + 1)));
        }
        out.push((parse(cols[0])?, parse(cols[1])?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelKind;
    use crate::model::F2Source;

    fn parse(text: &str) -> Result<ReactionModel> {
        parse_model(text, Path::new("."))
    }

    #[test]
    fn fisher_defaults() {
        let m = parse("[model]\nd = 1.0\nnonlinearity = \"fisher\"\n").unwrap();
        assert_eq!(m.k(), 1.0);
        assert_eq!(m.tau(), 0.0);
        assert!(m.kernel().is_dirac());
    }

    #[test]
    fn vector_disease_with_kernel_and_constants() {
        let m = parse(
            "[model]\nd = 2.0\ntau = 0.5\nnonlinearity = \"vector_disease\"\nM = 1.0\nsigma = 1.0\n\
             [model.params]\na = 1.0\nb = 2.0\n[kernel]\nkind = \"gaussian\"\nvariance = 0.5\n",
        )
        .unwrap();
        assert_eq!(m.k(), 0.5);
        assert_eq!(m.f2().source, F2Source::Supplied);
        assert!(matches!(m.kernel().kind(), KernelKind::Gaussian { variance } if *variance == 0.5));
    }

    #[test]
    fn expression_model() {
        let m = parse("[model]\nd = 1.0\nK = 1.0\nexpression = \"r*v*(K-u)\"\n[model.params]\nr = 2.0\n").unwrap();
        assert_eq!(m.f(0.5, 1.0), 1.0);
    }

    #[test]
    fn inline_tabulated_kernel() {
        let m = parse(
            "[model]\nd = 1.0\nnonlinearity = \"fisher\"\n[kernel]\nkind = \"tabulated\"\n\
             points = [[-1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]\n",
        )
        .unwrap();
        assert!((m.kernel().mgf(0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_combinations() {
        assert!(parse("[model]\nd = 1.0\nnonlinearity = \"fisher\"\nspeed = 3\n").is_err());
        assert!(parse("[model]\nd = 1.0\nnonlinearity = \"fisher\"\n[kernel]\nkind = \"dirac\"\nwidth = 1\n").is_err());
        assert!(parse("[model]\nd = 1.0\nnonlinearity = \"fisher\"\n[kernel]\nkind = \"gaussian\"\n").is_err());
        assert!(parse("[model]\nd = 1.0\nnonlinearity = \"mystery\"\n").is_err());
        assert!(parse("[model]\nd = 1.0\n").is_err());
        assert!(parse("[model]\nd = 1.0\nnonlinearity = \"vector_disease\"\n[model.params]\na = 1.0\n").is_err());
        assert!(parse("[model]\nd = 1.0\nnonlinearity = \"fisher\"\n[model.params]\nz = 1.0\n").is_err());
        assert!(parse("[model]\nd = 1.0\nexpression = \"v*(1-u)\"\n").is_err());
    }
}

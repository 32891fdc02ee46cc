//! TOML configuration schema, dotted-key overrides and config hashing.
//!
//! ```toml
//! [domain]
//! x_lo = 0.0
//! x_hi = 1.0
//! n_x = 64            # interior points
//!
//! [time]
//! period = 1.0
//! n_t = 200           # steps per period
//!
//! [diffusion]
//! kappa = [0.01]
//! a = ["1"]           # optional, default 1
//!
//! [boundary]
//! kind = "neumann"    # dirichlet | neumann | robin
//! b = ["1"]           # robin only, one per component
//!
//! [reaction]
//! form = "split"      # combined (uses `entries`) | split (uses `v`, `f`)
//! v = [["1"]]
//! f = [["1 + x"]]
//! ```
//!
//! Entries are numbers or expression strings in `x` and `t`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expr::Expr;

/// A number or an expression string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Text(String),
}

impl Scalar {
    pub fn to_expr(&self) -> Result<Expr> {
        match self {
            Scalar::Num(v) => Ok(Expr::constant(*v)),
            Scalar::Text(s) => Expr::parse(s),
        }
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Num(v)
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_x: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub period: f64,
    pub n_t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    pub kappa: Vec<f64>,
    #[serde(default)]
    pub a: Option<Vec<Scalar>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub kind: String,
    #[serde(default)]
    pub b: Option<Vec<Scalar>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReactionForm {
    Combined,
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionConfig {
    pub form: ReactionForm,
    #[serde(default)]
    pub entries: Option<Vec<Vec<Scalar>>>,
    #[serde(default)]
    pub v: Option<Vec<Vec<Scalar>>>,
    #[serde(default)]
    pub f: Option<Vec<Vec<Scalar>>>,
}

/// Nonlinear reaction `G(x, t, q)` for periodic-solution runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearConfig {
    /// One expression per component in `x`, `t`, `q1..qn`.
    pub g: Vec<String>,
    /// Positive periodic lower certificate, expressions in `t`.
    pub v_lower: Vec<Scalar>,
    /// Positive constant upper certificate.
    pub v_upper: Vec<f64>,
    #[serde(default)]
    pub tol_fp: Option<f64>,
    #[serde(default)]
    pub max_periods: Option<usize>,
}

/// Zika vector-host parameters; each field is an expression in `x`, `t`
/// (`h_u` in `x` only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZikaConfig {
    pub h_u: Scalar,
    pub beta: Scalar,
    pub gamma: Scalar,
    pub mu1: Scalar,
    pub mu2: Scalar,
    pub sigma1: Scalar,
    pub sigma2: Scalar,
    #[serde(default = "one")]
    pub delta1: Scalar,
    #[serde(default = "one")]
    pub delta2: Scalar,
    #[serde(default = "one_f")]
    pub kappa1: f64,
    #[serde(default = "one_f")]
    pub kappa2: f64,
}

fn one() -> Scalar {
    Scalar::Num(1.0)
}

fn one_f() -> f64 {
    1.0
}

/// Run options shared by subcommands.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mu_min: Option<f64>,
    #[serde(default)]
    pub mu_max: Option<f64>,
    #[serde(default)]
    pub tol_mu: Option<f64>,
    /// Sweep multipliers applied to the base diffusion vector.
    #[serde(default)]
    pub kappa_sweep: Option<Vec<f64>>,
    /// `r0` or `eigenvalue`.
    #[serde(default)]
    pub what: Option<String>,
    /// `pde` (default), `averaged`, or `frozen:<node>`.
    #[serde(default)]
    pub setting: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub time: Option<TimeConfig>,
    #[serde(default)]
    pub diffusion: Option<DiffusionConfig>,
    #[serde(default)]
    pub boundary: Option<BoundaryConfig>,
    #[serde(default)]
    pub reaction: Option<ReactionConfig>,
    #[serde(default)]
    pub nonlinear: Option<NonlinearConfig>,
    #[serde(default)]
    pub zika: Option<ZikaConfig>,
    #[serde(default)]
    pub run: Option<RunConfig>,
}

impl Config {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        Self::from_toml_with_overrides(src, &[])
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_with_overrides(&src, overrides)
    }

    /// Parse `src`, then apply `key=value` overrides with dotted keys
    /// (`diffusion.kappa=[0.5]`, `time.n_t=400`). Values are parsed as TOML
    /// values, falling back to a plain string.
    pub fn from_toml_with_overrides(src: &str, overrides: &[String]) -> Result<Self> {
        let table = resolved_table(src, overrides)?;
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(error_key(&e), e.message().to_string()))
    }
}

fn resolved_table(src: &str, overrides: &[String]) -> Result<toml::Table> {
    let mut table: toml::Table = src
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<config>", e.message().to_string()))?;
    for ov in overrides {
        apply_override(&mut table, ov)?;
    }
    Ok(table)
}

fn error_key(e: &toml::de::Error) -> String {
    // serde messages name the offending field; keep them as the key
    let msg = e.message();
    match msg.split('`').nth(1) {
        Some(k) => k.to_string(),
        None => "<config>".to_string(),
    }
}

fn apply_override(table: &mut toml::Table, ov: &str) -> Result<()> {
    let (key, raw) = ov
        .split_once('=')
        .ok_or_else(|| Error::config(ov, "override must be key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = parse_value(raw);
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty path segment"));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("'{part}' is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Short SHA-256 digest of the resolved configuration (after overrides).
pub fn config_hash(src: &str, overrides: &[String]) -> Result<String> {
    let table = resolved_table(src, overrides)?;
    let canonical = toml::to_string(&table)
        .map_err(|e| Error::config("<config>", e.to_string()))?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(hex::encode(&digest[..8]))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = r#"
        [domain]
        x_lo = 0.0
        x_hi = 1.0
        n_x = 8
        [time]
        period = 1.0
        n_t = 16
        [reaction]
        form = "split"
        v = [[1.0]]
        f = [["1 + x"]]
    "#;

    #[test]
    fn parses_mixed_scalars() {
        let cfg = Config::from_toml_str(SRC).unwrap();
        let r = cfg.reaction.unwrap();
        assert_eq!(r.form, ReactionForm::Split);
        assert_eq!(r.v.unwrap()[0][0], Scalar::Num(1.0));
        assert_eq!(r.f.unwrap()[0][0], Scalar::Text("1 + x".into()));
    }

    #[test]
    fn overrides_apply_dotted_keys() {
        let cfg = Config::from_toml_with_overrides(
            SRC,
            &[
                "time.n_t=64".into(),
                "diffusion.kappa=[0.5]".into(),
                "boundary.kind=dirichlet".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.time.unwrap().n_t, 64);
        assert_eq!(cfg.diffusion.unwrap().kappa, vec![0.5]);
        assert_eq!(cfg.boundary.unwrap().kind, "dirichlet");
    }

    #[test]
    fn unknown_key_names_field() {
        let err = Config::from_toml_str(&format!("{SRC}\n[run]\nbogus = 1\n")).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn hash_is_stable_and_override_sensitive() {
        let a = config_hash(SRC, &[]).unwrap();
        let b = config_hash(SRC, &[]).unwrap();
        let c = config_hash(SRC, &["time.n_t=32".into()]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 16);
    }
}

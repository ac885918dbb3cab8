//! Run configuration: a strict JSON document plus `key.path=value`
//! overrides applied before it is parsed.

use std::path::PathBuf;

use plaplab::extraction::ExtractionConfig;
use plaplab::pfunction::WeightedConfig;
use plaplab::{Params, QuadConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    BubbleCheck,
    Deficit,
    Extract,
    Sweep,
    IdentityCheck,
    MatrixCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::BubbleCheck => "bubble-check",
            Command::Deficit => "deficit",
            Command::Extract => "extract",
            Command::Sweep => "sweep",
            Command::IdentityCheck => "identity-check",
            Command::MatrixCheck => "matrix-check",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    pub n: usize,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyBlock {
    pub lambda: f64,
    /// Scales checked by bubble-check.
    pub lambdas: Vec<f64>,
    pub epsilon: f64,
    pub epsilon_grid: Vec<f64>,
    pub phi_radius: f64,
    /// Two-column radial profile to use instead of the perturbed bubble.
    pub profile: Option<PathBuf>,
}

impl Default for FamilyBlock {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            lambdas: vec![0.5, 1.0, 2.0],
            epsilon: 1e-3,
            epsilon_grid: vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
            phi_radius: 1.0,
            profile: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatrixBlock {
    pub dims: Vec<usize>,
    pub trials: usize,
    pub slack: f64,
}

impl Default for MatrixBlock {
    fn default() -> Self {
        Self {
            dims: vec![2, 3, 4, 5, 6],
            trials: 10_000,
            slack: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentityBlock {
    pub radii: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Step of the outer difference quotient.
    pub h: f64,
    pub tolerance: f64,
}

impl Default for IdentityBlock {
    fn default() -> Self {
        Self {
            radii: 20,
            r_min: 0.2,
            r_max: 5.0,
            h: 1e-4,
            tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    /// Falls back to `PLAPLAB_OUT_DIR`, then `plaplab-out`.
    pub dir: Option<PathBuf>,
    pub plots: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub params: ParamsBlock,
    #[serde(default)]
    pub family: FamilyBlock,
    #[serde(default)]
    pub quad: QuadConfig,
    #[serde(default)]
    pub schedule: ExtractionConfig,
    #[serde(default)]
    pub weighted: WeightedConfig,
    #[serde(default)]
    pub matrix: MatrixBlock,
    #[serde(default)]
    pub identity: IdentityBlock,
    #[serde(default = "default_dictionary")]
    pub dictionary_size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputBlock,
}

fn default_dictionary() -> usize {
    16
}

fn default_seed() -> u64 {
    42
}

impl RunConfig {
    pub fn params(&self) -> Result<Params, CliError> {
        Params::new(self.params.n, self.params.p).map_err(|e| CliError::Config(e.to_string()))
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.params()?;
        self.quad
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let f = &self.family;
        if !(f.lambda > 0.0) || f.lambdas.iter().any(|l| !(*l > 0.0)) {
            return bad("bubble scales must be positive".into());
        }
        if !(f.phi_radius > 0.0) {
            return bad(format!("phi_radius {} must be positive", f.phi_radius));
        }
        if !(0.0..1.0).contains(&f.epsilon) {
            return bad(format!("epsilon {} must lie in [0, 1)", f.epsilon));
        }
        if self.command == Command::Sweep {
            if f.epsilon_grid.is_empty() || f.epsilon_grid.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                return bad("epsilon_grid must be nonempty with entries in (0, 1)".into());
            }
            if f.epsilon_grid.windows(2).any(|w| w[1] >= w[0]) {
                return bad("epsilon_grid must be strictly decreasing".into());
            }
        }
        if self.matrix.dims.iter().any(|d| *d < 2) || self.matrix.trials == 0 {
            return bad("matrix dims must be at least 2 and trials positive".into());
        }
        let id = &self.identity;
        if id.radii == 0 || !(id.r_min > 0.0 && id.r_max > id.r_min) || !(id.h > 0.0) {
            return bad("identity block needs radii > 0, 0 < r_min < r_max and h > 0".into());
        }
        if self.dictionary_size == 0 {
            return bad("dictionary_size must be positive".into());
        }
        Ok(())
    }
}

/// Set `path` (dot separated) in a JSON object tree, creating missing
/// objects along the way. The value is read as JSON when it parses and as
/// a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{path}`")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("`{path}` descends into a non-object")))?;
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| CliError::Config(format!("`{path}` descends into a non-object")))?
        .insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Parse and validate a config text with overrides applied in order.
pub fn load(text: &str, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut tree: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
    if !tree.is_object() {
        return Err(CliError::Config("config must be a JSON object".into()));
    }
    for o in overrides {
        apply_override(&mut tree, o)?;
    }
    let cfg: RunConfig =
        serde_json::from_value(tree).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"command": "bubble-check", "params": {"n": 4, "p": 2}}"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = load(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.command, Command::BubbleCheck);
        assert_eq!(cfg.quad, QuadConfig::default());
        assert_eq!(cfg.family.lambdas, vec![0.5, 1.0, 2.0]);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn overrides_win() {
        let cfg = load(
            MINIMAL,
            &[
                "params.p=3".into(),
                "quad.rel_tol=1e-10".into(),
                "command=sweep".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.params.p, 3.0);
        assert_eq!(cfg.quad.rel_tol, 1e-10);
        assert_eq!(cfg.command, Command::Sweep);
    }

    #[test]
    fn unknown_and_invalid_keys_are_rejected() {
        for (text, ov) in [
            (
                r#"{"command": "sweep", "params": {"n": 4, "p": 2}, "extra": 1}"#,
                None,
            ),
            (MINIMAL, Some("quad.rel_tols=1")),
            (MINIMAL, Some("params.p=4")),
            (MINIMAL, Some("command=explode")),
            (MINIMAL, Some("family.epsilon_grid=[1e-3, 1e-2]")),
            ("[1, 2]", None),
            (MINIMAL, Some("noequals")),
        ] {
            let mut ovs: Vec<String> = ov.into_iter().map(String::from).collect();
            if ov == Some("family.epsilon_grid=[1e-3, 1e-2]") {
                ovs.push("command=sweep".into());
            }
            assert!(
                matches!(load(text, &ovs), Err(CliError::Config(_))),
                "{text} {ovs:?}"
            );
        }
    }
}

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytic::{build_ndim_damped, coupled_system, ClosedForm, Coupled2d, DampedOscillator, Drag1d};
use crate::integrators::{IntegratorConfig, Method};
use crate::model::{Matrix, State, SystemDefinition};
use crate::reconstruction::{ReconstructionOptions, DEFAULT_DOMAIN_SLACK, DEFAULT_GRID_POINTS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[serde(rename = "drag-1d")]
    Drag1d,
    #[serde(rename = "coupled-2d")]
    Coupled2d,
    DampedOscillator,
    LinearNdim,
}

/// Family tag plus the parameters that family uses; the others must be absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSection {
    pub family: Family,
    /// drag-1d: damping coefficient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// damped-oscillator: damping rate, `C = 2·eta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// damped-oscillator: natural frequency, `K = omega²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// linear-ndim: rows of `C`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<Vec<Vec<f64>>>,
    /// linear-ndim: rows of `K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubstituteSection {
    pub method: Method,
    pub step: f64,
}

impl Default for SubstituteSection {
    fn default() -> Self {
        Self { method: Method::Gauss4, step: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Turning threshold relative to `max |q̇_i|`.
    pub turn_rel: f64,
    /// Division threshold relative to `max |q_i|`.
    pub div_rel: f64,
    pub domain_slack: f64,
    pub grid_points: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { turn_rel: 1e-8, div_rel: 1e-6, domain_slack: DEFAULT_DOMAIN_SLACK, grid_points: DEFAULT_GRID_POINTS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub coincidence: f64,
    pub divergence: f64,
    pub hamiltonian: f64,
    pub restriction: f64,
    pub gradient: f64,
    pub volume: f64,
    pub identity: f64,
    pub stiffness: f64,
    pub energy_balance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            coincidence: 1e-6,
            divergence: 1e-3,
            hamiltonian: 1e-6,
            restriction: 1e-6,
            gradient: 1e-5,
            volume: 1e-6,
            identity: 1e-12,
            stiffness: 1e-6,
            energy_balance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditSection {
    /// Relative size of the `±` perturbation along each phase coordinate.
    pub perturbation: f64,
    pub gradient_samples: usize,
    pub stiffness_samples: usize,
    /// Tolerance of the variational integration.
    pub variational_tol: f64,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self { perturbation: 1e-2, gradient_samples: 100, stiffness_samples: 100, variational_tol: 1e-11 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Artifact {
    Trajectory,
    Reconstruction,
    Report,
    Plots,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Outputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub artifacts: Vec<Artifact>,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            dir: None,
            artifacts: vec![Artifact::Trajectory, Artifact::Reconstruction, Artifact::Report, Artifact::Plots],
        }
    }
}

impl Outputs {
    pub fn wants(&self, a: Artifact) -> bool {
        self.artifacts.contains(&a)
    }
}

/// A fully specified run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub system: SystemSection,
    pub ic: InitialCondition,
    /// Integrator for the dissipative system.
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub substitute: SubstituteSection,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub outputs: Outputs,
}

/// A parsed config and the unknown keys it contained (empty in strict mode).
#[derive(Clone, Debug)]
pub struct ParsedConfig {
    pub config: RunConfig,
    pub unknown_keys: Vec<String>,
}

/// Parse TOML. Unknown keys are collected; `strict` turns them into an error.
pub fn parse_config(text: &str, strict: bool) -> Result<ParsedConfig, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut unknown = Vec::new();
    let config: RunConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
        .map_err(|e| ConfigError::Parse(e.to_string()))?;
    unknown.sort();
    if strict && !unknown.is_empty() {
        return Err(ConfigError::UnknownKeys(unknown));
    }
    config.validate()?;
    Ok(ParsedConfig { config, unknown_keys: unknown })
}

pub fn load_config(path: &std::path::Path, strict: bool) -> Result<ParsedConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    parse_config(&text, strict)
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix, ConfigError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(ConfigError::Invalid(format!("system.{what} must be a non-empty rectangular array of rows")));
    }
    Ok(Matrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

impl RunConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.system;
        let allowed: &[&str] = match s.family {
            Family::Drag1d => &["c"],
            Family::Coupled2d => &[],
            Family::DampedOscillator => &["eta", "omega"],
            Family::LinearNdim => &["damping", "stiffness"],
        };
        let present = [
            ("c", s.c.is_some()),
            ("eta", s.eta.is_some()),
            ("omega", s.omega.is_some()),
            ("damping", s.damping.is_some()),
            ("stiffness", s.stiffness.is_some()),
        ];
        for (key, set) in present {
            if set && !allowed.contains(&key) {
                return Err(ConfigError::Invalid(format!("system.{key} does not apply to family {:?}", s.family)));
            }
            if !set && allowed.contains(&key) && key != "damping" {
                return Err(ConfigError::Invalid(format!("system.{key} is required for family {:?}", s.family)));
            }
        }
        let n = self.system()?.dim();
        if self.ic.q.len() != n || self.ic.p.len() != n {
            return Err(ConfigError::Invalid(format!(
                "ic needs {n} positions and {n} momenta, got {} and {}",
                self.ic.q.len(),
                self.ic.p.len()
            )));
        }
        if s.family == Family::Coupled2d {
            Coupled2d::new([self.ic.q[0], self.ic.q[1]], [self.ic.p[0], self.ic.p[1]])
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        self.integrator.validate(0.0).map_err(|e| ConfigError::Invalid(format!("integrator: {e}")))?;
        if self.integrator.method.is_symplectic() {
            return Err(ConfigError::Invalid(
                "integrator: the dissipative system needs rk4-fixed or rk45-adaptive".into(),
            ));
        }
        self.substitute_integrator().validate(0.0).map_err(|e| ConfigError::Invalid(format!("substitute: {e}")))?;
        if !self.substitute.method.is_symplectic() {
            return Err(ConfigError::Invalid("substitute: method must be symplectic".into()));
        }
        let positive = [
            ("thresholds.turn_rel", self.thresholds.turn_rel),
            ("thresholds.div_rel", self.thresholds.div_rel),
            ("audit.perturbation", self.audit.perturbation),
            ("audit.variational_tol", self.audit.variational_tol),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(ConfigError::Invalid(format!("{k} must be positive")));
        }
        if !(self.thresholds.domain_slack >= 0.0) {
            return Err(ConfigError::Invalid("thresholds.domain_slack must be non-negative".into()));
        }
        if self.audit.gradient_samples == 0 || self.audit.stiffness_samples == 0 {
            return Err(ConfigError::Invalid("audit sample counts must be positive".into()));
        }
        Ok(())
    }

    pub fn system(&self) -> Result<SystemDefinition, ConfigError> {
        let s = &self.system;
        let invalid = |e: crate::error::AnalyticError| ConfigError::Invalid(e.to_string());
        Ok(match s.family {
            Family::Drag1d => Drag1d::new(s.c.unwrap_or(f64::NAN), 0.0, 0.0).map_err(invalid)?.system(),
            Family::Coupled2d => coupled_system(),
            Family::DampedOscillator => {
                DampedOscillator::new(s.eta.unwrap_or(f64::NAN), s.omega.unwrap_or(f64::NAN), 0.0, 0.0)
                    .map_err(invalid)?
                    .system()
            }
            Family::LinearNdim => {
                let k = matrix(s.stiffness.as_deref().unwrap_or_default(), "stiffness")?;
                let c = match &s.damping {
                    Some(rows) => matrix(rows, "damping")?,
                    None => Matrix::zeros(k.nrows(), k.ncols()),
                };
                build_ndim_damped(c, k).map_err(invalid)?
            }
        })
    }

    pub fn initial_state(&self) -> State {
        State::from_slices(0.0, &self.ic.q, &self.ic.p)
    }

    pub fn reconstruction_options(&self) -> ReconstructionOptions {
        let t = &self.thresholds;
        ReconstructionOptions {
            turn_rel: t.turn_rel,
            div_rel: t.div_rel,
            domain_slack: t.domain_slack,
            grid_points: t.grid_points,
        }
    }

    /// Symplectic integrator for the substitute over the same horizon and output grid.
    pub fn substitute_integrator(&self) -> IntegratorConfig {
        let mut cfg = IntegratorConfig::fixed(self.substitute.method, self.integrator.t_end, self.substitute.step);
        cfg.output_step = Some(self.integrator.output_step());
        cfg.max_steps = self.integrator.max_steps;
        cfg
    }

    /// SHA-256 of the canonical JSON form of the parsed config, excluding
    /// the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.outputs.dir = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DRAG: &str = r#"
seed = 7
[system]
family = "drag-1d"
c = 1.0
[ic]
q = [0.0]
p = [1.0]
[integrator]
method = "rk45-adaptive"
t_end = 5.0
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let p = parse_config(DRAG, true).unwrap();
        assert!(p.unknown_keys.is_empty());
        let c = p.config;
        assert_eq!(c.substitute.method, Method::Gauss4);
        assert_eq!(c.tolerances.coincidence, 1e-6);
        assert_eq!(c.system().unwrap().dim(), 1);
        assert_eq!(c.substitute_integrator().t_end, 5.0);
    }

    #[test]
    fn unknown_keys_warn_or_reject() {
        let text = format!("{DRAG}\n[tolerances]\ncoincidnce = 1.0\n");
        let lax = parse_config(&text, false).unwrap();
        assert_eq!(lax.unknown_keys, ["tolerances.coincidnce"]);
        match parse_config(&text, true) {
            Err(ConfigError::UnknownKeys(k)) => assert_eq!(k, ["tolerances.coincidnce"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn family_parameters_checked() {
        let text = DRAG.replace("c = 1.0", "c = 1.0\neta = 0.1");
        assert!(matches!(parse_config(&text, false), Err(ConfigError::Invalid(_))));
        let text = DRAG.replace("c = 1.0", "");
        assert!(matches!(parse_config(&text, false), Err(ConfigError::Invalid(_))));
        let text = DRAG.replace("c = 1.0", "c = -1.0");
        assert!(matches!(parse_config(&text, false), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn coupled_constraint_is_a_config_error() {
        let text = DRAG
            .replace("family = \"drag-1d\"\nc = 1.0", "family = \"coupled-2d\"")
            .replace("q = [0.0]\np = [1.0]", "q = [0.0, 0.0]\np = [1.0, 0.0]");
        let err = parse_config(&text, false).unwrap_err().to_string();
        assert!(err.contains("vx0 + vy0 = 0"), "{err}");
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = parse_config(DRAG, false).unwrap().config;
        let mut b = a.clone();
        b.outputs.dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn linear_ndim_shapes() {
        let text = DRAG
            .replace(
                "family = \"drag-1d\"\nc = 1.0",
                "family = \"linear-ndim\"\ndamping = [[0.1, 0.0], [0.0, 0.2]]\nstiffness = [[2.0, -1.0], [-1.0, 2.0]]",
            )
            .replace("q = [0.0]\np = [1.0]", "q = [1.0, 0.0]\np = [0.0, 0.0]");
        let c = parse_config(&text, true).unwrap().config;
        assert_eq!(c.system().unwrap().dim(), 2);
        let bad = text.replace("[[2.0, -1.0], [-1.0, 2.0]]", "[[2.0, -1.0], [0.0, 2.0]]");
        assert!(parse_config(&bad, true).is_err());
    }
}

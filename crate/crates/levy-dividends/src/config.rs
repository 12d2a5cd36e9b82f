//! TOML problem configurations and the registered presets.
//!
//! A configuration carries the model parameters (`drift_c`, `sigma`,
//! `jump_rate`), the economic parameters (`q`, `r`, `beta`), and the jump
//! distribution, either inline (`initial_law` + `subgenerator`) or by
//! naming a shipped jump preset.  Two complete problem presets are
//! registered: `case1` (unbounded variation, positive barrier) and `case2`
//! (bounded variation, zero barrier), both driving jumps distributed as
//! `|N(0,1)|` through the frozen six-phase fit `folded_normal_m6`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LevyModel;
use crate::phase_type::PhaseTypeDistribution;
use crate::solver::BarrierProblem;

/// Problem presets available to [`ProblemConfig::preset`] and the CLI.
pub const PROBLEM_PRESETS: [&str; 2] = ["case1", "case2"];
/// Jump-distribution presets available to the `phase_type.preset` key.
pub const JUMP_PRESETS: [&str; 1] = ["folded_normal_m6"];

/// Jump-size distribution: either a named preset or explicit parameters.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct PhaseTypeConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_law: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subgenerator: Option<Vec<Vec<f64>>>,
}

/// A complete, serializable description of a barrier problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub drift_c: f64,
    pub sigma: f64,
    pub jump_rate: f64,
    pub q: f64,
    pub r: f64,
    pub beta: f64,
    /// Required when `jump_rate > 0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_type: Option<PhaseTypeConfig>,
}

/// On-disk schema of a jump preset file (extra metadata keys are ignored).
#[derive(Debug, Deserialize)]
struct JumpPresetFile {
    version: u32,
    name: String,
    initial_law: Vec<f64>,
    subgenerator: Vec<Vec<f64>>,
}

impl ProblemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("bad config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    /// Load a registered problem preset (`case1` or `case2`).
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "case1" => Self::from_toml_str(include_str!("../presets/case1.toml")),
            "case2" => Self::from_toml_str(include_str!("../presets/case2.toml")),
            other => Err(Error::InvalidConfig(format!(
                "unknown preset '{other}'; available: {PROBLEM_PRESETS:?}"
            ))),
        }
    }

    /// Canonical serialization used for reproducibility hashes.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("a validated config always serializes")
    }

    /// Build the jump distribution configured for this problem.
    pub fn build_jumps(&self) -> Result<PhaseTypeDistribution> {
        let Some(pt) = &self.phase_type else {
            return Err(Error::InvalidConfig(
                "jump_rate > 0 requires a [phase_type] section".into(),
            ));
        };
        match (&pt.preset, &pt.initial_law, &pt.subgenerator) {
            (Some(name), None, None) => jump_preset(name),
            (None, Some(alpha), Some(sub)) => build_phase_type(alpha, sub),
            _ => Err(Error::InvalidConfig(
                "[phase_type] must give either `preset` or both `initial_law` and \
                 `subgenerator`, not a mixture"
                    .into(),
            )),
        }
    }

    pub fn build_model(&self) -> Result<LevyModel> {
        if self.jump_rate > 0.0 {
            LevyModel::new(self.drift_c, self.sigma, self.jump_rate, self.build_jumps()?)
        } else if self.sigma > 0.0 {
            LevyModel::brownian(self.drift_c, self.sigma)
        } else {
            LevyModel::pure_drift(self.drift_c)
        }
    }

    pub fn build_problem(&self) -> Result<BarrierProblem> {
        BarrierProblem::new(self.build_model()?, self.q, self.r, self.beta)
    }
}

/// Load a registered jump-size preset by name.
pub fn jump_preset(name: &str) -> Result<PhaseTypeDistribution> {
    let text = match name {
        "folded_normal_m6" => include_str!("../presets/folded_normal_m6.toml"),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown jump preset '{other}'; available: {JUMP_PRESETS:?}"
            )))
        }
    };
    let file: JumpPresetFile = toml::from_str(text)
        .map_err(|e| Error::InvalidConfig(format!("bad jump preset '{name}': {e}")))?;
    if file.version != 1 {
        return Err(Error::InvalidConfig(format!(
            "jump preset '{}' has unsupported version {}",
            file.name, file.version
        )));
    }
    build_phase_type(&file.initial_law, &file.subgenerator)
}

fn build_phase_type(alpha: &[f64], sub: &[Vec<f64>]) -> Result<PhaseTypeDistribution> {
    let m = alpha.len();
    if sub.len() != m || sub.iter().any(|row| row.len() != m) {
        return Err(Error::InvalidConfig(format!(
            "subgenerator must be {m}x{m} to match the {m}-entry initial law"
        )));
    }
    let alpha = DVector::from_row_slice(alpha);
    let sub = DMatrix::from_row_iterator(m, m, sub.iter().flatten().copied());
    PhaseTypeDistribution::new(alpha, sub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn presets_parse_and_build() {
        for name in PROBLEM_PRESETS {
            let cfg = ProblemConfig::preset(name).unwrap();
            let problem = cfg.build_problem().unwrap();
            assert_relative_eq!(problem.q(), 0.05);
            assert_relative_eq!(problem.r(), 0.5);
        }
    }

    #[test]
    fn folded_normal_preset_matches_target_moments() {
        let jumps = jump_preset("folded_normal_m6").unwrap();
        // the fit pins both the mean of |N(0,1)| and its second moment via
        // equality constraints, so both hold to rounding
        assert_relative_eq!(
            jumps.mean(),
            (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(jumps.raw_moment(2).unwrap(), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(ProblemConfig::preset("case3").is_err());
        assert!(jump_preset("bogus").is_err());
    }

    #[test]
    fn explicit_parameters_round_trip() {
        let text = r#"
            drift_c = 1.0
            sigma = 0.5
            jump_rate = 2.0
            q = 0.04
            r = 1.0
            beta = 1.2

            [phase_type]
            initial_law = [0.4, 0.6]
            subgenerator = [[-2.0, 1.0], [0.0, -3.0]]
        "#;
        let cfg = ProblemConfig::from_toml_str(text).unwrap();
        let jumps = cfg.build_jumps().unwrap();
        assert_eq!(jumps.num_phases(), 2);
        let round = ProblemConfig::from_toml_str(&cfg.canonical_toml()).unwrap();
        assert_eq!(round.canonical_toml(), cfg.canonical_toml());
        cfg.build_problem().unwrap();
    }

    #[test]
    fn preset_mixed_with_explicit_is_rejected() {
        let text = r#"
            drift_c = 1.0
            sigma = 0.0
            jump_rate = 1.0
            q = 0.05
            r = 0.5
            beta = 1.5

            [phase_type]
            preset = "folded_normal_m6"
            initial_law = [1.0]
        "#;
        let cfg = ProblemConfig::from_toml_str(text).unwrap();
        assert!(matches!(cfg.build_jumps(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn no_jumps_needs_no_phase_type() {
        let text = r#"
            drift_c = 1.0
            sigma = 0.3
            jump_rate = 0.0
            q = 0.05
            r = 0.5
            beta = 1.5
        "#;
        let cfg = ProblemConfig::from_toml_str(text).unwrap();
        cfg.build_problem().unwrap();
    }
}

//! JSON run configuration shared by the command-line scenarios.
//!
//! ```json
//! { "trap": { "ax": 1, "ay": 4, "az": 9, "euler_deg": [0, 0, 0] },
//!   "rotation": { "omega": [0, 0, 1.5] },
//!   "seed": 7 }
//! ```
//!
//! `euler_deg` gives the principal axes as an intrinsic z-y-z rotation
//! `Rz(α)·Ry(β)·Rz(γ)` in degrees; it defaults to the identity. Unknown keys
//! are rejected.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trap::{euler_zyz, RotationSpec, TrapError, TrapSchedule, TrapSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error(transparent)]
    Trap(#[from] TrapError),
}

impl ConfigError {
    pub fn kind(&self) -> crate::ErrorKind {
        crate::ErrorKind::Validation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapConfig {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub euler_deg: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationConfig {
    pub omega: [f64; 3],
}

/// `A(t) = A·(1 + amplitude·sin(frequency·t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationConfig {
    pub amplitude: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub trap: TrapConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<RotationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation: Option<ModulationConfig>,
    /// Seed for randomized property sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    /// Runs every conversion once so that bad values fail before any work.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let t = &self.trap;
        if !finite(&[t.ax, t.ay, t.az]) || !t.euler_deg.map(|e| finite(&e)).unwrap_or(true) {
            return Err(ConfigError::Parse("trap values must be finite".into()));
        }
        self.trap_spec()?;
        self.rotation_spec()?;
        self.schedule()?;
        Ok(())
    }

    pub fn trap_spec(&self) -> Result<TrapSpec, ConfigError> {
        let [a, b, g] = self.trap.euler_deg.unwrap_or([0.0; 3]);
        let q = euler_zyz(a.to_radians(), b.to_radians(), g.to_radians());
        Ok(TrapSpec::new(self.trap.ax, self.trap.ay, self.trap.az, &q)?)
    }

    pub fn rotation_spec(&self) -> Result<RotationSpec, ConfigError> {
        match &self.rotation {
            None => Ok(RotationSpec::None),
            Some(r) => Ok(RotationSpec::from_vector(Vector3::from(r.omega))?),
        }
    }

    /// Lab-frame schedule: rotating, modulated or static.
    pub fn schedule(&self) -> Result<TrapSchedule, ConfigError> {
        let trap = self.trap_spec()?;
        let rotation = self.rotation_spec()?;
        match (&self.modulation, rotation) {
            (Some(_), RotationSpec::About { .. }) => {
                Err(ConfigError::Parse("rotation and modulation cannot be combined".into()))
            }
            (Some(m), RotationSpec::None) => Ok(TrapSchedule::modulated(trap, m.amplitude, m.frequency)?),
            (None, RotationSpec::None) => Ok(TrapSchedule::Static(trap)),
            (None, rotation) => Ok(TrapSchedule::Rotating { trap, rotation }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_builds() {
        let cfg = RunConfig::from_json(
            r#"{"trap":{"ax":1,"ay":4,"az":9,"euler_deg":[90,0,0]},"rotation":{"omega":[0,0,1.5]},"seed":3}"#,
        )
        .unwrap();
        let t = cfg.trap_spec().unwrap();
        // a 90° turn about z swaps the x and y curvatures
        assert!((t.matrix()[(0, 0)] - 4.0).abs() < 1e-12);
        assert!((t.matrix()[(1, 1)] - 1.0).abs() < 1e-12);
        assert_eq!(cfg.rotation_spec().unwrap().rate(), 1.5);
        assert_eq!(cfg.seed, Some(3));
        assert!(matches!(cfg.schedule().unwrap(), TrapSchedule::Rotating { .. }));
        let back = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(
            RunConfig::from_json(r#"{"trap":{"ax":1,"ay":1,"az":1},"extra":1}"#),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            RunConfig::from_json(r#"{"trap":{"ax":1,"ay":1,"az":1,"bx":2}}"#),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            RunConfig::from_json(r#"{"trap":{"ax":-1,"ay":1,"az":1}}"#),
            Err(ConfigError::Trap(_))
        ));
        assert!(RunConfig::from_json(r#"{"trap":{"ax":1,"ay":1,"az":1},"modulation":{"amplitude":1.5,"frequency":1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"trap":{"ax":1,"ay":1}}"#).is_err());
        assert!(RunConfig::from_json(
            r#"{"trap":{"ax":1,"ay":1,"az":1},"rotation":{"omega":[0,0,1]},"modulation":{"amplitude":0.1,"frequency":1}}"#
        )
        .is_err());
    }
}

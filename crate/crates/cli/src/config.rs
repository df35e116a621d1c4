//! Experiment configuration: a flat TOML file with one section per concern.
//! Unknown keys are rejected everywhere so typos surface as errors that name
//! the offending key and its location.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use anisoflow::flow_engine::{SnapshotGrid, StepperConfig};
use anisoflow::grid_geom::{Grid, GridKind, RadialField};
use anisoflow::params::{FlowParams, Mode};
use anisoflow::reference::elongated_initial;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub params: ParamsSection,
    pub grid: GridSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub stepper: StepperConfig,
    pub output: OutputSection,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKindCfg {
    /// planar curve, full angle range (n = 1)
    Circle,
    /// rotationally symmetric surface, polar angle range (n >= 2)
    Polar,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub kind: GridKindCfg,
    pub m: usize,
}

impl GridSection {
    pub fn build(&self) -> Result<Arc<Grid>, CliError> {
        let grid = match self.kind {
            GridKindCfg::Circle => Grid::periodic_circle(self.m),
            GridKindCfg::Polar => Grid::axisym_polar(self.m),
        };
        grid.map(Arc::new).map_err(|e| CliError::Config(format!("grid.m: {e}")))
    }

    fn core_kind(&self) -> GridKind {
        match self.kind {
            GridKindCfg::Circle => GridKind::PeriodicCircle,
            GridKindCfg::Polar => GridKind::AxisymPolar,
        }
    }
}

/// One of three initial surfaces: a centered sphere (`a0`), an elongated
/// ellipsoid-like body (`aspect`), or a snapshot file from a previous run
/// (`path`, relative to the config file). `scale` multiplies the radius of
/// the latter two, e.g. to place the body inside the unit sphere.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: String,
    pub a0: Option<f64>,
    pub aspect: Option<f64>,
    pub path: Option<PathBuf>,
    pub scale: Option<f64>,
}

/// Snapshot file layout: enough to restart or re-derive all geometry. The
/// flow has no explicit time dependence, so a restarted run legitimately
/// begins its clock at zero.
#[derive(Debug, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotFile {
    pub t: f64,
    pub grid: SnapshotGrid,
    pub phi: Vec<f64>,
}

impl InitialSection {
    fn forbid(&self, field: &str, set: bool) -> Result<(), CliError> {
        if set {
            Err(CliError::Config(format!(
                "initial.{field} does not apply when initial.kind = \"{}\"",
                self.kind
            )))
        } else {
            Ok(())
        }
    }

    fn scale(&self) -> Result<f64, CliError> {
        let s = self.scale.unwrap_or(1.0);
        if !(s.is_finite() && s > 0.0) {
            return Err(CliError::Config(format!("initial.scale must be positive, got {s}")));
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match self.kind.as_str() {
            "sphere" => {
                self.forbid("aspect", self.aspect.is_some())?;
                self.forbid("path", self.path.is_some())?;
                self.forbid("scale", self.scale.is_some())?;
                let a0 = self.a0.ok_or_else(|| {
                    CliError::Config("initial.a0 is required for a sphere".into())
                })?;
                if !(a0.is_finite() && a0 > 0.0) {
                    return Err(CliError::Config(format!(
                        "initial.a0 must be a positive radius, got {a0}"
                    )));
                }
            }
            "ellipsoid" => {
                self.forbid("a0", self.a0.is_some())?;
                self.forbid("path", self.path.is_some())?;
                if self.aspect.is_none() {
                    return Err(CliError::Config(
                        "initial.aspect is required for an ellipsoid".into(),
                    ));
                }
                self.scale()?;
            }
            "file" => {
                self.forbid("a0", self.a0.is_some())?;
                self.forbid("aspect", self.aspect.is_some())?;
                if self.path.is_none() {
                    return Err(CliError::Config(
                        "initial.path is required for a file restart".into(),
                    ));
                }
                self.scale()?;
            }
            other => {
                return Err(CliError::Config(format!(
                    "initial.kind must be \"sphere\", \"ellipsoid\", or \"file\", got \"{other}\""
                )));
            }
        }
        Ok(())
    }

    pub fn build(
        &self,
        grid: Arc<Grid>,
        grid_section: &GridSection,
        config_dir: &Path,
    ) -> Result<RadialField, CliError> {
        match self.kind.as_str() {
            "sphere" => {
                let a0 = self.a0.expect("validated");
                RadialField::constant(grid, a0.ln())
                    .map_err(|e| CliError::Config(format!("initial sphere: {e}")))
            }
            "ellipsoid" => {
                let aspect = self.aspect.expect("validated");
                let field = elongated_initial(grid, aspect)
                    .map_err(|e| CliError::Config(format!("initial ellipsoid: {e}")))?;
                Ok(field.offset(self.scale()?.ln()))
            }
            "file" => {
                let rel = self.path.as_ref().expect("validated");
                let path = config_dir.join(rel);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    CliError::Config(format!("cannot read initial.path {}: {e}", path.display()))
                })?;
                let snap: SnapshotFile = serde_json::from_str(&text).map_err(|e| {
                    CliError::Config(format!("invalid snapshot {}: {e}", path.display()))
                })?;
                if snap.grid.kind != grid_section.core_kind() || snap.grid.m != grid_section.m {
                    return Err(CliError::Config(format!(
                        "snapshot grid ({:?}, m = {}) does not match [grid] ({:?}, m = {})",
                        snap.grid.kind,
                        snap.grid.m,
                        grid_section.core_kind(),
                        grid_section.m
                    )));
                }
                let field = RadialField::new(grid, snap.phi)
                    .map_err(|e| CliError::Config(format!("snapshot {}: {e}", path.display())))?;
                Ok(field.offset(self.scale()?.ln()))
            }
            _ => unreachable!("validated"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    /// the diagnostics time series (series.csv)
    Csv,
    /// state snapshots (snapshots/*.json)
    Json,
}

/// summary.json is always written; `formats` selects the bulkier artifacts
/// (default: both).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Option<Vec<OutputFormat>>,
}

impl OutputSection {
    pub fn wants(&self, f: OutputFormat) -> bool {
        match &self.formats {
            None => true,
            Some(list) => list.contains(&f),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub k: Vec<usize>,
    pub aspect: Vec<f64>,
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}:\n{e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.build_params()?;
        let n = self.params.n;
        match self.grid.kind {
            GridKindCfg::Circle if n != 1 => {
                return Err(CliError::Config(format!(
                    "grid.kind = \"circle\" requires params.n = 1, got n = {n}"
                )));
            }
            GridKindCfg::Polar if n < 2 => {
                return Err(CliError::Config(format!(
                    "grid.kind = \"polar\" requires params.n >= 2, got n = {n}"
                )));
            }
            _ => {}
        }
        self.initial.validate()?;
        self.stepper
            .validate()
            .map_err(|e| CliError::Config(format!("stepper: {e}")))?;
        Ok(())
    }

    pub fn build_params(&self) -> Result<FlowParams, CliError> {
        FlowParams::new(self.params.n, self.params.k, self.params.alpha, self.params.beta)
            .map_err(|e| CliError::Config(format!("params: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> String {
        r#"
mode = "normalized"

[params]
n = 2
k = 1
alpha = 3.0
beta = 1.0

[grid]
kind = "polar"
m = 32

[initial]
kind = "sphere"
a0 = 2.0

[output]
directory = "out"
"#
        .to_string()
    }

    fn parse(s: &str) -> Result<ExperimentConfig, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn base_config_parses() {
        let cfg = parse(&base()).unwrap();
        assert_eq!(cfg.grid.m, 32);
        assert!(cfg.output.wants(OutputFormat::Csv));
        assert!(cfg.output.wants(OutputFormat::Json));
        assert!(cfg.sweep.is_none());
    }

    #[test]
    fn unknown_key_is_named() {
        let bad = base().replace("a0 = 2.0", "a0 = 2.0\nwobble = 3");
        let err = parse(&bad).unwrap_err();
        assert!(format!("{err}").contains("wobble"));
    }

    #[test]
    fn cross_field_grid_dimension() {
        let bad = base().replace("kind = \"polar\"", "kind = \"circle\"");
        let err = parse(&bad).unwrap_err();
        assert!(format!("{err}").contains("n = 1"));
    }

    #[test]
    fn initial_field_mix_rejected() {
        let bad = base().replace("a0 = 2.0", "a0 = 2.0\naspect = 1.5");
        let err = parse(&bad).unwrap_err();
        assert!(format!("{err}").contains("initial.aspect"));

        let bad = base().replace("kind = \"sphere\"\na0 = 2.0", "kind = \"ellipsoid\"");
        let err = parse(&bad).unwrap_err();
        assert!(format!("{err}").contains("initial.aspect"));

        let bad = base().replace("kind = \"sphere\"", "kind = \"banana\"");
        let err = parse(&bad).unwrap_err();
        assert!(format!("{err}").contains("banana"));
    }

    #[test]
    fn stepper_and_params_validated() {
        let bad = base() + "\n[stepper]\ncfl = 1.5\n";
        assert!(parse(&bad).is_err());

        let bad = base().replace("k = 1", "k = 5");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn ellipsoid_scale_applies() {
        let text = base().replace(
            "kind = \"sphere\"\na0 = 2.0",
            "kind = \"ellipsoid\"\naspect = 1.5\nscale = 0.5",
        );
        let cfg = parse(&text).unwrap();
        let grid = cfg.grid.build().unwrap();
        let field = cfg.initial.build(grid, &cfg.grid, Path::new(".")).unwrap();
        let r = field.r();
        let max = r.iter().cloned().fold(0.0f64, f64::max);
        let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((max - 0.75).abs() < 1e-2);
        assert!((min - 0.5).abs() < 1e-2);
    }
}

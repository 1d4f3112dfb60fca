//! Run configuration: JSON schema, loading and validation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smforge_core::circuit::{AuxVector, DesignVector, EmulatorTruth, FilterGeometry, DESIGN_DIM};
use smforge_core::explicit::ExplicitSettings;
use smforge_core::{Bounds, DesignSpec, FrequencyGrid, OptimizerSettings, RegionOfInterest, RrsmSettings};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    ExplicitSm,
    IsmRrsm,
    CoarseOpt,
    Eval,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::ExplicitSm => "explicit-sm",
            Engine::IsmRrsm => "ism-rrsm",
            Engine::CoarseOpt => "coarse-opt",
            Engine::Eval => "eval",
        }
    }
}

/// `fine(x) = scale · coarse(x + shift) + offset_db` on dB magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSource {
    pub shift: [f64; DESIGN_DIM],
    pub scale: f64,
    pub offset_db: f64,
}

/// Where fine responses come from. Exactly one field must be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FineSourceSpec {
    pub emulator: Option<EmulatorTruth>,
    /// Directory of `fine_NNN.s2p` files, relative to the config file.
    pub touchstone_dir: Option<PathBuf>,
    pub synthetic_affine: Option<AffineSource>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FineSource {
    Emulator(EmulatorTruth),
    Touchstone(PathBuf),
    Affine(AffineSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When present, must agree with the engine chosen on the command line.
    #[serde(default)]
    pub engine: Option<Engine>,
    #[serde(default)]
    pub geometry: FilterGeometry,
    /// Nominal aux vector; defaults to every line on the geometry's substrate.
    #[serde(default)]
    pub nominal_aux: Option<AuxVector>,
    pub fine: FineSourceSpec,
    pub region: RegionOfInterest,
    pub spec: DesignSpec,
    pub grid: FrequencyGrid,
    /// Start design; defaults to the region reference.
    #[serde(default)]
    pub start: Option<DesignVector>,
    /// Box for coarse and calibrated-coarse optimization.
    #[serde(default)]
    pub design_bounds: Option<Bounds>,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub rrsm: RrsmSettings,
    #[serde(default)]
    pub explicit: ExplicitSettings,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    ExplicitSettings::default().seed
}

/// Gaps in [0.05, 1.5] mm, lengths in [2.0, 3.8] mm.
pub fn default_design_bounds() -> Bounds {
    let lower = [0.05, 2.0].repeat(DESIGN_DIM / 2);
    let upper = [1.5, 3.8].repeat(DESIGN_DIM / 2);
    Bounds::new(lower, upper).expect("static bounds are ordered")
}

/// A validated config plus the raw bytes it was read from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub fine: FineSource,
    pub raw: Vec<u8>,
}

impl RunConfig {
    pub fn aux(&self) -> AuxVector {
        self.nominal_aux.unwrap_or_else(|| self.geometry.nominal_aux())
    }

    pub fn start_design(&self) -> Vec<f64> {
        match &self.start {
            Some(x) => x.as_slice().to_vec(),
            None => self.region.reference().to_vec(),
        }
    }

    pub fn bounds(&self) -> Bounds {
        self.design_bounds.clone().unwrap_or_else(default_design_bounds)
    }

    fn invalid(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }

    /// Checks cross-field rules and resolves the fine source against `base_dir`.
    pub fn validate(&self, base_dir: &Path) -> Result<FineSource> {
        self.geometry.validate().map_err(|e| Self::invalid(e.to_string()))?;
        self.aux().validate().map_err(|e| Self::invalid(e.to_string()))?;
        self.optimizer.validate().map_err(|e| Self::invalid(e.to_string()))?;
        self.rrsm.validate().map_err(|e| Self::invalid(e.to_string()))?;
        self.rrsm
            .lambda
            .resolve(self.grid.len())
            .map_err(|e| Self::invalid(format!("rrsm.lambda: {e}")))?;
        if self.region.dim() != DESIGN_DIM {
            return Err(Self::invalid(format!(
                "region has dimension {}, the filter has {DESIGN_DIM}",
                self.region.dim()
            )));
        }
        let bounds = self.bounds();
        if bounds.dim() != DESIGN_DIM {
            return Err(Self::invalid(format!("design_bounds must have dimension {DESIGN_DIM}")));
        }
        if !bounds.contains(&self.start_design()) {
            return Err(Self::invalid("start design lies outside design_bounds"));
        }
        if self.explicit.test_points == 0 {
            return Err(Self::invalid("explicit.test_points must be positive"));
        }
        for band in self.spec.bands() {
            if band.f_hi < self.grid.f_min() || band.f_lo > self.grid.f_max() {
                return Err(Self::invalid(format!("spec band {band} lies outside the grid")));
            }
        }

        let f = &self.fine;
        let set = [
            f.emulator.is_some(),
            f.touchstone_dir.is_some(),
            f.synthetic_affine.is_some(),
        ];
        if set.iter().filter(|s| **s).count() != 1 {
            return Err(Self::invalid(
                "fine: exactly one of emulator, touchstone_dir, synthetic_affine must be given",
            ));
        }
        if let Some(truth) = f.emulator {
            truth
                .perturb(&self.aux())
                .validate()
                .map_err(|e| Self::invalid(format!("fine.emulator: {e}")))?;
            return Ok(FineSource::Emulator(truth));
        }
        if let Some(affine) = f.synthetic_affine {
            if !(affine.scale.is_finite() && affine.offset_db.is_finite() && affine.shift.iter().all(|v| v.is_finite()))
            {
                return Err(Self::invalid("fine.synthetic_affine: entries must be finite"));
            }
            return Ok(FineSource::Affine(affine));
        }
        let dir = base_dir.join(f.touchstone_dir.as_ref().expect("one source is set"));
        if !dir.is_dir() {
            return Err(Self::invalid(format!(
                "fine.touchstone_dir: {} is not a directory",
                dir.display()
            )));
        }
        Ok(FineSource::Touchstone(dir))
    }
}

/// Parses and validates `bytes`; relative paths resolve against `base_dir`.
pub fn parse_config(bytes: &[u8], base_dir: &Path) -> Result<LoadedConfig> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let config: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })?;
    de.end().map_err(|e| CliError::Config(e.to_string()))?;
    let fine = config.validate(base_dir)?;
    Ok(LoadedConfig {
        config,
        fine,
        raw: bytes.to_vec(),
    })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&bytes, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "fine": {"emulator": {"delta_er": [0.3, 0.3, 0.3, 0.3], "delta_h": [-0.02, -0.02, -0.02, -0.02], "delta_len": 0.05, "kappa": 0.01}},
        "region": {"reference": [0.161, 2.8517, 0.54, 2.7737, 0.73, 2.7579],
                   "delta": [0.03, 0.08, 0.1, 0.08, 0.14, 0.08]},
        "spec": [{"channel": "S11", "f_lo_ghz": 8.9, "f_hi_ghz": 10.1, "limit_db": -12}],
        "grid": {"f_min": 8, "f_max": 12, "step": 0.25}
    }"#;

    fn parse(text: &str) -> Result<LoadedConfig> {
        parse_config(text.as_bytes(), Path::new("."))
    }

    #[test]
    fn omitted_blocks_take_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.config.optimizer, OptimizerSettings::default());
        assert_eq!(c.config.rrsm, RrsmSettings::default());
        assert_eq!(c.config.seed, 20_240_917);
        assert_eq!(c.fine, FineSource::Emulator(EmulatorTruth::default()));
        assert_eq!(c.config.aux(), FilterGeometry::default().nominal_aux());
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let text = MINIMAL.replace("\"grid\"", "\"optimizer\": {\"max_iter\": 3}, \"grid\"");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("optimizer") && err.contains("max_iter"), "{err}");
    }

    #[test]
    fn two_fine_sources_are_rejected() {
        let text = MINIMAL.replace("\"fine\": {", "\"fine\": {\"touchstone_dir\": \".\", ");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("exactly one"), "{err}");
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn missing_touchstone_dir_is_a_config_error() {
        let text = MINIMAL.replace(
            "\"fine\": {\"emulator\": {\"delta_er\": [0.3, 0.3, 0.3, 0.3], \"delta_h\": [-0.02, -0.02, -0.02, -0.02], \"delta_len\": 0.05, \"kappa\": 0.01}}",
            "\"fine\": {\"touchstone_dir\": \"no/such/dir\"}",
        );
        assert!(parse(&text).unwrap_err().to_string().contains("no/such/dir"));
    }

    #[test]
    fn bad_grid_is_rejected_with_path() {
        let text = MINIMAL.replace("\"step\": 0.25", "\"step\": 0.3");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("grid"), "{err}");
    }

    #[test]
    fn lambda_length_must_match_grid() {
        let text = MINIMAL.replace("\"grid\"", "\"rrsm\": {\"lambda\": [0.5, 0.5]}, \"grid\"");
        assert!(parse(&text).unwrap_err().to_string().contains("lambda"));
    }
}

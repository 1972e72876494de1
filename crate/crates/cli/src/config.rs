use std::path::Path;

use serde::{Deserialize, Serialize};

use nanofiber_core::analysis::GeometryConfig;
use nanofiber_core::bloch::VTypeScheme;
use nanofiber_core::montecarlo::{DetectorConfig, GatingConfig, OccupancyModel};
use nanofiber_core::orbit::{OrbitParams, RadiusMode};
use nanofiber_core::params::{rabi_from_intensity, AtomParams, DriveParams};
use nanofiber_core::vdw::VdwConfig;

use crate::Failure;

/// Everything a run can be configured with. Every section is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub atom: AtomParams,
    pub drive: DriveConfig,
    /// V-type scheme; `gamma` defaults to half the atom's decay rate.
    pub scheme: Option<VTypeScheme>,
    pub grid: GridConfig,
    pub occupancy: OccupancyModel,
    pub gating: GatingConfig,
    pub detector: DetectorConfig,
    pub hbt: HbtConfig,
    pub decay: DecayConfig,
    pub vdw: Option<VdwConfig>,
    pub surface: SurfaceConfig,
    pub orbit: Option<OrbitParams>,
    pub radius_mode: Option<RadiusMode>,
    pub fit: FitConfig,
    pub geometry: GeometryConfig,
}

/// Drive given either as a Rabi frequency or as an intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    /// MHz.
    pub detuning: f64,
    /// MHz.
    pub rabi: f64,
    /// mW/cm^2; replaces `rabi` when set.
    pub intensity: Option<f64>,
    pub rabi_scale: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            detuning: 0.0,
            rabi: 13.0,
            intensity: None,
            rabi_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// MHz.
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            from: -30.0,
            to: 30.0,
            points: 601,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HbtConfig {
    /// us.
    pub duration: f64,
    /// ns.
    pub bin_width: f64,
    /// ns.
    pub max_delay: f64,
}

impl Default for HbtConfig {
    fn default() -> Self {
        Self {
            duration: 20_000.0,
            bin_width: 1.0,
            max_delay: 150.0,
        }
    }
}

/// Delayed-gate dwell-time scan; has its own loading cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub cycles: u64,
    pub occupancy: OccupancyModel,
    pub gating: GatingConfig,
    pub detection_efficiency: f64,
    /// MHz.
    pub rabi: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            cycles: 10_000,
            occupancy: OccupancyModel::poisson_with_mean(0.2, 180.0),
            gating: GatingConfig {
                off_period: 1000.0,
                cycle_period: 21_000.0,
                gate_delay: 0.0,
                gate_width: 50.0,
            },
            detection_efficiency: 0.05,
            rabi: 5.0,
        }
    }
}

/// Distance range for the surface line shape, nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub d_min: f64,
    pub d_max: f64,
    pub d_points: usize,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            d_min: 50.0,
            d_max: 100.0,
            d_points: 501,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub candidates: Vec<u32>,
    /// Known coincidence background per bin.
    pub background: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            candidates: (0..=5).collect(),
            background: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self =
            toml::from_str(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.atom.validate()?;
        self.drive_params()?.validate()?;
        self.scheme().validate()?;
        self.occupancy.validate()?;
        self.gating.validate()?;
        self.detector.validate()?;
        self.decay.occupancy.validate()?;
        self.decay.gating.validate()?;
        self.vdw().validate()?;
        self.orbit().validate()?;
        self.geometry.validate()?;
        Ok(())
    }

    pub fn drive_params(&self) -> Result<DriveParams, Failure> {
        let rabi = match self.drive.intensity {
            Some(i) => rabi_from_intensity(i, &self.atom, self.drive.rabi_scale)?,
            None => self.drive.rabi,
        };
        let drive = DriveParams::new(self.drive.detuning, rabi);
        drive.validate()?;
        Ok(drive)
    }

    pub fn scheme(&self) -> VTypeScheme {
        self.scheme.unwrap_or_else(|| VTypeScheme::for_atom(&self.atom))
    }

    pub fn vdw(&self) -> VdwConfig {
        self.vdw.unwrap_or_else(|| VdwConfig::for_atom(&self.atom))
    }

    pub fn orbit(&self) -> OrbitParams {
        self.orbit.unwrap_or_else(|| OrbitParams::for_atom(&self.atom))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[drive]\nrabbi = 3.0").is_err());
    }

    #[test]
    fn nested_sections_parse() {
        let cfg: RunConfig = toml::from_str(
            r#"
            seed = 7
            [drive]
            intensity = 3.5
            rabi_scale = 0.7142857142857143
            [occupancy]
            kind = "fixed"
            atoms = 2
            [radius_mode]
            mode = "anchored-scaling"
            r_ref = 30.0
            nu_ref = 1.5
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.occupancy, OccupancyModel::Fixed { atoms: 2 });
        let rabi = cfg.drive_params().unwrap().rabi;
        assert!((rabi - 4.78).abs() < 0.01, "{rabi}");
    }

    #[test]
    fn invalid_values_fail_validation() {
        let cfg: RunConfig = toml::from_str("[detector]\nsplit_ratio = 1.5").unwrap();
        assert!(matches!(cfg.validate(), Err(Failure::Usage(_))));
    }
}

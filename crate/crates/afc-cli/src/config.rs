// Validation deliberately uses `!(x > 0.0)` so NaN fails closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Run configuration: one JSON file wiring all module inputs, with
//! reference defaults so minimal configs stay short.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use afc_core::material::Profile;
use afc_core::pumping::{PulseTrain, PumpTarget};
use afc_core::seqcompile::HardwareLimits;
use afc_core::{FieldConfig, Grid, IonClass};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min_mhz: f64,
    pub max_mhz: f64,
    pub step_mhz: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            min_mhz: -180.0,
            max_mhz: 180.0,
            step_mhz: 0.05,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> afc_core::Result<Grid> {
        Grid::from_span(self.min_mhz, self.max_mhz, self.step_mhz)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MediumConfig {
    /// Optical depth per pass through the crystal.
    pub peak_od: f64,
    pub passes: u32,
    pub profile: Profile,
}

impl Default for MediumConfig {
    fn default() -> Self {
        MediumConfig {
            peak_od: 2.0,
            passes: 6,
            profile: Profile::Flat,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub duration_ns: f64,
    pub center_mhz: f64,
    pub mean_photon: f64,
    pub events: u64,
    pub window_ns: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            duration_ns: 80.0,
            center_mhz: 0.0,
            mean_photon: 1.0,
            events: 10_000,
            window_ns: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub leak_counts: f64,
    pub dark_counts: f64,
    pub se_counts_per_excited: f64,
    pub radiative_lifetime_ms: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            leak_counts: 5.5e-4,
            dark_counts: 1e-5,
            se_counts_per_excited: 1e-4,
            radiative_lifetime_ms: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommensurateConfig {
    pub b_min_gauss: f64,
    pub b_max_gauss: f64,
    pub b_step_gauss: f64,
    pub storage_min_ns: f64,
    pub storage_max_ns: f64,
    pub storage_step_ns: f64,
    pub search_spacing_mhz: f64,
    pub search_top_k: usize,
}

impl Default for CommensurateConfig {
    fn default() -> Self {
        CommensurateConfig {
            b_min_gauss: 50.0,
            b_max_gauss: 700.0,
            b_step_gauss: 1.0,
            storage_min_ns: 50.0,
            storage_max_ns: 1000.0,
            storage_step_ns: 5.0,
            search_spacing_mhz: 1.0,
            search_top_k: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HoleburnConfig {
    /// Rendered depth of the strongest feature, in [0, 1].
    pub burn_depth: f64,
    /// Adds the hole-only pattern of the second ion class.
    pub include_second_class: bool,
    /// Excited splitting rate of the second class (6 MHz at 4500 G).
    pub second_class_mu_e_mhz_per_g: f64,
    pub second_class_weight: f64,
}

impl Default for HoleburnConfig {
    fn default() -> Self {
        HoleburnConfig {
            burn_depth: 0.8,
            include_second_class: false,
            second_class_mu_e_mhz_per_g: 6.0 / 4500.0,
            second_class_weight: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase", tag = "mode")]
pub enum SweepConfig {
    /// Analytic efficiency over a (finesse, depth, background) grid.
    Analytic {
        finesse: Vec<f64>,
        depth: Vec<f64>,
        background: Vec<f64>,
    },
    /// Full pump + propagate pipeline over train parameters.
    Pump {
        delta_p_mhz: Vec<f64>,
        n_l: Vec<u32>,
    },
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig::Analytic {
            finesse: vec![2.0, 3.0, 4.5, 6.0, 10.0],
            depth: (1..=30).map(|k| k as f64 * 0.5).collect(),
            background: vec![0.0, 0.4],
        }
    }
}

fn default_seed() -> u64 {
    7
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub ion: IonClass,
    pub field: Option<FieldConfig>,
    pub grid: GridConfig,
    pub medium: MediumConfig,
    pub pump_target: Option<PumpTarget>,
    pub pulse_train: PulseTrain,
    pub hardware: HardwareLimits,
    pub probe: ProbeConfig,
    pub noise: NoiseConfig,
    pub commensurate: CommensurateConfig,
    pub holeburn: HoleburnConfig,
    pub sweep: SweepConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl RunConfig {
    /// Loads and validates a config file. Parse errors carry the line and
    /// column from the JSON reader.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let data = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&data)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()
            .with_context(|| format!("validating config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.ion.validate()?;
        if let Some(f) = &self.field {
            f.validate()?;
        }
        self.grid.build()?;
        self.pulse_train.validate()?;
        self.hardware.validate()?;
        if let Some(t) = &self.pump_target {
            t.validate()?;
        }
        if !(0.0..=1.0).contains(&self.holeburn.burn_depth) {
            bail!("holeburn.burn_depth must lie in [0, 1]");
        }
        if !(self.probe.duration_ns > 0.0) || !(self.probe.window_ns > 0.0) {
            bail!("probe duration and window must be positive");
        }
        if self.probe.events < 1 {
            bail!("probe.events must be >= 1");
        }
        Ok(())
    }

    pub fn field_gauss(&self) -> f64 {
        self.field.map(|f| f.b_gauss).unwrap_or(4500.0)
    }

    pub fn target(&self) -> anyhow::Result<&PumpTarget> {
        self.pump_target
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("config has no pump_target section"))
    }
}


/// Resolves a config path: tried as given, then under AFC_CONFIG_DIR.
pub fn resolve_config_path(arg: &Path) -> PathBuf {
    if arg.exists() || arg.is_absolute() {
        return arg.to_path_buf();
    }
    if let Ok(dir) = std::env::var("AFC_CONFIG_DIR") {
        let candidate = Path::new(&dir).join(arg);
        if candidate.exists() {
            return candidate;
        }
    }
    arg.to_path_buf()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.ion, IonClass::tm_yag());
        assert_eq!(cfg.seed, 7);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let err = serde_json::from_str::<RunConfig>("{\n  \"bogus\": 1\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus"));
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn bad_values_fail_validation() {
        let cfg: RunConfig =
            serde_json::from_str("{\"holeburn\": {\"burn_depth\": 1.5}}").unwrap();
        assert!(cfg.validate().is_err());
    }
}

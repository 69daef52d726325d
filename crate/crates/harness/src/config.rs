//! TOML experiment configuration.
//!
//! Two optional tables, `[system]` and `[ga]`, whose keys mirror the fields of
//! `SystemConfig` and `GaConfig`. Missing keys keep their defaults. Powers
//! accept a plain number in watts or a string with a unit suffix:
//! `"10 dBm"`, `"-80dBm"`, `"0.01 W"`, `"10 mW"`.

use std::path::Path;

use manoma_core::channel::{dbm_to_watt, SystemConfig};
use manoma_core::ga::GaConfig;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PowerValue {
    Watts(f64),
    Text(String),
}

/// Parses `"<number> <unit>"` with unit `dBm`, `W` or `mW` into watts.
pub fn parse_power(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let split = t
        .find(|c: char| c.is_ascii_alphabetic())
        .ok_or_else(|| format!("`{t}` has no unit; use dBm, W or mW"))?;
    let (num, unit) = t.split_at(split);
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not a number", num.trim()))?;
    match unit.trim().to_ascii_lowercase().as_str() {
        "dbm" => Ok(dbm_to_watt(v)),
        "w" => Ok(v),
        "mw" => Ok(v * 1e-3),
        other => Err(format!("unknown power unit `{other}`; use dBm, W or mW")),
    }
}

impl PowerValue {
    fn watts(&self, field: &str) -> Result<f64, HarnessError> {
        match self {
            PowerValue::Watts(w) => Ok(*w),
            PowerValue::Text(s) => parse_power(s).map_err(|reason| HarnessError::Validation(format!("{field}: {reason}"))),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    num_antennas: Option<usize>,
    num_users: Option<usize>,
    num_paths: Option<usize>,
    wavelength: Option<f64>,
    region_side: Option<f64>,
    min_spacing: Option<f64>,
    max_power: Option<PowerValue>,
    noise_power: Option<PowerValue>,
    min_rate: Option<f64>,
    pathloss_ref: Option<f64>,
    pathloss_exp: Option<f64>,
    distance_min: Option<f64>,
    distance_max: Option<f64>,
    eps_stage_one: Option<f64>,
    eps_stage_two: Option<f64>,
    max_iter_stage_one: Option<usize>,
    max_iter_stage_two: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaSection {
    population: Option<usize>,
    penalty: Option<f64>,
    crossover_prob: Option<f64>,
    mutation_prob: Option<f64>,
    generations: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    system: SystemSection,
    #[serde(default)]
    ga: GaSection,
}

/// Validated system and GA parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub ga: GaConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemConfig::default(),
            ga: GaConfig::default(),
        }
    }
}

macro_rules! merge {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if let Some(v) = $src.$f { $dst.$f = v; } )*
    };
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.system.validate()?;
        self.ga.validate()?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| HarnessError::Validation(format!("configuration: {}", e.message())))?;
        let mut system = SystemConfig::default();
        let s = raw.system;
        if let Some(p) = &s.max_power {
            system.max_power = p.watts("max_power")?;
        }
        if let Some(p) = &s.noise_power {
            system.noise_power = p.watts("noise_power")?;
        }
        merge!(
            system,
            s,
            num_antennas,
            num_users,
            num_paths,
            wavelength,
            region_side,
            min_spacing,
            min_rate,
            pathloss_ref,
            pathloss_exp,
            distance_min,
            distance_max,
            eps_stage_one,
            eps_stage_two,
            max_iter_stage_one,
            max_iter_stage_two
        );
        let mut ga = GaConfig::default();
        let g = raw.ga;
        merge!(ga, g, population, penalty, crossover_prob, mutation_prob, generations);
        let cfg = ExperimentConfig { system, ga };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_units() {
        assert!((parse_power("10 dBm").unwrap() - 0.01).abs() < 1e-15);
        assert!((parse_power("-80dBm").unwrap() - 1e-11).abs() < 1e-24);
        assert_eq!(parse_power("0.5 W").unwrap(), 0.5);
        assert!((parse_power("10 mW").unwrap() - 0.01).abs() < 1e-15);
        assert!(parse_power("10").is_err());
        assert!(parse_power("10 dB").is_err());
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "[system]\nnum_users = 3\nmax_power = \"20 dBm\"\n[ga]\ngenerations = 50\n",
        )
        .unwrap();
        assert_eq!(cfg.system.num_users, 3);
        assert!((cfg.system.max_power - 0.1).abs() < 1e-15);
        assert_eq!(cfg.system.num_antennas, 4);
        assert_eq!(cfg.ga.generations, 50);
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn rejects_unknown_and_invalid_fields() {
        let e = ExperimentConfig::from_toml_str("[system]\nnum_antenas = 3\n").unwrap_err();
        assert!(e.to_string().contains("num_antenas"), "{e}");
        let e = ExperimentConfig::from_toml_str("[system]\nnum_antennas = 100\n").unwrap_err();
        assert!(e.to_string().contains("num_antennas"), "{e}");
        assert!(e.to_string().contains("packing bound"), "{e}");
        let e = ExperimentConfig::from_toml_str("[ga]\npopulation = 7\n").unwrap_err();
        assert!(e.to_string().contains("population"), "{e}");
    }
}

//! Scenario definition, unit conversion and validation.
//!
//! A scenario is a flat JSON document whose keys are exactly the field names
//! of [`SystemConfig`]. Missing keys take the default scenario values, so an
//! empty document (or an empty file) yields the full default scenario.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while loading or validating a scenario.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// The file could not be read.
    #[error("cannot read config `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// The document is not valid JSON for the schema.
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    /// A field violates an invariant.
    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// Every scalar and geometric parameter of one scenario.
///
/// Powers and noise levels are in dBm, gains in dB, lengths in metres and
/// angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// BS antenna count.
    #[serde(rename = "M")]
    pub m: usize,
    /// RIS element count.
    #[serde(rename = "N")]
    pub n: usize,
    /// Number of legitimate users.
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "P_bs_dbm")]
    pub p_bs_dbm: f64,
    #[serde(rename = "P_ris_dbm")]
    pub p_ris_dbm: f64,
    /// Per-element amplitude cap of the active RIS.
    pub beta_max: f64,
    pub gamma_r_db: f64,
    pub sigma_bs_dbm: f64,
    pub sigma_ue_dbm: f64,
    pub sigma_eve_dbm: f64,
    pub sigma_ris_dbm: f64,
    pub kappa_db: f64,
    pub pathloss_ref_db: f64,
    pub d0: f64,
    pub alpha_br: f64,
    pub alpha_ru: f64,
    pub alpha_rt: f64,
    pub alpha_re: f64,
    /// Radar cross-section variance ζ².
    pub rcs: f64,
    pub bs_pos: [f64; 2],
    pub ris_pos: [f64; 2],
    pub user_disk_center: [f64; 2],
    pub user_disk_radius: f64,
    /// Target distance from the RIS.
    pub target_range: f64,
    /// Target azimuth seen from the RIS.
    pub target_angle: f64,
    pub eve_d1: f64,
    pub eve_d2: f64,
    pub eve_theta1: f64,
    pub eve_theta2: f64,
    /// Trapezoid segment count for the Eve angular average.
    pub n_theta: usize,
    pub mc_realizations: usize,
    pub mc_eve_draws: usize,
    pub rng_seed: u64,
    /// Inter-element spacing in wavelengths.
    pub element_spacing_wavelengths: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            m: 8,
            n: 16,
            k: 3,
            p_bs_dbm: 30.0,
            p_ris_dbm: 20.0,
            beta_max: 10.0,
            gamma_r_db: 1.0,
            sigma_bs_dbm: -120.0,
            sigma_ue_dbm: -80.0,
            sigma_eve_dbm: -80.0,
            sigma_ris_dbm: -80.0,
            kappa_db: 3.0,
            pathloss_ref_db: -30.0,
            d0: 1.0,
            alpha_br: 2.0,
            alpha_ru: 2.2,
            alpha_rt: 2.0,
            alpha_re: 2.2,
            rcs: 1.0,
            bs_pos: [0.0, 0.0],
            ris_pos: [50.0, 0.0],
            user_disk_center: [40.0, 20.0],
            user_disk_radius: 5.0,
            target_range: 5.0,
            target_angle: PI / 4.0,
            eve_d1: 30.0,
            eve_d2: 35.0,
            eve_theta1: PI / 6.0,
            eve_theta2: PI / 3.0,
            n_theta: 500,
            mc_realizations: 1000,
            mc_eve_draws: 10_000,
            rng_seed: 1,
            element_spacing_wavelengths: 0.5,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

impl SystemConfig {
    /// Checks every invariant and reports the first offending field.
    ///
    /// # Errors
    ///
    /// Returns [`ConfigError::Invalid`] naming the field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, count) in [("M", self.m), ("N", self.n), ("K", self.k)] {
            if count == 0 {
                return Err(invalid(field, "must be at least 1"));
            }
        }
        let finite = [
            ("P_bs_dbm", self.p_bs_dbm),
            ("P_ris_dbm", self.p_ris_dbm),
            ("gamma_r_db", self.gamma_r_db),
            ("sigma_bs_dbm", self.sigma_bs_dbm),
            ("sigma_ue_dbm", self.sigma_ue_dbm),
            ("sigma_eve_dbm", self.sigma_eve_dbm),
            ("sigma_ris_dbm", self.sigma_ris_dbm),
            ("kappa_db", self.kappa_db),
            ("pathloss_ref_db", self.pathloss_ref_db),
        ];
        for (field, value) in finite {
            if !value.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if !(self.beta_max >= 1.0 && self.beta_max.is_finite()) {
            return Err(invalid("beta_max", "must be finite and at least 1"));
        }
        if !(self.d0 > 0.0) {
            return Err(invalid("d0", "must be positive"));
        }
        if !(self.eve_d1 > 0.0) {
            return Err(invalid("eve_d1", "must be positive"));
        }
        if !(self.eve_d1 < self.eve_d2) {
            return Err(invalid("eve_d1", "eve_d1 < eve_d2 is required"));
        }
        if !(self.eve_theta1 < self.eve_theta2) {
            return Err(invalid("eve_theta1", "eve_theta1 < eve_theta2 is required"));
        }
        if (self.alpha_re - 2.0).abs() < 1e-12 {
            return Err(invalid("alpha_re", "alpha_re = 2 is a pole of the Eve moment"));
        }
        if !(self.rcs >= 0.0) {
            return Err(invalid("rcs", "must be nonnegative"));
        }
        if !(self.user_disk_radius >= 0.0) {
            return Err(invalid("user_disk_radius", "must be nonnegative"));
        }
        if !(self.target_range > 0.0) {
            return Err(invalid("target_range", "must be positive"));
        }
        if self.n_theta == 0 {
            return Err(invalid("n_theta", "must be at least 1"));
        }
        if self.mc_realizations == 0 {
            return Err(invalid("mc_realizations", "must be at least 1"));
        }
        if self.mc_eve_draws == 0 {
            return Err(invalid("mc_eve_draws", "must be at least 1"));
        }
        if !(self.element_spacing_wavelengths > 0.0) {
            return Err(invalid("element_spacing_wavelengths", "must be positive"));
        }
        Ok(())
    }

    /// Parses and validates a JSON document; blank text gives the defaults.
    ///
    /// # Errors
    ///
    /// Parse failures and invariant violations.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let config = if text.trim().is_empty() {
            Self::default()
        } else {
            serde_json::from_str(text)?
        };
        config.validate()?;
        Ok(config)
    }

    /// Pretty-printed JSON with every field present.
    pub fn to_json_string(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text
    }
}

/// Reads, parses and validates a scenario file.
///
/// # Errors
///
/// I/O failure, parse failure or invariant violation.
pub fn load_config(path: impl AsRef<Path>) -> Result<SystemConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    SystemConfig::from_json_str(&text)
}

/// Powers in watts and gains in linear scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub p_bs: f64,
    pub p_ris: f64,
    /// Radar receiver noise σ².
    pub sigma2_bs: f64,
    pub sigma2_ue: f64,
    pub sigma2_eve: f64,
    /// Active RIS dynamic noise σ_R².
    pub sigma2_ris: f64,
    pub kappa: f64,
    pub pathloss_ref: f64,
    pub gamma_r: f64,
    /// ζ².
    pub rcs: f64,
    pub beta_max: f64,
    pub d0: f64,
    pub spacing: f64,
}

/// x dBm in watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Watts in dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// x dB as a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear ratio in dB.
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Converts every logarithmic field to linear units.
pub fn to_linear(config: &SystemConfig) -> PhysicalParams {
    PhysicalParams {
        p_bs: dbm_to_watts(config.p_bs_dbm),
        p_ris: dbm_to_watts(config.p_ris_dbm),
        sigma2_bs: dbm_to_watts(config.sigma_bs_dbm),
        sigma2_ue: dbm_to_watts(config.sigma_ue_dbm),
        sigma2_eve: dbm_to_watts(config.sigma_eve_dbm),
        sigma2_ris: dbm_to_watts(config.sigma_ris_dbm),
        kappa: db_to_linear(config.kappa_db),
        pathloss_ref: db_to_linear(config.pathloss_ref_db),
        gamma_r: db_to_linear(config.gamma_r_db),
        rcs: config.rcs,
        beta_max: config.beta_max,
        d0: config.d0,
        spacing: config.element_spacing_wavelengths,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_are_read_from_file() {
        let cfg = SystemConfig::from_json_str(r#"{"M": 8, "N": 16, "K": 3}"#).unwrap();
        assert_eq!((cfg.m, cfg.n, cfg.k), (8, 16, 3));
    }

    #[test]
    fn reversed_eve_annulus_is_rejected() {
        let err = SystemConfig::from_json_str(r#"{"eve_d1": 35, "eve_d2": 30}"#).unwrap_err();
        assert!(err.to_string().contains("eve_d1 < eve_d2"), "{err}");
    }

    #[test]
    fn empty_file_gives_defaults() {
        let dir = std::env::temp_dir().join(format!("secopt-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.json");
        std::fs::write(&path, "").unwrap();
        assert_eq!(load_config(&path).unwrap(), SystemConfig::default());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        assert!(matches!(
            SystemConfig::from_json_str(r#"{"Q": 1}"#),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn pole_exponent_is_rejected() {
        let err = SystemConfig::from_json_str(r#"{"alpha_re": 2.0}"#).unwrap_err();
        assert!(err.to_string().contains("alpha_re"));
    }

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(20.0) - 0.1).abs() < 1e-15);
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((dbm_to_watts(-80.0) - 1e-11).abs() < 1e-26);
        let p = to_linear(&SystemConfig::default());
        assert!((p.p_bs - 1.0).abs() < 1e-15);
        assert!((p.sigma2_bs - 1e-15).abs() < 1e-30);
        assert!((p.kappa - 1.995_262_314_968_879_5).abs() < 1e-12);
    }

    #[test]
    fn emitted_defaults_round_trip_byte_identical() {
        let text = SystemConfig::default().to_json_string();
        let again = SystemConfig::from_json_str(&text).unwrap().to_json_string();
        assert_eq!(text, again);
    }

    proptest! {
        #[test]
        fn dbm_round_trip(x in -150.0f64..80.0) {
            let back = watts_to_dbm(dbm_to_watts(x));
            prop_assert!(((back - x) / x.abs().max(1.0)).abs() < 1e-12);
        }

        #[test]
        fn conversion_is_monotone(a in -150.0f64..80.0, b in -150.0f64..80.0) {
            prop_assume!(a < b);
            prop_assert!(dbm_to_watts(a) < dbm_to_watts(b));
            prop_assert!(db_to_linear(a) < db_to_linear(b));
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{EpdcError, Result};

/// Planck constant times the speed of light, J m (exact in SI).
pub const PLANCK_TIMES_C: f64 = 6.626_070_15e-34 * 299_792_458.0;

/// Laser and optical path parameters used to turn power into photon numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticalConfig {
    pub wavelength_m: f64,
    pub repetition_rate_hz: f64,
    /// Known attenuation between the power reference and the detector.
    pub attenuation_db: f64,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        OpticalConfig { wavelength_m: 1.5e-6, repetition_rate_hz: 2.0e7, attenuation_db: 0.0 }
    }
}

impl OpticalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength_m > 0.0 && self.wavelength_m.is_finite()) {
            return Err(EpdcError::Validation(format!("wavelength must be positive, got {}", self.wavelength_m)));
        }
        if !(self.repetition_rate_hz > 0.0 && self.repetition_rate_hz.is_finite()) {
            return Err(EpdcError::Validation(format!("repetition rate must be positive, got {}", self.repetition_rate_hz)));
        }
        if !(self.attenuation_db >= 0.0 && self.attenuation_db.is_finite()) {
            return Err(EpdcError::Validation(format!("attenuation must be >= 0 dB, got {}", self.attenuation_db)));
        }
        Ok(())
    }

    /// Photons per pulse per watt of average power at the detector.
    fn photons_per_watt(&self) -> f64 {
        self.wavelength_m / (PLANCK_TIMES_C * self.repetition_rate_hz) * 10f64.powf(-self.attenuation_db / 10.0)
    }
}

/// Mean photon number per pulse for average optical power `power_w`.
pub fn power_to_mean_photons(power_w: f64, cfg: &OpticalConfig) -> Result<f64> {
    cfg.validate()?;
    if !(power_w >= 0.0 && power_w.is_finite()) {
        return Err(EpdcError::Domain(format!("power must be finite and >= 0 W, got {power_w}")));
    }
    Ok(power_w * cfg.photons_per_watt())
}

/// Inverse of [`power_to_mean_photons`].
pub fn mean_photons_to_power(mean_photons: f64, cfg: &OpticalConfig) -> Result<f64> {
    cfg.validate()?;
    if !(mean_photons >= 0.0 && mean_photons.is_finite()) {
        return Err(EpdcError::Domain(format!("mean photon number must be finite and >= 0, got {mean_photons}")));
    }
    Ok(mean_photons / cfg.photons_per_watt())
}

use serde::{Deserialize, Serialize};

use crate::analysis::OperatingPoint;
use crate::beamforming::{Combiner, SystemParams};
use crate::channel::{ChannelMode, RhsGeometry};
use crate::error::{invalid, Result};
use crate::geometry::Region;
use crate::impairments::{HardwareQuality, PhaseErrorKind, PhaseErrorModel};

/// Every parameter of a Monte Carlo experiment, in linear units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Carrier wavelength (m).
    pub wavelength: f64,
    /// BS density (per m^2).
    pub density: f64,
    /// Radius of the coverage disk (m).
    pub radius: f64,
    pub nx: usize,
    pub ny: usize,
    /// Element pitch (m).
    pub dx: f64,
    pub dy: f64,
    /// Feed offset from the surface (m).
    pub d0: f64,
    /// Feed gain exponent.
    pub alpha: f64,
    /// Panel center height (m).
    pub height: f64,
    pub num_ues: usize,
    /// Per-UE transmit power (linear).
    pub power: f64,
    /// Receiver noise power (linear).
    pub noise_power: f64,
    pub phase_error_model: PhaseErrorKind,
    /// Phase error power `sigma_p^2` (rad^2).
    pub phase_error_power: f64,
    pub epsilon_u: f64,
    pub epsilon_v: f64,
    pub channel_mode: ChannelMode,
    pub combiner: Combiner,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            wavelength: 1e-2,
            density: 1e-3,
            radius: 100.0,
            nx: 64,
            ny: 64,
            dx: 5e-3,
            dy: 5e-3,
            d0: 0.2,
            alpha: 4.0,
            height: 10.0,
            num_ues: 1,
            power: 100.0,
            noise_power: 1e-12,
            phase_error_model: PhaseErrorKind::None,
            phase_error_power: 0.0,
            epsilon_u: 1.0,
            epsilon_v: 1.0,
            channel_mode: ChannelMode::Near,
            combiner: Combiner::Aware,
            trials: 500,
            seed: 1,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("{v} must be a positive finite number")))
    }
}

impl ExperimentConfig {
    /// Checks every field; the error names the offending key.
    pub fn validate(&self) -> Result<()> {
        positive("wavelength", self.wavelength)?;
        positive("density", self.density)?;
        positive("radius", self.radius)?;
        positive("dx", self.dx)?;
        positive("dy", self.dy)?;
        positive("d0", self.d0)?;
        positive("height", self.height)?;
        positive("power", self.power)?;
        positive("noise_power", self.noise_power)?;
        if self.nx == 0 {
            return Err(invalid("nx", "must be >= 1"));
        }
        if self.ny == 0 {
            return Err(invalid("ny", "must be >= 1"));
        }
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("{} must be > 1", self.alpha)));
        }
        if self.num_ues == 0 {
            return Err(invalid("num_ues", "must be >= 1"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be >= 1"));
        }
        self.hardware()?;
        self.phase_model()?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<RhsGeometry> {
        RhsGeometry::new(self.nx, self.ny, self.dx, self.dy, self.d0, self.alpha)
    }

    pub fn region(&self) -> Result<Region> {
        Region::new(self.radius)
    }

    pub fn hardware(&self) -> Result<HardwareQuality> {
        HardwareQuality::new(self.epsilon_u, self.epsilon_v)
    }

    pub fn phase_model(&self) -> Result<PhaseErrorModel> {
        PhaseErrorModel::from_power(self.phase_error_model, self.phase_error_power)
    }

    pub fn system_params(&self, power: f64) -> Result<SystemParams> {
        Ok(SystemParams::uniform(
            self.num_ues,
            power,
            self.phase_model()?.xi(),
            self.hardware()?,
            self.noise_power,
        ))
    }

    pub fn operating_point(&self, power: f64) -> Result<OperatingPoint> {
        Ok(OperatingPoint {
            density: self.density,
            area: self.region()?.area(),
            powers: vec![power; self.num_ues],
            hardware: self.hardware()?,
            xi: self.phase_model()?.xi(),
            noise: self.noise_power,
        })
    }
}

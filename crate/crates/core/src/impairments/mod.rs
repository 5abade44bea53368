//! Phase-shift errors at the surface elements and RF-chain hardware quality.

pub mod bessel;

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::quad::{quad_1d, Tolerance};
use crate::error::{invalid, Result};

pub use bessel::{bessel_i0, bessel_i0e, bessel_i1, bessel_i1e, bessel_ratio_i1_i0};

/// Distribution of the per-element phase error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseErrorModel {
    /// Ideal phase shifters.
    None,
    /// Uniform on `(-half_width, half_width)`.
    Uniform { half_width: f64 },
    /// Zero-mean von Mises with the given concentration.
    VonMises { concentration: f64 },
}

/// Which distribution family a phase error belongs to; used by configs that
/// specify the family and the error power separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseErrorKind {
    None,
    Uniform,
    VonMises,
}

impl PhaseErrorModel {
    pub fn uniform(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width <= PI) {
            return Err(invalid("half_width", format!("{half_width} not in (0, pi]")));
        }
        Ok(Self::Uniform { half_width })
    }

    pub fn von_mises(concentration: f64) -> Result<Self> {
        if !(concentration > 0.0 && concentration.is_finite()) {
            return Err(invalid("concentration", format!("{concentration} must be > 0")));
        }
        Ok(Self::VonMises { concentration })
    }

    /// Builds a model from its family and error power `sigma_p^2`, using
    /// `iota = sqrt(3 sigma^2)` (uniform) or `kappa = 1 / sigma^2` (von Mises).
    /// A zero power always yields [`PhaseErrorModel::None`].
    pub fn from_power(kind: PhaseErrorKind, power: f64) -> Result<Self> {
        if !(power >= 0.0 && power.is_finite()) {
            return Err(invalid("phase_error_power", format!("{power} must be >= 0")));
        }
        if power == 0.0 {
            return Ok(Self::None);
        }
        match kind {
            PhaseErrorKind::None => Err(invalid(
                "phase_error_power",
                "nonzero power requires a uniform or von_mises model",
            )),
            PhaseErrorKind::Uniform => Self::uniform((3.0 * power).sqrt()),
            PhaseErrorKind::VonMises => Self::von_mises(1.0 / power),
        }
    }

    pub fn kind(&self) -> PhaseErrorKind {
        match self {
            Self::None => PhaseErrorKind::None,
            Self::Uniform { .. } => PhaseErrorKind::Uniform,
            Self::VonMises { .. } => PhaseErrorKind::VonMises,
        }
    }

    /// Mean resultant length `xi = E[e^{j theta}]`.
    pub fn xi(&self) -> f64 {
        match *self {
            Self::None => 1.0,
            Self::Uniform { half_width } => half_width.sin() / half_width,
            Self::VonMises { concentration } => bessel_ratio_i1_i0(concentration),
        }
    }

    /// Phase error power `sigma_p^2` under the convention used by the rate
    /// analysis: `iota^2 / 3` for uniform errors and `1 / kappa` for von Mises.
    pub fn phase_error_power(&self) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Uniform { half_width } => half_width * half_width / 3.0,
            Self::VonMises { concentration } => 1.0 / concentration,
        }
    }

    /// Exact `E[theta^2]` over the support `(-pi, pi]`. Differs from
    /// [`phase_error_power`](Self::phase_error_power) for von Mises errors at
    /// small concentration.
    pub fn exact_second_moment(&self) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Uniform { half_width } => half_width * half_width / 3.0,
            Self::VonMises { concentration: k } => {
                let tol = Tolerance::relative(1e-12);
                let weight = |t: f64| (k * (t.cos() - 1.0)).exp();
                let num = quad_1d(|t| t * t * weight(t), 0.0, PI, &tol)
                    .map(|e| e.value)
                    .unwrap_or(f64::NAN);
                let den = quad_1d(weight, 0.0, PI, &tol)
                    .map(|e| e.value)
                    .unwrap_or(f64::NAN);
                num / den
            }
        }
    }

    /// Draws one phase error.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Uniform { half_width } => half_width * (2.0 * rng.random::<f64>() - 1.0),
            Self::VonMises { concentration } => sample_von_mises(concentration, rng),
        }
    }

    /// Fills `out` with i.i.d. phase errors.
    pub fn fill<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        for v in out.iter_mut() {
            *v = self.sample(rng);
        }
    }

    /// `n` i.i.d. phase errors.
    pub fn sample_errors<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.fill(&mut out, rng);
        out
    }
}

/// Best–Fisher (1979) wrapped-Cauchy envelope rejection sampler.
fn sample_von_mises<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    if kappa < 1e-8 {
        return PI * (2.0 * rng.random::<f64>() - 1.0);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            return if u3 > 0.5 { theta } else { -theta };
        }
    }
}

/// RF-chain hardware quality factors; 1 is ideal, 0 is unusable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardwareQuality {
    /// UE transmitter quality `epsilon_u`.
    pub eps_u: f64,
    /// BS receiver quality `epsilon_v`.
    pub eps_v: f64,
}

impl HardwareQuality {
    pub const IDEAL: Self = Self {
        eps_u: 1.0,
        eps_v: 1.0,
    };

    pub fn new(eps_u: f64, eps_v: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps_u) {
            return Err(invalid("epsilon_u", format!("{eps_u} not in [0, 1]")));
        }
        if !(0.0..=1.0).contains(&eps_v) {
            return Err(invalid("epsilon_v", format!("{eps_v} not in [0, 1]")));
        }
        Ok(Self { eps_u, eps_v })
    }
}

impl Default for HardwareQuality {
    fn default() -> Self {
        Self::IDEAL
    }
}

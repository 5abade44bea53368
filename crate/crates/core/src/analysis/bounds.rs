//! Closed-form upper bounds on the ergodic sum rate and the integrals they
//! depend on.
//!
//! Every bound has the shape `sum_k log2(1 + S_k / D_k)` where the aperture
//! enters through two sums over elements: the coherent sum
//! `(sum_n sqrt(varsigma_n beta_n))^2` and the incoherent sum
//! `sum_n varsigma_n beta_n`, with `beta_n` the UE gain averaged over BS
//! position and orientation.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use super::quad::{integrate_nested, quad_1d, Estimate, Tolerance};
use crate::channel::{feed_density, feed_gain_vector, RhsGeometry};
use crate::error::{invalid, Error, Result};
use crate::geometry::Region;
use crate::impairments::HardwareQuality;

/// Tolerance for the averaged-gain integrals.
pub const BOUND_TOLERANCE: Tolerance = Tolerance::relative(1e-8);

/// Tolerance for the scalar integrals of the infinite-surface bound.
pub const SCALAR_TOLERANCE: Tolerance = Tolerance::relative(1e-10);

/// The truncation radius of the feed-amplitude integral, in units of `d0`.
pub const EPSILON_TRUNCATION: f64 = 50.0;

/// Network-level parameters of a bound evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    /// BS density `eta` (per square meter).
    pub density: f64,
    /// Area `S` of the BS region.
    pub area: f64,
    /// Per-UE transmit powers; their count is `K`.
    pub powers: Vec<f64>,
    pub hardware: HardwareQuality,
    pub xi: f64,
    pub noise: f64,
}

impl OperatingPoint {
    pub fn num_ues(&self) -> usize {
        self.powers.len()
    }

    fn with_powers(&self, power: f64) -> Self {
        Self {
            powers: vec![power; self.num_ues()],
            ..self.clone()
        }
    }
}

/// Aperture sums entering the bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApertureSums {
    /// `(sum_n sqrt(varsigma_n beta_n))^2`.
    pub coherent: f64,
    /// `sum_n varsigma_n beta_n`.
    pub incoherent: f64,
}

impl ApertureSums {
    pub fn from_gains(feed: &[f64], beta: &[f64]) -> Result<Self> {
        if feed.len() != beta.len() {
            return Err(Error::LengthMismatch {
                expected: feed.len(),
                got: beta.len(),
            });
        }
        let amp: f64 = feed.iter().zip(beta).map(|(s, b)| (s * b).sqrt()).sum();
        let inc: f64 = feed.iter().zip(beta).map(|(s, b)| s * b).sum();
        Ok(Self {
            coherent: amp * amp,
            incoherent: inc,
        })
    }

    /// Sums of an unbounded surface: coherent `zeta eps^2`, incoherent `zeta`.
    pub fn infinite_surface(zeta: f64, epsilon: f64) -> Self {
        Self {
            coherent: zeta * epsilon * epsilon,
            incoherent: zeta,
        }
    }
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Signal and interference coefficients of the bound, per unit power:
/// `(signal, distortion, diffuse)` so that the per-UE ratio is
/// `rho signal / (rho (distortion + diffuse) + noise)`.
fn coefficients(op: &OperatingPoint, sums: &ApertureSums) -> (f64, f64, f64) {
    let (eu, ev) = (op.hardware.eps_u, op.hardware.eps_v);
    let k = op.num_ues() as f64;
    let xi2 = op.xi * op.xi;
    let eta = op.density;
    let signal = eu * ev * xi2 * (eta / k) * sums.coherent;
    let distortion = ((1.0 - ev) / (eta * op.area) + (1.0 - eu) * ev / k) * xi2 * eta * sums.coherent;
    let diffuse = (1.0 - xi2) * sums.incoherent / op.area;
    (signal, distortion, diffuse)
}

/// Ergodic sum-rate upper bound for a finite surface.
pub fn bound_theorem1(op: &OperatingPoint, sums: &ApertureSums) -> f64 {
    let (signal, distortion, diffuse) = coefficients(op, sums);
    op.powers
        .iter()
        .map(|&rho| log2_1p(rho * signal / (rho * (distortion + diffuse) + op.noise)))
        .sum()
}

/// High-power limit of [`bound_theorem1`]; infinite for ideal hardware.
pub fn bound_power_limit(op: &OperatingPoint, sums: &ApertureSums) -> f64 {
    let (signal, distortion, diffuse) = coefficients(op, sums);
    let den = distortion + diffuse;
    if den == 0.0 {
        return f64::INFINITY;
    }
    op.num_ues() as f64 * log2_1p(signal / den)
}

/// Bounds with a single impairment active and their high-power limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialCases {
    /// Only the UE RF chains impaired (`xi = eps_v = 1`).
    pub ue_hwi: f64,
    pub ue_hwi_limit: f64,
    /// Only the BS RF chains impaired (`xi = eps_u = 1`).
    pub bs_hwi: f64,
    pub bs_hwi_limit: f64,
    /// Only the surface phases impaired (`eps_u = eps_v = 1`).
    pub pse: f64,
    pub pse_limit: f64,
}

/// Evaluates the single-impairment bounds using the impairment levels of
/// `op`. A limit is infinite when its impairment is absent.
pub fn bound_special_cases(op: &OperatingPoint, sums: &ApertureSums) -> SpecialCases {
    let k = op.num_ues() as f64;
    let (eu, ev, xi2) = (op.hardware.eps_u, op.hardware.eps_v, op.xi * op.xi);
    let (eta, s) = (op.density, op.area);
    let (x, y) = (sums.coherent, sums.incoherent);
    let sum_over = |f: &dyn Fn(f64) -> f64| op.powers.iter().map(|&rho| log2_1p(f(rho))).sum::<f64>();
    let ratio_or_inf = |num: f64, den: f64| if den == 0.0 { f64::INFINITY } else { k * log2_1p(num / den) };
    SpecialCases {
        ue_hwi: sum_over(&|rho| rho * eu * (eta / k) * x / (rho * (1.0 - eu) * (eta / k) * x + op.noise)),
        ue_hwi_limit: ratio_or_inf(eu, 1.0 - eu),
        bs_hwi: sum_over(&|rho| rho * ev * (eta / k) * x / (rho * (1.0 - ev) * x / s + op.noise)),
        bs_hwi_limit: ratio_or_inf(ev * eta * s, k * (1.0 - ev)),
        pse: sum_over(&|rho| rho * xi2 * (eta / k) * x / (rho * (1.0 - xi2) * y / s + op.noise)),
        pse_limit: ratio_or_inf(xi2 * eta * s * x, k * (1.0 - xi2) * y),
    }
}

/// `zeta = (A / pi) int_0^R r^2 / (r^2 + H^2)^{3/2} dr`, the UE gain
/// density averaged over the region, by quadrature.
pub fn zeta(area: f64, region: &Region, height: f64) -> Result<f64> {
    let h2 = height * height;
    let est = quad_1d(
        |r| r * r / (r * r + h2).powf(1.5),
        0.0,
        region.radius(),
        &SCALAR_TOLERANCE,
    )?;
    Ok(area / PI * est.value)
}

/// Sum of feed amplitudes `sqrt(varsigma_n)` over an unbounded surface,
/// i.e. the integral of `sqrt(density / A)` over the plane.
///
/// The radial integral is evaluated numerically up to
/// [`EPSILON_TRUNCATION`]` * d0` and the power-law tail is added in closed
/// form.
pub fn epsilon(d0: f64, alpha: f64, area: f64) -> Result<f64> {
    if alpha.is_nan() || alpha <= 1.0 {
        return Err(Error::EpsilonDiverges { alpha });
    }
    let c = ((alpha + 1.0) * d0.powf(alpha + 1.0) / (2.0 * PI * area)).sqrt();
    let p = 0.25 * (alpha + 3.0);
    let t = EPSILON_TRUNCATION * d0;
    let body = quad_1d(
        |r| 2.0 * PI * r * (feed_density(d0, alpha, r, 0.0) / area).sqrt(),
        0.0,
        t,
        &SCALAR_TOLERANCE,
    )?;
    let tail = PI * c * (d0 * d0 + t * t).powf(1.0 - p) / (p - 1.0);
    Ok(body.value + tail)
}

type BetaCache = Mutex<HashMap<[u64; 8], Arc<Vec<f64>>>>;

fn beta_cache() -> &'static BetaCache {
    static CACHE: OnceLock<BetaCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Averaged UE gain of an element at offset `(x, y)`:
/// `(1 / 2 pi) int_0^R int_0^pi A r^2 sin w / (r^2 + 2 r x cos w + x^2 + (H + y)^2)^{3/2} dw dr`.
pub fn beta_o_element(area: f64, radius: f64, height: f64, x: f64, y: f64, tol: &Tolerance) -> Result<Estimate> {
    let base = x * x + (height + y) * (height + y);
    let inner = Tolerance {
        rel: tol.rel * 0.1,
        ..*tol
    };
    let est = integrate_nested(
        |r| {
            let a = r * r + base;
            let b = 2.0 * r * x;
            let e = quad_1d(|w| w.sin() / (a + b * w.cos()).powf(1.5), 0.0, PI, &inner)?;
            let scale = area * r * r / (2.0 * PI);
            Ok(Estimate {
                value: scale * e.value,
                error: scale * e.error,
            })
        },
        0.0,
        radius,
        tol,
    )?;
    Ok(est)
}

/// Averaged UE gains `beta^(o)` of every element, cached per geometry,
/// region and height. The integral depends on `|x_n|`, so mirrored columns
/// share one evaluation.
pub fn beta_o_vector(geom: &RhsGeometry, region: &Region, height: f64) -> Result<Arc<Vec<f64>>> {
    if height.is_nan() || height <= 0.0 {
        return Err(invalid("height", format!("{height} must be > 0")));
    }
    let key = [
        geom.nx() as u64,
        geom.ny() as u64,
        geom.dx().to_bits(),
        geom.dy().to_bits(),
        region.radius().to_bits(),
        height.to_bits(),
        BOUND_TOLERANCE.rel.to_bits(),
        0,
    ];
    if let Some(hit) = beta_cache().lock().expect("beta cache poisoned").get(&key) {
        return Ok(Arc::clone(hit));
    }
    let nx = geom.nx();
    // Column ix and nx-1-ix share |x|; evaluate the right half only.
    let half: Vec<usize> = (nx / 2..nx).collect();
    let area = geom.area();
    let radius = region.radius();
    let table: Vec<Vec<f64>> = (0..geom.ny())
        .into_par_iter()
        .map(|iy| {
            let y = geom.element_y(iy);
            half.iter()
                .map(|&ix| {
                    beta_o_element(area, radius, height, geom.element_x(ix).abs(), y, &BOUND_TOLERANCE)
                        .map(|e| e.value)
                        .map_err(|source| Error::ElementQuadrature {
                            index: iy * nx + ix,
                            source: Box::new(source),
                        })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(geom.num_elements());
    for row in &table {
        for ix in 0..nx {
            let mirrored = if ix >= nx / 2 { ix } else { nx - 1 - ix };
            out.push(row[mirrored - nx / 2]);
        }
    }
    let out = Arc::new(out);
    beta_cache()
        .lock()
        .expect("beta cache poisoned")
        .insert(key, Arc::clone(&out));
    Ok(out)
}

/// Aperture sums of a finite surface.
pub fn aperture_sums(geom: &RhsGeometry, region: &Region, height: f64) -> Result<ApertureSums> {
    let feed = feed_gain_vector(geom)?;
    let beta = beta_o_vector(geom, region, height)?;
    ApertureSums::from_gains(&feed.gains, &beta)
}

/// Every closed-form quantity at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub sums: ApertureSums,
    pub feed_gain_sum: f64,
    pub theorem1: f64,
    pub power_limit: f64,
    pub special: SpecialCases,
    pub zeta: f64,
    pub epsilon: f64,
    pub infinite_surface: f64,
}

pub fn bound_report(geom: &RhsGeometry, region: &Region, height: f64, op: &OperatingPoint) -> Result<BoundReport> {
    let sums = aperture_sums(geom, region, height)?;
    let z = zeta(geom.area(), region, height)?;
    let e = epsilon(geom.d0(), geom.alpha(), geom.area())?;
    Ok(BoundReport {
        sums,
        feed_gain_sum: feed_gain_vector(geom)?.sum(),
        theorem1: bound_theorem1(op, &sums),
        power_limit: bound_power_limit(op, &sums),
        special: bound_special_cases(op, &sums),
        zeta: z,
        epsilon: e,
        infinite_surface: bound_theorem1(op, &ApertureSums::infinite_surface(z, e)),
    })
}

/// [`bound_theorem1`] at a different common transmit power.
pub fn bound_at_power(op: &OperatingPoint, sums: &ApertureSums, power: f64) -> f64 {
    bound_theorem1(&op.with_powers(power), sums)
}

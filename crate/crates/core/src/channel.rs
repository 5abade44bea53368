//! Per-element channel synthesis: feed-to-element gains, UE-to-element
//! gains and phases, and the aggregated scalar channel of one base station.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::quad::{quad_2d, Tolerance};
use crate::error::{invalid, Error, Result};
use crate::geometry::LocalUePosition;

/// Tolerance used for the per-element gain integrals.
pub const ELEMENT_TOLERANCE: Tolerance = Tolerance::relative(1e-10);

/// Rectangular surface with a feed on its normal axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsGeometry {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    d0: f64,
    alpha: f64,
}

impl RhsGeometry {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, d0: f64, alpha: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid("nx", "element counts must be >= 1"));
        }
        for (name, v) in [("dx", dx), ("dy", dy), ("d0", d0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} must be > 0")));
            }
        }
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(invalid("alpha", format!("{alpha} must be > 1")));
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            d0,
            alpha,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn d0(&self) -> f64 {
        self.d0
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_elements(&self) -> usize {
        self.nx * self.ny
    }

    /// Element area `A`.
    pub fn area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn element_x(&self, ix: usize) -> f64 {
        (ix as f64 - 0.5 * (self.nx as f64 - 1.0)) * self.dx
    }

    pub fn element_y(&self, iy: usize) -> f64 {
        (iy as f64 - 0.5 * (self.ny as f64 - 1.0)) * self.dy
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.element_x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|i| self.element_y(i)).collect()
    }

    /// Center `(x_n, y_n)` of element `n = iy * nx + ix`.
    pub fn element_center(&self, n: usize) -> (f64, f64) {
        (self.element_x(n % self.nx), self.element_y(n / self.nx))
    }

    /// Distance from the feed at `(0, 0, -d0)` to element `n`.
    pub fn feed_distance(&self, n: usize) -> f64 {
        let (x, y) = self.element_center(n);
        (self.d0 * self.d0 + x * x + y * y).sqrt()
    }

    fn key(&self) -> [u64; 6] {
        [
            self.nx as u64,
            self.ny as u64,
            self.dx.to_bits(),
            self.dy.to_bits(),
            self.d0.to_bits(),
            self.alpha.to_bits(),
        ]
    }
}

/// Feed-to-element power gains `varsigma_n`, indexed like the element grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedGains {
    pub gains: Vec<f64>,
}

impl FeedGains {
    pub fn sum(&self) -> f64 {
        self.gains.iter().sum()
    }

    pub fn sqrt(&self) -> Vec<f64> {
        self.gains.iter().map(|g| g.sqrt()).collect()
    }
}

/// Feed radiation density at offset `(x, y)` on the surface plane.
pub fn feed_density(d0: f64, alpha: f64, x: f64, y: f64) -> f64 {
    (alpha + 1.0) * d0.powf(alpha + 1.0)
        / (2.0 * PI * (d0 * d0 + x * x + y * y).powf(0.5 * (alpha + 3.0)))
}

type FeedCache = Mutex<HashMap<[u64; 6], Arc<FeedGains>>>;

fn feed_cache() -> &'static FeedCache {
    static CACHE: OnceLock<FeedCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Integrates the feed density over every element. Results are cached per
/// geometry.
///
/// The density depends on `|x|` and `|y|` only, so each distinct pair of
/// absolute offsets is integrated once over its canonical (nonnegative)
/// element and shared by its mirror images.
pub fn feed_gain_vector(geom: &RhsGeometry) -> Result<Arc<FeedGains>> {
    let key = geom.key();
    if let Some(hit) = feed_cache().lock().expect("feed cache poisoned").get(&key) {
        return Ok(Arc::clone(hit));
    }
    // Offsets are `m * pitch / 2` with `m = |2 i - (n - 1)|`.
    let fold = |i: usize, n: usize| (2 * i as i64 - (n as i64 - 1)).unsigned_abs() as usize;
    let mx_max = geom.nx - 1;
    let my_max = geom.ny - 1;
    let (d0, alpha) = (geom.d0, geom.alpha);
    let rows: Vec<Result<Vec<f64>>> = (0..=my_max)
        .into_par_iter()
        .map(|my| {
            if my % 2 != my_max % 2 {
                return Ok(Vec::new());
            }
            let yc = 0.5 * my as f64 * geom.dy;
            (0..=mx_max)
                .map(|mx| {
                    if mx % 2 != mx_max % 2 {
                        return Ok(0.0);
                    }
                    let xc = 0.5 * mx as f64 * geom.dx;
                    quad_2d(
                        |x, y| feed_density(d0, alpha, x, y),
                        (xc - 0.5 * geom.dx, xc + 0.5 * geom.dx),
                        (yc - 0.5 * geom.dy, yc + 0.5 * geom.dy),
                        &ELEMENT_TOLERANCE,
                    )
                    .map(|e| e.value)
                    .map_err(|source| Error::ElementQuadrature {
                        index: mx + my * (mx_max + 1),
                        source: Box::new(source),
                    })
                })
                .collect()
        })
        .collect();
    let table = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut gains = Vec::with_capacity(geom.num_elements());
    for iy in 0..geom.ny {
        let row = &table[fold(iy, geom.ny)];
        for ix in 0..geom.nx {
            gains.push(row[fold(ix, geom.nx)]);
        }
    }
    let out = Arc::new(FeedGains { gains });
    feed_cache()
        .lock()
        .expect("feed cache poisoned")
        .insert(key, Arc::clone(&out));
    Ok(out)
}

/// How the UE-to-element gain is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainMode {
    /// Point-element approximation.
    #[default]
    Approx,
    /// Integral over the element footprint.
    Exact,
}

/// UE-to-element power gains `beta_n` for one (BS, UE) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    pub gains: Vec<f64>,
    /// Set when the UE lies in the panel plane; all gains are then zero.
    pub grazing: bool,
}

/// Point-element UE gain at surface offset `(x, y)`.
pub fn ue_gain_at(area: f64, q: &LocalUePosition, x: f64, y: f64) -> f64 {
    let d = q.distance_to(x, y);
    area * q.q[2] / (4.0 * PI * d * d * d)
}

pub fn ue_gain_vector(geom: &RhsGeometry, q: &LocalUePosition, mode: GainMode) -> Result<LinkGains> {
    let n = geom.num_elements();
    if q.q[2] <= 0.0 {
        return Ok(LinkGains {
            gains: vec![0.0; n],
            grazing: true,
        });
    }
    let area = geom.area();
    let gains = match mode {
        GainMode::Approx => (0..n)
            .map(|i| {
                let (x, y) = geom.element_center(i);
                ue_gain_at(area, q, x, y)
            })
            .collect(),
        GainMode::Exact => (0..n)
            .map(|i| {
                let (xc, yc) = geom.element_center(i);
                quad_2d(
                    |x, y| ue_gain_at(1.0, q, x, y),
                    (xc - 0.5 * geom.dx, xc + 0.5 * geom.dx),
                    (yc - 0.5 * geom.dy, yc + 0.5 * geom.dy),
                    &ELEMENT_TOLERANCE,
                )
                .map(|e| e.value)
                .map_err(|source| Error::ElementQuadrature {
                    index: i,
                    source: Box::new(source),
                })
            })
            .collect::<Result<_>>()?,
    };
    Ok(LinkGains {
        gains,
        grazing: false,
    })
}

/// Wavefront model used for the UE-side path length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Wavefront {
    /// Exact spherical path length.
    #[default]
    Near,
    /// First-order expansion around the panel center (planar wavefront).
    Far,
}

/// UE-to-element path length under the chosen wavefront model.
pub fn ue_path_length(q: &LocalUePosition, x: f64, y: f64, wavefront: Wavefront) -> f64 {
    match wavefront {
        Wavefront::Near => q.distance_to(x, y),
        Wavefront::Far => q.range - (q.q[0] * x + q.q[1] * y) / q.range,
    }
}

/// Maps a phase given in cycles to radians in `[-pi, pi)`.
pub fn wrap_cycles(cycles: f64) -> f64 {
    let mut frac = cycles - cycles.floor();
    if frac >= 0.5 {
        frac -= 1.0;
    }
    2.0 * PI * frac
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_phase(theta: f64) -> f64 {
    wrap_cycles(theta / (2.0 * PI))
}

/// Propagation phases `-(2 pi / lambda)(|r - p_n| + |q - p_n|)`, wrapped
/// after the two path lengths are summed. The feed path is always exact.
pub fn propagation_phases(
    geom: &RhsGeometry,
    q: &LocalUePosition,
    wavelength: f64,
    wavefront: Wavefront,
) -> Vec<f64> {
    (0..geom.num_elements())
        .map(|n| {
            let (x, y) = geom.element_center(n);
            let path = geom.feed_distance(n) + ue_path_length(q, x, y, wavefront);
            wrap_cycles(-path / wavelength)
        })
        .collect()
}

/// Sums `nu_n exp(j (design_n + error_n + prop_n))` over the elements.
pub fn aggregate_channel(
    amplitudes: &[f64],
    propagation: &[f64],
    design: &[f64],
    errors: &[f64],
) -> Result<Complex64> {
    let n = amplitudes.len();
    for len in [propagation.len(), design.len(), errors.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: len,
            });
        }
    }
    Ok(amplitudes
        .iter()
        .zip(propagation)
        .zip(design)
        .zip(errors)
        .map(|(((&a, &p), &d), &e)| Complex64::from_polar(a, d + e + p))
        .sum())
}

/// How channels are synthesized and how phases are designed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Spherical wavefronts for both phase design and evaluation.
    #[default]
    Near,
    /// Planar-wavefront channel end to end, with the center-element UE gain
    /// applied to every element.
    FarSynthetic,
    /// Phases designed with planar wavefronts, evaluated on the spherical
    /// channel.
    FarMismatched,
}

impl ChannelMode {
    pub fn design_wavefront(self) -> Wavefront {
        match self {
            Self::Near => Wavefront::Near,
            Self::FarSynthetic | Self::FarMismatched => Wavefront::Far,
        }
    }

    pub fn eval_wavefront(self) -> Wavefront {
        match self {
            Self::FarSynthetic => Wavefront::Far,
            Self::Near | Self::FarMismatched => Wavefront::Near,
        }
    }
}

/// Configured surface phases `(2 pi / lambda)(|r - p_n| + |q - p_n|)` that
/// align every element for a UE at `q`, wrapped into `[-pi, pi)`.
pub fn holographic_phases(
    geom: &RhsGeometry,
    q: &LocalUePosition,
    wavelength: f64,
    wavefront: Wavefront,
) -> Vec<f64> {
    (0..geom.num_elements())
        .map(|n| {
            let (x, y) = geom.element_center(n);
            let path = geom.feed_distance(n) + ue_path_length(q, x, y, wavefront);
            wrap_cycles(path / wavelength)
        })
        .collect()
}

/// Per-element amplitudes `sqrt(varsigma_n beta_n)` for a UE at `q`.
///
/// The far-synthetic mode applies the center-element gain to every element.
pub fn amplitude_vector(
    geom: &RhsGeometry,
    feed: &FeedGains,
    q: &LocalUePosition,
    mode: ChannelMode,
) -> Vec<f64> {
    let area = geom.area();
    let center = area * q.sin_elevation().max(0.0) / (4.0 * PI * q.range * q.range);
    (0..geom.num_elements())
        .map(|n| {
            let beta = if q.q[2] <= 0.0 {
                0.0
            } else if mode == ChannelMode::FarSynthetic {
                center
            } else {
                let (x, y) = geom.element_center(n);
                ue_gain_at(area, q, x, y)
            };
            (feed.gains[n] * beta).sqrt()
        })
        .collect()
}

/// One (BS, UE) link in element-resolved form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChannel {
    /// `nu_n = sqrt(varsigma_n beta_n)`.
    pub amplitudes: Vec<f64>,
    /// Propagation phases of the evaluated channel.
    pub propagation: Vec<f64>,
    /// Configured phases of the BS (designed for its focus UE).
    pub design: Vec<f64>,
    /// Error-free aggregated channel.
    pub aggregate: Complex64,
}

impl LinkChannel {
    /// `||nu||^2`, the incoherent power of the link.
    pub fn incoherent_power(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }

    /// Aggregated channel under the phase errors `errors`.
    pub fn with_errors(&self, errors: &[f64]) -> Result<Complex64> {
        aggregate_channel(&self.amplitudes, &self.propagation, &self.design, errors)
    }
}

/// Element-resolved channels for every (BS, UE) pair of a realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `links[l][k]`.
    pub links: Vec<Vec<LinkChannel>>,
    pub mode: ChannelMode,
}

impl ChannelSet {
    /// Builds every link. `positions[l][k]` is UE `k` in BS `l`'s frame and
    /// `focus[l]` the UE BS `l` designs its phases for.
    pub fn build(
        geom: &RhsGeometry,
        feed: &FeedGains,
        positions: &[Vec<LocalUePosition>],
        focus: &[usize],
        wavelength: f64,
        mode: ChannelMode,
    ) -> Result<Self> {
        if positions.len() != focus.len() {
            return Err(Error::LengthMismatch {
                expected: positions.len(),
                got: focus.len(),
            });
        }
        let links = positions
            .iter()
            .zip(focus)
            .map(|(row, &f)| {
                let design = holographic_phases(geom, &row[f], wavelength, mode.design_wavefront());
                row.iter()
                    .map(|q| {
                        let amplitudes = amplitude_vector(geom, feed, q, mode);
                        let propagation = propagation_phases(geom, q, wavelength, mode.eval_wavefront());
                        let zeros = vec![0.0; amplitudes.len()];
                        let aggregate = aggregate_channel(&amplitudes, &propagation, &design, &zeros)?;
                        Ok(LinkChannel {
                            amplitudes,
                            propagation,
                            design: design.clone(),
                            aggregate,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { links, mode })
    }

    pub fn num_bs(&self) -> usize {
        self.links.len()
    }
}

/// Error-free aggregated channel and incoherent power of one link, computed
/// without materializing per-element vectors.
///
/// `eval` is the UE being received, `design` the UE the BS is focused on.
/// Phases are formed from the path-length difference in wavelengths before
/// reduction, so the common feed path cancels exactly.
pub fn link_aggregate(
    geom: &RhsGeometry,
    sqrt_feed: &[f64],
    eval: &LocalUePosition,
    design: &LocalUePosition,
    wavelength: f64,
    mode: ChannelMode,
) -> (Complex64, f64) {
    if eval.q[2] <= 0.0 {
        return (Complex64::new(0.0, 0.0), 0.0);
    }
    let area = geom.area();
    let xs = geom.xs();
    let ys = geom.ys();
    let scale = (area * eval.q[2] / (4.0 * PI)).sqrt();
    let center_amp = (area * eval.q[2] / (4.0 * PI * eval.range.powi(3))).sqrt();
    let eval_wf = mode.eval_wavefront();
    let design_wf = mode.design_wavefront();
    let same = std::ptr::eq(eval, design) || eval == design;

    let mut h = Complex64::new(0.0, 0.0);
    let mut incoherent = 0.0;
    let ex: Vec<f64> = xs.iter().map(|x| (eval.q[0] - x).powi(2)).collect();
    let dx: Vec<f64> = xs.iter().map(|x| (design.q[0] - x).powi(2)).collect();
    for (iy, &y) in ys.iter().enumerate() {
        let ey = (eval.q[1] - y).powi(2) + eval.q[2] * eval.q[2];
        let dy = (design.q[1] - y).powi(2) + design.q[2] * design.q[2];
        let row = &sqrt_feed[iy * xs.len()..(iy + 1) * xs.len()];
        for (ix, &x) in xs.iter().enumerate() {
            let d_eval = (ex[ix] + ey).sqrt();
            let amp = row[ix]
                * match mode {
                    ChannelMode::FarSynthetic => center_amp,
                    _ => scale / (d_eval * d_eval.sqrt()),
                };
            incoherent += amp * amp;
            if same && eval_wf == design_wf {
                h.re += amp;
                continue;
            }
            let p_eval = match eval_wf {
                Wavefront::Near => d_eval,
                Wavefront::Far => ue_path_length(eval, x, y, Wavefront::Far),
            };
            let p_design = match design_wf {
                Wavefront::Near => (dx[ix] + dy).sqrt(),
                Wavefront::Far => ue_path_length(design, x, y, Wavefront::Far),
            };
            let (s, c) = wrap_cycles((p_design - p_eval) / wavelength).sin_cos();
            h.re += amp * c;
            h.im += amp * s;
        }
    }
    (h, incoherent)
}

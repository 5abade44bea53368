//! Network layout: PPP base-station draws, UE placement, and the mapping of
//! a ground position into a base station's panel frame.
//!
//! Each panel is a vertical rectangle centered at height `H`. Its local `x`
//! axis is horizontal along the panel azimuth, local `y` points up, and the
//! local `z` axis is the panel normal. UEs sit on the ground plane.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Error, Result};

/// 2-D ground coordinates in meters.
pub type Point2 = [f64; 2];

/// Disk-shaped coverage region centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    radius: f64,
}

impl Region {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius", format!("{radius} must be > 0")));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Area `S = pi R^2`.
    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn contains(&self, p: Point2) -> bool {
        p[0].hypot(p[1]) <= self.radius
    }

    /// Uniform draw over the disk.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        let r = self.radius * rng.random::<f64>().sqrt();
        let t = 2.0 * PI * rng.random::<f64>();
        [r * t.cos(), r * t.sin()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsSite {
    pub center: Point2,
    /// Panel center height `H` above ground.
    pub height: f64,
    /// Panel azimuth in `[0, pi)`.
    pub azimuth: f64,
}

/// One draw of the base-station process.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    pub sites: Vec<BsSite>,
    pub region: Region,
    pub density: f64,
}

impl NetworkRealization {
    pub fn num_bs(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

/// Draws a homogeneous PPP of base stations over `region`.
///
/// Draw order: count, then all centers, then all azimuths. A zero count is
/// returned as an empty realization.
pub fn sample_ppp<R: Rng + ?Sized>(
    region: Region,
    density: f64,
    height: f64,
    rng: &mut R,
) -> Result<NetworkRealization> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(invalid("density", format!("{density} must be > 0")));
    }
    if height.is_nan() || height <= 0.0 {
        return Err(invalid("height", format!("{height} must be > 0")));
    }
    let mean = density * region.area();
    let count = Poisson::new(mean)
        .map_err(|e| invalid("density", e.to_string()))?
        .sample(rng) as usize;
    let centers: Vec<Point2> = (0..count).map(|_| region.sample_point(rng)).collect();
    let sites = centers
        .into_iter()
        .map(|center| BsSite {
            center,
            height,
            azimuth: PI * rng.random::<f64>(),
        })
        .collect();
    Ok(NetworkRealization {
        sites,
        region,
        density,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeLayout {
    pub positions: Vec<Point2>,
}

impl UeLayout {
    pub fn new(positions: Vec<Point2>) -> Result<Self> {
        if positions.is_empty() {
            return Err(invalid("num_ues", "at least one UE is required"));
        }
        Ok(Self { positions })
    }

    /// A single UE at the region centroid.
    pub fn centroid() -> Self {
        Self {
            positions: vec![[0.0, 0.0]],
        }
    }

    /// `k` UEs i.i.d. uniform over the region.
    pub fn uniform<R: Rng + ?Sized>(k: usize, region: &Region, rng: &mut R) -> Result<Self> {
        Self::new((0..k).map(|_| region.sample_point(rng)).collect())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// A UE position expressed in a panel's local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalUePosition {
    pub q: [f64; 3],
    /// `||q||`.
    pub range: f64,
    /// Angle `psi` between `q` and the panel plane.
    pub elevation: f64,
    /// Folded azimuth offset `omega` in `[0, pi]` between the ground offset
    /// and the panel's horizontal axis.
    pub azimuth_offset: f64,
}

impl LocalUePosition {
    /// Builds the local position from its Cartesian coordinates.
    pub fn from_cartesian(q: [f64; 3]) -> Result<Self> {
        let range = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
        if range == 0.0 {
            return Err(Error::DegenerateGeometry);
        }
        let horizontal = q[0].hypot(q[2]);
        Ok(Self {
            q,
            range,
            elevation: (q[2] / range).clamp(-1.0, 1.0).asin(),
            azimuth_offset: q[2].atan2(q[0]).abs(),
        })
        .map(|mut p: Self| {
            if horizontal == 0.0 {
                p.azimuth_offset = 0.0;
            }
            p
        })
    }

    /// `sin psi = q_z / ||q||`.
    pub fn sin_elevation(&self) -> f64 {
        self.q[2] / self.range
    }

    /// Distance to the point `(x, y, 0)` of the panel plane.
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        let dx = self.q[0] - x;
        let dy = self.q[1] - y;
        (dx * dx + dy * dy + self.q[2] * self.q[2]).sqrt()
    }
}

/// Maps a ground UE position into `site`'s panel frame.
///
/// Returns `q = (|c| cos w, -H, |c| sin w)` with `c = ue - center` and `w`
/// folded into `[0, pi]`, so every UE lies in front of the panel.
pub fn local_frame_position(site: &BsSite, ue: Point2) -> Result<LocalUePosition> {
    let c = [ue[0] - site.center[0], ue[1] - site.center[1]];
    let (s, co) = site.azimuth.sin_cos();
    let along = c[0] * co + c[1] * s;
    let normal = (-c[0] * s + c[1] * co).abs();
    LocalUePosition::from_cartesian([along, -site.height, normal])
}

/// Partition of the base stations by the UE their beam is focused on.
#[derive(Debug, Clone, PartialEq)]
pub struct ServingSets {
    /// Focus UE of each BS.
    pub focus: Vec<usize>,
    /// BS indices focused on each UE.
    pub sets: Vec<Vec<usize>>,
}

/// Assigns every base station to its nearest UE (3-D distance). Ties go to
/// the lowest UE index.
pub fn serving_sets(network: &NetworkRealization, ues: &UeLayout) -> ServingSets {
    let mut sets = vec![Vec::new(); ues.len()];
    let focus: Vec<usize> = network
        .sites
        .iter()
        .enumerate()
        .map(|(l, site)| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, ue) in ues.positions.iter().enumerate() {
                let dx = ue[0] - site.center[0];
                let dy = ue[1] - site.center[1];
                let d = (dx * dx + dy * dy + site.height * site.height).sqrt();
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            sets[best].push(l);
            best
        })
        .collect();
    ServingSets { focus, sets }
}

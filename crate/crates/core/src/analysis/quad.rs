//! Adaptive Gauss–Kronrod quadrature.
//!
//! One-dimensional integrals use a 7/15-point Gauss–Kronrod pair with global
//! bisection of the interval carrying the largest error estimate.
//! Multi-dimensional integrals over boxes are evaluated as nested 1-D
//! integrals; the error of each inner integral is propagated into the outer
//! estimate through the Kronrod weights.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the center.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_489_0,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

/// Convergence target for an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// Relative tolerance on the integral value.
    pub rel: f64,
    /// Absolute tolerance; the target is `max(abs, rel * |I|)`.
    pub abs: f64,
    /// Maximum number of subintervals per 1-D integration.
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn relative(rel: f64) -> Self {
        Self {
            rel,
            abs: 0.0,
            max_intervals: 500,
        }
    }

    /// Never asks for less than the roundoff floor of the rule.
    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs()).max(100.0 * f64::EPSILON * value.abs())
    }

    fn inner(&self) -> Self {
        Self {
            rel: self.rel * 0.1,
            abs: self.abs * 0.1,
            max_intervals: self.max_intervals,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::relative(1e-6)
    }
}

/// An integral value together with its absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

fn gauss_kronrod<F>(f: &mut F, a: f64, b: f64) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<Estimate>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc.value * WGK[7];
    let mut gauss = fc.value * WG[3];
    let mut inner_err = fc.error * WGK[7];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        let sum = f1.value + f2.value;
        kronrod += w * sum;
        inner_err += w * (f1.error + f2.error);
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    let value = kronrod * half;
    let rule_err = ((kronrod - gauss) * half).abs();
    let roundoff = 50.0 * f64::EPSILON * value.abs();
    Ok(Estimate {
        value,
        error: rule_err.max(roundoff) + inner_err * half.abs(),
    })
}

/// Adaptive integration of an integrand that itself returns an estimate
/// (used for nesting). Returns the best estimate on budget exhaustion as
/// [`Error::Quadrature`].
pub fn integrate_nested<F>(mut f: F, a: f64, b: f64, tol: &Tolerance) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<Estimate>,
{
    if a == b {
        return Ok(Estimate::exact(0.0));
    }
    let first = gauss_kronrod(&mut f, a, b)?;
    if !first.value.is_finite() {
        return Err(Error::Quadrature {
            value: first.value,
            error: f64::INFINITY,
        });
    }
    let mut total = first;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, est: first });
    while total.error > tol.target(total.value) {
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                value: total.value,
                error: total.error,
            });
        }
        let seg = heap.pop().expect("heap never empty");
        let mid = 0.5 * (seg.a + seg.b);
        let left = gauss_kronrod(&mut f, seg.a, mid)?;
        let right = gauss_kronrod(&mut f, mid, seg.b)?;
        total.value += left.value + right.value - seg.est.value;
        total.error += left.error + right.error - seg.est.error;
        heap.push(Segment { a: seg.a, b: mid, est: left });
        heap.push(Segment { a: mid, b: seg.b, est: right });
    }
    // Re-sum to shed the drift accumulated by incremental updates.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.est.value, e + s.est.error));
    Ok(Estimate { value, error })
}

/// Adaptive 1-D integration of `f` over `[a, b]`.
pub fn quad_1d<F>(mut f: F, a: f64, b: f64, tol: &Tolerance) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    integrate_nested(|x| Ok(Estimate::exact(f(x))), a, b, tol)
}

/// Nested adaptive integration of `f(x, y)` over `[x0, x1] × [y0, y1]`.
pub fn quad_2d<F>(f: F, x: (f64, f64), y: (f64, f64), tol: &Tolerance) -> Result<Estimate>
where
    F: Fn(f64, f64) -> f64,
{
    let inner = tol.inner();
    integrate_nested(
        |xv| quad_1d(|yv| f(xv, yv), y.0, y.1, &inner),
        x.0,
        x.1,
        tol,
    )
}

/// Nested adaptive integration of `f` over an axis-aligned box.
///
/// `domain[i]` gives the bounds of coordinate `i`; coordinate 0 is the
/// outermost integral.
pub fn quad_nd<F>(f: F, domain: &[(f64, f64)], tol: &Tolerance) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64,
{
    if domain.is_empty() {
        return Ok(Estimate::exact(f(&[])));
    }
    let mut point = vec![0.0; domain.len()];
    nd_level(&f, domain, 0, &mut point, tol)
}

fn nd_level<F>(
    f: &F,
    domain: &[(f64, f64)],
    depth: usize,
    point: &mut [f64],
    tol: &Tolerance,
) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64,
{
    let (a, b) = domain[depth];
    if depth + 1 == domain.len() {
        return integrate_nested(
            |x| {
                point[depth] = x;
                Ok(Estimate::exact(f(point)))
            },
            a,
            b,
            tol,
        );
    }
    let inner = tol.inner();
    // The inner levels only touch coordinates past `depth`, so the prefix is
    // stable while each inner integral runs.
    let mut scratch = point.to_vec();
    integrate_nested(
        |x| {
            scratch[depth] = x;
            nd_level(f, domain, depth + 1, &mut scratch, &inner)
        },
        a,
        b,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square() {
        let tol = Tolerance::relative(1e-12);
        let est = quad_nd(|_| 1.0, &[(0.0, 1.0), (0.0, 1.0)], &tol).unwrap();
        assert!((est.value - 1.0).abs() < 1e-12);
        assert!(est.error <= 1e-12);
    }

    #[test]
    fn radial_integral_matches_antiderivative() {
        // ln(r + sqrt(r^2 + H^2)) - r / sqrt(r^2 + H^2), evaluated 0..R.
        let (r_max, h) = (100.0_f64, 10.0_f64);
        let exact = (r_max / h).asinh() - r_max / (r_max * r_max + h * h).sqrt();
        let tol = Tolerance::relative(1e-10);
        let est = quad_1d(|r| r * r / (r * r + h * h).powf(1.5), 0.0, r_max, &tol).unwrap();
        assert!((est.value - exact).abs() / exact < 1e-8, "{} vs {exact}", est.value);
        assert!((exact - 2.0032).abs() < 1e-4);
        assert!(est.error <= 1e-10 * exact.abs() * 1.0001);
    }

    #[test]
    fn polynomial_is_exact_on_first_pass() {
        // K15 integrates polynomials of degree <= 22 exactly.
        let est = quad_1d(|x| x.powi(9) - 3.0 * x * x, -1.0, 2.0, &Tolerance::relative(1e-14)).unwrap();
        let exact = (2f64.powi(10) - 1.0) / 10.0 - (8.0 + 1.0);
        assert!((est.value - exact).abs() < 1e-12);
    }

    #[test]
    fn two_d_matches_nd() {
        let tol = Tolerance::relative(1e-10);
        let f = |x: f64, y: f64| (x * y).exp() / (1.0 + x * x);
        let a = quad_2d(f, (0.0, 1.0), (-1.0, 0.5), &tol).unwrap();
        let b = quad_nd(|p| f(p[0], p[1]), &[(0.0, 1.0), (-1.0, 0.5)], &tol).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn three_d_product() {
        let tol = Tolerance::relative(1e-9);
        let est = quad_nd(
            |p| p[0].sin() * p[1].cos() * p[2].exp(),
            &[(0.0, 1.0), (0.0, 2.0), (-1.0, 0.0)],
            &tol,
        )
        .unwrap();
        let exact = (1.0 - 1f64.cos()) * 2f64.sin() * (1.0 - (-1f64).exp());
        assert!((est.value - exact).abs() < 1e-9 * exact.abs());
    }

    #[test]
    fn budget_exhaustion_reports_best_estimate() {
        let tol = Tolerance {
            rel: 1e-14,
            abs: 0.0,
            max_intervals: 3,
        };
        let err = quad_1d(|x| x.abs().sqrt().recip(), 1e-12, 1.0, &tol).unwrap_err();
        match err {
            Error::Quadrature { value, error } => {
                assert!(value.is_finite() && value > 0.0);
                assert!(error > 0.0);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn empty_interval_is_zero() {
        let est = quad_1d(|x| x, 3.0, 3.0, &Tolerance::default()).unwrap();
        assert_eq!(est.value, 0.0);
    }
}

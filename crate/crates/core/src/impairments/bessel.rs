//! Modified Bessel functions of the first kind, orders 0 and 1.
//!
//! Power series below [`SERIES_LIMIT`], Hankel asymptotic expansion above.

/// Crossover between the power series and the asymptotic expansion.
pub const SERIES_LIMIT: f64 = 15.0;

fn series(order: u32, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let (mut term, scale) = match order {
        0 => (1.0, 1.0),
        _ => (1.0, 0.5 * x),
    };
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + order as f64));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    scale * sum
}

/// `e^{-x} sqrt(2 pi x) I_order(x)` from the asymptotic series; stops at the
/// smallest term.
fn asymptotic_reduced(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    let mut k = 1.0_f64;
    loop {
        let next = -term * (mu - (2.0 * k - 1.0).powi(2)) / (8.0 * k * x);
        if next.abs() >= term.abs() || next == 0.0 {
            break;
        }
        sum += next;
        term = next;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Exponentially scaled `e^{-|x|} I_order(x)`.
fn scaled(order: u32, x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SERIES_LIMIT {
        series(order, ax) * (-ax).exp()
    } else {
        asymptotic_reduced(order, ax) / (2.0 * std::f64::consts::PI * ax).sqrt()
    };
    if order == 1 && x < 0.0 {
        -v
    } else {
        v
    }
}

/// `I_0(x)`.
pub fn bessel_i0(x: f64) -> f64 {
    scaled(0, x) * x.abs().exp()
}

/// `I_1(x)`.
pub fn bessel_i1(x: f64) -> f64 {
    scaled(1, x) * x.abs().exp()
}

/// `e^{-|x|} I_0(x)`, finite for arbitrarily large `x`.
pub fn bessel_i0e(x: f64) -> f64 {
    scaled(0, x)
}

/// `e^{-|x|} I_1(x)`.
pub fn bessel_i1e(x: f64) -> f64 {
    scaled(1, x)
}

/// `I_1(x) / I_0(x)` without overflow.
pub fn bessel_ratio_i1_i0(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    scaled(1, x) / scaled(0, x)
}

//! Channel statistics under phase errors, the MMSE combiner at the central
//! unit, and SINR evaluation.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::impairments::HardwareQuality;
use crate::linalg::{factor, hermitize, inverse_quad_form, outer, CMatrix, CVector};

/// Error-free aggregated channels `h^(k)` and incoherent powers `Q^(k)` of
/// every UE, each of length `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    pub h: Vec<CVector>,
    /// Diagonal of `Q^(k)`.
    pub q: Vec<DVector<f64>>,
}

impl EffectiveChannels {
    pub fn new(h: Vec<CVector>, q: Vec<DVector<f64>>) -> Result<Self> {
        if h.len() != q.len() {
            return Err(Error::LengthMismatch {
                expected: h.len(),
                got: q.len(),
            });
        }
        let l = h.first().map_or(0, |v| v.len());
        for v in &h {
            if v.len() != l {
                return Err(Error::LengthMismatch { expected: l, got: v.len() });
            }
        }
        for v in &q {
            if v.len() != l {
                return Err(Error::LengthMismatch { expected: l, got: v.len() });
            }
            if v.iter().any(|&x| x < 0.0) {
                return Err(invalid("q", "incoherent powers must be >= 0"));
            }
        }
        Ok(Self { h, q })
    }

    pub fn num_ues(&self) -> usize {
        self.h.len()
    }

    pub fn num_bs(&self) -> usize {
        self.h.first().map_or(0, |v| v.len())
    }
}

/// Transmit powers, phase-error mean resultant, RF-chain quality and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Per-UE transmit power `rho_k` (linear).
    pub powers: Vec<f64>,
    pub xi: f64,
    pub hardware: HardwareQuality,
    /// Noise power `sigma_w^2` (linear).
    pub noise: f64,
}

impl SystemParams {
    pub fn uniform(num_ues: usize, power: f64, xi: f64, hardware: HardwareQuality, noise: f64) -> Self {
        Self {
            powers: vec![power; num_ues],
            xi,
            hardware,
            noise,
        }
    }
}

/// Receive combiner design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combiner {
    /// MMSE combiner built from the true impairment statistics.
    #[default]
    Aware,
    /// MMSE combiner built as if the surface and BS hardware were ideal;
    /// rates are still evaluated under the true impairments.
    Ignoring,
}

/// Powers of the individual terms in the SINR of one UE.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SinrTerms {
    /// Desired signal over the mean channel.
    pub desired: f64,
    /// Desired signal over the unknown (phase-error) part of the channel.
    pub pse: f64,
    pub ue_hwi: f64,
    pub bs_hwi: f64,
    pub inter_user: f64,
    pub noise: f64,
}

impl SinrTerms {
    pub fn interference_plus_noise(&self) -> f64 {
        self.pse + self.ue_hwi + self.bs_hwi + self.inter_user + self.noise
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrReport {
    pub gamma: f64,
    pub rate: f64,
    pub terms: SinrTerms,
}

/// `log2(1 + gamma)`.
pub fn rate(gamma: f64) -> f64 {
    gamma.ln_1p() / std::f64::consts::LN_2
}

/// `C = xi^2 h h^H + (1 - xi^2) Q`.
pub fn covariance(h: &CVector, q: &DVector<f64>, xi: f64) -> CMatrix {
    let xi2 = xi * xi;
    let mut c = outer(h, h) * Complex64::from(xi2);
    for i in 0..h.len() {
        c[(i, i)] += Complex64::from((1.0 - xi2) * q[i]);
    }
    c
}

fn diag_part(m: &CMatrix) -> CMatrix {
    CMatrix::from_diagonal(&m.diagonal())
}

/// `eps_v C + (1 - eps_v) (C ⊙ I)`: covariance of a UE's contribution seen
/// through impaired BS receivers, per unit transmit power.
fn received_covariance(c: &CMatrix, eps_v: f64) -> CMatrix {
    let mut out = c * Complex64::from(eps_v);
    for i in 0..c.nrows() {
        out[(i, i)] = c[(i, i)];
    }
    out
}

/// `M = sum_k rho_k (eps_v C_k + (1 - eps_v) C_k ⊙ I) + sigma^2 I`.
pub fn mmse_matrix(ch: &EffectiveChannels, p: &SystemParams) -> CMatrix {
    let l = ch.num_bs();
    let mut m = CMatrix::identity(l, l) * Complex64::from(p.noise);
    for k in 0..ch.num_ues() {
        let c = covariance(&ch.h[k], &ch.q[k], p.xi);
        m += received_covariance(&c, p.hardware.eps_v) * Complex64::from(p.powers[k]);
    }
    hermitize(&mut m);
    m
}

/// MMSE combiners `b_k = rho_k eps_u eps_v M^{-1} h^(k)` for every UE,
/// sharing one factorization of `M`.
pub fn mmse_combiner(ch: &EffectiveChannels, p: &SystemParams) -> Result<Vec<CVector>> {
    let m = mmse_matrix(ch, p);
    let chol = factor(&m)?;
    let scale = p.hardware.eps_u * p.hardware.eps_v;
    Ok((0..ch.num_ues())
        .map(|k| chol.solve(&ch.h[k]) * Complex64::from(p.powers[k] * scale))
        .collect())
}

/// Combiners designed under ideal surface and BS hardware (`xi = 1`,
/// `eps_v = 1`).
pub fn impairment_unaware_combiner(ch: &EffectiveChannels, p: &SystemParams) -> Result<Vec<CVector>> {
    let naive = SystemParams {
        xi: 1.0,
        hardware: HardwareQuality::new(p.hardware.eps_u, 1.0)?,
        ..p.clone()
    };
    mmse_combiner(ch, &naive)
}

/// SINR of UE `k` for an arbitrary combiner `b`, with every impairment term
/// accumulated separately.
pub fn sinr_general(b: &CVector, ch: &EffectiveChannels, p: &SystemParams, k: usize) -> SinrReport {
    let (eu, ev) = (p.hardware.eps_u, p.hardware.eps_v);
    let xi2 = p.xi * p.xi;
    let rho = p.powers[k];
    let h = &ch.h[k];
    let qk = &ch.q[k];
    let bh = b.dotc(h);
    let bh2 = bh.norm_sqr();
    let bq: f64 = b.iter().zip(qk.iter()).map(|(x, q)| x.norm_sqr() * q).sum();
    let c_k = xi2 * bh2 + (1.0 - xi2) * bq;
    let diag_c = |k2: usize| -> f64 {
        b.iter()
            .zip(ch.h[k2].iter())
            .zip(ch.q[k2].iter())
            .map(|((x, hv), q)| x.norm_sqr() * (xi2 * hv.norm_sqr() + (1.0 - xi2) * q))
            .sum()
    };
    let mut inter = 0.0;
    for k2 in (0..ch.num_ues()).filter(|&j| j != k) {
        let bh_j = b.dotc(&ch.h[k2]).norm_sqr();
        let bq_j: f64 = b.iter().zip(ch.q[k2].iter()).map(|(x, q)| x.norm_sqr() * q).sum();
        let full = xi2 * bh_j + (1.0 - xi2) * bq_j;
        inter += p.powers[k2] * (ev * full + (1.0 - ev) * diag_c(k2));
    }
    let terms = SinrTerms {
        desired: rho * eu * ev * xi2 * bh2,
        pse: rho * eu * ev * (1.0 - xi2) * bq,
        ue_hwi: rho * (1.0 - eu) * ev * c_k,
        bs_hwi: rho * (1.0 - ev) * diag_c(k),
        inter_user: inter,
        noise: p.noise * b.norm_squared(),
    };
    let den = terms.interference_plus_noise();
    let gamma = if terms.desired == 0.0 { 0.0 } else { terms.desired / den };
    SinrReport {
        gamma,
        rate: rate(gamma),
        terms,
    }
}

/// Interference-plus-noise covariance of UE `k`, assembled term by term so
/// that no large desired-signal component is subtracted.
fn interference_matrix(ch: &EffectiveChannels, p: &SystemParams, k: usize) -> CMatrix {
    let (eu, ev) = (p.hardware.eps_u, p.hardware.eps_v);
    let xi2 = p.xi * p.xi;
    let l = ch.num_bs();
    let mut m = CMatrix::identity(l, l) * Complex64::from(p.noise);
    for j in 0..ch.num_ues() {
        let rho = p.powers[j];
        if j == k {
            let hh = outer(&ch.h[j], &ch.h[j]);
            m += &hh * Complex64::from(rho * ev * (1.0 - eu) * xi2);
            m += diag_part(&hh) * Complex64::from(rho * (1.0 - ev) * xi2);
            for i in 0..l {
                m[(i, i)] += Complex64::from(rho * (1.0 - xi2) * ch.q[j][i]);
            }
        } else {
            let c = covariance(&ch.h[j], &ch.q[j], p.xi);
            m += received_covariance(&c, ev) * Complex64::from(rho);
        }
    }
    hermitize(&mut m);
    m
}

/// Per-UE MMSE SINR `rho eps_u eps_v xi^2 h^H M_k^{-1} h`, where `M_k` is
/// the interference-plus-noise covariance of UE `k`.
pub fn mmse_sinrs(ch: &EffectiveChannels, p: &SystemParams) -> Result<Vec<f64>> {
    let (eu, ev) = (p.hardware.eps_u, p.hardware.eps_v);
    let xi2 = p.xi * p.xi;
    (0..ch.num_ues())
        .map(|k| {
            let scale = p.powers[k] * eu * ev * xi2;
            if scale == 0.0 {
                return Ok(0.0);
            }
            let m = interference_matrix(ch, p, k);
            Ok(scale * inverse_quad_form(&m, &ch.h[k])?)
        })
        .collect()
}

/// Closed-form MMSE SINR with the term breakdown of the matching combiner
/// `M_k^{-1} h^(k)`.
pub fn sinr_mmse_closed_form(ch: &EffectiveChannels, p: &SystemParams) -> Result<Vec<SinrReport>> {
    let gammas = mmse_sinrs(ch, p)?;
    gammas
        .into_iter()
        .enumerate()
        .map(|(k, gamma)| {
            let m = interference_matrix(ch, p, k);
            let b = factor(&m)?.solve(&ch.h[k]);
            Ok(SinrReport {
                gamma,
                rate: rate(gamma),
                terms: sinr_general(&b, ch, p, k).terms,
            })
        })
        .collect()
}

/// Per-UE SINRs under the chosen combiner design.
pub fn combiner_sinrs(ch: &EffectiveChannels, p: &SystemParams, combiner: Combiner) -> Result<Vec<f64>> {
    match combiner {
        Combiner::Aware => mmse_sinrs(ch, p),
        Combiner::Ignoring => {
            let b = impairment_unaware_combiner(ch, p)?;
            Ok((0..ch.num_ues()).map(|k| sinr_general(&b[k], ch, p, k).gamma).collect())
        }
    }
}

/// Single-UE MMSE SINR as an explicit sum over base stations; the
/// interference covariance is diagonal plus a rank-one term, so the
/// quadratic form separates.
pub fn single_ue_sinr_sum(h: &CVector, q: &DVector<f64>, power: f64, xi: f64, hw: HardwareQuality, noise: f64) -> f64 {
    let (eu, ev) = (hw.eps_u, hw.eps_v);
    let xi2 = xi * xi;
    let weighted: f64 = h
        .iter()
        .zip(q.iter())
        .map(|(hl, ql)| {
            let g = hl.norm_sqr();
            let d = power * (1.0 - ev) * xi2 * g + power * (1.0 - xi2) * ql + noise;
            g / d
        })
        .sum();
    let a = power * eu * ev * xi2;
    a * weighted / (1.0 + power * (1.0 - eu) * ev * xi2 * weighted)
}

/// Reference SINR of a realization evaluated through [`sinr_general`] with
/// the MMSE combiner; used to cross-check the closed form.
pub fn sinr_with_mmse_combiner(ch: &EffectiveChannels, p: &SystemParams) -> Result<Vec<SinrReport>> {
    let b = mmse_combiner(ch, p)?;
    Ok((0..ch.num_ues()).map(|k| sinr_general(&b[k], ch, p, k)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::quad_form;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cgauss(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    /// Random channels with `Q_ll >= |h_l|^2 / N` for a notional `N`.
    fn random_channels(k: usize, l: usize, rng: &mut ChaCha8Rng) -> EffectiveChannels {
        let n = 16.0;
        let h: Vec<CVector> = (0..k).map(|_| CVector::from_fn(l, |_, _| cgauss(rng))).collect();
        let q = h
            .iter()
            .map(|v| DVector::from_fn(l, |i, _| v[i].norm_sqr() / n * (1.0 + rng.random::<f64>() * 4.0)))
            .collect();
        EffectiveChannels::new(h, q).unwrap()
    }

    fn params(k: usize, xi: f64, eu: f64, ev: f64) -> SystemParams {
        SystemParams::uniform(k, 10.0, xi, HardwareQuality::new(eu, ev).unwrap(), 0.1)
    }

    #[test]
    fn covariance_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = random_channels(1, 4, &mut rng);
        let c1 = covariance(&ch.h[0], &ch.q[0], 1.0);
        assert!((c1 - outer(&ch.h[0], &ch.h[0])).norm() < 1e-15);
        let c0 = covariance(&ch.h[0], &ch.q[0], 0.0);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { ch.q[0][i] } else { 0.0 };
                assert!((c0[(i, j)] - Complex64::from(want)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn matched_filter_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ch = random_channels(1, 5, &mut rng);
        let p = params(1, 1.0, 1.0, 1.0);
        let g = mmse_sinrs(&ch, &p).unwrap()[0];
        let want = 10.0 * ch.h[0].norm_squared() / 0.1;
        assert!(((g - want) / want).abs() < 1e-12);
    }

    #[test]
    fn single_bs_scalar_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = random_channels(1, 1, &mut rng);
        let p = params(1, 0.8, 0.9, 0.95);
        let b = mmse_combiner(&ch, &p).unwrap();
        let ratio = b[0][0] / ch.h[0][0];
        assert!(ratio.im.abs() < 1e-12 * ratio.re && ratio.re > 0.0);
        let g = sinr_general(&b[0], &ch, &p, 0).gamma;
        let sum = single_ue_sinr_sum(&ch.h[0], &ch.q[0], 10.0, 0.8, p.hardware, 0.1);
        assert!(((g - sum) / sum).abs() < 1e-10);
    }

    #[test]
    fn general_equals_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let k = rng.random_range(1..=4);
            let l = rng.random_range(1..=16);
            let ch = random_channels(k, l, &mut rng);
            let p = params(k, rng.random_range(0.3..1.0), rng.random_range(0.8..1.0), rng.random_range(0.8..1.0));
            let closed = mmse_sinrs(&ch, &p).unwrap();
            let general = sinr_with_mmse_combiner(&ch, &p).unwrap();
            for (c, g) in closed.iter().zip(&general) {
                assert!(((c - g.gamma) / c).abs() < 1e-10, "{c} vs {}", g.gamma);
            }
            if k == 1 {
                let sum = single_ue_sinr_sum(&ch.h[0], &ch.q[0], 10.0, p.xi, p.hardware, p.noise);
                assert!(((closed[0] - sum) / sum).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mmse_beats_random_combiners() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = random_channels(3, 8, &mut rng);
        let p = params(3, 0.7, 0.95, 0.9);
        let b = mmse_combiner(&ch, &p).unwrap();
        for (k, bk) in b.iter().enumerate() {
            let best = sinr_general(bk, &ch, &p, k).gamma;
            for _ in 0..100 {
                let alt = CVector::from_fn(8, |_, _| cgauss(&mut rng));
                assert!(sinr_general(&alt, &ch, &p, k).gamma <= best * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn orthogonal_combiner_gives_zero() {
        let h = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let q = DVector::from_vec(vec![0.1, 0.0]);
        let ch = EffectiveChannels::new(vec![h], vec![q]).unwrap();
        let b = CVector::from_vec(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert_eq!(sinr_general(&b, &ch, &params(1, 0.9, 1.0, 1.0), 0).gamma, 0.0);
    }

    #[test]
    fn scale_invariance_and_term_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ch = random_channels(2, 6, &mut rng);
        let p = params(2, 0.8, 0.9, 0.9);
        let b = CVector::from_fn(6, |_, _| cgauss(&mut rng));
        let r1 = sinr_general(&b, &ch, &p, 0);
        let r2 = sinr_general(&(&b * Complex64::from(2.0)), &ch, &p, 0);
        assert!(((r1.gamma - r2.gamma) / r1.gamma).abs() < 1e-12);
        // The terms reproduce the full quadratic-form denominator.
        let m = mmse_matrix(&ch, &p);
        let hbar = &ch.h[0] * Complex64::from(p.xi);
        let den = quad_form(&m, &b) - 10.0 * 0.81 * b.dotc(&hbar).norm_sqr();
        assert!(((r1.terms.interference_plus_noise() - den) / den).abs() < 1e-10);
    }

    #[test]
    fn sinr_monotone_in_impairments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ch = random_channels(2, 6, &mut rng);
        let g = |xi, eu, ev| mmse_sinrs(&ch, &params(2, xi, eu, ev)).unwrap();
        let grid = [1.0, 0.95, 0.9, 0.7];
        for w in grid.windows(2) {
            for k in 0..2 {
                assert!(g(w[1], 1.0, 1.0)[k] <= g(w[0], 1.0, 1.0)[k]);
                assert!(g(1.0, w[1], 1.0)[k] <= g(1.0, w[0], 1.0)[k]);
                assert!(g(1.0, 1.0, w[1])[k] <= g(1.0, 1.0, w[0])[k]);
            }
        }
    }

    #[test]
    fn aware_combiner_beats_unaware() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ch = random_channels(3, 8, &mut rng);
        let p = params(3, 0.6, 1.0, 0.9);
        let aware = combiner_sinrs(&ch, &p, Combiner::Aware).unwrap();
        let naive = combiner_sinrs(&ch, &p, Combiner::Ignoring).unwrap();
        for (a, n) in aware.iter().zip(&naive) {
            assert!(*a >= n * (1.0 - 1e-12));
        }
    }

    #[test]
    fn closed_form_reports_consistent_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ch = random_channels(2, 5, &mut rng);
        let p = params(2, 0.8, 0.95, 0.9);
        for r in sinr_mmse_closed_form(&ch, &p).unwrap() {
            let g = r.terms.desired / r.terms.interference_plus_noise();
            assert!(((g - r.gamma) / r.gamma).abs() < 1e-10);
            assert!((r.rate - (1.0 + r.gamma).log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_noise_degenerate_is_singular() {
        let h = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
        let q = DVector::from_vec(vec![0.0, 0.0]);
        let ch = EffectiveChannels::new(vec![h], vec![q]).unwrap();
        let p = SystemParams::uniform(1, 1.0, 1.0, HardwareQuality::IDEAL, 0.0);
        assert!(matches!(mmse_combiner(&ch, &p), Err(Error::SingularMmse)));
    }
}

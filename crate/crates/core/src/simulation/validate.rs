//! Statistical checks of the phase-error moments, the channel covariance,
//! the symbol-level signal model and the closed-form SINR identities.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::sweep::{mean_stderr, pairwise_sum};
use super::trial::{trial_rng, Realization};
use crate::beamforming::{
    covariance, impairment_unaware_combiner, mmse_combiner, mmse_sinrs, single_ue_sinr_sum, sinr_general,
    sinr_with_mmse_combiner, Combiner, EffectiveChannels, SinrReport, SystemParams,
};
use crate::channel::{feed_gain_vector, ChannelSet};
use crate::error::{invalid, Result};
use crate::geometry::{local_frame_position, serving_sets, BsSite, LocalUePosition, NetworkRealization, UeLayout};
use crate::impairments::{HardwareQuality, PhaseErrorModel};
use crate::linalg::{hermitian_solve, CMatrix, CVector};

/// Draws per independently seeded batch.
const BATCH: usize = 1000;

/// Empirical mean resultant `E[e^{j theta}]` against its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanResultantCheck {
    pub xi: f64,
    pub empirical_re: f64,
    pub empirical_im: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub draws: usize,
}

impl MeanResultantCheck {
    pub fn deviation(&self) -> f64 {
        (self.empirical_re - self.xi).abs()
    }

    /// Real-positive within three standard errors and within `tol` of `xi`.
    pub fn passes(&self, tol: f64) -> bool {
        self.empirical_re > 0.0 && self.empirical_im.abs() <= 3.0 * self.stderr_im && self.deviation() <= tol
    }
}

fn batch_sizes(draws: usize) -> Vec<usize> {
    let full = draws / BATCH;
    let mut sizes = vec![BATCH; full];
    if !draws.is_multiple_of(BATCH) {
        sizes.push(draws % BATCH);
    }
    sizes
}

/// Estimates `E[e^{j theta}]` from `draws` samples of `model`.
pub fn mean_resultant(model: &PhaseErrorModel, draws: usize, seed: u64) -> MeanResultantCheck {
    let parts: Vec<[f64; 4]> = batch_sizes(draws)
        .into_par_iter()
        .enumerate()
        .map(|(b, n)| {
            let mut rng = trial_rng(seed, b as u64);
            let mut acc = [0.0; 4];
            for _ in 0..n {
                let (s, c) = model.sample(&mut rng).sin_cos();
                acc[0] += c;
                acc[1] += s;
                acc[2] += c * c;
                acc[3] += s * s;
            }
            acc
        })
        .collect();
    let total = |i: usize| pairwise_sum(&parts.iter().map(|p| p[i]).collect::<Vec<_>>());
    let n = draws as f64;
    let (re, im) = (total(0) / n, total(1) / n);
    let var = |m2: f64, m: f64| ((m2 / n - m * m) * n / (n - 1.0)).max(0.0);
    MeanResultantCheck {
        xi: model.xi(),
        empirical_re: re,
        empirical_im: im,
        stderr_re: (var(total(2), re) / n).sqrt(),
        stderr_im: (var(total(3), im) / n).sqrt(),
        draws,
    }
}

/// One link with the error-free phase of every element folded together.
#[derive(Debug, Clone)]
struct PhasedLink {
    amplitudes: Vec<f64>,
    phases: Vec<f64>,
}

impl PhasedLink {
    fn channel(&self, errors: &[f64]) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&self.phases)
            .zip(errors)
            .map(|((&a, &p), &e)| Complex64::from_polar(a, p + e))
            .sum()
    }
}

/// A fixed realization with element-resolved channels, used by the
/// covariance and symbol-level checks.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// `links[l][k]`.
    links: Vec<Vec<PhasedLink>>,
    pub channels: EffectiveChannels,
    pub phase_model: PhaseErrorModel,
    pub num_elements: usize,
}

impl Scenario {
    pub fn new(config: &ExperimentConfig, real: &Realization) -> Result<Self> {
        config.validate()?;
        if real.network.is_empty() {
            return Err(invalid("num_bs", "validation needs at least one BS"));
        }
        let geom = config.geometry()?;
        let feed = feed_gain_vector(&geom)?;
        let positions: Vec<Vec<LocalUePosition>> = real
            .network
            .sites
            .iter()
            .map(|s| real.ues.positions.iter().map(|&u| local_frame_position(s, u)).collect())
            .collect::<Result<_>>()?;
        let focus = serving_sets(&real.network, &real.ues).focus;
        let set = ChannelSet::build(&geom, &feed, &positions, &focus, config.wavelength, config.channel_mode)?;
        let (l, k) = (set.num_bs(), real.ues.len());
        let mut h = vec![CVector::zeros(l); k];
        let mut q = vec![DVector::<f64>::zeros(l); k];
        let links = set
            .links
            .iter()
            .enumerate()
            .map(|(li, row)| {
                row.iter()
                    .enumerate()
                    .map(|(ki, link)| {
                        h[ki][li] = link.aggregate;
                        q[ki][li] = link.incoherent_power();
                        PhasedLink {
                            amplitudes: link.amplitudes.clone(),
                            phases: link.design.iter().zip(&link.propagation).map(|(d, p)| d + p).collect(),
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            links,
            channels: EffectiveChannels::new(h, q)?,
            phase_model: config.phase_model()?,
            num_elements: geom.num_elements(),
        })
    }

    pub fn num_bs(&self) -> usize {
        self.links.len()
    }

    pub fn num_ues(&self) -> usize {
        self.channels.num_ues()
    }

    /// Channels of every UE under one fresh draw of the element phase errors
    /// (shared by all UEs seen through the same surface).
    fn draw_channels(&self, rng: &mut ChaCha8Rng, errors: &mut [f64]) -> Vec<CVector> {
        let mut out = vec![CVector::zeros(self.num_bs()); self.num_ues()];
        for (l, row) in self.links.iter().enumerate() {
            self.phase_model.fill(errors, rng);
            for (k, link) in row.iter().enumerate() {
                out[k][l] = link.channel(errors);
            }
        }
        out
    }
}

/// Realization with `num_bs` base stations at uniformly drawn positions and
/// azimuths; a single UE sits at the centroid, more are drawn uniformly.
pub fn fixed_realization(config: &ExperimentConfig, num_bs: usize, seed: u64) -> Result<Realization> {
    let region = config.region()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<_> = (0..num_bs).map(|_| region.sample_point(&mut rng)).collect();
    let sites = centers
        .into_iter()
        .map(|center| BsSite {
            center,
            height: config.height,
            azimuth: std::f64::consts::PI * rng.random::<f64>(),
        })
        .collect();
    let ues = if config.num_ues == 1 {
        UeLayout::centroid()
    } else {
        UeLayout::uniform(config.num_ues, &region, &mut rng)?
    };
    Ok(Realization {
        network: NetworkRealization {
            sites,
            region,
            density: config.density,
        },
        ues,
    })
}

/// Empirical against closed-form channel covariance of UE 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceCheck {
    /// Max entrywise deviation over the largest diagonal entry of the
    /// closed-form covariance.
    pub deviation: f64,
    /// Same deviation over the largest incoherent power.
    pub deviation_incoherent: f64,
    pub draws: usize,
}

/// Redraws only the phase errors `draws` times on a fixed realization and
/// compares the sample `E[h h^H]` of UE 0 with its closed form.
pub fn validate_covariance(scenario: &Scenario, draws: usize, seed: u64) -> Result<CovarianceCheck> {
    if draws == 0 {
        return Err(invalid("draws", "must be >= 1"));
    }
    let l = scenario.num_bs();
    let parts: Vec<CMatrix> = batch_sizes(draws)
        .into_par_iter()
        .enumerate()
        .map(|(b, n)| {
            let mut rng = trial_rng(seed, b as u64);
            let mut errors = vec![0.0; scenario.num_elements];
            let mut acc = CMatrix::zeros(l, l);
            for _ in 0..n {
                let h = &scenario.draw_channels(&mut rng, &mut errors)[0];
                acc += h * h.adjoint();
            }
            acc
        })
        .collect();
    let mut sum = CMatrix::zeros(l, l);
    for p in &parts {
        sum += p;
    }
    let empirical = sum / Complex64::from(draws as f64);
    let ch = &scenario.channels;
    let expected = covariance(&ch.h[0], &ch.q[0], scenario.phase_model.xi());
    let max_dev = (&empirical - &expected).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let max_diag = (0..l).map(|i| expected[(i, i)].re).fold(0.0, f64::max);
    let max_q = ch.q[0].iter().copied().fold(0.0, f64::max);
    Ok(CovarianceCheck {
        deviation: max_dev / max_diag,
        deviation_incoherent: max_dev / max_q,
        draws,
    })
}

/// Sample mean and standard error of one power estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn from_samples(xs: &[f64]) -> Self {
        let (mean, stderr) = mean_stderr(xs);
        Self { mean, stderr }
    }

    /// Within `k` standard errors of `target`, plus a rounding allowance
    /// for quantities that do not fluctuate.
    pub fn agrees(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr + 1e-9 * target.abs()
    }
}

/// Symbol-level term powers of one UE against the statistical SINR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymbolLevelCheck {
    pub desired: Estimate,
    pub pse: Estimate,
    pub ue_hwi: Estimate,
    pub bs_hwi: Estimate,
    pub inter_user: Estimate,
    pub noise: Estimate,
    /// Batch-means estimate of desired over interference-plus-noise power.
    pub sinr: Estimate,
    #[serde(skip)]
    pub analytic: SinrReport,
    pub analytic_sinr: f64,
    pub symbols: usize,
}

impl SymbolLevelCheck {
    /// Every term power and the SINR within `k` standard errors (terms that
    /// vanish analytically must vanish exactly).
    pub fn passes(&self, k: f64) -> bool {
        let t = &self.analytic.terms;
        let pairs = [
            (self.desired, t.desired),
            (self.pse, t.pse),
            (self.ue_hwi, t.ue_hwi),
            (self.bs_hwi, t.bs_hwi),
            (self.inter_user, t.inter_user),
            (self.noise, t.noise),
            (self.sinr, self.analytic_sinr),
        ];
        pairs.iter().all(|(e, want)| {
            if *want == 0.0 {
                e.mean == 0.0
            } else {
                e.agrees(*want, k)
            }
        })
    }
}

fn cn01(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn qpsk(rng: &mut ChaCha8Rng) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bits: u8 = rng.random_range(0..4);
    Complex64::new(if bits & 1 == 0 { s } else { -s }, if bits & 2 == 0 { s } else { -s })
}

/// Simulates the received signal of UE `k` symbol by symbol, with fresh
/// symbols, distortions, noise and phase errors each time, and compares the
/// power of every term with the statistical SINR of the same combiner.
pub fn validate_symbol_level(
    scenario: &Scenario,
    params: &SystemParams,
    combiner: Combiner,
    k: usize,
    symbols: usize,
    seed: u64,
) -> Result<SymbolLevelCheck> {
    let ch = &scenario.channels;
    if k >= ch.num_ues() {
        return Err(invalid("k", format!("UE {k} out of range")));
    }
    if symbols < 2 * BATCH {
        return Err(invalid("symbols", format!("need at least {}", 2 * BATCH)));
    }
    if (params.xi - scenario.phase_model.xi()).abs() > 1e-15 {
        return Err(invalid("xi", "system xi must match the scenario's phase-error model"));
    }
    let b = match combiner {
        Combiner::Aware => mmse_combiner(ch, params)?,
        Combiner::Ignoring => impairment_unaware_combiner(ch, params)?,
    }
    .swap_remove(k);
    let analytic = sinr_general(&b, ch, params, k);
    let (eu, ev) = (params.hardware.eps_u, params.hardware.eps_v);
    let (l, nk) = (scenario.num_bs(), ch.num_ues());
    let noise_sd = params.noise.sqrt();
    let mean_k: CVector = &ch.h[k] * Complex64::from(params.xi);

    // Per-symbol term powers, in the order of `SinrTerms`.
    let batches: Vec<Vec<[f64; 6]>> = batch_sizes(symbols)
        .into_par_iter()
        .enumerate()
        .map(|(bi, n)| {
            let mut rng = trial_rng(seed, bi as u64);
            let mut errors = vec![0.0; scenario.num_elements];
            (0..n)
                .map(|_| {
                    let h = scenario.draw_channels(&mut rng, &mut errors);
                    let mut inter = Complex64::new(0.0, 0.0);
                    let mut own = [Complex64::new(0.0, 0.0); 4];
                    for (i, hi) in h.iter().enumerate() {
                        let rho = params.powers[i];
                        let s = qpsk(&mut rng);
                        let u = cn01(&mut rng);
                        let hv: CVector = CVector::from_fn(l, |r, _| hi[r] * cn01(&mut rng));
                        let a_s = (rho * eu * ev).sqrt();
                        let a_u = (rho * (1.0 - eu) * ev).sqrt();
                        let a_v = (rho * (1.0 - ev)).sqrt();
                        if i == k {
                            own[0] = b.dotc(&mean_k) * s * a_s;
                            own[1] = b.dotc(&(hi - &mean_k)) * s * a_s;
                            own[2] = b.dotc(hi) * u * a_u;
                            own[3] = b.dotc(&hv) * a_v;
                        } else {
                            inter += b.dotc(hi) * (s * a_s + u * a_u) + b.dotc(&hv) * a_v;
                        }
                    }
                    let w = CVector::from_fn(l, |_, _| cn01(&mut rng) * noise_sd);
                    let noise = b.dotc(&w);
                    [
                        own[0].norm_sqr(),
                        own[1].norm_sqr(),
                        own[2].norm_sqr(),
                        own[3].norm_sqr(),
                        if nk > 1 { inter.norm_sqr() } else { 0.0 },
                        noise.norm_sqr(),
                    ]
                })
                .collect()
        })
        .collect();

    let column = |j: usize| -> Vec<f64> { batches.iter().flatten().map(|t| t[j]).collect() };
    let batch_sinr: Vec<f64> = batches
        .iter()
        .filter(|b| b.len() == BATCH)
        .map(|b| {
            let d = pairwise_sum(&b.iter().map(|t| t[0]).collect::<Vec<_>>());
            let i = pairwise_sum(&b.iter().map(|t| t[1..].iter().sum::<f64>()).collect::<Vec<_>>());
            d / i
        })
        .collect();
    // The symbols are independent, so cross terms between the received
    // components average out and the interference power is the term sum.
    Ok(SymbolLevelCheck {
        desired: Estimate::from_samples(&column(0)),
        pse: Estimate::from_samples(&column(1)),
        ue_hwi: Estimate::from_samples(&column(2)),
        bs_hwi: Estimate::from_samples(&column(3)),
        inter_user: Estimate::from_samples(&column(4)),
        noise: Estimate::from_samples(&column(5)),
        sinr: Estimate::from_samples(&batch_sinr),
        analytic_sinr: analytic.gamma,
        analytic,
        symbols,
    })
}

/// Worst relative disagreements between equivalent SINR expressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    /// General SINR at the MMSE combiner against the closed form.
    pub general_vs_closed: f64,
    /// Closed form against the explicit per-BS sum, single-UE instances.
    pub single_ue_sum: f64,
    /// Direct quadratic form against its rank-one-update ratio form.
    pub woodbury: f64,
    pub instances: usize,
}

impl IdentityCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.general_vs_closed <= tol && self.single_ue_sum <= tol && self.woodbury <= tol
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    cn01(rng)
}

/// Random channels whose incoherent powers satisfy `Q_l >= |h_l|^2 / n`,
/// the bound an `n`-element surface imposes.
pub fn random_channels(k: usize, l: usize, n: usize, rng: &mut ChaCha8Rng) -> EffectiveChannels {
    let h: Vec<CVector> = (0..k).map(|_| CVector::from_fn(l, |_, _| random_complex(rng))).collect();
    let q = h
        .iter()
        .map(|v| DVector::from_fn(l, |i, _| v[i].norm_sqr() / n as f64 * (1.0 + 3.0 * rng.random::<f64>())))
        .collect();
    EffectiveChannels::new(h, q).expect("consistent shapes")
}

/// Random operating point with `xi` in `[0.3, 1]`, qualities in `[0.9, 1]`
/// and powers spanning two decades above unit noise.
pub fn random_params(k: usize, rng: &mut ChaCha8Rng) -> SystemParams {
    let hw = HardwareQuality::new(0.9 + 0.1 * rng.random::<f64>(), 0.9 + 0.1 * rng.random::<f64>())
        .expect("qualities in range");
    SystemParams {
        powers: (0..k).map(|_| 10f64.powf(2.0 * rng.random::<f64>())).collect(),
        xi: 0.3 + 0.7 * rng.random::<f64>(),
        hardware: hw,
        noise: 1.0,
    }
}

/// Checks the closed-form SINR identities on `instances` random systems
/// with up to 16 BSs and 4 UEs.
pub fn validate_identities(instances: usize, seed: u64) -> Result<IdentityCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = IdentityCheck {
        general_vs_closed: 0.0,
        single_ue_sum: 0.0,
        woodbury: 0.0,
        instances,
    };
    for _ in 0..instances {
        let l = rng.random_range(1..=16);
        let k = rng.random_range(1..=4);
        let ch = random_channels(k, l, 64, &mut rng);
        let p = random_params(k, &mut rng);
        let closed = mmse_sinrs(&ch, &p)?;
        let general = sinr_with_mmse_combiner(&ch, &p)?;
        for (c, g) in closed.iter().zip(&general) {
            out.general_vs_closed = out.general_vs_closed.max(rel(*c, g.gamma));
        }
        let ch1 = EffectiveChannels::new(vec![ch.h[0].clone()], vec![ch.q[0].clone()])?;
        let p1 = SystemParams {
            powers: vec![p.powers[0]],
            ..p.clone()
        };
        let sum = single_ue_sinr_sum(&ch1.h[0], &ch1.q[0], p1.powers[0], p1.xi, p1.hardware, p1.noise);
        out.single_ue_sum = out.single_ue_sum.max(rel(mmse_sinrs(&ch1, &p1)?[0], sum));

        // a h^H (A + c h h^H)^{-1} h = a h^H A^{-1} h / (1 + c h^H A^{-1} h)
        let g = CMatrix::from_fn(l, l, |_, _| random_complex(&mut rng));
        let a_mat = &g * g.adjoint() + CMatrix::identity(l, l) * Complex64::from(0.1);
        let h = &ch.h[0];
        let (a, c) = (rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0);
        let full = &a_mat + h * h.adjoint() * Complex64::from(c);
        let direct = a * h.dotc(&hermitian_solve(&full, h)?).re;
        let t = h.dotc(&hermitian_solve(&a_mat, h)?).re;
        out.woodbury = out.woodbury.max(rel(direct, a * t / (1.0 + c * t)));
    }
    Ok(out)
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Sizes of the validation suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteSize {
    pub resultant_draws: usize,
    pub covariance_draws: usize,
    pub symbols: usize,
    pub instances: usize,
}

impl Default for SuiteSize {
    fn default() -> Self {
        Self {
            resultant_draws: 1_000_000,
            covariance_draws: 100_000,
            symbols: 40_000,
            instances: 100,
        }
    }
}

fn kind_name(kind: crate::impairments::PhaseErrorKind) -> &'static str {
    use crate::impairments::PhaseErrorKind::*;
    match kind {
        None => "none",
        Uniform => "uniform",
        VonMises => "von_mises",
    }
}

/// Runs every statistical and identity check on small surfaces derived
/// from `base`; results depend only on `seed`.
pub fn run_suite(base: &ExperimentConfig, size: SuiteSize, seed: u64) -> Result<Vec<CheckOutcome>> {
    use crate::impairments::PhaseErrorKind::{Uniform, VonMises};
    let mut out = Vec::new();
    let mut push = |name: String, value: f64, threshold: f64, passed: bool| {
        out.push(CheckOutcome {
            name,
            value,
            threshold,
            passed,
        })
    };
    let models = [(Uniform, 0.1), (Uniform, 1.0), (VonMises, 1.0), (VonMises, 0.1)];
    for (i, &(kind, power)) in models.iter().enumerate() {
        let model = PhaseErrorModel::from_power(kind, power)?;
        let r = mean_resultant(&model, size.resultant_draws, seed.wrapping_add(i as u64));
        push(format!("mean_resultant/{}/{power}", kind_name(kind)), r.deviation(), 3e-3, r.passes(3e-3));
    }

    let small = ExperimentConfig {
        nx: 8,
        ny: 8,
        num_ues: 1,
        ..base.clone()
    };
    let real = fixed_realization(&small, 4, seed)?;
    for (kind, power, tol) in [(Uniform, 0.0, 1e-12), (Uniform, 1.0, 0.02), (VonMises, 0.1, 0.02)] {
        let cfg = ExperimentConfig {
            phase_error_model: kind,
            phase_error_power: power,
            ..small.clone()
        };
        let sc = Scenario::new(&cfg, &real)?;
        let c = validate_covariance(&sc, size.covariance_draws, seed)?;
        push(format!("covariance/{}/{power}", kind_name(kind)), c.deviation, tol, c.deviation < tol);
    }

    let ids = validate_identities(size.instances, seed)?;
    push("identity/general_vs_closed".into(), ids.general_vs_closed, 1e-10, ids.general_vs_closed <= 1e-10);
    push("identity/single_ue_sum".into(), ids.single_ue_sum, 1e-10, ids.single_ue_sum <= 1e-10);
    push("identity/woodbury".into(), ids.woodbury, 1e-10, ids.woodbury <= 1e-10);

    let cases = [
        ("symbol/ideal", 1, 1.0, 1.0, 0.0),
        ("symbol/ue_hwi", 1, 0.99, 1.0, 0.0),
        ("symbol/bs_hwi_pse", 2, 1.0, 0.99, 0.2),
        ("symbol/two_ue", 2, 0.99, 0.99, 0.2),
    ];
    for (name, k, eu, ev, pse) in cases {
        let cfg = ExperimentConfig {
            num_ues: k,
            epsilon_u: eu,
            epsilon_v: ev,
            phase_error_model: Uniform,
            phase_error_power: pse,
            ..small.clone()
        };
        let real = fixed_realization(&cfg, 4, seed)?;
        let sc = Scenario::new(&cfg, &real)?;
        let params = cfg.system_params(cfg.power)?;
        let s = validate_symbol_level(&sc, &params, cfg.combiner, 0, size.symbols, seed)?;
        let z = (s.sinr.mean - s.analytic_sinr).abs() / s.sinr.stderr;
        push(name.into(), z, 4.0, s.passes(4.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impairments::PhaseErrorKind;

    fn small(k: usize) -> ExperimentConfig {
        ExperimentConfig {
            nx: 8,
            ny: 8,
            num_ues: k,
            ..Default::default()
        }
    }

    fn scenario(cfg: &ExperimentConfig) -> Scenario {
        let real = fixed_realization(cfg, 4, 9).unwrap();
        Scenario::new(cfg, &real).unwrap()
    }

    #[test]
    fn mean_resultant_matches_xi() {
        for model in [PhaseErrorModel::uniform(1.0).unwrap(), PhaseErrorModel::von_mises(2.0).unwrap()] {
            let r = mean_resultant(&model, 200_000, 3);
            assert!(r.passes(3e-3), "{r:?}");
        }
        let ideal = mean_resultant(&PhaseErrorModel::None, 10, 1);
        assert_eq!((ideal.empirical_re, ideal.empirical_im), (1.0, 0.0));
    }

    #[test]
    fn scenario_channels_match_production_path() {
        let cfg = small(2);
        let real = fixed_realization(&cfg, 4, 5).unwrap();
        let sc = Scenario::new(&cfg, &real).unwrap();
        let ctx = super::super::trial::TrialContext::new(&cfg).unwrap();
        let prod = ctx.effective_channels(&real).unwrap();
        for k in 0..2 {
            for l in 0..4 {
                let (a, b) = (sc.channels.h[k][l], prod.h[k][l]);
                assert!((a - b).norm() <= 1e-9 * b.norm().max(1e-30), "{a} vs {b}");
                assert!(rel(sc.channels.q[k][l], prod.q[k][l]) < 1e-12);
            }
        }
    }

    #[test]
    fn ideal_covariance_is_exact() {
        let c = validate_covariance(&scenario(&small(1)), 2500, 1).unwrap();
        assert!(c.deviation < 1e-12, "{c:?}");
    }

    #[test]
    fn noisy_covariance_within_two_percent() {
        let cfg = ExperimentConfig {
            phase_error_model: PhaseErrorKind::Uniform,
            phase_error_power: 1.0,
            ..small(1)
        };
        let c = validate_covariance(&scenario(&cfg), 20_000, 2).unwrap();
        assert!(c.deviation < 0.02, "{c:?}");
        assert!(c.deviation_incoherent > c.deviation);
    }

    #[test]
    fn symbol_level_ideal_single_ue() {
        let cfg = small(1);
        let sc = scenario(&cfg);
        let p = cfg.system_params(cfg.power).unwrap();
        let s = validate_symbol_level(&sc, &p, Combiner::Aware, 0, 10_000, 4).unwrap();
        assert!(s.passes(4.0), "{s:?}");
        // Noise-only denominator: SINR is rho ||h||^2 / sigma^2.
        let want = cfg.power * sc.channels.h[0].norm_squared() / cfg.noise_power;
        assert!(rel(s.analytic_sinr, want) < 1e-9);
        assert_eq!(s.pse.mean, 0.0);
    }

    #[test]
    fn symbol_level_ue_distortion_ratio() {
        let cfg = ExperimentConfig { epsilon_u: 0.99, ..small(1) };
        let sc = scenario(&cfg);
        let p = cfg.system_params(cfg.power).unwrap();
        let s = validate_symbol_level(&sc, &p, Combiner::Aware, 0, 10_000, 5).unwrap();
        assert!(s.passes(4.0), "{s:?}");
        let ratio = s.ue_hwi.mean / s.desired.mean;
        let se = s.ue_hwi.stderr / s.desired.mean;
        assert!((ratio - 0.01 / 0.99).abs() <= 4.0 * se, "{ratio}");
    }

    #[test]
    fn symbol_level_two_ues_with_impairments() {
        let cfg = ExperimentConfig {
            epsilon_v: 0.99,
            phase_error_model: PhaseErrorKind::VonMises,
            phase_error_power: 0.3,
            ..small(2)
        };
        let sc = scenario(&cfg);
        let p = cfg.system_params(cfg.power).unwrap();
        for combiner in [Combiner::Aware, Combiner::Ignoring] {
            let s = validate_symbol_level(&sc, &p, combiner, 1, 10_000, 6).unwrap();
            assert!(s.passes(4.0), "{combiner:?}: {s:?}");
            assert!(s.inter_user.mean > 0.0);
        }
    }

    #[test]
    fn identities_hold() {
        let c = validate_identities(100, 11).unwrap();
        assert!(c.passes(1e-10), "{c:?}");
    }

    #[test]
    fn suite_is_deterministic() {
        let size = SuiteSize {
            resultant_draws: 5000,
            covariance_draws: 2000,
            symbols: 2000,
            instances: 5,
        };
        let a = run_suite(&ExperimentConfig::default(), size, 1).unwrap();
        let b = run_suite(&ExperimentConfig::default(), size, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 14);
    }
}

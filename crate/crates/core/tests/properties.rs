use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use holocell::analysis::quad::{quad_1d, Tolerance};
use holocell::analysis::{bound_at_power, bound_power_limit, bound_theorem1, ApertureSums, OperatingPoint};
use holocell::beamforming::{
    covariance, mmse_sinrs, sinr_general, single_ue_sinr_sum, EffectiveChannels, SystemParams,
};
use holocell::channel::{
    aggregate_channel, amplitude_vector, feed_gain_vector, holographic_phases, propagation_phases, wrap_cycles,
    ChannelMode, RhsGeometry,
};
use holocell::cli::RunConfig;
use holocell::geometry::{local_frame_position, BsSite};
use holocell::impairments::{bessel_ratio_i1_i0, HardwareQuality, PhaseErrorModel};
use holocell::linalg::CVector;
use holocell::simulation::sweep::{mean_stderr, pairwise_sum};
use holocell::simulation::validate::{random_channels, random_params};

fn cplx() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wrapped_phase_is_in_range_and_congruent(c in -1e6..1e6f64) {
        let w = wrap_cycles(c);
        prop_assert!((-PI..PI).contains(&w));
        let turns = (c - w / (2.0 * PI)).round();
        prop_assert!((c - turns - w / (2.0 * PI)).abs() < 1e-9 * c.abs().max(1.0));
    }

    #[test]
    fn mean_resultant_decreases_with_error_power(a in 0.01..3.0f64, b in 0.01..3.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        let u = |p: f64| PhaseErrorModel::uniform((3.0 * p).sqrt().min(PI)).unwrap().xi();
        let v = |p: f64| PhaseErrorModel::von_mises(1.0 / p).unwrap().xi();
        prop_assert!(u(hi) <= u(lo));
        prop_assert!(v(hi) < v(lo));
        prop_assert!(v(lo) > 0.0 && v(lo) < 1.0);
    }

    #[test]
    fn bessel_ratio_matches_quadrature(k in 0.05..60.0f64) {
        // I_n(k) e^{-k} = (1/pi) int_0^pi e^{k (cos t - 1)} cos(n t) dt.
        let tol = Tolerance::relative(1e-13);
        let i0 = quad_1d(|t| (k * (t.cos() - 1.0)).exp(), 0.0, PI, &tol).unwrap().value;
        let i1 = quad_1d(|t| (k * (t.cos() - 1.0)).exp() * t.cos(), 0.0, PI, &tol).unwrap().value;
        let want = i1 / i0;
        prop_assert!(((bessel_ratio_i1_i0(k) - want) / want).abs() < 1e-10);
    }

    #[test]
    fn covariance_is_hermitian_psd(
        h in prop::collection::vec(cplx(), 1..8),
        extra in prop::collection::vec(0.0..2.0f64, 8),
        xi in 0.0..=1.0f64,
    ) {
        let l = h.len();
        let hv = CVector::from_vec(h.clone());
        let q = DVector::from_fn(l, |i, _| h[i].norm_sqr() + extra[i]);
        let c = covariance(&hv, &q, xi);
        prop_assert!((&c - c.adjoint()).norm() < 1e-14);
        let min_eig = c.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min_eig >= -1e-12 * c.norm());
    }

    #[test]
    fn mmse_beats_any_combiner(seed in any::<u64>(), k in 1usize..4, l in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = random_channels(k, l, 64, &mut rng);
        let p = random_params(k, &mut rng);
        let best = mmse_sinrs(&ch, &p).unwrap();
        for (ue, &g) in best.iter().enumerate() {
            for trial in 0..4 {
                let b = CVector::from_fn(l, |i, _| {
                    Complex64::from_polar(1.0 + (i + trial) as f64 % 3.0, (seed as f64 + i as f64 * 1.7 + trial as f64).sin())
                });
                let other = sinr_general(&b, &ch, &p, ue).gamma;
                prop_assert!(other <= g * (1.0 + 1e-10), "{other} > {g}");
            }
        }
    }

    #[test]
    fn single_ue_closed_form_matches_sum(seed in any::<u64>(), l in 1usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = random_channels(1, l, 64, &mut rng);
        let p = random_params(1, &mut rng);
        let g = mmse_sinrs(&ch, &p).unwrap()[0];
        let s = single_ue_sinr_sum(&ch.h[0], &ch.q[0], p.powers[0], p.xi, p.hardware, p.noise);
        prop_assert!(((g - s) / s).abs() < 1e-10);
    }

    #[test]
    fn sinr_decreases_with_impairments(seed in any::<u64>(), l in 1usize..8, drop in 0.001..0.1f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = random_channels(2, l, 64, &mut rng);
        let p = random_params(2, &mut rng);
        let base = mmse_sinrs(&ch, &p).unwrap();
        let worse_ue = SystemParams {
            hardware: HardwareQuality::new(p.hardware.eps_u * (1.0 - drop), p.hardware.eps_v).unwrap(),
            ..p.clone()
        };
        let worse_xi = SystemParams { xi: p.xi * (1.0 - drop), ..p.clone() };
        for worse in [worse_ue, worse_xi] {
            let g = mmse_sinrs(&ch, &worse).unwrap();
            for (a, b) in g.iter().zip(&base) {
                prop_assert!(*a <= *b * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn bound_grows_with_power_toward_limit(
        p1 in -20.0..60.0f64,
        p2 in -20.0..60.0f64,
        eu in 0.9..=1.0f64,
        ev in 0.9..=1.0f64,
        xi in 0.3..=1.0f64,
        k in 1usize..6,
    ) {
        let op = OperatingPoint {
            density: 1e-3,
            area: PI * 1e4,
            powers: vec![1.0; k],
            hardware: HardwareQuality::new(eu, ev).unwrap(),
            xi,
            noise: 1e-12,
        };
        let sums = ApertureSums { coherent: 4.5e-2, incoherent: 1.2e-5 };
        let (lo, hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
        let (a, b) = (bound_at_power(&op, &sums, 10f64.powf(lo / 10.0)), bound_at_power(&op, &sums, 10f64.powf(hi / 10.0)));
        prop_assert!(a <= b * (1.0 + 1e-14));
        prop_assert!(b <= bound_power_limit(&op, &sums) * (1.0 + 1e-12));
        prop_assert!(bound_theorem1(&op, &sums) >= 0.0);
    }

    #[test]
    fn holographic_design_maximizes_gain(
        seed in any::<u64>(),
        cx in -60.0..60.0f64,
        cy in -60.0..60.0f64,
        az in 0.0..PI,
        scale in 0.01..2.0f64,
    ) {
        let geom = RhsGeometry::new(8, 8, 5e-3, 5e-3, 0.2, 4.0).unwrap();
        let feed = feed_gain_vector(&geom).unwrap();
        let site = BsSite { center: [cx, cy], height: 10.0, azimuth: az };
        let q = local_frame_position(&site, [0.0, 0.0]).unwrap();
        let amps = amplitude_vector(&geom, &feed, &q, ChannelMode::Near);
        let prop = propagation_phases(&geom, &q, 1e-2, ChannelMode::Near.eval_wavefront());
        let design = holographic_phases(&geom, &q, 1e-2, ChannelMode::Near.design_wavefront());
        let zeros = vec![0.0; amps.len()];
        let best = aggregate_channel(&amps, &prop, &design, &zeros).unwrap().norm();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perturbed = PhaseErrorModel::uniform(scale.min(PI)).unwrap().sample_errors(amps.len(), &mut rng);
        let other = aggregate_channel(&amps, &prop, &design, &perturbed).unwrap().norm();
        prop_assert!(other <= best * (1.0 + 1e-12));
        let coherent: f64 = amps.iter().sum();
        prop_assert!((best - coherent).abs() <= 1e-9 * coherent);
    }

    #[test]
    fn pairwise_mean_is_accurate(xs in prop::collection::vec(-1e3..1e3f64, 1..500)) {
        let naive: f64 = xs.iter().sum();
        prop_assert!((pairwise_sum(&xs) - naive).abs() <= 1e-9 * xs.iter().map(|x| x.abs()).sum::<f64>().max(1.0));
        let (m, se) = mean_stderr(&xs);
        prop_assert!(m >= xs.iter().cloned().fold(f64::INFINITY, f64::min) - 1e-9);
        prop_assert!(se >= 0.0);
    }

    #[test]
    fn config_round_trips(
        wavelength in 1e-3..1.0f64,
        density in 1e-5..1e-1f64,
        n in 1usize..200,
        power in 1e-3..1e6f64,
        eu in 0.0..=1.0f64,
        k in 1usize..8,
        seed in any::<u64>(),
        mode in 0usize..3,
    ) {
        let mut c = RunConfig::default();
        c.experiment.wavelength = wavelength;
        c.experiment.density = density;
        c.experiment.nx = n;
        c.experiment.power = power;
        c.experiment.epsilon_u = eu;
        c.experiment.num_ues = k;
        c.experiment.seed = seed;
        c.experiment.channel_mode = [ChannelMode::Near, ChannelMode::FarSynthetic, ChannelMode::FarMismatched][mode];
        let back = RunConfig::from_json(&c.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }
}

#[test]
fn effective_channels_reject_ragged_input() {
    let h = vec![CVector::zeros(2), CVector::zeros(3)];
    let q = vec![DVector::zeros(2), DVector::zeros(3)];
    assert!(EffectiveChannels::new(h, q).is_err());
}

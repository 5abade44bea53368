use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::trial::TrialContext;
use crate::analysis::{aperture_sums, bound_power_limit, bound_theorem1};
use crate::error::{invalid, Result};

/// Parameter varied across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Common UE transmit power (linear).
    Power,
    /// BS density.
    Density,
    /// Elements per side of a square surface.
    Elements,
    Wavelength,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Power => "power",
            Self::Density => "density",
            Self::Elements => "elements",
            Self::Wavelength => "wavelength",
        }
    }
}

/// Monte Carlo estimate of the ergodic sum rate at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    /// Mean sum rate (bits/s/Hz).
    pub mean: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    pub trials: usize,
    /// Closed-form upper bound at the same parameters.
    pub bound_theorem1: f64,
    /// High-power limit of the bound; infinite under ideal hardware.
    pub bound_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

/// Pairwise (cascade) summation; the result depends only on the order of
/// `xs`, never on how the values were computed.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error `sd / sqrt(n)` (zero for one sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Sum rates of every trial of `config`, in trial order.
pub fn trial_sum_rates(config: &ExperimentConfig) -> Result<Vec<f64>> {
    let ctx = TrialContext::new(config)?;
    (0..config.trials as u64)
        .into_par_iter()
        .map(|t| Ok(ctx.run_trial(t)?.iter().sum()))
        .collect()
}

fn point(config: &ExperimentConfig, axis_value: f64, rates: &[f64]) -> Result<SweepPoint> {
    let (mean, stderr) = mean_stderr(rates);
    let sums = aperture_sums(&config.geometry()?, &config.region()?, config.height)?;
    let op = config.operating_point(config.power)?;
    Ok(SweepPoint {
        axis_value,
        mean,
        stderr,
        trials: rates.len(),
        bound_theorem1: bound_theorem1(&op, &sums),
        bound_limit: bound_power_limit(&op, &sums),
    })
}

/// Ergodic sum rate at the configured parameters, with its bound.
pub fn ergodic_rate(config: &ExperimentConfig) -> Result<SweepPoint> {
    let rates = trial_sum_rates(config)?;
    point(config, config.power, &rates)
}

/// Config with the axis parameter replaced by `value`.
pub fn with_axis_value(config: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
    let mut c = config.clone();
    match axis {
        SweepAxis::Power => c.power = value,
        SweepAxis::Density => c.density = value,
        SweepAxis::Wavelength => c.wavelength = value,
        SweepAxis::Elements => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(invalid("elements_values", format!("{value} is not a positive integer")));
            }
            c.nx = value as usize;
            c.ny = value as usize;
        }
    }
    c.validate()?;
    Ok(c)
}

/// Runs one ergodic-rate point per value. Every point uses the same trial
/// indices, so trial `t` starts from the same random stream throughout.
///
/// Power sweeps reuse each trial's channel realization for all powers; the
/// resulting points are identical to separate [`ergodic_rate`] runs.
pub fn sweep(config: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(invalid("values", "sweep needs at least one value"));
    }
    let points = match axis {
        SweepAxis::Power => {
            let configs = values
                .iter()
                .map(|&v| with_axis_value(config, axis, v))
                .collect::<Result<Vec<_>>>()?;
            let ctx = TrialContext::new(config)?;
            let per_trial: Vec<Vec<f64>> = (0..config.trials as u64)
                .into_par_iter()
                .map(|t| ctx.run_trial_powers(t, values))
                .collect::<Result<_>>()?;
            configs
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let rates: Vec<f64> = per_trial.iter().map(|r| r[i]).collect();
                    point(c, values[i], &rates)
                })
                .collect::<Result<Vec<_>>>()?
        }
        _ => values
            .iter()
            .map(|&v| {
                let c = with_axis_value(config, axis, v)?;
                let rates = trial_sum_rates(&c)?;
                point(&c, v, &rates)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(SweepResult { axis, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            nx: 8,
            ny: 8,
            trials,
            ..Default::default()
        }
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
    }

    #[test]
    fn mean_stderr_known_values() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[3.0]), (3.0, 0.0));
    }

    #[test]
    fn power_sweep_matches_separate_points() {
        let cfg = ExperimentConfig { num_ues: 2, ..small(12) };
        let powers = [0.1, 10.0, 1000.0];
        let s = sweep(&cfg, SweepAxis::Power, &powers).unwrap();
        for (p, pt) in powers.iter().zip(&s.points) {
            let single = ergodic_rate(&ExperimentConfig { power: *p, ..cfg.clone() }).unwrap();
            assert_eq!(single.mean.to_bits(), pt.mean.to_bits());
            assert_eq!(single.stderr.to_bits(), pt.stderr.to_bits());
            assert_eq!(single.bound_theorem1.to_bits(), pt.bound_theorem1.to_bits());
        }
    }

    #[test]
    fn stderr_scales_with_trials() {
        let a = ergodic_rate(&small(400)).unwrap();
        let b = ergodic_rate(&small(1600)).unwrap();
        let ratio = a.stderr / b.stderr;
        assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
    }

    #[test]
    fn larger_surface_raises_rate() {
        let cfg = ExperimentConfig { trials: 100, ..Default::default() };
        let s = sweep(&cfg, SweepAxis::Elements, &[32.0, 64.0]).unwrap();
        assert!(s.points[1].mean > s.points[0].mean);
    }

    #[test]
    fn elements_axis_rejects_fractions() {
        assert!(with_axis_value(&small(1), SweepAxis::Elements, 2.5).is_err());
        assert!(sweep(&small(1), SweepAxis::Power, &[]).is_err());
    }
}

use std::sync::Arc;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use crate::beamforming::{combiner_sinrs, rate, EffectiveChannels};
use crate::channel::{link_aggregate, FeedGains, RhsGeometry};
use crate::error::Result;
use crate::geometry::{
    local_frame_position, sample_ppp, serving_sets, LocalUePosition, NetworkRealization, Region, UeLayout,
};
use crate::linalg::CVector;

/// Independent random stream of one trial: the master seed selects the key
/// and the trial index selects the stream, so any trial can be replayed
/// without touching the others.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// One network draw and its UE layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub network: NetworkRealization,
    pub ues: UeLayout,
}

/// Per-experiment state shared by all trials.
#[derive(Debug, Clone)]
pub struct TrialContext {
    pub config: ExperimentConfig,
    pub geometry: RhsGeometry,
    pub region: Region,
    pub feed: Arc<FeedGains>,
    sqrt_feed: Vec<f64>,
}

impl TrialContext {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let geometry = config.geometry()?;
        let feed = crate::channel::feed_gain_vector(&geometry)?;
        Ok(Self {
            config: config.clone(),
            geometry,
            region: config.region()?,
            sqrt_feed: feed.sqrt(),
            feed,
        })
    }

    /// Draws the BS process, then the UE positions (a single UE sits at the
    /// region centroid and consumes no randomness).
    pub fn draw_realization(&self, rng: &mut ChaCha8Rng) -> Result<Realization> {
        let network = sample_ppp(self.region, self.config.density, self.config.height, rng)?;
        let ues = if self.config.num_ues == 1 {
            UeLayout::centroid()
        } else {
            UeLayout::uniform(self.config.num_ues, &self.region, rng)?
        };
        Ok(Realization { network, ues })
    }

    /// Error-free aggregated channels and incoherent powers with every BS
    /// focused on its nearest UE.
    pub fn effective_channels(&self, real: &Realization) -> Result<EffectiveChannels> {
        let k = real.ues.len();
        let l = real.network.num_bs();
        let focus = serving_sets(&real.network, &real.ues).focus;
        let mut h = vec![CVector::zeros(l); k];
        let mut q = vec![DVector::<f64>::zeros(l); k];
        for (li, site) in real.network.sites.iter().enumerate() {
            let local: Vec<LocalUePosition> = real
                .ues
                .positions
                .iter()
                .map(|&u| local_frame_position(site, u))
                .collect::<Result<_>>()?;
            let design = &local[focus[li]];
            for (ki, pos) in local.iter().enumerate() {
                let (hv, qv) = link_aggregate(
                    &self.geometry,
                    &self.sqrt_feed,
                    pos,
                    design,
                    self.config.wavelength,
                    self.config.channel_mode,
                );
                h[ki][li] = hv;
                q[ki][li] = qv;
            }
        }
        EffectiveChannels::new(h, q)
    }

    /// Per-UE rates of a realization at a common transmit power; all zero
    /// when no BS was drawn.
    pub fn rates(&self, channels: &EffectiveChannels, power: f64) -> Result<Vec<f64>> {
        if channels.num_bs() == 0 {
            return Ok(vec![0.0; channels.num_ues()]);
        }
        let params = self.config.system_params(power)?;
        Ok(combiner_sinrs(channels, &params, self.config.combiner)?
            .into_iter()
            .map(rate)
            .collect())
    }

    /// Per-UE rates of trial `trial_index` at the configured power.
    pub fn run_trial(&self, trial_index: u64) -> Result<Vec<f64>> {
        let mut rng = trial_rng(self.config.seed, trial_index);
        let real = self.draw_realization(&mut rng)?;
        let ch = self.effective_channels(&real)?;
        self.rates(&ch, self.config.power)
    }

    /// Sum rates of trial `trial_index` at each of `powers`, sharing one
    /// channel realization.
    pub fn run_trial_powers(&self, trial_index: u64, powers: &[f64]) -> Result<Vec<f64>> {
        let mut rng = trial_rng(self.config.seed, trial_index);
        let real = self.draw_realization(&mut rng)?;
        let ch = self.effective_channels(&real)?;
        powers
            .iter()
            .map(|&p| Ok(self.rates(&ch, p)?.iter().sum()))
            .collect()
    }
}

/// Per-UE rates `log2(1 + gamma_k)` of one trial.
pub fn run_trial(config: &ExperimentConfig, trial_index: u64) -> Result<Vec<f64>> {
    TrialContext::new(config)?.run_trial(trial_index)
}

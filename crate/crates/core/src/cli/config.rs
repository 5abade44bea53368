//! Flat JSON run configuration with dB-valued aliases.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::simulation::ExperimentConfig;

/// Experiment parameters plus the value lists of the sweep commands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    /// Linear transmit powers of `sweep-power`.
    pub power_values: Vec<f64>,
    pub density_values: Vec<f64>,
    /// Elements per side of `sweep-elements`.
    pub elements_values: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            power_values: (-10..=30).step_by(5).map(|db| db_to_linear(f64::from(db))).collect(),
            density_values: vec![5e-4, 1e-3, 2e-3, 4e-3],
            elements_values: vec![16, 32, 64, 128],
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Feed exponent from the RF-chain gain `2 (alpha + 1)` in dB.
pub fn alpha_from_rf_gain_db(db: f64) -> f64 {
    db_to_linear(db) / 2.0 - 1.0
}

const KEYS: &[&str] = &[
    "wavelength",
    "density",
    "radius",
    "nx",
    "ny",
    "dx",
    "dy",
    "d0",
    "alpha",
    "rf_gain_db",
    "height",
    "num_ues",
    "power",
    "power_db",
    "noise_power",
    "noise_power_db",
    "phase_error_model",
    "phase_error_power",
    "epsilon_u",
    "epsilon_v",
    "channel_mode",
    "combiner",
    "trials",
    "seed",
    "power_values",
    "power_db_values",
    "density_values",
    "elements_values",
];

fn config_error(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

struct Fields(Map<String, Value>);

impl Fields {
    fn take<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>> {
        match self.0.remove(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v).map(Some).map_err(|e| config_error(key, e.to_string())),
        }
    }

    /// A value given either linearly under `key` or in dB under `db_key`.
    fn linear_or_db(&mut self, key: &str, db_key: &str, convert: fn(f64) -> f64) -> Result<Option<f64>> {
        let lin: Option<f64> = self.take(key)?;
        let db: Option<f64> = self.take(db_key)?;
        match (lin, db) {
            (Some(_), Some(_)) => Err(config_error(db_key, format!("conflicts with `{key}`"))),
            (Some(v), None) => Ok(Some(v)),
            (None, Some(d)) => Ok(Some(convert(d))),
            (None, None) => Ok(None),
        }
    }
}

fn set<T>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}

fn check_sorted_positive(key: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(config_error(key, "must not be empty"));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(config_error(key, format!("{v} must be a positive finite number")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_error(key, "must be strictly increasing"));
    }
    Ok(())
}

impl RunConfig {
    /// Parses a flat JSON object; omitted keys keep their defaults. Errors
    /// name the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| config_error("<root>", e.to_string()))?;
        let Value::Object(map) = value else {
            return Err(config_error("<root>", "expected a JSON object"));
        };
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(config_error(k, "unknown key"));
        }
        let mut f = Fields(map);
        let mut out = Self::default();
        let e = &mut out.experiment;
        set(&mut e.wavelength, f.take("wavelength")?);
        set(&mut e.density, f.take("density")?);
        set(&mut e.radius, f.take("radius")?);
        set(&mut e.nx, f.take("nx")?);
        set(&mut e.ny, f.take("ny")?);
        set(&mut e.dx, f.take("dx")?);
        set(&mut e.dy, f.take("dy")?);
        set(&mut e.d0, f.take("d0")?);
        set(&mut e.alpha, f.linear_or_db("alpha", "rf_gain_db", alpha_from_rf_gain_db)?);
        set(&mut e.height, f.take("height")?);
        set(&mut e.num_ues, f.take("num_ues")?);
        set(&mut e.power, f.linear_or_db("power", "power_db", db_to_linear)?);
        set(&mut e.noise_power, f.linear_or_db("noise_power", "noise_power_db", db_to_linear)?);
        set(&mut e.phase_error_model, f.take("phase_error_model")?);
        set(&mut e.phase_error_power, f.take("phase_error_power")?);
        set(&mut e.epsilon_u, f.take("epsilon_u")?);
        set(&mut e.epsilon_v, f.take("epsilon_v")?);
        set(&mut e.channel_mode, f.take("channel_mode")?);
        set(&mut e.combiner, f.take("combiner")?);
        set(&mut e.trials, f.take("trials")?);
        set(&mut e.seed, f.take("seed")?);
        let lin: Option<Vec<f64>> = f.take("power_values")?;
        let db: Option<Vec<f64>> = f.take("power_db_values")?;
        match (lin, db) {
            (Some(_), Some(_)) => return Err(config_error("power_db_values", "conflicts with `power_values`")),
            (Some(v), None) => out.power_values = v,
            (None, Some(d)) => out.power_values = d.into_iter().map(db_to_linear).collect(),
            (None, None) => {}
        }
        set(&mut out.density_values, f.take("density_values")?);
        set(&mut out.elements_values, f.take("elements_values")?);
        out.validate()?;
        Ok(out)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => config_error(name, reason),
            other => other,
        })?;
        check_sorted_positive("power_values", &self.power_values)?;
        check_sorted_positive("density_values", &self.density_values)?;
        let elements: Vec<f64> = self.elements_values.iter().map(|&n| n as f64).collect();
        check_sorted_positive("elements_values", &elements)
    }

    /// Canonical JSON with linear-valued keys only.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.canonical()?)?)
    }

    /// Canonical key map; keys are sorted, so the rendering is stable.
    pub fn canonical(&self) -> Result<Value> {
        Ok(serde_json::to_value(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelMode;

    #[test]
    fn empty_config_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.experiment.wavelength, 0.01);
        assert_eq!(c.experiment.density, 1e-3);
        assert_eq!((c.experiment.nx, c.experiment.ny), (64, 64));
        assert_eq!(c.power_values.len(), 9);
    }

    #[test]
    fn rf_gain_converts_to_alpha() {
        let c = RunConfig::from_json(r#"{"rf_gain_db": 10}"#).unwrap();
        assert!((c.experiment.alpha - 4.0).abs() < 1e-15);
    }

    #[test]
    fn db_keys_convert() {
        let c = RunConfig::from_json(r#"{"power_db": 20, "noise_power_db": -120, "power_db_values": [0, 10]}"#).unwrap();
        assert!((c.experiment.power - 100.0).abs() < 1e-12);
        assert!((c.experiment.noise_power / 1e-12 - 1.0).abs() < 1e-12);
        assert_eq!(c.power_values, vec![1.0, 10.0]);
    }

    fn key_of(text: &str) -> String {
        match RunConfig::from_json(text).unwrap_err() {
            Error::Config { key, .. } => key,
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(r#"{"epsilon_u": 1.5}"#), "epsilon_u");
        assert_eq!(key_of(r#"{"alpha": 1.0}"#), "alpha");
        assert_eq!(key_of(r#"{"rf_gain_db": 3}"#), "alpha");
        assert_eq!(key_of(r#"{"bogus": 1}"#), "bogus");
        assert_eq!(key_of(r#"{"nx": "many"}"#), "nx");
        assert_eq!(key_of(r#"{"power": 1, "power_db": 0}"#), "power_db");
        assert_eq!(key_of(r#"{"density_values": [2e-3, 1e-3]}"#), "density_values");
        assert_eq!(key_of(r#"{"channel_mode": "far"}"#), "channel_mode");
        assert_eq!(key_of("[1]"), "<root>");
    }

    #[test]
    fn canonical_round_trip() {
        let mut c = RunConfig::default();
        c.experiment.channel_mode = ChannelMode::FarMismatched;
        c.experiment.seed = u64::MAX;
        c.experiment.power = 0.1 + 0.2;
        c.elements_values = vec![8];
        let text = c.to_json().unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
        assert!(!text.contains("_db"));
    }
}

//! Run configuration. Files are TOML with one section per module:
//!
//! ```toml
//! [train]
//! dataset = "iris"
//! epochs = 400
//! seed = 3
//!
//! [network]
//! mode = "device"
//! gain = 10.0
//!
//! [device]
//! model = "silver"
//! vp = 0.17
//!
//! [timing]
//! t_wr = 2e-3
//! ```
//!
//! Every key is optional. Unset keys fall back to the dataset preset, then
//! to the library defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device::{MemristorParams, ModelId};
use crate::error::{Error, Result};
use crate::network::{Activation, Loss, Mode, NetworkConfig, OutputFn};
use crate::waveform::Timing;

/// Settings of one training run that are not part of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub dataset: String,
    pub epochs: usize,
    pub seed: u64,
    /// Held-out fraction; zero trains and tests on the whole set.
    pub test_fraction: f64,
    pub dump_waveforms: bool,
    pub trace_energy: bool,
    /// Run the sneak-path audit on every phase.
    pub audit: bool,
    /// Write per-step values (r, σ, o, y, tanh δ) to `steps.csv`.
    pub trace_steps: bool,
}

/// Fully resolved configuration of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub train: TrainSettings,
    pub network: NetworkConfig,
    /// Device parameters after overrides.
    pub device: MemristorParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub dataset: Option<String>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub test_fraction: Option<f64>,
    pub dump_waveforms: Option<bool>,
    pub trace_energy: Option<bool>,
    pub audit: Option<bool>,
    pub trace_steps: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub layers: Option<Vec<usize>>,
    pub activation: Option<Activation>,
    pub output: Option<OutputFn>,
    pub loss: Option<Loss>,
    pub mode: Option<Mode>,
    pub a: Option<f64>,
    pub r0: Option<f64>,
    pub gain: Option<f64>,
    pub hidden_scale: Option<f64>,
    pub bias_input: Option<f64>,
    pub learning_rate: Option<f64>,
    pub tanh_delta: Option<bool>,
    pub error_scale: Option<f64>,
    pub calibration_input: Option<f64>,
    /// Initial conductance range in siemens.
    pub init_range: Option<(f64, f64)>,
    pub kappa: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviceFile {
    pub model: Option<ModelId>,
    /// Parameter overrides by name (`a1`, `vp`, ...).
    #[serde(flatten)]
    pub overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingFile {
    pub t_rd: Option<f64>,
    pub t_wr: Option<f64>,
    pub dt: Option<f64>,
}

/// A configuration file as written, before presets are applied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    #[serde(default)]
    pub train: TrainFile,
    #[serde(default)]
    pub network: NetworkFile,
    #[serde(default)]
    pub device: DeviceFile,
    #[serde(default)]
    pub timing: TimingFile,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}

/// Hyperparameters of a dataset and device model. Chosen on seeds disjoint
/// from the ones the acceptance suite reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub layers: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub gain: f64,
    pub learning_rate: f64,
    pub r0: f64,
    pub test_fraction: f64,
    pub trace_steps: bool,
}

/// Preset for a builtin dataset. Other datasets get a single hidden layer as
/// wide as the input, or a single layer for two classes.
pub fn preset(dataset: &str, n_features: usize, classes: usize, model: ModelId) -> Preset {
    use ModelId::*;
    let base = Preset {
        layers: if classes == 2 {
            vec![n_features, 1]
        } else {
            vec![n_features, n_features, classes]
        },
        activation: Activation::Tanh,
        epochs: 100,
        gain: 10.0,
        learning_rate: 1.0,
        r0: match model {
            Silver => 1000.0,
            Titania => 15000.0,
        },
        test_fraction: 0.3,
        trace_steps: false,
    };
    match (dataset, model) {
        ("xor", _) => Preset {
            layers: vec![2, 2, 2],
            activation: Activation::Sigmoid,
            epochs: 2000,
            gain: 20.0,
            learning_rate: 4.0,
            test_fraction: 0.0,
            trace_steps: true,
            ..base
        },
        ("iris", Silver) => Preset {
            layers: vec![4, 4, 3],
            epochs: 400,
            gain: 10.0,
            learning_rate: 2.0,
            ..base
        },
        ("iris", Titania) => Preset {
            layers: vec![4, 4, 3],
            activation: Activation::Sigmoid,
            epochs: 500,
            gain: 1.0,
            learning_rate: 0.9,
            ..base
        },
        ("breast_cancer", Silver) => Preset {
            layers: vec![30, 1],
            epochs: 20,
            gain: 300.0,
            learning_rate: 1.0,
            r0: 100.0,
            ..base
        },
        ("breast_cancer", Titania) => Preset {
            layers: vec![30, 1],
            epochs: 60,
            gain: 3.0,
            learning_rate: 0.9,
            ..base
        },
        ("mnist", _) => Preset {
            layers: vec![784, 397, 204, 10],
            epochs: 7,
            gain: 0.3,
            learning_rate: 0.3,
            ..base
        },
        _ => base,
    }
}

/// Builds the resolved configuration for `dataset` (as loaded) from the
/// preset and the file's overrides.
pub fn resolve(file: &ConfigFile, dataset: &str, n_features: usize, classes: usize) -> Result<RunConfig> {
    let model = file.device.model.unwrap_or(ModelId::Silver);
    let p = preset(dataset, n_features, classes, model);
    let n = &file.network;
    let mode = n.mode.unwrap_or(if dataset == "mnist" {
        Mode::Behavioral
    } else {
        Mode::Device
    });
    let layers = n.layers.clone().unwrap_or(p.layers);
    if layers.first() != Some(&n_features) {
        return Err(Error::Config(format!(
            "first layer {:?} does not match {n_features} dataset features",
            layers.first()
        )));
    }
    let mut net = NetworkConfig::new(layers, model, mode);
    net.activation = n.activation.unwrap_or(p.activation);
    net.output = n.output;
    net.loss = n.loss.unwrap_or(net.loss);
    net.a = n.a.unwrap_or(net.a);
    net.r0 = n.r0.unwrap_or(p.r0);
    net.gain = n.gain.unwrap_or(p.gain);
    net.hidden_scale = n.hidden_scale.unwrap_or(net.hidden_scale);
    net.bias_input = n.bias_input.unwrap_or(net.bias_input);
    net.learning_rate = n.learning_rate.unwrap_or(p.learning_rate);
    net.tanh_delta = n.tanh_delta.unwrap_or(net.tanh_delta);
    net.error_scale = n.error_scale.unwrap_or(net.error_scale);
    net.calibration_input = n.calibration_input.unwrap_or(net.calibration_input);
    net.init_range = n.init_range;
    net.kappa = n.kappa;
    let t = &file.timing;
    net.timing = Timing {
        t_rd: t.t_rd.unwrap_or(net.timing.t_rd),
        t_wr: t.t_wr.unwrap_or(net.timing.t_wr),
        dt: t.dt.unwrap_or(net.timing.dt),
    };

    let tr = &file.train;
    let train = TrainSettings {
        dataset: dataset.to_string(),
        epochs: tr.epochs.unwrap_or(p.epochs),
        seed: tr.seed.unwrap_or(1),
        test_fraction: tr.test_fraction.unwrap_or(p.test_fraction),
        dump_waveforms: tr.dump_waveforms.unwrap_or(false),
        trace_energy: tr.trace_energy.unwrap_or(false),
        audit: tr.audit.unwrap_or(false),
        trace_steps: tr.trace_steps.unwrap_or(p.trace_steps),
    };
    net.seed = train.seed;

    let mut device = model.params();
    for (k, &v) in &file.device.overrides {
        device.set(k, v).map_err(|e| Error::Config(format!("[device] {k}: {e}")))?;
    }
    let cfg = RunConfig {
        train,
        network: net,
        device,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.train.test_fraction) {
            return Err(Error::Config(format!(
                "test_fraction {} outside [0, 1)",
                self.train.test_fraction
            )));
        }
        self.device.validate()?;
        self.network.validate()
    }

    /// TOML rendering of every resolved value.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_resolves_to_preset() {
        let f = ConfigFile::parse("").unwrap();
        let c = resolve(&f, "iris", 4, 3).unwrap();
        assert_eq!(c.network.layer_sizes, vec![4, 4, 3]);
        assert_eq!(c.train.epochs, 400);
        assert_eq!(c.network.mode, Mode::Device);
        assert_eq!(c.device, MemristorParams::silver());
    }

    #[test]
    fn sections_override() {
        let f = ConfigFile::parse(
            "[train]\nepochs = 3\nseed = 9\n[network]\nmode = \"behavioral\"\ngain = 2.5\n\
             [device]\nmodel = \"titania\"\nvp = 0.6\n[timing]\nt_wr = 2e-3\n",
        )
        .unwrap();
        let c = resolve(&f, "iris", 4, 3).unwrap();
        assert_eq!((c.train.epochs, c.train.seed, c.network.seed), (3, 9, 9));
        assert_eq!(c.network.mode, Mode::Behavioral);
        assert_eq!(c.network.model, ModelId::Titania);
        assert_eq!(c.network.gain, 2.5);
        assert_eq!(c.network.r0, 15000.0);
        assert_eq!(c.device.vp, 0.6);
        assert_eq!(c.network.timing.t_wr, 2e-3);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(ConfigFile::parse("[train]\nepoch = 3\n"), Err(Error::Config(_))));
        let f = ConfigFile::parse("[device]\nbogus = 1.0\n").unwrap();
        assert!(matches!(resolve(&f, "iris", 4, 3), Err(Error::Config(_))));
        let f = ConfigFile::parse("[network]\nlayers = [5, 3]\n").unwrap();
        assert!(resolve(&f, "iris", 4, 3).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = resolve(&ConfigFile::default(), "xor", 2, 2).unwrap();
        let text = c.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}

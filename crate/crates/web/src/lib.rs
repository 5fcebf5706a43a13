//! Browser bindings for the memnet simulator: the calibration response of a
//! device, the write-phase drive of one synapse and a live XOR trainer.

use memnet::device::{calibration_trace, characterize, ModelId};
use memnet::harness::config::{resolve, ConfigFile, RunConfig};
use memnet::harness::{load_dataset, Dataset};
use memnet::network::{predict, DeviceProfile, Network};
use memnet::waveform::{encode_update, switch_schedule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn model(name: &str) -> Result<ModelId, JsError> {
    match name {
        "silver" => Ok(ModelId::Silver),
        "titania" => Ok(ModelId::Titania),
        _ => Err(JsError::new(&format!("unknown model {name:?}"))),
    }
}

fn js(e: memnet::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Conductance response to the calibration pulse train, plus the fitted
/// ranges in siemens.
#[wasm_bindgen]
pub struct Calibration {
    time: Vec<f64>,
    voltage: Vec<f64>,
    conductance: Vec<f64>,
    ranges: Vec<f64>,
}

#[wasm_bindgen]
impl Calibration {
    #[wasm_bindgen(constructor)]
    pub fn new(model_name: &str) -> Result<Calibration, JsError> {
        let m = model(model_name)?;
        let trace = calibration_trace(&m.params(), &m.calibration_pulse()).map_err(js)?;
        let ch = characterize(&m.params(), &m.calibration_pulse()).map_err(js)?;
        Ok(Calibration {
            time: trace.time,
            voltage: trace.voltage,
            conductance: trace.conductance,
            ranges: vec![ch.g_abs_min, ch.g_abs_max, ch.g_lin_min, ch.g_lin_max],
        })
    }

    pub fn time(&self) -> Vec<f64> {
        self.time.clone()
    }

    pub fn voltage(&self) -> Vec<f64> {
        self.voltage.clone()
    }

    pub fn conductance(&self) -> Vec<f64> {
        self.conductance.clone()
    }

    /// `[g_abs_min, g_abs_max, g_lin_min, g_lin_max]`
    pub fn ranges(&self) -> Vec<f64> {
        self.ranges.clone()
    }
}

/// Write phase for one synapse with input `x` and error `y`, sampled at
/// `n` points: `[t, row voltage, switch]` triples, flattened.
#[wasm_bindgen]
pub fn write_phase(model_name: &str, x: f64, y: f64, n: usize) -> Result<Vec<f64>, JsError> {
    let m = model(model_name)?;
    let data = load_dataset("xor").map_err(js)?;
    let mut file = ConfigFile::default();
    file.device.model = Some(m);
    let cfg = resolve(&file, &data.name, 2, 2).map_err(js)?;
    let net = Network::new(cfg.network.clone()).map_err(js)?;
    let ch = net.profile().characterization;
    let t = cfg.network.timing;
    let row = encode_update(x, net.encoding(), &t, &ch).map_err(js)?;
    let col = switch_schedule(y, net.encoding(), &t, &ch).map_err(js)?;
    let (t0, t1) = (row.start(), row.end());
    let n = n.max(2);
    let mut out = Vec::with_capacity(3 * n);
    for k in 0..n {
        // stay inside the half-open span
        let s = t0 + (t1 - t0) * k as f64 / n as f64;
        out.push(s);
        out.push(row.sample(s).map_err(js)?);
        out.push(if col.sample(s).map_err(js)? { 1.0 } else { 0.0 });
    }
    Ok(out)
}

/// Device-mode XOR network trained a few epochs at a time.
#[wasm_bindgen]
pub struct XorTrainer {
    net: Network,
    data: Dataset,
    rng: ChaCha8Rng,
    epochs: usize,
    last_loss: f64,
}

#[wasm_bindgen]
impl XorTrainer {
    #[wasm_bindgen(constructor)]
    pub fn new(model_name: &str, seed: u64) -> Result<XorTrainer, JsError> {
        let data = load_dataset("xor").map_err(js)?;
        let mut file = ConfigFile::default();
        file.device.model = Some(model(model_name)?);
        file.train.seed = Some(seed);
        let cfg: RunConfig = resolve(&file, &data.name, 2, 2).map_err(js)?;
        let profile = DeviceProfile::with_params(cfg.network.model, cfg.device).map_err(js)?;
        let net = Network::with_profile(cfg.network, profile).map_err(js)?;
        Ok(XorTrainer {
            net,
            data,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x0bde_5eed),
            epochs: 0,
            last_loss: f64::NAN,
        })
    }

    /// Runs `n` epochs and returns the mean loss of the last one.
    pub fn train(&mut self, n: usize) -> Result<f64, JsError> {
        let curve = self
            .net
            .train(&self.data.features, &self.data.labels, n, &mut self.rng)
            .map_err(js)?;
        self.epochs += n;
        self.last_loss = curve.last().copied().unwrap_or(self.last_loss);
        Ok(self.last_loss)
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    /// Probability of class 1 for each of the four corners.
    pub fn outputs(&mut self) -> Result<Vec<f64>, JsError> {
        let mut out = Vec::new();
        for x in &self.data.features {
            let (o, _) = self.net.infer(x).map_err(js)?;
            out.push(o[1]);
        }
        Ok(out)
    }

    /// Number of corners classified correctly.
    pub fn correct(&mut self) -> Result<usize, JsError> {
        let mut n = 0;
        for (x, &l) in self.data.features.iter().zip(&self.data.labels) {
            n += usize::from(predict(&self.net.infer(x).map_err(js)?.0) == l);
        }
        Ok(n)
    }

    /// Conductances of layer `k` in siemens, row-major.
    pub fn conductances(&self, k: usize) -> Vec<f64> {
        self.net.layers().get(k).map(|cb| cb.conductances()).unwrap_or_default()
    }
}

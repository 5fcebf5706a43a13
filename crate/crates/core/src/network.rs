//! Cascaded crossbars trained in place.
//!
//! Layer `k` sees the input `u = [b0; s·σ]` (the bias value first, then the
//! scaled activations of the previous layer, or the features for layer 0) and
//! produces `r = β·W·u`, where `W` is the crossbar weight matrix and `β` the
//! read-out gain. The weight update `ΔW_eff = η·y·uᵀ` is realized on the
//! crossbar as `ΔG = −(η/β)/(a·R0)·u·y`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crossbar::{
    calibrate_kappa, sneak_path_audit, AuditReport, Crossbar, CrossbarSpec, PhaseTrace,
};
use crate::device::{characterize, Datasheet, DeviceCharacterization, MemristorParams, ModelId};
use crate::error::{Error, Result};
use crate::waveform::{EncodingConstants, Timing};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, r: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-r).exp()),
            Activation::Tanh => r.tanh(),
            Activation::Linear => r,
        }
    }

    /// Derivative expressed through the activation value.
    #[inline]
    pub fn derivative(self, s: f64) -> f64 {
        match self {
            Activation::Sigmoid => s * (1.0 - s),
            Activation::Tanh => 1.0 - s * s,
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFn {
    Softmax,
    /// Single-unit sigmoid, for two-class problems.
    Sigmoid,
}

impl OutputFn {
    pub fn apply(self, r: &[f64]) -> Vec<f64> {
        match self {
            OutputFn::Softmax => softmax(r),
            OutputFn::Sigmoid => r.iter().map(|&v| Activation::Sigmoid.apply(v)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    CrossEntropy,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Device,
    Behavioral,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "device" => Ok(Mode::Device),
            "behavioral" | "behavioural" => Ok(Mode::Behavioral),
            _ => Err(Error::Unknown {
                kind: "mode",
                name: s.to_string(),
            }),
        }
    }
}

pub fn softmax(r: &[f64]) -> Vec<f64> {
    let m = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = r.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub const LOSS_FLOOR: f64 = 1e-12;

/// Cross-entropy `−log o_l`, clamped at `o_l ≥ 1e−12`.
pub fn cross_entropy(o: &[f64], label: usize) -> Result<f64> {
    if label >= o.len() {
        return Err(Error::Dimension {
            expected: o.len(),
            got: label + 1,
        });
    }
    let sum: f64 = o.iter().sum();
    if o.iter().any(|&v| !(0.0..=1.0).contains(&v)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("output is not a probability vector".into()));
    }
    Ok(-o[label].max(LOSS_FLOOR).ln())
}

/// Loss of one sample. A single sigmoid output is scored as binary
/// cross-entropy with class 1 as the positive class.
pub fn sample_loss(o: &[f64], label: usize, output: OutputFn, loss: Loss) -> Result<f64> {
    let d = target(o.len(), label, output)?;
    Ok(match (loss, output) {
        (Loss::CrossEntropy, OutputFn::Softmax) => cross_entropy(o, label)?,
        (Loss::CrossEntropy, OutputFn::Sigmoid) => o
            .iter()
            .zip(&d)
            .map(|(&p, &t)| -(t * p.max(LOSS_FLOOR).ln() + (1.0 - t) * (1.0 - p).max(LOSS_FLOOR).ln()))
            .sum(),
        (Loss::Mse, _) => 0.5 * o.iter().zip(&d).map(|(p, t)| (t - p) * (t - p)).sum::<f64>(),
    })
}

/// Target vector for `label`.
pub fn target(m: usize, label: usize, output: OutputFn) -> Result<Vec<f64>> {
    match output {
        OutputFn::Sigmoid if m == 1 => {
            if label > 1 {
                return Err(Error::Dimension { expected: 2, got: label + 1 });
            }
            Ok(vec![label as f64])
        }
        _ => {
            if label >= m {
                return Err(Error::Dimension { expected: m, got: label + 1 });
            }
            let mut d = vec![0.0; m];
            d[label] = 1.0;
            Ok(d)
        }
    }
}

/// Output error `y = −∂L/∂r`.
pub fn output_error(o: &[f64], d: &[f64], output: OutputFn, loss: Loss) -> Vec<f64> {
    let diff: Vec<f64> = d.iter().zip(o).map(|(t, p)| t - p).collect();
    match (loss, output) {
        (Loss::CrossEntropy, _) => diff,
        (Loss::Mse, OutputFn::Sigmoid) => diff.iter().zip(o).map(|(e, p)| e * p * (1.0 - p)).collect(),
        (Loss::Mse, OutputFn::Softmax) => {
            let s: f64 = diff.iter().zip(o).map(|(e, p)| e * p).sum();
            diff.iter().zip(o).map(|(e, p)| p * (e - s)).collect()
        }
    }
}

/// Predicted class.
pub fn predict(o: &[f64]) -> usize {
    if o.len() == 1 {
        return usize::from(o[0] >= 0.5);
    }
    o.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// A device model together with its measured and published figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub model: ModelId,
    pub params: MemristorParams,
    pub characterization: DeviceCharacterization,
    pub datasheet: Datasheet,
}

impl DeviceProfile {
    pub fn new(model: ModelId) -> Result<Self> {
        Self::with_params(model, model.params())
    }

    pub fn with_params(model: ModelId, params: MemristorParams) -> Result<Self> {
        let characterization = characterize(&params, &model.calibration_pulse())?;
        Ok(DeviceProfile {
            model,
            params,
            characterization,
            datasheet: model.datasheet(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    /// Defaults to softmax, or a sigmoid when there is a single output.
    pub output: Option<OutputFn>,
    pub loss: Loss,
    pub mode: Mode,
    pub model: ModelId,
    pub timing: Timing,
    /// Input voltage scale (V per unit).
    pub a: f64,
    /// Feedback resistance (Ω).
    pub r0: f64,
    /// Read-out gain `β`.
    pub gain: f64,
    /// Scale `s` applied to hidden activations before they drive the next layer.
    pub hidden_scale: f64,
    pub bias_input: f64,
    /// Weight-space learning rate `η`.
    pub learning_rate: f64,
    /// Rescale backpropagated deltas with tanh.
    pub tanh_delta: bool,
    /// Errors are multiplied by this before being applied as read voltages.
    pub error_scale: f64,
    /// Input magnitude at which the device write is matched to the
    /// behavioral update.
    pub calibration_input: f64,
    /// Initial conductance range; the datasheet range when absent.
    pub init_range: Option<(f64, f64)>,
    /// Explicit `(kappa_inc, kappa_dec)`; calibrated when absent.
    pub kappa: Option<(f64, f64)>,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(layer_sizes: Vec<usize>, model: ModelId, mode: Mode) -> Self {
        NetworkConfig {
            layer_sizes,
            activation: Activation::Sigmoid,
            output: None,
            loss: Loss::CrossEntropy,
            mode,
            model,
            timing: Timing::default(),
            a: 0.6,
            r0: 1000.0,
            gain: 10.0,
            hidden_scale: 0.2,
            bias_input: 0.2,
            learning_rate: 1.0,
            tanh_delta: true,
            error_scale: 0.2,
            calibration_input: 0.1,
            init_range: None,
            kappa: None,
            seed: 1,
        }
    }

    pub fn output_fn(&self) -> OutputFn {
        self.output.unwrap_or(if self.layer_sizes.last() == Some(&1) {
            OutputFn::Sigmoid
        } else {
            OutputFn::Softmax
        })
    }

    pub fn eta_eff(&self) -> f64 {
        self.learning_rate / self.gain
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "need at least two non-empty layers, got {:?}",
                self.layer_sizes
            )));
        }
        for (name, v) in [
            ("a", self.a),
            ("r0", self.r0),
            ("gain", self.gain),
            ("hidden_scale", self.hidden_scale),
            ("learning_rate", self.learning_rate),
            ("error_scale", self.error_scale),
            ("calibration_input", self.calibration_input),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.bias_input.is_finite() {
            return Err(Error::NonFinite("bias_input"));
        }
        if self.output_fn() == OutputFn::Sigmoid && *self.layer_sizes.last().unwrap() != 1 {
            return Err(Error::InvalidParameter("sigmoid output needs a single output unit".into()));
        }
        self.timing.validate()
    }
}

/// Values recorded by one forward pass.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ForwardTrace {
    /// Crossbar input of each layer, bias first.
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activations `r` of each layer.
    pub pre: Vec<Vec<f64>>,
    /// Hidden activations `σ`.
    pub hidden: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Values recorded by one training step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepTrace {
    pub forward: ForwardTrace,
    /// Error `y` of each layer.
    pub errors: Vec<Vec<f64>>,
    /// Rescaled deltas `tanh(δ)` of layers `1..` (empty for layer 0).
    pub deltas: Vec<Vec<f64>>,
    pub loss: f64,
}

/// Sneak-path audit results accumulated over many phases.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditSummary {
    pub phases: usize,
    pub failed: usize,
    pub max_abs_voltage: f64,
}

impl AuditSummary {
    pub fn record(&mut self, r: &AuditReport) {
        self.phases += 1;
        if !r.pass {
            self.failed += 1;
        }
        self.max_abs_voltage = self.max_abs_voltage.max(r.max_abs_voltage);
    }

    pub fn pass(&self) -> bool {
        self.failed == 0
    }
}

/// Running per-synapse energy tally.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyTally {
    pub joules: f64,
    pub cells: usize,
    pub steps: usize,
}

impl EnergyTally {
    /// Average energy per synapse per training step (J).
    pub fn per_synapse_step(&self) -> f64 {
        if self.cells == 0 || self.steps == 0 {
            0.0
        } else {
            self.joules / (self.cells as f64 * self.steps as f64)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    config: NetworkConfig,
    profile: DeviceProfile,
    layers: Vec<Crossbar>,
    encoding: EncodingConstants,
    /// Audit every phase when set.
    pub audit: Option<AuditSummary>,
    /// Record energy when set.
    pub energy: Option<EnergyTally>,
}

impl Network {
    pub fn new(config: NetworkConfig) -> Result<Self> {
        let profile = DeviceProfile::new(config.model)?;
        Self::with_profile(config, profile)
    }

    pub fn with_profile(config: NetworkConfig, profile: DeviceProfile) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (lo, hi) = config.init_range.unwrap_or(profile.datasheet.init);
        let mut layers = Vec::with_capacity(config.layer_sizes.len() - 1);
        for w in config.layer_sizes.windows(2) {
            let spec = CrossbarSpec {
                rows: w[0] + 1,
                cols: w[1],
                g_ref: profile.datasheet.g_ref(),
                r0: config.r0,
                a: config.a,
                g_clip: profile.datasheet.g_lin,
            };
            let mut cb = Crossbar::new(spec, profile.params, profile.characterization)?;
            cb.initialize_uniform(lo, hi, &mut rng)?;
            layers.push(cb);
        }
        let encoding = match (config.kappa, config.mode) {
            (Some((kappa_inc, kappa_dec)), _) => EncodingConstants {
                a: config.a,
                kappa_inc,
                kappa_dec,
            },
            (None, Mode::Device) => calibrate_kappa(
                &profile.params,
                &profile.characterization,
                layers[0].spec(),
                config.eta_eff(),
                config.calibration_input,
                &config.timing,
            )?,
            (None, Mode::Behavioral) => EncodingConstants {
                a: config.a,
                kappa_inc: 0.0,
                kappa_dec: 0.0,
            },
        };
        encoding.validate(&config.timing, &profile.characterization)?;
        Ok(Network {
            config,
            profile,
            layers,
            encoding,
            audit: None,
            energy: None,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn profile(&self) -> &DeviceProfile {
        &self.profile
    }

    pub fn encoding(&self) -> &EncodingConstants {
        &self.encoding
    }

    pub fn layers(&self) -> &[Crossbar] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Crossbar] {
        &mut self.layers
    }

    /// Effective weight matrices `β·W`, one `cols × rows` matrix per layer.
    pub fn effective_weights(&self) -> Vec<Vec<Vec<f64>>> {
        let g = self.config.gain;
        self.layers
            .iter()
            .map(|cb| {
                cb.weights()
                    .into_iter()
                    .map(|row| row.into_iter().map(|w| g * w).collect())
                    .collect()
            })
            .collect()
    }

    /// Bounds of the effective weights implied by the conductance clip range.
    pub fn weight_bounds(&self) -> (f64, f64) {
        let s = self.layers[0].spec();
        let k = self.config.gain * s.a * s.r0;
        (k * (s.g_ref - s.g_clip.1), k * (s.g_ref - s.g_clip.0))
    }

    fn tracing(&self) -> bool {
        self.audit.is_some() || self.energy.is_some()
    }

    fn absorb(&mut self, trace: &PhaseTrace) {
        if let Some(a) = self.audit.as_mut() {
            a.record(&sneak_path_audit(trace));
        }
        if let Some(e) = self.energy.as_mut() {
            e.joules += trace.cells.iter().map(|c| c.energy).sum::<f64>();
        }
    }

    fn read(&mut self, k: usize, u: &[f64]) -> Result<Vec<f64>> {
        let r = match self.config.mode {
            Mode::Behavioral => self.layers[k].forward_ideal(u)?,
            Mode::Device => {
                let t = self.config.timing;
                if self.tracing() {
                    let mut tr = empty_trace();
                    let r = self.layers[k].forward_read(u, &t, Some(&mut tr))?;
                    self.absorb(&tr);
                    r
                } else {
                    self.layers[k].forward_read(u, &t, None)?
                }
            }
        };
        Ok(r.into_iter().map(|v| v * self.config.gain).collect())
    }

    /// `Wᵀ·y` for layer `k`, bias row included.
    fn read_back(&mut self, k: usize, y: &[f64]) -> Result<Vec<f64>> {
        match self.config.mode {
            Mode::Behavioral => self.layers[k].backward_ideal(y),
            Mode::Device => {
                let e = self.config.error_scale;
                let ys: Vec<f64> = y.iter().map(|v| v * e).collect();
                let t = self.config.timing;
                let d = if self.tracing() {
                    let mut tr = empty_trace();
                    let d = self.layers[k].backward_read(&ys, &t, Some(&mut tr))?;
                    self.absorb(&tr);
                    d
                } else {
                    self.layers[k].backward_read(&ys, &t, None)?
                };
                Ok(d.into_iter().map(|v| v / e).collect())
            }
        }
    }

    fn write(&mut self, k: usize, u: &[f64], y: &[f64]) -> Result<()> {
        match self.config.mode {
            Mode::Behavioral => self.layers[k].write_phase_behavioral(u, y, self.config.eta_eff()),
            Mode::Device => {
                let y: Vec<f64> = y.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
                let (t, enc) = (self.config.timing, self.encoding);
                if self.tracing() {
                    let mut tr = empty_trace();
                    self.layers[k].write_phase(u, &y, &t, &enc, Some(&mut tr))?;
                    self.absorb(&tr);
                } else {
                    self.layers[k].write_phase(u, &y, &t, &enc, None)?;
                }
                Ok(())
            }
        }
    }

    /// Forward pass.
    pub fn infer(&mut self, x: &[f64]) -> Result<(Vec<f64>, ForwardTrace)> {
        let n0 = self.config.layer_sizes[0];
        if x.len() != n0 {
            return Err(Error::Dimension {
                expected: n0,
                got: x.len(),
            });
        }
        let mut trace = ForwardTrace::default();
        let mut u: Vec<f64> = std::iter::once(self.config.bias_input).chain(x.iter().copied()).collect();
        let last = self.layers.len() - 1;
        for k in 0..=last {
            let r = self.read(k, &u)?;
            trace.inputs.push(u);
            if k < last {
                let s: Vec<f64> = r.iter().map(|&v| self.config.activation.apply(v)).collect();
                u = std::iter::once(self.config.bias_input)
                    .chain(s.iter().map(|v| v * self.config.hidden_scale))
                    .collect();
                trace.hidden.push(s);
                trace.pre.push(r);
            } else {
                trace.output = self.config.output_fn().apply(&r);
                trace.pre.push(r);
                u = Vec::new();
            }
        }
        Ok((trace.output.clone(), trace))
    }

    /// One online update on sample `(x, label)`.
    pub fn train_step(&mut self, x: &[f64], label: usize) -> Result<StepTrace> {
        let (o, fwd) = self.infer(x)?;
        let out = self.config.output_fn();
        let d = target(o.len(), label, out)?;
        let loss = sample_loss(&o, label, out, self.config.loss)?;
        let n_layers = self.layers.len();
        let mut errors = vec![Vec::new(); n_layers];
        let mut deltas = vec![Vec::new(); n_layers];
        let mut y = output_error(&o, &d, out, self.config.loss);
        for k in (0..n_layers).rev() {
            let back = if k > 0 { Some(self.read_back(k, &y)?) } else { None };
            self.write(k, &fwd.inputs[k], &y)?;
            errors[k] = y.clone();
            if let Some(back) = back {
                let scale = self.config.gain * self.config.hidden_scale;
                let act = self.config.activation;
                let td: Vec<f64> = back[1..]
                    .iter()
                    .map(|&v| {
                        let delta = scale * v;
                        if self.config.tanh_delta {
                            delta.tanh()
                        } else {
                            delta
                        }
                    })
                    .collect();
                y = td
                    .iter()
                    .zip(&fwd.hidden[k - 1])
                    .map(|(t, &s)| t * act.derivative(s))
                    .collect();
                deltas[k] = td;
            }
        }
        if let Some(e) = self.energy.as_mut() {
            e.steps += 1;
            e.cells = self.layers.iter().map(|cb| cb.rows() * cb.cols()).sum();
        }
        Ok(StepTrace {
            forward: fwd,
            errors,
            deltas,
            loss,
        })
    }

    /// Online training for `epochs` passes over `(xs, labels)` in a
    /// seed-shuffled order. Returns the mean loss of every epoch; `on_step`
    /// sees each step's trace.
    pub fn train_with<F>(
        &mut self,
        xs: &[Vec<f64>],
        labels: &[usize],
        epochs: usize,
        rng: &mut ChaCha8Rng,
        mut on_step: F,
    ) -> Result<Vec<f64>>
    where
        F: FnMut(usize, usize, &StepTrace),
    {
        if epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if xs.is_empty() || xs.len() != labels.len() {
            return Err(Error::Dimension {
                expected: xs.len(),
                got: labels.len(),
            });
        }
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut curve = Vec::with_capacity(epochs);
        for epoch in 0..epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            for &i in &order {
                let st = self.train_step(&xs[i], labels[i])?;
                total += st.loss;
                on_step(epoch, i, &st);
            }
            curve.push(total / xs.len() as f64);
        }
        Ok(curve)
    }

    pub fn train(&mut self, xs: &[Vec<f64>], labels: &[usize], epochs: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        self.train_with(xs, labels, epochs, rng, |_, _, _| {})
    }

    pub fn predict(&mut self, x: &[f64]) -> Result<usize> {
        Ok(predict(&self.infer(x)?.0))
    }
}

fn empty_trace() -> PhaseTrace {
    PhaseTrace {
        kind: crate::crossbar::PhaseKind::Forward,
        rows: 0,
        cols: 0,
        physical: true,
        cells: Vec::new(),
        windows: Vec::new(),
        max_node_voltage: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one() {
        let o = softmax(&[1000.0, -3.0, 2.5]);
        assert!((o.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let u = softmax(&[0.0; 3]);
        assert!(u.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn loss_cases() {
        assert_eq!(cross_entropy(&[0.0, 1.0], 1).unwrap(), 0.0);
        let u = [1.0 / 3.0; 3];
        assert!((cross_entropy(&u, 0).unwrap() - 3f64.ln()).abs() < 1e-12);
        assert!((cross_entropy(&[0.0, 1.0], 0).unwrap() + 1e-12f64.ln()).abs() < 1e-9);
        assert!(cross_entropy(&[0.7, 0.7], 0).is_err());
    }

    #[test]
    fn prediction() {
        assert_eq!(predict(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(predict(&[0.4]), 0);
        assert_eq!(predict(&[0.6]), 1);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for act in [Activation::Sigmoid, Activation::Tanh, Activation::Linear] {
            for r in [-1.3, 0.0, 0.4] {
                let h = 1e-6;
                let fd = (act.apply(r + h) - act.apply(r - h)) / (2.0 * h);
                assert!((fd - act.derivative(act.apply(r))).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mse_error_is_negative_gradient() {
        let r = [0.3, -0.2, 0.5];
        let d = [0.0, 1.0, 0.0];
        let o = softmax(&r);
        let y = output_error(&o, &d, OutputFn::Softmax, Loss::Mse);
        for j in 0..3 {
            let h = 1e-6;
            let mut rp = r;
            rp[j] += h;
            let mut rm = r;
            rm[j] -= h;
            let lp = sample_loss(&softmax(&rp), 1, OutputFn::Softmax, Loss::Mse).unwrap();
            let lm = sample_loss(&softmax(&rm), 1, OutputFn::Softmax, Loss::Mse).unwrap();
            assert!((-(lp - lm) / (2.0 * h) - y[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_weight_net_is_uniform() {
        let mut cfg = NetworkConfig::new(vec![2, 3, 4], ModelId::Silver, Mode::Behavioral);
        let g = ModelId::Silver.datasheet().g_ref();
        cfg.init_range = Some((g, g));
        let mut net = Network::new(cfg).unwrap();
        let (o, _) = net.infer(&[0.1, -0.2]).unwrap();
        for v in o {
            assert!((v - 0.25).abs() < 1e-12);
        }
        assert!(net.infer(&[0.1]).is_err());
    }

    #[test]
    fn exact_output_gives_no_update() {
        let mut cfg = NetworkConfig::new(vec![2, 1], ModelId::Silver, Mode::Device);
        cfg.output = Some(OutputFn::Softmax);
        let mut net = Network::new(cfg).unwrap();
        let before = net.layers()[0].clone();
        // a single softmax unit always outputs 1
        net.train_step(&[0.2, -0.1], 0).unwrap();
        assert_eq!(net.layers()[0], before);
    }

    #[test]
    fn epochs_must_be_positive() {
        let cfg = NetworkConfig::new(vec![2, 2], ModelId::Silver, Mode::Behavioral);
        let mut net = Network::new(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(net.train(&[vec![0.0, 0.0]], &[0], 0, &mut rng).is_err());
    }
}

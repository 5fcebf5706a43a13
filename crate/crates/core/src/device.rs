//! Voltage-threshold memristor model.
//!
//! Current:  `I = a1·x·sinh(b·v)` for `v ≥ 0`, `I = a2·x·sinh(b·v)` for `v < 0`.
//!
//! State:    `dx/dt = eta·g(v)·f(x)` where the drive `g` is zero inside the
//! closed threshold window `[-Vn, Vp]` and exponential outside it, and the
//! window `f` damps motion beyond `xp` (increasing) or below `1 - xn`
//! (decreasing). Integration is forward Euler with adaptive sub-stepping.
//!
//! Voltages passed to [`step_state`] and [`device_current`] are in the
//! device's own orientation. A crossbar mounts every cell so that a positive
//! cell voltage increases conductance; [`MemristorParams::orient`] maps a cell
//! voltage to the device voltage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on the state change of a single Euler sub-step.
pub const MAX_STATE_STEP: f64 = 0.05;

/// Sub-step target used by the integrator. Tighter than [`MAX_STATE_STEP`] so
/// that the result is insensitive to how the caller partitions time.
pub const SUBSTEP_TARGET: f64 = 0.002;

/// Fitting parameters of the generalized threshold model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemristorParams {
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    pub ap: f64,
    pub an: f64,
    pub xp: f64,
    pub xn: f64,
    pub vp: f64,
    pub vn: f64,
    pub alpha_p: f64,
    pub alpha_n: f64,
    pub eta: f64,
}

impl MemristorParams {
    pub const fn silver() -> Self {
        MemristorParams {
            a1: 0.17,
            a2: 0.17,
            b: 0.05,
            ap: 4000.0,
            an: 4000.0,
            xp: 0.3,
            xn: 0.5,
            vp: 0.16,
            vn: 0.15,
            alpha_p: 1.0,
            alpha_n: 5.0,
            eta: 1.0,
        }
    }

    pub const fn titania() -> Self {
        MemristorParams {
            a1: 1.4,
            a2: 1.4,
            b: 0.05,
            ap: 16.0,
            an: 11.0,
            xp: 0.3,
            xn: 0.5,
            vp: 0.65,
            vn: 0.56,
            alpha_p: 1.1,
            alpha_n: 6.2,
            eta: -1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a1, self.a2, self.b, self.ap, self.an, self.xp, self.xn, self.vp, self.vn,
            self.alpha_p, self.alpha_n, self.eta,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("memristor parameter"));
        }
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.vp <= 0.0 || self.vn <= 0.0 {
            return bad("thresholds vp, vn must be positive magnitudes");
        }
        if !(0.0 < self.xp && self.xp < 1.0 && 0.0 < self.xn && self.xn < 1.0) {
            return bad("xp, xn must lie in (0, 1)");
        }
        if self.a1 <= 0.0 || self.a2 <= 0.0 {
            return bad("a1, a2 must be positive");
        }
        if self.ap < 0.0 || self.an < 0.0 {
            return bad("ap, an must be non-negative");
        }
        if self.b <= 0.0 {
            return bad("b must be positive");
        }
        if self.eta != 1.0 && self.eta != -1.0 {
            return bad("eta must be +1 or -1");
        }
        Ok(())
    }

    /// Device voltage seen when `v_cell` is applied to a crossbar cell.
    #[inline]
    pub fn orient(&self, v_cell: f64) -> f64 {
        self.eta * v_cell
    }

    /// Threshold window in cell orientation, `(positive, negative)`.
    /// For `eta = +1` this is `(Vp, -Vn)`.
    pub fn cell_thresholds(&self) -> (f64, f64) {
        if self.eta > 0.0 {
            (self.vp, -self.vn)
        } else {
            (self.vn, -self.vp)
        }
    }

    /// Small-signal conductance `dI/dv` at `v = 0`.
    #[inline]
    pub fn conductance(&self, x: f64) -> f64 {
        self.a1 * x * self.b
    }

    /// Inverse of [`conductance`](Self::conductance), clamped to `[0, 1]`.
    #[inline]
    pub fn state_for_conductance(&self, g: f64) -> f64 {
        (g / (self.a1 * self.b)).clamp(0.0, 1.0)
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "a1" => self.a1,
            "a2" => self.a2,
            "b" => self.b,
            "ap" => self.ap,
            "an" => self.an,
            "xp" => self.xp,
            "xn" => self.xn,
            "vp" => self.vp,
            "vn" => self.vn,
            "alpha_p" => self.alpha_p,
            "alpha_n" => self.alpha_n,
            "eta" => self.eta,
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "a1" => &mut self.a1,
            "a2" => &mut self.a2,
            "b" => &mut self.b,
            "ap" => &mut self.ap,
            "an" => &mut self.an,
            "xp" => &mut self.xp,
            "xn" => &mut self.xn,
            "vp" => &mut self.vp,
            "vn" => &mut self.vn,
            "alpha_p" => &mut self.alpha_p,
            "alpha_n" => &mut self.alpha_n,
            "eta" => &mut self.eta,
            _ => {
                return Err(Error::Unknown {
                    kind: "memristor parameter",
                    name: key.to_string(),
                })
            }
        };
        *slot = value;
        Ok(())
    }

    pub const KEYS: [&'static str; 12] = [
        "a1", "a2", "b", "ap", "an", "xp", "xn", "vp", "vn", "alpha_p", "alpha_n", "eta",
    ];
}

/// Instantaneous device current at device voltage `v`.
#[inline]
pub fn device_current(p: &MemristorParams, x: f64, v: f64) -> f64 {
    let a = if v >= 0.0 { p.a1 } else { p.a2 };
    a * x * (p.b * v).sinh()
}

/// Threshold drive `g(v)`; exactly zero on the closed window `[-Vn, Vp]`.
#[inline]
pub fn drive(p: &MemristorParams, v: f64) -> f64 {
    if v > p.vp {
        p.ap * (v.exp() - p.vp.exp())
    } else if v < -p.vn {
        -p.an * ((-v).exp() - p.vn.exp())
    } else {
        0.0
    }
}

/// Motion window `f(x)`, selected by the direction of state motion.
#[inline]
pub fn window(p: &MemristorParams, x: f64, v: f64) -> f64 {
    if p.eta * v > 0.0 {
        if x >= p.xp {
            let wp = (p.xp - x) / (1.0 - p.xp) + 1.0;
            (-p.alpha_p * (x - p.xp)).exp() * wp
        } else {
            1.0
        }
    } else if x <= 1.0 - p.xn {
        let wn = x / (1.0 - p.xn);
        (p.alpha_n * (x + p.xn - 1.0)).exp() * wn
    } else {
        1.0
    }
}

#[inline]
pub fn state_rate(p: &MemristorParams, x: f64, v: f64) -> f64 {
    let g = drive(p, v);
    if g == 0.0 {
        return 0.0;
    }
    p.eta * g * window(p, x, v)
}

/// Integrates the state over `dt` at constant device voltage `v`.
/// Inside the threshold window the input state is returned unchanged.
pub fn step_state(p: &MemristorParams, x: f64, v: f64, dt: f64) -> f64 {
    if drive(p, v) == 0.0 {
        return x;
    }
    let mut x = x;
    let mut remaining = dt;
    // f(x) vanishes at both rails, so the loop terminates once the state
    // saturates; the iteration cap guards pathological parameter sets.
    for _ in 0..1_000_000 {
        if remaining <= 0.0 {
            break;
        }
        let rate = state_rate(p, x, v);
        if rate == 0.0 {
            break;
        }
        let h = remaining.min(SUBSTEP_TARGET / rate.abs());
        x = (x + rate * h).clamp(0.0, 1.0);
        remaining -= h;
        if (x == 1.0 && rate > 0.0) || (x == 0.0 && rate < 0.0) {
            break;
        }
    }
    x
}

/// One memristor: internal state plus the parameter set it obeys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceState<'p> {
    x: f64,
    pub params: &'p MemristorParams,
}

impl<'p> DeviceState<'p> {
    pub fn new(params: &'p MemristorParams, x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::NonFinite("state"));
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidParameter(format!("state {x} outside [0, 1]")));
        }
        Ok(DeviceState { x, params })
    }

    pub fn with_conductance(params: &'p MemristorParams, g: f64) -> Self {
        DeviceState {
            x: params.state_for_conductance(g),
            params,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn conductance(&self) -> f64 {
        self.params.conductance(self.x)
    }

    pub fn current(&self, v: f64) -> f64 {
        device_current(self.params, self.x, v)
    }

    pub fn step(self, v: f64, dt: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::NonFinite("voltage"));
        }
        if !dt.is_finite() {
            return Err(Error::NonFinite("dt"));
        }
        if dt <= 0.0 {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        Ok(DeviceState {
            x: step_state(self.params, self.x, v, dt),
            params: self.params,
        })
    }
}

/// The built-in device models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Silver,
    Titania,
}

impl ModelId {
    pub fn params(self) -> MemristorParams {
        match self {
            ModelId::Silver => MemristorParams::silver(),
            ModelId::Titania => MemristorParams::titania(),
        }
    }

    pub fn datasheet(self) -> Datasheet {
        match self {
            ModelId::Silver => Datasheet {
                g_abs: (0.255e-3, 8.5e-3),
                g_lin: (3.18e-3, 6.38e-3),
                init: (4.4e-3, 5.0e-3),
            },
            ModelId::Titania => Datasheet {
                g_abs: (1.0e-3, 70.0e-3),
                g_lin: (28.0e-3, 48.0e-3),
                init: (35.0e-3, 41.0e-3),
            },
        }
    }

    pub fn calibration_pulse(self) -> CalibrationPulse {
        match self {
            ModelId::Silver => CalibrationPulse {
                v_pos: 0.3,
                t_pos: 5.0e-3,
                v_neg: -0.5,
                t_neg: 4.7e-3,
                ..CalibrationPulse::default()
            },
            ModelId::Titania => CalibrationPulse {
                v_pos: 1.0,
                t_pos: 0.5,
                v_neg: -1.2,
                t_neg: 0.96,
                ..CalibrationPulse::default()
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Silver => "silver",
            ModelId::Titania => "titania",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "silver" => Ok(ModelId::Silver),
            "titania" => Ok(ModelId::Titania),
            _ => Err(Error::Unknown {
                kind: "device model",
                name: s.to_string(),
            }),
        }
    }
}

/// Published conductance figures for a device model (siemens).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Datasheet {
    pub g_abs: (f64, f64),
    pub g_lin: (f64, f64),
    /// Default initialization range of trainable cells.
    pub init: (f64, f64),
}

impl Datasheet {
    /// Reference conductance `G = 1/R`, the midpoint of the linear region.
    pub fn g_ref(&self) -> f64 {
        0.5 * (self.g_lin.0 + self.g_lin.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariationDirection {
    Decreased,
    Increased,
}

impl FromStr for VariationDirection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "decreased" | "decrease" => Ok(VariationDirection::Decreased),
            "increased" | "increase" => Ok(VariationDirection::Increased),
            _ => Err(Error::Unknown {
                kind: "variation direction",
                name: s.to_string(),
            }),
        }
    }
}

/// Parameter set giving a 10% I-V variation of `model` in `direction`.
/// `None` leaves `params` untouched. `eta` is inherited from `params`.
pub fn apply_variation(
    params: &MemristorParams,
    direction: Option<VariationDirection>,
    model: ModelId,
) -> MemristorParams {
    use VariationDirection::*;
    let row: [f64; 11] = match (direction, model) {
        (None, _) => return *params,
        (Some(Decreased), ModelId::Silver) => [
            0.153, 0.153, 0.045, 2680.0, 2680.0, 0.18462, 0.3077, 0.104848, 0.098295, 0.145, 0.725,
        ],
        (Some(Decreased), ModelId::Titania) => [
            1.26, 1.26, 0.045, 9.888, 6.798, 0.2139, 0.3565, 0.594165, 0.511896, 0.0, 0.0,
        ],
        (Some(Increased), ModelId::Silver) => [
            0.187, 0.187, 0.055, 5924.0, 5924.0, 0.42363, 0.70605, 0.217696, 0.20409, 2.115, 10.575,
        ],
        (Some(Increased), ModelId::Titania) => [
            1.54, 1.54, 0.055, 32.16, 22.11, 0.57903, 0.96505, 0.6994, 0.60256, 1.9855, 11.191,
        ],
    };
    MemristorParams {
        a1: row[0],
        a2: row[1],
        b: row[2],
        ap: row[3],
        an: row[4],
        xp: row[5],
        xn: row[6],
        vp: row[7],
        vn: row[8],
        alpha_p: row[9],
        alpha_n: row[10],
        eta: params.eta,
    }
}

/// Square-wave drive used to characterize a device: a positive pulse followed
/// by a negative pulse, repeated. Voltages are in cell orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPulse {
    pub v_pos: f64,
    pub t_pos: f64,
    pub v_neg: f64,
    pub t_neg: f64,
    pub cycles: usize,
    pub samples_per_pulse: usize,
    pub x0: f64,
    /// A sample belongs to the linear window while its local slope is at
    /// least this fraction of the sweep's peak slope.
    pub slope_ratio: f64,
}

impl Default for CalibrationPulse {
    fn default() -> Self {
        CalibrationPulse {
            v_pos: 0.3,
            t_pos: 5.0e-3,
            v_neg: -0.5,
            t_neg: 5.0e-3,
            cycles: 2,
            samples_per_pulse: 2000,
            x0: 0.5,
            slope_ratio: 0.31,
        }
    }
}

/// Empirical description of a device's conductance-vs-time response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceCharacterization {
    /// Threshold window in cell orientation.
    pub v_th_pos: f64,
    pub v_th_neg: f64,
    pub g_abs_min: f64,
    pub g_abs_max: f64,
    pub g_lin_min: f64,
    pub g_lin_max: f64,
    /// Slope of the decreasing linear segment (S/s, negative).
    pub c1: f64,
    /// Slope of the increasing linear segment (S/s, positive).
    pub c2: f64,
}

/// Sampled conductance trace produced during characterization.
#[derive(Debug, Clone, Default)]
pub struct ConductanceTrace {
    pub time: Vec<f64>,
    pub voltage: Vec<f64>,
    pub conductance: Vec<f64>,
}

/// Read conductance `I(v_read)/v_read` in cell orientation.
pub fn read_conductance(p: &MemristorParams, x: f64, v_read: f64) -> f64 {
    device_current(p, x, p.orient(v_read)) * p.eta / v_read
}

/// Simulates `pulse` and returns the sampled trace. The read voltage is
/// `0.1` of the positive cell threshold.
pub fn calibration_trace(params: &MemristorParams, pulse: &CalibrationPulse) -> Result<ConductanceTrace> {
    params.validate()?;
    let (th_pos, th_neg) = params.cell_thresholds();
    if !(pulse.v_pos > th_pos && pulse.v_neg < th_neg) {
        return Err(Error::InvalidParameter(format!(
            "calibration amplitudes ({}, {}) must exceed thresholds ({th_pos}, {th_neg})",
            pulse.v_pos, pulse.v_neg
        )));
    }
    if pulse.cycles == 0 || pulse.samples_per_pulse < 2 || pulse.t_pos <= 0.0 || pulse.t_neg <= 0.0 {
        return Err(Error::InvalidParameter("degenerate calibration pulse".into()));
    }
    let v_read = 0.1 * th_pos;
    let n = pulse.samples_per_pulse;
    let mut trace = ConductanceTrace::default();
    let mut x = pulse.x0.clamp(0.0, 1.0);
    let mut t = 0.0;
    for _ in 0..pulse.cycles {
        for (v, dur) in [(pulse.v_pos, pulse.t_pos), (pulse.v_neg, pulse.t_neg)] {
            let h = dur / n as f64;
            for _ in 0..n {
                x = step_state(params, x, params.orient(v), h);
                t += h;
                trace.time.push(t);
                trace.voltage.push(v);
                trace.conductance.push(read_conductance(params, x, v_read));
            }
        }
    }
    Ok(trace)
}

/// Linear window of one monotone sweep: conductance bounds and a fitted slope.
struct SweepFit {
    g_lo: f64,
    g_hi: f64,
}

fn sweep_window(t: &[f64], g: &[f64], ratio: f64) -> Result<SweepFit> {
    let n = g.len();
    if n < 10 {
        return Err(Error::Characterization(format!(
            "monotone segment has {n} samples, need at least 10"
        )));
    }
    let slope: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            ((g[b] - g[a]) / (t[b] - t[a])).abs()
        })
        .collect();
    let (peak_idx, peak) = slope
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
    if peak <= 0.0 {
        return Err(Error::Characterization("sweep shows no conductance change".into()));
    }
    let cut = ratio * peak;
    let mut lo = peak_idx;
    while lo > 0 && slope[lo - 1] >= cut {
        lo -= 1;
    }
    let mut hi = peak_idx;
    while hi + 1 < n && slope[hi + 1] >= cut {
        hi += 1;
    }
    if hi - lo + 1 < 10 {
        return Err(Error::Characterization(format!(
            "linear window spans {} samples, need at least 10",
            hi - lo + 1
        )));
    }
    // Interpolate the conductance where the slope crosses the cut.
    let edge = |inside: usize, outside: usize| -> f64 {
        let (si, so) = (slope[inside], slope[outside]);
        let w = if (si - so).abs() > 0.0 { (si - cut) / (si - so) } else { 0.0 };
        g[inside] + w * (g[outside] - g[inside])
    };
    let g_start = if lo > 0 { edge(lo, lo - 1) } else { g[lo] };
    let g_end = if hi + 1 < n { edge(hi, hi + 1) } else { g[hi] };
    Ok(SweepFit {
        g_lo: g_start.min(g_end),
        g_hi: g_start.max(g_end),
    })
}

fn least_squares_slope(t: &[f64], g: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let gm = g.iter().sum::<f64>() / n;
    let (num, den) = t.iter().zip(g).fold((0.0, 0.0), |(num, den), (&ti, &gi)| {
        (num + (ti - tm) * (gi - gm), den + (ti - tm) * (ti - tm))
    });
    num / den
}

/// Drives a single device with `pulse` and extracts its conductance ranges
/// and linear-region slopes. The last cycle is analysed; earlier cycles only
/// remove the dependence on the initial state.
pub fn characterize(params: &MemristorParams, pulse: &CalibrationPulse) -> Result<DeviceCharacterization> {
    let trace = calibration_trace(params, pulse)?;
    let n = pulse.samples_per_pulse;
    let start = (pulse.cycles - 1) * 2 * n;
    let (rise, fall) = (start..start + n, start + n..start + 2 * n);

    let last_g = &trace.conductance[start..];
    let g_abs_min = last_g.iter().copied().fold(f64::INFINITY, f64::min);
    let g_abs_max = last_g.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let up = sweep_window(&trace.time[rise.clone()], &trace.conductance[rise.clone()], pulse.slope_ratio)?;
    let down = sweep_window(&trace.time[fall.clone()], &trace.conductance[fall.clone()], pulse.slope_ratio)?;

    // Band in which both directions respond linearly.
    let g_lin_min = up.g_lo.max(down.g_lo);
    let g_lin_max = up.g_hi.min(down.g_hi);
    if !(g_abs_min < g_lin_min && g_lin_min < g_lin_max && g_lin_max < g_abs_max) {
        return Err(Error::Characterization(format!(
            "inconsistent bounds: abs [{g_abs_min:e}, {g_abs_max:e}], linear [{g_lin_min:e}, {g_lin_max:e}]"
        )));
    }

    let fit = |range: std::ops::Range<usize>| -> Result<f64> {
        let (t, g): (Vec<f64>, Vec<f64>) = range
            .filter(|&i| (g_lin_min..=g_lin_max).contains(&trace.conductance[i]))
            .map(|i| (trace.time[i], trace.conductance[i]))
            .unzip();
        if t.len() < 10 {
            return Err(Error::Characterization(format!(
                "only {} samples inside the linear band",
                t.len()
            )));
        }
        Ok(least_squares_slope(&t, &g))
    };
    let c2 = fit(rise)?;
    let c1 = fit(fall)?;
    if !(c1 < 0.0 && c2 > 0.0) {
        return Err(Error::Characterization(format!("slope signs wrong: c1 = {c1:e}, c2 = {c2:e}")));
    }
    let (v_th_pos, v_th_neg) = params.cell_thresholds();
    Ok(DeviceCharacterization {
        v_th_pos,
        v_th_neg,
        g_abs_min,
        g_abs_max,
        g_lin_min,
        g_lin_max,
        c1,
        c2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const SILVER: MemristorParams = MemristorParams::silver();

    #[test]
    fn current_zero_at_zero_volts() {
        assert_eq!(device_current(&SILVER, 0.7, 0.0), 0.0);
    }

    #[test]
    fn current_closed_form_silver() {
        let i = device_current(&SILVER, 1.0, 0.1);
        assert_relative_eq!(i, 0.17 * (0.005f64).sinh(), max_relative = 1e-15);
        assert_relative_eq!(i, 8.5001e-4, max_relative = 1e-4);
    }

    #[test]
    fn small_signal_conductance_matches_current_slope() {
        let x = 0.42;
        let h = 1e-7;
        let slope = (device_current(&SILVER, x, h) - device_current(&SILVER, x, -h)) / (2.0 * h);
        assert_relative_eq!(slope, SILVER.conductance(x), max_relative = 1e-8);
    }

    #[test]
    fn inert_inside_window() {
        let s = DeviceState::new(&SILVER, 0.37).unwrap();
        let s2 = s.step(0.15, 1e-3).unwrap();
        assert_eq!(s2.x().to_bits(), s.x().to_bits());
        // closed window: exactly on the thresholds is still inert
        assert_eq!(s.step(0.16, 1e-3).unwrap().x(), s.x());
        assert_eq!(s.step(-0.15, 1e-3).unwrap().x(), s.x());
    }

    #[test]
    fn supra_threshold_positive_increases() {
        let s = DeviceState::new(&SILVER, 0.4).unwrap();
        assert!(s.step(0.3, 1e-6).unwrap().x() > 0.4);
        assert!(s.step(-0.3, 1e-6).unwrap().x() < 0.4);
    }

    #[test]
    fn clamps_at_rails() {
        let s = DeviceState::new(&SILVER, 1.0).unwrap();
        assert_eq!(s.step(2.0, 1e-3).unwrap().x(), 1.0);
        let s = DeviceState::new(&SILVER, 0.0).unwrap();
        assert_eq!(s.step(-2.0, 1e-3).unwrap().x(), 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        let s = DeviceState::new(&SILVER, 0.5).unwrap();
        assert!(s.step(f64::NAN, 1e-3).is_err());
        assert!(s.step(0.2, f64::INFINITY).is_err());
        assert!(s.step(0.2, 0.0).is_err());
        assert!(DeviceState::new(&SILVER, 1.5).is_err());
    }

    #[test]
    fn titania_is_reversed_in_device_orientation() {
        let p = MemristorParams::titania();
        // positive device voltage lowers the state when eta = -1
        assert!(step_state(&p, 0.5, 1.0, 1e-3) < 0.5);
        // but positive cell voltage raises it
        assert!(step_state(&p, 0.5, p.orient(1.0), 1e-3) > 0.5);
        assert_eq!(p.cell_thresholds(), (0.56, -0.65));
    }

    #[test]
    fn variation_rows() {
        let s = apply_variation(&SILVER, Some(VariationDirection::Decreased), ModelId::Silver);
        assert_eq!((s.a1, s.ap, s.vp), (0.153, 2680.0, 0.104848));
        let t = apply_variation(
            &MemristorParams::titania(),
            Some(VariationDirection::Increased),
            ModelId::Titania,
        );
        assert_eq!((t.a1, t.ap, t.vn), (1.54, 32.16, 0.60256));
        assert_eq!(t.eta, -1.0);
        assert_eq!(apply_variation(&SILVER, None, ModelId::Silver), SILVER);
    }

    #[test]
    fn parses_model_ids() {
        assert_eq!("Silver".parse::<ModelId>().unwrap(), ModelId::Silver);
        assert!("gold".parse::<ModelId>().is_err());
    }

    #[test]
    fn silver_thresholds_echoed() {
        let c = characterize(&SILVER, &ModelId::Silver.calibration_pulse()).unwrap();
        assert_eq!((c.v_th_pos, c.v_th_neg), (0.16, -0.15));
        assert!(c.c1 < 0.0 && c.c2 > 0.0);
    }

    #[test]
    fn characterize_rejects_sub_threshold_pulse() {
        let pulse = CalibrationPulse {
            v_pos: 0.1,
            ..ModelId::Silver.calibration_pulse()
        };
        assert!(characterize(&SILVER, &pulse).is_err());
    }

    #[test]
    fn characterize_fails_without_enough_samples() {
        let pulse = CalibrationPulse {
            samples_per_pulse: 6,
            ..ModelId::Silver.calibration_pulse()
        };
        assert!(matches!(characterize(&SILVER, &pulse), Err(Error::Characterization(_))));
    }

    #[test]
    fn halving_dt_converges() {
        // 1 ms pulse at 0.2 V, integrated in 1 and in 2 outer steps and in 1000
        let one = step_state(&SILVER, 0.35, 0.2, 1e-3);
        let two = step_state(&SILVER, step_state(&SILVER, 0.35, 0.2, 5e-4), 0.2, 5e-4);
        let mut fine = 0.35;
        for _ in 0..1000 {
            fine = step_state(&SILVER, fine, 0.2, 1e-6);
        }
        assert!(((one - two) / two).abs() < 0.01, "{one} vs {two}");
        assert!(((two - fine) / fine).abs() < 0.01, "{two} vs {fine}");
    }

    proptest! {
        #[test]
        fn threshold_inertness(x in 0.0f64..=1.0, v in -0.15f64..=0.16, dt in 1e-9f64..1.0) {
            prop_assert_eq!(step_state(&SILVER, x, v, dt).to_bits(), x.to_bits());
        }

        #[test]
        fn clamp_safety(x in 0.0f64..=1.0, vs in proptest::collection::vec(-3.0f64..3.0, 1..20)) {
            let mut s = x;
            for v in vs {
                s = step_state(&SILVER, s, v, 1e-3);
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }

        #[test]
        fn current_is_odd(x in 0.0f64..=1.0, v in -2.0f64..2.0) {
            prop_assert_eq!(device_current(&SILVER, x, -v), -device_current(&SILVER, x, v));
        }
    }
}

//! Piecewise-constant drive signals for the three phases of a training step:
//! forward read `[0, T_rd)`, backward read `[T_rd, 2T_rd)` and the four-quarter
//! write phase `[2T_rd, 2T_rd + T_wr)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::device::DeviceCharacterization;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub t_rd: f64,
    pub t_wr: f64,
    pub dt: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            t_rd: 10e-6,
            t_wr: 1e-3,
            dt: 1e-3 / 400.0,
        }
    }
}

impl Timing {
    pub fn validate(&self) -> Result<()> {
        if ![self.t_rd, self.t_wr, self.dt].iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::Timing("durations must be positive and finite".into()));
        }
        if self.dt > self.t_wr / 400.0 * (1.0 + 1e-12) {
            return Err(Error::Timing(format!(
                "dt = {} exceeds T_wr/400 = {}",
                self.dt,
                self.t_wr / 400.0
            )));
        }
        Ok(())
    }

    pub fn write_start(&self) -> f64 {
        2.0 * self.t_rd
    }

    pub fn quarter(&self) -> f64 {
        self.t_wr / 4.0
    }

    /// Start of quarter `q` (0-based) of the write phase.
    pub fn quarter_start(&self, q: usize) -> f64 {
        self.write_start() + q as f64 * self.quarter()
    }

    pub fn write_end(&self) -> f64 {
        self.write_start() + self.t_wr
    }
}

/// Input scale and error-to-duration scales. The ON time for an update that
/// raises conductance is `kappa_inc·|c1·y|`, for one that lowers it
/// `kappa_dec·|c2·y|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingConstants {
    pub a: f64,
    pub kappa_inc: f64,
    pub kappa_dec: f64,
}

impl EncodingConstants {
    pub fn validate(&self, t: &Timing, ch: &DeviceCharacterization) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::InvalidParameter(format!("encoding scale a = {}", self.a)));
        }
        if !(self.kappa_inc >= 0.0 && self.kappa_dec >= 0.0) {
            return Err(Error::InvalidParameter("kappa must be non-negative".into()));
        }
        let q = t.quarter() * (1.0 + 1e-12);
        if self.kappa_inc * ch.c1.abs() > q || self.kappa_dec * ch.c2.abs() > q {
            return Err(Error::Timing(format!(
                "unit-error ON times ({:e}, {:e}) s exceed a quarter of {:e} s",
                self.kappa_inc * ch.c1.abs(),
                self.kappa_dec * ch.c2.abs(),
                t.quarter()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub start: f64,
    pub end: f64,
    pub value: T,
}

/// Contiguous half-open segments covering `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform<T> {
    segments: Vec<Segment<T>>,
}

impl<T: Copy + PartialEq> Waveform<T> {
    /// Builds a waveform from `(end, value)` breakpoints starting at `start`.
    /// Zero-length pieces are dropped and equal neighbours merged.
    pub fn from_breaks(start: f64, pieces: &[(f64, T)]) -> Result<Self> {
        let mut segments: Vec<Segment<T>> = Vec::with_capacity(pieces.len());
        let mut t = start;
        for &(end, value) in pieces {
            if !(end >= t) {
                return Err(Error::Timing(format!("segment end {end} before start {t}")));
            }
            if end == t {
                continue;
            }
            match segments.last_mut() {
                Some(last) if last.value == value => last.end = end,
                _ => segments.push(Segment { start: t, end, value }),
            }
            t = end;
        }
        if segments.is_empty() {
            return Err(Error::Timing("empty waveform".into()));
        }
        Ok(Waveform { segments })
    }

    pub fn constant(start: f64, end: f64, value: T) -> Result<Self> {
        Self::from_breaks(start, &[(end, value)])
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn start(&self) -> f64 {
        self.segments[0].start
    }

    pub fn end(&self) -> f64 {
        self.segments[self.segments.len() - 1].end
    }

    /// Value at `time`; a boundary belongs to the later segment.
    pub fn sample(&self, time: f64) -> Result<T> {
        if !(time >= self.start() && time < self.end()) {
            return Err(Error::OutOfSpan {
                time,
                start: self.start(),
                end: self.end(),
            });
        }
        let idx = self.segments.partition_point(|s| s.end <= time);
        Ok(self.segments[idx].value)
    }
}

impl<T: Copy + Into<f64>> Waveform<T> {
    /// Writes `time,value` rows with two points per segment so that a plot
    /// shows the steps.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "value"]).map_err(|e| Error::Io(e.to_string()))?;
        for s in &self.segments {
            let v: f64 = s.value.into();
            for t in [s.start, s.end] {
                w.write_record([t.to_string(), v.to_string()])
                    .map_err(|e| Error::Io(e.to_string()))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Switch state of a column or row driver.
pub type Switch = bool;

fn check_read_safe(v: f64, ch: &DeviceCharacterization) -> Result<()> {
    if !(v.is_finite() && v > ch.v_th_neg && v < ch.v_th_pos) {
        return Err(Error::ReadSafety {
            voltage: v,
            lower: ch.v_th_neg,
            upper: ch.v_th_pos,
        });
    }
    Ok(())
}

/// Read voltage `a·x` over `[0, T_rd)`.
pub fn encode_read(
    x: f64,
    c: &EncodingConstants,
    t: &Timing,
    ch: &DeviceCharacterization,
) -> Result<Waveform<f64>> {
    let v = c.a * x;
    check_read_safe(v, ch)?;
    Waveform::constant(0.0, t.t_rd, v)
}

/// Error read-out voltage `a·y` over the backward phase `[T_rd, 2T_rd)`.
pub fn encode_backward(
    y: f64,
    c: &EncodingConstants,
    t: &Timing,
    ch: &DeviceCharacterization,
) -> Result<Waveform<f64>> {
    let v = c.a * y;
    check_read_safe(v, ch)?;
    Waveform::constant(t.t_rd, 2.0 * t.t_rd, v)
}

/// The four quarter voltages for input `x`.
pub fn update_levels(x: f64, a: f64, ch: &DeviceCharacterization) -> [f64; 4] {
    let (p, n) = (ch.v_th_pos, ch.v_th_neg);
    let ax = a * x;
    if x >= 0.0 {
        [ax + p, -ax + n, n, p]
    } else {
        [p, n, ax + n, -ax + p]
    }
}

/// Row drive for the write phase.
pub fn encode_update(
    x: f64,
    c: &EncodingConstants,
    t: &Timing,
    ch: &DeviceCharacterization,
) -> Result<Waveform<f64>> {
    check_read_safe(c.a * x, ch)?;
    check_read_safe(-c.a * x, ch)?;
    let levels = update_levels(x, c.a, ch);
    let pieces: Vec<(f64, f64)> = (0..4).map(|q| (t.quarter_start(q + 1), levels[q])).collect();
    Waveform::from_breaks(t.write_start(), &pieces)
}

/// ON durations `[Q1, Q2, Q3, Q4]` for error `y`.
pub fn on_durations(y: f64, c: &EncodingConstants, ch: &DeviceCharacterization) -> [f64; 4] {
    let inc = c.kappa_inc * (ch.c1 * y).abs();
    let dec = c.kappa_dec * (ch.c2 * y).abs();
    if y == 0.0 {
        [0.0; 4]
    } else if y > 0.0 {
        [0.0, dec, 0.0, inc]
    } else {
        [inc, 0.0, dec, 0.0]
    }
}

/// Column switch schedule for the write phase. Each ON pulse sits at the
/// start of its quarter.
pub fn switch_schedule(
    y: f64,
    c: &EncodingConstants,
    t: &Timing,
    ch: &DeviceCharacterization,
) -> Result<Waveform<Switch>> {
    if !y.is_finite() {
        return Err(Error::NonFinite("error value"));
    }
    let d = on_durations(y, c, ch);
    let mut pieces = Vec::with_capacity(8);
    for (q, &on) in d.iter().enumerate() {
        if on > t.quarter() * (1.0 + 1e-12) {
            return Err(Error::Timing(format!(
                "ON time {on:e} s exceeds the quarter {:e} s",
                t.quarter()
            )));
        }
        let q0 = t.quarter_start(q);
        pieces.push((q0 + on.min(t.quarter()), true));
        pieces.push((t.quarter_start(q + 1), false));
    }
    Waveform::from_breaks(t.write_start(), &pieces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn silver_ch() -> DeviceCharacterization {
        DeviceCharacterization {
            v_th_pos: 0.16,
            v_th_neg: -0.15,
            g_abs_min: 0.255e-3,
            g_abs_max: 8.5e-3,
            g_lin_min: 3.18e-3,
            g_lin_max: 6.38e-3,
            c1: -12.0,
            c2: 3.0,
        }
    }

    const ENC: EncodingConstants = EncodingConstants {
        a: 0.6,
        kappa_inc: 1e-5,
        kappa_dec: 2e-5,
    };

    #[test]
    fn timing_default_is_valid() {
        Timing::default().validate().unwrap();
        let bad = Timing {
            dt: 1e-5,
            ..Timing::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn read_encoding() {
        let t = Timing::default();
        let w = encode_read(0.0, &ENC, &t, &silver_ch()).unwrap();
        assert_eq!(w.sample(0.0).unwrap(), 0.0);
        assert_eq!(w.segments().len(), 1);
        let w = encode_read(-0.1, &ENC, &t, &silver_ch()).unwrap();
        assert!((w.sample(5e-6).unwrap() + 0.06).abs() < 1e-15);
        let w = encode_read(0.2, &ENC, &t, &silver_ch()).unwrap();
        assert!((w.sample(0.0).unwrap() - 0.12).abs() < 1e-15);
        // unnormalized XOR input would be an unsafe read
        assert!(matches!(
            encode_read(1.0, &ENC, &t, &silver_ch()),
            Err(Error::ReadSafety { .. })
        ));
    }

    #[test]
    fn update_quarters() {
        let ch = silver_ch();
        let a = 0.6;
        let x = 0.05 / a;
        let l = update_levels(x, a, &ch);
        let want = [0.21, -0.20, -0.15, 0.16];
        for q in 0..4 {
            assert!((l[q] - want[q]).abs() < 1e-12, "{l:?}");
        }
        let l = update_levels(-x, a, &ch);
        let want = [0.16, -0.15, -0.20, 0.21];
        for q in 0..4 {
            assert!((l[q] - want[q]).abs() < 1e-12, "{l:?}");
        }
        assert_eq!(update_levels(0.0, a, &ch), [0.16, -0.15, -0.15, 0.16]);
    }

    #[test]
    fn sample_boundaries() {
        let t = Timing::default();
        let w = encode_update(0.1, &ENC, &t, &silver_ch()).unwrap();
        let q2 = t.quarter_start(1);
        assert_eq!(w.sample(q2).unwrap(), update_levels(0.1, 0.6, &silver_ch())[1]);
        assert!(w.sample(-1e-9).is_err());
        assert!(w.sample(t.write_end()).is_err());
        let c = Waveform::constant(0.0, 1.0, 3.5).unwrap();
        assert_eq!(c.sample(0.7).unwrap(), 3.5);
    }

    #[test]
    fn schedule_quarters() {
        let t = Timing::default();
        let ch = silver_ch();
        let off = switch_schedule(0.0, &ENC, &t, &ch).unwrap();
        assert_eq!(off.segments().len(), 1);
        assert!(!off.segments()[0].value);

        let on_quarters = |y: f64| -> Vec<usize> {
            let w = switch_schedule(y, &ENC, &t, &ch).unwrap();
            w.segments()
                .iter()
                .filter(|s| s.value)
                .map(|s| ((s.start - t.write_start()) / t.quarter()).round() as usize)
                .collect()
        };
        assert_eq!(on_quarters(0.5), vec![1, 3]);
        assert_eq!(on_quarters(-0.5), vec![0, 2]);
    }

    #[test]
    fn csv_dump() {
        let t = Timing::default();
        let w = encode_update(0.1, &ENC, &t, &silver_ch()).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,value\n"));
        assert_eq!(text.lines().count(), 1 + 8);
    }

    fn total_on(w: &Waveform<Switch>) -> f64 {
        w.segments().iter().filter(|s| s.value).map(|s| s.end - s.start).sum()
    }

    proptest! {
        #[test]
        fn overdrive_bound_and_single_sign(x in -0.2f64..0.2) {
            let ch = silver_ch();
            let t = Timing::default();
            let w = encode_update(x, &ENC, &t, &ch).unwrap();
            for s in w.segments() {
                prop_assert!(s.value >= 2.0 * ch.v_th_neg && s.value <= 2.0 * ch.v_th_pos);
            }
            for q in 0..4 {
                let v = w.sample(t.quarter_start(q) + 1e-9).unwrap();
                let v_end = w.sample(t.quarter_start(q + 1) - 1e-9).unwrap();
                prop_assert!(v * v_end > 0.0);
            }
        }

        #[test]
        fn duration_linearity(y in -1.0f64..1.0) {
            let ch = silver_ch();
            let t = Timing::default();
            let w = switch_schedule(y, &ENC, &t, &ch).unwrap();
            let got = total_on(&w);
            let (inc, dec) = (ENC.kappa_inc * ch.c1.abs(), ENC.kappa_dec * ch.c2.abs());
            prop_assert!((got - (inc + dec) * y.abs()).abs() < 1e-15);
        }

        #[test]
        fn quarter_exclusivity(x in -0.2f64..0.2, y in -1.0f64..1.0) {
            prop_assume!(x.abs() > 1e-6 && y.abs() > 1e-6);
            let ch = silver_ch();
            let levels = update_levels(x, ENC.a, &ch);
            let d = on_durations(y, &ENC, &ch);
            let active: Vec<usize> = (0..4)
                .filter(|&q| d[q] > 0.0 && (levels[q] > ch.v_th_pos || levels[q] < ch.v_th_neg))
                .collect();
            prop_assert_eq!(active.len(), 1);
            // x, y same sign lowers conductance (Q2 or Q3), opposite raises it (Q1 or Q4)
            let q = active[0];
            let lowers = levels[q] < 0.0;
            prop_assert_eq!(lowers, x * y > 0.0);
            let expected = match (x > 0.0, y > 0.0) {
                (true, true) => 1,
                (true, false) => 0,
                (false, true) => 3,
                (false, false) => 2,
            };
            prop_assert_eq!(q, expected);
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::crossbar::PhaseTrace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Accuracy, macro-averaged F1 and confusion matrix. Classes that appear
/// neither in the labels nor in the predictions are left out of the F1 mean.
pub fn metrics(predictions: &[usize], labels: &[usize], classes: usize) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Dataset("no samples to score".into()));
    }
    let m = classes.max(predictions.iter().chain(labels).max().map_or(0, |v| v + 1));
    let mut confusion = vec![vec![0usize; m]; m];
    for (&p, &l) in predictions.iter().zip(labels) {
        confusion[l][p] += 1;
    }
    let correct: usize = (0..m).map(|c| confusion[c][c]).sum();
    let mut f1_sum = 0.0;
    let mut present = 0;
    for c in 0..m {
        let tp = confusion[c][c] as f64;
        let support: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        if support == 0 && predicted == 0 {
            continue;
        }
        present += 1;
        let denom = (support + predicted) as f64;
        f1_sum += 2.0 * tp / denom;
    }
    Ok(Metrics {
        accuracy: correct as f64 / labels.len() as f64,
        macro_f1: f1_sum / present as f64,
        confusion,
    })
}

/// Mean energy per cell recorded in a phase trace (J).
pub fn energy_estimate(trace: &PhaseTrace) -> Result<f64> {
    if !trace.physical {
        return Err(Error::InvalidParameter(
            "behavioral traces carry no currents; energy needs a device-mode trace".into(),
        ));
    }
    if trace.cells.is_empty() {
        return Ok(0.0);
    }
    Ok(trace.cells.iter().map(|c| c.energy).sum::<f64>() / trace.cells.len() as f64)
}

/// Arithmetic mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trailing moving average with a window of `w` (shorter at the start).
pub fn moving_average(values: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            values[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossbar::{CellStat, PhaseKind};

    #[test]
    fn perfect() {
        let m = metrics(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!((m.accuracy, m.macro_f1), (1.0, 1.0));
    }

    #[test]
    fn constant_predictor() {
        let labels = [0, 1, 2, 0, 1, 2];
        let m = metrics(&[0; 6], &labels, 3).unwrap();
        assert!((m.accuracy - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn known_binary_confusion() {
        // TP = 4, FN = 1, FP = 1, TN = 4 with class 1 as positive
        let labels = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let preds = [1, 1, 1, 1, 0, 1, 0, 0, 0, 0];
        let m = metrics(&preds, &labels, 2).unwrap();
        assert!((m.macro_f1 - 0.8).abs() < 1e-12);
        assert_eq!(m.confusion, vec![vec![4, 1], vec![1, 4]]);
    }

    #[test]
    fn length_mismatch() {
        assert!(metrics(&[0], &[0, 1], 2).is_err());
    }

    fn trace(energy: &[f64], physical: bool) -> PhaseTrace {
        PhaseTrace {
            kind: PhaseKind::Forward,
            rows: energy.len(),
            cols: 1,
            physical,
            cells: energy
                .iter()
                .map(|&e| CellStat {
                    energy: e,
                    ..CellStat::default()
                })
                .collect(),
            windows: vec![(0.16, -0.15); energy.len()],
            max_node_voltage: 0.0,
        }
    }

    #[test]
    fn energy_cases() {
        assert_eq!(energy_estimate(&trace(&[0.0, 0.0], true)).unwrap(), 0.0);
        let e = 0.1 * 1e-3 * 10e-6;
        assert!((energy_estimate(&trace(&[e], true)).unwrap() - 1e-9).abs() < 1e-24);
        assert!(energy_estimate(&trace(&[e], false)).is_err());
    }

    #[test]
    fn moving_average_window() {
        assert_eq!(moving_average(&[3.0, 1.0, 2.0], 2), vec![3.0, 2.0, 1.5]);
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}

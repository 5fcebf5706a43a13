//! Floating-point reference network: dense forward pass, backpropagation and
//! a central-difference gradient check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{output_error, sample_loss, target, Activation, Loss, Mode, Network, OutputFn};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("ragged matrix".into()));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.data.chunks(self.cols).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn t_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, &s) in self.data.chunks(self.cols).zip(v) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * s;
            }
        }
        out
    }

    /// `a·bᵀ`.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        let mut m = Matrix::zeros(a.len(), b.len());
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                m.data[i * b.len() + j] = x * y;
            }
        }
        m
    }

    /// Numerical rank via Gaussian elimination with partial pivoting.
    pub fn rank(&self, tol: f64) -> usize {
        let mut m = self.clone();
        let mut rank = 0;
        for c in 0..m.cols {
            if rank == m.rows {
                break;
            }
            let (p, best) = (rank..m.rows)
                .map(|r| (r, m.get(r, c).abs()))
                .fold((rank, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            if best <= tol {
                continue;
            }
            for k in 0..m.cols {
                m.data.swap(rank * m.cols + k, p * m.cols + k);
            }
            for r in rank + 1..m.rows {
                let f = m.get(r, c) / m.get(rank, c);
                for k in c..m.cols {
                    let v = m.get(rank, k);
                    *m.get_mut(r, k) -= f * v;
                }
            }
            rank += 1;
        }
        rank
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    /// Layer `k` maps `[bias; s·σ]` (or `[bias; x]`) to `r`, shape `m × (n+1)`.
    pub weights: Vec<Matrix>,
    pub activation: Activation,
    pub output: OutputFn,
    pub loss: Loss,
    pub eta: f64,
    pub bias_input: f64,
    pub hidden_scale: f64,
    pub tanh_delta: bool,
    /// Optional weight bounds applied after each update.
    pub clip: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OracleTrace {
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
    pub hidden: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl DenseNet {
    /// Floating-point twin of `net`: effective weights, the same constants
    /// and, for behavioral networks, the same weight bounds.
    pub fn mirror(net: &Network) -> Result<Self> {
        let cfg = net.config();
        let weights = net
            .effective_weights()
            .iter()
            .map(|w| Matrix::from_rows(w))
            .collect::<Result<Vec<_>>>()?;
        Ok(DenseNet {
            weights,
            activation: cfg.activation,
            output: cfg.output_fn(),
            loss: cfg.loss,
            eta: cfg.learning_rate,
            bias_input: cfg.bias_input,
            hidden_scale: cfg.hidden_scale,
            tanh_delta: cfg.tanh_delta,
            clip: (cfg.mode == Mode::Behavioral).then(|| net.weight_bounds()),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::InvalidParameter("no layers".into()));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta = {}", self.eta)));
        }
        for w in self.weights.windows(2) {
            if w[1].cols != w[0].rows + 1 {
                return Err(Error::Dimension {
                    expected: w[0].rows + 1,
                    got: w[1].cols,
                });
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, OracleTrace)> {
        let n0 = self.weights[0].cols - 1;
        if x.len() != n0 {
            return Err(Error::Dimension {
                expected: n0,
                got: x.len(),
            });
        }
        let mut tr = OracleTrace::default();
        let mut u: Vec<f64> = std::iter::once(self.bias_input).chain(x.iter().copied()).collect();
        let last = self.weights.len() - 1;
        for (k, w) in self.weights.iter().enumerate() {
            let r = w.mul_vec(&u);
            tr.inputs.push(u);
            if k < last {
                let s: Vec<f64> = r.iter().map(|&v| self.activation.apply(v)).collect();
                u = std::iter::once(self.bias_input)
                    .chain(s.iter().map(|v| v * self.hidden_scale))
                    .collect();
                tr.hidden.push(s);
            } else {
                tr.output = self.output.apply(&r);
                u = Vec::new();
            }
            tr.pre.push(r);
        }
        Ok((tr.output.clone(), tr))
    }

    pub fn loss(&self, x: &[f64], label: usize) -> Result<f64> {
        let (o, _) = self.forward(x)?;
        sample_loss(&o, label, self.output, self.loss)
    }

    /// Per-layer updates `ΔW^(k) = η·y^(k)·u^(k)ᵀ`.
    pub fn backprop(&self, x: &[f64], label: usize) -> Result<Vec<Matrix>> {
        let (o, tr) = self.forward(x)?;
        let d = target(o.len(), label, self.output)?;
        let mut y = output_error(&o, &d, self.output, self.loss);
        let mut out = vec![Matrix::zeros(0, 0); self.weights.len()];
        for k in (0..self.weights.len()).rev() {
            let mut dw = Matrix::outer(&y, &tr.inputs[k]);
            dw.data.iter_mut().for_each(|v| *v *= self.eta);
            if k > 0 {
                let back = self.weights[k].t_mul_vec(&y);
                y = back[1..]
                    .iter()
                    .zip(&tr.hidden[k - 1])
                    .map(|(&b, &s)| {
                        let delta = self.hidden_scale * b;
                        let delta = if self.tanh_delta { delta.tanh() } else { delta };
                        delta * self.activation.derivative(s)
                    })
                    .collect();
            }
            out[k] = dw;
        }
        Ok(out)
    }

    /// Applies one online update.
    pub fn step(&mut self, x: &[f64], label: usize) -> Result<()> {
        let dws = self.backprop(x, label)?;
        for (w, dw) in self.weights.iter_mut().zip(dws) {
            for (v, d) in w.data.iter_mut().zip(dw.data) {
                *v += d;
                if let Some((lo, hi)) = self.clip {
                    *v = v.clamp(lo, hi);
                }
            }
        }
        Ok(())
    }

    /// Largest relative discrepancy between the analytic gradient `−ΔW/η`
    /// and a central-difference estimate. Deltas must not be rescaled.
    pub fn grad_check(&self, x: &[f64], label: usize, eps: f64) -> Result<f64> {
        if !(1e-7..=1e-3).contains(&eps) {
            return Err(Error::InvalidParameter(format!("eps {eps} outside [1e-7, 1e-3]")));
        }
        if self.tanh_delta {
            return Err(Error::InvalidParameter(
                "gradient check needs exact deltas (tanh rescaling off)".into(),
            ));
        }
        let analytic = self.backprop(x, label)?;
        let mut probe = self.clone();
        let mut worst: f64 = 0.0;
        for k in 0..self.weights.len() {
            for idx in 0..self.weights[k].data.len() {
                let w0 = self.weights[k].data[idx];
                probe.weights[k].data[idx] = w0 + eps;
                let lp = probe.loss(x, label)?;
                probe.weights[k].data[idx] = w0 - eps;
                let lm = probe.loss(x, label)?;
                probe.weights[k].data[idx] = w0;
                let fd = (lp - lm) / (2.0 * eps);
                let an = -analytic[k].data[idx] / self.eta;
                let denom = fd.abs().max(an.abs()).max(1e-6);
                worst = worst.max((fd - an).abs() / denom);
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(weights: Vec<Matrix>, act: Activation) -> DenseNet {
        DenseNet {
            weights,
            activation: act,
            output: OutputFn::Softmax,
            loss: Loss::CrossEntropy,
            eta: 0.5,
            bias_input: 0.2,
            hidden_scale: 0.2,
            tanh_delta: false,
            clip: None,
        }
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let n = net(vec![Matrix::zeros(3, 3), Matrix::zeros(4, 4)], Activation::Tanh);
        let (o, _) = n.forward(&[0.3, -0.1]).unwrap();
        assert!(o.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn hand_computed_unit_weights() {
        let ones = |r, c| Matrix::from_rows(&vec![vec![1.0; c]; r]).unwrap();
        let n = net(vec![ones(2, 3), ones(2, 3)], Activation::Sigmoid);
        let (o, tr) = n.forward(&[0.1, 0.1]).unwrap();
        // r1 = 0.2 + 0.1 + 0.1 = 0.4 for both hidden units
        let s = 1.0 / (1.0 + (-0.4f64).exp());
        assert!((tr.hidden[0][0] - s).abs() < 1e-15);
        // r2 = 0.2 + 2·0.2·s for both outputs, so the softmax is uniform
        assert!((tr.pre[1][0] - (0.2 + 0.4 * s)).abs() < 1e-15);
        assert!((o[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perfect_output_means_no_update() {
        let mut w = Matrix::zeros(2, 3);
        *w.get_mut(0, 0) = 1e4;
        *w.get_mut(1, 0) = -1e4;
        let n = net(vec![w], Activation::Linear);
        let dws = n.backprop(&[0.1, 0.1], 0).unwrap();
        assert!(dws[0].data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rank_of_outer_product() {
        let m = Matrix::outer(&[1.0, -2.0, 0.5], &[0.2, 0.3]);
        assert_eq!(m.rank(1e-12), 1);
        let eye = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(eye.rank(1e-12), 2);
    }

    #[test]
    fn grad_check_rejects_bad_eps() {
        let n = net(vec![Matrix::zeros(2, 3)], Activation::Linear);
        assert!(n.grad_check(&[0.1, 0.1], 0, 1e-2).is_err());
        assert!(n.grad_check(&[0.1, 0.1], 0, 1e-9).is_err());
    }

    #[test]
    fn grad_check_linear_net() {
        let w = Matrix::from_rows(&[vec![0.3, -0.5, 0.8], vec![0.1, 0.4, -0.2]]).unwrap();
        let n = net(vec![w], Activation::Linear);
        assert!(n.grad_check(&[0.15, -0.1], 1, 1e-5).unwrap() < 1e-6);
    }

    #[test]
    fn grad_check_tanh_hidden() {
        let w1 = Matrix::from_rows(&(0..4).map(|i| (0..5).map(|j| ((i * 5 + j) as f64 * 0.37).sin()).collect()).collect::<Vec<_>>()).unwrap();
        let w2 = Matrix::from_rows(&(0..3).map(|i| (0..5).map(|j| ((i * 7 + j) as f64 * 0.53).cos()).collect()).collect::<Vec<_>>()).unwrap();
        let n = net(vec![w1, w2], Activation::Tanh);
        assert!(n.grad_check(&[0.2, -0.1, 0.05, 0.15], 2, 1e-5).unwrap() < 1e-4);
    }
}

//! Memristive crossbar: an `(n+1) × m` grid of cells with a reference
//! conductance `G`, feedback resistance `R0` and one switch per column.
//! Row 0 is the bias row.
//!
//! Cell voltage is `v_row − v_col`. Cells are mounted so that a positive cell
//! voltage raises conductance whatever the device polarity.

use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::{device_current, drive, step_state, DeviceCharacterization, MemristorParams};
use crate::error::{Error, Result};
use crate::waveform::{
    encode_backward, encode_read, encode_update, switch_schedule, EncodingConstants, Switch, Timing,
    Waveform,
};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Switch conductance when OFF (S).
pub const GS_OFF: f64 = 1e-9;

/// Smallest ON conductance used regardless of array size (S).
pub const GS_ON_FLOOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultPlan {
    pub fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseKind {
    Forward,
    Backward,
    Write,
}

/// Per-cell record of one phase.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CellStat {
    /// Whether the cell counts for the sneak-path audit (all cells during a
    /// read, cells of an OFF column during a write).
    pub monitored: bool,
    pub v_max: f64,
    pub v_min: f64,
    /// `∫ v·i dt` over the phase (J).
    pub energy: f64,
}

impl CellStat {
    fn observe(&mut self, v: f64, monitored: bool) {
        if monitored {
            self.monitored = true;
            self.v_max = self.v_max.max(v);
            self.v_min = self.v_min.min(v);
        }
    }
}

/// Recorded cell voltages and energies of one read or write phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub kind: PhaseKind,
    pub rows: usize,
    pub cols: usize,
    /// False for behavioral-mode phases, which carry no currents.
    pub physical: bool,
    /// Column-major, like the crossbar.
    pub cells: Vec<CellStat>,
    /// Threshold window of each cell in cell orientation.
    pub windows: Vec<(f64, f64)>,
    /// Largest |node voltage| at a virtual-ground node.
    pub max_node_voltage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub kind: PhaseKind,
    pub monitored: usize,
    pub violations: usize,
    pub max_abs_voltage: f64,
    pub pass: bool,
}

/// Checks that every monitored cell stayed inside its own threshold window.
pub fn sneak_path_audit(trace: &PhaseTrace) -> AuditReport {
    let mut report = AuditReport {
        kind: trace.kind,
        monitored: 0,
        violations: 0,
        max_abs_voltage: 0.0,
        pass: true,
    };
    for (c, &(pos, neg)) in trace.cells.iter().zip(&trace.windows) {
        if !c.monitored {
            continue;
        }
        report.monitored += 1;
        report.max_abs_voltage = report.max_abs_voltage.max(c.v_max.abs()).max(c.v_min.abs());
        if c.v_max > pos || c.v_min < neg {
            report.violations += 1;
        }
    }
    report.pass = report.violations == 0;
    report
}

/// Geometry and circuit constants of a crossbar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossbarSpec {
    pub rows: usize,
    pub cols: usize,
    /// Reference conductance `G` (S).
    pub g_ref: f64,
    /// Feedback resistance (Ω).
    pub r0: f64,
    /// Input voltage scale (V per unit).
    pub a: f64,
    /// Bounds applied by behavioral writes (S).
    pub g_clip: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossbar {
    spec: CrossbarSpec,
    ch: DeviceCharacterization,
    gs_on: f64,
    gs_off: f64,
    /// Parameter table; index 0 holds the nominal set.
    params: Vec<MemristorParams>,
    variant: Vec<u8>,
    state: Vec<f64>,
    stuck: Vec<bool>,
}

fn i_cell(p: &MemristorParams, x: f64, v_cell: f64) -> f64 {
    p.eta * device_current(p, x, p.orient(v_cell))
}

impl Crossbar {
    /// All cells start at `G_ref`.
    pub fn new(spec: CrossbarSpec, params: MemristorParams, ch: DeviceCharacterization) -> Result<Self> {
        params.validate()?;
        if spec.rows == 0 || spec.cols == 0 {
            return Err(Error::InvalidParameter("crossbar must have at least one row and column".into()));
        }
        for (name, v) in [("g_ref", spec.g_ref), ("r0", spec.r0), ("a", spec.a)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v}")));
            }
        }
        if !(spec.g_clip.0 < spec.g_clip.1) {
            return Err(Error::InvalidParameter("empty conductance clip range".into()));
        }
        let n = spec.rows * spec.cols;
        let x0 = params.state_for_conductance(spec.g_ref);
        let span = spec.rows.max(spec.cols) + 1;
        let gs_on = GS_ON_FLOOR.max(1e4 * ch.g_abs_max * span as f64);
        Ok(Crossbar {
            spec,
            ch,
            gs_on,
            gs_off: GS_OFF,
            params: vec![params],
            variant: vec![0; n],
            state: vec![x0; n],
            stuck: vec![false; n],
        })
    }

    pub fn spec(&self) -> &CrossbarSpec {
        &self.spec
    }

    pub fn rows(&self) -> usize {
        self.spec.rows
    }

    pub fn cols(&self) -> usize {
        self.spec.cols
    }

    pub fn characterization(&self) -> &DeviceCharacterization {
        &self.ch
    }

    pub fn switch_conductances(&self) -> (f64, f64) {
        (self.gs_on, self.gs_off)
    }

    pub fn set_switch_conductances(&mut self, on: f64, off: f64) -> Result<()> {
        let span = (self.spec.rows.max(self.spec.cols) + 1) as f64;
        if on < 1e3 * self.ch.g_abs_max * span || off > 1e-3 * self.ch.g_abs_min || off <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "switch conductances ON {on} S / OFF {off} S violate the isolation bounds"
            )));
        }
        self.gs_on = on;
        self.gs_off = off;
        Ok(())
    }

    /// Sets the switch conductances without checking the isolation bounds.
    /// Only useful for negative controls of the sneak-path audit.
    pub fn force_switch_conductances(&mut self, on: f64, off: f64) {
        self.gs_on = on;
        self.gs_off = off;
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.spec.rows + i
    }

    fn check(&self, i: usize, j: usize) -> Result<usize> {
        if i >= self.spec.rows || j >= self.spec.cols {
            return Err(Error::Index {
                row: i,
                col: j,
                rows: self.spec.rows,
                cols: self.spec.cols,
            });
        }
        Ok(self.idx(i, j))
    }

    #[inline]
    fn cell_params(&self, k: usize) -> &MemristorParams {
        &self.params[self.variant[k] as usize]
    }

    #[inline]
    fn g_at(&self, k: usize) -> f64 {
        self.cell_params(k).conductance(self.state[k])
    }

    pub fn params_of(&self, i: usize, j: usize) -> Result<&MemristorParams> {
        let k = self.check(i, j)?;
        Ok(self.cell_params(k))
    }

    pub fn state(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.state[self.check(i, j)?])
    }

    /// Small-signal conductance of cell `(i, j)`.
    pub fn conductance(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.g_at(self.check(i, j)?))
    }

    pub fn set_conductance(&mut self, i: usize, j: usize, g: f64) -> Result<()> {
        let k = self.check(i, j)?;
        self.state[k] = self.cell_params(k).state_for_conductance(g);
        Ok(())
    }

    pub fn is_stuck(&self, i: usize, j: usize) -> Result<bool> {
        Ok(self.stuck[self.check(i, j)?])
    }

    pub fn stuck_count(&self) -> usize {
        self.stuck.iter().filter(|&&s| s).count()
    }

    /// Conductances in row-major order.
    pub fn conductances(&self) -> Vec<f64> {
        let (r, c) = (self.spec.rows, self.spec.cols);
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                out.push(self.g_at(self.idx(i, j)));
            }
        }
        out
    }

    /// `w_ji = a·R0·(G − G_ji)`.
    pub fn weight_of(&self, j: usize, i: usize) -> Result<f64> {
        let k = self.check(i, j)?;
        Ok(self.weight_at(k))
    }

    #[inline]
    fn weight_at(&self, k: usize) -> f64 {
        self.spec.a * self.spec.r0 * (self.spec.g_ref - self.g_at(k))
    }

    /// Weight matrix, `cols × rows`.
    pub fn weights(&self) -> Vec<Vec<f64>> {
        (0..self.spec.cols)
            .map(|j| (0..self.spec.rows).map(|i| self.weight_at(self.idx(i, j))).collect())
            .collect()
    }

    /// Draws every healthy cell uniformly in the conductance range `[lo, hi]`.
    pub fn initialize_uniform<R: Rng>(&mut self, lo: f64, hi: f64, rng: &mut R) -> Result<()> {
        for k in 0..self.state.len() {
            let p = self.cell_params(k);
            let g_max = p.a1 * p.b;
            if !(0.0 <= lo && lo <= hi && hi <= g_max) {
                return Err(Error::InvalidParameter(format!(
                    "init range [{lo:e}, {hi:e}] S outside device bounds [0, {g_max:e}] S"
                )));
            }
        }
        for k in 0..self.state.len() {
            let g = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            if !self.stuck[k] {
                self.state[k] = self.cell_params(k).state_for_conductance(g);
            }
        }
        Ok(())
    }

    /// Marks `round(fraction · cells)` uniformly chosen cells as stuck at
    /// their present conductance. Returns the chosen `(row, col)` pairs.
    pub fn inject_faults(&mut self, plan: &FaultPlan) -> Result<Vec<(usize, usize)>> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(plan.seed);
        self.inject_faults_with(plan.fraction, &mut rng)
    }

    pub fn inject_faults_with<R: Rng>(&mut self, fraction: f64, rng: &mut R) -> Result<Vec<(usize, usize)>> {
        let picked = self.pick_cells(fraction, rng)?;
        for &k in &picked {
            self.stuck[k] = true;
        }
        Ok(self.coords(&picked))
    }

    /// Swaps `params` into `round(fraction · cells)` uniformly chosen cells,
    /// keeping their conductance.
    pub fn apply_variation<R: Rng>(
        &mut self,
        params: MemristorParams,
        fraction: f64,
        rng: &mut R,
    ) -> Result<Vec<(usize, usize)>> {
        params.validate()?;
        let picked = self.pick_cells(fraction, rng)?;
        let id = self.params.len();
        if id > u8::MAX as usize {
            return Err(Error::InvalidParameter("too many parameter variants".into()));
        }
        self.params.push(params);
        for &k in &picked {
            let g = self.g_at(k);
            self.variant[k] = id as u8;
            if !self.stuck[k] {
                self.state[k] = params.state_for_conductance(g);
            }
        }
        Ok(self.coords(&picked))
    }

    fn pick_cells<R: Rng>(&self, fraction: f64, rng: &mut R) -> Result<Vec<usize>> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidParameter(format!("fraction {fraction} outside [0, 1]")));
        }
        let n = self.state.len();
        let k = (fraction * n as f64).round() as usize;
        let mut picked = sample(rng, n, k).into_vec();
        picked.sort_unstable();
        Ok(picked)
    }

    fn coords(&self, ks: &[usize]) -> Vec<(usize, usize)> {
        ks.iter().map(|&k| (k % self.spec.rows, k / self.spec.rows)).collect()
    }

    fn new_trace(&self, kind: PhaseKind, physical: bool) -> PhaseTrace {
        PhaseTrace {
            kind,
            rows: self.spec.rows,
            cols: self.spec.cols,
            physical,
            cells: vec![CellStat::default(); self.state.len()],
            windows: (0..self.state.len())
                .map(|k| self.cell_params(k).cell_thresholds())
                .collect(),
            max_node_voltage: 0.0,
        }
    }

    fn dims(&self, u: &[f64], expected: usize) -> Result<()> {
        if u.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Dense `W·u`.
    pub fn forward_ideal(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.dims(u, self.spec.rows)?;
        let rows = self.spec.rows;
        Ok((0..self.spec.cols)
            .map(|j| (0..rows).map(|i| self.weight_at(j * rows + i) * u[i]).sum())
            .collect())
    }

    /// Dense `Wᵀ·y`.
    pub fn backward_ideal(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.dims(y, self.spec.cols)?;
        let rows = self.spec.rows;
        Ok((0..rows)
            .map(|i| (0..self.spec.cols).map(|j| self.weight_at(j * rows + i) * y[j]).sum())
            .collect())
    }

    /// Simulated forward read. Row `i` is driven at `a·u_i` for `T_rd`; each
    /// column node is held near ground by its ON switch and the column output
    /// is `−R0` times the node current.
    pub fn forward_read(&mut self, u: &[f64], t: &Timing, trace: Option<&mut PhaseTrace>) -> Result<Vec<f64>> {
        self.dims(u, self.spec.rows)?;
        let enc = self.read_encoding();
        let v: Vec<f64> = u
            .iter()
            .map(|&x| encode_read(x, &enc, t, &self.ch)?.sample(0.0))
            .collect::<Result<_>>()?;
        let (rows, cols) = (self.spec.rows, self.spec.cols);
        let v_f: f64 = -v.iter().sum::<f64>();
        let g = self.spec.g_ref;
        let mut local = trace.is_some().then(|| self.new_trace(PhaseKind::Forward, true));
        let mut out = vec![0.0; cols];
        for j in 0..cols {
            let base = j * rows;
            let (num, den) = (0..rows).fold((v_f * g, self.gs_on + g), |(n, d), i| {
                let gi = self.g_at(base + i);
                (n + v[i] * gi, d + gi)
            });
            let node = num / den;
            let mut current = g * (v_f - node);
            for i in 0..rows {
                let k = base + i;
                let vc = v[i] - node;
                let p = &self.params[self.variant[k] as usize];
                let ic = i_cell(p, self.state[k], vc);
                current += ic;
                if let Some(tr) = local.as_mut() {
                    tr.cells[k].observe(vc, true);
                    tr.cells[k].energy += vc * ic * t.t_rd;
                }
                if !self.stuck[k] {
                    self.state[k] = step_state(p, self.state[k], p.orient(vc), t.t_rd);
                }
            }
            if let Some(tr) = local.as_mut() {
                tr.max_node_voltage = tr.max_node_voltage.max(node.abs());
            }
            out[j] = -self.spec.r0 * current;
        }
        if let (Some(dst), Some(src)) = (trace, local) {
            *dst = src;
        }
        Ok(out)
    }

    /// Simulated backward read: columns driven at `a·y_j`, row nodes held
    /// near ground, row outputs `δ_i = Σ_j w_ji·y_j`.
    pub fn backward_read(&mut self, y: &[f64], t: &Timing, trace: Option<&mut PhaseTrace>) -> Result<Vec<f64>> {
        self.dims(y, self.spec.cols)?;
        let enc = self.read_encoding();
        let v: Vec<f64> = y
            .iter()
            .map(|&e| encode_backward(e, &enc, t, &self.ch)?.sample(t.t_rd))
            .collect::<Result<_>>()?;
        let (rows, cols) = (self.spec.rows, self.spec.cols);
        let v_b: f64 = -v.iter().sum::<f64>();
        let g = self.spec.g_ref;
        let mut local = trace.is_some().then(|| self.new_trace(PhaseKind::Backward, true));
        let mut out = vec![0.0; rows];
        for i in 0..rows {
            let (num, den) = (0..cols).fold((v_b * g, self.gs_on + g), |(n, d), j| {
                let gi = self.g_at(j * rows + i);
                (n + v[j] * gi, d + gi)
            });
            let node = num / den;
            let mut current = g * (v_b - node);
            for j in 0..cols {
                let k = j * rows + i;
                // cell voltage is row minus column
                let vc = node - v[j];
                let p = &self.params[self.variant[k] as usize];
                let ic = i_cell(p, self.state[k], vc);
                current -= ic;
                if let Some(tr) = local.as_mut() {
                    tr.cells[k].observe(vc, true);
                    tr.cells[k].energy += vc * ic * t.t_rd;
                }
                if !self.stuck[k] {
                    self.state[k] = step_state(p, self.state[k], p.orient(vc), t.t_rd);
                }
            }
            if let Some(tr) = local.as_mut() {
                tr.max_node_voltage = tr.max_node_voltage.max(node.abs());
            }
            out[i] = -self.spec.r0 * current;
        }
        if let (Some(dst), Some(src)) = (trace, local) {
            *dst = src;
        }
        Ok(out)
    }

    fn read_encoding(&self) -> EncodingConstants {
        EncodingConstants {
            a: self.spec.a,
            kappa_inc: 0.0,
            kappa_dec: 0.0,
        }
    }

    /// Row drive waveforms for a write with inputs `u`.
    pub fn row_waveforms(&self, u: &[f64], t: &Timing, enc: &EncodingConstants) -> Result<Vec<Waveform<f64>>> {
        self.dims(u, self.spec.rows)?;
        u.iter().map(|&x| encode_update(x, enc, t, &self.ch)).collect()
    }

    /// Column switch schedules for a write with errors `y`.
    pub fn column_schedules(&self, y: &[f64], t: &Timing, enc: &EncodingConstants) -> Result<Vec<Waveform<Switch>>> {
        self.dims(y, self.spec.cols)?;
        y.iter().map(|&e| switch_schedule(e, enc, t, &self.ch)).collect()
    }

    /// Time-domain write phase. Every column is simulated independently:
    /// the column node follows the nodal balance with the feedback node at
    /// ground and the switch at its present conductance.
    pub fn write_phase(
        &mut self,
        u: &[f64],
        y: &[f64],
        t: &Timing,
        enc: &EncodingConstants,
        trace: Option<&mut PhaseTrace>,
    ) -> Result<()> {
        t.validate()?;
        enc.validate(t, &self.ch)?;
        if y.iter().any(|v| !v.is_finite()) || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("write input"));
        }
        let row_w = self.row_waveforms(u, t, enc)?;
        let col_w = self.column_schedules(y, t, enc)?;
        let rows = self.spec.rows;
        let mut local = trace.is_some().then(|| self.new_trace(PhaseKind::Write, true));

        let ctx = WriteContext {
            rows: &row_w,
            params: &self.params,
            g_ref: self.spec.g_ref,
            gs_on: self.gs_on,
            gs_off: self.gs_off,
            dt: t.dt,
        };
        let variant = &self.variant;
        let stuck = &self.stuck;

        let tracing = local.is_some();
        let run = |(j, x): (usize, &mut [f64])| {
            let k0 = j * rows;
            let mut st = tracing.then(|| vec![CellStat::default(); rows]);
            let node = ctx.column(
                &col_w[j],
                x,
                &variant[k0..k0 + rows],
                &stuck[k0..k0 + rows],
                st.as_deref_mut(),
            );
            (node, st)
        };

        #[cfg(feature = "parallel")]
        let results: Vec<(f64, Option<Vec<CellStat>>)> =
            self.state.par_chunks_mut(rows).enumerate().map(run).collect();
        #[cfg(not(feature = "parallel"))]
        let results: Vec<(f64, Option<Vec<CellStat>>)> =
            self.state.chunks_mut(rows).enumerate().map(run).collect();

        let node_max = results.iter().map(|r| r.0).fold(0.0, f64::max);
        if let Some(tr) = local.as_mut() {
            for (j, (_, st)) in results.into_iter().enumerate() {
                if let Some(st) = st {
                    tr.cells[j * rows..(j + 1) * rows].copy_from_slice(&st);
                }
            }
        }
        if let Some(tr) = local.as_mut() {
            tr.max_node_voltage = node_max;
        }
        if let (Some(dst), Some(src)) = (trace, local) {
            *dst = src;
        }
        Ok(())
    }

    /// Applies `ΔG_ji = −(eta_eff/(a·R0))·u_i·y_j` directly, clipped to the
    /// configured bounds. Stuck cells are left alone.
    pub fn write_phase_behavioral(&mut self, u: &[f64], y: &[f64], eta_eff: f64) -> Result<()> {
        self.dims(u, self.spec.rows)?;
        self.dims(y, self.spec.cols)?;
        if !(eta_eff.is_finite() && eta_eff > 0.0) {
            return Err(Error::InvalidParameter(format!("eta_eff = {eta_eff}")));
        }
        let scale = eta_eff / (self.spec.a * self.spec.r0);
        let (lo, hi) = self.spec.g_clip;
        let rows = self.spec.rows;
        for (j, &yj) in y.iter().enumerate() {
            if yj == 0.0 {
                continue;
            }
            for (i, &ui) in u.iter().enumerate() {
                let k = j * rows + i;
                if self.stuck[k] || ui == 0.0 {
                    continue;
                }
                let p = &self.params[self.variant[k] as usize];
                let g = p.conductance(self.state[k]);
                let g_new = (g - scale * ui * yj).clamp(lo, hi);
                self.state[k] = p.state_for_conductance(g_new);
            }
        }
        Ok(())
    }

    /// Writes `row,col,conductance,fault` lines.
    pub fn write_snapshot_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["row", "col", "conductance", "fault"]).map_err(io)?;
        for i in 0..self.spec.rows {
            for j in 0..self.spec.cols {
                let k = self.idx(i, j);
                w.write_record([
                    i.to_string(),
                    j.to_string(),
                    format!("{:e}", self.g_at(k)),
                    (if self.stuck[k] { "stuck" } else { "healthy" }).to_string(),
                ])
                .map_err(io)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

struct WriteContext<'a> {
    rows: &'a [Waveform<f64>],
    params: &'a [MemristorParams],
    g_ref: f64,
    gs_on: f64,
    gs_off: f64,
    dt: f64,
}

impl WriteContext<'_> {
    /// Integrates one column over the write phase. Returns the largest
    /// |column node voltage| seen while the switch was ON.
    fn column(
        &self,
        schedule: &Waveform<Switch>,
        x: &mut [f64],
        variant: &[u8],
        stuck: &[bool],
        mut stats: Option<&mut [CellStat]>,
    ) -> f64 {
        let mut breaks: Vec<f64> = schedule
            .segments()
            .iter()
            .map(|s| s.start)
            .chain(std::iter::once(schedule.end()))
            .collect();
        for w in self.rows {
            breaks.extend(w.segments().iter().map(|s| s.start));
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let n = x.len();
        let mut v_row = vec![0.0; n];
        let mut node_max: f64 = 0.0;
        for win in breaks.windows(2) {
            let (t0, t1) = (win[0], win[1]);
            let on = schedule.sample(t0).unwrap_or(false);
            for (i, w) in self.rows.iter().enumerate() {
                v_row[i] = w.sample(t0).unwrap_or(0.0);
            }
            let gs = if on { self.gs_on } else { self.gs_off };
            let len = t1 - t0;
            let steps = ((len / self.dt) - 1e-9).ceil().max(1.0) as usize;
            let h = len / steps as f64;
            for step in 0..steps {
                let (num, den) = (0..n).fold((0.0, gs + self.g_ref), |(a, b), i| {
                    let gi = self.params[variant[i] as usize].conductance(x[i]);
                    (a + v_row[i] * gi, b + gi)
                });
                let node = num / den;
                if on {
                    node_max = node_max.max(node.abs());
                }
                let mut moving = false;
                for i in 0..n {
                    let p = &self.params[variant[i] as usize];
                    let vc = v_row[i] - node;
                    if let Some(st) = stats.as_deref_mut() {
                        st[i].observe(vc, !on);
                    }
                    if stuck[i] || drive(p, p.orient(vc)) == 0.0 {
                        continue;
                    }
                    moving = true;
                    x[i] = step_state(p, x[i], p.orient(vc), h);
                }
                if let Some(st) = stats.as_deref_mut() {
                    // energy of this sub-step, or of the rest of the interval
                    // when nothing moves and the voltages stay fixed
                    let span = if moving { h } else { h * (steps - step) as f64 };
                    for i in 0..n {
                        let p = &self.params[variant[i] as usize];
                        let vc = v_row[i] - node;
                        st[i].energy += vc * i_cell(p, x[i], vc) * span;
                    }
                }
                if !moving {
                    break;
                }
            }
        }
        node_max
    }
}

/// Finds per-direction `kappa` so that a unit error and an input of `u_cal`
/// move a cell at `G_ref` by `(eta_eff/(a·R0))·u_cal` in either direction.
pub fn calibrate_kappa(
    params: &MemristorParams,
    ch: &DeviceCharacterization,
    spec: &CrossbarSpec,
    eta_eff: f64,
    u_cal: f64,
    t: &Timing,
) -> Result<EncodingConstants> {
    let target = eta_eff / (spec.a * spec.r0) * u_cal;
    let single = CrossbarSpec {
        rows: 1,
        cols: 1,
        ..*spec
    };
    // ΔG magnitude after an ON pulse of length tau in one direction
    let delta = |tau: f64, raise: bool| -> Result<f64> {
        let mut cb = Crossbar::new(single, *params, *ch)?;
        let c = if raise { ch.c1.abs() } else { ch.c2.abs() };
        let enc = EncodingConstants {
            a: spec.a,
            kappa_inc: if raise { tau / c } else { 0.0 },
            kappa_dec: if raise { 0.0 } else { tau / c },
        };
        let g0 = cb.g_at(0);
        let y = if raise { -1.0 } else { 1.0 };
        cb.write_phase(&[u_cal], &[y], t, &enc, None)?;
        Ok((cb.g_at(0) - g0).abs())
    };
    let quarter = t.quarter();
    let solve = |raise: bool| -> Result<f64> {
        let full = delta(quarter, raise)?;
        if full < target {
            return Err(Error::Timing(format!(
                "a full quarter moves the cell by {full:e} S, below the requested step {target:e} S"
            )));
        }
        // ΔG(τ) is increasing and nearly linear: secant from the origin
        let (mut lo, mut hi) = (0.0, quarter);
        let (mut f_lo, mut f_hi) = (-target, full - target);
        let mut tau = quarter * target / full;
        for _ in 0..60 {
            let f = delta(tau, raise)? - target;
            if f.abs() <= 1e-9 * target {
                break;
            }
            if f < 0.0 {
                lo = tau;
                f_lo = f;
            } else {
                hi = tau;
                f_hi = f;
            }
            tau = lo - f_lo * (hi - lo) / (f_hi - f_lo);
            if !(tau > lo && tau < hi) {
                tau = 0.5 * (lo + hi);
            }
        }
        Ok(tau)
    };
    let tau_inc = solve(true)?;
    let tau_dec = solve(false)?;
    Ok(EncodingConstants {
        a: spec.a,
        kappa_inc: tau_inc / ch.c1.abs(),
        kappa_dec: tau_dec / ch.c2.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{characterize, ModelId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn silver() -> (MemristorParams, DeviceCharacterization) {
        let p = MemristorParams::silver();
        (p, characterize(&p, &ModelId::Silver.calibration_pulse()).unwrap())
    }

    fn spec(rows: usize, cols: usize) -> CrossbarSpec {
        CrossbarSpec {
            rows,
            cols,
            g_ref: 4.78e-3,
            r0: 1000.0,
            a: 0.6,
            g_clip: (3.18e-3, 6.38e-3),
        }
    }

    #[test]
    fn weight_zero_at_reference() {
        let (p, ch) = silver();
        let cb = Crossbar::new(spec(2, 2), p, ch).unwrap();
        assert!(cb.weight_of(1, 1).unwrap().abs() < 1e-12);
        assert!(cb.weight_of(2, 0).is_err());
    }

    #[test]
    fn weight_arithmetic() {
        let (p, ch) = silver();
        let mut cb = Crossbar::new(spec(1, 1), p, ch).unwrap();
        cb.set_conductance(0, 0, 3.78e-3).unwrap();
        assert!((cb.weight_of(0, 0).unwrap() - 0.6).abs() < 1e-12);
        let r = cb.forward_read(&[0.2], &Timing::default(), None).unwrap();
        assert!((r[0] - 0.12).abs() < 1e-4, "{r:?}");
        let d = cb.backward_read(&[0.1], &Timing::default(), None).unwrap();
        assert!((d[0] - 0.06).abs() < 1e-4, "{d:?}");
    }

    #[test]
    fn zero_error_leaves_crossbar() {
        let (p, ch) = silver();
        let mut cb = Crossbar::new(spec(3, 2), p, ch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        cb.initialize_uniform(4.4e-3, 5.0e-3, &mut rng).unwrap();
        let before = cb.clone();
        let enc = EncodingConstants {
            a: 0.6,
            kappa_inc: 1e-6,
            kappa_dec: 1e-6,
        };
        cb.write_phase(&[0.2, 0.1, -0.1], &[0.0, 0.0], &Timing::default(), &enc, None)
            .unwrap();
        assert_eq!(cb, before);
        cb.write_phase_behavioral(&[0.0, 0.0, 0.0], &[0.3, 0.2], 1.0).unwrap();
        assert_eq!(cb, before);
    }

    #[test]
    fn behavioral_formula() {
        let (p, ch) = silver();
        let mut s = spec(1, 1);
        s.a = 1.0;
        s.r0 = 1.0;
        s.g_clip = (-1.0, 1.0);
        let mut params = p;
        params.a1 = 20.0;
        params.b = 0.05;
        let mut cb = Crossbar::new(s, params, ch).unwrap();
        cb.set_conductance(0, 0, 0.5).unwrap();
        cb.write_phase_behavioral(&[0.2], &[0.1], 1.0).unwrap();
        assert!((cb.conductance(0, 0).unwrap() - 0.48).abs() < 1e-12);
    }

    #[test]
    fn fault_counts() {
        let (p, ch) = silver();
        let mut cb = Crossbar::new(spec(5, 4), p, ch).unwrap();
        let got = cb.inject_faults(&FaultPlan { fraction: 0.1, seed: 3 }).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(cb.stuck_count(), 2);
        let mut cb = Crossbar::new(spec(5, 4), p, ch).unwrap();
        assert!(cb.inject_faults(&FaultPlan { fraction: 0.0, seed: 3 }).unwrap().is_empty());
        assert!(cb.inject_faults(&FaultPlan { fraction: 1.5, seed: 3 }).is_err());
    }

    #[test]
    fn full_faults_freeze_everything() {
        let (p, ch) = silver();
        let mut cb = Crossbar::new(spec(3, 2), p, ch).unwrap();
        cb.inject_faults(&FaultPlan { fraction: 1.0, seed: 0 }).unwrap();
        let before = cb.clone();
        let enc = EncodingConstants {
            a: 0.6,
            kappa_inc: 20e-6,
            kappa_dec: 60e-6,
        };
        cb.write_phase(&[0.2, 0.15, -0.2], &[0.9, -0.8], &Timing::default(), &enc, None)
            .unwrap();
        cb.write_phase_behavioral(&[0.2, 0.15, -0.2], &[0.9, -0.8], 1.0).unwrap();
        assert_eq!(cb, before);
    }

    #[test]
    fn snapshot_has_every_cell() {
        let (p, ch) = silver();
        let cb = Crossbar::new(spec(3, 2), p, ch).unwrap();
        let mut buf = Vec::new();
        cb.write_snapshot_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().nth(1).unwrap().starts_with("0,0,4.78e-3,healthy"));
    }

    #[test]
    fn switch_bounds_enforced() {
        let (p, ch) = silver();
        let mut cb = Crossbar::new(spec(3, 2), p, ch).unwrap();
        let (on, off) = cb.switch_conductances();
        assert!(on >= 1e3 * ch.g_abs_max * 4.0 && off <= 1e-3 * ch.g_abs_min);
        assert!(cb.set_switch_conductances(1.0, 1e-9).is_err());
    }

    #[test]
    fn kappa_calibration_hits_target() {
        let (p, ch) = silver();
        let s = spec(1, 1);
        let t = Timing::default();
        let eta_eff = 0.05;
        let enc = calibrate_kappa(&p, &ch, &s, eta_eff, 0.1, &t).unwrap();
        let target = eta_eff / (0.6 * 1000.0) * 0.1;
        for y in [1.0, -1.0] {
            let mut cb = Crossbar::new(s, p, ch).unwrap();
            cb.write_phase(&[0.1], &[y], &t, &enc, None).unwrap();
            let dg = cb.conductance(0, 0).unwrap() - 4.78e-3;
            assert!((dg.abs() - target).abs() < 1e-6 * target, "{dg} vs {target}");
            assert_eq!(dg < 0.0, y > 0.0);
        }
    }
}

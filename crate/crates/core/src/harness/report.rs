//! Report files of runs and experiments.
//!
//! A run directory holds `cost.csv`, `metrics.txt`, `conductance_{layer}.csv`
//! and `report.txt`, plus `steps.csv` and `waveforms_{layer}.csv` when those
//! traces are enabled.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{Mode, Network};

use super::experiment::{ExperimentOutcome, RunOutcome, Summary, TrainReport};

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_cost<W: Write>(cost: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "mean_loss"]).map_err(csv_err)?;
    for (e, c) in cost.iter().enumerate() {
        w.write_record([(e + 1).to_string(), c.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Plain `key: value` lines.
pub fn metrics_text(r: &TrainReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "run: {}", r.run);
    let _ = writeln!(s, "test_accuracy: {}", r.test.accuracy);
    let _ = writeln!(s, "test_macro_f1: {}", r.test.macro_f1);
    let _ = writeln!(s, "test_samples: {}", r.test_samples);
    let _ = writeln!(s, "train_accuracy: {}", r.train_accuracy);
    if let Some(c) = r.cost.last() {
        let _ = writeln!(s, "final_loss: {c}");
    }
    let _ = writeln!(s, "stuck_cells: {}", r.stuck_cells);
    let _ = writeln!(s, "varied_cells: {}", r.varied_cells);
    if let Some(a) = r.audit {
        let verdict = if a.pass() { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "sneak_audit: {verdict} ({} phases, {} failed, max |v| {} V)",
            a.phases, a.failed, a.max_abs_voltage
        );
    }
    if let Some(e) = r.energy_per_synapse_step {
        let _ = writeln!(s, "energy_per_synapse_step_j: {e}");
    }
    if let Some(e) = r.energy_per_step {
        let _ = writeln!(s, "energy_per_step_j: {e}");
    }
    s.push_str("confusion:\n");
    for row in &r.test.confusion {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "  {}", cells.join(" "));
    }
    s
}

/// The resolved configuration followed by derived constants.
pub fn report_text(run: &RunOutcome) -> Result<String> {
    let mut s = run.config.to_toml()?;
    let net = &run.network;
    let ch = net.profile().characterization;
    let cb = &net.layers()[0];
    let (on, off) = cb.switch_conductances();
    s.push_str("\n[derived]\n");
    let _ = writeln!(s, "run = {:?}", run.report.run);
    let _ = writeln!(s, "output = {:?}", format!("{:?}", net.config().output_fn()).to_lowercase());
    let _ = writeln!(s, "g_ref = {}", cb.spec().g_ref);
    let _ = writeln!(s, "g_clip = [{}, {}]", cb.spec().g_clip.0, cb.spec().g_clip.1);
    let _ = writeln!(s, "switch_on = {on}");
    let _ = writeln!(s, "switch_off = {off}");
    let _ = writeln!(s, "kappa_inc = {}", net.encoding().kappa_inc);
    let _ = writeln!(s, "kappa_dec = {}", net.encoding().kappa_dec);
    let _ = writeln!(s, "eta_eff = {}", net.config().eta_eff());
    let (wl, wh) = net.weight_bounds();
    let _ = writeln!(s, "weight_bounds = [{wl}, {wh}]");
    s.push_str("\n[characterization]\n");
    let _ = writeln!(s, "v_th_pos = {}", ch.v_th_pos);
    let _ = writeln!(s, "v_th_neg = {}", ch.v_th_neg);
    let _ = writeln!(s, "g_abs = [{}, {}]", ch.g_abs_min, ch.g_abs_max);
    let _ = writeln!(s, "g_lin = [{}, {}]", ch.g_lin_min, ch.g_lin_max);
    let _ = writeln!(s, "c1 = {}", ch.c1);
    let _ = writeln!(s, "c2 = {}", ch.c2);
    Ok(s)
}

/// `epoch,sample,r…,sigma…,o…,y…,tanh_delta…`, one row per training step.
pub fn write_steps<W: Write>(net: &Network, steps: &[(usize, usize, crate::network::StepTrace)], out: W) -> Result<()> {
    let sizes = &net.config().layer_sizes;
    let n_layers = sizes.len() - 1;
    let mut header = vec!["epoch".to_string(), "sample".to_string()];
    for k in 0..n_layers {
        header.extend((0..sizes[k + 1]).map(|j| format!("r{}_{}", k + 1, j + 1)));
    }
    for k in 0..n_layers - 1 {
        header.extend((0..sizes[k + 1]).map(|j| format!("sigma{}_{}", k + 1, j + 1)));
    }
    header.extend((0..sizes[n_layers]).map(|j| format!("o{}", j + 1)));
    for k in 0..n_layers {
        header.extend((0..sizes[k + 1]).map(|j| format!("y{}_{}", k + 1, j + 1)));
    }
    for k in 1..n_layers {
        header.extend((0..sizes[k]).map(|j| format!("tanh_delta{}_{}", k, j + 1)));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header).map_err(csv_err)?;
    for (epoch, sample, st) in steps {
        let mut row = vec![(epoch + 1).to_string(), sample.to_string()];
        let f = &st.forward;
        row.extend(f.pre.iter().flatten().map(f64::to_string));
        row.extend(f.hidden.iter().flatten().map(f64::to_string));
        row.extend(f.output.iter().map(f64::to_string));
        row.extend(st.errors.iter().flatten().map(f64::to_string));
        row.extend(st.deltas.iter().skip(1).flatten().map(f64::to_string));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Write-phase drive of layer `k` for the first training step:
/// `channel,index,start,end,value` with one row per segment. Row channels
/// carry voltages, column channels the switch state (1 = ON).
pub fn write_waveforms<W: Write>(net: &Network, step: &crate::network::StepTrace, k: usize, out: W) -> Result<()> {
    let cb = &net.layers()[k];
    let t = net.config().timing;
    let enc = net.encoding();
    let u = &step.forward.inputs[k];
    let y: Vec<f64> = step.errors[k].iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["channel", "index", "start", "end", "value"]).map_err(csv_err)?;
    for (i, wf) in cb.row_waveforms(u, &t, enc)?.iter().enumerate() {
        for s in wf.segments() {
            w.write_record(["row".into(), i.to_string(), s.start.to_string(), s.end.to_string(), s.value.to_string()])
                .map_err(csv_err)?;
        }
    }
    for (j, wf) in cb.column_schedules(&y, &t, enc)?.iter().enumerate() {
        for s in wf.segments() {
            let v = if s.value { "1" } else { "0" };
            w.write_record(["column".into(), j.to_string(), s.start.to_string(), s.end.to_string(), v.into()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes every file of one run into `dir`.
pub fn write_run(run: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_cost(&run.report.cost, create(&dir.join("cost.csv"))?)?;
    fs::write(dir.join("metrics.txt"), metrics_text(&run.report))?;
    fs::write(dir.join("report.txt"), report_text(run)?)?;
    for (k, cb) in run.network.layers().iter().enumerate() {
        cb.write_snapshot_csv(create(&dir.join(format!("conductance_{}.csv", k + 1)))?)?;
    }
    if run.config.train.trace_steps && !run.steps.is_empty() {
        write_steps(&run.network, &run.steps, create(&dir.join("steps.csv"))?)?;
    }
    if run.config.train.dump_waveforms {
        if run.config.network.mode == Mode::Behavioral {
            return Err(Error::Config("waveform dumps need device mode".into()));
        }
        if let Some(st) = &run.first_step {
            for k in 0..run.network.layers().len() {
                write_waveforms(&run.network, st, k, create(&dir.join(format!("waveforms_{}.csv", k + 1)))?)?;
            }
        }
    }
    Ok(())
}

fn summary_line(name: &str, s: &Summary) -> String {
    format!(
        "{name}: accuracy {:.4} ± {:.4}, macro_f1 {:.4} ± {:.4}\n",
        s.mean_accuracy, s.std_accuracy, s.mean_f1, s.std_f1
    )
}

/// `summary.txt`, `runs.csv` and one sub-directory per run.
pub fn write_experiment(out: &ExperimentOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = toml::to_string(&out.spec).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    text.push_str(&summary_line("result", &out.summary));
    if let Some(b) = &out.baseline {
        text.push_str(&summary_line("baseline", b));
        let _ = writeln!(
            text,
            "accuracy_change_points: {:.2}",
            100.0 * (out.summary.mean_accuracy - b.mean_accuracy)
        );
    }
    let audits: Vec<_> = out.runs.iter().filter_map(|r| r.report.audit).collect();
    if !audits.is_empty() {
        let pass = audits.iter().all(|a| a.pass());
        let phases: usize = audits.iter().map(|a| a.phases).sum();
        let _ = writeln!(text, "sneak_audit: {} over {phases} phases", if pass { "PASS" } else { "FAIL" });
    }
    if let Some(n) = out.negative_control {
        let _ = writeln!(
            text,
            "negative_control: {} (degenerate switch, max |v| {} V)",
            if n.pass() { "PASS" } else { "FAIL" },
            n.max_abs_voltage
        );
    }
    fs::write(dir.join("summary.txt"), text)?;

    let mut w = csv::Writer::from_writer(create(&dir.join("runs.csv"))?);
    w.write_record(["run", "seed", "accuracy", "macro_f1", "final_loss"]).map_err(csv_err)?;
    for r in out.runs.iter().chain(&out.baseline_runs) {
        let rep = &r.report;
        w.write_record([
            rep.run.clone(),
            rep.seed.to_string(),
            rep.test.accuracy.to_string(),
            rep.test.macro_f1.to_string(),
            rep.cost.last().map_or(String::new(), f64::to_string),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    for r in &out.runs {
        write_run(r, &dir.join(format!("seed_{}", r.report.seed)))?;
    }
    for r in &out.baseline_runs {
        write_run(r, &dir.join(format!("baseline_seed_{}", r.report.seed)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_csv_layout() {
        let mut buf = Vec::new();
        write_cost(&[0.5, 0.25], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,mean_loss\n1,0.5\n2,0.25\n");
    }
}

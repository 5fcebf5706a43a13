use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use memnet::device::{calibration_trace, characterize, ModelId};
use memnet::harness::config::{resolve, ConfigFile};
use memnet::harness::experiment::{run_experiment, train_run, ExperimentFile, Mutation};
use memnet::harness::load_dataset;
use memnet::harness::report::{metrics_text, write_experiment, write_run};
use memnet::network::Mode;
use memnet::{Error, Result};

/// Memristive crossbar neural network simulator.
#[derive(Parser)]
#[command(name = "memnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Characterize a device model from a simulated pulse train.
    Characterize {
        #[arg(long)]
        model: ModelId,
        /// Also write the sampled trace to DIR/characterization.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one network and write its reports.
    Train {
        /// Builtin name (xor, iris, breast_cancer, mnist) or CSV path.
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        model: Option<ModelId>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// TOML file with [train], [network], [device] and [timing] sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dump_waveforms: bool,
        #[arg(long)]
        trace_energy: bool,
        /// Run the sneak-path audit on every phase.
        #[arg(long)]
        audit: bool,
    },
    /// Run a multi-seed experiment described by a TOML spec.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn characterize_cmd(model: ModelId, out: Option<&Path>) -> Result<()> {
    let t0 = Instant::now();
    let params = model.params();
    let pulse = model.calibration_pulse();
    let ch = characterize(&params, &pulse)?;
    let d = model.datasheet();
    println!("model: {}", model.name());
    println!("threshold window: [{:.4}, {:.4}] V", ch.v_th_neg, ch.v_th_pos);
    println!(
        "absolute range: [{:.4}, {:.4}] mS (published [{}, {}])",
        ch.g_abs_min * 1e3,
        ch.g_abs_max * 1e3,
        d.g_abs.0 * 1e3,
        d.g_abs.1 * 1e3
    );
    println!(
        "linear range: [{:.4}, {:.4}] mS (published [{}, {}])",
        ch.g_lin_min * 1e3,
        ch.g_lin_max * 1e3,
        d.g_lin.0 * 1e3,
        d.g_lin.1 * 1e3
    );
    println!("c1: {:.6e} S/s", ch.c1);
    println!("c2: {:.6e} S/s", ch.c2);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let tr = calibration_trace(&params, &pulse)?;
        let mut w = csv::Writer::from_path(dir.join("characterization.csv")).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(["time", "voltage", "conductance"]).map_err(|e| Error::Io(e.to_string()))?;
        for k in 0..tr.time.len() {
            w.write_record([tr.time[k].to_string(), tr.voltage[k].to_string(), tr.conductance[k].to_string()])
                .map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
    }
    println!("elapsed: {:.2} s", t0.elapsed().as_secs_f64());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train_cmd(
    dataset: &str,
    model: Option<ModelId>,
    mode: Option<Mode>,
    epochs: Option<usize>,
    seed: Option<u64>,
    out: &Path,
    config: Option<&Path>,
    flags: [bool; 3],
) -> Result<()> {
    let mut file = match config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let data = load_dataset(dataset)?;
    file.device.model = model.or(file.device.model);
    file.network.mode = mode.or(file.network.mode);
    file.train.epochs = epochs.or(file.train.epochs);
    file.train.seed = seed.or(file.train.seed);
    let [dump, energy, audit] = flags;
    if dump {
        file.train.dump_waveforms = Some(true);
    }
    if energy {
        file.train.trace_energy = Some(true);
    }
    if audit {
        file.train.audit = Some(true);
    }
    let cfg = resolve(&file, &data.name, data.n_features(), data.classes)?;
    let t0 = Instant::now();
    let run = train_run(&cfg, &data, Mutation::None, &format!("train/{}/seed{}", data.name, cfg.train.seed))?;
    write_run(&run, out)?;
    print!("{}", metrics_text(&run.report));
    println!("elapsed: {:.2} s", t0.elapsed().as_secs_f64());
    Ok(())
}

fn experiment_cmd(spec: &Path, out: &Path) -> Result<()> {
    let file = ExperimentFile::load(spec)?;
    let t0 = Instant::now();
    let res = run_experiment(&file.experiment, &file.overrides)?;
    write_experiment(&res, out)?;
    print!("{}", std::fs::read_to_string(out.join("summary.txt"))?);
    println!("elapsed: {:.2} s", t0.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Characterize { model, out } => characterize_cmd(*model, out.as_deref()),
        Command::Train {
            dataset,
            model,
            mode,
            epochs,
            seed,
            out,
            config,
            dump_waveforms,
            trace_energy,
            audit,
        } => train_cmd(
            dataset,
            *model,
            *mode,
            *epochs,
            *seed,
            out,
            config.as_deref(),
            [*dump_waveforms, *trace_energy, *audit],
        ),
        Command::Experiment { spec, out } => experiment_cmd(spec, out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

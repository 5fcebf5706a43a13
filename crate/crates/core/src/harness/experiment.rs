//! Seeded training runs and multi-seed experiments.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crossbar::{sneak_path_audit, Crossbar, PhaseKind, PhaseTrace};
use crate::device::{apply_variation, ModelId, VariationDirection};
use crate::error::{Error, Result};
use crate::network::{AuditSummary, Mode, Network, StepTrace};

use super::config::{resolve, ConfigFile, RunConfig};
use super::dataset::{load_dataset, Dataset};
use super::metrics::{mean_std, metrics, Metrics};

// Stream offsets so that the split, the sample order and the mutations of a
// run draw from independent generators.
const ORDER_STREAM: u64 = 0x0bde_5eed;
const MUTATION_STREAM: u64 = 0x00fa_017e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Baseline,
    Fault,
    Variation,
    NonlinearInit,
    SneakAudit,
}

/// Named initial conductance ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitRange {
    /// The linear region of the device.
    Linear,
    Full,
    /// Below the linear region.
    Lower,
    /// Above the linear region.
    Upper,
}

impl InitRange {
    /// Conductance bounds in siemens.
    pub fn bounds(self, model: ModelId) -> (f64, f64) {
        let d = model.datasheet();
        let floor = match model {
            ModelId::Silver => 0.225e-3,
            ModelId::Titania => d.g_abs.0,
        };
        match self {
            InitRange::Linear => d.g_lin,
            InitRange::Full => (floor, d.g_abs.1),
            InitRange::Lower => (floor, d.g_lin.0),
            InitRange::Upper => (d.g_lin.1, d.g_abs.1),
        }
    }
}

/// Re-initializes the healthy cells of `cb` uniformly in `range`.
pub fn nonlinear_init(cb: &mut Crossbar, range: InitRange, model: ModelId, rng: &mut ChaCha8Rng) -> Result<()> {
    let (lo, hi) = range.bounds(model);
    cb.initialize_uniform(lo, hi, rng)
}

/// What a run changes on its freshly built network before training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mutation {
    None,
    Fault { fraction: f64 },
    Variation { direction: VariationDirection, fraction: f64 },
    Init(InitRange),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub run: String,
    pub seed: u64,
    pub dataset: String,
    pub model: ModelId,
    pub mode: Mode,
    pub epochs: usize,
    /// Mean training loss of every epoch.
    pub cost: Vec<f64>,
    pub train_accuracy: f64,
    pub test: Metrics,
    pub test_samples: usize,
    pub stuck_cells: usize,
    pub varied_cells: usize,
    pub kappa: (f64, f64),
    pub switch_on: f64,
    pub audit: Option<AuditSummary>,
    /// Mean energy per synapse per training step (J).
    pub energy_per_synapse_step: Option<f64>,
    /// Mean energy of one training step over all crossbars (J).
    pub energy_per_step: Option<f64>,
}

/// A finished run: its report, the trained network and optional traces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub report: TrainReport,
    pub network: Network,
    /// `(epoch, sample, trace)` of every step when step tracing is on.
    pub steps: Vec<(usize, usize, StepTrace)>,
    /// The first training step, kept for waveform dumps.
    pub first_step: Option<StepTrace>,
}

fn annotate(run: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Run {
        run: run.to_string(),
        source: Box::new(e),
    }
}

/// Builds, mutates, trains and evaluates one network.
pub fn train_run(cfg: &RunConfig, data: &Dataset, mutation: Mutation, run: &str) -> Result<RunOutcome> {
    let inner = || -> Result<RunOutcome> {
        cfg.validate()?;
        let seed = cfg.train.seed;
        let (train, test) = data.split(cfg.train.test_fraction, seed)?;
        let profile = crate::network::DeviceProfile::with_params(cfg.network.model, cfg.device)?;
        let mut net = Network::with_profile(cfg.network.clone(), profile)?;

        let mut mrng = ChaCha8Rng::seed_from_u64(seed ^ MUTATION_STREAM);
        let (mut stuck, mut varied) = (0, 0);
        match mutation {
            Mutation::None => {}
            Mutation::Fault { fraction } => {
                for cb in net.layers_mut() {
                    stuck += cb.inject_faults_with(fraction, &mut mrng)?.len();
                }
            }
            Mutation::Variation { direction, fraction } => {
                let p = apply_variation(&cfg.device, Some(direction), cfg.network.model);
                for cb in net.layers_mut() {
                    varied += cb.apply_variation(p, fraction, &mut mrng)?.len();
                }
            }
            Mutation::Init(range) => {
                for cb in net.layers_mut() {
                    nonlinear_init(cb, range, cfg.network.model, &mut mrng)?;
                }
            }
        }
        if cfg.train.audit {
            net.audit = Some(AuditSummary::default());
        }
        if cfg.train.trace_energy {
            net.energy = Some(Default::default());
        }

        let mut orng = ChaCha8Rng::seed_from_u64(seed ^ ORDER_STREAM);
        let mut steps = Vec::new();
        let mut first_step = None;
        let keep_steps = cfg.train.trace_steps;
        let cost = net.train_with(&train.features, &train.labels, cfg.train.epochs, &mut orng, |e, i, st| {
            if first_step.is_none() {
                first_step = Some(st.clone());
            }
            if keep_steps {
                steps.push((e, i, st.clone()));
            }
        })?;

        // evaluation is not part of the audited or metered training
        let audit = net.audit.take();
        let energy = net.energy.take();
        let predict = |net: &mut Network, d: &Dataset| -> Result<Vec<usize>> {
            d.features.iter().map(|x| net.predict(x)).collect()
        };
        let p_train = predict(&mut net, &train)?;
        let p_test = predict(&mut net, &test)?;
        let train_m = metrics(&p_train, &train.labels, data.classes)?;
        let test_m = metrics(&p_test, &test.labels, data.classes)?;
        net.audit = audit;
        net.energy = energy;

        let enc = *net.encoding();
        let report = TrainReport {
            run: run.to_string(),
            seed,
            dataset: cfg.train.dataset.clone(),
            model: cfg.network.model,
            mode: cfg.network.mode,
            epochs: cfg.train.epochs,
            cost,
            train_accuracy: train_m.accuracy,
            test: test_m,
            test_samples: test.len(),
            stuck_cells: stuck,
            varied_cells: varied,
            kappa: (enc.kappa_inc, enc.kappa_dec),
            switch_on: net.layers()[0].switch_conductances().0,
            audit,
            energy_per_synapse_step: energy.map(|e| e.per_synapse_step()),
            energy_per_step: energy.map(|e| e.joules / e.steps.max(1) as f64),
        };
        Ok(RunOutcome {
            config: cfg.clone(),
            report,
            network: net,
            steps,
            first_step,
        })
    };
    inner().map_err(annotate(run))
}

fn default_seeds() -> Vec<u64> {
    (1..=5).collect()
}

/// Experiment description, the `[experiment]` section of a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub dataset: String,
    #[serde(default = "default_model")]
    pub model: ModelId,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub fault_fraction: Option<f64>,
    #[serde(default)]
    pub variation_direction: Option<VariationDirection>,
    #[serde(default)]
    pub variation_fraction: Option<f64>,
    #[serde(default)]
    pub init_range: Option<InitRange>,
    /// Also train every seed unmutated and report the difference.
    #[serde(default)]
    pub compare_baseline: Option<bool>,
    /// Parallel runs; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_model() -> ModelId {
    ModelId::Silver
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, dataset: &str, model: ModelId) -> Self {
        ExperimentSpec {
            kind,
            dataset: dataset.to_string(),
            model,
            mode: None,
            seeds: default_seeds(),
            epochs: None,
            fault_fraction: None,
            variation_direction: None,
            variation_fraction: None,
            init_range: None,
            compare_baseline: None,
            workers: None,
        }
    }

    fn knob(&self, v: Option<f64>, name: &str) -> Result<f64> {
        let v = v.ok_or_else(|| Error::Config(format!("{:?} experiment needs {name}", self.kind)))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
        }
        Ok(v)
    }

    /// The mutation this spec applies, after checking its knobs.
    pub fn mutation(&self) -> Result<Mutation> {
        let stray = |set: bool, name: &str| {
            if set {
                Err(Error::Config(format!("{name} does not apply to {:?}", self.kind)))
            } else {
                Ok(())
            }
        };
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let fault = self.fault_fraction.is_some();
        let var = self.variation_direction.is_some() || self.variation_fraction.is_some();
        let init = self.init_range.is_some();
        match self.kind {
            ExperimentKind::Baseline | ExperimentKind::SneakAudit => {
                stray(fault, "fault_fraction")?;
                stray(var, "variation knobs")?;
                stray(init, "init_range")?;
                Ok(Mutation::None)
            }
            ExperimentKind::Fault => {
                stray(var, "variation knobs")?;
                stray(init, "init_range")?;
                Ok(Mutation::Fault {
                    fraction: self.knob(self.fault_fraction, "fault_fraction")?,
                })
            }
            ExperimentKind::Variation => {
                stray(fault, "fault_fraction")?;
                stray(init, "init_range")?;
                let direction = self
                    .variation_direction
                    .ok_or_else(|| Error::Config("variation experiment needs variation_direction".into()))?;
                Ok(Mutation::Variation {
                    direction,
                    fraction: self.knob(self.variation_fraction, "variation_fraction")?,
                })
            }
            ExperimentKind::NonlinearInit => {
                stray(fault, "fault_fraction")?;
                stray(var, "variation knobs")?;
                Ok(Mutation::Init(
                    self.init_range
                        .ok_or_else(|| Error::Config("nonlinear_init experiment needs init_range".into()))?,
                ))
            }
        }
    }
}

/// Spec file: an `[experiment]` section plus optional run-config sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFile {
    pub experiment: ExperimentSpec,
    #[serde(flatten)]
    pub overrides: ConfigFile,
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
}

impl Summary {
    pub fn of(reports: &[TrainReport]) -> Self {
        let acc: Vec<f64> = reports.iter().map(|r| r.test.accuracy).collect();
        let f1: Vec<f64> = reports.iter().map(|r| r.test.macro_f1).collect();
        let (mean_accuracy, std_accuracy) = mean_std(&acc);
        let (mean_f1, std_f1) = mean_std(&f1);
        Summary {
            mean_accuracy,
            std_accuracy,
            mean_f1,
            std_f1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub spec: ExperimentSpec,
    pub runs: Vec<RunOutcome>,
    pub summary: Summary,
    pub baseline_runs: Vec<RunOutcome>,
    pub baseline: Option<Summary>,
    /// Audit of the degenerate-switch write (sneak audit only).
    pub negative_control: Option<AuditSummary>,
}

impl ExperimentOutcome {
    pub fn reports(&self) -> Vec<TrainReport> {
        self.runs.iter().map(|r| r.report.clone()).collect()
    }
}

fn run_config(spec: &ExperimentSpec, overrides: &ConfigFile, data: &Dataset, seed: u64) -> Result<RunConfig> {
    let mut file = overrides.clone();
    if file.device.model.is_some_and(|m| m != spec.model) {
        return Err(Error::Config("[device] model conflicts with [experiment] model".into()));
    }
    file.device.model = Some(spec.model);
    if spec.mode.is_some() {
        file.network.mode = spec.mode;
    }
    if spec.epochs.is_some() {
        file.train.epochs = spec.epochs;
    }
    file.train.seed = Some(seed);
    if spec.kind == ExperimentKind::SneakAudit {
        file.train.audit = Some(true);
    }
    resolve(&file, &data.name, data.n_features(), data.classes)
}

fn map_runs<F>(seeds: &[u64], workers: Option<usize>, f: F) -> Result<Vec<RunOutcome>>
where
    F: Fn(u64) -> Result<RunOutcome> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.unwrap_or(0))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| seeds.par_iter().map(|&s| f(s)).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        seeds.iter().map(|&s| f(s)).collect()
    }
}

/// Runs every seed of `spec`, in parallel when the `parallel` feature is on.
/// Results come back in seed order.
pub fn run_experiment(spec: &ExperimentSpec, overrides: &ConfigFile) -> Result<ExperimentOutcome> {
    let mutation = spec.mutation()?;
    let data = load_dataset(&spec.dataset)?;
    let tag = |seed: u64, what: &str| format!("{:?}/{}/seed{seed}{what}", spec.kind, spec.dataset).to_lowercase();

    let runs = map_runs(&spec.seeds, spec.workers, |seed| {
        let cfg = run_config(spec, overrides, &data, seed)?;
        train_run(&cfg, &data, mutation, &tag(seed, ""))
    })?;
    let compare = spec.compare_baseline.unwrap_or(mutation != Mutation::None);
    let baseline_runs = if compare {
        map_runs(&spec.seeds, spec.workers, |seed| {
            let cfg = run_config(spec, overrides, &data, seed)?;
            train_run(&cfg, &data, Mutation::None, &tag(seed, "-baseline"))
        })?
    } else {
        Vec::new()
    };
    let negative_control = if spec.kind == ExperimentKind::SneakAudit {
        let cfg = run_config(spec, overrides, &data, spec.seeds[0])?;
        Some(degenerate_switch_control(&cfg, &data)?)
    } else {
        None
    };
    let reports: Vec<TrainReport> = runs.iter().map(|r| r.report.clone()).collect();
    let base: Vec<TrainReport> = baseline_runs.iter().map(|r| r.report.clone()).collect();
    Ok(ExperimentOutcome {
        spec: spec.clone(),
        summary: Summary::of(&reports),
        baseline: compare.then(|| Summary::of(&base)),
        runs,
        baseline_runs,
        negative_control,
    })
}

/// One audited write on a copy of the first layer whose OFF switches conduct
/// as well as its ON switches. The audit must flag it.
pub fn degenerate_switch_control(cfg: &RunConfig, data: &Dataset) -> Result<AuditSummary> {
    let mut c = cfg.clone();
    c.network.mode = Mode::Device;
    let profile = crate::network::DeviceProfile::with_params(c.network.model, c.device)?;
    let net = Network::with_profile(c.network.clone(), profile)?;
    let mut cb = net.layers()[0].clone();
    let (on, _) = cb.switch_conductances();
    cb.force_switch_conductances(on, on);
    let u: Vec<f64> = std::iter::once(c.network.bias_input)
        .chain(data.features[0].iter().copied())
        .collect();
    let y: Vec<f64> = (0..cb.cols()).map(|j| if j % 2 == 0 { 0.5 } else { -0.5 }).collect();
    let mut trace = PhaseTrace {
        kind: PhaseKind::Write,
        rows: 0,
        cols: 0,
        physical: true,
        cells: Vec::new(),
        windows: Vec::new(),
        max_node_voltage: 0.0,
    };
    cb.write_phase(&u, &y, &c.network.timing, net.encoding(), Some(&mut trace))?;
    let mut summary = AuditSummary::default();
    summary.record(&sneak_path_audit(&trace));
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(kind: ExperimentKind) -> ExperimentSpec {
        let mut s = ExperimentSpec::new(kind, "iris", ModelId::Silver);
        s.mode = Some(Mode::Behavioral);
        s.epochs = Some(2);
        s.seeds = vec![1, 2];
        s
    }

    #[test]
    fn knobs_checked_against_kind() {
        let mut s = quick(ExperimentKind::Fault);
        assert!(s.mutation().is_err());
        s.fault_fraction = Some(0.1);
        assert_eq!(s.mutation().unwrap(), Mutation::Fault { fraction: 0.1 });
        s.init_range = Some(InitRange::Lower);
        assert!(s.mutation().is_err());
        let mut b = quick(ExperimentKind::Baseline);
        b.fault_fraction = Some(0.1);
        assert!(b.mutation().is_err());
        let mut v = quick(ExperimentKind::Variation);
        v.variation_fraction = Some(1.5);
        v.variation_direction = Some(VariationDirection::Increased);
        assert!(v.mutation().is_err());
    }

    #[test]
    fn init_ranges_nest() {
        for m in [ModelId::Silver, ModelId::Titania] {
            let (f0, f1) = InitRange::Full.bounds(m);
            let (l0, l1) = InitRange::Lower.bounds(m);
            let (u0, u1) = InitRange::Upper.bounds(m);
            assert_eq!((f0, f1), (l0, u1));
            assert!(l1 < u0);
        }
        assert_eq!(InitRange::Lower.bounds(ModelId::Silver), (0.225e-3, 3.18e-3));
    }

    #[test]
    fn summary_is_arithmetic_mean() {
        let out = run_experiment(&quick(ExperimentKind::Baseline), &ConfigFile::default()).unwrap();
        let accs: Vec<f64> = out.runs.iter().map(|r| r.report.test.accuracy).collect();
        assert_eq!(out.summary.mean_accuracy, accs.iter().sum::<f64>() / accs.len() as f64);
        assert_eq!(out.runs[0].report.seed, 1);
        assert!(out.baseline.is_none());
    }

    #[test]
    fn mutations_leave_baseline_alone() {
        let mut s = quick(ExperimentKind::Fault);
        s.fault_fraction = Some(0.5);
        let out = run_experiment(&s, &ConfigFile::default()).unwrap();
        assert!(out.runs.iter().all(|r| r.report.stuck_cells > 0));
        assert!(out.baseline_runs.iter().all(|r| r.report.stuck_cells == 0));
        assert!(out.baseline_runs.iter().all(|r| r.network.layers().iter().all(|cb| cb.stuck_count() == 0)));
    }

    #[test]
    fn spec_file_parses() {
        let f = ExperimentFile::parse(
            "[experiment]\nkind = \"variation\"\ndataset = \"iris\"\nvariation_direction = \"decreased\"\n\
             variation_fraction = 0.2\n[network]\ngain = 5.0\n",
        )
        .unwrap();
        assert_eq!(f.experiment.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(f.overrides.network.gain, Some(5.0));
        assert!(ExperimentFile::parse("[experiment]\nkind = \"nope\"\ndataset = \"iris\"\n").is_err());
    }
}

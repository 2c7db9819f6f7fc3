//! Command-line front end.
//!
//! Every subcommand writes one table. The table goes to `--out` if given, to
//! `<dir>/<subcommand>.<ext>` when an output directory is set (by `--out-dir`
//! or the `PLSTAB_OUT_DIR` environment variable), and to standard output
//! otherwise. `rates --alg` and `iters` print a single number instead.
//!
//! Exit codes: 0 on success, 1 on a construction or validation error (one
//! diagnostic line on standard error), 2 on a usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::counterexample::{self, Sampling, SgdConfig};
use crate::error::{invalid, Error, Result};
use crate::geometry::{self, GeometryEstimate, Region, RegionSampler};
use crate::linnet::{self, DataMatrices, LayerStack, LinnetObjective};
use crate::optim::{self, Algorithm, RunConfig, StepSchedule};
use crate::problems::{
    leaky_relu_composite, EmpiricalRisk, ExampleZ, FStarSource, LabeledDataset, Objective,
    ParamVector, ProblemInstance,
};
use crate::rates::{self, RateInputs, RateMetric, Setting};
use crate::report::{fmt_num, Cell, ExperimentConfig, Format, Table};
use crate::rng;
use crate::stability::{
    self, BoundInputs, DataGenerator, ErmOracle, GenMode, Learner, StabilityProbe, Theorem,
    UniformBall,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PLSTAB_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "plstab",
    version,
    about = "Stability, convergence and loss-geometry experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    pub format: OutFormat,
    /// Output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output directory (default from PLSTAB_OUT_DIR).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convergence-rate and iteration tables, or one rate with --alg.
    Rates(RatesArgs),
    /// Iterations needed for stability of order L²/(κn).
    Iters(ItersArgs),
    /// Sampled PL constant against the declared one.
    PlCheck(CheckArgs),
    /// Sampled quadratic-growth and error-bound constants.
    QgCheck(CheckArgs),
    /// Finite-difference validation of the analytic gradients.
    GradCheck(GradCheckArgs),
    /// Measured stability against the black-box bound over an n sweep.
    Stability(StabilityArgs),
    /// Generalization gap against the stability-based bounds.
    GenGap(GenGapArgs),
    /// The quartic instance where GD is unstable and SGD is stable.
    Counterexample(CounterexampleArgs),
    /// Deep linear network lemma checks, PL ratios and critical points.
    Linnet(LinnetArgs),
    /// Run one optimizer and export its trajectory or a rate fit.
    Run(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Rates(_) => "rates",
            Command::Iters(_) => "iters",
            Command::PlCheck(_) => "pl-check",
            Command::QgCheck(_) => "qg-check",
            Command::GradCheck(_) => "grad-check",
            Command::Stability(_) => "stability",
            Command::GenGap(_) => "gen-gap",
            Command::Counterexample(_) => "counterexample",
            Command::Linnet(_) => "linnet",
            Command::Run(_) => "run",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SettingKind {
    Sc,
    Pl,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RateFlags {
    #[arg(long, value_enum, default_value_t = SettingKind::Pl)]
    pub setting: SettingKind,
    /// Strong-convexity or PL constant.
    #[arg(long = "mu", visible_alias = "lambda", default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long = "L", default_value_t = 2.0)]
    #[serde(rename = "L")]
    pub l: f64,
    #[arg(long, default_value_t = 0.05)]
    pub gamma: f64,
    /// Dimension (RCD).
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    /// Inner-loop length (SVRG).
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    #[arg(long, default_value_t = 100)]
    pub n: u64,
}

impl RateFlags {
    fn inputs(&self, alg: Algorithm) -> RateInputs {
        let setting = match self.setting {
            SettingKind::Sc => Setting::StronglyConvex(self.mu),
            SettingKind::Pl => Setting::Pl(self.mu),
        };
        RateInputs::new(alg, setting, self.l)
            .gamma(self.gamma)
            .d(self.d)
            .m(self.m)
            .n(self.n)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RatesArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alg: Option<Algorithm>,
    #[command(flatten)]
    #[serde(flatten)]
    pub rate: RateFlags,
    #[arg(long = "T", default_value_t = 100)]
    #[serde(rename = "T")]
    pub t: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ItersArgs {
    #[arg(long)]
    pub alg: Algorithm,
    #[command(flatten)]
    #[serde(flatten)]
    pub rate: RateFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// `½(w − x)ᵀA(w − x)`, spectrum spread from μ to L, x uniform in the unit ball.
    Quadratic,
    /// `(λ/2)‖σ(Xw) − y‖²` with `X = I_d`.
    Leaky,
    /// Deep linear net on random `d × n` data.
    Linnet,
    /// The counterexample dataset `S` (odd n).
    Quartic,
    /// Linear loss fixture.
    Linear,
}

impl ProblemKind {
    const ALL: [ProblemKind; 5] = [
        ProblemKind::Quadratic,
        ProblemKind::Quartic,
        ProblemKind::Leaky,
        ProblemKind::Linnet,
        ProblemKind::Linear,
    ];

    fn name(self) -> &'static str {
        match self {
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::Leaky => "leaky",
            ProblemKind::Linnet => "linnet",
            ProblemKind::Quartic => "quartic",
            ProblemKind::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProblemArgs {
    #[arg(long, value_enum, default_value_t = ProblemKind::Quadratic)]
    pub problem: ProblemKind,
    /// Parameter (quadratic, leaky, linear) or layer width (linnet).
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Smallest curvature (quadratic) or the scale λ (leaky).
    #[arg(long = "mu", visible_alias = "lambda", default_value_t = 1.0)]
    pub mu: f64,
    /// Largest curvature (quadratic).
    #[arg(long = "L", default_value_t = 2.0)]
    #[serde(rename = "L")]
    pub l: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub c1: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub c2: f64,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// Perturbation of the quartic counterexample.
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
}

/// A problem with its dataset, a spare example for replace-one neighbors and
/// the sampling region for geometry checks.
struct Built {
    problem: ProblemInstance,
    data: LabeledDataset,
    fresh: ExampleZ,
    region: Region,
    linnet: Option<DataMatrices>,
}

fn gaussian(r: &mut rng::StreamRng) -> f64 {
    r.sample(StandardNormal)
}

fn build_problem(p: &ProblemArgs, n: usize, seed: u64) -> Result<Built> {
    let mut r = rng::stream(seed, 0);
    let d = p.d;
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    match p.problem {
        ProblemKind::Quadratic => {
            if !(p.mu > 0.0 && p.l >= p.mu) {
                return Err(invalid(format!(
                    "need 0 < μ ≤ L, got μ = {}, L = {}",
                    p.mu, p.l
                )));
            }
            let spectrum = DVector::from_fn(d, |i, _| {
                if d == 1 {
                    p.mu
                } else {
                    p.mu + (p.l - p.mu) * i as f64 / (d - 1) as f64
                }
            });
            let problem = ProblemInstance::quadratic(DMatrix::from_diagonal(&spectrum), 2.0, 1.0)?;
            let generator = UniformBall { d, radius: 1.0 };
            if n == 0 {
                return Err(Error::EmptyDataset);
            }
            let data = LabeledDataset::new(
                (0..n).map(|_| generator.sample(&mut r)).collect(),
                format!("quadratic(n={n})"),
            )?;
            let fresh = generator.sample(&mut r);
            Ok(Built {
                problem,
                data,
                fresh,
                region: Region::default_ball(d),
                linnet: None,
            })
        }
        ProblemKind::Leaky => {
            let y = DVector::from_fn(d, |_, _| rng::uniform(&mut r, -1.0, 1.0));
            let (problem, data) =
                leaky_relu_composite(p.mu, &DMatrix::identity(d, d), &y, p.c1, p.c2)?;
            let mut x = vec![0.0; d];
            x[d - 1] = 1.0;
            let fresh = ExampleZ::new(x, rng::uniform(&mut r, -1.0, 1.0));
            Ok(Built {
                problem,
                data,
                fresh,
                region: Region::default_ball(d),
                linnet: None,
            })
        }
        ProblemKind::Linnet => {
            let dm = DataMatrices::random(d, n, &mut r)?;
            let problem = ProblemInstance::deep_linear(p.depth, d)?;
            let data = dm.to_dataset()?;
            let fresh = ExampleZ::new(
                (0..2 * d).map(|_| gaussian(&mut r)).collect::<Vec<_>>(),
                0.0,
            );
            Ok(Built {
                problem,
                data,
                fresh,
                region: Region::default_ball(p.depth * d * d),
                linnet: Some(dm),
            })
        }
        ProblemKind::Quartic => {
            let (s, s_prime, _) = counterexample::build_datasets(n, p.eps)?;
            let fresh = s_prime.examples()[n - 1].clone();
            Ok(Built {
                problem: ProblemInstance::quartic(1),
                data: s,
                fresh,
                region: Region::cube(1, -2.0, 3.0),
                linnet: None,
            })
        }
        ProblemKind::Linear => {
            let data = LabeledDataset::new(
                (0..n.max(1))
                    .map(|_| {
                        ExampleZ::new(
                            (0..d).map(|_| gaussian(&mut r)).collect::<Vec<_>>(),
                            gaussian(&mut r),
                        )
                    })
                    .collect(),
                "linear",
            )?;
            let fresh = ExampleZ::new((0..d).map(|_| gaussian(&mut r)).collect::<Vec<_>>(), 0.0);
            Ok(Built {
                problem: ProblemInstance::linear(d),
                data,
                fresh,
                region: Region::default_ball(d),
                linnet: None,
            })
        }
    }
}

/// Optimal value: analytic where known, else the best of 32 GD multistarts.
fn optimal_value(f: &EmpiricalRisk, region: &Region, seed: u64) -> Result<(f64, FStarSource)> {
    if let Some(v) = f.min_value() {
        return Ok((v, f.f_star_source().unwrap_or(FStarSource::Analytic)));
    }
    let starts = RegionSampler::new(region.clone(), 32, seed ^ 0xf5);
    let (v, _) = geometry::multistart_f_star(f, &starts, 0.01, 1e-10, 200_000)?;
    Ok((v, FStarSource::Empirical))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Linnet only: keep samples whose layers all have σ_min ≥ τ.
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GradCheckArgs {
    /// Problem to check; all of them when omitted.
    #[arg(long, value_enum)]
    pub problem: Option<ProblemKind>,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 11)]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Erm,
    Gd,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Uniform,
    Pointwise,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StabilityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [20, 40, 80, 160])]
    pub ns: Vec<usize>,
    #[arg(long, value_enum, default_value_t = LearnerKind::Erm)]
    pub alg: LearnerKind,
    #[arg(long, value_enum, default_value_t = ModeKind::Pointwise)]
    pub mode: ModeKind,
    #[arg(long, default_value_t = 50)]
    pub replicas: usize,
    #[arg(long = "T", default_value_t = 200)]
    #[serde(rename = "T")]
    pub t: usize,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenGapArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [20, 40, 80, 160])]
    pub ns: Vec<usize>,
    #[arg(long, value_enum, default_value_t = LearnerKind::Erm)]
    pub alg: LearnerKind,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 10_000)]
    pub holdout: usize,
    #[arg(long = "T", default_value_t = 200)]
    #[serde(rename = "T")]
    pub t: usize,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Failure probability of the high-probability bound.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Gd,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingKind {
    Plain,
    Stratified,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CounterexampleArgs {
    #[arg(long, value_enum, default_value_t = Experiment::Gd)]
    pub experiment: Experiment,
    /// Dataset sizes (odd).
    #[arg(long, value_delimiter = ',', default_values_t = [11])]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// GD step size.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// GD initializations per n.
    #[arg(long, default_value_t = 64)]
    pub inits: usize,
    /// Initial GD horizon (doubled until converged).
    #[arg(long = "T", default_value_t = 1000)]
    #[serde(rename = "T")]
    pub t: usize,
    /// SGD coupled replicas per n.
    #[arg(long, default_value_t = 500)]
    pub replicas: usize,
    #[arg(long, value_enum, default_value_t = SamplingKind::Stratified)]
    pub sampling: SamplingKind,
    /// SGD steps.
    #[arg(long, default_value_t = 2000)]
    pub sgd_steps: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LinnetArgs {
    /// X as a headerless row-major CSV, d rows by N columns.
    #[arg(long, requires = "y")]
    pub x: Option<PathBuf>,
    /// Y in the same layout as X.
    #[arg(long, requires = "x")]
    pub y: Option<PathBuf>,
    /// Layers stacked vertically (ℓd rows of d columns), W₁ first.
    #[arg(long, requires = "x")]
    pub layers: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// Random instances when no files are given.
    #[arg(long, default_value_t = 10)]
    pub instances: usize,
    /// Smallest singular value of random layers.
    #[arg(long, default_value_t = 0.1)]
    pub min_sigma: f64,
    /// GD steps from each stack before classifying (0 = none).
    #[arg(long, default_value_t = 0)]
    pub train_steps: usize,
    #[arg(long, default_value_t = 0.01)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Constant,
    Inverse,
    Kick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Suboptimality,
    Distance,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value = "gd")]
    pub alg: Algorithm,
    /// Iterations (epochs for SVRG).
    #[arg(long = "T", default_value_t = 100)]
    #[serde(rename = "T")]
    pub t: usize,
    #[arg(long, value_enum, default_value_t = ScheduleKind::Constant)]
    pub schedule: ScheduleKind,
    /// Constant step, or the kick for `kick`.
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// `c` in `c/t`.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Step cap after the kick.
    #[arg(long, default_value_t = 0.02)]
    pub cap: f64,
    /// SVRG inner-loop length.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Starting point; zeros (random layers for linnet) when omitted.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub w0: Option<Vec<f64>>,
    /// Fit the contraction factor instead of exporting the trajectory.
    #[arg(long)]
    pub fit: bool,
    #[arg(long, default_value_t = 20)]
    pub replicas: usize,
    #[arg(long, value_enum, default_value_t = MetricKind::Suboptimality)]
    pub metric: MetricKind,
}

/// Parse `args`, execute, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            1
        }
    }
}

/// Run a parsed command, writing console output to `console`.
pub fn execute(cli: &Cli, console: &mut dyn Write) -> Result<()> {
    let jobs = cli.global.jobs.map_or(0, usize::from);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let mut buf: Vec<u8> = Vec::new();
    let result = pool.install(|| dispatch(cli, &mut buf));
    console.write_all(&buf)?;
    console.flush()?;
    result
}

fn config<A: Serialize>(name: &str, args: &A, seed: u64) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(name, seed);
    if let serde_json::Value::Object(map) = serde_json::to_value(args)? {
        for (k, v) in map {
            let text = match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            cfg.flags.insert(k, text);
        }
    }
    Ok(cfg)
}

fn emit(table: &Table, name: &str, global: &GlobalArgs, console: &mut dyn Write) -> Result<()> {
    let format = Format::from(global.format);
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let dir = global.out_dir.clone().or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    });
    let path = match (&global.out, dir) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(d)) => Some(d.join(format!("{name}.{ext}"))),
        (None, None) => None,
    };
    match path {
        Some(p) => table.write_path(&p, format),
        None => match format {
            Format::Csv => table.write_csv(console),
            Format::Json => {
                table.write_json(&mut *console)?;
                writeln!(console)?;
                Ok(())
            }
        },
    }
}

fn dispatch(cli: &Cli, console: &mut dyn Write) -> Result<()> {
    let g = &cli.global;
    let name = cli.command.name();
    let table = match &cli.command {
        Command::Rates(a) => match a.alg {
            Some(alg) => {
                let v = rates::theoretical_suboptimality(&a.rate.inputs(alg).iterations(a.t))?;
                writeln!(console, "{v:e}")?;
                return Ok(());
            }
            None => rates_table(a, config(name, a, 0)?)?,
        },
        Command::Iters(a) => {
            let t = rates::iterations_for_stability(&a.rate.inputs(a.alg))?;
            writeln!(console, "{t}")?;
            return Ok(());
        }
        Command::PlCheck(a) => check_table(a, false, config(name, a, g.seed)?, g.seed)?,
        Command::QgCheck(a) => check_table(a, true, config(name, a, g.seed)?, g.seed)?,
        Command::GradCheck(a) => return grad_check(a, config(name, a, g.seed)?, g, console),
        Command::Stability(a) => stability_table(a, config(name, a, g.seed)?, g.seed)?,
        Command::GenGap(a) => gen_gap_table(a, config(name, a, g.seed)?, g.seed)?,
        Command::Counterexample(a) => counterexample_table(a, config(name, a, g.seed)?, g.seed)?,
        Command::Linnet(a) => linnet_table(a, config(name, a, g.seed)?, g.seed)?,
        Command::Run(a) => run_table(a, config(name, a, g.seed)?, g.seed)?,
    };
    emit(&table, name, g, console)
}

fn opt_num(v: Option<f64>) -> Cell {
    Cell::Num(v.unwrap_or(f64::NAN))
}

fn rates_table(a: &RatesArgs, cfg: ExperimentConfig) -> Result<Table> {
    let r = &a.rate;
    let mut t = Table::new(cfg, &["algorithm", "setting", "rate", "iterations", "note"]);
    for row in rates::tables(r.mu, r.l, r.gamma, r.d, r.m, a.t, r.n) {
        t.push(vec![
            row.algorithm.name().into(),
            row.setting.into(),
            opt_num(row.rate),
            row.iterations.map_or(Cell::Text(String::new()), Cell::from),
            row.note.into(),
        ])?;
    }
    Ok(t)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(";")
}

const CHECK_COLUMNS: [&str; 12] = [
    "problem",
    "quantity",
    "value",
    "declared",
    "direction",
    "N",
    "used",
    "excluded",
    "f_star",
    "f_star_source",
    "seed",
    "witness",
];

fn check_row(
    problem: &str,
    e: &GeometryEstimate,
    declared: Option<f64>,
    f_star: f64,
) -> Result<Vec<Cell>> {
    Ok(vec![
        problem.into(),
        label(&e.quantity).into(),
        e.value.into(),
        opt_num(declared),
        label(&e.direction).into(),
        e.samples.into(),
        e.used.into(),
        e.excluded.into(),
        f_star.into(),
        e.f_star_source
            .map_or("none".to_string(), |s| label(&s))
            .into(),
        e.seed.into(),
        join(&e.witness).into(),
    ])
}

/// Serde name of a unit-like enum value.
fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(v) => v.to_string(),
        Err(_) => String::new(),
    }
}

fn check_table(a: &CheckArgs, qg: bool, cfg: ExperimentConfig, seed: u64) -> Result<Table> {
    let b = build_problem(&a.problem, a.n, seed)?;
    let f = EmpiricalRisk::new(&b.problem, &b.data)?;
    let tau = a.tau;
    let (depth, width) = (a.problem.depth, a.problem.d);
    let below_tau = move |w: &ParamVector| {
        LayerStack::from_flat(w, depth, width).map_or(true, |s| s.tau() < tau)
    };
    let mut sampler = RegionSampler::new(b.region.clone(), a.samples, seed);
    let restrict = a.problem.problem == ProblemKind::Linnet && tau > 0.0;
    if restrict {
        sampler = sampler.excluding(&below_tau);
    }
    let declared = match (&b.linnet, restrict) {
        (Some(dm), true) => Some(linnet::pl_constant(depth, tau, dm)?),
        _ => b.problem.constants.pl,
    };
    let (f_star, source) = optimal_value(&f, &b.region, seed)?;
    let mut t = Table::new(cfg, &CHECK_COLUMNS);
    let name = a.problem.problem.name();
    if qg {
        let e = geometry::estimate_qg(&f, &sampler, f_star, source)?;
        t.push(check_row(name, &e, declared, f_star)?)?;
        let e = geometry::estimate_error_bound(&f, &sampler)?;
        t.push(check_row(name, &e, declared, f_star)?)?;
    } else {
        let e = geometry::estimate_pl(&f, &sampler, f_star, source)?;
        t.push(check_row(name, &e, declared, f_star)?)?;
    }
    Ok(t)
}

fn grad_check(
    a: &GradCheckArgs,
    cfg: ExperimentConfig,
    g: &GlobalArgs,
    console: &mut dyn Write,
) -> Result<()> {
    let kinds: Vec<ProblemKind> = match a.problem {
        Some(k) => vec![k],
        None => ProblemKind::ALL.to_vec(),
    };
    let mut t = Table::new(
        cfg,
        &["problem", "checked", "excluded", "max_rel_error", "passed"],
    );
    let mut failed = Vec::new();
    for kind in kinds {
        let args = ProblemArgs {
            problem: kind,
            d: 2,
            mu: 1.0,
            l: 2.0,
            c1: 1.0,
            c2: 0.5,
            depth: 2,
            eps: 0.01,
        };
        let n = if kind == ProblemKind::Quartic {
            a.n | 1
        } else {
            a.n
        };
        let b = build_problem(&args, n, g.seed)?;
        let f = EmpiricalRisk::new(&b.problem, &b.data)?;
        let rep = geometry::grad_check(&f, &RegionSampler::new(b.region, a.samples, g.seed))?;
        if !rep.passed {
            failed.push(format!(
                "{} (max rel. error {:e})",
                kind.name(),
                rep.max_rel_error
            ));
        }
        t.push(vec![
            kind.name().into(),
            rep.checked.into(),
            rep.excluded.into(),
            rep.max_rel_error.into(),
            rep.passed.into(),
        ])?;
    }
    emit(&t, "grad-check", g, console)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Construction(format!(
            "gradient check failed: {}",
            failed.join(", ")
        )))
    }
}

/// Wraps a learner and records the largest distance of any trained model to
/// the minimizer set of its training objective.
struct Tracked<'a> {
    inner: &'a dyn Learner,
    worst: Mutex<f64>,
}

impl<'a> Tracked<'a> {
    fn new(inner: &'a dyn Learner) -> Self {
        Self {
            inner,
            worst: Mutex::new(0.0),
        }
    }

    fn worst(&self) -> f64 {
        *self.worst.lock().expect("lock poisoned")
    }
}

impl Learner for Tracked<'_> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn is_randomized(&self) -> bool {
        self.inner.is_randomized()
    }

    fn train(
        &self,
        problem: &ProblemInstance,
        data: &LabeledDataset,
        stream: u64,
    ) -> Result<ParamVector> {
        let w = self.inner.train(problem, data, stream)?;
        let f = EmpiricalRisk::new(problem, data)?;
        let dist = f
            .project_to_minimizers(&w)
            .map_or(f64::NAN, |p| (&w - p).norm());
        let mut worst = self.worst.lock().expect("lock poisoned");
        *worst = if dist.is_nan() || worst.is_nan() {
            f64::NAN
        } else {
            worst.max(dist)
        };
        Ok(w)
    }
}

fn make_learner(
    kind: LearnerKind,
    dim: usize,
    t: usize,
    gamma: f64,
    seed: u64,
) -> Box<dyn Learner> {
    let run =
        |alg| RunConfig::new(alg, t, StepSchedule::Constant(gamma), optim::zeros(dim)).seed(seed);
    match kind {
        LearnerKind::Erm => Box::new(ErmOracle),
        LearnerKind::Gd => Box::new(run(Algorithm::Gd)),
        LearnerKind::Sgd => Box::new(run(Algorithm::Sgd)),
    }
}

fn declared_constants(problem: &ProblemInstance) -> Result<(f64, f64)> {
    let l = problem.constants.lipschitz.ok_or_else(|| {
        Error::Unsupported(format!(
            "{} has no declared Lipschitz constant",
            problem.kind.name()
        ))
    })?;
    let mu = problem.constants.pl.ok_or_else(|| {
        Error::Unsupported(format!(
            "{} has no declared PL constant",
            problem.kind.name()
        ))
    })?;
    Ok((l, mu))
}

fn stability_table(a: &StabilityArgs, cfg: ExperimentConfig, seed: u64) -> Result<Table> {
    let mut t = Table::new(
        cfg,
        &[
            "n",
            "mode",
            "measured",
            "bound",
            "ratio",
            "algorithm",
            "seed_base",
        ],
    );
    for &n in &a.ns {
        let b = build_problem(&a.problem, n, seed)?;
        let (l, mu) = declared_constants(&b.problem)?;
        let base = make_learner(a.alg, b.problem.dim, a.t, a.gamma, seed);
        let learner = Tracked::new(base.as_ref());
        let (measured, theorem, mode) = match a.mode {
            ModeKind::Uniform => {
                let s_prime = b.data.neighbor(n - 1, b.fresh.clone())?;
                let probes = stability::default_probes(b.problem.feature_dim, 1.0, seed);
                let mut probe = StabilityProbe::uniform(probes, a.replicas);
                probe.seed = seed;
                let u = stability::measure_uniform_stability(
                    &b.problem, &b.data, &s_prime, &learner, &probe,
                )?;
                (u.value, Theorem::PlUniform, "uniform")
            }
            ModeKind::Pointwise => {
                let mut probe = StabilityProbe::pointwise(a.replicas);
                probe.seed = seed;
                let v =
                    stability::measure_pointwise_stability(&b.problem, &b.data, &learner, &probe)?;
                (v, Theorem::PlPointwise, "pointwise")
            }
        };
        let eps = learner.worst();
        if eps.is_nan() {
            return Err(Error::Unsupported(
                "bound needs a minimizer projection for the trained models".into(),
            ));
        }
        let bound = stability::blackbox_bound(
            theorem,
            1,
            BoundInputs {
                lipschitz: l,
                mu,
                n: n as u64,
                eps: Some(eps),
                ..BoundInputs::default()
            },
        )?
        .bound;
        t.push(vec![
            n.into(),
            mode.into(),
            measured.into(),
            bound.into(),
            (measured / bound).into(),
            learner.name().into(),
            seed.into(),
        ])?;
    }
    Ok(t)
}

fn gen_gap_table(a: &GenGapArgs, cfg: ExperimentConfig, seed: u64) -> Result<Table> {
    if a.problem.problem != ProblemKind::Quadratic {
        return Err(Error::Unsupported(
            "gen-gap needs a data distribution; use --problem quadratic".into(),
        ));
    }
    let mut t = Table::new(
        cfg,
        &[
            "n",
            "algorithm",
            "trials",
            "mean_abs_gap",
            "mean_signed_gap",
            "se_signed",
            "uniform_bound",
            "pointwise_bound",
            "delta",
        ],
    );
    for &n in &a.ns {
        let b = build_problem(&a.problem, n.max(1), seed)?;
        let (l, mu) = declared_constants(&b.problem)?;
        let base = make_learner(a.alg, b.problem.dim, a.t, a.gamma, seed);
        let learner = Tracked::new(base.as_ref());
        let generator = UniformBall {
            d: a.problem.d,
            radius: 1.0,
        };
        let rep = stability::measure_generalization_gap(
            &b.problem, &generator, &learner, n, a.trials, a.holdout, seed,
        )?;
        let eps = learner.worst();
        let inputs = BoundInputs {
            lipschitz: l,
            mu,
            n: n as u64,
            eps: Some(eps),
            ..BoundInputs::default()
        };
        let uniform = stability::blackbox_bound(Theorem::PlUniform, 1, inputs)?.bound;
        let beta = stability::blackbox_bound(Theorem::PlPointwise, 1, inputs)?.bound;
        // Loss bound on the region: ½ λ_max (‖w‖ + ‖x‖)².
        let smooth = b.problem.constants.smoothness.unwrap_or(f64::NAN);
        let m = 0.5 * smooth * (2.0f64 + 1.0).powi(2);
        let pointwise = stability::generalization_bounds(GenMode::Pointwise {
            m,
            n: n as u64,
            beta,
            delta: a.delta,
        })?;
        t.push(vec![
            n.into(),
            learner.name().into(),
            rep.trials.into(),
            rep.mean_abs_gap.into(),
            rep.mean_signed_gap.into(),
            rep.se_signed.into(),
            uniform.into(),
            pointwise.into(),
            a.delta.into(),
        ])?;
    }
    Ok(t)
}

fn counterexample_table(a: &CounterexampleArgs, cfg: ExperimentConfig, seed: u64) -> Result<Table> {
    match a.experiment {
        Experiment::Gd => {
            let mut t = Table::new(
                cfg,
                &[
                    "n",
                    "init",
                    "w_s",
                    "w_s_prime",
                    "loss_s",
                    "loss_s_prime",
                    "gap",
                    "side_s",
                    "side_s_prime",
                    "iterations",
                    "converged",
                    "diverged",
                ],
            );
            for &n in &a.n {
                let rep = counterexample::gd_instability_experiment(
                    n, a.eps, a.gamma, a.t, a.inits, seed,
                )?;
                for r in rep.rows {
                    t.push(vec![
                        n.into(),
                        r.init.into(),
                        r.w_s.into(),
                        r.w_s_prime.into(),
                        r.loss_s.into(),
                        r.loss_s_prime.into(),
                        r.gap.into(),
                        Cell::Int(r.side_s.into()),
                        Cell::Int(r.side_s_prime.into()),
                        r.iterations.into(),
                        r.converged.into(),
                        r.diverged.into(),
                    ])?;
                }
            }
            Ok(t)
        }
        Experiment::Sgd => {
            let mut sgd = SgdConfig::standard(seed);
            sgd.iterations = a.sgd_steps;
            sgd.sampling = match a.sampling {
                SamplingKind::Plain => Sampling::Plain,
                SamplingKind::Stratified => {
                    let rare = a.replicas * 4 / 5;
                    Sampling::Stratified {
                        rare,
                        common: a.replicas - rare,
                    }
                }
            };
            let sweep = if a.n.len() >= 2 {
                Some(counterexample::sgd_sweep(&a.n, a.eps, &sgd, a.replicas)?)
            } else {
                None
            };
            let rows = match &sweep {
                Some(s) => s.rows.clone(),
                None => a
                    .n
                    .iter()
                    .map(|&n| counterexample::sgd_stability_experiment(n, a.eps, &sgd, a.replicas))
                    .collect::<Result<_>>()?,
            };
            let slope = sweep.map_or(f64::NAN, |s| s.slope);
            let mut t = Table::new(
                cfg,
                &[
                    "n",
                    "replicas",
                    "max_gap",
                    "signed_gap",
                    "argmax_x",
                    "argmax_y",
                    "gap_at_z_star",
                    "first_draw_frequency",
                    "one_over_n",
                    "split_fraction",
                    "mean_final_grad",
                    "diverged",
                    "sweep_slope",
                ],
            );
            for r in rows {
                t.push(vec![
                    r.n.into(),
                    r.replicas.into(),
                    r.value.into(),
                    r.signed.into(),
                    r.argmax.0.into(),
                    r.argmax.1.into(),
                    r.gap_at_z_star.into(),
                    r.first_draw_frequency.into(),
                    (1.0 / r.n as f64).into(),
                    r.split_fraction.into(),
                    r.mean_final_grad.into(),
                    r.diverged.into(),
                    slope.into(),
                ])?;
            }
            Ok(t)
        }
    }
}

const LINNET_COLUMNS: [&str; 14] = [
    "instance",
    "depth",
    "tau",
    "loss",
    "f_star",
    "grad_norm",
    "proj_slack",
    "grad_bound_slack",
    "pythagorean_residual",
    "pl_ratio",
    "pl_constant",
    "class",
    "gap",
    "region_exits",
];

fn linnet_row(k: usize, stack: &LayerStack, dm: &DataMatrices, exits: usize) -> Result<Vec<Cell>> {
    let grads = linnet::linnet_full_grad(stack, dm)?;
    let grad_norm = grads.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
    let tau = stack.tau();
    let pl_mu = if tau > 0.0 {
        linnet::pl_constant(stack.depth(), tau, dm)?
    } else {
        0.0
    };
    let class = linnet::classify_critical_point(stack, dm, 1e-8, 1e-6)?;
    let (label, gap) = match class {
        linnet::CriticalPoint::GlobalMin { gap } => ("global-min", gap),
        linnet::CriticalPoint::NotCritical { .. } => (
            "not-critical",
            linnet::linnet_loss(stack, dm)? - dm.f_star(),
        ),
        linnet::CriticalPoint::Degenerate { gap } => ("degenerate", gap),
        linnet::CriticalPoint::FullRankNonGlobal { gap } => ("full-rank-non-global", gap),
    };
    Ok(vec![
        k.into(),
        stack.depth().into(),
        tau.into(),
        linnet::linnet_loss(stack, dm)?.into(),
        dm.f_star().into(),
        grad_norm.into(),
        linnet::check_projection_lemma(stack, dm)?.slack.into(),
        linnet::check_grad_lower_bound(stack, dm)?.slack.into(),
        linnet::pythagorean_residual(stack, dm)?.into(),
        opt_num(linnet::pl_ratio(stack, dm)?),
        pl_mu.into(),
        label.into(),
        gap.into(),
        exits.into(),
    ])
}

/// GD from `stack`; returns the final stack and how many iterates left the
/// region `σ_min ≥ τ₀` of the starting stack.
fn linnet_train(
    stack: LayerStack,
    dm: &DataMatrices,
    steps: usize,
    gamma: f64,
) -> Result<(LayerStack, usize)> {
    if steps == 0 {
        return Ok((stack, 0));
    }
    let (depth, width, tau0) = (stack.depth(), stack.width(), stack.tau());
    let f = LinnetObjective::new(dm.clone(), depth)?;
    let cfg = RunConfig::new(
        Algorithm::Gd,
        steps,
        StepSchedule::Constant(gamma),
        stack.flatten(),
    )
    .record(optim::RecordMode::Full);
    let tr = optim::run_gd_on(&f, &cfg)?;
    let exits = linnet::region_exits(&tr.iterates, depth, width, tau0).len();
    Ok((LayerStack::from_flat(&tr.last, depth, width)?, exits))
}

fn linnet_table(a: &LinnetArgs, cfg: ExperimentConfig, seed: u64) -> Result<Table> {
    let mut t = Table::new(cfg, &LINNET_COLUMNS);
    if let (Some(xp), Some(yp)) = (&a.x, &a.y) {
        let dm = DataMatrices::new(linnet::read_matrix_csv(xp)?, linnet::read_matrix_csv(yp)?)?;
        let stack = match &a.layers {
            Some(p) => linnet::read_layers_csv(p)?,
            None => LayerStack::random(a.depth, dm.dim(), a.min_sigma, &mut rng::stream(seed, 1)),
        };
        let (stack, exits) = linnet_train(stack, &dm, a.train_steps, a.gamma)?;
        t.push(linnet_row(0, &stack, &dm, exits)?)?;
        return Ok(t);
    }
    for k in 0..a.instances {
        let mut r = rng::stream(seed, k as u64);
        let dm = DataMatrices::random(a.d, a.n, &mut r)?;
        let stack = LayerStack::random(a.depth, a.d, a.min_sigma, &mut r);
        let (stack, exits) = linnet_train(stack, &dm, a.train_steps, a.gamma)?;
        t.push(linnet_row(k, &stack, &dm, exits)?)?;
    }
    Ok(t)
}

fn schedule(a: &RunArgs) -> StepSchedule {
    match a.schedule {
        ScheduleKind::Constant => StepSchedule::Constant(a.gamma),
        ScheduleKind::Inverse => StepSchedule::InverseT(a.c),
        ScheduleKind::Kick => StepSchedule::KickThenDecay {
            kick: a.gamma,
            cap: a.cap,
            c: a.c,
        },
    }
}

fn run_table(a: &RunArgs, cfg: ExperimentConfig, seed: u64) -> Result<Table> {
    let b = build_problem(&a.problem, a.n, seed)?;
    let f = EmpiricalRisk::new(&b.problem, &b.data)?;
    let w0 = match (&a.w0, a.problem.problem) {
        (Some(v), _) => ParamVector::from_vec(v.clone()),
        (None, ProblemKind::Linnet) => {
            LayerStack::random(a.problem.depth, a.problem.d, 0.1, &mut rng::stream(seed, 1))
                .flatten()
        }
        (None, _) => optim::zeros(b.problem.dim),
    };
    let run_cfg = RunConfig::new(a.alg, a.t, schedule(a), w0)
        .seed(seed)
        .inner_len(a.m);
    if a.fit {
        let metric = match a.metric {
            MetricKind::Suboptimality => RateMetric::Suboptimality,
            MetricKind::Distance => RateMetric::Distance,
        };
        let fit = rates::fit_rate(&f, &run_cfg, a.replicas, metric)?;
        let theory = match (b.problem.constants.pl, b.problem.constants.smoothness) {
            (Some(mu), Some(l)) => {
                let inputs = RateInputs::new(a.alg, Setting::Pl(mu), l)
                    .gamma(a.gamma)
                    .d(b.problem.dim)
                    .m(a.m);
                rates::contraction_factor(&inputs).ok()
            }
            _ => None,
        };
        let verdict = match &fit.verdict {
            rates::FitVerdict::Fitted => "fitted".to_string(),
            rates::FitVerdict::Inconclusive(why) => format!("inconclusive: {why}"),
        };
        let mut t = Table::new(
            cfg,
            &[
                "algorithm",
                "rho_hat",
                "ci_lo",
                "ci_hi",
                "floor",
                "window_start",
                "window_end",
                "points",
                "replicas",
                "verdict",
                "theory_rho",
            ],
        );
        t.push(vec![
            a.alg.name().into(),
            fit.rho.into(),
            fit.ci.0.into(),
            fit.ci.1.into(),
            fit.floor.into(),
            fit.window.0.into(),
            fit.window.1.into(),
            fit.points.into(),
            fit.replicas.into(),
            verdict.into(),
            opt_num(theory),
        ])?;
        return Ok(t);
    }
    let tr = optim::run(&f, &run_cfg)?;
    let d = b.problem.dim;
    let mut columns: Vec<String> = ["t", "f", "grad_norm", "drift"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let full = !tr.iterates.is_empty();
    if full {
        columns.extend((0..d).map(|j| format!("w_{j}")));
    }
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut t = Table::new(cfg, &refs);
    for k in 0..tr.len() {
        let mut row: Vec<Cell> = vec![
            k.into(),
            tr.risks[k].into(),
            tr.grad_norms[k].into(),
            tr.drift[k].into(),
        ];
        if full {
            row.extend(tr.iterates[k].iter().map(|v| Cell::Num(*v)));
        }
        t.push(row)?;
    }
    Ok(t)
}

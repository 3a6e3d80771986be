//! Command-line front end.
//!
//! Exit codes: `0` success (test not rejected), `10` test rejected,
//! `64` usage error, `65` bad input data, `70` numerical or internal
//! failure, `74` I/O failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::are::{are_table, are_table_csv};
use crate::calibration::{
    default_cache_dir, run_independence, run_two_sample, CalibrationMode, NullRoute, TestOptions,
    TestReport, DEFAULT_REPLICATIONS,
};
use crate::error::Error;
use crate::lap::TiePolicy;
use crate::reference::{GridKind, GridSpec, NuTag, ReferenceGrid, ScoreKind};
use crate::sample::SampleMatrix;
use crate::simulation::{power_curve, ScenarioSpec, Setting, DEFAULT_NULL_REPLICATIONS};
use crate::statistics::{IndependenceInput, TestKind, TwoSampleInput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECT: i32 = 10;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_SOFTWARE: i32 = 70;
pub const EXIT_IO: i32 = 74;

/// Version of the `--json` report layout.
pub const JSON_SCHEMA: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "otrank", version, about = "Multivariate rank tests built on optimal transport")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Seed for every random choice (grids, jitter, null tables, simulations).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true, env = "OTRANK_THREADS")]
    pub threads: Option<usize>,
    /// Print nothing but results.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Write the result here as well as to stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test whether two samples come from the same distribution.
    TwoSample(TwoSampleCmd),
    /// Test independence between the first `--dx` columns and the rest.
    Independence(IndependenceCmd),
    /// Monte Carlo power curves for a simulation setting.
    PowerSim(PowerSimCmd),
    /// κ_d and elliptical lower bounds for d = 1..dmax.
    AreTable(AreTableCmd),
    /// Generate or re-export a reference grid.
    Grid(GridCmd),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NuArg {
    Gaussian,
    Uniform,
    Spherical,
}

impl From<NuArg> for NuTag {
    fn from(v: NuArg) -> Self {
        match v {
            NuArg::Gaussian => NuTag::Gaussian,
            NuArg::Uniform => NuTag::UniformCube,
            NuArg::Spherical => NuTag::SphericalUniform,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScoreArg {
    Identity,
    GaussianCdf,
    GaussianQuantile,
    VanDerWaerden,
}

impl From<ScoreArg> for ScoreKind {
    fn from(v: ScoreArg) -> Self {
        match v {
            ScoreArg::Identity => ScoreKind::Identity,
            ScoreArg::GaussianCdf => ScoreKind::CoordGaussianCdf,
            ScoreArg::GaussianQuantile => ScoreKind::CoordGaussianQuantile,
            ScoreArg::VanDerWaerden => ScoreKind::VanDerWaerden,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum CalibrationArg {
    Asymptotic,
    Permutation,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RouteArg {
    Label,
    FreshUniform,
    FreshGaussian,
}

impl From<RouteArg> for NullRoute {
    fn from(v: RouteArg) -> Self {
        match v {
            RouteArg::Label => NullRoute::LabelPermutation,
            RouteArg::FreshUniform => NullRoute::FreshUniform,
            RouteArg::FreshGaussian => NullRoute::FreshGaussian,
        }
    }
}

#[derive(Debug, Args)]
pub struct GridOpts {
    /// Reference distribution.
    #[arg(long, value_enum, default_value = "gaussian")]
    pub nu: NuArg,
    /// Draw the grid iid instead of using the deterministic construction.
    #[arg(long)]
    pub iid_grid: bool,
    /// Recenter the grid to mean zero.
    #[arg(long)]
    pub center: bool,
    /// Score applied to the ranks.
    #[arg(long, value_enum, default_value = "identity")]
    pub score: ScoreArg,
}

impl GridOpts {
    fn spec(&self, seed: u64) -> GridSpec {
        GridSpec {
            nu: self.nu.into(),
            kind: if self.iid_grid { GridKind::Iid } else { GridKind::Deterministic },
            seed,
            center: self.center,
        }
    }
}

#[derive(Debug, Args)]
pub struct TestOpts {
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "asymptotic")]
    pub calibration: CalibrationArg,
    /// Null replications for permutation calibration.
    #[arg(long = "B", alias = "replications", default_value_t = DEFAULT_REPLICATIONS)]
    pub replications: usize,
    /// How null draws are produced in permutation mode.
    #[arg(long, value_enum, default_value = "label")]
    pub route: RouteArg,
    /// Do not read or write cached null tables.
    #[arg(long)]
    pub no_cache: bool,
    /// Cache directory (default: $OTRANK_CACHE, else ~/.cache/otrank).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Break tied observations with a tiny seeded perturbation.
    #[arg(long)]
    pub jitter: bool,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

impl TestOpts {
    fn options(&self, seed: u64) -> TestOptions {
        let mode = match self.calibration {
            CalibrationArg::Asymptotic => CalibrationMode::Asymptotic,
            CalibrationArg::Permutation => CalibrationMode::Permutation {
                replications: self.replications,
                seed,
                route: self.route.into(),
                cache: if self.no_cache {
                    None
                } else {
                    self.cache_dir.clone().or_else(default_cache_dir)
                },
            },
        };
        TestOptions {
            alpha: self.alpha,
            mode,
        }
    }

    fn ties(&self, seed: u64) -> TiePolicy {
        if self.jitter {
            TiePolicy::Jitter { seed }
        } else {
            TiePolicy::Reject
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TwoSampleTest {
    RankHotelling,
    Hotelling,
}

#[derive(Debug, Args)]
pub struct TwoSampleCmd {
    /// First sample (CSV, rows are observations).
    pub x: PathBuf,
    /// Second sample.
    pub y: PathBuf,
    #[arg(long, value_enum, default_value = "rank-hotelling")]
    pub test: TwoSampleTest,
    #[command(flatten)]
    pub grid: GridOpts,
    #[command(flatten)]
    pub opts: TestOpts,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IndependenceTest {
    RankSpearman,
    Wilks,
    Rdcov,
}

#[derive(Debug, Args)]
pub struct IndependenceCmd {
    /// Joint sample (CSV); the first `--dx` columns form the first block.
    pub xy: PathBuf,
    #[arg(long)]
    pub dx: usize,
    #[arg(long, value_enum, default_value = "rank-spearman")]
    pub test: IndependenceTest,
    #[command(flatten)]
    pub grid: GridOpts,
    #[command(flatten)]
    pub opts: TestOpts,
}

#[derive(Debug, Args)]
pub struct PowerSimCmd {
    /// H1, H2, A1, A2, A3, A4 or konijn.
    #[arg(long)]
    pub setting: Setting,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Second block dimension (konijn only; defaults to `--d`).
    #[arg(long)]
    pub d2: Option<usize>,
    #[arg(long, default_value_t = 300)]
    pub m: usize,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    /// Comma-separated shifts (or δ values for konijn).
    #[arg(long, value_delimiter = ',')]
    pub thetas: Option<Vec<f64>>,
    #[arg(long = "B", alias = "replications", default_value_t = 500)]
    pub replications: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Calibration of the rank tests (Hotelling and Wilks always use χ²).
    #[arg(long, value_enum, default_value = "permutation")]
    pub calibration: CalibrationArg,
    /// Size of the universal null table behind each rank test.
    #[arg(long = "null-B", default_value_t = DEFAULT_NULL_REPLICATIONS)]
    pub null_replications: usize,
    /// Also print the gnuplot-friendly long format.
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Debug, Args)]
pub struct AreTableCmd {
    #[arg(long, default_value_t = 10)]
    pub dmax: usize,
}

#[derive(Debug, Args)]
pub struct GridCmd {
    /// Re-export an existing grid file instead of generating one.
    #[arg(long, conflicts_with_all = ["n", "d"])]
    pub import: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub nu: NuArg,
    #[arg(long, required_unless_present = "import")]
    pub n: Option<usize>,
    #[arg(long, required_unless_present = "import")]
    pub d: Option<usize>,
    #[arg(long)]
    pub iid: bool,
    #[arg(long)]
    pub center: bool,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => EXIT_IO,
            Error::Parse { .. }
            | Error::DimensionMismatch { .. }
            | Error::SizeMismatch { .. }
            | Error::NonFinite(_)
            | Error::TiedObservations { .. } => EXIT_DATA,
            Error::InvalidArgument(_) | Error::Domain { .. } | Error::UnsupportedReference(_) | Error::TooLarge { .. } => {
                EXIT_USAGE
            }
            Error::Degenerate(_) | Error::Singular(_) | Error::Convergence(_) => EXIT_SOFTWARE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    })
}

fn read_sample(path: &Path) -> CliResult<SampleMatrix> {
    SampleMatrix::parse_csv(&read_file(path)?).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema: u32,
    #[serde(flatten)]
    report: &'a TestReport,
}

fn render_report(report: &TestReport, json: bool) -> String {
    if json {
        let mut s = serde_json::to_string_pretty(&JsonReport {
            schema: JSON_SCHEMA,
            report,
        })
        .expect("report serializes");
        s.push('\n');
        return s;
    }
    let mut s = String::new();
    s.push_str(&format!("test:        {}\n", report.test));
    s.push_str(&format!("statistic:   {:.6}\n", report.statistic));
    if let Some(df) = report.df {
        s.push_str(&format!("df:          {df}\n"));
    }
    s.push_str(&format!("cutoff:      {:.6}\n", report.cutoff));
    s.push_str(&format!("p-value:     {:.6}\n", report.p_value));
    s.push_str(&format!("alpha:       {}\n", report.alpha));
    let cal = match report.calibration {
        crate::calibration::CalibrationSource::Asymptotic => "asymptotic",
        crate::calibration::CalibrationSource::Permutation => "permutation",
    };
    s.push_str(&format!("calibration: {cal}\n"));
    s.push_str(&format!(
        "decision:    {}\n",
        if report.decision { "reject H0" } else { "do not reject H0" }
    ));
    for (k, v) in &report.diagnostics {
        s.push_str(&format!("  {k} = {v}\n"));
    }
    s
}

struct Outcome {
    text: String,
    code: i32,
}

fn two_sample(cmd: &TwoSampleCmd, seed: u64) -> CliResult<Outcome> {
    let x = read_sample(&cmd.x)?;
    let y = read_sample(&cmd.y)?;
    let kind = match cmd.test {
        TwoSampleTest::RankHotelling => TestKind::RankHotelling,
        TwoSampleTest::Hotelling => TestKind::Hotelling,
    };
    let mut input = TwoSampleInput::new(x, y, cmd.grid.spec(seed), cmd.grid.score.into())?
        .with_ties(cmd.opts.ties(seed));
    if cmd.opts.jitter && kind == TestKind::Hotelling {
        input.x = input.x.jittered(seed);
        input.y = input.y.jittered(seed.wrapping_add(1));
    }
    let report = run_two_sample(kind, &input, &cmd.opts.options(seed))?;
    Ok(Outcome {
        text: render_report(&report, cmd.opts.json),
        code: if report.decision { EXIT_REJECT } else { EXIT_OK },
    })
}

fn independence(cmd: &IndependenceCmd, seed: u64) -> CliResult<Outcome> {
    let xy = read_sample(&cmd.xy)?;
    if cmd.dx == 0 || cmd.dx >= xy.dim() {
        return Err(CliError {
            code: EXIT_USAGE,
            message: format!("--dx must be between 1 and {} for {} columns", xy.dim().saturating_sub(1), xy.dim()),
        });
    }
    let (x, y) = xy.split_columns(cmd.dx)?;
    let kind = match cmd.test {
        IndependenceTest::RankSpearman => TestKind::RankSpearman,
        IndependenceTest::Wilks => TestKind::Wilks,
        IndependenceTest::Rdcov => TestKind::RankDcov,
    };
    let input = IndependenceInput::symmetric(x, y, cmd.grid.spec(seed), cmd.grid.score.into())?
        .with_ties(cmd.opts.ties(seed));
    let report = run_independence(kind, &input, &cmd.opts.options(seed))?;
    Ok(Outcome {
        text: render_report(&report, cmd.opts.json),
        code: if report.decision { EXIT_REJECT } else { EXIT_OK },
    })
}

fn power_sim(cmd: &PowerSimCmd, seed: u64) -> CliResult<Outcome> {
    let mut spec = ScenarioSpec::new(cmd.setting, cmd.d, seed);
    spec.d2 = cmd.d2.unwrap_or(cmd.d);
    spec.m = cmd.m;
    spec.n = cmd.n;
    spec.replications = cmd.replications;
    spec.alpha = cmd.alpha;
    spec.null_replications = match cmd.calibration {
        CalibrationArg::Asymptotic => None,
        CalibrationArg::Permutation => Some(cmd.null_replications),
    };
    if let Some(t) = &cmd.thetas {
        spec.thetas = t.clone();
    }
    let curve = power_curve(&spec)?;
    let mut text = curve.to_csv();
    if cmd.gnuplot {
        text.push('\n');
        text.push_str(&curve.to_gnuplot());
    }
    Ok(Outcome { text, code: EXIT_OK })
}

fn grid(cmd: &GridCmd, seed: u64) -> CliResult<Outcome> {
    let grid = match &cmd.import {
        Some(path) => ReferenceGrid::from_csv(&read_file(path)?)?,
        None => {
            let spec = GridSpec {
                nu: cmd.nu.into(),
                kind: if cmd.iid { GridKind::Iid } else { GridKind::Deterministic },
                seed,
                center: cmd.center,
            };
            spec.build(cmd.n.unwrap_or_default(), cmd.d.unwrap_or_default())?
        }
    };
    Ok(Outcome {
        text: grid.to_csv(),
        code: EXIT_OK,
    })
}

fn dispatch(cli: &Cli) -> CliResult<Outcome> {
    let seed = cli.global.seed;
    match &cli.command {
        Command::TwoSample(c) => two_sample(c, seed),
        Command::Independence(c) => independence(c, seed),
        Command::PowerSim(c) => power_sim(c, seed),
        Command::AreTable(c) => Ok(Outcome {
            text: are_table_csv(&are_table(c.dmax)?),
            code: EXIT_OK,
        }),
        Command::Grid(c) => grid(c, seed),
    }
}

/// Runs the CLI on `args` (including the program name), writing results
/// to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(rendered.as_bytes())
            } else {
                err.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: thread pool: {e}");
            return EXIT_SOFTWARE;
        }
    };
    let started = std::time::Instant::now();
    match pool.install(|| dispatch(&cli)) {
        Ok(outcome) => {
            if let Some(path) = &cli.global.output {
                if let Err(e) = fs::write(path, &outcome.text) {
                    let _ = writeln!(err, "error: {}: {e}", path.display());
                    return EXIT_IO;
                }
            }
            if out.write_all(outcome.text.as_bytes()).is_err() {
                return EXIT_IO;
            }
            if !cli.global.quiet {
                let _ = writeln!(err, "done in {:.2}s", started.elapsed().as_secs_f64());
            }
            outcome.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

/// Entry point used by the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

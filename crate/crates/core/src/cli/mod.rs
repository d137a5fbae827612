//! The `kicklab` command line.
//!
//! Each subcommand reads its options from flags and, optionally, from a JSON
//! object given with `--config`; flags win. Results go to `<stem>.json` (with
//! the resolved configuration echoed) and, for tabular results, `<stem>.csv`
//! in `--out-dir`, which defaults to `$KICKLAB_OUT_DIR` or `.`.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! numerical failures and output errors.

pub mod kicks;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::analysis::{self, AnalysisError, GridSpec, ScanConfig, TriKicks};
use crate::construct_eus::{self, EusBuild, EusConfig, EusError};
use crate::construct_seq::{self, SeqConstruction, SeqError};
use crate::evolution::{EvolveError, KickError};
use crate::mat2::{Iwasawa, Mat2R, MatError};

use kicks::{parse_list, KickSpec};
use output::{to_json, write_file, Cell, Table};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) | CliError::Output(_) => 2,
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Invalid(_) | AnalysisError::BelowThreshold { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SeqError> for CliError {
    fn from(e: SeqError) -> Self {
        match e {
            SeqError::BadTarget(_) | SeqError::NoTargets | SeqError::NoSuchTarget(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<EusError> for CliError {
    fn from(e: EusError) -> Self {
        match e {
            EusError::BadSeed(_) | EusError::Malformed(_) | EusError::NotMember { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<EvolveError> for CliError {
    fn from(e: EvolveError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<KickError> for CliError {
    fn from(e: KickError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<MatError> for CliError {
    fn from(e: MatError) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "kicklab",
    version,
    about = "Kicked SL(2,R) products: scans, growth maps and constructions"
)]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "KICKLAB_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
    /// JSON object with subcommand options; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for scans and maps (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Stem of the output files (default: the subcommand name).
    #[arg(long, global = true)]
    pub name: Option<String>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify `t` cells of an interval as bounded or growing.
    Scan(ScanArgs),
    /// `log‖P_N(z)‖ / N` on a complex grid, with its majorant and lower bound.
    GrowthMap(GrowthMapArgs),
    /// Rotation kicks making given targets bounded, verified at each target.
    ConstructSeq(SeqArgs),
    /// Ruler-ordered kick coefficients with an unbounded bounded-set.
    ConstructEus(EusArgs),
    /// Re-check a saved construction and test points for boundedness.
    Verify(VerifyArgs),
    /// Exit windows for upper-triangular kicks.
    ExitWindow(WindowArgs),
    /// The recurrence `q_{k+1} = (2 + t c_k) q_k − q_{k−1}`.
    Schrodinger(SchrodingerArgs),
    /// Shear, scale and angle of a unimodular matrix.
    Iwasawa(IwasawaArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Scan(_) => "scan",
            Command::GrowthMap(_) => "growth-map",
            Command::ConstructSeq(_) => "construct-seq",
            Command::ConstructEus(_) => "construct-eus",
            Command::Verify(_) => "verify",
            Command::ExitWindow(_) => "exit-window",
            Command::Schrodinger(_) => "schrodinger",
            Command::Iwasawa(_) => "iwasawa",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ScanArgs {
    /// Kick source (default `constant-m:-1`).
    #[arg(long)]
    pub kicks: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_min: Option<f64>,
    #[arg(long, visible_alias = "T", allow_negative_numbers = true)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub cells: Option<usize>,
    /// Steps `N` per cell.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Norm threshold `M`.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub slope_tol: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub refine: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GrowthMapArgs {
    /// Kick source (default `random:seed=0,bound=2`).
    #[arg(long)]
    pub kicks: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub re_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub re_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub im_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub im_max: Option<f64>,
    #[arg(long)]
    pub re_points: Option<usize>,
    #[arg(long)]
    pub im_points: Option<usize>,
    #[arg(long)]
    pub horizon: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SeqArgs {
    /// Target periods `t_1, t_2, …`.
    #[arg(allow_negative_numbers = true)]
    #[serde(default)]
    pub targets: Vec<f64>,
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Allowed growth factor of the running max between the two halves.
    #[arg(long)]
    pub factor: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EusArgs {
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub max_halvings: Option<u32>,
    #[arg(long)]
    pub slack: Option<f64>,
    #[arg(long)]
    pub excision: Option<f64>,
    #[arg(long)]
    pub root_grid: Option<usize>,
    #[arg(long)]
    pub tail_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct VerifyArgs {
    /// A `.build.json` written by `construct-eus` or `construct-seq`.
    #[arg(long)]
    pub build: Option<PathBuf>,
    /// Points to test; defaults to evenly spread points of the constructed set.
    #[arg(allow_negative_numbers = true)]
    #[serde(default)]
    pub points: Vec<f64>,
    /// Number of spread points when none are given.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Allowed growth, in nats, of the running max between the two halves.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct WindowArgs {
    /// A `triangular:L/S,…` kick spec; otherwise random kicks are drawn.
    #[arg(long)]
    pub kicks: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random kicks.
    #[arg(long)]
    pub length: Option<usize>,
    /// Shear parameter; defaults to `t₀ + 1`.
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    /// Norm level `K` to exceed.
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Number of starting indices to probe.
    #[arg(long)]
    pub starts: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SchrodingerArgs {
    /// Periodic potential `c_1, c_2, …` (default `-1`).
    #[arg(long, allow_hyphen_values = true)]
    pub coeffs: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub q0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub q1: Option<f64>,
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Number of leading terms to print.
    #[arg(long)]
    pub keep: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct IwasawaArgs {
    /// Rows separated by `;`, e.g. `"1 2; 0 1"`.
    #[arg(allow_hyphen_values = true)]
    pub matrix: Option<String>,
}

/// Files written and a human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Report<'a, C: Serialize, R: Serialize> {
    command: &'a str,
    version: &'a str,
    config: C,
    result: R,
}

struct Sink<'a> {
    dir: &'a Path,
    stem: String,
    command: &'static str,
    files: Vec<PathBuf>,
}

impl Sink<'_> {
    fn report<C: Serialize, R: Serialize>(&mut self, config: C, result: R) -> Result<(), CliError> {
        let report = Report {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            result,
        };
        let path = write_file(self.dir, &format!("{}.json", self.stem), &to_json(&report)?)?;
        self.files.push(path);
        Ok(())
    }

    fn table(&mut self, table: &Table) -> Result<(), CliError> {
        let path = write_file(self.dir, &format!("{}.csv", self.stem), &table.to_csv()?)?;
        self.files.push(path);
        Ok(())
    }

    fn extra<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<(), CliError> {
        let path = write_file(
            self.dir,
            &format!("{}.{suffix}", self.stem),
            &to_json(value)?,
        )?;
        self.files.push(path);
        Ok(())
    }
}

fn is_absent(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::Array(a) => a.is_empty(),
        _ => false,
    }
}

/// Overlays the flags on the config-file object.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&Value>) -> Result<T, CliError> {
    let mut base = match file {
        None => Map::new(),
        Some(Value::Object(m)) => m.clone(),
        Some(_) => {
            return Err(CliError::Usage(
                "config file must hold a JSON object".into(),
            ))
        }
    };
    if let Value::Object(over) =
        serde_json::to_value(flags).map_err(|e| CliError::Usage(e.to_string()))?
    {
        base.extend(over.into_iter().filter(|(_, v)| !is_absent(v)));
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Usage(format!("config: {e}")))
}

fn read_config(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let file = cli.config.as_deref().map(read_config).transpose()?;
    let mut sink = Sink {
        dir: &cli.out_dir,
        stem: cli
            .name
            .clone()
            .unwrap_or_else(|| cli.command.name().to_string()),
        command: cli.command.name(),
        files: Vec::new(),
    };
    let dispatch = |sink: &mut Sink| -> Result<String, CliError> {
        let file = file.as_ref();
        match &cli.command {
            Command::Scan(a) => scan(merge(a, file)?, sink),
            Command::GrowthMap(a) => growth_map(merge(a, file)?, sink),
            Command::ConstructSeq(a) => construct_seq(merge(a, file)?, sink),
            Command::ConstructEus(a) => construct_eus(merge(a, file)?, sink),
            Command::Verify(a) => verify(merge(a, file)?, sink),
            Command::ExitWindow(a) => exit_window(merge(a, file)?, sink),
            Command::Schrodinger(a) => schrodinger(merge(a, file)?, sink),
            Command::Iwasawa(a) => iwasawa(merge(a, file)?, sink),
        }
    };
    let summary = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| dispatch(&mut sink))?,
        None => dispatch(&mut sink)?,
    };
    Ok(Outcome {
        summary,
        files: sink.files,
    })
}

/// Parses `args` (program name first), runs, reports on stdout/stderr and
/// returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            if !cli.quiet {
                println!("{}", outcome.summary);
                for f in &outcome.files {
                    println!("wrote {}", f.display());
                }
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn kick_spec(text: Option<&str>, default: &str) -> Result<(String, KickSpec), CliError> {
    let text = text.unwrap_or(default).to_string();
    let spec = text.parse()?;
    Ok((text, spec))
}

#[derive(Serialize)]
struct WithKicks<C: Serialize> {
    kicks: String,
    #[serde(flatten)]
    rest: C,
}

fn scan(args: ScanArgs, sink: &mut Sink) -> Result<String, CliError> {
    let d = ScanConfig::default();
    let cfg = ScanConfig {
        t_min: args.t_min.unwrap_or(d.t_min),
        t_max: args.t_max.unwrap_or(d.t_max),
        cells: args.cells.unwrap_or(d.cells),
        horizon: args.horizon.unwrap_or(d.horizon),
        threshold: args.threshold.unwrap_or(d.threshold),
        slope_tol: args.slope_tol.unwrap_or(d.slope_tol),
        refine: args.refine.unwrap_or(d.refine),
    };
    let (text, spec) = kick_spec(args.kicks.as_deref(), "constant-m:-1")?;
    let source = spec.source(cfg.horizon)?;
    let result = analysis::scan(source.as_ref(), &cfg)?;
    let mut table = Table::new(&[
        "t",
        "sup_lognorm",
        "slope",
        "bounded_sup",
        "bounded_slope",
        "bounded",
        "weight",
    ]);
    for c in &result.cells {
        table.push(vec![
            c.t.into(),
            c.sup_lognorm.into(),
            c.slope.into(),
            c.bounded_sup.into(),
            c.bounded_slope.into(),
            c.bounded.into(),
            c.weight.into(),
        ]);
    }
    sink.table(&table)?;
    let summary = format!(
        "bounded cells {} of {}; measure {:.6} (sup-only {:.6}, slope-only {:.6})",
        result.bounded_cells, cfg.cells, result.measure, result.measure_sup, result.measure_slope
    );
    sink.report(
        WithKicks {
            kicks: text,
            rest: cfg,
        },
        result,
    )?;
    Ok(summary)
}

fn growth_map(args: GrowthMapArgs, sink: &mut Sink) -> Result<String, CliError> {
    let grid = GridSpec {
        re_min: args.re_min.unwrap_or(0.0),
        re_max: args.re_max.unwrap_or(8.0),
        im_min: args.im_min.unwrap_or(0.0),
        im_max: args.im_max.unwrap_or(2.0),
        re_points: args.re_points.unwrap_or(64),
        im_points: args.im_points.unwrap_or(64),
    };
    let horizon = args.horizon.unwrap_or(2000);
    let (text, spec) = kick_spec(args.kicks.as_deref(), "random:seed=0,bound=2")?;
    let source = spec.source(horizon)?;
    let map = analysis::growth_map(source.as_ref(), &grid, horizon)?;
    let mut table = Table::new(&["re", "im", "u", "majorant", "lower"]);
    for p in &map.points {
        table.push(vec![
            p.z.re.into(),
            p.z.im.into(),
            p.u.into(),
            p.majorant.into(),
            p.lower.into(),
        ]);
    }
    sink.table(&table)?;
    let summary = format!(
        "majorant violations {} of {}; min excess over lower bound {}",
        map.violations,
        map.points.len(),
        map.min_excess.map_or("n/a".into(), |e| format!("{e:.6}"))
    );
    #[derive(Serialize)]
    struct Config {
        grid: GridSpec,
        horizon: u64,
    }
    sink.report(
        WithKicks {
            kicks: text,
            rest: Config { grid, horizon },
        },
        &map,
    )?;
    Ok(summary)
}

#[derive(Serialize, Deserialize)]
struct SeqBuildFile {
    kind: String,
    targets: Vec<f64>,
    angles: Vec<f64>,
    square_defects: Vec<f64>,
}

#[derive(Serialize)]
struct SeqTargetReport {
    target: f64,
    horizon: u64,
    sup_lognorm: f64,
    stabilized: bool,
    detail: construct_seq::StabilityReport,
}

fn seq_reports(
    construction: &SeqConstruction,
    horizon: u64,
    tolerance: f64,
) -> Result<Vec<SeqTargetReport>, CliError> {
    let kicks = construction.kicks();
    construction
        .targets()
        .par_iter()
        .map(|&t| {
            let r = construct_seq::stability(&kicks, t, horizon, tolerance)?;
            Ok(SeqTargetReport {
                target: t,
                horizon,
                sup_lognorm: r.sup_lognorm,
                stabilized: r.stabilized,
                detail: r,
            })
        })
        .collect()
}

fn construct_seq(args: SeqArgs, sink: &mut Sink) -> Result<String, CliError> {
    let horizon = args.horizon.unwrap_or(1 << 15);
    let factor = args.factor.unwrap_or(1.0 + 1e-6);
    if !(factor > 1.0) {
        return Err(CliError::Usage("--factor must exceed 1".into()));
    }
    let construction = SeqConstruction::build(&args.targets)?;
    let reports = seq_reports(&construction, horizon, factor.ln())?;
    let mut table = Table::new(&[
        "level",
        "target",
        "angle",
        "square_defect",
        "sup_lognorm",
        "stabilized",
    ]);
    for (i, r) in reports.iter().enumerate() {
        table.push(vec![
            (i + 1).into(),
            r.target.into(),
            construction.angles()[i].into(),
            construction.square_defects()[i].into(),
            r.sup_lognorm.into(),
            r.stabilized.into(),
        ]);
    }
    sink.table(&table)?;
    let file = SeqBuildFile {
        kind: "seq".into(),
        targets: construction.targets().to_vec(),
        angles: construction.angles().to_vec(),
        square_defects: construction.square_defects().to_vec(),
    };
    sink.extra("build.json", &file)?;
    let all = reports.iter().all(|r| r.stabilized);
    #[derive(Serialize)]
    struct Config<'a> {
        targets: &'a [f64],
        horizon: u64,
        factor: f64,
    }
    #[derive(Serialize)]
    struct Out<'a> {
        angles: &'a [f64],
        square_defects: &'a [f64],
        targets: Vec<SeqTargetReport>,
        stabilized: bool,
    }
    let summary = format!(
        "{} targets, stabilized at horizon {horizon}: {}",
        reports.len(),
        verdict(all)
    );
    sink.report(
        Config {
            targets: &args.targets,
            horizon,
            factor,
        },
        Out {
            angles: construction.angles(),
            square_defects: construction.square_defects(),
            targets: reports,
            stabilized: all,
        },
    )?;
    Ok(summary)
}

fn eus_config(args: &EusArgs) -> EusConfig {
    let d = EusConfig::default();
    EusConfig {
        depth: args.depth.unwrap_or(d.depth),
        c0: args.c0.unwrap_or(d.c0),
        samples: args.samples.unwrap_or(d.samples),
        max_halvings: args.max_halvings.unwrap_or(d.max_halvings),
        slack: args.slack.unwrap_or(d.slack),
        excision: args.excision.unwrap_or(d.excision),
        root_grid: args.root_grid.unwrap_or(d.root_grid),
        tail_ratio: args.tail_ratio.unwrap_or(d.tail_ratio),
        search: d.search,
    }
}

#[derive(Serialize)]
struct EusSummary {
    coeffs: Vec<f64>,
    eps: Vec<f64>,
    windows: Vec<construct_eus::Interval>,
    final_measure: f64,
    core_measure: f64,
    core_intervals: usize,
    invariants: construct_eus::InvariantReport,
    holds: bool,
}

fn eus_summary(build: &EusBuild) -> Result<EusSummary, CliError> {
    let invariants = construct_eus::check_invariants(build)?;
    let core = build.core_set();
    Ok(EusSummary {
        coeffs: build.coeffs.clone(),
        eps: build.eps(),
        windows: build.windows(),
        final_measure: build.final_set().measure(),
        core_measure: core.measure(),
        core_intervals: core.intervals().len(),
        holds: invariants.holds(),
        invariants,
    })
}

fn construct_eus(args: EusArgs, sink: &mut Sink) -> Result<String, CliError> {
    let cfg = eus_config(&args);
    let build = construct_eus::build_eus(&cfg)?;
    let summary = eus_summary(&build)?;
    let mut table = Table::new(&[
        "level",
        "coeff",
        "eps",
        "window_lo",
        "window_hi",
        "trace_zero",
        "drift",
        "halvings",
        "measure",
    ]);
    for l in &build.levels {
        table.push(vec![
            l.n.into(),
            l.coeff.into(),
            l.eps.into(),
            l.window.lo.into(),
            l.window.hi.into(),
            l.trace_zero.into(),
            l.drift.into(),
            Cell::Int(l.halvings as i64),
            l.set.measure().into(),
        ]);
    }
    sink.table(&table)?;
    sink.extra("build.json", &build)?;
    let line = format!(
        "depth {}: invariants {}; core set measure {:.6} in {} intervals",
        build.depth(),
        verdict(summary.holds),
        summary.core_measure,
        summary.core_intervals
    );
    sink.report(cfg, summary)?;
    Ok(line)
}

fn verify(args: VerifyArgs, sink: &mut Sink) -> Result<String, CliError> {
    let path = args
        .build
        .clone()
        .ok_or_else(|| CliError::Usage("verify needs --build".into()))?;
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if value.get("kind").and_then(Value::as_str) == Some("seq") {
        verify_seq(&args, &value, sink)
    } else {
        verify_eus(&args, &EusBuild::from_json(&text)?, sink)
    }
}

fn verify_seq(args: &VerifyArgs, value: &Value, sink: &mut Sink) -> Result<String, CliError> {
    let saved: SeqBuildFile =
        serde_json::from_value(value.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
    let horizon = args.horizon.unwrap_or(1 << 15);
    let tolerance = args.tolerance.unwrap_or(1e-6f64.ln_1p());
    let construction = SeqConstruction::build(&saved.targets)?;
    let angle_error = construction
        .angles()
        .iter()
        .zip(&saved.angles)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let points = if args.points.is_empty() {
        saved.targets.clone()
    } else {
        args.points.clone()
    };
    let kicks = construction.kicks();
    let reports: Vec<SeqTargetReport> = points
        .par_iter()
        .map(|&t| {
            let r = construct_seq::stability(&kicks, t, horizon, tolerance)?;
            Ok(SeqTargetReport {
                target: t,
                horizon,
                sup_lognorm: r.sup_lognorm,
                stabilized: r.stabilized,
                detail: r,
            })
        })
        .collect::<Result<_, CliError>>()?;
    let mut table = Table::new(&[
        "t",
        "sup_lognorm",
        "first_half_max",
        "second_half_max",
        "stabilized",
    ]);
    for r in &reports {
        table.push(vec![
            r.target.into(),
            r.sup_lognorm.into(),
            r.detail.first_half_max.into(),
            r.detail.second_half_max.into(),
            r.stabilized.into(),
        ]);
    }
    sink.table(&table)?;
    let all = reports.iter().all(|r| r.stabilized);
    #[derive(Serialize)]
    struct Config {
        build: PathBuf,
        horizon: u64,
        tolerance: f64,
    }
    #[derive(Serialize)]
    struct Out {
        angle_reproduction: f64,
        points: Vec<SeqTargetReport>,
        stabilized: bool,
    }
    let summary = format!(
        "{} points at horizon {horizon}: {}",
        reports.len(),
        verdict(all)
    );
    sink.report(
        Config {
            build: args.build.clone().unwrap_or_default(),
            horizon,
            tolerance,
        },
        Out {
            angle_reproduction: angle_error,
            points: reports,
            stabilized: all,
        },
    )?;
    Ok(summary)
}

fn verify_eus(args: &VerifyArgs, build: &EusBuild, sink: &mut Sink) -> Result<String, CliError> {
    let horizon = args.horizon.unwrap_or(1 << 14);
    let tolerance = args.tolerance.unwrap_or(std::f64::consts::LN_2);
    let points = if args.points.is_empty() {
        build.core_set().spread(args.samples.unwrap_or(20))
    } else {
        args.points.clone()
    };
    let summary = eus_summary(build)?;
    let members: Vec<construct_eus::MembershipReport> = points
        .par_iter()
        .map(|&t| construct_eus::verify_membership(build, t, horizon, tolerance))
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(&[
        "t",
        "born",
        "first_half_max",
        "second_half_max",
        "stabilized",
        "elliptic",
        "proof_log_bound",
        "passed",
    ]);
    for m in &members {
        table.push(vec![
            m.t.into(),
            m.born.into(),
            m.first_half_max.into(),
            m.second_half_max.into(),
            m.stabilized.into(),
            m.elliptic.into(),
            m.proof_log_bound.into(),
            m.passed().into(),
        ]);
    }
    sink.table(&table)?;
    let passed = members.iter().filter(|m| m.passed()).count();
    #[derive(Serialize)]
    struct Config {
        build: PathBuf,
        horizon: u64,
        tolerance: f64,
        points: Vec<f64>,
    }
    #[derive(Serialize)]
    struct Out {
        construction: EusSummary,
        members: Vec<construct_eus::MembershipReport>,
        passed: usize,
        all_passed: bool,
    }
    let line = format!(
        "invariants {}; {passed} of {} points stabilized and elliptic",
        verdict(summary.holds),
        members.len()
    );
    let all_passed = passed == members.len();
    sink.report(
        Config {
            build: args.build.clone().unwrap_or_default(),
            horizon,
            tolerance,
            points,
        },
        Out {
            construction: summary,
            members,
            passed,
            all_passed,
        },
    )?;
    Ok(line)
}

fn exit_window(args: WindowArgs, sink: &mut Sink) -> Result<String, CliError> {
    let tri = match args.kicks.as_deref() {
        Some(text) => match text.parse::<KickSpec>()? {
            KickSpec::Triangular { scales, shears } => TriKicks::new(scales, shears)?,
            _ => {
                return Err(CliError::Usage(
                    "exit-window needs a triangular: kick spec".into(),
                ))
            }
        },
        None => TriKicks::random(args.seed.unwrap_or(0), args.length.unwrap_or(1000)),
    };
    if tri.is_empty() {
        return Err(CliError::Usage("no triangular kicks".into()));
    }
    let t = args.t.unwrap_or(tri.threshold() + 1.0);
    let level = args.level.unwrap_or(4.0);
    let n_max = args.n_max.unwrap_or(tri.len());
    let starts = args.starts.unwrap_or(1);
    let report = analysis::exit_window(&tri, t, level, n_max, starts)?;
    let mut table = Table::new(&["start", "first_exit"]);
    for (j, m) in report.first_exits.iter().enumerate() {
        table.push(vec![j.into(), (*m).into()]);
    }
    sink.table(&table)?;
    let summary = format!(
        "t = {t} (threshold {:.6}): window {} vs bound {:.6}",
        report.threshold,
        report.window.map_or("none".into(), |w| w.to_string()),
        report.bound
    );
    #[derive(Serialize)]
    struct Config {
        scales: Vec<f64>,
        shears: Vec<f64>,
        t: f64,
        level: f64,
        n_max: usize,
        starts: usize,
    }
    sink.report(
        Config {
            scales: tri.scales().to_vec(),
            shears: tri.shears().to_vec(),
            t,
            level,
            n_max,
            starts,
        },
        report,
    )?;
    Ok(summary)
}

fn schrodinger(args: SchrodingerArgs, sink: &mut Sink) -> Result<String, CliError> {
    let coeffs = parse_list(args.coeffs.as_deref().unwrap_or("-1"))?;
    let t = args.t.unwrap_or(1.0);
    let (q0, q1) = (args.q0.unwrap_or(0.0), args.q1.unwrap_or(1.0));
    let horizon = args.horizon.unwrap_or(10_000);
    let tolerance = args.tolerance.unwrap_or(std::f64::consts::LN_2);
    let keep = args.keep.unwrap_or(32);
    let report = analysis::schrodinger(&coeffs, t, q0, q1, horizon, tolerance, keep)?;
    let matrix = analysis::matrix_verdict(&coeffs, t, horizon, tolerance)?;
    let mut table = Table::new(&["k", "q"]);
    for (k, q) in report.head.iter().enumerate() {
        table.push(vec![k.into(), (*q).into()]);
    }
    sink.table(&table)?;
    let summary = format!(
        "recurrence {}, matrix product {}; slope {:.6}",
        if report.bounded { "bounded" } else { "growing" },
        if matrix { "bounded" } else { "growing" },
        report.slope
    );
    #[derive(Serialize)]
    struct Config {
        coeffs: Vec<f64>,
        t: f64,
        q0: f64,
        q1: f64,
        horizon: u64,
        tolerance: f64,
        keep: usize,
    }
    #[derive(Serialize)]
    struct Out {
        recurrence: analysis::SchrodingerReport,
        matrix_bounded: bool,
        agree: bool,
    }
    let agree = report.bounded == matrix;
    sink.report(
        Config {
            coeffs,
            t,
            q0,
            q1,
            horizon,
            tolerance,
            keep,
        },
        Out {
            recurrence: report,
            matrix_bounded: matrix,
            agree,
        },
    )?;
    Ok(summary)
}

/// `"a b; c d"` (commas also separate entries).
pub fn parse_matrix(text: &str) -> Result<Mat2R, CliError> {
    let rows: Vec<Vec<f64>> = text.split(';').map(parse_list).collect::<Result<_, _>>()?;
    match rows.as_slice() {
        [r1, r2] if r1.len() == 2 && r2.len() == 2 => Ok(Mat2R::new(r1[0], r1[1], r2[0], r2[1])),
        _ => match rows.concat().as_slice() {
            &[a, b, c, d] if rows.len() == 1 => Ok(Mat2R::new(a, b, c, d)),
            _ => Err(CliError::Usage(format!(
                "expected a 2x2 matrix like \"1 2; 0 1\", got {text:?}"
            ))),
        },
    }
}

fn iwasawa(args: IwasawaArgs, sink: &mut Sink) -> Result<String, CliError> {
    let text = args
        .matrix
        .ok_or_else(|| CliError::Usage("iwasawa needs a matrix".into()))?;
    let m = parse_matrix(&text)?;
    let f = Iwasawa::of(&m)?;
    let reconstruction = f.matrix().distance(&m);
    let summary = format!("s = {} lambda = {} alpha = {}", f.shear, f.scale, f.angle);
    #[derive(Serialize)]
    struct Out {
        shear: f64,
        scale: f64,
        angle: f64,
        reconstruction: f64,
        norm: f64,
        inverse_norm: f64,
    }
    let inverse_norm = m.inverse()?.op_norm();
    sink.report(
        serde_json::json!({ "matrix": [[m.a11, m.a12], [m.a21, m.a22]] }),
        Out {
            shear: f.shear,
            scale: f.scale,
            angle: f.angle,
            reconstruction,
            norm: m.op_norm(),
            inverse_norm,
        },
    )?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = serde_json::json!({"cells": 10, "t-max": 5.0});
        let flags = ScanArgs {
            cells: Some(20),
            ..Default::default()
        };
        let merged = merge(&flags, Some(&file)).unwrap();
        assert_eq!(merged.cells, Some(20));
        assert_eq!(merged.t_max, Some(5.0));
        let unknown = serde_json::json!({"cellz": 10});
        assert!(matches!(
            merge(&flags, Some(&unknown)),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn matrix_text() {
        assert_eq!(
            parse_matrix("1 2; 0 1").unwrap(),
            Mat2R::new(1.0, 2.0, 0.0, 1.0)
        );
        assert_eq!(
            parse_matrix("1,2,0,1").unwrap(),
            Mat2R::new(1.0, 2.0, 0.0, 1.0)
        );
        assert!(parse_matrix("1 2 3").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with(["kicklab", "no-such-command"]), 1);
        assert_eq!(
            main_with([
                "kicklab",
                "iwasawa",
                "--quiet",
                "--out-dir",
                "/nonexistent/\0bad",
                "1 1; 1 1"
            ]),
            1
        );
    }
}

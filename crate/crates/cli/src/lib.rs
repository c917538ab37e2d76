//! Command-line front end: audits, simulations and report rendering.
//!
//! Every flag has a field of the same name in the JSON config file
//! (`--config`); flags win over the file.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use confound_audit_core::audit::{self, AuditConfig, AuditVariant, ConfoundSource, Verdict};
use confound_audit_core::cv::{CvScheme, GridAxis, InnerSearch, RopeConfig, SwapMode};
use confound_audit_core::data::{self, CsvOptions, Dataset, MissingPolicy};
use confound_audit_core::models::{ModelKind, ModelSpec};
use confound_audit_core::report;
use confound_audit_core::simgen::{self, FeatureDist, SimKind, SimSpec};
use confound_audit_core::Error as CoreError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_LEAKAGE: i32 = 3;

pub const JOBS_ENV: &str = "CONFOUND_AUDIT_JOBS";

/// A failure with its exit code. Printed as `error[usage]: ...` or
/// `error[data]: ...` on standard error.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self.code {
            EXIT_USAGE => "usage",
            _ => "data",
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(_) | CoreError::WrongModelKind { .. } => Failure::usage(e.to_string()),
            _ => Failure::data(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Debug, Parser)]
#[command(name = "confound-audit", version, about = "Audit confound regression for confound-leakage")]
pub struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = JOBS_ENV)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the five-variant leakage audit on a CSV or simulated dataset.
    Audit(AuditArgs),
    /// Write a simulated dataset as CSV plus a JSON sidecar.
    Simulate(SimulateArgs),
    /// Render a report, or conditional histograms of a dataset.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SwapArg {
    Off,
    Train,
    TrainAndTest,
}

impl From<SwapArg> for SwapMode {
    fn from(s: SwapArg) -> Self {
        match s {
            SwapArg::Off => SwapMode::Off,
            SwapArg::Train => SwapMode::Train,
            SwapArg::TrainAndTest => SwapMode::TrainAndTest,
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct AuditArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Simulated data source instead of `--data` (e.g. `swap`).
    #[arg(long)]
    pub sim: Option<String>,
    #[arg(long)]
    pub sim_n: Option<usize>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub confounds: Option<Vec<String>>,
    /// Column of fold-stratification groups.
    #[arg(long)]
    pub strata: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub ignore: Option<Vec<String>>,
    /// Drop rows with missing cells instead of rejecting the file.
    #[arg(long)]
    pub drop_missing: bool,
    /// Use the target as the confound.
    #[arg(long, conflicts_with = "simulated_r")]
    pub taco: bool,
    /// Use one simulated confound at this correlation with the target.
    #[arg(long)]
    pub simulated_r: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// Depth limit for tree and forest models.
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rope_halfwidth: Option<f64>,
    #[arg(long)]
    pub rope_threshold: Option<f64>,
    /// Correlation heuristic of the ROPE test; defaults to 1/folds.
    #[arg(long)]
    pub rope_test_fraction: Option<f64>,
    #[arg(long, value_enum)]
    pub swap: Option<SwapArg>,
    /// Shuffle features once for all repeats.
    #[arg(long)]
    pub single_shuffle: bool,
    /// Tune hyperparameters with an inner CV grid search.
    #[arg(long)]
    pub inner_search: bool,
    #[arg(long)]
    pub no_standardize: bool,
    /// Exit with code 3 when the verdict is leakage_suspected or worse.
    #[arg(long)]
    pub fail_on_leakage: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Run configuration as stored in a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub sim: Option<SimSpec>,
    pub target: Option<String>,
    pub confounds: Option<Vec<String>>,
    pub strata: Option<String>,
    pub ignore: Option<Vec<String>>,
    pub drop_missing: Option<bool>,
    pub taco: Option<bool>,
    pub simulated_r: Option<f64>,
    /// Kind names or full model specifications.
    pub models: Option<Vec<ModelEntry>>,
    pub max_depth: Option<usize>,
    pub n_trees: Option<usize>,
    pub variants: Option<Vec<AuditVariant>>,
    pub repeats: Option<usize>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub rope_halfwidth: Option<f64>,
    pub rope_threshold: Option<f64>,
    pub rope_test_fraction: Option<f64>,
    pub swap: Option<SwapMode>,
    pub single_shuffle: Option<bool>,
    pub inner_search: Option<bool>,
    /// Grid used by the inner search; a depth grid when absent.
    pub inner_grid: Option<InnerSearch>,
    pub standardize: Option<bool>,
    pub fail_on_leakage: Option<bool>,
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelEntry {
    Kind(String),
    Spec(ModelSpec),
}

impl ModelEntry {
    fn resolve(&self) -> CliResult<ModelSpec> {
        match self {
            ModelEntry::Kind(k) => Ok(ModelSpec::new(k.parse::<ModelKind>()?)),
            ModelEntry::Spec(s) => Ok(s.clone()),
        }
    }
}

fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn set_flag(slot: &mut Option<bool>, flag: bool) {
    if flag {
        *slot = Some(true);
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
    }

    /// Overlays the command-line flags.
    pub fn merge(mut self, a: &AuditArgs) -> CliResult<Self> {
        set(&mut self.data, a.data.clone());
        if let Some(kind) = &a.sim {
            let kind: SimKind = kind.parse()?;
            let mut spec = self.sim.take().unwrap_or_default();
            spec.kind = kind;
            self.sim = Some(spec);
        }
        if let Some(n) = a.sim_n {
            match self.sim.as_mut() {
                Some(s) => s.n = n,
                None => return Err(Failure::usage("--sim-n needs --sim")),
            }
        }
        set(&mut self.target, a.target.clone());
        set(&mut self.confounds, a.confounds.clone());
        set(&mut self.strata, a.strata.clone());
        set(&mut self.ignore, a.ignore.clone());
        set_flag(&mut self.drop_missing, a.drop_missing);
        if a.taco {
            self.taco = Some(true);
            self.simulated_r = None;
        }
        if a.simulated_r.is_some() {
            self.simulated_r = a.simulated_r;
            self.taco = None;
        }
        if let Some(m) = &a.models {
            self.models = Some(m.iter().map(|k| ModelEntry::Kind(k.clone())).collect());
        }
        set(&mut self.max_depth, a.max_depth);
        set(&mut self.n_trees, a.n_trees);
        if let Some(v) = &a.variants {
            self.variants = Some(v.iter().map(|s| s.parse()).collect::<Result<_, _>>()?);
        }
        set(&mut self.repeats, a.repeats);
        set(&mut self.folds, a.folds);
        set(&mut self.seed, a.seed);
        set(&mut self.rope_halfwidth, a.rope_halfwidth);
        set(&mut self.rope_threshold, a.rope_threshold);
        set(&mut self.rope_test_fraction, a.rope_test_fraction);
        set(&mut self.swap, a.swap.map(SwapMode::from));
        set_flag(&mut self.single_shuffle, a.single_shuffle);
        set_flag(&mut self.inner_search, a.inner_search);
        if a.no_standardize {
            self.standardize = Some(false);
        }
        set_flag(&mut self.fail_on_leakage, a.fail_on_leakage);
        set(&mut self.out_dir, a.out_dir.clone());
        Ok(self)
    }

    pub fn audit_config(&self) -> CliResult<AuditConfig> {
        let seed = self
            .seed
            .ok_or_else(|| Failure::usage("a seed is required (--seed or `seed` in the config)"))?;
        let mut cfg = AuditConfig::default();
        cfg.confound_source = match (self.taco.unwrap_or(false), self.simulated_r) {
            (true, Some(_)) => return Err(Failure::usage("choose either taco or simulated_r")),
            (true, None) => ConfoundSource::Taco,
            (false, Some(r)) => ConfoundSource::Simulated { r },
            (false, None) => ConfoundSource::User,
        };
        if let Some(models) = &self.models {
            cfg.models = models.iter().map(ModelEntry::resolve).collect::<CliResult<_>>()?;
        }
        for m in &mut cfg.models {
            if matches!(m.kind, ModelKind::Tree | ModelKind::Forest) && self.max_depth.is_some() {
                m.max_depth = self.max_depth;
            }
            if m.kind == ModelKind::Forest {
                if let Some(n) = self.n_trees {
                    m.n_trees = n;
                }
            }
        }
        if let Some(v) = &self.variants {
            cfg.variants = v.clone();
        }
        let mut scheme = CvScheme::new(self.repeats.unwrap_or(10), self.folds.unwrap_or(5), seed);
        if self.inner_search.unwrap_or(false) {
            scheme.inner_search = Some(self.inner_grid.clone().unwrap_or_else(default_inner_grid));
        }
        cfg.scheme = scheme;
        cfg.rope = RopeConfig {
            halfwidth: self.rope_halfwidth.unwrap_or(0.01),
            test_fraction: self.rope_test_fraction,
            decision_threshold: self.rope_threshold.unwrap_or(0.95),
        };
        cfg.swap = self.swap.unwrap_or(SwapMode::Off);
        cfg.single_shuffle = self.single_shuffle.unwrap_or(false);
        cfg.standardize = self.standardize.unwrap_or(true);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dataset(&self) -> CliResult<Dataset> {
        match (&self.data, &self.sim) {
            (Some(_), Some(_)) => Err(Failure::usage("give either a data file or a simulation, not both")),
            (None, None) => Err(Failure::usage("no data source: use --data or --sim")),
            (None, Some(spec)) => {
                let mut spec = spec.clone();
                if let Some(seed) = self.seed {
                    spec.seed = seed;
                }
                Ok(simgen::generate(&spec)?.main().clone())
            }
            (Some(path), None) => {
                let target = self
                    .target
                    .clone()
                    .ok_or_else(|| Failure::usage("--target is required with --data"))?;
                let mut opts = CsvOptions::new(target);
                opts.confounds = self.confounds.clone().unwrap_or_default();
                opts.strata = self.strata.clone();
                opts.ignore = self.ignore.clone().unwrap_or_default();
                if self.drop_missing.unwrap_or(false) {
                    opts.missing_policy = MissingPolicy::DropRows;
                }
                data::load_csv(path, &opts).map_err(|e| {
                    let f = Failure::from(e);
                    Failure {
                        message: format!("{}: {}", path.display(), f.message),
                        ..f
                    }
                })
            }
        }
    }
}

/// Depth grid for tree-based models, evaluated with 3 inner folds.
pub fn default_inner_grid() -> InnerSearch {
    InnerSearch {
        grid: vec![GridAxis {
            param: "max_depth".into(),
            values: vec![2.0, 4.0, 8.0, 16.0],
        }],
        inner_folds: 3,
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// walkthrough_regression, opposing_extremes, skewed_features,
    /// binary_balanced (alias `swap`) or rounded_feature.
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub p: Option<usize>,
    /// normal or chi2
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub decimals: Option<u32>,
    #[arg(long)]
    pub extreme_fraction: Option<f64>,
    #[arg(long)]
    pub exclude_extremes_test: bool,
    #[arg(long)]
    pub control_center: Option<f64>,
    /// Main CSV path; companions share its stem.
    #[arg(long, short)]
    pub output: PathBuf,
}

impl SimulateArgs {
    pub fn spec(&self) -> CliResult<SimSpec> {
        let mut s = SimSpec::new(self.kind.parse()?, self.n, self.seed);
        if let Some(p) = self.p {
            s.p = p;
        }
        if let Some(d) = &self.dist {
            s.dist = d.parse::<FeatureDist>()?;
        }
        if let Some(d) = self.decimals {
            s.decimals = d;
        }
        if let Some(f) = self.extreme_fraction {
            s.extreme_fraction = f;
        }
        if let Some(c) = self.control_center {
            s.control_center = c;
        }
        s.exclude_extremes_test = self.exclude_extremes_test;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Md,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON written by `audit`.
    #[arg(long, required_unless_present = "histograms")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "md")]
    pub format: ReportFormat,
    /// `feature,confound`: histograms of a feature conditional on a binary
    /// confound, before and after confound regression.
    #[arg(long, value_delimiter = ',', num_args = 1, requires = "data")]
    pub histograms: Option<Vec<String>>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub confounds: Option<Vec<String>>,
    #[arg(long, default_value_t = report::DEFAULT_BINS)]
    pub bins: usize,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match output {
        Some(p) => write_file(p, bytes),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| Failure::data(e.to_string()))
        }
    }
}

pub fn cmd_audit(args: &AuditArgs) -> CliResult<i32> {
    let base = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let run = base.merge(args)?;
    // A --jobs flag or the environment variable already built the pool.
    configure_threads(run.jobs);
    let cfg = run.audit_config()?;
    let d = run.dataset()?;
    info!("loaded {} rows, {} features", d.n_rows(), d.n_features());
    let report = audit::run_audit(&d, &cfg)?;

    let out = run.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    write_file(&out.join("report.json"), report::to_json(&report)?.as_bytes())?;
    write_file(&out.join("report.md"), report::render_markdown(&report).as_bytes())?;
    let mut csv = Vec::new();
    report::write_fold_scores(&report, &mut csv)?;
    write_file(&out.join("fold_scores.csv"), &csv)?;

    let verdict = report.verdict.map_or("inconclusive", |v| v.as_str());
    println!("verdict: {verdict}");
    let leak = report.verdict.is_some_and(|v| v >= Verdict::LeakageSuspected);
    Ok(if leak && run.fail_on_leakage.unwrap_or(false) { EXIT_LEAKAGE } else { EXIT_OK })
}

/// Companion path `<stem>_<suffix>.<ext>` next to `main`.
fn companion(main: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = main.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = if suffix.is_empty() { format!("{stem}.{ext}") } else { format!("{stem}_{suffix}.{ext}") };
    main.with_file_name(name)
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<i32> {
    let spec = args.spec()?;
    let out = simgen::generate(&spec)?;
    let mut buf = Vec::new();
    for (k, (name, d)) in out.datasets.iter().enumerate() {
        let path = if k == 0 { args.output.clone() } else { companion(&args.output, name, "csv") };
        buf.clear();
        data::write_csv_to(d, &mut buf)?;
        write_file(&path, &buf)?;
    }
    if let Some(flags) = &out.extreme_rows {
        let mut text = String::from("extreme\n");
        for &f in flags {
            text.push_str(if f { "1\n" } else { "0\n" });
        }
        write_file(&companion(&args.output, "extreme", "csv"), text.as_bytes())?;
    }
    let mut sidecar = serde_json::to_string_pretty(&spec).map_err(|e| Failure::data(e.to_string()))?;
    sidecar.push('\n');
    write_file(&companion(&args.output, "", "json"), sidecar.as_bytes())?;
    Ok(EXIT_OK)
}

pub fn cmd_report(args: &ReportArgs) -> CliResult<i32> {
    if let Some(h) = &args.histograms {
        let [feature, confound] = h.as_slice() else {
            return Err(Failure::usage("--histograms takes `feature,confound`"));
        };
        let path = args.data.as_ref().ok_or_else(|| Failure::usage("--histograms needs --data"))?;
        let target = args
            .target
            .clone()
            .ok_or_else(|| Failure::usage("--histograms needs --target"))?;
        let mut opts = CsvOptions::new(target);
        opts.confounds = args.confounds.clone().unwrap_or_else(|| vec![confound.clone()]);
        let d = data::load_csv(path, &opts)?;
        let hist = report::conditional_histograms(&d, feature, confound, args.bins)?;
        let mut buf = Vec::new();
        report::write_histograms(&hist, &mut buf)?;
        emit(args.output.as_deref(), &buf)?;
        return Ok(EXIT_OK);
    }
    let path = args.input.as_ref().ok_or_else(|| Failure::usage("--input is required"))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let r = report::parse_report(&text)?;
    match args.format {
        ReportFormat::Md => emit(args.output.as_deref(), report::render_markdown(&r).as_bytes())?,
        ReportFormat::Csv => {
            let mut buf = Vec::new();
            report::write_fold_scores(&r, &mut buf)?;
            emit(args.output.as_deref(), &buf)?;
        }
    }
    Ok(EXIT_OK)
}

fn configure_threads(jobs: Option<usize>) {
    if let Some(n) = jobs {
        // Fails only if a pool already exists, which then stays in use.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            eprintln!("error[usage]: {}", e.to_string().trim_start_matches("error: ").trim_end());
            return EXIT_USAGE;
        }
    };
    configure_threads(cli.jobs);
    let result = match &cli.command {
        Command::Audit(a) => cmd_audit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error[{}]: {}", f.tag(), f.message);
            f.code
        }
    }
}

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tui_core::empirical::{self, EmpiricalConfig, EmpiricalRule, DEFAULT_FLOOR_SCALE};
use tui_core::model::{compile_model, random_model, FamilyKind, GenerateOptions, ModelSpec, Tolerances};
use tui_core::recover::{compare_graphs, recover_with, RecoveryConfig, RecoveryResult, RelativeThreshold};
use tui_core::tensor::{population_tensor, PopTensor, TensorBudget};
use tui_core::Error;

use crate::exit;
use crate::formats::recovery_json::{self, RunInfo};
use crate::formats::samples::{self, SampleMeta};
use crate::formats::tensor::{self as tensor_fmt, TensorFormat};
use crate::formats::{model_json, FormatError};
use crate::pool::ThreadPool;

#[derive(Debug, Parser)]
#[command(name = "tui", version, about = "Build latent bipartite models and recover their structure from probability tensors")]
pub struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, env = "TUI_THREADS", global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a random model that passes the assumption checks.
    Generate(GenerateArgs),
    /// Compute the population tensor of a model.
    Tensor(TensorArgs),
    /// Recover K and G from a tensor, a model or a sample file.
    Recover(RecoverArgs),
    /// Sample from a model and recover its graph from the samples.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    NoisyOr,
    MainEffect,
    AllEffect,
    MainInteraction,
    GeneralRbm,
    ExplicitCpts,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LinkArg {
    Identity,
    Logistic,
    Probit,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long = "J")]
    j: usize,
    #[arg(long = "K")]
    k: usize,
    #[arg(long = "V", default_value_t = 2)]
    v: usize,
    #[arg(long = "H", default_value_t = 2)]
    h: usize,
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Link for main-effect, all-effect and main-interaction.
    #[arg(long, value_enum, default_value_t = LinkArg::Logistic)]
    link: LinkArg,
    /// Pin the rows beyond the 2K pure children, e.g. `--extra-row 1,1`.
    #[arg(long = "extra-row", value_name = "ROW")]
    extra_rows: Vec<String>,
    /// Keep the canonical row order (two pure children per latent, then the extra rows).
    #[arg(long)]
    no_shuffle: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_attempts: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol_rel: f64,
    /// Minimum column separation required on every edge.
    #[arg(long, default_value_t = 1e-9)]
    eq_tol: f64,
    /// Output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BudgetArgs {
    /// Largest V^J the tensor may have.
    #[arg(long, default_value_t = TensorBudget::default().max_observed_cells)]
    max_cells: usize,
    /// Largest H^K the latent enumeration may have.
    #[arg(long, default_value_t = TensorBudget::default().max_latent_cells)]
    max_latent_cells: usize,
}

impl BudgetArgs {
    fn budget(&self) -> TensorBudget {
        TensorBudget { max_observed_cells: self.max_cells, max_latent_cells: self.max_latent_cells }
    }
}

#[derive(Debug, Args)]
struct TensorArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = TensorFormat::Csv)]
    format: TensorFormat,
    #[command(flatten)]
    budget: BudgetArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Population,
    Empirical,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    NoiseFloor,
    Gap,
    Absolute,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[arg(long, default_value_t = tui_core::linalg::DEFAULT_TOL_REL)]
    tol_rel: f64,
    /// Stage 1 from marginals of this order (at least 4).
    #[arg(long)]
    marginal_order: Option<usize>,
    /// Rank rule for empirical tensors.
    #[arg(long, value_enum, default_value_t = RuleArg::NoiseFloor)]
    rank_rule: RuleArg,
    /// Multiplier on the sampling-noise estimate (noise-floor and gap rules).
    #[arg(long, default_value_t = DEFAULT_FLOOR_SCALE)]
    floor_scale: f64,
    /// Threshold for the absolute rule.
    #[arg(long)]
    abs_threshold: Option<f64>,
    /// Exit 0 even when the recovery produced warnings.
    #[arg(long)]
    allow_warnings: bool,
}

impl RankArgs {
    fn rule(&self) -> Result<EmpiricalRule, CliError> {
        Ok(match self.rank_rule {
            RuleArg::NoiseFloor => EmpiricalRule::NoiseFloor { scale: self.floor_scale },
            RuleArg::Gap => EmpiricalRule::Gap { floor_scale: self.floor_scale },
            RuleArg::Absolute => EmpiricalRule::Absolute {
                threshold: self.abs_threshold.ok_or_else(|| CliError::input("--rank-rule absolute needs --abs-threshold"))?,
            },
        })
    }

    fn rule_name(&self) -> String {
        match self.rank_rule {
            RuleArg::NoiseFloor => format!("noise-floor(scale={})", self.floor_scale),
            RuleArg::Gap => format!("gap(floor_scale={})", self.floor_scale),
            RuleArg::Absolute => format!("absolute(threshold={})", self.abs_threshold.unwrap_or(f64::NAN)),
        }
    }

    fn recovery(&self, latent_levels: usize) -> Result<RecoveryConfig, CliError> {
        if !(self.tol_rel > 0.0 && self.tol_rel < 1.0) {
            return Err(CliError::input(format!("--tol-rel must lie in (0, 1), got {}", self.tol_rel)));
        }
        Ok(RecoveryConfig { tol_rel: self.tol_rel, marginal_order: self.marginal_order, ..RecoveryConfig::new(latent_levels) })
    }
}

#[derive(Debug, Args)]
#[group(id = "input", required = true, multiple = false, args = ["tensor", "spec", "samples"])]
struct RecoverArgs {
    /// PTENSOR v1 dump.
    #[arg(long)]
    tensor: Option<PathBuf>,
    /// Model JSON; its population tensor is used and compared with the planted graph.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Sample CSV; implies empirical mode.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Dump encoding (detected when absent).
    #[arg(long, value_enum)]
    tensor_format: Option<TensorFormat>,
    /// Latent levels; taken from the model when `--spec` is given.
    #[arg(long = "H")]
    h: Option<usize>,
    /// Observed levels of a sample file.
    #[arg(long = "V")]
    v: Option<usize>,
    #[arg(long, value_enum, default_value_t = Mode::Population)]
    mode: Mode,
    /// Sample count behind an empirical tensor (omit for an exact tensor).
    #[arg(long)]
    n: Option<u64>,
    #[command(flatten)]
    rank: RankArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample CSV path; metadata goes next to it with `.meta.json` appended.
    #[arg(long)]
    samples: PathBuf,
    /// Recovery JSON path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    rank: RankArgs,
    #[command(flatten)]
    budget: BudgetArgs,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self { code: exit::INPUT, message: message.into() }
    }

    /// Budget violations keep their own code; everything else gets `code`.
    fn from_core(e: Error, code: i32) -> Self {
        let code = if matches!(e, Error::Size(_)) { exit::BUDGET } else { code };
        Self { code, message: e.to_string() }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::input(e.0)
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read_bytes(path)?).map_err(|_| CliError::input(format!("{} is not UTF-8", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::input(format!("cannot write to stdout: {e}"))),
    }
}

fn read_spec(path: &Path) -> Result<ModelSpec, CliError> {
    Ok(model_json::from_str(&read_text(path)?)?.0)
}

fn population(spec: &ModelSpec, budget: &TensorBudget, pool: &ThreadPool) -> Result<PopTensor, CliError> {
    let model = compile_model(spec).map_err(|e| CliError::from_core(e, exit::INPUT))?;
    population_tensor(&model.latent, &model.cpts, budget, pool).map_err(|e| CliError::from_core(e, exit::INPUT))
}

fn print_rows(rows: &[Vec<u8>]) {
    for r in rows {
        let cells: Vec<String> = r.iter().map(u8::to_string).collect();
        println!("{}", cells.join(" "));
    }
}

fn finish(result: &RecoveryResult, allow_warnings: bool) -> i32 {
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    if result.warnings.is_empty() || allow_warnings {
        exit::CLEAN
    } else {
        exit::WARNINGS
    }
}

fn parse_row(text: &str) -> Result<Vec<u8>, CliError> {
    text.split(',')
        .map(|c| match c.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(CliError::input(format!("--extra-row entries must be 0 or 1, got {other:?}"))),
        })
        .collect()
}

fn cmd_generate(a: &GenerateArgs) -> Result<i32, CliError> {
    let link = match a.link {
        LinkArg::Identity => tui_core::model::Link::Identity,
        LinkArg::Logistic => tui_core::model::Link::Logistic,
        LinkArg::Probit => tui_core::model::Link::Probit,
    };
    let family = match a.family {
        FamilyArg::NoisyOr => FamilyKind::NoisyOr,
        FamilyArg::MainEffect => FamilyKind::MainEffect(link),
        FamilyArg::AllEffect => FamilyKind::AllEffect(link),
        FamilyArg::MainInteraction => FamilyKind::MainInteraction(link),
        FamilyArg::GeneralRbm => FamilyKind::GeneralRbm,
        FamilyArg::ExplicitCpts => FamilyKind::ExplicitCpts,
    };
    let mut opts = GenerateOptions::new(family);
    if !a.extra_rows.is_empty() {
        opts.extra_rows = Some(a.extra_rows.iter().map(|r| parse_row(r)).collect::<Result<_, _>>()?);
    }
    opts.shuffle_rows = !a.no_shuffle;
    opts.max_attempts = a.max_attempts;
    opts.tolerances = Tolerances { rank_tol_rel: a.tol_rel, eq_tol: a.eq_tol };
    let g = random_model(a.j, a.k, a.v, a.h, &opts, a.seed).map_err(|e| CliError::from_core(e, exit::GENERATION))?;
    let text = model_json::to_string(&g.spec, Some(a.seed));
    match &a.out {
        Some(path) => {
            write_file(path, text.as_bytes())?;
            println!("planted G ({} x {}):", a.j, a.k);
            print_rows(&g.spec.graph.rows());
        }
        None => emit(None, &text)?,
    }
    Ok(exit::CLEAN)
}

fn cmd_tensor(a: &TensorArgs, pool: &ThreadPool) -> Result<i32, CliError> {
    let spec = read_spec(&a.spec)?;
    let t = population(&spec, &a.budget.budget(), pool)?;
    write_file(&a.out, &tensor_fmt::write(&t, a.format))?;
    println!("sum = {}", t.sum());
    println!("entries = {}", t.as_slice().len());
    Ok(exit::CLEAN)
}

fn cmd_recover(a: &RecoverArgs, pool: &ThreadPool) -> Result<i32, CliError> {
    let budget = a.budget.budget();
    let mut planted = None;
    let mut n = a.n;
    let mut mode = a.mode;
    let (t, h) = if let Some(path) = &a.tensor {
        let t = tensor_fmt::read(&read_bytes(path)?, a.tensor_format)?;
        (t, a.h.ok_or_else(|| CliError::input("--H is required with --tensor"))?)
    } else if let Some(path) = &a.spec {
        let spec = read_spec(path)?;
        let h = a.h.unwrap_or(spec.cards.latent_levels);
        planted = Some(spec.graph.rows());
        (population(&spec, &budget, pool)?, h)
    } else {
        let path = a.samples.as_ref().expect("clap enforces one input");
        let v = a.v.ok_or_else(|| CliError::input("--V is required with --samples"))?;
        let s = samples::read_csv(&read_text(path)?, v, 0)?;
        if s.n == 0 {
            return Err(CliError::input("sample file has no observations"));
        }
        mode = Mode::Empirical;
        n = Some(s.n as u64);
        let t = empirical::empirical_tensor(&s, &budget).map_err(|e| CliError::from_core(e, exit::INPUT))?;
        (t, a.h.ok_or_else(|| CliError::input("--H is required with --samples"))?)
    };
    if mode == Mode::Population && a.n.is_some() {
        return Err(CliError::input("--n only applies to --mode empirical"));
    }
    let recovery = a.rank.recovery(h)?;
    let result = match mode {
        Mode::Population => recover_with(&t, &recovery, &RelativeThreshold, pool),
        Mode::Empirical => {
            let cfg = EmpiricalConfig { recovery, rule: a.rank.rule()?, budget };
            empirical::recover_tensor_empirical(&t, n, &cfg, pool)
        }
    }
    .map_err(|e| CliError::from_core(e, exit::INPUT))?;
    let comparison = match &planted {
        Some(p) => Some(compare_graphs(p, &result.g_hat).map_err(|e| CliError::from_core(e, exit::INPUT))?),
        None => None,
    };
    let info = RunInfo {
        mode: if mode == Mode::Population { "population" } else { "empirical" },
        latent_levels: h,
        tol_rel: a.rank.tol_rel,
        marginal_order: a.rank.marginal_order,
        n,
        rank_rule: (mode == Mode::Empirical).then(|| a.rank.rule_name()),
    };
    emit(a.out.as_deref(), &recovery_json::to_string(&result, &info, comparison.as_ref()))?;
    if a.out.is_some() {
        println!("K_hat = {}", result.k_hat);
        print_rows(&result.g_hat);
    }
    Ok(finish(&result, a.rank.allow_warnings))
}

fn cmd_simulate(a: &SimulateArgs, pool: &ThreadPool) -> Result<i32, CliError> {
    if a.n == 0 {
        return Err(CliError::input("--n must be positive"));
    }
    let spec = read_spec(&a.spec)?;
    let model = compile_model(&spec).map_err(|e| CliError::from_core(e, exit::INPUT))?;
    let s = empirical::sample(&model, a.n, a.seed, pool).map_err(|e| CliError::from_core(e, exit::INPUT))?;
    write_file(&a.samples, samples::write_csv(&s).as_bytes())?;
    let meta = SampleMeta {
        spec_sha256: samples::spec_hash(&model_json::to_string(&spec, None)),
        seed: a.seed,
        n: a.n,
        num_observed: s.num_observed,
        levels: s.levels,
        rng: samples::RNG_NAME.to_string(),
    };
    let mut meta_path = a.samples.clone().into_os_string();
    meta_path.push(".meta.json");
    let mut meta_text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    meta_text.push('\n');
    write_file(Path::new(&meta_path), meta_text.as_bytes())?;

    let cfg = EmpiricalConfig { recovery: a.rank.recovery(spec.cards.latent_levels)?, rule: a.rank.rule()?, budget: a.budget.budget() };
    let result = empirical::recover_graph_empirical(&s, &cfg, pool).map_err(|e| CliError::from_core(e, exit::INPUT))?;
    let planted = spec.graph.rows();
    let comparison = compare_graphs(&planted, &result.g_hat).map_err(|e| CliError::from_core(e, exit::INPUT))?;
    let info = RunInfo {
        mode: "empirical",
        latent_levels: spec.cards.latent_levels,
        tol_rel: a.rank.tol_rel,
        marginal_order: a.rank.marginal_order,
        n: Some(a.n as u64),
        rank_rule: Some(a.rank.rule_name()),
    };
    emit(a.out.as_deref(), &recovery_json::to_string(&result, &info, Some(&comparison)))?;
    if a.out.is_some() {
        println!("K_hat = {}", result.k_hat);
        print_rows(&result.g_hat);
        println!("exact_match = {}", comparison.exact_match);
    }
    Ok(finish(&result, a.rank.allow_warnings))
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::INPUT } else { exit::CLEAN };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli
        .threads
        .map(usize::from)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = ThreadPool::new(threads);
    let outcome = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Tensor(a) => cmd_tensor(a, &pool),
        Command::Recover(a) => cmd_recover(a, &pool),
        Command::Simulate(a) => cmd_simulate(a, &pool),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use spotrank::experiments::{
    detect_rate_experiment, emit_figure_data, mc_clt_check, mc_deviation_check, mc_power, mc_size,
    version_string, write_manifest, CltPlan, DetectPlan, DeviationPlan, FigureKind, FigureResults,
    Manifest, McPlan,
};
use spotrank::io::{expand_glob, ingest, read_grid, write_grid, write_report, IngestOptions, ReportConfig, TestReport};
use spotrank::matrix::{
    goe_max_eig_quantiles, goe_max_eig_samples, lambda_m_max_quantiles, lambda_m_quantiles, lambda_m_samples,
    QuantileCache, QuantileSource, SymMatrix, DEFAULT_NSIM, DEFAULT_NSIM_MAX, DEFAULT_QUANTILE_SEED,
};
use spotrank::rank_test::{global_test, rank_scan, select_block_length, TestConfig, Variant};
use spotrank::simulate::{simulate_scenario, SimScenario};
use spotrank::spectral::{make_weights, HypothesisParams, ObservationGrid, WeightMode};
use spotrank::{Error, Result};

/// Default seed for every command that draws random numbers.
const DEFAULT_SEED: u64 = 1;

#[derive(Parser)]
#[command(name = "spotrank", version, about = "Rank tests for spot covariance matrices of noisy high-frequency data")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate an observation grid.
    Simulate(SimulateArgs),
    /// Block-wise rank tests with per-block level.
    Test(TestArgs),
    /// Whole-session test over all blocks.
    GlobalTest(TestArgs),
    /// Smallest accepted rank per block, for several block lengths.
    RankScan(RankScanArgs),
    /// Monte Carlo quantile tables.
    Quantiles(QuantileArgs),
    /// Monte Carlo studies driven by a JSON plan.
    Mc(McArgs),
    /// Synchronize tick files onto a regular grid.
    Ingest(IngestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    H0,
    H1,
    Noise,
    Const,
    Rotating,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    #[arg(long, default_value_t = 32_400)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 0.001)]
    eta: f64,
    /// Second eigenvalue for `h1`.
    #[arg(long, default_value_t = 0.0)]
    lambda2: f64,
    /// Row-major covariance for `const`, comma separated (identity if absent).
    #[arg(long, value_delimiter = ',')]
    sigma: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Replication index within the seed.
    #[arg(long, default_value_t = 0)]
    rep: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightsArg {
    Finite,
    Cw,
}

impl From<WeightsArg> for WeightMode {
    fn from(w: WeightsArg) -> Self {
        match w {
            WeightsArg::Finite => WeightMode::FiniteRenorm,
            WeightsArg::Cw => WeightMode::CwInfinite,
        }
    }
}

#[derive(Args, Clone)]
struct QuantileOpts {
    /// Draws for single-block quantiles.
    #[arg(long, default_value_t = DEFAULT_NSIM)]
    nsim: usize,
    /// Draws for max-of-K quantiles.
    #[arg(long, default_value_t = DEFAULT_NSIM_MAX)]
    nsim_max: usize,
    #[arg(long, default_value_t = DEFAULT_QUANTILE_SEED)]
    quantile_seed: u64,
    /// Directory of cached quantile tables.
    #[arg(long)]
    cache: Option<PathBuf>,
}

impl QuantileOpts {
    fn source(&self) -> QuantileSource {
        let q = QuantileSource::new(self.quantile_seed).with_nsim(self.nsim, self.nsim_max);
        match &self.cache {
            Some(dir) => q.with_cache(QuantileCache::new(dir)),
            None => q,
        }
    }
}

#[derive(Args, Clone)]
struct TestOpts {
    /// Directory holding grid.csv and meta.json.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "sim")]
    variant: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long = "M", default_value_t = 10.0)]
    m: f64,
    #[arg(long = "J", default_value_t = 15)]
    j: usize,
    #[arg(long, value_enum, default_value = "finite")]
    weights: WeightsArg,
    /// Seconds per grid step.
    #[arg(long, default_value_t = 1.0)]
    grid_seconds: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long = "L", default_value_t = 1.0)]
    l: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_gap: f64,
    /// Override the noise level stored with the grid.
    #[arg(long)]
    eta: Option<f64>,
    #[command(flatten)]
    quantiles: QuantileOpts,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    opts: TestOpts,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, conflicts_with = "auto_block", required_unless_present = "auto_block")]
    block_seconds: Option<f64>,
    /// Block length from the rate rule `c·max(...)`.
    #[arg(long)]
    auto_block: bool,
    #[arg(long, default_value_t = 1.0)]
    block_constant: f64,
    /// JSON report path (a CSV mirror is written next to it); stdout if absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RankScanArgs {
    #[command(flatten)]
    opts: TestOpts,
    #[arg(long)]
    r_max: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    block_seconds: Vec<f64>,
    /// Level over the whole session instead of per block.
    #[arg(long)]
    global: bool,
    /// Output directory for rank_scan.json and table1_ranks.csv; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuantileKind {
    Goe,
    LambdaM,
    LambdaMMax,
}

#[derive(Args)]
struct QuantileArgs {
    #[arg(long, value_enum)]
    kind: QuantileKind,
    #[arg(long)]
    dim: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05, 0.01])]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_NSIM)]
    nsim: usize,
    #[arg(long, default_value_t = DEFAULT_QUANTILE_SEED)]
    seed: u64,
    #[arg(long = "M", default_value_t = 10.0)]
    m: f64,
    #[arg(long = "J", default_value_t = 15)]
    j: usize,
    #[arg(long, value_enum, default_value = "finite")]
    weights: WeightsArg,
    /// Number of blocks for `lambda-m-max`.
    #[arg(long = "K", default_value_t = 1)]
    k: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum McMode {
    Size,
    Power,
    Clt,
    Deviation,
    Detect,
}

#[derive(Args)]
struct McArgs {
    #[arg(long, value_enum)]
    mode: McMode,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long, default_value = "mc_out")]
    out: PathBuf,
    #[command(flatten)]
    quantiles: QuantileOpts,
}

#[derive(Args)]
struct IngestArgs {
    /// Glob pattern of tick CSV files.
    #[arg(long)]
    files: String,
    /// Session as HH:MM-HH:MM (UTC time of day).
    #[arg(long)]
    session: String,
    #[arg(long, default_value_t = 1.0)]
    grid_seconds: f64,
    /// Log prices instead of raw values.
    #[arg(long)]
    log: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Deserialize)]
struct SizePlan {
    #[serde(flatten)]
    plan: McPlan,
    #[serde(default = "default_alphas")]
    alphas: Vec<f64>,
}

#[derive(Deserialize)]
struct PowerPlan {
    #[serde(flatten)]
    plan: McPlan,
    lambda2_grid: Vec<f64>,
    nh_grid: Vec<usize>,
}

fn default_alphas() -> Vec<f64> {
    vec![0.1, 0.05, 0.01]
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end().to_string(), 2),
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string(), e.exit_code()),
    }
}

fn fail(kind: &str, message: String, code: i32) -> ExitCode {
    let doc = ErrorDoc {
        error: kind,
        message,
        exit_code: code,
    };
    let _ = writeln!(std::io::stderr(), "{}", serde_json::to_string(&doc).expect("plain strings serialize"));
    ExitCode::from(code as u8)
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Simulate(a) => simulate(a),
        Cmd::Test(a) => test(a, false),
        Cmd::GlobalTest(a) => test(a, true),
        Cmd::RankScan(a) => scan(a),
        Cmd::Quantiles(a) => quantiles(a),
        Cmd::Mc(a) => mc(a),
        Cmd::Ingest(a) => ingest_cmd(a),
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let scn = match a.scenario {
        ScenarioArg::H0 => SimScenario::h0(a.d, a.n, a.eta, a.seed),
        ScenarioArg::H1 => SimScenario::h1(a.d, a.n, a.eta, a.lambda2, a.seed),
        ScenarioArg::Noise => SimScenario::pure_noise(a.d, a.n, a.eta, a.seed),
        ScenarioArg::Rotating => SimScenario::rotating(a.d, a.n, a.eta, a.seed),
        ScenarioArg::Const => {
            let sigma = if a.sigma.is_empty() {
                SymMatrix::identity(a.d)
            } else {
                if a.sigma.len() != a.d * a.d {
                    return Err(Error::InvalidInput(format!(
                        "--sigma needs d*d = {} values, got {}",
                        a.d * a.d,
                        a.sigma.len()
                    )));
                }
                SymMatrix::from_row_slice(a.d, &a.sigma)?
            };
            SimScenario::constant(&sigma, a.n, a.eta, a.seed)
        }
    };
    let (_, grid) = simulate_scenario(&scn, a.rep)?;
    write_grid(&grid, &a.out)?;
    let path = a.out.join("scenario.json");
    fs::write(&path, serde_json::to_string_pretty(&scn)? + "\n").map_err(|e| Error::Io { path, source: e })
}

fn steps(seconds: f64, grid_seconds: f64) -> Result<usize> {
    let x = seconds / grid_seconds;
    let nh = x.round();
    if !(grid_seconds > 0.0) || !(nh >= 1.0) || (x - nh).abs() > 1e-9 * x.max(1.0) {
        return Err(Error::Config(format!(
            "block of {seconds} s is not a whole number of {grid_seconds} s grid steps"
        )));
    }
    Ok(nh as usize)
}

fn load(opts: &TestOpts) -> Result<ObservationGrid> {
    let mut grid = read_grid(&opts.input)?;
    if let Some(eta) = opts.eta {
        if !(eta >= 0.0) {
            return Err(Error::Config(format!("eta = {eta} must be >= 0")));
        }
        grid.meta.eta = eta;
    }
    Ok(grid)
}

fn config(opts: &TestOpts, r: usize, nh: usize, global: bool) -> Result<TestConfig> {
    let variant: Variant = opts.variant.parse()?;
    let mut cfg = TestConfig::new(variant, opts.alpha, r, nh);
    cfg.m = opts.m;
    cfg.j = opts.j;
    cfg.weights_mode = opts.weights.into();
    cfg.hypothesis = HypothesisParams::new(r, opts.beta, opts.l, opts.lambda_gap);
    cfg.global = global;
    Ok(cfg)
}

fn nonasym_note(cfg: &TestConfig, notes: &mut Vec<String>) {
    let h = &cfg.hypothesis;
    if cfg.variant == Variant::Nonasym && h.beta == 0.5 && h.l == 1.0 && h.lambda_gap == 1.0 {
        let note = "NONASYM critical values use the default smoothness beta=0.5, L=1 and eigenvalue gap 1; \
                    these are assumptions, not estimates"
            .to_string();
        eprintln!("note: {note}");
        notes.push(note);
    }
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let body = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => fs::write(p, body).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => std::io::stdout().write_all(body.as_bytes()).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

fn test(a: TestArgs, global: bool) -> Result<()> {
    let grid = load(&a.opts)?;
    let mut notes = Vec::new();
    let nh = if a.auto_block {
        let params = HypothesisParams::new(a.r, a.opts.beta, a.opts.l, a.opts.lambda_gap);
        let bl = select_block_length(grid.n(), &params, a.block_constant)?;
        notes.push(format!(
            "block length from the rate rule with constant {}: h_raw = {}, nh = {}",
            a.block_constant, bl.h_raw, bl.nh
        ));
        bl.nh
    } else {
        steps(a.block_seconds.expect("clap enforces one of the block options"), a.opts.grid_seconds)?
    };
    let cfg = config(&a.opts, a.r, nh, global)?;
    nonasym_note(&cfg, &mut notes);
    let qsrc = a.opts.quantiles.source();
    let result = global_test(&grid, &cfg, &qsrc)?;
    let report = TestReport::new(
        ReportConfig {
            test: cfg,
            n: grid.n(),
            d: grid.d(),
            eta: grid.eta(),
            h: nh as f64 / grid.n() as f64,
            auto_block: a.auto_block,
            nsim: qsrc.nsim,
            quantile_seed: qsrc.seed,
            notes,
        },
        &result,
    );
    match &a.report {
        Some(p) => write_report(&report, p).map(|_| ()),
        None => emit_json(&report, None),
    }
}

#[derive(Serialize)]
struct ScanOutput {
    input: PathBuf,
    base_config: TestConfig,
    scans: Vec<spotrank::rank_test::RankScan>,
    notes: Vec<String>,
}

fn scan(a: RankScanArgs) -> Result<()> {
    let grid = load(&a.opts)?;
    let qsrc = a.opts.quantiles.source();
    let mut notes = Vec::new();
    let mut scans = Vec::new();
    let mut base = None;
    for &secs in &a.block_seconds {
        let cfg = config(&a.opts, 1, steps(secs, a.opts.grid_seconds)?, a.global)?;
        if base.is_none() {
            nonasym_note(&cfg, &mut notes);
            base = Some(cfg.clone());
        }
        scans.push(rank_scan(&grid, &cfg, a.r_max, &qsrc)?);
    }
    let out = ScanOutput {
        input: a.opts.input.clone(),
        base_config: base.expect("at least one block length"),
        scans,
        notes,
    };
    match &a.out {
        Some(dir) => {
            emit_figure_data(FigureKind::Table1Style, &FigureResults::Table1Style { scans: &out.scans }, dir)?;
            emit_json(&out, Some(&dir.join("rank_scan.json")))
        }
        None => emit_json(&out, None),
    }
}

fn quantiles(a: QuantileArgs) -> Result<()> {
    let table = match a.kind {
        QuantileKind::Goe => goe_max_eig_quantiles(a.dim, &a.alpha, a.nsim, a.seed)?,
        QuantileKind::LambdaM => {
            let w = make_weights(a.m, a.j, a.weights.into())?;
            lambda_m_quantiles(a.dim, &w, &a.alpha, a.nsim, a.seed)?
        }
        QuantileKind::LambdaMMax => {
            let w = make_weights(a.m, a.j, a.weights.into())?;
            lambda_m_max_quantiles(a.dim, &w, &a.alpha, a.k, a.nsim, a.seed)?
        }
    };
    emit_json(&table, None)
}

fn read_plan<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn mc(a: McArgs) -> Result<()> {
    let start = Instant::now();
    let qsrc = a.quantiles.source();
    fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    let (mode, plan_json, seeds) = match a.mode {
        McMode::Size => {
            let p: SizePlan = read_plan(&a.plan)?;
            let report = mc_size(&p.plan, &p.alphas, &qsrc)?;
            emit_json(&report, Some(&a.out.join("size_report.json")))?;
            let weights = p.plan.config.weights()?;
            let dim = p.plan.scenario.d - p.plan.config.r();
            let lm = lambda_m_samples(dim, &weights, qsrc.nsim, qsrc.seed);
            let goe = goe_max_eig_samples(dim, qsrc.nsim, qsrc.seed);
            emit_figure_data(
                FigureKind::Fig1Left,
                &FigureResults::Fig1Left {
                    size: &report,
                    weights: &weights,
                    lambda_m_draws: &lm,
                    goe_draws: &goe,
                },
                &a.out,
            )?;
            ("size", serde_json::to_value(&p.plan)?, vec![p.plan.master_seed, p.plan.scenario.seed, qsrc.seed])
        }
        McMode::Power => {
            let p: PowerPlan = read_plan(&a.plan)?;
            let report = mc_power(&p.plan, &p.lambda2_grid, &p.nh_grid, &qsrc)?;
            emit_json(&report, Some(&a.out.join("power_report.json")))?;
            emit_figure_data(FigureKind::Fig1Right, &FigureResults::Fig1Right { power: &report }, &a.out)?;
            let mut v = serde_json::to_value(&p.plan)?;
            v["lambda2_grid"] = serde_json::to_value(&p.lambda2_grid)?;
            v["nh_grid"] = serde_json::to_value(&p.nh_grid)?;
            ("power", v, vec![p.plan.master_seed, qsrc.seed])
        }
        McMode::Clt => {
            let p: CltPlan = read_plan(&a.plan)?;
            emit_json(&mc_clt_check(&p)?, Some(&a.out.join("clt_report.json")))?;
            ("clt", serde_json::to_value(&p)?, vec![p.master_seed])
        }
        McMode::Deviation => {
            let p: DeviationPlan = read_plan(&a.plan)?;
            emit_json(&mc_deviation_check(&p)?, Some(&a.out.join("deviation_report.json")))?;
            ("deviation", serde_json::to_value(&p)?, vec![p.master_seed])
        }
        McMode::Detect => {
            let p: DetectPlan = read_plan(&a.plan)?;
            emit_json(&detect_rate_experiment(&p, &qsrc)?, Some(&a.out.join("detect_report.json")))?;
            ("detect", serde_json::to_value(&p)?, vec![p.master_seed, qsrc.seed])
        }
    };
    write_manifest(
        &a.out,
        &Manifest {
            mode: mode.to_string(),
            plan: plan_json,
            seeds,
            runtime_secs: start.elapsed().as_secs_f64(),
            version: version_string(),
        },
    )?;
    Ok(())
}

fn ingest_cmd(a: IngestArgs) -> Result<()> {
    let files = expand_glob(&a.files)?;
    let opts = IngestOptions {
        session: a.session.parse()?,
        grid_seconds: a.grid_seconds,
        log: a.log,
    };
    let mut report = ingest(&files, &opts)?;
    let grid = report.grid.take().expect("ingest returns a grid");
    write_grid(&grid, &a.out)?;
    emit_json(&report, Some(&a.out.join("ingest_report.json")))
}

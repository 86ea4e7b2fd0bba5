//! `syncmark` command line: model experiments, tick generation and tick
//! analytics, each writing a CSV (or JSON) table.
//!
//! Exit codes: 0 success, 2 usage or validation error, 1 runtime error.

use crate::analytics::{self, AnalyticsError};
use crate::io::{self, format_number, Cell, ConfigError, IoError, ModelConfig, Table, TableFormat};
use crate::sim::{self, MarketMetrics, Method, Regime, SimError, SweepOptions, SweepParam};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub const THREADS_ENV: &str = "SYNCMARK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "syncmark", version, about = "Synchronized-market model experiments and tick analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cost, error and informed profit of one market configuration.
    Metrics(MetricsArgs),
    /// Metrics over a grid of correlations or informed-trader shares.
    Sweep(SweepArgs),
    /// Synthetic trade and quote ticks.
    GenTicks(GenTicksArgs),
    /// Transaction cost and pricing error of every trade in a tick file.
    CostError(CostErrorArgs),
    /// Lagged response of one symbol's midpoint to another's moves.
    Response(ResponseArgs),
    /// Return correlations, index correlations and HFT activity.
    Correlate(CorrelateArgs),
    /// Minimum spanning tree of a correlation matrix.
    Mst(MstArgs),
}

#[derive(Debug, Args)]
struct Output {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table format; inferred from the output extension by default.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RegimeArg {
    Sync,
    Unsync,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Sync => Regime::Synchronized,
            RegimeArg::Unsync => Regime::Unsynchronized,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ParamArg {
    Rho,
    Phi,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured regime.
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Monte Carlo seed; defaults to the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    param: ParamArg,
    #[arg(long, allow_hyphen_values = true)]
    from: f64,
    #[arg(long, allow_hyphen_values = true)]
    to: f64,
    /// Number of intervals; the grid has steps + 1 points.
    #[arg(long)]
    steps: u32,
    /// Monte Carlo samples for markets too large to enumerate.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct GenTicksArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    periods: Option<u64>,
    /// Output tick CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CostErrorArgs {
    #[arg(long)]
    ticks: PathBuf,
    /// Seconds after the trade at which its error is measured.
    #[arg(long)]
    horizon: f64,
    #[arg(long)]
    vol_divisor: Option<f64>,
    /// One row per trade instead of group summaries.
    #[arg(long)]
    per_trade: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct ResponseArgs {
    #[arg(long)]
    ticks: PathBuf,
    /// Responding symbol.
    #[arg(long, required_unless_present = "all_pairs", requires = "j")]
    i: Option<String>,
    /// Moving symbol.
    #[arg(long, requires = "i")]
    j: Option<String>,
    /// Average over every ordered symbol pair.
    #[arg(long, conflicts_with_all = ["i", "j"])]
    all_pairs: bool,
    /// Largest lag in seconds.
    #[arg(long)]
    max_lag: f64,
    /// Lag spacing in seconds.
    #[arg(long)]
    grid: f64,
    /// Split the response by the class of the trade behind each move.
    #[arg(long)]
    decompose: bool,
    /// Attribution window in milliseconds.
    #[arg(long, default_value_t = analytics::DEFAULT_WINDOW_MS)]
    window: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    #[arg(long)]
    ticks: PathBuf,
    /// Sampling interval in seconds.
    #[arg(long)]
    dt: f64,
    /// Per-symbol correlation with the equal-weighted index.
    #[arg(long)]
    index: bool,
    /// Per-symbol share of volume traded by HFT.
    #[arg(long)]
    hft_fraction: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct MstArgs {
    /// Correlation matrix CSV (`symbol,A,B,...`).
    #[arg(long)]
    corr: PathBuf,
    /// Sector map CSV (`symbol,sector`).
    #[arg(long)]
    sectors: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Read { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Schema { .. } => CliError::Invalid(e.to_string()),
            IoError::Io { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::DegenerateConditioning => CliError::Runtime(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::InvalidArgument(_) | AnalyticsError::UnknownSymbol(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
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
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = thread_pool().and_then(|pool| match pool {
        Some(pool) => pool.install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>, CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Invalid(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Metrics(a) => metrics(a),
        Command::Sweep(a) => sweep(a),
        Command::GenTicks(a) => gen_ticks(a),
        Command::CostError(a) => cost_error(a),
        Command::Response(a) => response(a),
        Command::Correlate(a) => correlate(a),
        Command::Mst(a) => mst(a),
    }
}

fn emit(table: &Table, output: &Output) -> Result<(), CliError> {
    let format = match (output.format, &output.out) {
        (Some(FormatArg::Csv), _) => TableFormat::Csv,
        (Some(FormatArg::Json), _) => TableFormat::Json,
        (None, Some(path)) => TableFormat::from_path(path),
        (None, None) => TableFormat::Csv,
    };
    match &output.out {
        Some(path) => io::write_table(table, path, format)?,
        None => io::write_table_to(table, std::io::stdout().lock(), format)?,
    }
    Ok(())
}

fn metric_cells(m: &MarketMetrics) -> Vec<Cell> {
    vec![
        m.cost.into(),
        m.error.into(),
        m.informed_profit.into(),
        m.std_err.cost.into(),
        m.std_err.error.into(),
        m.std_err.informed_profit.into(),
    ]
}

const METRIC_COLUMNS: [&str; 6] = [
    "cost",
    "error",
    "informed_profit",
    "std_err_cost",
    "std_err_error",
    "std_err_informed_profit",
];

fn metrics(a: MetricsArgs) -> Result<(), CliError> {
    let config = io::read_config(&a.config)?;
    let market = config.market()?;
    let mut query = config.metrics_query();
    if let Some(r) = a.regime {
        query = query.with_regime(r.into());
    }
    let (method, result) = match a.method {
        MethodArg::Exact => (Method::Exact, market.exact_metrics(&query)?),
        MethodArg::Mc => (Method::MonteCarlo, market.mc_metrics(&query, a.samples, a.seed.unwrap_or(config.seed))?),
    };
    let mut table = Table::new(["regime", "method", "target", "conditioning"].into_iter().chain(METRIC_COLUMNS));
    let mut row: Vec<Cell> = vec![
        query.regime.label().into(),
        method.label().into(),
        config.securities[query.target].symbol().into(),
        query.conditioning.to_string().into(),
    ];
    row.extend(metric_cells(&result));
    table.push(row);
    emit(&table, &a.output)
}

/// `steps + 1` evenly spaced points, rounded to 12 significant digits so
/// that e.g. 0.3 is exactly 0.3.
fn grid(from: f64, to: f64, steps: u32) -> Result<Vec<f64>, CliError> {
    if !(from.is_finite() && to.is_finite()) || steps == 0 {
        return Err(CliError::Invalid("--from and --to must be finite and --steps at least 1".into()));
    }
    Ok((0..=steps)
        .map(|k| {
            let v = from + (to - from) * k as f64 / steps as f64;
            format_number(v).and_then(|s| s.parse().ok()).unwrap_or(v)
        })
        .collect())
}

fn sweep(a: SweepArgs) -> Result<(), CliError> {
    let config = io::read_config(&a.config)?;
    let param = match a.param {
        ParamArg::Rho => SweepParam::Rho,
        ParamArg::Phi => SweepParam::Phi,
    };
    let points = grid(a.from, a.to, a.steps)?;
    let options = SweepOptions {
        samples: a.samples,
        seed: a.seed.unwrap_or(config.seed),
    };
    let rows = sim::sweep(&config.securities, &config.rho, param, &points, &config.metrics_query(), options);
    let mut table = Table::new(
        [param.to_string().as_str(), "regime"]
            .into_iter()
            .chain(METRIC_COLUMNS)
            .chain(["status"]),
    );
    for row in rows {
        let mut cells: Vec<Cell> = vec![row.value.into(), row.regime.label().into()];
        match &row.result {
            Ok(m) => {
                cells.extend(metric_cells(m));
                cells.push("ok".into());
            }
            Err(reason) => {
                eprintln!("skipped {param} = {}: {reason}", row.value);
                cells.extend(std::iter::repeat_n(Cell::Empty, METRIC_COLUMNS.len()));
                cells.push(format!("skipped: {reason}").into());
            }
        }
        table.push(cells);
    }
    emit(&table, &a.output)
}

fn gen_ticks(a: GenTicksArgs) -> Result<(), CliError> {
    let config: ModelConfig = io::read_config(&a.config)?;
    let market = config.market()?;
    let mut tick_config = config.tick_config();
    if let Some(r) = a.regime {
        tick_config.regime = r.into();
    }
    if let Some(s) = a.seed {
        tick_config.seed = s;
    }
    if let Some(p) = a.periods {
        tick_config.periods = p;
    }
    let series = sim::gen_ticks(&market, &tick_config)?;
    match &a.out {
        Some(path) => io::write_ticks(&series, path)?,
        None => io::write_ticks_to(&series, std::io::stdout().lock())?,
    }
    Ok(())
}

fn cost_error(a: CostErrorArgs) -> Result<(), CliError> {
    let ticks = io::read_ticks(&a.ticks)?;
    let report = analytics::trade_cost_error(&ticks, a.horizon, a.vol_divisor)?;
    if report.no_prior_quote + report.no_horizon_quote > 0 {
        eprintln!(
            "excluded {} trades without a prior quote and {} without a quote at the horizon",
            report.no_prior_quote, report.no_horizon_quote
        );
    }
    let table = if a.per_trade {
        let mut t = Table::new([
            "ts_ns",
            "symbol",
            "side",
            "trader_class",
            "price",
            "prevailing_mid",
            "horizon_mid",
            "cost",
            "error",
        ]);
        for tr in &report.trades {
            t.push(vec![
                tr.ts_ns.into(),
                tr.symbol.clone().into(),
                tr.side.to_string().into(),
                tr.trader_class.map(|c| c.code().to_string()).into(),
                tr.price.to_string().into(),
                tr.prevailing_mid.into(),
                tr.horizon_mid.into(),
                tr.cost.into(),
                tr.error.into(),
            ]);
        }
        t
    } else {
        let mut t = Table::new(["group", "count", "cost", "std_err_cost", "error", "std_err_error"]);
        for g in &report.groups {
            t.push(vec![
                g.label.clone().into(),
                g.count.into(),
                g.mean_cost.into(),
                g.se_cost.into(),
                g.mean_error.into(),
                g.se_error.into(),
            ]);
        }
        t
    };
    emit(&table, &a.output)
}

fn response(a: ResponseArgs) -> Result<(), CliError> {
    let ticks = io::read_ticks(&a.ticks)?;
    let window = a.decompose.then_some(a.window);
    let curve = match (&a.i, &a.j) {
        _ if a.all_pairs => analytics::price_response_all_pairs(&ticks, a.max_lag, a.grid, window)?,
        (Some(i), Some(j)) => match window {
            Some(w) => analytics::decompose_response(&ticks, i, j, a.max_lag, a.grid, w)?,
            None => analytics::price_response(&ticks, i, j, a.max_lag, a.grid)?,
        },
        _ => return Err(CliError::Invalid("either --i and --j or --all-pairs is required".into())),
    };
    eprintln!("{} conditioning events", curve.events);
    let mut columns = vec!["lag", "response", "std_err"];
    if curve.components.is_some() {
        columns.extend(["h", "n", "u"]);
    }
    let mut table = Table::new(columns);
    for k in 0..curve.lags.len() {
        let mut row: Vec<Cell> = vec![curve.lags[k].into(), curve.values[k].into(), curve.std_err[k].into()];
        if let Some(c) = &curve.components {
            row.extend([c.hft[k].into(), c.non_hft[k].into(), c.uncategorized[k].into()]);
        }
        table.push(row);
    }
    emit(&table, &a.output)
}

fn correlate(a: CorrelateArgs) -> Result<(), CliError> {
    let ticks = io::read_ticks(&a.ticks)?;
    let rm = analytics::returns(&ticks, a.dt)?;
    if !a.index && !a.hft_fraction {
        let corr = analytics::correlation_matrix(&rm)?;
        if matches!(a.output.format, Some(FormatArg::Json)) {
            return Err(CliError::Invalid("correlation matrices are written as CSV only".into()));
        }
        match &a.output.out {
            Some(path) => io::write_matrix(&rm.symbols, &corr, path)?,
            None => io::write_matrix_to(&rm.symbols, &corr, std::io::stdout().lock())?,
        }
        return Ok(());
    }
    let mut columns = vec!["symbol"];
    if a.index {
        columns.push("index_correlation");
    }
    if a.hft_fraction {
        columns.push("hft_fraction");
    }
    let mut table = Table::new(columns);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, symbol) in rm.symbols.iter().enumerate() {
        let mut row: Vec<Cell> = vec![symbol.clone().into()];
        let ic = a.index.then(|| analytics::index_correlation(&rm, i)).transpose()?;
        let hf = a.hft_fraction.then(|| analytics::hft_fraction(&ticks, symbol)).transpose()?;
        row.extend(ic.map(Cell::from));
        row.extend(hf.map(Cell::from));
        if let (Some(ic), Some(hf)) = (ic, hf) {
            xs.push(hf);
            ys.push(ic);
        }
        table.push(row);
    }
    emit(&table, &a.output)?;
    if a.index && a.hft_fraction {
        let fit = analytics::ols_fit(&xs, &ys)?;
        let mut err = std::io::stderr().lock();
        let _ = writeln!(
            err,
            "index_correlation ~ hft_fraction: slope {} intercept {} r_squared {}",
            format_number(fit.slope).unwrap_or_default(),
            format_number(fit.intercept).unwrap_or_default(),
            format_number(fit.r_squared).unwrap_or_default(),
        );
    }
    Ok(())
}

fn mst(a: MstArgs) -> Result<(), CliError> {
    let (labels, corr) = io::read_matrix(&a.corr)?;
    let sectors = a.sectors.as_deref().map(io::read_sectors).transpose()?;
    let tree = analytics::mst(&corr, &labels, sectors.as_ref())?;
    let mut columns = vec!["a", "b", "distance"];
    if sectors.is_some() {
        columns.extend(["sector_a", "sector_b"]);
    }
    let mut table = Table::new(columns);
    for e in &tree.edges {
        let mut row: Vec<Cell> = vec![e.a.clone().into(), e.b.clone().into(), e.distance.into()];
        if let Some(s) = &tree.sectors {
            row.push(s.get(&e.a).cloned().into());
            row.push(s.get(&e.b).cloned().into());
        }
        table.push(row);
    }
    emit(&table, &a.output)
}

//! `diffvoi`: grid scans, branch traces, point analyses and scenario checks.

mod scenario;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use diffvoi::analysis::{
    self, BranchResolver, BranchSelector, ChannelComparison, GridAxis, MetricChoice, NamedStatistic, ScanSpec,
    SelectOptions,
};
use diffvoi::info::{Channel, Units};
use diffvoi::qre::{self, PathAxis, PathSchedule, TraceOptions};
use diffvoi::scenarios::{self, BuildParams, ScenarioId};
use diffvoi::{Error, Maid, ParamPoint};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "diffvoi",
    version,
    about = "Differential value of information in quantal response equilibria"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate values, gradients and cone flags over a θ grid.
    Scan(ScanArgs),
    /// Trace an equilibrium branch along one parameter.
    Branch(BranchArgs),
    /// Full report at a single parameter point.
    Analyze(AnalyzeArgs),
    /// Run a built-in scenario's checks.
    Scenario(ScenarioArgs),
}

#[derive(Args)]
struct GameArgs {
    /// Built-in game (blackwell, bagwell, signaling, negutility).
    #[arg(long, required_unless_present = "maid", conflicts_with = "maid")]
    scenario: Option<String>,
    /// Game document in JSON.
    #[arg(long)]
    maid: Option<PathBuf>,
    /// Bagwell with one noise parameter `eps` for both channel inputs.
    #[arg(long)]
    symmetric_channel: bool,
}

#[derive(Args)]
struct PointArgs {
    /// θ component, `name=value` (repeatable). Others keep their defaults.
    #[arg(long = "theta", value_name = "NAME=VALUE")]
    theta: Vec<String>,
    /// Rationality, `player=value` or a bare value for every player (repeatable).
    #[arg(long = "beta", value_name = "PLAYER=VALUE")]
    beta: Vec<String>,
}

#[derive(Args)]
struct SelectArgs {
    /// principal, stackelberg, below, or an index into the sorted equilibria.
    #[arg(long, default_value = "principal")]
    branch: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multistart count when the selector needs every equilibrium.
    #[arg(long, default_value_t = analysis::DEFAULT_STARTS)]
    starts: usize,
}

#[derive(Args)]
struct StatArgs {
    /// `V:<player>`, `MI:<A>;<B>` or `capacity:<node>` (repeatable).
    #[arg(long = "stat", value_name = "STAT")]
    stat: Vec<String>,
    #[arg(long, value_enum, default_value_t = UnitsArg::Bits)]
    units: UnitsArg,
}

#[derive(Args)]
struct OutArgs {
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    game: GameArgs,
    #[command(flatten)]
    point: PointArgs,
    /// Swept component, `name=min:max:steps` (repeatable).
    #[arg(long = "grid", value_name = "NAME=MIN:MAX:STEPS", required = true)]
    grid: Vec<String>,
    #[command(flatten)]
    select: SelectArgs,
    #[command(flatten)]
    stats: StatArgs,
    #[arg(long, default_value = "fisher-total")]
    metric: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct BranchArgs {
    #[command(flatten)]
    game: GameArgs,
    #[command(flatten)]
    point: PointArgs,
    /// `beta`, `beta_<player>` or a θ name, then `=from:to:steps`.
    #[arg(long, value_name = "AXIS=FROM:TO:STEPS")]
    path: String,
    #[command(flatten)]
    select: SelectArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    game: GameArgs,
    #[command(flatten)]
    point: PointArgs,
    #[command(flatten)]
    select: SelectArgs,
    #[command(flatten)]
    stats: StatArgs,
    /// Node whose channel is compared in the garbling order.
    #[arg(long, requires = "compare_channel")]
    compare_node: Option<String>,
    /// Rows separated by `;`, entries by `,`.
    #[arg(long, requires = "compare_node")]
    compare_channel: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct ScenarioArgs {
    /// blackwell, bagwell, signaling, braess or negutility.
    id: String,
    /// θ values, `name=value` or a bare value for the first component.
    #[arg(long = "theta", value_name = "VALUE")]
    theta: Vec<String>,
    /// Compare analytic gradients with finite differences.
    #[arg(long)]
    check_gradients: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = analysis::DEFAULT_STARTS)]
    starts: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitsArg {
    Bits,
    Nats,
}

impl From<UnitsArg> for Units {
    fn from(u: UnitsArg) -> Units {
        match u {
            UnitsArg::Bits => Units::Bits,
            UnitsArg::Nats => Units::Nats,
        }
    }
}

enum Failure {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numeric(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numeric(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NonConvergence(_)
            | Error::SingularJacobian(_)
            | Error::FoldDetected(_)
            | Error::BranchJump(_)
            | Error::Undefined(_)
            | Error::ZeroVector(_)
            | Error::ZeroProbability
            | Error::PreconditionFailed(_)
            | Error::EmptyGenerators
            | Error::Lp(_) => Failure::Numeric(msg),
            _ => Failure::Usage(msg),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn load_game(g: &GameArgs) -> CliResult<Maid> {
    if let Some(path) = &g.maid {
        let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        return Ok(diffvoi::parse_maid(&text)?);
    }
    let id: ScenarioId = g.scenario.as_deref().unwrap_or_default().parse()?;
    let params = BuildParams {
        symmetric_channel: g.symmetric_channel,
    };
    Ok(scenarios::build(id, &params)?)
}

fn parse_value(s: &str, what: &str) -> CliResult<f64> {
    s.trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("{what}: `{s}` is not a number")))
}

fn parse_point(maid: &Maid, p: &PointArgs) -> CliResult<ParamPoint> {
    let mut theta = maid.params.default.clone();
    for t in &p.theta {
        let (name, v) = t
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--theta `{t}` is not name=value")))?;
        theta[maid.params.index_of(name)?] = parse_value(v, "--theta")?;
    }
    let mut beta: Vec<f64> = maid.players.iter().map(|pl| pl.beta).collect();
    for b in &p.beta {
        match b.split_once('=') {
            Some((name, v)) => beta[maid.player_index(name)?] = parse_value(v, "--beta")?,
            None => {
                let v = parse_value(b, "--beta")?;
                beta.iter_mut().for_each(|x| *x = v);
            }
        }
    }
    Ok(ParamPoint::new(maid, theta, beta)?)
}

fn select_options(s: &SelectArgs) -> CliResult<(BranchSelector, SelectOptions)> {
    let opts = SelectOptions {
        trace: TraceOptions::default(),
        n_starts: s.starts,
        seed: s.seed,
    };
    Ok((s.branch.parse()?, opts))
}

fn parse_stats(maid: &Maid, s: &StatArgs) -> CliResult<Vec<NamedStatistic>> {
    s.stat
        .iter()
        .map(|x| analysis::parse_statistic(maid, x, s.units.into()).map_err(Failure::from))
        .collect()
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(e.to_string())),
    }
}

fn cell_json(s: &str) -> Value {
    match s {
        "" => Value::Null,
        "true" => json!(true),
        "false" => json!(false),
        _ => s.parse::<f64>().map(|x| json!(x)).unwrap_or_else(|_| json!(s)),
    }
}

fn csv_to_json(csv: &str) -> Value {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    Value::Array(
        lines
            .filter(|l| !l.starts_with('#'))
            .map(|l| {
                let obj: serde_json::Map<String, Value> = header
                    .iter()
                    .zip(l.split(','))
                    .map(|(h, c)| (h.to_string(), cell_json(c)))
                    .collect();
                Value::Object(obj)
            })
            .collect(),
    )
}

fn cmd_scan(a: &ScanArgs) -> CliResult<()> {
    let maid = load_game(&a.game)?;
    let base = parse_point(&maid, &a.point)?;
    let grid = a
        .grid
        .iter()
        .map(|g| GridAxis::parse(&maid, g))
        .collect::<diffvoi::Result<Vec<_>>>()?;
    let (branch, select) = select_options(&a.select)?;
    let spec = ScanSpec {
        grid,
        base,
        branch,
        stats: parse_stats(&maid, &a.stats)?,
        metric: a.metric.parse::<MetricChoice>()?,
        select,
    };
    let out = analysis::scan(&maid, &spec)?;
    let csv = out.to_csv();
    let text = match a.out.format {
        Format::Csv => csv,
        Format::Json => analysis::to_pretty_json(&csv_to_json(&csv)),
    };
    emit(&a.out.out, &text)?;
    if !out.rows.is_empty() && out.n_ok() == 0 {
        return Err(Failure::Numeric("every grid point failed".into()));
    }
    Ok(())
}

fn parse_path(maid: &Maid, s: &str) -> CliResult<(PathAxis, f64, f64, usize)> {
    let bad = || Failure::Usage(format!("--path `{s}` is not axis=from:to:steps"));
    let (name, range) = s.split_once('=').ok_or_else(bad)?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let axis = if name == "beta" {
        PathAxis::AllBeta
    } else if let Some(p) = name.strip_prefix("beta_") {
        PathAxis::Beta(maid.player_index(p)?)
    } else {
        PathAxis::Theta(maid.params.index_of(name)?)
    };
    let steps: usize = parts[2].parse().map_err(|_| bad())?;
    if steps == 0 {
        return Err(bad());
    }
    Ok((
        axis,
        parse_value(parts[0], "--path")?,
        parse_value(parts[1], "--path")?,
        steps,
    ))
}

fn cmd_branch(a: &BranchArgs) -> CliResult<()> {
    let maid = load_game(&a.game)?;
    let (axis, from, to, steps) = parse_path(&maid, &a.path)?;
    let point = parse_point(&maid, &a.point)?;
    let start_point = axis.set(&point, from);
    maid.check_point(&start_point)?;
    let (selector, select) = select_options(&a.select)?;
    let resolver = BranchResolver::new(&maid, selector.clone(), &start_point.beta, select.clone())?;
    let start = resolver.resolve(&start_point)?;
    let schedule = PathSchedule::linspace(axis, from, to, steps)?;
    let branch = qre::trace_branch(&maid, &start, &schedule, &select.trace, &selector.label())?;
    let mut csv = qre::branch_csv(&maid, &branch);
    let text = match a.out.format {
        Format::Csv => {
            if let Some(f) = &branch.fold {
                csv.push_str(&format!(
                    "# fold at {}: condition {:e}: {}\n",
                    f.at, f.condition, f.reason
                ));
            }
            csv
        }
        Format::Json => {
            let fold = branch
                .fold
                .as_ref()
                .map(|f| json!({ "at": f.at, "condition": f.condition, "reason": f.reason }));
            let v = json!({
                "label": branch.label,
                "axis": axis.name(&maid),
                "points": csv_to_json(&csv),
                "fold": fold,
            });
            analysis::to_pretty_json(&v)
        }
    };
    emit(&a.out.out, &text)
}

fn parse_channel(s: &str) -> CliResult<Channel> {
    let rows = s
        .split(';')
        .map(|r| r.split(',').map(|x| parse_value(x, "--compare-channel")).collect())
        .collect::<CliResult<Vec<Vec<f64>>>>()?;
    Ok(Channel::new(rows)?)
}

fn cmd_analyze(a: &AnalyzeArgs) -> CliResult<()> {
    if let Format::Csv = a.format {
        return Err(Failure::Usage("analyze writes JSON only".into()));
    }
    let maid = load_game(&a.game)?;
    let point = parse_point(&maid, &a.point)?;
    let (selector, select) = select_options(&a.select)?;
    let stats = parse_stats(&maid, &a.stats)?;
    let compare = match (&a.compare_node, &a.compare_channel) {
        (Some(n), Some(c)) => Some(ChannelComparison {
            node: maid.node_index(n)?,
            channel: parse_channel(c)?,
        }),
        _ => None,
    };
    let report = analysis::analyze(&maid, &point, &selector, &stats, &select, compare.as_ref())?;
    emit(&a.out, &analysis::to_pretty_json(&report))
}

fn cmd_scenario(a: &ScenarioArgs) -> CliResult<()> {
    let id: ScenarioId = a.id.parse()?;
    let opts = scenario::Options {
        theta: a.theta.clone(),
        check_gradients: a.check_gradients,
        seed: a.seed,
        starts: a.starts,
    };
    let checks = scenario::run(id, &opts)?;
    let table = scenario::render(id, &checks);
    emit(&None, &table)?;
    if checks.iter().all(|c| c.pass) {
        Ok(())
    } else {
        Err(Failure::Numeric(format!(
            "{} of {} checks failed",
            checks.iter().filter(|c| !c.pass).count(),
            checks.len()
        )))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let res = match &cli.command {
        Command::Scan(a) => cmd_scan(a),
        Command::Branch(a) => cmd_branch(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Scenario(a) => cmd_scenario(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

//! Branch selection, grid scans and single-point reports built from the
//! solver, sensitivity and geometry layers.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{self, fisher_metric, value_of_f, ConeReport, FisherFamily, Metric};
use crate::inference::Evaluator;
use crate::info::{self, Channel, Units};
use crate::maid::{Maid, ParamPoint};
use crate::qre::{
    self, enumerate_equilibria, follow_to, principal_equilibrium, Equilibrium, SolveOptions, TraceOptions,
};
use crate::sensitivity::{self, statistic_gradient, statistic_value, Statistic, BRANCH_JUMP_GUARD};

/// Starts used when a selector needs the full equilibrium set.
pub const DEFAULT_STARTS: usize = 200;
const HESSIAN_STEP: f64 = 1e-4;

/// Which equilibrium to report at a parameter point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BranchSelector {
    /// Continued from β = 0.
    Principal,
    /// Position in the sorted equilibrium list at the point itself.
    Index(usize),
    /// `stackelberg`: highest leader (first player) value at the reference
    /// point; `below`: second highest. Continued in θ to the target point.
    Label(String),
}

impl FromStr for BranchSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "principal" => Ok(BranchSelector::Principal),
            "stackelberg" | "below" => Ok(BranchSelector::Label(s.to_string())),
            _ => s
                .parse::<usize>()
                .map(BranchSelector::Index)
                .map_err(|_| Error::InvalidOption(format!("unknown branch `{s}`"))),
        }
    }
}

impl BranchSelector {
    pub fn label(&self) -> String {
        match self {
            BranchSelector::Principal => "principal".into(),
            BranchSelector::Index(i) => format!("branch{i}"),
            BranchSelector::Label(l) => l.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectOptions {
    pub trace: TraceOptions,
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            trace: TraceOptions::default(),
            n_starts: DEFAULT_STARTS,
            seed: 0,
        }
    }
}

impl SelectOptions {
    fn solve(&self) -> SolveOptions {
        SolveOptions {
            seed: self.seed,
            ..self.trace.solve.clone()
        }
    }
}

/// Equilibria ordered by the first player's value, highest first.
pub fn rank_by_leader_value(maid: &Maid, eqs: &[Equilibrium]) -> Vec<Equilibrium> {
    let mut v: Vec<(f64, Equilibrium)> = eqs
        .iter()
        .map(|e| {
            let ev = Evaluator::new(maid, &e.point.theta);
            (ev.expected_utility_from_factors(&ev.factors(&e.profile), 0), e.clone())
        })
        .collect();
    v.sort_by(|a, b| b.0.total_cmp(&a.0));
    v.into_iter().map(|(_, e)| e).collect()
}

/// Resolves a selector at many points, sharing work done at the reference.
#[derive(Debug, Clone)]
pub struct BranchResolver<'m> {
    maid: &'m Maid,
    selector: BranchSelector,
    opts: SelectOptions,
    anchor: Option<Equilibrium>,
}

impl<'m> BranchResolver<'m> {
    /// For labelled branches the reference point is the game's default θ at
    /// the rationalities of `beta`.
    pub fn new(maid: &'m Maid, selector: BranchSelector, beta: &[f64], opts: SelectOptions) -> Result<Self> {
        let anchor = match &selector {
            BranchSelector::Label(l) => {
                let reference = ParamPoint::new(maid, maid.params.default.clone(), beta.to_vec())?;
                let eqs = enumerate_equilibria(maid, &reference, opts.n_starts, &opts.solve())?;
                let ranked = rank_by_leader_value(maid, &eqs);
                let rank = if l == "stackelberg" { 0 } else { 1 };
                Some(ranked.get(rank).cloned().ok_or_else(|| {
                    Error::NonConvergence(format!(
                        "branch `{l}` needs {} equilibria at the reference point, found {}",
                        rank + 1,
                        ranked.len()
                    ))
                })?)
            }
            _ => None,
        };
        Ok(BranchResolver {
            maid,
            selector,
            opts,
            anchor,
        })
    }

    pub fn selector(&self) -> &BranchSelector {
        &self.selector
    }

    pub fn resolve(&self, point: &ParamPoint) -> Result<Equilibrium> {
        let maid = self.maid;
        match &self.selector {
            BranchSelector::Principal => principal_equilibrium(maid, point, &self.opts.trace),
            BranchSelector::Index(i) => {
                let eqs = enumerate_equilibria(maid, point, self.opts.n_starts, &self.opts.solve())?;
                let n = eqs.len();
                eqs.into_iter()
                    .nth(*i)
                    .ok_or_else(|| Error::InvalidOption(format!("branch index {i} but {n} equilibria found")))
            }
            BranchSelector::Label(_) => {
                let anchor = self.anchor.as_ref().expect("labelled branch has an anchor");
                let at_beta = follow_to(
                    maid,
                    anchor,
                    &ParamPoint {
                        theta: anchor.point.theta.clone(),
                        beta: point.beta.clone(),
                    },
                    &self.opts.trace,
                )?;
                follow_to(maid, &at_beta, point, &self.opts.trace)
            }
        }
    }
}

/// One swept θ component.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub param: usize,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridAxis {
    /// Parse `name=min:max:steps`.
    pub fn parse(maid: &Maid, s: &str) -> Result<Self> {
        let bad = || Error::InvalidOption(format!("grid `{s}` is not name=min:max:steps"));
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let min: f64 = parts[0].parse().map_err(|_| bad())?;
        let max: f64 = parts[1].parse().map_err(|_| bad())?;
        let steps: usize = parts[2].parse().map_err(|_| bad())?;
        let param = maid.params.index_of(name)?;
        if steps < 2 {
            return Err(Error::InvalidOption(format!("grid `{name}` needs at least 2 steps")));
        }
        if !(min.is_finite() && max.is_finite()) {
            return Err(bad());
        }
        Ok(GridAxis { param, min, max, steps })
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.steps)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

/// Statistic named on the command line.
#[derive(Debug, Clone)]
pub struct NamedStatistic {
    pub name: String,
    pub stat: Statistic,
}

fn node_set(maid: &Maid, s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|n| maid.node_index(n.trim())).collect()
}

/// Parse `V:<player>`, `MI:<A>;<B>` (comma-separated node sets) or
/// `capacity:<node>`.
pub fn parse_statistic(maid: &Maid, s: &str, units: Units) -> Result<NamedStatistic> {
    let (kind, arg) = s
        .split_once(':')
        .ok_or_else(|| Error::InvalidOption(format!("statistic `{s}`")))?;
    let stat = match kind {
        "V" => Statistic::Value(maid.player_index(arg)?),
        "MI" => {
            let (a, b) = arg
                .split_once(';')
                .ok_or_else(|| Error::InvalidOption(format!("statistic `{s}` needs MI:<A>;<B>")))?;
            Statistic::MutualInformation {
                a: node_set(maid, a)?,
                b: node_set(maid, b)?,
                units,
            }
        }
        "capacity" => Statistic::Capacity {
            node: maid.node_index(arg)?,
            units,
        },
        _ => return Err(Error::InvalidOption(format!("unknown statistic `{kind}`"))),
    };
    let name = match kind {
        "V" => format!("V_{arg}"),
        "MI" => format!("I({arg})"),
        _ => format!("C({arg})"),
    };
    Ok(NamedStatistic { name, stat })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricChoice {
    Euclidean,
    #[default]
    FisherTotal,
    FisherChannel,
}

impl FromStr for MetricChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(MetricChoice::Euclidean),
            "fisher-total" => Ok(MetricChoice::FisherTotal),
            "fisher-channel" => Ok(MetricChoice::FisherChannel),
            _ => Err(Error::InvalidOption(format!("unknown metric `{s}`"))),
        }
    }
}

impl MetricChoice {
    pub fn name(self) -> &'static str {
        match self {
            MetricChoice::Euclidean => "euclidean",
            MetricChoice::FisherTotal => "fisher-total",
            MetricChoice::FisherChannel => "fisher-channel",
        }
    }

    pub fn metric(self, maid: &Maid, e: &Equilibrium) -> Result<Metric> {
        match self {
            MetricChoice::Euclidean => Ok(Metric::euclidean(e.point.theta.len())),
            MetricChoice::FisherTotal => fisher_metric(maid, e, FisherFamily::Total),
            MetricChoice::FisherChannel => fisher_metric(maid, e, FisherFamily::ChannelOnly),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanSpec {
    pub grid: Vec<GridAxis>,
    /// Values of unswept θ components and all rationalities.
    pub base: ParamPoint,
    pub branch: BranchSelector,
    pub stats: Vec<NamedStatistic>,
    pub metric: MetricChoice,
    pub select: SelectOptions,
}

/// Per-point results of a scan.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub theta: Vec<f64>,
    pub cells: Vec<String>,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct ScanOutput {
    pub header: Vec<String>,
    pub rows: Vec<ScanRow>,
}

impl ScanOutput {
    pub fn n_ok(&self) -> usize {
        self.rows.iter().filter(|r| r.status == "ok").count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            let mut cells: Vec<String> = r.theta.iter().map(|t| fmt_num(*t)).collect();
            cells.extend(r.cells.iter().cloned());
            cells.push(r.status.clone());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Column index by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Cell of a row by column name (θ columns included).
    pub fn cell<'a>(&'a self, row: &'a ScanRow, name: &str) -> Option<String> {
        let i = self.column(name)?;
        let nt = row.theta.len();
        if i < nt {
            Some(fmt_num(row.theta[i]))
        } else if i - nt < row.cells.len() {
            Some(row.cells[i - nt].clone())
        } else {
            Some(row.status.clone())
        }
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn fmt_flag(b: Option<bool>) -> String {
    match b {
        Some(true) => "true".into(),
        Some(false) => "false".into(),
        None => String::new(),
    }
}

fn sanitize(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Column names after the θ columns, excluding `status`.
fn scan_columns(maid: &Maid, spec: &ScanSpec) -> Vec<String> {
    let theta = &maid.params.names;
    let mut cols = vec!["branch".to_string(), "residual".to_string()];
    for p in &maid.players {
        cols.push(format!("V_{}", p.name));
        for t in theta {
            cols.push(format!("dV_{}/d{}", p.name, t));
        }
    }
    for s in &spec.stats {
        cols.push(s.name.clone());
        for t in theta {
            cols.push(format!("d{}/d{}", s.name, t));
        }
        for p in &maid.players {
            cols.push(format!("neg_dir[{};{}]", p.name, s.name));
        }
        cols.push(format!("pareto_negative[{}]", s.name));
        cols.push(format!("pareto_positive[{}]", s.name));
        cols.push(format!("in_hull[{}]", s.name));
        for p in &maid.players {
            cols.push(format!("value_of[{};{}]", p.name, s.name));
        }
    }
    cols
}

fn scan_point(maid: &Maid, spec: &ScanSpec, resolver: &BranchResolver, point: &ParamPoint) -> Result<Vec<String>> {
    let e = resolver.resolve(point)?;
    let np = maid.players.len();
    let mut cells = vec![resolver.selector().label(), format!("{:e}", e.residual_norm)];
    let rep = sensitivity::strategy_derivatives(maid, &e)?;
    let ds = rep.dsigma_rows();
    let mut grads_v = Vec::with_capacity(np);
    for i in 0..np {
        let v = statistic_value(maid, &e, &Statistic::Value(i))?;
        let g = sensitivity::statistic_gradient_with(maid, &e.point, &e.profile, &ds, &Statistic::Value(i))?;
        cells.push(fmt_num(v));
        cells.extend(g.iter().map(|x| fmt_num(*x)));
        grads_v.push(g);
    }
    let metric = if spec.stats.is_empty() {
        None
    } else {
        Some(spec.metric.metric(maid, &e)?)
    };
    for s in &spec.stats {
        let v = statistic_value(maid, &e, &s.stat)?;
        let g = sensitivity::statistic_gradient_with(maid, &e.point, &e.profile, &ds, &s.stat)?;
        cells.push(fmt_num(v));
        cells.extend(g.iter().map(|x| fmt_num(*x)));
        let f_zero = g.iter().all(|x| *x == 0.0);
        for gv in &grads_v {
            let flag = if f_zero || gv.iter().all(|x| *x == 0.0) {
                None
            } else {
                Some(geometry::negative_value_direction(gv, &g)?.is_some())
            };
            cells.push(fmt_flag(flag));
        }
        let usable = grads_v.iter().all(|gv| gv.iter().any(|x| *x != 0.0));
        let pareto = |target: &[f64]| -> Result<Option<bool>> {
            if !usable {
                return Ok(None);
            }
            match geometry::pareto_negative_direction(&grads_v, target) {
                Ok(w) => Ok(Some(w.is_some())),
                Err(Error::PreconditionFailed(_)) => Ok(None),
                Err(e) => Err(e),
            }
        };
        cells.push(fmt_flag(pareto(&g)?));
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        cells.push(fmt_flag(pareto(&neg)?));
        let hull = if usable {
            Some(geometry::cone_membership(&g, &grads_v, geometry::ConeMethod::Nnls)?.is_some())
        } else {
            None
        };
        cells.push(fmt_flag(hull));
        for gv in &grads_v {
            let val = value_of_f(gv, &g, metric.as_ref().unwrap())
                .map(fmt_num)
                .unwrap_or_default();
            cells.push(val);
        }
    }
    Ok(cells)
}

/// Evaluate every grid point (first axis slowest). Failures are recorded in
/// the status column.
pub fn scan(maid: &Maid, spec: &ScanSpec) -> Result<ScanOutput> {
    maid.check_point(&spec.base)?;
    let mut seen = Vec::new();
    for a in &spec.grid {
        if seen.contains(&a.param) {
            return Err(Error::InvalidOption(format!(
                "grid component `{}` given twice",
                maid.params.names[a.param]
            )));
        }
        seen.push(a.param);
    }
    let resolver = BranchResolver::new(maid, spec.branch.clone(), &spec.base.beta, spec.select.clone())?;
    let mut points = vec![spec.base.theta.clone()];
    for a in &spec.grid {
        let vals = a.values();
        points = points
            .into_iter()
            .flat_map(|t| {
                vals.iter().map(move |v| {
                    let mut t = t.clone();
                    t[a.param] = *v;
                    t
                })
            })
            .collect();
    }
    let cols = scan_columns(maid, spec);
    let rows: Vec<ScanRow> = points
        .into_par_iter()
        .map(|theta| {
            let point = ParamPoint {
                theta: theta.clone(),
                beta: spec.base.beta.clone(),
            };
            let res = maid
                .check_point(&point)
                .and_then(|_| scan_point(maid, spec, &resolver, &point));
            match res {
                Ok(cells) => ScanRow {
                    theta,
                    cells,
                    status: "ok".into(),
                },
                Err(e) => ScanRow {
                    theta,
                    cells: vec![String::new(); cols.len()],
                    status: sanitize(&e.to_string()),
                },
            }
        })
        .collect();
    let mut header: Vec<String> = maid.params.names.clone();
    header.extend(cols);
    header.push("status".into());
    Ok(ScanOutput { header, rows })
}

/// Gradient of a statistic at θ along the branch of `e`, re-solved by
/// warm-started Newton.
fn gradient_near(maid: &Maid, e: &Equilibrium, theta: &[f64], stat: &Statistic) -> Result<Vec<f64>> {
    let point = ParamPoint {
        theta: theta.to_vec(),
        beta: e.point.beta.clone(),
    };
    maid.check_point(&point)?;
    let opts = SolveOptions {
        tol: 1e-12,
        ..SolveOptions::default()
    };
    let moved = qre::newton_solve(maid, &point, &e.profile, &opts)?;
    let dist = moved.profile.distance(&e.profile);
    if dist >= BRANCH_JUMP_GUARD {
        return Err(Error::BranchJump(dist));
    }
    statistic_gradient(maid, &moved, stat)
}

/// Hessian of a statistic by central differences of its analytic gradient.
pub fn statistic_hessian(maid: &Maid, e: &Equilibrium, stat: &Statistic) -> Result<DMatrix<f64>> {
    geometry::hessian_fd(|t| gradient_near(maid, e, t, stat), &e.point.theta, HESSIAN_STEP)
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| Value::Array(r.iter().map(|x| json!(x)).collect()))
            .collect(),
    )
}

fn result_json<T>(r: Result<T>, f: impl FnOnce(T) -> Value) -> Value {
    match r {
        Ok(v) => f(v),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

/// Channel to compare against the one at `node` in the garbling order.
#[derive(Debug, Clone)]
pub struct ChannelComparison {
    pub node: usize,
    pub channel: Channel,
}

/// Single-point report.
pub fn analyze(
    maid: &Maid,
    point: &ParamPoint,
    selector: &BranchSelector,
    stats: &[NamedStatistic],
    select: &SelectOptions,
    compare: Option<&ChannelComparison>,
) -> Result<Value> {
    maid.check_point(point)?;
    let resolver = BranchResolver::new(maid, selector.clone(), &point.beta, select.clone())?;
    let e = resolver.resolve(point)?;
    let theta_names = &maid.params.names;
    let np = maid.players.len();

    let mut profile = serde_json::Map::new();
    let columns = qre::sigma_column_names(maid);
    for (name, v) in columns.iter().zip(e.profile.flat()) {
        profile.insert(name.clone(), json!(v));
    }

    let mut players = Vec::new();
    let mut grads_v = Vec::new();
    for i in 0..np {
        let v = statistic_value(maid, &e, &Statistic::Value(i))?;
        let g = sensitivity::value_gradient(maid, &e, i)?;
        players.push(json!({ "name": maid.players[i].name, "value": v, "gradient": g }));
        grads_v.push(g);
    }

    let metrics: Vec<(&str, Result<Metric>)> = vec![
        ("euclidean", Ok(Metric::euclidean(theta_names.len()))),
        ("fisher-total", fisher_metric(maid, &e, FisherFamily::Total)),
        ("fisher-channel", fisher_metric(maid, &e, FisherFamily::ChannelOnly)),
    ];
    let mut metric_json = serde_json::Map::new();
    for (name, m) in &metrics {
        metric_json.insert(
            name.to_string(),
            match m {
                Ok(m) => json!({ "matrix": matrix_json(&m.matrix), "ridge": m.ridge }),
                Err(err) => json!({ "error": err.to_string() }),
            },
        );
    }

    let hess_v: Vec<Result<DMatrix<f64>>> = (0..np)
        .map(|i| statistic_hessian(maid, &e, &Statistic::Value(i)))
        .collect();

    let mut stat_reports = Vec::new();
    for s in stats {
        let value = statistic_value(maid, &e, &s.stat)?;
        let g = statistic_gradient(maid, &e, &s.stat)?;
        let hess_f = statistic_hessian(maid, &e, &s.stat);
        let mut per_player = Vec::new();
        for i in 0..np {
            let gv = &grads_v[i];
            let mut values = serde_json::Map::new();
            for (name, m) in &metrics {
                if let Ok(m) = m {
                    values.insert(name.to_string(), result_json(value_of_f(gv, &g, m), |x| json!(x)));
                }
            }
            let directional: Vec<Value> = (0..theta_names.len())
                .map(|k| {
                    let mut delta = vec![0.0; theta_names.len()];
                    delta[k] = 1.0;
                    json!({
                        "direction": theta_names[k],
                        "value_of_direction": result_json(
                            geometry::value_of_direction(gv, &delta, &Metric::euclidean(delta.len())),
                            |x| json!(x)),
                        "value_of_f_in_direction": result_json(
                            geometry::value_of_f_in_direction(gv, &g, &delta),
                            |x| json!(x)),
                    })
                })
                .collect();
            let mismatch = match (&hess_v[i], &hess_f) {
                (Ok(hv), Ok(hf)) => result_json(geometry::second_order_mismatch(gv, &g, hv, hf), |m| json!(m.norm)),
                (Err(err), _) | (_, Err(err)) => json!({ "error": err.to_string() }),
            };
            per_player.push(json!({
                "player": maid.players[i].name,
                "value_of_f": Value::Object(values),
                "directional": directional,
                "negative_value_direction": result_json(geometry::negative_value_direction(gv, &g), |w| json!(w)),
                "second_order_mismatch": mismatch,
            }));
        }
        let cone = result_json(ConeReport::new(grads_v.clone(), g.clone()), |r| r.to_json());
        stat_reports.push(json!({
            "name": s.name,
            "value": value,
            "gradient": g,
            "players": per_player,
            "cone": cone,
        }));
    }

    let mut report = json!({
        "branch": selector.label(),
        "theta": theta_names.iter().zip(&point.theta).map(|(n, v)| (n.clone(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "beta": maid.players.iter().zip(&point.beta).map(|(p, b)| (p.name.clone(), json!(b))).collect::<serde_json::Map<_, _>>(),
        "equilibrium": {
            "profile": Value::Object(profile),
            "log_normalizers": e.log_normalizers(),
            "residual": e.residual_norm,
        },
        "players": players,
        "metrics": Value::Object(metric_json),
        "statistics": stat_reports,
    });
    if let Some(c) = compare {
        let here = Channel::from_node(maid, c.node, &point.theta)?;
        let order = info::garbling_order(&here, &c.channel)?;
        report["garbling"] = json!({
            "node": maid.nodes[c.node].name,
            "channel": here.rows(),
            "compared_with": c.channel.rows(),
            "order": format!("{order:?}"),
        });
    }
    Ok(report)
}

/// Render a report as stable, pretty JSON with a trailing newline.
pub fn to_pretty_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    let _ = writeln!(s);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn selector_parsing() {
        assert_eq!(
            "principal".parse::<BranchSelector>().unwrap(),
            BranchSelector::Principal
        );
        assert_eq!("2".parse::<BranchSelector>().unwrap(), BranchSelector::Index(2));
        assert_eq!(
            "stackelberg".parse::<BranchSelector>().unwrap(),
            BranchSelector::Label("stackelberg".into())
        );
        assert!("sideways".parse::<BranchSelector>().is_err());
    }

    #[test]
    fn grid_parsing() {
        let m = scenarios::blackwell();
        let a = GridAxis::parse(&m, "eps2=0.1:0.3:3").unwrap();
        assert_eq!(a.param, 1);
        assert_eq!(a.values().len(), 3);
        assert!(GridAxis::parse(&m, "eps2=0.1:0.3:1").is_err());
        assert!(matches!(
            GridAxis::parse(&m, "eps9=0.1:0.3:3"),
            Err(Error::UnknownParameter(_))
        ));
        assert!(GridAxis::parse(&m, "eps2=0.1:0.3").is_err());
    }

    #[test]
    fn statistic_parsing() {
        let m = scenarios::blackwell();
        let s = parse_statistic(&m, "MI:X;S", Units::Bits).unwrap();
        assert_eq!(s.name, "I(X;S)");
        assert!(parse_statistic(&m, "V:agent", Units::Bits).is_ok());
        assert!(parse_statistic(&m, "capacity:S", Units::Bits).is_ok());
        assert!(parse_statistic(&m, "V:nobody", Units::Bits).is_err());
        assert!(parse_statistic(&m, "entropy:S", Units::Bits).is_err());
    }

    fn small_scan(stats: &[&str]) -> (Maid, ScanSpec) {
        let m = scenarios::blackwell();
        let spec = ScanSpec {
            grid: vec![GridAxis::parse(&m, "eps1=0.1:0.3:2").unwrap()],
            base: ParamPoint::new(&m, vec![0.1, 0.2], vec![5.0]).unwrap(),
            branch: BranchSelector::Principal,
            stats: stats
                .iter()
                .map(|s| parse_statistic(&m, s, Units::Bits).unwrap())
                .collect(),
            metric: MetricChoice::FisherTotal,
            select: SelectOptions::default(),
        };
        (m, spec)
    }

    #[test]
    fn scan_rows_and_determinism() {
        let (m, spec) = small_scan(&["MI:X;S"]);
        let a = scan(&m, &spec).unwrap();
        assert_eq!(a.rows.len(), 2);
        assert_eq!(a.n_ok(), 2);
        let b = scan(&m, &spec).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let csv = a.to_csv();
        let header = csv.lines().next().unwrap();
        assert!(header.starts_with("eps1,eps2,branch,residual,V_agent,"));
        assert!(header.ends_with(",status"));
        for line in csv.lines() {
            assert_eq!(line.split(',').count(), header.split(',').count());
        }
        // Negative value of information exists wherever the gradients are not collinear.
        for r in &a.rows {
            assert_eq!(a.cell(r, "neg_dir[agent;I(X;S)]").unwrap(), "true");
        }
    }

    #[test]
    fn failed_points_keep_going() {
        let (m, mut spec) = small_scan(&[]);
        spec.grid = vec![GridAxis::parse(&m, "eps1=0.3:0.7:2").unwrap()];
        let out = scan(&m, &spec).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert_eq!(out.rows[0].status, "ok");
        assert_ne!(out.rows[1].status, "ok");
    }

    #[test]
    fn analyze_report_shape() {
        let m = scenarios::blackwell();
        let p = ParamPoint::new(&m, vec![0.17, 0.22], vec![5.0]).unwrap();
        let stats = vec![parse_statistic(&m, "MI:X;S", Units::Bits).unwrap()];
        let compare = ChannelComparison {
            node: m.node_index("S").unwrap(),
            channel: Channel::bac(info::BacParams { eps1: 0.3, eps2: 0.3 }).unwrap(),
        };
        let r = analyze(
            &m,
            &p,
            &BranchSelector::Principal,
            &stats,
            &SelectOptions::default(),
            Some(&compare),
        )
        .unwrap();
        assert!(r["equilibrium"]["residual"].as_f64().unwrap() <= 1e-10);
        assert!(r["metrics"]["fisher-total"]["matrix"].is_array());
        assert!(r["statistics"][0]["cone"]["pointed"].is_boolean());
        assert!(r["statistics"][0]["players"][0]["second_order_mismatch"].is_number());
        assert_eq!(r["garbling"]["order"], "MoreInformative");
    }

    #[test]
    fn analyze_at_beta_zero_is_uniform() {
        let m = scenarios::bagwell();
        let p = ParamPoint::new(&m, vec![0.1, 0.1], vec![0.0, 0.0]).unwrap();
        let r = analyze(&m, &p, &BranchSelector::Principal, &[], &SelectOptions::default(), None).unwrap();
        for (_, v) in r["equilibrium"]["profile"].as_object().unwrap() {
            assert_eq!(v.as_f64().unwrap(), 0.5);
        }
    }
}

//! Built-in scenario checks behind `diffvoi scenario`.

use diffvoi::analysis::{self, BranchSelector, SelectOptions};
use diffvoi::geometry;
use diffvoi::info::{self, Channel, GarblingOrder, Units};
use diffvoi::qre::{self, principal_equilibrium, Equilibrium, SolveOptions, TraceOptions};
use diffvoi::scenarios::{self, BraessVariant, ScenarioId};
use diffvoi::sensitivity::{self, gradient_relative_error, Statistic, FD_STEP};
use diffvoi::{Error, Maid, ParamPoint, Result, StrategyProfile};

const GRADIENT_TOL: f64 = 1e-4;

pub struct Options {
    pub theta: Vec<String>,
    pub check_gradients: bool,
    pub seed: u64,
    pub starts: usize,
}

pub struct Check {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

fn check(name: impl Into<String>, expected: impl Into<String>, observed: impl Into<String>, pass: bool) -> Check {
    Check {
        name: name.into(),
        expected: expected.into(),
        observed: observed.into(),
        pass,
    }
}

pub fn render(id: ScenarioId, checks: &[Check]) -> String {
    let w = checks.iter().map(|c| c.name.len()).max().unwrap_or(0).max(5);
    let we = checks.iter().map(|c| c.expected.len()).max().unwrap_or(0).max(8);
    let wo = checks.iter().map(|c| c.observed.len()).max().unwrap_or(0).max(8);
    let mut out = format!("scenario {id}\n");
    out.push_str(&format!(
        "{:<w$}  {:<we$}  {:<wo$}  result\n",
        "check", "expected", "observed"
    ));
    for c in checks {
        out.push_str(&format!(
            "{:<w$}  {:<we$}  {:<wo$}  {}\n",
            c.name,
            c.expected,
            c.observed,
            if c.pass { "PASS" } else { "FAIL" }
        ));
    }
    out
}

fn theta_point(maid: &Maid, theta: &[String], beta: Vec<f64>) -> Result<ParamPoint> {
    let mut t = maid.params.default.clone();
    for s in theta {
        match s.split_once('=') {
            Some((name, v)) => t[maid.params.index_of(name)?] = parse(v)?,
            None => t[0] = parse(s)?,
        }
    }
    ParamPoint::new(maid, t, beta)
}

fn parse(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidOption(format!("`{s}` is not a number")))
}

fn default_beta(maid: &Maid) -> Vec<f64> {
    maid.players.iter().map(|p| p.beta).collect()
}

pub fn run(id: ScenarioId, opts: &Options) -> Result<Vec<Check>> {
    match id {
        ScenarioId::Braess => Ok(braess()),
        ScenarioId::NegUtility => negutility(opts),
        ScenarioId::Blackwell => blackwell(opts),
        ScenarioId::Bagwell => bagwell(opts),
        ScenarioId::Signaling => signaling(opts),
    }
}

fn braess() -> Vec<Check> {
    let no = scenarios::braess_travel_times(BraessVariant::NoHighway).travel_time;
    let open = scenarios::braess_travel_times(BraessVariant::HighwayOpen).travel_time;
    let noisy = scenarios::braess_travel_times(BraessVariant::NoisyPrior);
    let dev = noisy.deviation.unwrap_or(f64::NAN);
    let perfect = scenarios::braess_travel_times(BraessVariant::PerfectSignal).travel_time;
    vec![
        check("no highway", "65", format!("{no}"), no == 65.0),
        check("highway open", "84", format!("{open}"), open == 84.0),
        check(
            "deviation under prior (1 dp)",
            "66.5",
            format!("{dev:.3}"),
            (dev * 10.0).round() / 10.0 == 66.5,
        ),
        check("deviation is worse than 65", "true", format!("{}", dev > no), dev > no),
        check(
            "perfect signal",
            "66.9",
            format!("{perfect}"),
            (perfect - 66.9).abs() < 1e-12,
        ),
        check(
            "signal cost per driver",
            "1.9",
            format!("{:.12}", perfect - noisy.travel_time),
            (perfect - noisy.travel_time - 1.9).abs() < 1e-12,
        ),
    ]
}

fn negutility(opts: &Options) -> Result<Vec<Check>> {
    let maid = scenarios::negutility();
    let point = theta_point(&maid, &opts.theta, vec![200.0, 200.0])?;
    let theta = point.theta[0];
    let nash = scenarios::negutility_nash(theta)?;
    let want = (
        0.25,
        (1.0 - theta) / (2.0 - theta),
        (5.0 - 2.0 * theta) / (2.0 - theta),
        2.5,
    );
    let got = (nash.p_top, nash.p_left, nash.v_row, nash.v_col);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let mut checks = vec![check(
        "nash (p_T, p_L, V_row, V_col)",
        format!("({}, {}, {}, {})", want.0, want.1, want.2, want.3),
        format!("({}, {}, {}, {})", got.0, got.1, got.2, got.3),
        close(got.0, want.0) && close(got.1, want.1) && close(got.2, want.2) && close(got.3, want.3),
    )];
    let e = principal_equilibrium(&maid, &point, &TraceOptions::default())?;
    let cols = qre::sigma_column_names(&maid);
    let flat = e.profile.flat();
    let col = |name: &str| cols.iter().position(|c| c == name).map(|i| flat[i]).unwrap_or(f64::NAN);
    let dist = (col("sigma[Row][T]") - nash.p_top)
        .abs()
        .max((col("sigma[Col][L]") - nash.p_left).abs());
    checks.push(check(
        "QRE at beta=200 vs Nash (Linf)",
        "< 0.02",
        format!("{dist:.4}"),
        dist < 0.02,
    ));
    let dv = sensitivity::value_gradient(&maid, &e, 0)?[0];
    checks.push(check(
        "dV_row/dtheta at beta=200 is positive",
        format!("{:.4}", nash.dv_row_dtheta),
        format!("{dv:.4}"),
        dv > 0.0,
    ));
    if opts.check_gradients {
        checks.extend(gradient_checks(&maid, &e, &[Statistic::Value(0), Statistic::Value(1)])?);
    }
    Ok(checks)
}

fn uniform_at_zero(maid: &Maid) -> Result<Check> {
    let p = ParamPoint::new(maid, maid.params.default.clone(), vec![0.0; maid.players.len()])?;
    let e = qre::solve(maid, &p, &StrategyProfile::uniform(maid), &SolveOptions::default())?;
    let dev = e.profile.distance(&StrategyProfile::uniform(maid));
    Ok(check(
        "beta=0 gives uniform play",
        "0",
        format!("{dev:.1e}"),
        dev <= 1e-12,
    ))
}

fn residual_check(e: &Equilibrium) -> Check {
    check(
        "equilibrium residual",
        "<= 1e-10",
        format!("{:.1e}", e.residual_norm),
        e.residual_norm <= 1e-10,
    )
}

fn gradient_checks(maid: &Maid, e: &Equilibrium, stats: &[Statistic]) -> Result<Vec<Check>> {
    stats
        .iter()
        .map(|s| {
            let a = sensitivity::statistic_gradient(maid, e, s)?;
            let fd = sensitivity::fd_gradient(maid, e, s, FD_STEP)?;
            let err = gradient_relative_error(&a, &fd);
            Ok(check(
                format!("gradient of {s:?} vs finite differences"),
                format!("< {GRADIENT_TOL:e}"),
                format!("{err:.1e}"),
                err < GRADIENT_TOL,
            ))
        })
        .collect()
}

fn blackwell(opts: &Options) -> Result<Vec<Check>> {
    let maid = scenarios::blackwell();
    let point = theta_point(&maid, &opts.theta, default_beta(&maid))?;
    let x = maid.node_index("X")?;
    let s = maid.node_index("S")?;
    let mut checks = vec![uniform_at_zero(&maid)?];
    let e = principal_equilibrium(&maid, &point, &TraceOptions::default())?;
    checks.push(residual_check(&e));
    let mi = Statistic::MutualInformation {
        a: vec![x],
        b: vec![s],
        units: Units::Bits,
    };
    let gv = sensitivity::value_gradient(&maid, &e, 0)?;
    let gf = sensitivity::statistic_gradient(&maid, &e, &mi)?;
    let neg = geometry::negative_value_direction(&gv, &gf)?;
    checks.push(check(
        "negative value of I(X;S) direction exists",
        "true",
        format!("{}", neg.is_some()),
        neg.is_some(),
    ));
    let here = Channel::from_node(&maid, s, &point.theta)?;
    let noise = Channel::new(vec![vec![0.9, 0.1], vec![0.1, 0.9]])?;
    let order = info::garbling_order(&here, &here.compose(&noise)?)?;
    checks.push(check(
        "channel vs its garbling",
        "MoreInformative",
        format!("{order:?}"),
        order == GarblingOrder::MoreInformative,
    ));
    if opts.check_gradients {
        let cap = Statistic::Capacity {
            node: s,
            units: Units::Bits,
        };
        checks.extend(gradient_checks(&maid, &e, &[Statistic::Value(0), mi, cap])?);
    }
    Ok(checks)
}

fn bagwell(opts: &Options) -> Result<Vec<Check>> {
    let sym = scenarios::bagwell_symmetric();
    let solve = SolveOptions {
        seed: opts.seed,
        ..SolveOptions::default()
    };
    let mut checks = Vec::new();
    for (beta, want_exact) in [(1.0, true), (10.0, false)] {
        let p = ParamPoint::new(&sym, vec![0.05], vec![beta, beta])?;
        let n = qre::enumerate_equilibria(&sym, &p, opts.starts, &solve)?.len();
        let (expected, pass) = if want_exact { ("1", n == 1) } else { (">= 3", n >= 3) };
        checks.push(check(
            format!("equilibria at eps=0.05, beta={beta}"),
            expected,
            format!("{n}"),
            pass,
        ));
    }
    let maid = scenarios::bagwell();
    let point = theta_point(&maid, &opts.theta, default_beta(&maid))?;
    let select = SelectOptions {
        n_starts: opts.starts,
        seed: opts.seed,
        ..SelectOptions::default()
    };
    let resolver =
        analysis::BranchResolver::new(&maid, BranchSelector::Label("stackelberg".into()), &point.beta, select)?;
    let e = resolver.resolve(&point)?;
    checks.push(residual_check(&e));
    let s = maid.node_index("S")?;
    let cap = Statistic::Capacity {
        node: s,
        units: Units::Bits,
    };
    let gvs = vec![
        sensitivity::value_gradient(&maid, &e, 0)?,
        sensitivity::value_gradient(&maid, &e, 1)?,
    ];
    let gc = sensitivity::statistic_gradient(&maid, &e, &cap)?;
    let w = geometry::pareto_negative_direction(&gvs, &gc)?;
    checks.push(check(
        "stackelberg branch: Pareto-negative capacity direction",
        "true",
        format!("{}", w.is_some()),
        w.is_some(),
    ));
    if opts.check_gradients {
        checks.extend(gradient_checks(
            &maid,
            &e,
            &[Statistic::Value(0), Statistic::Value(1), cap],
        )?);
    }
    Ok(checks)
}

fn signaling(opts: &Options) -> Result<Vec<Check>> {
    let maid = scenarios::signaling();
    let point = theta_point(&maid, &opts.theta, default_beta(&maid))?;
    let mut checks = vec![uniform_at_zero(&maid)?];
    let e = principal_equilibrium(&maid, &point, &TraceOptions::default())?;
    checks.push(residual_check(&e));
    if opts.check_gradients {
        let t = maid.node_index("T")?;
        let s = maid.node_index("S")?;
        let mi = Statistic::MutualInformation {
            a: vec![t],
            b: vec![s],
            units: Units::Bits,
        };
        checks.extend(gradient_checks(
            &maid,
            &e,
            &[Statistic::Value(0), Statistic::Value(1), mi],
        )?);
    }
    Ok(checks)
}

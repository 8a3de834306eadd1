//! First-order sensitivities of equilibria and of scalar functionals of the
//! equilibrium joint distribution, by implicit differentiation, plus a
//! finite-difference oracle that re-solves along the branch.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::inference::{Evaluator, JointTable};
use crate::info::{self, BacParams, Channel, Units};
use crate::maid::{Maid, ParamPoint, StrategyProfile};
use crate::qre::{self, condition_number, evaluate_system, Equilibrium, Layout, SolveOptions, SINGULAR_CONDITION};

/// Default relative finite-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Largest L∞ profile change tolerated between θ and θ ± h.
pub const BRANCH_JUMP_GUARD: f64 = 0.1;
const CAPACITY_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    /// n_sigma × d, rows in profile order.
    pub dsigma_dtheta: DMatrix<f64>,
    /// n_z × d, derivatives of the scaled normalizers.
    pub dz_dtheta: DMatrix<f64>,
    pub jacobian_condition: f64,
}

impl SensitivityReport {
    /// ∂σ/∂θ as one row per strategy coordinate.
    pub fn dsigma_rows(&self) -> Vec<Vec<f64>> {
        self.dsigma_dtheta
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

/// ∂(residual)/∂(σ, z) at the equilibrium.
pub fn equilibrium_jacobian(maid: &Maid, e: &Equilibrium) -> DMatrix<f64> {
    let ev = Evaluator::new(maid, &e.point.theta);
    let layout = Layout::new(maid);
    evaluate_system(&ev, &layout, &e.point.beta, &e.profile, &e.z, &e.z_shift, true)
        .jac
        .expect("jacobian requested")
}

/// d(σ, z)/dθ = −J⁻¹ ∂f/∂θ.
pub fn strategy_derivatives(maid: &Maid, e: &Equilibrium) -> Result<SensitivityReport> {
    let ev = Evaluator::new(maid, &e.point.theta);
    let layout = Layout::new(maid);
    let s = evaluate_system(&ev, &layout, &e.point.beta, &e.profile, &e.z, &e.z_shift, true);
    let jac = s.jac.unwrap();
    let cond = condition_number(&jac);
    if cond > SINGULAR_CONDITION {
        return Err(Error::SingularJacobian(cond));
    }
    let rhs = -s.jac_theta.unwrap();
    let sol = jac.lu().solve(&rhs).ok_or(Error::SingularJacobian(cond))?;
    let ns = layout.n_sigma;
    Ok(SensitivityReport {
        dsigma_dtheta: sol.rows(0, ns).into_owned(),
        dz_dtheta: sol.rows(ns, layout.n_z).into_owned(),
        jacobian_condition: cond,
    })
}

/// ∂p(x)/∂θ for every joint state when the profile moves with dσ/dθ.
fn joint_derivative(ev: &Evaluator, phi: &[f64], dsigma: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dphi = ev.factor_theta_jacobian(Some(dsigma));
    ev.joint_theta_derivative(phi, &dphi)
}

/// ∂V_i/∂θ at `profile` when the profile moves with the supplied dσ/dθ rows.
pub fn value_gradient_with(
    maid: &Maid,
    point: &ParamPoint,
    profile: &StrategyProfile,
    dsigma: &[Vec<f64>],
    player: usize,
) -> Result<Vec<f64>> {
    if player >= maid.players.len() {
        return Err(Error::UnknownPlayer(format!("#{player}")));
    }
    profile.validate(maid)?;
    maid.check_point(point)?;
    let n_sigma: usize = profile.tables.iter().map(Vec::len).sum();
    if dsigma.len() != n_sigma || dsigma.iter().any(|r| r.len() != point.theta.len()) {
        return Err(Error::DimensionMismatch("dsigma must be n_sigma × d".into()));
    }
    let ev = Evaluator::new(maid, &point.theta);
    let phi = ev.factors(profile);
    Ok(value_gradient_inner(&ev, &phi, dsigma, player))
}

fn value_gradient_inner(ev: &Evaluator, phi: &[f64], dsigma: &[Vec<f64>], player: usize) -> Vec<f64> {
    let d = ev.dim();
    let dp = joint_derivative(ev, phi, dsigma);
    let j = ev.joint_from_factors(phi);
    let u = ev.utility(player);
    let mut g = vec![0.0; d];
    for (x, dpx) in dp.iter().enumerate() {
        for k in 0..d {
            g[k] += u[x] * dpx[k];
        }
    }
    if let Some(du) = ev.utility_theta(player) {
        for (x, dux) in du.iter().enumerate() {
            for k in 0..d {
                g[k] += j.probs[x] * dux[k];
            }
        }
    }
    g
}

/// ∂V_i/∂θ along the equilibrium branch.
pub fn value_gradient(maid: &Maid, e: &Equilibrium, player: usize) -> Result<Vec<f64>> {
    statistic_gradient(maid, e, &Statistic::Value(player))
}

/// Custom functional of the joint table: returns its value and its gradient
/// with respect to every table entry.
pub type TableFunctional = Arc<dyn Fn(&JointTable) -> (f64, Vec<f64>) + Send + Sync>;

/// Scalar functional of an equilibrium.
#[derive(Clone)]
pub enum Statistic {
    /// Expected utility of a player.
    Value(usize),
    /// I(A;B) between two disjoint node sets.
    MutualInformation {
        a: Vec<usize>,
        b: Vec<usize>,
        units: Units,
    },
    /// Capacity of a single-parent chance node's CPD read as a channel.
    Capacity {
        node: usize,
        units: Units,
    },
    Custom(TableFunctional),
}

impl fmt::Debug for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::Value(i) => write!(f, "Value({i})"),
            Statistic::MutualInformation { a, b, units } => {
                write!(f, "MutualInformation({a:?}; {b:?}, {})", units.name())
            }
            Statistic::Capacity { node, units } => write!(f, "Capacity({node}, {})", units.name()),
            Statistic::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Statistic {
    /// Capacity statistics depend on θ only, never on the profile.
    fn check(&self, maid: &Maid) -> Result<()> {
        match self {
            Statistic::Value(i) if *i >= maid.players.len() => Err(Error::UnknownPlayer(format!("#{i}"))),
            Statistic::MutualInformation { a, b, .. } => {
                if a.is_empty() || b.is_empty() {
                    return Err(Error::InvalidOption(
                        "mutual information needs two nonempty sets".into(),
                    ));
                }
                if a.iter().any(|x| b.contains(x)) {
                    return Err(Error::OverlappingSets);
                }
                if a.iter().chain(b).any(|&v| v >= maid.nodes.len()) {
                    return Err(Error::UnknownNode("node index out of range".into()));
                }
                Ok(())
            }
            Statistic::Capacity { node, .. } => {
                let n = maid
                    .nodes
                    .get(*node)
                    .ok_or_else(|| Error::UnknownNode(format!("#{node}")))?;
                if n.is_decision() || n.parents.len() != 1 {
                    return Err(Error::InvalidGame(format!(
                        "`{}` is not a chance node with a single parent",
                        n.name
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Capacity value and ∂C/∂(CPD entries) in nats.
fn capacity_parts(c: &Channel) -> Result<(f64, Vec<Vec<f64>>)> {
    if c.n_inputs() == 2 && c.n_outputs() == 2 {
        let b = BacParams {
            eps1: c.rows()[0][1],
            eps2: c.rows()[1][0],
        };
        let value = info::bac_capacity(b)?;
        let [ga, gb] = info::bac_capacity_gradient(b)?;
        // W01 = a, W00 = 1 − a; W10 = b, W11 = 1 − b. Only the free entries carry the gradient.
        return Ok((value, vec![vec![0.0, ga], vec![gb, 0.0]]));
    }
    let res = info::capacity_numeric(c, CAPACITY_TOL)?;
    Ok((res.capacity, info::capacity_channel_gradient(c, CAPACITY_TOL)?))
}

/// Value of a statistic at an arbitrary profile.
pub fn statistic_at(maid: &Maid, point: &ParamPoint, profile: &StrategyProfile, stat: &Statistic) -> Result<f64> {
    stat.check(maid)?;
    let ev = Evaluator::new(maid, &point.theta);
    let phi = ev.factors(profile);
    match stat {
        Statistic::Value(i) => Ok(ev.expected_utility_from_factors(&phi, *i)),
        Statistic::MutualInformation { a, b, units } => {
            let j = ev.joint_from_factors(&phi);
            Ok(units.from_nats(info::mutual_information(&j, a, b)?))
        }
        Statistic::Capacity { node, units } => {
            let c = Channel::from_node(maid, *node, &point.theta)?;
            Ok(units.from_nats(capacity_parts(&c)?.0))
        }
        Statistic::Custom(f) => Ok(f(&ev.joint_from_factors(&phi)).0),
    }
}

/// Value of a statistic at an equilibrium.
pub fn statistic_value(maid: &Maid, e: &Equilibrium, stat: &Statistic) -> Result<f64> {
    statistic_at(maid, &e.point, &e.profile, stat)
}

/// Gradient of a statistic at `profile` when the profile moves with dσ/dθ.
pub fn statistic_gradient_with(
    maid: &Maid,
    point: &ParamPoint,
    profile: &StrategyProfile,
    dsigma: &[Vec<f64>],
    stat: &Statistic,
) -> Result<Vec<f64>> {
    stat.check(maid)?;
    let ev = Evaluator::new(maid, &point.theta);
    let phi = ev.factors(profile);
    let d = ev.dim();
    let through_table = |table_grad: &[f64]| -> Vec<f64> {
        let dp = joint_derivative(&ev, &phi, dsigma);
        let mut g = vec![0.0; d];
        for (x, dpx) in dp.iter().enumerate() {
            if table_grad[x] != 0.0 {
                for k in 0..d {
                    g[k] += table_grad[x] * dpx[k];
                }
            }
        }
        g
    };
    match stat {
        Statistic::Value(i) => Ok(value_gradient_inner(&ev, &phi, dsigma, *i)),
        Statistic::MutualInformation { a, b, units } => {
            let j = ev.joint_from_factors(&phi);
            let tg = info::mutual_information_table_gradient(&j, a, b)?;
            Ok(through_table(&tg).into_iter().map(|x| units.from_nats(x)).collect())
        }
        Statistic::Capacity { node, units } => {
            let c = Channel::from_node(maid, *node, &point.theta)?;
            let (_, gw) = capacity_parts(&c)?;
            let cpd = maid.cpd_table(*node, &point.theta);
            let n = c.n_outputs();
            let mut g = vec![0.0; d];
            for (e, entry) in cpd.iter().enumerate() {
                let w = gw[e / n][e % n];
                if w != 0.0 {
                    for (gk, dk) in g.iter_mut().zip(&entry.grad) {
                        *gk += w * dk;
                    }
                }
            }
            Ok(g.into_iter().map(|x| units.from_nats(x)).collect())
        }
        Statistic::Custom(f) => {
            let (_, tg) = f(&ev.joint_from_factors(&phi));
            if tg.len() != ev.joint_size() {
                return Err(Error::DimensionMismatch(format!(
                    "table gradient has {} entries, joint has {}",
                    tg.len(),
                    ev.joint_size()
                )));
            }
            Ok(through_table(&tg))
        }
    }
}

/// Gradient of a statistic along the equilibrium branch.
pub fn statistic_gradient(maid: &Maid, e: &Equilibrium, stat: &Statistic) -> Result<Vec<f64>> {
    stat.check(maid)?;
    let rep = strategy_derivatives(maid, e)?;
    statistic_gradient_with(maid, &e.point, &e.profile, &rep.dsigma_rows(), stat)
}

/// Central finite differences of a statistic along the branch: the
/// equilibrium is re-solved at θ ± h·max(1, |θ_k|) by Newton warm-started at
/// `e`'s profile (falling back to the damped fixed point from the same
/// start).
pub fn fd_gradient(maid: &Maid, e: &Equilibrium, stat: &Statistic, h: f64) -> Result<Vec<f64>> {
    stat.check(maid)?;
    if !(h > 0.0) {
        return Err(Error::InvalidOption("step must be positive".into()));
    }
    let opts = SolveOptions {
        tol: 1e-12,
        ..SolveOptions::default()
    };
    let d = e.point.theta.len();
    let mut g = vec![0.0; d];
    for (k, gk) in g.iter_mut().enumerate() {
        let hk = h * e.point.theta[k].abs().max(1.0);
        let mut vals = [0.0; 2];
        for (slot, sign) in [(0, 1.0), (1, -1.0)] {
            let p = e.point.with_theta(k, e.point.theta[k] + sign * hk);
            maid.check_point(&p)?;
            let moved =
                qre::newton_solve(maid, &p, &e.profile, &opts).or_else(|_| qre::solve(maid, &p, &e.profile, &opts))?;
            let dist = moved.profile.distance(&e.profile);
            if dist >= BRANCH_JUMP_GUARD {
                return Err(Error::BranchJump(dist));
            }
            vals[slot] = statistic_value(maid, &moved, stat)?;
        }
        *gk = (vals[0] - vals[1]) / (2.0 * hk);
    }
    Ok(g)
}

/// Gradient scale below which [`gradient_relative_error`] compares on an
/// absolute footing: central differences at [`FD_STEP`] carry roundoff of
/// order 1e-10 times the statistic, so smaller gradients are not resolvable.
pub const GRADIENT_ABS_FLOOR: f64 = 1e-5;

/// Largest componentwise relative difference between two gradients.
/// Components smaller than 1e-3 of the larger gradient's max norm (or than
/// [`GRADIENT_ABS_FLOOR`]) are measured against that scale instead of their
/// own magnitude.
pub fn gradient_relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let scale = analytic.iter().chain(reference).fold(0.0_f64, |m, x| m.max(x.abs()));
    let floor = (1e-3 * scale).max(GRADIENT_ABS_FLOOR);
    analytic
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maid::parse_maid;
    use crate::qre::{solve, SolveOptions};
    use crate::scenarios;

    fn logistic(theta: f64, beta: f64) -> (Maid, Equilibrium) {
        let m = parse_maid(
            r#"{
            "theta": [{"name": "theta", "min": -2, "max": 2, "default": 1}],
            "players": [{"id": "p", "beta": 2}],
            "nodes": [{"id": "A", "kind": "decision", "player": "p", "states": ["0", "1"]}],
            "edges": [],
            "utilities": [{"player": "p", "scope": ["A"], "table": [0, "theta"]}]
        }"#,
        )
        .unwrap();
        let p = ParamPoint::new(&m, vec![theta], vec![beta]).unwrap();
        let e = solve(&m, &p, &StrategyProfile::uniform(&m), &SolveOptions::default()).unwrap();
        (m, e)
    }

    fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1e-4))
    }

    #[test]
    fn logistic_strategy_derivative() {
        let (m, e) = logistic(1.0, 2.0);
        let rep = strategy_derivatives(&m, &e).unwrap();
        let s1 = e.profile.tables[0][1];
        assert!((rep.dsigma_dtheta[(1, 0)] - 2.0 * s1 * (1.0 - s1)).abs() < 1e-12);
        assert!((rep.dsigma_dtheta[(1, 0)] - 0.2100).abs() < 1e-4);
        assert!((rep.dsigma_dtheta[(0, 0)] + rep.dsigma_dtheta[(1, 0)]).abs() < 1e-14);
    }

    #[test]
    fn logistic_jacobian_closed_form() {
        // σ_a − e^{βθa − s}/z rows; with one row, J = [[I, w/z²], [−βw ∂E, 1]] and ∂E/∂σ = 0.
        let (m, e) = logistic(0.5, 2.0);
        let j = equilibrium_jacobian(&m, &e);
        assert_eq!(j.shape(), (3, 3));
        assert_eq!(j[(0, 0)], 1.0);
        assert_eq!(j[(0, 1)], 0.0);
        assert_eq!(j[(2, 2)], 1.0);
        let w0 = (-e.z_shift[0]).exp();
        assert!((j[(0, 2)] - w0 / (e.z[0] * e.z[0])).abs() < 1e-15);
    }

    #[test]
    fn beta_zero_jacobian_identity_on_sigma() {
        let m = scenarios::bagwell();
        let mut p = m.default_point();
        p.beta = vec![0.0, 0.0];
        let e = solve(&m, &p, &StrategyProfile::uniform(&m), &SolveOptions::default()).unwrap();
        let j = equilibrium_jacobian(&m, &e);
        for r in 0..6 {
            for c in 0..6 {
                assert_eq!(j[(r, c)], if r == c { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn logistic_value_gradient_at_zero() {
        let (m, e) = logistic(0.0, 3.0);
        let g = value_gradient(&m, &e, 0).unwrap();
        // V = θ σ(1), dV/dθ = σ(1) + θ σ' = 1/2.
        assert!((g[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fd_matches_logistic_closed_form() {
        let (m, e) = logistic(1.0, 2.0);
        let s1 = e.profile.tables[0][1];
        let custom: TableFunctional = Arc::new(|j: &JointTable| (j.probs[1], vec![0.0, 1.0]));
        let fd = fd_gradient(&m, &e, &Statistic::Custom(custom.clone()), 1e-5).unwrap();
        assert!((fd[0] - 2.0 * s1 * (1.0 - s1)).abs() < 1e-8);
        let an = statistic_gradient(&m, &e, &Statistic::Custom(custom)).unwrap();
        assert!((an[0] - fd[0]).abs() < 1e-8);
    }

    #[test]
    fn negutility_frozen_nash_profile() {
        let m = scenarios::negutility();
        for theta in [0.0, 0.25, 0.5] {
            let nash = scenarios::negutility_nash(theta).unwrap();
            let p = ParamPoint::new(&m, vec![theta], vec![10.0, 10.0]).unwrap();
            let prof = StrategyProfile {
                tables: vec![vec![nash.p_top, 1.0 - nash.p_top], vec![nash.p_left, 1.0 - nash.p_left]],
            };
            let dl = -1.0 / ((2.0 - theta) * (2.0 - theta));
            let ds = vec![vec![0.0], vec![0.0], vec![dl], vec![-dl]];
            let g = value_gradient_with(&m, &p, &prof, &ds, 0).unwrap();
            assert!((g[0] - nash.dv_row_dtheta).abs() < 1e-12);
        }
    }

    #[test]
    fn value_statistic_consistent_and_linear() {
        let m = scenarios::bagwell();
        let p = ParamPoint::new(&m, vec![0.1, 0.15], vec![3.0, 3.0]).unwrap();
        let e = solve(&m, &p, &StrategyProfile::uniform(&m), &SolveOptions::default()).unwrap();
        let g0 = value_gradient(&m, &e, 0).unwrap();
        let g1 = value_gradient(&m, &e, 1).unwrap();
        let sum: TableFunctional = {
            let ev = Evaluator::new(&m, &p.theta);
            let u: Vec<f64> = (0..ev.joint_size())
                .map(|x| ev.utility(0)[x] + ev.utility(1)[x])
                .collect();
            Arc::new(move |j: &JointTable| (j.probs.iter().zip(&u).map(|(p, u)| p * u).sum(), u.clone()))
        };
        let gs = statistic_gradient(&m, &e, &Statistic::Custom(sum)).unwrap();
        for k in 0..2 {
            assert!((gs[k] - g0[k] - g1[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn blackwell_gradients_match_fd() {
        let m = scenarios::blackwell();
        let p = ParamPoint::new(&m, vec![0.25, 0.25], vec![5.0]).unwrap();
        let e = solve(&m, &p, &StrategyProfile::uniform(&m), &SolveOptions::default()).unwrap();
        let (x, s) = (m.node_index("X").unwrap(), m.node_index("S").unwrap());
        for stat in [
            Statistic::Value(0),
            Statistic::MutualInformation {
                a: vec![x],
                b: vec![s],
                units: Units::Bits,
            },
            Statistic::Capacity {
                node: s,
                units: Units::Nats,
            },
        ] {
            let an = statistic_gradient(&m, &e, &stat).unwrap();
            let fd = fd_gradient(&m, &e, &stat, FD_STEP).unwrap();
            assert!(rel_close(&an, &fd, 1e-4), "{stat:?}: {an:?} vs {fd:?}");
        }
    }

    #[test]
    fn blackwell_strategy_derivatives_match_fd() {
        let m = scenarios::blackwell();
        let p = ParamPoint::new(&m, vec![0.1, 0.2], vec![5.0]).unwrap();
        let e = solve(&m, &p, &StrategyProfile::uniform(&m), &SolveOptions::default()).unwrap();
        let rep = strategy_derivatives(&m, &e).unwrap();
        let opts = SolveOptions {
            tol: 1e-12,
            ..SolveOptions::default()
        };
        for k in 0..2 {
            let h = 1e-6;
            let ep = qre::newton_solve(&m, &p.with_theta(k, p.theta[k] + h), &e.profile, &opts).unwrap();
            let em = qre::newton_solve(&m, &p.with_theta(k, p.theta[k] - h), &e.profile, &opts).unwrap();
            let (fp, fm) = (ep.profile.flat(), em.profile.flat());
            for r in 0..fp.len() {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                let an = rep.dsigma_dtheta[(r, k)];
                assert!((fd - an).abs() <= 1e-4 * fd.abs().max(1e-3), "{r},{k}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn irrelevant_parameter_has_zero_derivative() {
        let m = parse_maid(
            r#"{
            "theta": [{"name": "u", "min": 0, "max": 2, "default": 1},
                      {"name": "q", "min": 0.1, "max": 0.9, "default": 0.3}],
            "players": [{"id": "p", "beta": 2}],
            "nodes": [{"id": "C", "kind": "chance", "states": ["0", "1"], "cpd": [["q", "_"]]},
                      {"id": "A", "kind": "decision", "player": "p", "states": ["0", "1"]}],
            "edges": [],
            "utilities": [{"player": "p", "scope": ["A"], "table": [0, "u"]}]
        }"#,
        )
        .unwrap();
        let e = solve(
            &m,
            &m.default_point(),
            &StrategyProfile::uniform(&m),
            &SolveOptions::default(),
        )
        .unwrap();
        let rep = strategy_derivatives(&m, &e).unwrap();
        for r in 0..2 {
            assert_eq!(rep.dsigma_dtheta[(r, 1)], 0.0);
        }
    }

    #[test]
    fn large_step_reports_branch_jump() {
        let m = scenarios::bagwell();
        let p = m.default_point();
        let eqs = qre::enumerate_equilibria(&m, &p, 64, &SolveOptions::default()).unwrap();
        assert_eq!(eqs.len(), 3);
        // The middle equilibrium is unstable: a re-solve that misses it falls
        // onto a neighbouring branch.
        let mid = &eqs[1];
        assert!(fd_gradient(&m, mid, &Statistic::Value(0), 1e-3).is_ok());
        let r = fd_gradient(&m, mid, &Statistic::Value(0), 0.04);
        assert!(
            matches!(r, Err(Error::BranchJump(d)) if d >= BRANCH_JUMP_GUARD),
            "{r:?}"
        );
    }
}

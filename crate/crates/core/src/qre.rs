//! Logit quantal response equilibria.
//!
//! The equilibrium conditions are solved as the joint system in (σ, Z):
//!
//! ```text
//! σ(a|x_pa) − exp(β E(u|a, x_pa)) / Z(x_pa) = 0
//! Z(x_pa)   − Σ_a exp(β E(u|a, x_pa))      = 0
//! ```
//!
//! Internally every normalizer row r carries a fixed log-offset `s_r`, so the
//! stored unknown is `z_r = Z_r · exp(−s_r)` and the exponentials are
//! `exp(β E − s_r)`. The offset is a constant per solve, which keeps the
//! system (and its Jacobian in σ) identical up to a diagonal rescaling of the
//! Z block while avoiding overflow at large β.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::Evaluator;
use crate::maid::{Maid, NodeKind, ParamPoint, StrategyProfile};

/// Condition number above which the equilibrium Jacobian is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;
/// Profiles closer than this (L∞) are the same equilibrium.
pub const DEDUP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    /// Fixed-point iterations.
    pub max_iter: usize,
    pub damping: f64,
    pub newton_polish: bool,
    pub seed: u64,
    pub newton_max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 5000,
            damping: 0.5,
            newton_polish: true,
            seed: 0,
            newton_max_iter: 60,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidOption("tol must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidOption("damping must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// One point on one QRE branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub profile: StrategyProfile,
    /// Scaled normalizers, one per (decision node, parent configuration).
    pub z: Vec<f64>,
    /// Log-offsets: the normalizer of row r is `z[r] * exp(z_shift[r])`.
    pub z_shift: Vec<f64>,
    pub point: ParamPoint,
    pub residual_norm: f64,
}

impl Equilibrium {
    /// ln Z per row, free of overflow.
    pub fn log_normalizers(&self) -> Vec<f64> {
        self.z.iter().zip(&self.z_shift).map(|(z, s)| z.ln() + s).collect()
    }

    /// Unknown vector (σ, z).
    pub fn unknowns(&self) -> Vec<f64> {
        let mut y = self.profile.flat();
        y.extend_from_slice(&self.z);
        y
    }
}

/// Positions of the QRE unknowns.
#[derive(Debug, Clone)]
pub struct Layout {
    pub blocks: Vec<Block>,
    pub n_sigma: usize,
    pub n_z: usize,
}

#[derive(Debug, Clone)]
pub struct Block {
    pub node: usize,
    pub player: usize,
    pub n_actions: usize,
    pub n_configs: usize,
    pub sigma_offset: usize,
    pub z_offset: usize,
}

impl Layout {
    pub fn new(maid: &Maid) -> Self {
        let mut blocks = Vec::new();
        let (mut so, mut zo) = (0, 0);
        for v in maid.decision_nodes() {
            let NodeKind::Decision(player) = maid.nodes[v].kind else {
                unreachable!()
            };
            let n_actions = maid.nodes[v].states.len();
            let n_configs = maid.parent_configs(v);
            blocks.push(Block {
                node: v,
                player,
                n_actions,
                n_configs,
                sigma_offset: so,
                z_offset: zo,
            });
            so += n_actions * n_configs;
            zo += n_configs;
        }
        Layout {
            blocks,
            n_sigma: so,
            n_z: zo,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_sigma + self.n_z
    }

    /// φ index of every σ coordinate.
    pub fn sigma_factor_index(&self, ev: &Evaluator) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_sigma);
        for b in &self.blocks {
            for e in 0..b.n_actions * b.n_configs {
                out.push(ev.offsets[b.node] + e);
            }
        }
        out
    }
}

/// Which parameter a continuation path moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathAxis {
    Theta(usize),
    Beta(usize),
    /// All players' rationalities set to the same value.
    AllBeta,
}

impl PathAxis {
    pub fn value(&self, p: &ParamPoint) -> f64 {
        match *self {
            PathAxis::Theta(k) => p.theta[k],
            PathAxis::Beta(i) => p.beta[i],
            PathAxis::AllBeta => p.beta.first().copied().unwrap_or(0.0),
        }
    }

    pub fn set(&self, p: &ParamPoint, v: f64) -> ParamPoint {
        let mut q = p.clone();
        match *self {
            PathAxis::Theta(k) => q.theta[k] = v,
            PathAxis::Beta(i) => q.beta[i] = v,
            PathAxis::AllBeta => q.beta.iter_mut().for_each(|b| *b = v),
        }
        q
    }

    pub fn name(&self, maid: &Maid) -> String {
        match *self {
            PathAxis::Theta(k) => maid.params.names[k].clone(),
            PathAxis::Beta(i) => format!("beta_{}", maid.players[i].name),
            PathAxis::AllBeta => "beta".into(),
        }
    }
}

/// Residual and optional Jacobians of the scaled system at one point.
#[derive(Debug, Clone)]
pub struct SystemEval {
    pub residual: Vec<f64>,
    /// ∂f/∂(σ, z), M × M.
    pub jac: Option<DMatrix<f64>>,
    /// ∂f/∂θ, M × d.
    pub jac_theta: Option<DMatrix<f64>>,
    /// ∂f/∂β_i, M × n_players.
    pub jac_beta: Option<DMatrix<f64>>,
    /// Conditional expected utilities, σ order.
    pub cond_utilities: Vec<f64>,
}

/// Evaluate the scaled QRE system at (σ, z) with fixed offsets.
pub fn evaluate_system(
    ev: &Evaluator,
    layout: &Layout,
    beta: &[f64],
    profile: &StrategyProfile,
    z: &[f64],
    shift: &[f64],
    with_jacobians: bool,
) -> SystemEval {
    let m = layout.dim();
    let d = ev.dim();
    let np = beta.len();
    let phi = ev.factors(profile);
    let sigma = profile.flat();
    let sig_phi = layout.sigma_factor_index(ev);
    let mut res = vec![0.0; m];
    let mut cond = vec![0.0; layout.n_sigma];
    let mut jac = with_jacobians.then(|| DMatrix::zeros(m, m));
    let mut jth = with_jacobians.then(|| DMatrix::zeros(m, d));
    let mut jb = with_jacobians.then(|| DMatrix::zeros(m, np));
    let dphi_theta = with_jacobians.then(|| ev.factor_theta_jacobian(None));

    for b in &layout.blocks {
        let cu = ev.cond_utilities(b.node, b.player, &phi, with_jacobians);
        let beta_i = beta[b.player];
        for c in 0..b.n_configs {
            let zr = b.z_offset + c;
            let zrow = layout.n_sigma + zr;
            let zval = z[zr];
            let mut sum_w = 0.0;
            for a in 0..b.n_actions {
                let e = c * b.n_actions + a;
                let srow = b.sigma_offset + e;
                let eu = cu.values[e];
                cond[srow] = eu;
                let w = (beta_i * eu - shift[zr]).exp();
                sum_w += w;
                res[srow] = sigma[srow] - w / zval;
                if let (Some(j), Some(jt), Some(jbeta), Some(dpt)) =
                    (jac.as_mut(), jth.as_mut(), jb.as_mut(), dphi_theta.as_ref())
                {
                    let df = &cu.d_factors[e];
                    // dE/dθ through chance factors and directly through utilities.
                    let mut de_dtheta = cu.d_theta[e].clone();
                    for (idx, g) in df.iter().enumerate() {
                        if *g != 0.0 {
                            for k in 0..d {
                                de_dtheta[k] += g * dpt[idx][k];
                            }
                        }
                    }
                    j[(srow, srow)] += 1.0;
                    j[(srow, layout.n_sigma + zr)] += w / (zval * zval);
                    for (col, &pi) in sig_phi.iter().enumerate() {
                        let g = df[pi];
                        if g != 0.0 {
                            j[(srow, col)] -= w / zval * beta_i * g;
                            j[(zrow, col)] -= w * beta_i * g;
                        }
                    }
                    for k in 0..d {
                        jt[(srow, k)] -= w / zval * beta_i * de_dtheta[k];
                        jt[(zrow, k)] -= w * beta_i * de_dtheta[k];
                    }
                    jbeta[(srow, b.player)] -= w / zval * eu;
                    jbeta[(zrow, b.player)] -= w * eu;
                }
            }
            res[zrow] = zval - sum_w;
            if let Some(j) = jac.as_mut() {
                j[(zrow, zrow)] += 1.0;
            }
        }
    }
    SystemEval {
        residual: res,
        jac,
        jac_theta: jth,
        jac_beta: jb,
        cond_utilities: cond,
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Residual of the unscaled system for true normalizers `z`.
pub fn residual(maid: &Maid, profile: &StrategyProfile, z: &[f64], point: &ParamPoint) -> Result<Vec<f64>> {
    profile.validate(maid)?;
    maid.check_point(point)?;
    let layout = Layout::new(maid);
    if z.len() != layout.n_z {
        return Err(Error::DimensionMismatch(format!(
            "{} normalizers given, {} expected",
            z.len(),
            layout.n_z
        )));
    }
    let ev = Evaluator::new(maid, &point.theta);
    let zero = vec![0.0; layout.n_z];
    Ok(evaluate_system(&ev, &layout, &point.beta, profile, z, &zero, false).residual)
}

/// Logit response to `profile` with canonical offsets: returns (response, z, shift).
fn logit_response(
    ev: &Evaluator,
    layout: &Layout,
    beta: &[f64],
    profile: &StrategyProfile,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let phi = ev.factors(profile);
    let mut br = vec![0.0; layout.n_sigma];
    let mut z = vec![0.0; layout.n_z];
    let mut shift = vec![0.0; layout.n_z];
    for b in &layout.blocks {
        let cu = ev.cond_utilities(b.node, b.player, &phi, false);
        let beta_i = beta[b.player];
        for c in 0..b.n_configs {
            let row = &cu.values[c * b.n_actions..(c + 1) * b.n_actions];
            let s = row.iter().map(|e| beta_i * e).fold(f64::NEG_INFINITY, f64::max);
            let ws: Vec<f64> = row.iter().map(|e| (beta_i * e - s).exp()).collect();
            let sum: f64 = ws.iter().sum();
            for (a, w) in ws.iter().enumerate() {
                br[b.sigma_offset + c * b.n_actions + a] = w / sum;
            }
            z[b.z_offset + c] = sum;
            shift[b.z_offset + c] = s;
        }
    }
    (br, z, shift)
}

/// Build an equilibrium record from a profile: canonical offsets, consistent
/// normalizers, independently evaluated residual.
fn finish(
    maid: &Maid,
    ev: &Evaluator,
    layout: &Layout,
    point: &ParamPoint,
    mut profile: StrategyProfile,
) -> Equilibrium {
    profile.renormalize(maid);
    let (_, z, shift) = logit_response(ev, layout, &point.beta, &profile);
    let r = evaluate_system(ev, layout, &point.beta, &profile, &z, &shift, false);
    Equilibrium {
        profile,
        z,
        z_shift: shift,
        point: point.clone(),
        residual_norm: inf_norm(&r.residual),
    }
}

/// Newton's method on the (σ, z) system with backtracking.
#[allow(clippy::too_many_arguments)]
fn newton(
    maid: &Maid,
    ev: &Evaluator,
    layout: &Layout,
    point: &ParamPoint,
    sigma0: &[f64],
    z0: &[f64],
    shift: &[f64],
    opts: &SolveOptions,
) -> Result<Equilibrium> {
    let ns = layout.n_sigma;
    let mut y: Vec<f64> = sigma0.iter().chain(z0).copied().collect();
    let eval = |y: &[f64], jac: bool| {
        let prof = StrategyProfile::from_flat(maid, &y[..ns]);
        evaluate_system(ev, layout, &point.beta, &prof, &y[ns..], shift, jac)
    };
    let mut cur = eval(&y, true);
    let mut norm = inf_norm(&cur.residual);
    for _ in 0..opts.newton_max_iter {
        if norm <= opts.tol * 0.1 {
            break;
        }
        let jac = cur.jac.take().expect("jacobian requested");
        let rhs = DVector::from_iterator(y.len(), cur.residual.iter().map(|r| -r));
        let step = jac
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|x| x.is_finite()))
            .ok_or_else(|| Error::NonConvergence("singular Newton step".into()))?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            let z_ok = trial[ns..].iter().all(|z| *z > 0.0);
            if z_ok {
                let e = eval(&trial, false);
                let n = inf_norm(&e.residual);
                if n.is_finite() && (n < (1.0 - 1e-4 * t) * norm || t < 1e-3) {
                    y = trial;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-6 {
                return Err(Error::NonConvergence("Newton line search failed".into()));
            }
        }
        cur = eval(&y, true);
        norm = inf_norm(&cur.residual);
    }
    if !(norm <= opts.tol) || y[..ns].iter().any(|s| *s < -opts.tol) {
        return Err(Error::NonConvergence(format!("Newton residual {norm:.3e}")));
    }
    let prof = StrategyProfile::from_flat(maid, &y[..ns].iter().map(|s| s.max(0.0)).collect::<Vec<_>>());
    let eq = finish(maid, ev, layout, point, prof);
    if eq.residual_norm <= opts.tol {
        Ok(eq)
    } else {
        Err(Error::NonConvergence(format!(
            "residual {:.3e} after Newton",
            eq.residual_norm
        )))
    }
}

/// Newton polish started directly from `init`.
pub fn newton_solve(
    maid: &Maid,
    point: &ParamPoint,
    init: &StrategyProfile,
    opts: &SolveOptions,
) -> Result<Equilibrium> {
    opts.validate()?;
    init.validate(maid)?;
    maid.check_point(point)?;
    let ev = Evaluator::new(maid, &point.theta);
    let layout = Layout::new(maid);
    let (_, z, shift) = logit_response(&ev, &layout, &point.beta, init);
    newton(maid, &ev, &layout, point, &init.flat(), &z, &shift, opts)
}

/// Damped fixed-point iteration σ ← (1−λ)σ + λ·BR(σ) followed by Newton polish.
pub fn solve(maid: &Maid, point: &ParamPoint, init: &StrategyProfile, opts: &SolveOptions) -> Result<Equilibrium> {
    opts.validate()?;
    init.validate(maid)?;
    maid.check_point(point)?;
    let ev = Evaluator::new(maid, &point.theta);
    let layout = Layout::new(maid);
    let mut profile = init.clone();
    profile.renormalize(maid);
    let mut lambda = opts.damping;
    let mut prev = f64::INFINITY;
    let mut best = (f64::INFINITY, profile.clone());
    let mut next_polish = 1e-3;
    let mut last_err = None;
    for it in 0..opts.max_iter {
        let (br, z, shift) = logit_response(&ev, &layout, &point.beta, &profile);
        let sigma = profile.flat();
        let res = sigma.iter().zip(&br).fold(0.0_f64, |m, (s, b)| m.max((s - b).abs()));
        if res < best.0 {
            best = (res, profile.clone());
        }
        if res <= opts.tol * 0.1 {
            let eq = finish(maid, &ev, &layout, point, profile.clone());
            if eq.residual_norm <= opts.tol {
                return Ok(eq);
            }
        }
        if opts.newton_polish && (res < next_polish || (it + 1) % 500 == 0) {
            next_polish = res * 1e-2;
            match newton(maid, &ev, &layout, point, &sigma, &z, &shift, opts) {
                Ok(eq) => return Ok(eq),
                Err(e) => last_err = Some(e),
            }
        }
        if res > prev {
            lambda = (lambda * 0.5).max(1e-3);
        }
        prev = res;
        let next: Vec<f64> = sigma
            .iter()
            .zip(&br)
            .map(|(s, b)| (1.0 - lambda) * s + lambda * b)
            .collect();
        profile = StrategyProfile::from_flat(maid, &next);
        profile.renormalize(maid);
    }
    if opts.newton_polish {
        let (_, z, shift) = logit_response(&ev, &layout, &point.beta, &best.1);
        if let Ok(eq) = newton(maid, &ev, &layout, point, &best.1.flat(), &z, &shift, opts) {
            return Ok(eq);
        }
    }
    Err(Error::NonConvergence(format!(
        "fixed-point residual {:.3e} after {} iterations{}",
        best.0,
        opts.max_iter,
        last_err.map(|e| format!(" (last polish: {e})")).unwrap_or_default()
    )))
}

/// Random interior profile. Each row is a softmax of uniform logits whose
/// spread is drawn per profile, so starts range from near-uniform to
/// near-pure.
pub fn random_profile(maid: &Maid, rng: &mut impl Rng) -> StrategyProfile {
    const SPREADS: [f64; 4] = [0.5, 2.0, 5.0, 10.0];
    let spread = SPREADS[rng.gen_range(0..SPREADS.len())];
    let mut p = StrategyProfile::uniform(maid);
    for (t, &v) in p.tables.iter_mut().zip(&maid.decision_nodes()) {
        let n = maid.nodes[v].states.len();
        for row in t.chunks_mut(n) {
            for x in row.iter_mut() {
                *x = spread * (2.0 * rng.gen::<f64>() - 1.0);
            }
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.iter_mut().for_each(|x| *x = (*x - max).exp());
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
    }
    p
}

fn lexicographic(a: &StrategyProfile, b: &StrategyProfile) -> std::cmp::Ordering {
    a.flat()
        .iter()
        .zip(b.flat().iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Multi-start search for coexisting equilibria.
///
/// Each seeded interior start is solved twice, once by the damped fixed point
/// (which settles on stable equilibria) and once by Newton directly (which
/// also reaches unstable ones). Results are deduplicated in L∞ and sorted
/// lexicographically by profile.
pub fn enumerate_equilibria(
    maid: &Maid,
    point: &ParamPoint,
    n_starts: usize,
    opts: &SolveOptions,
) -> Result<Vec<Equilibrium>> {
    if n_starts == 0 {
        return Err(Error::InvalidOption("n_starts must be at least 1".into()));
    }
    opts.validate()?;
    maid.check_point(point)?;
    let found: Vec<Equilibrium> = (0..n_starts)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
            let start = if k == 0 {
                StrategyProfile::uniform(maid)
            } else {
                random_profile(maid, &mut rng)
            };
            let a = solve(maid, point, &start, opts).ok();
            let b = newton_solve(maid, point, &start, opts).ok();
            a.into_iter().chain(b)
        })
        .collect();
    if found.is_empty() {
        return Err(Error::NonConvergence(format!("all {n_starts} starts failed")));
    }
    let mut sorted = found;
    sorted.sort_by(|a, b| lexicographic(&a.profile, &b.profile));
    let mut out: Vec<Equilibrium> = Vec::new();
    for e in sorted {
        if out.iter().all(|k| k.profile.distance(&e.profile) >= DEDUP_TOL) {
            out.push(e);
        }
    }
    Ok(out)
}

/// Condition number (2-norm) of a square matrix.
pub fn condition_number(j: &DMatrix<f64>) -> f64 {
    let sv = j.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// d(σ, z)/d(path) at an equilibrium, plus the Jacobian condition number.
pub fn path_tangent(maid: &Maid, e: &Equilibrium, axis: PathAxis) -> Result<(DVector<f64>, f64)> {
    let ev = Evaluator::new(maid, &e.point.theta);
    let layout = Layout::new(maid);
    let s = evaluate_system(&ev, &layout, &e.point.beta, &e.profile, &e.z, &e.z_shift, true);
    let jac = s.jac.unwrap();
    let cond = condition_number(&jac);
    if cond > SINGULAR_CONDITION {
        return Err(Error::SingularJacobian(cond));
    }
    let col: DVector<f64> = match axis {
        PathAxis::Theta(k) => s.jac_theta.unwrap().column(k).into_owned(),
        PathAxis::Beta(i) => s.jac_beta.unwrap().column(i).into_owned(),
        PathAxis::AllBeta => {
            let jb = s.jac_beta.unwrap();
            let mut c = DVector::zeros(layout.dim());
            for i in 0..jb.ncols() {
                c += jb.column(i);
            }
            c
        }
    };
    let t = jac.lu().solve(&(-col)).ok_or(Error::SingularJacobian(cond))?;
    Ok((t, cond))
}

/// Options for [`trace_branch`].
#[derive(Debug, Clone, PartialEq)]
pub struct TraceOptions {
    pub solve: SolveOptions,
    /// Smallest continuation step before a fold is declared.
    pub min_step: f64,
    /// Largest continuation step.
    pub max_step: f64,
    /// Corrector results further than this (L∞) from the predictor are rejected.
    pub jump_guard: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            solve: SolveOptions::default(),
            min_step: 1e-7,
            max_step: f64::INFINITY,
            jump_guard: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    /// Last path value reached.
    pub at: f64,
    /// Jacobian condition number at the last accepted point.
    pub condition: f64,
    pub reason: String,
}

/// Ordered equilibria along a path in one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub points: Vec<Equilibrium>,
    pub path_param: PathAxis,
    pub path_values: Vec<f64>,
    pub label: String,
    pub fold: Option<FoldReport>,
}

impl Branch {
    pub fn last(&self) -> &Equilibrium {
        self.points.last().expect("branch has at least one point")
    }
}

/// Move an equilibrium to a nearby parameter point: Euler predictor along the
/// tangent in `axis`, Newton corrector.
fn continue_step(
    maid: &Maid,
    e: &Equilibrium,
    axis: PathAxis,
    target: f64,
    opts: &TraceOptions,
) -> Result<Equilibrium> {
    let (tangent, _) = path_tangent(maid, e, axis)?;
    let dp = target - axis.value(&e.point);
    let point = axis.set(&e.point, target);
    maid.check_point(&point)?;
    let y0 = e.unknowns();
    let pred: Vec<f64> = y0.iter().zip(tangent.iter()).map(|(y, t)| y + dp * t).collect();
    let layout = Layout::new(maid);
    let ns = layout.n_sigma;
    let ev = Evaluator::new(maid, &point.theta);
    // Offsets were chosen at the old point; move them with β so z stays O(1).
    let shift_scale = |r: usize| -> f64 {
        let b = &layout.blocks[layout.blocks.iter().rposition(|b| b.z_offset <= r).unwrap()];
        let old = e.point.beta[b.player];
        let new = point.beta[b.player];
        if old > 0.0 {
            new / old
        } else {
            1.0
        }
    };
    let shift: Vec<f64> = (0..layout.n_z).map(|r| e.z_shift[r] * shift_scale(r)).collect();
    let z_pred: Vec<f64> = (0..layout.n_z)
        .map(|r| (pred[ns + r].max(1e-300)).ln() + e.z_shift[r] - shift[r])
        .map(f64::exp)
        .collect();
    let sigma_pred = &pred[..ns];
    let eq = newton(maid, &ev, &layout, &point, sigma_pred, &z_pred, &shift, &opts.solve)?;
    let jump = eq
        .profile
        .flat()
        .iter()
        .zip(sigma_pred)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if jump > opts.jump_guard {
        return Err(Error::BranchJump(jump));
    }
    Ok(eq)
}

/// Re-solve an equilibrium at a nearby point in θ by continuation along each
/// changed component in turn, staying on the same branch.
pub fn follow_to(maid: &Maid, e: &Equilibrium, target: &ParamPoint, opts: &TraceOptions) -> Result<Equilibrium> {
    maid.check_point(target)?;
    let mut cur = e.clone();
    for k in 0..target.theta.len() {
        if cur.point.theta[k] != target.theta[k] {
            let sched = PathSchedule::new(PathAxis::Theta(k), vec![cur.point.theta[k], target.theta[k]])?;
            let br = trace_branch(maid, &cur, &sched, opts, "")?;
            if let Some(f) = br.fold {
                return Err(Error::FoldDetected(f.at));
            }
            cur = br.points.last().unwrap().clone();
        }
    }
    for i in 0..target.beta.len() {
        if cur.point.beta[i] != target.beta[i] {
            let sched = PathSchedule::new(PathAxis::Beta(i), vec![cur.point.beta[i], target.beta[i]])?;
            let br = trace_branch(maid, &cur, &sched, opts, "")?;
            if let Some(f) = br.fold {
                return Err(Error::FoldDetected(f.at));
            }
            cur = br.points.last().unwrap().clone();
        }
    }
    Ok(cur)
}

/// Pseudo-arclength machinery in the augmented unknowns (σ, z, path value),
/// used to step around a turning point and pin it down.
struct Arc<'m> {
    maid: &'m Maid,
    layout: Layout,
    base: ParamPoint,
    axis: PathAxis,
    shift: Vec<f64>,
    tol: f64,
}

impl Arc<'_> {
    fn eval(&self, y: &DVector<f64>, jac: bool) -> (DVector<f64>, Option<DMatrix<f64>>, Option<DVector<f64>>) {
        let m = self.layout.dim();
        let ns = self.layout.n_sigma;
        let point = self.axis.set(&self.base, y[m]);
        let ev = Evaluator::new(self.maid, &point.theta);
        let sigma: Vec<f64> = y.rows(0, ns).iter().copied().collect();
        let z: Vec<f64> = y.rows(ns, self.layout.n_z).iter().copied().collect();
        let prof = StrategyProfile::from_flat(self.maid, &sigma);
        let s = evaluate_system(&ev, &self.layout, &point.beta, &prof, &z, &self.shift, jac);
        let res = DVector::from_vec(s.residual);
        if !jac {
            return (res, None, None);
        }
        let fp = match self.axis {
            PathAxis::Theta(k) => s.jac_theta.unwrap().column(k).into_owned(),
            PathAxis::Beta(i) => s.jac_beta.unwrap().column(i).into_owned(),
            PathAxis::AllBeta => s.jac_beta.unwrap().column_sum(),
        };
        (res, s.jac, Some(fp))
    }

    fn bordered(j: &DMatrix<f64>, fp: &DVector<f64>, row: &DVector<f64>) -> DMatrix<f64> {
        let m = j.nrows();
        let mut a = DMatrix::zeros(m + 1, m + 1);
        a.view_mut((0, 0), (m, m)).copy_from(j);
        a.view_mut((0, m), (m, 1)).copy_from(fp);
        a.view_mut((m, 0), (1, m + 1)).copy_from(&row.transpose());
        a
    }

    /// Unit tangent oriented to agree with `orient`.
    fn tangent(&self, y: &DVector<f64>, orient: &DVector<f64>) -> Option<DVector<f64>> {
        let (_, j, fp) = self.eval(y, true);
        let a = Arc::bordered(&j.unwrap(), &fp.unwrap(), orient);
        let mut rhs = DVector::zeros(y.len());
        rhs[y.len() - 1] = 1.0;
        let t = a.lu().solve(&rhs)?;
        let n = t.norm();
        (n.is_finite() && n > 0.0).then(|| t / n)
    }

    /// Newton on f = 0, tᵀ(Y − Y0) = ds.
    fn correct(&self, y0: &DVector<f64>, t: &DVector<f64>, ds: f64) -> Option<DVector<f64>> {
        let mut y = y0 + t * ds;
        for _ in 0..30 {
            let (res, j, fp) = self.eval(&y, true);
            let c = t.dot(&(&y - y0)) - ds;
            if res.amax() <= self.tol * 0.1 && c.abs() <= 1e-14 {
                return Some(y);
            }
            let a = Arc::bordered(&j.unwrap(), &fp.unwrap(), t);
            let mut rhs = -res.clone();
            rhs = rhs.push(-c);
            let step = a.lu().solve(&rhs)?;
            y += step;
            if !y.iter().all(|v| v.is_finite()) {
                return None;
            }
        }
        let (res, _, _) = self.eval(&y, false);
        (res.amax() <= self.tol).then_some(y)
    }

    fn det_sign(&self, y: &DVector<f64>) -> f64 {
        let (_, j, _) = self.eval(y, true);
        j.unwrap().lu().determinant().signum()
    }
}

/// Step along the arc from `e` (moving in `direction` of the path value)
/// until det J changes sign, then bisect on arclength. Returns the path
/// value and Jacobian condition number at the located point.
fn locate_fold(maid: &Maid, e: &Equilibrium, axis: PathAxis, direction: f64, tol: f64) -> Option<(f64, f64)> {
    let layout = Layout::new(maid);
    let m = layout.dim();
    let arc = Arc {
        maid,
        layout,
        base: e.point.clone(),
        axis,
        shift: e.z_shift.clone(),
        tol,
    };
    let mut y = DVector::from_vec(e.unknowns()).push(axis.value(&e.point));
    let mut orient = DVector::zeros(m + 1);
    orient[m] = direction;
    let mut t = arc.tangent(&y, &orient)?;
    let mut sign = arc.det_sign(&y);
    let mut ds = 1e-3;
    for _ in 0..400 {
        let Some(next) = arc.correct(&y, &t, ds) else {
            ds *= 0.5;
            if ds < 1e-12 {
                return None;
            }
            continue;
        };
        let next_sign = arc.det_sign(&next);
        if next_sign != sign {
            let (mut lo, mut hi) = (0.0, ds);
            let mut best = next;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let Some(p) = arc.correct(&y, &t, mid) else { break };
                if arc.det_sign(&p) == sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
                best = p;
            }
            let (_, j, _) = arc.eval(&best, true);
            return Some((best[m], condition_number(&j.unwrap())));
        }
        let next_t = arc.tangent(&next, &t)?;
        y = next;
        t = next_t;
        sign = next_sign;
        ds = (ds * 1.5).min(0.05);
    }
    None
}

/// Strictly monotone sequence of values for one path parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSchedule {
    pub axis: PathAxis,
    pub values: Vec<f64>,
}

impl PathSchedule {
    pub fn new(axis: PathAxis, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidOption("empty path schedule".into()));
        }
        if values.len() > 1 {
            let up = values[1] > values[0];
            let ok = values.windows(2).all(|w| if up { w[1] > w[0] } else { w[1] < w[0] });
            if !ok {
                return Err(Error::InvalidOption("path schedule must be strictly monotone".into()));
            }
        }
        Ok(PathSchedule { axis, values })
    }

    /// `steps` evenly spaced values from `from` to `to` inclusive (a single
    /// value when they coincide).
    pub fn linspace(axis: PathAxis, from: f64, to: f64, steps: usize) -> Result<Self> {
        if from == to || steps < 2 {
            return PathSchedule::new(axis, vec![from]);
        }
        let values = (0..steps)
            .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
            .collect();
        PathSchedule::new(axis, values)
    }
}

/// Predictor–corrector continuation along `path`.
///
/// The first schedule value is the start; if `start` sits elsewhere it is
/// first continued there. Steps are halved on corrector failure; when the
/// step falls below `min_step`, or the Jacobian becomes singular, the branch
/// is returned up to that point with a fold report.
pub fn trace_branch(
    maid: &Maid,
    start: &Equilibrium,
    path: &PathSchedule,
    opts: &TraceOptions,
    label: &str,
) -> Result<Branch> {
    if start.residual_norm > opts.solve.tol {
        return Err(Error::NonConvergence(format!(
            "start residual {:.3e}",
            start.residual_norm
        )));
    }
    let axis = path.axis;
    let mut branch = Branch {
        points: Vec::new(),
        path_param: axis,
        path_values: Vec::new(),
        label: label.to_string(),
        fold: None,
    };
    let mut cur = start.clone();
    let mut h = f64::INFINITY;
    let mut last_cond = 0.0;
    let mut targets = path.values.iter().copied();
    let first = targets.next().unwrap();
    let mut queue: Vec<f64> = Vec::new();
    if axis.value(&cur.point) != first {
        queue.push(first);
    } else {
        branch.points.push(cur.clone());
        branch.path_values.push(first);
    }
    queue.extend(targets);
    for target in queue {
        loop {
            let c = axis.value(&cur.point);
            let remaining = target - c;
            if remaining == 0.0 {
                break;
            }
            let step = remaining.abs().min(h).min(opts.max_step);
            let next = if step >= remaining.abs() {
                target
            } else {
                c + step * remaining.signum()
            };
            match continue_step(maid, &cur, axis, next, opts) {
                Ok(eq) => {
                    let (_, cond) = match path_tangent(maid, &eq, axis) {
                        Ok(t) => t,
                        Err(Error::SingularJacobian(cond)) => {
                            branch.fold = Some(FoldReport {
                                at: axis.value(&eq.point),
                                condition: cond,
                                reason: "singular Jacobian".into(),
                            });
                            return Ok(branch);
                        }
                        Err(e) => return Err(e),
                    };
                    last_cond = cond;
                    cur = eq;
                    h = if h.is_finite() { (2.0 * step).max(h) } else { step };
                }
                Err(Error::SingularJacobian(cond)) => {
                    branch.fold = Some(FoldReport {
                        at: c,
                        condition: cond,
                        reason: "singular Jacobian".into(),
                    });
                    return Ok(branch);
                }
                Err(Error::OutOfDomain { .. }) => {
                    return Err(Error::InvalidOption("path leaves the parameter domain".into()))
                }
                Err(_) => {
                    h = step * 0.5;
                    if h < opts.min_step {
                        let located = locate_fold(maid, &cur, axis, remaining.signum(), opts.solve.tol);
                        branch.fold = Some(match located {
                            Some((at, condition)) => FoldReport {
                                at,
                                condition,
                                reason: "turning point".into(),
                            },
                            None => FoldReport {
                                at: c,
                                condition: last_cond,
                                reason: "step size collapsed".into(),
                            },
                        });
                        return Ok(branch);
                    }
                }
            }
        }
        branch.points.push(cur.clone());
        branch.path_values.push(target);
    }
    Ok(branch)
}

/// Principal branch: continuation from the uniform profile at β = 0 up to the
/// point's rationalities (all players together up to the smallest target,
/// then each player individually).
pub fn principal_equilibrium(maid: &Maid, point: &ParamPoint, opts: &TraceOptions) -> Result<Equilibrium> {
    let zero = ParamPoint {
        theta: point.theta.clone(),
        beta: vec![0.0; point.beta.len()],
    };
    let start = solve(maid, &zero, &StrategyProfile::uniform(maid), &opts.solve)?;
    let common = point.beta.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut cur = start;
    if common.is_finite() && common > 0.0 {
        let sched = PathSchedule::new(PathAxis::AllBeta, vec![0.0, common])?;
        let br = trace_branch(maid, &cur, &sched, opts, "principal")?;
        if let Some(f) = br.fold {
            return Err(Error::FoldDetected(f.at));
        }
        cur = br.last().clone();
    }
    follow_to(maid, &cur, point, opts)
}

/// Serialize a branch as CSV: path value, residual, every strategy entry and
/// each player's expected utility.
pub fn branch_csv(maid: &Maid, branch: &Branch) -> String {
    let mut out = String::new();
    let mut header = vec![branch.path_param.name(maid), "residual".to_string()];
    header.extend(sigma_column_names(maid));
    header.extend(maid.players.iter().map(|p| format!("V_{}", p.name)));
    out.push_str(&header.join(","));
    out.push('\n');
    for (e, v) in branch.points.iter().zip(&branch.path_values) {
        let mut row = vec![format!("{v}"), format!("{:e}", e.residual_norm)];
        row.extend(e.profile.flat().iter().map(|x| format!("{x}")));
        let ev = Evaluator::new(maid, &e.point.theta);
        let phi = ev.factors(&e.profile);
        for i in 0..maid.players.len() {
            row.push(format!("{}", ev.expected_utility_from_factors(&phi, i)));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Column names `sigma[<node>|<parent>=<state>,...][<action>]` in profile order.
pub fn sigma_column_names(maid: &Maid) -> Vec<String> {
    let mut names = Vec::new();
    for v in maid.decision_nodes() {
        let node = &maid.nodes[v];
        for c in 0..maid.parent_configs(v) {
            let states = maid.decode_parent_config(v, c);
            let cond: Vec<String> = node
                .parents
                .iter()
                .zip(&states)
                .map(|(&p, &s)| format!("{}={}", maid.nodes[p].name, maid.nodes[p].states[s]))
                .collect();
            for a in &node.states {
                if cond.is_empty() {
                    names.push(format!("sigma[{}][{}]", node.name, a));
                } else {
                    names.push(format!("sigma[{}|{}][{}]", node.name, cond.join(";"), a));
                }
            }
        }
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maid::parse_maid;
    use crate::scenarios;

    pub(crate) fn logistic_game() -> Maid {
        parse_maid(
            r#"{
            "theta": [{"name": "theta", "min": -2, "max": 2, "default": 1}],
            "players": [{"id": "p", "beta": 2}],
            "nodes": [{"id": "A", "kind": "decision", "player": "p", "states": ["0", "1"]}],
            "edges": [],
            "utilities": [{"player": "p", "scope": ["A"], "table": [0, "theta"]}]
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn residual_zero_at_beta_zero_uniform() {
        for m in [scenarios::blackwell(), scenarios::bagwell(), scenarios::signaling()] {
            let mut p = m.default_point();
            p.beta.iter_mut().for_each(|b| *b = 0.0);
            let layout = Layout::new(&m);
            let z: Vec<f64> = layout
                .blocks
                .iter()
                .flat_map(|b| vec![b.n_actions as f64; b.n_configs])
                .collect();
            let r = residual(&m, &StrategyProfile::uniform(&m), &z, &p).unwrap();
            assert!(inf_norm(&r) == 0.0);
        }
    }

    #[test]
    fn residual_zero_at_closed_form_blackwell() {
        let m = scenarios::blackwell();
        let p = ParamPoint::new(&m, vec![0.0, 0.0], vec![5.0]).unwrap();
        // E(u|s,a): s=0 → (0, -2), s=1 → (0, 1)
        let (z0, z1) = (1.0 + (-10.0f64).exp(), 1.0 + 5.0f64.exp());
        let s = StrategyProfile {
            tables: vec![vec![1.0 / z0, (-10.0f64).exp() / z0, 1.0 / z1, 5.0f64.exp() / z1]],
        };
        let r = residual(&m, &s, &[z0, z1], &p).unwrap();
        assert!(inf_norm(&r) <= 1e-12);
    }

    #[test]
    fn beta_zero_solution_is_uniform() {
        for m in [scenarios::blackwell(), scenarios::bagwell(), scenarios::negutility()] {
            let mut p = m.default_point();
            p.beta.iter_mut().for_each(|b| *b = 0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let init = random_profile(&m, &mut rng);
            let e = solve(&m, &p, &init, &SolveOptions::default()).unwrap();
            assert_eq!(e.profile.distance(&StrategyProfile::uniform(&m)), 0.0);
        }
    }

    #[test]
    fn logistic_closed_form() {
        let m = logistic_game();
        let p = m.default_point();
        let e = solve(&m, &p, &StrategyProfile::uniform(&m), &SolveOptions::default()).unwrap();
        let expect = 2f64.exp() / (1.0 + 2f64.exp());
        assert!((e.profile.tables[0][1] - expect).abs() < 1e-10);
        assert!((e.profile.tables[0][1] - 0.880797).abs() < 1e-6);
    }

    #[test]
    fn blackwell_noiseless_closed_form() {
        let m = scenarios::blackwell();
        let p = ParamPoint::new(&m, vec![0.0, 0.0], vec![5.0]).unwrap();
        let e = solve(&m, &p, &StrategyProfile::uniform(&m), &SolveOptions::default()).unwrap();
        let t = &e.profile.tables[0];
        assert!((t[3] - 5f64.exp() / (1.0 + 5f64.exp())).abs() < 1e-10);
        assert!((t[3] - 0.993307).abs() < 1e-6);
        assert!((t[1] - 4.5398e-5).abs() < 1e-9);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = scenarios::bagwell();
        let p = ParamPoint::new(&m, vec![0.1, 0.2], vec![3.0, 4.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let prof = random_profile(&m, &mut rng);
        let ev = Evaluator::new(&m, &p.theta);
        let layout = Layout::new(&m);
        let (_, z, shift) = logit_response(&ev, &layout, &p.beta, &prof);
        let base = evaluate_system(&ev, &layout, &p.beta, &prof, &z, &shift, true);
        let jac = base.jac.unwrap();
        let y: Vec<f64> = prof.flat().into_iter().chain(z.iter().copied()).collect();
        let ns = layout.n_sigma;
        let h = 1e-7;
        for col in 0..layout.dim() {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[col] += h;
            ym[col] -= h;
            let f = |y: &[f64]| {
                evaluate_system(
                    &ev,
                    &layout,
                    &p.beta,
                    &StrategyProfile::from_flat(&m, &y[..ns]),
                    &y[ns..],
                    &shift,
                    false,
                )
                .residual
            };
            let (fp, fm) = (f(&yp), f(&ym));
            for row in 0..layout.dim() {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                assert!(
                    (fd - jac[(row, col)]).abs() <= 1e-6 * fd.abs().max(1.0),
                    "({row},{col}) fd {fd} vs {}",
                    jac[(row, col)]
                );
            }
        }
        // θ and β columns.
        let jt = base.jac_theta.unwrap();
        let jb = base.jac_beta.unwrap();
        for k in 0..2 {
            let f = |t: f64| {
                let mut th = p.theta.clone();
                th[k] = t;
                let ev = Evaluator::new(&m, &th);
                evaluate_system(&ev, &layout, &p.beta, &prof, &z, &shift, false).residual
            };
            let (fp, fm) = (f(p.theta[k] + h), f(p.theta[k] - h));
            for row in 0..layout.dim() {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                assert!((fd - jt[(row, k)]).abs() <= 1e-6 * fd.abs().max(1.0));
            }
            let f = |b: f64| {
                let mut beta = p.beta.clone();
                beta[k] = b;
                evaluate_system(&ev, &layout, &beta, &prof, &z, &shift, false).residual
            };
            let (fp, fm) = (f(p.beta[k] + h), f(p.beta[k] - h));
            for row in 0..layout.dim() {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                assert!((fd - jb[(row, k)]).abs() <= 1e-6 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn enumerate_at_beta_zero_finds_one() {
        let m = scenarios::bagwell();
        let mut p = m.default_point();
        p.beta = vec![0.0, 0.0];
        let eqs = enumerate_equilibria(&m, &p, 10, &SolveOptions::default()).unwrap();
        assert_eq!(eqs.len(), 1);
    }

    #[test]
    fn enumerate_is_deterministic() {
        let m = scenarios::bagwell();
        let p = m.default_point();
        let opts = SolveOptions {
            seed: 42,
            ..SolveOptions::default()
        };
        let a = enumerate_equilibria(&m, &p, 30, &opts).unwrap();
        let b = enumerate_equilibria(&m, &p, 30, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn blackwell_beta_trace_is_smooth() {
        let m = scenarios::blackwell();
        let p0 = ParamPoint::new(&m, vec![0.1, 0.2], vec![0.0]).unwrap();
        let start = solve(&m, &p0, &StrategyProfile::uniform(&m), &SolveOptions::default()).unwrap();
        let sched = PathSchedule::linspace(PathAxis::AllBeta, 0.0, 10.0, 11).unwrap();
        let br = trace_branch(&m, &start, &sched, &TraceOptions::default(), "principal").unwrap();
        assert!(br.fold.is_none());
        assert_eq!(br.points.len(), 11);
        for e in &br.points {
            assert!(e.residual_norm <= 1e-10);
        }
    }

    #[test]
    fn single_value_schedule_single_point() {
        let m = scenarios::blackwell();
        let p0 = ParamPoint::new(&m, vec![0.1, 0.2], vec![0.0]).unwrap();
        let start = solve(&m, &p0, &StrategyProfile::uniform(&m), &SolveOptions::default()).unwrap();
        let sched = PathSchedule::linspace(PathAxis::AllBeta, 0.0, 0.0, 5).unwrap();
        let br = trace_branch(&m, &start, &sched, &TraceOptions::default(), "").unwrap();
        assert_eq!(br.points.len(), 1);
        let csv = branch_csv(&m, &br);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("beta,residual,sigma[A|S=0][0],"));
    }

    #[test]
    fn lower_bagwell_branch_folds_when_rationality_drops() {
        let m = scenarios::bagwell_symmetric();
        let p = ParamPoint::new(&m, vec![0.05], vec![10.0, 10.0]).unwrap();
        let eqs = enumerate_equilibria(&m, &p, 64, &SolveOptions::default()).unwrap();
        let lower = &eqs[0];
        assert!(lower.profile.tables[0][0] < 0.01);
        let sched = PathSchedule::linspace(PathAxis::AllBeta, 10.0, 1.0, 10).unwrap();
        let br = trace_branch(&m, lower, &sched, &TraceOptions::default(), "lower").unwrap();
        let fold = br.fold.expect("lower branch ends in a fold");
        assert!(fold.at > 1.0 && fold.at < 10.0, "{fold:?}");
        assert!(fold.condition > 1e10, "{fold:?}");
        for w in br.path_values.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn step_size_consistency() {
        let m = scenarios::bagwell_symmetric();
        let p0 = ParamPoint::new(&m, vec![0.05], vec![0.0, 0.0]).unwrap();
        let start = solve(&m, &p0, &StrategyProfile::uniform(&m), &SolveOptions::default()).unwrap();
        let coarse = PathSchedule::linspace(PathAxis::AllBeta, 0.0, 10.0, 6).unwrap();
        let fine = PathSchedule::linspace(PathAxis::AllBeta, 0.0, 10.0, 11).unwrap();
        let opts = TraceOptions::default();
        let a = trace_branch(&m, &start, &coarse, &opts, "principal").unwrap();
        let b = trace_branch(&m, &start, &fine, &opts, "principal").unwrap();
        assert!(a.fold.is_none() && b.fold.is_none());
        for (i, e) in a.points.iter().enumerate() {
            assert!(e.profile.distance(&b.points[2 * i].profile) < 1e-6);
        }
        // R dominates for the leader while the follower barely reacts; once
        // the follower responds to the signal, σ(L) rises.
        let l: Vec<f64> = b.points.iter().map(|e| e.profile.tables[0][0]).collect();
        assert!(l[1] < 0.5);
        assert!(l[1..].windows(2).all(|w| w[1] > w[0]), "{l:?}");
        assert!(l[10] > 0.9);
    }

    #[test]
    fn non_monotone_schedule_rejected() {
        assert!(PathSchedule::new(PathAxis::AllBeta, vec![0.0, 1.0, 0.5]).is_err());
    }

    #[test]
    fn options_validated() {
        let m = scenarios::blackwell();
        let bad = SolveOptions {
            damping: 0.0,
            ..SolveOptions::default()
        };
        assert!(solve(&m, &m.default_point(), &StrategyProfile::uniform(&m), &bad).is_err());
    }
}

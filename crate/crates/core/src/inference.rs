//! Exact inference by enumeration of the joint state space.
//!
//! Every node contributes one factor table: evaluated CPDs for chance nodes,
//! strategy rows for decision nodes. All factor tables are concatenated into
//! a single flat vector φ; derivatives of conditional expected utilities are
//! taken with respect to φ and then chained to θ or σ by the callers.

use crate::error::{Error, Result};
use crate::maid::{Maid, NodeKind, ParamPoint, StrategyProfile};

/// Probability table over the full joint state space, row-major in
/// topological node order (last node fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    pub names: Vec<String>,
    pub radices: Vec<usize>,
    pub probs: Vec<f64>,
}

/// Calls `f(index, states)` for every joint state in row-major order.
pub fn for_each_state(radices: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let total: usize = radices.iter().product();
    let mut states = vec![0usize; radices.len()];
    for idx in 0..total {
        f(idx, &states);
        for pos in (0..radices.len()).rev() {
            states[pos] += 1;
            if states[pos] < radices[pos] {
                break;
            }
            states[pos] = 0;
        }
    }
}

impl JointTable {
    pub fn node_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    /// Marginal over `nodes` (in the given order), row-major.
    pub fn marginal(&self, nodes: &[usize]) -> Vec<f64> {
        let size: usize = nodes.iter().map(|&v| self.radices[v]).product();
        let mut out = vec![0.0; size];
        for_each_state(&self.radices, |idx, states| {
            out[self.sub_index(nodes, states)] += self.probs[idx];
        });
        out
    }

    /// Row-major index of the sub-configuration of `nodes` within `states`.
    pub fn sub_index(&self, nodes: &[usize], states: &[usize]) -> usize {
        nodes.iter().fold(0, |acc, &v| acc * self.radices[v] + states[v])
    }

    /// p(x_targets | x_givens = given_state), row-major over `targets`.
    pub fn conditional_distribution(
        &self,
        targets: &[usize],
        givens: &[usize],
        given_state: &[usize],
    ) -> Result<Vec<f64>> {
        if given_state.len() != givens.len() {
            return Err(Error::DimensionMismatch("given_state length".into()));
        }
        for (&g, &s) in givens.iter().zip(given_state) {
            if s >= self.radices[g] {
                return Err(Error::InvalidAction(format!("state {s} of `{}`", self.names[g])));
            }
        }
        let size: usize = targets.iter().map(|&v| self.radices[v]).product();
        let mut num = vec![0.0; size];
        let mut den = 0.0;
        for_each_state(&self.radices, |idx, states| {
            if givens.iter().zip(given_state).all(|(&g, &s)| states[g] == s) {
                den += self.probs[idx];
                num[self.sub_index(targets, states)] += self.probs[idx];
            }
        });
        if den <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        num.iter_mut().for_each(|x| *x /= den);
        Ok(num)
    }
}

/// Conditional expected utilities E(u_i | a_v, x_pa(v)) for every entry of a
/// decision node's strategy table, optionally with exact derivatives.
#[derive(Debug, Clone)]
pub struct CondUtilities {
    /// Indexed `[parent_config * n_actions + action]`.
    pub values: Vec<f64>,
    /// Per entry: gradient with respect to the flat factor vector φ.
    pub d_factors: Vec<Vec<f64>>,
    /// Per entry: direct gradient with respect to θ through the utility table.
    pub d_theta: Vec<Vec<f64>>,
}

/// Game evaluated at a fixed θ: chance CPDs, utilities and the flat factor
/// layout. Decision-node factors are filled from a strategy profile on demand.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub maid: &'a Maid,
    pub theta: Vec<f64>,
    /// Start of each node's table in φ.
    pub offsets: Vec<usize>,
    pub n_factors: usize,
    /// Chance-node tables (value) per node; empty for decision nodes.
    chance_values: Vec<Vec<f64>>,
    /// ∂φ/∂θ for chance entries, flat `[entry][k]` per node.
    chance_grads: Vec<Vec<Vec<f64>>>,
    /// `[player][x]`
    util: Vec<Vec<f64>>,
    /// `[player][x][k]`; empty when the player's utility does not depend on θ.
    dutil: Vec<Vec<Vec<f64>>>,
    /// `[x * n_nodes + w]` entry index of node w's factor at joint state x.
    entries: Vec<u32>,
    radices: Vec<usize>,
}

impl<'a> Evaluator<'a> {
    pub fn new(maid: &'a Maid, theta: &[f64]) -> Self {
        let n = maid.nodes.len();
        let d = theta.len();
        let radices = maid.radices();
        let mut offsets = Vec::with_capacity(n);
        let mut off = 0;
        for v in 0..n {
            offsets.push(off);
            off += maid.nodes[v].states.len() * maid.parent_configs(v);
        }
        let mut chance_values = vec![Vec::new(); n];
        let mut chance_grads = vec![Vec::new(); n];
        for v in 0..n {
            if maid.nodes[v].kind == NodeKind::Chance {
                let t = maid.cpd_table(v, theta);
                chance_values[v] = t.iter().map(|x| x.value).collect();
                chance_grads[v] = t.into_iter().map(|x| x.grad).collect();
            }
        }
        let size = maid.joint_size();
        let mut entries = vec![0u32; size * n];
        let np = maid.players.len();
        let mut util = vec![vec![0.0; size]; np];
        let util_tables: Vec<Vec<crate::expr::Dual>> = maid
            .utilities
            .iter()
            .map(|u| u.table.iter().map(|e| e.eval_dual(theta)).collect())
            .collect();
        let theta_dependent: Vec<bool> = (0..np)
            .map(|i| {
                maid.utilities
                    .iter()
                    .zip(&util_tables)
                    .any(|(u, t)| u.player == i && t.iter().any(|x| x.grad.iter().any(|g| *g != 0.0)))
            })
            .collect();
        let mut dutil: Vec<Vec<Vec<f64>>> = (0..np)
            .map(|i| {
                if theta_dependent[i] {
                    vec![vec![0.0; d]; size]
                } else {
                    Vec::new()
                }
            })
            .collect();
        for_each_state(&radices, |x, states| {
            for w in 0..n {
                let cfg = maid.parent_config_of(w, states);
                entries[x * n + w] = (cfg * radices[w] + states[w]) as u32;
            }
            for (u, t) in maid.utilities.iter().zip(&util_tables) {
                let val = &t[maid.utility_index(u, states)];
                util[u.player][x] += val.value;
                if theta_dependent[u.player] {
                    for (g, h) in dutil[u.player][x].iter_mut().zip(&val.grad) {
                        *g += h;
                    }
                }
            }
        });
        Evaluator {
            maid,
            theta: theta.to_vec(),
            offsets,
            n_factors: off,
            chance_values,
            chance_grads,
            util,
            dutil,
            entries,
            radices,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn joint_size(&self) -> usize {
        self.entries.len() / self.maid.nodes.len().max(1)
    }

    #[inline]
    pub fn entry(&self, x: usize, w: usize) -> usize {
        self.entries[x * self.maid.nodes.len() + w] as usize
    }

    /// Flat factor vector φ for a strategy profile.
    pub fn factors(&self, profile: &StrategyProfile) -> Vec<f64> {
        let mut phi = vec![0.0; self.n_factors];
        let mut next_decision = 0;
        for (v, node) in self.maid.nodes.iter().enumerate() {
            let dst = &mut phi[self.offsets[v]..self.offsets[v] + self.table_len(v)];
            if node.is_decision() {
                dst.copy_from_slice(&profile.tables[next_decision]);
                next_decision += 1;
            } else {
                dst.copy_from_slice(&self.chance_values[v]);
            }
        }
        phi
    }

    pub fn table_len(&self, v: usize) -> usize {
        self.maid.nodes[v].states.len() * self.maid.parent_configs(v)
    }

    /// ∂φ/∂θ as a dense `n_factors × d` row list, with decision entries taken
    /// from `dsigma` (flat profile order × d) or zero when absent.
    pub fn factor_theta_jacobian(&self, dsigma: Option<&[Vec<f64>]>) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut out = vec![vec![0.0; d]; self.n_factors];
        let mut sigma_pos = 0;
        for (v, node) in self.maid.nodes.iter().enumerate() {
            let len = self.table_len(v);
            for e in 0..len {
                let row = &mut out[self.offsets[v] + e];
                if node.is_decision() {
                    if let Some(ds) = dsigma {
                        row.copy_from_slice(&ds[sigma_pos + e]);
                    }
                } else {
                    row.copy_from_slice(&self.chance_grads[v][e]);
                }
            }
            if node.is_decision() {
                sigma_pos += len;
            }
        }
        out
    }

    pub fn joint_from_factors(&self, phi: &[f64]) -> JointTable {
        let n = self.maid.nodes.len();
        let size = self.joint_size();
        let mut probs = vec![1.0; size];
        for (x, p) in probs.iter_mut().enumerate() {
            for w in 0..n {
                *p *= phi[self.offsets[w] + self.entry(x, w)];
            }
        }
        JointTable {
            names: self.maid.nodes.iter().map(|n| n.name.clone()).collect(),
            radices: self.radices.clone(),
            probs,
        }
    }

    pub fn joint(&self, profile: &StrategyProfile) -> JointTable {
        self.joint_from_factors(&self.factors(profile))
    }

    /// ∂p(x)/∂θ for every joint state, given ∂φ/∂θ.
    pub fn joint_theta_derivative(&self, phi: &[f64], dphi: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.maid.nodes.len();
        let d = self.dim();
        (0..self.joint_size())
            .map(|x| {
                let mut g = vec![0.0; d];
                for w in 0..n {
                    let idx = self.offsets[w] + self.entry(x, w);
                    if dphi[idx].iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    let mut rest = 1.0;
                    for w2 in 0..n {
                        if w2 != w {
                            rest *= phi[self.offsets[w2] + self.entry(x, w2)];
                        }
                    }
                    for (gk, dk) in g.iter_mut().zip(&dphi[idx]) {
                        *gk += dk * rest;
                    }
                }
                g
            })
            .collect()
    }

    /// u_i(x) for all joint states.
    pub fn utility(&self, player: usize) -> &[f64] {
        &self.util[player]
    }

    /// ∂u_i(x)/∂θ, or `None` when the utility does not depend on θ.
    pub fn utility_theta(&self, player: usize) -> Option<&[Vec<f64>]> {
        let t = &self.dutil[player];
        (!t.is_empty()).then_some(t.as_slice())
    }

    pub fn expected_utility_from_factors(&self, phi: &[f64], player: usize) -> f64 {
        let j = self.joint_from_factors(phi);
        j.probs.iter().zip(&self.util[player]).map(|(p, u)| p * u).sum()
    }

    /// Conditional expected utilities of `player` at every entry of decision
    /// node `v`'s strategy table.
    ///
    /// Each entry is E(u | a_v, x_pa) with v's own strategy factor removed.
    /// When p(x_pa) = 0 under the current factors, the parents are clamped
    /// instead of conditioned on (their own factors are also removed), so the
    /// remaining nodes are integrated under the profile and every row of the
    /// response exists.
    pub fn cond_utilities(&self, v: usize, player: usize, phi: &[f64], with_grad: bool) -> CondUtilities {
        let n = self.maid.nodes.len();
        let mut excluded = vec![false; n];
        excluded[v] = true;
        let mut out = self.accumulate(v, player, phi, &excluded, with_grad, None);
        let zero: Vec<usize> = (0..out.values.len()).filter(|&e| !out.values[e].is_finite()).collect();
        if !zero.is_empty() {
            for &p in &self.maid.nodes[v].parents {
                excluded[p] = true;
            }
            let clamped = self.accumulate(v, player, phi, &excluded, with_grad, Some(&zero));
            for e in zero {
                out.values[e] = clamped.values[e];
                if with_grad {
                    out.d_factors[e] = clamped.d_factors[e].clone();
                    out.d_theta[e] = clamped.d_theta[e].clone();
                }
            }
        }
        out
    }

    fn accumulate(
        &self,
        v: usize,
        player: usize,
        phi: &[f64],
        excluded: &[bool],
        with_grad: bool,
        only: Option<&[usize]>,
    ) -> CondUtilities {
        let n = self.maid.nodes.len();
        let d = self.dim();
        let len = self.table_len(v);
        let mut wanted = vec![only.is_none(); len];
        if let Some(list) = only {
            for &e in list {
                wanted[e] = true;
            }
        }
        let mut num = vec![0.0; len];
        let mut den = vec![0.0; len];
        let gsize = if with_grad { self.n_factors } else { 0 };
        let mut dnum = vec![vec![0.0; gsize]; if with_grad { len } else { 0 }];
        let mut dden = dnum.clone();
        let mut dnum_theta = vec![vec![0.0; d]; if with_grad { len } else { 0 }];
        let util = &self.util[player];
        let dutil = self.utility_theta(player);
        let mut vals = vec![0.0; n];
        for x in 0..self.joint_size() {
            let e = self.entry(x, v);
            if !wanted[e] {
                continue;
            }
            for w in 0..n {
                vals[w] = phi[self.offsets[w] + self.entry(x, w)];
            }
            let pv: f64 = (0..n).filter(|&w| !excluded[w]).map(|w| vals[w]).product();
            num[e] += util[x] * pv;
            den[e] += pv;
            if with_grad {
                if let Some(du) = dutil {
                    for (g, h) in dnum_theta[e].iter_mut().zip(&du[x]) {
                        *g += h * pv;
                    }
                }
                for w in (0..n).filter(|&w| !excluded[w]) {
                    let rest: f64 = (0..n)
                        .filter(|&w2| !excluded[w2] && w2 != w)
                        .map(|w2| vals[w2])
                        .product();
                    let idx = self.offsets[w] + self.entry(x, w);
                    dnum[e][idx] += util[x] * rest;
                    dden[e][idx] += rest;
                }
            }
        }
        let mut values = vec![f64::NAN; len];
        let mut d_factors = Vec::new();
        let mut d_theta = Vec::new();
        for e in 0..len {
            let ok = den[e] > f64::MIN_POSITIVE;
            if ok {
                values[e] = num[e] / den[e];
            }
            if with_grad {
                let (df, dt) = if ok {
                    let val = values[e];
                    (
                        dnum[e]
                            .iter()
                            .zip(&dden[e])
                            .map(|(a, b)| (a - val * b) / den[e])
                            .collect(),
                        dnum_theta[e].iter().map(|a| a / den[e]).collect(),
                    )
                } else {
                    (vec![0.0; self.n_factors], vec![0.0; d])
                };
                d_factors.push(df);
                d_theta.push(dt);
            }
        }
        CondUtilities {
            values,
            d_factors,
            d_theta,
        }
    }
}

/// Joint distribution p(x_V) = ∏ CPDs × ∏ strategy rows.
pub fn joint_distribution(maid: &Maid, profile: &StrategyProfile, point: &ParamPoint) -> Result<JointTable> {
    profile.validate(maid)?;
    maid.check_point(point)?;
    Ok(Evaluator::new(maid, &point.theta).joint(profile))
}

/// Expected utility V_i = Σ_x p(x) u_i(x).
pub fn expected_utility(maid: &Maid, profile: &StrategyProfile, point: &ParamPoint, player: usize) -> Result<f64> {
    if player >= maid.players.len() {
        return Err(Error::UnknownPlayer(format!("#{player}")));
    }
    profile.validate(maid)?;
    maid.check_point(point)?;
    let ev = Evaluator::new(maid, &point.theta);
    Ok(ev.expected_utility_from_factors(&ev.factors(profile), player))
}

/// E(u_i | a_v, x_pa(v)) for one action and parent configuration.
pub fn conditional_expected_utility(
    maid: &Maid,
    profile: &StrategyProfile,
    point: &ParamPoint,
    player: usize,
    v: usize,
    action: usize,
    parent_states: &[usize],
) -> Result<f64> {
    if player >= maid.players.len() {
        return Err(Error::UnknownPlayer(format!("#{player}")));
    }
    let node = maid.nodes.get(v).ok_or_else(|| Error::UnknownNode(format!("#{v}")))?;
    if !node.is_decision() {
        return Err(Error::InvalidGame(format!("`{}` is not a decision node", node.name)));
    }
    if action >= node.states.len() {
        return Err(Error::InvalidAction(format!("{action} at `{}`", node.name)));
    }
    if parent_states.len() != node.parents.len()
        || parent_states
            .iter()
            .zip(&node.parents)
            .any(|(&s, &p)| s >= maid.nodes[p].states.len())
    {
        return Err(Error::InvalidAction(format!("parent configuration of `{}`", node.name)));
    }
    profile.validate(maid)?;
    maid.check_point(point)?;
    let ev = Evaluator::new(maid, &point.theta);
    let phi = ev.factors(profile);
    let cfg = parent_states
        .iter()
        .zip(&node.parents)
        .fold(0, |acc, (&s, &p)| acc * maid.nodes[p].states.len() + s);
    let cu = ev.cond_utilities(v, player, &phi, false);
    Ok(cu.values[cfg * node.states.len() + action])
}

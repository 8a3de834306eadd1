//! Multi-agent influence diagrams: chance and decision nodes on a DAG,
//! parameterized CPDs and per-player utility tables.
//!
//! Nodes are stored in topological order (stable with respect to the order
//! of declaration). CPD rows and utility tables are indexed row-major over
//! the parent set / scope in that same order, last node varying fastest.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::expr::{eval_row, parse_expr, Dual, Expr};

/// Largest joint state space handled by exhaustive enumeration.
pub const MAX_JOINT_STATES: u128 = 1 << 24;

const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Chance,
    /// Decision node owned by the player with this index.
    Decision(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    pub states: Vec<String>,
    /// Parent indices, ascending (hence in topological order).
    pub parents: Vec<usize>,
    /// One row per parent configuration; absent for decision nodes.
    pub cpd: Option<Vec<Vec<Expr>>>,
}

impl Node {
    pub fn is_decision(&self) -> bool {
        matches!(self.kind, NodeKind::Decision(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Player {
    pub name: String,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utility {
    pub player: usize,
    /// Node indices, ascending.
    pub scope: Vec<usize>,
    /// Dense over the scope's joint states, row-major.
    pub table: Vec<Expr>,
}

/// Names and box domain of the parameter vector θ.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    pub names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub default: Vec<f64>,
}

impl ParamSpace {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.min.iter().zip(&self.max).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// A point θ in parameter space together with the players' rationalities β.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint {
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ParamPoint {
    pub fn new(maid: &Maid, theta: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let p = ParamPoint { theta, beta };
        maid.check_point(&p)?;
        Ok(p)
    }

    pub fn with_theta(&self, k: usize, value: f64) -> Self {
        let mut p = self.clone();
        p.theta[k] = value;
        p
    }
}

/// Behavioural strategies σ(a_v | x_pa(v)) for every decision node.
///
/// `tables[j]` belongs to the j-th decision node (in topological order) and is
/// laid out `[parent_config * n_actions + action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    pub tables: Vec<Vec<f64>>,
}

impl StrategyProfile {
    pub fn uniform(maid: &Maid) -> Self {
        let tables = maid
            .decision_nodes()
            .iter()
            .map(|&v| {
                let n = maid.nodes[v].states.len();
                vec![1.0 / n as f64; n * maid.parent_configs(v)]
            })
            .collect();
        StrategyProfile { tables }
    }

    /// Flattened profile, decision nodes in order.
    pub fn flat(&self) -> Vec<f64> {
        self.tables.iter().flatten().copied().collect()
    }

    pub fn from_flat(maid: &Maid, flat: &[f64]) -> Self {
        let mut tables = Vec::new();
        let mut off = 0;
        for &v in &maid.decision_nodes() {
            let len = maid.nodes[v].states.len() * maid.parent_configs(v);
            tables.push(flat[off..off + len].to_vec());
            off += len;
        }
        StrategyProfile { tables }
    }

    /// L∞ distance between two profiles of the same game.
    pub fn distance(&self, other: &StrategyProfile) -> f64 {
        self.tables
            .iter()
            .flatten()
            .zip(other.tables.iter().flatten())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Rescale every row to sum to one.
    pub fn renormalize(&mut self, maid: &Maid) {
        for (t, &v) in self.tables.iter_mut().zip(&maid.decision_nodes()) {
            let n = maid.nodes[v].states.len();
            for row in t.chunks_mut(n) {
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= s);
            }
        }
    }

    pub fn validate(&self, maid: &Maid) -> Result<()> {
        let dec = maid.decision_nodes();
        if self.tables.len() != dec.len() {
            return Err(Error::DimensionMismatch(format!(
                "profile has {} tables, game has {} decision nodes",
                self.tables.len(),
                dec.len()
            )));
        }
        for (t, &v) in self.tables.iter().zip(&dec) {
            let n = maid.nodes[v].states.len();
            if t.len() != n * maid.parent_configs(v) {
                return Err(Error::DimensionMismatch(format!(
                    "strategy table for `{}` has {} entries, expected {}",
                    maid.nodes[v].name,
                    t.len(),
                    n * maid.parent_configs(v)
                )));
            }
            for row in t.chunks(n) {
                let s: f64 = row.iter().sum();
                if row.iter().any(|x| *x < 0.0) || (s - 1.0).abs() > ROW_TOL {
                    return Err(Error::DimensionMismatch(format!(
                        "strategy row for `{}` is not a distribution",
                        maid.nodes[v].name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maid {
    pub nodes: Vec<Node>,
    pub players: Vec<Player>,
    pub utilities: Vec<Utility>,
    pub params: ParamSpace,
}

impl Maid {
    pub fn node_index(&self, name: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn player_index(&self, name: &str) -> Result<usize> {
        self.players
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::UnknownPlayer(name.to_string()))
    }

    pub fn decision_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&v| self.nodes[v].is_decision()).collect()
    }

    pub fn radices(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.states.len()).collect()
    }

    pub fn parent_configs(&self, v: usize) -> usize {
        self.nodes[v]
            .parents
            .iter()
            .map(|&p| self.nodes[p].states.len())
            .product()
    }

    pub fn joint_size(&self) -> usize {
        self.nodes.iter().map(|n| n.states.len()).product()
    }

    /// Default parameter point: θ at its declared defaults, β as declared.
    pub fn default_point(&self) -> ParamPoint {
        ParamPoint {
            theta: self.params.default.clone(),
            beta: self.players.iter().map(|p| p.beta).collect(),
        }
    }

    pub fn check_point(&self, p: &ParamPoint) -> Result<()> {
        if p.theta.len() != self.params.dim() {
            return Err(Error::DimensionMismatch(format!(
                "theta has {} components, game declares {}",
                p.theta.len(),
                self.params.dim()
            )));
        }
        if p.beta.len() != self.players.len() {
            return Err(Error::DimensionMismatch(format!(
                "beta has {} components, game has {} players",
                p.beta.len(),
                self.players.len()
            )));
        }
        for (k, &t) in p.theta.iter().enumerate() {
            let (lo, hi) = (self.params.min[k], self.params.max[k]);
            if !(lo..=hi).contains(&t) {
                return Err(Error::OutOfDomain {
                    name: self.params.names[k].clone(),
                    value: t,
                    min: lo,
                    max: hi,
                });
            }
        }
        if p.beta.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
            return Err(Error::InvalidOption("beta must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// Index of the parent configuration of `v` within a full joint state.
    pub fn parent_config_of(&self, v: usize, states: &[usize]) -> usize {
        self.nodes[v]
            .parents
            .iter()
            .fold(0, |acc, &p| acc * self.nodes[p].states.len() + states[p])
    }

    /// Decode a parent configuration index into per-parent states.
    pub fn decode_parent_config(&self, v: usize, mut cfg: usize) -> Vec<usize> {
        let parents = &self.nodes[v].parents;
        let mut out = vec![0; parents.len()];
        for (slot, &p) in parents.iter().enumerate().rev() {
            let r = self.nodes[p].states.len();
            out[slot] = cfg % r;
            cfg /= r;
        }
        out
    }

    /// Evaluated CPD table of chance node `v` with exact θ-derivatives,
    /// laid out `[parent_config * n_states + state]`.
    pub fn cpd_table(&self, v: usize, theta: &[f64]) -> Vec<Dual> {
        let cpd = self.nodes[v].cpd.as_ref().expect("cpd_table called on a decision node");
        cpd.iter().flat_map(|row| eval_row(row, theta)).collect()
    }

    /// Index into a utility table for a full joint state.
    pub fn utility_index(&self, u: &Utility, states: &[usize]) -> usize {
        u.scope
            .iter()
            .fold(0, |acc, &v| acc * self.nodes[v].states.len() + states[v])
    }

    fn validate(&self) -> Result<()> {
        if self.params.dim() == 0 {
            return Err(Error::InvalidGame("at least one theta parameter is required".into()));
        }
        for k in 0..self.params.dim() {
            let (lo, hi, d) = (self.params.min[k], self.params.max[k], self.params.default[k]);
            if !(lo <= hi) || !(lo..=hi).contains(&d) {
                return Err(Error::OutOfDomain {
                    name: self.params.names[k].clone(),
                    value: d,
                    min: lo,
                    max: hi,
                });
            }
        }
        let size: u128 = self.nodes.iter().map(|n| n.states.len() as u128).product();
        if size > MAX_JOINT_STATES {
            return Err(Error::StateSpaceTooLarge(size));
        }
        for node in &self.nodes {
            if node.states.is_empty() {
                return Err(Error::InvalidGame(format!("node `{}` has no states", node.name)));
            }
        }
        for (v, node) in self.nodes.iter().enumerate() {
            let configs = self.parent_configs(v);
            match (&node.kind, &node.cpd) {
                (NodeKind::Decision(i), None) => {
                    if *i >= self.players.len() {
                        return Err(Error::UnknownPlayer(format!("#{i}")));
                    }
                }
                (NodeKind::Decision(_), Some(_)) => {
                    return Err(Error::InvalidGame(format!(
                        "decision node `{}` must not declare a CPD",
                        node.name
                    )))
                }
                (NodeKind::Chance, None) => {
                    return Err(Error::InvalidGame(format!("chance node `{}` lacks a CPD", node.name)))
                }
                (NodeKind::Chance, Some(rows)) => {
                    if rows.len() != configs {
                        return Err(Error::InvalidGame(format!(
                            "CPD of `{}` has {} rows, expected {}",
                            node.name,
                            rows.len(),
                            configs
                        )));
                    }
                    for (r, row) in rows.iter().enumerate() {
                        if row.len() != node.states.len() {
                            return Err(Error::InvalidGame(format!(
                                "CPD row {r} of `{}` has {} entries, expected {}",
                                node.name,
                                row.len(),
                                node.states.len()
                            )));
                        }
                        if row.iter().filter(|e| e.is_residual()).count() > 1 {
                            return Err(Error::InvalidGame(format!(
                                "CPD row {r} of `{}` has more than one residual marker",
                                node.name
                            )));
                        }
                    }
                    for theta in [self.params.midpoint(), self.params.default.clone()] {
                        self.check_rows(v, rows, &theta)?;
                    }
                }
            }
        }
        for u in &self.utilities {
            let want: usize = u.scope.iter().map(|&v| self.nodes[v].states.len()).product();
            if u.table.len() != want {
                return Err(Error::InvalidGame(format!(
                    "utility table for `{}` has {} entries, expected {}",
                    self.players[u.player].name,
                    u.table.len(),
                    want
                )));
            }
            if u.table.iter().any(Expr::is_residual) {
                return Err(Error::InvalidGame("residual marker inside a utility table".into()));
            }
        }
        Ok(())
    }

    fn check_rows(&self, v: usize, rows: &[Vec<Expr>], theta: &[f64]) -> Result<()> {
        for (r, row) in rows.iter().enumerate() {
            let vals = eval_row(row, theta);
            let sum: f64 = vals.iter().map(|d| d.value).sum();
            let bad = vals
                .iter()
                .any(|d| !d.value.is_finite() || d.value < -ROW_TOL || d.value > 1.0 + ROW_TOL);
            if bad || (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::NonNormalizing {
                    node: self.nodes[v].name.clone(),
                    row: r,
                    detail: format!(
                        "entries {:?} at theta {:?}",
                        vals.iter().map(|d| d.value).collect::<Vec<_>>(),
                        theta
                    ),
                });
            }
        }
        Ok(())
    }

    /// Check every CPD row at an arbitrary θ (e.g. before evaluating there).
    pub fn check_cpds_at(&self, theta: &[f64]) -> Result<()> {
        for (v, node) in self.nodes.iter().enumerate() {
            if let Some(rows) = &node.cpd {
                self.check_rows(v, rows, theta)?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Document format
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaDoc {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub default: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerDoc {
    pub id: String,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: String,
    /// `"chance"` or `"decision"`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player: Option<String>,
    pub states: Vec<String>,
    /// CPD rows; each entry is a number or an expression string.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpd: Option<Vec<Vec<Value>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityDoc {
    pub player: String,
    pub scope: Vec<String>,
    pub table: Vec<Value>,
}

/// Wire format of a MAID document (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaidDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub theta: Vec<ThetaDoc>,
    pub players: Vec<PlayerDoc>,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<(String, String)>,
    pub utilities: Vec<UtilityDoc>,
}

impl MaidDocument {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}

fn entry_expr(v: &Value, names: &[String]) -> Result<Expr> {
    match v {
        Value::Number(n) => Ok(Expr::Num(n.as_f64().unwrap_or(f64::NAN))),
        Value::String(s) => parse_expr(s, names),
        other => Err(Error::Syntax {
            position: 0,
            message: format!("expected number or expression string, found {other}"),
        }),
    }
}

fn expr_entry(e: &Expr, names: &[String]) -> Value {
    match e {
        Expr::Num(v) => serde_json::Number::from_f64(*v)
            .map(Value::Number)
            .unwrap_or_else(|| Value::String(e.render(names))),
        _ => Value::String(e.render(names)),
    }
}

/// Parse a MAID document from JSON text and validate it.
pub fn parse_maid(text: &str) -> Result<Maid> {
    let doc: MaidDocument = serde_json::from_str(text).map_err(|e| Error::Syntax {
        position: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    Maid::from_document(&doc)
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    text.split_inclusive('\n').take(line - 1).map(str::len).sum::<usize>() + column.saturating_sub(1)
}

impl Maid {
    pub fn from_document(doc: &MaidDocument) -> Result<Maid> {
        let names: Vec<String> = doc.theta.iter().map(|t| t.name.clone()).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::InvalidGame(format!("duplicate theta `{n}`")));
            }
        }
        let params = ParamSpace {
            names: names.clone(),
            min: doc.theta.iter().map(|t| t.min).collect(),
            max: doc.theta.iter().map(|t| t.max).collect(),
            default: doc.theta.iter().map(|t| t.default).collect(),
        };
        let players: Vec<Player> = doc
            .players
            .iter()
            .map(|p| Player {
                name: p.id.clone(),
                beta: p.beta,
            })
            .collect();
        if players.iter().any(|p| !(p.beta >= 0.0)) {
            return Err(Error::InvalidGame("player rationality must be nonnegative".into()));
        }

        let n = doc.nodes.len();
        let decl_index = |name: &str| -> Result<usize> {
            doc.nodes
                .iter()
                .position(|nd| nd.id == name)
                .ok_or_else(|| Error::UnknownNode(name.to_string()))
        };
        for (i, nd) in doc.nodes.iter().enumerate() {
            if doc.nodes[..i].iter().any(|o| o.id == nd.id) {
                return Err(Error::InvalidGame(format!("duplicate node `{}`", nd.id)));
            }
        }
        let mut parents_decl: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, b) in &doc.edges {
            let (ia, ib) = (decl_index(a)?, decl_index(b)?);
            if ia == ib {
                return Err(Error::Cycle(a.clone()));
            }
            if !parents_decl[ib].contains(&ia) {
                parents_decl[ib].push(ia);
            }
        }

        // Stable Kahn: always take the earliest-declared available node.
        let mut indeg: Vec<usize> = parents_decl.iter().map(Vec::len).collect();
        let mut order = Vec::with_capacity(n);
        let mut done = vec![false; n];
        while order.len() < n {
            let next = (0..n).find(|&i| !done[i] && indeg[i] == 0);
            let Some(i) = next else {
                let stuck = (0..n).find(|&i| !done[i]).unwrap();
                return Err(Error::Cycle(doc.nodes[stuck].id.clone()));
            };
            done[i] = true;
            order.push(i);
            for (j, ps) in parents_decl.iter().enumerate() {
                if ps.contains(&i) {
                    indeg[j] -= 1;
                }
            }
        }
        let mut topo_pos = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            topo_pos[i] = pos;
        }

        let mut nodes = Vec::with_capacity(n);
        for &i in &order {
            let nd = &doc.nodes[i];
            let mut parents: Vec<usize> = parents_decl[i].iter().map(|&p| topo_pos[p]).collect();
            parents.sort_unstable();
            let kind = match nd.kind.as_str() {
                "chance" => NodeKind::Chance,
                "decision" => {
                    let pname = nd
                        .player
                        .as_deref()
                        .ok_or_else(|| Error::InvalidGame(format!("decision node `{}` has no player", nd.id)))?;
                    let pi = players
                        .iter()
                        .position(|p| p.name == pname)
                        .ok_or_else(|| Error::UnknownPlayer(pname.to_string()))?;
                    NodeKind::Decision(pi)
                }
                other => {
                    return Err(Error::InvalidGame(format!(
                        "node `{}` has unknown kind `{other}`",
                        nd.id
                    )))
                }
            };
            if kind == NodeKind::Chance && nd.player.is_some() {
                return Err(Error::InvalidGame(format!("chance node `{}` names a player", nd.id)));
            }
            let cpd = match &nd.cpd {
                None => None,
                Some(rows) => Some(
                    rows.iter()
                        .map(|row| row.iter().map(|e| entry_expr(e, &names)).collect())
                        .collect::<Result<Vec<Vec<Expr>>>>()?,
                ),
            };
            nodes.push(Node {
                name: nd.id.clone(),
                kind,
                states: nd.states.clone(),
                parents,
                cpd,
            });
        }

        let mut utilities = Vec::new();
        for u in &doc.utilities {
            let player = players
                .iter()
                .position(|p| p.name == u.player)
                .ok_or_else(|| Error::UnknownPlayer(u.player.clone()))?;
            let mut scope = Vec::new();
            for s in &u.scope {
                let idx = topo_pos[decl_index(s)?];
                if scope.contains(&idx) {
                    return Err(Error::InvalidGame(format!("node `{s}` repeated in utility scope")));
                }
                scope.push(idx);
            }
            let mut sorted = scope.clone();
            sorted.sort_unstable();
            if sorted != scope {
                return Err(Error::InvalidGame(format!(
                    "utility scope for `{}` must list nodes in topological order",
                    u.player
                )));
            }
            let table = u
                .table
                .iter()
                .map(|e| entry_expr(e, &names))
                .collect::<Result<Vec<_>>>()?;
            utilities.push(Utility { player, scope, table });
        }

        let maid = Maid {
            nodes,
            players,
            utilities,
            params,
        };
        maid.validate()?;
        Ok(maid)
    }

    pub fn to_document(&self) -> MaidDocument {
        let names = &self.params.names;
        let theta = (0..self.params.dim())
            .map(|k| ThetaDoc {
                name: names[k].clone(),
                min: self.params.min[k],
                max: self.params.max[k],
                default: self.params.default[k],
            })
            .collect();
        let players = self
            .players
            .iter()
            .map(|p| PlayerDoc {
                id: p.name.clone(),
                beta: p.beta,
            })
            .collect();
        let nodes = self
            .nodes
            .iter()
            .map(|nd| NodeDoc {
                id: nd.name.clone(),
                kind: if nd.is_decision() { "decision" } else { "chance" }.into(),
                player: match nd.kind {
                    NodeKind::Decision(i) => Some(self.players[i].name.clone()),
                    NodeKind::Chance => None,
                },
                states: nd.states.clone(),
                cpd: nd.cpd.as_ref().map(|rows| {
                    rows.iter()
                        .map(|row| row.iter().map(|e| expr_entry(e, names)).collect())
                        .collect()
                }),
            })
            .collect();
        let edges = self
            .nodes
            .iter()
            .flat_map(|nd| {
                nd.parents
                    .iter()
                    .map(|&p| (self.nodes[p].name.clone(), nd.name.clone()))
                    .collect::<Vec<_>>()
            })
            .collect();
        let utilities = self
            .utilities
            .iter()
            .map(|u| UtilityDoc {
                player: self.players[u.player].name.clone(),
                scope: u.scope.iter().map(|&v| self.nodes[v].name.clone()).collect(),
                table: u.table.iter().map(|e| expr_entry(e, names)).collect(),
            })
            .collect();
        MaidDocument {
            description: None,
            theta,
            players,
            nodes,
            edges,
            utilities,
        }
    }

    /// Serialize as pretty-printed JSON (trailing newline included).
    pub fn to_json(&self) -> String {
        self.to_document().to_json()
    }
}

//! Entropy, mutual information, channel capacity and the Blackwell garbling
//! order. All quantities are in nats; convert with [`Units`].

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::inference::{for_each_state, JointTable};
use crate::lp::{Cmp, Lp};
use crate::maid::Maid;

const STOCHASTIC_TOL: f64 = 1e-12;
const GARBLING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Units {
    #[default]
    Bits,
    Nats,
}

impl Units {
    /// Convert a value given in nats.
    pub fn from_nats(self, v: f64) -> f64 {
        match self {
            Units::Bits => v / std::f64::consts::LN_2,
            Units::Nats => v,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Units::Bits => "bits",
            Units::Nats => "nats",
        }
    }
}

impl FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bits" => Ok(Units::Bits),
            "nats" => Ok(Units::Nats),
            _ => Err(Error::InvalidOption(format!("unknown units `{s}`"))),
        }
    }
}

/// −Σ p ln p with 0 ln 0 = 0.
pub fn entropy(dist: &[f64]) -> f64 {
    -dist.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

fn binary_entropy(p: f64) -> f64 {
    entropy(&[p, 1.0 - p])
}

fn check_sets(j: &JointTable, a: &[usize], b: &[usize]) -> Result<()> {
    if a.iter().any(|x| b.contains(x)) {
        return Err(Error::OverlappingSets);
    }
    if a.iter().chain(b).any(|&v| v >= j.radices.len()) {
        return Err(Error::UnknownNode("node index out of range".into()));
    }
    Ok(())
}

/// I(A;B) = Σ p(a,b) ln[p(a,b) / (p(a) p(b))].
pub fn mutual_information(j: &JointTable, a: &[usize], b: &[usize]) -> Result<f64> {
    check_sets(j, a, b)?;
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    let pab = j.marginal(&ab);
    let pa = j.marginal(a);
    let pb = j.marginal(b);
    let nb = pb.len();
    let mut mi = 0.0;
    for (idx, &p) in pab.iter().enumerate() {
        if p > 0.0 {
            mi += p * (p / (pa[idx / nb] * pb[idx % nb])).ln();
        }
    }
    Ok(mi.max(0.0))
}

/// ∂I(A;B)/∂p(x) for every joint entry, treating the table entries as free
/// coordinates. Entries with p(a,b) = 0 contribute zero.
pub fn mutual_information_table_gradient(j: &JointTable, a: &[usize], b: &[usize]) -> Result<Vec<f64>> {
    check_sets(j, a, b)?;
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    let pab = j.marginal(&ab);
    let pa = j.marginal(a);
    let pb = j.marginal(b);
    let mut out = vec![0.0; j.probs.len()];
    for_each_state(&j.radices, |idx, states| {
        let ia = j.sub_index(a, states);
        let ib = j.sub_index(b, states);
        let iab = j.sub_index(&ab, states);
        if pab[iab] > 0.0 {
            out[idx] = pab[iab].ln() - pa[ia].ln() - pb[ib].ln() - 1.0;
        }
    });
    Ok(out)
}

/// Stochastic matrix p(y|x): rows are inputs, columns outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    rows: Vec<Vec<f64>>,
}

impl Channel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_out = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || n_out == 0 {
            return Err(Error::NotStochastic("empty channel".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_out {
                return Err(Error::NotStochastic(format!("row {i} has wrong length")));
            }
            let s: f64 = r.iter().sum();
            if r.iter().any(|x| !(*x >= 0.0)) || (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NotStochastic(format!("row {i} = {r:?}")));
            }
        }
        Ok(Channel { rows })
    }

    /// Binary asymmetric channel with error ε1 on input 0 and ε2 on input 1.
    pub fn bac(b: BacParams) -> Result<Self> {
        Channel::new(vec![vec![1.0 - b.eps1, b.eps1], vec![b.eps2, 1.0 - b.eps2]])
    }

    /// CPD of a chance node with exactly one parent, read as a channel from
    /// the parent's states to the node's states.
    pub fn from_node(maid: &Maid, v: usize, theta: &[f64]) -> Result<Self> {
        let node = &maid.nodes[v];
        if node.is_decision() || node.parents.len() != 1 {
            return Err(Error::InvalidGame(format!(
                "`{}` is not a chance node with a single parent",
                node.name
            )));
        }
        let n = node.states.len();
        let t = maid.cpd_table(v, theta);
        Channel::new(t.chunks(n).map(|r| r.iter().map(|d| d.value).collect()).collect())
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.rows[0].len()
    }

    /// Output distribution for an input distribution.
    pub fn output(&self, input: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.n_outputs()];
        for (r, &px) in self.rows.iter().zip(input) {
            for (qy, w) in q.iter_mut().zip(r) {
                *qy += px * w;
            }
        }
        q
    }

    /// I(X;Y) for the given input distribution.
    pub fn mutual_information(&self, input: &[f64]) -> f64 {
        let q = self.output(input);
        let mut mi = 0.0;
        for (r, &px) in self.rows.iter().zip(input) {
            for (w, qy) in r.iter().zip(&q) {
                if px > 0.0 && *w > 0.0 {
                    mi += px * w * (w / qy).ln();
                }
            }
        }
        mi.max(0.0)
    }

    /// Composition p·G.
    pub fn compose(&self, g: &Channel) -> Result<Channel> {
        if g.n_inputs() != self.n_outputs() {
            return Err(Error::DimensionMismatch("garbling shape".into()));
        }
        let rows = self.rows.iter().map(|r| g.output(r)).collect::<Vec<_>>();
        Channel::new(rows)
    }
}

/// Transmission errors of a binary asymmetric channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacParams {
    pub eps1: f64,
    pub eps2: f64,
}

fn check_unit(b: BacParams) -> Result<()> {
    if !(0.0..=1.0).contains(&b.eps1) || !(0.0..=1.0).contains(&b.eps2) {
        return Err(Error::Boundary(format!("BAC parameters {b:?} outside [0,1]")));
    }
    Ok(())
}

/// Closed-form capacity (nats) of the binary asymmetric channel.
///
/// For an invertible square channel with interior optimal input,
/// C = ln Σ_y exp(−Σ_x W⁻¹_yx H(W_x)); binary channels always have an
/// interior optimum, and a singular channel (ε1 + ε2 = 1) has capacity 0.
pub fn bac_capacity(b: BacParams) -> Result<f64> {
    check_unit(b)?;
    let (a, c) = (b.eps1, b.eps2);
    let det = 1.0 - a - c;
    if det.abs() < 1e-15 {
        return Ok(0.0);
    }
    let (ha, hc) = (binary_entropy(a), binary_entropy(c));
    let d0 = ((1.0 - c) * ha - a * hc) / det;
    let d1 = ((1.0 - a) * hc - c * ha) / det;
    let m = (-d0).max(-d1);
    Ok((m + ((-d0 - m).exp() + (-d1 - m).exp()).ln()).max(0.0))
}

/// ∇C with respect to (ε1, ε2), in nats per unit error probability.
pub fn bac_capacity_gradient(b: BacParams) -> Result<[f64; 2]> {
    check_unit(b)?;
    let (a, c) = (b.eps1, b.eps2);
    if a <= 0.0 || a >= 1.0 || c <= 0.0 || c >= 1.0 {
        return Err(Error::Boundary(format!("capacity gradient at {b:?}")));
    }
    let det = 1.0 - a - c;
    if det.abs() < 1e-12 {
        return Err(Error::Boundary("singular channel (eps1 + eps2 = 1)".into()));
    }
    let (ha, hc) = (binary_entropy(a), binary_entropy(c));
    let (dha, dhc) = (((1.0 - a) / a).ln(), ((1.0 - c) / c).ln());
    let n0 = (1.0 - c) * ha - a * hc;
    let n1 = (1.0 - a) * hc - c * ha;
    let (d0, d1) = (n0 / det, n1 / det);
    // ∂D/∂a = ∂D/∂c = −1, so ∂(N/D) = (N' D + N) / D².
    let quot = |dn: f64, n: f64| (dn * det + n) / (det * det);
    let dd0 = [quot((1.0 - c) * dha - hc, n0), quot(-ha - a * dhc, n0)];
    let dd1 = [quot(-hc - c * dha, n1), quot((1.0 - a) * dhc - ha, n1)];
    let m = (-d0).max(-d1);
    let (e0, e1) = ((-d0 - m).exp(), (-d1 - m).exp());
    let (q0, q1) = (e0 / (e0 + e1), e1 / (e0 + e1));
    Ok([-q0 * dd0[0] - q1 * dd1[0], -q0 * dd0[1] - q1 * dd1[1]])
}

/// Result of the Blahut–Arimoto iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    /// Upper end of the final capacity bracket (nats).
    pub capacity: f64,
    pub lower_bound: f64,
    pub input: Vec<f64>,
    pub iterations: usize,
}

const BA_MAX_ITER: usize = 10_000;

/// Blahut–Arimoto from the uniform input, stopping when the bracket
/// `max_x D(W_x‖q) − ln Σ_x r_x exp D(W_x‖q)` drops below `tol`.
pub fn capacity_numeric(c: &Channel, tol: f64) -> Result<CapacityResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidOption("tol must be positive".into()));
    }
    let n = c.n_inputs();
    let mut r = vec![1.0 / n as f64; n];
    let mut it = 0;
    loop {
        let q = c.output(&r);
        let div: Vec<f64> = c
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&q)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, qy)| w * (w / qy).ln())
                    .sum::<f64>()
            })
            .collect();
        let m = div.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = r.iter().zip(&div).map(|(ri, d)| ri * (d - m).exp()).collect();
        let z: f64 = weights.iter().sum();
        let lower = m + z.ln();
        let upper = m;
        it += 1;
        if upper - lower < tol || it >= BA_MAX_ITER {
            if upper - lower >= tol {
                return Err(Error::NonConvergence(format!(
                    "Blahut-Arimoto bracket {:.3e} after {it} iterations",
                    upper - lower
                )));
            }
            return Ok(CapacityResult {
                capacity: upper.max(0.0),
                lower_bound: lower.max(0.0),
                input: r,
                iterations: it,
            });
        }
        r = weights.iter().map(|w| w / z).collect();
    }
}

/// ∂C/∂W_xy by the envelope theorem at the optimal input: r*_x ln(W_xy / q*_y).
pub fn capacity_channel_gradient(c: &Channel, tol: f64) -> Result<Vec<Vec<f64>>> {
    let res = capacity_numeric(c, tol)?;
    let q = c.output(&res.input);
    Ok(c.rows
        .iter()
        .zip(&res.input)
        .map(|(row, rx)| {
            row.iter()
                .zip(&q)
                .map(|(w, qy)| if *w > 0.0 { rx * (w / qy).ln() } else { 0.0 })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GarblingOrder {
    MoreInformative,
    LessInformative,
    Incomparable,
    Equivalent,
}

/// Smallest achievable L∞ gap ‖p·G − q‖ over stochastic G.
fn garbling_gap(p: &Channel, q: &Channel) -> Result<f64> {
    let (n_in, n_mid, n_out) = (p.n_inputs(), p.n_outputs(), q.n_outputs());
    let mut lp = Lp::minimize();
    let g: Vec<Vec<usize>> = (0..n_mid)
        .map(|_| (0..n_out).map(|_| lp.var(0.0, 0.0, 1.0)).collect())
        .collect();
    let t = lp.var(1.0, 0.0, f64::INFINITY);
    for row in &g {
        lp.constraint(row.iter().map(|&v| (v, 1.0)).collect(), Cmp::Eq, 1.0);
    }
    for i in 0..n_in {
        for k in 0..n_out {
            let mut terms: Vec<(usize, f64)> = g.iter().zip(&p.rows[i]).map(|(gj, &pij)| (gj[k], pij)).collect();
            terms.push((t, -1.0));
            lp.constraint(terms.clone(), Cmp::Le, q.rows[i][k]);
            terms.last_mut().unwrap().1 = 1.0;
            lp.constraint(terms, Cmp::Ge, q.rows[i][k]);
        }
    }
    let (gap, _) = lp
        .solve()?
        .ok_or_else(|| Error::Lp("garbling LP unexpectedly infeasible".into()))?;
    Ok(gap)
}

/// Whether `q` is a garbling of `p` (q = p·G for some stochastic G).
pub fn is_garbling_of(q: &Channel, p: &Channel) -> Result<bool> {
    if p.n_inputs() != q.n_inputs() {
        return Err(Error::DimensionMismatch(
            "channels have different input alphabets".into(),
        ));
    }
    Ok(garbling_gap(p, q)? <= GARBLING_TOL)
}

/// Blackwell order of `p` relative to `q`.
pub fn garbling_order(p: &Channel, q: &Channel) -> Result<GarblingOrder> {
    let p_dominates = is_garbling_of(q, p)?;
    let q_dominates = is_garbling_of(p, q)?;
    Ok(match (p_dominates, q_dominates) {
        (true, true) => GarblingOrder::Equivalent,
        (true, false) => GarblingOrder::MoreInformative,
        (false, true) => GarblingOrder::LessInformative,
        (false, false) => GarblingOrder::Incomparable,
    })
}

/// Best expected utility over deterministic decision rules y → a, by
/// enumerating all |A|^|Y| rules. `utility[x][a]`.
pub fn rational_decision_value(c: &Channel, prior: &[f64], utility: &[Vec<f64>]) -> f64 {
    let n_a = utility[0].len();
    let n_y = c.n_outputs();
    let total = n_a.pow(n_y as u32);
    let mut best = f64::NEG_INFINITY;
    for code in 0..total {
        let mut rule = vec![0; n_y];
        let mut rest = code;
        for slot in rule.iter_mut() {
            *slot = rest % n_a;
            rest /= n_a;
        }
        let mut v = 0.0;
        for (x, row) in c.rows.iter().enumerate() {
            for (y, w) in row.iter().enumerate() {
                v += prior[x] * w * utility[x][rule[y]];
            }
        }
        best = best.max(v);
    }
    best
}

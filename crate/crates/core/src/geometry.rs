//! Parameter-space geometry: metrics, differential values, and the cone
//! tests that decide whether negative-value directions exist.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::Evaluator;
use crate::lp::{Cmp, Lp};
use crate::maid::Maid;
use crate::qre::Equilibrium;
use crate::sensitivity::strategy_derivatives;

/// Strict inequalities hold with at least this margin after normalization.
pub const MARGIN: f64 = 1e-9;
const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const RIDGE: f64 = 1e-10;
const COLLINEAR_TOL: f64 = 1e-10;
const UNDEFINED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FisherFamily {
    /// Joint distribution including the equilibrium response dσ/dθ.
    #[default]
    Total,
    /// Strategies frozen; only chance CPDs move.
    ChannelOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Euclidean,
    Fisher(FisherFamily),
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub kind: MetricKind,
    pub matrix: DMatrix<f64>,
    /// Added to the diagonal before inversion.
    pub ridge: f64,
}

impl Metric {
    pub fn euclidean(d: usize) -> Self {
        Metric {
            kind: MetricKind::Euclidean,
            matrix: DMatrix::identity(d, d),
            ridge: 0.0,
        }
    }

    /// Symmetric PSD matrix with the default ridge.
    pub fn explicit(matrix: DMatrix<f64>) -> Result<Self> {
        Metric::checked(MetricKind::Explicit, matrix)
    }

    fn checked(kind: MetricKind, matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch("metric must be square".into()));
        }
        let d = matrix.nrows();
        let scale = matrix.amax().max(1.0);
        for i in 0..d {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidOption("metric is not symmetric".into()));
                }
            }
        }
        let min_eig = matrix.clone().symmetric_eigenvalues().min();
        if min_eig < -PSD_TOL * scale {
            return Err(Error::InvalidOption(format!("metric has eigenvalue {min_eig:.3e}")));
        }
        let trace = matrix.trace();
        let ridge = if trace > 0.0 { RIDGE * trace / d as f64 } else { RIDGE };
        Ok(Metric { kind, matrix, ridge })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn regularized(&self) -> DMatrix<f64> {
        &self.matrix + DMatrix::identity(self.dim(), self.dim()) * self.ridge
    }

    /// Squared length δᵀ g δ of a tangent vector.
    pub fn norm_squared(&self, delta: &[f64]) -> Result<f64> {
        let v = self.vector(delta)?;
        Ok(v.dot(&(&self.matrix * &v)))
    }

    /// g⁻¹ c: the gradient vector of a covector.
    pub fn raise(&self, covector: &[f64]) -> Result<Vec<f64>> {
        let c = self.vector(covector)?;
        let chol = self
            .regularized()
            .cholesky()
            .ok_or_else(|| Error::InvalidOption("metric is not positive definite".into()))?;
        Ok(chol.solve(&c).iter().copied().collect())
    }

    fn vector(&self, v: &[f64]) -> Result<DVector<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for a {}-dimensional metric",
                v.len(),
                self.dim()
            )));
        }
        Ok(DVector::from_column_slice(v))
    }
}

/// g_kl = Σ_x ∂_k p(x) ∂_l p(x) / p(x) over the equilibrium joint distribution.
pub fn fisher_metric(maid: &Maid, e: &Equilibrium, family: FisherFamily) -> Result<Metric> {
    let ev = Evaluator::new(maid, &e.point.theta);
    let phi = ev.factors(&e.profile);
    let dsigma = match family {
        FisherFamily::Total => Some(strategy_derivatives(maid, e)?.dsigma_rows()),
        FisherFamily::ChannelOnly => None,
    };
    let dphi = ev.factor_theta_jacobian(dsigma.as_deref());
    let dp = ev.joint_theta_derivative(&phi, &dphi);
    let j = ev.joint_from_factors(&phi);
    let d = ev.dim();
    let mut g = DMatrix::zeros(d, d);
    for (x, p) in j.probs.iter().enumerate() {
        let grad = &dp[x];
        if *p <= 0.0 {
            if grad.iter().any(|v| *v != 0.0) {
                return Err(Error::Boundary(format!("joint state {x} has zero probability")));
            }
            continue;
        }
        for k in 0..d {
            for l in 0..=k {
                g[(k, l)] += grad[k] * grad[l] / p;
            }
        }
    }
    for k in 0..d {
        for l in 0..k {
            g[(l, k)] = g[(k, l)];
        }
    }
    Metric::checked(MetricKind::Fisher(family), g)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn unit(a: &[f64]) -> Result<Vec<f64>> {
    let n = norm(a);
    if !(n > 0.0) {
        return Err(Error::ZeroVector("zero vector".into()));
    }
    Ok(a.iter().map(|x| x / n).collect())
}

fn same_dim(vs: &[&[f64]]) -> Result<usize> {
    let d = vs[0].len();
    if vs.iter().any(|v| v.len() != d) {
        return Err(Error::DimensionMismatch("vectors of different length".into()));
    }
    Ok(d)
}

/// ⟨∂V, δ⟩ / ‖δ‖_g.
pub fn value_of_direction(grad_v: &[f64], delta: &[f64], g: &Metric) -> Result<f64> {
    same_dim(&[grad_v, delta])?;
    let n2 = g.norm_squared(delta)?;
    if !(n2 > 0.0) {
        return Err(Error::ZeroVector("direction".into()));
    }
    Ok(dot(grad_v, delta) / n2.sqrt())
}

/// ⟨∂V, δ⟩ / ⟨∂f, δ⟩.
pub fn value_of_f_in_direction(grad_v: &[f64], grad_f: &[f64], delta: &[f64]) -> Result<f64> {
    same_dim(&[grad_v, grad_f, delta])?;
    let den = dot(grad_f, delta);
    if den.abs() < UNDEFINED_TOL {
        return Err(Error::Undefined("direction is tangent to the level set of f".into()));
    }
    Ok(dot(grad_v, delta) / den)
}

/// ⟨grad V, grad f⟩_g / ‖grad f‖²_g = ∂Vᵀ g⁻¹ ∂f / ∂fᵀ g⁻¹ ∂f.
pub fn value_of_f(grad_v: &[f64], grad_f: &[f64], g: &Metric) -> Result<f64> {
    same_dim(&[grad_v, grad_f])?;
    let up_f = g.raise(grad_f)?;
    let den = dot(grad_f, &up_f);
    if !(den.sqrt() > UNDEFINED_TOL) {
        return Err(Error::ZeroVector("grad f".into()));
    }
    Ok(dot(grad_v, &up_f) / den)
}

fn check_generators(gens: &[Vec<f64>]) -> Result<usize> {
    let first = gens.first().ok_or(Error::EmptyGenerators)?;
    let d = first.len();
    for g in gens {
        if g.len() != d {
            return Err(Error::DimensionMismatch("generators of different length".into()));
        }
        if !(norm(g) > 0.0) {
            return Err(Error::ZeroVector("generator".into()));
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConeMethod {
    #[default]
    Nnls,
    Lp,
}

/// Lawson–Hanson nonnegative least squares: argmin ‖Ax − b‖ over x ≥ 0.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.amax().max(1.0) * b.amax().max(1.0);
    let lstsq = |passive: &[bool]| -> DVector<f64> {
        let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let mut s = DVector::zeros(n);
        if cols.is_empty() {
            return s;
        }
        let sub = a.select_columns(&cols);
        let sol = sub.svd(true, true).solve(b, 1e-14).expect("svd computed with u and v");
        for (i, &j) in cols.iter().enumerate() {
            s[j] = sol[i];
        }
        s
    };
    for _ in 0..3 * n + 3 {
        let w = a.transpose() * (b - a * &x);
        let next = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = next else { break };
        passive[j] = true;
        for _ in 0..3 * n + 3 {
            let s = lstsq(&passive);
            if (0..n).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                x = s;
                break;
            }
            let alpha = (0..n)
                .filter(|&i| passive[i] && s[i] <= 0.0)
                .map(|i| x[i] / (x[i] - s[i]))
                .fold(f64::INFINITY, f64::min);
            x += (s - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    x
}

/// Nonnegative coefficients α with Σ α_i v_i = target, if they exist (residual
/// at most 1e-9·‖target‖).
pub fn cone_membership(target: &[f64], generators: &[Vec<f64>], method: ConeMethod) -> Result<Option<Vec<f64>>> {
    let d = check_generators(generators)?;
    if target.len() != d {
        return Err(Error::DimensionMismatch(
            "target and generators differ in length".into(),
        ));
    }
    let tnorm = norm(target);
    if tnorm == 0.0 {
        return Ok(Some(vec![0.0; generators.len()]));
    }
    let norms: Vec<f64> = generators.iter().map(|g| norm(g)).collect();
    let k = generators.len();
    // Work with unit generators and a unit target; rescale afterwards.
    let a = DMatrix::from_fn(d, k, |i, j| generators[j][i] / norms[j]);
    let b = DVector::from_iterator(d, target.iter().map(|t| t / tnorm));
    let coef: Vec<f64> = match method {
        ConeMethod::Nnls => nnls(&a, &b).iter().copied().collect(),
        ConeMethod::Lp => {
            let mut lp = Lp::minimize();
            let alpha: Vec<usize> = (0..k).map(|_| lp.var(0.0, 0.0, f64::INFINITY)).collect();
            let slack: Vec<(usize, usize)> = (0..d)
                .map(|_| (lp.var(1.0, 0.0, f64::INFINITY), lp.var(1.0, 0.0, f64::INFINITY)))
                .collect();
            for i in 0..d {
                let mut terms: Vec<(usize, f64)> = alpha.iter().map(|&j| (j, a[(i, j)])).collect();
                terms.push((slack[i].0, 1.0));
                terms.push((slack[i].1, -1.0));
                lp.constraint(terms, Cmp::Eq, b[i]);
            }
            let (_, sol) = lp
                .solve()?
                .ok_or_else(|| Error::Lp("membership LP infeasible".into()))?;
            alpha.iter().map(|&j| sol[j].max(0.0)).collect()
        }
    };
    let resid = &a * DVector::from_column_slice(&coef) - &b;
    if resid.norm() <= 1e-9 {
        Ok(Some(coef.iter().zip(&norms).map(|(c, n)| c * tnorm / n).collect()))
    } else {
        Ok(None)
    }
}

/// Max-margin LP over ‖w‖_∞ ≤ 1 with ⟨w, v̂_i⟩ ≤ −m for the unit rows and
/// ⟨w, û_j⟩ ≥ m for the `positive` rows. Returns a unit w that passes every
/// strict inequality with margin, or `None`.
fn max_margin(negative: &[Vec<f64>], positive: &[Vec<f64>], d: usize) -> Result<Option<Vec<f64>>> {
    let mut lp = Lp::maximize();
    let w: Vec<usize> = (0..d).map(|_| lp.var(0.0, -1.0, 1.0)).collect();
    let m = lp.var(1.0, 0.0, 1.0);
    let unit_rows = |rows: &[Vec<f64>]| rows.iter().map(|r| unit(r)).collect::<Result<Vec<_>>>();
    let neg = unit_rows(negative)?;
    let pos = unit_rows(positive)?;
    for v in &neg {
        let mut t: Vec<(usize, f64)> = w.iter().zip(v).map(|(&i, &c)| (i, c)).collect();
        t.push((m, 1.0));
        lp.constraint(t, Cmp::Le, 0.0);
    }
    for u in &pos {
        let mut t: Vec<(usize, f64)> = w.iter().zip(u).map(|(&i, &c)| (i, c)).collect();
        t.push((m, -1.0));
        lp.constraint(t, Cmp::Ge, 0.0);
    }
    let Some((margin, sol)) = lp.solve()? else {
        return Ok(None);
    };
    if margin <= MARGIN {
        return Ok(None);
    }
    let Ok(wu) = unit(&sol[..d]) else {
        return Ok(None);
    };
    let ok = neg.iter().all(|v| dot(v, &wu) <= -MARGIN) && pos.iter().all(|u| dot(u, &wu) >= MARGIN);
    Ok(ok.then_some(wu))
}

/// A unit w with ⟨w, v_i⟩ < 0 for every generator, if the dual cone is nonempty.
pub fn dual_cone_witness(generators: &[Vec<f64>]) -> Result<Option<Vec<f64>>> {
    let d = check_generators(generators)?;
    max_margin(generators, &[], d)
}

/// False iff some nonzero nonnegative combination of the generators vanishes.
pub fn is_pointed(generators: &[Vec<f64>]) -> Result<bool> {
    let d = check_generators(generators)?;
    let k = generators.len();
    // min t s.t. |Σ α_i v̂_i| ≤ t componentwise, α ≥ 0, Σ α = 1.
    let mut lp = Lp::minimize();
    let alpha: Vec<usize> = (0..k).map(|_| lp.var(0.0, 0.0, f64::INFINITY)).collect();
    let t = lp.var(1.0, 0.0, f64::INFINITY);
    let units: Vec<Vec<f64>> = generators.iter().map(|g| unit(g)).collect::<Result<_>>()?;
    for i in 0..d {
        let row: Vec<(usize, f64)> = alpha.iter().zip(&units).map(|(&j, u)| (j, u[i])).collect();
        let mut le = row.clone();
        le.push((t, -1.0));
        lp.constraint(le, Cmp::Le, 0.0);
        let mut ge = row;
        ge.push((t, 1.0));
        lp.constraint(ge, Cmp::Ge, 0.0);
    }
    lp.constraint(alpha.iter().map(|&j| (j, 1.0)).collect(), Cmp::Eq, 1.0);
    let (obj, _) = lp
        .solve()?
        .ok_or_else(|| Error::Lp("pointedness LP infeasible".into()))?;
    Ok(obj > MARGIN)
}

/// A unit w with ⟨∂V, w⟩ > 0 and ⟨∂f, w⟩ < 0, or `None` when the gradients
/// are positively collinear.
pub fn negative_value_direction(grad_v: &[f64], grad_f: &[f64]) -> Result<Option<Vec<f64>>> {
    same_dim(&[grad_v, grad_f])?;
    let v = unit(grad_v)?;
    let f = unit(grad_f)?;
    let c = dot(&v, &f);
    if c >= 1.0 - COLLINEAR_TOL {
        return Ok(None);
    }
    let kappa = if c > 0.0 {
        (1.0f64).min((1.0 - c * c) / (2.0 * c))
    } else {
        1.0
    };
    let w: Vec<f64> = f.iter().zip(&v).map(|(fi, vi)| -fi + (c + kappa) * vi).collect();
    Ok(Some(unit(&w)?))
}

/// A unit w with ⟨∂V_i, w⟩ < 0 for every player and ⟨∂f, w⟩ > 0, or `None`
/// when ∂f lies in the conic hull of the ∂V_i.
pub fn pareto_negative_direction(grad_vs: &[Vec<f64>], grad_f: &[f64]) -> Result<Option<Vec<f64>>> {
    let d = check_generators(grad_vs)?;
    if grad_f.len() != d {
        return Err(Error::DimensionMismatch("gradients differ in length".into()));
    }
    if dual_cone_witness(grad_vs)?.is_none() {
        return Err(Error::PreconditionFailed(
            "the dual cone of the value gradients is empty".into(),
        ));
    }
    if norm(grad_f) == 0.0 {
        return Ok(None);
    }
    max_margin(grad_vs, &[grad_f.to_vec()], d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub matrix: DMatrix<f64>,
    /// Frobenius norm.
    pub norm: f64,
}

/// Second-order mismatch in the flat metric:
/// ‖H_f − ρH_V‖ ννᵀ/|ν|² − H_f + ρH_V with ν = ∇V, ρ = |∇f|/|∇V|.
pub fn second_order_mismatch(
    grad_v: &[f64],
    grad_f: &[f64],
    hess_v: &DMatrix<f64>,
    hess_f: &DMatrix<f64>,
) -> Result<Mismatch> {
    let d = same_dim(&[grad_v, grad_f])?;
    if hess_v.shape() != (d, d) || hess_f.shape() != (d, d) {
        return Err(Error::DimensionMismatch("Hessians must be d × d".into()));
    }
    let nv = norm(grad_v);
    if !(nv > 0.0) {
        return Err(Error::ZeroVector("grad V".into()));
    }
    let rho = norm(grad_f) / nv;
    let a = hess_f - hess_v * rho;
    let nu = DVector::from_column_slice(grad_v);
    let m = &nu * nu.transpose() * (a.norm() / (nv * nv)) - a;
    let n = m.norm();
    Ok(Mismatch { matrix: m, norm: n })
}

/// Symmetrized central-difference Jacobian of a gradient field, with step
/// h·max(1, |θ_k|).
pub fn hessian_fd(grad: impl Fn(&[f64]) -> Result<Vec<f64>>, theta: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let d = theta.len();
    let mut hess = DMatrix::zeros(d, d);
    for k in 0..d {
        let hk = h * theta[k].abs().max(1.0);
        let mut tp = theta.to_vec();
        let mut tm = theta.to_vec();
        tp[k] += hk;
        tm[k] -= hk;
        let (gp, gm) = (grad(&tp)?, grad(&tm)?);
        if gp.len() != d || gm.len() != d {
            return Err(Error::DimensionMismatch("gradient length differs from θ".into()));
        }
        for i in 0..d {
            hess[(i, k)] = (gp[i] - gm[i]) / (2.0 * hk);
        }
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

/// Cone analysis of one target gradient against a set of value gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeReport {
    pub generators: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    pub pointed: bool,
    pub dual_nonempty: bool,
    pub target_in_hull: bool,
    pub witness_pareto_negative: Option<Vec<f64>>,
    /// Per generator: a direction raising that value while lowering the target.
    pub witness_single_negative: Vec<Option<Vec<f64>>>,
}

#[derive(Serialize)]
struct WitnessJson<'a> {
    kind: &'static str,
    generator: Option<usize>,
    direction: &'a [f64],
}

#[derive(Serialize)]
struct ConeReportJson<'a> {
    pointed: bool,
    dual_nonempty: bool,
    target_in_hull: bool,
    witnesses: Vec<WitnessJson<'a>>,
}

impl ConeReport {
    pub fn new(generators: Vec<Vec<f64>>, target: Vec<f64>) -> Result<Self> {
        let pointed = is_pointed(&generators)?;
        let dual_nonempty = dual_cone_witness(&generators)?.is_some();
        let target_in_hull = cone_membership(&target, &generators, ConeMethod::Nnls)?.is_some();
        let witness_pareto_negative = if dual_nonempty {
            pareto_negative_direction(&generators, &target)?
        } else {
            None
        };
        let witness_single_negative = generators
            .iter()
            .map(|g| {
                if norm(&target) == 0.0 {
                    Ok(None)
                } else {
                    negative_value_direction(g, &target)
                }
            })
            .collect::<Result<_>>()?;
        Ok(ConeReport {
            generators,
            target,
            pointed,
            dual_nonempty,
            target_in_hull,
            witness_pareto_negative,
            witness_single_negative,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut witnesses = Vec::new();
        if let Some(w) = &self.witness_pareto_negative {
            witnesses.push(WitnessJson {
                kind: "pareto_negative",
                generator: None,
                direction: w,
            });
        }
        for (i, w) in self.witness_single_negative.iter().enumerate() {
            if let Some(w) = w {
                witnesses.push(WitnessJson {
                    kind: "single_negative",
                    generator: Some(i),
                    direction: w,
                });
            }
        }
        serde_json::to_value(ConeReportJson {
            pointed: self.pointed,
            dual_nonempty: self.dual_nonempty,
            target_in_hull: self.target_in_hull,
            witnesses,
        })
        .expect("plain data serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maid::{parse_maid, ParamPoint, StrategyProfile};
    use crate::qre::{solve, SolveOptions};
    use crate::scenarios;

    fn v(x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    #[test]
    fn value_of_direction_cases() {
        let e = Metric::euclidean(2);
        assert_eq!(value_of_direction(&[1.0, 0.0], &[0.0, 3.0], &e).unwrap(), 0.0);
        assert_eq!(value_of_direction(&[1.0, 0.0], &[1.0, 0.0], &e).unwrap(), 1.0);
        let g = Metric::explicit(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0])).unwrap();
        let val = value_of_direction(&[1.0, 0.0], &[1.0, 1.0], &g).unwrap();
        assert!((val - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        assert!((val - 0.4472).abs() < 1e-4);
        assert!(matches!(
            value_of_direction(&[1.0, 0.0], &[0.0, 0.0], &e),
            Err(Error::ZeroVector(_))
        ));
    }

    #[test]
    fn value_of_f_cases() {
        assert_eq!(
            value_of_f_in_direction(&[1.0, 2.0], &[1.0, 2.0], &[0.3, -0.1]).unwrap(),
            1.0
        );
        assert_eq!(
            value_of_f_in_direction(&[0.0, 1.0], &[1.0, 0.0], &[1.0, -1.0]).unwrap(),
            -1.0
        );
        assert!(matches!(
            value_of_f_in_direction(&[0.0, 1.0], &[1.0, 0.0], &[0.0, 1.0]),
            Err(Error::Undefined(_))
        ));
        let e = Metric::euclidean(2);
        assert!((value_of_f(&[1.0, 0.0], &[1.0, 1.0], &e).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(value_of_f(&[1.0, 0.0], &[0.0, 1.0], &e).unwrap(), 0.0);
        let g = Metric::explicit(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        assert!((value_of_f(&[0.3, 0.7], &[0.3, 0.7], &g).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            value_of_f(&[1.0, 0.0], &[0.0, 0.0], &e),
            Err(Error::ZeroVector(_))
        ));
    }

    #[test]
    fn explicit_metric_validation() {
        assert!(Metric::explicit(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0])).is_err());
        assert!(Metric::explicit(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
    }

    #[test]
    fn membership_cases() {
        let gens = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        for method in [ConeMethod::Nnls, ConeMethod::Lp] {
            let a = cone_membership(&[1.0, 1.0], &gens, method).unwrap().unwrap();
            assert!((a[0] - 1.0).abs() < 1e-12 && (a[1] - 1.0).abs() < 1e-12);
            let a = cone_membership(&[1.0, 0.0], &gens, method).unwrap().unwrap();
            assert!((a[0] - 1.0).abs() < 1e-12 && a[1].abs() < 1e-12);
            assert!(cone_membership(&[-1.0, 0.0], &gens[..1], method).unwrap().is_none());
            assert!(cone_membership(&[-1.0, 0.5], &gens, method).unwrap().is_none());
        }
        assert_eq!(
            cone_membership(&[1.0], &[], ConeMethod::Nnls),
            Err(Error::EmptyGenerators)
        );
    }

    #[test]
    fn dual_and_pointed_cases() {
        let w = dual_cone_witness(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap().unwrap();
        assert!(w[0] < 0.0 && w[1] < 0.0);
        assert!(dual_cone_witness(&[v(&[1.0, 2.0]), v(&[-1.0, -2.0])])
            .unwrap()
            .is_none());
        let w = dual_cone_witness(&[v(&[1.0, 0.0])]).unwrap().unwrap();
        assert!(w[0] < 0.0);
        assert!(is_pointed(&[v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 1.0])]).unwrap());
        assert!(!is_pointed(&[v(&[1.0, 2.0]), v(&[-1.0, -2.0])]).unwrap());
        assert!(!is_pointed(&[v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[-1.0, -1.0])]).unwrap());
    }

    #[test]
    fn negative_direction_cases() {
        assert!(negative_value_direction(&[1.0, 2.0], &[2.0, 4.0]).unwrap().is_none());
        let w = negative_value_direction(&[1.0, 2.0], &[-1.0, -2.0]).unwrap().unwrap();
        assert!(dot(&[1.0, 2.0], &w) > 0.0 && dot(&[-1.0, -2.0], &w) < 0.0);
        let w = negative_value_direction(&[0.0, 1.0], &[1.0, 0.0]).unwrap().unwrap();
        let s = 0.5f64.sqrt();
        assert!((w[0] + s).abs() < 1e-15 && (w[1] - s).abs() < 1e-15);
        assert!(matches!(
            negative_value_direction(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector(_))
        ));
    }

    #[test]
    fn pareto_cases() {
        let gens = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        assert!(pareto_negative_direction(&gens, &[1.0, 1.0]).unwrap().is_none());
        let w = pareto_negative_direction(&gens, &[-1.0, 2.0]).unwrap().unwrap();
        assert!(w[0] < -MARGIN && w[1] < -MARGIN && dot(&[-1.0, 2.0], &w) > MARGIN);
        assert!(matches!(
            pareto_negative_direction(&[v(&[1.0, 1.0]), v(&[-1.0, -1.0])], &[1.0, 0.0]),
            Err(Error::PreconditionFailed(_))
        ));
    }

    #[test]
    fn mismatch_footnote_cases() {
        // V = θ¹, f = (1 + θ¹)² at the origin.
        let hv = DMatrix::zeros(2, 2);
        let hf = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let m = second_order_mismatch(&[1.0, 0.0], &[2.0, 0.0], &hv, &hf).unwrap();
        assert!(m.norm <= 1e-12);
        // f = (1 + θ¹)²(1 + (θ²)²): Hessian 2·I.
        let hf = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let m = second_order_mismatch(&[1.0, 0.0], &[2.0, 0.0], &hv, &hf).unwrap();
        assert!(m.norm > 1e-3);
        // f = 3V.
        let hv = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, -0.5]);
        let m = second_order_mismatch(&[1.0, 2.0], &[3.0, 6.0], &hv, &(&hv * 3.0)).unwrap();
        assert!(m.norm <= 1e-12);
    }

    #[test]
    fn hessian_of_quadratic() {
        let grad = |t: &[f64]| Ok(vec![2.0 * t[0] + t[1], t[0] + 6.0 * t[1]]);
        let h = hessian_fd(grad, &[0.3, -0.2], 1e-4).unwrap();
        let want = [2.0, 1.0, 1.0, 6.0];
        for (a, b) in h.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fisher_of_single_bernoulli() {
        let m = parse_maid(
            r#"{
            "theta": [{"name": "t", "min": 0.05, "max": 0.95, "default": 0.3}],
            "players": [{"id": "p", "beta": 1}],
            "nodes": [{"id": "C", "kind": "chance", "states": ["0", "1"], "cpd": [["t", "_"]]},
                      {"id": "A", "kind": "decision", "player": "p", "states": ["0", "1"]}],
            "edges": [],
            "utilities": [{"player": "p", "scope": ["A"], "table": [0, 1]}]
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
        for fam in [FisherFamily::Total, FisherFamily::ChannelOnly] {
            let g = fisher_metric(&m, &e, fam).unwrap();
            assert!((g.matrix[(0, 0)] - 1.0 / (0.3 * 0.7)).abs() < 1e-12);
        }
    }

    #[test]
    fn fisher_channel_only_matches_fd_of_log_likelihood() {
        let m = scenarios::blackwell();
        let p = ParamPoint::new(&m, vec![0.1, 0.2], vec![5.0]).unwrap();
        let e = solve(&m, &p, &StrategyProfile::uniform(&m), &SolveOptions::default()).unwrap();
        let g = fisher_metric(&m, &e, FisherFamily::ChannelOnly).unwrap();
        let h = 1e-6;
        let logp = |t: &[f64]| {
            let ev = Evaluator::new(&m, t);
            ev.joint(&e.profile).probs.iter().map(|p| p.ln()).collect::<Vec<_>>()
        };
        let base = Evaluator::new(&m, &p.theta).joint(&e.profile).probs;
        let scores: Vec<Vec<f64>> = (0..2)
            .map(|k| {
                let mut tp = p.theta.clone();
                let mut tm = p.theta.clone();
                tp[k] += h;
                tm[k] -= h;
                logp(&tp)
                    .iter()
                    .zip(logp(&tm))
                    .map(|(a, b)| (a - b) / (2.0 * h))
                    .collect()
            })
            .collect();
        for k in 0..2 {
            for l in 0..2 {
                let fd: f64 = (0..base.len()).map(|x| base[x] * scores[k][x] * scores[l][x]).sum();
                assert!((fd - g.matrix[(k, l)]).abs() <= 1e-6 * fd.abs().max(1.0));
            }
        }
        assert!(g.matrix.clone().symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn fisher_irrelevant_parameter_zero_row() {
        let m = parse_maid(
            r#"{
            "theta": [{"name": "t", "min": 0.05, "max": 0.95, "default": 0.3},
                      {"name": "k", "min": 0, "max": 1, "default": 0.5}],
            "players": [{"id": "p", "beta": 1}],
            "nodes": [{"id": "C", "kind": "chance", "states": ["0", "1"], "cpd": [["t", "_"]]},
                      {"id": "A", "kind": "decision", "player": "p", "states": ["0", "1"]}],
            "edges": [],
            "utilities": [{"player": "p", "scope": ["C"], "table": [0, "k"]}]
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
        let g = fisher_metric(&m, &e, FisherFamily::Total).unwrap();
        assert_eq!(g.matrix[(1, 1)], 0.0);
        assert_eq!(g.matrix[(0, 1)], 0.0);
        assert!(g.ridge > 0.0);
        assert!(g.raise(&[1.0, 1.0]).is_ok());
    }

    #[test]
    fn report_json_fields() {
        let r = ConeReport::new(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])], v(&[-1.0, 2.0])).unwrap();
        assert!(r.pointed && r.dual_nonempty && !r.target_in_hull);
        let j = r.to_json();
        for key in ["pointed", "dual_nonempty", "target_in_hull", "witnesses"] {
            assert!(j.get(key).is_some(), "{key}");
        }
        assert_eq!(j["witnesses"][0]["kind"], "pareto_negative");
    }
}

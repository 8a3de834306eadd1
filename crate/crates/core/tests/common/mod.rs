//! Seeded property checks shared by the property and acceptance targets.
//! Each returns a short summary or the first violation.

#![allow(dead_code)]

use diffvoi::analysis::{self, BranchSelector, GridAxis, MetricChoice, ScanSpec, SelectOptions};
use diffvoi::geometry::{dual_cone_witness, is_pointed, negative_value_direction, value_of_f_in_direction, Metric};
use diffvoi::info::{entropy, Channel, Units};
use diffvoi::{scenarios, ParamPoint};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    // Box–Muller keeps directions isotropic.
    (0..d)
        .map(|_| {
            let u: f64 = rng.gen_range(1e-12..1.0);
            let v: f64 = rng.gen();
            (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
        })
        .collect()
}

pub fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-9..1.0f64).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

pub fn stochastic(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Channel {
    Channel::new((0..rows).map(|_| simplex(rng, cols)).collect()).unwrap()
}

/// I(X;Y) = H(Y) − Σ_x p(x) H(Y|x) in nats, computed from scratch.
pub fn mi_oracle(px: &[f64], c: &Channel) -> f64 {
    let rows = c.rows();
    let py: Vec<f64> = (0..c.n_outputs())
        .map(|y| px.iter().zip(rows).map(|(p, r)| p * r[y]).sum())
        .collect();
    let cond: f64 = px.iter().zip(rows).map(|(p, r)| p * entropy(r)).sum();
    entropy(&py) - cond
}

pub fn rank(vs: &[Vec<f64>]) -> usize {
    let d = vs[0].len();
    let m = DMatrix::from_fn(d, vs.len(), |i, j| vs[j][i]);
    let sv = m.singular_values();
    let tol = 1e-9 * sv.max().max(1.0);
    sv.iter().filter(|s| **s > tol).count()
}

pub fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(d, d) * 0.5
}

/// Nonnegativity and I(X;Z) ≤ I(X;Y) on random chains X → Y → Z.
pub fn mi_data_processing(chains: usize) -> Check {
    let mut rng = rng(11);
    for n in 0..chains {
        let nx = rng.gen_range(2..5);
        let ny = rng.gen_range(2..5);
        let nz = rng.gen_range(2..5);
        let px = simplex(&mut rng, nx);
        let p = stochastic(&mut rng, nx, ny);
        let q = stochastic(&mut rng, ny, nz);
        let pq = p.compose(&q).map_err(|e| e.to_string())?;
        let ixy = p.mutual_information(&px);
        let ixz = pq.mutual_information(&px);
        if (ixy - mi_oracle(&px, &p)).abs() >= 1e-12 {
            return Err(format!("chain {n}: I(X;Y) disagrees with the entropy oracle"));
        }
        if ixy < 0.0 || ixz < 0.0 {
            return Err(format!("chain {n}: negative mutual information"));
        }
        if ixz > ixy + 1e-12 {
            return Err(format!("chain {n}: I(X;Z) = {ixz} > I(X;Y) = {ixy}"));
        }
    }
    Ok(format!("{chains} chains"))
}

/// not pointed ⇒ no dual witness ⇒ linearly dependent (and independent ⇒ pointed).
pub fn pointed_dual_chain(sets: usize) -> Check {
    let mut rng = rng(12);
    let (mut not_pointed, mut empty_dual) = (0, 0);
    for n in 0..sets {
        let d = rng.gen_range(2..5);
        let k = rng.gen_range(1..6);
        let mut gens: Vec<Vec<f64>> = (0..k).map(|_| gaussian_vec(&mut rng, d)).collect();
        if rng.gen_bool(0.3) {
            // Close the cone with a negative combination of existing generators.
            let w = simplex(&mut rng, k);
            let closing: Vec<f64> = (0..d)
                .map(|i| -gens.iter().zip(&w).map(|(g, a)| a * g[i]).sum::<f64>())
                .collect();
            if norm(&closing) > 1e-6 {
                gens.push(closing);
            }
        }
        let pointed = is_pointed(&gens).map_err(|e| e.to_string())?;
        let witness = dual_cone_witness(&gens).map_err(|e| e.to_string())?;
        let independent = rank(&gens) == gens.len();
        if !pointed {
            not_pointed += 1;
            if witness.is_some() {
                return Err(format!("set {n}: not pointed but has a dual witness"));
            }
        }
        if witness.is_none() {
            empty_dual += 1;
            if independent {
                return Err(format!("set {n}: empty dual with independent generators"));
            }
        }
        if independent && !pointed {
            return Err(format!("set {n}: independent generators but not pointed"));
        }
        if let Some(w) = witness {
            if gens.iter().any(|g| dot(&w, g) >= 0.0) {
                return Err(format!("set {n}: witness violates a strict inequality"));
            }
        }
    }
    if not_pointed < 50 || empty_dual < 50 {
        return Err(format!("too few degenerate cases ({not_pointed} / {empty_dual})"));
    }
    Ok(format!("{sets} sets, {not_pointed} not pointed"))
}

/// A negative-value witness exists iff the gradients are not positively collinear.
pub fn negative_direction_iff(pairs: usize) -> Check {
    let mut rng = rng(13);
    let (mut found, mut none) = (0, 0);
    for i in 0..pairs {
        let d = rng.gen_range(2..7);
        let v = gaussian_vec(&mut rng, d);
        let f: Vec<f64> = match i % 4 {
            0 => v.iter().map(|x| 2.5 * x).collect(),
            1 => {
                let e = gaussian_vec(&mut rng, d);
                v.iter().zip(&e).map(|(x, y)| 0.7 * x + 1e-3 * y).collect()
            }
            2 => v.iter().map(|x| -x).collect(),
            _ => gaussian_vec(&mut rng, d),
        };
        let cos = dot(&v, &f) / (norm(&v) * norm(&f));
        match negative_value_direction(&v, &f).map_err(|e| e.to_string())? {
            Some(w) => {
                found += 1;
                if cos >= 1.0 - 1e-10 {
                    return Err(format!("pair {i}: witness at cosine {cos}"));
                }
                if (norm(&w) - 1.0).abs() >= 1e-12 || dot(&v, &w) <= 0.0 || dot(&f, &w) >= 0.0 {
                    return Err(format!("pair {i}: witness fails its inequalities"));
                }
            }
            None => {
                none += 1;
                if cos < 1.0 - 1e-10 {
                    return Err(format!("pair {i}: no witness at cosine {cos}"));
                }
            }
        }
    }
    Ok(format!("{pairs} pairs, {found} witnesses, {none} collinear"))
}

/// ⟨grad V, δ⟩_g / ⟨grad f, δ⟩_g computed with raised gradients equals the
/// metric-free value for random SPD metrics.
pub fn metric_invariance(metrics: usize) -> Check {
    let mut rng = rng(16);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.gen_range(2..6);
        let v = gaussian_vec(&mut rng, d);
        let f = gaussian_vec(&mut rng, d);
        let delta = DVector::from_vec(gaussian_vec(&mut rng, d));
        let base = value_of_f_in_direction(&v, &f, delta.as_slice()).map_err(|e| e.to_string())?;
        for _ in 0..metrics {
            let g = Metric::explicit(random_spd(&mut rng, d)).map_err(|e| e.to_string())?;
            let gm = g.regularized();
            let inner = |c: &[f64]| -> Result<f64, String> {
                let up = DVector::from_vec(g.raise(c).map_err(|e| e.to_string())?);
                Ok((&gm * up).dot(&delta))
            };
            let via_metric = inner(&v)? / inner(&f)?;
            let err = (via_metric - base).abs() / base.abs().max(1.0);
            worst = worst.max(err);
            if err > 1e-12 {
                return Err(format!("{via_metric} vs {base}"));
            }
        }
    }
    Ok(format!("{metrics} metrics per case, worst {worst:.1e}"))
}

pub fn small_bagwell_scan() -> ScanSpec {
    let m = scenarios::bagwell();
    ScanSpec {
        grid: vec![
            GridAxis::parse(&m, "eps1=0.05:0.35:3").unwrap(),
            GridAxis::parse(&m, "eps2=0.05:0.35:3").unwrap(),
        ],
        base: ParamPoint::new(&m, vec![0.05, 0.05], vec![10.0, 10.0]).unwrap(),
        branch: BranchSelector::Label("stackelberg".into()),
        stats: vec![analysis::parse_statistic(&m, "capacity:S", Units::Bits).unwrap()],
        metric: MetricChoice::FisherTotal,
        select: SelectOptions::default(),
    }
}

/// Repeated scans give byte-identical CSV, and ok rows have small residuals.
pub fn csv_determinism(runs: usize) -> Check {
    let m = scenarios::bagwell();
    let spec = small_bagwell_scan();
    let first = analysis::scan(&m, &spec).map_err(|e| e.to_string())?.to_csv();
    for _ in 1..runs {
        if analysis::scan(&m, &spec).map_err(|e| e.to_string())?.to_csv() != first {
            return Err("scan output changed between runs".into());
        }
    }
    for line in first.lines().skip(1) {
        if line.ends_with(",ok") {
            let residual: f64 = line.split(',').nth(3).unwrap().parse().map_err(|_| "bad residual")?;
            if residual > 1e-10 {
                return Err(format!("ok row with residual {residual}"));
            }
        }
    }
    Ok(format!("{runs} identical runs"))
}

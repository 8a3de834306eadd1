//! Small dense LP front end over `minilp`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

type Row = (Vec<(usize, f64)>, Cmp, f64);

/// A linear program in dense form: optimize `c·x` subject to row constraints
/// and per-variable bounds.
#[derive(Debug, Clone, Default)]
pub struct Lp {
    maximize: bool,
    objective: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    rows: Vec<Row>,
}

impl Lp {
    pub fn minimize() -> Self {
        Lp::default()
    }

    pub fn maximize() -> Self {
        Lp {
            maximize: true,
            ..Lp::default()
        }
    }

    /// Add a variable and return its index.
    pub fn var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.objective.push(cost);
        self.bounds.push((lo, hi));
        self.objective.len() - 1
    }

    pub fn constraint(&mut self, terms: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        self.rows.push((terms, cmp, rhs));
    }

    /// Returns `(objective, x)` or `None` when infeasible.
    pub fn solve(&self) -> Result<Option<(f64, Vec<f64>)>> {
        let dir = if self.maximize {
            OptimizationDirection::Maximize
        } else {
            OptimizationDirection::Minimize
        };
        let mut p = Problem::new(dir);
        let vars: Vec<_> = self
            .objective
            .iter()
            .zip(&self.bounds)
            .map(|(&c, &b)| p.add_var(c, b))
            .collect();
        for (terms, cmp, rhs) in &self.rows {
            let expr: Vec<_> = terms.iter().map(|&(i, a)| (vars[i], a)).collect();
            let op = match cmp {
                Cmp::Le => ComparisonOp::Le,
                Cmp::Ge => ComparisonOp::Ge,
                Cmp::Eq => ComparisonOp::Eq,
            };
            p.add_constraint(expr.as_slice(), op, *rhs);
        }
        match p.solve() {
            Ok(sol) => {
                let x = vars.iter().map(|v| sol[*v]).collect();
                Ok(Some((sol.objective(), x)))
            }
            Err(minilp::Error::Infeasible) => Ok(None),
            Err(e) => Err(Error::Lp(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6
        let mut lp = Lp::maximize();
        let x = lp.var(1.0, 0.0, f64::INFINITY);
        let y = lp.var(1.0, 0.0, f64::INFINITY);
        lp.constraint(vec![(x, 1.0), (y, 2.0)], Cmp::Le, 4.0);
        lp.constraint(vec![(x, 3.0), (y, 1.0)], Cmp::Le, 6.0);
        let (obj, sol) = lp.solve().unwrap().unwrap();
        assert!((obj - 2.8).abs() < 1e-9);
        assert!((sol[0] - 1.6).abs() < 1e-9);
    }

    #[test]
    fn infeasible_is_none() {
        let mut lp = Lp::minimize();
        let x = lp.var(0.0, 0.0, 1.0);
        lp.constraint(vec![(x, 1.0)], Cmp::Ge, 2.0);
        assert!(lp.solve().unwrap().is_none());
    }
}

//! Assemble SDPA problems from affine matrix inequalities.

use std::collections::HashSet;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use super::{Entry, SdpProblem};
use crate::error::{Error, Result};

/// `constant + sum coef * x_var`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Affine {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl Affine {
    pub fn zero() -> Self {
        Affine::default()
    }

    pub fn constant(c: f64) -> Self {
        Affine { constant: c, terms: Vec::new() }
    }

    pub fn var(v: usize) -> Self {
        Affine { constant: 0.0, terms: vec![(v, 1.0)] }
    }

    pub fn term(v: usize, coef: f64) -> Self {
        Affine { constant: 0.0, terms: vec![(v, coef)] }
    }

    /// `self += s * other`, without merging terms.
    pub fn add_scaled(&mut self, other: &Affine, s: f64) {
        if s == 0.0 {
            return;
        }
        self.constant += s * other.constant;
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, s * c)));
    }

    /// Merge repeated variables and drop zero coefficients.
    pub fn normalize(&mut self) {
        self.terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        let scale = merged.iter().map(|t| t.1.abs()).fold(self.constant.abs(), f64::max);
        merged.retain(|t| t.1.abs() > 1e-14 * scale);
        self.terms = merged;
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.iter().all(|t| t.1 == 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.1 == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(mut self, rhs: Affine) -> Affine {
        self.add_scaled(&rhs, 1.0);
        self.normalized()
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(mut self, rhs: Affine) -> Affine {
        self.add_scaled(&rhs, -1.0);
        self.normalized()
    }
}

impl Mul<f64> for Affine {
    type Output = Affine;
    fn mul(mut self, s: f64) -> Affine {
        self.constant *= s;
        for t in &mut self.terms {
            t.1 *= s;
        }
        self
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self * -1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Collects PSD blocks and scalar inequalities `expr >= 0` over named variables.
#[derive(Clone, Debug, Default)]
pub struct ProblemBuilder {
    names: Vec<String>,
    psd: Vec<Vec<Vec<Affine>>>,
    lp: Vec<Affine>,
    seen_rows: HashSet<Vec<u64>>,
    violated: Vec<String>,
}

/// An SDPA problem plus what is needed to read its optimum as the original objective.
#[derive(Clone, Debug)]
pub struct BuiltProblem {
    pub problem: SdpProblem,
    pub sense: Sense,
    /// Constant part of the original objective.
    pub offset: f64,
    pub names: Vec<String>,
}

impl BuiltProblem {
    /// Original objective value for the primal vector.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let v: f64 = self.problem.c.iter().zip(x).map(|(c, v)| c * v).sum();
        self.from_min(v)
    }

    /// Convert a value of the SDPA minimization (`min c^T x`) back to the original objective.
    pub fn from_min(&self, v: f64) -> f64 {
        match self.sense {
            Sense::Maximize => self.offset - v,
            Sense::Minimize => self.offset + v,
        }
    }
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    /// Require `expr >= 0`.
    pub fn add_nonneg(&mut self, mut expr: Affine) {
        expr.normalize();
        if expr.is_constant() {
            if expr.constant < -1e-12 {
                self.violated.push(format!("constant inequality {} >= 0", expr.constant));
            }
            return;
        }
        let scale = expr.terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
        let mut key: Vec<u64> = vec![(expr.constant / scale).to_bits()];
        for &(v, c) in &expr.terms {
            key.push(v as u64);
            key.push((c / scale).to_bits());
        }
        if self.seen_rows.insert(key) {
            self.lp.push(expr);
        }
    }

    /// Require the symmetric matrix `rows` to be PSD (only `r <= c` is read).
    pub fn add_psd(&mut self, rows: Vec<Vec<Affine>>) {
        let n = rows.len();
        let mut m: Vec<Vec<Affine>> = vec![vec![Affine::zero(); n]; n];
        for r in 0..n {
            for c in r..n {
                let e = rows[r][c].clone().normalized();
                m[r][c] = e.clone();
                m[c][r] = e;
            }
        }
        let keep: Vec<usize> = (0..n).filter(|&r| (0..n).any(|c| !m[r][c].is_zero())).collect();
        let m: Vec<Vec<Affine>> = keep.iter().map(|&r| keep.iter().map(|&c| m[r][c].clone()).collect()).collect();
        let n = m.len();
        if n == 0 {
            return;
        }
        if n == 1 {
            self.add_nonneg(m[0][0].clone());
            return;
        }
        if m.iter().all(|row| row.iter().all(|e| e.is_constant())) {
            let dense = DMatrix::from_fn(n, n, |r, c| m[r][c].constant);
            let min = dense.symmetric_eigenvalues().min();
            if min < -1e-9 * (1.0 + dense.amax()) {
                self.violated.push(format!("constant block with eigenvalue {min}"));
            }
            return;
        }
        self.psd.push(m);
    }

    pub fn build(self, objective: Affine, sense: Sense) -> Result<BuiltProblem> {
        if !self.violated.is_empty() {
            return Err(Error::InvalidArgument(format!("infeasible constant constraint: {}", self.violated.join("; "))));
        }
        let objective = objective.normalized();
        let m = self.names.len();
        let mut c = vec![0.0; m];
        for &(v, coef) in &objective.terms {
            c[v] = match sense {
                Sense::Maximize => -coef,
                Sense::Minimize => coef,
            };
        }
        let mut f: Vec<Vec<Entry>> = vec![Vec::new(); m + 1];
        let mut used = vec![false; m];
        let mut sizes = Vec::new();
        let push = |f: &mut Vec<Vec<Entry>>, used: &mut Vec<bool>, block: usize, row: usize, col: usize, e: &Affine| {
            if e.constant != 0.0 {
                f[0].push(Entry { block, row, col, value: -e.constant });
            }
            for &(v, coef) in &e.terms {
                used[v] = true;
                f[v + 1].push(Entry { block, row, col, value: coef });
            }
        };
        for blk in &self.psd {
            let b = sizes.len();
            sizes.push(blk.len() as i64);
            for (r, row) in blk.iter().enumerate() {
                for (col, e) in row.iter().enumerate().skip(r) {
                    push(&mut f, &mut used, b, r, col, e);
                }
            }
        }
        if !self.lp.is_empty() {
            let b = sizes.len();
            sizes.push(-(self.lp.len() as i64));
            for (r, e) in self.lp.iter().enumerate() {
                push(&mut f, &mut used, b, r, r, e);
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidArgument(format!("variable `{}` appears in no constraint", self.names[v])));
        }
        let problem = SdpProblem::new(c, sizes, f)?;
        Ok(BuiltProblem { problem, sense, offset: objective.constant, names: self.names })
    }
}

//! Block semidefinite programs in SDPA form.
//!
//! Primal: minimize `c^T x` subject to `X(x) = sum_i x_i F_i - F_0 ⪰ 0` blockwise.
//! Dual: maximize `<F_0, Y>` subject to `<F_i, Y> = c_i`, `Y ⪰ 0`.

mod builder;
mod external;
mod ipm;
mod sdpa;

pub use builder::{Affine, BuiltProblem, ProblemBuilder, Sense};
pub use external::solve_external;
pub use ipm::solve_builtin;
pub use sdpa::{read_sdpa, read_sdpa_solution, write_sdpa, write_sdpa_solution};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One nonzero of a coefficient matrix, 0-based, `row <= col`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub c: Vec<f64>,
    /// Block sizes; negative means a diagonal (LP) block of that size.
    pub block_sizes: Vec<i64>,
    /// `f[0]` is `F_0`, `f[i]` belongs to variable `i - 1`.
    pub f: Vec<Vec<Entry>>,
    /// Per-variable intervals, used only by certification.
    pub variable_box: Option<Vec<(f64, f64)>>,
}

impl SdpProblem {
    pub fn new(c: Vec<f64>, block_sizes: Vec<i64>, f: Vec<Vec<Entry>>) -> Result<Self> {
        let mut p = SdpProblem { c, block_sizes, f, variable_box: None };
        p.canonicalize();
        p.validate()?;
        Ok(p)
    }

    pub fn m(&self) -> usize {
        self.c.len()
    }

    pub fn block_dim(&self, b: usize) -> usize {
        self.block_sizes[b].unsigned_abs() as usize
    }

    pub fn is_diagonal(&self, b: usize) -> bool {
        self.block_sizes[b] < 0
    }

    /// Sort entries by `(block, row, col)` and drop explicit zeros.
    pub fn canonicalize(&mut self) {
        for mat in &mut self.f {
            for e in mat.iter_mut() {
                if e.row > e.col {
                    std::mem::swap(&mut e.row, &mut e.col);
                }
            }
            mat.retain(|e| e.value != 0.0);
            mat.sort_by_key(|e| (e.block, e.row, e.col));
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.f.len() != self.m() + 1 {
            return Err(Error::Dimension(format!("{} matrices for {} variables", self.f.len(), self.m())));
        }
        if self.block_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Dimension("block of size 0".into()));
        }
        for (k, mat) in self.f.iter().enumerate() {
            for w in mat.windows(2) {
                if (w[0].block, w[0].row, w[0].col) == (w[1].block, w[1].row, w[1].col) {
                    return Err(Error::Dimension(format!("duplicate entry in F_{k} at {:?}", (w[0].block, w[0].row, w[0].col))));
                }
            }
            for e in mat {
                if e.block >= self.block_sizes.len() || e.col >= self.block_dim(e.block) || e.row > e.col {
                    return Err(Error::Dimension(format!("F_{k} entry {e:?} outside the block layout")));
                }
                if self.is_diagonal(e.block) && e.row != e.col {
                    return Err(Error::Dimension(format!("F_{k} entry {e:?} off the diagonal of an LP block")));
                }
                if !e.value.is_finite() {
                    return Err(Error::Dimension(format!("F_{k} entry {e:?} is not finite")));
                }
            }
        }
        if let Some(b) = &self.variable_box {
            if b.len() != self.m() {
                return Err(Error::Dimension(format!("box has {} intervals for {} variables", b.len(), self.m())));
            }
        }
        Ok(())
    }

    /// `sum_i x_i F_i - F_0` per block.
    pub fn primal_matrix(&self, x: &[f64]) -> Vec<BlockMatrix> {
        let mut out: Vec<BlockMatrix> = (0..self.block_sizes.len()).map(|b| BlockMatrix::zeros(self.block_sizes[b])).collect();
        for (k, mat) in self.f.iter().enumerate() {
            let w = if k == 0 { -1.0 } else { x[k - 1] };
            if w == 0.0 {
                continue;
            }
            for e in mat {
                out[e.block].add_sym(e.row, e.col, w * e.value);
            }
        }
        out
    }

    /// `<F_k, Y>` for every `k` (index 0 is `F_0`).
    pub fn inner_products(&self, y: &[BlockMatrix]) -> Vec<f64> {
        self.f
            .iter()
            .map(|mat| {
                let mut acc = KahanSum::default();
                for e in mat {
                    acc.add(e.value * y[e.block].sym_weight(e.row, e.col));
                }
                acc.value()
            })
            .collect()
    }
}

/// Compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BlockMatrix {
    Dense(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

impl BlockMatrix {
    /// Zero block for a signed layout size.
    pub fn zeros(size: i64) -> Self {
        let n = size.unsigned_abs() as usize;
        if size < 0 {
            BlockMatrix::Diagonal(DVector::zeros(n))
        } else {
            BlockMatrix::Dense(DMatrix::zeros(n, n))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BlockMatrix::Dense(m) => m.nrows(),
            BlockMatrix::Diagonal(v) => v.len(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        match self {
            BlockMatrix::Dense(m) => m[(r, c)],
            BlockMatrix::Diagonal(v) => {
                if r == c {
                    v[r]
                } else {
                    0.0
                }
            }
        }
    }

    /// Add `v` at `(r, c)` and `(c, r)`.
    pub fn add_sym(&mut self, r: usize, c: usize, v: f64) {
        match self {
            BlockMatrix::Dense(m) => {
                m[(r, c)] += v;
                if r != c {
                    m[(c, r)] += v;
                }
            }
            BlockMatrix::Diagonal(d) => d[r] += v,
        }
    }

    /// Contribution of a symmetric unit pair at `(r, c)` to an inner product with `self`.
    pub fn sym_weight(&self, r: usize, c: usize) -> f64 {
        if r == c {
            self.get(r, r)
        } else {
            self.get(r, c) + self.get(c, r)
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            BlockMatrix::Dense(m) if m.nrows() == 0 => f64::INFINITY,
            BlockMatrix::Dense(m) => m.clone().symmetric_eigenvalues().min(),
            BlockMatrix::Diagonal(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            BlockMatrix::Dense(m) => m.amax(),
            BlockMatrix::Diagonal(v) => v.amax(),
        }
    }

    /// Dense row-major copy.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|r| (0..n).map(|c| self.get(r, c)).collect()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    Failed,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::NearOptimal => "near_optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Failed => "failed",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub y_blocks: Vec<BlockMatrix>,
    pub x_blocks: Vec<BlockMatrix>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub gap: f64,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
}

impl SdpSolution {
    /// Fill objectives, gap and residuals from `x` and `Y` against `p`.
    pub fn evaluate(p: &SdpProblem, status: SolveStatus, x: Vec<f64>, y_blocks: Vec<BlockMatrix>, iterations: usize) -> Self {
        let x_blocks = p.primal_matrix(&x);
        let ip = p.inner_products(&y_blocks);
        let primal_obj: f64 = p.c.iter().zip(&x).map(|(c, v)| c * v).sum();
        let dual_obj = ip[0];
        let dual_infeasibility = p.c.iter().zip(&ip[1..]).map(|(c, v)| (v - c).abs()).fold(0.0, f64::max);
        let primal_infeasibility = x_blocks.iter().map(|b| (-b.min_eigenvalue()).max(0.0)).fold(0.0, f64::max);
        let gap = (primal_obj - dual_obj).abs() / (1.0 + 0.5 * (primal_obj.abs() + dual_obj.abs()));
        SdpSolution {
            status,
            x,
            y_blocks,
            x_blocks,
            primal_obj,
            dual_obj,
            gap,
            iterations,
            primal_infeasibility,
            dual_infeasibility,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Backend {
    Builtin,
    /// Command template with `{in}` and `{out}` placeholders.
    External(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    pub backend: Backend,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { gap_tol: 1e-7, feas_tol: 1e-8, max_iter: 200, backend: Backend::Builtin }
    }
}

pub fn solve(p: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution> {
    p.validate()?;
    match &opts.backend {
        Backend::Builtin => Ok(solve_builtin(p, opts)),
        Backend::External(cmd) => solve_external(p, cmd, opts),
    }
}

/// `R(A) = [[1, diag(A)^T], [diag(A), A]]`.
pub fn bordered_with_diagonal(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut r = DMatrix::zeros(n + 1, n + 1);
    r[(0, 0)] = 1.0;
    for k in 0..n {
        r[(0, k + 1)] = a[(k, k)];
        r[(k + 1, 0)] = a[(k, k)];
    }
    r.view_mut((1, 1), (n, n)).copy_from(a);
    r
}

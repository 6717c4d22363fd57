//! Primal-dual path-following interior-point method (HKM direction with
//! Mehrotra predictor-corrector) on dense blocks.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{BlockMatrix, SdpProblem, SdpSolution, SolveOptions, SolveStatus};

type Triplets = Vec<(usize, usize, f64)>;

/// Problem data after row, column and objective scaling.
struct Scaled {
    m: usize,
    sizes: Vec<i64>,
    c: Vec<f64>,
    /// Per block: the variables touching it with their entries.
    block_terms: Vec<Vec<(usize, Triplets)>>,
    f0: Vec<Triplets>,
    /// Per LP block and row: `(var, value)`.
    lp_rows: Vec<Vec<Vec<(usize, f64)>>>,
    /// Row scaling per block: `F_scaled = D F D`.
    row_scale: Vec<Vec<f64>>,
    /// `x = col_scale * x_scaled`.
    col_scale: Vec<f64>,
    b_scale: f64,
    c_scale: f64,
    /// Factor of the Gram matrix `<F_i, F_j>`, used to keep `<F_i, Y>` on target.
    gram: Option<Cholesky<f64, nalgebra::Dyn>>,
}

fn scale_problem(p: &SdpProblem) -> Scaled {
    let m = p.m();
    let nb = p.block_sizes.len();
    let mut row_max: Vec<Vec<f64>> = (0..nb).map(|b| vec![0.0; p.block_dim(b)]).collect();
    for mat in &p.f {
        for e in mat {
            let a = e.value.abs();
            let rm = &mut row_max[e.block];
            rm[e.row] = rm[e.row].max(a);
            rm[e.col] = rm[e.col].max(a);
        }
    }
    let row_scale: Vec<Vec<f64>> =
        row_max.iter().map(|r| r.iter().map(|&a| if a > 0.0 { 1.0 / a.sqrt() } else { 1.0 }).collect()).collect();
    let scaled_value = |e: &super::Entry| e.value * row_scale[e.block][e.row] * row_scale[e.block][e.col];
    let mut col_scale = vec![1.0; m];
    for i in 0..m {
        let mx = p.f[i + 1].iter().map(|e| scaled_value(e).abs()).fold(0.0, f64::max);
        if mx > 0.0 {
            col_scale[i] = 1.0 / mx;
        }
    }
    let f0_max = p.f[0].iter().map(|e| scaled_value(e).abs()).fold(0.0, f64::max);
    let b_scale = f0_max.max(1e-300);
    let b_scale = if f0_max > 0.0 { b_scale } else { 1.0 };
    let c_raw: Vec<f64> = (0..m).map(|i| p.c[i] * col_scale[i]).collect();
    let c_max = c_raw.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let c_scale = if c_max > 0.0 { c_max } else { 1.0 };
    let c: Vec<f64> = c_raw.iter().map(|v| v / c_scale).collect();

    let mut block_terms: Vec<Vec<(usize, Triplets)>> = vec![Vec::new(); nb];
    let mut lp_rows: Vec<Vec<Vec<(usize, f64)>>> =
        (0..nb).map(|b| if p.is_diagonal(b) { vec![Vec::new(); p.block_dim(b)] } else { Vec::new() }).collect();
    for i in 0..m {
        let mut per_block: Vec<Triplets> = vec![Vec::new(); nb];
        for e in &p.f[i + 1] {
            let v = scaled_value(e) * col_scale[i];
            per_block[e.block].push((e.row, e.col, v));
            if p.is_diagonal(e.block) {
                lp_rows[e.block][e.row].push((i, v));
            }
        }
        for (b, t) in per_block.into_iter().enumerate() {
            if !t.is_empty() {
                block_terms[b].push((i, t));
            }
        }
    }
    let mut f0: Vec<Triplets> = vec![Vec::new(); nb];
    for e in &p.f[0] {
        f0[e.block].push((e.row, e.col, scaled_value(e) / b_scale));
    }
    let gram = gram_factor(m, &block_terms);
    Scaled { m, sizes: p.block_sizes.clone(), c, block_terms, f0, lp_rows, row_scale, col_scale, b_scale, c_scale, gram }
}

fn gram_factor(m: usize, block_terms: &[Vec<(usize, Triplets)>]) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let mut by_entry: std::collections::HashMap<(usize, usize, usize), Vec<(usize, f64)>> = Default::default();
    for (b, terms) in block_terms.iter().enumerate() {
        for (v, t) in terms {
            for &(r, c, val) in t {
                by_entry.entry((b, r, c)).or_default().push((*v, val));
            }
        }
    }
    let mut g = DMatrix::<f64>::zeros(m, m);
    for (&(_, r, c), vs) in &by_entry {
        let w = if r == c { 1.0 } else { 2.0 };
        for &(i, a) in vs {
            for &(j, b) in vs {
                g[(i, j)] += w * a * b;
            }
        }
    }
    let reg = 1e-13 * g.diagonal().amax().max(1e-300);
    for k in 0..m {
        g[(k, k)] += reg;
    }
    g.cholesky()
}

fn add_triplets(mat: &mut BlockMatrix, t: &Triplets, w: f64) {
    for &(r, c, v) in t {
        mat.add_sym(r, c, w * v);
    }
}

/// `tr(F R)` for symmetric `F` given by upper triplets and a general `R`.
fn trace_with(t: &Triplets, r: &BlockMatrix) -> f64 {
    t.iter().map(|&(i, j, v)| v * r.sym_weight(i, j)).sum()
}

fn dot(a: &BlockMatrix, b: &BlockMatrix) -> f64 {
    match (a, b) {
        (BlockMatrix::Dense(x), BlockMatrix::Dense(y)) => x.dot(y),
        (BlockMatrix::Diagonal(x), BlockMatrix::Diagonal(y)) => x.dot(y),
        _ => unreachable!("mismatched block kinds"),
    }
}

fn axpy(a: &BlockMatrix, alpha: f64, d: &BlockMatrix) -> BlockMatrix {
    match (a, d) {
        (BlockMatrix::Dense(x), BlockMatrix::Dense(y)) => BlockMatrix::Dense(x + y * alpha),
        (BlockMatrix::Diagonal(x), BlockMatrix::Diagonal(y)) => BlockMatrix::Diagonal(x + y * alpha),
        _ => unreachable!("mismatched block kinds"),
    }
}

fn scaled_identity(size: i64, v: f64) -> BlockMatrix {
    let n = size.unsigned_abs() as usize;
    if size < 0 {
        BlockMatrix::Diagonal(DVector::from_element(n, v))
    } else {
        BlockMatrix::Dense(DMatrix::identity(n, n) * v)
    }
}

/// Largest `alpha` with `a + alpha d ⪰ 0` (may be infinite), or `None` if `a` is not PD.
fn max_step(a: &BlockMatrix, d: &BlockMatrix) -> Option<f64> {
    match (a, d) {
        (BlockMatrix::Dense(x), BlockMatrix::Dense(dx)) => {
            let ch = Cholesky::new(x.clone())?;
            let l = ch.l();
            let linv = l.clone().try_inverse()?;
            let m = &linv * dx * linv.transpose();
            let m = (&m + m.transpose()) * 0.5;
            let lmin = m.symmetric_eigenvalues().min();
            Some(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
        }
        (BlockMatrix::Diagonal(x), BlockMatrix::Diagonal(dx)) => {
            let mut best = f64::INFINITY;
            for (xv, dv) in x.iter().zip(dx.iter()) {
                if *xv <= 0.0 {
                    return None;
                }
                if *dv < 0.0 {
                    best = best.min(-xv / dv);
                }
            }
            Some(best)
        }
        _ => unreachable!("mismatched block kinds"),
    }
}

fn inverse(a: &BlockMatrix) -> Option<BlockMatrix> {
    match a {
        BlockMatrix::Dense(x) => {
            let inv = Cholesky::new(x.clone())?.inverse();
            Some(BlockMatrix::Dense((&inv + inv.transpose()) * 0.5))
        }
        BlockMatrix::Diagonal(x) => {
            if x.iter().any(|v| *v <= 0.0) {
                return None;
            }
            Some(BlockMatrix::Diagonal(x.map(|v| 1.0 / v)))
        }
    }
}

struct Iterate {
    x: Vec<f64>,
    xs: Vec<BlockMatrix>,
    ys: Vec<BlockMatrix>,
}

struct Direction {
    dx: Vec<f64>,
    dxs: Vec<BlockMatrix>,
    dys: Vec<BlockMatrix>,
}

struct Measures {
    pobj: f64,
    dobj: f64,
    relgap: f64,
    pinf: f64,
    dinf: f64,
    mu: f64,
}

impl Scaled {
    fn primal_residual(&self, it: &Iterate) -> Vec<BlockMatrix> {
        // P = sum x_i F_i - F_0 - X
        let mut out: Vec<BlockMatrix> = self.sizes.iter().map(|&s| BlockMatrix::zeros(s)).collect();
        for (b, terms) in self.block_terms.iter().enumerate() {
            for (v, t) in terms {
                add_triplets(&mut out[b], t, it.x[*v]);
            }
            add_triplets(&mut out[b], &self.f0[b], -1.0);
            out[b] = axpy(&out[b], -1.0, &it.xs[b]);
        }
        out
    }

    fn dual_residual(&self, ys: &[BlockMatrix]) -> Vec<f64> {
        let mut d = self.c.clone();
        for (b, terms) in self.block_terms.iter().enumerate() {
            for (v, t) in terms {
                d[*v] -= trace_with(t, &ys[b]);
            }
        }
        d
    }

    fn measures(&self, it: &Iterate, p: &[BlockMatrix], d: &[f64]) -> Measures {
        let pobj: f64 = self.c.iter().zip(&it.x).map(|(c, x)| c * x).sum();
        let dobj: f64 = self.f0.iter().enumerate().map(|(b, t)| trace_with(t, &it.ys[b])).sum();
        let total: usize = self.sizes.iter().map(|s| s.unsigned_abs() as usize).sum();
        let mu = it.xs.iter().zip(&it.ys).map(|(x, y)| dot(x, y)).sum::<f64>() / total as f64;
        let relgap = (pobj - dobj).abs() / (1e-6f64).max(0.5 * (pobj.abs() + dobj.abs()));
        let f0max = self.f0.iter().flatten().map(|t| t.2.abs()).fold(0.0, f64::max);
        let pinf = p.iter().map(|b| b.max_abs()).fold(0.0, f64::max) / (1.0 + f0max);
        let dinf = d.iter().map(|v| v.abs()).fold(0.0, f64::max) / (1.0 + self.c.iter().map(|v| v.abs()).fold(0.0, f64::max));
        Measures { pobj, dobj, relgap, pinf, dinf, mu }
    }

    fn schur(&self, xinv: &[BlockMatrix], ys: &[BlockMatrix]) -> DMatrix<f64> {
        let mut bmat = DMatrix::zeros(self.m, self.m);
        for (b, terms) in self.block_terms.iter().enumerate() {
            match (&xinv[b], &ys[b]) {
                (BlockMatrix::Dense(xi), BlockMatrix::Dense(y)) => {
                    let n = xi.nrows();
                    for (jdx, (vj, tj)) in terms.iter().enumerate() {
                        // G = X^-1 F_j Y
                        let mut g = DMatrix::zeros(n, n);
                        for &(r, c, v) in tj {
                            g.ger(v, &xi.column(r), &y.row(c).transpose(), 1.0);
                            if r != c {
                                g.ger(v, &xi.column(c), &y.row(r).transpose(), 1.0);
                            }
                        }
                        let gm = BlockMatrix::Dense(g);
                        for (vi, ti) in &terms[..=jdx] {
                            let val = trace_with(ti, &gm);
                            bmat[(*vi, *vj)] += val;
                            if vi != vj {
                                bmat[(*vj, *vi)] += val;
                            }
                        }
                    }
                }
                (BlockMatrix::Diagonal(xi), BlockMatrix::Diagonal(y)) => {
                    for (k, row) in self.lp_rows[b].iter().enumerate() {
                        let w = xi[k] * y[k];
                        for (a, &(vi, fi)) in row.iter().enumerate() {
                            for &(vj, fj) in &row[..=a] {
                                let val = fi * fj * w;
                                bmat[(vi, vj)] += val;
                                if vi != vj {
                                    bmat[(vj, vi)] += val;
                                }
                            }
                        }
                    }
                }
                _ => unreachable!("mismatched block kinds"),
            }
        }
        bmat
    }

    /// Newton direction for target `mu` with optional second-order term `X^-1 dXa dYa`.
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        chol: &SchurSolver,
        it: &Iterate,
        xinv: &[BlockMatrix],
        p: &[BlockMatrix],
        d: &[f64],
        mu: f64,
        corr: Option<&Direction>,
    ) -> Direction {
        let nb = self.sizes.len();
        // R = mu X^-1 - Y - X^-1 P Y - X^-1 dXa dYa
        let mut rmats = Vec::with_capacity(nb);
        for b in 0..nb {
            let r = match (&xinv[b], &it.ys[b], &p[b]) {
                (BlockMatrix::Dense(xi), BlockMatrix::Dense(y), BlockMatrix::Dense(pm)) => {
                    let mut r = xi * mu - y - xi * pm * y;
                    if let Some(cd) = corr {
                        if let (BlockMatrix::Dense(dxa), BlockMatrix::Dense(dya)) = (&cd.dxs[b], &cd.dys[b]) {
                            r -= xi * dxa * dya;
                        }
                    }
                    BlockMatrix::Dense(r)
                }
                (BlockMatrix::Diagonal(xi), BlockMatrix::Diagonal(y), BlockMatrix::Diagonal(pm)) => {
                    let mut r = xi * mu - y - xi.component_mul(pm).component_mul(y);
                    if let Some(cd) = corr {
                        if let (BlockMatrix::Diagonal(dxa), BlockMatrix::Diagonal(dya)) = (&cd.dxs[b], &cd.dys[b]) {
                            r -= xi.component_mul(dxa).component_mul(dya);
                        }
                    }
                    BlockMatrix::Diagonal(r)
                }
                _ => unreachable!("mismatched block kinds"),
            };
            rmats.push(r);
        }
        let mut rhs = DVector::from_iterator(self.m, d.iter().map(|v| -v));
        for (b, terms) in self.block_terms.iter().enumerate() {
            for (v, t) in terms {
                rhs[*v] += trace_with(t, &rmats[b]);
            }
        }
        let dx = chol.solve(&rhs);
        let dx: Vec<f64> = dx.iter().copied().collect();
        let mut dxs: Vec<BlockMatrix> = p.to_vec();
        for (b, terms) in self.block_terms.iter().enumerate() {
            for (v, t) in terms {
                add_triplets(&mut dxs[b], t, dx[*v]);
            }
        }
        let mut dys = Vec::with_capacity(nb);
        for b in 0..nb {
            let dy = match (&xinv[b], &it.ys[b], &dxs[b], &rmats[b]) {
                (BlockMatrix::Dense(xi), BlockMatrix::Dense(y), BlockMatrix::Dense(dxm), BlockMatrix::Dense(_)) => {
                    let mut t = xi * mu - y - xi * dxm * y;
                    if let Some(cd) = corr {
                        if let (BlockMatrix::Dense(dxa), BlockMatrix::Dense(dya)) = (&cd.dxs[b], &cd.dys[b]) {
                            t -= xi * dxa * dya;
                        }
                    }
                    BlockMatrix::Dense((&t + t.transpose()) * 0.5)
                }
                (BlockMatrix::Diagonal(xi), BlockMatrix::Diagonal(y), BlockMatrix::Diagonal(dxm), BlockMatrix::Diagonal(_)) => {
                    let mut t = xi * mu - y - xi.component_mul(dxm).component_mul(y);
                    if let Some(cd) = corr {
                        if let (BlockMatrix::Diagonal(dxa), BlockMatrix::Diagonal(dya)) = (&cd.dxs[b], &cd.dys[b]) {
                            t -= xi.component_mul(dxa).component_mul(dya);
                        }
                    }
                    BlockMatrix::Diagonal(t)
                }
                _ => unreachable!("mismatched block kinds"),
            };
            dys.push(dy);
        }
        // rounding in dY accumulates in <F_i, Y>; remove it by a least-squares correction
        if let Some(g) = &self.gram {
            let mut r = DVector::from_column_slice(d);
            for (b, terms) in self.block_terms.iter().enumerate() {
                for (v, t) in terms {
                    r[*v] -= trace_with(t, &dys[b]);
                }
            }
            let w = g.solve(&r);
            for (b, terms) in self.block_terms.iter().enumerate() {
                for (v, t) in terms {
                    add_triplets(&mut dys[b], t, w[*v]);
                }
            }
        }
        Direction { dx, dxs, dys }
    }

    fn steps(&self, it: &Iterate, dir: &Direction) -> Option<(f64, f64)> {
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for b in 0..self.sizes.len() {
            ap = ap.min(max_step(&it.xs[b], &dir.dxs[b])?);
            ad = ad.min(max_step(&it.ys[b], &dir.dys[b])?);
        }
        Some((ap, ad))
    }

    fn unscale(&self, p: &SdpProblem, it: &Iterate) -> (Vec<f64>, Vec<BlockMatrix>) {
        let x: Vec<f64> = it.x.iter().enumerate().map(|(i, v)| v * self.col_scale[i] * self.b_scale).collect();
        let ys = it
            .ys
            .iter()
            .enumerate()
            .map(|(b, y)| {
                let d = &self.row_scale[b];
                match y {
                    BlockMatrix::Dense(m) => {
                        BlockMatrix::Dense(DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * d[r] * d[c] * self.c_scale))
                    }
                    BlockMatrix::Diagonal(v) => {
                        BlockMatrix::Diagonal(DVector::from_fn(v.len(), |r, _| v[r] * d[r] * d[r] * self.c_scale))
                    }
                }
            })
            .collect();
        debug_assert_eq!(x.len(), p.m());
        (x, ys)
    }
}

struct SchurSolver {
    matrix: DMatrix<f64>,
    chol: Option<Cholesky<f64, nalgebra::Dyn>>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl SchurSolver {
    fn new(matrix: DMatrix<f64>) -> Self {
        let maxdiag = matrix.diagonal().iter().copied().fold(0.0, f64::max).max(1e-300);
        if let Some(ch) = Cholesky::new(matrix.clone()) {
            return SchurSolver { matrix, chol: Some(ch), lu: None };
        }
        let mut b = matrix.clone();
        let mut reg = 1e-14 * maxdiag;
        for _ in 0..8 {
            for k in 0..b.nrows() {
                b[(k, k)] += reg;
            }
            if let Some(ch) = Cholesky::new(b.clone()) {
                return SchurSolver { matrix, chol: Some(ch), lu: None };
            }
            reg *= 10.0;
        }
        SchurSolver { lu: Some(matrix.clone().lu()), matrix, chol: None }
    }

    fn solve_once(&self, rhs: &DVector<f64>) -> DVector<f64> {
        if let Some(ch) = &self.chol {
            return ch.solve(rhs);
        }
        self.lu.as_ref().and_then(|lu| lu.solve(rhs)).unwrap_or_else(|| DVector::zeros(rhs.len()))
    }

    /// Solve with a few rounds of iterative refinement against the unregularized matrix.
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = self.solve_once(rhs);
        let scale = rhs.amax().max(1e-300);
        for _ in 0..3 {
            let r = rhs - &self.matrix * &x;
            if r.amax() <= 1e-15 * scale {
                break;
            }
            x += self.solve_once(&r);
        }
        x
    }
}

fn frob(t: &[(usize, Triplets)]) -> impl Iterator<Item = (usize, f64)> + '_ {
    t.iter().map(|(v, tr)| (*v, tr.iter().map(|e| if e.0 == e.1 { e.2 * e.2 } else { 2.0 * e.2 * e.2 }).sum::<f64>()))
}

/// Solve with the built-in interior-point method.
pub fn solve_builtin(p: &SdpProblem, opts: &SolveOptions) -> SdpSolution {
    let s = scale_problem(p);
    let total: usize = s.sizes.iter().map(|v| v.unsigned_abs() as usize).sum();
    if s.m == 0 || total == 0 {
        let it = Iterate {
            x: vec![0.0; s.m],
            xs: Vec::new(),
            ys: s.sizes.iter().map(|&v| BlockMatrix::zeros(v)).collect(),
        };
        let (x, ys) = s.unscale(p, &it);
        return SdpSolution::evaluate(p, SolveStatus::Failed, x, ys, 0);
    }

    // starting point in the style of CSDP
    let mut fnorm = vec![0.0f64; s.m];
    for terms in &s.block_terms {
        for (v, f2) in frob(terms) {
            fnorm[v] += f2;
        }
    }
    let fnorm: Vec<f64> = fnorm.iter().map(|v| v.sqrt()).collect();
    let f0norm = s.f0.iter().flatten().map(|e| if e.0 == e.1 { e.2 * e.2 } else { 2.0 * e.2 * e.2 }).sum::<f64>().sqrt();
    let ny = total as f64 * (0..s.m).map(|i| (1.0 + s.c[i].abs()) / (1.0 + fnorm[i])).fold(0.0, f64::max);
    let nx = (1.0 + fnorm.iter().copied().fold(f0norm, f64::max)) / (total as f64).sqrt();
    let mut it = Iterate {
        x: vec![0.0; s.m],
        xs: s.sizes.iter().map(|&v| scaled_identity(v, 10.0 * nx)).collect(),
        ys: s.sizes.iter().map(|&v| scaled_identity(v, 10.0 * ny)).collect(),
    };

    let mut status = SolveStatus::Failed;
    let mut iterations = 0;
    let mut best: Option<(f64, Vec<f64>, Vec<BlockMatrix>)> = None;
    let mut stalled = 0;
    for iter in 0..opts.max_iter {
        iterations = iter;
        let pres = s.primal_residual(&it);
        let dres = s.dual_residual(&it.ys);
        let ms = s.measures(&it, &pres, &dres);
        let err = ms.relgap.max(ms.pinf).max(ms.dinf);
        if best.as_ref().is_none_or(|b| err < b.0) {
            best = Some((err, it.x.clone(), it.ys.clone()));
            stalled = 0;
        } else {
            stalled += 1;
        }
        if ms.relgap <= opts.gap_tol && ms.pinf <= opts.feas_tol && ms.dinf <= opts.feas_tol {
            status = SolveStatus::Optimal;
            break;
        }
        // certificates of infeasibility: a dual ray makes <F_0,Y> grow with <F_i,Y> bounded
        if ms.dobj > 1e10 && ms.dinf * (1.0 + 1.0) < 1e-3 {
            status = SolveStatus::Infeasible;
            break;
        }
        if ms.pobj < -1e10 && ms.pinf < 1e-3 {
            status = SolveStatus::Unbounded;
            break;
        }
        if stalled > 30 {
            break;
        }
        let Some(xinv) = it.xs.iter().map(inverse).collect::<Option<Vec<_>>>() else {
            break;
        };
        let solver = SchurSolver::new(s.schur(&xinv, &it.ys));

        let pred = s.direction(&solver, &it, &xinv, &pres, &dres, 0.0, None);
        let Some((ap, ad)) = s.steps(&it, &pred) else {
            break;
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff = it
            .xs
            .iter()
            .zip(&it.ys)
            .enumerate()
            .map(|(b, (x, y))| dot(&axpy(x, ap, &pred.dxs[b]), &axpy(y, ad, &pred.dys[b])))
            .sum::<f64>()
            / total as f64;
        let mut sigma = (mu_aff / ms.mu).max(0.0).powi(3).min(1.0);
        if ms.pinf > 1e-3 || ms.dinf > 1e-3 {
            sigma = sigma.max(0.1);
        }
        let corr = s.direction(&solver, &it, &xinv, &pres, &dres, sigma * ms.mu, Some(&pred));
        let Some((ap, ad)) = s.steps(&it, &corr) else {
            break;
        };
        let gamma = if ms.relgap < 1e-4 { 0.98 } else { 0.95 };
        let mut ap = (gamma * ap).min(1.0);
        let mut ad = (gamma * ad).min(1.0);

        // take the step, halving it while the new iterate is not numerically PD
        let mut accepted = false;
        for _ in 0..30 {
            let xs: Vec<BlockMatrix> = it.xs.iter().zip(&corr.dxs).map(|(x, d)| axpy(x, ap, d)).collect();
            let ys: Vec<BlockMatrix> = it.ys.iter().zip(&corr.dys).map(|(y, d)| axpy(y, ad, d)).collect();
            if xs.iter().chain(&ys).all(|b| inverse(b).is_some()) {
                it.x = it.x.iter().zip(&corr.dx).map(|(x, d)| x + ap * d).collect();
                it.xs = xs;
                it.ys = ys;
                accepted = true;
                break;
            }
            ap *= 0.5;
            ad *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let best_err = best.as_ref().map_or(f64::INFINITY, |b| b.0);
    let (x_s, y_s) = if status == SolveStatus::Optimal || status == SolveStatus::Infeasible || status == SolveStatus::Unbounded {
        (it.x.clone(), it.ys.clone())
    } else {
        let b = best.expect("at least one iterate");
        (b.1, b.2)
    };
    let final_it = Iterate { x: x_s, xs: Vec::new(), ys: y_s };
    let (x, ys) = s.unscale(p, &final_it);
    let mut sol = SdpSolution::evaluate(p, status, x, ys, iterations + 1);
    if status == SolveStatus::Failed {
        if best_err <= 1e-4 {
            sol.status = SolveStatus::NearOptimal;
        }
    }
    sol
}

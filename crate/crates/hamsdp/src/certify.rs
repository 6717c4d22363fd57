//! Turn an approximate dual solution into a bound that does not depend on the
//! solver having converged exactly.
//!
//! For `min c^T x` subject to `X(x) ⪰ 0` and any `Y ⪰ 0`, write
//! `<F_i, Y> = c_i + eps_i`. Every feasible `x` in the box then satisfies
//! `c^T x >= <F_0, Y> - sum_i max_{x_i in box} x_i eps_i`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sdp::{BlockMatrix, KahanSum, SdpProblem, SdpSolution};

/// Relative PSD margin accepted by [`verify_certificate`].
pub const PSD_MARGIN: f64 = 1e-9;
/// Relative window in which [`clamp_dual`] projects onto the PSD cone.
pub const CLAMP_WINDOW: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    /// Dense row-major dual blocks.
    pub y_blocks: Vec<Vec<Vec<f64>>>,
    pub epsilons: Vec<f64>,
    pub dual_obj: f64,
    pub min_eig: f64,
    pub margin: f64,
    #[serde(rename = "box")]
    pub bounds: Vec<(f64, f64)>,
    /// Certified lower bound on the minimization primal.
    pub certified: f64,
}

fn y_norm(y: &[BlockMatrix]) -> f64 {
    y.iter().map(|b| b.max_abs()).fold(0.0, f64::max)
}

/// Certified lower bound on `min c^T x`, with the certificate it rests on.
pub fn verify_certificate(p: &SdpProblem, sol: &SdpSolution, bounds: &[(f64, f64)]) -> Result<(f64, DualCertificate)> {
    if sol.y_blocks.len() != p.block_sizes.len() {
        return Err(Error::Certificate(format!(
            "dual has {} blocks, problem has {}",
            sol.y_blocks.len(),
            p.block_sizes.len()
        )));
    }
    for (b, y) in sol.y_blocks.iter().enumerate() {
        if y.dim() != p.block_dim(b) {
            return Err(Error::Certificate(format!("dual block {b} has size {} instead of {}", y.dim(), p.block_dim(b))));
        }
    }
    if bounds.len() != p.m() {
        return Err(Error::Certificate(format!("box covers {} of {} variables", bounds.len(), p.m())));
    }
    if let Some(k) = bounds.iter().position(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::Certificate(format!("box for variable {k} is not a finite interval")));
    }
    let min_eig = sol.y_blocks.iter().map(|b| b.min_eigenvalue()).fold(f64::INFINITY, f64::min);
    let margin = PSD_MARGIN * y_norm(&sol.y_blocks);
    if min_eig < -margin {
        return Err(Error::Certificate(format!("dual is not PSD: least eigenvalue {min_eig:e} below -{margin:e}")));
    }
    let ip = p.inner_products(&sol.y_blocks);
    let epsilons: Vec<f64> = ip[1..].iter().zip(&p.c).map(|(v, c)| v - c).collect();
    let mut acc = KahanSum::default();
    acc.add(ip[0]);
    for (eps, &(lo, hi)) in epsilons.iter().zip(bounds) {
        acc.add(-(lo * eps).max(hi * eps));
    }
    let certified = acc.value();
    let cert = DualCertificate {
        y_blocks: sol.y_blocks.iter().map(|b| b.to_rows()).collect(),
        epsilons,
        dual_obj: ip[0],
        min_eig,
        margin,
        bounds: bounds.to_vec(),
        certified,
    };
    Ok((certified, cert))
}

/// Project dual blocks with slightly negative eigenvalues onto the PSD cone.
pub fn clamp_dual(p: &SdpProblem, sol: &SdpSolution) -> SdpSolution {
    let window = CLAMP_WINDOW * y_norm(&sol.y_blocks);
    let mut changed = false;
    let blocks: Vec<BlockMatrix> = sol
        .y_blocks
        .iter()
        .map(|b| {
            let lmin = b.min_eigenvalue();
            // below this the eigensolver cannot tell a negative eigenvalue from zero,
            // and projecting again would only move roundoff around
            let noise = 16.0 * f64::EPSILON * b.dim().max(1) as f64 * b.max_abs();
            if !(lmin < -noise && lmin >= -window) {
                return b.clone();
            }
            changed = true;
            psd_part(b)
        })
        .collect();
    if !changed {
        return sol.clone();
    }
    let mut out = SdpSolution::evaluate(p, sol.status, sol.x.clone(), blocks, sol.iterations);
    out.status = sol.status;
    out
}

/// Psd projection of one block.
fn psd_part(b: &BlockMatrix) -> BlockMatrix {
    match b {
        BlockMatrix::Diagonal(v) => BlockMatrix::Diagonal(v.map(|x| x.max(0.0))),
        BlockMatrix::Dense(m) if m.nrows() == 0 => b.clone(),
        BlockMatrix::Dense(m) => {
            let eig = m.clone().symmetric_eigen();
            let vals = eig.eigenvalues.map(|x| x.max(0.0));
            let q = &eig.eigenvectors;
            let proj = q * DMatrix::from_diagonal(&vals) * q.transpose();
            BlockMatrix::Dense((&proj + proj.transpose()) * 0.5)
        }
    }
}

/// Move the dual towards `{Y : <F_i, Y> = c_i}` by alternating least-squares
/// corrections in the span of the `F_i` with projections onto the PSD cone.
/// The result always ends on a projection, so it is PSD.
pub fn repair_dual(p: &SdpProblem, sol: &SdpSolution, rounds: usize) -> SdpSolution {
    let m = p.m();
    if m == 0 || sol.y_blocks.len() != p.block_sizes.len() {
        return sol.clone();
    }
    // Gram matrix <F_i, F_j>
    let mut by_entry: HashMap<(usize, usize, usize), Vec<(usize, f64)>> = HashMap::new();
    for i in 0..m {
        for e in &p.f[i + 1] {
            by_entry.entry((e.block, e.row, e.col)).or_default().push((i, e.value));
        }
    }
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for (&(_, r, c), vs) in &by_entry {
        let w = if r == c { 1.0 } else { 2.0 };
        for &(i, a) in vs {
            for &(j, b) in vs {
                gram[(i, j)] += w * a * b;
            }
        }
    }
    let reg = 1e-13 * gram.diagonal().amax().max(1e-300);
    for k in 0..m {
        gram[(k, k)] += reg;
    }
    let Some(chol) = gram.cholesky() else {
        return sol.clone();
    };
    let mut y: Vec<BlockMatrix> = sol.y_blocks.clone();
    for _ in 0..rounds {
        let ip = p.inner_products(&y);
        let resid = DVector::from_iterator(m, ip[1..].iter().zip(&p.c).map(|(v, c)| c - v));
        if resid.amax() == 0.0 {
            break;
        }
        let w = chol.solve(&resid);
        for i in 0..m {
            for e in &p.f[i + 1] {
                y[e.block].add_sym(e.row, e.col, w[i] * e.value);
            }
        }
        y = y.iter().map(psd_part).collect();
    }
    let mut out = SdpSolution::evaluate(p, sol.status, sol.x.clone(), y, sol.iterations);
    out.status = sol.status;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{Entry, SolveStatus};

    fn lp() -> SdpProblem {
        let e = |v| Entry { block: 0, row: 0, col: 0, value: v };
        SdpProblem::new(vec![1.0], vec![-1], vec![vec![e(1.0)], vec![e(1.0)]]).unwrap()
    }

    fn sol_with(y: f64) -> SdpSolution {
        SdpSolution::evaluate(&lp(), SolveStatus::Optimal, vec![1.0], vec![BlockMatrix::Diagonal(DVector::from_vec(vec![y]))], 1)
    }

    #[test]
    fn exact_dual_certifies_dual_objective() {
        let (v, cert) = verify_certificate(&lp(), &sol_with(1.0), &[(0.0, 1.0)]).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(cert.epsilons, vec![0.0]);
    }

    #[test]
    fn positive_residual_costs_its_size() {
        let (v, _) = verify_certificate(&lp(), &sol_with(1.0 + 1e-6), &[(0.0, 1.0)]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        // dual objective went up by 1e-6 and the residual took it back
        let (v, _) = verify_certificate(&lp(), &sol_with(1.0 - 1e-6), &[(0.0, 1.0)]).unwrap();
        assert!((v - (1.0 - 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn failures() {
        assert!(verify_certificate(&lp(), &sol_with(-1.0), &[(0.0, 1.0)]).is_err());
        assert!(verify_certificate(&lp(), &sol_with(1.0), &[]).is_err());
        let mut s = sol_with(1.0);
        s.y_blocks.clear();
        assert!(verify_certificate(&lp(), &s, &[(0.0, 1.0)]).is_err());
    }

    #[test]
    fn clamp_window() {
        let p = SdpProblem::new(vec![0.0], vec![2], vec![vec![], vec![Entry { block: 0, row: 0, col: 0, value: 1.0 }]]).unwrap();
        let mk = |m: DMatrix<f64>| SdpSolution::evaluate(&p, SolveStatus::Optimal, vec![0.0], vec![BlockMatrix::Dense(m)], 1);
        let psd = mk(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
        assert_eq!(clamp_dual(&p, &psd).y_blocks, psd.y_blocks);
        let tiny = mk(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-12]));
        let c = clamp_dual(&p, &tiny);
        assert!(c.y_blocks[0].min_eigenvalue() >= 0.0);
        let big = mk(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        assert_eq!(clamp_dual(&p, &big).y_blocks, big.y_blocks);
        assert!(verify_certificate(&p, &clamp_dual(&p, &big), &[(0.0, 1.0)]).is_err());
    }

    #[test]
    fn repair_removes_residuals() {
        // min x subject to [[x, 1], [1, x]] ⪰ 0; optimum 1 with dual [[1/2, -1/2], [-1/2, 1/2]]
        let e = |r, c, v| Entry { block: 0, row: r, col: c, value: v };
        let p = SdpProblem::new(vec![1.0], vec![2], vec![vec![e(0, 1, -1.0)], vec![e(0, 0, 1.0), e(1, 1, 1.0)]]).unwrap();
        let y = DMatrix::from_row_slice(2, 2, &[0.5003, -0.4999, -0.4999, 0.5001]);
        let sol = SdpSolution::evaluate(&p, SolveStatus::Optimal, vec![1.0], vec![BlockMatrix::Dense(y)], 1);
        let (before, _) = verify_certificate(&p, &sol, &[(0.0, 2.0)]).unwrap();
        let fixed = repair_dual(&p, &sol, 20);
        let (after, cert) = verify_certificate(&p, &fixed, &[(0.0, 2.0)]).unwrap();
        assert!(after > before);
        assert!(cert.epsilons[0].abs() < 1e-12);
        // the trace correction leaves the off-diagonal, so <F_0, Y> stays at 0.9998
        assert!((after - 0.9998).abs() < 1e-9, "{after}");
    }
}

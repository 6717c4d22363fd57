//! Random SDP instances shared by the property tests and the acceptance run.
#![allow(dead_code)]

use hamsdp::sdp::{BlockMatrix, Entry, SdpProblem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_value(rng: &mut ChaCha8Rng) -> f64 {
    let mant: f64 = rng.random_range(-1.0..1.0);
    mant * 10f64.powi(rng.random_range(-12..12))
}

pub fn random_problem(seed: u64) -> SdpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..6);
    let nblocks = rng.random_range(1..4);
    let sizes: Vec<i64> =
        (0..nblocks).map(|_| rng.random_range(1..5) * if rng.random_bool(0.3) { -1 } else { 1 }).collect();
    let c: Vec<f64> = (0..m).map(|_| random_value(&mut rng)).collect();
    let f: Vec<Vec<Entry>> = (0..=m)
        .map(|_| {
            let mut mat = Vec::new();
            for (b, &s) in sizes.iter().enumerate() {
                let dim = s.unsigned_abs() as usize;
                for r in 0..dim {
                    for col in r..dim {
                        if (s < 0 && r != col) || rng.random_bool(0.5) {
                            continue;
                        }
                        mat.push(Entry { block: b, row: r, col, value: random_value(&mut rng) });
                    }
                }
            }
            mat
        })
        .collect();
    SdpProblem::new(c, sizes, f).unwrap()
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    g.qr().q()
}

/// A problem with a known optimum: primal `x*` in the unit box and a dual `Y*`
/// complementary to `X(x*)`, so `c^T x* = <F_0, Y*>` is the optimal value.
pub fn planted(seed: u64) -> (SdpProblem, f64, Vec<BlockMatrix>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..5);
    let sizes: Vec<i64> =
        (0..rng.random_range(1..4)).map(|_| rng.random_range(1..5) * if rng.random_bool(0.3) { -1 } else { 1 }).collect();
    let x_star: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..0.9)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &s in &sizes {
        let n = s.unsigned_abs() as usize;
        let split = rng.random_range(0..=n);
        let lam: Vec<f64> = (0..n).map(|k| if k < split { rng.random_range(0.5..2.0) } else { 0.0 }).collect();
        let mu: Vec<f64> = (0..n).map(|k| if k < split { 0.0 } else { rng.random_range(0.5..2.0) }).collect();
        if s < 0 {
            xs.push(DMatrix::from_diagonal(&DVector::from_vec(lam)));
            ys.push(BlockMatrix::Diagonal(DVector::from_vec(mu)));
        } else {
            let q = random_orthogonal(&mut rng, n);
            let x = &q * DMatrix::from_diagonal(&DVector::from_vec(lam)) * q.transpose();
            let y = &q * DMatrix::from_diagonal(&DVector::from_vec(mu)) * q.transpose();
            xs.push((&x + x.transpose()) * 0.5);
            ys.push(BlockMatrix::Dense((&y + y.transpose()) * 0.5));
        }
    }
    let mut f: Vec<Vec<Entry>> = vec![Vec::new(); m + 1];
    for (b, &s) in sizes.iter().enumerate() {
        let n = s.unsigned_abs() as usize;
        let mut f0 = -xs[b].clone();
        for i in 0..m {
            let fi = DMatrix::from_fn(n, n, |r, c| if s < 0 && r != c { 0.0 } else { rng.random_range(-1.0..1.0) });
            let fi = (&fi + fi.transpose()) * 0.5;
            f0 += &fi * x_star[i];
            for r in 0..n {
                for col in r..n {
                    f[i + 1].push(Entry { block: b, row: r, col, value: fi[(r, col)] });
                }
            }
        }
        for r in 0..n {
            for col in r..n {
                if s > 0 || r == col {
                    f[0].push(Entry { block: b, row: r, col, value: f0[(r, col)] });
                }
            }
        }
    }
    let probe = SdpProblem::new(vec![0.0; m], sizes.clone(), f.clone()).unwrap();
    let c: Vec<f64> = probe.inner_products(&ys)[1..].to_vec();
    let p = SdpProblem::new(c, sizes, f).unwrap();
    let opt: f64 = p.c.iter().zip(&x_star).map(|(c, x)| c * x).sum();
    (p, opt, ys)
}


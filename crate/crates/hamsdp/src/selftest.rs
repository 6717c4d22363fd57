//! Exact identities and brute-force oracle checks that a build can run on itself.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::combinatorics::{binomial, ipow, krawtchouk, shell_size};
use crate::error::Result;
use crate::terwilliger::{
    beta, beta_symmetric, block_image, block_specs, enumerate_classes, gamma, AlgebraElement, BlockStructure,
    DenseOracle,
};

/// Instances small enough for the dense oracle.
pub const ORACLE_INSTANCES: [(i64, i64); 5] = [(2, 3), (2, 4), (3, 2), (3, 3), (4, 2)];

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_ms: u64,
}

fn timed(name: &str, f: impl FnOnce() -> Result<std::result::Result<String, String>>) -> Check {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(Ok(d)) => (true, d),
        Ok(Err(d)) => (false, d),
        Err(e) => (false, e.to_string()),
    };
    Check { name: name.to_string(), passed, detail, elapsed_ms: start.elapsed().as_millis() as u64 }
}

/// Class counts, block sizes and multiplicities for `q <= 5`, `n <= 16`.
pub fn check_block_counts() -> Check {
    timed("class and block counts", || {
        for q in 2..=5i64 {
            for n in 1..=16i64 {
                let classes = enumerate_classes(q, n)?.len();
                let want = if q == 2 { binomial(n + 3, 3) } else { binomial(n + 4, 4) };
                if BigInt::from(classes) != want {
                    return Ok(Err(format!("|I({q},{n})| = {classes}, expected {want}")));
                }
                let specs = block_specs(q, n)?;
                let squares: usize = specs.iter().map(|s| s.size * s.size).sum();
                if squares != classes {
                    return Ok(Err(format!("sum of squared block sizes {squares} != {classes} for ({q},{n})")));
                }
                let dim: BigInt = specs.iter().map(|s| &s.multiplicity * BigInt::from(s.size)).sum();
                if dim != ipow(q, n) {
                    return Ok(Err(format!("sum of multiplicity * size {dim} != {q}^{n}")));
                }
            }
        }
        Ok(Ok("q <= 5, n <= 16".into()))
    })
}

/// The two sums for `beta` agree for `m <= 20`.
pub fn check_beta_formulas() -> Check {
    timed("beta formulas agree", || {
        let mut count = 0usize;
        for m in 0..=20i64 {
            for k in 0..=m / 2 {
                for i in k..=m - k {
                    for j in k..=m - k {
                        for t in 0..=i.min(j) {
                            let (a, b) = (beta(m, i, j, k, t), beta_symmetric(m, i, j, k, t));
                            if a != b {
                                return Ok(Err(format!("beta({m},{i},{j},{k},{t}): {a} vs {b}")));
                            }
                            count += 1;
                        }
                    }
                }
            }
        }
        Ok(Ok(format!("{count} tuples, m <= 20")))
    })
}

/// `sum_x |S_x| K_j(x) K_l(x) = q^n |S_j| [j = l]` for `q <= 5`, `n <= 12`.
pub fn check_krawtchouk_orthogonality() -> Check {
    timed("Krawtchouk orthogonality", || {
        for q in 2..=5i64 {
            for n in 1..=12i64 {
                let table: Vec<Vec<BigInt>> =
                    (0..=n).map(|j| (0..=n).map(|x| krawtchouk(q, n, j, x)).collect::<Result<_>>()).collect::<Result<_>>()?;
                let shells: Vec<BigInt> = (0..=n).map(|x| shell_size(q, n, x)).collect();
                for j in 0..=n as usize {
                    for l in j..=n as usize {
                        let s: BigInt = (0..=n as usize).map(|x| &shells[x] * &table[j][x] * &table[l][x]).sum();
                        let want = if j == l { ipow(q, n) * &shells[j] } else { BigInt::zero() };
                        if s != want {
                            return Ok(Err(format!("q={q} n={n} j={j} l={l}: {s} != {want}")));
                        }
                    }
                }
            }
        }
        Ok(Ok("q <= 5, n <= 12".into()))
    })
}

/// Class sizes sum to the number of word pairs, `q^(2n)`, for `n <= 10`.
pub fn check_gamma_total() -> Check {
    timed("class sizes sum to q^2n", || {
        for q in 2..=5i64 {
            for n in 1..=10i64 {
                let idx = enumerate_classes(q, n)?;
                let mut total = BigInt::zero();
                for c in idx.classes() {
                    total += gamma(q, n, c)?;
                }
                if total != ipow(q, 2 * n) {
                    return Ok(Err(format!("q={q} n={n}: {total}")));
                }
            }
        }
        Ok(Ok("q <= 5, n <= 10".into()))
    })
}

pub fn exact_identities() -> Vec<Check> {
    vec![check_block_counts(), check_beta_formulas(), check_krawtchouk_orthogonality(), check_gamma_total()]
}

/// `U* M U` predicted from the blocks, with the unitary scalings put back.
fn predicted(oracle: &DenseOracle, st: &BlockStructure, x: &[f64]) -> DMatrix<f64> {
    let blocks = st.evaluate(x);
    let total = oracle.num_words();
    let mut out = DMatrix::zeros(total, total);
    for &(s_idx, start) in &oracle.copies {
        let spec = &st.specs[s_idx];
        let d = st.unitary_scaling(spec);
        let b = &blocks[s_idx];
        for r in 0..spec.size {
            for c in 0..spec.size {
                out[(start + r, start + c)] = d[r] * b[(r, c)] * d[c];
            }
        }
    }
    out
}

fn random_coeff(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Largest entrywise deviation of the unitary transform of 20 random elements
/// from the block-diagonal prediction.
pub fn check_block_transform(q: i64, n: i64, seed: u64) -> Check {
    timed(&format!("block transform ({q},{n})"), || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let oracle = DenseOracle::new(q, n)?;
        let st = BlockStructure::new(&oracle.index)?;
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let x = random_coeff(&mut rng, oracle.index.len());
            let got = oracle.transform_matrix(&oracle.element_matrix(&x));
            let want = predicted(&oracle, &st, &x).map(|v| Complex64::new(v, 0.0));
            worst = worst.max((got - want).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        let detail = format!("max deviation {worst:.2e}");
        Ok(if worst < 1e-9 { Ok(detail) } else { Err(detail) })
    })
}

/// On 50 random symmetric elements, the dense matrix and its blocks agree on
/// whether the least eigenvalue is positive. Elements are `Y Y^T - s I` with the
/// shift drawn so that both signs occur; near-singular draws are skipped.
pub fn check_psd_equivalence(q: i64, n: i64, seed: u64) -> Check {
    timed(&format!("PSD equivalence ({q},{n})"), || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let oracle = DenseOracle::new(q, n)?;
        let size = oracle.num_words();
        let mut seen = [0usize; 2];
        for _ in 0..50 {
            let y = oracle.element_matrix(&random_coeff(&mut rng, oracle.index.len()));
            let gram = &y * y.transpose();
            let lmin = gram.clone().symmetric_eigenvalues().min();
            let m = gram - DMatrix::identity(size, size) * (lmin * rng.random_range(0.0..2.0));
            let dense = m.clone().symmetric_eigenvalues().min();
            let el = AlgebraElement::new(Arc::clone(&oracle.index), oracle.coefficients_of(&m))?;
            let blocks = block_image(&el)?.min_eigenvalue();
            if dense.abs() < 1e-8 || blocks.abs() < 1e-8 {
                continue;
            }
            if (dense > 0.0) != (blocks > 0.0) {
                return Ok(Err(format!("dense least eigenvalue {dense:e}, blocks {blocks:e}")));
            }
            seen[(dense > 0.0) as usize] += 1;
        }
        Ok(Ok(format!("{} positive definite, {} indefinite", seen[1], seen[0])))
    })
}

pub fn dense_oracle(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    for (k, &(q, n)) in ORACLE_INSTANCES.iter().enumerate() {
        out.push(check_block_transform(q, n, seed + k as u64));
        out.push(check_psd_equivalence(q, n, seed + 100 + k as u64));
    }
    out
}

pub fn run_all() -> Vec<Check> {
    let mut out = exact_identities();
    out.extend(dense_oracle(1));
    out
}

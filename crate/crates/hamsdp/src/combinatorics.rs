//! Exact integer kernels: binomials, multinomials, Krawtchouk values and sphere sizes.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type ExactInt = BigInt;

/// Binomial coefficient with the vanishing convention: 0 unless 0 <= k <= n.
pub fn binomial(n: i64, k: i64) -> ExactInt {
    if n < 0 || k < 0 || k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for step in 0..k {
        acc *= n - step;
        acc /= step + 1;
    }
    acc
}

/// `n! / (prod parts! * (n - sum parts)!)`, or 0 if a part is negative or the parts overflow `n`.
pub fn multinomial(n: i64, parts: &[i64]) -> ExactInt {
    let mut rest = n;
    let mut acc = BigInt::one();
    for &part in parts {
        if part < 0 || part > rest {
            return BigInt::zero();
        }
        acc *= binomial(rest, part);
        rest -= part;
    }
    acc
}

/// Integer power with `0^0 = 1`; negative exponents give 0.
pub fn ipow(base: i64, exp: i64) -> ExactInt {
    if exp < 0 {
        return BigInt::zero();
    }
    num_traits::pow(BigInt::from(base), exp as usize)
}

fn check_qn(q: i64, n: i64) -> Result<()> {
    if q < 2 || n < 1 {
        return Err(Error::InvalidArgument(format!("need q >= 2 and n >= 1, got q={q}, n={n}")));
    }
    Ok(())
}

/// K_j(x) = sum_k (-1)^k C(x,k) C(n-x,j-k) (q-1)^(j-k).
pub fn krawtchouk(q: i64, n: i64, j: i64, x: i64) -> Result<ExactInt> {
    check_qn(q, n)?;
    if !(0..=n).contains(&j) || !(0..=n).contains(&x) {
        return Err(Error::InvalidArgument(format!("krawtchouk index out of range: j={j}, x={x}, n={n}")));
    }
    let mut acc = BigInt::zero();
    for k in 0..=j {
        let term = binomial(x, k) * binomial(n - x, j - k) * ipow(q - 1, j - k);
        if k.is_odd() {
            acc -= term;
        } else {
            acc += term;
        }
    }
    Ok(acc)
}

/// Number of words in a Hamming ball of radius `r`.
pub fn sphere_size(q: i64, n: i64, r: i64) -> Result<ExactInt> {
    check_qn(q, n)?;
    if r < 0 || r > n {
        return Err(Error::InvalidArgument(format!("radius {r} outside 0..={n}")));
    }
    Ok((0..=r).map(|i| binomial(n, i) * ipow(q - 1, i)).sum())
}

/// `ceil(q^n / |B_r|)`.
pub fn sphere_covering_bound(q: i64, n: i64, r: i64) -> Result<ExactInt> {
    let ball = sphere_size(q, n, r)?;
    Ok(ipow(q, n).div_ceil(&ball))
}

/// Number of words at distance exactly `i` from a fixed word.
pub fn shell_size(q: i64, n: i64, i: i64) -> ExactInt {
    binomial(n, i) * ipow(q - 1, i)
}

/// A real vector indexed by distance 0..=n, read as the matrix `sum_i x_i A_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceVector {
    pub q: i64,
    pub n: i64,
    pub x: Vec<f64>,
}

impl DistanceVector {
    pub fn new(q: i64, n: i64, x: Vec<f64>) -> Result<Self> {
        check_qn(q, n)?;
        if x.len() != (n + 1) as usize {
            return Err(Error::InvalidArgument(format!("expected {} entries, got {}", n + 1, x.len())));
        }
        Ok(DistanceVector { q, n, x })
    }

    /// Eigenvalues of `sum_i x_i A_i`, one per eigenspace j = 0..=n.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let table = KrawtchoukTable::new(self.q, self.n);
        (0..=self.n as usize)
            .map(|j| (0..=self.n as usize).map(|i| self.x[i] * table.get(i, j)).sum())
            .collect()
    }
}

/// True iff `sum_i x_i A_i` is positive semidefinite, up to a relative tolerance.
///
/// The eigenvalue of `A_i` on the j-th eigenspace is `K_i(j)`.
pub fn distance_vector_psd(v: &DistanceVector) -> bool {
    let table = KrawtchoukTable::new(v.q, v.n);
    let max_x = v.x.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let tol = 1e-10 * max_x * table.max_abs();
    v.eigenvalues().iter().all(|&e| e >= -tol)
}

/// Dense table of `K_j(x)` as floats, indexed `[j][x]`.
#[derive(Clone, Debug)]
pub struct KrawtchoukTable {
    n: usize,
    values: Vec<f64>,
}

impl KrawtchoukTable {
    pub fn new(q: i64, n: i64) -> Self {
        let size = (n + 1) as usize;
        let mut values = vec![0.0; size * size];
        for j in 0..size {
            for x in 0..size {
                values[j * size + x] = krawtchouk(q, n, j as i64, x as i64)
                    .expect("indices in range")
                    .to_f64()
                    .unwrap_or(f64::NAN);
            }
        }
        KrawtchoukTable { n: n as usize, values }
    }

    /// `K_j(x)`.
    pub fn get(&self, j: usize, x: usize) -> f64 {
        self.values[j * (self.n + 1) + x]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Fast exact binomials for inner loops; entries fit in i128 for n <= 120.
#[derive(Clone, Debug)]
pub struct BinomialTable {
    rows: Vec<Vec<i128>>,
}

impl BinomialTable {
    pub fn new(max_n: usize) -> Self {
        let mut rows: Vec<Vec<i128>> = Vec::with_capacity(max_n + 1);
        for n in 0..=max_n {
            let mut row = vec![1i128; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        BinomialTable { rows }
    }

    pub fn get(&self, n: i64, k: i64) -> i128 {
        if n < 0 || k < 0 || k > n {
            return 0;
        }
        self.rows[n as usize][k as usize]
    }
}

/// `base^exp` in i128 with `0^0 = 1` and 0 for negative exponents.
pub fn ipow_i128(base: i64, exp: i64) -> i128 {
    if exp < 0 {
        return 0;
    }
    (base as i128).pow(exp as u32)
}

pub fn to_f64(v: &ExactInt) -> f64 {
    v.to_f64().unwrap_or(if v.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(10, 3), big(120));
        assert_eq!(binomial(4, -1), big(0));
        assert_eq!(binomial(3, 4), big(0));
        assert_eq!(binomial(-2, 1), big(0));
        // product formula computed independently
        let mut expect: u128 = 1;
        for s in 0..18u128 {
            expect = expect * (36 - s) / (s + 1);
        }
        assert_eq!(binomial(36, 18), BigInt::from(expect));
        assert_eq!(binomial(36, 18), big(9_075_135_300));
    }

    #[test]
    fn pascal_rule_up_to_40() {
        for n in 1..=40 {
            for k in 0..=n {
                assert_eq!(binomial(n, k), binomial(n - 1, k - 1) + binomial(n - 1, k));
            }
        }
    }

    #[test]
    fn multinomial_values() {
        assert_eq!(multinomial(2, &[1, 0, 0, 0]), big(2));
        assert_eq!(multinomial(7, &[2, 2, 2]), big(5040 / 8));
        assert_eq!(multinomial(3, &[2, 2]), big(0));
        assert_eq!(multinomial(3, &[-1]), big(0));
    }

    fn words(q: i64, n: i64) -> Vec<Vec<i64>> {
        (0..q.pow(n as u32))
            .map(|mut v| {
                (0..n)
                    .map(|_| {
                        let d = v % q;
                        v /= q;
                        d
                    })
                    .collect()
            })
            .collect()
    }

    // K_j(x) as a character sum over the weight-j words against a fixed weight-x word.
    fn krawtchouk_by_characters(q: i64, n: i64, j: i64, x: i64) -> i64 {
        let u: Vec<i64> = (0..n).map(|h| if h < x { 1 } else { 0 }).collect();
        let mut total = num_complex::Complex64::new(0.0, 0.0);
        for v in words(q, n) {
            if v.iter().filter(|&&d| d != 0).count() as i64 != j {
                continue;
            }
            let dot: i64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            let angle = 2.0 * std::f64::consts::PI * (dot % q) as f64 / q as f64;
            total += num_complex::Complex64::from_polar(1.0, angle);
        }
        assert!(total.im.abs() < 1e-6);
        total.re.round() as i64
    }

    #[test]
    fn krawtchouk_values() {
        assert_eq!(krawtchouk(3, 6, 0, 4).unwrap(), big(1));
        assert_eq!(krawtchouk(3, 6, 2, 0).unwrap(), big(60));
        assert_eq!(krawtchouk(3, 6, 1, 2).unwrap(), big(6));
        assert!(krawtchouk(1, 6, 1, 2).is_err());
        assert!(krawtchouk(3, 6, 7, 2).is_err());
        for q in 2..=4 {
            for n in 1..=4 {
                for j in 0..=n {
                    for x in 0..=n {
                        assert_eq!(
                            krawtchouk(q, n, j, x).unwrap(),
                            big(krawtchouk_by_characters(q, n, j, x)),
                            "q={q} n={n} j={j} x={x}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn krawtchouk_orthogonality() {
        for q in 2..=5i64 {
            for n in 1..=12i64 {
                for j in 0..=n {
                    for l in 0..=n {
                        let s: BigInt = (0..=n)
                            .map(|i| shell_size(q, n, i) * krawtchouk(q, n, j, i).unwrap() * krawtchouk(q, n, l, i).unwrap())
                            .sum();
                        let expect = if j == l { ipow(q, n) * shell_size(q, n, j) } else { BigInt::zero() };
                        assert_eq!(s, expect);
                    }
                }
            }
        }
    }

    #[test]
    fn sphere_sizes() {
        assert_eq!(sphere_size(5, 7, 1).unwrap(), big(29));
        assert_eq!(sphere_size(4, 6, 0).unwrap(), big(1));
        assert_eq!(sphere_size(2, 5, 5).unwrap(), big(32));
        assert!(sphere_size(2, 5, 6).is_err());
        assert_eq!(sphere_covering_bound(5, 7, 1).unwrap(), big(2694));
        assert_eq!(sphere_covering_bound(4, 7, 1).unwrap(), big(745));
        assert_eq!(sphere_covering_bound(3, 13, 1).unwrap(), big(59049));
        assert_eq!(ipow(3, 13) % big(27), big(0));
    }

    #[test]
    fn binomial_table_matches() {
        let t = BinomialTable::new(60);
        for n in -1..=60 {
            for k in -1..=61 {
                assert_eq!(BigInt::from(t.get(n, k)), binomial(n, k));
            }
        }
    }

    #[test]
    fn psd_examples() {
        let e0 = DistanceVector::new(3, 4, vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(distance_vector_psd(&e0));
        let ones = DistanceVector::new(3, 4, vec![1.0; 5]).unwrap();
        assert!(distance_vector_psd(&ones));
        let neg = DistanceVector::new(2, 3, vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        assert!(!distance_vector_psd(&neg));
        assert!(DistanceVector::new(2, 3, vec![1.0]).is_err());
    }

    fn dense_min_eigenvalue(q: i64, n: i64, x: &[f64]) -> f64 {
        let all = words(q, n);
        let size = all.len();
        let m = nalgebra::DMatrix::from_fn(size, size, |r, c| {
            let d = all[r].iter().zip(&all[c]).filter(|(a, b)| a != b).count();
            x[d]
        });
        m.symmetric_eigenvalues().min()
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(100))]
        #[test]
        fn psd_test_agrees_with_dense_matrix(
            q in 2i64..=3,
            n in 1i64..=4,
            raw in proptest::collection::vec(-1.0f64..1.0, 5),
            shift in 0.0f64..3.0,
        ) {
            let mut x: Vec<f64> = raw[..=(n as usize)].to_vec();
            x[0] += shift;
            let v = DistanceVector::new(q, n, x.clone()).unwrap();
            let min_eig = dense_min_eigenvalue(q, n, &x);
            if min_eig.abs() > 1e-8 {
                proptest::prop_assert_eq!(distance_vector_psd(&v), min_eig > 0.0);
            }
        }
    }
}

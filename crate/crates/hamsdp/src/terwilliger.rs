//! Triple classes of the Hamming space and the block diagonalization of the
//! algebra they span.
//!
//! A class `(i, j, t, p)` collects the word pairs `(u, v)` with `|S(u)| = i`,
//! `|S(v)| = j`, `|S(u) ∩ S(v)| = t` and `p` positions where `u` and `v`
//! carry the same nonzero symbol. For `q = 2` every class has `p = t`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, ipow, ipow_i128, multinomial, BinomialTable, ExactInt};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TripleClass {
    pub i: i64,
    pub j: i64,
    pub t: i64,
    pub p: i64,
}

impl TripleClass {
    pub const fn new(i: i64, j: i64, t: i64, p: i64) -> Self {
        TripleClass { i, j, t, p }
    }

    /// Distance between the two words of the pair.
    pub fn distance(&self) -> i64 {
        self.i + self.j - self.t - self.p
    }

    pub fn is_member(&self, q: i64, n: i64) -> bool {
        let TripleClass { i, j, t, p } = *self;
        let base = 0 <= p && p <= t && t <= i.min(j) && i + j <= n + t && i <= n && j <= n;
        base && (q >= 3 || p == t)
    }
}

/// Ordered list of the classes of `I(q, n)` with an inverse lookup.
#[derive(Clone, Debug)]
pub struct ClassIndex {
    pub q: i64,
    pub n: i64,
    classes: Vec<TripleClass>,
    lookup: HashMap<TripleClass, usize>,
}

fn check_qn(q: i64, n: i64) -> Result<()> {
    if q < 2 || n < 1 {
        return Err(Error::InvalidArgument(format!("need q >= 2 and n >= 1, got q={q}, n={n}")));
    }
    Ok(())
}

/// All classes of `I(q, n)` in lexicographic order of `(i, j, t, p)`.
pub fn enumerate_classes(q: i64, n: i64) -> Result<ClassIndex> {
    check_qn(q, n)?;
    let mut classes = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            for t in 0..=i.min(j) {
                for p in 0..=t {
                    let c = TripleClass::new(i, j, t, p);
                    if c.is_member(q, n) {
                        classes.push(c);
                    }
                }
            }
        }
    }
    let lookup = classes.iter().enumerate().map(|(k, c)| (*c, k)).collect();
    Ok(ClassIndex { q, n, classes, lookup })
}

impl ClassIndex {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[TripleClass] {
        &self.classes
    }

    pub fn class(&self, k: usize) -> TripleClass {
        self.classes[k]
    }

    pub fn position(&self, c: &TripleClass) -> Option<usize> {
        self.lookup.get(c).copied()
    }

    /// Position of `(i, i, i, i)`, the class supporting the diagonal at weight `i`.
    pub fn diagonal(&self, i: i64) -> usize {
        self.lookup[&TripleClass::new(i, i, i, i)]
    }

    /// Position of `(i, 0, 0, 0)`.
    pub fn column0(&self, i: i64) -> usize {
        self.lookup[&TripleClass::new(i, 0, 0, 0)]
    }

    /// Classes related to `c` by permuting `(i, j, distance)` with `t - p` fixed.
    pub fn symmetry_orbit(&self, c: &TripleClass) -> Vec<TripleClass> {
        let e = c.t - c.p;
        let triple = [c.i, c.j, c.distance()];
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut out: Vec<TripleClass> = Vec::new();
        for perm in perms {
            let (i, j, d) = (triple[perm[0]], triple[perm[1]], triple[perm[2]]);
            let sum = i + j - d + e;
            if sum < 0 || sum % 2 != 0 {
                continue;
            }
            let t = sum / 2;
            let cand = TripleClass::new(i, j, t, t - e);
            if cand.is_member(self.q, self.n) && !out.contains(&cand) {
                out.push(cand);
            }
        }
        out.sort();
        out
    }

    /// Smallest member of the symmetry orbit of `c`.
    pub fn symmetry_representative(&self, c: &TripleClass) -> TripleClass {
        self.symmetry_orbit(c)[0]
    }
}

/// Number of nonzero entries of the basis matrix of class `c`.
pub fn gamma(q: i64, n: i64, c: &TripleClass) -> Result<ExactInt> {
    check_qn(q, n)?;
    if !c.is_member(q, n) {
        return Err(Error::InvalidArgument(format!("{c:?} is not a class for q={q}, n={n}")));
    }
    let TripleClass { i, j, t, p } = *c;
    Ok(ipow(q - 1, i + j - t) * ipow(q - 2, t - p) * multinomial(n, &[p, t - p, i - t, j - t]))
}

/// The block coefficient `beta_{i,j,k}^{m,t}`.
pub fn beta(m: i64, i: i64, j: i64, k: i64, t: i64) -> ExactInt {
    let mut acc = BigInt::zero();
    for p in 0..=k.max(0) {
        let term = binomial(k, p) * binomial(i - p, t - p) * binomial(m + p - i - k, m + t - i - j);
        if (k - p) % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    binomial(m - 2 * k, i - k) * acc
}

/// The same number through the sum that is visibly symmetric in `i` and `j`.
pub fn beta_symmetric(m: i64, i: i64, j: i64, k: i64, t: i64) -> ExactInt {
    let mut acc = BigInt::zero();
    for u in 0..=m.max(0) {
        let term = binomial(u, t) * binomial(m - 2 * k, u - k) * binomial(m - k - u, i - u) * binomial(m - k - u, j - u);
        if (u - t).rem_euclid(2) == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

fn beta_fast(bin: &BinomialTable, m: i64, i: i64, j: i64, k: i64, t: i64) -> i128 {
    let mut acc = 0i128;
    for p in 0..=k.max(0) {
        let term = bin.get(k, p) * bin.get(i - p, t - p) * bin.get(m + p - i - k, m + t - i - j);
        if (k - p) % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    bin.get(m - 2 * k, i - k) * acc
}

fn alpha_core_fast(bin: &BinomialTable, q: i64, n: i64, c: &TripleClass, a: i64, k: i64) -> i128 {
    let TripleClass { i, j, t, p } = *c;
    let b = beta_fast(bin, n - a, i - a, j - a, k - a, t - a);
    if b == 0 {
        return 0;
    }
    let mut g_sum = 0i128;
    for g in 0..=p {
        let term = bin.get(a, g) * bin.get(t - a, p - g) * ipow_i128(q - 2, t - a - p + g);
        if (a - g) % 2 == 0 {
            g_sum += term;
        } else {
            g_sum -= term;
        }
    }
    b * g_sum
}

/// Integer part of `alpha`: the beta factor times the alternating sum over `g`.
pub fn alpha_core(q: i64, n: i64, i: i64, j: i64, t: i64, p: i64, a: i64, k: i64) -> ExactInt {
    let b = beta(n - a, i - a, j - a, k - a, t - a);
    let mut g_sum = BigInt::zero();
    for g in 0..=p.max(0) {
        let term = binomial(a, g) * binomial(t - a, p - g) * ipow(q - 2, t - a - p + g);
        if (a - g) % 2 == 0 {
            g_sum += term;
        } else {
            g_sum -= term;
        }
    }
    b * g_sum
}

/// Block coefficient `alpha(i,j,t,p,a,k)` for `q >= 3`.
#[allow(clippy::too_many_arguments)]
pub fn alpha(q: i64, n: i64, i: i64, j: i64, t: i64, p: i64, a: i64, k: i64) -> Result<f64> {
    if q < 3 {
        return Err(Error::InvalidArgument("alpha needs q >= 3".into()));
    }
    if !(0 <= a && a <= k && k <= i.min(j)) {
        return Err(Error::InvalidArgument(format!("need 0 <= a <= k <= min(i,j), got a={a}, k={k}, i={i}, j={j}")));
    }
    let core = alpha_core(q, n, i, j, t, p, a, k);
    Ok(core.to_f64().unwrap_or(f64::NAN) * ((q - 1) as f64).sqrt().powi((i + j - 2 * t) as i32))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub a: i64,
    pub k: i64,
    pub size: usize,
    #[serde(with = "bigint_string")]
    pub multiplicity: ExactInt,
    pub row_labels: Vec<i64>,
}

mod bigint_string {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Block layout: one spec per `(a, k)` with `0 <= a <= k` and `2k - a <= n`.
///
/// For `q = 2` only `a = 0` occurs.
pub fn block_specs(q: i64, n: i64) -> Result<Vec<BlockSpec>> {
    check_qn(q, n)?;
    let max_a = if q == 2 { 0 } else { n };
    let mut specs = Vec::new();
    for a in 0..=max_a {
        for k in a..=n {
            if 2 * k - a > n {
                break;
            }
            let multiplicity =
                binomial(n, a) * ipow(q - 2, a) * (binomial(n - a, k - a) - binomial(n - a, k - a - 1));
            specs.push(BlockSpec {
                a,
                k,
                size: (n + a + 1 - 2 * k) as usize,
                multiplicity,
                row_labels: (k..=n + a - k).collect(),
            });
        }
    }
    Ok(specs)
}

/// Linear map from class coefficients to the entries of every block.
///
/// `entries[s][r * size + c]` lists `(class position, coefficient)`.
#[derive(Clone, Debug)]
pub struct BlockStructure {
    pub q: i64,
    pub n: i64,
    pub specs: Vec<BlockSpec>,
    pub entries: Vec<Vec<Vec<(usize, f64)>>>,
}

impl BlockStructure {
    pub fn new(index: &ClassIndex) -> Result<Self> {
        let (q, n) = (index.q, index.n);
        let specs = block_specs(q, n)?;
        let bin = BinomialTable::new((2 * n + 4) as usize);
        let root = ((q - 1) as f64).sqrt();
        let mut entries: Vec<Vec<Vec<(usize, f64)>>> =
            specs.iter().map(|s| vec![Vec::new(); s.size * s.size]).collect();
        for (pos, c) in index.classes().iter().enumerate() {
            for (s_idx, spec) in specs.iter().enumerate() {
                let (a, k) = (spec.a, spec.k);
                let hi = n + a - k;
                if c.i.min(c.j) < k || c.i.max(c.j) > hi || c.t < a {
                    continue;
                }
                let core = if q == 2 {
                    beta_fast(&bin, n, c.i, c.j, k, c.t)
                } else {
                    alpha_core_fast(&bin, q, n, c, a, k)
                };
                if core == 0 {
                    continue;
                }
                let value = core as f64 * root.powi((c.i + c.j - 2 * c.t) as i32);
                let (r, col) = ((c.i - k) as usize, (c.j - k) as usize);
                entries[s_idx][r * spec.size + col].push((pos, value));
            }
        }
        Ok(BlockStructure { q, n, specs, entries })
    }

    /// Evaluate every block at the coefficient vector `x`.
    pub fn evaluate(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.specs
            .iter()
            .zip(&self.entries)
            .map(|(spec, ent)| {
                let s = spec.size;
                DMatrix::from_fn(s, s, |r, c| ent[r * s + c].iter().map(|&(pos, coef)| coef * x[pos]).sum())
            })
            .collect()
    }

    /// Diagonal congruence factors `C(n+a-2k, i-k)^(-1/2)` that turn a block into
    /// the corresponding block of the unitary transform.
    pub fn unitary_scaling(&self, spec: &BlockSpec) -> Vec<f64> {
        let m = self.n + spec.a - 2 * spec.k;
        (0..spec.size as i64).map(|r| 1.0 / binomial(m, r).to_f64().unwrap().sqrt()).collect()
    }

    /// Weight multiplying `x_{i,i}^{i,i}` in the border of the `(0,0)` block.
    pub fn border_weight(&self, i: i64) -> f64 {
        binomial(self.n, i).to_f64().unwrap() * ((self.q - 1) as f64).sqrt().powi(i as i32)
    }
}

/// A coefficient vector over `I(q, n)`.
#[derive(Clone, Debug)]
pub struct AlgebraElement {
    pub index: Arc<ClassIndex>,
    pub coeff: Vec<f64>,
}

impl AlgebraElement {
    pub fn new(index: Arc<ClassIndex>, coeff: Vec<f64>) -> Result<Self> {
        if coeff.len() != index.len() {
            return Err(Error::IndexMismatch(format!("{} coefficients for {} classes", coeff.len(), index.len())));
        }
        Ok(AlgebraElement { index, coeff })
    }

    pub fn zeros(index: Arc<ClassIndex>) -> Self {
        let len = index.len();
        AlgebraElement { index, coeff: vec![0.0; len] }
    }

    /// The identity matrix: coefficient 1 on every `(i, i, i, i)`.
    pub fn identity(index: Arc<ClassIndex>) -> Self {
        let mut e = Self::zeros(index.clone());
        for i in 0..=index.n {
            e.coeff[index.diagonal(i)] = 1.0;
        }
        e
    }

    pub fn get(&self, c: &TripleClass) -> f64 {
        self.index.position(c).map_or(0.0, |k| self.coeff[k])
    }

    /// Text form: header `q n`, then `i j t p coefficient` per class.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.index.q, self.index.n);
        for (c, v) in self.index.classes().iter().zip(&self.coeff) {
            out.push_str(&format!("{} {} {} {} {:?}\n", c.i, c.j, c.t, c.p, v));
        }
        out
    }

    /// Parse the text form; coefficients may be decimals or `num/den`. Missing classes are 0.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(Error::Parse { line: hline + 1, msg: "header must be `q n`".into() });
        }
        let parse_int = |s: &str, line: usize| -> Result<i64> {
            s.parse::<i64>().map_err(|e| Error::Parse { line, msg: format!("bad integer `{s}`: {e}") })
        };
        let q = parse_int(head[0], hline + 1)?;
        let n = parse_int(head[1], hline + 1)?;
        let index = Arc::new(enumerate_classes(q, n)?);
        let mut e = AlgebraElement::zeros(index.clone());
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(Error::Parse { line: ln + 1, msg: "expected `i j t p coefficient`".into() });
            }
            let c = TripleClass::new(
                parse_int(f[0], ln + 1)?,
                parse_int(f[1], ln + 1)?,
                parse_int(f[2], ln + 1)?,
                parse_int(f[3], ln + 1)?,
            );
            let pos = index
                .position(&c)
                .ok_or_else(|| Error::Parse { line: ln + 1, msg: format!("{c:?} is not a class") })?;
            e.coeff[pos] = parse_real(f[4]).map_err(|msg| Error::Parse { line: ln + 1, msg })?;
        }
        Ok(e)
    }
}

/// Parse a decimal or a rational `num/den`.
pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    if let Some((a, b)) = s.split_once('/') {
        let num: f64 = a.trim().parse().map_err(|e| format!("bad numerator `{a}`: {e}"))?;
        let den: f64 = b.trim().parse().map_err(|e| format!("bad denominator `{b}`: {e}"))?;
        if den == 0.0 {
            return Err("zero denominator".into());
        }
        Ok(num / den)
    } else {
        s.trim().parse().map_err(|e| format!("bad number `{s}`: {e}"))
    }
}

#[derive(Clone, Debug)]
pub struct BlockDiagonalForm {
    pub specs: Vec<BlockSpec>,
    pub blocks: Vec<DMatrix<f64>>,
    pub bordered: bool,
}

impl BlockDiagonalForm {
    /// Least eigenvalue over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .filter(|b| b.nrows() > 0)
            .map(|b| b.clone().symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min)
    }
}

fn structure_for(x: &AlgebraElement) -> Result<BlockStructure> {
    BlockStructure::new(&x.index)
}

/// Blocks `(sum_{t,p} alpha(i,j,t,p,a,k) x_{i,j}^{t,p})_{i,j}` for every `(a, k)`.
pub fn block_image(x: &AlgebraElement) -> Result<BlockDiagonalForm> {
    let st = structure_for(x)?;
    Ok(BlockDiagonalForm { blocks: st.evaluate(&x.coeff), specs: st.specs, bordered: false })
}

/// Binary blocks `(sum_t beta_{i,j,k}^t x_{i,j}^t)_{i,j=k}^{n-k}`.
pub fn binary_block_image(x: &AlgebraElement) -> Result<BlockDiagonalForm> {
    if x.index.q != 2 {
        return Err(Error::IndexMismatch(format!("binary block image needs q = 2, got {}", x.index.q)));
    }
    block_image(x)
}

/// As [`block_image`], with the `(0,0)` block bordered by `corner` and the diagonal
/// coefficients `x_{i,i}^{i,i}` weighted by [`BlockStructure::border_weight`].
pub fn bordered_block_image(x: &AlgebraElement, corner: f64) -> Result<BlockDiagonalForm> {
    let st = structure_for(x)?;
    let mut blocks = st.evaluate(&x.coeff);
    let n = x.index.n;
    let inner = &blocks[0];
    let size = inner.nrows() + 1;
    let mut b = DMatrix::zeros(size, size);
    b[(0, 0)] = corner;
    for i in 0..=n {
        let v = st.border_weight(i) * x.coeff[x.index.diagonal(i)];
        b[(0, (i + 1) as usize)] = v;
        b[((i + 1) as usize, 0)] = v;
    }
    b.view_mut((1, 1), (size - 1, size - 1)).copy_from(inner);
    blocks[0] = b;
    Ok(BlockDiagonalForm { specs: st.specs, blocks, bordered: true })
}

/// Block diagonalization of the Terwilliger algebra of the binary Johnson scheme.
///
/// `coeffs` maps `(i, j, s, t)` to the coefficient of the matrix with
/// `|U ∩ W| = i`, `|V ∩ W| = j`, `|U ∩ V ∩ W| = s`, `|U ∩ V \ W| = t`.
/// Blocks are indexed by `(k, k')` and carry row labels `i` with
/// `k <= i <= w - k` and `2w - n + k' <= i <= w - k'`.
pub fn johnson_block_image(n: i64, w: i64, coeffs: &BTreeMap<(i64, i64, i64, i64), f64>) -> Result<JohnsonBlocks> {
    johnson_blocks(n, w, coeffs, false)
}

/// As [`johnson_block_image`] with the binomial prefactors kept, so the blocks are
/// similar (not just congruent) to the corresponding restrictions of the dense matrix.
pub fn johnson_unitary_block_image(
    n: i64,
    w: i64,
    coeffs: &BTreeMap<(i64, i64, i64, i64), f64>,
) -> Result<JohnsonBlocks> {
    johnson_blocks(n, w, coeffs, true)
}

#[derive(Clone, Debug)]
pub struct JohnsonBlock {
    pub k: i64,
    pub k2: i64,
    pub multiplicity: ExactInt,
    pub row_labels: Vec<i64>,
    pub matrix: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct JohnsonBlocks {
    pub blocks: Vec<JohnsonBlock>,
}

fn johnson_blocks(
    n: i64,
    w: i64,
    coeffs: &BTreeMap<(i64, i64, i64, i64), f64>,
    unitary: bool,
) -> Result<JohnsonBlocks> {
    if w < 1 || 2 * w > n {
        return Err(Error::InvalidArgument(format!("need 1 <= w <= n/2, got n={n}, w={w}")));
    }
    let rest = n - w;
    let mut blocks = Vec::new();
    for k in 0..=w / 2 {
        for k2 in 0..=rest / 2 {
            if k + k2 > w {
                continue;
            }
            let lo = k.max(2 * w - n + k2);
            let hi = (w - k).min(w - k2);
            if lo > hi {
                continue;
            }
            let labels: Vec<i64> = (lo..=hi).collect();
            let size = labels.len();
            let mut m = DMatrix::zeros(size, size);
            for (r, &i) in labels.iter().enumerate() {
                for (c, &j) in labels.iter().enumerate() {
                    let mut v = 0.0;
                    for (&(ci, cj, s, t), &x) in coeffs.range((i, j, i64::MIN, i64::MIN)..=(i, j, i64::MAX, i64::MAX)) {
                        debug_assert!(ci == i && cj == j);
                        let b1 = beta(w, i, j, k, s);
                        let b2 = beta(rest, w - i, w - j, k2, t);
                        v += x * (b1 * b2).to_f64().unwrap();
                    }
                    if unitary {
                        let f = binomial(w - 2 * k, i - k) * binomial(w - 2 * k, j - k)
                            * binomial(rest - 2 * k2, w - i - k2) * binomial(rest - 2 * k2, w - j - k2);
                        v /= f.to_f64().unwrap().sqrt();
                    }
                    m[(r, c)] = v;
                }
            }
            let multiplicity = (binomial(w, k) - binomial(w, k - 1)) * (binomial(rest, k2) - binomial(rest, k2 - 1));
            blocks.push(JohnsonBlock { k, k2, multiplicity, row_labels: labels, matrix: m });
        }
    }
    Ok(JohnsonBlocks { blocks })
}

/// Brute-force model of the Hamming space for tiny `q^n`: every basis matrix,
/// and the unitary matrix whose columns are the block-diagonalizing vectors.
pub struct DenseOracle {
    pub q: i64,
    pub n: i64,
    pub index: Arc<ClassIndex>,
    pub words: Vec<Vec<u8>>,
    /// Class position of every ordered word pair, row-major.
    pub class_of: Vec<u32>,
    pub transform: DMatrix<Complex64>,
    /// `(spec position, first column)` of every block copy, in column order.
    pub copies: Vec<(usize, usize)>,
    pub specs: Vec<BlockSpec>,
}

pub const ORACLE_MAX_WORDS: i64 = 4096;

fn support(word: &[u8]) -> u32 {
    word.iter().enumerate().filter(|(_, &s)| s != 0).fold(0u32, |m, (h, _)| m | (1 << h))
}

fn subsets_of(set: u32, size: u32) -> Vec<u32> {
    let elems: Vec<u32> = (0..32).filter(|h| set & (1 << h) != 0).collect();
    let mut out = Vec::new();
    let total = 1u64 << elems.len();
    for pick in 0..total {
        if pick.count_ones() != size {
            continue;
        }
        let mut m = 0u32;
        for (bit, &e) in elems.iter().enumerate() {
            if pick & (1 << bit) != 0 {
                m |= 1 << e;
            }
        }
        out.push(m);
    }
    out
}

/// Orthonormal basis of the weight-`k` vectors on subsets of `ground` that are
/// annihilated by the down-incidence map to weight `k - 1`.
fn kernel_basis(ground: u32, k: u32) -> Result<(Vec<u32>, Vec<Vec<f64>>)> {
    let top = subsets_of(ground, k);
    if k == 0 {
        return Ok((top, vec![vec![1.0]]));
    }
    let below = subsets_of(ground, k - 1);
    let m = ground.count_ones() as i64;
    let expected = (binomial(m, k as i64) - binomial(m, k as i64 - 1)).to_i64().unwrap();
    if expected <= 0 {
        return Ok((top, Vec::new()));
    }
    let inc = DMatrix::<f64>::from_fn(below.len(), top.len(), |r, c| if below[r] & !top[c] == 0 { 1.0 } else { 0.0 });
    // null space from the eigenvectors of inc^T inc with (numerically) zero eigenvalue
    let gram = inc.transpose() * &inc;
    let eig = gram.symmetric_eigen();
    let mut basis = Vec::new();
    for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.abs() < 1e-8 {
            basis.push(eig.eigenvectors.column(idx).iter().copied().collect::<Vec<f64>>());
        }
    }
    if basis.len() as i64 != expected {
        return Err(Error::InvalidArgument(format!(
            "kernel of the incidence map has dimension {} instead of {expected}",
            basis.len()
        )));
    }
    Ok((top, basis))
}

impl DenseOracle {
    pub fn new(q: i64, n: i64) -> Result<Self> {
        check_qn(q, n)?;
        let size = (q as f64).powi(n as i32);
        if size > ORACLE_MAX_WORDS as f64 {
            return Err(Error::SizeLimit(format!("q^n = {size} exceeds {ORACLE_MAX_WORDS}")));
        }
        let index = Arc::new(enumerate_classes(q, n)?);
        let total = q.pow(n as u32) as usize;
        let words: Vec<Vec<u8>> = (0..total)
            .map(|mut v| {
                (0..n)
                    .map(|_| {
                        let d = (v % q as usize) as u8;
                        v /= q as usize;
                        d
                    })
                    .collect()
            })
            .collect();
        let mut class_of = vec![0u32; total * total];
        for (r, u) in words.iter().enumerate() {
            for (c, v) in words.iter().enumerate() {
                let i = u.iter().filter(|&&s| s != 0).count() as i64;
                let j = v.iter().filter(|&&s| s != 0).count() as i64;
                let t = u.iter().zip(v).filter(|(&a, &b)| a != 0 && b != 0).count() as i64;
                let p = u.iter().zip(v).filter(|(&a, &b)| a != 0 && a == b).count() as i64;
                let pos = index
                    .position(&TripleClass::new(i, j, t, p))
                    .ok_or_else(|| Error::InvalidArgument("word pair outside I(q,n)".into()))?;
                class_of[r * total + c] = pos as u32;
            }
        }

        let specs = block_specs(q, n)?;
        let full: u32 = (1u32 << n) - 1;
        let phi = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / (q - 1) as f64);
        let supports: Vec<u32> = words.iter().map(|w| support(w)).collect();
        let mut columns: Vec<Vec<Complex64>> = Vec::new();
        let mut copies = Vec::new();
        for (s_idx, spec) in specs.iter().enumerate() {
            if spec.multiplicity.is_zero() {
                continue;
            }
            let (a, k) = (spec.a, spec.k);
            // words a with |S(a)| = a and symbols in 1..=q-2
            let a_words: Vec<&Vec<u8>> = words
                .iter()
                .filter(|w| w.iter().filter(|&&s| s != 0).count() as i64 == a && w.iter().all(|&s| (s as i64) != q - 1))
                .collect();
            for aw in a_words {
                let sa = support(aw);
                let ground = full & !sa;
                let (sets, basis) = kernel_basis(ground, (k - a) as u32)?;
                for b in &basis {
                    copies.push((s_idx, columns.len()));
                    for i in k..=n + a - k {
                        let pref = ((q - 1) as f64).powf(-(i as f64) / 2.0)
                            / binomial(n + a - 2 * k, i - k).to_f64().unwrap().sqrt();
                        let mut col = vec![Complex64::zero(); total];
                        for (widx, x) in words.iter().enumerate() {
                            let sx = supports[widx];
                            if sx.count_ones() as i64 != i || sx & sa != sa {
                                continue;
                            }
                            let rest = sx & !sa;
                            let mut val = 0.0;
                            for (pos, &y) in sets.iter().enumerate() {
                                if y & !rest == 0 {
                                    val += b[pos];
                                }
                            }
                            if val == 0.0 {
                                continue;
                            }
                            let dot: i64 = aw.iter().zip(x).map(|(&p1, &p2)| p1 as i64 * p2 as i64).sum();
                            col[widx] = phi.powi(dot as i32) * (pref * val);
                        }
                        columns.push(col);
                    }
                }
            }
        }
        if columns.len() != total {
            return Err(Error::InvalidArgument(format!("built {} columns for {} words", columns.len(), total)));
        }
        let transform = DMatrix::from_fn(total, total, |r, c| columns[c][r]);
        let oracle = DenseOracle { q, n, index, words, class_of, transform, copies, specs };
        let err = oracle.unitarity_error();
        if err > 1e-10 {
            return Err(Error::InvalidArgument(format!("transform is not unitary: error {err:e}")));
        }
        Ok(oracle)
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    /// `max |(U* U - I)_{rc}|`.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.transform.adjoint() * &self.transform;
        let mut err: f64 = 0.0;
        for r in 0..prod.nrows() {
            for c in 0..prod.ncols() {
                let target = if r == c { 1.0 } else { 0.0 };
                err = err.max((prod[(r, c)] - Complex64::new(target, 0.0)).norm());
            }
        }
        err
    }

    /// The 0-1 matrix of one class.
    pub fn basis_matrix(&self, class: usize) -> DMatrix<f64> {
        let total = self.num_words();
        DMatrix::from_fn(total, total, |r, c| if self.class_of[r * total + c] as usize == class { 1.0 } else { 0.0 })
    }

    /// `sum_c x_c M_c` as a dense matrix.
    pub fn element_matrix(&self, coeff: &[f64]) -> DMatrix<f64> {
        let total = self.num_words();
        DMatrix::from_fn(total, total, |r, c| coeff[self.class_of[r * total + c] as usize])
    }

    /// Coefficients of an algebra element given as a dense matrix (read off one pair per class).
    pub fn coefficients_of(&self, m: &DMatrix<f64>) -> Vec<f64> {
        let total = self.num_words();
        let mut coeff = vec![0.0; self.index.len()];
        for r in 0..total {
            for c in 0..total {
                coeff[self.class_of[r * total + c] as usize] = m[(r, c)];
            }
        }
        coeff
    }

    /// `U* M U` for a real matrix `M`.
    pub fn transform_matrix(&self, m: &DMatrix<f64>) -> DMatrix<Complex64> {
        let mc = m.map(|v| Complex64::new(v, 0.0));
        self.transform.adjoint() * mc * &self.transform
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_counts() {
        assert_eq!(enumerate_classes(2, 4).unwrap().len(), 35);
        assert_eq!(enumerate_classes(3, 7).unwrap().len(), 330);
        let small = enumerate_classes(3, 1).unwrap();
        assert_eq!(
            small.classes(),
            &[
                TripleClass::new(0, 0, 0, 0),
                TripleClass::new(0, 1, 0, 0),
                TripleClass::new(1, 0, 0, 0),
                TripleClass::new(1, 1, 1, 0),
                TripleClass::new(1, 1, 1, 1),
            ]
        );
        assert!(enumerate_classes(1, 3).is_err());
        assert!(enumerate_classes(3, 0).is_err());
    }

    #[test]
    fn gamma_by_enumeration() {
        // pairs (v, w) over 3^2 with the zero word as base, counted per class
        let idx = enumerate_classes(3, 2).unwrap();
        let oracle = DenseOracle::new(3, 2).unwrap();
        let total = oracle.num_words();
        for (pos, c) in idx.classes().iter().enumerate() {
            let count = oracle.class_of.iter().filter(|&&k| k as usize == pos).count();
            assert_eq!(gamma(3, 2, c).unwrap(), BigInt::from(count), "{c:?}");
        }
        assert_eq!(total, 9);
        assert_eq!(gamma(3, 2, &TripleClass::new(1, 1, 1, 1)).unwrap(), BigInt::from(4));
        // two positions times two ordered pairs of distinct nonzero symbols
        assert_eq!(gamma(3, 2, &TripleClass::new(1, 1, 1, 0)).unwrap(), BigInt::from(4));
        assert_eq!(gamma(5, 4, &TripleClass::new(0, 0, 0, 0)).unwrap(), BigInt::from(1));
        assert!(gamma(3, 2, &TripleClass::new(1, 1, 2, 0)).is_err());
    }

    #[test]
    fn gamma_sums_to_all_pairs() {
        for q in 2..=5 {
            for n in 1..=10 {
                let idx = enumerate_classes(q, n).unwrap();
                let total: BigInt = idx.classes().iter().map(|c| gamma(q, n, c).unwrap()).sum();
                assert_eq!(total, ipow(q, 2 * n), "q={q} n={n}");
                let expect = if q == 2 { binomial(n + 3, 3) } else { binomial(n + 4, 4) };
                assert_eq!(BigInt::from(idx.len()), expect);
            }
        }
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta(4, 2, 2, 0, 1), BigInt::from(24));
        assert_eq!(beta_symmetric(4, 2, 2, 0, 1), BigInt::from(24));
        assert_eq!(beta(4, 2, 2, 0, 1), binomial(4, 2) * binomial(2, 1) * binomial(2, 4 + 1 - 2 - 2));
        assert_eq!(beta(6, 3, 3, 3, 3), BigInt::from(1));
        assert_eq!(beta_symmetric(6, 3, 3, 3, 3), BigInt::from(1));
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha(3, 2, 1, 1, 1, 1, 0, 0).unwrap(), 2.0);
        assert!(alpha(2, 2, 1, 1, 1, 1, 0, 0).is_err());
        assert!(alpha(3, 2, 1, 1, 1, 1, 1, 0).is_err());
        // a = k = 0, t = p = 0 reduces to beta times (q-1)^((i+j)/2)
        for q in 3..=5 {
            for i in 0..=4 {
                for j in 0..=4 {
                    let expect = beta(4, i, j, 0, 0).to_f64().unwrap() * ((q - 1) as f64).powf((i + j) as f64 / 2.0);
                    let got = alpha(q, 4, i, j, 0, 0, 0, 0).unwrap();
                    assert!((got - expect).abs() <= 1e-9 * expect.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn block_spec_examples() {
        let specs = block_specs(3, 4).unwrap();
        let ak: Vec<(i64, i64)> = specs.iter().map(|s| (s.a, s.k)).collect();
        assert_eq!(ak, vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2), (2, 3), (3, 3), (4, 4)]);
        let sizes: Vec<usize> = specs.iter().map(|s| s.size).collect();
        assert_eq!(sizes, vec![5, 3, 1, 4, 2, 3, 1, 2, 1]);
        let mult: Vec<i64> = specs.iter().map(|s| s.multiplicity.to_i64().unwrap()).collect();
        assert_eq!(mult, vec![1, 3, 2, 4, 8, 6, 6, 4, 1]);
        let total: i64 = specs.iter().map(|s| s.multiplicity.to_i64().unwrap() * s.size as i64).sum();
        assert_eq!(total, 81);
        assert_eq!(specs.iter().map(|s| s.size * s.size).sum::<usize>(), 70);
        for n in 1..=8 {
            let bin = block_specs(2, n).unwrap();
            assert_eq!(bin.len() as i64, n / 2 + 1);
            for (k, s) in bin.iter().enumerate() {
                let k = k as i64;
                assert_eq!((s.a, s.k, s.size as i64), (0, k, n + 1 - 2 * k));
                assert_eq!(s.multiplicity, binomial(n, k) - binomial(n, k - 1));
            }
        }
    }

    #[test]
    fn symmetry_orbits_are_consistent() {
        for q in [2, 3, 4] {
            let idx = enumerate_classes(q, 6).unwrap();
            for c in idx.classes() {
                let orbit = idx.symmetry_orbit(c);
                assert!(orbit.contains(c));
                for d in &orbit {
                    assert_eq!(idx.symmetry_orbit(d), orbit);
                    assert_eq!(d.t - d.p, c.t - c.p);
                }
            }
        }
    }

    #[test]
    fn identity_maps_to_identity_blocks() {
        for q in [2, 3, 4] {
            let idx = Arc::new(enumerate_classes(q, 4).unwrap());
            let st = BlockStructure::new(&idx).unwrap();
            let img = block_image(&AlgebraElement::identity(idx)).unwrap();
            for (spec, b) in img.specs.iter().zip(&img.blocks) {
                let d = st.unitary_scaling(spec);
                let scaled = DMatrix::from_fn(b.nrows(), b.ncols(), |r, c| d[r] * b[(r, c)] * d[c]);
                assert!((scaled - DMatrix::identity(b.nrows(), b.ncols())).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn binary_two_point_example() {
        let idx = Arc::new(enumerate_classes(2, 2).unwrap());
        let mut x = AlgebraElement::zeros(idx.clone());
        x.coeff[idx.position(&TripleClass::new(1, 1, 1, 1)).unwrap()] = 1.0;
        let img = binary_block_image(&x).unwrap();
        let mut expect0 = DMatrix::zeros(3, 3);
        expect0[(1, 1)] = 2.0;
        assert_eq!(img.blocks[0], expect0);
        assert_eq!(img.blocks[1], DMatrix::from_element(1, 1, 1.0));
        let idx3 = Arc::new(enumerate_classes(3, 2).unwrap());
        assert!(binary_block_image(&AlgebraElement::zeros(idx3)).is_err());
    }

    #[test]
    fn bordered_zero_element() {
        let idx = Arc::new(enumerate_classes(3, 3).unwrap());
        let img = bordered_block_image(&AlgebraElement::zeros(idx), 1.0).unwrap();
        assert!(img.bordered);
        let mut expect = DMatrix::zeros(5, 5);
        expect[(0, 0)] = 1.0;
        assert_eq!(img.blocks[0], expect);
        assert!(img.blocks[1..].iter().all(|b| b.amax() == 0.0));
    }

    #[test]
    fn text_round_trip() {
        let idx = Arc::new(enumerate_classes(3, 2).unwrap());
        let coeff: Vec<f64> = (0..idx.len()).map(|k| k as f64 / 7.0).collect();
        let e = AlgebraElement::new(idx.clone(), coeff).unwrap();
        let back = AlgebraElement::from_text(&e.to_text()).unwrap();
        assert_eq!(back.coeff, e.coeff);
        let r = AlgebraElement::from_text("3 2\n1 1 1 1 3/4\n").unwrap();
        assert_eq!(r.get(&TripleClass::new(1, 1, 1, 1)), 0.75);
        assert!(matches!(AlgebraElement::from_text("3 2\n1 1 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(AlgebraElement::new(idx, vec![0.0]).is_err());
    }

    #[test]
    fn oracle_column_counts() {
        let o = DenseOracle::new(2, 2).unwrap();
        assert_eq!(o.transform.ncols(), 4);
        let o = DenseOracle::new(3, 2).unwrap();
        assert_eq!(o.transform.ncols(), 9);
        for (s_idx, spec) in o.specs.iter().enumerate() {
            let copies = o.copies.iter().filter(|(s, _)| *s == s_idx).count();
            assert_eq!(BigInt::from(copies), spec.multiplicity.clone());
        }
        let o = DenseOracle::new(3, 3).unwrap();
        assert!(o.unitarity_error() <= 1e-10);
        assert!(DenseOracle::new(3, 8).is_err());
    }
}

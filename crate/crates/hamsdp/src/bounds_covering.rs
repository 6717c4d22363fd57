//! Lower bounds on the minimum size of a covering code.
//!
//! A linear inequality `(λ_0, ..., λ_n)β` states `sum_i λ_i A_i(u) >= β` for
//! every word `u`, where `A_i(u)` counts the codewords at distance `i` from `u`.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::bounds_code::{add_blocks, affine_blocks, bordered, bose_mesner_bordered, class_vars, f};
use crate::certify::DualCertificate;
use crate::combinatorics::{binomial, ipow, ipow_i128, shell_size, BinomialTable, ExactInt};
use crate::error::{Error, Result};
use crate::report::{solve_and_certify, BoundReport, Direction};
use crate::sdp::{Affine, BuiltProblem, ProblemBuilder, Sense, SolveOptions};
use crate::terwilliger::{enumerate_classes, BlockStructure, TripleClass};

/// Note attached to linear bounds from inequalities other than sphere covering.
pub const RELAXATION_NOTE: &str =
    "bound on the relaxation: codes satisfying these inequalities need not have covering radius <= r";

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn rat_f64(v: &BigRational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn check_qn(q: i64, n: i64) -> Result<()> {
    if q < 2 || n < 1 {
        return Err(Error::InvalidArgument(format!("need q >= 2 and n >= 1, got q={q}, n={n}")));
    }
    Ok(())
}

fn check_radius(n: i64, r: i64) -> Result<()> {
    if !(0..=n).contains(&r) {
        return Err(Error::InvalidArgument(format!("radius {r} outside 0..={n}")));
    }
    Ok(())
}

/// Parse an integer, a fraction `a/b` or a terminating decimal exactly.
pub fn parse_rational(s: &str) -> std::result::Result<BigRational, String> {
    let s = s.trim();
    let bad = || format!("`{s}` is not a rational number");
    if let Some((a, b)) = s.split_once('/') {
        let num = BigInt::from_str(a.trim()).map_err(|_| bad())?;
        let den = BigInt::from_str(b.trim()).map_err(|_| bad())?;
        if den.is_zero() {
            return Err(format!("`{s}` has a zero denominator"));
        }
        return Ok(BigRational::new(num, den));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() || !(whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())) {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let num = BigInt::from_str(&digits).map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let v = BigRational::new(num, den);
    Ok(if neg { -v } else { v })
}

/// `sum_i λ_i A_i(u) >= β` for every word `u`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearInequalitySet {
    pub q: i64,
    pub n: i64,
    pub lambda: Vec<BigRational>,
    pub beta: BigRational,
}

impl LinearInequalitySet {
    pub fn new(q: i64, n: i64, lambda: Vec<BigRational>, beta: BigRational) -> Result<Self> {
        check_qn(q, n)?;
        if lambda.len() != (n + 1) as usize {
            return Err(Error::InvalidArgument(format!("expected {} coefficients, got {}", n + 1, lambda.len())));
        }
        if let Some(i) = lambda.iter().position(|l| l.is_negative()) {
            return Err(Error::InvalidArgument(format!("lambda_{i} = {} is negative", lambda[i])));
        }
        if !beta.is_positive() {
            return Err(Error::InvalidArgument(format!("beta = {beta} is not positive")));
        }
        Ok(LinearInequalitySet { q, n, lambda, beta })
    }

    pub fn from_integers(q: i64, n: i64, lambda: &[i64], beta: i64) -> Result<Self> {
        Self::new(q, n, lambda.iter().map(|&l| rat(l)).collect(), rat(beta))
    }

    pub fn lambda_f64(&self) -> Vec<f64> {
        self.lambda.iter().map(rat_f64).collect()
    }

    pub fn beta_f64(&self) -> f64 {
        rat_f64(&self.beta)
    }

    /// The sum of two valid inequalities.
    pub fn add(&self, other: &LinearInequalitySet) -> Result<Self> {
        if (self.q, self.n) != (other.q, other.n) {
            return Err(Error::IndexMismatch(format!(
                "inequalities for (q,n) = ({},{}) and ({},{})",
                self.q, self.n, other.q, other.n
            )));
        }
        let lambda = self.lambda.iter().zip(&other.lambda).map(|(a, b)| a + b).collect();
        Self::new(self.q, self.n, lambda, &self.beta + &other.beta)
    }

    /// Header `q n beta`, then one line `i lambda_i` per index. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty inequality file".into() })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse { line: hl, msg: "header must be `q n beta`".into() });
        }
        let int = |s: &str, line| s.parse::<i64>().map_err(|e| Error::Parse { line, msg: format!("`{s}`: {e}") });
        let q = int(fields[0], hl)?;
        let n = int(fields[1], hl)?;
        check_qn(q, n)?;
        let beta = parse_rational(fields[2]).map_err(|msg| Error::Parse { line: hl, msg })?;
        let mut lambda: Vec<Option<BigRational>> = vec![None; (n + 1) as usize];
        for (ln, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse { line: ln, msg: "expected `i lambda_i`".into() });
            }
            let i = int(fields[0], ln)?;
            if !(0..=n).contains(&i) {
                return Err(Error::Parse { line: ln, msg: format!("index {i} outside 0..={n}") });
            }
            if lambda[i as usize].is_some() {
                return Err(Error::Parse { line: ln, msg: format!("index {i} given twice") });
            }
            lambda[i as usize] = Some(parse_rational(fields[1]).map_err(|msg| Error::Parse { line: ln, msg })?);
        }
        if let Some(i) = lambda.iter().position(|l| l.is_none()) {
            return Err(Error::Parse { line: text.lines().count(), msg: format!("lambda_{i} missing at end of file") });
        }
        Self::new(q, n, lambda.into_iter().map(Option::unwrap).collect(), beta)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.q, self.n, self.beta);
        for (i, l) in self.lambda.iter().enumerate() {
            s.push_str(&format!("{i} {l}\n"));
        }
        s
    }
}

/// Known values of `F(m, k)`, the least number of `k`-subsets of an `m`-set
/// covering all of its pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoveringNumberTable {
    entries: BTreeMap<(i64, i64), ExactInt>,
}

impl CoveringNumberTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, m: i64, k: i64, value: ExactInt) -> Result<()> {
        if !value.is_positive() {
            return Err(Error::InvalidArgument(format!("F({m},{k}) = {value} is not positive")));
        }
        self.entries.insert((m, k), value);
        Ok(())
    }

    pub fn get(&self, m: i64, k: i64) -> Result<ExactInt> {
        self.entries.get(&(m, k)).cloned().ok_or(Error::MissingCoveringNumber { m, k })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lines `m k F`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = CoveringNumberTable::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| BigInt::from_str(s).map_err(|e| Error::Parse { line: k + 1, msg: format!("`{s}`: {e}") });
            if fields.len() != 3 {
                return Err(Error::Parse { line: k + 1, msg: "expected `m k F`".into() });
            }
            let m = parse(fields[0])?.to_i64().ok_or(Error::Parse { line: k + 1, msg: "m out of range".into() })?;
            let kk = parse(fields[1])?.to_i64().ok_or(Error::Parse { line: k + 1, msg: "k out of range".into() })?;
            t.insert(m, kk, parse(fields[2])?)?;
        }
        Ok(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverMethod {
    Lin,
    Sdp1,
    Sdp2,
}

impl CoverMethod {
    pub fn name(self) -> &'static str {
        match self {
            CoverMethod::Lin => "lin",
            CoverMethod::Sdp1 => "sdp1",
            CoverMethod::Sdp2 => "sdp2",
        }
    }
}

impl FromStr for CoverMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lin" | "linear" => Ok(CoverMethod::Lin),
            "sdp1" | "first" => Ok(CoverMethod::Sdp1),
            "sdp2" | "second" => Ok(CoverMethod::Sdp2),
            _ => Err(Error::InvalidArgument(format!("unknown covering method `{s}` (lin, sdp1, sdp2)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverBoundSpec {
    pub q: i64,
    pub n: i64,
    pub r: i64,
    pub inequalities: Vec<LinearInequalitySet>,
    pub method: CoverMethod,
}

impl CoverBoundSpec {
    pub fn validate(&self) -> Result<()> {
        check_qn(self.q, self.n)?;
        check_radius(self.n, self.r)?;
        check_inequalities(self.q, self.n, &self.inequalities)
    }
}

fn check_inequalities(q: i64, n: i64, ineqs: &[LinearInequalitySet]) -> Result<()> {
    if ineqs.is_empty() {
        return Err(Error::InvalidArgument("no inequalities given".into()));
    }
    if let Some(e) = ineqs.iter().find(|e| (e.q, e.n) != (q, n)) {
        return Err(Error::IndexMismatch(format!("inequality for (q,n) = ({},{}) used with ({q},{n})", e.q, e.n)));
    }
    Ok(())
}

/// Every word is within distance `r` of a codeword.
pub fn sphere_covering_ineq(q: i64, n: i64, r: i64) -> Result<LinearInequalitySet> {
    check_qn(q, n)?;
    check_radius(n, r)?;
    let lambda: Vec<i64> = (0..=n).map(|i| i64::from(i <= r)).collect();
    LinearInequalitySet::from_integers(q, n, &lambda, 1)
}

/// The binary van Wee inequalities.
pub fn van_wee_ineq(n: i64, r: i64) -> Result<LinearInequalitySet> {
    check_qn(2, n)?;
    if !(0..n).contains(&r) {
        return Err(Error::InvalidArgument(format!("van Wee inequalities need 0 <= r < n, got r={r}, n={n}")));
    }
    let c = (n + 1 + r) / (r + 1);
    let lambda: Vec<i64> = (0..=n)
        .map(|i| match i {
            i if i < r => c,
            i if i == r || i == r + 1 => 1,
            _ => 0,
        })
        .collect();
    LinearInequalitySet::from_integers(2, n, &lambda, c)
}

/// The binary pair covering inequalities, with `F` taken from `table`.
///
/// `m_1` maximizes over `i >= 2` while the set in `F(n - i r + 1, r + 2)` still
/// has a pair and `i <= n + 1`.
pub fn pair_covering_ineq(q: i64, n: i64, r: i64, table: &CoveringNumberTable) -> Result<LinearInequalitySet> {
    if q != 2 {
        return Err(Error::InvalidArgument(format!("pair covering inequalities are binary only, got q={q}")));
    }
    check_qn(q, n)?;
    if r < 0 || r + 2 > n {
        return Err(Error::InvalidArgument(format!("pair covering inequalities need 0 <= r <= n - 2, got r={r}, n={n}")));
    }
    let top = BigRational::from_integer(table.get(n - r + 1, r + 2)?);
    let mut m1: Option<BigRational> = None;
    let mut i = 2;
    while i <= n + 1 && n - i * r + 1 >= 2 {
        let other = BigRational::from_integer(table.get(n - i * r + 1, r + 2)?);
        let v = (&top - other) / rat(i - 1);
        if m1.as_ref().is_none_or(|m| v > *m) {
            m1 = Some(v);
        }
        i += 1;
    }
    let m1 = m1.ok_or_else(|| Error::InvalidArgument(format!("no admissible i >= 2 for n={n}, r={r}")))?;
    let m0 = &m1 + &top;
    let lambda: Vec<BigRational> = (0..=n)
        .map(|i| {
            if i <= r - 2 {
                m0.clone()
            } else if i == r - 1 || i == r {
                m1.clone()
            } else if i == r + 1 || i == r + 2 {
                BigRational::one()
            } else {
                BigRational::zero()
            }
        })
        .collect();
    LinearInequalitySet::new(q, n, lambda, m0)
}

/// Number of words `v` of weight `i` with `d(u, v) = j`, for any `u` of weight `k`.
pub fn pair_intersection(q: i64, n: i64, i: i64, j: i64, k: i64) -> ExactInt {
    let mut acc = BigInt::zero();
    if [i, j, k].iter().any(|v| !(0..=n).contains(v)) {
        return acc;
    }
    // t = |S(u) ∩ S(v)|, p of those positions carry equal symbols
    let s = k + i - j;
    for t in 0..=k.min(i) {
        let p = s - t;
        if p < 0 || p > t {
            continue;
        }
        let ways = binomial(k, t) * binomial(t, p);
        acc += ways * binomial(n - k, i - t) * ipow(q - 1, i - t) * ipow_zero(q - 2, t - p);
    }
    acc
}

/// `base^exp` with `0^0 = 1`.
fn ipow_zero(base: i64, exp: i64) -> ExactInt {
    if exp == 0 {
        BigInt::one()
    } else {
        ipow(base, exp)
    }
}

fn check_ineq(q: i64, n: i64, ineq: &LinearInequalitySet) -> Result<()> {
    if (ineq.q, ineq.n) != (q, n) {
        return Err(Error::IndexMismatch(format!(
            "inequality for (q,n) = ({},{}) used with ({q},{n})",
            ineq.q, ineq.n
        )));
    }
    Ok(())
}

/// Sum the inequality over the words at distance `i` from `u`.
pub fn induce_inequality(q: i64, n: i64, ineq: &LinearInequalitySet, i: i64) -> Result<LinearInequalitySet> {
    check_ineq(q, n, ineq)?;
    if !(0..=n).contains(&i) {
        return Err(Error::InvalidArgument(format!("shell {i} outside 0..={n}")));
    }
    let lambda: Vec<BigRational> = (0..=n)
        .map(|k| {
            (0..=n)
                .filter(|&j| !ineq.lambda[j as usize].is_zero())
                .map(|j| &ineq.lambda[j as usize] * BigRational::from_integer(pair_intersection(q, n, i, j, k)))
                .fold(BigRational::zero(), |a, b| a + b)
        })
        .collect();
    let beta = BigRational::from_integer(shell_size(q, n, i)) * &ineq.beta;
    LinearInequalitySet::new(q, n, lambda, beta)
}

/// Divide by `divisor` and round every coefficient up, which stays valid because
/// the `A_i(u)` are integers.
pub fn scale_round(ineq: &LinearInequalitySet, divisor: &BigRational) -> Result<LinearInequalitySet> {
    if !divisor.is_positive() {
        return Err(Error::InvalidArgument(format!("divisor {divisor} is not positive")));
    }
    let up = |v: &BigRational| (v / divisor).ceil();
    LinearInequalitySet::new(ineq.q, ineq.n, ineq.lambda.iter().map(up).collect(), up(&ineq.beta))
}

/// `β q^n / sum_i λ_i C(n,i)(q-1)^i`.
pub fn lin_ineq_bound(q: i64, n: i64, ineq: &LinearInequalitySet) -> Result<BigRational> {
    check_ineq(q, n, ineq)?;
    let den = ineq
        .lambda
        .iter()
        .enumerate()
        .map(|(i, l)| l * BigRational::from_integer(shell_size(q, n, i as i64)))
        .fold(BigRational::zero(), |a, b| a + b);
    if den.is_zero() {
        return Err(Error::ZeroDenominator);
    }
    Ok(BigRational::from_integer(ipow(q, n)) * &ineq.beta / den)
}

/// Calls `visit(j', t', p', d, count)` for every part of the count of words `w`
/// by the class `(i, j', t', p')` of `(u, w)` and the distance `d(v, w)`, where
/// `(u, v)` has class `base`. The same `(j', t', p', d)` may be visited repeatedly.
fn visit_triples(q: i64, n: i64, base: &TripleClass, bin: &BinomialTable, mut visit: impl FnMut(i64, i64, i64, i64, i128)) {
    let TripleClass { i, j, t, p } = *base;
    let c = |m: i64, k: i64| bin.get(m, k);
    let pw = |b: i64, e: i64| ipow_i128(b, e);
    let outside = n + t - i - j;
    if q == 2 {
        // a_xy: positions with u_k = x, v_k = y (as zero or nonzero) in the support of w
        for a10 in 0..=i - t {
            for a01 in 0..=j - t {
                for a11 in 0..=t {
                    for a00 in 0..=outside {
                        let w = c(i - t, a10) * c(j - t, a01) * c(t, a11) * c(outside, a00);
                        let jp = a00 + a01 + a10 + a11;
                        let tp = a10 + a11;
                        visit(jp, tp, tp, j + a00 + a10 - a01 - a11, w);
                    }
                }
            }
        }
        return;
    }
    let (a_n, b_n, c_n, d_n) = (i - t, j - t, p, t - p);
    let max2 = |q_off: i64, m: i64| if q - q_off == 0 { 0 } else { m };
    for a1 in 0..=a_n {
        for a2 in 0..=max2(2, a_n - a1) {
            let wa = c(a_n, a1) * c(a_n - a1, a2);
            for b1 in 0..=b_n {
                for b2 in 0..=max2(2, b_n - b1) {
                    let wb = wa * c(b_n, b1) * c(b_n - b1, b2);
                    for c1 in 0..=c_n {
                        for c2 in 0..=max2(2, c_n - c1) {
                            let wc = wb * c(c_n, c1) * c(c_n - c1, c2) * pw(q - 2, a2 + b2 + c2);
                            for d1 in 0..=d_n {
                                for d2 in 0..=d_n - d1 {
                                    for d3 in 0..=max2(3, d_n - d1 - d2) {
                                        let wd = wc
                                            * c(d_n, d1)
                                            * c(d_n - d1, d2)
                                            * c(d_n - d1 - d2, d3)
                                            * pw(q - 3, d3);
                                        for e in 0..=outside {
                                            let w = wd * c(outside, e) * pw(q - 1, e);
                                            let tp = a1 + a2 + c1 + c2 + d1 + d2 + d3;
                                            let jp = tp + b1 + b2 + e;
                                            let pp = a1 + c1 + d1;
                                            let d = a1 + a2 + e + j - b1 - c1 - d2;
                                            visit(jp, tp, pp, d, w);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Number of words `w` with `(u, w)` in class `(i, j', t', p')` and `d(v, w) = d`,
/// where `(u, v)` is any pair of class `base`.
pub fn triple_intersection(q: i64, n: i64, base: &TripleClass, target: (i64, i64, i64), d: i64) -> Result<ExactInt> {
    check_qn(q, n)?;
    if !base.is_member(q, n) {
        return Err(Error::InvalidArgument(format!("{base:?} is not a class of I({q},{n})")));
    }
    if !(0..=n).contains(&d) {
        return Err(Error::InvalidArgument(format!("distance {d} outside 0..={n}")));
    }
    let bin = BinomialTable::new((n + 2) as usize);
    let mut acc: i128 = 0;
    visit_triples(q, n, base, &bin, |jp, tp, pp, dd, w| {
        if (jp, tp, pp, dd) == (target.0, target.1, target.2, d) {
            acc += w;
        }
    });
    Ok(BigInt::from(acc))
}

/// `λ^{base}_{target} = sum_d λ_d α_{target,d}^{base}` for every target class.
fn row_coefficients(q: i64, n: i64, base: &TripleClass, lambda: &[f64], bin: &BinomialTable) -> Vec<(TripleClass, f64)> {
    let mut acc: HashMap<(i64, i64, i64), f64> = HashMap::new();
    visit_triples(q, n, base, bin, |jp, tp, pp, d, w| {
        let l = lambda[d as usize];
        if l != 0.0 && w != 0 {
            *acc.entry((jp, tp, pp)).or_insert(0.0) += l * w as f64;
        }
    });
    let mut out: Vec<(TripleClass, f64)> =
        acc.into_iter().map(|((jp, tp, pp), v)| (TripleClass::new(base.i, jp, tp, pp), v)).collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// A covering programme with the box used for certification.
pub struct CoverProgram {
    pub built: BuiltProblem,
    pub bounds: Vec<(f64, f64)>,
}

impl CoverProgram {
    fn unit_box(built: BuiltProblem) -> Self {
        let m = built.problem.m();
        CoverProgram { built, bounds: vec![(0.0, 1.0); m] }
    }
}

fn check_program(q: i64, n: i64, r: i64, ineqs: &[LinearInequalitySet]) -> Result<()> {
    check_qn(q, n)?;
    check_radius(n, r)?;
    check_inequalities(q, n, ineqs)
}

/// Semidefinite bound over the Bose-Mesner algebra: `x_i` is the averaged code
/// matrix entry at distance `i`, so `q^n x_0` is the code size.
pub fn build_first_sdp(q: i64, n: i64, r: i64, ineqs: &[LinearInequalitySet]) -> Result<CoverProgram> {
    check_program(q, n, r, ineqs)?;
    let mut pb = ProblemBuilder::new();
    let x: Vec<Affine> = (0..=n).map(|i| Affine::var(pb.add_var(format!("x{i}")))).collect();
    for e in &x {
        pb.add_nonneg(e.clone());
    }
    bose_mesner_bordered(&mut pb, q, n, &x)?;
    let alpha: Vec<Vec<Vec<f64>>> = (0..=n)
        .map(|i| (0..=n).map(|j| (0..=n).map(|k| f(&pair_intersection(q, n, i, j, k))).collect()).collect())
        .collect();
    for ineq in ineqs {
        let lam = ineq.lambda_f64();
        let beta = ineq.beta_f64();
        for k in 0..=n as usize {
            let mut own = x[0].clone() * -beta;
            let mut other = (Affine::constant(1.0) - x[0].clone()) * -beta;
            for i in 0..=n as usize {
                let w: f64 = (0..=n as usize).map(|j| lam[j] * alpha[i][j][k]).sum();
                own.add_scaled(&x[i], w);
                other.add_scaled(&(x[0].clone() - x[i].clone()), w);
            }
            pb.add_nonneg(own);
            pb.add_nonneg(other);
        }
    }
    let objective = x[0].clone() * f(&ipow(q, n));
    Ok(CoverProgram::unit_box(pb.build(objective, Sense::Minimize)?))
}

/// Semidefinite bound over the algebra of the stabilizer of the zero word,
/// splitting the averaged code matrix by whether the image contains zero.
pub fn build_second_sdp(q: i64, n: i64, r: i64, ineqs: &[LinearInequalitySet]) -> Result<CoverProgram> {
    check_program(q, n, r, ineqs)?;
    let index = Arc::new(enumerate_classes(q, n)?);
    let st = BlockStructure::new(&index)?;
    let mut pb = ProblemBuilder::new();
    let sym = index.clone();
    let x = class_vars(&mut pb, index.clone(), "x", |c| sym.symmetry_representative(c), |_| false, &[]);
    let x00 = x.get(&TripleClass::new(0, 0, 0, 0));
    let one = Affine::constant(1.0);
    for (c, e) in index.classes().iter().zip(&x.expr) {
        pb.add_nonneg(e.clone());
        pb.add_nonneg(x.diagonal(c.i) - e.clone());
        pb.add_nonneg(x.column0(c.distance()) - e.clone());
        pb.add_nonneg(e.clone() - x.column0(c.i) - x.column0(c.distance()) + x00.clone());
    }
    add_blocks(&mut pb, affine_blocks(&st, &x.expr));
    let comp = x.complement();
    let mut zb = affine_blocks(&st, &comp);
    let zdiag: Vec<Affine> = (0..=n).map(|i| comp[index.diagonal(i)].clone()).collect();
    zb[0] = bordered(&st, &zb[0], one.clone() - x00.clone(), &zdiag);
    add_blocks(&mut pb, zb);
    let bin = BinomialTable::new((n + 2) as usize);
    for ineq in ineqs {
        let lam = ineq.lambda_f64();
        let beta = ineq.beta_f64();
        for base in index.classes() {
            let xi0 = x.column0(base.i);
            // rows of M', diag(M') - M', M'' and diag(M'') - M''
            let mut rows = [
                xi0.clone() * -beta,
                (x00.clone() - xi0.clone()) * -beta,
                (x00.clone() - xi0.clone()) * -beta,
                (one.clone() - x00.clone() * 2.0 + xi0.clone()) * -beta,
            ];
            for (tc, w) in row_coefficients(q, n, base, &lam, &bin) {
                let xe = x.get(&tc);
                let xj0 = x.column0(tc.j);
                let xd0 = x.column0(tc.distance());
                rows[0].add_scaled(&xe, w);
                rows[1].add_scaled(&(xj0.clone() - xe.clone()), w);
                rows[2].add_scaled(&(xd0.clone() - xe.clone()), w);
                rows[3].add_scaled(&(x00.clone() - xj0 - xd0 + xe), w);
            }
            for row in rows {
                pb.add_nonneg(row);
            }
        }
    }
    let objective = x00 * f(&ipow(q, n));
    Ok(CoverProgram::unit_box(pb.build(objective, Sense::Minimize)?))
}

fn is_sphere(ineq: &LinearInequalitySet, r: i64) -> bool {
    sphere_covering_ineq(ineq.q, ineq.n, r).is_ok_and(|s| s == *ineq)
}

/// Build, solve, certify and round up.
pub fn covering_bound(spec: &CoverBoundSpec, opts: &SolveOptions) -> Result<BoundReport> {
    covering_bound_with_certificate(spec, opts).map(|(r, _)| r)
}

/// As [`covering_bound`], also returning the dual certificate of a solved programme.
pub fn covering_bound_with_certificate(
    spec: &CoverBoundSpec,
    opts: &SolveOptions,
) -> Result<(BoundReport, Option<DualCertificate>)> {
    spec.validate()?;
    let mut certificate = None;
    let CoverBoundSpec { q, n, r, method, .. } = *spec;
    let mut report = if r == 0 {
        let whole = ipow(q, n).to_i64().ok_or_else(|| Error::SizeLimit(format!("{q}^{n} exceeds i64")))?;
        BoundReport::analytic(q, n, method.name(), Direction::Lower, whole, "trivial")
    } else {
        match method {
            CoverMethod::Lin => {
                let mut best: Option<BigRational> = None;
                for ineq in &spec.inequalities {
                    let v = lin_ineq_bound(q, n, ineq)?;
                    if best.as_ref().is_none_or(|b| v > *b) {
                        best = Some(v);
                    }
                }
                let best = best.expect("inequalities checked nonempty");
                let ceil = best.ceil().to_integer().to_i64().ok_or_else(|| Error::SizeLimit("bound exceeds i64".into()))?;
                let mut rep = BoundReport::analytic(q, n, method.name(), Direction::Lower, ceil, "exact");
                rep.solver_objective = rat_f64(&best);
                rep.certified_value = rep.solver_objective;
                rep.exact = Some(best.to_string());
                if !spec.inequalities.iter().all(|e| is_sphere(e, r)) {
                    rep.note = Some(RELAXATION_NOTE.to_string());
                }
                rep
            }
            CoverMethod::Sdp1 | CoverMethod::Sdp2 => {
                let prog = if method == CoverMethod::Sdp1 {
                    build_first_sdp(q, n, r, &spec.inequalities)?
                } else {
                    build_second_sdp(q, n, r, &spec.inequalities)?
                };
                let cert = solve_and_certify(&prog.built, &prog.bounds, opts)?;
                certificate = cert.certificate.clone();
                cert.into_report(q, n, method.name(), Sense::Minimize)
            }
        }
    };
    report.r = Some(r);
    Ok((report, certificate))
}

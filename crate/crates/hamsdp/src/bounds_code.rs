//! Upper bounds on `A_q(n,d)`, the largest size of a `q`-ary code of length `n`
//! and minimum distance `d`.

use std::collections::{HashMap, HashSet};
use std::str::FromStr;
use std::sync::Arc;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::certify::DualCertificate;
use crate::combinatorics::{ipow, KrawtchoukTable};
use crate::error::{Error, Result};
use crate::report::{solve_and_certify, BoundReport, Direction};
use crate::sdp::{Affine, BuiltProblem, ProblemBuilder, Sense, SolveOptions};
use crate::terwilliger::{enumerate_classes, BlockStructure, ClassIndex, TripleClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeMethod {
    Delsarte,
    SdpBasic,
    SdpLaurent,
    MatrixcutNplus,
    MatrixcutNtilde,
}

impl CodeMethod {
    pub fn name(self) -> &'static str {
        match self {
            CodeMethod::Delsarte => "delsarte",
            CodeMethod::SdpBasic => "sdp_basic",
            CodeMethod::SdpLaurent => "sdp_laurent",
            CodeMethod::MatrixcutNplus => "matrixcut_nplus",
            CodeMethod::MatrixcutNtilde => "matrixcut_ntilde",
        }
    }
}

impl FromStr for CodeMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "delsarte" => CodeMethod::Delsarte,
            "sdp" | "sdp_basic" => CodeMethod::SdpBasic,
            "sdp+" | "sdp_laurent" | "laurent" => CodeMethod::SdpLaurent,
            "nplus" | "matrixcut_nplus" => CodeMethod::MatrixcutNplus,
            "ntilde" | "matrixcut_ntilde" => CodeMethod::MatrixcutNtilde,
            _ => return Err(Error::InvalidArgument(format!("unknown code bound method `{s}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeBoundSpec {
    pub q: i64,
    pub n: i64,
    pub d: i64,
    pub method: CodeMethod,
}

impl CodeBoundSpec {
    pub fn validate(&self) -> Result<()> {
        if self.q < 2 || self.n < 1 || self.d < 1 {
            return Err(Error::InvalidArgument(format!(
                "need q >= 2, n >= 1, d >= 1; got q={}, n={}, d={}",
                self.q, self.n, self.d
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DelsarteForm {
    /// Maximize `q^n x_0` with the bordered Bose-Mesner condition.
    Trace,
    /// `x_0 = 1`, maximize `sum_i x_i C(n,i)(q-1)^i`.
    Classical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strength {
    Basic,
    Laurent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixCut {
    Nplus,
    Ntilde,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variation {
    /// Maximize `x_{0,0}^{0,0}` with `[[1, x_00], [x_00, tr M]] ⪰ 0`.
    TraceBorder,
    /// Maximize `1^T M 1` subject to `tr M = 1`.
    UnitTrace,
}

fn check(q: i64, n: i64, d: i64) -> Result<()> {
    CodeBoundSpec { q, n, d, method: CodeMethod::Delsarte }.validate()?;
    if d > n {
        return Err(Error::InvalidArgument(format!("d = {d} exceeds n = {n}; the bound is 1")));
    }
    Ok(())
}

pub(crate) fn f(v: &num_bigint::BigInt) -> f64 {
    v.to_f64().unwrap_or(f64::INFINITY)
}

pub(crate) fn shell(q: i64, n: i64, i: i64) -> f64 {
    f(&crate::combinatorics::shell_size(q, n, i))
}

fn forbidden(d: i64, v: i64) -> bool {
    (1..d).contains(&v)
}

/// A programme is stated in these coordinates, plus the box used for certification.
pub struct CodeProgram {
    pub built: BuiltProblem,
    pub bounds: Vec<(f64, f64)>,
}

impl CodeProgram {
    fn unit_box(built: BuiltProblem) -> Self {
        let m = built.problem.m();
        CodeProgram { built, bounds: vec![(0.0, 1.0); m] }
    }
}

/// Delsarte's linear programming bound.
pub fn build_delsarte(q: i64, n: i64, d: i64, form: DelsarteForm) -> Result<CodeProgram> {
    check(q, n, d)?;
    let kt = KrawtchoukTable::new(q, n);
    let mut pb = ProblemBuilder::new();
    let mut coef: Vec<Affine> = vec![Affine::zero(); (n + 1) as usize];
    for i in 0..=n {
        if i == 0 && form == DelsarteForm::Classical {
            coef[0] = Affine::constant(1.0);
        } else if !forbidden(d, i) {
            let v = pb.add_var(format!("x{i}"));
            coef[i as usize] = Affine::var(v);
            pb.add_nonneg(Affine::var(v));
        }
    }
    let first_row = if form == DelsarteForm::Trace { 1 } else { 0 };
    for j in first_row..=n {
        let mut row = Affine::zero();
        for i in 0..=n {
            row.add_scaled(&coef[i as usize], kt.get(i as usize, j as usize));
        }
        pb.add_nonneg(row);
    }
    let size = f(&ipow(q, n));
    let objective = match form {
        DelsarteForm::Trace => {
            let mut weighted = Affine::zero();
            for i in 0..=n {
                weighted.add_scaled(&coef[i as usize], shell(q, n, i) / size);
            }
            let x0 = coef[0].clone();
            pb.add_psd(vec![vec![Affine::constant(1.0), x0.clone()], vec![x0.clone(), weighted]]);
            x0 * size
        }
        DelsarteForm::Classical => {
            let mut obj = Affine::zero();
            for i in 0..=n {
                obj.add_scaled(&coef[i as usize], shell(q, n, i));
            }
            obj
        }
    };
    Ok(CodeProgram::unit_box(pb.build(objective, Sense::Maximize)?))
}

/// Affine expression for every class coefficient.
pub(crate) struct ClassVars {
    pub(crate) index: Arc<ClassIndex>,
    pub(crate) expr: Vec<Affine>,
}

impl ClassVars {
    pub(crate) fn get(&self, c: &TripleClass) -> Affine {
        self.index.position(c).map_or(Affine::zero(), |k| self.expr[k].clone())
    }

    pub(crate) fn column0(&self, i: i64) -> Affine {
        self.expr[self.index.column0(i)].clone()
    }

    pub(crate) fn diagonal(&self, i: i64) -> Affine {
        self.expr[self.index.diagonal(i)].clone()
    }

    /// Coefficients of `M'' = sum (x_{dist,0} - x) M`.
    pub(crate) fn complement(&self) -> Vec<Affine> {
        self.index
            .classes()
            .iter()
            .zip(&self.expr)
            .map(|(c, e)| self.column0(c.distance()) - e.clone())
            .collect()
    }
}

/// One variable per representative returned by `rep`. A representative is zero
/// when any class mapped to it satisfies `zero`.
pub(crate) fn class_vars(
    pb: &mut ProblemBuilder,
    index: Arc<ClassIndex>,
    prefix: &str,
    rep: impl Fn(&TripleClass) -> TripleClass,
    zero: impl Fn(&TripleClass) -> bool,
    fixed: &[(TripleClass, Affine)],
) -> ClassVars {
    let reps: Vec<TripleClass> = index.classes().iter().map(&rep).collect();
    let zero_reps: HashSet<TripleClass> =
        index.classes().iter().zip(&reps).filter(|(c, _)| zero(c)).map(|(_, r)| *r).collect();
    let mut by_rep: HashMap<TripleClass, Affine> = fixed.iter().cloned().collect();
    let mut expr = Vec::with_capacity(index.len());
    for r in reps {
        let e = if zero_reps.contains(&r) {
            Affine::zero()
        } else {
            by_rep
                .entry(r)
                .or_insert_with(|| Affine::var(pb.add_var(format!("{prefix}[{},{},{},{}]", r.i, r.j, r.t, r.p))))
                .clone()
        };
        expr.push(e);
    }
    ClassVars { index, expr }
}

/// Affine block matrices of `sum_c coef_c M_c`, one per block spec.
pub(crate) fn affine_blocks(st: &BlockStructure, coef: &[Affine]) -> Vec<Vec<Vec<Affine>>> {
    st.specs
        .iter()
        .zip(&st.entries)
        .map(|(spec, ent)| {
            let s = spec.size;
            let mut m = vec![vec![Affine::zero(); s]; s];
            for r in 0..s {
                for c in r..s {
                    let mut e = Affine::zero();
                    for &(pos, w) in &ent[r * s + c] {
                        e.add_scaled(&coef[pos], w);
                    }
                    e.normalize();
                    m[r][c] = e.clone();
                    m[c][r] = e;
                }
            }
            m
        })
        .collect()
}

/// The `(0,0)` block bordered by `corner` and the weighted diagonal coefficients.
pub(crate) fn bordered(st: &BlockStructure, inner: &[Vec<Affine>], corner: Affine, diag: &[Affine]) -> Vec<Vec<Affine>> {
    let s = inner.len();
    let mut m = vec![vec![Affine::zero(); s + 1]; s + 1];
    m[0][0] = corner;
    for (i, e) in diag.iter().enumerate() {
        let v = e.clone() * st.border_weight(i as i64);
        m[0][i + 1] = v.clone();
        m[i + 1][0] = v;
    }
    for r in 0..s {
        for c in 0..s {
            m[r + 1][c + 1] = inner[r][c].clone();
        }
    }
    m
}

pub(crate) fn add_blocks(pb: &mut ProblemBuilder, blocks: Vec<Vec<Vec<Affine>>>) {
    for b in blocks {
        pb.add_psd(b);
    }
}

/// Rows of `R(sum_i y_i A_i) ⪰ 0`: the Krawtchouk rows `j >= 1` plus the 2x2 border.
pub(crate) fn bose_mesner_bordered(pb: &mut ProblemBuilder, q: i64, n: i64, y: &[Affine]) -> Result<()> {
    let kt = KrawtchoukTable::new(q, n);
    for j in 1..=n {
        let mut row = Affine::zero();
        for i in 0..=n {
            row.add_scaled(&y[i as usize], kt.get(i as usize, j as usize));
        }
        pb.add_nonneg(row);
    }
    let size = f(&ipow(q, n));
    let mut weighted = Affine::zero();
    for i in 0..=n {
        weighted.add_scaled(&y[i as usize], shell(q, n, i) / size);
    }
    pb.add_psd(vec![vec![Affine::constant(1.0), y[0].clone()], vec![y[0].clone(), weighted]]);
    Ok(())
}

fn nonneg_all(pb: &mut ProblemBuilder, cv: &ClassVars) {
    for e in &cv.expr {
        if !e.is_constant() {
            pb.add_nonneg(e.clone());
        }
    }
}

/// `0 <= x <= x_{i,0}` for every class.
fn lin_constraints(pb: &mut ProblemBuilder, cv: &ClassVars) {
    for (c, e) in cv.index.classes().iter().zip(&cv.expr) {
        pb.add_nonneg(e.clone());
        pb.add_nonneg(cv.column0(c.i) - e.clone());
    }
}

/// The main semidefinite bound over triple classes.
pub fn build_schrijver_sdp(q: i64, n: i64, d: i64, strength: Strength) -> Result<CodeProgram> {
    check(q, n, d)?;
    let index = Arc::new(enumerate_classes(q, n)?);
    let st = BlockStructure::new(&index)?;
    let mut pb = ProblemBuilder::new();
    let origin = TripleClass::new(0, 0, 0, 0);
    let fixed = match strength {
        Strength::Basic => vec![(origin, Affine::constant(1.0))],
        Strength::Laurent => Vec::new(),
    };
    let idx2 = index.clone();
    let cv = class_vars(
        &mut pb,
        index.clone(),
        "x",
        |c| idx2.symmetry_representative(c),
        |c| forbidden(d, c.i) || forbidden(d, c.j) || forbidden(d, c.distance()),
        &fixed,
    );
    lin_constraints(&mut pb, &cv);
    add_blocks(&mut pb, affine_blocks(&st, &cv.expr));
    let comp = cv.complement();
    let mut comp_blocks = affine_blocks(&st, &comp);
    let objective = match strength {
        Strength::Basic => {
            add_blocks(&mut pb, comp_blocks);
            let mut obj = Affine::zero();
            for i in 0..=n {
                obj.add_scaled(&cv.column0(i), shell(q, n, i));
            }
            obj
        }
        Strength::Laurent => {
            let x00 = cv.get(&origin);
            let diag: Vec<Affine> = (0..=n).map(|i| comp[index.diagonal(i)].clone()).collect();
            let first = bordered(&st, &comp_blocks[0], Affine::constant(1.0) - x00.clone(), &diag);
            comp_blocks[0] = first;
            add_blocks(&mut pb, comp_blocks);
            x00 * f(&ipow(q, n))
        }
    };
    Ok(CodeProgram::unit_box(pb.build(objective, Sense::Maximize)?))
}

/// The two lift-and-project programmes without the symmetry identifications.
///
/// Both programmes have implied equalities with no interior: a PSD matrix with a
/// zero diagonal entry has a zero row, and `R(c; A)` with `A_00 = c` forces the
/// first column of `A` to equal its diagonal. These are substituted up front,
/// since a programme with implied equalities has no interior point.
pub fn build_matrix_cut_sdp(q: i64, n: i64, d: i64, variant: MatrixCut) -> Result<CodeProgram> {
    check(q, n, d)?;
    let index = Arc::new(enumerate_classes(q, n)?);
    let st = BlockStructure::new(&index)?;
    let mut pb = ProblemBuilder::new();
    // PSD forces symmetry, so x_{i,j}^{t,p} = x_{j,i}^{t,p}
    let transpose_rep = |c: &TripleClass| {
        let t = TripleClass::new(c.j, c.i, c.t, c.p);
        if t < *c {
            t
        } else {
            *c
        }
    };
    // first column equals the diagonal: y_{i,0}^{0,0} = y_{0,i}^{0,0} = y_{i,i}^{i,i}
    let first_col_rep = |c: &TripleClass| {
        if c.j == 0 && c.i > 0 {
            TripleClass::new(c.i, c.i, c.i, c.i)
        } else if c.i == 0 && c.j > 0 {
            TripleClass::new(c.j, c.j, c.j, c.j)
        } else {
            transpose_rep(c)
        }
    };
    let y = class_vars(
        &mut pb,
        index.clone(),
        "y",
        first_col_rep,
        // a zero diagonal entry y_{i,i}^{i,i} = y_{i,0}^{0,0} clears its row of Y
        |c| forbidden(d, c.distance()) || forbidden(d, c.i) || forbidden(d, c.j),
        &[],
    );
    nonneg_all(&mut pb, &y);
    let origin = TripleClass::new(0, 0, 0, 0);
    let y00 = y.get(&origin);
    match variant {
        MatrixCut::Nplus => {
            let ydiag: Vec<Affine> = (0..=n).map(|i| y.diagonal(i)).collect();
            bose_mesner_bordered(&mut pb, q, n, &ydiag)?;
            // with the first column substituted, R(y00; Y) ⪰ 0 is Y ⪰ 0
            add_blocks(&mut pb, affine_blocks(&st, &y.expr));
            // z_{i,i}^{i,i} = y00 - y_{i,i}^{i,i}; z_00 = 0 clears the first row and column
            let fixed: Vec<(TripleClass, Affine)> =
                (0..=n).map(|i| (TripleClass::new(i, i, i, i), y00.clone() - y.diagonal(i))).collect();
            let z = class_vars(
                &mut pb,
                index.clone(),
                "z",
                transpose_rep,
                |c| forbidden(d, c.distance()) || c.i == 0 || c.j == 0,
                &fixed,
            );
            nonneg_all(&mut pb, &z);
            let mut zb = affine_blocks(&st, &z.expr);
            let zdiag: Vec<Affine> = (0..=n).map(|i| z.diagonal(i)).collect();
            zb[0] = bordered(&st, &zb[0], Affine::constant(1.0) - y00.clone(), &zdiag);
            add_blocks(&mut pb, zb);
        }
        MatrixCut::Ntilde => {
            add_blocks(&mut pb, affine_blocks(&st, &y.expr));
            let comp = y.complement();
            for e in &comp {
                pb.add_nonneg(e.clone());
            }
            let mut zb = affine_blocks(&st, &comp);
            let zdiag: Vec<Affine> = (0..=n).map(|i| comp[index.diagonal(i)].clone()).collect();
            zb[0] = bordered(&st, &zb[0], Affine::constant(1.0) - y00.clone(), &zdiag);
            add_blocks(&mut pb, zb);
        }
    }
    Ok(CodeProgram::unit_box(pb.build(y00 * f(&ipow(q, n)), Sense::Maximize)?))
}

/// Semidefinite bound for caps in the affine space over the field of three elements.
pub fn build_affine_cap_sdp(n: i64) -> Result<CodeProgram> {
    if n < 1 {
        return Err(Error::InvalidArgument(format!("need n >= 1, got {n}")));
    }
    let q = 3;
    let index = Arc::new(enumerate_classes(q, n)?);
    let st = BlockStructure::new(&index)?;
    let mut pb = ProblemBuilder::new();
    let idx2 = index.clone();
    let zero_orbits: Vec<TripleClass> =
        (1..=n).map(|i| index.symmetry_representative(&TripleClass::new(i, i, i, 0))).collect();
    let cv = class_vars(
        &mut pb,
        index.clone(),
        "x",
        |c| idx2.symmetry_representative(c),
        |c| zero_orbits.contains(&idx2.symmetry_representative(c)),
        &[(TripleClass::new(0, 0, 0, 0), Affine::constant(1.0))],
    );
    lin_constraints(&mut pb, &cv);
    add_blocks(&mut pb, affine_blocks(&st, &cv.expr));
    add_blocks(&mut pb, affine_blocks(&st, &cv.complement()));
    let mut obj = Affine::zero();
    for i in 0..=n {
        obj.add_scaled(&cv.column0(i), shell(q, n, i));
    }
    Ok(CodeProgram::unit_box(pb.build(obj, Sense::Maximize)?))
}

/// Variations of the main programme with other normalizations. No box is implied,
/// so these are solved but not certified.
pub fn build_variation(q: i64, n: i64, d: i64, which: Variation) -> Result<BuiltProblem> {
    check(q, n, d)?;
    let index = Arc::new(enumerate_classes(q, n)?);
    let st = BlockStructure::new(&index)?;
    let mut pb = ProblemBuilder::new();
    let idx2 = index.clone();
    let origin = TripleClass::new(0, 0, 0, 0);
    let fixed = match which {
        Variation::TraceBorder => Vec::new(),
        Variation::UnitTrace => {
            // tr M = sum_i C(n,i)(q-1)^i x_{i,i}^{i,i} = 1 fixes x_00 in terms of the rest
            Vec::new()
        }
    };
    let mut cv = class_vars(
        &mut pb,
        index.clone(),
        "x",
        |c| idx2.symmetry_representative(c),
        |c| forbidden(d, c.i) || forbidden(d, c.j) || forbidden(d, c.distance()),
        &fixed,
    );
    let trace = |cv: &ClassVars| {
        let mut t = Affine::zero();
        for i in 0..=n {
            t.add_scaled(&cv.diagonal(i), shell(q, n, i));
        }
        t.normalized()
    };
    let objective = match which {
        Variation::TraceBorder => {
            let x00 = cv.get(&origin);
            pb.add_psd(vec![vec![Affine::constant(1.0), x00.clone()], vec![x00.clone(), trace(&cv)]]);
            x00
        }
        Variation::UnitTrace => {
            // substitute x_00 = 1 - sum_{i>=1} C(n,i)(q-1)^i x_{i,i}^{i,i} everywhere it occurs
            let x00 = cv.get(&origin);
            let var = x00.terms[0].0;
            let mut rest = Affine::constant(1.0);
            for i in 1..=n {
                rest.add_scaled(&cv.diagonal(i), -shell(q, n, i));
            }
            let rest = rest.normalized();
            for e in cv.expr.iter_mut() {
                if e.terms.iter().any(|t| t.0 == var) {
                    let coef: f64 = e.terms.iter().filter(|t| t.0 == var).map(|t| t.1).sum();
                    e.terms.retain(|t| t.0 != var);
                    e.add_scaled(&rest, coef);
                    e.normalize();
                }
            }
            let mut obj = Affine::zero();
            for (c, e) in index.classes().iter().zip(&cv.expr) {
                obj.add_scaled(e, f(&crate::terwilliger::gamma(q, n, c)?));
            }
            // the substituted variable keeps a harmless row so it is not unused
            pb.add_nonneg(Affine::var(var));
            obj
        }
    };
    lin_constraints(&mut pb, &cv);
    add_blocks(&mut pb, affine_blocks(&st, &cv.expr));
    add_blocks(&mut pb, affine_blocks(&st, &cv.complement()));
    pb.build(objective, Sense::Maximize)
}

pub fn build_code_program(spec: &CodeBoundSpec) -> Result<CodeProgram> {
    let CodeBoundSpec { q, n, d, method } = *spec;
    match method {
        CodeMethod::Delsarte => build_delsarte(q, n, d, DelsarteForm::Trace),
        CodeMethod::SdpBasic => build_schrijver_sdp(q, n, d, Strength::Basic),
        CodeMethod::SdpLaurent => build_schrijver_sdp(q, n, d, Strength::Laurent),
        CodeMethod::MatrixcutNplus => build_matrix_cut_sdp(q, n, d, MatrixCut::Nplus),
        CodeMethod::MatrixcutNtilde => build_matrix_cut_sdp(q, n, d, MatrixCut::Ntilde),
    }
}

/// Build, solve, certify and round.
pub fn code_bound(spec: &CodeBoundSpec, opts: &SolveOptions) -> Result<BoundReport> {
    code_bound_with_certificate(spec, opts).map(|(r, _)| r)
}

/// As [`code_bound`], also returning the dual certificate when there is one.
pub fn code_bound_with_certificate(
    spec: &CodeBoundSpec,
    opts: &SolveOptions,
) -> Result<(BoundReport, Option<DualCertificate>)> {
    spec.validate()?;
    if spec.d > spec.n {
        let mut r = BoundReport::analytic(spec.q, spec.n, spec.method.name(), Direction::Upper, 1, "trivial");
        r.d = Some(spec.d);
        return Ok((r, None));
    }
    let prog = build_code_program(spec)?;
    let cert = solve_and_certify(&prog.built, &prog.bounds, opts)?;
    let certificate = cert.certificate.clone();
    let mut r = cert.into_report(spec.q, spec.n, spec.method.name(), Sense::Maximize);
    r.d = Some(spec.d);
    Ok((r, certificate))
}

/// Solver value of the affine-cap programme together with its certified upper bound.
pub fn affine_cap_bound(n: i64, opts: &SolveOptions) -> Result<BoundReport> {
    let prog = build_affine_cap_sdp(n)?;
    let cert = solve_and_certify(&prog.built, &prog.bounds, opts)?;
    Ok(cert.into_report(3, n, "affine_cap", Sense::Maximize))
}

/// Closed form of the affine-cap optimum, `1 + (3^n - 1)/2`.
pub fn affine_cap_value(n: i64) -> f64 {
    1.0 + (3f64.powi(n as i32) - 1.0) / 2.0
}

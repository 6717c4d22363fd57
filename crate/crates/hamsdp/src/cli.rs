//! Command-line front end.
//!
//! Exit codes: 0 when every requested bound is certified, 2 when a solver or a
//! certificate fails, 1 on usage and input errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds_code::{
    affine_cap_bound, build_affine_cap_sdp, build_code_program, code_bound_with_certificate, CodeBoundSpec, CodeMethod,
};
use crate::bounds_covering::{
    build_first_sdp, build_second_sdp, covering_bound_with_certificate, pair_covering_ineq, sphere_covering_ineq,
    van_wee_ineq, CoverBoundSpec, CoverMethod, CoveringNumberTable, LinearInequalitySet,
};
use crate::certify::{verify_certificate, DualCertificate};
use crate::combinatorics::sphere_covering_bound;
use crate::error::Error;
use crate::report::BoundReport;
use crate::sdp::{read_sdpa, read_sdpa_solution, write_sdpa, Backend, SdpProblem, SolveOptions};
use crate::selftest;

/// Environment variable holding an external solver command template.
pub const SOLVER_ENV: &str = "HAMSDP_SOLVER";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Builtin,
    External,
}

#[derive(Debug, Parser)]
#[command(name = "hamsdp", version, about = "Certified SDP and LP bounds for codes in Hamming spaces")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Solver backend. Defaults to external when HAMSDP_SOLVER is set.
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    /// External solver command with `{in}` and `{out}` placeholders.
    #[arg(long, global = true)]
    pub solver_cmd: Option<String>,
    /// Relative duality gap at which the built-in solver stops.
    #[arg(long, global = true)]
    pub gap_tol: Option<f64>,
    #[arg(long, global = true)]
    pub feas_tol: Option<f64>,
    /// Iteration cap for the built-in solver.
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Worker threads for `table`.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upper bound on A_q(n,d).
    Codebound {
        #[command(flatten)]
        code: CodeArgs,
        /// Write the dual certificate as JSON.
        #[arg(long)]
        certificate_out: Option<PathBuf>,
    },
    /// Lower bound on K_q(n,r).
    Coverbound {
        #[command(flatten)]
        cover: CoverArgs,
        #[arg(long)]
        certificate_out: Option<PathBuf>,
    },
    /// Upper bound on the size of a cap in AG(n,3).
    Affinecap {
        #[arg(long)]
        n: i64,
    },
    /// Write a programme in SDPA sparse format (minimization form).
    EmitSdpa {
        #[arg(long)]
        out: PathBuf,
        #[command(subcommand)]
        what: EmitTarget,
    },
    /// Certify a dual solution (CSDP layout) against an SDPA problem.
    Certify {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        dual: PathBuf,
        /// Box on every primal variable, used to absorb the dual residual.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        box_lo: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        box_hi: f64,
    },
    /// Run a JSON-lines suite of bound specifications.
    Table {
        #[arg(long)]
        suite: PathBuf,
    },
    /// Exact identities and dense-oracle checks.
    Selftest,
}

#[derive(Debug, Subcommand)]
pub enum EmitTarget {
    Code(CodeArgs),
    Cover(CoverArgs),
    Affinecap {
        #[arg(long)]
        n: i64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CodeArgs {
    #[arg(long)]
    pub q: i64,
    #[arg(long)]
    pub n: i64,
    #[arg(long)]
    pub d: i64,
    /// delsarte, sdp, sdp+, nplus or ntilde.
    #[arg(long, default_value = "sdp+")]
    pub method: String,
}

#[derive(Debug, Clone, Args)]
pub struct CoverArgs {
    #[arg(long)]
    pub q: i64,
    #[arg(long)]
    pub n: i64,
    #[arg(long)]
    pub r: i64,
    /// lin, sdp1 or sdp2.
    #[arg(long, default_value = "sdp2")]
    pub method: String,
    /// sphere, vanwee, pair or file:PATH; repeatable.
    #[arg(long = "ineq", default_value = "sphere")]
    pub ineqs: Vec<String>,
    /// Covering numbers `m k F` for the pair inequalities.
    #[arg(long)]
    pub ftable: Option<PathBuf>,
}

/// Errors tagged with the exit code they map to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Backend(_) | Error::Certificate(_) => EXIT_FAILED,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

fn with_path(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| {
        let f = Failure::from(e);
        Failure { code: f.code, message: format!("{}: {}", path.display(), f.message) }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

impl GlobalArgs {
    /// Solver options from flags and the environment; flags win.
    pub fn solve_options(&self, env_template: Option<String>) -> CliResult<SolveOptions> {
        let mut opts = SolveOptions::default();
        if let Some(v) = self.gap_tol {
            opts.gap_tol = v;
        }
        if let Some(v) = self.feas_tol {
            opts.feas_tol = v;
        }
        if let Some(v) = self.max_iter {
            opts.max_iter = v;
        }
        if !(opts.gap_tol > 0.0 && opts.feas_tol > 0.0 && opts.max_iter > 0) {
            return Err(Failure::usage("tolerances and the iteration limit must be positive"));
        }
        let template = self.solver_cmd.clone().or(env_template.filter(|t| !t.trim().is_empty()));
        let kind = self.backend.unwrap_or(if template.is_some() { BackendKind::External } else { BackendKind::Builtin });
        opts.backend = match kind {
            BackendKind::Builtin => Backend::Builtin,
            BackendKind::External => {
                let t = template.ok_or_else(|| {
                    Failure::usage(format!("--backend external needs --solver-cmd or {SOLVER_ENV}"))
                })?;
                if !t.contains("{in}") || !t.contains("{out}") {
                    return Err(Failure::usage(format!("solver command `{t}` needs both {{in}} and {{out}}")));
                }
                Backend::External(t)
            }
        };
        Ok(opts)
    }
}

impl CodeArgs {
    pub fn spec(&self) -> CliResult<CodeBoundSpec> {
        let method: CodeMethod = self.method.parse()?;
        let spec = CodeBoundSpec { q: self.q, n: self.n, d: self.d, method };
        spec.validate()?;
        Ok(spec)
    }
}

/// One inequality family named on the command line.
pub fn parse_inequality(word: &str, q: i64, n: i64, r: i64, ftable: Option<&Path>) -> CliResult<LinearInequalitySet> {
    match word {
        "sphere" => Ok(sphere_covering_ineq(q, n, r)?),
        "vanwee" | "pair" if q != 2 => {
            Err(Failure::usage(format!("`--ineq {word}` is defined for binary codes only (q = 2), got q = {q}")))
        }
        "vanwee" => Ok(van_wee_ineq(n, r)?),
        "pair" => {
            let path = ftable.ok_or_else(|| Failure::usage("`--ineq pair` needs --ftable"))?;
            let text = std::fs::read_to_string(path).map_err(|e| with_path(path)(e.into()))?;
            let table = CoveringNumberTable::parse(&text).map_err(with_path(path))?;
            Ok(pair_covering_ineq(q, n, r, &table)?)
        }
        other => match other.strip_prefix("file:") {
            Some(p) => {
                let path = Path::new(p);
                let text = std::fs::read_to_string(path).map_err(|e| with_path(path)(e.into()))?;
                let ineq = LinearInequalitySet::parse(&text).map_err(with_path(path))?;
                if (ineq.q, ineq.n) != (q, n) {
                    return Err(Failure::usage(format!(
                        "{}: inequality is for (q,n) = ({},{}), not ({q},{n})",
                        path.display(),
                        ineq.q,
                        ineq.n
                    )));
                }
                Ok(ineq)
            }
            None => Err(Failure::usage(format!("unknown inequality `{other}` (sphere, vanwee, pair, file:PATH)"))),
        },
    }
}

impl CoverArgs {
    pub fn spec(&self) -> CliResult<CoverBoundSpec> {
        let method: CoverMethod = self.method.parse()?;
        let inequalities = self
            .ineqs
            .iter()
            .map(|w| parse_inequality(w, self.q, self.n, self.r, self.ftable.as_deref()))
            .collect::<CliResult<Vec<_>>>()?;
        let spec = CoverBoundSpec { q: self.q, n: self.n, r: self.r, inequalities, method };
        spec.validate()?;
        Ok(spec)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let f = File::create(path).map_err(|e| with_path(path)(e.into()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn json_line<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    let s = serde_json::to_string_pretty(value).expect("serializable output");
    writeln!(out, "{s}").map_err(|e| Failure::from(Error::from(e)))
}

/// `key  value` lines, one per field, in serialization order.
fn text_fields<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    let v = serde_json::to_value(value).expect("serializable output");
    let obj = v.as_object().expect("object output");
    let width = obj.keys().map(|k| k.len()).max().unwrap_or(0);
    for (k, v) in obj {
        let shown = match v {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        writeln!(out, "{k:<width$}  {shown}").map_err(|e| Failure::from(Error::from(e)))?;
    }
    Ok(())
}

fn emit<T: Serialize>(out: &mut dyn Write, format: Format, value: &T) -> CliResult<()> {
    match format {
        Format::Json => json_line(out, value),
        Format::Text => text_fields(out, value),
    }
}

fn report_exit(r: &BoundReport) -> i32 {
    if r.is_certified() {
        EXIT_OK
    } else {
        EXIT_FAILED
    }
}

fn finish_bound(
    out: &mut dyn Write,
    format: Format,
    report: &BoundReport,
    cert: Option<DualCertificate>,
    cert_path: Option<&Path>,
) -> CliResult<i32> {
    if let Some(path) = cert_path {
        match &cert {
            Some(c) => write_json(path, c)?,
            None => write_json(path, &serde_json::Value::Null)?,
        }
    }
    emit(out, format, report)?;
    Ok(report_exit(report))
}

fn write_problem(path: &Path, p: &SdpProblem) -> CliResult<()> {
    let f = File::create(path).map_err(|e| with_path(path)(e.into()))?;
    write_sdpa(p, BufWriter::new(f)).map_err(with_path(path))
}

#[derive(Serialize)]
struct EmitSummary {
    path: String,
    variables: usize,
    blocks: usize,
    /// The file minimizes this multiple of the bound.
    objective_sign: f64,
}

#[derive(Serialize)]
struct CertifySummary {
    certified: f64,
    dual_obj: f64,
    min_eig: f64,
    margin: f64,
    max_abs_epsilon: f64,
}

/// A line of a suite file.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SuiteEntry {
    Code {
        q: i64,
        n: i64,
        d: i64,
        method: String,
        #[serde(default)]
        known: Option<i64>,
        #[serde(default)]
        previous: Option<i64>,
    },
    Cover {
        q: i64,
        n: i64,
        r: i64,
        method: String,
        #[serde(default = "default_ineqs")]
        ineq: Vec<String>,
        #[serde(default)]
        ftable: Option<PathBuf>,
        #[serde(default)]
        known: Option<i64>,
        #[serde(default)]
        previous: Option<i64>,
    },
}

fn default_ineqs() -> Vec<String> {
    vec!["sphere".into()]
}

/// One row of a results table. For code rows `known` is the best known lower
/// bound and `reference` is the Delsarte bound; for covering rows `known` is the
/// best known upper bound and `reference` is the sphere covering bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub line: usize,
    pub kind: String,
    pub q: i64,
    pub n: i64,
    /// `d` for code rows, `r` for covering rows.
    pub param: i64,
    pub method: String,
    pub known: Option<i64>,
    pub ours: Option<i64>,
    pub previous: Option<i64>,
    pub reference: Option<i64>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TableRow {
    pub fn certified(&self) -> bool {
        matches!(self.status.as_str(), "certified" | "exact" | "trivial")
    }
}

pub fn read_suite(path: &Path) -> CliResult<Vec<(usize, SuiteEntry)>> {
    let f = File::open(path).map_err(|e| with_path(path)(e.into()))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| with_path(path)(e.into()))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let entry: SuiteEntry = serde_json::from_str(t)
            .map_err(|e| Failure::usage(format!("{}: line {}: {e}", path.display(), k + 1)))?;
        out.push((k + 1, entry));
    }
    Ok(out)
}

fn run_entry(line: usize, entry: &SuiteEntry, base: &Path, opts: &SolveOptions) -> TableRow {
    let (kind, q, n, param, method, known, previous) = match entry {
        SuiteEntry::Code { q, n, d, method, known, previous } => ("code", *q, *n, *d, method, *known, *previous),
        SuiteEntry::Cover { q, n, r, method, known, previous, .. } => ("cover", *q, *n, *r, method, *known, *previous),
    };
    let mut row = TableRow {
        line,
        kind: kind.into(),
        q,
        n,
        param,
        method: method.clone(),
        known,
        ours: None,
        previous,
        reference: None,
        status: String::new(),
        error: None,
    };
    let outcome: CliResult<(BoundReport, Option<i64>)> = (|| match entry {
        SuiteEntry::Code { method, .. } => {
            let spec = CodeArgs { q, n, d: param, method: method.clone() }.spec()?;
            let report = crate::bounds_code::code_bound(&spec, opts)?;
            let delsarte = if spec.method == CodeMethod::Delsarte {
                report.clone()
            } else {
                crate::bounds_code::code_bound(&CodeBoundSpec { method: CodeMethod::Delsarte, ..spec }, opts)?
            };
            Ok((report, delsarte.is_certified().then_some(delsarte.integer_bound)))
        }
        SuiteEntry::Cover { method, ineq, ftable, .. } => {
            let ftable = ftable.as_ref().map(|p| if p.is_relative() { base.join(p) } else { p.clone() });
            let args = CoverArgs { q, n, r: param, method: method.clone(), ineqs: ineq.clone(), ftable };
            let spec = args.spec()?;
            let report = crate::bounds_covering::covering_bound(&spec, opts)?;
            let sphere = sphere_covering_bound(q, n, param).ok().and_then(|v| num_traits::ToPrimitive::to_i64(&v));
            Ok((report, sphere))
        }
    })();
    match outcome {
        Ok((report, reference)) => {
            row.ours = report.is_certified().then_some(report.integer_bound);
            row.reference = reference;
            row.status = report.status.clone();
            row.error = report.note.clone().filter(|_| !report.is_certified());
        }
        Err(f) => {
            row.status = if f.code == EXIT_FAILED { "failed".into() } else { "error".into() };
            row.error = Some(f.message);
        }
    }
    row
}

/// Run every suite entry on a pool of `jobs` threads; rows come back in file order.
pub fn run_table(entries: &[(usize, SuiteEntry)], base: &Path, opts: &SolveOptions, jobs: usize) -> CliResult<Vec<TableRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    Ok(pool.install(|| entries.par_iter().map(|(line, e)| run_entry(*line, e, base, opts)).collect()))
}

fn show(v: Option<i64>) -> String {
    v.map_or("-".into(), |x| x.to_string())
}

fn print_table(out: &mut dyn Write, rows: &[TableRow]) -> std::io::Result<()> {
    let header = ["kind", "q", "n", "d/r", "method", "known", "ours", "previous", "delsarte/sphere", "status"];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.kind.clone(),
                r.q.to_string(),
                r.n.to_string(),
                r.param.to_string(),
                r.method.clone(),
                show(r.known),
                show(r.ours),
                show(r.previous),
                show(r.reference),
                r.status.clone(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| cells.iter().map(|row| row[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |items: Vec<&str>| -> String {
        items.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect::<Vec<_>>().join("  ")
    };
    writeln!(out, "{}", line(header.to_vec()))?;
    for row in &cells {
        writeln!(out, "{}", line(row.iter().map(|s| s.as_str()).collect()))?;
    }
    for r in rows.iter().filter(|r| r.error.is_some()) {
        writeln!(out, "line {}: {}", r.line, r.error.as_deref().unwrap_or_default())?;
    }
    Ok(())
}

fn run(cli: Cli, out: &mut dyn Write) -> CliResult<i32> {
    let format = cli.global.format;
    if cli.global.jobs == 0 {
        return Err(Failure::usage("--jobs must be at least 1"));
    }
    let opts = || cli.global.solve_options(std::env::var(SOLVER_ENV).ok());
    match &cli.command {
        Command::Codebound { code, certificate_out } => {
            let spec = code.spec()?;
            let (report, cert) = code_bound_with_certificate(&spec, &opts()?)?;
            finish_bound(out, format, &report, cert, certificate_out.as_deref())
        }
        Command::Coverbound { cover, certificate_out } => {
            let spec = cover.spec()?;
            let (report, cert) = covering_bound_with_certificate(&spec, &opts()?)?;
            finish_bound(out, format, &report, cert, certificate_out.as_deref())
        }
        Command::Affinecap { n } => {
            let report = affine_cap_bound(*n, &opts()?)?;
            emit(out, format, &report)?;
            Ok(report_exit(&report))
        }
        Command::EmitSdpa { out: path, what } => {
            let built = match what {
                EmitTarget::Code(a) => build_code_program(&a.spec()?)?.built,
                EmitTarget::Cover(a) => {
                    let spec = a.spec()?;
                    match spec.method {
                        CoverMethod::Lin => return Err(Failure::usage("the lin method is not a semidefinite programme")),
                        CoverMethod::Sdp1 => build_first_sdp(spec.q, spec.n, spec.r, &spec.inequalities)?.built,
                        CoverMethod::Sdp2 => build_second_sdp(spec.q, spec.n, spec.r, &spec.inequalities)?.built,
                    }
                }
                EmitTarget::Affinecap { n } => build_affine_cap_sdp(*n)?.built,
            };
            write_problem(path, &built.problem)?;
            let summary = EmitSummary {
                path: path.display().to_string(),
                variables: built.problem.m(),
                blocks: built.problem.block_sizes.len(),
                objective_sign: built.from_min(1.0),
            };
            emit(out, format, &summary)?;
            Ok(EXIT_OK)
        }
        Command::Certify { problem, dual, box_lo, box_hi } => {
            let pf = File::open(problem).map_err(|e| with_path(problem)(e.into()))?;
            let p = read_sdpa(BufReader::new(pf)).map_err(with_path(problem))?;
            let df = File::open(dual).map_err(|e| with_path(dual)(e.into()))?;
            let sol = read_sdpa_solution(BufReader::new(df), &p).map_err(with_path(dual))?;
            let bounds = vec![(*box_lo, *box_hi); p.m()];
            let (certified, cert) = verify_certificate(&p, &sol, &bounds)?;
            let summary = CertifySummary {
                certified,
                dual_obj: cert.dual_obj,
                min_eig: cert.min_eig,
                margin: cert.margin,
                max_abs_epsilon: cert.epsilons.iter().map(|e| e.abs()).fold(0.0, f64::max),
            };
            emit(out, format, &summary)?;
            Ok(EXIT_OK)
        }
        Command::Table { suite } => {
            let entries = read_suite(suite)?;
            let base = suite.parent().unwrap_or(Path::new("."));
            let rows = run_table(&entries, base, &opts()?, cli.global.jobs)?;
            match format {
                Format::Json => json_line(out, &rows)?,
                Format::Text => print_table(out, &rows).map_err(|e| Failure::from(Error::from(e)))?,
            }
            Ok(if rows.iter().all(|r| r.certified()) {
                EXIT_OK
            } else if rows.iter().any(|r| r.status == "error") {
                EXIT_USAGE
            } else {
                EXIT_FAILED
            })
        }
        Command::Selftest => {
            let checks = selftest::run_all();
            match format {
                Format::Json => json_line(out, &checks)?,
                Format::Text => {
                    for c in &checks {
                        let mark = if c.passed { "ok  " } else { "FAIL" };
                        writeln!(out, "{mark} {:<32} {:>6} ms  {}", c.name, c.elapsed_ms, c.detail)
                            .map_err(|e| Failure::from(Error::from(e)))?;
                    }
                }
            }
            Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_FAILED })
        }
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{rendered}") } else { write!(out, "{rendered}") };
            return code;
        }
    };
    match run(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

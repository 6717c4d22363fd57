//! SDPA sparse format (`.dat-s`) and the sparse solution layout written by CSDP.

use std::io::{BufRead, Write};

use super::{BlockMatrix, Entry, SdpProblem, SdpSolution, SolveOptions, SolveStatus};
use crate::error::{Error, Result};

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_sdpa<W: Write>(p: &SdpProblem, mut out: W) -> Result<()> {
    let mut s = String::new();
    s.push_str(&format!("{}\n{}\n", p.m(), p.block_sizes.len()));
    s.push_str(&p.block_sizes.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" "));
    s.push('\n');
    s.push_str(&p.c.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(" "));
    s.push('\n');
    for (k, mat) in p.f.iter().enumerate() {
        let mut sorted = mat.clone();
        sorted.sort_by_key(|e| (e.block, e.row, e.col));
        for e in sorted {
            s.push_str(&format!("{} {} {} {} {}\n", k, e.block + 1, e.row + 1, e.col + 1, fmt(e.value)));
        }
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    /// Next line that is not blank and not a comment.
    fn next_content(&mut self) -> Result<Option<(usize, String)>> {
        for line in self.inner.by_ref() {
            self.line_no += 1;
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('*') || t.starts_with('"') {
                continue;
            }
            return Ok(Some((self.line_no, t.to_string())));
        }
        Ok(None)
    }

    fn require(&mut self, what: &str) -> Result<(usize, String)> {
        match self.next_content()? {
            Some(v) => Ok(v),
            None => Err(Error::Parse { line: self.line_no + 1, msg: format!("unexpected end of input, expected {what}") }),
        }
    }
}

fn tokens(s: &str) -> impl Iterator<Item = &str> {
    s.split(|ch: char| ch.is_whitespace() || matches!(ch, ',' | '{' | '}' | '(' | ')')).filter(|t| !t.is_empty())
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    tok.parse::<T>().map_err(|e| Error::Parse { line, msg: format!("bad number `{tok}`: {e}") })
}

pub fn read_sdpa<R: BufRead>(source: R) -> Result<SdpProblem> {
    let mut lines = Lines { inner: source.lines(), line_no: 0 };
    let (ln, l) = lines.require("the number of variables")?;
    let m: usize = parse_num(tokens(&l).next().unwrap_or(""), ln)?;
    let (ln, l) = lines.require("the number of blocks")?;
    let nblocks: usize = parse_num(tokens(&l).next().unwrap_or(""), ln)?;
    let (ln, l) = lines.require("the block sizes")?;
    let sizes: Vec<i64> = tokens(&l).take(nblocks).map(|t| parse_num(t, ln)).collect::<Result<_>>()?;
    if sizes.len() != nblocks {
        return Err(Error::Parse { line: ln, msg: format!("expected {nblocks} block sizes, found {}", sizes.len()) });
    }
    if sizes.contains(&0) {
        return Err(Error::Parse { line: ln, msg: "block of size 0".into() });
    }
    let mut c = Vec::with_capacity(m);
    while c.len() < m {
        let (ln, l) = lines.require("the objective vector")?;
        for t in tokens(&l) {
            if c.len() < m {
                c.push(parse_num::<f64>(t, ln)?);
            }
        }
    }
    let mut f: Vec<Vec<Entry>> = vec![Vec::new(); m + 1];
    while let Some((ln, l)) = lines.next_content()? {
        let t: Vec<&str> = tokens(&l).collect();
        if t.len() != 5 {
            return Err(Error::Parse { line: ln, msg: format!("expected `matno blkno i j value`, found {} fields", t.len()) });
        }
        let k: usize = parse_num(t[0], ln)?;
        let b: usize = parse_num(t[1], ln)?;
        let i: usize = parse_num(t[2], ln)?;
        let j: usize = parse_num(t[3], ln)?;
        let v: f64 = parse_num(t[4], ln)?;
        if k > m || b == 0 || b > nblocks || i == 0 || j == 0 {
            return Err(Error::Parse { line: ln, msg: format!("index out of range in `{l}`") });
        }
        let dim = sizes[b - 1].unsigned_abs() as usize;
        if i > dim || j > dim || (sizes[b - 1] < 0 && i != j) {
            return Err(Error::Parse { line: ln, msg: format!("entry `{l}` outside block {b}") });
        }
        f[k].push(Entry { block: b - 1, row: (i - 1).min(j - 1), col: (i - 1).max(j - 1), value: v });
    }
    let mut p = SdpProblem { c, block_sizes: sizes, f, variable_box: None };
    p.canonicalize();
    p.validate()?;
    Ok(p)
}

/// Solution layout: the vector `x` on one line, then `matno blkno i j value` with
/// matrix 1 the slack `X(x)` and matrix 2 the dual `Y`.
pub fn write_sdpa_solution<W: Write>(sol: &SdpSolution, mut out: W) -> Result<()> {
    let mut s = sol.x.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(" ");
    s.push('\n');
    for (matno, blocks) in [(1, &sol.x_blocks), (2, &sol.y_blocks)] {
        for (b, blk) in blocks.iter().enumerate() {
            let n = blk.dim();
            for r in 0..n {
                let cols: Box<dyn Iterator<Item = usize>> =
                    if matches!(blk, BlockMatrix::Diagonal(_)) { Box::new(r..=r) } else { Box::new(r..n) };
                for c in cols {
                    let v = blk.get(r, c);
                    if v != 0.0 {
                        s.push_str(&format!("{} {} {} {} {}\n", matno, b + 1, r + 1, c + 1, fmt(v)));
                    }
                }
            }
        }
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_sdpa_solution<R: BufRead>(source: R, p: &SdpProblem) -> Result<SdpSolution> {
    let mut lines = Lines { inner: source.lines(), line_no: 0 };
    let mut x = Vec::with_capacity(p.m());
    while x.len() < p.m() {
        let (ln, l) = lines.require("the solution vector")?;
        for t in tokens(&l) {
            if x.len() == p.m() {
                return Err(Error::Dimension(format!("line {ln}: more than {} solution values", p.m())));
            }
            x.push(parse_num::<f64>(t, ln)?);
        }
    }
    let mut y: Vec<BlockMatrix> = p.block_sizes.iter().map(|&s| BlockMatrix::zeros(s)).collect();
    while let Some((ln, l)) = lines.next_content()? {
        let t: Vec<&str> = tokens(&l).collect();
        if t.len() != 5 {
            return Err(Error::Parse { line: ln, msg: format!("expected `matno blkno i j value`, found {} fields", t.len()) });
        }
        let k: usize = parse_num(t[0], ln)?;
        let b: usize = parse_num(t[1], ln)?;
        let i: usize = parse_num(t[2], ln)?;
        let j: usize = parse_num(t[3], ln)?;
        let v: f64 = parse_num(t[4], ln)?;
        if !(k == 1 || k == 2) {
            return Err(Error::Parse { line: ln, msg: format!("matrix number {k} is neither 1 nor 2") });
        }
        if b == 0 || b > p.block_sizes.len() {
            return Err(Error::Dimension(format!("line {ln}: block {b} but the problem has {} blocks", p.block_sizes.len())));
        }
        let dim = p.block_dim(b - 1);
        if i == 0 || j == 0 || i > dim || j > dim {
            return Err(Error::Dimension(format!("line {ln}: entry ({i},{j}) outside block {b} of size {dim}")));
        }
        if k == 2 {
            let (r, c) = ((i - 1).min(j - 1), (i - 1).max(j - 1));
            match &mut y[b - 1] {
                BlockMatrix::Dense(m) => {
                    m[(r, c)] = v;
                    m[(c, r)] = v;
                }
                BlockMatrix::Diagonal(d) => {
                    if r != c {
                        return Err(Error::Dimension(format!("line {ln}: off-diagonal entry in LP block {b}")));
                    }
                    d[r] = v;
                }
            }
        }
    }
    let sol = SdpSolution::evaluate(p, SolveStatus::NearOptimal, x, y, 0);
    Ok(classify(sol, &SolveOptions::default()))
}

/// Mark a solution optimal when its gap and residuals meet the tolerances.
pub(crate) fn classify(mut sol: SdpSolution, opts: &SolveOptions) -> SdpSolution {
    let scale = 1.0 + sol.primal_obj.abs().max(sol.dual_obj.abs());
    let pinf_ok = sol.primal_infeasibility <= 1e3 * opts.feas_tol * scale;
    let dinf_ok = sol.dual_infeasibility <= 1e3 * opts.feas_tol * scale;
    let neg_y = sol.y_blocks.iter().map(|b| b.min_eigenvalue()).fold(f64::INFINITY, f64::min);
    sol.status = if sol.gap <= opts.gap_tol * 10.0 && pinf_ok && dinf_ok && neg_y >= -1e3 * opts.feas_tol {
        SolveStatus::Optimal
    } else if sol.gap <= 1e-4 {
        SolveStatus::NearOptimal
    } else {
        SolveStatus::Failed
    };
    sol
}

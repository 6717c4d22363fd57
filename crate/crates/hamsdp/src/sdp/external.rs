use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::sdpa::{classify, read_sdpa_solution, write_sdpa};
use super::{SdpProblem, SdpSolution, SolveOptions};
use crate::error::{Error, Result};

static COUNTER: AtomicUsize = AtomicUsize::new(0);

fn scratch_dir() -> Result<PathBuf> {
    let id = COUNTER.fetch_add(1, Ordering::Relaxed);
    let dir = std::env::temp_dir().join(format!("hamsdp-{}-{id}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Run an external solver through a shell command template with `{in}` and `{out}`.
///
/// The solver must read SDPA sparse input and write the CSDP solution layout.
pub fn solve_external(p: &SdpProblem, template: &str, opts: &SolveOptions) -> Result<SdpSolution> {
    if !template.contains("{in}") || !template.contains("{out}") {
        return Err(Error::InvalidArgument(format!("solver template `{template}` needs both {{in}} and {{out}}")));
    }
    let dir = scratch_dir()?;
    let input = dir.join("problem.dat-s");
    let output = dir.join("solution.sol");
    write_sdpa(p, BufWriter::new(File::create(&input)?))?;
    let cmd = template.replace("{in}", &input.display().to_string()).replace("{out}", &output.display().to_string());
    let result = Command::new("sh").arg("-c").arg(&cmd).output();
    let outcome = match result {
        Err(e) => Err(Error::Backend(format!("could not start `{cmd}`: {e}"))),
        Ok(o) if !o.status.success() => Err(Error::Backend(format!(
            "`{cmd}` exited with {}: {}",
            o.status,
            String::from_utf8_lossy(&o.stderr).trim()
        ))),
        Ok(_) => match File::open(&output) {
            Err(e) => Err(Error::Backend(format!("solver wrote no solution file: {e}"))),
            Ok(f) => read_sdpa_solution(BufReader::new(f), p).map(|s| classify(s, opts)),
        },
    };
    let _ = std::fs::remove_dir_all(&dir);
    outcome
}

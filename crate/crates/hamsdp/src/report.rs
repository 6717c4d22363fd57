//! Solve-and-certify pipeline shared by the code and covering bounds.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::certify::{clamp_dual, repair_dual, verify_certificate, DualCertificate};
use crate::error::Result;
use crate::sdp::{solve, BuiltProblem, Sense, SolveOptions, SolveStatus};

/// Guard added before rounding a certified value to an integer.
pub const ROUND_GUARD: f64 = 1e-9;
/// Alternating projection rounds used to repair the dual before certification.
pub const REPAIR_ROUNDS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Upper,
    Lower,
}

impl Direction {
    pub fn round(self, v: f64) -> i64 {
        self.round_with(v, ROUND_GUARD)
    }

    pub fn round_with(self, v: f64, guard: f64) -> i64 {
        match self {
            Direction::Upper => (v + guard).floor() as i64,
            Direction::Lower => (v - guard).ceil() as i64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub q: i64,
    pub n: i64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub d: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub r: Option<i64>,
    pub method: String,
    pub direction: Direction,
    pub solver_objective: f64,
    pub certified_value: f64,
    pub integer_bound: i64,
    pub raw_integer_bound: i64,
    pub status: String,
    pub gap: f64,
    pub residual_max: f64,
    pub min_dual_eigenvalue: f64,
    pub wall_time_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl BoundReport {
    /// A bound that needs no solver.
    pub fn analytic(q: i64, n: i64, method: &str, direction: Direction, value: i64, status: &str) -> Self {
        BoundReport {
            q,
            n,
            d: None,
            r: None,
            method: method.to_string(),
            direction,
            solver_objective: value as f64,
            certified_value: value as f64,
            integer_bound: value,
            raw_integer_bound: value,
            status: status.to_string(),
            gap: 0.0,
            residual_max: 0.0,
            min_dual_eigenvalue: 0.0,
            wall_time_ms: 0,
            exact: None,
            note: None,
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self.status.as_str(), "certified" | "exact" | "trivial")
    }
}

/// Outcome of solving a built problem and certifying the dual.
#[derive(Clone, Debug)]
pub struct Certified {
    pub solver_objective: f64,
    pub certified_value: Option<f64>,
    pub status: SolveStatus,
    pub gap: f64,
    pub certificate: Option<DualCertificate>,
    pub failure: Option<String>,
    pub wall_time_ms: u64,
}

/// Solve, clamp the dual, and certify with the given variable box.
pub fn solve_and_certify(built: &BuiltProblem, bounds: &[(f64, f64)], opts: &SolveOptions) -> Result<Certified> {
    let start = Instant::now();
    let sol = solve(&built.problem, opts)?;
    let solver_objective = built.from_min(sol.primal_obj);
    let usable = matches!(sol.status, SolveStatus::Optimal | SolveStatus::NearOptimal);
    let (certified_value, certificate, failure) = if usable {
        // every candidate is checked on its own, so the best one may be kept
        let candidates = [clamp_dual(&built.problem, &sol), repair_dual(&built.problem, &sol, REPAIR_ROUNDS)];
        let mut best: Option<(f64, DualCertificate)> = None;
        let mut last_err = None;
        for cand in &candidates {
            match verify_certificate(&built.problem, cand, bounds) {
                Ok((lower, cert)) => {
                    if best.as_ref().is_none_or(|b| lower > b.0) {
                        best = Some((lower, cert));
                    }
                }
                Err(e) => last_err = Some(e.to_string()),
            }
        }
        match best {
            Some((lower, cert)) => (Some(built.from_min(lower)), Some(cert), None),
            None => (None, None, last_err),
        }
    } else {
        (None, None, Some(format!("solver status {}", sol.status)))
    };
    Ok(Certified {
        solver_objective,
        certified_value,
        status: sol.status,
        gap: sol.gap,
        certificate,
        failure,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

impl Certified {
    pub fn into_report(self, q: i64, n: i64, method: &str, sense: Sense) -> BoundReport {
        let direction = match sense {
            Sense::Maximize => Direction::Upper,
            Sense::Minimize => Direction::Lower,
        };
        let (certified_value, status) = match (self.certified_value, &self.failure) {
            (Some(v), _) => (v, "certified".to_string()),
            (None, Some(f)) if f.starts_with("solver status") => (f64::NAN, "solver_failed".to_string()),
            (None, _) => (f64::NAN, "certificate_failed".to_string()),
        };
        let integer_bound = if certified_value.is_finite() { direction.round(certified_value) } else { -1 };
        // the solver value is only good to its relative gap
        let raw_guard = ROUND_GUARD + self.gap.max(0.0) * (1.0 + self.solver_objective.abs());
        let raw = if self.solver_objective.is_finite() { direction.round_with(self.solver_objective, raw_guard) } else { -1 };
        let residual_max =
            self.certificate.as_ref().map_or(f64::NAN, |c| c.epsilons.iter().map(|e| e.abs()).fold(0.0, f64::max));
        let min_eig = self.certificate.as_ref().map_or(f64::NAN, |c| c.min_eig);
        BoundReport {
            q,
            n,
            d: None,
            r: None,
            method: method.to_string(),
            direction,
            solver_objective: self.solver_objective,
            certified_value,
            integer_bound,
            raw_integer_bound: raw,
            status,
            gap: self.gap,
            residual_max,
            min_dual_eigenvalue: min_eig,
            wall_time_ms: self.wall_time_ms,
            exact: None,
            note: self.failure,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_guard() {
        assert_eq!(Direction::Upper.round(48.0 - 1e-12), 48);
        assert_eq!(Direction::Upper.round(47.99), 47);
        assert_eq!(Direction::Lower.round(745.0 + 1e-12), 745);
        assert_eq!(Direction::Lower.round(744.01), 745);
    }

    #[test]
    fn json_keys_are_stable() {
        let r = BoundReport::analytic(3, 6, "delsarte", Direction::Upper, 1, "trivial");
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        let mut want = vec![
            "q", "n", "method", "direction", "solver_objective", "certified_value", "integer_bound",
            "raw_integer_bound", "status", "gap", "residual_max", "min_dual_eigenvalue", "wall_time_ms",
        ];
        want.sort();
        let mut keys = keys;
        keys.sort();
        assert_eq!(keys, want);
    }
}

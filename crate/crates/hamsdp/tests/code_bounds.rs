//! Orderings between the code bounds, monotonicity in the distance, and
//! comparison with codes found by brute force.

use hamsdp::bounds_code::{code_bound, CodeBoundSpec, CodeMethod};
use hamsdp::report::BoundReport;
use hamsdp::sdp::SolveOptions;

const METHODS: [CodeMethod; 5] = [
    CodeMethod::Delsarte,
    CodeMethod::SdpBasic,
    CodeMethod::SdpLaurent,
    CodeMethod::MatrixcutNplus,
    CodeMethod::MatrixcutNtilde,
];

fn bound(q: i64, n: i64, d: i64, method: CodeMethod) -> BoundReport {
    let r = code_bound(&CodeBoundSpec { q, n, d, method }, &SolveOptions::default()).unwrap();
    assert!(r.is_certified(), "({q},{n},{d}) {}: {}", method.name(), r.status);
    r
}

/// Greedy lexicographic code: keep every word at distance >= d from all kept words.
fn lexicode(q: i64, n: i64, d: i64) -> usize {
    let total = q.pow(n as u32);
    let word = |mut v: i64| -> Vec<i64> {
        (0..n)
            .map(|_| {
                let s = v % q;
                v /= q;
                s
            })
            .collect()
    };
    let mut code: Vec<Vec<i64>> = Vec::new();
    for v in 0..total {
        let w = word(v);
        if code.iter().all(|c| c.iter().zip(&w).filter(|(a, b)| a != b).count() as i64 >= d) {
            code.push(w);
        }
    }
    code.len()
}

fn assert_at_least(hi: &BoundReport, lo: &BoundReport) {
    let slack = 1e-6 * (1.0 + lo.certified_value.abs());
    assert!(
        hi.certified_value >= lo.certified_value - slack,
        "({},{},{:?}) {} = {} below {} = {}",
        hi.q,
        hi.n,
        hi.d,
        hi.method,
        hi.certified_value,
        lo.method,
        lo.certified_value
    );
}

#[test]
fn orderings_monotonicity_and_known_codes() {
    for (q, n) in [(2, 6), (2, 7), (3, 4), (3, 5), (4, 4)] {
        let mut previous: Option<Vec<i64>> = None;
        for d in 2..=n {
            let r: Vec<BoundReport> = METHODS.iter().map(|&m| bound(q, n, d, m)).collect();
            let [delsarte, basic, laurent, nplus, ntilde] = [&r[0], &r[1], &r[2], &r[3], &r[4]];
            assert_at_least(delsarte, nplus);
            assert_at_least(nplus, ntilde);
            assert_at_least(delsarte, basic);
            assert_at_least(basic, laurent);

            let ints: Vec<i64> = r.iter().map(|x| x.integer_bound).collect();
            if let Some(prev) = &previous {
                for (k, (a, b)) in prev.iter().zip(&ints).enumerate() {
                    assert!(b <= a, "({q},{n}) {}: d={} gives {b}, d={} gave {a}", METHODS[k].name(), d, d - 1);
                }
            }
            previous = Some(ints.clone());

            let known = lexicode(q, n, d) as i64;
            for x in &r {
                assert!(x.integer_bound >= known, "({q},{n},{d}) {} = {} below a code of size {known}", x.method, x.integer_bound);
                assert_eq!(x.integer_bound, x.raw_integer_bound, "({q},{n},{d}) {}", x.method);
            }
        }
    }
}

#[test]
fn bounds_exceed_a_known_ternary_code() {
    // a ternary code of length 6, distance 3 and size 38 is known
    for m in METHODS {
        assert!(bound(3, 6, 3, m).integer_bound >= 38);
    }
    assert!(lexicode(3, 6, 3) <= 38);
}

//! The reduced matrix-cut programmes against the same programmes written over
//! the full `q^n x q^n` matrices, with no block diagonalization and no
//! substitution of implied equalities. The dense programmes have no interior,
//! so they are only solved to about two digits.

use std::collections::HashMap;

use hamsdp::bounds_code::{build_matrix_cut_sdp, MatrixCut};
use hamsdp::sdp::{solve, Affine, ProblemBuilder, Sense, SolveOptions};
use hamsdp::terwilliger::{DenseOracle, TripleClass};

struct Dense {
    oracle: DenseOracle,
    total: usize,
}

impl Dense {
    fn new(q: i64, n: i64) -> Self {
        let oracle = DenseOracle::new(q, n).unwrap();
        let total = oracle.num_words();
        Dense { oracle, total }
    }

    fn class(&self, r: usize, c: usize) -> TripleClass {
        self.oracle.index.class(self.oracle.class_of[r * self.total + c] as usize)
    }

    /// `R(corner; sum_c coef(c) M_c)` as a dense affine matrix.
    fn bordered(&self, corner: Affine, coef: &dyn Fn(&TripleClass) -> Affine) -> Vec<Vec<Affine>> {
        let t = self.total;
        let mut m = vec![vec![Affine::zero(); t + 1]; t + 1];
        m[0][0] = corner;
        for r in 0..t {
            for c in r..t {
                let e = coef(&self.class(r, c));
                m[r + 1][c + 1] = e.clone();
                m[c + 1][r + 1] = e;
            }
            let dg = m[r + 1][r + 1].clone();
            m[0][r + 1] = dg.clone();
            m[r + 1][0] = dg;
        }
        m
    }
}

fn class_vars(pb: &mut ProblemBuilder, d: &Dense, dist_max: i64, prefix: &str) -> HashMap<TripleClass, Affine> {
    let mut map = HashMap::new();
    for c in d.oracle.index.classes() {
        let key = if c.i <= c.j { *c } else { TripleClass::new(c.j, c.i, c.t, c.p) };
        let e = if (1..dist_max).contains(&c.distance()) {
            Affine::zero()
        } else {
            map.get(&key).cloned().unwrap_or_else(|| Affine::var(pb.add_var(format!("{prefix}{key:?}"))))
        };
        map.insert(*c, e.clone());
        map.insert(key, e);
    }
    for e in map.values() {
        if !e.is_zero() {
            pb.add_nonneg(e.clone());
        }
    }
    map
}

fn dense_matrix_cut(q: i64, n: i64, dist: i64, which: MatrixCut) -> f64 {
    let d = Dense::new(q, n);
    let mut pb = ProblemBuilder::new();
    let y = class_vars(&mut pb, &d, dist, "y");
    let y00 = y[&TripleClass::new(0, 0, 0, 0)].clone();
    let one_minus = Affine::constant(1.0) - y00.clone();
    pb.add_psd(d.bordered(y00.clone(), &|c| y[c].clone()));
    match which {
        MatrixCut::Nplus => {
            let diag = |i: usize| y[&TripleClass::new(i as i64, i as i64, i as i64, i as i64)].clone();
            // R(sum_i y_ii A_i), with A_i the distance-i adjacency matrix
            let t = d.total;
            let mut bm = vec![vec![Affine::zero(); t + 1]; t + 1];
            bm[0][0] = Affine::constant(1.0);
            for r in 0..t {
                for c in r..t {
                    let e = diag(d.class(r, c).distance() as usize);
                    bm[r + 1][c + 1] = e.clone();
                    bm[c + 1][r + 1] = e;
                }
                bm[0][r + 1] = y00.clone();
                bm[r + 1][0] = y00.clone();
            }
            pb.add_psd(bm);
            let z = class_vars(&mut pb, &d, dist, "z");
            let coef = |c: &TripleClass| {
                if c.i == c.j && c.j == c.t && c.t == c.p {
                    y00.clone() - y[c].clone()
                } else {
                    z[c].clone()
                }
            };
            // the diagonal z variables are replaced by their defining equation
            for i in 0..=n {
                let c = TripleClass::new(i, i, i, i);
                pb.add_nonneg(coef(&c));
            }
            pb.add_psd(d.bordered(one_minus, &coef));
        }
        MatrixCut::Ntilde => {
            let x = |k: i64| y[&TripleClass::new(k, 0, 0, 0)].clone();
            let comp = |c: &TripleClass| x(c.distance()) - y[c].clone();
            for c in d.oracle.index.classes() {
                pb.add_nonneg(comp(c));
            }
            pb.add_psd(d.bordered(one_minus, &comp));
        }
    }
    let built = pb.build(y00 * (q as f64).powi(n as i32), Sense::Maximize).unwrap();
    let sol = solve(&built.problem, &SolveOptions::default()).unwrap();
    built.from_min(sol.primal_obj)
}

fn reduced(q: i64, n: i64, dist: i64, which: MatrixCut) -> f64 {
    let p = build_matrix_cut_sdp(q, n, dist, which).unwrap();
    let sol = solve(&p.built.problem, &SolveOptions::default()).unwrap();
    p.built.from_min(sol.primal_obj)
}

#[test]
fn reduced_nplus_matches_dense() {
    for (q, n, dist) in [(2, 4, 3), (2, 7, 5), (3, 3, 2)] {
        let a = reduced(q, n, dist, MatrixCut::Nplus);
        let b = dense_matrix_cut(q, n, dist, MatrixCut::Nplus);
        assert!((a - b).abs() < 1e-2 * a.max(1.0), "({q},{n},{dist}): reduced {a}, dense {b}");
    }
}

#[test]
fn reduced_ntilde_matches_dense() {
    for (q, n, dist) in [(2, 4, 3), (2, 7, 5), (3, 3, 2)] {
        let a = reduced(q, n, dist, MatrixCut::Ntilde);
        let b = dense_matrix_cut(q, n, dist, MatrixCut::Ntilde);
        assert!((a - b).abs() < 1e-2 * a.max(1.0), "({q},{n},{dist}): reduced {a}, dense {b}");
    }
}

#![allow(dead_code)]

use periodic_r0::expr::Expr;
use periodic_r0::model::{
    BoundarySpec, CoefficientField, DiffusionSpec, Domain, ModelSpec, Reaction, RobinCoefficients, TimeGrid,
};
use rand::Rng;

pub fn grid(n_x: usize, n_t: usize) -> (Domain, TimeGrid) {
    (Domain::new(0.0, 1.0, n_x).unwrap(), TimeGrid::new(1.0, n_t).unwrap())
}

pub fn field<S: AsRef<str>>(rows: &[Vec<S>], d: &Domain, tg: TimeGrid) -> CoefficientField {
    let exprs: Vec<Vec<Expr>> = rows
        .iter()
        .map(|r| r.iter().map(|s| Expr::parse(s.as_ref()).unwrap()).collect())
        .collect();
    CoefficientField::sample("test", &exprs, d, tg).unwrap()
}

pub fn rows(table: &[&[&str]]) -> Vec<Vec<String>> {
    table.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
}

pub fn split<S: AsRef<str>>(
    v: &[Vec<S>],
    f: &[Vec<S>],
    kappa: &[f64],
    n_x: usize,
    n_t: usize,
    bc: BoundarySpec,
) -> ModelSpec {
    let (d, tg) = grid(n_x, n_t);
    ModelSpec::new(
        d,
        tg,
        DiffusionSpec::uniform(kappa.to_vec(), d.n_nodes(), tg).unwrap(),
        bc,
        Reaction::Split {
            v: field(v, &d, tg),
            f: field(f, &d, tg),
        },
    )
    .unwrap()
}

pub fn combined<S: AsRef<str>>(m: &[Vec<S>], kappa: &[f64], n_x: usize, n_t: usize, bc: BoundarySpec) -> ModelSpec {
    let (d, tg) = grid(n_x, n_t);
    ModelSpec::new(
        d,
        tg,
        DiffusionSpec::uniform(kappa.to_vec(), d.n_nodes(), tg).unwrap(),
        bc,
        Reaction::Combined { m: field(m, &d, tg) },
    )
    .unwrap()
}

pub fn robin(n: usize, n_t: usize, b: f64) -> BoundarySpec {
    BoundarySpec::robin(RobinCoefficients::constant(n, n_t, b))
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Random cooperative split pair `(V, F)` as expression tables. `V` has a
/// nonpositive off-diagonal and a diagonal that dominates it, so the decay
/// system is stable; `F` is nonnegative with some zero entries but at least one
/// positive entry per row, so `R0 > 0`.
pub fn random_split_tables(rng: &mut impl Rng, n: usize) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut v = vec![vec![String::new(); n]; n];
    let mut f = vec![vec![String::new(); n]; n];
    for i in 0..n {
        let mut off = 0.0;
        let forced = rng.random_range(0..n);
        for j in 0..n {
            if i != j {
                let e: f64 = if rng.random_bool(0.5) { rng.random_range(0.0..0.5) } else { 0.0 };
                off += 1.5 * e;
                v[i][j] = format!("-{e:.6}*(1 + 0.5*cos(2*pi*t))");
            }
            let fij: f64 = if j == forced || rng.random_bool(0.75) { rng.random_range(0.2..2.0) } else { 0.0 };
            let phase: f64 = rng.random_range(0.0..1.0);
            let slope: f64 = rng.random_range(0.0..1.0);
            f[i][j] = format!("{fij:.6}*(1 + 0.5*sin(2*pi*(t + {phase:.6})))*(1 + {slope:.6}*x)");
        }
        let amp: f64 = rng.random_range(0.0..0.5);
        let slope: f64 = rng.random_range(-0.5..0.5);
        let base = off + amp + slope.abs() + rng.random_range(0.3..1.5);
        v[i][i] = format!("{base:.6} + {amp:.6}*sin(2*pi*t) + {slope:.6}*x");
    }
    (v, f)
}

/// Random nonnegative `M` table.
pub fn random_nonneg_tables(rng: &mut impl Rng, n: usize) -> Vec<Vec<String>> {
    (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let a: f64 = rng.random_range(0.0..1.5);
                    let b: f64 = rng.random_range(0.0..1.0) * a;
                    let c: f64 = rng.random_range(0.0..1.0);
                    format!("{a:.6} + {b:.6}*sin(2*pi*t)*cos(pi*x) + {c:.6}*x*x")
                })
                .collect()
        })
        .collect()
}

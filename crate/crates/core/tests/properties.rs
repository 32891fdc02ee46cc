//! Property tests for structural invariants of the discretization, the
//! period map, the spectral solvers and the threshold computations.

mod common;

use common::*;
use nalgebra::DMatrix;
use periodic_r0::config::Config;
use periodic_r0::discretize::assemble_diffusion;
use periodic_r0::evolve::{self, Setting};
use periodic_r0::expr::Expr;
use periodic_r0::model::{self, BoundarySpec, CoefficientField, Domain, ModelSpec, TimeGrid};
use periodic_r0::periodic::{self, NonlinearModel, ReactionSpec};
use periodic_r0::r0::{self, R0Options, R0Status};
use periodic_r0::spectral::{self, POWER_TOL};
use periodic_r0::zika::{self, ZikaParams};
use proptest::prelude::*;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn omega(m: &ModelSpec, mu: Option<f64>, setting: Setting) -> f64 {
    evolve::growth_bound(&evolve::monodromy(m, mu, setting).unwrap()).unwrap()
}

fn lambda(m: &ModelSpec, bc: BoundarySpec) -> f64 {
    spectral::principal_eigenvalue(m, &bc).unwrap().lambda_star
}

/// 2x2 cooperative `M` with coefficients `p` (all in [0, 1)).
fn m_table(p: &[f64]) -> Vec<Vec<String>> {
    vec![
        vec![
            format!("{:.6} + {:.6}*sin(2*pi*t) + {:.6}*x", p[0], 0.5 * p[1], p[2]),
            format!("{:.6}*(1 + 0.5*cos(2*pi*t))", p[3]),
        ],
        vec![
            format!("{:.6}*x", p[4]),
            format!("{:.6} + {:.6}*cos(pi*x) + {:.6}*cos(2*pi*t)", p[5], 0.5 * p[6], 0.3 * p[7]),
        ],
    ]
}

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, n)
}

fn bc_of(tag: u8, n: usize, n_t: usize) -> BoundarySpec {
    match tag % 3 {
        0 => BoundarySpec::neumann(),
        1 => BoundarySpec::dirichlet(),
        _ => robin(n, n_t, 0.7),
    }
}

fn field_from(d: &Domain, tg: TimeGrid, e: &str) -> CoefficientField {
    field(&[vec![e.to_string()]], d, tg)
}

proptest! {
    #![proptest_config(cfg(32))]

    #[test]
    fn spatial_average_is_linear_and_bounded(
        a in -2.0..2.0f64, b in -2.0..2.0f64, c in 0.0..3.0f64, n_x in 4usize..40
    ) {
        let (d, tg) = grid(n_x, 10);
        let f = field_from(&d, tg, &format!("{c} + sin(3*x + 2*pi*t) + x*x"));
        let g = field_from(&d, tg, "cos(pi*x)*(1 + 0.5*sin(2*pi*t))");
        let lhs = model::spatial_average(&f.combine(a, &g, b).unwrap(), &d).unwrap();
        let rf = model::spatial_average(&f, &d).unwrap();
        let rg = model::spatial_average(&g, &d).unwrap();
        for k in 0..tg.n_t {
            let want = a * rf.get(k, 0, 0, 0) + b * rg.get(k, 0, 0, 0);
            prop_assert!((lhs.get(k, 0, 0, 0) - want).abs() <= 1e-12 * (1.0 + want.abs()));
            let slice: Vec<f64> = (0..d.n_nodes()).map(|j| f.get(k, j, 0, 0)).collect();
            let lo = slice.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let avg = rf.get(k, 0, 0, 0);
            prop_assert!(avg >= lo - 1e-12 && avg <= hi + 1e-12);
        }
    }

    #[test]
    fn validate_detects_sign_structure(p in coeffs(8), neg in 0.01..1.0f64) {
        let mut t = m_table(&p);
        let m = combined(&t, &[0.1, 0.1], 8, 20, BoundarySpec::neumann());
        prop_assert!(model::validate_assumptions(&m).unwrap().cooperative_ok);
        t[0][1] = format!("-{neg:.6}");
        let m = combined(&t, &[0.1, 0.1], 8, 20, BoundarySpec::neumann());
        let rep = model::validate_assumptions(&m).unwrap();
        prop_assert!(!rep.cooperative_ok);
        prop_assert!(rep.violation_count > 0);
    }

    #[test]
    fn diffusion_operator_structure(
        amp in 0.0..0.9f64, kappa in 0.01..10.0f64, n_x in 4usize..48, tag in 0u8..3, k in 0usize..10
    ) {
        let (d, tg) = grid(n_x, 10);
        let a = field_from(&d, tg, &format!("1 + {amp:.6}*sin(3*x + 2*pi*t)"));
        let m = ModelSpec::new(
            d,
            tg,
            model::DiffusionSpec::new(vec![kappa], a).unwrap(),
            bc_of(tag, 1, 10),
            model::Reaction::Combined { m: CoefficientField::constant(1, 1, d.n_nodes(), tg, &[0.0]) },
        )
        .unwrap();
        let op = assemble_diffusion(&m, 0, k).unwrap();
        // discrete maximum principle: Z-matrix with nonpositive row sums
        prop_assert!(op.lower.iter().chain(&op.upper).all(|&v| v >= 0.0));
        prop_assert!(op.row_sums().iter().all(|&s| s <= 1e-9 * kappa));
        if tag % 3 == 0 {
            let lu = op.apply(&vec![1.0; op.size()]);
            prop_assert!(lu.iter().all(|v| v.abs() <= 1e-9 * kappa * (n_x * n_x) as f64));
        }
    }

    #[test]
    fn monodromy_is_nonnegative(p in coeffs(8), kappa in 0.001..5.0f64, tag in 0u8..3, setting in 0u8..3) {
        let n_t = 20;
        let m = combined(&m_table(&p), &[kappa, 2.0 * kappa], 10, n_t, bc_of(tag, 2, n_t));
        let setting = match setting {
            0 => Setting::Pde,
            1 => Setting::FrozenX(3),
            _ => Setting::Averaged,
        };
        let map = evolve::monodromy(&m, None, setting).unwrap();
        prop_assert_eq!(map.negative, 0);
        prop_assert!(map.matrix.iter().all(|&v| v >= 0.0));
        prop_assert!(map.log_scale.is_finite());
    }

    #[test]
    fn boundary_ordering_and_comparison(p in coeffs(8), kappa in 0.01..5.0f64, bump in 0.01..0.5f64) {
        let n_t = 20;
        let t = m_table(&p);
        let ks = [kappa, 0.5 * kappa];
        let wn = omega(&combined(&t, &ks, 12, n_t, BoundarySpec::neumann()), None, Setting::Pde);
        let wr = omega(&combined(&t, &ks, 12, n_t, robin(2, n_t, 0.7)), None, Setting::Pde);
        let wd = omega(&combined(&t, &ks, 12, n_t, BoundarySpec::dirichlet()), None, Setting::Pde);
        prop_assert!(wn >= wr - 1e-9 && wr >= wd - 1e-9, "N {wn} R {wr} D {wd}");

        let mut bigger = t.clone();
        bigger[1][0] = format!("{} + {bump:.6}", bigger[1][0]);
        bigger[0][0] = format!("{} + {bump:.6}*x", bigger[0][0]);
        let w1 = omega(&combined(&bigger, &ks, 12, n_t, BoundarySpec::neumann()), None, Setting::Pde);
        prop_assert!(w1 >= wn - 1e-9, "{w1} < {wn}");
    }

    #[test]
    fn spectral_radius_scales(seed in any::<u64>(), n in 1usize..12, alpha in 0.01..50.0f64) {
        let mut s = seed | 1;
        let a = DMatrix::from_fn(n, n, |_, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s % 1000) as f64 / 1000.0
        });
        let r = spectral::spectral_radius(&a, POWER_TOL).unwrap().radius;
        let ra = spectral::spectral_radius(&(&a * alpha), POWER_TOL).unwrap().radius;
        prop_assert!((ra - alpha * r).abs() <= 1e-8 * (1.0 + alpha * r), "{ra} vs {}", alpha * r);
    }

    #[test]
    fn omega_psi_nonincreasing_and_signs_agree(p in coeffs(6), kappa in 0.01..1.0f64, tag in 0u8..3) {
        let n_t = 20;
        let v = vec![
            vec![format!("{:.6} + 0.3*sin(2*pi*t)", 1.0 + p[0]), "-0.1".to_string()],
            vec!["0".to_string(), format!("{:.6} + 0.2*x", 0.6 + p[1])],
        ];
        let f = vec![
            vec![format!("{:.6}", p[2]), format!("{:.6}*(1 + 0.5*sin(2*pi*t))", 0.2 + p[3])],
            vec![format!("{:.6}*(1 + x)", 0.2 + p[4]), format!("{:.6}", p[5])],
        ];
        let m = split(&v, &f, &[kappa, kappa], 8, n_t, bc_of(tag, 2, n_t));
        let mus = [0.05, 0.2, 0.5, 1.0, 2.0, 5.0];
        let ws: Vec<f64> = mus.iter().map(|&mu| r0::omega_psi(&m, mu, Setting::Pde).unwrap()).collect();
        prop_assert!(ws.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{ws:?}");
        let r = r0::r0_bisect(&m, Setting::Pde, &R0Options::default()).unwrap();
        prop_assert_eq!(r.status, R0Status::Positive);
        for (&mu, &w) in mus.iter().zip(&ws) {
            if (mu / r.value - 1.0).abs() > 1e-3 && w.abs() > 1e-6 {
                prop_assert_eq!((r.value - mu).signum(), w.signum(), "mu {} R0 {} omega {}", mu, r.value, w);
            }
        }
    }
}

proptest! {
    #![proptest_config(cfg(12))]

    #[test]
    fn eigenvalue_shifts_with_constant(p in coeffs(8), c0 in -1.0..1.0f64, kappa in 0.01..2.0f64) {
        let n_t = 400;
        let t = m_table(&p);
        let shifted: Vec<Vec<String>> = t
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter()
                    .enumerate()
                    .map(|(j, e)| if i == j { format!("{e} + ({c0:.6})") } else { e.clone() })
                    .collect()
            })
            .collect();
        let bc = BoundarySpec::neumann();
        let l0 = lambda(&combined(&t, &[kappa, kappa], 12, n_t, bc.clone()), bc.clone());
        let l1 = lambda(&combined(&shifted, &[kappa, kappa], 12, n_t, bc.clone()), bc);
        let c0 = (c0 * 1e6).round() / 1e6;
        // backward Euler maps a rate s to ln(1 + dt s)/dt, so the shift is exact only to O(dt)
        let dt = 1.0 / n_t as f64;
        let tol = dt * c0.abs() * (1.0 + l0.abs() + c0.abs()) * 2.0 + 1e-9;
        prop_assert!((l1 - (l0 - c0)).abs() <= tol, "l0 {l0} l1 {l1} c0 {c0} tol {tol}");
    }

    #[test]
    fn r0_continuous_in_coefficients(p in coeffs(6), dir in coeffs(6), kappa in 0.01..1.0f64) {
        let delta = 1e-3;
        let table = |q: &[f64]| {
            let v = vec![vec![format!("{:.9} + 0.3*sin(2*pi*t)", 1.0 + q[0])]];
            let f = vec![vec![format!("{:.9}*(1 + 0.5*cos(2*pi*t))*(1 + {:.9}*x)", 0.5 + q[1], q[2])]];
            (v, f)
        };
        let q: Vec<f64> = p.iter().zip(&dir).map(|(a, b)| a + delta * (b - 0.5)).collect();
        let opts = R0Options { tol_mu: 1e-9, ..R0Options::default() };
        let r = |q: &[f64]| {
            let (v, f) = table(q);
            r0::r0_bisect(&split(&v, &f, &[kappa], 16, 40, BoundarySpec::neumann()), Setting::Pde, &opts)
                .unwrap()
                .value
        };
        let (r0a, r0b) = (r(&p), r(&q));
        // R0 is Lipschitz in the coefficients with a modest constant here
        prop_assert!(rel(r0b, r0a) <= 10.0 * delta, "{r0a} vs {r0b}");
    }

    #[test]
    fn periodic_fluctuation_has_zero_mean(c in 0.5..2.0f64, slope in 0.0..1.5f64, kappa in 0.01..1.0f64) {
        let nl = logistic(&format!("({c:.6} + {slope:.6}*x + 0.5*sin(2*pi*t))*q1 - q1*q1"), 64, 40, kappa);
        let s = periodic::solve_periodic(&nl, Setting::Pde).unwrap();
        let d = nl.shell.domain;
        let w = d.average_weights();
        for k in 0..s.n_t {
            let mean: f64 = (0..s.n_nodes).map(|j| w[j] * (s.at(k, j, 0) - s.tilde_at(k, 0))).sum();
            prop_assert!(mean.abs() <= 1e-12 * (1.0 + s.sup_norm()), "k {k}: {mean}");
        }
    }

    #[test]
    fn averaged_solution_ignores_mesh(c in 0.5..2.0f64, slope in 0.0..1.5f64, n_a in 4usize..16, n_b in 32usize..96) {
        let g = format!("({c:.6} + {slope:.6}*x + 0.5*sin(2*pi*t))*q1 - q1*q1");
        let sa = periodic::solve_periodic(&logistic(&g, n_a, 40, 1.0), Setting::Averaged).unwrap();
        let sb = periodic::solve_periodic(&logistic(&g, n_b, 40, 1.0), Setting::Averaged).unwrap();
        for k in 0..sa.n_t {
            prop_assert!((sa.at(k, 0, 0) - sb.at(k, 0, 0)).abs() <= 1e-7, "k {k}");
        }
    }
}

fn logistic(g: &str, n_x: usize, n_t: usize, kappa: f64) -> NonlinearModel {
    let shell = combined(&rows(&[&["0"]]), &[kappa], n_x, n_t, BoundarySpec::neumann());
    let reaction = ReactionSpec::new(
        vec![Expr::parse(g).unwrap()],
        vec![Expr::parse("0.05*exp(-0.5*cos(2*pi*t)/(2*pi))").unwrap()],
        vec![6.0],
    )
    .unwrap();
    NonlinearModel::new(shell, reaction).unwrap()
}

proptest! {
    #![proptest_config(cfg(4))]

    #[test]
    fn pointwise_max_limit_with_flat_boundary(amp in 0.2..1.0f64, base in 0.5..1.5f64, phase in 0.0..1.0f64) {
        // R0(x) peaks where cos(pi x) does, at x = 0 with zero slope
        let v = rows(&[&["1 + 0.3*sin(2*pi*t)"]]);
        let f = vec![vec![format!(
            "({base:.6} + {amp:.6}*cos(pi*x))*(1 + 0.5*sin(2*pi*(t + {phase:.6})))"
        )]];
        let m = split(&v, &f, &[1e-4], 128, 100, BoundarySpec::neumann());
        let opts = R0Options::default();
        let pde = r0::r0_bisect(&m, Setting::Pde, &opts).unwrap().value;
        let pw = r0::r0_pointwise_max(&m, &opts).unwrap();
        prop_assert!(rel(pde, pw.max) <= 0.02, "pde {pde} vs pointwise max {}", pw.max);
        prop_assert!(pw.x_argmax() < 1e-9);
    }

    #[test]
    fn zika_r0_monotone_in_transmission(s1 in 1.0..2.0f64, s2 in 1.0..2.0f64) {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/zika_baseline.toml");
        let overrides = |a: f64, b: f64| {
            vec![
                "domain.n_x=16".to_string(),
                "time.n_t=100".to_string(),
                format!("zika.sigma1=\"{a:.6}*2*(1 + 0.5*sin(2*pi*t))\""),
                format!("zika.sigma2=\"{b:.6}*(1 + 0.5*sin(2*pi*(t - 0.1)))\""),
            ]
        };
        let r = |a: f64, b: f64| {
            let c = Config::load(std::path::Path::new(path), &overrides(a, b)).unwrap();
            zika::zika_r0(&ZikaParams::from_config(&c).unwrap(), &R0Options::default()).unwrap().value
        };
        let base = r(1.0, 1.0);
        let up1 = r(s1, 1.0);
        let up2 = r(1.0, s2);
        let both = r(s1, s2);
        prop_assert!(up1 >= base * (1.0 - 1e-6) && up2 >= base * (1.0 - 1e-6));
        prop_assert!(both >= up1 * (1.0 - 1e-6) && both >= up2 * (1.0 - 1e-6));
    }
}

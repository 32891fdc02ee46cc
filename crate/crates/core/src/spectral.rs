//! Spectral radius of nonnegative matrices, principal eigenvalues of the
//! periodic parabolic problem, and reducible block structure.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::evolve::{self, MonodromyMap, Setting, Stepper, EPS_POS};
use crate::model::{BoundaryKind, BoundarySpec, CoefficientField, DiffusionSpec, ModelSpec, Reaction};

pub const POWER_TOL: f64 = 1e-10;
pub const MAX_ITERS: usize = 20_000;
const SQUARE_AFTER: usize = 200;
const SQUARE_MAX_DIM: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Power,
    Gelfand,
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub radius: f64,
    /// Nonnegative eigenvector estimate, max entry one.
    pub vector: DVector<f64>,
    pub iterations: usize,
    pub method: Method,
    /// `||A v - r v||_inf`.
    pub residual: f64,
}

fn check_nonnegative(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::Shape(format!("expected a nonempty square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            let v = a[(r, c)];
            if v.is_nan() {
                return Err(Error::NanInput);
            }
            if v < 0.0 {
                return Err(Error::NotNonnegative { row: r, col: c, value: v });
            }
        }
    }
    Ok(())
}

fn normalize_max(v: &mut DVector<f64>) -> f64 {
    let m = v.amax();
    if m > 0.0 {
        *v /= m;
    }
    m
}

fn rayleigh(a: &DMatrix<f64>, v: &DVector<f64>) -> (f64, f64) {
    let av = a * v;
    let r = v.dot(&av) / v.dot(v);
    let residual = (av - v * r).amax();
    (r.max(0.0), residual)
}

/// Perron root of a nonnegative matrix.
///
/// Power iteration runs on `B = A + I` from the all-ones vector, switching to
/// `B^16` (repeated squaring, same Perron vector) when convergence is slow.
/// The radius is read off as the Rayleigh quotient of `A` at the
/// converged vector. Falls back to the Gelfand estimate `||A^k||^{1/k}` when
/// the iteration stalls, as it does for defective Perron roots.
pub fn spectral_radius(a: &DMatrix<f64>, tol: f64) -> Result<SpectralResult> {
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    check_nonnegative(a)?;
    let n = a.nrows();
    let mut b = a + DMatrix::identity(n, n);
    let mut squared = false;
    let mut v = DVector::from_element(n, 1.0);
    let mut prev = f64::NAN;
    for it in 1..=MAX_ITERS {
        let mut w = &b * &v;
        let rho = v.dot(&w) / v.dot(&v);
        normalize_max(&mut w);
        v = w;
        if (rho - prev).abs() <= tol * rho.abs() {
            let (r, residual) = rayleigh(a, &v);
            if residual <= tol * r.max(1.0) {
                return Ok(SpectralResult {
                    radius: r,
                    vector: v,
                    iterations: it,
                    method: Method::Power,
                    residual,
                });
            }
        }
        prev = rho;
        if it == SQUARE_AFTER && !squared && n <= SQUARE_MAX_DIM {
            // slow convergence: iterate with B^16 instead (same Perron vector)
            for _ in 0..4 {
                b = &b * &b;
                let m = b.amax();
                b /= m;
            }
            squared = true;
            prev = f64::NAN;
        }
    }

    let radius = gelfand(a, tol);
    let (_, residual) = rayleigh(a, &v);
    Ok(SpectralResult {
        radius,
        vector: v,
        iterations: MAX_ITERS,
        method: Method::Gelfand,
        residual,
    })
}

/// `||A^k||_inf^{1/k}` with `k` doubling, computed in log scale.
fn gelfand(a: &DMatrix<f64>, tol: f64) -> f64 {
    let norm_inf = |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
    let mut x = a.clone();
    let mut log_scale = 0.0;
    let mut k = 1.0f64;
    let mut prev = f64::NAN;
    for _ in 0..60 {
        let nrm = norm_inf(&x);
        if nrm == 0.0 {
            return 0.0;
        }
        let est = ((nrm.ln() + log_scale) / k).exp();
        if (est - prev).abs() <= tol * est {
            return est;
        }
        prev = est;
        x /= nrm;
        log_scale = 2.0 * (log_scale + nrm.ln());
        x = &x * &x;
        k *= 2.0;
    }
    prev
}

#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    /// `permutation[p]` is the original index at permuted position `p`.
    pub permutation: Vec<usize>,
    /// Original indices of each diagonal block, in block order.
    pub blocks: Vec<Vec<usize>>,
    pub block_radii: Vec<f64>,
}

impl BlockDecomposition {
    pub fn max_radius(&self) -> f64 {
        self.block_radii.iter().copied().fold(0.0, f64::max)
    }

    pub fn permuted(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let p = &self.permutation;
        DMatrix::from_fn(p.len(), p.len(), |r, c| a[(p[r], p[c])])
    }

    /// Largest entry above the diagonal blocks of the permuted matrix.
    pub fn upper_leak(&self, a: &DMatrix<f64>) -> f64 {
        let mut block_of = vec![0; a.nrows()];
        for (k, b) in self.blocks.iter().enumerate() {
            for &i in b {
                block_of[i] = k;
            }
        }
        let mut leak = 0.0f64;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if block_of[i] < block_of[j] {
                    leak = leak.max(a[(i, j)].abs());
                }
            }
        }
        leak
    }
}

/// Strongly connected components of the pattern `a_ij > EPS_POS`, ordered
/// so the permuted matrix is block lower triangular.
pub fn block_structure(a: &DMatrix<f64>) -> Result<BlockDecomposition> {
    check_nonnegative(a)?;
    let n = a.nrows();
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)] > EPS_POS {
                // row i depends on column j, so j's block must come first
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    // tarjan emits sinks first
    let blocks: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut idx: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            idx.sort_unstable();
            idx
        })
        .collect();
    let block_radii = blocks
        .iter()
        .map(|b| {
            let sub = DMatrix::from_fn(b.len(), b.len(), |r, c| a[(b[r], b[c])]);
            spectral_radius(&sub, POWER_TOL).map(|s| s.radius)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockDecomposition {
        permutation: blocks.iter().flatten().copied().collect(),
        blocks,
        block_radii,
    })
}

#[derive(Debug, Clone)]
pub struct PrincipalEigenvalue {
    pub lambda_star: f64,
    pub bc: BoundaryKind,
    pub kappa: Vec<f64>,
    /// `[k][node][i]` samples over one period including both endpoints
    /// (zero there for Dirichlet), max entry one.
    pub eigenfunction: Vec<f64>,
    pub n: usize,
    pub n_nodes: usize,
    pub n_t: usize,
    pub diagnostics: SpectralResult,
}

impl PrincipalEigenvalue {
    pub fn eigenfunction_at(&self, k: usize, node: usize, i: usize) -> f64 {
        self.eigenfunction[(k * self.n_nodes + node) * self.n + i]
    }
}

/// `lambda* = -omega(U)` for the full problem with boundary condition `bc`,
/// plus the time-periodic eigenfunction `e^{lambda* t} U(t,0) phi`.
pub fn principal_eigenvalue(model: &ModelSpec, bc: &BoundarySpec) -> Result<PrincipalEigenvalue> {
    let model = model.with_boundary(bc.clone())?;
    let stepper = Stepper::new(&model, None, Setting::Pde)?;
    let map = evolve::monodromy_from(&stepper);
    let diagnostics = spectral_radius(&map.matrix, POWER_TOL)?;
    let omega = if diagnostics.radius > 0.0 {
        (diagnostics.radius.ln() + map.log_scale) / map.period
    } else {
        f64::NEG_INFINITY
    };
    let lambda_star = -omega;

    let n = model.n();
    let n_nodes = model.domain.n_nodes();
    let n_t = model.tgrid.n_t;
    let first = match bc.kind {
        BoundaryKind::Dirichlet => 1,
        _ => 0,
    };
    let dim = stepper.dim();
    let mut state: Vec<f64> = diagnostics.vector.iter().copied().collect();
    let mut eigenfunction = vec![0.0; n * n_nodes * n_t];
    let dt = model.tgrid.dt();
    // running log of the e^{lambda t} U(t,0) weight, relative to the stored state
    let mut log_w = 0.0;
    let mut logs = vec![0.0; n_t];
    let mut frames = Vec::with_capacity(n_t);
    for k in 0..n_t {
        logs[k] = log_w;
        frames.push(state.clone());
        stepper.step_block(k, &mut state, 1);
        let m = state.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if m > 0.0 {
            state.iter_mut().for_each(|v| *v /= m);
            log_w += m.ln();
        }
        if lambda_star.is_finite() {
            log_w += lambda_star * dt + stepper.shift_between(k, 1);
        }
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for k in 0..n_t {
        let scale = if lambda_star.is_finite() { (logs[k] - top).exp() } else { 1.0 };
        for u in 0..dim {
            let (node, i) = (first + u / n, u % n);
            eigenfunction[(k * n_nodes + node) * n + i] = (frames[k][u] * scale).max(0.0);
        }
    }
    let m = eigenfunction.iter().copied().fold(0.0, f64::max);
    if m > 0.0 {
        eigenfunction.iter_mut().for_each(|v| *v /= m);
    }

    Ok(PrincipalEigenvalue {
        lambda_star,
        bc: bc.kind,
        kappa: model.diffusion.kappa.clone(),
        eigenfunction,
        n,
        n_nodes,
        n_t,
        diagnostics,
    })
}

/// `omega(O_x)` at every grid node (diffusion removed).
pub fn frozen_growth_bounds(model: &ModelSpec) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    (0..model.domain.n_nodes())
        .into_par_iter()
        .map(|j| evolve::growth_bound(&evolve::monodromy(model, None, Setting::FrozenX(j))?))
        .collect()
}

/// `eta = max_x omega(O_x)`; `-eta` is the small-diffusion limit of `lambda*`.
pub fn eta(model: &ModelSpec) -> Result<f64> {
    Ok(frozen_growth_bounds(model)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `eta~ = omega(O~)` of the spatially averaged system; `-eta~` is the
/// large-diffusion Neumann limit of `lambda*`.
pub fn eta_tilde(model: &ModelSpec) -> Result<f64> {
    evolve::growth_bound(&evolve::monodromy(model, None, Setting::Averaged)?)
}

/// Restrict a model to a subset of components (reaction and diffusion).
pub fn restrict_components(model: &ModelSpec, idx: &[usize]) -> Result<ModelSpec> {
    let sub = |f: &CoefficientField| {
        CoefficientField::from_fn(idx.len(), idx.len(), f.n_nodes(), f.time_grid(), |k, node, r, c| {
            f.get(k, node, idx[r], idx[c])
        })
    };
    let a = &model.diffusion.a;
    let a_sub = CoefficientField::from_fn(idx.len(), 1, a.n_nodes(), a.time_grid(), |k, node, r, _| {
        a.get(k, node, idx[r], 0)
    });
    let kappa = idx.iter().map(|&i| model.diffusion.kappa[i]).collect();
    let boundary = match &model.boundary.robin_b {
        Some(rb) => BoundarySpec::robin(crate::model::RobinCoefficients {
            left: idx.iter().map(|&i| rb.left[i].clone()).collect(),
            right: idx.iter().map(|&i| rb.right[i].clone()).collect(),
        }),
        None => model.boundary.clone(),
    };
    ModelSpec::new(
        model.domain,
        model.tgrid,
        DiffusionSpec::new(kappa, a_sub)?,
        boundary,
        model.reaction.map_fields(sub),
    )
}

#[derive(Debug, Clone)]
pub struct BlockConsistencyReport {
    pub decomposition: BlockDecomposition,
    /// `omega(O~_k)` from the block subsystem.
    pub block_omegas: Vec<f64>,
    /// `ln r(A_kk) / T` from the diagonal blocks of `O~(T,0)`.
    pub block_log_radii: Vec<f64>,
    /// Human-readable descriptions of failed checks.
    pub violations: Vec<String>,
}

impl BlockConsistencyReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check that zero couplings of the averaged monodromy come from zero
/// couplings of `M`, and that each diagonal block of `O~(T,0)` is the
/// monodromy of the corresponding subsystem.
pub fn verify_block_consistency(model: &ModelSpec) -> Result<BlockConsistencyReport> {
    let m = match &model.reaction {
        Reaction::Combined { m } => m,
        Reaction::Split { .. } => return Err(Error::Invalid("block consistency needs a combined M".into())),
    };
    let n = model.n();
    let full = evolve::monodromy(model, None, Setting::Averaged)?;
    let dense = full.dense();
    let decomposition = block_structure(&full.matrix)?;
    let averaged = crate::model::spatial_average(m, &model.domain)?;
    let mut violations = Vec::new();
    let scale = m.values().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let zero_tol = EPS_POS * scale * 1e3;

    for i in 0..n {
        for j in 0..n {
            if i == j || full.matrix[(i, j)] > EPS_POS {
                continue;
            }
            let avg_max = (0..averaged.n_t()).map(|k| averaged.get(k, 0, i, j).abs()).fold(0.0, f64::max);
            if avg_max > zero_tol {
                violations.push(format!("O~({i},{j}) = 0 but averaged m[{i}][{j}] reaches {avg_max:e}"));
            }
            let pt_max = (0..m.n_t())
                .flat_map(|k| (0..m.n_nodes()).map(move |x| (k, x)))
                .map(|(k, x)| m.get(k, x, i, j).abs())
                .fold(0.0, f64::max);
            if pt_max > zero_tol {
                violations.push(format!("O~({i},{j}) = 0 but m[{i}][{j}](x,t) reaches {pt_max:e}"));
            }
        }
    }

    let mut block_omegas = Vec::new();
    let mut block_log_radii = Vec::new();
    for (b, r) in decomposition.blocks.iter().zip(&decomposition.block_radii) {
        let sub = restrict_components(model, b)?;
        let sub_map: MonodromyMap = evolve::monodromy(&sub, None, Setting::Averaged)?;
        let sub_dense = sub_map.dense();
        let diag_block = DMatrix::from_fn(b.len(), b.len(), |p, q| dense[(b[p], b[q])]);
        let diff = (&sub_dense - &diag_block).amax();
        let size = diag_block.amax().max(f64::MIN_POSITIVE);
        if diff > 1e-9 * size {
            violations.push(format!("block {b:?}: subsystem monodromy differs by {diff:e}"));
        }
        let w = evolve::growth_bound(&sub_map)?;
        let lr = if *r > 0.0 {
            (r.ln() + full.log_scale) / full.period
        } else {
            f64::NEG_INFINITY
        };
        if (w - lr).abs() > 1e-8 * w.abs().max(1.0) {
            violations.push(format!("block {b:?}: omega {w} but ln r(A_kk)/T = {lr}"));
        }
        block_omegas.push(w);
        block_log_radii.push(lr);
    }

    Ok(BlockConsistencyReport {
        decomposition,
        block_omegas,
        block_log_radii,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::model::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_radius(a: &DMatrix<f64>) -> f64 {
        a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_and_triangular() {
        let r = spectral_radius(&DMatrix::identity(4, 4), POWER_TOL).unwrap();
        assert!((r.radius - 1.0).abs() < 1e-12);
        assert!(r.vector.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 3.0]);
        assert!((spectral_radius(&a, POWER_TOL).unwrap().radius - 3.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_negative_and_nan() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 0.0, 1.0]);
        assert!(matches!(spectral_radius(&a, 1e-10), Err(Error::NotNonnegative { row: 0, col: 1, .. })));
        let a = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(spectral_radius(&a, 1e-10), Err(Error::NanInput)));
    }

    #[test]
    fn random_matrices_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2, 5, 8, 13, 32, 64] {
            let a = DMatrix::from_fn(n, n, |_, _| if rng.random::<f64>() < 0.6 { rng.random::<f64>() } else { 0.0 });
            let r = spectral_radius(&a, POWER_TOL).unwrap();
            let oracle = dense_radius(&a);
            assert!((r.radius - oracle).abs() <= 1e-8 * oracle.max(1.0), "n={n}: {} vs {oracle}", r.radius);
        }
    }

    #[test]
    fn defective_root_falls_back_to_gelfand() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let r = spectral_radius(&a, POWER_TOL).unwrap();
        assert_eq!(r.method, Method::Gelfand);
        assert!((r.radius - 1.0).abs() < 1e-8, "{}", r.radius);
        let nil = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(spectral_radius(&nil, POWER_TOL).unwrap().radius < 1e-8);
    }

    #[test]
    fn block_structure_examples() {
        let cyc = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let d = block_structure(&cyc).unwrap();
        assert_eq!(d.blocks, vec![vec![0, 1]]);

        let tri = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 3.0]);
        let d = block_structure(&tri).unwrap();
        assert_eq!(d.blocks, vec![vec![0], vec![1]]);
        assert!((d.block_radii[0] - 2.0).abs() < 1e-9 && (d.block_radii[1] - 3.0).abs() < 1e-9);
        assert!((d.max_radius() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn random_sparse_pattern_is_block_lower_triangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            // positive diagonal keeps the dense oracle away from defective zero eigenvalues
            let a = DMatrix::from_fn(6, 6, |r, c| {
                if r == c || rng.random::<f64>() < 0.2 {
                    rng.random::<f64>() + 0.1
                } else {
                    0.0
                }
            });
            let d = block_structure(&a).unwrap();
            let p = d.permuted(&a);
            let mut start = 0;
            for b in &d.blocks {
                for r in start..start + b.len() {
                    for c in start + b.len()..6 {
                        assert!(p[(r, c)] <= EPS_POS);
                    }
                }
                start += b.len();
            }
            assert_eq!(d.upper_leak(&a), 0.0);
            assert!((d.max_radius() - dense_radius(&a)).abs() < 1e-8, "{} {} {a}", d.max_radius(), dense_radius(&a));
        }
    }

    fn model(exprs: &[&[&str]], kappa: f64, n_x: usize, n_t: usize) -> ModelSpec {
        let d = Domain::new(0.0, 1.0, n_x).unwrap();
        let tg = TimeGrid::new(1.0, n_t).unwrap();
        let m: Vec<Vec<Expr>> = exprs.iter().map(|r| r.iter().map(|s| Expr::parse(s).unwrap()).collect()).collect();
        let n = m.len();
        ModelSpec::new(
            d,
            tg,
            DiffusionSpec::uniform(vec![kappa; n], d.n_nodes(), tg).unwrap(),
            BoundarySpec::neumann(),
            Reaction::Combined {
                m: CoefficientField::sample("m", &m, &d, tg).unwrap(),
            },
        )
        .unwrap()
    }

    #[test]
    fn constant_scalar_neumann() {
        let m = model(&[&["0.7"]], 1.0, 15, 200);
        let p = principal_eigenvalue(&m, &BoundarySpec::neumann()).unwrap();
        // backward Euler: lambda = ln(1 - 0.7 dt) / dt
        let dt: f64 = 1.0 / 200.0;
        assert!((p.lambda_star - (1.0 - 0.7 * dt).ln() / dt).abs() < 1e-9);
        assert!((p.lambda_star + 0.7).abs() < 0.01);
        assert!(p.eigenfunction.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn dirichlet_zero_reaction_gives_pi_squared() {
        let kappa = 0.1;
        let m = model(&[&["0"]], kappa, 63, 400);
        let p = principal_eigenvalue(&m, &BoundarySpec::dirichlet()).unwrap();
        let dom = m.domain;
        let op = crate::discretize::assemble_diffusion(&m.with_boundary(BoundarySpec::dirichlet()).unwrap(), 0, 0).unwrap();
        let stencil_min = (-op.to_dense()).symmetric_eigenvalues().min();
        let dt: f64 = 1.0 / 400.0;
        // backward Euler multiplier of the stencil eigenvalue
        assert!((p.lambda_star - (1.0 + stencil_min * dt).ln() / dt).abs() < 1e-8);
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((p.lambda_star - kappa * pi2).abs() < 0.01, "{}", p.lambda_star);
        assert_eq!(p.eigenfunction_at(5, 0, 0), 0.0);
        assert_eq!(p.eigenfunction_at(5, dom.n_x + 1, 0), 0.0);
    }

    #[test]
    fn nonnegative_m_respects_bounds() {
        let m = model(&[&["1 + sin(2*pi*t)", "0.5*x"], &["0.3", "2*x*x"]], 0.05, 15, 200);
        let mbar = m.reaction.combined_field(None).max_entry();
        let p = principal_eigenvalue(&m, &BoundarySpec::neumann()).unwrap();
        assert!(p.lambda_star <= 1e-6 && p.lambda_star >= -2.0 * mbar - 1e-6, "{}", p.lambda_star);
    }

    #[test]
    fn shift_by_constant() {
        let base = model(&[&["-1 + x", "0.2"], &["0.4", "-cos(2*pi*t)"]], 0.1, 11, 200);
        let shifted = model(&[&["-1 + x + 0.3", "0.2"], &["0.4", "-cos(2*pi*t) + 0.3"]], 0.1, 11, 200);
        let a = principal_eigenvalue(&base, &BoundarySpec::neumann()).unwrap().lambda_star;
        let b = principal_eigenvalue(&shifted, &BoundarySpec::neumann()).unwrap().lambda_star;
        // backward Euler shifts multipliers, not exponents: compare to O(dt)
        assert!((b - (a - 0.3)).abs() < 2e-3, "{a} {b}");
    }

    #[test]
    fn lower_triangular_block_consistency() {
        let m = model(&[&["-1", "0"], &["1 + sin(2*pi*t)", "-2 + x"]], 1.0, 7, 100);
        let rep = verify_block_consistency(&m).unwrap();
        assert!(rep.ok(), "{:?}", rep.violations);
        assert_eq!(rep.decomposition.blocks.len(), 2);
        for (w, lr) in rep.block_omegas.iter().zip(&rep.block_log_radii) {
            assert!((w - lr).abs() < 1e-8);
        }
        let irr = model(&[&["-1", "1"], &["1", "-1"]], 1.0, 7, 100);
        let rep = verify_block_consistency(&irr).unwrap();
        assert!(rep.ok());
        assert_eq!(rep.decomposition.blocks.len(), 1);
    }
}

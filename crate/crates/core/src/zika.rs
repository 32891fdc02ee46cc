//! Vector-host Zika model: the logistic vector equation, its disease-free
//! periodic state `V*`, the linearized infected subsystem in
//! `(H_i, V_i)` and its reproduction ratio under diffusion.

use std::time::Instant;

use rayon::prelude::*;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::evolve::Setting;
use crate::expr::{BinOp, Expr};
use crate::model::{
    BoundaryKind, BoundarySpec, CoefficientField, DiffusionSpec, Domain, ModelSpec, Reaction, TimeGrid,
};
use crate::periodic::{self, NonlinearModel, PeriodicSolution, ReactionSpec};
use crate::r0::{self, R0Options, R0Result, SweepKind, SweepReport, SweepRow};

#[derive(Debug, Clone)]
pub struct ZikaParams {
    pub domain: Domain,
    pub tgrid: TimeGrid,
    /// Uninfected host density, `x` only (evaluated at `t = 0`).
    pub h_u: Expr,
    /// Vector birth rate.
    pub beta: Expr,
    /// Host recovery rate.
    pub gamma: Expr,
    /// Linear and density-dependent vector death rates.
    pub mu1: Expr,
    pub mu2: Expr,
    /// Vector-to-host and host-to-vector transmission rates.
    pub sigma1: Expr,
    pub sigma2: Expr,
    pub delta1: Expr,
    pub delta2: Expr,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl ZikaParams {
    pub fn from_config(config: &Config) -> Result<Self> {
        let z = config.zika.as_ref().ok_or_else(|| Error::config("zika", "missing section"))?;
        let d = config.domain.as_ref().ok_or_else(|| Error::config("domain", "missing section"))?;
        let t = config.time.as_ref().ok_or_else(|| Error::config("time", "missing section"))?;
        let field = |key: &str, s: &crate::config::Scalar| {
            s.to_expr().map_err(|e| Error::config(format!("zika.{key}"), e.to_string()))
        };
        let p = ZikaParams {
            domain: Domain::new(d.x_lo, d.x_hi, d.n_x)?,
            tgrid: TimeGrid::new(t.period, t.n_t)?,
            h_u: field("h_u", &z.h_u)?,
            beta: field("beta", &z.beta)?,
            gamma: field("gamma", &z.gamma)?,
            mu1: field("mu1", &z.mu1)?,
            mu2: field("mu2", &z.mu2)?,
            sigma1: field("sigma1", &z.sigma1)?,
            sigma2: field("sigma2", &z.sigma2)?,
            delta1: field("delta1", &z.delta1)?,
            delta2: field("delta2", &z.delta2)?,
            kappa1: z.kappa1,
            kappa2: z.kappa2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_kappa(&self, kappa1: f64, kappa2: f64) -> Self {
        ZikaParams {
            kappa1,
            kappa2,
            ..self.clone()
        }
    }

    /// Positivity of every field and `beta - mu1 > 0` on the grid.
    pub fn validate(&self) -> Result<()> {
        for (key, k) in [("kappa1", self.kappa1), ("kappa2", self.kappa2)] {
            if !(k > 0.0) {
                return Err(Error::config(format!("zika.{key}"), format!("must be positive, got {k}")));
            }
        }
        let named = [
            ("h_u", &self.h_u),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("mu1", &self.mu1),
            ("mu2", &self.mu2),
            ("sigma1", &self.sigma1),
            ("sigma2", &self.sigma2),
            ("delta1", &self.delta1),
            ("delta2", &self.delta2),
        ];
        for (key, e) in named {
            if e.state_arity() > 0 {
                return Err(Error::config(format!("zika.{key}"), "must not reference q"));
            }
        }
        for k in 0..self.tgrid.n_t {
            let t = self.tgrid.time(k);
            for j in 0..self.domain.n_nodes() {
                let x = self.domain.node_x(j);
                for (key, e) in named {
                    let v = e.eval(x, t, &[]);
                    // sigma1 = 0 is allowed: it only removes the host infection route
                    let ok = if key == "sigma1" || key == "sigma2" { v >= 0.0 } else { v > 0.0 };
                    if !ok || !v.is_finite() {
                        return Err(Error::config(
                            format!("zika.{key}"),
                            format!("value {v} at x={x}, t={t} is not positive"),
                        ));
                    }
                }
                let r = self.beta.eval(x, t, &[]) - self.mu1.eval(x, t, &[]);
                if !(r > 0.0) {
                    return Err(Error::config(
                        "zika.beta",
                        format!("beta - mu1 = {r} at x={x}, t={t} is not positive"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, e: &Expr, k: usize, j: usize) -> f64 {
        e.eval(self.domain.node_x(j), self.tgrid.time(k), &[])
    }

    /// Logistic vector model `V_t = kappa2 (delta2 V_x)_x + (beta - mu1) V - mu2 V^2`.
    pub fn vector_model(&self) -> Result<NonlinearModel> {
        let bin = |op, a: Expr, b: Expr| Expr::Bin(op, Box::new(a), Box::new(b));
        let q = Expr::Q(0);
        let growth = bin(BinOp::Sub, self.beta.clone(), self.mu1.clone());
        let g = bin(
            BinOp::Sub,
            bin(BinOp::Mul, growth, q.clone()),
            bin(BinOp::Mul, self.mu2.clone(), bin(BinOp::Mul, q.clone(), q)),
        );
        // constant certificates from the range of the carrying capacity
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for k in 0..self.tgrid.n_t {
            for j in 0..self.domain.n_nodes() {
                let cap = (self.sample(&self.beta, k, j) - self.sample(&self.mu1, k, j)) / self.sample(&self.mu2, k, j);
                lo = lo.min(cap);
                hi = hi.max(cap);
            }
        }
        let reaction = ReactionSpec::new(vec![g], vec![Expr::constant(0.5 * lo)], vec![1.5 * hi])?;
        let a = CoefficientField::sample("zika.delta2", &[vec![self.delta2.clone()]], &self.domain, self.tgrid)?;
        let shell = ModelSpec::new(
            self.domain,
            self.tgrid,
            DiffusionSpec::new(vec![self.kappa2], a)?,
            BoundarySpec::neumann(),
            Reaction::Combined {
                m: CoefficientField::constant(1, 1, self.domain.n_nodes(), self.tgrid, &[0.0]),
            },
        )?;
        NonlinearModel::new(shell, reaction)
    }

    /// Linearized infected subsystem around `(0, 0, V*)`, components `(H_i, V_i)`.
    /// `vstar` is a `1 x 1` field over the full grid.
    pub fn linearized_model(&self, vstar: &CoefficientField) -> Result<ModelSpec> {
        let (nn, tg) = (self.domain.n_nodes(), self.tgrid);
        let v = CoefficientField::from_fn(2, 2, nn, tg, |k, j, r, c| match (r, c) {
            (0, 0) => self.sample(&self.gamma, k, j),
            (1, 1) => self.sample(&self.mu1, k, j) + self.sample(&self.mu2, k, j) * vstar.get(k, j, 0, 0),
            _ => 0.0,
        });
        let f = CoefficientField::from_fn(2, 2, nn, tg, |k, j, r, c| match (r, c) {
            (0, 1) => self.sample(&self.sigma1, k, j) * self.h_u.eval(self.domain.node_x(j), 0.0, &[]),
            (1, 0) => self.sample(&self.sigma2, k, j) * vstar.get(k, j, 0, 0),
            _ => 0.0,
        });
        let a = CoefficientField::sample(
            "zika.delta",
            &[vec![self.delta1.clone()], vec![self.delta2.clone()]],
            &self.domain,
            tg,
        )?;
        ModelSpec::new(
            self.domain,
            tg,
            DiffusionSpec::new(vec![self.kappa1, self.kappa2], a)?,
            BoundarySpec::neumann(),
            Reaction::Split { v, f },
        )
    }
}

/// `V*_{kappa2}` on the PDE grid.
pub fn solve_vector_equilibrium(params: &ZikaParams) -> Result<PeriodicSolution> {
    periodic::solve_periodic(&params.vector_model()?, Setting::Pde)
}

/// Linearized model at the disease-free state together with that state.
pub fn linearize(params: &ZikaParams) -> Result<(ModelSpec, PeriodicSolution)> {
    let vstar = solve_vector_equilibrium(params)?;
    let field = vstar.component_field(0, params.domain.n_nodes(), params.tgrid);
    Ok((params.linearized_model(&field)?, vstar))
}

/// `R0(kappa1, kappa2)` by bisection on the linearized system.
pub fn zika_r0(params: &ZikaParams, opts: &R0Options) -> Result<R0Result> {
    let (model, _) = linearize(params)?;
    r0::r0_bisect(&model, Setting::Pde, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZikaLimits {
    /// `max_x R0(x)` with the frozen vector state `V_0(x, .)`.
    pub small: f64,
    pub small_argmax_x: f64,
    /// `R0~` of the averaged system with the averaged vector state `V~_inf`.
    pub large: f64,
}

/// Small- and large-diffusion endpoints of `R0(kappa, kappa)`.
pub fn zika_limits(params: &ZikaParams, opts: &R0Options) -> Result<ZikaLimits> {
    let vm = params.vector_model()?;
    let (nn, tg) = (params.domain.n_nodes(), params.tgrid);

    let frozen = periodic::frozen_solutions(&vm)?;
    let v0 = CoefficientField::from_fn(1, 1, nn, tg, |k, j, _, _| frozen[j].at(k, 0, 0));
    let pointwise = r0::r0_pointwise_max(&params.linearized_model(&v0)?, opts)?;

    let avg = periodic::solve_periodic(&vm, Setting::Averaged)?;
    let v_inf = CoefficientField::from_fn(1, 1, nn, tg, |k, _, _, _| avg.at(k, 0, 0));
    let large = r0::r0_averaged(&params.linearized_model(&v_inf)?, opts)?;

    Ok(ZikaLimits {
        small: pointwise.max,
        small_argmax_x: pointwise.x_argmax(),
        large: large.value,
    })
}

/// `R0(kappa, kappa)` along an ascending grid with the two endpoints.
pub fn zika_sweep(params: &ZikaParams, kappas: &[f64], opts: &R0Options) -> Result<SweepReport> {
    if kappas.is_empty() || kappas.iter().any(|k| !(*k > 0.0)) || kappas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Invalid(format!("bad diffusion grid {kappas:?}")));
    }
    let outcomes: Vec<std::result::Result<SweepRow, String>> = kappas
        .par_iter()
        .map(|&k| {
            let start = Instant::now();
            zika_r0(&params.with_kappa(k, k), opts)
                .map(|r| SweepRow {
                    kappa: vec![k, k],
                    value: r.value,
                    status: r.status.to_string(),
                    omega_at_value: r.omega_at_value,
                    wall_ms: start.elapsed().as_millis() as u64,
                })
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (&k, o) in kappas.iter().zip(outcomes) {
        match o {
            Ok(r) => rows.push(r),
            Err(e) => failures.push((vec![k, k], e)),
        }
    }
    let limits = zika_limits(params, opts)?;
    let monotonicity_notes = r0::sweep_notes(&rows, failures.len());
    Ok(SweepReport {
        what: SweepKind::R0,
        bc: BoundaryKind::Neumann,
        rows,
        failures,
        limit_small: limits.small,
        limit_large: limits.large,
        eta_values: None,
        monotonicity_notes,
    })
}

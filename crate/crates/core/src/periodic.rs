//! Positive periodic solutions of nonlinear cooperative reaction-diffusion
//! systems `w_t = kappa L w + G(x, t, w)` with Neumann boundary conditions,
//! and their small- and large-diffusion limits.

use std::io::Write;

use rayon::prelude::*;

use crate::config::Config;
use crate::discretize::{assemble_diffusion, BandedOperator};
use crate::error::{Error, Result};
use crate::evolve::Setting;
use crate::expr::Expr;
use crate::model::{self, BoundaryKind, CoefficientField, ModelSpec};
use crate::r0::fmt_num;

pub const TOL_FP: f64 = 1e-9;
pub const MAX_PERIODS: usize = 5000;
/// Lower bracket factor applied to the subsolution certificate.
pub const TAU_LOWER: f64 = 0.5;
const H3_TAUS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
const H4_TAUS: [f64; 11] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0];
const PROBE_STATES: [f64; 5] = [0.0, 0.25, 0.5, 1.0, 2.0];

/// Nonlinear reaction with its sub/supersolution certificates.
#[derive(Debug, Clone)]
pub struct ReactionSpec {
    pub g: Vec<Expr>,
    /// `dG_i/dq_j` for all `i, j`, row-major.
    jacobian: Vec<Expr>,
    /// Positive periodic subsolution profile, expressions in `t`.
    pub v_lower: Vec<Expr>,
    /// Positive constant supersolution direction.
    pub v_upper: Vec<f64>,
}

impl ReactionSpec {
    pub fn new(g: Vec<Expr>, v_lower: Vec<Expr>, v_upper: Vec<f64>) -> Result<Self> {
        let n = g.len();
        if n == 0 || v_lower.len() != n || v_upper.len() != n {
            return Err(Error::Shape(format!(
                "G has {n} components, v_lower {}, v_upper {}",
                v_lower.len(),
                v_upper.len()
            )));
        }
        if let Some(e) = g.iter().find(|e| e.state_arity() > n) {
            return Err(Error::config("nonlinear.g", format!("'{e}' references q beyond q{n}")));
        }
        if let Some(v) = v_upper.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::config("nonlinear.v_upper", format!("entries must be positive, got {v}")));
        }
        let jacobian = g.iter().flat_map(|gi| (0..n).map(move |j| gi.diff_q(j))).collect();
        Ok(ReactionSpec {
            g,
            jacobian,
            v_lower,
            v_upper,
        })
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn jacobian(&self, i: usize, j: usize) -> &Expr {
        &self.jacobian[i * self.n() + j]
    }

    fn lower_at(&self, t: f64) -> Vec<f64> {
        self.v_lower.iter().map(|e| e.eval(0.0, t, &[])).collect()
    }
}

/// Outcome of sampling the standing hypotheses on the space-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    /// Off-diagonal Jacobian nonnegative on the probe set.
    pub h1_ok: bool,
    /// `G(x,t,0) = 0` and `tau v_lower' <= G(x,t,tau v_lower)` on the probe set.
    pub h3_ok: bool,
    /// `G_i(x,t,tau v_upper) <= -h` for all probed `tau >= tau_upper`.
    pub h4_ok: bool,
    /// Margin `h` at `tau_upper` (positive when H4 holds).
    pub h4_margin: f64,
    /// Upper bracket factor: smallest probed `tau` from which H4 holds.
    pub tau_upper: f64,
    pub messages: Vec<String>,
}

impl HypothesisReport {
    pub fn ok(&self) -> bool {
        self.h1_ok && self.h3_ok && self.h4_ok
    }
}

/// Nonlinear periodic model: grid, diffusion and boundary, plus the reaction.
#[derive(Debug, Clone)]
pub struct NonlinearModel {
    /// Linear shell carrying the grid, diffusion and boundary (zero reaction).
    pub shell: ModelSpec,
    pub reaction: ReactionSpec,
    pub tol_fp: f64,
    pub max_periods: usize,
}

impl NonlinearModel {
    pub fn new(shell: ModelSpec, reaction: ReactionSpec) -> Result<Self> {
        if shell.n() != reaction.n() {
            return Err(Error::Shape(format!(
                "diffusion has {} components, G has {}",
                shell.n(),
                reaction.n()
            )));
        }
        Ok(NonlinearModel {
            shell,
            reaction,
            tol_fp: TOL_FP,
            max_periods: MAX_PERIODS,
        })
    }

    pub fn n(&self) -> usize {
        self.reaction.n()
    }

    pub fn with_kappa(&self, kappa: &[f64]) -> Result<Self> {
        Ok(NonlinearModel {
            shell: self.shell.with_kappa(kappa)?,
            ..self.clone()
        })
    }

    /// Sample H1, H3 and H4 on every grid node and time step.
    pub fn validate(&self) -> HypothesisReport {
        let n = self.n();
        let r = &self.reaction;
        let dom = &self.shell.domain;
        let tg = self.shell.tgrid;
        let mut messages = Vec::new();
        let (mut h1_ok, mut h3_ok) = (true, true);
        let mut worst = vec![f64::NEG_INFINITY; H4_TAUS.len()];
        let eps_t = 1e-6 * tg.period;
        let mut q = vec![0.0; n];
        for k in 0..tg.n_t {
            let t = tg.time(k);
            let lower = r.lower_at(t);
            let lower_p = r.lower_at(t + eps_t);
            let lower_m = r.lower_at(t - eps_t);
            let slope: Vec<f64> = (0..n).map(|i| (lower_p[i] - lower_m[i]) / (2.0 * eps_t)).collect();
            for j in 0..dom.n_nodes() {
                let x = dom.node_x(j);
                for &s in &PROBE_STATES {
                    for (qi, vi) in q.iter_mut().zip(&r.v_upper) {
                        *qi = s * vi;
                    }
                    for a in 0..n {
                        for b in 0..n {
                            if a != b && h1_ok {
                                let d = r.jacobian(a, b).eval(x, t, &q);
                                if d < 0.0 {
                                    h1_ok = false;
                                    messages.push(format!("H1: dG{}/dq{} = {d:e} at x={x}, t={t}", a + 1, b + 1));
                                }
                            }
                        }
                    }
                }
                if h3_ok {
                    let zero = vec![0.0; n];
                    for (i, gi) in r.g.iter().enumerate() {
                        let v = gi.eval(x, t, &zero);
                        if v.abs() > 1e-12 {
                            h3_ok = false;
                            messages.push(format!("H3: G{}(x,t,0) = {v:e} at x={x}, t={t}", i + 1));
                        }
                    }
                    for &tau in &H3_TAUS {
                        let qv: Vec<f64> = lower.iter().map(|v| tau * v).collect();
                        for (i, gi) in r.g.iter().enumerate() {
                            let lhs = tau * slope[i];
                            let rhs = gi.eval(x, t, &qv);
                            // allow finite-difference noise in the slope
                            if lhs > rhs + 1e-8 * (1.0 + lhs.abs()) {
                                h3_ok = false;
                                messages.push(format!(
                                    "H3: tau={tau}: {lhs:e} > G{}={rhs:e} at x={x}, t={t}",
                                    i + 1
                                ));
                                break;
                            }
                        }
                    }
                }
                for (slot, &tau) in worst.iter_mut().zip(&H4_TAUS) {
                    let qv: Vec<f64> = r.v_upper.iter().map(|v| tau * v).collect();
                    for gi in &r.g {
                        *slot = slot.max(gi.eval(x, t, &qv));
                    }
                }
            }
            if lower.iter().any(|v| !(*v > 0.0)) && h3_ok {
                h3_ok = false;
                messages.push(format!("H3: v_lower not positive at t={t}"));
            }
        }
        // smallest probe from which every larger probe is uniformly negative
        let start = (0..H4_TAUS.len()).find(|&s| worst[s..].iter().all(|w| *w < 0.0));
        let (h4_ok, tau_upper, h4_margin) = match start {
            Some(s) => (true, H4_TAUS[s], -worst[s..].iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            None => {
                messages.push(format!(
                    "H4: max G(x,t,tau v_upper) = {:e} at tau={}",
                    worst[H4_TAUS.len() - 1],
                    H4_TAUS[H4_TAUS.len() - 1]
                ));
                (false, H4_TAUS[H4_TAUS.len() - 1], -worst[H4_TAUS.len() - 1])
            }
        };
        if h3_ok {
            // a lower profile above the upper bracket would make the bracket empty
            for k in 0..tg.n_t {
                let lower = r.lower_at(tg.time(k));
                if lower.iter().zip(&r.v_upper).any(|(l, u)| TAU_LOWER * l > tau_upper * u) {
                    h3_ok = false;
                    messages.push("H3/H4: lower bracket exceeds upper bracket".into());
                    break;
                }
            }
        }
        HypothesisReport {
            h1_ok,
            h3_ok,
            h4_ok,
            h4_margin,
            tau_upper,
            messages,
        }
    }
}

/// Build a nonlinear model from the `[nonlinear]` section plus the grid,
/// diffusion and boundary sections.
pub fn build_nonlinear(config: &Config) -> Result<NonlinearModel> {
    let nl = config
        .nonlinear
        .as_ref()
        .ok_or_else(|| Error::config("nonlinear", "missing section"))?;
    let g = nl
        .g
        .iter()
        .map(|s| Expr::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let n = g.len();
    let v_lower = nl.v_lower.iter().map(|s| s.to_expr()).collect::<Result<Vec<_>>>()?;
    if let Some(e) = v_lower.iter().find(|e| e.depends_on_x() || e.state_arity() > 0) {
        return Err(Error::config("nonlinear.v_lower", format!("'{e}' must depend on t only")));
    }
    let reaction = ReactionSpec::new(g, v_lower, nl.v_upper.clone())?;
    let mut shell_cfg = config.clone();
    let zeros = vec![vec![crate::config::Scalar::Num(0.0); n]; n];
    shell_cfg.reaction = Some(crate::config::ReactionConfig {
        form: crate::config::ReactionForm::Combined,
        entries: Some(zeros),
        v: None,
        f: None,
    });
    let shell = model::build_model(&shell_cfg)?;
    let mut m = NonlinearModel::new(shell, reaction)?;
    if let Some(t) = nl.tol_fp {
        if !(t > 0.0) {
            return Err(Error::config("nonlinear.tol_fp", "must be positive"));
        }
        m.tol_fp = t;
    }
    if let Some(p) = nl.max_periods {
        m.max_periods = p;
    }
    Ok(m)
}

/// A positive periodic solution sampled on the space-time grid.
#[derive(Debug, Clone)]
pub struct PeriodicSolution {
    pub n: usize,
    /// 1 for ODE settings.
    pub n_nodes: usize,
    pub n_t: usize,
    /// Samples `[k][node][i]` at `t_k`, `k = 0..n_t`.
    pub w: Vec<f64>,
    /// Spatial average `[k][i]`.
    pub w_tilde: Vec<f64>,
    /// `sup |w - w_tilde|`.
    pub w_hat_norm: f64,
    /// Poincare defect `|w(T) - w(0)|_inf` of the final period.
    pub residual: f64,
    pub periods: usize,
    /// `|w_from_top - w_from_bottom|_inf` at `t = 0`.
    pub two_sided_gap: f64,
    pub kappa: Vec<f64>,
    pub setting: Setting,
}

impl PeriodicSolution {
    pub fn at(&self, k: usize, node: usize, i: usize) -> f64 {
        self.w[(k * self.n_nodes + node) * self.n + i]
    }

    pub fn tilde_at(&self, k: usize, i: usize) -> f64 {
        self.w_tilde[k * self.n + i]
    }

    pub fn sup_norm(&self) -> f64 {
        self.w.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn tilde_sup_norm(&self) -> f64 {
        self.w_tilde.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Uniqueness heuristic: both starts reached the same solution.
    pub fn two_sided_ok(&self, tol_fp: f64) -> bool {
        self.two_sided_gap <= 10.0 * tol_fp
    }

    /// Restrict to one component as an `1 x 1` coefficient field over the full grid.
    pub fn component_field(&self, i: usize, n_nodes: usize, tgrid: model::TimeGrid) -> CoefficientField {
        CoefficientField::from_fn(1, 1, n_nodes, tgrid, |k, node, _, _| {
            self.at(k, if self.n_nodes == 1 { 0 } else { node }, i)
        })
    }
}

struct March<'a> {
    model: &'a NonlinearModel,
    setting: Setting,
    nodes: usize,
    /// Diffusion per time step `k` (coefficients at `t_k`) and component.
    ops: Vec<Vec<BandedOperator>>,
    weights: Vec<f64>,
    x: Vec<f64>,
}

impl<'a> March<'a> {
    fn new(model: &'a NonlinearModel, setting: Setting) -> Result<Self> {
        let shell = &model.shell;
        let nodes = match setting {
            Setting::Pde => {
                if shell.boundary.kind != BoundaryKind::Neumann {
                    return Err(Error::Invalid("periodic solutions are computed with Neumann boundaries".into()));
                }
                shell.domain.n_nodes()
            }
            Setting::FrozenX(j) => {
                if j >= shell.domain.n_nodes() {
                    return Err(Error::Invalid(format!("frozen node {j} outside grid")));
                }
                1
            }
            Setting::Averaged => 1,
        };
        let ops = if setting == Setting::Pde {
            (0..shell.tgrid.n_t)
                .map(|k| (0..model.n()).map(|i| assemble_diffusion(shell, i, k)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let x = (0..shell.domain.n_nodes()).map(|j| shell.domain.node_x(j)).collect();
        Ok(March {
            model,
            setting,
            nodes,
            ops,
            weights: shell.domain.average_weights(),
            x,
        })
    }

    fn reaction(&self, node: usize, t: f64, q: &[f64], out: &mut [f64]) {
        let g = &self.model.reaction.g;
        match self.setting {
            Setting::Pde => {
                for (o, gi) in out.iter_mut().zip(g) {
                    *o = gi.eval(self.x[node], t, q);
                }
            }
            Setting::FrozenX(j) => {
                for (o, gi) in out.iter_mut().zip(g) {
                    *o = gi.eval(self.x[j], t, q);
                }
            }
            Setting::Averaged => {
                for (o, gi) in out.iter_mut().zip(g) {
                    *o = self.weights.iter().zip(&self.x).map(|(w, &x)| w * gi.eval(x, t, q)).sum();
                }
            }
        }
    }

    /// One step from `t_k`: production explicit, destruction (Patankar) and
    /// diffusion implicit with coefficients at `t_{k+1}`.
    fn step(&self, k: usize, w: &mut [f64]) {
        let n = self.model.n();
        let tg = self.model.shell.tgrid;
        let dt = tg.dt();
        let next = (k + 1) % tg.n_t;
        let t = tg.time(k + 1);
        let mut g = vec![0.0; n];
        let mut prod = vec![0.0; self.nodes * n];
        let mut loss = vec![0.0; self.nodes * n];
        for node in 0..self.nodes {
            let q = &w[node * n..(node + 1) * n];
            self.reaction(node, t, q, &mut g);
            for i in 0..n {
                let idx = node * n + i;
                if g[i] >= 0.0 {
                    prod[idx] = g[i];
                } else if q[i] > 0.0 {
                    loss[idx] = -g[i] / q[i];
                }
            }
        }
        if self.setting == Setting::Pde {
            let mut lower = vec![0.0; self.nodes];
            let mut diag = vec![0.0; self.nodes];
            let mut upper = vec![0.0; self.nodes];
            let mut rhs = vec![0.0; self.nodes];
            for i in 0..n {
                let op = &self.ops[next][i];
                for j in 0..self.nodes {
                    let idx = j * n + i;
                    lower[j] = -dt * op.lower[j];
                    upper[j] = -dt * op.upper[j];
                    diag[j] = 1.0 + dt * loss[idx] - dt * op.diag[j];
                    rhs[j] = w[idx] + dt * prod[idx];
                }
                solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
                for j in 0..self.nodes {
                    w[j * n + i] = rhs[j];
                }
            }
        } else {
            for i in 0..n {
                w[i] = (w[i] + dt * prod[i]) / (1.0 + dt * loss[i]);
            }
        }
    }

    fn bracket_check(&self, k: usize, w: &[f64], tau_upper: f64) -> Result<()> {
        let n = self.model.n();
        let r = &self.model.reaction;
        let lower = r.lower_at(self.model.shell.tgrid.time(k));
        for node in 0..self.nodes {
            for i in 0..n {
                let v = w[node * n + i];
                let lo = TAU_LOWER * lower[i];
                let hi = tau_upper * r.v_upper[i];
                if !(v >= lo * (1.0 - 1e-6)) || v > hi * (1.0 + 1e-6) {
                    return Err(Error::BracketViolation {
                        component: i,
                        node: match self.setting {
                            Setting::FrozenX(j) => j,
                            _ => node,
                        },
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    /// Iterate whole periods from `w0` until the Poincare defect drops below
    /// `tol_fp`. Returns the samples over the final period, the defect and
    /// the number of periods.
    fn run(&self, mut w: Vec<f64>, tau_upper: f64) -> Result<(Vec<f64>, f64, usize)> {
        let n_t = self.model.shell.tgrid.n_t;
        let mut frames = vec![0.0; w.len() * n_t];
        let mut defect = f64::INFINITY;
        for period in 1..=self.model.max_periods {
            let start = w.clone();
            for k in 0..n_t {
                frames[k * w.len()..(k + 1) * w.len()].copy_from_slice(&w);
                self.step(k, &mut w);
                self.bracket_check(k + 1, &w, tau_upper)?;
            }
            defect = w.iter().zip(&start).fold(0.0, |a, (x, y)| a.max((x - y).abs()));
            if !defect.is_finite() {
                return Err(Error::NoConvergence { periods: period, defect });
            }
            if defect < self.model.tol_fp {
                return Ok((frames, defect, period));
            }
        }
        Err(Error::NoConvergence {
            periods: self.model.max_periods,
            defect,
        })
    }
}

/// Thomas algorithm; `rhs` is overwritten with the solution.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut b = diag[0];
    c[0] = upper[0] / b;
    rhs[0] /= b;
    for i in 1..n {
        b = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / b } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / b;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// Positive periodic solution by Poincare iteration from the upper bracket
/// `tau_upper * v_upper`, cross-checked by a second run from
/// `TAU_LOWER * v_lower`.
pub fn solve_periodic(model: &NonlinearModel, setting: Setting) -> Result<PeriodicSolution> {
    let report = model.validate();
    if !report.ok() {
        return Err(Error::Invalid(format!(
            "hypotheses not satisfied: {}",
            report.messages.join("; ")
        )));
    }
    solve_validated(model, setting, report.tau_upper)
}

fn solve_validated(model: &NonlinearModel, setting: Setting, tau_upper: f64) -> Result<PeriodicSolution> {
    let march = March::new(model, setting)?;
    let n = model.n();
    let size = march.nodes * n;
    let top: Vec<f64> = (0..size).map(|u| tau_upper * model.reaction.v_upper[u % n]).collect();
    let low0 = model.reaction.lower_at(0.0);
    let bottom: Vec<f64> = (0..size).map(|u| TAU_LOWER * low0[u % n]).collect();
    let (high, low) = rayon::join(|| march.run(top, tau_upper), || march.run(bottom, tau_upper));
    let (frames, residual, periods) = high?;
    let (frames_low, _, _) = low?;
    let two_sided_gap = frames[..size]
        .iter()
        .zip(&frames_low[..size])
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));

    let n_t = model.shell.tgrid.n_t;
    let weights = &march.weights;
    let mut w_tilde = vec![0.0; n_t * n];
    let mut w_hat_norm = 0.0f64;
    for k in 0..n_t {
        let frame = &frames[k * size..(k + 1) * size];
        for i in 0..n {
            let avg = if march.nodes == 1 {
                frame[i]
            } else {
                weights.iter().enumerate().map(|(j, wj)| wj * frame[j * n + i]).sum()
            };
            w_tilde[k * n + i] = avg;
            for j in 0..march.nodes {
                w_hat_norm = w_hat_norm.max((frame[j * n + i] - avg).abs());
            }
        }
    }
    Ok(PeriodicSolution {
        n,
        n_nodes: march.nodes,
        n_t,
        w: frames,
        w_tilde,
        w_hat_norm,
        residual,
        periods,
        two_sided_gap,
        kappa: model.shell.diffusion.kappa.clone(),
        setting,
    })
}

/// `w_0(x, t)`: frozen-x periodic solutions at every grid node, `[k][node][i]`.
pub fn frozen_solutions(model: &NonlinearModel) -> Result<Vec<PeriodicSolution>> {
    let report = model.validate();
    if !report.ok() {
        return Err(Error::Invalid(format!(
            "hypotheses not satisfied: {}",
            report.messages.join("; ")
        )));
    }
    (0..model.shell.domain.n_nodes())
        .into_par_iter()
        .map(|j| solve_validated(model, Setting::FrozenX(j), report.tau_upper))
        .collect()
}

/// One row of a limit table.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub kappa: Vec<f64>,
    /// Average part: `|w~_k - avg w_0|` (zero limit) or `|w~_k - w~_inf|` (large limit).
    pub gap_avg: f64,
    /// Deviation part: `|w^_k - w^_0|` (zero limit) or `|w^_k|` (large limit).
    pub gap_hat: f64,
    /// Full gap `|w_k - w_0|` or `|w_k - w~_inf|`.
    pub gap_sup: f64,
    pub periodicity_residual: f64,
    pub periods_to_converge: usize,
    pub two_sided_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    Zero,
    Infinity,
}

#[derive(Debug, Clone)]
pub struct GapTable {
    pub kind: LimitKind,
    pub rows: Vec<GapRow>,
    /// Sup norm of the limit profile (`w_0` or `w~_inf`).
    pub limit_norm: f64,
}

impl GapTable {
    /// Whether `gap` is nonincreasing along the rows up to a relative band.
    pub fn monotone_within(&self, gap: impl Fn(&GapRow) -> f64, band: f64) -> bool {
        self.rows.windows(2).all(|p| gap(&p[1]) <= gap(&p[0]) * (1.0 + band))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let n = self.rows.first().map_or(0, |r| r.kappa.len());
        let mut header: Vec<String> = (1..=n).map(|i| format!("kappa_{i}")).collect();
        for h in ["gap_avg", "gap_hat", "periodicity_residual", "periods_to_converge", "gap_sup"] {
            header.push(h.into());
        }
        wtr.write_record(&header)?;
        for r in &self.rows {
            let mut rec: Vec<String> = r.kappa.iter().map(|k| fmt_num(*k)).collect();
            rec.push(fmt_num(r.gap_avg));
            rec.push(fmt_num(r.gap_hat));
            rec.push(fmt_num(r.periodicity_residual));
            rec.push(r.periods_to_converge.to_string());
            rec.push(fmt_num(r.gap_sup));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn per_kappa(model: &NonlinearModel, kappa_grid: &[Vec<f64>]) -> Result<Vec<PeriodicSolution>> {
    kappa_grid
        .par_iter()
        .map(|k| solve_periodic(&model.with_kappa(k)?, Setting::Pde))
        .collect()
}

/// Gaps between PDE solutions and the frozen-x limit `w_0` along a
/// (descending) diffusion grid.
pub fn limit_check_zero(model: &NonlinearModel, kappa_grid: &[Vec<f64>]) -> Result<GapTable> {
    let frozen = frozen_solutions(model)?;
    let n = model.n();
    let nodes = model.shell.domain.n_nodes();
    let n_t = model.shell.tgrid.n_t;
    let weights = model.shell.domain.average_weights();
    let w0 = |k: usize, j: usize, i: usize| frozen[j].at(k, 0, i);
    let avg0: Vec<f64> = (0..n_t * n)
        .map(|u| (0..nodes).map(|j| weights[j] * w0(u / n, j, u % n)).sum())
        .collect();
    let limit_norm = frozen.iter().map(|s| s.sup_norm()).fold(0.0, f64::max);
    let sols = per_kappa(model, kappa_grid)?;
    let rows = sols
        .iter()
        .map(|s| {
            let (mut gap_avg, mut gap_hat, mut gap_sup) = (0.0f64, 0.0f64, 0.0f64);
            for k in 0..n_t {
                for i in 0..n {
                    let (t_k, t_0) = (s.tilde_at(k, i), avg0[k * n + i]);
                    gap_avg = gap_avg.max((t_k - t_0).abs());
                    for j in 0..nodes {
                        let (a, b) = (s.at(k, j, i), w0(k, j, i));
                        gap_sup = gap_sup.max((a - b).abs());
                        gap_hat = gap_hat.max(((a - t_k) - (b - t_0)).abs());
                    }
                }
            }
            GapRow {
                kappa: s.kappa.clone(),
                gap_avg,
                gap_hat,
                gap_sup,
                periodicity_residual: s.residual,
                periods_to_converge: s.periods,
                two_sided_gap: s.two_sided_gap,
            }
        })
        .collect();
    Ok(GapTable {
        kind: LimitKind::Zero,
        rows,
        limit_norm,
    })
}

/// Gaps between PDE solutions and the averaged-ODE solution `w~_inf` along
/// an (ascending) diffusion grid.
pub fn limit_check_infty(model: &NonlinearModel, kappa_grid: &[Vec<f64>]) -> Result<GapTable> {
    let avg = solve_periodic(model, Setting::Averaged)?;
    let n = model.n();
    let nodes = model.shell.domain.n_nodes();
    let n_t = model.shell.tgrid.n_t;
    let sols = per_kappa(model, kappa_grid)?;
    let rows = sols
        .iter()
        .map(|s| {
            let (mut gap_avg, mut gap_sup) = (0.0f64, 0.0f64);
            for k in 0..n_t {
                for i in 0..n {
                    let inf = avg.at(k, 0, i);
                    gap_avg = gap_avg.max((s.tilde_at(k, i) - inf).abs());
                    for j in 0..nodes {
                        gap_sup = gap_sup.max((s.at(k, j, i) - inf).abs());
                    }
                }
            }
            GapRow {
                kappa: s.kappa.clone(),
                gap_avg,
                gap_hat: s.w_hat_norm,
                gap_sup,
                periodicity_residual: s.residual,
                periods_to_converge: s.periods,
                two_sided_gap: s.two_sided_gap,
            }
        })
        .collect();
    Ok(GapTable {
        kind: LimitKind::Infinity,
        rows,
        limit_norm: avg.sup_norm(),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{BoundarySpec, DiffusionSpec, Domain, Reaction, TimeGrid};

    pub(crate) fn logistic(g: &str, lower: &str, upper: f64, kappa: f64, n_x: usize, n_t: usize) -> NonlinearModel {
        let d = Domain::new(0.0, 1.0, n_x).unwrap();
        let tg = TimeGrid::new(1.0, n_t).unwrap();
        let shell = ModelSpec::new(
            d,
            tg,
            DiffusionSpec::uniform(vec![kappa], d.n_nodes(), tg).unwrap(),
            BoundarySpec::neumann(),
            Reaction::Combined {
                m: CoefficientField::constant(1, 1, d.n_nodes(), tg, &[0.0]),
            },
        )
        .unwrap();
        let r = ReactionSpec::new(
            vec![Expr::parse(g).unwrap()],
            vec![Expr::parse(lower).unwrap()],
            vec![upper],
        )
        .unwrap();
        NonlinearModel::new(shell, r).unwrap()
    }

    /// Periodic solution of `V' = a(t) V - b(t) V^2` via `u = 1/V`, which
    /// solves the linear equation `u' = -a u + b`. Integrals by fine
    /// cumulative trapezoid; `t` must be a multiple of `period / 100`.
    fn logistic_oracle(a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64, period: f64, t: f64) -> f64 {
        let m = 200_000;
        let h = period / m as f64;
        // big_a[i] = int_0^{t_i} a, inner[i] = int_0^{t_i} e^{A} b
        let mut big_a = vec![0.0; m + 1];
        let mut inner = vec![0.0; m + 1];
        for i in 1..=m {
            let (t0, t1) = ((i - 1) as f64 * h, i as f64 * h);
            big_a[i] = big_a[i - 1] + 0.5 * h * (a(t0) + a(t1));
            inner[i] = inner[i - 1] + 0.5 * h * (big_a[i - 1].exp() * b(t0) + big_a[i].exp() * b(t1));
        }
        let decay = (-big_a[m]).exp();
        let u0 = decay * inner[m] / (1.0 - decay);
        let i = (t / h).round() as usize;
        1.0 / ((-big_a[i]).exp() * (u0 + inner[i]))
    }

    #[test]
    fn constant_logistic() {
        let m = logistic("2*q1 - 0.5*q1*q1", "0.5", 5.0, 1.0, 8, 50);
        let rep = m.validate();
        assert!(rep.ok(), "{:?}", rep.messages);
        for setting in [Setting::Pde, Setting::FrozenX(3), Setting::Averaged] {
            let s = solve_periodic(&m, setting).unwrap();
            assert!(s.residual < 1e-9);
            assert!(s.two_sided_ok(1e-9), "{}", s.two_sided_gap);
            assert!(s.w.iter().all(|v| (v - 4.0).abs() < 1e-8), "{setting}");
        }
    }

    #[test]
    fn periodic_logistic_matches_reciprocal_oracle() {
        let m = logistic("(1.5 + sin(2*pi*t))*q1 - (1 + 0.5*cos(2*pi*t))*q1*q1", "0.2", 4.0, 1.0, 4, 2000);
        let s = solve_periodic(&m, Setting::Averaged).unwrap();
        let a = |t: f64| 1.5 + (2.0 * std::f64::consts::PI * t).sin();
        let b = |t: f64| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * t).cos();
        for k in [0, 500, 1000, 1500] {
            let t = k as f64 / 2000.0;
            let exact = logistic_oracle(a, b, 1.0, t);
            let got = s.at(k, 0, 0);
            // backward Euler in time: O(dt)
            assert!((got - exact).abs() / exact < 2e-3, "t={t}: {got} vs {exact}");
        }
    }

    #[test]
    fn hat_part_has_zero_mean() {
        let m = logistic("(1 + x + 0.3*sin(2*pi*t))*q1 - q1*q1", "0.3", 3.0, 0.05, 20, 40);
        let s = solve_periodic(&m, Setting::Pde).unwrap();
        let wts = m.shell.domain.average_weights();
        for k in 0..s.n_t {
            let mean: f64 = (0..s.n_nodes).map(|j| wts[j] * (s.at(k, j, 0) - s.tilde_at(k, 0))).sum();
            assert!(mean.abs() < 1e-12);
        }
        assert!(s.w.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn large_diffusion_approaches_average() {
        let m = logistic("(2 + x + sin(2*pi*t))*q1 - q1*q1", "0.5", 5.0, 1.0, 20, 50);
        let t = limit_check_infty(&m, &[vec![1.0], vec![10.0], vec![100.0]]).unwrap();
        assert!(t.monotone_within(|r| r.gap_hat, 0.1));
        assert!(t.rows[2].gap_hat < 0.02 * t.limit_norm);
        assert!(t.rows[2].gap_sup < 0.02 * t.limit_norm);
    }

    #[test]
    fn frozen_limit_recovers_pointwise_equilibrium() {
        let m = logistic("(1 + x)*q1 - q1*q1", "0.5", 3.0, 1.0, 40, 20);
        let t = limit_check_zero(&m, &[vec![1e-2], vec![1e-3]]).unwrap();
        assert!((t.limit_norm - 2.0).abs() < 1e-8);
        assert!(t.monotone_within(|r| r.gap_sup, 0.1));
        assert!(t.rows[1].gap_sup < t.rows[0].gap_sup);
    }

    #[test]
    fn hypothesis_failures_reported() {
        // no decay at large states
        let m = logistic("q1", "0.5", 1.0, 1.0, 4, 10);
        let r = m.validate();
        assert!(!r.h4_ok);
        assert!(solve_periodic(&m, Setting::Averaged).is_err());
        // G(0) != 0
        let m = logistic("1 - q1", "0.5", 2.0, 1.0, 4, 10);
        assert!(!m.validate().h3_ok);
    }

    #[test]
    fn competition_breaks_cooperativity() {
        let d = Domain::new(0.0, 1.0, 4).unwrap();
        let tg = TimeGrid::new(1.0, 10).unwrap();
        let shell = ModelSpec::new(
            d,
            tg,
            DiffusionSpec::uniform(vec![1.0, 1.0], d.n_nodes(), tg).unwrap(),
            BoundarySpec::neumann(),
            Reaction::Combined {
                m: CoefficientField::constant(2, 2, d.n_nodes(), tg, &[0.0; 4]),
            },
        )
        .unwrap();
        let g = ["q1*(1 - q1 - q2)", "q2*(1 - q2 - q1)"].map(|s| Expr::parse(s).unwrap()).to_vec();
        let r = ReactionSpec::new(g, vec![Expr::constant(0.1); 2], vec![2.0, 2.0]).unwrap();
        let m = NonlinearModel::new(shell, r).unwrap();
        assert!(!m.validate().h1_ok);
    }
}

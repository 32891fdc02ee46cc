//! Basic reproduction ratio by sign bisection on `omega(Psi_mu)`, the
//! next-generation operator assembled directly as an independent check, and
//! diffusion sweeps with their small/large-diffusion endpoints.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::{self, Setting, Stepper};
use crate::model::{BoundaryKind, BoundarySpec, ModelSpec};
use crate::spectral::{self, POWER_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum R0Status {
    Positive,
    /// `omega(Psi_mu) < 0` down to `mu_min`.
    ZeroCase,
    /// `omega(Psi_mu) > 0` up to `mu_max`.
    BracketFailure,
}

impl std::fmt::Display for R0Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            R0Status::Positive => "positive",
            R0Status::ZeroCase => "zero_case",
            R0Status::BracketFailure => "bracket_failure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct R0Options {
    pub mu_min: f64,
    pub mu_max: f64,
    /// Relative bracket width at which bisection stops.
    pub tol_mu: f64,
    /// First probe; the bracket grows or shrinks from here by factors of 10.
    pub mu_start: f64,
}

impl Default for R0Options {
    fn default() -> Self {
        R0Options {
            mu_min: 1e-8,
            mu_max: 1e8,
            tol_mu: 1e-6,
            mu_start: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct R0Result {
    pub value: f64,
    pub status: R0Status,
    pub bracket: (f64, f64),
    /// Every probe `(mu, omega(Psi_mu))` in evaluation order.
    pub omega_trace: Vec<(f64, f64)>,
    /// `omega(Psi_value)`; for the zero case, the value at `mu_min`.
    pub omega_at_value: f64,
    pub setting: Setting,
    pub bc: Option<BoundaryKind>,
}

/// `omega(Psi_mu)`: growth bound of the system with generator `-V + F/mu`
/// (plus diffusion in the PDE setting).
pub fn omega_psi(model: &ModelSpec, mu: f64, setting: Setting) -> Result<f64> {
    evolve::growth_bound(&evolve::monodromy(model, Some(mu), setting)?)
}

/// `R0` as the root of `mu -> omega(Psi_mu)`, bisected in `log mu`.
pub fn r0_bisect(model: &ModelSpec, setting: Setting, opts: &R0Options) -> Result<R0Result> {
    if !model.reaction.is_split() {
        return Err(Error::MissingSplitForm);
    }
    if !(opts.mu_min > 0.0 && opts.mu_min < opts.mu_max && opts.tol_mu > 0.0) {
        return Err(Error::Invalid(format!(
            "need 0 < mu_min < mu_max and tol_mu > 0 (got {}, {}, {})",
            opts.mu_min, opts.mu_max, opts.tol_mu
        )));
    }
    let bc = (setting == Setting::Pde).then_some(model.boundary.kind);
    let mut trace = Vec::new();
    let probe = |mu: f64, trace: &mut Vec<(f64, f64)>| -> Result<f64> {
        let w = omega_psi(model, mu, setting)?;
        trace.push((mu, w));
        Ok(w)
    };
    let done = |value, status, bracket, omega_at_value, trace| R0Result {
        value,
        status,
        bracket,
        omega_trace: trace,
        omega_at_value,
        setting,
        bc,
    };

    let mut mu = opts.mu_start.clamp(opts.mu_min, opts.mu_max);
    let mut w = probe(mu, &mut trace)?;
    if w == 0.0 {
        return Ok(done(mu, R0Status::Positive, (mu, mu), w, trace));
    }
    let (mut lo, mut hi);
    if w > 0.0 {
        // R0 > mu: grow
        loop {
            if mu >= opts.mu_max {
                return Ok(done(opts.mu_max, R0Status::BracketFailure, (opts.mu_max, f64::INFINITY), w, trace));
            }
            let next = (mu * 10.0).min(opts.mu_max);
            let wn = probe(next, &mut trace)?;
            if wn <= 0.0 {
                (lo, hi) = (mu, next);
                if wn == 0.0 {
                    return Ok(done(next, R0Status::Positive, (next, next), wn, trace));
                }
                break;
            }
            (mu, w) = (next, wn);
        }
    } else {
        // R0 < mu: shrink
        loop {
            if mu <= opts.mu_min {
                return Ok(done(0.0, R0Status::ZeroCase, (0.0, opts.mu_min), w, trace));
            }
            let next = (mu / 10.0).max(opts.mu_min);
            let wn = probe(next, &mut trace)?;
            if wn >= 0.0 {
                (lo, hi) = (next, mu);
                if wn == 0.0 {
                    return Ok(done(next, R0Status::Positive, (next, next), wn, trace));
                }
                break;
            }
            (mu, w) = (next, wn);
        }
    }

    while hi / lo - 1.0 > opts.tol_mu {
        let mid = (lo * hi).sqrt();
        let wm = probe(mid, &mut trace)?;
        if wm > 0.0 {
            lo = mid;
        } else if wm < 0.0 {
            hi = mid;
        } else {
            return Ok(done(mid, R0Status::Positive, (mid, mid), wm, trace));
        }
    }
    let value = (lo * hi).sqrt();
    let w_value = omega_psi(model, value, setting)?;
    Ok(done(value, R0Status::Positive, (lo, hi), w_value, trace))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectOptions {
    /// Cap on the number of periods kept in the truncated integral.
    pub k_max: usize,
    /// Required bound on the neglected geometric tail.
    pub tol_tail: f64,
}

impl Default for DirectOptions {
    fn default() -> Self {
        DirectOptions {
            k_max: 400,
            tol_tail: 1e-10,
        }
    }
}

/// Spectral radius of the next-generation operator
/// `[L u](t) = int_0^inf Phi(t, t-s) F(t-s) u(t-s) ds`, assembled on
/// `T`-periodic grid functions.
///
/// The integral runs over `K` whole periods, `K` the smallest integer with
/// `r^K / (1 - r) < tol_tail` for `r = r(Phi(T,0))`. The `s`-quadrature is
/// the one-sided rule matching the backward-Euler decay steps: a newborn
/// cohort at `t_j` is decayed once by the step into `t_j` and then stepwise.
pub fn r0_direct(model: &ModelSpec, setting: Setting, opts: &DirectOptions) -> Result<f64> {
    let f = match &model.reaction {
        crate::model::Reaction::Split { f, .. } => f,
        _ => return Err(Error::MissingSplitForm),
    };
    let decay = model.decay_part();
    let stepper = Stepper::new(&decay, None, setting)?;
    let phi = evolve::monodromy_from(&stepper);
    let r_phi = if phi.log_scale.is_finite() {
        spectral::spectral_radius(&phi.matrix, POWER_TOL)?.radius * phi.log_scale.exp()
    } else {
        0.0
    };
    if r_phi >= 1.0 {
        return Err(Error::Invalid(format!(
            "decay system does not decay: r(Phi(T,0)) = {r_phi}"
        )));
    }
    let tail = |k: usize| r_phi.powi(k as i32) / (1.0 - r_phi);
    let periods = (1..=opts.k_max).find(|&k| tail(k) < opts.tol_tail).ok_or(Error::TailBound {
        bound: tail(opts.k_max),
        periods: opts.k_max,
    })?;

    let n = model.n();
    let n_t = model.tgrid.n_t;
    let dt = model.tgrid.dt();
    let d = stepper.dim();
    let averaged_f = match setting {
        Setting::Averaged => Some(crate::model::spatial_average(f, &model.domain)?),
        _ => None,
    };
    let first_node = match setting {
        Setting::Pde if model.boundary.kind == BoundaryKind::Dirichlet => 1,
        Setting::FrozenX(j) => j,
        _ => 0,
    };
    // F(t_k) on the state space, row-major d x d
    let f_block = |k: usize| -> Vec<f64> {
        let mut out = vec![0.0; d * d];
        for local in 0..d / n {
            for i in 0..n {
                for j in 0..n {
                    let val = match &averaged_f {
                        Some(a) => a.get(k, 0, i, j),
                        None => f.get(k, first_node + local, i, j),
                    };
                    out[(local * n + i) * d + local * n + j] = val;
                }
            }
        }
        out
    };

    let size = d * n_t;
    let columns: Vec<Vec<f64>> = (0..n_t)
        .into_par_iter()
        .map(|j| {
            // column block j of L, stored as size x d row-major
            let mut col = vec![0.0; size * d];
            let mut x = f_block(j);
            let mut log_comp = 0.0;
            for m in 0..periods * n_t {
                let step = (j + n_t - 1 + m) % n_t;
                stepper.step_block(step, &mut x, d);
                log_comp += stepper.shift_between(step, 1);
                let w = dt * log_comp.exp();
                let i = (j + m) % n_t;
                for (dst, src) in col[i * d * d..(i + 1) * d * d].iter_mut().zip(&x) {
                    *dst += w * src;
                }
            }
            col
        })
        .collect();
    let mut l = nalgebra::DMatrix::zeros(size, size);
    for (j, col) in columns.iter().enumerate() {
        for r in 0..size {
            for c in 0..d {
                l[(r, j * d + c)] = col[r * d + c];
            }
        }
    }
    Ok(spectral::spectral_radius(&l, POWER_TOL)?.radius)
}

/// Frozen-x `R0(x)` at every grid node, endpoints included.
#[derive(Debug, Clone)]
pub struct PointwiseR0 {
    pub table: Vec<R0Result>,
    pub x: Vec<f64>,
    pub max: f64,
    pub argmax: usize,
}

impl PointwiseR0 {
    pub fn x_argmax(&self) -> f64 {
        self.x[self.argmax]
    }
}

pub fn r0_pointwise_max(model: &ModelSpec, opts: &R0Options) -> Result<PointwiseR0> {
    let table: Vec<R0Result> = (0..model.domain.n_nodes())
        .into_par_iter()
        .map(|j| r0_bisect(model, Setting::FrozenX(j), opts))
        .collect::<Result<_>>()?;
    if let Some(bad) = table.iter().find(|r| r.status == R0Status::BracketFailure) {
        return Err(Error::BracketFailure {
            mu: bad.value,
            omega: bad.omega_at_value,
        });
    }
    let (argmax, max) = table
        .iter()
        .map(|r| r.value)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
    Ok(PointwiseR0 {
        x: (0..model.domain.n_nodes()).map(|j| model.domain.node_x(j)).collect(),
        table,
        max,
        argmax,
    })
}

/// `R0~` of the spatially averaged system.
pub fn r0_averaged(model: &ModelSpec, opts: &R0Options) -> Result<R0Result> {
    r0_bisect(model, Setting::Averaged, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    R0,
    Eigenvalue,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r0" => Ok(SweepKind::R0),
            "eigenvalue" | "eig" => Ok(SweepKind::Eigenvalue),
            other => Err(Error::config("run.what", format!("expected r0 or eigenvalue, got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kappa: Vec<f64>,
    pub value: f64,
    pub status: String,
    pub omega_at_value: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub what: SweepKind,
    pub bc: BoundaryKind,
    pub rows: Vec<SweepRow>,
    /// Sweep points whose computation failed, with the error message.
    pub failures: Vec<(Vec<f64>, String)>,
    /// `max_x R0(x)` or `-eta`.
    pub limit_small: f64,
    /// `R0~` or `-eta~` (Neumann); `0` or `+inf` otherwise.
    pub limit_large: f64,
    /// `(eta, eta~)` for eigenvalue sweeps.
    pub eta_values: Option<(f64, f64)>,
    pub monotonicity_notes: Vec<String>,
}

impl SweepReport {
    pub fn kappa_values(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.kappa.clone()).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    /// Relative gaps `(first - limit_small, last - limit_large)`; the large
    /// gap is `None` when that limit is not finite.
    pub fn endpoint_gaps(&self) -> (Option<f64>, Option<f64>) {
        let rel = |v: f64, l: f64| ((v - l) / l.abs().max(1e-300)).abs();
        let first = self.rows.first().map(|r| rel(r.value, self.limit_small));
        let last = self
            .rows
            .last()
            .filter(|_| self.limit_large.is_finite() && self.limit_large != 0.0)
            .map(|r| rel(r.value, self.limit_large));
        (first, last)
    }

    /// CSV with columns `kappa_1..kappa_n,value,status,omega_at_value,wall_ms`,
    /// one row per sweep point followed by the two limit rows.
    pub fn write_csv<W: Write>(&self, out: W, with_timing: bool) -> Result<()> {
        let n = self.rows.first().map_or(1, |r| r.kappa.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=n).map(|i| format!("kappa_{i}")).collect();
        header.extend(["value", "status", "omega_at_value", "wall_ms"].map(String::from));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec: Vec<String> = r.kappa.iter().map(|k| fmt_num(*k)).collect();
            rec.push(fmt_num(r.value));
            rec.push(r.status.clone());
            rec.push(fmt_num(r.omega_at_value));
            rec.push(if with_timing { r.wall_ms.to_string() } else { "0".into() });
            w.write_record(&rec)?;
        }
        for (kappa, value, status) in [
            ("0", self.limit_small, "limit_small"),
            ("inf", self.limit_large, "limit_large"),
        ] {
            let mut rec = vec![kappa.to_string(); n];
            rec.extend([fmt_num(value), status.to_string(), String::new(), "0".into()]);
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}

/// Compute `R0` or `lambda*` along a list of diffusion vectors (ascending),
/// with the analytic endpoints of the small- and large-diffusion limits.
pub fn sweep(
    model: &ModelSpec,
    kappa_grid: &[Vec<f64>],
    bc: &BoundarySpec,
    what: SweepKind,
    opts: &R0Options,
) -> Result<SweepReport> {
    if kappa_grid.is_empty() {
        return Err(Error::Invalid("empty diffusion grid".into()));
    }
    let base = model.with_boundary(bc.clone())?;
    for kappa in kappa_grid {
        if kappa.len() != base.n() || kappa.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::Invalid(format!("bad diffusion vector {kappa:?}")));
        }
    }
    if kappa_grid.windows(2).any(|w| w[1].iter().zip(&w[0]).any(|(b, a)| b < a)) {
        return Err(Error::Invalid("diffusion grid must be ascending".into()));
    }

    let outcomes: Vec<std::result::Result<SweepRow, String>> = kappa_grid
        .par_iter()
        .map(|kappa| {
            let start = Instant::now();
            let res = base.with_kappa(kappa).and_then(|m| match what {
                SweepKind::R0 => {
                    let r = r0_bisect(&m, Setting::Pde, opts)?;
                    Ok((r.value, r.status.to_string(), r.omega_at_value))
                }
                SweepKind::Eigenvalue => {
                    let p = spectral::principal_eigenvalue(&m, bc)?;
                    Ok((p.lambda_star, "ok".to_string(), -p.lambda_star))
                }
            });
            res.map(|(value, status, omega_at_value)| SweepRow {
                kappa: kappa.clone(),
                value,
                status,
                omega_at_value,
                wall_ms: start.elapsed().as_millis() as u64,
            })
            .map_err(|e| e.to_string())
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (kappa, o) in kappa_grid.iter().zip(outcomes) {
        match o {
            Ok(r) => rows.push(r),
            Err(e) => failures.push((kappa.clone(), e)),
        }
    }

    let neumann = bc.kind == BoundaryKind::Neumann;
    let (limit_small, limit_large, eta_values) = match what {
        SweepKind::R0 => {
            let small = r0_pointwise_max(&base, opts)?.max;
            let large = if neumann { r0_averaged(&base, opts)?.value } else { 0.0 };
            (small, large, None)
        }
        SweepKind::Eigenvalue => {
            let eta = spectral::eta(&base)?;
            let eta_t = spectral::eta_tilde(&base)?;
            let large = if neumann { -eta_t } else { f64::INFINITY };
            (-eta, large, Some((eta, eta_t)))
        }
    };

    let notes = sweep_notes(&rows, failures.len());

    Ok(SweepReport {
        what,
        bc: bc.kind,
        rows,
        failures,
        limit_small,
        limit_large,
        eta_values,
        monotonicity_notes: notes,
    })
}

pub(crate) fn sweep_notes(rows: &[SweepRow], n_failed: usize) -> Vec<String> {
    let mut notes = Vec::new();
    let vals: Vec<f64> = rows.iter().map(|r| r.value).collect();
    if vals.len() >= 2 {
        let inc = vals.windows(2).all(|w| w[1] >= w[0]);
        let dec = vals.windows(2).all(|w| w[1] <= w[0]);
        notes.push(
            match (inc, dec) {
                (true, true) => "constant along the sweep",
                (true, false) => "nondecreasing in kappa",
                (false, true) => "nonincreasing in kappa",
                _ => "not monotone in kappa",
            }
            .to_string(),
        );
    }
    if n_failed > 0 {
        notes.push(format!("{n_failed} sweep point(s) failed"));
    }
    notes
}

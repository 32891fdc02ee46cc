//! Backward-Euler time stepping of linear periodic cooperative systems and
//! dense monodromy (period map) assembly.
//!
//! State vectors are node-major: unknown `node * n + i` holds component `i`
//! at the `node`-th unknown node of the setting (interior nodes for
//! Dirichlet, all nodes for Neumann/Robin, a single node for ODE settings).
//!
//! A step from `t_k` to `t_{k+1}` solves `(I - dt A(t_{k+1})) u_new = u_old`
//! where `A` couples the diffusion stencils with the reaction generator.
//! The step matrix is banded with half-bandwidth `n` and is factored once per
//! time index.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::discretize::assemble_diffusion;
use crate::error::{Error, Result};
use crate::model::{BoundaryKind, ModelSpec, Reaction};
use crate::spectral;

/// Entries in `(-EPS_POS, 0)` of a normalized monodromy are rounding noise.
pub const EPS_POS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    /// Full reaction-diffusion system with the model's boundary condition.
    Pde,
    /// Diffusion removed, coefficients frozen at grid node `x_index`.
    FrozenX(usize),
    /// Diffusion removed, reaction coefficients spatially averaged.
    Averaged,
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Setting::Pde => f.write_str("pde"),
            Setting::FrozenX(j) => write!(f, "frozen:{j}"),
            Setting::Averaged => f.write_str("averaged"),
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pde" => Ok(Setting::Pde),
            "averaged" => Ok(Setting::Averaged),
            other => other
                .strip_prefix("frozen:")
                .and_then(|j| j.parse().ok())
                .map(Setting::FrozenX)
                .ok_or_else(|| {
                    Error::config("run.setting", format!("expected pde, averaged or frozen:<node>, got '{other}'"))
                }),
        }
    }
}

/// Period map `U(T,0)`, stored as `exp(log_scale) * matrix` with the largest
/// entry of `matrix` equal to one.
#[derive(Debug, Clone)]
pub struct MonodromyMap {
    pub matrix: DMatrix<f64>,
    pub log_scale: f64,
    pub period: f64,
    pub setting: Setting,
    pub bc: Option<BoundaryKind>,
    pub mu: Option<f64>,
    /// Entries in `(-EPS_POS, 0)` set to zero.
    pub clamped: usize,
    /// Entries below `-EPS_POS` (positivity failures, left in place).
    pub negative: usize,
}

impl MonodromyMap {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The unscaled map (may under/overflow for extreme scales).
    pub fn dense(&self) -> DMatrix<f64> {
        &self.matrix * self.log_scale.exp()
    }
}

/// LU factors of a banded matrix without pivoting (valid for nonsingular
/// M-matrices). Row-major band storage `band[i * w + (j + bw - i)]`.
#[derive(Debug, Clone)]
struct BandLu {
    dim: usize,
    bw: usize,
    band: Vec<f64>,
    inv_diag: Vec<f64>,
}

impl BandLu {
    fn width(&self) -> usize {
        2 * self.bw + 1
    }

    fn factor(dim: usize, bw: usize, mut band: Vec<f64>, time_index: usize) -> Result<Self> {
        let w = 2 * bw + 1;
        for k in 0..dim {
            let pivot = band[k * w + bw];
            if !pivot.is_finite() || pivot.abs() < 1e-300 {
                return Err(Error::SingularStep { time_index });
            }
            let i_end = (k + bw).min(dim - 1);
            for i in k + 1..=i_end {
                let l = band[i * w + (k + bw - i)] / pivot;
                band[i * w + (k + bw - i)] = l;
                if l != 0.0 {
                    for j in k + 1..=(k + bw).min(dim - 1) {
                        band[i * w + (j + bw - i)] -= l * band[k * w + (j + bw - k)];
                    }
                }
            }
        }
        let inv_diag = (0..dim).map(|k| 1.0 / band[k * w + bw]).collect();
        Ok(BandLu {
            dim,
            bw,
            band,
            inv_diag,
        })
    }

    /// Solve in place for a row-major block `x` of `dim x cols`.
    fn solve_block(&self, x: &mut [f64], cols: usize) {
        let (dim, bw, w) = (self.dim, self.bw, self.width());
        for i in 1..dim {
            let (head, tail) = x.split_at_mut(i * cols);
            let row = &mut tail[..cols];
            for j in i.saturating_sub(bw)..i {
                let l = self.band[i * w + (j + bw - i)];
                if l != 0.0 {
                    let src = &head[j * cols..(j + 1) * cols];
                    for (a, b) in row.iter_mut().zip(src) {
                        *a -= l * b;
                    }
                }
            }
        }
        for i in (0..dim).rev() {
            let (head, tail) = x.split_at_mut((i + 1) * cols);
            let row = &mut head[i * cols..];
            for j in i + 1..=(i + bw).min(dim - 1) {
                let u = self.band[i * w + (j + bw - i)];
                if u != 0.0 {
                    let src = &tail[(j - i - 1) * cols..(j - i) * cols];
                    for (a, b) in row.iter_mut().zip(src) {
                        *a -= u * b;
                    }
                }
            }
            let d = self.inv_diag[i];
            for a in row.iter_mut() {
                *a *= d;
            }
        }
    }
}

/// Assembled generator pieces of one setting, before factoring.
struct Generator<'a> {
    model: &'a ModelSpec,
    mu: Option<f64>,
    setting: Setting,
    n: usize,
    nodes: usize,
    first_node: usize,
    averaged: Option<Reaction>,
}

impl<'a> Generator<'a> {
    fn new(model: &'a ModelSpec, mu: Option<f64>, setting: Setting) -> Result<Self> {
        if let Some(m) = mu {
            if !(m > 0.0) {
                return Err(Error::Invalid(format!("mu must be positive, got {m}")));
            }
            if !model.reaction.is_split() {
                return Err(Error::MissingSplitForm);
            }
        }
        let n = model.n();
        let (nodes, first_node, averaged) = match setting {
            Setting::Pde => match model.boundary.kind {
                BoundaryKind::Dirichlet => (model.domain.n_x, 1, None),
                _ => (model.domain.n_nodes(), 0, None),
            },
            Setting::FrozenX(j) => {
                if j >= model.domain.n_nodes() {
                    return Err(Error::Invalid(format!("frozen node {j} outside grid")));
                }
                (1, j, None)
            }
            Setting::Averaged => (1, 0, Some(model.averaged_reaction())),
        };
        Ok(Generator {
            model,
            mu,
            setting,
            n,
            nodes,
            first_node,
            averaged,
        })
    }

    fn dim(&self) -> usize {
        self.n * self.nodes
    }

    fn bandwidth(&self) -> usize {
        match self.setting {
            Setting::Pde => self.n,
            _ => self.n - 1,
        }
    }

    fn reaction_block(&self, k: usize, local_node: usize, out: &mut [f64]) {
        match &self.averaged {
            Some(r) => r.generator_into(k, 0, self.mu, out),
            None => self
                .model
                .reaction
                .generator_into(k, self.first_node + local_node, self.mu, out),
        }
    }

    /// Band of `I - dt A(t_k)` and the largest reaction row sum.
    fn step_band(&self, k: usize, dt: f64) -> Result<(Vec<f64>, f64)> {
        let (n, dim, bw) = (self.n, self.dim(), self.bandwidth());
        let w = 2 * bw + 1;
        let mut band = vec![0.0; dim * w];
        let mut block = vec![0.0; n * n];
        let mut max_row = f64::NEG_INFINITY;
        for node in 0..self.nodes {
            self.reaction_block(k, node, &mut block);
            for i in 0..n {
                let row = node * n + i;
                let mut s = 0.0;
                for j in 0..n {
                    let col = node * n + j;
                    band[row * w + (col + bw - row)] -= dt * block[i * n + j];
                    s += block[i * n + j];
                }
                max_row = max_row.max(s);
            }
        }
        if self.setting == Setting::Pde {
            for i in 0..n {
                let op = assemble_diffusion(self.model, i, k)?;
                for r in 0..self.nodes {
                    let row = r * n + i;
                    band[row * w + bw] -= dt * op.diag[r];
                    if r > 0 {
                        let col = (r - 1) * n + i;
                        band[row * w + (col + bw - row)] -= dt * op.lower[r];
                    }
                    if r + 1 < self.nodes {
                        let col = (r + 1) * n + i;
                        band[row * w + (col + bw - row)] -= dt * op.upper[r];
                    }
                }
            }
        }
        for row in 0..dim {
            band[row * w + bw] += 1.0;
        }
        Ok((band, max_row))
    }

    /// Factors of `(1 + dt c) I - dt A(t_k)` and the shift `c`.
    ///
    /// `c = 0` whenever the plain backward-Euler matrix is a nonsingular
    /// M-matrix (all pivots positive). Otherwise
    /// `c = max(0, max_row_sum(reaction) - 0.5/dt)`, which makes it strictly
    /// diagonally dominant.
    fn step_factors(&self, k: usize, dt: f64) -> Result<(BandLu, f64)> {
        let (dim, bw) = (self.dim(), self.bandwidth());
        let w = 2 * bw + 1;
        let (band, max_row) = self.step_band(k, dt)?;
        if let Ok(lu) = BandLu::factor(dim, bw, band.clone(), k) {
            if lu.inv_diag.iter().all(|d| *d > 0.0 && d.is_finite()) {
                return Ok((lu, 0.0));
            }
        }
        let shift = (max_row - 0.5 / dt).max(0.0);
        let mut band = band;
        for row in 0..dim {
            band[row * w + bw] += dt * shift;
        }
        Ok((BandLu::factor(dim, bw, band, k)?, shift))
    }
}

/// Pre-factored one-period stepper for a model, `mu`, and setting.
pub struct Stepper {
    dim: usize,
    n_t: usize,
    dt: f64,
    period: f64,
    /// `factors[k]` advances from `t_k` to `t_{k+1}` (coefficients at `t_{k+1}`).
    factors: Vec<BandLu>,
    shifts: Vec<f64>,
    pub setting: Setting,
    pub bc: Option<BoundaryKind>,
    pub mu: Option<f64>,
}

impl Stepper {
    pub fn new(model: &ModelSpec, mu: Option<f64>, setting: Setting) -> Result<Self> {
        let gen = Generator::new(model, mu, setting)?;
        let n_t = model.tgrid.n_t;
        let dt = model.tgrid.dt();
        let dim = gen.dim();
        let mut factors = Vec::with_capacity(n_t);
        let mut shifts = Vec::with_capacity(n_t);
        for k in 0..n_t {
            let next = (k + 1) % n_t;
            let (lu, shift) = gen.step_factors(next, dt)?;
            factors.push(lu);
            shifts.push(shift);
        }
        Ok(Stepper {
            dim,
            n_t,
            dt,
            period: model.tgrid.period,
            factors,
            shifts,
            setting,
            bc: (setting == Setting::Pde).then_some(model.boundary.kind),
            mu,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Total exponent `dt * sum(shift)` over one period.
    pub fn period_shift(&self) -> f64 {
        self.dt * self.shifts.iter().sum::<f64>()
    }

    /// Exponent of the shift over steps `start..start+steps` (indices mod `n_t`).
    pub fn shift_between(&self, start: usize, steps: usize) -> f64 {
        (0..steps).map(|s| self.shifts[(start + s) % self.n_t]).sum::<f64>() * self.dt
    }

    /// Advance a row-major block (`dim x cols`) by one step from `t_k`, without
    /// the shift compensation factor.
    pub fn step_block(&self, k: usize, x: &mut [f64], cols: usize) {
        self.factors[k % self.n_t].solve_block(x, cols);
    }

    /// Propagate the columns of `x0` from `t_start` over `steps` steps. Returns
    /// the propagated block (row-major) and per-column natural-log scales,
    /// excluding the shift compensation.
    pub fn propagate(&self, start: usize, steps: usize, x: &mut [f64], cols: usize) -> Vec<f64> {
        let mut log_scale = vec![0.0; cols];
        for s in 0..steps {
            self.step_block(start + s, x, cols);
            if s % 8 == 7 || s + 1 == steps {
                rescale_columns(x, cols, &mut log_scale);
            }
        }
        log_scale
    }
}

fn rescale_columns(x: &mut [f64], cols: usize, log_scale: &mut [f64]) {
    let mut maxes = vec![0.0f64; cols];
    for row in x.chunks_exact(cols) {
        for (m, v) in maxes.iter_mut().zip(row) {
            *m = m.max(v.abs());
        }
    }
    let factors: Vec<f64> = maxes
        .iter()
        .zip(log_scale.iter_mut())
        .map(|(&m, ls)| {
            if m > 0.0 && m.is_finite() && !(1e-100..=1e100).contains(&m) {
                *ls += m.ln();
                1.0 / m
            } else {
                1.0
            }
        })
        .collect();
    if factors.iter().any(|&f| f != 1.0) {
        for row in x.chunks_exact_mut(cols) {
            for (v, f) in row.iter_mut().zip(&factors) {
                *v *= f;
            }
        }
    }
}

/// One backward-Euler step from `t_k` to `t_{k+1}` (no shift): solves
/// `(I - dt A(t_{k+1})) u_new = u_old`.
pub fn step_linear(
    state: &[f64],
    time_index: usize,
    model: &ModelSpec,
    mu: Option<f64>,
    setting: Setting,
) -> Result<Vec<f64>> {
    let gen = Generator::new(model, mu, setting)?;
    if state.len() != gen.dim() {
        return Err(Error::Shape(format!(
            "state has {} entries, setting needs {}",
            state.len(),
            gen.dim()
        )));
    }
    let next = (time_index + 1) % model.tgrid.n_t;
    let (band, _) = gen.step_band(next, model.tgrid.dt())?;
    let lu = BandLu::factor(gen.dim(), gen.bandwidth(), band, next)?;
    let mut x = state.to_vec();
    lu.solve_block(&mut x, 1);
    Ok(x)
}

const COLUMN_BLOCK: usize = 64;

/// Assemble the period map column by column from the canonical basis.
pub fn monodromy(model: &ModelSpec, mu: Option<f64>, setting: Setting) -> Result<MonodromyMap> {
    let stepper = Stepper::new(model, mu, setting)?;
    Ok(monodromy_from(&stepper))
}

pub fn monodromy_from(stepper: &Stepper) -> MonodromyMap {
    let dim = stepper.dim;
    let starts: Vec<usize> = (0..dim).step_by(COLUMN_BLOCK).collect();
    let blocks: Vec<(usize, Vec<f64>, Vec<f64>)> = starts
        .par_iter()
        .map(|&c0| {
            let cols = COLUMN_BLOCK.min(dim - c0);
            let mut x = vec![0.0; dim * cols];
            for c in 0..cols {
                x[(c0 + c) * cols + c] = 1.0;
            }
            let ls = stepper.propagate(0, stepper.n_t, &mut x, cols);
            (c0, x, ls)
        })
        .collect();

    let common = blocks
        .iter()
        .flat_map(|(_, _, ls)| ls.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut matrix = DMatrix::zeros(dim, dim);
    for (c0, x, ls) in &blocks {
        let cols = ls.len();
        for c in 0..cols {
            let f = (ls[c] - common).exp();
            for r in 0..dim {
                matrix[(r, c0 + c)] = x[r * cols + c] * f;
            }
        }
    }
    let max = matrix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut log_scale = common + stepper.period_shift();
    if max > 0.0 {
        matrix /= max;
        log_scale += max.ln();
    } else {
        log_scale = f64::NEG_INFINITY;
    }
    let (mut clamped, mut negative) = (0, 0);
    for v in matrix.iter_mut() {
        if *v < 0.0 {
            if *v > -EPS_POS {
                *v = 0.0;
                clamped += 1;
            } else {
                negative += 1;
            }
        }
    }
    MonodromyMap {
        matrix,
        log_scale,
        period: stepper.period,
        setting: stepper.setting,
        bc: stepper.bc,
        mu: stepper.mu,
        clamped,
        negative,
    }
}

/// Exponential growth bound `ln r(U(T,0)) / T`; `-inf` when `r = 0`.
pub fn growth_bound(map: &MonodromyMap) -> Result<f64> {
    if !map.log_scale.is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    let res = spectral::spectral_radius(&map.matrix, spectral::POWER_TOL)?;
    if res.radius <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((res.radius.ln() + map.log_scale) / map.period)
}

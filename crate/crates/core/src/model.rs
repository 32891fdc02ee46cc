//! Model definitions sampled on a uniform space-time grid.
//!
//! Spatial nodes are indexed `0..=n_x+1`; nodes `0` and `n_x+1` are the
//! endpoints of the interval. Time samples are `t_k = k * dt`, `k = 0..n_t`,
//! stored over one period.

use std::fmt;

use crate::config::{Config, ReactionForm};
use crate::error::{Error, Result};
use crate::evolve::{self, Setting};
use crate::expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub x_lo: f64,
    pub x_hi: f64,
    /// Interior grid points.
    pub n_x: usize,
}

impl Domain {
    pub fn new(x_lo: f64, x_hi: f64, n_x: usize) -> Result<Self> {
        if !(x_hi > x_lo) || !x_lo.is_finite() || !x_hi.is_finite() {
            return Err(Error::config("domain", "x_hi must exceed x_lo"));
        }
        if n_x < 3 {
            return Err(Error::config("domain.n_x", "need at least 3 interior points"));
        }
        Ok(Domain { x_lo, x_hi, n_x })
    }

    pub fn h(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.n_x + 1) as f64
    }

    /// Nodes including both endpoints.
    pub fn n_nodes(&self) -> usize {
        self.n_x + 2
    }

    pub fn node_x(&self, j: usize) -> f64 {
        if j == self.n_x + 1 {
            self.x_hi
        } else {
            self.x_lo + j as f64 * self.h()
        }
    }

    pub fn length(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    /// Composite trapezoid weights over all nodes, normalized to sum to one.
    pub fn average_weights(&self) -> Vec<f64> {
        let n = self.n_nodes();
        let w = 1.0 / (n - 1) as f64;
        (0..n)
            .map(|j| if j == 0 || j == n - 1 { 0.5 * w } else { w })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub period: f64,
    pub n_t: usize,
}

impl TimeGrid {
    pub fn new(period: f64, n_t: usize) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::config("time.period", "period must be positive"));
        }
        if n_t < 8 {
            return Err(Error::config("time.n_t", "need at least 8 steps per period"));
        }
        Ok(TimeGrid { period, n_t })
    }

    pub fn dt(&self) -> f64 {
        self.period / self.n_t as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
    Robin,
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryKind::Dirichlet => "dirichlet",
            BoundaryKind::Neumann => "neumann",
            BoundaryKind::Robin => "robin",
        })
    }
}

impl std::str::FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(BoundaryKind::Dirichlet),
            "neumann" => Ok(BoundaryKind::Neumann),
            "robin" => Ok(BoundaryKind::Robin),
            other => Err(Error::config(
                "boundary.kind",
                format!("unknown boundary kind '{other}'"),
            )),
        }
    }
}

/// Robin coefficients `b_i` at the two endpoints, one time series each.
#[derive(Debug, Clone, PartialEq)]
pub struct RobinCoefficients {
    /// `left[i][k] = b_i(x_lo, t_k)`
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
}

impl RobinCoefficients {
    pub fn constant(n: usize, n_t: usize, b: f64) -> Self {
        RobinCoefficients {
            left: vec![vec![b; n_t]; n],
            right: vec![vec![b; n_t]; n],
        }
    }

    pub fn min(&self) -> f64 {
        self.left
            .iter()
            .chain(&self.right)
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    pub kind: BoundaryKind,
    pub robin_b: Option<RobinCoefficients>,
}

impl BoundarySpec {
    pub fn dirichlet() -> Self {
        BoundarySpec {
            kind: BoundaryKind::Dirichlet,
            robin_b: None,
        }
    }

    pub fn neumann() -> Self {
        BoundarySpec {
            kind: BoundaryKind::Neumann,
            robin_b: None,
        }
    }

    pub fn robin(b: RobinCoefficients) -> Self {
        BoundarySpec {
            kind: BoundaryKind::Robin,
            robin_b: Some(b),
        }
    }

    fn validate(&self, n: usize, n_t: usize) -> Result<()> {
        match (self.kind, &self.robin_b) {
            (BoundaryKind::Robin, None) => Err(Error::MissingRobin),
            (BoundaryKind::Robin, Some(b)) => {
                if b.left.len() != n || b.right.len() != n {
                    return Err(Error::MissingRobin);
                }
                for (i, series) in b.left.iter().chain(&b.right).enumerate() {
                    if series.len() != n_t {
                        return Err(Error::Shape(format!(
                            "robin series has {} samples, expected {n_t}",
                            series.len()
                        )));
                    }
                    if let Some((k, &v)) = series.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                        return Err(Error::RobinSign {
                            component: i % n,
                            value: v,
                            time_index: k,
                        });
                    }
                }
                Ok(())
            }
            (_, Some(_)) => Err(Error::config(
                "boundary.b",
                "b[] is only allowed for the robin kind",
            )),
            _ => Ok(()),
        }
    }
}

/// Matrix-valued field sampled at every (time step, node).
///
/// Layout is `[k][node][row][col]`. A field with a single node is a
/// time-only field (the result of spatial averaging or a frozen-x slice).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    rows: usize,
    cols: usize,
    n_nodes: usize,
    n_t: usize,
    period: f64,
    data: Vec<f64>,
}

impl CoefficientField {
    pub fn from_fn(
        rows: usize,
        cols: usize,
        n_nodes: usize,
        tgrid: TimeGrid,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols * n_nodes * tgrid.n_t);
        for k in 0..tgrid.n_t {
            for node in 0..n_nodes {
                for r in 0..rows {
                    for c in 0..cols {
                        data.push(f(k, node, r, c));
                    }
                }
            }
        }
        CoefficientField {
            rows,
            cols,
            n_nodes,
            n_t: tgrid.n_t,
            period: tgrid.period,
            data,
        }
    }

    pub fn constant(rows: usize, cols: usize, n_nodes: usize, tgrid: TimeGrid, values: &[f64]) -> Self {
        assert_eq!(values.len(), rows * cols);
        Self::from_fn(rows, cols, n_nodes, tgrid, |_, _, r, c| values[r * cols + c])
    }

    /// Sample closed-form expressions on every node of `domain` and step of `tgrid`.
    pub fn sample(name: &str, exprs: &[Vec<Expr>], domain: &Domain, tgrid: TimeGrid) -> Result<Self> {
        let rows = exprs.len();
        let cols = exprs.first().map_or(0, Vec::len);
        if rows == 0 || exprs.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape(format!("{name}: ragged or empty entry table")));
        }
        let field = Self::from_fn(rows, cols, domain.n_nodes(), tgrid, |k, node, r, c| {
            exprs[r][c].eval(domain.node_x(node), tgrid.time(k), &[])
        });
        field.check_finite(name)?;
        Ok(field)
    }

    pub fn check_finite(&self, name: &str) -> Result<()> {
        for k in 0..self.n_t {
            for node in 0..self.n_nodes {
                if self.block(k, node).iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        field: name.to_string(),
                        node,
                        time_index: k,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    #[inline]
    pub fn get(&self, k: usize, node: usize, r: usize, c: usize) -> f64 {
        self.data[((k * self.n_nodes + node) * self.rows + r) * self.cols + c]
    }

    #[inline]
    pub fn block(&self, k: usize, node: usize) -> &[f64] {
        let sz = self.rows * self.cols;
        let start = (k * self.n_nodes + node) * sz;
        &self.data[start..start + sz]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid {
            period: self.period,
            n_t: self.n_t,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        CoefficientField {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// `alpha * self + beta * other`, shapes must agree.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if (self.rows, self.cols, self.n_nodes, self.n_t) != (other.rows, other.cols, other.n_nodes, other.n_t) {
            return Err(Error::Shape("combine: field shapes differ".into()));
        }
        Ok(CoefficientField {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
            ..self.clone()
        })
    }

    /// Restrict to one node, producing a time-only field.
    pub fn slice_node(&self, node: usize) -> Self {
        Self::from_fn(self.rows, self.cols, 1, self.time_grid(), |k, _, r, c| self.get(k, node, r, c))
    }

    /// Same entries at every node.
    pub fn is_x_independent(&self) -> bool {
        (0..self.n_t).all(|k| (1..self.n_nodes).all(|j| self.block(k, j) == self.block(k, 0)))
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Spatial average over the interval by composite trapezoid quadrature.
pub fn spatial_average(field: &CoefficientField, domain: &Domain) -> Result<CoefficientField> {
    if field.n_nodes() == 1 {
        return Ok(field.clone());
    }
    if field.n_nodes() != domain.n_nodes() {
        return Err(Error::Shape(format!(
            "field has {} nodes, domain has {}",
            field.n_nodes(),
            domain.n_nodes()
        )));
    }
    let w = domain.average_weights();
    Ok(CoefficientField::from_fn(
        field.rows(),
        field.cols(),
        1,
        field.time_grid(),
        |k, _, r, c| {
            w.iter()
                .enumerate()
                .map(|(j, wj)| wj * field.get(k, j, r, c))
                .sum()
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSpec {
    /// Per-component scale `kappa_i > 0`.
    pub kappa: Vec<f64>,
    /// Per-component coefficient `a_i(x,t)`, stored as an `n x 1` field.
    pub a: CoefficientField,
    pub a_lo: f64,
    pub a_hi: f64,
}

impl DiffusionSpec {
    pub fn new(kappa: Vec<f64>, a: CoefficientField) -> Result<Self> {
        for (i, &k) in kappa.iter().enumerate() {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::NonPositiveDiffusion { component: i, value: k });
            }
        }
        if a.rows() != kappa.len() || a.cols() != 1 {
            return Err(Error::Shape(format!(
                "diffusion.a has {} entries, expected {}",
                a.rows(),
                kappa.len()
            )));
        }
        let mut a_lo = f64::INFINITY;
        for k in 0..a.n_t() {
            for node in 0..a.n_nodes() {
                for i in 0..a.rows() {
                    let v = a.get(k, node, i, 0);
                    if !(v > 0.0) {
                        return Err(Error::Ellipticity {
                            component: i,
                            min: v,
                            node,
                            time_index: k,
                        });
                    }
                    a_lo = a_lo.min(v);
                }
            }
        }
        let a_hi = a.max_entry();
        Ok(DiffusionSpec { kappa, a, a_lo, a_hi })
    }

    /// Unit coefficients `a_i = 1`.
    pub fn uniform(kappa: Vec<f64>, n_nodes: usize, tgrid: TimeGrid) -> Result<Self> {
        let n = kappa.len();
        Self::new(kappa, CoefficientField::constant(n, 1, n_nodes, tgrid, &vec![1.0; n]))
    }

    pub fn with_kappa(&self, kappa: Vec<f64>) -> Result<Self> {
        Self::new(kappa, self.a.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reaction {
    Combined { m: CoefficientField },
    Split { v: CoefficientField, f: CoefficientField },
}

impl Reaction {
    pub fn n(&self) -> usize {
        match self {
            Reaction::Combined { m } => m.rows(),
            Reaction::Split { v, .. } => v.rows(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            Reaction::Combined { m } => m.n_nodes(),
            Reaction::Split { v, .. } => v.n_nodes(),
        }
    }

    pub fn is_split(&self) -> bool {
        matches!(self, Reaction::Split { .. })
    }

    /// Write the generator `M` (combined) or `-V + F/mu` (split, `mu` defaults to 1)
    /// at `(k, node)` into `out` (row-major `n x n`).
    #[inline]
    pub fn generator_into(&self, k: usize, node: usize, mu: Option<f64>, out: &mut [f64]) {
        match self {
            Reaction::Combined { m } => out.copy_from_slice(m.block(k, node)),
            Reaction::Split { v, f } => {
                let inv_mu = 1.0 / mu.unwrap_or(1.0);
                for ((o, a), b) in out.iter_mut().zip(v.block(k, node)).zip(f.block(k, node)) {
                    *o = -a + inv_mu * b;
                }
            }
        }
    }

    /// The combined generator as an explicit field.
    pub fn combined_field(&self, mu: Option<f64>) -> CoefficientField {
        match self {
            Reaction::Combined { m } => m.clone(),
            Reaction::Split { v, f } => v
                .combine(-1.0, f, 1.0 / mu.unwrap_or(1.0))
                .expect("split fields share a shape"),
        }
    }

    pub fn map_fields(&self, g: impl Fn(&CoefficientField) -> CoefficientField) -> Reaction {
        match self {
            Reaction::Combined { m } => Reaction::Combined { m: g(m) },
            Reaction::Split { v, f } => Reaction::Split { v: g(v), f: g(f) },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub domain: Domain,
    pub tgrid: TimeGrid,
    pub diffusion: DiffusionSpec,
    pub boundary: BoundarySpec,
    pub reaction: Reaction,
}

impl ModelSpec {
    pub fn new(
        domain: Domain,
        tgrid: TimeGrid,
        diffusion: DiffusionSpec,
        boundary: BoundarySpec,
        reaction: Reaction,
    ) -> Result<Self> {
        let n = reaction.n();
        let model = ModelSpec {
            domain,
            tgrid,
            diffusion,
            boundary,
            reaction,
        };
        if model.diffusion.kappa.len() != n {
            return Err(Error::Shape(format!(
                "diffusion.kappa has {} entries, reaction is {n}x{n}",
                model.diffusion.kappa.len()
            )));
        }
        let fields: Vec<&CoefficientField> = match &model.reaction {
            Reaction::Combined { m } => vec![m],
            Reaction::Split { v, f } => vec![v, f],
        };
        for fld in fields.into_iter().chain(std::iter::once(&model.diffusion.a)) {
            if fld.n_nodes() != domain.n_nodes() || fld.n_t() != tgrid.n_t {
                return Err(Error::Shape(format!(
                    "field sampled on {}x{} grid, model grid is {}x{}",
                    fld.n_nodes(),
                    fld.n_t(),
                    domain.n_nodes(),
                    tgrid.n_t
                )));
            }
        }
        if let Reaction::Split { v, f } = &model.reaction {
            if v.rows() != v.cols() || f.rows() != n || f.cols() != n {
                return Err(Error::Shape("V and F must both be n x n".into()));
            }
        } else if let Reaction::Combined { m } = &model.reaction {
            if m.rows() != m.cols() {
                return Err(Error::Shape("M must be square".into()));
            }
        }
        model.boundary.validate(n, tgrid.n_t)?;
        model.check_step_bound()?;
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.reaction.n()
    }

    /// `dt <= 0.5 / max |m_ii|` over all samples of the combined generator.
    pub fn check_step_bound(&self) -> Result<()> {
        let m = self.reaction.combined_field(None);
        let n = self.n();
        let mut max_diag: f64 = 0.0;
        for k in 0..m.n_t() {
            for node in 0..m.n_nodes() {
                for i in 0..n {
                    max_diag = max_diag.max(m.get(k, node, i, i).abs());
                }
            }
        }
        let dt = self.tgrid.dt();
        if dt * max_diag > 0.5 {
            return Err(Error::StepBound {
                dt,
                max_diag,
                suggested_n_t: (2.0 * self.tgrid.period * max_diag).ceil() as usize,
            });
        }
        Ok(())
    }

    pub fn with_kappa(&self, kappa: &[f64]) -> Result<Self> {
        let mut m = self.clone();
        m.diffusion = self.diffusion.with_kappa(kappa.to_vec())?;
        Ok(m)
    }

    pub fn with_boundary(&self, boundary: BoundarySpec) -> Result<Self> {
        boundary.validate(self.n(), self.tgrid.n_t)?;
        let mut m = self.clone();
        m.boundary = boundary;
        Ok(m)
    }

    pub fn with_reaction(&self, reaction: Reaction) -> Result<Self> {
        ModelSpec::new(
            self.domain,
            self.tgrid,
            self.diffusion.clone(),
            self.boundary.clone(),
            reaction,
        )
    }

    /// The model with `F` dropped: generator `-V` (or `M` unchanged for combined form).
    pub fn decay_part(&self) -> Self {
        match &self.reaction {
            Reaction::Combined { .. } => self.clone(),
            Reaction::Split { v, .. } => {
                let mut m = self.clone();
                m.reaction = Reaction::Combined { m: v.map(|x| -x) };
                m
            }
        }
    }

    /// Reaction with every field replaced by its spatial average (single node).
    pub fn averaged_reaction(&self) -> Reaction {
        self.reaction
            .map_fields(|f| spatial_average(f, &self.domain).expect("model fields match the domain"))
    }
}

/// Build a model from a parsed configuration.
pub fn build_model(config: &Config) -> Result<ModelSpec> {
    let domain_cfg = config.domain.as_ref().ok_or_else(|| Error::config("domain", "missing section"))?;
    let time_cfg = config.time.as_ref().ok_or_else(|| Error::config("time", "missing section"))?;
    let domain = Domain::new(domain_cfg.x_lo, domain_cfg.x_hi, domain_cfg.n_x)?;
    let tgrid = TimeGrid::new(time_cfg.period, time_cfg.n_t)?;

    let reaction_cfg = config
        .reaction
        .as_ref()
        .ok_or_else(|| Error::config("reaction", "missing section"))?;
    let parse_table = |key: &str, table: &Option<Vec<Vec<crate::config::Scalar>>>| -> Result<Vec<Vec<Expr>>> {
        let table = table
            .as_ref()
            .ok_or_else(|| Error::config(key, "missing entry table"))?;
        table
            .iter()
            .map(|row| row.iter().map(|s| s.to_expr()).collect::<Result<Vec<_>>>())
            .collect()
    };
    let reaction = match reaction_cfg.form {
        ReactionForm::Combined => {
            let m = parse_table("reaction.entries", &reaction_cfg.entries)?;
            Reaction::Combined {
                m: CoefficientField::sample("reaction.entries", &m, &domain, tgrid)?,
            }
        }
        ReactionForm::Split => {
            let v = parse_table("reaction.v", &reaction_cfg.v)?;
            let f = parse_table("reaction.f", &reaction_cfg.f)?;
            Reaction::Split {
                v: CoefficientField::sample("reaction.v", &v, &domain, tgrid)?,
                f: CoefficientField::sample("reaction.f", &f, &domain, tgrid)?,
            }
        }
    };
    let n = reaction.n();

    let diffusion = match &config.diffusion {
        Some(d) => {
            let kappa = d.kappa.clone();
            if kappa.len() != n {
                return Err(Error::config(
                    "diffusion.kappa",
                    format!("expected {n} entries, got {}", kappa.len()),
                ));
            }
            for (i, &k) in kappa.iter().enumerate() {
                if !(k > 0.0) {
                    return Err(Error::config(
                        format!("diffusion.kappa[{i}]"),
                        format!("non-positive diffusion {k}"),
                    ));
                }
            }
            let a_exprs: Vec<Vec<Expr>> = match &d.a {
                Some(a) if a.len() == n => a.iter().map(|s| s.to_expr().map(|e| vec![e])).collect::<Result<_>>()?,
                Some(a) => {
                    return Err(Error::config(
                        "diffusion.a",
                        format!("expected {n} entries, got {}", a.len()),
                    ))
                }
                None => vec![vec![Expr::constant(1.0)]; n],
            };
            let a = CoefficientField::sample("diffusion.a", &a_exprs, &domain, tgrid)?;
            DiffusionSpec::new(kappa, a)?
        }
        None => DiffusionSpec::uniform(vec![1.0; n], domain.n_nodes(), tgrid)?,
    };

    let boundary = match &config.boundary {
        None => BoundarySpec::neumann(),
        Some(b) => {
            let kind: BoundaryKind = b.kind.parse()?;
            match (kind, &b.b) {
                (BoundaryKind::Robin, None) => return Err(Error::MissingRobin),
                (BoundaryKind::Robin, Some(list)) => {
                    if list.len() != n {
                        return Err(Error::MissingRobin);
                    }
                    let exprs = list.iter().map(|s| s.to_expr()).collect::<Result<Vec<_>>>()?;
                    let series = |x: f64| -> Vec<Vec<f64>> {
                        exprs
                            .iter()
                            .map(|e| (0..tgrid.n_t).map(|k| e.eval(x, tgrid.time(k), &[])).collect())
                            .collect()
                    };
                    BoundarySpec::robin(RobinCoefficients {
                        left: series(domain.x_lo),
                        right: series(domain.x_hi),
                    })
                }
                (_, Some(_)) => {
                    return Err(Error::config("boundary.b", "only allowed for robin boundaries"))
                }
                (k, None) => BoundarySpec { kind: k, robin_b: None },
            }
        }
    };

    ModelSpec::new(domain, tgrid, diffusion, boundary, reaction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// Off-diagonal entries of `M` (or `-V`) nonnegative.
    Cooperative,
    /// `F` entrywise nonnegative.
    FNonnegative,
    /// `omega(Gamma_x) < 0` at every node.
    DecayFrozen,
    /// `omega` of the averaged decay system negative.
    DecayAveraged,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Assumption::Cooperative => "cooperative",
            Assumption::FNonnegative => "F_nonnegative",
            Assumption::DecayFrozen => "omega_Gamma_x_negative",
            Assumption::DecayAveraged => "omega_Gamma_tilde_negative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    /// Grid node (`None` for averaged quantities).
    pub node: Option<usize>,
    pub x: Option<f64>,
    pub time_index: Option<usize>,
    pub entry: Option<(usize, usize)>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub cooperative_ok: bool,
    pub f_nonneg_ok: bool,
    pub omega_gamma_negative: bool,
    /// `max_x omega(Gamma_x)`; `None` for combined-form models.
    pub omega_gamma_max: Option<f64>,
    pub omega_gamma_tilde_negative: bool,
    pub omega_gamma_tilde: Option<f64>,
    /// First violations found, capped at [`AssumptionReport::MAX_LISTED`] per assumption.
    pub violations: Vec<(Assumption, Location)>,
    pub violation_count: usize,
}

impl AssumptionReport {
    pub const MAX_LISTED: usize = 32;

    pub fn all_ok(&self) -> bool {
        self.cooperative_ok && self.f_nonneg_ok && self.omega_gamma_negative && self.omega_gamma_tilde_negative
    }
}

/// Check cooperativity and sign structure on every sample, and compute the
/// decay growth bounds of the frozen-x and averaged `-V` systems.
pub fn validate_assumptions(model: &ModelSpec) -> Result<AssumptionReport> {
    let n = model.n();
    let mut violations = Vec::new();
    let mut listed = [0usize; 4];
    let mut count = 0usize;
    let mut push = |a: Assumption, loc: Location, violations: &mut Vec<(Assumption, Location)>| {
        count += 1;
        let slot = a as usize;
        if listed[slot] < AssumptionReport::MAX_LISTED {
            listed[slot] += 1;
            violations.push((a, loc));
        }
    };

    // M for combined form, -V for split form
    let coop_field = model.decay_part().reaction.combined_field(None);
    let mut cooperative_ok = true;
    let mut f_nonneg_ok = true;
    for k in 0..model.tgrid.n_t {
        for node in 0..model.domain.n_nodes() {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let v = coop_field.get(k, node, i, j);
                        if v < 0.0 {
                            cooperative_ok = false;
                            push(Assumption::Cooperative, loc(model, node, k, (i, j), v), &mut violations);
                        }
                    }
                    if let Reaction::Split { f, .. } = &model.reaction {
                        let v = f.get(k, node, i, j);
                        if v < 0.0 {
                            f_nonneg_ok = false;
                            push(Assumption::FNonnegative, loc(model, node, k, (i, j), v), &mut violations);
                        }
                    }
                }
            }
        }
    }

    let (mut omega_gamma_negative, mut omega_gamma_max) = (true, None);
    let (mut omega_gamma_tilde_negative, mut omega_gamma_tilde) = (true, None);
    if model.reaction.is_split() && cooperative_ok {
        let decay = model.decay_part();
        let mut max_omega = f64::NEG_INFINITY;
        for node in 0..model.domain.n_nodes() {
            let map = evolve::monodromy(&decay, None, Setting::FrozenX(node))?;
            let w = evolve::growth_bound(&map)?;
            if !(w < 0.0) {
                omega_gamma_negative = false;
                let mut l = loc(model, node, 0, (0, 0), w);
                l.time_index = None;
                l.entry = None;
                push(Assumption::DecayFrozen, l, &mut violations);
            }
            max_omega = max_omega.max(w);
        }
        omega_gamma_max = Some(max_omega);
        let map = evolve::monodromy(&decay, None, Setting::Averaged)?;
        let w = evolve::growth_bound(&map)?;
        omega_gamma_tilde = Some(w);
        if !(w < 0.0) {
            omega_gamma_tilde_negative = false;
            push(
                Assumption::DecayAveraged,
                Location {
                    node: None,
                    x: None,
                    time_index: None,
                    entry: None,
                    value: w,
                },
                &mut violations,
            );
        }
    } else if model.reaction.is_split() {
        // monodromy positivity is not guaranteed without cooperativity
        omega_gamma_negative = false;
        omega_gamma_tilde_negative = false;
    }

    Ok(AssumptionReport {
        cooperative_ok,
        f_nonneg_ok,
        omega_gamma_negative,
        omega_gamma_max,
        omega_gamma_tilde_negative,
        omega_gamma_tilde,
        violations,
        violation_count: count,
    })
}

fn loc(model: &ModelSpec, node: usize, k: usize, entry: (usize, usize), value: f64) -> Location {
    Location {
        node: Some(node),
        x: Some(model.domain.node_x(node)),
        time_index: Some(k),
        entry: Some(entry),
        value,
    }
}

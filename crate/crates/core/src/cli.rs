//! Command-line driver: `validate | eig | r0 | sweep | periodic | zika`.
//!
//! Every run writes `summary.txt` and its CSV tables into `--out`. Each CSV
//! starts with a `#` line carrying the config hash and grid resolution,
//! followed by the header row.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{config_hash, Config};
use crate::error::{Error, Result};
use crate::evolve::Setting;
use crate::model::{self, ModelSpec};
use crate::periodic::{self, GapTable};
use crate::r0::{self, fmt_num, R0Options, SweepKind};
use crate::spectral;
use crate::zika::{self, ZikaParams};

/// Default diffusion multipliers for sweeps.
const DEFAULT_SWEEP: [f64; 8] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0];

#[derive(Debug, Parser)]
#[command(name = "periodic-r0", version, about = "Reproduction ratios and principal eigenvalues of periodic reaction-diffusion systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Model configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Dotted-key override, e.g. `--set diffusion.kappa=[0.1]`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Seed recorded with the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write 0 in timing columns so repeated runs are byte-identical.
    #[arg(long, global = true)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check cooperativity, sign and decay assumptions.
    Validate,
    /// Principal eigenvalue and eigenfunction.
    Eig,
    /// Basic reproduction ratio.
    R0,
    /// R0 or eigenvalue along a diffusion sweep, with limit endpoints.
    Sweep {
        /// `r0` or `eigenvalue` (overrides `run.what`).
        #[arg(long)]
        what: Option<String>,
    },
    /// Positive periodic solution of the nonlinear system and its limits.
    Periodic,
    /// Zika vector-host model: V*, R0 and limits.
    Zika,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Eig => "eig",
            Command::R0 => "r0",
            Command::Sweep { .. } => "sweep",
            Command::Periodic => "periodic",
            Command::Zika => "zika",
        }
    }
}

/// Run with `argv` (including the program name) and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.common.jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.command.name());
            if e.is_config_error() {
                2
            } else {
                1
            }
        }
    }
}

struct Run {
    out: PathBuf,
    stamp: String,
    summary: String,
    with_timing: bool,
}

impl Run {
    fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.summary, "{key}: {value}");
    }

    fn csv(&self, name: &str, body: &[u8]) -> Result<()> {
        let mut bytes = format!("# {}\n", self.stamp).into_bytes();
        bytes.extend_from_slice(body);
        fs::write(self.out.join(name), bytes)?;
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        fs::write(self.out.join("summary.txt"), &self.summary)?;
        Ok(())
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let c = &cli.common;
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| Error::config("--config", "a configuration file is required"))?;
    let src = fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    let config = Config::from_toml_with_overrides(&src, &c.overrides)?;
    let hash = config_hash(&src, &c.overrides)?;
    let (n_x, n_t) = match (&config.domain, &config.time) {
        (Some(d), Some(t)) => (d.n_x, t.n_t),
        (None, _) => return Err(Error::config("domain", "missing section")),
        (_, None) => return Err(Error::config("time", "missing section")),
    };
    fs::create_dir_all(&c.out)?;
    let mut run = Run {
        out: c.out.clone(),
        stamp: format!("config_hash={hash} n_x={n_x} n_t={n_t}"),
        summary: String::new(),
        with_timing: !c.no_timing,
    };
    run.line("command", cli.command.name());
    run.line("config", path.display());
    run.line("config_hash", &hash);
    run.line("n_x", n_x);
    run.line("n_t", n_t);
    run.line("seed", c.seed);
    for ov in &c.overrides {
        run.line("override", ov);
    }

    let code = match &cli.command {
        Command::Validate => cmd_validate(&config, &mut run)?,
        Command::Eig => cmd_eig(&config, &mut run)?,
        Command::R0 => cmd_r0(&config, &mut run)?,
        Command::Sweep { what } => cmd_sweep(&config, what.as_deref(), &mut run)?,
        Command::Periodic => cmd_periodic(&config, &mut run)?,
        Command::Zika => cmd_zika(&config, &mut run)?,
    };
    run.finish()?;
    Ok(code)
}

fn r0_options(config: &Config) -> Result<R0Options> {
    let mut o = R0Options::default();
    if let Some(r) = &config.run {
        if let Some(v) = r.mu_min {
            o.mu_min = v;
        }
        if let Some(v) = r.mu_max {
            o.mu_max = v;
        }
        if let Some(v) = r.tol_mu {
            o.tol_mu = v;
        }
    }
    if !(o.mu_min > 0.0 && o.mu_max > o.mu_min) {
        return Err(Error::config("run.mu_min", "need 0 < mu_min < mu_max"));
    }
    if !(o.tol_mu > 0.0) {
        return Err(Error::config("run.tol_mu", "must be positive"));
    }
    Ok(o)
}

fn setting(config: &Config) -> Result<Setting> {
    match config.run.as_ref().and_then(|r| r.setting.as_deref()) {
        Some(s) => s.parse(),
        None => Ok(Setting::Pde),
    }
}

fn multipliers(config: &Config) -> Result<Vec<f64>> {
    let m = config
        .run
        .as_ref()
        .and_then(|r| r.kappa_sweep.clone())
        .unwrap_or_else(|| DEFAULT_SWEEP.to_vec());
    if m.is_empty() || m.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::config("run.kappa_sweep", "entries must be positive"));
    }
    let mut m = m;
    m.sort_by(f64::total_cmp);
    Ok(m)
}

fn scaled(base: &[f64], m: &[f64]) -> Vec<Vec<f64>> {
    m.iter().map(|s| base.iter().map(|k| k * s).collect()).collect()
}

fn csv_bytes(f: impl FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        f(&mut w)?;
        w.flush()?;
    }
    Ok(buf)
}

fn cmd_validate(config: &Config, run: &mut Run) -> Result<i32> {
    let mut ok = true;
    if config.reaction.is_some() {
        let model = model::build_model(config)?;
        let rep = model::validate_assumptions(&model)?;
        run.line("cooperative", rep.cooperative_ok);
        run.line("f_nonnegative", rep.f_nonneg_ok);
        run.line("omega_gamma_x_negative", rep.omega_gamma_negative);
        if let Some(w) = rep.omega_gamma_max {
            run.line("omega_gamma_x_max", fmt_num(w));
        }
        run.line("omega_gamma_tilde_negative", rep.omega_gamma_tilde_negative);
        if let Some(w) = rep.omega_gamma_tilde {
            run.line("omega_gamma_tilde", fmt_num(w));
        }
        run.line("violations", rep.violation_count);
        let body = csv_bytes(|w| {
            w.write_record(["assumption", "node", "x", "time_index", "row", "col", "value"])?;
            for (a, l) in &rep.violations {
                let opt = |v: Option<usize>| v.map_or(String::new(), |v| v.to_string());
                w.write_record([
                    a.to_string(),
                    opt(l.node),
                    l.x.map_or(String::new(), fmt_num),
                    opt(l.time_index),
                    opt(l.entry.map(|e| e.0 + 1)),
                    opt(l.entry.map(|e| e.1 + 1)),
                    fmt_num(l.value),
                ])?;
            }
            Ok(())
        })?;
        run.csv("violations.csv", &body)?;
        ok &= rep.all_ok();
    }
    if config.nonlinear.is_some() {
        let nl = periodic::build_nonlinear(config)?;
        let h = nl.validate();
        run.line("h1_cooperative", h.h1_ok);
        run.line("h3_subsolution", h.h3_ok);
        run.line("h4_supersolution", h.h4_ok);
        run.line("h4_tau_upper", h.tau_upper);
        run.line("h4_margin", fmt_num(h.h4_margin));
        for m in &h.messages {
            run.line("hypothesis_message", m);
        }
        ok &= h.ok();
    }
    if config.zika.is_some() {
        ZikaParams::from_config(config)?;
        run.line("zika_parameters", "valid");
    }
    if config.reaction.is_none() && config.nonlinear.is_none() && config.zika.is_none() {
        return Err(Error::config("reaction", "nothing to validate"));
    }
    run.line("status", if ok { "ok" } else { "violations" });
    if !ok {
        eprintln!("validate: assumptions violated, see summary.txt");
    }
    Ok(if ok { 0 } else { 1 })
}

fn cmd_eig(config: &Config, run: &mut Run) -> Result<i32> {
    let model = model::build_model(config)?;
    let p = spectral::principal_eigenvalue(&model, &model.boundary)?;
    run.line("boundary", p.bc);
    run.line("kappa", format!("{:?}", p.kappa));
    run.line("lambda_star", fmt_num(p.lambda_star));
    run.line("spectral_method", format!("{:?}", p.diagnostics.method));
    run.line("spectral_iterations", p.diagnostics.iterations);
    run.line("spectral_residual", fmt_num(p.diagnostics.residual));
    let body = csv_bytes(|w| {
        let mut header = vec!["time_index".to_string(), "t".into(), "node".into(), "x".into()];
        header.extend((1..=p.n).map(|i| format!("phi_{i}")));
        w.write_record(&header)?;
        for k in 0..p.n_t {
            for j in 0..p.n_nodes {
                let mut rec = vec![
                    k.to_string(),
                    fmt_num(model.tgrid.time(k)),
                    j.to_string(),
                    fmt_num(model.domain.node_x(j)),
                ];
                rec.extend((0..p.n).map(|i| fmt_num(p.eigenfunction_at(k, j, i))));
                w.write_record(&rec)?;
            }
        }
        Ok(())
    })?;
    run.csv("eigenfunction.csv", &body)?;
    Ok(0)
}

fn cmd_r0(config: &Config, run: &mut Run) -> Result<i32> {
    let model = model::build_model(config)?;
    let setting = setting(config)?;
    let opts = r0_options(config)?;
    let r = r0::r0_bisect(&model, setting, &opts)?;
    run.line("setting", setting);
    run.line("boundary", model.boundary.kind);
    run.line("r0", fmt_num(r.value));
    run.line("status", r.status);
    run.line("bracket", format!("[{}, {}]", fmt_num(r.bracket.0), fmt_num(r.bracket.1)));
    run.line("omega_at_value", fmt_num(r.omega_at_value));
    let body = csv_bytes(|w| {
        w.write_record(["mu", "omega"])?;
        for (mu, om) in &r.omega_trace {
            w.write_record([fmt_num(*mu), fmt_num(*om)])?;
        }
        Ok(())
    })?;
    run.csv("omega_trace.csv", &body)?;
    Ok(0)
}

fn cmd_sweep(config: &Config, what: Option<&str>, run: &mut Run) -> Result<i32> {
    let what: SweepKind = match what.or(config.run.as_ref().and_then(|r| r.what.as_deref())) {
        Some(s) => s.parse()?,
        None => SweepKind::R0,
    };
    let opts = r0_options(config)?;
    let mult = multipliers(config)?;
    let report = if config.zika.is_some() && config.reaction.is_none() {
        if what != SweepKind::R0 {
            return Err(Error::config("run.what", "zika sweeps compute r0 only"));
        }
        let params = ZikaParams::from_config(config)?;
        let kappas: Vec<f64> = mult.iter().map(|m| m * params.kappa1.max(params.kappa2)).collect();
        run.line("path", "kappa_1 = kappa_2");
        zika::zika_sweep(&params, &kappas, &opts)?
    } else {
        let model = model::build_model(config)?;
        let grid = scaled(&model.diffusion.kappa, &mult);
        r0::sweep(&model, &grid, &model.boundary.clone(), what, &opts)?
    };
    run.line("what", if what == SweepKind::R0 { "r0" } else { "eigenvalue" });
    run.line("boundary", report.bc);
    run.line("points", report.rows.len());
    run.line("limit_small", fmt_num(report.limit_small));
    run.line("limit_large", fmt_num(report.limit_large));
    if let Some((eta, eta_t)) = report.eta_values {
        run.line("eta", fmt_num(eta));
        run.line("eta_tilde", fmt_num(eta_t));
    }
    let (g0, g1) = report.endpoint_gaps();
    if let Some(g) = g0 {
        run.line("gap_small_relative", fmt_num(g));
    }
    if let Some(g) = g1 {
        run.line("gap_large_relative", fmt_num(g));
    }
    for n in &report.monotonicity_notes {
        run.line("note", n);
    }
    for (k, e) in &report.failures {
        run.line("failed_point", format!("{k:?}: {e}"));
    }
    let mut body = Vec::new();
    report.write_csv(&mut body, run.with_timing)?;
    run.csv("sweep.csv", &body)?;
    Ok(if report.failures.is_empty() { 0 } else { 1 })
}

fn write_solution(run: &Run, name: &str, sol: &periodic::PeriodicSolution, model: &ModelSpec) -> Result<()> {
    let body = csv_bytes(|w| {
        let mut header = vec!["time_index".to_string(), "t".into(), "node".into(), "x".into()];
        header.extend((1..=sol.n).map(|i| format!("w_{i}")));
        w.write_record(&header)?;
        for k in 0..sol.n_t {
            for j in 0..sol.n_nodes {
                let x = match sol.setting {
                    Setting::Pde => fmt_num(model.domain.node_x(j)),
                    Setting::FrozenX(f) => fmt_num(model.domain.node_x(f)),
                    Setting::Averaged => String::new(),
                };
                let mut rec = vec![k.to_string(), fmt_num(model.tgrid.time(k)), j.to_string(), x];
                rec.extend((0..sol.n).map(|i| fmt_num(sol.at(k, j, i))));
                w.write_record(&rec)?;
            }
        }
        Ok(())
    })?;
    run.csv(name, &body)
}

fn write_gaps(run: &Run, name: &str, table: &GapTable) -> Result<()> {
    let mut body = Vec::new();
    table.write_csv(&mut body)?;
    run.csv(name, &body)
}

fn cmd_periodic(config: &Config, run: &mut Run) -> Result<i32> {
    let nl = periodic::build_nonlinear(config)?;
    let setting = setting(config)?;
    let sol = periodic::solve_periodic(&nl, setting)?;
    run.line("setting", setting);
    run.line("residual", fmt_num(sol.residual));
    run.line("periods", sol.periods);
    run.line("two_sided_gap", fmt_num(sol.two_sided_gap));
    run.line("two_sided_agree", sol.two_sided_ok(nl.tol_fp));
    run.line("w_sup", fmt_num(sol.sup_norm()));
    run.line("w_hat_sup", fmt_num(sol.w_hat_norm));
    write_solution(run, "solution.csv", &sol, &nl.shell)?;
    if config.run.as_ref().is_some_and(|r| r.kappa_sweep.is_some()) && setting == Setting::Pde {
        let mult = multipliers(config)?;
        let ascending = scaled(&nl.shell.diffusion.kappa, &mult);
        let descending: Vec<Vec<f64>> = ascending.iter().rev().cloned().collect();
        let zero = periodic::limit_check_zero(&nl, &descending)?;
        let inf = periodic::limit_check_infty(&nl, &ascending)?;
        run.line("w0_sup", fmt_num(zero.limit_norm));
        run.line("w_tilde_inf_sup", fmt_num(inf.limit_norm));
        run.line("zero_limit_monotone", zero.monotone_within(|r| r.gap_sup, 0.1));
        run.line("large_limit_monotone", inf.monotone_within(|r| r.gap_hat, 0.1));
        write_gaps(run, "gaps_zero.csv", &zero)?;
        write_gaps(run, "gaps_infinity.csv", &inf)?;
    }
    Ok(0)
}

fn cmd_zika(config: &Config, run: &mut Run) -> Result<i32> {
    let params = ZikaParams::from_config(config)?;
    let opts = r0_options(config)?;
    let (model, vstar) = zika::linearize(&params)?;
    let r = r0::r0_bisect(&model, Setting::Pde, &opts)?;
    let limits = zika::zika_limits(&params, &opts)?;
    run.line("kappa1", fmt_num(params.kappa1));
    run.line("kappa2", fmt_num(params.kappa2));
    run.line("vstar_residual", fmt_num(vstar.residual));
    run.line("vstar_periods", vstar.periods);
    run.line("vstar_min", fmt_num(vstar.w.iter().copied().fold(f64::INFINITY, f64::min)));
    run.line("vstar_max", fmt_num(vstar.sup_norm()));
    run.line("r0", fmt_num(r.value));
    run.line("status", r.status);
    run.line("limit_small", fmt_num(limits.small));
    run.line("limit_small_argmax_x", fmt_num(limits.small_argmax_x));
    run.line("limit_large", fmt_num(limits.large));
    write_solution(run, "vstar.csv", &vstar, &model)?;
    Ok(0)
}

//! Executes one experiment and collects every assertion it makes.
//!
//! Nothing here touches the filesystem: outputs are returned as an ordered
//! list of `(file name, contents)` and written by [`write_outputs`].

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use lsmass::functionals::{
    build_report, check_derivative, default_t_grid, eval_any, log_grid, sweep, t_floor, LevelSetSample,
    MonotonicityReport, SkippedLevel,
};
use lsmass::grid::{
    extract_level_surface, solve_green_3d, surface_integrals, ConformalField, FieldHeader, GridSolution, GridSpec,
    SolverOptions,
};
use lsmass::identities::{default_radii, identity_suite, integral_consistency, samples_to_csv, IdentityTag};
use lsmass::mass::{fit_expansion, ip_limit, ip_profile, mass_report, penrose_check};
use lsmass::{MetricKind, MetricModel, RadialGrid, RadialSolution};

use crate::config::{ExperimentConfig, Mode, TGrid};

/// Subcommands of the driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Sweep,
    Adm,
    Penrose,
    Identities,
    Fit,
    Grid3d,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Adm => "adm",
            Command::Penrose => "penrose",
            Command::Identities => "identities",
            Command::Fit => "fit",
            Command::Grid3d => "grid3d",
        }
    }

    fn accepts(self, mode: Mode) -> bool {
        match self {
            Command::Solve => true,
            Command::Sweep => matches!(mode, Mode::GreenSweep | Mode::PSweep),
            Command::Adm => mode == Mode::Adm,
            Command::Penrose => mode == Mode::Penrose,
            Command::Identities => mode == Mode::Identities,
            Command::Fit => mode == Mode::Fit,
            Command::Grid3d => mode == Mode::Grid3d,
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    /// Bad usage or configuration (exit 2).
    Usage(String),
    /// A solve failed (exit 3).
    Solver(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Usage(m) => write!(f, "usage error: {m}"),
            RunError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

fn solver_err(context: &str) -> impl Fn(lsmass::Error) -> RunError + '_ {
    move |e| match e {
        lsmass::Error::InvalidParameter { .. } | lsmass::Error::Parse { .. } => {
            RunError::Usage(format!("{context}: {e}"))
        }
        _ => RunError::Solver(format!("{context}: {e}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    /// measured ≤ bound
    AtMost,
    /// measured ≥ bound
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub op: Op,
    pub bound: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub assertions: Vec<Assertion>,
    /// Measured values that are reported but not asserted.
    pub values: Vec<(String, String)>,
    pub files: Vec<(String, Vec<u8>)>,
    header: Vec<(String, String)>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.pass)
    }

    fn at_most(&mut self, name: impl Into<String>, measured: f64, bound: f64) {
        self.assertions.push(Assertion {
            name: name.into(),
            // NaN never passes
            pass: measured <= bound,
            measured,
            op: Op::AtMost,
            bound,
        });
    }

    fn at_least(&mut self, name: impl Into<String>, measured: f64, bound: f64) {
        self.assertions.push(Assertion {
            name: name.into(),
            pass: measured >= bound,
            measured,
            op: Op::AtLeast,
            bound,
        });
    }

    fn value(&mut self, key: impl Into<String>, v: impl std::fmt::Display) {
        self.values.push((key.into(), v.to_string()));
    }

    fn file(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    /// Machine-readable `key=value` summary.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "{k}={v}");
        }
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k}={v}");
        }
        let _ = writeln!(out, "assertions={}", self.assertions.len());
        for a in &self.assertions {
            let op = match a.op {
                Op::AtMost => "<=",
                Op::AtLeast => ">=",
            };
            let _ = writeln!(
                out,
                "assert.{}={} measured={:e} {} {:e}",
                a.name,
                if a.pass { "pass" } else { "fail" },
                a.measured,
                op,
                a.bound
            );
        }
        let _ = writeln!(out, "failed={}", self.failures().count());
        let _ = writeln!(out, "status={}", if self.passed() { "pass" } else { "fail" });
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Multiplies every tolerance (divides lower bounds).
    pub tol_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { tol_scale: 1.0 }
    }
}

fn tag(model: &MetricModel) -> String {
    let base = format!("{}_m{}", model.kind().name(), model.mass_param());
    match model.kind() {
        MetricKind::SmoothedSchwarzschild => format!("{base}_a{}", model.smoothing()),
        _ => base,
    }
}

fn max_abs<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    // NaN propagates so that a broken sample fails its assertion
    it.into_iter().fold(0.0, |acc: f64, v| if v.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(v.abs()) })
}

/// Runs `cmd` on `cfg`.
pub fn run(cfg: &ExperimentConfig, cmd: Command, opts: RunOptions) -> Result<Report, RunError> {
    if !cmd.accepts(cfg.run.mode) {
        return Err(RunError::Usage(format!(
            "subcommand `{}` does not run configs with mode `{}`",
            cmd.name(),
            cfg.run.mode.name()
        )));
    }
    if !(opts.tol_scale > 0.0 && opts.tol_scale.is_finite()) {
        return Err(RunError::Usage(format!("--tol-scale must be positive, got {}", opts.tol_scale)));
    }
    let models = cfg.models().map_err(RunError::Usage)?;
    let mut rep = Report {
        header: vec![
            ("config".into(), cfg.name.clone()),
            ("command".into(), cmd.name().into()),
            ("mode".into(), cfg.run.mode.name().into()),
            ("tol_scale".into(), format!("{:e}", opts.tol_scale)),
        ],
        ..Report::default()
    };
    let ctx = Ctx { cfg, s: opts.tol_scale };
    for model in &models {
        rep.value(format!("{}.model", tag(model)), model.describe());
        match (cmd, cfg.run.mode) {
            (Command::Solve, Mode::Grid3d) => ctx.grid3d(model, &mut rep, true)?,
            (Command::Solve, mode) => ctx.solve(model, mode, &mut rep)?,
            (_, Mode::GreenSweep) => ctx.green_sweep(model, &mut rep)?,
            (_, Mode::PSweep) => ctx.p_sweep(model, &mut rep)?,
            (_, Mode::Adm) => ctx.adm(model, &mut rep)?,
            (_, Mode::Penrose) => ctx.penrose(model, &mut rep)?,
            (_, Mode::Identities) => ctx.identities(model, &mut rep)?,
            (_, Mode::Fit) => ctx.fit(model, &mut rep)?,
            (_, Mode::Grid3d) => ctx.grid3d(model, &mut rep, false)?,
        }
    }
    if cfg.wants("summary") {
        let summary = rep.summary();
        rep.file("summary.txt", summary);
    }
    Ok(rep)
}

/// Writes the report files in order.
pub fn write_outputs(rep: &Report, dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir).map_err(|e| RunError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    for (name, contents) in &rep.files {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| RunError::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    s: f64,
}

impl Ctx<'_> {
    fn green_solution(&self, model: &MetricModel) -> Result<RadialSolution, RunError> {
        let exterior = self.cfg.solver.exterior.unwrap_or(!model.is_complete_at_pole());
        let grid = RadialGrid::for_green(model, exterior).map_err(solver_err("radial grid"))?;
        let grid = self.override_grid(grid)?;
        RadialSolution::solve_green(model, grid, exterior).map_err(solver_err("Green's function"))
    }

    fn cap_solution(&self, model: &MetricModel, p: f64) -> Result<RadialSolution, RunError> {
        let grid = RadialGrid::for_capacitary(model).map_err(solver_err("radial grid"))?;
        let grid = self.override_grid(grid)?;
        RadialSolution::solve_capacitary(model, p, grid).map_err(solver_err("capacitary potential"))
    }

    fn override_grid(&self, grid: RadialGrid) -> Result<RadialGrid, RunError> {
        let sv = &self.cfg.solver;
        RadialGrid::new(
            grid.r_min,
            sv.r_max.unwrap_or(grid.r_max),
            sv.radial_nodes.unwrap_or(grid.nodes),
        )
        .map_err(solver_err("radial grid"))
    }

    fn t_grid(&self, sol: &RadialSolution) -> Result<Vec<f64>, RunError> {
        match &self.cfg.run.t {
            TGrid::Default => default_t_grid(sol).map_err(solver_err("t grid")),
            TGrid::Log { lo, hi, n } => log_grid(*lo, *hi, *n).map_err(solver_err("t grid")),
            TGrid::List(v) => Ok(v.clone()),
        }
    }

    fn explicit_t(&self) -> Result<Vec<f64>, RunError> {
        match &self.cfg.run.t {
            TGrid::Default => Err(RunError::Usage("this mode needs explicit levels".into())),
            TGrid::Log { lo, hi, n } => log_grid(*lo, *hi, *n).map_err(solver_err("t grid")),
            TGrid::List(v) => Ok(v.clone()),
        }
    }

    fn solve(&self, model: &MetricModel, mode: Mode, rep: &mut Report) -> Result<(), RunError> {
        let sols: Vec<(String, RadialSolution)> = if matches!(mode, Mode::PSweep | Mode::Penrose) {
            self.cfg
                .run
                .p
                .iter()
                .map(|&p| Ok((format!("{}_p{p}", tag(model)), self.cap_solution(model, p)?)))
                .collect::<Result<_, RunError>>()?
        } else {
            vec![(tag(model), self.green_solution(model)?)]
        };
        for (name, sol) in sols {
            let c = sol.flux_constant();
            let p = sol.p();
            let mut dev: f64 = 0.0;
            let mut min_grad = f64::INFINITY;
            for &r in sol.radii() {
                let g = sol.grad_norm(r).map_err(solver_err("gradient"))?;
                let rho = model.area_radius(r).map_err(solver_err("area radius"))?;
                dev = dev.max((rho * rho * g.powf(p - 1.0) / c - 1.0).abs());
                min_grad = min_grad.min(g);
            }
            rep.value(format!("{name}.solution"), sol.describe());
            rep.at_most(format!("{name}.flux_conservation"), dev, self.cfg.run.flux_tol * self.s);
            rep.at_least(format!("{name}.min_grad"), min_grad, f64::MIN_POSITIVE);
            if self.cfg.wants("csv") {
                rep.file(format!("{name}_u.csv"), sol.to_table().map_err(solver_err("table"))?);
            }
        }
        Ok(())
    }

    /// Assertions shared by Green and capacitary sweeps.
    fn sweep_checks(
        &self,
        name: &str,
        model: &MetricModel,
        sol: &RadialSolution,
        sweep_rep: &MonotonicityReport,
        rep: &mut Report,
    ) -> Result<(), RunError> {
        let run = &self.cfg.run;
        let s = self.s;
        for line in sweep_rep.summary().lines() {
            if let Some((k, v)) = line.split_once('=') {
                rep.value(format!("{name}.{k}"), v);
            }
        }
        rep.at_most(format!("{name}.skipped_levels"), sweep_rep.skipped.len() as f64, 0.0);
        let max_drop = sweep_rep.violations.iter().map(|v| v.drop).fold(0.0, f64::max);
        rep.at_most(format!("{name}.violations"), sweep_rep.violations.len() as f64, 0.0);
        rep.value(format!("{name}.max_drop"), format!("{max_drop:e}"));

        // flux of |∇u|^{p−1}: 4πC on every level
        let p = sol.p();
        let c = sol.flux_constant();
        let flux_dev = max_abs(sweep_rep.samples.iter().map(|x| {
            let g = x.int_grad2 / x.flux;
            let area = x.flux / g;
            area * g.powf(p - 1.0) / (4.0 * PI * c) - 1.0
        }));
        rep.at_most(format!("{name}.flux_identity"), flux_dev, run.flux_tol * s);

        if let Some(tol) = run.expect_zero {
            let worst = max_abs(sweep_rep.samples.iter().map(|x| x.f_value));
            rep.at_most(format!("{name}.F_zero"), worst, tol * s);
        }
        if run.expect_mass {
            let m = model.mass_param();
            let est = sweep_rep.limit_estimate().map_or(f64::NAN, |l| l / (8.0 * PI));
            rep.value(format!("{name}.mass_estimate"), format!("{est:e}"));
            let scale = if m == 0.0 { 1.0 } else { m.abs() };
            rep.at_most(format!("{name}.mass_limit_relerr"), (est - m).abs() / scale, run.mass_tol * s);
        }
        if run.derivative_samples > 0 {
            let lo = t_floor(sol).map_err(solver_err("t floor"))? * 1.01;
            let hi = 1e4 * model.mass_param().abs().max(1.0);
            let ts = log_grid(lo * 1.05, hi, run.derivative_samples).map_err(solver_err("t grid"))?;
            let mut rows = String::from("t,fd,formula,relerr\n");
            let mut worst: f64 = 0.0;
            for t in ts {
                let c = check_derivative(sol, t, 1e-3 * t).map_err(solver_err("derivative check"))?;
                let _ = writeln!(rows, "{:e},{:e},{:e},{:e}", c.t, c.lhs, c.rhs, c.relerr);
                worst = if c.relerr.is_nan() { f64::NAN } else { worst.max(c.relerr) };
            }
            rep.at_most(format!("{name}.derivative_identity"), worst, run.derivative_tol * s);
            if self.cfg.wants("csv") {
                rep.file(format!("{name}_derivative.csv"), rows);
            }
        }
        for ((&t, &v), &tol) in run.spot_t.iter().zip(&run.spot_value).zip(&run.spot_tol) {
            let f = eval_any(sol, t).map_err(solver_err("spot value"))?.f_value;
            rep.value(format!("{name}.F({t})"), format!("{f:.17e}"));
            rep.at_most(format!("{name}.spot_F({t})"), (f - v).abs(), tol * s);
        }
        if self.cfg.wants("csv") {
            rep.file(format!("{name}_sweep.csv"), sweep_rep.to_csv());
        }
        Ok(())
    }

    fn green_sweep(&self, model: &MetricModel, rep: &mut Report) -> Result<(), RunError> {
        let sol = self.green_solution(model)?;
        let ts = self.t_grid(&sol)?;
        let sw = sweep(&sol, &ts, self.cfg.run.monotone_tol * self.s).map_err(solver_err("sweep"))?;
        self.sweep_checks(&tag(model), model, &sol, &sw, rep)
    }

    fn p_sweep(&self, model: &MetricModel, rep: &mut Report) -> Result<(), RunError> {
        for &p in &self.cfg.run.p {
            let sol = self.cap_solution(model, p)?;
            let ts = self.t_grid(&sol)?;
            let sw = sweep(&sol, &ts, self.cfg.run.monotone_tol * self.s).map_err(solver_err("sweep"))?;
            self.sweep_checks(&format!("{}_p{p}", tag(model)), model, &sol, &sw, rep)?;
        }
        Ok(())
    }

    fn adm(&self, model: &MetricModel, rep: &mut Report) -> Result<(), RunError> {
        let name = tag(model);
        let m = model.mass_param();
        let scale = m.abs().max(1.0);
        let mr = mass_report(model).map_err(solver_err("mass report"))?;
        rep.value(format!("{name}.adm_surface"), format!("{:.17e}", mr.adm_surface));
        rep.value(format!("{name}.adm_from_F"), format!("{:.17e}", mr.adm_from_f));
        rep.value(format!("{name}.adm_from_fit"), format!("{:.17e}", mr.adm_from_fit));
        rep.at_most(
            format!("{name}.adm_consistency"),
            mr.max_deviation,
            self.cfg.run.mass_tol * scale * self.s,
        );
        if self.cfg.run.expect_mass {
            let worst = max_abs([mr.adm_surface - m, mr.adm_from_f - m, mr.adm_from_fit - m]);
            rep.at_most(format!("{name}.adm_vs_mass"), worst, self.cfg.run.mass_tol * scale * self.s);
        }
        if self.cfg.wants("csv") {
            rep.file(
                format!("{name}_adm.csv"),
                format!(
                    "m,adm_surface,adm_from_F,adm_from_fit,max_deviation\n{:e},{:e},{:e},{:e},{:e}\n",
                    m, mr.adm_surface, mr.adm_from_f, mr.adm_from_fit, mr.max_deviation
                ),
            );
        }
        Ok(())
    }

    fn penrose(&self, model: &MetricModel, rep: &mut Report) -> Result<(), RunError> {
        let name = tag(model);
        let run = &self.cfg.run;
        let s = self.s;
        let pr = penrose_check(model, &run.p).map_err(solver_err("capacitary ladder"))?;
        let mut rows = pr.rows.clone();
        rows.sort_by(|a, b| a.p.total_cmp(&b.p));
        let beta_max = rows.iter().map(|r| r.beta).fold(0.0, f64::max);
        let rise = rows.windows(2).map(|w| w[1].beta - w[0].beta).fold(0.0, f64::max);
        // β_p should not increase with p; allow rounding in the last digits
        rep.at_most(format!("{name}.beta_nonincreasing"), rise, 1e-12 * beta_max * s);
        if model.kind() == MetricKind::SchwarzschildIsotropic {
            let excess = rows.iter().map(|r| r.beta - r.two_m).fold(f64::NEG_INFINITY, f64::max);
            rep.at_most(format!("{name}.beta_le_2m"), excess, 1e-9 * s);
        }
        if let Some(e) = pr.endpoint_relerr {
            rep.at_most(format!("{name}.penrose_endpoint"), e, run.endpoint_tol * s);
        }
        for r in &rows {
            rep.value(format!("{name}.beta(p={})", r.p), format!("{:.17e}", r.beta));
            if let Some(v) = run.expect_beta {
                rep.at_most(format!("{name}.beta(p={})", r.p), (r.beta - v).abs(), run.oracle_tol * s);
            }
            if let Some(v) = run.expect_c {
                rep.at_most(format!("{name}.c(p={})", r.p), (r.c_p - v).abs(), run.oracle_tol * s);
            }
            if let Some(v) = run.expect_capacity {
                rep.at_most(format!("{name}.capacity(p={})", r.p), (r.cap - v).abs(), run.oracle_tol * s);
            }
        }
        if self.cfg.wants("csv") {
            rep.file(format!("{name}_penrose.csv"), pr.to_csv());
        }
        Ok(())
    }

    fn identities(&self, model: &MetricModel, rep: &mut Report) -> Result<(), RunError> {
        let name = tag(model);
        let run = &self.cfg.run;
        let s = self.s;
        let sol = self.green_solution(model)?;
        let radii = {
            let d = default_radii(&sol);
            let (lo, hi) = (d[0], d[d.len() - 1]);
            let n = run.identity_points.max(2);
            (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect::<Vec<_>>()
        };
        let samples = identity_suite(&sol, &radii).map_err(solver_err("identity suite"))?;
        for tag_kind in IdentityTag::ALL {
            let worst = max_abs(samples.iter().filter(|x| x.tag == tag_kind).map(|x| x.relerr));
            let tol = if tag_kind == IdentityTag::DivXBochner { run.fd_tol } else { run.identity_tol };
            rep.at_most(format!("{name}.{}", tag_kind.name()), worst, tol * s);
        }

        let ts = match &run.t {
            TGrid::Default => {
                let lo = (t_floor(&sol).map_err(solver_err("t floor"))? * 2.0).max(0.5);
                log_grid(lo, 1e3 * model.mass_param().abs().max(1.0), 5).map_err(solver_err("t grid"))?
            }
            _ => self.t_grid(&sol)?,
        };
        let mut rows = String::from("s,t,integral,difference,relerr\n");
        let mut worst: f64 = 0.0;
        for w in ts.windows(2) {
            let c = integral_consistency(&sol, w[0], w[1]).map_err(solver_err("volume integral"))?;
            let _ = writeln!(rows, "{:e},{:e},{:e},{:e},{:e}", c.s, c.t, c.integral, c.difference, c.relerr);
            worst = if c.relerr.is_nan() { f64::NAN } else { worst.max(c.relerr) };
        }
        rep.at_most(format!("{name}.divergence_integral"), worst, run.integral_tol * s);

        for &p in &run.p {
            if model.inner_radius().is_none() {
                break;
            }
            let cap = self.cap_solution(model, p)?;
            let cs = identity_suite(&cap, &radii.iter().map(|r| r.max(cap.r_min() * 1.01)).collect::<Vec<_>>())
                .map_err(solver_err("identity suite"))?;
            for tag_kind in [IdentityTag::MeanCurvHarmonic, IdentityTag::GaussRewrite] {
                let worst = max_abs(cs.iter().filter(|x| x.tag == tag_kind).map(|x| x.relerr));
                rep.at_most(format!("{name}_p{p}.{}", tag_kind.name()), worst, run.identity_tol * s);
            }
        }
        if self.cfg.wants("csv") {
            rep.file(format!("{name}_identities.csv"), samples_to_csv(&samples));
            rep.file(format!("{name}_integrals.csv"), rows);
        }
        Ok(())
    }

    fn fit(&self, model: &MetricModel, rep: &mut Report) -> Result<(), RunError> {
        let name = tag(model);
        let run = &self.cfg.run;
        let m = model.mass_param();
        let scale = m.abs().max(1.0);
        let sol = self.green_solution(model)?;
        match fit_expansion(&sol) {
            Ok(fit) => {
                rep.value(format!("{name}.fit_mass"), format!("{:.17e}", fit.mass));
                rep.value(format!("{name}.fit_slope"), format!("{:e}", fit.slope));
                rep.value(format!("{name}.fit_residual"), format!("{:e}", fit.residual));
                rep.at_most(format!("{name}.fit_residual"), fit.residual, 1e-3 * scale * self.s);
                if run.expect_mass {
                    rep.at_most(format!("{name}.fit_vs_mass"), (fit.mass - m).abs(), run.mass_tol * scale * self.s);
                }
                if self.cfg.wants("csv") {
                    rep.file(
                        format!("{name}_fit.csv"),
                        format!("mass,slope,residual\n{:e},{:e},{:e}\n", fit.mass, fit.slope, fit.residual),
                    );
                }
            }
            Err(lsmass::Error::FitInstability(msg)) => {
                rep.value(format!("{name}.fit_error"), msg);
                rep.at_most(format!("{name}.fit_residual"), f64::NAN, 1e-3 * scale * self.s);
            }
            Err(e) => return Err(solver_err("expansion fit")(e)),
        }
        for &p in &run.p {
            if model.inner_radius().is_none() {
                break;
            }
            let cap = self.cap_solution(model, p)?;
            let lo = cap.r_min() * 2.0;
            let hi = 1e4 * scale;
            let radii: Vec<f64> = (0..60).map(|i| lo * (hi / lo).powf(i as f64 / 59.0)).collect();
            let ip = ip_profile(&cap, &radii).map_err(solver_err("I_p"))?;
            let limit = ip_limit(&cap);
            let last = *ip.last().expect("nonempty");
            rep.value(format!("{name}_p{p}.ip_limit"), format!("{limit:.17e}"));
            let denom = if limit == 0.0 { 1.0 } else { limit.abs() };
            rep.at_most(format!("{name}_p{p}.ip_tail"), (last - limit).abs() / denom, run.mass_tol * self.s);
            if self.cfg.wants("csv") {
                let mut rows = String::from("r,I_p\n");
                for (r, v) in radii.iter().zip(&ip) {
                    let _ = writeln!(rows, "{r:e},{v:e}");
                }
                rep.file(format!("{name}_p{p}_ip.csv"), rows);
            }
        }
        Ok(())
    }

    fn grid_solve(&self, model: &MetricModel, n: usize) -> Result<GridSolution, RunError> {
        let sv = &self.cfg.solver;
        let spec = GridSpec::new(sv.box_l, n, sv.pole).map_err(solver_err("grid"))?;
        let field = ConformalField::from_model(model, spec).map_err(|e| RunError::Usage(format!("grid field: {e}")))?;
        solve_green_3d(
            field,
            SolverOptions {
                tol: sv.cg_tol,
                max_iterations: sv.cg_max_iter,
            },
        )
        .map_err(solver_err("3D solve"))
    }

    fn grid3d(&self, model: &MetricModel, rep: &mut Report, solve_only: bool) -> Result<(), RunError> {
        let name = tag(model);
        let run = &self.cfg.run;
        let s = self.s;
        let n = self.cfg.solver.box_n;
        let sol = self.grid_solve(model, n)?;
        rep.value(format!("{name}.cg_iterations"), sol.iterations());
        rep.at_most(format!("{name}.cg_residual"), sol.residual(), self.cfg.solver.cg_tol);
        if self.cfg.wants("field") {
            let field = sol.field();
            let spec = field.spec();
            let header = FieldHeader {
                l: spec.l,
                n: spec.n,
                pole: spec.pole,
                kind: field.kind().to_string(),
                far_mass: field.far_mass(),
            };
            let bytes: Vec<u8> = field.phi_nodes().iter().flat_map(|v| v.to_le_bytes()).collect();
            rep.file(format!("{name}_phi.f64"), bytes);
            rep.file(format!("{name}_phi.f64.hdr"), header.render());
        }
        if solve_only {
            return Ok(());
        }

        let ts = self.explicit_t()?;
        let radial = if run.compare_radial.is_some() || run.convergence.is_some() {
            Some(self.green_solution(model)?)
        } else {
            None
        };
        let (samples, skipped, table) = self.grid_levels(&name, &sol, &ts, radial.as_ref(), rep)?;
        let sw = build_report(samples, skipped, run.monotone_tol * s);
        rep.at_most(format!("{name}.skipped_levels"), sw.skipped.len() as f64, 0.0);
        rep.at_most(format!("{name}.violations"), sw.violations.len() as f64, 0.0);
        for line in sw.summary().lines() {
            if let Some((k, v)) = line.split_once('=') {
                rep.value(format!("{name}.{k}"), v);
            }
        }
        let flux_dev = max_abs(sw.samples.iter().map(|x| x.flux / (4.0 * PI) - 1.0));
        rep.at_most(format!("{name}.flux_identity"), flux_dev, run.flux_tol * s);
        if let Some(tol) = run.expect_zero {
            rep.at_most(format!("{name}.F_zero"), max_abs(sw.samples.iter().map(|x| x.f_value)), tol * s);
        }
        if let (Some(tol), Some(radial)) = (run.compare_radial, radial.as_ref()) {
            let worst = max_abs(sw.samples.iter().map(|x| {
                let f = eval_any(radial, x.t).map_or(f64::NAN, |r| r.f_value);
                (x.f_value - f) / f
            }));
            rep.at_most(format!("{name}.F_vs_radial"), worst, tol * s);
        }
        if let (Some(factor), Some(radial)) = (run.convergence, radial.as_ref()) {
            let coarse = self.grid_solve(model, n / 2)?;
            let mut worst = f64::INFINITY;
            for x in &sw.samples {
                let exact = eval_any(radial, x.t).map_err(solver_err("radial oracle"))?.f_value;
                let surf = extract_level_surface(&coarse, x.level).map_err(solver_err("coarse level"))?;
                let fc = surface_integrals(&surf).f_value(x.t);
                let ratio = (fc - exact).abs() / (x.f_value - exact).abs();
                rep.value(format!("{name}.F_coarse({})", x.t), format!("{fc:.17e}"));
                rep.value(format!("{name}.convergence({})", x.t), format!("{ratio:e}"));
                worst = worst.min(ratio);
            }
            rep.at_least(format!("{name}.convergence_factor"), worst, factor / s);
        }
        if self.cfg.wants("csv") {
            rep.file(format!("{name}_grid_sweep.csv"), table);
        }
        Ok(())
    }

    #[allow(clippy::type_complexity)]
    fn grid_levels(
        &self,
        name: &str,
        sol: &GridSolution,
        ts: &[f64],
        radial: Option<&RadialSolution>,
        rep: &mut Report,
    ) -> Result<(Vec<LevelSetSample>, Vec<SkippedLevel>, String), RunError> {
        let mut table =
            String::from("t,level,F,F_4pi,flux,int_grad2,int_gradH,area,euler_char,closed,min_grad,noise_floor,F_radial\n");
        let mut samples = Vec::new();
        let mut skipped = Vec::new();
        let mut bad_topology = 0usize;
        for &t in ts {
            let level = 1.0 - 1.0 / t;
            let surf = match extract_level_surface(sol, level) {
                Ok(s) => s,
                Err(e) => {
                    skipped.push(SkippedLevel { t, reason: e.to_string() });
                    continue;
                }
            };
            let ints = surface_integrals(&surf);
            if !(surf.closed && surf.euler_char == 2) {
                bad_topology += 1;
            }
            let f_rad = radial.and_then(|r| eval_any(r, t).ok()).map_or(f64::NAN, |x| x.f_value);
            let _ = writeln!(
                table,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{:e},{:e},{:e}",
                t,
                level,
                ints.f_value(t),
                ints.f_value_4pi(t),
                ints.flux,
                ints.int_grad2,
                ints.int_grad_h,
                ints.area,
                surf.euler_char,
                surf.closed,
                surf.min_grad,
                surf.noise_floor,
                f_rad
            );
            if self.cfg.wants("off") {
                rep.file(format!("{name}_t{t}.off"), surf.to_off());
            }
            samples.push(LevelSetSample {
                t,
                level,
                radius: (surf.flat_area() / (4.0 * PI)).sqrt(),
                flux: ints.flux,
                int_grad2: ints.int_grad2,
                int_grad_h: ints.int_grad_h,
                f_value: ints.f_value(t),
                terms: None,
            });
        }
        rep.at_most(format!("{name}.non_spherical_levels"), bad_topology as f64, 0.0);
        Ok((samples, skipped, table))
    }
}

//! Experiment configs: a small INI dialect.
//!
//! ```text
//! # comment
//! [metric]
//! kind = smoothed-schwarzschild
//! mass = 0.5, 1, 2
//! smoothing_ratio = 0.5
//! ```
//!
//! Sections and keys are fixed; anything unknown is an error addressed by
//! line. Numbers may carry a `pi` suffix (`14.8pi`). Lists are
//! comma-separated.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use lsmass::{CustomProfile, MetricModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source_name: String,
    /// 0 when the problem is not tied to a line (missing key).
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line == 0 {
            write!(f, "{}: {}", self.source_name, self.message)
        } else {
            write!(f, "{}:{}: {}", self.source_name, self.line, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    GreenSweep,
    PSweep,
    Adm,
    Penrose,
    Identities,
    Fit,
    Grid3d,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::GreenSweep => "green-sweep",
            Mode::PSweep => "p-sweep",
            Mode::Adm => "adm",
            Mode::Penrose => "penrose",
            Mode::Identities => "identities",
            Mode::Fit => "fit",
            Mode::Grid3d => "grid3d",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "green-sweep" => Mode::GreenSweep,
            "p-sweep" => Mode::PSweep,
            "adm" => Mode::Adm,
            "penrose" => Mode::Penrose,
            "identities" => Mode::Identities,
            "fit" => Mode::Fit,
            "grid3d" => Mode::Grid3d,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Flat,
    Schwarzschild,
    SmoothedSchwarzschild,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InnerRadius {
    None,
    Horizon,
    At(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricBlock {
    pub kind: Kind,
    pub masses: Vec<f64>,
    /// Either absolute smoothing radii or a ratio `a/m`.
    pub smoothing: Vec<f64>,
    pub smoothing_ratio: Option<f64>,
    pub inner_radius: InnerRadius,
    pub profile_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverBlock {
    pub radial_nodes: Option<usize>,
    pub r_max: Option<f64>,
    /// Green's function of the exterior region (exact Schwarzschild).
    pub exterior: Option<bool>,
    pub box_l: f64,
    pub box_n: usize,
    pub pole: [f64; 3],
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TGrid {
    Default,
    Log { lo: f64, hi: f64, n: usize },
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunBlock {
    pub mode: Mode,
    pub p: Vec<f64>,
    pub t: TGrid,
    pub monotone_tol: f64,
    /// Defaults to 1e-10 for radial runs and 2% on the 3D grid.
    pub flux_tol: f64,
    pub expect_zero: Option<f64>,
    pub expect_mass: bool,
    pub mass_tol: f64,
    pub derivative_samples: usize,
    pub derivative_tol: f64,
    pub spot_t: Vec<f64>,
    pub spot_value: Vec<f64>,
    pub spot_tol: Vec<f64>,
    pub expect_beta: Option<f64>,
    pub expect_c: Option<f64>,
    pub expect_capacity: Option<f64>,
    pub oracle_tol: f64,
    pub identity_points: usize,
    pub identity_tol: f64,
    pub integral_tol: f64,
    pub fd_tol: f64,
    pub compare_radial: Option<f64>,
    pub convergence: Option<f64>,
    pub endpoint_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub metric: MetricBlock,
    pub solver: SolverBlock,
    pub run: RunBlock,
    pub output: OutputBlock,
}

const FORMATS: [&str; 4] = ["csv", "summary", "off", "field"];

struct Entry {
    line: usize,
    value: String,
}

struct Reader {
    source_name: String,
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

const SECTIONS: [(&str, &[&str]); 4] = [
    (
        "metric",
        &["kind", "mass", "smoothing_a", "smoothing_ratio", "inner_radius", "profile_path"],
    ),
    (
        "solver",
        &["radial_nodes", "r_max", "exterior", "box_l", "box_n", "pole", "cg_tol", "cg_max_iter"],
    ),
    (
        "run",
        &[
            "mode",
            "p",
            "t",
            "t_min",
            "t_max",
            "t_count",
            "monotone_tol",
            "flux_tol",
            "expect_zero",
            "expect_mass",
            "mass_tol",
            "derivative_samples",
            "derivative_tol",
            "spot_t",
            "spot_value",
            "spot_tol",
            "expect_beta",
            "expect_c",
            "expect_capacity",
            "oracle_tol",
            "identity_points",
            "identity_tol",
            "integral_tol",
            "fd_tol",
            "compare_radial",
            "convergence",
            "endpoint_tol",
        ],
    ),
    ("output", &["directory", "formats"]),
];

fn strip_comment(line: &str) -> &str {
    let cut = line
        .char_indices()
        .find(|&(i, c)| (c == '#' || c == ';') && (i == 0 || line[..i].ends_with(char::is_whitespace)))
        .map_or(line.len(), |(i, _)| i);
    line[..cut].trim()
}

impl Reader {
    fn parse(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        let err = |line: usize, message: String| ConfigError {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let no = i + 1;
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(no, format!("unterminated section header `{line}`")))?
                    .trim()
                    .to_string();
                if !SECTIONS.iter().any(|(s, _)| *s == name) {
                    return Err(err(no, format!("unknown section [{name}]")));
                }
                if sections.contains_key(&name) {
                    return Err(err(no, format!("section [{name}] appears twice")));
                }
                sections.insert(name.clone(), BTreeMap::new());
                current = Some(name);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(no, format!("expected `key = value`, found `{line}`")))?;
            let key = key.trim().to_string();
            let section = current
                .as_ref()
                .ok_or_else(|| err(no, format!("key `{key}` outside any section")))?;
            let allowed = SECTIONS.iter().find(|(s, _)| s == section).expect("known").1;
            if !allowed.contains(&key.as_str()) {
                return Err(err(no, format!("unknown key `{key}` in [{section}]")));
            }
            let map = sections.get_mut(section).expect("inserted");
            if map.contains_key(&key) {
                return Err(err(no, format!("duplicate key `{key}` in [{section}]")));
            }
            map.insert(
                key,
                Entry {
                    line: no,
                    value: value.trim().to_string(),
                },
            );
        }
        Ok(Self {
            source_name: source_name.to_string(),
            sections,
        })
    }

    fn err(&self, line: usize, message: String) -> ConfigError {
        ConfigError {
            source_name: self.source_name.clone(),
            line,
            message,
        }
    }

    fn raw(&self, section: &str, key: &str) -> Option<(usize, String)> {
        let e = self.sections.get(section)?.get(key)?;
        Some((e.line, e.value.clone()))
    }

    fn line_of(&self, section: &str, key: &str) -> usize {
        self.sections
            .get(section)
            .and_then(|m| m.get(key))
            .map_or(0, |e| e.line)
    }

    fn number(&self, line: usize, key: &str, s: &str) -> Result<f64, ConfigError> {
        let s = s.trim();
        let (body, scale) = match s.strip_suffix("pi") {
            Some(b) if b.trim().is_empty() => ("1", PI),
            Some(b) => (b.trim().trim_end_matches('*'), PI),
            None => (s, 1.0),
        };
        let v: f64 = body
            .trim()
            .parse()
            .map_err(|_| self.err(line, format!("`{key}`: `{s}` is not a number")))?;
        let v = v * scale;
        if !v.is_finite() {
            return Err(self.err(line, format!("`{key}`: `{s}` is not finite")));
        }
        Ok(v)
    }

    fn f64_opt(&mut self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.raw(section, key) {
            Some((line, v)) => Ok(Some(self.number(line, key, &v)?)),
            None => Ok(None),
        }
    }

    fn f64_or(&mut self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64_opt(section, key)?.unwrap_or(default))
    }

    fn positive(&mut self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.f64_or(section, key, default)?;
        if !(v > 0.0) {
            return Err(self.err(self.line_of(section, key), format!("`{key}` must be positive, got {v}")));
        }
        Ok(v)
    }

    fn list(&mut self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.raw(section, key) {
            Some((line, v)) => {
                let items = v
                    .split(',')
                    .map(|s| self.number(line, key, s))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Some(items))
            }
            None => Ok(None),
        }
    }

    fn usize_opt(&mut self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.raw(section, key) {
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| self.err(line, format!("`{key}`: `{v}` is not a nonnegative integer"))),
            None => Ok(None),
        }
    }

    fn bool_opt(&mut self, section: &str, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.raw(section, key) {
            Some((line, v)) => match v.as_str() {
                "true" | "yes" | "on" => Ok(Some(true)),
                "false" | "no" | "off" => Ok(Some(false)),
                _ => Err(self.err(line, format!("`{key}`: expected true or false, got `{v}`"))),
            },
            None => Ok(None),
        }
    }

    fn bool_or(&mut self, section: &str, key: &str, default: bool) -> Result<bool, ConfigError> {
        Ok(self.bool_opt(section, key)?.unwrap_or(default))
    }

    fn required(&mut self, section: &str, key: &str) -> Result<(usize, String), ConfigError> {
        if !self.sections.contains_key(section) {
            return Err(self.err(0, format!("missing section [{section}]")));
        }
        self.raw(section, key)
            .ok_or_else(|| self.err(0, format!("missing key `{key}` in [{section}]")))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source_name: path.display().to_string(),
            line: 0,
            message: format!("cannot read: {e}"),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let name = path
            .file_stem()
            .map_or("experiment".to_string(), |s| s.to_string_lossy().into_owned());
        Self::parse(&text, &path.display().to_string(), base, &name)
    }

    /// Parses and validates; relative paths resolve against `base`.
    pub fn parse(text: &str, source_name: &str, base: &Path, name: &str) -> Result<Self, ConfigError> {
        let mut rd = Reader::parse(text, source_name)?;
        let metric = parse_metric(&mut rd, base)?;
        let solver = parse_solver(&mut rd)?;
        let run = parse_run(&mut rd)?;
        let output = parse_output(&mut rd, base)?;
        let cfg = Self {
            name: name.to_string(),
            metric,
            solver,
            run,
            output,
        };
        cfg.validate(&rd)?;
        Ok(cfg)
    }

    fn validate(&self, rd: &Reader) -> Result<(), ConfigError> {
        let run = &self.run;
        let needs_p = matches!(run.mode, Mode::PSweep | Mode::Penrose);
        if needs_p && run.p.is_empty() {
            return Err(rd.err(0, format!("mode {} needs a p list", run.mode.name())));
        }
        if let Some(bad) = run.p.iter().find(|&&p| !(p > 1.0 && p < 3.0)) {
            return Err(rd.err(rd.line_of("run", "p"), format!("p must lie in (1, 3), got {bad}")));
        }
        if needs_p && self.metric.inner_radius == InnerRadius::None {
            return Err(rd.err(0, "capacitary runs need [metric] inner_radius".into()));
        }
        if run.spot_t.len() != run.spot_value.len() || run.spot_t.len() != run.spot_tol.len() {
            return Err(rd.err(
                rd.line_of("run", "spot_t"),
                "spot_t, spot_value and spot_tol must have equal lengths".into(),
            ));
        }
        if let TGrid::Log { lo, hi, n } = run.t {
            if !(lo > 0.0 && hi > lo && n >= 2) {
                return Err(rd.err(rd.line_of("run", "t_min"), "need 0 < t_min < t_max and t_count ≥ 2".into()));
            }
        }
        if run.mode == Mode::Grid3d && run.t == TGrid::Default {
            return Err(rd.err(0, "grid3d needs explicit levels (`t` or `t_min`/`t_max`)".into()));
        }
        if self.solver.box_n < 24 {
            return Err(rd.err(rd.line_of("solver", "box_n"), "box_n must be at least 24".into()));
        }
        // fail on construction problems before any solve
        for model in self.models().map_err(|m| rd.err(0, m))? {
            if run.mode == Mode::Grid3d && model.inner_radius().is_some() {
                return Err(rd.err(0, "grid3d needs a metric without an inner boundary".into()));
            }
        }
        Ok(())
    }

    /// One model per configured mass.
    pub fn models(&self) -> Result<Vec<MetricModel>, String> {
        let m = &self.metric;
        let masses: Vec<f64> = if m.masses.is_empty() { vec![0.0] } else { m.masses.clone() };
        masses
            .iter()
            .enumerate()
            .map(|(i, &mass)| {
                let base = match m.kind {
                    Kind::Flat => Ok(MetricModel::flat()),
                    Kind::Schwarzschild => match m.inner_radius {
                        InnerRadius::Horizon => return MetricModel::schwarzschild_horizon(mass).map_err(|e| e.to_string()),
                        _ => MetricModel::schwarzschild(mass),
                    },
                    Kind::SmoothedSchwarzschild => {
                        let a = match (m.smoothing_ratio, m.smoothing.len()) {
                            (Some(r), _) => r * mass.abs(),
                            (None, 1) => m.smoothing[0],
                            (None, n) if n == masses.len() => m.smoothing[i],
                            _ => return Err("smoothing_a needs one value or one per mass".into()),
                        };
                        MetricModel::smoothed_schwarzschild(mass, a)
                    }
                    Kind::Custom => {
                        let path = m.profile_path.as_ref().ok_or("custom metric needs profile_path")?;
                        CustomProfile::load(path).map(MetricModel::custom)
                    }
                }
                .map_err(|e| e.to_string())?;
                match m.inner_radius {
                    InnerRadius::None => Ok(base),
                    InnerRadius::Horizon => Err("inner_radius = horizon is only defined for schwarzschild".into()),
                    InnerRadius::At(r0) => base.with_inner_radius(r0).map_err(|e| e.to_string()),
                }
            })
            .collect()
    }

    pub fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }
}

fn parse_metric(rd: &mut Reader, base: &Path) -> Result<MetricBlock, ConfigError> {
    let (line, kind) = rd.required("metric", "kind")?;
    let kind = match kind.as_str() {
        "flat" => Kind::Flat,
        "schwarzschild" => Kind::Schwarzschild,
        "smoothed-schwarzschild" => Kind::SmoothedSchwarzschild,
        "custom" => Kind::Custom,
        other => return Err(rd.err(line, format!("unknown metric kind `{other}`"))),
    };
    let masses = rd.list("metric", "mass")?.unwrap_or_default();
    if kind != Kind::Flat && kind != Kind::Custom && masses.is_empty() {
        return Err(rd.err(line, "this metric kind needs `mass`".into()));
    }
    let smoothing = rd.list("metric", "smoothing_a")?.unwrap_or_default();
    let smoothing_ratio = rd.f64_opt("metric", "smoothing_ratio")?;
    if kind == Kind::SmoothedSchwarzschild && smoothing.is_empty() && smoothing_ratio.is_none() {
        return Err(rd.err(line, "smoothed-schwarzschild needs smoothing_a or smoothing_ratio".into()));
    }
    let inner_radius = match rd.raw("metric", "inner_radius") {
        None => InnerRadius::None,
        Some((_, v)) if v == "horizon" => InnerRadius::Horizon,
        Some((l, v)) => InnerRadius::At(rd.number(l, "inner_radius", &v)?),
    };
    let profile_path = match rd.raw("metric", "profile_path") {
        Some((l, v)) => {
            let p = base.join(v);
            if !p.is_file() {
                return Err(rd.err(l, format!("profile file {} does not exist", p.display())));
            }
            Some(p)
        }
        None if kind == Kind::Custom => return Err(rd.err(line, "custom metric needs profile_path".into())),
        None => None,
    };
    Ok(MetricBlock {
        kind,
        masses,
        smoothing,
        smoothing_ratio,
        inner_radius,
        profile_path,
    })
}

fn parse_solver(rd: &mut Reader) -> Result<SolverBlock, ConfigError> {
    let radial_nodes = rd.usize_opt("solver", "radial_nodes")?;
    if let Some(n) = radial_nodes {
        if n < 16 {
            return Err(rd.err(rd.line_of("solver", "radial_nodes"), "radial_nodes must be at least 16".into()));
        }
    }
    let r_max = rd.f64_opt("solver", "r_max")?;
    let exterior = rd.bool_opt("solver", "exterior")?;
    let pole = match rd.list("solver", "pole")? {
        Some(v) if v.len() == 3 => [v[0], v[1], v[2]],
        Some(_) => return Err(rd.err(rd.line_of("solver", "pole"), "pole needs three coordinates".into())),
        None => [0.0; 3],
    };
    Ok(SolverBlock {
        radial_nodes,
        r_max,
        exterior,
        box_l: rd.positive("solver", "box_l", 32.0)?,
        box_n: rd.usize_opt("solver", "box_n")?.unwrap_or(128),
        pole,
        cg_tol: rd.positive("solver", "cg_tol", 1e-9)?,
        cg_max_iter: rd.usize_opt("solver", "cg_max_iter")?.unwrap_or(20_000),
    })
}

fn parse_run(rd: &mut Reader) -> Result<RunBlock, ConfigError> {
    let (line, mode) = rd.required("run", "mode")?;
    let mode = Mode::parse(&mode).ok_or_else(|| {
        rd.err(
            line,
            format!("unknown mode `{mode}` (green-sweep, p-sweep, adm, penrose, identities, fit, grid3d)"),
        )
    })?;
    let t = match (rd.list("run", "t")?, rd.f64_opt("run", "t_min")?, rd.f64_opt("run", "t_max")?) {
        (Some(list), None, None) => {
            if list.windows(2).any(|w| !(w[0] < w[1])) || list.iter().any(|&t| !(t > 0.0)) {
                return Err(rd.err(rd.line_of("run", "t"), "t list must be positive and strictly ascending".into()));
            }
            TGrid::List(list)
        }
        (None, Some(lo), Some(hi)) => TGrid::Log {
            lo,
            hi,
            n: rd.usize_opt("run", "t_count")?.unwrap_or(200),
        },
        (None, None, None) => TGrid::Default,
        _ => {
            return Err(rd.err(
                rd.line_of("run", "t").max(rd.line_of("run", "t_min")),
                "give either `t` or both `t_min` and `t_max`".into(),
            ))
        }
    };
    let expect_zero = rd.f64_opt("run", "expect_zero")?;
    Ok(RunBlock {
        mode,
        p: rd.list("run", "p")?.unwrap_or_default(),
        t,
        monotone_tol: rd.positive("run", "monotone_tol", 1e-10)?,
        flux_tol: rd.positive("run", "flux_tol", if mode == Mode::Grid3d { 2e-2 } else { 1e-10 })?,
        expect_zero,
        expect_mass: rd.bool_or("run", "expect_mass", false)?,
        mass_tol: rd.positive("run", "mass_tol", 1e-3)?,
        derivative_samples: rd.usize_opt("run", "derivative_samples")?.unwrap_or(0),
        derivative_tol: rd.positive("run", "derivative_tol", 1e-6)?,
        spot_t: rd.list("run", "spot_t")?.unwrap_or_default(),
        spot_value: rd.list("run", "spot_value")?.unwrap_or_default(),
        spot_tol: rd.list("run", "spot_tol")?.unwrap_or_default(),
        expect_beta: rd.f64_opt("run", "expect_beta")?,
        expect_c: rd.f64_opt("run", "expect_c")?,
        expect_capacity: rd.f64_opt("run", "expect_capacity")?,
        oracle_tol: rd.positive("run", "oracle_tol", 1e-8)?,
        identity_points: rd.usize_opt("run", "identity_points")?.unwrap_or(100),
        identity_tol: rd.positive("run", "identity_tol", 1e-6)?,
        integral_tol: rd.positive("run", "integral_tol", 1e-8)?,
        fd_tol: rd.positive("run", "fd_tol", 1e-4)?,
        compare_radial: rd.f64_opt("run", "compare_radial")?,
        convergence: rd.f64_opt("run", "convergence")?,
        endpoint_tol: rd.positive("run", "endpoint_tol", 1e-12)?,
    })
}

fn parse_output(rd: &mut Reader, base: &Path) -> Result<OutputBlock, ConfigError> {
    let directory = rd
        .raw("output", "directory")
        .map_or_else(|| base.join("out"), |(_, v)| base.join(v));
    let formats = match rd.raw("output", "formats") {
        Some((line, v)) => {
            let f: Vec<String> = v.split(',').map(|s| s.trim().to_string()).collect();
            if let Some(bad) = f.iter().find(|s| !FORMATS.contains(&s.as_str())) {
                return Err(rd.err(line, format!("unknown output format `{bad}` (csv, summary, off, field)")));
            }
            f
        }
        None => vec!["csv".into(), "summary".into()],
    };
    Ok(OutputBlock { directory, formats })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::parse(text, "test.ini", Path::new("."), "test")
    }

    #[test]
    fn minimal_flat_sweep() {
        let c = parse("[metric]\nkind = flat\n[run]\nmode = green-sweep\n").unwrap();
        assert_eq!(c.run.mode, Mode::GreenSweep);
        assert_eq!(c.run.t, TGrid::Default);
        assert_eq!(c.models().unwrap().len(), 1);
    }

    #[test]
    fn lists_pi_suffix_and_comments() {
        let c = parse(
            "[metric]\nkind = schwarzschild # exact\nmass = 2\n[run]\nmode = green-sweep\n\
             spot_t = 10, 100\nspot_value = 14.8pi, 15.88pi\nspot_tol = 1e-8, 1e-3pi\n",
        )
        .unwrap();
        assert!((c.run.spot_value[0] - 14.8 * PI).abs() < 1e-12);
        assert!((c.run.spot_tol[1] - 1e-3 * PI).abs() < 1e-18);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse("[metric]\nkind = flat\n\n[run]\nmode = sweep-all\n").unwrap_err();
        assert_eq!(e.line, 5);
        let e = parse("[metric]\nkind = flat\nmas = 1\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse("[metric]\nkind = flat\n[run]\nmode = green-sweep\nmonotone_tol = -1\n").unwrap_err();
        assert_eq!(e.line, 5);
        let e = parse("[metric]\nkind = flat\n").unwrap_err();
        assert_eq!(e.line, 0);
        assert!(e.message.contains("[run]"));
    }

    #[test]
    fn capacitary_modes_need_an_inner_radius() {
        let e = parse("[metric]\nkind = schwarzschild\nmass = 1\n[run]\nmode = penrose\np = 2\n").unwrap_err();
        assert!(e.message.contains("inner_radius"));
        parse("[metric]\nkind = schwarzschild\nmass = 1\ninner_radius = horizon\n[run]\nmode = penrose\np = 1.5, 2\n")
            .unwrap();
    }

    #[test]
    fn invalid_model_is_rejected_before_solving() {
        let e = parse("[metric]\nkind = smoothed-schwarzschild\nmass = 1\nsmoothing_a = -2\n[run]\nmode = adm\n")
            .unwrap_err();
        assert!(e.message.contains("smoothing") || e.message.contains("a"), "{e}");
    }
}

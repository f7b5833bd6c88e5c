//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! command = ray
//! q = 1.0
//! t_max = 0.5
//! refine = 3
//! ```
//!
//! Subcommand flags are translated into the same pairs, so a config file and
//! the equivalent command line go through one validator. Validation reports
//! every violated constraint rather than stopping at the first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use chsurf::surface::MAX_REFINEMENT;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based position in the config text, when the error comes from a file.
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            column: Some(column),
            message: message.into(),
        }
    }

    fn plain(message: impl Into<String>) -> Self {
        Self {
            line: None,
            column: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Mesh,
    Solve,
    Ray,
    TodaCheck,
    Holonomy,
    Expmap,
    Moduli,
}

impl Command {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "mesh" => Command::Mesh,
            "solve" => Command::Solve,
            "ray" => Command::Ray,
            "toda-check" => Command::TodaCheck,
            "holonomy" => Command::Holonomy,
            "expmap" => Command::Expmap,
            "moduli" => Command::Moduli,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Mesh => "mesh",
            Command::Solve => "solve",
            Command::Ray => "ray",
            Command::TodaCheck => "toda-check",
            Command::Holonomy => "holonomy",
            Command::Expmap => "expmap",
            Command::Moduli => "moduli",
        }
    }

    /// Keys accepted by this command besides `command`, `output`, `format`.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Command::Mesh => &["refine"],
            Command::Solve => &["refine", "q", "qsq", "q_file", "t", "tol"],
            Command::Ray => &["refine", "q", "qsq", "q_file", "t_max", "step", "tol"],
            Command::TodaCheck => &CHART_KEYS,
            Command::Holonomy => &HOLONOMY_KEYS,
            Command::Expmap => &["Q0", "sweep", "nr", "nalpha", "r", "alpha"],
            Command::Moduli => &["genus"],
        }
    }

    fn default_format(self) -> Format {
        match self {
            Command::Mesh | Command::Solve | Command::Holonomy => Format::Json,
            Command::Ray | Command::TodaCheck | Command::Expmap => Format::Csv,
            Command::Moduli => Format::Markdown,
        }
    }
}

const CHART_KEYS: [&str; 9] = ["data", "example", "grid_n", "grid_half", "mobius_a", "strip_q", "strip_phi0", "perturb", "seed"];
const HOLONOMY_KEYS: [&str; 12] = [
    "data", "example", "grid_n", "grid_half", "mobius_a", "strip_q", "strip_phi0", "center", "radius", "vertices", "steps",
    "analytic",
];
const COMMON_KEYS: [&str; 3] = ["command", "output", "format"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl Format {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "csv" => Format::Csv,
            "json" => Format::Json,
            "markdown" | "md" => Format::Markdown,
            _ => return None,
        })
    }
}

/// Source of the `‖Q₀‖²_μ` field.
#[derive(Debug, Clone, PartialEq)]
pub enum QField {
    /// Constant value of `‖Q₀‖²_μ`.
    Constant(f64),
    /// JSON array with one value per mesh vertex.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChartExample {
    RFuchsian,
    Mobius(Complex64),
    LagrangianStrip { q: Complex64, phi0: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChartSource {
    File(PathBuf),
    Example { example: ChartExample, half: f64, n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Mesh {
        refine: usize,
    },
    Solve {
        refine: usize,
        qsq: QField,
        t: f64,
        tol: f64,
    },
    Ray {
        refine: usize,
        qsq: QField,
        t_max: f64,
        step: f64,
        tol: f64,
    },
    TodaCheck {
        chart: ChartSource,
        perturb: f64,
        seed: u64,
    },
    Holonomy {
        chart: ChartSource,
        center: Complex64,
        radius: f64,
        vertices: usize,
        steps: usize,
        /// Integrate the closed-form ℝ-Fuchsian connection instead of the grid one.
        analytic: bool,
    },
    Expmap {
        q0: f64,
        sweep: bool,
        nr: usize,
        nalpha: usize,
        point: Option<(f64, f64)>,
    },
    Moduli {
        genus: i64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: Params,
    pub output: Option<PathBuf>,
    pub format: Format,
}

/// Raw pairs with their source positions.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Option<(usize, usize)>)>,
}

impl RawConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, Vec<ConfigError>> {
        let mut raw = RawConfig::default();
        let mut errors = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let lineno = n + 1;
            let content = line.split('#').next().unwrap();
            if content.trim().is_empty() {
                continue;
            }
            let indent = content.len() - content.trim_start().len();
            let Some(eq) = content.find('=') else {
                errors.push(ConfigError::at(lineno, indent + 1, "expected `key = value`"));
                continue;
            };
            let key = content[..eq].trim();
            let value_part = &content[eq + 1..];
            let value = value_part.trim();
            let value_col = eq + 2 + (value_part.len() - value_part.trim_start().len());
            if key.is_empty() {
                errors.push(ConfigError::at(lineno, indent + 1, "missing key before `=`"));
                continue;
            }
            if key.chars().any(char::is_whitespace) {
                errors.push(ConfigError::at(lineno, indent + 1, format!("key `{key}` contains whitespace")));
                continue;
            }
            if value.is_empty() {
                errors.push(ConfigError::at(lineno, value_col, format!("missing value for `{key}`")));
                continue;
            }
            if raw.entries.contains_key(key) {
                errors.push(ConfigError::at(lineno, indent + 1, format!("duplicate key `{key}`")));
                continue;
            }
            raw.entries.insert(key.to_string(), (value.to_string(), Some((lineno, value_col))));
        }
        if errors.is_empty() {
            Ok(raw)
        } else {
            Err(errors)
        }
    }

    /// Sets or replaces a key (used for command-line overrides).
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (value.into(), None));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    /// Applies `key=value` override strings.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), Vec<ConfigError>> {
        let mut errors = Vec::new();
        for o in overrides {
            match o.split_once('=') {
                Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => self.set(k.trim(), v.trim()),
                _ => errors.push(ConfigError::plain(format!("override `{o}` is not `key=value`"))),
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

struct Checker<'a> {
    raw: &'a RawConfig,
    errors: Vec<ConfigError>,
}

impl<'a> Checker<'a> {
    fn error(&mut self, key: &str, message: String) {
        let pos = self.raw.entries.get(key).and_then(|(_, p)| *p);
        self.errors.push(match pos {
            Some((l, c)) => ConfigError::at(l, c, message),
            None => ConfigError::plain(message),
        });
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let v = self.raw.get(key)?;
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(_) => {
                self.error(key, format!("`{key}` must be {what}, got `{v}`"));
                None
            }
        }
    }

    fn real(&mut self, key: &str) -> Option<f64> {
        let x: f64 = self.parsed(key, "a real number")?;
        if x.is_finite() {
            Some(x)
        } else {
            self.error(key, format!("`{key}` must be finite"));
            None
        }
    }

    fn required_real(&mut self, key: &str, command: Command) -> Option<f64> {
        if self.raw.get(key).is_none() {
            self.errors
                .push(ConfigError::plain(format!("missing `{key}` (required by {})", command.name())));
            return None;
        }
        self.real(key)
    }

    fn flag(&mut self, key: &str) -> bool {
        match self.raw.get(key) {
            None | Some("false") => false,
            Some("true") => true,
            Some(v) => {
                self.error(key, format!("`{key}` must be true or false, got `{v}`"));
                false
            }
        }
    }

    fn complex(&mut self, key: &str) -> Option<Complex64> {
        let v = self.raw.get(key)?;
        let parts: Vec<&str> = v.split(',').map(str::trim).collect();
        let parsed = match parts.as_slice() {
            [re] => re.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0)),
            [re, im] => re.parse::<f64>().ok().zip(im.parse::<f64>().ok()).map(|(a, b)| Complex64::new(a, b)),
            _ => None,
        };
        match parsed {
            Some(z) if z.is_finite() => Some(z),
            _ => {
                self.error(key, format!("`{key}` must be `re` or `re,im`, got `{v}`"));
                None
            }
        }
    }

    fn count(&mut self, key: &str, default: usize, min: usize, max: usize) -> usize {
        let Some(n) = self.parsed::<usize>(key, "a non-negative integer") else {
            return default;
        };
        if n < min || n > max {
            self.error(key, format!("`{key}` must lie in [{min}, {max}], got {n}"));
        }
        n
    }

    fn refine(&mut self) -> usize {
        self.count("refine", 3, 0, MAX_REFINEMENT)
    }

    fn qfield(&mut self, command: Command) -> QField {
        let given: Vec<&str> = ["q", "qsq", "q_file"].into_iter().filter(|k| self.raw.get(k).is_some()).collect();
        if given.len() > 1 {
            self.errors.push(ConfigError::plain(format!(
                "give only one of `q`, `qsq`, `q_file` (found {})",
                given.join(", ")
            )));
        }
        if let Some(path) = self.raw.get("q_file") {
            return QField::File(PathBuf::from(path));
        }
        let value = if self.raw.get("qsq").is_some() {
            self.real("qsq").map(|v| (v, "qsq"))
        } else if self.raw.get("q").is_some() {
            self.real("q").map(|v| (v * v * v.signum(), "q"))
        } else {
            self.errors.push(ConfigError::plain(format!(
                "missing `q`, `qsq` or `q_file` (required by {})",
                command.name()
            )));
            None
        };
        match value {
            Some((v, key)) if v < 0.0 => {
                self.error(key, "qsq must be ≥ 0".into());
                QField::Constant(0.0)
            }
            Some((v, _)) => QField::Constant(v),
            None => QField::Constant(0.0),
        }
    }

    fn tol(&mut self) -> f64 {
        match self.real("tol") {
            Some(t) if t > 0.0 => t,
            Some(_) => {
                self.error("tol", "solver precondition: `tol` must be > 0".into());
                1e-10
            }
            None => 1e-10,
        }
    }

    fn chart(&mut self) -> ChartSource {
        let n = self.count("grid_n", 81, 5, 4001);
        let half = match self.real("grid_half") {
            Some(h) if h > 0.0 => h,
            Some(_) => {
                self.error("grid_half", "`grid_half` must be > 0".into());
                0.5
            }
            None => 0.5,
        };
        if let Some(path) = self.raw.get("data") {
            if self.raw.get("example").is_some() {
                self.errors.push(ConfigError::plain("give only one of `data` and `example`"));
            }
            return ChartSource::File(PathBuf::from(path));
        }
        let example = match self.raw.get("example").unwrap_or("r-fuchsian") {
            "r-fuchsian" => ChartExample::RFuchsian,
            "mobius" => ChartExample::Mobius(self.complex("mobius_a").unwrap_or(Complex64::new(0.3, 0.0))),
            "lagrangian-strip" => ChartExample::LagrangianStrip {
                q: self.complex("strip_q").unwrap_or(Complex64::new(0.3, 0.0)),
                phi0: self.real("strip_phi0").unwrap_or(std::f64::consts::LN_2),
            },
            other => {
                self.error(
                    "example",
                    format!("unknown example `{other}` (expected r-fuchsian, mobius, lagrangian-strip)"),
                );
                ChartExample::RFuchsian
            }
        };
        let in_disc = !matches!(example, ChartExample::LagrangianStrip { .. });
        if in_disc && half * std::f64::consts::SQRT_2 >= 1.0 {
            self.error("grid_half", "disc-model chart must lie inside the unit disc (grid_half < 1/√2)".into());
        }
        ChartSource::Example { example, half, n }
    }
}

/// Validates raw pairs into a [`RunConfig`], collecting every violation.
pub fn validate_raw(raw: &RawConfig) -> Result<RunConfig, Vec<ConfigError>> {
    let mut ck = Checker { raw, errors: Vec::new() };
    let Some(cmd_text) = raw.get("command") else {
        return Err(vec![ConfigError::plain("missing `command`")]);
    };
    let Some(command) = Command::parse(cmd_text) else {
        ck.error(
            "command",
            format!("unknown command `{cmd_text}` (expected mesh, solve, ray, toda-check, holonomy, expmap, moduli)"),
        );
        return Err(ck.errors);
    };
    for key in raw.entries.keys() {
        if !COMMON_KEYS.contains(&key.as_str()) && !command.keys().contains(&key.as_str()) {
            ck.error(key, format!("key `{key}` is not used by {}", command.name()));
        }
    }
    let format = match raw.get("format") {
        None => command.default_format(),
        Some(f) => match Format::parse(f) {
            Some(fmt) => fmt,
            None => {
                ck.error("format", format!("unknown format `{f}` (expected csv, json, markdown)"));
                command.default_format()
            }
        },
    };
    let supported: &[Format] = match command {
        Command::Mesh | Command::Holonomy => &[Format::Json],
        Command::Solve | Command::Ray | Command::TodaCheck | Command::Expmap => &[Format::Csv, Format::Json],
        Command::Moduli => &[Format::Csv, Format::Markdown],
    };
    if !supported.contains(&format) {
        ck.error("format", format!("{} does not support format {format:?}", command.name()));
    }
    let params = match command {
        Command::Mesh => Params::Mesh { refine: ck.refine() },
        Command::Solve => {
            let refine = ck.refine();
            let qsq = ck.qfield(command);
            let t = ck.required_real("t", command).unwrap_or(0.0);
            if t < 0.0 {
                ck.error("t", "solve precondition: `t` must be ≥ 0".into());
            }
            let tol = ck.tol();
            Params::Solve { refine, qsq, t, tol }
        }
        Command::Ray => {
            let refine = ck.refine();
            let qsq = ck.qfield(command);
            let t_max = ck.required_real("t_max", command).unwrap_or(0.0);
            if t_max < 0.0 {
                ck.error("t_max", "ray precondition: `t_max` must be ≥ 0".into());
            }
            let step = ck.real("step").unwrap_or(0.02);
            if step <= 0.0 {
                ck.error("step", "ray precondition: `step` must be > 0".into());
            }
            let tol = ck.tol();
            Params::Ray {
                refine,
                qsq,
                t_max,
                step,
                tol,
            }
        }
        Command::TodaCheck => {
            let chart = ck.chart();
            let perturb = ck.real("perturb").unwrap_or(0.0);
            if perturb < 0.0 {
                ck.error("perturb", "`perturb` must be ≥ 0".into());
            }
            let seed = ck.parsed::<u64>("seed", "a non-negative integer").unwrap_or(0);
            Params::TodaCheck { chart, perturb, seed }
        }
        Command::Holonomy => {
            let chart = ck.chart();
            let center = ck.complex("center").unwrap_or(Complex64::new(0.0, 0.0));
            let radius = ck.real("radius").unwrap_or(0.3);
            if radius <= 0.0 {
                ck.error("radius", "`radius` must be > 0".into());
            }
            let vertices = ck.count("vertices", 256, 3, 1_000_000);
            let steps = ck.count("steps", 10_000, chsurf::toda::MIN_HOLONOMY_STEPS, 100_000_000);
            let analytic = ck.flag("analytic");
            if analytic && !matches!(chart, ChartSource::Example { example: ChartExample::RFuchsian, .. }) {
                ck.error("analytic", "`analytic = true` needs `example = r-fuchsian`".into());
            }
            Params::Holonomy {
                chart,
                center,
                radius,
                vertices,
                steps,
                analytic,
            }
        }
        Command::Expmap => {
            let q0 = ck.required_real("Q0", command).unwrap_or(0.0);
            if !(0.0..0.5).contains(&q0) {
                ck.error("Q0", format!("expmap precondition: `Q0` must lie in [0, 1/2), got {q0}"));
            }
            let sweep = ck.flag("sweep");
            let nr = ck.count("nr", 200, 1, 100_000);
            let nalpha = ck.count("nalpha", 200, 1, 100_000);
            let point = match (ck.real("r"), ck.real("alpha")) {
                (Some(r), Some(a)) => {
                    if !(0.0..std::f64::consts::FRAC_1_SQRT_2).contains(&r) {
                        ck.error("r", format!("expmap precondition: `r` must lie in [0, 1/√2), got {r}"));
                    }
                    Some((r, a))
                }
                (None, None) => None,
                _ => {
                    ck.errors.push(ConfigError::plain("`r` and `alpha` must be given together"));
                    None
                }
            };
            if !sweep && point.is_none() {
                ck.errors
                    .push(ConfigError::plain("expmap needs `sweep = true` or a point (`r`, `alpha`)"));
            }
            Params::Expmap {
                q0,
                sweep,
                nr,
                nalpha,
                point,
            }
        }
        Command::Moduli => {
            let genus = match ck.raw.get("genus") {
                None => {
                    ck.errors.push(ConfigError::plain("missing `genus` (required by moduli)"));
                    2
                }
                Some(_) => ck.parsed::<i64>("genus", "an integer").unwrap_or(2),
            };
            if genus < 2 {
                ck.error("genus", format!("moduli precondition: `genus` must be ≥ 2, got {genus}"));
            } else if genus > chsurf::moduli::MAX_GENUS {
                ck.error("genus", format!("`genus` must be ≤ {}", chsurf::moduli::MAX_GENUS));
            }
            Params::Moduli { genus }
        }
    };
    let output = raw.get("output").map(PathBuf::from);
    if ck.errors.is_empty() {
        Ok(RunConfig {
            command,
            params,
            output,
            format,
        })
    } else {
        // File order first, then errors that have no position.
        ck.errors.sort_by_key(|e| (e.line.is_none(), e.line, e.column));
        Err(ck.errors)
    }
}

/// Parses and validates config text.
pub fn validate(text: &str) -> Result<RunConfig, Vec<ConfigError>> {
    validate_raw(&RawConfig::parse(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(text: &str) -> Vec<String> {
        validate(text).unwrap_err().iter().map(|e| e.to_string()).collect()
    }

    #[test]
    fn empty_file_names_command() {
        let e = errors("");
        assert_eq!(e, vec!["missing `command`".to_string()]);
    }

    #[test]
    fn negative_q_rejected() {
        let e = errors("command = ray\nq = -1\nt_max = 0.5\n");
        assert!(e.iter().any(|m| m.contains("qsq must be ≥ 0") && m.starts_with("line 2, column 5")), "{e:?}");
    }

    #[test]
    fn negative_t_max_names_precondition() {
        let e = errors("command = ray\nq = 1\nt_max = -0.5\n");
        assert!(e.iter().any(|m| m.contains("ray precondition") && m.contains("t_max")), "{e:?}");
    }

    #[test]
    fn all_violations_reported() {
        let e = errors("command = ray\nqsq = -1\nt_max = -1\nstep = 0\nrefine = 12\nbogus = 1\n");
        assert_eq!(e.len(), 5, "{e:?}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let errs = RawConfig::parse("command = ray\n  nonsense\nt_max =\n").unwrap_err();
        assert_eq!((errs[0].line, errs[0].column), (Some(2), Some(3)));
        assert_eq!(errs[1].line, Some(3));
        assert_eq!(errs.len(), 2);
    }

    #[test]
    fn ray_defaults() {
        let cfg = validate("command = ray # fold probe\nq = 2\nt_max = 0.3\n").unwrap();
        assert_eq!(cfg.format, Format::Csv);
        match cfg.params {
            Params::Ray { refine, qsq, step, .. } => {
                assert_eq!(refine, 3);
                assert_eq!(qsq, QField::Constant(4.0));
                assert_eq!(step, 0.02);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_replace_values() {
        let mut raw = RawConfig::parse("command = moduli\ngenus = 2\n").unwrap();
        raw.apply_overrides(&["genus=3".into()]).unwrap();
        assert_eq!(validate_raw(&raw).unwrap().params, Params::Moduli { genus: 3 });
        assert!(raw.apply_overrides(&["genus".into()]).is_err());
    }

    #[test]
    fn expmap_needs_mode() {
        let e = errors("command = expmap\nQ0 = 0.6\n");
        assert_eq!(e.len(), 2, "{e:?}");
    }
}

//! Sectioned key-value experiment files.
//!
//! ```text
//! [system]
//! n_qubits = 2
//! omega_q = 1
//! omega_c = 2 wq
//! lambda = 0.1 wq        # or: lambdas = 0.08 wq, 0.12 wq
//! theta = "pi/6"
//! mu = 0.05 wq
//! kappa = 3e-5 wq
//! gamma = 3e-5 wq
//! n_fock = 20
//!
//! [experiment]
//! kind = anticrossing
//!
//! [output]
//! path = "anticrossing.csv"
//! ```
//!
//! Frequencies suffixed `wq` are in units of `omega_q`; bare numbers are
//! absolute. Every spec is resolved on parsing: defaults are filled in, so
//! [`render`] writes every key explicitly and `parse_config(render(s)) == s`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use rabi_core::{BareLabel, EvolveOptions, SystemConfig};

use crate::output::format_float;

/// Default half-width of the anticrossing search window, in units of `omega_q`.
pub const BRACKET_HALF_WIDTH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    SpectrumSweep,
    Anticrossing,
    EffectiveCoupling,
    Dynamics,
    Calibrate,
    Ghz,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::SpectrumSweep,
        ExperimentKind::Anticrossing,
        ExperimentKind::EffectiveCoupling,
        ExperimentKind::Dynamics,
        ExperimentKind::Calibrate,
        ExperimentKind::Ghz,
    ];

    /// Name used for `kind` in config files.
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SpectrumSweep => "spectrum_sweep",
            ExperimentKind::Anticrossing => "anticrossing",
            ExperimentKind::EffectiveCoupling => "effective_coupling",
            ExperimentKind::Dynamics => "dynamics",
            ExperimentKind::Calibrate => "calibrate",
            ExperimentKind::Ghz => "ghz",
        }
    }

    /// CLI subcommand that runs this kind.
    pub fn command(self) -> &'static str {
        match self {
            ExperimentKind::SpectrumSweep => "spectrum",
            ExperimentKind::Anticrossing => "anticross",
            ExperimentKind::EffectiveCoupling => "effcoupling",
            ExperimentKind::Dynamics => "dynamics",
            ExperimentKind::Calibrate => "calibrate",
            ExperimentKind::Ghz => "ghz",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                format!("unknown kind {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// Initial condition of a dynamics run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartState {
    /// Dressed ground state, excited by the calibrated pi pulse.
    Ground,
    /// The `|g,g,1>`-like combination of the hybridized pair, no pulse.
    Hybrid,
}

impl StartState {
    pub fn name(self) -> &'static str {
        match self {
            StartState::Ground => "ground",
            StartState::Hybrid => "hybrid",
        }
    }
}

impl FromStr for StartState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ground" => Ok(StartState::Ground),
            "hybrid" => Ok(StartState::Hybrid),
            _ => Err(format!("unknown start {s:?}; expected ground or hybrid")),
        }
    }
}

/// Integrator settings shared by the time-evolution kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    pub n_levels: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        let d = EvolveOptions::default();
        Self {
            n_levels: d.n_levels,
            rtol: d.rtol,
            atol: d.atol,
        }
    }
}

impl Numerics {
    pub fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            n_levels: self.n_levels,
            rtol: self.rtol,
            atol: self.atol,
            ..EvolveOptions::default()
        }
    }
}

/// Kind-specific parameters. Frequencies are absolute.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentParams {
    SpectrumSweep {
        omega_c_min: f64,
        omega_c_max: f64,
        n_points: usize,
        n_levels: usize,
        /// Follow branches by eigenvector overlap instead of sorting by energy.
        track: bool,
    },
    Anticrossing {
        bracket: (f64, f64),
        state_a: BareLabel,
        state_b: BareLabel,
    },
    EffectiveCoupling {
        lambda_grid: Vec<f64>,
    },
    Dynamics {
        start: StartState,
        bracket: (f64, f64),
        /// Ground start: free evolution after the pulse; hybrid start: whole
        /// run. In units of `pi / Omega_eff`.
        duration_pi: f64,
        n_samples: usize,
        numerics: Numerics,
    },
    Calibrate {
        bracket: (f64, f64),
        /// Pulse areas of the coarse scan.
        scan: Vec<f64>,
        numerics: Numerics,
    },
    Ghz {
        bracket: (f64, f64),
        numerics: Numerics,
    },
}

impl ExperimentParams {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            ExperimentParams::SpectrumSweep { .. } => ExperimentKind::SpectrumSweep,
            ExperimentParams::Anticrossing { .. } => ExperimentKind::Anticrossing,
            ExperimentParams::EffectiveCoupling { .. } => ExperimentKind::EffectiveCoupling,
            ExperimentParams::Dynamics { .. } => ExperimentKind::Dynamics,
            ExperimentParams::Calibrate { .. } => ExperimentKind::Calibrate,
            ExperimentParams::Ghz { .. } => ExperimentKind::Ghz,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub system: SystemConfig,
    pub params: ExperimentParams,
    /// CSV destination; the CLI's `--out` takes precedence.
    pub output_path: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn kind(&self) -> ExperimentKind {
        self.params.kind()
    }

    /// Every violated invariant at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let problems: Vec<Problem> = validation_messages(&self.system, &self.params)
            .into_iter()
            .map(Problem::general)
            .collect();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { problems })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub line: Option<usize>,
    pub message: String,
}

impl Problem {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// All problems found in a config, syntax and validation alike.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub problems: Vec<Problem>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} problem(s) in config", self.problems.len())?;
        for p in &self.problems {
            write!(f, "\n  {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SectionName {
    System,
    Experiment,
    Output,
}

impl SectionName {
    fn name(self) -> &'static str {
        match self {
            SectionName::System => "system",
            SectionName::Experiment => "experiment",
            SectionName::Output => "output",
        }
    }
}

struct Entry {
    line: usize,
    value: String,
}

/// Keys of one section, consumed as they are read; whatever is left over is
/// unknown.
struct Section<'p> {
    name: &'static str,
    entries: BTreeMap<String, Entry>,
    problems: &'p mut Vec<Problem>,
}

impl Section<'_> {
    fn optional<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Option<T> {
        let entry = self.entries.remove(key)?;
        match parse(&entry.value) {
            Ok(v) => Some(v),
            Err(e) => {
                self.problems
                    .push(Problem::at(entry.line, format!("{key}: {e}")));
                None
            }
        }
    }

    fn required<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Option<T> {
        if !self.entries.contains_key(key) {
            self.problems.push(Problem::general(format!(
                "missing key `{key}` in [{}]",
                self.name
            )));
            return None;
        }
        self.optional(key, parse)
    }

    /// `Some(default)` when absent, `None` when present but malformed.
    fn or<T>(
        &mut self,
        key: &str,
        default: T,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Option<T> {
        if self.entries.contains_key(key) {
            self.optional(key, parse)
        } else {
            Some(default)
        }
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn finish(self, context: &str) {
        let mut rest: Vec<_> = self.entries.into_iter().collect();
        rest.sort_by_key(|(_, e)| e.line);
        for (key, e) in rest {
            self.problems.push(Problem::at(
                e.line,
                format!("unknown key `{key}` in [{}]{context}", self.name),
            ));
        }
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(s: &str) -> Result<&str, String> {
    let s = s.trim();
    match s.strip_prefix('"') {
        Some(rest) => rest
            .strip_suffix('"')
            .filter(|inner| !inner.contains('"'))
            .ok_or_else(|| format!("malformed string {s}")),
        None => Ok(s),
    }
}

fn lex(text: &str, problems: &mut Vec<Problem>) -> BTreeMap<SectionName, BTreeMap<String, Entry>> {
    let mut sections: BTreeMap<SectionName, BTreeMap<String, Entry>> = BTreeMap::new();
    let mut current: Option<SectionName> = None;
    let mut seen_header: BTreeMap<SectionName, usize> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let Some(name) = header.strip_suffix(']') else {
                problems.push(Problem::at(
                    line,
                    format!("malformed section header {content:?}"),
                ));
                current = None;
                continue;
            };
            current = match name.trim() {
                "system" => Some(SectionName::System),
                "experiment" => Some(SectionName::Experiment),
                "output" => Some(SectionName::Output),
                other => {
                    problems.push(Problem::at(
                        line,
                        format!("unknown section [{other}]; expected [system], [experiment] or [output]"),
                    ));
                    None
                }
            };
            if let Some(s) = current {
                if let Some(first) = seen_header.insert(s, line) {
                    problems.push(Problem::at(
                        line,
                        format!("section [{}] repeated (first at line {first})", s.name()),
                    ));
                }
                sections.entry(s).or_default();
            }
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            problems.push(Problem::at(
                line,
                format!("expected `key = value`, got {content:?}"),
            ));
            continue;
        };
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            problems.push(Problem::at(line, format!("invalid key {key:?}")));
            continue;
        }
        let Some(section) = current else {
            if seen_header.is_empty() {
                problems.push(Problem::at(
                    line,
                    format!("key `{key}` outside any section"),
                ));
            }
            continue;
        };
        let map = sections.entry(section).or_default();
        if let Some(prev) = map.get(key) {
            problems.push(Problem::at(
                line,
                format!("duplicate key `{key}` (first at line {})", prev.line),
            ));
            continue;
        }
        map.insert(
            key.to_string(),
            Entry {
                line,
                value: value.trim().to_string(),
            },
        );
    }
    sections
}

fn parse_number(s: &str) -> Result<f64, String> {
    let s = unquote(s)?;
    let v: f64 = s
        .parse()
        .map_err(|_| format!("expected a number, got {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a finite number, got {s:?}"))
    }
}

fn parse_usize(s: &str) -> Result<usize, String> {
    let s = unquote(s)?;
    s.parse()
        .map_err(|_| format!("expected a non-negative integer, got {s:?}"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match unquote(s)? {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("expected true or false, got {other:?}")),
    }
}

fn parse_text(s: &str) -> Result<String, String> {
    let s = unquote(s)?;
    if s.is_empty() {
        Err("empty value".into())
    } else {
        Ok(s.to_string())
    }
}

/// A frequency; the `wq` suffix scales by `omega_q`.
fn parse_frequency(s: &str, omega_q: f64) -> Result<f64, String> {
    let s = unquote(s)?;
    match s.strip_suffix("wq") {
        Some(num) => parse_number(num.trim_end()).map(|v| v * omega_q),
        None => parse_number(s),
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let s = unquote(s)?;
    if s.is_empty() {
        return Err("empty list".into());
    }
    s.split(',').map(|x| item(x.trim())).collect()
}

/// A number, or a multiple of pi such as `pi/6`, `-2pi/3` or `0.5*pi`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let s = unquote(s)?;
    if let Ok(v) = parse_number(s) {
        return Ok(v);
    }
    let compact: String = s
        .replace('π', "pi")
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    let (sign, body) = match compact.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, compact.strip_prefix('+').unwrap_or(&compact)),
    };
    let bad = || format!("expected a number or a multiple of pi, got {s:?}");
    let (coef, den) = body.split_once("pi").ok_or_else(bad)?;
    let coef = match coef.strip_suffix('*').unwrap_or(coef) {
        "" => 1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let den = match den {
        "" => 1.0,
        d => d
            .strip_prefix('/')
            .and_then(|d| d.parse::<f64>().ok())
            .filter(|d| *d != 0.0)
            .ok_or_else(bad)?,
    };
    let v = sign * coef * PI / den;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn parse_label(s: &str) -> Result<BareLabel, String> {
    unquote(s)?.parse()
}

fn parse_bracket(s: &str, omega_q: f64) -> Result<(f64, f64), String> {
    match parse_list(s, |x| parse_frequency(x, omega_q))?.as_slice() {
        [lo, hi] => Ok((*lo, *hi)),
        other => Err(format!(
            "expected two frequencies `lo, hi`, got {}",
            other.len()
        )),
    }
}

/// Parses a config whose `[experiment]` section names its `kind`.
pub fn parse_config(text: &str) -> Result<ExperimentSpec, ConfigError> {
    parse_with_kind(text, None)
}

/// Parses a config run through the subcommand for `kind`: a missing `kind`
/// key defaults to it, a different one is an error.
pub fn parse_config_for(text: &str, kind: ExperimentKind) -> Result<ExperimentSpec, ConfigError> {
    parse_with_kind(text, Some(kind))
}

fn parse_with_kind(
    text: &str,
    expected: Option<ExperimentKind>,
) -> Result<ExperimentSpec, ConfigError> {
    let mut problems = Vec::new();
    let mut sections = lex(text, &mut problems);
    let mut take = |name: SectionName, problems: &mut Vec<Problem>| {
        if !sections.contains_key(&name) && name != SectionName::Output {
            problems.push(Problem::general(format!(
                "missing section [{}]",
                name.name()
            )));
        }
        sections.remove(&name).unwrap_or_default()
    };
    let system_entries = take(SectionName::System, &mut problems);
    let experiment_entries = take(SectionName::Experiment, &mut problems);
    let output_entries = take(SectionName::Output, &mut problems);

    let system = parse_system(system_entries, &mut problems);
    let omega_q = system
        .as_ref()
        .map(|s| s.omega_q)
        .filter(|w| *w > 0.0)
        .unwrap_or(1.0);
    let params = parse_experiment(
        experiment_entries,
        expected,
        omega_q,
        system.as_ref(),
        &mut problems,
    );

    let mut output = Section {
        name: "output",
        entries: output_entries,
        problems: &mut problems,
    };
    let output_path = output.optional("path", parse_text).map(PathBuf::from);
    output.finish("");

    if let (Some(system), Some(params)) = (&system, &params) {
        problems.extend(
            validation_messages(system, params)
                .into_iter()
                .map(Problem::general),
        );
    }
    match (system, params) {
        (Some(system), Some(params)) if problems.is_empty() => Ok(ExperimentSpec {
            system,
            params,
            output_path,
        }),
        _ => Err(ConfigError { problems }),
    }
}

fn parse_system(
    entries: BTreeMap<String, Entry>,
    problems: &mut Vec<Problem>,
) -> Option<SystemConfig> {
    let mut s = Section {
        name: "system",
        entries,
        problems,
    };
    let n_qubits = s.required("n_qubits", parse_usize);
    let omega_q = s.required("omega_q", parse_number);
    let wq = omega_q.filter(|w| *w > 0.0).unwrap_or(1.0);
    let freq = |v: &str| parse_frequency(v, wq);
    let omega_c = s.required("omega_c", freq);
    let lambdas = match (s.has("lambda"), s.has("lambdas")) {
        (true, true) => {
            let line = s.entries["lambdas"].line;
            s.entries.remove("lambda");
            s.entries.remove("lambdas");
            s.problems.push(Problem::at(
                line,
                "give either `lambda` or `lambdas`, not both",
            ));
            None
        }
        (true, false) => s
            .optional("lambda", freq)
            .zip(n_qubits)
            .map(|(l, n)| vec![l; n]),
        _ => s.required("lambdas", |v| parse_list(v, freq)),
    };
    let theta = s.required("theta", parse_angle);
    let mu = s.required("mu", freq);
    let kappa = s.required("kappa", freq);
    let gamma = s.required("gamma", freq);
    let n_fock = s.required("n_fock", parse_usize);
    s.finish("");
    Some(SystemConfig {
        n_qubits: n_qubits?,
        omega_q: omega_q?,
        omega_c: omega_c?,
        lambdas: lambdas?,
        theta: theta?,
        mu: mu?,
        kappa: kappa?,
        gamma: gamma?,
        n_fock: n_fock?,
    })
}

fn parse_numerics(s: &mut Section<'_>) -> Option<Numerics> {
    let d = Numerics::default();
    let n_levels = s.or("n_levels", d.n_levels, parse_usize);
    let rtol = s.or("rtol", d.rtol, parse_number);
    let atol = s.or("atol", d.atol, parse_number);
    Some(Numerics {
        n_levels: n_levels?,
        rtol: rtol?,
        atol: atol?,
    })
}

fn parse_experiment(
    entries: BTreeMap<String, Entry>,
    expected: Option<ExperimentKind>,
    omega_q: f64,
    system: Option<&SystemConfig>,
    problems: &mut Vec<Problem>,
) -> Option<ExperimentParams> {
    let omega_c = system.map(|c| c.omega_c);
    let n_qubits = system.map(|c| c.n_qubits);
    let mut s = Section {
        name: "experiment",
        entries,
        problems,
    };
    let line = s.entries.get("kind").map(|e| e.line);
    let kind = match (
        s.optional("kind", |v| unquote(v)?.parse::<ExperimentKind>()),
        expected,
    ) {
        (Some(k), Some(e)) if k != e => {
            s.problems.push(Problem::at(
                line.expect("kind was present"),
                format!("kind {k} cannot be run by the `{}` command", e.command()),
            ));
            None
        }
        (Some(k), _) => Some(k),
        (None, Some(e)) if line.is_none() => Some(e),
        (None, None) if line.is_none() => {
            s.problems
                .push(Problem::general("missing key `kind` in [experiment]"));
            None
        }
        (None, _) => None,
    };
    let Some(kind) = kind else {
        // without a kind the remaining keys cannot be checked
        return None;
    };
    let freq = |v: &str| parse_frequency(v, omega_q);
    // omega_c has been reported already if it is missing
    let centre = omega_c.unwrap_or(0.0);
    let default_bracket = (
        centre - BRACKET_HALF_WIDTH * omega_q,
        centre + BRACKET_HALF_WIDTH * omega_q,
    );
    let bracket =
        |s: &mut Section<'_>| s.or("bracket", default_bracket, |v| parse_bracket(v, omega_q));
    let params = match kind {
        ExperimentKind::SpectrumSweep => {
            let omega_c_min = s.required("omega_c_min", freq);
            let omega_c_max = s.required("omega_c_max", freq);
            let n_points = s.required("n_points", parse_usize);
            let n_levels = s.or("n_levels", 12, parse_usize);
            let track = s.or("track", true, parse_bool);
            (|| {
                Some(ExperimentParams::SpectrumSweep {
                    omega_c_min: omega_c_min?,
                    omega_c_max: omega_c_max?,
                    n_points: n_points?,
                    n_levels: n_levels?,
                    track: track?,
                })
            })()
        }
        ExperimentKind::Anticrossing => {
            let bracket = bracket(&mut s);
            // defaults need the qubit count, which has been reported if missing
            let n = n_qubits.unwrap_or(0);
            let state_a = s.or("state_a", BareLabel::all_ground(n, 1), parse_label);
            let state_b = s.or("state_b", BareLabel::all_excited(n, 0), parse_label);
            (|| {
                Some(ExperimentParams::Anticrossing {
                    bracket: bracket?,
                    state_a: state_a?,
                    state_b: state_b?,
                })
            })()
        }
        ExperimentKind::EffectiveCoupling => s
            .required("lambda_grid", |v| parse_list(v, freq))
            .map(|lambda_grid| ExperimentParams::EffectiveCoupling { lambda_grid }),
        ExperimentKind::Dynamics => {
            let start = s.or("start", StartState::Ground, |v| unquote(v)?.parse());
            let bracket = bracket(&mut s);
            let duration_pi = s.or("duration_pi", 2.5, parse_number);
            let n_samples = s.or("n_samples", 801, parse_usize);
            let numerics = parse_numerics(&mut s);
            (|| {
                Some(ExperimentParams::Dynamics {
                    start: start?,
                    bracket: bracket?,
                    duration_pi: duration_pi?,
                    n_samples: n_samples?,
                    numerics: numerics?,
                })
            })()
        }
        ExperimentKind::Calibrate => {
            let bracket = bracket(&mut s);
            let default_scan = rabi_core::CalibrationOptions::default().scan;
            let scan = s.or("scan", default_scan, |v| parse_list(v, parse_angle));
            let numerics = parse_numerics(&mut s);
            (|| {
                Some(ExperimentParams::Calibrate {
                    bracket: bracket?,
                    scan: scan?,
                    numerics: numerics?,
                })
            })()
        }
        ExperimentKind::Ghz => {
            let bracket = bracket(&mut s);
            let numerics = parse_numerics(&mut s);
            (|| {
                Some(ExperimentParams::Ghz {
                    bracket: bracket?,
                    numerics: numerics?,
                })
            })()
        }
    };
    s.finish(&format!(" for kind {kind}"));
    params
}

fn check_bracket(bracket: (f64, f64), problems: &mut Vec<String>) {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        problems.push(format!("bracket ({lo}, {hi}) must satisfy 0 < lo < hi"));
    }
}

fn check_numerics(n: &Numerics, dim: Option<usize>, problems: &mut Vec<String>) {
    if n.n_levels < 2 || dim.is_some_and(|d| n.n_levels > d) {
        problems.push(format!(
            "n_levels = {} must be between 2 and the space dimension",
            n.n_levels
        ));
    }
    for (name, v) in [("rtol", n.rtol), ("atol", n.atol)] {
        if !(v > 0.0) {
            problems.push(format!("{name} must be > 0, got {v}"));
        }
    }
}

fn check_label(key: &str, label: &BareLabel, system: &SystemConfig, problems: &mut Vec<String>) {
    if label.qubits.len() != system.n_qubits {
        problems.push(format!(
            "{key} {label} has {} qubit state(s) for {} qubit(s)",
            label.qubits.len(),
            system.n_qubits
        ));
    }
    if label.photons >= system.n_fock {
        problems.push(format!("{key} {label} needs n_fock > {}", label.photons));
    }
}

fn validation_messages(system: &SystemConfig, params: &ExperimentParams) -> Vec<String> {
    let mut problems = match system.validate() {
        Err(rabi_core::Error::InvalidConfig(v)) => v,
        Err(e) => vec![e.to_string()],
        Ok(()) => Vec::new(),
    };
    let dim = system.shape().ok().map(|s| s.dim());
    match params {
        ExperimentParams::SpectrumSweep {
            omega_c_min,
            omega_c_max,
            n_points,
            n_levels,
            ..
        } => {
            if !(*omega_c_min > 0.0 && omega_c_max > omega_c_min) {
                problems.push(format!(
                    "sweep range ({omega_c_min}, {omega_c_max}) must satisfy 0 < omega_c_min < omega_c_max"
                ));
            }
            if *n_points < 2 {
                problems.push(format!("n_points must be >= 2, got {n_points}"));
            }
            if *n_levels < 1 || dim.is_some_and(|d| *n_levels > d) {
                problems.push(format!(
                    "n_levels = {n_levels} must be between 1 and the space dimension"
                ));
            }
        }
        ExperimentParams::Anticrossing {
            bracket,
            state_a,
            state_b,
        } => {
            check_bracket(*bracket, &mut problems);
            check_label("state_a", state_a, system, &mut problems);
            check_label("state_b", state_b, system, &mut problems);
            if state_a == state_b {
                problems.push("state_a and state_b must differ".into());
            }
        }
        ExperimentParams::EffectiveCoupling { lambda_grid } => {
            if lambda_grid.iter().any(|l| !(*l > 0.0)) {
                problems.push("lambda_grid entries must be > 0".into());
            }
        }
        ExperimentParams::Dynamics {
            bracket,
            duration_pi,
            n_samples,
            numerics,
            ..
        } => {
            if system.n_qubits != 2 {
                problems.push(format!(
                    "dynamics output has two-qubit columns; n_qubits is {}",
                    system.n_qubits
                ));
            }
            check_bracket(*bracket, &mut problems);
            if !(*duration_pi > 0.0) {
                problems.push(format!("duration_pi must be > 0, got {duration_pi}"));
            }
            if *n_samples < 2 {
                problems.push(format!("n_samples must be >= 2, got {n_samples}"));
            }
            check_numerics(numerics, dim, &mut problems);
        }
        ExperimentParams::Calibrate {
            bracket,
            scan,
            numerics,
        } => {
            check_bracket(*bracket, &mut problems);
            if scan.len() < 3 || scan.iter().any(|a| !(*a > 0.0)) {
                problems.push("scan needs at least three positive pulse areas".into());
            }
            check_numerics(numerics, dim, &mut problems);
        }
        ExperimentParams::Ghz { bracket, numerics } => {
            check_bracket(*bracket, &mut problems);
            check_numerics(numerics, dim, &mut problems);
        }
    }
    problems
}

fn float_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format_float(*v))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Writes `spec` back as config text, every key explicit and every frequency
/// absolute.
pub fn render(spec: &ExperimentSpec) -> String {
    let s = &spec.system;
    let mut out = String::new();
    let f = format_float;
    // writing to a String cannot fail
    let _ = (|| -> fmt::Result {
        writeln!(out, "[system]")?;
        writeln!(out, "n_qubits = {}", s.n_qubits)?;
        writeln!(out, "omega_q = {}", f(s.omega_q))?;
        writeln!(out, "omega_c = {}", f(s.omega_c))?;
        writeln!(out, "lambdas = {}", float_list(&s.lambdas))?;
        writeln!(out, "theta = {}", f(s.theta))?;
        writeln!(out, "mu = {}", f(s.mu))?;
        writeln!(out, "kappa = {}", f(s.kappa))?;
        writeln!(out, "gamma = {}", f(s.gamma))?;
        writeln!(out, "n_fock = {}", s.n_fock)?;
        writeln!(out)?;
        writeln!(out, "[experiment]")?;
        writeln!(out, "kind = {}", spec.kind())?;
        let bracket = |out: &mut String, (lo, hi): (f64, f64)| {
            writeln!(out, "bracket = {}, {}", f(lo), f(hi))
        };
        let numerics = |out: &mut String, n: &Numerics| -> fmt::Result {
            writeln!(out, "n_levels = {}", n.n_levels)?;
            writeln!(out, "rtol = {}", f(n.rtol))?;
            writeln!(out, "atol = {}", f(n.atol))
        };
        match &spec.params {
            ExperimentParams::SpectrumSweep {
                omega_c_min,
                omega_c_max,
                n_points,
                n_levels,
                track,
            } => {
                writeln!(out, "omega_c_min = {}", f(*omega_c_min))?;
                writeln!(out, "omega_c_max = {}", f(*omega_c_max))?;
                writeln!(out, "n_points = {n_points}")?;
                writeln!(out, "n_levels = {n_levels}")?;
                writeln!(out, "track = {track}")?;
            }
            ExperimentParams::Anticrossing {
                bracket: b,
                state_a,
                state_b,
            } => {
                bracket(&mut out, *b)?;
                writeln!(out, "state_a = \"{state_a}\"")?;
                writeln!(out, "state_b = \"{state_b}\"")?;
            }
            ExperimentParams::EffectiveCoupling { lambda_grid } => {
                writeln!(out, "lambda_grid = {}", float_list(lambda_grid))?;
            }
            ExperimentParams::Dynamics {
                start,
                bracket: b,
                duration_pi,
                n_samples,
                numerics: n,
            } => {
                writeln!(out, "start = {}", start.name())?;
                bracket(&mut out, *b)?;
                writeln!(out, "duration_pi = {}", f(*duration_pi))?;
                writeln!(out, "n_samples = {n_samples}")?;
                numerics(&mut out, n)?;
            }
            ExperimentParams::Calibrate {
                bracket: b,
                scan,
                numerics: n,
            } => {
                bracket(&mut out, *b)?;
                writeln!(out, "scan = {}", float_list(scan))?;
                numerics(&mut out, n)?;
            }
            ExperimentParams::Ghz {
                bracket: b,
                numerics: n,
            } => {
                bracket(&mut out, *b)?;
                numerics(&mut out, n)?;
            }
        }
        writeln!(out)?;
        writeln!(out, "[output]")?;
        if let Some(p) = &spec.output_path {
            writeln!(out, "path = \"{}\"", p.display())?;
        }
        Ok(())
    })();
    out
}

//! INI-style run configuration.
//!
//! Keys may appear before any section header, under `[general]`, or under a
//! section named after a subcommand. Values resolve in the order: built-in
//! defaults, command defaults, file general keys, the command's section,
//! command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use fraclab::dynamics::Basis;
use serde::Serialize;

/// Largest accepted interior grid size (dense `N × N` storage).
pub const MAX_GRID: usize = 8192;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Spectrum,
    Gaps,
    Evolve,
    Observability,
    Sharpness,
    Hum,
    Pohozaev,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Spectrum,
        Command::Gaps,
        Command::Evolve,
        Command::Observability,
        Command::Sharpness,
        Command::Hum,
        Command::Pohozaev,
        Command::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Gaps => "gaps",
            Command::Evolve => "evolve",
            Command::Observability => "observability",
            Command::Sharpness => "sharpness",
            Command::Hum => "hum",
            Command::Pohozaev => "pohozaev",
            Command::Sweep => "sweep",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Commands that run a single configuration rather than a sweep.
    fn is_single(self) -> bool {
        matches!(self, Command::Evolve | Command::Hum | Command::Pohozaev)
    }

    fn is_single_grid(self) -> bool {
        self.is_single() || matches!(self, Command::Observability | Command::Sharpness)
    }
}

/// Starting datum for `evolve`, `hum` and `pohozaev`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Seeded uniform coefficients in `[-1, 1] + i[-1, 1]`.
    Random,
    Zero,
    /// A single basis function.
    Mode(usize),
}

/// Partially specified settings from one layer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub beta: Option<Vec<f64>>,
    pub n: Option<Vec<usize>>,
    pub modes: Option<Vec<usize>>,
    pub horizon: Option<f64>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub states: Option<usize>,
    pub quadrature: Option<usize>,
    pub basis: Option<Basis>,
    pub poincare: Option<f64>,
    pub initial: Option<InitialState>,
    pub control_csv: Option<bool>,
    pub times: Option<usize>,
}

impl Settings {
    /// Overwrite every field that `other` specifies.
    pub fn merge(&mut self, other: &Settings) {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if other.$f.is_some() {
                    self.$f = other.$f.clone();
                }
            )*};
        }
        take!(
            beta,
            n,
            modes,
            horizon,
            epsilon,
            seed,
            out,
            states,
            quadrature,
            basis,
            poincare,
            initial,
            control_csv,
            times
        );
    }

    fn builtin() -> Self {
        Settings {
            beta: Some(vec![0.5]),
            n: Some(vec![1024]),
            modes: Some(vec![10]),
            horizon: Some(4.0),
            epsilon: Some(0.2),
            seed: Some(0),
            out: Some(PathBuf::from("out")),
            states: Some(20),
            quadrature: Some(256),
            basis: Some(Basis::L2),
            poincare: None,
            initial: Some(InitialState::Random),
            control_csv: Some(false),
            times: Some(11),
        }
    }

    fn command_defaults(cmd: Command) -> Self {
        match cmd {
            Command::Hum => Settings {
                beta: Some(vec![0.6]),
                modes: Some(vec![20]),
                horizon: Some(1.0),
                ..Default::default()
            },
            Command::Sharpness => Settings {
                beta: Some(vec![0.25, 0.5, 0.75]),
                modes: Some(vec![5, 10, 20, 40]),
                ..Default::default()
            },
            Command::Pohozaev => Settings {
                beta: Some(vec![0.6]),
                modes: Some(vec![2]),
                horizon: Some(1.0),
                ..Default::default()
            },
            Command::Evolve => Settings {
                horizon: Some(10.0),
                ..Default::default()
            },
            Command::Sweep => Settings {
                beta: Some(vec![0.3, 0.5, 0.75]),
                n: Some(vec![512, 1024, 2048]),
                ..Default::default()
            },
            _ => Settings::default(),
        }
    }

    /// Apply a command-line flag; errors carry the flag name instead of a line.
    pub fn set_flag(&mut self, flag: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        self.set(key, value, 0).map_err(|e| ConfigError {
            line: None,
            message: format!("--{flag}: {}", e.message),
        })
    }

    /// Parse and range-check one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let err = |m: String| ConfigError::at(line, m);
        match key {
            "beta" => {
                let v = parse_list::<f64>(value).map_err(|e| err(format!("beta: {e}")))?;
                if let Some(b) = v.iter().find(|b| !(**b > 0.0 && **b <= 1.0)) {
                    return Err(err(format!("beta must lie in (0, 1], got {b}")));
                }
                self.beta = Some(v);
            }
            "n" => {
                let v = parse_list::<usize>(value).map_err(|e| err(format!("n: {e}")))?;
                if let Some(n) = v.iter().find(|n| **n == 0 || **n > MAX_GRID) {
                    return Err(err(format!("n must lie in [1, {MAX_GRID}], got {n}")));
                }
                self.n = Some(v);
            }
            "modes" => {
                let v = parse_list::<usize>(value).map_err(|e| err(format!("modes: {e}")))?;
                if v.contains(&0) {
                    return Err(err("modes must be at least 1".into()));
                }
                self.modes = Some(v);
            }
            "t" | "horizon" => {
                let t = parse_one::<f64>(value).map_err(|e| err(format!("T: {e}")))?;
                if !(t > 0.0 && t.is_finite()) {
                    return Err(err(format!("T must be positive and finite, got {t}")));
                }
                self.horizon = Some(t);
            }
            "epsilon" => {
                let e = parse_one::<f64>(value).map_err(|e| err(format!("epsilon: {e}")))?;
                if !(e > 0.0 && e <= 1.0) {
                    return Err(err(format!("epsilon must lie in (0, 1], got {e}")));
                }
                self.epsilon = Some(e);
            }
            "seed" => {
                self.seed = Some(parse_one(value).map_err(|e| err(format!("seed: {e}")))?);
            }
            "out" => {
                if value.is_empty() {
                    return Err(err("out must not be empty".into()));
                }
                self.out = Some(PathBuf::from(value));
            }
            "states" => {
                let s = parse_one::<usize>(value).map_err(|e| err(format!("states: {e}")))?;
                if s == 0 {
                    return Err(err("states must be at least 1".into()));
                }
                self.states = Some(s);
            }
            "quadrature" => {
                let m = parse_one::<usize>(value).map_err(|e| err(format!("quadrature: {e}")))?;
                if m < 64 || m % 2 != 0 {
                    return Err(err(format!(
                        "quadrature must be an even number >= 64, got {m}"
                    )));
                }
                self.quadrature = Some(m);
            }
            "basis" => {
                self.basis = Some(match value {
                    "l2" => Basis::L2,
                    "energy" => Basis::Energy,
                    _ => {
                        return Err(err(format!(
                            "basis must be 'l2' or 'energy', got '{value}'"
                        )))
                    }
                });
            }
            "poincare" => {
                let p = parse_one::<f64>(value).map_err(|e| err(format!("poincare: {e}")))?;
                if !(p > 0.0 && p.is_finite()) {
                    return Err(err(format!("poincare must be positive, got {p}")));
                }
                self.poincare = Some(p);
            }
            "initial" => {
                self.initial = Some(match value {
                    "random" => InitialState::Random,
                    "zero" => InitialState::Zero,
                    other => match other.parse::<usize>() {
                        Ok(k) if k >= 1 => InitialState::Mode(k),
                        _ => {
                            return Err(err(format!(
                                "initial must be 'random', 'zero' or a mode number, got '{value}'"
                            )))
                        }
                    },
                });
            }
            "control_csv" => {
                self.control_csv = Some(match value {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => return Err(err(format!("control_csv must be a boolean, got '{value}'"))),
                });
            }
            "times" => {
                let t = parse_one::<usize>(value).map_err(|e| err(format!("times: {e}")))?;
                if t < 2 {
                    return Err(err("times must be at least 2".into()));
                }
                self.times = Some(t);
            }
            _ => return Err(err(format!("unknown key '{key}'"))),
        }
        Ok(())
    }
}

fn parse_one<T: std::str::FromStr>(value: &str) -> Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("malformed value '{}'", value.trim()))
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String> {
    let items: Vec<T> = value.split(',').map(parse_one).collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

/// A parsed configuration file: general keys plus per-command sections.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub general: Settings,
    pub sections: BTreeMap<Command, Settings>,
}

pub fn parse_config(text: &str) -> Result<ConfigFile, ConfigError> {
    let mut file = ConfigFile::default();
    let mut current: Option<Command> = None;
    let mut seen: BTreeMap<(Option<Command>, String), usize> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| {
                    ConfigError::at(line, format!("malformed section header '{content}'"))
                })?
                .trim()
                .to_ascii_lowercase();
            current =
                if name == "general" {
                    None
                } else {
                    Some(Command::from_name(&name).ok_or_else(|| {
                        ConfigError::at(line, format!("unknown section '[{name}]'"))
                    })?)
                };
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            ConfigError::at(line, format!("expected 'key = value', got '{content}'"))
        })?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        if let Some(first) = seen.insert((current, key.clone()), line) {
            return Err(ConfigError::at(
                line,
                format!("duplicate key '{key}' (first set on line {first})"),
            ));
        }
        let target = match current {
            None => &mut file.general,
            Some(cmd) => file.sections.entry(cmd).or_default(),
        };
        target.set(&key, value, line)?;
    }
    Ok(file)
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub betas: Vec<f64>,
    pub grid_sizes: Vec<usize>,
    pub modes: Vec<usize>,
    pub horizon: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub states: usize,
    pub quadrature: usize,
    pub basis: Basis,
    pub poincare: Option<f64>,
    pub initial: InitialState,
    pub control_csv: bool,
    pub times: usize,
}

impl RunConfig {
    /// Layer defaults, `file` and `overrides` for `command`.
    pub fn resolve(
        command: Command,
        file: &ConfigFile,
        overrides: &Settings,
    ) -> Result<Self, ConfigError> {
        let mut s = Settings::builtin();
        s.merge(&Settings::command_defaults(command));
        s.merge(&file.general);
        if let Some(section) = file.sections.get(&command) {
            s.merge(section);
        }
        s.merge(overrides);

        let cfg = RunConfig {
            command,
            betas: s.beta.unwrap(),
            grid_sizes: s.n.unwrap(),
            modes: s.modes.unwrap(),
            horizon: s.horizon.unwrap(),
            epsilon: s.epsilon.unwrap(),
            seed: s.seed.unwrap(),
            out: s.out.unwrap(),
            states: s.states.unwrap(),
            quadrature: s.quadrature.unwrap(),
            basis: s.basis.unwrap(),
            poincare: s.poincare,
            initial: s.initial.unwrap(),
            control_csv: s.control_csv.unwrap(),
            times: s.times.unwrap(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse `text` and resolve it for `command` without overrides.
    pub fn from_text(command: Command, text: &str) -> Result<Self, ConfigError> {
        Self::resolve(command, &parse_config(text)?, &Settings::default())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let kmax = *self.modes.iter().max().unwrap();
        if let Some(n) = self.grid_sizes.iter().find(|&&n| n < kmax) {
            return Err(ConfigError::global(format!(
                "modes ({kmax}) cannot exceed the grid size n ({n})"
            )));
        }
        if self.command.is_single() {
            for (name, len) in [
                ("beta", self.betas.len()),
                ("n", self.grid_sizes.len()),
                ("modes", self.modes.len()),
            ] {
                if len != 1 {
                    return Err(ConfigError::global(format!(
                        "{} takes a single {name} value, got {len}",
                        self.command.name()
                    )));
                }
            }
        }
        if self.command.is_single_grid() && self.grid_sizes.len() != 1 {
            return Err(ConfigError::global(format!(
                "{} takes a single n value, got {}",
                self.command.name(),
                self.grid_sizes.len()
            )));
        }
        if let InitialState::Mode(k) = self.initial {
            if k > kmax {
                return Err(ConfigError::global(format!(
                    "initial mode {k} exceeds modes ({kmax})"
                )));
            }
        }
        if self.command == Command::Gaps && kmax < 2 {
            return Err(ConfigError::global("gaps needs at least 2 modes"));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        self.betas[0]
    }

    pub fn grid_size(&self) -> usize {
        self.grid_sizes[0]
    }

    pub fn max_modes(&self) -> usize {
        *self.modes.iter().max().unwrap()
    }
}

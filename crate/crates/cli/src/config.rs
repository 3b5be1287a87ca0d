//! Flat `key = value` run configuration.

use besselkit::boundary::RealizationKind;
use besselkit::model::{Potential, PotentialKind};
use besselkit::solutions::SolverConfig;
use besselkit::C64;
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

/// A configuration problem; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Parses `a+bi`, `a-bi`, `a`, `bi`, `i`, `-i`.
pub fn parse_complex(text: &str) -> Result<C64, ConfigError> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || ConfigError(format!("malformed complex number `{text}`"));
    if s.is_empty() {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix(['i', 'j']) else {
        return s.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    // Split at the last sign that is not part of an exponent.
    let bytes = body.as_bytes();
    let mut split = 0;
    for idx in (1..bytes.len()).rev() {
        if (bytes[idx] == b'+' || bytes[idx] == b'-') && !matches!(bytes[idx - 1], b'e' | b'E') {
            split = idx;
            break;
        }
    }
    let (re, im) = body.split_at(split);
    let re = if re.is_empty() { 0.0 } else { re.parse::<f64>().map_err(|_| bad())? };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        t => t.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(C64::new(re, im))
}

/// Parses a complex number or `inf` (returned as `None`).
pub fn parse_complex_or_inf(text: &str) -> Result<Option<C64>, ConfigError> {
    match text.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => Ok(None),
        _ => parse_complex(text).map(Some),
    }
}

/// Key-value pairs with lower-case keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    map: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", n + 1));
            };
            cfg.set(k, v);
        }
        Ok(cfg)
    }

    /// Sets one key.
    pub fn set(&mut self, key: &str, value: &str) {
        self.map.insert(key.trim().to_ascii_lowercase(), value.trim().to_string());
    }

    /// Applies a command-line override: `key=value`, or a bare potential name.
    pub fn apply_override(&mut self, token: &str) -> Result<(), ConfigError> {
        match token.split_once('=') {
            Some((k, v)) => self.set(k, v),
            None if !token.trim().is_empty() => self.set("potential", token),
            None => return err("empty override"),
        }
        Ok(())
    }

    /// Raw value of `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    /// All pairs in key order.
    pub fn pairs(&self) -> impl Iterator<Item = (&String, &String)> {
        self.map.iter()
    }

    /// Real value with default.
    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => Ok(f64::INFINITY),
                _ => v.parse().map_err(|_| ConfigError(format!("`{key}`: expected a real number, got `{v}`"))),
            },
        }
    }

    /// Optional real value.
    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key).map(|_| self.f64_or(key, 0.0)).transpose()
    }

    /// Non-negative integer with default.
    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError(format!("`{key}`: expected an integer, got `{v}`"))),
        }
    }

    /// Complex value with default.
    pub fn complex_or(&self, key: &str, default: C64) -> Result<C64, ConfigError> {
        self.get(key).map_or(Ok(default), |v| parse_complex(v).map_err(|e| ConfigError(format!("`{key}`: {e}"))))
    }

    /// Comma-separated reals.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| ConfigError(format!("`{key}`: bad number `{t}`"))))
                    .collect()
            })
            .transpose()
    }
}

/// Front-end command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Distinguished solution on the grid.
    Solve,
    /// Jost function over a `k` list or grid.
    Jost,
    /// Zeros of the Jost function in a rectangle.
    Spectrum,
    /// Perturbed Green kernel at points.
    Green,
    /// Resolvent applied to a test function.
    Resolvent,
    /// Boundary-space basis.
    Boundary,
    /// Scattering length.
    Scatlen,
    /// Built-in identity checks.
    Selftest,
}

impl Command {
    /// Lower-case name.
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Jost => "jost",
            Command::Spectrum => "spectrum",
            Command::Green => "green",
            Command::Resolvent => "resolvent",
            Command::Boundary => "boundary",
            Command::Scatlen => "scatlen",
            Command::Selftest => "selftest",
        }
    }
}

/// Output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Comma-separated values with a versioned comment header.
    Csv,
    /// One JSON object per line.
    Jsonl,
}

/// Validated configuration of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Command.
    pub command: Command,
    /// Order.
    pub m: C64,
    /// Spectral points.
    pub ks: Vec<C64>,
    /// Perturbation.
    pub potential: Potential,
    /// Grid and solver settings.
    pub solver: SolverConfig,
    /// Output format.
    pub format: Format,
    /// Output path (stdout when absent).
    pub out: Option<PathBuf>,
    /// All keys, for command-specific options.
    pub raw: RawConfig,
}

fn potential(raw: &RawConfig, base_dir: Option<&std::path::Path>) -> Result<Potential, ConfigError> {
    let name = raw.get("potential").unwrap_or("zero").to_ascii_lowercase();
    let lib = |r: besselkit::Result<Potential>| r.map_err(|e| ConfigError(format!("potential: {e}")));
    let mut pot = match name.as_str() {
        "zero" | "none" => Potential::zero(),
        "coulomb" => lib(Potential::new(PotentialKind::CoulombCutoff {
            beta: raw.complex_or("beta", C64::new(1.0, 0.0))?,
            xc: raw.f64_or("xc", 1.0)?,
        }))?,
        "power" => lib(Potential::new(PotentialKind::PowerLaw {
            c: raw.complex_or("c", C64::new(1.0, 0.0))?,
            alpha: raw.f64_or("alpha", -1.0)?,
            xc: raw.f64_or("xc", 1.0)?,
        }))?,
        "well" => {
            let depth = raw.complex_or("v0", C64::new(1.0, 0.0))?;
            lib(Potential::new(PotentialKind::SquareWell {
                v0: -depth,
                x0: raw.f64_or("x0", 0.0)?,
                x1: raw.f64_or("x1", 1.0)?,
            }))?
        }
        "exp" => lib(Potential::new(PotentialKind::ExpDecay {
            c: raw.complex_or("amp", C64::new(1.0, 0.0))?,
            lambda: raw.f64_or("lambda", 1.0)?,
        }))?,
        "tabulated" => {
            let file = raw.get("file").ok_or_else(|| ConfigError("tabulated potential needs `file`".into()))?;
            let mut path = PathBuf::from(file);
            if path.is_relative() {
                if let Some(dir) = base_dir {
                    path = dir.join(path);
                }
            }
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ConfigError(format!("cannot read `{}`: {e}", path.display())))?;
            Potential::parse_tabulated(&text, raw.f64_or("sing_exponent", 0.0)?, raw.f64_or("decay_exponent", f64::INFINITY)?)
                .map_err(|e| ConfigError(format!("`{}`: {e}", path.display())))?
        }
        other => return err(format!("unknown potential `{other}`")),
    };
    if name != "tabulated" && (raw.get("sing_exponent").is_some() || raw.get("decay_exponent").is_some()) {
        let sing = raw.f64_or("sing_exponent", pot.sing_exponent)?;
        let decay = raw.f64_or("decay_exponent", pot.decay_exponent)?;
        pot = lib(Potential::with_exponents(pot.kind, sing, decay))?;
    }
    Ok(pot)
}

fn k_points(raw: &RawConfig) -> Result<Vec<C64>, ConfigError> {
    let ks = if let Some(list) = raw.get("k_list") {
        list.split(',').map(parse_complex).collect::<Result<Vec<_>, _>>()?
    } else if raw.get("k_from").is_some() || raw.get("k_to").is_some() {
        let a = raw.complex_or("k_from", C64::new(1.0, 0.0))?;
        let b = raw.complex_or("k_to", a)?;
        let n = raw.usize_or("k_steps", 11)?;
        if n == 0 {
            return err("`k_steps` must be positive");
        }
        (0..n).map(|j| if n == 1 { a } else { a + (b - a) * (j as f64 / (n - 1) as f64) }).collect()
    } else {
        vec![raw.complex_or("k", C64::new(1.0, 0.0))?]
    };
    if let Some(k) = ks.iter().find(|k| !(k.re >= 0.0) || !k.im.is_finite()) {
        return err(format!("spectral parameter {k} must satisfy Re k ≥ 0"));
    }
    Ok(ks)
}

impl RunConfig {
    /// Validates the raw configuration for `command`.
    pub fn build(
        command: Command,
        raw: RawConfig,
        format: Format,
        out: Option<PathBuf>,
        base_dir: Option<&std::path::Path>,
    ) -> Result<Self, ConfigError> {
        let m = raw.complex_or("m", C64::new(0.5, 0.0))?;
        let ks = k_points(&raw)?;
        let potential = potential(&raw, base_dir)?;
        let mut solver = SolverConfig::default();
        solver.n = raw.usize_or("grid_n", solver.n)?;
        solver.x_min = raw.f64_opt("x_min")?;
        solver.x_max = raw.f64_opt("x_max")?;
        if solver.n < 64 {
            return err("`grid_n` must be at least 64");
        }
        if let Some(x) = solver.x_min {
            if !(x > 0.0) {
                return err("`x_min` must be positive");
            }
        }
        if let Some(x) = solver.x_max {
            if !(x > solver.x_min.unwrap_or(0.0) && x.is_finite()) {
                return err("`x_max` must exceed `x_min`");
            }
        }
        Ok(Self { command, m, ks, potential, solver, format, out, raw })
    }

    /// Realization from `realization`, `kappa`, `nu`, `n`.
    pub fn realization(&self) -> Result<RealizationKind, ConfigError> {
        let m = self.m;
        let inf = |key: &str| -> Result<Option<C64>, ConfigError> {
            match self.raw.get(key) {
                None => err(format!("realization needs `{key}`")),
                Some(v) => parse_complex_or_inf(v),
            }
        };
        Ok(match self.raw.get("realization").unwrap_or("pure").to_ascii_lowercase().as_str() {
            "pure" | "hm" => RealizationKind::Hm(m),
            "kappa" | "mixed_kappa" => RealizationKind::HmKappa(m, inf("kappa")?),
            "nu" | "mixed_nu" => RealizationKind::H0Nu(inf("nu")?),
            "n" | "mixed_n" => {
                let kappa = match self.raw.get("kappa") {
                    None => None,
                    Some(v) => parse_complex_or_inf(v)?,
                };
                RealizationKind::HmN(self.raw.usize_or("n", 1)?, m, kappa)
            }
            "min" => RealizationKind::Min(m),
            "max" => RealizationKind::Max(m),
            other => return err(format!("unknown realization `{other}`")),
        })
    }
}

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::torus::{Harmonic, HarmonicSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Identities,
    Diagonalize,
    Solve,
    Estimates,
    Full,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "identities" => Ok(Mode::Identities),
            "diagonalize" => Ok(Mode::Diagonalize),
            "solve" => Ok(Mode::Solve),
            "estimates" => Ok(Mode::Estimates),
            "full" => Ok(Mode::Full),
            _ => Err(format!(
                "unknown mode `{s}` (identities, diagonalize, solve, estimates, full)"
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Identities => "identities",
            Mode::Diagonalize => "diagonalize",
            Mode::Solve => "solve",
            Mode::Estimates => "estimates",
            Mode::Full => "full",
        };
        f.write_str(s)
    }
}

/// Line 0 means the problem is not tied to one line (a default or a flag).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

/// Right-hand side: harmonics, or a field file (resolved against the config
/// file's directory).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DataSpec {
    #[serde(rename = "harmonics")]
    Harmonics(HarmonicSum),
    #[serde(rename = "field")]
    Field(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n: usize,
    /// Active real coordinates, 0-based internally; 1-based in the file.
    pub active: Vec<usize>,
    pub points: usize,
    pub data: DataSpec,
    pub q: f64,
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
    pub diag_samples: usize,
    pub coefficient_samples: usize,
    pub operator_fields: usize,
    pub held_out: usize,
    pub lq_target: Option<f64>,
    pub refine: bool,
    pub scales: Vec<f64>,
    pub p0: f64,
    pub safety: f64,
    pub sweep: Vec<f64>,
    pub continuity_steps: usize,
    pub newton_tol: f64,
    pub max_newton_iterations: usize,
    pub damping: f64,
    pub linear_tol: f64,
    pub gmres_restart: usize,
    pub max_linear_iterations: usize,
    pub solve_tol: f64,
    #[serde(skip)]
    lines: BTreeMap<&'static str, usize>,
}

const KEYS: &[&str] = &[
    "mode",
    "n",
    "active",
    "points",
    "harmonic",
    "field",
    "q",
    "seed",
    "out",
    "diag_samples",
    "coefficient_samples",
    "operator_fields",
    "held_out",
    "lq_target",
    "refine",
    "scales",
    "p0",
    "safety",
    "sweep",
    "continuity_steps",
    "newton_tol",
    "max_newton_iterations",
    "damping",
    "linear_tol",
    "gmres_restart",
    "max_linear_iterations",
    "solve_tol",
];

fn parse<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| err(line, format!("cannot parse `{v}` as a value for `{key}`")))
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    v.split(',').map(|s| parse(line, key, s.trim())).collect()
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(err(line, format!("`{key}` must be true or false"))),
    }
}

/// `coord,frequency,amplitude,phase` with a 1-based coordinate.
fn parse_harmonic(line: usize, v: &str) -> Result<Harmonic, ConfigError> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(err(
            line,
            "harmonic needs `coordinate,frequency,amplitude,phase`",
        ));
    }
    let coord: usize = parse(line, "harmonic", parts[0])?;
    if coord == 0 {
        return Err(err(line, "harmonic coordinates are 1-based"));
    }
    Ok(Harmonic {
        coord: coord - 1,
        frequency: parse(line, "harmonic", parts[1])?,
        amplitude: parse(line, "harmonic", parts[2])?,
        phase: parse(line, "harmonic", parts[3])?,
    })
}

impl ExperimentConfig {
    /// Defaults for dimension `n`: the reduced problem on `x_1, x_5`
    /// (`n = 2`) or `x_1, x_2` (`n = 1`).
    pub fn defaults(n: usize) -> Self {
        let (active, data) = match n {
            1 => (vec![0, 1], HarmonicSum::cosines(&[0], 0.1)),
            _ => (vec![0, 4], HarmonicSum::cosines(&[0, 4], 0.5)),
        };
        Self {
            mode: Mode::Full,
            n,
            active,
            points: 64,
            data: DataSpec::Harmonics(data),
            q: 4.0 * n as f64,
            seed: 0,
            out: PathBuf::from("out"),
            diag_samples: 1000,
            coefficient_samples: 10_000,
            operator_fields: 100,
            held_out: 5,
            lq_target: None,
            refine: true,
            scales: vec![0.5, 1.0, 2.0],
            p0: 4.0,
            safety: 2.0,
            sweep: vec![4.0, 8.0, 16.0, 32.0, 64.0],
            continuity_steps: 10,
            newton_tol: 1e-11,
            max_newton_iterations: 40,
            damping: 1.0,
            linear_tol: 1e-12,
            gmres_restart: 60,
            max_linear_iterations: 600,
            solve_tol: crate::suites::DENSITY_RESIDUAL_TOL,
            lines: BTreeMap::new(),
        }
    }

    /// Parses `key = value` lines; `#` starts a comment. Every key except
    /// `harmonic` may appear once.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut entries: Vec<(usize, &'static str, String)> = Vec::new();
        let mut seen: BTreeMap<&'static str, usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| err(line, "expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            let key = *KEYS
                .iter()
                .find(|&&known| known == k)
                .ok_or_else(|| err(line, format!("unknown key `{k}`")))?;
            if v.is_empty() {
                return Err(err(line, format!("empty value for `{key}`")));
            }
            if key != "harmonic" {
                if let Some(first) = seen.insert(key, line) {
                    return Err(err(line, format!("`{key}` already set on line {first}")));
                }
            }
            entries.push((line, key, v.to_string()));
        }
        let n = match entries.iter().find(|e| e.1 == "n") {
            Some((line, _, v)) => {
                let n: usize = parse(*line, "n", v)?;
                if n == 0 || n > 4 {
                    return Err(err(*line, "n must lie in 1..=4"));
                }
                n
            }
            None => 2,
        };
        let mut cfg = Self::defaults(n);
        let mut harmonics = Vec::new();
        for (line, key, v) in &entries {
            let line = *line;
            cfg.lines.insert(key, line);
            match *key {
                "mode" => cfg.mode = v.parse().map_err(|m: String| err(line, m))?,
                "n" => {}
                "active" => {
                    let coords: Vec<usize> = parse_list(line, key, v)?;
                    if coords.iter().any(|&c| c == 0 || c > 4 * n) {
                        return Err(err(
                            line,
                            format!("active coordinates must lie in 1..={}", 4 * n),
                        ));
                    }
                    cfg.active = coords.into_iter().map(|c| c - 1).collect();
                }
                "points" => cfg.points = parse(line, key, v)?,
                "harmonic" => harmonics.push(parse_harmonic(line, v)?),
                "field" => cfg.data = DataSpec::Field(base.join(v)),
                "q" => cfg.q = parse(line, key, v)?,
                "seed" => cfg.seed = parse(line, key, v)?,
                "out" => cfg.out = base.join(v),
                "diag_samples" => cfg.diag_samples = parse(line, key, v)?,
                "coefficient_samples" => cfg.coefficient_samples = parse(line, key, v)?,
                "operator_fields" => cfg.operator_fields = parse(line, key, v)?,
                "held_out" => cfg.held_out = parse(line, key, v)?,
                "lq_target" => cfg.lq_target = Some(parse(line, key, v)?),
                "refine" => cfg.refine = parse_bool(line, key, v)?,
                "scales" => cfg.scales = parse_list(line, key, v)?,
                "p0" => cfg.p0 = parse(line, key, v)?,
                "safety" => cfg.safety = parse(line, key, v)?,
                "sweep" => cfg.sweep = parse_list(line, key, v)?,
                "continuity_steps" => cfg.continuity_steps = parse(line, key, v)?,
                "newton_tol" => cfg.newton_tol = parse(line, key, v)?,
                "max_newton_iterations" => cfg.max_newton_iterations = parse(line, key, v)?,
                "damping" => cfg.damping = parse(line, key, v)?,
                "linear_tol" => cfg.linear_tol = parse(line, key, v)?,
                "gmres_restart" => cfg.gmres_restart = parse(line, key, v)?,
                "max_linear_iterations" => cfg.max_linear_iterations = parse(line, key, v)?,
                "solve_tol" => cfg.solve_tol = parse(line, key, v)?,
                _ => unreachable!("key list and match arms agree"),
            }
        }
        if !harmonics.is_empty() {
            if let Some(&l) = seen.get("field") {
                return Err(err(l, "give either `field` or `harmonic` lines, not both"));
            }
            cfg.data = DataSpec::Harmonics(HarmonicSum::new(harmonics));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(0, format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn line_of(&self, key: &str) -> usize {
        self.lines.get(key).copied().unwrap_or(0)
    }

    /// Cross-key checks, reported on the line of the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let at = |key: &str, m: String| err(self.line_of(key), m);
        if self.active.is_empty() {
            return Err(at("active", "no active coordinates".into()));
        }
        if self.points < 2 || !self.points.is_multiple_of(2) {
            return Err(at("points", "points must be even and at least 2".into()));
        }
        let needs_study = matches!(self.mode, Mode::Estimates | Mode::Full);
        let needs_solver = matches!(self.mode, Mode::Solve | Mode::Estimates | Mode::Full);
        if needs_study && !(self.q > 2.0 * self.n as f64) {
            return Err(at(
                "q",
                format!("q must exceed 2n = {} for estimates", 2 * self.n),
            ));
        }
        if needs_solver && self.n > 2 {
            return Err(at("n", "the solver supports n = 1 and n = 2".into()));
        }
        if matches!(self.mode, Mode::Identities | Mode::Full) && self.n > 3 {
            return Err(at(
                "n",
                "the exact identities are checked for n <= 3".into(),
            ));
        }
        if needs_solver && self.n == 2 {
            let blocks: Vec<usize> = self.active.iter().map(|c| c / 4).collect();
            if !(blocks.contains(&0) && blocks.contains(&1)) {
                return Err(at(
                    "active",
                    "for n = 2 the active set must meet both quaternionic blocks".into(),
                ));
            }
        }
        if let DataSpec::Harmonics(h) = &self.data {
            for t in &h.terms {
                if !self.active.contains(&t.coord) {
                    return Err(at(
                        "harmonic",
                        format!("harmonic on inactive coordinate {}", t.coord + 1),
                    ));
                }
            }
        }
        for (key, v) in [
            ("newton_tol", self.newton_tol),
            ("linear_tol", self.linear_tol),
            ("solve_tol", self.solve_tol),
        ] {
            if !(v > 0.0) {
                return Err(at(key, format!("`{key}` must be positive")));
            }
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(at("damping", "damping must lie in (0, 1]".into()));
        }
        if self.sweep.iter().any(|&p| !(p > 0.0)) {
            return Err(at("sweep", "sweep exponents must be positive".into()));
        }
        if !(self.safety >= 1.0) {
            return Err(at("safety", "safety must be at least 1".into()));
        }
        if !(self.p0 > 0.0) {
            return Err(at("p0", "p0 must be positive".into()));
        }
        if let Some(t) = self.lq_target {
            if !(t > 0.0) {
                return Err(at("lq_target", "lq_target must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(s: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::parse(s, Path::new("/base"))
    }

    #[test]
    fn parses_full_example() {
        let cfg = parse_str(
            "# comment\nmode = solve\nn = 1\nactive = 1, 2\npoints = 32\nharmonic = 1,1,0.1,0\nharmonic = 2,2,0.05,1.5 # trailing\nout = res\n",
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::Solve);
        assert_eq!(cfg.active, vec![0, 1]);
        assert_eq!(cfg.out, PathBuf::from("/base/res"));
        let DataSpec::Harmonics(h) = &cfg.data else {
            panic!()
        };
        assert_eq!(h.terms.len(), 2);
        assert_eq!(
            h.terms[1],
            Harmonic {
                coord: 1,
                frequency: 2,
                amplitude: 0.05,
                phase: 1.5
            }
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_str("mode = solve\n\nbogus = 1\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_str("points = 8\npoints = 16\n").unwrap_err();
        assert_eq!((e.line, e.message.contains("line 1")), (2, true));
        let e = parse_str("n = 2\nmode = estimates\nq = 3\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_str("mode = solve\nactive = 1,2\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_str("harmonic = 1,1,0.5\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_str("no equals sign\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_str("mode = sideways\n").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.to_string().starts_with("config line 1:"));
    }

    #[test]
    fn defaults_are_valid() {
        for n in 1..=2 {
            ExperimentConfig::defaults(n).validate().unwrap();
        }
        assert_eq!(parse_str("").unwrap(), ExperimentConfig::defaults(2));
    }
}

//! Flat `key = value` configuration with command-line overrides.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use surriga::problems::{Problem, ScalarCase, StudyConfig};
use surriga::surrogate::{SamplingStrategy, SymmetryMode};

pub const THREADS_ENV: &str = "SURRIGA_THREADS";

/// Where a setting came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Location {
    Line { file: String, line: usize },
    Flag(String),
    Env(&'static str),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line { file, line } => write!(f, "{file}:{line}"),
            Location::Flag(name) => write!(f, "flag {name}"),
            Location::Env(var) => write!(f, "environment variable {var}"),
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub location: Option<Location>,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Some(l) => write!(f, "{l}: {}", self.msg),
            None => f.write_str(&self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(location: &Location, msg: impl Into<String>) -> ConfigError {
    ConfigError { location: Some(location.clone()), msg: msg.into() }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub location: Location,
}

pub const KEYS: &[&str] = &[
    "problem",
    "geometry",
    "p",
    "q",
    "mode",
    "M",
    "c",
    "beta",
    "ladder",
    "case",
    "eigen_count",
    "reference_factor",
    "reference_degree",
    "spectrum_points",
    "cavity",
    "count_ladder",
    "seed",
    "threads",
    "cache_dir",
    "output",
];

/// Split a config file into settings. Blank lines and `#` comments are
/// skipped.
pub fn parse_text(text: &str, file: &str) -> Result<Vec<Setting>, ConfigError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let location = Location::Line { file: file.to_string(), line: n + 1 };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| err(&location, format!("expected `key = value`, got `{line}`")))?;
        out.push(Setting { key: k.trim().to_string(), value: v.trim().to_string(), location });
    }
    Ok(out)
}

/// `key=value` from a `--set` flag.
pub fn parse_assignment(s: &str, location: Location) -> Result<Setting, ConfigError> {
    let (k, v) = s.split_once('=').ok_or_else(|| err(&location, format!("expected `key=value`, got `{s}`")))?;
    Ok(Setting { key: k.trim().to_string(), value: v.trim().to_string(), location })
}

/// A validated study configuration and where to write its output.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub study: StudyConfig,
    pub output: PathBuf,
}

impl RunConfig {
    /// Effective configuration, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut s = self.study.to_text();
        if let Some(d) = &self.study.cache_dir {
            s.push_str(&format!("cache_dir = {}\n", d.display()));
        }
        s.push_str(&format!("output = {}\n", self.output.display()));
        s
    }
}

fn number<T: std::str::FromStr>(s: &Setting, what: &str) -> Result<T, ConfigError> {
    s.value.parse().map_err(|_| err(&s.location, format!("`{}` expects {what}, got `{}`", s.key, s.value)))
}

fn list(s: &Setting) -> Result<Vec<usize>, ConfigError> {
    s.value
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| err(&s.location, format!("`{}` expects a comma separated list of integers, got `{}`", s.key, s.value))))
        .collect()
}

/// Settings in increasing precedence: file lines first, then flags. The
/// problem is resolved first since it decides the defaults; `env_threads`
/// applies only when no setting names `threads`.
pub fn resolve(settings: &[Setting], env_threads: Option<&str>) -> Result<RunConfig, ConfigError> {
    for s in settings {
        if !KEYS.contains(&s.key.as_str()) {
            return Err(err(&s.location, format!("unknown key `{}`", s.key)));
        }
    }
    let problem = match settings.iter().rev().find(|s| s.key == "problem") {
        Some(s) => Problem::parse(&s.value).map_err(|e| err(&s.location, e.to_string()))?,
        None => Problem::Poisson,
    };
    let mut cfg = StudyConfig::new(problem);
    let mut output = PathBuf::from("out");
    let mut last: HashMap<&str, Location> = HashMap::new();

    if !settings.iter().any(|s| s.key == "threads") {
        if let Some(v) = env_threads {
            let s = Setting { key: "threads".into(), value: v.into(), location: Location::Env(THREADS_ENV) };
            cfg.threads = Some(number(&s, "a positive integer")?);
            last.insert("threads", s.location);
        }
    }

    for s in settings {
        match s.key.as_str() {
            "problem" => {}
            "geometry" => cfg.geometry = s.value.clone(),
            "p" => cfg.p = number(s, "an integer")?,
            "q" => cfg.q = number(s, "an integer")?,
            "mode" => {
                cfg.mode = match s.value.as_str() {
                    "default" => None,
                    v => Some(SymmetryMode::parse(v).map_err(|e| err(&s.location, e.to_string()))?),
                }
            }
            "M" => cfg.strategy = SamplingStrategy::Fixed(number(s, "an integer")?),
            "c" | "beta" => {
                let (mut c, mut beta) = match cfg.strategy {
                    SamplingStrategy::MeshDependent { c, beta } => (c, beta),
                    SamplingStrategy::Fixed(_) => (3.0, 0.5),
                };
                let v: f64 = number(s, "a real number")?;
                if s.key == "c" {
                    c = v;
                } else {
                    beta = v;
                }
                cfg.strategy = SamplingStrategy::MeshDependent { c, beta };
            }
            "ladder" => cfg.ladder = list(s)?,
            "case" => {
                cfg.case = match s.value.as_str() {
                    "low_frequency" => ScalarCase::low_frequency(),
                    "high_frequency" => ScalarCase::high_frequency(),
                    "sin_sinh" => ScalarCase::SinSinh,
                    v => return Err(err(&s.location, format!("unknown case `{v}` (low_frequency, high_frequency, sin_sinh)"))),
                }
            }
            "eigen_count" => cfg.eigen_count = number(s, "an integer")?,
            "reference_factor" => cfg.reference_factor = number(s, "an integer")?,
            "reference_degree" => cfg.reference_degree = number(s, "an integer")?,
            "spectrum_points" => cfg.spectrum_points = number(s, "an integer")?,
            "cavity" => cfg.cavity = number(s, "true or false")?,
            "count_ladder" => cfg.count_ladder = list(s)?,
            "seed" => cfg.seed = number(s, "an integer")?,
            "threads" => cfg.threads = Some(number(s, "a positive integer")?),
            "cache_dir" => cfg.cache_dir = Some(PathBuf::from(&s.value)),
            "output" => output = PathBuf::from(&s.value),
            _ => unreachable!("checked against KEYS"),
        }
        last.insert(KEYS.iter().find(|k| **k == s.key).expect("known key"), s.location.clone());
    }

    if let Err(e) = cfg.validate() {
        let msg = e.to_string();
        let culprits: &[&str] = if msg.contains("M >=") {
            &["M"]
        } else if msg.contains("mesh-dependent") {
            &["q", "p", "c", "beta"]
        } else if msg.starts_with("invalid input: p =") {
            &["p"]
        } else if msg.starts_with("invalid input: q =") {
            &["q"]
        } else if msg.contains("ladder") {
            &["ladder", "count_ladder"]
        } else if msg.contains("threads") {
            &["threads"]
        } else {
            &["eigen_count", "reference_factor", "reference_degree", "spectrum_points"]
        };
        let location = culprits.iter().find_map(|k| last.get(k).cloned());
        let msg = if msg.contains("M >=") { "M ≥ 1 required".to_string() } else { msg };
        return Err(ConfigError { location, msg });
    }
    Ok(RunConfig { study: cfg, output })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flag(k: &str, v: &str) -> Setting {
        Setting { key: k.into(), value: v.into(), location: Location::Flag(format!("--{k}")) }
    }

    #[test]
    fn comments_and_blank_lines() {
        let s = parse_text("# study\n\nq = 3 # odd\n  p=2\n", "a.cfg").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].value, "3");
        assert_eq!(s[1].location, Location::Line { file: "a.cfg".into(), line: 4 });
        let e = parse_text("q 3\n", "a.cfg").unwrap_err();
        assert_eq!(e.location, Some(Location::Line { file: "a.cfg".into(), line: 1 }));
    }

    #[test]
    fn problem_decides_defaults_wherever_it_appears() {
        let s = parse_text("q = 4\nproblem = eigen\n", "x").unwrap();
        let c = resolve(&s, None).unwrap();
        assert_eq!(c.study.problem, Problem::Eigen);
        assert_eq!(c.study.q, 4);
        assert_eq!(c.study.geometry, "quarter_annulus");
    }

    #[test]
    fn mesh_dependent_strategy() {
        let s = parse_text("c = 2\nq = 5\n", "x").unwrap();
        let c = resolve(&s, None).unwrap();
        assert_eq!(c.study.strategy, SamplingStrategy::MeshDependent { c: 2.0, beta: 0.5 });
        let s = parse_text("beta = 0.25\nq = 2\n", "x").unwrap();
        let e = resolve(&s, None).unwrap_err();
        assert_eq!(e.location, Some(Location::Line { file: "x".into(), line: 2 }));
    }

    #[test]
    fn type_mismatch_cites_the_flag() {
        let e = resolve(&[flag("p", "two")], None).unwrap_err();
        assert_eq!(e.location, Some(Location::Flag("--p".into())));
        assert!(e.msg.contains("expects an integer"));
    }

    #[test]
    fn environment_threads_are_a_fallback() {
        assert_eq!(resolve(&[], Some("3")).unwrap().study.threads, Some(3));
        assert_eq!(resolve(&[flag("threads", "2")], Some("3")).unwrap().study.threads, Some(2));
        let e = resolve(&[], Some("many")).unwrap_err();
        assert_eq!(e.location, Some(Location::Env(THREADS_ENV)));
        let e = resolve(&[], Some("0")).unwrap_err();
        assert_eq!(e.location, Some(Location::Env(THREADS_ENV)));
    }

    #[test]
    fn echo_round_trips() {
        let s = parse_text("problem = bench\nM = 4\nladder = 8, 16\noutput = res\n", "x").unwrap();
        let c = resolve(&s, None).unwrap();
        let again = resolve(&parse_text(&c.to_text(), "echo").unwrap(), None).unwrap();
        assert_eq!(again, c);
    }
}

//! Study configuration and the flat `key = value` config file format.

use std::collections::BTreeMap;
use std::path::PathBuf;

use super::cases::{Case, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub case: Case,
    pub variant: Variant,
    /// Rotation angles in degrees.
    pub rotations: Vec<f64>,
    pub levels: usize,
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub out: Option<PathBuf>,
    /// Record wall-clock times; zero otherwise so output stays reproducible.
    pub timings: bool,
    /// Compute condition numbers.
    pub condition: bool,
}

impl StudyConfig {
    /// Default sweep for `case`: all rotations, default levels.
    pub fn new(case: Case, variant: Variant) -> StudyConfig {
        StudyConfig {
            case,
            variant,
            rotations: case.default_rotations_deg(),
            levels: case.default_levels(),
            gamma: None,
            theta: None,
            out: None,
            timings: false,
            condition: true,
        }
    }

    /// `(theta, gamma)` after overrides.
    pub fn parameters(&self) -> (f64, f64) {
        let (t, g) = self.variant.parameters();
        (self.theta.unwrap_or(t), self.gamma.unwrap_or(g))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.case.is_study() {
            return Err(Error::Config(format!("{} is not a convergence study", self.case)));
        }
        if self.levels < 2 {
            return Err(Error::Config("at least two levels are needed for rates".into()));
        }
        if self.rotations.is_empty() {
            return Err(Error::Config("rotation list is empty".into()));
        }
        if self.rotations.iter().any(|r| !r.is_finite()) {
            return Err(Error::Config("rotation angles must be finite".into()));
        }
        Ok(())
    }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", i + 1)));
        }
    }
    Ok(map)
}

pub fn parse_rotations(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad rotation angle '{}'", t.trim())))
        })
        .collect()
}

/// Optional settings; a command line layer is merged over a file layer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub case: Option<Case>,
    pub variant: Option<Variant>,
    pub levels: Option<usize>,
    pub rotations: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub timings: Option<bool>,
    pub condition: Option<bool>,
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value '{v}' for '{key}'")))
}

impl Settings {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Settings> {
        let mut s = Settings::default();
        for (k, v) in map {
            match k.as_str() {
                "case" => s.case = Some(v.parse()?),
                "variant" => s.variant = Some(v.parse()?),
                "levels" => s.levels = Some(parse_value(k, v)?),
                "rotations" => s.rotations = Some(parse_rotations(v)?),
                "gamma" => s.gamma = Some(parse_value(k, v)?),
                "theta" => s.theta = Some(parse_value(k, v)?),
                "out" => s.out = Some(PathBuf::from(v)),
                "threads" => s.threads = Some(parse_value(k, v)?),
                "timings" => s.timings = Some(parse_value(k, v)?),
                "condition" => s.condition = Some(parse_value(k, v)?),
                _ => return Err(Error::Config(format!("unknown key '{k}'"))),
            }
        }
        Ok(s)
    }

    pub fn from_text(text: &str) -> Result<Settings> {
        Settings::from_map(&parse_config(text)?)
    }

    /// Fields set in `self` win over `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            case: self.case.or(base.case),
            variant: self.variant.or(base.variant),
            levels: self.levels.or(base.levels),
            rotations: self.rotations.or(base.rotations),
            gamma: self.gamma.or(base.gamma),
            theta: self.theta.or(base.theta),
            out: self.out.or(base.out),
            threads: self.threads.or(base.threads),
            timings: self.timings.or(base.timings),
            condition: self.condition.or(base.condition),
        }
    }

    pub fn study(&self) -> Result<StudyConfig> {
        let case = self.case.ok_or_else(|| Error::Config("no case given".into()))?;
        let mut cfg = StudyConfig::new(case, self.variant.unwrap_or(Variant::Antisymmetric));
        if let Some(l) = self.levels {
            cfg.levels = l;
        }
        if let Some(r) = &self.rotations {
            cfg.rotations = r.clone();
        }
        cfg.gamma = self.gamma;
        cfg.theta = self.theta;
        cfg.out = self.out.clone();
        cfg.timings = self.timings.unwrap_or(false);
        cfg.condition = self.condition.unwrap_or(true);
        cfg.validate()?;
        Ok(cfg)
    }
}

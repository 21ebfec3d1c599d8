//! Key-value configuration files: `key = value` lines, `#` comments,
//! unknown keys rejected before any computation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dirac_beltrami::coefficient::CoefficientStructure;
use dirac_beltrami::montel::GenerationMode;
use dirac_beltrami::{BoxRegion, Error, GridSpec, Result, SubdomainSpec};

pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path, allowed: &[&str]) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if !allowed.contains(&key.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "unknown key `{key}` (allowed: {})",
                    allowed.join(", ")
                )));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate key `{key}`")));
            }
        }
        Ok(Config { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::InvalidConfig(format!("missing required key `{key}`")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| {
                Error::InvalidConfig(format!("key `{key}`: cannot parse `{raw}`"))
            }),
        }
    }

    pub fn parse_required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::InvalidConfig(format!("key `{key}`: cannot parse `{raw}`")))
    }

    pub fn parse_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("on") | Some("yes") => Ok(true),
            Some("false") | Some("off") | Some("no") => Ok(false),
            Some(other) => Err(Error::InvalidConfig(format!(
                "key `{key}`: expected a boolean, got `{other}`"
            ))),
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let dim: usize = self.parse_required("dim")?;
        let points: usize = self.parse_required("points")?;
        let box_len: f64 = self.parse("box_len", 2.0 * std::f64::consts::PI)?;
        GridSpec::new(dim, points, box_len)
    }

    /// Seed, overridable by the DIRAC_BELTRAMI_SEED environment variable.
    pub fn seed(&self) -> Result<u64> {
        if let Ok(env) = std::env::var("DIRAC_BELTRAMI_SEED") {
            return env.parse().map_err(|_| {
                Error::InvalidConfig(format!(
                    "DIRAC_BELTRAMI_SEED: cannot parse `{env}` as u64"
                ))
            });
        }
        self.parse("seed", 0u64)
    }

    pub fn structure(&self, key: &str) -> Result<CoefficientStructure> {
        match self.get(key).unwrap_or("grade-preserving") {
            "general" => Ok(CoefficientStructure::General),
            "grade-preserving" => Ok(CoefficientStructure::GradePreserving),
            "grade1-only" => Ok(CoefficientStructure::GradeOneOnly),
            other => Err(Error::InvalidConfig(format!(
                "key `{key}`: unknown structure `{other}`"
            ))),
        }
    }

    pub fn generation_mode(&self) -> Result<GenerationMode> {
        match self.get("mode").unwrap_or("accumulating") {
            "independent" => Ok(GenerationMode::Independent),
            "accumulating" => Ok(GenerationMode::Accumulating {
                rate: self.parse("rate", 0.7)?,
            }),
            other => Err(Error::InvalidConfig(format!(
                "key `mode`: unknown generation mode `{other}`"
            ))),
        }
    }

    pub fn support_region(&self) -> Result<Option<BoxRegion>> {
        match (self.get("support_lo"), self.get("support_hi")) {
            (None, None) => Ok(Some(BoxRegion::new(0.25, 0.75)?)),
            (Some(lo), Some(hi)) => {
                let lo: f64 = lo.parse().map_err(|_| {
                    Error::InvalidConfig("support_lo: not a number".into())
                })?;
                let hi: f64 = hi.parse().map_err(|_| {
                    Error::InvalidConfig("support_hi: not a number".into())
                })?;
                if lo == 0.0 && hi == 1.0 {
                    Ok(None)
                } else {
                    Ok(Some(BoxRegion::new(lo, hi)?))
                }
            }
            _ => Err(Error::InvalidConfig(
                "support_lo and support_hi must be given together".into(),
            )),
        }
    }

    pub fn subdomain(&self) -> Result<SubdomainSpec> {
        let u_lo: f64 = self.parse("u_lo", 0.35)?;
        let u_hi: f64 = self.parse("u_hi", 0.65)?;
        let v_lo: f64 = self.parse("v_lo", 0.2)?;
        let v_hi: f64 = self.parse("v_hi", 0.8)?;
        SubdomainSpec::new(BoxRegion::new(u_lo, u_hi)?, BoxRegion::new(v_lo, v_hi)?)
    }

    pub fn slope(&self, dim: usize) -> Result<Vec<f64>> {
        match self.get("slope") {
            None => {
                let mut s = vec![0.0; dim];
                s[0] = 1.0;
                Ok(s)
            }
            Some(raw) => {
                let parts: Vec<f64> = raw
                    .split(',')
                    .map(|p| {
                        p.trim().parse().map_err(|_| {
                            Error::InvalidConfig(format!("slope: cannot parse `{p}`"))
                        })
                    })
                    .collect::<Result<_>>()?;
                if parts.len() != dim {
                    return Err(Error::InvalidConfig(format!(
                        "slope has {} entries for dimension {dim}",
                        parts.len()
                    )));
                }
                Ok(parts)
            }
        }
    }
}

pub fn out_file(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(name)
}

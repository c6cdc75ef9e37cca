use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A probe scale written in terms of the modulus: `c*q + d`, or a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct KExpr {
    pub q_mult: u64,
    pub offset: i64,
}

impl KExpr {
    pub fn constant(k: u64) -> Self {
        Self {
            q_mult: 0,
            offset: k as i64,
        }
    }

    /// Value for modulus `q`; negative values are rejected.
    pub fn eval(self, q: u64) -> Result<u64> {
        let v = self.q_mult as i128 * q as i128 + self.offset as i128;
        u64::try_from(v).map_err(|_| Error::Config(format!("K = {self} is negative for q = {q}")))
    }
}

impl fmt::Display for KExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.q_mult, self.offset) {
            (0, d) => write!(f, "{d}"),
            (c, d) => {
                if c != 1 {
                    write!(f, "{c}")?;
                }
                f.write_str("q")?;
                match d {
                    0 => Ok(()),
                    d if d > 0 => write!(f, "+{d}"),
                    d => write!(f, "{d}"),
                }
            }
        }
    }
}

impl FromStr for KExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse K expression `{s}`"));
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let Some(qpos) = t.find('q') else {
            return Ok(Self::constant(t.parse().map_err(|_| bad())?));
        };
        let (head, tail) = (&t[..qpos], &t[qpos + 1..]);
        let q_mult = if head.is_empty() {
            1
        } else {
            head.trim_end_matches('*').parse().map_err(|_| bad())?
        };
        let offset = if tail.is_empty() {
            0
        } else {
            let (sign, digits) = match tail.as_bytes()[0] {
                b'+' => (1, &tail[1..]),
                b'-' => (-1, &tail[1..]),
                _ => return Err(bad()),
            };
            sign * digits.parse::<i64>().map_err(|_| bad())?
        };
        Ok(Self { q_mult, offset })
    }
}

impl TryFrom<String> for KExpr {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KExpr> for String {
    fn from(k: KExpr) -> String {
        k.to_string()
    }
}

/// How many LWE rows the distinguisher uses per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleCount {
    /// `min(50, ceil(2 / advantage^2))`.
    Formula,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryConfig {
    pub fixed_k: Vec<KExpr>,
    pub random_k_count: usize,
    /// Random K values are drawn from the open interval `(lo*q, hi*q)`.
    pub random_k_range: (u64, u64),
    pub tau: f64,
    /// Run the distinguisher once held-out `acc_tau` exceeds this.
    pub trigger: f64,
    /// Held-out rows used to measure `acc_tau`.
    pub acc_samples: usize,
    pub verify_samples: usize,
    pub distinguisher_samples: SampleCount,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            fixed_k: ["239145", "42899", "q-1", "3q+7", "42900"]
                .iter()
                .map(|s| s.parse().unwrap())
                .collect(),
            random_k_count: 5,
            random_k_range: (1, 10),
            tau: 0.1,
            trigger: 0.3,
            acc_samples: 10_000,
            verify_samples: 1000,
            distinguisher_samples: SampleCount::Formula,
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        crate::model::check_tau(self.tau).map_err(|e| Error::Config(e.to_string()))?;
        let (lo, hi) = self.random_k_range;
        if self.random_k_count > 0 && hi <= lo {
            return Err(Error::Config(
                "recovery.random_k_range must have lo < hi".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.trigger) {
            return Err(Error::Config("recovery.trigger must lie in [0, 1]".into()));
        }
        if self.verify_samples < super::MIN_VERIFY_SAMPLES {
            return Err(Error::Config(format!(
                "recovery.verify_samples must be at least {}",
                super::MIN_VERIFY_SAMPLES
            )));
        }
        if self.acc_samples == 0 {
            return Err(Error::Config("recovery.acc_samples must be positive".into()));
        }
        if self.distinguisher_samples == SampleCount::Fixed(0) {
            return Err(Error::Config(
                "recovery.distinguisher_samples must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_expressions() {
        let q = 251;
        for (s, v) in [("239145", 239145), ("q-1", 250), ("3q+7", 760), ("q", 251), ("2*q", 502)] {
            let k: KExpr = s.parse().unwrap();
            assert_eq!(k.eval(q).unwrap(), v, "{s}");
        }
        assert_eq!("3q+7".parse::<KExpr>().unwrap().to_string(), "3q+7");
        assert_eq!("q-1".parse::<KExpr>().unwrap().to_string(), "q-1");
        assert_eq!("42".parse::<KExpr>().unwrap().to_string(), "42");
        for bad in ["", "x", "q*2", "3q7", "q+"] {
            assert!(bad.parse::<KExpr>().is_err(), "{bad}");
        }
        assert!("0q-5".parse::<KExpr>().unwrap().eval(q).is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = RecoveryConfig::default();
        c.validate().unwrap();
        let text = toml::to_string(&c).unwrap();
        assert!(text.contains("\"3q+7\""));
        let back: RecoveryConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        let fixed: RecoveryConfig = toml::from_str("distinguisher_samples = { fixed = 50 }").unwrap();
        assert_eq!(fixed.distinguisher_samples, SampleCount::Fixed(50));
    }

    #[test]
    fn validation() {
        let c = RecoveryConfig {
            tau: 0.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = RecoveryConfig {
            verify_samples: 10,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modq::Modulus;

/// How the secret is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SecretDist {
    /// Binary with an exact Hamming weight.
    Binary { hamming: usize },
    /// Binary with weight `round(d * n)`, at least 2.
    BinaryDensity { density: f64 },
    /// Coordinates i.i.d. uniform on Z_q.
    Uniform,
}

/// Row layout of generated samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    #[default]
    Plain,
    /// Rows of the negacyclic circulant matrix of a random polynomial.
    Circulant,
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Layout::Plain => "plain",
            Layout::Circulant => "circulant",
        })
    }
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" | "lwe" => Ok(Layout::Plain),
            "circulant" | "rlwe" => Ok(Layout::Circulant),
            other => Err(Error::InvalidParameter(format!("unknown layout `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LweParams {
    pub n: usize,
    pub modulus: Modulus,
    pub sigma: f64,
    pub secret: SecretDist,
    /// Coordinates of `a` are drawn below `floor(alpha * q)`; 1.0 means full range.
    pub a_max_fraction: f64,
    pub layout: Layout,
}

impl LweParams {
    pub fn new(n: usize, q: u64, sigma: f64, secret: SecretDist) -> Result<Self> {
        let p = Self {
            n,
            modulus: Modulus::new(q)?,
            sigma,
            secret,
            a_max_fraction: 1.0,
            layout: Layout::Plain,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = layout;
        self
    }

    pub fn with_a_max_fraction(mut self, alpha: f64) -> Result<Self> {
        self.a_max_fraction = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n == 0 {
            return bad("dimension n must be at least 1".into());
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        if !(self.a_max_fraction > 0.0 && self.a_max_fraction <= 1.0) {
            return bad(format!(
                "a_max_fraction must lie in (0, 1], got {}",
                self.a_max_fraction
            ));
        }
        if self.a_bound() == 0 {
            return bad("a_max_fraction leaves an empty coordinate range".into());
        }
        match self.secret {
            SecretDist::Binary { hamming } if hamming > self.n => {
                return Err(Error::HammingTooLarge {
                    h: hamming,
                    n: self.n,
                })
            }
            SecretDist::BinaryDensity { density } if !(density > 0.0 && density <= 1.0) => {
                return bad(format!("density must lie in (0, 1], got {density}"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Exclusive upper bound on coordinates of `a`.
    pub fn a_bound(&self) -> u64 {
        let q = self.modulus.q();
        if self.a_max_fraction >= 1.0 {
            q
        } else {
            (self.a_max_fraction * q as f64).floor() as u64
        }
    }

    /// Hamming weight of binary secrets; `None` for uniform secrets.
    pub fn hamming(&self) -> Option<usize> {
        match self.secret {
            SecretDist::Binary { hamming } => Some(hamming),
            SecretDist::BinaryDensity { density } => {
                Some(((density * self.n as f64).round() as usize).max(2).min(self.n))
            }
            SecretDist::Uniform => None,
        }
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{Layout, LweParams};
use super::secret::SecretKey;
use crate::error::{Error, Result};
use crate::modq::{dot_slices, ErrorSampler, Modulus, Residue};

/// Where the rows of a [`SampleSet`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    Fresh,
    /// Each row is a {-1, 0, 1} combination of `k` distinct fresh rows, each
    /// fresh row used in at most `reuse_limit` combinations.
    Combined { k: usize, reuse_limit: usize },
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Fresh => f.write_str("fresh"),
            Provenance::Combined { k, reuse_limit } => write!(f, "combined:{k}:{reuse_limit}"),
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "fresh" {
            return Ok(Provenance::Fresh);
        }
        let bad = || Error::InvalidParameter(format!("unknown provenance `{s}`"));
        let rest = s.strip_prefix("combined:").ok_or_else(bad)?;
        let (k, r) = rest.split_once(':').ok_or_else(bad)?;
        Ok(Provenance::Combined {
            k: k.parse().map_err(|_| bad())?,
            reuse_limit: r.parse().map_err(|_| bad())?,
        })
    }
}

/// A matrix of LWE instances `(a, b)` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n: usize,
    modulus: Modulus,
    sigma: f64,
    layout: Layout,
    provenance: Provenance,
    effective_sigma: f64,
    a: Vec<Residue>,
    b: Vec<Residue>,
}

impl SampleSet {
    pub fn empty(n: usize, modulus: Modulus, sigma: f64, layout: Layout) -> Self {
        Self {
            n,
            modulus,
            sigma,
            layout,
            provenance: Provenance::Fresh,
            effective_sigma: sigma,
            a: Vec::new(),
            b: Vec::new(),
        }
    }

    /// Builds a set from raw rows, checking every residue.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        n: usize,
        modulus: Modulus,
        sigma: f64,
        layout: Layout,
        provenance: Provenance,
        effective_sigma: f64,
        a: Vec<Residue>,
        b: Vec<Residue>,
    ) -> Result<Self> {
        if n == 0 || a.len() != n * b.len() {
            return Err(Error::DimensionMismatch {
                expected: n * b.len(),
                found: a.len(),
            });
        }
        if let Some(&x) = a.iter().chain(&b).find(|&&x| !modulus.contains(x)) {
            return Err(Error::ResidueOutOfRange {
                value: x,
                q: modulus.q(),
            });
        }
        Ok(Self {
            n,
            modulus,
            sigma,
            layout,
            provenance,
            effective_sigma,
            a,
            b,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn effective_sigma(&self) -> f64 {
        self.effective_sigma
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn a(&self, i: usize) -> &[Residue] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    pub fn b(&self, i: usize) -> Residue {
        self.b[i]
    }

    pub fn row(&self, i: usize) -> (&[Residue], Residue) {
        (self.a(i), self.b[i])
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = (&[Residue], Residue)> + '_ {
        self.a.chunks_exact(self.n).zip(self.b.iter().copied())
    }

    pub fn b_values(&self) -> &[Residue] {
        &self.b
    }

    pub(crate) fn push_row(&mut self, a: &[Residue], b: Residue) {
        debug_assert_eq!(a.len(), self.n);
        self.a.extend_from_slice(a);
        self.b.push(b);
    }

    pub(crate) fn set_combined(&mut self, provenance: Provenance, effective_sigma: f64) {
        self.provenance = provenance;
        self.effective_sigma = effective_sigma;
    }

    /// Appends all rows of `other`, which must share dimension and modulus.
    pub fn extend_from(&mut self, other: &SampleSet) -> Result<()> {
        self.check_compatible(other)?;
        self.a.extend_from_slice(&other.a);
        self.b.extend_from_slice(&other.b);
        Ok(())
    }

    pub fn check_compatible(&self, other: &SampleSet) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch {
                left: self.modulus.q(),
                right: other.modulus.q(),
            });
        }
        Ok(())
    }

    /// A new set holding the rows at `indices`, in order.
    pub fn select(&self, indices: &[usize]) -> SampleSet {
        let mut out = SampleSet {
            a: Vec::with_capacity(indices.len() * self.n),
            b: Vec::with_capacity(indices.len()),
            ..self.clone_header()
        };
        for &i in indices {
            out.push_row(self.a(i), self.b[i]);
        }
        out
    }

    pub fn take(&self, count: usize) -> SampleSet {
        let count = count.min(self.len());
        SampleSet {
            a: self.a[..count * self.n].to_vec(),
            b: self.b[..count].to_vec(),
            ..self.clone_header()
        }
    }

    pub(crate) fn clone_header(&self) -> SampleSet {
        SampleSet {
            n: self.n,
            modulus: self.modulus,
            sigma: self.sigma,
            layout: self.layout,
            provenance: self.provenance,
            effective_sigma: self.effective_sigma,
            a: Vec::new(),
            b: Vec::new(),
        }
    }

    /// Centered residuals `b - a.s mod q` for a candidate secret.
    pub fn residuals(&self, secret: &[Residue]) -> Result<Vec<i64>> {
        if secret.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: secret.len(),
            });
        }
        let q = self.modulus;
        Ok(self
            .rows()
            .map(|(a, b)| q.lift_unchecked(q.sub(b, dot_slices(a, secret, q))))
            .collect())
    }
}

fn sample_row_a<R: Rng + ?Sized>(bound: u64, n: usize, rng: &mut R, out: &mut Vec<Residue>) {
    out.extend((0..n).map(|_| rng.gen_range(0..bound)));
}

fn check_secret(params: &LweParams, secret: &SecretKey) -> Result<()> {
    if secret.n() != params.n {
        return Err(Error::DimensionMismatch {
            expected: params.n,
            found: secret.n(),
        });
    }
    if secret.modulus() != params.modulus {
        return Err(Error::ModulusMismatch {
            left: params.modulus.q(),
            right: secret.modulus().q(),
        });
    }
    Ok(())
}

/// Draws `count` rows with uniform `a` below `params.a_bound()` and
/// `b = a.s + e mod q`.
pub fn gen_plain_samples<R: Rng + ?Sized>(
    params: &LweParams,
    secret: &SecretKey,
    count: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    check_secret(params, secret)?;
    let sampler = ErrorSampler::new(params.sigma)?;
    let (n, q) = (params.n, params.modulus);
    let bound = params.a_bound();
    let s = secret.coords();
    let mut set = SampleSet::empty(n, q, params.sigma, Layout::Plain);
    set.a.reserve(count * n);
    set.b.reserve(count);
    let mut row = Vec::with_capacity(n);
    for _ in 0..count {
        row.clear();
        sample_row_a(bound, n, rng, &mut row);
        let e = sampler.sample(rng);
        let b = q.add(dot_slices(&row, s, q), q.reduce_signed(e));
        set.push_row(&row, b);
    }
    Ok(set)
}

/// The negacyclic circulant matrix of `a`: entry `(i, j)` is `a[i-j]` when
/// `j <= i` and `-a[n+i-j]` otherwise, so row `i` holds the coefficients of
/// `x^i * a(x) mod (x^n + 1)` read against the secret.
pub fn circulant_rows(a: &[Residue], q: Modulus) -> Vec<Vec<Residue>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if j <= i { a[i - j] } else { q.neg(a[n + i - j]) })
                .collect()
        })
        .collect()
}

/// Expands random polynomials into their circulant rows until `count` rows
/// have been produced. Each block of `n` consecutive rows shares one
/// polynomial; the final block is truncated when `count` is not a multiple
/// of `n`.
pub fn gen_rlwe_samples<R: Rng + ?Sized>(
    params: &LweParams,
    secret: &SecretKey,
    count: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    check_secret(params, secret)?;
    let sampler = ErrorSampler::new(params.sigma)?;
    let (n, q) = (params.n, params.modulus);
    let bound = params.a_bound();
    let s = secret.coords();
    let mut set = SampleSet::empty(n, q, params.sigma, Layout::Circulant);
    set.a.reserve(count * n);
    set.b.reserve(count);
    let mut poly = Vec::with_capacity(n);
    while set.len() < count {
        poly.clear();
        sample_row_a(bound, n, rng, &mut poly);
        for row in circulant_rows(&poly, q) {
            if set.len() == count {
                break;
            }
            let e = sampler.sample(rng);
            let b = q.add(dot_slices(&row, s, q), q.reduce_signed(e));
            set.push_row(&row, b);
        }
    }
    Ok(set)
}

/// Dispatches on `params.layout`.
pub fn gen_samples<R: Rng + ?Sized>(
    params: &LweParams,
    secret: &SecretKey,
    count: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    match params.layout {
        Layout::Plain => gen_plain_samples(params, secret, count, rng),
        Layout::Circulant => gen_rlwe_samples(params, secret, count, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_secret, SecretDist};
    use crate::modq::{mod_dot, ZqVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(n: usize, sigma: f64) -> LweParams {
        LweParams::new(n, 251, sigma, SecretDist::Binary { hamming: 3.min(n) }).unwrap()
    }

    fn stddev(xs: &[i64]) -> f64 {
        let m = xs.iter().sum::<i64>() as f64 / xs.len() as f64;
        (xs.iter().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
    }

    #[test]
    fn noiseless_rows_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = params(10, 0.0);
        let s = gen_secret(&p, &mut rng).unwrap();
        let set = gen_plain_samples(&p, &s, 500, &mut rng).unwrap();
        assert_eq!(set.len(), 500);
        for (a, b) in set.rows() {
            let a = ZqVector::new(a.to_vec(), p.modulus).unwrap();
            assert_eq!(mod_dot(&a, s.vector()).unwrap(), b);
        }
        assert!(set.residuals(s.coords()).unwrap().iter().all(|&r| r == 0));
    }

    #[test]
    fn residual_spread_matches_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = params(10, 3.0);
        let s = gen_secret(&p, &mut rng).unwrap();
        let set = gen_plain_samples(&p, &s, 10_000, &mut rng).unwrap();
        let r = set.residuals(s.coords()).unwrap();
        let sd = stddev(&r);
        assert!((2.9..=3.1).contains(&sd), "sd {sd}");
        // fresh rows stay inside the 6-sigma truncation
        assert!(r.iter().all(|&x| x.abs() <= 18));
    }

    #[test]
    fn bounded_a() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = params(20, 3.0).with_a_max_fraction(0.5).unwrap();
        let s = gen_secret(&p, &mut rng).unwrap();
        let set = gen_plain_samples(&p, &s, 2_000, &mut rng).unwrap();
        assert!(set.rows().all(|(a, _)| a.iter().all(|&x| x < 126)));
        assert!(set.rows().any(|(a, _)| a.contains(&124)));
    }

    #[test]
    fn circulant_small_case() {
        let q = Modulus::new(251).unwrap();
        assert_eq!(circulant_rows(&[3, 5], q), vec![vec![3, 246], vec![5, 3]]);
    }

    #[test]
    fn circulant_matches_polynomial_product() {
        // Independent check: schoolbook product in Z_q[x]/(x^n + 1).
        let q = Modulus::new(251).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let a: Vec<u64> = (0..n).map(|_| rng.gen_range(0..251)).collect();
        let s: Vec<u64> = (0..n).map(|_| rng.gen_range(0..251)).collect();
        let mut prod = vec![0i64; n];
        for i in 0..n {
            for j in 0..n {
                let t = (a[i] * s[j]) as i64;
                if i + j < n {
                    prod[i + j] += t;
                } else {
                    prod[i + j - n] -= t;
                }
            }
        }
        let rows = circulant_rows(&a, q);
        for i in 0..n {
            assert_eq!(dot_slices(&rows[i], &s, q), q.reduce_signed(prod[i]));
        }
    }

    #[test]
    fn rlwe_rows() {
        let q = Modulus::new(251).unwrap();
        let p = LweParams::new(2, 251, 0.0, SecretDist::Binary { hamming: 1 })
            .unwrap()
            .with_layout(Layout::Circulant);
        let s = SecretKey::from_bits(&[1, 0], q).unwrap();
        // b picks the first column of the circulant matrix, which is a itself
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let set = gen_rlwe_samples(&p, &s, 2, &mut rng).unwrap();
        assert_eq!(set.b(0), set.a(0)[0]);
        assert_eq!(set.b(1), set.a(1)[0]);
        assert_eq!(set.a(1)[1], set.a(0)[0]);
        assert_eq!(set.a(0)[1], q.neg(set.a(1)[0]));
    }

    #[test]
    fn rlwe_rotation_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = params(4, 0.0).with_layout(Layout::Circulant);
        let q = p.modulus;
        let s = gen_secret(&p, &mut rng).unwrap();
        let set = gen_samples(&p, &s, 12, &mut rng).unwrap();
        assert_eq!(set.layout(), Layout::Circulant);
        for block in 0..3 {
            for i in 1..4 {
                // row i is row i-1 multiplied by x: shift right, negate the wrapped entry
                let prev = set.a(block * 4 + i - 1);
                let cur = set.a(block * 4 + i);
                assert_eq!(cur[0], q.neg(prev[3]));
                assert_eq!(&cur[1..], &prev[..3]);
            }
            for i in 0..4 {
                let (a, b) = set.row(block * 4 + i);
                assert_eq!(dot_slices(a, s.coords(), q), b);
            }
        }
        let partial = gen_samples(&p, &s, 6, &mut rng).unwrap();
        assert_eq!(partial.len(), 6);
    }

    #[test]
    fn rejects_mismatched_secret() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = params(4, 3.0);
        let s = gen_secret(&params(5, 3.0), &mut rng).unwrap();
        assert!(gen_plain_samples(&p, &s, 3, &mut rng).is_err());
    }

    #[test]
    fn provenance_text_round_trip() {
        for p in [
            Provenance::Fresh,
            Provenance::Combined {
                k: 3,
                reuse_limit: 10,
            },
        ] {
            assert_eq!(p.to_string().parse::<Provenance>().unwrap(), p);
        }
        assert!("combined:x".parse::<Provenance>().is_err());
    }
}

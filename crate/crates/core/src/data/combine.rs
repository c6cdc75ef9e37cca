use rand::seq::index;
use rand::Rng;

use super::samples::{Provenance, SampleSet};
use crate::error::{Error, Result};
use crate::modq::Residue;

/// One combined row `(sum k_j a_j, sum k_j b_j) mod q` from explicit
/// `(row index, coefficient)` picks. Indices must be distinct.
pub fn combine_with(set: &SampleSet, picks: &[(usize, i64)]) -> Result<(Vec<Residue>, Residue)> {
    let q = set.modulus();
    let n = set.n();
    for (i, &(idx, _)) in picks.iter().enumerate() {
        if idx >= set.len() {
            return Err(Error::InvalidParameter(format!(
                "row {idx} out of range for {} rows",
                set.len()
            )));
        }
        if picks[..i].iter().any(|&(j, _)| j == idx) {
            return Err(Error::InvalidParameter(format!(
                "row {idx} appears twice in one combination"
            )));
        }
    }
    let mut acc = vec![0i64; n];
    let mut b_acc = 0i64;
    for &(idx, coef) in picks {
        let (a, b) = set.row(idx);
        for (x, &y) in acc.iter_mut().zip(a) {
            *x += coef * y as i64;
        }
        b_acc += coef * b as i64;
    }
    Ok((
        acc.into_iter().map(|x| q.reduce_signed(x)).collect(),
        q.reduce_signed(b_acc),
    ))
}

/// Builds `count` new rows, each a random {-1, 0, 1} combination of `k`
/// distinct rows of a fresh set. All-zero coefficient vectors are redrawn.
/// A source row is charged one use whenever it enters a combination with a
/// nonzero coefficient and is retired after `reuse_limit` uses.
pub fn combine_samples<R: Rng + ?Sized>(
    set: &SampleSet,
    k: usize,
    reuse_limit: usize,
    count: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    if set.provenance() != Provenance::Fresh {
        return Err(Error::InvalidParameter(
            "only fresh sample sets can be combined".into(),
        ));
    }
    if k == 0 || reuse_limit == 0 {
        return Err(Error::InvalidParameter(
            "combination size and reuse limit must be positive".into(),
        ));
    }
    let mut uses = vec![0usize; set.len()];
    let mut available: Vec<usize> = (0..set.len()).collect();
    let mut out = set.clone_header();
    let mut picks = Vec::with_capacity(k);
    let mut coefs = vec![0i64; k];
    for _ in 0..count {
        if available.len() < k {
            return Err(Error::InsufficientSamples {
                needed: k,
                available: available.len(),
            });
        }
        loop {
            for c in coefs.iter_mut() {
                *c = rng.gen_range(-1..=1);
            }
            if coefs.iter().any(|&c| c != 0) {
                break;
            }
        }
        let positions = index::sample(rng, available.len(), k).into_vec();
        let mut used: Vec<usize> = Vec::with_capacity(k);
        picks.clear();
        for (&p, &c) in positions.iter().zip(&coefs) {
            if c != 0 {
                picks.push((available[p], c));
                used.push(p);
            }
        }
        let (a, b) = combine_with(set, &picks)?;
        out.push_row(&a, b);

        // retire exhausted rows, highest position first so swap_remove keeps
        // the remaining positions valid
        used.sort_unstable_by(|a, b| b.cmp(a));
        for p in used {
            let idx = available[p];
            uses[idx] += 1;
            if uses[idx] >= reuse_limit {
                available.swap_remove(p);
            }
        }
    }
    let expected_nonzero = {
        let kf = k as f64;
        // E[#nonzero | not all zero] with each coefficient nonzero w.p. 2/3
        kf * (2.0 / 3.0) / (1.0 - (1.0f64 / 3.0).powi(k as i32))
    };
    out.set_combined(
        Provenance::Combined { k, reuse_limit },
        set.sigma() * expected_nonzero.sqrt(),
    );
    Ok(out)
}

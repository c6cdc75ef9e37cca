//! Base-B digit encoding of residues and residue vectors.
//!
//! Integers are written most-significant digit first with no leading zeros
//! (zero is the single digit `0`). Vector coordinates are joined by a
//! separator token. Model outputs are framed as `BOS digits EOS`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type TokenId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("empty token sequence")]
    Empty,
    #[error("token {token} is not a digit in base {base}")]
    NotADigit { token: TokenId, base: u32 },
    #[error("leading zero in non-canonical digit string")]
    LeadingZero,
    #[error("decoded value overflows")]
    Overflow,
    #[error("expected {expected} coordinates, found {found}")]
    WrongArity { expected: usize, found: usize },
    #[error("missing {0} framing token")]
    Framing(&'static str),
    #[error("base must be at least 2, got {0}")]
    BadBase(u32),
}

/// The symbols a token id can stand for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Digit(u32),
    Sep,
    Bos,
    Eos,
    Pad,
}

/// Which side of the model a sequence belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Input,
    Output,
}

/// Shared token vocabulary: digits `0..max(B_in, B_out)` followed by the four
/// special tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    base_in: u32,
    base_out: u32,
}

impl Vocab {
    pub const SPECIALS: usize = 4;

    pub fn new(base_in: u32, base_out: u32) -> Result<Self, DecodeError> {
        for b in [base_in, base_out] {
            if b < 2 {
                return Err(DecodeError::BadBase(b));
            }
        }
        Ok(Self { base_in, base_out })
    }

    pub fn base_in(&self) -> u32 {
        self.base_in
    }

    pub fn base_out(&self) -> u32 {
        self.base_out
    }

    pub fn base(&self, side: Side) -> u32 {
        match side {
            Side::Input => self.base_in,
            Side::Output => self.base_out,
        }
    }

    pub fn digit_count(&self) -> usize {
        self.base_in.max(self.base_out) as usize
    }

    pub fn size(&self) -> usize {
        self.digit_count() + Self::SPECIALS
    }

    pub fn sep(&self) -> TokenId {
        self.digit_count() as TokenId
    }

    pub fn bos(&self) -> TokenId {
        self.sep() + 1
    }

    pub fn eos(&self) -> TokenId {
        self.sep() + 2
    }

    pub fn pad(&self) -> TokenId {
        self.sep() + 3
    }

    pub fn id(&self, symbol: Symbol) -> Option<TokenId> {
        match symbol {
            Symbol::Digit(d) if (d as usize) < self.digit_count() => Some(d),
            Symbol::Digit(_) => None,
            Symbol::Sep => Some(self.sep()),
            Symbol::Bos => Some(self.bos()),
            Symbol::Eos => Some(self.eos()),
            Symbol::Pad => Some(self.pad()),
        }
    }

    pub fn symbol(&self, id: TokenId) -> Option<Symbol> {
        let d = self.digit_count() as TokenId;
        match id {
            x if x < d => Some(Symbol::Digit(x)),
            x if x == d => Some(Symbol::Sep),
            x if x == d + 1 => Some(Symbol::Bos),
            x if x == d + 2 => Some(Symbol::Eos),
            x if x == d + 3 => Some(Symbol::Pad),
            _ => None,
        }
    }

    /// Number of digits needed for any residue below `q` in the given base.
    pub fn max_digits(&self, side: Side, q: u64) -> usize {
        digits_needed(q.saturating_sub(1), self.base(side))
    }

    /// Input-side token sequence for a residue vector.
    pub fn encode_input(&self, a: &[u64]) -> TokenSequence {
        encode_vector_with_sep(a, self.base_in, self.sep())
    }

    /// Output-side sequence `BOS digits EOS`.
    pub fn encode_output(&self, b: u64) -> TokenSequence {
        let mut ids = Vec::with_capacity(digits_needed(b, self.base_out) + 2);
        ids.push(self.bos());
        push_digits(b, self.base_out, &mut ids);
        ids.push(self.eos());
        TokenSequence {
            ids,
            side: Side::Output,
        }
    }

    /// Inverse of [`Vocab::encode_output`]. The leading `BOS` is optional so
    /// the decoder's generated tail can be passed directly.
    pub fn decode_output(&self, ids: &[TokenId]) -> Result<u64, DecodeError> {
        let body = ids.strip_prefix(&[self.bos()]).unwrap_or(ids);
        let body = body
            .strip_suffix(&[self.eos()])
            .ok_or(DecodeError::Framing("EOS"))?;
        decode_int(body, self.base_out)
    }
}

/// A sequence of token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<TokenId>,
    pub side: Side,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// `floor(log_B x) + 1` for `x >= 1`, and 1 for zero.
pub fn digits_needed(x: u64, base: u32) -> usize {
    let b = base as u64;
    let mut x = x;
    let mut len = 1;
    while x >= b {
        x /= b;
        len += 1;
    }
    len
}

fn push_digits(x: u64, base: u32, out: &mut Vec<TokenId>) {
    let start = out.len();
    let b = base as u64;
    let mut x = x;
    loop {
        out.push((x % b) as TokenId);
        x /= b;
        if x == 0 {
            break;
        }
    }
    out[start..].reverse();
}

/// Canonical most-significant-first digits of `x` in base `base`.
pub fn encode_int(x: u64, base: u32) -> TokenSequence {
    assert!(base >= 2, "base must be at least 2");
    let mut ids = Vec::with_capacity(digits_needed(x, base));
    push_digits(x, base, &mut ids);
    TokenSequence {
        ids,
        side: Side::Input,
    }
}

/// Inverse of [`encode_int`]; rejects empty, non-digit and non-canonical input.
pub fn decode_int(ids: &[TokenId], base: u32) -> Result<u64, DecodeError> {
    if base < 2 {
        return Err(DecodeError::BadBase(base));
    }
    let (&first, _) = ids.split_first().ok_or(DecodeError::Empty)?;
    if first == 0 && ids.len() > 1 {
        return Err(DecodeError::LeadingZero);
    }
    let mut value: u64 = 0;
    for &t in ids {
        if t >= base {
            return Err(DecodeError::NotADigit { token: t, base });
        }
        value = value
            .checked_mul(base as u64)
            .and_then(|v| v.checked_add(t as u64))
            .ok_or(DecodeError::Overflow)?;
    }
    Ok(value)
}

/// Coordinates encoded independently and joined by the separator token. The
/// separator id is `max(base, ...)` as laid out by [`Vocab`]; callers that do
/// not hold a vocabulary get the id `base`, which is correct whenever input
/// and output bases agree.
pub fn encode_vector(a: &[u64], base: u32) -> TokenSequence {
    encode_vector_with_sep(a, base, base)
}

pub fn encode_vector_with_sep(a: &[u64], base: u32, sep: TokenId) -> TokenSequence {
    assert!(base >= 2, "base must be at least 2");
    let mut ids = Vec::with_capacity(a.len() * 3);
    for (i, &x) in a.iter().enumerate() {
        if i > 0 {
            ids.push(sep);
        }
        push_digits(x, base, &mut ids);
    }
    TokenSequence {
        ids,
        side: Side::Input,
    }
}

pub fn decode_vector(ids: &[TokenId], base: u32, n: usize) -> Result<Vec<u64>, DecodeError> {
    decode_vector_with_sep(ids, base, base, n)
}

pub fn decode_vector_with_sep(
    ids: &[TokenId],
    base: u32,
    sep: TokenId,
    n: usize,
) -> Result<Vec<u64>, DecodeError> {
    let coords = ids
        .split(|&t| t == sep)
        .map(|chunk| decode_int(chunk, base))
        .collect::<Result<Vec<_>, _>>()?;
    if coords.len() != n {
        return Err(DecodeError::WrongArity {
            expected: n,
            found: coords.len(),
        });
    }
    Ok(coords)
}

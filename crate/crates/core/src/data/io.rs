//! Line-oriented sample files.
//!
//! ```text
//! # lwe-samples v1 n=3 q=251 sigma=3 layout=plain provenance=fresh effective_sigma=3 rows=2
//! 12 0 250 17
//! 3 4 5 9
//! ```
//!
//! Each data line holds `a_1 ... a_n b` as decimal residues. Paths ending in
//! `.gz` are gzip-compressed.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::params::{Layout, LweParams};
use super::samples::{Provenance, SampleSet};
use crate::error::{Error, Result};
use crate::modq::Modulus;

const MAGIC: &str = "# lwe-samples v1";

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub fn write_samples<W: Write>(set: &SampleSet, mut w: W) -> Result<()> {
    writeln!(
        w,
        "{MAGIC} n={} q={} sigma={} layout={} provenance={} effective_sigma={} rows={}",
        set.n(),
        set.modulus(),
        set.sigma(),
        set.layout(),
        set.provenance(),
        set.effective_sigma(),
        set.len()
    )?;
    let mut line = String::new();
    for (a, b) in set.rows() {
        line.clear();
        for x in a {
            line.push_str(&x.to_string());
            line.push(' ');
        }
        line.push_str(&b.to_string());
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_samples(set: &SampleSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = BufWriter::new(File::create(path)?);
    if is_gzip(path) {
        let mut enc = GzEncoder::new(file, Compression::default());
        write_samples(set, &mut enc)?;
        enc.finish()?.flush()?;
        Ok(())
    } else {
        write_samples(set, file)
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(line: &str) -> Result<(SampleSet, usize)> {
    let rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| parse_err(1, "missing `# lwe-samples v1` header"))?;
    let fields: HashMap<&str, &str> = rest
        .split_whitespace()
        .map(|kv| kv.split_once('=').ok_or_else(|| parse_err(1, format!("bad field `{kv}`"))))
        .collect::<Result<_>>()?;
    fn get<'a>(f: &HashMap<&str, &'a str>, k: &str) -> Result<&'a str> {
        f.get(k)
            .copied()
            .ok_or_else(|| parse_err(1, format!("header lacks `{k}`")))
    }
    fn num<T: std::str::FromStr>(f: &HashMap<&str, &str>, k: &str) -> Result<T> {
        get(f, k)?
            .parse()
            .map_err(|_| parse_err(1, format!("header field `{k}` is not a number")))
    }
    let n: usize = num(&fields, "n")?;
    if n == 0 {
        return Err(parse_err(1, "n must be positive"));
    }
    let q = Modulus::new(num(&fields, "q")?).map_err(|e| parse_err(1, e.to_string()))?;
    let sigma: f64 = num(&fields, "sigma")?;
    let layout: Layout = get(&fields, "layout")?
        .parse()
        .map_err(|e: Error| parse_err(1, e.to_string()))?;
    let provenance: Provenance = get(&fields, "provenance")?
        .parse()
        .map_err(|e: Error| parse_err(1, e.to_string()))?;
    let effective_sigma: f64 = num(&fields, "effective_sigma")?;
    let rows: usize = num(&fields, "rows")?;
    let mut set = SampleSet::empty(n, q, sigma, layout);
    set.set_combined(provenance, effective_sigma);
    Ok((set, rows))
}

pub fn read_samples<R: BufRead>(r: R) -> Result<SampleSet> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty file"))??;
    let (mut set, rows) = parse_header(&header)?;
    let (n, q) = (set.n(), set.modulus());
    let mut row = Vec::with_capacity(n + 1);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        row.clear();
        for tok in line.split_whitespace() {
            let x: u64 = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("`{tok}` is not a residue")))?;
            if !q.contains(x) {
                return Err(parse_err(lineno, format!("{x} is not below q = {q}")));
            }
            row.push(x);
        }
        if row.len() != n + 1 {
            return Err(parse_err(
                lineno,
                format!("expected {} values, found {}", n + 1, row.len()),
            ));
        }
        set.push_row(&row[..n], row[n]);
    }
    if set.len() != rows {
        return Err(parse_err(
            0,
            format!("header promises {rows} rows, file has {}", set.len()),
        ));
    }
    Ok(set)
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<SampleSet> {
    let path = path.as_ref();
    let file = File::open(path)?;
    if is_gzip(path) {
        read_samples(BufReader::new(GzDecoder::new(file)))
    } else {
        read_samples(BufReader::new(file))
    }
}

/// Loads a file and checks it against the parameters the caller expects.
pub fn load_samples_for(path: impl AsRef<Path>, params: &LweParams) -> Result<SampleSet> {
    let set = load_samples(path)?;
    if set.modulus() != params.modulus {
        return Err(Error::ParamsMismatch(format!(
            "file has q = {}, expected {}",
            set.modulus(),
            params.modulus
        )));
    }
    if set.n() != params.n {
        return Err(Error::ParamsMismatch(format!(
            "file has n = {}, expected {}",
            set.n(),
            params.n
        )));
    }
    Ok(set)
}

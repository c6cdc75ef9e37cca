//! LWE secrets, sample generation (plain and circulant ring layout), sample
//! reuse through small linear combinations, and the on-disk sample format.

mod capacity;
mod combine;
mod io;
mod params;
mod samples;
mod secret;

pub use capacity::combination_capacity;
pub use combine::{combine_samples, combine_with};
pub use io::{load_samples, load_samples_for, read_samples, save_samples, write_samples};
pub use params::{Layout, LweParams, SecretDist};
pub use samples::{
    circulant_rows, gen_plain_samples, gen_rlwe_samples, gen_samples, Provenance, SampleSet,
};
pub use secret::{gen_secret, SecretKey};

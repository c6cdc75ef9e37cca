use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Secret and samples.
    Data = 1,
    /// Weight initialization and batch order.
    Model = 2,
    /// Random probe scales and distinguisher draws.
    Recovery = 3,
    /// Held-out evaluation and verification rows.
    Test = 4,
}

pub fn substream(master: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream as u64);
    rng
}

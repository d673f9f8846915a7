use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier written to run manifests.
pub const RNG_ALGORITHM: &str = "chacha8-stream";

/// Independent generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = stream_rng(7, 0).random();
        let b: u64 = stream_rng(7, 1).random();
        let c: u64 = stream_rng(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random variables drawn per Monte Carlo sample. Each gets its own stream
/// so that changing one distribution never shifts the draws of another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Variable {
    Kappa = 0,
    CavityLength = 1,
    Coil = 2,
    InitialVelocity = 3,
}

const VARIABLES: u64 = 4;

/// SplitMix64 finalizer applied to `a` and `b`.
pub fn mix64(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for `(root_seed, sample_index, var)`.
///
/// The key is the root seed and the ChaCha stream id is a pure function of
/// the sample and variable, so draws do not depend on evaluation order.
pub fn substream(root_seed: u64, sample_index: u64, var: Variable) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(sample_index.wrapping_mul(VARIABLES) + var as u64);
    rng
}

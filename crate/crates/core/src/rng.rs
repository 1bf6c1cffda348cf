//! Seeded random streams, one per parameter block.
//!
//! Each block draws from its own ChaCha stream keyed by the chain seed, so
//! switching one block's update rule does not perturb the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Block {
    Blur = 1,
    Hmc = 2,
    Image = 3,
    Data = 4,
    SigmaC = 5,
    SigmaW = 6,
    Zeta = 7,
    Scan = 8,
    Init = 9,
}

/// SplitMix64 finaliser, used to derive independent seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn block_rng(seed: u64, block: Block) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

/// Random streams for one chain.
#[derive(Debug, Clone)]
pub struct ChainRng {
    pub blur: ChaCha8Rng,
    pub hmc: ChaCha8Rng,
    pub image: ChaCha8Rng,
    pub data: ChaCha8Rng,
    pub sigma_c: ChaCha8Rng,
    pub sigma_w: ChaCha8Rng,
    pub zeta: ChaCha8Rng,
    pub scan: ChaCha8Rng,
    pub init: ChaCha8Rng,
}

impl ChainRng {
    pub fn new(seed: u64) -> Self {
        Self {
            blur: block_rng(seed, Block::Blur),
            hmc: block_rng(seed, Block::Hmc),
            image: block_rng(seed, Block::Image),
            data: block_rng(seed, Block::Data),
            sigma_c: block_rng(seed, Block::SigmaC),
            sigma_w: block_rng(seed, Block::SigmaW),
            zeta: block_rng(seed, Block::Zeta),
            scan: block_rng(seed, Block::Scan),
            init: block_rng(seed, Block::Init),
        }
    }

    /// Seeds for `count` independent chains derived from one master seed.
    pub fn chain_seed(master: u64, chain: u64) -> u64 {
        mix_seed(master, chain.wrapping_add(1))
    }
}

//! Counter-style random streams.
//!
//! A stream is identified by a root seed and a path of integers (island,
//! grid step, particle, purpose, ...). The path is folded into a 64-bit key
//! with a SplitMix64 mixer and the pair seeds a ChaCha8 generator, so the
//! draws consumed by one particle at one step never depend on how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator handed to model callbacks.
pub type SimRng = ChaCha8Rng;

/// Stream purposes used as the first path element below a filter root.
pub mod purpose {
    pub const INIT: u64 = 1;
    pub const PROPAGATE: u64 = 2;
    pub const RESAMPLE: u64 = 3;
    pub const FORECAST: u64 = 4;
    pub const PERTURB: u64 = 5;
    pub const MEASURE: u64 = 6;
    pub const ISLAND: u64 = 7;
    pub const REPLICATE: u64 = 8;
    pub const POOL: u64 = 9;
    pub const ITERATION: u64 = 10;
    pub const SIMULATE: u64 = 11;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic handle on an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    root_seed: u64,
    key: u64,
    depth: u32,
}

impl RngStream {
    pub fn new(root_seed: u64) -> Self {
        RngStream {
            root_seed,
            key: splitmix64(root_seed ^ 0xD1B5_4A32_D192_ED03),
            depth: 0,
        }
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    /// Length of the stream path below the root.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Extends the stream path by one element.
    pub fn child(&self, index: u64) -> Self {
        let depth = self.depth + 1;
        let tagged = splitmix64(index ^ (depth as u64).wrapping_mul(GOLDEN));
        RngStream {
            root_seed: self.root_seed,
            key: splitmix64(self.key.rotate_left(23) ^ tagged),
            depth,
        }
    }

    /// Extends the path by several elements.
    pub fn path(&self, indices: &[u64]) -> Self {
        indices.iter().fold(*self, |s, &i| s.child(i))
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> SimRng {
        let mut seed = [0u8; 32];
        let mut z = self.key ^ self.root_seed.rotate_left(32);
        for chunk in seed.chunks_mut(8) {
            z = splitmix64(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_path_same_draws() {
        let a = RngStream::new(42).path(&[1, 2, 3]);
        let b = RngStream::new(42).child(1).child(2).child(3);
        let xa: Vec<u64> = (0..8).map(|_| 0).scan(a.rng(), |r, _: u64| Some(r.random())).collect();
        let xb: Vec<u64> = (0..8).map(|_| 0).scan(b.rng(), |r, _: u64| Some(r.random())).collect();
        assert_eq!(xa, xb);
    }

    #[test]
    fn distinct_paths_differ() {
        let root = RngStream::new(7);
        let mut keys: Vec<u64> = Vec::new();
        for i in 0..50 {
            for j in 0..50 {
                let mut r = root.child(i).child(j).rng();
                keys.push(r.random());
            }
        }
        let n = keys.len();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), n);
        // path order matters
        let mut ab = root.path(&[1, 2]).rng();
        let mut ba = root.path(&[2, 1]).rng();
        assert_ne!(ab.random::<u64>(), ba.random::<u64>());
        // seeds matter
        let mut s1 = RngStream::new(1).child(0).rng();
        let mut s2 = RngStream::new(2).child(0).rng();
        assert_ne!(s1.random::<u64>(), s2.random::<u64>());
    }

    #[test]
    fn streams_look_independent() {
        // correlation between neighbouring particle streams
        let root = RngStream::new(99).child(purpose::PROPAGATE);
        let n = 20_000;
        let (mut sxy, mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for j in 0..n {
            let x: f64 = root.child(j).rng().random();
            let y: f64 = root.child(j + 1).rng().random();
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - sx * sy / nf / nf;
        let corr = cov / ((sxx / nf - (sx / nf).powi(2)) * (syy / nf - (sy / nf).powi(2))).sqrt();
        assert!(corr.abs() < 4.0 / nf.sqrt(), "corr {corr}");
    }
}

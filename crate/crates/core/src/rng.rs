//! Deterministic randomness for every stochastic step in the pipeline.
//!
//! The generator is Philox4x32-10, a counter-based PRNG with published
//! known-answer vectors, so split plans and generated benchmarks are
//! reproducible bit-for-bit across platforms and reimplementations.
//! A single experiment seed fans out into named sub-streams (dataset
//! splits, prototype init, batch shuffling, data generation); each
//! sub-stream keys the counter with its stream id plus a caller salt,
//! so streams never overlap.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// One Philox4x32 block: 10 rounds over a 128-bit counter and 64-bit key.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut ctr = counter;
    let mut k = key;
    ctr = round(ctr, k);
    for _ in 1..10 {
        k[0] = k[0].wrapping_add(PHILOX_W0);
        k[1] = k[1].wrapping_add(PHILOX_W1);
        ctr = round(ctr, k);
    }
    ctr
}

fn round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let p0 = (PHILOX_M0 as u64) * (ctr[0] as u64);
    let p1 = (PHILOX_M1 as u64) * (ctr[2] as u64);
    let (hi0, lo0) = ((p0 >> 32) as u32, p0 as u32);
    let (hi1, lo1) = ((p1 >> 32) as u32, p1 as u32);
    [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0]
}

/// Named randomness consumers. The discriminants are part of the
/// reproducibility contract; do not renumber.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Test-pool split into holdout and untouched test subsets.
    SplitTest = 1,
    /// Holdout split into strong-model train and validation subsets.
    SplitHold = 2,
    /// Parameter initialization.
    Init = 3,
    /// Mini-batch shuffling.
    Batch = 4,
    /// Synthetic data generation.
    DataGen = 5,
}

/// A deterministic sub-stream of a root seed.
///
/// Counter layout per block: `[block_lo, block_hi, stream_id, salt]`;
/// the key is the root seed. Distinct `(seed, stream, salt)` triples
/// produce statistically independent streams.
#[derive(Debug, Clone)]
pub struct SubRng {
    key: [u32; 2],
    stream: u32,
    salt: u32,
    block: u64,
    buf: [u32; 4],
    buf_pos: usize,
    gauss_spare: Option<f64>,
}

impl SubRng {
    pub fn new(seed: u64, stream: Stream, salt: u32) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
            stream: stream as u32,
            salt,
            block: 0,
            buf: [0; 4],
            buf_pos: 4,
            gauss_spare: None,
        }
    }

    pub fn next_u32(&mut self) -> u32 {
        if self.buf_pos == 4 {
            let ctr = [
                self.block as u32,
                (self.block >> 32) as u32,
                self.stream,
                self.salt,
            ];
            self.buf = philox4x32_10(ctr, self.key);
            self.block += 1;
            self.buf_pos = 0;
        }
        let v = self.buf[self.buf_pos];
        self.buf_pos += 1;
        v
    }

    pub fn next_u64(&mut self) -> u64 {
        let lo = self.next_u32() as u64;
        let hi = self.next_u32() as u64;
        (hi << 32) | lo
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`; safe as a logarithm argument.
    fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased uniform draw in `[0, n)` by rejection.
    pub fn bounded(&mut self, n: u64) -> u64 {
        assert!(n > 0, "bounded(0)");
        loop {
            let x = self.next_u64();
            let r = x % n;
            if x - r <= u64::MAX - (n - 1) {
                return r;
            }
        }
    }

    /// Standard normal via the Box-Muller transform (pair-cached).
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.gauss_spare.take() {
            return z;
        }
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.gauss_spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.bounded(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

//! Counter-based random streams (Philox4x32-10).
//!
//! A stream is addressed by `(seed, stream id, element, sweep)`; the values it
//! yields depend only on that address and on how many values were already
//! taken from it. Parallel workers can therefore draw for disjoint elements in
//! any order and still reproduce a sequential run bit for bit.

const MUL0: u32 = 0xD251_1F53;
const MUL1: u32 = 0xCD9E_8D57;
const WEYL0: u32 = 0x9E37_79B9;
const WEYL1: u32 = 0xBB67_AE85;

/// One Philox4x32 block with 10 rounds.
pub fn philox4x32(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = ctr;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(WEYL0);
            k[1] = k[1].wrapping_add(WEYL1);
        }
        let p0 = u64::from(MUL0) * u64::from(c[0]);
        let p1 = u64::from(MUL1) * u64::from(c[2]);
        c = [
            ((p1 >> 32) as u32) ^ c[1] ^ k[0],
            p1 as u32,
            ((p0 >> 32) as u32) ^ c[3] ^ k[1],
            p0 as u32,
        ];
    }
    c
}

/// Largest element index addressable by a stream (48 bits).
pub const MAX_ELEMENT: u64 = (1 << 48) - 1;

/// Reserved sweep number used for drawing initial states.
pub const INIT_SWEEP: u32 = u32::MAX;

/// Identifies a family of streams sharing seed, stream id and sweep; each
/// element gets its own stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub stream: u16,
    pub sweep: u32,
}

impl StreamKey {
    pub fn new(seed: u64, stream: u16, sweep: u32) -> Self {
        StreamKey { seed, stream, sweep }
    }

    pub fn element(&self, element: u64) -> RngStream {
        RngStream::new(self.seed, self.stream, element, self.sweep)
    }
}

#[derive(Clone, Debug)]
pub struct RngStream {
    key: [u32; 2],
    ctr: [u32; 4],
    buf: [u32; 4],
    used: usize,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u16, element: u64, sweep: u32) -> Self {
        assert!(element <= MAX_ELEMENT, "element index {element} exceeds 48 bits");
        let key = [seed as u32, (seed >> 32) as u32];
        let ctr = [0, sweep, element as u32, (u32::from(stream) << 16) | ((element >> 32) as u32)];
        RngStream { key, ctr, buf: [0; 4], used: 4, counter: 0 }
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_u32(&mut self) -> u32 {
        if self.used == 4 {
            self.buf = philox4x32(self.ctr, self.key);
            self.ctr[0] = self.ctr[0].wrapping_add(1);
            self.used = 0;
        }
        let v = self.buf[self.used];
        self.used += 1;
        self.counter += 1;
        v
    }

    pub fn next_u64(&mut self) -> u64 {
        let hi = u64::from(self.next_u32());
        let lo = u64::from(self.next_u32());
        (hi << 32) | lo
    }

    /// Uniform on the open interval (0, 1); consumes two words.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`; consumes two words.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as u64).min(n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors distributed with the Random123 library.
    #[test]
    fn philox_known_answers() {
        assert_eq!(philox4x32([0; 4], [0; 2]), [0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8]);
        assert_eq!(
            philox4x32([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd]
        );
        assert_eq!(
            philox4x32([0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344], [0xa4093822, 0x299f31d0]),
            [0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1]
        );
    }

    #[test]
    fn streams_replay_and_differ() {
        let mut a = RngStream::new(7, 1, 42, 3);
        let mut b = RngStream::new(7, 1, 42, 3);
        let xs: Vec<u32> = (0..9).map(|_| a.next_u32()).collect();
        let ys: Vec<u32> = (0..9).map(|_| b.next_u32()).collect();
        assert_eq!(xs, ys);
        assert_eq!(a.counter(), 9);
        let mut c = RngStream::new(7, 2, 42, 3);
        assert_ne!(xs[0], c.next_u32());
        let mut d = RngStream::new(7, 1, 43, 3);
        assert_ne!(xs[0], d.next_u32());
    }

    #[test]
    fn uniform_moments() {
        let mut r = RngStream::new(1, 0, 0, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| r.uniform()).collect();
        assert!(xs.iter().all(|&x| x > 0.0 && x < 1.0));
        let mean = xs.iter().sum::<f64>() / n as f64;
        // sd of the mean is sqrt(1/12/n) ~ 9.1e-4
        assert!((mean - 0.5).abs() < 4.0 * 9.2e-4, "{mean}");
    }
}

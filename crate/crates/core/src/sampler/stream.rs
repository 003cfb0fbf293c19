use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Taps of the default 32-bit maximal-length register (`x^32 + x^22 + x^2 + x + 1`).
pub const LFSR32_TAPS: [u32; 4] = [32, 22, 2, 1];

/// Fibonacci linear-feedback shift register of up to 32 bits.
///
/// Taps are 1-based bit positions; bit `k` is `(state >> (k - 1)) & 1`. Each
/// step shifts left and inserts the XOR of the tapped bits at bit 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lfsr {
    width: u32,
    tap_mask: u32,
    state: u32,
}

impl Lfsr {
    pub fn new(width: u32, taps: &[u32], state: u32) -> Result<Self> {
        if !(2..=32).contains(&width) {
            return Err(Error::InvalidParameter(format!(
                "LFSR width must be in 2..=32 (got {width})"
            )));
        }
        let mut tap_mask = 0u32;
        for &t in taps {
            if t == 0 || t > width {
                return Err(Error::InvalidParameter(format!(
                    "LFSR tap {t} outside 1..={width}"
                )));
            }
            tap_mask |= 1 << (t - 1);
        }
        let state = state & Self::mask(width);
        if state == 0 {
            return Err(Error::InvalidParameter(
                "LFSR state must be nonzero".into(),
            ));
        }
        Ok(Self {
            width,
            tap_mask,
            state,
        })
    }

    pub fn default_32(state: u32) -> Result<Self> {
        Self::new(32, &LFSR32_TAPS, state)
    }

    fn mask(width: u32) -> u32 {
        if width == 32 {
            u32::MAX
        } else {
            (1u32 << width) - 1
        }
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Advances one shift and returns the new register.
    pub fn step(&mut self) -> u32 {
        let feedback = (self.state & self.tap_mask).count_ones() & 1;
        self.state = ((self.state << 1) | feedback) & Self::mask(self.width);
        self.state
    }

    /// Maps a register value to `[-1, 1)`: `register / 2^(width-1) - 1`.
    pub fn to_signed_unit(&self, register: u32) -> f64 {
        register as f64 / (1u64 << (self.width - 1)) as f64 - 1.0
    }

    /// Shifts a full register width so consecutive draws share no bits.
    pub fn next_value(&mut self) -> f64 {
        for _ in 0..self.width {
            self.step();
        }
        self.to_signed_unit(self.state)
    }
}

/// One step of the default 32-bit register: returns the mapped value and the new state.
pub fn lfsr_next(state: u32) -> Result<(f64, u32)> {
    let mut l = Lfsr::default_32(state)?;
    let next = l.step();
    Ok((l.to_signed_unit(next), next))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    #[default]
    Standard,
    Lfsr,
}

#[derive(Debug, Clone)]
enum Source {
    Standard(ChaCha8Rng),
    Lfsr(Lfsr),
}

/// Reproducible source of uniform draws: identical `(kind, seed)` pairs give
/// identical sequences.
#[derive(Debug, Clone)]
pub struct RandomStream {
    kind: StreamKind,
    seed: u64,
    source: Source,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the sub-stream identified by `key` under `master`.
pub fn derive_seed(master: u64, key: &[u64]) -> u64 {
    key.iter().fold(mix64(master), |acc, &k| mix64(acc ^ mix64(k)))
}

impl RandomStream {
    pub fn new(kind: StreamKind, seed: u64) -> Result<Self> {
        let source = match kind {
            StreamKind::Standard => Source::Standard(ChaCha8Rng::seed_from_u64(seed)),
            StreamKind::Lfsr => {
                let folded = mix64(seed);
                let state = (folded as u32) ^ ((folded >> 32) as u32);
                Source::Lfsr(Lfsr::default_32(state)?)
            }
        };
        Ok(Self { kind, seed, source })
    }

    pub fn standard(seed: u64) -> Self {
        Self::new(StreamKind::Standard, seed).expect("standard streams accept any seed")
    }

    pub fn kind(&self) -> StreamKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream of the same kind keyed by `key`.
    pub fn substream(&self, key: &[u64]) -> Self {
        let seed = derive_seed(self.seed, key);
        match Self::new(self.kind, seed) {
            Ok(s) => s,
            // an all-zero LFSR fold: perturb the key
            Err(_) => Self::new(self.kind, mix64(seed)).expect("perturbed seed is nonzero"),
        }
    }

    /// Uniform draw in `[-1, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        match &mut self.source {
            Source::Standard(rng) => 2.0 * rng.random::<f64>() - 1.0,
            Source::Lfsr(l) => l.next_value(),
        }
    }

    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        match &mut self.source {
            Source::Standard(rng) => rng.random::<f64>(),
            Source::Lfsr(l) => 0.5 * (l.next_value() + 1.0),
        }
    }

    #[inline]
    pub fn coin(&mut self) -> i8 {
        if self.uniform() < 0.0 {
            -1
        } else {
            1
        }
    }

    pub fn normal(&mut self) -> f64 {
        match &mut self.source {
            Source::Standard(rng) => rng.sample(StandardNormal),
            Source::Lfsr(_) => {
                // Box-Muller on the register's own draws
                let u1 = 1.0 - self.unit();
                let u2 = self.unit();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            }
        }
    }

    pub fn below(&mut self, bound: usize) -> usize {
        ((self.unit() * bound as f64) as usize).min(bound - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hand_evaluated_step() {
        // state = 1: only bit 1 is set, feedback = b32^b22^b2^b1 = 1, so 0b11
        let (value, next) = lfsr_next(1).unwrap();
        assert_eq!(next, 3);
        assert_eq!(value, 3.0 / 2f64.powi(31) - 1.0);

        // state with bit 32 and bit 22 set: feedback 0, top bit falls off
        let s = (1u32 << 31) | (1 << 21);
        let (_, next) = lfsr_next(s).unwrap();
        assert_eq!(next, 1 << 22);
    }

    #[test]
    fn sixteen_bit_register_is_maximal() {
        let mut l = Lfsr::new(16, &[16, 15, 13, 4], 1).unwrap();
        let start = l.state();
        let mut period = 0u32;
        loop {
            l.step();
            period += 1;
            if l.state() == start {
                break;
            }
            assert!(period <= 1 << 16);
        }
        assert_eq!(period, (1 << 16) - 1);
    }

    #[test]
    fn zero_state_rejected() {
        assert!(Lfsr::default_32(0).is_err());
        assert!(lfsr_next(0).is_err());
        assert!(Lfsr::new(8, &[9], 1).is_err());
    }

    #[test]
    fn identical_seeds_identical_sequences() {
        for kind in [StreamKind::Standard, StreamKind::Lfsr] {
            let mut a = RandomStream::new(kind, 42).unwrap();
            let mut b = RandomStream::new(kind, 42).unwrap();
            let xs: Vec<f64> = (0..100).map(|_| a.uniform()).collect();
            let ys: Vec<f64> = (0..100).map(|_| b.uniform()).collect();
            assert_eq!(xs, ys);
        }
    }

    #[test]
    fn draws_stay_in_range() {
        for kind in [StreamKind::Standard, StreamKind::Lfsr] {
            let mut s = RandomStream::new(kind, 7).unwrap();
            let mut mean = 0.0;
            for _ in 0..20_000 {
                let u = s.uniform();
                assert!((-1.0..1.0).contains(&u));
                mean += u;
                let v = s.unit();
                assert!((0.0..1.0).contains(&v));
            }
            mean /= 20_000.0;
            assert!(mean.abs() < 0.03, "{kind:?} mean {mean}");
        }
    }

    #[test]
    fn substreams_differ() {
        let m = RandomStream::standard(1);
        let mut a = m.substream(&[0]);
        let mut b = m.substream(&[1]);
        assert_ne!(a.uniform(), b.uniform());
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
    }
}

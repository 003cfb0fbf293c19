use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign-magnitude-range fixed-point format: one sign bit, `int_bits` integer
/// bits and `frac_bits` fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointFormat {
    pub int_bits: u32,
    pub frac_bits: u32,
}

impl FixedPointFormat {
    /// The 10-bit weight format of the FPGA datapath: 1 sign, 6 integer, 3 fractional.
    pub const WEIGHT_10BIT: Self = Self {
        int_bits: 6,
        frac_bits: 3,
    };

    pub fn new(int_bits: u32, frac_bits: u32) -> Result<Self> {
        if int_bits + frac_bits == 0 || int_bits + frac_bits > 52 {
            return Err(Error::InvalidParameter(format!(
                "fixed-point format needs 1..=52 magnitude bits (got {int_bits}+{frac_bits})"
            )));
        }
        Ok(Self {
            int_bits,
            frac_bits,
        })
    }

    pub fn total_bits(&self) -> u32 {
        1 + self.int_bits + self.frac_bits
    }

    pub fn quantum(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    /// Largest raw magnitude, `2^(int+frac) - 1`.
    pub fn max_raw(&self) -> i64 {
        (1i64 << (self.int_bits + self.frac_bits)) - 1
    }

    pub fn max_value(&self) -> f64 {
        self.max_raw() as f64 * self.quantum()
    }
}

/// A value held as `raw * 2^-frac_bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixed {
    pub raw: i64,
    pub frac_bits: u32,
}

impl Fixed {
    pub fn value(&self) -> f64 {
        self.raw as f64 * (-(self.frac_bits as f64)).exp2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantized {
    pub fixed: Fixed,
    pub saturated: bool,
}

impl Quantized {
    pub fn value(&self) -> f64 {
        self.fixed.value()
    }
}

/// Round to the nearest quantum (ties to even) and clamp to `±max_value`.
pub fn quantize(x: f64, fmt: FixedPointFormat) -> Quantized {
    let max = fmt.max_raw();
    if x.is_nan() {
        return Quantized {
            fixed: Fixed {
                raw: 0,
                frac_bits: fmt.frac_bits,
            },
            saturated: true,
        };
    }
    let scaled = (x * (fmt.frac_bits as f64).exp2()).round_ties_even();
    let (raw, saturated) = if scaled > max as f64 {
        (max, true)
    } else if scaled < -(max as f64) {
        (-max, true)
    } else {
        (scaled as i64, false)
    };
    Quantized {
        fixed: Fixed {
            raw,
            frac_bits: fmt.frac_bits,
        },
        saturated,
    }
}

/// Counts saturation events; merged across replicas at swap barriers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaturationCounter {
    pub saturated: u64,
    pub total: u64,
}

impl SaturationCounter {
    pub fn quantize(&mut self, x: f64, fmt: FixedPointFormat) -> Fixed {
        let q = quantize(x, fmt);
        self.total += 1;
        if q.saturated {
            self.saturated += 1;
        }
        q.fixed
    }

    pub fn merge(&mut self, other: &SaturationCounter) {
        self.saturated += other.saturated;
        self.total += other.total;
    }
}

/// Signed accumulator of `width` bits (sign included) that reports overflow.
#[derive(Debug, Clone, Copy)]
pub struct Accumulator {
    pub width: u32,
    sum: i64,
}

impl Accumulator {
    /// Width for summing `terms` values of `fmt`: the format plus
    /// `ceil(log2(terms))` guard bits.
    pub fn for_terms(fmt: FixedPointFormat, terms: usize) -> Self {
        let guard = (terms.max(1) as f64).log2().ceil() as u32;
        Self {
            width: fmt.total_bits() + guard,
            sum: 0,
        }
    }

    pub fn add(&mut self, raw: i64) -> Result<()> {
        let limit = (1i64 << (self.width - 1)) - 1;
        self.sum += raw;
        if self.sum.abs() > limit {
            return Err(Error::Overflow { bits: self.width });
        }
        Ok(())
    }

    pub fn sum(&self) -> i64 {
        self.sum
    }
}

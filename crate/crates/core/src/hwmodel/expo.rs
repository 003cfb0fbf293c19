use super::fixed::{quantize, Fixed, FixedPointFormat, Quantized};

/// `2^floor(z) * (1 + z - floor(z))` with `z = 23x/16`, in exact arithmetic.
pub fn approx_exp(x: f64) -> f64 {
    pow2_linear(x * 23.0 / 16.0)
}

/// Shift-and-add form on the raw code: `z = x + x/4 + x/8 + x/16`, each
/// division an arithmetic right shift (so it floors).
pub fn approx_exp_fixed(x: Fixed) -> f64 {
    let r = x.raw;
    let z = Fixed {
        raw: r + (r >> 2) + (r >> 3) + (r >> 4),
        frac_bits: x.frac_bits,
    };
    pow2_linear(z.value())
}

fn pow2_linear(z: f64) -> f64 {
    let fl = z.floor();
    (fl as i32 as f64).exp2() * (1.0 + (z - fl))
}

/// CPU-side scale factors `(1 - beta_a/beta_b, 1 - beta_b/beta_a)` for one replica pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapFactors {
    pub for_b: Fixed,
    pub for_a: Fixed,
}

impl SwapFactors {
    pub fn new(beta_a: f64, beta_b: f64, fmt: FixedPointFormat) -> Self {
        Self {
            for_b: quantize(1.0 - beta_a / beta_b, fmt).fixed,
            for_a: quantize(1.0 - beta_b / beta_a, fmt).fixed,
        }
    }
}

/// `Delta = (1 - beta_a/beta_b)(beta_b E_b) + (1 - beta_b/beta_a)(beta_a E_a)`:
/// two multiplies and one add, rounded into `out`. `saturated` flags overflow.
pub fn swap_delta_hw(
    factors: SwapFactors,
    beta_e_a: Fixed,
    beta_e_b: Fixed,
    out: FixedPointFormat,
) -> Quantized {
    let prod_b = factors.for_b.raw as i128 * beta_e_b.raw as i128;
    let prod_a = factors.for_a.raw as i128 * beta_e_a.raw as i128;
    let frac_b = factors.for_b.frac_bits + beta_e_b.frac_bits;
    let frac_a = factors.for_a.frac_bits + beta_e_a.frac_bits;
    let frac = frac_a.max(frac_b);
    let sum = (prod_b << (frac - frac_b)) + (prod_a << (frac - frac_a));
    quantize(sum as f64 * (-(frac as f64)).exp2(), out)
}

/// Metropolis decision with the approximate exponential: `Delta >= 0`
/// accepts outright, otherwise accept iff `u < approx_exp(Delta)` for `u` in `[0, 1)`.
pub fn accept_hw(delta: Fixed, u: f64) -> bool {
    delta.raw >= 0 || u < approx_exp_fixed(delta)
}

use serde::{Deserialize, Serialize};

use super::fixed::{quantize, Accumulator, Fixed, FixedPointFormat, SaturationCounter};
use super::timing::TimingParams;
use crate::error::{check_len, Result};
use crate::ising::{SparsifiedModel, SpinState};
use crate::sampler::RandomStream;

/// Hardware-fidelity settings carried in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HwProfile {
    pub enabled: bool,
    /// Format of the premultiplied weights `beta*J`, `beta*h`, `beta*P`.
    pub weight_format: FixedPointFormat,
    /// Format of the CPU-precomputed swap scale factors.
    pub factor_format: FixedPointFormat,
    /// Format of the swap log-probability `Delta`.
    pub delta_format: FixedPointFormat,
    pub approx_exp: bool,
    /// Draw p-bit and swap randomness from 32-bit LFSRs.
    pub lfsr: bool,
    pub tanh_lut_size: usize,
    /// The lookup covers `beta*I` in `[-tanh_range, tanh_range]`, clamped outside.
    pub tanh_range: f64,
    pub energy_stride: usize,
    pub timing: Option<TimingParams>,
}

impl Default for HwProfile {
    fn default() -> Self {
        Self {
            enabled: false,
            weight_format: FixedPointFormat::WEIGHT_10BIT,
            factor_format: FixedPointFormat {
                int_bits: 8,
                frac_bits: 16,
            },
            delta_format: FixedPointFormat {
                int_bits: 20,
                frac_bits: 8,
            },
            approx_exp: true,
            lfsr: true,
            tanh_lut_size: 256,
            tanh_range: 4.0,
            energy_stride: 8,
            timing: None,
        }
    }
}

impl HwProfile {
    /// 10-bit weights, approximate exponential and LFSR randomness.
    pub fn fpga() -> Self {
        Self {
            enabled: true,
            timing: Some(TimingParams::default()),
            ..Self::default()
        }
    }
}

/// Piecewise-constant `tanh` over `[-range, range)` sampled at bin centers.
#[derive(Debug, Clone)]
pub struct TanhLut {
    range: f64,
    scale: f64,
    table: Vec<f64>,
}

impl TanhLut {
    pub fn new(size: usize, range: f64) -> Self {
        let size = size.max(2);
        let width = 2.0 * range / size as f64;
        let table = (0..size)
            .map(|k| (-range + (k as f64 + 0.5) * width).tanh())
            .collect();
        Self {
            range,
            scale: size as f64 / (2.0 * range),
            table,
        }
    }

    #[inline]
    pub fn lookup(&self, x: f64) -> f64 {
        let last = self.table.len() - 1;
        let k = ((x + self.range) * self.scale).floor();
        let k = if k < 0.0 { 0 } else { (k as usize).min(last) };
        self.table[k]
    }
}

/// One replica's weights premultiplied by its `beta` (and the copy penalty),
/// optionally quantized. Quantized values are exact binary fractions, so the
/// `f64` sums below equal the integer datapath sums.
#[derive(Debug, Clone)]
pub struct PremultipliedWeights {
    pub beta: f64,
    pub penalty: f64,
    format: Option<FixedPointFormat>,
    nbr_weight: Vec<f64>,
    copy_weight: f64,
    bias: Vec<f64>,
    pub saturation: SaturationCounter,
}

impl PremultipliedWeights {
    pub fn new(
        sm: &SparsifiedModel,
        beta: f64,
        penalty: f64,
        format: Option<FixedPointFormat>,
    ) -> Self {
        let mut saturation = SaturationCounter::default();
        let mut q = |x: f64| match format {
            Some(fmt) => saturation.quantize(x, fmt).value(),
            None => x,
        };
        let (_, _, weights) = sm.csr();
        let nbr_weight = weights.iter().map(|&w| q(beta * w)).collect();
        let copy_weight = q(beta * penalty);
        let bias = sm.h_phys().iter().map(|&h| q(beta * h)).collect();
        Self {
            beta,
            penalty,
            format,
            nbr_weight,
            copy_weight,
            bias,
            saturation,
        }
    }

    pub fn format(&self) -> Option<FixedPointFormat> {
        self.format
    }

    pub fn copy_weight(&self) -> f64 {
        self.copy_weight
    }

    pub fn bias(&self, i: usize) -> f64 {
        self.bias[i]
    }

    /// `beta*I_i` from the premultiplied weights.
    #[inline]
    pub fn field(&self, sm: &SparsifiedModel, s: &[i8], i: usize) -> f64 {
        let (offsets, index, _) = sm.csr();
        let r = offsets[i]..offsets[i + 1];
        let mut acc = self.bias[i];
        for (&j, &w) in index[r.clone()].iter().zip(&self.nbr_weight[r]) {
            acc += if s[j] > 0 { w } else { -w };
        }
        let partners: i32 = sm.copy_partners(i).iter().map(|&k| s[k] as i32).sum();
        acc + self.copy_weight * partners as f64
    }
}

/// `beta_r I_i = sum_j (beta_r J_ij) m_j + beta_r h_i` with each premultiplied
/// weight quantized to `fmt` and summed in a guarded accumulator.
pub fn premultiplied_field(
    sm: &SparsifiedModel,
    beta: f64,
    penalty: f64,
    s: &SpinState,
    i: usize,
    fmt: FixedPointFormat,
) -> Result<Fixed> {
    check_len("physical spin state", sm.n_phys(), s.len())?;
    let (idx, w) = sm.neighbors(i);
    let partners = sm.copy_partners(i);
    let mut acc = Accumulator::for_terms(fmt, idx.len() + partners.len() + 1);
    for (&j, &wj) in idx.iter().zip(w) {
        acc.add(quantize(beta * wj, fmt).fixed.raw * s.get(j) as i64)?;
    }
    let copy_raw = quantize(beta * penalty, fmt).fixed.raw;
    for &k in partners {
        acc.add(copy_raw * s.get(k) as i64)?;
    }
    acc.add(quantize(beta * sm.h_phys()[i], fmt).fixed.raw)?;
    Ok(Fixed {
        raw: acc.sum(),
        frac_bits: fmt.frac_bits,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalEnergy {
    /// Per-node contribution `-m_i (beta I_i + beta h_i) / 2`.
    pub terms: Vec<f64>,
    /// `beta_r * E`.
    pub total: f64,
}

/// Rebuilds `beta_r E` from per-node terms, accumulated in chunks of `stride`
/// nodes the way the shift-register adder tree consumes them.
pub fn local_energy_terms(
    sm: &SparsifiedModel,
    weights: &PremultipliedWeights,
    s: &SpinState,
    stride: usize,
) -> Result<LocalEnergy> {
    check_len("physical spin state", sm.n_phys(), s.len())?;
    let terms: Vec<f64> = (0..sm.n_phys())
        .map(|i| {
            let m = s.get(i) as f64;
            -0.5 * m * (weights.field(sm, s.as_slice(), i) + weights.bias(i))
        })
        .collect();
    let total = terms
        .chunks(stride.max(1))
        .map(|chunk| chunk.iter().sum::<f64>())
        .sum();
    Ok(LocalEnergy { terms, total })
}

/// `beta_r E` for a raw slice, same accumulation order as [`local_energy_terms`].
pub(crate) fn beta_energy(sm: &SparsifiedModel, weights: &PremultipliedWeights, s: &[i8], stride: usize) -> f64 {
    let n = sm.n_phys();
    let mut total = 0.0;
    let mut start = 0;
    while start < n {
        let end = (start + stride).min(n);
        let mut chunk = 0.0;
        for i in start..end {
            let m = s[i] as f64;
            chunk += -0.5 * m * (weights.field(sm, s, i) + weights.bias(i));
        }
        total += chunk;
        start = end;
    }
    total
}

/// One chromatic sweep through the hardware datapath: premultiplied fields,
/// `tanh` lookup, comparison against the stream's draw.
pub(crate) fn hw_sweep(
    sm: &SparsifiedModel,
    weights: &PremultipliedWeights,
    lut: &TanhLut,
    s: &mut [i8],
    stream: &mut RandomStream,
) {
    for class in sm.color_classes() {
        for &i in class {
            let t = lut.lookup(weights.field(sm, s, i));
            s[i] = if t > stream.uniform() { 1 } else { -1 };
        }
    }
}

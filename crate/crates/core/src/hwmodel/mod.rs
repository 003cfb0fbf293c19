//! Behavioral model of the FPGA datapath: fixed-point premultiplied weights,
//! local-energy reconstruction, the base-2 exponential used by the swap
//! controller, and the cycle-level timing model.

mod datapath;
mod expo;
mod fixed;
mod timing;

pub(crate) use datapath::{beta_energy, hw_sweep};
pub use datapath::{
    local_energy_terms, premultiplied_field, HwProfile, LocalEnergy, PremultipliedWeights, TanhLut,
};
pub use expo::{accept_hw, approx_exp, approx_exp_fixed, swap_delta_hw, SwapFactors};
pub use fixed::{quantize, Accumulator, Fixed, FixedPointFormat, Quantized, SaturationCounter};
pub use timing::{
    instance_time, step_cycles, step_pcie_cycles, step_time, timing_report, timing_scan,
    TimingParams, TimingReport, TimingScan, SWAP_PIPELINE_CYCLES,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the deterministic cycle model. Frequencies are in Hz and
/// fixed overheads in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingParams {
    pub f_sys_hz: u64,
    pub f_pcie_hz: u64,
    pub n_color: u64,
    /// Sweeps between swap attempts.
    pub n_sweep: u64,
    /// Shift-register stride of the energy adder tree.
    pub stride: u64,
    pub t_load_ns: u64,
    pub t_read_ns: u64,
    pub t_verify_ns: u64,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            f_sys_hz: 125_000_000,
            f_pcie_hz: 125_000_000,
            n_color: 5,
            n_sweep: 100,
            stride: 8,
            t_load_ns: 160,
            t_read_ns: 80,
            t_verify_ns: 40,
        }
    }
}

/// Pipeline overhead of the swap controller, in reference cycles.
pub const SWAP_PIPELINE_CYCLES: u64 = 7;

impl TimingParams {
    pub fn validate(&self) -> Result<()> {
        if self.f_sys_hz == 0
            || self.f_pcie_hz == 0
            || self.n_color == 0
            || self.n_sweep == 0
            || self.stride == 0
        {
            return Err(Error::InvalidParameter(
                "timing parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `C_step = N_color * N_sweep + ceil(N / d) + 7`.
pub fn step_cycles(tp: &TimingParams, n_phys: u64) -> u64 {
    tp.n_color * tp.n_sweep + n_phys.div_ceil(tp.stride) + SWAP_PIPELINE_CYCLES
}

/// PCIe-domain cycles per step, `ceil(C_step * f_pcie / f_sys)`, in integer arithmetic.
pub fn step_pcie_cycles(tp: &TimingParams, n_phys: u64) -> u64 {
    let num = step_cycles(tp, n_phys) as u128 * tp.f_pcie_hz as u128;
    num.div_ceil(tp.f_sys_hz as u128) as u64
}

/// Seconds per swap step.
pub fn step_time(tp: &TimingParams, n_phys: u64) -> f64 {
    step_pcie_cycles(tp, n_phys) as f64 / tp.f_pcie_hz as f64
}

/// `t_load + n_steps * t_step + t_read + t_verify`, in seconds.
pub fn instance_time(tp: &TimingParams, n_phys: u64, n_steps: u64) -> f64 {
    let overhead_ns = tp.t_load_ns + tp.t_read_ns + tp.t_verify_ns;
    let cycles = n_steps as u128 * step_pcie_cycles(tp, n_phys) as u128;
    overhead_ns as f64 * 1e-9 + cycles as f64 / tp.f_pcie_hz as f64
}

/// Modeled timing attached to run results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub modeled: bool,
    pub step_cycles: u64,
    pub step_seconds: f64,
    pub instance_seconds: f64,
}

pub fn timing_report(tp: &TimingParams, n_phys: u64, n_steps: u64) -> TimingReport {
    TimingReport {
        modeled: true,
        step_cycles: step_cycles(tp, n_phys),
        step_seconds: step_time(tp, n_phys),
        instance_seconds: instance_time(tp, n_phys, n_steps),
    }
}

/// Range of instance times over a grid of unpublished hardware parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingScan {
    pub min_seconds: f64,
    pub max_seconds: f64,
    /// Grid point closest to the target, as `(n_color, stride, f_sys_hz, seconds)`.
    pub closest: (u64, u64, u64, f64),
}

pub fn timing_scan(
    base: &TimingParams,
    n_phys: u64,
    n_steps: u64,
    n_colors: &[u64],
    strides: &[u64],
    f_sys: &[u64],
    target_seconds: f64,
) -> TimingScan {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut closest = (0, 0, 0, f64::NAN);
    for &n_color in n_colors {
        for &stride in strides {
            for &f in f_sys {
                let tp = TimingParams {
                    n_color,
                    stride,
                    f_sys_hz: f,
                    ..*base
                };
                let t = instance_time(&tp, n_phys, n_steps);
                min = min.min(t);
                max = max.max(t);
                if closest.3.is_nan() || (t - target_seconds).abs() < (closest.3 - target_seconds).abs()
                {
                    closest = (n_color, stride, f, t);
                }
            }
        }
    }
    TimingScan {
        min_seconds: min,
        max_seconds: max,
        closest,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_step() {
        let tp = TimingParams {
            n_color: 1,
            n_sweep: 1,
            stride: 8,
            ..Default::default()
        };
        assert_eq!(step_cycles(&tp, 8), 9);
    }

    #[test]
    fn reference_step() {
        let tp = TimingParams::default();
        assert_eq!(step_cycles(&tp, 128), 523);
        assert_eq!(step_pcie_cycles(&tp, 128), 523);
        assert!((step_time(&tp, 128) - 4.184e-6).abs() < 1e-15);
    }

    #[test]
    fn zero_steps_is_pure_overhead() {
        let t = instance_time(&TimingParams::default(), 128, 0);
        assert!((t - 280e-9).abs() < 1e-18);
    }

    #[test]
    fn clock_crossing_rounds_up() {
        // 523 cycles at 200 MHz seen from 125 MHz: 326.875 -> 327 PCIe cycles
        let tp = TimingParams {
            f_sys_hz: 200_000_000,
            ..Default::default()
        };
        assert_eq!(step_pcie_cycles(&tp, 128), 327);
    }
}

//! Replica exchange over an inverse-temperature ladder and, optionally, a
//! penalty ladder.

mod engine;
mod grid;
mod schedule;
mod swap;

pub use grid::{swap_round, swap_statistics, PairStats, Parity, ReplicaGrid, SwapAxis, SwapSummary};
pub use engine::{run_1dpt, run_2dpt, PtConfig, RunResult};
pub use schedule::{
    adaptive_schedule, adaptive_schedule_multi, adaptive_schedule_with, average_schedules, geometric_ladder,
    ChainProbe, Probe, ProbeStats, Schedule, ScheduleParams,
};
pub use swap::{acceptance, beta_swap_delta, beta_swap_delta_premultiplied, p_swap_delta};

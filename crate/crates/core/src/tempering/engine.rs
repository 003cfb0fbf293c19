use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{swap_statistics, Parity, ReplicaGrid, SwapAxis, SwapSummary};
use crate::error::{Error, Result};
use crate::hwmodel::{
    accept_hw, beta_energy, hw_sweep, quantize, Fixed, swap_delta_hw, timing_report,
    HwProfile, PremultipliedWeights, SaturationCounter, SwapFactors, TanhLut, TimingReport,
};
use crate::ising::{project_slice, SparsifiedModel, SpinState};
use crate::sampler::{sweep_slice, RandomStream, StreamKind};

/// Work (spin updates per round) above which replicas are swept in parallel.
const PARALLEL_WORK: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PtConfig {
    pub sweeps_per_swap: usize,
    pub n_swaps: usize,
    /// Read out only the highest-beta row.
    #[serde(default)]
    pub best_row_only: bool,
    pub seed: u64,
    /// Stop as soon as the best dense energy is at or below this value.
    #[serde(default)]
    pub stop_at_energy: Option<f64>,
    #[serde(default)]
    pub hw: HwProfile,
}

impl PtConfig {
    pub fn new(sweeps_per_swap: usize, n_swaps: usize, seed: u64) -> Self {
        Self {
            sweeps_per_swap,
            n_swaps,
            best_row_only: false,
            seed,
            stop_at_energy: None,
            hw: HwProfile::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps_per_swap == 0 {
            return Err(Error::InvalidParameter("sweeps_per_swap must be positive".into()));
        }
        if self.hw.enabled {
            if self.hw.energy_stride == 0 || self.hw.tanh_lut_size < 2 || !(self.hw.tanh_range > 0.0) {
                return Err(Error::InvalidParameter("invalid hardware profile".into()));
            }
            if let Some(tp) = &self.hw.timing {
                tp.validate()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best_energy: f64,
    pub best_state: SpinState,
    /// Round after which the best state was first seen (0 = initial states).
    pub best_round: usize,
    /// Number of rounds after which `stop_at_energy` was reached.
    pub hit_round: Option<usize>,
    pub rounds: usize,
    /// Best dense energy after each round.
    pub trace: Vec<f64>,
    pub betas: Vec<f64>,
    pub penalties: Vec<f64>,
    pub swaps: SwapSummary,
    /// Mean copy agreement (percent) per grid position, `rows x cols`.
    pub agreement: Vec<Vec<f64>>,
    pub seed: u64,
    pub n_logical: usize,
    pub n_phys: usize,
    pub saturation: Option<SaturationCounter>,
    pub timing: Option<TimingReport>,
}

/// 1D parallel tempering: one column at copy strength `penalty`.
pub fn run_1dpt(sm: &SparsifiedModel, betas: &[f64], penalty: f64, cfg: &PtConfig) -> Result<RunResult> {
    run_grid(sm, betas, &[penalty], cfg)
}

/// 2D parallel tempering over `betas x penalties`. A single column gives the
/// same run as [`run_1dpt`].
pub fn run_2dpt(
    sm: &SparsifiedModel,
    betas: &[f64],
    penalties: &[f64],
    cfg: &PtConfig,
) -> Result<RunResult> {
    run_grid(sm, betas, penalties, cfg)
}

struct HwState {
    weights: Vec<PremultipliedWeights>,
    lut: TanhLut,
    beta_e: Vec<f64>,
    beta_factors: Vec<SwapFactors>,
    saturation: SaturationCounter,
}

impl HwState {
    fn new(sm: &SparsifiedModel, grid: &ReplicaGrid, hw: &HwProfile) -> Self {
        let slots = grid.rows() * grid.cols();
        let weights: Vec<_> = (0..slots)
            .map(|k| {
                PremultipliedWeights::new(
                    sm,
                    grid.beta_of_slot(k),
                    grid.penalty_of_slot(k),
                    Some(hw.weight_format),
                )
            })
            .collect();
        let mut saturation = SaturationCounter::default();
        for w in &weights {
            saturation.merge(&w.saturation);
        }
        let beta_factors = (0..grid.rows().saturating_sub(1))
            .map(|r| SwapFactors::new(grid.betas()[r], grid.betas()[r + 1], hw.factor_format))
            .collect();
        let mut s = Self {
            weights,
            lut: TanhLut::new(hw.tanh_lut_size, hw.tanh_range),
            beta_e: vec![0.0; slots],
            beta_factors,
            saturation,
        };
        for k in 0..slots {
            s.refresh(sm, grid, hw, k);
        }
        s
    }

    fn refresh(&mut self, sm: &SparsifiedModel, grid: &ReplicaGrid, hw: &HwProfile, k: usize) {
        self.beta_e[k] = beta_energy(sm, &self.weights[k], grid.states()[k].as_slice(), hw.energy_stride);
    }

    fn accept(&mut self, delta: f64, hw: &HwProfile, u: f64) -> bool {
        let q = self.saturation.quantize(delta, hw.delta_format);
        self.decide(q, hw, u)
    }

    fn decide(&self, q: Fixed, hw: &HwProfile, u: f64) -> bool {
        if hw.approx_exp {
            accept_hw(q, u)
        } else {
            q.raw >= 0 || u < q.value().exp()
        }
    }
}

fn run_grid(sm: &SparsifiedModel, betas: &[f64], penalties: &[f64], cfg: &PtConfig) -> Result<RunResult> {
    cfg.validate()?;
    let hw = &cfg.hw;
    let kind = if hw.enabled && hw.lfsr {
        StreamKind::Lfsr
    } else {
        StreamKind::Standard
    };
    let master = RandomStream::new(kind, cfg.seed)
        .or_else(|_| RandomStream::new(kind, cfg.seed ^ 1))?;
    let slots = betas.len() * penalties.len();
    let n_phys = sm.n_phys();
    let states = (0..slots)
        .map(|k| SpinState::random(n_phys, &mut master.substream(&[0, k as u64])))
        .collect();
    let mut grid = ReplicaGrid::new(sm, betas.to_vec(), penalties.to_vec(), states)?;
    let (rows, cols) = (grid.rows(), grid.cols());

    let mut sweep_streams: Vec<RandomStream> =
        (0..slots).map(|k| master.substream(&[1, k as u64])).collect();
    let mut swap_stream = master.substream(&[2]);
    let mut readout_stream = master.substream(&[3]);
    let mut hw_state = hw.enabled.then(|| HwState::new(sm, &grid, hw));
    let parallel = slots * n_phys * cfg.sweeps_per_swap >= PARALLEL_WORK;

    let mut tracker = BestTracker::default();
    tracker.observe(sm, &grid, cfg.best_row_only, &mut readout_stream, 0);
    let mut agreement_sum = vec![0.0; slots];
    let mut trace = Vec::with_capacity(cfg.n_swaps);
    let mut hit_round = reached(&tracker, cfg).then_some(0);
    let mut rounds = 0;

    while rounds < cfg.n_swaps && hit_round.is_none() {
        let round = rounds;
        sweep_all(sm, &mut grid, &mut sweep_streams, hw_state.as_ref(), cfg, parallel);
        grid.recompute_energies(sm);
        if let Some(hs) = hw_state.as_mut() {
            for k in 0..slots {
                hs.refresh(sm, &grid, hw, k);
            }
        }

        let parity = Parity::of_round(round);
        exchange(sm, &mut grid, SwapAxis::Beta, parity, &mut swap_stream, hw_state.as_mut(), hw);
        if cols > 1 {
            exchange(sm, &mut grid, SwapAxis::Penalty, parity, &mut swap_stream, hw_state.as_mut(), hw);
        }

        rounds += 1;
        tracker.observe(sm, &grid, cfg.best_row_only, &mut readout_stream, rounds);
        for (k, acc) in agreement_sum.iter_mut().enumerate() {
            *acc += agreement_pct(sm, grid.states()[k].as_slice());
        }
        trace.push(tracker.energy);
        if reached(&tracker, cfg) {
            hit_round = Some(rounds);
        }
    }

    let denom = rounds.max(1) as f64;
    let agreement = (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| {
                    if rounds == 0 {
                        agreement_pct(sm, grid.state(r, c).as_slice())
                    } else {
                        agreement_sum[r * cols + c] / denom
                    }
                })
                .collect()
        })
        .collect();
    let timing = hw
        .timing
        .filter(|_| hw.enabled)
        .map(|tp| timing_report(&tp, n_phys as u64, rounds as u64));

    Ok(RunResult {
        best_energy: tracker.energy,
        best_state: SpinState::new(tracker.state).expect("projected spins"),
        best_round: tracker.round,
        hit_round,
        rounds,
        trace,
        betas: betas.to_vec(),
        penalties: penalties.to_vec(),
        swaps: swap_statistics(&grid),
        agreement,
        seed: cfg.seed,
        n_logical: sm.n_logical(),
        n_phys,
        saturation: hw_state.map(|h| h.saturation),
        timing,
    })
}

fn reached(tracker: &BestTracker, cfg: &PtConfig) -> bool {
    cfg.stop_at_energy
        .is_some_and(|target| tracker.energy <= target + 1e-9 * (1.0 + target.abs()))
}

fn agreement_pct(sm: &SparsifiedModel, s: &[i8]) -> f64 {
    let edges = sm.copy_edges().len();
    if edges == 0 {
        100.0
    } else {
        100.0 * (1.0 - sm.broken_pairs(s) as f64 / edges as f64)
    }
}

fn sweep_all(
    sm: &SparsifiedModel,
    grid: &mut ReplicaGrid,
    streams: &mut [RandomStream],
    hw_state: Option<&HwState>,
    cfg: &PtConfig,
    parallel: bool,
) {
    let params: Vec<(f64, f64)> = (0..streams.len())
        .map(|k| (grid.beta_of_slot(k), grid.penalty_of_slot(k)))
        .collect();
    let work = |(k, (state, stream)): (usize, (&mut SpinState, &mut RandomStream))| {
        let s = state.as_mut_slice();
        for _ in 0..cfg.sweeps_per_swap {
            match hw_state {
                Some(hs) => hw_sweep(sm, &hs.weights[k], &hs.lut, s, stream),
                None => sweep_slice(sm, params[k].1, params[k].0, s, stream),
            }
        }
    };
    let states = grid.states_mut();
    if parallel {
        states
            .par_iter_mut()
            .zip(streams.par_iter_mut())
            .enumerate()
            .for_each(work);
    } else {
        states.iter_mut().zip(streams.iter_mut()).enumerate().for_each(work);
    }
}

fn exchange(
    sm: &SparsifiedModel,
    grid: &mut ReplicaGrid,
    axis: SwapAxis,
    parity: Parity,
    stream: &mut RandomStream,
    hw_state: Option<&mut HwState>,
    hw: &HwProfile,
) {
    let Some(hs) = hw_state else {
        grid.swap_round_with(axis, parity, stream, |g, a, b, u| {
            let d = g.delta(axis, a, b);
            d >= 0.0 || u < d.exp()
        });
        return;
    };
    let cols = grid.cols();
    let accepted = grid.swap_round_with(axis, parity, stream, |g, a, b, u| match axis {
        SwapAxis::Beta => {
            let fa = quantize(hs.beta_e[a], hw.delta_format);
            let fb = quantize(hs.beta_e[b], hw.delta_format);
            let d = swap_delta_hw(hs.beta_factors[a / cols], fa.fixed, fb.fixed, hw.delta_format);
            hs.saturation.total += 1;
            if d.saturated || fa.saturated || fb.saturated {
                hs.saturation.saturated += 1;
            }
            hs.decide(d.fixed, hw, u)
        }
        SwapAxis::Penalty => {
            let dw = hs.weights[b].copy_weight() - hs.weights[a].copy_weight();
            let delta = dw * (g.slot_copy_energy(b) - g.slot_copy_energy(a));
            hs.accept(delta, hw, u)
        }
    });
    for (a, b) in accepted {
        hs.refresh(sm, grid, hw, a);
        hs.refresh(sm, grid, hw, b);
    }
}

#[derive(Debug, Default)]
struct BestTracker {
    energy: f64,
    state: Vec<i8>,
    round: usize,
    seen: bool,
}

impl BestTracker {
    /// Projects this round's candidates and keeps the lowest dense energy.
    /// Candidates are the lowest-sparse-energy replica of every column, or
    /// every replica of the last row when `best_row_only` is set.
    fn observe(
        &mut self,
        sm: &SparsifiedModel,
        grid: &ReplicaGrid,
        best_row_only: bool,
        stream: &mut RandomStream,
        round: usize,
    ) {
        let (rows, cols) = (grid.rows(), grid.cols());
        for c in 0..cols {
            let picks: Vec<usize> = if best_row_only {
                vec![grid.slot(rows - 1, c)]
            } else {
                let best = (0..rows)
                    .map(|r| grid.slot(r, c))
                    .min_by(|&x, &y| grid.slot_energy(x).total_cmp(&grid.slot_energy(y)))
                    .expect("at least one row");
                vec![best]
            };
            for k in picks {
                let logical = project_slice(sm, grid.states()[k].as_slice(), stream);
                let e = sm.source().energy_unchecked(&logical);
                if !self.seen || e < self.energy {
                    self.energy = e;
                    self.state = logical;
                    self.round = round;
                    self.seen = true;
                }
            }
        }
    }
}

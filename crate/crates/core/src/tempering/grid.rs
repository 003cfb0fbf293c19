use serde::{Deserialize, Serialize};

use super::swap::{beta_swap_delta, p_swap_delta};
use crate::error::{check_len, Error, Result};
use crate::ising::{SparsifiedModel, SpinState};
use crate::sampler::{sweep_slice, RandomStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapAxis {
    Beta,
    Penalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_round(round: usize) -> Self {
        if round.is_multiple_of(2) {
            Self::Even
        } else {
            Self::Odd
        }
    }

    fn offset(self) -> usize {
        match self {
            Self::Even => 0,
            Self::Odd => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    pub attempted: u64,
    pub accepted: u64,
}

impl PairStats {
    pub fn rate(&self) -> Option<f64> {
        (self.attempted > 0).then(|| self.accepted as f64 / self.attempted as f64)
    }
}

pub(crate) fn validate_ladder(name: &str, values: &[f64], min_exclusive: Option<f64>) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} ladder is empty")));
    }
    for w in values.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidParameter(format!(
                "{name} ladder must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    let lowest = values[0];
    let ok = match min_exclusive {
        Some(m) => lowest > m,
        None => lowest >= 0.0,
    };
    if !ok || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{name} ladder has an out-of-range entry ({lowest})"
        )));
    }
    Ok(())
}

/// `rows x cols` replicas: row `r` runs at `betas[r]`, column `c` at
/// `penalties[c]`. Slot `(r, c)` is stored at `r * cols + c`. States move
/// between slots on exchange; parameters stay with the slot.
#[derive(Debug, Clone)]
pub struct ReplicaGrid {
    betas: Vec<f64>,
    penalties: Vec<f64>,
    states: Vec<SpinState>,
    e_prob: Vec<f64>,
    e_copy: Vec<f64>,
    beta_stats: Vec<PairStats>,
    p_stats: Vec<PairStats>,
}

impl ReplicaGrid {
    pub fn new(
        sm: &SparsifiedModel,
        betas: Vec<f64>,
        penalties: Vec<f64>,
        states: Vec<SpinState>,
    ) -> Result<Self> {
        validate_ladder("beta", &betas, Some(0.0))?;
        validate_ladder("penalty", &penalties, None)?;
        let (rows, cols) = (betas.len(), penalties.len());
        check_len("replica states", rows * cols, states.len())?;
        for s in &states {
            check_len("replica state", sm.n_phys(), s.len())?;
        }
        let mut grid = Self {
            betas,
            penalties,
            states,
            e_prob: vec![0.0; rows * cols],
            e_copy: vec![0.0; rows * cols],
            beta_stats: vec![PairStats::default(); rows.saturating_sub(1) * cols],
            p_stats: vec![PairStats::default(); rows * cols.saturating_sub(1)],
        };
        grid.recompute_energies(sm);
        Ok(grid)
    }

    pub fn rows(&self) -> usize {
        self.betas.len()
    }

    pub fn cols(&self) -> usize {
        self.penalties.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn penalties(&self) -> &[f64] {
        &self.penalties
    }

    #[inline]
    pub fn slot(&self, row: usize, col: usize) -> usize {
        row * self.cols() + col
    }

    pub fn beta_of_slot(&self, slot: usize) -> f64 {
        self.betas[slot / self.cols()]
    }

    pub fn penalty_of_slot(&self, slot: usize) -> f64 {
        self.penalties[slot % self.cols()]
    }

    pub fn state(&self, row: usize, col: usize) -> &SpinState {
        &self.states[self.slot(row, col)]
    }

    pub fn states(&self) -> &[SpinState] {
        &self.states
    }

    #[cfg(test)]
    pub(crate) fn state_mut(&mut self, slot: usize) -> &mut SpinState {
        &mut self.states[slot]
    }

    pub(crate) fn states_mut(&mut self) -> &mut [SpinState] {
        &mut self.states
    }

    /// Cached sparse energy at the slot's own penalty.
    pub fn energy(&self, row: usize, col: usize) -> f64 {
        let k = self.slot(row, col);
        self.slot_energy(k)
    }

    #[inline]
    pub(crate) fn slot_energy(&self, k: usize) -> f64 {
        self.e_prob[k] + self.penalty_of_slot(k) * self.e_copy[k]
    }

    pub fn copy_energy(&self, row: usize, col: usize) -> f64 {
        self.e_copy[self.slot(row, col)]
    }

    pub(crate) fn slot_copy_energy(&self, k: usize) -> f64 {
        self.e_copy[k]
    }

    pub fn recompute_energies(&mut self, sm: &SparsifiedModel) {
        for k in 0..self.states.len() {
            self.recompute_slot(sm, k);
        }
    }

    pub(crate) fn recompute_slot(&mut self, sm: &SparsifiedModel, k: usize) {
        let (p, c) = sm.energy_parts(self.states[k].as_slice());
        self.e_prob[k] = p;
        self.e_copy[k] = c;
    }

    /// Runs `sweeps` chromatic sweeps on one slot at its own (beta, P) and
    /// refreshes its cached energies.
    pub fn sweep_slot(&mut self, sm: &SparsifiedModel, row: usize, col: usize, sweeps: usize, stream: &mut RandomStream) {
        let k = self.slot(row, col);
        let (beta, p) = (self.beta_of_slot(k), self.penalty_of_slot(k));
        for _ in 0..sweeps {
            sweep_slice(sm, p, beta, self.states[k].as_mut_slice(), stream);
        }
        self.recompute_slot(sm, k);
    }

    /// Largest gap between cached and freshly computed energies.
    pub fn cache_error(&self, sm: &SparsifiedModel) -> f64 {
        (0..self.states.len())
            .map(|k| {
                let (p, c) = sm.energy_parts(self.states[k].as_slice());
                let fresh = p + self.penalty_of_slot(k) * c;
                (fresh - self.slot_energy(k)).abs().max((c - self.e_copy[k]).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Overrides the cached energy parts of a slot (for constructing test scenarios).
    pub fn set_cached_energy(&mut self, row: usize, col: usize, e_problem: f64, e_copy: f64) {
        let k = self.slot(row, col);
        self.e_prob[k] = e_problem;
        self.e_copy[k] = e_copy;
    }

    /// Counters for the pair `(row, row+1)` in column `col`.
    pub fn beta_pair_stats(&self, row: usize, col: usize) -> PairStats {
        self.beta_stats[row * self.cols() + col]
    }

    /// Counters for the pair `(col, col+1)` in row `row`.
    pub fn p_pair_stats(&self, row: usize, col: usize) -> PairStats {
        self.p_stats[row * (self.cols() - 1) + col]
    }

    fn exchange(&mut self, a: usize, b: usize) {
        self.states.swap(a, b);
        self.e_prob.swap(a, b);
        self.e_copy.swap(a, b);
    }

    /// Adjacent slot pairs `(a, b)` along `axis` whose lower index has `parity`,
    /// in ascending order.
    pub fn pairs(&self, axis: SwapAxis, parity: Parity) -> Vec<(usize, usize)> {
        let (rows, cols) = (self.rows(), self.cols());
        let mut out = Vec::new();
        match axis {
            SwapAxis::Beta => {
                for r in (parity.offset()..rows.saturating_sub(1)).step_by(2) {
                    for c in 0..cols {
                        out.push((self.slot(r, c), self.slot(r + 1, c)));
                    }
                }
            }
            SwapAxis::Penalty => {
                for r in 0..rows {
                    for c in (parity.offset()..cols.saturating_sub(1)).step_by(2) {
                        out.push((self.slot(r, c), self.slot(r, c + 1)));
                    }
                }
            }
        }
        out
    }

    fn stats_mut(&mut self, axis: SwapAxis, a: usize) -> &mut PairStats {
        let cols = self.cols();
        match axis {
            SwapAxis::Beta => &mut self.beta_stats[a],
            SwapAxis::Penalty => {
                let (r, c) = (a / cols, a % cols);
                &mut self.p_stats[r * (cols - 1) + c]
            }
        }
    }

    /// Float Metropolis log-acceptance for exchanging slots `a` and `b`.
    pub fn delta(&self, axis: SwapAxis, a: usize, b: usize) -> f64 {
        match axis {
            SwapAxis::Beta => beta_swap_delta(
                self.beta_of_slot(a),
                self.beta_of_slot(b),
                self.slot_energy(a),
                self.slot_energy(b),
            ),
            SwapAxis::Penalty => p_swap_delta(
                self.beta_of_slot(a),
                self.penalty_of_slot(a),
                self.penalty_of_slot(b),
                self.e_copy[a],
                self.e_copy[b],
            ),
        }
    }

    /// Runs one round with a custom decision rule. `decide(grid, a, b, u)`
    /// receives a fresh uniform `u` in `[0, 1)` for every attempted pair.
    /// Returns the accepted pairs.
    pub(crate) fn swap_round_with<F>(
        &mut self,
        axis: SwapAxis,
        parity: Parity,
        stream: &mut RandomStream,
        mut decide: F,
    ) -> Vec<(usize, usize)>
    where
        F: FnMut(&Self, usize, usize, f64) -> bool,
    {
        let mut accepted = Vec::new();
        for (a, b) in self.pairs(axis, parity) {
            let u = stream.unit();
            let ok = decide(self, a, b, u);
            let st = self.stats_mut(axis, a);
            st.attempted += 1;
            if ok {
                st.accepted += 1;
                self.exchange(a, b);
                accepted.push((a, b));
            }
        }
        accepted
    }
}

/// One Metropolis exchange round along `axis` over the pairs of the given
/// parity: accept with `min(1, e^Delta)` and exchange states with their cached
/// energies (the penalty-scaled energy follows the destination slot).
pub fn swap_round(
    grid: &mut ReplicaGrid,
    axis: SwapAxis,
    parity: Parity,
    stream: &mut RandomStream,
) -> Result<usize> {
    if axis == SwapAxis::Penalty && grid.cols() < 2 {
        return Err(Error::InvalidParameter(
            "penalty-axis swaps need at least two columns".into(),
        ));
    }
    let accepted = grid.swap_round_with(axis, parity, stream, |g, a, b, u| {
        let d = g.delta(axis, a, b);
        d >= 0.0 || u < d.exp()
    });
    Ok(accepted.len())
}

/// Mean acceptance per adjacent pair along each axis, averaged over the
/// orthogonal axis. `None` marks pairs that were never attempted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapSummary {
    pub beta: Vec<Option<f64>>,
    pub penalty: Vec<Option<f64>>,
    /// Per-pair rates, `(rows-1) x cols`.
    pub beta_matrix: Vec<Vec<Option<f64>>>,
    /// Per-pair rates, `rows x (cols-1)`.
    pub penalty_matrix: Vec<Vec<Option<f64>>>,
}

fn mean_defined(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = xs.flatten().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

pub fn swap_statistics(grid: &ReplicaGrid) -> SwapSummary {
    let (rows, cols) = (grid.rows(), grid.cols());
    let beta_matrix: Vec<Vec<Option<f64>>> = (0..rows.saturating_sub(1))
        .map(|r| (0..cols).map(|c| grid.beta_pair_stats(r, c).rate()).collect())
        .collect();
    let penalty_matrix: Vec<Vec<Option<f64>>> = (0..rows)
        .map(|r| {
            (0..cols.saturating_sub(1))
                .map(|c| grid.p_pair_stats(r, c).rate())
                .collect()
        })
        .collect();
    let beta = beta_matrix
        .iter()
        .map(|row| mean_defined(row.iter().copied()))
        .collect();
    let penalty = (0..cols.saturating_sub(1))
        .map(|c| mean_defined(penalty_matrix.iter().map(|row| row[c])))
        .collect();
    SwapSummary {
        beta,
        penalty,
        beta_matrix,
        penalty_matrix,
    }
}

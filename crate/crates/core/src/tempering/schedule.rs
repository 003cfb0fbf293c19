use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::validate_ladder;
use crate::error::{Error, Result};
use crate::ising::{SparsifiedModel, SpinState};
use crate::sampler::{sweep_slice, RandomStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    pub alpha_beta: f64,
    pub alpha_p: f64,
    pub beta0: f64,
    pub p0: f64,
    #[serde(default = "default_chains")]
    pub probe_chains: usize,
    #[serde(default = "default_sweeps")]
    pub probe_sweeps: usize,
    /// Row expansion stops once `sigma_E` drops below this. `None` uses one
    /// tenth of the model's mean absolute problem weight.
    #[serde(default)]
    pub sigma_e_stop: Option<f64>,
    #[serde(default = "default_instances")]
    pub instances_to_average: usize,
    #[serde(default = "default_cap")]
    pub max_dim: usize,
}

fn default_chains() -> usize {
    20
}

fn default_sweeps() -> usize {
    1000
}

fn default_instances() -> usize {
    1
}

fn default_cap() -> usize {
    64
}

impl ScheduleParams {
    pub fn new(alpha_beta: f64, alpha_p: f64, beta0: f64, p0: f64) -> Self {
        Self {
            alpha_beta,
            alpha_p,
            beta0,
            p0,
            probe_chains: default_chains(),
            probe_sweeps: default_sweeps(),
            sigma_e_stop: None,
            instances_to_average: default_instances(),
            max_dim: default_cap(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.alpha_beta, self.alpha_p, self.beta0]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        let stop_ok = self.sigma_e_stop.is_none_or(|s| s.is_finite() && s > 0.0);
        if !positive
            || !(self.p0.is_finite() && self.p0 >= 0.0)
            || !stop_ok
            || self.probe_chains < 2
            || self.probe_sweeps < 2
            || self.instances_to_average == 0
            || self.max_dim == 0
        {
            return Err(Error::InvalidParameter("invalid schedule parameters".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub betas: Vec<f64>,
    pub penalties: Vec<f64>,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        validate_ladder("beta", &self.betas, Some(0.0))?;
        validate_ladder("penalty", &self.penalties, None)
    }
}

/// Fluctuation estimates for one replica position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeStats {
    pub sigma_e: f64,
    pub sigma_g: f64,
    /// Every recorded sample satisfied all copy constraints.
    pub feasible: bool,
}

/// Source of `(sigma_E, sigma_g)` estimates at a grid point.
pub trait Probe {
    fn probe(&mut self, beta: f64, penalty: f64) -> Result<ProbeStats>;
}

/// Independent Gibbs chains from uniformly random starts. The first half of
/// each chain is discarded; `sigma_E` and `sigma_g` are the medians over
/// chains of the within-chain standard deviations of the energy and of the
/// broken-pair count.
pub struct ChainProbe<'a> {
    sm: &'a SparsifiedModel,
    chains: usize,
    sweeps: usize,
    stream: RandomStream,
    calls: u64,
}

impl<'a> ChainProbe<'a> {
    pub fn new(sm: &'a SparsifiedModel, chains: usize, sweeps: usize, stream: RandomStream) -> Self {
        Self {
            sm,
            chains,
            sweeps,
            stream,
            calls: 0,
        }
    }
}

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

impl Probe for ChainProbe<'_> {
    fn probe(&mut self, beta: f64, penalty: f64) -> Result<ProbeStats> {
        let sm = self.sm;
        let call = self.calls;
        self.calls += 1;
        let burn = self.sweeps / 2;
        let per_chain: Vec<(f64, f64, bool)> = (0..self.chains)
            .into_par_iter()
            .map(|c| {
                let mut rs = self.stream.substream(&[call, c as u64]);
                let mut s = SpinState::random(sm.n_phys(), &mut rs).into_vec();
                let mut es = Vec::with_capacity(self.sweeps - burn);
                let mut gs = Vec::with_capacity(self.sweeps - burn);
                for t in 0..self.sweeps {
                    sweep_slice(sm, penalty, beta, &mut s, &mut rs);
                    if t >= burn {
                        let (p, copy) = sm.energy_parts(&s);
                        es.push(p + penalty * copy);
                        gs.push(sm.broken_pairs(&s) as f64);
                    }
                }
                let feasible = gs.iter().all(|&g| g == 0.0);
                (std_dev(&es), std_dev(&gs), feasible)
            })
            .collect();
        let mut sig_e: Vec<f64> = per_chain.iter().map(|x| x.0).collect();
        let mut sig_g: Vec<f64> = per_chain.iter().map(|x| x.1).collect();
        Ok(ProbeStats {
            sigma_e: median(&mut sig_e),
            sigma_g: median(&mut sig_g),
            feasible: per_chain.iter().all(|x| x.2),
        })
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Grows the `(beta, P)` grid column by column. Within a column rows follow
/// `beta(i+1) = beta(i) + alpha_beta / sigma_E` until `sigma_E < stop`. The
/// next column's penalty is `P + median_i alpha_P / (beta_i sigma_g,i)`,
/// where rows with `sigma_g = 0` count as infinite steps. The column after the
/// first one whose samples at the coldest beta of the grid are all feasible
/// is the last.
///
/// The grid is treated as rectangular: a column that froze early has an
/// infinite beta in the rows it lacks. Returned betas are per-row medians
/// over columns, kept while the median is finite.
pub fn adaptive_schedule_with<P: Probe>(
    params: &ScheduleParams,
    sigma_e_stop: f64,
    probe: &mut P,
) -> Result<Schedule> {
    params.validate()?;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut penalties = vec![params.p0];
    let mut coldest = params.beta0;
    loop {
        let penalty = *penalties.last().expect("nonempty");
        let mut betas = vec![params.beta0];
        let mut stats = Vec::new();
        loop {
            let beta = *betas.last().expect("nonempty");
            let st = probe.probe(beta, penalty)?;
            stats.push(st);
            if st.sigma_e < sigma_e_stop {
                break;
            }
            if betas.len() == params.max_dim {
                return Err(Error::NonConvergence {
                    dimension: "beta",
                    cap: params.max_dim,
                });
            }
            betas.push(beta + params.alpha_beta / st.sigma_e);
        }
        let last_beta = *betas.last().expect("nonempty");
        let feasible = if last_beta >= coldest {
            coldest = last_beta;
            stats.last().expect("nonempty").feasible
        } else {
            probe.probe(coldest, penalty)?.feasible
        };
        columns.push(betas.clone());
        let mut steps: Vec<f64> = betas
            .iter()
            .zip(&stats)
            .map(|(b, st)| {
                if st.sigma_g > 0.0 {
                    params.alpha_p / (b * st.sigma_g)
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let step = median(&mut steps);
        if !step.is_finite() {
            // most rows never fluctuate: the constraints are effectively settled
            break;
        }
        if penalties.len() == params.max_dim {
            return Err(Error::NonConvergence {
                dimension: "penalty",
                cap: params.max_dim,
            });
        }
        penalties.push(penalty + step);
        if feasible {
            break;
        }
    }
    Ok(Schedule {
        betas: collapse_columns(&columns),
        penalties,
    })
}

fn collapse_columns(columns: &[Vec<f64>]) -> Vec<f64> {
    let rows = columns.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(rows);
    for i in 0..rows {
        let mut vals: Vec<f64> = columns
            .iter()
            .map(|c| c.get(i).copied().unwrap_or(f64::INFINITY))
            .collect();
        let m = median(&mut vals);
        if !m.is_finite() {
            break;
        }
        out.push(m);
    }
    enforce_increasing(&mut out);
    out
}

fn enforce_increasing(xs: &mut [f64]) {
    for i in 1..xs.len() {
        if xs[i] <= xs[i - 1] {
            xs[i] = xs[i - 1] * (1.0 + 1e-9) + 1e-12;
        }
    }
}

/// Schedule for one instance with the default chain probe.
pub fn adaptive_schedule(
    sm: &SparsifiedModel,
    params: &ScheduleParams,
    stream: &RandomStream,
) -> Result<Schedule> {
    let stop = params.sigma_e_stop.unwrap_or(0.1 * sm.mean_abs_weight());
    let mut probe = ChainProbe::new(sm, params.probe_chains, params.probe_sweeps, stream.clone());
    adaptive_schedule_with(params, stop, &mut probe)
}

/// Elementwise mean of per-instance schedules. Each ladder takes the median
/// length across instances; entries are averaged over the instances that
/// have them.
pub fn average_schedules(schedules: &[Schedule]) -> Result<Schedule> {
    if schedules.is_empty() {
        return Err(Error::InvalidParameter("no schedules to average".into()));
    }
    let avg = |pick: &dyn Fn(&Schedule) -> &Vec<f64>| {
        let mut lens: Vec<f64> = schedules.iter().map(|s| pick(s).len() as f64).collect();
        let len = median(&mut lens).round() as usize;
        let mut out: Vec<f64> = (0..len)
            .map(|i| {
                let vals: Vec<f64> = schedules.iter().filter_map(|s| pick(s).get(i).copied()).collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            })
            .collect();
        enforce_increasing(&mut out);
        out
    };
    Ok(Schedule {
        betas: avg(&|s| &s.betas),
        penalties: avg(&|s| &s.penalties),
    })
}

/// Builds one schedule per instance (instance `k` uses sub-stream `k`) and
/// averages them.
pub fn adaptive_schedule_multi(
    models: &[SparsifiedModel],
    params: &ScheduleParams,
    stream: &RandomStream,
) -> Result<Schedule> {
    let each: Result<Vec<Schedule>> = models
        .par_iter()
        .enumerate()
        .map(|(k, sm)| adaptive_schedule(sm, params, &stream.substream(&[k as u64])))
        .collect();
    average_schedules(&each?)
}

/// `k` values spaced geometrically from `lo` to `hi` inclusive.
pub fn geometric_ladder(lo: f64, hi: f64, k: usize) -> Result<Vec<f64>> {
    if k == 0 || !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "geometric ladder needs 0 < lo <= hi and k >= 1 (got {lo}, {hi}, {k})"
        )));
    }
    if k == 1 {
        return Ok(vec![lo]);
    }
    if hi == lo {
        return Err(Error::InvalidParameter(
            "geometric ladder with several entries needs hi > lo".into(),
        ));
    }
    Ok((0..k)
        .map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64))
        .collect())
}

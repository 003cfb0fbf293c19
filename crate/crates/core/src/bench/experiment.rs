use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Problem, ScheduleSource, Solver, SCHEDULE_SNR_DB};
use super::sk::{gen_sk, ground_state_exhaustive, EXHAUSTIVE_MAX_SPINS};
use crate::error::{Error, Result};
use crate::ising::{sparsify, SparsifiedModel};
use crate::mimo::{ber, gen_instance, ml_bruteforce, mmse_detect, transmit, MimoInstance, ML_MAX_TRANSMITTERS};
use crate::sampler::{derive_seed, RandomStream};
use crate::tempering::{adaptive_schedule_multi, run_1dpt, run_2dpt, PtConfig, RunResult, Schedule, ScheduleParams};

const STREAM_INSTANCE: u64 = 1;
const STREAM_CHANNEL: u64 = 2;
const STREAM_SOLVER: u64 = 3;
const STREAM_SCHEDULE: u64 = 4;

/// Schedule used for one problem size, with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleRecord {
    pub size: usize,
    pub source: String,
    pub betas: Vec<f64>,
    pub penalties: Vec<f64>,
    #[serde(default)]
    pub params: Option<ScheduleParams>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ScheduleRecord {
    pub fn schedule(&self) -> Schedule {
        Schedule {
            betas: self.betas.clone(),
            penalties: self.penalties.clone(),
        }
    }
}

/// One solver run on one SK instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub solver: String,
    /// Copy strength of a 1D run; `None` for 2D grids.
    pub penalty: Option<f64>,
    pub size: usize,
    pub n_phys: usize,
    pub instance: usize,
    pub trial: usize,
    pub run_seed: u64,
    pub e_ground: f64,
    pub budgets: Vec<usize>,
    /// Best dense energy found within each budget.
    pub e_meas: Vec<f64>,
    pub swaps_to_ground: Option<usize>,
    /// Mean copy agreement (percent) of the highest-(beta, P) replica.
    pub top_agreement: f64,
    pub seed: u64,
    pub schedule: String,
    pub hw: String,
    pub oracle: String,
    #[serde(default)]
    pub modeled_step_seconds: Option<f64>,
    #[serde(default)]
    pub modeled_overhead_seconds: Option<f64>,
}

/// Bit errors of one detector on one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelRecord {
    pub solver: String,
    pub penalty: Option<f64>,
    pub n_swaps: Option<usize>,
    pub size: usize,
    /// `None` for a noiseless channel.
    pub snr_db: Option<f64>,
    pub channel: usize,
    pub bits: usize,
    pub errors: usize,
    pub seed: u64,
    pub schedule: String,
    pub hw: String,
}

/// Swap acceptance and copy agreement averaged over the runs of one solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRecord {
    pub solver: String,
    pub penalty: Option<f64>,
    pub size: usize,
    pub betas: Vec<f64>,
    pub penalties: Vec<f64>,
    pub runs: usize,
    pub beta_acceptance: Vec<Vec<Option<f64>>>,
    pub penalty_acceptance: Vec<Vec<Option<f64>>>,
    pub agreement: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub schedules: Vec<ScheduleRecord>,
    #[serde(default)]
    pub runs: Vec<RunRecord>,
    #[serde(default)]
    pub channels: Vec<ChannelRecord>,
    #[serde(default)]
    pub grids: Vec<GridRecord>,
}

/// Runs a validated configuration end to end.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    cfg.validate()?;
    match cfg.problem {
        Problem::Sk => residual_sweep(cfg),
        Problem::Mimo => ber_sweep(cfg),
    }
}

fn schedule_for(cfg: &ExperimentConfig, size: usize) -> Result<ScheduleRecord> {
    let source = cfg.schedule.label();
    if let Some(s) = cfg.schedule.fixed()? {
        return Ok(ScheduleRecord {
            size,
            source,
            betas: s.betas,
            penalties: s.penalties,
            params: None,
            seed: None,
        });
    }
    let ScheduleSource::Adaptive { params } = &cfg.schedule else {
        unreachable!("fixed() covers every other source")
    };
    let stream = RandomStream::standard(cfg.seed).substream(&[STREAM_SCHEDULE, size as u64]);
    let models: Vec<SparsifiedModel> = (0..params.instances_to_average)
        .map(|k| {
            let mut rs = stream.substream(&[0, k as u64]);
            let model = match cfg.problem {
                Problem::Sk => gen_sk(size, &mut rs)?,
                Problem::Mimo => {
                    gen_instance(size, size, SCHEDULE_SNR_DB, &mut rs)?.to_ising_scaled(cfg.mimo_energy_scale)?
                }
            };
            sparsify(&model, cfg.copies)
        })
        .collect::<Result<_>>()?;
    let s = adaptive_schedule_multi(&models, params, &stream.substream(&[1]))?;
    Ok(ScheduleRecord {
        size,
        source,
        betas: s.betas,
        penalties: s.penalties,
        params: Some(params.clone()),
        seed: Some(cfg.seed),
    })
}

/// One solver variant: a 2D grid, or a 1D chain at one copy strength.
#[derive(Debug, Clone, Copy)]
struct Variant {
    solver: Solver,
    index: usize,
    penalty: Option<f64>,
}

fn variants(cfg: &ExperimentConfig, sched: &Schedule) -> Vec<Variant> {
    let mut out = Vec::new();
    for (index, &solver) in cfg.solvers.iter().enumerate() {
        match solver {
            Solver::Pt1d => out.extend(sched.penalties.iter().map(|&p| Variant {
                solver,
                index,
                penalty: Some(p),
            })),
            _ => out.push(Variant {
                solver,
                index,
                penalty: None,
            }),
        }
    }
    out
}

fn pt_run(
    sm: &SparsifiedModel,
    sched: &Schedule,
    v: Variant,
    cfg: &ExperimentConfig,
    n_swaps: usize,
    seed: u64,
    stop: Option<f64>,
) -> Result<RunResult> {
    let pt = PtConfig {
        sweeps_per_swap: cfg.sweeps_per_swap,
        n_swaps,
        best_row_only: cfg.best_row_only,
        seed,
        stop_at_energy: stop,
        hw: cfg.hw.clone(),
    };
    match v.penalty {
        Some(p) => run_1dpt(sm, &sched.betas, p, &pt),
        None => run_2dpt(sm, &sched.betas, &sched.penalties, &pt),
    }
}

fn energy_within(r: &RunResult, budget: usize) -> f64 {
    if budget <= r.trace.len() {
        r.trace[budget - 1]
    } else {
        r.best_energy
    }
}

fn ground_tolerance(e: f64) -> f64 {
    1e-9 * (1.0 + e.abs())
}

fn first_hit(r: &RunResult, e_ground: f64) -> Option<usize> {
    if let Some(h) = r.hit_round {
        return Some(h);
    }
    let thr = e_ground + ground_tolerance(e_ground);
    r.trace.iter().position(|&e| e <= thr).map(|i| i + 1)
}

#[derive(Default)]
struct GridAccumulator {
    runs: usize,
    beta: Vec<Vec<(f64, usize)>>,
    penalty: Vec<Vec<(f64, usize)>>,
    agreement: Vec<Vec<f64>>,
}

impl GridAccumulator {
    fn add(&mut self, r: &RunResult) {
        let add_rates = |acc: &mut Vec<Vec<(f64, usize)>>, m: &[Vec<Option<f64>>]| {
            if acc.is_empty() {
                *acc = m.iter().map(|row| vec![(0.0, 0); row.len()]).collect();
            }
            for (a, row) in acc.iter_mut().zip(m) {
                for (cell, v) in a.iter_mut().zip(row) {
                    if let Some(v) = v {
                        cell.0 += v;
                        cell.1 += 1;
                    }
                }
            }
        };
        add_rates(&mut self.beta, &r.swaps.beta_matrix);
        add_rates(&mut self.penalty, &r.swaps.penalty_matrix);
        if self.agreement.is_empty() {
            self.agreement = r.agreement.iter().map(|row| vec![0.0; row.len()]).collect();
        }
        for (a, row) in self.agreement.iter_mut().zip(&r.agreement) {
            for (cell, v) in a.iter_mut().zip(row) {
                *cell += v;
            }
        }
        self.runs += 1;
    }

    fn finish(self, v: Variant, size: usize, r: &RunResult) -> GridRecord {
        let mean = |m: Vec<Vec<(f64, usize)>>| {
            m.into_iter()
                .map(|row| row.into_iter().map(|(s, n)| (n > 0).then(|| s / n as f64)).collect())
                .collect()
        };
        let runs = self.runs.max(1) as f64;
        GridRecord {
            solver: v.solver.name().into(),
            penalty: v.penalty,
            size,
            betas: r.betas.clone(),
            penalties: r.penalties.clone(),
            runs: self.runs,
            beta_acceptance: mean(self.beta),
            penalty_acceptance: mean(self.penalty),
            agreement: self
                .agreement
                .into_iter()
                .map(|row| row.into_iter().map(|s| s / runs).collect())
                .collect(),
        }
    }
}

/// Residual energy of the configured solvers on SK instances, scored against
/// exhaustive ground states (or, with `proxy_oracle`, the best energy any
/// run found).
pub fn residual_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    cfg.validate()?;
    if cfg.problem != Problem::Sk {
        return Err(Error::Schema("residual sweeps run on SK problems".into()));
    }
    if !cfg.proxy_oracle {
        if let Some(&n) = cfg.sizes.iter().find(|&&n| n > EXHAUSTIVE_MAX_SPINS) {
            return Err(Error::MissingOracle(format!(
                "sk n={n} (exact ground states need n <= {EXHAUSTIVE_MAX_SPINS})"
            )));
        }
    }
    let master = RandomStream::standard(cfg.seed);
    let budget = *cfg.n_swaps.last().expect("validated");
    let oracle = if cfg.proxy_oracle { "proxy" } else { "exact" };
    let timing = cfg.hw.timing.filter(|_| cfg.hw.enabled);

    let mut schedules = Vec::new();
    let mut runs = Vec::new();
    let mut grids = Vec::new();
    for &size in &cfg.sizes {
        let rec = schedule_for(cfg, size)?;
        let sched = rec.schedule();
        schedules.push(rec);

        let instances: Vec<(SparsifiedModel, Option<f64>)> = (0..cfg.instances)
            .into_par_iter()
            .map(|i| {
                let mut rs = master.substream(&[STREAM_INSTANCE, size as u64, i as u64]);
                let model = gen_sk(size, &mut rs)?;
                let ground = if cfg.proxy_oracle {
                    None
                } else {
                    Some(ground_state_exhaustive(&model)?.1)
                };
                Ok((sparsify(&model, cfg.copies)?, ground))
            })
            .collect::<Result<_>>()?;

        let vars = variants(cfg, &sched);
        let jobs: Vec<(usize, usize, usize)> = (0..vars.len())
            .flat_map(|v| (0..cfg.instances).flat_map(move |i| (0..cfg.trials).map(move |t| (v, i, t))))
            .collect();
        let results: Vec<(RunResult, u64)> = jobs
            .par_iter()
            .map(|&(vi, i, t)| {
                let v = vars[vi];
                let (sm, ground) = &instances[i];
                let col = v.penalty.map_or(u64::MAX, |p| {
                    sched.penalties.iter().position(|&q| q == p).expect("ladder value") as u64
                });
                let seed = derive_seed(
                    cfg.seed,
                    &[STREAM_SOLVER, size as u64, i as u64, t as u64, v.index as u64, col],
                );
                let stop = ground.map(|g| g + ground_tolerance(g));
                Ok((pt_run(sm, &sched, v, cfg, budget, seed, stop)?, seed))
            })
            .collect::<Result<_>>()?;

        let mut ground: Vec<f64> = instances.iter().map(|(_, g)| g.unwrap_or(f64::INFINITY)).collect();
        if cfg.proxy_oracle {
            for (&(_, i, _), (r, _)) in jobs.iter().zip(&results) {
                ground[i] = ground[i].min(r.best_energy);
            }
        }

        let mut acc: Vec<GridAccumulator> = (0..vars.len()).map(|_| GridAccumulator::default()).collect();
        for (&(vi, i, t), (r, seed)) in jobs.iter().zip(&results) {
            let v = vars[vi];
            acc[vi].add(r);
            let n_phys = instances[i].0.n_phys();
            runs.push(RunRecord {
                solver: v.solver.name().into(),
                penalty: v.penalty,
                size,
                n_phys,
                instance: i,
                trial: t,
                run_seed: *seed,
                e_ground: ground[i],
                budgets: cfg.n_swaps.clone(),
                e_meas: cfg.n_swaps.iter().map(|&b| energy_within(r, b)).collect(),
                swaps_to_ground: first_hit(r, ground[i]),
                top_agreement: *r.agreement.last().and_then(|row| row.last()).unwrap_or(&f64::NAN),
                seed: cfg.seed,
                schedule: cfg.schedule.label(),
                hw: cfg.hw_label().into(),
                oracle: oracle.into(),
                modeled_step_seconds: timing.map(|tp| crate::hwmodel::step_time(&tp, n_phys as u64)),
                modeled_overhead_seconds: timing.map(|tp| crate::hwmodel::instance_time(&tp, n_phys as u64, 0)),
            });
        }
        let last_of = |vi: usize| {
            jobs.iter()
                .zip(&results)
                .rev()
                .find(|((v, _, _), _)| *v == vi)
                .map(|(_, (r, _))| r)
                .expect("every variant ran")
        };
        for (vi, a) in acc.into_iter().enumerate() {
            grids.push(a.finish(vars[vi], size, last_of(vi)));
        }
    }
    Ok(ExperimentResults {
        config: cfg.clone(),
        schedules,
        runs,
        channels: Vec::new(),
        grids,
    })
}

/// Detection with one solver; returns the decided symbols' error count.
fn detect_errors(
    inst: &MimoInstance,
    v: Variant,
    sched: &Schedule,
    cfg: &ExperimentConfig,
    n_swaps: usize,
    seed: u64,
) -> Result<usize> {
    let x = match v.solver {
        Solver::Ml => ml_bruteforce(inst)?.0,
        Solver::Mmse => mmse_detect(inst, inst.sigma2)?,
        Solver::Pt1d | Solver::Pt2d => {
            let sm = sparsify(&inst.to_ising_scaled(cfg.mimo_energy_scale)?, cfg.copies)?;
            pt_run(&sm, sched, v, cfg, n_swaps, seed, None)?.best_state
        }
    };
    Ok((ber(&x, &inst.x_true)? * inst.n_t as f64).round() as usize)
}

/// Bit error rates of the configured detectors over random channels.
pub fn ber_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    cfg.validate()?;
    if cfg.problem != Problem::Mimo {
        return Err(Error::Schema("BER sweeps run on MIMO problems".into()));
    }
    if cfg.solvers.contains(&Solver::Ml) {
        if let Some(&n) = cfg.sizes.iter().find(|&&n| n > ML_MAX_TRANSMITTERS) {
            return Err(Error::SizeGuard {
                n,
                limit: ML_MAX_TRANSMITTERS,
            });
        }
    }
    let master = RandomStream::standard(cfg.seed);
    let mut schedules = Vec::new();
    let mut channels = Vec::new();
    for &size in &cfg.sizes {
        let rec = schedule_for(cfg, size)?;
        let sched = rec.schedule();
        schedules.push(rec);
        let vars = variants(cfg, &sched);
        // (variant, budget) pairs; non-PT detectors ignore the budget
        let mut detectors: Vec<(Variant, Option<usize>)> = Vec::new();
        for &v in &vars {
            match v.solver {
                Solver::Pt1d | Solver::Pt2d => detectors.extend(cfg.n_swaps.iter().map(|&b| (v, Some(b)))),
                _ => detectors.push((v, None)),
            }
        }
        let jobs: Vec<(usize, usize)> = (0..cfg.snr_db.len())
            .flat_map(|k| (0..cfg.instances).map(move |c| (k, c)))
            .collect();
        let per_job: Vec<Vec<ChannelRecord>> = jobs
            .par_iter()
            .map(|&(k, c)| {
                let snr = cfg.snr_db[k];
                let key = [STREAM_CHANNEL, size as u64, snr.to_bits(), c as u64];
                let mut rs = master.substream(&key);
                let first = gen_instance(size, size, snr, &mut rs)?;
                let mut symbols = vec![first];
                for _ in 1..cfg.symbols_per_channel {
                    let h = symbols[0].h.clone();
                    symbols.push(transmit(h, size, size, snr, &mut rs)?);
                }
                detectors
                    .iter()
                    .enumerate()
                    .map(|(d, &(v, n_swaps))| {
                        let mut errors = 0;
                        for (s, inst) in symbols.iter().enumerate() {
                            let seed = derive_seed(
                                cfg.seed,
                                &[STREAM_SOLVER, size as u64, snr.to_bits(), c as u64, s as u64, d as u64],
                            );
                            errors += detect_errors(inst, v, &sched, cfg, n_swaps.unwrap_or(0), seed)?;
                        }
                        Ok(ChannelRecord {
                            solver: v.solver.name().into(),
                            penalty: v.penalty,
                            n_swaps,
                            size,
                            snr_db: snr.is_finite().then_some(snr),
                            channel: c,
                            bits: size * cfg.symbols_per_channel,
                            errors,
                            seed: cfg.seed,
                            schedule: cfg.schedule.label(),
                            hw: cfg.hw_label().into(),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        channels.extend(per_job.into_iter().flatten());
    }
    Ok(ExperimentResults {
        config: cfg.clone(),
        schedules,
        runs: Vec::new(),
        channels,
        grids: Vec::new(),
    })
}

/// Groups records by a key while keeping the key order deterministic.
pub(crate) fn group_by<'a, T, K: Ord>(items: &'a [T], key: impl Fn(&T) -> K) -> BTreeMap<K, Vec<&'a T>> {
    let mut map: BTreeMap<K, Vec<&T>> = BTreeMap::new();
    for it in items {
        map.entry(key(it)).or_default().push(it);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::Preset;

    fn sk_cfg() -> ExperimentConfig {
        serde_json::from_str(
            r#"{
            "problem": "sk", "sizes": [8], "instances": 3, "trials": 2,
            "solvers": ["pt1d", "pt2d"],
            "schedule": {"source": "explicit", "betas": [0.5, 1.0, 2.0, 4.0], "penalties": [0.5, 1.5]},
            "sweeps_per_swap": 2, "n_swaps": [5, 50], "seed": 11
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn residuals_are_nonnegative_and_monotone_in_budget() {
        let res = residual_sweep(&sk_cfg()).unwrap();
        // 2 pt1d columns + 1 pt2d, 3 instances, 2 trials
        assert_eq!(res.runs.len(), 3 * 3 * 2);
        for r in &res.runs {
            assert!(r.e_meas.iter().all(|&e| e >= r.e_ground - 1e-9));
            assert!(r.e_meas[1] <= r.e_meas[0]);
            if let Some(h) = r.swaps_to_ground {
                assert!(h <= 50);
                assert!((r.e_meas[1] - r.e_ground).abs() < 1e-9);
            }
        }
        assert_eq!(res.grids.len(), 3);
        assert_eq!(res.grids[2].agreement.len(), 4);
        assert_eq!(res.grids[2].agreement[0].len(), 2);
    }

    #[test]
    fn deterministic() {
        let a = serde_json::to_string(&residual_sweep(&sk_cfg()).unwrap()).unwrap();
        let b = serde_json::to_string(&residual_sweep(&sk_cfg()).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn proxy_oracle_scores_against_best_found() {
        let mut cfg = sk_cfg();
        cfg.proxy_oracle = true;
        let res = residual_sweep(&cfg).unwrap();
        for i in 0..3 {
            let best = res
                .runs
                .iter()
                .filter(|r| r.instance == i)
                .map(|r| *r.e_meas.last().unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!(res.runs.iter().filter(|r| r.instance == i).all(|r| r.e_ground == best));
        }
        assert!(res.runs.iter().all(|r| r.oracle == "proxy"));
    }

    #[test]
    fn missing_oracle_guard() {
        let mut cfg = sk_cfg();
        cfg.sizes = vec![30];
        assert!(matches!(residual_sweep(&cfg), Err(Error::MissingOracle(_))));
    }

    #[test]
    fn noiseless_channels_are_decoded() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{
            "problem": "mimo", "sizes": [6], "instances": 5, "snr_db": [null],
            "symbols_per_channel": 2, "solvers": ["ml", "pt1d"],
            "schedule": {"source": "geometric", "beta_min": 0.5, "beta_max": 20.0, "count": 8, "penalties": [2.0]},
            "sweeps_per_swap": 2, "n_swaps": [1000], "seed": 4
        }"#,
        )
        .unwrap();
        let res = ber_sweep(&cfg).unwrap();
        assert_eq!(res.channels.len(), 2 * 5);
        assert!(res.channels.iter().all(|c| c.errors == 0 && c.snr_db.is_none()));
    }

    #[test]
    fn ml_never_loses_to_mmse() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{
            "problem": "mimo", "sizes": [6], "instances": 30, "snr_db": [4.0],
            "symbols_per_channel": 3, "solvers": ["ml", "mmse"],
            "schedule": {"source": "preset", "name": "mimo128"},
            "sweeps_per_swap": 1, "n_swaps": [1], "seed": 4
        }"#,
        )
        .unwrap();
        let res = ber_sweep(&cfg).unwrap();
        let total = |s: &str| res.channels.iter().filter(|c| c.solver == s).map(|c| c.errors).sum::<usize>();
        assert!(total("ml") <= total("mmse"));
        assert_eq!(res.schedules[0].betas, Preset::Mimo128.schedule().betas);
    }

    #[test]
    fn ml_size_guard() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{
            "problem": "mimo", "sizes": [32], "instances": 1, "snr_db": [4.0],
            "solvers": ["ml"], "schedule": {"source": "preset", "name": "mimo128"},
            "sweeps_per_swap": 1, "n_swaps": [1], "seed": 4
        }"#,
        )
        .unwrap();
        assert!(matches!(ber_sweep(&cfg), Err(Error::SizeGuard { .. })));
    }
}

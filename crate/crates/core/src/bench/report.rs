use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{group_by, ExperimentResults, GridRecord};
use super::stats::{bootstrap, bootstrap_ratio, mean, median, Estimate, BOOTSTRAP_RESAMPLES, CI_LEVEL};
use crate::error::Result;
use crate::ising::io::write_json;
use crate::sampler::{derive_seed, RandomStream};

/// Residual energy `rho = (E_meas - E_ground) / N` aggregated over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub solver: String,
    pub penalty: Option<f64>,
    pub size: usize,
    pub n_swaps: usize,
    pub runs: usize,
    pub rho: Estimate,
    pub median_rho: f64,
    /// Fraction of runs at the reference energy within the budget.
    pub success_rate: f64,
    /// `None` when fewer than half of the runs reached it.
    pub median_swaps_to_ground: Option<f64>,
    pub mean_top_agreement: f64,
    pub modeled_seconds: Option<f64>,
    pub seed: u64,
    pub schedule: String,
    pub hw: String,
    pub oracle: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub solver: String,
    pub penalty: Option<f64>,
    pub n_swaps: Option<usize>,
    pub size: usize,
    pub snr_db: Option<f64>,
    pub channels: usize,
    pub bits: usize,
    pub errors: usize,
    pub ber: Estimate,
    pub seed: u64,
    pub schedule: String,
    pub hw: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub solver: String,
    pub penalty: Option<f64>,
    pub size: usize,
    /// `beta`, `penalty` or `agreement`.
    pub quantity: String,
    pub row: usize,
    pub col: usize,
    pub value: Option<f64>,
    pub runs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub residual: Vec<ResidualRecord>,
    pub ber: Vec<BerRecord>,
    pub grids: Vec<GridCell>,
}

fn penalty_key(p: Option<f64>) -> u64 {
    p.map_or(u64::MAX, f64::to_bits)
}

fn name_key(s: &str) -> u64 {
    s.bytes().fold(0u64, |h, b| h.wrapping_mul(131).wrapping_add(b as u64))
}

/// Aggregates result sets into plot-ready tables. Order and values depend only
/// on the records, so identical inputs give identical reports.
pub fn report(results: &[ExperimentResults]) -> Report {
    let runs: Vec<_> = results.iter().flat_map(|r| r.runs.iter().cloned()).collect();
    let channels: Vec<_> = results.iter().flat_map(|r| r.channels.iter().cloned()).collect();
    let grids: Vec<_> = results.iter().flat_map(|r| r.grids.iter().cloned()).collect();

    let mut residual = Vec::new();
    let expanded: Vec<(usize, usize)> = runs
        .iter()
        .enumerate()
        .flat_map(|(k, r)| (0..r.budgets.len()).map(move |b| (k, b)))
        .collect();
    let groups = group_by(&expanded, |&(k, b)| {
        let r = &runs[k];
        (r.size, r.solver.clone(), penalty_key(r.penalty), r.budgets[b])
    });
    for ((size, solver, pkey, n_swaps), members) in groups {
        let recs: Vec<_> = members.iter().map(|&&(k, b)| (&runs[k], b)).collect();
        let first = recs[0].0;
        let rho: Vec<f64> = recs
            .iter()
            .map(|(r, b)| ((r.e_meas[*b] - r.e_ground) / r.size as f64).max(0.0))
            .collect();
        let hits: Vec<f64> = recs
            .iter()
            .map(|(r, _)| match r.swaps_to_ground {
                Some(h) if h <= n_swaps => h as f64,
                _ => f64::INFINITY,
            })
            .collect();
        let seed = recs.iter().map(|(r, _)| r.seed).min().expect("nonempty group");
        let mut rs = RandomStream::standard(derive_seed(
            seed,
            &[size as u64, n_swaps as u64, pkey, name_key(&solver)],
        ));
        let med_hit = median(&hits);
        residual.push(ResidualRecord {
            penalty: first.penalty,
            size,
            n_swaps,
            runs: recs.len(),
            rho: bootstrap(&rho, mean, BOOTSTRAP_RESAMPLES, CI_LEVEL, &mut rs),
            median_rho: median(&rho),
            success_rate: hits.iter().filter(|h| h.is_finite()).count() as f64 / hits.len() as f64,
            median_swaps_to_ground: med_hit.is_finite().then_some(med_hit),
            mean_top_agreement: mean(&recs.iter().map(|(r, _)| r.top_agreement).collect::<Vec<_>>()),
            modeled_seconds: first
                .modeled_step_seconds
                .zip(first.modeled_overhead_seconds)
                .map(|(step, over)| over + step * n_swaps as f64),
            seed,
            schedule: first.schedule.clone(),
            hw: first.hw.clone(),
            oracle: first.oracle.clone(),
            solver,
        });
    }

    let mut ber = Vec::new();
    let groups = group_by(&channels, |c| {
        (
            c.size,
            c.snr_db.map_or(u64::MAX, |s| (s + 1e6).to_bits()),
            c.solver.clone(),
            penalty_key(c.penalty),
            c.n_swaps,
        )
    });
    for ((size, skey, solver, pkey, n_swaps), members) in groups {
        let first = members[0];
        let pairs: Vec<(f64, f64)> = members.iter().map(|c| (c.errors as f64, c.bits as f64)).collect();
        let seed = members.iter().map(|c| c.seed).min().expect("nonempty group");
        let mut rs = RandomStream::standard(derive_seed(
            seed,
            &[size as u64, skey, pkey, n_swaps.map_or(0, |b| b as u64), name_key(&solver)],
        ));
        ber.push(BerRecord {
            penalty: first.penalty,
            n_swaps,
            size,
            snr_db: first.snr_db,
            channels: members.len(),
            bits: members.iter().map(|c| c.bits).sum(),
            errors: members.iter().map(|c| c.errors).sum(),
            ber: bootstrap_ratio(&pairs, BOOTSTRAP_RESAMPLES, CI_LEVEL, &mut rs),
            seed,
            schedule: first.schedule.clone(),
            hw: first.hw.clone(),
            solver,
        });
    }

    let mut cells = Vec::new();
    let groups = group_by(&grids, |g| (g.size, g.solver.clone(), penalty_key(g.penalty)));
    for (_, members) in groups {
        cells.extend(merge_grids(&members));
    }
    Report {
        residual,
        ber,
        grids: cells,
    }
}

fn merge_grids(members: &[&GridRecord]) -> Vec<GridCell> {
    let first = members[0];
    let runs: usize = members.iter().map(|g| g.runs).sum();
    let weighted = |pick: &dyn Fn(&GridRecord, usize, usize) -> Option<f64>, r: usize, c: usize| {
        let (s, w) = members.iter().fold((0.0, 0usize), |(s, w), g| match pick(g, r, c) {
            Some(v) => (s + v * g.runs as f64, w + g.runs),
            None => (s, w),
        });
        (w > 0).then(|| s / w as f64)
    };
    let mut out = Vec::new();
    let mut emit = |quantity: &str, shape: Vec<usize>, pick: &dyn Fn(&GridRecord, usize, usize) -> Option<f64>| {
        for (r, &len) in shape.iter().enumerate() {
            for c in 0..len {
                out.push(GridCell {
                    solver: first.solver.clone(),
                    penalty: first.penalty,
                    size: first.size,
                    quantity: quantity.into(),
                    row: r,
                    col: c,
                    value: weighted(pick, r, c),
                    runs,
                });
            }
        }
    };
    let shape = |m: &[Vec<Option<f64>>]| m.iter().map(Vec::len).collect::<Vec<_>>();
    emit("beta", shape(&first.beta_acceptance), &|g, r, c| {
        g.beta_acceptance.get(r).and_then(|row| row.get(c)).copied().flatten()
    });
    emit("penalty", shape(&first.penalty_acceptance), &|g, r, c| {
        g.penalty_acceptance.get(r).and_then(|row| row.get(c)).copied().flatten()
    });
    emit("agreement", first.agreement.iter().map(Vec::len).collect(), &|g, r, c| {
        g.agreement.get(r).and_then(|row| row.get(c)).copied()
    });
    out
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

impl Report {
    pub fn residual_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "solver", "penalty", "size", "n_swaps", "runs", "rho_mean", "rho_ci_low", "rho_ci_high", "rho_median",
            "success_rate", "median_swaps_to_ground", "mean_top_agreement", "modeled_seconds", "seed", "schedule",
            "hw", "oracle",
        ])?;
        for r in &self.residual {
            w.write_record([
                r.solver.clone(),
                opt(r.penalty),
                r.size.to_string(),
                r.n_swaps.to_string(),
                r.runs.to_string(),
                num(r.rho.value),
                num(r.rho.ci_low),
                num(r.rho.ci_high),
                num(r.median_rho),
                num(r.success_rate),
                opt(r.median_swaps_to_ground),
                num(r.mean_top_agreement),
                opt(r.modeled_seconds),
                r.seed.to_string(),
                r.schedule.clone(),
                r.hw.clone(),
                r.oracle.clone(),
            ])?;
        }
        finish(w)
    }

    pub fn ber_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "solver", "penalty", "n_swaps", "size", "snr_db", "channels", "bits", "errors", "ber", "ber_ci_low",
            "ber_ci_high", "seed", "schedule", "hw", "oracle",
        ])?;
        for r in &self.ber {
            w.write_record([
                r.solver.clone(),
                opt(r.penalty),
                r.n_swaps.map(|b| b.to_string()).unwrap_or_default(),
                r.size.to_string(),
                r.snr_db.map(num).unwrap_or_else(|| "inf".into()),
                r.channels.to_string(),
                r.bits.to_string(),
                r.errors.to_string(),
                num(r.ber.value),
                num(r.ber.ci_low),
                num(r.ber.ci_high),
                r.seed.to_string(),
                r.schedule.clone(),
                r.hw.clone(),
                "none".into(),
            ])?;
        }
        finish(w)
    }

    pub fn grid_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["solver", "penalty", "size", "quantity", "row", "col", "value", "runs"])?;
        for c in &self.grids {
            w.write_record([
                c.solver.clone(),
                opt(c.penalty),
                c.size.to_string(),
                c.quantity.clone(),
                c.row.to_string(),
                c.col.to_string(),
                opt(c.value),
                c.runs.to_string(),
            ])?;
        }
        finish(w)
    }

    /// Writes `residual.csv`, `ber.csv`, `grid.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("residual.csv"), self.residual_csv()?)?;
        std::fs::write(dir.join("ber.csv"), self.ber_csv()?)?;
        std::fs::write(dir.join("grid.csv"), self.grid_csv()?)?;
        write_json(&dir.join("report.json"), self)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

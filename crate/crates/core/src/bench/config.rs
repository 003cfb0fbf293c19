use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hwmodel::HwProfile;
use crate::mimo::MIMO_ENERGY_SCALE;
use crate::tempering::{geometric_ladder, Schedule, ScheduleParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Sk,
    Mimo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Pt1d,
    Pt2d,
    Mmse,
    Ml,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Pt1d => "pt1d",
            Solver::Pt2d => "pt2d",
            Solver::Mmse => "mmse",
            Solver::Ml => "ml",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Sk64,
    Mimo128,
}

const SK64_BETAS: [f64; 10] = [0.5, 0.801, 1.13, 1.52, 2.05, 2.92, 4.62, 8.60, 24.6, 138.0];
const SK64_PENALTIES: [f64; 10] = [0.5, 0.572, 0.649, 0.740, 0.846, 0.970, 1.12, 1.33, 1.59, 2.05];
const MIMO128_BETAS: [f64; 16] = [
    0.5, 0.564, 0.647, 0.743, 0.859, 1.00, 1.18, 1.40, 1.71, 2.16, 2.88, 4.24, 7.46, 18.0, 72.0, 332.0,
];
const MIMO128_PENALTIES: [f64; 13] = [0.8, 0.97, 1.15, 1.33, 1.54, 1.76, 2.02, 2.32, 2.69, 3.21, 3.96, 4.85, 9.44];

impl Preset {
    pub fn schedule(self) -> Schedule {
        let (b, p): (&[f64], &[f64]) = match self {
            Preset::Sk64 => (&SK64_BETAS, &SK64_PENALTIES),
            Preset::Mimo128 => (&MIMO128_BETAS, &MIMO128_PENALTIES),
        };
        Schedule {
            betas: b.to_vec(),
            penalties: p.to_vec(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Sk64 => "sk64",
            Preset::Mimo128 => "mimo128",
        }
    }
}

/// Where the beta/penalty ladders come from. `pt1d` runs one chain per
/// penalty in the ladder; `pt2d` runs the full grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSource {
    Explicit {
        betas: Vec<f64>,
        penalties: Vec<f64>,
    },
    Preset {
        name: Preset,
    },
    Geometric {
        beta_min: f64,
        beta_max: f64,
        count: usize,
        penalties: Vec<f64>,
    },
    /// Built once per problem size from `params.instances_to_average` fresh
    /// instances (MIMO ones at [`SCHEDULE_SNR_DB`]).
    Adaptive {
        params: ScheduleParams,
    },
}

/// SNR of the instances used to build adaptive MIMO schedules.
pub const SCHEDULE_SNR_DB: f64 = 10.0;

impl ScheduleSource {
    pub fn label(&self) -> String {
        match self {
            ScheduleSource::Explicit { .. } => "explicit".into(),
            ScheduleSource::Preset { name } => format!("preset:{}", name.name()),
            ScheduleSource::Geometric { .. } => "geometric".into(),
            ScheduleSource::Adaptive { .. } => "adaptive".into(),
        }
    }

    /// The schedule for sources that do not need problem instances.
    pub fn fixed(&self) -> Result<Option<Schedule>> {
        let s = match self {
            ScheduleSource::Explicit { betas, penalties } => Schedule {
                betas: betas.clone(),
                penalties: penalties.clone(),
            },
            ScheduleSource::Preset { name } => name.schedule(),
            ScheduleSource::Geometric {
                beta_min,
                beta_max,
                count,
                penalties,
            } => Schedule {
                betas: geometric_ladder(*beta_min, *beta_max, *count)?,
                penalties: penalties.clone(),
            },
            ScheduleSource::Adaptive { params } => {
                params.validate()?;
                return Ok(None);
            }
        };
        s.validate()?;
        Ok(Some(s))
    }
}

pub(crate) mod snr_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let xs: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        xs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let xs = Vec::<Option<f64>>::deserialize(d)?;
        Ok(xs.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

fn default_copies() -> usize {
    2
}

fn default_one() -> usize {
    1
}

fn default_scale() -> f64 {
    MIMO_ENERGY_SCALE
}

/// One experiment: SK configs produce residual-energy tables, MIMO configs
/// bit-error-rate tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    /// Spin counts (SK) or square antenna counts `N_t = N_r` (MIMO).
    pub sizes: Vec<usize>,
    #[serde(default = "default_copies")]
    pub copies: usize,
    /// SK instances or MIMO channels per size (and per SNR).
    pub instances: usize,
    /// Independent solver runs per SK instance.
    #[serde(default = "default_one")]
    pub trials: usize,
    /// `null` stands for a noiseless channel.
    #[serde(default, with = "snr_list")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_one")]
    pub symbols_per_channel: usize,
    pub solvers: Vec<Solver>,
    pub schedule: ScheduleSource,
    pub sweeps_per_swap: usize,
    pub n_swaps: Vec<usize>,
    #[serde(default)]
    pub hw: HwProfile,
    pub seed: u64,
    /// Score SK runs against the best energy found by any run when exact
    /// ground states are out of reach.
    #[serde(default)]
    pub proxy_oracle: bool,
    #[serde(default = "default_scale")]
    pub mimo_energy_scale: f64,
    #[serde(default)]
    pub best_row_only: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Schema(m));
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n < 2) {
            return fail("sizes must be a nonempty list of values >= 2".into());
        }
        if self.copies == 0 {
            return fail("copies must be positive".into());
        }
        if self.instances == 0 || self.trials == 0 || self.symbols_per_channel == 0 {
            return fail("instances, trials and symbols_per_channel must be positive".into());
        }
        if self.solvers.is_empty() {
            return fail("at least one solver is required".into());
        }
        if self.sweeps_per_swap == 0 {
            return fail("sweeps_per_swap must be positive".into());
        }
        if self.n_swaps.is_empty() || self.n_swaps.contains(&0) {
            return fail("n_swaps must be a nonempty list of positive budgets".into());
        }
        if self.n_swaps.windows(2).any(|w| w[1] <= w[0]) {
            return fail("n_swaps must be strictly increasing".into());
        }
        match self.problem {
            Problem::Sk => {
                if let Some(s) = self.solvers.iter().find(|s| matches!(s, Solver::Mmse | Solver::Ml)) {
                    return fail(format!("solver {} applies to MIMO problems only", s.name()));
                }
                if !self.snr_db.is_empty() {
                    return fail("snr_db applies to MIMO problems only".into());
                }
            }
            Problem::Mimo => {
                if self.snr_db.is_empty() {
                    return fail("MIMO experiments need at least one snr_db value".into());
                }
                if self.snr_db.iter().any(|s| s.is_nan()) {
                    return fail("snr_db values must be numbers".into());
                }
                if !(self.mimo_energy_scale > 0.0 && self.mimo_energy_scale.is_finite()) {
                    return fail("mimo_energy_scale must be positive".into());
                }
            }
        }
        self.schedule.fixed()?;
        Ok(())
    }

    pub fn hw_label(&self) -> &'static str {
        if self.hw.enabled {
            "hw"
        } else {
            "float"
        }
    }
}

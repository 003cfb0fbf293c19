use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pbit_core::bench::{self, gen_sk, ExperimentConfig, Preset, ScheduleRecord};
use pbit_core::hwmodel::HwProfile;
use pbit_core::ising::io::{read_json, write_json, InstanceFile};
use pbit_core::ising::{sparsify, DenseIsingModel, SparsifiedModel};
use pbit_core::mimo::{self, MimoInstance, MIMO_ENERGY_SCALE};
use pbit_core::tempering::{adaptive_schedule_multi, geometric_ladder, run_1dpt, run_2dpt, PtConfig, ScheduleParams};
use pbit_core::{Error, RandomStream, Result};

#[derive(Parser)]
#[command(name = "pbit", version, about = "p-bit Ising solver and experiment harness")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem instance.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Build or export a beta/penalty schedule.
    Schedule(ScheduleArgs),
    /// Run an experiment configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detect the symbols of one MIMO instance.
    Detect(DetectArgs),
    /// Aggregate result files into report tables.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum GenKind {
    /// Sherrington-Kirkpatrick spin glass.
    Sk {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Real-valued BPSK MIMO channel use.
    Mimo {
        #[arg(long)]
        n_t: usize,
        #[arg(long)]
        n_r: usize,
        /// SNR in dB; omit for a noiseless channel.
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Sk64,
    Mimo128,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, value_enum, conflicts_with_all = ["geometric", "instance"])]
    preset: Option<PresetArg>,
    /// `LO HI K`: K betas spaced geometrically from LO to HI.
    #[arg(long, num_args = 3, value_names = ["LO", "HI", "K"], conflicts_with = "instance")]
    geometric: Option<Vec<f64>>,
    /// Penalties for a geometric ladder.
    #[arg(long, num_args = 1.., default_values_t = [1.0])]
    penalties: Vec<f64>,
    /// Instance files (Ising or MIMO) for the adaptive schedule.
    #[arg(long, num_args = 1..)]
    instance: Vec<PathBuf>,
    #[arg(long, default_value_t = 2.5)]
    alpha_beta: f64,
    #[arg(long, default_value_t = 0.4)]
    alpha_p: f64,
    #[arg(long, default_value_t = 0.5)]
    beta0: f64,
    #[arg(long, default_value_t = 0.5)]
    p0: f64,
    #[arg(long, default_value_t = 2)]
    copies: usize,
    #[arg(long, default_value_t = MIMO_ENERGY_SCALE)]
    mimo_energy_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Detector {
    Ml,
    Mmse,
    Pt1d,
    Pt2d,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    detector: Detector,
    /// Schedule file; defaults to the mimo128 preset.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Copy strength for pt1d (default: last penalty of the schedule).
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    swaps: usize,
    #[arg(long, default_value_t = 1)]
    sweeps_per_swap: usize,
    #[arg(long, default_value_t = 2)]
    copies: usize,
    #[arg(long, default_value_t = MIMO_ENERGY_SCALE)]
    mimo_energy_scale: f64,
    /// Hardware profile (JSON).
    #[arg(long)]
    hw: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct Detection {
    detector: &'static str,
    x_hat: Vec<i8>,
    objective: f64,
    bit_errors: usize,
    ber: f64,
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            let text = serde_json::to_string_pretty(value)?;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn load_model(path: &Path, scale: f64) -> Result<DenseIsingModel> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(f) = serde_json::from_str::<InstanceFile>(&text) {
        return f.to_model();
    }
    match serde_json::from_str::<MimoInstance>(&text) {
        Ok(inst) => inst.to_ising_scaled(scale),
        Err(e) => Err(Error::Schema(format!(
            "{}: neither an Ising nor a MIMO instance ({e})",
            path.display()
        ))),
    }
}

fn cmd_gen(kind: GenKind) -> Result<()> {
    match kind {
        GenKind::Sk { n, seed, out } => {
            let model = gen_sk(n, &mut RandomStream::standard(seed))?;
            let mut prov = BTreeMap::new();
            prov.insert("generator".into(), "sk".into());
            prov.insert("seed".into(), seed.into());
            prov.insert("coupling_variance".into(), format!("1/{n}").into());
            emit(&InstanceFile::from_model(&model, prov), out.as_deref())
        }
        GenKind::Mimo {
            n_t,
            n_r,
            snr,
            seed,
            out,
        } => {
            let inst = mimo::gen_instance(n_t, n_r, snr.unwrap_or(f64::INFINITY), &mut RandomStream::standard(seed))?;
            emit(&inst, out.as_deref())
        }
    }
}

fn cmd_schedule(a: ScheduleArgs) -> Result<()> {
    let rec = if let Some(p) = a.preset {
        let preset = match p {
            PresetArg::Sk64 => Preset::Sk64,
            PresetArg::Mimo128 => Preset::Mimo128,
        };
        let s = preset.schedule();
        ScheduleRecord {
            size: 0,
            source: format!("preset:{}", preset.name()),
            betas: s.betas,
            penalties: s.penalties,
            params: None,
            seed: None,
        }
    } else if let Some(g) = a.geometric {
        if g[2].fract() != 0.0 || g[2] < 1.0 {
            return Err(Error::InvalidParameter("K must be a positive integer".into()));
        }
        let rec = ScheduleRecord {
            size: 0,
            source: "geometric".into(),
            betas: geometric_ladder(g[0], g[1], g[2] as usize)?,
            penalties: a.penalties,
            params: None,
            seed: None,
        };
        rec.schedule().validate()?;
        rec
    } else {
        if a.instance.is_empty() {
            return Err(Error::InvalidParameter(
                "give --preset, --geometric or at least one --instance".into(),
            ));
        }
        let models: Vec<SparsifiedModel> = a
            .instance
            .iter()
            .map(|p| sparsify(&load_model(p, a.mimo_energy_scale)?, a.copies))
            .collect::<Result<_>>()?;
        let mut params = ScheduleParams::new(a.alpha_beta, a.alpha_p, a.beta0, a.p0);
        params.instances_to_average = models.len();
        let s = adaptive_schedule_multi(&models, &params, &RandomStream::standard(a.seed))?;
        ScheduleRecord {
            size: models[0].n_logical(),
            source: "adaptive".into(),
            betas: s.betas,
            penalties: s.penalties,
            params: Some(params),
            seed: Some(a.seed),
        }
    };
    emit(&rec, a.out.as_deref())
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg: ExperimentConfig = read_json(config)?;
    let dir = out
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::Schema("no output directory (use --out or set `output`)".into()))?;
    let start = Instant::now();
    bench::run_to_dir(&cfg, &dir)?;
    eprintln!("wrote {} in {:.2?}", dir.display(), start.elapsed());
    Ok(())
}

fn cmd_detect(a: DetectArgs) -> Result<()> {
    let inst: MimoInstance = read_json(&a.instance)?;
    let x = match a.detector {
        Detector::Ml => mimo::ml_bruteforce(&inst)?.0,
        Detector::Mmse => mimo::mmse_detect(&inst, inst.sigma2)?,
        Detector::Pt1d | Detector::Pt2d => {
            let sched = match &a.schedule {
                Some(p) => read_json::<ScheduleRecord>(p)?.schedule(),
                None => Preset::Mimo128.schedule(),
            };
            sched.validate()?;
            let sm = sparsify(&inst.to_ising_scaled(a.mimo_energy_scale)?, a.copies)?;
            let mut cfg = PtConfig::new(a.sweeps_per_swap, a.swaps, a.seed);
            if let Some(p) = &a.hw {
                cfg.hw = read_json::<HwProfile>(p)?;
            }
            cfg.validate()?;
            let r = if a.detector == Detector::Pt1d {
                let p = a.penalty.unwrap_or(*sched.penalties.last().expect("validated ladder"));
                run_1dpt(&sm, &sched.betas, p, &cfg)?
            } else {
                run_2dpt(&sm, &sched.betas, &sched.penalties, &cfg)?
            };
            r.best_state
        }
    };
    let ber = mimo::ber(&x, &inst.x_true)?;
    let det = Detection {
        detector: match a.detector {
            Detector::Ml => "ml",
            Detector::Mmse => "mmse",
            Detector::Pt1d => "pt1d",
            Detector::Pt2d => "pt2d",
        },
        objective: inst.objective(&x)?,
        bit_errors: (ber * inst.n_t as f64).round() as usize,
        ber,
        x_hat: x.into_vec(),
    };
    emit(&det, None)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SizeGuard { .. } | Error::MissingOracle(_) => 3,
        Error::NonConvergence { .. } | Error::Singular | Error::Overflow { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match cli.command {
        Command::Gen { kind } => cmd_gen(kind),
        Command::Schedule(a) => cmd_schedule(a),
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Detect(a) => cmd_detect(a),
        Command::Report { inputs, out } => {
            let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
            bench::report_files(&refs, &out).map(|_| ())
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

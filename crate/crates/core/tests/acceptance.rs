//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//! `cargo test --test acceptance -- 7` runs a single criterion.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use pbit_core::bench::{
    gen_sk, ground_state_exhaustive, report, run_experiment, run_to_dir, ExperimentConfig, Preset, Report,
};
use pbit_core::hwmodel::{approx_exp, instance_time, step_cycles, timing_scan, HwProfile, TimingParams};
use pbit_core::ising::{constraint_report, sparse_energy_eval, sparsify, DenseIsingModel, SparsifiedModel, SpinState};
use pbit_core::mimo::{gen_instance, ml_bruteforce, MIMO_ENERGY_SCALE};
use pbit_core::sampler::chromatic_sweep;
use pbit_core::tempering::{
    adaptive_schedule_multi, beta_swap_delta, beta_swap_delta_premultiplied, p_swap_delta, Schedule, ScheduleParams,
};
use pbit_core::RandomStream;
use serde_json::json;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

const SEED: u64 = 2024;

/// Copy strengths scanned for the 1D sensitivity study.
const SCAN_PENALTIES: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
const SK_SWEEPS_PER_SWAP: usize = 1;
/// 1D copy strength for hw-mode and MIMO runs.
const PT1D_PENALTY: f64 = 1.0;
const MIMO_PT1D_PENALTY: f64 = 2.0;

fn config(v: serde_json::Value) -> ExperimentConfig {
    serde_json::from_value(v).expect("valid config")
}

fn random_model(n: usize, rs: &mut RandomStream) -> DenseIsingModel {
    let edges: Vec<_> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, rs.normal()))
        .collect();
    let h = (0..n).map(|_| rs.normal()).collect();
    DenseIsingModel::from_edges(n, &edges, h).unwrap()
}

fn ml_ising_equivalence() -> Outcome {
    let mut rs = RandomStream::standard(SEED);
    let snrs = [0.0, 5.0, 10.0, 20.0, f64::INFINITY];
    let (mut mismatches, mut ties) = (0, 0);
    for k in 0..500 {
        let n = 2 + k % 7;
        let inst = gen_instance(n, n, snrs[k % snrs.len()], &mut rs).unwrap();
        let (x_ml, obj_ml) = ml_bruteforce(&inst).unwrap();
        let (x_is, _) = ground_state_exhaustive(&inst.to_ising().unwrap()).unwrap();
        if x_ml != x_is {
            let obj_is = inst.objective(&x_is).unwrap();
            if (obj_is - obj_ml).abs() <= 1e-9 * (1.0 + obj_ml.abs()) {
                ties += 1;
            } else {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("500 instances, {mismatches} mismatches, {ties} exact ties"))
}

fn agreement_manifold() -> Outcome {
    let mut rs = RandomStream::standard(SEED + 1);
    let (mut checked, mut worst) = (0usize, 0.0f64);
    for n in 1..=5 {
        for _ in 0..4 {
            let m = random_model(n, &mut rs);
            let sm = sparsify(&m, 2).unwrap();
            let n_copy = sm.copy_edges().len() as f64;
            for bits in 0..1u64 << sm.n_phys() {
                let s = SpinState::from_bits(sm.n_phys(), bits);
                if !constraint_report(&sm, &s).unwrap().is_feasible() {
                    continue;
                }
                let logical: Vec<i8> = (0..n).map(|i| s.get(sm.physical_index(i, 0))).collect();
                let dense = m.energy(&SpinState::new(logical).unwrap()).unwrap();
                for p in [0.0, 0.7, 3.0] {
                    let (e, _) = sparse_energy_eval(&sm, p, &s).unwrap();
                    worst = worst.max((e + p * n_copy - dense).abs());
                    checked += 1;
                }
            }
        }
    }
    outcome(worst <= 1e-9, format!("{checked} agreeing states, max |diff| {worst:.2e}"))
}

fn boltzmann_fidelity() -> Outcome {
    let m = DenseIsingModel::from_edges(3, &[(0, 1, 0.6), (1, 2, -0.9), (0, 2, 0.4)], vec![0.3, -0.2, 0.5]).unwrap();
    let sm = sparsify(&m, 1).unwrap();
    let beta = 1.0;
    let w: Vec<f64> = (0..8u64)
        .map(|b| (-beta * m.energy(&SpinState::from_bits(3, b)).unwrap()).exp())
        .collect();
    let z: f64 = w.iter().sum();

    let mut rs = RandomStream::standard(SEED + 2);
    let mut s = SpinState::random(3, &mut rs);
    let mut hist = [0u64; 8];
    let sweeps = 1_000_000;
    for _ in 0..sweeps {
        chromatic_sweep(&sm, 0.0, beta, &mut s, &mut rs);
        let idx: usize = (0..3).filter(|&i| s.get(i) > 0).map(|i| 1 << i).sum();
        hist[idx] += 1;
    }
    let tv = (0..8).map(|k| (hist[k] as f64 / sweeps as f64 - w[k] / z).abs()).sum::<f64>() / 2.0;
    outcome(tv <= 0.01, format!("TV {tv:.5} after {sweeps} sweeps (limit 0.01)"))
}

fn swap_identities() -> Outcome {
    let mut rs = RandomStream::standard(SEED + 3);
    let mut worst_beta = 0.0f64;
    for _ in 0..10_000 {
        let (ba, bb) = (0.05 + 10.0 * rs.unit(), 0.05 + 10.0 * rs.unit());
        let (ea, eb) = (50.0 * rs.normal(), 50.0 * rs.normal());
        let d = beta_swap_delta(ba, bb, ea, eb);
        let e = beta_swap_delta_premultiplied(ba, bb, ba * ea, bb * eb);
        worst_beta = worst_beta.max((d - e).abs() / (1.0 + d.abs()));
    }
    let mut worst_p = 0.0f64;
    for k in 0..10_000 {
        if k % 100 == 0 {
            rs = rs.substream(&[k as u64]);
        }
        let n = 2 + k % 6;
        let sm = sparsify(&random_model(n, &mut rs), 2).unwrap();
        let (sa, sb) = (SpinState::random(sm.n_phys(), &mut rs), SpinState::random(sm.n_phys(), &mut rs));
        let beta = 0.1 + 5.0 * rs.unit();
        let (pa, pb) = (3.0 * rs.unit(), 3.0 * rs.unit());
        let h = |p: f64, s: &SpinState| sparse_energy_eval(&sm, p, s).unwrap().0;
        let copy = |s: &SpinState| h(1.0, s) - h(0.0, s);
        let generic = beta * (h(pa, &sa) + h(pb, &sb) - h(pa, &sb) - h(pb, &sa));
        let d = p_swap_delta(beta, pa, pb, copy(&sa), copy(&sb));
        worst_p = worst_p.max((d - generic).abs() / (1.0 + generic.abs()));
    }
    outcome(
        worst_beta <= 1e-9 && worst_p <= 1e-9,
        format!("10^4 tuples each, max rel diff beta {worst_beta:.2e}, P {worst_p:.2e}"),
    )
}

fn exp_approximation() -> Outcome {
    let exact = approx_exp(0.0) == 1.0 && approx_exp(-1.0) == 0.390625 && approx_exp(1.0) == 2.875;
    let steps = 800_000;
    let (mut worst, mut at) = (0.0f64, 0.0);
    for k in 0..=steps {
        let x = -8.0 * k as f64 / steps as f64;
        let err = (approx_exp(x) / x.exp() - 1.0).abs();
        if err > worst {
            worst = err;
            at = x;
        }
    }
    outcome(
        exact && worst <= 0.09,
        format!(
            "point values {}, max rel error {:.2}% at x={at} (limit 9%)",
            if exact { "exact" } else { "WRONG" },
            100.0 * worst
        ),
    )
}

fn timing_model() -> Outcome {
    let tp = TimingParams::default();
    let cycles = step_cycles(&tp, 128);
    let t0 = instance_time(&tp, 128, 0);
    let scan = timing_scan(
        &tp,
        128,
        1000,
        &[2, 3, 4, 5, 6, 7, 8],
        &[1, 2, 4, 8, 16],
        &[50_000_000, 75_000_000, 100_000_000, 125_000_000, 150_000_000, 200_000_000],
        4.7e-3,
    );
    let contains = scan.min_seconds <= 4.7e-3 && 4.7e-3 <= scan.max_seconds;
    outcome(
        cycles == 523 && (t0 - 280e-9).abs() < 1e-18 && contains,
        format!(
            "C_step {cycles}, zero-step {:.0} ns, scan [{:.2}, {:.2}] ms (closest {:.3} ms)",
            t0 * 1e9,
            scan.min_seconds * 1e3,
            scan.max_seconds * 1e3,
            scan.closest.3 * 1e3
        ),
    )
}

fn sk16(solver: &str, penalties: &[f64], n_swaps: &[usize], instances: usize, trials: usize) -> ExperimentConfig {
    config(json!({
        "problem": "sk", "sizes": [16], "instances": instances, "trials": trials,
        "solvers": [solver],
        "schedule": {"source": "explicit", "betas": Preset::Sk64.schedule().betas, "penalties": penalties},
        "sweeps_per_swap": SK_SWEEPS_PER_SWAP, "n_swaps": n_swaps, "seed": SEED
    }))
}

struct SkStudy {
    one_d: Report,
    two_d: Report,
}

fn sk_study() -> SkStudy {
    let one_d = run_experiment(&sk16("pt1d", &SCAN_PENALTIES, &[200, 1000], 100, 20)).unwrap();
    let two_d = run_experiment(&sk16("pt2d", &Preset::Sk64.schedule().penalties, &[1000], 100, 20)).unwrap();
    SkStudy {
        one_d: report(&[one_d]),
        two_d: report(&[two_d]),
    }
}

fn scan_at(rep: &Report, budget: usize) -> Vec<&pbit_core::bench::ResidualRecord> {
    SCAN_PENALTIES
        .iter()
        .map(|&p| {
            rep.residual
                .iter()
                .find(|r| r.n_swaps == budget && r.penalty == Some(p))
                .expect("scan record")
        })
        .collect()
}

fn best_penalty_index(study: &SkStudy) -> usize {
    let recs = scan_at(&study.one_d, 200);
    (0..recs.len())
        .min_by(|&a, &b| recs[a].rho.value.total_cmp(&recs[b].rho.value))
        .unwrap()
}

fn p_sensitivity(study: &SkStudy) -> Outcome {
    let recs = scan_at(&study.one_d, 200);
    let k = best_penalty_index(study);
    let last = recs.len() - 1;
    let interior = k != 0 && k != last;
    let separated = recs[k].rho.separated_from(&recs[0].rho) && recs[k].rho.separated_from(&recs[last].rho);
    let table: Vec<String> = recs
        .iter()
        .map(|r| format!("P={}: {:.5} [{:.5}, {:.5}]", r.penalty.unwrap(), r.rho.value, r.rho.ci_low, r.rho.ci_high))
        .collect();
    outcome(interior && separated, format!("rho at 200 swaps: {}", table.join("; ")))
}

fn two_d_speedup(study: &SkStudy) -> Outcome {
    let best = SCAN_PENALTIES[best_penalty_index(study)];
    let one = scan_at(&study.one_d, 1000)[best_penalty_index(study)];
    let two = &study.two_d.residual[0];
    let (m1, m2) = (one.median_swaps_to_ground, two.median_swaps_to_ground);
    let ratio_ok = matches!((m1, m2), (Some(a), Some(b)) if b <= a / 5.0);
    outcome(
        ratio_ok && two.success_rate >= 0.95,
        format!(
            "median swaps-to-ground 2D {m2:?} vs 1D(P={best}) {m1:?}; 2D success {:.1}% of {} runs",
            100.0 * two.success_rate,
            two.runs
        ),
    )
}

fn copy_agreement(study: &SkStudy) -> Outcome {
    let a = study.two_d.residual[0].mean_top_agreement;
    outcome(a >= 99.0, format!("top replica mean agreement {a:.3}% (limit 99%)"))
}

fn within(ours: &[f64], table: &[f64], tol: f64) -> (bool, f64) {
    let worst = ours
        .iter()
        .zip(table)
        .map(|(a, b)| (a / b - 1.0).abs())
        .fold(0.0, f64::max);
    (ours.len() == table.len() && worst <= tol, worst)
}

fn schedule_row(models: &[SparsifiedModel], params: ScheduleParams, table: &Schedule) -> (bool, String) {
    let s = adaptive_schedule_multi(models, &params, &RandomStream::standard(SEED)).unwrap();
    let (ok_b, wb) = within(&s.betas, &table.betas, 0.25);
    let (ok_p, wp) = within(&s.penalties, &table.penalties, 0.25);
    (
        ok_b && ok_p,
        format!(
            "{} beta (worst {:.0}%), {} P (worst {:.0}%)",
            s.betas.len(),
            100.0 * wb,
            s.penalties.len(),
            100.0 * wp
        ),
    )
}

fn adaptive_schedules() -> Outcome {
    let mut rs = RandomStream::standard(SEED + 9);
    let sk: Vec<SparsifiedModel> = (0..10)
        .map(|_| sparsify(&gen_sk(64, &mut rs).unwrap(), 2).unwrap())
        .collect();
    let mut params = ScheduleParams::new(2.5, 0.4, 0.5, 0.5);
    params.instances_to_average = sk.len();
    let (ok_sk, sk_text) = schedule_row(&sk, params, &Preset::Sk64.schedule());

    let mimo: Vec<SparsifiedModel> = (0..3)
        .map(|_| {
            let inst = gen_instance(128, 128, pbit_core::bench::SCHEDULE_SNR_DB, &mut rs).unwrap();
            sparsify(&inst.to_ising_scaled(MIMO_ENERGY_SCALE).unwrap(), 2).unwrap()
        })
        .collect();
    let mut params = ScheduleParams::new(1.25, 0.75, 0.5, 0.8);
    params.instances_to_average = mimo.len();
    let (ok_mimo, mimo_text) = schedule_row(&mimo, params, &Preset::Mimo128.schedule());
    outcome(ok_sk && ok_mimo, format!("SK: {sk_text}; MIMO: {mimo_text}"))
}

fn mimo_config(size: usize, snrs: &[f64], channels: usize, solvers: &[&str]) -> ExperimentConfig {
    config(json!({
        "problem": "mimo", "sizes": [size], "instances": channels, "snr_db": snrs,
        "symbols_per_channel": 10, "solvers": solvers,
        "schedule": {"source": "explicit", "betas": Preset::Mimo128.schedule().betas, "penalties": [MIMO_PT1D_PENALTY]},
        "sweeps_per_swap": 1, "n_swaps": [2000], "seed": SEED
    }))
}

fn ber_ordering() -> Outcome {
    let small = report(&[run_experiment(&mimo_config(8, &[6.0, 10.0, 14.0], 200, &["ml", "pt1d", "mmse"])).unwrap()]);
    let large = report(&[run_experiment(&mimo_config(64, &[10.0], 50, &["pt1d", "mmse"])).unwrap()]);
    let find = |rep: &Report, solver: &str, size: usize, snr: f64| {
        rep.ber
            .iter()
            .find(|r| r.solver == solver && r.size == size && r.snr_db == Some(snr))
            .expect("ber record")
            .ber
    };
    let mut pass = true;
    let mut lines = Vec::new();
    for snr in [6.0, 10.0, 14.0] {
        let (ml, pt, mmse) = (find(&small, "ml", 8, snr), find(&small, "pt1d", 8, snr), find(&small, "mmse", 8, snr));
        let ordered = ml.value <= pt.value && pt.value <= mmse.value;
        let sep = snr < 8.0 || pt.separated_from(&mmse);
        pass &= ordered && sep;
        lines.push(format!(
            "8x8 {snr} dB ML {:.4} PT {:.4} [{:.4}, {:.4}] MMSE {:.4} [{:.4}, {:.4}]",
            ml.value, pt.value, pt.ci_low, pt.ci_high, mmse.value, mmse.ci_low, mmse.ci_high
        ));
    }
    let (pt, mmse) = (find(&large, "pt1d", 64, 10.0), find(&large, "mmse", 64, 10.0));
    pass &= pt.value < mmse.value && pt.separated_from(&mmse);
    lines.push(format!(
        "64x64 10 dB PT {:.4} [{:.4}, {:.4}] MMSE {:.4} [{:.4}, {:.4}]",
        pt.value, pt.ci_low, pt.ci_high, mmse.value, mmse.ci_low, mmse.ci_high
    ));
    outcome(pass, lines.join("; "))
}

fn hw_robustness() -> Outcome {
    let mut cfg = sk16("pt1d", &[PT1D_PENALTY], &[1000], 100, 1);
    cfg.hw = HwProfile::fpga();
    let rep = report(&[run_experiment(&cfg).unwrap()]);
    let r = &rep.residual[0];
    let hits = (r.success_rate * r.runs as f64).round() as usize;
    outcome(hits >= 90, format!("{hits}/{} hw-mode trials reached the ground state (limit 90)", r.runs))
}

fn files_equal(a: &Path, b: &Path) -> bool {
    ["results.json", "residual.csv", "ber.csv", "grid.csv", "report.json"]
        .iter()
        .all(|f| std::fs::read(a.join(f)).ok() == std::fs::read(b.join(f)).ok())
}

fn determinism() -> Outcome {
    let sk = config(json!({
        "problem": "sk", "sizes": [10, 12], "instances": 4, "trials": 3, "solvers": ["pt1d", "pt2d"],
        "schedule": {"source": "preset", "name": "sk64"},
        "sweeps_per_swap": 2, "n_swaps": [20, 80], "seed": SEED
    }));
    let mimo = config(json!({
        "problem": "mimo", "sizes": [8], "instances": 6, "snr_db": [5.0, null], "symbols_per_channel": 2,
        "solvers": ["ml", "mmse", "pt1d", "pt2d"],
        "schedule": {"source": "geometric", "beta_min": 0.5, "beta_max": 20.0, "count": 8, "penalties": [1.0, 2.0]},
        "sweeps_per_swap": 1, "n_swaps": [50, 200], "seed": SEED
    }));
    let dir = tempfile::tempdir().unwrap();
    let mut same = true;
    for (name, cfg) in [("sk", &sk), ("mimo", &mimo)] {
        let mut outs = Vec::new();
        for (k, threads) in [1, 4, 4].into_iter().enumerate() {
            let out = dir.path().join(format!("{name}-{k}"));
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_to_dir(cfg, &out)).unwrap();
            outs.push(out);
        }
        same &= outs.windows(2).all(|w| files_equal(&w[0], &w[1]));
    }
    outcome(same, "SK and MIMO reruns with 1 and 4 workers: identical result files".to_owned())
}

fn main() -> ExitCode {
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |k: usize| filter.is_empty() || filter.contains(&k);
    let needs_study = [7, 8, 11].iter().any(|&k| wanted(k));
    let study = needs_study.then(sk_study);

    let names = [
        "ML/Ising equivalence",
        "agreement manifold",
        "Boltzmann fidelity",
        "swap identities",
        "exp approximation",
        "timing model",
        "P sensitivity",
        "2D-PT speedup",
        "adaptive schedule",
        "BER ordering",
        "copy agreement",
        "hw robustness",
        "determinism",
    ];
    let mut failed = 0;
    for (k, name) in names.iter().enumerate().map(|(i, n)| (i + 1, n)) {
        if !wanted(k) {
            continue;
        }
        let start = Instant::now();
        let o = match k {
            1 => ml_ising_equivalence(),
            2 => agreement_manifold(),
            3 => boltzmann_fidelity(),
            4 => swap_identities(),
            5 => exp_approximation(),
            6 => timing_model(),
            7 => p_sensitivity(study.as_ref().unwrap()),
            8 => two_d_speedup(study.as_ref().unwrap()),
            9 => adaptive_schedules(),
            10 => ber_ordering(),
            11 => copy_agreement(study.as_ref().unwrap()),
            12 => hw_robustness(),
            _ => determinism(),
        };
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {k:>2} {name}: {} ({:.1?})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

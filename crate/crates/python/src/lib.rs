use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pbit_core::bench::{self, ExperimentConfig, ExperimentResults, Preset};
use pbit_core::hwmodel::{self, HwProfile, TimingParams};
use pbit_core::ising::{sparsify, DenseIsingModel, SparsifiedModel, SpinState};
use pbit_core::mimo::{self, MimoInstance, MIMO_ENERGY_SCALE};
use pbit_core::tempering::{adaptive_schedule_multi, run_2dpt, PtConfig, ScheduleParams};
use pbit_core::{Error, RandomStream};

create_exception!(pbit, PbitError, PyValueError);

fn err(e: Error) -> PyErr {
    PbitError::new_err(e.to_string())
}

fn spins(v: Vec<i8>) -> PyResult<SpinState> {
    SpinState::new(v).map_err(err)
}

/// Dense Ising model with energy `-sum h s - sum_{i<j} J s s`.
#[pyclass(name = "IsingModel", module = "pbit", frozen)]
struct PyIsingModel {
    inner: DenseIsingModel,
}

#[pymethods]
impl PyIsingModel {
    #[new]
    fn new(couplings: Vec<Vec<f64>>, biases: Vec<f64>) -> PyResult<Self> {
        let n = biases.len();
        if couplings.iter().any(|row| row.len() != n) || couplings.len() != n {
            return Err(PbitError::new_err("couplings must be an n x n matrix"));
        }
        let inner = DenseIsingModel::new(n, couplings.concat(), biases).map_err(err)?;
        Ok(Self { inner })
    }

    /// Sherrington-Kirkpatrick instance with couplings of variance `1/n`.
    #[staticmethod]
    #[pyo3(signature = (n, seed = 0))]
    fn sk(n: usize, seed: u64) -> PyResult<Self> {
        let inner = bench::gen_sk(n, &mut RandomStream::standard(seed)).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn biases(&self) -> Vec<f64> {
        self.inner.biases().to_vec()
    }

    #[getter]
    fn couplings(&self) -> Vec<Vec<f64>> {
        (0..self.inner.n()).map(|i| self.inner.row(i).to_vec()).collect()
    }

    fn energy(&self, s: Vec<i8>) -> PyResult<f64> {
        self.inner.energy(&spins(s)?).map_err(err)
    }

    /// Exhaustive ground state `(spins, energy)`; limited to 24 spins.
    fn ground_state(&self, py: Python<'_>) -> PyResult<(Vec<i8>, f64)> {
        let (s, e) = py.detach(|| bench::ground_state_exhaustive(&self.inner)).map_err(err)?;
        Ok((s.into_vec(), e))
    }

    fn __repr__(&self) -> String {
        format!("IsingModel(n={})", self.inner.n())
    }
}

/// One real-valued BPSK MIMO channel use `y = Hx + w`.
#[pyclass(name = "MimoInstance", module = "pbit", frozen)]
struct PyMimoInstance {
    inner: MimoInstance,
}

#[pymethods]
impl PyMimoInstance {
    /// Draws a channel; `snr_db=None` gives a noiseless instance.
    #[staticmethod]
    #[pyo3(signature = (n_t, n_r, snr_db = None, seed = 0))]
    fn generate(n_t: usize, n_r: usize, snr_db: Option<f64>, seed: u64) -> PyResult<Self> {
        let snr = snr_db.unwrap_or(f64::INFINITY);
        let inner = mimo::gen_instance(n_t, n_r, snr, &mut RandomStream::standard(seed)).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| err(e.into()))?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| err(e.into()))
    }

    #[getter]
    fn n_t(&self) -> usize {
        self.inner.n_t
    }

    #[getter]
    fn n_r(&self) -> usize {
        self.inner.n_r
    }

    #[getter]
    fn h(&self) -> Vec<Vec<f64>> {
        self.inner.h.chunks(self.inner.n_t).map(<[f64]>::to_vec).collect()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y.clone()
    }

    #[getter]
    fn x_true(&self) -> Vec<i8> {
        self.inner.x_true.as_slice().to_vec()
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2
    }

    #[getter]
    fn snr_db(&self) -> Option<f64> {
        self.inner.snr_db.is_finite().then_some(self.inner.snr_db)
    }

    /// `||y - Hx||^2`.
    fn objective(&self, x: Vec<i8>) -> PyResult<f64> {
        self.inner.objective(&spins(x)?).map_err(err)
    }

    /// Ising model of the detection problem, normalized and scaled by `scale`.
    /// `scale=None` returns the raw mapping.
    #[pyo3(signature = (scale = Some(MIMO_ENERGY_SCALE)))]
    fn to_ising(&self, scale: Option<f64>) -> PyResult<PyIsingModel> {
        let inner = match scale {
            Some(s) => self.inner.to_ising_scaled(s),
            None => self.inner.to_ising(),
        }
        .map_err(err)?;
        Ok(PyIsingModel { inner })
    }

    fn ml(&self, py: Python<'_>) -> PyResult<(Vec<i8>, f64)> {
        let (x, obj) = py.detach(|| mimo::ml_bruteforce(&self.inner)).map_err(err)?;
        Ok((x.into_vec(), obj))
    }

    /// Sliced MMSE estimate; `lam` defaults to the noise variance.
    #[pyo3(signature = (lam = None))]
    fn mmse(&self, lam: Option<f64>) -> PyResult<Vec<i8>> {
        let x = mimo::mmse_detect(&self.inner, lam.unwrap_or(self.inner.sigma2)).map_err(err)?;
        Ok(x.into_vec())
    }

    fn ber(&self, x_hat: Vec<i8>) -> PyResult<f64> {
        mimo::ber(&spins(x_hat)?, &self.inner.x_true).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "MimoInstance(n_t={}, n_r={}, snr_db={:?})",
            self.inner.n_t,
            self.inner.n_r,
            self.snr_db()
        )
    }
}

/// Parallel tempering on the sparsified model. One penalty gives 1D-PT,
/// several give a `len(betas) x len(penalties)` 2D-PT grid.
#[pyfunction]
#[pyo3(signature = (model, betas, penalties, n_swaps, sweeps_per_swap = 1, seed = 0, copies = 2, hw = false, stop_at_energy = None))]
#[allow(clippy::too_many_arguments)]
fn run_pt<'py>(
    py: Python<'py>,
    model: &PyIsingModel,
    betas: Vec<f64>,
    penalties: Vec<f64>,
    n_swaps: usize,
    sweeps_per_swap: usize,
    seed: u64,
    copies: usize,
    hw: bool,
    stop_at_energy: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = PtConfig::new(sweeps_per_swap, n_swaps, seed);
    cfg.stop_at_energy = stop_at_energy;
    if hw {
        cfg.hw = HwProfile::fpga();
    }
    let r = py
        .detach(|| {
            cfg.validate()?;
            let sm = sparsify(&model.inner, copies)?;
            run_2dpt(&sm, &betas, &penalties, &cfg)
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("best_energy", r.best_energy)?;
    d.set_item("best_state", r.best_state.into_vec())?;
    d.set_item("best_round", r.best_round)?;
    d.set_item("hit_round", r.hit_round)?;
    d.set_item("trace", r.trace)?;
    d.set_item("agreement", r.agreement)?;
    d.set_item("beta_acceptance", r.swaps.beta_matrix)?;
    d.set_item("penalty_acceptance", r.swaps.penalty_matrix)?;
    d.set_item("modeled_seconds", r.timing.map(|t| t.instance_seconds))?;
    Ok(d)
}

/// Adaptive `(betas, penalties)` averaged over `models`.
#[pyfunction]
#[pyo3(signature = (models, alpha_beta, alpha_p, beta0 = 0.5, p0 = 0.5, copies = 2, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn adaptive_schedule(
    py: Python<'_>,
    models: Vec<PyRef<'_, PyIsingModel>>,
    alpha_beta: f64,
    alpha_p: f64,
    beta0: f64,
    p0: f64,
    copies: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let dense: Vec<DenseIsingModel> = models.iter().map(|m| m.inner.clone()).collect();
    let s = py
        .detach(|| {
            let sms: Vec<SparsifiedModel> = dense.iter().map(|m| sparsify(m, copies)).collect::<Result<_, _>>()?;
            let mut params = ScheduleParams::new(alpha_beta, alpha_p, beta0, p0);
            params.instances_to_average = sms.len().max(1);
            params.validate()?;
            adaptive_schedule_multi(&sms, &params, &RandomStream::standard(seed))
        })
        .map_err(err)?;
    Ok((s.betas, s.penalties))
}

/// Reference ladders: `"sk64"` or `"mimo128"`.
#[pyfunction]
fn preset_schedule(name: &str) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let p = match name {
        "sk64" => Preset::Sk64,
        "mimo128" => Preset::Mimo128,
        _ => return Err(PbitError::new_err(format!("unknown preset {name:?}"))),
    };
    let s = p.schedule();
    Ok((s.betas, s.penalties))
}

#[pyfunction]
fn approx_exp(x: f64) -> f64 {
    hwmodel::approx_exp(x)
}

/// Modeled end-to-end seconds per instance with the default timing profile.
#[pyfunction]
fn instance_time(n_phys: u64, n_steps: u64) -> f64 {
    hwmodel::instance_time(&TimingParams::default(), n_phys, n_steps)
}

/// Runs an experiment config (JSON text) and returns the results as JSON.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str) -> PyResult<String> {
    py.detach(|| {
        let cfg: ExperimentConfig = serde_json::from_str(config)?;
        let res = bench::run_experiment(&cfg)?;
        Ok(serde_json::to_string(&res)?)
    })
    .map_err(err)
}

/// Aggregates result JSON documents into a report (JSON).
#[pyfunction]
fn report(results: Vec<String>) -> PyResult<String> {
    let parsed: Vec<ExperimentResults> = results
        .iter()
        .map(|t| serde_json::from_str(t))
        .collect::<Result<_, _>>()
        .map_err(|e| err(e.into()))?;
    serde_json::to_string(&bench::report(&parsed)).map_err(|e| err(e.into()))
}

#[pymodule]
fn pbit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIsingModel>()?;
    m.add_class::<PyMimoInstance>()?;
    m.add_function(wrap_pyfunction!(run_pt, m)?)?;
    m.add_function(wrap_pyfunction!(adaptive_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(preset_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(approx_exp, m)?)?;
    m.add_function(wrap_pyfunction!(instance_time, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add("PbitError", m.py().get_type::<PbitError>())?;
    Ok(())
}

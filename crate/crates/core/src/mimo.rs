//! Real-valued MIMO detection: Rayleigh channels with BPSK symbols, the MMSE
//! linear baseline, exhaustive ML at small sizes, and bit error rates.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_len, Error, Result};
use crate::ising::{map_mimo_to_ising, DenseIsingModel, SpinState, WeightScale};
use crate::sampler::RandomStream;

/// Largest transmitter count accepted by [`ml_bruteforce`].
pub const ML_MAX_TRANSMITTERS: usize = 24;

/// Default factor applied after per-spin normalization in [`MimoInstance::to_ising_scaled`].
pub const MIMO_ENERGY_SCALE: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MimoInstance {
    pub n_r: usize,
    pub n_t: usize,
    /// Channel matrix, row-major `n_r x n_t`.
    pub h: Vec<f64>,
    pub x_true: SpinState,
    pub y: Vec<f64>,
    pub sigma2: f64,
    /// Nominal SNR in dB; infinite for noiseless instances (stored as `null`).
    #[serde(serialize_with = "ser_snr", deserialize_with = "de_snr")]
    pub snr_db: f64,
}

fn ser_snr<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_some(v)
    } else {
        s.serialize_none()
    }
}

fn de_snr<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl MimoInstance {
    pub fn new(n_r: usize, n_t: usize, h: Vec<f64>, x_true: SpinState, y: Vec<f64>, sigma2: f64, snr_db: f64) -> Result<Self> {
        if n_r == 0 || n_t == 0 {
            return Err(Error::InvalidParameter("MIMO dimensions must be positive".into()));
        }
        check_len("channel matrix", n_r * n_t, h.len())?;
        check_len("transmitted symbols", n_t, x_true.len())?;
        check_len("received vector", n_r, y.len())?;
        if !(sigma2 >= 0.0) {
            return Err(Error::InvalidParameter("noise variance must be nonnegative".into()));
        }
        Ok(Self {
            n_r,
            n_t,
            h,
            x_true,
            y,
            sigma2,
            snr_db,
        })
    }

    #[inline]
    pub fn h_at(&self, r: usize, t: usize) -> f64 {
        self.h[r * self.n_t + t]
    }

    /// `||y - H x||^2`.
    pub fn objective(&self, x: &SpinState) -> Result<f64> {
        check_len("candidate symbols", self.n_t, x.len())?;
        Ok((0..self.n_r)
            .map(|r| {
                let hx: f64 = (0..self.n_t).map(|t| self.h_at(r, t) * x.get(t) as f64).sum();
                (self.y[r] - hx).powi(2)
            })
            .sum())
    }

    pub fn to_ising(&self) -> Result<DenseIsingModel> {
        map_mimo_to_ising(&self.h, self.n_r, self.n_t, &self.y)
    }

    /// Ising model with couplings of variance `1/n`, then multiplied by `scale`.
    /// This is the form the samplers and schedules operate on.
    pub fn to_ising_scaled(&self, scale: f64) -> Result<DenseIsingModel> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("energy scale must be positive, got {scale}")));
        }
        let (model, _) = self.to_ising()?.normalized(WeightScale::PerSpin);
        Ok(model.scaled(scale))
    }
}

/// Noise variance per receive dimension for a nominal SNR: `N_t * 10^(-snr/10)`.
pub fn noise_variance(n_t: usize, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        n_t as f64 * 10f64.powf(-snr_db / 10.0)
    }
}

/// Draws `H` (row-major), then `x`, then the noise, all from `stream`.
pub fn gen_instance(n_t: usize, n_r: usize, snr_db: f64, stream: &mut RandomStream) -> Result<MimoInstance> {
    if n_t == 0 || n_r == 0 {
        return Err(Error::InvalidParameter("MIMO dimensions must be positive".into()));
    }
    let h: Vec<f64> = (0..n_r * n_t).map(|_| stream.normal()).collect();
    transmit(h, n_r, n_t, snr_db, stream)
}

/// Sends a fresh BPSK vector through the fixed channel `h` (row-major `n_r x n_t`).
pub fn transmit(h: Vec<f64>, n_r: usize, n_t: usize, snr_db: f64, stream: &mut RandomStream) -> Result<MimoInstance> {
    if n_t == 0 || n_r == 0 {
        return Err(Error::InvalidParameter("MIMO dimensions must be positive".into()));
    }
    check_len("channel matrix", n_r * n_t, h.len())?;
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(format!("invalid SNR {snr_db}")));
    }
    let x = SpinState::random(n_t, stream);
    let sigma2 = noise_variance(n_t, snr_db);
    let sd = sigma2.sqrt();
    let y = (0..n_r)
        .map(|r| {
            let hx: f64 = (0..n_t).map(|t| h[r * n_t + t] * x.get(t) as f64).sum();
            hx + sd * stream.normal()
        })
        .collect();
    MimoInstance::new(n_r, n_t, h, x, y, sigma2, snr_db)
}

/// Solves `A z = b` for symmetric positive-definite `A` (row-major `n x n`)
/// by Cholesky factorization.
pub fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    check_len("matrix", n * n, a.len())?;
    check_len("right-hand side", n, b.len())?;
    let mut l = vec![0.0; n * n];
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 1e-13 * scale {
                    return Err(Error::Singular);
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut z = b.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    Ok(z)
}

/// Pre-sign MMSE estimate `(H^T H + lambda I)^{-1} H^T y`.
pub fn mmse_solution(inst: &MimoInstance, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter("lambda must be nonnegative".into()));
    }
    let (n_r, n_t) = (inst.n_r, inst.n_t);
    let mut gram = vec![0.0; n_t * n_t];
    for i in 0..n_t {
        for j in i..n_t {
            let v: f64 = (0..n_r).map(|r| inst.h_at(r, i) * inst.h_at(r, j)).sum();
            gram[i * n_t + j] = v;
            gram[j * n_t + i] = v;
        }
        gram[i * n_t + i] += lambda;
    }
    let rhs: Vec<f64> = (0..n_t)
        .map(|t| (0..n_r).map(|r| inst.h_at(r, t) * inst.y[r]).sum())
        .collect();
    solve_spd(&gram, &rhs, n_t)
}

/// Elementwise sign of the MMSE estimate, zero mapped to `+1`.
pub fn mmse_detect(inst: &MimoInstance, lambda: f64) -> Result<SpinState> {
    let z = mmse_solution(inst, lambda)?;
    Ok(SpinState::new(z.iter().map(|&v| if v < 0.0 { -1 } else { 1 }).collect()).expect("signs"))
}

/// Orders candidates with `-1 < +1`, first coordinate most significant.
fn lex_less(a: &[i8], b: &[i8]) -> bool {
    a < b
}

/// Exhaustive minimizer of `||y - H x||^2`, visiting candidates in Gray-code
/// order with incremental residual updates. Exact ties go to the
/// lexicographically smallest vector.
pub fn ml_bruteforce(inst: &MimoInstance) -> Result<(SpinState, f64)> {
    let (n_r, n_t) = (inst.n_r, inst.n_t);
    if n_t > ML_MAX_TRANSMITTERS {
        return Err(Error::SizeGuard {
            n: n_t,
            limit: ML_MAX_TRANSMITTERS,
        });
    }
    let mut x = vec![-1i8; n_t];
    let mut resid: Vec<f64> = (0..n_r)
        .map(|r| inst.y[r] + (0..n_t).map(|t| inst.h_at(r, t)).sum::<f64>())
        .collect();
    let norm = |res: &[f64]| res.iter().map(|v| v * v).sum::<f64>();
    let exact = |x: &[i8]| inst.objective(&SpinState::new(x.to_vec()).expect("spins")).expect("length");
    let mut best_x = x.clone();
    let mut best = exact(&x);
    let total: u64 = 1 << n_t;
    for step in 1..total {
        let k = step.trailing_zeros() as usize;
        // x_k flips: residual y - Hx moves by -2 x_k(new) H[:, k]
        x[k] = -x[k];
        let d = 2.0 * x[k] as f64;
        for (r, v) in resid.iter_mut().enumerate() {
            *v -= d * inst.h_at(r, k);
        }
        let approx = norm(&resid);
        let tol = 1e-9 * (1.0 + best.abs());
        if approx < best + tol {
            let e = exact(&x);
            if e < best || (e == best && lex_less(&x, &best_x)) {
                best = e;
                best_x.copy_from_slice(&x);
            }
        }
    }
    Ok((SpinState::new(best_x).expect("spins"), best))
}

/// Fraction of positions where `x_hat` and `x_true` differ.
pub fn ber(x_hat: &SpinState, x_true: &SpinState) -> Result<f64> {
    check_len("detected symbols", x_true.len(), x_hat.len())?;
    if x_true.is_empty() {
        return Ok(0.0);
    }
    let errors = x_hat
        .as_slice()
        .iter()
        .zip(x_true.as_slice())
        .filter(|(a, b)| a != b)
        .count();
    Ok(errors as f64 / x_true.len() as f64)
}

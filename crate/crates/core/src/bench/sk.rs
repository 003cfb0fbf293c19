use crate::error::{Error, Result};
use crate::ising::{energy_eval, DenseIsingModel, SpinState};
use crate::sampler::RandomStream;

/// Largest model accepted by [`ground_state_exhaustive`].
pub const EXHAUSTIVE_MAX_SPINS: usize = 24;

/// Sherrington-Kirkpatrick instance: `J_ij ~ N(0, 1/n)` for `i < j`, no fields.
pub fn gen_sk(n: usize, stream: &mut RandomStream) -> Result<DenseIsingModel> {
    if n < 2 {
        return Err(Error::InvalidParameter("SK instances need at least 2 spins".into()));
    }
    let sd = 1.0 / (n as f64).sqrt();
    let mut j = vec![0.0; n * n];
    for a in 0..n {
        for b in (a + 1)..n {
            let w = sd * stream.normal();
            j[a * n + b] = w;
            j[b * n + a] = w;
        }
    }
    DenseIsingModel::new(n, j, vec![0.0; n])
}

/// Exact ground state by Gray-code enumeration. Ties go to the
/// lexicographically smallest state (`-1 < +1`, first spin most significant).
/// Without fields the first spin is pinned to `-1`, which halves the search.
pub fn ground_state_exhaustive(model: &DenseIsingModel) -> Result<(SpinState, f64)> {
    let n = model.n();
    if n > EXHAUSTIVE_MAX_SPINS {
        return Err(Error::SizeGuard {
            n,
            limit: EXHAUSTIVE_MAX_SPINS,
        });
    }
    let symmetric = model.biases().iter().all(|&h| h == 0.0);
    let first_free = usize::from(symmetric && n > 1);
    let free = n - first_free;

    let mut s = vec![-1i8; n];
    let mut field: Vec<f64> = (0..n)
        .map(|i| model.bias(i) - model.row(i).iter().sum::<f64>())
        .collect();
    let exact = |s: &[i8]| energy_eval(model, &SpinState::new(s.to_vec()).expect("spins")).expect("length");
    let mut e = exact(&s);
    let mut best = e;
    let mut best_s = s.clone();

    for step in 1u64..(1u64 << free) {
        let k = first_free + step.trailing_zeros() as usize;
        let old = s[k] as f64;
        e += 2.0 * old * field[k];
        s[k] = -s[k];
        let row = model.row(k);
        for (f, &w) in field.iter_mut().zip(row) {
            *f -= 2.0 * old * w;
        }
        let tol = 1e-9 * (1.0 + best.abs());
        if e < best + tol {
            let exact_e = exact(&s);
            if exact_e < best || (exact_e == best && s < best_s) {
                best = exact_e;
                best_s.copy_from_slice(&s);
            }
        }
    }
    Ok((SpinState::new(best_s).expect("spins"), best))
}

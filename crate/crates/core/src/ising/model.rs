use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::sampler::RandomStream;

/// A configuration of `±1` spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SpinState(Vec<i8>);

impl SpinState {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some((index, &value)) = spins.iter().enumerate().find(|(_, &s)| s != 1 && s != -1)
        {
            return Err(Error::InvalidSpin {
                index,
                value: value as i64,
            });
        }
        Ok(Self(spins))
    }

    pub fn all_up(n: usize) -> Self {
        Self(vec![1; n])
    }

    /// Each spin independently `±1` with probability 1/2.
    pub fn random(n: usize, stream: &mut RandomStream) -> Self {
        Self((0..n).map(|_| stream.coin()).collect())
    }

    /// Spin `k` set from bit `k` of `bits` (bit set means `+1`).
    pub fn from_bits(n: usize, bits: u64) -> Self {
        Self((0..n).map(|k| if bits >> k & 1 == 1 { 1 } else { -1 }).collect())
    }

    /// Repeats every spin `copies` times, matching the physical layout of a
    /// sparsified model (`physical = logical * copies + copy`).
    pub fn replicate(&self, copies: usize) -> Self {
        Self(
            self.0
                .iter()
                .flat_map(|&s| std::iter::repeat_n(s, copies))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [i8] {
        &mut self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = -self.0[i];
    }

    pub fn into_vec(self) -> Vec<i8> {
        self.0
    }
}

impl TryFrom<Vec<i8>> for SpinState {
    type Error = Error;

    fn try_from(v: Vec<i8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SpinState> for Vec<i8> {
    fn from(s: SpinState) -> Self {
        s.0
    }
}

/// How couplings and biases are rescaled after construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScale {
    #[default]
    None,
    /// Divide `J` and `h` by the standard deviation of the off-diagonal couplings.
    UnitCouplingStd,
    /// Divide by `std(J) * sqrt(n)`, giving couplings of variance `1/n` (the SK scale).
    PerSpin,
}

/// Dense Ising model with symmetric, zero-diagonal couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIsingModel {
    n: usize,
    couplings: Vec<f64>,
    biases: Vec<f64>,
}

impl DenseIsingModel {
    /// `couplings` is row-major `n x n`.
    pub fn new(n: usize, couplings: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("spin count must be at least 1".into()));
        }
        check_len("couplings", n * n, couplings.len())?;
        check_len("biases", n, biases.len())?;
        for i in 0..n {
            if couplings[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "coupling diagonal must be zero (J[{i}][{i}] = {})",
                    couplings[i * n + i]
                )));
            }
            for j in (i + 1)..n {
                if couplings[i * n + j] != couplings[j * n + i] {
                    return Err(Error::InvalidParameter(format!(
                        "couplings must be symmetric (J[{i}][{j}] != J[{j}][{i}])"
                    )));
                }
            }
        }
        if couplings.iter().chain(&biases).any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite".into()));
        }
        Ok(Self {
            n,
            couplings,
            biases,
        })
    }

    /// Builds a model from an upper-triangle edge list; repeated edges accumulate.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], biases: Vec<f64>) -> Result<Self> {
        let mut couplings = vec![0.0; n * n];
        for &(i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) is out of range or a self-loop"
                )));
            }
            couplings[i * n + j] += w;
            couplings[j * n + i] += w;
        }
        Self::new(n, couplings, biases)
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(n, vec![0.0; n * n], vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[i * self.n + j]
    }

    pub fn bias(&self, i: usize) -> f64 {
        self.biases[i]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.couplings[i * self.n..(i + 1) * self.n]
    }

    /// Nonzero couplings `(i, j, J_ij)` with `i < j`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).filter_map(move |j| {
                let w = self.coupling(i, j);
                (w != 0.0).then_some((i, j, w))
            })
        })
    }

    pub fn energy(&self, s: &SpinState) -> Result<f64> {
        check_len("spin state", self.n, s.len())?;
        Ok(self.energy_unchecked(s.as_slice()))
    }

    pub(crate) fn energy_unchecked(&self, s: &[i8]) -> f64 {
        let mut e = 0.0;
        for i in 0..self.n {
            let si = s[i] as f64;
            let row = self.row(i);
            let mut acc = 0.0;
            for j in (i + 1)..self.n {
                acc += row[j] * s[j] as f64;
            }
            e -= si * (acc + self.biases[i]);
        }
        e
    }

    /// Mean absolute value over the upper-triangle couplings (zeros included).
    pub fn mean_abs_coupling(&self) -> f64 {
        let pairs = self.n * (self.n - 1) / 2;
        if pairs == 0 {
            return 0.0;
        }
        let sum: f64 = (0..self.n)
            .flat_map(|i| ((i + 1)..self.n).map(move |j| (i, j)))
            .map(|(i, j)| self.coupling(i, j).abs())
            .sum();
        sum / pairs as f64
    }

    fn coupling_std(&self) -> f64 {
        let pairs = self.n * (self.n - 1) / 2;
        if pairs == 0 {
            return 0.0;
        }
        let vals: Vec<f64> = (0..self.n)
            .flat_map(|i| ((i + 1)..self.n).map(move |j| (i, j)))
            .map(|(i, j)| self.coupling(i, j))
            .collect();
        let mean = vals.iter().sum::<f64>() / pairs as f64;
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / pairs as f64).sqrt()
    }

    /// Multiplies every coupling and bias by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            couplings: self.couplings.iter().map(|w| w * factor).collect(),
            biases: self.biases.iter().map(|w| w * factor).collect(),
        }
    }

    /// Returns the rescaled model and the divisor applied.
    pub fn normalized(&self, scale: WeightScale) -> (Self, f64) {
        let divisor = match scale {
            WeightScale::None => 1.0,
            WeightScale::UnitCouplingStd => self.coupling_std(),
            WeightScale::PerSpin => self.coupling_std() * (self.n as f64).sqrt(),
        };
        if divisor == 0.0 || divisor == 1.0 {
            return (self.clone(), 1.0);
        }
        let model = Self {
            n: self.n,
            couplings: self.couplings.iter().map(|w| w / divisor).collect(),
            biases: self.biases.iter().map(|w| w / divisor).collect(),
        };
        (model, divisor)
    }
}

/// Ising energy of `s` under `model`.
pub fn energy_eval(model: &DenseIsingModel, s: &SpinState) -> Result<f64> {
    model.energy(s)
}

/// Maps `argmin ||y - Hx||^2` over `x in {-1,+1}^Nt` to an Ising model with
/// `J = -H^T H` (diagonal dropped) and `h = H^T y`.
///
/// `h` is row-major `n_r x n_t`.
pub fn map_mimo_to_ising(h: &[f64], n_r: usize, n_t: usize, y: &[f64]) -> Result<DenseIsingModel> {
    if n_r == 0 || n_t == 0 {
        return Err(Error::InvalidParameter(
            "channel dimensions must be at least 1".into(),
        ));
    }
    check_len("channel matrix", n_r * n_t, h.len())?;
    check_len("received vector", n_r, y.len())?;
    let mut couplings = vec![0.0; n_t * n_t];
    for i in 0..n_t {
        for j in (i + 1)..n_t {
            let gram: f64 = (0..n_r).map(|k| h[k * n_t + i] * h[k * n_t + j]).sum();
            couplings[i * n_t + j] = -gram;
            couplings[j * n_t + i] = -gram;
        }
    }
    let biases = (0..n_t)
        .map(|i| (0..n_r).map(|k| h[k * n_t + i] * y[k]).sum())
        .collect();
    DenseIsingModel::new(n_t, couplings, biases)
}

use serde::{Deserialize, Serialize};

use super::stream::RandomStream;
use crate::error::{check_len, Error, Result};
use crate::ising::{SparsifiedModel, SpinState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub beta: f64,
    pub penalty: f64,
    pub sweeps_per_call: usize,
}

impl SamplerConfig {
    pub fn new(beta: f64, penalty: f64, sweeps_per_call: usize) -> Result<Self> {
        if !(beta > 0.0) || !(penalty >= 0.0) || sweeps_per_call == 0 {
            return Err(Error::InvalidParameter(format!(
                "sampler needs beta > 0, penalty >= 0 and at least one sweep \
                 (got beta={beta}, penalty={penalty}, sweeps={sweeps_per_call})"
            )));
        }
        Ok(Self {
            beta,
            penalty,
            sweeps_per_call,
        })
    }
}

/// `I_i = sum_j w_ij s_j + P * sum_partners s_k + h_i`.
#[inline]
pub fn local_field(sm: &SparsifiedModel, penalty: f64, s: &SpinState, i: usize) -> f64 {
    field_at(sm, penalty, s.as_slice(), i)
}

#[inline]
pub(crate) fn field_at(sm: &SparsifiedModel, penalty: f64, s: &[i8], i: usize) -> f64 {
    let (idx, w) = sm.neighbors(i);
    let mut acc = sm.h_phys()[i];
    for (&j, &wj) in idx.iter().zip(w) {
        acc += wj * s[j] as f64;
    }
    let partners: i32 = sm.copy_partners(i).iter().map(|&k| s[k] as i32).sum();
    acc + penalty * partners as f64
}

/// `sgn(tanh(beta * I) - r)`, with the boundary case resolved to `-1`.
#[inline]
pub fn pbit_update(field: f64, beta: f64, r: f64) -> i8 {
    if (beta * field).tanh() > r {
        1
    } else {
        -1
    }
}

/// One Gibbs update of every node, color by color; nodes of a color are
/// visited in ascending index. One draw is consumed per node.
pub fn chromatic_sweep(
    sm: &SparsifiedModel,
    penalty: f64,
    beta: f64,
    s: &mut SpinState,
    stream: &mut RandomStream,
) {
    sweep_slice(sm, penalty, beta, s.as_mut_slice(), stream);
}

pub(crate) fn sweep_slice(
    sm: &SparsifiedModel,
    penalty: f64,
    beta: f64,
    s: &mut [i8],
    stream: &mut RandomStream,
) {
    for class in sm.color_classes() {
        for &i in class {
            let field = field_at(sm, penalty, s, i);
            let r = stream.uniform();
            s[i] = pbit_update(field, beta, r);
        }
    }
}

/// A single Gibbs chain with per-node update counters.
#[derive(Debug, Clone)]
pub struct GibbsChain<'a> {
    model: &'a SparsifiedModel,
    config: SamplerConfig,
    state: SpinState,
    stream: RandomStream,
    sweeps: u64,
    updates: Vec<u64>,
}

impl<'a> GibbsChain<'a> {
    pub fn new(
        model: &'a SparsifiedModel,
        config: SamplerConfig,
        state: SpinState,
        stream: RandomStream,
    ) -> Result<Self> {
        check_len("chain state", model.n_phys(), state.len())?;
        Ok(Self {
            model,
            config,
            state,
            stream,
            sweeps: 0,
            updates: vec![0; model.n_phys()],
        })
    }

    /// Runs `sweeps_per_call` sweeps.
    pub fn advance(&mut self) {
        for _ in 0..self.config.sweeps_per_call {
            let s = self.state.as_mut_slice();
            for class in self.model.color_classes() {
                for &i in class {
                    let field = field_at(self.model, self.config.penalty, s, i);
                    s[i] = pbit_update(field, self.config.beta, self.stream.uniform());
                    self.updates[i] += 1;
                }
            }
            self.sweeps += 1;
        }
    }

    pub fn state(&self) -> &SpinState {
        &self.state
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn updates(&self) -> &[u64] {
        &self.updates
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::{sparsify, DenseIsingModel};

    fn isolated(h: f64) -> SparsifiedModel {
        let m = DenseIsingModel::new(1, vec![0.0], vec![h]).unwrap();
        sparsify(&m, 1).unwrap()
    }

    #[test]
    fn field_of_isolated_node_is_its_bias() {
        let sm = isolated(0.5);
        assert_eq!(local_field(&sm, 0.0, &SpinState::all_up(1), 0), 0.5);
    }

    #[test]
    fn copy_partner_contributes_penalty() {
        let sm = sparsify(&DenseIsingModel::zeros(1).unwrap(), 2).unwrap();
        assert_eq!(local_field(&sm, 3.5, &SpinState::all_up(2), 0), 3.5);
    }

    #[test]
    fn field_matches_serialized_edge_lists() {
        let mut rs = RandomStream::standard(21);
        let n = 10;
        let edges: Vec<_> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, rs.normal()))
            .collect();
        let h = (0..n).map(|_| rs.normal()).collect();
        let sm = sparsify(&DenseIsingModel::from_edges(n, &edges, h).unwrap(), 3).unwrap();
        let f = sm.to_file();
        let s = SpinState::random(sm.n_phys(), &mut rs);
        for i in 0..sm.n_phys() {
            let mut want = f.h_phys[i];
            for e in &f.problem_edges {
                if e.u == i {
                    want += e.weight * s.get(e.v) as f64;
                } else if e.v == i {
                    want += e.weight * s.get(e.u) as f64;
                }
            }
            for &(u, v) in &f.copy_edges {
                if u == i {
                    want += 1.7 * s.get(v) as f64;
                } else if v == i {
                    want += 1.7 * s.get(u) as f64;
                }
            }
            assert!((local_field(&sm, 1.7, &s, i) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn unbiased_coin_at_zero_field() {
        let mut rs = RandomStream::standard(1);
        let n = 1_000_000;
        let ups = (0..n).filter(|_| pbit_update(0.0, 1.0, rs.uniform()) == 1).count();
        let p = ups as f64 / n as f64;
        assert!((0.497..=0.503).contains(&p), "{p}");
    }

    #[test]
    fn saturated_tanh_always_up() {
        let mut rs = RandomStream::standard(2);
        assert!((0..10_000).all(|_| pbit_update(1.0, 1e3, rs.uniform()) == 1));
    }

    #[test]
    fn acceptance_law_matches_closed_form() {
        let mut rs = RandomStream::standard(3);
        let n = 1_000_000;
        let ups = (0..n).filter(|_| pbit_update(0.5, 1.0, rs.uniform()) == 1).count();
        let p = ups as f64 / n as f64;
        let want = (1.0 + 0.5f64.tanh()) / 2.0;
        assert!((p - want).abs() < 0.005, "{p} vs {want}");
    }

    #[test]
    fn zero_temperature_fixpoint() {
        // ferromagnetic chain at a ground state stays put
        let m = DenseIsingModel::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], vec![0.1; 4])
            .unwrap();
        let sm = sparsify(&m, 2).unwrap();
        let mut s = SpinState::all_up(sm.n_phys());
        let mut rs = RandomStream::standard(4);
        chromatic_sweep(&sm, 1.0, 1e6, &mut s, &mut rs);
        assert_eq!(s, SpinState::all_up(sm.n_phys()));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let m = DenseIsingModel::from_edges(3, &[(0, 1, 0.4), (1, 2, -0.8)], vec![0.1, 0.0, -0.3])
            .unwrap();
        let sm = sparsify(&m, 2).unwrap();
        let run = || {
            let mut rs = RandomStream::standard(99);
            let mut s = SpinState::all_up(sm.n_phys());
            (0..50)
                .map(|_| {
                    chromatic_sweep(&sm, 1.0, 0.7, &mut s, &mut rs);
                    s.clone()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn update_counters_track_sweeps() {
        let m = DenseIsingModel::from_edges(5, &[(0, 1, 0.4), (1, 4, -0.8)], vec![0.0; 5]).unwrap();
        let sm = sparsify(&m, 2).unwrap();
        let cfg = SamplerConfig::new(1.0, 0.5, 7).unwrap();
        let mut chain =
            GibbsChain::new(&sm, cfg, SpinState::all_up(10), RandomStream::standard(5)).unwrap();
        chain.advance();
        chain.advance();
        assert_eq!(chain.sweeps(), 14);
        assert!(chain.updates().iter().all(|&u| u == 14));
    }

    #[test]
    fn invalid_sampler_config() {
        assert!(SamplerConfig::new(0.0, 1.0, 1).is_err());
        assert!(SamplerConfig::new(1.0, -1.0, 1).is_err());
        assert!(SamplerConfig::new(1.0, 1.0, 0).is_err());
    }
}

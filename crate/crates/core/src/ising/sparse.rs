use serde::{Deserialize, Serialize};

use super::coloring::greedy_coloring;
use super::model::{DenseIsingModel, SpinState};
use crate::error::{check_len, Error, Result};
use crate::sampler::RandomStream;

/// How the bias `h_i` of a logical spin is distributed over its copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasSplit {
    /// `h_i / c` on every copy.
    #[default]
    Equal,
    /// All of `h_i` on copy 0.
    FirstCopy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Copy-agreement summary of a physical state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Copy edges whose endpoints disagree (the constraint function `g`).
    pub broken_pairs: usize,
    pub copy_edges: usize,
    /// `-(satisfied - broken)`; the penalty energy is `P * copy_energy`.
    pub copy_energy: f64,
    pub agreement_pct: f64,
}

impl ConstraintReport {
    fn from_counts(broken_pairs: usize, copy_edges: usize) -> Self {
        let agreement_pct = if copy_edges == 0 {
            100.0
        } else {
            100.0 * (1.0 - broken_pairs as f64 / copy_edges as f64)
        };
        Self {
            broken_pairs,
            copy_edges,
            copy_energy: 2.0 * broken_pairs as f64 - copy_edges as f64,
            agreement_pct,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.broken_pairs == 0
    }
}

/// Serialized form: edge lists plus the copy map; adjacency is rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparsifiedModelFile {
    pub n_logical: usize,
    pub copies: usize,
    pub problem_edges: Vec<ProblemEdge>,
    pub copy_edges: Vec<(usize, usize)>,
    pub h_phys: Vec<f64>,
    pub copy_of: Vec<(usize, usize)>,
    pub color_of: Vec<usize>,
}

/// Physical graph obtained by splitting each logical spin into `copies`
/// nodes joined by unit ferromagnetic copy edges (scaled at run time by `P`).
///
/// Physical index of copy `k` of logical spin `i` is `i * copies + k`.
#[derive(Debug, Clone)]
pub struct SparsifiedModel {
    n_logical: usize,
    copies: usize,
    problem_edges: Vec<ProblemEdge>,
    copy_edges: Vec<(usize, usize)>,
    h_phys: Vec<f64>,
    copy_of: Vec<(usize, usize)>,
    color_of: Vec<usize>,
    // derived
    source: DenseIsingModel,
    nbr_offsets: Vec<usize>,
    nbr_index: Vec<usize>,
    nbr_weight: Vec<f64>,
    partner_offsets: Vec<usize>,
    partner_index: Vec<usize>,
    color_classes: Vec<Vec<usize>>,
}

impl SparsifiedModel {
    fn assemble(
        n_logical: usize,
        copies: usize,
        problem_edges: Vec<ProblemEdge>,
        copy_edges: Vec<(usize, usize)>,
        h_phys: Vec<f64>,
        copy_of: Vec<(usize, usize)>,
        color_of: Option<Vec<usize>>,
    ) -> Result<Self> {
        if copies == 0 || n_logical == 0 {
            return Err(Error::InvalidParameter(
                "sparsified model needs at least one logical spin and one copy".into(),
            ));
        }
        let n_phys = n_logical * copies;
        check_len("h_phys", n_phys, h_phys.len())?;
        check_len("copy_of", n_phys, copy_of.len())?;
        for (p, &(i, k)) in copy_of.iter().enumerate() {
            if i >= n_logical || k >= copies {
                return Err(Error::Schema(format!(
                    "copy_of[{p}] = ({i}, {k}) is out of range"
                )));
            }
        }
        for e in &problem_edges {
            if e.u >= n_phys || e.v >= n_phys || e.u == e.v {
                return Err(Error::Schema(format!(
                    "problem edge ({}, {}) is out of range or a self-loop",
                    e.u, e.v
                )));
            }
        }
        for &(u, v) in &copy_edges {
            if u >= n_phys || v >= n_phys || u == v || copy_of[u].0 != copy_of[v].0 {
                return Err(Error::Schema(format!(
                    "copy edge ({u}, {v}) must join two copies of one logical spin"
                )));
            }
        }

        let mut problem_adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_phys];
        for e in &problem_edges {
            problem_adj[e.u].push((e.v, e.weight));
            problem_adj[e.v].push((e.u, e.weight));
        }
        let mut partners: Vec<Vec<usize>> = vec![Vec::new(); n_phys];
        for &(u, v) in &copy_edges {
            partners[u].push(v);
            partners[v].push(u);
        }

        let adjacency: Vec<Vec<usize>> = (0..n_phys)
            .map(|p| {
                problem_adj[p]
                    .iter()
                    .map(|&(q, _)| q)
                    .chain(partners[p].iter().copied())
                    .collect()
            })
            .collect();
        let color_of = match color_of {
            Some(c) => {
                check_len("color_of", n_phys, c.len())?;
                if !super::coloring::is_proper(&adjacency, &c) {
                    return Err(Error::Schema("color_of is not a proper coloring".into()));
                }
                c
            }
            None => greedy_coloring(&adjacency),
        };
        let n_colors = color_of.iter().max().map_or(0, |&c| c + 1);
        let mut color_classes = vec![Vec::new(); n_colors];
        for (p, &c) in color_of.iter().enumerate() {
            color_classes[c].push(p);
        }

        let mut nbr_offsets = Vec::with_capacity(n_phys + 1);
        let mut nbr_index = Vec::new();
        let mut nbr_weight = Vec::new();
        nbr_offsets.push(0);
        for list in &problem_adj {
            for &(q, w) in list {
                nbr_index.push(q);
                nbr_weight.push(w);
            }
            nbr_offsets.push(nbr_index.len());
        }
        let mut partner_offsets = Vec::with_capacity(n_phys + 1);
        let mut partner_index = Vec::new();
        partner_offsets.push(0);
        for list in &partners {
            partner_index.extend_from_slice(list);
            partner_offsets.push(partner_index.len());
        }

        let mut couplings = vec![0.0; n_logical * n_logical];
        for e in &problem_edges {
            let (a, b) = (copy_of[e.u].0, copy_of[e.v].0);
            if a == b {
                return Err(Error::Schema(format!(
                    "problem edge ({}, {}) joins copies of the same logical spin",
                    e.u, e.v
                )));
            }
            couplings[a * n_logical + b] += e.weight;
            couplings[b * n_logical + a] += e.weight;
        }
        let mut biases = vec![0.0; n_logical];
        for (p, &(i, _)) in copy_of.iter().enumerate() {
            biases[i] += h_phys[p];
        }
        let source = DenseIsingModel::new(n_logical, couplings, biases)?;

        Ok(Self {
            n_logical,
            copies,
            problem_edges,
            copy_edges,
            h_phys,
            copy_of,
            color_of,
            source,
            nbr_offsets,
            nbr_index,
            nbr_weight,
            partner_offsets,
            partner_index,
            color_classes,
        })
    }

    pub fn n_logical(&self) -> usize {
        self.n_logical
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn n_phys(&self) -> usize {
        self.h_phys.len()
    }

    pub fn problem_edges(&self) -> &[ProblemEdge] {
        &self.problem_edges
    }

    pub fn copy_edges(&self) -> &[(usize, usize)] {
        &self.copy_edges
    }

    pub fn h_phys(&self) -> &[f64] {
        &self.h_phys
    }

    pub fn copy_of(&self, p: usize) -> (usize, usize) {
        self.copy_of[p]
    }

    pub fn physical_index(&self, logical: usize, copy: usize) -> usize {
        logical * self.copies + copy
    }

    pub fn color_of(&self) -> &[usize] {
        &self.color_of
    }

    pub fn n_colors(&self) -> usize {
        self.color_classes.len()
    }

    /// Nodes of each color, ascending by index.
    pub fn color_classes(&self) -> &[Vec<usize>] {
        &self.color_classes
    }

    /// The dense model this graph encodes (rebuilt from the edge lists).
    pub fn source(&self) -> &DenseIsingModel {
        &self.source
    }

    /// Problem neighbors of `p` with their weights.
    pub fn neighbors(&self, p: usize) -> (&[usize], &[f64]) {
        let r = self.nbr_offsets[p]..self.nbr_offsets[p + 1];
        (&self.nbr_index[r.clone()], &self.nbr_weight[r])
    }

    pub fn copy_partners(&self, p: usize) -> &[usize] {
        &self.partner_index[self.partner_offsets[p]..self.partner_offsets[p + 1]]
    }

    pub fn problem_degree(&self, p: usize) -> usize {
        self.nbr_offsets[p + 1] - self.nbr_offsets[p]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n_phys())
            .map(|p| self.problem_degree(p) + self.copy_partners(p).len())
            .max()
            .unwrap_or(0)
    }

    pub(crate) fn csr(&self) -> (&[usize], &[usize], &[f64]) {
        (&self.nbr_offsets, &self.nbr_index, &self.nbr_weight)
    }

    /// Mean `|w|` over problem edges; zero when there are none.
    pub fn mean_abs_weight(&self) -> f64 {
        if self.problem_edges.is_empty() {
            return 0.0;
        }
        self.problem_edges.iter().map(|e| e.weight.abs()).sum::<f64>()
            / self.problem_edges.len() as f64
    }

    /// Problem energy (biases included) and unscaled copy energy.
    pub(crate) fn energy_parts(&self, s: &[i8]) -> (f64, f64) {
        let mut e_prob = 0.0;
        for e in &self.problem_edges {
            e_prob -= e.weight * (s[e.u] * s[e.v]) as f64;
        }
        for (p, &h) in self.h_phys.iter().enumerate() {
            e_prob -= h * s[p] as f64;
        }
        let broken = self.broken_pairs(s);
        (e_prob, 2.0 * broken as f64 - self.copy_edges.len() as f64)
    }

    pub(crate) fn broken_pairs(&self, s: &[i8]) -> usize {
        self.copy_edges.iter().filter(|&&(u, v)| s[u] != s[v]).count()
    }

    pub fn to_file(&self) -> SparsifiedModelFile {
        SparsifiedModelFile {
            n_logical: self.n_logical,
            copies: self.copies,
            problem_edges: self.problem_edges.clone(),
            copy_edges: self.copy_edges.clone(),
            h_phys: self.h_phys.clone(),
            copy_of: self.copy_of.clone(),
            color_of: self.color_of.clone(),
        }
    }

    pub fn from_file(f: SparsifiedModelFile) -> Result<Self> {
        let sm = Self::assemble(
            f.n_logical,
            f.copies,
            f.problem_edges,
            f.copy_edges,
            f.h_phys,
            f.copy_of,
            Some(f.color_of),
        )?;
        Ok(sm)
    }
}

/// Splits every logical spin into `copies` physical nodes.
///
/// Edge `(i, j)`, `i < j`, is carried by copy `j mod c` of `i` and copy
/// `i mod c` of `j`; copies of one spin are chained by copy edges.
pub fn sparsify(model: &DenseIsingModel, copies: usize) -> Result<SparsifiedModel> {
    sparsify_with(model, copies, BiasSplit::Equal)
}

pub fn sparsify_with(
    model: &DenseIsingModel,
    copies: usize,
    split: BiasSplit,
) -> Result<SparsifiedModel> {
    if copies == 0 {
        return Err(Error::InvalidParameter("copies must be at least 1".into()));
    }
    let n = model.n();
    let c = copies;
    let problem_edges = model
        .edges()
        .map(|(i, j, weight)| ProblemEdge {
            u: i * c + j % c,
            v: j * c + i % c,
            weight,
        })
        .collect();
    let copy_edges = (0..n)
        .flat_map(|i| (0..c - 1).map(move |k| (i * c + k, i * c + k + 1)))
        .collect();
    let h_phys = (0..n)
        .flat_map(|i| {
            let h = model.bias(i);
            (0..c).map(move |k| match split {
                BiasSplit::Equal => h / c as f64,
                BiasSplit::FirstCopy => {
                    if k == 0 {
                        h
                    } else {
                        0.0
                    }
                }
            })
        })
        .collect();
    let copy_of = (0..n).flat_map(|i| (0..c).map(move |k| (i, k))).collect();
    SparsifiedModel::assemble(n, c, problem_edges, copy_edges, h_phys, copy_of, None)
}

/// `E = -sum w s_u s_v - P sum_copy s_u s_v - sum h s`, plus the constraint report.
pub fn sparse_energy_eval(
    sm: &SparsifiedModel,
    penalty: f64,
    s: &SpinState,
) -> Result<(f64, ConstraintReport)> {
    check_len("physical spin state", sm.n_phys(), s.len())?;
    if penalty < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "copy penalty must be non-negative (got {penalty})"
        )));
    }
    let (e_prob, e_copy) = sm.energy_parts(s.as_slice());
    let report = ConstraintReport::from_counts(sm.broken_pairs(s.as_slice()), sm.copy_edges.len());
    Ok((e_prob + penalty * e_copy, report))
}

pub fn constraint_report(sm: &SparsifiedModel, s: &SpinState) -> Result<ConstraintReport> {
    check_len("physical spin state", sm.n_phys(), s.len())?;
    Ok(ConstraintReport::from_counts(
        sm.broken_pairs(s.as_slice()),
        sm.copy_edges.len(),
    ))
}

/// Majority vote over the copies of each logical spin; a tied vote is
/// settled by a fair coin from `stream`.
pub fn project_majority(
    sm: &SparsifiedModel,
    s: &SpinState,
    stream: &mut RandomStream,
) -> Result<SpinState> {
    check_len("physical spin state", sm.n_phys(), s.len())?;
    Ok(SpinState::new(project_slice(sm, s.as_slice(), stream)).expect("projection yields spins"))
}

pub(crate) fn project_slice(sm: &SparsifiedModel, s: &[i8], stream: &mut RandomStream) -> Vec<i8> {
    s.chunks_exact(sm.copies)
        .map(|copies| {
            let sum: i32 = copies.iter().map(|&x| x as i32).sum();
            match sum.signum() {
                1 => 1,
                -1 => -1,
                _ => stream.coin(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_to_all(n: usize, seed: u64) -> DenseIsingModel {
        let mut rs = RandomStream::standard(seed);
        let edges: Vec<_> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, rs.normal()))
            .collect();
        let h = (0..n).map(|_| rs.normal()).collect();
        DenseIsingModel::from_edges(n, &edges, h).unwrap()
    }

    /// Energy straight from the serialized edge lists.
    fn edge_list_energy(f: &SparsifiedModelFile, p: f64, s: &[i8]) -> f64 {
        let mut e = 0.0;
        for edge in &f.problem_edges {
            e -= edge.weight * s[edge.u] as f64 * s[edge.v] as f64;
        }
        for &(u, v) in &f.copy_edges {
            e -= p * s[u] as f64 * s[v] as f64;
        }
        for (i, h) in f.h_phys.iter().enumerate() {
            e -= h * s[i] as f64;
        }
        e
    }

    #[test]
    fn single_copy_is_identity() {
        let m = all_to_all(6, 1);
        let sm = sparsify(&m, 1).unwrap();
        assert!(sm.copy_edges().is_empty());
        assert_eq!(sm.n_phys(), 6);
        assert_eq!(sm.problem_edges().len(), 15);
        assert_eq!(sm.source(), &m);
        // all-to-all with one copy is a clique
        assert_eq!(sm.n_colors(), 6);
    }

    #[test]
    fn sixty_four_spins_two_copies() {
        let m = all_to_all(64, 2);
        let sm = sparsify(&m, 2).unwrap();
        assert_eq!(sm.n_phys(), 128);
        assert_eq!(sm.copy_edges().len(), 64);
        assert_eq!(sm.problem_edges().len(), 64 * 63 / 2);
        let mut total = 0;
        for p in 0..128 {
            let d = sm.problem_degree(p);
            // 2016 edges over 128 endpoints: degrees are 31 or 32
            assert!(d == 31 || d == 32, "degree {d}");
            assert_eq!(sm.copy_partners(p).len(), 1);
            total += d;
        }
        assert_eq!(total, 2 * 2016);
    }

    #[test]
    fn chain_copy_edges_for_three_copies() {
        let m = all_to_all(5, 3);
        let sm = sparsify(&m, 3).unwrap();
        assert_eq!(sm.copy_edges().len(), 5 * 2);
        assert_eq!(sm.copy_partners(sm.physical_index(2, 1)).len(), 2);
        assert_eq!(sm.copy_partners(sm.physical_index(2, 0)).len(), 1);
    }

    #[test]
    fn biases_sum_to_source() {
        let m = all_to_all(7, 4);
        for split in [BiasSplit::Equal, BiasSplit::FirstCopy] {
            let sm = sparsify_with(&m, 3, split).unwrap();
            for i in 0..7 {
                let sum: f64 = (0..3).map(|k| sm.h_phys()[sm.physical_index(i, k)]).sum();
                assert!((sum - m.bias(i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coloring_is_proper() {
        for c in 1..=3 {
            let sm = sparsify(&all_to_all(9, 5), c).unwrap();
            let col = sm.color_of();
            for e in sm.problem_edges() {
                assert_ne!(col[e.u], col[e.v]);
            }
            for &(u, v) in sm.copy_edges() {
                assert_ne!(col[u], col[v]);
            }
        }
    }

    #[test]
    fn one_broken_pair() {
        let m = DenseIsingModel::zeros(1).unwrap();
        let sm = sparsify(&m, 2).unwrap();
        let s = SpinState::new(vec![1, -1]).unwrap();
        let (e, rep) = sparse_energy_eval(&sm, 2.0, &s).unwrap();
        assert_eq!(e, 2.0);
        assert_eq!(rep.broken_pairs, 1);
        assert_eq!(rep.copy_energy, 1.0);
        assert_eq!(rep.agreement_pct, 0.0);
    }

    #[test]
    fn exhaustive_energy_matches_edge_lists() {
        let m = all_to_all(4, 6);
        let sm = sparsify(&m, 2).unwrap();
        let f = sm.to_file();
        for bits in 0..(1u64 << 8) {
            let s = SpinState::from_bits(8, bits);
            for p in [0.0, 0.7, 3.5] {
                let (e, _) = sparse_energy_eval(&sm, p, &s).unwrap();
                let want = edge_list_energy(&f, p, s.as_slice());
                assert!((e - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn agreement_offset_identity_exhaustive() {
        let m = all_to_all(4, 7);
        let sm = sparsify(&m, 2).unwrap();
        let mut rs = RandomStream::standard(0);
        for bits in 0..16u64 {
            let logical = SpinState::from_bits(4, bits);
            let phys = logical.replicate(2);
            for p in [0.0, 1.0, 2.5] {
                let (e, rep) = sparse_energy_eval(&sm, p, &phys).unwrap();
                assert_eq!(rep.broken_pairs, 0);
                let dense = m.energy(&project_majority(&sm, &phys, &mut rs).unwrap()).unwrap();
                assert!((e + p * sm.copy_edges().len() as f64 - dense).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn majority_vote_cases() {
        let mut rs = RandomStream::standard(9);
        let m = DenseIsingModel::zeros(1).unwrap();
        let sm2 = sparsify(&m, 2).unwrap();
        let sm3 = sparsify(&m, 3).unwrap();
        let up = SpinState::new(vec![1, 1]).unwrap();
        assert_eq!(project_majority(&sm2, &up, &mut rs).unwrap().as_slice(), &[1]);
        let maj = SpinState::new(vec![1, 1, -1]).unwrap();
        assert_eq!(project_majority(&sm3, &maj, &mut rs).unwrap().as_slice(), &[1]);
    }

    #[test]
    fn tie_break_is_fair() {
        let mut rs = RandomStream::standard(10);
        let sm = sparsify(&DenseIsingModel::zeros(1).unwrap(), 2).unwrap();
        let tie = SpinState::new(vec![1, -1]).unwrap();
        let draws = 100_000;
        let ups = (0..draws)
            .filter(|_| project_majority(&sm, &tie, &mut rs).unwrap().get(0) == 1)
            .count();
        let frac = ups as f64 / draws as f64;
        assert!((0.494..=0.506).contains(&frac), "{frac}");
    }

    #[test]
    fn constraint_report_counts() {
        let sm = sparsify(&all_to_all(16, 8), 2).unwrap();
        let agree = SpinState::all_up(32);
        let r = constraint_report(&sm, &agree).unwrap();
        assert_eq!((r.broken_pairs, r.agreement_pct), (0, 100.0));
        let alt = SpinState::new((0..32).map(|p| if p % 2 == 0 { 1 } else { -1 }).collect())
            .unwrap();
        let r = constraint_report(&sm, &alt).unwrap();
        assert_eq!((r.broken_pairs, r.agreement_pct), (16, 0.0));
        assert_eq!(r.copy_energy, 16.0);

        let mut rs = RandomStream::standard(11);
        for _ in 0..50 {
            let s = SpinState::random(32, &mut rs);
            let direct = (0..16).filter(|&i| s.get(2 * i) != s.get(2 * i + 1)).count();
            let r = constraint_report(&sm, &s).unwrap();
            assert_eq!(r.broken_pairs, direct);
            assert_eq!(r.copy_energy, -(16.0) + 2.0 * direct as f64);
        }
    }

    #[test]
    fn file_round_trip_rebuilds_adjacency() {
        let sm = sparsify(&all_to_all(6, 12), 2).unwrap();
        let json = serde_json::to_string(&sm.to_file()).unwrap();
        let back = SparsifiedModel::from_file(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.source(), sm.source());
        assert_eq!(back.color_of(), sm.color_of());
        assert_eq!(back.neighbors(3), sm.neighbors(3));
    }

    #[test]
    fn rejects_improper_coloring_on_load() {
        let sm = sparsify(&all_to_all(4, 13), 2).unwrap();
        let mut f = sm.to_file();
        f.color_of = vec![0; 8];
        assert!(SparsifiedModel::from_file(f).is_err());
    }
}

//! Stochastic block model generation and the block-matrix algebra used to
//! reason about merged (observed) communities.
//!
//! Latent labels are drawn i.i.d. from a class prior; each vertex pair
//! `i < j` receives an edge with probability `theta_i * theta_j * B0(y_i,
//! y_j)` and the entry is mirrored, so generated graphs are undirected and
//! diagonal-free. With no degree spec all `theta_i` are 1 and the model is a
//! plain SBM. Everything is deterministic given the seed (ChaCha8).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LabelVector, SparseGraph};

/// Per-vertex degree parameter distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeSpec {
    /// All degree parameters are 1 (plain SBM).
    None,
    /// theta_i drawn i.i.d. uniform on [lo, hi).
    Uniform { lo: f64, hi: f64 },
}

/// Parameters of a (degree-corrected) stochastic block model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    /// K0 x K0 block probability matrix, row = source class.
    pub block: Vec<Vec<f64>>,
    /// Latent class prior, length K0, sums to 1.
    pub prior: Vec<f64>,
    pub degree: DegreeSpec,
}

impl SbmParams {
    pub fn new(block: Vec<Vec<f64>>, prior: Vec<f64>, degree: DegreeSpec) -> Result<Self> {
        let p = SbmParams {
            block,
            prior,
            degree,
        };
        p.validate()?;
        Ok(p)
    }

    /// Number of latent classes.
    pub fn k0(&self) -> usize {
        self.block.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k0 = self.block.len();
        if k0 == 0 {
            return Err(Error::params("block matrix is empty"));
        }
        for row in &self.block {
            if row.len() != k0 {
                return Err(Error::params("block matrix must be square"));
            }
            for &b in row {
                if !(0.0..=1.0).contains(&b) {
                    return Err(Error::params(format!(
                        "block probability {b} outside [0, 1]"
                    )));
                }
            }
        }
        if self.prior.len() != k0 {
            return Err(Error::params("prior length must match block matrix size"));
        }
        if self.prior.iter().any(|&p| p < 0.0) {
            return Err(Error::params("prior entries must be nonnegative"));
        }
        let sum: f64 = self.prior.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::params(format!("prior sums to {sum}, expected 1")));
        }
        if let DegreeSpec::Uniform { lo, hi } = self.degree {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::params(format!(
                    "degree range [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1"
                )));
            }
        }
        Ok(())
    }
}

/// Surjective assignment of each latent class to an observed class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeMap {
    /// `map[k-1]` is the observed class of latent class `k`.
    map: Vec<u32>,
}

impl MergeMap {
    pub fn new(map: Vec<u32>) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::params("merge map is empty"));
        }
        let k = *map.iter().max().unwrap();
        if map.contains(&0) {
            return Err(Error::params("observed classes are 1-based; 0 is invalid"));
        }
        for c in 1..=k {
            if !map.contains(&c) {
                return Err(Error::params(format!(
                    "merge map is not surjective: observed class {c} has no latent preimage"
                )));
            }
        }
        Ok(MergeMap { map })
    }

    pub fn identity(k0: usize) -> Self {
        MergeMap {
            map: (1..=k0 as u32).collect(),
        }
    }

    /// Number of latent classes.
    pub fn k0(&self) -> usize {
        self.map.len()
    }

    /// Number of observed classes.
    pub fn k_observed(&self) -> u32 {
        *self.map.iter().max().unwrap()
    }

    pub fn map(&self) -> &[u32] {
        &self.map
    }

    /// Latent classes (1-based) merged into observed class `c`.
    pub fn preimage(&self, c: u32) -> Vec<usize> {
        self.map
            .iter()
            .enumerate()
            .filter(|&(_, &m)| m == c)
            .map(|(k, _)| k + 1)
            .collect()
    }
}

/// Draw a graph and its latent labels. Deterministic given the seed.
pub fn sample_sbm(p: &SbmParams, n: usize, seed: u64) -> Result<(SparseGraph, LabelVector)> {
    p.validate()?;
    if n < 2 {
        return Err(Error::params(format!("need at least 2 vertices, got {n}")));
    }
    let k0 = p.k0();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut cum = Vec::with_capacity(k0);
    let mut acc = 0.0;
    for &pr in &p.prior {
        acc += pr;
        cum.push(acc);
    }

    let latent: Vec<u32> = (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            match cum.iter().position(|&c| u < c) {
                Some(k) => k as u32 + 1,
                None => k0 as u32,
            }
        })
        .collect();

    let theta: Vec<f64> = match p.degree {
        DegreeSpec::None => vec![1.0; n],
        DegreeSpec::Uniform { lo, hi } => (0..n).map(|_| lo + (hi - lo) * rng.gen::<f64>()).collect(),
    };

    let mut pairs: Vec<(u32, u32)> = Vec::new();
    for i in 0..n {
        let row = &p.block[(latent[i] - 1) as usize];
        let ti = theta[i];
        for j in (i + 1)..n {
            let prob = ti * theta[j] * row[(latent[j] - 1) as usize];
            if rng.gen::<f64>() < prob {
                pairs.push((i as u32, j as u32));
            }
        }
    }

    let graph = SparseGraph::undirected_from_unique_pairs(n, &pairs);
    Ok((graph, LabelVector::new(latent)))
}

/// Map latent labels onto observed ones: `observed(i) = map(latent(i))`.
pub fn merge_labels(latent: &LabelVector, m: &MergeMap) -> Result<LabelVector> {
    let k0 = m.k0();
    let mut out = Vec::with_capacity(latent.len());
    for &y in latent.labels() {
        if y == 0 || y as usize > k0 {
            return Err(Error::Bounds {
                what: "latent class",
                index: y as usize,
                size: k0,
            });
        }
        out.push(m.map()[(y - 1) as usize]);
    }
    Ok(LabelVector::new(out))
}

/// Observed block matrix after merging: the prior-weighted average
///
/// `B(a,b) = sum_{k->a, l->b} prior_k prior_l B0(k,l)
///           / (sum_{k->a} prior_k * sum_{l->b} prior_l)`.
///
/// With a uniform prior this is the plain average over the merged block.
pub fn merged_block_matrix(b0: &[Vec<f64>], prior: &[f64], m: &MergeMap) -> Vec<Vec<f64>> {
    let k = m.k_observed();
    let pre: Vec<Vec<usize>> = (1..=k).map(|c| m.preimage(c)).collect();
    let mass: Vec<f64> = pre
        .iter()
        .map(|ks| ks.iter().map(|&k| prior[k - 1]).sum())
        .collect();
    let mut b = vec![vec![0.0; k as usize]; k as usize];
    for (a, ka) in pre.iter().enumerate() {
        for (c, kb) in pre.iter().enumerate() {
            let mut num = 0.0;
            for &u in ka {
                for &v in kb {
                    num += prior[u - 1] * prior[v - 1] * b0[u - 1][v - 1];
                }
            }
            b[a][c] = num / (mass[a] * mass[c]);
        }
    }
    b
}

/// Margin of separation between classes `k` and `l` (1-based): the
/// Euclidean distance between the corresponding rows of `b`.
pub fn margin(b: &[Vec<f64>], k: usize, l: usize) -> f64 {
    let (rk, rl) = (&b[k - 1], &b[l - 1]);
    rk.iter()
        .zip(rl)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// The three built-in simulation models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinModel {
    Sim1,
    Sim2,
    Sim3,
}

impl std::str::FromStr for BuiltinModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim1" => Ok(BuiltinModel::Sim1),
            "sim2" => Ok(BuiltinModel::Sim2),
            "sim3" => Ok(BuiltinModel::Sim3),
            other => Err(Error::params(format!(
                "unknown model {other:?}; expected sim1, sim2, or sim3"
            ))),
        }
    }
}

impl std::fmt::Display for BuiltinModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BuiltinModel::Sim1 => write!(f, "sim1"),
            BuiltinModel::Sim2 => write!(f, "sim2"),
            BuiltinModel::Sim3 => write!(f, "sim3"),
        }
    }
}

/// Parameters of a built-in model.
///
/// Models 1 and 2 share a 4-class degree-corrected SBM and differ only in
/// which latent classes are observed together; model 3 is a 5-class SBM with
/// three latent classes merged into one observed class.
pub fn builtin_model(id: BuiltinModel) -> (SbmParams, MergeMap) {
    match id {
        BuiltinModel::Sim1 | BuiltinModel::Sim2 => {
            let block = vec![
                vec![0.5, 0.2, 0.1, 0.1],
                vec![0.2, 0.2, 0.1, 0.1],
                vec![0.1, 0.1, 0.2, 0.2],
                vec![0.1, 0.1, 0.2, 0.5],
            ];
            let params = SbmParams {
                block,
                prior: vec![0.25; 4],
                degree: DegreeSpec::Uniform { lo: 0.1, hi: 1.0 },
            };
            let merge = match id {
                BuiltinModel::Sim1 => MergeMap::new(vec![1, 1, 2, 2]).unwrap(),
                _ => MergeMap::new(vec![1, 2, 1, 2]).unwrap(),
            };
            (params, merge)
        }
        BuiltinModel::Sim3 => {
            let block = vec![
                vec![0.5, 0.2, 0.2, 0.1, 0.1],
                vec![0.1, 0.2, 0.1, 0.2, 0.1],
                vec![0.1, 0.1, 0.2, 0.1, 0.2],
                vec![0.1, 0.2, 0.1, 0.5, 0.1],
                vec![0.1, 0.1, 0.2, 0.1, 0.5],
            ];
            let params = SbmParams {
                block,
                prior: vec![0.2; 5],
                degree: DegreeSpec::None,
            };
            (params, MergeMap::new(vec![1, 1, 1, 2, 3]).unwrap())
        }
    }
}

/// JSON-facing bundle of SBM parameters and merge map, as consumed by the
/// command line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub block: Vec<Vec<f64>>,
    pub prior: Vec<f64>,
    pub degree: DegreeSpec,
    pub merge: Vec<u32>,
}

impl ModelSpec {
    pub fn builtin(id: BuiltinModel) -> Self {
        let (p, m) = builtin_model(id);
        ModelSpec {
            block: p.block,
            prior: p.prior,
            degree: p.degree,
            merge: m.map().to_vec(),
        }
    }

    pub fn into_parts(self) -> Result<(SbmParams, MergeMap)> {
        let params = SbmParams::new(self.block, self.prior, self.degree)?;
        let merge = MergeMap::new(self.merge)?;
        if merge.k0() != params.k0() {
            return Err(Error::params(format!(
                "merge map covers {} latent classes but the block matrix has {}",
                merge.k0(),
                params.k0()
            )));
        }
        Ok((params, merge))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn merge_label_examples() {
        let latent = LabelVector::new(vec![1, 2, 3, 4]);
        let m1 = MergeMap::new(vec![1, 1, 2, 2]).unwrap();
        assert_eq!(merge_labels(&latent, &m1).unwrap().labels(), &[1, 1, 2, 2]);
        let m2 = MergeMap::new(vec![1, 2, 1, 2]).unwrap();
        assert_eq!(merge_labels(&latent, &m2).unwrap().labels(), &[1, 2, 1, 2]);
        let id = MergeMap::identity(4);
        assert_eq!(merge_labels(&latent, &id).unwrap().labels(), &[1, 2, 3, 4]);
    }

    #[test]
    fn merge_rejects_out_of_range() {
        let latent = LabelVector::new(vec![1, 5]);
        let m = MergeMap::new(vec![1, 1, 2, 2]).unwrap();
        assert!(matches!(
            merge_labels(&latent, &m).unwrap_err(),
            Error::Bounds { .. }
        ));
    }

    #[test]
    fn merge_map_must_be_surjective() {
        assert!(MergeMap::new(vec![1, 3]).is_err());
        assert!(MergeMap::new(vec![1, 0]).is_err());
    }

    #[test]
    fn merged_block_sim1() {
        let (p, m) = builtin_model(BuiltinModel::Sim1);
        let b = merged_block_matrix(&p.block, &p.prior, &m);
        assert!(close(b[0][0], 0.275, 1e-12));
        assert!(close(b[0][1], 0.1, 1e-12));
        assert!(close(b[1][0], 0.1, 1e-12));
        assert!(close(b[1][1], 0.275, 1e-12));
    }

    #[test]
    fn merged_block_sim2() {
        let (p, m) = builtin_model(BuiltinModel::Sim2);
        let b = merged_block_matrix(&p.block, &p.prior, &m);
        assert!(close(b[0][0], 0.225, 1e-12));
        assert!(close(b[0][1], 0.15, 1e-12));
        assert!(close(b[1][1], 0.225, 1e-12));
    }

    #[test]
    fn merged_block_identity_is_b0() {
        let (p, _) = builtin_model(BuiltinModel::Sim3);
        let b = merged_block_matrix(&p.block, &p.prior, &MergeMap::identity(5));
        for (row, row0) in b.iter().zip(&p.block) {
            for (x, x0) in row.iter().zip(row0) {
                assert!(close(*x, *x0, 1e-15));
            }
        }
    }

    // The first observed class of model 3 merges latent classes 1-3; the
    // uniform-prior average of that 3x3 block is 1.7/9 ~ 0.1889. All other
    // cells match their plain averages too.
    #[test]
    fn merged_block_sim3() {
        let (p, m) = builtin_model(BuiltinModel::Sim3);
        let b = merged_block_matrix(&p.block, &p.prior, &m);
        assert!(close(b[0][0], 1.7 / 9.0, 1e-12));
        assert!(close(b[0][1], 0.4 / 3.0, 1e-12));
        assert!(close(b[0][2], 0.4 / 3.0, 1e-12));
        assert!(close(b[1][0], 0.4 / 3.0, 1e-12));
        assert!(close(b[1][1], 0.5, 1e-12));
        assert!(close(b[1][2], 0.1, 1e-12));
        assert!(close(b[2][2], 0.5, 1e-12));
    }

    #[test]
    fn margin_examples() {
        let (p1, m1) = builtin_model(BuiltinModel::Sim1);
        assert!(close(margin(&p1.block, 2, 3), 0.2, 1e-12));
        assert!(close(margin(&p1.block, 2, 2), 0.0, 1e-15));

        let b1 = merged_block_matrix(&p1.block, &p1.prior, &m1);
        assert!(close(margin(&b1, 1, 2), 0.175 * 2f64.sqrt(), 1e-12));

        let (p2, m2) = builtin_model(BuiltinModel::Sim2);
        let b2 = merged_block_matrix(&p2.block, &p2.prior, &m2);
        assert!(close(margin(&b2, 1, 2), 0.075 * 2f64.sqrt(), 1e-12));

        let (p3, _) = builtin_model(BuiltinModel::Sim3);
        assert!(close(margin(&p3.block, 1, 4), 0.33f64.sqrt(), 5e-4));
    }

    #[test]
    fn margin_is_symmetric() {
        let (p, _) = builtin_model(BuiltinModel::Sim3);
        for k in 1..=5 {
            for l in 1..=5 {
                assert_eq!(margin(&p.block, k, l), margin(&p.block, l, k));
            }
        }
    }

    #[test]
    fn sample_all_zero_block_is_empty() {
        let p = SbmParams::new(
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![0.5, 0.5],
            DegreeSpec::None,
        )
        .unwrap();
        let (g, _) = sample_sbm(&p, 50, 3).unwrap();
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn sample_all_one_block_is_complete() {
        let p = SbmParams::new(vec![vec![1.0]], vec![1.0], DegreeSpec::None).unwrap();
        let (g, _) = sample_sbm(&p, 20, 3).unwrap();
        assert_eq!(g.num_edges(), 20 * 19 / 2);
        assert_eq!(g.weight(5, 5), 0.0);
    }

    #[test]
    fn sample_is_deterministic_in_seed() {
        let (p, _) = builtin_model(BuiltinModel::Sim1);
        let (g1, y1) = sample_sbm(&p, 300, 42).unwrap();
        let (g2, y2) = sample_sbm(&p, 300, 42).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(y1, y2);
        let (g3, _) = sample_sbm(&p, 300, 43).unwrap();
        assert_ne!(g1, g3);
    }

    #[test]
    fn sample_is_undirected_without_diagonal() {
        let (p, _) = builtin_model(BuiltinModel::Sim2);
        let (g, _) = sample_sbm(&p, 200, 9).unwrap();
        assert!(g.is_undirected());
        for (i, j, w) in g.entries() {
            assert_ne!(i, j);
            assert_eq!(g.weight(j, i), w);
        }
    }

    /// Law-of-large-numbers check on block densities. For the
    /// degree-corrected model the expected pair probability is
    /// `E[theta]^2 * B0(k,l)`; the standard error includes the covariance
    /// between pairs sharing a vertex, which dominates once theta varies:
    /// `cov = B^2 E[theta]^2 Var(theta)` per shared-vertex pair.
    #[test]
    fn block_densities_match_model() {
        let (p, _) = builtin_model(BuiltinModel::Sim1);
        let n = 2500;
        let (g, latent) = sample_sbm(&p, n, 1234).unwrap();

        let (e_th, var_th) = (0.55, 0.9 * 0.9 / 12.0);
        let counts = latent.class_counts();
        let members: Vec<Vec<usize>> = (1..=4)
            .map(|k| {
                (0..n)
                    .filter(|&i| latent.get(i) == k as u32)
                    .collect::<Vec<_>>()
            })
            .collect();

        for k in 0..4 {
            for l in k..4 {
                let mut edges = 0usize;
                for &i in &members[k] {
                    for (j, _) in g.neighbors(i) {
                        if latent.get(j) == l as u32 + 1 && (k != l || j > i) {
                            edges += 1;
                        }
                    }
                }
                let (nk, nl) = (counts[k] as f64, counts[l] as f64);
                let pairs = if k == l { nk * (nk - 1.0) / 2.0 } else { nk * nl };
                let shared = if k == l {
                    // unordered pairs of pairs sharing one endpoint
                    nk * (nk - 1.0) * (nk - 2.0) / 2.0
                } else {
                    nk * nl * (nk + nl - 2.0) / 2.0
                };
                let b = p.block[k][l];
                let expect = e_th * e_th * b;
                let var =
                    expect * (1.0 - expect) / pairs + 2.0 * shared / (pairs * pairs) * b * b * e_th * e_th * var_th;
                let density = edges as f64 / pairs;
                let se = var.sqrt();
                assert!(
                    (density - expect).abs() < 3.0 * se,
                    "block ({k},{l}): density {density:.5} vs expected {expect:.5} (se {se:.5})"
                );
            }
        }
    }
}

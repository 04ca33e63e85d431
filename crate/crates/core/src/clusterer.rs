//! Fixed-budget clustering: sample every arm `n` times, test every pair, and
//! return the connected components of the "not rejected" graph.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::Bandit;
use crate::error::{Error, Result};
use crate::seed::StreamSeed;
use crate::statistics::{threshold, threshold_subgaussian, ArmSummary, PairStatistics, ThresholdMode};

/// Disjoint blocks of arm indices covering `0..N`.
///
/// Canonical form: members sorted within each block, blocks sorted by their
/// smallest member, so two partitions are equal iff they group arms the same way.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn from_blocks(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = blocks.iter().map(Vec::len).sum();
        let mut labels = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::input("partition blocks must be nonempty"));
            }
            for &i in block {
                if i >= n {
                    return Err(Error::input(format!("index {i} out of range for {n} items")));
                }
                if labels[i] != usize::MAX {
                    return Err(Error::input(format!("index {i} appears twice")));
                }
                labels[i] = b;
            }
        }
        Ok(Self::from_labels(&labels))
    }

    /// Groups items by equal label.
    pub fn from_labels<L: Eq + std::hash::Hash + Copy>(labels: &[L]) -> Self {
        let mut slot: HashMap<L, usize> = HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, label) in labels.iter().enumerate() {
            let b = *slot.entry(*label).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(i);
        }
        Partition { blocks }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn num_items(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.blocks
            .iter()
            .any(|b| b.contains(&i) && b.contains(&j))
    }
}

impl TryFrom<Vec<Vec<usize>>> for Partition {
    type Error = Error;

    fn try_from(blocks: Vec<Vec<usize>>) -> Result<Self> {
        Partition::from_blocks(blocks)
    }
}

impl From<Partition> for Vec<Vec<usize>> {
    fn from(p: Partition) -> Self {
        p.blocks
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (b, block) in self.blocks.iter().enumerate() {
            if b > 0 {
                f.write_str(", ")?;
            }
            f.write_str("{")?;
            for (k, i) in block.iter().enumerate() {
                if k > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{i}")?;
            }
            f.write_str("}")?;
        }
        f.write_str("}")
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] += 1;
        }
    }
}

/// Connected components of the undirected graph `(0..n_arms, edges)`.
pub fn connected_components(n_arms: usize, edges: &[(usize, usize)]) -> Result<Partition> {
    let mut dsu = DisjointSet::new(n_arms);
    for &(i, j) in edges {
        for v in [i, j] {
            if v >= n_arms {
                return Err(Error::ArmOutOfRange { arm: v, n_arms });
            }
        }
        dsu.union(i, j);
    }
    let roots: Vec<usize> = (0..n_arms).map(|i| dsu.find(i)).collect();
    Ok(Partition::from_labels(&roots))
}

/// Outcome of one pairwise test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    #[serde(flatten)]
    pub stats: PairStatistics,
    pub threshold: f64,
    /// `mmd_hat ≤ threshold`: same-embedding hypothesis not rejected.
    pub edge: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterTrace {
    pub n: usize,
    pub delta_prime: f64,
    pub mode: ThresholdMode,
    pub pairs: Vec<PairRecord>,
    pub edges: Vec<(usize, usize)>,
    pub partition: Partition,
    pub samples_drawn: u64,
}

/// Runs one fixed-budget clustering round with `n` fresh samples per arm.
///
/// Arm `a` draws from the stream `seed.child(a)`, in arm-index order, so the
/// result does not depend on how the pairwise work is scheduled.
pub fn cluster<B: Bandit>(
    bandit: &B,
    n: usize,
    delta_prime: f64,
    mode: ThresholdMode,
    seed: StreamSeed,
) -> Result<ClusterTrace> {
    if n < 2 {
        return Err(Error::input(format!(
            "per-arm budget must be at least 2, got {n}"
        )));
    }
    if !(delta_prime > 0.0 && delta_prime <= 1.0) {
        return Err(Error::input(format!(
            "confidence must lie in (0, 1], got {delta_prime}"
        )));
    }
    let n_arms = bandit.num_arms();
    let kernel = bandit.kernel();
    let bounds = kernel.bounds();

    let batches = (0..n_arms)
        .map(|arm| bandit.sample(arm, n, &mut seed.child(arm as u64).rng()))
        .collect::<Result<Vec<_>>>()?;
    let samples_drawn = batches.iter().map(|b| b.len() as u64).sum();

    let summaries = batches
        .par_iter()
        .map(|b| ArmSummary::new(kernel, b))
        .collect::<Result<Vec<_>>>()?;
    drop(batches);

    let index_pairs: Vec<(usize, usize)> = (0..n_arms)
        .flat_map(|i| ((i + 1)..n_arms).map(move |j| (i, j)))
        .collect();
    let pairs = index_pairs
        .par_iter()
        .map(|&(i, j)| {
            let stats = summaries[i].pair_statistics(kernel, &summaries[j])?;
            let threshold = match mode {
                ThresholdMode::VarianceAware => threshold(
                    n,
                    delta_prime,
                    n_arms,
                    stats.var_hat_i,
                    stats.var_hat_j,
                    bounds.g_tilde,
                )?,
                ThresholdMode::Subgaussian => {
                    threshold_subgaussian(n, delta_prime, n_arms, bounds.g_bar)?
                }
            };
            Ok(PairRecord {
                i,
                j,
                stats,
                threshold,
                edge: stats.mmd_hat <= threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let edges: Vec<(usize, usize)> = pairs.iter().filter(|p| p.edge).map(|p| (p.i, p.j)).collect();
    let partition = connected_components(n_arms, &edges)?;
    Ok(ClusterTrace {
        n,
        delta_prime,
        mode,
        pairs,
        edges,
        partition,
        samples_drawn,
    })
}

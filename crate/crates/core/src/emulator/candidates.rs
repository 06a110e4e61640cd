use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FitResult, Scorer};
use crate::error::{Error, Result};
use crate::perm::{rank_blocks, for_each_zero_based, sample_benter, Permutation, DEFAULT_ENUMERATION_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum CandidateMode {
    Exhaustive,
    Sampled { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub sequence: Permutation,
    pub f_hat: f64,
    pub f_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// Ordered by decreasing `f_star`, ties by lexicographic order.
    pub candidates: Vec<Candidate>,
    /// Distinct sequences scored, after exclusions.
    pub pool_size: u64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

// Orders so that "greater" means a better candidate.
#[derive(Debug, Clone)]
struct Ranked {
    f_star: f64,
    f_hat: f64,
    items: Vec<usize>,
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.f_star
            .total_cmp(&other.f_star)
            .then_with(|| other.items.cmp(&self.items))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

/// Keeps the `m` best entries seen; the heap top is the weakest kept.
struct TopM {
    m: usize,
    heap: BinaryHeap<std::cmp::Reverse<Ranked>>,
}

impl TopM {
    fn new(m: usize) -> Self {
        TopM { m, heap: BinaryHeap::with_capacity(m.min(1 << 16) + 1) }
    }

    fn offer(&mut self, f_star: f64, f_hat: f64, items: &[usize]) {
        if self.heap.len() == self.m {
            let weakest = &self.heap.peek().expect("non-empty").0;
            match f_star.total_cmp(&weakest.f_star) {
                Ordering::Less => return,
                Ordering::Equal if items >= weakest.items.as_slice() => return,
                _ => {}
            }
            self.heap.pop();
        }
        self.heap.push(std::cmp::Reverse(Ranked { f_star, f_hat, items: items.to_vec() }));
    }

    fn into_vec(self) -> Vec<Ranked> {
        self.heap.into_iter().map(|r| r.0).collect()
    }
}

fn finish(mut all: Vec<Ranked>, m: usize, pool_size: u64, mut warnings: Vec<String>) -> CandidateSet {
    all.sort_by(|a, b| b.cmp(a));
    all.truncate(m);
    if (all.len() as u64) < m as u64 {
        warnings.push(format!("only {} candidates available, {m} requested", all.len()));
    }
    let candidates = all
        .into_iter()
        .map(|r| Candidate { sequence: Permutation::from_zero_based(&r.items), f_hat: r.f_hat, f_star: r.f_star })
        .collect();
    CandidateSet { candidates, pool_size, warnings }
}

/// The `m` sequences outside `exclude` with the highest `f*`.
pub fn propose_candidates(
    fit: &FitResult,
    m: usize,
    mode: CandidateMode,
    exclude: &HashSet<Permutation>,
) -> Result<CandidateSet> {
    if m == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    fit.params.validate()?;
    let j = fit.num_tasks();
    let scorer: Scorer = fit.scorer();
    let regression = &fit.regression;
    if let Some(bad) = exclude.iter().find(|x| x.len() != j) {
        return Err(Error::invalid(format!("excluded sequence {bad} does not have {j} tasks")));
    }

    match mode {
        CandidateMode::Exhaustive => {
            if j > DEFAULT_ENUMERATION_CAP {
                return Err(Error::EnumerationCap { j, cap: DEFAULT_ENUMERATION_CAP });
            }
            let excluded: HashSet<u64> = exclude.iter().map(|x| x.lexicographic_rank()).collect();
            let blocks = rank_blocks(j);
            let parts: Vec<Vec<Ranked>> = blocks
                .par_iter()
                .map(|&(start, count)| {
                    let mut top = TopM::new(m);
                    let mut rank = start;
                    for_each_zero_based(j, start, count, |seq| {
                        if !excluded.contains(&rank) {
                            let f = scorer.value_zero_based(seq);
                            top.offer(regression.evaluate(f), f, seq);
                        }
                        rank += 1;
                    });
                    top.into_vec()
                })
                .collect();
            let total: u64 = blocks.iter().map(|b| b.1).sum();
            let pool = total - excluded.len() as u64;
            Ok(finish(parts.into_iter().flatten().collect(), m, pool, Vec::new()))
        }
        CandidateMode::Sampled { count, seed } => {
            let draws = sample_benter(&fit.params, count, seed)?;
            let mut seen = HashSet::with_capacity(draws.len());
            let pool: Vec<Vec<usize>> = draws
                .into_iter()
                .filter(|x| !exclude.contains(x))
                .filter_map(|x| {
                    let z: Vec<usize> = x.items().iter().map(|i| i - 1).collect();
                    seen.insert(z.clone()).then_some(z)
                })
                .collect();
            let scored: Vec<Ranked> = pool
                .into_par_iter()
                .map(|items| {
                    let f = scorer.value_zero_based(&items);
                    Ranked { f_star: regression.evaluate(f), f_hat: f, items }
                })
                .collect();
            let n = scored.len() as u64;
            Ok(finish(scored, m, n, Vec::new()))
        }
    }
}

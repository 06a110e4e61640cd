use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::perm::{for_each_zero_based, rank_blocks, Permutation, DEFAULT_ENUMERATION_CAP};
use crate::relmodel::ProblemScenario;
use crate::utility::{Evaluator, ExpectedUtility};

/// Utilities differing by less than this count as tied when ranking.
pub const RANK_TIE_TOLERANCE: f64 = 1e-12;

/// Expected utility of every ordering, indexed by lexicographic rank.
#[derive(Debug, Clone)]
pub struct UtilityTable {
    j: usize,
    values: Vec<f64>,
    best_rank: u64,
}

impl UtilityTable {
    pub fn build(evaluator: &Evaluator) -> Result<Self> {
        let j = evaluator.num_tasks();
        if j == 0 {
            return Err(Error::invalid("scenario has no tasks"));
        }
        if j > DEFAULT_ENUMERATION_CAP {
            return Err(Error::EnumerationCap { j, cap: DEFAULT_ENUMERATION_CAP });
        }
        let parts: Vec<Vec<f64>> = rank_blocks(j)
            .into_par_iter()
            .map(|(start, count)| {
                let mut out = Vec::with_capacity(count as usize);
                for_each_zero_based(j, start, count, |seq| out.push(evaluator.utility_zero_based(seq)));
                out
            })
            .collect();
        let values: Vec<f64> = parts.concat();
        // first maximum in lexicographic order
        let mut best = 0usize;
        for (i, v) in values.iter().enumerate() {
            if *v > values[best] {
                best = i;
            }
        }
        Ok(UtilityTable { j, values, best_rank: best as u64 })
    }

    pub fn num_tasks(&self) -> usize {
        self.j
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn best(&self) -> (Permutation, ExpectedUtility) {
        let x = Permutation::from_lexicographic_rank(self.j, self.best_rank).expect("rank in range");
        (x, ExpectedUtility::new(self.values[self.best_rank as usize]))
    }

    pub fn best_value(&self) -> f64 {
        self.values[self.best_rank as usize]
    }

    pub fn utility_of(&self, x: &Permutation) -> Result<f64> {
        if x.len() != self.j {
            return Err(Error::invalid(format!("sequence has {} tasks, table has {}", x.len(), self.j)));
        }
        Ok(self.values[x.lexicographic_rank() as usize])
    }

    /// 1 + number of orderings with utility above `u` (beyond the tie tolerance).
    pub fn rank_of_value(&self, u: f64) -> u64 {
        1 + self.values.iter().filter(|&&v| v > u + RANK_TIE_TOLERANCE).count() as u64
    }

    /// Whether `u` ties the global maximum.
    pub fn is_optimal(&self, u: f64) -> bool {
        u + RANK_TIE_TOLERANCE >= self.best_value()
    }

    /// All `(sequence, u)` sorted by decreasing utility, ties lexicographic.
    pub fn ranked(&self) -> Vec<(Permutation, f64)> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        idx.into_iter()
            .map(|i| {
                (
                    Permutation::from_lexicographic_rank(self.j, i as u64).expect("rank in range"),
                    self.values[i],
                )
            })
            .collect()
    }

    /// The `k` best orderings, as in [`UtilityTable::ranked`].
    pub fn top(&self, k: usize) -> Vec<(Permutation, f64)> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        let k = k.min(idx.len());
        if k == 0 {
            return Vec::new();
        }
        let cmp = |a: &usize, b: &usize| self.values[*b].total_cmp(&self.values[*a]).then(a.cmp(b));
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
        idx.sort_by(cmp);
        idx.into_iter()
            .map(|i| {
                (
                    Permutation::from_lexicographic_rank(self.j, i as u64).expect("rank in range"),
                    self.values[i],
                )
            })
            .collect()
    }
}

/// Global maximiser of the expected utility, ties broken lexicographically.
pub fn exhaustive_optimum(scenario: &ProblemScenario) -> Result<(Permutation, ExpectedUtility)> {
    scenario.validate()?;
    Ok(UtilityTable::build(&Evaluator::new(scenario)?)?.best())
}

//! Permutations of task identifiers and the combinatorics around them.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::emulator::{ModelKind, SurrogateParams};
use crate::error::{Error, Result};
use crate::rng;

/// Default refusal threshold for anything that walks all `J!` orderings.
pub const DEFAULT_ENUMERATION_CAP: usize = 10;

/// An ordering of the task identifiers `1..=J`, each exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(items: Vec<usize>) -> Result<Self> {
        let j = items.len();
        if j == 0 {
            return Err(Error::invalid("a permutation needs at least one item"));
        }
        let mut seen = vec![false; j];
        for (pos, &id) in items.iter().enumerate() {
            if id == 0 || id > j {
                return Err(Error::invalid(format!(
                    "item {id} at position {} is outside 1..={j}",
                    pos + 1
                )));
            }
            if std::mem::replace(&mut seen[id - 1], true) {
                return Err(Error::invalid(format!("item {id} appears more than once")));
            }
        }
        Ok(Permutation(items))
    }

    /// Build from 0-based indices without re-validating. Callers guarantee a permutation.
    pub(crate) fn from_zero_based(items: &[usize]) -> Self {
        Permutation(items.iter().map(|&i| i + 1).collect())
    }

    pub fn identity(j: usize) -> Self {
        Permutation((1..=j).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn items(&self) -> &[usize] {
        &self.0
    }

    pub fn reversed(&self) -> Self {
        Permutation(self.0.iter().rev().copied().collect())
    }

    /// Task at 0-based position, as a 0-based index.
    pub(crate) fn zero_based(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&i| i - 1)
    }

    /// `positions()[id - 1]` is the 0-based position of `id`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (p, &id) in self.0.iter().enumerate() {
            pos[id - 1] = p;
        }
        pos
    }

    /// 0-based lexicographic rank among all permutations of the same length.
    pub fn lexicographic_rank(&self) -> u64 {
        let j = self.0.len();
        let mut used = vec![false; j];
        let mut rank = 0u64;
        for (p, &id) in self.0.iter().enumerate() {
            let smaller_unused = (1..id).filter(|&k| !used[k - 1]).count() as u64;
            rank += smaller_unused * factorial_u64(j - 1 - p);
            used[id - 1] = true;
        }
        rank
    }

    /// Inverse of [`Permutation::lexicographic_rank`].
    pub fn from_lexicographic_rank(j: usize, mut rank: u64) -> Result<Self> {
        if j == 0 || rank >= factorial_u64(j) {
            return Err(Error::invalid(format!("rank {rank} out of range for J={j}")));
        }
        let mut pool: Vec<usize> = (1..=j).collect();
        let mut items = Vec::with_capacity(j);
        for p in 0..j {
            let f = factorial_u64(j - 1 - p);
            let idx = (rank / f) as usize;
            rank %= f;
            items.push(pool.remove(idx));
        }
        Ok(Permutation(items))
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join("-"))
    }
}

/// Accepts `8,6,4,3`, `8-6-4-3` or whitespace separated ids.
impl FromStr for Permutation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let items = s
            .split(|c: char| c == ',' || c == '-' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::invalid(format!("'{t}' is not a task id")))
            })
            .collect::<Result<Vec<_>>>()?;
        Permutation::new(items)
    }
}

pub(crate) fn factorial_u64(n: usize) -> u64 {
    (1..=n as u64).product()
}

pub fn factorial(n: usize) -> BigUint {
    (1..=n as u64).fold(BigUint::one(), |acc, k| acc * k)
}

/// Number of pairwise discordances between two orderings of the same tasks.
pub fn kendall_distance(a: &Permutation, b: &Permutation) -> Result<u64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let pos_b = b.positions();
    let mapped: Vec<usize> = a.items().iter().map(|&id| pos_b[id - 1]).collect();
    Ok(inversions(&mapped))
}

/// Inversion count of a sequence by pair counting.
pub fn inversions(seq: &[usize]) -> u64 {
    let mut count = 0u64;
    for i in 0..seq.len() {
        for k in i + 1..seq.len() {
            if seq[i] > seq[k] {
                count += 1;
            }
        }
    }
    count
}

/// Cumulative Mahonian counts: `C_{r,d}` = number of permutations of `r`
/// items with at most `d` inversions.
///
/// Only the rows `r-2`, `r-1` and `r` are kept, truncated at `max_delta`,
/// which is what the top-`M` probability results need. That keeps the
/// build at `O(r * max_delta)` big-integer additions.
#[derive(Debug, Clone)]
pub struct MahonianTable {
    r: usize,
    max_delta: usize,
    // rows[k] holds row r - 2 + k (rows below 0 are never requested)
    rows: [Vec<BigUint>; 3],
    factorials: [BigUint; 3],
}

impl MahonianTable {
    pub fn new(r: usize, max_delta: usize) -> Self {
        let mut prev = vec![BigUint::one()]; // row 0: C_{0,0} = 1
        let mut prev_fact = BigUint::one();
        let mut rows: [Vec<BigUint>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut facts = [BigUint::zero(), BigUint::zero(), BigUint::zero()];
        let keep = |row: usize| row + 2 >= r;
        if keep(0) {
            let slot = 2 - r;
            rows[slot] = prev.clone();
            facts[slot] = prev_fact.clone();
        }
        for row in 1..=r {
            let width = (max_pairs(row) as usize).min(max_delta) + 1;
            let get = |l: isize| -> BigUint {
                if l < 0 {
                    BigUint::zero()
                } else if (l as usize) < prev.len() {
                    prev[l as usize].clone()
                } else {
                    // beyond the previous row's range every permutation qualifies
                    prev_fact.clone()
                }
            };
            let mut cur = Vec::with_capacity(width);
            let mut window = BigUint::zero();
            for d in 0..width as isize {
                window += get(d);
                let drop = d - row as isize;
                if drop >= 0 {
                    window -= get(drop);
                }
                cur.push(window.clone());
            }
            let fact = prev_fact * BigUint::from(row as u64);
            if keep(row) {
                let slot = row + 2 - r;
                rows[slot] = cur.clone();
                facts[slot] = fact.clone();
            }
            prev = cur;
            prev_fact = fact;
        }
        MahonianTable {
            r,
            max_delta,
            rows,
            factorials: facts,
        }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// `T = r(r-1)/2` for the table's top row.
    pub fn max_distance(&self) -> u64 {
        max_pairs(self.r)
    }

    /// `C_{row,d}` for `row` in `r-2..=r`. Negative `d` gives 0, `d` past the
    /// row's maximum distance gives `row!`.
    pub fn cumulative(&self, row: usize, d: i64) -> Result<BigUint> {
        if row > self.r || row + 2 < self.r {
            return Err(Error::invalid(format!(
                "row {row} not retained (table top row {})",
                self.r
            )));
        }
        let slot = row + 2 - self.r;
        if d < 0 {
            return Ok(BigUint::zero());
        }
        let d = d as u64;
        if d > max_pairs(row) {
            return Ok(self.factorials[slot].clone());
        }
        if d as usize > self.max_delta {
            return Err(Error::invalid(format!(
                "distance {d} beyond table truncation {}",
                self.max_delta
            )));
        }
        Ok(self.rows[slot][d as usize].clone())
    }

    /// `N_{row,d} = C_{row,d} - C_{row,d-1}`; zero outside `0..=T_row`.
    pub fn exact(&self, row: usize, d: i64) -> Result<BigUint> {
        if d < 0 || d as u64 > max_pairs(row) {
            return Ok(BigUint::zero());
        }
        Ok(self.cumulative(row, d)? - self.cumulative(row, d - 1)?)
    }
}

pub(crate) fn max_pairs(r: usize) -> u64 {
    let r = r as u64;
    r * r.saturating_sub(1) / 2
}

/// `C_{r,delta}`: permutations of `r` items with at most `delta` inversions.
pub fn cumulative_inversion_count(r: i64, delta: i64) -> Result<BigUint> {
    if r < 0 {
        return Err(Error::invalid(format!("R must be non-negative, got {r}")));
    }
    let r = r as usize;
    if delta < 0 {
        return Ok(BigUint::zero());
    }
    if delta as u64 >= max_pairs(r) {
        return Ok(factorial(r));
    }
    MahonianTable::new(r, delta as usize).cumulative(r, delta)
}

/// `N_{r,delta}`: permutations of `r` items with exactly `delta` inversions.
pub fn permutations_at_distance_count(r: usize, delta: u64) -> Result<BigUint> {
    let t = max_pairs(r);
    if delta > t {
        return Err(Error::invalid(format!("delta {delta} outside 0..={t} for R={r}")));
    }
    MahonianTable::new(r, delta as usize).exact(r, delta as i64)
}

/// All permutations of `1..=j` in lexicographic order.
#[derive(Debug, Clone)]
pub struct Lexicographic {
    current: Option<Vec<usize>>,
    remaining: u64,
}

impl Lexicographic {
    /// Walk `count` permutations starting at lexicographic rank `start`.
    pub fn range(j: usize, start: u64, count: u64) -> Result<Self> {
        let total = factorial_u64(j);
        if start > total {
            return Err(Error::invalid("start rank beyond J!"));
        }
        let current = if start < total {
            Some(Permutation::from_lexicographic_rank(j, start)?.0)
        } else {
            None
        };
        Ok(Lexicographic {
            current,
            remaining: count.min(total - start),
        })
    }
}

impl Iterator for Lexicographic {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        if self.remaining == 0 {
            return None;
        }
        let cur = self.current.as_mut()?;
        let out = Permutation(cur.clone());
        self.remaining -= 1;
        if !next_permutation(cur) {
            self.current = None;
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining as usize;
        (n, Some(n))
    }
}

/// Advance to the next lexicographic permutation in place; false at the last one.
pub(crate) fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut k = n - 1;
    while v[k] <= v[i - 1] {
        k -= 1;
    }
    v.swap(i - 1, k);
    v[i..].reverse();
    true
}

/// Visit `count` permutations of `0..j` (0-based) from lexicographic rank
/// `start`, reusing one buffer.
pub(crate) fn for_each_zero_based(j: usize, start: u64, count: u64, mut f: impl FnMut(&[usize])) {
    let Ok(first) = Permutation::from_lexicographic_rank(j, start) else {
        return;
    };
    let mut cur: Vec<usize> = first.zero_based().collect();
    for _ in 0..count {
        f(&cur);
        if !next_permutation(&mut cur) {
            break;
        }
    }
}

/// Split all `j!` lexicographic ranks into contiguous `(start, count)` blocks.
pub(crate) fn rank_blocks(j: usize) -> Vec<(u64, u64)> {
    let total = factorial_u64(j);
    let block = if j > 3 { factorial_u64(j - 2) } else { total };
    (0..total)
        .step_by(block as usize)
        .map(|s| (s, block.min(total - s)))
        .collect()
}

pub fn enumerate_permutations(j: usize) -> Result<Lexicographic> {
    enumerate_permutations_with_cap(j, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_permutations_with_cap(j: usize, cap: usize) -> Result<Lexicographic> {
    if j == 0 {
        return Err(Error::invalid("J must be at least 1"));
    }
    if j > cap {
        return Err(Error::EnumerationCap { j, cap });
    }
    Lexicographic::range(j, 0, factorial_u64(j))
}

/// Draw `count` orderings stagewise from a Benter model: at stage `j` task
/// `k` is picked from those remaining with weight `theta_k^alpha_j`.
///
/// Reverse Plackett-Luce parameters sample the reversed ordering from the
/// Plackett-Luce form. Duplicates are kept.
pub fn sample_benter(params: &SurrogateParams, count: usize, seed: u64) -> Result<Vec<Permutation>> {
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    params.validate()?;
    let mut rng = rng::stream(seed, &[0x5A_4D_50_4C]);
    let j = params.theta.len();
    let log_theta: Vec<f64> = params.theta.iter().map(|t| t.ln()).collect();
    let mut out = Vec::with_capacity(count);
    let mut remaining: Vec<usize> = Vec::with_capacity(j);
    let mut weights: Vec<f64> = Vec::with_capacity(j);
    for _ in 0..count {
        remaining.clear();
        remaining.extend(0..j);
        let mut seq = Vec::with_capacity(j);
        for stage in 0..j {
            let a = params.alpha[stage];
            weights.clear();
            // scale by the max log-weight before exponentiating
            let top = remaining
                .iter()
                .map(|&k| a * log_theta[k])
                .fold(f64::NEG_INFINITY, f64::max);
            weights.extend(remaining.iter().map(|&k| (a * log_theta[k] - top).exp()));
            let total: f64 = weights.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = remaining.len() - 1;
            for (idx, w) in weights.iter().enumerate() {
                if u < *w {
                    pick = idx;
                    break;
                }
                u -= w;
            }
            seq.push(remaining.remove(pick));
        }
        let perm = Permutation::from_zero_based(&seq);
        out.push(match params.model {
            ModelKind::ReversePlackettLuce => perm.reversed(),
            _ => perm,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[usize]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_permutations() {
        assert!(Permutation::new(vec![]).is_err());
        assert!(Permutation::new(vec![1, 1]).is_err());
        assert!(Permutation::new(vec![0, 1]).is_err());
        assert!(Permutation::new(vec![1, 3]).is_err());
        assert_eq!("8,6,4,3,1,7,9,2,5".parse::<Permutation>().unwrap().len(), 9);
    }

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall_distance(&p(&[1, 2, 3]), &p(&[1, 2, 3])).unwrap(), 0);
        assert_eq!(kendall_distance(&p(&[1, 2, 3]), &p(&[3, 2, 1])).unwrap(), 3);
        assert_eq!(kendall_distance(&p(&[1, 2, 3]), &p(&[2, 1, 3])).unwrap(), 1);
        assert!(kendall_distance(&p(&[1, 2]), &p(&[1, 2, 3])).is_err());
    }

    #[test]
    fn cumulative_examples() {
        assert_eq!(cumulative_inversion_count(5, 0).unwrap(), BigUint::from(1u32));
        assert_eq!(cumulative_inversion_count(3, 1).unwrap(), BigUint::from(3u32));
        assert_eq!(cumulative_inversion_count(3, 3).unwrap(), BigUint::from(6u32));
        assert_eq!(cumulative_inversion_count(3, 40).unwrap(), BigUint::from(6u32));
        assert!(cumulative_inversion_count(-1, 0).is_err());
    }

    #[test]
    fn exact_count_examples() {
        assert_eq!(permutations_at_distance_count(3, 0).unwrap(), BigUint::from(1u32));
        assert_eq!(permutations_at_distance_count(3, 1).unwrap(), BigUint::from(2u32));
        assert_eq!(permutations_at_distance_count(4, 3).unwrap(), BigUint::from(6u32));
        assert!(permutations_at_distance_count(3, 4).is_err());
    }

    #[test]
    fn large_r_with_small_delta_is_cheap() {
        // C_{R,1} = R for R >= 1
        let t = MahonianTable::new(5000, 1);
        assert_eq!(t.cumulative(5000, 1).unwrap(), BigUint::from(5000u32));
        assert_eq!(t.exact(4999, 1).unwrap(), BigUint::from(4998u32));
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let all: Vec<_> = enumerate_permutations(3).unwrap().collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], p(&[1, 2, 3]));
        assert_eq!(all[5], p(&[3, 2, 1]));
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(enumerate_permutations(1).unwrap().collect::<Vec<_>>(), vec![p(&[1])]);
        assert!(matches!(enumerate_permutations(11), Err(Error::EnumerationCap { .. })));
    }

    #[test]
    fn nine_tasks_give_362880_orderings() {
        assert_eq!(enumerate_permutations(9).unwrap().count(), 362_880);
    }

    #[test]
    fn rank_round_trip() {
        for (r, perm) in enumerate_permutations(5).unwrap().enumerate() {
            assert_eq!(perm.lexicographic_rank(), r as u64);
            assert_eq!(Permutation::from_lexicographic_rank(5, r as u64).unwrap(), perm);
        }
        let tail: Vec<_> = Lexicographic::range(4, 20, 100).unwrap().collect();
        assert_eq!(tail.len(), 4);
        assert_eq!(tail[3], p(&[4, 3, 2, 1]));
    }

    #[test]
    fn single_task_sampling() {
        let params = SurrogateParams::benter(vec![2.0], vec![0.0]).unwrap();
        let draws = sample_benter(&params, 10, 3).unwrap();
        assert!(draws.iter().all(|d| *d == p(&[1])));
    }

    #[test]
    fn sampling_rejects_bad_params() {
        let params = SurrogateParams {
            theta: vec![1.0, -1.0],
            alpha: vec![1.0, 0.0],
            model: ModelKind::Benter,
        };
        assert!(sample_benter(&params, 5, 1).is_err());
    }
}

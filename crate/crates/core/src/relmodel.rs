//! Reliability growth model.
//!
//! Each concern `i` is a fault with probability `lambda_i`. A performed task
//! `j` exposes a real fault with probability `p_{i,j}`, and an exposed fault
//! is designed out. Reliability over the mission is the product of the
//! component reliabilities of the faults that survive the program.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::utility::TradeoffWeights;

/// Lifetime family of a fault once realised. Only the exponential ships.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReliabilityFamily {
    #[default]
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concern {
    pub lambda: f64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "is_default_family")]
    pub family: ReliabilityFamily,
}

fn is_default_family(f: &ReliabilityFamily) -> bool {
    *f == ReliabilityFamily::Exponential
}

impl Concern {
    pub fn new(lambda: f64, epsilon: f64) -> Self {
        Concern {
            lambda,
            epsilon,
            family: ReliabilityFamily::Exponential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub cost: f64,
    pub time: f64,
    /// Detection probability for each concern, `p_{i,j}`.
    pub detect: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemScenario {
    pub concerns: Vec<Concern>,
    pub tasks: Vec<TaskSpec>,
    pub mission_time: f64,
    pub target: f64,
    pub max_cost: f64,
    pub max_time: f64,
    pub weights: TradeoffWeights,
}

fn unit_interval(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl ProblemScenario {
    pub fn num_concerns(&self) -> usize {
        self.concerns.len()
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// Check every invariant, returning warnings for conditions that are
    /// allowed but worth reporting.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.concerns.is_empty() {
            return Err(Error::validation("concerns", None, "at least one concern is required"));
        }
        if self.tasks.is_empty() {
            return Err(Error::validation("tasks", None, "at least one task is required"));
        }
        for (i, c) in self.concerns.iter().enumerate() {
            if !unit_interval(c.lambda) {
                return Err(Error::validation("concerns.lambda", Some(i), format!("{} not in [0,1]", c.lambda)));
            }
            if !(c.epsilon >= 0.0 && c.epsilon.is_finite()) {
                return Err(Error::validation("concerns.epsilon", Some(i), format!("{} must be >= 0", c.epsilon)));
            }
        }
        let n_concerns = self.concerns.len();
        for (j, t) in self.tasks.iter().enumerate() {
            if t.detect.len() != n_concerns {
                return Err(Error::validation(
                    "tasks.detect",
                    Some(j),
                    format!("expected {n_concerns} entries, found {}", t.detect.len()),
                ));
            }
            if let Some((i, p)) = t.detect.iter().enumerate().find(|(_, p)| !unit_interval(**p)) {
                return Err(Error::validation(
                    "tasks.detect",
                    Some(j),
                    format!("concern {i}: {p} not in [0,1]"),
                ));
            }
            if !(t.cost >= 0.0 && t.cost.is_finite()) {
                return Err(Error::validation("tasks.cost", Some(j), format!("{} must be >= 0", t.cost)));
            }
            if !(t.time >= 0.0 && t.time.is_finite()) {
                return Err(Error::validation("tasks.time", Some(j), format!("{} must be >= 0", t.time)));
            }
        }
        if !(self.mission_time >= 0.0 && self.mission_time.is_finite()) {
            return Err(Error::validation("mission_time", None, "must be >= 0"));
        }
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(Error::validation("target", None, format!("{} not in (0,1)", self.target)));
        }
        if !(self.max_cost > 0.0 && self.max_cost.is_finite()) {
            return Err(Error::validation("max_cost", None, "must be > 0"));
        }
        if !(self.max_time > 0.0 && self.max_time.is_finite()) {
            return Err(Error::validation("max_time", None, "must be > 0"));
        }
        self.weights.validate()?;

        let mut warnings = Vec::new();
        let total_cost: f64 = self.tasks.iter().map(|t| t.cost).sum();
        let total_time: f64 = self.tasks.iter().map(|t| t.time).sum();
        if total_cost > self.max_cost {
            warnings.push(format!(
                "running every task costs {total_cost}, above max_cost {}; cost utilities can go negative",
                self.max_cost
            ));
        }
        if total_time > self.max_time {
            warnings.push(format!(
                "running every task takes {total_time}, above max_time {}; time utilities can go negative",
                self.max_time
            ));
        }
        let all: Vec<usize> = (1..=self.tasks.len()).collect();
        let full = rare_event_moments(self, &all, self.mission_time)?;
        if full.m > 0.0 {
            warnings.push(format!(
                "rare-event mean log-reliability reaches {:.4} > 0 with all tasks performed",
                full.m
            ));
        }
        Ok(warnings)
    }

    pub(crate) fn check_task_ids(&self, performed: &[usize]) -> Result<()> {
        let j = self.tasks.len();
        let mut seen = vec![false; j];
        for &id in performed {
            if id == 0 || id > j {
                return Err(Error::invalid(format!("unknown task id {id} (J={j})")));
            }
            if std::mem::replace(&mut seen[id - 1], true) {
                return Err(Error::invalid(format!("task {id} listed twice")));
            }
        }
        Ok(())
    }
}

/// Mean and variance of the log-reliability under the Normal approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityMoments {
    pub m: f64,
    pub v: f64,
}

/// `R_i(t) = exp(-epsilon_i t)`.
pub fn component_reliability(concern: &Concern, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be non-negative, got {t}")));
    }
    match concern.family {
        ReliabilityFamily::Exponential => Ok((-concern.epsilon * t).exp()),
    }
}

/// Probability that a concern is a fault given none of the performed tasks exposed it.
pub fn posterior_fault_prob(lambda: f64, detect_probs: &[f64]) -> Result<f64> {
    if !unit_interval(lambda) {
        return Err(Error::invalid(format!("lambda {lambda} not in [0,1]")));
    }
    if let Some(p) = detect_probs.iter().find(|p| !unit_interval(**p)) {
        return Err(Error::invalid(format!("detection probability {p} not in [0,1]")));
    }
    let miss: f64 = detect_probs.iter().map(|p| 1.0 - p).product();
    let denom = 1.0 - lambda * (1.0 - miss);
    if denom == 0.0 {
        // lambda = 1 and certain detection: the event D_i = 0 cannot happen
        return Ok(0.0);
    }
    Ok(lambda * miss / denom)
}

/// Prior expectation of system reliability after performing `performed`:
/// `prod_i [1 - (1 - R_i(t)) lambda_i prod_j (1 - p_ij)]`.
pub fn expected_reliability(scenario: &ProblemScenario, performed: &[usize], t: f64) -> Result<f64> {
    scenario.check_task_ids(performed)?;
    let mut out = 1.0;
    for (i, c) in scenario.concerns.iter().enumerate() {
        let miss: f64 = performed
            .iter()
            .map(|&j| 1.0 - scenario.tasks[j - 1].detect[i])
            .product();
        out *= 1.0 - (1.0 - component_reliability(c, t)?) * c.lambda * miss;
    }
    Ok(out)
}

/// Largest joint configuration count the brute-force oracle will walk.
pub const ORACLE_MAX_CONFIGURATIONS: u128 = 1 << 24;
pub const ORACLE_MAX_CONCERNS: usize = 12;

/// Brute-force expectation of `prod_i R_i(t)^{1[z_i > d_i]}` over every
/// fault vector `z` and every per-task detection outcome, jointly.
///
/// A fault exposed by any performed task is designed out. Only performed
/// tasks are enumerated.
pub fn oracle_expected_reliability(scenario: &ProblemScenario, performed: &[usize], t: f64) -> Result<f64> {
    scenario.check_task_ids(performed)?;
    let n = scenario.concerns.len();
    if n > ORACLE_MAX_CONCERNS {
        return Err(Error::OracleTooLarge(format!(
            "{n} concerns exceeds the oracle limit of {ORACLE_MAX_CONCERNS}"
        )));
    }
    let k = performed.len();
    // per concern: z = 0, or z = 1 with one of 2^k detection patterns
    let radix = 1u128 + (1u128 << k);
    let total = radix.checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > ORACLE_MAX_CONFIGURATIONS {
        return Err(Error::OracleTooLarge(format!(
            "{total} joint configurations exceed {ORACLE_MAX_CONFIGURATIONS}"
        )));
    }
    let rel: Vec<f64> = scenario
        .concerns
        .iter()
        .map(|c| component_reliability(c, t))
        .collect::<Result<_>>()?;
    let radix = radix as u64;
    let mut expectation = 0.0;
    let mut digits = vec![0u64; n];
    for _ in 0..total as u64 {
        let mut prob = 1.0;
        let mut reliability = 1.0;
        for (i, &digit) in digits.iter().enumerate() {
            let lambda = scenario.concerns[i].lambda;
            if digit == 0 {
                prob *= 1.0 - lambda;
                continue;
            }
            prob *= lambda;
            let pattern = digit - 1;
            let mut detected = false;
            for (b, &task) in performed.iter().enumerate() {
                let p = scenario.tasks[task - 1].detect[i];
                if pattern >> b & 1 == 1 {
                    prob *= p;
                    detected = true;
                } else {
                    prob *= 1.0 - p;
                }
            }
            if !detected {
                reliability *= rel[i];
            }
        }
        expectation += prob * reliability;
        // mixed-radix increment
        for d in digits.iter_mut() {
            *d += 1;
            if *d < radix {
                break;
            }
            *d = 0;
        }
    }
    Ok(expectation)
}

/// Per-task additive terms of the rare-event moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct MomentTerms {
    /// `sum_i a_i (1 - p_ij)`, added to the mean when task `j` is performed.
    pub mean_shift: f64,
    /// `sum_i a_i^2 (1 - p_ij) p_ij`.
    pub variance: f64,
}

/// Baseline mean `-sum_i a_i` and per-task terms, with `a_i = (1 - R_i(t)) lambda_i`.
pub(crate) fn moment_terms(scenario: &ProblemScenario, t: f64) -> Result<(f64, Vec<MomentTerms>)> {
    let a: Vec<f64> = scenario
        .concerns
        .iter()
        .map(|c| Ok((1.0 - component_reliability(c, t)?) * c.lambda))
        .collect::<Result<_>>()?;
    let base = -a.iter().sum::<f64>();
    let terms = scenario
        .tasks
        .iter()
        .map(|task| {
            let mut mean_shift = 0.0;
            let mut variance = 0.0;
            for (ai, &p) in a.iter().zip(&task.detect) {
                mean_shift += ai * (1.0 - p);
                variance += ai * ai * (1.0 - p) * p;
            }
            MomentTerms { mean_shift, variance }
        })
        .collect();
    Ok((base, terms))
}

/// Rare-event moments of `g = log R(t, z)`:
///
/// `m = -[sum_i a_i - sum_i a_i sum_j k_j (1 - p_ij)]`,
/// `v = sum_i a_i^2 sum_j k_j (1 - p_ij) p_ij`,
///
/// evaluated as printed. `m` can come out positive once several tasks are
/// performed; it is not clamped.
pub fn rare_event_moments(scenario: &ProblemScenario, performed: &[usize], t: f64) -> Result<ReliabilityMoments> {
    scenario.check_task_ids(performed)?;
    let (base, terms) = moment_terms(scenario, t)?;
    let mut m = base;
    let mut v = 0.0;
    for &j in performed {
        m += terms[j - 1].mean_shift;
        v += terms[j - 1].variance;
    }
    Ok(ReliabilityMoments { m, v })
}

/// Upper tail of the standard Normal, `1 - Phi(z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// `Pr(g >= log R0)` for `g ~ N(m, v)`; a step at `m` when `v = 0`.
pub fn prob_meets_target(moments: ReliabilityMoments, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("target {target} not in (0,1)")));
    }
    Ok(attain_probability(moments.m, moments.v, target.ln()))
}

#[inline]
pub(crate) fn attain_probability(m: f64, v: f64, log_target: f64) -> f64 {
    if v > 0.0 {
        normal_sf((log_target - m) / v.sqrt())
    } else if m >= log_target {
        1.0
    } else {
        0.0
    }
}

//! Expected utility of a task ordering under the stop-at-target rule.
//!
//! Tasks run in order until the reliability target is attained. With
//! `alpha_j` the probability that the target holds after the first `j` tasks,
//! stopping at stage `j` has weight `w_j = alpha_j prod_{k<j} (1 - alpha_k)`,
//! and the mass `w_0 = prod_k (1 - alpha_k)` that never attains pays for the
//! full program.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::relmodel::{attain_probability, moment_terms, MomentTerms, ProblemScenario};

pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Logit is taken after clamping the utility into `[LOGIT_CLAMP, 1 - LOGIT_CLAMP]`.
pub const LOGIT_CLAMP: f64 = 1e-12;

/// Trade-off parameters of the two-attribute utility
/// `q1 U(C) + q2 U(T) + q3 U(C) U(T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffWeights {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl TradeoffWeights {
    pub fn new(q1: f64, q2: f64, q3: f64) -> Result<Self> {
        let w = TradeoffWeights { q1, q2, q3 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let TradeoffWeights { q1, q2, q3 } = *self;
        if !(q1 >= 0.0 && q2 >= 0.0) {
            return Err(Error::validation("weights", None, "q1 and q2 must be non-negative"));
        }
        if (q1 + q2 + q3 - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::validation("weights", None, format!("q1+q2+q3 = {} != 1", q1 + q2 + q3)));
        }
        let tol = WEIGHT_SUM_TOLERANCE;
        if q3 < -q1.min(q2) - tol || q3 > 1.0 - q1.max(q2) + tol {
            return Err(Error::validation(
                "weights",
                None,
                format!("q3 = {q3} outside [-min(q1,q2), 1-max(q1,q2)]"),
            ));
        }
        Ok(())
    }
}

/// A value of the expected utility together with its logit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedUtility {
    pub value: f64,
    pub logit: f64,
}

impl ExpectedUtility {
    pub fn new(value: f64) -> Self {
        ExpectedUtility { value, logit: logit(value) }
    }
}

pub fn logit(u: f64) -> f64 {
    let u = u.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP);
    (u / (1.0 - u)).ln()
}

pub fn inverse_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-stage breakdown of one ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub sequence: Permutation,
    pub cum_cost: Vec<f64>,
    pub cum_time: Vec<f64>,
    /// `alpha_j`: probability the target holds after the first `j` tasks.
    pub attain_prob: Vec<f64>,
    /// `w_j`: probability testing stops right after stage `j`.
    pub first_attain_prob: Vec<f64>,
    /// Probability the target is never attained.
    pub residual_prob: f64,
    /// Mean log-reliability after each stage (rare-event approximation).
    pub mean_log_reliability: Vec<f64>,
    pub variance_log_reliability: Vec<f64>,
}

/// `1 - (amount / maximum)^2`. Goes negative past the maximum.
pub fn marginal_utility(amount: f64, maximum: f64) -> f64 {
    let r = amount / maximum;
    1.0 - r * r
}

pub fn stage_utility(cum_cost: f64, cum_time: f64, scenario: &ProblemScenario) -> f64 {
    combine(
        &scenario.weights,
        marginal_utility(cum_cost, scenario.max_cost),
        marginal_utility(cum_time, scenario.max_time),
    )
}

#[inline]
fn combine(w: &TradeoffWeights, uc: f64, ut: f64) -> f64 {
    w.q1 * uc + w.q2 * ut + w.q3 * uc * ut
}

/// What the evaluator sees at each stage.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StageRecord {
    pub cum_cost: f64,
    pub cum_time: f64,
    pub m: f64,
    pub v: f64,
    pub alpha: f64,
    pub weight: f64,
}

/// Precomputed scenario terms for fast repeated expected-utility evaluation.
///
/// Immutable after construction; share it freely across threads.
#[derive(Debug, Clone)]
pub struct Evaluator {
    base_mean: f64,
    terms: Vec<MomentTerms>,
    log_target: f64,
    costs: Vec<f64>,
    times: Vec<f64>,
    max_cost: f64,
    max_time: f64,
    weights: TradeoffWeights,
}

impl Evaluator {
    pub fn new(scenario: &ProblemScenario) -> Result<Self> {
        if !(scenario.target > 0.0 && scenario.target < 1.0) {
            return Err(Error::invalid(format!("target {} not in (0,1)", scenario.target)));
        }
        let (base_mean, terms) = moment_terms(scenario, scenario.mission_time)?;
        Ok(Evaluator {
            base_mean,
            terms,
            log_target: scenario.target.ln(),
            costs: scenario.tasks.iter().map(|t| t.cost).collect(),
            times: scenario.tasks.iter().map(|t| t.time).collect(),
            max_cost: scenario.max_cost,
            max_time: scenario.max_time,
            weights: scenario.weights,
        })
    }

    pub fn num_tasks(&self) -> usize {
        self.costs.len()
    }

    /// Expected utility for an ordering given as 0-based task indices.
    #[inline]
    pub fn utility_zero_based(&self, seq: &[usize]) -> f64 {
        self.walk(seq, |_| {})
    }

    pub fn utility(&self, x: &Permutation) -> Result<ExpectedUtility> {
        self.check(x)?;
        let seq: Vec<usize> = x.zero_based().collect();
        Ok(ExpectedUtility::new(self.utility_zero_based(&seq)))
    }

    fn check(&self, x: &Permutation) -> Result<()> {
        if x.len() != self.costs.len() {
            return Err(Error::invalid(format!(
                "sequence has {} tasks, scenario has {}",
                x.len(),
                self.costs.len()
            )));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn walk(&self, seq: &[usize], mut on_stage: impl FnMut(StageRecord)) -> f64 {
        let mut m = self.base_mean;
        let mut v = 0.0;
        let mut cost = 0.0;
        let mut time = 0.0;
        let mut survive = 1.0;
        let mut total = 0.0;
        let mut last = 0.0;
        for &task in seq {
            let t = &self.terms[task];
            m += t.mean_shift;
            v += t.variance;
            cost += self.costs[task];
            time += self.times[task];
            let alpha = attain_probability(m, v, self.log_target);
            let weight = alpha * survive;
            survive *= 1.0 - alpha;
            last = combine(
                &self.weights,
                marginal_utility(cost, self.max_cost),
                marginal_utility(time, self.max_time),
            );
            total += weight * last;
            on_stage(StageRecord { cum_cost: cost, cum_time: time, m, v, alpha, weight });
        }
        total + survive * last
    }

    pub fn stage_plan(&self, x: &Permutation) -> Result<(StagePlan, ExpectedUtility)> {
        self.check(x)?;
        let seq: Vec<usize> = x.zero_based().collect();
        let j = seq.len();
        let mut plan = StagePlan {
            sequence: x.clone(),
            cum_cost: Vec::with_capacity(j),
            cum_time: Vec::with_capacity(j),
            attain_prob: Vec::with_capacity(j),
            first_attain_prob: Vec::with_capacity(j),
            residual_prob: 0.0,
            mean_log_reliability: Vec::with_capacity(j),
            variance_log_reliability: Vec::with_capacity(j),
        };
        let mut survive = 1.0;
        let value = self.walk(&seq, |s| {
            plan.cum_cost.push(s.cum_cost);
            plan.cum_time.push(s.cum_time);
            plan.attain_prob.push(s.alpha);
            plan.first_attain_prob.push(s.weight);
            plan.mean_log_reliability.push(s.m);
            plan.variance_log_reliability.push(s.v);
            survive *= 1.0 - s.alpha;
        });
        plan.residual_prob = survive;
        Ok((plan, ExpectedUtility::new(value)))
    }
}

pub fn build_stage_plan(scenario: &ProblemScenario, x: &Permutation) -> Result<StagePlan> {
    Ok(Evaluator::new(scenario)?.stage_plan(x)?.0)
}

pub fn expected_utility(scenario: &ProblemScenario, x: &Permutation) -> Result<ExpectedUtility> {
    Evaluator::new(scenario)?.utility(x)
}

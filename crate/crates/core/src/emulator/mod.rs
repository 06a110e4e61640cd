//! Ranking-model surrogate for the expected utility.
//!
//! The surrogate of an ordering `x` is the Benter log-likelihood
//!
//! ```text
//! f(x; theta, alpha) = sum_j [ alpha_j log theta_{x_j} - log sum_{m >= j} theta_{x_m}^alpha_j ]
//! ```
//!
//! read as a function of `x` at fixed parameters. Plackett-Luce is the
//! special case `alpha = 1`; reverse Plackett-Luce scores the reversed
//! ordering under Plackett-Luce.

mod candidates;
mod correlation;
mod fit;
mod regression;
mod simplex;

pub use candidates::{propose_candidates, Candidate, CandidateMode, CandidateSet};
pub use correlation::{correlation, CorrelationKind};
pub use fit::{adjusted_value, fit_surrogate, inverse_logit_value, FitConfig, FitResult, TrainingSet};
pub use regression::{regression_adjust, RegressionFit};
pub use simplex::{minimize, SimplexOptions, SimplexOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::Permutation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "benter")]
    Benter,
    #[serde(rename = "pl")]
    PlackettLuce,
    #[serde(rename = "rpl")]
    ReversePlackettLuce,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Benter => "benter",
            ModelKind::PlackettLuce => "pl",
            ModelKind::ReversePlackettLuce => "rpl",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "benter" | "b" => Ok(ModelKind::Benter),
            "pl" | "plackett-luce" => Ok(ModelKind::PlackettLuce),
            "rpl" | "reverse-pl" => Ok(ModelKind::ReversePlackettLuce),
            other => Err(Error::invalid(format!("unknown model '{other}'"))),
        }
    }
}

/// Surrogate parameters `(theta, alpha)` with `alpha_J = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub theta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub model: ModelKind,
}

impl SurrogateParams {
    pub fn benter(theta: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        let p = SurrogateParams { theta, alpha, model: ModelKind::Benter };
        p.validate()?;
        Ok(p)
    }

    /// Plackett-Luce or its reverse: `alpha = (1, ..., 1, 0)`.
    pub fn plackett_luce(theta: Vec<f64>, model: ModelKind) -> Result<Self> {
        let j = theta.len();
        let mut alpha = vec![1.0; j];
        if let Some(last) = alpha.last_mut() {
            *last = 0.0;
        }
        let p = SurrogateParams { theta, alpha, model };
        p.validate()?;
        Ok(p)
    }

    pub fn num_tasks(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.theta.len();
        if j == 0 {
            return Err(Error::invalid("theta must not be empty"));
        }
        if self.alpha.len() != j {
            return Err(Error::invalid(format!(
                "alpha has {} entries, theta has {j}",
                self.alpha.len()
            )));
        }
        if let Some(t) = self.theta.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::invalid(format!("theta must be positive and finite, found {t}")));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(Error::invalid(format!("alpha must be non-negative and finite, found {a}")));
        }
        if self.alpha[j - 1] != 0.0 {
            return Err(Error::invalid("alpha_J must be 0"));
        }
        if self.model != ModelKind::Benter && self.alpha[..j - 1].iter().any(|&a| a != 1.0) {
            return Err(Error::invalid("Plackett-Luce models fix alpha_j = 1 for j < J"));
        }
        Ok(())
    }
}

/// Stage-by-task tables for scoring many orderings under one parameter set.
#[derive(Debug, Clone)]
pub(crate) struct Scorer {
    j: usize,
    reverse: bool,
    // alpha_j log theta_k, row-major [stage][task]
    exponent: Vec<f64>,
    // exp(exponent - stage_max)
    scaled: Vec<f64>,
    stage_max: Vec<f64>,
}

impl Scorer {
    pub fn new(params: &SurrogateParams) -> Self {
        let j = params.theta.len();
        let log_theta: Vec<f64> = params.theta.iter().map(|t| t.ln()).collect();
        let mut exponent = Vec::with_capacity(j * j);
        let mut stage_max = Vec::with_capacity(j);
        for &a in &params.alpha {
            let row: Vec<f64> = log_theta.iter().map(|lt| a * lt).collect();
            stage_max.push(row.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            exponent.extend(row);
        }
        let scaled = exponent
            .iter()
            .enumerate()
            .map(|(idx, e)| (e - stage_max[idx / j]).exp())
            .collect();
        Scorer {
            j,
            reverse: params.model == ModelKind::ReversePlackettLuce,
            exponent,
            scaled,
            stage_max,
        }
    }

    /// Surrogate value of an ordering of 0-based task indices.
    #[inline]
    pub fn value_zero_based(&self, seq: &[usize]) -> f64 {
        if self.reverse {
            let mut buf = [0usize; 64];
            if seq.len() <= 64 {
                for (dst, src) in buf.iter_mut().zip(seq.iter().rev()) {
                    *dst = *src;
                }
                return self.forward(&buf[..seq.len()]);
            }
            let rev: Vec<usize> = seq.iter().rev().copied().collect();
            return self.forward(&rev);
        }
        self.forward(seq)
    }

    #[inline]
    fn forward(&self, seq: &[usize]) -> f64 {
        let j = self.j;
        let mut total = 0.0;
        // the last stage contributes exactly 0 since alpha_J = 0
        for stage in 0..j.saturating_sub(1) {
            let row = stage * j;
            let mut sum = 0.0;
            for &k in &seq[stage..] {
                sum += self.scaled[row + k];
            }
            let log_norm = if sum > 0.0 && sum.is_finite() {
                self.stage_max[stage] + sum.ln()
            } else {
                log_sum_exp(seq[stage..].iter().map(|&k| self.exponent[row + k]))
            };
            total += self.exponent[row + seq[stage]] - log_norm;
        }
        total
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let top = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + values.map(|v| (v - top).exp()).sum::<f64>().ln()
}

/// Surrogate value `f(x; theta, alpha)`.
pub fn surrogate_value(x: &Permutation, params: &SurrogateParams) -> Result<f64> {
    params.validate()?;
    if x.len() != params.num_tasks() {
        return Err(Error::invalid(format!(
            "sequence has {} tasks, parameters have {}",
            x.len(),
            params.num_tasks()
        )));
    }
    let seq: Vec<usize> = x.zero_based().collect();
    Ok(Scorer::new(params).value_zero_based(&seq))
}

use std::collections::HashSet;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlation::{correlation, CorrelationKind};
use super::regression::{regression_adjust, RegressionFit};
use super::simplex::{minimize, SimplexOptions};
use super::{ModelKind, Scorer, SurrogateParams};
use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::rng;
use crate::utility::{inverse_logit, logit};
use crate::FORMAT_VERSION;

/// Objective value given to parameter points where the correlation is undefined.
pub const UNDEFINED_CORRELATION_PENALTY: f64 = -2.0;
/// Log-parameters are kept inside this box; `exp(-30)` is the working floor for alpha.
pub const LOG_PARAM_BOUND: f64 = 30.0;

const START_STREAM: u64 = 0x5354_4152; // "STAR"

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    sequences: Vec<Permutation>,
    utilities: Vec<f64>,
    logits: Vec<f64>,
}

impl TrainingSet {
    pub fn new(sequences: Vec<Permutation>, utilities: Vec<f64>) -> Result<Self> {
        if sequences.len() != utilities.len() {
            return Err(Error::invalid(format!(
                "{} sequences but {} utilities",
                sequences.len(),
                utilities.len()
            )));
        }
        if sequences.len() < 2 {
            return Err(Error::invalid("training set needs at least two sequences"));
        }
        let j = sequences[0].len();
        let mut seen = HashSet::with_capacity(sequences.len());
        for (i, s) in sequences.iter().enumerate() {
            if s.len() != j {
                return Err(Error::validation("sequences", Some(i), format!("length {} differs from {j}", s.len())));
            }
            if !seen.insert(s.items()) {
                return Err(Error::validation("sequences", Some(i), format!("duplicate sequence {s}")));
            }
        }
        for (i, u) in utilities.iter().enumerate() {
            if !(0.0..=1.0).contains(u) {
                return Err(Error::validation("utilities", Some(i), format!("{u} is outside [0, 1]")));
            }
        }
        let logits = utilities.iter().map(|&u| logit(u)).collect();
        Ok(TrainingSet { sequences, utilities, logits })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn num_tasks(&self) -> usize {
        self.sequences[0].len()
    }

    pub fn sequences(&self) -> &[Permutation] {
        &self.sequences
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub starts: usize,
    pub seed: u64,
    pub simplex: SimplexOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { starts: 5, seed: 0, simplex: SimplexOptions::default() }
    }
}

impl FitConfig {
    pub fn with_seed(seed: u64) -> Self {
        FitConfig { seed, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub format_version: u32,
    #[serde(flatten)]
    pub params: SurrogateParams,
    pub correlation_kind: CorrelationKind,
    pub beta: [f64; 4],
    pub regression: RegressionFit,
    pub correlation_raw: f64,
    pub correlation_adjusted: f64,
    pub seed: u64,
    pub training_size: usize,
    pub starts_used: usize,
    pub start_correlations: Vec<f64>,
    pub degenerate: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl FitResult {
    /// A fit assembled from known parameters and regression, without training.
    pub fn from_parts(params: SurrogateParams, regression: RegressionFit) -> Result<Self> {
        params.validate()?;
        Ok(FitResult {
            format_version: FORMAT_VERSION,
            params,
            correlation_kind: CorrelationKind::Pearson,
            beta: regression.beta,
            regression,
            correlation_raw: 0.0,
            correlation_adjusted: 0.0,
            seed: 0,
            training_size: 0,
            starts_used: 0,
            start_correlations: Vec::new(),
            degenerate: false,
            warnings: Vec::new(),
        })
    }

    pub fn num_tasks(&self) -> usize {
        self.params.num_tasks()
    }

    pub(crate) fn scorer(&self) -> Scorer {
        Scorer::new(&self.params)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let fit: FitResult = serde_json::from_str(s)?;
        fit.params.validate()?;
        Ok(fit)
    }
}

/// Map a model-specific free vector to parameters.
fn decode(free: &[f64], j: usize, model: ModelKind) -> SurrogateParams {
    let bound = |v: f64| v.clamp(-LOG_PARAM_BOUND, LOG_PARAM_BOUND);
    let mut theta = Vec::with_capacity(j);
    theta.push(1.0);
    theta.extend(free[..j - 1].iter().map(|&v| bound(v).exp()));
    let alpha = match model {
        ModelKind::Benter => {
            let mut a: Vec<f64> = free[j - 1..].iter().map(|&v| bound(v).exp()).collect();
            a.push(0.0);
            a
        }
        _ => {
            let mut a = vec![1.0; j];
            a[j - 1] = 0.0;
            a
        }
    };
    SurrogateParams { theta, alpha, model }
}

fn free_dimension(j: usize, model: ModelKind) -> usize {
    match model {
        ModelKind::Benter => 2 * (j - 1),
        _ => j - 1,
    }
}

struct Objective<'a> {
    seqs: Vec<Vec<usize>>,
    logits: &'a [f64],
    kind: CorrelationKind,
    j: usize,
    model: ModelKind,
}

impl Objective<'_> {
    fn surrogate_values(&self, params: &SurrogateParams) -> Vec<f64> {
        let scorer = Scorer::new(params);
        self.seqs.iter().map(|s| scorer.value_zero_based(s)).collect()
    }

    fn correlation_at(&self, free: &[f64]) -> f64 {
        let values = self.surrogate_values(&decode(free, self.j, self.model));
        correlation(self.logits, &values, self.kind).unwrap_or(UNDEFINED_CORRELATION_PENALTY)
    }
}

/// Fit surrogate parameters by maximising the correlation between the
/// surrogate and the training logits, then fit the cubic adjustment.
pub fn fit_surrogate(
    training: &TrainingSet,
    kind: CorrelationKind,
    model: ModelKind,
    config: &FitConfig,
) -> Result<FitResult> {
    if config.starts == 0 {
        return Err(Error::invalid("at least one start is required"));
    }
    let j = training.num_tasks();
    let mut warnings = Vec::new();
    if training.len() < 2 * j {
        warnings.push(format!("training size {} is below 2J = {}", training.len(), 2 * j));
    }
    let objective = Objective {
        seqs: training.sequences.iter().map(|s| s.zero_based().collect()).collect(),
        logits: &training.logits,
        kind,
        j,
        model,
    };
    let dim = free_dimension(j, model);

    let starts: Vec<Vec<f64>> = (0..config.starts)
        .map(|s| {
            if s == 0 {
                vec![0.0; dim]
            } else {
                let mut rng = rng::stream(config.seed, &[START_STREAM, s as u64]);
                (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
            }
        })
        .collect();

    // (initial correlation, final correlation, final point)
    let runs: Vec<(f64, f64, Vec<f64>)> = starts
        .par_iter()
        .map(|x0| {
            let initial = objective.correlation_at(x0);
            if dim == 0 {
                return (initial, initial, x0.clone());
            }
            let out = minimize(|x| -objective.correlation_at(x), x0, &config.simplex);
            let reached = -out.value;
            if reached >= initial {
                (initial, reached, out.point)
            } else {
                (initial, initial, x0.clone())
            }
        })
        .collect();

    let start_correlations: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let degenerate = runs.iter().all(|(init, fin, _)| fin <= init) && dim > 0;
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.1 > runs[best].1 {
            best = i;
        }
    }
    let point = if degenerate {
        warnings.push("no start improved on its initial point; returning the initial fit".to_string());
        starts[0].clone()
    } else {
        runs[best].2.clone()
    };

    let params = decode(&point, j, model);
    let fhat = objective.surrogate_values(&params);
    let correlation_raw = match correlation(&training.logits, &fhat, kind) {
        Ok(c) => c,
        Err(_) => {
            warnings.push("surrogate values are constant on the training set".to_string());
            0.0
        }
    };

    let regression = regression_adjust(&fhat, &training.logits)?;
    warnings.extend(regression.warnings.iter().cloned());
    let fstar: Vec<f64> = fhat.iter().map(|&f| regression.evaluate(f)).collect();
    let correlation_adjusted = correlation(&training.logits, &fstar, kind).unwrap_or(0.0);

    Ok(FitResult {
        format_version: FORMAT_VERSION,
        params,
        correlation_kind: kind,
        beta: regression.beta,
        regression,
        correlation_raw,
        correlation_adjusted,
        seed: config.seed,
        training_size: training.len(),
        starts_used: config.starts,
        start_correlations: start_correlations.into_iter().map(|c| c.max(-1.0)).collect(),
        degenerate,
        warnings,
    })
}

fn check_len(x: &Permutation, fit: &FitResult) -> Result<()> {
    if x.len() != fit.num_tasks() {
        return Err(Error::invalid(format!(
            "sequence has {} tasks, fit has {}",
            x.len(),
            fit.num_tasks()
        )));
    }
    Ok(())
}

/// Regression-adjusted surrogate `f*(x)`.
pub fn adjusted_value(x: &Permutation, fit: &FitResult) -> Result<f64> {
    check_len(x, fit)?;
    let seq: Vec<usize> = x.zero_based().collect();
    Ok(fit.regression.evaluate(fit.scorer().value_zero_based(&seq)))
}

/// `f†(x)`, the inverse logit of `f*(x)`.
pub fn inverse_logit_value(x: &Permutation, fit: &FitResult) -> Result<f64> {
    Ok(inverse_logit(adjusted_value(x, fit)?))
}

use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emulator::{
    fit_surrogate, propose_candidates, CandidateMode, CorrelationKind, FitConfig, FitResult, ModelKind,
    TrainingSet,
};
use crate::error::{Error, Result};
use crate::perm::{factorial_u64, Permutation, DEFAULT_ENUMERATION_CAP};
use crate::relmodel::ProblemScenario;
use crate::rng::{self, StreamRng};
use crate::utility::{logit, Evaluator, ExpectedUtility, StagePlan};
use crate::FORMAT_VERSION;

pub(crate) const TRAIN_STREAM: u64 = 1;
pub(crate) const FIT_STREAM: u64 = 2;
pub(crate) const CANDIDATE_STREAM: u64 = 3;
pub(crate) const FALLBACK_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "rule")]
pub enum Split {
    /// `N = B/2` rounded up, `M = B - N`.
    Half,
    Explicit { n: usize, m: usize },
}

/// `(N, M)` with `N + M = B`, `N >= 2` and `M >= 1`.
pub fn budget_split(budget: usize, rule: Split) -> Result<(usize, usize)> {
    if budget < 3 {
        return Err(Error::invalid(format!("budget B must be at least 3, got {budget}")));
    }
    let (n, m) = match rule {
        Split::Half => {
            let n = budget.div_ceil(2);
            (n, budget - n)
        }
        Split::Explicit { n, m } => (n, m),
    };
    if n < 2 {
        return Err(Error::invalid(format!("N must be at least 2, got {n}")));
    }
    if m < 1 {
        return Err(Error::invalid("M must be at least 1"));
    }
    if n + m != budget {
        return Err(Error::invalid(format!("N + M = {} does not equal B = {budget}", n + m)));
    }
    Ok((n, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum CandidateSource {
    Exhaustive,
    /// Draw `count` orderings from the fitted model; the seed is derived from the run seed.
    Sampled { count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub budget: usize,
    pub split: Split,
    pub seed: u64,
    pub correlation: CorrelationKind,
    pub model: ModelKind,
    pub candidates: CandidateSource,
    pub starts: usize,
}

impl RunConfig {
    pub fn new(budget: usize, split: Split, seed: u64) -> Self {
        RunConfig {
            budget,
            split,
            seed,
            correlation: CorrelationKind::Pearson,
            model: ModelKind::Benter,
            candidates: CandidateSource::Exhaustive,
            starts: 5,
        }
    }

    pub fn split_sizes(&self) -> Result<(usize, usize)> {
        budget_split(self.budget, self.split)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Training,
    Candidate,
}

impl Source {
    pub fn label(self) -> &'static str {
        match self {
            Source::Training => "training",
            Source::Candidate => "candidate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub sequence: Permutation,
    pub u: f64,
    pub logit_u: f64,
    pub source: Source,
    pub f_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub format_version: u32,
    pub seed: u64,
    pub config: RunConfig,
    pub training_size: usize,
    pub candidate_count: usize,
    pub putative_optimum: Permutation,
    pub utility: ExpectedUtility,
    pub stage_plan: StagePlan,
    pub fit: FitResult,
    /// Training rows in draw order, then candidates by decreasing `f*`.
    pub evaluation_log: Vec<Evaluation>,
    pub warnings: Vec<String>,
}

impl PipelineReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Training set from raw utilities. Values pushed outside `[0, 1]` by a budget
/// overrun are clamped for the fit and counted in a warning.
pub(crate) fn training_set(
    sequences: Vec<Permutation>,
    utilities: &[f64],
    warnings: &mut Vec<String>,
) -> Result<TrainingSet> {
    let outside = utilities.iter().filter(|u| !(0.0..=1.0).contains(*u)).count();
    if outside > 0 {
        warnings.push(format!(
            "{outside} training utilities fall outside [0, 1] (budget overrun) and were clamped for the fit"
        ));
    }
    TrainingSet::new(sequences, utilities.iter().map(|u| u.clamp(0.0, 1.0)).collect())
}

/// `n` distinct orderings of `j` tasks, uniform without replacement.
pub(crate) fn draw_training(j: usize, n: usize, rng: &mut StreamRng) -> Result<Vec<Permutation>> {
    let total = if j <= 20 { Some(factorial_u64(j)) } else { None };
    if let Some(total) = total {
        if n as u64 > total {
            return Err(Error::invalid(format!("N = {n} exceeds the {total} possible orderings")));
        }
        if j <= DEFAULT_ENUMERATION_CAP && (n as u64) * 2 > total {
            // dense case: shuffle all ranks and take a prefix
            let mut ranks: Vec<u64> = (0..total).collect();
            let (picked, _) = ranks.partial_shuffle(rng, n);
            return picked
                .iter()
                .map(|&r| Permutation::from_lexicographic_rank(j, r))
                .collect();
        }
    }
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    let mut items: Vec<usize> = (1..=j).collect();
    while out.len() < n {
        items.shuffle(rng);
        if seen.insert(items.clone()) {
            out.push(Permutation::new(items.clone())?);
        }
    }
    Ok(out)
}

/// Up to `m` uniform orderings outside `exclude`, used when the fit is degenerate.
pub(crate) fn uniform_candidates(
    j: usize,
    m: usize,
    exclude: &HashSet<Permutation>,
    rng: &mut StreamRng,
) -> Vec<Permutation> {
    let available = if j <= 20 {
        factorial_u64(j).saturating_sub(exclude.len() as u64)
    } else {
        u64::MAX
    };
    let m = (m as u64).min(available) as usize;
    let mut seen: HashSet<Permutation> = HashSet::with_capacity(m);
    let mut out = Vec::with_capacity(m);
    let mut items: Vec<usize> = (1..=j).collect();
    if j <= DEFAULT_ENUMERATION_CAP && (m as u64) * 2 > available {
        let mut pool: Vec<Permutation> = (0..factorial_u64(j))
            .map(|r| Permutation::from_lexicographic_rank(j, r).expect("rank in range"))
            .filter(|x| !exclude.contains(x))
            .collect();
        let (picked, _) = pool.partial_shuffle(rng, m);
        return picked.to_vec();
    }
    while out.len() < m {
        items.shuffle(rng);
        let x = Permutation::new(items.clone()).expect("shuffled identity");
        if !exclude.contains(&x) && seen.insert(x.clone()) {
            out.push(x);
        }
    }
    out
}

fn candidate_mode(source: CandidateSource, seed: u64) -> CandidateMode {
    match source {
        CandidateSource::Exhaustive => CandidateMode::Exhaustive,
        CandidateSource::Sampled { count } => CandidateMode::Sampled {
            count,
            seed: rng::derive_seed(seed, &[CANDIDATE_STREAM]),
        },
    }
}

/// The fitted emulator and its proposed candidates (before evaluation).
pub(crate) struct Proposal {
    pub fit: FitResult,
    /// Candidates with their `f*`, best first.
    pub candidates: Vec<(Permutation, f64)>,
    pub warnings: Vec<String>,
}

/// Fit on the training set and propose up to `m` candidates outside it.
pub(crate) fn fit_and_propose(
    training: &TrainingSet,
    config: &RunConfig,
    m: usize,
    seed: u64,
) -> Result<Proposal> {
    let j = training.num_tasks();
    let fit_config = FitConfig { starts: config.starts, seed: rng::derive_seed(seed, &[FIT_STREAM]), ..Default::default() };
    let fit = fit_surrogate(training, config.correlation, config.model, &fit_config)?;
    let exclude: HashSet<Permutation> = training.sequences().iter().cloned().collect();
    let mut warnings = Vec::new();
    let candidates = if fit.degenerate {
        warnings.push("fit is degenerate; candidates are uniform random draws".to_string());
        let mut r = rng::stream(seed, &[FALLBACK_STREAM]);
        uniform_candidates(j, m, &exclude, &mut r)
            .into_iter()
            .map(|x| {
                let f = crate::emulator::adjusted_value(&x, &fit).unwrap_or(f64::NAN);
                (x, f)
            })
            .collect()
    } else {
        let set = propose_candidates(&fit, m, candidate_mode(config.candidates, seed), &exclude)?;
        warnings.extend(set.warnings);
        set.candidates.into_iter().map(|c| (c.sequence, c.f_star)).collect()
    };
    Ok(Proposal { fit, candidates, warnings })
}

/// Train, fit, propose, evaluate and report the best of the `B` evaluations.
pub fn run_pipeline(scenario: &ProblemScenario, config: &RunConfig) -> Result<PipelineReport> {
    let mut warnings = scenario.validate()?;
    let j = scenario.num_tasks();
    if j < 2 {
        return Err(Error::invalid("the pipeline needs at least two tasks"));
    }
    let (n, m) = config.split_sizes()?;
    let evaluator = Evaluator::new(scenario)?;

    let mut train_rng = rng::stream(config.seed, &[TRAIN_STREAM]);
    let sequences = draw_training(j, n, &mut train_rng)?;
    let utilities = evaluate_all(&evaluator, &sequences);
    let training = training_set(sequences, &utilities, &mut warnings)?;

    let proposal = fit_and_propose(&training, config, m, config.seed)?;
    warnings.extend(proposal.fit.warnings.iter().cloned());
    warnings.extend(proposal.warnings);
    let fit = proposal.fit;

    let cand_seqs: Vec<Permutation> = proposal.candidates.iter().map(|c| c.0.clone()).collect();
    let cand_u = evaluate_all(&evaluator, &cand_seqs);

    let mut log = Vec::with_capacity(n + cand_seqs.len());
    for (x, &u) in training.sequences().iter().zip(&utilities) {
        let f_star = crate::emulator::adjusted_value(x, &fit)?;
        log.push(Evaluation { sequence: x.clone(), u, logit_u: logit(u), source: Source::Training, f_star });
    }
    for ((x, f_star), u) in proposal.candidates.into_iter().zip(cand_u) {
        log.push(Evaluation { sequence: x, u, logit_u: logit(u), source: Source::Candidate, f_star });
    }

    // first maximum in log order
    let mut best = 0;
    for (i, e) in log.iter().enumerate() {
        if e.u > log[best].u {
            best = i;
        }
    }
    let putative = log[best].sequence.clone();
    let (stage_plan, utility) = evaluator.stage_plan(&putative)?;

    Ok(PipelineReport {
        format_version: FORMAT_VERSION,
        seed: config.seed,
        config: config.clone(),
        training_size: n,
        candidate_count: log.len() - n,
        putative_optimum: putative,
        utility,
        stage_plan,
        fit,
        evaluation_log: log,
        warnings,
    })
}

fn evaluate_all(evaluator: &Evaluator, xs: &[Permutation]) -> Vec<f64> {
    xs.par_iter()
        .map(|x| {
            let seq: Vec<usize> = x.items().iter().map(|i| i - 1).collect();
            evaluator.utility_zero_based(&seq)
        })
        .collect()
}

/// Run `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Serialize)]
struct DiagnosticRow<'a> {
    index: usize,
    source: &'a str,
    sequence: String,
    u: f64,
    logit_u: f64,
    f_star: f64,
}

/// Rows for the diagnostic plot: training by increasing `u`, then candidates
/// by decreasing `f*`.
pub fn diagnostic_rows(report: &PipelineReport) -> Vec<Evaluation> {
    let mut training: Vec<&Evaluation> =
        report.evaluation_log.iter().filter(|e| e.source == Source::Training).collect();
    training.sort_by(|a, b| a.u.total_cmp(&b.u));
    let mut candidates: Vec<&Evaluation> =
        report.evaluation_log.iter().filter(|e| e.source == Source::Candidate).collect();
    candidates.sort_by(|a, b| b.f_star.total_cmp(&a.f_star));
    training.into_iter().chain(candidates).cloned().collect()
}

pub fn diagnostics_export(report: &PipelineReport, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = csv::Writer::from_writer(file);
    for (i, e) in diagnostic_rows(report).iter().enumerate() {
        w.serialize(DiagnosticRow {
            index: i + 1,
            source: e.source.label(),
            sequence: e.sequence.to_string(),
            u: e.u,
            logit_u: e.logit_u,
            f_star: e.f_star,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Uniform draw of one ordering; handy outside the pipeline.
pub fn random_permutation<R: Rng + ?Sized>(j: usize, rng: &mut R) -> Permutation {
    let mut items: Vec<usize> = (1..=j).collect();
    items.shuffle(rng);
    Permutation::new(items).expect("shuffled identity")
}

//! Scenario files, exhaustive search, the optimize pipeline, diagnostics
//! export and simulation studies.

mod exhaustive;
mod pipeline;
mod scenario;
mod simulate;

pub use exhaustive::{exhaustive_optimum, UtilityTable, RANK_TIE_TOLERANCE};
pub use pipeline::{
    budget_split, diagnostic_rows, diagnostics_export, random_permutation, run_pipeline, with_workers,
    CandidateSource, Evaluation, PipelineReport, RunConfig, Source, Split,
};
pub use scenario::{load_scenario, parse_scenario, LoadedScenario, ScenarioGenerator};
pub use simulate::{simulate_grid, CellSummary, GridCell, SimulationConfig, SimulationSummary};

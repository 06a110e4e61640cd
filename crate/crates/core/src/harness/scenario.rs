use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relmodel::{Concern, ProblemScenario, TaskSpec};
use crate::utility::TradeoffWeights;

/// A validated scenario and the warnings raised while checking it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: ProblemScenario,
    pub warnings: Vec<String>,
}

pub fn parse_scenario(json: &str) -> Result<LoadedScenario> {
    let scenario: ProblemScenario = serde_json::from_str(json)?;
    let warnings = scenario.validate()?;
    Ok(LoadedScenario { scenario, warnings })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<LoadedScenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_scenario(&text)
}

/// Random scenarios for simulation studies.
///
/// Each `lambda_i ~ U(0, lambda_max)`; each `p_{i,j}` is 0 with probability
/// `p_zero_prob` and otherwise `U(0, p_max)`; costs and times are uniform on
/// `(0, cost_max)` and `(0, time_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioGenerator {
    pub num_concerns: usize,
    pub num_tasks: usize,
    pub lambda_max: f64,
    pub p_zero_prob: f64,
    pub p_max: f64,
    pub cost_max: f64,
    pub time_max: f64,
    pub epsilon: f64,
    pub mission_time: f64,
    pub target: f64,
    /// `None` sets the cost budget to the total cost of all tasks.
    pub max_cost: Option<f64>,
    pub max_time: f64,
    pub weights: TradeoffWeights,
}

impl Default for ScenarioGenerator {
    fn default() -> Self {
        ScenarioGenerator {
            num_concerns: 15,
            num_tasks: 9,
            lambda_max: 0.5,
            p_zero_prob: 0.5,
            p_max: 0.5,
            cost_max: 50.0,
            time_max: 20.0,
            epsilon: 0.02,
            mission_time: 100.0,
            target: 0.8,
            max_cost: None,
            max_time: 90.0,
            weights: TradeoffWeights { q1: 1.0 / 3.0, q2: 1.0 / 3.0, q3: 1.0 / 3.0 },
        }
    }
}

impl ScenarioGenerator {
    pub fn validate(&self) -> Result<()> {
        if self.num_concerns == 0 || self.num_tasks == 0 {
            return Err(Error::invalid("generator needs at least one concern and one task"));
        }
        if !(0.0..=1.0).contains(&self.lambda_max)
            || !(0.0..=1.0).contains(&self.p_zero_prob)
            || !(0.0..=1.0).contains(&self.p_max)
        {
            return Err(Error::invalid("generator probabilities must lie in [0, 1]"));
        }
        if !(self.cost_max >= 0.0 && self.time_max >= 0.0) {
            return Err(Error::invalid("generator cost and time ranges must be non-negative"));
        }
        self.weights.validate()
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ProblemScenario> {
        self.validate()?;
        let concerns: Vec<Concern> = (0..self.num_concerns)
            .map(|_| Concern::new(rng.random::<f64>() * self.lambda_max, self.epsilon))
            .collect();
        let tasks: Vec<TaskSpec> = (0..self.num_tasks)
            .map(|_| {
                let detect = (0..self.num_concerns)
                    .map(|_| {
                        if rng.random::<f64>() < self.p_zero_prob {
                            0.0
                        } else {
                            rng.random::<f64>() * self.p_max
                        }
                    })
                    .collect();
                TaskSpec {
                    cost: rng.random::<f64>() * self.cost_max,
                    time: rng.random::<f64>() * self.time_max,
                    detect,
                }
            })
            .collect();
        let total_cost: f64 = tasks.iter().map(|t| t.cost).sum();
        let scenario = ProblemScenario {
            concerns,
            tasks,
            mission_time: self.mission_time,
            target: self.target,
            max_cost: self.max_cost.unwrap_or(total_cost.max(f64::MIN_POSITIVE)),
            max_time: self.max_time,
            weights: self.weights,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    const FIXTURE: &str = include_str!("../../fixtures/example_j9.json");

    #[test]
    fn bundled_fixture_loads() {
        let loaded = parse_scenario(FIXTURE).unwrap();
        let s = &loaded.scenario;
        assert_eq!((s.num_concerns(), s.num_tasks()), (15, 9));
        assert_eq!(s.concerns[3].lambda, 0.45);
        assert_eq!(s.tasks[8].detect[0], 0.25);
        let costs: Vec<f64> = s.tasks.iter().map(|t| t.cost).collect();
        assert_eq!(costs, vec![11.0, 49.0, 6.0, 8.0, 17.0, 16.0, 12.0, 7.0, 6.0]);
        assert_eq!(s.max_cost, 132.0);
        assert_eq!(s.max_time, 150.0);
    }

    #[test]
    fn empty_task_list_is_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(FIXTURE).unwrap();
        v["tasks"] = serde_json::json!([]);
        let err = parse_scenario(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("tasks"), "{err}");
    }

    #[test]
    fn bad_probability_names_field_and_index() {
        let mut v: serde_json::Value = serde_json::from_str(FIXTURE).unwrap();
        v["concerns"][4]["lambda"] = serde_json::json!(1.5);
        let err = parse_scenario(&v.to_string()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lambda") && msg.contains("index 4"), "{msg}");

        let mut v: serde_json::Value = serde_json::from_str(FIXTURE).unwrap();
        v["tasks"][2]["detect"][0] = serde_json::json!(-0.1);
        let msg = parse_scenario(&v.to_string()).unwrap_err().to_string();
        assert!(msg.contains("detect") && msg.contains("index 2"), "{msg}");
    }

    #[test]
    fn missing_field_is_reported() {
        let mut v: serde_json::Value = serde_json::from_str(FIXTURE).unwrap();
        v["tasks"][0].as_object_mut().unwrap().remove("cost");
        let msg = parse_scenario(&v.to_string()).unwrap_err().to_string();
        assert!(msg.contains("cost"), "{msg}");
    }

    #[test]
    fn generator_respects_ranges() {
        let g = ScenarioGenerator::default();
        let mut r = rng::stream(5, &[]);
        let s = g.generate(&mut r).unwrap();
        assert_eq!((s.num_concerns(), s.num_tasks()), (15, 9));
        assert!(s.concerns.iter().all(|c| c.lambda < 0.5 && c.epsilon == 0.02));
        let detect: Vec<f64> = s.tasks.iter().flat_map(|t| t.detect.iter().copied()).collect();
        assert!(detect.iter().all(|p| (0.0..0.5).contains(p)));
        let zeros = detect.iter().filter(|p| **p == 0.0).count();
        assert!(zeros > 30 && zeros < 105, "{zeros}");
        let total: f64 = s.tasks.iter().map(|t| t.cost).sum();
        assert_eq!(s.max_cost, total);
        assert_eq!(s.max_time, 90.0);
    }
}

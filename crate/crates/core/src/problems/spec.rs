use serde::{Deserialize, Serialize};

use super::logistic::LogisticSpec;
use super::mlp::MlpSpec;
use super::quadratic::StochasticQuadraticSpec;
use super::rosenbrock::RosenbrockSpec;
use super::{LogisticRegression, Mlp, Problem, ProblemError, Quadratic, Rosenbrock};

pub const PROBLEM_NAMES: &[&str] = &["quadratic", "logistic", "rosenbrock", "mlp"];

/// Serializable description of a problem instance, selected by `"name"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ProblemSpec {
    Quadratic(StochasticQuadraticSpec),
    Logistic(LogisticSpec),
    Rosenbrock(RosenbrockSpec),
    Mlp(MlpSpec),
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Quadratic(_) => "quadratic",
            Self::Logistic(_) => "logistic",
            Self::Rosenbrock(_) => "rosenbrock",
            Self::Mlp(_) => "mlp",
        }
    }
}

pub fn build_problem(spec: &ProblemSpec) -> Result<Box<dyn Problem>, ProblemError> {
    Ok(match spec {
        ProblemSpec::Quadratic(s) => Box::new(Quadratic::stochastic(s)?),
        ProblemSpec::Logistic(s) => Box::new(LogisticRegression::synthetic(s)?),
        ProblemSpec::Rosenbrock(s) => Box::new(Rosenbrock::new(s)?),
        ProblemSpec::Mlp(s) => Box::new(Mlp::synthetic(s)?),
    })
}

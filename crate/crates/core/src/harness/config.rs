use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::diagnostics::CHECK_NAMES;
use crate::optim::{DecayMode, OptimizerSpec};
use crate::problems::{ProblemSpec, Remainder};
use crate::schedules::ScheduleSpec;

/// Environment variable that overrides [`ExperimentConfig::seed`].
pub const SEED_ENV: &str = "ACMO_SEED";

/// One experiment: a problem, an optimizer, a schedule and the run protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    /// A registry name (`"adam"`) or an object with hyperparameters
    /// (`{"name": "adam", "beta1": 0.8}`).
    #[serde(deserialize_with = "optimizer_entry")]
    pub optimizer: OptimizerSpec,
    pub schedule: ScheduleSpec,
    /// Number of iterates `T`; the optimizer takes `T − 1` steps.
    pub iterations: usize,
    /// Mini-batch size; omitted means full batch.
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub remainder: Remainder,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default)]
    pub decay_mode: DecayMode,
    #[serde(default = "one")]
    pub trials: usize,
    /// Master seed; trial `k` draws from stream `k`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checks: Vec<String>,
    /// Keep `θ_t`, `g_t` and the moment of every step. Forced on when a
    /// requested check needs them.
    #[serde(default)]
    pub store_vectors: bool,
    /// `[lo, hi]` iteration window for the `rate` check.
    #[serde(default)]
    pub rate_window: Option<[usize; 2]>,
    #[serde(default = "yes")]
    pub parallel: bool,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for per-trial CSV files and `summary.json`; nothing is
    /// written when omitted.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// Grid for the `sweep` subcommand: every optimizer is run with every `α₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(deserialize_with = "optimizer_entries")]
    pub optimizers: Vec<OptimizerSpec>,
    #[serde(default)]
    pub alpha0: Vec<f64>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn resolve_entry(value: serde_json::Value) -> Result<OptimizerSpec, String> {
    match value {
        serde_json::Value::String(name) => {
            OptimizerSpec::from_name(&name).ok_or_else(|| format!("unknown optimizer `{name}`"))
        }
        other => serde_json::from_value(other).map_err(|e| e.to_string()),
    }
}

fn optimizer_entry<'de, D: Deserializer<'de>>(d: D) -> Result<OptimizerSpec, D::Error> {
    resolve_entry(serde_json::Value::deserialize(d)?).map_err(serde::de::Error::custom)
}

fn optimizer_entries<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<OptimizerSpec>, D::Error> {
    Vec::<serde_json::Value>::deserialize(d)?
        .into_iter()
        .map(|v| resolve_entry(v).map_err(serde::de::Error::custom))
        .collect()
}

/// Checks that need the per-step vectors.
pub(crate) const VECTOR_CHECKS: &[&str] = &["constructed_sequence", "sufficient_descent", "auxiliary_optimality"];

impl ExperimentConfig {
    /// Parses and validates a JSON config. Syntax errors keep serde's line
    /// and column.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.iterations < 2 {
            return bad(format!("iterations = {} must be at least 2", self.iterations));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay = {} must be nonnegative", self.weight_decay));
        }
        if let Some(c) = self.checks.iter().find(|c| !CHECK_NAMES.contains(&c.as_str())) {
            return bad(format!("unknown check `{c}`"));
        }
        if let Some([lo, hi]) = self.rate_window {
            if lo == 0 || hi <= lo {
                return bad(format!("rate_window [{lo}, {hi}] must satisfy 1 ≤ lo < hi"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.optimizers.is_empty() {
                return bad("sweep needs at least one optimizer".into());
            }
            if s.alpha0.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                return bad("sweep alpha0 values must be positive".into());
            }
        }
        Ok(())
    }

    /// Replaces the seed with `ACMO_SEED` when that variable is set.
    pub fn with_env_seed(mut self) -> Result<Self, HarnessError> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            self.seed = raw
                .trim()
                .parse()
                .map_err(|_| HarnessError::Config(format!("{SEED_ENV} = `{raw}` is not an unsigned integer")))?;
        }
        Ok(self)
    }

    pub(crate) fn needs_vectors(&self) -> bool {
        self.store_vectors || self.checks.iter().any(|c| VECTOR_CHECKS.contains(&c.as_str()))
    }

    /// SHA-256 (hex) of the canonical JSON form, seed included.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "problem": {"name": "quadratic", "dim": 3, "n_samples": 8, "curvature": [1.0, 2.0], "spread": 0.1},
        "optimizer": "adam",
        "schedule": {"alpha": {"kind": "constant", "alpha0": 0.01}},
        "iterations": 10
    }"#;

    #[test]
    fn defaults_and_string_optimizer() {
        let c = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!(c.optimizer, OptimizerSpec::from_name("adam").unwrap());
        assert_eq!((c.trials, c.seed, c.batch_size), (1, 0, None));
        assert!(c.parallel && c.checks.is_empty() && !c.needs_vectors());
    }

    #[test]
    fn object_optimizer_and_alias() {
        let text = BASE.replace(r#""adam""#, r#"{"name": "sgd_momentum", "momentum": 0.5}"#);
        let c = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(c.optimizer, OptimizerSpec::SgdMomentum { momentum: 0.5 });
        let text = BASE.replace(r#""adam""#, r#""sgd""#);
        let c = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(c.optimizer, OptimizerSpec::SgdMomentum { momentum: 0.0 });
    }

    #[test]
    fn rejects_bad_configs() {
        for (from, to) in [
            (r#""adam""#, r#""adamax""#),
            (r#""iterations": 10"#, r#""iterations": 1"#),
            (r#""iterations": 10"#, r#""iterations": 10, "trials": 0"#),
            (r#""iterations": 10"#, r#""iterations": 10, "checks": ["nope"]"#),
            (r#""iterations": 10"#, r#""iterations": 10, "colour": 1"#),
        ] {
            let text = BASE.replace(from, to);
            assert!(
                matches!(ExperimentConfig::from_json(&text), Err(HarnessError::Config(_))),
                "{to}"
            );
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = ExperimentConfig::from_json("{\n  \"problem\": ,\n}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::from_json(BASE).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn vector_checks_force_storage() {
        let text = BASE.replace(
            r#""iterations": 10"#,
            r#""iterations": 10, "checks": ["auxiliary_optimality"]"#,
        );
        assert!(ExperimentConfig::from_json(&text).unwrap().needs_vectors());
    }
}

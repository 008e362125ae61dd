use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "sqphase",
    version,
    about = "Statistical-query lower bounds, detectors and phase diagrams for sparse detection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Oracle-complexity and information-theoretic bounds for one parameter point.
    Bounds(BoundsArgs),
    /// Classify a grid of phase exponents into regimes.
    Phase(PhaseArgs),
    /// Monte Carlo risk of a detector.
    Risk(RiskArgs),
    /// Play a detector against the worst-case oracle.
    Game(GameArgs),
    /// Exact chi-square divergence of the uniform mixture.
    Chi2(Chi2Args),
    /// Shell tables and class enumerations.
    Enumerate(EnumerateArgs),
}

/// Model, class and signal parameters.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemArgs {
    /// sparse-sm, matching-sm or spca.
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Sparsity s*; matchings use sqrt(d).
    #[arg(long = "s")]
    pub s: Option<usize>,
    /// Signal strength beta*.
    #[arg(long, conflicts_with = "beta2")]
    pub beta: Option<f64>,
    /// Squared signal strength beta*^2.
    #[arg(long)]
    pub beta2: Option<f64>,
    /// Mixture weight (shifted-mean models).
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub xi: Option<f64>,
    /// Query budget T.
    #[arg(long = "T", alias = "budget")]
    pub budget: Option<u64>,
    /// Small constant in the matching bound.
    #[arg(long)]
    pub delta: Option<f64>,
    /// TOML file with default values for any flag.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseArgs {
    /// sparse-sm, matching-sm or spca.
    #[arg(long)]
    pub problem: Option<String>,
    /// Fixed coordinates, e.g. `p_alpha=0` or `p_s=0.25,0.5`. Repeatable.
    #[arg(long)]
    pub slice: Vec<String>,
    /// Grid points per axis.
    #[arg(long)]
    pub res: Option<usize>,
    #[arg(long)]
    pub p_beta_max: Option<f64>,
    #[arg(long)]
    pub p_n_max: Option<f64>,
    /// CSV destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Everything an experiment needs besides the problem.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    /// Detector: SM1, SM2, SM3, SM4a, SM4b, PM_SM1, PM_SM3, PM_SM4a, SPCA1, SPCA2, LR, AcceptAll, RejectAll.
    #[arg(long)]
    pub detector: Option<String>,
    /// data, ideal or adversarial.
    #[arg(long)]
    pub oracle: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub xi: Option<f64>,
    /// Trials per hypothesis.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// The constant C in the reduced sparsity of SM4b.
    #[arg(long)]
    pub c_const: Option<f64>,
    /// Enumeration cap.
    #[arg(long)]
    pub cap: Option<u64>,
    /// Monte Carlo samples for queries without closed forms.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// Keep only the first T scheduled queries.
    #[arg(long = "T", alias = "budget")]
    pub budget: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub experiment: ExperimentArgs,
    /// One-dimensional sweep, e.g. `beta=0.2,0.4,0.8` (beta, alpha or n).
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Risk-curve plot for sweeps.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    #[serde(skip)]
    pub workers: usize,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GameArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub experiment: ExperimentArgs,
    /// Batches of `trials` episodes per hypothesis.
    #[arg(long)]
    pub batches: Option<usize>,
    /// JSON-lines destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    #[serde(skip)]
    pub workers: usize,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Chi2Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EnumerateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: ProblemArgs,
    /// Also list every class element.
    #[arg(long)]
    pub list: bool,
    #[arg(long)]
    pub cap: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn overlay(base: &mut serde_json::Value, top: serde_json::Value) {
    match (base, top) {
        (serde_json::Value::Object(b), serde_json::Value::Object(t)) => {
            for (k, v) in t {
                let empty = v.is_null() || v.as_array().is_some_and(|a| a.is_empty()) || v == serde_json::Value::Bool(false);
                if !empty || !b.contains_key(&k) {
                    b.insert(k, v);
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Values from the config file, overridden by any flag given on the command line.
pub fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags).expect("args serialize")).expect("args round trip"));
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let mut base = serde_json::to_value(table).expect("toml converts to json");
    overlay(&mut base, serde_json::to_value(flags).expect("args serialize"));
    serde_json::from_value(base).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn later_layer_wins_only_where_set() {
        let mut base = serde_json::json!({ "d": 8, "s": 2, "slice": ["p_alpha=0"], "list": true });
        overlay(
            &mut base,
            serde_json::json!({ "d": 16, "s": null, "slice": [], "list": false, "n": 5 }),
        );
        assert_eq!(
            base,
            serde_json::json!({ "d": 16, "s": 2, "slice": ["p_alpha=0"], "list": true, "n": 5 })
        );
    }

    #[test]
    fn no_config_is_identity() {
        let a = Chi2Args {
            n: Some(3),
            ..Default::default()
        };
        let r = resolve(&a, None).unwrap();
        assert_eq!(r.n, Some(3));
        assert!(r.problem.d.is_none());
    }
}

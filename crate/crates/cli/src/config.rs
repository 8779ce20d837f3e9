//! Run configuration documents.
//!
//! A `RunConfig` is what every subcommand executes; flags are converted into
//! one, and `--config file.json` reads one directly. Unknown fields are
//! rejected and every document is validated before any computation starts.

use std::fs;
use std::path::{Path, PathBuf};

use graphgrow_core::support::pair_count;
use graphgrow_core::{Family, GrowthMethod, InnerRule, ScenarioSpec, StoppingConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Output directory used when neither flag, environment nor document sets one.
pub const DEFAULT_OUT: &str = "graphgrow-out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum RunConfig {
    Generate(GenerateConfig),
    Grow(GrowConfig),
    Evaluate(EvaluateConfig),
    Stability(StabilityConfig),
    Bench(BenchConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub scenario: ScenarioSpec,
    /// Number of sample matrices to draw (`data.csv`, `data_r0001.csv`, ...).
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// `n × d` observations; the anchor is the ridge-regularised sample covariance.
    #[default]
    Data,
    /// A `d × d` matrix used as the anchor directly.
    Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowConfig {
    pub input: PathBuf,
    #[serde(default)]
    pub input_kind: InputKind,
    pub methods: Vec<GrowthMethod>,
    pub k_max: usize,
    /// Tie-break seed for the naive orderings.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stopping: StoppingConfig,
    #[serde(default)]
    pub inner_rule: InnerRule,
    #[serde(default)]
    pub naive_losses: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    /// `edges.csv`, or a precision matrix whose pattern defines the truth.
    pub truth: PathBuf,
    /// `.jsonl` trace files, each with its `.meta.json` sidecar.
    pub traces: Vec<PathBuf>,
    #[serde(default)]
    pub scenario: Option<String>,
    /// Prefix length for detection frequencies; defaults to the number of true edges.
    #[serde(default)]
    pub detection_k: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub input: PathBuf,
    pub n_sub: usize,
    /// Defaults to `⌊n/2⌋`.
    #[serde(default)]
    pub sub_size: Option<usize>,
    pub method: GrowthMethod,
    pub k_max: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stopping: StoppingConfig,
    #[serde(default)]
    pub inner_rule: InnerRule,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub scenarios: Vec<ScenarioSpec>,
    /// Sample sizes swept for every scenario; empty means each scenario's own `n`.
    #[serde(default)]
    pub ns: Vec<usize>,
    pub methods: Vec<GrowthMethod>,
    pub repetitions: usize,
    /// Repetitions for BFCI, which is far more expensive.
    #[serde(default)]
    pub bfci_repetitions: Option<usize>,
    /// Growth length; defaults to `min(M, 2 m_true)`.
    #[serde(default)]
    pub k_max: Option<usize>,
    #[serde(default)]
    pub stopping: StoppingConfig,
    #[serde(default)]
    pub inner_rule: InnerRule,
    #[serde(default)]
    pub naive_losses: bool,
    /// Re-use repetitions whose files are already complete.
    #[serde(default)]
    pub resume: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn check_methods(methods: &[GrowthMethod]) -> CliResult<()> {
    if methods.is_empty() {
        return Err(CliError::config("at least one method is required"));
    }
    let mut seen = methods.to_vec();
    seen.sort();
    seen.dedup();
    if seen.len() != methods.len() {
        return Err(CliError::config("methods must not repeat"));
    }
    Ok(())
}

fn check_k_max(k_max: usize, d: Option<usize>) -> CliResult<()> {
    if k_max == 0 {
        return Err(CliError::config("k_max must be at least 1"));
    }
    if let Some(d) = d {
        if k_max > pair_count(d) {
            return Err(CliError::config(format!(
                "k_max = {k_max} exceeds the {} edges available for d = {d}",
                pair_count(d)
            )));
        }
    }
    Ok(())
}

fn check_stopping(cfg: &StoppingConfig) -> CliResult<()> {
    cfg.validate().map_err(|e| CliError::config(e.to_string()))
}

fn check_scenario(spec: &ScenarioSpec) -> CliResult<()> {
    spec.validate().map_err(|e| CliError::config(e.to_string()))
}

impl RunConfig {
    pub fn command_name(&self) -> &'static str {
        match self {
            RunConfig::Generate(_) => "generate",
            RunConfig::Grow(_) => "grow",
            RunConfig::Evaluate(_) => "evaluate",
            RunConfig::Stability(_) => "stability",
            RunConfig::Bench(_) => "bench",
        }
    }

    /// Reads and validates a JSON document.
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn out_mut(&mut self) -> &mut Option<PathBuf> {
        match self {
            RunConfig::Generate(c) => &mut c.out,
            RunConfig::Grow(c) => &mut c.out,
            RunConfig::Evaluate(c) => &mut c.out,
            RunConfig::Stability(c) => &mut c.out,
            RunConfig::Bench(c) => &mut c.out,
        }
    }

    /// The output directory, falling back to [`DEFAULT_OUT`].
    pub fn out_dir(&self) -> PathBuf {
        let out = match self {
            RunConfig::Generate(c) => &c.out,
            RunConfig::Grow(c) => &c.out,
            RunConfig::Evaluate(c) => &c.out,
            RunConfig::Stability(c) => &c.out,
            RunConfig::Bench(c) => &c.out,
        };
        out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    /// Checks everything that can be checked without reading inputs.
    pub fn validate(&self) -> CliResult<()> {
        match self {
            RunConfig::Generate(c) => {
                check_scenario(&c.scenario)?;
                if c.repetitions == 0 {
                    return Err(CliError::config("repetitions must be at least 1"));
                }
            }
            RunConfig::Grow(c) => {
                check_methods(&c.methods)?;
                check_k_max(c.k_max, None)?;
                check_stopping(&c.stopping)?;
            }
            RunConfig::Evaluate(c) => {
                if c.traces.is_empty() {
                    return Err(CliError::config("no trace files given"));
                }
                if c.detection_k == Some(0) {
                    return Err(CliError::config("detection_k must be at least 1"));
                }
            }
            RunConfig::Stability(c) => {
                if c.n_sub == 0 {
                    return Err(CliError::config("n_sub must be at least 1"));
                }
                if c.sub_size == Some(0) {
                    return Err(CliError::config("sub_size must be at least 1"));
                }
                check_k_max(c.k_max, None)?;
                check_stopping(&c.stopping)?;
            }
            RunConfig::Bench(c) => {
                if c.scenarios.is_empty() {
                    return Err(CliError::config("bench needs at least one scenario"));
                }
                for s in &c.scenarios {
                    check_scenario(s)?;
                    if s.family == Family::External {
                        return Err(CliError::config(
                            "bench sweeps generated families; use grow/evaluate for external matrices",
                        ));
                    }
                    if let Some(k) = c.k_max {
                        check_k_max(k, Some(s.d))?;
                    }
                }
                if c.ns.contains(&0) {
                    return Err(CliError::config("sample sizes must be positive"));
                }
                check_methods(&c.methods)?;
                if c.repetitions == 0 || c.bfci_repetitions == Some(0) {
                    return Err(CliError::config("repetitions must be at least 1"));
                }
                check_stopping(&c.stopping)?;
            }
        }
        Ok(())
    }
}

impl BenchConfig {
    pub fn repetitions_for(&self, method: GrowthMethod) -> usize {
        match method {
            GrowthMethod::Bfci => self.bfci_repetitions.unwrap_or(self.repetitions),
            _ => self.repetitions,
        }
    }

    /// Scenario grid after applying the sample-size sweep.
    pub fn expanded_scenarios(&self) -> Vec<ScenarioSpec> {
        self.scenarios
            .iter()
            .flat_map(|s| {
                if self.ns.is_empty() {
                    vec![s.clone()]
                } else {
                    self.ns.iter().map(|&n| ScenarioSpec { n, ..s.clone() }).collect()
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_rejected() {
        let doc = r#"{"command":"grow","input":"x.csv","methods":["gsl"],"k_max":3,"bogus":1}"#;
        assert!(serde_json::from_str::<RunConfig>(doc).is_err());
        let doc = r#"{"command":"grow","input":"x.csv","methods":["gsl"],"k_max":3}"#;
        let cfg: RunConfig = serde_json::from_str(doc).unwrap();
        cfg.validate().unwrap();
        let doc = r#"{"command":"grow","input":"x.csv","methods":["gsl"],"k_max":3,"stopping":{"tau":0.1}}"#;
        assert!(serde_json::from_str::<RunConfig>(doc).is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let bad_m = RunConfig::Generate(GenerateConfig {
            scenario: ScenarioSpec::random(50, 2000, 0.25, 90, 1),
            repetitions: 1,
            out: None,
        });
        assert!(matches!(bad_m.validate(), Err(CliError::Config(_))));
        let doc = r#"{"command":"grow","input":"x.csv","methods":["gsl","gsl"],"k_max":3}"#;
        let cfg: RunConfig = serde_json::from_str(doc).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::Bench(BenchConfig {
            scenarios: vec![ScenarioSpec::hub(50, 0.25, 90, 7)],
            ns: vec![30, 90, 160],
            methods: vec![GrowthMethod::Gsl, GrowthMethod::Prec],
            repetitions: 100,
            bfci_repetitions: Some(10),
            k_max: None,
            stopping: StoppingConfig::default(),
            inner_rule: InnerRule::Gsl,
            naive_losses: false,
            resume: false,
            out: None,
        });
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        if let RunConfig::Bench(b) = &cfg {
            assert_eq!(b.expanded_scenarios().len(), 3);
        }
    }
}

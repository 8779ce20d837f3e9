//! The `generate`, `grow`, `evaluate` and `stability` commands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use graphgrow_core::evaluation::{detection_to_csv, ranks_to_csv, report_to_csv, summary_to_csv};
use graphgrow_core::io::{is_edges_csv, read_data_csv, read_edges_csv, read_matrix, write_data_csv, write_edges_csv, write_matrix_csv};
use graphgrow_core::rng::PRNG_NAME;
use graphgrow_core::synthetic::EDGE_THRESHOLD;
use graphgrow_core::{
    aggregate, build_truth, detection_frequency, read_trace, ridge_covariance, run_growth, sample_gaussian,
    score_recovery, stability_ranks, write_trace, Error, GrowthMethod, GrowthOptions, GrowthTrace, InnerRule,
    RecoveryReport, StabilitySettings, StoppingConfig, Support, SymMatrix,
};
use serde::{Deserialize, Serialize};

use crate::config::{EvaluateConfig, GenerateConfig, GrowConfig, InputKind, RunConfig, StabilityConfig};
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

/// What a finished command reports back to the caller.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub out_dir: PathBuf,
    /// Runs that failed but did not stop the command.
    pub failures: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// Everything needed to repeat one growth run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub method: GrowthMethod,
    pub repetition: usize,
    /// Sampling stream index, absent when the input was read from a file.
    pub sample_index: Option<u64>,
    pub tie_seed: u64,
    pub k_max: usize,
    pub stopping: StoppingConfig,
    pub inner_rule: InnerRule,
    pub naive_losses: bool,
    pub status: RunStatus,
    pub steps: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    #[serde(flatten)]
    pub record: RunRecord,
    pub reused: bool,
    pub seconds: Option<f64>,
}

/// Written to every output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub prng: String,
    pub config: RunConfig,
    pub files: Vec<String>,
    pub runs: Vec<RunEntry>,
}

impl Manifest {
    /// The output location is left out so that identical runs produce identical manifests.
    pub fn new(config: &RunConfig) -> Self {
        let mut config = config.clone();
        *config.out_mut() = None;
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            prng: PRNG_NAME.to_string(),
            config,
            files: Vec::new(),
            runs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Stream index for repetition `r` at sample size `n`, so that sweeps over
/// `n` never reuse draws.
pub fn sample_index(n: usize, r: usize) -> u64 {
    ((n as u64) << 32) | r as u64
}

pub fn data_file_name(r: usize) -> String {
    if r == 0 {
        "data.csv".to_string()
    } else {
        format!("data_r{r:04}.csv")
    }
}

pub fn trace_stem(method: GrowthMethod) -> String {
    format!("trace_{method}")
}

/// Runs a validated configuration.
pub fn execute(cfg: &RunConfig) -> CliResult<Outcome> {
    cfg.validate()?;
    let out = cfg.out_dir();
    ensure_dir(&out)?;
    match cfg {
        RunConfig::Generate(c) => generate(cfg, c, &out),
        RunConfig::Grow(c) => grow(cfg, c, &out),
        RunConfig::Evaluate(c) => evaluate(cfg, c, &out),
        RunConfig::Stability(c) => stability(cfg, c, &out),
        RunConfig::Bench(c) => crate::bench::bench(cfg, c, &out),
    }
}

fn generate(cfg: &RunConfig, c: &GenerateConfig, out: &Path) -> CliResult<Outcome> {
    let spec = &c.scenario;
    let truth = build_truth(spec)?;
    let mut manifest = Manifest::new(cfg);
    write_matrix_csv(&out.join("sigma.csv"), &truth.sigma)?;
    write_matrix_csv(&out.join("theta.csv"), &truth.theta)?;
    write_edges_csv(&out.join("edges.csv"), truth.true_edges.edges())?;
    manifest.files.extend(["sigma.csv", "theta.csv", "edges.csv"].map(String::from));
    for r in 0..c.repetitions {
        let data = sample_gaussian(&truth.sigma, spec.n, spec.seed, sample_index(spec.n, r))?;
        let name = data_file_name(r);
        write_data_csv(&out.join(&name), &data)?;
        manifest.files.push(name);
    }
    write_json(&out.join("spec.json"), spec)?;
    manifest.files.push("spec.json".into());
    manifest.write(out)?;
    log::info!(
        "{}: {} true edges, {} sample file(s) in {}",
        spec.tag(),
        truth.true_edges.len(),
        c.repetitions,
        out.display()
    );
    Ok(Outcome {
        out_dir: out.to_path_buf(),
        failures: 0,
    })
}

/// The anchor matrix of a growth: the ridge-regularised covariance of data, or a matrix as is.
pub fn load_anchor(path: &Path, kind: InputKind) -> CliResult<SymMatrix> {
    Ok(match kind {
        InputKind::Data => ridge_covariance(&read_data_csv(path)?)?,
        InputKind::Matrix => read_matrix(path)?,
    })
}

fn grow(cfg: &RunConfig, c: &GrowConfig, out: &Path) -> CliResult<Outcome> {
    let s = load_anchor(&c.input, c.input_kind)?;
    let opts = GrowthOptions {
        stopping: c.stopping,
        inner_rule: c.inner_rule,
        naive_losses: c.naive_losses,
    };
    let mut manifest = Manifest::new(cfg);
    let mut failures = 0;
    for &method in &c.methods {
        let stem = trace_stem(method);
        let started = Instant::now();
        let result = run_growth(&s, method, &opts, c.k_max, c.seed);
        let seconds = started.elapsed().as_secs_f64();
        let (trace, error) = match result {
            Ok(t) => (Some(t), None),
            Err(Error::GrowthAborted { partial, source }) => {
                log::error!("{method}: growth aborted after {} step(s): {source}", partial.steps.len());
                (Some(*partial), Some(source.to_string()))
            }
            Err(e) if e.is_compute() => {
                log::error!("{method}: {e}");
                (None, Some(e.to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(t) = &trace {
            write_trace(out, &stem, t)?;
            manifest.files.extend(
                ["jsonl", "csv", "meta.json"].map(|ext| format!("{stem}.{ext}")),
            );
        }
        failures += usize::from(error.is_some());
        manifest.runs.push(RunEntry {
            record: RunRecord {
                scenario: c.input.display().to_string(),
                method,
                repetition: 0,
                sample_index: None,
                tie_seed: c.seed,
                k_max: c.k_max,
                stopping: c.stopping,
                inner_rule: c.inner_rule,
                naive_losses: c.naive_losses,
                status: if error.is_some() { RunStatus::Failed } else { RunStatus::Ok },
                steps: trace.as_ref().map_or(0, GrowthTrace::reached),
                error,
            },
            reused: false,
            seconds: Some(seconds),
        });
    }
    manifest.write(out)?;
    Ok(Outcome {
        out_dir: out.to_path_buf(),
        failures,
    })
}

/// True edges from an `edges.csv` or from the pattern of a precision matrix.
pub fn load_truth(path: &Path, d: usize) -> CliResult<Support> {
    if is_edges_csv(path)? {
        return Ok(Support::from_edges(d, read_edges_csv(path)?)?);
    }
    let theta = read_matrix(path)?;
    if theta.dim() != d {
        return Err(CliError::config(format!(
            "truth {} has dimension {}, traces have d = {d}",
            path.display(),
            theta.dim()
        )));
    }
    Ok(Support::from_edges(d, theta.off_diagonal_pattern(EDGE_THRESHOLD))?)
}

fn trace_name(path: &Path) -> String {
    path.file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_suffix(".jsonl"))
        .unwrap_or("trace")
        .to_string()
}

fn evaluate(cfg: &RunConfig, c: &EvaluateConfig, out: &Path) -> CliResult<Outcome> {
    let traces = c
        .traces
        .iter()
        .map(|p| read_trace(p).map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    let d = traces[0].d;
    if let Some(t) = traces.iter().find(|t| t.d != d) {
        return Err(CliError::config(format!("traces mix d = {d} and d = {}", t.d)));
    }
    let truth = load_truth(&c.truth, d)?;
    let scenario = c.scenario.clone().unwrap_or_else(|| {
        c.truth
            .parent()
            .and_then(|p| p.file_name())
            .and_then(|n| n.to_str())
            .unwrap_or("scenario")
            .to_string()
    });

    let mut manifest = Manifest::new(cfg);
    let reports_dir = out.join("reports");
    ensure_dir(&reports_dir)?;
    let mut by_method: BTreeMap<GrowthMethod, Vec<(RecoveryReport, &GrowthTrace)>> = BTreeMap::new();
    for (idx, (path, trace)) in c.traces.iter().zip(&traces).enumerate() {
        let report = score_recovery(trace, &truth, &scenario)?;
        let name = format!("reports/{idx:04}_{}.csv", trace_name(path));
        write_text(&out.join(&name), &report_to_csv(&report))?;
        manifest.files.push(name);
        by_method.entry(trace.method).or_default().push((report, trace));
    }
    for (method, entries) in &by_method {
        let reports: Vec<RecoveryReport> = entries.iter().map(|(r, _)| r.clone()).collect();
        let summary = aggregate(&reports)?;
        write_text(&out.join(format!("summary_{method}.csv")), &summary_to_csv(&summary))?;
        write_json(&out.join(format!("summary_{method}.json")), &summary)?;
        manifest.files.push(format!("summary_{method}.csv"));
        manifest.files.push(format!("summary_{method}.json"));

        let method_traces: Vec<GrowthTrace> = entries.iter().map(|(_, t)| (*t).clone()).collect();
        let shortest = method_traces.iter().map(GrowthTrace::reached).min().unwrap_or(0);
        let k = c.detection_k.unwrap_or_else(|| truth.len().min(shortest));
        if k > 0 {
            let freq = detection_frequency(&method_traces, &truth, k)?;
            write_text(&out.join(format!("detection_{method}.csv")), &detection_to_csv(&freq))?;
            manifest.files.push(format!("detection_{method}.csv"));
        }
        log::info!(
            "{method}: {} trace(s), median AUC {:.4}",
            summary.repetitions,
            summary.auc_roc.median
        );
    }
    manifest.write(out)?;
    Ok(Outcome {
        out_dir: out.to_path_buf(),
        failures: 0,
    })
}

/// Subsampling summary written next to the rank table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n: usize,
    pub d: usize,
    pub n_sub: usize,
    pub sub_size: usize,
    pub used: usize,
    pub skipped: Vec<graphgrow_core::evaluation::SkippedSubsample>,
}

fn stability(cfg: &RunConfig, c: &StabilityConfig, out: &Path) -> CliResult<Outcome> {
    let data = read_data_csv(&c.input)?;
    let n = data.nrows();
    let sub_size = c.sub_size.unwrap_or((n / 2).max(1));
    if sub_size > n {
        return Err(CliError::config(format!("sub_size = {sub_size} exceeds n = {n}")));
    }
    let settings = StabilitySettings {
        n_sub: c.n_sub,
        sub_size,
        method: c.method,
        k_max: c.k_max,
        seed: c.seed,
        options: GrowthOptions {
            stopping: c.stopping,
            inner_rule: c.inner_rule,
            naive_losses: false,
        },
    };
    let result = stability_ranks(ridge_covariance, &data, &settings)?;
    for s in &result.skipped {
        log::warn!("subsample {} skipped: {}", s.index, s.reason);
    }
    let report = StabilityReport {
        n,
        d: data.ncols(),
        n_sub: c.n_sub,
        sub_size,
        used: result.distribution.repetitions,
        skipped: result.skipped.clone(),
    };
    write_text(&out.join("ranks.csv"), &ranks_to_csv(&result.distribution))?;
    write_json(&out.join("ranks.json"), &result.distribution)?;
    write_json(&out.join("stability.json"), &report)?;
    let mut manifest = Manifest::new(cfg);
    manifest.files.extend(["ranks.csv", "ranks.json", "stability.json"].map(String::from));
    manifest.write(out)?;
    log::info!(
        "{} of {} subsamples used, {} skipped",
        report.used,
        report.n_sub,
        report.skipped.len()
    );
    Ok(Outcome {
        out_dir: out.to_path_buf(),
        failures: 0,
    })
}

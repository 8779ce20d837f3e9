//! The `bench` command: scenario × sample size × method × repetition sweeps.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.json
//! <scenario>/truth/{sigma.csv, theta.csv, edges.csv, spec.json}
//! <scenario>/<method>/rep0000/{trace.jsonl, trace.csv, trace.meta.json, report.csv, run.json}
//! <scenario>/<method>/{summary.csv, summary.json, detection.csv}
//! ```
//!
//! Every repetition derives its sample stream and tie-break seed from the
//! scenario seed and its index, so results do not depend on `--jobs`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use graphgrow_core::evaluation::{detection_to_csv, report_to_csv, summary_to_csv};
use graphgrow_core::growth::trace_paths;
use graphgrow_core::io::{write_edges_csv, write_matrix_csv};
use graphgrow_core::rng::{derive_seed, SeedDomain};
use graphgrow_core::support::pair_count;
use graphgrow_core::{
    aggregate, build_truth, detection_frequency, read_trace, ridge_covariance, run_growth, sample_gaussian,
    score_recovery, write_trace, Error, GroundTruth, GrowthMethod, GrowthOptions, GrowthTrace, RecoveryReport,
    ScenarioSpec,
};
use rayon::prelude::*;

use crate::commands::{
    ensure_dir, sample_index, write_json, write_text, Manifest, Outcome, RunEntry, RunRecord, RunStatus,
};
use crate::config::{BenchConfig, RunConfig};
use crate::error::{CliError, CliResult};

const TRACE_STEM: &str = "trace";
const RUN_FILE: &str = "run.json";
const REPORT_FILE: &str = "report.csv";

/// Directory name of a scenario; the tag plus the seed keeps replicates apart.
pub fn scenario_dir_name(spec: &ScenarioSpec) -> String {
    format!("{}-s{}", spec.tag(), spec.seed)
}

pub fn rep_dir_name(r: usize) -> String {
    format!("rep{r:04}")
}

/// Default growth length: twice the number of true edges, capped by the edge count.
pub fn default_k_max(d: usize, m_true: usize) -> usize {
    (2 * m_true).clamp(1, pair_count(d))
}

struct Scenario {
    spec: ScenarioSpec,
    dir: PathBuf,
    truth: GroundTruth,
    k_max: usize,
}

struct Job<'a> {
    scenario: &'a Scenario,
    method: GrowthMethod,
    rep: usize,
}

struct JobResult {
    entry: RunEntry,
    report: Option<RecoveryReport>,
    trace: Option<GrowthTrace>,
}

fn record_for(job: &Job, c: &BenchConfig) -> RunRecord {
    let spec = &job.scenario.spec;
    RunRecord {
        scenario: scenario_dir_name(spec),
        method: job.method,
        repetition: job.rep,
        sample_index: Some(sample_index(spec.n, job.rep)),
        tie_seed: derive_seed(spec.seed, SeedDomain::TieBreak, job.rep as u64),
        k_max: job.scenario.k_max,
        stopping: c.stopping,
        inner_rule: c.inner_rule,
        naive_losses: c.naive_losses,
        status: RunStatus::Ok,
        steps: 0,
        error: None,
    }
}

/// A finished repetition whose stored settings match, or `None`.
fn try_resume(dir: &Path, expected: &RunRecord, tag: &str, truth: &GroundTruth) -> Option<JobResult> {
    let text = std::fs::read_to_string(dir.join(RUN_FILE)).ok()?;
    let stored: RunRecord = serde_json::from_str(&text).ok()?;
    let same_settings = RunRecord {
        status: stored.status,
        steps: stored.steps,
        error: stored.error.clone(),
        ..expected.clone()
    } == stored;
    if !same_settings || stored.status != RunStatus::Ok || !dir.join(REPORT_FILE).is_file() {
        return None;
    }
    let [jsonl, ..] = trace_paths(dir, TRACE_STEM);
    let trace = read_trace(&jsonl).ok()?;
    let report = score_recovery(&trace, &truth.true_edges, tag).ok()?;
    Some(JobResult {
        entry: RunEntry {
            record: stored,
            reused: true,
            seconds: None,
        },
        report: Some(report),
        trace: Some(trace),
    })
}

fn run_job(job: &Job, c: &BenchConfig) -> CliResult<JobResult> {
    let sc = job.scenario;
    let dir = sc.dir.join(job.method.as_str()).join(rep_dir_name(job.rep));
    let tag = scenario_dir_name(&sc.spec);
    let mut record = record_for(job, c);
    if c.resume {
        if let Some(done) = try_resume(&dir, &record, &tag, &sc.truth) {
            log::debug!("{tag}/{}/{}: reused", job.method, rep_dir_name(job.rep));
            return Ok(done);
        }
    }
    ensure_dir(&dir)?;

    let started = Instant::now();
    let opts = GrowthOptions {
        stopping: c.stopping,
        inner_rule: c.inner_rule,
        naive_losses: c.naive_losses,
    };
    let result = sample_gaussian(&sc.truth.sigma, sc.spec.n, sc.spec.seed, record.sample_index.unwrap_or(0))
        .and_then(|data| ridge_covariance(&data))
        .and_then(|s| run_growth(&s, job.method, &opts, sc.k_max, record.tie_seed));
    let seconds = started.elapsed().as_secs_f64();

    let (trace, error) = match result {
        Ok(t) => (Some(t), None),
        Err(Error::GrowthAborted { partial, source }) => (Some(*partial), Some(source.to_string())),
        Err(e) if e.is_compute() => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    if let Some(t) = &trace {
        write_trace(&dir, TRACE_STEM, t)?;
    }
    let report = match (&trace, &error) {
        (Some(t), None) => {
            let report = score_recovery(t, &sc.truth.true_edges, &tag)?;
            write_text(&dir.join(REPORT_FILE), &report_to_csv(&report))?;
            Some(report)
        }
        _ => None,
    };
    if let Some(msg) = &error {
        log::error!("{tag}/{}/{}: {msg}", job.method, rep_dir_name(job.rep));
        record.status = RunStatus::Failed;
        record.error = Some(msg.clone());
    }
    record.steps = trace.as_ref().map_or(0, GrowthTrace::reached);
    write_json(&dir.join(RUN_FILE), &record)?;
    Ok(JobResult {
        entry: RunEntry {
            record,
            reused: false,
            seconds: Some(seconds),
        },
        report,
        trace: if error.is_none() { trace } else { None },
    })
}

fn prepare_scenario(spec: ScenarioSpec, c: &BenchConfig, out: &Path, manifest: &mut Manifest) -> CliResult<Scenario> {
    let truth = build_truth(&spec)?;
    let name = scenario_dir_name(&spec);
    let dir = out.join(&name);
    let truth_dir = dir.join("truth");
    ensure_dir(&truth_dir)?;
    write_matrix_csv(&truth_dir.join("sigma.csv"), &truth.sigma)?;
    write_matrix_csv(&truth_dir.join("theta.csv"), &truth.theta)?;
    write_edges_csv(&truth_dir.join("edges.csv"), truth.true_edges.edges())?;
    write_json(&truth_dir.join("spec.json"), &spec)?;
    manifest
        .files
        .extend(["sigma.csv", "theta.csv", "edges.csv", "spec.json"].map(|f| format!("{name}/truth/{f}")));
    let k_max = c
        .k_max
        .unwrap_or_else(|| default_k_max(spec.d, truth.true_edges.len()));
    Ok(Scenario {
        spec,
        dir,
        truth,
        k_max,
    })
}

fn write_method_summary(
    sc: &Scenario,
    method: GrowthMethod,
    results: &[&JobResult],
    manifest: &mut Manifest,
) -> CliResult<()> {
    let reports: Vec<RecoveryReport> = results.iter().filter_map(|r| r.report.clone()).collect();
    let traces: Vec<GrowthTrace> = results.iter().filter_map(|r| r.trace.clone()).collect();
    let name = scenario_dir_name(&sc.spec);
    if reports.is_empty() {
        log::warn!("{name}/{method}: no successful repetitions, no summary written");
        return Ok(());
    }
    let dir = sc.dir.join(method.as_str());
    let summary = aggregate(&reports)?;
    write_text(&dir.join("summary.csv"), &summary_to_csv(&summary))?;
    write_json(&dir.join("summary.json"), &summary)?;
    manifest.files.push(format!("{name}/{method}/summary.csv"));
    manifest.files.push(format!("{name}/{method}/summary.json"));
    let k = sc.truth.true_edges.len().min(sc.k_max);
    if k > 0 {
        let freq = detection_frequency(&traces, &sc.truth.true_edges, k)?;
        write_text(&dir.join("detection.csv"), &detection_to_csv(&freq))?;
        manifest.files.push(format!("{name}/{method}/detection.csv"));
    }
    log::info!(
        "{name}/{method}: {} repetition(s), median AUC {:.4}",
        summary.repetitions,
        summary.auc_roc.median
    );
    Ok(())
}

pub(crate) fn bench(cfg: &RunConfig, c: &BenchConfig, out: &Path) -> CliResult<Outcome> {
    let mut manifest = Manifest::new(cfg);
    let scenarios = c
        .expanded_scenarios()
        .into_iter()
        .map(|spec| prepare_scenario(spec, c, out, &mut manifest))
        .collect::<CliResult<Vec<_>>>()?;

    let jobs: Vec<Job> = scenarios
        .iter()
        .flat_map(|sc| {
            c.methods.iter().flat_map(move |&method| {
                (0..c.repetitions_for(method)).map(move |rep| Job {
                    scenario: sc,
                    method,
                    rep,
                })
            })
        })
        .collect();
    log::info!("{} run(s) over {} scenario(s)", jobs.len(), scenarios.len());
    let results = jobs
        .par_iter()
        .map(|job| run_job(job, c))
        .collect::<CliResult<Vec<_>>>()?;

    for sc in &scenarios {
        for &method in &c.methods {
            let mine: Vec<&JobResult> = jobs
                .iter()
                .zip(&results)
                .filter(|(j, _)| std::ptr::eq(j.scenario, sc) && j.method == method)
                .map(|(_, r)| r)
                .collect();
            write_method_summary(sc, method, &mine, &mut manifest)?;
        }
    }
    let failures = results
        .iter()
        .filter(|r| r.entry.record.status == RunStatus::Failed)
        .count();
    manifest.runs = results.into_iter().map(|r| r.entry).collect();
    manifest.write(out)?;
    if failures > 0 {
        log::warn!("{failures} run(s) failed; see {}", out.join(crate::commands::MANIFEST_FILE).display());
    }
    Ok(Outcome {
        out_dir: out.to_path_buf(),
        failures,
    })
}

/// Loads every successful trace of a finished bench directory, in manifest order.
pub fn collect_traces(out: &Path) -> CliResult<Vec<(RunRecord, GrowthTrace)>> {
    let text = std::fs::read_to_string(out.join(crate::commands::MANIFEST_FILE))
        .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    manifest
        .runs
        .into_iter()
        .filter(|r| r.record.status == RunStatus::Ok)
        .map(|r| {
            let dir = out
                .join(&r.record.scenario)
                .join(r.record.method.as_str())
                .join(rep_dir_name(r.record.repetition));
            let [jsonl, ..] = trace_paths(&dir, TRACE_STEM);
            Ok((r.record, read_trace(&jsonl)?))
        })
        .collect()
}

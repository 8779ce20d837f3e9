//! Sequential graph growth.
//!
//! Every growth starts at the optimal diagonal matrix and activates one free
//! edge per step. The relaxed rules (GS, GSL, BBI) score free edges on the
//! current iterate; BFCI scores each free edge by the loss decrease of an
//! approximate full correction. After activation the descent re-optimises
//! over the enlarged support, warm-started at the previous iterate.
//!
//! The naive growths order edges by the magnitude of the sample precision
//! (PREC) or sample partial correlation (PCORR), with seeded random tie-breaks.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descent::{descend, InnerRule, StoppingConfig};
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::rng::{stream, SeedDomain};
use crate::selection::{corrected_candidate, relaxed_score, ScoredCandidate, SelectionRule};
use crate::spd::{loss_of, optimal_diagonal_init, SpdPair};
use crate::support::{all_edges, pair_count, Edge, Support};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthMethod {
    Gs,
    Gsl,
    Bbi,
    Bfci,
    Prec,
    Pcorr,
}

impl GrowthMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            GrowthMethod::Gs => "gs",
            GrowthMethod::Gsl => "gsl",
            GrowthMethod::Bbi => "bbi",
            GrowthMethod::Bfci => "bfci",
            GrowthMethod::Prec => "prec",
            GrowthMethod::Pcorr => "pcorr",
        }
    }

    pub fn selection_rule(&self) -> Option<SelectionRule> {
        match self {
            GrowthMethod::Gs => Some(SelectionRule::Gs),
            GrowthMethod::Gsl => Some(SelectionRule::Gsl),
            GrowthMethod::Bbi => Some(SelectionRule::Bbi),
            GrowthMethod::Bfci => Some(SelectionRule::Bfci),
            GrowthMethod::Prec | GrowthMethod::Pcorr => None,
        }
    }

    pub fn is_naive(&self) -> bool {
        self.selection_rule().is_none()
    }
}

impl From<SelectionRule> for GrowthMethod {
    fn from(rule: SelectionRule) -> Self {
        match rule {
            SelectionRule::Gs => GrowthMethod::Gs,
            SelectionRule::Gsl => GrowthMethod::Gsl,
            SelectionRule::Bbi => GrowthMethod::Bbi,
            SelectionRule::Bfci => GrowthMethod::Bfci,
        }
    }
}

impl fmt::Display for GrowthMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GrowthMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gs" => Ok(GrowthMethod::Gs),
            "gsl" => Ok(GrowthMethod::Gsl),
            "bbi" => Ok(GrowthMethod::Bbi),
            "bfci" => Ok(GrowthMethod::Bfci),
            "prec" => Ok(GrowthMethod::Prec),
            "pcorr" => Ok(GrowthMethod::Pcorr),
            other => Err(Error::InvalidArgument(format!("unknown growth method {other:?}"))),
        }
    }
}

/// Naive magnitude-ordering growths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NaiveMethod {
    Prec,
    Pcorr,
}

impl From<NaiveMethod> for GrowthMethod {
    fn from(m: NaiveMethod) -> Self {
        match m {
            NaiveMethod::Prec => GrowthMethod::Prec,
            NaiveMethod::Pcorr => GrowthMethod::Pcorr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthStep {
    pub k: usize,
    pub edge: Edge,
    /// Loss of the corrected iterate; `None` for naive growths run without losses.
    pub loss_after: Option<f64>,
    pub inner_iterations: usize,
    pub selection_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthTrace {
    pub method: GrowthMethod,
    pub d: usize,
    /// Requested number of steps.
    pub k_max: usize,
    /// Tie-break seed (naive growths only).
    pub seed: Option<u64>,
    /// Loss of the edgeless starting point, when computed.
    pub initial_loss: Option<f64>,
    pub steps: Vec<GrowthStep>,
}

impl GrowthTrace {
    pub fn edges(&self) -> Vec<Edge> {
        self.steps.iter().map(|s| s.edge).collect()
    }

    /// Number of steps actually reached.
    pub fn reached(&self) -> usize {
        self.steps.len()
    }

    pub fn total_inner_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.inner_iterations).sum()
    }
}

/// Options shared by all growth methods.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthOptions {
    pub stopping: StoppingConfig,
    /// Selection rule inside the full-correction descents.
    pub inner_rule: InnerRule,
    /// For naive growths: also run the corrections to report losses.
    pub naive_losses: bool,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        GrowthOptions {
            stopping: StoppingConfig::default(),
            inner_rule: InnerRule::Gsl,
            naive_losses: false,
        }
    }
}

fn check_k_max(d: usize, k_max: usize) -> Result<()> {
    let m = pair_count(d);
    if k_max == 0 || k_max > m {
        return Err(Error::InvalidArgument(format!(
            "k_max must be in 1..={m} for d = {d}, got {k_max}"
        )));
    }
    Ok(())
}

/// Relaxed or BFCI growth with the default inner rule (GSL).
pub fn grow(s: &SymMatrix, rule: SelectionRule, cfg: &StoppingConfig, k_max: usize) -> Result<GrowthTrace> {
    let opts = GrowthOptions {
        stopping: *cfg,
        ..GrowthOptions::default()
    };
    grow_with(s, rule, &opts, k_max)
}

pub fn grow_with(s: &SymMatrix, rule: SelectionRule, opts: &GrowthOptions, k_max: usize) -> Result<GrowthTrace> {
    let d = s.dim();
    check_k_max(d, k_max)?;
    opts.stopping.validate()?;
    let mut pair = optimal_diagonal_init(s)?;
    let mut support = Support::empty(d);
    let mut trace = GrowthTrace {
        method: rule.into(),
        d,
        k_max,
        seed: None,
        initial_loss: Some(loss_of(s, pair.q())?),
        steps: Vec::with_capacity(k_max),
    };
    for k in 1..=k_max {
        match growth_step(s, rule, opts, &mut pair, &mut support) {
            Ok((chosen, inner, loss)) => trace.steps.push(GrowthStep {
                k,
                edge: chosen.index_pair,
                loss_after: Some(loss),
                inner_iterations: inner,
                selection_score: chosen.score,
            }),
            Err(e) => {
                return Err(Error::GrowthAborted {
                    partial: Box::new(trace),
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(trace)
}

/// One activation plus correction. Returns the chosen candidate, the inner
/// iteration count and the loss after correction.
fn growth_step(
    s: &SymMatrix,
    rule: SelectionRule,
    opts: &GrowthOptions,
    pair: &mut SpdPair,
    support: &mut Support,
) -> Result<(ScoredCandidate, usize, f64)> {
    let free = support.free_edges();
    if rule == SelectionRule::Bfci {
        let best = free
            .par_iter()
            .map(|&e| {
                corrected_candidate(s, pair, support, e, opts.inner_rule, &opts.stopping)
                    .map(|(score, trial, iters)| (score, e, trial, iters))
            })
            .try_fold(
                || None,
                |acc: Option<(f64, Edge, SpdPair, usize)>, item| {
                    let item = item?;
                    if !item.0.is_finite() {
                        return Err(Error::Degenerate(format!("non-finite FCI score at {:?}", item.1)));
                    }
                    Ok(pick(acc, item))
                },
            )
            .try_reduce(|| None, |a, b| Ok(merge(a, b)))?;
        let (score, edge, trial, iters) = best.ok_or(Error::EmptyCandidates)?;
        support.push(edge)?;
        *pair = trial;
        let loss = loss_of(s, pair.q())?;
        let chosen = ScoredCandidate {
            index_pair: edge,
            score,
            rule,
        };
        return Ok((chosen, iters, loss));
    }
    let chosen = crate::selection::argmax_over(free, rule, |e| relaxed_score(rule, s, pair, e))?;
    support.push(chosen.index_pair)?;
    let report = descend(s, pair, support, opts.inner_rule, &opts.stopping)?;
    let loss = loss_of(s, pair.q())?;
    Ok((chosen, report.iterations, loss))
}

type Candidate = (f64, Edge, SpdPair, usize);

fn pick(acc: Option<Candidate>, item: Candidate) -> Option<Candidate> {
    match acc {
        Some(best) if !crate::selection::better(item.0, item.1, best.0, best.1) => Some(best),
        _ => Some(item),
    }
}

fn merge(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => pick(Some(x), y),
    }
}

/// Magnitude scores of all upper-diagonal pairs of `Ω = S⁻¹`.
pub fn naive_scores(s: &SymMatrix, method: NaiveMethod) -> Result<Vec<(Edge, f64)>> {
    let omega = s.inverse()?;
    Ok(all_edges(s.dim())
        .map(|(i, j)| {
            let w = omega.get(i, j);
            let score = match method {
                NaiveMethod::Prec => w.abs(),
                NaiveMethod::Pcorr => (w / (omega.get(i, i) * omega.get(j, j)).sqrt()).abs(),
            };
            ((i, j), score)
        })
        .collect())
}

/// PREC / PCORR growth: edges in decreasing score order, ties in seeded random order.
///
/// With `opts.naive_losses`, each prefix support is corrected by the descent
/// (warm-started along the ordering) so that losses are comparable with the
/// other growths.
pub fn grow_naive(
    s: &SymMatrix,
    method: NaiveMethod,
    k_max: usize,
    seed: u64,
    opts: &GrowthOptions,
) -> Result<GrowthTrace> {
    let d = s.dim();
    check_k_max(d, k_max)?;
    let mut scored = naive_scores(s, method)?;
    scored.shuffle(&mut stream(seed, SeedDomain::TieBreak, 0));
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.truncate(k_max);

    let mut trace = GrowthTrace {
        method: method.into(),
        d,
        k_max,
        seed: Some(seed),
        initial_loss: None,
        steps: Vec::with_capacity(k_max),
    };
    if !opts.naive_losses {
        trace.steps = scored
            .into_iter()
            .enumerate()
            .map(|(idx, (edge, score))| GrowthStep {
                k: idx + 1,
                edge,
                loss_after: None,
                inner_iterations: 0,
                selection_score: score,
            })
            .collect();
        return Ok(trace);
    }

    opts.stopping.validate()?;
    let mut pair = optimal_diagonal_init(s)?;
    let mut support = Support::empty(d);
    trace.initial_loss = Some(loss_of(s, pair.q())?);
    for (idx, (edge, score)) in scored.into_iter().enumerate() {
        let step = support.push(edge).and_then(|_| {
            let report = descend(s, &mut pair, &support, opts.inner_rule, &opts.stopping)?;
            Ok((report.iterations, loss_of(s, pair.q())?))
        });
        match step {
            Ok((inner, loss)) => trace.steps.push(GrowthStep {
                k: idx + 1,
                edge,
                loss_after: Some(loss),
                inner_iterations: inner,
                selection_score: score,
            }),
            Err(e) => {
                return Err(Error::GrowthAborted {
                    partial: Box::new(trace),
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(trace)
}

/// Runs any growth method. `seed` is used only for naive tie-breaks.
pub fn run_growth(
    s: &SymMatrix,
    method: GrowthMethod,
    opts: &GrowthOptions,
    k_max: usize,
    seed: u64,
) -> Result<GrowthTrace> {
    match method {
        GrowthMethod::Prec => grow_naive(s, NaiveMethod::Prec, k_max, seed, opts),
        GrowthMethod::Pcorr => grow_naive(s, NaiveMethod::Pcorr, k_max, seed, opts),
        other => grow_with(s, other.selection_rule().expect("non-naive"), opts, k_max),
    }
}

/// Activation step of an edge; edges never activated are censored at `k_max + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationRank {
    pub rank: usize,
    pub censored: bool,
}

pub fn activation_ranks(trace: &GrowthTrace) -> BTreeMap<Edge, ActivationRank> {
    let censored_rank = trace.k_max + 1;
    let mut ranks: BTreeMap<Edge, ActivationRank> = all_edges(trace.d)
        .map(|e| {
            (
                e,
                ActivationRank {
                    rank: censored_rank,
                    censored: true,
                },
            )
        })
        .collect();
    for step in &trace.steps {
        ranks.insert(
            step.edge,
            ActivationRank {
                rank: step.k,
                censored: false,
            },
        );
    }
    ranks
}

// ---- serialisation -------------------------------------------------------
//
// One record per step with stable field names. Indices are one-based in files.

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub k: usize,
    pub i: usize,
    pub j: usize,
    pub loss: Option<f64>,
    pub inner_iters: usize,
    pub score: f64,
}

impl From<&GrowthStep> for TraceRecord {
    fn from(s: &GrowthStep) -> Self {
        TraceRecord {
            k: s.k,
            i: s.edge.0 + 1,
            j: s.edge.1 + 1,
            loss: s.loss_after,
            inner_iters: s.inner_iterations,
            score: s.selection_score,
        }
    }
}

impl TraceRecord {
    fn into_step(self) -> Result<GrowthStep> {
        if self.i == 0 || self.j <= self.i {
            return Err(Error::InvalidArgument(format!(
                "trace record k={} has invalid pair ({}, {})",
                self.k, self.i, self.j
            )));
        }
        Ok(GrowthStep {
            k: self.k,
            edge: (self.i - 1, self.j - 1),
            loss_after: self.loss,
            inner_iterations: self.inner_iters,
            selection_score: self.score,
        })
    }
}

/// Trace metadata written next to the step records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceMeta {
    pub method: GrowthMethod,
    pub d: usize,
    pub k_max: usize,
    pub seed: Option<u64>,
    pub initial_loss: Option<f64>,
}

impl From<&GrowthTrace> for TraceMeta {
    fn from(t: &GrowthTrace) -> Self {
        TraceMeta {
            method: t.method,
            d: t.d,
            k_max: t.k_max,
            seed: t.seed,
            initial_loss: t.initial_loss,
        }
    }
}

pub fn trace_to_jsonl(trace: &GrowthTrace) -> Result<String> {
    let mut out = String::new();
    for step in &trace.steps {
        out.push_str(&serde_json::to_string(&TraceRecord::from(step))?);
        out.push('\n');
    }
    Ok(out)
}

pub const TRACE_CSV_HEADER: &str = "k,i,j,loss,inner_iters,score";

pub fn trace_to_csv(trace: &GrowthTrace) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for step in &trace.steps {
        let r = TraceRecord::from(step);
        let loss = r.loss.map(|v| format!("{v:?}")).unwrap_or_default();
        writeln!(out, "{},{},{},{},{},{:?}", r.k, r.i, r.j, loss, r.inner_iters, r.score).unwrap();
    }
    out
}

/// Parses JSON-lines step records; blank lines are skipped.
pub fn steps_from_jsonl(text: &str) -> Result<Vec<GrowthStep>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str::<TraceRecord>(l)?.into_step())
        .collect()
}

pub fn trace_from_parts(meta: TraceMeta, steps: Vec<GrowthStep>) -> Result<GrowthTrace> {
    for (idx, s) in steps.iter().enumerate() {
        if s.k != idx + 1 || s.edge.1 >= meta.d {
            return Err(Error::InvalidArgument(format!(
                "trace step {} inconsistent with d = {}",
                idx + 1,
                meta.d
            )));
        }
    }
    Ok(GrowthTrace {
        method: meta.method,
        d: meta.d,
        k_max: meta.k_max,
        seed: meta.seed,
        initial_loss: meta.initial_loss,
        steps,
    })
}

/// Paths of the three files that make up a stored trace.
pub fn trace_paths(dir: &Path, stem: &str) -> [PathBuf; 3] {
    [
        dir.join(format!("{stem}.jsonl")),
        dir.join(format!("{stem}.csv")),
        dir.join(format!("{stem}.meta.json")),
    ]
}

/// Writes `<stem>.jsonl`, `<stem>.csv` and the `<stem>.meta.json` sidecar.
pub fn write_trace(dir: &Path, stem: &str, trace: &GrowthTrace) -> Result<()> {
    let [jsonl, csv, meta] = trace_paths(dir, stem);
    fs::write(jsonl, trace_to_jsonl(trace)?)?;
    fs::write(csv, trace_to_csv(trace))?;
    fs::write(meta, serde_json::to_string_pretty(&TraceMeta::from(trace))? + "\n")?;
    Ok(())
}

/// Reads a `.jsonl` trace and its `.meta.json` sidecar.
pub fn read_trace(jsonl: &Path) -> Result<GrowthTrace> {
    let name = jsonl
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_suffix(".jsonl"))
        .ok_or_else(|| Error::parse(jsonl, "trace files must end in .jsonl"))?;
    let meta_path = jsonl.with_file_name(format!("{name}.meta.json"));
    let meta: TraceMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| Error::parse(&meta_path, e.to_string()))?;
    let steps = steps_from_jsonl(&fs::read_to_string(jsonl)?).map_err(|e| Error::parse(jsonl, e.to_string()))?;
    trace_from_parts(meta, steps).map_err(|e| Error::parse(jsonl, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex3() -> SymMatrix {
        SymMatrix::from_rows(&[
            vec![1.0, 0.4, 0.1],
            vec![0.4, 1.0, 0.3],
            vec![0.1, 0.3, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn k_max_bounds() {
        let s = ex3();
        assert!(grow(&s, SelectionRule::Gsl, &StoppingConfig::default(), 0).is_err());
        assert!(grow(&s, SelectionRule::Gsl, &StoppingConfig::default(), 4).is_err());
    }

    #[test]
    fn non_positive_diagonal_rejected() {
        let s = SymMatrix::from_diagonal(&[1.0, 0.0, 1.0]);
        assert!(matches!(
            grow(&s, SelectionRule::Gsl, &StoppingConfig::default(), 1),
            Err(Error::NonPositiveDiagonal { index: 1, .. })
        ));
    }

    #[test]
    fn ranks_censor_unactivated_edges() {
        let s = ex3();
        let t = grow(&s, SelectionRule::Gsl, &StoppingConfig::default(), 1).unwrap();
        let ranks = activation_ranks(&t);
        assert_eq!(ranks.len(), 3);
        assert_eq!(ranks.values().filter(|r| r.censored).count(), 2);
        assert!(ranks.values().filter(|r| r.censored).all(|r| r.rank == 2));
        assert_eq!(ranks[&t.steps[0].edge], ActivationRank { rank: 1, censored: false });

        let full = grow(&s, SelectionRule::Bbi, &StoppingConfig::default(), 3).unwrap();
        let mut r: Vec<usize> = activation_ranks(&full).values().map(|r| r.rank).collect();
        r.sort();
        assert_eq!(r, vec![1, 2, 3]);
    }

    #[test]
    fn jsonl_and_csv_layout() {
        let s = ex3();
        let t = grow(&s, SelectionRule::Gsl, &StoppingConfig::default(), 2).unwrap();
        let jsonl = trace_to_jsonl(&t).unwrap();
        let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
        let keys: Vec<&String> = first.as_object().unwrap().keys().collect();
        for k in ["k", "i", "j", "loss", "inner_iters", "score"] {
            assert!(keys.iter().any(|x| x.as_str() == k), "missing {k}");
        }
        let steps = steps_from_jsonl(&jsonl).unwrap();
        assert_eq!(steps, t.steps);
        let csv = trace_to_csv(&t);
        assert!(csv.starts_with("k,i,j,loss,inner_iters,score\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn trace_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = grow(&ex3(), SelectionRule::Bbi, &StoppingConfig::default(), 3).unwrap();
        write_trace(dir.path(), "trace_bbi", &t).unwrap();
        let back = read_trace(&dir.path().join("trace_bbi.jsonl")).unwrap();
        assert_eq!(back, t);
        assert!(read_trace(&dir.path().join("trace_bbi.csv")).is_err());
    }

    #[test]
    fn bad_trace_records_rejected() {
        assert!(steps_from_jsonl(r#"{"k":1,"i":2,"j":2,"loss":null,"inner_iters":0,"score":0.0}"#).is_err());
        assert!(steps_from_jsonl(r#"{"k":1,"i":1,"j":2,"loss":null,"inner_iters":0,"score":0.0,"x":1}"#).is_err());
    }
}

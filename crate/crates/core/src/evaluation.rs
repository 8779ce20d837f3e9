//! Graph-recovery metrics, aggregation across repetitions and subsampling
//! stability of activation ranks.
//!
//! Percentiles use linear interpolation between order statistics: for sorted
//! values `x₀ ≤ … ≤ x_{n-1}` the `p`-quantile is `x_⌊h⌋ + (h - ⌊h⌋)(x_⌈h⌉ - x_⌊h⌋)`
//! with `h = (n - 1) p`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{activation_ranks, run_growth, GrowthMethod, GrowthOptions, GrowthTrace};
use crate::matrix::SymMatrix;
use crate::rng::{stream, SeedDomain};
use crate::support::{pair_count, Edge, Support};

/// Version of the report file layouts.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryPoint {
    pub k: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub fpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub method: String,
    pub scenario: String,
    pub d: usize,
    pub m_true: usize,
    pub per_k: Vec<RecoveryPoint>,
    pub auc_roc: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion counts of every prefix of the trace against `truth`.
pub fn score_recovery(trace: &GrowthTrace, truth: &Support, scenario: &str) -> Result<RecoveryReport> {
    if trace.d != truth.dim() {
        return Err(Error::DimensionMismatch {
            expected: truth.dim(),
            found: trace.d,
        });
    }
    let total = pair_count(trace.d);
    let m_true = truth.len();
    let negatives = total - m_true;
    let mut tp = 0;
    let per_k: Vec<RecoveryPoint> = trace
        .steps
        .iter()
        .enumerate()
        .map(|(idx, step)| {
            let k = idx + 1;
            if truth.contains(step.edge) {
                tp += 1;
            }
            let fp = k - tp;
            RecoveryPoint {
                k,
                tp,
                fp,
                fn_: m_true - tp,
                tn: negatives - fp,
                precision: ratio(tp, k),
                recall: ratio(tp, m_true),
                fpr: ratio(fp, negatives),
            }
        })
        .collect();
    let auc_roc = roc_auc(&per_k);
    Ok(RecoveryReport {
        method: trace.method.to_string(),
        scenario: scenario.to_string(),
        d: trace.d,
        m_true,
        per_k,
        auc_roc,
    })
}

/// Trapezoid area under `(fpr, recall)` with the endpoints `(0, 0)` and `(1, 1)`.
pub fn roc_auc(points: &[RecoveryPoint]) -> f64 {
    let mut area = 0.0;
    let mut prev = (0.0, 0.0);
    for p in points.iter().map(|p| (p.fpr, p.recall)).chain(std::iter::once((1.0, 1.0))) {
        area += (p.0 - prev.0) * (p.1 + prev.1) / 2.0;
        prev = p;
    }
    area
}

/// Linear-interpolation quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
}

impl Band {
    pub fn of(values: &[f64]) -> Band {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Band {
            median: quantile_sorted(&v, 0.5),
            p10: quantile_sorted(&v, 0.1),
            p90: quantile_sorted(&v, 0.9),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoint {
    pub k: usize,
    pub precision: Band,
    pub recall: Band,
    pub fpr: Band,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub method: String,
    pub scenario: String,
    pub repetitions: usize,
    pub per_k: Vec<SummaryPoint>,
    pub auc_roc: Band,
}

/// Pointwise median and 10/90 percentiles across repetitions.
pub fn aggregate(reports: &[RecoveryReport]) -> Result<CurveSummary> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidArgument("no reports to aggregate".into()))?;
    for r in reports {
        if r.d != first.d || r.per_k.len() != first.per_k.len() {
            return Err(Error::InvalidArgument(format!(
                "reports disagree: d {} vs {}, {} vs {} steps",
                r.d,
                first.d,
                r.per_k.len(),
                first.per_k.len()
            )));
        }
    }
    let column = |k: usize, f: fn(&RecoveryPoint) -> f64| -> Vec<f64> {
        reports.iter().map(|r| f(&r.per_k[k])).collect()
    };
    let per_k = (0..first.per_k.len())
        .map(|k| SummaryPoint {
            k: k + 1,
            precision: Band::of(&column(k, |p| p.precision)),
            recall: Band::of(&column(k, |p| p.recall)),
            fpr: Band::of(&column(k, |p| p.fpr)),
        })
        .collect();
    let aucs: Vec<f64> = reports.iter().map(|r| r.auc_roc).collect();
    Ok(CurveSummary {
        method: first.method.clone(),
        scenario: first.scenario.clone(),
        repetitions: reports.len(),
        per_k,
        auc_roc: Band::of(&aucs),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrequency {
    pub k: usize,
    pub repetitions: usize,
    /// Every true edge, including those never detected.
    pub true_edges: BTreeMap<Edge, f64>,
    /// False edges detected at least once.
    pub false_positives: BTreeMap<Edge, f64>,
}

/// Fraction of traces whose first `k` steps contain each edge.
pub fn detection_frequency(traces: &[GrowthTrace], truth: &Support, k: usize) -> Result<DetectionFrequency> {
    if traces.is_empty() {
        return Err(Error::InvalidArgument("no traces".into()));
    }
    let mut counts: BTreeMap<Edge, usize> = truth.edges().iter().map(|&e| (e, 0)).collect();
    for t in traces {
        if t.d != truth.dim() {
            return Err(Error::DimensionMismatch {
                expected: truth.dim(),
                found: t.d,
            });
        }
        if t.reached() < k {
            return Err(Error::InvalidArgument(format!(
                "k = {k} exceeds a trace with {} steps",
                t.reached()
            )));
        }
        for step in &t.steps[..k] {
            *counts.entry(step.edge).or_insert(0) += 1;
        }
    }
    let n = traces.len() as f64;
    let (true_edges, false_positives) = counts
        .into_iter()
        .map(|(e, c)| (e, c as f64 / n))
        .partition(|(e, _)| truth.contains(*e));
    Ok(DetectionFrequency {
        k,
        repetitions: traces.len(),
        true_edges,
        false_positives,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRanks {
    pub edge: Edge,
    pub ranks: Vec<usize>,
    pub censored: Vec<bool>,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub p10: f64,
    pub p90: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankDistribution {
    pub k_max: usize,
    pub repetitions: usize,
    /// Ordered by median rank, ties lexicographic in the edge.
    pub per_edge: Vec<EdgeRanks>,
}

/// Activation-rank distributions of a set of traces over the same dimension.
///
/// Edges a trace never activates are censored at `k_max + 1`.
pub fn rank_distribution(traces: &[GrowthTrace]) -> Result<RankDistribution> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidArgument("no traces".into()))?;
    let mut per_edge: BTreeMap<Edge, (Vec<usize>, Vec<bool>)> = BTreeMap::new();
    for t in traces {
        if t.d != first.d || t.k_max != first.k_max {
            return Err(Error::InvalidArgument("traces disagree on d or k_max".into()));
        }
        for (e, r) in activation_ranks(t) {
            let entry = per_edge.entry(e).or_default();
            entry.0.push(r.rank);
            entry.1.push(r.censored);
        }
    }
    let mut per_edge: Vec<EdgeRanks> = per_edge
        .into_iter()
        .map(|(edge, (ranks, censored))| {
            let mut v: Vec<f64> = ranks.iter().map(|&r| r as f64).collect();
            v.sort_by(f64::total_cmp);
            EdgeRanks {
                edge,
                median: quantile_sorted(&v, 0.5),
                q25: quantile_sorted(&v, 0.25),
                q75: quantile_sorted(&v, 0.75),
                p10: quantile_sorted(&v, 0.1),
                p90: quantile_sorted(&v, 0.9),
                ranks,
                censored,
            }
        })
        .collect();
    per_edge.sort_by(|a, b| a.median.total_cmp(&b.median).then(a.edge.cmp(&b.edge)));
    Ok(RankDistribution {
        k_max: first.k_max,
        repetitions: traces.len(),
        per_edge,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilitySettings {
    pub n_sub: usize,
    pub sub_size: usize,
    pub method: GrowthMethod,
    pub k_max: usize,
    pub seed: u64,
    pub options: GrowthOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedSubsample {
    pub index: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub distribution: RankDistribution,
    pub skipped: Vec<SkippedSubsample>,
}

fn constant_column(data: &DMatrix<f64>) -> Option<usize> {
    (0..data.ncols()).find(|&j| {
        let col = data.column(j);
        col.iter().all(|&v| v == col[0])
    })
}

/// Growth on `n_sub` subsamples drawn without replacement.
///
/// Subsamples with a constant column are skipped and reported. Subsample `r`
/// uses its own stream, so results do not depend on the thread count.
pub fn stability_ranks<B>(s_builder: B, data: &DMatrix<f64>, settings: &StabilitySettings) -> Result<StabilityResult>
where
    B: Fn(&DMatrix<f64>) -> Result<SymMatrix> + Sync,
{
    let n = data.nrows();
    if settings.sub_size == 0 || settings.sub_size > n {
        return Err(Error::InvalidArgument(format!(
            "sub_size must be in 1..={n}, got {}",
            settings.sub_size
        )));
    }
    if settings.n_sub == 0 {
        return Err(Error::InvalidArgument("n_sub must be at least 1".into()));
    }
    let outcomes: Vec<Result<std::result::Result<GrowthTrace, SkippedSubsample>>> = (0..settings.n_sub)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(settings.seed, SeedDomain::Subsample, r as u64);
            let mut rows = rand::seq::index::sample(&mut rng, n, settings.sub_size).into_vec();
            rows.sort_unstable();
            let sub = data.select_rows(rows.iter());
            if let Some(j) = constant_column(&sub) {
                return Ok(Err(SkippedSubsample {
                    index: r,
                    reason: format!("column {} has zero variance", j + 1),
                }));
            }
            let s = s_builder(&sub)?;
            let trace = run_growth(&s, settings.method, &settings.options, settings.k_max, settings.seed)?;
            Ok(Ok(trace))
        })
        .collect();
    let mut traces = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o? {
            Ok(t) => traces.push(t),
            Err(s) => skipped.push(s),
        }
    }
    if traces.is_empty() {
        return Err(Error::Degenerate(format!(
            "all {} subsamples were degenerate",
            settings.n_sub
        )));
    }
    Ok(StabilityResult {
        distribution: rank_distribution(&traces)?,
        skipped,
    })
}

// ---- file layouts ---------------------------------------------------------

pub const REPORT_CSV_HEADER: &str = "k,tp,fp,fn,tn,precision,recall,fpr";

pub fn report_to_csv(report: &RecoveryReport) -> String {
    let mut out = format!("{REPORT_CSV_HEADER}\n");
    for p in &report.per_k {
        writeln!(
            out,
            "{},{},{},{},{},{:?},{:?},{:?}",
            p.k, p.tp, p.fp, p.fn_, p.tn, p.precision, p.recall, p.fpr
        )
        .unwrap();
    }
    out
}

pub const SUMMARY_CSV_HEADER: &str =
    "k,precision_median,precision_p10,precision_p90,recall_median,recall_p10,recall_p90,fpr_median,fpr_p10,fpr_p90";

pub fn summary_to_csv(summary: &CurveSummary) -> String {
    let mut out = format!("{SUMMARY_CSV_HEADER}\n");
    for p in &summary.per_k {
        write!(out, "{}", p.k).unwrap();
        for b in [p.precision, p.recall, p.fpr] {
            write!(out, ",{:?},{:?},{:?}", b.median, b.p10, b.p90).unwrap();
        }
        out.push('\n');
    }
    out
}

pub const RANKS_CSV_HEADER: &str = "i,j,median,q25,q75,p10,p90,censored";

/// One row per edge in median order; indices are one-based.
pub fn ranks_to_csv(dist: &RankDistribution) -> String {
    let mut out = format!("{RANKS_CSV_HEADER}\n");
    for e in &dist.per_edge {
        writeln!(
            out,
            "{},{},{:?},{:?},{:?},{:?},{:?},{}",
            e.edge.0 + 1,
            e.edge.1 + 1,
            e.median,
            e.q25,
            e.q75,
            e.p10,
            e.p90,
            e.censored.iter().filter(|c| **c).count()
        )
        .unwrap();
    }
    out
}

pub const DETECTION_CSV_HEADER: &str = "i,j,true_edge,frequency";

pub fn detection_to_csv(freq: &DetectionFrequency) -> String {
    let mut out = format!("{DETECTION_CSV_HEADER}\n");
    for (flag, map) in [(true, &freq.true_edges), (false, &freq.false_positives)] {
        for (e, f) in map {
            writeln!(out, "{},{},{},{:?}", e.0 + 1, e.1 + 1, flag, f).unwrap();
        }
    }
    out
}

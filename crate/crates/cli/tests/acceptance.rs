//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so that every line is printed; the
//! process fails if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::{eig, loss_eig, lu_inverse, optimal_loss, random_edges, random_spd, rng};
use graphgrow_cli::bench::collect_traces;
use graphgrow_cli::config::BenchConfig;
use graphgrow_cli::{execute_with_jobs, RunConfig};
use graphgrow_core::descent::verify_rate_bound;
use graphgrow_core::evaluation::CurveSummary;
use graphgrow_core::support::{all_edges, pair_count};
use graphgrow_core::{
    build_truth, descend, descend_recorded, grow, loss_gradient, loss_of, optimal_diagonal_init, ridge_covariance,
    sample_gaussian, score_recovery, update_order2, Edge, GrowthMethod, InnerRule, ScenarioSpec, SelectionRule,
    SpdPair, StoppingConfig, Support,
};
use rand::Rng;

type Criterion<'a> = (u32, &'static str, Box<dyn FnOnce() -> Verdict + 'a>);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn timed(f: impl FnOnce() -> Verdict) -> (Verdict, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn frob_qr_minus_i(pair: &SpdPair) -> f64 {
    let prod = pair.q().as_dmatrix() * pair.r().as_dmatrix();
    let d = pair.dim();
    let mut sum = 0.0;
    for i in 0..d {
        for j in 0..d {
            let v = prod[(i, j)] - if i == j { 1.0 } else { 0.0 };
            sum += v * v;
        }
    }
    sum.sqrt()
}

/// Random PD iterate with its inverse computed independently.
fn random_pair(r: &mut rand_chacha::ChaCha8Rng, d: usize) -> SpdPair {
    let q = random_spd(r, d, 0.5);
    SpdPair::from_q(q).unwrap()
}

fn criterion_1() -> Verdict {
    let (v, elapsed) = timed(|| {
        let mut r = rng(1001);
        let (mut worst_grad, mut worst_imp, mut worst_cons) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..1000 {
            let d = r.random_range(2..=8);
            let s = random_spd(&mut r, d, 0.1);
            let mut pair = random_pair(&mut r, d);
            let i = r.random_range(0..d - 1);
            let j = r.random_range(i + 1..d);
            let before = loss_eig(s.as_dmatrix(), pair.q().as_dmatrix()).unwrap();
            let res = update_order2(&s, &mut pair, (i, j)).unwrap();
            let after = loss_eig(s.as_dmatrix(), pair.q().as_dmatrix()).unwrap();
            let g = loss_gradient(&s, &pair).unwrap();
            for (a, b) in [(i, i), (j, j), (i, j)] {
                worst_grad = worst_grad.max(g.get(a, b).abs());
            }
            worst_imp = worst_imp.max((res.improvement - (before - after)).abs());
            worst_cons = worst_cons.max(frob_qr_minus_i(&pair));
        }
        verdict(
            worst_grad <= 1e-10 && worst_imp <= 1e-10 && worst_cons <= 1e-10,
            format!("max |grad| {worst_grad:.2e}, max improvement error {worst_imp:.2e}, max ||QR-I|| {worst_cons:.2e}"),
        )
    });
    verdict(
        v.pass && elapsed < Duration::from_secs(10),
        format!("{}, {:.2}s", v.detail, elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Verdict {
    let mut r = rng(1002);
    let mut worst = 0.0f64;
    let mut worst_q = 0.0f64;
    for _ in 0..100 {
        let s = random_spd(&mut r, 2, 0.1);
        let t = grow(&s, SelectionRule::Gsl, &StoppingConfig::default(), 1).unwrap();
        let inv = lu_inverse(s.as_dmatrix());
        let optimum = loss_eig(s.as_dmatrix(), &inv).unwrap();
        worst = worst.max((t.steps[0].loss_after.unwrap() - optimum).abs());

        let mut pair = optimal_diagonal_init(&s).unwrap();
        update_order2(&s, &mut pair, (0, 1)).unwrap();
        worst_q = worst_q.max((pair.q().as_dmatrix() - &inv).amax() / inv.amax());
    }
    verdict(
        worst <= 1e-12,
        format!("max loss gap {worst:.2e} over 100 instances, max relative |Q - S^-1| {worst_q:.2e}"),
    )
}

fn criterion_3() -> Verdict {
    let (v, elapsed) = timed(|| {
        let mut r = rng(1003);
        let mut failures = Vec::new();
        let mut worst = f64::NEG_INFINITY;
        for seed in 0..20 {
            let d = r.random_range(3..=8);
            let s = random_spd(&mut r, d, 0.2);
            let edges: Vec<Edge> = if seed % 2 == 0 {
                all_edges(d).collect()
            } else {
                let k = r.random_range(1..=d);
                random_edges(&mut r, d, k)
            };
            let support = Support::from_edges(d, edges).unwrap();
            let mut oracle = optimal_diagonal_init(&s).unwrap();
            descend(&s, &mut oracle, &support, InnerRule::Gs, &StoppingConfig::fixed_budget(1e-14, 1_000_000))
                .unwrap();
            let optimum = loss_of(&s, oracle.q()).unwrap();
            let opt_eig = eig(oracle.q().as_dmatrix());
            let (mut lmin, mut lmax) = (opt_eig[0], opt_eig[d - 1]);
            let mut pair = optimal_diagonal_init(&s).unwrap();
            let report = descend_recorded(
                &s,
                &mut pair,
                &support,
                InnerRule::Gs,
                &StoppingConfig::fixed_budget(1e-300, 500),
                |p, _| {
                    let ev = eig(p.q().as_dmatrix());
                    lmin = lmin.min(ev[0]);
                    lmax = lmax.max(ev[d - 1]);
                },
            )
            .unwrap();
            let traj = report.loss_trajectory.unwrap();
            let check = verify_rate_bound(&traj, optimum, &support, (lmin, lmax)).unwrap();
            worst = worst.max(check.worst_excess);
            if !check.holds() {
                failures.push(seed);
            }
        }
        verdict(
            failures.is_empty(),
            format!("20 instances, worst excess {worst:.2e}, failing seeds {failures:?}"),
        )
    });
    verdict(
        v.pass && elapsed < Duration::from_secs(60),
        format!("{}, {:.2}s", v.detail, elapsed.as_secs_f64()),
    )
}

fn criterion_4() -> Verdict {
    let mut r = rng(1004);
    let cfg = StoppingConfig::fixed_budget(1e-12, 100_000);
    let mut mismatches = 0;
    let mut steps = 0;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let s = random_spd(&mut r, 4, 0.1);
        let t = grow(&s, SelectionRule::Bfci, &cfg, pair_count(4)).unwrap();
        let mut active: Vec<Edge> = Vec::new();
        let mut f_prev = optimal_loss(&s, &active);
        for step in &t.steps {
            let mut best = f64::NEG_INFINITY;
            let mut chosen = f64::NAN;
            for e in all_edges(4).filter(|e| !active.contains(e)) {
                let mut with = active.clone();
                with.push(e);
                let v = f_prev - optimal_loss(&s, &with);
                best = best.max(v);
                if e == step.edge {
                    chosen = v;
                }
            }
            steps += 1;
            worst = worst.max(best - chosen);
            if chosen < best - 1e-9 {
                mismatches += 1;
            }
            active.push(step.edge);
            f_prev = optimal_loss(&s, &active);
        }
    }
    verdict(
        mismatches == 0,
        format!("{steps} growth steps over 20 seeds, {mismatches} mismatches, largest shortfall {worst:.2e}"),
    )
}

fn criterion_5() -> Verdict {
    let mut r = rng(1005);
    let mut worst_grad = 0.0f64;
    let mut worst_curv = 0.0f64;
    for _ in 0..20 {
        let d = 4;
        let s = random_spd(&mut r, d, 0.5);
        let pair = random_pair(&mut r, d);
        let q = pair.q().as_dmatrix().clone();
        let sm = s.as_dmatrix();
        let g = loss_gradient(&s, &pair).unwrap();
        let h = 1e-6;
        for i in 0..d {
            for j in i..d {
                // Symmetric direction E = e_i e_jᵀ + e_j e_iᵀ (or e_i e_iᵀ on the diagonal).
                let dir = |t: f64| {
                    let mut m = q.clone();
                    m[(i, j)] += t;
                    if i != j {
                        m[(j, i)] += t;
                    }
                    m
                };
                let f = |t: f64| loss_eig(sm, &dir(t)).unwrap();
                let fd = (f(h) - f(-h)) / (2.0 * h);
                let analytic = if i == j { g.get(i, i) } else { 2.0 * g.get(i, j) };
                worst_grad = worst_grad.max((fd - analytic).abs());
                if i != j {
                    let hh = 1e-4;
                    let second = (f(hh) - 2.0 * f(0.0) + f(-hh)) / (hh * hh);
                    let rm = pair.r();
                    let denom = rm.get(i, i) * rm.get(j, j) + rm.get(i, j).powi(2);
                    worst_curv = worst_curv.max((second / 2.0 - denom).abs() / denom);
                }
            }
        }
    }
    verdict(
        worst_grad <= 1e-5 && worst_curv <= 1e-4,
        format!("gradient max-abs error {worst_grad:.2e}, curvature relative error {worst_curv:.2e}"),
    )
}

fn criterion_6() -> Verdict {
    let hub = build_truth(&ScenarioSpec::hub(50, 0.25, 90, 7)).unwrap().true_edges.len();
    let clique = build_truth(&ScenarioSpec::clique(50, 0.25, 90, 7)).unwrap().true_edges.len();
    let randoms: Vec<(usize, usize)> = [0, 1, 40, 200, 1225]
        .iter()
        .map(|&m| (m, build_truth(&ScenarioSpec::random(50, m, 0.25, 90, 3)).unwrap().true_edges.len()))
        .collect();
    verdict(
        hub == 45 && clique == 225 && randoms.iter().all(|(a, b)| a == b),
        format!("hub {hub}, clique {clique}, random (requested, got) {randoms:?}"),
    )
}

fn read_summary(dir: &Path) -> CurveSummary {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn bench_config(scenarios: Vec<ScenarioSpec>, methods: Vec<GrowthMethod>, reps: usize, out: &Path) -> BenchConfig {
    BenchConfig {
        scenarios,
        ns: Vec::new(),
        methods,
        repetitions: reps,
        bfci_repetitions: None,
        k_max: None,
        stopping: StoppingConfig::default(),
        inner_rule: InnerRule::Gsl,
        naive_losses: true,
        resume: false,
        out: Some(out.to_path_buf()),
    }
}

fn criterion_7(out: &Path) -> Verdict {
    let (v, elapsed) = timed(|| {
        let spec = ScenarioSpec::random(50, 40, 0.25, 160, 2024);
        let cfg = bench_config(
            vec![spec.clone()],
            vec![GrowthMethod::Gsl, GrowthMethod::Prec, GrowthMethod::Pcorr],
            20,
            out,
        );
        let outcome = execute_with_jobs(&RunConfig::Bench(cfg), None).unwrap();
        let scen = out.join(graphgrow_cli::bench::scenario_dir_name(&spec));
        let s: BTreeMap<&str, CurveSummary> = ["gsl", "prec", "pcorr"]
            .into_iter()
            .map(|m| (m, read_summary(&scen.join(m))))
            .collect();
        let auc = |m: &str| s[m].auc_roc.median;
        let prec_at_m = |m: &str| s[m].per_k[39].precision.median;
        verdict(
            outcome.failures == 0
                && auc("gsl") > auc("prec")
                && auc("gsl") > auc("pcorr")
                && prec_at_m("gsl") >= prec_at_m("prec") + 0.1,
            format!(
                "median AUC gsl {:.4} prec {:.4} pcorr {:.4}; median precision at k=40 gsl {:.3} prec {:.3} pcorr {:.3}",
                auc("gsl"),
                auc("prec"),
                auc("pcorr"),
                prec_at_m("gsl"),
                prec_at_m("prec"),
                prec_at_m("pcorr")
            ),
        )
    });
    verdict(
        v.pass && elapsed < Duration::from_secs(600),
        format!("{}, {:.1}s", v.detail, elapsed.as_secs_f64()),
    )
}

/// Inner iterations are counted over the default growth length `2 m_true`.
/// While the active graph is a forest every new edge joins two trees and one
/// 2-update is already exact, so the first 30 steps alone cannot separate the
/// three thresholds.
fn criterion_8() -> Verdict {
    let spec = ScenarioSpec::hub(50, 0.25, 90, 7);
    let truth = build_truth(&spec).unwrap();
    let data = sample_gaussian(&truth.sigma, spec.n, spec.seed, 0).unwrap();
    let s = ridge_covariance(&data).unwrap();
    let k_max = graphgrow_cli::bench::default_k_max(spec.d, truth.true_edges.len());
    let runs: Vec<(usize, usize, f64)> = [1e-1, 1e-3, 1e-5]
        .into_iter()
        .map(|tau| {
            let t = grow(&s, SelectionRule::Gsl, &StoppingConfig::default().with_tau(tau), k_max).unwrap();
            let report = score_recovery(&t, &truth.true_edges, "tau").unwrap();
            let first_30: usize = t.steps[..30].iter().map(|st| st.inner_iterations).sum();
            (t.total_inner_iterations(), first_30, report.per_k[29].recall)
        })
        .collect();
    let iters_increase = runs.windows(2).all(|w| w[0].0 < w[1].0);
    let recalls: Vec<f64> = runs.iter().map(|r| r.2).collect();
    let spread = recalls.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - recalls.iter().cloned().fold(f64::INFINITY, f64::min);
    verdict(
        iters_increase && spread <= 0.1,
        format!(
            "hub d=50 n=90, tau 1e-1/1e-3/1e-5: inner iterations over k={k_max} {:?} (first 30 steps {:?}), recall at k=30 {:?} (spread {spread:.3})",
            runs.iter().map(|r| r.0).collect::<Vec<_>>(),
            runs.iter().map(|r| r.1).collect::<Vec<_>>(),
            recalls
        ),
    )
}

fn determinism_config(out: &Path) -> RunConfig {
    let mut cfg = bench_config(
        vec![ScenarioSpec::random(20, 15, 0.25, 60, 11), ScenarioSpec::hub(20, 0.25, 40, 12)],
        vec![
            GrowthMethod::Gsl,
            GrowthMethod::Bbi,
            GrowthMethod::Bfci,
            GrowthMethod::Prec,
            GrowthMethod::Pcorr,
        ],
        4,
        out,
    );
    cfg.ns = vec![30, 90];
    cfg.bfci_repetitions = Some(2);
    cfg.stopping = StoppingConfig::default().with_tau(1e-3);
    RunConfig::Bench(cfg)
}

/// Relative paths of every trace and report file below `root`.
fn result_files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let name = p.file_name().unwrap().to_str().unwrap();
                if name.starts_with("trace") || name.starts_with("report") || name.starts_with("summary") {
                    out.push(p.strip_prefix(root).unwrap().to_path_buf());
                }
            }
        }
    }
    out.sort();
    out
}

fn criterion_9(a: &Path, b: &Path) -> Verdict {
    execute_with_jobs(&determinism_config(a), Some(1)).unwrap();
    execute_with_jobs(&determinism_config(b), Some(3)).unwrap();
    let fa = result_files(a);
    let fb = result_files(b);
    let differing: Vec<&PathBuf> = fa
        .iter()
        .filter(|p| fs::read(a.join(p)).ok() != fs::read(b.join(p)).ok())
        .collect();
    verdict(
        !fa.is_empty() && fa == fb && differing.is_empty(),
        format!(
            "{} trace/report files compared across 1 and 3 threads, {} differ",
            fa.len(),
            differing.len()
        ),
    )
}

fn criterion_10(dirs: &[&Path]) -> Verdict {
    let mut traces = 0;
    let mut steps = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut missing = 0;
    for dir in dirs {
        for (_, t) in collect_traces(dir).unwrap() {
            traces += 1;
            let Some(mut prev) = t.initial_loss else {
                missing += 1;
                continue;
            };
            for st in &t.steps {
                let Some(l) = st.loss_after else {
                    missing += 1;
                    continue;
                };
                worst = worst.max(l - prev);
                prev = l;
                steps += 1;
            }
        }
    }
    verdict(
        traces > 0 && missing == 0 && worst <= 1e-12,
        format!("{traces} traces, {steps} steps, largest loss increase {worst:.2e}, {missing} unrecorded losses"),
    )
}

fn main() {
    // `cargo test` passes libtest flags; a filter that is not ours means skip.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let recovery = tmp.path().join("recovery");
    let det_a = tmp.path().join("det_a");
    let det_b = tmp.path().join("det_b");

    let criteria: Vec<Criterion> = vec![
        (1, "exact 2-updates", Box::new(criterion_1)),
        (2, "full-cover identity at d=2", Box::new(criterion_2)),
        (3, "GS linear-rate bound", Box::new(criterion_3)),
        (4, "BFCI vs exhaustive enumeration", Box::new(criterion_4)),
        (5, "gradient and curvature checks", Box::new(criterion_5)),
        (6, "generator edge counts", Box::new(criterion_6)),
        (7, "recovery ordering GSL vs PREC/PCORR", Box::new(|| criterion_7(&recovery))),
        (8, "stopping-rule monotonicity", Box::new(criterion_8)),
        (9, "bench determinism", Box::new(|| criterion_9(&det_a, &det_b))),
        (
            10,
            "loss monotonicity over bench traces",
            Box::new(|| criterion_10(&[&recovery, &det_a])),
        ),
    ];
    let mut failed = Vec::new();
    for (n, name, run) in criteria {
        let v = run();
        println!(
            "criterion {n:>2} {}: {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 10 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}

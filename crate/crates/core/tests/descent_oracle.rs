mod common;

use common::{eig, newton_optimum, optimal_loss, random_edges, random_spd, rng};
use graphgrow_core::descent::{descend_recorded, verify_rate_bound};
use graphgrow_core::support::all_edges;
use graphgrow_core::{
    descend, loss_gradient, loss_of, optimal_diagonal_init, InnerRule, SpdPair, StopReason, StoppingConfig,
    Support, SymMatrix,
};
use rand::Rng;

fn max_support_gradient(s: &SymMatrix, pair: &SpdPair, support: &Support) -> f64 {
    let g = loss_gradient(s, pair).unwrap();
    (0..s.dim())
        .map(|i| (i, i))
        .chain(support.edges().iter().copied())
        .map(|(i, j)| g.get(i, j).abs())
        .fold(0.0, f64::max)
}

#[test]
fn converges_to_newton_oracle_for_every_rule() {
    let mut r = rng(31);
    for rule in [InnerRule::Gs, InnerRule::Gsl, InnerRule::Bbi] {
        for _ in 0..5 {
            let d = r.random_range(3..=7);
            let s = random_spd(&mut r, d, 0.1);
            let k = r.random_range(1..=d * (d - 1) / 2);
            let edges = random_edges(&mut r, d, k);
            let support = Support::from_edges(d, edges.clone()).unwrap();
            let mut pair = optimal_diagonal_init(&s).unwrap();
            // run until improvements reach rounding level
            descend(&s, &mut pair, &support, rule, &StoppingConfig::fixed_budget(1e-300, 20_000)).unwrap();
            let oracle = newton_optimum(&s, &edges);
            let err = (pair.q().as_dmatrix() - &oracle).norm();
            assert!(err <= 1e-8 * (1.0 + oracle.norm()), "{rule}: {err}");
            let gap = loss_of(&s, pair.q()).unwrap() - optimal_loss(&s, &edges);
            assert!(gap.abs() <= 1e-10, "{rule}: gap {gap}");
        }
    }
}

#[test]
fn loss_is_monotone_and_support_is_respected() {
    let mut r = rng(32);
    for rule in [InnerRule::Gs, InnerRule::Gsl, InnerRule::Bbi] {
        for _ in 0..10 {
            let d = r.random_range(3..=8);
            let s = random_spd(&mut r, d, 0.05);
            let edges = random_edges(&mut r, d, d);
            let support = Support::from_edges(d, edges).unwrap();
            let mut pair = optimal_diagonal_init(&s).unwrap();
            let report = descend_recorded(&s, &mut pair, &support, rule, &StoppingConfig::default(), |p, _| {
                for e in all_edges(d) {
                    if !support.contains(e) {
                        assert_eq!(p.q().get(e.0, e.1), 0.0);
                    }
                }
            })
            .unwrap();
            let traj = report.loss_trajectory.unwrap();
            assert_eq!(traj.len(), report.iterations + 1);
            for w in traj.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }
}

#[test]
fn stationarity_tightens_with_tau() {
    let mut r = rng(33);
    for _ in 0..5 {
        let s = random_spd(&mut r, 6, 0.1);
        let support = Support::from_edges(6, random_edges(&mut r, 6, 8)).unwrap();
        let mut last = f64::INFINITY;
        for tau in [1e-3, 1e-6, 1e-9, 1e-12] {
            let mut pair = optimal_diagonal_init(&s).unwrap();
            descend(&s, &mut pair, &support, InnerRule::Gsl, &StoppingConfig::fixed_budget(tau, 100_000)).unwrap();
            let g = max_support_gradient(&s, &pair, &support);
            assert!(g <= last * (1.0 + 1e-9) + 1e-15, "tau {tau}: {g} after {last}");
            last = g;
        }
        // the final gradient scales like the square root of tau
        assert!(last <= 1e-5);
    }
}

#[test]
fn stop_reasons() {
    let s = SymMatrix::from_rows(&[vec![1.0, 0.3, 0.0], vec![0.3, 1.0, 0.2], vec![0.0, 0.2, 1.0]]).unwrap();
    let support = Support::from_edges(3, [(0, 1), (1, 2)]).unwrap();
    let mut pair = optimal_diagonal_init(&s).unwrap();
    let rep = descend(&s, &mut pair, &support, InnerRule::Gsl, &StoppingConfig::fixed_budget(1e-12, 1)).unwrap();
    assert_eq!(rep.stop_reason, StopReason::IterCap);
    assert_eq!(rep.iterations, 1);
    let rep = descend(&s, &mut pair, &support, InnerRule::Gsl, &StoppingConfig::fixed_budget(1e-5, 10_000)).unwrap();
    assert_eq!(rep.stop_reason, StopReason::Fraction);
    let rep = descend(&s, &mut pair, &support, InnerRule::Gsl, &StoppingConfig::default()).unwrap();
    assert!(matches!(rep.stop_reason, StopReason::Fraction | StopReason::Stationary));
}

/// GS trajectories against the linear-rate bound and the per-step inequality.
#[test]
fn gs_descent_satisfies_rate_bound() {
    let mut r = rng(34);
    for seed in 0..20 {
        let d = r.random_range(3..=8);
        let s = random_spd(&mut r, d, 0.2);
        let edges = if seed % 2 == 0 {
            all_edges(d).collect()
        } else {
            let k = r.random_range(1..=d);
            random_edges(&mut r, d, k)
        };
        let support = Support::from_edges(d, edges.clone()).unwrap();

        let mut oracle = optimal_diagonal_init(&s).unwrap();
        descend(&s, &mut oracle, &support, InnerRule::Gs, &StoppingConfig::fixed_budget(1e-14, 1_000_000)).unwrap();
        let optimum = loss_of(&s, oracle.q()).unwrap();
        let opt_eig = eig(oracle.q().as_dmatrix());

        let mut pair = optimal_diagonal_init(&s).unwrap();
        let (mut lmin, mut lmax) = (opt_eig[0], opt_eig[d - 1]);
        let report = descend_recorded(&s, &mut pair, &support, InnerRule::Gs, &StoppingConfig::fixed_budget(1e-300, 200), |p, _| {
            let ev = eig(p.q().as_dmatrix());
            lmin = lmin.min(ev[0]);
            lmax = lmax.max(ev[d - 1]);
        })
        .unwrap();
        let traj = report.loss_trajectory.unwrap();
        let check = verify_rate_bound(&traj, optimum, &support, (lmin, lmax)).unwrap();
        assert!(check.holds(), "seed {seed}: {check:?}");
    }
}

/// Each GS block update improves at least as much as the exact line search
/// along the chosen unit direction, which is bounded below by `g² / (2L)`.
#[test]
fn gs_steps_satisfy_line_search_bound() {
    let mut r = rng(35);
    for _ in 0..20 {
        let d = r.random_range(3..=8);
        let s = random_spd(&mut r, d, 0.2);
        let support = Support::from_edges(d, random_edges(&mut r, d, d)).unwrap();
        let mut steps = Vec::new();
        let mut lmin = f64::INFINITY;
        let mut pair = optimal_diagonal_init(&s).unwrap();
        descend_recorded(&s, &mut pair, &support, InnerRule::Gs, &StoppingConfig::fixed_budget(1e-300, 100), |p, info| {
            lmin = lmin.min(eig(p.q().as_dmatrix())[0]);
            if let Some(info) = info {
                steps.push((info.score, info.improvement));
            }
        })
        .unwrap();
        let l = 1.0 / (lmin * lmin);
        for (g, imp) in steps {
            assert!(imp >= g * g / (2.0 * l) - 1e-12, "improvement {imp} below {}", g * g / (2.0 * l));
        }
    }
}

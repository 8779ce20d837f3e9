//! Support-restricted coordinate descent with {1,2}-updates.
//!
//! Each iteration picks a coordinate in `D ∪ E` by an inner rule and applies
//! the exact block update. The descent stops when the current improvement
//! falls to `tau` times the first one, when `min(hard_cap, ⌈alpha |E| + beta⌉)`
//! iterations have run, or immediately when the first improvement is below
//! `1e-15 (1 + |f|)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::block_update::{improvement_dry, update_block};
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::selection::{better, inner_score};
use crate::spd::{loss_of, SpdPair};
use crate::support::{Edge, Support};

/// Relative floor below which the first improvement counts as zero.
pub const STATIONARY_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingConfig {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub hard_cap: usize,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        StoppingConfig {
            alpha: 1.0,
            beta: 10.0,
            tau: 1e-5,
            hard_cap: 1_000_000,
        }
    }
}

impl StoppingConfig {
    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    /// A fixed iteration budget independent of the support size.
    pub fn fixed_budget(tau: f64, iterations: usize) -> Self {
        StoppingConfig {
            alpha: 0.0,
            beta: iterations as f64,
            tau,
            hard_cap: iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidArgument(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        if self.hard_cap == 0 {
            return Err(Error::InvalidArgument("hard_cap must be positive".into()));
        }
        Ok(())
    }

    /// `min(hard_cap, ⌈alpha m + beta⌉)` for `m` active edges.
    pub fn max_iterations(&self, edge_count: usize) -> usize {
        let cap = (self.alpha * edge_count as f64 + self.beta).ceil();
        if cap >= self.hard_cap as f64 {
            self.hard_cap
        } else {
            cap as usize
        }
    }
}

/// Coordinate selection rule inside the descent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerRule {
    Gs,
    #[default]
    Gsl,
    Bbi,
}

impl fmt::Display for InnerRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InnerRule::Gs => "gs",
            InnerRule::Gsl => "gsl",
            InnerRule::Bbi => "bbi",
        })
    }
}

impl FromStr for InnerRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gs" => Ok(InnerRule::Gs),
            "gsl" => Ok(InnerRule::Gsl),
            "bbi" => Ok(InnerRule::Bbi),
            other => Err(Error::InvalidArgument(format!("unknown inner rule {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    Fraction,
    IterCap,
    Stationary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub iterations: usize,
    pub initial_improvement: f64,
    pub final_improvement: f64,
    /// Loss at the start and after every update, when recording was requested.
    pub loss_trajectory: Option<Vec<f64>>,
    pub stop_reason: StopReason,
}

/// Details of one applied update, passed to observers.
#[derive(Clone, Copy, Debug)]
pub struct StepInfo {
    pub t: usize,
    pub index_pair: Edge,
    /// Selection score of the chosen coordinate.
    pub score: f64,
    pub improvement: f64,
}

fn check_support(pair: &SpdPair, support: &Support) -> Result<()> {
    if support.dim() != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            found: support.dim(),
        });
    }
    for e in pair.edges() {
        if !support.contains(e) {
            return Err(Error::SupportViolation { i: e.0, j: e.1 });
        }
    }
    Ok(())
}

fn select(rule: InnerRule, s: &SymMatrix, pair: &SpdPair, support: &Support) -> Result<(Edge, f64)> {
    let d = pair.dim();
    let mut best_edge = (0, 0);
    let mut best_score = f64::NEG_INFINITY;
    let candidates = (0..d).map(|i| (i, i)).chain(support.edges().iter().copied());
    for idx in candidates {
        let score = inner_score(rule, s, pair, idx)?;
        if !score.is_finite() {
            return Err(Error::Degenerate(format!("non-finite score at {idx:?}")));
        }
        if better(score, idx, best_score, best_edge) {
            best_score = score;
            best_edge = idx;
        }
    }
    Ok((best_edge, best_score))
}

/// Runs the descent in place on `pair`. The support never grows.
pub fn descend(
    s: &SymMatrix,
    pair: &mut SpdPair,
    support: &Support,
    rule: InnerRule,
    cfg: &StoppingConfig,
) -> Result<DescentReport> {
    run(s, pair, support, rule, cfg, false, |_, _| {})
}

/// Like [`descend`], but records the exact loss after every update and calls
/// `observe` with the initial iterate (`None`) and after each update.
pub fn descend_recorded<F>(
    s: &SymMatrix,
    pair: &mut SpdPair,
    support: &Support,
    rule: InnerRule,
    cfg: &StoppingConfig,
    observe: F,
) -> Result<DescentReport>
where
    F: FnMut(&SpdPair, Option<&StepInfo>),
{
    run(s, pair, support, rule, cfg, true, observe)
}

fn run<F>(
    s: &SymMatrix,
    pair: &mut SpdPair,
    support: &Support,
    rule: InnerRule,
    cfg: &StoppingConfig,
    record: bool,
    mut observe: F,
) -> Result<DescentReport>
where
    F: FnMut(&SpdPair, Option<&StepInfo>),
{
    s.check_same_dim(pair.q())?;
    cfg.validate()?;
    check_support(pair, support)?;

    let f0 = loss_of(s, pair.q())?;
    let floor = STATIONARY_FLOOR * (1.0 + f0.abs());
    let max_iter = cfg.max_iterations(support.len());
    let mut trajectory = record.then(|| vec![f0]);
    observe(pair, None);

    let mut iterations = 0;
    let mut initial = 0.0;
    let mut last = 0.0;
    let stop_reason = loop {
        if iterations >= max_iter {
            break StopReason::IterCap;
        }
        let (idx, score) = select(rule, s, pair, support)?;
        if iterations == 0 {
            let dry = improvement_dry(s, pair, idx)?;
            if dry <= floor {
                initial = dry;
                last = dry;
                break StopReason::Stationary;
            }
        }
        let res = update_block(s, pair, idx)?;
        iterations += 1;
        last = res.improvement;
        if iterations == 1 {
            initial = res.improvement;
        }
        if let Some(traj) = trajectory.as_mut() {
            traj.push(loss_of(s, pair.q())?);
        }
        observe(
            pair,
            Some(&StepInfo {
                t: iterations,
                index_pair: idx,
                score,
                improvement: res.improvement,
            }),
        );
        if iterations >= 2 && last <= cfg.tau * initial {
            break StopReason::Fraction;
        }
    };

    Ok(DescentReport {
        iterations,
        initial_improvement: initial,
        final_improvement: last,
        loss_trajectory: trajectory,
        stop_reason,
    })
}

/// Outcome of checking a recorded GS trajectory against the linear-rate bound.
#[derive(Clone, Debug, PartialEq)]
pub struct RateBoundCheck {
    /// `1 - μ / (m L)` with `μ = 1/λ_max²`, `L = 1/λ_min²`, `m = |D ∪ E|`.
    pub rate: f64,
    /// `gap_t <= rate^t gap_0` at every `t`.
    pub geometric_ok: bool,
    /// `gap_{t-1} <= (m L / μ)(f_{t-1} - f_t)` at every `t`.
    pub per_step_ok: bool,
    /// Largest violation of either inequality (negative when both hold with room).
    pub worst_excess: f64,
}

impl RateBoundCheck {
    pub fn holds(&self) -> bool {
        self.geometric_ok && self.per_step_ok
    }
}

/// Slack used by [`verify_rate_bound`].
pub const RATE_SLACK: f64 = 1e-9;

/// Checks a GS loss trajectory against the linear convergence bound, given
/// the loss `optimum` of the graph-optimal matrix and eigenvalue bounds
/// `(λ_min, λ_max)` over the iterates.
pub fn verify_rate_bound(
    trajectory: &[f64],
    optimum: f64,
    support: &Support,
    eigen_bounds: (f64, f64),
) -> Result<RateBoundCheck> {
    if trajectory.is_empty() {
        return Err(Error::InvalidArgument("missing trajectory".into()));
    }
    let (lmin, lmax) = eigen_bounds;
    if !(lmin > 0.0 && lmax >= lmin) {
        return Err(Error::InvalidArgument(format!(
            "invalid eigenvalue bounds ({lmin}, {lmax})"
        )));
    }
    let m = (support.dim() + support.len()) as f64;
    let mu = 1.0 / (lmax * lmax);
    let l = 1.0 / (lmin * lmin);
    let rate = 1.0 - mu / (m * l);
    let gap0 = trajectory[0] - optimum;
    let mut worst = f64::NEG_INFINITY;
    let mut geometric_ok = true;
    let mut per_step_ok = true;
    let mut factor = 1.0;
    for t in 1..trajectory.len() {
        factor *= rate;
        let gap = trajectory[t] - optimum;
        let excess = gap - factor * gap0;
        worst = worst.max(excess);
        if excess > RATE_SLACK {
            geometric_ok = false;
        }
        let prev_gap = trajectory[t - 1] - optimum;
        let step = trajectory[t - 1] - trajectory[t];
        let excess = prev_gap - (m * l / mu) * step;
        worst = worst.max(excess);
        if excess > RATE_SLACK {
            per_step_ok = false;
        }
    }
    Ok(RateBoundCheck {
        rate,
        geometric_ok,
        per_step_ok,
        worst_excess: worst,
    })
}

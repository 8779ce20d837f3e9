//! Candidate scoring and arg-max selection.
//!
//! Off-diagonal directions use the normalised basis `B(i, j) = (e_i e_jᵀ + e_j e_iᵀ)/√2`,
//! so `⟨∇f, B(i, j)⟩ = √2 (S_ij - R_ij)`. Ties in every arg-max go to the
//! lexicographically smallest `(i, j)`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block_update::{improvement_dry, improvement_order2_dry};
use crate::descent::{descend, InnerRule, StoppingConfig};
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::spd::{loss_of, SpdPair};
use crate::support::{Edge, Support};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionRule {
    Gs,
    Gsl,
    Bbi,
    Bfci,
}

impl SelectionRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionRule::Gs => "gs",
            SelectionRule::Gsl => "gsl",
            SelectionRule::Bbi => "bbi",
            SelectionRule::Bfci => "bfci",
        }
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gs" => Ok(SelectionRule::Gs),
            "gsl" => Ok(SelectionRule::Gsl),
            "bbi" => Ok(SelectionRule::Bbi),
            "bfci" => Ok(SelectionRule::Bfci),
            other => Err(Error::InvalidArgument(format!("unknown selection rule {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    /// `(i, j)` with `i <= j`; `i == j` is a diagonal coordinate.
    pub index_pair: Edge,
    pub score: f64,
    pub rule: SelectionRule,
}

/// `|⟨∇f_S(Q), B(i, j)⟩_F|`.
pub fn score_gs(s: &SymMatrix, pair: &SpdPair, (i, j): Edge) -> Result<f64> {
    check_candidate(s, pair, (i, j), true)?;
    let g = s.get(i, j) - pair.r().get(i, j);
    Ok(if i == j { g.abs() } else { std::f64::consts::SQRT_2 * g.abs() })
}

/// Squared directional derivative over curvature along `B(i, j)`:
/// `2 (S_ij - R_ij)² / (R_ii R_jj + R_ij²)`.
pub fn score_gsl(s: &SymMatrix, pair: &SpdPair, edge: Edge) -> Result<f64> {
    check_candidate(s, pair, edge, false)?;
    gsl_unchecked(s, pair.r(), edge)
}

/// GSL score extended to diagonal coordinates: `(S_ii - R_ii)² / R_ii²`.
pub(crate) fn gsl_unchecked(s: &SymMatrix, r: &SymMatrix, (i, j): Edge) -> Result<f64> {
    let g = s.get(i, j) - r.get(i, j);
    if i == j {
        let rii = r.get(i, i);
        if !(rii > 0.0) {
            return Err(Error::Degenerate(format!("non-positive curvature at ({i}, {i})")));
        }
        return Ok(g * g / (rii * rii));
    }
    let curvature = r.get(i, i) * r.get(j, j) + r.get(i, j) * r.get(i, j);
    if !(curvature > 0.0) {
        return Err(Error::Degenerate(format!("non-positive curvature at ({i}, {j})")));
    }
    Ok(2.0 * g * g / curvature)
}

/// Would-be improvement of the 2-update on `edge`.
pub fn score_bbi(s: &SymMatrix, pair: &SpdPair, edge: Edge) -> Result<f64> {
    check_candidate(s, pair, edge, false)?;
    improvement_order2_dry(s, pair, edge)
}

/// Loss decrease after activating `edge` and running the descent on the
/// enlarged support, warm-started at `pair`. The input pair is not touched.
pub fn score_fci(
    s: &SymMatrix,
    pair: &SpdPair,
    support: &Support,
    edge: Edge,
    inner: InnerRule,
    cfg: &StoppingConfig,
) -> Result<f64> {
    Ok(corrected_candidate(s, pair, support, edge, inner, cfg)?.0)
}

/// Runs the full correction for one candidate and returns `(improvement, corrected pair, inner iterations)`.
pub(crate) fn corrected_candidate(
    s: &SymMatrix,
    pair: &SpdPair,
    support: &Support,
    edge: Edge,
    inner: InnerRule,
    cfg: &StoppingConfig,
) -> Result<(f64, SpdPair, usize)> {
    check_candidate(s, pair, edge, false)?;
    if support.contains(edge) {
        return Err(Error::InvalidArgument(format!("edge {edge:?} is not free")));
    }
    let before = loss_of(s, pair.q())?;
    let mut trial = pair.clone();
    let mut enlarged = support.clone();
    enlarged.push(edge)?;
    let report = descend(s, &mut trial, &enlarged, inner, cfg)?;
    let after = loss_of(s, trial.q())?;
    Ok((before - after, trial, report.iterations))
}

fn check_candidate(s: &SymMatrix, pair: &SpdPair, (i, j): Edge, allow_diag: bool) -> Result<()> {
    s.check_same_dim(pair.q())?;
    let d = s.dim();
    if j >= d || i > j || (i == j && !allow_diag) {
        return Err(Error::InvalidIndex { i, j, dim: d });
    }
    Ok(())
}

/// Orders candidates by score, then prefers the lexicographically smaller pair.
#[inline]
pub(crate) fn better(score: f64, edge: Edge, best_score: f64, best_edge: Edge) -> bool {
    match score.partial_cmp(&best_score) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Equal) => edge < best_edge,
        _ => false,
    }
}

fn finite(score: f64, edge: Edge) -> Result<f64> {
    if score.is_finite() {
        Ok(score)
    } else {
        Err(Error::Degenerate(format!("non-finite score {score} at {edge:?}")))
    }
}

fn reduce_best(items: impl IntoIterator<Item = (f64, Edge)>) -> Option<(f64, Edge)> {
    items.into_iter().fold(None, |best, (score, edge)| match best {
        Some((bs, be)) if !better(score, edge, bs, be) => best,
        _ => Some((score, edge)),
    })
}

/// Maximal-score candidate; ties broken lexicographically.
pub fn argmax_over<I, F>(candidates: I, rule: SelectionRule, mut scorer: F) -> Result<ScoredCandidate>
where
    I: IntoIterator<Item = Edge>,
    F: FnMut(Edge) -> Result<f64>,
{
    let scored = candidates
        .into_iter()
        .map(|e| scorer(e).and_then(|v| finite(v, e)).map(|v| (v, e)))
        .collect::<Result<Vec<_>>>()?;
    reduce_best(scored)
        .map(|(score, index_pair)| ScoredCandidate { index_pair, score, rule })
        .ok_or(Error::EmptyCandidates)
}

/// Parallel arg-max for expensive scorers. Scores are collected in candidate
/// order and reduced sequentially, so the result does not depend on scheduling.
pub fn par_argmax_over<F>(candidates: &[Edge], rule: SelectionRule, scorer: F) -> Result<ScoredCandidate>
where
    F: Fn(Edge) -> Result<f64> + Sync,
{
    let scored = candidates
        .par_iter()
        .map(|&e| scorer(e).and_then(|v| finite(v, e)).map(|v| (v, e)))
        .collect::<Result<Vec<_>>>()?;
    reduce_best(scored)
        .map(|(score, index_pair)| ScoredCandidate { index_pair, score, rule })
        .ok_or(Error::EmptyCandidates)
}

/// Scores a free edge by the cheap relaxed rules (GS, GSL, BBI).
pub fn relaxed_score(rule: SelectionRule, s: &SymMatrix, pair: &SpdPair, edge: Edge) -> Result<f64> {
    match rule {
        SelectionRule::Gs => score_gs(s, pair, edge),
        SelectionRule::Gsl => score_gsl(s, pair, edge),
        SelectionRule::Bbi => score_bbi(s, pair, edge),
        SelectionRule::Bfci => Err(Error::InvalidArgument(
            "BFCI needs a support and descent configuration; use score_fci".into(),
        )),
    }
}

/// Inner-descent score over `D ∪ E`, including diagonal coordinates.
pub(crate) fn inner_score(rule: InnerRule, s: &SymMatrix, pair: &SpdPair, idx: Edge) -> Result<f64> {
    match rule {
        InnerRule::Gs => score_gs(s, pair, idx),
        InnerRule::Gsl => gsl_unchecked(s, pair.r(), idx),
        InnerRule::Bbi => improvement_dry(s, pair, idx),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::optimal_diagonal_init;

    #[test]
    fn gsl_hand_value() {
        let s = SymMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let pair = SpdPair::identity(2);
        assert!((score_gsl(&s, &pair, (0, 1)).unwrap() - 0.18).abs() < 1e-15);
    }

    #[test]
    fn gs_diagonal_vanishes_at_init() {
        let s = SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let pair = optimal_diagonal_init(&s).unwrap();
        assert_eq!(score_gs(&s, &pair, (0, 0)).unwrap(), 0.0);
        assert_eq!(score_gs(&s, &pair, (1, 1)).unwrap(), 0.0);
        assert!((score_gs(&s, &pair, (0, 1)).unwrap() - 0.3 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn argmax_ties_are_lexicographic() {
        let c = vec![(1, 2), (0, 2), (0, 1)];
        let best = argmax_over(c.clone(), SelectionRule::Gs, |_| Ok(1.0)).unwrap();
        assert_eq!(best.index_pair, (0, 1));
        let single = argmax_over(vec![(2, 3)], SelectionRule::Gs, |_| Ok(0.0)).unwrap();
        assert_eq!(single.index_pair, (2, 3));
        let par = par_argmax_over(&c, SelectionRule::Gs, |_| Ok(1.0)).unwrap();
        assert_eq!(par.index_pair, (0, 1));
    }

    #[test]
    fn argmax_errors() {
        assert!(matches!(
            argmax_over(Vec::new(), SelectionRule::Gsl, |_| Ok(0.0)),
            Err(Error::EmptyCandidates)
        ));
        assert!(matches!(
            argmax_over(vec![(0, 1)], SelectionRule::Gsl, |_| Ok(f64::NAN)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn off_diagonal_rules_reject_diagonal() {
        let s = SymMatrix::identity(3);
        let pair = SpdPair::identity(3);
        assert!(score_gsl(&s, &pair, (1, 1)).is_err());
        assert!(score_bbi(&s, &pair, (2, 1)).is_err());
        assert!(score_gs(&s, &pair, (1, 1)).is_ok());
    }

    #[test]
    fn rule_names_round_trip() {
        for r in [SelectionRule::Gs, SelectionRule::Gsl, SelectionRule::Bbi, SelectionRule::Bfci] {
            assert_eq!(r.as_str().parse::<SelectionRule>().unwrap(), r);
        }
    }
}

//! The Gaussian graphical loss `f_S(Q) = trace(SQ) - log det Q` and the
//! iterate/inverse pair it is evaluated on.

use crate::error::{Error, Result};
use crate::matrix::{identity_residual, SymMatrix};
use crate::support::Edge;

/// When the maintained inverse is recomputed from scratch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RebuildPolicy {
    /// Unconditional rebuild after this many updates. `None` means `5 d²`.
    pub every_updates: Option<usize>,
    /// Rebuild when a consistency check exceeds this value.
    pub threshold: f64,
    /// Updates between consistency checks. `None` means `d`.
    pub check_interval: Option<usize>,
}

impl Default for RebuildPolicy {
    fn default() -> Self {
        RebuildPolicy {
            every_updates: None,
            threshold: 1e-9,
            check_interval: None,
        }
    }
}

impl RebuildPolicy {
    /// Never rebuild automatically. Used to measure raw drift.
    pub fn never() -> Self {
        RebuildPolicy {
            every_updates: Some(usize::MAX),
            threshold: f64::INFINITY,
            check_interval: Some(usize::MAX),
        }
    }
}

/// A positive-definite iterate `Q` together with its maintained inverse `R`.
#[derive(Clone, Debug)]
pub struct SpdPair {
    q: SymMatrix,
    r: SymMatrix,
    consistency_bound: f64,
    policy: RebuildPolicy,
    since_rebuild: usize,
    since_check: usize,
    rebuilds: usize,
}

impl SpdPair {
    /// Inverts `q` by Cholesky.
    pub fn from_q(q: SymMatrix) -> Result<Self> {
        let r = q.inverse()?;
        let consistency_bound = identity_residual(&q, &r);
        Ok(SpdPair {
            q,
            r,
            consistency_bound,
            policy: RebuildPolicy::default(),
            since_rebuild: 0,
            since_check: 0,
            rebuilds: 0,
        })
    }

    pub fn identity(dim: usize) -> Self {
        SpdPair {
            q: SymMatrix::identity(dim),
            r: SymMatrix::identity(dim),
            consistency_bound: 0.0,
            policy: RebuildPolicy::default(),
            since_rebuild: 0,
            since_check: 0,
            rebuilds: 0,
        }
    }

    /// Diagonal pair; every entry must be positive.
    pub fn diagonal(q_diag: &[f64]) -> Result<Self> {
        if let Some((index, &value)) = q_diag.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveDiagonal { index, value });
        }
        let r_diag: Vec<f64> = q_diag.iter().map(|v| 1.0 / v).collect();
        let q = SymMatrix::from_diagonal(q_diag);
        let r = SymMatrix::from_diagonal(&r_diag);
        let consistency_bound = identity_residual(&q, &r);
        Ok(SpdPair {
            q,
            r,
            consistency_bound,
            policy: RebuildPolicy::default(),
            since_rebuild: 0,
            since_check: 0,
            rebuilds: 0,
        })
    }

    pub fn with_policy(mut self, policy: RebuildPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn q(&self) -> &SymMatrix {
        &self.q
    }

    pub fn r(&self) -> &SymMatrix {
        &self.r
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn consistency_bound(&self) -> f64 {
        self.consistency_bound
    }

    pub fn rebuild_count(&self) -> usize {
        self.rebuilds
    }

    /// Computes `‖QR - I‖_F` and records it as the current bound.
    pub fn check_consistency(&mut self) -> f64 {
        self.consistency_bound = identity_residual(&self.q, &self.r);
        self.since_check = 0;
        self.consistency_bound
    }

    /// Recomputes `R = Q⁻¹` by Cholesky.
    pub fn rebuild(&mut self) -> Result<()> {
        self.r = self.q.inverse()?;
        self.consistency_bound = identity_residual(&self.q, &self.r);
        self.since_rebuild = 0;
        self.since_check = 0;
        self.rebuilds += 1;
        Ok(())
    }

    /// Off-diagonal pairs where `Q` is non-zero.
    pub fn edges(&self) -> Vec<Edge> {
        self.q.off_diagonal_pattern(0.0)
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut SymMatrix, &mut SymMatrix) {
        (&mut self.q, &mut self.r)
    }

    /// Applies the rebuild policy after one in-place update.
    pub(crate) fn note_update(&mut self) -> Result<()> {
        let d = self.dim();
        self.since_rebuild += 1;
        self.since_check += 1;
        let every = self.policy.every_updates.unwrap_or(5 * d * d);
        if self.since_rebuild >= every {
            return self.rebuild();
        }
        let interval = self.policy.check_interval.unwrap_or(d);
        if self.since_check >= interval && self.check_consistency() > self.policy.threshold {
            self.rebuild()?;
        }
        Ok(())
    }
}

fn check_dims(s: &SymMatrix, pair: &SpdPair) -> Result<()> {
    s.check_same_dim(pair.q())
}

/// `trace(S Q) - log det Q`, with `log det` from the Cholesky pivots of `Q`.
pub fn gaussian_loss(s: &SymMatrix, pair: &SpdPair) -> Result<f64> {
    check_dims(s, pair)?;
    loss_of(s, pair.q())
}

/// Same as [`gaussian_loss`] for a bare matrix.
pub fn loss_of(s: &SymMatrix, q: &SymMatrix) -> Result<f64> {
    s.check_same_dim(q)?;
    Ok(s.trace_product(q) - q.log_det()?)
}

/// `∇f_S(Q) = S - R`, using the maintained inverse.
pub fn loss_gradient(s: &SymMatrix, pair: &SpdPair) -> Result<SymMatrix> {
    check_dims(s, pair)?;
    s.sub(pair.r())
}

/// `f_S(Q) - f_S(S⁻¹) = trace(SQ - I) - log det(SQ)`, twice a Kullback-Leibler divergence.
pub fn kl_gap(s: &SymMatrix, pair: &SpdPair) -> Result<f64> {
    check_dims(s, pair)?;
    let log_det_s = s.log_det()?;
    let log_det_q = pair.q().log_det()?;
    Ok(s.trace_product(pair.q()) - s.dim() as f64 - log_det_s - log_det_q)
}

/// The minimiser over diagonal matrices: `Q_ii = 1 / S_ii`.
pub fn optimal_diagonal_init(s: &SymMatrix) -> Result<SpdPair> {
    let diag = s.diagonal();
    if let Some((index, &value)) = diag.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveDiagonal { index, value });
    }
    let q: Vec<f64> = diag.iter().map(|v| 1.0 / v).collect();
    let mut pair = SpdPair::diagonal(&q)?;
    // R_ii = S_ii exactly, not 1 / (1 / S_ii).
    for (i, &v) in diag.iter().enumerate() {
        pair.r.set(i, i, v);
    }
    pair.check_consistency();
    Ok(pair)
}

/// `‖QR - I‖_F`.
pub fn check_consistency(pair: &mut SpdPair) -> f64 {
    pair.check_consistency()
}

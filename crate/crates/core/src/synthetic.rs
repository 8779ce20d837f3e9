//! Synthetic benchmark problems and Gaussian sampling.
//!
//! A base matrix `A` with zero diagonal and random signed entries fixes the
//! graph. It is shifted to a PSD matrix `B = A + diag(d)`, then `M = B + ηI`.
//! The true covariance is the correlation matrix of `M⁻¹`, so the true
//! precision is `D M D` with `D = diag(M⁻¹)^{1/2}` and has exactly the
//! off-diagonal pattern of `A`.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_matrix;
use crate::matrix::SymMatrix;
use crate::rng::{stream, SeedDomain};
use crate::support::{all_edges, pair_count, Edge, Support};

/// Pattern threshold for reading edges off a matrix.
pub const EDGE_THRESHOLD: f64 = 1e-12;
/// Ridge weight relative to the mean sample variance.
pub const RIDGE_RHO: f64 = 1e-6;
/// Number of groups in the clique and hub families.
pub const GROUPS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Random,
    Clique,
    Hub,
    External,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Random => "random",
            Family::Clique => "clique",
            Family::Hub => "hub",
            Family::External => "external",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Family::Random),
            "clique" => Ok(Family::Clique),
            "hub" => Ok(Family::Hub),
            "external" => Ok(Family::External),
            other => Err(Error::InvalidScenario(format!("unknown family {other:?}"))),
        }
    }
}

/// Principal block `[offset, offset + size)` of an external matrix (zero-based offset).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub offset: usize,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub family: Family,
    /// Dimension. For external matrices this must match the (block) size.
    pub d: usize,
    /// Number of true edges, random family only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub eta: f64,
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_block: Option<BlockSpec>,
}

impl ScenarioSpec {
    pub fn random(d: usize, m: usize, eta: f64, n: usize, seed: u64) -> Self {
        ScenarioSpec {
            family: Family::Random,
            d,
            m: Some(m),
            eta,
            n,
            seed,
            external_path: None,
            external_block: None,
        }
    }

    pub fn clique(d: usize, eta: f64, n: usize, seed: u64) -> Self {
        ScenarioSpec {
            family: Family::Clique,
            m: None,
            ..ScenarioSpec::random(d, 0, eta, n, seed)
        }
    }

    pub fn hub(d: usize, eta: f64, n: usize, seed: u64) -> Self {
        ScenarioSpec {
            family: Family::Hub,
            m: None,
            ..ScenarioSpec::random(d, 0, eta, n, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.d < 2 {
            return bad(format!("d must be at least 2, got {}", self.d));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive and finite, got {}", self.eta));
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        match self.family {
            Family::Random => match self.m {
                None => return bad("random family requires m".into()),
                Some(m) if m > pair_count(self.d) => {
                    return bad(format!(
                        "m = {m} exceeds the {} upper-diagonal pairs for d = {}",
                        pair_count(self.d),
                        self.d
                    ))
                }
                Some(_) => {}
            },
            Family::Clique | Family::Hub => {
                if self.m.is_some() {
                    return bad(format!("m is not used by the {} family", self.family.as_str()));
                }
                if self.d < 2 * GROUPS {
                    return bad(format!(
                        "{} family needs d >= {} (5 groups of at least 2 nodes)",
                        self.family.as_str(),
                        2 * GROUPS
                    ));
                }
            }
            Family::External => {
                if self.external_path.is_none() {
                    return bad("external family requires external_path".into());
                }
                if self.m.is_some() {
                    return bad("m is not used by the external family".into());
                }
            }
        }
        if self.family != Family::External && (self.external_path.is_some() || self.external_block.is_some()) {
            return bad("external_path/external_block only apply to the external family".into());
        }
        Ok(())
    }

    /// Short label used in file names and report tags.
    pub fn tag(&self) -> String {
        match self.family {
            Family::Random => format!(
                "random-d{}-m{}-eta{}-n{}",
                self.d,
                self.m.unwrap_or(0),
                self.eta,
                self.n
            ),
            f => format!("{}-d{}-eta{}-n{}", f.as_str(), self.d, self.eta, self.n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub sigma: SymMatrix,
    pub theta: SymMatrix,
    pub true_edges: Support,
}

/// Sizes of `GROUPS` near-equal consecutive groups, larger groups first.
fn group_ranges(d: usize) -> Vec<std::ops::Range<usize>> {
    let base = d / GROUPS;
    let extra = d % GROUPS;
    let mut start = 0;
    (0..GROUPS)
        .map(|g| {
            let len = base + usize::from(g < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Upper-diagonal pattern of the base matrix for a non-external family.
pub fn base_pattern(spec: &ScenarioSpec) -> Result<Vec<Edge>> {
    spec.validate()?;
    let d = spec.d;
    let edges = match spec.family {
        Family::Random => {
            let m = spec.m.expect("validated");
            let mut rng = stream(spec.seed, SeedDomain::Structure, 0);
            let mut picked = index::sample(&mut rng, pair_count(d), m).into_vec();
            picked.sort_unstable();
            let all: Vec<Edge> = all_edges(d).collect();
            picked.into_iter().map(|k| all[k]).collect()
        }
        Family::Clique => group_ranges(d)
            .into_iter()
            .flat_map(|r| {
                let r2 = r.clone();
                r.flat_map(move |i| (i + 1..r2.end).map(move |j| (i, j)))
            })
            .collect(),
        Family::Hub => group_ranges(d)
            .into_iter()
            .flat_map(|r| (r.start + 1..r.end).map(move |j| (r.start, j)))
            .collect(),
        Family::External => {
            return Err(Error::InvalidScenario(
                "external scenarios have no generated pattern".into(),
            ))
        }
    };
    Ok(edges)
}

/// Base matrix `A`: zero diagonal, pattern entries drawn as Rademacher × U[0.5, 1.5].
pub fn generate_base(spec: &ScenarioSpec) -> Result<SymMatrix> {
    let pattern = base_pattern(spec)?;
    // Values use their own stream so the random pattern does not shift them.
    let mut rng = stream(spec.seed, SeedDomain::Structure, 1);
    let mut a = SymMatrix::zeros(spec.d);
    for (i, j) in pattern {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let u: f64 = rng.random_range(0.5..=1.5);
        a.set(i, j, sign * u);
    }
    Ok(a)
}

/// Settings of the trace-minimising diagonal shift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftOptions {
    pub iterations: usize,
}

impl Default for ShiftOptions {
    fn default() -> Self {
        ShiftOptions { iterations: 200 }
    }
}

/// Non-negative `d` with `A + diag(d)` PSD and small `Σ dᵢ`.
///
/// Starts from the uniform shift `max(0, -λ_min(A))` and runs a projected
/// subgradient method on the exact penalty `Σ dᵢ + P max(0, -λ_min(A + diag d))`
/// with `P = 2 dim`. Every iterate is made feasible by a uniform shift before
/// it is compared, so the returned vector is always feasible and never worse
/// than the uniform shift.
pub fn psd_shift(a: &SymMatrix) -> Result<Vec<f64>> {
    psd_shift_with(a, &ShiftOptions::default())
}

pub fn psd_shift_with(a: &SymMatrix, opts: &ShiftOptions) -> Result<Vec<f64>> {
    let dim = a.dim();
    let lam0 = a.eigenvalues()?[0];
    let uniform = (-lam0).max(0.0);
    let mut best = vec![uniform; dim];
    if uniform == 0.0 {
        return Ok(best);
    }
    let mut best_sum = uniform * dim as f64;
    let penalty = 2.0 * dim as f64;
    let t0 = uniform;
    let mut x = best.clone();
    for k in 1..=opts.iterations {
        let shifted = a.add_to_diagonal(&x)?;
        let (lam, v) = shifted.min_eigenpair()?;
        // Feasible candidate from the current iterate.
        let fix = (-lam).max(0.0);
        let sum: f64 = x.iter().map(|xi| xi + fix).sum();
        if sum < best_sum {
            best_sum = sum;
            best = x.iter().map(|xi| xi + fix).collect();
        }
        let step = t0 / (k as f64).sqrt();
        let active = lam < 0.0;
        for (xi, vi) in x.iter_mut().zip(&v) {
            let g = if active { 1.0 - penalty * vi * vi } else { 1.0 };
            *xi = (*xi - step * g).max(0.0);
        }
    }
    Ok(best)
}

/// The correlation-normalised truth for `M`, edges taken from `pattern`.
fn truth_from_m(m: &SymMatrix, pattern: Vec<Edge>) -> Result<GroundTruth> {
    let m_inv = m.inverse()?;
    let sigma = m_inv.to_correlation()?;
    let scale: Vec<f64> = m_inv.diagonal().iter().map(|v| v.sqrt()).collect();
    let dim = m.dim();
    let theta = SymMatrix::from_fn(dim, |i, j| m.get(i, j) * scale[i] * scale[j])?;
    let true_edges = Support::from_edges(dim, pattern)?;
    Ok(GroundTruth {
        sigma,
        theta,
        true_edges,
    })
}

/// Ground truth for a generated or external scenario.
pub fn build_truth(spec: &ScenarioSpec) -> Result<GroundTruth> {
    spec.validate()?;
    if spec.family == Family::External {
        let path = spec.external_path.as_deref().expect("validated");
        let truth = load_external(path, spec.external_block)?;
        if truth.sigma.dim() != spec.d {
            return Err(Error::InvalidScenario(format!(
                "external matrix has dimension {}, scenario says d = {}",
                truth.sigma.dim(),
                spec.d
            )));
        }
        return Ok(truth);
    }
    let a = generate_base(spec)?;
    let shift = psd_shift(&a)?;
    let m = a.add_to_diagonal(&shift.iter().map(|s| s + spec.eta).collect::<Vec<_>>())?;
    truth_from_m(&m, a.off_diagonal_pattern(EDGE_THRESHOLD))
}

/// Treats a user-supplied SPD matrix (or a principal block of it) as `M`.
pub fn load_external(path: &Path, block: Option<BlockSpec>) -> Result<GroundTruth> {
    let full = read_matrix(path)?;
    let m = match block {
        Some(b) => full.principal_block(b.offset, b.size)?,
        None => full,
    };
    external_truth(&m)
}

/// The external pipeline on an in-memory matrix.
pub fn external_truth(m: &SymMatrix) -> Result<GroundTruth> {
    if !m.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    truth_from_m(m, m.off_diagonal_pattern(EDGE_THRESHOLD))
}

/// `n` i.i.d. rows from `N(0, Σ)`, as `L z` with `Σ = L Lᵀ`.
///
/// Sample `index` selects an independent stream, one per repetition.
pub fn sample_gaussian(sigma: &SymMatrix, n: usize, seed: u64, index: u64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let l = sigma.cholesky()?.l();
    let d = sigma.dim();
    let mut rng = stream(seed, SeedDomain::Sampling, index);
    // Draw row by row so that prefixes of a larger sample agree.
    let z = DMatrix::from_row_iterator(n, d, (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)));
    Ok(z * l.transpose())
}

/// Biased estimate `(1/n) Σ x xᵀ` (not centred).
pub fn sample_covariance(data: &DMatrix<f64>) -> Result<SymMatrix> {
    let n = data.nrows();
    if n == 0 || data.ncols() == 0 {
        return Err(Error::InvalidArgument("empty data matrix".into()));
    }
    SymMatrix::from_dmatrix(data.transpose() * data / n as f64)
}

/// `Σ̂ + γ² I` with `γ² = 1e-6 · mean(diag Σ̂)`.
pub fn apply_ridge(sigma_hat: &SymMatrix) -> Result<SymMatrix> {
    let diag = sigma_hat.diagonal();
    let mean = diag.iter().sum::<f64>() / diag.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::Degenerate("sample covariance has zero diagonal".into()));
    }
    sigma_hat.add_to_diagonal(&vec![RIDGE_RHO * mean; diag.len()])
}

/// Ridge-regularised sample covariance, the anchor used by growth.
pub fn ridge_covariance(data: &DMatrix<f64>) -> Result<SymMatrix> {
    apply_ridge(&sample_covariance(data)?)
}

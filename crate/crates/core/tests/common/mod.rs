//! Test oracles that share no numerical code with the library.
//!
//! * Loss via a symmetric eigendecomposition instead of Cholesky.
//! * Inverses via LU instead of Cholesky or block updates.
//! * Graph-optimal matrices via damped Newton on the free parameters of `Q`.
#![allow(dead_code)]

use graphgrow_core::{Edge, SymMatrix};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `G Gᵀ / d + floor I` with Gaussian `G`.
pub fn random_spd(rng: &mut ChaCha8Rng, d: usize, floor: f64) -> SymMatrix {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut m = &g * g.transpose() / d as f64;
    for i in 0..d {
        m[(i, i)] += floor;
    }
    SymMatrix::from_dmatrix(m).unwrap()
}

/// A random edge subset of size `k`, lexicographically sorted.
pub fn random_edges(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Vec<Edge> {
    let mut all: Vec<Edge> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    for n in (1..all.len()).rev() {
        let m = rng.random_range(0..=n);
        all.swap(n, m);
    }
    all.truncate(k);
    all.sort();
    all
}

pub fn eig(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn lu_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().lu().try_inverse().expect("invertible")
}

/// `trace(SQ) - Σ ln λᵢ(Q)`; `None` when `Q` is not PD.
pub fn loss_eig(s: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<f64> {
    let ev = eig(q);
    if ev[0] <= 0.0 {
        return None;
    }
    Some(s.component_mul(q).sum() - ev.iter().map(|v| v.ln()).sum::<f64>())
}

/// Parameters: the diagonal first, then the given edges.
fn coords(d: usize, edges: &[Edge]) -> Vec<Edge> {
    (0..d).map(|i| (i, i)).chain(edges.iter().copied()).collect()
}

fn assemble(d: usize, coords: &[Edge], theta: &DVector<f64>) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(d, d);
    for (k, &(i, j)) in coords.iter().enumerate() {
        q[(i, j)] = theta[k];
        q[(j, i)] = theta[k];
    }
    q
}

/// The minimiser of the loss over PD matrices supported on the diagonal plus `edges`.
///
/// Damped Newton in the raw entries of `Q`, stopped when the restricted
/// gradient is below `1e-13` in max norm or the Newton decrement reaches
/// rounding level.
pub fn newton_optimum(s: &SymMatrix, edges: &[Edge]) -> DMatrix<f64> {
    let d = s.dim();
    let sm = s.as_dmatrix().clone();
    let c = coords(d, edges);
    let p = c.len();
    let mut theta = DVector::from_fn(p, |k, _| if k < d { 1.0 / sm[(k, k)] } else { 0.0 });
    for _ in 0..200 {
        let q = assemble(d, &c, &theta);
        let r = lu_inverse(&q);
        let g = DVector::from_fn(p, |k, _| {
            let (i, j) = c[k];
            let mult = if i == j { 1.0 } else { 2.0 };
            mult * (sm[(i, j)] - r[(i, j)])
        });
        if g.amax() < 1e-13 {
            return q;
        }
        // H_kl = trace(R E_k R E_l) with E the symmetric unit matrices.
        let h = DMatrix::from_fn(p, p, |k, l| {
            let (a, b) = c[k];
            let (e, f) = c[l];
            let term = |x: usize, y: usize, u: usize, v: usize| r[(y, u)] * r[(v, x)];
            let ek: Vec<(usize, usize)> = if a == b { vec![(a, a)] } else { vec![(a, b), (b, a)] };
            let el: Vec<(usize, usize)> = if e == f { vec![(e, e)] } else { vec![(e, f), (f, e)] };
            let mut sum = 0.0;
            for &(x, y) in &ek {
                for &(u, v) in &el {
                    sum += term(x, y, u, v);
                }
            }
            sum
        });
        let step = h.lu().solve(&g).expect("Hessian invertible");
        if g.dot(&step) < 1e-28 {
            return q;
        }
        if g.dot(&step) < 1e-10 {
            // Inside the quadratic region the loss change is below rounding; take the full step.
            theta -= &step;
            continue;
        }
        let f0 = loss_eig(&sm, &q).unwrap();
        let mut t = 1.0;
        loop {
            let cand = &theta - &step * t;
            if let Some(f1) = loss_eig(&sm, &assemble(d, &c, &cand)) {
                if f1 <= f0 - 1e-4 * t * g.dot(&step) || t < 1e-12 {
                    theta = cand;
                    break;
                }
            }
            t *= 0.5;
        }
    }
    panic!("Newton oracle did not converge");
}

/// Loss of the graph-optimal matrix for `edges`.
pub fn optimal_loss(s: &SymMatrix, edges: &[Edge]) -> f64 {
    loss_eig(s.as_dmatrix(), &newton_optimum(s, edges)).unwrap()
}

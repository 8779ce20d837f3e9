//! Exact order-1 and order-2 block updates.
//!
//! For an index set `I` (`|I| = m ∈ {1, 2}`) the minimiser of `f_S` over
//! `Q + span{B(i, j) : i, j ∈ I}` is
//!
//! ```text
//! Q̃_II = Q_II + S_II⁻¹ - R_II⁻¹
//! ```
//!
//! With `A = R_II⁻¹`, `W = A - A S_II A` and `X = R[:, I]`, the inverse
//! of the updated iterate is the symmetric rank-`m` correction
//! `R̃ = R - X W Xᵀ`; its `I × I` block equals `S_II` and its `I × Iᶜ`
//! block equals `S_II A R_{I,Iᶜ}`. The loss decrease is
//! `Σ_k (λ_k - 1 - log λ_k)` over the eigenvalues of `S_II R_II⁻¹`.

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::spd::SpdPair;
use crate::support::Edge;

/// Relative guard on 2x2 determinants.
pub const SINGULAR_GUARD: f64 = 1e-14;

/// Indices touched by an update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Diagonal(usize),
    Pair(usize, usize),
}

impl Block {
    pub fn indices(&self) -> Vec<usize> {
        match *self {
            Block::Diagonal(i) => vec![i],
            Block::Pair(i, j) => vec![i, j],
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Block::Diagonal(_) => 1,
            Block::Pair(..) => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockUpdateResult {
    /// `f_S(Q) - f_S(Q̃)`.
    pub improvement: f64,
    pub touched: Block,
    /// Updated `Q_II`, row-major `m × m`.
    pub new_q_block: Vec<f64>,
}

/// `x - 1 - log x` written in terms of `u = x - 1` to keep precision near the optimum.
#[inline]
fn excess(u: f64) -> f64 {
    u - u.ln_1p()
}

fn check_index(dim: usize, i: usize) -> Result<()> {
    if i >= dim {
        return Err(Error::InvalidIndex { i, j: i, dim });
    }
    Ok(())
}

fn check_pair(dim: usize, (i, j): Edge) -> Result<()> {
    if i >= j || j >= dim {
        return Err(Error::InvalidIndex { i, j, dim });
    }
    Ok(())
}

fn positive_diagonals(s: &SymMatrix, r: &SymMatrix, idx: &[usize]) -> Result<()> {
    for &i in idx {
        let (si, ri) = (s.get(i, i), r.get(i, i));
        if !(si > 0.0) || !(ri > 0.0) {
            return Err(Error::Degenerate(format!(
                "non-positive diagonal at {i}: S = {si}, R = {ri}"
            )));
        }
    }
    Ok(())
}

/// Loss decrease of a 1-update on `i`.
fn improvement_order1(s_ii: f64, r_ii: f64) -> f64 {
    excess((s_ii - r_ii) / r_ii)
}

/// 2x2 symmetric block `[[a, b], [b, c]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Sym2 {
    a: f64,
    b: f64,
    c: f64,
}

impl Sym2 {
    fn gather(m: &SymMatrix, i: usize, j: usize) -> Self {
        Sym2 {
            a: m.get(i, i),
            b: m.get(i, j),
            c: m.get(j, j),
        }
    }

    fn det(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    fn inverse(&self, edge: Edge) -> Result<Sym2> {
        let det = self.det();
        if !(det > SINGULAR_GUARD * (self.a * self.c).abs()) {
            return Err(Error::SingularBlock { i: edge.0, j: edge.1 });
        }
        Ok(Sym2 {
            a: self.c / det,
            b: -self.b / det,
            c: self.a / det,
        })
    }

    /// `self * other * self` for symmetric `self`, `other`.
    fn sandwich(&self, other: &Sym2) -> Sym2 {
        // t = other * self
        let t00 = other.a * self.a + other.b * self.b;
        let t01 = other.a * self.b + other.b * self.c;
        let t10 = other.b * self.a + other.c * self.b;
        let t11 = other.b * self.b + other.c * self.c;
        let a = self.a * t00 + self.b * t10;
        let b01 = self.a * t01 + self.b * t11;
        let b10 = self.b * t00 + self.c * t10;
        let c = self.b * t01 + self.c * t11;
        Sym2 {
            a,
            b: 0.5 * (b01 + b10),
            c,
        }
    }
}

/// `trace(P) - 2 - log det(P)` for `P = S_II R_II⁻¹`, via the eigenvalues of
/// the congruent symmetric matrix `L⁻¹ S_II L⁻ᵀ` with `R_II = L Lᵀ`.
fn improvement_order2(sb: &Sym2, rb: &Sym2, edge: Edge) -> Result<f64> {
    if sb == rb {
        return Ok(0.0);
    }
    if !(rb.det() > SINGULAR_GUARD * (rb.a * rb.c).abs()) {
        return Err(Error::SingularBlock { i: edge.0, j: edge.1 });
    }
    if !(sb.det() > SINGULAR_GUARD * (sb.a * sb.c).abs()) {
        return Err(Error::SingularBlock { i: edge.0, j: edge.1 });
    }
    let l11 = rb.a.sqrt();
    let l21 = rb.b / l11;
    let l22 = (rb.c - l21 * l21).sqrt();
    // L⁻¹ = [[i11, 0], [i21, i22]]
    let i11 = 1.0 / l11;
    let i22 = 1.0 / l22;
    let i21 = -l21 / (l11 * l22);
    let c11 = i11 * i11 * sb.a;
    let c12 = i11 * (i21 * sb.a + i22 * sb.b);
    let c22 = i21 * i21 * sb.a + 2.0 * i21 * i22 * sb.b + i22 * i22 * sb.c;
    let mean_minus_one = 0.5 * ((c11 - 1.0) + (c22 - 1.0));
    let half_diff = 0.5 * (c11 - c22);
    let rad = half_diff.hypot(c12);
    let u_plus = mean_minus_one + rad;
    let lambda_plus = 1.0 + u_plus;
    let lambda_minus = 1.0 + mean_minus_one - rad;
    let u_minus = if lambda_minus < 0.5 {
        // small eigenvalue: recover it from the determinant instead of by cancellation
        (c11 * c22 - c12 * c12) / lambda_plus - 1.0
    } else {
        mean_minus_one - rad
    };
    Ok(excess(u_plus) + excess(u_minus))
}

/// Would-be loss decrease of a 2-update on `edge`; does not mutate.
pub fn improvement_order2_dry(s: &SymMatrix, pair: &SpdPair, edge: Edge) -> Result<f64> {
    s.check_same_dim(pair.q())?;
    check_pair(s.dim(), edge)?;
    positive_diagonals(s, pair.r(), &[edge.0, edge.1])?;
    let sb = Sym2::gather(s, edge.0, edge.1);
    let rb = Sym2::gather(pair.r(), edge.0, edge.1);
    improvement_order2(&sb, &rb, edge)
}

/// Would-be loss decrease of a 1-update on `i`; does not mutate.
pub fn improvement_order1_dry(s: &SymMatrix, pair: &SpdPair, i: usize) -> Result<f64> {
    s.check_same_dim(pair.q())?;
    check_index(s.dim(), i)?;
    positive_diagonals(s, pair.r(), &[i])?;
    Ok(improvement_order1(s.get(i, i), pair.r().get(i, i)))
}

/// `R ← R - X W Xᵀ` with `X = R[:, idx]`, written over the upper triangle and mirrored.
fn apply_inverse_correction(r: &mut SymMatrix, idx: &[usize], w: &[[f64; 2]; 2]) {
    let d = r.dim();
    let m = idx.len();
    let data = r.as_mut_slice();
    let mut x = [vec![0.0; d], vec![0.0; d]];
    for (k, &col) in idx.iter().enumerate() {
        x[k].copy_from_slice(&data[col * d..(col + 1) * d]);
    }
    // y_b = W x_b
    let mut y = [vec![0.0; d], vec![0.0; d]];
    for b in 0..d {
        for p in 0..m {
            y[p][b] = (0..m).map(|q| w[p][q] * x[q][b]).sum();
        }
    }
    for b in 0..d {
        for a in 0..=b {
            let delta: f64 = (0..m).map(|p| x[p][a] * y[p][b]).sum();
            let v = data[a + b * d] - delta;
            data[a + b * d] = v;
            data[b + a * d] = v;
        }
    }
}

/// Exact 1-update on diagonal entry `i`. Mutates `pair` in place.
pub fn update_order1(s: &SymMatrix, pair: &mut SpdPair, i: usize) -> Result<BlockUpdateResult> {
    s.check_same_dim(pair.q())?;
    check_index(s.dim(), i)?;
    positive_diagonals(s, pair.r(), &[i])?;
    let s_ii = s.get(i, i);
    let r_ii = pair.r().get(i, i);
    let improvement = improvement_order1(s_ii, r_ii);
    if s_ii == r_ii {
        return Ok(BlockUpdateResult {
            improvement,
            touched: Block::Diagonal(i),
            new_q_block: vec![pair.q().get(i, i)],
        });
    }
    let a = 1.0 / r_ii;
    let w = a * (1.0 - s_ii * a);
    let (q, r) = pair.parts_mut();
    let q_new = q.get(i, i) + 1.0 / s_ii - a;
    q.set(i, i, q_new);
    apply_inverse_correction(r, &[i], &[[w, 0.0], [0.0, 0.0]]);
    r.set(i, i, s_ii);
    pair.note_update()?;
    Ok(BlockUpdateResult {
        improvement,
        touched: Block::Diagonal(i),
        new_q_block: vec![q_new],
    })
}

/// Exact 2-update on the principal block `{i, j}`. Mutates `pair` in place.
pub fn update_order2(s: &SymMatrix, pair: &mut SpdPair, edge: Edge) -> Result<BlockUpdateResult> {
    s.check_same_dim(pair.q())?;
    check_pair(s.dim(), edge)?;
    let (i, j) = edge;
    positive_diagonals(s, pair.r(), &[i, j])?;
    let sb = Sym2::gather(s, i, j);
    let rb = Sym2::gather(pair.r(), i, j);
    let improvement = improvement_order2(&sb, &rb, edge)?;
    let qb = Sym2::gather(pair.q(), i, j);
    if sb.a == rb.a && sb.b == rb.b && sb.c == rb.c {
        return Ok(BlockUpdateResult {
            improvement,
            touched: Block::Pair(i, j),
            new_q_block: vec![qb.a, qb.b, qb.b, qb.c],
        });
    }
    let a = rb.inverse(edge)?;
    let s_inv = sb.inverse(edge)?;
    let asa = a.sandwich(&sb);
    let w = [[a.a - asa.a, a.b - asa.b], [a.b - asa.b, a.c - asa.c]];
    let new_q = Sym2 {
        a: qb.a + s_inv.a - a.a,
        b: qb.b + s_inv.b - a.b,
        c: qb.c + s_inv.c - a.c,
    };
    let (q, r) = pair.parts_mut();
    q.set(i, i, new_q.a);
    q.set(i, j, new_q.b);
    q.set(j, j, new_q.c);
    apply_inverse_correction(r, &[i, j], &w);
    r.set(i, i, sb.a);
    r.set(i, j, sb.b);
    r.set(j, j, sb.c);
    pair.note_update()?;
    Ok(BlockUpdateResult {
        improvement,
        touched: Block::Pair(i, j),
        new_q_block: vec![new_q.a, new_q.b, new_q.b, new_q.c],
    })
}

/// Dispatches to the order-1 or order-2 update for `(i, j)`, `i <= j`.
pub fn update_block(s: &SymMatrix, pair: &mut SpdPair, (i, j): Edge) -> Result<BlockUpdateResult> {
    if i == j {
        update_order1(s, pair, i)
    } else {
        update_order2(s, pair, (i, j))
    }
}

/// Dry improvement for `(i, j)`, `i <= j`.
pub fn improvement_dry(s: &SymMatrix, pair: &SpdPair, (i, j): Edge) -> Result<f64> {
    if i == j {
        improvement_order1_dry(s, pair, i)
    } else {
        improvement_order2_dry(s, pair, (i, j))
    }
}

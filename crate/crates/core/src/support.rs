use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper-diagonal index pair `(i, j)` with `i < j`, zero-based.
pub type Edge = (usize, usize);

/// Number of upper-diagonal pairs of a `dim × dim` matrix.
pub fn pair_count(dim: usize) -> usize {
    dim * dim.saturating_sub(1) / 2
}

/// All upper-diagonal pairs in lexicographic order.
pub fn all_edges(dim: usize) -> impl Iterator<Item = Edge> {
    (0..dim).flat_map(move |i| ((i + 1)..dim).map(move |j| (i, j)))
}

/// Diagonal plus an ordered set of activated edges.
///
/// The diagonal is implicit and always active. Edge order records the
/// activation sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SupportRepr", into = "SupportRepr")]
pub struct Support {
    dim: usize,
    edges: Vec<Edge>,
    mask: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct SupportRepr {
    dim: usize,
    edges: Vec<Edge>,
}

impl TryFrom<SupportRepr> for Support {
    type Error = Error;
    fn try_from(r: SupportRepr) -> Result<Self> {
        Support::from_edges(r.dim, r.edges)
    }
}

impl From<Support> for SupportRepr {
    fn from(s: Support) -> Self {
        SupportRepr {
            dim: s.dim,
            edges: s.edges,
        }
    }
}

impl Support {
    pub fn empty(dim: usize) -> Self {
        Support {
            dim,
            edges: Vec::new(),
            mask: vec![false; dim * dim],
        }
    }

    pub fn full(dim: usize) -> Self {
        let mut s = Self::empty(dim);
        for e in all_edges(dim) {
            s.push(e).expect("lexicographic pairs are valid and distinct");
        }
        s
    }

    pub fn from_edges(dim: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut s = Self::empty(dim);
        for e in edges {
            s.push(e)?;
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Activated edges in activation order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, (i, j): Edge) -> bool {
        i < j && j < self.dim && self.mask[i * self.dim + j]
    }

    /// Appends an edge. Rejects `i >= j`, out-of-range indices and duplicates.
    pub fn push(&mut self, (i, j): Edge) -> Result<()> {
        if i >= j || j >= self.dim {
            return Err(Error::InvalidIndex { i, j, dim: self.dim });
        }
        let slot = &mut self.mask[i * self.dim + j];
        if *slot {
            return Err(Error::InvalidArgument(format!("edge ({i}, {j}) already active")));
        }
        *slot = true;
        self.edges.push((i, j));
        Ok(())
    }

    /// Inactive upper-diagonal pairs in lexicographic order.
    pub fn free_edges(&self) -> Vec<Edge> {
        all_edges(self.dim).filter(|&e| !self.contains(e)).collect()
    }
}

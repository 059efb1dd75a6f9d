//! Bi-directed covariance graphs stored as an upper-triangular edge bit set.
//!
//! Pairs `(j, h)` with `j < h` are laid out row-major:
//! `(0,1), (0,2), …, (0,V-1), (1,2), …, (V-2,V-1)`. This is the canonical
//! order of every bitstring the crate reads or writes.

use std::fmt;

use crate::error::{Error, Result};

/// Number of unordered variable pairs, `V(V-1)/2`.
pub fn pair_count(v: usize) -> usize {
    v * v.saturating_sub(1) / 2
}

/// Undirected adjacency pattern over `v` variables with an implicit zero diagonal.
///
/// Ordering is lexicographic on the bitstring (`0 < 1`), which is the
/// tie-break used by the structure searches.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Graph {
    v: usize,
    bits: Vec<bool>,
}

impl Graph {
    pub fn empty(v: usize) -> Self {
        Self {
            v,
            bits: vec![false; pair_count(v)],
        }
    }

    pub fn complete(v: usize) -> Self {
        Self {
            v,
            bits: vec![true; pair_count(v)],
        }
    }

    /// Builds a graph from 0-indexed edge pairs in either orientation.
    pub fn from_edges(v: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(v);
        for &(a, b) in edges {
            g.set_edge(a, b, true)?;
        }
        Ok(g)
    }

    pub fn from_bits(v: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != pair_count(v) {
            return Err(Error::InvalidBitstring(format!(
                "expected {} bits for {} variables, got {}",
                pair_count(v),
                v,
                bits.len()
            )));
        }
        Ok(Self { v, bits })
    }

    /// Parses a `0`/`1` string, inferring `V` from its length.
    pub fn from_bitstring(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidBitstring(format!(
                    "unexpected character {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        let v = vertices_for_pairs(bits.len()).ok_or_else(|| {
            Error::InvalidBitstring(format!("length {} is not V(V-1)/2 for any V", bits.len()))
        })?;
        Self::from_bits(v, bits)
    }

    pub fn to_bitstring(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn n_pairs(&self) -> usize {
        self.bits.len()
    }

    /// Position of the unordered pair `{a, b}` in the bit set.
    pub fn pair_index(&self, a: usize, b: usize) -> Result<usize> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(Error::InvalidParameter(format!(
                "self loop on variable {a}"
            )));
        }
        let (j, h) = if a < b { (a, b) } else { (b, a) };
        Ok(j * (2 * self.v - j - 1) / 2 + (h - j - 1))
    }

    /// Inverse of [`Graph::pair_index`].
    pub fn pair_at(&self, idx: usize) -> (usize, usize) {
        debug_assert!(idx < self.bits.len());
        let mut j = 0;
        let mut start = 0;
        loop {
            let row = self.v - j - 1;
            if idx < start + row {
                return (j, j + 1 + idx - start);
            }
            start += row;
            j += 1;
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        match self.pair_index(a, b) {
            Ok(i) => self.bits[i],
            Err(_) => false,
        }
    }

    pub fn set_edge(&mut self, a: usize, b: usize, present: bool) -> Result<()> {
        let i = self.pair_index(a, b)?;
        self.bits[i] = present;
        Ok(())
    }

    pub fn bit(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    /// Returns a copy with the bit at `idx` flipped.
    pub fn flipped(&self, idx: usize) -> Self {
        let mut g = self.clone();
        g.bits[idx] = !g.bits[idx];
        g
    }

    /// Sorted 0-indexed neighbors of `j`.
    pub fn neighbors(&self, j: usize) -> Result<Vec<usize>> {
        self.check(j)?;
        Ok((0..self.v)
            .filter(|&h| h != j && self.has_edge(j, h))
            .collect())
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.v];
        for (idx, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            let (j, h) = self.pair_at(idx);
            d[j] += 1;
            d[h] += 1;
        }
        d
    }

    /// Edge count and degree sequence.
    pub fn structure_stats(&self) -> (usize, Vec<usize>) {
        (self.edge_count(), self.degrees())
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn is_complete(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    /// 0-indexed edge list in canonical order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| self.pair_at(i))
            .collect()
    }

    fn check(&self, j: usize) -> Result<()> {
        if j >= self.v {
            Err(Error::IndexOutOfRange {
                index: j,
                v: self.v,
            })
        } else {
            Ok(())
        }
    }
}

fn vertices_for_pairs(t: usize) -> Option<usize> {
    // v(v-1)/2 = t  =>  v = (1 + sqrt(1 + 8t)) / 2
    let v = ((1.0 + (1.0 + 8.0 * t as f64).sqrt()) / 2.0).round() as usize;
    (pair_count(v) == t && v >= 1).then_some(v)
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(v={}, {})", self.v, self.to_bitstring())
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

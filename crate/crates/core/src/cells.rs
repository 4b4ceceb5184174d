//! Cubic cell partitions of the composition lattice and a Gray-like ordering
//! of the nonempty cells.
//!
//! For a side length `a`, a cell fixes each of the first `q - 1` coordinates
//! to one of `nu = ceil((n+1)/a)` windows of length `a`. Cell indices are
//! 1-based vectors in `[1, nu]^(q-1)`, matching the bounded index set the
//! ordering is defined on. Two cells are adjacent when their index vectors
//! differ by a single unit step or by a +1/-1 swap between two coordinates;
//! the Gray-like ordering visits every index of the bounded-sum set `V(m, s)`
//! exactly once with consecutive entries adjacent.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::compositions::{Composition, Lattice};
use crate::error::{invalid, Result};

/// A partition of the `(q, n)` lattice into cubic cells of side `side`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPartition {
    q: usize,
    n: u32,
    side: u32,
    per_axis: u32,
}

/// 1-based cell coordinates, one per free lattice coordinate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex(pub Vec<u32>);

impl CellPartition {
    pub fn new(q: usize, n: u32, side: u32) -> Result<Self> {
        if q < 2 {
            return Err(invalid("cell partition needs q >= 2"));
        }
        // Sides above n + 1 behave exactly like n + 1 (a single window).
        if side < 1 {
            return Err(invalid("cell side must be positive"));
        }
        Ok(CellPartition {
            q,
            n,
            side,
            per_axis: (n + 1).div_ceil(side),
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    /// Number of cells along each axis, `ceil((n+1)/side)`.
    pub fn per_axis(&self) -> u32 {
        self.per_axis
    }

    /// The unique cell containing a composition.
    pub fn cell_of(&self, t: &Composition) -> CellIndex {
        CellIndex(
            t.counts()[..self.q - 1]
                .iter()
                .map(|&c| c / self.side + 1)
                .collect(),
        )
    }

    /// Whether a cell contains at least one lattice point. A cell is
    /// nonempty exactly when `q - 1 <= sum(l) <= n/side + (q - 1)`.
    pub fn is_nonempty(&self, l: &CellIndex) -> Result<bool> {
        if l.0.len() != self.q - 1 {
            return Err(invalid("cell index has wrong dimension"));
        }
        if l.0.iter().any(|&x| x < 1 || x > self.per_axis) {
            return Err(invalid("cell coordinate out of range"));
        }
        let sum: u64 = l.0.iter().map(|&x| x as u64).sum();
        let m = (self.q - 1) as u64;
        // sum <= n/side + (q-1), kept in integers.
        Ok(sum >= m && (sum - m) * self.side as u64 <= self.n as u64)
    }

    /// Groups the lattice by cell, each group in lattice rank order.
    pub fn group_lattice(&self, lattice: &Lattice) -> BTreeMap<CellIndex, Vec<usize>> {
        let mut groups: BTreeMap<CellIndex, Vec<usize>> = BTreeMap::new();
        for (rank, t) in lattice.iter().enumerate() {
            groups.entry(self.cell_of(&t)).or_default().push(rank);
        }
        groups
    }

    /// Largest cross distance between members of two cells, by exhaustive
    /// scan; the adjacency lemma bounds this by `side * (2q + 1) / 2` for
    /// adjacent cells.
    pub fn max_cross_distance(
        &self,
        a: &CellIndex,
        b: &CellIndex,
        lattice: &Lattice,
    ) -> Result<u32> {
        let groups = self.group_lattice(lattice);
        let ga = groups
            .get(a)
            .ok_or_else(|| invalid("first cell is empty"))?;
        let gb = groups
            .get(b)
            .ok_or_else(|| invalid("second cell is empty"))?;
        let mut worst = 0;
        for &ra in ga {
            let ta = lattice.unrank(ra);
            for &rb in gb {
                let tb = lattice.unrank(rb);
                worst = worst.max(ta.distance(&tb)?);
            }
        }
        Ok(worst)
    }

    /// The Gray-like order of this partition's nonempty cells.
    pub fn nonempty_cell_order(&self) -> Result<Vec<CellIndex>> {
        let m = self.q - 1;
        let s = (self.n / self.side) as usize + m;
        gray_order(m, s, self.per_axis as usize)
    }
}

/// Adjacency of two equal-length cell indices: a single unit step in one
/// coordinate, or a +1/-1 swap between two coordinates. Equivalently,
/// `|sum(a - b)| <= 1` and `sum |a - b| <= 2` with `a != b`.
pub fn are_adjacent(a: &CellIndex, b: &CellIndex) -> bool {
    if a.0.len() != b.0.len() || a == b {
        return false;
    }
    let mut signed: i64 = 0;
    let mut total: u64 = 0;
    for (&x, &y) in a.0.iter().zip(&b.0) {
        signed += x as i64 - y as i64;
        total += x.abs_diff(y) as u64;
    }
    signed.unsigned_abs() <= 1 && total <= 2
}

/// All indices of `V(m, s)`: vectors in `[1, nu]^m` with coordinate sum at
/// most `s`.
pub fn bounded_sum_indices(m: usize, s: usize, nu: usize) -> Vec<CellIndex> {
    let mut out = Vec::new();
    let mut current = vec![1u32; m];
    loop {
        if current.iter().map(|&x| x as usize).sum::<usize>() <= s {
            out.push(CellIndex(current.clone()));
        }
        let mut pos = 0;
        loop {
            if pos == m {
                return out;
            }
            current[pos] += 1;
            if current[pos] as usize <= nu {
                break;
            }
            current[pos] = 1;
            pos += 1;
        }
    }
}

/// A Gray-like ordering of `V(m, s)`: a bijective listing in which
/// consecutive indices are adjacent, starting at `(1, .., 1)`.
///
/// The construction slices by the first coordinate in increasing order and
/// alternates each slice's recursive ordering with its reverse. When
/// `s - m + 1 <= nu`, the last entry is `(s - m + 1, 1, .., 1)`; for larger
/// `s` that index would leave `[1, nu]^m`, so the listing ends wherever the
/// final (clamped) slice ends.
pub fn gray_order(m: usize, s: usize, nu: usize) -> Result<Vec<CellIndex>> {
    if m < 1 || nu < 1 {
        return Err(invalid("ordering needs m >= 1 and nu >= 1"));
    }
    if s < m || s > m * nu {
        return Err(invalid("ordering needs m <= s <= m * nu"));
    }
    Ok(gray_order_inner(m, s, nu))
}

fn gray_order_inner(m: usize, s: usize, nu: usize) -> Vec<CellIndex> {
    if m == 1 {
        return (1..=s.min(nu) as u32)
            .map(|x| CellIndex(vec![x]))
            .collect();
    }
    let mut out = Vec::new();
    let max_first = (s - m + 1).min(nu);
    for x in 1..=max_first {
        let sub_s = (s - x).min((m - 1) * nu);
        let mut slice = gray_order_inner(m - 1, sub_s, nu);
        if x % 2 == 0 {
            slice.reverse();
        }
        out.extend(slice.into_iter().map(|mut l| {
            l.0.insert(0, x as u32);
            l
        }));
    }
    out
}

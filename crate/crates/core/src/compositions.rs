//! The composition lattice: all length-`q` vectors of nonnegative symbol
//! counts summing to `n`, with a fixed dense order, distances, and
//! type-class counting.
//!
//! The order is colexicographic on the first `q-1` coordinates (the last
//! coordinate is implied by the sum): rank 0 is `(0, .., 0, n)` and the
//! highest-indexed free coordinate is the most significant. Ranking and
//! unranking are O(q) and O(q log n) with a precomputed binomial table.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use num_bigint::BigUint;

use crate::error::{invalid, Error, Result};

/// A symbol-count histogram: `counts[i]` occurrences of symbol `i`, with
/// `q = counts.len() >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Composition {
    counts: Vec<u32>,
}

impl Composition {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(invalid("composition needs an alphabet of size >= 2"));
        }
        Ok(Composition { counts })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn into_counts(self) -> Vec<u32> {
        self.counts
    }

    /// Alphabet size `q`.
    pub fn q(&self) -> usize {
        self.counts.len()
    }

    /// Total count `n`.
    pub fn n(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Half the l1 distance to another composition of the same `q` and `n`.
    ///
    /// This equals `n` times the total variation distance between the
    /// normalized types, and it is the number of unit count moves needed to
    /// turn one composition into the other.
    pub fn distance(&self, other: &Composition) -> Result<u32> {
        if self.q() != other.q() {
            return Err(Error::DimensionMismatch {
                expected: self.q(),
                got: other.q(),
            });
        }
        if self.n() != other.n() {
            return Err(invalid("compositions have different totals"));
        }
        let l1: u32 = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(&a, &b)| a.abs_diff(b))
            .sum();
        Ok(l1 / 2)
    }

    /// Number of distinct strings with this composition: the multinomial
    /// coefficient `n! / (t_1! .. t_q!)`.
    pub fn type_class_size(&self) -> BigUint {
        let mut result = BigUint::from(1u32);
        let mut placed = 0u32;
        for &c in &self.counts {
            // multiply by C(placed + c, c)
            for i in 1..=c {
                placed += 1;
                result = result * BigUint::from(placed) / BigUint::from(i);
            }
        }
        result
    }

    /// A canonical string with this composition: symbols in nondecreasing
    /// order.
    pub fn canonical_string(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.n() as usize);
        for (sym, &c) in self.counts.iter().enumerate() {
            out.extend(core::iter::repeat_n(sym as u8, c as usize));
        }
        out
    }
}

/// Composition of a string over `[0, q)`.
pub fn composition_of(q: usize, string: &[u8]) -> Composition {
    let mut counts = vec![0u32; q];
    for &s in string {
        counts[s as usize] += 1;
    }
    Composition { counts }
}

/// The lattice of all compositions for a fixed `(q, n)`, with dense
/// rank/unrank addressing.
#[derive(Debug, Clone)]
pub struct Lattice {
    q: usize,
    n: u32,
    size: u64,
    // binom[j][x] = C(x + j, j) for j in [0, q-1], x in [0, n+1].
    binom: Vec<Vec<u64>>,
}

impl Lattice {
    /// Builds the lattice addressing tables, refusing sizes above `cap`.
    pub fn new(q: usize, n: u32, cap: u64) -> Result<Self> {
        if q < 2 {
            return Err(invalid("lattice needs q >= 2"));
        }
        let size = lattice_size(q, n);
        if size > cap as u128 {
            return Err(Error::CapExceeded { size, cap });
        }
        let m = q - 1;
        let mut binom = Vec::with_capacity(m + 1);
        binom.push(vec![1u64; n as usize + 2]);
        for j in 1..=m {
            let prev = &binom[j - 1];
            let mut row = Vec::with_capacity(n as usize + 2);
            row.push(1u64);
            for x in 1..=(n as usize + 1) {
                row.push(row[x - 1] + prev[x]);
            }
            binom.push(row);
        }
        Ok(Lattice {
            q,
            n,
            size: size as u64,
            binom,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Number of lattice points, `C(n + q - 1, q - 1)`.
    pub fn len(&self) -> usize {
        self.size as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    // C(x + j, j) from the table.
    #[inline]
    fn choose(&self, x: u32, j: usize) -> u64 {
        self.binom[j][x as usize]
    }

    /// Rank of a composition under the colexicographic order on the first
    /// `q - 1` coordinates.
    #[inline]
    pub fn rank(&self, counts: &[u32]) -> usize {
        debug_assert_eq!(counts.len(), self.q);
        let m = self.q - 1;
        let mut rank = 0u64;
        let mut remaining = self.n;
        // Scan free coordinates from most significant (index m-1) down.
        for h in (0..m).rev() {
            let x = counts[h];
            if x > 0 {
                rank += self.choose(remaining, h + 1) - self.choose(remaining - x, h + 1);
            }
            remaining -= x;
        }
        rank as usize
    }

    /// Inverse of [`Lattice::rank`].
    pub fn unrank(&self, rank: usize) -> Composition {
        assert!(rank < self.len(), "rank out of range");
        let m = self.q - 1;
        let mut counts = vec![0u32; self.q];
        let mut remaining = self.n;
        let mut rest = rank as u64;
        for h in (0..m).rev() {
            // Largest x with (# of points whose coordinate h is < x) <= rest.
            let total = self.choose(remaining, h + 1);
            let mut lo = 0u32;
            let mut hi = remaining;
            while lo < hi {
                let mid = (lo + hi).div_ceil(2);
                let below = total - self.choose(remaining - mid, h + 1);
                if below <= rest {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            let x = lo;
            rest -= total - self.choose(remaining - x, h + 1);
            counts[h] = x;
            remaining -= x;
        }
        counts[m] = remaining;
        debug_assert_eq!(rest, 0);
        Composition { counts }
    }

    /// All compositions in rank order.
    pub fn iter(&self) -> LatticeIter<'_> {
        LatticeIter {
            lattice: self,
            next: Some(first_point(self.q, self.n)),
        }
    }
}

fn first_point(q: usize, n: u32) -> Vec<u32> {
    let mut counts = vec![0u32; q];
    counts[q - 1] = n;
    counts
}

/// Iterator over a lattice in rank order.
pub struct LatticeIter<'a> {
    lattice: &'a Lattice,
    next: Option<Vec<u32>>,
}

impl Iterator for LatticeIter<'_> {
    type Item = Composition;

    fn next(&mut self) -> Option<Composition> {
        let current = self.next.take()?;
        let mut counts = current.clone();
        // Odometer step in colex order: lowest free coordinate moves fastest.
        let m = self.lattice.q - 1;
        let mut advanced = false;
        for j in 0..m {
            if counts[m] > 0 {
                // Borrow one unit from the implied coordinate into j.
                counts[j] += 1;
                counts[m] -= 1;
                advanced = true;
                break;
            }
            // Coordinate j is saturated; clear it back into the implied slot.
            counts[m] += counts[j];
            counts[j] = 0;
        }
        if advanced {
            self.next = Some(counts);
        }
        Some(Composition { counts: current })
    }
}

/// Exact size of the `(q, n)` lattice as a 128-bit count.
pub fn lattice_size(q: usize, n: u32) -> u128 {
    let mut size = 1u128;
    for i in 1..q as u128 {
        size = size * (n as u128 + i) / i;
    }
    size
}

/// All compositions of `n` over a `q`-ary alphabet, in rank order.
pub fn enumerate(q: usize, n: u32, cap: u64) -> Result<Vec<Composition>> {
    if q < 2 {
        return Err(invalid("enumerate needs q >= 2"));
    }
    let lattice = Lattice::new(q, n, cap)?;
    Ok(lattice.iter().collect())
}

/// Checks `n^(q-1)/(q-1)! <= |lattice| <= (2n)^(q-1)` (valid for n >= q-1).
pub fn size_bounds_hold(q: usize, n: u32) -> Result<bool> {
    if (n as usize) < q - 1 {
        return Err(invalid(
            "size bounds need n >= q - 1; got n = ".to_string() + &n.to_string(),
        ));
    }
    let size = lattice_size(q, n);
    let mut lower_num = 1u128;
    let mut lower_den = 1u128;
    for i in 1..q as u128 {
        lower_num *= n as u128;
        lower_den *= i;
    }
    let upper = (2 * n as u128).pow(q as u32 - 1);
    Ok(lower_num <= size * lower_den && size <= upper)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerate_small_binary() {
        let all = enumerate(2, 2, 1 << 20).unwrap();
        let counts: Vec<&[u32]> = all.iter().map(|c| c.counts()).collect();
        assert_eq!(counts, vec![&[0, 2][..], &[1, 1], &[2, 0]]);
    }

    #[test]
    fn enumerate_matches_binomial_count() {
        // C(6, 2) = 15 for q = 3, n = 4.
        let all = enumerate(3, 4, 1 << 20).unwrap();
        assert_eq!(all.len(), 15);
        for c in &all {
            assert_eq!(c.n(), 4);
        }
        // No duplicates.
        let mut seen = std::collections::BTreeSet::new();
        for c in &all {
            assert!(seen.insert(c.counts().to_vec()));
        }
    }

    #[test]
    fn size_bounds_small() {
        // q = 2, n = 4: 4 <= 5 <= 8.
        assert!(size_bounds_hold(2, 4).unwrap());
        for q in 2..=4 {
            for n in (q as u32 - 1).max(1)..=12 {
                assert!(size_bounds_hold(q, n).unwrap(), "q={q} n={n}");
            }
        }
    }

    #[test]
    fn rank_unrank_roundtrip() {
        for (q, n) in [(2, 7), (3, 6), (4, 5), (5, 4)] {
            let lattice = Lattice::new(q, n, 1 << 20).unwrap();
            for (i, c) in lattice.iter().enumerate() {
                assert_eq!(lattice.rank(c.counts()), i);
                assert_eq!(lattice.unrank(i), c);
            }
        }
    }

    #[test]
    fn distance_examples() {
        let t = Composition::new(vec![3, 0, 1]).unwrap();
        let s = Composition::new(vec![1, 2, 1]).unwrap();
        assert_eq!(t.distance(&s).unwrap(), 2);
        assert_eq!(t.distance(&t).unwrap(), 0);
        let a = Composition::new(vec![5, 0]).unwrap();
        let b = Composition::new(vec![0, 5]).unwrap();
        assert_eq!(a.distance(&b).unwrap(), 5);
    }

    #[test]
    fn distance_rejects_mismatch() {
        let t = Composition::new(vec![1, 1]).unwrap();
        let s = Composition::new(vec![1, 1, 0]).unwrap();
        assert!(t.distance(&s).is_err());
        let u = Composition::new(vec![2, 1]).unwrap();
        assert!(t.distance(&u).is_err());
    }

    #[test]
    fn type_class_sizes() {
        assert_eq!(
            Composition::new(vec![1, 1]).unwrap().type_class_size(),
            BigUint::from(2u32)
        );
        assert_eq!(
            Composition::new(vec![2, 1, 1]).unwrap().type_class_size(),
            BigUint::from(12u32)
        );
    }

    #[test]
    fn type_class_sizes_partition_all_strings() {
        for (q, n) in [(2u32, 6u32), (3, 5), (4, 4)] {
            let total: BigUint = enumerate(q as usize, n, 1 << 20)
                .unwrap()
                .iter()
                .map(|c| c.type_class_size())
                .sum();
            assert_eq!(total, BigUint::from(q).pow(n));
        }
    }

    #[test]
    fn cap_is_enforced() {
        match Lattice::new(3, 10_000, 100) {
            Err(Error::CapExceeded { .. }) => {}
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_tiny_alphabet() {
        assert!(enumerate(1, 3, 1000).is_err());
        assert!(Composition::new(vec![3]).is_err());
    }
}

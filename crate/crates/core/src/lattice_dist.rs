//! Finitely supported distributions on the composition lattice.
//!
//! Points are raw count vectors (`Vec<u32>`); a distribution stores only its
//! strictly positive masses in a `BTreeMap` so iteration order, and therefore
//! every reduction over the support, is deterministic. Exact M-type
//! distributions are kept as integer numerators over a common denominator in
//! [`MTypeDist`], which makes collision tests exact rather than tolerant.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math;

/// A lattice point: symbol counts, not necessarily summing to any fixed `n`.
pub type Point = Vec<u32>;

/// Tolerance for "sums to one" and "is a multiple of 1/M" checks.
pub const MASS_TOL: f64 = 1e-12;

/// A probability distribution with finite support on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDist {
    dim: usize,
    mass: BTreeMap<Point, f64>,
}

impl LatticeDist {
    /// Builds a distribution from `(point, mass)` pairs.
    ///
    /// Zero masses are dropped, negative masses and duplicate points are
    /// rejected, and the total must be within [`MASS_TOL`] of one.
    pub fn from_entries(
        dim: usize,
        entries: impl IntoIterator<Item = (Point, f64)>,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(invalid("lattice distributions need dimension >= 2"));
        }
        let mut mass = BTreeMap::new();
        let mut total = 0.0;
        for (point, value) in entries {
            if point.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: point.len(),
                });
            }
            if value < 0.0 || value.is_nan() {
                return Err(Error::NotADistribution(format!(
                    "negative or NaN mass {value}"
                )));
            }
            total += value;
            if value > 0.0 && mass.insert(point, value).is_some() {
                return Err(Error::NotADistribution("duplicate support point".into()));
            }
        }
        if math::abs(total - 1.0) > MASS_TOL {
            return Err(Error::NotADistribution(format!(
                "total mass {total} is not 1"
            )));
        }
        Ok(LatticeDist { dim, mass })
    }

    /// Point mass at `point`.
    pub fn delta(point: Point) -> Result<Self> {
        let dim = point.len();
        Self::from_entries(dim, [(point, 1.0)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_len(&self) -> usize {
        self.mass.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.mass.iter().map(|(p, &v)| (p, v))
    }

    pub fn mass(&self, point: &[u32]) -> f64 {
        self.mass.get(point).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.values().sum()
    }

    /// Total variation distance, `(1/2) sum |P - Q|`.
    pub fn tv_distance(&self, other: &LatticeDist) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut acc = 0.0;
        for (p, v) in &self.mass {
            acc += math::abs(v - other.mass(p));
        }
        for (p, v) in &other.mass {
            if !self.mass.contains_key(p) {
                acc += v;
            }
        }
        Ok(acc / 2.0)
    }

    /// Convolution with another distribution: `(P * Q)(t) = sum_l P(t - l) Q(l)`.
    pub fn convolve(&self, other: &LatticeDist) -> Result<LatticeDist> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut mass: BTreeMap<Point, f64> = BTreeMap::new();
        for (p, pv) in &self.mass {
            for (q, qv) in &other.mass {
                let sum: Point = p.iter().zip(q).map(|(&a, &b)| a + b).collect();
                *mass.entry(sum).or_insert(0.0) += pv * qv;
            }
        }
        Ok(LatticeDist {
            dim: self.dim,
            mass,
        })
    }

    /// Sum over the shifted lattice of `|Q(t - e_b) - Q(t - e_a)|`: the total
    /// variation of `Q` along the direction `e_b - e_a`. Controls how much an
    /// output distribution can move when a unit of input mass moves from
    /// symbol `a` to symbol `b`.
    pub fn directional_variation(&self, a: usize, b: usize) -> Result<f64> {
        if a == b {
            return Err(invalid("directional variation needs two distinct symbols"));
        }
        if a >= self.dim || b >= self.dim {
            return Err(invalid("symbol index out of range"));
        }
        let mut candidates: BTreeSet<Point> = BTreeSet::new();
        for p in self.mass.keys() {
            let mut pa = p.clone();
            pa[a] += 1;
            candidates.insert(pa);
            let mut pb = p.clone();
            pb[b] += 1;
            candidates.insert(pb);
        }
        let mut acc = 0.0;
        let mut shifted = Vec::with_capacity(self.dim);
        for t in candidates {
            let qa = if t[a] > 0 {
                shifted.clear();
                shifted.extend_from_slice(&t);
                shifted[a] -= 1;
                self.mass(&shifted)
            } else {
                0.0
            };
            let qb = if t[b] > 0 {
                shifted.clear();
                shifted.extend_from_slice(&t);
                shifted[b] -= 1;
                self.mass(&shifted)
            } else {
                0.0
            };
            acc += math::abs(qb - qa);
        }
        Ok(acc)
    }

    /// True if every mass is within `tol` of a multiple of `1/m`.
    pub fn is_m_type(&self, m: u64, tol: f64) -> Result<bool> {
        if m < 1 {
            return Err(invalid("m-type denominator must be >= 1"));
        }
        Ok(self.mass.values().all(|&v| {
            let scaled = v * m as f64;
            math::abs(scaled - math::round(scaled)) <= tol * m as f64
        }))
    }

    /// Per-point mass above the largest multiple of `1/m` below it.
    pub fn residual(&self, m: u64) -> Result<SignedLatticeSeq> {
        if m < 1 {
            return Err(invalid("m-type denominator must be >= 1"));
        }
        let mut vals = BTreeMap::new();
        for (p, &v) in &self.mass {
            let floored = math::floor(v * m as f64) / m as f64;
            let res = v - floored;
            if res != 0.0 {
                vals.insert(p.clone(), res);
            }
        }
        Ok(SignedLatticeSeq {
            dim: self.dim,
            vals,
        })
    }

    /// The distribution obtained by moving mass `amount` from `from` to `to`
    /// for each listed shift. Shifts apply in order, so each one may draw on
    /// mass deposited by an earlier one.
    pub fn with_shifts(&self, shifts: &[(Point, Point, f64)]) -> Result<LatticeDist> {
        let mut mass = self.mass.clone();
        for (from, to, amount) in shifts {
            if from.len() != self.dim || to.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: from.len().max(to.len()),
                });
            }
            if *amount < 0.0 {
                return Err(invalid("shift mass must be nonnegative"));
            }
            let avail = mass.get(from).copied().unwrap_or(0.0);
            if avail + MASS_TOL < *amount {
                return Err(Error::NotADistribution(format!(
                    "shift of {amount} exceeds available mass {avail}"
                )));
            }
            let left = avail - *amount;
            if left > 0.0 {
                mass.insert(from.clone(), left);
            } else {
                mass.remove(from);
            }
            *mass.entry(to.clone()).or_insert(0.0) += *amount;
        }
        mass.retain(|_, v| *v > 0.0);
        Ok(LatticeDist {
            dim: self.dim,
            mass,
        })
    }
}

/// A finitely supported real-valued sequence on the lattice (signed masses).
#[derive(Debug, Clone, PartialEq)]
pub struct SignedLatticeSeq {
    dim: usize,
    vals: BTreeMap<Point, f64>,
}

impl SignedLatticeSeq {
    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (Point, f64)>) -> Result<Self> {
        let mut vals = BTreeMap::new();
        for (point, value) in entries {
            if point.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: point.len(),
                });
            }
            if value != 0.0 {
                *vals.entry(point).or_insert(0.0) += value;
            }
        }
        Ok(SignedLatticeSeq { dim, vals })
    }

    /// The difference of two point masses, `delta(to) - delta(from)`.
    pub fn step(from: Point, to: Point) -> Result<Self> {
        let dim = from.len();
        Self::from_entries(dim, [(from, -1.0), (to, 1.0)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.vals.iter().map(|(p, &v)| (p, v))
    }

    pub fn value(&self, point: &[u32]) -> f64 {
        self.vals.get(point).copied().unwrap_or(0.0)
    }

    pub fn l1_norm(&self) -> f64 {
        self.vals.values().map(|v| math::abs(*v)).sum()
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.vals.values().all(|v| math::abs(*v) <= tol)
    }

    /// Convolution with a probability distribution. The l1 norm never grows.
    pub fn convolve(&self, pmf: &LatticeDist) -> Result<SignedLatticeSeq> {
        if self.dim != pmf.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: pmf.dim(),
            });
        }
        let mut vals: BTreeMap<Point, f64> = BTreeMap::new();
        for (p, pv) in &self.vals {
            for (q, qv) in pmf.iter() {
                let sum: Point = p.iter().zip(q).map(|(&a, &b)| a + b).collect();
                *vals.entry(sum).or_insert(0.0) += pv * qv;
            }
        }
        Ok(SignedLatticeSeq {
            dim: self.dim,
            vals,
        })
    }
}

/// An exactly M-type distribution: integer numerators over denominator `m`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MTypeDist {
    denom: u64,
    dim: usize,
    numer: BTreeMap<Point, u64>,
}

impl MTypeDist {
    /// Builds from integer numerators; they must sum to `m` exactly.
    pub fn from_numerators(
        dim: usize,
        m: u64,
        entries: impl IntoIterator<Item = (Point, u64)>,
    ) -> Result<Self> {
        if m < 1 {
            return Err(invalid("m-type denominator must be >= 1"));
        }
        let mut numer = BTreeMap::new();
        let mut total = 0u64;
        for (point, k) in entries {
            if point.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: point.len(),
                });
            }
            total = total
                .checked_add(k)
                .ok_or_else(|| invalid("numerator overflow"))?;
            if k > 0 && numer.insert(point, k).is_some() {
                return Err(Error::NotADistribution("duplicate support point".into()));
            }
        }
        if total != m {
            return Err(Error::NotADistribution(format!(
                "numerators sum to {total}, expected {m}"
            )));
        }
        Ok(MTypeDist { denom: m, dim, numer })
    }

    pub fn denom(&self) -> u64 {
        self.denom
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn numerators(&self) -> impl Iterator<Item = (&Point, u64)> {
        self.numer.iter().map(|(p, &k)| (p, k))
    }

    pub fn numerator(&self, point: &[u32]) -> u64 {
        self.numer.get(point).copied().unwrap_or(0)
    }

    pub fn to_dist(&self) -> LatticeDist {
        let mass = self
            .numer
            .iter()
            .map(|(p, &k)| (p.clone(), k as f64 / self.denom as f64))
            .collect();
        LatticeDist {
            dim: self.dim,
            mass,
        }
    }
}

/// One move of probability mass between two symbols of the alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicShift {
    /// Source symbol (where `u` dominates `v`).
    pub from: usize,
    /// Destination symbol (where `v` dominates `u`).
    pub to: usize,
    /// Strictly positive amount of mass moved.
    pub mass: f64,
}

/// Decomposes the change from distribution `u` to distribution `v` over the
/// symbol alphabet into at most `|S+| + |S-| - 1` single-pair mass moves.
///
/// Each returned shift moves mass from a symbol where `u` dominates to one
/// where `v` dominates; the shift masses sum to the total variation distance,
/// and applying them to `u` reconstructs `v`. Ties are broken by smallest
/// index so the output is deterministic. If `u` and `v` are n-type, every
/// shift mass is a multiple of `1/n`.
pub fn atomic_decomposition(u: &[f64], v: &[f64]) -> Result<Vec<AtomicShift>> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    for dist in [u, v] {
        if dist.iter().any(|&x| x < 0.0 || x.is_nan()) {
            return Err(Error::NotADistribution("negative or NaN entry".into()));
        }
        let total: f64 = dist.iter().sum();
        if math::abs(total - 1.0) > MASS_TOL {
            return Err(Error::NotADistribution(format!(
                "entries sum to {total}, expected 1"
            )));
        }
    }
    let mut excess: Vec<f64> = u.iter().zip(v).map(|(&a, &b)| a - b).collect();
    let mut shifts = Vec::new();
    loop {
        // Smallest-index symbol still dominated by u, and by v.
        let from = excess.iter().position(|&e| e > MASS_TOL);
        let to = excess.iter().position(|&e| e < -MASS_TOL);
        let (Some(from), Some(to)) = (from, to) else {
            break;
        };
        let amount = excess[from].min(-excess[to]);
        shifts.push(AtomicShift {
            from,
            to,
            mass: amount,
        });
        excess[from] -= amount;
        excess[to] += amount;
    }
    Ok(shifts)
}

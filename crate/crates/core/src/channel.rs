//! The memoryless symbol channel, the induced composition-to-composition
//! kernel, Monte Carlo sampling of the permutation channel, and a brute-force
//! oracle kernel for small block lengths.
//!
//! The composition an input string lands on after the channel depends only on
//! the input's composition, and its distribution is the convolution of one
//! multinomial per input symbol. Kernel rows are built densely in lattice
//! rank order; the sparse [`LatticeDist`] view is derived on demand.

use alloc::vec;
use alloc::vec::Vec;

use crate::compositions::{Composition, Lattice};
use crate::error::{invalid, Error, Result};
use crate::lattice_dist::LatticeDist;
use crate::math;
use crate::multinomial::Multinomial;
use crate::rng;
use rand_core::RngCore;

/// Row-sum and kernel-row normalization tolerance.
const ROW_TOL: f64 = 1e-10;

/// A discrete memoryless channel on a `q`-ary alphabet: a row-stochastic
/// `q x q` matrix whose row `a` is the output distribution for input `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dmc {
    rows: Vec<Vec<f64>>,
    strictly_positive: bool,
    rank: usize,
}

impl Dmc {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let q = rows.len();
        if q < 2 {
            return Err(invalid("channel matrix needs q >= 2"));
        }
        for row in &rows {
            if row.len() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    got: row.len(),
                });
            }
            if row.iter().any(|&p| p < 0.0 || p.is_nan()) {
                return Err(invalid("channel entries must be nonnegative"));
            }
            let total: f64 = row.iter().sum();
            if math::abs(total - 1.0) > 1e-12 {
                return Err(invalid("channel rows must sum to 1"));
            }
        }
        let strictly_positive = rows.iter().all(|r| r.iter().all(|&p| p > 0.0));
        let rank = numerical_rank(&rows, 1e-9);
        Ok(Dmc {
            rows,
            strictly_positive,
            rank,
        })
    }

    /// The identity channel (noiseless).
    pub fn identity(q: usize) -> Result<Self> {
        let rows = (0..q)
            .map(|i| {
                let mut row = vec![0.0; q];
                row[i] = 1.0;
                row
            })
            .collect();
        Self::new(rows)
    }

    /// Binary symmetric channel with crossover probability `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("crossover probability must be in [0, 1]"));
        }
        Self::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Identity mixed with the uniform channel: with probability `gamma` the
    /// output symbol is uniform, otherwise it passes through unchanged.
    pub fn uniform_mix(q: usize, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(invalid("mix weight must be in [0, 1]"));
        }
        let rows = (0..q)
            .map(|i| {
                (0..q)
                    .map(|j| {
                        let base = gamma / q as f64;
                        if i == j {
                            base + (1.0 - gamma)
                        } else {
                            base
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(rows)
    }

    pub fn q(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.rows[a]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn strictly_positive(&self) -> bool {
        self.strictly_positive
    }

    /// Numerical rank at pivot tolerance 1e-9.
    pub fn rank(&self) -> usize {
        self.rank
    }
}

#[allow(clippy::needless_range_loop)]
fn numerical_rank(rows: &[Vec<f64>], tol: f64) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let q = m.len();
    let mut rank = 0;
    for col in 0..q {
        // Partial pivot below the current rank row.
        let pivot = (rank..q)
            .max_by(|&a, &b| math::abs(m[a][col]).total_cmp(&math::abs(m[b][col])));
        let Some(pivot) = pivot else { break };
        if math::abs(m[pivot][col]) <= tol {
            continue;
        }
        m.swap(rank, pivot);
        for r in rank + 1..q {
            let factor = m[r][col] / m[rank][col];
            for c in col..q {
                m[r][c] -= factor * m[rank][c];
            }
        }
        rank += 1;
        if rank == q {
            break;
        }
    }
    rank
}

/// Dense pmf over a lattice, tagged with its addressing tables.
pub(crate) struct DenseDist {
    pub lattice: Lattice,
    pub values: Vec<f64>,
}

impl DenseDist {
    pub(crate) fn to_sparse(&self) -> Result<LatticeDist> {
        LatticeDist::from_entries(
            self.lattice.q(),
            self.lattice
                .iter()
                .zip(&self.values)
                .filter(|(_, &v)| v > 0.0)
                .map(|(c, &v)| (c.into_counts(), v)),
        )
    }
}

/// Convolves a dense pmf over `(q, m)` with one multinomial, landing on the
/// `(q, m + trials)` lattice.
pub(crate) fn convolve_dense(cur: &DenseDist, mult: &Multinomial, cap: u64) -> Result<DenseDist> {
    let q = cur.lattice.q();
    let part_lat = Lattice::new(q, mult.trials(), cap)?;
    let part = mult.dense_over(&part_lat);
    let next_lat = Lattice::new(q, cur.lattice.n() + mult.trials(), cap)?;
    let mut next = vec![0.0f64; next_lat.len()];
    let cur_points: Vec<Vec<u32>> = cur.lattice.iter().map(|c| c.into_counts()).collect();
    let part_points: Vec<Vec<u32>> = part_lat.iter().map(|c| c.into_counts()).collect();
    let mut sum_pt = vec![0u32; q];
    for (i, &ci) in cur.values.iter().enumerate() {
        if ci == 0.0 {
            continue;
        }
        let pi = &cur_points[i];
        for (j, &pj) in part.iter().enumerate() {
            if pj == 0.0 {
                continue;
            }
            let pjp = &part_points[j];
            for k in 0..q {
                sum_pt[k] = pi[k] + pjp[k];
            }
            next[next_lat.rank(&sum_pt)] += ci * pj;
        }
    }
    Ok(DenseDist {
        lattice: next_lat,
        values: next,
    })
}

/// Dense output-composition distribution for an input of composition `t`:
/// the convolution of `Multinomial(t_a, row_a)` over the symbols, skipping
/// symbols with zero count.
pub(crate) fn output_dense(dmc: &Dmc, t: &[u32], cap: u64) -> Result<DenseDist> {
    let q = dmc.q();
    if t.len() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: t.len(),
        });
    }
    let mut cur = DenseDist {
        lattice: Lattice::new(q, 0, cap)?,
        values: vec![1.0],
    };
    for (a, &count) in t.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let mult = Multinomial::new(count, dmc.row(a).to_vec())?;
        cur = convolve_dense(&cur, &mult, cap)?;
    }
    Ok(cur)
}

/// The output-composition distribution for a single transmitted composition.
pub fn output_comp_dist(dmc: &Dmc, t: &Composition, cap: u64) -> Result<LatticeDist> {
    if t.q() != dmc.q() {
        return Err(Error::DimensionMismatch {
            expected: dmc.q(),
            got: t.q(),
        });
    }
    output_dense(dmc, t.counts(), cap)?.to_sparse()
}

/// The full composition-to-composition kernel for block length `n`: one
/// row-stochastic row per input composition, in lattice rank order.
#[derive(Debug, Clone)]
pub struct QnccKernel {
    lattice: Lattice,
    rows: Vec<Vec<f64>>,
}

impl QnccKernel {
    /// Assembles a kernel from dense rows in lattice rank order, validating
    /// shape and row normalization.
    pub fn from_rows(lattice: Lattice, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != lattice.len() {
            return Err(Error::DimensionMismatch {
                expected: lattice.len(),
                got: rows.len(),
            });
        }
        for row in &rows {
            if row.len() != lattice.len() {
                return Err(Error::DimensionMismatch {
                    expected: lattice.len(),
                    got: row.len(),
                });
            }
            let total: f64 = row.iter().sum();
            if math::abs(total - 1.0) > ROW_TOL {
                return Err(Error::NotADistribution(alloc::format!(
                    "kernel row sums to {total}"
                )));
            }
        }
        Ok(QnccKernel { lattice, rows })
    }

    pub fn q(&self) -> usize {
        self.lattice.q()
    }

    pub fn n(&self) -> u32 {
        self.lattice.n()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Dense transition row for the input with the given rank.
    pub fn row(&self, input_rank: usize) -> &[f64] {
        &self.rows[input_rank]
    }

    pub fn row_for(&self, t: &Composition) -> &[f64] {
        &self.rows[self.lattice.rank(t.counts())]
    }

    pub fn row_dist(&self, input_rank: usize) -> Result<LatticeDist> {
        LatticeDist::from_entries(
            self.q(),
            self.lattice
                .iter()
                .zip(&self.rows[input_rank])
                .filter(|(_, &v)| v > 0.0)
                .map(|(c, &v)| (c.into_counts(), v)),
        )
    }

    /// Sparse row view with entries below `eps` dropped and the remainder
    /// renormalized. Pruning changes the row by at most `eps * |support|`
    /// in total variation.
    pub fn row_dist_pruned(&self, input_rank: usize, eps: f64) -> Result<LatticeDist> {
        let row = &self.rows[input_rank];
        let kept: f64 = row.iter().filter(|&&v| v >= eps).sum();
        if kept <= 0.0 {
            return Err(Error::NotADistribution(
                "pruning threshold removed the whole row".into(),
            ));
        }
        LatticeDist::from_entries(
            self.q(),
            self.lattice
                .iter()
                .zip(row)
                .filter(|(_, &v)| v >= eps)
                .map(|(c, &v)| (c.into_counts(), v / kept)),
        )
    }

    /// Pushes an input distribution through the kernel, densely.
    pub fn apply_dense(&self, input: &LatticeDist) -> Result<Vec<f64>> {
        if input.dim() != self.q() {
            return Err(Error::DimensionMismatch {
                expected: self.q(),
                got: input.dim(),
            });
        }
        let mut out = vec![0.0f64; self.lattice.len()];
        for (point, mass) in input.iter() {
            if point.iter().sum::<u32>() != self.n() {
                return Err(invalid("input point is not a composition of n"));
            }
            let row = &self.rows[self.lattice.rank(point)];
            for (o, &r) in out.iter_mut().zip(row) {
                *o += mass * r;
            }
        }
        Ok(out)
    }

    /// Pushes an input distribution through the kernel.
    pub fn output_dist(&self, input: &LatticeDist) -> Result<LatticeDist> {
        let dense = self.apply_dense(input)?;
        LatticeDist::from_entries(
            self.q(),
            self.lattice
                .iter()
                .zip(&dense)
                .filter(|(_, &v)| v > 0.0)
                .map(|(c, &v)| (c.into_counts(), v)),
        )
    }

    /// Total variation between the output distributions of two inputs.
    pub fn tv_between_inputs(&self, a: &Composition, b: &Composition) -> f64 {
        tv_dense(self.row_for(a), self.row_for(b))
    }
}

/// Total variation between two dense pmf vectors of equal length.
pub fn tv_dense(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a
        .iter()
        .zip(b)
        .map(|(&x, &y)| math::abs(x - y))
        .sum::<f64>()
}

/// One dense kernel row, in lattice rank order. Rows are independent, so
/// callers may compute them concurrently and assemble with
/// [`QnccKernel::from_rows`].
pub fn kernel_row(dmc: &Dmc, t: &Composition, cap: u64) -> Result<Vec<f64>> {
    Ok(output_dense(dmc, t.counts(), cap)?.values)
}

/// Builds the exact kernel by multinomial convolution, one row per input
/// composition.
pub fn qncc_kernel(dmc: &Dmc, n: u32, cap: u64) -> Result<QnccKernel> {
    let lattice = Lattice::new(dmc.q(), n, cap)?;
    let mut rows = Vec::with_capacity(lattice.len());
    for t in lattice.iter() {
        rows.push(output_dense(dmc, t.counts(), cap)?.values);
    }
    QnccKernel::from_rows(lattice, rows)
}

/// Passes `x` through a uniform random permutation, then through the channel
/// symbol by symbol.
pub fn sample_sigma(dmc: &Dmc, x: &[u8], rng_stream: &mut impl RngCore) -> Vec<u8> {
    let mut permuted = x.to_vec();
    rng::shuffle(rng_stream, &mut permuted);
    permuted
        .iter()
        .map(|&s| rng::categorical(rng_stream, dmc.row(s as usize)) as u8)
        .collect()
}

/// Exact kernel by exhaustive enumeration of all `q^n` output strings.
///
/// This is the oracle the convolution kernel is checked against; the two
/// compute the same row set along entirely different paths.
pub fn brute_force_kernel(dmc: &Dmc, n: u32, string_cap: u64) -> Result<QnccKernel> {
    let q = dmc.q();
    let strings = (q as u128).checked_pow(n).unwrap_or(u128::MAX);
    if strings > string_cap as u128 {
        return Err(Error::CapExceeded {
            size: strings,
            cap: string_cap,
        });
    }
    let lattice = Lattice::new(q, n, string_cap)?;
    let mut rows = Vec::with_capacity(lattice.len());
    for t in lattice.iter() {
        rows.push(brute_force_row(dmc, &t, &lattice));
    }
    QnccKernel::from_rows(lattice, rows)
}

/// One exact kernel row via string enumeration, for an arbitrary
/// representative string of composition `t`.
pub fn brute_force_row_for_string(dmc: &Dmc, x: &[u8], lattice: &Lattice) -> Vec<f64> {
    let q = dmc.q();
    let n = x.len();
    let mut row = vec![0.0f64; lattice.len()];
    let mut z = vec![0u8; n];
    let mut comp = vec![0u32; q];
    loop {
        let mut prob = 1.0;
        for (zi, xi) in z.iter().zip(x) {
            prob *= dmc.row(*xi as usize)[*zi as usize];
        }
        if prob > 0.0 {
            for c in comp.iter_mut() {
                *c = 0;
            }
            for &zi in &z {
                comp[zi as usize] += 1;
            }
            row[lattice.rank(&comp)] += prob;
        }
        // Odometer over [0, q)^n.
        let mut pos = 0;
        loop {
            if pos == n {
                return row;
            }
            z[pos] += 1;
            if (z[pos] as usize) < q {
                break;
            }
            z[pos] = 0;
            pos += 1;
        }
    }
}

fn brute_force_row(dmc: &Dmc, t: &Composition, lattice: &Lattice) -> Vec<f64> {
    brute_force_row_for_string(dmc, &t.canonical_string(), lattice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compositions::composition_of;
    use crate::rng::seeded;

    #[test]
    fn dmc_validation() {
        assert!(Dmc::new(vec![vec![0.5, 0.5], vec![0.6, 0.5]]).is_err());
        assert!(Dmc::new(vec![vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        let bsc = Dmc::bsc(0.1).unwrap();
        assert!(bsc.strictly_positive());
        assert_eq!(bsc.rank(), 2);
        let id = Dmc::identity(3).unwrap();
        assert!(!id.strictly_positive());
        assert_eq!(id.rank(), 3);
    }

    #[test]
    fn rank_of_constructed_matrices() {
        // Two identical rows: rank 2.
        let m = Dmc::new(vec![
            vec![0.5, 0.3, 0.2],
            vec![0.5, 0.3, 0.2],
            vec![0.1, 0.1, 0.8],
        ])
        .unwrap();
        assert_eq!(m.rank(), 2);
        // Uniform channel: rank 1.
        let u = Dmc::uniform_mix(3, 1.0).unwrap();
        assert_eq!(u.rank(), 1);
        let mixed = Dmc::uniform_mix(4, 0.3).unwrap();
        assert_eq!(mixed.rank(), 4);
        assert!(mixed.strictly_positive());
    }

    #[test]
    fn identity_kernel_is_identity() {
        let id = Dmc::identity(2).unwrap();
        let k = qncc_kernel(&id, 4, 1 << 20).unwrap();
        for i in 0..k.num_rows() {
            for j in 0..k.num_rows() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(k.row(i)[j], expect);
            }
        }
    }

    #[test]
    fn single_symbol_row() {
        let dmc = Dmc::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let t = Composition::new(vec![1, 0]).unwrap();
        let w = output_comp_dist(&dmc, &t, 1 << 20).unwrap();
        assert!((w.mass(&[1, 0]) - 0.9).abs() < 1e-15);
        assert!((w.mass(&[0, 1]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn convolution_matches_brute_force_bsc() {
        let dmc = Dmc::bsc(0.1).unwrap();
        let exact = qncc_kernel(&dmc, 3, 1 << 20).unwrap();
        let brute = brute_force_kernel(&dmc, 3, 1 << 20).unwrap();
        for i in 0..exact.num_rows() {
            for j in 0..exact.num_rows() {
                assert!((exact.row(i)[j] - brute.row(i)[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn brute_force_row_is_representative_independent() {
        let dmc = Dmc::new(vec![
            vec![0.6, 0.3, 0.1],
            vec![0.2, 0.5, 0.3],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap();
        let lattice = Lattice::new(3, 4, 1 << 20).unwrap();
        let a = brute_force_row_for_string(&dmc, &[0, 0, 1, 2], &lattice);
        let b = brute_force_row_for_string(&dmc, &[2, 1, 0, 0], &lattice);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn strictly_positive_kernel_has_positive_entries() {
        let dmc = Dmc::uniform_mix(3, 0.4).unwrap();
        let k = qncc_kernel(&dmc, 3, 1 << 20).unwrap();
        for i in 0..k.num_rows() {
            assert!(k.row(i).iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn sampled_compositions_match_kernel_row() {
        let dmc = Dmc::bsc(0.1).unwrap();
        let n = 12u32;
        let k = qncc_kernel(&dmc, n, 1 << 20).unwrap();
        let x: Vec<u8> = [0u8; 7].iter().chain(&[1u8; 5]).copied().collect();
        let t = composition_of(2, &x);
        let mut rng = seeded(7);
        let mut hist = vec![0u64; k.num_rows()];
        let trials = 100_000;
        for _ in 0..trials {
            let y = sample_sigma(&dmc, &x, &mut rng);
            let w = composition_of(2, &y);
            hist[k.lattice().rank(w.counts())] += 1;
        }
        let row = k.row_for(&t);
        let tv: f64 = 0.5
            * hist
                .iter()
                .zip(row)
                .map(|(&h, &p)| (h as f64 / trials as f64 - p).abs())
                .sum::<f64>();
        assert!(tv < 0.02, "empirical tv {tv}");
    }

    #[test]
    fn identity_sampling_preserves_composition() {
        let id = Dmc::identity(3).unwrap();
        let x = [0u8, 1, 1, 2, 2, 2];
        let mut rng = seeded(3);
        for _ in 0..200 {
            let y = sample_sigma(&id, &x, &mut rng);
            assert_eq!(composition_of(3, &y), composition_of(3, &x));
        }
    }

    #[test]
    fn block_order_equivalence() {
        // Permute-then-channel and channel-then-permute induce the same
        // output composition distribution; a pooled two-sample chi-square
        // test at alpha = 0.01 must not reject.
        let dmc = Dmc::bsc(0.2).unwrap();
        let n = 10usize;
        let x: Vec<u8> = [0u8; 6].iter().chain(&[1u8; 4]).copied().collect();
        let lattice = Lattice::new(2, n as u32, 1 << 20).unwrap();
        let trials = 60_000;
        let mut rng = seeded(11);
        let mut h1 = vec![0u64; lattice.len()];
        let mut h2 = vec![0u64; lattice.len()];
        for _ in 0..trials {
            // Permutation first.
            let y = sample_sigma(&dmc, &x, &mut rng);
            h1[lattice.rank(composition_of(2, &y).counts())] += 1;
            // Channel first, then permutation (which cannot change the
            // composition, so apply the channel directly).
            let z: Vec<u8> = x
                .iter()
                .map(|&s| rng::categorical(&mut rng, dmc.row(s as usize)) as u8)
                .collect();
            h2[lattice.rank(composition_of(2, &z).counts())] += 1;
        }
        // Pool bins until each pooled pair holds at least 10 samples.
        let mut statistic = 0.0f64;
        let mut bins = 0usize;
        let (mut a_acc, mut b_acc) = (0u64, 0u64);
        for (&a, &b) in h1.iter().zip(&h2) {
            a_acc += a;
            b_acc += b;
            if a_acc + b_acc >= 10 {
                let total = (a_acc + b_acc) as f64;
                statistic += (a_acc as f64 - b_acc as f64).powi(2) / total;
                bins += 1;
                a_acc = 0;
                b_acc = 0;
            }
        }
        if a_acc + b_acc > 0 {
            let total = (a_acc + b_acc) as f64;
            statistic += (a_acc as f64 - b_acc as f64).powi(2) / total;
            bins += 1;
        }
        let dof = (bins - 1) as f64;
        // Normal approximation of the chi-square alpha = 0.01 critical value.
        let critical = dof + 2.326 * (2.0 * dof).sqrt();
        assert!(
            statistic <= critical,
            "chi-square {statistic} above critical {critical} (dof {dof})"
        );
    }

    #[test]
    fn pruned_rows_stay_close() {
        let dmc = Dmc::bsc(0.15).unwrap();
        let k = qncc_kernel(&dmc, 20, 1 << 20).unwrap();
        let eps = 1e-6;
        for r in 0..k.num_rows() {
            let full = k.row_dist(r).unwrap();
            let pruned = k.row_dist_pruned(r, eps).unwrap();
            assert!(pruned.support_len() <= full.support_len());
            let tv = full.tv_distance(&pruned).unwrap();
            assert!(tv <= eps * full.support_len() as f64, "row {r}: tv {tv}");
        }
    }

    #[test]
    fn kernel_cap() {
        let dmc = Dmc::bsc(0.3).unwrap();
        assert!(matches!(
            qncc_kernel(&dmc, 100, 50),
            Err(Error::CapExceeded { .. })
        ));
        assert!(matches!(
            brute_force_kernel(&dmc, 64, 1 << 20),
            Err(Error::CapExceeded { .. })
        ));
    }
}

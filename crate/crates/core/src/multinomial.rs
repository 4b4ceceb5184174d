//! Multinomial and binomial pmfs, and numerical checks of the distribution
//! bounds used throughout the converse machinery.
//!
//! Pmf evaluation goes through base-2 log-gamma with a single final
//! exponentiation, which keeps relative error around 1e-13 at desk scale.
//! All logarithms here are base 2.

use alloc::vec::Vec;

use crate::compositions::Lattice;
use crate::error::{invalid, Result};
use crate::lattice_dist::LatticeDist;
use crate::math;

/// A multinomial distribution: `trials` independent draws from `probs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multinomial {
    trials: u32,
    probs: Vec<f64>,
}

impl Multinomial {
    pub fn new(trials: u32, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("multinomial needs at least one category"));
        }
        if probs.iter().any(|&p| p < 0.0 || p.is_nan()) {
            return Err(invalid("success probabilities must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if math::abs(total - 1.0) > 1e-12 {
            return Err(invalid("success probabilities must sum to 1"));
        }
        Ok(Multinomial { trials, probs })
    }

    pub fn trials(&self) -> u32 {
        self.trials
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of categories with positive probability.
    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }

    /// Pmf at the count vector `t` (zero if `t` is off-support or does not
    /// sum to the trial count).
    pub fn pmf(&self, t: &[u32]) -> f64 {
        if t.len() != self.probs.len() {
            return 0.0;
        }
        if t.iter().sum::<u32>() != self.trials {
            return 0.0;
        }
        let mut log2 = math::log2_factorial(self.trials);
        for (&count, &p) in t.iter().zip(&self.probs) {
            if count == 0 {
                continue;
            }
            if p == 0.0 {
                return 0.0;
            }
            log2 -= math::log2_factorial(count);
            log2 += count as f64 * math::log2(p);
        }
        math::exp2(log2)
    }

    /// Materializes the full pmf over the `(q, trials)` lattice.
    pub fn dist(&self, cap: u64) -> Result<LatticeDist> {
        let lattice = Lattice::new(self.probs.len(), self.trials, cap)?;
        LatticeDist::from_entries(
            self.probs.len(),
            lattice.iter().map(|c| {
                let p = self.pmf(c.counts());
                (c.into_counts(), p)
            }),
        )
    }

    /// Pmf values in lattice rank order, as a dense vector.
    pub(crate) fn dense_over(&self, lattice: &Lattice) -> Vec<f64> {
        debug_assert_eq!(lattice.q(), self.probs.len());
        debug_assert_eq!(lattice.n(), self.trials);
        lattice.iter().map(|c| self.pmf(c.counts())).collect()
    }

    /// Base-2 KL divergence of the empirical type `t / n` from the success
    /// distribution; infinite when `t` puts mass outside the support.
    pub fn kl_of_type(&self, t: &[u32]) -> f64 {
        let n = self.trials as f64;
        let mut kl = 0.0;
        for (&count, &p) in t.iter().zip(&self.probs) {
            if count == 0 {
                continue;
            }
            if p == 0.0 {
                return f64::INFINITY;
            }
            let alpha = count as f64 / n;
            kl += alpha * math::log2(alpha / p);
        }
        kl
    }

    /// The KL-based pointwise upper bound
    /// `2^(-n KL(t/n || u)) * sqrt(n) / sqrt(prod_{t_i > 0} t_i)`.
    pub fn kl_bound(&self, t: &[u32]) -> f64 {
        let kl = self.kl_of_type(t);
        if kl.is_infinite() {
            return 0.0;
        }
        let mut log2 = -(self.trials as f64) * kl + 0.5 * math::log2(self.trials.max(1) as f64);
        for &count in t {
            if count > 0 {
                log2 -= 0.5 * math::log2(count as f64);
            }
        }
        math::exp2(log2)
    }

    /// Checks `pmf(t) <= kl_bound(t)`.
    pub fn check_kl_bound(&self, t: &[u32]) -> BoundCheck {
        let value = self.pmf(t);
        let bound = self.kl_bound(t);
        BoundCheck {
            value,
            bound,
            ok: value <= bound * (1.0 + 1e-9) || value <= bound + 1e-300,
        }
    }

    /// The peak-value bound `2 / (n^((k-1)/2) sqrt(prod_{supp u} u_i))`,
    /// where `k` is the support size of the success distribution.
    pub fn peak_bound(&self) -> f64 {
        let k = self.support_size();
        let prod: f64 = self.probs.iter().filter(|&&p| p > 0.0).product();
        2.0 / (math::powf(self.trials.max(1) as f64, (k as f64 - 1.0) / 2.0) * math::sqrt(prod))
    }

    /// Checks that the maximum pmf over the whole lattice respects
    /// [`Multinomial::peak_bound`].
    pub fn check_peak(&self, cap: u64) -> Result<BoundCheck> {
        let lattice = Lattice::new(self.probs.len(), self.trials, cap)?;
        let mut peak = 0.0f64;
        for c in lattice.iter() {
            peak = peak.max(self.pmf(c.counts()));
        }
        let bound = self.peak_bound();
        Ok(BoundCheck {
            value: peak,
            bound,
            ok: peak <= bound * (1.0 + 1e-9),
        })
    }

    /// Checks the tail bound: every `t` with some count at least
    /// `K sqrt(n log2 n)` away from `(n+1) u_i` has pmf at most
    /// `n^(-(K^2 - 1)/2)`.
    pub fn check_tail_bound(&self, k: f64, cap: u64) -> Result<TailCheck> {
        if k <= 1.0 || k.is_nan() {
            return Err(invalid("tail bound needs K > 1"));
        }
        let n = self.trials as f64;
        let threshold = k * math::sqrt(n * math::log2(n.max(2.0)));
        let bound = math::powf(n, -(k * k - 1.0) / 2.0);
        let lattice = Lattice::new(self.probs.len(), self.trials, cap)?;
        let mut flagged = 0usize;
        let mut worst = 0.0f64;
        let mut ok = true;
        for c in lattice.iter() {
            let far = c
                .counts()
                .iter()
                .zip(&self.probs)
                .any(|(&t, &u)| math::abs(t as f64 - (n + 1.0) * u) >= threshold);
            if !far {
                continue;
            }
            flagged += 1;
            let p = self.pmf(c.counts());
            worst = worst.max(p);
            if p > bound * (1.0 + 1e-9) {
                ok = false;
            }
        }
        Ok(TailCheck {
            flagged,
            worst_pmf: worst,
            bound,
            ok,
        })
    }
}

/// A computed value against its claimed bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub value: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Outcome of a tail-bound scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCheck {
    /// Number of lattice points beyond the deviation threshold.
    pub flagged: usize,
    pub worst_pmf: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Binomial pmf row `B(n, p)(t)` for `t = 0..=n`, by the multiplicative
/// recurrence from `B(0) = (1-p)^n`. Accurate to a few ulps per step, which
/// keeps successive-difference sums exact to well below 1e-12.
pub fn binomial_pmf_row(n: u32, p: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("binomial needs p in [0, 1]"));
    }
    let mut row = Vec::with_capacity(n as usize + 1);
    if p == 1.0 {
        row.resize(n as usize, 0.0);
        row.push(1.0);
        return Ok(row);
    }
    let ratio = p / (1.0 - p);
    let mut value = math::exp2(n as f64 * math::log2(1.0 - p));
    row.push(value);
    for t in 0..n {
        value *= ratio * (n - t) as f64 / (t + 1) as f64;
        row.push(value);
    }
    Ok(row)
}

/// Largest binomial pmf value.
pub fn binomial_peak(n: u32, p: f64) -> Result<f64> {
    Ok(binomial_pmf_row(n, p)?
        .into_iter()
        .fold(0.0f64, f64::max))
}

/// The sum of successive binomial differences `sum_t |B(t-1) - B(t)|`.
///
/// By strong unimodality this equals twice the peak value exactly, and it is
/// bounded by `4 / sqrt(n p (1-p))`.
pub fn binomial_successive_diff(n: u32, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("successive differences need p in (0, 1)"));
    }
    let row = binomial_pmf_row(n, p)?;
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &b in &row {
        acc += math::abs(prev - b);
        prev = b;
    }
    acc += prev;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use num_bigint::BigUint;

    // Independent oracle: binomial pmf from an exact binomial coefficient
    // and direct powers.
    fn binomial_oracle(n: u32, p: f64, t: u32) -> f64 {
        let mut coeff = BigUint::from(1u32);
        for i in 0..t {
            coeff = coeff * BigUint::from(n - i) / BigUint::from(i + 1);
        }
        let coeff_f64 = {
            let digits = coeff.to_u64_digits();
            digits
                .iter()
                .enumerate()
                .map(|(i, &d)| d as f64 * math::powf(2.0, 64.0 * i as f64))
                .sum::<f64>()
        };
        coeff_f64 * math::powf(p, t as f64) * math::powf(1.0 - p, (n - t) as f64)
    }

    #[test]
    fn pmf_point_mass_category() {
        let m = Multinomial::new(5, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(m.pmf(&[0, 5, 0]), 1.0);
        assert_eq!(m.pmf(&[1, 4, 0]), 0.0);
    }

    #[test]
    fn pmf_matches_binomial() {
        // Binary multinomial at (n - t, t) is the binomial pmf at t.
        let m = Multinomial::new(2, vec![0.5, 0.5]).unwrap();
        assert!((m.pmf(&[1, 1]) - 0.5).abs() < 1e-14);
        let m = Multinomial::new(12, vec![0.7, 0.3]).unwrap();
        for t in 0..=12u32 {
            let oracle = binomial_oracle(12, 0.3, t);
            assert!((m.pmf(&[12 - t, t]) - oracle).abs() < 1e-13);
        }
    }

    #[test]
    fn pmf_normalizes() {
        let m = Multinomial::new(6, vec![0.2, 0.5, 0.3]).unwrap();
        let total: f64 = m.dist(1 << 20).unwrap().iter().map(|(_, v)| v).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn full_dist_matches_sampled_frequencies() {
        use crate::compositions::Lattice;
        use crate::rng;
        let m = Multinomial::new(20, vec![0.5, 0.3, 0.2]).unwrap();
        let dist = m.dist(1 << 20).unwrap();
        let lattice = Lattice::new(3, 20, 1 << 20).unwrap();
        let mut rng = rng::seeded(99);
        let trials = 50_000u32;
        let mut hist = alloc::vec![0u32; lattice.len()];
        for _ in 0..trials {
            let mut counts = [0u32; 3];
            for _ in 0..20 {
                counts[rng::categorical(&mut rng, m.probs())] += 1;
            }
            hist[lattice.rank(&counts)] += 1;
        }
        for (c, &h) in lattice.iter().zip(&hist) {
            let p = dist.mass(c.counts());
            let sigma = math::sqrt((p * (1.0 - p) / trials as f64).max(1e-12));
            let freq = h as f64 / trials as f64;
            assert!(
                (freq - p).abs() <= 3.0 * sigma + 1e-9,
                "{:?}: freq {freq} pmf {p}",
                c.counts()
            );
        }
    }

    #[test]
    fn unit_multinomials_convolve_to_the_sum() {
        // Multinomial(1, u) * Multinomial(1, u) = Multinomial(2, u),
        // pointwise to machine precision.
        let one = Multinomial::new(1, vec![0.7, 0.3]).unwrap().dist(1 << 20).unwrap();
        let conv = one.convolve(&one).unwrap();
        let two = Multinomial::new(2, vec![0.7, 0.3]).unwrap();
        for (point, mass) in conv.iter() {
            assert!((mass - two.pmf(point)).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_bound_equality_on_point_support() {
        let m = Multinomial::new(7, vec![0.0, 1.0]).unwrap();
        let check = m.check_kl_bound(&[0, 7]);
        assert!(check.ok);
        assert!((check.value - 1.0).abs() < 1e-12);
        assert!((check.bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kl_bound_exhaustive_small() {
        let m = Multinomial::new(20, vec![0.7, 0.3]).unwrap();
        for t in 0..=20u32 {
            assert!(m.check_kl_bound(&[20 - t, t]).ok);
        }
        let m = Multinomial::new(15, vec![0.5, 0.3, 0.2]).unwrap();
        for c in crate::compositions::enumerate(3, 15, 1 << 20).unwrap() {
            assert!(m.check_kl_bound(c.counts()).ok);
        }
    }

    #[test]
    fn peak_bound_small_binomial() {
        // n = 4, p = 0.5: max pmf 0.375, bound 2 / (2 * 0.5) = 2.
        let m = Multinomial::new(4, vec![0.5, 0.5]).unwrap();
        let check = m.check_peak(1 << 20).unwrap();
        assert!((check.value - 0.375).abs() < 1e-14);
        assert!((check.bound - 2.0).abs() < 1e-12);
        assert!(check.ok);
    }

    #[test]
    fn peak_bound_degenerate_support() {
        let m = Multinomial::new(9, vec![1.0, 0.0]).unwrap();
        let check = m.check_peak(1 << 20).unwrap();
        assert_eq!(check.value, 1.0);
        assert!((check.bound - 2.0).abs() < 1e-12);
        assert!(check.ok);
    }

    #[test]
    fn tail_bound_cases() {
        let m = Multinomial::new(50, vec![0.5, 0.5]).unwrap();
        let check = m.check_tail_bound(2.0, 1 << 20).unwrap();
        assert!(check.ok);
        let m = Multinomial::new(30, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!(m.check_tail_bound(3.0, 1 << 20).unwrap().ok);
        assert!(m.check_tail_bound(1.0, 1 << 20).is_err());
    }

    #[test]
    fn tail_bound_flags_far_points_at_larger_n() {
        let m = Multinomial::new(256, vec![0.9, 0.1]).unwrap();
        let check = m.check_tail_bound(2.0, 1 << 20).unwrap();
        assert!(check.flagged > 0);
        assert!(check.ok);
    }

    #[test]
    fn successive_diff_hand_cases() {
        // n = 2, p = 0.5: row (0.25, 0.5, 0.25); sum of |diffs| = 1.0.
        let sd = binomial_successive_diff(2, 0.5).unwrap();
        assert!((sd - 1.0).abs() < 1e-15);
        assert!((sd - 2.0 * binomial_peak(2, 0.5).unwrap()).abs() < 1e-15);

        let sd = binomial_successive_diff(10, 0.3).unwrap();
        let peak = binomial_peak(10, 0.3).unwrap();
        assert!((sd - 2.0 * peak).abs() < 1e-12);
        // Oracle cross-check of the peak itself.
        let oracle_peak = (0..=10u32)
            .map(|t| binomial_oracle(10, 0.3, t))
            .fold(0.0f64, f64::max);
        assert!((peak - oracle_peak).abs() < 1e-13);
    }

    #[test]
    fn successive_diff_bound_grid() {
        let mut n = 4u32;
        while n <= 256 {
            for pi in 1..=9 {
                let p = pi as f64 / 10.0;
                let sd = binomial_successive_diff(n, p).unwrap();
                let bound = 4.0 / (math::sqrt(n as f64) * math::sqrt(p * (1.0 - p)));
                assert!(sd <= bound * (1.0 + 1e-12), "n={n} p={p}");
            }
            n *= 2;
        }
    }

    #[test]
    fn successive_diff_rejects_degenerate_p() {
        assert!(binomial_successive_diff(5, 0.0).is_err());
        assert!(binomial_successive_diff(5, 1.0).is_err());
    }

    #[test]
    fn directional_variation_agrees_with_successive_diff_route() {
        // Two routes to the same quantity: the lattice-side variation of the
        // materialized pmf and the direct binomial difference sum.
        for (n, p) in [(6u32, 0.5), (17, 0.3), (40, 0.85)] {
            let m = Multinomial::new(n, vec![1.0 - p, p]).unwrap();
            let via_lattice = m.dist(1 << 20).unwrap().directional_variation(0, 1).unwrap();
            let direct = binomial_successive_diff(n, p).unwrap();
            assert!((via_lattice - direct).abs() < 1e-10, "n={n} p={p}");
        }
    }

    #[test]
    fn directional_variation_of_multinomial_degenerate_is_two() {
        // If a or b is outside the support, the variation is exactly 2.
        for (n, probs) in [(4u32, vec![0.6, 0.4, 0.0]), (6, vec![1.0, 0.0, 0.0])] {
            let m = Multinomial::new(n, probs).unwrap();
            let d = m.dist(1 << 20).unwrap();
            let dv = d.directional_variation(0, 2).unwrap();
            assert!((dv - 2.0).abs() < 1e-10);
            let dv = d.directional_variation(1, 2).unwrap();
            assert!((dv - 2.0).abs() < 1e-10);
        }
        // Both inside the support: strictly below 2.
        let m = Multinomial::new(8, vec![0.5, 0.5]).unwrap();
        let dv = m.dist(1 << 20).unwrap().directional_variation(0, 1).unwrap();
        assert!(dv < 2.0);
    }
}

//! Numerical verification sweeps: the single-symbol shift inequality, the
//! distance-scaling inequality, the weight-transfer inequality, and the
//! resolvability collision mechanism.
//!
//! Every quantity here is computed exactly (kernels within the cap); the
//! inequalities with existential constants are operationalized as
//! non-explosion checks across a geometric grid in `n`, with the fitted
//! envelopes reported rather than asserted against invented constants.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{convolve_dense, output_dense, tv_dense, Dmc, QnccKernel};
use crate::compositions::{composition_of, Lattice};
use crate::error::{invalid, Result};
use crate::lattice_dist::{LatticeDist, MTypeDist, Point};
use crate::math;
use crate::multinomial::Multinomial;
use crate::quantizer;
use crate::rng;
use rand_core::RngCore;

/// `(log2 n)^((q-2)/2) / sqrt(n)`: the decay profile single-step output
/// changes are measured against.
pub fn shift_profile(q: usize, n: u32) -> f64 {
    math::powf(math::log2((n as f64).max(2.0)), (q as f64 - 2.0) / 2.0) / math::sqrt(n as f64)
}

/// Largest normalized single-shift ratio observed at one block length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioPoint {
    pub n: u32,
    pub max_tv: f64,
    /// `max_tv / shift_profile(q, n)`; bounded in `n` if the decay holds.
    pub max_ratio: f64,
    pub samples: usize,
}

/// Sweep of the single-symbol shift inequality across a grid in `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleShiftReport {
    pub points: Vec<RatioPoint>,
    /// Largest normalized ratio anywhere in the sweep.
    pub envelope: f64,
    /// Non-explosion: the ratio at the largest `n` is at most twice the
    /// ratio at the smallest.
    pub pass: bool,
}

/// For sampled strings `x` of length `n - 1` and every symbol pair, computes
/// the exact total variation between the output distributions of `(x, a)`
/// and `(x, b)`, normalized by the decay profile.
pub fn check_single_shift(
    dmc: &Dmc,
    n_grid: &[u32],
    samples: usize,
    rng_stream: &mut impl RngCore,
    cap: u64,
) -> Result<SingleShiftReport> {
    if n_grid.is_empty() || samples == 0 {
        return Err(invalid("need a nonempty grid and at least one sample"));
    }
    let q = dmc.q();
    let mut points = Vec::with_capacity(n_grid.len());
    let mut envelope = 0.0f64;
    for &n in n_grid {
        if n < 2 {
            return Err(invalid("single-shift check needs n >= 2"));
        }
        let mut max_tv = 0.0f64;
        for _ in 0..samples {
            let x: Vec<u8> = (0..n - 1)
                .map(|_| rng::uniform_index(rng_stream, q) as u8)
                .collect();
            let t = composition_of(q, &x);
            let base = output_dense(dmc, t.counts(), cap)?;
            // One extra symbol through the channel, per candidate symbol.
            let extended: Vec<Vec<f64>> = (0..q)
                .map(|a| {
                    let m = Multinomial::new(1, dmc.row(a).to_vec())?;
                    Ok(convolve_dense(&base, &m, cap)?.values)
                })
                .collect::<Result<_>>()?;
            for a in 0..q {
                for b in a + 1..q {
                    max_tv = max_tv.max(tv_dense(&extended[a], &extended[b]));
                }
            }
        }
        let ratio = max_tv / shift_profile(q, n);
        envelope = envelope.max(ratio);
        points.push(RatioPoint {
            n,
            max_tv,
            max_ratio: ratio,
            samples,
        });
    }
    let first = points.first().expect("nonempty grid");
    let last = points.last().expect("nonempty grid");
    let pass = last.max_ratio <= 2.0 * first.max_ratio + 1e-12;
    Ok(SingleShiftReport {
        points,
        envelope,
        pass,
    })
}

/// Distance-scaling check at one block length.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceScalingReport {
    pub n: u32,
    /// Largest output change over a single unit move, across all neighbor
    /// pairs of the lattice.
    pub step_tv_max: f64,
    /// Largest `TV(W_t, W_t') / d(t, t')` over the checked pairs.
    pub pair_ratio_max: f64,
    /// Number of arbitrary pairs checked.
    pub pairs_checked: usize,
    /// Per-distance consistency: the per-unit ratio never exceeds the
    /// single-step maximum.
    pub pass: bool,
}

/// Exhaustively bounds the per-unit output change between arbitrary
/// compositions by the worst single-step change. When the lattice has more
/// than `max_pairs` pairs, that many random pairs are checked instead.
pub fn check_distance_scaling(
    dmc: &Dmc,
    n: u32,
    max_pairs: usize,
    rng_stream: &mut impl RngCore,
    cap: u64,
) -> Result<DistanceScalingReport> {
    let kernel = crate::channel::qncc_kernel(dmc, n, cap)?;
    let lattice = kernel.lattice();
    let len = lattice.len();
    let points: Vec<Point> = lattice.iter().map(|c| c.into_counts()).collect();
    // All neighbor pairs: move one unit from a to b wherever possible.
    let mut step_tv_max = 0.0f64;
    for (r, t) in points.iter().enumerate() {
        for a in 0..lattice.q() {
            if t[a] == 0 {
                continue;
            }
            for b in 0..lattice.q() {
                if a == b {
                    continue;
                }
                let mut other = t.clone();
                other[a] -= 1;
                other[b] += 1;
                let r2 = lattice.rank(&other);
                if r2 > r {
                    step_tv_max = step_tv_max.max(tv_dense(kernel.row(r), kernel.row(r2)));
                }
            }
        }
    }
    let total_pairs = len * (len - 1) / 2;
    let mut pair_ratio_max = 0.0f64;
    let mut pairs_checked = 0usize;
    let mut check_pair = |i: usize, j: usize| {
        let ta = &points[i];
        let tb = &points[j];
        let d: u32 = ta
            .iter()
            .zip(tb)
            .map(|(&x, &y)| x.abs_diff(y))
            .sum::<u32>()
            / 2;
        if d == 0 {
            return;
        }
        let tv = tv_dense(kernel.row(i), kernel.row(j));
        pair_ratio_max = pair_ratio_max.max(tv / d as f64);
        pairs_checked += 1;
    };
    if total_pairs <= max_pairs {
        for i in 0..len {
            for j in i + 1..len {
                check_pair(i, j);
            }
        }
    } else {
        for _ in 0..max_pairs {
            let i = rng::uniform_index(rng_stream, len);
            let j = rng::uniform_index(rng_stream, len);
            if i != j {
                check_pair(i.min(j), i.max(j));
            }
        }
    }
    let pass = pair_ratio_max <= step_tv_max + 1e-12;
    Ok(DistanceScalingReport {
        n,
        step_tv_max,
        pair_ratio_max,
        pairs_checked,
        pass,
    })
}

/// Weight-transfer check: the output change of a batch of mass moves is
/// bounded by the worst single-step change times the mass-weighted total
/// distance moved.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTransferReport {
    pub measured_tv: f64,
    pub bound: f64,
    pub mass_distance: f64,
    pub pass: bool,
}

pub fn check_weight_transfer(
    dmc: &Dmc,
    n: u32,
    base: &LatticeDist,
    shifts: &[(Point, Point, f64)],
    step_tv_max: f64,
    cap: u64,
) -> Result<WeightTransferReport> {
    let shifted = base.with_shifts(shifts)?;
    let lattice = Lattice::new(dmc.q(), n, cap)?;
    let out_base = output_of(dmc, base, &lattice, cap)?;
    let out_shifted = output_of(dmc, &shifted, &lattice, cap)?;
    let measured_tv = tv_dense(&out_base, &out_shifted);
    let mut mass_distance = 0.0f64;
    for (from, to, p) in shifts {
        let d: u32 = from
            .iter()
            .zip(to)
            .map(|(&x, &y)| x.abs_diff(y))
            .sum::<u32>()
            / 2;
        mass_distance += p * d as f64;
    }
    let bound = step_tv_max * mass_distance;
    Ok(WeightTransferReport {
        measured_tv,
        bound,
        mass_distance,
        pass: measured_tv <= bound + 1e-12,
    })
}

/// Exact output distribution of a sparse input, without materializing the
/// whole kernel.
fn output_of(dmc: &Dmc, input: &LatticeDist, lattice: &Lattice, cap: u64) -> Result<Vec<f64>> {
    let mut out = vec![0.0f64; lattice.len()];
    for (point, mass) in input.iter() {
        if point.iter().sum::<u32>() != lattice.n() {
            return Err(invalid("input point is not a composition of n"));
        }
        let row = output_dense(dmc, point, cap)?;
        for (o, v) in out.iter_mut().zip(&row.values) {
            *o += mass * v;
        }
    }
    Ok(out)
}

/// A flat-Dirichlet random distribution over the lattice, restricted to at
/// most `support_cap` points.
pub fn random_lattice_dist(
    lattice: &Lattice,
    support_cap: usize,
    rng_stream: &mut impl RngCore,
) -> Result<LatticeDist> {
    if support_cap == 0 {
        return Err(invalid("support cap must be positive"));
    }
    let len = lattice.len();
    let take = support_cap.min(len);
    let ranks: Vec<usize> = if take == len {
        (0..len).collect()
    } else {
        let mut chosen = alloc::collections::BTreeSet::new();
        while chosen.len() < take {
            chosen.insert(rng::uniform_index(rng_stream, len));
        }
        chosen.into_iter().collect()
    };
    let masses = rng::flat_dirichlet(rng_stream, take);
    LatticeDist::from_entries(
        lattice.q(),
        ranks
            .into_iter()
            .zip(masses)
            .map(|(r, m)| (lattice.unrank(r).into_counts(), m)),
    )
}

/// Outcome of the resolvability collision demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvabilityReport {
    pub side: u32,
    pub denom: u64,
    pub num_dists: usize,
    /// Base-2 log of the counting bound on distinct M-type distributions.
    pub count_bound_log2: f64,
    /// Pairs of inputs whose quantizations collided exactly.
    pub collisions: Vec<(usize, usize)>,
    /// Largest measured quantization distortion across the inputs.
    pub max_distortion: f64,
    /// Largest output distance among colliding pairs.
    pub max_collision_tv: f64,
    /// Every colliding pair satisfied `TV <= 2 * max_distortion`.
    pub all_within_two_delta: bool,
    /// The implied bound `lambda1 + lambda2 >= 1 - 4 * max_distortion`.
    pub implied_error_lower_bound: f64,
}

/// Quantizes a batch of random input distributions at knob `c`, buckets them
/// by exact M-type identity, and verifies that every collision forces the
/// corresponding outputs within twice the worst quantization distortion.
pub fn resolvability_collision_demo(
    dmc: &Dmc,
    kernel: &QnccKernel,
    c: f64,
    num_dists: usize,
    support_cap: usize,
    rng_stream: &mut impl RngCore,
) -> Result<ResolvabilityReport> {
    if dmc.q() != kernel.q() {
        return Err(invalid("channel and kernel have different alphabets"));
    }
    if num_dists < 2 {
        return Err(invalid("need at least two distributions"));
    }
    let lattice = kernel.lattice();
    let mut buckets: BTreeMap<MTypeDist, Vec<usize>> = BTreeMap::new();
    let mut outputs = Vec::with_capacity(num_dists);
    let mut max_distortion = 0.0f64;
    let mut side = 0u32;
    let mut denom = 0u64;
    for idx in 0..num_dists {
        let input = random_lattice_dist(lattice, support_cap, rng_stream)?;
        let q = quantizer::quantize_qary(&input, lattice, c, Some(kernel), quantizer::DEFAULT_C4_PRIME)?;
        side = q.report.side;
        denom = q.report.denom;
        max_distortion = max_distortion.max(q.report.measured.expect("kernel supplied"));
        outputs.push(kernel.apply_dense(&input)?);
        buckets.entry(q.run.result).or_default().push(idx);
    }
    let mut collisions = Vec::new();
    let mut max_collision_tv = 0.0f64;
    for members in buckets.values() {
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                let (a, b) = (members[i], members[j]);
                max_collision_tv =
                    max_collision_tv.max(tv_dense(&outputs[a], &outputs[b]));
                collisions.push((a, b));
            }
        }
    }
    let all_within_two_delta = max_collision_tv <= 2.0 * max_distortion + 1e-12;
    Ok(ResolvabilityReport {
        side,
        denom,
        num_dists,
        count_bound_log2: quantizer::count_m_type_log2(lattice.q(), lattice.n(), denom),
        collisions,
        max_distortion,
        max_collision_tv,
        all_within_two_delta,
        implied_error_lower_bound: 1.0 - 4.0 * max_distortion,
    })
}

/// Ratio sweep for the directional variation of a multinomial family:
/// `D_ab * sqrt(n) / (log2 n)^((k-2)/2)` per grid point, where `k` is the
/// support size of `u`. Reported, not asserted: the constant is existential.
pub fn multinomial_variation_ratios(
    u: &[f64],
    a: usize,
    b: usize,
    n_grid: &[u32],
    cap: u64,
) -> Result<Vec<(u32, f64)>> {
    let k = u.iter().filter(|&&p| p > 0.0).count();
    let mut out = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let m = Multinomial::new(n, u.to_vec())?;
        let dv = m.dist(cap)?.directional_variation(a, b)?;
        let profile =
            math::powf(math::log2((n as f64).max(2.0)), (k as f64 - 2.0) / 2.0) / math::sqrt(n as f64);
        out.push((n, dv / profile));
    }
    Ok(out)
}

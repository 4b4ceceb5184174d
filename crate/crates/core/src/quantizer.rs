//! Deterministic two-stage quantization of lattice distributions to exact
//! M-type distributions.
//!
//! Stage one floors every mass to a multiple of `1/M` and parks each cell's
//! residual on that cell's representative, so mass only moves within a cell.
//! Stage two walks the representatives in a Gray-like cell order, flooring
//! each and carrying the remainder (always below `1/M`) to the next
//! representative, so the remaining moves are between adjacent cells. The
//! final output is stored as integer numerators over `M`; the float-to-
//! integer snap happens once, after asserting the accumulated drift is far
//! below one quantum.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use num_bigint::BigUint;

use crate::cells::{CellIndex, CellPartition};
use crate::compositions::{lattice_size, Lattice};
use crate::error::{invalid, Error, Result};
use crate::lattice_dist::{LatticeDist, MTypeDist, Point};
use crate::math;

/// Default reporting constant for the distortion bound. The analysis only
/// proves such a constant exists; this value is a config knob used in
/// reports, never asserted as ground truth.
pub const DEFAULT_C4_PRIME: f64 = 8.0;

// Absolute slack, in units of 1/M, granted to floating-point mass values
// before flooring or snapping to integers.
const UNIT_SNAP: f64 = 1e-9;
// Largest acceptable drift, in units of 1/M, between the float value of the
// last mass and the integer numerator forced by the sum constraint.
const UNIT_DRIFT: f64 = 1e-6;

#[inline]
fn floor_units(units: f64) -> f64 {
    math::floor(units + UNIT_SNAP).max(0.0)
}

/// Cell partition, denominator, and one representative per nonempty cell.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerParams {
    partition: CellPartition,
    denom: u64,
    representatives: BTreeMap<CellIndex, Point>,
}

impl QuantizerParams {
    /// Validates that every representative lies in its cell and that every
    /// nonempty cell has one.
    pub fn new(
        partition: CellPartition,
        denom: u64,
        representatives: BTreeMap<CellIndex, Point>,
    ) -> Result<Self> {
        if denom < 1 {
            return Err(invalid("denominator must be >= 1"));
        }
        for (cell, rep) in &representatives {
            let comp = crate::compositions::Composition::new(rep.clone())?;
            if comp.n() != partition.n() || comp.q() != partition.q() {
                return Err(invalid("representative is not a composition of n"));
            }
            if partition.cell_of(&comp) != *cell {
                return Err(invalid("representative lies outside its cell"));
            }
        }
        for cell in partition.nonempty_cell_order()? {
            if !representatives.contains_key(&cell) {
                return Err(invalid("missing representative for a nonempty cell"));
            }
        }
        Ok(QuantizerParams {
            partition,
            denom,
            representatives,
        })
    }

    /// Params with the lexicographically smallest member of each cell as its
    /// representative.
    pub fn with_default_representatives(
        partition: CellPartition,
        lattice: &Lattice,
        denom: u64,
    ) -> Result<Self> {
        let mut reps = BTreeMap::new();
        for (cell, ranks) in partition.group_lattice(lattice) {
            let rep = ranks
                .iter()
                .map(|&r| lattice.unrank(r).into_counts())
                .min()
                .expect("grouped cells are nonempty");
            reps.insert(cell, rep);
        }
        QuantizerParams::new(partition, denom, reps)
    }

    pub fn partition(&self) -> &CellPartition {
        &self.partition
    }

    pub fn denom(&self) -> u64 {
        self.denom
    }

    pub fn side(&self) -> u32 {
        self.partition.side()
    }

    pub fn representatives(&self) -> &BTreeMap<CellIndex, Point> {
        &self.representatives
    }

    pub fn representative(&self, cell: &CellIndex) -> Option<&Point> {
        self.representatives.get(cell)
    }
}

/// Left-to-right floor-and-carry quantization of a distribution over
/// `0..masses.len()`, the one-dimensional special case. Returns the integer
/// numerators over `m`.
pub fn quantize_binary(masses: &[f64], m: u64) -> Result<Vec<u64>> {
    if m < 1 {
        return Err(invalid("denominator must be >= 1"));
    }
    if masses.is_empty() {
        return Err(Error::NotADistribution("empty support".into()));
    }
    if masses.iter().any(|&x| x < 0.0 || x.is_nan()) {
        return Err(Error::NotADistribution("negative or NaN mass".into()));
    }
    let total: f64 = masses.iter().sum();
    if math::abs(total - 1.0) > 1e-12 {
        return Err(Error::NotADistribution(alloc::format!(
            "masses sum to {total}"
        )));
    }
    let mf = m as f64;
    let mut numerators = Vec::with_capacity(masses.len());
    let mut tilde = masses[0];
    for &next in &masses[1..] {
        let k = floor_units(tilde * mf);
        let carry = tilde - k / mf;
        debug_assert!(carry < 1.0 / mf + UNIT_SNAP);
        numerators.push(k as u64);
        tilde = next + carry;
    }
    let assigned: u64 = numerators.iter().sum();
    if assigned > m {
        return Err(Error::NotADistribution(
            "floored masses exceed the denominator".into(),
        ));
    }
    let last = m - assigned;
    if math::abs(tilde * mf - last as f64) > UNIT_DRIFT {
        return Err(Error::NotADistribution(alloc::format!(
            "final mass {tilde} does not close to {last}/{m}"
        )));
    }
    numerators.push(last);
    Ok(numerators)
}

/// Stage one: floor every mass to a multiple of `1/M`, accumulating each
/// cell's residual on that cell's representative. Per-cell total mass is
/// preserved and every non-representative mass becomes a multiple of `1/M`.
pub fn cellwise_partial_quantize(
    input: &LatticeDist,
    params: &QuantizerParams,
) -> Result<LatticeDist> {
    let partition = &params.partition;
    if input.dim() != partition.q() {
        return Err(Error::DimensionMismatch {
            expected: partition.q(),
            got: input.dim(),
        });
    }
    let mf = params.denom as f64;
    let mut floored: BTreeMap<Point, f64> = BTreeMap::new();
    let mut residual_by_cell: BTreeMap<CellIndex, f64> = BTreeMap::new();
    for (point, mass) in input.iter() {
        if point.iter().sum::<u32>() != partition.n() {
            return Err(invalid("support point is not a composition of n"));
        }
        let comp = crate::compositions::Composition::new(point.clone())?;
        let cell = partition.cell_of(&comp);
        if !params.representatives.contains_key(&cell) {
            return Err(invalid("no representative for an occupied cell"));
        }
        let k = floor_units(mass * mf);
        floored.insert(point.clone(), k / mf);
        *residual_by_cell.entry(cell).or_insert(0.0) += mass - k / mf;
    }
    for (cell, residual) in residual_by_cell {
        let rep = &params.representatives[&cell];
        *floored.entry(rep.clone()).or_insert(0.0) += residual;
    }
    LatticeDist::from_entries(partition.q(), floored)
}

/// Outcome of the stage-two walk: the exact M-type result plus the carry
/// that moved between each pair of consecutive representatives.
#[derive(Debug, Clone)]
pub struct SequentialQuantize {
    pub result: MTypeDist,
    /// `carries[i]` flowed from the representative of `order[i]` to the
    /// representative of `order[i + 1]`; each is strictly below `1/M`.
    pub carries: Vec<f64>,
}

/// Stage two: floor the representatives in the given cell order, carrying
/// each remainder (< 1/M) to the next representative. Everything else must
/// already be a multiple of `1/M`.
pub fn sequential_quantize(
    stage1: &LatticeDist,
    order: &[CellIndex],
    params: &QuantizerParams,
) -> Result<SequentialQuantize> {
    let partition = &params.partition;
    if order.is_empty() {
        return Err(invalid("cell order is empty"));
    }
    {
        let expected: alloc::collections::BTreeSet<_> =
            partition.nonempty_cell_order()?.into_iter().collect();
        let got: alloc::collections::BTreeSet<_> = order.iter().cloned().collect();
        if expected != got || order.len() != expected.len() {
            return Err(invalid("cell order does not cover the nonempty cells"));
        }
    }
    let m = params.denom;
    let mf = m as f64;
    let reps: Vec<&Point> = order
        .iter()
        .map(|cell| {
            params
                .representatives
                .get(cell)
                .ok_or_else(|| invalid("missing representative in order"))
        })
        .collect::<Result<_>>()?;

    let mut numerators: BTreeMap<Point, u64> = BTreeMap::new();
    let mut assigned = 0u64;
    // Non-representative masses must already sit on the 1/M grid.
    let rep_set: alloc::collections::BTreeSet<&Point> = reps.iter().copied().collect();
    for (point, mass) in stage1.iter() {
        if rep_set.contains(point) {
            continue;
        }
        let units = mass * mf;
        let k = math::round(units);
        if math::abs(units - k) > UNIT_DRIFT {
            return Err(invalid(
                "stage-one output has an off-grid non-representative mass",
            ));
        }
        if k > 0.0 {
            numerators.insert(point.clone(), k as u64);
            assigned += k as u64;
        }
    }
    // Floor-and-carry along the representatives.
    let mut carries = Vec::with_capacity(reps.len().saturating_sub(1));
    let mut tilde = stage1.mass(reps[0]);
    for i in 0..reps.len() - 1 {
        let k = floor_units(tilde * mf);
        let carry = tilde - k / mf;
        if carry >= 1.0 / mf + UNIT_SNAP {
            return Err(invalid("carry reached a full quantum"));
        }
        if k > 0.0 {
            let k = k as u64;
            *numerators.entry(reps[i].clone()).or_insert(0) += k;
            assigned += k;
        }
        carries.push(carry);
        tilde = stage1.mass(reps[i + 1]) + carry;
    }
    if assigned > m {
        return Err(Error::NotADistribution(
            "floored masses exceed the denominator".into(),
        ));
    }
    let last = m - assigned;
    if math::abs(tilde * mf - last as f64) > UNIT_DRIFT {
        return Err(Error::NotADistribution(alloc::format!(
            "final representative mass {tilde} does not close to {last}/{m}"
        )));
    }
    if last > 0 {
        *numerators
            .entry(reps[reps.len() - 1].clone())
            .or_insert(0) += last;
    }
    let result = MTypeDist::from_numerators(partition.q(), m, numerators)?;
    Ok(SequentialQuantize { result, carries })
}

/// A full two-stage quantization run.
#[derive(Debug, Clone)]
pub struct QuantizeRun {
    pub stage1: LatticeDist,
    pub result: MTypeDist,
    pub order: Vec<CellIndex>,
    pub carries: Vec<f64>,
}

/// Runs stage one and stage two under explicit parameters.
pub fn quantize_with_params(input: &LatticeDist, params: &QuantizerParams) -> Result<QuantizeRun> {
    let stage1 = cellwise_partial_quantize(input, params)?;
    let order = params.partition().nonempty_cell_order()?;
    let seq = sequential_quantize(&stage1, &order, params)?;
    Ok(QuantizeRun {
        stage1,
        result: seq.result,
        order,
        carries: seq.carries,
    })
}

/// Cell side and denominator implied by the resolvability knob `c`:
/// `a = sqrt(n) / (c^(1/(q-1)) (log2 n)^((q-2)/2))` rounded into `[1, n]`,
/// and `M = ceil(c (sqrt(n (log2 n)^(q-2)))^(q-1))`.
pub fn select_params(q: usize, n: u32, c: f64) -> Result<(u32, u64)> {
    if q < 2 {
        return Err(invalid("parameter selection needs q >= 2"));
    }
    if n < 4 {
        return Err(invalid("parameter selection needs n >= 4"));
    }
    if c <= 0.0 || c.is_nan() {
        return Err(invalid("resolvability knob must be positive"));
    }
    let nf = n as f64;
    let log_n = math::log2(nf);
    let qm1 = (q - 1) as f64;
    let a_real =
        math::sqrt(nf) / (math::powf(c, 1.0 / qm1) * math::powf(log_n, (q as f64 - 2.0) / 2.0));
    let side = math::round(a_real).max(1.0).min(nf) as u32;
    let m_real = c * math::powf(math::sqrt(nf * math::powf(log_n, q as f64 - 2.0)), qm1);
    if !(m_real.is_finite() && m_real < 9.0e18) {
        return Err(invalid("denominator overflows at this scale"));
    }
    let denom = math::ceil(m_real).max(1.0) as u64;
    Ok((side, denom))
}

/// Distortion accounting for a quantization run.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionReport {
    pub side: u32,
    pub denom: u64,
    /// The proven-shape bound with the configured constant plugged in.
    pub bound: f64,
    /// Exact output-side distortion, when a kernel was supplied.
    pub measured: Option<f64>,
    /// Exact output-side distortion of stage one alone.
    pub stage1_measured: Option<f64>,
}

/// The distortion bound shape
/// `C (a (log2 n)^((q-2)/2) / sqrt(n)) (1 + (2n/a)^(q-1) / M)`.
pub fn distortion_bound(q: usize, n: u32, side: u32, denom: u64, c4_prime: f64) -> f64 {
    let nf = n as f64;
    let log_term = math::powf(math::log2(nf.max(2.0)), (q as f64 - 2.0) / 2.0);
    let per_step = c4_prime * log_term / math::sqrt(nf);
    let cells = math::powf(2.0 * nf / side as f64, (q - 1) as f64);
    per_step * side as f64 + cells * per_step * side as f64 / denom as f64
}

/// A parameter-selected quantization run with distortion accounting.
#[derive(Debug, Clone)]
pub struct QaryQuantize {
    pub run: QuantizeRun,
    pub params: QuantizerParams,
    pub report: DistortionReport,
}

/// Quantizes an input distribution on the `(q, n)` lattice to an M-type
/// distribution using the knob `c`, measuring the exact output distortion
/// when a kernel is available.
pub fn quantize_qary(
    input: &LatticeDist,
    lattice: &Lattice,
    c: f64,
    kernel: Option<&crate::channel::QnccKernel>,
    c4_prime: f64,
) -> Result<QaryQuantize> {
    let q = lattice.q();
    let n = lattice.n();
    let (side, denom) = select_params(q, n, c)?;
    let partition = CellPartition::new(q, n, side)?;
    let params = QuantizerParams::with_default_representatives(partition, lattice, denom)?;
    let run = quantize_with_params(input, &params)?;
    let (measured, stage1_measured) = match kernel {
        Some(k) => {
            let out_in = k.apply_dense(input)?;
            let out_hat = k.apply_dense(&run.result.to_dist())?;
            let out_s1 = k.apply_dense(&run.stage1)?;
            (
                Some(crate::channel::tv_dense(&out_in, &out_hat)),
                Some(crate::channel::tv_dense(&out_in, &out_s1)),
            )
        }
        None => (None, None),
    };
    let report = DistortionReport {
        side,
        denom,
        bound: distortion_bound(q, n, side, denom, c4_prime),
        measured,
        stage1_measured,
    };
    Ok(QaryQuantize {
        run,
        params,
        report,
    })
}

/// Upper bound on the number of distinct M-type distributions over the
/// `(q, n)` lattice: `|lattice|^M`.
pub fn count_m_type(q: usize, n: u32, m: u64) -> Result<BigUint> {
    if q < 2 {
        return Err(invalid("counting needs q >= 2"));
    }
    let size = lattice_size(q, n);
    let m = u32::try_from(m).map_err(|_| invalid("denominator too large to count"))?;
    Ok(BigUint::from(size).pow(m))
}

/// Base-2 log of [`count_m_type`], usable at scales where the big integer
/// would be enormous.
pub fn count_m_type_log2(q: usize, n: u32, m: u64) -> f64 {
    m as f64 * math::log2(lattice_size(q, n) as f64)
}

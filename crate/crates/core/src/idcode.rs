//! Identification codes over the permutation channel and its composition
//! form: set systems with bounded pairwise intersections, grid-spaced
//! reliable transmission codes, two-stage stochastic identification codes,
//! deterministic identification codes, the reduction from string codes to
//! composition codes, and exact / Monte Carlo error evaluation with packing
//! and total-variation converse bounds.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{output_dense, sample_sigma, tv_dense, Dmc, QnccKernel};
use crate::compositions::{composition_of, Composition, Lattice};
use crate::error::{invalid, Error, Result};
use crate::lattice_dist::{LatticeDist, Point};
use crate::math;
use crate::rng;
use rand_core::RngCore;

/// Checks the admissibility condition for the set-system construction:
/// `lam * log2(1/eps - 1) > 2` and `eps < 1/6`.
pub fn set_system_condition(eps: f64, lam: f64) -> bool {
    eps > 0.0 && eps < 1.0 / 6.0 && lam > 0.0 && lam * math::log2(1.0 / eps - 1.0) > 2.0
}

/// Subsets of `[0, ground_size)`, all of size `floor(eps * N)`, with every
/// pairwise intersection at most `lam * eps * N`.
#[derive(Debug, Clone)]
pub struct SetSystem {
    ground_size: usize,
    eps: f64,
    lam: f64,
    subsets: Vec<BTreeSet<usize>>,
}

impl SetSystem {
    pub fn ground_size(&self) -> usize {
        self.ground_size
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn lam(&self) -> f64 {
        self.lam
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn subsets(&self) -> &[BTreeSet<usize>] {
        &self.subsets
    }

    pub fn subset_size(&self) -> usize {
        (self.eps * self.ground_size as f64) as usize
    }

    pub fn intersection_cap(&self) -> f64 {
        self.lam * self.eps * self.ground_size as f64
    }

    /// Largest pairwise intersection ratio `|U_i ∩ U_j| / |U_i|`.
    pub fn max_intersection_ratio(&self) -> f64 {
        let size = self.subset_size().max(1) as f64;
        let mut worst = 0.0f64;
        for i in 0..self.subsets.len() {
            for j in i + 1..self.subsets.len() {
                let inter = self.subsets[i].intersection(&self.subsets[j]).count();
                worst = worst.max(inter as f64 / size);
            }
        }
        worst
    }

    /// Re-verifies every definitional constraint by exhaustive scan.
    pub fn verify(&self) -> bool {
        let size = self.subset_size();
        if self.subsets.iter().any(|s| s.len() != size) {
            return false;
        }
        if self
            .subsets
            .iter()
            .any(|s| s.iter().any(|&x| x >= self.ground_size))
        {
            return false;
        }
        let cap = self.intersection_cap();
        for i in 0..self.subsets.len() {
            for j in i + 1..self.subsets.len() {
                let inter = self.subsets[i].intersection(&self.subsets[j]).count();
                if inter as f64 > cap + 1e-9 {
                    return false;
                }
            }
        }
        true
    }
}

/// Smallest admissible target: `ceil(2^(eps N - 1) / N)` subsets.
pub fn set_system_target(ground_size: usize, eps: f64) -> Result<usize> {
    let exponent = eps * ground_size as f64 - 1.0 - math::log2(ground_size as f64);
    if exponent > 40.0 {
        return Err(invalid(
            "set-system target is astronomically large at this ground size",
        ));
    }
    Ok(math::ceil(math::exp2(exponent)).max(1.0) as usize)
}

/// Randomized search for a set system meeting the size and intersection
/// constraints with at least the admissible target count (or `min_subsets`,
/// when that asks for more).
///
/// The construction is existential, so the artifact draws uniform subsets,
/// rejects any draw that violates a pairwise constraint against the kept
/// ones, and fails explicitly if `max_tries` draws cannot reach the target.
pub fn build_set_system(
    ground_size: usize,
    eps: f64,
    lam: f64,
    min_subsets: Option<usize>,
    rng_stream: &mut impl RngCore,
    max_tries: u64,
) -> Result<SetSystem> {
    if !set_system_condition(eps, lam) {
        return Err(invalid(
            "need lam * log2(1/eps - 1) > 2 and eps < 1/6",
        ));
    }
    let size = (eps * ground_size as f64) as usize;
    if size == 0 {
        return Err(invalid("eps * ground_size is below one element"));
    }
    let target = set_system_target(ground_size, eps)?.max(min_subsets.unwrap_or(0));
    let cap = lam * eps * ground_size as f64 + 1e-9;
    let mut subsets: Vec<BTreeSet<usize>> = Vec::with_capacity(target);
    let mut pool: Vec<usize> = (0..ground_size).collect();
    let mut tries = 0u64;
    while subsets.len() < target {
        if tries >= max_tries {
            return Err(Error::SearchFailed(format!(
                "kept {}/{target} subsets after {max_tries} draws",
                subsets.len()
            )));
        }
        tries += 1;
        // Partial Fisher-Yates: the first `size` entries become the draw.
        for i in 0..size {
            let j = i + rng::uniform_index(rng_stream, ground_size - i);
            pool.swap(i, j);
        }
        let candidate: BTreeSet<usize> = pool[..size].iter().copied().collect();
        let ok = subsets
            .iter()
            .all(|s| s.intersection(&candidate).count() as f64 <= cap);
        if ok {
            subsets.push(candidate);
        }
    }
    let system = SetSystem {
        ground_size,
        eps,
        lam,
        subsets,
    };
    debug_assert!(system.verify());
    Ok(system)
}

/// How a reliable code maps output compositions back to messages.
#[derive(Debug, Clone)]
enum ReliableDecoder {
    /// Exact maximum-likelihood table over the whole output lattice.
    MaxLikelihood(Vec<u32>),
    /// Nearest codeword in composition distance, computed per query.
    Nearest,
}

/// A transmission code on the composition channel: grid-spaced codewords
/// plus a total decoder.
#[derive(Debug, Clone)]
pub struct ReliableCode {
    lattice: Lattice,
    codewords: Vec<Composition>,
    decoder: ReliableDecoder,
    exact_max_error: Option<f64>,
}

impl ReliableCode {
    pub fn codewords(&self) -> &[Composition] {
        &self.codewords
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Exact maximum error probability, available when the decoder is the
    /// exact maximum-likelihood table.
    pub fn exact_max_error(&self) -> Option<f64> {
        self.exact_max_error
    }

    /// Message decoded from an output composition.
    pub fn decode(&self, w: &Composition) -> u32 {
        match &self.decoder {
            ReliableDecoder::MaxLikelihood(table) => table[self.lattice.rank(w.counts())],
            ReliableDecoder::Nearest => {
                let mut best = 0u32;
                let mut best_d = u32::MAX;
                for (i, c) in self.codewords.iter().enumerate() {
                    let d = c.distance(w).expect("same lattice");
                    if d < best_d {
                        best_d = d;
                        best = i as u32;
                    }
                }
                best
            }
        }
    }
}

/// All compositions whose first `q - 1` coordinates are multiples of
/// `spacing`, in lattice order.
pub fn grid_codewords(lattice: &Lattice, spacing: u32) -> Result<Vec<Composition>> {
    if spacing < 1 {
        return Err(invalid("grid spacing must be >= 1"));
    }
    let mut out = Vec::new();
    for c in lattice.iter() {
        if c.counts()[..lattice.q() - 1]
            .iter()
            .all(|&t| t % spacing == 0)
        {
            out.push(c);
        }
    }
    Ok(out)
}

/// Builds a grid-spaced reliable code. Within `cap` the decoder is the exact
/// maximum-likelihood rule under the channel and the exact maximum error
/// probability is reported; beyond it, decoding falls back to the nearest
/// codeword in composition distance.
pub fn build_reliable_code(dmc: &Dmc, n: u32, spacing: u32, cap: u64) -> Result<ReliableCode> {
    let lattice = Lattice::new(dmc.q(), n, crate::DEFAULT_LATTICE_CAP)?;
    let codewords = grid_codewords(&lattice, spacing)?;
    if codewords.is_empty() {
        return Err(invalid("no codewords fit the grid"));
    }
    let within_cap = lattice.len() as u64 <= cap;
    if !within_cap {
        return Ok(ReliableCode {
            lattice,
            codewords,
            decoder: ReliableDecoder::Nearest,
            exact_max_error: None,
        });
    }
    let rows: Vec<Vec<f64>> = codewords
        .iter()
        .map(|c| Ok(output_dense(dmc, c.counts(), cap)?.values))
        .collect::<Result<_>>()?;
    let mut table = vec![0u32; lattice.len()];
    for w in 0..lattice.len() {
        let mut best = 0usize;
        for i in 1..rows.len() {
            if rows[i][w] > rows[best][w] {
                best = i;
            }
        }
        table[w] = best as u32;
    }
    let mut worst = 0.0f64;
    for (i, row) in rows.iter().enumerate() {
        let correct: f64 = row
            .iter()
            .enumerate()
            .filter(|&(w, _)| table[w] == i as u32)
            .map(|(_, &p)| p)
            .sum();
        worst = worst.max(1.0 - correct);
    }
    Ok(ReliableCode {
        lattice,
        codewords,
        decoder: ReliableDecoder::MaxLikelihood(table),
        exact_max_error: Some(worst),
    })
}

/// Wilson score interval for a binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilsonInterval {
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
}

pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> WilsonInterval {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * math::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    WilsonInterval {
        estimate: p,
        low: (center - half).max(0.0),
        high: (center + half).min(1.0),
    }
}

/// Monte Carlo error estimates for a reliable code, one per message.
#[derive(Debug, Clone)]
pub struct McErrorReport {
    pub per_message: Vec<WilsonInterval>,
    pub max_estimate: f64,
}

/// Estimates each message's decoding error over the permutation channel by
/// sampling `trials` transmissions of a representative string.
pub fn mc_error_prob(
    code: &ReliableCode,
    dmc: &Dmc,
    trials: u64,
    rng_stream: &mut impl RngCore,
) -> Result<McErrorReport> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let q = dmc.q();
    let mut per_message = Vec::with_capacity(code.len());
    let mut max_estimate = 0.0f64;
    for (i, codeword) in code.codewords().iter().enumerate() {
        let x = codeword.canonical_string();
        let mut errors = 0u64;
        for _ in 0..trials {
            let y = sample_sigma(dmc, &x, rng_stream);
            let w = composition_of(q, &y);
            if code.decode(&w) != i as u32 {
                errors += 1;
            }
        }
        let interval = wilson_interval(errors, trials, 1.96);
        max_estimate = max_estimate.max(interval.estimate);
        per_message.push(interval);
    }
    Ok(McErrorReport {
        per_message,
        max_estimate,
    })
}

/// Acceptance rule of one identification decoder.
#[derive(Debug, Clone, PartialEq)]
pub enum Decoder {
    /// Accept exactly the compositions in the set.
    AcceptSet(BTreeSet<Point>),
    /// Accept composition `w` with the stored probability (zero if absent).
    AcceptProb(BTreeMap<Point, f64>),
}

impl Decoder {
    pub fn accept_prob(&self, point: &[u32]) -> f64 {
        match self {
            Decoder::AcceptSet(set) => {
                if set.contains(point) {
                    1.0
                } else {
                    0.0
                }
            }
            Decoder::AcceptProb(map) => map.get(point).copied().unwrap_or(0.0),
        }
    }
}

/// An identification code on the composition channel: one encoding
/// distribution and one acceptance rule per message.
#[derive(Debug, Clone)]
pub struct IdCode {
    q: usize,
    n: u32,
    encoders: Vec<LatticeDist>,
    decoders: Vec<Decoder>,
}

impl IdCode {
    pub fn new(
        q: usize,
        n: u32,
        encoders: Vec<LatticeDist>,
        decoders: Vec<Decoder>,
    ) -> Result<Self> {
        if encoders.len() != decoders.len() || encoders.is_empty() {
            return Err(invalid("need one decoder per encoder"));
        }
        for e in &encoders {
            if e.dim() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    got: e.dim(),
                });
            }
            if e.iter().any(|(p, _)| p.iter().sum::<u32>() != n) {
                return Err(invalid("encoder support point is not a composition of n"));
            }
        }
        for d in &decoders {
            if let Decoder::AcceptProb(map) = d {
                if map.values().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
                    return Err(invalid("acceptance probabilities must lie in [0, 1]"));
                }
            }
        }
        Ok(IdCode {
            q,
            n,
            encoders,
            decoders,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.encoders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoders.is_empty()
    }

    pub fn encoders(&self) -> &[LatticeDist] {
        &self.encoders
    }

    pub fn decoders(&self) -> &[Decoder] {
        &self.decoders
    }
}

/// Two-stage stochastic identification code: message `i` encodes as a
/// uniformly random codeword indexed by its subset, and decoder `i` accepts
/// an output iff the reliable decoder lands inside that subset.
pub fn stochastic_id_code(code: &ReliableCode, system: &SetSystem) -> Result<IdCode> {
    if system.ground_size() != code.len() {
        return Err(invalid(
            "set-system ground size must equal the message count",
        ));
    }
    let q = code.lattice().q();
    let n = code.lattice().n();
    let mut encoders = Vec::with_capacity(system.len());
    let mut decoders = Vec::with_capacity(system.len());
    for subset in system.subsets() {
        if subset.is_empty() {
            return Err(invalid("encoder subset is empty"));
        }
        let mass = 1.0 / subset.len() as f64;
        encoders.push(LatticeDist::from_entries(
            q,
            subset
                .iter()
                .map(|&m| (code.codewords()[m].counts().to_vec(), mass)),
        )?);
        let mut accept = BTreeSet::new();
        for w in code.lattice().iter() {
            if subset.contains(&(code.decode(&w) as usize)) {
                accept.insert(w.into_counts());
            }
        }
        decoders.push(Decoder::AcceptSet(accept));
    }
    IdCode::new(q, n, encoders, decoders)
}

/// Identification code with deterministic encoders: message `i` is the
/// `i`-th codeword, accepted exactly on its maximum-likelihood region.
pub fn deterministic_id_code(code: &ReliableCode) -> Result<IdCode> {
    let q = code.lattice().q();
    let n = code.lattice().n();
    let mut encoders = Vec::with_capacity(code.len());
    let mut decoders = Vec::with_capacity(code.len());
    let mut regions: Vec<BTreeSet<Point>> = vec![BTreeSet::new(); code.len()];
    for w in code.lattice().iter() {
        let m = code.decode(&w) as usize;
        regions[m].insert(w.into_counts());
    }
    for (i, codeword) in code.codewords().iter().enumerate() {
        encoders.push(LatticeDist::delta(codeword.counts().to_vec())?);
        decoders.push(Decoder::AcceptSet(core::mem::take(&mut regions[i])));
    }
    IdCode::new(q, n, encoders, decoders)
}

/// The achievability-side parameters implied by a rank-`r` channel, the
/// reliable-code constant `c`, the rate sequence value `eps_n`, and the
/// message count: `eps' = (r-1)! c^((r-1)/2) eps_n + 1/N + log2(N)/N` and
/// `lam2' = 4 / log2(1/eps')`.
pub fn achievability_params(rank_r: usize, c: f64, eps_n: f64, n_messages: usize) -> (f64, f64) {
    let mut factorial = 1.0;
    for i in 2..rank_r {
        factorial *= i as f64;
    }
    let n = n_messages as f64;
    let eps_prime =
        factorial * math::powf(c, (rank_r as f64 - 1.0) / 2.0) * eps_n + 1.0 / n + math::log2(n) / n;
    let lam2_prime = 4.0 / math::log2(1.0 / eps_prime);
    (eps_prime, lam2_prime)
}

/// Full error accounting for an identification code: `matrix[i][j]` with
/// `i != j` is the probability decoder `j` accepts when message `i` is sent,
/// and `matrix[i][i]` is the missed-detection probability of message `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix {
    pub matrix: Vec<Vec<f64>>,
    /// Worst missed detection, `max_i matrix[i][i]`.
    pub lambda1: f64,
    /// Worst false acceptance, `max_{i != j} matrix[i][j]`.
    pub lambda2: f64,
}

impl ErrorMatrix {
    fn from_matrix(matrix: Vec<Vec<f64>>) -> Self {
        let mut lambda1 = 0.0f64;
        let mut lambda2 = 0.0f64;
        for (i, row) in matrix.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i == j {
                    lambda1 = lambda1.max(v);
                } else {
                    lambda2 = lambda2.max(v);
                }
            }
        }
        ErrorMatrix {
            matrix,
            lambda1,
            lambda2,
        }
    }
}

/// Exact identification error probabilities under a kernel.
pub fn eval_id_errors(code: &IdCode, kernel: &QnccKernel) -> Result<ErrorMatrix> {
    if code.q() != kernel.q() || code.n() != kernel.n() {
        return Err(invalid("code and kernel live on different lattices"));
    }
    let lattice = kernel.lattice();
    let l = code.len();
    // Acceptance of each decoder at each output rank.
    let mut accept = vec![vec![0.0f64; lattice.len()]; l];
    for (j, decoder) in code.decoders().iter().enumerate() {
        for (wr, w) in lattice.iter().enumerate() {
            accept[j][wr] = decoder.accept_prob(w.counts());
        }
    }
    let mut matrix = vec![vec![0.0f64; l]; l];
    for (i, (encoder, row)) in code.encoders().iter().zip(&mut matrix).enumerate() {
        let out = kernel.apply_dense(encoder)?;
        for (j, acceptance) in accept.iter().enumerate() {
            let acc: f64 = out.iter().zip(acceptance).map(|(&o, &a)| o * a).sum();
            row[j] = if i == j { 1.0 - acc } else { acc };
        }
    }
    Ok(ErrorMatrix::from_matrix(matrix))
}

/// Monte Carlo estimate of the identification error matrix by sampling the
/// permutation channel directly.
pub fn mc_eval_id_errors(
    code: &IdCode,
    dmc: &Dmc,
    trials: u64,
    rng_stream: &mut impl RngCore,
) -> Result<ErrorMatrix> {
    if code.q() != dmc.q() {
        return Err(invalid("code and channel have different alphabets"));
    }
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let l = code.len();
    let mut matrix = vec![vec![0.0f64; l]; l];
    for (i, (encoder, row)) in code.encoders().iter().zip(&mut matrix).enumerate() {
        let support: Vec<(&Point, f64)> = encoder.iter().collect();
        let weights: Vec<f64> = support.iter().map(|&(_, w)| w).collect();
        let mut accept_counts = vec![0u64; l];
        for _ in 0..trials {
            let pick = rng::categorical(rng_stream, &weights);
            let x = Composition::new(support[pick].0.clone())
                .expect("validated on construction")
                .canonical_string();
            let y = sample_sigma(dmc, &x, rng_stream);
            let w = composition_of(code.q(), &y);
            for (j, decoder) in code.decoders().iter().enumerate() {
                let p = decoder.accept_prob(w.counts());
                let hit = p >= 1.0 || (p > 0.0 && rng::uniform_f64(rng_stream) < p);
                if hit {
                    accept_counts[j] += 1;
                }
            }
        }
        for (j, &count) in accept_counts.iter().enumerate() {
            let rate = count as f64 / trials as f64;
            row[j] = if i == j { 1.0 - rate } else { rate };
        }
    }
    Ok(ErrorMatrix::from_matrix(matrix))
}

/// The resolvability lower bound on `lambda1 + lambda2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverseBound {
    /// Smallest total variation between two distinct messages' outputs.
    pub min_tv: f64,
    /// `1 - 2 * min_tv`, possibly negative.
    pub raw: f64,
    /// The usable bound, `max(0, raw)`.
    pub clamped: f64,
}

/// Lower-bounds `lambda1 + lambda2` by `1 - 2 min_{j != k} TV(out_j, out_k)`.
pub fn converse_tv_bound(code: &IdCode, kernel: &QnccKernel) -> Result<ConverseBound> {
    if code.len() < 2 {
        return Err(invalid("converse bound needs at least two messages"));
    }
    let outs: Vec<Vec<f64>> = code
        .encoders()
        .iter()
        .map(|e| kernel.apply_dense(e))
        .collect::<Result<_>>()?;
    let mut min_tv = f64::INFINITY;
    for j in 0..outs.len() {
        for k in j + 1..outs.len() {
            min_tv = min_tv.min(tv_dense(&outs[j], &outs[k]));
        }
    }
    let raw = 1.0 - 2.0 * min_tv;
    Ok(ConverseBound {
        min_tv,
        raw,
        clamped: raw.max(0.0),
    })
}

/// Minimum pairwise distance of a codebook against the packing bound
/// `2 (q-1) n / |A|^(1/(q-1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PackingCheck {
    pub min_distance: u32,
    pub bound: f64,
    pub ok: bool,
}

pub fn packing_min_distance(codewords: &[Composition]) -> Result<PackingCheck> {
    if codewords.is_empty() {
        return Err(invalid("empty codebook"));
    }
    let q = codewords[0].q();
    let n = codewords[0].n();
    if n < 3 {
        return Err(invalid("packing bound needs n >= 3"));
    }
    let needed = 3usize.pow(q as u32 - 1);
    if codewords.len() < needed {
        return Err(invalid(format!(
            "packing bound needs at least 3^(q-1) = {needed} codewords"
        )));
    }
    let mut min_distance = u32::MAX;
    for i in 0..codewords.len() {
        for j in i + 1..codewords.len() {
            let d = codewords[i].distance(&codewords[j])?;
            if d == 0 {
                return Err(invalid("codewords must be distinct"));
            }
            min_distance = min_distance.min(d);
        }
    }
    let bound = 2.0 * (q as f64 - 1.0) * n as f64
        / math::powf(codewords.len() as f64, 1.0 / (q as f64 - 1.0));
    Ok(PackingCheck {
        min_distance,
        bound,
        ok: (min_distance as f64) <= bound + 1e-9,
    })
}

/// An identification code on the string alphabet `[0, q)^n`, with sparse
/// encoding distributions and deterministic acceptance sets of strings.
#[derive(Debug, Clone)]
pub struct SigmaCode {
    q: usize,
    n: usize,
    encoders: Vec<Vec<(Vec<u8>, f64)>>,
    decoders: Vec<BTreeSet<Vec<u8>>>,
}

impl SigmaCode {
    pub fn new(
        q: usize,
        n: usize,
        encoders: Vec<Vec<(Vec<u8>, f64)>>,
        decoders: Vec<BTreeSet<Vec<u8>>>,
    ) -> Result<Self> {
        if encoders.len() != decoders.len() || encoders.is_empty() {
            return Err(invalid("need one decoder per encoder"));
        }
        for enc in &encoders {
            let total: f64 = enc.iter().map(|(_, p)| *p).sum();
            if math::abs(total - 1.0) > 1e-12 {
                return Err(Error::NotADistribution(format!(
                    "encoder masses sum to {total}"
                )));
            }
            for (x, p) in enc {
                if x.len() != n || x.iter().any(|&s| s as usize >= q) {
                    return Err(invalid("encoder support contains an invalid string"));
                }
                if *p < 0.0 || p.is_nan() {
                    return Err(Error::NotADistribution("negative mass".into()));
                }
            }
        }
        for dec in &decoders {
            if dec.iter().any(|x| x.len() != n || x.iter().any(|&s| s as usize >= q)) {
                return Err(invalid("decoder contains an invalid string"));
            }
        }
        Ok(SigmaCode {
            q,
            n,
            encoders,
            decoders,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.encoders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoders.is_empty()
    }
}

fn all_strings(q: usize, n: usize, cap: u64) -> Result<Vec<Vec<u8>>> {
    let count = (q as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(Error::CapExceeded {
            size: count,
            cap,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut z = vec![0u8; n];
    loop {
        out.push(z.clone());
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(out);
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

/// Folds a string code down to the composition channel: encoders push their
/// mass onto compositions, and decoder `i` accepts composition `k` with
/// probability `|D_i ∩ W_k| / |W_k|`. Error probabilities are preserved
/// exactly, and point-mass encoders stay point masses.
pub fn reduce_to_composition_code(code: &SigmaCode, cap: u64) -> Result<IdCode> {
    let q = code.q;
    let n = code.n as u32;
    let lattice = Lattice::new(q, n, cap)?;
    // |W_k| per rank, by exhaustive string enumeration (kept exact).
    let mut class_size = vec![0u64; lattice.len()];
    for z in all_strings(q, code.n, cap)? {
        class_size[lattice.rank(composition_of(q, &z).counts())] += 1;
    }
    let mut encoders = Vec::with_capacity(code.len());
    let mut decoders = Vec::with_capacity(code.len());
    for (enc, dec) in code.encoders.iter().zip(&code.decoders) {
        let mut mass: BTreeMap<Point, f64> = BTreeMap::new();
        for (x, p) in enc {
            *mass
                .entry(composition_of(q, x).into_counts())
                .or_insert(0.0) += *p;
        }
        encoders.push(LatticeDist::from_entries(q, mass)?);
        let mut hits: BTreeMap<Point, u64> = BTreeMap::new();
        for x in dec {
            *hits
                .entry(composition_of(q, x).into_counts())
                .or_insert(0) += 1;
        }
        let probs: BTreeMap<Point, f64> = hits
            .into_iter()
            .map(|(point, count)| {
                let total = class_size[lattice.rank(&point)];
                (point, count as f64 / total as f64)
            })
            .collect();
        decoders.push(Decoder::AcceptProb(probs));
    }
    IdCode::new(q, n, encoders, decoders)
}

/// Exact identification errors of a string code over the permutation
/// channel, by exhaustive enumeration of channel outputs.
pub fn eval_sigma_errors(code: &SigmaCode, dmc: &Dmc, cap: u64) -> Result<ErrorMatrix> {
    if dmc.q() != code.q {
        return Err(invalid("code and channel have different alphabets"));
    }
    let q = code.q;
    let n = code.n as u32;
    let lattice = Lattice::new(q, n, cap)?;
    let strings = all_strings(q, code.n, cap)?;
    let mut class_size = vec![0u64; lattice.len()];
    for z in &strings {
        class_size[lattice.rank(composition_of(q, z).counts())] += 1;
    }
    // Per decoder: fraction of each type class it accepts.
    let l = code.len();
    let mut accept_frac = vec![vec![0.0f64; lattice.len()]; l];
    for (j, dec) in code.decoders.iter().enumerate() {
        for x in dec {
            accept_frac[j][lattice.rank(composition_of(q, x).counts())] += 1.0;
        }
        for (frac, &size) in accept_frac[j].iter_mut().zip(&class_size) {
            *frac /= size as f64;
        }
    }
    let mut matrix = vec![vec![0.0f64; l]; l];
    for (i, enc) in code.encoders.iter().enumerate() {
        // Output composition distribution of this encoder, exhaustively.
        let mut out = vec![0.0f64; lattice.len()];
        for (x, px) in enc {
            if *px == 0.0 {
                continue;
            }
            for z in &strings {
                let mut prob = *px;
                for (zi, xi) in z.iter().zip(x) {
                    prob *= dmc.row(*xi as usize)[*zi as usize];
                    if prob == 0.0 {
                        break;
                    }
                }
                if prob > 0.0 {
                    out[lattice.rank(composition_of(q, z).counts())] += prob;
                }
            }
        }
        for j in 0..l {
            let acc: f64 = out.iter().zip(&accept_frac[j]).map(|(&o, &a)| o * a).sum();
            matrix[i][j] = if i == j { 1.0 - acc } else { acc };
        }
    }
    Ok(ErrorMatrix::from_matrix(matrix))
}

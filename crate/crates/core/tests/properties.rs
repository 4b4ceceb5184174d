//! Property tests for the structural invariants: lattice addressing is a
//! bijection, the composition distance is a metric, convolution preserves
//! mass, atomic decompositions reconstruct their target, and quantization
//! always lands exactly on the M-type grid.

use proptest::prelude::*;

use permch_core::cells::{are_adjacent, bounded_sum_indices, gray_order, CellPartition};
use permch_core::compositions::{Composition, Lattice};
use permch_core::lattice_dist::{atomic_decomposition, LatticeDist, SignedLatticeSeq};
use permch_core::quantizer::{quantize_with_params, QuantizerParams};

mod strategies {
    use super::*;

    pub fn lattice_params() -> impl Strategy<Value = (usize, u32)> {
        (2usize..=4, 0u32..=12)
    }

    pub fn composition(q: usize, n: u32) -> impl Strategy<Value = Composition> {
        prop::collection::vec(0u32..=n, q).prop_map(move |raw| {
            // Rescale an arbitrary vector onto the simplex by remainders.
            let mut counts = raw;
            let len = counts.len();
            let mut total: u32 = counts.iter().sum();
            let mut i = 0;
            while total > n {
                if counts[i % len] > 0 {
                    counts[i % len] -= 1;
                    total -= 1;
                }
                i += 1;
            }
            let deficit = n - total;
            counts[0] += deficit;
            Composition::new(counts).unwrap()
        })
    }

    pub fn masses(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-6..1.0f64, len).prop_map(|raw| {
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect()
        })
    }
}

proptest! {
    #[test]
    fn rank_unrank_bijection((q, n) in strategies::lattice_params()) {
        let lattice = Lattice::new(q, n, 1 << 22).unwrap();
        for (i, c) in lattice.iter().enumerate() {
            prop_assert_eq!(lattice.rank(c.counts()), i);
            let back = lattice.unrank(i);
            prop_assert_eq!(back.counts(), c.counts());
        }
    }

    #[test]
    fn distance_is_a_metric(
        (q, n) in strategies::lattice_params(),
        seed in 0u64..1000,
    ) {
        let lattice = Lattice::new(q, n, 1 << 22).unwrap();
        let len = lattice.len();
        let pick = |k: u64| lattice.unrank((seed.wrapping_mul(k) % len as u64) as usize);
        let (a, b, c) = (pick(7), pick(13), pick(29));
        prop_assert_eq!(a.distance(&b).unwrap(), b.distance(&a).unwrap());
        prop_assert_eq!(a.distance(&a).unwrap(), 0);
        if a.counts() != b.counts() {
            prop_assert!(a.distance(&b).unwrap() > 0);
        }
        prop_assert!(
            a.distance(&c).unwrap() <= a.distance(&b).unwrap() + b.distance(&c).unwrap()
        );
    }

    #[test]
    fn tv_is_symmetric_and_triangular(
        pm in strategies::masses(6),
        qm in strategies::masses(6),
        rm in strategies::masses(6),
    ) {
        let lattice = Lattice::new(3, 4, 1 << 20).unwrap();
        let dist = |m: &[f64]| {
            LatticeDist::from_entries(
                3,
                m.iter()
                    .enumerate()
                    .map(|(i, &v)| (lattice.unrank(i * 2).into_counts(), v)),
            )
            .unwrap()
        };
        let (p, q, r) = (dist(&pm), dist(&qm), dist(&rm));
        let pq = p.tv_distance(&q).unwrap();
        prop_assert!((pq - q.tv_distance(&p).unwrap()).abs() < 1e-14);
        prop_assert!(pq <= p.tv_distance(&r).unwrap() + r.tv_distance(&q).unwrap() + 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
    }

    #[test]
    fn convolution_preserves_mass(
        pm in strategies::masses(5),
        qm in strategies::masses(4),
    ) {
        let la = Lattice::new(3, 3, 1 << 20).unwrap();
        let lb = Lattice::new(3, 2, 1 << 20).unwrap();
        let p = LatticeDist::from_entries(
            3,
            pm.iter().enumerate().map(|(i, &v)| (la.unrank(i).into_counts(), v)),
        )
        .unwrap();
        let q = LatticeDist::from_entries(
            3,
            qm.iter().enumerate().map(|(i, &v)| (lb.unrank(i).into_counts(), v)),
        )
        .unwrap();
        let conv = p.convolve(&q).unwrap();
        prop_assert!((conv.total_mass() - 1.0).abs() < 1e-12);
        // Every output point sums an input pair's coordinates to n = 5.
        for (point, _) in conv.iter() {
            prop_assert_eq!(point.iter().sum::<u32>(), 5);
        }
    }

    #[test]
    fn signed_convolution_contracts_l1(
        qm in strategies::masses(5),
        from in 0usize..4,
        to in 0usize..4,
    ) {
        let lattice = Lattice::new(2, 4, 1 << 20).unwrap();
        let q = LatticeDist::from_entries(
            2,
            qm.iter().enumerate().map(|(i, &v)| (lattice.unrank(i).into_counts(), v)),
        )
        .unwrap();
        let x = SignedLatticeSeq::step(
            lattice.unrank(from).into_counts(),
            lattice.unrank(to).into_counts(),
        )
        .unwrap();
        let y = x.convolve(&q).unwrap();
        prop_assert!(y.l1_norm() <= x.l1_norm() + 1e-12);
    }

    #[test]
    fn atomic_decomposition_reconstructs(
        um in strategies::masses(5),
        vm in strategies::masses(5),
    ) {
        let shifts = atomic_decomposition(&um, &vm).unwrap();
        // Shift count bound: at most |S+| + |S-| - 1 moves.
        let plus = um.iter().zip(&vm).filter(|(u, v)| u > v).count();
        let minus = um.iter().zip(&vm).filter(|(u, v)| u < v).count();
        if plus + minus > 0 {
            // At most |S+| + |S-| - 1 moves.
            prop_assert!(shifts.len() < plus + minus);
        } else {
            prop_assert!(shifts.is_empty());
        }
        // Masses sum to the total variation distance.
        let tv: f64 = um
            .iter()
            .zip(&vm)
            .map(|(u, v)| (u - v).abs())
            .sum::<f64>()
            / 2.0;
        let total: f64 = shifts.iter().map(|s| s.mass).sum();
        prop_assert!((total - tv).abs() < 1e-9);
        // Applying the shifts to u reconstructs v coordinate by coordinate.
        let mut rebuilt = um.clone();
        for s in &shifts {
            rebuilt[s.from] -= s.mass;
            rebuilt[s.to] += s.mass;
        }
        for (got, want) in rebuilt.iter().zip(&vm) {
            prop_assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn atomic_decomposition_on_types_uses_type_quanta(
        a in strategies::composition(4, 12),
        b in strategies::composition(4, 12),
    ) {
        let n = 12f64;
        let u: Vec<f64> = a.counts().iter().map(|&c| c as f64 / n).collect();
        let v: Vec<f64> = b.counts().iter().map(|&c| c as f64 / n).collect();
        for s in atomic_decomposition(&u, &v).unwrap() {
            let scaled = s.mass * n;
            prop_assert!((scaled - scaled.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn gray_order_is_a_gray_bijection(
        m in 1usize..=5,
        nu in 1usize..=8,
        s_offset in 0usize..=40,
    ) {
        let s = (m + s_offset).min(m * nu);
        let order = gray_order(m, s, nu).unwrap();
        let expected: std::collections::BTreeSet<_> =
            bounded_sum_indices(m, s, nu).into_iter().collect();
        let seen: std::collections::BTreeSet<_> = order.iter().cloned().collect();
        prop_assert_eq!(seen.len(), order.len());
        prop_assert_eq!(seen, expected);
        for pair in order.windows(2) {
            prop_assert!(are_adjacent(&pair[0], &pair[1]));
        }
    }

    #[test]
    fn quantization_is_exactly_m_type(
        masses in strategies::masses(15),
        m in 1u64..=64,
        side in 1u32..=5,
    ) {
        let lattice = Lattice::new(3, 4, 1 << 20).unwrap();
        let dist = LatticeDist::from_entries(
            3,
            masses
                .iter()
                .enumerate()
                .map(|(i, &v)| (lattice.unrank(i).into_counts(), v)),
        )
        .unwrap();
        let params = QuantizerParams::with_default_representatives(
            CellPartition::new(3, 4, side).unwrap(),
            &lattice,
            m,
        )
        .unwrap();
        let run = quantize_with_params(&dist, &params).unwrap();
        let total: u64 = run.result.numerators().map(|(_, k)| k).sum();
        prop_assert_eq!(total, m);
        // Stage one preserved each cell's mass.
        let partition = params.partition();
        let mut in_cell = std::collections::BTreeMap::new();
        let mut out_cell = std::collections::BTreeMap::new();
        for (p, v) in dist.iter() {
            let c = partition.cell_of(&Composition::new(p.clone()).unwrap());
            *in_cell.entry(c).or_insert(0.0) += v;
        }
        for (p, v) in run.stage1.iter() {
            let c = partition.cell_of(&Composition::new(p.clone()).unwrap());
            *out_cell.entry(c).or_insert(0.0) += v;
        }
        for (cell, &mass) in &in_cell {
            let got: f64 = out_cell.get(cell).copied().unwrap_or(0.0);
            prop_assert!((got - mass).abs() < 1e-12);
        }
    }
}

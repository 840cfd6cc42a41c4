//! Randomized property tests for the restriction algebra and the tree laws.

use nsbench_core::partial::{restrict_formula, PartialInjection, PartialPartition, Universe};
use nsbench_core::formula::{Formula, Var};
use nsbench_core::tree::{tree_from_list, Tree};
use proptest::prelude::*;
use std::collections::BTreeSet;

/// Strategy: a random partial injection over (D_m, R_n).
fn arb_partial_injection(m: u32, n: u32) -> impl Strategy<Value = PartialInjection> {
    let pigeons: Vec<u32> = (1..=m).collect();
    let holes: Vec<u32> = (1..=n).collect();
    (
        proptest::sample::subsequence(pigeons, 0..=(m as usize)),
        proptest::sample::subsequence(holes.clone(), 0..=(n as usize)),
    )
        .prop_flat_map(move |(ps, hs)| {
            let k = ps.len().min(hs.len());
            let ps: Vec<u32> = ps.into_iter().take(k).collect();
            let hs_used: Vec<u32> = hs.iter().copied().take(k).collect();
            let leftover: Vec<u32> = (1..=n).filter(|h| !hs_used.contains(h)).collect();
            proptest::sample::subsequence(leftover, 0..=(n as usize - k)).prop_map(
                move |singles| {
                    PartialInjection::new(
                        ps.iter().copied().zip(hs_used.iter().copied()),
                        singles,
                    )
                    .expect("constructed disjoint")
                },
            )
        })
}

/// A pair of compatible partial injections.
fn arb_compatible_pair(m: u32, n: u32) -> impl Strategy<Value = (PartialInjection, PartialInjection)> {
    arb_partial_injection(m, n).prop_flat_map(move |whole| {
        let pairs: Vec<(u32, u32)> = whole.pairs().iter().copied().collect();
        let singles: Vec<u32> = whole.singles().iter().copied().collect();
        (
            proptest::sample::subsequence(pairs, 0..=whole.pairs().len()),
            proptest::sample::subsequence(singles, 0..=whole.singles().len()),
        )
            .prop_map(move |(ps, ss)| {
                let part = PartialInjection::new(ps, ss).unwrap();
                let rest = whole.subtract(&part).unwrap();
                (part, rest)
            })
    })
}

/// A random small family of partial injections usable by the list builder.
fn arb_family(m: u32, n: u32, len: usize) -> impl Strategy<Value = Vec<PartialInjection>> {
    proptest::collection::vec(arb_partial_injection(m, n), 0..=len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn compatible_is_symmetric((a, b) in (arb_partial_injection(4, 4), arb_partial_injection(4, 4))) {
        prop_assert_eq!(a.compatible(&b), b.compatible(&a));
        prop_assert!(a.compatible(&a));
    }

    #[test]
    fn union_subtract_roundtrip((a, b) in arb_compatible_pair(4, 4)) {
        let u = a.union(&b).unwrap();
        prop_assert_eq!(u.subtract(&a).unwrap(), b);
    }

    #[test]
    fn union_commutes((a, b) in arb_compatible_pair(4, 4)) {
        prop_assert_eq!(a.union(&b).unwrap(), b.union(&a).unwrap());
    }

    #[test]
    fn restriction_composes_on_formulas(
        (rho, tau) in arb_compatible_pair(3, 3),
        extra in proptest::collection::vec((1u32..=3, 1u32..=3), 0..4),
    ) {
        let u = Universe::new(3, 3);
        let mut children: Vec<Formula> = extra
            .iter()
            .map(|&(i, j)| Formula::var(Var::Inj { pigeon: i, hole: j }))
            .collect();
        children.push(Formula::not(Formula::var(Var::Inj { pigeon: 1, hole: 1 })));
        let f = Formula::or(children);
        let once = restrict_formula(&f, &rho, &u).unwrap();
        let u2 = u.minus(&rho);
        let twice = restrict_formula(&once, &tau, &u2).unwrap();
        let combined = restrict_formula(&f, &rho.union(&tau).unwrap(), &u).unwrap();
        prop_assert_eq!(twice, combined);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    /// Restriction law for trees built by the list builder.
    #[test]
    fn tree_restriction_composes(
        fam in arb_family(3, 3, 2),
        (rho, tau) in arb_compatible_pair(3, 3),
    ) {
        let u = Universe::new(3, 3);
        let Ok(t) = tree_from_list(&u, &fam) else { return Ok(()) };
        let total = rho.union(&tau).unwrap();
        prop_assume!(t.height() + total.len() <= 3);
        let once = t.restrict(&rho);
        let combined = t.restrict(&total);
        match (once, combined) {
            (Ok(t1), Ok(tc)) => {
                let t2 = t1.restrict(&tau);
                prop_assert!(t2.is_ok());
                prop_assert_eq!(t2.unwrap(), tc);
            }
            // Within the height bound neither restriction may strand.
            (a, b) => prop_assert!(a.is_err() && b.is_err()),
        }
    }

    /// Distinct branches of a tree are pairwise incompatible.
    #[test]
    fn branches_pairwise_incompatible(fam in arb_family(4, 4, 3)) {
        let u = Universe::new(4, 4);
        let Ok(t) = tree_from_list(&u, &fam) else { return Ok(()) };
        let branches = t.branches();
        for (i, (a, _)) in branches.iter().enumerate() {
            for (b, _) in branches.iter().skip(i + 1) {
                prop_assert!(a.conflicts(b), "{} vs {}", a, b);
            }
        }
    }

    /// The list builder represents its input as a set.
    #[test]
    fn tree_from_list_represents(fam in arb_family(3, 3, 3)) {
        let u = Universe::new(3, 3);
        let Ok(t) = tree_from_list(&u, &fam) else { return Ok(()) };
        let set: BTreeSet<PartialInjection> = fam.iter().cloned().collect();
        prop_assert!(t.represents(&set));
        prop_assert!(nsbench_core::oracle::oracle_represents(&t, &fam));
    }

    /// Concatenation branch law: br(T*U) = {b·c : b ∈ br(T), c ∈ br(U^b)}.
    #[test]
    fn concat_full_branch_law(
        fam1 in arb_family(3, 3, 2),
        fam2 in arb_family(3, 3, 1),
    ) {
        let u = Universe::new(3, 3);
        let Ok(t) = tree_from_list(&u, &fam1) else { return Ok(()) };
        let Ok(s) = tree_from_list(&u, &fam2) else { return Ok(()) };
        prop_assume!(t.height() + s.height() <= 3);
        let Ok(c) = t.concat_full(&s) else { return Ok(()) };
        let mut expected: BTreeSet<PartialInjection> = BTreeSet::new();
        for (b, _) in t.branches() {
            if let Ok(sb) = s.restrict(&b) {
                for (cb, _) in sb.branches() {
                    expected.insert(b.union(&cb).unwrap());
                }
            }
        }
        let actual: BTreeSet<PartialInjection> =
            c.branches().into_iter().map(|(b, _)| b).collect();
        prop_assert_eq!(actual, expected);
    }

    /// Representation is stable under restriction.
    #[test]
    fn representation_survives_restriction(
        fam in arb_family(3, 3, 2),
        rho in arb_partial_injection(3, 3),
    ) {
        let u = Universe::new(3, 3);
        let Ok(t) = tree_from_list(&u, &fam) else { return Ok(()) };
        prop_assume!(t.height() + rho.len() <= 3);
        let Ok(tr) = t.restrict(&rho) else { return Ok(()) };
        let restricted: BTreeSet<PartialInjection> = fam
            .iter()
            .filter(|s| s.compatible(&rho))
            .map(|s| s.subtract(&rho).unwrap())
            .collect();
        prop_assert!(tr.represents(&restricted));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Branch exhaustiveness: a total injection (with singleton complement)
    /// is compatible with exactly one branch.
    #[test]
    fn branch_exhaustiveness(
        fam in arb_family(3, 4, 3),
        perm in proptest::sample::subsequence(vec![1u32,2,3,4], 3),
    ) {
        let u = Universe::new(3, 4);
        let Ok(t) = tree_from_list(&u, &fam) else { return Ok(()) };
        // Encode a total injection [3] -> [4] from the sampled holes.
        let pairs: Vec<(u32, u32)> = (1..=3).zip(perm.iter().copied()).collect();
        let singles: Vec<u32> = (1..=4).filter(|h| !perm.contains(h)).collect();
        let g = PartialInjection::new(pairs, singles).unwrap();
        let compatible = t
            .branches()
            .iter()
            .filter(|(b, _)| b.compatible(&g))
            .count();
        prop_assert_eq!(compatible, 1);
    }

    /// Partition algebra mirrors the injection laws.
    #[test]
    fn partition_union_subtract(
        blocks in proptest::sample::subsequence(
            vec![vec![1u32,2], vec![3,4], vec![5,6], vec![7,8]], 0..=4),
        split in 0usize..=4,
    ) {
        let whole = PartialPartition::new(blocks.clone()).unwrap();
        let taken: Vec<Vec<u32>> = blocks.iter().take(split.min(blocks.len())).cloned().collect();
        let part = PartialPartition::new(taken).unwrap();
        let rest = whole.subtract(&part).unwrap();
        prop_assert_eq!(part.union(&rest).unwrap(), whole);
    }
}

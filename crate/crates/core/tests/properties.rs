use std::collections::BTreeMap;
use std::sync::OnceLock;

use leftorders::cantor::{derivative_at_horizon, dichotomy_report, BranchTree, DichotomyConfig, Verdict};
use leftorders::cones::{propagate, Propagation};
use leftorders::dynamics::{act, orbits_at_level};
use leftorders::orderspace::build_tree;
use leftorders::subgroups::{restrict_order, SubgroupSpec};
use leftorders::{parse_group_spec, PartialAssignment, PartialCone, PrefixTree, SearchConfig, Sign};
use proptest::prelude::*;

const TREES: [(&str, u32); 5] = [("Z", 7), ("Z^2", 5), ("F2", 4), ("KB", 7), ("H3", 4)];

fn trees() -> &'static BTreeMap<&'static str, PrefixTree> {
    static CELL: OnceLock<BTreeMap<&'static str, PrefixTree>> = OnceLock::new();
    CELL.get_or_init(|| {
        TREES
            .iter()
            .map(|&(name, r)| {
                let ctx = parse_group_spec(name).unwrap();
                (name, build_tree(&ctx, r, &SearchConfig::default()).unwrap())
            })
            .collect()
    })
}

fn top_cone() -> impl Strategy<Value = (&'static str, PartialCone)> {
    prop::sample::select(TREES.iter().map(|t| t.0).collect::<Vec<_>>()).prop_flat_map(|name| {
        let tree = &trees()[name];
        let level = tree.level(tree.max_radius()).unwrap();
        (Just(name), 0..level.len()).prop_map(move |(n, i)| (n, level[i].cone.clone()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cone_json_round_trips((_, cone) in top_cone()) {
        let back = PartialCone::from_json(&cone.to_json()).unwrap();
        prop_assert_eq!(back, cone);
    }

    #[test]
    fn action_commutes_with_restriction((name, cone) in top_cone(), pick in any::<prop::sample::Index>()) {
        let ctx = parse_group_spec(name).unwrap();
        let acting: Vec<_> = ctx.ball(1);
        let g = pick.get(&acting);
        let full = act(&cone, g).unwrap().cone;
        let smaller = cone.restrict(cone.radius() - 1).unwrap();
        if let Ok(small) = act(&smaller, g) {
            prop_assert_eq!(full.restrict(small.cone.radius()).unwrap(), small.cone);
        }
    }

    #[test]
    fn action_is_invertible((name, cone) in top_cone(), pick in any::<prop::sample::Index>()) {
        let ctx = parse_group_spec(name).unwrap();
        let acting = ctx.ball(1);
        let g = pick.get(&acting);
        let there = act(&cone, g).unwrap().cone;
        if let Ok(back) = act(&there, &ctx.invert(g).unwrap()) {
            prop_assert_eq!(cone.restrict_to(back.cone.ball()).unwrap(), back.cone);
        }
    }

    #[test]
    fn propagation_is_monotone_and_idempotent(
        name in prop::sample::select(vec!["Z^2", "F2", "KB", "S3", "H3"]),
        bits in prop::collection::vec(0u8..6, 0..64),
    ) {
        let ctx = parse_group_spec(name).unwrap();
        let ball = leftorders::Ball::new(&ctx, 2);
        let mut small = PartialAssignment::empty(ball.clone());
        let mut large = PartialAssignment::empty(ball.clone());
        for (e, b) in ball.elements().iter().zip(&bits) {
            let sign = if b % 2 == 0 { Sign::Positive } else { Sign::Negative };
            if *b < 4 {
                large.set(e, sign).unwrap();
                if *b < 2 {
                    small.set(e, sign).unwrap();
                }
            }
        }
        match (propagate(&small), propagate(&large)) {
            (Propagation::Extended(a), Propagation::Extended(b)) => {
                prop_assert!(small.is_extended_by(&a));
                prop_assert!(a.is_extended_by(&b));
                prop_assert_eq!(propagate(&a), Propagation::Extended(a.clone()));
            }
            (Propagation::Refuted(_), other) => {
                prop_assert!(matches!(other, Propagation::Refuted(_)));
            }
            (Propagation::Extended(a), Propagation::Refuted(_)) => {
                prop_assert!(small.is_extended_by(&a));
            }
        }
    }

    #[test]
    fn restrictions_are_left_orders((name, cone) in top_cone()) {
        let ctx = parse_group_spec(name).unwrap();
        let g = ctx.generators()[0].clone();
        let spec = SubgroupSpec::new(&ctx, vec![ctx.pow(&g, 2).unwrap()]).unwrap();
        let s = cone.radius() / 2;
        let r = restrict_order(&cone, &spec, s / 2).unwrap();
        prop_assert!(r.check_axioms().is_empty());
        let spec1 = SubgroupSpec::new(&ctx, vec![g]).unwrap();
        let via = restrict_order(&cone, &spec1, s).unwrap().restrict_further(&spec, s / 2).unwrap();
        prop_assert_eq!(via, r);
    }

    #[test]
    fn derivative_traces_descend(parents in prop::collection::vec(prop::collection::vec(0usize..8, 1..12), 1..5)) {
        let mut levels = vec![vec![0usize]];
        for raw in parents {
            let above = levels.last().unwrap().len();
            // every node keeps a child so the tree is pruned
            let mut level: Vec<usize> = (0..above).collect();
            level.extend(raw.into_iter().map(|p| p % above));
            level.sort();
            levels.push(level);
        }
        let tree = BranchTree::from_parents(levels);
        let h = tree.max_radius();
        for level in 0..=h {
            let trace = derivative_at_horizon(&tree, level, h, 3).unwrap();
            prop_assert!(trace.windows(2).all(|w| w[0] >= w[1]));
            prop_assert_eq!(trace[2], trace[3]);
        }
    }
}

#[test]
fn orbits_ignore_generator_order() {
    for (name, tree) in trees() {
        let ctx = tree.ctx();
        let mut gens = ctx.generators().to_vec();
        let a = orbits_at_level(tree, 1, &gens).unwrap();
        gens.reverse();
        let b = orbits_at_level(tree, 1, &gens).unwrap();
        assert_eq!(a.orbits, b.orbits, "{name}");
    }
}

#[test]
fn raising_the_horizon_never_raises_k() {
    for (name, r) in [("Z", 2), ("KB", 4), ("1", 1), ("C3", 1)] {
        let ctx = parse_group_spec(name).unwrap();
        let mut last = usize::MAX;
        for h in r + 2..r + 6 {
            match dichotomy_report(&ctx, &DichotomyConfig::new(r, h)).unwrap().verdict {
                Verdict::FiniteEvidence(k) => {
                    assert!(k <= last, "{name} horizon {h}");
                    last = k;
                }
                v => panic!("{name} horizon {h}: {v}"),
            }
        }
    }
}

#[test]
fn finite_counts_are_even_except_trivial() {
    for (name, r, h) in [("Z", 2, 5), ("KB", 4, 8), ("C2", 1, 3), ("1", 1, 4)] {
        let ctx = parse_group_spec(name).unwrap();
        let report = dichotomy_report(&ctx, &DichotomyConfig::new(r, h)).unwrap();
        let Verdict::FiniteEvidence(k) = report.verdict else {
            panic!("{name}: {}", report.verdict)
        };
        assert!(k % 2 == 0 || (name == "1" && k == 1), "{name}: {k}");
    }
}

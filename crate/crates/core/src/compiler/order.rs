//! Phase 1: hint-reuse ordering of homomorphic operations.

use std::collections::BTreeSet;

use crate::dsl::{HomProgram, NodeId};

/// Node id order.
pub fn naive_order(program: &HomProgram) -> Vec<NodeId> {
    (0..program.nodes().len()).collect()
}

/// Adjacent pairs of hint-bearing ops, in `order`, whose hints differ.
pub fn hint_transitions(program: &HomProgram, order: &[NodeId]) -> usize {
    let hints: Vec<_> = order.iter().filter_map(|&id| program.node(id).hint).collect();
    hints.windows(2).filter(|w| w[0] != w[1]).count()
}

/// List-schedules `program` so that independent ops sharing a hint run
/// back to back.
///
/// Ready hint-free ops go first. Otherwise the smallest ready hint-bearing
/// op picks the hint and every ready op using it follows. Falls back to
/// node order if that has fewer hint transitions.
pub fn order_homops(program: &HomProgram) -> Vec<NodeId> {
    let nodes = program.nodes();
    let users = program.users();
    let mut missing: Vec<usize> = nodes
        .iter()
        .map(|n| n.operands.iter().collect::<BTreeSet<_>>().len())
        .collect();
    let mut ready_free = BTreeSet::new();
    let mut ready_hint = BTreeSet::new();
    for n in nodes {
        if missing[n.id] == 0 {
            if n.hint.is_some() {
                ready_hint.insert(n.id);
            } else {
                ready_free.insert(n.id);
            }
        }
    }
    let mut order = Vec::with_capacity(nodes.len());
    let mut emit =
        |id: NodeId, order: &mut Vec<NodeId>, ready_free: &mut BTreeSet<NodeId>, ready_hint: &mut BTreeSet<NodeId>| {
            order.push(id);
            let mut seen = BTreeSet::new();
            for &u in &users[id] {
                if !seen.insert(u) {
                    continue;
                }
                missing[u] -= 1;
                if missing[u] == 0 {
                    if nodes[u].hint.is_some() {
                        ready_hint.insert(u);
                    } else {
                        ready_free.insert(u);
                    }
                }
            }
        };
    while order.len() < nodes.len() {
        if let Some(id) = ready_free.pop_first() {
            emit(id, &mut order, &mut ready_free, &mut ready_hint);
            continue;
        }
        let first = ready_hint.pop_first().expect("acyclic program always has a ready node");
        let hint = nodes[first].hint;
        let group: Vec<NodeId> = std::iter::once(first)
            .chain(ready_hint.iter().copied().filter(|&id| nodes[id].hint == hint))
            .collect();
        for id in group {
            ready_hint.remove(&id);
            emit(id, &mut order, &mut ready_free, &mut ready_hint);
        }
    }
    let naive = naive_order(program);
    if hint_transitions(program, &naive) < hint_transitions(program, &order) {
        naive
    } else {
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{build_matvec, random_program, HomOpKind, RandomProgramConfig};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn is_topological(p: &HomProgram, order: &[NodeId]) -> bool {
        let mut pos = vec![usize::MAX; p.nodes().len()];
        for (i, &id) in order.iter().enumerate() {
            pos[id] = i;
        }
        order.len() == p.nodes().len() && p.nodes().iter().all(|n| n.operands.iter().all(|&o| pos[o] < pos[n.id]))
    }

    #[test]
    fn matvec_groups_each_hint() {
        let p = build_matvec(4, 64, 4).unwrap();
        let order = order_homops(&p);
        assert!(is_topological(&p, &order));
        assert_eq!(hint_transitions(&p, &order), p.hint_ids().len() - 1);
        let kinds: Vec<_> = order
            .iter()
            .filter(|&&id| p.node(id).hint.is_some())
            .map(|&id| p.node(id).kind)
            .collect();
        assert!(kinds[..4].iter().all(|k| *k == HomOpKind::Mul));
        assert_eq!(hint_transitions(&p, &naive_order(&p)), 4 * 7 - 1);
    }

    #[test]
    fn single_op_unchanged() {
        let mut p = HomProgram::new(16).unwrap();
        let x = p.input(2).unwrap();
        p.output(x).unwrap();
        assert_eq!(order_homops(&p), vec![0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_orders_are_safe(seed in any::<u64>()) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let mut cfg = RandomProgramConfig::new(64, 5, 3);
            cfg.ops = 20;
            let p = random_program(&cfg, &mut rng).unwrap();
            let order = order_homops(&p);
            prop_assert!(is_topological(&p, &order));
            prop_assert!(hint_transitions(&p, &order) <= hint_transitions(&p, &naive_order(&p)));
            prop_assert_eq!(order_homops(&p), order);
        }
    }
}

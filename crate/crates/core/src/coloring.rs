//! Collision-robust slot assignments for tree vertices.
//!
//! Each vertex gets an ordered list of `m` distinct arms, one per player
//! slot, such that any arm shared between tree-adjacent vertices sits in the
//! same slot. Players at adjacent vertices therefore never pick the same arm
//! from different slots, which is exactly what rules out collisions when all
//! players' vertices stay pairwise adjacent.
//!
//! The assignment is built by inheritance down the tree. At the root, slot
//! `i` holds the `i`-th arm in priority order (the shared permutation
//! `pi`). At a child, every arm of the parent assignment that is still
//! eligible keeps its slot: eligible means in the child's decided set, or in
//! its undecided set within the quota `m - |A|`, keeping the
//! highest-priority ones. Freed slots are refilled (lowest slot first) with
//! the missing decided arms and quota-filling undecided arms, in priority
//! order. Shared arms never move slots, so robustness holds along every
//! edge by construction; the priority permutation injects the randomness
//! that spreads exploration over the undecided block.

use crate::dop::Dop;
use crate::error::{Error, Result};
use std::fmt;

/// Arms indexed by player slot; all entries distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotAssignment {
    arms: Vec<usize>,
}

impl SlotAssignment {
    pub fn arms(&self) -> &[usize] {
        &self.arms
    }

    pub fn arm_for_slot(&self, slot: usize) -> usize {
        self.arms[slot]
    }

    /// The unordered arm set, ascending.
    pub fn arm_set(&self) -> Vec<usize> {
        let mut set = self.arms.clone();
        set.sort_unstable();
        set
    }
}

impl fmt::Display for SlotAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, arm) in self.arms.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", arm + 1)?;
        }
        write!(f, ")")
    }
}

/// Computes the assignment for `p` under priority permutation `pi`
/// (`pi[0]` is the highest-priority arm).
pub fn color(p: &Dop, pi: &[usize]) -> Result<SlotAssignment> {
    let rank = priority_ranks(pi, p.arm_count())?;
    let path = p.root_path();
    let mut slots: Vec<usize> = pi[..p.player_count()].to_vec();
    for vertex in &path[1..] {
        slots = inherit(&slots, vertex, &rank);
    }
    Ok(SlotAssignment { arms: slots })
}

fn priority_ranks(pi: &[usize], k: usize) -> Result<Vec<usize>> {
    if pi.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: pi.len(),
        });
    }
    let mut rank = vec![usize::MAX; k];
    for (pos, &arm) in pi.iter().enumerate() {
        if arm >= k || rank[arm] != usize::MAX {
            return Err(Error::BadConfig(format!("pi is not a permutation: {pi:?}")));
        }
        rank[arm] = pos;
    }
    Ok(rank)
}

/// One inheritance step from a parent's slots to the child's.
fn inherit(parent_slots: &[usize], child: &Dop, rank: &[usize]) -> Vec<usize> {
    let ab = child.ab_sets();
    let quota = child.player_count() - ab.a_set().len();

    // Undecided arms of the parent assignment, best priority first; only
    // the first `quota` of them stay.
    let mut b_carried: Vec<usize> = parent_slots
        .iter()
        .copied()
        .filter(|a| ab.b_set().contains(a))
        .collect();
    b_carried.sort_by_key(|&a| rank[a]);
    let b_kept: Vec<usize> = b_carried.iter().copied().take(quota).collect();

    let keeps: Vec<bool> = parent_slots
        .iter()
        .map(|a| ab.a_set().contains(a) || b_kept.contains(a))
        .collect();

    let mut additions: Vec<usize> = ab
        .a_set()
        .iter()
        .copied()
        .filter(|a| !parent_slots.contains(a))
        .collect();
    let mut b_fill: Vec<usize> = ab
        .b_set()
        .iter()
        .copied()
        .filter(|a| !parent_slots.contains(a))
        .collect();
    b_fill.sort_by_key(|&a| rank[a]);
    additions.extend(b_fill.into_iter().take(quota - b_kept.len()));
    additions.sort_by_key(|&a| rank[a]);

    let mut slots = parent_slots.to_vec();
    let mut next = additions.into_iter();
    for (slot, kept) in keeps.iter().enumerate() {
        if !kept {
            slots[slot] = next.next().expect("counts match by construction");
        }
    }
    debug_assert!(next.next().is_none());
    slots
}

/// Exhaustively checks collision-robustness of [`color`] under `pi` over all
/// vertex pairs at tree distance <= 1, down to `max_depth` (`None` = whole
/// tree). Small `k` only.
pub fn verify_collision_robust(
    k: usize,
    m: usize,
    pi: &[usize],
    max_depth: Option<usize>,
) -> Result<bool> {
    verify_coloring(k, m, max_depth, |p| color(p, pi))
}

/// As [`verify_collision_robust`] but for an arbitrary assignment rule;
/// lets tests confirm the check rejects broken colorings.
pub fn verify_coloring<F>(k: usize, m: usize, max_depth: Option<usize>, rule: F) -> Result<bool>
where
    F: Fn(&Dop) -> Result<SlotAssignment>,
{
    let root = Dop::root(k, m)?;
    let mut stack = vec![root];
    while let Some(p) = stack.pop() {
        let fp = rule(&p)?;
        if !pairwise_consistent(&fp, &fp) {
            return Ok(false);
        }
        if max_depth.map(|d| p.depth() >= d).unwrap_or(false) {
            continue;
        }
        for child in p.children() {
            let fc = rule(&child)?;
            if !pairwise_consistent(&fp, &fc) || !pairwise_consistent(&fc, &fp) {
                return Ok(false);
            }
            stack.push(child);
        }
    }
    Ok(true)
}

/// `f_i(P) = f_j(Q)` must force `i = j`.
fn pairwise_consistent(fp: &SlotAssignment, fq: &SlotAssignment) -> bool {
    for (i, &a) in fp.arms().iter().enumerate() {
        for (j, &b) in fq.arms().iter().enumerate() {
            if i != j && a == b {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dop::enumerate_vertices;
    use rand::rngs::StdRng;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn dop(s: &str, m: usize) -> Dop {
        Dop::parse(s, m).unwrap()
    }

    fn random_pi(k: usize, rng: &mut StdRng) -> Vec<usize> {
        let mut pi: Vec<usize> = (0..k).collect();
        pi.shuffle(rng);
        pi
    }

    #[test]
    fn root_slots_follow_priority_order() {
        let root = Dop::root(3, 2).unwrap();
        let f = color(&root, &[0, 1, 2]).unwrap();
        assert_eq!(f.arms(), &[0, 1]);
        let f = color(&root, &[2, 0, 1]).unwrap();
        assert_eq!(f.arms(), &[2, 0]);
    }

    #[test]
    fn inheritance_hand_example() {
        // A = {3} forces arm 3 in; the parent's arm 1 outranks arm 2 for the
        // single undecided slot, so arm 2's slot is freed for arm 3.
        let p = dop("[{3}>_1{1,2}]", 2);
        let f = color(&p, &[0, 1, 2]).unwrap();
        assert_eq!(f.arms(), &[0, 2]);
        assert_eq!(f.to_string(), "(1,3)");
    }

    #[test]
    fn assignment_is_always_feasible() {
        let mut rng = StdRng::seed_from_u64(3);
        for (k, m) in [(3, 2), (4, 2), (4, 3), (5, 3)] {
            let vertices = enumerate_vertices(k, m, None).unwrap();
            for _ in 0..20 {
                let pi = random_pi(k, &mut rng);
                for v in &vertices {
                    let f = color(v, &pi).unwrap();
                    assert!(v.feas().contains(&f.arm_set()), "{v} -> {f}");
                }
            }
        }
    }

    #[test]
    fn shared_arms_keep_their_slots() {
        let mut rng = StdRng::seed_from_u64(4);
        for _ in 0..50 {
            let pi = random_pi(5, &mut rng);
            for v in enumerate_vertices(5, 3, None).unwrap() {
                let fv = color(&v, &pi).unwrap();
                for child in v.children() {
                    let fc = color(&child, &pi).unwrap();
                    for (slot, &arm) in fv.arms().iter().enumerate() {
                        if let Some(other) = fc.arms().iter().position(|&a| a == arm) {
                            assert_eq!(slot, other);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn undecided_content_is_the_priority_prefix() {
        // Independent characterization of the inheritance rule: the
        // assignment is exactly A(P) plus the quota highest-priority arms
        // of B(P).
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..50 {
            let pi = random_pi(5, &mut rng);
            let rank = priority_ranks(&pi, 5).unwrap();
            for v in enumerate_vertices(5, 2, None).unwrap() {
                let ab = v.ab_sets();
                let quota = 2 - ab.a_set().len();
                let mut b_sorted: Vec<usize> = ab.b_set().to_vec();
                b_sorted.sort_by_key(|&a| rank[a]);
                let mut expect: Vec<usize> = ab.a_set().to_vec();
                expect.extend(b_sorted.into_iter().take(quota));
                expect.sort_unstable();
                assert_eq!(color(&v, &pi).unwrap().arm_set(), expect);
            }
        }
    }

    #[test]
    fn exhaustive_robustness_small_trees() {
        let mut rng = StdRng::seed_from_u64(6);
        for (k, m) in [(3, 2), (5, 3)] {
            for _ in 0..100 {
                let pi = random_pi(k, &mut rng);
                assert!(verify_collision_robust(k, m, &pi, None).unwrap());
            }
        }
    }

    #[test]
    fn broken_coloring_is_rejected() {
        // Swap the two root slots in exactly one child.
        let bad_at = dop("[{1}>_1{2,3}]", 2);
        let rule = |p: &Dop| {
            let mut f = color(p, &[0, 1, 2])?;
            if *p == bad_at {
                f.arms.swap(0, 1);
            }
            Ok(f)
        };
        assert!(!verify_coloring(3, 2, None, rule).unwrap());
    }
}

//! Doubly ordered partitions (DOPs) and the tree they form.
//!
//! A DOP is an ordered set partition `[S_1 > S_2 > ... > S_j]` of the arm set
//! whose inequality signs additionally record the order in which they were
//! inserted. Vertices of the tree are DOPs reachable from the trivial
//! partition by repeatedly splitting the undecided block `B(P)`: the block
//! that still has to be refined before the top `m` arms are pinned down.
//! Leaves are exactly the DOPs whose decided set `A(P)` has size `m`.
//!
//! Arms are `0`-based `usize` everywhere in code; the text format used by
//! [`Dop::parse`] and `Display` is `1`-based, e.g. `[{1,3,5}>_1{2,6,7}>_2{4}]`.

use crate::error::{Error, Result};
use std::fmt;

/// A vertex of the tree: blocks plus insertion labels on the inequalities.
///
/// Canonical form: each block is stored as an ascending arm list, so derived
/// structural equality coincides with DOP equality. `labels[i]` is the
/// insertion index (1-based) of the inequality between `blocks[i]` and
/// `blocks[i+1]`; the labels of a depth-`d` vertex are a permutation of `1..=d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dop {
    k: usize,
    m: usize,
    blocks: Vec<Vec<usize>>,
    labels: Vec<usize>,
}

/// The decided/undecided arm sets `A(P)` and `B(P)` of a vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArmSetPair {
    a_set: Vec<usize>,
    b_set: Vec<usize>,
}

impl ArmSetPair {
    /// Arms already identified as being in the top `m` (sorted).
    pub fn a_set(&self) -> &[usize] {
        &self.a_set
    }

    /// Arms that must still be partitioned further (sorted); empty iff leaf.
    pub fn b_set(&self) -> &[usize] {
        &self.b_set
    }
}

impl Dop {
    /// The trivial vertex: a single block holding all `k` arms.
    pub fn root(k: usize, m: usize) -> Result<Self> {
        if m == 0 || m >= k {
            return Err(Error::BadCounts { k, m });
        }
        Ok(Dop {
            k,
            m,
            blocks: vec![(0..k).collect()],
            labels: Vec::new(),
        })
    }

    /// Builds and validates a vertex from raw blocks and inequality labels.
    ///
    /// Rejects anything that is not a partition of `0..k`, whose labels are
    /// not a permutation of `1..=j-1`, or that is unreachable from the root
    /// by splitting undecided blocks.
    pub fn new(k: usize, m: usize, blocks: Vec<Vec<usize>>, labels: Vec<usize>) -> Result<Self> {
        if m == 0 || m >= k {
            return Err(Error::BadCounts { k, m });
        }
        if blocks.is_empty() || labels.len() + 1 != blocks.len() {
            return Err(Error::BadVertex(format!(
                "{} blocks with {} labels",
                blocks.len(),
                labels.len()
            )));
        }
        let mut blocks = blocks;
        let mut seen = vec![false; k];
        for block in &mut blocks {
            if block.is_empty() {
                return Err(Error::BadVertex("empty block".into()));
            }
            block.sort_unstable();
            for &arm in block.iter() {
                if arm >= k || seen[arm] {
                    return Err(Error::BadVertex(format!("bad or repeated arm {arm}")));
                }
                seen[arm] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::BadVertex("blocks do not cover all arms".into()));
        }
        let d = labels.len();
        let mut label_seen = vec![false; d];
        for &l in &labels {
            if l == 0 || l > d || label_seen[l - 1] {
                return Err(Error::BadVertex(format!("labels are not a bijection: {l}")));
            }
            label_seen[l - 1] = true;
        }
        let dop = Dop { k, m, blocks, labels };
        dop.check_membership()?;
        Ok(dop)
    }

    /// Walks up to the root, checking that each inequality (in reverse
    /// insertion order) splits exactly the then-current undecided block.
    fn check_membership(&self) -> Result<()> {
        let mut cur = self.clone();
        while cur.depth() > 0 {
            let pos = cur.last_split_pos();
            let merged: Vec<usize> = {
                let mut v = cur.blocks[pos].clone();
                v.extend_from_slice(&cur.blocks[pos + 1]);
                v.sort_unstable();
                v
            };
            let parent = cur.parent().expect("depth > 0");
            if parent.ab_sets().b_set() != merged.as_slice() {
                return Err(Error::BadVertex(format!(
                    "inequality {} does not split the undecided block of {}",
                    cur.depth(),
                    parent
                )));
            }
            cur = parent;
        }
        Ok(())
    }

    pub fn arm_count(&self) -> usize {
        self.k
    }

    pub fn player_count(&self) -> usize {
        self.m
    }

    /// Blocks in their partition order, each sorted ascending.
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Number of inequalities, which equals the distance to the root.
    pub fn depth(&self) -> usize {
        self.labels.len()
    }

    pub fn is_root(&self) -> bool {
        self.labels.is_empty()
    }

    /// Index of the block boundary carrying the most recent inequality.
    fn last_split_pos(&self) -> usize {
        let d = self.depth();
        self.labels
            .iter()
            .position(|&l| l == d)
            .expect("labels form a bijection")
    }

    /// Number of leading blocks that fit inside the top `m`.
    fn decided_prefix(&self) -> usize {
        let mut total = 0;
        let mut i = 0;
        for block in &self.blocks {
            if total + block.len() > self.m {
                break;
            }
            total += block.len();
            i += 1;
        }
        i
    }

    /// The pair `(A(P), B(P))`.
    pub fn ab_sets(&self) -> ArmSetPair {
        let i = self.decided_prefix();
        let mut a_set: Vec<usize> = self.blocks[..i].iter().flatten().copied().collect();
        a_set.sort_unstable();
        let b_set = if a_set.len() == self.m {
            Vec::new()
        } else {
            self.blocks[i].clone()
        };
        ArmSetPair { a_set, b_set }
    }

    /// A leaf has pinned down all `m` top arms.
    pub fn is_leaf(&self) -> bool {
        self.ab_sets().b_set.is_empty()
    }

    /// Child obtained by splitting `B(P)` into `top > rest`.
    ///
    /// `top` must be a nonempty proper subset of the undecided block.
    pub(crate) fn split_b(&self, top: &[usize]) -> Dop {
        let ab = self.ab_sets();
        let b = ab.b_set();
        debug_assert!(!top.is_empty() && top.len() < b.len());
        debug_assert!(top.iter().all(|a| b.contains(a)));
        let pos = self.decided_prefix();
        let mut top: Vec<usize> = top.to_vec();
        top.sort_unstable();
        let bottom: Vec<usize> = b.iter().copied().filter(|a| !top.contains(a)).collect();
        let mut blocks = self.blocks.clone();
        blocks.splice(pos..=pos, [top, bottom]);
        let mut labels = self.labels.clone();
        labels.insert(pos, self.depth() + 1);
        Dop {
            k: self.k,
            m: self.m,
            blocks,
            labels,
        }
    }

    /// All children, enumerated lazily (there are `2^|B| - 2` of them).
    pub fn children(&self) -> impl Iterator<Item = Dop> + '_ {
        let b = self.ab_sets().b_set().to_vec();
        let n = b.len();
        let masks = if n < 2 { 1..1u64 } else { 1..((1u64 << n) - 1) };
        masks.map(move |mask| {
            let top: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| b[i]).collect();
            self.split_b(&top)
        })
    }

    /// Merges the most recently inserted inequality; `None` for the root.
    pub fn parent(&self) -> Option<Dop> {
        if self.is_root() {
            return None;
        }
        let pos = self.last_split_pos();
        let mut blocks = self.blocks.clone();
        let second = blocks.remove(pos + 1);
        blocks[pos].extend(second);
        blocks[pos].sort_unstable();
        let mut labels = self.labels.clone();
        labels.remove(pos);
        Some(Dop {
            k: self.k,
            m: self.m,
            blocks,
            labels,
        })
    }

    /// Chain of ancestors from the root down to `self` (inclusive).
    pub fn root_path(&self) -> Vec<Dop> {
        let mut chain = vec![self.clone()];
        let mut cur = self.clone();
        while let Some(p) = cur.parent() {
            chain.push(p.clone());
            cur = p;
        }
        chain.reverse();
        chain
    }

    /// Graph distance in the tree via the lowest common ancestor.
    pub fn tree_distance(&self, other: &Dop) -> usize {
        let pa = self.root_path();
        let pb = other.root_path();
        let mut common = 0;
        for (a, b) in pa.iter().zip(pb.iter()) {
            if a == b {
                common += 1;
            } else {
                break;
            }
        }
        (pa.len() - common) + (pb.len() - common)
    }

    /// True iff `self` is an ancestor of `other` (or equal).
    pub fn is_ancestor_of(&self, other: &Dop) -> bool {
        other.root_path().contains(self)
    }

    /// Spread of `x` over the undecided block. Rejects leaves.
    pub fn range_of(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let ab = self.ab_sets();
        let b = ab.b_set();
        if b.is_empty() {
            return Err(Error::RangeOfLeaf);
        }
        let max = b.iter().map(|&a| x[a]).fold(f64::NEG_INFINITY, f64::max);
        let min = b.iter().map(|&a| x[a]).fold(f64::INFINITY, f64::min);
        Ok(max - min)
    }

    /// Size of the cut made by the most recent inequality: the minimum of `x`
    /// over the upper block minus the maximum over the lower block. May be
    /// negative when `x` violates the recorded order. Rejects the root.
    pub fn gap_of(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if self.is_root() {
            return Err(Error::GapOfRoot);
        }
        let pos = self.last_split_pos();
        let upper = self.blocks[pos]
            .iter()
            .map(|&a| x[a])
            .fold(f64::INFINITY, f64::min);
        let lower = self.blocks[pos + 1]
            .iter()
            .map(|&a| x[a])
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(upper - lower)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// All `m`-subsets that can be the top `m` arms in a total order
    /// extending this vertex: `A(P)` plus any fill from `B(P)`.
    /// Intended for small `k` (test and verification support).
    pub fn feas(&self) -> Vec<Vec<usize>> {
        let ab = self.ab_sets();
        let need = self.m - ab.a_set().len();
        let mut out = Vec::new();
        for combo in combinations(ab.b_set(), need) {
            let mut set: Vec<usize> = ab.a_set().to_vec();
            set.extend(combo);
            set.sort_unstable();
            out.push(set);
        }
        out.sort();
        out
    }

    /// Renders `[{1,3,5}>_1{2,6,7}>_2{4}]` (arms 1-based).
    pub fn render(&self) -> String {
        format!("{self}")
    }

    /// Parses the text form back into a validated vertex.
    pub fn parse(s: &str, m: usize) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(|| Error::Parse(format!("missing [..] in {s:?}")))?;
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut labels: Vec<usize> = Vec::new();
        let mut rest = inner;
        loop {
            let close = rest
                .find('}')
                .ok_or_else(|| Error::Parse(format!("unterminated block in {s:?}")))?;
            let body = rest[..close]
                .strip_prefix('{')
                .ok_or_else(|| Error::Parse(format!("expected '{{' in {s:?}")))?;
            let mut block = Vec::new();
            for tok in body.split(',') {
                let tok = tok.trim();
                if tok.is_empty() {
                    continue;
                }
                let arm: usize = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad arm {tok:?}")))?;
                if arm == 0 {
                    return Err(Error::Parse("arms are numbered from 1".into()));
                }
                block.push(arm - 1);
            }
            blocks.push(block);
            rest = &rest[close + 1..];
            if rest.is_empty() {
                break;
            }
            let rest2 = rest
                .strip_prefix(">_")
                .ok_or_else(|| Error::Parse(format!("expected '>_' in {s:?}")))?;
            let end = rest2.find('{').unwrap_or(rest2.len());
            let label: usize = rest2[..end]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad label in {s:?}")))?;
            labels.push(label);
            rest = &rest2[end..];
        }
        let k = blocks.iter().map(Vec::len).sum();
        Dop::new(k, m, blocks, labels)
    }
}

impl fmt::Display for Dop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ">_{}", self.labels[i - 1])?;
            }
            write!(f, "{{")?;
            for (j, arm) in block.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", arm + 1)?;
            }
            write!(f, "}}")?;
        }
        write!(f, "]")
    }
}

/// Arm indices sorted by descending `x`, ties broken by ascending index.
pub fn sort_arms_desc(x: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).unwrap().then(a.cmp(&b)));
    order
}

/// The depth-1 vertex placing the top `m` coordinates of `x` above the rest.
pub fn p_star(x: &[f64], m: usize) -> Result<Dop> {
    let k = x.len();
    if m == 0 || m >= k {
        return Err(Error::BadCounts { k, m });
    }
    let order = sort_arms_desc(x);
    let root = Dop::root(k, m)?;
    Ok(root.split_b(&order[..m]))
}

/// Every vertex of the tree with depth at most `max_depth` (breadth-first).
/// Exhaustive: intended for small `k` only.
pub fn enumerate_vertices(k: usize, m: usize, max_depth: Option<usize>) -> Result<Vec<Dop>> {
    let root = Dop::root(k, m)?;
    let mut out = vec![root];
    let mut frontier = 0;
    while frontier < out.len() {
        let v = out[frontier].clone();
        frontier += 1;
        if max_depth.map(|d| v.depth() >= d).unwrap_or(false) {
            continue;
        }
        out.extend(v.children());
    }
    Ok(out)
}

fn combinations(items: &[usize], take: usize) -> Vec<Vec<usize>> {
    if take == 0 {
        return vec![Vec::new()];
    }
    if take > items.len() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        for mut tail in combinations(&items[i + 1..], take - 1) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dop(s: &str, m: usize) -> Dop {
        Dop::parse(s, m).unwrap()
    }

    #[test]
    fn root_is_a_single_block() {
        let r = Dop::root(3, 2).unwrap();
        assert_eq!(r.render(), "[{1,2,3}]");
        assert!(r.ab_sets().a_set().is_empty());
        assert_eq!(r.ab_sets().b_set(), &[0, 1, 2]);
        assert!(!r.is_leaf());
    }

    #[test]
    fn root_rejects_bad_counts() {
        assert!(Dop::root(2, 2).is_err());
        assert!(Dop::root(3, 0).is_err());
        assert!(Dop::root(3, 3).is_err());
    }

    #[test]
    fn root_has_six_children_for_three_arms() {
        let r = Dop::root(3, 2).unwrap();
        let kids: Vec<Dop> = r.children().collect();
        assert_eq!(kids.len(), 6);
        for kid in &kids {
            assert_eq!(kid.parent().unwrap(), r);
        }
    }

    #[test]
    fn leaves_have_no_children() {
        let leaf = dop("[{1,2}>_1{3}]", 2);
        assert!(leaf.is_leaf());
        assert_eq!(leaf.children().count(), 0);
    }

    #[test]
    fn membership_depends_on_insertion_order() {
        // Splitting {2,4,6,7,8} after the first cut is fine; the reversed
        // insertion order would require splitting an already-decided block.
        assert!(Dop::parse("[{4,8}>_2{2,6,7}>_1{1,3,5}]", 2).is_ok());
        assert!(Dop::parse("[{4,8}>_1{2,6,7}>_2{1,3,5}]", 2).is_err());
    }

    #[test]
    fn parent_merges_most_recent_inequality() {
        let p = dop("[{1,3,5}>_1{2,6,7}>_2{4}]", 4);
        assert_eq!(p.parent().unwrap(), dop("[{1,3,5}>_1{2,4,6,7}]", 4));
        assert_eq!(Dop::root(3, 2).unwrap().parent(), None);
    }

    #[test]
    fn children_and_parent_are_inverse() {
        for v in enumerate_vertices(4, 2, None).unwrap() {
            for child in v.children() {
                assert_eq!(child.parent().unwrap(), v);
            }
        }
    }

    #[test]
    fn ab_sets_examples() {
        let p = dop("[{1}>_1{2,3}]", 2);
        assert_eq!(p.ab_sets().a_set(), &[0]);
        assert_eq!(p.ab_sets().b_set(), &[1, 2]);
        let leaf = dop("[{1,2}>_1{3}]", 2);
        assert_eq!(leaf.ab_sets().a_set(), &[0, 1]);
        assert!(leaf.ab_sets().b_set().is_empty());
    }

    #[test]
    fn tree_distance_examples() {
        let root = Dop::root(3, 2).unwrap();
        let a = dop("[{1}>_1{2,3}]", 2);
        let b = dop("[{2}>_1{1,3}]", 2);
        assert_eq!(root.tree_distance(&root), 0);
        assert_eq!(root.tree_distance(&a), 1);
        assert_eq!(a.tree_distance(&b), 2);
    }

    #[test]
    fn range_and_gap_examples() {
        let x = [0.9, 0.5, 0.2];
        let root = Dop::root(3, 2).unwrap();
        assert!((root.range_of(&x).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(root.range_of(&[0.4, 0.4, 0.4]).unwrap(), 0.0);
        let a = dop("[{1}>_1{2,3}]", 2);
        assert!((a.range_of(&x).unwrap() - 0.3).abs() < 1e-15);
        assert!((a.gap_of(&x).unwrap() - 0.4).abs() < 1e-15);
        let b = dop("[{1,2}>_1{3}]", 2);
        assert!((b.gap_of(&x).unwrap() - 0.3).abs() < 1e-15);
        let c = dop("[{2}>_1{1,3}]", 2);
        assert!((c.gap_of(&x).unwrap() + 0.4).abs() < 1e-15);
        assert!(b.range_of(&x).is_err());
        assert!(root.gap_of(&x).is_err());
    }

    #[test]
    fn p_star_sorts_and_breaks_ties_by_index() {
        assert_eq!(p_star(&[0.9, 0.5, 0.2], 2).unwrap(), dop("[{1,2}>_1{3}]", 2));
        assert_eq!(p_star(&[0.5, 0.5, 0.5], 2).unwrap(), dop("[{1,2}>_1{3}]", 2));
        // gap of the special vertex equals the m-th minus (m+1)-th sorted value
        let x = [0.3, 0.8, 0.1, 0.6];
        let ps = p_star(&x, 2).unwrap();
        assert!((ps.gap_of(&x).unwrap() - (0.6 - 0.3)).abs() < 1e-15);
    }

    #[test]
    fn feas_examples() {
        let root = Dop::root(3, 2).unwrap();
        assert_eq!(root.feas(), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        let a = dop("[{1}>_1{2,3}]", 2);
        assert_eq!(a.feas(), vec![vec![0, 1], vec![0, 2]]);
        let leaf = dop("[{1,2}>_1{3}]", 2);
        assert_eq!(leaf.feas(), vec![vec![0, 1]]);
    }

    #[test]
    fn tree_3_2_has_nine_leaves_and_four_inner_nodes() {
        let all = enumerate_vertices(3, 2, None).unwrap();
        let leaves = all.iter().filter(|v| v.is_leaf()).count();
        assert_eq!(leaves, 9);
        assert_eq!(all.len() - leaves, 4);
    }

    #[test]
    fn leaf_and_inner_invariants_small_trees() {
        for (k, m) in [(3, 2), (4, 2), (4, 3), (5, 2), (5, 3), (5, 4)] {
            for v in enumerate_vertices(k, m, None).unwrap() {
                let ab = v.ab_sets();
                if v.is_leaf() {
                    assert_eq!(ab.a_set().len(), m);
                } else {
                    assert!(ab.a_set().len() < m);
                    assert!(ab.b_set().len() >= 2);
                }
            }
        }
    }

    #[test]
    fn render_parse_round_trip() {
        for v in enumerate_vertices(4, 2, None).unwrap() {
            let back = Dop::parse(&v.render(), 2).unwrap();
            assert_eq!(back, v);
        }
    }
}

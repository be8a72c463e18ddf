//! The gap-adaptive partition of `[0,1]^K` into tree vertices.
//!
//! [`partition_map`] descends the tree from the root, cutting the undecided
//! block at a per-depth fraction `c` of its value range. Three guard layers
//! stop the descent early:
//!
//! 1. a blue-region exit when the estimated top-`m` gap is at least
//!    `delta + eps`, returning the special depth-1 vertex immediately;
//! 2. a padding band below the blue region (width growing with depth) that
//!    parks the walk at the current vertex;
//! 3. skeleton bands around every ancestor's candidate cuts (width
//!    `(d+1) * 6 eps` at tree distance `d`) that also park the walk.
//!
//! The guards make the output stable under perturbations of `x` up to
//! `eps/2` per coordinate: outputs for nearby inputs are tree-adjacent.

use crate::dop::{p_star, sort_arms_desc, Dop};
use crate::error::{Error, Result};

/// Parameters of the partition map.
///
/// `cut_fractions[d]` is the cut fraction used at depth `d`; every entry
/// must lie in `[0, 1/K]` so a qualifying cut always exists. `eps` controls
/// all band widths and `delta` the blue-region threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionParams {
    cut_fractions: Vec<f64>,
    pub eps: f64,
    pub delta: f64,
}

impl PartitionParams {
    /// Validates fractions against `k` and positivity of `eps`/`delta`.
    pub fn new(cut_fractions: Vec<f64>, eps: f64, delta: f64, k: usize) -> Result<Self> {
        if cut_fractions.len() != k + 1 {
            return Err(Error::BadConfig(format!(
                "need {} cut fractions (one per depth), got {}",
                k + 1,
                cut_fractions.len()
            )));
        }
        let bound = 1.0 / k as f64;
        for (d, &c) in cut_fractions.iter().enumerate() {
            if !(0.0..=bound).contains(&c) || !c.is_finite() {
                return Err(Error::BadConfig(format!(
                    "cut fraction at depth {d} is {c}, outside [0, 1/{k}]"
                )));
            }
        }
        if !(eps.is_finite() && eps > 0.0 && delta.is_finite() && delta > 0.0) {
            return Err(Error::BadConfig(format!(
                "eps and delta must be finite and positive, got {eps}, {delta}"
            )));
        }
        Ok(PartitionParams {
            cut_fractions,
            eps,
            delta,
        })
    }

    /// Same fraction at every depth; test convenience.
    pub fn uniform(c: f64, eps: f64, delta: f64, k: usize) -> Result<Self> {
        Self::new(vec![c; k + 1], eps, delta, k)
    }

    pub fn cut_fraction_at(&self, depth: usize) -> f64 {
        self.cut_fractions[depth]
    }
}

/// One decision taken while mapping a point; forms the optional trace.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceStep {
    /// Blue-region exit fired with this top-`m` gap.
    EarlyExit { gap: f64 },
    /// Padding band parked the walk at `vertex`.
    Padding { vertex: Dop, gap: f64, threshold: f64 },
    /// A skeleton band around ancestor `ancestor`'s `j`-th prefix cut fired.
    Skeleton {
        ancestor: Dop,
        j: usize,
        deviation: f64,
        width: f64,
    },
    /// Descended into the `j`-th prefix child.
    Descend { child: Dop, gap: f64, threshold: f64 },
    /// The walk reached a leaf.
    Leaf { vertex: Dop },
}

/// Maps `x` to a tree vertex. See the module docs for the three guard layers.
pub fn partition_map(x: &[f64], params: &PartitionParams, m: usize) -> Result<Dop> {
    run(x, params, m, true, &mut None)
}

/// As [`partition_map`], also returning the ordered decision trace.
pub fn partition_map_traced(
    x: &[f64],
    params: &PartitionParams,
    m: usize,
) -> Result<(Dop, Vec<TraceStep>)> {
    let mut trace = Some(Vec::new());
    let out = run(x, params, m, true, &mut trace)?;
    Ok((out, trace.unwrap()))
}

/// The skeleton-only variant: no blue-region exit and no padding band.
/// This is the partition the earlier collision-free strategies used; the
/// harness exposes it as the single-phase baseline.
pub fn skeleton_partition_map(x: &[f64], params: &PartitionParams, m: usize) -> Result<Dop> {
    run(x, params, m, false, &mut None)
}

fn run(
    x: &[f64],
    params: &PartitionParams,
    m: usize,
    gap_exits: bool,
    trace: &mut Option<Vec<TraceStep>>,
) -> Result<Dop> {
    for (i, &v) in x.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::CoordinateOutOfRange { index: i, value: v });
        }
    }
    let special = p_star(x, m)?;
    let special_gap = special.gap_of(x)?;
    if gap_exits && special_gap >= params.delta + params.eps {
        push(trace, TraceStep::EarlyExit { gap: special_gap });
        return Ok(special);
    }

    let mut current = Dop::root(x.len(), m)?;
    // Ancestors of `current` (inclusive), each with the sorted order of its
    // undecided block and its range; reused by the skeleton re-checks.
    let mut path: Vec<(Dop, Vec<usize>, f64)> = Vec::new();
    loop {
        if current.is_leaf() {
            push(trace, TraceStep::Leaf { vertex: current.clone() });
            return Ok(current);
        }
        let depth = current.depth();
        if gap_exits {
            let threshold = params.delta - (depth as f64 + 2.0) * params.eps;
            if special_gap >= threshold {
                push(
                    trace,
                    TraceStep::Padding {
                        vertex: current.clone(),
                        gap: special_gap,
                        threshold,
                    },
                );
                return Ok(current);
            }
        }

        let b_order = sorted_b(&current, x);
        let b_range = current.range_of(x)?;
        path.push((current.clone(), b_order.clone(), b_range));

        for (q, q_order, q_range) in &path {
            let dist = depth - q.depth();
            let width = (dist as f64 + 1.0) * 6.0 * params.eps;
            let target = params.cut_fraction_at(q.depth()) * q_range;
            for j in 1..q_order.len() {
                let child = q.split_b(&q_order[..j]);
                let deviation = (child.gap_of(x)? - target).abs();
                if deviation <= width {
                    push(
                        trace,
                        TraceStep::Skeleton {
                            ancestor: q.clone(),
                            j,
                            deviation,
                            width,
                        },
                    );
                    return Ok(current);
                }
            }
        }

        let threshold = params.cut_fraction_at(depth) * b_range;
        let child = first_qualifying_child(&current, &b_order, x, threshold)?
            .ok_or(Error::NoQualifyingChild { threshold })?;
        push(
            trace,
            TraceStep::Descend {
                child: child.clone(),
                gap: child.gap_of(x)?,
                threshold,
            },
        );
        current = child;
    }
}

/// First prefix child (ascending split point) whose cut is at least
/// `threshold`. Existence is guaranteed when `threshold <= range/K`;
/// callers treat `None` as a contract violation.
pub fn large_cut_child(p: &Dop, x: &[f64], threshold: f64) -> Result<Dop> {
    if p.is_leaf() {
        return Err(Error::RangeOfLeaf);
    }
    let order = sorted_b(p, x);
    first_qualifying_child(p, &order, x, threshold)?.ok_or(Error::NoQualifyingChild { threshold })
}

fn first_qualifying_child(
    p: &Dop,
    b_order: &[usize],
    x: &[f64],
    threshold: f64,
) -> Result<Option<Dop>> {
    for j in 1..b_order.len() {
        let child = p.split_b(&b_order[..j]);
        if child.gap_of(x)? >= threshold {
            return Ok(Some(child));
        }
    }
    Ok(None)
}

/// Undecided block of `p` sorted by descending `x` (ties: ascending index).
fn sorted_b(p: &Dop, x: &[f64]) -> Vec<usize> {
    let order = sort_arms_desc(x);
    let ab = p.ab_sets();
    order
        .into_iter()
        .filter(|a| ab.b_set().contains(a))
        .collect()
}

fn push(trace: &mut Option<Vec<TraceStep>>, step: TraceStep) {
    if let Some(t) = trace {
        t.push(step);
    }
}

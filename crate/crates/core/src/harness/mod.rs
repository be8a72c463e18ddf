//! Experiment orchestration: single trials, gap sweeps, invariant
//! monitors, and file outputs.
//!
//! A trial wires `m` strategy instances to one environment and runs the
//! full horizon, recording regret, collisions, and whether the runtime
//! invariants held (violations are recorded with their first witnessing
//! step, never aborted on). Trials are embarrassingly parallel across
//! seeds; everything is deterministic given `(config, seeds)`.

mod config;
mod omega;
mod report;
mod sweep;

pub use config::parse_key_values;
pub use omega::{check_omega, OmegaDiagnostics};
pub use report::{emit_csv, emit_plot, parse_csv};
pub use sweep::{pareto_reference, sample_instance_with_gap, sweep, SweepRow};

use crate::environment::{
    regret_increment, CollisionPolicy, Environment, FeedbackModel, FlipPolicy, Instance,
    Observation,
};
use crate::error::{Error, Result};
use crate::partition::{skeleton_partition_map, PartitionParams};
use crate::strategy::{
    act, observe, phase_times, Decision, PlayerState, Schedule, ScheduleConstants,
    SharedRandomness,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Which strategy the players run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// The full gap-adaptive strategy.
    Pareto,
    /// The skeleton-only partition with the one-phase `(1, T^{-1/2})`
    /// schedule: the earlier collision-free regime without a blue region,
    /// and hence without gap adaptivity.
    SinglePhaseBaseline,
    /// Each player greedily plays its own empirical argmax. Collides
    /// constantly; exists to show collision avoidance is not free.
    NaiveGreedy,
}

impl Algorithm {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pareto" => Ok(Algorithm::Pareto),
            "single_phase_baseline" => Ok(Algorithm::SinglePhaseBaseline),
            "naive_greedy" => Ok(Algorithm::NaiveGreedy),
            other => Err(Error::BadConfig(format!("unknown algorithm: {other}"))),
        }
    }
}

/// Cloneable selector for the feedback model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackKind {
    Undetectable,
    Weak,
    Strong,
    FullInfo,
    /// Adversary flips the observed bit of every colliding player.
    AdversarialFlip,
}

impl FeedbackKind {
    pub fn build(&self) -> FeedbackModel {
        match self {
            FeedbackKind::Undetectable => FeedbackModel::Undetectable,
            FeedbackKind::Weak => FeedbackModel::Weak,
            FeedbackKind::Strong => FeedbackModel::Strong,
            FeedbackKind::FullInfo => FeedbackModel::FullInfo,
            FeedbackKind::AdversarialFlip => {
                FeedbackModel::Adversarial(Box::new(FlipPolicy) as Box<dyn CollisionPolicy>)
            }
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "undetectable" => Ok(FeedbackKind::Undetectable),
            "weak" => Ok(FeedbackKind::Weak),
            "strong" => Ok(FeedbackKind::Strong),
            "full_info" => Ok(FeedbackKind::FullInfo),
            "adversarial" => Ok(FeedbackKind::AdversarialFlip),
            other => Err(Error::BadConfig(format!("unknown feedback model: {other}"))),
        }
    }
}

/// Everything one experiment needs. `deltas` holds the full normalized
/// threshold sequence `1 = D_0 > ... > D_J = T^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub m: usize,
    pub horizon: u64,
    pub deltas: Vec<f64>,
    pub means: Vec<f64>,
    pub trials: usize,
    pub shared_seed: u64,
    pub private_seed_base: u64,
    pub feedback: FeedbackKind,
    pub consts: ScheduleConstants,
    pub algorithm: Algorithm,
}

impl ExperimentConfig {
    /// The final `T^{-1/2}` threshold for a horizon.
    pub fn terminal_delta(horizon: u64) -> f64 {
        (horizon as f64).sqrt().recip()
    }

    /// Appends `T^{-1/2}` to interior thresholds `1 > d_1 > ...` if absent.
    pub fn complete_deltas(interior: &[f64], horizon: u64) -> Vec<f64> {
        let terminal = Self::terminal_delta(horizon);
        let mut v: Vec<f64> = interior.to_vec();
        if v.first() != Some(&1.0) {
            v.insert(0, 1.0);
        }
        if v.last().map(|&d| d > terminal * (1.0 + 1e-9)).unwrap_or(true) {
            v.push(terminal);
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.m >= self.k {
            return Err(Error::BadCounts { k: self.k, m: self.m });
        }
        if self.means.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: self.means.len(),
            });
        }
        if self.trials == 0 {
            return Err(Error::BadConfig("need at least one trial".into()));
        }
        Instance::new(self.means.clone(), self.m)?;
        Ok(())
    }

    fn instance(&self) -> Result<Instance> {
        Instance::new(self.means.clone(), self.m)
    }

    /// The schedule the baseline algorithm forces, regardless of `deltas`.
    fn effective_deltas(&self) -> Vec<f64> {
        match self.algorithm {
            Algorithm::SinglePhaseBaseline => {
                vec![1.0, Self::terminal_delta(self.horizon)]
            }
            _ => self.deltas.clone(),
        }
    }
}

/// Aggregated outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Cumulative conditional-expected regret.
    pub pseudo_regret: f64,
    /// Benchmark minus actually received rewards.
    pub realized_regret: f64,
    /// Geometrically downsampled `(t, cumulative pseudo-regret)` points.
    pub trajectory: Vec<(u64, f64)>,
    /// Contested (step, arm) events.
    pub collisions: u64,
    /// Order-sensitive digest of all plays and vertex changes.
    pub vertex_digest: u64,
    /// Steps at which some pair of vertices was not tree-adjacent.
    pub path_violations: u64,
    pub first_path_violation: Option<u64>,
    /// Steps after absorption with a vertex outside `{root, special}`.
    pub absorption_violations: u64,
    pub first_absorption_violation: Option<u64>,
    /// First step at which any player's vertex hit the true special cut.
    pub absorbed_at: Option<u64>,
    /// Steps at which an arm within `eps_t` of the top `m` was rejected.
    pub safe_margin_violations: u64,
    pub first_safe_margin_violation: Option<u64>,
    /// Concentration / proportional-exploration diagnostics.
    pub omega: OmegaDiagnostics,
}

/// Per-player counters at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerSnapshot {
    pub pulls: Vec<u64>,
    pub means: Vec<f64>,
    pub relevant_counts: Vec<u64>,
}

/// One checkpoint of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub t: u64,
    pub pseudo_regret: f64,
    pub players: Vec<PlayerSnapshot>,
}

/// Checkpointed trace retained for diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialTrace {
    pub checkpoints: Vec<Checkpoint>,
}

/// Runs one trial; see [`run_trial_with_trace`] for the trace-retaining
/// variant.
pub fn run_trial(config: &ExperimentConfig, seed_index: u64) -> Result<TrialResult> {
    run_trial_with_trace(config, seed_index).map(|(r, _)| r)
}

/// Simulates the full horizon with `m` strategy instances against one
/// environment. Invariants are asserted every step and recorded (with the
/// first witnessing step) rather than aborting the run.
pub fn run_trial_with_trace(
    config: &ExperimentConfig,
    seed_index: u64,
) -> Result<(TrialResult, TrialTrace)> {
    config.validate()?;
    let instance = config.instance()?;
    let k = config.k;
    let m = config.m;

    let shared = SharedRandomness::new(config.shared_seed.wrapping_add(seed_index), k);
    let schedule = phase_times(
        &config.effective_deltas(),
        k,
        config.horizon,
        &config.consts,
        &mut shared.phase_delta_rng(),
    )?;
    let mut env_rng = ChaCha8Rng::seed_from_u64(config.private_seed_base);
    env_rng.set_stream(seed_index);
    let mut env = Environment::new(instance.clone(), config.feedback.build(), env_rng);

    let mut players: Vec<PlayerState> = (0..m)
        .map(|x| PlayerState::new(x, k, m))
        .collect::<Result<_>>()?;
    let special_true = crate::dop::p_star(instance.means(), m)?;
    let mut sorted_means = instance.means().to_vec();
    sorted_means.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top_m_floor = sorted_means[m - 1];

    let mut result = TrialResult {
        pseudo_regret: 0.0,
        realized_regret: 0.0,
        trajectory: Vec::new(),
        collisions: 0,
        vertex_digest: FNV_OFFSET,
        path_violations: 0,
        first_path_violation: None,
        absorption_violations: 0,
        first_absorption_violation: None,
        absorbed_at: None,
        safe_margin_violations: 0,
        first_safe_margin_violation: None,
        omega: OmegaDiagnostics::default(),
    };
    let mut trace = TrialTrace::default();
    let mut reward_total = 0u64;
    let mut next_checkpoint = 1u64;
    let mut arms = vec![0usize; m];
    let mut vertices: Vec<Option<crate::dop::Dop>> = vec![None; m];
    let mut absorbed_before_this_step = false;

    for t in 1..=config.horizon {
        let pi = shared.permutation_at(t);
        for (x, state) in players.iter_mut().enumerate() {
            let decision = match config.algorithm {
                Algorithm::Pareto => act(state, t, &schedule, &shared, &pi)?,
                Algorithm::SinglePhaseBaseline => baseline_act(state, t, &schedule, &shared, &pi)?,
                Algorithm::NaiveGreedy => greedy_act(state, t, &schedule),
            };
            arms[x] = decision.arm;
            if vertices[x] != decision.vertex {
                if let Some(v) = &decision.vertex {
                    result.vertex_digest =
                        fnv_fold_str(result.vertex_digest, &format!("{t}:{x}:{v}"));
                }
                vertices[x] = decision.vertex;
            }
        }

        // Runtime invariant monitors (tree-based algorithms only).
        if config.algorithm != Algorithm::NaiveGreedy && t > schedule.warmup_len() {
            check_step_invariants(
                t,
                &vertices,
                &special_true,
                absorbed_before_this_step,
                top_m_floor,
                schedule.epsilon_at(t),
                instance.means(),
                &mut result,
            );
            if result.absorbed_at.is_none()
                && vertices.iter().flatten().any(|v| *v == special_true)
            {
                result.absorbed_at = Some(t);
            }
            absorbed_before_this_step = result.absorbed_at.is_some();
        }

        let feedback = env.step(&arms)?;
        let mut counts = vec![0u8; k];
        for &a in arms.iter() {
            counts[a] = counts[a].saturating_add(1);
        }
        result.collisions += counts.iter().filter(|&&c| c > 1).count() as u64;
        result.pseudo_regret += regret_increment(&instance, &arms);
        for (x, fb) in feedback.iter().enumerate() {
            reward_total += fb.reward as u64;
            match &fb.observation {
                Observation::Vector(v) => {
                    for (i, &bit) in v.iter().enumerate() {
                        observe(&mut players[x], i, bit);
                    }
                }
                obs => observe(&mut players[x], arms[x], obs.own_bit(arms[x])),
            }
            result.vertex_digest = fnv_fold(result.vertex_digest, arms[x] as u64 + 1);
        }

        if t == next_checkpoint || t == config.horizon {
            trace.checkpoints.push(Checkpoint {
                t,
                pseudo_regret: result.pseudo_regret,
                players: players
                    .iter()
                    .map(|p| PlayerSnapshot {
                        pulls: p.pulls().to_vec(),
                        means: p.means().to_vec(),
                        relevant_counts: p.relevant_counts().to_vec(),
                    })
                    .collect(),
            });
            while next_checkpoint <= t {
                next_checkpoint = ((next_checkpoint as f64) * 1.1).ceil() as u64;
            }
        }
    }

    result.realized_regret =
        config.horizon as f64 * instance.benchmark() - reward_total as f64;
    result.trajectory = trace
        .checkpoints
        .iter()
        .map(|c| (c.t, c.pseudo_regret))
        .collect();
    result.omega = check_omega(&trace, &instance, &schedule);
    Ok((result, trace))
}

#[allow(clippy::too_many_arguments)]
fn check_step_invariants(
    t: u64,
    vertices: &[Option<crate::dop::Dop>],
    special_true: &crate::dop::Dop,
    absorbed: bool,
    top_m_floor: f64,
    eps_t: f64,
    means: &[f64],
    result: &mut TrialResult,
) {
    // Pairwise adjacency: equal, or parent and child. Adjacent vertices
    // always share a root path.
    for i in 0..vertices.len() {
        for j in i + 1..vertices.len() {
            if let (Some(a), Some(b)) = (&vertices[i], &vertices[j]) {
                let adjacent =
                    a == b || a.parent().as_ref() == Some(b) || b.parent().as_ref() == Some(a);
                if !adjacent {
                    result.path_violations += 1;
                    result.first_path_violation.get_or_insert(t);
                }
            }
        }
    }
    // Absorption: once anyone has reached the true special cut, everyone
    // stays at the root or that cut.
    if absorbed {
        for v in vertices.iter().flatten() {
            if !v.is_root() && v != special_true {
                result.absorption_violations += 1;
                result.first_absorption_violation.get_or_insert(t);
            }
        }
    }
    // Safe margin: arms within eps_t of the top m stay in every player's
    // relevant set.
    for v in vertices.iter().flatten() {
        let ab = v.ab_sets();
        for (arm, &p) in means.iter().enumerate() {
            if p >= top_m_floor - eps_t
                && !ab.a_set().contains(&arm)
                && !ab.b_set().contains(&arm)
            {
                result.safe_margin_violations += 1;
                result.first_safe_margin_violation.get_or_insert(t);
            }
        }
    }
}

/// Baseline step: same warm-up, then the skeleton-only partition.
fn baseline_act(
    state: &mut PlayerState,
    t: u64,
    schedule: &Schedule,
    shared: &SharedRandomness,
    pi: &[usize],
) -> Result<Decision> {
    if t <= schedule.warmup_len() {
        return act(state, t, schedule, shared, pi);
    }
    let params = PartitionParams::new(
        shared.cut_fractions().to_vec(),
        schedule.epsilon_at(t),
        schedule.delta_at(t),
        state.arm_count(),
    )?;
    let vertex = skeleton_partition_map(state.means(), &params, state.player_count())?;
    let assignment = crate::coloring::color(&vertex, pi)?;
    let arm = assignment.arm_for_slot(state.index());
    let ab = vertex.ab_sets();
    for &i in ab.a_set().iter().chain(ab.b_set()) {
        state.mark_relevant(i);
    }
    Ok(Decision {
        arm,
        vertex: Some(vertex),
    })
}

/// Greedy foil: round-robin warm-up, then the empirical argmax.
fn greedy_act(state: &mut PlayerState, t: u64, schedule: &Schedule) -> Decision {
    let k = state.arm_count();
    if t <= schedule.warmup_len() {
        let arm = ((state.index() as u64 + t) % k as u64) as usize;
        return Decision { arm, vertex: None };
    }
    let mut best = 0;
    for i in 1..k {
        if state.means()[i] > state.means()[best] {
            best = i;
        }
    }
    Decision {
        arm: best,
        vertex: None,
    }
}

/// Runs `count` trials in parallel; output order is by seed index.
pub fn run_trials(config: &ExperimentConfig, count: usize) -> Result<Vec<TrialResult>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect()
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv_fold(mut hash: u64, value: u64) -> u64 {
    for byte in value.to_le_bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

fn fnv_fold_str(mut hash: u64, s: &str) -> u64 {
    for byte in s.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

//! The per-player decentralized strategy.
//!
//! Every player runs the same code against its own observations: a
//! round-robin warm-up, then at each step map the empirical means through
//! the partition and play the slot assigned by the shared coloring. All
//! coordination flows through [`SharedRandomness`] (cut fractions, phase
//! thresholds, per-step priority permutations), never through feedback.
//!
//! Scale constants come in two flavors. `paper` mode reproduces the exact
//! published formulas, whose multipliers make every desk-size horizon
//! vacuous; `desk` mode keeps each structural coupling (the
//! `delta`-window `[eps_{t_j}, 1.5 eps_{t_j}]`, the phase relation
//! `Delta_j >= 10 eps_{t_j}`, warm-up coverage of every arm) while
//! shrinking the multipliers to values that leave room for the dynamics to
//! play out in a few hundred thousand steps.

use crate::coloring::color;
use crate::dop::Dop;
use crate::error::{Error, Result};
use crate::partition::{partition_map, PartitionParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sub-stream ids on the shared ChaCha stream space; per-step permutations
/// use the timestep itself, so these sit far above any horizon.
const STREAM_CUT_FRACTIONS: u64 = 1 << 62;
const STREAM_PHASE_DELTAS: u64 = (1 << 62) + 1;

/// Scale constants for the schedule formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConstants {
    /// Multiplier in `eps_t` (`10^4` in paper mode).
    pub eps_mult: f64,
    /// Warm-up length multiplier (`10^9` in paper mode).
    pub warmup_mult: f64,
    /// Multiplier in the concentration-diagnostic radius. Desk runs keep
    /// the published slack ratio (the `10^4` accuracy multiplier over the
    /// `100 K^{3/2}` divisor) instead of tying the radius to the shrunken
    /// `eps_mult`, which would make the diagnostic fail vacuously.
    pub omega_mult: f64,
    /// Use the published formulas verbatim.
    pub paper_mode: bool,
}

impl Default for ScheduleConstants {
    fn default() -> Self {
        ScheduleConstants {
            eps_mult: 3.0,
            warmup_mult: 20.0,
            omega_mult: 1e4,
            paper_mode: false,
        }
    }
}

impl ScheduleConstants {
    pub fn paper() -> Self {
        ScheduleConstants {
            eps_mult: 1e4,
            warmup_mult: 1e9,
            omega_mult: 1e4,
            paper_mode: true,
        }
    }
}

/// Accuracy scale at time `t`: `eps_mult * sqrt(K^3 log(KT) / t)` in paper
/// mode, with `K^3` relaxed to `K` at desk scale.
pub fn epsilon_t(t: u64, k: usize, horizon: u64, consts: &ScheduleConstants) -> f64 {
    let kf = k as f64;
    let log_kt = (kf * horizon as f64).ln();
    let k_factor = if consts.paper_mode { kf.powi(3) } else { kf };
    consts.eps_mult * (k_factor * log_kt / t as f64).sqrt()
}

/// Enforces the ratio condition `Delta_j >= 2 Delta_{j+1}` by dropping
/// interior thresholds, preserving both endpoints.
pub fn normalize_schedule(deltas: &[f64]) -> Result<Vec<f64>> {
    if deltas.len() < 2 {
        return Err(Error::BadSchedule("need at least two thresholds".into()));
    }
    if deltas[0] != 1.0 {
        return Err(Error::BadSchedule(format!(
            "first threshold must be 1, got {}",
            deltas[0]
        )));
    }
    for w in deltas.windows(2) {
        if !(w[1] > 0.0 && w[1] < w[0]) {
            return Err(Error::BadSchedule(format!(
                "thresholds must decrease strictly within (0, 1]: {deltas:?}"
            )));
        }
    }
    let last = *deltas.last().unwrap();
    let mut kept = vec![deltas[0]];
    for &d in &deltas[1..deltas.len() - 1] {
        if *kept.last().unwrap() >= 2.0 * d {
            kept.push(d);
        }
    }
    // The final threshold always survives; interior ones too close above it
    // give way.
    while kept.len() > 1 && *kept.last().unwrap() < 2.0 * last {
        kept.pop();
    }
    kept.push(last);
    Ok(kept)
}

/// Phase layout of one run: thresholds, phase start times, blue-region
/// widths, and the warm-up length.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    deltas: Vec<f64>,
    phase_starts: Vec<u64>,
    delta_values: Vec<f64>,
    t0_warmup: u64,
    horizon: u64,
    k: usize,
    consts: ScheduleConstants,
    vacuous: bool,
}

/// Computes phase start times and draws the per-phase blue-region widths
/// from the shared stream.
///
/// Paper mode: `t_j = ceil(10^10 K^3 log(KT) / Delta_j^2)`. Desk mode:
/// `t_j = min{ t : eps_t <= Delta_j / 10 }`, preserving the relation
/// `Delta_j >= 10 eps_{t_j}` the late-phase argument needs. Each phase's
/// width is uniform in `[eps_{t_j}, 1.5 eps_{t_j}]` and constant within the
/// phase; before the first phase starts the phase-0 width applies.
pub fn phase_times(
    deltas: &[f64],
    k: usize,
    horizon: u64,
    consts: &ScheduleConstants,
    shared_rng: &mut impl Rng,
) -> Result<Schedule> {
    let norm = normalize_schedule(deltas)?;
    if norm != deltas {
        return Err(Error::BadSchedule(format!(
            "thresholds are not 2-separated; normalize first: {deltas:?}"
        )));
    }
    let root_t = (horizon as f64).sqrt().recip();
    let last = *deltas.last().unwrap();
    if (last - root_t).abs() > 1e-9 * root_t {
        return Err(Error::BadSchedule(format!(
            "last threshold must be T^(-1/2) = {root_t}, got {last}"
        )));
    }

    let kf = k as f64;
    let log_kt = (kf * horizon as f64).ln();
    let mut phase_starts = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let t = if consts.paper_mode {
            (1e10 * kf.powi(3) * log_kt / (d * d)).ceil() as u64
        } else {
            let guess = (100.0 * consts.eps_mult * consts.eps_mult * kf * log_kt / (d * d)).ceil();
            let mut t = (guess as u64).max(1);
            while epsilon_t(t, k, horizon, consts) > d / 10.0 {
                t += 1;
            }
            while t > 1 && epsilon_t(t - 1, k, horizon, consts) <= d / 10.0 {
                t -= 1;
            }
            t
        };
        phase_starts.push(t.max(1));
    }
    if phase_starts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadSchedule(format!(
            "phase starts are not strictly increasing: {phase_starts:?}"
        )));
    }
    let delta_values: Vec<f64> = phase_starts
        .iter()
        .map(|&t| {
            let e = epsilon_t(t, k, horizon, consts);
            shared_rng.random_range(e..1.5 * e)
        })
        .collect();
    let t0_warmup = ((consts.warmup_mult * kf * log_kt).ceil() as u64).max(k as u64);
    let vacuous = *phase_starts.last().unwrap() > horizon;
    Ok(Schedule {
        deltas: deltas.to_vec(),
        phase_starts,
        delta_values,
        t0_warmup,
        horizon,
        k,
        consts: *consts,
        vacuous,
    })
}

impl Schedule {
    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn phase_starts(&self) -> &[u64] {
        &self.phase_starts
    }

    pub fn delta_values(&self) -> &[f64] {
        &self.delta_values
    }

    pub fn warmup_len(&self) -> u64 {
        self.t0_warmup
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn constants(&self) -> &ScheduleConstants {
        &self.consts
    }

    /// True when the final phase starts beyond the horizon. A warning
    /// condition, not an error: earlier phases still run.
    pub fn is_vacuous(&self) -> bool {
        self.vacuous
    }

    /// Index of the phase containing `t` (0 before the first phase starts).
    pub fn phase_of(&self, t: u64) -> usize {
        match self.phase_starts.iter().rposition(|&s| s <= t) {
            Some(j) => j,
            None => 0,
        }
    }

    /// Blue-region width at time `t`.
    pub fn delta_at(&self, t: u64) -> f64 {
        self.delta_values[self.phase_of(t)]
    }

    pub fn epsilon_at(&self, t: u64) -> f64 {
        epsilon_t(t, self.k, self.horizon, &self.consts)
    }
}

/// Randomness shared by all players: cut fractions (one per depth), the
/// phase width stream, and per-step priority permutations. Everything is
/// derived counter-style from one seed, so players evaluate it
/// independently without contention and replays are exact.
#[derive(Debug, Clone)]
pub struct SharedRandomness {
    seed: u64,
    k: usize,
    cut_fractions: Vec<f64>,
}

impl SharedRandomness {
    pub fn new(seed: u64, k: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_CUT_FRACTIONS);
        let bound = 1.0 / k as f64;
        let cut_fractions = (0..=k).map(|_| rng.random_range(0.0..bound)).collect();
        SharedRandomness {
            seed,
            k,
            cut_fractions,
        }
    }

    /// The depth-indexed cut fractions, i.i.d. uniform on `[0, 1/K]`.
    pub fn cut_fractions(&self) -> &[f64] {
        &self.cut_fractions
    }

    /// Stream from which the schedule draws its per-phase widths.
    pub fn phase_delta_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(STREAM_PHASE_DELTAS);
        rng
    }

    /// Priority permutation for step `t`, identical for every player.
    pub fn permutation_at(&self, t: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t);
        let mut pi: Vec<usize> = (0..self.k).collect();
        pi.shuffle(&mut rng);
        pi
    }
}

/// One player's private bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerState {
    index: usize,
    k: usize,
    m: usize,
    pulls: Vec<u64>,
    reward_sums: Vec<u64>,
    means: Vec<f64>,
    relevant_counts: Vec<u64>,
}

impl PlayerState {
    pub fn new(index: usize, k: usize, m: usize) -> Result<Self> {
        if m == 0 || m >= k || index >= m {
            return Err(Error::BadCounts { k, m });
        }
        Ok(PlayerState {
            index,
            k,
            m,
            pulls: vec![0; k],
            reward_sums: vec![0; k],
            // Unpulled arms report 1/2; unreachable once warm-up has
            // covered every arm.
            means: vec![0.5; k],
            relevant_counts: vec![0; k],
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn arm_count(&self) -> usize {
        self.k
    }

    pub fn player_count(&self) -> usize {
        self.m
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    /// Empirical means per arm.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Steps so far in which each arm was in the relevant set of the
    /// visited vertex.
    pub fn relevant_counts(&self) -> &[u64] {
        &self.relevant_counts
    }

    /// Advances one relevant-set counter; for strategy variants that
    /// compute their own vertices outside [`act`].
    pub fn mark_relevant(&mut self, arm: usize) {
        self.relevant_counts[arm] += 1;
    }
}

/// The chosen arm plus the vertex that produced it (absent during warm-up).
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub arm: usize,
    pub vertex: Option<Dop>,
}

/// One strategy step: round-robin during warm-up, otherwise partition the
/// empirical means and play the assigned slot. Also advances the
/// relevant-set counters of every arm the visited vertex still tracks
/// (during warm-up, all arms).
pub fn act(
    state: &mut PlayerState,
    t: u64,
    schedule: &Schedule,
    shared: &SharedRandomness,
    pi: &[usize],
) -> Result<Decision> {
    if t <= schedule.warmup_len() {
        let arm = ((state.index as u64 + t) % state.k as u64) as usize;
        for n in state.relevant_counts.iter_mut() {
            *n += 1;
        }
        return Ok(Decision { arm, vertex: None });
    }
    debug_assert!(
        state.pulls.iter().all(|&n| n > 0),
        "warm-up must cover every arm"
    );
    let params = PartitionParams::new(
        shared.cut_fractions().to_vec(),
        schedule.epsilon_at(t),
        schedule.delta_at(t),
        state.k,
    )?;
    let vertex = partition_map(&state.means, &params, state.m)?;
    let assignment = color(&vertex, pi)?;
    let arm = assignment.arm_for_slot(state.index);
    let ab = vertex.ab_sets();
    debug_assert!(ab.a_set().contains(&arm) || ab.b_set().contains(&arm));
    for &i in ab.a_set().iter().chain(ab.b_set()) {
        state.relevant_counts[i] += 1;
    }
    Ok(Decision {
        arm,
        vertex: Some(vertex),
    })
}

/// Records one observation. Collisions are undetectable, so the update is
/// unconditional on whatever bit the environment reported.
pub fn observe(state: &mut PlayerState, arm: usize, y: bool) {
    state.pulls[arm] += 1;
    state.reward_sums[arm] += y as u64;
    state.means[arm] = state.reward_sums[arm] as f64 / state.pulls[arm] as f64;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> ScheduleConstants {
        ScheduleConstants::default()
    }

    fn full_deltas(interior: &[f64], horizon: u64) -> Vec<f64> {
        let mut v = vec![1.0];
        v.extend_from_slice(interior);
        v.push((horizon as f64).sqrt().recip());
        v
    }

    #[test]
    fn epsilon_matches_the_paper_formula() {
        let consts = ScheduleConstants::paper();
        let t = 12345;
        let expect = 1e4 * (27.0 * (3e6_f64).ln() / t as f64).sqrt();
        assert_eq!(epsilon_t(t, 3, 1_000_000, &consts), expect);
    }

    #[test]
    fn epsilon_quarters_time_halves_value_exactly() {
        for consts in [desk(), ScheduleConstants::paper()] {
            for t in [1u64, 7, 100, 40_000] {
                let e1 = epsilon_t(t, 4, 200_000, &consts);
                let e4 = epsilon_t(4 * t, 4, 200_000, &consts);
                assert_eq!(e4, e1 / 2.0);
            }
        }
    }

    #[test]
    fn epsilon_is_strictly_decreasing() {
        let consts = desk();
        let mut prev = f64::INFINITY;
        for t in 1..2000u64 {
            let e = epsilon_t(t, 3, 100_000, &consts);
            assert!(e < prev);
            prev = e;
        }
    }

    #[test]
    fn normalize_examples() {
        let dj = 0.01;
        assert_eq!(
            normalize_schedule(&[1.0, 0.5, 0.25, dj]).unwrap(),
            vec![1.0, 0.5, 0.25, dj]
        );
        assert_eq!(normalize_schedule(&[1.0, 0.9, dj]).unwrap(), vec![1.0, dj]);
        assert_eq!(normalize_schedule(&[1.0, dj]).unwrap(), vec![1.0, dj]);
        // an interior value too close above the endpoint gives way
        assert_eq!(
            normalize_schedule(&[1.0, 0.015, dj]).unwrap(),
            vec![1.0, dj]
        );
        assert!(normalize_schedule(&[1.0, 0.5, 0.6, dj]).is_err());
        assert!(normalize_schedule(&[0.9, dj]).is_err());
    }

    #[test]
    fn phase_starts_follow_the_inverse_square_law() {
        let horizon = 200_000;
        for consts in [desk(), ScheduleConstants::paper()] {
            let shared = SharedRandomness::new(1, 3);
            let sched = phase_times(
                &full_deltas(&[0.4, 0.2], horizon),
                3,
                horizon,
                &consts,
                &mut shared.phase_delta_rng(),
            )
            .unwrap();
            let t = sched.phase_starts();
            let ratio = t[2] as f64 / t[1] as f64;
            assert!((ratio - 4.0).abs() < 0.01, "ratio {ratio}");
        }
    }

    #[test]
    fn desk_phase_starts_are_minimal() {
        let horizon = 200_000;
        let shared = SharedRandomness::new(2, 3);
        let sched = phase_times(
            &full_deltas(&[0.3], horizon),
            3,
            horizon,
            &desk(),
            &mut shared.phase_delta_rng(),
        )
        .unwrap();
        for (j, &tj) in sched.phase_starts().iter().enumerate() {
            let d = sched.deltas()[j];
            assert!(sched.epsilon_at(tj) <= d / 10.0);
            if tj > 1 {
                assert!(sched.epsilon_at(tj - 1) > d / 10.0);
            }
        }
        // widths land in the coupling window and are constant per phase
        for (j, &dv) in sched.delta_values().iter().enumerate() {
            let e = sched.epsilon_at(sched.phase_starts()[j]);
            assert!(dv >= e && dv <= 1.5 * e);
        }
    }

    #[test]
    fn equal_seeds_give_equal_widths() {
        let horizon = 200_000;
        let deltas = full_deltas(&[0.5], horizon);
        let a = phase_times(
            &deltas,
            3,
            horizon,
            &desk(),
            &mut SharedRandomness::new(9, 3).phase_delta_rng(),
        )
        .unwrap();
        let b = phase_times(
            &deltas,
            3,
            horizon,
            &desk(),
            &mut SharedRandomness::new(9, 3).phase_delta_rng(),
        )
        .unwrap();
        assert_eq!(a, b);
        let c = phase_times(
            &deltas,
            3,
            horizon,
            &desk(),
            &mut SharedRandomness::new(10, 3).phase_delta_rng(),
        )
        .unwrap();
        assert_ne!(a.delta_values(), c.delta_values());
    }

    #[test]
    fn vacuous_schedules_are_flagged_not_rejected() {
        let horizon = 200_000;
        let shared = SharedRandomness::new(3, 3);
        let sched = phase_times(
            &full_deltas(&[0.1], horizon),
            3,
            horizon,
            &desk(),
            &mut shared.phase_delta_rng(),
        )
        .unwrap();
        assert!(sched.is_vacuous());
    }

    #[test]
    fn warmup_plays_round_robin() {
        let horizon = 200_000;
        let shared = SharedRandomness::new(4, 3);
        let sched = phase_times(
            &full_deltas(&[], horizon),
            3,
            horizon,
            &desk(),
            &mut shared.phase_delta_rng(),
        )
        .unwrap();
        let mut st = PlayerState::new(0, 3, 2).unwrap();
        let pi = shared.permutation_at(1);
        let d = act(&mut st, 1, &sched, &shared, &pi).unwrap();
        assert_eq!(d.arm, 1); // first player, t = 1: arm 2 of 1..K
        assert_eq!(d.vertex, None);
        assert_eq!(st.relevant_counts(), &[1, 1, 1]);
    }

    #[test]
    fn confident_players_split_the_top_arms() {
        let horizon = 200_000;
        let shared = SharedRandomness::new(5, 3);
        let consts = ScheduleConstants {
            eps_mult: 0.5,
            ..desk()
        };
        let sched = phase_times(
            &full_deltas(&[], horizon),
            3,
            horizon,
            &consts,
            &mut shared.phase_delta_rng(),
        )
        .unwrap();
        let mut players: Vec<PlayerState> = (0..2)
            .map(|x| PlayerState::new(x, 3, 2).unwrap())
            .collect();
        for st in players.iter_mut() {
            for _ in 0..9 {
                observe(st, 0, true);
            }
            observe(st, 0, false);
            observe(st, 1, true);
            observe(st, 1, false);
            for _ in 0..8 {
                observe(st, 2, false);
            }
            observe(st, 2, true);
            observe(st, 2, true);
            assert_eq!(st.means(), &[0.9, 0.5, 0.2]);
        }
        let t = 150_000;
        let pi = shared.permutation_at(t);
        let d0 = act(&mut players[0], t, &sched, &shared, &pi).unwrap();
        let d1 = act(&mut players[1], t, &sched, &shared, &pi).unwrap();
        let vertex = d0.vertex.clone().unwrap();
        assert_eq!(vertex, Dop::parse("[{1,2}>_1{3}]", 2).unwrap());
        assert_eq!(d1.vertex.unwrap(), vertex);
        let mut played = [d0.arm, d1.arm];
        played.sort_unstable();
        assert_eq!(played, [0, 1]);
    }

    #[test]
    fn observe_updates_means() {
        let mut st = PlayerState::new(0, 3, 2).unwrap();
        observe(&mut st, 0, true);
        assert_eq!(st.means()[0], 1.0);
        observe(&mut st, 0, false);
        assert_eq!(st.means()[0], 0.5);
        for i in 0..200 {
            observe(&mut st, i % 3, i % 7 < 3);
            assert!(st.means().iter().all(|q| (0.0..=1.0).contains(q)));
        }
    }

    #[test]
    fn permutations_are_deterministic_and_valid() {
        let shared = SharedRandomness::new(42, 5);
        for t in [1u64, 17, 3000] {
            let a = shared.permutation_at(t);
            let b = shared.permutation_at(t);
            assert_eq!(a, b);
            let mut sorted = a.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        }
        assert_ne!(shared.permutation_at(1), shared.permutation_at(2));
    }
}

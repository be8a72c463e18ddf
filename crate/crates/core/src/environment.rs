//! The stochastic multi-player bandit environment.
//!
//! Per step each player picks an arm, observes an independent Bernoulli
//! draw for it, and receives that draw as reward only if no other player
//! picked the same arm. Feedback variants range from undetectable
//! collisions (the default: observations are unaffected) to full
//! information (a fresh draw for every arm), plus an adversarial mode in
//! which a pluggable policy may corrupt the feedback of colliding players.

use crate::error::{Error, Result};
use rand::Rng;

/// A problem instance: Bernoulli means plus the number of players.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    means: Vec<f64>,
    m: usize,
}

impl Instance {
    pub fn new(means: Vec<f64>, m: usize) -> Result<Self> {
        let k = means.len();
        if m == 0 || m >= k {
            return Err(Error::BadCounts { k, m });
        }
        for (i, &p) in means.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::CoordinateOutOfRange { index: i, value: p });
            }
        }
        Ok(Instance { means, m })
    }

    pub fn arm_count(&self) -> usize {
        self.means.len()
    }

    pub fn player_count(&self) -> usize {
        self.m
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Means sorted descending.
    fn sorted_means(&self) -> Vec<f64> {
        let mut s = self.means.clone();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        s
    }

    /// The instance gap: m-th minus (m+1)-st largest mean.
    pub fn gap(&self) -> f64 {
        let s = self.sorted_means();
        s[self.m - 1] - s[self.m]
    }

    /// Sum of the top `m` means, the per-step benchmark.
    pub fn benchmark(&self) -> f64 {
        self.sorted_means()[..self.m].iter().sum()
    }

    /// Parses the plain-text form `K m p1 ... pK`.
    pub fn parse(text: &str) -> Result<Self> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() < 3 {
            return Err(Error::Parse("instance needs at least K m p1".into()));
        }
        let k: usize = tokens[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad K: {}", tokens[0])))?;
        let m: usize = tokens[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad m: {}", tokens[1])))?;
        if tokens.len() != 2 + k {
            return Err(Error::Parse(format!(
                "expected {} means, got {}",
                k,
                tokens.len() - 2
            )));
        }
        let means: Result<Vec<f64>> = tokens[2..]
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad mean: {t}")))
            })
            .collect();
        Instance::new(means?, m)
    }

    /// Renders the plain-text form `K m p1 ... pK`.
    pub fn render(&self) -> String {
        let mut s = format!("{} {}", self.arm_count(), self.m);
        for p in &self.means {
            s.push_str(&format!(" {p}"));
        }
        s
    }
}

/// What a player gets to see after a step.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    /// A single bit: the own-arm draw (undetectable / weak / adversarial).
    Bit(bool),
    /// The received reward plus an explicit collision flag.
    BitWithCollision { reward: bool, collided: bool },
    /// Independent draws for every arm.
    Vector(Vec<bool>),
}

impl Observation {
    /// The bit a mean-tracking player feeds into its own-arm estimate.
    pub fn own_bit(&self, arm: usize) -> bool {
        match self {
            Observation::Bit(b) => *b,
            Observation::BitWithCollision { reward, .. } => *reward,
            Observation::Vector(v) => v[arm],
        }
    }
}

/// An adversary that may rewrite the feedback of players involved in a
/// collision. It sees the full history (shared randomness included, since
/// nothing is hidden from it) and the realized draws of the current step.
pub trait CollisionPolicy: Send + Sync {
    fn corrupt(&self, history: &History, t: u64, player: usize, arm: usize, y: bool) -> bool;
}

/// Flips the observed bit of every colliding player.
#[derive(Debug, Default)]
pub struct FlipPolicy;

impl CollisionPolicy for FlipPolicy {
    fn corrupt(&self, _history: &History, _t: u64, _player: usize, _arm: usize, y: bool) -> bool {
        !y
    }
}

/// Collision/observation semantics.
pub enum FeedbackModel {
    /// Collisions have no effect on feedback; players observe their draw.
    Undetectable,
    /// Players observe the reward they received (0 on collision).
    Weak,
    /// As weak, plus an explicit collision flag.
    Strong,
    /// Players observe independent draws of all arms.
    FullInfo,
    /// Colliding players' observations pass through the policy.
    Adversarial(Box<dyn CollisionPolicy>),
}

impl std::fmt::Debug for FeedbackModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            FeedbackModel::Undetectable => "Undetectable",
            FeedbackModel::Weak => "Weak",
            FeedbackModel::Strong => "Strong",
            FeedbackModel::FullInfo => "FullInfo",
            FeedbackModel::Adversarial(_) => "Adversarial",
        };
        write!(f, "{name}")
    }
}

/// One step as the environment saw it.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub arms: Vec<usize>,
    pub draws: Vec<bool>,
    pub rewards: Vec<bool>,
}

/// Full play history, available to adversarial policies.
pub type History = Vec<StepRecord>;

/// Per-player outcome of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerFeedback {
    pub observation: Observation,
    pub reward: bool,
}

/// One trial's environment: the instance, the feedback model, and the
/// private randomness driving observations.
pub struct Environment<R: Rng> {
    instance: Instance,
    model: FeedbackModel,
    rng: R,
    history: History,
    t: u64,
}

impl<R: Rng> Environment<R> {
    pub fn new(instance: Instance, model: FeedbackModel, rng: R) -> Self {
        Environment {
            instance,
            model,
            rng,
            history: Vec::new(),
            t: 0,
        }
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    /// Executes one step: independent draws per player (even on the same
    /// arm), zero reward to every player whose arm was contested, and
    /// model-specific observations.
    pub fn step(&mut self, arms: &[usize]) -> Result<Vec<PlayerFeedback>> {
        let k = self.instance.arm_count();
        let m = self.instance.player_count();
        if arms.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: arms.len(),
            });
        }
        for &a in arms {
            if a >= k {
                return Err(Error::BadConfig(format!("arm {a} out of range")));
            }
        }
        self.t += 1;
        let mut count = vec![0usize; k];
        for &a in arms {
            count[a] += 1;
        }
        let draws: Vec<bool> = arms
            .iter()
            .map(|&a| self.rng.random::<f64>() < self.instance.means[a])
            .collect();
        let rewards: Vec<bool> = arms
            .iter()
            .zip(&draws)
            .map(|(&a, &y)| y && count[a] == 1)
            .collect();

        let out = arms
            .iter()
            .enumerate()
            .map(|(x, &a)| {
                let y = draws[x];
                let collided = count[a] > 1;
                let observation = match &self.model {
                    FeedbackModel::Undetectable => Observation::Bit(y),
                    FeedbackModel::Weak => Observation::Bit(rewards[x]),
                    FeedbackModel::Strong => Observation::BitWithCollision {
                        reward: rewards[x],
                        collided,
                    },
                    FeedbackModel::FullInfo => {
                        let mut v: Vec<bool> = (0..k)
                            .map(|i| self.rng.random::<f64>() < self.instance.means[i])
                            .collect();
                        v[a] = y;
                        Observation::Vector(v)
                    }
                    FeedbackModel::Adversarial(policy) => {
                        if collided {
                            Observation::Bit(policy.corrupt(&self.history, self.t, x, a, y))
                        } else {
                            Observation::Bit(y)
                        }
                    }
                };
                PlayerFeedback {
                    observation,
                    reward: rewards[x],
                }
            })
            .collect();
        if matches!(self.model, FeedbackModel::Adversarial(_)) {
            self.history.push(StepRecord {
                arms: arms.to_vec(),
                draws,
                rewards,
            });
        }
        Ok(out)
    }
}

/// Conditional expected per-step regret given the chosen arms: benchmark
/// minus the means of uncontested arms. The realized counterpart is the
/// benchmark minus received rewards; this one has far lower variance.
pub fn regret_increment(instance: &Instance, arms: &[usize]) -> f64 {
    let mut count = vec![0usize; instance.arm_count()];
    for &a in arms {
        count[a] += 1;
    }
    let achieved: f64 = arms
        .iter()
        .filter(|&&a| count[a] == 1)
        .map(|&a| instance.means[a])
        .sum();
    instance.benchmark() - achieved
}

/// One player's full-information history: per arm, the sequence of draws.
pub type FullInfoHistory = Vec<Vec<bool>>;

/// Permutes each arm's observation sequence independently and uniformly.
/// Per-arm counts and sums are untouched, so every mean-based statistic is
/// invariant; what it destroys is any reliance on observation order.
pub fn mean_based_wrapper(history: &FullInfoHistory, rng: &mut impl Rng) -> FullInfoHistory {
    use rand::seq::SliceRandom;
    history
        .iter()
        .map(|seq| {
            let mut s = seq.clone();
            s.shuffle(rng);
            s
        })
        .collect()
}

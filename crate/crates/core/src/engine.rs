//! One market replication: agents decide one after another, each searching
//! the alternatives in order of current popularity and stopping at the first
//! one whose utility beats the threshold.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{
    generate_environment, generate_preferences, AgentOutcome, AgentPreferences, Environment,
    MarketConfig, PopularityVector,
};
use crate::scalar::Scalar;
use crate::streams::StreamFamily;

/// Order in which one agent visits the alternatives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchPath {
    order: Vec<usize>,
}

impl SearchPath {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &i in &order {
            match seen.get_mut(i) {
                Some(slot) if !*slot => *slot = true,
                _ => return Err(Error::NotAPermutation(n)),
            }
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// True when counts are non-increasing along the path.
    pub fn follows_popularity(&self, popularity: &PopularityVector) -> bool {
        let counts = popularity.counts();
        self.order.len() == counts.len()
            && self.order.windows(2).all(|w| counts[w[0]] >= counts[w[1]])
    }
}

/// Most popular first; ties in uniformly random order from `rng`.
pub fn build_search_path<R: Rng + ?Sized>(popularity: &PopularityVector, rng: &mut R) -> SearchPath {
    let counts = popularity.counts();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.shuffle(rng);
    // Stable sort keeps the shuffled order inside each tie group.
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
    SearchPath { order }
}

/// Uniformly random visiting order, ignoring popularity.
pub fn random_search_path<R: Rng + ?Sized>(n_alternatives: usize, rng: &mut R) -> SearchPath {
    let mut order: Vec<usize> = (0..n_alternatives).collect();
    order.shuffle(rng);
    SearchPath { order }
}

/// Walks `path`, paying `search_cost` per alternative, and stops at the first
/// utility strictly above `threshold`. If none qualifies the agent takes the
/// best alternative seen, earliest on the path among equals.
pub fn run_agent<S: Scalar>(
    env: &Environment<S>,
    prefs: &AgentPreferences<S>,
    path: &SearchPath,
    threshold: S,
    search_cost: S,
) -> Result<AgentOutcome<S>> {
    let n = env.len();
    for (what, got) in [("agent preferences", prefs.len()), ("search path", path.len())] {
        if got != n {
            return Err(Error::LengthMismatch {
                what,
                expected: n,
                got,
            });
        }
    }
    if n == 0 {
        return Err(Error::config("n_alternatives", "market has no alternatives"));
    }
    let objective = env.objective_utilities();
    let subjective = prefs.subjective_utilities();

    let mut best = (path.order[0], S::neg_infinity());
    for (step, &index) in path.order.iter().enumerate() {
        let utility = objective[index] + subjective[index];
        if utility > best.1 {
            best = (index, utility);
        }
        if utility > threshold {
            return Ok(outcome(index, step + 1, utility, search_cost));
        }
    }
    Ok(outcome(best.0, n, best.1, search_cost))
}

fn outcome<S: Scalar>(chosen_index: usize, samples: usize, gross: S, cost: S) -> AgentOutcome<S> {
    AgentOutcome {
        chosen_index,
        samples,
        gross_utility: gross,
        net_utility: gross - S::of_count(samples) * cost,
    }
}

/// Everything recorded from one replication.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketResult<S = f64> {
    pub config: MarketConfig<S>,
    /// In decision order.
    pub outcomes: Vec<AgentOutcome<S>>,
    pub final_popularity: PopularityVector,
    /// Path quality of each agent's search path, in decision order.
    pub path_quality_trace: Vec<S>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PathRule {
    Popularity,
    Random,
}

/// Runs one replication with agents following popularity.
pub fn run_market<S: Scalar>(config: &MarketConfig<S>, streams: &StreamFamily) -> MarketResult<S> {
    let env = generate_environment(config, &mut streams.environment());
    simulate(config, &env, streams, PathRule::Popularity)
}

/// Runs one replication in which every agent searches in uniformly random
/// order. Popularity is still tallied for reporting.
pub fn run_random_baseline<S: Scalar>(
    config: &MarketConfig<S>,
    streams: &StreamFamily,
) -> MarketResult<S> {
    let env = generate_environment(config, &mut streams.environment());
    simulate(config, &env, streams, PathRule::Random)
}

/// [`run_market`] over a caller-supplied environment.
pub fn run_market_with_environment<S: Scalar>(
    config: &MarketConfig<S>,
    env: &Environment<S>,
    streams: &StreamFamily,
) -> Result<MarketResult<S>> {
    check_environment(config, env)?;
    Ok(simulate(config, env, streams, PathRule::Popularity))
}

/// [`run_random_baseline`] over a caller-supplied environment.
pub fn run_random_baseline_with_environment<S: Scalar>(
    config: &MarketConfig<S>,
    env: &Environment<S>,
    streams: &StreamFamily,
) -> Result<MarketResult<S>> {
    check_environment(config, env)?;
    Ok(simulate(config, env, streams, PathRule::Random))
}

fn check_environment<S: Scalar>(config: &MarketConfig<S>, env: &Environment<S>) -> Result<()> {
    if env.len() != config.n_alternatives() {
        return Err(Error::LengthMismatch {
            what: "environment",
            expected: config.n_alternatives(),
            got: env.len(),
        });
    }
    Ok(())
}

fn simulate<S: Scalar>(
    config: &MarketConfig<S>,
    env: &Environment<S>,
    streams: &StreamFamily,
    rule: PathRule,
) -> MarketResult<S> {
    let n_agents = config.n_agents();
    let scorer = PathQualityScorer::new(env);
    let mut popularity = PopularityVector::new(config.n_alternatives());
    let mut outcomes = Vec::with_capacity(n_agents);
    let mut path_quality_trace = Vec::with_capacity(n_agents);

    for agent in 0..n_agents {
        // Preferences are drawn before the path so the draw schedule does not
        // depend on the path rule.
        let mut rng = streams.agent(agent);
        let prefs = generate_preferences(config, &mut rng);
        let path = match rule {
            PathRule::Popularity => build_search_path(&popularity, &mut rng),
            PathRule::Random => random_search_path(config.n_alternatives(), &mut rng),
        };
        debug_assert!(rule == PathRule::Random || path.follows_popularity(&popularity));

        let outcome = run_agent(env, &prefs, &path, config.threshold(), config.search_cost())
            .expect("environment, preferences and path share the market size");
        popularity
            .record_choice(outcome.chosen_index)
            .expect("chosen index lies on the path");
        debug_assert_eq!(popularity.total(), agent as u64 + 1);

        path_quality_trace.push(scorer.score(&path));
        outcomes.push(outcome);
    }

    MarketResult {
        config: config.clone(),
        outcomes,
        final_popularity: popularity,
        path_quality_trace,
    }
}

/// Kendall tau-b between path position and objective utility, oriented so
/// that visiting alternatives in decreasing objective utility scores +1.
pub fn compute_path_quality<S: Scalar>(path: &SearchPath, env: &Environment<S>) -> Result<S> {
    if path.len() != env.len() {
        return Err(Error::LengthMismatch {
            what: "search path",
            expected: env.len(),
            got: path.len(),
        });
    }
    Ok(PathQualityScorer::new(env).score(path))
}

/// Ranks the objective utilities once so each path scores in O(N log N).
struct PathQualityScorer {
    ranks: Vec<u32>,
    tied_pairs: u64,
}

impl PathQualityScorer {
    fn new<S: Scalar>(env: &Environment<S>) -> Self {
        let utilities = env.objective_utilities();
        let mut by_value: Vec<usize> = (0..utilities.len()).collect();
        by_value.sort_by(|&a, &b| {
            utilities[a]
                .partial_cmp(&utilities[b])
                .expect("finite utilities")
        });
        let mut ranks = vec![0u32; utilities.len()];
        let mut tied_pairs = 0u64;
        let mut rank = 0u32;
        let mut group = 0u64;
        for (k, &i) in by_value.iter().enumerate() {
            if k > 0 && utilities[i] != utilities[by_value[k - 1]] {
                rank += 1;
                tied_pairs += group * group.saturating_sub(1) / 2;
                group = 0;
            }
            ranks[i] = rank;
            group += 1;
        }
        tied_pairs += group * group.saturating_sub(1) / 2;
        Self { ranks, tied_pairs }
    }

    fn score<S: Scalar>(&self, path: &SearchPath) -> S {
        let n = path.len() as u64;
        let all_pairs = n * n.saturating_sub(1) / 2;
        let untied = all_pairs - self.tied_pairs;
        if untied == 0 {
            return S::zero();
        }
        let mut sequence: Vec<u32> = path.order.iter().map(|&i| self.ranks[i]).collect();
        // Earlier position with strictly higher utility: concordant.
        let concordant = count_strict_inversions(&mut sequence);
        let discordant = untied - concordant;
        let numerator = S::of(concordant as f64) - S::of(discordant as f64);
        numerator / (S::of(all_pairs as f64) * S::of(untied as f64)).sqrt()
    }
}

/// Pairs `i < j` with `values[i] > values[j]`; sorts `values` as a side effect.
fn count_strict_inversions(values: &mut [u32]) -> u64 {
    let mut scratch = values.to_vec();
    sort_counting(values, &mut scratch)
}

fn sort_counting(values: &mut [u32], scratch: &mut [u32]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (left, right) = values.split_at_mut(mid);
        let (left_scratch, right_scratch) = scratch.split_at_mut(mid);
        sort_counting(left, left_scratch) + sort_counting(right, right_scratch)
    };
    let (mut i, mut j) = (0, mid);
    for slot in scratch.iter_mut().take(n) {
        if j >= n || (i < mid && values[i] <= values[j]) {
            *slot = values[i];
            i += 1;
        } else {
            *slot = values[j];
            count += (mid - i) as u64;
            j += 1;
        }
    }
    values.copy_from_slice(&scratch[..n]);
    count
}

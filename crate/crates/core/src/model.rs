//! Market parameters, utility draws and the popularity tally.
//!
//! An alternative's utility to an agent is the sum of an objective part,
//! shared by everyone, and a subjective part drawn privately per agent. The
//! diversity parameter `d` splits a unit total variance between them:
//! objective variance `1 - d`, subjective variance `d`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stopping::{solve_threshold, GaussianSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig<S = f64> {
    n_alternatives: usize,
    n_agents: usize,
    diversity: S,
    search_cost: S,
    objective_mean: S,
    subjective_mean: S,
    threshold: S,
    threshold_overridden: bool,
}

impl<S: Scalar> MarketConfig<S> {
    /// Zero-mean market whose threshold is the random-search reservation
    /// value for `search_cost`.
    pub fn new(n_alternatives: usize, n_agents: usize, diversity: S, search_cost: S) -> Result<Self> {
        if n_alternatives == 0 {
            return Err(Error::config("n_alternatives", "must be at least 1"));
        }
        if n_agents == 0 {
            return Err(Error::config("n_agents", "must be at least 1"));
        }
        if !(diversity >= S::zero() && diversity <= S::one()) {
            return Err(Error::config(
                "diversity",
                format!("must lie in [0, 1], got {diversity}"),
            ));
        }
        if !(search_cost.is_finite() && search_cost > S::zero()) {
            return Err(Error::config(
                "search_cost",
                format!("must be finite and positive, got {search_cost}"),
            ));
        }
        let mut config = Self {
            n_alternatives,
            n_agents,
            diversity,
            search_cost,
            objective_mean: S::zero(),
            subjective_mean: S::zero(),
            threshold: S::zero(),
            threshold_overridden: false,
        };
        config.threshold = config.optimal_threshold()?;
        Ok(config)
    }

    /// Sets the component means. The threshold is re-solved unless it was
    /// overridden.
    pub fn with_means(mut self, objective_mean: S, subjective_mean: S) -> Result<Self> {
        for (field, value) in [
            ("objective_mean", objective_mean),
            ("subjective_mean", subjective_mean),
        ] {
            if !value.is_finite() {
                return Err(Error::config(field, format!("must be finite, got {value}")));
            }
        }
        self.objective_mean = objective_mean;
        self.subjective_mean = subjective_mean;
        if !self.threshold_overridden {
            self.threshold = self.optimal_threshold()?;
        }
        Ok(self)
    }

    pub fn with_threshold(mut self, threshold: S) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::config(
                "threshold",
                format!("must be finite, got {threshold}"),
            ));
        }
        self.threshold = threshold;
        self.threshold_overridden = true;
        Ok(self)
    }

    /// Distribution of a single alternative's total utility to one agent.
    pub fn total_utility_spec(&self) -> GaussianSpec<S> {
        GaussianSpec::new(self.objective_mean + self.subjective_mean, S::one())
            .expect("unit variance with finite means")
    }

    fn optimal_threshold(&self) -> Result<S> {
        Ok(solve_threshold(&self.total_utility_spec(), self.search_cost)?.threshold)
    }

    pub fn n_alternatives(&self) -> usize {
        self.n_alternatives
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn diversity(&self) -> S {
        self.diversity
    }

    pub fn search_cost(&self) -> S {
        self.search_cost
    }

    pub fn objective_mean(&self) -> S {
        self.objective_mean
    }

    pub fn subjective_mean(&self) -> S {
        self.subjective_mean
    }

    pub fn threshold(&self) -> S {
        self.threshold
    }

    pub fn objective_variance(&self) -> S {
        S::one() - self.diversity
    }

    pub fn subjective_variance(&self) -> S {
        self.diversity
    }
}

/// Objective utilities of every alternative for one replication.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment<S = f64> {
    objective_utilities: Vec<S>,
}

impl<S: Scalar> Environment<S> {
    pub fn from_utilities(objective_utilities: Vec<S>) -> Result<Self> {
        if objective_utilities.iter().any(|u| !u.is_finite()) {
            return Err(Error::config("objective_utilities", "entries must be finite"));
        }
        Ok(Self {
            objective_utilities,
        })
    }

    pub fn objective_utilities(&self) -> &[S] {
        &self.objective_utilities
    }

    pub fn len(&self) -> usize {
        self.objective_utilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objective_utilities.is_empty()
    }
}

/// One agent's subjective utilities.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentPreferences<S = f64> {
    subjective_utilities: Vec<S>,
}

impl<S: Scalar> AgentPreferences<S> {
    pub fn from_utilities(subjective_utilities: Vec<S>) -> Result<Self> {
        if subjective_utilities.iter().any(|u| !u.is_finite()) {
            return Err(Error::config("subjective_utilities", "entries must be finite"));
        }
        Ok(Self {
            subjective_utilities,
        })
    }

    pub fn subjective_utilities(&self) -> &[S] {
        &self.subjective_utilities
    }

    pub fn len(&self) -> usize {
        self.subjective_utilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjective_utilities.is_empty()
    }
}

/// Number of past choices per alternative.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopularityVector {
    counts: Vec<u64>,
}

impl PopularityVector {
    pub fn new(n_alternatives: usize) -> Self {
        Self {
            counts: vec![0; n_alternatives],
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Number of choices recorded so far.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn record_choice(&mut self, index: usize) -> Result<()> {
        let len = self.counts.len();
        let slot = self
            .counts
            .get_mut(index)
            .ok_or(Error::IndexOutOfRange { index, len })?;
        *slot += 1;
        Ok(())
    }
}

/// What one agent chose and what it cost them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentOutcome<S = f64> {
    pub chosen_index: usize,
    /// Alternatives sampled, each paid for.
    pub samples: usize,
    pub gross_utility: S,
    /// `gross_utility - samples * search_cost`.
    pub net_utility: S,
}

fn draw_normal<S: Scalar, R: Rng + ?Sized>(mean: S, variance: S, n: usize, rng: &mut R) -> Vec<S> {
    if variance == S::zero() {
        return vec![mean; n];
    }
    let sd = variance.sqrt();
    (0..n).map(|_| mean + sd * S::standard_normal(rng)).collect()
}

/// Draws the objective utilities shared by all agents in a replication.
pub fn generate_environment<S: Scalar, R: Rng + ?Sized>(
    config: &MarketConfig<S>,
    rng: &mut R,
) -> Environment<S> {
    Environment {
        objective_utilities: draw_normal(
            config.objective_mean,
            config.objective_variance(),
            config.n_alternatives,
            rng,
        ),
    }
}

/// Draws one agent's subjective utilities for every alternative.
pub fn generate_preferences<S: Scalar, R: Rng + ?Sized>(
    config: &MarketConfig<S>,
    rng: &mut R,
) -> AgentPreferences<S> {
    AgentPreferences {
        subjective_utilities: draw_normal(
            config.subjective_mean,
            config.subjective_variance(),
            config.n_alternatives,
            rng,
        ),
    }
}

/// Total utility of alternative `index` to the agent holding `prefs`.
pub fn agent_utility<S: Scalar>(
    env: &Environment<S>,
    prefs: &AgentPreferences<S>,
    index: usize,
) -> Result<S> {
    let len = env.len();
    if prefs.len() != len {
        return Err(Error::LengthMismatch {
            what: "agent preferences",
            expected: len,
            got: prefs.len(),
        });
    }
    match (env.objective_utilities.get(index), prefs.subjective_utilities.get(index)) {
        (Some(&o), Some(&s)) => Ok(o + s),
        _ => Err(Error::IndexOutOfRange { index, len }),
    }
}

//! Monte Carlo simulation of markets in which agents search alternatives in
//! order of popularity and stop at a fixed reservation value.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); every
//! generic type defaults to `f64`, and the `*32` / `*64` aliases below name
//! the concrete instantiations.

pub mod cli;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod model;
pub mod scalar;
pub mod stopping;
pub mod streams;

pub use engine::{
    build_search_path, compute_path_quality, random_search_path, run_agent, run_market,
    run_market_with_environment, run_random_baseline, run_random_baseline_with_environment,
    MarketResult, SearchPath,
};
pub use error::{Error, Result};
pub use experiment::{
    position_profile, run_sweep, run_sweep_with, AggregateRecord, PositionProfile, SweepConfig,
    SweepOutput,
};
pub use model::{
    agent_utility, generate_environment, generate_preferences, AgentOutcome, AgentPreferences,
    Environment, MarketConfig, PopularityVector,
};
pub use scalar::Scalar;
pub use stopping::{expected_excess, solve_threshold, GaussianSpec, ThresholdSolution};
pub use streams::{derive_streams, StreamFamily};

pub type MarketConfig64 = MarketConfig<f64>;
pub type MarketConfig32 = MarketConfig<f32>;
pub type Environment64 = Environment<f64>;
pub type Environment32 = Environment<f32>;
pub type AgentPreferences64 = AgentPreferences<f64>;
pub type AgentPreferences32 = AgentPreferences<f32>;
pub type AgentOutcome64 = AgentOutcome<f64>;
pub type AgentOutcome32 = AgentOutcome<f32>;
pub type MarketResult64 = MarketResult<f64>;
pub type MarketResult32 = MarketResult<f32>;
pub type GaussianSpec64 = GaussianSpec<f64>;
pub type GaussianSpec32 = GaussianSpec<f32>;
pub type ThresholdSolution64 = ThresholdSolution<f64>;
pub type ThresholdSolution32 = ThresholdSolution<f32>;
pub type SweepConfig64 = SweepConfig<f64>;
pub type SweepConfig32 = SweepConfig<f32>;
pub type AggregateRecord64 = AggregateRecord<f64>;
pub type AggregateRecord32 = AggregateRecord<f32>;

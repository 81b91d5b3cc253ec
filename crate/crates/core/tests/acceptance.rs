//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line
//! straight to stderr (bypassing capture) and then asserts the verdict.

mod common;

use std::fs;
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use popmarket::experiment::stats::{difference_se, mean, standard_error};
use popmarket::experiment::{execute_sweep, run_sweep_with, OutputOptions};
use popmarket::{
    expected_excess, generate_environment, run_market, solve_threshold, AggregateRecord,
    GaussianSpec, MarketConfig, PositionProfile, StreamFamily, SweepConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MASTER_SEED: u64 = 1;
const REPLICATIONS: usize = 200;
const LOW_COST: f64 = 0.125;
const HIGH_COST: f64 = 0.25;

fn report(criterion: u32, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {criterion}: {verdict} ({detail})\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Herding evidence collected from homogeneous (d = 0) cells.
#[derive(Default)]
struct HerdingTally {
    satisficed_reps: usize,
    violations: Vec<String>,
}

impl HerdingTally {
    fn inspect(&mut self, label: &str, rep: usize, result: &popmarket::MarketResult, cost: f64) {
        let first = result.outcomes[0];
        if first.gross_utility <= result.config.threshold() {
            return;
        }
        self.satisficed_reps += 1;
        for (i, o) in result.outcomes.iter().enumerate().skip(1) {
            if o.chosen_index != first.chosen_index || o.samples != 1 || o.net_utility != o.gross_utility - cost {
                self.violations
                    .push(format!("{label} rep {rep} agent {}: {o:?}", i + 1));
                return;
            }
        }
    }
}

/// Paired per-replication difference between the last and first hundred agents.
fn decile_gap(result: &popmarket::MarketResult) -> f64 {
    let m = result.outcomes.len();
    let block = m / 10;
    let avg = |range: std::ops::Range<usize>| {
        mean(result.outcomes[range].iter().map(|o| o.gross_utility)).unwrap()
    };
    avg(m - block..m) - avg(0..block)
}

struct DeskSweep {
    records: Vec<AggregateRecord>,
    positions: Vec<PositionProfile>,
    herding: HerdingTally,
    decile_gaps: Vec<f64>,
    elapsed: Duration,
}

/// Full diversity grid at c = 1/8 with the random-order baseline.
fn desk_sweep() -> &'static DeskSweep {
    static SWEEP: OnceLock<DeskSweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let sweep = SweepConfig {
            cost_grid: vec![LOW_COST],
            replications: REPLICATIONS,
            master_seed: MASTER_SEED,
            include_baseline: true,
            ..SweepConfig::default()
        };
        let target_d = sweep
            .diversity_grid
            .iter()
            .position(|&d| (d - 0.2).abs() < 1e-12)
            .unwrap();
        let mut herding = HerdingTally::default();
        let mut decile_gaps = Vec::new();
        let start = Instant::now();
        let output = run_sweep_with(&sweep, None, |cell| {
            if cell.baseline {
                return Ok(());
            }
            for (rep, result) in cell.results.iter().enumerate() {
                if cell.diversity_index == 0 {
                    herding.inspect("c=1/8", rep, result, LOW_COST);
                }
                if cell.diversity_index == target_d {
                    decile_gaps.push(decile_gap(result));
                }
            }
            Ok(())
        })
        .unwrap();
        DeskSweep {
            records: output.records,
            positions: output.positions,
            herding,
            decile_gaps,
            elapsed: start.elapsed(),
        }
    })
}

struct HighCostSweep {
    records: Vec<AggregateRecord>,
    herding: HerdingTally,
}

/// d in {0, 0.5} at c = 1/4.
fn high_cost_sweep() -> &'static HighCostSweep {
    static SWEEP: OnceLock<HighCostSweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let sweep = SweepConfig {
            diversity_grid: vec![0.0, 0.5],
            cost_grid: vec![HIGH_COST],
            replications: REPLICATIONS,
            master_seed: MASTER_SEED,
            include_baseline: false,
            ..SweepConfig::default()
        };
        let mut herding = HerdingTally::default();
        let output = run_sweep_with(&sweep, None, |cell| {
            if cell.diversity_index == 0 {
                for (rep, result) in cell.results.iter().enumerate() {
                    herding.inspect("c=1/4", rep, result, HIGH_COST);
                }
            }
            Ok(())
        })
        .unwrap();
        HighCostSweep {
            records: output.records,
            herding,
        }
    })
}

fn record(records: &[AggregateRecord], d: f64, baseline: bool) -> &AggregateRecord {
    records
        .iter()
        .find(|r| (r.diversity - d).abs() < 1e-12 && r.baseline == baseline)
        .unwrap_or_else(|| panic!("no record for d={d} baseline={baseline}"))
}

fn net_gap(a: &AggregateRecord, b: &AggregateRecord) -> (f64, f64) {
    (
        a.mean_net - b.mean_net,
        difference_se(a.standard_error_net(), b.standard_error_net()),
    )
}

#[test]
fn criterion_1_threshold_table() {
    let published = [(2, 0.34), (3, 0.78), (4, 1.15), (5, 1.47), (6, 1.76), (7, 2.03), (8, 2.28)];
    let spec = GaussianSpec::standard();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (k, expected) in published {
        let solved = solve_threshold(&spec, 0.5f64.powi(k)).unwrap();
        worst = worst.max((solved.threshold - expected).abs());
    }
    let elapsed = start.elapsed();
    report(
        1,
        worst <= 0.005 && elapsed < Duration::from_secs(1),
        format!("max |T - table| = {worst:.4} <= 0.005, {elapsed:?} < 1s"),
    );
}

#[test]
fn criterion_2_excess_matches_quadrature() {
    let spec = GaussianSpec::standard();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..=200 {
        let t = -5.0 + 0.05 * i as f64;
        let closed = expected_excess(&spec, t);
        worst = worst.max((closed - common::excess_by_quadrature(0.0, 1.0, t)).abs());
    }
    let elapsed = start.elapsed();
    report(
        2,
        worst <= 1e-8 && elapsed < Duration::from_secs(5),
        format!("max abs error {worst:.2e} <= 1e-8 over 201 points, {elapsed:?} < 5s"),
    );
}

#[test]
fn criterion_3_interior_diversity_optimum() {
    let sweep = desk_sweep();
    let popularity: Vec<&AggregateRecord> = sweep.records.iter().filter(|r| !r.baseline).collect();
    let argmax = popularity
        .iter()
        .max_by(|a, b| a.mean_net.total_cmp(&b.mean_net))
        .unwrap();
    let interior = popularity
        .iter()
        .filter(|r| r.diversity > 0.0 && r.diversity < 1.0)
        .max_by(|a, b| a.mean_net.total_cmp(&b.mean_net))
        .unwrap();
    let (gap_low, se_low) = net_gap(interior, record(&sweep.records, 0.0, false));
    let (gap_high, se_high) = net_gap(interior, record(&sweep.records, 1.0, false));
    let argmax_ok = [0.1, 0.2, 0.3].iter().any(|d| (argmax.diversity - d).abs() < 1e-12);
    let pass = gap_low > 2.0 * se_low
        && gap_high > 2.0 * se_high
        && argmax_ok
        && sweep.elapsed < Duration::from_secs(180);
    report(
        3,
        pass,
        format!(
            "argmax d={} (net {:.4}); vs d=0 gap {:.4} = {:.1} SE; vs d=1 gap {:.4} = {:.1} SE; sweep {:.1?}",
            argmax.diversity,
            argmax.mean_net,
            gap_low,
            gap_low / se_low,
            gap_high,
            gap_high / se_high,
            sweep.elapsed
        ),
    );
}

#[test]
fn criterion_4_diversity_helps_at_high_cost() {
    let records = &high_cost_sweep().records;
    let (gap, se) = net_gap(record(records, 0.5, false), record(records, 0.0, false));
    report(
        4,
        gap >= 2.0 * se,
        format!("c=1/4: net(d=0.5) - net(d=0) = {gap:.4} = {:.1} SE >= 2", gap / se),
    );
}

#[test]
fn criterion_5_pure_subjective_matches_random_order() {
    let records = &desk_sweep().records;
    let (gap, se) = net_gap(record(records, 1.0, false), record(records, 1.0, true));
    report(
        5,
        gap.abs() <= 2.576 * se,
        format!("d=1: popularity - random = {gap:.4}, |z| = {:.2} <= 2.576", (gap / se).abs()),
    );
}

#[test]
fn criterion_6_homogeneous_herding() {
    let tallies = [&desk_sweep().herding, &high_cost_sweep().herding];
    let satisficed: usize = tallies.iter().map(|t| t.satisficed_reps).sum();
    let violations: Vec<&String> = tallies.iter().flat_map(|t| &t.violations).collect();
    let pass = satisficed > 0 && violations.is_empty();
    let detail = match violations.first() {
        Some(v) => format!("{} violations, first: {v}", violations.len()),
        None => format!("{satisficed} satisficing first agents, all followers sampled once at cost c"),
    };
    report(6, pass, detail);
}

#[test]
fn criterion_7_late_agents_do_better() {
    let sweep = desk_sweep();
    let gaps = &sweep.decile_gaps;
    let gap = mean(gaps.iter().copied()).unwrap();
    let se = standard_error(gaps);
    let profile = sweep
        .positions
        .iter()
        .find(|p| (p.diversity - 0.2).abs() < 1e-12 && (p.cost - LOW_COST).abs() < 1e-12)
        .unwrap();
    let first = profile.positions.first().unwrap();
    let last = profile.positions.last().unwrap();
    let pass = gaps.len() == REPLICATIONS
        && gap >= 2.0 * se
        && last.mean_path_quality > first.mean_path_quality;
    report(
        7,
        pass,
        format!(
            "d=0.2 c=1/8: gross(901..1000) - gross(1..100) = {gap:.4} = {:.1} SE; path quality {:.4} at {} vs {:.4} at {}",
            gap / se,
            last.mean_path_quality,
            last.agent_position,
            first.mean_path_quality,
            first.agent_position
        ),
    );
}

#[test]
fn criterion_8_invariants_and_reproducibility() {
    const CASES: usize = 10_000;
    let start = Instant::now();
    let mut draw = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut failures = Vec::new();
    for case in 0..CASES {
        let n = draw.random_range(1..16);
        let m = draw.random_range(1..30);
        let d = match case % 4 {
            0 => 0.0,
            1 => 1.0,
            _ => draw.random_range(0.0..=1.0),
        };
        let c = draw.random_range(-7.0f64..-0.7).exp();
        let config = MarketConfig::new(n, m, d, c).unwrap();
        let streams = StreamFamily::from_seed(draw.random());
        let env = generate_environment(&config, &mut streams.environment());
        let result = run_market(&config, &streams);
        if let Err(e) = common::check_market(&result, &env, &streams) {
            failures.push(format!("case {case}: {e}"));
        }
    }

    let sweep = SweepConfig {
        diversity_grid: vec![0.0, 0.2, 1.0],
        cost_grid: vec![LOW_COST, HIGH_COST],
        replications: 16,
        n_agents: 200,
        n_alternatives: 50,
        master_seed: MASTER_SEED,
        include_baseline: true,
        ..SweepConfig::default()
    };
    let options = OutputOptions {
        positions: true,
        per_agent: true,
    };
    let serial = tempfile::tempdir().unwrap();
    let parallel = tempfile::tempdir().unwrap();
    execute_sweep(&sweep, options, Some(1), serial.path(), |_| {}).unwrap();
    execute_sweep(&sweep, options, Some(4), parallel.path(), |_| {}).unwrap();
    let identical = ["aggregate.csv", "positions.csv", "agents.csv"].iter().all(|name| {
        fs::read(serial.path().join(name)).unwrap() == fs::read(parallel.path().join(name)).unwrap()
    });
    let elapsed = start.elapsed();

    let pass = failures.is_empty() && identical && elapsed < Duration::from_secs(120);
    report(
        8,
        pass,
        format!(
            "{CASES} randomized markets, {} invariant failures{}; outputs identical at 1 and 4 workers: {identical}; {elapsed:.1?} < 2 min",
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    );
}

#[test]
fn criterion_9_ordinal_reproduction() {
    // Criteria 3 to 7 compare simulated quantities with each other (signs,
    // orderings, standard-error multiples) rather than with absolute figures,
    // so passing them is the ordinal reproduction. This test only confirms
    // the compared quantities are well formed.
    let desk = desk_sweep();
    let high = high_cost_sweep();
    let finite = desk
        .records
        .iter()
        .chain(&high.records)
        .all(|r| r.mean_net.is_finite() && r.sd_net_across_reps.is_finite() && r.n_replications == REPLICATIONS);
    report(
        9,
        finite,
        format!(
            "{} aggregate rows compared ordinally only; no absolute-value targets",
            desk.records.len() + high.records.len()
        ),
    );
}

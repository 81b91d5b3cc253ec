//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use popmarket::{
    build_search_path, generate_preferences, Environment, MarketResult, PopularityVector,
    SearchPath, StreamFamily,
};

macro_rules! ensure {
    ($cond:expr) => {
        if !$cond {
            return Err(format!("{} failed at {}:{}", stringify!($cond), file!(), line!()));
        }
    };
}

macro_rules! ensure_eq {
    ($a:expr, $b:expr) => {
        if $a != $b {
            return Err(format!(
                "{} != {} ({:?} vs {:?}) at {}:{}",
                stringify!($a),
                stringify!($b),
                $a,
                $b,
                file!(),
                line!()
            ));
        }
    };
}

/// Normal density, written out directly.
pub fn gaussian_density(u: f64, mean: f64, variance: f64) -> f64 {
    let z = (u - mean) / variance.sqrt();
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `integral_T^inf (u - T) f(u) du` for a Normal(mean, variance) density,
/// truncated 14 standard deviations above the mean.
pub fn excess_by_quadrature(mean: f64, variance: f64, threshold: f64) -> f64 {
    let sd = variance.sqrt();
    let upper = mean + 14.0 * sd;
    if threshold >= upper {
        return 0.0;
    }
    let integrand = |u: f64| (u - threshold) * gaussian_density(u, mean, variance);
    // Split at the mean so the peak is always a panel boundary.
    if threshold < mean {
        adaptive_simpson(&integrand, threshold, mean, 1e-14)
            + adaptive_simpson(&integrand, mean, upper, 1e-14)
    } else {
        adaptive_simpson(&integrand, threshold, upper, 1e-14)
    }
}

/// Kendall tau-b between position and objective utility, by enumerating
/// every pair. Positive when earlier positions hold higher utilities.
pub fn kendall_tau_brute_force(order: &[usize], utilities: &[f64]) -> f64 {
    let ys: Vec<f64> = order.iter().map(|&i| utilities[i]).collect();
    let n = ys.len();
    let (mut concordant, mut discordant, mut tied) = (0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            if ys[i] > ys[j] {
                concordant += 1;
            } else if ys[i] < ys[j] {
                discordant += 1;
            } else {
                tied += 1;
            }
        }
    }
    let pairs = (n * n.saturating_sub(1) / 2) as f64;
    let untied = pairs - tied as f64;
    if untied == 0.0 {
        return 0.0;
    }
    (concordant - discordant) as f64 / (pairs * untied).sqrt()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Re-derives each agent's preferences and path from its stream, following
/// the documented draw order (preferences, then path), and checks every
/// per-agent invariant against the recorded outcome.
pub fn check_market(result: &MarketResult, env: &Environment, fam: &StreamFamily) -> Result<(), String> {
    let config = &result.config;
    let n = config.n_alternatives();
    let cost = config.search_cost();
    let threshold = config.threshold();
    let mut popularity = PopularityVector::new(n);
    ensure_eq!(result.outcomes.len(), config.n_agents());
    ensure_eq!(result.path_quality_trace.len(), config.n_agents());

    for (m, outcome) in result.outcomes.iter().enumerate() {
        let mut rng = fam.agent(m);
        let prefs = generate_preferences(config, &mut rng);
        let path = build_search_path(&popularity, &mut rng);

        ensure!(SearchPath::new(path.order().to_vec()).is_ok());
        ensure!(path.follows_popularity(&popularity));

        let utility = |i: usize| env.objective_utilities()[i] + prefs.subjective_utilities()[i];
        ensure!(outcome.samples >= 1 && outcome.samples <= n);
        let sampled = &path.order()[..outcome.samples];
        for &i in &sampled[..outcome.samples - 1] {
            ensure!(utility(i) <= threshold);
        }
        let last = *sampled.last().unwrap();
        if utility(last) > threshold {
            ensure_eq!(outcome.chosen_index, last);
        } else {
            ensure_eq!(outcome.samples, n);
        }
        ensure!(sampled.contains(&outcome.chosen_index));
        ensure_eq!(outcome.gross_utility, utility(outcome.chosen_index));
        ensure!(sampled.iter().all(|&i| utility(i) <= outcome.gross_utility));
        ensure_eq!(
            outcome.net_utility,
            outcome.gross_utility - outcome.samples as f64 * cost
        );
        ensure_eq!(
            result.path_quality_trace[m],
            kendall_tau_brute_force(path.order(), env.objective_utilities())
        );

        popularity.record_choice(outcome.chosen_index).unwrap();
        ensure_eq!(popularity.total(), m as u64 + 1);
    }
    ensure_eq!(&popularity, &result.final_popularity);
    Ok(())
}

//! Cross-check suite behind the `validate` command: closed forms against
//! series and matrix oracles, the 2D chain against its lumped form, and the
//! analytical pipeline against both simulator modes over a scenario grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aoi::{aoi_pmf, aoi_violation, average_aoi, build_aoi_matrix_truncated, AoiParams};
use crate::channel::mpr_strength;
use crate::deadline_queue::{
    action_partition, build_2d_action_chain, build_waiting_time_matrix, queue_metrics, verify_lumpability,
    QueueParams,
};
use crate::error::Result;
use crate::exec::{self, Execution};
use crate::markov::stationary;
use crate::sim::{
    occupancy_vs_stationary, simulate_with, transition_frequency_check, SimConfig, SimMode,
    DEFAULT_MIN_VISITS,
};
use crate::system::{analyze, sweep, AnalyticalReport, SweepAxis, SystemParams};

/// Published MPR strengths of the symmetric reference scenario.
pub const REFERENCE_DELTAS: [(f64, f64); 4] = [(-5.0, 1.5195), (-3.0, 1.3323), (0.0, 1.0), (1.0, 0.8854)];
pub const DELTA_TOLERANCE: f64 = 5e-4;
/// Analytical vs decoupled simulation: `max(rel · |analytical|, abs)`.
pub const DECOUPLED_REL_TOL: f64 = 0.01;
pub const DECOUPLED_ABS_TOL: f64 = 0.005;
/// Coupled user-1 metrics must lie within this many CI half-widths.
pub const COUPLED_CI_MULTIPLE: f64 = 3.0;
/// Relative tolerance of the coupled-mode average age against `1/μ2`.
pub const COUPLED_AOI_REL_TOL: f64 = 0.05;
pub const OCCUPANCY_TOLERANCE: f64 = 0.005;
/// Violation thresholds compared between analysis and simulation.
pub const VIOLATION_PROBES: [u64; 3] = [1, 5, 10];

/// Deliberate corruption of the analytical side, used to confirm the suite
/// can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    NegateDropRate,
}

impl std::str::FromStr for Fault {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "negate-drop-rate" => Ok(Fault::NegateDropRate),
            other => Err(format!("unknown fault `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    pub slots: u64,
    pub replications: u32,
    pub seed: u64,
    /// Levels shared by q1, q2 and λ.
    pub levels: Vec<f64>,
    pub deadlines: Vec<u32>,
    pub gammas_db: Vec<f64>,
    pub fault: Option<Fault>,
    pub execution: Execution,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            slots: 1_000_000,
            replications: 8,
            seed: 2024,
            levels: vec![0.2, 0.5, 0.8],
            deadlines: vec![1, 3, 5],
            gammas_db: vec![-5.0, 0.0, 1.0],
            fault: None,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridScenario {
    pub q1: f64,
    pub q2: f64,
    pub arrival_prob: f64,
    pub deadline: u32,
    pub gamma_db: f64,
}

impl GridScenario {
    pub fn params(&self) -> SystemParams {
        SystemParams::reference(self.gamma_db, self.q1, self.q2, self.arrival_prob, self.deadline)
    }
}

/// Full factorial over (q1, q2, λ) with deadline and threshold assigned by
/// the linear forms `i + j + k` and `i + 2j` modulo the list lengths. With
/// three levels each this is a strength-2 orthogonal array: every pair of
/// factors sees every level combination equally often.
pub fn scenario_grid(levels: &[f64], deadlines: &[u32], gammas_db: &[f64]) -> Vec<GridScenario> {
    let mut grid = Vec::new();
    for (i, &q1) in levels.iter().enumerate() {
        for (j, &q2) in levels.iter().enumerate() {
            for (k, &arrival_prob) in levels.iter().enumerate() {
                grid.push(GridScenario {
                    q1,
                    q2,
                    arrival_prob,
                    deadline: deadlines[(i + j + k) % deadlines.len()],
                    gamma_db: gammas_db[(i + 2 * j) % gammas_db.len()],
                });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub analytical: f64,
    pub simulated: f64,
    pub allowed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub scenario: GridScenario,
    pub decoupled: Vec<MetricComparison>,
    pub coupled_user1: Vec<MetricComparison>,
    /// `(simulated − 1/μ2) / (1/μ2)` in coupled mode.
    pub coupled_aoi_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub schema_version: u32,
    pub all_pass: bool,
    pub checks: Vec<CheckResult>,
    pub scenarios: Vec<ScenarioOutcome>,
}

fn compare(metric: &str, analytical: f64, simulated: f64, allowed: f64) -> MetricComparison {
    MetricComparison {
        metric: metric.to_string(),
        analytical,
        simulated,
        allowed,
        pass: (simulated - analytical).abs() <= allowed,
    }
}

fn corrupt(mut report: AnalyticalReport, fault: Option<Fault>) -> AnalyticalReport {
    if let Some(Fault::NegateDropRate) = fault {
        report.queue.drop_rate = -report.queue.drop_rate;
    }
    report
}

pub fn check_delta() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (gamma_db, expected) in REFERENCE_DELTAS {
        let p = SystemParams::reference(gamma_db, 0.5, 0.5, 0.5, 3);
        let delta = mpr_strength(&p.success_probs()?)?;
        worst = worst.max((delta - expected).abs());
        parts.push(format!("{gamma_db} dB: {delta:.4}"));
    }
    Ok(CheckResult::new(
        "mpr strength reproduction",
        worst < DELTA_TOLERANCE,
        format!("{} (max error {worst:.1e})", parts.join(", ")),
    ))
}

/// The d = 3 waiting-time matrix written out entry by entry.
pub fn explicit_deadline3_matrix(lambda: f64, mu: f64) -> [[f64; 4]; 4] {
    let (lb, mb) = (1.0 - lambda, 1.0 - mu);
    [
        [lb, lambda, 0.0, 0.0],
        [mu * lb, mu * lambda, mb, 0.0],
        [mu * lb * lb, mu * lambda * lb, mu * lambda, mb],
        [lb * lb * lb, lambda * lb * lb, lambda * lb, lambda],
    ]
}

pub fn check_deadline3_matrix(seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (lambda, mu) = (rng.random::<f64>(), rng.random::<f64>());
        let built = build_waiting_time_matrix(&QueueParams {
            arrival_prob: lambda,
            service_prob: mu,
            deadline: 3,
        })?;
        let explicit = explicit_deadline3_matrix(lambda, mu);
        for (i, row) in explicit.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                worst = worst.max((built.get(i, j) - v).abs());
            }
        }
    }
    Ok(CheckResult::new(
        "d=3 matrix equals explicit form",
        worst <= 1e-15,
        format!("20 random (λ, μ1) pairs, max entry error {worst:.1e}"),
    ))
}

pub fn check_aoi_identities() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for step in 1..=19 {
        let mu = step as f64 * 0.05;
        let p = AoiParams::new(mu)?;
        // tail (1-μ)^N < 1e-13 for μ ≥ 0.05 at N = 700
        let n = 700;
        let pmf: Vec<f64> = (1..=n).map(|i| aoi_pmf(&p, i)).collect::<Result<_>>()?;
        let mean: f64 = pmf.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
        worst = worst.max((mean - average_aoi(&p).as_f64()).abs());
        worst = worst.max((pmf.iter().sum::<f64>() - 1.0).abs());
        let mut below = 0.0;
        for x in 0..60u64 {
            worst = worst.max((1.0 - below - aoi_violation(&p, x)).abs());
            below += pmf[x as usize];
        }
        let pi = stationary(&build_aoi_matrix_truncated(&p, 80)?)?;
        for i in 0..60 {
            worst = worst.max((pi[i] - pmf[i]).abs());
        }
    }
    Ok(CheckResult::new(
        "age pmf / mean / violation identities",
        worst <= 1e-8,
        format!("μ2 ∈ 0.05..0.95, max deviation {worst:.1e}"),
    ))
}

pub fn check_lumpability() -> Result<CheckResult> {
    let mut cases = 0;
    let mut failures = 0;
    let mut worst_matrix: f64 = 0.0;
    let mut worst_busy: f64 = 0.0;
    for lambda in [0.1, 0.5, 0.9] {
        for q1 in [0.3, 0.8] {
            for q2 in [0.2, 0.7] {
                for gamma_db in [-5.0, 1.0] {
                    for d in 1..=6 {
                        let p = SystemParams::reference(gamma_db, q1, q2, lambda, d);
                        let sp = p.success_probs()?;
                        let m2d = build_2d_action_chain(lambda, d, q1, q2, &sp)?;
                        let report = verify_lumpability(&m2d, &action_partition(d))?;
                        let mu1 = crate::system::service_prob_user1(&p, &sp);
                        let q = QueueParams {
                            arrival_prob: lambda,
                            service_prob: mu1,
                            deadline: d,
                        };
                        let one_d = build_waiting_time_matrix(&q)?;
                        cases += 1;
                        let Some(lumped) = report.lumped else {
                            failures += 1;
                            continue;
                        };
                        let diff = lumped.max_abs_diff(&one_d);
                        worst_matrix = worst_matrix.max(diff);
                        let pi2 = stationary(&m2d)?;
                        let ages = d as usize + 1;
                        let busy_2d = 1.0 - pi2[0] - pi2[ages];
                        let busy_diff = (busy_2d - queue_metrics(&q)?.busy_prob).abs();
                        worst_busy = worst_busy.max(busy_diff);
                        if diff > 1e-12 || busy_diff > 1e-10 {
                            failures += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(CheckResult::new(
        "2D action chain lumps onto waiting-time chain",
        failures == 0,
        format!(
            "{cases} cases, {failures} failures, max matrix diff {worst_matrix:.1e}, max busy diff {worst_busy:.1e}"
        ),
    ))
}

fn sim_config(s: &GridScenario, opts: &ValidationOptions, index: usize, mode: SimMode) -> SimConfig {
    SimConfig::new(s.params(), opts.slots, opts.seed.wrapping_add(1_000 * index as u64))
        .with_replications(opts.replications)
        .with_mode(mode)
}

pub fn evaluate_scenario(s: &GridScenario, index: usize, opts: &ValidationOptions) -> Result<ScenarioOutcome> {
    let analytical = corrupt(analyze(&s.params())?, opts.fault);
    let decoupled = simulate_with(&sim_config(s, opts, index, SimMode::Decoupled), Execution::Sequential)?;
    let coupled = simulate_with(&sim_config(s, opts, index, SimMode::Coupled), Execution::Sequential)?;

    let allowed = |a: f64| (DECOUPLED_REL_TOL * a.abs()).max(DECOUPLED_ABS_TOL);
    let q = &analytical.queue;
    let aoi = analytical.aoi_average.as_f64();
    let mut dec = vec![
        compare("drop_rate", q.drop_rate, decoupled.drop_rate, allowed(q.drop_rate)),
        compare("busy_prob", q.busy_prob, decoupled.busy_prob, allowed(q.busy_prob)),
        compare("throughput", q.throughput, decoupled.throughput, allowed(q.throughput)),
        compare("aoi_average", aoi, decoupled.aoi_average, allowed(aoi)),
    ];
    for x in VIOLATION_PROBES {
        let a = analytical.aoi_violation(x);
        let sim = decoupled.aoi_violation(x).unwrap_or(f64::NAN);
        dec.push(compare(&format!("aoi_violation_{x}"), a, sim, allowed(a)));
    }

    let ci = &coupled.ci_halfwidth;
    let band = |c: Option<f64>| COUPLED_CI_MULTIPLE * c.unwrap_or(0.0);
    let coupled_user1 = vec![
        compare("drop_rate", q.drop_rate, coupled.drop_rate, band(ci.drop_rate)),
        compare("busy_prob", q.busy_prob, coupled.busy_prob, band(ci.busy_prob)),
        compare("throughput", q.throughput, coupled.throughput, band(ci.throughput)),
    ];
    Ok(ScenarioOutcome {
        scenario: *s,
        decoupled: dec,
        coupled_user1,
        coupled_aoi_gap: (coupled.aoi_average - aoi) / aoi,
    })
}

fn tenths() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

fn spread(values: &[f64]) -> f64 {
    values.iter().cloned().fold(f64::MIN, f64::max) - values.iter().cloned().fold(f64::MAX, f64::min)
}

pub fn check_trade_off_shapes(execution: Execution) -> Result<CheckResult> {
    let aoi_over_q1 = |gamma_db: f64| -> Result<Vec<f64>> {
        let base = SystemParams::reference(gamma_db, 0.5, 0.5, 0.8, 3);
        Ok(sweep(&base, SweepAxis::Q1, &tenths(), execution)?
            .iter()
            .map(|p| p.report.aoi_average.as_f64())
            .collect())
    };
    let strong = spread(&aoi_over_q1(-5.0)?);
    let weak = spread(&aoi_over_q1(1.0)?);

    let base = SystemParams::reference(1.0, 0.5, 0.5, 0.5, 3);
    let q2_points = sweep(&base, SweepAxis::Q2, &tenths(), execution)?;
    let monotone = q2_points.windows(2).all(|w| {
        w[1].report.aoi_average.as_f64() < w[0].report.aoi_average.as_f64()
            && w[1].report.queue.drop_rate >= w[0].report.queue.drop_rate
    });
    Ok(CheckResult::new(
        "trade-off shapes",
        strong < 0.5 * weak && monotone,
        format!("q1-sweep AoI spread strong {strong:.3} vs weak {weak:.3}; q2-sweep monotone: {monotone}"),
    ))
}

pub fn check_dtmc_empirical(opts: &ValidationOptions) -> Result<CheckResult> {
    let p = SystemParams::reference(0.0, 0.5, 0.5, 0.5, 3);
    let cfg = SimConfig::new(p, opts.slots, opts.seed);
    let occupancy = occupancy_vs_stationary(&cfg)?;
    let transitions = transition_frequency_check(&cfg, DEFAULT_MIN_VISITS)?;
    let failing = transitions.cells.iter().filter(|c| !c.pass).count();
    Ok(CheckResult::new(
        "waiting-time chain vs simulated head-of-line age",
        occupancy.max_abs_deviation < OCCUPANCY_TOLERANCE
            && transitions.all_pass
            && transitions.insufficient_visits.is_empty(),
        format!(
            "occupancy max deviation {:.4}; {} of {} transition cells fail",
            occupancy.max_abs_deviation,
            failing,
            transitions.cells.len()
        ),
    ))
}

pub fn check_determinism(opts: &ValidationOptions) -> Result<CheckResult> {
    let p = SystemParams::reference(1.0, 0.5, 0.5, 0.5, 3);
    let cfg = SimConfig::new(p, 100_000, opts.seed).with_replications(4);
    let a = serde_json::to_vec(&simulate_with(&cfg, Execution::Parallel)?).expect("report serializes");
    let b = serde_json::to_vec(&simulate_with(&cfg, Execution::Sequential)?).expect("report serializes");
    Ok(CheckResult::new(
        "seeded runs are byte-identical",
        a == b,
        format!("{} bytes compared", a.len()),
    ))
}

/// Runs every check and returns the verdict.
pub fn run(opts: &ValidationOptions) -> Result<Verdict> {
    let mut checks = vec![
        check_delta()?,
        check_deadline3_matrix(opts.seed)?,
        check_aoi_identities()?,
        check_lumpability()?,
    ];

    let grid = scenario_grid(&opts.levels, &opts.deadlines, &opts.gammas_db);
    let indexed: Vec<(usize, GridScenario)> = grid.into_iter().enumerate().collect();
    let scenarios = exec::map(opts.execution, &indexed, |(i, s)| evaluate_scenario(s, *i, opts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let failed = |f: fn(&ScenarioOutcome) -> bool| scenarios.iter().filter(|s| !f(s)).count();
    let dec_fail = failed(|s| s.decoupled.iter().all(|c| c.pass));
    checks.push(CheckResult::new(
        "analytical vs decoupled simulation",
        dec_fail == 0,
        format!("{} scenarios, {dec_fail} with a metric outside tolerance", scenarios.len()),
    ));
    let cou_fail = failed(|s| s.coupled_user1.iter().all(|c| c.pass));
    checks.push(CheckResult::new(
        "coupled simulation, user-1 metrics",
        cou_fail == 0,
        format!("{} scenarios, {cou_fail} outside {COUPLED_CI_MULTIPLE} CI half-widths", scenarios.len()),
    ));
    let worst_gap = scenarios.iter().map(|s| s.coupled_aoi_gap.abs()).fold(0.0, f64::max);
    checks.push(CheckResult::new(
        "coupled simulation, average age gap",
        worst_gap <= COUPLED_AOI_REL_TOL,
        format!("max relative gap {:.2}%", 100.0 * worst_gap),
    ));
    checks.push(check_trade_off_shapes(opts.execution)?);
    checks.push(check_dtmc_empirical(opts)?);
    checks.push(check_determinism(opts)?);

    Ok(Verdict {
        schema_version: crate::report::SCHEMA_VERSION,
        all_pass: checks.iter().all(|c| c.pass),
        checks,
        scenarios,
    })
}

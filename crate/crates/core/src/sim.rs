//! Seeded slot-level Monte Carlo simulator of the two-user channel.
//!
//! Each slot runs attempt, outcome, departure or drop, then arrival. User 1
//! keeps a FIFO queue of arrival slots; a packet that arrives at the end of
//! slot `t` has age 1 in slot `t + 1` and may be attempted at ages `1..=d`.
//! User 2 samples and transmits a fresh update with probability `q2`.
//!
//! In [`SimMode::Coupled`] the two users' outcomes come from the channel
//! model, so user 2 sees the actual (time-correlated) activity of user 1.
//! [`SimMode::Decoupled`] replaces user 2's outcome by an independent
//! Bernoulli(`μ2`) draw, which is exactly the assumption behind the
//! closed-form age results.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::SuccessProbs;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::system::{analyze_with, SystemParams, ViolationPoint, VIOLATION_CURVE_MAX_X};

/// Ages at or above this are pooled into one overflow bucket.
pub const AOI_HISTOGRAM_LEN: usize = 4096;

/// Normal quantile of a two-sided 95% interval.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    #[default]
    Coupled,
    Decoupled,
}

impl SimMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SimMode::Coupled => "coupled",
            SimMode::Decoupled => "decoupled",
        }
    }
}

impl std::str::FromStr for SimMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coupled" => Ok(SimMode::Coupled),
            "decoupled" => Ok(SimMode::Decoupled),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for SimMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: SystemParams,
    /// Slots per replication, warmup included.
    pub slots: u64,
    pub warmup_slots: u64,
    pub seed: u64,
    pub replications: u32,
    pub mode: SimMode,
    /// Replaces the link-model success probabilities.
    pub success_override: Option<SuccessProbs>,
}

impl SimConfig {
    /// One coupled replication with a 10% warmup.
    pub fn new(params: SystemParams, slots: u64, seed: u64) -> Self {
        Self {
            params,
            slots,
            warmup_slots: slots / 10,
            seed,
            replications: 1,
            mode: SimMode::Coupled,
            success_override: None,
        }
    }

    pub fn with_replications(mut self, replications: u32) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_mode(mut self, mode: SimMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_success_override(mut self, sp: SuccessProbs) -> Self {
        self.success_override = Some(sp);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.slots <= self.warmup_slots {
            return Err(Error::InvalidConfig(format!(
                "slots ({}) must exceed warmup_slots ({})",
                self.slots, self.warmup_slots
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if let Some(sp) = &self.success_override {
            sp.validate()?;
        }
        Ok(())
    }

    /// Success probabilities in effect: the override if set, else the link model.
    pub fn success_probs(&self) -> Result<SuccessProbs> {
        match self.success_override {
            Some(sp) => Ok(sp),
            None => self.params.success_probs(),
        }
    }

    pub fn measured_slots(&self) -> u64 {
        self.slots - self.warmup_slots
    }
}

/// Raw counters of one replication over its measured slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationStats {
    pub measured_slots: u64,
    pub arrivals: u64,
    pub deliveries: u64,
    pub drops: u64,
    /// Queue length when measurement starts and after the last slot.
    pub queue_at_start: u64,
    pub queue_at_end: u64,
    pub busy_slots: u64,
    /// Slots spent in each head-of-line age state `0..=d`.
    pub occupancy: Vec<u64>,
    /// Row-major `(d+1)²` counts of head-of-line state transitions.
    pub transitions: Vec<u64>,
    pub aoi_sum: u64,
    /// `aoi_histogram[i]` counts slots with age `i + 1`.
    pub aoi_histogram: Vec<u64>,
    pub aoi_overflow: u64,
}

impl ReplicationStats {
    fn new(deadline: u32) -> Self {
        let states = deadline as usize + 1;
        Self {
            measured_slots: 0,
            arrivals: 0,
            deliveries: 0,
            drops: 0,
            queue_at_start: 0,
            queue_at_end: 0,
            busy_slots: 0,
            occupancy: vec![0; states],
            transitions: vec![0; states * states],
            aoi_sum: 0,
            aoi_histogram: vec![0; AOI_HISTOGRAM_LEN],
            aoi_overflow: 0,
        }
    }

    fn rate(&self, count: u64) -> f64 {
        count as f64 / self.measured_slots as f64
    }

    pub fn drop_rate(&self) -> f64 {
        self.rate(self.drops)
    }

    pub fn throughput(&self) -> f64 {
        self.rate(self.deliveries)
    }

    pub fn busy_prob(&self) -> f64 {
        self.rate(self.busy_slots)
    }

    pub fn per_packet_drop_prob(&self) -> f64 {
        let resolved = self.deliveries + self.drops;
        if resolved == 0 {
            0.0
        } else {
            self.drops as f64 / resolved as f64
        }
    }

    pub fn aoi_average(&self) -> f64 {
        self.rate(self.aoi_sum)
    }

    /// Fraction of measured slots with age greater than `x`.
    pub fn aoi_violation(&self, x: u64) -> f64 {
        let at_most: u64 = self.aoi_histogram.iter().take(x as usize).sum();
        1.0 - self.rate(at_most)
    }
}

fn coin(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Runs one replication with its own random stream.
pub fn run_replication(
    cfg: &SimConfig,
    sp: &SuccessProbs,
    decoupled_mu2: Option<f64>,
    replication: u32,
) -> ReplicationStats {
    let params = &cfg.params;
    let d = u64::from(params.deadline);
    let states = d as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(u64::from(replication)));
    let mut stats = ReplicationStats::new(params.deadline);

    let mut queue: VecDeque<u64> = VecDeque::with_capacity(states + 1);
    let mut aoi: u64 = 1;
    let head_state = |queue: &VecDeque<u64>, t: u64| queue.front().map_or(0, |&a| (t - a) as usize);
    let mut state = 0usize;

    for t in 0..cfg.slots {
        let measuring = t >= cfg.warmup_slots;
        let busy = !queue.is_empty();
        if t == cfg.warmup_slots {
            stats.queue_at_start = queue.len() as u64;
        }
        if measuring {
            stats.measured_slots += 1;
            stats.occupancy[state] += 1;
            stats.busy_slots += u64::from(busy);
            stats.aoi_sum += aoi;
            match stats.aoi_histogram.get_mut((aoi - 1) as usize) {
                Some(c) => *c += 1,
                None => stats.aoi_overflow += 1,
            }
        }

        let tx1 = busy && coin(&mut rng, params.q1);
        let tx2 = coin(&mut rng, params.q2);
        let (ok1, ok2) = match (tx1, tx2) {
            (true, true) => (coin(&mut rng, sp.p_1_joint), coin(&mut rng, sp.p_2_joint)),
            (true, false) => (coin(&mut rng, sp.p_1_solo), false),
            (false, true) => (false, coin(&mut rng, sp.p_2_solo)),
            (false, false) => (false, false),
        };
        let ok2 = match decoupled_mu2 {
            Some(mu2) => coin(&mut rng, mu2),
            None => ok2,
        };

        if ok1 {
            queue.pop_front();
            stats.deliveries += u64::from(measuring);
        } else if state as u64 == d {
            queue.pop_front();
            stats.drops += u64::from(measuring);
        }
        aoi = if ok2 { 1 } else { aoi + 1 };
        if coin(&mut rng, params.arrival_prob) {
            queue.push_back(t);
            stats.arrivals += u64::from(measuring);
        }

        let next = head_state(&queue, t + 1);
        debug_assert!(next < states, "head packet outlived its deadline");
        if measuring {
            stats.transitions[state * states + next] += 1;
        }
        state = next;
    }
    stats.queue_at_end = queue.len() as u64;
    stats
}

/// 95% half-widths across replications; `None` with a single replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiHalfwidths {
    pub drop_rate: Option<f64>,
    pub throughput: Option<f64>,
    pub busy_prob: Option<f64>,
    pub per_packet_drop_prob: Option<f64>,
    pub aoi_average: Option<f64>,
    /// Indexed like [`SimulationReport::aoi_violation_curve`].
    pub aoi_violation: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub mode: SimMode,
    pub seed: u64,
    pub slots: u64,
    pub warmup_slots: u64,
    pub replications: u32,
    /// The `μ2` driving user 2 in decoupled mode.
    pub decoupled_mu2: Option<f64>,
    pub drop_rate: f64,
    pub throughput: f64,
    pub busy_prob: f64,
    pub per_packet_drop_prob: f64,
    pub aoi_average: f64,
    pub aoi_violation_curve: Vec<ViolationPoint>,
    /// Summed over replications; index `i` is age `i + 1`.
    pub aoi_histogram: Vec<u64>,
    pub aoi_overflow: u64,
    /// Fraction of measured slots in each head-of-line state `0..=d`.
    pub waiting_time_occupancy: Vec<f64>,
    /// `transition_counts[i][j]`, summed over replications.
    pub transition_counts: Vec<Vec<u64>>,
    pub ci_halfwidth: CiHalfwidths,
    pub per_replication: Vec<ReplicationStats>,
}

impl SimulationReport {
    pub fn aoi_violation(&self, x: u64) -> Option<f64> {
        self.aoi_violation_curve.iter().find(|v| v.x == x).map(|v| v.prob)
    }

    pub fn aoi_violation_ci(&self, x: u64) -> Option<f64> {
        let i = self.aoi_violation_curve.iter().position(|v| v.x == x)?;
        self.ci_halfwidth.aoi_violation[i]
    }
}

fn mean_and_halfwidth(values: impl Iterator<Item = f64> + Clone) -> (f64, Option<f64>) {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some(Z_95 * (var / n as f64).sqrt()))
}

/// Runs all replications and aggregates them.
pub fn simulate(cfg: &SimConfig) -> Result<SimulationReport> {
    simulate_with(cfg, Execution::default())
}

pub fn simulate_with(cfg: &SimConfig, execution: Execution) -> Result<SimulationReport> {
    cfg.validate()?;
    let sp = cfg.success_probs()?;
    let decoupled_mu2 = match cfg.mode {
        SimMode::Coupled => None,
        SimMode::Decoupled => Some(analyze_with(&cfg.params, &sp)?.mu2),
    };
    let reps = exec::map_range(execution, cfg.replications as usize, |r| {
        run_replication(cfg, &sp, decoupled_mu2, r as u32)
    });
    Ok(aggregate(cfg, decoupled_mu2, reps))
}

fn aggregate(cfg: &SimConfig, decoupled_mu2: Option<f64>, reps: Vec<ReplicationStats>) -> SimulationReport {
    let metric = |f: fn(&ReplicationStats) -> f64| mean_and_halfwidth(reps.iter().map(f));
    let (drop_rate, drop_ci) = metric(ReplicationStats::drop_rate);
    let (throughput, throughput_ci) = metric(ReplicationStats::throughput);
    let (busy_prob, busy_ci) = metric(ReplicationStats::busy_prob);
    let (per_packet_drop_prob, ppd_ci) = metric(ReplicationStats::per_packet_drop_prob);
    let (aoi_average, aoi_ci) = metric(ReplicationStats::aoi_average);

    let (aoi_violation_curve, violation_ci): (Vec<_>, Vec<_>) = (0..=VIOLATION_CURVE_MAX_X)
        .map(|x| {
            let (prob, ci) = mean_and_halfwidth(reps.iter().map(|r| r.aoi_violation(x)));
            (ViolationPoint { x, prob }, ci)
        })
        .unzip();

    let states = cfg.params.deadline as usize + 1;
    let mut aoi_histogram = vec![0u64; AOI_HISTOGRAM_LEN];
    let mut occupancy = vec![0u64; states];
    let mut transitions = vec![0u64; states * states];
    for r in &reps {
        aoi_histogram.iter_mut().zip(&r.aoi_histogram).for_each(|(a, b)| *a += b);
        occupancy.iter_mut().zip(&r.occupancy).for_each(|(a, b)| *a += b);
        transitions.iter_mut().zip(&r.transitions).for_each(|(a, b)| *a += b);
    }
    let measured: u64 = reps.iter().map(|r| r.measured_slots).sum();

    SimulationReport {
        mode: cfg.mode,
        seed: cfg.seed,
        slots: cfg.slots,
        warmup_slots: cfg.warmup_slots,
        replications: cfg.replications,
        decoupled_mu2,
        drop_rate,
        throughput,
        busy_prob,
        per_packet_drop_prob,
        aoi_average,
        aoi_violation_curve,
        aoi_histogram,
        aoi_overflow: reps.iter().map(|r| r.aoi_overflow).sum(),
        waiting_time_occupancy: occupancy.iter().map(|&c| c as f64 / measured as f64).collect(),
        transition_counts: transitions.chunks(states).map(<[u64]>::to_vec).collect(),
        ci_halfwidth: CiHalfwidths {
            drop_rate: drop_ci,
            throughput: throughput_ci,
            busy_prob: busy_ci,
            per_packet_drop_prob: ppd_ci,
            aoi_average: aoi_ci,
            aoi_violation: violation_ci,
        },
        per_replication: reps,
    }
}

fn analytical_queue(cfg: &SimConfig) -> Result<crate::deadline_queue::QueueMetrics> {
    let sp = cfg.success_probs()?;
    Ok(analyze_with(&cfg.params, &sp)?.queue)
}

fn waiting_time_matrix(cfg: &SimConfig) -> Result<crate::markov::StochasticMatrix> {
    let sp = cfg.success_probs()?;
    let mu1 = crate::system::service_prob_user1(&cfg.params, &sp);
    crate::deadline_queue::build_waiting_time_matrix(&crate::deadline_queue::QueueParams {
        arrival_prob: cfg.params.arrival_prob,
        service_prob: mu1,
        deadline: cfg.params.deadline,
    })
}

fn require_coupled(cfg: &SimConfig) -> Result<()> {
    if cfg.mode != SimMode::Coupled {
        return Err(Error::InvalidConfig("this check needs coupled mode".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyComparison {
    pub empirical: Vec<f64>,
    pub analytical: Vec<f64>,
    pub max_abs_deviation: f64,
}

/// Empirical head-of-line state occupancy against the stationary
/// distribution of the waiting-time chain.
pub fn occupancy_vs_stationary(cfg: &SimConfig) -> Result<OccupancyComparison> {
    require_coupled(cfg)?;
    let analytical = analytical_queue(cfg)?.stationary.probs;
    let empirical = simulate(cfg)?.waiting_time_occupancy;
    let max_abs_deviation = empirical
        .iter()
        .zip(&analytical)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(OccupancyComparison {
        empirical,
        analytical,
        max_abs_deviation,
    })
}

/// Default minimum number of visits for a state's row to be checked.
pub const DEFAULT_MIN_VISITS: u64 = 10_000;
/// Absolute slack added to the 3-standard-error band.
pub const TRANSITION_ABS_SLACK: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionCell {
    pub from: usize,
    pub to: usize,
    pub empirical: f64,
    pub analytical: f64,
    pub std_err: f64,
    pub abs_error: f64,
    /// `abs_error / analytical`; infinite when the analytical value is 0
    /// and the empirical one is not.
    pub rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionCheck {
    pub visits: Vec<u64>,
    pub cells: Vec<TransitionCell>,
    /// States with fewer than the minimum visits; their rows are not checked.
    pub insufficient_visits: Vec<usize>,
    pub all_pass: bool,
}

/// Compares the empirical one-step transition frequencies of the simulated
/// head-of-line age with the waiting-time matrix. A cell fails when it is
/// more than three binomial standard errors plus [`TRANSITION_ABS_SLACK`]
/// away from the analytical probability.
pub fn transition_frequency_check(cfg: &SimConfig, min_visits: u64) -> Result<TransitionCheck> {
    require_coupled(cfg)?;
    let matrix = waiting_time_matrix(cfg)?;
    let report = simulate(cfg)?;
    let mut visits = Vec::new();
    let mut cells = Vec::new();
    let mut insufficient_visits = Vec::new();
    for (from, row) in report.transition_counts.iter().enumerate() {
        let n: u64 = row.iter().sum();
        visits.push(n);
        if n < min_visits {
            insufficient_visits.push(from);
            continue;
        }
        for (to, &count) in row.iter().enumerate() {
            let analytical = matrix.get(from, to);
            let empirical = count as f64 / n as f64;
            let std_err = (analytical * (1.0 - analytical) / n as f64).sqrt();
            let abs_error = (empirical - analytical).abs();
            let rel_error = if analytical > 0.0 {
                abs_error / analytical
            } else if abs_error == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            cells.push(TransitionCell {
                from,
                to,
                empirical,
                analytical,
                std_err,
                abs_error,
                rel_error,
                pass: abs_error <= 3.0 * std_err + TRANSITION_ABS_SLACK,
            });
        }
    }
    let all_pass = cells.iter().all(|c| c.pass);
    Ok(TransitionCheck {
        visits,
        cells,
        insufficient_visits,
        all_pass,
    })
}

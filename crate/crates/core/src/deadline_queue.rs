//! Head-of-line waiting-time chain of the deadline-constrained user.
//!
//! State `0` is an empty queue and state `k ∈ 1..=d` means the packet at the
//! head of the queue has age `k`: it may be attempted at ages `1..=d`, and a
//! failure at age `d` drops it. Packets arrive at the end of a slot, so a new
//! packet has age 1 in the following slot.

use serde::{Deserialize, Serialize};

use crate::channel::SuccessProbs;
use crate::error::{check_probability, Error, Result};
use crate::markov::{stationary, StationaryDistribution, StochasticMatrix};

/// Tolerance of the block-sum comparison in [`verify_lumpability`].
pub const LUMPABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueParams {
    /// Per-slot Bernoulli arrival probability `λ`.
    pub arrival_prob: f64,
    /// Per-slot probability `μ1` that the head packet is delivered.
    pub service_prob: f64,
    /// Deadline in slots.
    pub deadline: u32,
}

impl QueueParams {
    pub fn validate(&self) -> Result<()> {
        check_probability("arrival_prob", self.arrival_prob)?;
        check_probability("service_prob", self.service_prob)?;
        if self.deadline == 0 {
            return Err(Error::param("deadline", "must be at least 1 slot"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueMetrics {
    /// Stationary distribution over states `0..=d`.
    pub stationary: StationaryDistribution,
    /// Dropped packets per slot.
    pub drop_rate: f64,
    /// Fraction of arriving packets that are dropped, `drop_rate / λ`.
    pub per_packet_drop_prob: f64,
    /// Delivered packets per slot. Derived as `λ − drop_rate`: in steady
    /// state every arrival is eventually either delivered or dropped.
    pub throughput: f64,
    /// Probability that the queue is non-empty, `1 − π_0`.
    pub busy_prob: f64,
}

/// Transition matrix of the head-of-line age over states `0..=d`.
///
/// From an age-`k` state (`k < d`) the head is delivered with probability
/// `μ1`, after which the next head is the oldest packet that arrived since,
/// or it stays and ages by one. From state `d` the head always leaves
/// (delivered or dropped), so that row does not depend on `μ1`.
pub fn build_waiting_time_matrix(p: &QueueParams) -> Result<StochasticMatrix> {
    p.validate()?;
    let lambda = p.arrival_prob;
    let idle = 1.0 - lambda;
    let mu = p.service_prob;
    let d = p.deadline as usize;
    StochasticMatrix::from_fn(d + 1, |k, j| match k {
        0 => match j {
            0 => idle,
            1 => lambda,
            _ => 0.0,
        },
        k if k == d => {
            if j == 0 {
                idle.powi(d as i32)
            } else {
                lambda * idle.powi((d - j) as i32)
            }
        }
        k => {
            if j == 0 {
                mu * idle.powi(k as i32)
            } else if j <= k {
                mu * lambda * idle.powi((k - j) as i32)
            } else if j == k + 1 {
                1.0 - mu
            } else {
                0.0
            }
        }
    })
}

/// Drop rate, throughput and busy probability from the stationary
/// head-of-line age distribution.
pub fn queue_metrics(p: &QueueParams) -> Result<QueueMetrics> {
    let matrix = build_waiting_time_matrix(p)?;
    let pi = stationary(&matrix)?;
    let d = p.deadline as usize;
    let drop_rate = pi[d] * (1.0 - p.service_prob);
    let per_packet_drop_prob = if p.arrival_prob > 0.0 {
        drop_rate / p.arrival_prob
    } else {
        0.0
    };
    Ok(QueueMetrics {
        drop_rate,
        per_packet_drop_prob,
        throughput: p.arrival_prob - drop_rate,
        busy_prob: 1.0 - pi[0],
        stationary: pi,
    })
}

/// Index of state `(action, age)` in the 2D chain.
pub fn action_state_index(deadline: u32, action: usize, age: usize) -> usize {
    action * (deadline as usize + 1) + age
}

/// Chain over `(user-2 action, head-of-line age)` pairs.
///
/// The action coordinate of a state is user 2's choice in the slot that led
/// into it. In each transition user 2 draws a fresh action (`1` with
/// probability `q2`) and the head packet of user 1 is then served with
/// `q1·P_{1/1,2}` if user 2 transmits and `q1·P_{1/1}` otherwise.
pub fn build_2d_action_chain(
    arrival_prob: f64,
    deadline: u32,
    q1: f64,
    q2: f64,
    sp: &SuccessProbs,
) -> Result<StochasticMatrix> {
    check_probability("q1", q1)?;
    check_probability("q2", q2)?;
    sp.validate()?;
    let per_action = [
        build_waiting_time_matrix(&QueueParams {
            arrival_prob,
            service_prob: q1 * sp.p_1_solo,
            deadline,
        })?,
        build_waiting_time_matrix(&QueueParams {
            arrival_prob,
            service_prob: q1 * sp.p_1_joint,
            deadline,
        })?,
    ];
    let action_prob = [1.0 - q2, q2];
    let ages = deadline as usize + 1;
    StochasticMatrix::from_fn(2 * ages, |from, to| {
        let (from_age, to_action, to_age) = (from % ages, to / ages, to % ages);
        action_prob[to_action] * per_action[to_action].get(from_age, to_age)
    })
}

/// The partition `{(0, y), (1, y)}` for `y = 0..=d`.
pub fn action_partition(deadline: u32) -> Vec<Vec<usize>> {
    (0..=deadline as usize)
        .map(|age| {
            vec![
                action_state_index(deadline, 0, age),
                action_state_index(deadline, 1, age),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LumpabilityReport {
    pub lumpable: bool,
    /// Largest spread of block-exit mass among states of one block.
    pub max_discrepancy: f64,
    /// The chain on blocks; present only when lumpable.
    pub lumped: Option<StochasticMatrix>,
}

/// Checks strong lumpability: every state of a block must send the same
/// total mass into each block.
pub fn verify_lumpability(
    m: &StochasticMatrix,
    partition: &[Vec<usize>],
) -> Result<LumpabilityReport> {
    let n = m.len();
    let mut block_of = vec![usize::MAX; n];
    for (b, block) in partition.iter().enumerate() {
        if block.is_empty() {
            return Err(Error::InvalidPartition(format!("block {b} is empty")));
        }
        for &s in block {
            if s >= n {
                return Err(Error::InvalidPartition(format!("state {s} out of range 0..{n}")));
            }
            if block_of[s] != usize::MAX {
                return Err(Error::InvalidPartition(format!("state {s} appears twice")));
            }
            block_of[s] = b;
        }
    }
    if let Some(s) = block_of.iter().position(|&b| b == usize::MAX) {
        return Err(Error::InvalidPartition(format!("state {s} is not covered")));
    }

    let blocks = partition.len();
    let exit_mass = |s: usize| {
        let mut mass = vec![0.0; blocks];
        for (t, p) in m.row(s).iter().enumerate() {
            mass[block_of[t]] += p;
        }
        mass
    };

    let mut lumped_rows = Vec::with_capacity(blocks);
    let mut max_discrepancy: f64 = 0.0;
    for block in partition {
        let reference = exit_mass(block[0]);
        for &s in &block[1..] {
            let other = exit_mass(s);
            for (a, b) in reference.iter().zip(&other) {
                max_discrepancy = max_discrepancy.max((a - b).abs());
            }
        }
        lumped_rows.push(reference);
    }
    let lumpable = max_discrepancy <= LUMPABILITY_TOLERANCE;
    let lumped = if lumpable {
        Some(StochasticMatrix::from_rows(lumped_rows)?)
    } else {
        None
    };
    Ok(LumpabilityReport {
        lumpable,
        max_discrepancy,
        lumped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(lambda: f64, mu: f64, d: u32) -> QueueParams {
        QueueParams {
            arrival_prob: lambda,
            service_prob: mu,
            deadline: d,
        }
    }

    #[test]
    fn deadline_one_matrix() {
        let m = build_waiting_time_matrix(&params(0.4, 0.9, 1)).unwrap();
        assert_eq!(m.row(0), &[0.6, 0.4]);
        assert_eq!(m.row(1), &[0.6, 0.4]);
    }

    #[test]
    fn deadline_one_metrics() {
        let q = queue_metrics(&params(0.4, 0.9, 1)).unwrap();
        assert_abs_diff_eq!(q.stationary[0], 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(q.stationary[1], 0.4, epsilon = 1e-14);
        assert_abs_diff_eq!(q.drop_rate, 0.04, epsilon = 1e-14);
        assert_abs_diff_eq!(q.throughput, 0.36, epsilon = 1e-14);
        assert_abs_diff_eq!(q.per_packet_drop_prob, 0.1, epsilon = 1e-13);
    }

    #[test]
    fn perfect_service_never_drops() {
        let q = queue_metrics(&params(0.7, 1.0, 3)).unwrap();
        assert_eq!(q.drop_rate, 0.0);
        assert_eq!(q.stationary[2], 0.0);
        assert_eq!(q.stationary[3], 0.0);
        assert_abs_diff_eq!(q.throughput, 0.7, epsilon = 1e-15);
    }

    #[test]
    fn no_traffic() {
        let q = queue_metrics(&params(0.0, 0.8, 3)).unwrap();
        assert_eq!(q.stationary.probs, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(q.drop_rate, 0.0);
        assert_eq!(q.busy_prob, 0.0);
        assert_eq!(q.throughput, 0.0);
        assert_eq!(q.per_packet_drop_prob, 0.0);
    }

    #[test]
    fn saturated_arrivals_are_solvable() {
        let q = queue_metrics(&params(1.0, 0.0, 4)).unwrap();
        // every packet waits out its deadline and is dropped
        assert_abs_diff_eq!(q.drop_rate, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.busy_prob, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(build_waiting_time_matrix(&params(1.2, 0.5, 3)).is_err());
        assert!(build_waiting_time_matrix(&params(0.5, -0.1, 3)).is_err());
        assert!(build_waiting_time_matrix(&params(0.5, 0.5, 0)).is_err());
    }

    fn reference_sp() -> SuccessProbs {
        SuccessProbs {
            p_1_solo: 0.95,
            p_1_joint: 0.4,
            p_2_solo: 0.9,
            p_2_joint: 0.3,
        }
    }

    #[test]
    fn action_chain_with_silent_user2() {
        let sp = reference_sp();
        let (lambda, d, q1) = (0.6, 3, 0.7);
        let m2d = build_2d_action_chain(lambda, d, q1, 0.0, &sp).unwrap();
        let solo = build_waiting_time_matrix(&params(lambda, q1 * sp.p_1_solo, d)).unwrap();
        let ages = d as usize + 1;
        for i in 0..ages {
            for j in 0..ages {
                assert_eq!(m2d.get(i, j), solo.get(i, j));
                // nothing ever enters an action-1 state
                assert_eq!(m2d.get(i, ages + j), 0.0);
                assert_eq!(m2d.get(ages + i, ages + j), 0.0);
            }
        }
    }

    #[test]
    fn action_chain_with_persistent_user2() {
        let sp = reference_sp();
        let (lambda, d, q1) = (0.6, 2, 0.7);
        let m2d = build_2d_action_chain(lambda, d, q1, 1.0, &sp).unwrap();
        let joint = build_waiting_time_matrix(&params(lambda, q1 * sp.p_1_joint, d)).unwrap();
        let ages = d as usize + 1;
        for i in 0..ages {
            for j in 0..ages {
                assert_eq!(m2d.get(ages + i, ages + j), joint.get(i, j));
                assert_eq!(m2d.get(ages + i, j), 0.0);
            }
        }
    }

    #[test]
    fn action_chain_lumps_onto_waiting_time_chain() {
        let sp = reference_sp();
        let (lambda, d, q1, q2) = (0.45, 4, 0.8, 0.35);
        let m2d = build_2d_action_chain(lambda, d, q1, q2, &sp).unwrap();
        let report = verify_lumpability(&m2d, &action_partition(d)).unwrap();
        assert!(report.lumpable, "discrepancy {}", report.max_discrepancy);
        let mu1 = q1 * ((1.0 - q2) * sp.p_1_solo + q2 * sp.p_1_joint);
        let expected = build_waiting_time_matrix(&params(lambda, mu1, d)).unwrap();
        assert!(report.lumped.unwrap().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn unequal_block_exits_are_not_lumpable() {
        let m = StochasticMatrix::from_rows(vec![
            vec![0.5, 0.25, 0.25],
            vec![0.1, 0.1, 0.8],
            vec![0.3, 0.3, 0.4],
        ])
        .unwrap();
        let report = verify_lumpability(&m, &[vec![0, 1], vec![2]]).unwrap();
        assert!(!report.lumpable);
        assert!(report.lumped.is_none());
        assert_abs_diff_eq!(report.max_discrepancy, 0.55, epsilon = 1e-15);
    }

    #[test]
    fn singleton_partition_is_identity() {
        let m = StochasticMatrix::from_rows(vec![
            vec![0.5, 0.25, 0.25],
            vec![0.1, 0.1, 0.8],
            vec![0.3, 0.3, 0.4],
        ])
        .unwrap();
        let report = verify_lumpability(&m, &[vec![0], vec![1], vec![2]]).unwrap();
        assert!(report.lumpable);
        assert_eq!(report.lumped.unwrap(), m);
    }

    #[test]
    fn partition_errors() {
        let m = StochasticMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(verify_lumpability(&m, &[vec![0]]), Err(Error::InvalidPartition(_))));
        assert!(matches!(
            verify_lumpability(&m, &[vec![0, 1], vec![1]]),
            Err(Error::InvalidPartition(_))
        ));
        assert!(matches!(
            verify_lumpability(&m, &[vec![0, 2], vec![1]]),
            Err(Error::InvalidPartition(_))
        ));
        assert!(matches!(
            verify_lumpability(&m, &[vec![0, 1], vec![]]),
            Err(Error::InvalidPartition(_))
        ));
    }
}

//! End-to-end analytical pipeline.
//!
//! The evaluation is feed-forward: the user-1 service probability depends on
//! user 2's sampling probability but not on any queue, the queue chain gives
//! the busy probability, and that in turn fixes user 2's update success
//! probability. No fixed point is needed.

use serde::{Deserialize, Serialize};

use crate::aoi::{average_aoi, aoi_violation, AoiParams, AoiValue};
use crate::channel::{
    mpr_strength, reference_link, reference_receiver, LinkParams, MprClass, ReceiverParams,
    SuccessProbs,
};
use crate::deadline_queue::{queue_metrics, QueueMetrics, QueueParams};
use crate::error::{check_probability, Error, Result};
use crate::exec::{self, Execution};

/// Ages at which [`AnalyticalReport::aoi_violation_curve`] is tabulated.
pub const VIOLATION_CURVE_MAX_X: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub link1: LinkParams,
    pub link2: LinkParams,
    pub rx: ReceiverParams,
    /// Access probability of user 1 when its queue is non-empty.
    pub q1: f64,
    /// Sampling (and transmission) probability of user 2.
    pub q2: f64,
    /// Bernoulli arrival probability `λ` of user 1.
    pub arrival_prob: f64,
    /// Deadline `d` in slots.
    pub deadline: u32,
}

impl SystemParams {
    /// Symmetric users 30 m from the receiver at 5 mW with the given SINR
    /// threshold in dB on both links.
    pub fn reference(gamma_db: f64, q1: f64, q2: f64, arrival_prob: f64, deadline: u32) -> Self {
        Self {
            link1: reference_link(gamma_db),
            link2: reference_link(gamma_db),
            rx: reference_receiver(),
            q1,
            q2,
            arrival_prob,
            deadline,
        }
    }

    /// Every problem with the parameters, not just the first.
    pub fn problems(&self) -> Vec<Error> {
        let checks = [
            self.link1.validate(),
            self.link2.validate(),
            self.rx.validate(),
            check_probability("q1", self.q1),
            check_probability("q2", self.q2),
            check_probability("arrival_prob", self.arrival_prob),
            if self.deadline == 0 {
                Err(Error::param("deadline", "must be at least 1 slot"))
            } else {
                Ok(())
            },
        ];
        checks.into_iter().filter_map(|r| r.err()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        match self.problems().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    pub fn success_probs(&self) -> Result<SuccessProbs> {
        SuccessProbs::from_links(&self.link1, &self.link2, &self.rx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationPoint {
    pub x: u64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticalReport {
    pub sp: SuccessProbs,
    pub delta: f64,
    pub mpr_class: MprClass,
    /// Per-slot delivery probability of user 1's head packet.
    pub mu1: f64,
    /// Per-slot status update success probability of user 2.
    pub mu2: f64,
    /// Average success probability of user 1 given it transmits.
    pub p1: f64,
    /// Average success probability of user 2 given it transmits.
    pub p2: f64,
    pub queue: QueueMetrics,
    pub aoi_average: AoiValue,
    /// `P{A > x}` for `x = 0..=VIOLATION_CURVE_MAX_X`.
    pub aoi_violation_curve: Vec<ViolationPoint>,
}

impl AnalyticalReport {
    pub fn aoi_violation(&self, x: u64) -> f64 {
        aoi_violation(&AoiParams { update_success_prob: self.mu2 }, x)
    }
}

/// `μ1 = q1[(1 − q2)P_{1/1} + q2 P_{1/1,2}]`.
pub fn service_prob_user1(params: &SystemParams, sp: &SuccessProbs) -> f64 {
    params.q1 * average_success_user1(params, sp)
}

fn average_success_user1(params: &SystemParams, sp: &SuccessProbs) -> f64 {
    (1.0 - params.q2) * sp.p_1_solo + params.q2 * sp.p_1_joint
}

/// `μ2 = q2[(1 − q1 Pr{Q>0})P_{2/2} + q1 Pr{Q>0} P_{2/2,1}]`.
pub fn service_prob_user2(params: &SystemParams, sp: &SuccessProbs, busy_prob: f64) -> Result<f64> {
    check_probability("busy_prob", busy_prob)?;
    Ok(params.q2 * average_success_user2(params, sp, busy_prob))
}

fn average_success_user2(params: &SystemParams, sp: &SuccessProbs, busy_prob: f64) -> f64 {
    let interfered = params.q1 * busy_prob;
    (1.0 - interfered) * sp.p_2_solo + interfered * sp.p_2_joint
}

/// Full analytical report for a scenario, with success probabilities from
/// the link model.
pub fn analyze(params: &SystemParams) -> Result<AnalyticalReport> {
    params.validate()?;
    let sp = params.success_probs()?;
    analyze_with(params, &sp)
}

/// As [`analyze`], but with externally supplied success probabilities
/// (for example an idealized channel).
pub fn analyze_with(params: &SystemParams, sp: &SuccessProbs) -> Result<AnalyticalReport> {
    params.validate()?;
    sp.validate()?;
    let delta = mpr_strength(sp)?;

    let p1 = average_success_user1(params, sp);
    let mu1 = params.q1 * p1;
    let queue = queue_metrics(&QueueParams {
        arrival_prob: params.arrival_prob,
        service_prob: mu1,
        deadline: params.deadline,
    })?;

    let p2 = average_success_user2(params, sp, queue.busy_prob);
    let mu2 = params.q2 * p2;
    let aoi = AoiParams { update_success_prob: mu2 };
    let aoi_violation_curve = (0..=VIOLATION_CURVE_MAX_X)
        .map(|x| ViolationPoint {
            x,
            prob: aoi_violation(&aoi, x),
        })
        .collect();

    Ok(AnalyticalReport {
        sp: *sp,
        delta,
        mpr_class: MprClass::classify(delta),
        mu1,
        mu2,
        p1,
        p2,
        queue,
        aoi_average: average_aoi(&aoi),
        aoi_violation_curve,
    })
}

/// Scenario parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Q1,
    Q2,
    #[serde(alias = "arrival_prob")]
    Lambda,
    #[serde(alias = "deadline")]
    D,
    /// SINR threshold in dB, applied to both links.
    GammaDb,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Q1 => "q1",
            SweepAxis::Q2 => "q2",
            SweepAxis::Lambda => "lambda",
            SweepAxis::D => "d",
            SweepAxis::GammaDb => "gamma_db",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &SystemParams, value: f64) -> Result<SystemParams> {
        let mut p = *base;
        match self {
            SweepAxis::Q1 => p.q1 = value,
            SweepAxis::Q2 => p.q2 = value,
            SweepAxis::Lambda => p.arrival_prob = value,
            SweepAxis::D => {
                if value.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&value) {
                    return Err(Error::param("deadline", format!("{value} is not a positive integer")));
                }
                p.deadline = value as u32;
            }
            SweepAxis::GammaDb => {
                let gamma = crate::channel::db_to_linear(value);
                p.link1.sinr_threshold = gamma;
                p.link2.sinr_threshold = gamma;
            }
        }
        p.validate()?;
        Ok(p)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q1" => Ok(SweepAxis::Q1),
            "q2" => Ok(SweepAxis::Q2),
            "lambda" | "arrival_prob" => Ok(SweepAxis::Lambda),
            "d" | "deadline" => Ok(SweepAxis::D),
            "gamma_db" | "gamma" => Ok(SweepAxis::GammaDb),
            other => Err(Error::UnknownAxis(other.to_string())),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub params: SystemParams,
    pub report: AnalyticalReport,
}

/// One analytical report per value, in input order.
pub fn sweep(
    base: &SystemParams,
    axis: SweepAxis,
    values: &[f64],
    execution: Execution,
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::param("values", "sweep needs at least one value"));
    }
    exec::map(execution, values, |&value| {
        let params = axis.apply(base, value)?;
        let report = analyze(&params)?;
        Ok(SweepPoint { value, params, report })
    })
    .into_iter()
    .collect()
}

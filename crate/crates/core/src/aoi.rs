//! Age of Information of the status-update user.
//!
//! With an i.i.d. per-slot update success probability `μ2`, the age drops to
//! one after a successful slot and grows by one otherwise, so its stationary
//! law is geometric on `1, 2, …`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_probability, Error, Result};
use crate::markov::StochasticMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoiParams {
    /// Per-slot probability `μ2` that a status update is received.
    pub update_success_prob: f64,
}

impl AoiParams {
    pub fn new(update_success_prob: f64) -> Result<Self> {
        check_probability("update_success_prob", update_success_prob)?;
        Ok(Self { update_success_prob })
    }
}

/// An age in slots that may be unbounded (no update ever succeeds).
///
/// Serializes as a plain number when finite and as the string `"inf"`
/// otherwise, in both CSV and JSON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AoiValue {
    Finite(f64),
    Unbounded,
}

impl AoiValue {
    pub fn from_f64(v: f64) -> Self {
        if v.is_finite() {
            AoiValue::Finite(v)
        } else {
            AoiValue::Unbounded
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            AoiValue::Finite(v) => v,
            AoiValue::Unbounded => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            AoiValue::Finite(v) => Some(v),
            AoiValue::Unbounded => None,
        }
    }
}

impl std::fmt::Display for AoiValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AoiValue::Finite(v) => write!(f, "{v}"),
            AoiValue::Unbounded => f.write_str("inf"),
        }
    }
}

impl Serialize for AoiValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AoiValue::Finite(v) => serializer.serialize_f64(*v),
            AoiValue::Unbounded => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for AoiValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = AoiValue;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or the string \"inf\"")
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<AoiValue, E> {
                if v.is_nan() {
                    return Err(E::custom("age cannot be NaN"));
                }
                Ok(AoiValue::from_f64(v))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<AoiValue, E> {
                Ok(AoiValue::Finite(v as f64))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<AoiValue, E> {
                Ok(AoiValue::Finite(v as f64))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<AoiValue, E> {
                match v {
                    "inf" => Ok(AoiValue::Unbounded),
                    other => other
                        .parse::<f64>()
                        .map_err(E::custom)
                        .and_then(|x| self.visit_f64(x)),
                }
            }
        }
        deserializer.deserialize_any(Visitor)
    }
}

/// `P{A = i} = (1 − μ2)^(i−1) μ2` for `i ≥ 1`.
pub fn aoi_pmf(p: &AoiParams, i: u64) -> Result<f64> {
    if i < 1 {
        return Err(Error::Domain("age is at least one slot".into()));
    }
    let mu = p.update_success_prob;
    Ok(geometric_tail(mu, i - 1) * mu)
}

/// Mean age `1/μ2`; unbounded when `μ2 = 0`.
pub fn average_aoi(p: &AoiParams) -> AoiValue {
    let mu = p.update_success_prob;
    if mu == 0.0 {
        AoiValue::Unbounded
    } else {
        AoiValue::Finite(1.0 / mu)
    }
}

/// Violation probability `P{A > x} = (1 − μ2)^x`.
pub fn aoi_violation(p: &AoiParams, x: u64) -> f64 {
    geometric_tail(p.update_success_prob, x)
}

fn geometric_tail(mu: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    match i32::try_from(k) {
        Ok(k) => (1.0 - mu).powi(k),
        Err(_) => (1.0 - mu).powf(k as f64),
    }
}

/// The infinite age chain truncated to `n` states (ages `1..=n`).
///
/// Row `k` resets to age 1 with probability `μ2` and otherwise moves to age
/// `k + 1`; the last state stands for all ages `≥ n` and keeps a self-loop.
/// The stationary mass on ages `< n` is exactly geometric.
pub fn build_aoi_matrix_truncated(p: &AoiParams, n: usize) -> Result<StochasticMatrix> {
    if n < 2 {
        return Err(Error::param("n", "truncated age chain needs at least 2 states"));
    }
    let mu = p.update_success_prob;
    check_probability("update_success_prob", mu)?;
    StochasticMatrix::from_fn(n, |k, j| {
        let next = (k + 1).min(n - 1);
        if j == 0 {
            mu
        } else if j == next {
            1.0 - mu
        } else {
            0.0
        }
    })
}

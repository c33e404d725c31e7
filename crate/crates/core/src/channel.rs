//! Rayleigh block-fading SINR link model.
//!
//! A packet from user `i` is decoded iff its SINR clears the threshold
//! `γ_i`. With exponentially distributed received power the success
//! probabilities have closed forms, both when the user transmits alone and
//! when the other user interferes.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, check_probability, Error, Result};

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a ratio in dB to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One user's radio link towards the common receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// Transmit power in watts.
    pub tx_power: f64,
    /// Distance to the receiver in meters.
    pub distance: f64,
    pub path_loss_exp: f64,
    /// Scale of the exponential received-power fading variable.
    pub fading_scale: f64,
    /// SINR decoding threshold as a linear ratio.
    pub sinr_threshold: f64,
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("tx_power", self.tx_power)?;
        check_positive("distance", self.distance)?;
        check_positive("path_loss_exp", self.path_loss_exp)?;
        check_positive("fading_scale", self.fading_scale)?;
        check_positive("sinr_threshold", self.sinr_threshold)
    }

    /// Mean received power `v·s`.
    fn mean_rx_power(&self) -> f64 {
        self.fading_scale * self.tx_power * self.distance.powf(-self.path_loss_exp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverParams {
    /// Noise power in watts.
    pub noise_power: f64,
}

impl ReceiverParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("noise_power", self.noise_power)
    }
}

/// Per-slot decoding probabilities of both users, alone and under interference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessProbs {
    /// User 1 transmits alone.
    pub p_1_solo: f64,
    /// User 1 transmits while user 2 interferes.
    pub p_1_joint: f64,
    pub p_2_solo: f64,
    pub p_2_joint: f64,
}

impl SuccessProbs {
    /// Evaluates the link model for both users.
    pub fn from_links(link1: &LinkParams, link2: &LinkParams, rx: &ReceiverParams) -> Result<Self> {
        Ok(Self {
            p_1_solo: success_prob_solo(link1, rx)?,
            p_1_joint: success_prob_joint(link1, link2, rx)?,
            p_2_solo: success_prob_solo(link2, rx)?,
            p_2_joint: success_prob_joint(link2, link1, rx)?,
        })
    }

    /// Checks the probability ranges and that interference never helps.
    pub fn validate(&self) -> Result<()> {
        check_probability("p_1_solo", self.p_1_solo)?;
        check_probability("p_1_joint", self.p_1_joint)?;
        check_probability("p_2_solo", self.p_2_solo)?;
        check_probability("p_2_joint", self.p_2_joint)?;
        if self.p_1_joint > self.p_1_solo {
            return Err(Error::param("p_1_joint", "exceeds p_1_solo"));
        }
        if self.p_2_joint > self.p_2_solo {
            return Err(Error::param("p_2_joint", "exceeds p_2_solo"));
        }
        Ok(())
    }

    /// Receiver MPR strength, see [`mpr_strength`].
    pub fn mpr_strength(&self) -> Result<f64> {
        mpr_strength(self)
    }
}

/// `s_i = P_tx · r^(-α)`, in watts.
pub fn received_power_factor(link: &LinkParams) -> Result<f64> {
    link.validate()?;
    Ok(link.tx_power * link.distance.powf(-link.path_loss_exp))
}

/// Probability that user `i` is decoded when transmitting alone:
/// `exp(-γ η / (v s))`.
pub fn success_prob_solo(link: &LinkParams, rx: &ReceiverParams) -> Result<f64> {
    link.validate()?;
    rx.validate()?;
    Ok((-link.sinr_threshold * rx.noise_power / link.mean_rx_power()).exp())
}

/// Probability that user `i` is decoded while user `j` transmits in the
/// same slot: the solo probability scaled by `(1 + γ_i v_j s_j / (v_i s_i))^-1`.
pub fn success_prob_joint(
    link_i: &LinkParams,
    link_j: &LinkParams,
    rx: &ReceiverParams,
) -> Result<f64> {
    let solo = success_prob_solo(link_i, rx)?;
    link_j.validate()?;
    let interference = link_i.sinr_threshold * link_j.mean_rx_power() / link_i.mean_rx_power();
    Ok(solo / (1.0 + interference))
}

/// MPR strength `δ = P_{1/1,2}/P_{1/1} + P_{2/2,1}/P_{2/2}`.
///
/// The receiver is classified as strong when `δ > 1`. For two identical
/// links with negligible noise `δ → 2/(1+γ)`.
pub fn mpr_strength(sp: &SuccessProbs) -> Result<f64> {
    sp.validate()?;
    if sp.p_1_solo == 0.0 {
        return Err(Error::DivisionByZero("p_1_solo"));
    }
    if sp.p_2_solo == 0.0 {
        return Err(Error::DivisionByZero("p_2_solo"));
    }
    Ok(sp.p_1_joint / sp.p_1_solo + sp.p_2_joint / sp.p_2_solo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MprClass {
    Strong,
    Weak,
}

impl MprClass {
    pub fn classify(delta: f64) -> Self {
        if delta > 1.0 {
            MprClass::Strong
        } else {
            MprClass::Weak
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MprClass::Strong => "strong",
            MprClass::Weak => "weak",
        }
    }
}

impl std::fmt::Display for MprClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The symmetric evaluation scenario: 5 mW at 30 m, path-loss exponent 4,
/// unit fading scale, -100 dBm noise, threshold given in dB.
pub fn reference_link(sinr_threshold_db: f64) -> LinkParams {
    LinkParams {
        tx_power: 5e-3,
        distance: 30.0,
        path_loss_exp: 4.0,
        fading_scale: 1.0,
        sinr_threshold: db_to_linear(sinr_threshold_db),
    }
}

pub fn reference_receiver() -> ReceiverParams {
    ReceiverParams {
        noise_power: dbm_to_watts(-100.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn link(tx_power: f64, distance: f64, alpha: f64, gamma: f64) -> LinkParams {
        LinkParams {
            tx_power,
            distance,
            path_loss_exp: alpha,
            fading_scale: 1.0,
            sinr_threshold: gamma,
        }
    }

    #[test]
    fn received_power_factor_examples() {
        let s = received_power_factor(&link(5e-3, 30.0, 4.0, 1.0)).unwrap();
        assert_relative_eq!(s, 6.172_839_506_172_84e-9, max_relative = 1e-12);
        assert_eq!(received_power_factor(&link(1.0, 1.0, 4.0, 1.0)).unwrap(), 1.0);
        assert_eq!(received_power_factor(&link(2.0, 1.0, 7.0, 1.0)).unwrap(), 2.0);
    }

    #[test]
    fn rejects_non_positive_fields() {
        assert!(received_power_factor(&link(0.0, 30.0, 4.0, 1.0)).is_err());
        assert!(received_power_factor(&link(1.0, -1.0, 4.0, 1.0)).is_err());
        assert!(success_prob_solo(&link(1.0, 1.0, 4.0, 0.0), &reference_receiver()).is_err());
        let rx = ReceiverParams { noise_power: 0.0 };
        assert!(success_prob_solo(&link(1.0, 1.0, 4.0, 1.0), &rx).is_err());
    }

    #[test]
    fn solo_examples() {
        let rx = ReceiverParams { noise_power: 1e-13 };
        let tiny = success_prob_solo(&link(5e-3, 30.0, 4.0, 1e-300), &rx).unwrap();
        assert_eq!(tiny, 1.0);

        let p = success_prob_solo(&link(5e-3, 30.0, 4.0, 1.0), &rx).unwrap();
        assert_relative_eq!(p, (-1.62e-5f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(p, 0.999_983_8, epsilon = 1e-7);

        // γη/(vs) = ln 2 with s = 1 W, η = 1 W
        let half = success_prob_solo(
            &link(1.0, 1.0, 4.0, std::f64::consts::LN_2),
            &ReceiverParams { noise_power: 1.0 },
        )
        .unwrap();
        assert_relative_eq!(half, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn joint_examples() {
        let rx = ReceiverParams { noise_power: 1e-30 };
        let l = link(5e-3, 30.0, 4.0, 1.0);
        assert_relative_eq!(success_prob_joint(&l, &l, &rx).unwrap(), 0.5, epsilon = 1e-12);

        let l = link(5e-3, 30.0, 4.0, db_to_linear(-5.0));
        assert_relative_eq!(success_prob_joint(&l, &l, &rx).unwrap(), 0.7598, epsilon = 1e-4);

        let l = link(5e-3, 30.0, 4.0, 1e-300);
        let rx = reference_receiver();
        assert_eq!(
            success_prob_joint(&l, &l, &rx).unwrap(),
            success_prob_solo(&l, &rx).unwrap()
        );
    }

    #[test]
    fn reference_delta_values() {
        for (gamma_db, expected, class) in [
            (-5.0, 1.5195, MprClass::Strong),
            (-3.0, 1.3323, MprClass::Strong),
            (1.0, 0.8854, MprClass::Weak),
        ] {
            let l = reference_link(gamma_db);
            let sp = SuccessProbs::from_links(&l, &l, &reference_receiver()).unwrap();
            let delta = mpr_strength(&sp).unwrap();
            assert!((delta - expected).abs() < 5e-4, "γ={gamma_db} dB: δ={delta}");
            assert_eq!(MprClass::classify(delta), class);
        }
        let l = reference_link(0.0);
        let delta = mpr_strength(&SuccessProbs::from_links(&l, &l, &reference_receiver()).unwrap()).unwrap();
        assert!((delta - 1.0).abs() < 5e-4);
        // δ = 1 is the boundary and counts as weak.
        assert_eq!(MprClass::classify(delta), MprClass::Weak);
    }

    #[test]
    fn delta_symmetric_closed_form() {
        let rx = reference_receiver();
        for gamma in [0.1, 0.5, 1.0, 3.0] {
            let l = link(5e-3, 30.0, 4.0, gamma);
            let sp = SuccessProbs::from_links(&l, &l, &rx).unwrap();
            assert_relative_eq!(mpr_strength(&sp).unwrap(), 2.0 / (1.0 + gamma), max_relative = 1e-12);
        }
    }

    #[test]
    fn delta_zero_solo_guard() {
        let sp = SuccessProbs {
            p_1_solo: 0.0,
            p_1_joint: 0.0,
            p_2_solo: 0.5,
            p_2_joint: 0.2,
        };
        assert_eq!(mpr_strength(&sp), Err(Error::DivisionByZero("p_1_solo")));
    }

    #[test]
    fn success_probs_validation() {
        let sp = SuccessProbs {
            p_1_solo: 0.5,
            p_1_joint: 0.6,
            p_2_solo: 0.5,
            p_2_joint: 0.2,
        };
        assert!(sp.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_link() -> impl Strategy<Value = LinkParams> {
            (1e-4..10.0f64, 1.0..200.0f64, 2.0..6.0f64, 0.1..10.0f64, 1e-3..100.0f64).prop_map(
                |(tx_power, distance, path_loss_exp, fading_scale, sinr_threshold)| LinkParams {
                    tx_power,
                    distance,
                    path_loss_exp,
                    fading_scale,
                    sinr_threshold,
                },
            )
        }

        proptest! {
            #[test]
            fn joint_never_exceeds_solo(a in any_link(), b in any_link(), noise_dbm in -130.0..-60.0f64) {
                let rx = ReceiverParams { noise_power: dbm_to_watts(noise_dbm) };
                let solo = success_prob_solo(&a, &rx).unwrap();
                let joint = success_prob_joint(&a, &b, &rx).unwrap();
                prop_assert!(joint <= solo);
                prop_assert!(solo <= 1.0);
                prop_assert!(joint >= 0.0);
            }

            #[test]
            fn solo_decreasing_in_threshold_and_noise(a in any_link(), noise_dbm in -130.0..-60.0f64) {
                // keep the exponent away from underflow so strict ordering is observable
                let rx = ReceiverParams { noise_power: dbm_to_watts(noise_dbm) };
                let base = success_prob_solo(&a, &rx).unwrap();
                prop_assume!(base > 1e-200 && base < 1.0 - 1e-12);
                let harder = LinkParams { sinr_threshold: a.sinr_threshold * 1.5, ..a };
                prop_assert!(success_prob_solo(&harder, &rx).unwrap() < base);
                let noisier = ReceiverParams { noise_power: rx.noise_power * 1.5 };
                prop_assert!(success_prob_solo(&a, &noisier).unwrap() < base);
            }
        }
    }
}

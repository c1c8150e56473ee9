//! Closed-form performance of the hybrid GLRT in the large-frame regime:
//! false-alarm probability, its pilot-only lower bound, threshold
//! calibration, detection probability as a Marcum-Q law, and the
//! communication-rate convention used for trade-off sweeps.
//!
//! All probability outputs are clamped to [0,1]; the detection-probability
//! parameters record when the offset term `b_d` had to be clamped at zero so
//! that downstream artifacts can report it rather than hide it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{marcum_q1, steering_vector};
use crate::scenario::SystemConfig;
use crate::statistics::NullModel;
use crate::waveform::TransmitPlan;

/// Errors from threshold calibration.
#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("target false-alarm probability {0} outside (0, 1)")]
    InvalidTarget(f64),
}

/// False-alarm probability of the hybrid GLRT at log-domain threshold
/// `log_eta` for frame length `L` and waveform ratio
/// `r = |λ̄_d|²/|λ̄_p|²`:
///
/// `P_fa = exp(−L·logη + r − L·ln(1 + r/L))`, clamped to [0,1].
pub fn fap_closed_form(log_eta: f64, l: usize, ratio: f64) -> f64 {
    let lf = l as f64;
    (-lf * log_eta + ratio - lf * (1.0 + ratio / lf).ln())
        .exp()
        .clamp(0.0, 1.0)
}

/// The payload-free floor of the false-alarm probability,
/// `P̃_fa = exp(−L·logη)`: the FAP a pilot-only frame of the same length
/// would achieve at the same threshold.  Always ≤ [`fap_closed_form`].
pub fn fap_lower_bound(log_eta: f64, l: usize) -> f64 {
    (-(l as f64) * log_eta).exp().clamp(0.0, 1.0)
}

/// Inverts [`fap_closed_form`] for the threshold hitting a target FAP:
///
/// `logη = r/L − ln(1 + r/L) − ln(p)/L`.
pub fn threshold_for_fap(p_fa_target: f64, l: usize, ratio: f64) -> Result<f64, TheoryError> {
    if !(p_fa_target > 0.0 && p_fa_target < 1.0) {
        return Err(TheoryError::InvalidTarget(p_fa_target));
    }
    let lf = l as f64;
    Ok(ratio / lf - (1.0 + ratio / lf).ln() - p_fa_target.ln() / lf)
}

/// The two Marcum-Q arguments of the detection-probability law, plus a flag
/// recording whether `b_d` was clamped at zero (which saturates `P_d` at 1).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DpParameters {
    /// Noncentrality-side argument: `a_d = |α|²|λ̄_p|²β̄ / (1 + |α|²|λ̄_d|²β̄/L)`.
    pub a_d: f64,
    /// Threshold-side argument:
    /// `b_d = −ln p_fa − [|α|²|λ̄_d|²β̄ − L·ln(1 + |α|²|λ̄_d|²β̄/L)]`, floored at 0.
    pub b_d: f64,
    /// True when the raw `b_d` was negative and got floored.
    pub b_d_clamped: bool,
}

/// Computes the Marcum-Q arguments of the detection-probability law.
pub fn dp_parameters(
    p_fa: f64,
    alpha_abs_sq: f64,
    m: &NullModel,
    l: usize,
) -> Result<DpParameters, TheoryError> {
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(TheoryError::InvalidTarget(p_fa));
    }
    let lf = l as f64;
    let pilot_term = alpha_abs_sq * m.lambda_p_bar_sq * m.beta_bar;
    let data_term = alpha_abs_sq * m.lambda_d_bar_sq * m.beta_bar;
    let a_d = pilot_term / (1.0 + data_term / lf);
    let raw_b_d = -p_fa.ln() - (data_term - lf * (1.0 + data_term / lf).ln());
    let b_d_clamped = raw_b_d < 0.0;
    Ok(DpParameters {
        a_d,
        b_d: raw_b_d.max(0.0),
        b_d_clamped,
    })
}

/// Detection probability of the hybrid GLRT at false-alarm level `p_fa`:
/// `P_d = Q₁(√(2a_d), √(2b_d))` with the parameters of [`dp_parameters`].
pub fn dp_closed_form(
    p_fa: f64,
    alpha_abs_sq: f64,
    m: &NullModel,
    l: usize,
) -> Result<f64, TheoryError> {
    let p = dp_parameters(p_fa, alpha_abs_sq, m, l)?;
    Ok(marcum_q1((2.0 * p.a_d).sqrt(), (2.0 * p.b_d).sqrt()).clamp(0.0, 1.0))
}

/// The payload-free ceiling of the detection probability,
/// `P̃_d = Q₁(√(2|α|²|λ̄_p|²β̄), √(−2·ln p_fa))`: what the same pilot energy
/// achieves when no payload interference dilutes the test.
pub fn dp_upper_bound(
    p_fa: f64,
    alpha_abs_sq: f64,
    m: &NullModel,
    l: usize,
) -> Result<f64, TheoryError> {
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(TheoryError::InvalidTarget(p_fa));
    }
    let _ = l;
    let a = (2.0 * alpha_abs_sq * m.lambda_p_bar_sq * m.beta_bar).sqrt();
    let b = (-2.0 * p_fa.ln()).sqrt();
    Ok(marcum_q1(a, b).clamp(0.0, 1.0))
}

/// One evaluated point of the closed-form performance curves.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TheoryPoint {
    /// Log-domain threshold the point was evaluated at.
    pub log_eta: f64,
    /// Closed-form false-alarm probability at this threshold.
    pub p_fa: f64,
    /// Payload-free FAP floor at this threshold.
    pub p_fa_lower_bound: f64,
    /// Closed-form detection probability at this threshold's FAP.
    pub p_d: f64,
    /// Payload-free DP ceiling at this threshold's FAP.
    pub p_d_upper_bound: f64,
    /// Marcum-Q noncentrality argument.
    pub a_d: f64,
    /// Marcum-Q threshold argument (after flooring).
    pub b_d: f64,
    /// Whether `b_d` was floored at zero.
    pub b_d_clamped: bool,
}

/// Evaluates the full closed-form curve point at one threshold.  When the
/// FAP saturates (0 or 1) the DP side is taken to its limit instead of
/// feeding an invalid level into the Marcum-Q law.
pub fn theory_point(
    log_eta: f64,
    alpha_abs_sq: f64,
    m: &NullModel,
    l: usize,
) -> TheoryPoint {
    let ratio = m.ratio();
    let p_fa = fap_closed_form(log_eta, l, ratio);
    let p_fa_lower_bound = fap_lower_bound(log_eta, l);
    let (p_d, p_d_upper_bound, a_d, b_d, b_d_clamped) = if p_fa <= 0.0 {
        (0.0, 0.0, f64::NAN, f64::INFINITY, false)
    } else if p_fa >= 1.0 {
        (1.0, 1.0, f64::NAN, 0.0, false)
    } else {
        let params = dp_parameters(p_fa, alpha_abs_sq, m, l)
            .expect("p_fa checked to lie in (0,1)");
        let p_d = marcum_q1((2.0 * params.a_d).sqrt(), (2.0 * params.b_d).sqrt()).clamp(0.0, 1.0);
        let ub = dp_upper_bound(p_fa, alpha_abs_sq, m, l)
            .expect("p_fa checked to lie in (0,1)");
        (p_d, ub, params.a_d, params.b_d, params.b_d_clamped)
    };
    TheoryPoint {
        log_eta,
        p_fa,
        p_fa_lower_bound,
        p_d,
        p_d_upper_bound,
        a_d,
        b_d,
        b_d_clamped,
    }
}

/// Sum rate of the data payload toward the communication users, in
/// bits/s/Hz: `Σ_k log₂(1 + SINR_k)`.
///
/// Convention (recorded in artifact metadata): user k's channel is the
/// transmit steering vector at the user's departure angle with unit path
/// gain; the signal is the k-th precoder column, interference the remaining
/// columns, and the noise floor is σ².
pub fn communication_rate(plan: &TransmitPlan, cfg: &SystemConfig) -> f64 {
    let noise = cfg.noise_w();
    let mut rate = 0.0;
    for (k, &angle) in cfg.user_aods_deg.iter().enumerate() {
        let h = steering_vector(angle, cfg.n_tx);
        let mut signal = 0.0;
        let mut interference = 0.0;
        for j in 0..cfg.n_users {
            let gain = h.dotc(&plan.f_d.column(j).clone_owned()).norm_sqr();
            if j == k {
                signal = gain;
            } else {
                interference += gain;
            }
        }
        rate += (1.0 + signal / (interference + noise)).log2();
    }
    rate
}

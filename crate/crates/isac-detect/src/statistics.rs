//! The null-hypothesis model and the sufficient statistics of the detection
//! problem.
//!
//! Under H0 the received frame has known mean `U` (the pilot signal through
//! the clutter channel) and per-column covariance `Σ̄ = Σ/L`, where
//! `Σ = L_d·H_e F_d F_dᴴ H_eᴴ + L σ² I` pools the payload interference over
//! the frame.  Every detector consumes the frame only through the whitened
//! projections `μ` onto the target's receive steering vector and the pilot
//! correlation `γ`, together with the deterministic scalars
//! `β = a_tᴴ Σ⁻¹ a_t`, `λ_p = b_tᴴ f_p` and `|λ̄_d|²`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::numerics::{Hermitian, HermitianFactor, NumericsError};
use crate::scenario::{Scenario, SystemConfig};
use crate::waveform::{ReceivedFrame, TransmitPlan};
use crate::C64;

/// Errors from null-model construction.
#[derive(Debug, Error)]
pub enum StatsError {
    #[error("null model construction failed: {0}")]
    Numerics(#[from] NumericsError),
}

/// Everything the detectors need to know about the scene under H0, plus the
/// normalized scalars used by the closed-form analysis.
pub struct NullModel {
    /// Mean of the received frame under H0 (M × L): pilots through clutter.
    pub u: DMatrix<C64>,
    /// Interference-plus-noise covariance Σ (M × M).
    pub sigma: Hermitian,
    /// Per-column covariance Σ̄ = Σ / L.
    pub sigma_bar: Hermitian,
    /// β = a_tᴴ Σ⁻¹ a_t.
    pub beta: f64,
    /// β̄ = a_tᴴ Σ̄⁻¹ a_t = L·β.
    pub beta_bar: f64,
    /// λ_p = b_tᴴ f_p.
    pub lambda_p: C64,
    /// |λ̄_p|² = L_p·|λ_p|².
    pub lambda_p_bar_sq: f64,
    /// |λ̄_d|² = L_d·b_tᴴ F_d F_dᴴ b_t.
    pub lambda_d_bar_sq: f64,
    /// Receive steering vector of the target (copied from the scenario).
    pub a_t: DVector<C64>,
    /// The transmit plan the model was built against.
    pub plan: TransmitPlan,
    /// Σ⁻¹ a_t, cached: the one Hermitian solve shared by all statistics.
    pub whitened_steering: DVector<C64>,
    /// Noise power σ² in watts.
    pub noise_w: f64,
    sigma_bar_factor: HermitianFactor,
}

impl NullModel {
    /// Frame length L of the underlying plan.
    pub fn frame_len(&self) -> usize {
        self.plan.frame.len
    }

    /// Cholesky factor of Σ̄ (used by statistical-mode synthesis).
    pub fn sigma_bar_factor(&self) -> &HermitianFactor {
        &self.sigma_bar_factor
    }

    /// Interference-to-pilot gain ratio `|λ̄_d|² / |λ̄_p|²`, the single
    /// waveform parameter entering the false-alarm law.
    pub fn ratio(&self) -> f64 {
        self.lambda_d_bar_sq / self.lambda_p_bar_sq
    }
}

/// Builds the null model for a scenario and transmit plan.
pub fn build_null_model(
    s: &Scenario,
    plan: &TransmitPlan,
    cfg: &SystemConfig,
) -> Result<NullModel, StatsError> {
    let m = cfg.n_rx;
    let l = plan.frame.len;
    let l_p = plan.frame.pilot_len();
    let l_d = plan.frame.data_len();
    let noise_w = cfg.noise_w();

    let mut sigma_mat = if l_d > 0 {
        let g = &s.h_e * &plan.f_d;
        (&g * g.adjoint()).scale(l_d as f64)
    } else {
        DMatrix::zeros(m, m)
    };
    let floor = l as f64 * noise_w;
    for i in 0..m {
        sigma_mat[(i, i)] += C64::new(floor, 0.0);
    }
    let sigma = Hermitian::from_nearly_hermitian(sigma_mat);
    let sigma_bar = Hermitian::from_nearly_hermitian(sigma.matrix().scale(1.0 / l as f64));
    let factor = HermitianFactor::new(&sigma)?;
    let sigma_bar_factor = HermitianFactor::new(&sigma_bar)?;

    let whitened_steering = factor.solve(&s.a_t);
    let beta = s.a_t.dotc(&whitened_steering).re;
    let beta_bar = l as f64 * beta;

    let lambda_p = s.b_t.dotc(&plan.f_p);
    let lambda_p_bar_sq = l_p as f64 * lambda_p.norm_sqr();
    let lambda_d_bar_sq = l_d as f64 * (plan.f_d.adjoint() * &s.b_t).norm_squared();

    let mut u = DMatrix::zeros(m, l);
    let pilot_column = &s.h_e * &plan.f_p;
    for (k, &pos) in plan.frame.pilot_positions.iter().enumerate() {
        u.set_column(pos, &(&pilot_column * plan.s_p[k]));
    }

    Ok(NullModel {
        u,
        sigma,
        sigma_bar,
        beta,
        beta_bar,
        lambda_p,
        lambda_p_bar_sq,
        lambda_d_bar_sq,
        a_t: s.a_t.clone(),
        plan: plan.clone(),
        whitened_steering,
        noise_w,
        sigma_bar_factor,
    })
}

/// The data-dependent side of the detection problem.
#[derive(Debug, Clone)]
pub struct SufficientStats {
    /// μ = (Y − U)ᴴ Σ⁻¹ a_t (length L).
    pub mu: DVector<C64>,
    /// ‖μ‖².
    pub mu_norm_sq: f64,
    /// γ = λ_p* · μᴴ J_pᵀ s_p*.
    pub gamma: C64,
    /// |γ|².
    pub gamma_abs_sq: f64,
}

/// Computes the sufficient statistics of a frame against a null model.  The
/// Hermitian solve `Σ⁻¹ a_t` is cached in the model, so this is a single
/// pass over the frame.
pub fn sufficient_stats(
    y: &ReceivedFrame,
    m: &NullModel,
    plan: &TransmitPlan,
) -> SufficientStats {
    let rows = m.u.nrows();
    let l = m.u.ncols();
    debug_assert_eq!(y.y.nrows(), rows);
    debug_assert_eq!(y.y.ncols(), l);
    let w = &m.whitened_steering;
    let mut mu = DVector::zeros(l);
    for j in 0..l {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..rows {
            acc += (y.y[(i, j)] - m.u[(i, j)]).conj() * w[i];
        }
        mu[j] = acc;
    }
    let mu_norm_sq = mu.norm_squared();
    let mut pilot_sum = C64::new(0.0, 0.0);
    for (k, &pos) in plan.frame.pilot_positions.iter().enumerate() {
        pilot_sum += mu[pos].conj() * plan.s_p[k].conj();
    }
    let gamma = m.lambda_p.conj() * pilot_sum;
    SufficientStats {
        mu,
        mu_norm_sq,
        gamma,
        gamma_abs_sq: gamma.norm_sqr(),
    }
}

/// Whitened steering vector against the H1 covariance,
/// `(Σ + |α|²|λ̄_d|²·a_t a_tᴴ)⁻¹ a_t`, computed in closed form from the
/// rank-one update: `Σ⁻¹a_t / (1 + |α|²|λ̄_d|²β)`.
pub fn sherman_morrison_gain(m: &NullModel, alpha: C64) -> DVector<C64> {
    let denom = 1.0 + alpha.norm_sqr() * m.lambda_d_bar_sq * m.beta;
    &m.whitened_steering * C64::new(1.0 / denom, 0.0)
}

/// Closed-form H0 moments of the normalized sufficient statistics.
#[derive(Debug, Clone, Copy)]
pub struct MomentsH0 {
    /// E[‖μ‖²/β] = 1.
    pub mu_mean: f64,
    /// Var[‖μ‖²/β] = 1/L.
    pub mu_var: f64,
    /// E[|γ|²] = L⁻²|λ̄_p|²β̄.
    pub gamma_mean: f64,
    /// Var[|γ|²] = (E[|γ|²])² (unit-shape Gamma).
    pub gamma_var: f64,
}

/// H0 moments of `‖μ‖²/β` and `|γ|²`.
pub fn moments_h0(m: &NullModel, l: usize) -> MomentsH0 {
    let lf = l as f64;
    let gamma_mean = m.lambda_p_bar_sq * m.beta_bar / (lf * lf);
    MomentsH0 {
        mu_mean: 1.0,
        mu_var: 1.0 / lf,
        gamma_mean,
        gamma_var: gamma_mean * gamma_mean,
    }
}

/// Closed-form H1 moments of the normalized sufficient statistics.
#[derive(Debug, Clone, Copy)]
pub struct MomentsH1 {
    /// κ = 1 + L⁻¹|α|²|λ̄_d|²β̄.
    pub kappa: f64,
    /// E[‖μ‖²/β].
    pub mu_mean: f64,
    /// Var[‖μ‖²/β].
    pub mu_var: f64,
    /// E[|γ|²].
    pub gamma_mean: f64,
    /// Var[|γ|²].
    pub gamma_var: f64,
}

/// H1 moments of `‖μ‖²/β` and `|γ|²` for target amplitude `alpha`.
pub fn moments_h1(m: &NullModel, alpha: C64, l: usize) -> MomentsH1 {
    let lf = l as f64;
    let a2 = alpha.norm_sqr();
    let lp2 = m.lambda_p_bar_sq;
    let ld2 = m.lambda_d_bar_sq;
    let bb = m.beta_bar;
    let kappa = 1.0 + a2 * ld2 * bb / lf;
    let mu_mean = 1.0 + a2 * (lp2 + ld2) * bb / lf;
    let mu_var = (kappa * kappa + 2.0 * kappa * a2 * lp2 * bb / lf) / lf;
    let gamma_mean = (kappa * lp2 * bb + a2 * lp2 * lp2 * bb * bb) / (lf * lf);
    let gamma_var = (kappa * kappa * lp2 * lp2 * bb * bb
        + 2.0 * kappa * a2 * lp2.powi(3) * bb.powi(3))
        / lf.powi(4);
    MomentsH1 {
        kappa,
        mu_mean,
        mu_var,
        gamma_mean,
        gamma_var,
    }
}

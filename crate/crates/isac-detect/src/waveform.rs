//! Hybrid frame construction and received-signal synthesis.
//!
//! A frame of `L` samples carries `L_p` deterministic pilot samples and
//! `L_d` random payload samples, multiplexed by a known permutation.  Pilots
//! are beamformed toward the target of interest; the payload is precoded
//! toward the downlink users.  Received frames can be synthesized in two
//! modes:
//!
//! * **physical** — the full transmit matrix passes through the clutter
//!   channel (plus the target path under H1) and white noise is added;
//! * **statistical** — the frame is drawn from the Gaussian model the
//!   detector is derived under: mean `U` and pooled per-column covariance
//!   `Σ̄` under H0, with rank-one mean and covariance updates under H1.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use thiserror::Error;

use crate::numerics::{steering_vector, Hermitian, HermitianFactor};
use crate::scenario::{Scenario, SystemConfig};
use crate::statistics::NullModel;
use crate::C64;

/// Errors from frame planning and the binary frame container.
#[derive(Debug, Error)]
pub enum WaveformError {
    #[error("invalid pilot/data split: L_p = {l_p} of L = {l}")]
    InvalidSplit { l: usize, l_p: usize },
    #[error("frame container i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed frame container: {0}")]
    Format(String),
}

/// Which hypothesis a synthesized frame was drawn under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Clutter and noise only.
    H0,
    /// Clutter, noise and the target return.
    H1,
}

impl Hypothesis {
    pub fn as_u8(self) -> u8 {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Hypothesis::H0),
            1 => Some(Hypothesis::H1),
            _ => None,
        }
    }
}

/// How a received frame was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerationMode {
    Physical,
    Statistical,
}

impl GenerationMode {
    pub fn as_u8(self) -> u8 {
        match self {
            GenerationMode::Physical => 0,
            GenerationMode::Statistical => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(GenerationMode::Physical),
            1 => Some(GenerationMode::Statistical),
            _ => None,
        }
    }
}

/// Pilot placement within the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotPattern {
    /// Pilots occupy the first `L_p` slots.
    #[default]
    Prefix,
    /// Pilot `k` sits at slot `⌊k·L/L_p⌋`, spreading pilots evenly with one
    /// pilot every `L/L_p` slots.
    Interleaved,
}

/// Pilot symbol sequence (unit modulus either way; every detection statistic
/// depends on the symbols only through their total energy).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotSymbols {
    /// All-ones sequence.
    #[default]
    Ones,
    /// Independent uniform phases.
    RandomPhase,
}

/// The pilot/data sample partition of a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePlan {
    /// Frame length L.
    pub len: usize,
    /// Ordered pilot slot indices (L_p entries).
    pub pilot_positions: Vec<usize>,
    /// Ordered data slot indices (L_d entries, the complement).
    pub data_positions: Vec<usize>,
}

impl FramePlan {
    pub fn pilot_len(&self) -> usize {
        self.pilot_positions.len()
    }

    pub fn data_len(&self) -> usize {
        self.data_positions.len()
    }
}

/// Builds the pilot/data partition.  `L_p = L` (an all-pilot frame, the
/// conventional radar configuration) is allowed; `L_p = 0` is not.
pub fn build_frame_plan(
    l: usize,
    l_p: usize,
    pattern: PilotPattern,
) -> Result<FramePlan, WaveformError> {
    if l_p == 0 || l_p > l {
        return Err(WaveformError::InvalidSplit { l, l_p });
    }
    let pilot_positions: Vec<usize> = match pattern {
        PilotPattern::Prefix => (0..l_p).collect(),
        PilotPattern::Interleaved => (0..l_p).map(|k| k * l / l_p).collect(),
    };
    let mut is_pilot = vec![false; l];
    for &p in &pilot_positions {
        is_pilot[p] = true;
    }
    let data_positions = (0..l).filter(|&i| !is_pilot[i]).collect();
    Ok(FramePlan {
        len: l,
        pilot_positions,
        data_positions,
    })
}

/// The deterministic transmit side of a frame: pilot beam, pilot symbols,
/// data precoder and the sample partition, together with the
/// energy-normalized forms used throughout the closed-form analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitPlan {
    /// Pilot beamformer with `‖f_p‖² = P_p / L_p`.
    pub f_p: DVector<C64>,
    /// Unit-modulus pilot symbols (length L_p).
    pub s_p: Vec<C64>,
    /// Data precoder with `‖F_d‖_F² = P_d / L_d` (N × N; one column per
    /// user, remaining columns zero).
    pub f_d: DMatrix<C64>,
    /// Sample partition.
    pub frame: FramePlan,
    /// `√L_p · f_p`, so `‖fbar_p‖² = P_p`.
    pub fbar_p: DVector<C64>,
    /// `√L_d · F_d`, so `‖fbar_d‖_F² = P_d`.
    pub fbar_d: DMatrix<C64>,
}

/// Builds the transmit plan for a configuration: the pilot beam is steered
/// toward the target transmit angle (maximizing `|b_tᴴ f_p|` under the
/// pilot power constraint), and the data precoder points one matched beam at
/// each user angle, globally scaled to the data power constraint.
///
/// The random stream is consumed only when `pilot_symbols = random_phase`.
pub fn build_transmit_plan(cfg: &SystemConfig, s: &Scenario, rng: &mut impl Rng) -> TransmitPlan {
    let n = cfg.n_tx;
    let frame = build_frame_plan(cfg.frame_len, cfg.pilot_len, cfg.pilot_pattern)
        .expect("validated config has a valid frame split");
    let l_p = frame.pilot_len();
    let l_d = frame.data_len();

    let f_p = &s.b_t * C64::new((cfg.p_pilot_w() / (l_p as f64 * n as f64)).sqrt(), 0.0);

    let s_p: Vec<C64> = match cfg.pilot_symbols {
        PilotSymbols::Ones => vec![C64::new(1.0, 0.0); l_p],
        PilotSymbols::RandomPhase => (0..l_p)
            .map(|_| C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect(),
    };

    let k = cfg.n_users;
    let mut f_d = DMatrix::zeros(n, n);
    let p_d = cfg.p_data_w();
    if k > 0 && l_d > 0 && p_d > 0.0 {
        let scale = C64::new((p_d / (l_d as f64 * k as f64 * n as f64)).sqrt(), 0.0);
        for (j, &angle) in cfg.user_aods_deg.iter().enumerate() {
            f_d.set_column(j, &(steering_vector(angle, n) * scale));
        }
    }

    let fbar_p = &f_p * C64::new((l_p as f64).sqrt(), 0.0);
    let fbar_d = &f_d * C64::new((l_d as f64).sqrt(), 0.0);
    TransmitPlan {
        f_p,
        s_p,
        f_d,
        frame,
        fbar_p,
        fbar_d,
    }
}

/// Draws the random payload: an `N × L_d` matrix of i.i.d. CN(0, 1)
/// symbols, filled column by column.
pub fn draw_payload(cfg: &SystemConfig, rng: &mut impl Rng) -> DMatrix<C64> {
    let n = cfg.n_tx;
    let l_d = cfg.data_len;
    let mut s = DMatrix::zeros(n, l_d);
    for j in 0..l_d {
        for i in 0..n {
            s[(i, j)] = crate::complex_standard_normal(rng);
        }
    }
    s
}

/// Assembles the `N × L` transmit matrix from a plan and a payload draw:
/// pilot slots carry `f_p · s_p[k]`, data slots carry `F_d` times the
/// corresponding payload column.
pub fn transmit_matrix(plan: &TransmitPlan, payload: &DMatrix<C64>) -> DMatrix<C64> {
    let n = plan.f_p.len();
    let l = plan.frame.len;
    let mut x = DMatrix::zeros(n, l);
    for (k, &pos) in plan.frame.pilot_positions.iter().enumerate() {
        x.set_column(pos, &(&plan.f_p * plan.s_p[k]));
    }
    for (k, &pos) in plan.frame.data_positions.iter().enumerate() {
        x.set_column(pos, &(&plan.f_d * payload.column(k)));
    }
    x
}

/// One received frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    /// Received samples, one column per frame slot (M × L).
    pub y: DMatrix<C64>,
    pub hypothesis: Hypothesis,
    pub generation_mode: GenerationMode,
}

/// Synthesizes a frame through the physical model: the transmit matrix
/// passes through the clutter channel (plus the rank-one target channel
/// `α·a_t·b_tᴴ` under H1) and i.i.d. CN(0, σ²) noise is added.
///
/// Draw order is fixed: payload first, then noise, both column-major, so H0
/// and H1 share their randomness for a given stream state.
pub fn synthesize_physical(
    s: &Scenario,
    plan: &TransmitPlan,
    hypothesis: Hypothesis,
    cfg: &SystemConfig,
    rng: &mut impl Rng,
) -> ReceivedFrame {
    let m = cfg.n_rx;
    let l = plan.frame.len;
    let payload = if plan.frame.data_len() > 0 {
        draw_payload(cfg, rng)
    } else {
        DMatrix::zeros(cfg.n_tx, 0)
    };
    let sigma = cfg.noise_w().sqrt();
    let mut noise = DMatrix::zeros(m, l);
    for j in 0..l {
        for i in 0..m {
            noise[(i, j)] = crate::complex_standard_normal(rng) * sigma;
        }
    }
    let x = transmit_matrix(plan, &payload);
    let mut y = &s.h_e * &x + noise;
    if hypothesis == Hypothesis::H1 && s.alpha != C64::new(0.0, 0.0) {
        // Add α · a_t · (b_tᴴ X) without forming the rank-one channel.
        let bx = s.b_t.adjoint() * &x;
        for j in 0..l {
            let g = s.alpha * bx[(0, j)];
            for i in 0..m {
                y[(i, j)] += s.a_t[i] * g;
            }
        }
    }
    ReceivedFrame {
        y,
        hypothesis,
        generation_mode: GenerationMode::Physical,
    }
}

/// Statistical-mode synthesis with an explicit standard-Gaussian matrix `z`
/// (M × L): H0 gives `Y = U + Σ̄^{1/2} Z`; H1 adds the rank-one mean shift
/// `ΔU(α)` on the pilot slots and widens the covariance by
/// `ΔΣ̄(α) = |α|²|λ̄_d|²/L · a_t a_tᴴ`.
pub fn synthesize_statistical_with_z(
    model: &NullModel,
    alpha: C64,
    hypothesis: Hypothesis,
    z: &DMatrix<C64>,
) -> ReceivedFrame {
    let extra = match hypothesis {
        Hypothesis::H0 => 0.0,
        Hypothesis::H1 => alpha.norm_sqr() * model.lambda_d_bar_sq / model.frame_len() as f64,
    };
    let root = if extra == 0.0 {
        model.sigma_bar_factor().lower()
    } else {
        let mut mat = model.sigma_bar.matrix().clone();
        let a = &model.a_t;
        for j in 0..mat.ncols() {
            let aj = a[j].conj() * extra;
            for i in 0..mat.nrows() {
                mat[(i, j)] += a[i] * aj;
            }
        }
        HermitianFactor::new(&Hermitian::from_nearly_hermitian(mat))
            .expect("covariance plus a PSD update stays positive definite")
            .lower()
    };
    let mut y = &root * z + &model.u;
    if hypothesis == Hypothesis::H1 && alpha != C64::new(0.0, 0.0) {
        // ΔU = α λ_p a_t s_pᵀ J_p: pilot slots only.
        for (k, &pos) in model.plan.frame.pilot_positions.iter().enumerate() {
            let g = alpha * model.lambda_p * model.plan.s_p[k];
            for i in 0..y.nrows() {
                y[(i, pos)] += model.a_t[i] * g;
            }
        }
    }
    ReceivedFrame {
        y,
        hypothesis,
        generation_mode: GenerationMode::Statistical,
    }
}

/// Statistical-mode synthesis drawing `Z` from the stream (column-major).
pub fn synthesize_statistical(
    model: &NullModel,
    alpha: C64,
    hypothesis: Hypothesis,
    rng: &mut impl Rng,
) -> ReceivedFrame {
    let m = model.u.nrows();
    let l = model.u.ncols();
    let mut z = DMatrix::zeros(m, l);
    for j in 0..l {
        for i in 0..m {
            z[(i, j)] = crate::complex_standard_normal(rng);
        }
    }
    synthesize_statistical_with_z(model, alpha, hypothesis, &z)
}

const FRAME_MAGIC: &[u8; 4] = b"ISFR";
const FRAME_VERSION: u16 = 1;

/// Writes a frame to the binary container: a fixed header (magic, version,
/// M, L, hypothesis, generation mode, seed) followed by the samples as
/// interleaved little-endian re/im doubles, column-major.
pub fn write_frame<W: Write>(
    w: &mut W,
    frame: &ReceivedFrame,
    seed: u64,
) -> Result<(), WaveformError> {
    w.write_all(FRAME_MAGIC)?;
    w.write_all(&FRAME_VERSION.to_le_bytes())?;
    w.write_all(&(frame.y.nrows() as u32).to_le_bytes())?;
    w.write_all(&(frame.y.ncols() as u32).to_le_bytes())?;
    w.write_all(&[frame.hypothesis.as_u8(), frame.generation_mode.as_u8()])?;
    w.write_all(&seed.to_le_bytes())?;
    for j in 0..frame.y.ncols() {
        for i in 0..frame.y.nrows() {
            let z = frame.y[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a frame written by [`write_frame`], returning the frame and the
/// stored seed.
pub fn read_frame<R: Read>(r: &mut R) -> Result<(ReceivedFrame, u64), WaveformError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FRAME_MAGIC {
        return Err(WaveformError::Format("bad magic bytes".into()));
    }
    let version = read_u16(r)?;
    if version != FRAME_VERSION {
        return Err(WaveformError::Format(format!(
            "unsupported container version {version}"
        )));
    }
    let m = read_u32(r)? as usize;
    let l = read_u32(r)? as usize;
    if m == 0 || m > 1 << 20 || l > 1 << 24 {
        return Err(WaveformError::Format(format!(
            "implausible dimensions {m} x {l}"
        )));
    }
    let mut two = [0u8; 2];
    r.read_exact(&mut two)?;
    let hypothesis = Hypothesis::from_u8(two[0])
        .ok_or_else(|| WaveformError::Format(format!("bad hypothesis byte {}", two[0])))?;
    let generation_mode = GenerationMode::from_u8(two[1])
        .ok_or_else(|| WaveformError::Format(format!("bad mode byte {}", two[1])))?;
    let mut seed8 = [0u8; 8];
    r.read_exact(&mut seed8)?;
    let seed = u64::from_le_bytes(seed8);
    let mut y = DMatrix::zeros(m, l);
    let mut buf = [0u8; 16];
    for j in 0..l {
        for i in 0..m {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            y[(i, j)] = C64::new(re, im);
        }
    }
    Ok((
        ReceivedFrame {
            y,
            hypothesis,
            generation_mode,
        },
        seed,
    ))
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16, WaveformError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, WaveformError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::generate_scenario;
    use crate::statistics::build_null_model;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quiet_cfg() -> SystemConfig {
        // Noise power far below every other scale: effectively noiseless.
        let mut cfg = SystemConfig::default();
        cfg.noise_dbm = -3000.0;
        cfg
    }

    #[test]
    fn frame_plan_examples() {
        let p = build_frame_plan(4, 2, PilotPattern::Prefix).unwrap();
        assert_eq!(p.pilot_positions, vec![0, 1]);
        assert_eq!(p.data_positions, vec![2, 3]);
        let p = build_frame_plan(4, 2, PilotPattern::Interleaved).unwrap();
        assert_eq!(p.pilot_positions, vec![0, 2]);
        assert_eq!(p.data_positions, vec![1, 3]);
        // All-pilot frames are allowed (conventional radar configuration).
        let p = build_frame_plan(8, 8, PilotPattern::Prefix).unwrap();
        assert_eq!(p.data_positions.len(), 0);
        assert!(build_frame_plan(8, 0, PilotPattern::Prefix).is_err());
        assert!(build_frame_plan(8, 9, PilotPattern::Prefix).is_err());
    }

    proptest! {
        /// The pilot/data partition covers every slot exactly once, for both
        /// patterns and any split.
        #[test]
        fn frame_plan_partitions(l in 1usize..96, frac in 0.01f64..1.0,
                                 interleaved in proptest::bool::ANY) {
            let l_p = ((l as f64 * frac).ceil() as usize).clamp(1, l);
            let pattern = if interleaved { PilotPattern::Interleaved } else { PilotPattern::Prefix };
            let p = build_frame_plan(l, l_p, pattern).unwrap();
            prop_assert_eq!(p.pilot_positions.len(), l_p);
            prop_assert_eq!(p.data_positions.len(), l - l_p);
            let mut seen = vec![0u8; l];
            for &i in p.pilot_positions.iter().chain(p.data_positions.iter()) {
                prop_assert!(i < l);
                seen[i] += 1;
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn permutation_round_trip_is_lossless() {
        // Scatter pilot/data blocks into a frame and gather them back.
        let plan = build_frame_plan(16, 5, PilotPattern::Interleaved).unwrap();
        let pilot_block: Vec<f64> = (0..5).map(|k| 100.0 + k as f64).collect();
        let data_block: Vec<f64> = (0..11).map(|k| 200.0 + k as f64).collect();
        let mut frame = vec![0.0; 16];
        for (k, &pos) in plan.pilot_positions.iter().enumerate() {
            frame[pos] = pilot_block[k];
        }
        for (k, &pos) in plan.data_positions.iter().enumerate() {
            frame[pos] = data_block[k];
        }
        let pilots_back: Vec<f64> = plan.pilot_positions.iter().map(|&p| frame[p]).collect();
        let data_back: Vec<f64> = plan.data_positions.iter().map(|&p| frame[p]).collect();
        assert_eq!(pilots_back, pilot_block);
        assert_eq!(data_back, data_block);
    }

    #[test]
    fn transmit_plan_energy_constraints() {
        let cfg = SystemConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = generate_scenario(&cfg, &mut rng);
        let plan = build_transmit_plan(&cfg, &s, &mut rng);
        let p_p = cfg.p_pilot_w();
        let p_d = cfg.p_data_w();
        assert_relative_eq!(
            plan.f_p.norm_squared(),
            p_p / cfg.pilot_len as f64,
            max_relative = 1e-12
        );
        assert_relative_eq!(plan.f_d.norm_squared(), p_d / cfg.data_len as f64, max_relative = 1e-12);
        assert_relative_eq!(plan.fbar_p.norm_squared(), p_p, max_relative = 1e-12);
        assert_relative_eq!(plan.fbar_d.norm_squared(), p_d, max_relative = 1e-12);
        for sym in &plan.s_p {
            assert_relative_eq!(sym.norm(), 1.0, max_relative = 1e-12);
        }
        // The pilot beam is matched: |b_tᴴ fbar_p|² meets the Cauchy-Schwarz
        // bound P_p‖b_t‖² with equality.
        let lam_bar_sq = s.b_t.dotc(&plan.fbar_p).norm_sqr();
        let bound = p_p * s.b_t.norm_squared();
        assert!(lam_bar_sq <= bound * (1.0 + 1e-12));
        assert_relative_eq!(lam_bar_sq, bound, max_relative = 1e-12);
    }

    #[test]
    fn transmit_plan_handles_disabled_payload() {
        let mut cfg = SystemConfig::default();
        cfg.p_data_dbm = f64::NEG_INFINITY;
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let s = generate_scenario(&cfg, &mut rng);
        let plan = build_transmit_plan(&cfg, &s, &mut rng);
        assert_eq!(plan.f_d.norm_squared(), 0.0);
        assert_eq!(plan.fbar_d.norm_squared(), 0.0);
    }

    #[test]
    fn payload_is_reproducible_and_standard() {
        let cfg = SystemConfig::default();
        let a = draw_payload(&cfg, &mut ChaCha8Rng::seed_from_u64(23));
        let b = draw_payload(&cfg, &mut ChaCha8Rng::seed_from_u64(23));
        assert_eq!(a, b);

        // Moments over ~1e5 entries.
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mut sum = C64::new(0.0, 0.0);
        let mut sum2 = 0.0;
        let mut sum_re2 = 0.0;
        let mut sum_im2 = 0.0;
        let mut count = 0usize;
        while count < 100_000 {
            let p = draw_payload(&cfg, &mut rng);
            for z in p.iter() {
                sum += z;
                sum2 += z.norm_sqr();
                sum_re2 += z.re * z.re;
                sum_im2 += z.im * z.im;
                count += 1;
            }
        }
        let n = count as f64;
        assert!((sum / n).norm() < 0.02);
        assert!((sum2 / n - 1.0).abs() < 0.02);
        assert!((sum_re2 / n - 0.5).abs() < 0.02);
        assert!((sum_im2 / n - 0.5).abs() < 0.02);
    }

    #[test]
    fn pilot_energy_is_exact_and_payload_energy_matches_budget() {
        let cfg = SystemConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let s = generate_scenario(&cfg, &mut rng);
        let plan = build_transmit_plan(&cfg, &s, &mut rng);
        let mut data_energy = 0.0;
        let trials = 10_000;
        for t in 0..trials {
            let payload = draw_payload(&cfg, &mut rng);
            let x = transmit_matrix(&plan, &payload);
            if t == 0 {
                let pilot_energy: f64 = plan
                    .frame
                    .pilot_positions
                    .iter()
                    .map(|&p| x.column(p).norm_squared())
                    .sum();
                assert_relative_eq!(pilot_energy, cfg.p_pilot_w(), max_relative = 1e-12);
            }
            data_energy += plan
                .frame
                .data_positions
                .iter()
                .map(|&p| x.column(p).norm_squared())
                .sum::<f64>();
        }
        let mean = data_energy / trials as f64;
        assert!(
            (mean - cfg.p_data_w()).abs() / cfg.p_data_w() < 0.03,
            "mean payload energy {mean} vs budget {}",
            cfg.p_data_w()
        );
    }

    #[test]
    fn physical_h1_with_zero_alpha_equals_h0() {
        let mut cfg = SystemConfig::default();
        cfg.alpha_true = C64::new(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let s = generate_scenario(&cfg, &mut rng);
        let plan = build_transmit_plan(&cfg, &s, &mut rng);
        let y0 = synthesize_physical(&s, &plan, Hypothesis::H0, &cfg, &mut ChaCha8Rng::seed_from_u64(27));
        let y1 = synthesize_physical(&s, &plan, Hypothesis::H1, &cfg, &mut ChaCha8Rng::seed_from_u64(27));
        assert_eq!(y0.y, y1.y);
    }

    #[test]
    fn physical_frame_is_zero_without_channel_and_noise() {
        let mut cfg = quiet_cfg();
        cfg.n_paths = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let s = generate_scenario(&cfg, &mut rng);
        let plan = build_transmit_plan(&cfg, &s, &mut rng);
        let y = synthesize_physical(&s, &plan, Hypothesis::H0, &cfg, &mut rng);
        assert!(y.y.norm() < 1e-100);
    }

    #[test]
    fn physical_pilot_column_carries_target_return() {
        let mut cfg = quiet_cfg();
        cfg.n_paths = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let s = generate_scenario(&cfg, &mut rng);
        let plan = build_transmit_plan(&cfg, &s, &mut rng);
        let y = synthesize_physical(&s, &plan, Hypothesis::H1, &cfg, &mut rng);
        let lam_p = s.b_t.dotc(&plan.f_p);
        for (k, &pos) in plan.frame.pilot_positions.iter().enumerate() {
            let expected = &s.a_t * (s.alpha * lam_p * plan.s_p[k]);
            let diff = (y.y.column(pos) - &expected).norm();
            assert!(diff < 1e-12 * expected.norm(), "pilot column {pos}: diff {diff}");
        }
    }

    #[test]
    fn statistical_mode_mean_is_u() {
        let cfg = SystemConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let s = generate_scenario(&cfg, &mut rng);
        let plan = build_transmit_plan(&cfg, &s, &mut rng);
        let model = build_null_model(&s, &plan, &cfg).unwrap();
        let z = DMatrix::zeros(cfg.n_rx, cfg.frame_len);
        let y = synthesize_statistical_with_z(&model, C64::new(0.0, 0.0), Hypothesis::H0, &z);
        assert_eq!(y.y, model.u);
    }

    #[test]
    fn statistical_h1_with_zero_alpha_equals_h0() {
        let cfg = SystemConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let s = generate_scenario(&cfg, &mut rng);
        let plan = build_transmit_plan(&cfg, &s, &mut rng);
        let model = build_null_model(&s, &plan, &cfg).unwrap();
        let zero = C64::new(0.0, 0.0);
        let y0 = synthesize_statistical(&model, zero, Hypothesis::H0, &mut ChaCha8Rng::seed_from_u64(32));
        let y1 = synthesize_statistical(&model, zero, Hypothesis::H1, &mut ChaCha8Rng::seed_from_u64(32));
        assert_eq!(y0.y, y1.y);
    }

    #[test]
    fn statistical_mode_covariance_matches_model() {
        let cfg = SystemConfig::default().with_frame_len(32);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let s = generate_scenario(&cfg, &mut rng);
        let plan = build_transmit_plan(&cfg, &s, &mut rng);
        let model = build_null_model(&s, &plan, &cfg).unwrap();
        let m = cfg.n_rx;
        let mut cov = DMatrix::<C64>::zeros(m, m);
        let trials = 15_000usize;
        for _ in 0..trials {
            let f = synthesize_statistical(&model, s.alpha, Hypothesis::H0, &mut rng);
            let d = &f.y - &model.u;
            // Pool all columns: each is an independent CN(0, Σ̄) sample.
            cov += &d * d.adjoint();
        }
        cov /= C64::new((trials * cfg.frame_len) as f64, 0.0);
        let err = (&cov - model.sigma_bar.matrix()).norm() / model.sigma_bar.matrix().norm();
        assert!(err < 0.05, "covariance relative error {err}");
    }

    #[test]
    fn container_round_trip() {
        let cfg = SystemConfig::default().with_frame_len(8);
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let s = generate_scenario(&cfg, &mut rng);
        let plan = build_transmit_plan(&cfg, &s, &mut rng);
        let frame = synthesize_physical(&s, &plan, Hypothesis::H1, &cfg, &mut rng);
        let mut buf = Vec::new();
        write_frame(&mut buf, &frame, 777).unwrap();
        let (back, seed) = read_frame(&mut buf.as_slice()).unwrap();
        assert_eq!(seed, 777);
        assert_eq!(back.hypothesis, Hypothesis::H1);
        assert_eq!(back.generation_mode, GenerationMode::Physical);
        assert_eq!(back.y, frame.y);

        // Corrupt magic.
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_frame(&mut bad.as_slice()),
            Err(WaveformError::Format(_))
        ));
        // Truncated body.
        let short = &buf[..buf.len() - 3];
        assert!(read_frame(&mut &short[..]).is_err());
    }
}

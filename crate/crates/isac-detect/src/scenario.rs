//! System configuration and propagation scenario generation.
//!
//! A [`SystemConfig`] carries every physical and frame parameter: antenna
//! counts, frame split, powers in dBm, the target and user angles, the
//! clutter geometry and the deterministic target amplitude used under H1.
//! Configurations serialize to a flat TOML file whose keys carry units in
//! their names (`…_dbm`, `…_deg`, `…_m`).
//!
//! A [`Scenario`] is one random realization of the clutter channel: a set of
//! discrete scattering paths with uniformly drawn angles and complex
//! Gaussian gains whose variance follows the log-distance path-loss law with
//! per-path log-normal shadowing.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numerics::steering_vector;
use crate::waveform::{PilotPattern, PilotSymbols};
use crate::C64;

/// Errors raised while loading, editing or validating configurations.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid field {field}: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("inconsistent configuration: {0}")]
    Inconsistent(String),
}

/// All physical and frame parameters of the system under study.
///
/// The default values reproduce the reference operating point: an 8-element
/// transmit array and 16-element receive array at 28 GHz, a 128-sample frame
/// with a quarter of the samples carrying pilots, 30 dBm pilot and data
/// power, −90 dBm noise power, a target at 10° both in departure and
/// arrival, three downlink users at 20°/25°/30° and three clutter paths
/// scattered uniformly in the 50°–60° sector at 40 m range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Transmit antennas N.
    pub n_tx: usize,
    /// Receive antennas M.
    pub n_rx: usize,
    /// Downlink users K (must match the number of user angles).
    pub n_users: usize,
    /// Carrier frequency (metadata; the model is in baseband).
    pub carrier_ghz: f64,
    /// Frame length L in samples.
    #[serde(rename = "L")]
    pub frame_len: usize,
    /// Pilot samples L_p.
    #[serde(rename = "L_p")]
    pub pilot_len: usize,
    /// Data samples L_d.
    #[serde(rename = "L_d")]
    pub data_len: usize,
    /// Pilot power budget P_p.
    pub p_pilot_dbm: f64,
    /// Data power budget P_d (`-inf` disables the payload entirely).
    pub p_data_dbm: f64,
    /// Noise power σ² at the sensing receiver.
    pub noise_dbm: f64,
    /// Target angle of departure.
    pub target_aod_deg: f64,
    /// Target angle of arrival at the sensing receiver.
    pub target_aoa_deg: f64,
    /// User angles of departure (one beam per user).
    pub user_aods_deg: Vec<f64>,
    /// Clutter departure-angle interval.
    pub clutter_aod_range_deg: [f64; 2],
    /// Clutter arrival-angle interval.
    pub clutter_aoa_range_deg: [f64; 2],
    /// Number of discrete clutter paths (0 = clutter-free).
    pub n_paths: usize,
    /// Transmitter-to-scene distance used by the path-loss law.
    pub tx_rx_distance_m: f64,
    /// Path-loss intercept a in ϑ(d) = a + 10·b·log10(d) + shadow.
    pub pathloss_a: f64,
    /// Path-loss exponent b.
    pub pathloss_b: f64,
    /// Log-normal shadowing standard deviation (dB).
    pub shadow_sigma_db: f64,
    /// Deterministic target amplitude α used under H1 (serialized as
    /// `[re, im]`).
    pub alpha_true: C64,
    /// Pilot placement within the frame.
    #[serde(default)]
    pub pilot_pattern: PilotPattern,
    /// Pilot symbol sequence.
    #[serde(default)]
    pub pilot_symbols: PilotSymbols,
    /// Master seed for every random stream derived from this config.
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let mut cfg = Self {
            n_tx: 8,
            n_rx: 16,
            n_users: 3,
            carrier_ghz: 28.0,
            frame_len: 128,
            pilot_len: 32,
            data_len: 96,
            p_pilot_dbm: 30.0,
            p_data_dbm: 30.0,
            noise_dbm: -90.0,
            target_aod_deg: 10.0,
            target_aoa_deg: 10.0,
            user_aods_deg: vec![20.0, 25.0, 30.0],
            clutter_aod_range_deg: [50.0, 60.0],
            clutter_aoa_range_deg: [50.0, 60.0],
            n_paths: 3,
            tx_rx_distance_m: 40.0,
            pathloss_a: 61.4,
            pathloss_b: 2.0,
            shadow_sigma_db: 5.8,
            alpha_true: C64::new(0.0, 0.0),
            pilot_pattern: PilotPattern::default(),
            pilot_symbols: PilotSymbols::default(),
            seed: 20260823,
        };
        // Default target strength: 6 dB post-processing SNR at the default
        // powers, with an arbitrary fixed phase.
        let mag = cfg.amplitude_for_target_snr(6.0);
        cfg.alpha_true = C64::from_polar(mag, 30f64.to_radians());
        cfg
    }
}

impl SystemConfig {
    /// Parses a flat TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes to TOML (the canonical artifact-header form).
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Loads and validates a TOML config file.
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        Self::from_toml_str(&text)
    }

    /// Short hash of the canonical serialized form, recorded in artifact
    /// headers so outputs can be traced to the exact configuration.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_toml_string().as_bytes());
        let digest = h.finalize();
        let mut out = String::with_capacity(16);
        for b in &digest[..8] {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }

    /// Checks structural consistency; called by every loader.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let field = |field: &str, reason: String| ConfigError::InvalidField {
            field: field.into(),
            reason,
        };
        if self.n_tx == 0 || self.n_rx == 0 {
            return Err(field("n_tx/n_rx", "antenna counts must be positive".into()));
        }
        if self.frame_len != self.pilot_len + self.data_len {
            return Err(ConfigError::Inconsistent(format!(
                "L = {} but L_p + L_d = {}",
                self.frame_len,
                self.pilot_len + self.data_len
            )));
        }
        if self.pilot_len == 0 {
            return Err(field("L_p", "at least one pilot sample is required".into()));
        }
        if !self.p_pilot_dbm.is_finite() {
            return Err(field("p_pilot_dbm", "pilot power must be finite".into()));
        }
        if self.p_data_dbm.is_nan() || self.p_data_dbm == f64::INFINITY {
            return Err(field("p_data_dbm", "data power must be finite or -inf".into()));
        }
        if !self.noise_dbm.is_finite() {
            return Err(field("noise_dbm", "noise power must be finite".into()));
        }
        if self.n_users != self.user_aods_deg.len() {
            return Err(ConfigError::Inconsistent(format!(
                "n_users = {} but {} user angles are listed",
                self.n_users,
                self.user_aods_deg.len()
            )));
        }
        for (name, [lo, hi]) in [
            ("clutter_aod_range_deg", self.clutter_aod_range_deg),
            ("clutter_aoa_range_deg", self.clutter_aoa_range_deg),
        ] {
            if !(lo <= hi) {
                return Err(field(name, format!("invalid interval [{lo}, {hi}]")));
            }
        }
        if !(self.tx_rx_distance_m > 0.0) {
            return Err(field("tx_rx_distance_m", "distance must be positive".into()));
        }
        if !(self.shadow_sigma_db >= 0.0) {
            return Err(field("shadow_sigma_db", "must be nonnegative".into()));
        }
        if !self.alpha_true.re.is_finite() || !self.alpha_true.im.is_finite() {
            return Err(field("alpha_true", "must be finite".into()));
        }
        Ok(())
    }

    /// Non-fatal configuration notes surfaced in experiment logs.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.pilot_len <= self.n_tx && self.pilot_len < self.frame_len {
            w.push(format!(
                "L_p = {} does not exceed N = {}; the identifiability assumptions \
                 behind the closed-form analysis are stretched at this split",
                self.pilot_len, self.n_tx
            ));
        }
        if self.data_len > 0 && self.data_len <= self.n_tx {
            w.push(format!(
                "L_d = {} does not exceed N = {}",
                self.data_len, self.n_tx
            ));
        }
        if self.n_paths == 0 {
            w.push("n_paths = 0: clutter-free scenario".into());
        }
        w
    }

    /// Returns a copy with frame length `l`, preserving this config's pilot
    /// fraction (rounded, clamped so both segments stay nonempty when
    /// `l > 1`).
    pub fn with_frame_len(&self, l: usize) -> Self {
        let mut cfg = self.clone();
        let frac = self.pilot_len as f64 / self.frame_len as f64;
        let mut lp = (l as f64 * frac).round() as usize;
        lp = lp.clamp(1, l.saturating_sub(1).max(1));
        cfg.frame_len = l;
        cfg.pilot_len = lp;
        cfg.data_len = l - lp;
        cfg
    }

    /// Noise power σ² in watts.
    pub fn noise_w(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Pilot power budget in watts.
    pub fn p_pilot_w(&self) -> f64 {
        dbm_to_watts(self.p_pilot_dbm)
    }

    /// Data power budget in watts (0 when disabled).
    pub fn p_data_w(&self) -> f64 {
        dbm_to_watts(self.p_data_dbm)
    }

    /// Target amplitude magnitude that yields post-processing SNR `snr_db`
    /// in the clutter-free, matched-pilot-beam reference system:
    /// `SNR = |α|² · (P_p N) · (M / σ²)`.
    pub fn amplitude_for_target_snr(&self, snr_db: f64) -> f64 {
        let snr = 10f64.powf(snr_db / 10.0);
        let reference_gain = self.p_pilot_w() * self.n_tx as f64 * self.n_rx as f64 / self.noise_w();
        (snr / reference_gain).sqrt()
    }
}

/// Applies `key = value` override pairs to a configuration.
///
/// Values use TOML literal syntax (`8`, `-inf`, `[20.0, 25.0]`, `"prefix"`).
/// Overriding `L` alone rescales `L_p`/`L_d` to preserve the original pilot
/// fraction; overriding `L_p` or `L_d` together with `L` sets the split
/// explicitly (the remaining segment is derived when only one is given).
pub fn apply_overrides(
    cfg: &SystemConfig,
    pairs: &[(String, String)],
) -> Result<SystemConfig, ConfigError> {
    let mut table: toml::Table = toml::from_str(&cfg.to_toml_string())
        .map_err(|e| ConfigError::Parse(e.to_string()))?;
    let has = |k: &str| pairs.iter().any(|(key, _)| key == k);
    let explicit_split = (has("L_p"), has("L_d"));
    let frac = cfg.pilot_len as f64 / cfg.frame_len as f64;
    for (key, value) in pairs {
        if !table.contains_key(key.as_str()) {
            return Err(ConfigError::InvalidField {
                field: key.clone(),
                reason: "unknown configuration key".into(),
            });
        }
        let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .map(|mut t| t.remove("v").unwrap())
            .or_else(|_| {
                toml::from_str::<toml::Table>(&format!("v = \"{value}\""))
                    .map(|mut t| t.remove("v").unwrap())
            })
            .map_err(|e| ConfigError::InvalidField {
                field: key.clone(),
                reason: format!("cannot parse value {value:?}: {e}"),
            })?;
        table.insert(key.clone(), parsed);
    }
    // Re-derive the frame split when it was not fully specified.
    let l = table
        .get("L")
        .and_then(|v| v.as_integer())
        .ok_or_else(|| ConfigError::InvalidField {
            field: "L".into(),
            reason: "must be an integer".into(),
        })? as usize;
    match explicit_split {
        (false, false) => {
            let lp = ((l as f64 * frac).round() as usize).clamp(1, l.saturating_sub(1).max(1));
            table.insert("L_p".into(), toml::Value::Integer(lp as i64));
            table.insert("L_d".into(), toml::Value::Integer((l - lp) as i64));
        }
        (true, false) => {
            let lp = table.get("L_p").and_then(|v| v.as_integer()).unwrap_or(0) as usize;
            table.insert(
                "L_d".into(),
                toml::Value::Integer(l.saturating_sub(lp) as i64),
            );
        }
        (false, true) => {
            let ld = table.get("L_d").and_then(|v| v.as_integer()).unwrap_or(0) as usize;
            table.insert(
                "L_p".into(),
                toml::Value::Integer(l.saturating_sub(ld) as i64),
            );
        }
        (true, true) => {}
    }
    let text = toml::to_string(&table).map_err(|e| ConfigError::Parse(e.to_string()))?;
    SystemConfig::from_toml_str(&text)
}

/// Log-distance path loss in dB: `a + 10·b·log10(d) + shadow`.
pub fn path_loss_db(distance_m: f64, cfg: &SystemConfig, shadow_db: f64) -> f64 {
    debug_assert!(distance_m > 0.0);
    cfg.pathloss_a + 10.0 * cfg.pathloss_b * distance_m.log10() + shadow_db
}

/// Converts dBm to watts; `-inf` maps to exactly 0.
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    if p_dbm == f64::NEG_INFINITY {
        0.0
    } else {
        10f64.powf((p_dbm - 30.0) / 10.0)
    }
}

/// One discrete clutter scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutterPath {
    /// Complex path gain ε.
    pub gain: C64,
    /// Angle of arrival at the sensing receiver.
    pub aoa_deg: f64,
    /// Angle of departure at the transmitter.
    pub aod_deg: f64,
}

/// One realization of the propagation environment without the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Clutter channel H_e (M × N), equal to the sum of the stored paths.
    pub h_e: DMatrix<C64>,
    /// Receive steering vector of the target of interest (‖a_t‖² = M).
    pub a_t: DVector<C64>,
    /// Transmit steering vector of the target of interest (‖b_t‖² = N).
    pub b_t: DVector<C64>,
    /// Target amplitude in force under H1.
    pub alpha: C64,
    /// The discrete paths that compose `h_e`.
    pub clutter_paths: Vec<ClutterPath>,
}

impl Scenario {
    /// Rebuilds the clutter channel from the stored paths.  This reproduces
    /// `h_e` bit for bit because scenario generation uses the same
    /// accumulation, in the same path order.
    pub fn reconstruct_channel(&self, m: usize, n: usize) -> DMatrix<C64> {
        accumulate_channel(&self.clutter_paths, m, n)
    }
}

fn accumulate_channel(paths: &[ClutterPath], m: usize, n: usize) -> DMatrix<C64> {
    let mut h = DMatrix::zeros(m, n);
    for p in paths {
        let a = steering_vector(p.aoa_deg, m);
        let b = steering_vector(p.aod_deg, n);
        // h += gain * a * b^H, accumulated entrywise.
        for j in 0..n {
            let bj = b[j].conj() * p.gain;
            for i in 0..m {
                h[(i, j)] += a[i] * bj;
            }
        }
    }
    h
}

/// Draws one clutter scenario.
///
/// Per path, in a fixed draw order (departure angle, arrival angle,
/// shadowing, then the two Gaussian components of the gain): angles are
/// uniform over the configured sectors, and the gain is complex Gaussian
/// with variance `10^(-ϑ(d)/10)` where the path loss ϑ includes a fresh
/// shadowing draw `N(0, shadow_sigma_db²)`.
pub fn generate_scenario(cfg: &SystemConfig, rng: &mut impl Rng) -> Scenario {
    let mut paths = Vec::with_capacity(cfg.n_paths);
    for _ in 0..cfg.n_paths {
        let aod_deg = draw_uniform(rng, cfg.clutter_aod_range_deg);
        let aoa_deg = draw_uniform(rng, cfg.clutter_aoa_range_deg);
        let shadow = cfg.shadow_sigma_db * crate::real_standard_normal(rng);
        let variance = 10f64.powf(-0.1 * path_loss_db(cfg.tx_rx_distance_m, cfg, shadow));
        let gain = crate::complex_standard_normal(rng) * variance.sqrt();
        paths.push(ClutterPath {
            gain,
            aoa_deg,
            aod_deg,
        });
    }
    Scenario {
        h_e: accumulate_channel(&paths, cfg.n_rx, cfg.n_tx),
        a_t: steering_vector(cfg.target_aoa_deg, cfg.n_rx),
        b_t: steering_vector(cfg.target_aod_deg, cfg.n_tx),
        alpha: cfg.alpha_true,
        clutter_paths: paths,
    }
}

fn draw_uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Scale diagnostics recorded in experiment logs.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSummary {
    /// Frobenius norm of the clutter channel.
    pub channel_frobenius: f64,
    /// `|α|² · M · N / σ²`: best-case target power over noise.
    pub target_to_noise: f64,
    /// `‖H_e‖_F² / (M σ²)`: clutter power per receive antenna over noise.
    pub clutter_to_noise: f64,
}

/// Summarizes the scale of a scenario relative to the noise floor.
pub fn snr_like_summary(s: &Scenario, cfg: &SystemConfig) -> ScenarioSummary {
    let fro2 = s.h_e.norm_squared();
    let sigma2 = cfg.noise_w();
    ScenarioSummary {
        channel_frobenius: fro2.sqrt(),
        target_to_noise: s.alpha.norm_sqr() * s.a_t.norm_squared() * s.b_t.norm_squared() / sigma2,
        clutter_to_noise: fro2 / (cfg.n_rx as f64 * sigma2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = SystemConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string();
        let back = SystemConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn load_from_file() {
        let cfg = SystemConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sys.toml");
        std::fs::write(&path, cfg.to_toml_string()).unwrap();
        assert_eq!(SystemConfig::load(&path).unwrap(), cfg);
    }

    #[test]
    fn override_frame_length_preserves_pilot_fraction() {
        let cfg = SystemConfig::default();
        let out = apply_overrides(&cfg, &[("L".into(), "8".into())]).unwrap();
        assert_eq!((out.frame_len, out.pilot_len, out.data_len), (8, 2, 6));
        let out = apply_overrides(&cfg, &[("L".into(), "512".into())]).unwrap();
        assert_eq!((out.frame_len, out.pilot_len, out.data_len), (512, 128, 384));
        // Explicit split wins.
        let out = apply_overrides(
            &cfg,
            &[("L".into(), "16".into()), ("L_p".into(), "16".into())],
        )
        .unwrap();
        assert_eq!((out.frame_len, out.pilot_len, out.data_len), (16, 16, 0));
    }

    #[test]
    fn override_parses_toml_values() {
        let cfg = SystemConfig::default();
        let out = apply_overrides(
            &cfg,
            &[
                ("p_data_dbm".into(), "-inf".into()),
                ("user_aods_deg".into(), "[20.0, 40.0]".into()),
                ("n_users".into(), "2".into()),
                ("pilot_pattern".into(), "interleaved".into()),
            ],
        )
        .unwrap();
        assert_eq!(out.p_data_dbm, f64::NEG_INFINITY);
        assert_eq!(out.p_data_w(), 0.0);
        assert_eq!(out.user_aods_deg, vec![20.0, 40.0]);
        assert_eq!(out.pilot_pattern, PilotPattern::Interleaved);

        assert!(apply_overrides(&cfg, &[("bogus".into(), "1".into())]).is_err());
    }

    #[test]
    fn validation_catches_inconsistencies() {
        let mut cfg = SystemConfig::default();
        cfg.data_len = 90;
        assert!(matches!(cfg.validate(), Err(ConfigError::Inconsistent(_))));

        let mut cfg = SystemConfig::default();
        cfg.n_users = 4;
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::default();
        cfg.p_pilot_dbm = f64::NAN;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn short_pilot_segments_warn_but_validate() {
        let cfg = SystemConfig::default().with_frame_len(16);
        cfg.validate().unwrap();
        assert_eq!((cfg.pilot_len, cfg.data_len), (4, 12));
        assert!(!cfg.warnings().is_empty());
    }

    #[test]
    fn path_loss_reference_points() {
        let cfg = SystemConfig::default();
        assert_relative_eq!(path_loss_db(1.0, &cfg, 0.0), 61.4);
        assert_relative_eq!(path_loss_db(10.0, &cfg, 0.0), 81.4);
        assert!((path_loss_db(40.0, &cfg, 0.0) - 93.44).abs() < 0.01);
    }

    #[test]
    fn dbm_conversions() {
        assert_relative_eq!(dbm_to_watts(30.0), 1.0);
        assert_relative_eq!(dbm_to_watts(0.0), 1e-3);
        assert_relative_eq!(dbm_to_watts(-90.0), 1e-12, max_relative = 1e-12);
        assert_eq!(dbm_to_watts(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn scenario_generation_is_deterministic() {
        let cfg = SystemConfig::default();
        let a = generate_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(9));
        let b = generate_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        let c = generate_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(10));
        assert_ne!(a.h_e, c.h_e);
    }

    #[test]
    fn channel_reconstruction_is_exact() {
        let cfg = SystemConfig::default();
        let s = generate_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(11));
        let rebuilt = s.reconstruct_channel(cfg.n_rx, cfg.n_tx);
        for (x, y) in s.h_e.iter().zip(rebuilt.iter()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }

    #[test]
    fn clutter_free_scenario_is_zero() {
        let mut cfg = SystemConfig::default();
        cfg.n_paths = 0;
        let s = generate_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(12));
        assert_eq!(s.h_e, DMatrix::zeros(cfg.n_rx, cfg.n_tx));
        assert!(s.clutter_paths.is_empty());
        assert_relative_eq!(s.a_t.norm_squared(), cfg.n_rx as f64, max_relative = 1e-12);
        assert_relative_eq!(s.b_t.norm_squared(), cfg.n_tx as f64, max_relative = 1e-12);
    }

    #[test]
    fn path_gain_variance_matches_shadowed_path_loss() {
        // E|ε|² = 10^(-ϑ₀/10) · E[10^(-shadow/10)] with log-normal shadowing:
        // the second factor is exp((ln10/10 · σ_sh)²/2).
        let cfg = SystemConfig::default();
        let base = 10f64.powf(-0.1 * path_loss_db(cfg.tx_rx_distance_m, &cfg, 0.0));
        let k = (10f64.ln() / 10.0) * cfg.shadow_sigma_db;
        let expected = base * (k * k / 2.0).exp();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut sum = 0.0;
        let mut count = 0usize;
        for _ in 0..40_000 {
            let s = generate_scenario(&cfg, &mut rng);
            for p in &s.clutter_paths {
                sum += p.gain.norm_sqr();
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!(
            (mean - expected).abs() / expected < 0.05,
            "mean {mean:.3e} vs expected {expected:.3e}"
        );
    }

    #[test]
    fn path_gain_variance_without_shadowing() {
        let mut cfg = SystemConfig::default();
        cfg.shadow_sigma_db = 0.0;
        let expected = 10f64.powf(-0.1 * path_loss_db(cfg.tx_rx_distance_m, &cfg, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut sum = 0.0;
        let mut count = 0usize;
        while count < 100_000 {
            let s = generate_scenario(&cfg, &mut rng);
            for p in &s.clutter_paths {
                sum += p.gain.norm_sqr();
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!(
            (mean - expected).abs() / expected < 0.02,
            "mean {mean:.3e} vs expected {expected:.3e}"
        );
    }

    #[test]
    fn amplitude_for_snr_inverts_reference_gain() {
        let cfg = SystemConfig::default();
        // 30 dBm pilots: P_p = 1 W, reference gain = 8·16/1e-12.
        let mag = cfg.amplitude_for_target_snr(6.0);
        let snr = mag * mag * 1.0 * 8.0 * 16.0 / 1e-12;
        assert_relative_eq!(10.0 * snr.log10(), 6.0, max_relative = 1e-12);
    }

    #[test]
    fn summary_scales_as_documented() {
        let cfg = SystemConfig::default();
        let mut s = generate_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(15));
        let base = snr_like_summary(&s, &cfg);
        assert!(base.channel_frobenius > 0.0 && base.target_to_noise > 0.0);
        s.alpha *= 2.0;
        let scaled = snr_like_summary(&s, &cfg);
        assert_relative_eq!(
            scaled.target_to_noise,
            4.0 * base.target_to_noise,
            max_relative = 1e-12
        );
        s.alpha = C64::new(0.0, 0.0);
        s.h_e.fill(C64::new(0.0, 0.0));
        let zero = snr_like_summary(&s, &cfg);
        assert_eq!(zero.target_to_noise, 0.0);
        assert_eq!(zero.clutter_to_noise, 0.0);
    }
}

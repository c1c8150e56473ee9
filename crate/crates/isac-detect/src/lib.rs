//! GLRT target detection for bistatic integrated sensing and communication
//! (ISAC) receivers.
//!
//! A multi-antenna base station transmits frames that carry deterministic
//! pilots together with random data payloads for several downlink users.  A
//! separate sensing receiver observes the scene and must decide whether a
//! target of interest is present at a hypothesised angle pair, in the face of
//! clutter scattered from other directions.  Because the payload symbols are
//! unknown to the detector, the classical matched-filter approach does not
//! apply; the detector used here is a generalized likelihood ratio test
//! (GLRT) that treats the payload contribution as part of the interference
//! covariance and concentrates the unknown target amplitude out of the
//! likelihood in closed form via a real cubic equation.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`] — small dense Hermitian linear algebra, the closed-form
//!   cubic solver, the Marcum Q function and array steering vectors.
//! * [`scenario`] — system configuration, clutter/channel generation.
//! * [`waveform`] — frame layout, transmit beamforming, frame synthesis in
//!   physical and statistical modes, and a binary frame container.
//! * [`statistics`] — the null model (known-signal part and interference
//!   covariance) and the sufficient statistics of the detection problem.
//! * [`detectors`] — the hybrid GLRT, its large-frame asymptotic form and
//!   the pilot-only / data-only baselines.
//! * [`theory`] — closed-form false-alarm and detection probabilities and
//!   the downlink communication rate.
//! * [`montecarlo`] — reproducible, parallel Monte Carlo experiments.
//! * [`cli`] — the `isac-detect` command line tool.

pub mod cli;
pub mod detectors;
pub mod montecarlo;
pub mod numerics;
pub mod scenario;
pub mod statistics;
pub mod theory;
pub mod waveform;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Tool version recorded in every artifact header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Standard real Gaussian draw; the single chokepoint for Gaussian sampling
/// so that draw order (and therefore reproducibility) is uniform crate-wide.
pub(crate) fn real_standard_normal(rng: &mut impl rand::Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// Standard circularly symmetric complex Gaussian draw, CN(0, 1): real part
/// first, then imaginary, each N(0, 1/2).
pub(crate) fn complex_standard_normal(rng: &mut impl rand::Rng) -> C64 {
    let re: f64 = rng.sample(rand_distr::StandardNormal);
    let im: f64 = rng.sample(rand_distr::StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

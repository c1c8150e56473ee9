//! Cross-validates the two frame generators: the physical channel
//! simulation (explicit payload symbols, clutter scattering, receiver
//! noise) and the Gaussian surrogate that draws each column directly from
//! the per-column frame distribution.  Under both hypotheses the sufficient
//! statistics must agree in distribution, because the physical model is
//! itself conditionally Gaussian given the scenario.

use isac_detect::montecarlo::{derive_trial_stream, ks_distance};
use isac_detect::scenario::{generate_scenario, SystemConfig};
use isac_detect::statistics::{build_null_model, sufficient_stats};
use isac_detect::waveform::{
    build_transmit_plan, synthesize_physical, synthesize_statistical, Hypothesis,
};
use isac_detect::C64;

const SEED: u64 = 90;
const TRIALS: u64 = 20_000;

struct Ensemble {
    gamma: Vec<C64>,
    mu_norm_sq: Vec<f64>,
}

fn sample(hypothesis: Hypothesis, statistical: bool) -> Ensemble {
    let cfg = SystemConfig::default().with_frame_len(16);
    let mut scen_rng = derive_trial_stream(SEED, "phys_vs_stat/scenario", 0);
    let s = generate_scenario(&cfg, &mut scen_rng);
    let mut plan_rng = derive_trial_stream(SEED, "phys_vs_stat/plan", 0);
    let plan = build_transmit_plan(&cfg, &s, &mut plan_rng);
    let model = build_null_model(&s, &plan, &cfg).unwrap();
    let alpha = match hypothesis {
        Hypothesis::H0 => C64::new(0.0, 0.0),
        Hypothesis::H1 => s.alpha,
    };
    let id = if statistical {
        "phys_vs_stat/statistical"
    } else {
        "phys_vs_stat/physical"
    };
    let mut gamma = Vec::with_capacity(TRIALS as usize);
    let mut mu_norm_sq = Vec::with_capacity(TRIALS as usize);
    for t in 0..TRIALS {
        let mut rng = derive_trial_stream(SEED, id, t);
        let frame = if statistical {
            synthesize_statistical(&model, alpha, hypothesis, &mut rng)
        } else {
            synthesize_physical(&s, &plan, hypothesis, &cfg, &mut rng)
        };
        let st = sufficient_stats(&frame, &model, &plan);
        gamma.push(st.gamma);
        mu_norm_sq.push(st.mu_norm_sq);
    }
    Ensemble { gamma, mu_norm_sq }
}

fn mean_and_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// |difference of means| in units of its standard error.
fn z_gap(a: &[f64], b: &[f64]) -> f64 {
    let (ma, va) = mean_and_var(a);
    let (mb, vb) = mean_and_var(b);
    let se = (va / a.len() as f64 + vb / b.len() as f64).sqrt();
    (ma - mb).abs() / se
}

fn compare(hypothesis: Hypothesis) {
    let phys = sample(hypothesis, false);
    let stat = sample(hypothesis, true);

    let parts = |e: &Ensemble| {
        (
            e.gamma.iter().map(|g| g.re).collect::<Vec<f64>>(),
            e.gamma.iter().map(|g| g.im).collect::<Vec<f64>>(),
            e.gamma.iter().map(|g| g.norm_sqr()).collect::<Vec<f64>>(),
        )
    };
    let (p_re, p_im, p_sq) = parts(&phys);
    let (s_re, s_im, s_sq) = parts(&stat);

    // First and second moments of every sufficient statistic agree.
    assert!(z_gap(&p_re, &s_re) < 4.5, "Re(gamma) means differ");
    assert!(z_gap(&p_im, &s_im) < 4.5, "Im(gamma) means differ");
    assert!(z_gap(&p_sq, &s_sq) < 4.5, "|gamma|^2 means differ");
    assert!(
        z_gap(&phys.mu_norm_sq, &stat.mu_norm_sq) < 4.5,
        "whitened energy means differ"
    );

    // Whole distributions agree, not just moments.
    let n = TRIALS as f64;
    let ks_bound = 2.2 * (2.0 / n).sqrt(); // ~4x the expected same-law distance
    assert!(ks_distance(&p_re, &s_re) < ks_bound);
    assert!(ks_distance(&p_im, &s_im) < ks_bound);
    assert!(ks_distance(&phys.mu_norm_sq, &stat.mu_norm_sq) < ks_bound);
}

#[test]
fn surrogate_matches_physical_under_h0() {
    compare(Hypothesis::H0);
}

#[test]
fn surrogate_matches_physical_under_h1() {
    compare(Hypothesis::H1);
}

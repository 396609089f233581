//! Preamble receiver: post-CP windowing, circular correlation against the
//! root sequence, spatial averaging of correlation energy, thresholding, and
//! the grouping scan that assigns one common timing-advance estimate per
//! cluster of overlapping arrivals.

use crate::channel::{complex_gaussian, synthesize_uplink, tau_for_distance, user_at, RxUplink};
use crate::params::SystemParams;
use crate::preamble::{root_zc, PreambleSet, RootSequence};
use crate::Cplx;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::Arc;
use thiserror::Error;

/// All per-antenna complex correlation sequences for one received frame.
#[derive(Debug, Clone)]
pub struct CorrelationBank {
    /// z_m[t]: one row per antenna, one entry per lag in [0, n_zc).
    pub z: Vec<Vec<Cplx>>,
}

/// Spatially averaged correlation power for one preamble window, before and
/// after thresholding.
#[derive(Debug, Clone)]
pub struct CorrelationProfile {
    /// Preamble this window belongs to, 1-based.
    pub preamble_idx: usize,
    /// V_k[t] = (1/M) sum_m |z_m[t + shift_k]|^2 - sigma^2, t in [0, guard).
    pub v: Vec<f64>,
    /// P_k[t]: v[t] where v[t] > theta0, else 0.
    pub p: Vec<f64>,
    /// Threshold the profile was cut at.
    pub theta0: f64,
}

/// One detected arrival cluster on a preamble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectedGroup {
    /// Preamble the group was detected on, 1-based.
    pub preamble_idx: usize,
    /// Group-common timing-advance estimate, in channel uses.
    pub ta_hat: usize,
}

/// How the detection threshold is chosen for a target false-alarm rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// Invert the Chebyshev-style bound P_F <= 1 - (1 - 1/kappa^2)^G.
    /// Conservative: the resulting threshold is far above the noise floor.
    Bound,
    /// Treat the averaged noise power as Gaussian and invert its tail.
    /// Accurate for the antenna counts of interest (M >= 20 or so).
    Gaussian,
    /// Take the smallest threshold whose measured false-alarm rate over
    /// noise-only trials stays at or below the target.
    Empirical { trials: usize },
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("target false-alarm rate must lie in (0, 1], got {0}")]
    BadTarget(f64),
    #[error(
        "cannot resolve a false-alarm rate of {target:.3e} with {trials} trials; \
         the smallest measurable rate is {achieved:.3e}"
    )]
    Unattainable {
        target: f64,
        trials: usize,
        achieved: f64,
    },
}

/// FFT plans and the conjugated root spectrum for repeated correlations.
///
/// The circular correlation is evaluated as an inverse transform of the
/// elementwise product of spectra; `direct_correlate_window` is the literal
/// definition the FFT path is regression-tested against.
pub struct Correlator {
    n_zc: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// conj(DFT(root)) with the 1/(n_zc * sqrt(n_zc)) output scale folded in.
    spec_conj: Vec<Cplx>,
}

impl Correlator {
    pub fn new(root: &RootSequence) -> Self {
        let n = root.n_zc;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut s = root.samples.clone();
        fwd.process(&mut s);
        // The inverse transform is unnormalized (factor n) and the
        // correlation itself carries 1/sqrt(n); fold both into the spectrum.
        let scale = 1.0 / (n as f64 * (n as f64).sqrt());
        let spec_conj = s.iter().map(|v| v.conj() * scale).collect();
        Self {
            n_zc: n,
            fwd,
            inv,
            spec_conj,
        }
    }

    pub fn n_zc(&self) -> usize {
        self.n_zc
    }

    /// Correlates one post-CP window of `n_zc` samples against the root:
    /// z[t] = (1/sqrt(n_zc)) * sum_{t'} r[t'] * conj(s[(t' - t) mod n_zc]).
    pub fn correlate_window(&self, window: &[Cplx]) -> Vec<Cplx> {
        assert_eq!(window.len(), self.n_zc);
        let mut buf = window.to_vec();
        self.fwd.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spec_conj) {
            *b *= s;
        }
        self.inv.process(&mut buf);
        buf
    }
}

/// Literal O(n^2) form of the circular correlation, kept as the reference
/// the FFT path must reproduce within 1e-9.
pub fn direct_correlate_window(window: &[Cplx], root: &RootSequence) -> Vec<Cplx> {
    let n = root.n_zc;
    assert_eq!(window.len(), n);
    let norm = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|t| {
            let mut acc = Cplx::new(0.0, 0.0);
            for (tp, &r) in window.iter().enumerate() {
                acc += r * root.samples[(tp + n - t) % n].conj();
            }
            acc * norm
        })
        .collect()
}

/// Strips the first `guard` samples of every antenna and correlates the next
/// `n_zc` against the root.
pub fn correlate(rx: &RxUplink, correlator: &Correlator, guard: usize) -> CorrelationBank {
    let n = correlator.n_zc();
    let z = rx
        .samples
        .iter()
        .map(|row| {
            assert!(row.len() >= guard + n);
            correlator.correlate_window(&row[guard..guard + n])
        })
        .collect();
    CorrelationBank { z }
}

/// Builds the detection window of preamble `k`: spatially averaged
/// correlation power with the noise floor removed, then thresholded.
pub fn profile(
    bank: &CorrelationBank,
    params: &SystemParams,
    k: usize,
    theta0: f64,
) -> CorrelationProfile {
    assert!(k >= 1 && k <= params.num_preambles);
    assert_eq!(bank.z.len(), params.num_antennas);
    let m = bank.z.len() as f64;
    let shift = params.shift_of(k);
    let n = params.n_zc;
    let v: Vec<f64> = (0..params.guard)
        .map(|t| {
            let lag = (shift + t) % n;
            bank.z.iter().map(|zm| zm[lag].norm_sqr()).sum::<f64>() / m - params.noise_power
        })
        .collect();
    let p = v.iter().map(|&x| if x > theta0 { x } else { 0.0 }).collect();
    CorrelationProfile {
        preamble_idx: k,
        v,
        p,
        theta0,
    }
}

/// Scans a thresholded window and emits one group per cluster of arrivals:
/// on the first positive sample record its lag as the group-common TA, skip
/// one delay spread, run past any remaining positives, resume. Both the scan
/// and the run-off stop past lag `guard - delay_spread`, so a cluster whose
/// energy extends beyond that point is truncated there.
pub fn group(profile: &CorrelationProfile, delay_spread: usize) -> Vec<DetectedGroup> {
    let g_len = profile.p.len();
    assert!(delay_spread >= 1 && delay_spread <= g_len);
    let t_max = g_len - delay_spread;
    let mut groups = Vec::new();
    let mut t = 0usize;
    while t <= t_max {
        if profile.p[t] == 0.0 {
            t += 1;
        } else {
            groups.push(DetectedGroup {
                preamble_idx: profile.preamble_idx,
                ta_hat: t,
            });
            t += delay_spread;
            while t <= t_max && profile.p[t] > 0.0 {
                t += 1;
            }
        }
    }
    groups
}

/// Per-lag exceedance probability that turns into the wanted false-alarm
/// rate after `guard` independent looks: q = 1 - (1 - pf)^(1/guard).
fn per_lag_tail(target_pf: f64, guard: usize) -> f64 {
    -(((-target_pf).ln_1p()) / guard as f64).exp_m1()
}

/// Threshold scale from the distribution-free bound: kappa with
/// 1 - (1 - 1/kappa^2)^guard equal to the target rate.
pub fn kappa_for_bound(target_pf: f64, guard: usize) -> f64 {
    1.0 / per_lag_tail(target_pf, guard).sqrt()
}

/// Threshold scale from the Gaussian tail of the averaged noise power.
pub fn kappa_for_gaussian(target_pf: f64, guard: usize) -> f64 {
    let q = per_lag_tail(target_pf, guard);
    let n = Normal::new(0.0, 1.0).unwrap();
    n.inverse_cdf(1.0 - q).max(0.0)
}

/// Picks theta0 for a target false-alarm rate. The analytic modes scale as
/// kappa * sigma^2 / sqrt(M); the empirical mode takes a quantile of
/// noise-only window maxima and needs at least 1/target trials to resolve
/// the rate at all.
pub fn calibrate_threshold<R: Rng>(
    params: &SystemParams,
    target_pf: f64,
    mode: ThresholdMode,
    rng: &mut R,
) -> Result<f64, CalibrationError> {
    if !(target_pf > 0.0 && target_pf <= 1.0) {
        return Err(CalibrationError::BadTarget(target_pf));
    }
    if target_pf >= 1.0 {
        return Ok(0.0);
    }
    let scale = params.noise_power / (params.num_antennas as f64).sqrt();
    match mode {
        ThresholdMode::Bound => Ok(kappa_for_bound(target_pf, params.guard) * scale),
        ThresholdMode::Gaussian => Ok(kappa_for_gaussian(target_pf, params.guard) * scale),
        ThresholdMode::Empirical { trials } => {
            let allowed = (target_pf * trials as f64).floor() as usize;
            if allowed < 1 {
                return Err(CalibrationError::Unattainable {
                    target: target_pf,
                    trials,
                    achieved: 1.0 / trials as f64,
                });
            }
            let mut maxima = noise_trial_maxima(params, trials, rng);
            maxima.sort_by(|a, b| b.partial_cmp(a).unwrap());
            // maxima[allowed] is the smallest cut with at most `allowed`
            // strict exceedances, i.e. measured rate <= target.
            Ok(maxima[allowed].max(0.0))
        }
    }
}

/// Per-trial maximum of V over one idle-preamble window under noise only.
/// The post-CP window is drawn directly; the discarded CP samples are
/// independent noise and cannot influence the statistic.
pub fn noise_trial_maxima<R: Rng>(
    params: &SystemParams,
    trials: usize,
    rng: &mut R,
) -> Vec<f64> {
    let root = root_zc(params.n_zc, params.zc_root).expect("params validated");
    let corr = Correlator::new(&root);
    let m = params.num_antennas;
    (0..trials)
        .map(|_| {
            let mut acc = vec![0.0f64; params.guard];
            for _ in 0..m {
                let window: Vec<Cplx> = (0..params.n_zc)
                    .map(|_| complex_gaussian(rng, params.noise_power))
                    .collect();
                let z = corr.correlate_window(&window);
                for (a, zv) in acc.iter_mut().zip(&z[..params.guard]) {
                    *a += zv.norm_sqr();
                }
            }
            acc.iter()
                .map(|a| a / m as f64 - params.noise_power)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Measured false-alarm rate: fraction of noise-only trials where any lag of
/// an idle preamble window clears `theta0`.
pub fn measure_pf<R: Rng>(params: &SystemParams, theta0: f64, trials: usize, rng: &mut R) -> f64 {
    let maxima = noise_trial_maxima(params, trials, rng);
    maxima.iter().filter(|&&mx| mx > theta0).count() as f64 / trials as f64
}

/// Detection rates over single-user trials with the user dropped uniformly
/// over the cell disc: (any group detected, some group's TA exactly equals
/// the true delay).
pub fn measure_pd<R: Rng>(
    params: &SystemParams,
    theta0: f64,
    trials: usize,
    rng: &mut R,
) -> (f64, f64) {
    let set = PreambleSet::new(params).expect("params validated");
    let corr = Correlator::new(&set.root);
    let mut any = 0usize;
    let mut exact = 0usize;
    for _ in 0..trials {
        let u: f64 = rng.random();
        let distance = params.cell_radius_km * u.sqrt();
        let tau = tau_for_distance(params, distance);
        let user = user_at(params, 1, tau, rng);
        let rx = synthesize_uplink(params, &[user], &set, rng);
        let bank = correlate(&rx, &corr, params.guard);
        let prof = profile(&bank, params, 1, theta0);
        let groups = group(&prof, params.delay_spread);
        if !groups.is_empty() {
            any += 1;
        }
        if groups.iter().any(|g| g.ta_hat == tau) {
            exact += 1;
        }
    }
    (any as f64 / trials as f64, exact as f64 / trials as f64)
}

/// Detection summary at the configured threshold.
#[derive(Debug, Clone, Copy)]
pub struct PfPd {
    /// False-alarm rate over noise-only trials.
    pub pf: f64,
    /// Fraction of single-user trials with at least one detected group.
    pub pd_any: f64,
    /// Fraction of single-user trials where a group TA matches the true
    /// delay exactly. Stricter than `pd_any`: a timing miss counts against.
    pub pd_exact: f64,
}

/// Runs `trials` noise-only and `trials` single-user slots at the configured
/// threshold and reports both rates.
pub fn measure_pf_pd<R: Rng>(params: &SystemParams, trials: usize, rng: &mut R) -> PfPd {
    let theta0 = params.threshold();
    let pf = measure_pf(params, theta0, trials, rng);
    let (pd_any, pd_exact) = measure_pd(params, theta0, trials, rng);
    PfPd {
        pf,
        pd_any,
        pd_exact,
    }
}

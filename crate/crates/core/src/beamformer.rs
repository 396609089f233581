//! Downlink side of the response link: least-squares group channel
//! estimation straight from the correlation window, per-subcarrier transform,
//! maximum-ratio precoding of the response symbols, and the per-UE received
//! signal with its signal/noise decomposition for SINR measurement.

use crate::channel::complex_gaussian;
use crate::detector::{CorrelationBank, DetectedGroup};
use crate::params::SystemParams;
use crate::Cplx;
use rand::Rng;

/// Precomputed twiddle factors of the tap-to-subcarrier transform
/// H[n] = (1/sqrt(n_rs)) * sum_l c[l] * exp(-j 2 pi n l / n_rs).
pub struct FdTransform {
    n_rs: usize,
    delay_spread: usize,
    /// twiddle[n * delay_spread + l], scale folded in.
    twiddle: Vec<Cplx>,
}

impl FdTransform {
    pub fn new(params: &SystemParams) -> Self {
        let (n_rs, l_max) = (params.n_rs, params.delay_spread);
        let scale = 1.0 / (n_rs as f64).sqrt();
        let mut twiddle = Vec::with_capacity(n_rs * l_max);
        for n in 0..n_rs {
            for l in 0..l_max {
                let phase = -2.0 * std::f64::consts::PI * (n * l) as f64 / n_rs as f64;
                twiddle.push(Cplx::from_polar(scale, phase));
            }
        }
        Self {
            n_rs,
            delay_spread: l_max,
            twiddle,
        }
    }

    /// Gain on subcarrier `n` of a tap vector.
    pub fn gain_at(&self, taps: &[Cplx], n: usize) -> Cplx {
        let row = &self.twiddle[n * self.delay_spread..(n + 1) * self.delay_spread];
        taps.iter().zip(row).map(|(t, w)| t * w).sum()
    }

    /// Full band of gains for a tap vector.
    pub fn gain_row(&self, taps: &[Cplx]) -> Vec<Cplx> {
        (0..self.n_rs).map(|n| self.gain_at(taps, n)).collect()
    }
}

/// Group-common channel estimate and its beam normalizer.
#[derive(Debug, Clone)]
pub struct GroupChannelEstimate {
    /// Tap estimates per antenna, `num_antennas` rows of `delay_spread` taps.
    pub cir_hat: Vec<Vec<Cplx>>,
    /// Per-antenna subcarrier gains of `cir_hat`, rows of `n_rs` entries.
    pub fd_gain: Vec<Vec<Cplx>>,
    /// upsilon = E[sum_m |fd_gain[m][n]|^2]; computed from statistics, not
    /// from the draw, matching its definition as an expectation.
    pub upsilon: f64,
}

/// Profile energy that lands inside an estimation window starting at
/// `ta_hat` from users with true delays `taus`: each user contributes its
/// taps at window positions (tau - ta_hat) + l that fall in [0, L).
///
/// This is the ground-truth bookkeeping behind `upsilon` under partial
/// overlap; with every tau equal to ta_hat it reduces to one unit of profile
/// energy per user, the all-overlap model of the closed forms.
pub fn window_energy(params: &SystemParams, ta_hat: usize, taus: &[usize]) -> f64 {
    let l_max = params.delay_spread;
    taus.iter()
        .map(|&tau| {
            let mut e = 0.0;
            for (l, &p) in params.pdp.iter().enumerate() {
                let w = tau as isize + l as isize - ta_hat as isize;
                if (0..l_max as isize).contains(&w) {
                    e += p;
                }
            }
            e
        })
        .sum()
}

/// Beam normalizer for a window holding `energy` units of profile energy:
/// upsilon = M * (p_u * energy / n_rs + L * sigma^2 / (n_zc * n_rs)).
pub fn upsilon(params: &SystemParams, energy: f64) -> f64 {
    let m = params.num_antennas as f64;
    let n_rs = params.n_rs as f64;
    m * (params.pu() * energy / n_rs
        + params.delay_spread as f64 * params.noise_power / (params.n_zc as f64 * n_rs))
}

/// Fraction of one user's profile energy, per subcarrier, that a window
/// starting `offset` channel uses after the user's arrival still captures.
/// At zero offset this is the user's average subcarrier gain.
pub fn partial_alpha(params: &SystemParams, offset: usize) -> f64 {
    params
        .pdp
        .iter()
        .take(params.delay_spread.saturating_sub(offset))
        .sum::<f64>()
        / params.n_rs as f64
}

/// Least-squares group estimate: the L correlation samples starting at the
/// group TA, scaled by 1/sqrt(n_zc), then transformed per subcarrier.
/// `upsilon` is supplied by the caller because it depends on how much user
/// energy actually sits in the window.
pub fn estimate_group_cir(
    bank: &CorrelationBank,
    params: &SystemParams,
    ft: &FdTransform,
    group: &DetectedGroup,
    upsilon: f64,
) -> GroupChannelEstimate {
    assert!(group.ta_hat + params.delay_spread <= params.guard);
    let shift = params.shift_of(group.preamble_idx);
    let start = shift + group.ta_hat;
    let scale = 1.0 / (params.n_zc as f64).sqrt();
    let cir_hat: Vec<Vec<Cplx>> = bank
        .z
        .iter()
        .map(|zm| {
            (0..params.delay_spread)
                .map(|l| zm[(start + l) % params.n_zc] * scale)
                .collect()
        })
        .collect();
    let fd_gain = cir_hat.iter().map(|row| ft.gain_row(row)).collect();
    GroupChannelEstimate {
        cir_hat,
        fd_gain,
        upsilon,
    }
}

/// Per-group share of the downlink budget when `k_t` groups are served in
/// total: P_d = P_T * n_rs / (n_sc * k_t).
pub fn p_d(params: &SystemParams, k_t: usize) -> f64 {
    assert!(k_t >= 1);
    params.pt() * params.n_rs as f64 / (params.n_sc as f64 * k_t as f64)
}

/// Maximum-ratio precoder for every group of one preamble on one OFDM
/// symbol: X_m[j] = sqrt(p_d) * sum_g conj(fd_gain_g[m][sc_j]) * u_g[j]
/// / sqrt(upsilon_g). A group with a non-positive normalizer carries no
/// energy and is skipped.
pub fn precode(
    groups: &[(&GroupChannelEstimate, &[Cplx])],
    params: &SystemParams,
    p_d: f64,
    subcarriers: &[usize],
) -> Vec<Vec<Cplx>> {
    let m = params.num_antennas;
    let sqrt_pd = p_d.sqrt();
    let mut x = vec![vec![Cplx::new(0.0, 0.0); subcarriers.len()]; m];
    for (est, symbols) in groups {
        assert_eq!(symbols.len(), subcarriers.len());
        if est.upsilon <= 0.0 {
            // Nothing but numeric dust can produce this (a detected window
            // holding no user energy in a noise-free run): such a group has
            // no meaningful beam direction, so it is skipped.
            continue;
        }
        let norm = sqrt_pd / est.upsilon.sqrt();
        for (row, fd) in x.iter_mut().zip(&est.fd_gain) {
            for ((xe, &sc), u) in row.iter_mut().zip(subcarriers).zip(*symbols) {
                *xe += norm * fd[sc].conj() * u;
            }
        }
    }
    x
}

/// Received downlink symbols, one row per UE, one entry per precoded
/// subcarrier.
#[derive(Debug, Clone)]
pub struct DownlinkRx {
    pub y: Vec<Vec<Cplx>>,
}

/// What each UE sees on the precoded subcarriers:
/// Y[j] = sqrt(n_rs) * sum_m gains[m][sc_j] * X_m[j] + CN(0, sigma^2),
/// with independent noise per UE and per subcarrier.
pub fn receive_downlink<R: Rng>(
    x: &[Vec<Cplx>],
    ue_fd_gains: &[&[Vec<Cplx>]],
    params: &SystemParams,
    subcarriers: &[usize],
    rng: &mut R,
) -> DownlinkRx {
    let amp = (params.n_rs as f64).sqrt();
    let y = ue_fd_gains
        .iter()
        .map(|gains| {
            (0..subcarriers.len())
                .map(|j| {
                    let sc = subcarriers[j];
                    let mut acc = Cplx::new(0.0, 0.0);
                    for (xm, gm) in x.iter().zip(*gains) {
                        acc += gm[sc] * xm[j];
                    }
                    let noise = if params.noise_power > 0.0 {
                        complex_gaussian(rng, params.noise_power)
                    } else {
                        Cplx::new(0.0, 0.0)
                    };
                    amp * acc + noise
                })
                .collect()
        })
        .collect();
    DownlinkRx { y }
}

/// One draw of the signal/noise decomposition at a single UE.
#[derive(Debug, Clone, Copy)]
pub struct SinrSample {
    /// Power of the deterministic signal term (the expected coupling).
    pub ds_power: f64,
    /// Power of everything else in the received symbol for this draw.
    pub en_power: f64,
    /// Power the user's own windowed channel coherently delivered for this
    /// draw; it scatters around `ds_power` and hardens onto it as the array
    /// grows.
    pub coherent_power: f64,
}

/// One Monte-Carlo draw of the received response symbol for user `i`
/// (1-based) of a single group whose members arrived at `taus` and were
/// stamped with the common estimate `ta_hat`, observed on subcarrier `n`.
///
/// The estimation window is drawn in closed form rather than through the
/// full uplink chain: with the ideal root autocorrelation the correlator
/// output at window lag l is exactly sqrt(n_zc p_u) * sum_q h_q[l - d_q]
/// plus CN(0, sigma^2) noise that is independent across lags (the
/// correlation is a unitary rotation of white noise). The equivalence is
/// regression-tested against the synthesized chain.
///
/// The deterministic signal mean subtracts the user's expected coupling,
/// including the window-offset phase rotation its late arrival induces; the
/// rest of the draw is the effective noise sample.
pub fn group_sinr_draw<R: Rng>(
    params: &SystemParams,
    ft: &FdTransform,
    taus: &[usize],
    ta_hat: usize,
    i: usize,
    n: usize,
    rng: &mut R,
) -> SinrSample {
    let k_g = taus.len();
    assert!(i >= 1 && i <= k_g);
    assert!(taus.iter().all(|&t| t >= ta_hat), "window opens after a member");
    let m = params.num_antennas;
    let l_max = params.delay_spread;
    let sqrt_pu = params.pu().sqrt();
    let est_noise_var = params.noise_power / params.n_zc as f64;

    let ups = upsilon(params, window_energy(params, ta_hat, taus));
    let pd = p_d(params, 1);
    let beam = (params.n_rs as f64 * pd / ups).sqrt();

    // True channels of all members, plus user i's subcarrier gain.
    let cirs: Vec<Vec<Cplx>> = (0..k_g * m)
        .map(|_| {
            params
                .pdp
                .iter()
                .map(|&v| complex_gaussian(rng, v))
                .collect()
        })
        .collect();

    // Window taps per antenna: offsets shift each member's contribution.
    let d_i = taus[i - 1] - ta_hat;
    let mut coupling = Cplx::new(0.0, 0.0);
    let mut own_coupling = Cplx::new(0.0, 0.0);
    for ant in 0..m {
        let mut window = vec![Cplx::new(0.0, 0.0); l_max];
        let mut own_taps = vec![Cplx::new(0.0, 0.0); l_max];
        for (q, &tau) in taus.iter().enumerate() {
            let d = tau - ta_hat;
            for (w, slot) in window.iter_mut().enumerate().skip(d) {
                *slot += sqrt_pu * cirs[q * m + ant][w - d];
            }
        }
        for (w, slot) in own_taps.iter_mut().enumerate().skip(d_i) {
            *slot = cirs[(i - 1) * m + ant][w - d_i];
        }
        let mut est_taps = window;
        if est_noise_var > 0.0 {
            for tap in est_taps.iter_mut() {
                *tap += complex_gaussian(rng, est_noise_var);
            }
        }
        let h_true = ft.gain_at(&cirs[(i - 1) * m + ant], n);
        let h_est = ft.gain_at(&est_taps, n);
        coupling += h_true * h_est.conj();
        own_coupling += h_true * ft.gain_at(&own_taps, n).conj();
    }

    let y = beam * coupling
        + if params.noise_power > 0.0 {
            complex_gaussian(rng, params.noise_power)
        } else {
            Cplx::new(0.0, 0.0)
        };

    // Expected coupling of user i: its profile energy still inside the
    // window, rotated by the window-offset phase on this subcarrier.
    let beta = partial_alpha(params, d_i);
    let phase = 2.0 * std::f64::consts::PI * (n * d_i) as f64 / params.n_rs as f64;
    let ds = beam * sqrt_pu * m as f64 * beta * Cplx::from_polar(1.0, phase);

    let en = y - ds;
    SinrSample {
        ds_power: ds.norm_sqr(),
        en_power: en.norm_sqr(),
        coherent_power: (beam * sqrt_pu * own_coupling).norm_sqr(),
    }
}

/// Empirical long-term SINR over `draws` samples: the ratio of the mean
/// signal power to the mean effective-noise power. (The mean of per-draw
/// ratios does not converge: the effective noise is complex Gaussian, so
/// the inverse of its power has no finite expectation.)
#[allow(clippy::too_many_arguments)]
pub fn mean_sinr<R: Rng>(
    params: &SystemParams,
    ft: &FdTransform,
    taus: &[usize],
    ta_hat: usize,
    i: usize,
    n: usize,
    draws: usize,
    rng: &mut R,
) -> f64 {
    let mut ds = 0.0;
    let mut en = 0.0;
    for _ in 0..draws {
        let s = group_sinr_draw(params, ft, taus, ta_hat, i, n, rng);
        ds += s.ds_power;
        en += s.en_power;
    }
    ds / en
}

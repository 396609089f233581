//! Uplink channel model: user placement, discrete round-trip delays,
//! frequency-selective Rayleigh channels, and received-signal synthesis.
//!
//! Users are dropped uniformly over the cell disc. The round-trip propagation
//! delay (6.7 us per km of BS-user distance) is quantized to channel uses by
//! flooring, which matches a receiver that bins energy at the sampling grid.
//! Uplink power control is ideal: every user arrives at the configured
//! receive power regardless of distance.

use crate::params::SystemParams;
use crate::preamble::PreambleSet;
use crate::Cplx;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

/// Round-trip propagation delay per km of BS-user distance, in microseconds.
pub const ROUND_TRIP_US_PER_KM: f64 = 6.7;

/// One active user in a random-access slot.
#[derive(Debug, Clone)]
pub struct UserRealization {
    /// Chosen preamble, 1-based.
    pub preamble_idx: usize,
    /// Round-trip delay in channel uses, in [0, guard - delay_spread].
    pub tau: usize,
    /// BS-user distance that produced `tau`.
    pub distance_km: f64,
    /// Channel impulse response, `num_antennas` rows of `delay_spread` taps.
    pub cir: Vec<Vec<Cplx>>,
}

/// Received uplink baseband: one row per antenna, `n_zc + 2 * guard` samples.
#[derive(Debug, Clone)]
pub struct RxUplink {
    pub samples: Vec<Vec<Cplx>>,
}

/// Draws a zero-mean circularly-symmetric complex Gaussian with the given
/// variance (total over real and imaginary parts).
pub fn complex_gaussian<R: Rng>(rng: &mut R, variance: f64) -> Cplx {
    let s = (variance * 0.5).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Cplx::new(s * re, s * im)
}

/// Quantizes the round-trip delay of a user at `distance_km` to channel uses.
pub fn tau_for_distance(params: &SystemParams, distance_km: f64) -> usize {
    let rt_us = distance_km * ROUND_TRIP_US_PER_KM;
    let tau = (rt_us * params.prach_bandwidth_mhz).floor() as isize;
    tau.clamp(0, params.tau_max() as isize) as usize
}

/// Draws one channel impulse response matrix with independent CN(0, pdp[l])
/// taps per antenna.
pub fn draw_cir<R: Rng>(params: &SystemParams, rng: &mut R) -> Vec<Vec<Cplx>> {
    (0..params.num_antennas)
        .map(|_| {
            params
                .pdp
                .iter()
                .map(|&v| complex_gaussian(rng, v))
                .collect()
        })
        .collect()
}

/// A user with everything drawn except placement: used by experiments that
/// pin the preamble and delay.
pub fn user_at<R: Rng>(
    params: &SystemParams,
    preamble_idx: usize,
    tau: usize,
    rng: &mut R,
) -> UserRealization {
    assert!(preamble_idx >= 1 && preamble_idx <= params.num_preambles);
    assert!(tau <= params.tau_max());
    UserRealization {
        preamble_idx,
        tau,
        distance_km: f64::NAN,
        cir: draw_cir(params, rng),
    }
}

/// Draws the users of one slot: Poisson-many requests, uniform preamble
/// choice, uniform position over the cell disc.
pub fn draw_users<R: Rng>(
    params: &SystemParams,
    mean_requests: f64,
    rng: &mut R,
) -> Vec<UserRealization> {
    let count = if mean_requests > 0.0 {
        Poisson::new(mean_requests).expect("positive mean").sample(rng) as usize
    } else {
        0
    };
    (0..count)
        .map(|_| {
            let preamble_idx = rng.random_range(1..=params.num_preambles);
            // Uniform over the disc: radius = R * sqrt(U).
            let u: f64 = rng.random();
            let distance_km = params.cell_radius_km * u.sqrt();
            UserRealization {
                preamble_idx,
                tau: tau_for_distance(params, distance_km),
                distance_km,
                cir: draw_cir(params, rng),
            }
        })
        .collect()
}

/// Synthesizes the received uplink frame:
/// y_m[t] = sqrt(p_u) * sum_q sum_l h_mq[l] * x_q[t - l - tau_q] + n_m[t].
///
/// The guard interval absorbs every in-cell delay plus channel tail, so each
/// delayed frame fits inside the `n_zc + 2 * guard` observation window.
pub fn synthesize_uplink<R: Rng>(
    params: &SystemParams,
    users: &[UserRealization],
    set: &PreambleSet,
    rng: &mut R,
) -> RxUplink {
    let m = params.num_antennas;
    let len = params.n_zc + 2 * params.guard;
    let sqrt_pu = params.pu().sqrt();
    let sigma2 = params.noise_power;

    // Noise first, in a fixed antenna-major order, so signal accumulation
    // cannot perturb the random stream.
    let mut samples: Vec<Vec<Cplx>> = (0..m)
        .map(|_| {
            (0..len)
                .map(|_| {
                    if sigma2 > 0.0 {
                        complex_gaussian(rng, sigma2)
                    } else {
                        Cplx::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect();

    for user in users {
        let x = &set.frame(user.preamble_idx).samples;
        for (row, taps) in samples.iter_mut().zip(&user.cir) {
            for (l, &h) in taps.iter().enumerate() {
                let start = user.tau + l;
                if start >= len {
                    continue;
                }
                let c = sqrt_pu * h;
                let span = (len - start).min(x.len());
                for (y, &xv) in row[start..start + span].iter_mut().zip(&x[..span]) {
                    *y += c * xv;
                }
            }
        }
    }

    RxUplink { samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_quantization_floors() {
        let p = SystemParams::defaults();
        // Round trips in microseconds and expected channel-use delays.
        for &(rt, want) in &[(11.12, 12), (13.89, 15), (18.52, 20), (25.0, 27), (37.04, 40)] {
            let d = rt / ROUND_TRIP_US_PER_KM;
            assert_eq!(tau_for_distance(&p, d), want, "rt={rt}");
        }
    }

    #[test]
    fn cell_edge_delay_fits_guard() {
        let p = SystemParams::defaults();
        assert!(tau_for_distance(&p, p.cell_radius_km) <= p.tau_max());
        assert_eq!(tau_for_distance(&p, 0.0), 0);
        // Far outside the cell still clamps.
        assert_eq!(tau_for_distance(&p, 100.0), p.tau_max());
    }

    #[test]
    fn drawn_users_respect_ranges() {
        let p = SystemParams::defaults();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let users = draw_users(&p, 30.0, &mut rng);
        assert!(!users.is_empty());
        for u in &users {
            assert!(u.preamble_idx >= 1 && u.preamble_idx <= p.num_preambles);
            assert!(u.tau <= p.tau_max());
            assert_eq!(u.cir.len(), p.num_antennas);
            assert_eq!(u.cir[0].len(), p.delay_spread);
        }
    }

    #[test]
    fn cir_tap_energy_follows_profile() {
        let raw = crate::params::RawConfig {
            num_antennas: 2000,
            ..Default::default()
        };
        let p = SystemParams::derive(&raw).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cir = draw_cir(&p, &mut rng);
        for l in 0..p.delay_spread {
            let e: f64 =
                cir.iter().map(|row| row[l].norm_sqr()).sum::<f64>() / p.num_antennas as f64;
            assert!((e - p.pdp[l]).abs() < 0.05 * p.pdp[l].max(0.05), "tap {l}: {e}");
        }
    }

    #[test]
    fn synthesis_is_additive_without_noise() {
        let raw = crate::params::RawConfig {
            num_antennas: 4,
            noise_power: 0.0,
            ..Default::default()
        };
        let p = SystemParams::derive(&raw).unwrap();
        let set = PreambleSet::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = user_at(&p, 1, 12, &mut rng);
        let b = user_at(&p, 5, 40, &mut rng);

        let mut r0 = ChaCha8Rng::seed_from_u64(0);
        let both = synthesize_uplink(&p, &[a.clone(), b.clone()], &set, &mut r0);
        let only_a = synthesize_uplink(&p, &[a], &set, &mut r0);
        let only_b = synthesize_uplink(&p, &[b], &set, &mut r0);
        for m in 0..4 {
            for t in 0..p.n_zc + 2 * p.guard {
                let d = both.samples[m][t] - (only_a.samples[m][t] + only_b.samples[m][t]);
                assert!(d.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn synthesis_matches_direct_convolution() {
        let raw = crate::params::RawConfig {
            num_antennas: 1,
            noise_power: 0.0,
            ..Default::default()
        };
        let p = SystemParams::derive(&raw).unwrap();
        let set = PreambleSet::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // Worst-case delay: the last tap must still land inside the frame.
        let u = user_at(&p, 17, p.tau_max(), &mut rng);
        let rx = synthesize_uplink(&p, std::slice::from_ref(&u), &set, &mut rng);

        let x = &set.frame(17).samples;
        let len = p.n_zc + 2 * p.guard;
        let mut energy = 0.0;
        for t in 0..len {
            let mut acc = Cplx::new(0.0, 0.0);
            for l in 0..p.delay_spread {
                let idx = t as isize - l as isize - u.tau as isize;
                if idx >= 0 && (idx as usize) < x.len() {
                    acc += p.pu().sqrt() * u.cir[0][l] * x[idx as usize];
                }
            }
            let d = rx.samples[0][t] - acc;
            assert!(d.norm() < 1e-12, "t={t}");
            energy += acc.norm_sqr();
        }
        let got: f64 = rx.samples[0].iter().map(|s| s.norm_sqr()).sum();
        assert!((got - energy).abs() < 1e-9 * energy.max(1.0));
    }
}

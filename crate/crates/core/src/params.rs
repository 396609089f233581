//! System parameterization: raw configuration, validation, and derived
//! quantities (preamble count, cyclic-shift table, downlink slot count).
//!
//! Configuration comes from a TOML file plus command-line overrides. Unknown
//! keys are rejected so silent typos cannot change an experiment. A validated
//! [`SystemParams`] is immutable; sweeps construct new instances through the
//! `with_*` helpers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// OFDM symbols available in one downlink subframe.
pub const SYMBOLS_PER_SUBFRAME: usize = 14;

/// Length of an encoded random-access response in bits (ack + payload + CRC).
pub const RAR_BITS: usize = 24;

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("zc_root {root} is not coprime with n_zc {n_zc}")]
    NonCoprimeRoot { root: usize, n_zc: usize },
    #[error("zc_root must lie in [1, n_zc-1], got {0}")]
    RootOutOfRange(usize),
    #[error("guard must satisfy 1 <= guard <= n_zc, got guard={guard} n_zc={n_zc}")]
    BadGuard { guard: usize, n_zc: usize },
    #[error("delay_spread must satisfy 1 <= delay_spread < guard, got {delay_spread} (guard {guard})")]
    BadDelaySpread { delay_spread: usize, guard: usize },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("num_antennas must be at least 1")]
    NoAntennas,
    #[error("n_rs must be even and positive, got {0}")]
    BadNrs(usize),
    #[error("n_sc must satisfy {RAR_BITS} <= n_sc <= n_rs, got n_sc={n_sc} n_rs={n_rs}")]
    BadNsc { n_sc: usize, n_rs: usize },
    #[error("response grid needs {needed} OFDM symbols for both frequency hops but only {SYMBOLS_PER_SUBFRAME} exist")]
    GridOverflow { needed: usize },
    #[error("power-delay profile needs exactly {expected} taps, got {got}")]
    PdpLength { expected: usize, got: usize },
    #[error("power-delay profile taps must be non-negative with positive total energy")]
    PdpEnergy,
    #[error("unknown power-delay profile \"{0}\" (expected \"uniform\" or \"exponential\")")]
    PdpName(String),
    #[error("timing-advance range 0..={0} does not fit the 6-bit response field")]
    TaFieldOverflow(usize),
    #[error("max_repeats must be at least 1")]
    NoRepeats,
}

/// Power-delay profile selector accepted in configuration files.
///
/// Accepts `"uniform"`, `{ exponential = <decay> }`, or an explicit tap list.
/// Taps are normalized to unit total energy.
#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum PdpSpec {
    Named(String),
    Exponential { exponential: f64 },
    Taps(Vec<f64>),
}

impl Default for PdpSpec {
    fn default() -> Self {
        PdpSpec::Named("uniform".to_string())
    }
}

/// Raw configuration as read from file, before validation.
///
/// Every field has the default used throughout the accompanying experiments:
/// a 1.08 MHz random-access band (864 subcarriers at 1.25 kHz), a 6 km cell,
/// a 5 us delay spread, and 72 downlink resource-block subcarriers of which
/// 24 carry each response.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    /// Zadoff-Chu sequence length.
    pub n_zc: usize,
    /// Zadoff-Chu root index, coprime with `n_zc`.
    pub zc_root: usize,
    /// Guard interval in channel uses; also the cyclic-shift spacing.
    pub guard: usize,
    /// Channel length in taps (delay spread in channel uses).
    pub delay_spread: usize,
    /// Base-station antenna count.
    pub num_antennas: usize,
    /// Per-user uplink receive power over noise power (linear).
    pub pu_over_sigma2: f64,
    /// Total downlink transmit power over noise power (linear).
    pub pt_over_sigma2: f64,
    /// Noise power sigma^2 (may be zero in deterministic tests).
    pub noise_power: f64,
    /// Subcarriers in one downlink resource block group.
    pub n_rs: usize,
    /// Subcarriers occupied by one encoded response.
    pub n_sc: usize,
    /// Random-access band in MHz (sets channel uses per microsecond).
    pub prach_bandwidth_mhz: f64,
    /// Cell radius in km; bounds the round-trip delay.
    pub cell_radius_km: f64,
    /// Power-delay profile of every user channel.
    pub pdp: PdpSpec,
    /// Detection threshold scale: theta0 = kappa * sigma^2 / sqrt(M).
    /// When absent, kappa is derived from `target_pf` by Gaussian inversion.
    pub kappa: Option<f64>,
    /// Per-preamble false-alarm target used when `kappa` is not given.
    pub target_pf: f64,
    /// Repeat attempts allowed after the first before declaring failure.
    pub max_repeats: u32,
}

impl Default for RawConfig {
    fn default() -> Self {
        RawConfig {
            n_zc: 864,
            zc_root: 25,
            guard: 50,
            delay_spread: 6,
            num_antennas: 80,
            pu_over_sigma2: 0.0913 / (20.0_f64).sqrt(),
            pt_over_sigma2: 0.0913 / (20.0_f64).sqrt(),
            noise_power: 1.0,
            n_rs: 72,
            n_sc: 24,
            prach_bandwidth_mhz: 1.08,
            cell_radius_km: 6.0,
            pdp: PdpSpec::default(),
            kappa: None,
            target_pf: 1e-3,
            max_repeats: 5,
        }
    }
}

impl RawConfig {
    /// Parses a TOML configuration string. Unknown keys are an error.
    pub fn from_toml(text: &str) -> Result<Self, ParamError> {
        toml::from_str(text).map_err(|e| ParamError::Parse(e.to_string()))
    }
}

/// Validated, immutable system parameters with derived quantities.
#[derive(Debug, Clone, Serialize)]
pub struct SystemParams {
    pub n_zc: usize,
    pub zc_root: usize,
    pub guard: usize,
    pub delay_spread: usize,
    /// Number of preambles: floor(n_zc / guard).
    pub num_preambles: usize,
    /// Cyclic shift of preamble k (1-based) at index k-1; spacing is `guard`.
    pub shifts: Vec<usize>,
    pub num_antennas: usize,
    pub pu_over_sigma2: f64,
    pub pt_over_sigma2: f64,
    pub noise_power: f64,
    pub n_rs: usize,
    pub n_sc: usize,
    /// OFDM symbols needed to serve all preambles' responses once:
    /// ceil(n_sc * num_preambles / n_rs).
    pub n_slot: usize,
    pub prach_bandwidth_mhz: f64,
    pub cell_radius_km: f64,
    /// Normalized power-delay profile, `delay_spread` taps summing to 1.
    pub pdp: Vec<f64>,
    pub kappa: f64,
    pub target_pf: f64,
    pub max_repeats: u32,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn positive(name: &'static str, value: f64) -> Result<(), ParamError> {
    // NaN fails the finiteness test, so both clauses together reject it.
    if !value.is_finite() || value <= 0.0 {
        return Err(ParamError::NonPositive { name, value });
    }
    Ok(())
}

impl SystemParams {
    /// Validates a raw configuration and computes the derived quantities.
    pub fn derive(raw: &RawConfig) -> Result<Self, ParamError> {
        if raw.zc_root == 0 || raw.zc_root >= raw.n_zc {
            return Err(ParamError::RootOutOfRange(raw.zc_root));
        }
        if gcd(raw.zc_root, raw.n_zc) != 1 {
            return Err(ParamError::NonCoprimeRoot {
                root: raw.zc_root,
                n_zc: raw.n_zc,
            });
        }
        if raw.guard == 0 || raw.guard > raw.n_zc {
            return Err(ParamError::BadGuard {
                guard: raw.guard,
                n_zc: raw.n_zc,
            });
        }
        if raw.delay_spread == 0 || raw.delay_spread >= raw.guard {
            return Err(ParamError::BadDelaySpread {
                delay_spread: raw.delay_spread,
                guard: raw.guard,
            });
        }
        if raw.num_antennas == 0 {
            return Err(ParamError::NoAntennas);
        }
        positive("pu_over_sigma2", raw.pu_over_sigma2)?;
        positive("pt_over_sigma2", raw.pt_over_sigma2)?;
        if !raw.noise_power.is_finite() || raw.noise_power < 0.0 {
            return Err(ParamError::NonPositive {
                name: "noise_power",
                value: raw.noise_power,
            });
        }
        positive("prach_bandwidth_mhz", raw.prach_bandwidth_mhz)?;
        positive("cell_radius_km", raw.cell_radius_km)?;
        if raw.n_rs == 0 || !raw.n_rs.is_multiple_of(2) {
            return Err(ParamError::BadNrs(raw.n_rs));
        }
        if raw.n_sc < RAR_BITS || raw.n_sc > raw.n_rs {
            return Err(ParamError::BadNsc {
                n_sc: raw.n_sc,
                n_rs: raw.n_rs,
            });
        }
        if raw.max_repeats == 0 {
            return Err(ParamError::NoRepeats);
        }

        let num_preambles = raw.n_zc / raw.guard;
        debug_assert!(num_preambles * raw.guard <= raw.n_zc);
        let shifts: Vec<usize> = (0..num_preambles).map(|i| i * raw.guard).collect();
        let n_slot = (raw.n_sc * num_preambles).div_ceil(raw.n_rs);
        // Both frequency-hop copies must fit one subframe.
        if 2 * n_slot > SYMBOLS_PER_SUBFRAME {
            return Err(ParamError::GridOverflow { needed: 2 * n_slot });
        }

        let tau_max = raw.guard - raw.delay_spread;
        if tau_max > 63 {
            return Err(ParamError::TaFieldOverflow(tau_max));
        }

        let pdp = normalize_pdp(&raw.pdp, raw.delay_spread)?;

        let kappa = match raw.kappa {
            Some(k) => {
                positive("kappa", k)?;
                k
            }
            None => {
                if !(raw.target_pf > 0.0 && raw.target_pf < 1.0) {
                    return Err(ParamError::Parse(format!(
                        "target_pf must lie in (0, 1), got {}",
                        raw.target_pf
                    )));
                }
                crate::detector::kappa_for_gaussian(raw.target_pf, raw.guard)
            }
        };

        Ok(SystemParams {
            n_zc: raw.n_zc,
            zc_root: raw.zc_root,
            guard: raw.guard,
            delay_spread: raw.delay_spread,
            num_preambles,
            shifts,
            num_antennas: raw.num_antennas,
            pu_over_sigma2: raw.pu_over_sigma2,
            pt_over_sigma2: raw.pt_over_sigma2,
            noise_power: raw.noise_power,
            n_rs: raw.n_rs,
            n_sc: raw.n_sc,
            n_slot,
            prach_bandwidth_mhz: raw.prach_bandwidth_mhz,
            cell_radius_km: raw.cell_radius_km,
            pdp,
            kappa,
            target_pf: raw.target_pf,
            max_repeats: raw.max_repeats,
        })
    }

    /// Default parameters (see [`RawConfig::default`]).
    pub fn defaults() -> Self {
        SystemParams::derive(&RawConfig::default()).expect("default config is valid")
    }

    /// Cyclic shift of preamble `k` (1-based).
    pub fn shift_of(&self, k: usize) -> usize {
        self.shifts[k - 1]
    }

    /// Detection threshold theta0 = kappa * sigma^2 / sqrt(M).
    pub fn threshold(&self) -> f64 {
        self.kappa * self.noise_power / (self.num_antennas as f64).sqrt()
    }

    /// Reference scale for absolute powers: sigma^2 itself, or the unit
    /// noise floor when noise injection is disabled for an experiment.
    fn sigma_ref(&self) -> f64 {
        if self.noise_power > 0.0 {
            self.noise_power
        } else {
            1.0
        }
    }

    /// Uplink receive power per user.
    pub fn pu(&self) -> f64 {
        self.pu_over_sigma2 * self.sigma_ref()
    }

    /// Total downlink transmit power.
    pub fn pt(&self) -> f64 {
        self.pt_over_sigma2 * self.sigma_ref()
    }

    /// Downlink SNR measure (n_rs / n_sc) * (P_T / sigma^2).
    pub fn gamma_d(&self) -> f64 {
        (self.n_rs as f64 / self.n_sc as f64) * self.pt_over_sigma2
    }

    /// Largest timing advance expressible in the system: guard - delay_spread.
    pub fn tau_max(&self) -> usize {
        self.guard - self.delay_spread
    }

    /// Per-user average channel gain on one subcarrier; the profile has unit
    /// energy so this is 1 / n_rs.
    pub fn alpha(&self) -> f64 {
        self.pdp.iter().sum::<f64>() / self.n_rs as f64
    }

    fn rebuilt(&self, edit: impl FnOnce(&mut RawConfig)) -> Result<Self, ParamError> {
        let mut raw = RawConfig {
            n_zc: self.n_zc,
            zc_root: self.zc_root,
            guard: self.guard,
            delay_spread: self.delay_spread,
            num_antennas: self.num_antennas,
            pu_over_sigma2: self.pu_over_sigma2,
            pt_over_sigma2: self.pt_over_sigma2,
            noise_power: self.noise_power,
            n_rs: self.n_rs,
            n_sc: self.n_sc,
            prach_bandwidth_mhz: self.prach_bandwidth_mhz,
            cell_radius_km: self.cell_radius_km,
            pdp: PdpSpec::Taps(self.pdp.clone()),
            kappa: Some(self.kappa),
            target_pf: self.target_pf,
            max_repeats: self.max_repeats,
        };
        edit(&mut raw);
        SystemParams::derive(&raw)
    }

    /// Copy with a different antenna count.
    pub fn with_antennas(&self, m: usize) -> Result<Self, ParamError> {
        self.rebuilt(|r| r.num_antennas = m)
    }

    /// Copy with different power ratios.
    pub fn with_powers(&self, pu_over_sigma2: f64, pt_over_sigma2: f64) -> Result<Self, ParamError> {
        self.rebuilt(|r| {
            r.pu_over_sigma2 = pu_over_sigma2;
            r.pt_over_sigma2 = pt_over_sigma2;
        })
    }

    /// Copy with a different threshold scale.
    pub fn with_kappa(&self, kappa: f64) -> Result<Self, ParamError> {
        self.rebuilt(|r| r.kappa = Some(kappa))
    }
}

fn normalize_pdp(spec: &PdpSpec, taps: usize) -> Result<Vec<f64>, ParamError> {
    let raw: Vec<f64> = match spec {
        PdpSpec::Named(name) => match name.as_str() {
            "uniform" => vec![1.0; taps],
            "exponential" => (0..taps).map(|l| (-(l as f64)).exp()).collect(),
            other => return Err(ParamError::PdpName(other.to_string())),
        },
        PdpSpec::Exponential { exponential } => {
            positive("pdp decay", *exponential)?;
            (0..taps).map(|l| (-(l as f64) / exponential).exp()).collect()
        }
        PdpSpec::Taps(t) => t.clone(),
    };
    if raw.len() != taps {
        return Err(ParamError::PdpLength {
            expected: taps,
            got: raw.len(),
        });
    }
    let total: f64 = raw.iter().sum();
    if raw.iter().any(|&x| x < 0.0 || !x.is_finite()) || total <= 0.0 {
        return Err(ParamError::PdpEnergy);
    }
    Ok(raw.iter().map(|x| x / total).collect())
}

//! Link-level simulator and analytic toolkit for a grant-based random-access
//! procedure at a massive-MIMO base station.
//!
//! The uplink side models Zadoff-Chu preamble transmission over frequency
//! selective channels, cyclic correlation at every antenna, spatial averaging
//! of correlation energy, and timing-advance estimation that clusters users
//! into groups sharing one delay window. The downlink side models group-common
//! channel estimation from the correlation window, maximum-ratio transmission
//! of CRC-protected random-access responses, and bit-level decoding at each
//! user. The `analytic` module carries the matching closed-form SINR, power
//! scaling, and antenna dimensioning expressions so Monte-Carlo results can be
//! cross-checked against theory, and `harness` drives full campaigns.
//!
//! All randomness flows through per-trial `ChaCha8` streams derived from a
//! master seed, so campaign outputs are byte-identical regardless of how many
//! worker threads are used.

// Loop indices here are usually semantic (preamble ids, lags, bit positions)
// and appear in the arithmetic as well as the subscripts.
#![allow(clippy::needless_range_loop)]

pub mod analytic;
pub mod beamformer;
pub mod channel;
pub mod detector;
pub mod harness;
pub mod params;
pub mod preamble;
pub mod rarlink;

pub use analytic::{ScaledPowerParams, SinrParams};
pub use beamformer::{DownlinkRx, FdTransform, GroupChannelEstimate, SinrSample};
pub use channel::{RxUplink, UserRealization};
pub use detector::{CorrelationBank, CorrelationProfile, Correlator, DetectedGroup, ThresholdMode};
pub use harness::{CampaignMetrics, SlotContext, SlotOutcome};
pub use params::{RawConfig, SystemParams};
pub use preamble::{PreambleFrame, PreambleSet, RootSequence};
pub use rarlink::{DecodeOutcome, RarPayload};

/// Complex baseband sample type used throughout.
pub type Cplx = num_complex::Complex64;

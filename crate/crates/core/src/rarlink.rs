//! Random-access response wire format: 24 bits = 7 acknowledgement ones,
//! 12 payload bits (timing advance, resource-block start, block count),
//! 5 CRC bits, BPSK-mapped onto a per-preamble set of subcarriers that is
//! repeated once with a half-band, half-frame hop.
//!
//! The layout here is the module's wire contract: field order and MSB-first
//! packing as documented on `encode`, CRC generator x^5 + x^4 + x^2 + 1 with
//! zero initial remainder and no reflection, hop copy 2 offset by half the
//! shared band and half the subframe.

use crate::params::{SystemParams, RAR_BITS};
use crate::Cplx;
use thiserror::Error;

/// Acknowledgement prefix length; all-ones on transmit.
pub const ACK_BITS: usize = 7;
/// Ones needed in the decoded prefix to accept that a response was sent:
/// strictly more than four of the seven.
pub const ACK_ONES_REQUIRED: usize = 5;
/// Information bits: 6 TA + 4 rb_start + 2 num_rb.
pub const PAYLOAD_BITS: usize = 12;
/// CRC-5 tail length.
pub const CRC_BITS: usize = 5;
/// Feedback taps of x^5 + x^4 + x^2 + 1, without the leading x^5 term.
const CRC_FEEDBACK: u8 = 0x15;

#[derive(Debug, Error)]
pub enum RarError {
    #[error("timing advance {0} does not fit the 6-bit field")]
    TaRange(usize),
    #[error("rb_start {0} does not fit the 4-bit field")]
    RbRange(usize),
    #[error("num_rb {0} outside 1..=4")]
    NumRbRange(usize),
    #[error("expected {want} hex digits, got {got}")]
    HexLength { want: usize, got: usize },
    #[error("invalid hex digit {0:?}")]
    HexDigit(char),
}

/// Information fields of one response message.
///
/// In the default geometry the timing advance stays at or below 44; the
/// constructor enforces only the field widths so the codec also serves
/// configurations with a longer guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RarPayload {
    /// Group-common timing advance, in channel uses.
    pub ta: usize,
    /// First granted resource block.
    pub rb_start: usize,
    /// Number of granted resource blocks, 1..=4, sent as num_rb - 1.
    pub num_rb: usize,
}

impl RarPayload {
    pub fn new(ta: usize, rb_start: usize, num_rb: usize) -> Result<Self, RarError> {
        if ta >= 1 << 6 {
            return Err(RarError::TaRange(ta));
        }
        if rb_start >= 1 << 4 {
            return Err(RarError::RbRange(rb_start));
        }
        if !(1..=4).contains(&num_rb) {
            return Err(RarError::NumRbRange(num_rb));
        }
        Ok(Self {
            ta,
            rb_start,
            num_rb,
        })
    }

    /// ta (6) then rb_start (4) then num_rb - 1 (2), each MSB first.
    pub fn bits(&self) -> [bool; PAYLOAD_BITS] {
        let mut out = [false; PAYLOAD_BITS];
        pack(&mut out[0..6], self.ta);
        pack(&mut out[6..10], self.rb_start);
        pack(&mut out[10..12], self.num_rb - 1);
        out
    }

    /// Unpacks fields verbatim; semantic range checks against the system
    /// geometry are the caller's business.
    pub fn from_bits(bits: &[bool]) -> Self {
        assert_eq!(bits.len(), PAYLOAD_BITS);
        Self {
            ta: unpack(&bits[0..6]),
            rb_start: unpack(&bits[6..10]),
            num_rb: unpack(&bits[10..12]) + 1,
        }
    }
}

fn pack(out: &mut [bool], value: usize) {
    let n = out.len();
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = (value >> (n - 1 - i)) & 1 == 1;
    }
}

fn unpack(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

/// CRC-5 of a 12-bit message: remainder of message * x^5 modulo
/// x^5 + x^4 + x^2 + 1 over GF(2), MSB first, zero initial remainder.
pub fn crc5(message: &[bool]) -> [bool; CRC_BITS] {
    assert_eq!(message.len(), PAYLOAD_BITS);
    let mut reg: u8 = 0;
    for &bit in message {
        let feedback = ((reg >> 4) & 1 == 1) ^ bit;
        reg = (reg << 1) & 0x1f;
        if feedback {
            reg ^= CRC_FEEDBACK;
        }
    }
    let mut out = [false; CRC_BITS];
    pack_u8(&mut out, reg);
    out
}

fn pack_u8(out: &mut [bool; CRC_BITS], value: u8) {
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = (value >> (CRC_BITS - 1 - i)) & 1 == 1;
    }
}

/// Full 24-bit transmit frame: 1111111 then payload then CRC.
pub fn encode(payload: &RarPayload) -> [bool; RAR_BITS] {
    let mut bits = [true; RAR_BITS];
    let body = payload.bits();
    bits[ACK_BITS..ACK_BITS + PAYLOAD_BITS].copy_from_slice(&body);
    let tail = crc5(&body);
    bits[ACK_BITS + PAYLOAD_BITS..].copy_from_slice(&tail);
    bits
}

/// One resource element: OFDM symbol index within the subframe and
/// subcarrier index within the shared band.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GridRe {
    pub symbol: usize,
    pub subcarrier: usize,
}

/// Placement of every bit of both hop copies for preamble `k` (1-based).
///
/// Copy 1 packs the Q preambles' bands consecutively across symbols
/// 0..n_slot; copy 2 repeats the pattern half a band higher (mod the band)
/// and n_slot symbols later. Within each copy the map is injective across
/// preambles, and the two copies occupy disjoint symbol ranges.
pub fn map_to_grid(params: &SystemParams, k: usize) -> [[GridRe; RAR_BITS]; 2] {
    assert!(k >= 1 && k <= params.num_preambles);
    assert_eq!(params.n_sc, RAR_BITS, "one subcarrier per frame bit");
    let mut copies = [[GridRe::default(); RAR_BITS]; 2];
    let base = (k - 1) * params.n_sc;
    let half = params.n_rs / 2;
    for b in 0..RAR_BITS {
        let idx = base + b;
        let symbol = idx / params.n_rs;
        let subcarrier = idx % params.n_rs;
        copies[0][b] = GridRe { symbol, subcarrier };
        copies[1][b] = GridRe {
            symbol: symbol + params.n_slot,
            subcarrier: (subcarrier + half) % params.n_rs,
        };
    }
    copies
}

/// A frame together with where its bits sit on the downlink grid.
#[derive(Debug, Clone)]
pub struct RarFrame {
    pub bits: [bool; RAR_BITS],
    pub placements: [[GridRe; RAR_BITS]; 2],
}

impl RarFrame {
    pub fn build(params: &SystemParams, k: usize, payload: &RarPayload) -> Self {
        Self {
            bits: encode(payload),
            placements: map_to_grid(params, k),
        }
    }
}

/// BPSK map used on the downlink: logical one rides the positive real axis.
pub fn bpsk(bit: bool) -> f64 {
    if bit {
        1.0
    } else {
        -1.0
    }
}

/// What a UE concluded from its response subcarriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeOutcome {
    /// Fewer than five of the seven acknowledgement bits decoded as one.
    NoRar,
    /// Acknowledged but the CRC check failed.
    CrcFail,
    /// Clean decode.
    Decoded(RarPayload),
}

/// UE-side decode from the two hop copies of the 24 response subcarriers.
/// Per bit the decision statistic is the sum of the real parts of both
/// copies (the precoded effective gain concentrates on the positive real
/// axis, so no equalization is attempted).
pub fn decode(copy1: &[Cplx], copy2: &[Cplx]) -> DecodeOutcome {
    assert_eq!(copy1.len(), RAR_BITS);
    assert_eq!(copy2.len(), RAR_BITS);
    let mut bits = [false; RAR_BITS];
    for (b, slot) in bits.iter_mut().enumerate() {
        *slot = copy1[b].re + copy2[b].re > 0.0;
    }
    let ack_ones = bits[..ACK_BITS].iter().filter(|&&b| b).count();
    if ack_ones < ACK_ONES_REQUIRED {
        return DecodeOutcome::NoRar;
    }
    let body = &bits[ACK_BITS..ACK_BITS + PAYLOAD_BITS];
    let tail = crc5(body);
    if tail != bits[ACK_BITS + PAYLOAD_BITS..] {
        return DecodeOutcome::CrcFail;
    }
    DecodeOutcome::Decoded(RarPayload::from_bits(body))
}

/// Renders a bit string as uppercase hex, four bits per digit, MSB first.
pub fn bits_to_hex(bits: &[bool]) -> String {
    assert!(bits.len().is_multiple_of(4));
    bits.chunks(4)
        .map(|c| char::from_digit(unpack(c) as u32, 16).unwrap().to_ascii_uppercase())
        .collect()
}

/// Parses `expected_bits / 4` hex digits back into bits.
pub fn hex_to_bits(s: &str, expected_bits: usize) -> Result<Vec<bool>, RarError> {
    let digits: Vec<char> = s.trim().chars().collect();
    if digits.len() * 4 != expected_bits {
        return Err(RarError::HexLength {
            want: expected_bits / 4,
            got: digits.len(),
        });
    }
    let mut bits = Vec::with_capacity(expected_bits);
    for ch in digits {
        let v = ch.to_digit(16).ok_or(RarError::HexDigit(ch))? as usize;
        for i in (0..4).rev() {
            bits.push((v >> i) & 1 == 1);
        }
    }
    Ok(bits)
}

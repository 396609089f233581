//! Zadoff-Chu preamble construction: root sequence, cyclic shifts, and the
//! transmitted frame (cyclic prefix + sequence + guard period).
//!
//! Root sequences have unit modulus and ideal periodic autocorrelation, so
//! cyclic shifts spaced by at least the guard interval stay orthogonal after
//! any in-cell round-trip delay. Phases are computed from an integer exponent
//! reduced modulo 2*n_zc to keep trigonometric arguments small.

use crate::params::{ParamError, SystemParams};
use crate::Cplx;
use std::f64::consts::PI;

/// A Zadoff-Chu root sequence of length `n_zc` with root index `root`.
#[derive(Debug, Clone)]
pub struct RootSequence {
    pub n_zc: usize,
    pub root: usize,
    pub samples: Vec<Cplx>,
}

/// One preamble ready for transmission: `guard` samples of cyclic prefix,
/// the shifted sequence, then `guard` zero samples of guard period.
#[derive(Debug, Clone)]
pub struct PreambleFrame {
    pub shift: usize,
    pub guard: usize,
    pub samples: Vec<Cplx>,
}

/// Generates the root sequence.
///
/// For even length: s[t] = exp(-j pi u t^2 / n_zc).
/// For odd length:  s[t] = exp(-j pi u t (t + 1) / n_zc).
///
/// `root` must be coprime with `n_zc`, otherwise autocorrelation sidelobes
/// appear and shift orthogonality is lost.
pub fn root_zc(n_zc: usize, root: usize) -> Result<RootSequence, ParamError> {
    if root == 0 || root >= n_zc {
        return Err(ParamError::RootOutOfRange(root));
    }
    if gcd(root, n_zc) != 1 {
        return Err(ParamError::NonCoprimeRoot { root, n_zc });
    }
    let two_n = 2 * n_zc as u64;
    let u = root as u64;
    let samples = (0..n_zc)
        .map(|t| {
            let t = t as u64;
            // Exponent of exp(-j pi e / n_zc); e is even-symmetric mod 2*n_zc.
            let e = if n_zc.is_multiple_of(2) {
                (u * ((t * t) % two_n)) % two_n
            } else {
                (u * ((t * (t + 1)) % two_n)) % two_n
            };
            let phase = -PI * e as f64 / n_zc as f64;
            Cplx::new(phase.cos(), phase.sin())
        })
        .collect();
    Ok(RootSequence {
        n_zc,
        root,
        samples,
    })
}

/// Cyclically shifted copy: out[t] = root[(t - shift) mod n_zc].
pub fn cyclic_shift(root: &RootSequence, shift: usize) -> Vec<Cplx> {
    let n = root.n_zc;
    let shift = shift % n;
    (0..n)
        .map(|t| root.samples[(t + n - shift) % n])
        .collect()
}

/// Builds the transmitted frame for one shift: the last `guard` sequence
/// samples as cyclic prefix, the full shifted sequence, then `guard` zeros.
pub fn build_frame(root: &RootSequence, shift: usize, guard: usize) -> PreambleFrame {
    let n = root.n_zc;
    let seq = cyclic_shift(root, shift);
    let mut samples = Vec::with_capacity(n + 2 * guard);
    samples.extend_from_slice(&seq[n - guard..]);
    samples.extend_from_slice(&seq);
    samples.extend(std::iter::repeat_n(Cplx::new(0.0, 0.0), guard));
    PreambleFrame {
        shift,
        guard,
        samples,
    }
}

/// All preamble frames of a configuration, built once per campaign.
#[derive(Debug, Clone)]
pub struct PreambleSet {
    pub root: RootSequence,
    pub frames: Vec<PreambleFrame>,
}

impl PreambleSet {
    pub fn new(params: &SystemParams) -> Result<Self, ParamError> {
        let root = root_zc(params.n_zc, params.zc_root)?;
        let frames = params
            .shifts
            .iter()
            .map(|&c| build_frame(&root, c, params.guard))
            .collect();
        Ok(PreambleSet { root, frames })
    }

    /// Frame of preamble `k` (1-based).
    pub fn frame(&self, k: usize) -> &PreambleFrame {
        &self.frames[k - 1]
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn autocorr(s: &[Cplx], lag: usize) -> Cplx {
        let n = s.len();
        (0..n)
            .map(|t| s[t] * s[(t + n - lag) % n].conj())
            .sum()
    }

    #[test]
    fn unit_modulus() {
        let r = root_zc(864, 25).unwrap();
        for s in &r.samples {
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ideal_autocorrelation() {
        for &(n, u) in &[(864usize, 25usize), (139, 1), (839, 26)] {
            let r = root_zc(n, u).unwrap();
            assert!((autocorr(&r.samples, 0).re - n as f64).abs() < 1e-9 * n as f64);
            for lag in 1..n {
                assert!(
                    autocorr(&r.samples, lag).norm() < 1e-9 * n as f64,
                    "n={n} u={u} lag={lag}"
                );
            }
        }
    }

    #[test]
    fn distinct_shifts_are_orthogonal() {
        let r = root_zc(864, 25).unwrap();
        let a = cyclic_shift(&r, 0);
        let b = cyclic_shift(&r, 50);
        let dot: Cplx = a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum();
        assert!(dot.norm() < 1e-9 * 864.0);
        let self_dot: Cplx = b.iter().zip(&b).map(|(x, y)| x * y.conj()).sum();
        assert!((self_dot.re - 864.0).abs() < 1e-9 * 864.0);
    }

    #[test]
    fn frame_layout_and_energy() {
        let p = SystemParams::defaults();
        let set = PreambleSet::new(&p).unwrap();
        for k in 1..=p.num_preambles {
            let f = set.frame(k);
            assert_eq!(f.samples.len(), p.n_zc + 2 * p.guard);
            // Cyclic-prefix consistency: the first guard samples repeat the
            // sequence tail one period later.
            for t in 0..p.guard {
                let d = f.samples[t] - f.samples[t + p.n_zc];
                assert!(d.norm() < 1e-12);
            }
            // Guard period is silent.
            for t in p.n_zc + p.guard..p.n_zc + 2 * p.guard {
                assert_eq!(f.samples[t], Cplx::new(0.0, 0.0));
            }
            let energy: f64 = f.samples.iter().map(|s| s.norm_sqr()).sum();
            assert!((energy - (p.n_zc + p.guard) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn shifted_sequence_matches_definition() {
        let r = root_zc(864, 25).unwrap();
        let c = 123;
        let s = cyclic_shift(&r, c);
        for (t, &got) in s.iter().enumerate() {
            let want = r.samples[(t + 864 - c) % 864];
            assert_eq!(got, want);
        }
    }

    #[test]
    fn odd_length_roots_also_ideal() {
        let r = root_zc(139, 34).unwrap();
        for lag in 1..139 {
            assert!(autocorr(&r.samples, lag).norm() < 1e-9 * 139.0);
        }
    }

    #[test]
    fn rejects_bad_roots() {
        assert!(root_zc(864, 0).is_err());
        assert!(root_zc(864, 864).is_err());
        assert!(root_zc(864, 6).is_err());
    }
}

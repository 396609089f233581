//! Closed-form companions to the simulator: the long-term downlink SINR of a
//! worst-case user group, its power-scaled form and large-array limit, the
//! false-alarm bound behind the detection threshold, the downlink power that
//! hits a target SINR, and the smallest antenna count that achieves a target
//! under 1/sqrt(M) power scaling.
//!
//! Every formula is evaluated term by term in its written order at double
//! precision, with no algebraic rearrangement. The Monte-Carlo side is
//! checked against these values, so any disagreement indicts the simulator
//! rather than the formula.

use crate::params::SystemParams;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error("kappa must exceed 1, got {0}")]
    KappaRange(f64),
    #[error("target SINR {epsilon} is infeasible; the ceiling at this operating point is {ceiling}")]
    Infeasible { epsilon: f64, ceiling: f64 },
}

/// Inputs of the long-term SINR expression for one user group.
#[derive(Debug, Clone)]
pub struct SinrParams {
    /// Antenna count. Real-valued so asymptotic probes stay exact.
    pub m: f64,
    /// Uplink preamble SNR p_u / sigma^2.
    pub gamma: f64,
    /// Downlink SNR measure (n_rs / n_sc) * P_T / sigma^2.
    pub gamma_d: f64,
    /// Per-user average subcarrier gains alpha_q, one entry per group member.
    pub alphas: Vec<f64>,
    /// 1-based index of the user of interest within `alphas`.
    pub i: usize,
    pub n_rs: usize,
    pub n_sc: usize,
    pub n_zc: usize,
    pub l: usize,
}

impl SinrParams {
    /// The worst-case operating point: `k_g` users of one group, all arrived
    /// in the same delay bin with the configured profile, user 1 observed.
    pub fn worst_case(sys: &SystemParams, k_g: usize) -> Self {
        Self {
            m: sys.num_antennas as f64,
            gamma: sys.pu_over_sigma2,
            gamma_d: sys.gamma_d(),
            alphas: vec![sys.alpha(); k_g],
            i: 1,
            n_rs: sys.n_rs,
            n_sc: sys.n_sc,
            n_zc: sys.n_zc,
            l: sys.delay_spread,
        }
    }

    fn alpha_i(&self) -> f64 {
        self.alphas[self.i - 1]
    }

    fn sum_ratio(&self) -> f64 {
        let ai = self.alpha_i();
        self.alphas.iter().map(|a| a / ai).sum()
    }
}

/// Powers under the 1/sqrt(M) scaling law: p_u = sigma^2 e_u / sqrt(M) and
/// P_T = sigma^2 e_t / sqrt(M), with the SINR target the scaling should meet.
#[derive(Debug, Clone, Copy)]
pub struct ScaledPowerParams {
    pub e_u: f64,
    pub e_t: f64,
    pub epsilon: f64,
}

/// Long-term average SINR of user `i` in its group:
/// [ (1/M)(1 + 1/(N_RS a_i g_d)) sum_q a_q/a_i
///   + L/(M g N_RS N_ZC a_i) + L/(M g g_d N_RS^2 N_ZC a_i^2) ]^-1.
pub fn sinr_closed_form(p: &SinrParams) -> f64 {
    let ai = p.alpha_i();
    let (n_rs, n_zc) = (p.n_rs as f64, p.n_zc as f64);
    let l = p.l as f64;
    let t1 = (1.0 / p.m) * (1.0 + 1.0 / (n_rs * ai * p.gamma_d)) * p.sum_ratio();
    let t2 = l / (p.m * p.gamma * n_rs * n_zc * ai);
    let t3 = l / (p.m * p.gamma * p.gamma_d * n_rs * n_rs * n_zc * ai * ai);
    1.0 / (t1 + t2 + t3)
}

/// The same SINR with both powers already substituted by their 1/sqrt(M)
/// scaling:
/// [ (1/M)(1 + N_SC sqrt(M)/(N_RS^2 a_i e_t)) sum_q a_q/a_i
///   + L/(sqrt(M) e_u N_RS N_ZC a_i) + L N_SC/(e_u e_t N_RS^3 N_ZC a_i^2) ]^-1.
pub fn sinr_scaled(
    sp: &ScaledPowerParams,
    sys: &SystemParams,
    m: f64,
    alphas: &[f64],
    i: usize,
) -> f64 {
    let ai = alphas[i - 1];
    let sum_ratio: f64 = alphas.iter().map(|a| a / ai).sum();
    let (n_rs, n_sc, n_zc) = (sys.n_rs as f64, sys.n_sc as f64, sys.n_zc as f64);
    let l = sys.delay_spread as f64;
    let t1 = (1.0 / m) * (1.0 + n_sc * m.sqrt() / (n_rs * n_rs * ai * sp.e_t)) * sum_ratio;
    let t2 = l / (m.sqrt() * sp.e_u * n_rs * n_zc * ai);
    let t3 = l * n_sc / (sp.e_u * sp.e_t * n_rs.powi(3) * n_zc * ai * ai);
    1.0 / (t1 + t2 + t3)
}

/// Large-array SINR limit under 1/sqrt(M) scaling:
/// N_RS^3 N_ZC e_u e_t a_i^2 / (L N_SC). Independent of the group size.
pub fn gamma_u(sp: &ScaledPowerParams, sys: &SystemParams, alpha_i: f64) -> f64 {
    let (n_rs, n_sc, n_zc) = (sys.n_rs as f64, sys.n_sc as f64, sys.n_zc as f64);
    n_rs.powi(3) * n_zc * sp.e_u * sp.e_t * alpha_i * alpha_i / (sys.delay_spread as f64 * n_sc)
}

/// Distribution-free false-alarm bound for threshold scale `kappa` over a
/// window of `guard` lags: 1 - (1 - 1/kappa^2)^guard.
pub fn pf_bound(kappa: f64, guard: usize) -> Result<f64, AnalyticError> {
    if kappa <= 1.0 {
        return Err(AnalyticError::KappaRange(kappa));
    }
    Ok(1.0 - (1.0 - 1.0 / (kappa * kappa)).powi(guard as i32))
}

/// Downlink SNR measure gamma_d required to hit SINR `epsilon` at `m`
/// antennas when the uplink follows p_u = sigma^2 e_u / sqrt(M):
/// [ (1/(M N_RS)) sum_q a_q/a_i^2 + L/(sqrt(M) e_u N_RS^2 N_ZC a_i^2) ]
///   / [ 1/eps - (1/M) sum_q a_q/a_i - L/(sqrt(M) e_u N_RS N_ZC a_i) ].
///
/// Fails when `epsilon` sits at or above the infinite-downlink-power
/// ceiling, where the denominator stops being positive.
pub fn required_pt(
    epsilon: f64,
    m: f64,
    e_u: f64,
    sys: &SystemParams,
    alphas: &[f64],
    i: usize,
) -> Result<f64, AnalyticError> {
    let ai = alphas[i - 1];
    let (n_rs, n_zc) = (sys.n_rs as f64, sys.n_zc as f64);
    let l = sys.delay_spread as f64;
    let sum_ratio: f64 = alphas.iter().map(|a| a / ai).sum();
    let sum_sq: f64 = alphas.iter().map(|a| a / (ai * ai)).sum();
    let num = sum_sq / (m * n_rs) + l / (m.sqrt() * e_u * n_rs * n_rs * n_zc * ai * ai);
    let den = 1.0 / epsilon - sum_ratio / m - l / (m.sqrt() * e_u * n_rs * n_zc * ai);
    if den <= 0.0 {
        let ceiling = 1.0 / (sum_ratio / m + l / (m.sqrt() * e_u * n_rs * n_zc * ai));
        return Err(AnalyticError::Infeasible { epsilon, ceiling });
    }
    Ok(num / den)
}

/// Real-valued minimum antenna count and its usable integer form.
#[derive(Debug, Clone, Copy)]
pub struct MinAntennas {
    /// Exact positive root of the quadratic in sqrt(M).
    pub m_star: f64,
    /// Smallest integer array that meets the target.
    pub m_ceil: usize,
}

/// Smallest M with scaled-power SINR at least `epsilon`:
/// M* = [ ((a2 + a3) + sqrt((a2 + a3)^2 + 4 a1 (1/eps - 1/gamma_u)))
///        / (2 (1/eps - 1/gamma_u)) ]^2,
/// a1 = sum_q a_q/a_i, a2 = (N_SC/(e_t a_i N_RS^2)) a1,
/// a3 = L/(N_ZC N_RS a_i e_u).
pub fn min_antennas(
    sp: &ScaledPowerParams,
    sys: &SystemParams,
    alphas: &[f64],
    i: usize,
) -> Result<MinAntennas, AnalyticError> {
    let ai = alphas[i - 1];
    let gu = gamma_u(sp, sys, ai);
    if sp.epsilon >= gu {
        return Err(AnalyticError::Infeasible {
            epsilon: sp.epsilon,
            ceiling: gu,
        });
    }
    let (n_rs, n_sc, n_zc) = (sys.n_rs as f64, sys.n_sc as f64, sys.n_zc as f64);
    let l = sys.delay_spread as f64;
    let a1: f64 = alphas.iter().map(|a| a / ai).sum();
    let a2 = n_sc / (sp.e_t * ai * n_rs * n_rs) * a1;
    let a3 = l / (n_zc * n_rs * ai * sp.e_u);
    let gap = 1.0 / sp.epsilon - 1.0 / gu;
    let root = ((a2 + a3) + ((a2 + a3).powi(2) + 4.0 * a1 * gap).sqrt()) / (2.0 * gap);
    let m_star = root * root;
    Ok(MinAntennas {
        m_star,
        m_ceil: m_star.ceil() as usize,
    })
}

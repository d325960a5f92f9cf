//! Exact evaluation of SINRs, secrecy rates, radar SNR and power draws, plus
//! the Monte-Carlo oracle for the ergodic Eve rates.
//!
//! Rates are reported in bits. The optimization layers work in nats; the
//! common-rate split `r` is stored in nats and converted here.

use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::channels::{eve_channel_sample_with, ChannelSet, EveMoment, NormalizedChannels};
use crate::config::{PhysicalParams, SystemConfig};
use crate::linalg::{abs2, cmat_json, cvec_json, diag, quad_form, CMat, CVec, RVec};

/// The five jointly optimized blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignVariables {
    /// Precoders `[w_0 | w_1 … w_K]`, M×(K+1).
    pub w: CMat,
    /// Artificial noise.
    pub z: CVec,
    /// RIS reflection coefficients.
    pub theta: CVec,
    /// Unit-norm radar receive filter.
    pub u: CVec,
    /// Common-rate split in nats.
    pub r: RVec,
}

impl DesignVariables {
    /// User count.
    pub fn k(&self) -> usize {
        self.r.len()
    }

    /// JSON with complex entries as `[re, im]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "W": cmat_json(&self.w),
            "z": cvec_json(&self.z),
            "theta": cvec_json(&self.theta),
            "u": cvec_json(&self.u),
            "r_nats": self.r.as_slice(),
        })
    }
}

/// Linear SINRs at the users and, for a given draw, at Eve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinrReport {
    pub gamma_s0_k: Vec<f64>,
    pub gamma_k: Vec<f64>,
    pub gamma_s0_e: Option<f64>,
    pub gamma_k_e: Option<Vec<f64>>,
}

/// Stream amplitudes `θᴴ H̄ w_i` for every precoder column and the AN.
fn stream_gains(hbar: &CMat, vars: &DesignVariables) -> (Vec<f64>, f64) {
    let eff = hbar.ad_mul(&vars.theta);
    let cols = (0..vars.w.ncols())
        .map(|i| eff.dotc(&vars.w.column(i)).norm_sqr())
        .collect();
    (cols, eff.dotc(&vars.z).norm_sqr())
}

/// `1 + σ_R² Σ |θ_n|² |h̄_n|²`.
pub fn effective_noise(theta: &CVec, hbar_r: &CVec, sigma2_ris: f64) -> f64 {
    1.0 + sigma2_ris * abs2(theta).dot(&abs2(hbar_r))
}

fn eve_sinrs(gains: &[f64], an: f64, noise: f64) -> (f64, Vec<f64>) {
    let private_total: f64 = gains[1..].iter().sum();
    let common = gains[0] / (private_total + an + noise);
    let private = (1..gains.len())
        .map(|k| gains[k] / (gains[0] + private_total - gains[k] + an + noise))
        .collect();
    (common, private)
}

/// SINRs for the current design and, optionally, one Eve channel draw.
pub fn sinr_report(
    vars: &DesignVariables,
    norm: &NormalizedChannels,
    params: &PhysicalParams,
    eve_draw: Option<&CVec>,
) -> SinrReport {
    let k_users = norm.hbar_k.len();
    let mut gamma_s0_k = Vec::with_capacity(k_users);
    let mut gamma_k = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let (gains, an) = stream_gains(&norm.hbar_k[k], vars);
        let noise = effective_noise(&vars.theta, &norm.hbar_rk[k], params.sigma2_ris);
        let private_total: f64 = gains[1..].iter().sum();
        gamma_s0_k.push(gains[0] / (private_total + an + noise));
        gamma_k.push(gains[k + 1] / (private_total - gains[k + 1] + an + noise));
    }
    let (gamma_s0_e, gamma_k_e) = match eve_draw {
        Some(h_re) => {
            let hbar_e = norm.hbar_e(h_re, params);
            let (gains, an) = stream_gains(&hbar_e, vars);
            let hbar_r = h_re.map(|x| x.conj()) / crate::linalg::C64::from(params.sigma2_eve.sqrt());
            let noise = effective_noise(&vars.theta, &hbar_r, params.sigma2_ris);
            let (common, private) = eve_sinrs(&gains, an, noise);
            (Some(common), Some(private))
        }
        None => (None, None),
    };
    SinrReport {
        gamma_s0_k,
        gamma_k,
        gamma_s0_e,
        gamma_k_e,
    }
}

/// Radar channel matrices `H_T = GᴴΦH_RTΦG`, `H_0 = GᴴΦH_RTΦ`, `H_1 = GᴴΦ`.
pub struct RadarMatrices {
    pub h_t: CMat,
    pub h_0: CMat,
    pub h_1: CMat,
}

/// Builds the radar channel matrices at the given reflection vector.
pub fn radar_matrices(theta: &CVec, channels: &ChannelSet) -> RadarMatrices {
    let phi = diag(theta);
    let h_1 = channels.g.adjoint() * &phi;
    let h_0 = &h_1 * &channels.h_rt_mat * &phi;
    let h_t = &h_0 * &channels.g;
    RadarMatrices { h_t, h_0, h_1 }
}

/// Radar output SNR for the current design.
pub fn radar_snr(vars: &DesignVariables, channels: &ChannelSet, params: &PhysicalParams) -> f64 {
    let mats = radar_matrices(&vars.theta, channels);
    let zeta2 = params.rcs;
    let row = mats.h_t.ad_mul(&vars.u);
    let signal = zeta2 * ((0..vars.w.ncols()).map(|i| row.dotc(&vars.w.column(i)).norm_sqr()).sum::<f64>()
        + row.dotc(&vars.z).norm_sqr());
    let noise = zeta2 * params.sigma2_ris * mats.h_0.ad_mul(&vars.u).norm_squared()
        + params.sigma2_ris * mats.h_1.ad_mul(&vars.u).norm_squared()
        + params.sigma2_bs * vars.u.norm_squared();
    signal / noise
}

/// Total power drawn by the active RIS.
pub fn ris_power(vars: &DesignVariables, channels: &ChannelSet, params: &PhysicalParams) -> f64 {
    let phi = diag(&vars.theta);
    let zeta2 = params.rcs;
    let phi_g = &phi * &channels.g;
    let g_rt = &phi * &channels.h_rt_mat * &phi_g;
    let loop_gain = &phi * &channels.h_rt_mat * &phi;
    zeta2 * (&g_rt * &vars.w).norm_squared()
        + (&phi_g * &vars.w).norm_squared()
        + (&phi_g * &vars.z).norm_squared()
        + zeta2 * (&g_rt * &vars.z).norm_squared()
        + 2.0 * params.sigma2_ris * phi.norm_squared()
        + zeta2 * params.sigma2_ris * loop_gain.norm_squared()
}

/// Total BS transmit power.
pub fn bs_power(vars: &DesignVariables) -> f64 {
    vars.w.norm_squared() + vars.z.norm_squared()
}

/// Sample means and standard errors of the Eve rates, in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicEveRates {
    pub common: f64,
    pub private: Vec<f64>,
    pub common_se: f64,
    pub private_se: Vec<f64>,
    pub draws: usize,
}

const MC_CHUNK: usize = 256;

/// Generator for one chunk of the Eve oracle.
pub fn eve_stream(base_seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(chunk);
    rng
}

/// Monte-Carlo ergodic Eve rates over the annular-sector prior.
///
/// Draws are split into fixed chunks, each with its own generator stream
/// derived from one seed taken from `rng`, so the result does not depend on
/// the thread count.
pub fn ergodic_eve_rates_mc<R: Rng + ?Sized>(
    vars: &DesignVariables,
    norm: &NormalizedChannels,
    config: &SystemConfig,
    params: &PhysicalParams,
    rng: &mut R,
    draws: usize,
) -> ErgodicEveRates {
    let draws = draws.max(1);
    let k = vars.k();
    let base_seed: u64 = rng.random();
    let chunks = draws.div_ceil(MC_CHUNK);
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut stream = eve_stream(base_seed, c as u64);
            let count = MC_CHUNK.min(draws - c * MC_CHUNK);
            let mut sum = vec![0.0; k + 1];
            let mut sum_sq = vec![0.0; k + 1];
            for _ in 0..count {
                let h_re = eve_channel_sample_with(config, params, &mut stream);
                let rep = sinr_report(vars, norm, params, Some(&h_re));
                let mut rates = vec![rep.gamma_s0_e.unwrap_or(0.0).ln_1p() / LN_2];
                rates.extend(rep.gamma_k_e.unwrap_or_default().iter().map(|g| g.ln_1p() / LN_2));
                for (i, rate) in rates.iter().enumerate() {
                    sum[i] += rate;
                    sum_sq[i] += rate * rate;
                }
            }
            (sum, sum_sq)
        })
        .collect();
    let mut sum = vec![0.0; k + 1];
    let mut sum_sq = vec![0.0; k + 1];
    for (s, q) in &partial {
        for i in 0..=k {
            sum[i] += s[i];
            sum_sq[i] += q[i];
        }
    }
    let n = draws as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let se: Vec<f64> = (0..=k)
        .map(|i| {
            if draws < 2 {
                0.0
            } else {
                let var = ((sum_sq[i] - n * mean[i] * mean[i]) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            }
        })
        .collect();
    ErgodicEveRates {
        common: mean[0],
        private: mean[1..].to_vec(),
        common_se: se[0],
        private_se: se[1..].to_vec(),
        draws,
    }
}

/// Moment-based Eve rates in nats: each expectation of a log is replaced by
/// the log of the expected argument, using the closed-form second moment.
pub fn deterministic_eve_rates(
    vars: &DesignVariables,
    norm: &NormalizedChannels,
    eve: &EveMoment,
    params: &PhysicalParams,
) -> (f64, Vec<f64>) {
    let noise = 1.0 + eve.j_tilde_e(params).dot(&abs2(&vars.theta));
    let g_hat = eve.g_hat_e(&norm.g, &vars.theta, params);
    let per_col: Vec<f64> = (0..vars.w.ncols())
        .map(|i| quad_form(&g_hat, &vars.w.column(i).into_owned()))
        .collect();
    let total = noise + per_col.iter().sum::<f64>() + quad_form(&g_hat, &vars.z);
    let common = total.ln() - (total - per_col[0]).ln();
    let private = per_col[1..].iter().map(|p| total.ln() - (total - p).ln()).collect();
    (common, private)
}

/// Secrecy, sensing and power summary, rates in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecrecyReport {
    pub epsr_k: Vec<f64>,
    pub min_epsr: f64,
    pub ecsr_margin: f64,
    pub radar_snr: f64,
    pub bs_power: f64,
    pub ris_power: f64,
}

/// Combines user rates with ergodic Eve rates (bits) into the secrecy metrics.
pub fn secrecy_report(
    vars: &DesignVariables,
    channels: &ChannelSet,
    norm: &NormalizedChannels,
    erg: &ErgodicEveRates,
    params: &PhysicalParams,
) -> SecrecyReport {
    let sinr = sinr_report(vars, norm, params, None);
    let r_bits: Vec<f64> = vars.r.iter().map(|r| r / LN_2).collect();
    let epsr_k: Vec<f64> = (0..vars.k())
        .map(|k| r_bits[k] + (sinr.gamma_k[k].ln_1p() / LN_2 - erg.private[k]).max(0.0))
        .collect();
    let min_common = sinr
        .gamma_s0_k
        .iter()
        .map(|g| g.ln_1p() / LN_2)
        .fold(f64::INFINITY, f64::min);
    SecrecyReport {
        min_epsr: epsr_k.iter().copied().fold(f64::INFINITY, f64::min),
        epsr_k,
        ecsr_margin: min_common - erg.common - r_bits.iter().sum::<f64>(),
        radar_snr: radar_snr(vars, channels, params),
        bs_power: bs_power(vars),
        ris_power: ris_power(vars, channels, params),
    }
}

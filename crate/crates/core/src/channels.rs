//! Channel realizations over the planar geometry and the closed-form second
//! moment of the RIS→Eve channel.
//!
//! Angles are azimuths measured from the +x axis. The BS→RIS matrix `G` is
//! N×M, every RIS→node channel is an N-vector, and the target response is the
//! rank-one Hermitian matrix `h_RT h_RTᴴ`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;
use thiserror::Error;

use crate::config::{to_linear, PhysicalParams, SystemConfig};
use crate::linalg::{
    abs2, cmat_json, cvec_json, diag, hermitian_eigen, hermitian_part, CMat, CVec, RVec, C64,
};

/// Errors raised by the Eve moment construction.
#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    /// The closed form divides by `alpha_re − 2`.
    #[error("alpha_re = 2 is a pole of the Eve second-moment formula")]
    FormulaPole,
}

/// Uniform linear array response.
pub fn steering_vector(angle: f64, count: usize, spacing: f64) -> CVec {
    let phase = 2.0 * PI * spacing * angle.sin();
    CVec::from_fn(count, |n, _| C64::from_polar(1.0, phase * n as f64))
}

/// `ℓ (d/d0)^−α`.
pub fn large_scale_gain(distance: f64, exponent: f64, params: &PhysicalParams) -> f64 {
    params.pathloss_ref * (distance / params.d0).powf(-exponent)
}

fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rician draw with a steering-vector line-of-sight part.
///
/// With `tx_angle = None` the result is an `rx_count`×1 column.
#[allow(clippy::too_many_arguments)]
pub fn sample_rician<R: Rng + ?Sized>(
    rx_angle: f64,
    tx_angle: Option<f64>,
    rx_count: usize,
    tx_count: usize,
    distance: f64,
    params: &PhysicalParams,
    exponent: f64,
    rng: &mut R,
) -> CMat {
    let a_rx = steering_vector(rx_angle, rx_count, params.spacing);
    let los = match tx_angle {
        Some(angle) => &a_rx * steering_vector(angle, tx_count, params.spacing).adjoint(),
        None => CMat::from_column_slice(rx_count, 1, a_rx.as_slice()),
    };
    let cols = los.ncols();
    let nlos = CMat::from_fn(rx_count, cols, |_, _| standard_complex_normal(rng));
    let k = params.kappa;
    let amp = large_scale_gain(distance, exponent, params).sqrt();
    (los * C64::from((k / (1.0 + k)).sqrt()) + nlos * C64::from((1.0 / (1.0 + k)).sqrt()))
        * C64::from(amp)
}

/// One channel realization.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// BS→RIS, N×M.
    pub g: CMat,
    /// RIS→user k, one N-vector per user.
    pub h_rk: Vec<CVec>,
    /// RIS→target.
    pub h_rt: CVec,
    pub user_positions: Vec<[f64; 2]>,
    /// Target response `h_RT h_RTᴴ`.
    pub h_rt_mat: CMat,
}

impl ChannelSet {
    /// Builds a set from explicit channels.
    pub fn new(g: CMat, h_rk: Vec<CVec>, h_rt: CVec, user_positions: Vec<[f64; 2]>) -> Self {
        let h_rt_mat = &h_rt * h_rt.adjoint();
        Self {
            g,
            h_rk,
            h_rt,
            user_positions,
            h_rt_mat,
        }
    }

    /// JSON with complex entries as `[re, im]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "G": cmat_json(&self.g),
            "h_Rk": self.h_rk.iter().map(cvec_json).collect::<Vec<_>>(),
            "h_RT": cvec_json(&self.h_rt),
            "H_RT": cmat_json(&self.h_rt_mat),
            "user_positions": self.user_positions,
        })
    }
}

fn azimuth(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Area-uniform point in a disk.
pub fn sample_disk_point<R: Rng + ?Sized>(center: [f64; 2], radius: f64, rng: &mut R) -> [f64; 2] {
    let rho = radius * rng.random::<f64>().sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    [center[0] + rho * phi.cos(), center[1] + rho * phi.sin()]
}

/// Draws the user drop and every legitimate and target channel.
pub fn sample_scene<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> ChannelSet {
    let params = to_linear(config);
    let (bs, ris) = (config.bs_pos, config.ris_pos);
    let users: Vec<[f64; 2]> = (0..config.k)
        .map(|_| sample_disk_point(config.user_disk_center, config.user_disk_radius, rng))
        .collect();
    let g = sample_rician(
        azimuth(ris, bs),
        Some(azimuth(bs, ris)),
        config.n,
        config.m,
        distance(bs, ris).max(1e-9),
        &params,
        config.alpha_br,
        rng,
    );
    let h_rk = users
        .iter()
        .map(|&p| {
            sample_rician(
                azimuth(ris, p),
                None,
                config.n,
                1,
                distance(ris, p).max(1e-9),
                &params,
                config.alpha_ru,
                rng,
            )
            .column(0)
            .into_owned()
        })
        .collect();
    let h_rt = sample_rician(
        config.target_angle,
        None,
        config.n,
        1,
        config.target_range,
        &params,
        config.alpha_rt,
        rng,
    )
    .column(0)
    .into_owned();
    ChannelSet::new(g, h_rk, h_rt, users)
}

/// Distance with density `2d/(d2²−d1²)` on `[d1, d2]`, by inverse CDF.
pub fn sample_eve_distance<R: Rng + ?Sized>(d1: f64, d2: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    (d1 * d1 + u * (d2 * d2 - d1 * d1)).sqrt()
}

/// One RIS→Eve channel with the Eve position uniform over the annular sector.
pub fn eve_channel_sample<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> CVec {
    let params = to_linear(config);
    eve_channel_sample_with(config, &params, rng)
}

/// [`eve_channel_sample`] with precomputed linear parameters.
pub fn eve_channel_sample_with<R: Rng + ?Sized>(
    config: &SystemConfig,
    params: &PhysicalParams,
    rng: &mut R,
) -> CVec {
    let d = sample_eve_distance(config.eve_d1, config.eve_d2, rng);
    let theta = config.eve_theta1 + (config.eve_theta2 - config.eve_theta1) * rng.random::<f64>();
    sample_rician(theta, None, config.n, 1, d, params, config.alpha_re, rng)
        .column(0)
        .into_owned()
}

/// Closed-form `E{h_RE h_REᴴ}` and its eigen-factors.
#[derive(Debug, Clone)]
pub struct EveMoment {
    /// Hermitian PSD N×N second moment.
    pub h_hat: CMat,
    /// Eigenvalues, ascending, clipped at zero.
    pub eigvals: RVec,
    /// Matching unit eigenvectors as columns.
    pub eigvecs: CMat,
    /// Columns `√λ_n e_n`, so that `J Jᴴ = H_hat`.
    pub j_frown: CMat,
    /// Scalar prefactor of the closed form (distance average over `1+κ`).
    pub prefactor: f64,
}

impl EveMoment {
    /// Element count.
    pub fn n(&self) -> usize {
        self.h_hat.nrows()
    }

    /// Diagonal of `D̃_n = √λ_n diag(e_nᴴ)`.
    pub fn d_tilde(&self, n: usize) -> CVec {
        self.eigvecs.column(n).map(|x| x.conj()) * C64::from(self.eigvals[n].sqrt())
    }

    /// Diagonal of `J̃_E = σ_R²σ_E⁻² Σ_n λ_n diag(|e_n|²)`.
    pub fn j_tilde_e(&self, params: &PhysicalParams) -> RVec {
        let mut acc = RVec::zeros(self.n());
        for n in 0..self.n() {
            acc += abs2(&self.eigvecs.column(n).into_owned()) * self.eigvals[n];
        }
        acc * (params.sigma2_ris / params.sigma2_eve)
    }

    /// `Ĝ_E = σ_E⁻² Gᴴ Φ Ĥ Φᴴ G`.
    pub fn g_hat_e(&self, g: &CMat, theta: &CVec, params: &PhysicalParams) -> CMat {
        let phi_g = diag(&theta.map(|t| t.conj())) * g;
        let out = phi_g.adjoint() * &self.h_hat * &phi_g;
        hermitian_part(&out) / C64::from(params.sigma2_eve)
    }
}

/// Trapezoid average of `a(θ)a(θ)ᴴ` over `[θ1, θ2]`.
fn angular_average(config: &SystemConfig) -> CMat {
    let n = config.n;
    let segments = config.n_theta.max(1);
    let span = config.eve_theta2 - config.eve_theta1;
    let mut acc = CMat::zeros(n, n);
    if span.abs() < f64::EPSILON {
        let a = steering_vector(config.eve_theta1, n, config.element_spacing_wavelengths);
        return &a * a.adjoint();
    }
    let step = span / segments as f64;
    for i in 0..=segments {
        let weight = if i == 0 || i == segments { 1.0 } else { 2.0 };
        let a = steering_vector(
            config.eve_theta1 + i as f64 * step,
            n,
            config.element_spacing_wavelengths,
        );
        acc += (&a * a.adjoint()) * C64::from(weight);
    }
    acc * C64::from(step / (2.0 * span))
}

/// Second moment of the RIS→Eve channel under the uniform annular-sector prior.
///
/// # Errors
///
/// [`ChannelError::FormulaPole`] when `alpha_re = 2`.
pub fn eve_second_moment(config: &SystemConfig) -> Result<EveMoment, ChannelError> {
    let alpha = config.alpha_re;
    if (alpha - 2.0).abs() < 1e-12 {
        return Err(ChannelError::FormulaPole);
    }
    let params = to_linear(config);
    let (d1, d2, kappa) = (config.eve_d1, config.eve_d2, params.kappa);
    let distance_mean = if (d2 - d1).abs() < f64::EPSILON {
        (d1 / config.d0).powf(-alpha)
    } else {
        (1.0 / config.d0).powf(-alpha) * 2.0 * (d1.powf(2.0 - alpha) - d2.powf(2.0 - alpha))
            / ((d2 * d2 - d1 * d1) * (alpha - 2.0))
    };
    let prefactor = params.pathloss_ref * distance_mean / (1.0 + kappa);
    let n = config.n;
    let core = angular_average(config) * C64::from(kappa) + CMat::identity(n, n);
    let h_hat = hermitian_part(&(core * C64::from(prefactor)));
    let (mut eigvals, eigvecs) = hermitian_eigen(&h_hat);
    eigvals.apply(|x| *x = x.max(0.0));
    let mut j_frown = eigvecs.clone();
    for (idx, mut col) in j_frown.column_iter_mut().enumerate() {
        col *= C64::from(eigvals[idx].sqrt());
    }
    Ok(EveMoment {
        h_hat,
        eigvals,
        eigvecs,
        j_frown,
        prefactor,
    })
}

/// Channels normalized by the receiver noise levels.
#[derive(Debug, Clone)]
pub struct NormalizedChannels {
    pub g: CMat,
    /// `σ_k⁻¹ diag(h_R,kᴴ) G`.
    pub hbar_k: Vec<CMat>,
    /// `σ_k⁻¹ h_R,kᴴ` stored as a column (entries conjugated).
    pub hbar_rk: Vec<CVec>,
}

impl NormalizedChannels {
    /// `σ_E⁻¹ diag(h_REᴴ) G` for an explicit Eve draw.
    pub fn hbar_e(&self, h_re: &CVec, params: &PhysicalParams) -> CMat {
        normalized_cascade(h_re, &self.g, params.sigma2_eve)
    }
}

fn normalized_cascade(h: &CVec, g: &CMat, sigma2: f64) -> CMat {
    let hbar = h.map(|x| x.conj()) / C64::from(sigma2.sqrt());
    diag(&hbar) * g
}

/// Applies the noise normalization to every legitimate link.
pub fn normalize(channels: &ChannelSet, params: &PhysicalParams) -> NormalizedChannels {
    let scale = C64::from(params.sigma2_ue.sqrt());
    NormalizedChannels {
        g: channels.g.clone(),
        hbar_k: channels
            .h_rk
            .iter()
            .map(|h| normalized_cascade(h, &channels.g, params.sigma2_ue))
            .collect(),
        hbar_rk: channels.h_rk.iter().map(|h| h.map(|x| x.conj()) / scale).collect(),
    }
}

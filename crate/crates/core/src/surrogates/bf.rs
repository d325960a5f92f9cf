//! Beamforming-side expansion: θ, u are fixed and the constraints are convex
//! in the precoder columns, the AN vector, the rate split and τ.

use serde_json::json;

use super::{rate_coefficients, Block, QuadraticConstraint, Scalar, Sense, SurrogateError};
use crate::channels::{ChannelSet, EveMoment, NormalizedChannels};
use crate::config::PhysicalParams;
use crate::linalg::{abs2, cmat_json, cvec_json, diag, hermitian_part, CMat, CVec, C64};
use crate::metrics::{effective_noise, radar_matrices, DesignVariables};

/// Cached quantities of the beamforming subproblem at one iterate.
#[derive(Debug, Clone)]
pub struct BfExpansion {
    pub vars: DesignVariables,
    /// Effective user channels `c_k = H̄_kᴴθ`, so that `θᴴH̄_k w = c_kᴴw`.
    pub eff: Vec<CVec>,
    pub alpha: Vec<C64>,
    pub beta: Vec<f64>,
    pub alpha0: Vec<C64>,
    pub beta0: Vec<f64>,
    pub sigma_r: Vec<f64>,
    pub sigma_e: f64,
    pub g_hat_e: CMat,
    /// Per-column block of `Ω̂`, `σ_E⁻¹ J_frownᴴ Φᴴ G`.
    pub omega_block: CMat,
    /// Column order of `ω_E,k`.
    pub stack_e: Vec<Vec<Block>>,
    /// Column order of `ω_0E`.
    pub stack_0e: Vec<Block>,
    pub omega_e: Vec<CVec>,
    pub omega_0e: CVec,
    pub q_mat_e: Vec<CMat>,
    pub q_inv_e: Vec<CMat>,
    pub q_mat_0e: CMat,
    pub q_inv_0e: CMat,
    pub q_e: Vec<f64>,
    pub q_0e: f64,
    /// `‖Ω̂ω_t‖²/σ̄_E`, so that `q = s/(1+s)` and `1/(1−q) = 1+s`.
    pub s_e: Vec<f64>,
    pub s_0e: f64,
    pub ell_e: f64,
    pub qbar_e: Vec<CMat>,
    pub qbar_0e: CMat,
    /// `σ̄_E⁻¹ Ω̂ᴴ Q⁻¹ Ω̂ ω_t` for each private stack.
    pub lin_e: Vec<CVec>,
    pub lin_0e: CVec,
    pub eps_0: Vec<f64>,
    pub eps_1: Vec<f64>,
    pub eps_11: Vec<f64>,
    pub eps_bar_11: Vec<f64>,
    pub eps_e: Vec<f64>,
    pub eps_bar_e: Vec<f64>,
    pub eps_2: Vec<f64>,
    pub eps_0e: f64,
    pub eps_bar_12: Vec<f64>,
    pub eps_bar_0e: Vec<f64>,
    /// A ridge was added to some `Q` before inversion.
    pub regularized: bool,
}

/// Stacked Eve-side quantities of one `ω` vector.
struct StackCache {
    omega: CVec,
    q_mat: CMat,
    q_inv: CMat,
    s: f64,
    q: f64,
    qbar: CMat,
    lin: CVec,
    eps: f64,
    regularized: bool,
}

fn stack_values(w: &CMat, z: &CVec, blocks: &[Block]) -> CVec {
    let m = z.len();
    let mut out = CVec::zeros(m * blocks.len());
    for (idx, b) in blocks.iter().enumerate() {
        let col = match b {
            Block::W(i) => w.column(*i).into_owned(),
            _ => z.clone(),
        };
        out.rows_mut(idx * m, m).copy_from(&col);
    }
    out
}

/// Block-diagonal `I_B ⊗ F`.
fn block_diag(f: &CMat, count: usize) -> CMat {
    let (r, c) = f.shape();
    let mut out = CMat::zeros(r * count, c * count);
    for b in 0..count {
        out.view_mut((b * r, b * c), (r, c)).copy_from(f);
    }
    out
}

/// Inverse of a Hermitian PD matrix, ridged when badly conditioned.
fn hpd_inverse(q: &CMat) -> (CMat, bool) {
    let eig = crate::linalg::hermitian_eigen(q).0;
    let (lo, hi) = (eig[0], eig[eig.len() - 1]);
    let ridged = !(lo > 0.0 && hi / lo <= 1e12);
    let mat = if ridged {
        q + CMat::identity(q.nrows(), q.nrows()) * C64::from(1e-10)
    } else {
        q.clone()
    };
    let inv = mat
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| mat.try_inverse())
        .unwrap_or_else(|| CMat::identity(q.nrows(), q.nrows()));
    (hermitian_part(&inv), ridged)
}

fn stack_cache(omega: CVec, omega_op: &CMat, sigma_e: f64) -> StackCache {
    let a = omega_op * &omega;
    let dim = a.len();
    let q_mat = CMat::identity(dim, dim) + (&a * a.adjoint()) / C64::from(sigma_e);
    let (q_inv, regularized) = hpd_inverse(&q_mat);
    // Q is a rank-one update of the identity, so Q⁻¹a = a/(1+s) exactly; the
    // closed form stays accurate when s is far beyond the dense inverse's reach.
    let s = a.norm_squared() / sigma_e;
    let lin = omega_op.adjoint() * &a / C64::from(sigma_e * (1.0 + s));
    StackCache {
        omega,
        q_mat,
        q_inv,
        s,
        q: s / (1.0 + s),
        qbar: &lin * lin.adjoint(),
        lin,
        eps: s / (1.0 + s).powi(2),
        regularized,
    }
}

/// Builds the beamforming-side expansion at `vars`.
pub fn bf_expand(
    vars: &DesignVariables,
    norm: &NormalizedChannels,
    eve: &EveMoment,
    params: &PhysicalParams,
) -> BfExpansion {
    let k_users = vars.k();
    let theta = &vars.theta;
    let w = &vars.w;
    let z = &vars.z;
    let eff: Vec<CVec> = norm.hbar_k.iter().map(|h| h.ad_mul(theta)).collect();
    let sigma_r: Vec<f64> = norm
        .hbar_rk
        .iter()
        .map(|h| effective_noise(theta, h, params.sigma2_ris))
        .collect();
    let sigma_e = 1.0 + eve.j_tilde_e(params).dot(&abs2(theta));
    let g_hat_e = eve.g_hat_e(&norm.g, theta, params);
    let omega_block = eve.j_frown.adjoint() * diag(&theta.map(|t| t.conj())) * &norm.g
        / C64::from(params.sigma2_eve.sqrt());
    let omega_op = block_diag(&omega_block, k_users + 1);

    let mut alpha = Vec::with_capacity(k_users);
    let mut beta = Vec::with_capacity(k_users);
    let mut alpha0 = Vec::with_capacity(k_users);
    let mut beta0 = Vec::with_capacity(k_users);
    for (k, c) in eff.iter().enumerate() {
        let amp: Vec<C64> = (0..=k_users).map(|i| c.dotc(&w.column(i))).collect();
        let an = c.dotc(z).norm_sqr();
        let private_total: f64 = amp[1..].iter().map(|a| a.norm_sqr()).sum();
        alpha.push(amp[k + 1]);
        beta.push(private_total - amp[k + 1].norm_sqr() + an + sigma_r[k]);
        alpha0.push(amp[0]);
        beta0.push(private_total + an + sigma_r[k]);
    }

    let ell_e = sigma_e - 1.0
        + (0..=k_users)
            .map(|i| crate::linalg::quad_form(&g_hat_e, &w.column(i).into_owned()))
            .sum::<f64>()
        + crate::linalg::quad_form(&g_hat_e, z);

    let stack_e: Vec<Vec<Block>> = (1..=k_users)
        .map(|kk| {
            (0..=k_users)
                .filter(|&i| i != kk)
                .map(Block::W)
                .chain(std::iter::once(Block::Z))
                .collect()
        })
        .collect();
    let stack_0e: Vec<Block> = (1..=k_users)
        .map(Block::W)
        .chain(std::iter::once(Block::Z))
        .collect();
    let caches: Vec<StackCache> = stack_e
        .iter()
        .map(|s| stack_cache(stack_values(w, z, s), &omega_op, sigma_e))
        .collect();
    let common = stack_cache(stack_values(w, z, &stack_0e), &omega_op, sigma_e);

    let one_plus_ell = 1.0 + ell_e;
    let tangent = -one_plus_ell.ln() - sigma_e / one_plus_ell;
    let mut eps_0 = Vec::new();
    let mut eps_1 = Vec::new();
    let mut eps_11 = Vec::new();
    let mut eps_bar_11 = Vec::new();
    let mut eps_e = Vec::new();
    let mut eps_bar_e = Vec::new();
    let mut eps_2 = Vec::new();
    let mut eps_bar_12 = Vec::new();
    let mut eps_bar_0e = Vec::new();
    for k in 0..k_users {
        let (kappa, head) = rate_coefficients(alpha[k], beta[k]);
        let e0 = head - kappa * sigma_r[k];
        let c = &caches[k];
        let e1 = 1.0 + c.s.ln_1p() + sigma_e.ln() - one_plus_ell.ln();
        let e11 = e1 - c.s;
        let eb11 = e11 - c.eps * (1.0 + c.s) - sigma_e / one_plus_ell;
        eps_0.push(e0);
        eps_1.push(e1);
        eps_11.push(e11);
        eps_bar_11.push(eb11);
        eps_e.push(c.eps);
        eps_bar_e.push(e0 + eb11);

        let (kappa0, head0) = rate_coefficients(alpha0[k], beta0[k]);
        let e2 = head0 - kappa0 * sigma_r[k];
        let eb12 = 1.0 + common.s.ln_1p() + sigma_e.ln() + tangent - (common.q + common.eps) * (1.0 + common.s);
        eps_2.push(e2);
        eps_bar_12.push(eb12);
        eps_bar_0e.push(e2 + eb12);
    }

    let regularized = common.regularized || caches.iter().any(|c| c.regularized);
    let (mut omega_e, mut q_mat_e, mut q_inv_e, mut q_e, mut qbar_e, mut lin_e) =
        (vec![], vec![], vec![], vec![], vec![], vec![]);
    let s_e: Vec<f64> = caches.iter().map(|c| c.s).collect();
    for c in caches {
        omega_e.push(c.omega);
        q_mat_e.push(c.q_mat);
        q_inv_e.push(c.q_inv);
        q_e.push(c.q);
        qbar_e.push(c.qbar);
        lin_e.push(c.lin);
    }
    BfExpansion {
        vars: vars.clone(),
        eff,
        alpha,
        beta,
        alpha0,
        beta0,
        sigma_r,
        sigma_e,
        g_hat_e,
        omega_block,
        stack_e,
        stack_0e,
        omega_e,
        omega_0e: common.omega,
        q_mat_e,
        q_inv_e,
        q_mat_0e: common.q_mat,
        q_inv_0e: common.q_inv,
        q_e,
        q_0e: common.q,
        s_e,
        s_0e: common.s,
        ell_e,
        qbar_e,
        qbar_0e: common.qbar,
        lin_e,
        lin_0e: common.lin,
        eps_0,
        eps_1,
        eps_11,
        eps_bar_11,
        eps_e,
        eps_bar_e,
        eps_2,
        eps_0e: common.eps,
        eps_bar_12,
        eps_bar_0e,
        regularized,
    }
}

impl BfExpansion {
    /// User count.
    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    /// Antenna count.
    pub fn m(&self) -> usize {
        self.vars.w.nrows()
    }

    /// `-Ĝ_E/(1+ℓ_E)` on every precoder column and the AN.
    fn add_eve_tangent(&self, con: &mut QuadraticConstraint) {
        let scaled = &self.g_hat_e * C64::from(-1.0 / (1.0 + self.ell_e));
        for i in 0..=self.k() {
            con.quad(vec![Block::W(i)], scaled.clone());
        }
        con.quad(vec![Block::Z], scaled);
    }

    /// Rank-one rate curvature on the listed columns and the AN.
    fn add_rate_curvature(&self, con: &mut QuadraticConstraint, k: usize, kappa: f64, cols: &[usize]) {
        let c = &self.eff[k];
        let mat = (c * c.adjoint()) * C64::from(-kappa);
        for &i in cols {
            con.quad(vec![Block::W(i)], mat.clone());
        }
        con.quad(vec![Block::Z], mat);
    }

    /// JSON summary of the scalar caches and the main matrices.
    pub fn to_json(&self) -> serde_json::Value {
        let pairs = |v: &[C64]| v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>();
        json!({
            "kind": "bf",
            "alpha": pairs(&self.alpha),
            "beta": self.beta,
            "alpha0": pairs(&self.alpha0),
            "beta0": self.beta0,
            "sigma_r": self.sigma_r,
            "sigma_e": self.sigma_e,
            "ell_e": self.ell_e,
            "q_e": self.q_e,
            "q_0e": self.q_0e,
            "eps_0": self.eps_0,
            "eps_1": self.eps_1,
            "eps_11": self.eps_11,
            "eps_bar_11": self.eps_bar_11,
            "eps_e": self.eps_e,
            "eps_bar_e": self.eps_bar_e,
            "eps_2": self.eps_2,
            "eps_0e": self.eps_0e,
            "eps_bar_12": self.eps_bar_12,
            "eps_bar_0e": self.eps_bar_0e,
            "g_hat_e": cmat_json(&self.g_hat_e),
            "omega_block": cmat_json(&self.omega_block),
            "omega_0e": cvec_json(&self.omega_0e),
            "qbar_0e": cmat_json(&self.qbar_0e),
            "regularized": self.regularized,
        })
    }
}

/// Private secrecy constraint of user `k` (0-based): `F^p + r_k − τ ≥ 0`.
pub fn bf_epsr_constraint(exp: &BfExpansion, k: usize) -> QuadraticConstraint {
    let mut con = QuadraticConstraint::new(format!("bf_epsr_{}", k + 1), Sense::Ge);
    let (kappa, _) = rate_coefficients(exp.alpha[k], exp.beta[k]);
    con.constant = exp.eps_bar_e[k];
    con.lin(
        Block::W(k + 1),
        &exp.eff[k] * (exp.alpha[k] * C64::from(2.0 / exp.beta[k])),
    );
    let cols: Vec<usize> = (1..=exp.k()).collect();
    exp.add_rate_curvature(&mut con, k, kappa, &cols);
    let scale = 1.0 + exp.s_e[k];
    con.lin_stacked(&exp.stack_e[k], &(&exp.lin_e[k] * C64::from(2.0 * scale)), exp.m());
    con.quad(exp.stack_e[k].clone(), &exp.qbar_e[k] * C64::from(-scale));
    exp.add_eve_tangent(&mut con);
    con.scalars = vec![(Scalar::R(k), 1.0), (Scalar::Tau, -1.0)];
    con
}

/// Common secrecy constraints, one per user: `F^c_k − Σ r ≥ 0`.
pub fn bf_ecsr_constraint(exp: &BfExpansion) -> Vec<QuadraticConstraint> {
    let scale = 1.0 + exp.s_0e;
    (0..exp.k())
        .map(|k| {
            let mut con = QuadraticConstraint::new(format!("bf_ecsr_{}", k + 1), Sense::Ge);
            let (kappa, _) = rate_coefficients(exp.alpha0[k], exp.beta0[k]);
            con.constant = exp.eps_bar_0e[k];
            con.lin(
                Block::W(0),
                &exp.eff[k] * (exp.alpha0[k] * C64::from(2.0 / exp.beta0[k])),
            );
            let cols: Vec<usize> = (0..=exp.k()).collect();
            exp.add_rate_curvature(&mut con, k, kappa, &cols);
            con.lin_stacked(&exp.stack_0e, &(&exp.lin_0e * C64::from(2.0 * scale)), exp.m());
            con.quad(exp.stack_0e.clone(), &exp.qbar_0e * C64::from(-scale));
            exp.add_eve_tangent(&mut con);
            con.scalars = (0..exp.k()).map(|j| (Scalar::R(j), -1.0)).collect();
            con
        })
        .collect()
}

/// Receive-side noise power `σ̄_R` of the radar output.
pub fn radar_noise(vars: &DesignVariables, channels: &ChannelSet, params: &PhysicalParams) -> f64 {
    let mats = radar_matrices(&vars.theta, channels);
    params.rcs * params.sigma2_ris * mats.h_0.ad_mul(&vars.u).norm_squared()
        + params.sigma2_ris * mats.h_1.ad_mul(&vars.u).norm_squared()
        + params.sigma2_bs * vars.u.norm_squared()
}

/// Linearized radar SNR constraint, affine in the precoders and the AN.
pub fn bf_radar_constraint(
    exp: &BfExpansion,
    channels: &ChannelSet,
    params: &PhysicalParams,
) -> QuadraticConstraint {
    let vars = &exp.vars;
    let mats = radar_matrices(&vars.theta, channels);
    let h_row = mats.h_t.ad_mul(&vars.u);
    let hbar_t = &h_row * h_row.adjoint();
    let mut con = QuadraticConstraint::new("bf_radar", Sense::Ge);
    let mut current = 0.0;
    for i in 0..=exp.k() {
        let col = vars.w.column(i).into_owned();
        let hw = &hbar_t * &col;
        current += col.dotc(&hw).re;
        con.lin(Block::W(i), hw * C64::from(2.0));
    }
    let hz = &hbar_t * &vars.z;
    current += vars.z.dotc(&hz).re;
    con.lin(Block::Z, hz * C64::from(2.0));
    let sigma_bar = radar_noise(vars, channels, params);
    con.constant = -(params.gamma_r * sigma_bar / params.rcs + current);
    con
}

/// BS and RIS power budgets at the fixed reflection vector.
///
/// # Errors
///
/// [`SurrogateError::InfeasibleBudget`] when the RIS static power alone
/// exceeds its budget.
pub fn bf_budget_constraints(
    exp: &BfExpansion,
    channels: &ChannelSet,
    params: &PhysicalParams,
) -> Result<[QuadraticConstraint; 2], SurrogateError> {
    let m = exp.m();
    let mut bs = QuadraticConstraint::new("bs_power", Sense::Le);
    for i in 0..=exp.k() {
        bs.quad(vec![Block::W(i)], CMat::identity(m, m));
    }
    bs.quad(vec![Block::Z], CMat::identity(m, m));
    bs.constant = -params.p_bs;

    let phi = diag(&exp.vars.theta);
    let phi_g = &phi * &channels.g;
    let loop_gain = &phi * &channels.h_rt_mat * &phi;
    let g_rt = &loop_gain * &channels.g;
    let h_brt = hermitian_part(&(phi_g.adjoint() * &phi_g + g_rt.adjoint() * &g_rt * C64::from(params.rcs)));
    let static_power =
        params.rcs * params.sigma2_ris * loop_gain.norm_squared() + 2.0 * params.sigma2_ris * phi.norm_squared();
    let budget = params.p_ris - static_power;
    if budget <= 0.0 {
        return Err(SurrogateError::InfeasibleBudget {
            static_power,
            budget: params.p_ris,
        });
    }
    let mut ris = QuadraticConstraint::new("ris_power", Sense::Le);
    for i in 0..=exp.k() {
        ris.quad(vec![Block::W(i)], h_brt.clone());
    }
    ris.quad(vec![Block::Z], h_brt);
    ris.constant = -budget;
    Ok([bs, ris])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{eve_second_moment, normalize, sample_scene};
    use crate::config::{to_linear, SystemConfig};
    use crate::metrics::tests::random_vars;
    use crate::metrics::{deterministic_eve_rates, radar_snr, ris_power, sinr_report};
    use crate::linalg::hermitian_min_eig;
    use crate::surrogates::VarPoint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> SystemConfig {
        SystemConfig {
            m: 3,
            n: 4,
            k: 2,
            n_theta: 100,
            ..SystemConfig::default()
        }
    }

    struct Fixture {
        cfg: SystemConfig,
        p: PhysicalParams,
        set: ChannelSet,
        norm: NormalizedChannels,
        eve: EveMoment,
    }

    fn fixture(cfg: SystemConfig, seed: u64) -> (Fixture, ChaCha8Rng) {
        let p = to_linear(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = sample_scene(&cfg, &mut rng);
        let norm = normalize(&set, &p);
        let eve = eve_second_moment(&cfg).unwrap();
        (Fixture { cfg, p, set, norm, eve }, rng)
    }

    /// Scales channels so that rates are O(1) on the small instance.
    fn boosted(vars: &mut DesignVariables, factor: f64) {
        vars.w *= C64::from(factor);
        vars.z *= C64::from(factor);
    }

    /// `R_k − R_k,E` and `R_0,k − R_0,E` from the metrics layer, in nats.
    fn references(f: &Fixture, vars: &DesignVariables) -> (Vec<f64>, Vec<f64>) {
        let sinr = sinr_report(vars, &f.norm, &f.p, None);
        let (common_e, private_e) = deterministic_eve_rates(vars, &f.norm, &f.eve, &f.p);
        let private = (0..vars.k()).map(|k| sinr.gamma_k[k].ln_1p() - private_e[k]).collect();
        let common = (0..vars.k()).map(|k| sinr.gamma_s0_k[k].ln_1p() - common_e).collect();
        (private, common)
    }

    #[test]
    fn zero_stacks_give_trivial_caches() {
        let (f, mut rng) = fixture(small_cfg(), 1);
        let mut vars = random_vars(&f.cfg, &mut rng);
        vars.w.fill(C64::from(0.0));
        vars.z.fill(C64::from(0.0));
        let exp = bf_expand(&vars, &f.norm, &f.eve, &f.p);
        assert!(exp.q_e.iter().all(|&q| q == 0.0));
        assert!((exp.ell_e - (exp.sigma_e - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn q_below_one_and_matches_dense_inverse() {
        let (f, mut rng) = fixture(small_cfg(), 2);
        for trial in 0..1000 {
            let mut vars = random_vars(&f.cfg, &mut rng);
            boosted(&mut vars, 10f64.powi(trial % 7 - 3));
            let exp = bf_expand(&vars, &f.norm, &f.eve, &f.p);
            for k in 0..vars.k() {
                let q = exp.q_e[k];
                assert!((0.0..1.0 + 1e-9).contains(&q));
                if trial < 50 && exp.s_e[k] < 1e6 {
                    let a = block_diag(&exp.omega_block, vars.k() + 1) * &exp.omega_e[k];
                    let qa = &exp.q_inv_e[k] * &a;
                    let dense_q = a.dotc(&qa).re / exp.sigma_e;
                    assert!((q - dense_q).abs() < 1e-9);
                    assert!((exp.eps_e[k] - qa.norm_squared() / exp.sigma_e).abs() < 1e-9);
                    assert!(hermitian_min_eig(&exp.q_mat_e[k]) > 0.0);
                }
            }
            assert!(exp.ell_e >= exp.sigma_e - 1.0 - 1e-12);
        }
    }

    #[test]
    fn hand_instance_eps0_matches_scalar_formula() {
        let cfg = SystemConfig { m: 2, n: 2, k: 1, n_theta: 50, ..SystemConfig::default() };
        let (f, mut rng) = fixture(cfg, 3);
        let vars = random_vars(&f.cfg, &mut rng);
        let exp = bf_expand(&vars, &f.norm, &f.eve, &f.p);
        let row = f.set.h_rk[0].adjoint() * diag(&vars.theta).adjoint() * &f.set.g / C64::from(f.p.sigma2_ue.sqrt());
        let amp = |x: CVec| (&row * x)[(0, 0)];
        let a = amp(vars.w.column(1).into_owned());
        let noise = 1.0
            + f.p.sigma2_ris * (f.set.h_rk[0].adjoint() * diag(&vars.theta).adjoint()).norm_squared() / f.p.sigma2_ue;
        let b = amp(vars.z.clone()).norm_sqr() + noise;
        let x = a.norm_sqr() / b;
        let expected = (1.0 + x).ln() - x - a.norm_sqr() * noise / (b * (b + a.norm_sqr()));
        assert!((exp.eps_0[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn constraints_tight_at_expansion_point() {
        let (f, mut rng) = fixture(small_cfg(), 4);
        for trial in 0..30 {
            let mut vars = random_vars(&f.cfg, &mut rng);
            boosted(&mut vars, 10f64.powi(trial % 5));
            let exp = bf_expand(&vars, &f.norm, &f.eve, &f.p);
            let (private, common) = references(&f, &vars);
            let tau = 0.3;
            let point = VarPoint::from_vars(&vars, tau);
            for k in 0..vars.k() {
                let con = bf_epsr_constraint(&exp, k);
                let expected = private[k] + vars.r[k] - tau;
                assert!((con.lhs(&point) - expected).abs() < 1e-7, "{} vs {}", con.lhs(&point), expected);
                assert!(con.is_convex(1e-9));
            }
            let r_sum: f64 = vars.r.iter().sum();
            for (k, con) in bf_ecsr_constraint(&exp).iter().enumerate() {
                assert!((con.lhs(&point) - (common[k] - r_sum)).abs() < 1e-7);
                assert!(con.is_convex(1e-9));
            }
        }
    }

    #[test]
    fn constraints_lower_bound_the_approximant() {
        let (f, mut rng) = fixture(small_cfg(), 5);
        for trial in 0..100 {
            let mut vars = random_vars(&f.cfg, &mut rng);
            boosted(&mut vars, 10f64.powi(trial % 4));
            let exp = bf_expand(&vars, &f.norm, &f.eve, &f.p);
            let mut cand = random_vars(&f.cfg, &mut rng);
            boosted(&mut cand, 10f64.powi((trial / 4) % 4));
            cand.theta = vars.theta.clone();
            let (private, common) = references(&f, &cand);
            let point = VarPoint::from_vars(&cand, 0.0);
            for k in 0..vars.k() {
                let lhs = bf_epsr_constraint(&exp, k).lhs(&point);
                assert!(lhs <= private[k] + cand.r[k] + 1e-8);
            }
            let r_sum: f64 = cand.r.iter().sum();
            for (k, con) in bf_ecsr_constraint(&exp).iter().enumerate() {
                assert!(con.lhs(&point) <= common[k] - r_sum + 1e-8);
            }
        }
    }

    #[test]
    fn zero_candidate_leaves_constants() {
        let (f, mut rng) = fixture(small_cfg(), 6);
        let vars = random_vars(&f.cfg, &mut rng);
        let exp = bf_expand(&vars, &f.norm, &f.eve, &f.p);
        let mut cand = vars.clone();
        cand.w.fill(C64::from(0.0));
        cand.z.fill(C64::from(0.0));
        cand.r.fill(0.0);
        let point = VarPoint::from_vars(&cand, 0.0);
        let con = bf_epsr_constraint(&exp, 0);
        assert!((con.lhs(&point) - exp.eps_bar_e[0]).abs() < 1e-12);
    }

    #[test]
    fn radar_constraint_minorizes_snr_margin() {
        let (f, mut rng) = fixture(small_cfg(), 7);
        let vars = random_vars(&f.cfg, &mut rng);
        let exp = bf_expand(&vars, &f.norm, &f.eve, &f.p);
        let con = bf_radar_constraint(&exp, &f.set, &f.p);
        let sigma_bar = radar_noise(&vars, &f.set, &f.p);
        let margin = |v: &DesignVariables| {
            sigma_bar / f.p.rcs * (radar_snr(v, &f.set, &f.p) - f.p.gamma_r)
        };
        let at_t = con.lhs(&VarPoint::from_vars(&vars, 0.0));
        assert!((at_t - margin(&vars)).abs() < 1e-9 * margin(&vars).abs().max(1.0));
        for _ in 0..100 {
            let mut cand = random_vars(&f.cfg, &mut rng);
            cand.theta = vars.theta.clone();
            cand.u = vars.u.clone();
            let lhs = con.lhs(&VarPoint::from_vars(&cand, 0.0));
            assert!(lhs <= margin(&cand) + 1e-9 * margin(&cand).abs().max(1.0));
        }
    }

    #[test]
    fn ris_budget_matches_direct_power() {
        let (f, mut rng) = fixture(small_cfg(), 8);
        for _ in 0..20 {
            let vars = random_vars(&f.cfg, &mut rng);
            let exp = bf_expand(&vars, &f.norm, &f.eve, &f.p);
            let p = f.p.clone();
            let [bs, ris] = bf_budget_constraints(&exp, &f.set, &p).unwrap();
            let point = VarPoint::from_vars(&vars, 0.0);
            let direct = ris_power(&vars, &f.set, &p);
            let phi = diag(&vars.theta);
            let static_power = p.rcs * p.sigma2_ris * (&phi * &f.set.h_rt_mat * &phi).norm_squared()
                + 2.0 * p.sigma2_ris * phi.norm_squared();
            let quad = ris.lhs(&point) - ris.constant;
            assert!((quad + static_power - direct).abs() < 1e-9 * direct, "{quad} {static_power} {direct}");
            assert!((bs.lhs(&point) + p.p_bs - crate::metrics::bs_power(&vars)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_theta_keeps_full_ris_budget() {
        let (f, mut rng) = fixture(small_cfg(), 9);
        let mut vars = random_vars(&f.cfg, &mut rng);
        vars.theta.fill(C64::from(0.0));
        let exp = bf_expand(&vars, &f.norm, &f.eve, &f.p);
        let [_, ris] = bf_budget_constraints(&exp, &f.set, &f.p).unwrap();
        assert!((ris.constant + f.p.p_ris).abs() < 1e-15);
    }

    #[test]
    fn static_ris_power_over_budget_is_an_error() {
        let (f, mut rng) = fixture(small_cfg(), 10);
        let vars = random_vars(&f.cfg, &mut rng);
        let exp = bf_expand(&vars, &f.norm, &f.eve, &f.p);
        let mut p = f.p.clone();
        p.p_ris = 1e-30;
        assert!(matches!(
            bf_budget_constraints(&exp, &f.set, &p),
            Err(SurrogateError::InfeasibleBudget { .. })
        ));
    }
}

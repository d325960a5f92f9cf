//! RIS-side expansion: the precoders, AN and receive filter are fixed and
//! the constraints are convex in θ, the rate split and τ.
//!
//! The radar SNR and the RIS power are quartic in θ through `v = θ ⊗ θ`.
//! Both quartic matrices factor as `L ⊗ R`, which keeps products with `v`
//! at O(N²) and gives the largest eigenvalue from the two factors.
//! The majorants replace `‖v‖²` by its ceiling `N²β_max⁴`, so they are
//! tight at the expansion point only up to `λ(N²β_max⁴ − ‖θ_t‖⁴)`.

use serde_json::json;

use super::{rate_coefficients, Block, QuadraticConstraint, Scalar, Sense};
use crate::channels::{ChannelSet, EveMoment, NormalizedChannels};
use crate::config::PhysicalParams;
use crate::linalg::{
    abs2, cmat_json, cvec_json, diag_real, hermitian_eigen, hermitian_part, kron_vec, symmetric_max_eig,
    CMat, CVec, RMat, RVec, C64,
};
use crate::metrics::{effective_noise, DesignVariables};

/// Hermitian matrix `left ⊗ right` kept in factored form.
#[derive(Debug, Clone)]
pub struct KronForm {
    pub left: CMat,
    pub right: CMat,
}

impl KronForm {
    /// `(L ⊗ R)(θ ⊗ θ) = Lθ ⊗ Rθ`.
    pub fn apply_lifted(&self, theta: &CVec) -> CVec {
        kron_vec(&(&self.left * theta), &(&self.right * theta))
    }

    /// `vᴴ(L ⊗ R)v = (θᴴLθ)(θᴴRθ)` for `v = θ ⊗ θ`.
    pub fn lifted_form(&self, theta: &CVec) -> f64 {
        let l = theta.dotc(&(&self.left * theta));
        let r = theta.dotc(&(&self.right * theta));
        (l * r).re
    }

    /// Largest eigenvalue from the factor spectra.
    pub fn max_eig(&self) -> f64 {
        let (l, _) = hermitian_eigen(&self.left);
        let (r, _) = hermitian_eigen(&self.right);
        let (l_lo, l_hi) = (l[0], l[l.len() - 1]);
        let (r_lo, r_hi) = (r[0], r[r.len() - 1]);
        [l_lo * r_lo, l_lo * r_hi, l_hi * r_lo, l_hi * r_hi]
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Dense N²×N² matrix.
    pub fn dense(&self) -> CMat {
        self.left.kronecker(&self.right)
    }
}

/// Quadratic majorant of a quartic `vᴴDv` over `|θ_n| ≤ β_max`:
/// `(λ̄/2)‖θ‖² + Re{θᴴd̃} + c_1 + c_2`.
#[derive(Debug, Clone)]
pub struct QuarticMajorant {
    /// Shift `λ ≥ λ_max(D)` of the lifted expansion.
    pub lambda: f64,
    /// `2(D − λI)v_t`.
    pub d: CVec,
    /// Column-major reshape of `d`, so `Re{vᴴd} = Re{θᴴD̈θ*}`.
    pub d_ddot: CMat,
    /// Real lift `[[Re D̈, Im D̈], [Im D̈, −Re D̈]]`.
    pub d_bar: RMat,
    /// Shift `λ̄ ≥ λ_max(D̄ + D̄ᵀ)`, clipped at zero.
    pub lambda_bar: f64,
    pub d_tilde: CVec,
    /// `λ N²β_max⁴ + v_tᴴ(λI − D)v_t`.
    pub c1: f64,
    /// `(λ̄/2)‖θ̄_t‖² − θ̄_tᵀD̄ᵀθ̄_t`.
    pub c2: f64,
    /// `v_tᴴ(λI − D)v_t` alone.
    pub c1_pre: f64,
}

impl QuarticMajorant {
    /// Majorant value at `theta`.
    pub fn value(&self, theta: &CVec) -> f64 {
        0.5 * self.lambda_bar * theta.norm_squared() + self.d_tilde.dotc(theta).re + self.c1 + self.c2
    }

    /// Bound before `‖v‖²` is replaced by its ceiling and before the real
    /// lift: `λ‖v‖² + Re{vᴴd} + v_tᴴ(λI − D)v_t`.
    pub fn pre_relaxation(&self, theta: &CVec) -> f64 {
        let v = kron_vec(theta, theta);
        self.lambda * v.norm_squared() + self.d.dotc(&v).re + self.c1_pre
    }
}

fn majorant_from_parts(lambda: f64, dv_t: CVec, vdv: f64, theta_t: &CVec, beta_max: f64) -> QuarticMajorant {
    let n = theta_t.len();
    let v_t = kron_vec(theta_t, theta_t);
    let d = (dv_t - &v_t * C64::from(lambda)) * C64::from(2.0);
    let d_ddot = CMat::from_column_slice(n, n, d.as_slice());
    let (re, im) = (d_ddot.map(|x| x.re), d_ddot.map(|x| x.im));
    let mut d_bar = RMat::zeros(2 * n, 2 * n);
    d_bar.view_mut((0, 0), (n, n)).copy_from(&re);
    d_bar.view_mut((0, n), (n, n)).copy_from(&im);
    d_bar.view_mut((n, 0), (n, n)).copy_from(&im);
    d_bar.view_mut((n, n), (n, n)).copy_from(&(-&re));
    let sym = &d_bar + d_bar.transpose();
    let lambda_bar = symmetric_max_eig(&sym).max(0.0);
    let theta_bar = RVec::from_fn(2 * n, |i, _| if i < n { theta_t[i].re } else { theta_t[i - n].im });
    let g = (&sym - RMat::identity(2 * n, 2 * n) * lambda_bar) * &theta_bar;
    let d_tilde = CVec::from_fn(n, |i, _| C64::new(g[i], g[i + n]));
    let c1_pre = lambda * v_t.norm_squared() - vdv;
    let ceiling = (n * n) as f64 * beta_max.powi(4);
    QuarticMajorant {
        lambda,
        c1: lambda * ceiling + c1_pre,
        c2: 0.5 * lambda_bar * theta_bar.norm_squared() - theta_bar.dot(&(d_bar.transpose() * &theta_bar)),
        d,
        d_ddot,
        d_bar,
        lambda_bar,
        d_tilde,
        c1_pre,
    }
}

/// Majorant of `vᴴDv` for a dense Hermitian `D`. `lambda` overrides the
/// eigenvalue extraction when a bound on `λ_max(D)` is already known.
pub fn mm_quartic_majorant(dmat: &CMat, theta_t: &CVec, beta_max: f64, lambda: Option<f64>) -> QuarticMajorant {
    let dmat = hermitian_part(dmat);
    let lambda = lambda.unwrap_or_else(|| crate::linalg::hermitian_max_eig(&dmat));
    let v_t = kron_vec(theta_t, theta_t);
    let dv = &dmat * &v_t;
    let vdv = v_t.dotc(&dv).re;
    majorant_from_parts(lambda, dv, vdv, theta_t, beta_max)
}

fn kron_majorant(form: &KronForm, theta_t: &CVec, beta_max: f64) -> QuarticMajorant {
    majorant_from_parts(
        form.max_eig(),
        form.apply_lifted(theta_t),
        form.lifted_form(theta_t),
        theta_t,
        beta_max,
    )
}

/// Cached quantities of the RIS subproblem at one iterate.
#[derive(Debug, Clone)]
pub struct RisExpansion {
    pub vars: DesignVariables,
    /// `g_ki = H̄_k w_i` for `i = 0..K`.
    pub g_ki: Vec<Vec<CVec>>,
    pub g_kz: Vec<CVec>,
    pub alpha: Vec<C64>,
    pub beta: Vec<f64>,
    pub alpha0: Vec<C64>,
    pub beta0: Vec<f64>,
    /// `Σ_{i≥1} g_ki g_kiᴴ + g_kz g_kzᴴ + B̄_k`.
    pub a_bar: Vec<CMat>,
    /// `Ā_k` plus the common column.
    pub a_bar0: Vec<CMat>,
    /// Diagonal of `B̄_k = σ_R² diag|h̄_k|²`.
    pub b_bar: Vec<RVec>,
    pub psi_e: Vec<CMat>,
    pub psi_0e: CMat,
    pub u_e: Vec<f64>,
    pub u_0e: f64,
    /// `θ_tᴴΨ̂Ψ̂ᴴθ_t`, so that `u = s/(1+s)`.
    pub s_e: Vec<f64>,
    pub s_0e: f64,
    pub mu_e: f64,
    pub c_k: Vec<CMat>,
    pub p_0e: CMat,
    pub gamma_e: CMat,
    /// `P = Ψ̂Ξ⁻¹Ψ̂ᴴθ_t` for each private stack and the common stack.
    pub p_vec_e: Vec<CVec>,
    pub p_vec_0e: CVec,
    /// Radar quartic `Γ_r B − A` and its factors.
    pub radar_a: KronForm,
    pub radar_b: KronForm,
    pub radar_d: KronForm,
    /// Diagonal of `C = σ_R² diag|Gu|²`.
    pub radar_c: RVec,
    pub c0: f64,
    pub radar_mm: QuarticMajorant,
    /// `λ_D` from the factors.
    pub lambda_d: f64,
    /// Quartic RIS power matrix `J̃`.
    pub power_j: KronForm,
    /// Diagonal of `G̃ = Σ diag|Gw_i|² + diag|Gz|² + 2σ_R² I`.
    pub power_g: RVec,
    pub power_mm: QuarticMajorant,
    pub lambda_j: f64,
    pub eps_4: Vec<f64>,
    pub eps_5: Vec<f64>,
    pub eps_bar_5: Vec<f64>,
    pub eps_13: Vec<f64>,
    pub eps_6: Vec<f64>,
    pub eps_7: Vec<f64>,
    pub eps_8: f64,
    pub eps_14: f64,
    pub d_e: Vec<CVec>,
    pub dmat_e: Vec<CMat>,
    pub upsilon_0e: Vec<CVec>,
    pub v_0e: Vec<CMat>,
}

/// `σ_E⁻¹[Ê | D̃_n G x columns]` for the given precoder columns.
fn psi_hat(eve: &EveMoment, g: &CMat, cols: &[CVec], with_e: bool, params: &PhysicalParams) -> CMat {
    let n = eve.n();
    let d_tilde: Vec<CVec> = (0..n).map(|i| eve.d_tilde(i)).collect();
    let width = if with_e { n * n } else { 0 } + n * cols.len();
    let mut out = CMat::zeros(n, width);
    let mut col = 0;
    if with_e {
        let sr = params.sigma2_ris.sqrt();
        for dt in &d_tilde {
            for m in 0..n {
                out[(m, col + m)] = dt[m] * sr;
            }
            col += n;
        }
    }
    for x in cols {
        let gx = g * x;
        for dt in &d_tilde {
            out.set_column(col, &dt.component_mul(&gx));
            col += 1;
        }
    }
    out / C64::from(params.sigma2_eve.sqrt())
}

/// `(s, u, ε, P)` for `Ξ = I + Ψ̂ᴴθθᴴΨ̂`, using the rank-one inverse;
/// `1/(1−u) = 1+s`.
fn xi_terms(psi: &CMat, theta: &CVec) -> (f64, f64, f64, CVec) {
    let m_theta = psi * psi.ad_mul(theta);
    let s = theta.dotc(&m_theta).re.max(0.0);
    (s, s / (1.0 + s), s / (1.0 + s).powi(2), m_theta / C64::from(1.0 + s))
}

/// Builds the RIS-side expansion at `vars`.
pub fn ris_expand(
    vars: &DesignVariables,
    channels: &ChannelSet,
    norm: &NormalizedChannels,
    eve: &EveMoment,
    params: &PhysicalParams,
) -> RisExpansion {
    let k_users = vars.k();
    let n = vars.theta.len();
    let theta = &vars.theta;
    let cols: Vec<CVec> = (0..=k_users).map(|i| vars.w.column(i).into_owned()).collect();

    let mut g_ki = Vec::with_capacity(k_users);
    let mut g_kz = Vec::with_capacity(k_users);
    let mut b_bar = Vec::with_capacity(k_users);
    let mut a_bar = Vec::with_capacity(k_users);
    let mut a_bar0 = Vec::with_capacity(k_users);
    let (mut alpha, mut beta, mut alpha0, mut beta0) = (vec![], vec![], vec![], vec![]);
    for k in 0..k_users {
        let h = &norm.hbar_k[k];
        let gs: Vec<CVec> = cols.iter().map(|w| h * w).collect();
        let gz = h * &vars.z;
        let bb = abs2(&norm.hbar_rk[k]) * params.sigma2_ris;
        let mut acc = diag_real(&bb) + &gz * gz.adjoint();
        for g in &gs[1..] {
            acc += g * g.adjoint();
        }
        let acc0 = &acc + &gs[0] * gs[0].adjoint();
        let amp: Vec<C64> = gs.iter().map(|g| theta.dotc(g)).collect();
        let noise = effective_noise(theta, &norm.hbar_rk[k], params.sigma2_ris);
        let private_total: f64 = amp[1..].iter().map(|a| a.norm_sqr()).sum();
        let an = theta.dotc(&gz).norm_sqr();
        alpha.push(amp[k + 1]);
        beta.push(private_total - amp[k + 1].norm_sqr() + an + noise);
        alpha0.push(amp[0]);
        beta0.push(private_total + an + noise);
        a_bar.push(hermitian_part(&acc));
        a_bar0.push(hermitian_part(&acc0));
        g_ki.push(gs);
        g_kz.push(gz);
        b_bar.push(bb);
    }

    let g = &norm.g;
    let psi_e: Vec<CMat> = (1..=k_users)
        .map(|kk| {
            let mut stack = cols.clone();
            stack[kk] = CVec::zeros(vars.w.nrows());
            stack.push(vars.z.clone());
            psi_hat(eve, g, &stack, true, params)
        })
        .collect();
    let mut common_cols: Vec<CVec> = cols[1..].to_vec();
    common_cols.push(vars.z.clone());
    let psi_0e = psi_hat(eve, g, &common_cols, true, params);
    let mut all_cols = cols.clone();
    all_cols.push(vars.z.clone());
    let psi_all = psi_hat(eve, g, &all_cols, true, params);
    let gamma_e = hermitian_part(&(&psi_all * psi_all.adjoint()));
    let mu_e = theta.dotc(&(&gamma_e * theta)).re;

    let (s_0e, u_0e, eps_8, p_vec_0e) = xi_terms(&psi_0e, theta);
    let p_0e = &p_vec_0e * p_vec_0e.adjoint();
    let eve_tail = 1.0 - (1.0 + mu_e).ln() - 1.0 / (1.0 + mu_e);
    let eps_14 = eve_tail + s_0e.ln_1p() - s_0e;

    let (mut u_e, mut s_e, mut eps_5, mut p_vec_e, mut c_k) = (vec![], vec![], vec![], vec![], vec![]);
    let (mut eps_4, mut eps_13, mut eps_bar_5, mut eps_6, mut eps_7) = (vec![], vec![], vec![], vec![], vec![]);
    let (mut d_e, mut dmat_e, mut upsilon_0e, mut v_0e) = (vec![], vec![], vec![], vec![]);
    let gamma_scaled = &gamma_e * C64::from(1.0 / (1.0 + mu_e));
    for k in 0..k_users {
        let (s, u, e5, pv) = xi_terms(&psi_e[k], theta);
        let ck = &pv * pv.adjoint();
        let (kappa, head) = rate_coefficients(alpha[k], beta[k]);
        let e4 = head - kappa;
        let e13 = eve_tail + s.ln_1p() - (u + e5) * (1.0 + s);
        d_e.push(&g_ki[k][k + 1] * (alpha[k].conj() / C64::from(beta[k])) + &pv * C64::from(1.0 + s));
        dmat_e.push(hermitian_part(
            &(&a_bar[k] * C64::from(kappa) + &ck * C64::from(1.0 + s) + &gamma_scaled),
        ));

        let (kappa0, head0) = rate_coefficients(alpha0[k], beta0[k]);
        let e6 = head0 - kappa0;
        upsilon_0e.push(
            &g_ki[k][0] * (alpha0[k].conj() / C64::from(beta0[k])) + &p_vec_0e * C64::from(1.0 + s_0e),
        );
        v_0e.push(hermitian_part(
            &(&a_bar0[k] * C64::from(kappa0) + &p_0e * C64::from(1.0 + s_0e) + &gamma_scaled),
        ));

        u_e.push(u);
        s_e.push(s);
        eps_5.push(e5);
        p_vec_e.push(pv);
        c_k.push(ck);
        eps_4.push(e4);
        eps_13.push(e13);
        eps_bar_5.push(e4 + e13);
        eps_6.push(e6);
        eps_7.push(e6 + eps_14);
    }

    // Radar and power quartics.
    let zeta2 = params.rcs;
    let s2 = params.sigma2_ris;
    let gt = channels.g.adjoint() * crate::linalg::diag(&channels.h_rt);
    let pi = &vars.w * vars.w.adjoint() + &vars.z * vars.z.adjoint();
    let p_conj = hermitian_part(&(gt.adjoint() * pi * &gt)).map(|x| x.conj());
    let kappa_t = gt.ad_mul(&vars.u);
    let k_mat = &kappa_t * kappa_t.adjoint();
    let h2 = abs2(&channels.h_rt);
    let radar_a = KronForm {
        left: &p_conj * C64::from(zeta2),
        right: k_mat.clone(),
    };
    let radar_b = KronForm {
        left: diag_real(&(&h2 * (zeta2 * s2))),
        right: k_mat.clone(),
    };
    let radar_d = KronForm {
        left: &radar_b.left * C64::from(params.gamma_r) - &radar_a.left,
        right: k_mat,
    };
    let lambda_d = radar_d.max_eig();
    let radar_mm = kron_majorant(&radar_d, theta, params.beta_max);
    let radar_c = abs2(&(&channels.g * &vars.u)) * s2;
    let c0 = params.gamma_r * params.sigma2_bs * vars.u.norm_squared();

    let power_j = KronForm {
        left: diag_real(&(&h2 * zeta2)),
        right: &p_conj + diag_real(&(&h2 * s2)),
    };
    let lambda_j = power_j.max_eig();
    let power_mm = kron_majorant(&power_j, theta, params.beta_max);
    let power_g = all_cols
        .iter()
        .map(|x| abs2(&(&channels.g * x)))
        .fold(RVec::from_element(n, 2.0 * s2), |acc, x| acc + x);

    RisExpansion {
        vars: vars.clone(),
        g_ki,
        g_kz,
        alpha,
        beta,
        alpha0,
        beta0,
        a_bar,
        a_bar0,
        b_bar,
        psi_e,
        psi_0e,
        u_e,
        u_0e,
        s_e,
        s_0e,
        mu_e,
        c_k,
        p_0e,
        gamma_e,
        p_vec_e,
        p_vec_0e,
        radar_a,
        radar_b,
        radar_d,
        radar_c,
        c0,
        radar_mm,
        lambda_d,
        power_j,
        power_g,
        power_mm,
        lambda_j,
        eps_4,
        eps_5,
        eps_bar_5,
        eps_13,
        eps_6,
        eps_7,
        eps_8,
        eps_14,
        d_e,
        dmat_e,
        upsilon_0e,
        v_0e,
    }
}

impl RisExpansion {
    /// User count.
    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    /// Element count.
    pub fn n(&self) -> usize {
        self.vars.theta.len()
    }

    /// Dense `Ξ_E,k⁻¹` (or `Ξ_0E⁻¹` for `None`), for inspection.
    pub fn xi_inverse(&self, k: Option<usize>) -> CMat {
        let psi = k.map_or(&self.psi_0e, |k| &self.psi_e[k]);
        let xi = CMat::identity(psi.ncols(), psi.ncols()) + {
            let x = psi.ad_mul(&self.vars.theta);
            &x * x.adjoint()
        };
        xi.cholesky().expect("Ξ is positive definite").inverse()
    }

    /// JSON summary of the scalar caches and the main matrices.
    pub fn to_json(&self) -> serde_json::Value {
        let pairs = |v: &[C64]| v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>();
        json!({
            "kind": "ris",
            "alpha": pairs(&self.alpha),
            "beta": self.beta,
            "alpha0": pairs(&self.alpha0),
            "beta0": self.beta0,
            "u_e": self.u_e,
            "u_0e": self.u_0e,
            "mu_e": self.mu_e,
            "eps_4": self.eps_4,
            "eps_5": self.eps_5,
            "eps_bar_5": self.eps_bar_5,
            "eps_13": self.eps_13,
            "eps_6": self.eps_6,
            "eps_7": self.eps_7,
            "eps_8": self.eps_8,
            "eps_14": self.eps_14,
            "lambda_d": self.lambda_d,
            "lambda_d_bar": self.radar_mm.lambda_bar,
            "lambda_j": self.lambda_j,
            "lambda_b_bar": self.power_mm.lambda_bar,
            "c0": self.c0,
            "c1r": self.radar_mm.c1,
            "c2r": self.radar_mm.c2,
            "c2": self.power_mm.c1,
            "c3": self.power_mm.c2,
            "d_tilde": cvec_json(&self.radar_mm.d_tilde),
            "b_tilde": cvec_json(&self.power_mm.d_tilde),
            "gamma_e": cmat_json(&self.gamma_e),
            "d_e": self.d_e.iter().map(cvec_json).collect::<Vec<_>>(),
            "upsilon_0e": self.upsilon_0e.iter().map(cvec_json).collect::<Vec<_>>(),
        })
    }
}

/// Private secrecy constraint of user `k` (0-based) in θ.
pub fn ris_epsr_constraint(exp: &RisExpansion, k: usize) -> QuadraticConstraint {
    let mut con = QuadraticConstraint::new(format!("ris_epsr_{}", k + 1), Sense::Ge);
    con.constant = exp.eps_bar_5[k];
    con.lin(Block::Theta, &exp.d_e[k] * C64::from(2.0));
    con.quad(vec![Block::Theta], -&exp.dmat_e[k]);
    con.scalars = vec![(Scalar::R(k), 1.0), (Scalar::Tau, -1.0)];
    con
}

/// Common secrecy constraints in θ, one per user.
pub fn ris_ecsr_constraint(exp: &RisExpansion) -> Vec<QuadraticConstraint> {
    (0..exp.k())
        .map(|k| {
            let mut con = QuadraticConstraint::new(format!("ris_ecsr_{}", k + 1), Sense::Ge);
            con.constant = exp.eps_7[k] - exp.eps_8 * (1.0 + exp.s_0e);
            con.lin(Block::Theta, &exp.upsilon_0e[k] * C64::from(2.0));
            con.quad(vec![Block::Theta], -&exp.v_0e[k]);
            con.scalars = (0..exp.k()).map(|j| (Scalar::R(j), -1.0)).collect();
            con
        })
        .collect()
}

/// Majorized radar SNR constraint, `≤ 0` form.
pub fn ris_radar_constraint(exp: &RisExpansion, params: &PhysicalParams) -> QuadraticConstraint {
    let mm = &exp.radar_mm;
    let n = exp.n();
    let mut con = QuadraticConstraint::new("ris_radar", Sense::Le);
    let c_tilde = diag_real(&(&exp.radar_c * params.gamma_r)) + CMat::identity(n, n) * C64::from(0.5 * mm.lambda_bar);
    con.quad(vec![Block::Theta], c_tilde);
    con.lin(Block::Theta, mm.d_tilde.clone());
    con.constant = exp.c0 + mm.c1 + mm.c2;
    con
}

/// Majorized RIS power budget, `≤ 0` form.
pub fn ris_budget_constraint(exp: &RisExpansion, params: &PhysicalParams) -> QuadraticConstraint {
    let mm = &exp.power_mm;
    let mut con = QuadraticConstraint::new("ris_power", Sense::Le);
    con.quad(vec![Block::Theta], diag_real(&exp.power_g.add_scalar(0.5 * mm.lambda_bar)));
    con.lin(Block::Theta, mm.d_tilde.clone());
    con.constant = mm.c1 + mm.c2 - params.p_ris;
    con
}

/// Per-element amplitude limits `|θ_n|² ≤ β_max²`.
pub fn ris_amplitude_constraints(n: usize, beta_max: f64) -> Vec<QuadraticConstraint> {
    (0..n)
        .map(|i| {
            let mut con = QuadraticConstraint::new(format!("amplitude_{}", i + 1), Sense::Le);
            let mut e = RVec::zeros(n);
            e[i] = 1.0;
            con.quad(vec![Block::Theta], diag_real(&e));
            con.constant = -beta_max * beta_max;
            con
        })
        .collect()
}

//! Convex surrogates of the secrecy, sensing and power constraints.
//!
//! Each subproblem works around an expansion point: the beamforming side
//! ([`bf`]) keeps the reflection vector fixed and the RIS side ([`ris`])
//! keeps the precoders fixed. Every emitted [`QuadraticConstraint`] is a
//! global minorant (for `≥` rows) or majorant (for `≤` rows) of the exact or
//! moment-approximated quantity, and is tight at the expansion point except
//! for the quartic relaxation noted in [`ris`]. All logarithms are natural.

pub mod bf;
pub mod ris;

use serde::Serialize;

use crate::linalg::{hermitian_min_eig, CMat, CVec, RVec, C64};
use crate::metrics::DesignVariables;

pub use bf::{
    bf_budget_constraints, bf_ecsr_constraint, bf_epsr_constraint, bf_expand, bf_radar_constraint,
    BfExpansion,
};
pub use ris::{
    mm_quartic_majorant, ris_amplitude_constraints, ris_budget_constraint, ris_ecsr_constraint, ris_epsr_constraint,
    ris_expand, ris_radar_constraint, KronForm, QuarticMajorant, RisExpansion,
};

/// Errors raised while building surrogate constraints.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SurrogateError {
    /// The RIS static noise power alone exceeds the RIS budget.
    #[error("RIS static power {static_power:.3e} W exceeds the budget {budget:.3e} W")]
    InfeasibleBudget { static_power: f64, budget: f64 },
}

/// A complex variable block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Block {
    /// Precoder column `w_i`, `i = 0` being the common stream.
    W(usize),
    /// Artificial noise.
    Z,
    /// Reflection vector.
    Theta,
}

/// A real scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Scalar {
    /// Common-rate share of user k (nats).
    R(usize),
    /// Epigraph variable of the max-min objective.
    Tau,
}

/// Direction of a constraint `lhs ≥ 0` or `lhs ≤ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Ge,
}

/// Hermitian form `xᴴ H x` over the concatenation of `blocks`.
#[derive(Debug, Clone)]
pub struct HermitianTerm {
    pub blocks: Vec<Block>,
    pub matrix: CMat,
}

/// `Re{cᴴ x}` on one block.
#[derive(Debug, Clone)]
pub struct LinearTerm {
    pub block: Block,
    pub coeff: CVec,
}

/// Quadratic constraint in the complex blocks and real scalars.
#[derive(Debug, Clone)]
pub struct QuadraticConstraint {
    pub name: String,
    pub sense: Sense,
    pub quadratic: Vec<HermitianTerm>,
    pub linear: Vec<LinearTerm>,
    pub scalars: Vec<(Scalar, f64)>,
    pub constant: f64,
}

/// Values for every block and scalar, used to evaluate constraints.
#[derive(Debug, Clone)]
pub struct VarPoint {
    pub w: CMat,
    pub z: CVec,
    pub theta: CVec,
    pub r: RVec,
    pub tau: f64,
}

impl VarPoint {
    /// Point built from design variables and an epigraph value.
    pub fn from_vars(vars: &DesignVariables, tau: f64) -> Self {
        Self {
            w: vars.w.clone(),
            z: vars.z.clone(),
            theta: vars.theta.clone(),
            r: vars.r.clone(),
            tau,
        }
    }

    /// Current value of a complex block.
    pub fn block(&self, block: Block) -> CVec {
        match block {
            Block::W(i) => self.w.column(i).into_owned(),
            Block::Z => self.z.clone(),
            Block::Theta => self.theta.clone(),
        }
    }

    /// Current value of a scalar.
    pub fn scalar(&self, scalar: Scalar) -> f64 {
        match scalar {
            Scalar::R(k) => self.r[k],
            Scalar::Tau => self.tau,
        }
    }

    /// Concatenated values of several blocks.
    pub fn stack(&self, blocks: &[Block]) -> CVec {
        let parts: Vec<CVec> = blocks.iter().map(|&b| self.block(b)).collect();
        let len = parts.iter().map(|p| p.len()).sum();
        let mut out = CVec::zeros(len);
        let mut offset = 0;
        for p in parts {
            out.rows_mut(offset, p.len()).copy_from(&p);
            offset += p.len();
        }
        out
    }
}

impl QuadraticConstraint {
    /// Empty constraint with the given sense.
    pub fn new(name: impl Into<String>, sense: Sense) -> Self {
        Self {
            name: name.into(),
            sense,
            quadratic: Vec::new(),
            linear: Vec::new(),
            scalars: Vec::new(),
            constant: 0.0,
        }
    }

    pub(crate) fn quad(&mut self, blocks: Vec<Block>, matrix: CMat) {
        self.quadratic.push(HermitianTerm {
            blocks,
            matrix: crate::linalg::hermitian_part(&matrix),
        });
    }

    pub(crate) fn lin(&mut self, block: Block, coeff: CVec) {
        self.linear.push(LinearTerm { block, coeff });
    }

    /// Splits a stacked coefficient into per-block linear terms.
    pub(crate) fn lin_stacked(&mut self, blocks: &[Block], coeff: &CVec, block_len: usize) {
        for (idx, &b) in blocks.iter().enumerate() {
            self.lin(b, coeff.rows(idx * block_len, block_len).into_owned());
        }
    }

    /// Left-hand side value.
    pub fn lhs(&self, point: &VarPoint) -> f64 {
        let quad: f64 = self
            .quadratic
            .iter()
            .map(|t| {
                let x = point.stack(&t.blocks);
                x.dotc(&(&t.matrix * &x)).re
            })
            .sum();
        let lin: f64 = self
            .linear
            .iter()
            .map(|t| t.coeff.dotc(&point.block(t.block)).re)
            .sum();
        let scal: f64 = self.scalars.iter().map(|&(s, c)| c * point.scalar(s)).sum();
        quad + lin + scal + self.constant
    }

    /// Amount by which the point violates the constraint (zero if satisfied).
    pub fn violation(&self, point: &VarPoint) -> f64 {
        let v = self.lhs(point);
        match self.sense {
            Sense::Le => v.max(0.0),
            Sense::Ge => (-v).max(0.0),
        }
    }

    /// Every quadratic term has the curvature its sense requires, up to `tol`
    /// relative to the term's scale.
    pub fn is_convex(&self, tol: f64) -> bool {
        self.quadratic.iter().all(|t| {
            let scale = t.matrix.iter().map(|x| x.norm()).fold(0.0, f64::max);
            if scale == 0.0 {
                return true;
            }
            let signed = match self.sense {
                Sense::Le => t.matrix.clone(),
                Sense::Ge => -t.matrix.clone(),
            };
            hermitian_min_eig(&signed) >= -tol * scale
        })
    }

    /// Blocks referenced by the constraint.
    pub fn blocks(&self) -> Vec<Block> {
        let mut out: Vec<Block> = self
            .quadratic
            .iter()
            .flat_map(|t| t.blocks.iter().copied())
            .chain(self.linear.iter().map(|t| t.block))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Tangent upper bound of the logarithm: `ln x ≤ ln x_t + x/x_t − 1`.
pub fn log_tangent_bound(x: f64, x_t: f64) -> f64 {
    x_t.ln() + x / x_t - 1.0
}

/// Linear minorant of a PSD form: `wᴴHw ≥ 2Re{w_tᴴHw} − w_tᴴHw_t`.
pub fn quadratic_minorant(h: &CMat, w: &CVec, w_t: &CVec) -> f64 {
    let hw_t = h * w_t;
    2.0 * hw_t.dotc(w).re - w_t.dotc(&hw_t).re
}

/// `Tr(A C B⁻¹ Cᴴ)` for Hermitian PSD `A` and Hermitian PD `B`.
pub fn matrix_fractional(a: &CMat, c: &CMat, b: &CMat) -> f64 {
    let b_inv = b.clone().try_inverse().expect("B is invertible");
    (a * c * b_inv * c.adjoint()).trace().re
}

/// First-order expansion of [`matrix_fractional`] at `(C_t, B_t)`; a global
/// minorant by joint convexity.
pub fn matrix_fractional_linearization(a: &CMat, c: &CMat, b: &CMat, c_t: &CMat, b_t: &CMat) -> f64 {
    let bt_inv = b_t.clone().try_inverse().expect("B_t is invertible");
    let lin = 2.0 * (a * c_t * &bt_inv * c.adjoint()).trace().re;
    let curv = (a * c_t * &bt_inv * b * &bt_inv * c_t.adjoint()).trace().re;
    lin - curv
}

/// Minorant of `ln(1+|α|²/β)` in `(α, β)` tight at `(α_t, β_t)`.
pub fn rate_minorant(alpha: C64, beta: f64, alpha_t: C64, beta_t: f64) -> f64 {
    let a2 = alpha_t.norm_sqr();
    (a2 / beta_t).ln_1p() - a2 / beta_t + 2.0 * (alpha_t.conj() * alpha).re / beta_t
        - a2 * (beta + alpha.norm_sqr()) / (beta_t * (beta_t + a2))
}

/// `(1/(β(β+|α|²)), ln(1+|α|²/β) − |α|²/β)` shared by the rate surrogates.
pub(crate) fn rate_coefficients(alpha: C64, beta: f64) -> (f64, f64) {
    let a2 = alpha.norm_sqr();
    let kappa = a2 / (beta * (beta + a2));
    (kappa, (a2 / beta).ln_1p() - a2 / beta)
}

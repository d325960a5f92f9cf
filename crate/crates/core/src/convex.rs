//! Assembly and solution of the two convex subproblems, plus the closed-form
//! radar receive filter.
//!
//! Complex blocks are lifted to real vectors block by block, real parts
//! stacked above imaginary parts. A program is `min cᵀx` subject to rows
//! `xᵀPx + qᵀx + c₀ ≤ 0` with `P` PSD; `≥` surrogates are negated on entry
//! and each row is scaled by its largest coefficient. Rows are solved as
//! smooth convex quadratics by a primal-dual interior-point method, with a
//! Phase I search when the start is not strictly feasible.
//!
//! The `--dump-program` text format is line based:
//!
//! ```text
//! secopt-program 1
//! dim <n> rows <m>
//! var <index> <block> <part> <entry>
//! obj <index> <value>
//! row <r> <name> <constant>
//! q <r> <index> <value>
//! P <r> <i> <j> <value>          (upper triangle, i ≤ j)
//! ```
//!
//! Row `r` reads `Σ_{i≤j} P_ij x_i x_j (doubled off the diagonal) + Σ q_i x_i + constant ≤ 0`.

use std::fmt::Write as _;

use nalgebra::SymmetricEigen;
use thiserror::Error;

use crate::channels::ChannelSet;
use crate::config::PhysicalParams;
use crate::linalg::{hermitian_part, CMat, CVec, RMat, RVec, C64};
use crate::metrics::{radar_matrices, DesignVariables};
use crate::surrogates::{
    bf_budget_constraints, bf_ecsr_constraint, bf_epsr_constraint, bf_radar_constraint, ris_amplitude_constraints,
    ris_budget_constraint, ris_ecsr_constraint, ris_epsr_constraint, ris_radar_constraint, BfExpansion, Block,
    QuadraticConstraint, RisExpansion, Scalar, Sense, SurrogateError,
};

/// Assembly failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvexError {
    #[error("constraint {name} is not convex (min eigenvalue {min_eig:.3e})")]
    NonConvex { name: String, min_eig: f64 },
    #[error(transparent)]
    Budget(#[from] SurrogateError),
}

/// Solver outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    Infeasible,
    NumericalFailure,
}

/// Interior-point tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            opt_tol: 1e-7,
            max_iters: 100,
        }
    }
}

/// Which optional parts of a subproblem are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProgramSettings {
    /// A common stream and rate split exist.
    pub rsma: bool,
    /// The RIS power budget applies (active surface).
    pub ris_power: bool,
    /// Emit the radar SNR constraint.
    pub radar: bool,
}

impl Default for ProgramSettings {
    fn default() -> Self {
        Self {
            rsma: true,
            ris_power: true,
            radar: true,
        }
    }
}

/// Placement of the free complex blocks and scalars in the real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    /// `(block, offset, complex length)`; the real part occupies
    /// `offset..offset+len` and the imaginary part the next `len` slots.
    pub blocks: Vec<(Block, usize, usize)>,
    pub scalars: Vec<(Scalar, usize)>,
    /// Blocks pinned to zero.
    pub zero_blocks: Vec<Block>,
    pub dim: usize,
}

impl Layout {
    fn new(blocks: &[(Block, usize)], scalars: &[Scalar], zero_blocks: Vec<Block>) -> Self {
        let mut offset = 0;
        let mut placed = Vec::new();
        for &(b, len) in blocks {
            placed.push((b, offset, len));
            offset += 2 * len;
        }
        let mut sc = Vec::new();
        for &s in scalars {
            sc.push((s, offset));
            offset += 1;
        }
        Self {
            blocks: placed,
            scalars: sc,
            zero_blocks,
            dim: offset,
        }
    }

    fn block(&self, b: Block) -> Option<(usize, usize)> {
        self.blocks.iter().find(|e| e.0 == b).map(|e| (e.1, e.2))
    }

    /// Real index of a scalar.
    pub fn scalar(&self, s: Scalar) -> Option<usize> {
        self.scalars.iter().find(|e| e.0 == s).map(|e| e.1)
    }

    /// Packs the free parts of `vars` and `tau`.
    pub fn pack(&self, vars: &DesignVariables, tau: f64) -> RVec {
        let mut x = RVec::zeros(self.dim);
        for &(b, off, len) in &self.blocks {
            let v = block_value(vars, b);
            for i in 0..len {
                x[off + i] = v[i].re;
                x[off + len + i] = v[i].im;
            }
        }
        for &(s, idx) in &self.scalars {
            x[idx] = match s {
                Scalar::R(k) => vars.r[k],
                Scalar::Tau => tau,
            };
        }
        x
    }

    /// Writes `x` back into a copy of `template`; pinned blocks become zero.
    /// Returns the variables and τ.
    pub fn unpack(&self, x: &RVec, template: &DesignVariables) -> (DesignVariables, f64) {
        let mut vars = template.clone();
        for &b in &self.zero_blocks {
            set_block(&mut vars, b, &CVec::zeros(block_value(template, b).len()));
        }
        for &(b, off, len) in &self.blocks {
            let v = CVec::from_fn(len, |i, _| C64::new(x[off + i], x[off + len + i]));
            set_block(&mut vars, b, &v);
        }
        let mut tau = f64::NAN;
        for &(s, idx) in &self.scalars {
            match s {
                Scalar::R(k) => vars.r[k] = x[idx],
                Scalar::Tau => tau = x[idx],
            }
        }
        (vars, tau)
    }
}

fn block_value(vars: &DesignVariables, b: Block) -> CVec {
    match b {
        Block::W(i) => vars.w.column(i).into_owned(),
        Block::Z => vars.z.clone(),
        Block::Theta => vars.theta.clone(),
    }
}

fn set_block(vars: &mut DesignVariables, b: Block, v: &CVec) {
    match b {
        Block::W(i) => vars.w.set_column(i, v),
        Block::Z => vars.z = v.clone(),
        Block::Theta => vars.theta = v.clone(),
    }
}

/// One real row `xᵀPx + qᵀx + c ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealRow {
    pub name: String,
    pub p: RMat,
    pub q: RVec,
    pub c: f64,
    /// Factor the original row was divided by.
    pub scale: f64,
}

impl RealRow {
    pub fn value(&self, x: &RVec) -> f64 {
        x.dot(&(&self.p * x)) + self.q.dot(x) + self.c
    }

    fn gradient(&self, x: &RVec) -> RVec {
        &self.p * x * 2.0 + &self.q
    }
}

/// Convex program `max τ` over the lifted variables.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    pub layout: Layout,
    /// Minimized objective `cᵀx` (the negated τ selector).
    pub objective: RVec,
    pub rows: Vec<RealRow>,
    /// The surrogates the rows came from, in row order (bounds on `r`
    /// have no entry).
    pub sources: Vec<QuadraticConstraint>,
    /// Starting point (the expansion point with a feasible τ).
    pub start: RVec,
    pub template: DesignVariables,
}

/// Solver result.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: RVec,
    /// Optimal τ.
    pub objective: f64,
    pub status: SolveStatus,
    /// Largest row value over the scaled rows, clipped at zero.
    pub max_violation: f64,
    pub iterations: usize,
}

/// Lifts one surrogate onto the layout.
fn lift_constraint(con: &QuadraticConstraint, layout: &Layout) -> RealRow {
    let dim = layout.dim;
    let mut p = RMat::zeros(dim, dim);
    let mut q = RVec::zeros(dim);
    let sign = if con.sense == Sense::Ge { -1.0 } else { 1.0 };
    for term in &con.quadratic {
        // Real index pairs for every complex entry of the concatenation.
        let mut map: Vec<Option<(usize, usize)>> = Vec::new();
        for &b in &term.blocks {
            match layout.block(b) {
                Some((off, len)) => map.extend((0..len).map(|i| Some((off + i, off + len + i)))),
                // Pinned blocks share the length of the other blocks in the term.
                None => map.extend(std::iter::repeat_n(None, term.matrix.nrows() / term.blocks.len())),
            }
        }
        let h = &term.matrix;
        for a in 0..map.len() {
            let Some((ar, ai)) = map[a] else { continue };
            for b in 0..map.len() {
                let Some((br, bi)) = map[b] else { continue };
                let (hr, hi) = (sign * h[(a, b)].re, sign * h[(a, b)].im);
                p[(ar, br)] += hr;
                p[(ai, bi)] += hr;
                p[(ar, bi)] -= hi;
                p[(ai, br)] += hi;
            }
        }
    }
    for term in &con.linear {
        if let Some((off, len)) = layout.block(term.block) {
            for i in 0..len {
                q[off + i] += sign * term.coeff[i].re;
                q[off + len + i] += sign * term.coeff[i].im;
            }
        }
    }
    for &(s, coef) in &con.scalars {
        if let Some(idx) = layout.scalar(s) {
            q[idx] += sign * coef;
        }
    }
    let p = (&p + p.transpose()) * 0.5;
    RealRow {
        name: con.name.clone(),
        p,
        q,
        c: sign * con.constant,
        scale: 1.0,
    }
}

fn normalize_row(mut row: RealRow) -> RealRow {
    let scale = row
        .p
        .iter()
        .chain(row.q.iter())
        .map(|v| v.abs())
        .fold(row.c.abs(), f64::max);
    if scale > 0.0 && scale.is_finite() {
        row.p /= scale;
        row.q /= scale;
        row.c /= scale;
        row.scale = scale;
    }
    row
}

fn check_convex(row: &RealRow) -> Result<RealRow, ConvexError> {
    let eig = SymmetricEigen::new(row.p.clone()).eigenvalues;
    let min_eig = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < -1e-8 {
        return Err(ConvexError::NonConvex {
            name: row.name.clone(),
            min_eig,
        });
    }
    let mut row = row.clone();
    if min_eig < 0.0 {
        for i in 0..row.p.nrows() {
            row.p[(i, i)] -= min_eig;
        }
    }
    Ok(row)
}

fn build_program(
    sources: Vec<QuadraticConstraint>,
    layout: Layout,
    template: &DesignVariables,
    tau_rows: usize,
) -> Result<ConvexProgram, ConvexError> {
    let mut rows = Vec::with_capacity(sources.len() + template.k());
    for con in &sources {
        rows.push(check_convex(&normalize_row(lift_constraint(con, &layout)))?);
    }
    for &(s, idx) in &layout.scalars {
        if let Scalar::R(k) = s {
            let mut q = RVec::zeros(layout.dim);
            q[idx] = -1.0;
            rows.push(RealRow {
                name: format!("r_nonneg_{}", k + 1),
                p: RMat::zeros(layout.dim, layout.dim),
                q,
                c: 0.0,
                scale: 1.0,
            });
        }
    }
    let tau_idx = layout.scalar(Scalar::Tau).expect("τ is always free");
    let mut objective = RVec::zeros(layout.dim);
    objective[tau_idx] = -1.0;

    // τ just below the tightest secrecy row at the expansion point.
    let mut start = layout.pack(template, 0.0);
    let tau0 = rows[..tau_rows]
        .iter()
        .map(|row| -row.value(&start) / row.q[tau_idx])
        .fold(f64::INFINITY, f64::min);
    let tau0 = if tau0.is_finite() { tau0 - 1e-3 * (1.0 + tau0.abs()) } else { 0.0 };
    start[tau_idx] = tau0;
    Ok(ConvexProgram {
        layout,
        objective,
        rows,
        sources,
        start,
        template: template.clone(),
    })
}

/// Beamforming subproblem in `(W, z, r, τ)`.
///
/// # Errors
///
/// [`ConvexError::Budget`] when the RIS static power exceeds the budget;
/// [`ConvexError::NonConvex`] if a lifted row fails the curvature check.
pub fn assemble_bf_program(
    exp: &BfExpansion,
    channels: &ChannelSet,
    params: &PhysicalParams,
    settings: ProgramSettings,
) -> Result<ConvexProgram, ConvexError> {
    let k = exp.k();
    let m = exp.m();
    let first = if settings.rsma { 0 } else { 1 };
    let mut blocks: Vec<(Block, usize)> = (first..=k).map(|i| (Block::W(i), m)).collect();
    blocks.push((Block::Z, m));
    let mut scalars: Vec<Scalar> = if settings.rsma { (0..k).map(Scalar::R).collect() } else { vec![] };
    scalars.push(Scalar::Tau);
    let zero_blocks = if settings.rsma { vec![] } else { vec![Block::W(0)] };
    let layout = Layout::new(&blocks, &scalars, zero_blocks);

    let mut sources: Vec<QuadraticConstraint> = (0..k).map(|kk| bf_epsr_constraint(exp, kk)).collect();
    if settings.rsma {
        sources.extend(bf_ecsr_constraint(exp));
    }
    if settings.radar {
        sources.push(bf_radar_constraint(exp, channels, params));
    }
    let [bs, ris] = if settings.ris_power {
        bf_budget_constraints(exp, channels, params)?
    } else {
        let mut p = params.clone();
        p.p_ris = f64::INFINITY;
        bf_budget_constraints(exp, channels, &p)?
    };
    sources.push(bs);
    if settings.ris_power {
        sources.push(ris);
    }
    let mut template = exp.vars.clone();
    if !settings.rsma {
        template.w.column_mut(0).fill(C64::from(0.0));
        template.r.fill(0.0);
    }
    build_program(sources, layout, &template, k)
}

/// RIS subproblem in `(θ, r, τ)`.
///
/// # Errors
///
/// [`ConvexError::NonConvex`] if a lifted row fails the curvature check.
pub fn assemble_ris_program(
    exp: &RisExpansion,
    params: &PhysicalParams,
    settings: ProgramSettings,
) -> Result<ConvexProgram, ConvexError> {
    let k = exp.k();
    let n = exp.n();
    let pinned = params.beta_max <= 0.0;
    let blocks: Vec<(Block, usize)> = if pinned { vec![] } else { vec![(Block::Theta, n)] };
    let mut scalars: Vec<Scalar> = if settings.rsma { (0..k).map(Scalar::R).collect() } else { vec![] };
    scalars.push(Scalar::Tau);
    let zero_blocks = if pinned { vec![Block::Theta] } else { vec![] };
    let layout = Layout::new(&blocks, &scalars, zero_blocks);

    let mut sources: Vec<QuadraticConstraint> = (0..k).map(|kk| ris_epsr_constraint(exp, kk)).collect();
    if settings.rsma {
        sources.extend(ris_ecsr_constraint(exp));
    }
    if settings.radar && !pinned {
        sources.push(ris_radar_constraint(exp, params));
    }
    if settings.ris_power && !pinned {
        sources.push(ris_budget_constraint(exp, params));
    }
    if !pinned {
        sources.extend(ris_amplitude_constraints(n, params.beta_max));
    }
    let mut template = exp.vars.clone();
    if pinned {
        template.theta.fill(C64::from(0.0));
    }
    if !settings.rsma {
        template.r.fill(0.0);
    }
    build_program(sources, layout, &template, k)
}

impl ConvexProgram {
    /// Largest scaled row value at `x`, clipped at zero.
    pub fn violation(&self, x: &RVec) -> f64 {
        self.rows.iter().map(|r| r.value(x)).fold(0.0, f64::max)
    }

    /// Decodes a solution into design variables and τ.
    pub fn unpack(&self, x: &RVec) -> (DesignVariables, f64) {
        self.layout.unpack(x, &self.template)
    }

    /// Sparse triplet text dump (format in the module docs).
    pub fn to_triplets(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "secopt-program 1");
        let _ = writeln!(out, "dim {} rows {}", self.layout.dim, self.rows.len());
        for &(b, off, len) in &self.layout.blocks {
            for i in 0..len {
                let _ = writeln!(out, "var {} {:?} re {}", off + i, b, i);
                let _ = writeln!(out, "var {} {:?} im {}", off + len + i, b, i);
            }
        }
        for &(s, idx) in &self.layout.scalars {
            let _ = writeln!(out, "var {idx} {s:?} re 0");
        }
        for (i, v) in self.objective.iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(out, "obj {i} {v:e}");
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            let _ = writeln!(out, "row {r} {} {:e}", row.name, row.c);
            for (i, v) in row.q.iter().enumerate() {
                if *v != 0.0 {
                    let _ = writeln!(out, "q {r} {i} {v:e}");
                }
            }
            for i in 0..row.p.nrows() {
                for j in i..row.p.ncols() {
                    let v = row.p[(i, j)];
                    if v != 0.0 {
                        let _ = writeln!(out, "P {r} {i} {j} {v:e}");
                    }
                }
            }
        }
        out
    }
}

/// Primal-dual interior-point iterations from a strictly feasible `x0`.
/// `stop_early` ends the run as soon as it returns true for an iterate.
fn primal_dual(
    c: &RVec,
    rows: &[RealRow],
    x0: RVec,
    opts: &SolverOptions,
    stop_early: &dyn Fn(&RVec) -> bool,
) -> (RVec, SolveStatus, usize) {
    const MU: f64 = 10.0;
    const ALPHA: f64 = 0.01;
    const BETA: f64 = 0.5;
    let m = rows.len();
    let n = c.len();
    let mut x = x0;
    let eval = |x: &RVec| -> RVec { RVec::from_iterator(m, rows.iter().map(|r| r.value(x))) };
    let mut f = eval(&x);
    let mut lambda = f.map(|fi| -1.0 / fi);
    for iter in 0..opts.max_iters {
        if stop_early(&x) {
            return (x, SolveStatus::Optimal, iter);
        }
        let grads: Vec<RVec> = rows.iter().map(|r| r.gradient(&x)).collect();
        let eta = -f.dot(&lambda);
        let t = MU * m as f64 / eta;
        let residual = |x: &RVec, lambda: &RVec, f: &RVec, grads: &[RVec]| -> (RVec, RVec) {
            let mut r_dual = c.clone();
            for (i, g) in grads.iter().enumerate() {
                r_dual += g * lambda[i];
            }
            let r_cent = RVec::from_fn(m, |i, _| -lambda[i] * f[i] - 1.0 / t);
            let _ = x;
            (r_dual, r_cent)
        };
        let (r_dual, r_cent) = residual(&x, &lambda, &f, &grads);
        if r_dual.norm() <= opts.feas_tol && eta <= opts.opt_tol {
            return (x, SolveStatus::Optimal, iter);
        }
        let mut h = RMat::zeros(n, n);
        let mut rhs = -&r_dual;
        for (i, row) in rows.iter().enumerate() {
            h += &row.p * (2.0 * lambda[i]);
            h += (&grads[i] * grads[i].transpose()) * (lambda[i] / -f[i]);
            rhs -= &grads[i] * (r_cent[i] / f[i]);
        }
        let Some(dx) = solve_spd(&h, &rhs) else {
            return (x, SolveStatus::NumericalFailure, iter);
        };
        let dlambda = RVec::from_fn(m, |i, _| (r_cent[i] - lambda[i] * grads[i].dot(&dx)) / f[i]);
        let mut s_max: f64 = 1.0;
        for i in 0..m {
            if dlambda[i] < 0.0 {
                s_max = s_max.min(-lambda[i] / dlambda[i]);
            }
        }
        let mut s = 0.99 * s_max;
        let norm0 = (r_dual.norm_squared() + r_cent.norm_squared()).sqrt();
        let mut accepted = false;
        while s > 1e-14 {
            let xn = &x + &dx * s;
            let fn_ = eval(&xn);
            if fn_.iter().all(|&v| v < 0.0) {
                let ln = &lambda + &dlambda * s;
                let gn: Vec<RVec> = rows.iter().map(|r| r.gradient(&xn)).collect();
                let (rd, rc) = residual(&xn, &ln, &fn_, &gn);
                if (rd.norm_squared() + rc.norm_squared()).sqrt() <= (1.0 - ALPHA * s) * norm0 {
                    x = xn;
                    f = fn_;
                    lambda = ln;
                    accepted = true;
                    break;
                }
            }
            s *= BETA;
        }
        if !accepted {
            let status = if r_dual.norm() <= 1e3 * opts.feas_tol && eta <= 1e3 * opts.opt_tol {
                SolveStatus::Optimal
            } else {
                SolveStatus::NumericalFailure
            };
            return (x, status, iter);
        }
    }
    (x, SolveStatus::MaxIterations, opts.max_iters)
}

fn solve_spd(h: &RMat, rhs: &RVec) -> Option<RVec> {
    if let Some(ch) = h.clone().cholesky() {
        let x = ch.solve(rhs);
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let scale = h.diagonal().iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let ridged = h + RMat::identity(h.nrows(), h.ncols()) * (1e-12 * scale);
    ridged.lu().solve(rhs).filter(|x| x.iter().all(|v| v.is_finite()))
}

/// Finds a strictly feasible point by minimizing the largest row value.
fn phase_one(rows: &[RealRow], x0: &RVec, opts: &SolverOptions) -> Option<RVec> {
    let n = x0.len();
    let worst = rows.iter().map(|r| r.value(x0)).fold(f64::NEG_INFINITY, f64::max);
    if worst < -1e-3 {
        return Some(x0.clone());
    }
    let mut aug: Vec<RealRow> = rows
        .iter()
        .map(|r| {
            let mut p = RMat::zeros(n + 1, n + 1);
            p.view_mut((0, 0), (n, n)).copy_from(&r.p);
            let mut q = RVec::zeros(n + 1);
            q.rows_mut(0, n).copy_from(&r.q);
            q[n] = -1.0;
            RealRow {
                name: r.name.clone(),
                p,
                q,
                c: r.c,
                scale: r.scale,
            }
        })
        .collect();
    let mut floor = RVec::zeros(n + 1);
    floor[n] = -1.0;
    aug.push(RealRow {
        name: "phase_one_floor".into(),
        p: RMat::zeros(n + 1, n + 1),
        q: floor,
        c: -1.0,
        scale: 1.0,
    });
    let mut c = RVec::zeros(n + 1);
    c[n] = 1.0;
    let mut start = RVec::zeros(n + 1);
    start.rows_mut(0, n).copy_from(x0);
    start[n] = worst + 1.0;
    let strict = |z: &RVec| z[n] < -1e-3;
    let (z, _, _) = primal_dual(&c, &aug, start, opts, &strict);
    let x = z.rows(0, n).into_owned();
    rows.iter().all(|r| r.value(&x) < 0.0).then_some(x)
}

/// Solves the program; the start point is used when strictly feasible,
/// otherwise a Phase I search runs first.
pub fn solve_program(prog: &ConvexProgram, opts: &SolverOptions) -> Solution {
    let tau_idx = prog.layout.scalar(Scalar::Tau).expect("τ is always free");
    let Some(x0) = phase_one(&prog.rows, &prog.start, opts) else {
        return Solution {
            max_violation: prog.violation(&prog.start),
            objective: prog.start[tau_idx],
            x: prog.start.clone(),
            status: SolveStatus::Infeasible,
            iterations: 0,
        };
    };
    let (x, status, iterations) = primal_dual(&prog.objective, &prog.rows, x0, opts, &|_| false);
    Solution {
        max_violation: prog.violation(&x),
        objective: x[tau_idx],
        x,
        status,
        iterations,
    }
}

/// Radar receive filter maximizing the output SNR for the current design.
/// Returns the unit filter and the attained SNR.
pub fn radar_receiver(vars: &DesignVariables, channels: &ChannelSet, params: &PhysicalParams) -> (CVec, f64) {
    let mats = radar_matrices(&vars.theta, channels);
    let m = vars.w.nrows();
    let pi = &vars.w * vars.w.adjoint() + &vars.z * vars.z.adjoint();
    let h_t = hermitian_part(&(&mats.h_t * pi * mats.h_t.adjoint() * C64::from(params.rcs)));
    let h_0 = hermitian_part(
        &(&mats.h_0 * mats.h_0.adjoint() * C64::from(params.rcs * params.sigma2_ris)
            + &mats.h_1 * mats.h_1.adjoint() * C64::from(params.sigma2_ris)
            + CMat::identity(m, m) * C64::from(params.sigma2_bs)),
    );
    generalized_top_eigen(&h_t, &h_0)
}

/// Top eigenpair of `B⁻¹A` for Hermitian `A` and Hermitian PD `B`.
pub fn generalized_top_eigen(a: &CMat, b: &CMat) -> (CVec, f64) {
    let l = b.clone().cholesky().expect("B is positive definite").unpack();
    let l_inv = l.clone().try_inverse().expect("Cholesky factor is invertible");
    let reduced = &l_inv * a * l_inv.adjoint();
    let (vals, vecs) = crate::linalg::hermitian_eigen(&reduced);
    let top = vals.len() - 1;
    let u = l_inv.adjoint() * vecs.column(top);
    let u = &u / C64::from(u.norm());
    (u, vals[top])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{eve_second_moment, normalize, sample_scene};
    use crate::config::{to_linear, SystemConfig};
    use crate::metrics::radar_snr;
    use crate::metrics::tests::{random_cvec, random_vars};
    use crate::surrogates::{bf_expand, ris_expand, VarPoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn program(rows: Vec<RealRow>, dim: usize, tau_idx: usize, start: RVec) -> ConvexProgram {
        let mut objective = RVec::zeros(dim);
        objective[tau_idx] = -1.0;
        let layout = Layout {
            blocks: vec![],
            scalars: vec![(Scalar::Tau, tau_idx)],
            zero_blocks: vec![],
            dim,
        };
        ConvexProgram {
            layout,
            objective,
            rows,
            sources: vec![],
            start,
            template: DesignVariables {
                w: CMat::zeros(1, 1),
                z: CVec::zeros(1),
                theta: CVec::zeros(1),
                u: CVec::zeros(1),
                r: RVec::zeros(0),
            },
        }
    }

    fn row(p: RMat, q: RVec, c: f64) -> RealRow {
        RealRow {
            name: "row".into(),
            p,
            q,
            c,
            scale: 1.0,
        }
    }

    #[test]
    fn one_dimensional_lp() {
        let r = row(RMat::zeros(1, 1), RVec::from_element(1, 1.0), -3.0);
        let prog = program(vec![r], 1, 0, RVec::from_element(1, 10.0));
        let sol = solve_program(&prog, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_cap() {
        let mut p = RMat::zeros(2, 2);
        p[(0, 0)] = 1.0;
        let r = row(p, RVec::from_vec(vec![0.0, 1.0]), -1.0);
        let prog = program(vec![r], 2, 1, RVec::from_vec(vec![0.7, 0.0]));
        let sol = solve_program(&prog, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-6);
        assert!(sol.x[0].abs() < 1e-3);
    }

    #[test]
    fn infeasible_rows_are_reported() {
        let a = row(RMat::zeros(1, 1), RVec::from_element(1, 0.0), 1.0);
        let prog = program(vec![a], 1, 0, RVec::from_element(1, 0.0));
        assert_eq!(solve_program(&prog, &SolverOptions::default()).status, SolveStatus::Infeasible);
    }

    /// `max_x min_i g_i(x)` over a disk by successive grid refinement.
    fn grid_oracle(rows: &[(RMat, RVec, f64)], radius: f64) -> f64 {
        let value = |x: f64, y: f64| {
            if x * x + y * y > radius * radius {
                return f64::NEG_INFINITY;
            }
            let v = RVec::from_vec(vec![x, y]);
            rows.iter()
                .map(|(p, q, c)| -(v.dot(&(p * &v)) + q.dot(&v) + c))
                .fold(f64::INFINITY, f64::min)
        };
        let (mut cx, mut cy, mut half) = (0.0, 0.0, radius);
        let mut best = f64::NEG_INFINITY;
        for _ in 0..40 {
            let steps = 40;
            let (mut bx, mut by) = (cx, cy);
            for i in 0..=steps {
                for j in 0..=steps {
                    let x = cx - half + 2.0 * half * i as f64 / steps as f64;
                    let y = cy - half + 2.0 * half * j as f64 / steps as f64;
                    let v = value(x, y);
                    if v > best {
                        best = v;
                        bx = x;
                        by = y;
                    }
                }
            }
            cx = bx;
            cy = by;
            half *= 0.7;
        }
        best
    }

    #[test]
    fn qcqp_matches_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let mut specs = Vec::new();
            let mut rows = Vec::new();
            for _ in 0..3 {
                let a = RMat::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
                let p = &a * a.transpose() + RMat::identity(2, 2) * 0.1;
                let q = RVec::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
                let c = rng.random_range(-1.0..0.0);
                let mut pp = RMat::zeros(3, 3);
                pp.view_mut((0, 0), (2, 2)).copy_from(&p);
                let mut qq = RVec::zeros(3);
                qq.rows_mut(0, 2).copy_from(&q);
                qq[2] = 1.0;
                rows.push(row(pp, qq, c));
                specs.push((p, q, c));
            }
            let mut disk = RMat::zeros(3, 3);
            disk[(0, 0)] = 1.0;
            disk[(1, 1)] = 1.0;
            rows.push(row(disk, RVec::zeros(3), -4.0));
            let prog = program(rows, 3, 2, RVec::from_vec(vec![0.0, 0.0, -10.0]));
            let sol = solve_program(&prog, &SolverOptions::default());
            assert_eq!(sol.status, SolveStatus::Optimal);
            let oracle = grid_oracle(&specs, 2.0);
            assert!((sol.objective - oracle).abs() <= 1e-4 * oracle.abs().max(1.0), "{} {}", sol.objective, oracle);
            let reeval = prog.rows.iter().map(|r| r.value(&sol.x)).fold(0.0, f64::max);
            assert!((reeval - sol.max_violation).abs() < 1e-9);
        }
    }

    #[test]
    fn objective_scaling_keeps_argmax() {
        let mut p = RMat::zeros(2, 2);
        p[(0, 0)] = 1.0;
        let r = row(p, RVec::from_vec(vec![0.3, 1.0]), -1.0);
        let prog = program(vec![r], 2, 1, RVec::from_vec(vec![0.0, 0.0]));
        let a = solve_program(&prog, &SolverOptions::default());
        let mut scaled = prog.clone();
        scaled.objective *= 7.0;
        let b = solve_program(&scaled, &SolverOptions::default());
        assert!((&a.x - &b.x).norm() < 1e-4);
    }

    fn small_cfg() -> SystemConfig {
        SystemConfig {
            m: 3,
            n: 4,
            k: 2,
            n_theta: 100,
            ..SystemConfig::default()
        }
    }

    fn scaled_vars(cfg: &SystemConfig, p: &PhysicalParams, rng: &mut ChaCha8Rng) -> DesignVariables {
        let mut vars = random_vars(cfg, rng);
        let scale = (0.5 * p.p_bs / crate::metrics::bs_power(&vars)).sqrt();
        vars.w *= C64::from(scale);
        vars.z *= C64::from(scale);
        vars.theta = vars.theta.map(|t| t / C64::from(t.norm()));
        vars.r.fill(0.0);
        vars
    }

    #[test]
    fn layout_round_trip_and_dimensions() {
        let cfg = SystemConfig { m: 2, n: 3, k: 1, n_theta: 50, ..SystemConfig::default() };
        let p = to_linear(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let set = sample_scene(&cfg, &mut rng);
        let norm = normalize(&set, &p);
        let eve = eve_second_moment(&cfg).unwrap();
        let vars = scaled_vars(&cfg, &p, &mut rng);
        let exp = bf_expand(&vars, &norm, &eve, &p);
        let prog = assemble_bf_program(&exp, &set, &p, ProgramSettings::default()).unwrap();
        assert_eq!(prog.layout.dim, 2 * 2 * 3 + 1 + 1);
        let x = prog.layout.pack(&vars, 0.25);
        let (back, tau) = prog.unpack(&x);
        assert_eq!(back, vars);
        assert_eq!(tau, 0.25);
    }

    #[test]
    fn lifted_rows_match_complex_constraints() {
        let cfg = small_cfg();
        let p = to_linear(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let set = sample_scene(&cfg, &mut rng);
        let norm = normalize(&set, &p);
        let eve = eve_second_moment(&cfg).unwrap();
        let vars = scaled_vars(&cfg, &p, &mut rng);
        let exp = bf_expand(&vars, &norm, &eve, &p);
        let prog = assemble_bf_program(&exp, &set, &p, ProgramSettings::default()).unwrap();
        let cand = scaled_vars(&cfg, &p, &mut rng);
        let mut cand = DesignVariables { theta: vars.theta.clone(), u: vars.u.clone(), ..cand };
        cand.r = RVec::from_fn(cfg.k, |_, _| rng.random_range(0.0..1.0));
        let x = prog.layout.pack(&cand, 0.4);
        let point = VarPoint::from_vars(&cand, 0.4);
        for (row, src) in prog.rows.iter().zip(&prog.sources) {
            let sign = if src.sense == Sense::Ge { -1.0 } else { 1.0 };
            let expected = sign * src.lhs(&point) / row.scale;
            assert!((row.value(&x) - expected).abs() < 1e-9 * (1.0 + expected.abs()), "{}", row.name);
        }
    }

    #[test]
    fn bf_program_improves_on_expansion_point() {
        let cfg = small_cfg();
        let p = to_linear(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let set = sample_scene(&cfg, &mut rng);
        let norm = normalize(&set, &p);
        let eve = eve_second_moment(&cfg).unwrap();
        let mut params = p.clone();
        params.gamma_r = 0.5 * radar_snr(&scaled_vars(&cfg, &p, &mut rng.clone()), &set, &p);
        let vars = scaled_vars(&cfg, &p, &mut rng);
        let exp = bf_expand(&vars, &norm, &eve, &params);
        let prog = assemble_bf_program(&exp, &set, &params, ProgramSettings::default()).unwrap();
        let sol = solve_program(&prog, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.max_violation <= 1e-7);
        assert!(sol.objective >= prog.start[prog.layout.scalar(Scalar::Tau).unwrap()] - 1e-9);
    }

    #[test]
    fn huge_radar_requirement_is_infeasible() {
        let cfg = small_cfg();
        let mut p = to_linear(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let set = sample_scene(&cfg, &mut rng);
        let norm = normalize(&set, &p);
        let eve = eve_second_moment(&cfg).unwrap();
        let vars = scaled_vars(&cfg, &p, &mut rng);
        p.gamma_r = 1e30;
        let exp = bf_expand(&vars, &norm, &eve, &p);
        let prog = assemble_bf_program(&exp, &set, &p, ProgramSettings::default()).unwrap();
        assert_eq!(solve_program(&prog, &SolverOptions::default()).status, SolveStatus::Infeasible);
    }

    #[test]
    fn ris_program_respects_zero_cap_and_relaxation() {
        let cfg = small_cfg();
        let p = to_linear(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let set = sample_scene(&cfg, &mut rng);
        let norm = normalize(&set, &p);
        let eve = eve_second_moment(&cfg).unwrap();
        let vars = scaled_vars(&cfg, &p, &mut rng);
        let mut params = p.clone();
        params.gamma_r = 0.0;
        let exp = ris_expand(&vars, &set, &norm, &eve, &params);
        let opts = SolverOptions::default();
        let with = solve_program(&assemble_ris_program(&exp, &params, ProgramSettings::default()).unwrap(), &opts);
        let relaxed = ProgramSettings { radar: false, ..ProgramSettings::default() };
        let without = solve_program(&assemble_ris_program(&exp, &params, relaxed).unwrap(), &opts);
        assert_eq!(with.status, SolveStatus::Optimal);
        assert!(without.objective >= with.objective - 1e-6);

        params.beta_max = 0.0;
        let exp = ris_expand(&vars, &set, &norm, &eve, &params);
        let prog = assemble_ris_program(&exp, &params, ProgramSettings::default()).unwrap();
        let sol = solve_program(&prog, &opts);
        let (out, _) = prog.unpack(&sol.x);
        assert!(out.theta.iter().all(|t| t.norm() == 0.0));
    }

    #[test]
    fn triplet_dump_lists_every_row() {
        let r = row(RMat::identity(2, 2), RVec::from_vec(vec![0.0, 1.0]), -1.0);
        let prog = program(vec![r], 2, 1, RVec::zeros(2));
        let text = prog.to_triplets();
        assert!(text.starts_with("secopt-program 1\ndim 2 rows 1\n"));
        assert!(text.contains("P 0 1 1 1e0"));
    }

    #[test]
    fn receiver_identity_and_matched_filter() {
        let (u, g) = generalized_top_eigen(&CMat::identity(3, 3), &CMat::identity(3, 3));
        assert!((u.norm() - 1.0).abs() < 1e-12 && (g - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let h = random_cvec(4, 1.0, &mut rng);
        let (u, g) = generalized_top_eigen(&(&h * h.adjoint()), &CMat::identity(4, 4));
        assert!((g - h.norm_squared()).abs() < 1e-10);
        assert!((u.dotc(&h).norm() - h.norm()).abs() < 1e-10);
    }

    #[test]
    fn receiver_beats_random_probes() {
        let cfg = small_cfg();
        let p = to_linear(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        let set = sample_scene(&cfg, &mut rng);
        let mut vars = random_vars(&cfg, &mut rng);
        let (u, gamma) = radar_receiver(&vars, &set, &p);
        vars.u = u.clone();
        let best = radar_snr(&vars, &set, &p);
        assert!((best - gamma).abs() < 1e-10 * gamma);
        for _ in 0..1000 {
            let probe = random_cvec(cfg.m, 1.0, &mut rng);
            vars.u = &probe / C64::from(probe.norm());
            assert!(radar_snr(&vars, &set, &p) <= best * (1.0 + 1e-10));
        }
        // Generalized eigen-equation residual.
        let mats = radar_matrices(&vars.theta, &set);
        let pi = &vars.w * vars.w.adjoint() + &vars.z * vars.z.adjoint();
        let a = &mats.h_t * pi * mats.h_t.adjoint() * C64::from(p.rcs);
        let b = &mats.h_0 * mats.h_0.adjoint() * C64::from(p.rcs * p.sigma2_ris)
            + &mats.h_1 * mats.h_1.adjoint() * C64::from(p.sigma2_ris)
            + CMat::identity(cfg.m, cfg.m) * C64::from(p.sigma2_bs);
        let lhs = &a * &u;
        let res = (&lhs - &b * &u * C64::from(gamma)).norm();
        assert!(res <= 1e-8 * lhs.norm());
    }
}

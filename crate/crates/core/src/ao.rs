//! Alternating optimization over the precoders, the reflection vector and
//! the radar filter, for the four benchmark schemes.
//!
//! Progress is measured by the moment-approximated max-min objective
//! `J = min_k (r_k + R_k − R̂_k,E)` in nats. A subproblem update that
//! would lower `J` is rejected, so the recorded sequence never decreases;
//! updates are always taken while the current point violates a true
//! constraint, which lets the first sweeps restore radar feasibility.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::channels::{normalize, ChannelSet, EveMoment, NormalizedChannels};
use crate::config::{to_linear, PhysicalParams, SystemConfig};
use crate::convex::{
    assemble_bf_program, assemble_ris_program, radar_receiver, solve_program, ConvexProgram, ProgramSettings,
    SolveStatus, SolverOptions,
};
use crate::linalg::{diag, CMat, CVec, RVec, C64};
use crate::metrics::{bs_power, deterministic_eve_rates, radar_snr, ris_power, sinr_report, DesignVariables};
use crate::surrogates::{bf_expand, ris_expand};

/// Benchmark transmission schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "ARIS_RSMA")]
    ArisRsma,
    #[serde(rename = "ARIS_SDMA")]
    ArisSdma,
    #[serde(rename = "PRIS_RSMA")]
    PrisRsma,
    #[serde(rename = "PRIS_SDMA")]
    PrisSdma,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::ArisRsma, Scheme::ArisSdma, Scheme::PrisRsma, Scheme::PrisSdma];

    /// A common stream is transmitted.
    pub fn rsma(self) -> bool {
        matches!(self, Scheme::ArisRsma | Scheme::PrisRsma)
    }

    /// Elements amplify, add noise and draw from the RIS budget.
    pub fn active_ris(self) -> bool {
        matches!(self, Scheme::ArisRsma | Scheme::ArisSdma)
    }

    /// Display label, e.g. `ARIS-RSMA`.
    pub fn label(self) -> &'static str {
        match self {
            Scheme::ArisRsma => "ARIS-RSMA",
            Scheme::ArisSdma => "ARIS-SDMA",
            Scheme::PrisRsma => "PRIS-RSMA",
            Scheme::PrisSdma => "PRIS-SDMA",
        }
    }

    /// Parses either the label or the serialized name.
    pub fn parse(text: &str) -> Option<Self> {
        let norm = text.trim().to_ascii_uppercase().replace('-', "_");
        Self::ALL.into_iter().find(|s| s.label().replace('-', "_") == norm)
    }

    /// Linear parameters with the passive-surface overrides applied.
    pub fn params(self, config: &SystemConfig) -> PhysicalParams {
        let mut p = to_linear(config);
        if !self.active_ris() {
            p.beta_max = 1.0;
            p.sigma2_ris = 0.0;
        }
        p
    }

    /// Assembly switches for this scheme.
    pub fn settings(self) -> ProgramSettings {
        ProgramSettings {
            rsma: self.rsma(),
            ris_power: self.active_ris(),
            radar: true,
        }
    }
}

/// Driver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoOptions {
    pub max_iters: usize,
    /// Stop once `|J_t − J_{t−1}|` falls below this (nats).
    pub tol: f64,
    /// Allowed decrease of `J` when accepting an update.
    pub monotone_slack: f64,
    pub solver: SolverOptions,
    /// Independent initializations; the best final `J` is kept.
    pub multi_start: usize,
    /// Drops the radar requirement (used when a scheme cannot meet it).
    pub relax_radar: bool,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self {
            max_iters: 60,
            tol: 1e-3,
            monotone_slack: 1e-7,
            solver: SolverOptions::default(),
            multi_start: 1,
            relax_radar: false,
        }
    }
}

/// One AO sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Approximated max-min objective after the sweep (nats).
    pub tau: f64,
    pub bf_tau: Option<f64>,
    pub ris_tau: Option<f64>,
    pub bf_status: Option<SolveStatus>,
    pub ris_status: Option<SolveStatus>,
    pub bf_accepted: bool,
    pub ris_accepted: bool,
    pub radar_snr: f64,
    pub bs_power: f64,
    pub ris_power: f64,
    pub feasible: bool,
}

/// Full run history.
#[derive(Debug, Clone)]
pub struct AoTrace {
    pub scheme: Scheme,
    pub initial_tau: f64,
    pub records: Vec<IterationRecord>,
    pub vars: DesignVariables,
    pub converged: bool,
    pub iterations: usize,
    pub feasible: bool,
    pub error: Option<String>,
}

impl AoTrace {
    /// Final objective (nats).
    pub fn final_tau(&self) -> f64 {
        self.records.last().map_or(self.initial_tau, |r| r.tau)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "scheme": self.scheme,
            "initial_tau": self.initial_tau,
            "records": self.records,
            "vars": self.vars.to_json(),
            "converged": self.converged,
            "iterations": self.iterations,
            "feasible": self.feasible,
            "error": self.error,
        })
    }
}

/// Objective and true-constraint check at a point.
#[derive(Debug, Clone, Copy)]
struct PointValue {
    tau: f64,
    feasible: bool,
    radar_snr: f64,
    bs_power: f64,
    ris_power: f64,
}

struct Problem<'a> {
    channels: &'a ChannelSet,
    norm: NormalizedChannels,
    eve: &'a EveMoment,
    params: PhysicalParams,
    scheme: Scheme,
}

impl Problem<'_> {
    fn value(&self, vars: &DesignVariables) -> PointValue {
        let p = &self.params;
        let sinr = sinr_report(vars, &self.norm, p, None);
        let (common_e, private_e) = deterministic_eve_rates(vars, &self.norm, self.eve, p);
        let tau = (0..vars.k())
            .map(|k| vars.r[k] + sinr.gamma_k[k].ln_1p() - private_e[k])
            .fold(f64::INFINITY, f64::min);
        let common_slack = if self.scheme.rsma() {
            sinr.gamma_s0_k.iter().map(|g| g.ln_1p()).fold(f64::INFINITY, f64::min)
                - common_e
                - vars.r.sum()
        } else {
            0.0
        };
        let radar = radar_snr(vars, self.channels, p);
        let bs = bs_power(vars);
        let ris = ris_power(vars, self.channels, p);
        let feasible = bs <= p.p_bs * (1.0 + 1e-6)
            && (!self.scheme.active_ris() || ris <= p.p_ris * (1.0 + 1e-3))
            && radar >= p.gamma_r * (1.0 - 1e-3)
            && common_slack >= -1e-6
            && vars.r.iter().all(|&r| r >= -1e-9)
            && vars.theta.iter().all(|t| t.norm() <= p.beta_max * (1.0 + 1e-6));
        PointValue {
            tau,
            feasible,
            radar_snr: radar,
            bs_power: bs,
            ris_power: ris,
        }
    }
}

fn gaussian_cvec(n: usize, rng: &mut ChaCha8Rng) -> CVec {
    CVec::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

fn unit(v: CVec) -> CVec {
    let n = v.norm();
    if n > 0.0 {
        v / C64::from(n)
    } else {
        v
    }
}

/// Seeded starting point: maximum-ratio precoders, random AN, a reflection
/// vector aligned to user 1 and the matching radar filter.
pub fn initialize(config: &SystemConfig, channels: &ChannelSet, scheme: Scheme, rng: &mut ChaCha8Rng) -> DesignVariables {
    // Co-phase the dominant BS→RIS mode with the RIS→user-1 link.
    let svd = channels.g.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let v = v_t.row(svd.singular_values.iamax()).adjoint();
    let gv = &channels.g * v;
    let phases = CVec::from_fn(config.n, |i, _| C64::from_polar(1.0, gv[i].arg() - channels.h_rk[0][i].arg()));
    let amplitude = if scheme.active_ris() { scheme.params(config).beta_max / 2f64.sqrt() } else { 1.0 };
    let shape = StartShape { amplitude, an_share: 0.1, an_direction: None };
    start_point(config, channels, scheme, rng, phases, shape)
}

/// Fallback start with the reflection phases and the AN beam co-phased over
/// the BS→RIS→target path, for scenes where [`initialize`] cannot reach a
/// radar-feasible point. Full amplitude and larger AN shares are tried in
/// turn until the radar requirement holds.
pub fn initialize_radar_aligned(
    config: &SystemConfig,
    channels: &ChannelSet,
    scheme: Scheme,
    rng: &mut ChaCha8Rng,
) -> DesignVariables {
    let params = scheme.params(config);
    let mut v = unit(channels.g.adjoint() * &channels.h_rt);
    let mut phases = CVec::from_element(config.n, C64::from(1.0));
    for _ in 0..30 {
        let gv = &channels.g * &v;
        phases = CVec::from_fn(config.n, |i, _| C64::from_polar(1.0, channels.h_rt[i].arg() - gv[i].arg()));
        let row = channels.h_rt.adjoint() * diag(&phases) * &channels.g;
        v = unit(row.adjoint());
    }
    let amplitudes = if scheme.active_ris() {
        vec![params.beta_max / 2f64.sqrt(), params.beta_max]
    } else {
        vec![1.0]
    };
    let mut best: Option<(f64, DesignVariables)> = None;
    for an_share in [0.1, 0.3, 0.5] {
        for &amplitude in &amplitudes {
            let start = StartShape { amplitude, an_share, an_direction: Some(v.clone()) };
            let vars = start_point(config, channels, scheme, rng, phases.clone(), start);
            let snr = radar_snr(&vars, channels, &params);
            if snr >= params.gamma_r * 1.01 {
                return vars;
            }
            if best.as_ref().is_none_or(|b| snr > b.0) {
                best = Some((snr, vars));
            }
        }
    }
    best.expect("at least one candidate").1
}

struct StartShape {
    amplitude: f64,
    an_share: f64,
    an_direction: Option<CVec>,
}

fn start_point(
    config: &SystemConfig,
    channels: &ChannelSet,
    scheme: Scheme,
    rng: &mut ChaCha8Rng,
    phases: CVec,
    shape: StartShape,
) -> DesignVariables {
    let params = scheme.params(config);
    let norm = normalize(channels, &params);
    let (m, k) = (config.m, config.k);
    let mut theta = phases * C64::from(shape.amplitude);

    let budget = 0.9 * params.p_bs;
    let traffic = 1.0 - shape.an_share;
    let (private_share, common_share) = if scheme.rsma() {
        (traffic * 7.0 / 9.0, traffic * 2.0 / 9.0)
    } else {
        (traffic, 0.0)
    };
    let build = |theta: &CVec, rng: &mut ChaCha8Rng| {
        let eff: Vec<CVec> = norm.hbar_k.iter().map(|h| unit(h.ad_mul(theta))).collect();
        let mut w = CMat::zeros(m, k + 1);
        for (i, e) in eff.iter().enumerate() {
            w.set_column(i + 1, &(e * C64::from((private_share * budget / k as f64).sqrt())));
        }
        if common_share > 0.0 {
            let sum = eff.iter().fold(CVec::zeros(m), |acc, e| acc + e);
            w.set_column(0, &(unit(sum) * C64::from((common_share * budget).sqrt())));
        }
        let dir = gaussian_cvec(m, rng);
        let z = unit(shape.an_direction.clone().unwrap_or(dir)) * C64::from((shape.an_share * budget).sqrt());
        (w, z)
    };
    let (w, z) = build(&theta, rng);
    let mut vars = DesignVariables {
        w,
        z,
        theta: theta.clone(),
        u: unit(gaussian_cvec(m, rng)),
        r: RVec::zeros(k),
    };
    if scheme.active_ris() {
        let cap = 0.9 * params.p_ris;
        if ris_power(&vars, channels, &params) > cap {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                vars.theta = &theta * C64::from(mid);
                if ris_power(&vars, channels, &params) > cap {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            theta *= C64::from(lo);
            vars.theta = theta;
        }
    }
    let (u, _) = radar_receiver(&vars, channels, &params);
    vars.u = u;
    vars
}

fn accept(
    prog: &ConvexProgram,
    problem: &Problem,
    opts: &AoOptions,
    current: &PointValue,
) -> (Option<(DesignVariables, PointValue)>, Option<f64>, SolveStatus) {
    let sol = solve_program(prog, &opts.solver);
    let status = sol.status;
    if status != SolveStatus::Optimal {
        return (None, None, status);
    }
    let (cand, tau) = prog.unpack(&sol.x);
    let value = problem.value(&cand);
    let improves = value.tau >= current.tau - opts.monotone_slack;
    let ok = if current.feasible { improves && value.feasible } else { value.feasible || improves };
    (ok.then_some((cand, value)), Some(tau), status)
}

/// Runs the alternating optimization from `init`.
pub fn run_ao_from(
    config: &SystemConfig,
    channels: &ChannelSet,
    eve: &EveMoment,
    scheme: Scheme,
    opts: &AoOptions,
    init: DesignVariables,
) -> AoTrace {
    let mut params = scheme.params(config);
    let mut settings = scheme.settings();
    if opts.relax_radar {
        params.gamma_r = 0.0;
        settings.radar = false;
    }
    let problem = Problem {
        channels,
        norm: normalize(channels, &params),
        eve,
        params: params.clone(),
        scheme,
    };
    let mut vars = init;
    let mut current = problem.value(&vars);
    let initial_tau = current.tau;
    let mut records = Vec::new();
    let mut converged = false;
    let mut error = None;

    for iter in 1..=opts.max_iters {
        let previous = current.tau;
        let exp = bf_expand(&vars, &problem.norm, eve, &params);
        let (bf_tau, bf_status, bf_accepted) = match assemble_bf_program(&exp, channels, &params, settings) {
            Ok(prog) => {
                let (update, tau, status) = accept(&prog, &problem, opts, &current);
                let accepted = update.is_some();
                if let Some((cand, value)) = update {
                    vars = cand;
                    current = value;
                }
                (tau, Some(status), accepted)
            }
            Err(e) => {
                error = Some(e.to_string());
                (None, None, false)
            }
        };
        if error.is_some() {
            break;
        }

        let exp = ris_expand(&vars, channels, &problem.norm, eve, &params);
        let (ris_tau, ris_status, ris_accepted) = match assemble_ris_program(&exp, &params, settings) {
            Ok(prog) => {
                let (update, tau, status) = accept(&prog, &problem, opts, &current);
                let accepted = update.is_some();
                if let Some((cand, _)) = update {
                    vars = cand;
                }
                (tau, Some(status), accepted)
            }
            Err(e) => {
                error = Some(e.to_string());
                (None, None, false)
            }
        };

        let (u, _) = radar_receiver(&vars, channels, &params);
        vars.u = u;
        current = problem.value(&vars);

        records.push(IterationRecord {
            iter,
            tau: current.tau,
            bf_tau,
            ris_tau,
            bf_status,
            ris_status,
            bf_accepted,
            ris_accepted,
            radar_snr: current.radar_snr,
            bs_power: current.bs_power,
            ris_power: current.ris_power,
            feasible: current.feasible,
        });
        if error.is_some() {
            break;
        }
        let bf_failed = bf_status != Some(SolveStatus::Optimal);
        let ris_failed = ris_status != Some(SolveStatus::Optimal);
        if bf_failed && ris_failed {
            break;
        }
        if (current.tau - previous).abs() <= opts.tol && current.feasible {
            converged = true;
            break;
        }
    }
    AoTrace {
        scheme,
        initial_tau,
        iterations: records.len(),
        records,
        vars,
        converged,
        feasible: current.feasible,
        error,
    }
}

/// Runs the alternating optimization from seeded starting points and keeps
/// the best run.
pub fn run_ao(
    config: &SystemConfig,
    channels: &ChannelSet,
    eve: &EveMoment,
    scheme: Scheme,
    opts: &AoOptions,
    rng: &mut ChaCha8Rng,
) -> AoTrace {
    let mut best: Option<AoTrace> = None;
    for _ in 0..opts.multi_start.max(1) {
        let seed: u64 = rng.random();
        let mut local = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let init = initialize(config, channels, scheme, &mut local);
        let mut trace = run_ao_from(config, channels, eve, scheme, opts, init);
        if !trace.feasible && trace.error.is_none() {
            let init = initialize_radar_aligned(config, channels, scheme, &mut local);
            let retry = run_ao_from(config, channels, eve, scheme, opts, init);
            if (retry.feasible, retry.final_tau()) > (trace.feasible, trace.final_tau()) {
                trace = retry;
            }
        }
        let better = best.as_ref().is_none_or(|b| {
            (trace.feasible, trace.final_tau()) > (b.feasible, b.final_tau())
        });
        if better {
            best = Some(trace);
        }
    }
    best.expect("at least one start")
}

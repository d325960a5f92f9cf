//! Monte-Carlo experiment runner and figure presets.
//!
//! Every realization draws its scene from its own ChaCha stream derived from
//! `(rng_seed, realization)`, so the same scene is shared by all schemes and
//! sweep points that keep the array sizes, and results do not depend on the
//! worker count.

use std::f64::consts::LN_10;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ao::{run_ao, AoOptions, AoTrace, Scheme};
use crate::channels::{eve_second_moment, normalize, sample_scene, ChannelError, ChannelSet, EveMoment};
use crate::config::{ConfigError, SystemConfig};
use crate::metrics::{ergodic_eve_rates_mc, secrecy_report};

const SCENE_STREAM: u64 = 0;
const INIT_STREAM: u64 = 1 << 32;
const EVE_STREAM: u64 = 2 << 32;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Swept scenario parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// Convergence run at the base scenario.
    None,
    PBsDbm,
    N,
    RisX,
    GammaRDb,
}

impl Sweep {
    /// Scenario at one sweep value.
    pub fn apply(self, base: &SystemConfig, value: f64) -> SystemConfig {
        let mut cfg = base.clone();
        match self {
            Sweep::None => {}
            Sweep::PBsDbm => cfg.p_bs_dbm = value,
            Sweep::N => cfg.n = value.round() as usize,
            Sweep::RisX => cfg.ris_pos[0] = value,
            Sweep::GammaRDb => cfg.gamma_r_db = value,
        }
        cfg
    }
}

/// One experiment: a scenario, a sweep and the schemes to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub base: SystemConfig,
    pub sweep: Sweep,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub realizations: usize,
    /// Eve draws for the final ergodic evaluation.
    pub eve_draws: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.values.is_empty() {
            return Err(ExperimentError::Invalid("empty sweep value list".into()));
        }
        if self.schemes.is_empty() {
            return Err(ExperimentError::Invalid("no schemes selected".into()));
        }
        if self.realizations == 0 {
            return Err(ExperimentError::Invalid("realizations must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(ExperimentError::Invalid("max_iters must be at least 1".into()));
        }
        for &v in &self.values {
            self.sweep.apply(&self.base, v).validate()?;
        }
        Ok(())
    }

    fn ao_options(&self) -> AoOptions {
        AoOptions {
            max_iters: self.max_iters,
            tol: self.tol,
            ..AoOptions::default()
        }
    }
}

/// Outcome class of one AO run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIterations,
    /// Both subproblems failed in a sweep before convergence.
    Stalled,
    /// No radar-feasible point was found; reported metrics come from a run
    /// without the radar requirement.
    RadarRelaxed,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIterations => "max_iterations",
            RunStatus::Stalled => "stalled",
            RunStatus::RadarRelaxed => "radar_relaxed",
            RunStatus::Failed => "failed",
        }
    }
}

/// One (scheme, sweep value, realization) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub realization: usize,
    pub min_epsr_bits: f64,
    pub ecsr_margin_bits: f64,
    pub radar_snr_db: f64,
    pub iters: usize,
    pub status: RunStatus,
    /// Final approximated objective (nats).
    pub tau: f64,
    /// Objective after each sweep, starting from the initial point.
    pub trace_tau: Vec<f64>,
    pub wall_time_s: f64,
}

/// Mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

/// Per (scheme, sweep value) summary over the non-failed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub count: usize,
    pub failures: usize,
    pub radar_relaxed: usize,
    pub min_epsr_bits: Stat,
    pub ecsr_margin_bits: Stat,
    pub radar_snr_db: Stat,
    pub iters: Stat,
    pub wall_time_s: Stat,
    /// Mean objective per sweep; shorter traces hold their final value.
    pub mean_trace_tau: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentResult {
    pub fn aggregate(&self, scheme: Scheme, sweep_value: f64) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.scheme == scheme && a.sweep_value == sweep_value)
    }

    /// Per-realization values of one metric, ordered by realization.
    pub fn column(&self, scheme: Scheme, sweep_value: f64, metric: fn(&RunRecord) -> f64) -> Vec<(usize, f64)> {
        self.runs
            .iter()
            .filter(|r| r.scheme == scheme && r.sweep_value == sweep_value && r.status != RunStatus::Failed)
            .map(|r| (r.realization, metric(r)))
            .collect()
    }
}

/// Builds the aggregates from the per-run rows.
pub fn aggregate(spec: &ExperimentSpec, runs: &[RunRecord]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &value in &spec.values {
        for &scheme in &spec.schemes {
            let rows: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.scheme == scheme && r.sweep_value == value)
                .collect();
            let ok: Vec<&RunRecord> = rows.iter().copied().filter(|r| r.status != RunStatus::Failed).collect();
            let pick = |f: fn(&RunRecord) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<_>>();
            let len = ok.iter().map(|r| r.trace_tau.len()).max().unwrap_or(0);
            let mean_trace_tau = (0..len)
                .map(|i| {
                    let sum: f64 = ok
                        .iter()
                        .map(|r| r.trace_tau.get(i).or(r.trace_tau.last()).copied().unwrap_or(f64::NAN))
                        .sum();
                    sum / ok.len() as f64
                })
                .collect();
            out.push(Aggregate {
                scheme,
                sweep_value: value,
                count: ok.len(),
                failures: rows.len() - ok.len(),
                radar_relaxed: ok.iter().filter(|r| r.status == RunStatus::RadarRelaxed).count(),
                min_epsr_bits: Stat::of(&pick(|r| r.min_epsr_bits)),
                ecsr_margin_bits: Stat::of(&pick(|r| r.ecsr_margin_bits)),
                radar_snr_db: Stat::of(&pick(|r| r.radar_snr_db)),
                iters: Stat::of(&pick(|r| r.iters as f64)),
                wall_time_s: Stat::of(&pick(|r| r.wall_time_s)),
                mean_trace_tau,
            });
        }
    }
    out
}

/// ChaCha stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Scene of one realization.
pub fn realization_scene(config: &SystemConfig, realization: usize) -> ChannelSet {
    sample_scene(config, &mut stream_rng(config.rng_seed, SCENE_STREAM + realization as u64))
}

fn status_of(trace: &AoTrace, relaxed: bool) -> RunStatus {
    if trace.error.is_some() {
        RunStatus::Failed
    } else if relaxed {
        RunStatus::RadarRelaxed
    } else if trace.converged {
        RunStatus::Converged
    } else if trace.iterations >= 1 && trace.records.last().is_some_and(|r| !r.bf_accepted && !r.ris_accepted) {
        RunStatus::Stalled
    } else {
        RunStatus::MaxIterations
    }
}

/// Runs AO for one scheme on one scene and evaluates the result with the
/// Monte-Carlo Eve oracle.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_run(
    config: &SystemConfig,
    channels: &ChannelSet,
    eve: &EveMoment,
    scheme: Scheme,
    opts: &AoOptions,
    realization: usize,
    sweep_value: f64,
    eve_draws: usize,
) -> RunRecord {
    let started = Instant::now();
    let mut init_rng = stream_rng(config.rng_seed, INIT_STREAM + realization as u64);
    let mut trace = run_ao(config, channels, eve, scheme, opts, &mut init_rng);
    let mut relaxed = false;
    if !trace.feasible && trace.error.is_none() {
        let relaxed_opts = AoOptions { relax_radar: true, ..*opts };
        let mut init_rng = stream_rng(config.rng_seed, INIT_STREAM + realization as u64);
        trace = run_ao(config, channels, eve, scheme, &relaxed_opts, &mut init_rng);
        relaxed = true;
    }
    let params = scheme.params(config);
    let norm = normalize(channels, &params);
    let mut eve_rng = stream_rng(config.rng_seed, EVE_STREAM + realization as u64);
    let erg = ergodic_eve_rates_mc(&trace.vars, &norm, config, &params, &mut eve_rng, eve_draws);
    let report = secrecy_report(&trace.vars, channels, &norm, &erg, &params);
    let mut trace_tau = vec![trace.initial_tau];
    trace_tau.extend(trace.records.iter().map(|r| r.tau));
    RunRecord {
        scheme,
        sweep_value,
        realization,
        min_epsr_bits: report.min_epsr,
        ecsr_margin_bits: report.ecsr_margin,
        radar_snr_db: 10.0 * report.radar_snr.ln() / LN_10,
        iters: trace.iterations,
        status: status_of(&trace, relaxed),
        tau: trace.final_tau(),
        trace_tau,
        wall_time_s: started.elapsed().as_secs_f64(),
    }
}

/// Runs every (sweep value, realization, scheme) combination.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, ExperimentError> {
    spec.validate()?;
    let opts = spec.ao_options();
    let points = spec
        .values
        .iter()
        .map(|&v| {
            let cfg = spec.sweep.apply(&spec.base, v);
            let eve = eve_second_moment(&cfg)?;
            Ok((v, cfg, eve))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.realizations).map(move |r| (p, r)))
        .collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(p, realization)| {
            let (value, cfg, eve) = &points[p];
            let scene = realization_scene(cfg, realization);
            spec.schemes
                .iter()
                .map(|&scheme| evaluate_run(cfg, &scene, eve, scheme, &opts, realization, *value, spec.eve_draws))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let aggregates = aggregate(spec, &runs);
    Ok(ExperimentResult {
        spec: spec.clone(),
        runs,
        aggregates,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    scheme: &'a str,
    sweep_value: f64,
    realization: usize,
    min_epsr_bits: f64,
    ecsr_margin_bits: f64,
    radar_snr_db: f64,
    iters: usize,
    status: &'a str,
}

const CSV_HEADER: [&str; 8] = [
    "scheme",
    "sweep_value",
    "realization",
    "min_epsr_bits",
    "ecsr_margin_bits",
    "radar_snr_db",
    "iters",
    "status",
];

/// Per-run rows as CSV text.
pub fn to_csv(result: &ExperimentResult) -> Result<String, ExperimentError> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(CSV_HEADER)?;
    for r in &result.runs {
        writer.serialize(CsvRow {
            scheme: r.scheme.label(),
            sweep_value: r.sweep_value,
            realization: r.realization,
            min_epsr_bits: r.min_epsr_bits,
            ecsr_margin_bits: r.ecsr_margin_bits,
            radar_snr_db: r.radar_snr_db,
            iters: r.iters,
            status: r.status.as_str(),
        })?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Output format for [`emit_results`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

pub fn emit_results(result: &ExperimentResult, path: &Path, format: Format) -> Result<(), ExperimentError> {
    let text = match format {
        Format::Csv => to_csv(result)?,
        Format::Json => serde_json::to_string_pretty(result)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_results(path: &Path) -> Result<ExperimentResult, ExperimentError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Reduced realization and Eve-draw counts for desk runs.
pub const DESK_REALIZATIONS: usize = 50;
pub const DESK_EVE_DRAWS: usize = 1000;

/// The six figure experiments at full or desk scale.
pub fn figure_presets(base: &SystemConfig, desk_scale: bool) -> Vec<ExperimentSpec> {
    let (realizations, eve_draws) = if desk_scale {
        (DESK_REALIZATIONS, DESK_EVE_DRAWS)
    } else {
        (base.mc_realizations, base.mc_eve_draws)
    };
    let spec = |name: &str, sweep: Sweep, values: Vec<f64>| ExperimentSpec {
        name: name.into(),
        base: base.clone(),
        sweep,
        values,
        schemes: Scheme::ALL.to_vec(),
        realizations,
        eve_draws,
        max_iters: AoOptions::default().max_iters,
        tol: AoOptions::default().tol,
    };
    let power_grid: Vec<f64> = (0..=5).map(|i| 30.0 + 2.0 * i as f64).collect();
    vec![
        spec("fig2", Sweep::None, vec![0.0]),
        spec("fig3", Sweep::PBsDbm, power_grid.clone()),
        spec("fig4", Sweep::PBsDbm, power_grid),
        spec("fig5", Sweep::N, vec![12.0, 16.0, 20.0, 24.0, 28.0]),
        spec("fig6", Sweep::RisX, (1..=7).map(|i| 5.0 * i as f64).collect()),
        spec("fig7", Sweep::GammaRDb, (0..=5).map(|i| 2.0 * i as f64).collect()),
    ]
}

/// Looks up a preset by name.
pub fn preset(name: &str, base: &SystemConfig, desk_scale: bool) -> Option<ExperimentSpec> {
    figure_presets(base, desk_scale).into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec {
            name: "tiny".into(),
            base: SystemConfig {
                m: 2,
                n: 4,
                k: 1,
                n_theta: 50,
                ..SystemConfig::default()
            },
            sweep: Sweep::PBsDbm,
            values: vec![30.0, 34.0],
            schemes: vec![Scheme::ArisRsma, Scheme::PrisSdma],
            realizations: 2,
            eve_draws: 50,
            max_iters: 3,
            tol: 1e-3,
        }
    }

    #[test]
    fn presets_cover_the_figure_grids() {
        let presets = figure_presets(&SystemConfig::default(), true);
        let names: Vec<_> = presets.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7"]);
        assert_eq!(presets[3].values, [12.0, 16.0, 20.0, 24.0, 28.0]);
        let fig6 = &presets[4].values;
        assert!([5.0, 20.0, 35.0].iter().all(|x| fig6.contains(x)));
        assert_eq!(presets[1].values.first(), Some(&30.0));
        assert_eq!(presets[1].values.last(), Some(&40.0));
        assert!(presets.iter().all(|p| p.realizations == DESK_REALIZATIONS && p.validate().is_ok()));
        let full = preset("fig2", &SystemConfig::default(), false).unwrap();
        assert_eq!(full.realizations, 1000);
    }

    #[test]
    fn sweep_apply_sets_field() {
        let base = SystemConfig::default();
        assert_eq!(Sweep::N.apply(&base, 24.0).n, 24);
        assert_eq!(Sweep::RisX.apply(&base, 5.0).ris_pos, [5.0, 0.0]);
        assert_eq!(Sweep::GammaRDb.apply(&base, 4.0).gamma_r_db, 4.0);
        assert_eq!(Sweep::None.apply(&base, 7.0), base);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = tiny_spec();
        s.values.clear();
        assert!(s.validate().is_err());
        let mut s = tiny_spec();
        s.realizations = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn empty_result_gives_header_only_csv() {
        let result = ExperimentResult { spec: tiny_spec(), runs: vec![], aggregates: vec![] };
        let csv = to_csv(&result).unwrap();
        assert_eq!(csv, "scheme,sweep_value,realization,min_epsr_bits,ecsr_margin_bits,radar_snr_db,iters,status\n");
    }

    #[test]
    fn run_is_deterministic_and_round_trips() {
        let spec = tiny_spec();
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(to_csv(&a).unwrap(), to_csv(&b).unwrap());
        assert_eq!(a.runs.len(), 2 * 2 * 2);
        assert_eq!(to_csv(&a).unwrap().lines().count(), 1 + a.runs.len());

        let text = serde_json::to_string(&a).unwrap();
        let back: ExperimentResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);

        for agg in &a.aggregates {
            let rows = a.column(agg.scheme, agg.sweep_value, |r| r.min_epsr_bits);
            let mean = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
            assert!((mean - agg.min_epsr_bits.mean).abs() <= 1e-12);
        }
        assert_eq!(aggregate(&spec, &a.runs), a.aggregates);
    }

    #[test]
    fn stat_matches_hand_values() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[2.0]).se, 0.0);
    }
}

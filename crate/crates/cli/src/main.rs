use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use secopt_core::ao::{initialize, run_ao, AoOptions, Scheme};
use secopt_core::channels::{eve_second_moment, normalize};
use secopt_core::config::{load_config, SystemConfig};
use secopt_core::convex::assemble_bf_program;
use secopt_core::experiments::{
    emit_results, preset, realization_scene, run_experiment, stream_rng, ExperimentSpec, Format,
};
use secopt_core::surrogates::{bf_expand, ris_expand};
use secopt_core::validate::{experiment_checks, property_checks};

/// Robust secure RSMA-ISAC design with an active RIS.
#[derive(Parser)]
#[command(name = "secopt", version)]
struct Cli {
    /// Write the default scenario as JSON to this path and exit.
    #[arg(long, value_name = "PATH")]
    emit_default_config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a figure preset or an experiment spec.
    Run(RunArgs),
    /// Run the acceptance property suites.
    Validate {
        /// Also run the desk-scale experiment checks (slow).
        #[arg(long)]
        full: bool,
        /// Realizations for the experiment checks.
        #[arg(long, default_value_t = 50)]
        realizations: usize,
    },
    /// Print the default scenario as JSON.
    EmitDefaultConfig {
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON; missing keys take default values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Figure preset: fig2 … fig7.
    #[arg(long, default_value = "fig2", conflicts_with = "spec")]
    preset: String,
    /// Full experiment spec as JSON instead of a preset.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// 50 realizations and reduced Eve draws.
    #[arg(long)]
    desk_scale: bool,
    /// Override the realization count.
    #[arg(long)]
    realizations: Option<usize>,
    /// Restrict to these schemes (e.g. ARIS-RSMA,PRIS-SDMA).
    #[arg(long, value_delimiter = ',')]
    schemes: Vec<String>,
    /// Output directory for `<name>.csv` and `<name>.json`.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Write realization 0 of the first sweep point as JSON.
    #[arg(long, value_name = "PATH")]
    dump_channels: Option<PathBuf>,
    /// Write the BF and RIS expansions at the initial point of realization 0.
    #[arg(long, value_name = "PATH")]
    dump_expansion: Option<PathBuf>,
    /// Write the first BF program of realization 0 as sparse triplets.
    #[arg(long, value_name = "PATH")]
    dump_program: Option<PathBuf>,
    /// Write the AO trace of realization 0 for the first scheme.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// Only write the requested dumps; skip the experiment.
    #[arg(long)]
    dumps_only: bool,
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn build_spec(args: &RunArgs) -> Result<ExperimentSpec> {
    let mut spec = if let Some(path) = &args.spec {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        let base = match &args.config {
            Some(path) => load_config(path)?,
            None => SystemConfig::default(),
        };
        match preset(&args.preset, &base, args.desk_scale) {
            Some(spec) => spec,
            None => bail!("unknown preset `{}` (expected fig2 … fig7)", args.preset),
        }
    };
    if let Some(n) = args.realizations {
        spec.realizations = n;
    }
    if !args.schemes.is_empty() {
        spec.schemes = args
            .schemes
            .iter()
            .map(|s| Scheme::parse(s).with_context(|| format!("unknown scheme `{s}`")))
            .collect::<Result<_>>()?;
    }
    spec.validate()?;
    Ok(spec)
}

fn write_dumps(spec: &ExperimentSpec, args: &RunArgs) -> Result<()> {
    let cfg = spec.sweep.apply(&spec.base, spec.values[0]);
    let scheme = spec.schemes[0];
    let scene = realization_scene(&cfg, 0);
    if let Some(path) = &args.dump_channels {
        write(path, &serde_json::to_string_pretty(&scene.to_json())?)?;
    }
    if args.dump_expansion.is_none() && args.dump_program.is_none() && args.trace.is_none() {
        return Ok(());
    }
    let eve = eve_second_moment(&cfg)?;
    let params = scheme.params(&cfg);
    let norm = normalize(&scene, &params);
    let mut rng = stream_rng(cfg.rng_seed, 1 << 32);
    let init = initialize(&cfg, &scene, scheme, &mut rng);
    let bf = bf_expand(&init, &norm, &eve, &params);
    if let Some(path) = &args.dump_expansion {
        let ris = ris_expand(&init, &scene, &norm, &eve, &params);
        let doc = serde_json::json!({ "bf": bf.to_json(), "ris": ris.to_json() });
        write(path, &serde_json::to_string_pretty(&doc)?)?;
    }
    if let Some(path) = &args.dump_program {
        let program = assemble_bf_program(&bf, &scene, &params, scheme.settings())?;
        write(path, &program.to_triplets())?;
    }
    if let Some(path) = &args.trace {
        let opts = AoOptions { max_iters: spec.max_iters, tol: spec.tol, ..AoOptions::default() };
        let trace = run_ao(&cfg, &scene, &eve, scheme, &opts, &mut stream_rng(cfg.rng_seed, 1 << 32));
        write(path, &serde_json::to_string_pretty(&trace.to_json())?)?;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let spec = build_spec(&args)?;
    write_dumps(&spec, &args)?;
    if args.dumps_only {
        return Ok(());
    }
    eprintln!(
        "running {}: {} values x {} realizations x {} schemes",
        spec.name,
        spec.values.len(),
        spec.realizations,
        spec.schemes.len()
    );
    let result = run_experiment(&spec)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let csv = args.out.join(format!("{}.csv", spec.name));
    let json = args.out.join(format!("{}.json", spec.name));
    emit_results(&result, &csv, Format::Csv)?;
    emit_results(&result, &json, Format::Json)?;
    for agg in &result.aggregates {
        println!(
            "{:<10} {:>8.2}  min-EPSR {:.4} ± {:.4} bits  ECSR margin {:.4}  radar {:.2} dB  ({} runs, {} failed)",
            agg.scheme.label(),
            agg.sweep_value,
            agg.min_epsr_bits.mean,
            agg.min_epsr_bits.se,
            agg.ecsr_margin_bits.mean,
            agg.radar_snr_db.mean,
            agg.count,
            agg.failures
        );
    }
    eprintln!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn validate(full: bool, realizations: usize) -> ExitCode {
    let mut outcomes = property_checks();
    if full {
        outcomes.extend(experiment_checks(realizations));
    }
    for o in &outcomes {
        println!("{o}");
    }
    if outcomes.iter().all(|o| o.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match (cli.emit_default_config, cli.command) {
        (Some(path), _) => write(&path, &SystemConfig::default().to_json_string()),
        (None, Some(Command::EmitDefaultConfig { out: Some(path) })) => {
            write(&path, &SystemConfig::default().to_json_string())
        }
        (None, Some(Command::EmitDefaultConfig { out: None })) => {
            println!("{}", SystemConfig::default().to_json_string());
            Ok(())
        }
        (None, Some(Command::Validate { full, realizations })) => return validate(full, realizations),
        (None, Some(Command::Run(args))) => run(args),
        (None, None) => {
            eprintln!("nothing to do; see `secopt --help`");
            return ExitCode::from(1);
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

//! heartsim command line: run scenarios to CSV traces, drive restitution
//! experiments, inspect presets and scenarios.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use heartsim::cell::{CellParams, CellVariant};
use heartsim::engine::{
    activation_csv, activation_report, restitution_csv, restitution_curve, simulate, Integrator,
    RestitutionProtocol, SimSettings,
};
use heartsim::network::{
    apply_scenario, default_heart, has_errors, validate_config, HeartConfig, Scenario,
    ScenarioName, Severity, SCHEMA_VERSION,
};

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn parse_scenario(s: &str) -> Result<ScenarioName, String> {
    ScenarioName::parse(s).ok_or_else(|| {
        let names: Vec<&str> = ScenarioName::ALL.iter().map(|n| n.as_str()).collect();
        format!("unknown scenario (expected one of: {})", names.join(", "))
    })
}

fn usage_error(message: &str) -> ! {
    eprintln!("error: {message}");
    std::process::exit(2);
}

fn version_string() -> &'static str {
    Box::leak(format!("{TOOL_VERSION} (config schema {SCHEMA_VERSION})").into_boxed_str())
}

#[derive(Parser)]
#[command(name = "heartsim", version = version_string(), about = "Cardiac conduction system simulator")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run a scenario or config file and write trace/activation CSVs
    Run(RunArgs),
    /// Pace an isolated cell over a range of cycle lengths and write the
    /// (diastolic interval, action potential duration) curve
    Restitution(RestitutionArgs),
    /// List built-in scenarios
    ListScenarios,
    /// Print the constants of a cell preset as JSON
    DumpParams(DumpArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Heart config file (JSON). Defaults to the built-in 33-node heart.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario applied on top of the config.
    #[arg(long, value_parser = parse_scenario)]
    scenario: Option<ScenarioName>,
    #[arg(long)]
    duration_ms: Option<f64>,
    #[arg(long, default_value_t = 0.0005)]
    dt_ms: f64,
    /// Keep every Nth sample in the trace CSVs.
    #[arg(long, default_value_t = 20)]
    decimation: usize,
    /// Coupling mode override: uoa (relayed reaction-diffusion) or oxford
    /// (always-on delayed sum).
    #[arg(long, value_enum)]
    coupling: Option<CouplingArg>,
    #[arg(long, value_enum, default_value_t = IntegratorArg::Rk4)]
    integrator: IntegratorArg,
    /// Output directory for trace.csv, locations.csv, activation.csv and
    /// manifest.json.
    #[arg(long, default_value = "out")]
    output: PathBuf,
    /// Re-run a previous run's manifest byte-identically (other input
    /// flags are rejected).
    #[arg(long)]
    from_manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CouplingArg {
    Uoa,
    Oxford,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegratorArg {
    Rk4,
    Euler,
}

#[derive(Args)]
struct RestitutionArgs {
    #[arg(long, value_enum)]
    preset: PresetArg,
    #[arg(long)]
    bcl_start: f64,
    #[arg(long)]
    bcl_end: f64,
    #[arg(long)]
    bcl_step: f64,
    #[arg(long, default_value_t = 10)]
    beats: usize,
    /// Pairing protocol; defaults to first-beat for the unstable baseline
    /// preset and steady-state otherwise.
    #[arg(long, value_enum)]
    protocol: Option<ProtocolArg>,
    #[arg(long, default_value = "out")]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Uoa,
    StonyBrook,
    Oxford,
}

impl PresetArg {
    fn variant(self) -> CellVariant {
        match self {
            PresetArg::Uoa => CellVariant::Uoa,
            PresetArg::StonyBrook => CellVariant::StonyBrook2008,
            PresetArg::Oxford => CellVariant::OxfordVxOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Steady,
    FirstBeat,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long, value_enum)]
    preset: PresetArg,
}

/// Everything needed to reproduce a run byte-identically.
#[derive(Serialize, Deserialize)]
struct RunManifest {
    schema_version: u32,
    tool_version: String,
    scenario: Option<String>,
    settings: SimSettings,
    config_hash: String,
    outputs: Vec<String>,
    config: HeartConfig,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Commands::Run(args) => cmd_run(args),
        Commands::Restitution(args) => cmd_restitution(args),
        Commands::ListScenarios => cmd_list_scenarios(),
        Commands::DumpParams(args) => cmd_dump_params(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_config(path: &Path) -> Result<HeartConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    HeartConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn resolve_run(args: &RunArgs) -> Result<(HeartConfig, SimSettings, Option<String>)> {
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => default_heart(),
    };
    let scenario_name = match args.scenario {
        Some(parsed) => {
            config = apply_scenario(&config, &Scenario::named(parsed))?;
            Some(parsed.as_str().to_string())
        }
        None => None,
    };
    if let Some(mode) = args.coupling {
        config.coupling_mode = match mode {
            CouplingArg::Uoa => heartsim::network::CouplingMode::UoaHK,
            CouplingArg::Oxford => heartsim::network::CouplingMode::OxfordGK,
        };
    }
    let duration_ms = match args.duration_ms {
        Some(d) if d > 0.0 => d,
        Some(_) => usage_error("--duration-ms must be positive"),
        None => usage_error("--duration-ms is required (unless --from-manifest)"),
    };
    let settings = SimSettings {
        dt_ms: args.dt_ms,
        duration_ms,
        record_decimation: args.decimation,
        integrator: match args.integrator {
            IntegratorArg::Rk4 => Integrator::Rk4,
            IntegratorArg::Euler => Integrator::Euler,
        },
        record_path_ta: false,
    };
    Ok((config, settings, scenario_name))
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let (config, settings, scenario) = match &args.from_manifest {
        Some(path) => {
            if args.config.is_some() || args.scenario.is_some() || args.duration_ms.is_some() {
                usage_error("--from-manifest replaces --config/--scenario/--duration-ms");
            }
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading manifest {}", path.display()))?;
            let manifest: RunManifest = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            (manifest.config, manifest.settings, manifest.scenario)
        }
        None => resolve_run(&args)?,
    };

    let diags = validate_config(&config, Some(settings.dt_ms));
    for d in &diags {
        match d.severity {
            Severity::Error => eprintln!("config error: {}", d.message),
            Severity::Warning => eprintln!("config warning: {}", d.message),
        }
    }
    if has_errors(&diags) {
        bail!("configuration invalid");
    }

    let trace = simulate(&config, &settings)?;
    let report = activation_report(&trace);

    fs::create_dir_all(&args.output)
        .with_context(|| format!("creating {}", args.output.display()))?;
    let outputs = vec![
        "trace.csv".to_string(),
        "locations.csv".to_string(),
        "activation.csv".to_string(),
        "manifest.json".to_string(),
    ];
    fs::write(args.output.join("trace.csv"), trace.voltage_csv())?;
    fs::write(args.output.join("locations.csv"), trace.location_csv())?;
    fs::write(args.output.join("activation.csv"), activation_csv(&report))?;
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        scenario,
        settings,
        config_hash: format!("{:016x}", config.fingerprint()),
        outputs,
        config,
    };
    let mut manifest_json = serde_json::to_string_pretty(&manifest)?;
    manifest_json.push('\n');
    fs::write(args.output.join("manifest.json"), manifest_json)?;

    for row in &report {
        if let Some(t) = row.first_q2_entry_ms {
            println!(
                "{}: first depolarisation {t:.3} ms, {} total",
                row.node_id, row.q2_entry_count
            );
        } else {
            println!("{}: quiescent", row.node_id);
        }
    }
    println!("wrote {}", args.output.display());
    Ok(())
}

fn cmd_restitution(args: RestitutionArgs) -> Result<()> {
    if args.bcl_step <= 0.0 || args.bcl_end < args.bcl_start {
        usage_error("empty cycle-length range");
    }
    let mut bcls = Vec::new();
    let mut bcl = args.bcl_start;
    while bcl <= args.bcl_end + 1e-9 {
        bcls.push(bcl);
        bcl += args.bcl_step;
    }
    let params = CellParams::preset(args.preset.variant());
    let protocol = match args.protocol {
        Some(ProtocolArg::Steady) => RestitutionProtocol::SteadyState,
        Some(ProtocolArg::FirstBeat) => RestitutionProtocol::FirstBeat,
        None => match args.preset {
            PresetArg::StonyBrook => RestitutionProtocol::FirstBeat,
            _ => RestitutionProtocol::SteadyState,
        },
    };
    let result = restitution_curve(&params, &bcls, args.beats, protocol)?;
    for (bcl, reason) in &result.skipped {
        eprintln!("skipped cycle length {bcl} ms: {reason}");
    }
    fs::create_dir_all(&args.output)?;
    let path = args.output.join("restitution.csv");
    fs::write(&path, restitution_csv(&result))?;
    println!("{} points -> {}", result.points.len(), path.display());
    Ok(())
}

fn cmd_list_scenarios() -> Result<()> {
    let mut names: Vec<_> = ScenarioName::ALL.into_iter().collect();
    names.sort_by_key(|n| n.as_str());
    for name in names {
        println!("{:<28} {}", name.as_str(), name.description());
    }
    Ok(())
}

fn cmd_dump_params(args: DumpArgs) -> Result<()> {
    let params = CellParams::preset(args.preset.variant());
    #[derive(Serialize)]
    struct Dump {
        membrane_composition: &'static str,
        flow_table: &'static str,
        params: CellParams,
    }
    let dump = Dump {
        membrane_composition: match args.preset {
            PresetArg::Oxford => "v = v_x (v_y, v_z discarded)",
            _ => "v = v_x - v_y + v_z",
        },
        flow_table: "dv/dt = alpha[loc][var] * v; stimulated adds beta * v_in; \
                     plateau scales v_y (and v_x when enabled) by f(theta)",
        params,
    };
    println!("{}", serde_json::to_string_pretty(&dump)?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips() {
        let config = default_heart();
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            scenario: Some("normal".to_string()),
            settings: SimSettings::with_duration(100.0),
            config_hash: format!("{:016x}", config.fingerprint()),
            outputs: vec!["trace.csv".into()],
            config: config.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back.config, config);
        assert_eq!(back.settings.duration_ms, 100.0);
    }

    #[test]
    fn scenario_names_parse() {
        for name in ScenarioName::ALL {
            assert_eq!(ScenarioName::parse(name.as_str()), Some(name));
        }
        assert_eq!(ScenarioName::parse("nope"), None);
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use porous_city::mesh::{parse_msh, write_msh, BoundaryTag, MshVersion};
use porous_city::pipeline::{run_scenario, PipelineError};
use porous_city::scenario::{
    check_unit_annotations, load_mesh, CityKind, ConfigError, ScenarioConfig, SHIPPED_SCENARIO,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "porous-city", version, about = "Traffic, emissions, wind and pollution in a porous city")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline for one scenario.
    Run {
        /// Scenario TOML; the shipped city scenario when omitted.
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        scenario: Option<City>,
        /// Speed limit U_max [km/h].
        #[arg(long)]
        speed_limit: Option<f64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Final time [h].
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Skip VTK output.
        #[arg(long)]
        no_vtk: bool,
    },
    /// Check a scenario and print it normalized.
    Validate { config: Option<PathBuf> },
    #[command(subcommand)]
    Mesh(MeshCommand),
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Print node, triangle, tag and zone counts of an MSH file.
    Info { file: PathBuf },
    /// Write the synthetic city mesh of a scenario.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
        /// Write MSH 2.2 instead of 4.1.
        #[arg(long)]
        legacy: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum City {
    Dense,
    Disperse,
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, ConfigError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            check_unit_annotations(&text)?;
            ScenarioConfig::from_toml_str(&text)
        }
        None => ScenarioConfig::from_toml_str(SHIPPED_SCENARIO),
    }
}

fn config_failure(e: ConfigError) -> ExitCode {
    eprintln!("config error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            scenario,
            speed_limit,
            out,
            t_end,
            threads,
            no_vtk,
        } => {
            let mut cfg = match load_config(config.as_deref()) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            if let Some(s) = scenario {
                cfg.scenario.city = match s {
                    City::Dense => CityKind::Dense,
                    City::Disperse => CityKind::Disperse,
                };
            }
            if let Some(u) = speed_limit {
                cfg.traffic.u_max = u;
            }
            if let Some(o) = out {
                cfg.output.dir = o;
            }
            if let Some(t) = t_end {
                cfg.time.t_end = t;
            }
            if let Some(n) = threads {
                cfg.scenario.threads = n;
            }
            if no_vtk {
                cfg.output.vtk = false;
            }
            match run_scenario(&cfg) {
                Ok(outcome) => {
                    let s = &outcome.summary;
                    println!("run {} -> {}", s.label, outcome.run_dir.display());
                    for (z, v) in s.zones.iter().zip(&s.time_means) {
                        println!("  Phi[{z}] = {v:.6e} kg/km^2");
                    }
                    match s.evacuation_time_h {
                        Some(t) => println!("  evacuation = {t:.4} h"),
                        None => println!("  evacuation = not reached"),
                    }
                    println!("  city wind speed = {:.4} km/h", s.city_wind_speed);
                    ExitCode::SUCCESS
                }
                Err(PipelineError::Config(e)) => config_failure(e),
                Err(e @ PipelineError::Stage { .. }) => {
                    eprintln!("{e}");
                    ExitCode::from(EXIT_STAGE)
                }
            }
        }
        Command::Validate { config } => {
            let cfg = match load_config(config.as_deref()).and_then(|c| c.validate().map(|_| c)) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            print!("{}", cfg.to_toml());
            println!("# U_max = {} km/h", cfg.traffic.u_max);
            println!("# label = {}", cfg.label());
            println!("# hash = {}", cfg.hash());
            ExitCode::SUCCESS
        }
        Command::Mesh(MeshCommand::Info { file }) => {
            let bytes = match std::fs::read(&file) {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", file.display());
                    return ExitCode::FAILURE;
                }
            };
            let mesh = match parse_msh(&bytes) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::FAILURE;
                }
            };
            println!("nodes {}", mesh.n_nodes());
            println!("triangles {}", mesh.n_triangles());
            for tag in BoundaryTag::ALL {
                let n = mesh.edges_with_tag(tag).count();
                if n > 0 {
                    println!("edges {} {n}", tag.as_str());
                }
            }
            for (k, name) in mesh.zone_names().iter().enumerate() {
                let n = mesh.triangle_zone().iter().filter(|&&z| z == k).count();
                println!("zone {name} {n}");
            }
            ExitCode::SUCCESS
        }
        Command::Mesh(MeshCommand::Synth {
            config,
            output,
            legacy,
        }) => {
            let cfg = match load_config(config.as_deref()) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            let (mesh, zones) = match load_mesh(&cfg) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::FAILURE;
                }
            };
            let version = if legacy { MshVersion::V22 } else { MshVersion::V41 };
            let text = write_msh(&mesh.with_zones(&zones), version);
            if let Err(e) = std::fs::write(&output, text) {
                eprintln!("cannot write {}: {e}", output.display());
                return ExitCode::FAILURE;
            }
            println!("wrote {} ({} nodes, {} triangles)", output.display(), mesh.n_nodes(), mesh.n_triangles());
            ExitCode::SUCCESS
        }
    }
}

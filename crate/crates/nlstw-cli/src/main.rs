//! `nlstw`: travelling waves of defocusing NLS from the command line.
//!
//! Each subcommand reads a config (see [`config`]), writes CSV/JSON files to
//! the output directory and prints its JSON report on stdout. Failures print
//! `{"error": {...}}` on stderr and exit with status 1 (model errors) or 2
//! (config and I/O errors).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use commands::{Context, Failure};
use config::{Config, ConfigError};
use output::{obj, to_text, OutDir};

const BUILTIN_CONFIGS: &[(&str, &str)] = &[
    ("gp", include_str!("../configs/gp.cfg")),
    ("cqs1", include_str!("../configs/cqs1.cfg")),
    ("cqs2_36", include_str!("../configs/cqs2_36.cfg")),
    ("cqs2_60", include_str!("../configs/cqs2_60.cfg")),
    ("cqs3", include_str!("../configs/cqs3.cfg")),
    ("degenerate", include_str!("../configs/degenerate.cfg")),
    ("degenerate_perturbed", include_str!("../configs/degenerate_perturbed.cfg")),
    ("saturated_exponential", include_str!("../configs/saturated_exponential.cfg")),
    ("saturated_rational", include_str!("../configs/saturated_rational.cfg")),
    ("cubic_quintic", include_str!("../configs/cubic_quintic.cfg")),
];

#[derive(Parser)]
#[command(name = "nlstw", version, about = "Travelling waves of defocusing NLS with nonzero conditions at infinity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file, or `builtin:NAME`.
    #[arg(long, global = true, default_value = "builtin:gp")]
    config: String,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random perturbations (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Wave profile at `[profile] c`.
    Profile,
    /// Energy-momentum diagram over `[diagram] c_min..c_max`.
    Diagram,
    /// Kink energy and `dP/dc` at `c = 0`.
    Kink,
    /// Existence and stability verdict at `[classify] c`.
    Classify,
    /// Negative directions, continuum edge and unstable eigenvalue.
    Spectrum,
    /// Time evolution of a perturbed wave.
    Evolve,
    /// Distance probes around a wave.
    Distances,
    /// Print the canonical form of the config.
    Config,
    /// List builtin configs.
    Builtins,
}

fn load(spec: &str) -> Result<Config, Failure> {
    let text = match spec.strip_prefix("builtin:") {
        Some(name) => BUILTIN_CONFIGS.iter().find(|b| b.0 == name).map(|b| b.1.to_string()).ok_or_else(|| {
            Failure::Config(ConfigError { line: 0, key: None, message: format!("unknown builtin config {name:?}") })
        })?,
        None => std::fs::read_to_string(spec)?,
    };
    Config::parse(&text).map_err(Failure::Config)
}

fn error_json(f: &Failure) -> (Value, u8) {
    match f {
        Failure::Config(e) => (
            obj([
                ("kind", "config".into()),
                ("line", e.line.into()),
                ("key", e.key.clone().map_or(Value::Null, Value::from)),
                ("message", e.message.clone().into()),
            ]),
            2,
        ),
        Failure::Io(e) => (obj([("kind", "io".into()), ("message", e.to_string().into())]), 2),
        Failure::Model(e) => {
            use nlstw::Error::*;
            let kind = match e {
                InvalidModel(_) => "invalid_model",
                Domain(_) => "domain",
                NoWave(_) => "no_wave",
                NoKink(_) => "no_kink",
                InfiniteEnergy(_) => "infinite_energy",
                TailUnderflow(_) => "tail_underflow",
                Quadrature(_) => "quadrature",
                Spectrum(_) => "spectrum",
                Dynamics(_) => "dynamics",
                Vanishing(_) => "vanishing",
                Fit(_) => "fit",
            };
            (obj([("kind", kind.into()), ("message", e.to_string().into())]), 1)
        }
    }
}

fn run(cli: &Cli) -> Result<Option<Value>, Failure> {
    match cli.command {
        Command::Builtins => {
            for (name, _) in BUILTIN_CONFIGS {
                println!("{name}");
            }
            return Ok(None);
        }
        Command::Config => {
            print!("{}", load(&cli.config)?.serialize());
            return Ok(None);
        }
        _ => {}
    }
    faer::set_global_parallelism(faer::Par::Seq);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Io(std::io::Error::other(e.to_string())))?;
    }
    let cfg = load(&cli.config)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(cfg.str("", "out").unwrap_or("nlstw-out")));
    let ctx = Context { cfg: &cfg, seed: cli.seed.or(cfg.int("", "seed")).unwrap_or(0), out: OutDir::create(&out)? };
    let r = match cli.command {
        Command::Profile => commands::profile(&ctx),
        Command::Diagram => commands::diagram_cmd(&ctx),
        Command::Kink => commands::kink(&ctx),
        Command::Classify => commands::classify(&ctx),
        Command::Spectrum => commands::spectrum(&ctx),
        Command::Evolve => commands::evolve_cmd(&ctx),
        Command::Distances => commands::distances(&ctx),
        Command::Config | Command::Builtins => unreachable!(),
    }?;
    Ok(Some(r))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Some(r)) => {
            print!("{}", to_text(&r));
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(f) => {
            let (e, code) = error_json(&f);
            eprint!("{}", to_text(&obj([("error", e)])));
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_configs_parse_and_are_canonical() {
        for (name, text) in BUILTIN_CONFIGS {
            let cfg = Config::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            cfg.model_spec().unwrap_or_else(|e| panic!("{name}: {e}"));
            let canon = cfg.serialize();
            assert_eq!(Config::parse(&canon).unwrap(), cfg, "{name}");
        }
    }
}

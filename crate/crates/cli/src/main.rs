//! Experiment harness for certified-robustness studies.
//!
//! Subcommands: `nfr` (hypercube hardness), `cover` (1-NN sample
//! complexity), `train`, `scale` (data/compute scaling), `pca`, `smooth`
//! (randomized smoothing), `nndist` (distance profiles). Every run writes
//! `rows.csv`, `summary.json` and a `config.echo` that reproduces it.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 runtime/numeric failure.

mod commands;
mod config;
mod data;
mod output;

use config::{CliError, RunConfig};

const USAGE: &str = "\
usage: lipbench <command> [--key value]... [--config FILE]

commands:
  nfr      averaged adversarial accuracy on the hypercube family
  cover    1-nearest-neighbor robust accuracy on a margin distribution
  train    train one Lipschitz MLP and evaluate certified accuracy
  scale    data-scaling (or compute-scaling) sweep
  pca      principal-component variance fractions and projections
  smooth   randomized-smoothing certified radii
  nndist   nearest-neighbor distance profile and intrinsic dimension

`lipbench <command> --help-keys` lists the command's keys.
Flags mirror config-file keys one to one; later flags override --config.
";

fn dispatch(command: &str, args: &[String]) -> Result<(), CliError> {
    // `--help-keys` prints the schema instead of running
    let wants_keys = args.iter().any(|a| a == "--help-keys");
    let parse_and_run = |specs: &[config::ParamSpec],
                         name: &'static str,
                         run: &dyn Fn(&RunConfig) -> Result<(), CliError>|
     -> Result<(), CliError> {
        if wants_keys {
            println!("keys for `{name}`:");
            for s in specs {
                let default = s.default.map(|d| format!(" (default {d})")).unwrap_or_default();
                println!("  --{:<14} {}{}", s.key, s.help, default);
            }
            return Ok(());
        }
        let cfg = RunConfig::parse(name, specs, args)?;
        run(&cfg)
    };

    match command {
        "nfr" => parse_and_run(commands::nfr::SPECS, "nfr", &commands::nfr::run),
        "cover" => parse_and_run(commands::cover::SPECS, "cover", &commands::cover::run),
        "train" => parse_and_run(&commands::train::specs(), "train", &commands::train::run),
        "scale" => parse_and_run(&commands::scale::specs(), "scale", &commands::scale::run),
        "pca" => parse_and_run(commands::pca::SPECS, "pca", &commands::pca::run),
        "smooth" => parse_and_run(&commands::smooth::specs(), "smooth", &commands::smooth::run),
        "nndist" => parse_and_run(commands::nndist::SPECS, "nndist", &commands::nndist::run),
        other => Err(CliError::Usage(format!("unknown command {other:?}\n\n{USAGE}"))),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some((command, rest)) = args.split_first() else {
        eprintln!("{USAGE}");
        std::process::exit(2);
    };
    if command == "--help" || command == "-h" || command == "help" {
        println!("{USAGE}");
        return;
    }
    match dispatch(command, rest) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}

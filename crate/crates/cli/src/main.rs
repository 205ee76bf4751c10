use clap::Parser;
use l1phase_cli::{run, CliError, Command, ConfigFile};

/// Top-level entry: either a subcommand or `--config` to re-run an emitted
/// configuration file.
#[derive(Debug, Parser)]
#[command(
    name = "l1phase",
    about = "Phase-transition analysis of L1 reconstruction under correlated compression matrices",
    version
)]
struct Cli {
    /// Re-run a previously emitted config file.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Override the output directory when re-running a config.
    #[arg(long, global = true)]
    out_override: Option<String>,
    #[command(subcommand)]
    command: Option<Command>,
}

fn load_config(path: &str, out_override: Option<String>) -> Result<Command, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config '{path}': {e}")))?;
    let file: ConfigFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("bad config '{path}': {e}")))?;
    let mut command = file.command;
    if let Some(dir) = out_override {
        let run = match &mut command {
            Command::Threshold(a) => &mut a.run,
            Command::Sweep(a) => &mut a.run,
            Command::Experiment(a) => &mut a.run,
            Command::Instance(a) => &mut a.run,
            Command::Recover(a) => &mut a.run,
            Command::RrCheck(a) => &mut a.run,
        };
        run.out = Some(dir);
    }
    Ok(command)
}

fn main() {
    let cli = Cli::parse();
    let command = match (cli.config, cli.command) {
        (Some(path), None) => match load_config(&path, cli.out_override) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {}", e.message());
                std::process::exit(e.exit_code());
            }
        },
        (None, Some(c)) => c,
        (Some(_), Some(_)) => {
            eprintln!("error: give either a subcommand or --config, not both");
            std::process::exit(2);
        }
        (None, None) => {
            eprintln!("error: a subcommand or --config is required (try --help)");
            std::process::exit(2);
        }
    };
    if let Err(e) = run(command) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}

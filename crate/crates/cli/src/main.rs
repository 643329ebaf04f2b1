#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use run::{Command, Failure};

#[derive(Parser)]
#[command(name = "wgspec", version, about = "Spectral analysis of twisted and bent waveguides")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set profile.beta1=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Thm12,
    Thm13,
    Thm14,
    Ode,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cross-section mesh and threshold data.
    Section(Common),
    /// Fiber band functions over the momentum grid.
    Bands(Common),
    /// Sampled effective potential.
    Potential(Common),
    /// Bound states of the effective 1D operator.
    Bound1d(Common),
    /// Truncated-tube spectrum and discrete-eigenvalue detection.
    Tube(Common),
    /// Existence certificates.
    Certify {
        #[arg(value_enum)]
        kind: Kind,
        #[command(flatten)]
        common: Common,
    },
    /// Bound-state count against ε.
    ThinSweep(Common),
    /// Semiclassical slope table.
    Asympt(Common),
    /// Runs every acceptance scenario.
    VerifyAll(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Section(c) => (Command::Section, c),
        Cmd::Bands(c) => (Command::Bands, c),
        Cmd::Potential(c) => (Command::Potential, c),
        Cmd::Bound1d(c) => (Command::Bound1d, c),
        Cmd::Tube(c) => (Command::Tube, c),
        Cmd::Certify { kind, common } => (
            match kind {
                Kind::Thm12 => Command::Thm12,
                Kind::Thm13 => Command::Thm13,
                Kind::Thm14 => Command::Thm14,
                Kind::Ode => Command::Ode,
            },
            common,
        ),
        Cmd::ThinSweep(c) => (Command::ThinSweep, c),
        Cmd::Asympt(c) => (Command::Asympt, c),
        Cmd::VerifyAll(c) => (Command::VerifyAll, c),
    };
    match go(cmd, &common) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("wgspec: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}

fn go(cmd: Command, common: &Common) -> Result<String, Failure> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Failure::config(format!("{}: {e}", common.config.display())))?;
    let cfg = config::load(&text, &common.set).map_err(Failure::config)?;
    run::execute(cmd, &cfg)
}

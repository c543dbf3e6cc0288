use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use schmidt::config::{Mode, Overrides};
use schmidt::harness::{self, HarnessError};

#[derive(Parser)]
#[command(name = "schmidt", version, about = "Schmidt games with certified winning strategies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Certified,
    Greedy,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, env = "SCHMIDT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Play every run in a config file and write transcripts and summaries.
    Play {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Lacunarity, Jordan and Kronecker data of the configured sequence.
    AnalyzeSeq {
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo decay and dimension estimates for the configured support.
    EstimateDecay {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4096)]
        trials: usize,
    },
    /// Rational relations or best approximations of the configured A.
    Badapprox {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        count: usize,
    },
    /// Replay a transcript: moves, certificates and the recorded summary.
    Verify {
        transcript: PathBuf,
    },
}

fn fail(e: HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Play { common, out, mode, epochs } => {
            let over = Overrides {
                seed: Some(common.seed),
                mode: mode.map(|m| match m {
                    ModeArg::Certified => Mode::Certified,
                    ModeArg::Greedy => Mode::Greedy,
                }),
                epochs,
                horizon: common.horizon,
            };
            match harness::cmd_play(&common.config, out.as_deref(), &over) {
                Ok(summaries) => {
                    for s in &summaries {
                        println!("{}", serde_json::to_string(s).expect("summary serializes"));
                        if let Some(t) = s.wall_time {
                            eprintln!("{}: {:.2?}", s.name.as_deref().unwrap_or("run"), t);
                        }
                    }
                    ExitCode::from(harness::batch_exit_code(&summaries) as u8)
                }
                Err(e) => fail(e),
            }
        }
        Command::AnalyzeSeq { common } => report(harness::cmd_analyze_seq(&common.config, common.horizon.unwrap_or(60))),
        Command::EstimateDecay { common, trials } => report(harness::cmd_estimate_decay(&common.config, common.seed, trials)),
        Command::Badapprox { common, count } => report(harness::cmd_badapprox(&common.config, count)),
        Command::Verify { transcript } => match harness::cmd_verify(&transcript) {
            Ok(r) => {
                print!("{}", r.render());
                if r.ok {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(harness::EXIT_LOST as u8)
                }
            }
            Err(e) => fail(e),
        },
    }
}

fn report(r: Result<String, HarnessError>) -> ExitCode {
    match r {
        Ok(s) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wavetails::cli::{self, CliError, FitOverrides, IdentityArgs, Outcome};
use wavetails::duhamel::IdentitySweep;

#[derive(Parser)]
#[command(name = "wavetails", version, about = "Late-time tails of spherical semilinear waves")]
struct Args {
    /// Worker threads for concurrent runs and the solver's spatial loop.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = cli::OUT_ENV, default_value = "wavetails-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form tail prediction for a config.
    Predict {
        #[arg(long)]
        config: PathBuf,
    },
    /// Master-identity sweep (quadrature vs closed form).
    Identity {
        /// Comma-separated dimension indices l; empty for an empty sweep.
        #[arg(long, default_value = "1,2,3")]
        l: String,
        /// n runs over l+2 ..= l+2+n_span.
        #[arg(long, default_value_t = 6)]
        n_span: u32,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        threshold: f64,
    },
    /// First iterate by Duhamel quadrature at `t:r` points.
    Duhamel {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated `t:r` pairs.
        #[arg(long, default_value = "50:2,100:2,200:2,400:2")]
        points: String,
    },
    /// Evolve the config at +-eps plus the free reference; write observer CSVs.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Fit the series written by `evolve`.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        tol_gamma: Option<f64>,
        #[arg(long)]
        tol_amp: Option<f64>,
    },
    /// Predict, evolve, fit and compare.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        tol_gamma: Option<f64>,
        #[arg(long)]
        tol_amp: Option<f64>,
    },
}

fn run(args: Args) -> Result<Outcome, CliError> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let out = &args.out;
    match args.command {
        Command::Predict { config } => cli::cmd_predict(&config),
        Command::Identity {
            l,
            n_span,
            samples,
            seed,
            threshold,
        } => {
            let l_values = l
                .split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(|x| x.parse::<u32>().map_err(|_| CliError::Usage(format!("bad dimension index {x:?}"))))
                .collect::<Result<_, _>>()?;
            let sweep = IdentitySweep {
                l_values,
                n_span,
                samples,
                seed,
            };
            cli::cmd_identity(&IdentityArgs { sweep, threshold }, out)
        }
        Command::Duhamel { config, points } => cli::cmd_duhamel(&config, &cli::parse_points(&points)?, out),
        Command::Evolve { config, eps } => cli::cmd_evolve(&config, eps.as_deref(), out),
        Command::Fit {
            config,
            eps,
            tol_gamma,
            tol_amp,
        } => cli::cmd_fit(&config, eps.as_deref(), out, &FitOverrides { tol_gamma, tol_amp }),
        Command::Verify {
            config,
            eps,
            tol_gamma,
            tol_amp,
        } => cli::cmd_verify(&config, eps.as_deref(), out, &FitOverrides { tol_gamma, tol_amp }),
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(o) => {
            let text = serde_json::to_string_pretty(&o.report).expect("report serializes");
            let _ = writeln!(std::io::stdout(), "{text}");
            if o.report.get("verdict").and_then(|v| v.as_str()) == Some("degenerate") {
                eprintln!("warning: the predicted leading amplitude vanishes; the measured tail belongs to the next order");
            }
            ExitCode::from(o.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

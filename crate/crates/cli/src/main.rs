use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rcm_oze_cli::commands::{self, Outputs};
use rcm_oze_cli::error::exit;
use rcm_oze_cli::{validate, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "rcm-oze", version, about = "Random connection model and Ornstein-Zernike toolkit")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate pair connectedness at the probes or on radial bins.
    Pairconn,
    /// Estimate the size distribution of the origin's cluster.
    ClusterDist,
    /// Solve the Ornstein-Zernike equation for Q from a P file.
    Oze {
        /// Estimate table, grid CSV or binary grid holding P.
        #[arg(long)]
        input: PathBuf,
        /// Solve at t = 0, which returns P unchanged.
        #[arg(long)]
        zero_intensity: bool,
    },
    /// Assemble the series coefficients p_n and q_n.
    Expand,
    /// Run the validation suite.
    Validate,
    /// Draw one realisation of the model.
    Sample,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.output.directory = o;
    }
    cfg.validate()?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let dir = cfg.output.directory.clone();
    let written = match cli.command {
        Command::Pairconn => commands::pairconn(&cfg, &dir)?,
        Command::ClusterDist => commands::cluster_dist(&cfg, &dir)?,
        Command::Oze { input, zero_intensity } => {
            let (written, r) = commands::oze(&cfg, &input, zero_intensity, &dir)?;
            println!(
                "t = {}: residual {:e}, int Q = {}, mean cluster size {}",
                r.t, r.residual, r.integral_q, r.mean_cluster_size
            );
            written
        }
        Command::Expand => {
            let (written, r) = commands::expand(&cfg, &dir)?;
            for o in &r.orders {
                println!(
                    "n = {}: {} graphs, recursion residual {:e}, sup p {:.6}, sup q {:.6}",
                    o.order, o.graph_count, o.recursion_relative, o.sup_p, o.sup_q
                );
            }
            written
        }
        Command::Validate => {
            let report = validate::run(&cfg)?;
            let mut out = Outputs::new(&dir)?;
            let json = report.to_json();
            out.write("validate.json", |w| {
                std::io::Write::write_all(w, json.as_bytes()).map_err(|e| CliError::io(&dir, e))
            })?;
            let summary = report.summary();
            out.write("validate.txt", |w| {
                std::io::Write::write_all(w, summary.as_bytes()).map_err(|e| CliError::io(&dir, e))
            })?;
            print!("{summary}");
            return Ok(report.exit_code());
        }
        Command::Sample => commands::sample(&cfg, &dir)?,
    };
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(exit::OK)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

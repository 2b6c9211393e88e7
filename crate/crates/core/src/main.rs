use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coopd2d::config::{load_config, ExperimentSpec};
use coopd2d::runner::{self, with_threads};
use coopd2d::verify::{self, VerifyOptions};
use coopd2d::Result;

#[derive(Parser)]
#[command(version, about = "Cooperative D2D relaying: pairing and time-sharing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write CSV results.
    Run(Common),
    /// Run the acceptance checks and print a pass/fail report.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Scenarios per sweep point for the trend checks.
        #[arg(long)]
        scenarios: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines; reference values when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Master seed, overriding `seed`.
    #[arg(long, env = "COOPD2D_SEED")]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => load_config(path)?,
            None => ExperimentSpec::default(),
        };
        if let Some(seed) = self.seed {
            spec = spec.with_seed(seed);
        }
        if let Some(out) = &self.out {
            spec = spec.with_output_dir(out);
        }
        Ok(spec)
    }
}

fn run(common: &Common) -> Result<bool> {
    let spec = common.spec()?;
    let out = runner::run(&spec, common.threads)?;
    print!("{}", runner::summary_text(&out.points));
    for file in &out.files {
        println!("wrote {}", file.display());
    }
    Ok(true)
}

fn verify(common: &Common, scenarios: Option<usize>) -> Result<bool> {
    let spec = common.spec()?;
    let mut opts = VerifyOptions::from_spec(&spec);
    if let Some(k) = scenarios {
        opts.trend_scenarios = k;
    }
    let report = with_threads(common.threads, || verify::verify(&opts))?;
    for c in &report.criteria {
        println!("{c}");
    }
    for (n, gap) in &report.auction_gaps {
        println!("auction gap to optimal at N={n}: {:.2}%", 100.0 * gap);
    }
    println!(
        "certifier fault injection: {} (witness {:?})",
        if report.fault_injection_caught { "caught" } else { "MISSED" },
        report.fault_witness
    );
    if common.out.is_some() || common.config.is_some() {
        fs::create_dir_all(&spec.output_dir)?;
        let path = spec.output_dir.join("verify.csv");
        fs::write(&path, verify::report_csv(&report.criteria)?)?;
        println!("wrote {}", path.display());
    }
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(common) => run(common),
        Command::Verify { common, scenarios } => verify(common, *scenarios),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

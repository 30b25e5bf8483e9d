use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use topoprep::experiment::TimeList;
use topoprep_client::settings::{parse_floats, parse_times};
use topoprep_client::{connect, print_checks, write_file, write_run, Settings};
use topoprep_service::api::{FiguresRequest, ScanRequest, SimulateRequest};

#[derive(Parser)]
#[command(name = "topoprep", version, about = "Run topoprep experiments through the topoprep service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// One interpolation run with its instantaneous adiabaticity curve
    Simulate,
    /// Parameter scan over the configured family (and perturbed ground states with --eps)
    Scan,
    /// Exact Schrieffer-Wolff effective Hamiltonian and order diagnostics
    Sweff,
    /// Flux tomography of the reference state
    Tomography,
    /// Figure-ready CSV files
    Figures,
    /// Shipped categories and their validation status
    Categories,
}

#[derive(Args)]
struct Flags {
    /// toric, doubled_semion, doubled_fibonacci or majorana
    #[arg(long, global = true)]
    model: Option<String>,
    /// theta, disc_pm or disc_pm_x
    #[arg(long, global = true)]
    family: Option<String>,
    /// total time, or a comma-separated list
    #[arg(long = "T", global = true, value_parser = parse_times)]
    total_time: Option<TimeList>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// disc: points per axis; theta: number of angles; majorana: longest chain
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// perturbation strength
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// service URL; an in-process service is started when absent
    #[arg(long, global = true)]
    server: Option<String>,
    /// TOML file with the same keys as the long flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// perturbation direction `x,y,z` for sweff
    #[arg(long, global = true, value_parser = parse_floats::<3>)]
    field: Option<[f64; 3]>,
    /// simulate point: `theta` or `a,b`
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    point: Option<Vec<f64>>,
    /// plus, minus, or both (scan only)
    #[arg(long, global = true)]
    sign: Option<String>,
    /// figure id, repeatable
    #[arg(long = "figure", global = true)]
    figures: Option<Vec<String>>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

impl Flags {
    fn settings(&self) -> Settings {
        Settings {
            model: self.model.clone(),
            family: self.family.clone(),
            total_time: self.total_time.clone(),
            dt: self.dt,
            grid: self.grid,
            eps: self.eps,
            out: self.out.clone(),
            server: self.server.clone(),
            field: self.field,
            point: self.point.clone(),
            sign: self.sign.clone(),
            figures: self.figures.clone(),
            threads: self.threads,
            samples: None,
            probes: None,
        }
    }
}

fn announce(files: &[PathBuf]) {
    for f in files {
        eprintln!("wrote {}", f.display());
    }
}

async fn execute(cli: Cli) -> Result<bool> {
    let file = match &cli.flags.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let s = cli.flags.settings().over(file);
    let client = connect(s.server.as_deref()).await?;
    let dir = s.out_dir();
    match cli.command {
        Command::Simulate => {
            let resp = client.simulate(&SimulateRequest { config: s.simulate_config()? }).await?;
            print_checks(&resp.output.checks);
            announce(&write_run(&resp, &dir)?);
            Ok(resp.passed)
        }
        Command::Scan => {
            let resp = client.scan(&ScanRequest { config: s.scan_config()?, eps: s.eps }).await?;
            print_checks(resp.output.checks.iter().chain(&resp.perturbed_checks));
            announce(&write_run(&resp, &dir)?);
            Ok(resp.passed)
        }
        Command::Sweff => {
            let resp = client.sweff(&s.sweff_request()?).await?;
            print_checks(&resp.checks);
            let json = serde_json::to_string_pretty(&resp)?;
            announce(&[write_file(&dir, "sweff.csv", &resp.csv)?, write_file(&dir, "sweff.json", &json)?]);
            Ok(resp.passed)
        }
        Command::Tomography => {
            let resp = client.tomography(&s.tomography_request()?).await?;
            print_checks(&resp.checks);
            let json = serde_json::to_string_pretty(&resp)?;
            announce(&[write_file(&dir, "tomography.csv", &resp.run.csv)?, write_file(&dir, "tomography.json", &json)?]);
            Ok(resp.passed)
        }
        Command::Figures => {
            let req = FiguresRequest { config: s.scan_config()?, figures: s.figures.clone().unwrap_or_default() };
            let resp = client.figures(&req).await?;
            print_checks(&resp.output.checks);
            let mut files = Vec::new();
            for (name, body) in &resp.files {
                files.push(write_file(&dir, name, body)?);
            }
            announce(&files);
            Ok(resp.passed)
        }
        Command::Categories => {
            let cats = client.categories().await?;
            for c in &cats {
                println!("{} labels={:?} D={:.6} valid={}", c.name, c.labels, c.total_dim, c.valid);
            }
            Ok(cats.iter().all(|c| c.valid))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match rt.block_on(execute(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

//! HTTP client for the topoprep service and the pieces of the `topoprep`
//! command line that are worth testing without a process boundary.

pub mod client;
pub mod settings;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
pub use client::Client;
pub use settings::Settings;
use topoprep::experiment::{perturbed_csv, CheckOutcome};
use topoprep_service::api::RunResponse;

/// Connects to `server`, or starts the service in-process on a free local port.
pub async fn connect(server: Option<&str>) -> Result<Client> {
    match server {
        Some(url) => Ok(Client::new(url)),
        None => {
            let (addr, _task) = topoprep_service::spawn(([127, 0, 0, 1], 0).into()).await?;
            Ok(Client::new(format!("http://{addr}")))
        }
    }
}

pub fn print_checks<'a>(checks: impl IntoIterator<Item = &'a CheckOutcome>) {
    for c in checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

/// Writes the run files plus `perturbed.csv` when present.
pub fn write_run(resp: &RunResponse, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = resp.output.write_to(dir)?;
    if let Some(rows) = &resp.perturbed {
        let path = dir.join("perturbed.csv");
        fs::write(&path, perturbed_csv(rows))?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, body)?;
    Ok(path)
}

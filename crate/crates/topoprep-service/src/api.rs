//! Request and response bodies, and the blocking computations behind each route.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use topoprep::anyon_algebra::{validate_category, CategoryData, SHIPPED};
use topoprep::experiment::{
    figure_csv, perturbed_ground_comparison, run, sweff_report, tomography_run, CheckOutcome, ExperimentConfig, ModelName, PerturbedRow,
    ProbeKind, RunOutput, SwReport, TomographyRun, FIGURE_IDS,
};
use topoprep::levin_wen_probes::TOMOGRAPHY_TOL;
use topoprep::majorana_chain::{exact_parity_effective, write_parity_csv, ChainSpec, ParityEffectiveReport};
use topoprep::{Error, Result};

pub const SPECTRUM_TOL: f64 = 1e-8;
pub const ANGLE_TOL: f64 = 1e-6;
pub const PARITY_TOL: f64 = 1e-10;

fn check(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name: name.into(), passed, detail }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

pub fn health() -> Health {
    Health { status: "ok".into(), version: env!("CARGO_PKG_VERSION").into() }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CategorySummary {
    pub name: String,
    pub labels: Vec<String>,
    pub qdim: Vec<f64>,
    pub total_dim: f64,
    pub valid: bool,
    pub failed: Vec<String>,
}

pub fn categories() -> Result<Vec<CategorySummary>> {
    SHIPPED
        .iter()
        .map(|name| {
            let cat = CategoryData::shipped(name)?;
            let rep = validate_category(&cat)?;
            Ok(CategorySummary {
                name: cat.name.clone(),
                labels: cat.labels.clone(),
                qdim: cat.qdim.clone(),
                total_dim: cat.total_dim,
                valid: rep.all_passed(),
                failed: rep.failed().into_iter().map(String::from).collect(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateRequest {
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanRequest {
    pub config: ExperimentConfig,
    /// also compare perturbed ground states `H_top + eps H_triv` with the reference state
    #[serde(default)]
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResponse {
    pub passed: bool,
    pub output: RunOutput,
    #[serde(default)]
    pub perturbed: Option<Vec<PerturbedRow>>,
    #[serde(default)]
    pub perturbed_checks: Vec<CheckOutcome>,
}

/// One trajectory with its instantaneous adiabaticity curve.
pub fn simulate(req: SimulateRequest) -> Result<RunResponse> {
    let mut cfg = req.config;
    let points = cfg.grid().len() * cfg.total_time.values().len();
    if points != 1 {
        return Err(Error::Domain(format!("simulate takes one grid point and one total time, got {points} runs")));
    }
    if cfg.model != ModelName::Majorana && !cfg.probes.contains(&ProbeKind::Instant) {
        cfg.probes.push(ProbeKind::Instant);
    }
    let output = run(&cfg)?;
    Ok(RunResponse { passed: output.all_checks_passed(), output, perturbed: None, perturbed_checks: vec![] })
}

pub fn scan(req: ScanRequest) -> Result<RunResponse> {
    let output = run(&req.config)?;
    let (perturbed, perturbed_checks) = match req.eps {
        Some(eps) => {
            let rows = perturbed_ground_comparison(&req.config, eps, None)?;
            let bad: Vec<String> = rows
                .iter()
                .filter(|r| r.flag.is_none() && !(0.0..=1.0).contains(&r.overlap))
                .map(|r| format!("{:?}: {}", r.point, r.overlap))
                .collect();
            let c = check("perturbed overlaps lie in [0, 1]", bad.is_empty(), bad.join("; "));
            (Some(rows), vec![c])
        }
        None => (None, vec![]),
    };
    let passed = output.all_checks_passed() && perturbed_checks.iter().all(|c| c.passed);
    Ok(RunResponse { passed, output, perturbed, perturbed_checks })
}

fn default_field() -> [f64; 3] {
    [0.0, 0.0, -1.0]
}
fn default_eps() -> f64 {
    1e-3
}
fn default_l_max() -> usize {
    6
}
fn default_lengths() -> Vec<usize> {
    vec![4, 6, 8]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweffRequest {
    pub model: ModelName,
    /// perturbation `V = sum_j n . sigma_j` on lattice models
    #[serde(default = "default_field")]
    pub field: [f64; 3],
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_l_max")]
    pub l_max: usize,
    /// Majorana chain lengths
    #[serde(default = "default_lengths")]
    pub chain_lengths: Vec<usize>,
    /// transverse field of the unperturbed Majorana chain
    #[serde(default)]
    pub g: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweffResponse {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    pub lattice: Option<SwReport>,
    pub majorana: Vec<ParityEffectiveReport>,
    pub csv: String,
}

pub fn sweff(req: SweffRequest) -> Result<SweffResponse> {
    let mut checks = Vec::new();
    let mut csv = String::new();
    let (lattice, majorana) = match req.model.lattice_model() {
        Some(model) => {
            let r = sweff_report(model, req.field, req.eps, req.l_max)?;
            checks.push(check(
                "exact SW spectrum equals the perturbed cluster",
                r.spectrum_deviation < SPECTRUM_TOL,
                format!("max deviation {:.1e}", r.spectrum_deviation),
            ));
            if let Some(t) = &r.order_l {
                let lower = t.lower_orders.iter().map(|x| x.1).fold(0.0, f64::max);
                checks.push(check("orders below L are scalar", lower < SPECTRUM_TOL, format!("max traceless norm {lower:.1e}")));
                checks.push(check(
                    "order-L term is parallel to the self-energy term",
                    t.angle < ANGLE_TOL,
                    format!("angle {:.1e}, fitted constant {:.6}", t.angle, t.fitted_constant),
                ));
            }
            csv.push_str("k,exact_sw,direct\n");
            for (k, (a, b)) in r.exact_sw_spectrum.iter().zip(&r.direct_spectrum).enumerate() {
                csv.push_str(&format!("{k},{a:.15e},{b:.15e}\n"));
            }
            (Some(r), vec![])
        }
        None => {
            let rows: Vec<ParityEffectiveReport> =
                req.chain_lengths.iter().map(|&l| exact_parity_effective(&ChainSpec::open(l, req.g), req.eps, None)).collect::<Result<_>>()?;
            let parity = rows.iter().map(|r| r.parity_residual).fold(0.0, f64::max);
            let form = rows.iter().map(|r| r.gap_consistent_residual).fold(0.0, f64::max);
            checks.push(check("effective Hamiltonian is diagonal in parity", parity < PARITY_TOL, format!("max residual {parity:.1e}")));
            checks.push(check("((E0+E1)/2) I - (Delta/2) F reproduces the pair", form < SPECTRUM_TOL, format!("max residual {form:.1e}")));
            let mut buf = Vec::new();
            write_parity_csv(&rows, &mut buf)?;
            csv = String::from_utf8(buf).expect("utf8 csv");
            (None, rows)
        }
    };
    Ok(SweffResponse { passed: checks.iter().all(|c| c.passed), checks, lattice, majorana, csv })
}

fn default_dt() -> f64 {
    0.1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TomographyRequest {
    pub model: ModelName,
    /// total time of the reference run; the model's canonical time when absent
    #[serde(default, rename = "T")]
    pub total_time: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TomographyResponse {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    pub run: TomographyRun,
}

pub fn tomography(req: TomographyRequest) -> Result<TomographyResponse> {
    let model = req.model.lattice_model().ok_or_else(|| Error::Unsupported("tomography needs a lattice model".into()))?;
    let t = req.total_time.unwrap_or(req.model.reference_time());
    let run = tomography_run(model, t, req.dt)?;
    let values: Vec<f64> = run.report.sectors.iter().filter_map(|s| s.expectation).collect();
    let total: f64 = values.iter().sum();
    let checks = vec![
        check("loop spectrum matches the flux ratios", run.report.mismatch <= TOMOGRAPHY_TOL, format!("mismatch {:.1e}", run.report.mismatch)),
        check(
            "sector weights are probabilities",
            values.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)) && (total - 1.0).abs() < 1e-8,
            format!("sum {total:.12}"),
        ),
    ];
    Ok(TomographyResponse { passed: checks.iter().all(|c| c.passed), checks, run })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiguresRequest {
    pub config: ExperimentConfig,
    /// figure ids; every figure with data when empty
    #[serde(default)]
    pub figures: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiguresResponse {
    pub passed: bool,
    pub output: RunOutput,
    /// file name to CSV body
    pub files: BTreeMap<String, String>,
}

pub fn figures(req: FiguresRequest) -> Result<FiguresResponse> {
    for f in &req.figures {
        if !FIGURE_IDS.contains(&f.as_str()) {
            return Err(Error::Domain(format!("unknown figure id {f:?}; known: {}", FIGURE_IDS.join(", "))));
        }
    }
    let output = run(&req.config)?;
    let model = req.config.model.name();
    let mut files = BTreeMap::new();
    let wanted: Vec<&str> = if req.figures.is_empty() { FIGURE_IDS.to_vec() } else { req.figures.iter().map(String::as_str).collect() };
    for id in wanted {
        let body = figure_csv(&output, id)?;
        if req.figures.is_empty() && body.lines().count() < 2 {
            continue;
        }
        files.insert(format!("{model}_{id}.csv"), body);
    }
    Ok(FiguresResponse { passed: output.all_checks_passed(), output, files })
}

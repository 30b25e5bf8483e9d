//! Batch experiments on the 12-qubit torus and the Majorana chain: interpolation
//! runs over field grids, reference states, logical maps, perturbed ground
//! states, and figure-ready CSV output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolution::{adiabaticity_error, evolve, ground_subspace, GroundSubspace, Probes, Schedule};
use crate::levin_wen_probes::flux_tomography;
use crate::linalg::{eigh, CMat, CVec, MaxModulus};
use crate::majorana_chain::{symmetry_protected_interpolation, ChainSpec};
use crate::schrieffer_wolff::{exact_sw, perturbed_spectrum, order_l_check, tqo_order, SwContext, OrderLReport, TqoReport};
use crate::sparse::SparseOperator;
use crate::spin_lattice::{build_field_hamiltonian, build_reference_torus, build_toric_code_hadamard, edges1, field_operator, logical_operators, rotation_unitary, z_string, FieldFamily, Hamiltonian, HoneycombTorus, ModelKind};

/// Largest `points x T-values x dimension` a single run accepts.
pub const GRID_BUDGET: usize = 10_000 * 4096;
pub const DEFAULT_DISC_RESOLUTION: usize = 41;
pub const OBSERVABLE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Toric,
    DoubledSemion,
    DoubledFibonacci,
    Majorana,
}

impl ModelName {
    pub fn parse(s: &str) -> Result<Self> {
        if matches!(s, "majorana" | "tfim") {
            return Ok(ModelName::Majorana);
        }
        Ok(ModelKind::parse(s)?.into())
    }

    pub fn lattice_model(self) -> Option<ModelKind> {
        match self {
            ModelName::Toric => Some(ModelKind::Toric),
            ModelName::DoubledSemion => Some(ModelKind::DoubledSemion),
            ModelName::DoubledFibonacci => Some(ModelKind::DoubledFibonacci),
            ModelName::Majorana => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelName::Majorana => "majorana",
            m => m.lattice_model().expect("lattice model").name(),
        }
    }

    /// Total time of the canonical `-sum Z` run producing the reference state.
    pub fn reference_time(self) -> f64 {
        match self {
            ModelName::Toric => 40.0,
            ModelName::DoubledSemion => 120.0,
            ModelName::DoubledFibonacci | ModelName::Majorana => 320.0,
        }
    }
}

impl From<ModelKind> for ModelName {
    fn from(m: ModelKind) -> Self {
        match m {
            ModelKind::Toric => ModelName::Toric,
            ModelKind::DoubledSemion => ModelName::DoubledSemion,
            ModelKind::DoubledFibonacci => ModelName::DoubledFibonacci,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Theta,
    DiscPm,
    DiscPmX,
}

impl Family {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(Family::Theta),
            "disc_pm" | "disc" => Ok(Family::DiscPm),
            "disc_pm_x" | "disc_x" => Ok(Family::DiscPmX),
            other => Err(Error::Domain(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// final adiabaticity error against the ground space of the target model
    EpsAdia,
    /// overlap of the final state with the model's reference state
    OverlapRef,
    /// logical observables (toric code only)
    Logical,
    /// instantaneous adiabaticity error along the path
    Instant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeList {
    One(f64),
    Many(Vec<f64>),
}

impl TimeList {
    pub fn values(&self) -> Vec<f64> {
        match self {
            TimeList::One(t) => vec![*t],
            TimeList::Many(v) => v.clone(),
        }
    }
}

fn default_resolution() -> usize {
    DEFAULT_DISC_RESOLUTION
}
fn default_signs() -> Vec<Sign> {
    vec![Sign::Minus]
}
fn default_kappa() -> f64 {
    1.0
}
fn default_probes() -> Vec<ProbeKind> {
    vec![ProbeKind::EpsAdia]
}
fn default_true() -> bool {
    true
}
fn default_chain_lengths() -> Vec<usize> {
    vec![4, 6, 8]
}
fn default_samples() -> usize {
    crate::evolution::DEFAULT_SAMPLES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelName,
    pub family: Family,
    /// theta family: angles in `[0, 2 pi)`
    #[serde(default)]
    pub angles: Vec<f64>,
    /// disc families: points per axis before clipping to the unit disc
    #[serde(default = "default_resolution")]
    pub disc_resolution: usize,
    /// explicit `(a, b)` points replacing the regular disc grid
    #[serde(default)]
    pub disc_points: Vec<[f64; 2]>,
    #[serde(default = "default_signs")]
    pub signs: Vec<Sign>,
    #[serde(rename = "T")]
    pub total_time: TimeList,
    pub dt: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_probes")]
    pub probes: Vec<ProbeKind>,
    /// extra instantaneous sample times
    #[serde(default)]
    pub sample_times: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_true")]
    pub deterministic: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_chain_lengths")]
    pub chain_lengths: Vec<usize>,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(model: ModelName, family: Family, total_time: f64, dt: f64) -> Self {
        ExperimentConfig {
            model,
            family,
            angles: vec![],
            disc_resolution: DEFAULT_DISC_RESOLUTION,
            disc_points: vec![],
            signs: default_signs(),
            total_time: TimeList::One(total_time),
            dt,
            kappa: 1.0,
            probes: default_probes(),
            sample_times: vec![],
            samples: default_samples(),
            deterministic: true,
            out: None,
            chain_lengths: default_chain_lengths(),
            threads: None,
        }
    }

    pub fn from_toml(src: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(src).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Domain(format!("dt = {} must be positive", self.dt)));
        }
        let times = self.total_time.values();
        if times.is_empty() || times.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Domain("total times must be positive".into()));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::Domain(format!("kappa = {} outside (0, 1]", self.kappa)));
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        if let Some(t) = self.angles.iter().find(|&&t| !(0.0..two_pi).contains(&t)) {
            return Err(Error::Domain(format!("angle {t} outside [0, 2 pi)")));
        }
        if let Some(p) = self.disc_points.iter().find(|p| p[0] * p[0] + p[1] * p[1] > 1.0 + 1e-12) {
            return Err(Error::Domain(format!("disc point {p:?} outside the unit disc")));
        }
        if self.model != ModelName::Majorana && self.family == Family::Theta && self.angles.is_empty() {
            return Err(Error::Domain("theta family needs at least one angle".into()));
        }
        if self.model == ModelName::Majorana && self.probes.iter().any(|p| matches!(p, ProbeKind::Instant | ProbeKind::OverlapRef)) {
            return Err(Error::Unsupported("chain runs report eps_adia and parity only".into()));
        }
        if self.probes.contains(&ProbeKind::Logical) && self.model != ModelName::Toric {
            return Err(Error::Unsupported("logical probes are defined for the toric code only".into()));
        }
        let points = self.grid().len() * times.len();
        let dim = if self.model == ModelName::Majorana { 1usize << self.chain_lengths.iter().max().copied().unwrap_or(2) } else { 4096 };
        if points.saturating_mul(dim) > GRID_BUDGET {
            return Err(Error::Budget(format!("{points} runs of dimension {dim}")));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<GridPoint> {
        if self.model == ModelName::Majorana {
            return self.chain_lengths.iter().map(|&l| GridPoint::Chain { l }).collect();
        }
        match self.family {
            Family::Theta => self.angles.iter().map(|&theta| GridPoint::Theta { theta }).collect(),
            Family::DiscPm | Family::DiscPmX => {
                let x_axis = self.family == Family::DiscPmX;
                let pts = if self.disc_points.is_empty() { disc_grid(self.disc_resolution) } else { self.disc_points.clone() };
                self.signs
                    .iter()
                    .flat_map(|&sign| pts.iter().map(move |p| GridPoint::Disc { a: p[0], b: p[1], plus: sign == Sign::Plus, x_axis }))
                    .collect()
            }
        }
    }
}

/// `r x r` grid on `[-1, 1]^2` clipped to the closed unit disc; the origin when nothing survives.
pub fn disc_grid(r: usize) -> Vec<[f64; 2]> {
    if r < 2 {
        return vec![[0.0, 0.0]];
    }
    let step = 2.0 / (r - 1) as f64;
    let mut out = Vec::new();
    for i in 0..r {
        for j in 0..r {
            let (a, b) = (-1.0 + i as f64 * step, -1.0 + j as f64 * step);
            if a * a + b * b <= 1.0 + 1e-12 {
                out.push([a, b]);
            }
        }
    }
    if out.is_empty() {
        out.push([0.0, 0.0]);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridPoint {
    Theta { theta: f64 },
    Disc { a: f64, b: f64, plus: bool, x_axis: bool },
    Chain { l: usize },
}

impl GridPoint {
    pub fn field(&self) -> Result<FieldFamily> {
        match *self {
            GridPoint::Theta { theta } => Ok(FieldFamily::Theta { theta }),
            GridPoint::Disc { a, b, plus, x_axis: false } => Ok(FieldFamily::DiscZ { a, b, plus }),
            GridPoint::Disc { a, b, plus, x_axis: true } => Ok(FieldFamily::DiscX { a, b, plus }),
            GridPoint::Chain { .. } => Err(Error::Unsupported("chain points carry no lattice field".into())),
        }
    }

    fn coords(&self) -> Vec<(String, f64)> {
        match *self {
            GridPoint::Theta { theta } => vec![("theta".into(), theta)],
            GridPoint::Disc { a, b, plus, .. } => vec![("a".into(), a), ("b".into(), b), ("sign".into(), if plus { 1.0 } else { -1.0 })],
            GridPoint::Chain { l } => vec![("L".into(), l as f64)],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRow {
    pub index: usize,
    pub point: GridPoint,
    pub total_time: f64,
    pub values: Vec<(String, Option<f64>)>,
    pub flag: Option<String>,
    /// wall-clock milliseconds, kept out of the CSV
    pub runtime_ms: u128,
}

impl ResultRow {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).and_then(|(_, v)| *v)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstantCurve {
    pub index: usize,
    pub total_time: f64,
    /// `(t, eps_adia)`
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub crate_version: String,
    pub config: ExperimentConfig,
    pub model_sha256: BTreeMap<String, String>,
    pub reference_sha256: BTreeMap<String, String>,
    pub tolerances: BTreeMap<String, f64>,
    pub results_sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub instant: Vec<InstantCurve>,
    pub checks: Vec<CheckOutcome>,
    pub manifest: Manifest,
    /// reference states by model name, as `[re, im]` pairs
    #[serde(default)]
    pub references: BTreeMap<String, Vec<[f64; 2]>>,
}

impl RunOutput {
    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn results_csv(&self) -> String {
        rows_csv(&self.rows)
    }

    /// Writes `results.csv`, `manifest.json` and any reference states into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let results = dir.join("results.csv");
        fs::write(&results, self.results_csv())?;
        let manifest = dir.join("manifest.json");
        fs::write(&manifest, serde_json::to_string_pretty(&self.manifest).expect("manifest serializes"))?;
        let mut written = vec![results, manifest];
        if !self.instant.is_empty() {
            let path = dir.join("instant.csv");
            let mut out = String::from("index,T,t,eps_adia\n");
            for c in &self.instant {
                for (t, e) in &c.points {
                    out.push_str(&format!("{},{},{t:.6},{e:.12e}\n", c.index, c.total_time));
                }
            }
            fs::write(&path, out)?;
            written.push(path);
        }
        for (model, state) in &self.references {
            let path = dir.join(format!("reference_{model}.csv"));
            let mut out = String::from("re,im\n");
            for [re, im] in state {
                out.push_str(&format!("{re:.17e},{im:.17e}\n"));
            }
            fs::write(&path, out)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

pub fn rows_csv(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else { return out };
    let mut header: Vec<String> = vec!["index".into()];
    header.extend(first.point.coords().into_iter().map(|(n, _)| n));
    header.push("T".into());
    header.extend(first.values.iter().map(|(n, _)| n.clone()));
    header.push("flag".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        let mut rec = vec![r.index.to_string()];
        rec.extend(r.point.coords().into_iter().map(|(_, v)| format!("{v:.12}")));
        rec.push(format!("{}", r.total_time));
        rec.extend(r.values.iter().map(|(_, v)| fmt_opt(*v)));
        rec.push(r.flag.clone().unwrap_or_default());
        out.push_str(&rec.join(","));
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn operator_sha256(op: &SparseOperator) -> String {
    let mut h = Sha256::new();
    for (r, c, v) in op.triplets() {
        h.update((r as u64).to_le_bytes());
        h.update((c as u64).to_le_bytes());
        h.update(v.re.to_le_bytes());
        h.update(v.im.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn state_sha256(psi: &CVec) -> String {
    let mut h = Sha256::new();
    for z in psi.iter() {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// model context

/// Lattice, target Hamiltonian and its ground space, built once per model.
pub struct ModelContext {
    pub model: ModelKind,
    pub lattice: HoneycombTorus,
    pub h_top: Hamiltonian,
    ground: OnceLock<GroundSubspace>,
}

impl ModelContext {
    pub fn new(model: ModelKind) -> Result<Self> {
        let lattice = build_reference_torus();
        let h_top = model.build(&lattice)?;
        Ok(ModelContext { model, lattice, h_top, ground: OnceLock::new() })
    }

    pub fn ground(&self) -> Result<&GroundSubspace> {
        if let Some(g) = self.ground.get() {
            return Ok(g);
        }
        let g = ground_subspace(self.h_top.sparse(), 8)?;
        Ok(self.ground.get_or_init(|| g))
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.n_edges
    }
}

#[derive(Clone, Debug)]
pub struct ReferenceState {
    pub model: ModelKind,
    pub total_time: f64,
    pub dt: f64,
    /// normalized ground-space projection of the final state
    pub state: CVec,
    pub eps_final: f64,
}

impl ReferenceState {
    pub fn sha256(&self) -> String {
        state_sha256(&self.state)
    }
}

/// The `-sum Z` interpolation to `H_top`, projected onto its ground space.
pub fn reference_state(ctx: &ModelContext, total_time: f64, dt: f64) -> Result<ReferenceState> {
    let (h_triv, psi0) = build_field_hamiltonian(FieldFamily::DiscZ { a: 0.0, b: 0.0, plus: false }, ctx.n_sites())?;
    let (psi, _) = evolve(&h_triv, &ctx.h_top, &psi0, &Schedule::linear(total_time, dt), &Probes::none())?;
    let ground = ctx.ground()?;
    Ok(ReferenceState { model: ctx.model, total_time, dt, eps_final: adiabaticity_error(&psi, ground), state: ground.projected_state(&psi)? })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReferenceValidation {
    /// `|| U psi - psi ||` with `U` the lattice rotation
    pub rotation_residual: f64,
    /// `|| Z1 Z2 psi - psi ||`
    pub string_residual: f64,
    /// dimension of the joint +1 eigenspace on the ground frame
    pub joint_dimension: usize,
}

/// Joint +1 eigenspace of the rotation image and `Z1 Z2` on the ground frame.
pub fn validate_reference(ctx: &ModelContext, reference: &CVec) -> Result<ReferenceValidation> {
    let ground = ctx.ground()?;
    let u = rotation_unitary(&ctx.lattice);
    let zz = z_string(ctx.n_sites(), &edges1(&[1, 2]));
    let uf = ground.compress(&u);
    let zf = ground.compress(&zz);
    let k = ground.degeneracy();
    let id = CMat::identity(k, k);
    // kernel of (U-1)^dag (U-1) + (Z-1)^2
    let du = &uf - &id;
    let dz = &zf - &id;
    let m = du.adjoint() * &du + dz.adjoint() * &dz;
    let (vals, _) = eigh(&m);
    let joint_dimension = vals.iter().filter(|&&v| v < 1e-8).count();
    Ok(ReferenceValidation {
        rotation_residual: (u.apply(reference) - reference).norm(),
        string_residual: (zz.apply(reference) - reference).norm(),
        joint_dimension,
    })
}

// ---------------------------------------------------------------------------
// runs

#[derive(Clone, Debug, Default)]
struct PointResult {
    values: Vec<(String, Option<f64>)>,
    flag: Option<String>,
    instant: Option<Vec<(f64, f64)>>,
    checks: Vec<CheckOutcome>,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> CheckOutcome {
    CheckOutcome { name: name.into(), passed, detail: detail.into() }
}

fn run_lattice_point(
    cfg: &ExperimentConfig,
    ctx: &ModelContext,
    reference: Option<&ReferenceState>,
    point: &GridPoint,
    total_time: f64,
) -> Result<PointResult> {
    let family = point.field()?;
    let (h_triv, psi0) = build_field_hamiltonian(family, ctx.n_sites())?;
    let sched = Schedule { total_time, dt: cfg.dt, profile: crate::evolution::Profile::Linear, kappa: cfg.kappa };
    let instant = cfg.probes.contains(&ProbeKind::Instant);
    let mut probes = if instant { Probes { samples: cfg.samples, ..Probes::standard() } } else { Probes::none() };
    if instant {
        probes.times = cfg.sample_times.clone();
    }
    let (psi, traj) = evolve(&h_triv, &ctx.h_top, &psi0, &sched, &probes)?;
    let ground = ctx.ground()?;
    let mut out = PointResult::default();
    let eps = adiabaticity_error(&psi, ground);
    if cfg.probes.contains(&ProbeKind::EpsAdia) {
        out.values.push(("eps_adia".into(), Some(eps)));
        out.checks.push(check("eps_adia in [0,1]", (0.0..=1.0).contains(&eps), format!("{eps}")));
    }
    if cfg.probes.contains(&ProbeKind::OverlapRef) {
        let r = reference.ok_or_else(|| Error::Contract("overlap probe without reference state".into()))?;
        let ov = psi.dotc(&r.state).norm_sqr();
        out.checks.push(check("overlap in [0,1]", (-1e-12..=1.0 + 1e-12).contains(&ov), format!("{ov}")));
        out.values.push(("overlap_ref".into(), Some(ov.clamp(0.0, 1.0))));
    }
    if cfg.probes.contains(&ProbeKind::Logical) {
        let lm = logical_values(ctx, &psi)?;
        let centre_minus_z = matches!(point, GridPoint::Disc { a, b, plus: false, x_axis: false } if *a == 0.0 && *b == 0.0);
        if centre_minus_z {
            out.checks.push(check("<Zbar> = 1 for the -Z start", (lm.z_bar - 1.0).abs() < OBSERVABLE_TOL, format!("{}", lm.z_bar)));
        }
        if let Some(p) = &lm.projected {
            let dz = (p.z1 - p.z2).abs();
            let dx = (p.x1 - p.x2).abs();
            out.checks.push(check("<Z1> = <Z2>", dz < 1e-6, format!("{dz:e}")));
            out.checks.push(check("<X1> = <X2>", dx < 1e-6, format!("{dx:e}")));
        }
        out.values.push(("x_bar".into(), Some(lm.x_bar)));
        out.values.push(("z_bar".into(), Some(lm.z_bar)));
        let proj = lm.projected.as_ref();
        out.values.push(("x1_ground".into(), proj.map(|p| p.x1)));
        out.values.push(("z1_ground".into(), proj.map(|p| p.z1)));
        out.values.push(("x2_ground".into(), proj.map(|p| p.x2)));
        out.values.push(("z2_ground".into(), proj.map(|p| p.z2)));
    }
    if instant {
        out.instant = Some(traj.samples.iter().filter_map(|s| s.eps_adia.map(|e| (s.t, e))).collect());
    }
    let drift = traj.samples.iter().map(|s| s.norm_drift).fold(0.0, f64::max);
    out.checks.push(check("norm drift", drift < 1e-8, format!("{drift:e}")));
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectedLogicals {
    pub x1: f64,
    pub z1: f64,
    pub x2: f64,
    pub z2: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogicalValues {
    pub x_bar: f64,
    pub z_bar: f64,
    /// on the normalized ground-space projection; `None` without ground weight
    pub projected: Option<ProjectedLogicals>,
}

pub fn logical_values(ctx: &ModelContext, psi: &CVec) -> Result<LogicalValues> {
    let ops = logical_operators(ctx.model, &ctx.lattice)?;
    let norm2 = psi.norm_squared();
    let ev = |op: &SparseOperator, v: &CVec| op.expectation(v).re / v.norm_squared();
    let ground = ctx.ground()?;
    let projected = if ground.weight(psi) / norm2 > 1e-12 {
        let p = ground.projected_state(psi)?;
        Some(ProjectedLogicals { x1: ev(&ops.x1, &p), z1: ev(&ops.z1, &p), x2: ev(&ops.x2, &p), z2: ev(&ops.z2, &p) })
    } else {
        None
    };
    Ok(LogicalValues { x_bar: ev(ops.x_bar(), psi), z_bar: ev(ops.z_bar(), psi), projected })
}

fn run_chain_point(cfg: &ExperimentConfig, l: usize, total_time: f64) -> Result<PointResult> {
    let r = symmetry_protected_interpolation(&ChainSpec::open(l, -1.0), total_time, cfg.dt)?;
    let mut out = PointResult::default();
    out.checks.push(check(format!("parity conserved (L={l})"), r.max_parity_drift < OBSERVABLE_TOL, format!("{:e}", r.max_parity_drift)));
    out.values = vec![
        ("initial_parity".into(), Some(r.initial_parity)),
        ("parity_drift".into(), Some(r.max_parity_drift)),
        ("target_overlap".into(), Some(r.target_overlap)),
        ("eps_adia".into(), Some(r.eps_adia)),
    ];
    Ok(out)
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().map_err(|e| Error::Domain(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs every grid point for every total time; rows come back in grid order.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let grid = cfg.grid();
    let times = cfg.total_time.values();
    let jobs: Vec<(usize, GridPoint, f64)> =
        grid.iter().flat_map(|p| times.iter().map(move |&t| (*p, t))).enumerate().map(|(i, (p, t))| (i, p, t)).collect();

    let mut model_sha = BTreeMap::new();
    let mut reference_sha = BTreeMap::new();
    let mut references = BTreeMap::new();
    let mut checks = Vec::new();
    let ctx = match cfg.model.lattice_model() {
        Some(m) => {
            let ctx = ModelContext::new(m)?;
            model_sha.insert(m.name().to_string(), operator_sha256(ctx.h_top.sparse()));
            Some(ctx)
        }
        None => None,
    };
    let reference = match (&ctx, cfg.probes.contains(&ProbeKind::OverlapRef)) {
        (Some(ctx), true) => {
            let r = reference_state(ctx, cfg.model.reference_time(), cfg.dt)?;
            reference_sha.insert(ctx.model.name().to_string(), r.sha256());
            references.insert(ctx.model.name().to_string(), r.state.iter().map(|z| [z.re, z.im]).collect());
            if ctx.model == ModelKind::DoubledSemion {
                let v = validate_reference(ctx, &r.state)?;
                let ok = v.joint_dimension == 1 && v.rotation_residual < 1e-6 && v.string_residual < 1e-6;
                checks.push(check("reference state is the joint +1 eigenvector", ok, format!("{v:?}")));
            }
            Some(r)
        }
        _ => None,
    };

    let results: Vec<(usize, GridPoint, f64, Result<PointResult>, u128)> = with_pool(cfg.threads, || {
        jobs.par_iter()
            .map(|&(i, p, t)| {
                let start = Instant::now();
                let r = match (&ctx, p) {
                    (_, GridPoint::Chain { l }) => run_chain_point(cfg, l, t),
                    (Some(ctx), p) => run_lattice_point(cfg, ctx, reference.as_ref(), &p, t),
                    (None, _) => Err(Error::Contract("lattice point without a lattice model".into())),
                };
                (i, p, t, r, start.elapsed().as_millis())
            })
            .collect()
    })?;

    let mut rows = Vec::with_capacity(results.len());
    let mut instant = Vec::new();
    for (index, point, total_time, r, runtime_ms) in results {
        let r = r?;
        checks.extend(r.checks);
        if let Some(points) = r.instant {
            instant.push(InstantCurve { index, total_time, points });
        }
        rows.push(ResultRow { index, point, total_time, values: r.values, flag: r.flag, runtime_ms });
    }
    if cfg.model == ModelName::Toric && cfg.family == Family::DiscPmX {
        checks.extend(x_sign_symmetry(&rows));
    }
    let csv = rows_csv(&rows);
    let tolerances = BTreeMap::from([
        ("degeneracy".to_string(), crate::evolution::DEFAULT_DEGENERACY_TOL),
        ("observable".to_string(), OBSERVABLE_TOL),
    ]);
    let manifest = Manifest {
        crate_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        model_sha256: model_sha,
        reference_sha256: reference_sha,
        tolerances,
        results_sha256: sha256_hex(csv.as_bytes()),
    };
    Ok(RunOutput { rows, instant, checks, manifest, references })
}

/// `prod Z` commutes with the toric code and maps `(X, Y, Z) -> (-X, -Y, Z)`,
/// so `eps(+, a, b)` must equal `eps(-, a, -b)`.
fn x_sign_symmetry(rows: &[ResultRow]) -> Option<CheckOutcome> {
    let mut worst: Option<f64> = None;
    for r in rows {
        let GridPoint::Disc { a, b, plus: true, .. } = r.point else { continue };
        let partner = rows.iter().find(|q| {
            q.total_time == r.total_time
                && matches!(q.point, GridPoint::Disc { a: qa, b: qb, plus: false, .. } if (qa - a).abs() < 1e-12 && (qb + b).abs() < 1e-12)
        });
        if let (Some(q), Some(x)) = (partner, r.value("eps_adia")) {
            if let Some(y) = q.value("eps_adia") {
                worst = Some(worst.unwrap_or(0.0).max((x - y).abs()));
            }
        }
    }
    worst.map(|w| check("+X/-X symmetry eps(+, a, b) = eps(-, a, -b)", w < OBSERVABLE_TOL, format!("max deviation {w:.1e}")))
}

/// Logical observables for the toric code over the configured grid.
pub fn logical_map(cfg: &ExperimentConfig) -> Result<RunOutput> {
    if cfg.model != ModelName::Toric {
        return Err(Error::Unsupported("logical maps are defined for the toric code only".into()));
    }
    let mut cfg = cfg.clone();
    if !cfg.probes.contains(&ProbeKind::Logical) {
        cfg.probes.push(ProbeKind::Logical);
    }
    run(&cfg)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbedRow {
    pub point: GridPoint,
    pub eps: f64,
    pub overlap: f64,
    pub degeneracy: usize,
    pub z_bar: Option<f64>,
    pub flag: Option<String>,
}

/// Ground states of `H_top + eps H_triv(point)` against the reference state.
pub fn perturbed_ground_comparison(cfg: &ExperimentConfig, eps: f64, reference: Option<&ReferenceState>) -> Result<Vec<PerturbedRow>> {
    let model = cfg.model.lattice_model().ok_or_else(|| Error::Unsupported("perturbed comparison needs a lattice model".into()))?;
    let ctx = ModelContext::new(model)?;
    let owned;
    let reference = match reference {
        Some(r) => r,
        None => {
            owned = reference_state(&ctx, model_reference_time(cfg), cfg.dt)?;
            &owned
        }
    };
    let logicals = if model == ModelKind::Toric { Some(logical_operators(model, &ctx.lattice)?) } else { None };
    let grid = cfg.grid();
    with_pool(cfg.threads, || {
        grid.par_iter()
            .map(|p| {
                let n = p.field()?.direction()?;
                let h = ctx.h_top.sparse().add_scaled(&field_operator(ctx.n_sites(), n), crate::linalg::c(eps, 0.0));
                match ground_subspace(&h, 8) {
                    Ok(g) => {
                        let degeneracy = g.degeneracy();
                        let overlap = g.weight(&reference.state).clamp(0.0, 1.0);
                        let z_bar = match (&logicals, degeneracy) {
                            (Some(l), 1) => {
                                let v: CVec = g.frame.column(0).into_owned();
                                Some(l.z_bar().expectation(&v).re)
                            }
                            _ => None,
                        };
                        let flag = (degeneracy > 1).then(|| format!("degenerate ({degeneracy})"));
                        Ok(PerturbedRow { point: *p, eps, overlap, degeneracy, z_bar, flag })
                    }
                    Err(Error::NoConvergence(msg)) => {
                        Ok(PerturbedRow { point: *p, eps, overlap: f64::NAN, degeneracy: 0, z_bar: None, flag: Some(format!("no convergence: {msg}")) })
                    }
                    Err(e) => Err(e),
                }
            })
            .collect()
    })?
}

fn model_reference_time(cfg: &ExperimentConfig) -> f64 {
    cfg.model.reference_time()
}

pub fn perturbed_csv(rows: &[PerturbedRow]) -> String {
    let mut s = String::from("a,b,sign,theta,eps,overlap,degeneracy,z_bar,flag\n");
    for r in rows {
        let (a, b, sign, theta) = match r.point {
            GridPoint::Disc { a, b, plus, .. } => (Some(a), Some(b), Some(if plus { 1.0 } else { -1.0 }), None),
            GridPoint::Theta { theta } => (None, None, None, Some(theta)),
            GridPoint::Chain { .. } => (None, None, None, None),
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_opt(a),
            fmt_opt(b),
            fmt_opt(sign),
            fmt_opt(theta),
            r.eps,
            fmt_opt(Some(r.overlap)),
            r.degeneracy,
            fmt_opt(r.z_bar),
            r.flag.clone().unwrap_or_default()
        ));
    }
    s
}

// ---------------------------------------------------------------------------
// figure data

pub const FIGURE_IDS: [&str; 4] = ["tc_groundspaceoverlap", "fib_instant", "ds_minusZ_refoverlap", "tc_logical"];

/// Writes `<model>_<figure-id>.csv` into `dir`.
pub fn emit_figure_data(out: &RunOutput, figure: &str, dir: &Path) -> Result<PathBuf> {
    let model = out.manifest.config.model.name();
    let body = figure_csv(out, figure)?;
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{model}_{figure}.csv"));
    fs::write(&path, body)?;
    Ok(path)
}

pub fn figure_csv(out: &RunOutput, figure: &str) -> Result<String> {
    let mut s = String::new();
    match figure {
        "tc_groundspaceoverlap" => {
            s.push_str("T,theta,eps_adia\n");
            for r in &out.rows {
                if let GridPoint::Theta { theta } = r.point {
                    s.push_str(&format!("{},{:.12},{}\n", r.total_time, theta, fmt_opt(r.value("eps_adia"))));
                }
            }
        }
        "fib_instant" => {
            s.push_str("T,t,eps_adia_instant\n");
            for c in &out.instant {
                for (t, e) in &c.points {
                    s.push_str(&format!("{},{},{e:.12e}\n", c.total_time, t));
                }
            }
        }
        "ds_minusZ_refoverlap" => {
            s.push_str("a,b,ln_one_minus_overlap\n");
            for r in &out.rows {
                if let (GridPoint::Disc { a, b, .. }, Some(ov)) = (r.point, r.value("overlap_ref")) {
                    s.push_str(&format!("{a:.12},{b:.12},{:.12e}\n", (1.0 - ov).max(f64::MIN_POSITIVE).ln()));
                }
            }
        }
        "tc_logical" => {
            s.push_str("a,b,x_bar,z_bar\n");
            for r in &out.rows {
                if let GridPoint::Disc { a, b, .. } = r.point {
                    s.push_str(&format!("{a:.12},{b:.12},{},{}\n", fmt_opt(r.value("x_bar")), fmt_opt(r.value("z_bar"))));
                }
            }
        }
        other => return Err(Error::Domain(format!("unknown figure id {other:?}; known: {}", FIGURE_IDS.join(", ")))),
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// effective-Hamiltonian and tomography reports

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SwReport {
    pub model: String,
    pub field: [f64; 3],
    pub eps: f64,
    pub closure_dim: usize,
    pub degeneracy: usize,
    pub exact_sw_spectrum: Vec<f64>,
    pub direct_spectrum: Vec<f64>,
    pub spectrum_deviation: f64,
    pub tqo: TqoReport,
    pub order_l: Option<OrderLReport>,
}

/// Exact SW for `H_top + eps V` with `V = sum_j n . sigma_j`, plus order diagnostics.
pub fn sweff_report(model: ModelKind, n: [f64; 3], eps: f64, l_max: usize) -> Result<SwReport> {
    let ctx = ModelContext::new(model)?;
    // A pure X field on the toric code closes over the whole space; the
    // Hadamard frame maps it to a diagonal field with a small closure.
    let dual;
    let (h0, v) = if model == ModelKind::Toric && n[1] == 0.0 && n[2] == 0.0 {
        dual = build_toric_code_hadamard(&ctx.lattice)?;
        (&dual, field_operator(ctx.n_sites(), [0.0, 0.0, n[0]]))
    } else {
        (&ctx.h_top, field_operator(ctx.n_sites(), n))
    };
    let sw = SwContext::from_sparse(h0.sparse(), &v, 8)?;
    let heff = exact_sw(&sw, eps)?;
    let mut exact = heff.eigenvalues();
    exact.sort_by(f64::total_cmp);
    let direct: Vec<f64> = perturbed_spectrum(&sw, eps).into_iter().take(sw.k).collect();
    let dev = exact.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let tqo = tqo_order(&sw, l_max);
    let order_l = match tqo.order {
        Some(l) if l >= 2 && l <= 6 => Some(order_l_check(&sw, l)?),
        _ => None,
    };
    Ok(SwReport {
        model: model.name().into(),
        field: n,
        eps,
        closure_dim: sw.dim(),
        degeneracy: sw.k,
        exact_sw_spectrum: exact,
        direct_spectrum: direct,
        spectrum_deviation: dev,
        tqo,
        order_l,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TomographyRun {
    pub model: String,
    pub total_time: f64,
    pub dt: f64,
    pub eps_final: f64,
    pub reference_sha256: String,
    pub report: crate::levin_wen_probes::TomographyReport,
    pub csv: String,
}

/// Reference state from the canonical run, resolved along the dual loop `{1, 2}`.
pub fn tomography_run(model: ModelKind, total_time: f64, dt: f64) -> Result<TomographyRun> {
    let ctx = ModelContext::new(model)?;
    let r = reference_state(&ctx, total_time, dt)?;
    let report = flux_tomography(model, &edges1(&[1, 2]), &ctx.ground()?.frame, Some(&r.state))?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    Ok(TomographyRun {
        model: model.name().into(),
        total_time,
        dt,
        eps_final: r.eps_final,
        reference_sha256: r.sha256(),
        report,
        csv: String::from_utf8(csv).expect("utf8 csv"),
    })
}

/// Writes a complex vector as `re,im` lines.
pub fn write_state<W: Write>(psi: &CVec, mut w: W) -> Result<()> {
    writeln!(w, "re,im")?;
    for z in psi.iter() {
        writeln!(w, "{:.17e},{:.17e}", z.re, z.im)?;
    }
    Ok(())
}

/// Largest entry of `[A, B]` for two frame matrices.
pub fn frame_commutator(a: &CMat, b: &CMat) -> f64 {
    (a * b - b * a).max_mod()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_grid_is_clipped() {
        let g = disc_grid(41);
        assert!(g.iter().all(|p| p[0] * p[0] + p[1] * p[1] <= 1.0 + 1e-12));
        assert!(g.contains(&[0.0, 0.0]));
        assert!(g.contains(&[1.0, 0.0]));
        assert_eq!(disc_grid(3).len(), 5);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let src = r#"
model = "toric"
family = "theta"
angles = [0.0, 0.7853981633974483]
T = [10.0, 20.0]
dt = 0.1
probes = ["eps_adia", "logical"]
"#;
        let cfg = ExperimentConfig::from_toml(src).unwrap();
        assert_eq!(cfg.total_time.values(), vec![10.0, 20.0]);
        assert_eq!(cfg.disc_resolution, 41);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ExperimentConfig::new(ModelName::Toric, Family::Theta, 10.0, 0.1);
        cfg.angles = vec![7.0];
        assert!(matches!(cfg.validate(), Err(Error::Domain(_))));
        cfg.angles = vec![0.0];
        cfg.dt = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::Domain(_))));
        let mut cfg = ExperimentConfig::new(ModelName::DoubledSemion, Family::DiscPm, 10.0, 0.1);
        cfg.disc_resolution = 201;
        assert!(matches!(cfg.validate(), Err(Error::Budget(_))));
        cfg.disc_resolution = 5;
        cfg.probes = vec![ProbeKind::Logical];
        assert!(matches!(cfg.validate(), Err(Error::Unsupported(_))));
        let mut cfg = ExperimentConfig::new(ModelName::Majorana, Family::Theta, 10.0, 0.1);
        cfg.probes = vec![ProbeKind::EpsAdia, ProbeKind::Instant];
        assert!(matches!(cfg.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn unknown_figure_id() {
        let cfg = ExperimentConfig::new(ModelName::Majorana, Family::Theta, 1.0, 0.1);
        let out = RunOutput {
            rows: vec![],
            instant: vec![],
            checks: vec![],
            manifest: Manifest {
                crate_version: String::new(),
                config: cfg,
                model_sha256: BTreeMap::new(),
                reference_sha256: BTreeMap::new(),
                tolerances: BTreeMap::new(),
                results_sha256: String::new(),
            },
            references: BTreeMap::new(),
        };
        assert!(matches!(figure_csv(&out, "nope"), Err(Error::Domain(_))));
    }

    #[test]
    fn majorana_rows_are_deterministic() {
        let mut cfg = ExperimentConfig::new(ModelName::Majorana, Family::Theta, 20.0, 0.1);
        cfg.chain_lengths = vec![3, 4];
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.results_csv(), b.results_csv());
        assert!(a.all_checks_passed());
        assert_eq!(a.rows.len(), 2);
    }
}

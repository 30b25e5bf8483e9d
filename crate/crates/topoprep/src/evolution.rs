//! Trotterized interpolation `H(s) = (1-s) H_triv + s H_top` and ground-space diagnostics.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, columns_to_matrix, eigh, eigh_real, orthonormalize, random_state, CMat, CVec, C64, ONE, ZERO};
use crate::sparse::SparseOperator;
use crate::spin_lattice::Hamiltonian;

pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-8;
pub const DEFAULT_SAMPLES: usize = 64;
/// Components up to this size are diagonalised densely.
const DENSE_BLOCK: usize = 1500;

#[derive(Clone, Debug)]
pub struct GroundSubspace {
    /// orthonormal columns
    pub frame: CMat,
    pub energy: f64,
    pub degeneracy_tol: f64,
    /// largest `|H v - E v|` over the frame
    pub residual: f64,
}

impl GroundSubspace {
    pub fn degeneracy(&self) -> usize {
        self.frame.ncols()
    }

    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    /// Coordinates `F^dagger psi` in the frame.
    pub fn coordinates(&self, psi: &CVec) -> CVec {
        self.frame.adjoint() * psi
    }

    pub fn project(&self, psi: &CVec) -> CVec {
        &self.frame * self.coordinates(psi)
    }

    pub fn weight(&self, psi: &CVec) -> f64 {
        self.coordinates(psi).norm_squared()
    }

    /// `F^dagger A F`
    pub fn compress(&self, op: &SparseOperator) -> CMat {
        op.compress(&self.frame)
    }

    /// Normalised ground-space projection of `psi`.
    pub fn projected_state(&self, psi: &CVec) -> Result<CVec> {
        let p = self.project(psi);
        let n = p.norm();
        if n < 1e-12 {
            return Err(Error::Contract("state has no weight in the ground space".into()));
        }
        Ok(p.unscale(n))
    }
}

pub fn ground_subspace(h: &SparseOperator, k_max: usize) -> Result<GroundSubspace> {
    ground_subspace_with_tol(h, k_max, DEFAULT_DEGENERACY_TOL)
}

pub fn ground_subspace_with_tol(h: &SparseOperator, k_max: usize, tol: f64) -> Result<GroundSubspace> {
    if !h.is_hermitian() {
        return Err(Error::Contract("ground space requested for a non-Hermitian operator".into()));
    }
    let comps = SparseOperator::components(&[h]);
    let largest = comps.iter().map(Vec::len).max().unwrap_or(0);
    let (energy, vectors) = if largest <= DENSE_BLOCK { block_dense(h, &comps, tol) } else { lanczos_cluster(h, k_max, tol)? };
    if vectors.len() > k_max {
        return Err(Error::Budget(format!("ground degeneracy {} exceeds k_max = {k_max}", vectors.len())));
    }
    finish_subspace(h, energy, vectors, tol)
}

fn block_dense(h: &SparseOperator, comps: &[Vec<usize>], tol: f64) -> (f64, Vec<CVec>) {
    let dim = h.dim();
    let per: Vec<Vec<(f64, CVec)>> = comps
        .par_iter()
        .map(|idx| {
            let mut pos = vec![usize::MAX; 0];
            if idx.len() > 1 {
                pos = vec![usize::MAX; dim];
                for (k, &i) in idx.iter().enumerate() {
                    pos[i] = k;
                }
            }
            let n = idx.len();
            let mut m = CMat::zeros(n, n);
            for (k, &i) in idx.iter().enumerate() {
                for (j, v) in h.row(i) {
                    let kj = if n == 1 { 0 } else { pos[j] };
                    m[(k, kj)] += v;
                }
            }
            let (vals, vecs) = eigh(&m);
            let lo = vals[0];
            vals.iter()
                .enumerate()
                .take_while(|(_, &v)| v <= lo + tol)
                .map(|(col, &v)| {
                    let mut full = CVec::zeros(dim);
                    for (k, &i) in idx.iter().enumerate() {
                        full[i] = vecs[(k, col)];
                    }
                    (v, full)
                })
                .collect()
        })
        .collect();
    let e0 = per.iter().flatten().map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
    let vecs = per.into_iter().flatten().filter(|(v, _)| *v <= e0 + tol).map(|(_, x)| x).collect();
    (e0, vecs)
}

fn finish_subspace(h: &SparseOperator, energy: f64, vectors: Vec<CVec>, tol: f64) -> Result<GroundSubspace> {
    let dim = h.dim();
    let q = orthonormalize(&vectors, 1e-8);
    let frame = columns_to_matrix(&q, dim);
    // Rayleigh-Ritz inside the cluster
    let (vals, rot) = eigh(&h.compress(&frame));
    let frame = &frame * rot;
    let energy = if vals.is_empty() { energy } else { vals.iter().sum::<f64>() / vals.len() as f64 };
    let hf = h.apply_matrix(&frame);
    let residual = (0..frame.ncols())
        .map(|k| (hf.column(k) - frame.column(k) * c(vals[k], 0.0)).norm())
        .fold(0.0, f64::max);
    if residual > 1e-8 {
        return Err(Error::NoConvergence(format!("ground frame residual {residual:e}")));
    }
    Ok(GroundSubspace { frame, energy, degeneracy_tol: tol, residual })
}

/// Lowest eigenpair of `h` on the orthogonal complement of `deflate`.
pub fn lanczos_lowest(h: &SparseOperator, deflate: &[CVec], seed: u64, max_iter: usize) -> Result<(f64, CVec)> {
    let dim = h.dim();
    let project_out = |w: &mut CVec, basis: &[CVec]| {
        for _ in 0..2 {
            for q in basis {
                let p = q.dotc(w);
                w.axpy(-p, q, ONE);
            }
        }
    };
    let mut start = random_state(dim, seed);
    let mut last_resid = f64::INFINITY;
    for _restart in 0..20 {
        project_out(&mut start, deflate);
        let n0 = start.norm();
        if n0 < 1e-12 {
            return Err(Error::NoConvergence("start vector lies in the deflated space".into()));
        }
        let mut basis: Vec<CVec> = vec![start.unscale(n0)];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let m_max = max_iter.min(dim - deflate.len()).max(1);
        let mut ritz: Option<(f64, CVec)> = None;
        for j in 0..m_max {
            let mut w = h.apply(&basis[j]);
            let a = basis[j].dotc(&w).re;
            alpha.push(a);
            project_out(&mut w, &basis);
            project_out(&mut w, deflate);
            let b = w.norm();
            let done = b < 1e-13 || j + 1 == m_max;
            if done || (j + 1) % 8 == 0 {
                let k = alpha.len();
                let t = DMatrix::from_fn(k, k, |r, s| {
                    if r == s {
                        alpha[r]
                    } else if r + 1 == s {
                        beta[r]
                    } else if s + 1 == r {
                        beta[s]
                    } else {
                        0.0
                    }
                });
                let (vals, vecs) = eigh_real(&t);
                let est = b * vecs[(k - 1, 0)].abs();
                if done || est < 1e-10 {
                    let mut x = CVec::zeros(dim);
                    for (i, v) in basis.iter().enumerate() {
                        x.axpy(c(vecs[(i, 0)], 0.0), v, ONE);
                    }
                    let x = x.unscale(x.norm());
                    ritz = Some((vals[0], x));
                    break;
                }
            }
            beta.push(b);
            basis.push(w.unscale(b));
        }
        let (theta, x) = ritz.expect("loop always produces a Ritz pair");
        let resid = (h.apply(&x) - x.scale(theta)).norm();
        if resid < 1e-9 {
            return Ok((theta, x));
        }
        last_resid = resid;
        start = x;
    }
    Err(Error::NoConvergence(format!("Lanczos residual {last_resid:e} after restarts")))
}

fn lanczos_cluster(h: &SparseOperator, k_max: usize, tol: f64) -> Result<(f64, Vec<CVec>)> {
    let mut found: Vec<CVec> = Vec::new();
    let mut e0 = f64::NAN;
    for k in 0..=k_max {
        if found.len() == h.dim() {
            break;
        }
        let (theta, x) = lanczos_lowest(h, &found, 0x5eed + k as u64, 300)?;
        if found.is_empty() {
            e0 = theta;
        } else if theta > e0 + tol {
            break;
        }
        found.push(x);
    }
    Ok((e0, found))
}

// ---------------------------------------------------------------------------
// schedules and stepping

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Linear,
    /// `3x^2 - 2x^3`
    Smoothstep,
    /// piecewise-linear through `(x, y)` knots from (0,0) to (1,1)
    Table { knots: Vec<(f64, f64)> },
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            Profile::Linear => x,
            Profile::Smoothstep => x * x * (3.0 - 2.0 * x),
            Profile::Table { knots } => {
                for w in knots.windows(2) {
                    let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                    if x <= x1 {
                        return if x1 > x0 { y0 + (y1 - y0) * (x - x0) / (x1 - x0) } else { y1 };
                    }
                }
                knots.last().map(|k| k.1).unwrap_or(x)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Schedule {
    pub total_time: f64,
    pub dt: f64,
    pub profile: Profile,
    pub kappa: f64,
}

impl Schedule {
    pub fn linear(total_time: f64, dt: f64) -> Self {
        Schedule { total_time, dt, profile: Profile::Linear, kappa: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_time > 0.0 && self.dt > 0.0) || self.total_time / self.dt < 1.0 - 1e-9 {
            return Err(Error::Domain(format!("need T > 0, dt > 0, T/dt >= 1 (T={}, dt={})", self.total_time, self.dt)));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::Domain(format!("kappa {} outside (0, 1]", self.kappa)));
        }
        let n = self.n_steps();
        let vals: Vec<f64> = (0..=n).map(|j| self.s_at_step(j)).collect();
        if vals.windows(2).any(|w| w[1] < w[0] - 1e-15) || (self.profile.eval(0.0)).abs() > 1e-12 || (self.profile.eval(1.0) - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("profile is not a monotone map of [0,1] onto itself".into()));
        }
        Ok(())
    }

    /// Number of steps covering `[0, T]`.
    pub fn n_steps(&self) -> usize {
        (self.total_time / self.dt).round() as usize
    }

    /// Steps actually taken, covering `[0, kappa T]`.
    pub fn steps_taken(&self) -> usize {
        (self.kappa * self.total_time / self.dt).round() as usize
    }

    pub fn s_at_step(&self, j: usize) -> f64 {
        self.profile.eval(j as f64 * self.dt / self.total_time)
    }

    pub fn s_at_time(&self, t: f64) -> f64 {
        self.profile.eval(t / self.total_time)
    }
}

/// `exp(-i s H_top dt) exp(-i (1-s) H_triv dt) psi`
pub fn trotter_step(psi: &mut CVec, h_triv: &Hamiltonian, h_top: &Hamiltonian, s: f64, dt: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("interpolation parameter {s} outside [0,1]")));
    }
    h_triv.apply_exp((1.0 - s) * dt, psi)?;
    h_top.apply_exp(s * dt, psi)
}

pub fn interpolated(h_triv: &Hamiltonian, h_top: &Hamiltonian, s: f64) -> SparseOperator {
    SparseOperator::sum(h_top.dim(), [(1.0 - s, h_triv.sparse()), (s, h_top.sparse())])
}

#[derive(Clone, Debug, Default)]
pub struct Probes {
    /// number of evenly spaced instantaneous ground-space samples (0 disables)
    pub samples: usize,
    /// extra sample times
    pub times: Vec<f64>,
    /// times at which to keep the state
    pub checkpoints: Vec<f64>,
    pub reference: Option<CVec>,
    pub observables: Vec<(String, SparseOperator)>,
    /// largest ground degeneracy searched at sample points
    pub k_max: usize,
}

impl Probes {
    pub fn standard() -> Self {
        Probes { samples: DEFAULT_SAMPLES, k_max: 8, ..Default::default() }
    }

    pub fn none() -> Self {
        Probes { k_max: 8, ..Default::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub s: f64,
    pub eps_adia: Option<f64>,
    pub overlap_ref: Option<f64>,
    pub norm_drift: f64,
    pub observables: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub observable_names: Vec<String>,
    pub checkpoints: Vec<(f64, CVec)>,
}

impl Trajectory {
    /// Sample closest to time `t`.
    pub fn at(&self, t: f64) -> Option<&Sample> {
        self.samples.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string(), "s".into(), "eps_adia".into(), "overlap_ref".into(), "norm_drift".into()];
        header.extend(self.observable_names.iter().cloned());
        out.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        for s in &self.samples {
            let mut rec = vec![format!("{}", s.t), format!("{:.12}", s.s), opt(s.eps_adia), opt(s.overlap_ref), format!("{:.3e}", s.norm_drift)];
            rec.extend(s.observables.iter().map(|v| format!("{v:.12e}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn sample_steps(sched: &Schedule, probes: &Probes) -> Result<Vec<usize>> {
    let taken = sched.steps_taken();
    let horizon = sched.kappa * sched.total_time;
    let mut steps = vec![0];
    for k in 1..=probes.samples {
        steps.push(((k as f64 / probes.samples as f64) * taken as f64).round() as usize);
    }
    for &t in probes.times.iter().chain(&probes.checkpoints) {
        if t < 0.0 || t > horizon + 1e-9 {
            return Err(Error::Domain(format!("probe time {t} outside [0, {horizon}]")));
        }
        steps.push((t / sched.dt).round() as usize);
    }
    steps.sort_unstable();
    steps.dedup();
    Ok(steps)
}

/// Runs the interpolation from `psi0` (the product ground state of `h_triv`).
pub fn evolve(h_triv: &Hamiltonian, h_top: &Hamiltonian, psi0: &CVec, sched: &Schedule, probes: &Probes) -> Result<(CVec, Trajectory)> {
    sched.validate()?;
    if psi0.len() != h_top.dim() || h_triv.dim() != h_top.dim() {
        return Err(Error::Structure("state and Hamiltonian dimensions differ".into()));
    }
    let steps = sample_steps(sched, probes)?;
    let checkpoint_steps: Vec<usize> = probes.checkpoints.iter().map(|t| (t / sched.dt).round() as usize).collect();
    let mut traj = Trajectory { observable_names: probes.observables.iter().map(|(n, _)| n.clone()).collect(), ..Default::default() };
    let mut psi = psi0.unscale(psi0.norm());
    let mut next = 0usize;
    let taken = sched.steps_taken();
    for j in 0..=taken {
        if next < steps.len() && steps[next] == j {
            next += 1;
            let t = j as f64 * sched.dt;
            let s = sched.s_at_step(j);
            let eps = if probes.samples > 0 || probes.times.iter().any(|&pt| (pt / sched.dt).round() as usize == j) {
                let sub = ground_subspace(&interpolated(h_triv, h_top, s), probes.k_max)?;
                Some(adiabaticity_error(&psi, &sub))
            } else {
                None
            };
            let overlap_ref = probes.reference.as_ref().map(|r| subspace_overlap(&psi, r));
            let observables = probes.observables.iter().map(|(_, op)| op.expectation(&psi).re).collect();
            traj.samples.push(Sample { t, s, eps_adia: eps, overlap_ref, norm_drift: (psi.norm() - 1.0).abs(), observables });
            if checkpoint_steps.contains(&j) {
                traj.checkpoints.push((t, psi.clone()));
            }
        }
        if j < taken {
            trotter_step(&mut psi, h_triv, h_top, sched.s_at_step(j), sched.dt)?;
        }
    }
    Ok((psi, traj))
}

/// `1 - <psi|P0|psi>`, clamped to [0, 1].
pub fn adiabaticity_error(psi: &CVec, sub: &GroundSubspace) -> f64 {
    (1.0 - sub.weight(psi) / psi.norm_squared()).clamp(0.0, 1.0)
}

/// `|<psi|ref>|^2`
pub fn subspace_overlap(psi: &CVec, reference: &CVec) -> f64 {
    psi.dotc(reference).norm_sqr().clamp(0.0, 1.0)
}

pub fn expectation(op: &SparseOperator, psi: &CVec) -> C64 {
    if psi.len() != op.dim() {
        return ZERO;
    }
    op.expectation(psi) / psi.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_lattice::{build_field_hamiltonian, build_reference_torus, build_toric_code, FieldFamily};

    #[test]
    fn lanczos_agrees_with_dense() {
        let h = crate::linalg::random_hermitian(60, 8);
        let s = SparseOperator::from_dense(&h);
        let (vals, _) = eigh(&h);
        let (theta, x) = lanczos_lowest(&s, &[], 1, 60).unwrap();
        assert!((theta - vals[0]).abs() < 1e-10);
        let (theta2, _) = lanczos_lowest(&s, &[x], 2, 60).unwrap();
        assert!((theta2 - vals[1]).abs() < 1e-10);
    }

    #[test]
    fn lanczos_path_finds_degenerate_cluster() {
        let lat = build_reference_torus();
        let h = build_toric_code(&lat).unwrap();
        let sub = lanczos_cluster(h.sparse(), 8, 1e-8).unwrap();
        assert_eq!(sub.1.len(), 4);
        assert!((sub.0 + 12.0).abs() < 1e-9);
    }

    #[test]
    fn toric_ground_space() {
        let lat = build_reference_torus();
        let h = build_toric_code(&lat).unwrap();
        let g = ground_subspace(h.sparse(), 8).unwrap();
        assert_eq!(g.degeneracy(), 4);
        assert!((g.energy + 12.0).abs() < 1e-10);
    }

    #[test]
    fn eigenstate_is_stationary_under_steps() {
        let (h, g) = build_field_hamiltonian(FieldFamily::Theta { theta: std::f64::consts::PI }, 4).unwrap();
        let mut psi = g.clone();
        for _ in 0..10 {
            trotter_step(&mut psi, &h, &h, 0.0, 0.3).unwrap();
        }
        assert!((psi.dotc(&g).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probe_outside_horizon_is_rejected() {
        let (h, g) = build_field_hamiltonian(FieldFamily::Theta { theta: 0.0 }, 2).unwrap();
        let sched = Schedule { kappa: 0.5, ..Schedule::linear(2.0, 0.1) };
        let probes = Probes { times: vec![1.5], ..Probes::none() };
        assert!(evolve(&h, &h, &g, &sched, &probes).is_err());
    }
}

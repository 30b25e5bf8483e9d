//! Majorana chain in its spin (transverse-field Ising) picture.
//!
//! Jordan-Wigner convention: `c_{2j} = (prod_{k<j} Z_k) X_j`,
//! `c_{2j+1} = (prod_{k<j} Z_k) Y_j` (0-based), so `-i c_{2j} c_{2j+1} = Z_j`.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{evolve, ground_subspace, Probes, Schedule};
use crate::linalg::{eigh, CMat, CVec, I};
use crate::schrieffer_wolff::{exact_sw, SwContext};
use crate::sparse::SparseOperator;
use crate::spin_lattice::{pauli_string, product_state, single_site_ground, x_string, Hamiltonian, Pauli, Term};

pub const MAX_SITES: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChainSpec {
    pub l: usize,
    pub g: f64,
    pub boundary: Boundary,
}

impl ChainSpec {
    pub fn open(l: usize, g: f64) -> Self {
        ChainSpec { l, g, boundary: Boundary::Open }
    }

    fn check(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::Domain(format!("chain length {} < 2", self.l)));
        }
        if self.l > MAX_SITES {
            return Err(Error::Budget(format!("chain length {} above {MAX_SITES}", self.l)));
        }
        Ok(())
    }
}

/// `H = -(1/2) sum_j X_j X_{j+1} + (g/2) sum_j Z_j`
pub fn build_tfim(spec: &ChainSpec) -> Result<Hamiltonian> {
    spec.check()?;
    let l = spec.l;
    let bonds = match spec.boundary {
        Boundary::Open => l - 1,
        Boundary::Periodic => l,
    };
    let mut terms: Vec<Term> = (0..bonds).map(|j| Term::Involution { coeff: -0.5, op: x_string(l, &[j, (j + 1) % l]) }).collect();
    if spec.g != 0.0 {
        terms.push(Term::Field { n: [0.0, 0.0, spec.g / 2.0] });
    }
    Hamiltonian::new(format!("tfim L={l} g={}", spec.g), l, terms)
}

/// `F = prod_j Z_j`
pub fn parity_operator(l: usize) -> SparseOperator {
    SparseOperator::diagonal_real(&(0..1usize << l).map(|x| if x.count_ones() % 2 == 0 { 1.0 } else { -1.0 }).collect::<Vec<_>>())
}

pub fn majorana_operator(l: usize, p: usize) -> SparseOperator {
    let j = p / 2;
    let mut factors: Vec<(usize, Pauli)> = (0..j).map(|k| (k, Pauli::Z)).collect();
    factors.push((j, if p % 2 == 0 { Pauli::X } else { Pauli::Y }));
    pauli_string(l, &factors)
}

/// `V = (i/4) sum_{p,q} W_pq c_p c_q` for real antisymmetric `W` of size `2L`,
/// optionally asserting `W_pq = 0` for `|p - q| > 2 range`.
pub fn quadratic_perturbation(l: usize, w: &DMatrix<f64>, range: Option<usize>) -> Result<SparseOperator> {
    let m = 2 * l;
    if w.nrows() != m || w.ncols() != m {
        return Err(Error::Structure(format!("coupling matrix must be {m}x{m}")));
    }
    if (w + w.transpose()).amax() > 1e-12 {
        return Err(Error::Domain("coupling matrix is not antisymmetric".into()));
    }
    if let Some(r) = range {
        for p in 0..m {
            for q in 0..m {
                if p.abs_diff(q) > 2 * r && w[(p, q)] != 0.0 {
                    return Err(Error::Domain(format!("coupling ({p},{q}) exceeds range {r}")));
                }
            }
        }
    }
    let cs: Vec<SparseOperator> = (0..m).map(|p| majorana_operator(l, p)).collect();
    let mut acc = SparseOperator::zero(1 << l);
    for p in 0..m {
        for q in 0..m {
            if w[(p, q)] != 0.0 {
                acc = acc.add_scaled(&cs[p].matmul(&cs[q]), I * (w[(p, q)] / 4.0));
            }
        }
    }
    Ok(acc)
}

/// Closed form `2 sin(pi / (2L + 1))`.
pub fn critical_gap(l: usize) -> f64 {
    2.0 * (std::f64::consts::PI / (2 * l + 1) as f64).sin()
}

/// Lowest single-fermion energy of the open chain at `g = 1`: `2 sin(pi / (4L + 2))`.
pub fn lowest_mode_gap(l: usize) -> f64 {
    2.0 * (std::f64::consts::PI / (4 * l + 2) as f64).sin()
}

fn sector_spectrum(h: &SparseOperator, l: usize, even: bool) -> Vec<f64> {
    let idx: Vec<usize> = (0..1usize << l).filter(|x| (x.count_ones() % 2 == 0) == even).collect();
    let mut pos = vec![usize::MAX; 1 << l];
    for (k, &i) in idx.iter().enumerate() {
        pos[i] = k;
    }
    let mut m = CMat::zeros(idx.len(), idx.len());
    for (k, &i) in idx.iter().enumerate() {
        for (j, v) in h.row(i) {
            m[(k, pos[j])] += v;
        }
    }
    eigh(&m).0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapReport {
    pub l: usize,
    pub formula: f64,
    pub even_sector_gap: f64,
    pub odd_sector_gap: f64,
    pub global_gap: f64,
    pub lowest_mode: f64,
}

/// Exact-diagonalization gaps of the open chain at `g = 1`.
pub fn gap_report(l: usize) -> Result<GapReport> {
    let h = build_tfim(&ChainSpec::open(l, 1.0))?;
    let even = sector_spectrum(h.sparse(), l, true);
    let odd = sector_spectrum(h.sparse(), l, false);
    let mut all: Vec<f64> = even.iter().chain(&odd).copied().collect();
    all.sort_by(f64::total_cmp);
    Ok(GapReport {
        l,
        formula: critical_gap(l),
        even_sector_gap: even[1] - even[0],
        odd_sector_gap: odd[1] - odd[0],
        global_gap: all[1] - all[0],
        lowest_mode: lowest_mode_gap(l),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub initial_parity: f64,
    pub max_parity_drift: f64,
    pub target_overlap: f64,
    pub eps_adia: f64,
}

/// Interpolates from `(g/2) sum Z` to the `g = 0` chain and follows the parity sector.
pub fn symmetry_protected_interpolation(spec: &ChainSpec, total_time: f64, dt: f64) -> Result<InterpolationReport> {
    spec.check()?;
    if spec.g == 0.0 {
        return Err(Error::Domain("field strength must be nonzero for a unique initial state".into()));
    }
    let l = spec.l;
    let n = [0.0, 0.0, spec.g / 2.0];
    let h_triv = Hamiltonian::new("field", l, vec![Term::Field { n }])?;
    let psi0 = product_state(l, single_site_ground(n));
    run_sector_interpolation(&h_triv, &psi0, spec, total_time, dt)
}

pub fn run_sector_interpolation(h_triv: &Hamiltonian, psi0: &CVec, spec: &ChainSpec, total_time: f64, dt: f64) -> Result<InterpolationReport> {
    let l = spec.l;
    let parity = parity_operator(l);
    let p0 = parity.expectation(psi0).re / psi0.norm_squared();
    if (p0.abs() - 1.0).abs() > 1e-10 {
        return Err(Error::Contract(format!("initial state is not a parity eigenstate (<F> = {p0})")));
    }
    let h_top = build_tfim(&ChainSpec { g: 0.0, ..*spec })?;
    let probes = Probes { samples: 64, observables: vec![("parity".into(), parity.clone())], ..Probes::none() };
    let sched = Schedule::linear(total_time, dt);
    let (psi, traj) = evolve(h_triv, &h_top, psi0, &sched, &probes)?;
    let drift = traj.samples.iter().map(|s| (s.observables[0] - p0).abs()).fold(0.0, f64::max);
    let ground = ground_subspace(h_top.sparse(), 4)?;
    let sector = sector_projector_in_frame(&ground.compress(&parity), p0)?;
    let target = &ground.frame * sector;
    let overlap = (target.adjoint() * &psi).norm_squared();
    Ok(InterpolationReport { initial_parity: p0, max_parity_drift: drift, target_overlap: overlap, eps_adia: 1.0 - ground.weight(&psi) })
}

/// Frame vector (as coordinates) of the parity eigenvalue closest to `value`.
fn sector_projector_in_frame(parity_frame: &CMat, value: f64) -> Result<CVec> {
    let (vals, vecs) = eigh(parity_frame);
    let (k, v) = vals.iter().enumerate().min_by(|a, b| (a.1 - value).abs().total_cmp(&(b.1 - value).abs())).expect("non-empty frame");
    if (v - value).abs() > 1e-8 {
        return Err(Error::Contract(format!("no ground state with parity {value}")));
    }
    Ok(vecs.column(k).into_owned())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParityEffectiveReport {
    pub l: usize,
    pub g: f64,
    pub eps: f64,
    pub e0: f64,
    pub e1: f64,
    pub delta: f64,
    /// `H_eff = alpha I + beta F` in the parity basis
    pub alpha: f64,
    pub beta: f64,
    pub parity_residual: f64,
    pub printed_form_residual: f64,
    pub gap_consistent_residual: f64,
}

impl ParityEffectiveReport {
    pub fn csv_header() -> &'static str {
        "L,g,eps,E0,E1,Delta,beta_fit,parity_residual"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.15e},{:.15e},{:.15e},{:.15e},{:.3e}",
            self.l, self.g, self.eps, self.e0, self.e1, self.delta, self.beta, self.parity_residual
        )
    }
}

pub fn default_perturbation(l: usize) -> SparseOperator {
    crate::spin_lattice::field_operator(l, [0.0, 0.0, -0.5])
}

/// Exact SW for `H_top + eps V` (default `V = -(1/2) sum Z`), resolved in the parity basis.
pub fn exact_parity_effective(spec: &ChainSpec, eps: f64, v: Option<&SparseOperator>) -> Result<ParityEffectiveReport> {
    spec.check()?;
    let l = spec.l;
    let h0 = build_tfim(&ChainSpec { g: 0.0, ..*spec })?;
    let owned;
    let v = match v {
        Some(v) => v,
        None => {
            owned = default_perturbation(l);
            &owned
        }
    };
    let ctx = SwContext::from_sparse(h0.sparse(), v, 4)?;
    if ctx.k != 2 {
        return Err(Error::Contract(format!("expected a two-fold ground space, found {}", ctx.k)));
    }
    let heff = exact_sw(&ctx, eps)?.matrix;
    let (pv, pvec) = eigh(&ctx.compress_full(&parity_operator(l)));
    // order (even, odd)
    let basis = CMat::from_columns(&[pvec.column(1).into_owned(), pvec.column(0).into_owned()]);
    if (pv[1] - 1.0).abs() > 1e-8 || (pv[0] + 1.0).abs() > 1e-8 {
        return Err(Error::Contract("ground frame does not split into parity sectors".into()));
    }
    let hp = basis.adjoint() * &heff * &basis;
    let parity_residual = hp[(0, 1)].norm().max(hp[(1, 0)].norm());
    let (he, ho) = (hp[(0, 0)].re, hp[(1, 1)].re);
    let (e0, e1) = (he.min(ho), he.max(ho));
    let delta = e1 - e0;
    let alpha = (he + ho) / 2.0;
    let beta = (he - ho) / 2.0;
    let form = |a: f64, b: f64| ((a + b - he).abs()).max((a - b - ho).abs());
    let printed = form(e0 / 2.0, -delta / 2.0).min(form(e0 / 2.0, delta / 2.0));
    let consistent = form((e0 + e1) / 2.0, -delta / 2.0).min(form((e0 + e1) / 2.0, delta / 2.0));
    Ok(ParityEffectiveReport {
        l,
        g: spec.g,
        eps,
        e0,
        e1,
        delta,
        alpha,
        beta,
        parity_residual,
        printed_form_residual: printed,
        gap_consistent_residual: consistent,
    })
}

pub fn write_parity_csv<W: Write>(rows: &[ParityEffectiveReport], mut w: W) -> Result<()> {
    writeln!(w, "{}", ParityEffectiveReport::csv_header())?;
    for r in rows {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// `[F, H]` largest entry.
pub fn parity_commutator(h: &SparseOperator, l: usize) -> f64 {
    parity_operator(l).commutator(h).max_abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_spectrum_at_zero_field() {
        let h = build_tfim(&ChainSpec::open(2, 0.0)).unwrap();
        let (vals, _) = eigh(&h.sparse().to_dense());
        for (v, want) in vals.iter().zip([-0.5, -0.5, 0.5, 0.5]) {
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn parity_commutes_with_chain() {
        let h = build_tfim(&ChainSpec::open(6, 0.7)).unwrap();
        assert!(parity_commutator(h.sparse(), 6) < 1e-12);
    }

    #[test]
    fn majorana_pairs_give_z() {
        let l = 3;
        for j in 0..l {
            let z = majorana_operator(l, 2 * j).matmul(&majorana_operator(l, 2 * j + 1)).scale(-I);
            let want = crate::spin_lattice::z_string(l, &[j]);
            assert!(z.max_abs_diff(&want) < 1e-14);
        }
    }

    #[test]
    fn quadratic_perturbation_reproduces_field() {
        let l = 3;
        let mut w = DMatrix::zeros(2 * l, 2 * l);
        for j in 0..l {
            // (i/4)(w c_a c_b - w c_b c_a) = (i/2) w c_a c_b = -(w/2) Z_j
            w[(2 * j, 2 * j + 1)] = 1.0;
            w[(2 * j + 1, 2 * j)] = -1.0;
        }
        let v = quadratic_perturbation(l, &w, Some(1)).unwrap();
        assert!(v.max_abs_diff(&default_perturbation(l)) < 1e-14);
    }

    #[test]
    fn lowest_mode_matches_diagonalization() {
        for l in 2..=6 {
            let r = gap_report(l).unwrap();
            assert!((r.global_gap - r.lowest_mode).abs() < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn zero_field_effective_is_degenerate() {
        let r = exact_parity_effective(&ChainSpec::open(4, 0.0), 0.0, None).unwrap();
        assert!(r.beta.abs() < 1e-12);
        assert!((r.alpha + 1.5).abs() < 1e-12);
    }
}

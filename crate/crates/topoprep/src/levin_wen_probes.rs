//! Single-edge ring operators on string-net ground states, loop tomography of
//! the flux sectors, and the rhombic effective Hamiltonian in the flux basis.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::anyon_algebra::{rhombic_rotation, CategoryData};
use crate::error::{Error, Result};
use crate::linalg::{c, eigh, CMat, CVec, MaxModulus, C64, ONE, ZERO};
use crate::sparse::SparseOperator;
use crate::spin_lattice::{plaquette_operator, vertex_projector, HoneycombTorus, ModelKind};

/// `O_a |b> = (S_ab / S_1b) |b>` on `edge`, identity elsewhere.
pub fn ring_operator(cat: &CategoryData, a: usize, edge: usize, n_sites: usize) -> Result<SparseOperator> {
    if cat.n() != 2 {
        return Err(Error::Unsupported(format!("ring operators need a two-label edge category, {} has {}", cat.name, cat.n())));
    }
    if a >= cat.n() {
        return Err(Error::Domain(format!("label {a} out of range")));
    }
    if edge >= n_sites {
        return Err(Error::Domain(format!("edge {edge} outside {n_sites} sites")));
    }
    let local: Vec<C64> = (0..2).map(|b| cat.s[(a, b)] / cat.s[(0, b)]).collect();
    Ok(SparseOperator::diagonal(&(0..1usize << n_sites).map(|x| local[(x >> edge) & 1]).collect::<Vec<_>>()))
}

/// Product of ring operators (or Pauli `Z` for the toric code) over `edges`.
pub fn loop_operator(model: ModelKind, edges: &[usize], n_sites: usize) -> Result<SparseOperator> {
    match model.edge_category() {
        None => Ok(crate::spin_lattice::z_string(n_sites, edges)),
        Some(cat) => {
            let mut acc = SparseOperator::identity(1 << n_sites);
            for &e in edges {
                acc = acc.matmul(&ring_operator(&cat, 1, e, n_sites)?);
            }
            Ok(acc)
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExcitationReport {
    pub label: usize,
    pub edge: usize,
    /// largest `|B_p O_a psi|` over adjacent plaquettes and frame vectors
    pub plaquette_residual: f64,
    /// Rayleigh quotient of `O_a psi` minus the ground energy, per frame vector
    pub energy_shifts: Vec<f64>,
    /// largest `|H phi - (E0 + shift) phi| / |phi|` with the nominal shift (2, or 0 for the vacuum label)
    pub eigen_residual: f64,
    /// weight of `O_a psi / |O_a psi|` inside the ground space, per frame vector
    pub ground_weights: Vec<f64>,
}

pub fn excitation_check(model: ModelKind, lat: &HoneycombTorus, a: usize, edge: usize, frame: &CMat, e0: f64) -> Result<ExcitationReport> {
    let cat = model.edge_category().ok_or_else(|| Error::Unsupported("excitation check needs a string-net model".into()))?;
    let h = model.build(lat)?;
    let o = ring_operator(&cat, a, edge, lat.n_edges)?;
    let vproj: Vec<Vec<f64>> = lat.vertices.iter().map(|v| vertex_projector(&cat, lat, v)).collect();
    let valid: Vec<bool> = (0..lat.dim()).map(|x| vproj.iter().all(|p| p[x] == 1.0)).collect();
    let adjacent: Vec<SparseOperator> =
        lat.plaquettes.iter().filter(|p| p.boundary.contains(&edge)).map(|p| plaquette_operator(&cat, lat, p, &valid)).collect();
    if adjacent.len() != 2 {
        return Err(Error::Structure(format!("edge {edge} borders {} plaquettes", adjacent.len())));
    }
    let nominal = if a == 0 { 0.0 } else { 2.0 };
    let mut rep = ExcitationReport { label: a, edge, plaquette_residual: 0.0, energy_shifts: vec![], eigen_residual: 0.0, ground_weights: vec![] };
    for k in 0..frame.ncols() {
        let psi: CVec = frame.column(k).into_owned();
        let phi = o.apply(&psi);
        let norm = phi.norm();
        if a != 0 {
            for b in &adjacent {
                rep.plaquette_residual = rep.plaquette_residual.max(b.apply(&phi).norm());
            }
        }
        let hphi = h.sparse().apply(&phi);
        rep.energy_shifts.push(phi.dotc(&hphi).re / (norm * norm) - e0);
        rep.eigen_residual = rep.eigen_residual.max((&hphi - phi.scale(e0 + nominal)).norm() / norm);
        rep.ground_weights.push((frame.adjoint() * &phi).norm_squared() / (norm * norm));
    }
    Ok(rep)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluxSector {
    pub name: String,
    pub value: f64,
    /// projector in frame coordinates
    #[serde(skip)]
    pub projector: CMat,
    pub expectation: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TomographyReport {
    pub model: String,
    pub loop_edges: Vec<usize>,
    /// `M = c F` with this `c`
    pub scale: f64,
    pub rescaled_eigenvalues: Vec<f64>,
    pub mismatch: f64,
    pub sectors: Vec<FluxSector>,
}

impl TomographyReport {
    pub fn sector(&self, name: &str) -> Option<&FluxSector> {
        self.sectors.iter().find(|s| s.name == name)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "model,loop,sector,expectation")?;
        let lp = self.loop_edges.iter().map(|e| (e + 1).to_string()).collect::<Vec<_>>().join("-");
        for s in &self.sectors {
            let e = s.expectation.map(|x| format!("{x:.12}")).unwrap_or_default();
            writeln!(w, "{},{},\"{}\",{}", self.model, lp, s.name, e)?;
        }
        Ok(())
    }
}

/// Ground-category label whose string the loop product measures.
fn loop_label(model: ModelKind, ground: &CategoryData) -> usize {
    match model {
        ModelKind::Toric => 2,
        // (a, a) with a the nontrivial edge label
        _ => {
            let n = (ground.n() as f64).sqrt().round() as usize;
            n + 1
        }
    }
}

/// `x -> S_{ax} / S_{1x}`
pub fn string_spectrum(cat: &CategoryData, a: usize) -> Vec<f64> {
    (0..cat.n()).map(|x| (cat.s[(a, x)] / cat.s[(0, x)]).re).collect()
}

pub const TOMOGRAPHY_TOL: f64 = 1e-6;

/// Resolves the flux sectors seen by the loop product along `loop_edges`.
pub fn flux_tomography(model: ModelKind, loop_edges: &[usize], frame: &CMat, state: Option<&CVec>) -> Result<TomographyReport> {
    let k = frame.ncols();
    let gram = frame.adjoint() * frame;
    if (&gram - CMat::identity(k, k)).max_mod() > 1e-8 {
        return Err(Error::Contract("ground frame is not orthonormal".into()));
    }
    let n_sites = (frame.nrows() as f64).log2().round() as usize;
    let ground = model.ground_category();
    if ground.n() != k {
        return Err(Error::Contract(format!("frame has {k} columns, {} has {} labels", ground.name, ground.n())));
    }
    let m = loop_operator(model, loop_edges, n_sites)?.compress(frame);
    let m = (&m + m.adjoint()).scale(0.5);
    let (mv, mvec) = eigh(&m);
    let a = loop_label(model, &ground);
    let spectrum = string_spectrum(&ground, a);
    let mut target = spectrum.clone();
    target.sort_by(f64::total_cmp);

    // fit c with either ordering of the sign
    let fit = |t: &[f64]| {
        let num: f64 = mv.iter().zip(t).map(|(m, t)| m * t).sum();
        let den: f64 = mv.iter().map(|m| m * m).sum();
        let c = if den > 0.0 { num / den } else { f64::NAN };
        let dev = mv.iter().zip(t).map(|(m, t)| (m * c - t).abs()).fold(0.0, f64::max);
        (c, dev)
    };
    let rev: Vec<f64> = target.iter().rev().copied().collect();
    let (c_pos, d_pos) = fit(&target);
    let (c_neg, d_neg) = fit(&rev);
    let (scale, mismatch) = if d_pos <= d_neg { (c_pos, d_pos) } else { (c_neg, d_neg) };
    if !(mismatch <= TOMOGRAPHY_TOL) {
        return Err(Error::Contract(format!("loop spectrum does not match {}: deviation {mismatch:e}", ground.name)));
    }
    let rescaled: Vec<f64> = mv.iter().map(|x| x * scale).collect();

    let coords = state.map(|psi| frame.adjoint() * psi);
    let mut values: Vec<f64> = Vec::new();
    for &v in &target {
        if values.last().is_none_or(|&l| (v - l).abs() > TOMOGRAPHY_TOL) {
            values.push(v);
        }
    }
    let sectors = values
        .iter()
        .map(|&v| {
            let labels: Vec<&str> = (0..ground.n()).filter(|&x| (spectrum[x] - v).abs() <= TOMOGRAPHY_TOL).map(|x| ground.labels[x].as_str()).collect();
            let mut p = CMat::zeros(k, k);
            for (j, r) in rescaled.iter().enumerate() {
                if (r - v).abs() <= 10.0 * TOMOGRAPHY_TOL {
                    let col = mvec.column(j);
                    p += &col * col.adjoint();
                }
            }
            let expectation = coords.as_ref().map(|c| c.dotc(&(&p * c)).re);
            FluxSector { name: labels.join("+"), value: v, projector: p, expectation }
        })
        .collect();
    Ok(TomographyReport { model: model.name().into(), loop_edges: loop_edges.to_vec(), scale, rescaled_eigenvalues: rescaled, mismatch, sectors })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalyticGroundState {
    pub labels: Vec<String>,
    pub amplitudes: Vec<C64>,
    pub eigenvalues: Vec<f64>,
    pub degenerate: bool,
    #[serde(skip)]
    pub h_eff: CMat,
    /// all lowest eigenvectors when `degenerate`
    #[serde(skip)]
    pub frame: CMat,
}

/// `F = diag(S_{(a,a)x} / S_{1x})`, `A = T S`, `H = -(F + A^-1 F A + A^-2 F A^2)`.
pub fn rhombic_effective_hamiltonian(cat: &CategoryData) -> Result<CMat> {
    let n = cat.n();
    let n1 = (n as f64).sqrt().round() as usize;
    if n1 * n1 != n {
        return Err(Error::Structure(format!("{} is not a doubled category", cat.name)));
    }
    if n == 1 {
        return Ok(CMat::from_element(1, 1, -ONE.scale(3.0)));
    }
    let a = n1 + 1;
    let f = CMat::from_diagonal(&CVec::from_iterator(n, string_spectrum(cat, a).into_iter().map(|x| c(x, 0.0))));
    let am = cat.t_matrix() * &cat.s;
    let ai = am.clone().try_inverse().ok_or_else(|| Error::Contract("T S is singular".into()))?;
    let h = (&f + &ai * &f * &am + &ai * &ai * &f * &am * &am).scale(-1.0);
    Ok((&h + h.adjoint()).scale(0.5))
}

pub fn analytic_effective_ground_state(cat: &CategoryData) -> Result<AnalyticGroundState> {
    let h = rhombic_effective_hamiltonian(cat)?;
    let (vals, vecs) = eigh(&h);
    let degenerate = vals.len() > 1 && vals[1] - vals[0] < 1e-9;
    let mut g: CVec = vecs.column(0).into_owned();
    fix_phase(&mut g);
    let k = vals.iter().take_while(|&&v| v - vals[0] < 1e-9).count();
    Ok(AnalyticGroundState {
        labels: cat.labels.clone(),
        amplitudes: g.iter().copied().collect(),
        eigenvalues: vals,
        degenerate,
        h_eff: h,
        frame: vecs.columns(0, k).into_owned(),
    })
}

/// Makes the largest-modulus component real and positive.
pub fn fix_phase(v: &mut CVec) {
    let (mut best, mut arg) = (0.0, ZERO);
    for z in v.iter() {
        if z.norm() > best + 1e-12 {
            best = z.norm();
            arg = *z;
        }
    }
    if best > 0.0 {
        let ph = arg.conj() / best;
        v.iter_mut().for_each(|z| *z *= ph);
    }
}

/// `|| [H, T S^3 T S] ||` for the rhombic effective Hamiltonian.
pub fn rotation_covariance_defect(cat: &CategoryData) -> Result<f64> {
    let h = rhombic_effective_hamiltonian(cat)?;
    let u = rhombic_rotation(cat);
    Ok((&h * &u - &u * &h).max_mod())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anyon_algebra::golden_ratio;

    #[test]
    fn semion_ring_is_pauli_z() {
        let cat = CategoryData::shipped("semion").unwrap();
        let o = ring_operator(&cat, 1, 0, 1).unwrap();
        assert!((o.get(0, 0) - ONE).norm() < 1e-14);
        assert!((o.get(1, 1) + ONE).norm() < 1e-14);
    }

    #[test]
    fn fibonacci_ring_and_z_relation() {
        let cat = CategoryData::shipped("fibonacci").unwrap();
        let phi = golden_ratio();
        let o = ring_operator(&cat, 1, 0, 1).unwrap();
        assert!((o.get(0, 0).re - phi).abs() < 1e-12);
        assert!((o.get(1, 1).re + 1.0 / phi).abs() < 1e-12);
        let z = o.scale(c(2.0, 0.0)).add_scaled(&SparseOperator::identity(2), c(-1.0, 0.0)).scale(c(phi / (phi + 2.0), 0.0));
        assert!((z.get(0, 0) - ONE).norm() < 1e-12 && (z.get(1, 1) + ONE).norm() < 1e-12);
        let id = ring_operator(&cat, 0, 0, 1).unwrap();
        assert!(id.max_abs_diff(&SparseOperator::identity(2)) < 1e-14);
    }

    #[test]
    fn analytic_state_is_rotation_covariant() {
        for name in ["doubled_fibonacci", "doubled_semion", "toric_code"] {
            let cat = CategoryData::shipped(name).unwrap();
            assert!(rotation_covariance_defect(&cat).unwrap() < 1e-12, "{name}");
        }
    }

    #[test]
    fn analytic_fibonacci_moduli() {
        let cat = CategoryData::shipped("doubled_fibonacci").unwrap();
        let g = analytic_effective_ground_state(&cat).unwrap();
        assert!(!g.degenerate);
        let w: Vec<f64> = g.amplitudes.iter().map(|z| z.norm_sqr()).collect();
        for (x, want) in w.iter().zip([0.5125, 0.0036, 0.0036, 0.4804]) {
            assert!((x - want).abs() < 1e-4, "{w:?}");
        }
    }

    #[test]
    fn trivial_category_gives_unique_state() {
        let mut cat = CategoryData::shipped("fibonacci").unwrap();
        cat.labels.truncate(1);
        cat.s = CMat::identity(1, 1);
        cat.t = vec![ONE];
        cat.qdim.truncate(1);
        let g = analytic_effective_ground_state(&cat).unwrap();
        assert_eq!(g.amplitudes.len(), 1);
        assert!((g.amplitudes[0] - ONE).norm() < 1e-14);
    }
}

//! The 12-edge honeycomb torus, its qubit Hamiltonians and symmetry operators.
//!
//! Edges are stored 0-based; edge `e` is bit `e` of a computational basis index,
//! bit value 0 meaning the vacuum label (Pauli-Z eigenvalue +1).

use std::collections::BTreeSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::anyon_algebra::CategoryData;
use crate::error::{Error, Result};
use crate::linalg::{c, cis, eigh, CMat, CVec, C64, I, ONE, ZERO};
use crate::sparse::SparseOperator;

const COMMUTE_TOL: f64 = 1e-10;
pub const DENSE_EXP_LIMIT: usize = 4096;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Plaquette {
    /// inner edges in cyclic order
    pub boundary: [usize; 6],
    /// `legs[k]` meets the boundary at the vertex between `boundary[k]` and `boundary[k+1]`
    pub legs: [usize; 6],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HoneycombTorus {
    pub n_edges: usize,
    pub vertices: Vec<[usize; 3]>,
    pub plaquettes: Vec<Plaquette>,
    pub minimal_dual_loops: Vec<Vec<usize>>,
    pub rotation_perm: Vec<usize>,
}

fn zero_based<const N: usize>(a: [usize; N]) -> [usize; N] {
    a.map(|e| e - 1)
}

/// Edge labels 1..=12 as drawn in the usual figure of this torus, converted to 0-based.
pub fn edges1(labels: &[usize]) -> Vec<usize> {
    labels.iter().map(|&e| e - 1).collect()
}

pub fn build_reference_torus() -> HoneycombTorus {
    let vertices = [[1, 5, 10], [5, 9, 4], [9, 2, 6], [2, 7, 12], [7, 11, 3], [11, 1, 8], [3, 6, 10], [4, 8, 12]]
        .into_iter()
        .map(zero_based)
        .collect();
    let plaquettes = [
        ([1, 5, 9, 2, 7, 11], [10, 4, 6, 12, 3, 8]),
        ([1, 10, 6, 2, 12, 8], [5, 3, 9, 7, 4, 11]),
        ([5, 10, 3, 7, 12, 4], [1, 6, 11, 2, 8, 9]),
        ([9, 6, 3, 11, 8, 4], [2, 10, 7, 1, 12, 5]),
    ]
    .into_iter()
    .map(|(b, l)| Plaquette { boundary: zero_based(b), legs: zero_based(l) })
    .collect();
    let rotation_perm = edges1(&[5, 7, 8, 6, 9, 12, 11, 10, 2, 4, 1, 3]);
    let minimal_dual_loops = vec![edges1(&[1, 2]), edges1(&[5, 7]), edges1(&[9, 11])];
    HoneycombTorus { n_edges: 12, vertices, plaquettes, minimal_dual_loops, rotation_perm }
}

impl HoneycombTorus {
    pub fn dim(&self) -> usize {
        1 << self.n_edges
    }

    pub fn rotate_edge(&self, e: usize) -> usize {
        self.rotation_perm[e]
    }

    pub fn rotate_set(&self, edges: &[usize]) -> BTreeSet<usize> {
        edges.iter().map(|&e| self.rotation_perm[e]).collect()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.n_edges;
        let fail = |m: String| Err(Error::Structure(m));
        let mut vcount = vec![0; n];
        for v in &self.vertices {
            for &e in v {
                if e >= n {
                    return fail(format!("vertex edge {e} out of range"));
                }
                vcount[e] += 1;
            }
        }
        let mut pcount = vec![0; n];
        for p in &self.plaquettes {
            for &e in &p.boundary {
                pcount[e] += 1;
            }
        }
        if vcount.iter().any(|&k| k != 2) {
            return fail(format!("vertex incidence {vcount:?}"));
        }
        if pcount.iter().any(|&k| k != 2) {
            return fail(format!("plaquette incidence {pcount:?}"));
        }
        if self.vertices.len() + self.plaquettes.len() != n {
            return fail("Euler characteristic is not zero".into());
        }
        let vsets: BTreeSet<BTreeSet<usize>> = self.vertices.iter().map(|v| v.iter().copied().collect()).collect();
        for p in &self.plaquettes {
            for k in 0..6 {
                let corner: BTreeSet<usize> = [p.boundary[k], p.boundary[(k + 1) % 6], p.legs[k]].into_iter().collect();
                if !vsets.contains(&corner) {
                    return fail(format!("plaquette corner {corner:?} is not a vertex"));
                }
            }
        }
        let mut seen = BTreeSet::new();
        if self.rotation_perm.iter().any(|&e| e >= n || !seen.insert(e)) {
            return fail("rotation is not a permutation".into());
        }
        let mut e: Vec<usize> = (0..n).collect();
        for _ in 0..6 {
            e = e.iter().map(|&x| self.rotation_perm[x]).collect();
        }
        if e != (0..n).collect::<Vec<_>>() {
            return fail("rotation does not have order dividing 6".into());
        }
        for v in &self.vertices {
            if !vsets.contains(&self.rotate_set(v)) {
                return fail("rotation does not map vertices to vertices".into());
            }
        }
        let psets: BTreeSet<BTreeSet<usize>> = self.plaquettes.iter().map(|p| p.boundary.iter().copied().collect()).collect();
        for p in &self.plaquettes {
            if !psets.contains(&self.rotate_set(&p.boundary)) {
                return fail("rotation does not map plaquettes to plaquettes".into());
            }
        }
        let lsets: Vec<BTreeSet<usize>> = self.minimal_dual_loops.iter().map(|l| l.iter().copied().collect()).collect();
        for (k, l) in self.minimal_dual_loops.iter().enumerate() {
            if self.rotate_set(l) != lsets[(k + 1) % lsets.len()] {
                return fail("minimal dual loops are not cyclically permuted".into());
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// qubit operators

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

#[inline]
fn bit(x: usize, e: usize) -> usize {
    (x >> e) & 1
}

pub fn pauli_string(n_sites: usize, factors: &[(usize, Pauli)]) -> SparseOperator {
    let dim = 1usize << n_sites;
    let trips = (0..dim).map(|x| {
        let mut y = x;
        let mut amp = ONE;
        for &(e, p) in factors {
            let b = bit(x, e);
            match p {
                Pauli::X => y ^= 1 << e,
                Pauli::Y => {
                    y ^= 1 << e;
                    amp *= if b == 0 { I } else { -I };
                }
                Pauli::Z => {
                    if b == 1 {
                        amp = -amp;
                    }
                }
            }
        }
        (y, x, amp)
    });
    SparseOperator::from_triplets(dim, trips)
}

pub fn z_string(n_sites: usize, edges: &[usize]) -> SparseOperator {
    pauli_string(n_sites, &edges.iter().map(|&e| (e, Pauli::Z)).collect::<Vec<_>>())
}

pub fn x_string(n_sites: usize, edges: &[usize]) -> SparseOperator {
    pauli_string(n_sites, &edges.iter().map(|&e| (e, Pauli::X)).collect::<Vec<_>>())
}

/// `sum_j (n_x X_j + n_y Y_j + n_z Z_j)`
pub fn field_operator(n_sites: usize, n: [f64; 3]) -> SparseOperator {
    let dim = 1usize << n_sites;
    let mut trips = Vec::with_capacity(dim * (n_sites + 1));
    for x in 0..dim {
        let mut diag = 0.0;
        for e in 0..n_sites {
            let b = bit(x, e);
            diag += if b == 0 { n[2] } else { -n[2] };
            // <y|(n_x X + n_y Y)|x> with y = x flipped at e
            let off = if b == 0 { c(n[0], n[1]) } else { c(n[0], -n[1]) };
            trips.push((x ^ (1 << e), x, off));
        }
        trips.push((x, x, c(diag, 0.0)));
    }
    SparseOperator::from_triplets(dim, trips)
}

/// `exp(-i theta n.sigma)` as a 2x2 matrix `[[u00, u01], [u10, u11]]`.
fn su2(n: [f64; 3], theta: f64) -> [[C64; 2]; 2] {
    let r = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if r == 0.0 {
        return [[ONE, ZERO], [ZERO, ONE]];
    }
    let (s, co) = (theta * r).sin_cos();
    let k = -I * s / r;
    [[c(co, 0.0) + k * n[2], k * c(n[0], -n[1])], [k * c(n[0], n[1]), c(co, 0.0) - k * n[2]]]
}

// ---------------------------------------------------------------------------
// Hamiltonians as commuting term lists

#[derive(Clone, Debug)]
pub enum Term {
    /// `coeff * P` with `P^2 = P`
    Projector { coeff: f64, op: SparseOperator },
    /// `coeff * S` with `S^2 = I`, `S` Hermitian
    Involution { coeff: f64, op: SparseOperator },
    /// real diagonal
    Diagonal { diag: Vec<f64> },
    /// `sum_j n.sigma_j` over all sites
    Field { n: [f64; 3] },
}

impl Term {
    fn to_sparse(&self, n_sites: usize) -> SparseOperator {
        match self {
            Term::Projector { coeff, op } | Term::Involution { coeff, op } => op.scale(c(*coeff, 0.0)),
            Term::Diagonal { diag } => SparseOperator::diagonal_real(diag),
            Term::Field { n } => field_operator(n_sites, *n),
        }
    }

    fn apply_exp(&self, theta: f64, psi: &mut [C64], n_sites: usize) {
        match self {
            Term::Projector { coeff, op } => {
                let k = cis(-theta * coeff) - ONE;
                let mut tmp = vec![ZERO; psi.len()];
                op.apply_into(psi, &mut tmp);
                psi.iter_mut().zip(&tmp).for_each(|(p, t)| *p += k * t);
            }
            Term::Involution { coeff, op } => {
                let (s, co) = (theta * coeff).sin_cos();
                let mut tmp = vec![ZERO; psi.len()];
                op.apply_into(psi, &mut tmp);
                psi.iter_mut().zip(&tmp).for_each(|(p, t)| *p = *p * co - I * s * t);
            }
            Term::Diagonal { diag } => {
                psi.iter_mut().zip(diag).for_each(|(p, d)| *p *= cis(-theta * d));
            }
            Term::Field { n } => {
                let u = su2(*n, theta);
                for e in 0..n_sites {
                    let m = 1usize << e;
                    for x in 0..psi.len() {
                        if x & m == 0 {
                            let (a, b) = (psi[x], psi[x | m]);
                            psi[x] = u[0][0] * a + u[0][1] * b;
                            psi[x | m] = u[1][0] * a + u[1][1] * b;
                        }
                    }
                }
            }
        }
    }
}

/// A Hamiltonian kept both as a term list and as one sparse matrix.
#[derive(Debug)]
pub struct Hamiltonian {
    pub name: String,
    pub n_sites: usize,
    pub terms: Vec<Term>,
    sparse: SparseOperator,
    commuting: bool,
    dense_eig: OnceLock<(Vec<f64>, CMat)>,
}

impl Clone for Hamiltonian {
    fn clone(&self) -> Self {
        Hamiltonian {
            name: self.name.clone(),
            n_sites: self.n_sites,
            terms: self.terms.clone(),
            sparse: self.sparse.clone(),
            commuting: self.commuting,
            dense_eig: OnceLock::new(),
        }
    }
}

impl Hamiltonian {
    pub fn new(name: impl Into<String>, n_sites: usize, terms: Vec<Term>) -> Result<Self> {
        let dim = 1usize << n_sites;
        let parts: Vec<SparseOperator> = terms.iter().map(|t| t.to_sparse(n_sites)).collect();
        for (t, p) in terms.iter().zip(&parts) {
            if p.dim() != dim {
                return Err(Error::Structure(format!("term of dimension {} in {dim}-dim model", p.dim())));
            }
            let bad = match t {
                Term::Projector { op, .. } => op.matmul(op).max_abs_diff(op) > COMMUTE_TOL,
                Term::Involution { op, .. } => op.matmul(op).max_abs_diff(&SparseOperator::identity(dim)) > COMMUTE_TOL,
                _ => false,
            };
            if bad || !p.is_hermitian() {
                return Err(Error::Contract("term is not a Hermitian projector/involution as declared".into()));
            }
        }
        let mut commuting = true;
        'outer: for i in 0..parts.len() {
            for j in (i + 1)..parts.len() {
                let both_diag = matches!(terms[i], Term::Diagonal { .. }) && matches!(terms[j], Term::Diagonal { .. });
                if !both_diag && parts[i].commutator(&parts[j]).max_abs() > COMMUTE_TOL {
                    commuting = false;
                    break 'outer;
                }
            }
        }
        let sparse = SparseOperator::sum(dim, parts.iter().map(|p| (1.0, p)));
        Ok(Hamiltonian { name: name.into(), n_sites, terms, sparse, commuting, dense_eig: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.sparse.dim()
    }

    pub fn sparse(&self) -> &SparseOperator {
        &self.sparse
    }

    pub fn is_commuting(&self) -> bool {
        self.commuting
    }

    /// `psi <- exp(-i theta H) psi`, term by term when the terms commute.
    pub fn apply_exp(&self, theta: f64, psi: &mut CVec) -> Result<()> {
        if self.commuting {
            for t in &self.terms {
                t.apply_exp(theta, psi.as_mut_slice(), self.n_sites);
            }
            return Ok(());
        }
        if self.dim() > DENSE_EXP_LIMIT {
            return Err(Error::Unsupported(format!("{}: non-commuting terms above dense limit", self.name)));
        }
        let (vals, vecs) = self.dense_eig.get_or_init(|| eigh(&self.sparse.to_dense()));
        let mut coeff = vecs.adjoint() * &*psi;
        for (k, v) in vals.iter().enumerate() {
            coeff[k] *= cis(-theta * v);
        }
        *psi = vecs * coeff;
        Ok(())
    }

    /// Sum of the individual terms evaluated on `x`, for cross-checking the cached matrix.
    pub fn apply_termwise(&self, x: &CVec) -> CVec {
        let mut out = CVec::zeros(x.len());
        for t in &self.terms {
            out += t.to_sparse(self.n_sites).apply(x);
        }
        out
    }

    pub fn term_operators(&self) -> Vec<SparseOperator> {
        self.terms.iter().map(|t| t.to_sparse(self.n_sites)).collect()
    }
}

pub fn build_toric_code(lat: &HoneycombTorus) -> Result<Hamiltonian> {
    lat.check()?;
    let n = lat.n_edges;
    let mut terms = Vec::new();
    for v in &lat.vertices {
        terms.push(Term::Involution { coeff: -1.0, op: z_string(n, v) });
    }
    for p in &lat.plaquettes {
        terms.push(Term::Involution { coeff: -1.0, op: x_string(n, &p.boundary) });
    }
    Hamiltonian::new("toric", n, terms)
}

/// Toric code conjugated by a Hadamard on every edge: vertex terms become X
/// stars and plaquette terms Z loops.
pub fn build_toric_code_hadamard(lat: &HoneycombTorus) -> Result<Hamiltonian> {
    lat.check()?;
    let n = lat.n_edges;
    let mut terms = Vec::new();
    for v in &lat.vertices {
        terms.push(Term::Involution { coeff: -1.0, op: x_string(n, v) });
    }
    for p in &lat.plaquettes {
        terms.push(Term::Involution { coeff: -1.0, op: z_string(n, &p.boundary) });
    }
    Hamiltonian::new("toric_hadamard", n, terms)
}

fn require_qubit_category(cat: &CategoryData) -> Result<()> {
    if !cat.is_self_dual() {
        return Err(Error::Unsupported(format!("{}: string-net needs self-dual labels", cat.name)));
    }
    if cat.n() != 2 {
        return Err(Error::Unsupported(format!("{}: one qubit per edge needs exactly two labels", cat.name)));
    }
    Ok(())
}

pub fn vertex_projector(cat: &CategoryData, lat: &HoneycombTorus, v: &[usize; 3]) -> Vec<f64> {
    (0..lat.dim()).map(|x| if cat.delta(bit(x, v[0]), bit(x, v[1]), bit(x, v[2])) { 1.0 } else { 0.0 }).collect()
}

/// Plaquette projector `B_p = sum_s (kappa_s d_s / D^2) B_p^s`, zero outside the
/// vertex-valid configurations.
pub fn plaquette_operator(cat: &CategoryData, lat: &HoneycombTorus, p: &Plaquette, valid: &[bool]) -> SparseOperator {
    let n = cat.n();
    let d2: f64 = cat.qdim.iter().map(|d| d * d).sum();
    let weights: Vec<f64> = (0..n).map(|s| cat.fs_indicator(s) * cat.qdim[s] / d2).collect();
    let mask: usize = p.boundary.iter().map(|&e| 1usize << e).sum();
    let mut trips = Vec::new();
    for x in 0..lat.dim() {
        if !valid[x] {
            continue;
        }
        let i: Vec<usize> = p.boundary.iter().map(|&e| bit(x, e)).collect();
        let legs: Vec<usize> = p.legs.iter().map(|&e| bit(x, e)).collect();
        for conf in 0..(1usize << 6) {
            let ip: Vec<usize> = (0..6).map(|k| bit(conf, k)).collect();
            let mut amp = ZERO;
            for (s, w) in weights.iter().enumerate() {
                let mut prod = c(*w, 0.0);
                for k in 0..6 {
                    let k1 = (k + 1) % 6;
                    prod *= cat.f(legs[k], i[k], i[k1], s, ip[k1], ip[k]);
                    if prod == ZERO {
                        break;
                    }
                }
                amp += prod;
            }
            if amp.norm() < 1e-14 {
                continue;
            }
            let mut y = x & !mask;
            for (k, &e) in p.boundary.iter().enumerate() {
                y |= ip[k] << e;
            }
            if valid[y] {
                trips.push((y, x, amp));
            }
        }
    }
    SparseOperator::from_triplets(lat.dim(), trips)
}

pub fn build_levin_wen(cat: &CategoryData, lat: &HoneycombTorus) -> Result<Hamiltonian> {
    require_qubit_category(cat)?;
    lat.check()?;
    let vproj: Vec<Vec<f64>> = lat.vertices.iter().map(|v| vertex_projector(cat, lat, v)).collect();
    let valid: Vec<bool> = (0..lat.dim()).map(|x| vproj.iter().all(|p| p[x] == 1.0)).collect();
    let mut terms = Vec::new();
    for p in &vproj {
        terms.push(Term::Projector { coeff: -1.0, op: SparseOperator::diagonal_real(p) });
    }
    for p in &lat.plaquettes {
        terms.push(Term::Projector { coeff: -1.0, op: plaquette_operator(cat, lat, p, &valid) });
    }
    Hamiltonian::new(format!("levin_wen_{}", cat.name), lat.n_edges, terms)
}

// ---------------------------------------------------------------------------
// trivial field Hamiltonians

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FieldFamily {
    /// `cos(theta) sum Z + sin(theta) sum X`
    Theta { theta: f64 },
    /// `a sum X + b sum Y + sign sqrt(1-a^2-b^2) sum Z`
    DiscZ { a: f64, b: f64, plus: bool },
    /// `sign sqrt(1-a^2-b^2) sum X + b sum Y + a sum Z`
    DiscX { a: f64, b: f64, plus: bool },
    Vector { n: [f64; 3] },
}

impl FieldFamily {
    pub fn direction(&self) -> Result<[f64; 3]> {
        let root = |a: f64, b: f64, plus: bool| -> Result<f64> {
            let r2 = a * a + b * b;
            if r2 > 1.0 + 1e-12 {
                return Err(Error::Domain(format!("(a, b) = ({a}, {b}) outside the unit disc")));
            }
            let r = (1.0 - r2).max(0.0).sqrt();
            Ok(if plus { r } else { -r })
        };
        let n = match *self {
            FieldFamily::Theta { theta } => [theta.sin(), 0.0, theta.cos()],
            FieldFamily::DiscZ { a, b, plus } => [a, b, root(a, b, plus)?],
            FieldFamily::DiscX { a, b, plus } => [root(a, b, plus)?, b, a],
            FieldFamily::Vector { n } => n,
        };
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if norm > 1.0 + 1e-12 || norm == 0.0 {
            return Err(Error::Domain(format!("field direction norm {norm} outside (0, 1]")));
        }
        Ok(n)
    }
}

/// The `-1` eigenvector of `n.sigma`.
pub fn single_site_ground(n: [f64; 3]) -> [C64; 2] {
    let r = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    let (nx, ny, nz) = (n[0] / r, n[1] / r, n[2] / r);
    let v = if nz <= 0.0 { [c(1.0 - nz, 0.0), -c(nx, ny)] } else { [c(nx, -ny), c(-1.0 - nz, 0.0)] };
    let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / norm, v[1] / norm]
}

pub fn product_state(n_sites: usize, phi: [C64; 2]) -> CVec {
    CVec::from_fn(1 << n_sites, |x, _| (0..n_sites).fold(ONE, |acc, e| acc * phi[bit(x, e)]))
}

pub fn build_field_hamiltonian(family: FieldFamily, n_sites: usize) -> Result<(Hamiltonian, CVec)> {
    let n = family.direction()?;
    let h = Hamiltonian::new("field", n_sites, vec![Term::Field { n }])?;
    Ok((h, product_state(n_sites, single_site_ground(n))))
}

// ---------------------------------------------------------------------------
// logical and symmetry operators

#[derive(Clone, Debug)]
pub struct LogicalOperators {
    pub x1: SparseOperator,
    pub z1: SparseOperator,
    pub x2: SparseOperator,
    pub z2: SparseOperator,
}

impl LogicalOperators {
    pub fn x_bar(&self) -> &SparseOperator {
        &self.x1
    }

    pub fn z_bar(&self) -> &SparseOperator {
        &self.z2
    }
}

/// `X1 = X7X8X11X12`, `Z1 = Z10Z12`, `X2 = X4X9X2X12`, `Z2 = Z1Z2` in 1-based labels.
pub fn logical_operators(model: ModelKind, lat: &HoneycombTorus) -> Result<LogicalOperators> {
    if model != ModelKind::Toric {
        return Err(Error::Unsupported(format!("logical operators are defined for the toric code only, not {model:?}")));
    }
    let n = lat.n_edges;
    Ok(LogicalOperators {
        x1: x_string(n, &edges1(&[7, 8, 11, 12])),
        z1: z_string(n, &edges1(&[10, 12])),
        x2: x_string(n, &edges1(&[4, 9, 2, 12])),
        z2: z_string(n, &edges1(&[1, 2])),
    })
}

/// Permutation unitary moving the qubit on edge `e` to edge `rotation_perm[e]`.
pub fn rotation_unitary(lat: &HoneycombTorus) -> SparseOperator {
    let dim = lat.dim();
    let trips = (0..dim).map(|x| {
        let y = (0..lat.n_edges).fold(0usize, |acc, e| acc | (bit(x, e) << lat.rotation_perm[e]));
        (y, x, ONE)
    });
    SparseOperator::from_triplets(dim, trips)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Toric,
    DoubledSemion,
    DoubledFibonacci,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Toric, ModelKind::DoubledSemion, ModelKind::DoubledFibonacci];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Toric => "toric",
            ModelKind::DoubledSemion => "doubled_semion",
            ModelKind::DoubledFibonacci => "doubled_fibonacci",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "toric" | "toric_code" => Ok(ModelKind::Toric),
            "doubled_semion" | "ds" | "semion" => Ok(ModelKind::DoubledSemion),
            "doubled_fibonacci" | "fib" | "fibonacci" => Ok(ModelKind::DoubledFibonacci),
            other => Err(Error::Domain(format!("unknown model {other:?}"))),
        }
    }

    /// Category labelling the ground space (flux basis).
    pub fn ground_category(&self) -> CategoryData {
        let name = match self {
            ModelKind::Toric => "toric_code",
            ModelKind::DoubledSemion => "doubled_semion",
            ModelKind::DoubledFibonacci => "doubled_fibonacci",
        };
        CategoryData::shipped(name).expect("shipped category")
    }

    /// Category whose labels sit on the edges (string-net input).
    pub fn edge_category(&self) -> Option<CategoryData> {
        match self {
            ModelKind::Toric => None,
            ModelKind::DoubledSemion => Some(CategoryData::shipped("semion").expect("shipped category")),
            ModelKind::DoubledFibonacci => Some(CategoryData::shipped("fibonacci").expect("shipped category")),
        }
    }

    pub fn build(&self, lat: &HoneycombTorus) -> Result<Hamiltonian> {
        match self.edge_category() {
            None => build_toric_code(lat),
            Some(cat) => build_levin_wen(&cat, lat),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_state;

    fn walsh_hadamard(x: &CVec) -> CVec {
        let mut y = x.clone();
        let n = y.len();
        let mut h = 1;
        while h < n {
            for i in (0..n).step_by(2 * h) {
                for j in i..i + h {
                    let (a, b) = (y[j], y[j + h]);
                    y[j] = (a + b) / 2f64.sqrt();
                    y[j + h] = (a - b) / 2f64.sqrt();
                }
            }
            h *= 2;
        }
        y
    }

    #[test]
    fn hadamard_toric_is_conjugate() {
        let lat = build_reference_torus();
        let h = build_toric_code(&lat).unwrap();
        let hd = build_toric_code_hadamard(&lat).unwrap();
        let x = random_state(h.dim(), 5);
        let lhs = hd.sparse().apply(&walsh_hadamard(&x));
        let rhs = walsh_hadamard(&h.sparse().apply(&x));
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn reference_torus_is_consistent() {
        let lat = build_reference_torus();
        lat.check().unwrap();
        assert_eq!(lat.vertices.len(), 8);
        assert_eq!(lat.plaquettes.len(), 4);
        assert_eq!(lat.rotate_set(&edges1(&[1, 2])), edges1(&[5, 7]).into_iter().collect());
    }

    #[test]
    fn broken_incidence_is_rejected() {
        let mut lat = build_reference_torus();
        lat.vertices[0][0] = lat.vertices[0][1];
        assert!(matches!(build_toric_code(&lat), Err(Error::Structure(_))));
    }

    #[test]
    fn termwise_and_sparse_agree() {
        let lat = build_reference_torus();
        for m in ModelKind::ALL {
            let h = m.build(&lat).unwrap();
            assert!(h.is_commuting());
            let x = random_state(h.dim(), 3);
            assert!((h.sparse().apply(&x) - h.apply_termwise(&x)).norm() < 1e-12);
        }
    }

    #[test]
    fn field_ground_state_is_eigenvector() {
        for fam in [
            FieldFamily::Theta { theta: 0.3 },
            FieldFamily::DiscZ { a: 0.2, b: -0.4, plus: false },
            FieldFamily::DiscX { a: 0.5, b: 0.1, plus: true },
            FieldFamily::Theta { theta: std::f64::consts::PI },
        ] {
            let (h, g) = build_field_hamiltonian(fam, 4).unwrap();
            let hg = h.sparse().apply(&g);
            assert!((hg + g.scale(4.0)).norm() < 1e-12, "{fam:?}");
        }
        assert!(build_field_hamiltonian(FieldFamily::DiscZ { a: 0.9, b: 0.9, plus: true }, 2).is_err());
    }

    #[test]
    fn exact_exponential_matches_dense() {
        let (h, _) = build_field_hamiltonian(FieldFamily::DiscZ { a: 0.3, b: 0.2, plus: true }, 3).unwrap();
        let mut psi = random_state(8, 1);
        let (vals, vecs) = eigh(&h.sparse().to_dense());
        let mut coeff = vecs.adjoint() * &psi;
        for (k, v) in vals.iter().enumerate() {
            coeff[k] *= cis(-0.37 * v);
        }
        let want = &vecs * coeff;
        h.apply_exp(0.37, &mut psi).unwrap();
        assert!((psi - want).norm() < 1e-12);
    }
}

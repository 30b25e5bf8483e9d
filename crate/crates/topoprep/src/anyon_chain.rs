//! Periodic anyon chains in the fusion-tree basis.
//!
//! A state is `(a, b)` with site labels `a_j` and bond labels `b_j`, where `b_j`
//! sits to the right of site `j` and the bond left of site 0 is `b_{L-1}`.
//! Admissibility: `N^{b_j}_{b_{j-1} a_j} = 1` for every `j`.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::anyon_algebra::{flux_string_operator, CategoryData};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, C64, ZERO};
use crate::schrieffer_wolff::{decompose_into_strings, self_energy_term, sw_series, traceless_norm, Decomposition, SwContext};
use crate::sparse::SparseOperator;

pub const MAX_BASIS: usize = 20_000;

#[derive(Clone, Debug)]
pub struct FusionTreeBasis {
    pub category: String,
    pub l: usize,
    pub n_labels: usize,
    pub states: Vec<(Vec<u8>, Vec<u8>)>,
    index: HashMap<(Vec<u8>, Vec<u8>), usize>,
}

impl FusionTreeBasis {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, a: &[u8], b: &[u8]) -> Option<usize> {
        self.index.get(&(a.to_vec(), b.to_vec())).copied()
    }

    /// Index of `|1, b 1>`.
    pub fn vacuum_state(&self, b: usize) -> usize {
        self.index_of(&vec![0; self.l], &vec![b as u8; self.l]).expect("vacuum states are always admissible")
    }

    pub fn vacuum_states(&self) -> Vec<usize> {
        (0..self.n_labels).map(|b| self.vacuum_state(b)).collect()
    }

    /// Permutation `i -> shift(i)` moving every label one site to the right.
    pub fn shift_permutation(&self) -> Vec<usize> {
        self.states
            .iter()
            .map(|(a, b)| {
                let mut a2 = a.clone();
                let mut b2 = b.clone();
                a2.rotate_right(1);
                b2.rotate_right(1);
                self.index_of(&a2, &b2).expect("basis is closed under translation")
            })
            .collect()
    }
}

fn require_chain_category(cat: &CategoryData) -> Result<()> {
    if !cat.is_self_dual() {
        return Err(Error::Unsupported(format!("{} has non-self-dual labels", cat.name)));
    }
    if cat.fusion.iter().any(|&x| x > 1) {
        return Err(Error::Unsupported(format!("{} has fusion multiplicities", cat.name)));
    }
    Ok(())
}

/// `trace(M^L)` with `M_{b'b} = N^{b'}_{b a}` summed over `a`.
pub fn transfer_matrix_count(cat: &CategoryData, l: usize) -> u128 {
    let n = cat.n();
    let m: Vec<Vec<u128>> = (0..n).map(|bp| (0..n).map(|b| (0..n).map(|a| cat.n_abc(b, a, bp) as u128).sum()).collect()).collect();
    let mut p: Vec<Vec<u128>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u128).collect()).collect();
    for _ in 0..l {
        p = (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| p[i][k].saturating_mul(m[k][j])).fold(0u128, u128::saturating_add)).collect()).collect();
    }
    (0..n).map(|i| p[i][i]).sum()
}

pub fn enumerate_basis(cat: &CategoryData, l: usize) -> Result<FusionTreeBasis> {
    require_chain_category(cat)?;
    if l < 2 {
        return Err(Error::Domain(format!("chain length {l} < 2")));
    }
    let count = transfer_matrix_count(cat, l);
    if count > MAX_BASIS as u128 {
        return Err(Error::Budget(format!("fusion-tree dimension {count}")));
    }
    let n = cat.n();
    let mut states = Vec::with_capacity(count as usize);
    // depth-first over (b_{L-1}, a_0, b_0, a_1, ...)
    for b_last in 0..n {
        let mut a = vec![0u8; l];
        let mut b = vec![0u8; l];
        b[l - 1] = b_last as u8;
        extend(cat, l, 0, b_last, &mut a, &mut b, &mut states);
    }
    if states.len() as u128 != count {
        return Err(Error::Contract(format!("enumerated {} states, transfer matrix gives {count}", states.len())));
    }
    let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    Ok(FusionTreeBasis { category: cat.name.clone(), l, n_labels: n, states, index })
}

fn extend(cat: &CategoryData, l: usize, j: usize, left: usize, a: &mut Vec<u8>, b: &mut Vec<u8>, out: &mut Vec<(Vec<u8>, Vec<u8>)>) {
    let n = cat.n();
    for aj in 0..n {
        if j == l - 1 {
            let bj = b[l - 1] as usize;
            if cat.n_abc(left, aj, bj) == 1 {
                a[j] = aj as u8;
                out.push((a.clone(), b.clone()));
            }
            continue;
        }
        for bj in 0..n {
            if cat.n_abc(left, aj, bj) == 1 {
                a[j] = aj as u8;
                b[j] = bj as u8;
                extend(cat, l, j + 1, bj, a, b, out);
            }
        }
    }
}

/// `H0 |a, b> = (sum_j eps_{a_j}) |a, b>`
pub fn onsite_h0(basis: &FusionTreeBasis, costs: &[f64]) -> Result<SparseOperator> {
    if costs.len() != basis.n_labels {
        return Err(Error::Structure(format!("{} costs for {} labels", costs.len(), basis.n_labels)));
    }
    if costs[0] != 0.0 {
        return Err(Error::Domain("vacuum cost must be zero".into()));
    }
    if let Some(bad) = costs.iter().skip(1).find(|&&x| x <= 0.0) {
        return Err(Error::Domain(format!("anyon cost {bad} is not positive")));
    }
    let diag: Vec<f64> = basis.states.iter().map(|(a, _)| a.iter().map(|&x| costs[x as usize]).sum()).collect();
    Ok(SparseOperator::diagonal_real(&diag))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Process {
    /// `(1, 1) -> (a, a)`
    Creation,
    /// `(a, a) -> (1, 1)`
    Annihilation,
    /// `(1, a) -> (a, 1)`
    Left,
    /// `(a, 1) -> (1, a)`
    Right,
}

impl Process {
    pub fn tag(self) -> char {
        match self {
            Process::Creation => 'C',
            Process::Annihilation => 'A',
            Process::Left => 'L',
            Process::Right => 'R',
        }
    }

    pub fn adjoint(self) -> Process {
        match self {
            Process::Creation => Process::Annihilation,
            Process::Annihilation => Process::Creation,
            Process::Left => Process::Right,
            Process::Right => Process::Left,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainOperator {
    pub kind: Process,
    pub label: usize,
    pub site: usize,
    pub matrix: SparseOperator,
    pub warning: Option<String>,
}

/// Two-site process on sites `(j, j+1 mod L)`.
///
/// The pair is first recoupled into its total channel with an F-move on the
/// bonds `(b_{j-1}, b_j, b_{j+1})`, the process acts inside the channel, and the
/// inverse F-move restores the fusion-tree form. Creation and annihilation carry
/// `sqrt(d_a)` so the ring-winding product has the magnitude of `F_a`.
pub fn elementary_two_site(basis: &FusionTreeBasis, cat: &CategoryData, kind: Process, a: usize, j: usize) -> Result<ChainOperator> {
    require_chain_category(cat)?;
    let l = basis.l;
    if a == 0 || a >= cat.n() {
        return Err(Error::Domain(format!("process label {a} must be a nontrivial anyon")));
    }
    if j >= l {
        return Err(Error::Domain(format!("site {j} outside chain of length {l}")));
    }
    let k = (j + 1) % l;
    let (old, new, channel, amp) = match kind {
        Process::Creation => ((0, 0), (a, a), 0, cat.qdim[a].sqrt()),
        Process::Annihilation => ((a, a), (0, 0), 0, cat.qdim[a].sqrt()),
        Process::Left => ((0, a), (a, 0), a, 1.0),
        Process::Right => ((a, 0), (0, a), a, 1.0),
    };
    // [F^{xyz}_w]_{ef}
    let fk = |x: usize, y: usize, z: usize, w: usize, e: usize, f: usize| cat.f(x, y, e, z, w, f);
    let mut trip = Vec::new();
    for (col, (sa, sb)) in basis.states.iter().enumerate() {
        if (sa[j] as usize, sa[k] as usize) != old {
            continue;
        }
        let bl = sb[(j + l - 1) % l] as usize;
        let bm = sb[j] as usize;
        let br = sb[k] as usize;
        let into = fk(bl, old.0, old.1, br, bm, channel);
        if into == ZERO {
            continue;
        }
        for bm2 in 0..cat.n() {
            let out = fk(bl, new.0, new.1, br, bm2, channel).conj();
            if out == ZERO {
                continue;
            }
            let mut a2 = sa.clone();
            let mut b2 = sb.clone();
            a2[j] = new.0 as u8;
            a2[k] = new.1 as u8;
            b2[j] = bm2 as u8;
            if let Some(row) = basis.index_of(&a2, &b2) {
                trip.push((row, col, out * into * amp));
            }
        }
    }
    let warning = trip.is_empty().then(|| format!("{}({}) at site {j} has no admissible matrix elements", kind.tag(), cat.labels[a]));
    Ok(ChainOperator { kind, label: a, site: j, matrix: SparseOperator::from_triplets(basis.dim(), trip), warning })
}

/// `P0 X P0` on the vacuum states, ordered by bond label.
pub fn vacuum_block(basis: &FusionTreeBasis, op: &SparseOperator) -> CMat {
    let g = basis.vacuum_states();
    CMat::from_fn(g.len(), g.len(), |r, c| op.get(g[r], g[c]))
}

/// `A(a)_{L-1,0} R(a)_{L-2} ... R(a)_1 C(a)_0` restricted to the vacuum states.
///
/// Equals `kappa_a F_a` with `kappa_a` the Frobenius-Schur indicator: the pair is
/// annihilated in the opposite orientation from the one it was created in.
pub fn winding_product(basis: &FusionTreeBasis, cat: &CategoryData, a: usize) -> Result<CMat> {
    let l = basis.l;
    let mut w = elementary_two_site(basis, cat, Process::Creation, a, 0)?.matrix;
    for j in 1..l - 1 {
        w = elementary_two_site(basis, cat, Process::Right, a, j)?.matrix.matmul(&w);
    }
    w = elementary_two_site(basis, cat, Process::Annihilation, a, l - 1)?.matrix.matmul(&w);
    Ok(vacuum_block(basis, &w))
}

/// `A(a)_0 L(a)_1 R(a)_1 C(a)_0` restricted to the vacuum states.
pub fn local_loop(basis: &FusionTreeBasis, cat: &CategoryData, a: usize) -> Result<CMat> {
    let ops = [(Process::Creation, 0), (Process::Right, 1), (Process::Left, 1), (Process::Annihilation, 0)];
    let mut w = SparseOperator::identity(basis.dim());
    for (kind, j) in ops {
        w = elementary_two_site(basis, cat, kind, a, j)?.matrix.matmul(&w);
    }
    Ok(vacuum_block(basis, &w))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainParams {
    /// pair creation amplitude per label (index 0 unused)
    pub gamma: Vec<C64>,
    /// hopping amplitude per label (index 0 unused)
    pub tau: Vec<C64>,
    /// on-site cost per label, `eps[0] = 0`
    pub eps: Vec<f64>,
}

impl ChainParams {
    pub fn uniform(n_labels: usize, gamma: f64, tau: f64, eps: f64) -> Self {
        let pick = |x: f64| (0..n_labels).map(|a| if a == 0 { ZERO } else { c(x, 0.0) }).collect();
        ChainParams { gamma: pick(gamma), tau: pick(tau), eps: (0..n_labels).map(|a| if a == 0 { 0.0 } else { eps }).collect() }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        ChainParams {
            gamma: self.gamma.iter().map(|g| g * lambda).collect(),
            tau: self.tau.iter().map(|t| t * lambda).collect(),
            eps: self.eps.clone(),
        }
    }
}

/// `V = sum_j sum_a [gamma_a C + conj(gamma_a) A + tau_a L + conj(tau_a) R]`
pub fn assemble_perturbation(basis: &FusionTreeBasis, cat: &CategoryData, params: &ChainParams) -> Result<SparseOperator> {
    let n = cat.n();
    if params.gamma.len() != n || params.tau.len() != n {
        return Err(Error::Structure(format!("amplitude vectors must have {n} entries")));
    }
    let mut acc = SparseOperator::zero(basis.dim());
    for a in 1..n {
        let (g, t) = (params.gamma[a], params.tau[a]);
        let weights = [(Process::Creation, g), (Process::Annihilation, g.conj()), (Process::Left, t), (Process::Right, t.conj())];
        for (kind, w) in weights {
            if w == ZERO {
                continue;
            }
            for j in 0..basis.l {
                acc = acc.add_scaled(&elementary_two_site(basis, cat, kind, a, j)?.matrix, w);
            }
        }
    }
    Ok(acc)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabelCoefficient {
    pub label: String,
    pub f_l: C64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainEffectiveReport {
    pub category: String,
    pub l: usize,
    pub basis_dim: usize,
    /// traceless norms of `H_eff,q` for `q < L`
    pub lower_orders: Vec<(usize, f64)>,
    pub coefficients: Vec<LabelCoefficient>,
    pub scalar: C64,
    pub residual: f64,
    /// same fit applied to the self-energy term `P0 (V G)^{L-1} V P0`
    pub self_energy_coefficients: Vec<LabelCoefficient>,
    pub self_energy_residual: f64,
}

impl ChainEffectiveReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "label,f_L_re,f_L_im,residual")?;
        for lc in &self.coefficients {
            writeln!(w, "{},{:.15e},{:.15e},{:.3e}", lc.label, lc.f_l.re, lc.f_l.im, self.residual)?;
        }
        Ok(())
    }
}

pub const MAX_EFFECTIVE_ORDER: usize = 6;

/// Order-`L` effective Hamiltonian of `H0 + V` on the vacuum states, fitted to `c I + sum_a f_a F_a`.
pub fn chain_effective(cat: &CategoryData, l: usize, params: &ChainParams) -> Result<ChainEffectiveReport> {
    if l > MAX_EFFECTIVE_ORDER {
        return Err(Error::Budget(format!("order {l} above series limit {MAX_EFFECTIVE_ORDER}")));
    }
    let basis = enumerate_basis(cat, l)?;
    let h0 = onsite_h0(&basis, &params.eps)?;
    let v = assemble_perturbation(&basis, cat, params)?;
    if v.hermitian_defect() > 1e-12 {
        return Err(Error::Contract("assembled perturbation is not Hermitian".into()));
    }
    let ctx = SwContext::from_dense(h0.to_dense(), v.to_dense(), 1e-9)?;
    if ctx.k != cat.n() {
        return Err(Error::Contract(format!("ground degeneracy {} differs from label count {}", ctx.k, cat.n())));
    }
    // frame coordinates -> vacuum-state basis
    let g = basis.vacuum_states();
    let frame = ctx.frame();
    let to_flux = CMat::from_fn(ctx.k, g.len(), |r, c| frame[(g[c], r)].conj());
    let flux = |m: &CMat| to_flux.adjoint() * m * &to_flux;

    let series = sw_series(&ctx, l)?;
    let lower_orders = series[..l - 1].iter().enumerate().map(|(q, h)| (q + 1, traceless_norm(&h.matrix))).collect();
    let strings: Vec<(String, CMat)> =
        (1..cat.n()).map(|a| Ok((cat.labels[a].clone(), flux_string_operator(a, cat)?.entries))).collect::<Result<_>>()?;
    let top = decompose_into_strings(&flux(&series[l - 1].matrix), &strings)?;
    let se = decompose_into_strings(&flux(&self_energy_term(&ctx, l)?), &strings)?;
    let coeffs = |d: &Decomposition| d.coefficients.iter().map(|(label, f)| LabelCoefficient { label: label.clone(), f_l: *f }).collect();
    Ok(ChainEffectiveReport {
        category: cat.name.clone(),
        l,
        basis_dim: basis.dim(),
        lower_orders,
        coefficients: coeffs(&top),
        scalar: top.scalar,
        residual: top.residual,
        self_energy_coefficients: coeffs(&se),
        self_energy_residual: se.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::MaxModulus;

    fn fib() -> CategoryData {
        CategoryData::shipped("fibonacci").unwrap()
    }

    #[test]
    fn fibonacci_dimensions() {
        let cat = fib();
        assert_eq!(enumerate_basis(&cat, 3).unwrap().dim(), 18);
        assert_eq!(enumerate_basis(&cat, 4).unwrap().dim(), 47);
    }

    #[test]
    fn semion_chain_counts_are_powers_of_two() {
        let cat = CategoryData::shipped("semion").unwrap();
        for l in 2..7 {
            assert_eq!(enumerate_basis(&cat, l).unwrap().dim(), 1 << l);
        }
    }

    #[test]
    fn adjoint_pairs() {
        let cat = fib();
        let basis = enumerate_basis(&cat, 4).unwrap();
        for j in 0..4 {
            for kind in [Process::Creation, Process::Left] {
                let x = elementary_two_site(&basis, &cat, kind, 1, j).unwrap().matrix;
                let y = elementary_two_site(&basis, &cat, kind.adjoint(), 1, j).unwrap().matrix;
                assert!(x.adjoint().max_abs_diff(&y) < 1e-14);
            }
        }
    }

    #[test]
    fn winding_and_local_loop() {
        for name in ["fibonacci", "semion", "toric_code"] {
            let cat = CategoryData::shipped(name).unwrap();
            for l in [3, 4] {
                let basis = enumerate_basis(&cat, l).unwrap();
                for a in 1..cat.n() {
                    let w = winding_product(&basis, &cat, a).unwrap();
                    let f = flux_string_operator(a, &cat).unwrap().entries.scale(cat.fs_indicator(a));
                    assert!((&w - &f).max_mod() < 1e-12, "{name} L={l} a={a}: {w}");
                    let loc = local_loop(&basis, &cat, a).unwrap();
                    let want = CMat::identity(cat.n(), cat.n()).scale(cat.qdim[a]);
                    assert!((&loc - &want).max_mod() < 1e-12, "{name} L={l} a={a}");
                }
            }
        }
    }

    #[test]
    fn open_process_leaves_excitations() {
        let cat = fib();
        let basis = enumerate_basis(&cat, 4).unwrap();
        let mut w = SparseOperator::identity(basis.dim());
        for (kind, j) in [(Process::Creation, 0), (Process::Right, 1), (Process::Left, 1)] {
            w = elementary_two_site(&basis, &cat, kind, 1, j).unwrap().matrix.matmul(&w);
        }
        assert!(vacuum_block(&basis, &w).max_mod() < 1e-14);
    }

    #[test]
    fn perturbation_is_translation_covariant() {
        let cat = fib();
        let basis = enumerate_basis(&cat, 4).unwrap();
        let v = assemble_perturbation(&basis, &cat, &ChainParams::uniform(2, 0.7, 0.3, 1.0)).unwrap();
        let perm = basis.shift_permutation();
        for (i, j, x) in v.triplets() {
            assert!((v.get(perm[i], perm[j]) - x).norm() < 1e-14);
        }
    }

    #[test]
    fn vacuum_cost_must_vanish() {
        let basis = enumerate_basis(&fib(), 3).unwrap();
        assert!(matches!(onsite_h0(&basis, &[0.5, 1.0]), Err(Error::Domain(_))));
        assert!(matches!(onsite_h0(&basis, &[0.0, -1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn fibonacci_order_four_is_a_string() {
        let cat = fib();
        let r = chain_effective(&cat, 4, &ChainParams::uniform(2, 1.0, 1.0, 1.0)).unwrap();
        assert!(r.residual < 1e-8);
        assert!(r.coefficients[0].f_l.norm() > 1e-6);
        assert!(r.lower_orders.iter().all(|&(_, n)| n < 1e-9), "{:?}", r.lower_orders);
    }
}

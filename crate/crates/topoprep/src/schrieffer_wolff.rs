//! Schrieffer-Wolff effective Hamiltonians: exact direct rotation, the perturbative
//! series, self-energy terms, the topological-order condition and string fits.
//!
//! Everything is evaluated densely on the smallest basis-aligned subspace that
//! contains the unperturbed ground space and is invariant under `H0` and `V`.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::ground_subspace;
use crate::linalg::{c, eigh, frob_angle, frob_inner, lstsq, traceless, unitary_sqrt, CMat, CVec, MaxModulus, C64, ZERO};
use crate::sparse::SparseOperator;

pub const MAX_SERIES_ORDER: usize = 6;
pub const MAX_CLOSURE_DIM: usize = 4096;
const SCALAR_TOL: f64 = 1e-8;


#[derive(Clone, Debug)]
pub struct SwContext {
    /// full-space basis indices spanned by the working subspace
    pub support: Vec<usize>,
    pub full_dim: usize,
    pub h0: CMat,
    pub v: CMat,
    pub e0: f64,
    /// eigenvalues of `h0` on the working subspace, ascending
    pub energies: Vec<f64>,
    pub eigvecs: CMat,
    /// ground-space degeneracy
    pub k: usize,
    pub p0: CMat,
    pub q0: CMat,
    /// `G = Q0 (E0 - H0)^{-1} Q0`
    pub g: CMat,
    /// distinct excited energies
    pub excited_levels: Vec<f64>,
}

impl SwContext {
    /// Dense context; the lowest cluster of `h0` (within `tol`) is the ground space.
    pub fn from_dense(h0: CMat, v: CMat, tol: f64) -> Result<Self> {
        let n = h0.nrows();
        Self::build((0..n).collect(), n, h0, v, tol)
    }

    /// Restricts to the closure subspace of the ground space of `h0` under `h0` and `v`.
    pub fn from_sparse(h0: &SparseOperator, v: &SparseOperator, k_max: usize) -> Result<Self> {
        if h0.dim() != v.dim() {
            return Err(Error::Structure("H0 and V dimensions differ".into()));
        }
        if !v.is_hermitian() {
            return Err(Error::Contract("perturbation is not Hermitian".into()));
        }
        let ground = ground_subspace(h0, k_max)?;
        let touched: BTreeSet<usize> =
            (0..h0.dim()).filter(|&i| (0..ground.degeneracy()).any(|k| ground.frame[(i, k)].norm() > 1e-13)).collect();
        let comps = SparseOperator::components(&[h0, v]);
        let mut support: Vec<usize> = comps.into_iter().filter(|cmp| cmp.iter().any(|i| touched.contains(i))).flatten().collect();
        support.sort_unstable();
        if support.len() > MAX_CLOSURE_DIM {
            return Err(Error::Budget(format!("closure subspace has dimension {}", support.len())));
        }
        let h0r = restrict(h0, &support);
        let vr = restrict(v, &support);
        let ctx = Self::build(support, h0.dim(), h0r, vr, ground.degeneracy_tol)?;
        if ctx.k != ground.degeneracy() {
            return Err(Error::Contract(format!("closure ground degeneracy {} differs from {}", ctx.k, ground.degeneracy())));
        }
        Ok(ctx)
    }

    fn build(support: Vec<usize>, full_dim: usize, h0: CMat, v: CMat, tol: f64) -> Result<Self> {
        let n = h0.nrows();
        if v.nrows() != n {
            return Err(Error::Structure("H0 and V dimensions differ".into()));
        }
        let (energies, eigvecs) = eigh(&h0);
        let e0 = energies[0];
        let k = energies.iter().take_while(|&&e| e <= e0 + tol).count();
        let mut p0 = CMat::zeros(n, n);
        let mut g = CMat::zeros(n, n);
        for j in 0..n {
            let col = eigvecs.column(j);
            let outer = &col * col.adjoint();
            if j < k {
                p0 += outer;
            } else {
                g += outer.scale(1.0 / (e0 - energies[j]));
            }
        }
        let q0 = CMat::identity(n, n) - &p0;
        let mut excited_levels: Vec<f64> = Vec::new();
        for &e in &energies[k..] {
            if excited_levels.last().is_none_or(|&l| e - l > tol.max(1e-9)) {
                excited_levels.push(e);
            }
        }
        Ok(SwContext { support, full_dim, h0, v, e0, energies, eigvecs, k, p0, q0, g, excited_levels })
    }

    pub fn dim(&self) -> usize {
        self.h0.nrows()
    }

    /// Ground frame in working coordinates (columns are `h0` eigenvectors).
    pub fn frame(&self) -> CMat {
        self.eigvecs.columns(0, self.k).into_owned()
    }

    /// Ground frame embedded into the full space.
    pub fn frame_full(&self) -> CMat {
        let f = self.frame();
        let mut out = CMat::zeros(self.full_dim, self.k);
        for (r, &i) in self.support.iter().enumerate() {
            for k in 0..self.k {
                out[(i, k)] = f[(r, k)];
            }
        }
        out
    }

    /// `F^dagger X F` for a working-space matrix.
    pub fn to_frame(&self, x: &CMat) -> CMat {
        let f = self.frame();
        f.adjoint() * x * f
    }

    /// Full-space operator compressed onto the ground frame.
    pub fn compress_full(&self, op: &SparseOperator) -> CMat {
        op.compress(&self.frame_full())
    }

    /// Checks `G (E0 - H0) = Q0` on the working space.
    pub fn resolvent_defect(&self) -> f64 {
        let n = self.dim();
        let shifted = CMat::identity(n, n).scale(self.e0) - &self.h0;
        (&self.g * shifted - &self.q0).max_mod()
    }
}

fn restrict(op: &SparseOperator, support: &[usize]) -> CMat {
    let mut pos = vec![usize::MAX; op.dim()];
    for (k, &i) in support.iter().enumerate() {
        pos[i] = k;
    }
    let n = support.len();
    let mut m = CMat::zeros(n, n);
    for (k, &i) in support.iter().enumerate() {
        for (j, v) in op.row(i) {
            if pos[j] != usize::MAX {
                m[(k, pos[j])] += v;
            }
        }
    }
    m
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition {
    pub coefficients: Vec<(String, C64)>,
    pub scalar: C64,
    pub residual: f64,
    pub rank: usize,
    /// false when the string family was rank deficient; coefficients are then
    /// the minimum-norm combination
    pub well_conditioned: bool,
}

#[derive(Clone, Debug)]
pub struct EffectiveHamiltonian {
    pub frame_tag: String,
    pub matrix: CMat,
    pub decomposition: Option<Decomposition>,
}

impl EffectiveHamiltonian {
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.matrix).0
    }
}

/// `P0 U (H0 + eps V) U^dagger P0` with `U = sqrt(R_{P0} R_P)`, on the ground frame.
pub fn exact_sw(ctx: &SwContext, eps: f64) -> Result<EffectiveHamiltonian> {
    let n = ctx.dim();
    let h = &ctx.h0 + ctx.v.scale(eps);
    let (vals, vecs) = eigh(&h);
    if ctx.k < n && vals[ctx.k] - vals[ctx.k - 1] < 1e-9 {
        return Err(Error::GapCollapse(format!(
            "perturbed cluster not separated: E[k-1] = {}, E[k] = {}",
            vals[ctx.k - 1],
            vals[ctx.k]
        )));
    }
    let mut p = CMat::zeros(n, n);
    for j in 0..ctx.k {
        let col = vecs.column(j);
        p += &col * col.adjoint();
    }
    let id = CMat::identity(n, n);
    let r0 = ctx.p0.scale(2.0) - &id;
    let r = p.scale(2.0) - &id;
    let u = unitary_sqrt(&(r0 * r))?;
    let rotated = &u * h * u.adjoint();
    let m = ctx.to_frame(&rotated);
    Ok(EffectiveHamiltonian { frame_tag: format!("exact_sw eps={eps}"), matrix: (&m + m.adjoint()).scale(0.5), decomposition: None })
}

/// `P0 (V G)^{n-1} V P0` on the ground frame.
pub fn self_energy_term(ctx: &SwContext, n: usize) -> Result<CMat> {
    if n == 0 {
        return Err(Error::Domain("self-energy order starts at 1".into()));
    }
    let defect = ctx.resolvent_defect();
    if defect > 1e-8 {
        return Err(Error::Contract(format!("resolvent defect {defect:e}")));
    }
    let f = ctx.frame();
    let mut w = &ctx.v * &f;
    for _ in 1..n {
        w = &ctx.v * (&ctx.g * w);
    }
    Ok(f.adjoint() * w)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Bernoulli numbers with `B_1 = -1/2`.
pub fn bernoulli(m: usize) -> f64 {
    let mut b = vec![1.0f64];
    for n in 1..=m {
        let s: f64 = (0..n).map(|k| binomial(n + 1, k) * b[k]).sum();
        b.push(-s / (n + 1) as f64);
    }
    b[m]
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `a_m = 2^m B_m / m!`
pub fn coefficient_a(m: usize) -> f64 {
    2f64.powi(m as i32) * bernoulli(m) / factorial(m)
}

/// `b_{2n-1} = 2 (2^{2n} - 1) B_{2n} / (2n)!`
pub fn coefficient_b(odd: usize) -> f64 {
    let two_n = odd + 1;
    2.0 * (2f64.powi(two_n as i32) - 1.0) * bernoulli(two_n) / factorial(two_n)
}

struct Series<'a> {
    ctx: &'a SwContext,
    vd: CMat,
    vod: CMat,
    s: Vec<CMat>,
    memo: HashMap<(bool, usize, usize), CMat>,
}

impl<'a> Series<'a> {
    fn new(ctx: &'a SwContext) -> Self {
        let (p0, q0, v) = (&ctx.p0, &ctx.q0, &ctx.v);
        let vd = p0 * v * p0 + q0 * v * q0;
        let vod = p0 * v * q0 + q0 * v * p0;
        let n = ctx.dim();
        Series { ctx, vd, vod, s: vec![CMat::zeros(n, n)], memo: HashMap::new() }
    }

    /// `L(X) = P0 X G - G X P0`
    fn l(&self, x: &CMat) -> CMat {
        let (p0, g) = (&self.ctx.p0, &self.ctx.g);
        p0 * x * g - g * x * p0
    }

    /// `Ŝ^k(X)_m`: sum over compositions `m = n_1 + ... + n_k` of nested commutators.
    fn nested(&mut self, off_diag: bool, k: usize, m: usize) -> CMat {
        let n = self.ctx.dim();
        if k == 0 {
            return if m == 0 {
                if off_diag { self.vod.clone() } else { self.vd.clone() }
            } else {
                CMat::zeros(n, n)
            };
        }
        if m < k {
            return CMat::zeros(n, n);
        }
        if let Some(x) = self.memo.get(&(off_diag, k, m)) {
            return x.clone();
        }
        let mut acc = CMat::zeros(n, n);
        for n1 in 1..=(m - (k - 1)) {
            let inner = self.nested(off_diag, k - 1, m - n1);
            let s = &self.s[n1];
            acc += s * &inner - &inner * s;
        }
        self.memo.insert((off_diag, k, m), acc.clone());
        acc
    }

    fn push_generator(&mut self) {
        let n = self.s.len();
        let next = if n == 1 {
            self.l(&self.vod)
        } else {
            let first = self.nested(false, 1, n - 1);
            // S_n = L([S_{n-1}, V_d]) + sum_j a_{2j} L(Ŝ^{2j}(V_od)_{n-1})
            let mut x = self.l(&first);
            let mut j = 1;
            while 2 * j < n {
                let term = self.nested(true, 2 * j, n - 1);
                x += self.l(&term).scale(coefficient_a(2 * j));
                j += 1;
            }
            x
        };
        self.s.push(next);
    }

    fn heff(&mut self, q: usize) -> CMat {
        if q == 1 {
            return self.ctx.to_frame(&self.ctx.v);
        }
        let n = self.ctx.dim();
        let mut acc = CMat::zeros(n, n);
        let mut j = 1;
        while 2 * j - 1 < q {
            let term = self.nested(true, 2 * j - 1, q - 1);
            acc += term.scale(coefficient_b(2 * j - 1));
            j += 1;
        }
        self.ctx.to_frame(&acc)
    }
}

/// `H_eff,q` for `q = 1..=order`, each on the ground frame.
pub fn sw_series(ctx: &SwContext, order: usize) -> Result<Vec<EffectiveHamiltonian>> {
    if order == 0 || order > MAX_SERIES_ORDER {
        return Err(Error::Budget(format!("series order {order} outside 1..={MAX_SERIES_ORDER}")));
    }
    let mut series = Series::new(ctx);
    let mut out = Vec::new();
    for q in 1..=order {
        while series.s.len() < q {
            series.push_generator();
        }
        let m = series.heff(q);
        out.push(EffectiveHamiltonian { frame_tag: format!("H_eff,{q}"), matrix: m, decomposition: None });
    }
    Ok(out)
}

/// Sum `sum_q eps^q H_eff,q` plus `E0 I`.
pub fn series_sum(ctx: &SwContext, terms: &[EffectiveHamiltonian], eps: f64) -> CMat {
    let mut acc = CMat::identity(ctx.k, ctx.k).scale(ctx.e0);
    for (q, t) in terms.iter().enumerate() {
        acc += t.matrix.scale(eps.powi(q as i32 + 1));
    }
    acc
}

pub fn traceless_norm(m: &CMat) -> f64 {
    traceless(m).norm()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TqoReport {
    pub order: Option<usize>,
    pub witness: Vec<String>,
    pub deviation: f64,
    pub m_star: usize,
    pub note: Option<String>,
}

/// Smallest `n` with a non-scalar `P0 V Z_1 V ... Z_{n-1} V P0`, insertions
/// `Z in {P0, Q0, G, ..., G^{m*}}`.
pub fn tqo_order(ctx: &SwContext, l_max: usize) -> TqoReport {
    let m_star = ctx.excited_levels.len();
    if ctx.k == 1 {
        return TqoReport {
            order: Some(1),
            witness: vec![],
            deviation: 0.0,
            m_star,
            note: Some("rank-1 ground space: every compression is scalar".into()),
        };
    }
    let mut inserts: Vec<(String, CMat)> = vec![("P0".into(), ctx.p0.clone()), ("Q0".into(), ctx.q0.clone())];
    let mut gp = ctx.g.clone();
    for m in 1..=m_star {
        inserts.push((if m == 1 { "G".into() } else { format!("G^{m}") }, gp.clone()));
        gp = &gp * &ctx.g;
    }
    let f = ctx.frame();
    let start = &ctx.v * &f;
    for n in 1..=l_max {
        let mut path = Vec::new();
        if let Some((dev, witness)) = search(ctx, &f, &inserts, &start, n - 1, &mut path) {
            return TqoReport { order: Some(n), witness, deviation: dev, m_star, note: None };
        }
    }
    TqoReport { order: None, witness: vec![], deviation: 0.0, m_star, note: Some(format!("scalar up to n = {l_max}")) }
}

fn search(ctx: &SwContext, f: &CMat, inserts: &[(String, CMat)], w: &CMat, remaining: usize, path: &mut Vec<String>) -> Option<(f64, Vec<String>)> {
    if remaining == 0 {
        let m = f.adjoint() * w;
        let dev = traceless(&m).max_mod();
        return (dev > SCALAR_TOL).then(|| (dev, path.clone()));
    }
    for (name, z) in inserts {
        let next = &ctx.v * (z * w);
        path.push(name.clone());
        if let Some(hit) = search(ctx, f, inserts, &next, remaining - 1, path) {
            return Some(hit);
        }
        path.pop();
    }
    None
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrderLReport {
    pub order: usize,
    /// `(q, |traceless(H_eff,q)|)` for `q < order`
    pub lower_orders: Vec<(usize, f64)>,
    pub lower_orders_scalar: bool,
    /// angle between traceless parts of `H_eff,L` and the self-energy term
    pub angle: f64,
    pub fitted_constant: f64,
    pub printed_constant: f64,
    pub order_l_norm: f64,
}

impl OrderLReport {
    pub fn holds(&self) -> bool {
        self.lower_orders_scalar && self.angle < 1e-6 && self.order_l_norm > SCALAR_TOL
    }
}

pub fn order_l_check(ctx: &SwContext, order: usize) -> Result<OrderLReport> {
    let series = sw_series(ctx, order)?;
    let lower_orders: Vec<(usize, f64)> = series[..order - 1].iter().enumerate().map(|(q, h)| (q + 1, traceless_norm(&h.matrix))).collect();
    let top = traceless(&series[order - 1].matrix);
    let se = traceless(&self_energy_term(ctx, order)?);
    let denom = frob_inner(&se, &se).re;
    let fitted = if denom > 0.0 { frob_inner(&se, &top).re / denom } else { f64::NAN };
    Ok(OrderLReport {
        order,
        lower_orders_scalar: lower_orders.iter().all(|&(_, n)| n < SCALAR_TOL),
        lower_orders,
        angle: frob_angle(&se, &top),
        fitted_constant: fitted,
        printed_constant: 1.0 / 3.0,
        order_l_norm: top.norm(),
    })
}

/// Least-squares fit `heff ≈ c I + sum_a f_a F_a`.
pub fn decompose_into_strings(heff: &CMat, strings: &[(String, CMat)]) -> Result<Decomposition> {
    let k = heff.nrows();
    for (name, m) in strings {
        if m.nrows() != k || m.ncols() != k {
            return Err(Error::Structure(format!("string {name} has shape {}x{}, expected {k}x{k}", m.nrows(), m.ncols())));
        }
    }
    let cols = strings.len() + 1;
    let mut a = CMat::zeros(k * k, cols);
    let id = CMat::identity(k, k);
    for (idx, z) in id.iter().enumerate() {
        a[(idx, 0)] = *z;
    }
    for (j, (_, m)) in strings.iter().enumerate() {
        for (idx, z) in m.iter().enumerate() {
            a[(idx, j + 1)] = *z;
        }
    }
    let b = CVec::from_iterator(k * k, heff.iter().copied());
    let (x, residual, rank) = lstsq(&a, &b, 1e-10);
    Ok(Decomposition {
        coefficients: strings.iter().enumerate().map(|(j, (n, _))| (n.clone(), x[j + 1])).collect(),
        scalar: x[0],
        residual,
        rank,
        well_conditioned: rank == cols,
    })
}

/// Eigenvalues of `h0 + eps v` restricted to the working subspace.
pub fn perturbed_spectrum(ctx: &SwContext, eps: f64) -> Vec<f64> {
    eigh(&(&ctx.h0 + ctx.v.scale(eps))).0
}

pub fn scalar_part(m: &CMat) -> C64 {
    if m.nrows() == 0 {
        ZERO
    } else {
        m.trace() / c(m.nrows() as f64, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_hermitian;

    #[test]
    fn coefficients_match_closed_forms() {
        assert!((coefficient_a(2) - 1.0 / 3.0).abs() < 1e-15);
        assert!((coefficient_a(4) + 1.0 / 45.0).abs() < 1e-15);
        assert!((coefficient_b(1) - 0.5).abs() < 1e-15);
        assert!((coefficient_b(3) + 1.0 / 24.0).abs() < 1e-15);
        assert!((coefficient_b(5) - 1.0 / 240.0).abs() < 1e-15);
    }

    fn random_ctx(seed: u64) -> SwContext {
        let mut h0 = random_hermitian(8, seed);
        // open a gap under the rest of the spectrum
        h0[(0, 0)] -= c(3.0, 0.0);
        SwContext::from_dense(h0, random_hermitian(8, seed + 100), 1e-10).unwrap()
    }

    #[test]
    fn exact_sw_reproduces_cluster() {
        let ctx = random_ctx(1);
        for eps in [0.0, 0.01, 0.1] {
            let h = exact_sw(&ctx, eps).unwrap();
            let want = perturbed_spectrum(&ctx, eps);
            assert!((h.eigenvalues()[0] - want[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn series_converges_at_fourth_order() {
        let ctx = random_ctx(2);
        let terms = sw_series(&ctx, 3).unwrap();
        let err = |eps: f64| {
            let exact = exact_sw(&ctx, eps).unwrap().matrix[(0, 0)].re;
            (series_sum(&ctx, &terms, eps)[(0, 0)].re - exact).abs()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        let slope = (e1 / e2).ln() / 2f64.ln();
        assert!((slope - 4.0).abs() < 0.3, "slope {slope}");
    }

    /// Order-by-order expansion of `e^S H e^{-S}` with `S_n` fixed by cancelling the
    /// off-diagonal part at each order.
    fn brute_force_series(ctx: &SwContext, order: usize) -> Vec<CMat> {
        let n = ctx.dim();
        let od = |x: &CMat| &ctx.p0 * x * &ctx.q0 + &ctx.q0 * x * &ctx.p0;
        let lmap = |x: &CMat| &ctx.p0 * x * &ctx.g - &ctx.g * x * &ctx.p0;
        let mut s: Vec<CMat> = vec![CMat::zeros(n, n)];
        // order-m part of sum_k ad_S^k(H)/k!, skipping [S_m, H0] when `skip` is set
        fn part(s: &[CMat], h0: &CMat, v: &CMat, m: usize, skip: bool) -> CMat {
            let n = h0.nrows();
            let mut acc = CMat::zeros(n, n);
            if m == 1 {
                acc += v;
            }
            // compositions of the S orders, innermost operator H0 (order 0) or V (order 1)
            fn rec(s: &[CMat], x: &CMat, left: usize, depth: usize, fact: f64, skip_top: Option<usize>, acc: &mut CMat) {
                if left == 0 {
                    if depth > 0 {
                        *acc += x.scale(1.0 / fact);
                    }
                    return;
                }
                for k in 1..=left {
                    if k >= s.len() {
                        break;
                    }
                    if depth == 0 && skip_top == Some(k) {
                        continue;
                    }
                    let y = &s[k] * x - x * &s[k];
                    rec(s, &y, left - k, depth + 1, fact * (depth + 1) as f64, None, acc);
                }
            }
            rec(s, h0, m, 0, 1.0, if skip { Some(m) } else { None }, &mut acc);
            if m >= 1 {
                rec(s, v, m - 1, 0, 1.0, None, &mut acc);
            }
            acc
        }
        let mut out = Vec::new();
        for m in 1..=order {
            let r = part(&s, &ctx.h0, &ctx.v, m, true);
            s.push(lmap(&od(&r)));
            let full = part(&s, &ctx.h0, &ctx.v, m, false);
            out.push(ctx.to_frame(&full));
        }
        out
    }

    #[test]
    fn recursion_matches_brute_force_expansion() {
        let ctx = random_ctx(6);
        let brute = brute_force_series(&ctx, 5);
        let series = sw_series(&ctx, 5).unwrap();
        for (q, (a, b)) in brute.iter().zip(&series).enumerate() {
            assert!((a - &b.matrix).max_mod() < 1e-9, "order {}: {}", q + 1, (a - &b.matrix).max_mod());
        }
    }

    #[test]
    fn second_order_is_self_energy() {
        let ctx = random_ctx(3);
        let terms = sw_series(&ctx, 2).unwrap();
        let se = self_energy_term(&ctx, 2).unwrap();
        assert!((&terms[1].matrix - se).max_mod() < 1e-12);
    }

    #[test]
    fn rank_one_tqo_is_flagged() {
        let ctx = random_ctx(4);
        let rep = tqo_order(&ctx, 3);
        assert_eq!(rep.order, Some(1));
        assert!(rep.note.is_some());
    }

    #[test]
    fn decomposition_recovers_exact_combination() {
        let f = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let h = f.scale(2.5) + CMat::identity(2, 2).scale(-0.5);
        let d = decompose_into_strings(&h, &[("tau".into(), f)]).unwrap();
        assert!((d.coefficients[0].1 - c(2.5, 0.0)).norm() < 1e-12);
        assert!((d.scalar - c(-0.5, 0.0)).norm() < 1e-12);
        assert!(d.residual < 1e-12 && d.well_conditioned);
    }
}

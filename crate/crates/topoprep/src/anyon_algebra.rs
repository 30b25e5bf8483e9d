//! Modular tensor category data and the flux-basis algebra on the torus.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, MaxModulus, C64, ONE, ZERO};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Names of the category files shipped in `data/`.
pub const SHIPPED: [&str; 5] = ["toric_code", "semion", "fibonacci", "doubled_semion", "doubled_fibonacci"];

fn shipped_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "toric_code" => include_str!("../data/toric_code.toml"),
        "semion" => include_str!("../data/semion.toml"),
        "fibonacci" => include_str!("../data/fibonacci.toml"),
        "doubled_semion" => include_str!("../data/doubled_semion.toml"),
        "doubled_fibonacci" => include_str!("../data/doubled_fibonacci.toml"),
        _ => return None,
    })
}

/// Algebraic payload of a multiplicity-free anyon theory.
///
/// `fusion` is the flattened tensor `delta[a][b][c]`, `fsym` the flattened
/// `F^{abe}_{cdf}` in index order (a, b, e, c, d, f), which equals the
/// fusion-tree move `[F^{abc}_d]_{ef}`.
#[derive(Clone, Debug)]
pub struct CategoryData {
    pub name: String,
    pub labels: Vec<String>,
    pub dual: Vec<usize>,
    pub qdim: Vec<f64>,
    pub total_dim: f64,
    pub fusion: Vec<u8>,
    pub fsym: Vec<C64>,
    pub s: CMat,
    pub t: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct CategoryFile {
    format_version: u32,
    name: String,
    labels: Vec<String>,
    #[serde(default)]
    dual: Option<Vec<usize>>,
    qdim: Vec<f64>,
    fusion: Vec<[usize; 3]>,
    #[serde(rename = "S")]
    s: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "T")]
    t: Vec<[f64; 2]>,
    #[serde(rename = "F")]
    f: Vec<(usize, usize, usize, usize, usize, usize, f64, f64)>,
}

impl CategoryData {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    fn idx3(&self, a: usize, b: usize, c: usize) -> usize {
        let n = self.n();
        (a * n + b) * n + c
    }

    #[inline]
    fn idx6(&self, i: [usize; 6]) -> usize {
        let n = self.n();
        i.iter().fold(0, |acc, &x| acc * n + x)
    }

    pub fn delta(&self, a: usize, b: usize, c: usize) -> bool {
        self.fusion[self.idx3(a, b, c)] != 0
    }

    /// `N^c_{ab} = delta_{a b cbar}`
    pub fn n_abc(&self, a: usize, b: usize, c: usize) -> u8 {
        self.fusion[self.idx3(a, b, self.dual[c])]
    }

    /// `F^{abe}_{cdf}`
    pub fn f(&self, a: usize, b: usize, e: usize, c: usize, d: usize, f: usize) -> C64 {
        self.fsym[self.idx6([a, b, e, c, d, f])]
    }

    pub fn t_matrix(&self) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_vec(self.t.clone()))
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Domain(format!("unknown label {label:?} in {}", self.name)))
    }

    pub fn is_self_dual(&self) -> bool {
        self.dual.iter().enumerate().all(|(a, &b)| a == b)
    }

    /// Frobenius-Schur indicator `kappa_a = d_a F^{a abar 1}_{abar a 1}`, +1 or -1
    /// for self-dual labels.
    pub fn fs_indicator(&self, a: usize) -> f64 {
        let ab = self.dual[a];
        (self.f(a, ab, 0, ab, a, 0) * self.qdim[a]).re
    }

    pub fn parse_toml(src: &str) -> Result<Self> {
        let file: CategoryFile = toml::from_str(src).map_err(|e| Error::Parse(e.to_string()))?;
        if file.format_version != 1 {
            return Err(Error::Parse(format!("unsupported format_version {}", file.format_version)));
        }
        let n = file.labels.len();
        if n == 0 {
            return Err(Error::Structure("no labels".into()));
        }
        let mut fusion = vec![0u8; n * n * n];
        for [a, b, cc] in &file.fusion {
            if *a >= n || *b >= n || *cc >= n {
                return Err(Error::Structure(format!("fusion triple ({a},{b},{cc}) out of range")));
            }
            fusion[(a * n + b) * n + cc] = 1;
        }
        let mut fsym = vec![ZERO; n.pow(6)];
        for &(a, b, e, cc, d, f, re, im) in &file.f {
            let idx = [a, b, e, cc, d, f];
            if idx.iter().any(|&x| x >= n) {
                return Err(Error::Structure(format!("F index {idx:?} out of range")));
            }
            fsym[idx.iter().fold(0, |acc, &x| acc * n + x)] = c(re, im);
        }
        if file.s.len() != n || file.s.iter().any(|r| r.len() != n) {
            return Err(Error::Structure(format!("S must be {n}x{n}")));
        }
        let s = CMat::from_fn(n, n, |i, j| c(file.s[i][j][0], file.s[i][j][1]));
        if file.t.len() != n || file.qdim.len() != n {
            return Err(Error::Structure("T and qdim need one entry per label".into()));
        }
        let dual = file.dual.unwrap_or_else(|| (0..n).collect());
        if dual.len() != n || dual.iter().any(|&x| x >= n) {
            return Err(Error::Structure("dual must be a map on labels".into()));
        }
        let total_dim = file.qdim.iter().map(|d| d * d).sum::<f64>().sqrt();
        Ok(CategoryData {
            name: file.name,
            labels: file.labels,
            dual,
            qdim: file.qdim,
            total_dim,
            fusion,
            fsym,
            s,
            t: file.t.iter().map(|z| c(z[0], z[1])).collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_toml(&std::fs::read_to_string(path)?)
    }

    pub fn shipped(name: &str) -> Result<Self> {
        let src = shipped_source(name).ok_or_else(|| Error::Domain(format!("no shipped category {name:?}")))?;
        Self::parse_toml(src)
    }

    pub fn to_toml(&self) -> String {
        let n = self.n();
        let mut fusion = Vec::new();
        let mut f = Vec::new();
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    if self.delta(a, b, cc) {
                        fusion.push([a, b, cc]);
                    }
                }
            }
        }
        for (k, v) in self.fsym.iter().enumerate() {
            if v.norm() > 0.0 {
                let mut idx = [0usize; 6];
                let mut rest = k;
                for slot in idx.iter_mut().rev() {
                    *slot = rest % n;
                    rest /= n;
                }
                f.push((idx[0], idx[1], idx[2], idx[3], idx[4], idx[5], v.re, v.im));
            }
        }
        let file = CategoryFile {
            format_version: 1,
            name: self.name.clone(),
            labels: self.labels.clone(),
            dual: Some(self.dual.clone()),
            qdim: self.qdim.clone(),
            fusion,
            s: (0..n).map(|i| (0..n).map(|j| [self.s[(i, j)].re, self.s[(i, j)].im]).collect()).collect(),
            t: self.t.iter().map(|z| [z.re, z.im]).collect(),
            f,
        };
        toml::to_string(&file).expect("category data serialises")
    }

    /// Drinfeld-style double `C x conj(C)`, labels ordered (a, b) -> a*n + b.
    pub fn doubled(&self) -> CategoryData {
        let n = self.n();
        let nn = n * n;
        let split = |x: usize| (x / n, x % n);
        let mut fusion = vec![0u8; nn * nn * nn];
        for x in 0..nn {
            for y in 0..nn {
                for z in 0..nn {
                    let (a, a2) = split(x);
                    let (b, b2) = split(y);
                    let (cc, c2) = split(z);
                    fusion[(x * nn + y) * nn + z] = self.fusion[self.idx3(a, b, cc)] * self.fusion[self.idx3(a2, b2, c2)];
                }
            }
        }
        let mut fsym = vec![ZERO; nn.pow(6)];
        for (k, slot) in fsym.iter_mut().enumerate() {
            let mut left = [0usize; 6];
            let mut right = [0usize; 6];
            let mut rest = k;
            for i in (0..6).rev() {
                let (l, r) = split(rest % nn);
                left[i] = l;
                right[i] = r;
                rest /= nn;
            }
            let fl = self.fsym[self.idx6(left)];
            if fl == ZERO {
                continue;
            }
            *slot = fl * self.fsym[self.idx6(right)].conj();
        }
        let labels = (0..nn)
            .map(|x| {
                let (a, b) = split(x);
                format!("({},{})", self.labels[a], self.labels[b])
            })
            .collect();
        let dual = (0..nn)
            .map(|x| {
                let (a, b) = split(x);
                self.dual[a] * n + self.dual[b]
            })
            .collect();
        let qdim: Vec<f64> = (0..nn)
            .map(|x| {
                let (a, b) = split(x);
                self.qdim[a] * self.qdim[b]
            })
            .collect();
        let total_dim = qdim.iter().map(|d| d * d).sum::<f64>().sqrt();
        let sc = self.s.map(|z| z.conj());
        let t = (0..nn)
            .map(|x| {
                let (a, b) = split(x);
                self.t[a] * self.t[b].conj()
            })
            .collect();
        CategoryData {
            name: format!("doubled_{}", self.name),
            labels,
            dual,
            qdim,
            total_dim,
            fusion,
            fsym,
            s: self.s.kronecker(&sc),
            t,
        }
    }
}

// ---------------------------------------------------------------------------
// validation

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub category: String,
    pub checks: Vec<InvariantCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    pub fn check(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "category {}", self.category)?;
        for ch in &self.checks {
            writeln!(f, "  {:<28} {:>4}  dev={:.3e}", ch.name, if ch.passed { "ok" } else { "FAIL" }, ch.deviation)?;
        }
        Ok(())
    }
}

fn check_shapes(cat: &CategoryData) -> Result<()> {
    let n = cat.n();
    let bad = |what: &str| Err(Error::Structure(format!("{}: {what}", cat.name)));
    if n == 0 {
        return bad("no labels");
    }
    if cat.dual.len() != n || cat.qdim.len() != n || cat.t.len() != n {
        return bad("dual/qdim/T length differs from label count");
    }
    if cat.fusion.len() != n.pow(3) {
        return bad("fusion tensor has wrong size");
    }
    if cat.fsym.len() != n.pow(6) {
        return bad("F tensor has wrong size");
    }
    if cat.s.nrows() != n || cat.s.ncols() != n {
        return bad("S has wrong shape");
    }
    if cat.dual.iter().any(|&x| x >= n) {
        return bad("dual maps outside the label set");
    }
    Ok(())
}

pub fn validate_category(cat: &CategoryData) -> Result<ValidationReport> {
    validate_category_with_tol(cat, DEFAULT_TOL)
}

pub fn validate_category_with_tol(cat: &CategoryData, tol: f64) -> Result<ValidationReport> {
    check_shapes(cat)?;
    let n = cat.n();
    let mut checks = Vec::new();
    let mut push = |name: &str, dev: f64| checks.push(InvariantCheck { name: name.into(), passed: dev <= tol, deviation: dev });
    let d = |a, b, c| cat.delta(a, b, c) as i32;

    let mut dev = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            push_max(&mut dev, (d(a, b, 0) - d(b, a, 0)).abs() as f64);
            for cc in 0..n {
                let v = d(a, b, cc);
                for p in [d(a, cc, b), d(b, a, cc), d(b, cc, a), d(cc, a, b), d(cc, b, a)] {
                    push_max(&mut dev, (v - p).abs() as f64);
                }
            }
        }
    }
    push("fusion symmetric", dev);

    let mut dev = 0.0f64;
    let bar = |x: usize| cat.dual[x];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let lhs: i32 = (0..n).map(|m| d(i, j, bar(m)) * d(m, k, bar(l))).sum();
                    let rhs: i32 = (0..n).map(|m| d(j, k, bar(m)) * d(i, m, bar(l))).sum();
                    push_max(&mut dev, (lhs - rhs).abs() as f64);
                }
            }
        }
    }
    push("fusion associative", dev);

    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            push_max(&mut dev, (d(i, bar(j), 0) - (i == j) as i32).abs() as f64);
        }
    }
    push("vacuum fusion", dev);

    let dev = (0..n).map(|a| (cat.dual[cat.dual[a]] != a) as i32 as f64).fold(0.0, f64::max);
    push("dual involution", dev);

    let s = &cat.s;
    push("S unitary", (s * s.adjoint() - CMat::identity(n, n)).max_mod());
    push("S symmetric", (s - s.transpose()).max_mod());
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            push_max(&mut dev, (s[(bar(i), j)] - s[(i, j)].conj()).norm());
        }
    }
    push("S conjugation", dev);

    let mut dev = 0.0f64;
    for a in 0..n {
        let ratio = s[(0, a)] / s[(0, 0)];
        push_max(&mut dev, (ratio - c(cat.qdim[a], 0.0)).norm());
    }
    push("S vacuum row", dev);

    let dsum = cat.qdim.iter().map(|x| x * x).sum::<f64>().sqrt();
    push("total dimension", (dsum - cat.total_dim).abs());

    // |F^{i ibar 1}_{jbar j k}| = sqrt(d_k / (d_i d_j)) delta_ijk; the phase is gauge
    // dependent, except on the diagonal where it carries the indicator.
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let expect = if cat.delta(i, j, bar(k)) {
                    (cat.qdim[k] / (cat.qdim[i] * cat.qdim[j])).sqrt()
                } else {
                    0.0
                };
                push_max(&mut dev, (cat.f(i, bar(i), 0, bar(j), j, k).norm() - expect).abs());
            }
        }
    }
    push("F vacuum normalization", dev);

    let dev = (0..n)
        .filter(|&a| cat.dual[a] == a)
        .map(|a| (cat.fs_indicator(a).abs() - 1.0).abs())
        .fold(0.0, f64::max);
    push("Frobenius-Schur indicator", dev);

    let mut dev = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            for cc in 0..n {
                for dd in 0..n {
                    let es: Vec<usize> = (0..n).filter(|&e| cat.delta(a, b, bar(e)) && cat.delta(e, cc, bar(dd))).collect();
                    let fs: Vec<usize> = (0..n).filter(|&f| cat.delta(b, cc, bar(f)) && cat.delta(a, f, bar(dd))).collect();
                    if es.is_empty() && fs.is_empty() {
                        continue;
                    }
                    if es.len() != fs.len() {
                        push_max(&mut dev, 1.0);
                        continue;
                    }
                    let m = CMat::from_fn(es.len(), fs.len(), |x, y| cat.f(a, b, es[x], cc, dd, fs[y]));
                    push_max(&mut dev, (&m * m.adjoint() - CMat::identity(es.len(), es.len())).max_mod());
                }
            }
        }
    }
    push("F unitary", dev);

    push("T unimodular", cat.t.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max));

    let dev = match verlinde_fusion(&cat.s) {
        Ok(vf) => {
            let mut worst = vf.max_deviation;
            for a in 0..n {
                for b in 0..n {
                    for cc in 0..n {
                        worst = worst.max((vf.get(a, b, cc) - cat.n_abc(a, b, cc) as i64).abs() as f64);
                    }
                }
            }
            worst
        }
        Err(_) => f64::INFINITY,
    };
    push("Verlinde consistency", dev);

    Ok(ValidationReport { category: cat.name.clone(), checks })
}

fn push_max(acc: &mut f64, v: f64) {
    if v > *acc {
        *acc = v;
    }
}

// ---------------------------------------------------------------------------
// Verlinde formula

#[derive(Clone, Debug)]
pub struct VerlindeFusion {
    n: usize,
    /// rounded `N^d_{bc}` stored at `[b][c][d]`
    pub coefficients: Vec<i64>,
    pub max_deviation: f64,
}

impl VerlindeFusion {
    /// `N^d_{bc}`
    pub fn get(&self, b: usize, c: usize, d: usize) -> i64 {
        self.coefficients[(b * self.n + c) * self.n + d]
    }

    /// Matrix `(N_b)_{dc} = N^d_{bc}`.
    pub fn matrix(&self, b: usize) -> CMat {
        CMat::from_fn(self.n, self.n, |d, cc| c(self.get(b, cc, d) as f64, 0.0))
    }
}

/// `N^d_{bc} = sum_a S_ba S_ca conj(S_da) / S_1a`.
pub fn verlinde_fusion(s: &CMat) -> Result<VerlindeFusion> {
    let n = s.nrows();
    for a in 0..n {
        let v = s[(0, a)].norm();
        if v < 1e-12 {
            return Err(Error::SingularColumn { column: a, value: v });
        }
    }
    let mut coefficients = vec![0i64; n * n * n];
    let mut max_deviation = 0.0f64;
    for b in 0..n {
        for cc in 0..n {
            for d in 0..n {
                let raw: C64 = (0..n).map(|a| s[(b, a)] * s[(cc, a)] * s[(d, a)].conj() / s[(0, a)]).sum();
                let r = raw.re.round();
                max_deviation = max_deviation.max((raw - c(r, 0.0)).norm());
                coefficients[(b * n + cc) * n + d] = r as i64;
            }
        }
    }
    Ok(VerlindeFusion { n, coefficients, max_deviation })
}

// ---------------------------------------------------------------------------
// flux-basis operators

#[derive(Clone, Debug)]
pub struct FluxMatrix {
    pub basis_tag: String,
    pub entries: CMat,
}

impl FluxMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// `(F_a)_{cb} = N^c_{ab}` in the flux basis `{|b>}`.
pub fn flux_string_operator(a: usize, cat: &CategoryData) -> Result<FluxMatrix> {
    let n = cat.n();
    if a >= n {
        return Err(Error::Domain(format!("label index {a} out of range")));
    }
    let entries = CMat::from_fn(n, n, |cc, b| c(cat.n_abc(a, b, cc) as f64, 0.0));
    Ok(FluxMatrix { basis_tag: "flux".into(), entries })
}

/// `diag(S_ax / S_1x)`: the string operator `F_a` written in the dual basis.
pub fn string_eigenvalues(a: usize, cat: &CategoryData) -> Vec<C64> {
    (0..cat.n()).map(|x| cat.s[(a, x)] / cat.s[(0, x)]).collect()
}

pub fn string_operator_dual(a: usize, cat: &CategoryData) -> FluxMatrix {
    let d = string_eigenvalues(a, cat);
    FluxMatrix { basis_tag: "dual".into(), entries: CMat::from_diagonal(&nalgebra::DVector::from_vec(d)) }
}

/// Columns are the dual basis vectors `|a'> = sum_b conj(S_ba) |b>`.
pub fn dual_basis(cat: &CategoryData) -> CMat {
    cat.s.map(|z| z.conj())
}

/// `P_a = S_1a sum_b conj(S_ba) F_b`
pub fn flux_idempotents(cat: &CategoryData) -> Result<Vec<FluxMatrix>> {
    let n = cat.n();
    let strings: Vec<CMat> = (0..n).map(|b| flux_string_operator(b, cat).map(|f| f.entries)).collect::<Result<_>>()?;
    Ok((0..n)
        .map(|a| {
            let mut p = CMat::zeros(n, n);
            for (b, fb) in strings.iter().enumerate() {
                p += fb.map(|z| z * cat.s[(b, a)].conj());
            }
            FluxMatrix { basis_tag: "flux".into(), entries: p.map(|z| z * cat.s[(0, a)]) }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    S,
    T,
}

/// Parses words such as `t s^3 t s`, `ts³ts`, `s^-1 t`.
pub fn parse_modular_word(word: &str) -> Result<Vec<(Generator, i32)>> {
    let sup = |ch: char| "⁰¹²³⁴⁵⁶⁷⁸⁹".chars().position(|x| x == ch);
    let chars: Vec<char> = word.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        i += 1;
        let g = match ch.to_ascii_lowercase() {
            's' => Generator::S,
            't' => Generator::T,
            ch if ch.is_whitespace() || ch == '*' || ch == '.' => continue,
            other => return Err(Error::Parse(format!("unexpected {other:?} in modular word {word:?}"))),
        };
        let mut sign = 1;
        let mut digits = String::new();
        if i < chars.len() && chars[i] == '^' {
            i += 1;
            if i < chars.len() && chars[i] == '-' {
                sign = -1;
                i += 1;
            }
            while i < chars.len() && chars[i].is_ascii_digit() {
                digits.push(chars[i]);
                i += 1;
            }
            if digits.is_empty() {
                return Err(Error::Parse(format!("missing exponent in {word:?}")));
            }
        } else {
            if i < chars.len() && chars[i] == '⁻' {
                sign = -1;
                i += 1;
            }
            while i < chars.len() {
                if let Some(dg) = sup(chars[i]) {
                    digits.push(char::from_digit(dg as u32, 10).unwrap());
                    i += 1;
                } else if chars[i].is_ascii_digit() {
                    digits.push(chars[i]);
                    i += 1;
                } else {
                    break;
                }
            }
        }
        let power = if digits.is_empty() { 1 } else { digits.parse::<i32>().map_err(|e| Error::Parse(e.to_string()))? };
        out.push((g, sign * power));
    }
    if out.is_empty() {
        return Err(Error::Domain("empty modular word".into()));
    }
    Ok(out)
}

fn matrix_power(m: &CMat, k: i32) -> CMat {
    let n = m.nrows();
    let base = if k < 0 { m.adjoint() } else { m.clone() };
    let mut out = CMat::identity(n, n);
    for _ in 0..k.unsigned_abs() {
        out = &out * &base;
    }
    out
}

/// Product of `S`/`T` powers in word order.
pub fn modular_word_unitary(word: &str, cat: &CategoryData) -> Result<FluxMatrix> {
    let tokens = parse_modular_word(word)?;
    let n = cat.n();
    let t = cat.t_matrix();
    let mut m = CMat::identity(n, n);
    for (g, k) in tokens {
        let base = match g {
            Generator::S => &cat.s,
            Generator::T => &t,
        };
        m = &m * matrix_power(base, k);
    }
    Ok(FluxMatrix { basis_tag: format!("word:{word}"), entries: m })
}

/// `U = T S^3 T S`, the pi/3 rotation of the rhombic torus.
pub fn rhombic_rotation(cat: &CategoryData) -> CMat {
    modular_word_unitary("t s^3 t s", cat).expect("fixed word parses").entries
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopGeometry {
    Square,
    Rhombic,
}

/// Sum of conjugates of `f` over the rotation group of the torus geometry.
pub fn symmetrize(f: &CMat, geometry: LoopGeometry, cat: &CategoryData) -> CMat {
    let (r, count) = match geometry {
        LoopGeometry::Square => (cat.s.clone(), 4),
        LoopGeometry::Rhombic => (rhombic_rotation(cat), 6),
    };
    let n = cat.n();
    let mut acc = CMat::zeros(n, n);
    let mut rj = CMat::identity(n, n);
    for _ in 0..count {
        acc += &rj * f * rj.adjoint();
        rj = &rj * &r;
    }
    acc
}

pub fn symmetrized_loop_sum(a: usize, geometry: LoopGeometry, cat: &CategoryData) -> Result<FluxMatrix> {
    let f = flux_string_operator(a, cat)?;
    Ok(FluxMatrix { basis_tag: format!("flux:{geometry:?}"), entries: symmetrize(&f.entries, geometry, cat) })
}

pub fn commutator_norm(a: &CMat, b: &CMat) -> f64 {
    (a * b - b * a).max_mod()
}

pub fn golden_ratio() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

pub fn identity_flux(n: usize) -> CMat {
    CMat::from_diagonal_element(n, n, ONE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    #[test]
    fn shipped_files_parse_and_validate() {
        for name in ["toric_code", "fibonacci", "semion", "doubled_fibonacci", "doubled_semion"] {
            let cat = CategoryData::shipped(name).unwrap();
            let rep = validate_category(&cat).unwrap();
            assert!(rep.all_passed(), "{rep}");
        }
    }

    #[test]
    fn shipped_doubles_equal_programmatic_doubles() {
        for (single, double) in [("fibonacci", "doubled_fibonacci"), ("semion", "doubled_semion")] {
            let gen = CategoryData::shipped(single).unwrap().doubled();
            let file = CategoryData::shipped(double).unwrap();
            assert_eq!(gen.labels, file.labels);
            assert_eq!(gen.fusion, file.fusion);
            assert!(max_abs_diff(&gen.s, &file.s) < 1e-14);
            let fdev = gen.fsym.iter().zip(&file.fsym).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(fdev < 1e-14);
            assert!(gen.t.iter().zip(&file.t).all(|(a, b)| (a - b).norm() < 1e-14));
        }
    }

    #[test]
    fn perturbed_s_fails_symmetry_only_where_expected() {
        let mut cat = CategoryData::shipped("toric_code").unwrap();
        cat.s[(1, 2)] += c(1e-3, 0.0);
        let rep = validate_category(&cat).unwrap();
        assert!(!rep.check("S symmetric").unwrap().passed);
        assert!(rep.check("fusion associative").unwrap().passed);
    }

    #[test]
    fn malformed_shapes_are_structural_errors() {
        let mut cat = CategoryData::shipped("fibonacci").unwrap();
        cat.fsym.pop();
        assert!(matches!(validate_category(&cat), Err(Error::Structure(_))));
    }

    #[test]
    fn semion_has_negative_indicator() {
        let sem = CategoryData::shipped("semion").unwrap();
        assert_eq!(sem.fs_indicator(1), -1.0);
        let fib = CategoryData::shipped("fibonacci").unwrap();
        assert!((fib.fs_indicator(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn word_parser_accepts_notations() {
        let a = parse_modular_word("t s^3 t s").unwrap();
        let b = parse_modular_word("ts³ts").unwrap();
        assert_eq!(a, b);
        assert_eq!(parse_modular_word("s^-1").unwrap(), vec![(Generator::S, -1)]);
        assert!(parse_modular_word("").is_err());
        assert!(parse_modular_word("q").is_err());
    }

    #[test]
    fn vacuum_loop_sum_is_multiple_of_identity() {
        let cat = CategoryData::shipped("doubled_semion").unwrap();
        let sq = symmetrized_loop_sum(0, LoopGeometry::Square, &cat).unwrap();
        let rh = symmetrized_loop_sum(0, LoopGeometry::Rhombic, &cat).unwrap();
        assert!(max_abs_diff(&sq.entries, &identity_flux(4).scale(4.0)) < 1e-12);
        assert!(max_abs_diff(&rh.entries, &identity_flux(4).scale(6.0)) < 1e-12);
    }
}

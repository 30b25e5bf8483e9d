//! Acceptance gate: one line per criterion, nonzero exit on any failure outside
//! the documented known divergences.

use std::process::ExitCode;
use std::time::Instant;

use topoprep::anyon_algebra::{rhombic_rotation, CategoryData};
use topoprep::anyon_chain::{chain_effective, ChainParams};
use topoprep::evolution::{adiabaticity_error, evolve, Probes, Schedule};
use topoprep::experiment::{perturbed_ground_comparison, reference_state, sweff_report, ExperimentConfig, Family, ModelContext, ModelName, ReferenceState};
use topoprep::levin_wen_probes::{analytic_effective_ground_state, flux_tomography};
use topoprep::linalg::{c, eigh, CMat, C64};
use topoprep::majorana_chain::{critical_gap, gap_report};
use topoprep::schrieffer_wolff::{exact_sw, SwContext};
use topoprep::sparse::SparseOperator;
use topoprep::spin_lattice::{build_field_hamiltonian, edges1, field_operator, rotation_unitary, z_string, FieldFamily, ModelKind};

/// Criteria that fail faithfully; see the decisions ledger.
const KNOWN_DIVERGENT: &[&str] = &["4b", "6"];

struct Sub {
    id: &'static str,
    passed: bool,
    detail: String,
}

fn sub(id: &'static str, passed: bool, detail: impl Into<String>) -> Sub {
    Sub { id, passed, detail: detail.into() }
}

fn main() -> ExitCode {
    let mut blocking = false;
    let fib = ModelContext::new(ModelKind::DoubledFibonacci).expect("doubled Fibonacci model");
    let fib_ref = reference_state(&fib, 320.0, 0.1).expect("reference run");
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Vec<Sub> + '_>)> = vec![
        (1, "doubled-Fibonacci flux table", Box::new(|| criterion_1(&fib, &fib_ref))),
        (2, "printed analytic ground state", Box::new(criterion_2)),
        (3, "perturbed-ground overlap", Box::new(|| criterion_3(&fib_ref))),
        (4, "Fibonacci adiabaticity", Box::new(|| criterion_4(&fib))),
        (5, "toric obstruction", Box::new(criterion_5)),
        (6, "Majorana critical gap", Box::new(criterion_6)),
        (7, "rotation symmetry dimension", Box::new(criterion_7)),
        (8, "order-L property suite (toric)", Box::new(criterion_8)),
        (9, "anyon-chain order-L property suite", Box::new(criterion_9)),
        (10, "exact-SW oracle equivalence", Box::new(criterion_10)),
    ];
    for (n, name, f) in criteria {
        let start = Instant::now();
        let subs = f();
        let passed = subs.iter().all(|s| s.passed);
        let mut known = true;
        for s in subs.iter().filter(|s| !s.passed) {
            if !KNOWN_DIVERGENT.contains(&s.id) {
                known = false;
                blocking = true;
            }
        }
        let status = match (passed, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known divergence)",
            (false, false) => "FAIL",
        };
        let detail: Vec<String> = subs.iter().map(|s| format!("{}{} {}", s.id, if s.passed { "" } else { "!" }, s.detail)).collect();
        println!("criterion {n:>2} {status}: {name} [{:.1}s] {}", start.elapsed().as_secs_f64(), detail.join("; "));
    }
    if blocking {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn fib_sectors(w: &[f64]) -> (f64, f64, f64) {
    (w[0], w[3], w[1] + w[2])
}

fn criterion_1(fib: &ModelContext, reference: &ReferenceState) -> Vec<Sub> {
    let cat = CategoryData::shipped("doubled_fibonacci").unwrap();
    let g = analytic_effective_ground_state(&cat).unwrap();
    let w: Vec<f64> = g.amplitudes.iter().map(|z| z.norm_sqr()).collect();
    let (p11, ptt, pair) = fib_sectors(&w);
    let eff_ok = (p11 - 0.5125).abs() < 0.005 && (ptt - 0.4804).abs() < 0.005 && (pair - 0.0072).abs() < 0.005;

    let frame = &fib.ground().unwrap().frame;
    let rep = flux_tomography(ModelKind::DoubledFibonacci, &edges1(&[1, 2]), frame, Some(&reference.state)).unwrap();
    let get = |name: &str| rep.sector(name).and_then(|s| s.expectation).unwrap_or(f64::NAN);
    let (r11, rtt, rpair) = (get("(1,1)"), get("(tau,tau)"), get("(1,tau)+(tau,1)"));
    let ref_ok = (r11 - 0.5096).abs() < 0.01 && (rtt - 0.4838).abs() < 0.01 && (rpair - 0.0066).abs() < 0.01;
    vec![
        sub("1a", eff_ok, format!("psi_eff ({p11:.4}, {ptt:.4}, {pair:.4}) vs (0.5125, 0.4804, 0.0072)")),
        sub("1b", ref_ok, format!("psi_R ({r11:.4}, {rtt:.4}, {rpair:.4}) vs (0.5096, 0.4838, 0.0066)")),
    ]
}

fn criterion_2() -> Vec<Sub> {
    let cat = CategoryData::shipped("doubled_fibonacci").unwrap();
    let g = analytic_effective_ground_state(&cat).unwrap();
    let printed = [c(0.715, 0.0), c(0.019, -0.057), c(0.019, 0.057), c(0.693, 0.0)];
    // best global phase
    let ov: C64 = printed.iter().zip(&g.amplitudes).map(|(p, a)| p.conj() * a).sum();
    let phase = ov.conj() / ov.norm();
    let dev = printed.iter().zip(&g.amplitudes).map(|(p, a)| (a * phase - p).norm()).fold(0.0, f64::max);
    let shown: Vec<String> = g.amplitudes.iter().map(|a| format!("{:.4}{:+.4}i", (a * phase).re, (a * phase).im)).collect();
    vec![sub("2", dev < 0.01, format!("amplitudes [{}], max deviation {dev:.4}", shown.join(", ")))]
}

fn criterion_3(reference: &ReferenceState) -> Vec<Sub> {
    let mut cfg = ExperimentConfig::new(ModelName::DoubledFibonacci, Family::DiscPm, 320.0, 0.1);
    cfg.disc_points = vec![[0.0, 0.0]];
    let rows = perturbed_ground_comparison(&cfg, 1e-3, Some(reference)).unwrap();
    let r = &rows[0];
    vec![sub("3", r.degeneracy == 1 && (r.overlap - 0.9976).abs() <= 0.003, format!("overlap {:.6} (degeneracy {})", r.overlap, r.degeneracy))]
}

fn fib_run(fib: &ModelContext, plus: bool, dt: f64, times: Vec<f64>) -> (f64, Vec<(f64, f64)>) {
    let (h_triv, psi0) = build_field_hamiltonian(FieldFamily::DiscZ { a: 0.0, b: 0.0, plus }, 12).unwrap();
    let probes = Probes { times, ..Probes::none() };
    let (psi, traj) = evolve(&h_triv, &fib.h_top, &psi0, &Schedule::linear(320.0, dt), &probes).unwrap();
    let inst = traj.samples.iter().filter_map(|s| s.eps_adia.map(|e| (s.t, e))).collect();
    (adiabaticity_error(&psi, fib.ground().unwrap()), inst)
}

fn criterion_4(fib: &ModelContext) -> Vec<Sub> {
    let in_band = |e: f64| (3e-4..=3e-3).contains(&e);
    let (minus, inst) = fib_run(fib, false, 0.1, vec![280.0]);
    let (plus, _) = fib_run(fib, true, 0.1, vec![]);
    let (minus_fine, _) = fib_run(fib, false, 0.01, vec![]);
    let e280 = inst.iter().find(|(t, _)| (t - 280.0).abs() < 0.05).map(|x| x.1).unwrap_or(f64::NAN);
    vec![
        sub("4a", in_band(minus), format!("-Z start eps(T)={minus:.3e}")),
        sub("4b", in_band(plus), format!("+Z start eps(T)={plus:.3e}")),
        sub("4c", e280 >= 1e-2, format!("eps(t=280)={e280:.3e}")),
        sub("4d", (minus_fine - minus).abs() < 1e-3, format!("dt=0.01 eps(T)={minus_fine:.3e}")),
    ]
}

fn criterion_5() -> Vec<Sub> {
    let ctx = ModelContext::new(ModelKind::Toric).unwrap();
    let (h_triv, psi0) = build_field_hamiltonian(FieldFamily::Theta { theta: 0.0 }, 12).unwrap();
    let observables: Vec<(String, SparseOperator)> =
        ctx.lattice.vertices.iter().enumerate().map(|(k, v)| (format!("A_{k}"), z_string(12, v))).collect();
    let probes = Probes { samples: 64, observables, ..Probes::none() };
    let (psi, traj) = evolve(&h_triv, &ctx.h_top, &psi0, &Schedule::linear(40.0, 0.1), &probes).unwrap();
    let weight = ctx.ground().unwrap().weight(&psi);
    let drift = traj.samples.iter().flat_map(|s| s.observables.iter().map(|a| (a + 1.0).abs())).fold(0.0, f64::max);
    vec![
        sub("5a", weight < 1e-6, format!("final ground weight {weight:.1e}")),
        sub("5b", drift < 1e-6, format!("max |<A_v> + 1| {drift:.1e}")),
    ]
}

fn criterion_6() -> Vec<Sub> {
    let mut worst = (0usize, 0.0f64, 0.0f64);
    for l in 2..=10 {
        let r = gap_report(l).unwrap();
        let d = (r.even_sector_gap - critical_gap(l)).abs();
        if d > worst.1 {
            worst = (l, d, r.even_sector_gap);
        }
    }
    let (l, d, ed) = worst;
    vec![sub("6", d < 1e-8, format!("worst L={l}: formula {:.6} vs even-sector {ed:.6} (dev {d:.2e})", critical_gap(l)))]
}

/// Multiplicity of each sixth root of unity, plus the unaccounted remainder.
fn sixth_root_multiplicities(u: &CMat) -> (Vec<usize>, usize) {
    let n = u.nrows();
    let mults: Vec<usize> = (0..6)
        .map(|k| {
            let w = C64::from_polar(1.0, std::f64::consts::PI * k as f64 / 3.0);
            let m = u - CMat::identity(n, n) * w;
            m.singular_values().iter().filter(|&&s| s < 1e-8).count()
        })
        .collect();
    let rest = n - mults.iter().sum::<usize>().min(n);
    (mults, rest)
}

fn criterion_7() -> Vec<Sub> {
    let mut subs = Vec::new();
    for model in ModelKind::ALL {
        let cat = model.ground_category();
        let u = rhombic_rotation(&cat);
        let (mu, rest_u) = sixth_root_multiplicities(&u);
        let ctx = ModelContext::new(model).unwrap();
        let img = ctx.ground().unwrap().compress(&rotation_unitary(&ctx.lattice));
        let (mi, rest_i) = sixth_root_multiplicities(&img);
        let ok = mu[0] == 2 && rest_u == 0 && rest_i == 0 && mu == mi;
        subs.push(sub("7", ok, format!("{}: TS^3TS {mu:?}, lattice {mi:?}", model.name())));
    }
    subs
}

fn criterion_8() -> Vec<Sub> {
    let mut subs = Vec::new();
    for (n, want) in [([0.0, 0.0, 1.0], 2usize), ([1.0, 0.0, 0.0], 4)] {
        let r = sweff_report(ModelKind::Toric, n, 1e-3, 6).unwrap();
        let detail = match &r.order_l {
            Some(t) => format!(
                "n={n:?}: L={:?}, lower traceless max {:.1e}, angle {:.1e}, fitted constant {:.6} (printed {:.6})",
                r.tqo.order,
                t.lower_orders.iter().map(|x| x.1).fold(0.0, f64::max),
                t.angle,
                t.fitted_constant,
                t.printed_constant
            ),
            None => format!("n={n:?}: L={:?}, no order-L check", r.tqo.order),
        };
        let ok = r.tqo.order == Some(want)
            && r.order_l.as_ref().is_some_and(|t| t.lower_orders.iter().all(|x| x.1 < 1e-8) && t.angle < 1e-6);
        subs.push(sub(if want == 2 { "8a" } else { "8b" }, ok, detail));
    }
    subs
}

fn criterion_9() -> Vec<Sub> {
    let cat = CategoryData::shipped("fibonacci").unwrap();
    let mut subs = Vec::new();
    for l in [3usize, 4] {
        let base = ChainParams::uniform(2, 1.0, 0.7, 1.0);
        let r1 = chain_effective(&cat, l, &base).unwrap();
        let r2 = chain_effective(&cat, l, &base.scaled(2.0)).unwrap();
        let f1 = r1.coefficients[0].f_l;
        let f2 = r2.coefficients[0].f_l;
        let ratio_dev = ((f2 / f1).norm() - 2f64.powi(l as i32)).abs() / 2f64.powi(l as i32);
        let ok = r1.residual < 1e-8 && r2.residual < 1e-8 && f1.norm() > 1e-8 && ratio_dev < 1e-8;
        subs.push(sub(
            if l == 3 { "9a" } else { "9b" },
            ok,
            format!("L={l}: f_L={:.6e}, residual {:.1e}, scaling deviation {ratio_dev:.1e}", f1.re, r1.residual),
        ));
    }
    subs
}

/// Lowest `k` eigenvalues of `h` by diagonalizing each connected block.
fn block_spectrum(h: &SparseOperator, k: usize) -> Vec<f64> {
    let mut all = Vec::new();
    for comp in SparseOperator::components(&[h]) {
        let m = CMat::from_fn(comp.len(), comp.len(), |r, c| h.get(comp[r], comp[c]));
        all.extend(eigh(&m).0);
    }
    all.sort_by(f64::total_cmp);
    all.truncate(k);
    all
}

fn criterion_10() -> Vec<Sub> {
    let eps = 1e-3;
    let mut subs = Vec::new();
    for model in ModelKind::ALL {
        let ctx = ModelContext::new(model).unwrap();
        let v = field_operator(12, [0.0, 0.0, -1.0]);
        let sw = SwContext::from_sparse(ctx.h_top.sparse(), &v, 8).unwrap();
        let mut spec = exact_sw(&sw, eps).unwrap().eigenvalues();
        spec.sort_by(f64::total_cmp);
        let h = ctx.h_top.sparse().add_scaled(&v, c(eps, 0.0));
        let direct = block_spectrum(&h, sw.k);
        let dev = spec.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        subs.push(sub("10", spec.len() == direct.len() && dev < 1e-8, format!("{}: k={}, dev {dev:.1e}", model.name(), sw.k)));
    }
    subs
}

use topoprep::experiment::{
    logical_values, reference_state, run, validate_reference, ExperimentConfig, Family, ModelContext, ModelName, ProbeKind, Sign,
};
use topoprep::levin_wen_probes::excitation_check;
use topoprep::majorana_chain::{exact_parity_effective, symmetry_protected_interpolation, ChainSpec};
use topoprep::spin_lattice::ModelKind;

fn disc_config(model: ModelName, family: Family, points: Vec<[f64; 2]>, t: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(model, family, t, 0.1);
    cfg.disc_points = points;
    cfg.samples = 4;
    cfg
}

#[test]
fn semion_ring_creates_two_fluxes() {
    let ctx = ModelContext::new(ModelKind::DoubledSemion).unwrap();
    let g = ctx.ground().unwrap();
    let rep = excitation_check(ModelKind::DoubledSemion, &ctx.lattice, 1, 0, &g.frame, g.energy).unwrap();
    assert!(rep.plaquette_residual < 1e-10);
    assert!(rep.eigen_residual < 1e-10);
    for s in &rep.energy_shifts {
        assert!((s - 2.0).abs() < 1e-10);
    }
}

#[test]
fn semion_reference_is_the_joint_eigenvector() {
    let ctx = ModelContext::new(ModelKind::DoubledSemion).unwrap();
    let r = reference_state(&ctx, 120.0, 0.1).unwrap();
    let v = validate_reference(&ctx, &r.state).unwrap();
    assert_eq!(v.joint_dimension, 1);
    assert!(v.rotation_residual < 1e-6, "{v:?}");
    assert!(v.string_residual < 1e-6, "{v:?}");
}

#[test]
fn toric_x_maps_mirror_between_signs() {
    let pts = vec![[0.0, 0.0], [0.3, -0.4], [0.3, 0.4], [-0.5, 0.0]];
    let mut cfg = disc_config(ModelName::Toric, Family::DiscPmX, pts.clone(), 6.0);
    cfg.signs = vec![Sign::Plus, Sign::Minus];
    cfg.probes = vec![ProbeKind::EpsAdia];
    let out = run(&cfg).unwrap();
    assert!(out.all_checks_passed(), "{:?}", out.checks);
    assert!(out.checks.iter().any(|c| c.name.starts_with("+X/-X")));
    let n = pts.len();
    let eps = |i: usize| out.rows[i].value("eps_adia").unwrap();
    // (+, a, b) pairs with (-, a, -b); on the b = 0 axis the maps agree point-wise
    assert!((eps(0) - eps(n)).abs() < 1e-8);
    assert!((eps(3) - eps(n + 3)).abs() < 1e-8);
    assert!((eps(1) - eps(n + 2)).abs() < 1e-8);
    assert!((eps(2) - eps(n + 1)).abs() < 1e-8);
    assert!((eps(1) - eps(n + 1)).abs() > 1e-4);
}

#[test]
fn toric_logical_z_survives_the_minus_z_start() {
    let mut cfg = disc_config(ModelName::Toric, Family::DiscPm, vec![[0.0, 0.0]], 10.0);
    cfg.signs = vec![Sign::Minus];
    cfg.probes = vec![ProbeKind::Logical];
    let out = run(&cfg).unwrap();
    assert!(out.all_checks_passed(), "{:?}", out.checks);
    assert!((out.rows[0].value("z_bar").unwrap() - 1.0).abs() < 1e-8);

    let ctx = ModelContext::new(ModelKind::Toric).unwrap();
    let g = ctx.ground().unwrap();
    let psi = g.frame.column(0).into_owned();
    let lv = logical_values(&ctx, &psi).unwrap();
    assert!(lv.projected.is_some());
}

#[test]
fn majorana_interpolation_keeps_parity() {
    let rep = symmetry_protected_interpolation(&ChainSpec::open(6, 1.0), 80.0, 0.1).unwrap();
    assert!(rep.max_parity_drift < 1e-8, "{rep:?}");
    assert!((rep.initial_parity.abs() - 1.0).abs() < 1e-12);
    assert!((0.0..=1.0).contains(&rep.eps_adia));
}

#[test]
fn majorana_effective_is_gap_consistent() {
    let rep = exact_parity_effective(&ChainSpec::open(6, 0.0), 0.1, None).unwrap();
    assert!(rep.parity_residual < 1e-10, "{rep:?}");
    assert!(rep.gap_consistent_residual < 1e-10, "{rep:?}");
    assert!(rep.printed_form_residual > 1e-3, "{rep:?}");
}

#[test]
fn runs_are_reproducible_across_pool_sizes() {
    let mut cfg = disc_config(ModelName::DoubledSemion, Family::DiscPm, vec![[0.0, 0.0], [0.2, 0.1]], 4.0);
    cfg.probes = vec![ProbeKind::EpsAdia, ProbeKind::OverlapRef];
    cfg.threads = Some(1);
    let one = run(&cfg).unwrap();
    cfg.threads = Some(3);
    let three = run(&cfg).unwrap();
    assert_eq!(one.results_csv(), three.results_csv());
    assert_eq!(one.manifest.results_sha256, three.manifest.results_sha256);
    assert_eq!(one.references.len(), 1);
    for r in &one.rows {
        for (name, v) in &r.values {
            if let Some(v) = v {
                assert!((-1e-12..=1.0 + 1e-12).contains(v), "{name} = {v}");
            }
        }
    }

    let dir = std::env::temp_dir().join(format!("topoprep-run-{}", std::process::id()));
    let written = one.write_to(&dir).unwrap();
    assert!(written.iter().any(|p| p.ends_with("reference_doubled_semion.csv")));
    std::fs::remove_dir_all(&dir).unwrap();
}

use std::f64::consts::PI;
use std::sync::Arc;

use fracdg::analysis::{energy_identity_residual, error_norms, l2_error, seminorm_error_sq};
use fracdg::flux::{FluxModel, NumericalFlux, NumericalFluxKind};
use fracdg::fractional::{
    check_inverse_inequality, load_or_assemble, read_operator, write_operator, cache_file_name, FractionalOperator,
    SpectralOracle, DEFAULT_ASSEMBLY_TOLERANCE,
};
use fracdg::mesh::{l2_distance, l2_project, DGFunction, Mesh};
use fracdg::reference::{fine_grid_reference, reference_l2_error, ExactField, FineGridSetup, FourierSolution, Mode};
use fracdg::scheme::{run, run_with, SchemeConfig, Stepper};
use fracdg::Error;

const L: f64 = 2.0 * PI;

fn assemble(cells: usize, degree: usize, lambda: f64) -> Arc<FractionalOperator> {
    let mesh = Mesh::shared(L, cells, degree).unwrap();
    Arc::new(FractionalOperator::assemble(&mesh, lambda, DEFAULT_ASSEMBLY_TOLERANCE).unwrap())
}

fn linear(speed: f64) -> NumericalFlux {
    NumericalFlux::new(FluxModel::linear(speed, -3.0, 3.0).unwrap(), NumericalFluxKind::Godunov)
}

fn battery_solution(lambda: f64) -> FourierSolution {
    FourierSolution::new(0.0, vec![Mode::sin(1, 1.0), Mode::cos(2, 0.5)], 1.0, lambda, L).unwrap()
}

fn scratch_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("fracdg-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn operator_action_on_sine_approaches_the_spectral_oracle() {
    let oracle = SpectralOracle::new(0.5, L, 8).unwrap();
    let (a, b) = oracle.apply_mode(1, 0.0, 1.0);
    let mut errs = Vec::new();
    for cells in [16, 32, 64] {
        let op = assemble(cells, 2, 0.5);
        let mesh = op.mesh();
        let v = op.apply(&l2_project(|x: f64| x.sin(), mesh)).unwrap();
        let target = l2_project(|x: f64| a * x.cos() + b * x.sin(), mesh);
        let diff: f64 = v.iter().zip(target.coeffs()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        errs.push(diff / target.l2_norm());
    }
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[2] < 1e-4, "{errs:?}");
}

#[test]
fn near_blocks_do_not_depend_on_the_period() {
    // Same h, period L and 2L: only the periodic images differ.
    let a = assemble(32, 1, 0.5);
    let mesh = Mesh::shared(2.0 * L, 64, 1).unwrap();
    let b = FractionalOperator::assemble(&mesh, 0.5, DEFAULT_ASSEMBLY_TOLERANCE).unwrap();
    let scale = a.block(0).iter().map(|v| v.abs()).fold(0.0, f64::max);
    for d in 0..4 {
        let diff = a.block(d).iter().zip(b.block(d)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 2e-2 * scale, "block {d}: {diff:e} vs {scale:e}");
    }
}

#[test]
fn cached_operator_is_bit_identical() {
    let dir = scratch_dir("cache");
    let mesh = Mesh::shared(L, 24, 2).unwrap();
    let fresh = load_or_assemble(Some(&dir), &mesh, 0.4, DEFAULT_ASSEMBLY_TOLERANCE).unwrap();
    let path = dir.join(cache_file_name(&mesh, 0.4, DEFAULT_ASSEMBLY_TOLERANCE));
    let bytes = std::fs::read(&path).unwrap();
    let cached = load_or_assemble(Some(&dir), &mesh, 0.4, DEFAULT_ASSEMBLY_TOLERANCE).unwrap();
    assert!(fresh.blocks().iter().zip(cached.blocks()).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(fresh.c_lambda().to_bits(), cached.c_lambda().to_bits());
    write_operator(&cached, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert!(read_operator(&path, &mesh, 0.6, DEFAULT_ASSEMBLY_TOLERANCE).unwrap().is_none());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn error_norms_agree_with_finer_quadrature() {
    let sol = battery_solution(0.5);
    let op = assemble(32, 1, 0.5);
    let mut cfg = SchemeConfig::new(linear(1.0), Arc::clone(&op), 0.2);
    cfg.record_every = 1;
    let rec = run(&cfg, &|x| sol.value(0.0, x)).unwrap();
    let levels: Vec<_> = rec.snapshots.iter().map(|(n, t, u)| (*n, *t, u.clone())).collect();
    let record = error_norms(&levels, &sol, &op).unwrap();

    // Recompute with ten times as many quadrature points per cell.
    let points = 10 * (op.mesh().degree() + 8);
    let mut sum = 0.0;
    let mut best: f64 = 0.0;
    for (i, (_, t, u)) in levels.iter().enumerate() {
        let e = l2_distance(|x| sol.value(*t, x), u, points);
        best = best.max(e + f64::sqrt(sum));
        if i + 1 < levels.len() {
            sum += (levels[i + 1].1 - t) * seminorm_error_sq(&sol, *t, u, &op).unwrap();
        }
        if i + 1 == levels.len() {
            assert!((e - record.l2_error).abs() <= 1e-8 * e, "{e} vs {}", record.l2_error);
        }
    }
    assert!((best - record.energy_error).abs() <= 1e-8 * best);
    assert!(record.energy_error >= record.l2_error);
}

#[test]
fn incomplete_levels_are_rejected() {
    let sol = battery_solution(0.5);
    let op = assemble(8, 1, 0.5);
    let u = l2_project(|x| sol.value(0.0, x), op.mesh());
    let levels = vec![(0, 0.0, u.clone()), (2, 0.1, u)];
    assert!(matches!(error_norms(&levels, &sol, &op), Err(Error::InvalidArgument(_))));
}

#[test]
fn final_error_is_second_order_small() {
    let sol = FourierSolution::new(0.0, vec![Mode::sin(1, 1.0)], 1.0, 0.5, L).unwrap();
    let op = assemble(128, 1, 0.5);
    let cfg = SchemeConfig::new(linear(1.0), Arc::clone(&op), 0.5);
    let rec = run(&cfg, &|x| x.sin()).unwrap();
    let e = l2_error(&sol, 0.5, rec.final_solution(), 12);
    let h = op.mesh().h();
    assert!(e < 0.5 * h * h, "error {e:e}, h^2 = {:e}", h * h);
}

#[test]
fn one_step_defect_is_third_order_in_tau() {
    // c = 0 and u = sin: the exact step multiplies by exp(-tau).
    let op = assemble(256, 2, 0.5);
    let cfg = SchemeConfig::new(linear(0.0), Arc::clone(&op), 1.0);
    let stepper = Stepper::new(&cfg).unwrap();
    let u = l2_project(|x: f64| x.sin(), op.mesh());
    let defects: Vec<f64> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&tau| {
            let next = stepper.step(&u, 0.0, tau).unwrap();
            let mut exact = u.clone();
            exact.scale(f64::exp(-tau));
            let d: f64 = next.coeffs().iter().zip(exact.coeffs()).map(|(a, b)| (a - b).powi(2)).sum();
            d.sqrt()
        })
        .collect();
    for w in defects.windows(2) {
        let r = w[0] / w[1];
        assert!((7.0..=9.0).contains(&r), "{defects:?}");
    }
}

#[test]
fn consistency_defect_is_third_order_for_other_lambdas() {
    for lambda in [0.3, 0.7] {
        let sol = battery_solution(lambda);
        let d: Vec<f64> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&t| sol.consistency_defect(0.2, t)).collect();
        for w in d.windows(2) {
            let r = w[0] / w[1];
            assert!((7.0..=9.0).contains(&r), "lambda {lambda}: {d:?}");
        }
    }
}

#[test]
fn energy_identity_holds_for_several_lambdas() {
    for lambda in [0.3, 0.5, 0.7] {
        let cfg = SchemeConfig::new(linear(1.0), assemble(32, 1, lambda), 0.5);
        let rep = energy_identity_residual(&cfg, &battery_solution(lambda)).unwrap();
        assert!(rep.max_relative <= 1e-6, "lambda {lambda}: {:e}", rep.max_relative);
    }
}

#[test]
fn corrupted_operator_is_flagged() {
    let clean = assemble(32, 1, 0.5);
    let mut bad = (*clean).clone();
    // A positive shift on the cell-mean diagonal makes the form indefinite.
    bad.perturb_block(0, 0, 0, bad.norm_bound());
    let bad = Arc::new(bad);

    let cfg = SchemeConfig::new(linear(1.0), Arc::clone(&bad), 0.5);
    let identity = energy_identity_residual(&cfg, &battery_solution(0.5));
    assert!(
        matches!(identity, Err(Error::NumericalConsistency(_))) || identity.is_ok_and(|r| r.max_relative > 1e-6)
    );

    let before = check_inverse_inequality(&clean, 100, 3).unwrap();
    match check_inverse_inequality(&bad, 100, 3) {
        Ok(after) => assert!(after.max_ratio > 1.2 * before.max_ratio),
        Err(e) => assert!(matches!(e, Error::NumericalConsistency(_)), "{e}"),
    }
}

#[test]
fn fine_grid_reference_matches_the_fourier_solution() {
    let sol = battery_solution(0.5);
    let setup = FineGridSetup {
        flux: linear(1.0),
        lambda: 0.5,
        length: L,
        degree: 1,
        cfl: 0.1,
        final_time: 0.5,
        max_dofs: 1 << 14,
    };
    let u0 = |x: f64| sol.value(0.0, x);
    let reference = fine_grid_reference(&setup, &u0, 128, 16).unwrap();
    let finer = fine_grid_reference(&setup, &u0, 256, 16).unwrap();
    for cells in [8, 16] {
        let cfg = SchemeConfig::new(linear(1.0), assemble(cells, 1, 0.5), 0.5);
        let u = run(&cfg, &u0).unwrap().final_solution().clone();
        let exact = l2_error(&sol, 0.5, &u, 12);
        let self_ref = reference_l2_error(&reference, &u).unwrap();
        let self_finer = reference_l2_error(&finer, &u).unwrap();
        assert!((self_ref - exact).abs() <= 0.05 * exact, "N={cells}: {self_ref:e} vs {exact:e}");
        assert!((self_finer - self_ref).abs() <= 0.01 * self_ref, "N={cells}: {self_finer:e} vs {self_ref:e}");
    }
    assert!(matches!(fine_grid_reference(&setup, &u0, 32, 16), Err(Error::InvalidArgument(_))));
    assert!(matches!(fine_grid_reference(&setup, &u0, 1 << 14, 16), Err(Error::Resource(_))));
}

#[test]
fn burgers_self_convergence_has_positive_order() {
    let flux = NumericalFlux::new(FluxModel::burgers(-1.0, 2.0).unwrap(), NumericalFluxKind::Godunov);
    let setup = FineGridSetup {
        flux,
        lambda: 0.5,
        length: L,
        degree: 1,
        cfl: 0.1,
        final_time: 0.5,
        max_dofs: 1 << 12,
    };
    let u0 = |x: f64| 0.5 + 0.25 * x.sin();
    let reference = fine_grid_reference(&setup, &u0, 1024, 64).unwrap();
    let errs: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&cells| {
            let cfg = SchemeConfig::new(flux, assemble(cells, 1, 0.5), 0.5);
            let u = run(&cfg, &u0).unwrap().final_solution().clone();
            reference_l2_error(&reference, &u).unwrap()
        })
        .collect();
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() > 1.5, "{errs:?}");
    }
}

#[test]
fn constant_data_stays_constant() {
    let op = assemble(16, 2, 0.5);
    let flux = NumericalFlux::new(FluxModel::burgers(-2.0, 2.0).unwrap(), NumericalFluxKind::Godunov);
    let cfg = SchemeConfig::new(flux, Arc::clone(&op), 0.3);
    let mut worst: f64 = 0.0;
    run_with(&cfg, &|_| 0.7, |view| {
        let c = DGFunction::constant(op.mesh(), 0.7);
        let d: f64 = view.u.coeffs().iter().zip(c.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(d);
        Ok(())
    })
    .unwrap();
    assert!(worst < 1e-13, "{worst:e}");
}

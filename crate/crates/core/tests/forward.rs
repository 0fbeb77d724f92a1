use eit_core::forward::*;
use eit_core::geometry::{Layout, PartitionSpec};
use eit_core::{EitError, ProblemSetup, ProblemSpec};

fn concentric(h: f64) -> ProblemSetup {
    ProblemSetup::build(&ProblemSpec {
        partition: PartitionSpec { regions: 1, r0: 0.5, layout: Layout::EqualSectors },
        target_h: h,
        electrodes: 16,
        coverage: 1.0,
        gamma_min: 0.5,
        gamma_max: 4.0,
    })
    .unwrap()
}

fn rel_frobenius(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn condensed_map_reproduces_full_solves() {
    let mut annular = ProblemSpec::reference();
    annular.partition = PartitionSpec { regions: 4, r0: 0.8, layout: Layout::AnnularSectors { rings: 2, sectors: 2 } };
    annular.target_h = 0.08;
    annular.coverage = 0.6;
    for (spec, theta) in [(ProblemSpec::reference(), vec![2.0, 1.5]), (annular, vec![0.7, 3.1, 1.9, 2.6])] {
        let setup = ProblemSetup::build(&spec).unwrap();
        let fem = setup.fem_forward().unwrap();
        let cond = setup.condensed_forward().unwrap();
        assert!(cond.interface_size() < setup.mesh.vertex_count() / 5);
        let (gf, sf) = fem.forward_with_sensitivity(&theta).unwrap();
        let (gc, sc) = cond.forward_with_sensitivity(&theta).unwrap();
        assert!((&gf.g - &gc.g).amax() < 1e-11 * gf.max_abs().max(1.0));
        for (a, b) in sf.slices.iter().zip(&sc.slices) {
            assert!((a - b).amax() < 1e-11 * a.amax());
        }
    }
}

#[test]
fn unit_conductivity_gives_the_zero_matrix() {
    let setup = ProblemSetup::build(&ProblemSpec::reference()).unwrap();
    for model in [&setup.fem_forward().unwrap() as &dyn ForwardModel, &setup.condensed_forward().unwrap()] {
        let g = model.forward_matrix(&[1.0, 1.0]).unwrap();
        assert!(g.max_abs() <= 1e-12);
    }
}

#[test]
fn matrix_and_tensor_invariants() {
    let setup = ProblemSetup::build(&ProblemSpec::reference()).unwrap();
    let model = setup.fem_forward().unwrap();
    let (g, s) = model.forward_with_sensitivity(&[3.2, 0.8]).unwrap();
    assert!(g.max_asymmetry() <= 1e-9);
    let (spectral, frobenius) = g.norms();
    assert!(spectral <= frobenius);
    for slice in &s.slices {
        assert!((slice - slice.transpose()).amax() <= 1e-9 * slice.amax());
        assert!((0..16).all(|i| slice[(i, i)] >= 0.0));
    }
    // Relabelling electrodes permutes rows and columns together.
    let shifted = eit_core::geometry::ElectrodeSet::from_vertex_ranges(
        &setup.mesh,
        &(0..16).map(|k| {
            let a = &setup.electrodes.arcs[(k + 3) % 16];
            (a.first, a.count)
        }).collect::<Vec<_>>(),
    )
    .unwrap();
    let relabelled = FemForward::new(setup.mesh.clone(), &shifted, setup.stiffness.clone(), setup.space.clone())
        .unwrap()
        .forward_matrix(&[3.2, 0.8])
        .unwrap();
    for i in 0..16 {
        for j in 0..16 {
            assert!((relabelled.g[(i, j)] - g.g[((i + 3) % 16, (j + 3) % 16)]).abs() < 1e-12);
        }
    }
    assert!(matches!(model.forward_matrix(&[4.5, 1.0]), Err(EitError::OutsideParameterSpace { .. })));
}

#[test]
fn concentric_disk_matches_the_spectral_oracle() {
    let mut errors = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let setup = concentric(h);
        let g = setup.fem_forward().unwrap().forward_matrix(&[2.0]).unwrap().g;
        let (oracle, tail) = spectral_oracle_matrix(0.5, 2.0, &setup.electrodes, 256).unwrap();
        assert!(tail < 1e-12);
        errors.push(rel_frobenius(&g, &oracle));
    }
    assert!(errors[1] <= 0.05 && errors[2] <= 0.02, "{errors:?}");
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn sensitivity_at_unit_conductivity_matches_modal_derivative() {
    let setup = concentric(0.025);
    let s = setup.condensed_forward().unwrap().sensitivity_tensor(&[1.0]).unwrap();
    let (oracle, _) = spectral_oracle_sensitivity_matrix(0.5, 1.0, &setup.electrodes, 256).unwrap();
    let diag_err = (0..16).map(|i| (s.get(i, i, 0) - oracle[(i, i)]).abs() / oracle[(i, i)]).fold(0.0, f64::max);
    assert!(diag_err <= 0.02, "{diag_err}");
    assert!(rel_frobenius(&s.slices[0], &oracle) <= 0.02);
}

#[test]
fn finite_differences_agree_with_the_sensitivity() {
    let setup = ProblemSetup::build(&ProblemSpec::reference()).unwrap();
    let model = setup.condensed_forward().unwrap();
    let theta = [2.0, 1.5];
    let s = model.sensitivity_tensor(&theta).unwrap();
    let max_rel = |step: f64| {
        let fd = fd_sensitivity(&model, &theta, step).unwrap();
        let mut worst: f64 = 0.0;
        for (a, b) in fd.slices.iter().zip(&s.slices) {
            for (x, y) in a.iter().zip(b.iter()) {
                if y.abs() > 1e-8 {
                    worst = worst.max((x - y).abs() / y.abs());
                }
            }
        }
        worst
    };
    assert!(max_rel(1e-4) <= 1e-3);
    // O(step^2) truncation: halving the step quarters the discrepancy.
    let (coarse, fine) = (max_rel(0.2), max_rel(0.1));
    assert!((coarse / fine - 4.0).abs() < 0.5, "{coarse} {fine}");
}

#[test]
fn finite_difference_contract() {
    let setup = ProblemSetup::build(&ProblemSpec::reference()).unwrap();
    let model = setup.condensed_forward().unwrap();
    assert!(fd_sensitivity(&model, &[0.50005, 2.0], 1e-4).is_err());
    assert!(fd_sensitivity(&model, &[2.0, 2.0], -1e-4).is_err());
    // Reversing the sign of the step gives the same central quotient.
    let step = 1e-3;
    let a = fd_sensitivity(&model, &[2.0, 2.0], step).unwrap();
    let (plus, minus) = (model.forward_matrix(&[2.0, 2.0 + step]).unwrap().g, model.forward_matrix(&[2.0, 2.0 - step]).unwrap().g);
    let reversed = (minus - plus) / (-2.0 * step);
    assert_eq!(a.slices[1], reversed);
}

#[test]
fn stability_probe_contract() {
    let setup = ProblemSetup::build(&ProblemSpec::reference()).unwrap();
    let model = setup.condensed_forward().unwrap();
    assert!(probe_pair(&model, &[2.0, 1.5], &[2.0, 1.5]).unwrap().is_none());
    let report = stability_probe(&model, 30, 5).unwrap();
    assert_eq!(report.pairs.len(), 30);
    assert!(report.flags.is_empty());
    assert!(report.min_g_gap > INJECTIVITY_G_FLOOR);
    assert_eq!(report, stability_probe(&model, 30, 5).unwrap());
    let prefix = stability_probe(&model, 10, 5).unwrap();
    assert_eq!(prefix.pairs[..], report.pairs[..10]);
}

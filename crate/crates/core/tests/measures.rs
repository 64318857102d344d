use std::f64::consts::PI;

use num_complex::Complex64;
use qdkit::classify::{component_mass, gradient_orientations_tol, Orientation};
use qdkit::measures::*;
use qdkit::topology::{build_critical_graph, build_reeb, fat_graphs, CriticalGraph, FatGraph};
use qdkit::tracer::{TraceBudget, Tracer};
use qdkit::topology::ReebGraph;
use qdkit::RationalQD;

fn graphs(tr: &Tracer<'_>) -> (CriticalGraph, Vec<FatGraph>, ReebGraph) {
    let cg = build_critical_graph(tr, tr.launch_all().unwrap()).unwrap();
    let fats = fat_graphs(&cg);
    let reeb = build_reeb(tr, &cg, &fats).unwrap();
    (cg, fats, reeb)
}

#[test]
fn loop_instance_has_two_real_measures() {
    let qd = RationalQD::from_exprs("z - 0.5", "z^2 (z - 1)", -1.0).unwrap();
    let tr = Tracer::new(&qd, TraceBudget::default()).unwrap();
    let (cg, fats, reeb) = graphs(&tr);
    assert_eq!(reeb.edges.len(), 2, "{:#?}", reeb.edges);
    let all = enumerate_real_measures(&tr, &cg, &reeb, &fats, DEFAULT_ATOMS, BRANCH_TOL).unwrap();
    assert_eq!(all.len(), 2);
    assert_eq!(all.iter().filter(|m| m.positive).count(), 1);
    for m in &all {
        assert!(m.branch.pass, "{:?}", m.branch);
        assert!(m.measure.is_exact(MASS_TOL));
    }
}

#[test]
fn green_mass_matches_widths() {
    let cases = [("z - 0.5", "z^2 (z - 1)"), ("z^2 - 0.25", "(z^2 - 1)(z^2 - 4)"), ("1", "z^2 - 1")];
    for (num, den) in cases {
        let qd = RationalQD::from_exprs(num, den, -1.0).unwrap();
        let tr = Tracer::new(&qd, TraceBudget::default()).unwrap();
        let (cg, fats, reeb) = graphs(&tr);
        let orientations: Vec<Orientation> = gradient_orientations_tol(&reeb, 1e-6).unwrap();
        for o in orientations.iter().take(4) {
            let m = build_levy_measure_tol(&tr, &cg, &reeb, &fats, o, 4000, 1e-6).unwrap();
            assert!(m.is_exact(MASS_TOL));
            for alpha in 0..fats.len() {
                let expected = component_mass(&reeb, o, alpha).unwrap().finite().unwrap();
                let green = component_green_mass(&tr, &cg, &reeb, &fats, &m, alpha, 0.3).unwrap();
                assert!(
                    (green - expected).abs() <= 1e-3 * expected.abs().max(2.0 * PI),
                    "{num}/{den} alpha {alpha}: {green} vs {expected}"
                );
            }
        }
    }
}

#[test]
fn transforms_satisfy_derivative_identity() {
    let qd = RationalQD::from_exprs("1", "z^2 - 1", -1.0).unwrap();
    let tr = Tracer::new(&qd, TraceBudget::default()).unwrap();
    let (cg, fats, reeb) = graphs(&tr);
    let o = Orientation { forward: vec![false] };
    let m = build_levy_measure(&tr, &cg, &reeb, &fats, &o, DEFAULT_ATOMS).unwrap();
    let pts: Vec<Complex64> = (0..12).map(|k| Complex64::from_polar(1.5 + 0.1 * k as f64, k as f64)).collect();
    for s in evaluate_transforms(&m, &pts).unwrap() {
        assert!(s.identity_residual < IDENTITY_TOL, "{s:?}");
        let exact = 2.0 * PI / (s.point * s.point - 1.0).sqrt();
        let exact = if (exact * s.point).re > 0.0 { exact } else { -exact };
        assert!((s.cauchy - exact).norm() < 1e-5, "{s:?} vs {exact}");
    }
    assert!(evaluate_transforms(&m, &[Complex64::new(0.0, 1e-5)]).is_err());
}

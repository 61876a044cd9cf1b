use polyak_lab::certify::{certify, complexity_gauge, global_curvature, grad_sup, CertificateKind, Region};
use polyak_lab::linalg::Matrix;
use polyak_lab::objective::Objective;
use polyak_lab::optimizer::{run, RunConfig};
use polyak_lab::testbed::{make_objective, ObjectiveSpec, TestObjective};

fn smooth_builtins() -> Vec<TestObjective> {
    let a = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
    [
        ObjectiveSpec::QuadQ { kappa: 5.0 },
        ObjectiveSpec::ScaledQ { kappa: 9.0, l: 2.0 },
        ObjectiveSpec::HolderPowerQ { kappa: 5.0, l: 1.0, nu: 0.5 },
        ObjectiveSpec::HolderPowerQ { kappa: 30.0, l: 4.0, nu: 0.2 },
        ObjectiveSpec::Huber { horizon: 2 },
        ObjectiveSpec::MatrixPower { a, nu: 0.6 },
        ObjectiveSpec::InterpLsq { m: 20, n: 5, seed: 0 },
    ]
    .iter()
    .map(|s| make_objective(s).unwrap())
    .collect()
}

fn region_for(obj: &TestObjective) -> Region {
    Region::new(obj.minimizer().unwrap(), 2.0).unwrap()
}

fn margin(kind: CertificateKind, obj: &TestObjective) -> f64 {
    let nu = obj.smoothness().unwrap().nu;
    certify(kind, obj, &region_for(obj), nu, None, 10_000, 5).unwrap().margin
}

#[test]
fn metadata_constants_pass_smoothness_certificate() {
    for obj in smooth_builtins() {
        let m = margin(CertificateKind::HolderSmooth, &obj);
        assert!(m <= 1e-9, "{}: {m}", obj.name());
    }
}

#[test]
fn smoothness_implies_both_sampled_inequalities() {
    for obj in smooth_builtins() {
        let m = margin(CertificateKind::SmoothIneq, &obj);
        assert!(m <= 1e-9, "{}: {m}", obj.name());
    }
}

#[test]
fn cocoercivity_dominates_first_order_gap() {
    for obj in smooth_builtins() {
        let m = margin(CertificateKind::Cocoercive, &obj);
        assert!(m <= 1e-9, "{}: {m}", obj.name());
    }
}

#[test]
fn understated_constant_is_caught() {
    for obj in smooth_builtins() {
        let s = obj.smoothness().unwrap();
        let region = region_for(&obj);
        let rep = certify(CertificateKind::HolderSmooth, &obj, &region, s.nu, Some(0.5 * s.l_nu), 10_000, 5).unwrap();
        assert!(rep.margin > 0.0, "{}", obj.name());
    }
}

#[test]
fn sampled_gradient_bound_never_exceeds_closed_form() {
    for obj in smooth_builtins() {
        let region = region_for(&obj);
        let closed = obj.grad_sup_on_region(2.0).unwrap();
        let sampled = grad_sup(&obj, &region, 4000, 1);
        assert!(sampled.value <= closed * (1.0 + 1e-9) + 1e-300, "{}", obj.name());
    }
}

#[test]
fn gauge_estimate_bounds_iterations_to_final_gap() {
    let obj = make_objective(&ObjectiveSpec::ScaledQ { kappa: 4.0, l: 2.0 }).unwrap();
    for gamma in [0.5, 1.0, 1.5] {
        let x0 = [0.6, 0.8];
        let d0 = obj.dist_to_solution(&x0).unwrap();
        let trace = run(&obj, &x0, &RunConfig::new(gamma, 300).with_tolerances(0.0, 0.0)).unwrap();
        let recs = trace.records();
        // Running best gap and the first index reaching it.
        let mut best = f64::INFINITY;
        for r in &recs[1..] {
            if r.gap < best && r.gap > 0.0 {
                best = r.gap;
                let s = complexity_gauge(|t| global_curvature(&obj, t, 0, 0), best).unwrap();
                let predicted = 9.0 * d0 * d0 / (s * s);
                assert!(r.k as f64 <= predicted, "gamma={gamma} k={} > {predicted}", r.k);
            }
        }
    }
}

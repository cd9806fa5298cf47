use magnmpc_core::actuation::average_psi3;
use magnmpc_core::field::{DipoleFieldModel, FieldModel};
use magnmpc_core::orbit::KeplerianElements;
use nalgebra::{Matrix3, SymmetricEigen};

fn samples(model: &DipoleFieldModel, period: f64) -> Vec<magnmpc_core::field::MagneticFieldSample> {
    let count = (period / 10.0).floor() as usize;
    let mut out: Vec<_> = (0..=count).map(|k| model.field(k as f64 * 10.0).unwrap()).collect();
    if out.last().unwrap().t < period {
        out.push(model.field(period).unwrap());
    }
    out
}

#[test]
fn orbit_average_is_positive_definite() {
    let el = KeplerianElements::sun_synchronous();
    let model = DipoleFieldModel::new(el);
    let period = el.period();
    let s = samples(&model, period);
    let avg = average_psi3(&s, period).unwrap();
    assert!(avg.min_eigenvalue > 0.05, "{}", avg.min_eigenvalue);

    // Plain mean of I - b bᵀ over the interior samples as a cross-check.
    let mut brute = Matrix3::zeros();
    let interior = &s[..s.len() - 1];
    for smp in interior {
        let b = smp.b.normalize();
        brute += Matrix3::identity() - b * b.transpose();
    }
    brute /= interior.len() as f64;
    let min = SymmetricEigen::new(brute).eigenvalues.min();
    assert!((min - avg.min_eigenvalue).abs() < 5e-3, "{min} vs {}", avg.min_eigenvalue);
    assert!((avg.matrix.trace() - 2.0).abs() < 1e-12);
}

#[test]
fn equatorial_orbit_average_is_singular() {
    // The field stays along the orbit normal, so that axis is never actuated.
    let el = KeplerianElements::new(6691.6, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
    let model = DipoleFieldModel::new(el);
    let avg = average_psi3(&samples(&model, el.period()), el.period()).unwrap();
    assert!(avg.min_eigenvalue.abs() < 1e-12, "{}", avg.min_eigenvalue);
}

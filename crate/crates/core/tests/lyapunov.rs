use lyapforge::field::ScalarField;
use lyapforge::lyapunov::*;
use lyapforge::network::{validate_network, FluidNetworkSpec};
use lyapforge::stability::{estimate_tau, verify_epsilon_delta};
use lyapforge::trajectory::{scale, simulate, SelectionRule, Trajectory};

fn reference() -> (lyapforge::network::FluidNetwork, lyapforge::stability::StabilityCertificate) {
    let net = validate_network(&FluidNetworkSpec::single_station(1.0, 2.0)).unwrap();
    let rules = SelectionRule::default_set(net.max_vertex_count());
    let est = estimate_tau(&net, &[vec![1.0]], &rules, 1e-3, 3.0).unwrap();
    let cert = est.verdict.certificate().unwrap().clone();
    (net, cert)
}

#[test]
fn tau_of_the_reference_network() {
    let (_, cert) = reference();
    assert!((cert.tau - 1.0).abs() <= 1e-3 + 1e-12);
    assert_eq!(cert.gain(), 3.0);
    assert!(cert.max_residual <= cert.tolerance);
}

#[test]
fn value_function_closed_form_and_scaling() {
    let (net, cert) = reference();
    let rules = SelectionRule::default_set(net.max_vertex_count());
    let v2 = value_function(&net, &cert, &[2.0], &rules, 1e-3).unwrap();
    assert!((v2 - 2.0).abs() < 1e-3 * 2.0);
    assert_eq!(value_function(&net, &cert, &[0.0], &rules, 1e-3).unwrap(), 0.0);
    for (x, r) in [(0.5, 3.0), (1.0, 0.5)] {
        let a = value_function(&net, &cert, &[r * x], &rules, 1e-3).unwrap();
        let b = value_function(&net, &cert, &[x], &rules, 1e-3).unwrap();
        assert!((a - r * r * b).abs() < 2e-3 * a.max(1e-3), "x={x} r={r}");
    }
}

#[test]
fn integral_decrease_is_tight_on_the_oracle() {
    let v = ScalarField::from_fn(&[0.0], &[4.0], 1e-3, "V", |x| 0.5 * x[0] * x[0]).unwrap();
    let w = ScalarField::from_fn(&[0.0], &[4.0], 1e-3, "W", |x| x[0]).unwrap();
    let tr = Trajectory::from_fn(1e-3, 5.0, 1.0, |t| vec![(3.0 - t).max(0.0)]);
    let rep = verify_integral_decrease(&v, &w, &tr, 1e-6).unwrap();
    assert!(rep.passed);
    assert!(rep.worst_margin.abs() < 1e-6);
    let d = verify_differential_decrease(&v.clone().with_gradients(), &w, &tr, 1e-2).unwrap();
    assert!(d.passed);
}

#[test]
fn even_extension_of_the_sampled_value_function() {
    let (net, cert) = reference();
    let rules = SelectionRule::default_set(net.max_vertex_count());
    let v = value_field(&net, &cert, &rules, 1e-3, 2.0, 0.05).unwrap();
    let ve = extend_even(&v).unwrap();
    for x in [0.3, 1.0, 1.95] {
        let a = ve.eval(&[x]).unwrap();
        assert!((a - ve.eval(&[-x]).unwrap()).abs() < 1e-12);
        assert!((a - 0.5 * x * x).abs() < 2e-3, "x={x}");
    }
}

#[test]
fn epsilon_delta_on_a_scaled_family() {
    let (net, cert) = reference();
    let base = simulate(&net, &[1.0], &SelectionRule::MinNorm, 1e-2, 120.0).unwrap();
    for r in [0.1, 1.0, 10.0] {
        let tr = scale(&base, 1.0 / r).unwrap();
        let rep = verify_epsilon_delta(&tr, &cert, 10, 1e-6).unwrap();
        assert!(rep.passed, "r={r}: {rep:?}");
    }
}

#[test]
fn lipschitz_estimate_of_a_cone() {
    let f = ScalarField::from_fn(&[-1.0, -1.0], &[1.0, 1.0], 0.05, "n", |x| (x[0] * x[0] + x[1] * x[1]).sqrt())
        .unwrap();
    let pairs = vec![
        (vec![0.0, 0.0], vec![0.5, 0.0]),
        (vec![0.2, 0.2], vec![0.6, 0.5]),
        (vec![-0.9, 0.1], vec![0.9, -0.1]),
    ];
    let l = lipschitz_estimate(&f, &pairs).unwrap();
    assert!(l <= 1.0 + 1e-9 && l > 0.9);
}

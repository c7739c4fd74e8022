use lyapforge::field::ScalarField;
use lyapforge::smoothing::*;

// Reference integrals of exp(-1/(1-|x|^2)) over the unit ball, computed
// independently with adaptive quadrature.
const MASS_1D: f64 = 0.4439938161680793;
const M1_1D: f64 = 0.33445399770997364;
const M2_1D: f64 = 0.1581136362637964;
const MASS_2D: f64 = 0.4665123931783276;
const M2_2D: f64 = 0.2613112034205541;

#[test]
fn normalization_constant_matches_reference() {
    let m = make_mollifier(1, 1.0).unwrap();
    assert!((m.norm_const() - 1.0 / MASS_1D).abs() < 1e-9);
    let m = make_mollifier(2, 1.0).unwrap();
    assert!((m.norm_const() - 1.0 / MASS_2D).abs() < 1e-7);
}

#[test]
fn unit_mass_at_several_radii() {
    for n in [1, 2] {
        for r in [0.1, 0.5, 1.0] {
            let m = make_mollifier(n, r).unwrap();
            assert!((m.integral(200) - 1.0).abs() < 1e-6, "n={n} r={r}");
        }
    }
}

#[test]
fn moments_scale_with_radius() {
    for r in [0.05, 0.3, 2.0] {
        let m = make_mollifier(1, r).unwrap();
        assert!((m.moment(2, 400) - r * r * M2_1D).abs() < 1e-8 * (1.0 + r * r));
        let e1 = (m.moment(1, 400) - r * M1_1D).abs();
        // |y| is not smooth at 0, so midpoint error is O(h^2) there.
        assert!(e1 < 1e-5 * r);
        let m = make_mollifier(2, r).unwrap();
        assert!((m.moment(2, 200) - r * r * M2_2D).abs() < 1e-6 * r * r);
    }
}

#[test]
fn quadratic_shifts_by_half_second_moment() {
    let f = ScalarField::from_fn(&[-2.0], &[2.0], 1e-3, "q", |x| 0.5 * x[0] * x[0]).unwrap();
    let r = 0.2;
    let fr = convolve(&f, &make_mollifier(1, r).unwrap()).unwrap();
    for (x, v) in fr.nodes().zip(fr.values()).step_by(97) {
        let want = 0.5 * x[0] * x[0] + 0.5 * r * r * M2_1D;
        assert!((v - want).abs() < 1e-6, "x={x:?}");
    }
}

#[test]
fn abs_at_kink_is_first_moment() {
    let f = ScalarField::from_fn(&[-1.0], &[1.0], 1e-3, "a", |x| x[0].abs()).unwrap();
    for r in [0.4, 0.1] {
        let fr = convolve(&f, &make_mollifier(1, r).unwrap()).unwrap();
        assert!((fr.eval(&[0.0]).unwrap() - r * M1_1D).abs() < 1e-5);
        let rep = uoc_check(&f, &[r], &[-0.5], &[0.5], 1.0, 0.0).unwrap();
        assert!((rep.distances[0] - r * M1_1D).abs() < 1e-5);
    }
}

#[test]
fn quadratic_uoc_quarters() {
    let f = ScalarField::from_fn(&[-2.5], &[2.5], 1e-3, "q", |x| 0.5 * x[0] * x[0]).unwrap();
    let ladder = halving_ladder(0.4, 4);
    let rep = uoc_check(&f, &ladder, &[-2.0], &[2.0], 1e-3, 1e-9).unwrap();
    for (r, d) in ladder.iter().zip(&rep.distances) {
        assert!((d / (0.5 * r * r * M2_1D) - 1.0).abs() < 0.05);
    }
    assert!(rep.passed);
}

#[test]
fn glued_pair_on_three_pieces() {
    let ve = ScalarField::from_fn(&[-3.6], &[3.6], 1e-2, "Ve", |x| 0.5 * x[0] * x[0]).unwrap();
    let we = ScalarField::from_fn(&[-3.6], &[3.6], 1e-2, "We", |x| x[0].abs()).unwrap();
    let pou = build_partition(&[-3.0], &[3.0], 3, 0.25)
        .unwrap()
        .with_epsilons(&ve, &we, 1e-6)
        .unwrap();
    let pieces = smooth_pieces(&ve, &we, &pou).unwrap();
    let g = glue(&ve, &we, &pieces, &pou, 1e-6).unwrap();
    eprintln!("{}", g.report.to_text());
    assert!(g.report.passed);
}

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::time::Instant;

use lyapforge::field::ScalarField;
use lyapforge::lyapunov::{self, verify_differential_decrease, MarginReport};
use lyapforge::neighbor::{verify_assumption_a, BoundFn};
use lyapforge::network::{usc_probe, validate_network, FluidNetwork, FluidNetworkSpec, UscOutcome, VertexMap};
use lyapforge::smoothing::{self, build_partition, glue, make_mollifier, smooth_pieces};
use lyapforge::stability::{drain_envelope_margin, estimate_tau, verify_epsilon_delta, StabilityCertificate};
use lyapforge::trajectory::{metric_d, simulate, SelectionRule, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `int y^2 k(y) dy` for the normalized 1-D bump, from adaptive quadrature.
const M2_1D: f64 = 0.1581136362637964;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn reference() -> FluidNetwork {
    validate_network(&FluidNetworkSpec::single_station(1.0, 2.0)).unwrap()
}

fn rules(net: &FluidNetwork) -> Vec<SelectionRule> {
    SelectionRule::default_set(net.max_vertex_count())
}

fn certificate(net: &FluidNetwork) -> StabilityCertificate {
    let est = estimate_tau(net, &vec![vec![1.0]; 8], &rules(net), 1e-3, 3.0).unwrap();
    est.verdict.certificate().expect("reference network is stable").clone()
}

/// Trajectories of the reference network from random starts in `(0, reach]`,
/// cycling through the selection rules.
fn sampled(net: &FluidNetwork, count: usize, reach: f64, horizon: f64, seed: u64) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rules = rules(net);
    (0..count)
        .map(|k| {
            let x0 = reach * rng.gen_range(0.05..=1.0);
            simulate(net, &[x0], &rules[k % rules.len()], 1e-3, horizon).unwrap()
        })
        .collect()
}

fn closed_form_trajectory() -> Outcome {
    let net = reference();
    let (h, l) = (1e-3, net.lipschitz);
    let start = Instant::now();
    let tr = simulate(&net, &[3.0], &SelectionRule::MinNorm, h, 5.0).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let err = tr
        .samples()
        .iter()
        .enumerate()
        .map(|(k, x)| (x[0] - (3.0 - tr.time(k)).max(0.0)).abs())
        .fold(0.0, f64::max);
    outcome(
        err <= 2.0 * l * h && secs < 1.0,
        format!("sup error {err:.2e} <= {:.1e}, {secs:.3} s < 1 s", 2.0 * l * h),
    )
}

fn drain_time_tau() -> Outcome {
    let net = reference();
    let rules = rules(&net);
    let est = estimate_tau(&net, &vec![vec![1.0]; 8], &rules, 1e-3, 3.0).unwrap();
    let Some(cert) = est.verdict.certificate() else {
        return outcome(false, "no certificate".into());
    };
    let worst = est
        .paths
        .iter()
        .map(|tr| drain_envelope_margin(tr, cert.lipschitz, cert.tau))
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        (cert.tau - 1.0).abs() <= 1e-2 && worst <= 1e-6,
        format!(
            "tau {} over {} paths ({} rules), worst |phi(s+t)| - L tau |phi(s)| = {worst:.2e}",
            cert.tau,
            est.paths.len(),
            rules.len()
        ),
    )
}

fn value_function_closed_form() -> Outcome {
    let net = reference();
    let cert = certificate(&net);
    let rules = rules(&net);
    let mut worst = 0.0_f64;
    for x in [0.1, 0.5, 1.0, 2.0, 4.0] {
        let v = lyapunov::value_function(&net, &cert, &[x], &rules, 1e-3).unwrap();
        worst = worst.max((v - 0.5 * x * x).abs() / (0.5 * x * x));
    }
    let v0 = lyapunov::value_function(&net, &cert, &[0.0], &rules, 1e-3).unwrap();
    outcome(
        worst <= 1e-3 && v0 == 0.0,
        format!("max relative error {worst:.2e} <= 1e-3, V(0) = {v0}"),
    )
}

fn mollifier_normalization() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for n in [1, 2] {
        for r in [0.05, 0.1, 0.5] {
            let m = make_mollifier(n, r).unwrap();
            worst = worst.max((m.integral(200) - 1.0).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && secs < 5.0,
        format!("max |int k_r - 1| = {worst:.2e} <= 1e-6, {secs:.3} s < 5 s"),
    )
}

fn uoc_convergence() -> Outcome {
    let f = ScalarField::from_fn(&[-2.5], &[2.5], 1e-3, "q", |x| 0.5 * x[0] * x[0]).unwrap();
    let ladder = [0.4, 0.2, 0.1, 0.05];
    let rep = smoothing::uoc_check(&f, &ladder, &[-2.0], &[2.0], 1e-3, 1e-12).unwrap();
    let rel: Vec<f64> = ladder
        .iter()
        .zip(&rep.distances)
        .map(|(r, d)| d / (0.5 * r * r * M2_1D) - 1.0)
        .collect();
    let ratios: Vec<f64> = rep.distances.windows(2).map(|w| w[0] / w[1]).collect();
    let worst_rel = rel.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let worst_ratio = ratios.iter().map(|q| (q / 4.0 - 1.0).abs()).fold(0.0, f64::max);
    outcome(
        worst_rel <= 0.05 && worst_ratio <= 0.10,
        format!(
            "distance vs r^2 m2/2 within {:.2}%, halving ratios {:?}",
            100.0 * worst_rel,
            ratios.iter().map(|q| (q * 1e3).round() / 1e3).collect::<Vec<_>>()
        ),
    )
}

fn oracle_paths() -> Vec<Trajectory> {
    [0.0, 0.5, 1.0, 2.0, 3.0]
        .iter()
        .map(|&x0| Trajectory::from_fn(1e-3, 4.0, 1.0, move |t| vec![(x0 - t).max(0.0)]))
        .collect()
}

fn mollified_decrease() -> Outcome {
    let ve = ScalarField::from_fn(&[-4.0], &[4.0], 1e-3, "Ve", |x| 0.5 * x[0] * x[0]).unwrap();
    let we = ScalarField::from_fn(&[-4.0], &[4.0], 1e-3, "We", |x| x[0].abs()).unwrap();
    let ladder = [0.4, 0.2, 0.1, 0.05];
    let dec = smoothing::decrease_on_ladder(&ve, &we, &oracle_paths(), 1e-2, &ladder).unwrap();
    let first = &dec.rungs[0];
    outcome(
        first.report.passed,
        format!(
            "r = {}: worst margin {:.2e} <= eps 1e-2 on {} oracle paths",
            first.radius,
            first.report.worst_margin,
            oracle_paths().len()
        ),
    )
}

fn gluing_bounds() -> Outcome {
    let net = reference();
    let cert = certificate(&net);
    let v = lyapunov::value_field(&net, &cert, &rules(&net), 1e-3, 3.52, 1e-2).unwrap();
    let ve = lyapunov::extend_even(&v).unwrap();
    let we = lyapunov::choose_w(&net).field(&[-3.52], &[3.52], 1e-2, "We").unwrap();
    let pou = build_partition(&[-3.0], &[3.0], 3, 0.25)
        .unwrap()
        .with_epsilons(&ve, &we, 1e-6)
        .unwrap();
    let pieces = match smooth_pieces(&ve, &we, &pou) {
        Ok(p) => p,
        Err(e) => return outcome(false, e.to_string()),
    };
    let g = glue(&ve, &we, &pieces, &pou, 1e-6).unwrap();
    let trs = sampled(&net, 16, 3.0 / cert.gain(), 4.0, 7);
    let reports: Vec<MarginReport> = trs
        .iter()
        .map(|tr| verify_differential_decrease(&g.v, &g.w, tr, 1e-2).unwrap())
        .collect();
    let dec = MarginReport::merge(&reports).unwrap();
    outcome(
        g.report.passed && dec.passed,
        format!(
            "max |Vs - Ve| - Ve/8 = {:.2e} <= 1e-6, decrease margin {:.2e} <= 1e-2 on {} paths",
            g.report.worst_excess,
            dec.worst_margin,
            trs.len()
        ),
    )
}

fn assumption_a_example() -> Outcome {
    let net = reference();
    let above = simulate(&net, &[2.0], &SelectionRule::MinNorm, 1e-3, 3.0).unwrap();
    let ys: Vec<Vec<f64>> = [0.5, -0.5, 0.25, -0.25, 1.0].iter().map(|y| vec![*y]).collect();
    let lin = verify_assumption_a(&net, &above, &ys, 3.0, BoundFn::Linear { slope: 0.5 }, 1e-3).unwrap();
    let empty = simulate(&net, &[0.0], &SelectionRule::MinNorm, 1e-3, 3.0).unwrap();
    // Deviation tolerance 1e-3 expressed per unit |y|.
    let log = verify_assumption_a(&net, &empty, &[vec![-0.5]], 3.0, BoundFn::LogShift, 1e-3 / 0.5).unwrap();
    outcome(
        lin.pass && log.pass,
        format!(
            "phi(0)=2: worst ratio - t/2 = {:.2e}; phi(0)=0: worst ratio - log(t+e) = {:.2e}",
            lin.worst_margin, log.worst_margin
        ),
    )
}

fn filippov_bound() -> Outcome {
    let f = VertexMap::new(1, 1.0, |x: &[f64]| {
        let m = x[0].min(1.0);
        vec![vec![-m], vec![-0.5 * m]]
    });
    let ys: Vec<Vec<f64>> = (1..=10).map(|k| vec![-0.55 + 0.1 * k as f64]).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut passed = true;
    for rule in [SelectionRule::Vertex(0), SelectionRule::Vertex(1), SelectionRule::MinNorm] {
        let tr = simulate(&f, &[1.5], &rule, 1e-3, 2.0).unwrap();
        let rep = verify_assumption_a(&f, &tr, &ys, 2.0, BoundFn::Filippov { lipschitz: 1.0 }, 1e-2).unwrap();
        worst = worst.max(rep.worst_margin);
        passed &= rep.pass;
    }
    outcome(
        passed,
        format!("worst ratio - (e^t - 1) = {worst:.2e} <= 1e-2, 10 perturbations x 3 references"),
    )
}

fn usc_witness() -> Outcome {
    let net = reference();
    let seq: Vec<Vec<f64>> = (1..=64).map(|k| vec![1.0 / k as f64]).collect();
    let witness = usc_probe(&net, &[0.0], &seq, 1e-3).unwrap();
    let constant = usc_probe(&VertexMap::constant(vec![-1.0]), &[0.0], &seq, 1e-3).unwrap();
    let found = matches!(&witness, UscOutcome::Witness { state, velocity, .. }
        if state == &vec![0.0] && (velocity[0] + 1.0).abs() < 1e-9);
    outcome(
        found && constant == UscOutcome::Pass,
        format!("reference: {witness:?}; constant map: {constant:?}"),
    )
}

fn epsilon_delta_chain() -> Outcome {
    let net = reference();
    let cert = certificate(&net);
    let trs = sampled(&net, 16, 3.0, 20.0, 11);
    let mut worst = f64::NEG_INFINITY;
    let mut passed = true;
    let mut checked = 0;
    for tr in &trs {
        let rep = verify_epsilon_delta(tr, &cert, 10, 1e-6).unwrap();
        worst = worst.max(rep.worst_margin);
        passed &= rep.passed;
        checked += rep.checked_times;
    }
    outcome(
        passed,
        format!("gain {}, worst margin {worst:.2e} over {checked} shifts", cert.gain()),
    )
}

fn random_path(rng: &mut ChaCha8Rng) -> Trajectory {
    let (a, w, c) = (rng.gen_range(0.0..2.0), rng.gen_range(0.1..3.0), rng.gen_range(0.0..2.0));
    Trajectory::from_fn(0.01, 10.0, a * w + 1.0, move |t| {
        vec![c + a * (1.0 + (w * t).sin()), (c - 0.3 * t).max(0.0)]
    })
}

fn metric_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let (a, b, c) = (random_path(&mut rng), random_path(&mut rng), random_path(&mut rng));
        let d = |x: &Trajectory, y: &Trajectory| metric_d(x, y, 10).unwrap();
        worst = worst.max((d(&a, &b) - d(&b, &a)).abs());
        worst = worst.max(d(&a, &a));
        worst = worst.max(d(&a, &c) - d(&a, &b) - d(&b, &c));
        let differs = a.samples().iter().zip(b.samples()).any(|(x, y)| x != y);
        if differs && d(&a, &b) <= 0.0 {
            worst = f64::INFINITY;
        }
    }
    outcome(worst <= 1e-12, format!("worst violation {worst:.2e} over 100 triples"))
}

fn pipeline(config: Option<&str>) -> (i32, f64, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["lyapforge".to_string(), "pipeline".into(), "--out".into()];
    args.push(dir.path().display().to_string());
    if let Some(c) = config {
        args.push("--config".into());
        args.push(lyapforge::cli::bundled_data_dir().join(c).display().to_string());
    }
    let start = Instant::now();
    let code = lyapforge::cli::run(args);
    (code, start.elapsed().as_secs_f64(), dir)
}

fn instability() -> Outcome {
    let (code, secs, dir) = pipeline(Some("single_station_reversed.json"));
    let cert = std::fs::read_to_string(dir.path().join("certificate.json")).unwrap_or_default();
    outcome(
        code == 1 && cert.contains("\"verdict\": \"unstable\"") && secs < 10.0,
        format!("exit {code}, unstable verdict, {secs:.2} s < 10 s"),
    )
}

fn full_pipeline() -> Outcome {
    let (code, secs, _dir) = pipeline(None);
    outcome(code == 0 && secs < 60.0, format!("exit {code}, {secs:.2} s < 60 s"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("1 closed-form trajectory", closed_form_trajectory),
        ("2 drain time tau", drain_time_tau),
        ("3 value function", value_function_closed_form),
        ("4 mollifier normalization", mollifier_normalization),
        ("5 u.o.c. convergence", uoc_convergence),
        ("6 mollified decrease", mollified_decrease),
        ("7 gluing bounds", gluing_bounds),
        ("8 assumption (A) example", assumption_a_example),
        ("9 Filippov bound", filippov_bound),
        ("10 USC probe", usc_witness),
        ("11 epsilon-delta chain", epsilon_delta_chain),
        ("12 metric properties", metric_properties),
        ("13 instability detection", instability),
        ("pipeline runtime", full_pipeline),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Command-line driver: pipeline stages, artifact files and the run
//! manifest.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::lyapunov::{self, MarginReport};
use crate::network::{usc_probe, validate_network, FluidNetwork, FluidNetworkSpec, UscOutcome};
use crate::neighbor::{verify_assumption_a, BoundFn};
use crate::smoothing::{self, build_partition, glue, halving_ladder, make_mollifier, smooth_pieces};
use crate::stability::{self, StabilityCertificate, StabilityVerdict};
use crate::trajectory::{lipschitz_check, simulate, SelectionRule, Trajectory};
use crate::vecops;

const BUNDLED_SPEC: &str = include_str!("../data/single_station.json");

const DECREASE_TOL: f64 = 1e-2;
const INTEGRAL_TOL: f64 = 1e-3;
const EPS_FLOOR: f64 = 1e-6;
const GLUE_TOL: f64 = 1e-6;
const UOC_BOUND: f64 = 1e-2;
const UOC_TOL: f64 = 1e-9;
const NEIGHBOR_TOL: f64 = 1e-3;
const EPS_DELTA_TOL: f64 = 1e-6;
const USC_TOL: f64 = 1e-3;
const USC_TERMS: usize = 64;
const NEIGHBOR_START_NORM: f64 = 2.0;
const NEIGHBOR_SHIFTS: [f64; 5] = [-0.5, -0.25, 0.25, 0.5, 1.0];

#[derive(Parser, Debug)]
#[command(name = "lyapforge", version, about = "Lyapunov pair construction and checks for fluid networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub knobs: Knobs,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Check the network data.
    Validate,
    /// Simulate sample trajectories.
    Simulate,
    /// Estimate the drain time and emit a stability certificate.
    Stability,
    /// Sample the value function and its even extension.
    Lyapunov,
    /// Mollify the even extension along a radius ladder.
    Smooth,
    /// Build local smoothings and glue them with a partition of unity.
    Glue,
    /// Check the decrease of the glued pair along sample trajectories.
    VerifyDecrease,
    /// Check the neighboring-trajectory deviation bound.
    VerifyAssumptionA,
    /// Probe the graph of the velocity map for closedness at the origin.
    UscProbe,
    /// Run every stage from validate to verify-assumption-a.
    Pipeline,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Simulate => "simulate",
            Command::Stability => "stability",
            Command::Lyapunov => "lyapunov",
            Command::Smooth => "smooth",
            Command::Glue => "glue",
            Command::VerifyDecrease => "verify-decrease",
            Command::VerifyAssumptionA => "verify-assumption-a",
            Command::UscProbe => "usc-probe",
            Command::Pipeline => "pipeline",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// `c(t) = t / |phi(0)|`.
    Linear,
    /// `c(t) = e^{L t} - 1`.
    Filippov,
    /// `c(t) = log(t + e)`.
    Log,
}

#[derive(Args, Debug, Clone)]
pub struct Knobs {
    /// Network JSON; the bundled single-station network when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "lyapforge-out")]
    pub out: PathBuf,
    /// Euler step.
    #[arg(long = "h", global = true, default_value_t = 1e-3)]
    pub h: f64,
    #[arg(long, global = true, default_value_t = 5.0)]
    pub horizon: f64,
    /// Lower corner of the working box, on every axis.
    #[arg(long, global = true, default_value_t = -3.0, allow_negative_numbers = true)]
    pub grid_lo: f64,
    /// Upper corner of the working box, on every axis.
    #[arg(long, global = true, default_value_t = 3.0)]
    pub grid_hi: f64,
    #[arg(long, global = true, default_value_t = 1e-2)]
    pub grid_step: f64,
    /// First radius of the default four-level halving ladder.
    #[arg(long, global = true, default_value_t = 0.4)]
    pub radius: f64,
    /// Explicit comma-separated ladder; overrides `--radius`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub radius_ladder: Option<Vec<f64>>,
    /// Partition pieces per axis.
    #[arg(long, global = true, default_value_t = 3)]
    pub pieces: usize,
    #[arg(long, global = true, default_value_t = 0.25)]
    pub overlap: f64,
    /// Sampled starts per stage.
    #[arg(long, global = true, default_value_t = 8)]
    pub samples: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Deviation bound for verify-assumption-a.
    #[arg(long, global = true, value_enum, default_value_t = BoundKind::Linear)]
    pub bound: BoundKind,
}

impl Knobs {
    fn check(&self) -> Result<()> {
        let positive = [
            ("--h", self.h),
            ("--horizon", self.horizon),
            ("--grid-step", self.grid_step),
            ("--radius", self.radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.grid_lo < 0.0 && self.grid_hi > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "working box [{}, {}] must contain the origin in its interior",
                self.grid_lo, self.grid_hi
            )));
        }
        if self.samples == 0 || self.pieces == 0 {
            return Err(Error::InvalidArgument("--samples and --pieces must be at least 1".into()));
        }
        let ladder = self.ladder();
        if ladder.iter().any(|r| !(*r > 0.0)) || ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument(
                "--radius-ladder must be positive and strictly decreasing".into(),
            ));
        }
        Ok(())
    }

    fn ladder(&self) -> Vec<f64> {
        self.radius_ladder
            .clone()
            .unwrap_or_else(|| halving_ladder(self.radius, 4))
    }
}

/// Unit vectors in the nonnegative orthant, `|g| / |g|_2` for Gaussian `g`.
pub fn unit_starts(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    while out.len() < count {
        let g: Vec<f64> = (0..dim)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v.abs()
            })
            .collect();
        let n = vecops::norm(&g);
        if n > 1e-12 {
            out.push(vecops::scaled(&g, 1.0 / n));
        }
        if dim == 1 {
            break;
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
struct CheckRecord {
    stage: String,
    name: String,
    passed: bool,
    value: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    stage: &'a str,
    artifacts: &'a [String],
    checks: &'a [CheckRecord],
    error: Option<String>,
    passed: bool,
}

/// Outcome of a run before it is turned into an exit status.
enum Halt {
    Config(Error),
    Failed(Error),
    Unstable,
}

impl From<Error> for Halt {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidNetwork(_)
            | Error::InvalidArgument(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Parse(_)
            | Error::DimensionTooLarge(_)
            | Error::DegenerateBox(_)
            | Error::NonpositiveRadius(_) => Halt::Config(e),
            other => Halt::Failed(other),
        }
    }
}

struct Run {
    knobs: Knobs,
    out: PathBuf,
    stage: &'static str,
    artifacts: Vec<String>,
    checks: Vec<CheckRecord>,
    network: Option<FluidNetwork>,
    cert: Option<StabilityCertificate>,
    checked: Option<Vec<Trajectory>>,
    even: Option<(ScalarField, ScalarField)>,
    glued: Option<(ScalarField, ScalarField)>,
}

impl Run {
    fn new(knobs: Knobs) -> Self {
        Self {
            out: knobs.out.clone(),
            knobs,
            stage: "start",
            artifacts: Vec::new(),
            checks: Vec::new(),
            network: None,
            cert: None,
            checked: None,
            even: None,
            glued: None,
        }
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        fs::write(self.out.join(name), body)?;
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }

    fn write_field(&mut self, stem: &str, f: &ScalarField) -> Result<()> {
        self.write(&format!("{stem}.csv"), &f.to_csv())?;
        let meta = f.meta_json()? + "\n";
        self.write(&format!("{stem}.json"), &meta)
    }

    fn check(&mut self, name: &str, passed: bool, value: Option<f64>) {
        println!(
            "{:<20} {:<28} {}{}",
            self.stage,
            name,
            if passed { "PASS" } else { "FAIL" },
            value.map(|v| format!("  {v:e}")).unwrap_or_default()
        );
        self.checks.push(CheckRecord {
            stage: self.stage.to_string(),
            name: name.to_string(),
            passed,
            value,
        });
    }

    fn dim(&self) -> usize {
        self.network.as_ref().map(|n| n.classes()).unwrap_or(1)
    }

    fn rules(&self) -> Vec<SelectionRule> {
        let max = self.network.as_ref().map(|n| n.max_vertex_count()).unwrap_or(1);
        SelectionRule::default_set(max)
    }

    fn validate(&mut self) -> Result<(), Halt> {
        if self.network.is_some() {
            return Ok(());
        }
        self.stage = "validate";
        let spec = match &self.knobs.config {
            Some(p) => FluidNetworkSpec::load(p)?,
            None => FluidNetworkSpec::from_json_str(BUNDLED_SPEC)?,
        };
        #[derive(Serialize)]
        struct Validation {
            valid: bool,
            spectral_radius: Option<f64>,
            lipschitz: Option<f64>,
            violations: Vec<String>,
        }
        match validate_network(&spec) {
            Ok(net) => {
                self.write_json(
                    "validation.json",
                    &Validation {
                        valid: true,
                        spectral_radius: Some(net.spectral_radius),
                        lipschitz: Some(net.lipschitz),
                        violations: Vec::new(),
                    },
                )?;
                self.write("network.json", &(spec.to_json_string()? + "\n"))?;
                self.check("network_valid", true, Some(net.spectral_radius));
                self.network = Some(net);
                Ok(())
            }
            Err(v) => {
                self.write_json(
                    "validation.json",
                    &Validation {
                        valid: false,
                        spectral_radius: None,
                        lipschitz: None,
                        violations: v.iter().map(|e| e.to_string()).collect(),
                    },
                )?;
                self.check("network_valid", false, None);
                Err(Halt::Config(Error::InvalidNetwork(v)))
            }
        }
    }

    fn simulate(&mut self) -> Result<(), Halt> {
        self.validate()?;
        self.stage = "simulate";
        let net = self.network.clone().expect("validated");
        let rules = self.rules();
        let starts = unit_starts(self.dim(), self.knobs.samples, self.knobs.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(self.knobs.seed.wrapping_add(1));
        let scale = Uniform::new_inclusive(0.1, 1.0);
        let mut all_ok = true;
        for (k, u) in starts.iter().enumerate() {
            let x0 = vecops::scaled(u, self.knobs.grid_hi * scale.sample(&mut rng));
            let rule = &rules[k % rules.len()];
            let tr = simulate(&net, &x0, rule, self.knobs.h, self.knobs.horizon)?;
            all_ok &= lipschitz_check(&tr);
            self.write(&format!("trajectory_{k}.csv"), &tr.to_csv())?;
        }
        self.check("lipschitz", all_ok, Some(net.lipschitz));
        Ok(())
    }

    fn stability(&mut self) -> Result<(), Halt> {
        if self.cert.is_some() {
            return Ok(());
        }
        self.validate()?;
        self.stage = "stability";
        let net = self.network.clone().expect("validated");
        let starts = unit_starts(self.dim(), self.knobs.samples, self.knobs.seed);
        let est = stability::estimate_tau(&net, &starts, &self.rules(), self.knobs.h, self.knobs.horizon)?;
        self.write_json("certificate.json", &est.verdict)?;
        let cert = match est.verdict {
            StabilityVerdict::Certified(c) => c,
            StabilityVerdict::Unstable { final_norm, .. } => {
                self.check("stable", false, Some(final_norm));
                return Err(Halt::Unstable);
            }
        };
        self.check("stable", true, Some(cert.tau));
        self.cert = Some(cert.clone());

        let trs = self.check_trajectories()?;
        let n_max = (self.knobs.horizon.floor() as usize).clamp(1, 10);
        let mut reports = Vec::with_capacity(trs.len());
        let mut envelope = f64::NEG_INFINITY;
        for tr in &trs {
            reports.push(stability::verify_epsilon_delta(tr, &cert, n_max, EPS_DELTA_TOL)?);
            envelope = envelope.max(stability::drain_envelope_margin(tr, cert.lipschitz, cert.tau));
        }
        self.write_json("eps_delta.json", &reports)?;
        let worst = reports.iter().map(|r| r.worst_margin).fold(f64::NEG_INFINITY, f64::max);
        self.check("eps_delta", reports.iter().all(|r| r.passed), Some(worst));
        self.check("drain_envelope", envelope <= EPS_DELTA_TOL, Some(envelope));
        Ok(())
    }

    /// Sample trajectories whose sup norm provably stays in the working box.
    fn check_trajectories(&mut self) -> Result<Vec<Trajectory>, Halt> {
        if let Some(t) = &self.checked {
            return Ok(t.clone());
        }
        let net = self.network.clone().expect("validated");
        let cert = self.cert.clone().expect("certified");
        let rules = self.rules();
        let reach = self.knobs.grid_hi / cert.gain().max(1.0);
        let starts = unit_starts(self.dim(), self.knobs.samples, self.knobs.seed.wrapping_add(2));
        let mut rng = ChaCha8Rng::seed_from_u64(self.knobs.seed.wrapping_add(3));
        let scale = Uniform::new_inclusive(0.2, 1.0);
        let mut out = Vec::with_capacity(self.knobs.samples);
        for k in 0..self.knobs.samples {
            let u = &starts[k % starts.len()];
            let x0 = vecops::scaled(u, reach * scale.sample(&mut rng));
            out.push(simulate(&net, &x0, &rules[k % rules.len()], self.knobs.h, self.knobs.horizon)?);
        }
        self.checked = Some(out.clone());
        Ok(out)
    }

    /// Half-width of the value-function box: the working box plus room for
    /// the largest mollification radius.
    fn outer_half_width(&self) -> f64 {
        let cell = (self.knobs.grid_hi - self.knobs.grid_lo) / self.knobs.pieces as f64;
        let room = (cell / 4.0).max(self.knobs.ladder()[0]);
        self.knobs.grid_lo.abs().max(self.knobs.grid_hi) + room + 2.0 * self.knobs.grid_step
    }

    fn lyapunov(&mut self) -> Result<(), Halt> {
        if self.even.is_some() {
            return Ok(());
        }
        self.stability()?;
        self.stage = "lyapunov";
        let net = self.network.clone().expect("validated");
        let cert = self.cert.clone().expect("certified");
        let b = self.outer_half_width();
        let v = lyapunov::value_field(&net, &cert, &self.rules(), self.knobs.h, b, self.knobs.grid_step)?;
        let ve = lyapunov::extend_even(&v)?;
        let n = self.dim();
        let we = lyapunov::choose_w(&net).field(&vec![-b; n], &vec![b; n], self.knobs.grid_step, "We")?;
        self.write_field("V", &v)?;
        self.write_field("Ve", &ve)?;
        self.write_field("We", &we)?;
        let trs = self.check_trajectories()?;
        let reports = trs
            .iter()
            .map(|tr| lyapunov::verify_integral_decrease(&ve, &we, tr, INTEGRAL_TOL))
            .collect::<Result<Vec<_>>>()?;
        let merged = MarginReport::merge(&reports).expect("nonempty sample set");
        self.write_json("lyapunov_report.json", &merged)?;
        self.check("integral_decrease", merged.passed, Some(merged.worst_margin));
        self.even = Some((ve, we));
        Ok(())
    }

    fn smooth(&mut self) -> Result<(), Halt> {
        self.lyapunov()?;
        self.stage = "smooth";
        let (ve, we) = self.even.clone().expect("value field");
        let ladder = self.knobs.ladder();
        let n = self.dim();
        let uoc = smoothing::uoc_check(
            &ve,
            &ladder,
            &vec![self.knobs.grid_lo; n],
            &vec![self.knobs.grid_hi; n],
            UOC_BOUND,
            UOC_TOL,
        )?;
        let trs = self.check_trajectories()?;
        let dec = smoothing::decrease_on_ladder(&ve, &we, &trs, DECREASE_TOL, &ladder)?;
        let r = dec.first_passing.unwrap_or(*ladder.last().expect("nonempty ladder"));
        let vr = smoothing::convolve(&ve, &make_mollifier(n, r)?)?;
        self.write_field("Vr", &vr)?;
        #[derive(Serialize)]
        struct SmoothReport<'a> {
            uoc: &'a smoothing::UocReport,
            decrease: &'a smoothing::LadderDecrease,
        }
        self.write_json("smooth_report.json", &SmoothReport { uoc: &uoc, decrease: &dec })?;
        self.check("uoc", uoc.passed, uoc.distances.last().copied());
        let worst = dec.rungs.first().map(|g| g.report.worst_margin);
        self.check("mollified_decrease", dec.first_passing.is_some(), worst);
        Ok(())
    }

    fn glue(&mut self) -> Result<(), Halt> {
        if self.glued.is_some() {
            return Ok(());
        }
        self.lyapunov()?;
        self.stage = "glue";
        let (ve, we) = self.even.clone().expect("value field");
        let n = self.dim();
        let pou = build_partition(
            &vec![self.knobs.grid_lo; n],
            &vec![self.knobs.grid_hi; n],
            self.knobs.pieces,
            self.knobs.overlap,
        )?
        .with_epsilons(&ve, &we, EPS_FLOOR)?;
        self.write_json("partition.json", &pou)?;
        let pieces = smooth_pieces(&ve, &we, &pou)?;
        let g = glue(&ve, &we, &pieces, &pou, GLUE_TOL)?;
        self.write_field("Vs", &g.v)?;
        self.write_field("Ws", &g.w)?;
        self.write("glue_report.txt", &g.report.to_text())?;
        self.write_json("glue_report.json", &g.report)?;
        self.check("glue_error", g.report.passed, Some(g.report.worst_excess));
        self.glued = Some((g.v, g.w));
        Ok(())
    }

    fn verify_decrease(&mut self) -> Result<(), Halt> {
        self.glue()?;
        self.stage = "verify-decrease";
        let (vs, ws) = self.glued.clone().expect("glued pair");
        let trs = self.check_trajectories()?;
        let reports = trs
            .iter()
            .map(|tr| lyapunov::verify_differential_decrease(&vs, &ws, tr, DECREASE_TOL))
            .collect::<Result<Vec<_>>>()?;
        let merged = MarginReport::merge(&reports).expect("nonempty sample set");
        self.write_json("decrease_report.json", &merged)?;
        self.check("glued_decrease", merged.passed, Some(merged.worst_margin));
        Ok(())
    }

    fn assumption_a(&mut self) -> Result<(), Halt> {
        self.validate()?;
        self.stage = "verify-assumption-a";
        let net = self.network.clone().expect("validated");
        let u = unit_starts(self.dim(), 1, self.knobs.seed).remove(0);
        let x0 = vecops::scaled(&u, NEIGHBOR_START_NORM);
        let reference = simulate(&net, &x0, &SelectionRule::MinNorm, self.knobs.h, self.knobs.horizon)?;
        let ys: Vec<Vec<f64>> = NEIGHBOR_SHIFTS.iter().map(|s| vecops::scaled(&u, *s)).collect();
        let c = match self.knobs.bound {
            BoundKind::Linear => BoundFn::Linear {
                slope: 1.0 / NEIGHBOR_START_NORM,
            },
            BoundKind::Filippov => BoundFn::Filippov {
                lipschitz: net.lipschitz,
            },
            BoundKind::Log => BoundFn::LogShift,
        };
        let rep = verify_assumption_a(&net, &reference, &ys, reference.horizon(), c, NEIGHBOR_TOL)?;
        self.write("neighbor_reference.csv", &reference.to_csv())?;
        self.write("neighbor.csv", &rep.to_csv())?;
        self.write("neighbor.json", &(rep.summary_json()? + "\n"))?;
        self.check("assumption_a", rep.pass, Some(rep.worst_margin));
        Ok(())
    }

    fn usc(&mut self) -> Result<(), Halt> {
        self.validate()?;
        self.stage = "usc-probe";
        let net = self.network.clone().expect("validated");
        let n = self.dim();
        let u = vec![1.0 / (n as f64).sqrt(); n];
        let approach: Vec<Vec<f64>> = (1..=USC_TERMS).map(|k| vecops::scaled(&u, 1.0 / k as f64)).collect();
        let outcome = usc_probe(&net, &vec![0.0; n], &approach, USC_TOL)?;
        self.write_json("usc_probe.json", &outcome)?;
        let d = match &outcome {
            UscOutcome::Pass => None,
            UscOutcome::Witness { distance, .. } => Some(*distance),
        };
        // A witness is a finding about the model, not a failed check.
        self.check("usc_probe", true, d);
        Ok(())
    }

    fn execute(&mut self, cmd: Command) -> Result<(), Halt> {
        self.knobs.check()?;
        fs::create_dir_all(&self.out).map_err(Error::from)?;
        match cmd {
            Command::Validate => self.validate(),
            Command::Simulate => self.simulate(),
            Command::Stability => self.stability(),
            Command::Lyapunov => self.lyapunov(),
            Command::Smooth => self.smooth(),
            Command::Glue => self.glue(),
            Command::VerifyDecrease => self.verify_decrease(),
            Command::VerifyAssumptionA => self.assumption_a(),
            Command::UscProbe => self.usc(),
            Command::Pipeline => {
                self.validate()?;
                self.stability()?;
                self.lyapunov()?;
                self.smooth()?;
                self.glue()?;
                self.verify_decrease()?;
                self.assumption_a()
            }
        }
    }

    fn finish(&mut self, cmd: Command, result: Result<(), Halt>) -> i32 {
        let (code, error) = match result {
            Ok(()) if self.checks.iter().all(|c| c.passed) => (0, None),
            Ok(()) => (1, None),
            Err(Halt::Unstable) => (1, Some("unstable".to_string())),
            Err(Halt::Failed(e)) => (1, Some(e.to_string())),
            Err(Halt::Config(e)) => (2, Some(e.to_string())),
        };
        if let Some(e) = &error {
            eprintln!("lyapforge: {e}");
        }
        let manifest = Manifest {
            command: cmd.name(),
            stage: self.stage,
            artifacts: &self.artifacts,
            checks: &self.checks,
            error,
            passed: code == 0,
        };
        if self.out.is_dir() {
            let body = serde_json::to_string_pretty(&manifest).map(|s| s + "\n");
            let written = body.map_err(Error::from).and_then(|s| {
                fs::write(self.out.join("manifest.json"), s).map_err(Error::from)
            });
            if let Err(e) = written {
                eprintln!("lyapforge: cannot write manifest: {e}");
                return 2;
            }
        }
        code
    }
}

fn init_threads() {
    if let Some(n) = std::env::var("LYAPFORGE_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // Fails only if a pool already exists, which is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `argv`, runs the requested stage(s) and returns the exit status:
/// 0 when every check passes, 1 on a failed check or instability, 2 on
/// configuration errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_threads();
    let mut run = Run::new(cli.knobs);
    let result = run.execute(cli.command);
    run.finish(cli.command, result)
}

/// Path of the bundled example networks.
pub fn bundled_data_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/data"))
}

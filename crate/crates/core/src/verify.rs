//! Oracle-equivalence suites: the closed-form steady state checked against the
//! Langevin moment equations and against the truncated master equation.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytic::{mean_photon_cavity, quad_moments_steady, quad_moments_transient};
use crate::error::{Error, Result};
use crate::langevin::{
    integrate_moments, stochastic_ensemble, stochastic_quadrature, steady_moments_linear, EnsembleConfig,
    Quadrature,
};
use crate::master::{steady_state, truncation_scan};
use crate::model::{drift_diffusion, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerifyScope {
    Langevin,
    Master,
    All,
}

impl FromStr for VerifyScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "langevin" => Ok(VerifyScope::Langevin),
            "master" => Ok(VerifyScope::Master),
            "all" => Ok(VerifyScope::All),
            _ => Err(Error::Invalid(format!("unknown scope `{s}`, expected langevin, master or all"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ToleranceProfile {
    #[default]
    Default,
    Strict,
}

impl FromStr for ToleranceProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(ToleranceProfile::Default),
            "strict" => Ok(ToleranceProfile::Strict),
            _ => Err(Error::Invalid(format!("unknown tolerance profile `{s}`"))),
        }
    }
}

/// Absolute tolerances for each kind of check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub langevin: f64,
    pub linear: f64,
    pub master: f64,
    pub trace: f64,
    pub hermiticity: f64,
    /// Allowed distance of an ensemble mean, in standard errors.
    pub ensemble_se: f64,
}

impl ToleranceProfile {
    pub fn tolerances(self) -> Tolerances {
        match self {
            ToleranceProfile::Default => Tolerances {
                langevin: 1e-8,
                linear: 1e-12,
                master: 1e-6,
                trace: 1e-10,
                hermiticity: 1e-10,
                ensemble_se: 4.0,
            },
            ToleranceProfile::Strict => Tolerances {
                langevin: 1e-9,
                linear: 1e-12,
                master: 1e-7,
                trace: 1e-11,
                hermiticity: 1e-11,
                ensemble_se: 3.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub group: &'static str,
    pub label: String,
    pub computed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(group: &'static str, label: String, computed: f64, expected: f64, tolerance: f64) -> Self {
        let pass = (computed - expected).abs() <= tolerance;
        Check {
            group,
            label,
            computed,
            expected,
            tolerance,
            pass,
        }
    }

    pub fn deviation(&self) -> f64 {
        (self.computed - self.expected).abs()
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// Sampled points skipped because they are above threshold.
    pub excluded_above_threshold: usize,
    /// Sampled points skipped for other reasons (slow relaxation, bright field).
    pub excluded_other: usize,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn max_deviation(&self, group: &str) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| c.group == group)
            .map(Check::deviation)
            .reduce(f64::max)
    }

    fn merge(&mut self, other: VerifyReport) {
        self.checks.extend(other.checks);
        self.excluded_above_threshold += other.excluded_above_threshold;
        self.excluded_other += other.excluded_other;
    }

    /// Summary per group, then each check of the small groups and every
    /// failure of the large ones.
    pub fn render(&self) -> String {
        const LIST_LIMIT: usize = 60;
        let mut out = String::new();
        let mut groups: Vec<&'static str> = Vec::new();
        for c in &self.checks {
            if !groups.contains(&c.group) {
                groups.push(c.group);
            }
        }
        for g in groups {
            let members: Vec<&Check> = self.checks.iter().filter(|c| c.group == g).collect();
            let failed = members.iter().filter(|c| !c.pass).count();
            let worst = members.iter().map(|c| c.deviation()).fold(0.0, f64::max);
            let _ = writeln!(
                out,
                "[{}] {}: {} checks, {} failed, max deviation {:.3e}",
                if failed == 0 { "PASS" } else { "FAIL" },
                g,
                members.len(),
                failed,
                worst
            );
            for c in members {
                if members_small(LIST_LIMIT, self, g) || !c.pass {
                    let _ = writeln!(
                        out,
                        "  {} {}: computed {:.12e} expected {:.12e} |diff| {:.3e} tol {:.1e}",
                        if c.pass { "ok  " } else { "FAIL" },
                        c.label,
                        c.computed,
                        c.expected,
                        c.deviation(),
                        c.tolerance
                    );
                }
            }
        }
        let _ = writeln!(
            out,
            "excluded points: {} above threshold, {} outside oracle range",
            self.excluded_above_threshold, self.excluded_other
        );
        let _ = writeln!(out, "overall: {}", if self.passed() { "PASS" } else { "FAIL" });
        out
    }
}

fn members_small(limit: usize, report: &VerifyReport, group: &str) -> bool {
    report.checks.iter().filter(|c| c.group == group).count() <= limit
}

fn label(p: &SystemParams) -> String {
    format!(
        "A={:.4} kappa={:.4} eta={:.4} omega={:.4} N={:.4}",
        p.gain, p.kappa, p.eta, p.omega, p.noise
    )
}

/// Accepted random points in the Langevin suite.
pub const LANGEVIN_POINTS: usize = 1000;
pub const LANGEVIN_SEED: u64 = 20_160_117;
/// Points relaxing slower than this are skipped: absolute agreement at `1e-8`
/// needs the moments themselves to stay moderate.
pub const LANGEVIN_MIN_RATE: f64 = 0.05;
/// Integration horizon in units of the slowest relaxation time.
const LANGEVIN_HORIZON: f64 = 40.0;
/// `dt * max(lambda)` used for the moment integration.
const LANGEVIN_STEP: f64 = 0.01;
/// Transient comparison every this many steps.
const TRANSIENT_STRIDE: usize = 97;

/// Uniform draws over `A in [0, 5]`, `kappa in [0.05, 1]`, `eta in [-1, 1]`,
/// `omega in [0, 2]`, `N in [0, 1]`.
pub fn langevin_sample(n: usize, seed: u64) -> Vec<SystemParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| draw(&mut rng)).collect()
}

fn draw(rng: &mut ChaCha8Rng) -> SystemParams {
    SystemParams {
        gain: rng.gen_range(0.0..=5.0),
        kappa: rng.gen_range(0.05..=1.0),
        eta: rng.gen_range(-1.0..=1.0),
        omega: rng.gen_range(0.0..=2.0),
        noise: rng.gen_range(0.0..=1.0),
    }
}

/// Keeps drawing until `n` points fall below threshold with a relaxation rate
/// of at least [`LANGEVIN_MIN_RATE`]; returns them with the numbers rejected
/// as above threshold and as too slow.
pub fn langevin_accepted(n: usize, seed: u64) -> (Vec<SystemParams>, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut points, mut above, mut slow) = (Vec::with_capacity(n), 0, 0);
    while points.len() < n {
        let p = draw(&mut rng);
        let rates = drift_diffusion(&p);
        if !rates.below_threshold {
            above += 1;
        } else if rates.slowest_rate() < LANGEVIN_MIN_RATE {
            slow += 1;
        } else {
            points.push(p);
        }
    }
    (points, above, slow)
}

/// Moment-ODE steady state and transient against the closed form at `points`.
pub fn verify_langevin_points(points: &[SystemParams], tol: &Tolerances) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let mut steady = Vec::new();
    let mut transient = Vec::new();
    let mut linear = Vec::new();
    for p in points {
        let rates = drift_diffusion(p);
        if !rates.below_threshold {
            report.excluded_above_threshold += 1;
            continue;
        }
        if rates.slowest_rate() < LANGEVIN_MIN_RATE {
            report.excluded_other += 1;
            continue;
        }
        let exact = quad_moments_steady(p)?;
        let lin = steady_moments_linear(p)?;
        let lin_dev = (lin.m_plus - exact.plus)
            .abs()
            .max((lin.m_minus - exact.minus).abs());
        let lin_scale = exact.plus.abs().max(exact.minus.abs()).max(1.0);
        linear.push((p, lin_dev / lin_scale));

        let dt = LANGEVIN_STEP / rates.fastest_rate();
        let t_end = LANGEVIN_HORIZON / rates.slowest_rate();
        let traj = integrate_moments(p, t_end, dt)?;
        let last = traj.last().expect("nonempty trajectory");
        let dev_plus = (last.m_plus - exact.plus).abs();
        let dev_minus = (last.m_minus - exact.minus).abs();
        steady.push((p, last.m_plus, exact.plus, last.m_minus, exact.minus, dev_plus.max(dev_minus)));

        let mut worst: (f64, f64, f64) = (0.0, 0.0, 0.0);
        for s in traj.iter().step_by(TRANSIENT_STRIDE).chain(std::iter::once(last)) {
            let q = quad_moments_transient(p, s.t)?;
            for (got, want) in [(s.m_plus, q.plus), (s.m_minus, q.minus)] {
                if (got - want).abs() > worst.0 {
                    worst = ((got - want).abs(), got, want);
                }
            }
        }
        transient.push((p, worst));
    }

    let n = linear.len();
    if n == 0 {
        return Ok(report);
    }
    // one check per point would drown the report, so each group lists its
    // worst point; failures are listed individually
    let worst_linear = linear
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty");
    report.checks.push(Check::new(
        "langevin linear steady state (relative)",
        format!("worst of {n}: {}", label(worst_linear.0)),
        worst_linear.1,
        0.0,
        tol.linear,
    ));
    for &(p, mp, ep, mm, em, dev) in &steady {
        if dev > tol.langevin {
            report.checks.push(Check::new("langevin steady state", format!("{} m_+", label(p)), mp, ep, tol.langevin));
            report.checks.push(Check::new("langevin steady state", format!("{} m_-", label(p)), mm, em, tol.langevin));
        }
    }
    let worst = steady.iter().max_by(|a, b| a.5.total_cmp(&b.5)).expect("nonempty");
    let (got, want) = if (worst.1 - worst.2).abs() >= (worst.3 - worst.4).abs() {
        (worst.1, worst.2)
    } else {
        (worst.3, worst.4)
    };
    report.checks.push(Check::new(
        "langevin steady state",
        format!("worst of {n}: {}", label(worst.0)),
        got,
        want,
        tol.langevin,
    ));
    for &(p, (dev, got, want)) in &transient {
        if dev > tol.langevin {
            report.checks.push(Check::new("langevin transient", label(p), got, want, tol.langevin));
        }
    }
    let worst = transient.iter().max_by(|a, b| a.1 .0.total_cmp(&b.1 .0)).expect("nonempty");
    report.checks.push(Check::new(
        "langevin transient",
        format!("worst of {n}: {}", label(worst.0)),
        worst.1 .1,
        worst.1 .2,
        tol.langevin,
    ));
    Ok(report)
}

/// Points for the stochastic spot check. Both diffusions are positive at the
/// first two; elsewhere only the quadrature with nonnegative diffusion runs.
pub fn ensemble_points() -> Vec<SystemParams> {
    vec![
        SystemParams::new(0.2, 0.2, -0.5, 0.0, 0.0).expect("valid"),
        SystemParams::new(0.1, 0.5, -0.9, 0.0, 0.0).expect("valid"),
        SystemParams::new(0.0, 0.2, 0.0, 0.0, 0.4).expect("valid"),
        SystemParams::new(0.5, 0.5, 0.0, 0.5, 0.2).expect("valid"),
    ]
}

const ENSEMBLE_TRAJECTORIES: usize = 20_000;

/// Stochastic ensemble means against the closed form, in standard errors.
pub fn verify_ensemble(tol: &Tolerances) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    for (i, p) in ensemble_points().iter().enumerate() {
        let rates = drift_diffusion(p);
        let exact = quad_moments_steady(p)?;
        let dt = 0.05 / rates.fastest_rate();
        let cfg = EnsembleConfig::new(ENSEMBLE_TRAJECTORIES, dt, 25.0 / rates.slowest_rate(), 7 + i as u64);
        let mut estimates = Vec::new();
        if rates.diff_plus >= 0.0 && rates.diff_minus >= 0.0 {
            let est = stochastic_ensemble(p, &cfg)?;
            estimates.push(("m_+", est.plus, exact.plus));
            estimates.push(("m_-", est.minus, exact.minus));
        } else if rates.diff_plus >= 0.0 {
            estimates.push(("m_+", stochastic_quadrature(p, &cfg, Quadrature::Plus)?, exact.plus));
        } else {
            estimates.push(("m_-", stochastic_quadrature(p, &cfg, Quadrature::Minus)?, exact.minus));
        }
        for (name, e, want) in estimates {
            // a zero standard error only arises from a noise-free process
            let z = if e.std_error > 0.0 {
                (e.mean - want) / e.std_error
            } else if e.mean == want {
                0.0
            } else {
                f64::INFINITY
            };
            report.checks.push(Check::new(
                "langevin ensemble (standard errors)",
                format!("{} {}", label(p), name),
                z,
                0.0,
                tol.ensemble_se,
            ));
        }
    }
    Ok(report)
}

pub fn verify_langevin(tol: &Tolerances) -> Result<VerifyReport> {
    let (points, above, slow) = langevin_accepted(LANGEVIN_POINTS, LANGEVIN_SEED);
    let mut report = verify_langevin_points(&points, tol)?;
    report.excluded_above_threshold += above;
    report.excluded_other += slow;
    report.merge(verify_ensemble(tol)?);
    Ok(report)
}

/// Truncations tried for each master-equation point.
pub const MASTER_DIMS: [usize; 5] = [10, 20, 30, 40, 60];
/// Brightest cavity field admitted to the master-equation grid.
pub const MASTER_MAX_PHOTONS: f64 = 3.0;
/// Slowest relaxation admitted; keeps the propagation time bounded.
pub const MASTER_MIN_RATE: f64 = 0.25;

/// Candidate grid for the master-equation suite; successive points alternate
/// between a vacuum and a biased reservoir.
pub fn master_candidates() -> Vec<SystemParams> {
    const RESERVOIRS: [(f64, f64); 2] = [(0.5, 0.0), (0.8, 0.15)];
    let mut out = Vec::new();
    for &gain in &[0.0, 0.5, 1.0, 2.0] {
        for &eta in &[-0.5, 0.0, 0.5] {
            for &omega in &[0.0, 0.6, 1.5] {
                let (kappa, noise) = RESERVOIRS[out.len() % 2];
                out.push(SystemParams {
                    gain,
                    kappa,
                    eta,
                    omega,
                    noise,
                });
            }
        }
    }
    out
}

/// Steady `<alpha_+-^2>` from propagation at the converged truncation against
/// the closed form, with trace and Hermiticity of the propagated state.
pub fn verify_master_points(points: &[SystemParams], tol: &Tolerances) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    for p in points {
        let rates = drift_diffusion(p);
        if !rates.below_threshold {
            report.excluded_above_threshold += 1;
            continue;
        }
        let exact = quad_moments_steady(p)?;
        if rates.slowest_rate() < MASTER_MIN_RATE || mean_photon_cavity(&exact) >= MASTER_MAX_PHOTONS {
            report.excluded_other += 1;
            continue;
        }
        let scan = match truncation_scan(p, &MASTER_DIMS) {
            Ok(scan) => scan,
            Err(Error::NonConvergence { .. }) => {
                report.excluded_other += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let Some(dim) = scan.converged_dim else {
            report.excluded_other += 1;
            continue;
        };
        // the scan's next dimension is the one known to agree with `dim`
        let dim = MASTER_DIMS[MASTER_DIMS.iter().position(|&d| d == dim).expect("scanned") + 1];
        let ss = steady_state(p, dim)?;
        let (m_plus, m_minus) = ss.moments.quadrature_moments();
        let name = format!("{} dim={}", label(p), dim);
        report
            .checks
            .push(Check::new("master steady m_+", name.clone(), m_plus, exact.plus, tol.master));
        report
            .checks
            .push(Check::new("master steady m_-", name.clone(), m_minus, exact.minus, tol.master));
        report
            .checks
            .push(Check::new("master trace drift", name.clone(), ss.max_trace_drift, 0.0, tol.trace));
        report.checks.push(Check::new(
            "master hermiticity",
            name,
            ss.max_hermiticity_error,
            0.0,
            tol.hermiticity,
        ));
    }
    Ok(report)
}

pub fn verify_master(tol: &Tolerances) -> Result<VerifyReport> {
    verify_master_points(&master_candidates(), tol)
}

pub fn verify(scope: VerifyScope, profile: ToleranceProfile) -> Result<VerifyReport> {
    let tol = profile.tolerances();
    let mut report = VerifyReport::default();
    if matches!(scope, VerifyScope::Langevin | VerifyScope::All) {
        report.merge(verify_langevin(&tol)?);
    }
    if matches!(scope, VerifyScope::Master | VerifyScope::All) {
        report.merge(verify_master(&tol)?);
    }
    Ok(report)
}

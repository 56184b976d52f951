//! Langevin oracle: second-moment ODEs of the c-number quadratures and a
//! stochastic ensemble of the decoupled real quadrature processes.
//!
//! Shares only [`drift_diffusion`] with the closed-form module; the steady
//! state is reached by integration or by solving the linear moment equations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{drift_diffusion, DriftDiffusion, SystemParams};

/// Upper bound on `dt * max(lambda)` for both integrators.
pub const STABILITY_MARGIN: f64 = 0.1;

/// `<alpha_+^2>` and `<alpha_-^2>` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentState {
    pub m_plus: f64,
    pub m_minus: f64,
    pub t: f64,
}

impl MomentState {
    pub fn vacuum() -> Self {
        MomentState {
            m_plus: 0.0,
            m_minus: 0.0,
            t: 0.0,
        }
    }
}

// d<alpha_+^2>/dt = -lambda_- <alpha_+^2> + diff_+
// d<alpha_-^2>/dt = -lambda_+ <alpha_-^2> - diff_-
fn moment_rhs(rates: &DriftDiffusion, m_plus: f64, m_minus: f64) -> (f64, f64) {
    (
        -rates.lambda_minus * m_plus + rates.diff_plus,
        -rates.lambda_plus * m_minus - rates.diff_minus,
    )
}

/// One classical fourth-order Runge-Kutta step of the moment equations.
pub fn moment_ode_step(state: &MomentState, rates: &DriftDiffusion, dt: f64) -> MomentState {
    let (p, m) = (state.m_plus, state.m_minus);
    let k1 = moment_rhs(rates, p, m);
    let k2 = moment_rhs(rates, p + 0.5 * dt * k1.0, m + 0.5 * dt * k1.1);
    let k3 = moment_rhs(rates, p + 0.5 * dt * k2.0, m + 0.5 * dt * k2.1);
    let k4 = moment_rhs(rates, p + dt * k3.0, m + dt * k3.1);
    MomentState {
        m_plus: p + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        m_minus: m + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        t: state.t + dt,
    }
}

fn check_step(rates: &DriftDiffusion, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain {
            name: "dt",
            value: dt,
            reason: "must be finite and > 0",
        });
    }
    let product = dt * rates.fastest_rate();
    if product >= STABILITY_MARGIN {
        return Err(Error::StepSize {
            dt,
            product,
            limit: STABILITY_MARGIN,
        });
    }
    Ok(())
}

/// Trajectory of the moments from a vacuum cavity up to `t_end`.
///
/// Uses `ceil(t_end / dt)` equal steps, so the last state lands on `t_end`
/// exactly. `t_end = 0` yields the single initial state.
pub fn integrate_moments(params: &SystemParams, t_end: f64, dt: f64) -> Result<Vec<MomentState>> {
    let rates = drift_diffusion(params);
    rates.require_below_threshold()?;
    check_step(&rates, dt)?;
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::Domain {
            name: "t_end",
            value: t_end,
            reason: "must be finite and >= 0",
        });
    }
    let steps = (t_end / dt).ceil() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut state = MomentState::vacuum();
    out.push(state);
    if steps == 0 {
        return Ok(out);
    }
    let h = t_end / steps as f64;
    for i in 1..=steps {
        state = moment_ode_step(&state, &rates, h);
        state.t = i as f64 * h;
        out.push(state);
    }
    Ok(out)
}

/// Steady state from the linear moment equations, without integration.
pub fn steady_moments_linear(params: &SystemParams) -> Result<MomentState> {
    let rates = drift_diffusion(params);
    rates.require_below_threshold()?;
    Ok(MomentState {
        m_plus: rates.diff_plus / rates.lambda_minus,
        m_minus: -rates.diff_minus / rates.lambda_plus,
        t: f64::INFINITY,
    })
}

/// Time-stepping scheme of the stochastic ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    EulerMaruyama,
    /// Exact Gaussian transition of the linear process; no step-size bias.
    ExactTransition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub n_trajectories: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub scheme: Scheme,
}

impl EnsembleConfig {
    pub fn new(n_trajectories: usize, dt: f64, t_end: f64, seed: u64) -> Self {
        EnsembleConfig {
            n_trajectories,
            dt,
            t_end,
            seed,
            scheme: Scheme::ExactTransition,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }
}

/// Ensemble estimate of one quadrature's second moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Ensemble estimates of `<alpha_+^2>` and `<alpha_-^2>` at `t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleEstimate {
    pub plus: MomentEstimate,
    pub minus: MomentEstimate,
    pub t: f64,
}

impl EnsembleEstimate {
    pub fn state(&self) -> MomentState {
        MomentState {
            m_plus: self.plus.mean,
            m_minus: self.minus.mean,
            t: self.t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Plus,
    Minus,
}

impl Quadrature {
    /// Stream offset so the two quadratures never share random numbers.
    fn stream_base(self) -> u64 {
        match self {
            Quadrature::Plus => 0,
            Quadrature::Minus => 1 << 62,
        }
    }
}

/// Simulates the real quadrature `x_+` (rate `lambda_-/2`, diffusion `diff_+`)
/// or `x_-` (rate `lambda_+/2`, diffusion `diff_-`) from `x = 0` and returns the
/// estimate of the matching `<alpha_+-^2>`, i.e. `<x_+^2>` or `-<x_-^2>`.
///
/// Needs a nonnegative diffusion for the chosen quadrature.
pub fn stochastic_quadrature(
    params: &SystemParams,
    cfg: &EnsembleConfig,
    quadrature: Quadrature,
) -> Result<MomentEstimate> {
    let rates = drift_diffusion(params);
    rates.require_below_threshold()?;
    let (rate, diffusion, sign) = match quadrature {
        Quadrature::Plus => (rates.lambda_minus, rates.diff_plus, 1.0),
        Quadrature::Minus => (rates.lambda_plus, rates.diff_minus, -1.0),
    };
    if diffusion < 0.0 {
        return Err(Error::Representability {
            diff_plus: rates.diff_plus,
            diff_minus: rates.diff_minus,
        });
    }
    check_ensemble(cfg, &rates)?;
    let second = run_quadrature(rate, diffusion, cfg, quadrature.stream_base());
    Ok(MomentEstimate {
        mean: sign * second.mean,
        std_error: second.std_error,
    })
}

/// Both quadratures; refuses points where either diffusion is negative, since
/// such noise has no classical representation. Fall back to
/// [`integrate_moments`] there.
pub fn stochastic_ensemble(params: &SystemParams, cfg: &EnsembleConfig) -> Result<EnsembleEstimate> {
    let rates = drift_diffusion(params);
    rates.require_below_threshold()?;
    if rates.diff_plus < 0.0 || rates.diff_minus < 0.0 {
        return Err(Error::Representability {
            diff_plus: rates.diff_plus,
            diff_minus: rates.diff_minus,
        });
    }
    Ok(EnsembleEstimate {
        plus: stochastic_quadrature(params, cfg, Quadrature::Plus)?,
        minus: stochastic_quadrature(params, cfg, Quadrature::Minus)?,
        t: cfg.t_end,
    })
}

fn check_ensemble(cfg: &EnsembleConfig, rates: &DriftDiffusion) -> Result<()> {
    if cfg.n_trajectories < 2 {
        return Err(Error::Domain {
            name: "n_trajectories",
            value: cfg.n_trajectories as f64,
            reason: "need at least two trajectories for a standard error",
        });
    }
    if !(cfg.t_end.is_finite() && cfg.t_end > 0.0) {
        return Err(Error::Domain {
            name: "t_end",
            value: cfg.t_end,
            reason: "must be finite and > 0",
        });
    }
    check_step(rates, cfg.dt)
}

/// Second moment of `dx = -(rate/2) x dt + sqrt(diffusion) dW` at `t_end`.
fn run_quadrature(rate: f64, diffusion: f64, cfg: &EnsembleConfig, stream_base: u64) -> MomentEstimate {
    let steps = (cfg.t_end / cfg.dt).ceil() as usize;
    let h = cfg.t_end / steps as f64;
    let (decay, kick) = match cfg.scheme {
        Scheme::EulerMaruyama => (1.0 - 0.5 * rate * h, (diffusion * h).sqrt()),
        Scheme::ExactTransition => {
            // variance added per step: diffusion (1 - e^{-rate h}) / rate
            let decay = (-0.5 * rate * h).exp();
            (decay, (diffusion * -(-rate * h).exp_m1() / rate).sqrt())
        }
    };

    // One ChaCha stream per trajectory index keeps results independent of
    // scheduling; the reduction below runs in index order.
    let squares: Vec<f64> = (0..cfg.n_trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream_base + i as u64);
            let mut x = 0.0f64;
            for _ in 0..steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = decay * x + kick * z;
            }
            x * x
        })
        .collect();

    let n = squares.len() as f64;
    let mean = squares.iter().sum::<f64>() / n;
    let var = squares.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    MomentEstimate {
        mean,
        std_error: (var / n).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{quad_moments_steady, quad_moments_transient};
    use approx::assert_relative_eq;

    fn params(a: f64, kappa: f64, eta: f64, omega: f64, n: f64) -> SystemParams {
        SystemParams::new(a, kappa, eta, omega, n).unwrap()
    }

    #[test]
    fn noiseless_vacuum_stays_put() {
        let rates = drift_diffusion(&params(0.0, 0.2, 0.0, 0.0, 0.0));
        assert_eq!((rates.diff_plus, rates.diff_minus), (0.0, 0.0));
        let s = moment_ode_step(&MomentState::vacuum(), &rates, 0.1);
        assert_eq!((s.m_plus, s.m_minus), (0.0, 0.0));
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let p = params(4.0, 0.3, 0.2, 0.5, 0.4);
        let rates = drift_diffusion(&p);
        let ss = steady_moments_linear(&p).unwrap();
        let s = moment_ode_step(&ss, &rates, 0.01);
        assert!((s.m_plus - ss.m_plus).abs() < 1e-12);
        assert!((s.m_minus - ss.m_minus).abs() < 1e-12);
    }

    #[test]
    fn empty_cavity_relaxes_to_reservoir() {
        let p = params(0.0, 0.2, 0.0, 0.0, 0.4);
        let traj = integrate_moments(&p, 50.0 / 0.2, 0.05).unwrap();
        let last = traj.last().unwrap();
        let m = p.reservoir().correlation;
        assert!((last.m_plus - 2.0 * (m + 0.4)).abs() < 1e-8);
        assert!((last.m_minus - 2.0 * (m - 0.4)).abs() < 1e-8);
        assert_eq!(last.t, 250.0);
    }

    #[test]
    fn zero_horizon_gives_initial_state() {
        let traj = integrate_moments(&params(1.0, 0.2, 0.0, 0.0, 0.1), 0.0, 0.01).unwrap();
        assert_eq!(traj, vec![MomentState::vacuum()]);
    }

    #[test]
    fn integration_matches_closed_form() {
        let p = params(10.0, 0.2, 0.25, 0.0, 0.4);
        let rates = drift_diffusion(&p);
        let t_end = 20.0 / rates.lambda_minus;
        let traj = integrate_moments(&p, t_end, 0.005).unwrap();
        for s in traj.iter().step_by(200) {
            let exact = quad_moments_transient(&p, s.t).unwrap();
            assert!((s.m_plus - exact.plus).abs() < 1e-8);
            assert!((s.m_minus - exact.minus).abs() < 1e-8);
        }
        // 20 time constants leave e^-20 of the steady value
        let ss = quad_moments_steady(&p).unwrap();
        let last = traj.last().unwrap();
        let slack = 2e-9 * ss.plus.abs().max(ss.minus.abs()).max(1.0);
        assert!((last.m_plus - ss.plus).abs() < 1e-8 + slack);
        assert!((last.m_minus - ss.minus).abs() < 1e-8 + slack);
    }

    #[test]
    fn fourth_order_convergence() {
        let p = params(2.0, 0.2, 0.1, 0.3, 0.4);
        let t_end = 3.0;
        let exact = quad_moments_transient(&p, t_end).unwrap();
        let err = |dt: f64| {
            let s = *integrate_moments(&p, t_end, dt).unwrap().last().unwrap();
            (s.m_plus - exact.plus).abs() + (s.m_minus - exact.minus).abs()
        };
        let coarse = err(0.04);
        let fine = err(0.02);
        let order = (coarse / fine).log2();
        assert!(order >= 3.5, "observed order {order}");
    }

    #[test]
    fn step_size_guard() {
        let p = params(10.0, 0.2, 0.25, 0.0, 0.4);
        assert!(matches!(
            integrate_moments(&p, 1.0, 0.1),
            Err(Error::StepSize { .. })
        ));
        assert!(matches!(
            integrate_moments(&params(10.0, 0.2, -0.1, 0.0, 0.0), 1.0, 0.001),
            Err(Error::AboveThreshold { .. })
        ));
    }

    #[test]
    fn linear_steady_state_values() {
        let s = steady_moments_linear(&params(0.0, 0.2, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!((s.m_plus, s.m_minus), (0.0, 0.0));
        let s = steady_moments_linear(&params(0.0, 0.2, 0.0, 0.0, 0.4)).unwrap();
        assert_relative_eq!(s.m_plus, 2.296662954709576, epsilon = 1e-12);
        assert_relative_eq!(s.m_minus, 0.696662954709576, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_ensemble_is_exactly_zero() {
        let p = params(0.0, 0.2, 0.0, 0.0, 0.0);
        for scheme in [Scheme::EulerMaruyama, Scheme::ExactTransition] {
            let cfg = EnsembleConfig::new(64, 0.1, 5.0, 7).with_scheme(scheme);
            let est = stochastic_ensemble(&p, &cfg).unwrap();
            assert_eq!(est.plus.mean, 0.0);
            assert_eq!(est.minus.mean, 0.0);
        }
    }

    #[test]
    fn ensemble_plus_quadrature_matches_closed_form() {
        let p = params(0.0, 0.2, 0.0, 0.0, 0.4);
        let cfg = EnsembleConfig::new(100_000, 0.4, 100.0, 2024);
        let est = stochastic_quadrature(&p, &cfg, Quadrature::Plus).unwrap();
        let exact = quad_moments_transient(&p, 100.0).unwrap().plus;
        assert!((est.mean - exact).abs() < 4.0 * est.std_error, "{est:?} vs {exact}");
        assert!((exact - 2.296662954709576).abs() < 1e-7);
    }

    #[test]
    fn euler_maruyama_close_for_small_steps() {
        let p = params(0.0, 0.5, 0.0, 0.0, 0.4);
        let cfg = EnsembleConfig::new(20_000, 0.01, 10.0, 5).with_scheme(Scheme::EulerMaruyama);
        let est = stochastic_quadrature(&p, &cfg, Quadrature::Plus).unwrap();
        let exact = quad_moments_transient(&p, 10.0).unwrap().plus;
        assert!((est.mean - exact).abs() < 4.0 * est.std_error + 0.01 * exact);
    }

    #[test]
    fn ensemble_refuses_negative_diffusion() {
        // empty cavity with biased noise: diff_- = 2 kappa (N - M) < 0
        let p = params(0.0, 0.2, 0.0, 0.0, 0.4);
        let cfg = EnsembleConfig::new(10, 0.1, 1.0, 1);
        assert!(matches!(
            stochastic_ensemble(&p, &cfg),
            Err(Error::Representability { .. })
        ));
        assert!(stochastic_quadrature(&p, &cfg, Quadrature::Minus).is_err());
    }

    #[test]
    fn ensemble_is_reproducible() {
        // undriven, eta < 0, no reservoir: both diffusions positive
        let p = params(0.2, 0.2, -0.5, 0.0, 0.0);
        let rates = drift_diffusion(&p);
        assert!(rates.diff_plus >= 0.0 && rates.diff_minus >= 0.0);
        let cfg = EnsembleConfig::new(5000, 0.02, 5.0, 99);
        let a = stochastic_ensemble(&p, &cfg).unwrap();
        let b = stochastic_ensemble(&p, &cfg).unwrap();
        assert_eq!(a.plus.mean.to_bits(), b.plus.mean.to_bits());
        assert_eq!(a.minus.mean.to_bits(), b.minus.mean.to_bits());
        let c = stochastic_ensemble(&p, &EnsembleConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.plus.mean, c.plus.mean);
    }

    #[test]
    fn ensemble_is_unbiased_across_seeds() {
        let p = params(0.2, 0.2, -0.5, 0.0, 0.0);
        let t_end = 15.0;
        let exact = quad_moments_transient(&p, t_end).unwrap();
        let runs: Vec<EnsembleEstimate> = (0..50)
            .map(|seed| stochastic_ensemble(&p, &EnsembleConfig::new(2000, 0.25, t_end, seed)).unwrap())
            .collect();
        let pooled = |f: fn(&EnsembleEstimate) -> MomentEstimate| {
            let mean = runs.iter().map(|r| f(r).mean).sum::<f64>() / 50.0;
            let se = runs.iter().map(|r| f(r).std_error.powi(2)).sum::<f64>().sqrt() / 50.0;
            (mean, se)
        };
        let (mp, sp) = pooled(|r| r.plus);
        let (mm, sm) = pooled(|r| r.minus);
        assert!((mp - exact.plus).abs() < 2.0 * sp, "{mp} vs {} (se {sp})", exact.plus);
        assert!((mm - exact.minus).abs() < 2.0 * sm, "{mm} vs {} (se {sm})", exact.minus);
    }
}

//! Closed-form steady-state and transient results: quadrature moments, cavity
//! and output variances, mean photon numbers and the `Omega = 0` / `eta = 0`
//! special cases.
//!
//! Variances are vacuum-normalised (vacuum = 1). Moments follow the normal
//! ordering convention `alpha_+ = alpha* + alpha`, `alpha_- = alpha* - alpha`,
//! so the cavity variances are `1 + <alpha_+^2>` and `1 - <alpha_-^2>`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{drift_diffusion, SystemParams};

/// Evaluations with `0 < lambda_min < NEAR_THRESHOLD` are tagged near-threshold.
pub const NEAR_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MomentTime {
    At(f64),
    Steady,
}

/// `<alpha_+^2>` and `<alpha_-^2>` at a given time or at steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadMoments {
    pub plus: f64,
    pub minus: f64,
    pub time: MomentTime,
}

impl QuadMoments {
    pub fn vacuum() -> Self {
        QuadMoments {
            plus: 0.0,
            minus: 0.0,
            time: MomentTime::At(0.0),
        }
    }
}

/// Exponential saturation of the quadrature moments from a vacuum cavity.
pub fn quad_moments_transient(params: &SystemParams, t: f64) -> Result<QuadMoments> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain {
            name: "t",
            value: t,
            reason: "must be finite and >= 0",
        });
    }
    let dd = drift_diffusion(params);
    dd.require_below_threshold()?;
    let rise = |rate: f64| -(-rate * t).exp_m1();
    Ok(QuadMoments {
        plus: dd.diff_plus / dd.lambda_minus * rise(dd.lambda_minus),
        minus: -dd.diff_minus / dd.lambda_plus * rise(dd.lambda_plus),
        time: MomentTime::At(t),
    })
}

/// The two square-bracketed numerators and the `H_+-` denominators of the
/// closed-form steady state.
struct SteadyTerms {
    /// Phase-sensitive numerator, common to both quadratures.
    x1: f64,
    /// Numerator entering with the quadrature sign.
    x2: f64,
    h_plus: f64,
    h_minus: f64,
    b: f64,
}

fn steady_terms(params: &SystemParams) -> SteadyTerms {
    let w = params.omega;
    let w2 = w * w;
    let eta = params.eta;
    let coh = ((1.0 - eta) * (1.0 + eta)).max(0.0).sqrt();
    let b = (1.0 + w2) * (1.0 + w2 / 4.0);

    let x1 = (w / 2.0) * (1.0 - 3.0 * eta + w2) + coh * (1.0 - w2 / 2.0);
    let x2 = 1.0 - eta + (w2 / 2.0) * (2.0 + eta) - coh * 1.5 * w;

    let common = (1.0 - w2 / 2.0) * eta + coh * 1.5 * w;
    let split = (w / 2.0) * (1.0 + w2);
    let ratio = params.gain / params.kappa;
    SteadyTerms {
        x1,
        x2,
        h_plus: b + ratio * (common - split),
        h_minus: b + ratio * (common + split),
        b,
    }
}

fn threshold_error(params: &SystemParams) -> Error {
    let dd = drift_diffusion(params);
    Error::AboveThreshold {
        lambda_plus: dd.lambda_plus,
        lambda_minus: dd.lambda_minus,
    }
}

/// Steady-state quadrature moments in closed form.
///
/// `kappa * H_+- / B` equals the relaxation rate of the matching quadrature, so
/// the point is below threshold exactly when both `H_+` and `H_-` are positive.
pub fn quad_moments_steady(params: &SystemParams) -> Result<QuadMoments> {
    let t = steady_terms(params);
    if !(t.h_plus > 0.0 && t.h_minus > 0.0) {
        return Err(threshold_error(params));
    }
    let a = params.gain;
    let k = params.kappa;
    let r = params.reservoir();
    let (n, m) = (r.intensity, r.correlation);
    let plus = a * t.x1 / (k * t.h_plus) + a * t.x2 / (k * t.h_plus) + 2.0 * t.b * (m + n) / t.h_plus;
    let minus =
        a * t.x1 / (k * t.h_minus) - a * t.x2 / (k * t.h_minus) + 2.0 * t.b * (m - n) / t.h_minus;
    Ok(QuadMoments {
        plus,
        minus,
        time: MomentTime::Steady,
    })
}

/// Cavity quadrature variances `(Delta a_+^2, Delta a_-^2)`.
pub fn cavity_variances(moments: &QuadMoments) -> (f64, f64) {
    (1.0 + moments.plus, 1.0 - moments.minus)
}

fn reservoir_variances(params: &SystemParams) -> (f64, f64) {
    let r = params.reservoir();
    let base = 1.0 + 2.0 * r.intensity;
    (base + 2.0 * r.correlation, base - 2.0 * r.correlation)
}

/// Output variances from the input-output composition
/// `(1 - kappa)(1 + 2N +- 2M) + kappa * Delta a_+-^2`.
pub fn output_variances(params: &SystemParams, cav: (f64, f64)) -> (f64, f64) {
    let k = params.kappa;
    let (res_p, res_m) = reservoir_variances(params);
    ((1.0 - k) * res_p + k * cav.0, (1.0 - k) * res_m + k * cav.1)
}

/// Output variances evaluated directly from the expanded closed form, without
/// passing through the cavity moments.
pub fn output_variances_direct(params: &SystemParams) -> Result<(f64, f64)> {
    let t = steady_terms(params);
    if !(t.h_plus > 0.0 && t.h_minus > 0.0) {
        return Err(threshold_error(params));
    }
    let a = params.gain;
    let k = params.kappa;
    let r = params.reservoir();
    let (n, m) = (r.intensity, r.correlation);
    let (res_p, res_m) = reservoir_variances(params);
    let plus = (k * t.h_plus + a * t.x2) / t.h_plus
        + a * t.x1 / t.h_plus
        + 2.0 * k * t.b * (n + m) / t.h_plus
        + (1.0 - k) * res_p;
    let minus = (k * t.h_minus + a * t.x2) / t.h_minus - a * t.x1 / t.h_minus
        + 2.0 * k * t.b * (n - m) / t.h_minus
        + (1.0 - k) * res_m;
    Ok((plus, minus))
}

/// Output variances of the undriven laser (`omega = 0`).
pub fn output_variances_omega0(params: &SystemParams) -> Result<(f64, f64)> {
    if params.omega != 0.0 {
        return Err(Error::Domain {
            name: "omega",
            value: params.omega,
            reason: "the undriven special case needs omega = 0",
        });
    }
    let a = params.gain;
    let k = params.kappa;
    let eta = params.eta;
    let denom = a * eta + k;
    if denom <= 0.0 {
        return Err(threshold_error(params));
    }
    let coh = ((1.0 - eta) * (1.0 + eta)).max(0.0).sqrt();
    let (res_p, res_m) = reservoir_variances(params);
    let plus = (k * k * res_p + k * a * (1.0 + coh)) / denom + (1.0 - k) * res_p;
    let minus = (k * k * res_m + k * a * (1.0 - coh)) / denom + (1.0 - k) * res_m;
    Ok((plus, minus))
}

/// Output variances at maximal injected coherence (`eta = 0`), evaluated from
/// the expression exactly as it was published.
///
/// The published phase-sensitive bracket reads
/// `(Omega/2)(Omega^2/2 - 2 - Omega) + 1` where the general result gives
/// `(Omega/2)(1 + Omega^2 - Omega) + 1`; the two agree only at `Omega = 0`.
/// [`output_variances_direct`] is authoritative and `report` quantifies the gap.
pub fn output_variances_eta0_printed(params: &SystemParams) -> Result<(f64, f64)> {
    if params.eta != 0.0 {
        return Err(Error::Domain {
            name: "eta",
            value: params.eta,
            reason: "the maximal-coherence special case needs eta = 0",
        });
    }
    let t = steady_terms(params);
    if !(t.h_plus > 0.0 && t.h_minus > 0.0) {
        return Err(threshold_error(params));
    }
    let w = params.omega;
    let w2 = w * w;
    let a = params.gain;
    let k = params.kappa;
    let r = params.reservoir();
    let (n, m) = (r.intensity, r.correlation);
    let (res_p, res_m) = reservoir_variances(params);
    let printed_x1 = (w / 2.0) * (w2 / 2.0 - 2.0 - w) + 1.0;
    let x2 = 1.0 + w2 - 1.5 * w;
    let plus = (k * t.h_plus + a * printed_x1) / t.h_plus
        + a * x2 / t.h_plus
        + 2.0 * k * t.b * (n + m) / t.h_plus
        + (1.0 - k) * res_p;
    let minus = (k * t.h_minus - a * printed_x1) / t.h_minus
        + a * x2 / t.h_minus
        + 2.0 * k * t.b * (n - m) / t.h_minus
        + (1.0 - k) * res_m;
    Ok((plus, minus))
}

/// Mean cavity photon number `(<alpha_+^2> - <alpha_-^2>) / 4`.
pub fn mean_photon_cavity(moments: &QuadMoments) -> f64 {
    (moments.plus - moments.minus) / 4.0
}

/// Mean output photon number `kappa * n_cav + N (1 - kappa)`.
pub fn mean_photon_output(params: &SystemParams, moments: &QuadMoments) -> Result<f64> {
    drift_diffusion(params).require_below_threshold()?;
    Ok(params.kappa * mean_photon_cavity(moments) + params.noise * (1.0 - params.kappa))
}

/// Mean output photon number of the undriven laser in closed form.
pub fn mean_photon_output_omega0(params: &SystemParams) -> Result<f64> {
    if params.omega != 0.0 {
        return Err(Error::Domain {
            name: "omega",
            value: params.omega,
            reason: "the undriven special case needs omega = 0",
        });
    }
    let a = params.gain;
    let k = params.kappa;
    let n = params.noise;
    let denom = a * params.eta + k;
    if denom <= 0.0 {
        return Err(threshold_error(params));
    }
    Ok((k * a * (1.0 - params.eta) + 2.0 * k * k * n) / (2.0 * denom) + n * (1.0 - k))
}

/// Noise reduction below vacuum in percent; negative means excess noise.
pub fn squeezing_percent(variance: f64) -> f64 {
    (1.0 - variance) * 100.0
}

/// Every steady-state observable at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyObservables {
    pub var_plus_cav: f64,
    pub var_minus_cav: f64,
    pub var_plus_out: f64,
    pub var_minus_out: f64,
    pub n_cav: f64,
    pub n_out: f64,
    pub squeeze_pct_cav: f64,
    pub squeeze_pct_out: f64,
    pub near_threshold: bool,
}

pub fn steady_observables(params: &SystemParams) -> Result<SteadyObservables> {
    let moments = quad_moments_steady(params)?;
    let cav = cavity_variances(&moments);
    let out = output_variances(params, cav);
    let n_cav = mean_photon_cavity(&moments);
    let n_out = mean_photon_output(params, &moments)?;
    let dd = drift_diffusion(params);
    Ok(SteadyObservables {
        var_plus_cav: cav.0,
        var_minus_cav: cav.1,
        var_plus_out: out.0,
        var_minus_out: out.1,
        n_cav,
        n_out,
        squeeze_pct_cav: squeezing_percent(cav.1),
        squeeze_pct_out: squeezing_percent(out.1),
        near_threshold: dd.slowest_rate() < NEAR_THRESHOLD,
    })
}

//! Master-equation oracle: the cavity-mode density matrix in a truncated
//! photon-number basis, propagated with fourth-order Runge-Kutta steps.
//!
//! The generator is
//!
//! ```text
//! d rho/dt = g_up/2   (2 a+ rho a - a a+ rho - rho a a+)
//!          + g_down/2 (2 a rho a+ - a+ a rho - rho a+ a)
//!          + g_coh/2  [a+^2 - a^2, rho]
//!          - g_corr/2 (2 a+ rho a+ - a+^2 rho - rho a+^2)
//!          - g_corr/2 (2 a rho a - a^2 rho - rho a^2)
//! ```
//!
//! with `g_up = AC/B + kappa N`, `g_down = AD/B + kappa (N + 1)`,
//! `g_coh = (A / 2B)(E - F)` and `g_corr = kappa M - (A / 2B)(E + F)`. These make
//! `d<a>/dt`, `d<a^2>/dt` and `d<a+ a>/dt` identical to the c-number moment
//! equations of the Langevin description.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

mod sector;

use sector::EvenSector;

use crate::error::{Error, Result};
use crate::model::{drift_diffusion, SystemParams};

/// Upper bound on `dt` times the generator's spectral-radius estimate.
pub const STABILITY_MARGIN: f64 = 0.1;
/// Largest tolerated population in the top two Fock levels.
pub const LEAK_LIMIT: f64 = 1e-6;
/// Fixed-point detector threshold on the change of `<a^2>` and `<a+ a>`.
pub const FIXED_POINT_TOL: f64 = 1e-10;

/// Density matrix in the photon-number basis, `matrix[(n, m)] = <n|rho|m>`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    pub dim: usize,
    pub matrix: DMatrix<Complex64>,
}

impl FockState {
    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::number_state(dim, 0)
    }

    pub fn number_state(dim: usize, n: usize) -> Result<Self> {
        if dim < 2 || n >= dim {
            return Err(Error::Dimension(dim));
        }
        let mut matrix = DMatrix::zeros(dim, dim);
        matrix[(n, n)] = Complex64::new(1.0, 0.0);
        Ok(FockState { dim, matrix })
    }

    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim < 2 || matrix.ncols() != dim {
            return Err(Error::Dimension(dim));
        }
        Ok(FockState { dim, matrix })
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Largest `|rho_nm - conj(rho_mn)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for n in 0..d {
            for m in n..d {
                worst = worst.max((self.matrix[(n, m)] - self.matrix[(m, n)].conj()).norm());
            }
        }
        worst
    }

    /// Population of the two highest Fock levels.
    pub fn tail_population(&self) -> f64 {
        let d = self.dim;
        self.matrix[(d - 1, d - 1)].re.abs() + self.matrix[(d - 2, d - 2)].re.abs()
    }

    pub fn min_diagonal(&self) -> f64 {
        (0..self.dim)
            .map(|n| self.matrix[(n, n)].re)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorCoefficients {
    /// Single-photon gain rate.
    pub g_up: f64,
    /// Single-photon loss rate.
    pub g_down: f64,
    /// Coherent two-photon (squeezing) amplitude.
    pub g_coh: f64,
    /// Dissipative two-photon correlation strength.
    pub g_corr: f64,
}

impl GeneratorCoefficients {
    pub fn from_params(params: &SystemParams) -> Self {
        let g = params.coefficients();
        let r = params.reservoir();
        let a = params.gain;
        let k = params.kappa;
        GeneratorCoefficients {
            g_up: a * g.c / g.b + k * r.intensity,
            g_down: a * g.d / g.b + k * (r.intensity + 1.0),
            g_coh: a / (2.0 * g.b) * (g.e - g.f),
            g_corr: k * r.correlation - a / (2.0 * g.b) * (g.e + g.f),
        }
    }
}

/// Scalars the generator can act on: real matrices for real initial states
/// (all coefficients are real), complex ones in general.
pub trait Amplitude:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    const ZERO: Self;
}

impl Amplitude for f64 {
    const ZERO: Self = 0.0;
}

impl Amplitude for Complex64 {
    const ZERO: Self = Complex64 { re: 0.0, im: 0.0 };
}

/// The linear map `rho -> d rho/dt` on a `dim`-level truncation.
#[derive(Debug, Clone)]
pub struct Generator {
    pub coeffs: GeneratorCoefficients,
    pub dim: usize,
    /// `sqrt(n)` for `n = 0..=dim+1`.
    root: Vec<f64>,
}

pub fn build_generator(params: &SystemParams, dim: usize) -> Result<Generator> {
    Generator::new(GeneratorCoefficients::from_params(params), dim)
}

impl Generator {
    pub fn new(coeffs: GeneratorCoefficients, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Dimension(dim));
        }
        let root = (0..dim + 2).map(|n| (n as f64).sqrt()).collect();
        Ok(Generator { coeffs, dim, root })
    }

    /// `(a a+)_nn` in the truncated space; the top level has no room above it.
    fn raise_lower(&self, n: usize) -> f64 {
        if n + 1 < self.dim {
            (n + 1) as f64
        } else {
            0.0
        }
    }

    /// Calls `emit(n', m', c)` for every term `c * rho(n', m')` of `L[rho](n, m)`.
    #[inline(always)]
    pub(crate) fn stencil(&self, n: usize, m: usize, mut emit: impl FnMut(usize, usize, f64)) {
        let d = self.dim;
        let GeneratorCoefficients {
            g_up,
            g_down,
            g_coh,
            g_corr,
        } = self.coeffs;
        let s = &self.root;
        let up2 = 0.5 * (g_coh + g_corr);
        let down2 = 0.5 * (g_corr - g_coh);

        emit(
            n,
            m,
            -0.5 * g_up * (self.raise_lower(n) + self.raise_lower(m)) - 0.5 * g_down * (n + m) as f64,
        );
        if n >= 1 && m >= 1 {
            emit(n - 1, m - 1, g_up * s[n] * s[m]);
        }
        if n + 1 < d && m + 1 < d {
            emit(n + 1, m + 1, g_down * s[n + 1] * s[m + 1]);
        }
        if n >= 2 {
            emit(n - 2, m, up2 * s[n] * s[n - 1]);
        }
        if m >= 2 {
            emit(n, m - 2, up2 * s[m] * s[m - 1]);
        }
        if n + 2 < d {
            emit(n + 2, m, down2 * s[n + 1] * s[n + 2]);
        }
        if m + 2 < d {
            emit(n, m + 2, down2 * s[m + 1] * s[m + 2]);
        }
        if n >= 1 && m + 1 < d {
            emit(n - 1, m + 1, -g_corr * s[n] * s[m + 1]);
        }
        if n + 1 < d && m >= 1 {
            emit(n + 1, m - 1, -g_corr * s[n + 1] * s[m]);
        }
    }

    /// Writes `L[rho]` into `out`; both are column-major `dim x dim` slices,
    /// element `(n, m)` at `n + m * dim`.
    pub fn apply_into<T: Amplitude>(&self, rho: &[T], out: &mut [T]) {
        let d = self.dim;
        assert_eq!(rho.len(), d * d);
        assert_eq!(out.len(), d * d);
        for m in 0..d {
            for n in 0..d {
                let mut acc = T::ZERO;
                self.stencil(n, m, |i, j, c| acc = acc + rho[i + j * d] * c);
                out[n + m * d] = acc;
            }
        }
    }

    pub fn apply(&self, state: &FockState) -> FockState {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        self.apply_into(state.matrix.as_slice(), out.as_mut_slice());
        FockState {
            dim: self.dim,
            matrix: out,
        }
    }

    /// Gershgorin bound on the spectral radius of the generator.
    pub fn rate_bound(&self) -> f64 {
        let d = self.dim;
        let GeneratorCoefficients {
            g_up,
            g_down,
            g_coh,
            g_corr,
        } = self.coeffs;
        let s = &self.root;
        let up2 = (0.5 * (g_coh + g_corr)).abs();
        let down2 = (0.5 * (g_corr - g_coh)).abs();
        let mut worst = 0.0f64;
        for m in 0..d {
            for n in 0..d {
                // column sums: contributions of rho(n, m) to every output entry
                let mut r = (0.5 * g_up * (self.raise_lower(n) + self.raise_lower(m))
                    + 0.5 * g_down * (n + m) as f64)
                    .abs();
                r += g_up.abs() * s[n + 1] * s[m + 1];
                r += g_down.abs() * s[n] * s[m];
                r += up2 * (s[n + 1] * s[n + 2] + s[m + 1] * s[m + 2]);
                r += down2 * (s[n] * s[n.saturating_sub(1)] + s[m] * s[m.saturating_sub(1)]);
                r += g_corr.abs() * (s[n + 1] * s[m] + s[n] * s[m + 1]);
                worst = worst.max(r);
            }
        }
        worst
    }

    /// Largest step honouring [`STABILITY_MARGIN`], with a little headroom.
    pub fn max_step(&self) -> f64 {
        0.9 * STABILITY_MARGIN / self.rate_bound()
    }

    fn check_step(&self, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Domain {
                name: "dt",
                value: dt,
                reason: "must be finite and > 0",
            });
        }
        let product = dt * self.rate_bound();
        if product >= STABILITY_MARGIN {
            return Err(Error::StepSize {
                dt,
                product,
                limit: STABILITY_MARGIN,
            });
        }
        Ok(())
    }
}

/// Reusable RK4 buffers.
struct Rk4<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Amplitude> Rk4<T> {
    fn new(len: usize) -> Self {
        Rk4 {
            k1: vec![T::ZERO; len],
            k2: vec![T::ZERO; len],
            k3: vec![T::ZERO; len],
            k4: vec![T::ZERO; len],
            tmp: vec![T::ZERO; len],
        }
    }

    fn step(&mut self, apply: impl Fn(&[T], &mut [T]), rho: &mut [T], dt: f64) {
        apply(rho, &mut self.k1);
        for (t, (r, k)) in self.tmp.iter_mut().zip(rho.iter().zip(&self.k1)) {
            *t = *r + *k * (0.5 * dt);
        }
        apply(&self.tmp, &mut self.k2);
        for (t, (r, k)) in self.tmp.iter_mut().zip(rho.iter().zip(&self.k2)) {
            *t = *r + *k * (0.5 * dt);
        }
        apply(&self.tmp, &mut self.k3);
        for (t, (r, k)) in self.tmp.iter_mut().zip(rho.iter().zip(&self.k3)) {
            *t = *r + *k * dt;
        }
        apply(&self.tmp, &mut self.k4);
        let w = dt / 6.0;
        for i in 0..rho.len() {
            rho[i] = rho[i]
                + (self.k1[i] + self.k2[i] * 2.0 + self.k3[i] * 2.0 + self.k4[i]) * w;
        }
    }
}

/// Propagates `state` to `t_end` in `ceil(t_end / dt)` equal steps.
///
/// Fails if the step violates the stability margin or if the final state
/// leaks more than [`LEAK_LIMIT`] into the top two levels.
pub fn evolve(state: &FockState, generator: &Generator, t_end: f64, dt: f64) -> Result<FockState> {
    if state.dim != generator.dim {
        return Err(Error::Dimension(state.dim));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::Domain {
            name: "t_end",
            value: t_end,
            reason: "must be finite and >= 0",
        });
    }
    generator.check_step(dt)?;
    if t_end == 0.0 {
        return Ok(state.clone());
    }
    let steps = (t_end / dt).ceil() as usize;
    let h = t_end / steps as f64;
    let mut out = state.clone();
    let mut rk = Rk4::new(state.dim * state.dim);
    for _ in 0..steps {
        rk.step(|x, y| generator.apply_into(x, y), out.matrix.as_mut_slice(), h);
    }
    let population = out.tail_population();
    if population > LEAK_LIMIT {
        return Err(Error::TruncationLeak {
            dim: state.dim,
            population,
        });
    }
    Ok(out)
}

/// `<a>`, `<a^2>` and `<a+ a>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockMoments {
    pub mean: Complex64,
    pub a_sq: Complex64,
    pub n: f64,
}

impl FockMoments {
    /// Normally ordered `<alpha_+-^2> = <a+^2> + <a^2> +- 2 <a+ a>`, valid when
    /// `<a> = 0`.
    pub fn quadrature_moments(&self) -> (f64, f64) {
        let two_re = 2.0 * self.a_sq.re;
        (two_re + 2.0 * self.n, two_re - 2.0 * self.n)
    }

    /// Cavity variances `1 +- <alpha_+-^2>`.
    pub fn cavity_variances(&self) -> (f64, f64) {
        let (p, m) = self.quadrature_moments();
        (1.0 + p, 1.0 - m)
    }
}

fn moments_of<T: Amplitude>(rho: &[T], dim: usize, re: impl Fn(T) -> Complex64) -> FockMoments {
    let d = dim;
    let mut mean = Complex64::new(0.0, 0.0);
    let mut a_sq = Complex64::new(0.0, 0.0);
    let mut n = 0.0;
    for k in 0..d {
        n += k as f64 * re(rho[k + k * d]).re;
        if k + 1 < d {
            mean += re(rho[(k + 1) + k * d]) * ((k + 1) as f64).sqrt();
        }
        if k + 2 < d {
            a_sq += re(rho[(k + 2) + k * d]) * (((k + 1) * (k + 2)) as f64).sqrt();
        }
    }
    FockMoments { mean, a_sq, n }
}

pub fn moments_from_state(state: &FockState) -> FockMoments {
    moments_of(state.matrix.as_slice(), state.dim, |z| z)
}

/// Steady state reached by propagation from the vacuum.
#[derive(Debug, Clone)]
pub struct SteadyFock {
    pub state: FockState,
    pub moments: FockMoments,
    /// Time at which the fixed-point detector fired.
    pub t: f64,
    /// Largest `|tr rho - 1|` seen at any checkpoint.
    pub max_trace_drift: f64,
    /// Largest Hermiticity defect seen at any checkpoint.
    pub max_hermiticity_error: f64,
    pub tail_population: f64,
}

/// Propagates from the vacuum until `<a^2>` and `<a+ a>` change by less than
/// [`FIXED_POINT_TOL`] over one interval `1 / min(lambda)`.
///
/// All generator coefficients are real and preserve the parity of `n + m`, so
/// the propagation runs on the real even sector only. Population leaking past
/// the truncation is reported, not rejected.
pub fn steady_state(params: &SystemParams, dim: usize) -> Result<SteadyFock> {
    let rates = drift_diffusion(params);
    rates.require_below_threshold()?;
    let gen = build_generator(params, dim)?;
    let sector = EvenSector::new(&gen);
    let interval = 1.0 / rates.slowest_rate();
    let t_max = 400.0 * interval;
    let steps = (interval / gen.max_step()).ceil() as usize;
    let h = interval / steps as f64;

    let d = dim;
    let mut rho = vec![0.0f64; sector.len()];
    rho[sector.index_of(0, 0)] = 1.0;
    let mut rk = Rk4::new(sector.len());
    let mut prev = moments_of(&sector.expand(&rho), d, |x| Complex64::new(x, 0.0));
    let mut t = 0.0;
    let mut max_trace_drift = 0.0f64;
    let mut max_herm = 0.0f64;

    loop {
        for _ in 0..steps {
            rk.step(|x, y| sector.apply(x, y), &mut rho, h);
        }
        t += interval;
        let full = sector.expand(&rho);
        let trace: f64 = (0..d).map(|k| full[k + k * d]).sum();
        max_trace_drift = max_trace_drift.max((trace - 1.0).abs());
        for n in 0..d {
            for m in n + 1..d {
                max_herm = max_herm.max((full[n + m * d] - full[m + n * d]).abs());
            }
        }
        let now = moments_of(&full, d, |x| Complex64::new(x, 0.0));
        let change = (now.a_sq - prev.a_sq).norm().max((now.n - prev.n).abs());
        prev = now;
        if change < FIXED_POINT_TOL {
            break;
        }
        if t >= t_max {
            return Err(Error::NoFixedPoint { t_max });
        }
    }
    Ok(steady_from_real(&sector.expand(&rho), d, t, max_trace_drift, max_herm))
}

/// Stationary state from a direct solve of `L rho = 0` on the even sector.
///
/// Much cheaper than [`steady_state`] at large `dim`; `t` is reported as zero
/// and the drift fields describe the solution itself.
pub fn steady_state_direct(params: &SystemParams, dim: usize) -> Result<SteadyFock> {
    drift_diffusion(params).require_below_threshold()?;
    let gen = build_generator(params, dim)?;
    let sector = EvenSector::new(&gen);
    let rho = sector.null_vector().ok_or(Error::Dimension(dim))?;
    let full = sector.expand(&rho);
    let d = dim;
    let trace: f64 = (0..d).map(|k| full[k + k * d]).sum();
    let mut herm = 0.0f64;
    for n in 0..d {
        for m in n + 1..d {
            herm = herm.max((full[n + m * d] - full[m + n * d]).abs());
        }
    }
    Ok(steady_from_real(&full, d, 0.0, (trace - 1.0).abs(), herm))
}

fn steady_from_real(full: &[f64], dim: usize, t: f64, drift: f64, herm: f64) -> SteadyFock {
    let moments = moments_of(full, dim, |x| Complex64::new(x, 0.0));
    let matrix = DMatrix::from_iterator(dim, dim, full.iter().map(|&x| Complex64::new(x, 0.0)));
    let state = FockState { dim, matrix };
    let tail_population = state.tail_population();
    SteadyFock {
        state,
        moments,
        t,
        max_trace_drift: drift,
        max_hermiticity_error: herm,
        tail_population,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationRow {
    pub dim: usize,
    pub m_plus: f64,
    pub m_minus: f64,
    pub n: f64,
    pub tail_population: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationScan {
    pub rows: Vec<TruncationRow>,
    /// Smallest dimension whose moments agree with the next one in the scan.
    pub converged_dim: Option<usize>,
}

/// Agreement between successive dimensions that counts as converged.
pub const TRUNCATION_TOL: f64 = 1e-8;

/// Steady-state moments for each dimension in increasing order, from the
/// direct solve.
pub fn truncation_scan(params: &SystemParams, dims: &[usize]) -> Result<TruncationScan> {
    if dims.is_empty() || dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain {
            name: "dims",
            value: dims.len() as f64,
            reason: "need a nonempty, strictly increasing list",
        });
    }
    let mut rows = Vec::with_capacity(dims.len());
    for &dim in dims {
        let ss = steady_state_direct(params, dim)?;
        let (m_plus, m_minus) = ss.moments.quadrature_moments();
        rows.push(TruncationRow {
            dim,
            m_plus,
            m_minus,
            n: ss.moments.n,
            tail_population: ss.tail_population,
        });
    }
    let last = rows.last().expect("nonempty");
    if last.tail_population > LEAK_LIMIT {
        return Err(Error::NonConvergence {
            dim: last.dim,
            population: last.tail_population,
        });
    }
    let converged_dim = rows
        .windows(2)
        .find(|w| {
            (w[0].m_plus - w[1].m_plus).abs() < TRUNCATION_TOL
                && (w[0].m_minus - w[1].m_minus).abs() < TRUNCATION_TOL
        })
        .map(|w| w[0].dim);
    Ok(TruncationScan {
        rows,
        converged_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(a: f64, kappa: f64, eta: f64, omega: f64, n: f64) -> SystemParams {
        SystemParams::new(a, kappa, eta, omega, n).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn ladder(d: usize) -> DMatrix<Complex64> {
        let mut a = DMatrix::zeros(d, d);
        for n in 0..d - 1 {
            a[(n, n + 1)] = c(((n + 1) as f64).sqrt());
        }
        a
    }

    /// The generator written with dense matrix products.
    fn dense_generator(coeffs: &GeneratorCoefficients, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = rho.nrows();
        let a = ladder(d);
        let ad = a.adjoint();
        let a2 = &a * &a;
        let ad2 = &ad * &ad;
        let GeneratorCoefficients {
            g_up,
            g_down,
            g_coh,
            g_corr,
        } = *coeffs;
        let gain = (&ad * rho * &a) * c(2.0) - &a * &ad * rho - rho * &a * &ad;
        let loss = (&a * rho * &ad) * c(2.0) - &ad * &a * rho - rho * &ad * &a;
        let h = &ad2 - &a2;
        let coh = &h * rho - rho * &h;
        let bath_up = (&ad * rho * &ad) * c(2.0) - &ad2 * rho - rho * &ad2;
        let bath_down = (&a * rho * &a) * c(2.0) - &a2 * rho - rho * &a2;
        gain * c(0.5 * g_up) + loss * c(0.5 * g_down) + coh * c(0.5 * g_coh)
            - bath_up * c(0.5 * g_corr)
            - bath_down * c(0.5 * g_corr)
    }

    fn random_hermitian(d: usize, support: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        let mut x = DMatrix::<Complex64>::zeros(d, d);
        for n in 0..support {
            for m in 0..support {
                x[(n, m)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let rho = &x * x.adjoint();
        let tr = rho.trace();
        rho / tr
    }

    #[test]
    fn sparse_action_matches_dense_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs = GeneratorCoefficients {
            g_up: 0.7,
            g_down: 1.3,
            g_coh: -0.4,
            g_corr: 0.25,
        };
        let gen = Generator::new(coeffs, 9).unwrap();
        for _ in 0..10 {
            let rho = random_hermitian(9, 9, &mut rng);
            let sparse = gen.apply(&FockState::from_matrix(rho.clone()).unwrap());
            let dense = dense_generator(&coeffs, &rho);
            assert!((sparse.matrix - dense).camax() < 1e-12);
        }
    }

    #[test]
    fn generator_is_trace_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let gen = build_generator(&params(3.0, 0.2, 0.1, 0.6, 0.4), 10).unwrap();
        for _ in 0..100 {
            let rho = FockState::from_matrix(random_hermitian(10, 10, &mut rng)).unwrap();
            assert!(gen.apply(&rho).trace().norm() < 1e-12);
        }
    }

    #[test]
    fn generator_reproduces_langevin_drift() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = params(2.0, 0.2, 0.3, 0.4, 0.4);
        let dd = drift_diffusion(&p);
        let coeffs = GeneratorCoefficients::from_params(&p);
        let d = 16;
        let gen = Generator::new(coeffs, d).unwrap();
        let r = p.reservoir();
        let g = p.coefficients();
        // <f f> and <f f*> noise strengths
        let d_ff = p.kappa * r.correlation - p.gain * g.f / g.b;
        let d_ffs = p.gain * g.c / g.b + p.kappa * r.intensity;
        for _ in 0..20 {
            // support well inside the truncation so no operator hits the edge
            let rho = FockState::from_matrix(random_hermitian(d, 8, &mut rng)).unwrap();
            let now = moments_from_state(&rho);
            let rate = moments_from_state(&gen.apply(&rho));
            let expect_mean = now.mean * (-0.5 * dd.mu) + now.mean.conj() * dd.beta;
            assert!((rate.mean - expect_mean).norm() < 1e-10);
            let expect_sq = now.a_sq * (-dd.mu) + c(2.0 * dd.beta * now.n + d_ff);
            assert!((rate.a_sq - expect_sq).norm() < 1e-10);
            let expect_n = -dd.mu * now.n + dd.beta * 2.0 * now.a_sq.re + d_ffs;
            assert!((rate.n - expect_n).abs() < 1e-10);
        }
    }

    #[test]
    fn generator_rejects_tiny_dimension() {
        assert!(matches!(
            build_generator(&params(1.0, 0.2, 0.0, 0.0, 0.0), 1),
            Err(Error::Dimension(1))
        ));
    }

    #[test]
    fn pure_damping_keeps_vacuum() {
        let gen = build_generator(&params(0.0, 0.2, 0.0, 0.0, 0.0), 6).unwrap();
        let vac = FockState::vacuum(6).unwrap();
        assert!(gen.apply(&vac).matrix.camax() == 0.0);
        let out = evolve(&vac, &gen, 10.0, 0.01).unwrap();
        assert_eq!(out, vac);
    }

    #[test]
    fn zero_horizon_returns_input() {
        let gen = build_generator(&params(1.0, 0.2, 0.0, 0.0, 0.4), 8).unwrap();
        let s = FockState::number_state(8, 2).unwrap();
        assert_eq!(evolve(&s, &gen, 0.0, 1e-3).unwrap(), s);
    }

    #[test]
    fn evolve_guards() {
        let gen = build_generator(&params(1.0, 0.2, 0.0, 0.0, 0.4), 8).unwrap();
        let s = FockState::vacuum(8).unwrap();
        assert!(matches!(evolve(&s, &gen, 1.0, 1.0), Err(Error::StepSize { .. })));
        let bad = FockState::vacuum(6).unwrap();
        assert!(evolve(&bad, &gen, 1.0, 1e-3).is_err());
        // strong gain fills a small truncation
        let gen = build_generator(&params(0.0, 0.2, 0.0, 0.0, 3.0), 4).unwrap();
        let s = FockState::vacuum(4).unwrap();
        assert!(matches!(
            evolve(&s, &gen, 50.0, gen.max_step()),
            Err(Error::TruncationLeak { .. })
        ));
    }

    #[test]
    fn moments_of_simple_states() {
        let m = moments_from_state(&FockState::vacuum(5).unwrap());
        assert_eq!((m.mean, m.a_sq, m.n), (c(0.0), c(0.0), 0.0));
        let m = moments_from_state(&FockState::number_state(5, 1).unwrap());
        assert_eq!((m.mean, m.a_sq, m.n), (c(0.0), c(0.0), 1.0));
    }

    #[test]
    fn empty_cavity_relaxes_to_biased_gaussian() {
        let p = params(0.0, 0.2, 0.0, 0.0, 0.4);
        let gen = build_generator(&p, 40).unwrap();
        let vac = FockState::vacuum(40).unwrap();
        let out = evolve(&vac, &gen, 60.0 / 0.2, gen.max_step()).unwrap();
        let m = moments_from_state(&out);
        assert!((m.n - 0.4).abs() < 1e-6);
        assert!((m.a_sq.re - p.reservoir().correlation).abs() < 1e-6);
        assert!(out.hermiticity_error() < 1e-10);
        assert!((out.trace().re - 1.0).abs() < 1e-10);
        assert!(out.min_diagonal() > -1e-8);
    }

    #[test]
    fn step_halving_barely_moves_moments() {
        let p = params(1.0, 0.2, 0.2, 0.3, 0.2);
        let gen = build_generator(&p, 24).unwrap();
        let vac = FockState::vacuum(24).unwrap();
        let dt = gen.max_step();
        let a = moments_from_state(&evolve(&vac, &gen, 5.0, dt).unwrap());
        let b = moments_from_state(&evolve(&vac, &gen, 5.0, dt / 2.0).unwrap());
        assert!((a.n - b.n).abs() < 1e-9);
        assert!((a.a_sq - b.a_sq).norm() < 1e-9);
    }

    #[test]
    fn steady_state_matches_gaussian_fixed_point() {
        let p = params(0.0, 0.2, 0.0, 0.0, 0.4);
        let ss = steady_state(&p, 40).unwrap();
        assert_relative_eq!(ss.moments.n, 0.4, epsilon = 1e-8);
        assert_relative_eq!(ss.moments.a_sq.re, 0.748331477354788, epsilon = 1e-8);
        assert!(ss.max_trace_drift < 1e-10);
        assert!(ss.max_hermiticity_error < 1e-10);
    }

    #[test]
    fn scan_converges_for_empty_cavity() {
        let p = params(0.0, 0.2, 0.0, 0.0, 0.4);
        let scan = truncation_scan(&p, &[10, 20, 40, 60]).unwrap();
        assert_eq!(scan.converged_dim, Some(40));
        let p = params(0.0, 0.2, 0.0, 0.0, 0.0);
        let scan = truncation_scan(&p, &[2, 4, 8]).unwrap();
        assert_eq!(scan.converged_dim, Some(2));
    }

    #[test]
    fn scan_tail_decays_and_needs_more_levels_for_brighter_fields() {
        let p = params(1.0, 0.2, 0.0, 0.0, 1.0);
        let exact = crate::analytic::quad_moments_steady(&p).unwrap();
        let n_cav = crate::analytic::mean_photon_cavity(&exact);
        assert!(n_cav > 2.0 && n_cav < 4.0, "{n_cav}");
        let scan = truncation_scan(&p, &[20, 40, 80, 120]).unwrap();
        let tails: Vec<f64> = scan.rows.iter().map(|r| r.tail_population).collect();
        assert!(tails.windows(2).all(|w| w[1] < w[0]), "{tails:?}");
        let errs: Vec<f64> = scan.rows.iter().map(|r| (r.m_minus - exact.minus).abs()).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        // a strongly squeezed bright field is not converged to 1e-8 even at 120
        assert_eq!(scan.converged_dim, None);
        let dim_scan = truncation_scan(&params(0.5, 0.5, 0.5, 0.5, 0.1), &[10, 20, 40, 60]).unwrap();
        assert_eq!(dim_scan.converged_dim, Some(40));
    }

    #[test]
    fn direct_solve_agrees_with_propagation() {
        let p = params(1.5, 0.3, 0.2, 0.4, 0.2);
        let a = steady_state(&p, 30).unwrap();
        let b = steady_state_direct(&p, 30).unwrap();
        assert!((a.moments.n - b.moments.n).abs() < 1e-9);
        assert!((a.moments.a_sq - b.moments.a_sq).norm() < 1e-9);
        assert!(b.max_trace_drift < 1e-12);
        assert!(b.max_hermiticity_error < 1e-10);
    }

    #[test]
    fn scan_reports_leaks() {
        let p = params(0.0, 0.2, 0.0, 0.0, 3.0);
        assert!(matches!(
            truncation_scan(&p, &[4, 6]),
            Err(Error::NonConvergence { .. })
        ));
        assert!(truncation_scan(&p, &[6, 4]).is_err());
    }
}

//! Operating point, atomic preparation, reservoir moments and the drift and
//! diffusion rates of the cavity mode.
//!
//! All rates are measured in units of the atomic decay rate, so `omega` is
//! the ratio of drive amplitude to decay rate and `kappa` is dimensionless.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five physical knobs defining an operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Linear gain coefficient `A`.
    pub gain: f64,
    /// Cavity damping constant, in `(0, 1]`.
    pub kappa: f64,
    /// Superposition parameter, `rho_aa = (1 - eta) / 2`.
    pub eta: f64,
    /// Drive amplitude over atomic decay rate.
    pub omega: f64,
    /// Mean photon number `N` of the biased reservoir.
    pub noise: f64,
}

impl SystemParams {
    pub fn new(gain: f64, kappa: f64, eta: f64, omega: f64, noise: f64) -> Result<Self> {
        let p = SystemParams {
            gain,
            kappa,
            eta,
            omega,
            noise,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(Error::Domain {
                    name,
                    value,
                    reason,
                })
            }
        }
        check("A", self.gain, self.gain >= 0.0, "must be >= 0")?;
        check(
            "kappa",
            self.kappa,
            self.kappa > 0.0 && self.kappa <= 1.0,
            "must lie in (0, 1]",
        )?;
        check(
            "eta",
            self.eta,
            (-1.0..=1.0).contains(&self.eta),
            "must lie in [-1, 1]",
        )?;
        check("omega", self.omega, self.omega >= 0.0, "must be >= 0")?;
        check("N", self.noise, self.noise >= 0.0, "must be >= 0")?;
        Ok(())
    }

    pub fn preparation(&self) -> AtomicPreparation {
        atomic_preparation(self.eta).expect("validated eta")
    }

    pub fn reservoir(&self) -> ReservoirMoments {
        reservoir_moments(self.noise).expect("validated N")
    }

    pub fn coefficients(&self) -> GainCoefficients {
        gain_coefficients(&self.preparation(), self.omega)
    }
}

/// Initial atomic density matrix in the `{|a>, |c>}` subspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicPreparation {
    pub rho_aa: f64,
    pub rho_cc: f64,
    pub rho_ac: f64,
}

/// Pure superposition state parameterised by `eta`.
pub fn atomic_preparation(eta: f64) -> Result<AtomicPreparation> {
    if !(eta.is_finite() && (-1.0..=1.0).contains(&eta)) {
        return Err(Error::Domain {
            name: "eta",
            value: eta,
            reason: "must lie in [-1, 1]",
        });
    }
    // (1 - eta)(1 + eta) loses nothing at eta = +-1, unlike 1 - eta^2 near the ends.
    let coherence = ((1.0 - eta) * (1.0 + eta)).max(0.0).sqrt() / 2.0;
    Ok(AtomicPreparation {
        rho_aa: (1.0 - eta) / 2.0,
        rho_cc: (1.0 + eta) / 2.0,
        rho_ac: coherence,
    })
}

/// Intensity `N` and correlation `M` of the broadband biased reservoir.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservoirMoments {
    pub intensity: f64,
    pub correlation: f64,
}

pub fn reservoir_moments(n: f64) -> Result<ReservoirMoments> {
    if !(n.is_finite() && n >= 0.0) {
        return Err(Error::Domain {
            name: "N",
            value: n,
            reason: "must be >= 0",
        });
    }
    Ok(ReservoirMoments {
        intensity: n,
        correlation: (n * (n + 1.0)).sqrt(),
    })
}

/// The coefficients `B, C, D, E, F` of the reduced cavity dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainCoefficients {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

pub fn gain_coefficients(prep: &AtomicPreparation, omega: f64) -> GainCoefficients {
    let w = omega;
    let w2 = w * w;
    let AtomicPreparation {
        rho_aa,
        rho_cc,
        rho_ac,
    } = *prep;

    let b = (1.0 + w2) * (1.0 + w2 / 4.0);
    let c = rho_aa * (1.0 + w2 / 4.0) - rho_ac * 1.5 * w + rho_cc * 0.75 * w2;
    let d = rho_aa * 0.75 * w2 + rho_ac * 1.5 * w + rho_cc * (1.0 + w2 / 4.0);
    let e = -rho_aa * (w / 2.0) * (1.0 - w2 / 2.0) - rho_ac * (1.0 - w2 / 2.0)
        + rho_cc * w * (1.0 + w2 / 4.0);
    let f = -rho_aa * w * (1.0 + w2 / 4.0) - rho_ac * (1.0 - w2 / 2.0)
        + rho_cc * (w / 2.0) * (1.0 - w2 / 2.0);
    GainCoefficients { b, c, d, e, f }
}

/// Drift and diffusion of the cavity quadratures.
///
/// `alpha_+ = alpha* + alpha` relaxes at `lambda_minus`, `alpha_- = alpha* - alpha`
/// at `lambda_plus`. `diff_plus` and `diff_minus` are the diffusion strengths of
/// the real quadratures `x_+ = alpha* + alpha` and `x_- = i(alpha* - alpha)`, so
///
/// ```text
/// <alpha_+^2>_ss =  diff_plus  / lambda_minus
/// <alpha_-^2>_ss = -diff_minus / lambda_plus
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftDiffusion {
    pub mu: f64,
    pub beta: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub diff_plus: f64,
    pub diff_minus: f64,
    pub below_threshold: bool,
}

impl DriftDiffusion {
    /// Smallest of the two quadrature relaxation rates.
    pub fn slowest_rate(&self) -> f64 {
        self.lambda_plus.min(self.lambda_minus)
    }

    pub fn fastest_rate(&self) -> f64 {
        self.lambda_plus.abs().max(self.lambda_minus.abs())
    }

    pub fn require_below_threshold(&self) -> Result<()> {
        if self.below_threshold {
            Ok(())
        } else {
            Err(Error::AboveThreshold {
                lambda_plus: self.lambda_plus,
                lambda_minus: self.lambda_minus,
            })
        }
    }
}

pub fn drift_diffusion(params: &SystemParams) -> DriftDiffusion {
    let GainCoefficients { b, c, d, e, f } = params.coefficients();
    let ReservoirMoments {
        intensity: n,
        correlation: m,
    } = params.reservoir();
    let a = params.gain;
    let kappa = params.kappa;

    let mu = (a / b) * (d - c) + kappa;
    let beta = (a / (2.0 * b)) * (e - f);
    let lambda_plus = mu + 2.0 * beta;
    let lambda_minus = mu - 2.0 * beta;
    let diff_plus = 2.0 * ((a / b) * (c - f) + kappa * (n + m));
    let diff_minus = 2.0 * ((a / b) * (c + f) + kappa * (n - m));

    DriftDiffusion {
        mu,
        beta,
        lambda_plus,
        lambda_minus,
        diff_plus,
        diff_minus,
        below_threshold: lambda_plus > 0.0 && lambda_minus > 0.0,
    }
}

/// True iff `mu > 2|beta|`, i.e. both quadrature relaxation rates are positive.
pub fn check_threshold(params: &SystemParams) -> bool {
    drift_diffusion(params).below_threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(a: f64, kappa: f64, eta: f64, omega: f64, n: f64) -> SystemParams {
        SystemParams::new(a, kappa, eta, omega, n).unwrap()
    }

    #[test]
    fn preparation_at_known_points() {
        let p = atomic_preparation(0.0).unwrap();
        assert_eq!((p.rho_aa, p.rho_cc, p.rho_ac), (0.5, 0.5, 0.5));
        let p = atomic_preparation(1.0).unwrap();
        assert_eq!((p.rho_aa, p.rho_cc, p.rho_ac), (0.0, 1.0, 0.0));
        let p = atomic_preparation(-1.0).unwrap();
        assert_eq!((p.rho_aa, p.rho_cc, p.rho_ac), (1.0, 0.0, 0.0));
    }

    #[test]
    fn preparation_rejects_out_of_range() {
        assert!(matches!(
            atomic_preparation(1.0001),
            Err(Error::Domain { name: "eta", .. })
        ));
        assert!(atomic_preparation(f64::NAN).is_err());
    }

    #[test]
    fn reservoir_correlation() {
        assert_eq!(reservoir_moments(0.0).unwrap().correlation, 0.0);
        // sqrt(0.56) and sqrt(0.11) to 12 digits
        assert_relative_eq!(
            reservoir_moments(0.4).unwrap().correlation,
            0.748331477354788,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            reservoir_moments(0.1).unwrap().correlation,
            0.331662479035540,
            epsilon = 1e-12
        );
        assert!(reservoir_moments(-0.1).is_err());
    }

    #[test]
    fn coefficients_without_drive() {
        let prep = atomic_preparation(0.25).unwrap();
        let g = gain_coefficients(&prep, 0.0);
        assert_eq!(g.b, 1.0);
        assert_relative_eq!(g.c, 0.375, epsilon = 1e-15);
        assert_relative_eq!(g.d, 0.625, epsilon = 1e-15);
        let coh = -(1.0f64 - 0.0625).sqrt() / 2.0;
        assert_relative_eq!(g.e, coh, epsilon = 1e-15);
        assert_relative_eq!(g.f, coh, epsilon = 1e-15);
        assert_relative_eq!(g.e, -0.484122918275927, epsilon = 1e-12);

        let g = gain_coefficients(&atomic_preparation(1.0).unwrap(), 0.0);
        assert_eq!((g.c, g.d, g.e, g.f), (0.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn coefficient_b_at_unit_drive() {
        for eta in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            let g = gain_coefficients(&atomic_preparation(eta).unwrap(), 1.0);
            assert_eq!(g.b, 2.5);
        }
    }

    #[test]
    fn drift_without_drive() {
        let dd = drift_diffusion(&params(10.0, 0.2, 0.25, 0.0, 0.4));
        assert_relative_eq!(dd.mu, 2.7, epsilon = 1e-14);
        assert_eq!(dd.beta, 0.0);
        assert_relative_eq!(dd.lambda_plus, 2.7, epsilon = 1e-14);
        assert_relative_eq!(dd.lambda_minus, 2.7, epsilon = 1e-14);
        assert!(dd.below_threshold);

        let dd = drift_diffusion(&params(10.0, 0.2, -0.1, 0.0, 0.0));
        assert_relative_eq!(dd.mu, -0.8, epsilon = 1e-14);
        assert!(!dd.below_threshold);
        assert!(!check_threshold(&params(10.0, 0.2, -0.1, 0.0, 0.0)));
        assert!(check_threshold(&params(10.0, 0.2, 0.25, 0.0, 0.0)));
    }

    #[test]
    fn empty_cavity_drift() {
        let p = params(0.0, 0.2, 0.3, 1.7, 0.4);
        let dd = drift_diffusion(&p);
        let m = p.reservoir().correlation;
        assert_eq!(dd.mu, 0.2);
        assert_eq!(dd.beta, 0.0);
        assert_relative_eq!(dd.diff_plus, 2.0 * 0.2 * (0.4 + m), epsilon = 1e-15);
        assert_relative_eq!(dd.diff_minus, 2.0 * 0.2 * (0.4 - m), epsilon = 1e-15);
        assert!(dd.below_threshold);
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::new(1.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(SystemParams::new(1.0, 1.0, 0.0, 0.0, 0.0).is_ok());
        assert!(SystemParams::new(1.0, 1.1, 0.0, 0.0, 0.0).is_err());
        assert!(SystemParams::new(-1.0, 0.2, 0.0, 0.0, 0.0).is_err());
        assert!(SystemParams::new(1.0, 0.2, 0.0, -0.1, 0.0).is_err());
        assert!(SystemParams::new(1.0, 0.2, 0.0, 0.0, -0.1).is_err());
        assert!(SystemParams::new(f64::INFINITY, 0.2, 0.0, 0.0, 0.0).is_err());
    }

    fn any_params() -> impl Strategy<Value = SystemParams> {
        (0.0..100.0f64, 0.001..=1.0f64, -1.0..=1.0f64, 0.0..30.0f64, 0.0..10.0f64)
            .prop_map(|(a, k, e, w, n)| SystemParams::new(a, k, e, w, n).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn c_plus_d_identity(p in any_params()) {
            let g = p.coefficients();
            let w2 = p.omega * p.omega;
            prop_assert!((g.c + g.d - (1.0 + w2)).abs() <= 1e-13 * (1.0 + w2));
        }

        #[test]
        fn e_minus_f_identity(p in any_params()) {
            let g = p.coefficients();
            let w = p.omega;
            let expected = (w / 2.0) * (1.0 + w * w);
            prop_assert!((g.e - g.f - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
        }

        #[test]
        fn b_at_least_one(p in any_params()) {
            prop_assert!(p.coefficients().b >= 1.0);
        }

        #[test]
        fn preparation_is_pure(eta in -1.0..=1.0f64) {
            let p = atomic_preparation(eta).unwrap();
            prop_assert_eq!(p.rho_aa + p.rho_cc, 1.0);
            prop_assert!((p.rho_ac * p.rho_ac - p.rho_aa * p.rho_cc).abs() < 1e-15);
        }

        #[test]
        fn relaxation_rates(p in any_params()) {
            let dd = drift_diffusion(&p);
            let tol = 1e-12 * (1.0 + dd.mu.abs() + dd.beta.abs());
            prop_assert!((dd.lambda_plus + dd.lambda_minus - 2.0 * dd.mu).abs() < tol);
            prop_assert!((dd.lambda_plus - dd.lambda_minus - 4.0 * dd.beta).abs() < tol);
            let prod = dd.lambda_plus * dd.lambda_minus;
            let expected = dd.mu * dd.mu - 4.0 * dd.beta * dd.beta;
            prop_assert!((prod - expected).abs() <= 1e-10 * (1.0 + dd.mu * dd.mu + 4.0 * dd.beta * dd.beta));
            prop_assert_eq!(dd.below_threshold, dd.mu > 2.0 * dd.beta.abs());
        }

        #[test]
        fn correlation_dominates_intensity(n in 0.0..1e6f64) {
            let r = reservoir_moments(n).unwrap();
            prop_assert!(r.correlation >= r.intensity);
            if n > 0.0 {
                prop_assert!(r.correlation > r.intensity);
            }
        }
    }
}

//! Flow parameters and the regime split.
//!
//! The speed is r^{alpha/beta} * sigma_k^{1/beta} with beta > 0 and
//! 1 <= k <= n. The normalized flow adds the forcing gamma X with
//! gamma = C(n,k)^{1/beta}, which makes the unit sphere stationary.
//! Everything downstream is organized around the sign of
//! s = (alpha - beta - k) / beta: round spheres obey da/dt = gamma (a - a^{1+s})
//! under the normalized flow, so s < 0 (sub), s = 0 (critical) and s > 0
//! (super) behave qualitatively differently.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symfun::binomial;

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("dimension n must be at least 1, got {0}")]
    BadDimension(usize),
    #[error("curvature order k must satisfy 1 <= k <= n, got k={k} with n={n}")]
    BadOrder { k: usize, n: usize },
    #[error("beta must be positive and finite, got {0}")]
    BadBeta(f64),
    #[error("alpha must be finite, got {0}")]
    BadAlpha(f64),
}

/// Sign of alpha - beta - k, the exponent that separates the qualitative
/// behaviors of the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Sub,
    Critical,
    Super,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Sub => "sub",
            Regime::Critical => "critical",
            Regime::Super => "super",
        }
    }
}

/// Whether the global forcing term gamma X is included in the motion law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Normalized,
    Unnormalized,
}

/// Validated parameter set (n, k, alpha, beta) plus cached derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    n: usize,
    k: usize,
    alpha: f64,
    beta: f64,
    gamma: f64,
    // alpha/beta - 1, the exponent of r multiplying the graph speed
    speed_exp: f64,
    // (alpha - beta - k)/beta, the regime exponent s
    regime_exp: f64,
    inv_beta: f64,
}

impl FlowParams {
    pub fn new(n: usize, k: usize, alpha: f64, beta: f64) -> Result<Self, ParamsError> {
        if n < 1 {
            return Err(ParamsError::BadDimension(n));
        }
        if k < 1 || k > n {
            return Err(ParamsError::BadOrder { k, n });
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(ParamsError::BadBeta(beta));
        }
        if !alpha.is_finite() {
            return Err(ParamsError::BadAlpha(alpha));
        }
        let gamma = pow_real(binomial(n, k), 1.0 / beta);
        Ok(FlowParams {
            n,
            k,
            alpha,
            beta,
            gamma,
            speed_exp: alpha / beta - 1.0,
            regime_exp: (alpha - beta - k as f64) / beta,
            inv_beta: 1.0 / beta,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// C(n,k)^{1/beta}; the forcing strength that holds the unit sphere fixed.
    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// alpha/beta - 1.
    #[inline]
    pub fn speed_exp(&self) -> f64 {
        self.speed_exp
    }

    /// s = (alpha - beta - k)/beta.
    #[inline]
    pub fn regime_exp(&self) -> f64 {
        self.regime_exp
    }

    #[inline]
    pub fn inv_beta(&self) -> f64 {
        self.inv_beta
    }

    /// Classification is exact: configurations hitting the critical line do so
    /// with representable values (e.g. alpha = 2, beta = k = 1).
    pub fn regime(&self) -> Regime {
        if self.regime_exp == 0.0 {
            Regime::Critical
        } else if self.regime_exp < 0.0 {
            Regime::Sub
        } else {
            Regime::Super
        }
    }
}

/// x^e with exact fast paths for the exponents that dominate the hot loops.
/// Callers guarantee x > 0 whenever e is fractional.
#[inline]
pub(crate) fn pow_real(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else if e == 0.5 {
        x.sqrt()
    } else if e == -0.5 {
        1.0 / x.sqrt()
    } else if e == -1.0 {
        1.0 / x
    } else if e == 1.5 {
        x * x.sqrt()
    } else if e == 3.0 {
        x * x * x
    } else {
        x.powf(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(FlowParams::new(2, 1, 3.0, 1.0).is_ok());
        assert_eq!(FlowParams::new(0, 1, 3.0, 1.0), Err(ParamsError::BadDimension(0)));
        assert_eq!(
            FlowParams::new(2, 3, 3.0, 1.0),
            Err(ParamsError::BadOrder { k: 3, n: 2 })
        );
        assert_eq!(FlowParams::new(2, 1, 3.0, 0.0), Err(ParamsError::BadBeta(0.0)));
        assert!(FlowParams::new(2, 1, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn gamma_values() {
        // C(2,1) = 2, beta = 1
        assert_eq!(FlowParams::new(2, 1, 3.0, 1.0).unwrap().gamma(), 2.0);
        // C(2,2) = 1, beta = 2
        assert_eq!(FlowParams::new(2, 2, 4.0, 2.0).unwrap().gamma(), 1.0);
        // C(4,2) = 6, beta = 2 -> sqrt(6)
        let p = FlowParams::new(4, 2, 1.0, 2.0).unwrap();
        assert!((p.gamma() - 6.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn regime_split() {
        assert_eq!(FlowParams::new(2, 1, 1.5, 1.0).unwrap().regime(), Regime::Sub);
        assert_eq!(FlowParams::new(2, 1, 2.0, 1.0).unwrap().regime(), Regime::Critical);
        assert_eq!(FlowParams::new(2, 1, 3.0, 1.0).unwrap().regime(), Regime::Super);
        assert_eq!(FlowParams::new(2, 2, 4.0, 2.0).unwrap().regime(), Regime::Critical);
    }

    #[test]
    fn pow_real_fast_paths_match_powf() {
        for &e in &[0.0, 1.0, 2.0, 0.5, -0.5, -1.0, 1.5, 3.0, 0.7, -2.3] {
            for &x in &[0.3, 1.0, 2.7] {
                let got = pow_real(x, e);
                let want = (x as f64).powf(e);
                assert!(
                    (got - want).abs() <= 1e-15 * want.abs().max(1.0),
                    "x={x} e={e}: {got} vs {want}"
                );
            }
        }
    }
}

//! Closed-form coefficient functions of both models in nondimensional
//! variables. The checked functions reject negative arguments; the
//! `unchecked` variants are what the discretization evaluates, since states
//! may carry round-off negatives down to the configured tolerance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("coefficient `{function}` called with negative or non-finite argument {arg} = {value}")]
pub struct DomainError {
    pub function: &'static str,
    pub arg: &'static str,
    pub value: f64,
}

fn check(function: &'static str, args: &[(&'static str, f64)]) -> Result<(), DomainError> {
    for &(arg, value) in args {
        if !(value.is_finite() && value >= 0.0) {
            return Err(DomainError {
                function,
                arg,
                value,
            });
        }
    }
    Ok(())
}

/// Receptor binding kinetics behind the necrotic-matter sensing function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceptorKinetics {
    /// Association/dissociation ratio `k+ / k-`.
    pub k_ratio: f64,
    /// Total receptor count.
    pub r_total: f64,
    /// Proportionality between bound receptors and the sensed signal.
    pub b: f64,
}

impl Default for ReceptorKinetics {
    fn default() -> Self {
        Self {
            k_ratio: 1.0,
            r_total: 1.0,
            b: 1.0,
        }
    }
}

impl ReceptorKinetics {
    /// Saturation level `b K R_T` of the sensing function.
    pub fn gain(&self) -> f64 {
        self.b * self.k_ratio * self.r_total
    }
}

pub mod unchecked {
    use super::ReceptorKinetics;

    #[inline]
    pub fn a_sens(v: f64, n: f64) -> f64 {
        let s = 1.0 + n + v;
        1.0 / (s * s)
    }

    #[inline]
    pub fn receptor_steady(v: f64, n: f64) -> f64 {
        let s = n + v;
        s / (s + 1.0)
    }

    #[inline]
    pub fn growth(u: f64, v: f64, n: f64) -> f64 {
        n / (1.0 + n) * u * (1.0 - u - v - n)
    }

    #[inline]
    pub fn d_u_nl(u: f64, v: f64, dt: f64) -> f64 {
        let s = 1.0 + u * v;
        dt / (s * s)
    }

    #[inline]
    pub fn chi1_nl(u: f64, v: f64, dt: f64) -> f64 {
        let s = 1.0 + u * v;
        dt * u * u / (s * s)
    }

    #[inline]
    pub fn chi2_nl(u: f64, n: f64, chin: f64) -> f64 {
        let s = 1.0 + n;
        chin * u / (s * s * (1.0 + u * n))
    }

    #[inline]
    pub fn kappa(u: f64, n: f64) -> f64 {
        1.0 / (1.0 + u * n)
    }

    #[inline]
    pub fn a_bar(u: f64, v: f64) -> f64 {
        1.0 / (1.0 + u * v)
    }

    #[inline]
    pub fn tau(n: f64, rk: &ReceptorKinetics) -> f64 {
        rk.gain() * n / (1.0 + rk.k_ratio * n)
    }

    #[inline]
    pub fn dtau_dn(n: f64, rk: &ReceptorKinetics) -> f64 {
        let s = 1.0 + rk.k_ratio * n;
        rk.gain() / (s * s)
    }
}

/// Haptotactic sensitivity factor `1 / (1 + n + v)^2`.
pub fn a_sens(v: f64, n: f64) -> Result<f64, DomainError> {
    check("a_sens", &[("v", v), ("n", n)])?;
    Ok(unchecked::a_sens(v, n))
}

/// Steady fraction of occupied receptors, `(n + v) / (n + v + 1)`.
pub fn receptor_steady(v: f64, n: f64) -> Result<f64, DomainError> {
    check("receptor_steady", &[("v", v), ("n", n)])?;
    Ok(unchecked::receptor_steady(v, n))
}

pub fn dystar_dn(v: f64, n: f64) -> Result<f64, DomainError> {
    check("dystar_dn", &[("v", v), ("n", n)])?;
    Ok(unchecked::a_sens(v, n))
}

pub fn dystar_dv(v: f64, n: f64) -> Result<f64, DomainError> {
    check("dystar_dv", &[("v", v), ("n", n)])?;
    Ok(unchecked::a_sens(v, n))
}

/// Necrosis-gated logistic growth `n/(1+n) u (1 - u - v - n)`.
pub fn growth(u: f64, v: f64, n: f64) -> Result<f64, DomainError> {
    check("growth", &[("u", u), ("v", v), ("n", n)])?;
    Ok(unchecked::growth(u, v, n))
}

/// Density-dependent diffusivity of the position-jump model.
pub fn d_u_nl(u: f64, v: f64, dt: f64) -> Result<f64, DomainError> {
    check("d_u_nl", &[("u", u), ("v", v), ("dt", dt)])?;
    Ok(unchecked::d_u_nl(u, v, dt))
}

/// Coefficient of `grad v` in the position-jump bacteria flux.
pub fn chi1_nl(u: f64, v: f64, dt: f64) -> Result<f64, DomainError> {
    check("chi1_nl", &[("u", u), ("v", v), ("dt", dt)])?;
    Ok(unchecked::chi1_nl(u, v, dt))
}

/// Coefficient of `grad n` in the position-jump bacteria flux.
pub fn chi2_nl(u: f64, n: f64, chin: f64) -> Result<f64, DomainError> {
    check("chi2_nl", &[("u", u), ("n", n), ("chin", chin)])?;
    Ok(unchecked::chi2_nl(u, n, chin))
}

/// Damping of necrotic-matter sensing by bound bacteria, `1 / (1 + u n)`.
pub fn kappa(u: f64, n: f64) -> Result<f64, DomainError> {
    check("kappa", &[("u", u), ("n", n)])?;
    Ok(unchecked::kappa(u, n))
}

/// Crowding factor of the jump rates, `1 / (1 + u v)`.
pub fn a_bar(u: f64, v: f64) -> Result<f64, DomainError> {
    check("a_bar", &[("u", u), ("v", v)])?;
    Ok(unchecked::a_bar(u, v))
}

/// Sensed signal `b R_0*` with `R_0* = K R_T n / (1 + K n)`.
pub fn tau(n: f64, rk: &ReceptorKinetics) -> Result<f64, DomainError> {
    check("tau", &[("n", n)])?;
    Ok(unchecked::tau(n, rk))
}

pub fn dtau_dn(n: f64, rk: &ReceptorKinetics) -> Result<f64, DomainError> {
    check("dtau_dn", &[("n", n)])?;
    Ok(unchecked::dtau_dn(n, rk))
}

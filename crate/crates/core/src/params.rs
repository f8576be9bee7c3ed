//! Dimensional parameter set and its two nondimensional reductions.
//!
//! Lengths are scaled by `sqrt(D_m / alpha_u)`, times by `1 / alpha_u` and
//! every density by its carrying capacity. The linear (kinetic) model and the
//! nonlinear (position-jump) model share all reaction coefficients and differ
//! only in the motility terms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter `{field}` must be strictly positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("parameter `{field}` must be finite and nonnegative, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("parameter `{field}` = {value} outside admissible range [{lo}, {hi}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// Physical parameter set. Units follow the field docs; `gamma3` is already
/// dimensionless and is passed through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DimensionalParams {
    /// Bacteria diffusivity [mm^2/h].
    #[serde(alias = "D_u")]
    pub d_u: f64,
    /// Mycolactone diffusivity [mm^2/h].
    #[serde(alias = "D_m")]
    pub d_m: f64,
    /// Mycolactone production rate [1/h].
    pub delta: f64,
    /// Mycolactone decay rate [1/h].
    pub lambda_decay: f64,
    /// Tissue necrotisation rate [1/h].
    pub beta1: f64,
    /// Necrotic matter production rate [1/h].
    pub beta2: f64,
    /// Necrotic matter decay rate [1/h].
    pub gamma_n: f64,
    /// Bacteria proliferation rate [1/h].
    pub alpha_u: f64,
    /// Haptotactic sensitivity towards necrotic matter [h].
    pub gamma1: f64,
    /// Haptotactic sensitivity towards normal tissue [h].
    pub gamma2: f64,
    /// Chemotactic sensitivity towards mycolactone [-].
    pub gamma3: f64,
    /// Baseline turning rate [1/h].
    pub eta0: f64,
    #[serde(alias = "K_U")]
    pub k_u: f64,
    #[serde(alias = "K_V")]
    pub k_v: f64,
    #[serde(alias = "K_N")]
    pub k_n: f64,
    #[serde(alias = "K_M")]
    pub k_m: f64,
    /// Macroscopic diffusivity of the position-jump process [mm^2/h].
    /// Defaults to `2 d_u`, which gives both models the same bacteria
    /// diffusivity where `u v = 0`.
    #[serde(alias = "D_jump")]
    pub d_jump: f64,
    /// Lumped receptor taxis constant `D b K R_T` [mm^2/h]; defaults to
    /// `d_jump` (unit receptor constants).
    #[serde(alias = "K1")]
    pub k1: f64,
    /// Admissible interval for `gamma1` and `gamma2`.
    pub sensitivity_range: [f64; 2],
}

impl Default for DimensionalParams {
    fn default() -> Self {
        Self {
            d_u: 1e-4,
            d_m: 0.086,
            delta: 1.0,
            lambda_decay: 0.1,
            beta1: 0.3,
            beta2: 0.3,
            gamma_n: 3e-4,
            alpha_u: 0.005,
            gamma1: 1e-5,
            gamma2: 1e-5,
            gamma3: 1e-4,
            eta0: 10.0,
            k_u: 1e4,
            k_v: 1e4,
            k_n: 1e4,
            k_m: 1e4,
            d_jump: 2e-4,
            k1: 2e-4,
            sensitivity_range: [0.0, 1.0],
        }
    }
}

impl DimensionalParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let positive: [(&'static str, f64); 15] = [
            ("d_u", self.d_u),
            ("d_m", self.d_m),
            ("delta", self.delta),
            ("lambda_decay", self.lambda_decay),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("gamma_n", self.gamma_n),
            ("alpha_u", self.alpha_u),
            ("eta0", self.eta0),
            ("k_u", self.k_u),
            ("k_v", self.k_v),
            ("k_n", self.k_n),
            ("k_m", self.k_m),
            ("d_jump", self.d_jump),
            ("k1", self.k1),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamError::NonPositive { field, value });
            }
        }
        if !(self.gamma3.is_finite() && self.gamma3 >= 0.0) {
            return Err(ParamError::Negative {
                field: "gamma3",
                value: self.gamma3,
            });
        }
        let [lo, hi] = self.sensitivity_range;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
            return Err(ParamError::OutOfRange {
                field: "sensitivity_range",
                value: lo,
                lo: 0.0,
                hi,
            });
        }
        for (field, value) in [("gamma1", self.gamma1), ("gamma2", self.gamma2)] {
            if !(value.is_finite() && value >= lo && value <= hi) {
                return Err(ParamError::OutOfRange {
                    field,
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }
}

/// Coefficients of the dimensionless systems. Fields that do not belong to a
/// model are zero in that model's reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NondimParams {
    /// Bacteria diffusivity relative to mycolactone diffusivity.
    pub du: f64,
    /// Sensitivity towards necrotic matter, `gamma1 * eta0`.
    pub g1: f64,
    /// Sensitivity towards normal tissue, `gamma2 * eta0`.
    pub g2: f64,
    /// Chemotactic sensitivity towards mycolactone.
    pub g3: f64,
    pub delta: f64,
    pub lambda: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    /// Position-jump diffusivity `D / (2 D_m)`.
    pub d_jump: f64,
    /// Receptor taxis constant `K1 / D_m`.
    pub chi_n: f64,
}

impl NondimParams {
    /// Sup bound on mycolactone generated by the source term alone.
    /// Infinite when mycolactone is produced but never degraded.
    pub fn mycolactone_ceiling(&self) -> f64 {
        if self.delta == 0.0 {
            0.0
        } else {
            self.delta / self.lambda
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.du.is_finite() && self.du > 0.0) {
            return Err(ParamError::NonPositive {
                field: "du",
                value: self.du,
            });
        }
        for (field, value) in [
            ("lambda", self.lambda),
            ("beta1", self.beta1),
            ("g1", self.g1),
            ("g2", self.g2),
            ("g3", self.g3),
            ("delta", self.delta),
            ("beta2", self.beta2),
            ("gamma", self.gamma),
            ("d_jump", self.d_jump),
            ("chi_n", self.chi_n),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ParamError::Negative { field, value });
            }
        }
        Ok(())
    }
}

struct Reactions {
    delta: f64,
    lambda: f64,
    beta1: f64,
    beta2: f64,
    gamma: f64,
}

fn reactions(p: &DimensionalParams) -> Reactions {
    Reactions {
        delta: p.delta / (p.k_m * p.alpha_u),
        lambda: p.lambda_decay / p.alpha_u,
        beta1: p.beta1 / p.alpha_u,
        beta2: p.beta2 / (p.k_n * p.alpha_u),
        gamma: p.gamma_n / p.alpha_u,
    }
}

/// Coefficients of the kinetic-transport model with constant bacteria motility.
pub fn nondimensionalize_linear(p: &DimensionalParams) -> Result<NondimParams, ParamError> {
    p.validate()?;
    let r = reactions(p);
    Ok(NondimParams {
        du: p.d_u / p.d_m,
        g1: p.gamma1 * p.eta0,
        g2: p.gamma2 * p.eta0,
        g3: p.gamma3,
        delta: r.delta,
        lambda: r.lambda,
        beta1: r.beta1,
        beta2: r.beta2,
        gamma: r.gamma,
        d_jump: 0.0,
        chi_n: 0.0,
    })
}

/// Coefficients of the position-jump model. The linear-model motility fields
/// are kept so one coefficient set can drive either model.
pub fn nondimensionalize_nonlinear(p: &DimensionalParams) -> Result<NondimParams, ParamError> {
    let mut np = nondimensionalize_linear(p)?;
    np.d_jump = p.d_jump / (2.0 * p.d_m);
    np.chi_n = p.k1 / p.d_m;
    Ok(np)
}

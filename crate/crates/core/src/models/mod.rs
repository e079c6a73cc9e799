//! Coefficient bundles `(μ, σ², ν)` for the supported dynamics.

mod jumps;
mod special;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use jumps::{DensityFn, DensityJumps, JumpMeasure, KouJumps, VgJumps};
pub use special::exp_integral_e1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coordinate {
    /// State is the asset price `S`.
    PriceSpace,
    /// State is `ln S`.
    LogSpace,
}

impl Coordinate {
    pub fn from_price(self, s: f64) -> f64 {
        match self {
            Self::PriceSpace => s,
            Self::LogSpace => s.ln(),
        }
    }

    pub fn to_price(self, y: f64) -> f64 {
        match self {
            Self::PriceSpace => y,
            Self::LogSpace => y.exp(),
        }
    }
}

pub type CoefFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Drift, diffusion and jump coefficients of a one-dimensional Markov model.
///
/// `drift` is the coefficient `b` of the decomposition
/// `dX = b dt + σ dW + ∫ z N(dt, dz)`, i.e. jumps are not compensated. The
/// truncated-compensator drift used by the generator construction is
/// [`ModelSpec::generator_drift`].
#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    drift: CoefFn,
    diffusion_sq: CoefFn,
    jump_measure: Option<Arc<dyn JumpMeasure>>,
    pub coordinate: Coordinate,
    pub time_homogeneous: bool,
    /// Continuously compounded short rate used for discounting.
    pub rate: f64,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("coordinate", &self.coordinate)
            .field("time_homogeneous", &self.time_homogeneous)
            .field("jumps", &self.jump_measure)
            .field("rate", &self.rate)
            .finish()
    }
}

impl ModelSpec {
    pub fn new(
        name: impl Into<String>,
        drift: CoefFn,
        diffusion_sq: CoefFn,
        jump_measure: Option<Arc<dyn JumpMeasure>>,
        coordinate: Coordinate,
        time_homogeneous: bool,
        rate: f64,
    ) -> Self {
        Self {
            name: name.into(),
            drift,
            diffusion_sq,
            jump_measure,
            coordinate,
            time_homogeneous,
            rate,
        }
    }

    pub fn drift(&self, t: f64, x: f64) -> f64 {
        (self.drift)(t, x)
    }

    pub fn diffusion_sq(&self, t: f64, x: f64) -> f64 {
        (self.diffusion_sq)(t, x)
    }

    pub fn jump_measure(&self) -> Option<&dyn JumpMeasure> {
        self.jump_measure.as_deref()
    }

    /// `μ = b + ∫_{|z|≤1} z ν(dz)`, the drift paired with the compensator
    /// `z 1{|z|≤1} ∂ₓ` in the generator.
    pub fn generator_drift(&self, t: f64, x: f64) -> f64 {
        let b = self.drift(t, x);
        match self.jump_measure() {
            Some(m) => b + m.truncated_first_moment(t, x, -1.0, 1.0),
            None => b,
        }
    }

    pub fn is_pure_diffusion(&self) -> bool {
        self.jump_measure.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsParams {
    pub sigma: f64,
    pub r_f: f64,
    #[serde(default)]
    pub dividend: f64,
    /// Build the chain on `ln S` instead of `S`.
    #[serde(default)]
    pub log_space: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KouParams {
    pub sigma: f64,
    pub lambda: f64,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub r_f: f64,
    #[serde(default)]
    pub dividend: f64,
}

impl KouParams {
    /// `E[e^V] - 1` for the double-exponential jump size `V`.
    pub fn zeta(&self) -> f64 {
        self.p_plus * self.eta_plus / (self.eta_plus - 1.0) + self.p_minus * self.eta_minus / (self.eta_minus + 1.0) - 1.0
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.sigma, self.lambda, self.eta_plus, self.eta_minus, self.p_plus, self.p_minus];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("Kou parameters must be positive and finite".into()));
        }
        if (self.p_plus + self.p_minus - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("Kou jump probabilities must sum to one".into()));
        }
        if self.eta_plus <= 1.0 {
            return Err(Error::InvalidParameter("Kou eta_plus must exceed one".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgParams {
    pub sigma: f64,
    pub nu: f64,
    pub theta: f64,
    pub r_f: f64,
    #[serde(default)]
    pub dividend: f64,
}

impl VgParams {
    /// Martingale correction `ln(1 - θν - σ²ν/2) / ν`.
    pub fn omega(&self) -> f64 {
        (1.0 - self.theta * self.nu - 0.5 * self.sigma * self.sigma * self.nu).ln() / self.nu
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !(self.nu > 0.0) || !self.theta.is_finite() {
            return Err(Error::InvalidParameter("VG requires sigma > 0, nu > 0, finite theta".into()));
        }
        if 1.0 - self.theta * self.nu - 0.5 * self.sigma * self.sigma * self.nu <= 0.0 {
            return Err(Error::InvalidParameter("VG martingale correction is undefined".into()));
        }
        Ok(())
    }
}

/// Black–Scholes in price space: `μ = (r_f - d) x`, `σ² x²`.
pub fn bs_model(r_f: f64, d: f64, sigma: f64) -> Result<ModelSpec> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("volatility must be positive, got {sigma}")));
    }
    let mu = r_f - d;
    let s2 = sigma * sigma;
    Ok(ModelSpec::new(
        "bs",
        Arc::new(move |_, x| mu * x),
        Arc::new(move |_, x| s2 * x * x),
        None,
        Coordinate::PriceSpace,
        true,
        r_f,
    ))
}

/// Black–Scholes in log-price: `μ = r_f - d - σ²/2`, constant `σ²`.
pub fn bs_log_model(r_f: f64, d: f64, sigma: f64) -> Result<ModelSpec> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("volatility must be positive, got {sigma}")));
    }
    let s2 = sigma * sigma;
    let b = r_f - d - 0.5 * s2;
    Ok(ModelSpec::new(
        "bs",
        Arc::new(move |_, _| b),
        Arc::new(move |_, _| s2),
        None,
        Coordinate::LogSpace,
        true,
        r_f,
    ))
}

/// Kou's double-exponential jump diffusion in log-price.
pub fn kou_model(p: &KouParams) -> Result<ModelSpec> {
    p.validate()?;
    let b = p.r_f - p.dividend - p.lambda * p.zeta() - 0.5 * p.sigma * p.sigma;
    let s2 = p.sigma * p.sigma;
    Ok(ModelSpec::new(
        "kou",
        Arc::new(move |_, _| b),
        Arc::new(move |_, _| s2),
        Some(Arc::new(KouJumps::new(p.lambda, p.p_plus, p.eta_plus, p.eta_minus))),
        Coordinate::LogSpace,
        true,
        p.r_f,
    ))
}

/// Variance gamma in log-price; a pure-jump model with infinite activity.
pub fn vg_model(p: &VgParams) -> Result<ModelSpec> {
    p.validate()?;
    let b = p.r_f - p.dividend + p.omega();
    Ok(ModelSpec::new(
        "vg",
        Arc::new(move |_, _| b),
        Arc::new(|_, _| 0.0),
        Some(Arc::new(VgJumps::new(p.sigma, p.nu, p.theta))),
        Coordinate::LogSpace,
        true,
        p.r_f,
    ))
}

/// Parameters of one of the built-in families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelParams {
    Bs(BsParams),
    Kou(KouParams),
    Vg(VgParams),
}

impl ModelParams {
    pub fn build(&self) -> Result<ModelSpec> {
        match self {
            Self::Bs(p) if p.log_space => bs_log_model(p.r_f, p.dividend, p.sigma),
            Self::Bs(p) => bs_model(p.r_f, p.dividend, p.sigma),
            Self::Kou(p) => kou_model(p),
            Self::Vg(p) => vg_model(p),
        }
    }

    pub fn rate(&self) -> f64 {
        match self {
            Self::Bs(p) => p.r_f,
            Self::Kou(p) => p.r_f,
            Self::Vg(p) => p.r_f,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Bs(_) => "bs",
            Self::Kou(_) => "kou",
            Self::Vg(_) => "vg",
        }
    }
}

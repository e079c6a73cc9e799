//! Contract terms: payoff, barrier, window, maturity and discounting.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    DownIn,
    DownOut,
}

impl std::str::FromStr for Flavor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "down-in" | "in" => Ok(Self::DownIn),
            "down-out" | "out" => Ok(Self::DownOut),
            other => Err(Error::InvalidParameter(format!("unknown flavor '{other}'"))),
        }
    }
}

/// Payoff as a function of the asset price.
#[derive(Clone)]
pub enum Payoff {
    Call(f64),
    Put(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Call(k) => write!(f, "Call({k})"),
            Self::Put(k) => write!(f, "Put({k})"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Payoff {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Self::Call(k) => (s - k).max(0.0),
            Self::Put(k) => (k - s).max(0.0),
            Self::Custom(f) => f(s),
        }
    }

    pub fn strike(&self) -> Option<f64> {
        match self {
            Self::Call(k) | Self::Put(k) => Some(*k),
            Self::Custom(_) => None,
        }
    }

    pub fn zero() -> Self {
        Self::Custom(Arc::new(|_| 0.0))
    }
}

/// Terms of an American Parisian option. `barrier` is a price level.
#[derive(Debug, Clone)]
pub struct ContractSpec {
    pub payoff: Payoff,
    pub barrier: f64,
    pub window: f64,
    /// `None` for a perpetual contract.
    pub maturity: Option<f64>,
    pub rate: f64,
    pub flavor: Flavor,
}

impl ContractSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0) || !self.window.is_finite() {
            return Err(Error::InvalidParameter(format!("window must be positive, got {}", self.window)));
        }
        if !(self.barrier > 0.0) || !self.barrier.is_finite() {
            return Err(Error::InvalidParameter(format!("barrier must be positive, got {}", self.barrier)));
        }
        match self.maturity {
            None if !(self.rate > 0.0) => Err(Error::InvalidParameter("perpetual contracts need a positive rate".into())),
            Some(t) if !(t > 0.0) || !t.is_finite() => Err(Error::InvalidParameter(format!("maturity must be positive, got {t}"))),
            _ if !self.rate.is_finite() => Err(Error::InvalidParameter("rate must be finite".into())),
            _ => Ok(()),
        }
    }

    pub fn is_perpetual(&self) -> bool {
        self.maturity.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ContractSpec {
        ContractSpec {
            payoff: Payoff::Call(95.0),
            barrier: 90.0,
            window: 1.0 / 12.0,
            maturity: None,
            rate: 0.1,
            flavor: Flavor::DownIn,
        }
    }

    #[test]
    fn payoffs() {
        assert_eq!(Payoff::Call(95.0).eval(100.0), 5.0);
        assert_eq!(Payoff::Call(95.0).eval(90.0), 0.0);
        assert_eq!(Payoff::Put(95.0).eval(90.0), 5.0);
        assert_eq!(Payoff::zero().eval(1e9), 0.0);
    }

    #[test]
    fn validation() {
        assert!(spec().validate().is_ok());
        assert!(ContractSpec { rate: 0.0, ..spec() }.validate().is_err());
        assert!(ContractSpec { rate: 0.0, maturity: Some(1.0), ..spec() }.validate().is_ok());
        assert!(ContractSpec { window: 0.0, ..spec() }.validate().is_err());
        assert!(ContractSpec { maturity: Some(-1.0), ..spec() }.validate().is_err());
    }

    #[test]
    fn flavor_parsing() {
        assert_eq!("down-in".parse::<Flavor>().unwrap(), Flavor::DownIn);
        assert_eq!("out".parse::<Flavor>().unwrap(), Flavor::DownOut);
        assert!("up-in".parse::<Flavor>().is_err());
    }
}

//! Spectral windows for linear statistics and resolvent pairs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::semicircle;

/// Reference energy `E`, separation `omega`, resolution `eta` and test-function
/// support radius `M`. Separation and resolution are in rescaled units,
/// i.e. the windows sit at `(x - E) rho_E = ±omega`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    #[serde(rename = "E")]
    pub e: f64,
    pub omega: f64,
    pub eta: f64,
    #[serde(rename = "M", default = "one")]
    pub m: f64,
}

fn one() -> f64 {
    1.0
}

impl SpectralWindow {
    pub fn new(e: f64, omega: f64, eta: f64, m: f64) -> Result<Self> {
        let w = SpectralWindow { e, omega, eta, m };
        w.validate()?;
        Ok(w)
    }

    /// Hard constraints only; the asymptotic hypotheses are reported by [`Self::hypotheses`].
    pub fn validate(&self) -> Result<()> {
        if !(self.e.abs() < 2.0) {
            return Err(Error::domain("E", self.e));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::domain("omega", self.omega));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::domain("eta", self.eta));
        }
        if !(self.m >= 1.0 && self.m.is_finite()) {
            return Err(Error::domain("M", self.m));
        }
        if self.m * self.eta > self.omega {
            return Err(Error::config(format!(
                "test-function supports overlap: M*eta = {} exceeds omega = {}",
                self.m * self.eta,
                self.omega
            )));
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        semicircle(self.e).kappa
    }

    pub fn rho(&self) -> f64 {
        semicircle(self.e).rho
    }

    /// `alpha = -log_N eta`.
    pub fn alpha(&self, n: usize) -> f64 {
        -self.eta.ln() / (n as f64).ln()
    }

    /// `beta_exp = -log_N omega`.
    pub fn beta_exp(&self, n: usize) -> f64 {
        -self.omega.ln() / (n as f64).ln()
    }

    /// Violations of `N^(-1+tau) <= eta` and `M eta <= omega <= tau/3`.
    pub fn hypotheses(&self, n: usize, tau: f64) -> Vec<String> {
        let mut out = vec![];
        let floor = (n as f64).powf(-1.0 + tau);
        if self.eta < floor {
            out.push(format!("eta = {} below N^(-1+tau) = {floor}", self.eta));
        }
        if self.omega > tau / 3.0 {
            out.push(format!("omega = {} above tau/3 = {}", self.omega, tau / 3.0));
        }
        out
    }

    /// Resolvent pair centred at `E` with energy gap `omega`.
    pub fn green_pair(&self) -> GreenWindow {
        GreenWindow { e1: self.e - self.omega / 2.0, e2: self.e + self.omega / 2.0, eta: self.eta }
    }
}

/// Spectral parameters `z1 = E1 + i eta`, `z2 = E2 + i eta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenWindow {
    #[serde(rename = "E1")]
    pub e1: f64,
    #[serde(rename = "E2")]
    pub e2: f64,
    pub eta: f64,
}

impl GreenWindow {
    pub fn new(e1: f64, e2: f64, eta: f64) -> Result<Self> {
        let w = GreenWindow { e1, e2, eta };
        w.validate()?;
        Ok(w)
    }

    /// Symmetric pair `E ∓ omega/2`.
    pub fn centered(e: f64, omega: f64, eta: f64) -> Result<Self> {
        Self::new(e - omega / 2.0, e + omega / 2.0, eta)
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [("E1", self.e1), ("E2", self.e2)] {
            if !(v.abs() < 2.0) {
                return Err(Error::domain(what, v));
            }
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::domain("eta", self.eta));
        }
        if self.e1 == self.e2 {
            return Err(Error::config("E1 and E2 coincide"));
        }
        Ok(())
    }

    pub fn z1(&self) -> Complex64 {
        Complex64::new(self.e1, self.eta)
    }

    pub fn z2(&self) -> Complex64 {
        Complex64::new(self.e2, self.eta)
    }

    /// Midpoint energy used for `kappa_E` and `V(E)`.
    pub fn e_mid(&self) -> f64 {
        0.5 * (self.e1 + self.e2)
    }

    pub fn omega(&self) -> f64 {
        (self.e2 - self.e1).abs()
    }
}

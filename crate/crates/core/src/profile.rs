//! Longitudinal waveguide data: the slopes `f'`, `g'` of the reference curve
//! and their declared limits at infinity.

use serde::Serialize;

use crate::expr::{parse, tail_limit_check, Expr, ExprError, TailReport};

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub fprime_src: String,
    pub gprime_src: String,
    pub fprime: Expr,
    pub gprime: Expr,
    pub fpp: Expr,
    pub gpp: Expr,
    pub beta1: f64,
    pub beta2: f64,
}

impl Profile {
    pub fn new(fprime: &str, gprime: &str, beta1: f64, beta2: f64) -> Result<Self, ExprError> {
        let f = parse(fprime)?;
        let g = parse(gprime)?;
        Ok(Self::from_exprs(f, g, beta1, beta2))
    }

    pub fn from_exprs(fprime: Expr, gprime: Expr, beta1: f64, beta2: f64) -> Self {
        Profile {
            fprime_src: fprime.print(),
            gprime_src: gprime.print(),
            fpp: fprime.differentiate(),
            gpp: gprime.differentiate(),
            fprime,
            gprime,
            beta1,
            beta2,
        }
    }

    /// A straight tube with constant slopes.
    pub fn straight(beta1: f64, beta2: f64) -> Self {
        Self::from_exprs(Expr::Num(beta1), Expr::Num(beta2), beta1, beta2)
    }

    pub fn fp(&self, x: f64) -> Result<f64, ExprError> {
        self.fprime.eval(x)
    }

    pub fn gp(&self, x: f64) -> Result<f64, ExprError> {
        self.gprime.eval(x)
    }

    pub fn slopes(&self, x: f64) -> Result<(f64, f64), ExprError> {
        Ok((self.fprime.eval(x)?, self.gprime.eval(x)?))
    }

    /// Whether both slopes are constant expressions.
    pub fn is_straight(&self) -> bool {
        self.fprime.is_constant() && self.gprime.is_constant()
    }

    /// Checks `f' → β₁` and `g' → β₂` at ±X, ±2X, ±4X.
    pub fn check_tails(&self, x_far: f64, tol: f64) -> Result<TailCheck, ExprError> {
        Ok(TailCheck {
            fprime: tail_limit_check(&self.fprime, self.beta1, x_far, tol)?,
            gprime: tail_limit_check(&self.gprime, self.beta2, x_far, tol)?,
        })
    }

    /// Largest deviation `max(|f'(±x) − β₁|, |g'(±x) − β₂|)` at the two ends.
    pub fn end_deviation(&self, x: f64) -> Result<f64, ExprError> {
        let mut dev = 0.0f64;
        for s in [-x, x] {
            let (f, g) = self.slopes(s)?;
            dev = dev.max((f - self.beta1).abs()).max((g - self.beta2).abs());
        }
        Ok(dev)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCheck {
    pub fprime: TailReport,
    pub gprime: TailReport,
}

impl TailCheck {
    pub fn pass(&self) -> bool {
        self.fprime.pass && self.gprime.pass
    }

    /// Name of the first failing slope, if any.
    pub fn failure(&self) -> Option<&'static str> {
        if !self.fprime.pass {
            Some("fprime")
        } else if !self.gprime.pass {
            Some("gprime")
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_slopes_and_tails() {
        let p = Profile::new("1 - 0.8*exp(-x^2)", "0", 1.0, 0.0).unwrap();
        assert!(!p.is_straight());
        assert!((p.fpp.eval(1.0).unwrap() - 1.6 / std::f64::consts::E).abs() < 1e-14);
        assert!(p.check_tails(5.0, 1e-6).unwrap().pass());
        assert_eq!(p.check_tails(0.5, 1e-6).unwrap().failure(), Some("fprime"));
        assert!(Profile::straight(0.5, 0.0).is_straight());
    }
}

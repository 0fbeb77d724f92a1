use serde::{Deserialize, Serialize};

use crate::error::{EitError, Result};

/// The parameter space `[gamma_min, gamma_max]^D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub dim: usize,
    pub lower: f64,
    pub upper: f64,
}

impl ParameterBox {
    pub fn new(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        if dim == 0 {
            return Err(EitError::InvalidInput("parameter dimension must be at least 1".into()));
        }
        if !(lower > 0.0) || !lower.is_finite() {
            return Err(EitError::InvalidInput(format!("gamma_min must be > 0, got {lower}")));
        }
        if !(upper >= lower) || !upper.is_finite() {
            return Err(EitError::InvalidInput(format!(
                "gamma_max must be finite and >= gamma_min, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { dim, lower, upper })
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim && theta.iter().all(|&t| t >= self.lower && t <= self.upper)
    }

    pub fn is_interior(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim && theta.iter().all(|&t| t > self.lower && t < self.upper)
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(EitError::Dimension { expected: self.dim, found: theta.len() });
        }
        if !self.contains(theta) {
            return Err(EitError::OutsideParameterSpace {
                theta: theta.to_vec(),
                lower: self.lower,
                upper: self.upper,
            });
        }
        Ok(())
    }

    pub fn check_interior(&self, theta: &[f64]) -> Result<()> {
        self.check(theta)?;
        if !self.is_interior(theta) {
            return Err(EitError::BoundaryParameter { theta: theta.to_vec() });
        }
        Ok(())
    }

    pub fn center(&self) -> Vec<f64> {
        vec![0.5 * (self.lower + self.upper); self.dim]
    }

    /// Componentwise projection onto `[lower + margin, upper - margin]`.
    pub fn clamp_inside(&self, theta: &mut [f64], margin: f64) {
        for t in theta.iter_mut() {
            *t = t.clamp(self.lower + margin, self.upper - margin);
        }
    }

    pub fn volume(&self) -> f64 {
        (self.upper - self.lower).powi(self.dim as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_lower_bound() {
        assert!(ParameterBox::new(2, 0.0, 4.0).is_err());
        assert!(ParameterBox::new(2, -1.0, 4.0).is_err());
        assert!(ParameterBox::new(0, 0.5, 4.0).is_err());
        assert!(ParameterBox::new(2, 2.0, 1.0).is_err());
    }

    #[test]
    fn interior_and_boundary() {
        let b = ParameterBox::new(2, 0.5, 4.0).unwrap();
        assert!(b.is_interior(&[2.0, 1.5]));
        assert!(b.contains(&[0.5, 4.0]));
        assert!(!b.is_interior(&[0.5, 2.0]));
        assert!(matches!(b.check_interior(&[0.5, 2.0]), Err(EitError::BoundaryParameter { .. })));
        assert!(matches!(b.check(&[5.0, 2.0]), Err(EitError::OutsideParameterSpace { .. })));
        assert!(matches!(b.check(&[2.0]), Err(EitError::Dimension { .. })));
        assert_eq!(b.center(), vec![2.25, 2.25]);
    }
}

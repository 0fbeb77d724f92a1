use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{EitError, Result};
use crate::param::ParameterBox;

/// Prior on `Theta`; both choices have a continuous density bounded away
/// from zero on the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorSpec {
    Uniform,
    TruncatedGaussian { mean: Vec<f64>, sd: Vec<f64> },
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::Uniform
    }
}

impl PriorSpec {
    pub fn validate(&self, space: &ParameterBox) -> Result<()> {
        if let PriorSpec::TruncatedGaussian { mean, sd } = self {
            if mean.len() != space.dim || sd.len() != space.dim {
                return Err(EitError::Dimension { expected: space.dim, found: mean.len().min(sd.len()) });
            }
            if let Some(s) = sd.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
                return Err(EitError::InvalidInput(format!("prior sd must be > 0, got {s}")));
            }
            if mean.iter().any(|m| !m.is_finite()) {
                return Err(EitError::InvalidInput("prior mean must be finite".into()));
            }
        }
        Ok(())
    }

    /// Normalised log density on `Theta`; `-inf` outside.
    pub fn log_density(&self, space: &ParameterBox, theta: &[f64]) -> f64 {
        if !space.contains(theta) {
            return f64::NEG_INFINITY;
        }
        match self {
            PriorSpec::Uniform => -space.volume().ln(),
            PriorSpec::TruncatedGaussian { mean, sd } => theta
                .iter()
                .zip(mean.iter().zip(sd))
                .map(|(&t, (&m, &s))| {
                    let z = (t - m) / s;
                    let std = Normal::standard();
                    let mass = std.cdf((space.upper - m) / s) - std.cdf((space.lower - m) / s);
                    -0.5 * z * z - (s * (2.0 * PI).sqrt() * mass).ln()
                })
                .sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_density_is_constant_and_normalised() {
        let space = ParameterBox::new(2, 0.5, 4.0).unwrap();
        let p = PriorSpec::Uniform;
        assert_eq!(p.log_density(&space, &[1.0, 1.0]), p.log_density(&space, &[3.9, 0.6]));
        assert!((p.log_density(&space, &[1.0, 1.0]) + (3.5f64 * 3.5).ln()).abs() < 1e-14);
        assert_eq!(p.log_density(&space, &[4.1, 1.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn truncated_gaussian_integrates_to_one() {
        let space = ParameterBox::new(1, 0.5, 4.0).unwrap();
        let p = PriorSpec::TruncatedGaussian { mean: vec![1.0], sd: vec![0.7] };
        let q = 100_000;
        let w = 3.5 / q as f64;
        let total: f64 = (0..q).map(|i| p.log_density(&space, &[0.5 + (i as f64 + 0.5) * w]).exp() * w).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn validation() {
        let space = ParameterBox::new(2, 0.5, 4.0).unwrap();
        assert!(PriorSpec::TruncatedGaussian { mean: vec![1.0], sd: vec![1.0] }.validate(&space).is_err());
        assert!(PriorSpec::TruncatedGaussian { mean: vec![1.0, 1.0], sd: vec![1.0, 0.0] }.validate(&space).is_err());
        assert!(PriorSpec::Uniform.validate(&space).is_ok());
    }

    #[test]
    fn serde_shape() {
        let p: PriorSpec = serde_json::from_str(r#"{"kind":"truncated-gaussian","mean":[1,2],"sd":[0.5,0.5]}"#).unwrap();
        assert_eq!(p, PriorSpec::TruncatedGaussian { mean: vec![1.0, 2.0], sd: vec![0.5, 0.5] });
        let u: PriorSpec = serde_json::from_str(r#"{"kind":"uniform"}"#).unwrap();
        assert_eq!(u, PriorSpec::Uniform);
    }
}

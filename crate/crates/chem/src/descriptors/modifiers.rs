use serde::{Deserialize, Serialize};

use super::DescriptorError;

/// exp(-(x - mu)^2 / (2 sigma^2))
pub fn gaussian_modifier(x: f64, mu: f64, sigma: f64) -> Result<f64, DescriptorError> {
    if !(sigma > 0.0) {
        return Err(DescriptorError::NonPositiveSigma(sigma));
    }
    let z = (x - mu) / sigma;
    Ok((-0.5 * z * z).exp())
}

/// Ascending: linear ramp from 0 at x = 0 to 1 at x = t.
/// Descending: 1 up to t, then linear fall to 0 at 2t.
pub fn threshold_modifier(x: f64, t: f64, ascending: bool) -> Result<f64, DescriptorError> {
    if !(t > 0.0) {
        return Err(DescriptorError::NonPositiveThreshold(t));
    }
    Ok(if ascending {
        (x / t).clamp(0.0, 1.0)
    } else if x <= t {
        1.0
    } else {
        (2.0 - x / t).max(0.0)
    })
}

fn check_scores(scores: &[f64]) -> Result<(), DescriptorError> {
    if scores.is_empty() {
        return Err(DescriptorError::EmptyList);
    }
    match scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        Some(s) => Err(DescriptorError::OutOfRange(*s)),
        None => Ok(()),
    }
}

pub fn geometric_mean(scores: &[f64]) -> Result<f64, DescriptorError> {
    check_scores(scores)?;
    if scores.contains(&0.0) {
        return Ok(0.0);
    }
    let log_sum: f64 = scores.iter().map(|s| s.ln()).sum();
    Ok((log_sum / scores.len() as f64).exp().clamp(0.0, 1.0))
}

pub fn arithmetic_mean(scores: &[f64]) -> Result<f64, DescriptorError> {
    check_scores(scores)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Modifier as written in a task document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModifierSpec {
    pub shape: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ascending: Option<bool>,
}

/// Validated score-shaping function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modifier {
    Identity,
    Gaussian { mu: f64, sigma: f64 },
    Threshold { t: f64, ascending: bool },
}

impl Modifier {
    pub fn from_spec(spec: &ModifierSpec) -> Result<Modifier, String> {
        let unused = |name: &str, present: bool| -> Result<(), String> {
            if present {
                Err(format!("field `{name}` does not apply to shape `{}`", spec.shape))
            } else {
                Ok(())
            }
        };
        match spec.shape.as_str() {
            "identity" => {
                unused("mu", spec.mu.is_some())?;
                unused("sigma", spec.sigma.is_some())?;
                unused("t", spec.t.is_some())?;
                unused("ascending", spec.ascending.is_some())?;
                Ok(Modifier::Identity)
            }
            "gaussian" => {
                unused("t", spec.t.is_some())?;
                unused("ascending", spec.ascending.is_some())?;
                let mu = spec.mu.ok_or("gaussian modifier needs `mu`")?;
                let sigma = spec.sigma.ok_or("gaussian modifier needs `sigma`")?;
                gaussian_modifier(mu, mu, sigma).map_err(|e| e.to_string())?;
                Ok(Modifier::Gaussian { mu, sigma })
            }
            "threshold" => {
                unused("mu", spec.mu.is_some())?;
                unused("sigma", spec.sigma.is_some())?;
                let t = spec.t.ok_or("threshold modifier needs `t`")?;
                threshold_modifier(0.0, t, true).map_err(|e| e.to_string())?;
                Ok(Modifier::Threshold { t, ascending: spec.ascending.unwrap_or(true) })
            }
            other => Err(format!("unknown modifier shape `{other}`")),
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Modifier::Identity => x.clamp(0.0, 1.0),
            Modifier::Gaussian { mu, sigma } => gaussian_modifier(x, mu, sigma).expect("validated sigma"),
            Modifier::Threshold { t, ascending } => threshold_modifier(x, t, ascending).expect("validated threshold"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_values() {
        assert_eq!(gaussian_modifier(3.0, 3.0, 2.0).unwrap(), 1.0);
        let v = gaussian_modifier(5.0, 3.0, 2.0).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
        assert!((v - 0.6065).abs() < 1e-4);
        assert!(gaussian_modifier(1e10, 0.0, 1.0).unwrap() < 1e-300);
        assert!(gaussian_modifier(-1e10, 0.0, 1.0).unwrap() < 1e-300);
        assert_eq!(gaussian_modifier(0.0, 0.0, 0.0), Err(DescriptorError::NonPositiveSigma(0.0)));
    }

    #[test]
    fn threshold_values() {
        assert_eq!(threshold_modifier(2.0, 2.0, true).unwrap(), 1.0);
        assert_eq!(threshold_modifier(0.0, 2.0, true).unwrap(), 0.0);
        assert_eq!(threshold_modifier(3.0, 2.0, false).unwrap(), 0.5);
        assert_eq!(threshold_modifier(1.0, 2.0, false).unwrap(), 1.0);
        assert_eq!(threshold_modifier(5.0, 2.0, false).unwrap(), 0.0);
        assert_eq!(threshold_modifier(1.0, 0.0, true), Err(DescriptorError::NonPositiveThreshold(0.0)));
    }

    #[test]
    fn means() {
        assert_eq!(geometric_mean(&[0.5]).unwrap(), 0.5);
        assert_eq!(geometric_mean(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!((geometric_mean(&[0.25, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(geometric_mean(&[0.0, 0.9]).unwrap(), 0.0);
        assert_eq!(geometric_mean(&[]), Err(DescriptorError::EmptyList));
        assert_eq!(geometric_mean(&[1.5]), Err(DescriptorError::OutOfRange(1.5)));
        assert_eq!(arithmetic_mean(&[1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn spec_validation() {
        let spec: ModifierSpec = serde_json::from_str(r#"{"shape":"threshold","t":0.75}"#).unwrap();
        assert_eq!(Modifier::from_spec(&spec).unwrap(), Modifier::Threshold { t: 0.75, ascending: true });
        let spec: ModifierSpec = serde_json::from_str(r#"{"shape":"gaussian","mu":1.0}"#).unwrap();
        assert!(Modifier::from_spec(&spec).is_err());
        let spec: ModifierSpec = serde_json::from_str(r#"{"shape":"gaussian","mu":1.0,"sigma":-1}"#).unwrap();
        assert!(Modifier::from_spec(&spec).is_err());
        assert!(serde_json::from_str::<ModifierSpec>(r#"{"shape":"identity","extra":1}"#).is_err());
    }
}

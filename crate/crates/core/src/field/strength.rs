use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::FieldError;

/// Law of the iid obstacle strengths; every family has a closed-form tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrengthDistribution {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
}

impl StrengthDistribution {
    pub fn validate(&self) -> Result<(), FieldError> {
        let ok = match *self {
            Self::Constant { value } => value > 0.0 && value.is_finite(),
            Self::Uniform { lo, hi } => lo > 0.0 && hi > lo && hi.is_finite(),
            Self::Exponential { rate } => rate > 0.0 && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(FieldError::InvalidDistribution(format!("{self:?}")))
        }
    }

    /// `P(f₁ ≥ threshold)`.
    pub fn tail(&self, threshold: f64) -> f64 {
        match *self {
            Self::Constant { value } => {
                if threshold <= value {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Uniform { lo, hi } => ((hi - threshold) / (hi - lo)).clamp(0.0, 1.0),
            Self::Exponential { rate } => (-rate * threshold.max(0.0)).exp(),
        }
    }

    /// Largest threshold whose tail probability is at least `floor`.
    pub fn threshold_for_tail(&self, floor: f64) -> Option<f64> {
        if !(floor > 0.0 && floor <= 1.0) {
            return None;
        }
        Some(match *self {
            Self::Constant { value } => value,
            Self::Uniform { lo, hi } => hi - floor * (hi - lo),
            Self::Exponential { rate } => -floor.ln() / rate,
        })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Exponential { rate } => 1.0 / rate,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Uniform { lo, hi } => rng.random_range(lo..hi),
            Self::Exponential { rate } => {
                // strictly positive: resample the (measure-zero) exact zero
                let exp = Exp::new(rate).expect("validated rate");
                loop {
                    let v = exp.sample(rng);
                    if v > 0.0 {
                        return v;
                    }
                }
            }
        }
    }

    /// Same distribution with every strength multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Self::Constant { value } => Self::Constant { value: value * factor },
            Self::Uniform { lo, hi } => Self::Uniform { lo: lo * factor, hi: hi * factor },
            Self::Exponential { rate } => Self::Exponential { rate: rate / factor },
        }
    }

    /// `kind p1 [p2]`, the form used in config files and field headers.
    pub fn describe(&self) -> String {
        match *self {
            Self::Constant { value } => format!("constant {value}"),
            Self::Uniform { lo, hi } => format!("uniform {lo} {hi}"),
            Self::Exponential { rate } => format!("exponential {rate}"),
        }
    }

    pub fn parse(text: &str) -> Result<Self, FieldError> {
        let parts: Vec<&str> = text.split_whitespace().collect();
        let num = |i: usize| -> Result<f64, FieldError> {
            parts
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| FieldError::InvalidDistribution(text.to_string()))
        };
        let dist = match parts.first().copied() {
            Some("constant") => Self::Constant { value: num(1)? },
            Some("uniform") => Self::Uniform { lo: num(1)?, hi: num(2)? },
            Some("exponential") => Self::Exponential { rate: num(1)? },
            _ => return Err(FieldError::InvalidDistribution(text.to_string())),
        };
        dist.validate()?;
        Ok(dist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{keyed_rng, StreamTag};

    #[test]
    fn constant_tail_is_a_step() {
        let d = StrengthDistribution::Constant { value: 10.0 };
        assert_eq!(d.tail(10.0), 1.0);
        assert_eq!(d.tail(10.0001), 0.0);
        assert_eq!(d.threshold_for_tail(0.5), Some(10.0));
    }

    #[test]
    fn thresholds_invert_tails() {
        let u = StrengthDistribution::Uniform { lo: 1.0, hi: 3.0 };
        let t = u.threshold_for_tail(0.25).unwrap();
        assert!((u.tail(t) - 0.25).abs() < 1e-12);
        let e = StrengthDistribution::Exponential { rate: 0.5 };
        let t = e.threshold_for_tail(0.3).unwrap();
        assert!((e.tail(t) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn empirical_tail_matches_closed_form() {
        let e = StrengthDistribution::Exponential { rate: 2.0 };
        let mut rng = keyed_rng(1, StreamTag::RandomPair, &[0]);
        let n = 200_000;
        let hits = (0..n).filter(|_| e.sample(&mut rng) >= 0.5).count();
        let p = hits as f64 / n as f64;
        assert!((p - e.tail(0.5)).abs() < 0.005);
    }

    #[test]
    fn parse_describe_roundtrip() {
        for d in [
            StrengthDistribution::Constant { value: 10.0 },
            StrengthDistribution::Uniform { lo: 0.5, hi: 2.5 },
            StrengthDistribution::Exponential { rate: 1.25 },
        ] {
            assert_eq!(StrengthDistribution::parse(&d.describe()).unwrap(), d);
        }
        assert!(StrengthDistribution::parse("uniform 3 1").is_err());
        assert!(StrengthDistribution::parse("gamma 1").is_err());
    }
}

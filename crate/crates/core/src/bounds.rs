//! Error margins `ε_n(g)` and uniform-convergence widths.
//!
//! All logarithms are natural. Values are not clamped to `[0, 1]`; at
//! realistic group sizes the theorem-exact margins often exceed 1.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsilonSpec {
    /// `c * 18 * sqrt((2 ln(|G||H|) + ln(8/δ)) / n_g)`.
    #[serde(rename = "finite_H", alias = "finite_h")]
    FiniteH {
        hypotheses: f64,
        delta: f64,
        /// `|G|`; defaults to the number of tree nodes when resolved.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        groups: Option<f64>,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `c * 18 * sqrt(2d ln(16|G|n/δ) / n_g)`.
    Vc {
        d: f64,
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        groups: Option<f64>,
        /// Total sample size; defaults to the training size when resolved.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<f64>,
        #[serde(default = "one")]
        scale: f64,
    },
    /// The same margin for every group (`"inf"` allowed).
    Constant {
        #[serde(with = "extended_f64")]
        value: f64,
    },
    /// `c / sqrt(n_g)`: the same rate without the theorem constants.
    Scaled { c: f64 },
}

fn one() -> f64 {
    1.0
}

impl EpsilonSpec {
    pub fn constant(value: f64) -> Self {
        EpsilonSpec::Constant { value }
    }

    pub fn infinite() -> Self {
        EpsilonSpec::Constant {
            value: f64::INFINITY,
        }
    }

    /// Fills unset `|G|` and `n` from the run context.
    pub fn resolve(&self, groups: usize, n: usize) -> EpsilonSpec {
        let mut out = *self;
        match &mut out {
            EpsilonSpec::FiniteH { groups: g, .. } => {
                g.get_or_insert(groups as f64);
            }
            EpsilonSpec::Vc { groups: g, n: total, .. } => {
                g.get_or_insert(groups as f64);
                total.get_or_insert(n as f64);
            }
            _ => {}
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let delta_ok = |delta: f64| {
            if delta > 0.0 && delta < 1.0 {
                Ok(())
            } else {
                Err(Error::Epsilon(format!("delta {delta} not in (0, 1)")))
            }
        };
        let scale_ok = |c: f64| {
            if c >= 0.0 && c.is_finite() {
                Ok(())
            } else {
                Err(Error::Epsilon(format!("scale {c} must be finite and >= 0")))
            }
        };
        let at_least_one = |name: &str, v: Option<f64>| match v {
            Some(v) if !(v >= 1.0) => Err(Error::Epsilon(format!("{name} = {v} must be >= 1"))),
            _ => Ok(()),
        };
        match *self {
            EpsilonSpec::FiniteH {
                hypotheses,
                delta,
                groups,
                scale,
            } => {
                delta_ok(delta)?;
                scale_ok(scale)?;
                at_least_one("|H|", Some(hypotheses))?;
                at_least_one("|G|", groups)
            }
            EpsilonSpec::Vc {
                d,
                delta,
                groups,
                n,
                scale,
            } => {
                delta_ok(delta)?;
                scale_ok(scale)?;
                at_least_one("d", Some(d))?;
                at_least_one("|G|", groups)?;
                at_least_one("n", n)
            }
            EpsilonSpec::Constant { value } if value.is_nan() || value < 0.0 => {
                Err(Error::Epsilon(format!("constant margin {value} must be >= 0")))
            }
            EpsilonSpec::Constant { .. } => Ok(()),
            EpsilonSpec::Scaled { c } => scale_ok(c),
        }
    }
}

fn require(name: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::Epsilon(format!("{name} unset; resolve the spec first")))
}

/// `ε_n(g)` for a group with `n_g` training rows; `+inf` when `n_g = 0`.
pub fn epsilon(spec: &EpsilonSpec, n_g: usize) -> Result<f64> {
    spec.validate()?;
    if let EpsilonSpec::Constant { value } = *spec {
        return Ok(value);
    }
    if n_g == 0 {
        return Ok(f64::INFINITY);
    }
    let n_g = n_g as f64;
    Ok(match *spec {
        EpsilonSpec::FiniteH {
            hypotheses,
            delta,
            groups,
            scale,
        } => {
            let g = require("|G|", groups)?;
            (scale * 18.0) * ((2.0 * (g * hypotheses).ln() + (8.0 / delta).ln()) / n_g).sqrt()
        }
        EpsilonSpec::Vc {
            d,
            delta,
            groups,
            n,
            scale,
        } => {
            let g = require("|G|", groups)?;
            let n = require("n", n)?;
            (scale * 18.0) * (2.0 * d * (16.0 * g * n / delta).ln() / n_g).sqrt()
        }
        EpsilonSpec::Scaled { c } => c / n_g.sqrt(),
        EpsilonSpec::Constant { .. } => unreachable!(),
    })
}

/// Uniform-convergence width: with probability `1 - δ`, every `h` and `g`
/// satisfy `|L_D(h | g) - L_S(h | g)| <= uc_width`. Finite class:
/// `9 sqrt((2 ln(|H||G|) + ln(8/δ)) / n_g)`; VC class:
/// `9 sqrt((2d ln(2|G|n) + ln(8/δ)) / n_g)`. The spec's `scale` multiplies
/// both, so `epsilon(finite_H) == 2 * uc_width(finite_H)` exactly.
pub fn uc_width(spec: &EpsilonSpec, n_g: usize) -> Result<f64> {
    spec.validate()?;
    if n_g == 0 {
        return Ok(f64::INFINITY);
    }
    let n_g = n_g as f64;
    match *spec {
        EpsilonSpec::FiniteH {
            hypotheses,
            delta,
            groups,
            scale,
        } => {
            let g = require("|G|", groups)?;
            Ok((scale * 9.0) * ((2.0 * (hypotheses * g).ln() + (8.0 / delta).ln()) / n_g).sqrt())
        }
        EpsilonSpec::Vc {
            d,
            delta,
            groups,
            n,
            scale,
        } => {
            let g = require("|G|", groups)?;
            let n = require("n", n)?;
            Ok((scale * 9.0) * ((2.0 * d * (2.0 * g * n).ln() + (8.0 / delta).ln()) / n_g).sqrt())
        }
        _ => Err(Error::Epsilon(
            "uc_width is defined for finite_H and vc specs only".into(),
        )),
    }
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
pub mod extended_f64 {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrStr {
        Num(f64),
        Str(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match NumOrStr::deserialize(d)? {
            NumOrStr::Num(v) => Ok(v),
            NumOrStr::Str(s) => match s.to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: `{other}`"))),
            },
        }
    }
}

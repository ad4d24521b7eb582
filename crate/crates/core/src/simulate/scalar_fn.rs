//! A tiny expression tree for scenario parameter functions such as
//! `exp(x/3)`, `θ·exp(x²)` or `82 + θ`.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A feature of the covariate vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    /// x_k (0-based coordinate).
    Coord(usize),
    /// x_k².
    CoordSq(usize),
    /// 1ᵀx.
    SumAll,
    /// (Rᵀx)_k for the scenario's rotation matrix R.
    RotatedCoord(usize),
}

/// Scalar function of (x, θ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarFn {
    Const(f64),
    Theta,
    Feature(Feature),
    Add(Box<ScalarFn>, Box<ScalarFn>),
    Mul(Box<ScalarFn>, Box<ScalarFn>),
    Div(Box<ScalarFn>, Box<ScalarFn>),
    Exp(Box<ScalarFn>),
}

/// Evaluation context for a scalar function.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EvalContext<'a> {
    pub x: ArrayView1<'a, f64>,
    pub theta: f64,
    pub rotation: Option<&'a Array2<f64>>,
}

impl ScalarFn {
    pub(crate) fn eval(&self, ctx: &EvalContext<'_>) -> Result<f64> {
        Ok(match self {
            ScalarFn::Const(v) => *v,
            ScalarFn::Theta => ctx.theta,
            ScalarFn::Feature(f) => match f {
                Feature::Coord(k) => *ctx
                    .x
                    .get(*k)
                    .ok_or_else(|| Error::Validation(format!("coordinate {k} out of range")))?,
                Feature::CoordSq(k) => {
                    let v = *ctx
                        .x
                        .get(*k)
                        .ok_or_else(|| Error::Validation(format!("coordinate {k} out of range")))?;
                    v * v
                }
                Feature::SumAll => ctx.x.sum(),
                Feature::RotatedCoord(k) => {
                    let r = ctx.rotation.ok_or_else(|| {
                        Error::Validation("scenario has no rotation matrix".into())
                    })?;
                    if *k >= r.ncols() {
                        return Err(Error::Validation(format!(
                            "rotated coordinate {k} out of range"
                        )));
                    }
                    r.column(*k).dot(&ctx.x)
                }
            },
            ScalarFn::Add(a, b) => a.eval(ctx)? + b.eval(ctx)?,
            ScalarFn::Mul(a, b) => a.eval(ctx)? * b.eval(ctx)?,
            ScalarFn::Div(a, b) => a.eval(ctx)? / b.eval(ctx)?,
            ScalarFn::Exp(a) => a.eval(ctx)?.exp(),
        })
    }

    /// True if the expression mentions θ anywhere.
    pub fn references_theta(&self) -> bool {
        match self {
            ScalarFn::Theta => true,
            ScalarFn::Const(_) | ScalarFn::Feature(_) => false,
            ScalarFn::Add(a, b) | ScalarFn::Mul(a, b) | ScalarFn::Div(a, b) => {
                a.references_theta() || b.references_theta()
            }
            ScalarFn::Exp(a) => a.references_theta(),
        }
    }

    // Construction helpers used by the registry and tests.

    pub fn constant(v: f64) -> ScalarFn {
        ScalarFn::Const(v)
    }

    pub fn theta() -> ScalarFn {
        ScalarFn::Theta
    }

    pub fn coord(k: usize) -> ScalarFn {
        ScalarFn::Feature(Feature::Coord(k))
    }

    pub fn coord_sq(k: usize) -> ScalarFn {
        ScalarFn::Feature(Feature::CoordSq(k))
    }

    pub fn sum_all() -> ScalarFn {
        ScalarFn::Feature(Feature::SumAll)
    }

    pub fn plus(self, other: ScalarFn) -> ScalarFn {
        ScalarFn::Add(Box::new(self), Box::new(other))
    }

    pub fn times(self, other: ScalarFn) -> ScalarFn {
        ScalarFn::Mul(Box::new(self), Box::new(other))
    }

    pub fn over(self, other: ScalarFn) -> ScalarFn {
        ScalarFn::Div(Box::new(self), Box::new(other))
    }

    pub fn exp(self) -> ScalarFn {
        ScalarFn::Exp(Box::new(self))
    }
}

//! Monotone transforms applied to both data and model output.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::conformal::PredictionRegion;
use crate::error::{Error, Result};
use crate::ode::OdeModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Identity,
    Log,
    BoxCox,
}

/// An increasing map `h_k(·, λ)` per observable coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub kind: TransformKind,
    /// Box-Cox shape; one value is broadcast to every coordinate.
    pub lambda: Vec<f64>,
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            kind: TransformKind::Identity,
            lambda: Vec::new(),
        }
    }

    pub fn log() -> Self {
        Self {
            kind: TransformKind::Log,
            lambda: Vec::new(),
        }
    }

    pub fn box_cox(lambda: f64) -> Self {
        Self::box_cox_per_coordinate(vec![lambda])
    }

    pub fn box_cox_per_coordinate(lambda: Vec<f64>) -> Self {
        Self {
            kind: TransformKind::BoxCox,
            lambda,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.kind == TransformKind::Identity
    }

    pub fn validate(&self, n_y: usize) -> Result<()> {
        if self.kind == TransformKind::BoxCox {
            if self.lambda.is_empty() || self.lambda.iter().any(|l| !l.is_finite()) {
                return Err(Error::InvalidConfig("box_cox needs finite λ values".into()));
            }
            if self.lambda.len() != 1 && self.lambda.len() != n_y {
                return Err(Error::DimensionMismatch(format!(
                    "{} box_cox λ values for {n_y} observables",
                    self.lambda.len()
                )));
            }
        }
        Ok(())
    }

    fn lambda_for(&self, k: usize) -> f64 {
        match self.lambda.len() {
            1 => self.lambda[0],
            _ => self.lambda[k],
        }
    }

    fn requires_positive(&self) -> bool {
        self.kind != TransformKind::Identity
    }

    /// `h_k(s)`; NaN outside the domain.
    pub fn forward(&self, k: usize, s: f64) -> f64 {
        match self.kind {
            TransformKind::Identity => s,
            _ if !(s > 0.0) => f64::NAN,
            TransformKind::Log => s.ln(),
            TransformKind::BoxCox => {
                let l = self.lambda_for(k);
                if l == 0.0 {
                    s.ln()
                } else {
                    (s.powf(l) - 1.0) / l
                }
            }
        }
    }

    /// `h_k⁻¹(v)`. Values beyond the range of `h_k` map to the matching end
    /// of the domain (0 or +∞).
    pub fn inverse(&self, k: usize, v: f64) -> f64 {
        match self.kind {
            TransformKind::Identity => v,
            TransformKind::Log => v.exp(),
            TransformKind::BoxCox => {
                let l = self.lambda_for(k);
                if l == 0.0 {
                    return v.exp();
                }
                let base = l * v + 1.0;
                if base <= 0.0 {
                    if l > 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    base.powf(1.0 / l)
                }
            }
        }
    }

    /// The model whose observables are `h(g(·))`.
    pub fn wrap_model(&self, model: &OdeModel) -> OdeModel {
        if self.is_identity() {
            return model.clone();
        }
        let h = self.clone();
        model.map_observables(&format!("[{self}]"), move |k, v| h.forward(k, v))
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TransformKind::Identity => f.write_str("identity"),
            TransformKind::Log => f.write_str("log"),
            TransformKind::BoxCox => {
                let ls: Vec<String> = self.lambda.iter().map(|l| l.to_string()).collect();
                write!(f, "box_cox:{}", ls.join(","))
            }
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    /// `identity`, `log`, `box_cox:λ` or `box_cox:λ1,λ2,…`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "identity" | "none" => return Ok(Self::identity()),
            "log" => return Ok(Self::log()),
            _ => {}
        }
        let Some(rest) = s.strip_prefix("box_cox:") else {
            return Err(Error::InvalidConfig(format!("unknown transform `{s}`")));
        };
        let lambda = rest
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidConfig(format!("bad box_cox λ `{p}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let t = Self::box_cox_per_coordinate(lambda);
        t.validate(t.lambda.len())?;
        Ok(t)
    }
}

/// Transform every observation of `d`.
pub fn apply_transform(d: &Dataset, h: &Transform) -> Result<Dataset> {
    h.validate(d.n_y())?;
    if h.is_identity() {
        return Ok(d.clone());
    }
    let mut y = d.y.clone();
    for ((row, col), v) in y.indexed_iter_mut() {
        if h.requires_positive() && !(*v > 0.0) {
            return Err(Error::NonPositiveInput { value: *v, row, col });
        }
        *v = h.forward(col, *v);
    }
    let mut meta = d.meta.clone();
    meta.transform = h.to_string();
    Dataset::new(d.times.clone(), y, meta)
}

/// Map a region computed in transformed space back to the data scale.
pub fn invert_transform_bounds(region: &PredictionRegion, h: &Transform) -> PredictionRegion {
    if h.is_identity() {
        return region.clone();
    }
    let mut out = region.clone();
    for arr in [&mut out.lpb, &mut out.upb, &mut out.center] {
        for ((_, k), v) in arr.indexed_iter_mut() {
            *v = h.inverse(k, *v);
        }
    }
    out
}

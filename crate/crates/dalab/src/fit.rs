//! Least-squares rate fitting for the scaling-law analyses.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parametric families fitted to experiment curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateModel {
    /// `c1 + c2 / sqrt(x)`
    OffsetInvSqrt,
    /// `c1 + c2 x`
    OffsetLinear,
    /// `c1 + c2 x^2`
    OffsetQuadratic,
    /// `c sqrt(x)` (no offset)
    SqrtLaw,
}

impl RateModel {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "inv-sqrt" | "offset-inv-sqrt" => Ok(RateModel::OffsetInvSqrt),
            "linear" | "offset-linear" => Ok(RateModel::OffsetLinear),
            "quadratic" | "offset-quadratic" => Ok(RateModel::OffsetQuadratic),
            "sqrt" | "sqrt-law" => Ok(RateModel::SqrtLaw),
            other => Err(Error::Config(format!("unknown rate model '{other}'"))),
        }
    }

    fn needs_positive_x(&self) -> bool {
        matches!(self, RateModel::OffsetInvSqrt | RateModel::SqrtLaw)
    }

    fn feature(&self, x: f64) -> f64 {
        match self {
            RateModel::OffsetInvSqrt => 1.0 / x.sqrt(),
            RateModel::OffsetLinear => x,
            RateModel::OffsetQuadratic => x * x,
            RateModel::SqrtLaw => x.sqrt(),
        }
    }

    fn has_offset(&self) -> bool {
        !matches!(self, RateModel::SqrtLaw)
    }
}

/// A fitted rate curve: model kind, coefficients (offset first when present)
/// and the coefficient of determination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub model: RateModel,
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
}

impl RateFit {
    pub fn predict(&self, x: f64) -> f64 {
        if self.model.has_offset() {
            self.coefficients[0] + self.coefficients[1] * self.model.feature(x)
        } else {
            self.coefficients[0] * self.model.feature(x)
        }
    }
}

fn r_squared(ys: &[f64], residual_ss: f64) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let total_ss: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    if total_ss <= 1e-300 {
        // flat data: perfect if residuals vanish, undefined (vacuous) otherwise
        if residual_ss <= 1e-300 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - residual_ss / total_ss
    }
}

/// Least-squares fit of one of the [`RateModel`] families.
pub fn fit_rate(xs: &[f64], ys: &[f64], model: RateModel) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension {
            expected: xs.len(),
            got: ys.len(),
            context: "fit_rate lengths",
        });
    }
    if xs.len() < 3 {
        return Err(Error::Config("fit_rate needs at least 3 points".into()));
    }
    if model.needs_positive_x() && xs.iter().any(|&x| x <= 0.0) {
        return Err(Error::Config(
            "x values must be positive for sqrt models".into(),
        ));
    }
    let feats: Vec<f64> = xs.iter().map(|&x| model.feature(x)).collect();
    let (coefficients, residual_ss) = if model.has_offset() {
        let n = xs.len() as f64;
        let sf: f64 = feats.iter().sum();
        let sff: f64 = feats.iter().map(|f| f * f).sum();
        let sy: f64 = ys.iter().sum();
        let sfy: f64 = feats.iter().zip(ys).map(|(f, y)| f * y).sum();
        let det = n * sff - sf * sf;
        if det.abs() < 1e-12 * n * sff.max(1.0) {
            return Err(Error::Singular("degenerate design in fit_rate".into()));
        }
        let c2 = (n * sfy - sf * sy) / det;
        let c1 = (sy - c2 * sf) / n;
        let ss: f64 = feats
            .iter()
            .zip(ys)
            .map(|(f, y)| {
                let r = y - c1 - c2 * f;
                r * r
            })
            .sum();
        (vec![c1, c2], ss)
    } else {
        let sff: f64 = feats.iter().map(|f| f * f).sum();
        if sff < 1e-300 {
            return Err(Error::Singular("degenerate design in fit_rate".into()));
        }
        let sfy: f64 = feats.iter().zip(ys).map(|(f, y)| f * y).sum();
        let c = sfy / sff;
        let ss: f64 = feats
            .iter()
            .zip(ys)
            .map(|(f, y)| {
                let r = y - c * f;
                r * r
            })
            .sum();
        (vec![c], ss)
    };
    Ok(RateFit {
        model,
        coefficients,
        r_squared: r_squared(ys, residual_ss),
    })
}

/// Two-feature linear least squares `y ~ a x1 + b x2` (no intercept), used by
/// the covering-number growth-rate check. Returns `(a, b, r_squared)`.
pub fn fit_linear2(x1: &[f64], x2: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if x1.len() != ys.len() || x2.len() != ys.len() || ys.len() < 3 {
        return Err(Error::Config(
            "fit_linear2 needs >= 3 aligned points".into(),
        ));
    }
    let n = ys.len();
    let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { x1[i] } else { x2[i] });
    let rhs = DVector::from_column_slice(ys);
    let normal = design.transpose() * &design;
    let coef = normal
        .lu()
        .solve(&(design.transpose() * &rhs))
        .ok_or_else(|| Error::Singular("fit_linear2 normal equations".into()))?;
    let resid = design * &coef - rhs;
    Ok((coef[0], coef[1], r_squared(ys, resid.norm_squared())))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Config("spearman needs >= 2 aligned points".into()));
    }
    let ranks = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    };
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..xs.len() {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::Config(
            "spearman undefined for constant sequences".into(),
        ));
    }
    Ok(cov / (vx * vy).sqrt())
}

//! Gaussian motion uncertainty: the error function pair, covariance
//! propagation through (closed-loop) linear dynamics and the margin
//! coefficients that turn a per-face risk budget into a linear offset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Mat2, Vec2};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Switch between the series and continued-fraction branches of [`erf`].
const SERIES_LIMIT: f64 = 2.0;

/// Error function, accurate to about 1e-15 absolute on the real line.
///
/// Maclaurin series for `|x| <= 2`, Lentz continued fraction for erfc above.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let r = if ax <= SERIES_LIMIT {
        erf_series(ax)
    } else {
        1.0 - erfc_cf(ax)
    };
    r.copysign(x)
}

/// Complementary error function `1 - erf(x)` without cancellation for large x.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > SERIES_LIMIT {
        erfc_cf(x)
    } else if x >= -SERIES_LIMIT {
        1.0 - erf(x)
    } else {
        2.0 - erfc_cf(-x)
    }
}

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/sqrt(pi) * sum_n (-1)^n x^(2n+1) / (n! (2n+1))
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= -x2 / n;
        let contrib = term / (2.0 * n + 1.0);
        sum += contrib;
        if contrib.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    FRAC_2_SQRT_PI * sum
}

fn erfc_cf(x: f64) -> f64 {
    if x > 27.3 {
        return 0.0;
    }
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    // evaluated with the modified Lentz algorithm.
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (f * std::f64::consts::PI.sqrt())
}

/// Inverse error function on the open interval (-1, 1).
pub fn erf_inv(y: f64) -> Result<f64> {
    if !(y > -1.0 && y < 1.0) {
        return Err(Error::Domain(format!("erf_inv argument {y} outside (-1, 1)")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let ay = y.abs();
    // Winitzki's closed-form guess, then Newton on erf (or erfc near 1).
    let a = 0.147;
    let ln = (1.0 - ay * ay).ln();
    let t = 2.0 / (std::f64::consts::PI * a) + 0.5 * ln;
    let mut x = ((t * t - ln / a).sqrt() - t).sqrt();
    for _ in 0..8 {
        let resid = if ay > 0.5 { (1.0 - ay) - erfc(x) } else { erf(x) - ay };
        let step = resid / (FRAC_2_SQRT_PI * (-x * x).exp());
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1e-300) {
            break;
        }
    }
    Ok(x.copysign(y))
}

/// Noise covariance for one agent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma: Mat2,
}

impl NoiseModel {
    pub fn new(sigma: Mat2) -> Result<Self> {
        if (sigma[(0, 1)] - sigma[(1, 0)]).abs() > 1e-12 {
            return Err(Error::invalid("noise covariance must be symmetric"));
        }
        let sym = (sigma + sigma.transpose()) * 0.5;
        let tr = sym.trace();
        let det = sym.determinant();
        // 2x2 symmetric PSD iff trace >= 0 and det >= 0 (with small slack).
        if tr < -1e-12 || det < -1e-12 * (1.0 + tr * tr) || sym[(0, 0)] < -1e-12 || sym[(1, 1)] < -1e-12 {
            return Err(Error::invalid("noise covariance must be positive semidefinite"));
        }
        Ok(NoiseModel { sigma: sym })
    }

    pub fn isotropic(scale: f64) -> Result<Self> {
        Self::new(Mat2::identity() * scale)
    }

    pub fn zero() -> Self {
        NoiseModel { sigma: Mat2::zeros() }
    }

    pub fn sigma(&self) -> &Mat2 {
        &self.sigma
    }

    /// Lower-triangular factor `L` with `L L^T = sigma`.
    pub fn cholesky_factor(&self) -> Mat2 {
        let s = &self.sigma;
        let l00 = s[(0, 0)].max(0.0).sqrt();
        let l10 = if l00 > 0.0 { s[(1, 0)] / l00 } else { 0.0 };
        let l11 = (s[(1, 1)] - l10 * l10).max(0.0).sqrt();
        Mat2::new(l00, 0.0, l10, l11)
    }
}

/// State covariance at each step `t = 0..=horizon`; entry 0 is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSchedule {
    pub per_step: Vec<Mat2>,
}

impl CovarianceSchedule {
    pub fn at(&self, t: usize) -> &Mat2 {
        &self.per_step[t]
    }

    pub fn len(&self) -> usize {
        self.per_step.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_step.is_empty()
    }

    /// Elementwise sum of two schedules of equal length (relative noise).
    pub fn combined(&self, other: &CovarianceSchedule) -> CovarianceSchedule {
        CovarianceSchedule {
            per_step: self.per_step.iter().zip(&other.per_step).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Error dynamics under the control `u = ū + k (x̄ − x)`: `A − k B`.
pub fn closed_loop_matrix(a: &Mat2, b: &Mat2, gain: f64) -> Mat2 {
    a - b * gain
}

/// `Σ_t = Σ_{k<t} A^{t-k-1} Σ (A^T)^{t-k-1}` for `t = 0..=horizon`.
pub fn propagate_covariance(a_cl: &Mat2, noise: &NoiseModel, horizon: usize) -> CovarianceSchedule {
    let mut per_step = Vec::with_capacity(horizon + 1);
    per_step.push(Mat2::zeros());
    if *a_cl == Mat2::identity() {
        for t in 1..=horizon {
            per_step.push(noise.sigma * t as f64);
        }
    } else {
        let mut cur = Mat2::zeros();
        for _ in 1..=horizon {
            cur = a_cl * cur * a_cl.transpose() + noise.sigma;
            per_step.push(cur);
        }
    }
    CovarianceSchedule { per_step }
}

/// How the Gaussian tail quantile is scaled into a linear margin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarginConvention {
    /// `sqrt(2 aᵀΣa)`, matching `Pr(aᵀr ≤ b) ≤ (1 − erf(s))/2`.
    #[default]
    Gaussian,
    /// `sqrt(aᵀΣa)` without the factor sqrt(2).
    Legacy,
}

/// Coefficient multiplying the margin variable `s` for one face.
pub fn margin_coefficient(face_normal: &Vec2, cov: &Mat2, convention: MarginConvention) -> f64 {
    let mut q = face_normal.dot(&(cov * face_normal));
    if q < 0.0 {
        if q < -1e-12 {
            log::warn!("negative quadratic form {q:e} in margin coefficient; clamped to 0");
        }
        q = 0.0;
    }
    match convention {
        MarginConvention::Gaussian => (2.0 * q).sqrt(),
        MarginConvention::Legacy => q.sqrt(),
    }
}

/// Per-face collision probability bound for a margin `s`: `(1 − erf(s))/2`.
pub fn risk_from_margin(s: f64) -> f64 {
    0.5 * erfc(s)
}

/// Margin that achieves risk `g`: `erf⁻¹(1 − 2g)`.
pub fn margin_from_risk(g: f64) -> Result<f64> {
    if !(g > 0.0 && g < 1.0) {
        return Err(Error::Domain(format!("risk {g} outside (0, 1)")));
    }
    erf_inv(1.0 - 2.0 * g)
}

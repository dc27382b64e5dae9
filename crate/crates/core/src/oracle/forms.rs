//! Normalised differentials on E_j(t) and their values at P₀.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::curve::CurveModel;
use crate::config::{a, epsilon};
use crate::error::{Error, Result};
use crate::nodal::NodePair;
use crate::quadrature::{circle_integral, circle_trapezoid, QuadOptions, QuadResult};

/// Coefficients of a normalised differential on E_j.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DifferentialCoeffs {
    /// ω^j = k dx/y.
    Holomorphic { k: Complex64 },
    /// ω^m = (αx² + βx + γy + δ)/((x − ξ₁)(x − ξ₂)) dx/y.
    ThirdKind {
        alpha: Complex64,
        beta: Complex64,
        gamma: Complex64,
        delta: Complex64,
        pair: NodePair,
    },
}

impl DifferentialCoeffs {
    /// The integrand f with ω = f(x) dx, given y at x.
    pub fn integrand(&self, x: Complex64, y: Complex64) -> Complex64 {
        match *self {
            DifferentialCoeffs::Holomorphic { k } => k / y,
            DifferentialCoeffs::ThirdKind {
                alpha,
                beta,
                gamma,
                delta,
                pair,
            } => {
                (alpha * x * x + beta * x + gamma * y + delta)
                    / ((x - pair.xi1) * (x - pair.xi2) * y)
            }
        }
    }

    /// Residual of the pole-cancellation conditions αξ_k² + βξ_k − γη_k + δ = 0.
    pub fn pole_condition_residual(&self) -> f64 {
        match *self {
            DifferentialCoeffs::Holomorphic { .. } => 0.0,
            DifferentialCoeffs::ThirdKind {
                alpha,
                beta,
                gamma,
                delta,
                pair,
            } => pair
                .xis()
                .iter()
                .zip(pair.etas())
                .map(|(&xi, eta)| (alpha * xi * xi + beta * xi - gamma * eta + delta).norm())
                .fold(0.0, f64::max),
        }
    }
}

/// ∮_{A_j} ω over the curve's contour.
pub fn cycle_period(
    curve: &CurveModel,
    coeffs: &DifferentialCoeffs,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    let f = |x: Complex64| coeffs.integrand(x, curve.y_on_contour(x));
    circle_integral(&f, curve.contour.center, curve.contour.radius, opts)
}

/// Same integral by the trapezoidal rule on a circle of a different radius
/// (the geometric mean of the contour radius and `radius_factor` times it).
/// Analyticity makes the value contour-independent, so this is an
/// independent check of [`cycle_period`].
pub fn cycle_period_check(
    curve: &CurveModel,
    coeffs: &DifferentialCoeffs,
    radius_factor: f64,
    n: usize,
) -> Complex64 {
    let f = |x: Complex64| coeffs.integrand(x, curve.y_on_contour(x));
    circle_trapezoid(
        &f,
        curve.contour.center,
        curve.contour.radius * radius_factor,
        n,
    )
}

/// ∮_{A_j} dx/y.
pub fn holomorphic_period(curve: &CurveModel, opts: &QuadOptions) -> Result<QuadResult> {
    cycle_period(
        curve,
        &DifferentialCoeffs::Holomorphic {
            k: Complex64::new(1.0, 0.0),
        },
        opts,
    )
}

/// k = 1/∮_{A_j} dx/y, so that ω^j = k dx/y has unit A_j-period.
pub fn normalize_holomorphic(curve: &CurveModel, opts: &QuadOptions) -> Result<Complex64> {
    Ok(holomorphic_period(curve, opts)?.value.inv())
}

/// The third-kind differential ω^m on E_j with residues ±1/2πi at P_m, Q_m
/// and zero A_j-period.
///
/// γ = (ξ₁−ξ₂)/4πi and α, β are affine in δ; the δ-dependent part of ω^m is
/// exactly δ/(ξ₁ξ₂)·dx/y, so δ = −ξ₁ξ₂·∮ω₀/∮(dx/y) with ω₀ the δ = 0 form.
pub fn third_kind(curve: &CurveModel, m: usize, opts: &QuadOptions) -> Result<DifferentialCoeffs> {
    if m == curve.j {
        return Err(Error::InvalidConfig(format!(
            "third_kind needs m ≠ j (both {m})"
        )));
    }
    let pair = curve.pair(m)?;
    let (x1, x2, e1, e2) = (pair.xi1, pair.xi2, pair.eta1, pair.eta2);
    let four_pi_i = Complex64::new(0.0, 4.0 * PI);
    let gamma = (x1 - x2) / four_pi_i;
    let alpha0 = (e1 / x1 - e2 / x2) / four_pi_i;
    let beta0 = (e1 - e2) / four_pi_i - (x1 + x2) * alpha0;
    let base = DifferentialCoeffs::ThirdKind {
        alpha: alpha0,
        beta: beta0,
        gamma,
        delta: Complex64::new(0.0, 0.0),
        pair,
    };
    let i0 = cycle_period(curve, &base, opts)?.value;
    let i1 = holomorphic_period(curve, opts)?.value;
    let x12 = x1 * x2;
    let delta = -x12 * i0 / i1;
    let alpha = alpha0 + delta / x12;
    let beta = beta0 - (x1 + x2) * delta / x12;
    Ok(DifferentialCoeffs::ThirdKind {
        alpha,
        beta,
        gamma,
        delta,
        pair,
    })
}

/// The normalised differential ω^m on E_j: holomorphic for m = j,
/// third kind otherwise.
pub fn differential(
    curve: &CurveModel,
    m: usize,
    opts: &QuadOptions,
) -> Result<DifferentialCoeffs> {
    if m == curve.j {
        Ok(DifferentialCoeffs::Holomorphic {
            k: normalize_holomorphic(curve, opts)?,
        })
    } else {
        third_kind(curve, m, opts)
    }
}

/// ω(P₀) = Res_{P₀} ζ⁻¹ω.
///
/// Near P₀, x̃ = 1/x = ε/(a c_j)(ζ + O(ζ²)) and y/x² → −1, which gives
/// εk/(a c_j) for the holomorphic form and ε(α − γ)/(a c_j) otherwise.
pub fn omega_p0(curve: &CurveModel, coeffs: &DifferentialCoeffs) -> Complex64 {
    let cj = Complex64::from_polar(1.0, curve.angles[curve.j]);
    let factor = epsilon() / (a() * cj);
    match *coeffs {
        DifferentialCoeffs::Holomorphic { k } => factor * k,
        DifferentialCoeffs::ThirdKind { alpha, gamma, .. } => factor * (alpha - gamma),
    }
}

/// Residues of a third-kind form at P_m and Q_m by small-circle quadrature,
/// with y continued from η_k.
pub fn residues_by_quadrature(
    curve: &CurveModel,
    coeffs: &DifferentialCoeffs,
    opts: &QuadOptions,
) -> Result<[Complex64; 2]> {
    let DifferentialCoeffs::ThirdKind { pair, .. } = *coeffs else {
        return Err(Error::InvalidConfig(
            "residues need a third-kind differential".into(),
        ));
    };
    let mut out = [Complex64::new(0.0, 0.0); 2];
    for (k, (xi, eta)) in pair.xis().into_iter().zip(pair.etas()).enumerate() {
        let other = pair.xis()[1 - k];
        let near = curve
            .branch_points
            .iter()
            .chain(std::iter::once(&other))
            .map(|p| (p - xi).norm())
            .fold(f64::INFINITY, f64::min);
        let (_, dq) = curve.quartic.eval_with_derivative(xi);
        let radius = 0.1 * near.min(eta.norm_sqr() / dq.norm().max(1e-300));
        let f = |x: Complex64| coeffs.integrand(x, curve.y_near(eta, x));
        let r = circle_integral(&f, xi, radius, opts)?;
        out[k] = r.value / Complex64::new(0.0, 2.0 * PI);
    }
    Ok(out)
}

/// Residue at P_m from the local expansion: N(ξ₁, η₁)/((ξ₁ − ξ₂)η₁).
pub fn residue_by_series(coeffs: &DifferentialCoeffs) -> Option<Complex64> {
    match *coeffs {
        DifferentialCoeffs::ThirdKind {
            alpha,
            beta,
            gamma,
            delta,
            pair,
        } => {
            let (x, y) = (pair.xi1, pair.eta1);
            Some((alpha * x * x + beta * x + gamma * y + delta) / ((x - pair.xi2) * y))
        }
        DifferentialCoeffs::Holomorphic { .. } => None,
    }
}

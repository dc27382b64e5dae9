//! Closed forms on the nodal locus t = 0.
//!
//! Everything here is an explicit function of the angles: the period vectors
//! u, v, the node points (ξ, η) over λ = b_m on E_j(0), the quantities X_mj
//! and Y_mj, and the first-order derivative table of (u, v).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{a, residue_modulus, BranchConfig, TWO_PI_3};
use crate::error::{Error, Result};

/// |2cosθ_mj + 1| and |ξ_k|/a must exceed this.
pub const SINGULAR_MARGIN: f64 = 1e-6;

/// The pair (u, v) spanning the period plane W ⊂ ℝ^{g+2}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodPlane {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl PeriodPlane {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Self {
        assert_eq!(u.len(), v.len(), "u and v must have equal length");
        PeriodPlane { u, v }
    }

    /// Ambient dimension g + 2.
    pub fn dim(&self) -> usize {
        self.u.len()
    }

    /// Builds (u, v) from the complex values ω^m(P₀) = u_m + i v_m.
    pub fn from_values(values: &[Complex64]) -> Self {
        PeriodPlane {
            u: values.iter().map(|w| w.re).collect(),
            v: values.iter().map(|w| w.im).collect(),
        }
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(&u, &v)| Complex64::new(u, v))
            .collect()
    }

    /// The 2×(g+2) matrix with rows u and v.
    pub fn as_rows(&self) -> DMatrix<f64> {
        DMatrix::from_fn(
            2,
            self.dim(),
            |r, c| if r == 0 { self.u[c] } else { self.v[c] },
        )
    }
}

/// Points P_m = (ξ₁, η₁) and Q_m = (ξ₂, η₂) over λ = b_m on E_j.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePair {
    pub xi1: Complex64,
    pub xi2: Complex64,
    pub eta1: Complex64,
    pub eta2: Complex64,
    pub theta_mj: f64,
}

impl NodePair {
    pub fn xis(&self) -> [Complex64; 2] {
        [self.xi1, self.xi2]
    }

    pub fn etas(&self) -> [Complex64; 2] {
        [self.eta1, self.eta2]
    }
}

/// The four (g+2)×g blocks of the Jacobian of (u, v) at t = 0.
///
/// The upper g×g blocks are A = ∂u/∂θ, B = ∂v/∂θ, C = ∂u/∂t, D = ∂v/∂t;
/// rows g, g+1 belong to the virtual indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTable {
    pub du_dtheta: DMatrix<f64>,
    pub dv_dtheta: DMatrix<f64>,
    pub du_dt: DMatrix<f64>,
    pub dv_dt: DMatrix<f64>,
}

impl DerivativeTable {
    pub fn zeros(g: usize) -> Self {
        DerivativeTable {
            du_dtheta: DMatrix::zeros(g + 2, g),
            dv_dtheta: DMatrix::zeros(g + 2, g),
            du_dt: DMatrix::zeros(g + 2, g),
            dv_dt: DMatrix::zeros(g + 2, g),
        }
    }

    pub fn g(&self) -> usize {
        self.du_dt.ncols()
    }

    fn upper(m: &DMatrix<f64>) -> DMatrix<f64> {
        let g = m.ncols();
        m.view((0, 0), (g, g)).into_owned()
    }

    pub fn a_block(&self) -> DMatrix<f64> {
        Self::upper(&self.du_dtheta)
    }

    pub fn b_block(&self) -> DMatrix<f64> {
        Self::upper(&self.dv_dtheta)
    }

    pub fn c_block(&self) -> DMatrix<f64> {
        Self::upper(&self.du_dt)
    }

    pub fn d_block(&self) -> DMatrix<f64> {
        Self::upper(&self.dv_dt)
    }

    /// Full (2(g+2))×(2g) Jacobian of the stacked vector (u, v) with respect
    /// to (θ, t).
    pub fn stacked(&self) -> DMatrix<f64> {
        let g = self.g();
        let n = g + 2;
        let mut j = DMatrix::zeros(2 * n, 2 * g);
        j.view_mut((0, 0), (n, g)).copy_from(&self.du_dtheta);
        j.view_mut((0, g), (n, g)).copy_from(&self.du_dt);
        j.view_mut((n, 0), (n, g)).copy_from(&self.dv_dtheta);
        j.view_mut((n, g), (n, g)).copy_from(&self.dv_dt);
        j
    }
}

/// ω^m(P₀) = (√3/2π) e^{i(2π/3 − θ_m)} on the nodal locus.
pub fn omega_origin(theta_m: f64) -> Complex64 {
    Complex64::from_polar(residue_modulus(), TWO_PI_3 - theta_m)
}

/// u, v at t = 0 for all g+2 indices.
///
/// Slot g+1 uses the residue value (√3/2π)(−1/2, √3/2), not the (−1/2, 1/2)
/// pair that appears in some printed versions of these vectors.
pub fn uv_origin(cfg: &BranchConfig) -> PeriodPlane {
    let values: Vec<Complex64> = cfg.all_angles().into_iter().map(omega_origin).collect();
    PeriodPlane::from_values(&values)
}

fn check_pair_margins(theta_mj: f64, xi1: f64, xi2: f64) -> Result<()> {
    let a = a();
    let denom = 2.0 * theta_mj.cos() + 1.0;
    if denom.abs() <= SINGULAR_MARGIN {
        return Err(Error::SingularPair {
            theta_mj,
            reason: format!("|2cos θ_mj + 1| = {:e}", denom.abs()),
        });
    }
    for (k, xi) in [xi1, xi2].into_iter().enumerate() {
        if xi.abs() / a <= SINGULAR_MARGIN {
            return Err(Error::SingularPair {
                theta_mj,
                reason: format!("|ξ_{}|/a = {:e}", k + 1, xi.abs() / a),
            });
        }
    }
    Ok(())
}

/// Closed-form node points on E_j(0):
/// ξ₁ = a(2cos(θ_mj + 2π/3) + 1), ξ₂ = a(2cos(θ_mj − 2π/3) + 1),
/// η_k = ξ_k · 2ai sin(θ_mj ± 2π/3).
pub fn node_pair(theta_mj: f64) -> Result<NodePair> {
    let a = a();
    // 2cos(θ ± 2π/3) + 1 = −4 sin(θ/2 ± 2π/3) sin(θ/2), free of cancellation near θ = 0.
    let half = 0.5 * theta_mj;
    let xi1 = -4.0 * a * (half + TWO_PI_3).sin() * half.sin();
    let xi2 = -4.0 * a * (half - TWO_PI_3).sin() * half.sin();
    check_pair_margins(theta_mj, xi1, xi2)?;
    let eta1 = Complex64::new(0.0, xi1 * 2.0 * a * (theta_mj + TWO_PI_3).sin());
    let eta2 = Complex64::new(0.0, xi2 * 2.0 * a * (theta_mj - TWO_PI_3).sin());
    Ok(NodePair {
        xi1: xi1.into(),
        xi2: xi2.into(),
        eta1,
        eta2,
        theta_mj,
    })
}

/// (X_mj, Y_mj) with X = 2a/ξ₁ − 2a/ξ₂ and
/// Y = sin(3θ)(ξ₁³ − ξ₂³)/(ξ₁ξ₂)³ − √3/(2cosθ + 1).
pub fn xy_quantities(theta_mj: f64) -> Result<(f64, f64)> {
    let pair = node_pair(theta_mj)?;
    let a = a();
    let (x1, x2) = (pair.xi1.re, pair.xi2.re);
    let x = 2.0 * a / x1 - 2.0 * a / x2;
    let y = (3.0 * theta_mj).sin() * (x1.powi(3) - x2.powi(3)) / (x1 * x2).powi(3)
        - 3f64.sqrt() / (2.0 * theta_mj.cos() + 1.0);
    Ok((x, y))
}

/// The derivative table at t = 0, with the m ≠ j formula applied to the
/// virtual rows as well.
pub fn analytic_jacobian(cfg: &BranchConfig) -> Result<DerivativeTable> {
    let g = cfg.g();
    let a = a();
    let s = residue_modulus();
    let mut table = DerivativeTable::zeros(g);
    for j in 0..g {
        let phi = TWO_PI_3 - cfg.angle(j);
        let (cos_phi, sin_phi) = (phi.cos(), phi.sin());
        table.du_dtheta[(j, j)] = s * sin_phi;
        table.dv_dtheta[(j, j)] = -s * cos_phi;
        for m in 0..g + 2 {
            if m == j {
                table.du_dt[(j, j)] = -s / a * cos_phi;
                table.dv_dt[(j, j)] = -s / a * sin_phi;
            } else {
                let (x, y) = xy_quantities(cfg.angle(m) - cfg.angle(j))?;
                let k = 1.0 / (12.0 * PI * a);
                table.du_dt[(m, j)] = k * (cos_phi * y + sin_phi * x);
                table.dv_dt[(m, j)] = k * (sin_phi * y - cos_phi * x);
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::BranchConfig;
    use proptest::prelude::*;

    const SQRT3: f64 = 1.732_050_807_568_877_2;

    #[test]
    fn uv_origin_examples() {
        let s = residue_modulus();
        let cfg = BranchConfig::at_nodal_locus(&[PI / 6.0]).unwrap();
        let p = uv_origin(&cfg);
        assert!(p.u[0].abs() < 1e-16);
        assert!((p.v[0] - 0.275_664).abs() < 1e-6);
        assert!((p.u[2] - s).abs() < 1e-16 && p.v[2].abs() < 1e-16);
        assert!((p.u[1] + s / 2.0).abs() < 1e-15);
        assert!((p.v[1] - s * SQRT3 / 2.0).abs() < 1e-15);

        let cfg = BranchConfig::at_nodal_locus(&[PI / 3.0]).unwrap();
        let p = uv_origin(&cfg);
        assert!((p.u[0] - s * 0.5).abs() < 1e-15);
        assert!((p.v[0] - s * SQRT3 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn node_pair_examples() {
        let a = a();
        let p = node_pair(PI / 3.0).unwrap();
        assert!((p.xi1.re + a).abs() < 1e-15 && (p.xi1.re + 0.793_701).abs() < 1e-6);
        assert!((p.xi2.re - 2.0 * a).abs() < 1e-15);
        assert!(p.eta1.norm() < 1e-15);
        assert!((p.eta2 - Complex64::new(0.0, -2.0 * SQRT3 * a * a)).norm() < 1e-14);

        let p = node_pair(PI / 6.0).unwrap();
        assert!((p.xi1.re - a * (1.0 - SQRT3)).abs() < 1e-15);
        assert!((p.xi2.re - a).abs() < 1e-15);

        assert!(matches!(node_pair(0.0), Err(Error::SingularPair { .. })));
        assert!(matches!(
            node_pair(TWO_PI_3),
            Err(Error::SingularPair { .. })
        ));
    }

    #[test]
    fn xy_examples() {
        let (x, y) = xy_quantities(PI / 3.0).unwrap();
        assert!((x + 3.0).abs() < 1e-13);
        assert!((y + SQRT3 / 2.0).abs() < 1e-13);
        let (x, y) = xy_quantities(-PI / 3.0).unwrap();
        assert!((x - 3.0).abs() < 1e-13);
        assert!((y + SQRT3 / 2.0).abs() < 1e-13);
        let (_, y) = xy_quantities(PI / 6.0).unwrap();
        // 2(c − 1)/c − √3/(√3 + 1) with c = (1 − √3)³ = 10 − 6√3, which is 3 + 2√3.
        let c = 10.0 - 6.0 * SQRT3;
        assert!((y - (2.0 * (c - 1.0) / c - SQRT3 / (SQRT3 + 1.0))).abs() < 1e-12);
        assert!((y - (3.0 + 2.0 * SQRT3)).abs() < 1e-12);
        assert!((y - 6.4641).abs() < 1e-4);
    }

    #[test]
    fn jacobian_examples() {
        let s = residue_modulus();
        let cfg = BranchConfig::at_nodal_locus(&[PI / 6.0]).unwrap();
        let t = analytic_jacobian(&cfg).unwrap();
        assert!(t.du_dt[(0, 0)].abs() < 1e-16);
        assert!((t.du_dtheta[(0, 0)] - s).abs() < 1e-16);

        let cfg = BranchConfig::at_nodal_locus(&[0.4, 0.9, 1.6]).unwrap();
        let t = analytic_jacobian(&cfg).unwrap();
        for m in 0..5 {
            for j in 0..3 {
                if m != j {
                    assert_eq!(t.du_dtheta[(m, j)], 0.0);
                    assert_eq!(t.dv_dtheta[(m, j)], 0.0);
                }
            }
        }
        for j in 0..3 {
            let want = -(s / a()) * (TWO_PI_3 - cfg.angle(j)).cos();
            assert!((t.du_dt[(j, j)] - want).abs() < 1e-16);
        }
    }

    fn admissible() -> impl Strategy<Value = f64> {
        (0.01f64..2.05).prop_filter("stay off ξ and Y walls", |t| (t - TWO_PI_3).abs() > 0.01)
    }

    proptest! {
        #[test]
        fn x_odd_y_even(th in admissible()) {
            let (xp, yp) = xy_quantities(th).unwrap();
            let (xm, ym) = xy_quantities(-th).unwrap();
            prop_assert!((xp + xm).abs() <= 1e-12 * (1.0 + xp.abs()));
            prop_assert!((yp - ym).abs() <= 1e-12 * (1.0 + yp.abs()));
        }

        #[test]
        fn node_pair_on_nodal_curve(th in admissible()) {
            let a = a();
            let p = node_pair(th).unwrap();
            let prod = p.xi1.re * p.xi2.re;
            let want = 2.0 * a * a * (2.0 * th.cos() + 1.0) * (th.cos() - 1.0);
            prop_assert!((prod - want).abs() < 1e-12);
            for (x, y) in [(p.xi1, p.eta1), (p.xi2, p.eta2)] {
                prop_assert!((y / x).re.abs() < 1e-15);
                let rhs = x * x * (x - 3.0 * a) * (x + a);
                prop_assert!((y * y - rhs).norm() < 1e-12);
                // y = i sin 3θ / (x − 2a) on the same sheet, away from x = 2a.
                if (x.re - 2.0 * a).abs() < 1e-3 {
                    continue;
                }
                let y2 = Complex64::new(0.0, (3.0 * th).sin()) / (x - 2.0 * a);
                prop_assert!((y - y2).norm() < 1e-12);
            }
        }

        #[test]
        fn modulus_law(th in proptest::collection::vec(0.1f64..2.0, 1)) {
            let cfg = BranchConfig::at_nodal_locus(&th).unwrap();
            let p = uv_origin(&cfg);
            for m in 0..3 {
                prop_assert!((p.u[m].hypot(p.v[m]) - residue_modulus()).abs() < 1e-15);
            }
        }
    }
}

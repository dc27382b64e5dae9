//! The reduced matrix N = CB − DA, its determinant, and the meromorphic
//! extension h(z₁, …, z_g) with its limits at infinity.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{
    a, epsilon, lagrangian_power_points, power_points, BranchConfig, ExtendedEvalPoint,
};
use crate::error::{Error, Result};
use crate::nodal::{xy_quantities, DerivativeTable};

/// Off-diagonal size of A, B tolerated by [`reduce_blocks`].
pub const DIAGONAL_TOL: f64 = 1e-12;
/// |r + r⁻¹ + 1| and |ξ_k|/a must exceed this in the extension.
pub const POLE_MARGIN: f64 = 1e-8;

/// n_j^j = 3/(4π²a).
pub fn n_diagonal() -> f64 {
    3.0 / (4.0 * PI * PI * a())
}

/// The coefficient −√3/(24π²a) multiplying Y_mj off the diagonal.
pub fn n_offdiagonal_factor() -> f64 {
    -(3f64.sqrt()) / (24.0 * PI * PI * a())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    BlockReduced,
    Extended,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NMatrix {
    pub n: DMatrix<f64>,
    pub provenance: Provenance,
}

impl NMatrix {
    pub fn det(&self) -> f64 {
        self.n.determinant()
    }
}

/// N = C·B − D·A from the upper g×g blocks of the derivative table.
pub fn reduce_blocks(table: &DerivativeTable) -> Result<NMatrix> {
    let (a, b) = (table.a_block(), table.b_block());
    let g = a.nrows();
    let mut off = 0.0f64;
    for i in 0..g {
        for k in 0..g {
            if i != k {
                off = off.max(a[(i, k)].abs()).max(b[(i, k)].abs());
            }
        }
    }
    if off >= DIAGONAL_TOL {
        return Err(Error::NonDiagonalBlocks(off));
    }
    let n = table.c_block() * b - table.d_block() * a;
    Ok(NMatrix {
        n,
        provenance: Provenance::BlockReduced,
    })
}

/// N assembled directly from Y_mj.
pub fn closed_n(cfg: &BranchConfig) -> Result<NMatrix> {
    let g = cfg.g();
    let mut n = DMatrix::from_diagonal_element(g, g, n_diagonal());
    for m in 0..g {
        for j in 0..g {
            if m != j {
                let (_, y) = xy_quantities(cfg.angle(m) - cfg.angle(j))?;
                n[(m, j)] = n_offdiagonal_factor() * y;
            }
        }
    }
    Ok(NMatrix {
        n,
        provenance: Provenance::ClosedForm,
    })
}

/// Y as a function of r = z_m/z_j on ℂ*.
///
/// ξ₁³ − ξ₂³ is taken in the factored form −3√3 i a³ (r − r⁻¹)(r − 1)²/r,
/// which avoids cancellation for large and small |r|.
pub fn extended_y(zm: Complex64, zj: Complex64) -> Result<Complex64> {
    let a = a();
    let e = epsilon();
    let r = zm / zj;
    let ri = r.inv();
    let denom = r + ri + 1.0;
    if !(denom.norm() > POLE_MARGIN) {
        return Err(Error::PoleProximity(format!(
            "|r + 1/r + 1| = {:e} at r = {r}",
            denom.norm()
        )));
    }
    let xi1 = a * (e * r + e.conj() * ri + 1.0);
    let xi2 = a * (e.conj() * r + e * ri + 1.0);
    for (k, xi) in [xi1, xi2].iter().enumerate() {
        if !(xi.norm() > POLE_MARGIN * a) {
            return Err(Error::PoleProximity(format!(
                "|ξ_{}| = {:e} at r = {r}",
                k + 1,
                xi.norm()
            )));
        }
    }
    let i = Complex64::i();
    let sin3 = (r.powu(3) - ri.powu(3)) / (2.0 * i);
    let diff = -3.0 * 3f64.sqrt() * i * a.powi(3) * (r - ri) * (r - 1.0) * (r - 1.0) * ri;
    Ok(sin3 * diff / (xi1 * xi2).powu(3) - 3f64.sqrt() / denom)
}

/// The extended N with Y replaced by its continuation.
pub fn extended_n(z: &ExtendedEvalPoint) -> Result<DMatrix<Complex64>> {
    let zs = z.z();
    let g = zs.len();
    let mut n = DMatrix::from_diagonal_element(g, g, Complex64::new(n_diagonal(), 0.0));
    for m in 0..g {
        for j in 0..g {
            if m != j {
                n[(m, j)] = n_offdiagonal_factor() * extended_y(zs[m], zs[j])?;
            }
        }
    }
    Ok(n)
}

/// h(z) = det N(z).
pub fn h_det(z: &ExtendedEvalPoint) -> Result<Complex64> {
    Ok(extended_n(z)?.determinant())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitMatrices {
    pub n0: DMatrix<f64>,
    pub det_n0: f64,
    pub n1: Option<DMatrix<f64>>,
    pub det_n1: Option<f64>,
}

/// N₀ = diag(3/4π²a) and, for g = 2p, N₁ = (3/24π²a)[[6I, −I], [−I, 6I]].
pub fn limit_matrices(g: usize, p: Option<usize>) -> Result<LimitMatrices> {
    if g == 0 {
        return Err(Error::InvalidConfig("g must be at least 1".into()));
    }
    let d = n_diagonal();
    let n0 = DMatrix::from_diagonal_element(g, g, d);
    let det_n0 = d.powi(g as i32);
    let (n1, det_n1) = match p {
        None => (None, None),
        Some(p) if p >= 1 && 2 * p == g => {
            let s = 1.0 / (8.0 * PI * PI * a());
            let n1 = DMatrix::from_fn(g, g, |r, c| {
                if r == c {
                    6.0 * s
                } else if r.abs_diff(c) == p {
                    -s
                } else {
                    0.0
                }
            });
            (Some(n1), Some((35.0 * s * s).powi(p as i32)))
        }
        Some(p) => return Err(Error::BadHalfGenus(format!("g = {g}, p = {p}"))),
    };
    Ok(LimitMatrices {
        n0,
        det_n0,
        n1,
        det_n1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMode {
    Generic,
    Lagrangian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        ComplexValue { re: z.re, im: z.im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub radius: f64,
    pub h_value: ComplexValue,
    pub limit: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ProbeRow>,
    /// Least-squares slope of −log|h − limit| against log radius; `None`
    /// when fewer than two errors sit above rounding level, i.e. h already
    /// equals its limit along the probe.
    pub fitted_order: Option<f64>,
}

impl ConvergenceReport {
    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.abs_error).fold(0.0, f64::max)
    }
}

/// Errors below this multiple of |limit| count as rounding.
pub const ROUNDING_FLOOR: f64 = 1e-13;

/// h along z ↦ (z, z², …, z^g) (generic) or z_m = z^m, z_{p+m} = −z^m
/// (Lagrangian, g = 2p), at each real radius.
pub fn asymptotic_probe(g: usize, mode: ProbeMode, radii: &[f64]) -> Result<ConvergenceReport> {
    if radii.is_empty()
        || radii.iter().any(|r| !(*r >= 10.0))
        || radii.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidConfig(format!(
            "radii must be increasing and at least 10, got {radii:?}"
        )));
    }
    let (limit, point): (f64, Box<dyn Fn(Complex64) -> Result<ExtendedEvalPoint>>) = match mode {
        ProbeMode::Generic => (
            limit_matrices(g, None)?.det_n0,
            Box::new(move |z| power_points(g, z)),
        ),
        ProbeMode::Lagrangian => {
            if g == 0 || !g.is_multiple_of(2) {
                return Err(Error::BadHalfGenus(format!("g = {g} is not even")));
            }
            let p = g / 2;
            let lim = limit_matrices(g, Some(p))?
                .det_n1
                .expect("N₁ exists for g = 2p");
            (lim, Box::new(move |z| lagrangian_power_points(p, z)))
        }
    };
    let mut rows = Vec::with_capacity(radii.len());
    for &radius in radii {
        let z =
            point(Complex64::new(radius, 0.0)).map_err(|e| Error::PoleProximity(e.to_string()))?;
        let h = h_det(&z)?;
        rows.push(ProbeRow {
            radius,
            h_value: h.into(),
            limit,
            abs_error: (h - limit).norm(),
        });
    }
    let fit: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.abs_error > ROUNDING_FLOOR * limit.abs())
        .map(|r| (r.radius.ln(), -r.abs_error.ln()))
        .collect();
    let fitted_order = (fit.len() >= 2).then(|| slope(&fit));
    Ok(ConvergenceReport { rows, fitted_order })
}

/// Least-squares slope of y against x.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nodal::analytic_jacobian;
    use proptest::prelude::*;

    #[test]
    fn diagonal_value() {
        assert!((n_diagonal() - 0.095_742_5).abs() < 1e-7);
        let n = closed_n(&BranchConfig::at_nodal_locus(&[0.8]).unwrap()).unwrap();
        assert!((n.det() - n_diagonal()).abs() < 1e-17);
    }

    #[test]
    fn two_by_two_example() {
        let cfg = BranchConfig::at_nodal_locus(&[PI / 6.0, PI / 3.0]).unwrap();
        let n = closed_n(&cfg).unwrap();
        let (_, y) = xy_quantities(PI / 6.0).unwrap();
        let off = n_offdiagonal_factor() * y;
        assert!((n.n[(0, 1)] - off).abs() < 1e-16 && (n.n[(1, 0)] - off).abs() < 1e-16);
        let reduced = reduce_blocks(&analytic_jacobian(&cfg).unwrap()).unwrap();
        assert_eq!(reduced.provenance, Provenance::BlockReduced);
        assert!((&reduced.n - &n.n).amax() < 1e-12);
    }

    #[test]
    fn non_diagonal_blocks_rejected() {
        let cfg = BranchConfig::at_nodal_locus(&[0.3, 1.2]).unwrap();
        let mut t = analytic_jacobian(&cfg).unwrap();
        t.du_dtheta[(0, 1)] = 1e-6;
        assert!(matches!(
            reduce_blocks(&t),
            Err(Error::NonDiagonalBlocks(_))
        ));
    }

    #[test]
    fn extended_y_special_values() {
        let one = Complex64::new(1.0, 0.0);
        let y = extended_y(-one, one).unwrap();
        assert!((y - 3f64.sqrt()).norm() < 1e-14);
        // Y is invariant under r ↦ 1/r, so the leading term is −4√3/r at
        // infinity, matching −4√3·r at zero.
        for r in [1e3, 1e5, -1e4] {
            let y = extended_y(Complex64::new(r, 0.0), one).unwrap();
            assert!((y * r / (4.0 * 3f64.sqrt()) + 1.0).norm() < 1.0 / r.abs());
            let y0 = extended_y(Complex64::new(1.0 / r, 0.0), one).unwrap();
            assert!((y0 - y).norm() < 1e-12 * y.norm());
        }
        let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        assert!(matches!(extended_y(w, one), Err(Error::PoleProximity(_))));
        assert!(matches!(extended_y(one, one), Err(Error::PoleProximity(_))));
    }

    #[test]
    fn extended_y_direct_formula_agrees_off_circle() {
        let a = a();
        let e = epsilon();
        for r in [
            Complex64::new(0.7, 0.4),
            Complex64::new(-2.0, 0.3),
            Complex64::new(1.5, -1.1),
        ] {
            let ri = r.inv();
            let x1 = a * (e * r + e.conj() * ri + 1.0);
            let x2 = a * (e.conj() * r + e * ri + 1.0);
            let direct = (r.powu(3) - ri.powu(3)) / (2.0 * Complex64::i())
                * (x1.powu(3) - x2.powu(3))
                / (x1.powu(3) * x2.powu(3))
                - 3f64.sqrt() / (r + ri + 1.0);
            let y = extended_y(r, Complex64::new(1.0, 0.0)).unwrap();
            assert!((y - direct).norm() < 1e-12 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn limits() {
        let l = limit_matrices(2, None).unwrap();
        assert!((l.det_n0 - n_diagonal().powi(2)).abs() < 1e-18);
        assert!((l.det_n0 - 9.1666e-3).abs() < 1e-7);
        let l = limit_matrices(2, Some(1)).unwrap();
        assert!((l.det_n1.unwrap() - 8.9120e-3).abs() < 1e-7);
        for p in 1..4 {
            let l = limit_matrices(2 * p, Some(p)).unwrap();
            let n1 = l.n1.unwrap();
            assert!((n1.determinant() - l.det_n1.unwrap()).abs() < 1e-14);
            assert!(l.det_n1.unwrap() != 0.0);
        }
        assert!(matches!(
            limit_matrices(3, Some(1)),
            Err(Error::BadHalfGenus(_))
        ));
    }

    #[test]
    fn probes() {
        let r = asymptotic_probe(3, ProbeMode::Generic, &[10.0, 100.0, 1000.0]).unwrap();
        assert!(r.fitted_order.unwrap() >= 0.9, "{r:?}");
        assert!(r.rows[2].abs_error < r.rows[0].abs_error);
        let r = asymptotic_probe(4, ProbeMode::Lagrangian, &[10.0, 100.0, 1000.0]).unwrap();
        assert!(r.fitted_order.unwrap() >= 0.9, "{r:?}");
        assert!((r.rows[0].limit - (35.0 / (64.0 * PI.powi(4) * a() * a())).powi(2)).abs() < 1e-16);
        let r = asymptotic_probe(1, ProbeMode::Generic, &[10.0, 100.0]).unwrap();
        assert!(r.rows.iter().all(|row| row.abs_error == 0.0));
        assert!(r.fitted_order.is_none());
        assert!(asymptotic_probe(3, ProbeMode::Lagrangian, &[10.0]).is_err());
        assert!(asymptotic_probe(2, ProbeMode::Generic, &[100.0, 10.0]).is_err());
    }

    #[test]
    fn h_on_circle_is_det_n() {
        let cfg = BranchConfig::at_nodal_locus(&[0.2, 0.9, 1.7]).unwrap();
        let h = h_det(&ExtendedEvalPoint::on_unit_circle(&cfg)).unwrap();
        let det = closed_n(&cfg).unwrap().det();
        assert!((h - det).norm() < 1e-14 && h.im.abs() < 1e-15);
    }

    fn chart(g: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.05f64..2.0, g).prop_filter_map("separated", |mut v| {
            v.sort_by(f64::total_cmp);
            let ok = v.windows(2).all(|w| w[1] - w[0] > 0.02);
            ok.then_some(v)
        })
    }

    proptest! {
        #[test]
        fn two_paths_agree(theta in (2usize..6).prop_flat_map(chart)) {
            let cfg = BranchConfig::at_nodal_locus(&theta).unwrap();
            let closed = closed_n(&cfg).unwrap();
            let reduced = reduce_blocks(&analytic_jacobian(&cfg).unwrap()).unwrap();
            prop_assert!((&closed.n - &reduced.n).amax() < 1e-12 * (1.0 + closed.n.amax()));
            prop_assert!((&closed.n - closed.n.transpose()).amax() == 0.0);
        }

        #[test]
        fn h_is_homogeneous(theta in chart(3), re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let c = Complex64::new(re, im);
            prop_assume!(c.norm() > 0.1);
            let cfg = BranchConfig::at_nodal_locus(&theta).unwrap();
            let z = ExtendedEvalPoint::on_unit_circle(&cfg);
            let h = h_det(&z).unwrap();
            let hc = h_det(&z.scaled(c).unwrap()).unwrap();
            prop_assert!((h - hc).norm() < 1e-10 * (1.0 + h.norm()));
        }

        #[test]
        fn extension_restricts_to_circle(th in 0.02f64..2.05) {
            prop_assume!((th - 2.0 * PI / 3.0).abs() > 0.02);
            let (_, y) = xy_quantities(th).unwrap();
            let ye = extended_y(Complex64::from_polar(1.0, th), Complex64::new(1.0, 0.0)).unwrap();
            prop_assert!((ye - y).norm() < 1e-12 * (1.0 + y.abs()));
        }
    }
}

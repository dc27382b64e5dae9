//! Exact evaluation on the genus-one partial desingularisations E_j(t_j).
//!
//! This is the independent check on every closed form in [`crate::nodal`]:
//! curves are built from their defining equation, differentials are
//! normalised by contour quadrature around the vanishing cycle, and
//! derivatives come from finite differences in t.

pub mod curve;
pub mod forms;

pub use curve::{branch_quartic, build_curve, level_cubic, locate_pair, p_t, Contour, CurveModel};
pub use forms::{
    cycle_period, cycle_period_check, differential, holomorphic_period, normalize_holomorphic,
    omega_p0, residue_by_series, residues_by_quadrature, third_kind, DifferentialCoeffs,
};

use num_complex::Complex64;

use crate::config::BranchConfig;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::nodal::{analytic_jacobian, DerivativeTable, PeriodPlane};
use crate::quadrature::QuadOptions;

/// All ω^m(P₀), m = 1..g+2, on E_j(t).
pub fn omega_values(
    cfg: &BranchConfig,
    j: usize,
    t: f64,
    opts: &QuadOptions,
) -> Result<Vec<Complex64>> {
    let curve = build_curve(cfg, j, t)?;
    (0..cfg.g() + 2)
        .map(|m| differential(&curve, m, opts).map(|w| omega_p0(&curve, &w)))
        .collect()
}

/// (u, v) on the single-axis deformation t_j = t, all other t zero.
pub fn uv_axis(cfg: &BranchConfig, j: usize, t: f64, opts: &QuadOptions) -> Result<PeriodPlane> {
    Ok(PeriodPlane::from_values(&omega_values(cfg, j, t, opts)?))
}

/// (u, v) at a configuration with at most one nonzero t_j.
pub fn uv_single_axis(cfg: &BranchConfig, opts: &QuadOptions) -> Result<PeriodPlane> {
    let active: Vec<usize> = (0..cfg.g()).filter(|&j| cfg.t()[j] != 0.0).collect();
    match active.as_slice() {
        [] => uv_axis(cfg, 0, 0.0, opts),
        [j] => uv_axis(cfg, *j, cfg.t()[*j], opts),
        _ => Err(Error::ModelUnavailable(format!(
            "exact evaluation needs a single-axis deformation, got nonzero t at {active:?}"
        ))),
    }
}

/// Central difference of `f` at 0 with one Richardson level:
/// (4·D(h/2) − D(h))/3.
pub fn richardson<F>(f: F, h: f64) -> Result<Vec<Complex64>>
where
    F: Fn(f64) -> Result<Vec<Complex64>>,
{
    let central = |s: f64| -> Result<Vec<Complex64>> {
        let p = f(s)?;
        let m = f(-s)?;
        Ok(p.iter().zip(&m).map(|(p, m)| (p - m) / (2.0 * s)).collect())
    };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    Ok(fine
        .iter()
        .zip(&coarse)
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .collect())
}

/// Finite-difference t-columns of the derivative table (θ-columns are the
/// exact closed forms, which need no oracle at t = 0).
pub fn fd_jacobian(
    cfg: &BranchConfig,
    step: f64,
    opts: &QuadOptions,
    exec: Execution,
) -> Result<DerivativeTable> {
    if !(1e-6..=1e-2).contains(&step) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step {step} outside [1e-6, 1e-2]"
        )));
    }
    let g = cfg.g();
    let axes: Vec<usize> = (0..g).collect();
    let columns = exec::map(exec, &axes, |&j| {
        richardson(|s| omega_values(cfg, j, s, opts), step)
    });
    let mut table = analytic_jacobian(cfg)?;
    for (j, col) in columns.into_iter().enumerate() {
        let col = col?;
        for (m, d) in col.iter().enumerate() {
            table.du_dt[(m, j)] = d.re;
            table.dv_dt[(m, j)] = d.im;
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nodal::uv_origin;

    #[test]
    fn axis_base_case_matches_closed_form() {
        let cfg = BranchConfig::at_nodal_locus(&[0.3, 1.1]).unwrap();
        let opts = QuadOptions::default();
        let closed = uv_origin(&cfg);
        for j in 0..2 {
            let p = uv_axis(&cfg, j, 0.0, &opts).unwrap();
            for m in 0..4 {
                assert!((p.u[m] - closed.u[m]).abs() < 1e-10);
                assert!((p.v[m] - closed.v[m]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn multi_axis_is_unavailable() {
        let cfg = BranchConfig::at_nodal_locus(&[0.3, 1.1])
            .unwrap()
            .with_t(vec![0.01, 0.01])
            .unwrap();
        assert!(matches!(
            uv_single_axis(&cfg, &QuadOptions::default()),
            Err(Error::ModelUnavailable(_))
        ));
    }

    #[test]
    fn sweep_is_bounded_and_continuous() {
        let cfg = BranchConfig::at_nodal_locus(&[0.7]).unwrap();
        let opts = QuadOptions::default();
        let mut prev: Option<PeriodPlane> = None;
        for k in -8..=8 {
            let t = 0.045 * k as f64 / 8.0;
            let p = uv_axis(&cfg, 0, t, &opts).unwrap();
            assert!(p.u.iter().chain(&p.v).all(|x| x.abs() < 1.0));
            if let Some(q) = prev {
                let jump =
                    p.u.iter()
                        .zip(&q.u)
                        .chain(p.v.iter().zip(&q.v))
                        .map(|(a, b)| (a - b).abs());
                assert!(jump.fold(0.0, f64::max) < 0.05);
            }
            prev = Some(p);
        }
    }

    #[test]
    fn fd_step_range() {
        let cfg = BranchConfig::at_nodal_locus(&[0.7]).unwrap();
        let err =
            fd_jacobian(&cfg, 0.1, &QuadOptions::default(), Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }
}

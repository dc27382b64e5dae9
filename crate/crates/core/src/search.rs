//! Numerical search for parameters (θ, t) whose period plane is rational.
//!
//! The unknowns are x = (θ₁..θ_g, t₁..t_g). For a target plane with
//! orthonormal complement basis Q (n × g, n = g + 2) the equations are
//! F(x) = (Qᵀu(x), Qᵀv(x)), 2g equations in 2g unknowns, solved by damped
//! Newton iteration.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashSet};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::config::{BranchConfig, TWO_PI_3};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::grassmann::{
    graph_form, principal_distance, rationals_near, RationalPlane, DEFAULT_TOL,
};
use crate::jacobian::closed_n;
use crate::nodal::{analytic_jacobian, uv_origin, PeriodPlane};
use crate::oracle::uv_single_axis;
use crate::quadrature::QuadOptions;

/// |det N| below this counts as non-invertible.
pub const DET_THRESHOLD: f64 = 1e-10;

/// How u, v are evaluated away from t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// Exact in θ, first order in t, using the closed-form t-derivatives.
    Linearized,
    /// Quadrature on the elliptic curve E₁(t); genus one only.
    ExactElliptic,
}

impl Model {
    pub fn default_for(g: usize) -> Model {
        if g == 1 {
            Model::ExactElliptic
        } else {
            Model::Linearized
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Acceptance threshold on the principal distance to the target.
    pub tol: f64,
    pub max_iter: usize,
    /// Central-difference step for Jacobian columns.
    pub fd_step: f64,
    pub quad: QuadOptions,
    /// Largest admissible distance from W(0, θ₀) to a target; `None` means
    /// 10·t_max·‖dW‖.
    pub trust_radius: Option<f64>,
    pub exec: Execution,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            tol: DEFAULT_TOL,
            max_iter: 40,
            fd_step: 1e-6,
            quad: QuadOptions::default(),
            trust_radius: None,
            exec: Execution::default(),
        }
    }
}

/// A parameter point whose plane matches a rational target.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub theta: Vec<f64>,
    pub t: Vec<f64>,
    pub plane: RationalPlane,
    pub residual: f64,
    pub model: Model,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateJson {
    theta: Vec<f64>,
    t: Vec<f64>,
    pivots: [usize; 2],
    #[serde(rename = "Gq")]
    gq: Vec<Vec<[i64; 2]>>,
    residual: f64,
    model: Model,
}

impl Serialize for Candidate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CandidateJson {
            theta: self.theta.clone(),
            t: self.t.clone(),
            pivots: self.plane.pivots,
            gq: self.plane.gq_pairs(),
            residual: self.residual,
            model: self.model,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Candidate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = CandidateJson::deserialize(d)?;
        let plane = RationalPlane::from_pairs(raw.pivots, &raw.gq, None)
            .map_err(serde::de::Error::custom)?;
        if raw.theta.len() != raw.t.len() || raw.theta.len() != plane.g() {
            return Err(serde::de::Error::custom("theta, t and Gq disagree on g"));
        }
        Ok(Candidate {
            theta: raw.theta,
            t: raw.t,
            plane,
            residual: raw.residual,
            model: raw.model,
        })
    }
}

/// u, v at (θ, t) under `model`, with bounds taken from `base`.
pub fn evaluate(
    base: &BranchConfig,
    model: Model,
    theta: &[f64],
    t: &[f64],
    quad: &QuadOptions,
) -> Result<PeriodPlane> {
    let mut raw = base.to_raw();
    raw.g = theta.len();
    raw.theta = theta.to_vec();
    raw.t = Some(t.to_vec());
    let cfg = BranchConfig::new(&raw)?;
    match model {
        Model::ExactElliptic => {
            if cfg.g() != 1 {
                return Err(Error::ModelUnavailable(format!(
                    "the exact-elliptic model needs g = 1, got g = {}",
                    cfg.g()
                )));
            }
            uv_single_axis(&cfg, quad)
        }
        Model::Linearized => {
            let nodal = cfg.with_t(vec![0.0; cfg.g()])?;
            let mut plane = uv_origin(&nodal);
            let table = analytic_jacobian(&nodal)?;
            let tv = DVector::from_column_slice(t);
            let du = &table.du_dt * &tv;
            let dv = &table.dv_dt * &tv;
            for m in 0..plane.dim() {
                plane.u[m] += du[m];
                plane.v[m] += dv[m];
            }
            Ok(plane)
        }
    }
}

/// Orthonormal basis of the orthogonal complement of `plane`, n × (n − 2).
pub fn complement_basis(plane: &PeriodPlane) -> Result<DMatrix<f64>> {
    let n = plane.dim();
    let q = plane.as_rows().transpose().qr().q();
    let proj = DMatrix::identity(n, n) - &q * q.transpose();
    let eig = SymmetricEigen::new(proj);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &k| {
        eig.eigenvalues[k]
            .total_cmp(&eig.eigenvalues[i])
            .then(i.cmp(&k))
    });
    let cols: Vec<DVector<f64>> = order[..n - 2]
        .iter()
        .map(|&c| eig.eigenvectors.column(c).into_owned())
        .collect();
    if cols.iter().any(|c| !c.iter().all(|x| x.is_finite())) {
        return Err(Error::DegeneratePlane("complement basis not finite".into()));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// 2-norm of the stacked derivative table at t = 0.
pub fn dw_norm(cfg: &BranchConfig) -> Result<f64> {
    Ok(analytic_jacobian(cfg)?.stacked().singular_values().max())
}

struct System<'a> {
    base: &'a BranchConfig,
    model: Model,
    target: &'a PeriodPlane,
    q: DMatrix<f64>,
    opts: &'a SearchOptions,
}

impl System<'_> {
    fn g(&self) -> usize {
        self.base.g()
    }

    fn plane(&self, x: &DVector<f64>) -> Result<PeriodPlane> {
        let g = self.g();
        let (theta, t) = (&x.as_slice()[..g], &x.as_slice()[g..]);
        evaluate(self.base, self.model, theta, t, &self.opts.quad)
    }

    fn residual_vector(&self, plane: &PeriodPlane) -> DVector<f64> {
        let u = DVector::from_column_slice(&plane.u);
        let v = DVector::from_column_slice(&plane.v);
        let qu = self.q.tr_mul(&u);
        let qv = self.q.tr_mul(&v);
        DVector::from_iterator(qu.len() + qv.len(), qu.iter().chain(qv.iter()).copied())
    }

    fn f(&self, x: &DVector<f64>) -> Result<(PeriodPlane, DVector<f64>)> {
        let plane = self.plane(x)?;
        let f = self.residual_vector(&plane);
        Ok((plane, f))
    }

    /// θ-columns by central differences; t-columns exact for the
    /// linearized model (it is affine in t) and by differences otherwise.
    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let g = self.g();
        let h = self.opts.fd_step;
        let mut jac = DMatrix::zeros(2 * g, 2 * g);
        let linear_t = self.model == Model::Linearized;
        if linear_t {
            let theta = x.as_slice()[..g].to_vec();
            let nodal = self.base.with_t(vec![0.0; g])?.with_theta(theta)?;
            let table = analytic_jacobian(&nodal)?;
            let qu = self.q.tr_mul(&table.du_dt);
            let qv = self.q.tr_mul(&table.dv_dt);
            jac.view_mut((0, g), (g, g)).copy_from(&qu);
            jac.view_mut((g, g), (g, g)).copy_from(&qv);
        }
        let cols = if linear_t { 0..g } else { 0..2 * g };
        for c in cols {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let fp = self.f(&xp)?.1;
            let fm = self.f(&xm)?.1;
            jac.set_column(c, &((fp - fm) / (2.0 * h)));
        }
        Ok(jac)
    }
}

/// Result of a Newton solve toward an arbitrary target plane.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub theta: Vec<f64>,
    pub t: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// ‖F‖ after each accepted iterate, starting with the initial point.
    pub history: Vec<f64>,
}

/// Solves for (θ, t) with span{u, v} = target, starting from (θ₀, 0).
pub fn newton_to_plane(
    base: &BranchConfig,
    theta0: &[f64],
    target: &PeriodPlane,
    model: Model,
    opts: &SearchOptions,
) -> Result<NewtonOutcome> {
    let g = theta0.len();
    if model == Model::ExactElliptic && g != 1 {
        return Err(Error::ModelUnavailable(format!(
            "the exact-elliptic model needs g = 1, got g = {g}"
        )));
    }
    let start = base.with_theta(theta0.to_vec())?.with_t(vec![0.0; g])?;
    if target.dim() != g + 2 {
        return Err(Error::InvalidConfig(format!(
            "target lives in dimension {}, expected {}",
            target.dim(),
            g + 2
        )));
    }
    let trust = match opts.trust_radius {
        Some(r) => r,
        None => 10.0 * start.t_max() * dw_norm(&start)?,
    };
    let sys = System {
        base: &start,
        model,
        target,
        q: complement_basis(target)?,
        opts,
    };
    let mut x = DVector::from_iterator(
        2 * g,
        theta0.iter().copied().chain(std::iter::repeat_n(0.0, g)),
    );
    let (mut plane, mut f) = sys.f(&x)?;
    let initial = principal_distance(&plane, sys.target)?;
    if initial > trust {
        return Err(Error::LeftTrustRegion(format!(
            "target is {initial:e} from the start plane, trust radius {trust:e}"
        )));
    }
    let mut history = vec![f.norm()];
    let mut residual = initial;
    let mut iterations = 0;
    let stop = opts.tol * 1e-4;
    while residual > stop && iterations < opts.max_iter {
        let jac = sys.jacobian(&x)?;
        let Some(step) = jac.lu().solve(&(-&f)) else {
            return Err(Error::NonConvergence {
                iterations,
                residual,
            });
        };
        if iterations == 0 {
            let t_pred = step.rows(g, g).amax();
            if t_pred > 2.0 * start.t_max() {
                return Err(Error::LeftTrustRegion(format!(
                    "first Newton step needs |t| = {t_pred:e}, t_max = {}",
                    start.t_max()
                )));
            }
        }
        let fnorm = f.norm();
        let mut accepted = None;
        let mut lambda = 1.0;
        let mut last_err = None;
        for _ in 0..12 {
            let trial = &x + lambda * &step;
            match sys.f(&trial) {
                Ok((p, ft)) if ft.norm() <= (1.0 - 1e-4 * lambda) * fnorm => {
                    accepted = Some((trial, p, ft));
                    break;
                }
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
            lambda *= 0.5;
        }
        let Some((xn, pn, fnew)) = accepted else {
            if let Some(Error::TooLargeT { .. }) = last_err {
                return Err(Error::LeftTrustRegion(format!(
                    "line search could not stay inside |t| < {}",
                    start.t_max()
                )));
            }
            break;
        };
        x = xn;
        plane = pn;
        f = fnew;
        iterations += 1;
        history.push(f.norm());
        residual = principal_distance(&plane, sys.target)?;
    }
    if !(residual <= opts.tol) {
        return Err(Error::NonConvergence {
            iterations,
            residual,
        });
    }
    Ok(NewtonOutcome {
        theta: x.as_slice()[..g].to_vec(),
        t: x.as_slice()[g..].to_vec(),
        residual,
        iterations,
        history,
    })
}

/// Newton toward a rational target, packaged as a [`Candidate`].
pub fn newton(
    base: &BranchConfig,
    theta0: &[f64],
    target: &RationalPlane,
    model: Model,
    opts: &SearchOptions,
) -> Result<Candidate> {
    let out = newton_to_plane(base, theta0, &target.to_plane(), model, opts)?;
    Ok(Candidate {
        theta: out.theta,
        t: out.t,
        plane: target.clone(),
        residual: out.residual,
        model,
    })
}

#[derive(Debug, Clone, Copy)]
struct Cost(f64);

impl PartialEq for Cost {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Rational targets near a graph form, cheapest first.
///
/// Each entry has its own list of rationals within `radius`; combinations
/// are visited best-first by total squared deviation, ties broken by the
/// index vector, so the order is fully deterministic.
pub fn enumerate_targets(
    gf_entries: &[f64],
    pivots: [usize; 2],
    qmax: i64,
    radius: f64,
    budget: usize,
) -> Vec<RationalPlane> {
    let lists: Vec<Vec<Rational64>> = gf_entries
        .iter()
        .map(|&x| rationals_near(x, qmax, radius))
        .collect();
    if budget == 0 || lists.iter().any(|l| l.is_empty()) {
        return Vec::new();
    }
    let g = gf_entries.len() / 2;
    let cost = |idx: &[usize]| -> Cost {
        Cost(
            idx.iter()
                .enumerate()
                .map(|(e, &i)| {
                    let q = lists[e][i];
                    (*q.numer() as f64 / *q.denom() as f64 - gf_entries[e]).powi(2)
                })
                .sum(),
        )
    };
    let first = vec![0usize; lists.len()];
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    heap.push(Reverse((cost(&first), first.clone())));
    seen.insert(first);
    let mut out = Vec::new();
    while let Some(Reverse((_, idx))) = heap.pop() {
        let gq = vec![
            (0..g).map(|c| lists[c][idx[c]]).collect(),
            (0..g).map(|c| lists[g + c][idx[g + c]]).collect(),
        ];
        out.push(RationalPlane { pivots, gq, qmax });
        if out.len() == budget {
            break;
        }
        for e in 0..idx.len() {
            if idx[e] + 1 < lists[e].len() {
                let mut next = idx.clone();
                next[e] += 1;
                if seen.insert(next.clone()) {
                    heap.push(Reverse((cost(&next), next)));
                }
            }
        }
    }
    out
}

/// Hunts rational planes near W(0, θ₀): enumerate targets, run Newton on
/// each, deduplicate by exact plane equality, sort by residual.
pub fn hunt(
    base: &BranchConfig,
    theta0: &[f64],
    qmax: i64,
    radius: f64,
    budget: usize,
    model: Model,
    opts: &SearchOptions,
) -> Result<Vec<Candidate>> {
    let g = theta0.len();
    let start = base.with_theta(theta0.to_vec())?.with_t(vec![0.0; g])?;
    if model == Model::ExactElliptic && g != 1 {
        return Err(Error::ModelUnavailable(format!(
            "the exact-elliptic model needs g = 1, got g = {g}"
        )));
    }
    if closed_n(&start)?.det().abs() <= DET_THRESHOLD {
        return Ok(Vec::new());
    }
    let w0 = evaluate(&start, model, theta0, &vec![0.0; g], &opts.quad)?;
    let gf = graph_form(&w0)?;
    let entries: Vec<f64> = (0..2)
        .flat_map(|r| (0..g).map(move |c| (r, c)))
        .map(|(r, c)| gf.g[(r, c)])
        .collect();
    let targets = enumerate_targets(&entries, gf.pivots, qmax, radius, budget);
    let inner = SearchOptions {
        exec: Execution::Sequential,
        ..*opts
    };
    let solved = exec::map(opts.exec, &targets, |target| {
        newton(&start, theta0, target, model, &inner).ok()
    });
    let mut best: BTreeMap<Vec<(i128, i128)>, Candidate> = BTreeMap::new();
    for c in solved.into_iter().flatten() {
        let key = c.plane.canonical_key();
        match best.get(&key) {
            Some(prev) if prev.residual <= c.residual => {}
            _ => {
                best.insert(key, c);
            }
        }
    }
    let mut out: Vec<(Vec<(i128, i128)>, Candidate)> = best.into_iter().collect();
    out.sort_by(|a, b| {
        a.1.residual
            .total_cmp(&b.1.residual)
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(out.into_iter().map(|(_, c)| c).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub before: f64,
    pub after: f64,
    /// after / max(before, floor).
    pub growth: f64,
    /// Resolution of the evaluation: residuals below it are noise.
    pub floor: f64,
    pub model: Model,
}

/// Residual growth beyond this factor fails certification.
pub const CERTIFY_GROWTH_LIMIT: f64 = 10.0;

/// Re-evaluates a candidate with quadrature tolerance divided by `tighten`
/// (exact model) or by a fresh model evaluation (linearized) and compares
/// the residual with the recorded one.
pub fn certify(
    base: &BranchConfig,
    c: &Candidate,
    tighten: f64,
    opts: &SearchOptions,
) -> Result<CertifyReport> {
    if !(tighten >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "tighten factor {tighten} must be at least 1"
        )));
    }
    let quad = opts.quad.tightened(tighten);
    let plane = evaluate(base, c.model, &c.theta, &c.t, &quad)?;
    let after = principal_distance(&plane, &c.plane.to_plane())?;
    let floor = match c.model {
        Model::ExactElliptic => 10.0 * opts.quad.abs_tol,
        Model::Linearized => 1e-14,
    };
    let growth = after / c.residual.max(floor);
    let report = CertifyReport {
        before: c.residual,
        after,
        growth,
        floor,
        model: c.model,
    };
    if !(growth <= CERTIFY_GROWTH_LIMIT) {
        return Err(Error::CertificationFailed {
            before: c.residual,
            after,
        });
    }
    Ok(report)
}

/// One grid cell of a determinant scan; `det_n` is `None` inside a margin.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub theta: Vec<f64>,
    pub det_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTable {
    pub g: usize,
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    /// Rows with |det N| above `threshold`.
    pub fn invertible(&self, threshold: f64) -> impl Iterator<Item = &ScanRow> {
        self.rows
            .iter()
            .filter(move |r| r.det_n.is_some_and(|d| d.abs() > threshold))
    }
}

/// Default scan box: the chart (0, 2π/3) on every axis, shrunk by `margin`.
pub fn default_box(g: usize, margin: f64) -> Vec<(f64, f64)> {
    vec![(margin, TWO_PI_3 - margin); g]
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// det N over a grid × … × grid lattice in the box, θ₁ slowest.
pub fn scan(bounds: &[(f64, f64)], grid: usize, exec: Execution) -> Result<ScanTable> {
    let g = bounds.len();
    if g == 0 || grid == 0 {
        return Err(Error::InvalidConfig("scan needs g ≥ 1 and grid ≥ 1".into()));
    }
    if bounds
        .iter()
        .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
    {
        return Err(Error::InvalidConfig(format!("bad scan box {bounds:?}")));
    }
    let axes: Vec<Vec<f64>> = bounds.iter().map(|&(lo, hi)| axis(lo, hi, grid)).collect();
    let cells = grid
        .checked_pow(g as u32)
        .ok_or_else(|| Error::InvalidConfig("grid too large".into()))?;
    let points: Vec<Vec<f64>> = (0..cells)
        .map(|mut k| {
            let mut theta = vec![0.0; g];
            for d in (0..g).rev() {
                theta[d] = axes[d][k % grid];
                k /= grid;
            }
            theta
        })
        .collect();
    let rows = exec::map(exec, &points, |theta| ScanRow {
        theta: theta.clone(),
        det_n: BranchConfig::at_nodal_locus(theta)
            .and_then(|cfg| closed_n(&cfg))
            .map(|n| n.det())
            .ok(),
    });
    Ok(ScanTable { g, rows })
}

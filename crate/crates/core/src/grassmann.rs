//! 2-planes in ℝ^{g+2}: graph forms, rational rounding and plane distance.

use std::collections::HashSet;

use nalgebra::{DMatrix, SVD};
use num_integer::Integer;
use num_rational::{Ratio, Rational64};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nodal::PeriodPlane;

/// Smallest singular value of [u; v] below which the plane is degenerate.
pub const RANK_TOL: f64 = 1e-10;

pub const DEFAULT_QMAX: i64 = 64;
pub const DEFAULT_TOL: f64 = 1e-8;

/// The plane as the row span of [I₂ | G] with the pivot columns moved first.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphForm {
    pub pivots: [usize; 2],
    /// 2×g; column c belongs to the c-th non-pivot coordinate in increasing order.
    pub g: DMatrix<f64>,
}

impl GraphForm {
    pub fn dim(&self) -> usize {
        self.g.ncols() + 2
    }

    pub fn free_columns(&self) -> Vec<usize> {
        free_columns(self.pivots, self.dim())
    }

    /// The basis rows of the graph form as a plane.
    pub fn to_plane(&self) -> PeriodPlane {
        let rows = graph_rows(self.pivots, self.dim(), |r, c| self.g[(r, c)]);
        PeriodPlane::new(rows[0].clone(), rows[1].clone())
    }
}

fn free_columns(pivots: [usize; 2], n: usize) -> Vec<usize> {
    (0..n).filter(|c| !pivots.contains(c)).collect()
}

fn graph_rows(pivots: [usize; 2], n: usize, entry: impl Fn(usize, usize) -> f64) -> [Vec<f64>; 2] {
    let free = free_columns(pivots, n);
    let mut rows = [vec![0.0; n], vec![0.0; n]];
    for (r, row) in rows.iter_mut().enumerate() {
        row[pivots[r]] = 1.0;
        for (c, &col) in free.iter().enumerate() {
            row[col] = entry(r, c);
        }
    }
    rows
}

/// A plane whose graph form has rational entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalPlane {
    pub pivots: [usize; 2],
    /// 2×g entries in lowest terms, positive denominators.
    pub gq: Vec<Vec<Rational64>>,
    pub qmax: i64,
}

#[derive(Serialize, Deserialize)]
struct RationalPlaneJson {
    pivots: [usize; 2],
    #[serde(rename = "Gq")]
    gq: Vec<Vec<[i64; 2]>>,
    qmax: i64,
}

impl Serialize for RationalPlane {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RationalPlaneJson {
            pivots: self.pivots,
            gq: self.gq_pairs(),
            qmax: self.qmax,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RationalPlane {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RationalPlaneJson::deserialize(d)?;
        RationalPlane::from_pairs(raw.pivots, &raw.gq, Some(raw.qmax))
            .map_err(serde::de::Error::custom)
    }
}

impl RationalPlane {
    /// Builds a plane from [num, den] pairs. `qmax` defaults to the largest
    /// denominator present.
    pub fn from_pairs(pivots: [usize; 2], gq: &[Vec<[i64; 2]>], qmax: Option<i64>) -> Result<Self> {
        if gq.len() != 2 || gq[0].len() != gq[1].len() {
            return Err(Error::InvalidConfig(
                "Gq must be a 2×g array of [num, den] pairs".into(),
            ));
        }
        let n = gq[0].len() + 2;
        if pivots[0] >= pivots[1] || pivots[1] >= n {
            return Err(Error::InvalidConfig(format!(
                "bad pivots {pivots:?} for dimension {n}"
            )));
        }
        let mut rows = Vec::with_capacity(2);
        for row in gq {
            let mut out = Vec::with_capacity(row.len());
            for &[num, den] in row {
                if den == 0 {
                    return Err(Error::InvalidConfig("zero denominator in Gq".into()));
                }
                out.push(Rational64::new(num, den));
            }
            rows.push(out);
        }
        let largest = rows.iter().flatten().map(|q| *q.denom()).max().unwrap_or(1);
        let qmax = qmax.unwrap_or(largest);
        if largest > qmax {
            return Err(Error::InvalidConfig(format!(
                "denominator {largest} exceeds qmax = {qmax}"
            )));
        }
        Ok(RationalPlane {
            pivots,
            gq: rows,
            qmax,
        })
    }

    pub fn g(&self) -> usize {
        self.gq[0].len()
    }

    pub fn dim(&self) -> usize {
        self.g() + 2
    }

    pub fn gq_pairs(&self) -> Vec<Vec<[i64; 2]>> {
        self.gq
            .iter()
            .map(|row| row.iter().map(|q| [*q.numer(), *q.denom()]).collect())
            .collect()
    }

    pub fn graph_form(&self) -> GraphForm {
        GraphForm {
            pivots: self.pivots,
            g: DMatrix::from_fn(2, self.g(), |r, c| to_f64(self.gq[r][c])),
        }
    }

    pub fn to_plane(&self) -> PeriodPlane {
        self.graph_form().to_plane()
    }

    /// Exact reduced row echelon form of the basis, flattened row-major.
    /// Two rational planes are equal iff their keys are equal.
    pub fn canonical_key(&self) -> Vec<(i128, i128)> {
        let n = self.dim();
        let free = free_columns(self.pivots, n);
        let mut m = vec![vec![Ratio::<i128>::from_integer(0); n]; 2];
        for r in 0..2 {
            m[r][self.pivots[r]] = Ratio::from_integer(1);
            for (c, &col) in free.iter().enumerate() {
                let q = self.gq[r][c];
                m[r][col] = Ratio::new(*q.numer() as i128, *q.denom() as i128);
            }
        }
        rref(&mut m);
        m.iter()
            .flatten()
            .map(|q| (*q.numer(), *q.denom()))
            .collect()
    }
}

fn to_f64(q: Rational64) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

fn rref(m: &mut [Vec<Ratio<i128>>]) {
    let zero = Ratio::from_integer(0);
    let (rows, cols) = (m.len(), m[0].len());
    let mut lead = 0;
    for col in 0..cols {
        if lead == rows {
            break;
        }
        let Some(p) = (lead..rows).find(|&r| m[r][col] != zero) else {
            continue;
        };
        m.swap(lead, p);
        let inv = m[lead][col].recip();
        for x in m[lead].iter_mut() {
            *x *= inv;
        }
        for r in 0..rows {
            if r != lead && m[r][col] != zero {
                let f = m[r][col];
                let lead_row = m[lead].clone();
                for (x, l) in m[r].iter_mut().zip(&lead_row) {
                    *x -= f * l;
                }
            }
        }
        lead += 1;
    }
}

fn singular_values(plane: &PeriodPlane) -> Vec<f64> {
    SVD::new(plane.as_rows(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

fn check_rank(plane: &PeriodPlane) -> Result<()> {
    let sv = singular_values(plane);
    let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smallest > RANK_TOL) {
        return Err(Error::DegeneratePlane(format!(
            "smallest singular value {smallest:e}"
        )));
    }
    Ok(())
}

/// Graph form of span{u, v} on the maximum-modulus 2×2 minor.
pub fn graph_form(plane: &PeriodPlane) -> Result<GraphForm> {
    check_rank(plane)?;
    let (u, v) = (&plane.u, &plane.v);
    let n = plane.dim();
    let mut best = ([0, 1], -1.0);
    for i in 0..n {
        for k in (i + 1)..n {
            let minor = (u[i] * v[k] - u[k] * v[i]).abs();
            if minor > best.1 {
                best = ([i, k], minor);
            }
        }
    }
    let [i, k] = best.0;
    let det = u[i] * v[k] - u[k] * v[i];
    let free = free_columns([i, k], n);
    // [I | G] = P⁻¹ [u; v] with P the pivot minor.
    let g = DMatrix::from_fn(2, n - 2, |r, c| {
        let (uc, vc) = (u[free[c]], v[free[c]]);
        if r == 0 {
            (v[k] * uc - u[k] * vc) / det
        } else {
            (u[i] * vc - v[i] * uc) / det
        }
    });
    Ok(GraphForm { pivots: [i, k], g })
}

/// Best rational approximation p/q of x with 1 ≤ q ≤ qmax, by continued
/// fractions with a final semiconvergent. Ties go to the smaller denominator.
pub fn best_rational(x: f64, qmax: i64) -> Rational64 {
    assert!(qmax >= 1, "qmax must be positive");
    let fl = x.floor();
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, fl as i64, 1i64);
    let mut rem = x - fl;
    for _ in 0..64 {
        if rem <= 0.0 {
            break;
        }
        let inv = 1.0 / rem;
        if !inv.is_finite() {
            break;
        }
        let step = inv.floor();
        rem = inv - step;
        let a = if step > 4e18 { i64::MAX } else { step as i64 };
        let q2 = a.checked_mul(q1).and_then(|v| v.checked_add(q0));
        match q2 {
            Some(q2) if q2 <= qmax => {
                let p2 = a * p1 + p0;
                (p0, q0, p1, q1) = (p1, q1, p2, q2);
            }
            _ => {
                let k = (qmax - q0) / q1;
                let conv = Rational64::new(p1, q1);
                if k >= 1 {
                    let semi = Rational64::new(k * p1 + p0, k * q1 + q0);
                    if (to_f64(semi) - x).abs() < (to_f64(conv) - x).abs() {
                        return semi;
                    }
                }
                return conv;
            }
        }
    }
    Rational64::new(p1, q1)
}

/// Rounds every graph-form entry to its best rational with denominator
/// ≤ qmax; `None` if any entry misses by more than `tol`.
pub fn rational_round(gf: &GraphForm, qmax: i64, tol: f64) -> Option<RationalPlane> {
    if qmax < 1 {
        return None;
    }
    let mut gq = Vec::with_capacity(2);
    for r in 0..2 {
        let mut row = Vec::with_capacity(gf.g.ncols());
        for &x in gf.g.row(r).iter() {
            let q = best_rational(x, qmax);
            if !((to_f64(q) - x).abs() <= tol) {
                return None;
            }
            row.push(q);
        }
        gq.push(row);
    }
    Some(RationalPlane {
        pivots: gf.pivots,
        gq,
        qmax,
    })
}

fn orthonormal_basis(plane: &PeriodPlane) -> Result<DMatrix<f64>> {
    check_rank(plane)?;
    Ok(plane.as_rows().transpose().qr().q())
}

/// Largest principal angle between two planes, in [0, π/2].
pub fn principal_distance(p1: &PeriodPlane, p2: &PeriodPlane) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(Error::InvalidConfig(format!(
            "planes live in different dimensions ({} vs {})",
            p1.dim(),
            p2.dim()
        )));
    }
    let q1 = orthonormal_basis(p1)?;
    let q2 = orthonormal_basis(p2)?;
    let cross = q1.transpose() * &q2;
    let cos = cross.singular_values().min();
    let resid = &q2 - &q1 * &cross;
    let sin = resid.singular_values().max();
    Ok(sin.atan2(cos))
}

/// Rationals p/q with q ≤ qmax and |p/q − x| ≤ radius, nearest first
/// (ties by denominator, then numerator).
pub fn rationals_near(x: f64, qmax: i64, radius: f64) -> Vec<Rational64> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for q in 1..=qmax.max(0) {
        let lo = ((x - radius) * q as f64).ceil() as i64;
        let hi = ((x + radius) * q as f64).floor() as i64;
        for p in lo..=hi {
            if p.gcd(&q) == 1 && seen.insert((p, q)) {
                out.push(Rational64::new(p, q));
            }
        }
    }
    out.sort_by(|a, b| {
        let (da, db) = ((to_f64(*a) - x).abs(), (to_f64(*b) - x).abs());
        da.total_cmp(&db)
            .then(a.denom().cmp(b.denom()))
            .then(a.numer().cmp(b.numer()))
    });
    out
}

//! The elliptic curves E_j(t): y² = (x − t + a)(p_t(x) − 1) with
//! p_t(x) = (x − 2a)²(x − t + a) − 1, their branch points, the vanishing-cycle
//! contour, and the points lying over λ = b_m.

use num_complex::Complex64;

use crate::config::{a, BranchConfig};
use crate::error::{Error, Result};
use crate::nodal::{node_pair, NodePair};
use crate::poly::Poly;

/// Points over λ with |sin 3θ_mj| below this are branch points of x, where
/// the third-kind construction degenerates.
pub const ETA_MARGIN: f64 = 1e-6;

/// Minimum ratio D/h between the distance to the nearest excluded point and
/// the half-separation of the vanishing pair.
pub const SEPARATION_RATIO: f64 = 3.0;

/// p_t(x) − c as a cubic: x³ − (3a+t)x² + 4at·x + (1 − c − 4a²t).
pub fn level_cubic(t: f64, c: f64) -> Poly {
    let a = a();
    Poly::new(vec![
        1.0,
        -(3.0 * a + t),
        4.0 * a * t,
        1.0 - c - 4.0 * a * a * t,
    ])
}

/// q(x) = (x − t + a)²(x − 2a)² − 2(x − t + a), the right-hand side of y².
pub fn branch_quartic(t: f64) -> Poly {
    let a = a();
    let lin = Poly::new(vec![1.0, a - t]);
    let sq = Poly::new(vec![1.0, -2.0 * a]);
    let sq = sq.mul(&sq);
    lin.mul(&lin).mul(&sq).add(&lin.scale(-2.0))
}

/// p_t(x).
pub fn p_t(t: f64, x: Complex64) -> Complex64 {
    let a = a();
    (x - 2.0 * a).powu(2) * (x - t + a) - 1.0
}

/// Circle in the x-plane carrying the A_j cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour {
    pub center: Complex64,
    pub radius: f64,
}

/// One curve E_j(t) together with everything the oracle needs on it.
#[derive(Debug, Clone)]
pub struct CurveModel {
    pub j: usize,
    pub t: f64,
    pub angles: Vec<f64>,
    pub quartic: Poly,
    /// All four roots of the quartic: vanishing pair first, then the root
    /// near 3a, then t − a.
    pub branch_points: [Complex64; 4],
    pub vanishing_pair: [Complex64; 2],
    pub contour: Contour,
    /// Node pairs for every m ≠ j (None at m = j).
    pairs: Vec<Option<NodePair>>,
    /// sqrt((c − r₃)(c − r₄)) times the sheet sign.
    scale: Complex64,
}

impl CurveModel {
    pub fn g(&self) -> usize {
        self.angles.len() - 2
    }

    /// θ_mj = θ_m − θ_j (virtual angles included).
    pub fn theta_mj(&self, m: usize) -> f64 {
        self.angles[m] - self.angles[self.j]
    }

    /// The located pair for index m, or an error at m = j.
    pub fn pair(&self, m: usize) -> Result<NodePair> {
        self.pairs
            .get(m)
            .copied()
            .flatten()
            .ok_or_else(|| Error::InvalidConfig(format!("no node pair at m = {m} on E_{}", self.j)))
    }

    /// y on the chosen lift of the A_j contour (and analytically inside the
    /// annulus between the vanishing pair and the excluded points).
    ///
    /// With w = x − c and the pair at c ± d,
    /// y = s · w·√(1 − d²/w²) · √(1 − w/(r₃ − c)) · √(1 − w/(r₄ − c)),
    /// every square root principal with argument inside the unit disk
    /// around 1, so the expression is single-valued on the contour.
    pub fn y_on_contour(&self, x: Complex64) -> Complex64 {
        let c = self.contour.center;
        let d = 0.5 * (self.vanishing_pair[0] - self.vanishing_pair[1]);
        let w = x - c;
        let [_, _, r3, r4] = self.branch_points;
        self.scale
            * w
            * (1.0 - d * d / (w * w)).sqrt()
            * (1.0 - w / (r3 - c)).sqrt()
            * (1.0 - w / (r4 - c)).sqrt()
    }

    /// y near a non-branch point (x₀, y₀) of the curve, continued from y₀.
    pub fn y_near(&self, y0: Complex64, x: Complex64) -> Complex64 {
        y0 * (self.quartic.eval(x) / (y0 * y0)).sqrt()
    }

    /// |y² − q(x)| at x on the contour, for chart-consistency checks.
    pub fn defect(&self, x: Complex64) -> f64 {
        let y = self.y_on_contour(x);
        (y * y - self.quartic.eval(x)).norm()
    }
}

/// Builds E_j(t) for the angles of `cfg`, locates every node pair, and
/// places the vanishing-cycle contour.
///
/// The contour is centred at the midpoint c of the vanishing pair with
/// radius √(hD), h the pair's half-separation and D the distance from c to
/// the nearest point that must stay outside (other branch points and the
/// poles ξ₁, ξ₂ of every third-kind differential). D ≥ 3h is required, so
/// both boundaries sit at least a factor √3 away from the circle. At t = 0
/// the pair coincides at the node and the radius is D/3.
pub fn build_curve(cfg: &BranchConfig, j: usize, t: f64) -> Result<CurveModel> {
    let g = cfg.g();
    if j >= g {
        return Err(Error::InvalidConfig(format!(
            "axis j = {j} out of range for g = {g}"
        )));
    }
    let a = a();
    let angles = cfg.all_angles();

    let (pair, far) = if t == 0.0 {
        (
            [Complex64::new(0.0, 0.0); 2],
            [Complex64::new(3.0 * a, 0.0), Complex64::new(-a, 0.0)],
        )
    } else {
        // q = (x − t + a)·(x³ − (3a+t)x² + 4at x − 4a²t)
        let mut cubic = level_cubic(t, 1.0).roots();
        cubic.sort_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap());
        if cubic[1].norm() * 3.0 >= cubic[2].norm() {
            return Err(Error::RootSeparationFailure(format!(
                "t = {t}: pair radius {:e} vs next root {:e}",
                cubic[1].norm(),
                cubic[2].norm()
            )));
        }
        ([cubic[0], cubic[1]], [cubic[2], Complex64::new(t - a, 0.0)])
    };

    let mut pairs = vec![None; g + 2];
    let mut poles = Vec::new();
    for (m, slot) in pairs.iter_mut().enumerate() {
        if m == j {
            continue;
        }
        let p = locate_pair(t, angles[m] - angles[j])?;
        poles.extend([p.xi1, p.xi2]);
        *slot = Some(p);
    }

    let center = 0.5 * (pair[0] + pair[1]);
    let half = 0.5 * (pair[0] - pair[1]).norm();
    let dist = far
        .iter()
        .chain(poles.iter())
        .map(|p| (p - center).norm())
        .fold(f64::INFINITY, f64::min);
    let radius = if half == 0.0 {
        dist / 3.0
    } else {
        if dist < SEPARATION_RATIO * half {
            return Err(Error::RootSeparationFailure(format!(
                "t = {t}, j = {j}: nearest excluded point at {dist:e} is within {SEPARATION_RATIO}× the pair half-separation {half:e}"
            )));
        }
        (half * dist).sqrt()
    };

    let k = ((center - far[0]) * (center - far[1])).sqrt();
    // Orient so that ∮ dx/y ≈ 2πi/scale has positive real part; at t = 0
    // this is the branch y ≈ √3·a·i·x through P_j.
    let sign = if (Complex64::i() / k).re > 0.0 {
        1.0
    } else {
        -1.0
    };

    Ok(CurveModel {
        j,
        t,
        angles,
        quartic: branch_quartic(t),
        branch_points: [pair[0], pair[1], far[0], far[1]],
        vanishing_pair: pair,
        contour: Contour { center, radius },
        pairs,
        scale: k * sign,
    })
}

/// The points over λ = b_m on E_j(t): roots of p_t(x) = cos 3θ_mj, followed
/// from the t = 0 closed forms by continuation in t.
pub fn locate_pair(t: f64, theta_mj: f64) -> Result<NodePair> {
    let start = node_pair(theta_mj)?;
    let s3 = (3.0 * theta_mj).sin();
    if s3.abs() <= ETA_MARGIN {
        return Err(Error::SingularPair {
            theta_mj,
            reason: format!(
                "|sin 3θ_mj| = {:e}: P_m and Q_m are branch points of x",
                s3.abs()
            ),
        });
    }
    let level = (3.0 * theta_mj).cos();
    let (mut xi1, mut xi2) = (start.xi1, start.xi2);
    if t != 0.0 {
        let mut s = 0.0;
        let mut step = t / 8.0;
        let min_step = t.abs() / (1u64 << 24) as f64;
        while (t - s).abs() > 0.0 {
            let next = if (t - s).abs() <= step.abs() {
                t
            } else {
                s + step
            };
            let roots = level_cubic(next, level).roots();
            match (match_root(&roots, xi1), match_root(&roots, xi2)) {
                (Some(i1), Some(i2)) if i1 != i2 => {
                    xi1 = roots[i1];
                    xi2 = roots[i2];
                    s = next;
                }
                _ => {
                    step *= 0.5;
                    if step.abs() < min_step {
                        return Err(Error::TrackingLoss(format!(
                            "θ_mj = {theta_mj}, stuck at t = {s} heading to {t}"
                        )));
                    }
                }
            }
        }
    }
    let a = a();
    let eta = |xi: Complex64| Complex64::new(0.0, s3) / (xi - 2.0 * a);
    Ok(NodePair {
        xi1,
        xi2,
        eta1: eta(xi1),
        eta2: eta(xi2),
        theta_mj,
    })
}

/// Index of the root nearest `prev`, if it is unambiguously nearest.
fn match_root(roots: &[Complex64], prev: Complex64) -> Option<usize> {
    let mut d: Vec<(f64, usize)> = roots
        .iter()
        .enumerate()
        .map(|(i, r)| ((r - prev).norm(), i))
        .collect();
    d.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    (d[0].0 < 0.5 * d[1].0).then_some(d[0].1)
}

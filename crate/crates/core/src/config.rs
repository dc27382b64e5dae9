//! Family coordinates, global constants, and input validation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;

/// 2π/3, the upper edge of the angular chart and the virtual angle of O₂.
pub const TWO_PI_3: f64 = 2.0 * PI / 3.0;

pub const DEFAULT_T_MAX: f64 = 0.05;
pub const DEFAULT_GAP_MARGIN: f64 = 1e-3;
/// Margin on |z_m/z_j + z_j/z_m + 1| for extended evaluation points.
pub const DEFAULT_POLE_MARGIN: f64 = 1e-8;

/// The fixed constants a = 2^{-1/3} and ε = e^{2πi/3}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub a: f64,
    pub epsilon: Complex64,
}

impl Constants {
    pub fn new() -> Self {
        Constants {
            a: 0.5f64.cbrt(),
            epsilon: Complex64::from_polar(1.0, TWO_PI_3),
        }
    }
}

impl Default for Constants {
    fn default() -> Self {
        Self::new()
    }
}

/// a = 2^{-1/3}.
pub fn a() -> f64 {
    0.5f64.cbrt()
}

/// ε = e^{2πi/3}.
pub fn epsilon() -> Complex64 {
    Complex64::from_polar(1.0, TWO_PI_3)
}

/// √3/2π, the modulus of every ω^m(P₀) on the nodal locus.
pub fn residue_modulus() -> f64 {
    3f64.sqrt() / (2.0 * PI)
}

/// Untyped configuration record, as read from JSON or assembled from flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub g: usize,
    pub theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_margin: Option<f64>,
}

impl RawConfig {
    pub fn new(theta: Vec<f64>) -> Self {
        RawConfig {
            g: theta.len(),
            theta,
            t: None,
            t_max: None,
            gap_margin: None,
        }
    }

    pub fn with_t(mut self, t: Vec<f64>) -> Self {
        self.t = Some(t);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

/// A validated point (t, θ) of the family, with derived node data.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchConfig {
    theta: Vec<f64>,
    t: Vec<f64>,
    cube_roots: Vec<Complex64>,
    nodes: Vec<Complex64>,
    t_max: f64,
    gap_margin: f64,
}

impl BranchConfig {
    /// Validates a raw record. See [`validate`].
    pub fn new(raw: &RawConfig) -> Result<Self> {
        validate(raw)
    }

    /// Convenience constructor at t = 0 with default bounds.
    pub fn at_nodal_locus(theta: &[f64]) -> Result<Self> {
        validate(&RawConfig::new(theta.to_vec()))
    }

    pub fn g(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    /// c_m = e^{iθ_m}.
    pub fn cube_roots(&self) -> &[Complex64] {
        &self.cube_roots
    }

    /// b_m = c_m³.
    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn gap_margin(&self) -> f64 {
        self.gap_margin
    }

    pub fn is_nodal(&self) -> bool {
        self.t.iter().all(|&t| t == 0.0)
    }

    /// Angle of index m in 0..g+2; indices g and g+1 are the virtual angles
    /// 0 and 2π/3 carried by O₁/O₂ and O₂/O₃.
    pub fn angle(&self, m: usize) -> f64 {
        let g = self.g();
        match m {
            _ if m < g => self.theta[m],
            _ if m == g => 0.0,
            _ if m == g + 1 => TWO_PI_3,
            _ => panic!("index {m} out of range for g = {g}"),
        }
    }

    /// All g+2 angles, virtual ones last.
    pub fn all_angles(&self) -> Vec<f64> {
        (0..self.g() + 2).map(|m| self.angle(m)).collect()
    }

    /// Same angles and bounds, different t.
    pub fn with_t(&self, t: Vec<f64>) -> Result<Self> {
        let mut raw = self.to_raw();
        raw.t = Some(t);
        validate(&raw)
    }

    /// Same t and bounds, different angles.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        let mut raw = self.to_raw();
        raw.g = theta.len();
        raw.theta = theta;
        validate(&raw)
    }

    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            g: self.g(),
            theta: self.theta.clone(),
            t: Some(self.t.clone()),
            t_max: Some(self.t_max),
            gap_margin: Some(self.gap_margin),
        }
    }
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::InvalidConfig(format!("{name}[{k}] is not finite"))),
        None => Ok(()),
    }
}

/// Distance of an angle difference from the collision set {0, ±2π/3}.
fn collision_distance(diff: f64) -> f64 {
    let d = diff.abs();
    d.min((d - TWO_PI_3).abs())
}

/// Validates the chart constraints and populates c_m, b_m.
///
/// Checks run in order: shape, strict increase, pairwise gaps (including the
/// virtual angles 0 and 2π/3), chart range, then |t_j| < t_max.
pub fn validate(raw: &RawConfig) -> Result<BranchConfig> {
    let g = raw.g;
    if g == 0 {
        return Err(Error::InvalidConfig("g must be positive".into()));
    }
    if raw.theta.len() != g {
        return Err(Error::InvalidConfig(format!(
            "theta has {} entries, expected g = {g}",
            raw.theta.len()
        )));
    }
    let t = raw.t.clone().unwrap_or_else(|| vec![0.0; g]);
    if t.len() != g {
        return Err(Error::InvalidConfig(format!(
            "t has {} entries, expected g = {g}",
            t.len()
        )));
    }
    check_finite("theta", &raw.theta)?;
    check_finite("t", &t)?;
    let t_max = raw.t_max.unwrap_or(DEFAULT_T_MAX);
    let gap_margin = raw.gap_margin.unwrap_or(DEFAULT_GAP_MARGIN);
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "t_max = {t_max} must be positive"
        )));
    }
    if !(gap_margin.is_finite() && gap_margin > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "gap_margin = {gap_margin} must be positive"
        )));
    }

    let theta = &raw.theta;
    for k in 1..g {
        if theta[k] <= theta[k - 1] {
            return Err(Error::OrderingViolation(format!(
                "theta[{k}] = {} does not exceed theta[{}] = {}",
                theta[k],
                k - 1,
                theta[k - 1]
            )));
        }
    }

    let mut angles = theta.clone();
    angles.push(0.0);
    angles.push(TWO_PI_3);
    for m in 0..angles.len() {
        for j in (m + 1)..angles.len() {
            if m >= g && j >= g {
                continue;
            }
            let d = collision_distance(angles[m] - angles[j]);
            if d < gap_margin {
                return Err(Error::AngleCollision(format!(
                    "angles {m} and {j} differ by {} (distance {d:e} from {{0, ±2π/3}} < {gap_margin:e})",
                    angles[m] - angles[j]
                )));
            }
        }
    }

    if theta[0] <= 0.0 || theta[g - 1] >= TWO_PI_3 {
        return Err(Error::OrderingViolation(format!(
            "range is [{}, {}]",
            theta[0],
            theta[g - 1]
        )));
    }

    check_t_max(t_max)?;
    for (index, &value) in t.iter().enumerate() {
        if value.abs() >= t_max {
            return Err(Error::TooLargeT {
                index,
                value,
                t_max,
            });
        }
    }

    let cube_roots: Vec<Complex64> = theta
        .iter()
        .map(|&th| Complex64::from_polar(1.0, th))
        .collect();
    let nodes = cube_roots.iter().map(|c| c.powu(3)).collect();
    Ok(BranchConfig {
        theta: theta.clone(),
        t,
        cube_roots,
        nodes,
        t_max,
        gap_margin,
    })
}

/// Confirms by root finding that at |t| = t_max the two branch points that
/// split off the node stay inside |x| < a/2, well clear of the fixed branch
/// points near 3a and −a.
pub fn check_t_max(t_max: f64) -> Result<()> {
    let a = a();
    for t in [t_max, -t_max] {
        // Cubic factor x³ − (3a+t)x² + 4at x − 4a²t of the branch quartic.
        let cubic = Poly::new(vec![1.0, -(3.0 * a + t), 4.0 * a * t, -4.0 * a * a * t]);
        let mut roots = cubic.roots();
        roots.sort_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap());
        if roots[1].norm() >= 0.5 * a || (roots[2] - 3.0 * a).norm() >= 0.5 * a {
            return Err(Error::InvalidConfig(format!(
                "t_max = {t_max} lets the split branch points reach |x| = {:.3} (a/2 = {:.3})",
                roots[1].norm(),
                0.5 * a
            )));
        }
    }
    Ok(())
}

/// Evaluation point of the meromorphic extension h on (ℂ*)^g.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedEvalPoint {
    z: Vec<Complex64>,
}

impl ExtendedEvalPoint {
    /// Validates that every z_j is nonzero and that every pair stays off the
    /// pole set z_m/z_j + z_j/z_m + 1 = 0 by `margin`.
    pub fn new(z: Vec<Complex64>, margin: f64) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::InvalidConfig("need at least one coordinate".into()));
        }
        for (k, zk) in z.iter().enumerate() {
            if !(zk.re.is_finite() && zk.im.is_finite()) || zk.norm() == 0.0 {
                return Err(Error::MarginViolation(format!(
                    "z[{k}] = {zk} must be finite and nonzero"
                )));
            }
        }
        for m in 0..z.len() {
            for j in (m + 1)..z.len() {
                let r = z[m] / z[j];
                let s = r + r.inv() + 1.0;
                if s.norm() <= margin {
                    return Err(Error::MarginViolation(format!(
                        "pair ({m}, {j}): |z_m/z_j + z_j/z_m + 1| = {:e}",
                        s.norm()
                    )));
                }
            }
        }
        Ok(ExtendedEvalPoint { z })
    }

    /// The unit-circle point with z_j = e^{iθ_j}.
    pub fn on_unit_circle(cfg: &BranchConfig) -> Self {
        ExtendedEvalPoint {
            z: cfg.cube_roots().to_vec(),
        }
    }

    pub fn z(&self) -> &[Complex64] {
        &self.z
    }

    pub fn g(&self) -> usize {
        self.z.len()
    }

    pub fn scaled(&self, c: Complex64) -> Result<Self> {
        Self::new(self.z.iter().map(|z| z * c).collect(), DEFAULT_POLE_MARGIN)
    }
}

/// z_m = r e^{iφ_m}, z_{p+m} = −r e^{iφ_m}.
pub fn lagrangian_points(p: usize, phi: &[f64], r: f64) -> Result<ExtendedEvalPoint> {
    if p == 0 || phi.len() != p {
        return Err(Error::BadHalfGenus(format!(
            "p = {p} with {} angles",
            phi.len()
        )));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::MarginViolation(format!(
            "radius r = {r} must be positive"
        )));
    }
    for k in 0..p {
        let ok = phi[k] > 0.0 && phi[k] < PI / 3.0 && (k == 0 || phi[k] > phi[k - 1]);
        if !ok {
            return Err(Error::OrderingViolation(format!(
                "phi must be strictly increasing in (0, π/3), got {phi:?}"
            )));
        }
    }
    let head: Vec<Complex64> = phi.iter().map(|&f| Complex64::from_polar(r, f)).collect();
    let z = head
        .iter()
        .copied()
        .chain(head.iter().map(|z| -z))
        .collect();
    ExtendedEvalPoint::new(z, DEFAULT_POLE_MARGIN)
}

/// Power-mode Lagrangian probe: z_m = z^m, z_{p+m} = −z^m.
pub fn lagrangian_power_points(p: usize, z: Complex64) -> Result<ExtendedEvalPoint> {
    if p == 0 {
        return Err(Error::BadHalfGenus("p must be at least 1".into()));
    }
    let head: Vec<Complex64> = (1..=p as u32).map(|m| z.powu(m)).collect();
    let all = head
        .iter()
        .copied()
        .chain(head.iter().map(|w| -w))
        .collect();
    ExtendedEvalPoint::new(all, DEFAULT_POLE_MARGIN)
}

/// Generic probe: z_m = z^m for m = 1..g.
pub fn power_points(g: usize, z: Complex64) -> Result<ExtendedEvalPoint> {
    ExtendedEvalPoint::new(
        (1..=g as u32).map(|m| z.powu(m)).collect(),
        DEFAULT_POLE_MARGIN,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constants_identities() {
        let c = Constants::new();
        assert!(((2.0 * c.a.powi(3)) - 1.0).abs() < 1e-15);
        let e = c.epsilon;
        assert!((e.powu(3) - 1.0).norm() < 1e-15);
        assert!((1.0 + e + e * e).norm() < 1e-15);
    }

    #[test]
    fn valid_config_derives_nodes() {
        let cfg =
            validate(&RawConfig::new(vec![PI / 6.0, PI / 3.0]).with_t(vec![0.0, 0.0])).unwrap();
        assert!((cfg.nodes()[0] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert!((cfg.nodes()[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-14);
        assert_eq!(cfg.angle(2), 0.0);
        assert_eq!(cfg.angle(3), TWO_PI_3);
    }

    #[test]
    fn ordering_violation() {
        let err = validate(&RawConfig::new(vec![PI / 3.0, PI / 6.0])).unwrap_err();
        assert!(matches!(err, Error::OrderingViolation(_)));
    }

    #[test]
    fn near_two_pi_3_gap_collides() {
        let err =
            validate(&RawConfig::new(vec![PI / 6.0, PI / 6.0 + TWO_PI_3 - 1e-9])).unwrap_err();
        assert!(matches!(err, Error::AngleCollision(_)), "{err:?}");
    }

    #[test]
    fn out_of_chart() {
        let err = validate(&RawConfig::new(vec![0.5, 2.3])).unwrap_err();
        assert!(matches!(err, Error::OrderingViolation(_)), "{err:?}");
    }

    #[test]
    fn virtual_angle_collision() {
        let err = validate(&RawConfig::new(vec![1e-4])).unwrap_err();
        assert!(matches!(err, Error::AngleCollision(_)));
        let err = validate(&RawConfig::new(vec![TWO_PI_3 - 1e-4])).unwrap_err();
        assert!(matches!(err, Error::AngleCollision(_)));
    }

    #[test]
    fn too_large_t() {
        let err = validate(&RawConfig::new(vec![0.5]).with_t(vec![0.05])).unwrap_err();
        assert!(matches!(err, Error::TooLargeT { index: 0, .. }));
        assert!(validate(&RawConfig::new(vec![0.5]).with_t(vec![-0.049])).is_ok());
    }

    #[test]
    fn shape_errors() {
        let mut raw = RawConfig::new(vec![0.5, 1.0]);
        raw.g = 3;
        assert!(matches!(validate(&raw), Err(Error::InvalidConfig(_))));
        let raw = RawConfig::new(vec![0.5]).with_t(vec![0.0, 0.0]);
        assert!(matches!(validate(&raw), Err(Error::InvalidConfig(_))));
        let raw = RawConfig::new(vec![f64::NAN]);
        assert!(matches!(validate(&raw), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let raw = RawConfig::from_json(
            r#"{"g":2,"theta":[0.5,1.0],"t":[0.01,0.0],"t_max":0.05,"gap_margin":0.001}"#,
        )
        .unwrap();
        let cfg = validate(&raw).unwrap();
        assert_eq!(cfg.t(), &[0.01, 0.0]);
        assert!(RawConfig::from_json(r#"{"g":1,"theta":[0.5],"bogus":1}"#).is_err());
    }

    #[test]
    fn default_t_max_passes_root_check() {
        check_t_max(DEFAULT_T_MAX).unwrap();
        assert!(check_t_max(0.5).is_err());
    }

    #[test]
    fn lagrangian_point_examples() {
        let z = lagrangian_points(1, &[PI / 6.0], 1.0).unwrap();
        let w = Complex64::from_polar(1.0, PI / 6.0);
        assert!((z.z()[0] - w).norm() < 1e-15);
        assert!((z.z()[1] + w).norm() < 1e-15);

        let z = lagrangian_power_points(2, Complex64::new(10.0, 0.0)).unwrap();
        let want = [10.0, 100.0, -10.0, -100.0];
        for (got, want) in z.z().iter().zip(want) {
            assert_eq!(*got, Complex64::new(want, 0.0));
        }

        assert!(matches!(
            lagrangian_points(1, &[PI / 6.0], 0.0),
            Err(Error::MarginViolation(_))
        ));
        assert!(matches!(
            lagrangian_points(0, &[], 1.0),
            Err(Error::BadHalfGenus(_))
        ));
    }

    #[test]
    fn extended_point_rejects_pole() {
        let w = Complex64::from_polar(1.0, TWO_PI_3);
        let err = ExtendedEvalPoint::new(vec![Complex64::new(1.0, 0.0), w], 1e-8).unwrap_err();
        assert!(matches!(err, Error::MarginViolation(_)));
    }

    fn chart_angles(g: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.05f64..1.0, g + 1).prop_map(|w| {
            let total: f64 = w.iter().sum();
            let mut acc = 0.0;
            w[..w.len() - 1]
                .iter()
                .map(|x| {
                    acc += x / total * TWO_PI_3;
                    acc
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn validate_is_idempotent(theta in chart_angles(3), t in proptest::collection::vec(-0.04f64..0.04, 3)) {
            let cfg = validate(&RawConfig::new(theta).with_t(t)).unwrap();
            let again = validate(&cfg.to_raw()).unwrap();
            prop_assert_eq!(&cfg, &again);
            for (c, b) in cfg.cube_roots().iter().zip(cfg.nodes()) {
                prop_assert!((c.norm() - 1.0).abs() < 1e-14);
                prop_assert!((c.powu(3) - b).norm() < 1e-14);
            }
        }
    }
}

//! Adaptive Gauss–Legendre quadrature of complex integrands over circles.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [−1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on P_n from the Tricomi initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// ∫_lo^hi f.
    pub fn integrate<F: Fn(f64) -> Complex64>(&self, f: &F, lo: f64, hi: f64) -> Complex64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut sum = Complex64::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += f(mid + half * x) * *w;
        }
        sum * half
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn default_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Quadrature controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Absolute tolerance on the whole contour integral.
    pub abs_tol: f64,
    /// Maximum bisection depth of a panel.
    pub max_depth: u32,
    /// Panels the circle is cut into before adapting.
    pub initial_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-11,
            max_depth: 12,
            initial_panels: 8,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    /// Tolerance divided by `factor`.
    pub fn tightened(self, factor: f64) -> Self {
        self.with_tol(self.abs_tol / factor)
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
}

/// Adaptive integration of f over [lo, hi]: each panel is compared against
/// the sum over its two halves and bisected until the difference falls
/// below the panel's share of the tolerance.
pub fn adaptive<F: Fn(f64) -> Complex64>(
    f: &F,
    lo: f64,
    hi: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    let rule = default_rule();
    let total = hi - lo;
    let n = opts.initial_panels.max(1);
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut converged = true;
    for k in 0..n {
        let a = lo + total * k as f64 / n as f64;
        let b = lo + total * (k + 1) as f64 / n as f64;
        let whole = rule.integrate(f, a, b);
        let (v, e, ok) = refine(
            rule,
            f,
            a,
            b,
            whole,
            opts.abs_tol / n as f64,
            opts.max_depth,
        );
        value += v;
        error += e;
        converged &= ok;
    }
    if !converged || !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::QuadratureDivergence {
            tol: opts.abs_tol,
            estimate: error,
        });
    }
    Ok(QuadResult { value, error })
}

fn refine<F: Fn(f64) -> Complex64>(
    rule: &GaussLegendre,
    f: &F,
    a: f64,
    b: f64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> (Complex64, f64, bool) {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(f, a, mid);
    let right = rule.integrate(f, mid, b);
    let halves = left + right;
    let diff = (halves - whole).norm();
    if diff <= tol {
        return (halves, diff, true);
    }
    if depth == 0 {
        return (halves, diff, false);
    }
    let (lv, le, lok) = refine(rule, f, a, mid, left, 0.5 * tol, depth - 1);
    let (rv, re, rok) = refine(rule, f, mid, b, right, 0.5 * tol, depth - 1);
    (lv + rv, le + re, lok && rok)
}

/// ∮ f(x) dx over the counter-clockwise circle |x − center| = radius.
pub fn circle_integral<F: Fn(Complex64) -> Complex64>(
    f: &F,
    center: Complex64,
    radius: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    let g = |phi: f64| {
        let e = Complex64::from_polar(1.0, phi);
        f(center + e * radius) * (Complex64::i() * e * radius)
    };
    adaptive(&g, 0.0, 2.0 * PI, opts)
}

/// Equally spaced trapezoidal rule on the same circle. Spectrally accurate
/// for integrands analytic in an annulus around the contour; used as an
/// independent check on [`circle_integral`].
pub fn circle_trapezoid<F: Fn(Complex64) -> Complex64>(
    f: &F,
    center: Complex64,
    radius: f64,
    n: usize,
) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let e = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
        sum += f(center + e * radius) * (Complex64::i() * e * radius);
    }
    sum * (2.0 * PI / n as f64)
}

//! Real-coefficient polynomials: evaluation and root finding.
//!
//! Roots come from the eigenvalues of the companion matrix followed by two
//! guarded Newton polish steps. The guard keeps the eigenvalue estimate when a
//! step would increase |p|, which happens next to (near-)double roots.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Polynomial with real coefficients, highest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let first = coeffs
            .iter()
            .position(|c| *c != 0.0)
            .unwrap_or(coeffs.len());
        let coeffs = coeffs[first..].to_vec();
        Poly { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    /// Value and first derivative by Horner's scheme.
    pub fn eval_with_derivative(&self, x: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in &self.coeffs {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Poly::new(vec![]);
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (k, c) in self.coeffs.iter().rev().enumerate() {
            out[n - 1 - k] += c;
        }
        for (k, c) in other.coeffs.iter().rev().enumerate() {
            out[n - 1 - k] += c;
        }
        Poly::new(out)
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// All complex roots, polished. Order follows the eigenvalue solver and
    /// carries no meaning; callers sort or match as they need.
    pub fn roots(&self) -> Vec<Complex64> {
        let n = self.degree();
        match n {
            0 => return vec![],
            1 => return vec![Complex64::new(-self.coeffs[1] / self.coeffs[0], 0.0)],
            _ => {}
        }
        let lead = self.coeffs[0];
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            companion[(0, k)] = -self.coeffs[k + 1] / lead;
        }
        for k in 1..n {
            companion[(k, k - 1)] = 1.0;
        }
        companion
            .complex_eigenvalues()
            .iter()
            .map(|&z| self.polish(z, 2))
            .collect()
    }

    /// Guarded Newton steps: a step is only taken if it reduces |p|.
    pub fn polish(&self, mut x: Complex64, steps: usize) -> Complex64 {
        for _ in 0..steps {
            let (p, dp) = self.eval_with_derivative(x);
            if dp.norm() == 0.0 || p.norm() == 0.0 {
                break;
            }
            let next = x - p / dp;
            if self.eval(next).norm() < p.norm() {
                x = next;
            } else {
                break;
            }
        }
        x
    }
}

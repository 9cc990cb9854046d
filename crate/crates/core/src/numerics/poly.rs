//! Dense complex polynomials, ascending coefficient order.

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    pub fn one() -> Self {
        Poly {
            coeffs: vec![Complex64::new(1.0, 0.0)],
        }
    }

    pub fn constant(c: Complex64) -> Self {
        Poly::new(vec![c])
    }

    /// `c0 + c1·w`
    pub fn linear(c0: Complex64, c1: Complex64) -> Self {
        Poly::new(vec![c0, c1])
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 {
            let last = self.coeffs[self.coeffs.len() - 1];
            if last.re == 0.0 && last.im == 0.0 {
                self.coeffs.pop();
            } else {
                break;
            }
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(Complex64::new(0.0, 0.0));
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::constant(Complex64::new(0.0, 0.0));
        }
        let d: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * (i as f64))
            .collect();
        Poly::new(d)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            out[i] += a;
        }
        for (i, b) in other.coeffs.iter().enumerate() {
            out[i] += b;
        }
        Poly::new(out)
    }

    pub fn scale(&self, c: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Multiplies by `(a + b·w)^k` in place.
    pub fn mul_linear_pow(&self, a: Complex64, b: Complex64, k: usize) -> Poly {
        let mut out = self.clone();
        let f = Poly::linear(a, b);
        for _ in 0..k {
            out = out.mul(&f);
        }
        out
    }
}

//! Aberth–Ehrlich simultaneous root iteration for complex polynomials.

use num_complex::Complex64;

use super::poly::Poly;
use crate::error::{Error, Result};

const MAX_ITER: usize = 400;
const STEP_TOL: f64 = 1e-13;

/// Finds all complex roots of `p`, with multiplicity reflected by near-coincident values.
///
/// Degrees 0..=2 are handled in closed form; higher degrees run the Aberth–Ehrlich
/// iteration starting from a circle of radius given by Cauchy's bound.
pub fn find_roots(p: &Poly) -> Result<Vec<Complex64>> {
    let mut coeffs = p.coeffs().to_vec();
    // Factor out exact roots at the origin.
    let mut zero_roots = 0usize;
    while coeffs.len() > 1 && coeffs[0].re == 0.0 && coeffs[0].im == 0.0 {
        coeffs.remove(0);
        zero_roots += 1;
    }
    let mut roots = vec![Complex64::new(0.0, 0.0); zero_roots];
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(roots);
    }
    if n == 1 {
        roots.push(-coeffs[0] / coeffs[1]);
        return Ok(roots);
    }
    if n == 2 {
        roots.extend(quadratic(coeffs[0], coeffs[1], coeffs[2]));
        return Ok(roots);
    }

    let lead = coeffs[n];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    let poly = Poly::new(monic);
    let deriv = poly.derivative();

    // Cauchy bound: all roots lie in |z| <= 1 + max |a_i|.
    let bound = 1.0
        + poly.coeffs()[..n]
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64) + 0.4;
            Complex64::from_polar(bound * 0.5 + 1e-3, angle)
        })
        .collect();

    for iter in 0..MAX_ITER {
        let mut max_step = 0.0f64;
        for k in 0..n {
            let pv = poly.eval(z[k]);
            if pv.norm() == 0.0 {
                continue;
            }
            let dv = deriv.eval(z[k]);
            let ratio = if dv.norm() == 0.0 {
                // Stationary point; nudge off it.
                Complex64::new(1e-8 * (1.0 + z[k].norm()), 0.0)
            } else {
                pv / dv
            };
            let mut repulse = Complex64::new(0.0, 0.0);
            for (j, zj) in z.iter().enumerate() {
                if j != k {
                    let diff = z[k] - zj;
                    if diff.norm() > 0.0 {
                        repulse += diff.inv();
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - ratio * repulse;
            let correction = if denom.norm() < 1e-300 { ratio } else { ratio / denom };
            if !correction.re.is_finite() || !correction.im.is_finite() {
                return Err(Error::NonConvergence { iterations: iter });
            }
            z[k] -= correction;
            let rel = correction.norm() / (1.0 + z[k].norm());
            max_step = max_step.max(rel);
        }
        if max_step <= STEP_TOL {
            roots.extend(z);
            return Ok(roots);
        }
    }
    Err(Error::NonConvergence { iterations: MAX_ITER })
}

/// Numerically stable complex quadratic formula.
fn quadratic(c0: Complex64, c1: Complex64, c2: Complex64) -> Vec<Complex64> {
    let disc = (c1 * c1 - 4.0 * c2 * c0).sqrt();
    // Pick the sign that avoids cancellation in c1 ± disc.
    let s = if (c1 + disc).norm() >= (c1 - disc).norm() {
        c1 + disc
    } else {
        c1 - disc
    };
    if s.norm() == 0.0 {
        // c1 = 0 and c0 = 0
        return vec![Complex64::new(0.0, 0.0); 2];
    }
    let r1 = -2.0 * c0 / s;
    let r2 = -s / (2.0 * c2);
    vec![r1, r2]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quadratic_roots() {
        // (w-1)(w-2) = 2 - 3w + w^2
        let p = Poly::new(vec![c(2.0, 0.0), c(-3.0, 0.0), c(1.0, 0.0)]);
        let mut r = find_roots(&p).unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((r[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn higher_degree_with_complex_pair() {
        // (w-1)(w-(2+i))(w-(2-i))(w+3) = roots {1, 2±i, -3}
        let p = Poly::linear(c(-1.0, 0.0), c(1.0, 0.0))
            .mul(&Poly::linear(c(-2.0, -1.0), c(1.0, 0.0)))
            .mul(&Poly::linear(c(-2.0, 1.0), c(1.0, 0.0)))
            .mul(&Poly::linear(c(3.0, 0.0), c(1.0, 0.0)));
        let roots = find_roots(&p).unwrap();
        for target in [c(1.0, 0.0), c(2.0, 1.0), c(2.0, -1.0), c(-3.0, 0.0)] {
            assert!(
                roots.iter().any(|r| (r - target).norm() < 1e-10),
                "missing root {target}"
            );
        }
    }

    #[test]
    fn repeated_root_cluster() {
        // (w-1)^3 (w+2)
        let one = Poly::linear(c(-1.0, 0.0), c(1.0, 0.0));
        let p = one.mul(&one).mul(&one).mul(&Poly::linear(c(2.0, 0.0), c(1.0, 0.0)));
        let roots = find_roots(&p).unwrap();
        let near_one = roots.iter().filter(|r| (*r - c(1.0, 0.0)).norm() < 1e-4).count();
        assert_eq!(near_one, 3);
    }

    #[test]
    fn origin_roots_deflated_exactly() {
        // w^2 (w - 5)
        let p = Poly::new(vec![c(0.0, 0.0), c(0.0, 0.0), c(-5.0, 0.0), c(1.0, 0.0)]);
        let roots = find_roots(&p).unwrap();
        assert_eq!(roots.iter().filter(|r| r.norm() == 0.0).count(), 2);
        assert!(roots.iter().any(|r| (r - c(5.0, 0.0)).norm() < 1e-12));
    }
}

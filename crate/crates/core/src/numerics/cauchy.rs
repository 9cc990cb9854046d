//! Taylor coefficients of an analytic function via trapezoidal Cauchy integrals.

use num_complex::Complex64;

/// First `n` Taylor coefficients of `f` around `center`:
/// `c_j = (1/2πi) ∮ f(s)/(s-center)^{j+1} ds`, sampled on a circle of `radius`.
///
/// The trapezoid rule on a circle is spectrally accurate for analytic `f`;
/// pick `radius` well inside the disc of analyticity.
pub fn taylor_coeffs<F>(mut f: F, center: Complex64, radius: f64, n: usize) -> Vec<Complex64>
where
    F: FnMut(Complex64) -> Complex64,
{
    let nodes = (8 * n.max(4)).next_power_of_two().max(64);
    let values: Vec<Complex64> = (0..nodes)
        .map(|l| {
            let theta = 2.0 * std::f64::consts::PI * (l as f64) / (nodes as f64);
            f(center + Complex64::from_polar(radius, theta))
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (l, v) in values.iter().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * (l as f64) * (j as f64) / (nodes as f64);
            acc += v * Complex64::from_polar(1.0, -theta);
        }
        out.push(acc / (nodes as f64) / radius.powi(j as i32));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_of_rational_function() {
        // f(s) = 1/(1-s) around 0: all Taylor coefficients are 1.
        let cs = taylor_coeffs(
            |s| (Complex64::new(1.0, 0.0) - s).inv(),
            Complex64::new(0.0, 0.0),
            0.3,
            5,
        );
        for c in cs {
            assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn shifted_center() {
        // f(s) = s^2 around 2: coefficients 4, 4, 1, 0...
        let cs = taylor_coeffs(|s| s * s, Complex64::new(2.0, 0.0), 0.5, 4);
        let expect = [4.0, 4.0, 1.0, 0.0];
        for (c, e) in cs.iter().zip(expect) {
            assert!((c - Complex64::new(e, 0.0)).norm() < 1e-12);
        }
    }
}

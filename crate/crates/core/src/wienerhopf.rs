//! Wiener–Hopf factors: the laws of `sup Y` and `inf X` at an exponential time.
//!
//! Both factors are rational functions of the transform variable, kept in two
//! synchronized representations: the product over rates and roots, and the
//! partial-fraction expansion (an atom, a simple leading term, and higher-order
//! terms at the remaining roots). The product form is exact; partial fractions
//! come from closed-form residues at simple roots and Cauchy-integral Taylor
//! extraction at multiple ones.

use num_complex::Complex64;

use crate::charexp::{roots_beta, roots_gamma, Root, RootSet};
use crate::error::{Error, Result};
use crate::model::ValidatedModel;
use crate::numerics::cauchy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorSide {
    /// `ψ⁺(s) = Ẽ[e^{-s·sup Y_{e(q)}}]`
    SupOfY,
    /// `ψ⁻(s) = E[e^{s·inf X_{e(q)}}]`
    InfOfX,
}

/// One partial-fraction term `coeff/(s+root)^order`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfTerm {
    pub root: Complex64,
    pub order: usize,
    pub coeff: Complex64,
}

/// A Wiener–Hopf factor with both representations.
#[derive(Debug, Clone)]
pub struct WienerHopfFactor {
    pub side: FactorSide,
    pub q: f64,
    rates: Vec<(Complex64, usize)>,
    roots: Vec<Root>,
    /// Point mass of the extreme at 0 (C₀ or D₀).
    pub atom: f64,
    pf: Vec<PfTerm>,
}

/// Law of `sup_{t ≤ e(q)} Y_t` under the drift-reduced measure.
pub fn pos_factor(m: &ValidatedModel, q: f64) -> Result<WienerHopfFactor> {
    let base = m.base();
    let rates: Vec<(Complex64, usize)> = if base.lambda_plus > 0.0 {
        base.jumps_up
            .terms
            .iter()
            .map(|t| (t.rate, t.coeffs.len()))
            .collect()
    } else {
        Vec::new()
    };
    let roots = roots_beta(m, q)?;
    build(
        FactorSide::SupOfY,
        rates,
        roots,
        m.atom_flags().y_has_atom_at_sup,
    )
}

/// Law of `inf_{t ≤ e(q)} X_t`.
pub fn neg_factor(m: &ValidatedModel, q: f64) -> Result<WienerHopfFactor> {
    let base = m.base();
    let rates: Vec<(Complex64, usize)> = if base.lambda_minus > 0.0 {
        base.jumps_down
            .terms
            .iter()
            .map(|t| (t.rate, t.coeffs.len()))
            .collect()
    } else {
        Vec::new()
    };
    let roots = roots_gamma(m, q)?;
    build(
        FactorSide::InfOfX,
        rates,
        roots,
        m.atom_flags().x_has_atom_at_inf,
    )
}

pub(crate) fn build(
    side: FactorSide,
    mut rates: Vec<(Complex64, usize)>,
    rootset: RootSet,
    atom_flag: bool,
) -> Result<WienerHopfFactor> {
    // Fixed accumulation order for reproducibility.
    rates.sort_by(|a, b| (a.0.re, a.0.im).partial_cmp(&(b.0.re, b.0.im)).unwrap());
    let roots = rootset.roots.clone();

    let atom = if atom_flag {
        let mut v = Complex64::new(1.0, 0.0);
        for r in &roots {
            v *= r.value.powi(r.multiplicity as i32);
        }
        for (rate, ord) in &rates {
            v /= rate.powi(*ord as i32);
        }
        realize(v, "Wiener-Hopf atom")?
    } else {
        0.0
    };

    let mut pf = Vec::new();
    for (k, root) in roots.iter().enumerate() {
        if root.multiplicity == 1 {
            // Residue of the product form at s = -root, in closed form.
            let mut c = root.value;
            for (rate, ord) in &rates {
                c *= ((rate - root.value) / rate).powi(*ord as i32);
            }
            for (j, other) in roots.iter().enumerate() {
                if j != k {
                    c *= (other.value / (other.value - root.value)).powi(other.multiplicity as i32);
                }
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::DegenerateExpansion { root: root.value });
            }
            pf.push(PfTerm {
                root: root.value,
                order: 1,
                coeff: c,
            });
        } else {
            // g(s) = ψ(s)·(s+root)^M is analytic near -root; its Taylor
            // coefficients t_l give the coefficients of (s+root)^{M-l}.
            let m_k = root.multiplicity;
            let sep = roots
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, o)| (o.value - root.value).norm())
                .fold(f64::INFINITY, f64::min);
            let radius = if sep.is_finite() {
                (1e-2 * sep).min(1.0)
            } else {
                0.1 * (1.0 + root.value.norm())
            };
            let center = -root.value;
            let g = |s: Complex64| -> Complex64 {
                let mut v = root.value.powi(m_k as i32);
                for (rate, ord) in &rates {
                    v *= ((s + rate) / rate).powi(*ord as i32);
                }
                for (j, other) in roots.iter().enumerate() {
                    if j != k {
                        v *= (other.value / (s + other.value)).powi(other.multiplicity as i32);
                    }
                }
                v
            };
            let taylor = cauchy::taylor_coeffs(g, center, radius, m_k);
            for (l, t) in taylor.into_iter().enumerate() {
                if !t.re.is_finite() || !t.im.is_finite() {
                    return Err(Error::DegenerateExpansion { root: root.value });
                }
                pf.push(PfTerm {
                    root: root.value,
                    order: m_k - l,
                    coeff: t,
                });
            }
        }
    }

    Ok(WienerHopfFactor {
        side,
        q: rootset.q,
        rates,
        roots,
        atom,
        pf,
    })
}

impl WienerHopfFactor {
    pub fn rates(&self) -> &[(Complex64, usize)] {
        &self.rates
    }

    pub fn roots(&self) -> &[Root] {
        &self.roots
    }

    /// The leading real simple root β₁ (resp. γ₁).
    pub fn first_root(&self) -> f64 {
        self.roots[0].value.re
    }

    /// `(C₁, β₁)`: coefficient and root of the simple leading term.
    pub fn simple_coeff(&self) -> (f64, f64) {
        let t = &self.pf[0];
        (t.coeff.re, t.root.re)
    }

    /// Partial-fraction terms beyond the leading simple one.
    pub fn higher_terms(&self) -> &[PfTerm] {
        &self.pf[1..]
    }

    pub fn partial_fraction_terms(&self) -> &[PfTerm] {
        &self.pf
    }

    /// Product-form evaluation, restricted to the analytic half-plane
    /// `Re(s) > -first_root`.
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let boundary = self.first_root();
        if s.re <= -boundary + 1e-12 * (1.0 + boundary) {
            return Err(Error::OutsideAnalyticRegion {
                re: s.re,
                boundary,
            });
        }
        Ok(self.eval_product_unchecked(s))
    }

    pub(crate) fn eval_product_unchecked(&self, s: Complex64) -> Complex64 {
        let mut v = Complex64::new(1.0, 0.0);
        for (rate, ord) in &self.rates {
            v *= ((s + rate) / rate).powi(*ord as i32);
        }
        for r in &self.roots {
            v *= (r.value / (s + r.value)).powi(r.multiplicity as i32);
        }
        v
    }

    /// Partial-fraction evaluation; agrees with the product form on the
    /// analytic region.
    pub fn eval_partial_fractions(&self, s: Complex64) -> Result<Complex64> {
        let boundary = self.first_root();
        if s.re <= -boundary + 1e-12 * (1.0 + boundary) {
            return Err(Error::OutsideAnalyticRegion {
                re: s.re,
                boundary,
            });
        }
        let mut v = Complex64::new(self.atom, 0.0);
        for t in &self.pf {
            v += t.coeff / (s + t.root).powi(t.order as i32);
        }
        Ok(v)
    }

    /// Density of the extreme at `y` (`y ≥ 0` for the supremum side, `y ≤ 0`
    /// for the infimum side); the atom at 0 is reported separately.
    pub fn density(&self, y: f64) -> f64 {
        let mut v = Complex64::new(0.0, 0.0);
        match self.side {
            FactorSide::SupOfY => {
                debug_assert!(y >= 0.0);
                for t in &self.pf {
                    v += t.coeff * y.powi((t.order - 1) as i32) / factorial(t.order - 1)
                        * (-t.root * y).exp();
                }
            }
            FactorSide::InfOfX => {
                debug_assert!(y <= 0.0);
                for t in &self.pf {
                    v += t.coeff * (-y).powi((t.order - 1) as i32) / factorial(t.order - 1)
                        * (t.root * y).exp();
                }
            }
        }
        debug_assert!(v.im.abs() < 1e-11 * (1.0 + v.norm()), "density imag {}", v.im);
        v.re
    }

    /// Total mass `atom + ∫ density`, via the closed-form term integrals.
    pub fn mass(&self) -> f64 {
        let mut v = Complex64::new(self.atom, 0.0);
        for t in &self.pf {
            v += t.coeff / t.root.powi(t.order as i32);
        }
        debug_assert!(v.im.abs() < 1e-10 * (1.0 + v.norm()));
        v.re
    }
}

/// Product-form evaluation (spec operation `eval_factor`).
pub fn eval_factor(f: &WienerHopfFactor, s: Complex64) -> Result<Complex64> {
    f.eval(s)
}

/// `(atom at 0, density at y)` for the supremum law, `y ≥ 0`.
pub fn sup_law_density(f: &WienerHopfFactor, y: f64) -> (f64, f64) {
    assert_eq!(f.side, FactorSide::SupOfY);
    (f.atom, f.density(y))
}

/// `(atom at 0, density at y)` for the infimum law, `y ≤ 0`.
pub fn inf_law_density(f: &WienerHopfFactor, y: f64) -> (f64, f64) {
    assert_eq!(f.side, FactorSide::InfOfX);
    (f.atom, f.density(y))
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub(crate) fn realize(v: Complex64, what: &str) -> Result<f64> {
    if v.im.abs() > 1e-9 * (1.0 + v.re.abs()) {
        return Err(Error::InvariantViolation(format!(
            "{what}: imaginary residue {} on value {}",
            v.im, v.re
        )));
    }
    Ok(v.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charexp::laplace_exponent;
    use crate::fixtures;
    use approx::assert_relative_eq;

    #[test]
    fn normalization_at_zero() {
        for m in [
            fixtures::model_a(),
            fixtures::brownian_refracted(),
            fixtures::zero_vol_between(),
            fixtures::complex_rate_model(),
            fixtures::erlang_model(),
        ] {
            let q = 0.1;
            let pos = pos_factor(&m, q).unwrap();
            let neg = neg_factor(&m, q).unwrap();
            let z = Complex64::new(0.0, 0.0);
            assert!((pos.eval(z).unwrap() - 1.0).norm() < 1e-14);
            assert!((neg.eval(z).unwrap() - 1.0).norm() < 1e-14);
            assert!((pos.eval_partial_fractions(z).unwrap() - 1.0).norm() < 1e-12);
            assert!((neg.eval_partial_fractions(z).unwrap() - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn atoms_follow_the_regime_table() {
        let q = 0.1;
        let pos = pos_factor(&fixtures::model_a(), q).unwrap();
        assert_eq!(pos.atom, 0.0);
        let neg = neg_factor(&fixtures::model_a(), q).unwrap();
        assert_eq!(neg.atom, 0.0);

        // σ=0, μ=0.03, α=0.05: single β, atom = β₁/η₁.
        let zv = fixtures::zero_vol_between();
        let pos = pos_factor(&zv, q).unwrap();
        assert_relative_eq!(pos.atom, 0.17427935186959267585, max_relative = 1e-11);
        let neg = neg_factor(&zv, q).unwrap();
        assert_relative_eq!(neg.atom, 0.92084063678995302477 / 3.0, max_relative = 1e-11);
    }

    #[test]
    fn brownian_inf_law_is_exponential() {
        // ψ⁻(s) = γ₁/(s+γ₁) with γ₁ from the quadratic closed form.
        let m = fixtures::brownian_refracted();
        let neg = neg_factor(&m, 0.1).unwrap();
        let g1 = 5.8541019662496845446;
        for s in [0.3, 1.0, 4.2] {
            let v = neg.eval(Complex64::new(s, 0.0)).unwrap();
            assert_relative_eq!(v.re, g1 / (s + g1), max_relative = 1e-12);
        }
        let (c1, root) = neg.simple_coeff();
        assert_relative_eq!(root, g1, max_relative = 1e-12);
        assert_relative_eq!(c1, g1, max_relative = 1e-12);
        // Density of the supremum side mirrors: C₁ e^{-β₁ y} with C₁ = β₁.
        let pos = pos_factor(&m, 0.1).unwrap();
        let b1 = 1.3117376914898995958;
        assert_relative_eq!(pos.density(0.7), b1 * (-b1 * 0.7f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn product_and_partial_fractions_agree_on_a_grid() {
        for m in [
            fixtures::model_a(),
            fixtures::complex_rate_model(),
            fixtures::erlang_model(),
        ] {
            let pos = pos_factor(&m, 0.25).unwrap();
            let neg = neg_factor(&m, 0.25).unwrap();
            for f in [&pos, &neg] {
                for k in 0..40 {
                    let s = Complex64::new(
                        -0.9 * f.first_root() + 0.31 * k as f64,
                        ((k * 7) % 11) as f64 * 0.4 - 2.0,
                    );
                    let a = f.eval(s).unwrap();
                    let b = f.eval_partial_fractions(s).unwrap();
                    assert!(
                        (a - b).norm() <= 1e-10 * (1.0 + a.norm()),
                        "mismatch at {s}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn total_mass_is_one() {
        for m in [
            fixtures::model_a(),
            fixtures::brownian_refracted(),
            fixtures::zero_vol_between(),
            fixtures::complex_rate_model(),
            fixtures::erlang_model(),
        ] {
            for q in [0.1, 0.7] {
                let pos = pos_factor(&m, q).unwrap();
                assert!((pos.mass() - 1.0).abs() < 1e-10, "pos mass {}", pos.mass());
                let neg = neg_factor(&m, q).unwrap();
                assert!((neg.mass() - 1.0).abs() < 1e-10, "neg mass {}", neg.mass());
            }
        }
    }

    #[test]
    fn density_at_zero_is_the_coefficient_sum_of_order_one_terms() {
        let pos = pos_factor(&fixtures::model_a(), 0.1).unwrap();
        let expect: Complex64 = pos
            .partial_fraction_terms()
            .iter()
            .filter(|t| t.order == 1)
            .map(|t| t.coeff)
            .sum();
        assert_relative_eq!(pos.density(0.0), expect.re, max_relative = 1e-12);
    }

    #[test]
    fn outside_analytic_region_is_rejected() {
        let pos = pos_factor(&fixtures::model_a(), 0.1).unwrap();
        let s = Complex64::new(-pos.first_root() - 1e-3, 0.0);
        assert!(matches!(
            pos.eval(s),
            Err(Error::OutsideAnalyticRegion { .. })
        ));
    }

    #[test]
    fn density_real_and_nonnegative_for_complex_rate_model() {
        let m = fixtures::complex_rate_model();
        let pos = pos_factor(&m, 0.3).unwrap();
        let neg = neg_factor(&m, 0.3).unwrap();
        for k in 1..=60 {
            let y = 0.15 * k as f64;
            assert!(pos.density(y) >= -1e-12);
            assert!(neg.density(-y) >= -1e-12);
        }
    }

    #[test]
    fn factorization_identity_at_alpha_zero() {
        // ψ⁺(-φ)·ψ⁻(φ) = q/(q - ln E e^{φX₁}) on the imaginary axis.
        let m = fixtures::model_a_alpha_zero();
        let q = 0.1;
        let pos = pos_factor(&m, q).unwrap();
        let neg = neg_factor(&m, q).unwrap();
        for k in 1..=6 {
            let phi = Complex64::new(0.0, 0.3 * k as f64);
            let lhs = pos.eval(-phi).unwrap() * neg.eval(phi).unwrap();
            let expo = laplace_exponent(m.base(), m.base().mu, phi);
            let rhs = q / (q - expo);
            assert!(
                (lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()),
                "phi={phi}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn higher_order_partial_fractions_agree_pointwise() {
        // Synthetic factor with a double root exercises the contour path.
        use crate::charexp::{Root, RootSet, RootSide};
        let rates = vec![(Complex64::new(2.0, 0.0), 2usize)];
        let roots = RootSet {
            side: RootSide::LowerBeta,
            q: 0.1,
            roots: vec![
                Root {
                    value: Complex64::new(0.4, 0.0),
                    multiplicity: 1,
                },
                Root {
                    value: Complex64::new(3.0, 0.0),
                    multiplicity: 2,
                },
            ],
        };
        let f = build(FactorSide::SupOfY, rates, roots, false).unwrap();
        assert_eq!(f.partial_fraction_terms().len(), 3);
        for k in 0..25 {
            let s = Complex64::new(0.5 * k as f64 - 0.3, 0.17 * k as f64 - 1.1);
            let a = f.eval(s).unwrap();
            let b = f.eval_partial_fractions(s).unwrap();
            assert!((a - b).norm() <= 1e-9 * (1.0 + a.norm()), "at {s}");
        }
    }
}

//! Occupation-time functionals of the refracted process at an exponential
//! time: the Laplace transform `V(x) = E_x[e^{-p∫1{U<b}}]`, the expectation
//! `E_x[∫1{U<b}]`, the distribution `P_x(U_{e(q)} < b)` with its atom at `b`,
//! and both sides of the factorization identity that ties the distribution to
//! the Wiener–Hopf factors.
//!
//! Every answer is a piecewise exponential-polynomial in `x` around the level
//! `b`, whose coefficients are partial fractions of one explicit rational
//! function built from the root sets. Simple roots take the closed product
//! route; multiple roots fall back to Cauchy-residue extraction.

use num_complex::Complex64;

use crate::charexp::{roots_beta, roots_gamma, RootSet};
use crate::error::{Error, Result};
use crate::model::{Regime, ValidatedModel};
use crate::numerics::cauchy;
use crate::wienerhopf::{self, factorial, realize};

/// A rational function in fully factored form:
/// `prefactor · Π(x-num_i)^{o_i} / Π(x-den_j)^{p_j}`.
#[derive(Debug, Clone)]
pub struct RationalFn {
    pub prefactor: Complex64,
    pub num: Vec<(Complex64, usize)>,
    pub den: Vec<(Complex64, usize)>,
}

impl RationalFn {
    pub fn eval(&self, x: Complex64) -> Complex64 {
        let mut v = self.prefactor;
        for (r, o) in &self.num {
            v *= (x - r).powi(*o as i32);
        }
        for (p, o) in &self.den {
            v /= (x - p).powi(*o as i32);
        }
        v
    }

    fn eval_skipping_den(&self, skip: usize, x: Complex64) -> Complex64 {
        let mut v = self.prefactor;
        for (r, o) in &self.num {
            v *= (x - r).powi(*o as i32);
        }
        for (j, (p, o)) in self.den.iter().enumerate() {
            if j != skip {
                v /= (x - p).powi(*o as i32);
            }
        }
        v
    }

    pub fn num_degree(&self) -> usize {
        self.num.iter().map(|(_, o)| o).sum()
    }

    pub fn den_degree(&self) -> usize {
        self.den.iter().map(|(_, o)| o).sum()
    }

    pub fn all_den_simple(&self) -> bool {
        self.den.iter().all(|(_, o)| *o == 1)
    }

    /// Residue at a simple denominator root, by the closed product formula.
    pub fn residue_at_simple(&self, idx: usize) -> Complex64 {
        debug_assert_eq!(self.den[idx].1, 1);
        self.eval_skipping_den(idx, self.den[idx].0)
    }

    /// Partial-fraction coefficients at denominator entry `idx`:
    /// returns `a_1..a_M` with `f ~ Σ a_i/(x-pole)^i`, extracted from the
    /// Taylor expansion of `f·(x-pole)^M` on a Cauchy contour.
    pub fn partial_fractions_at(&self, idx: usize) -> Result<Vec<Complex64>> {
        let (pole, order) = self.den[idx];
        let sep = self
            .den
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != idx)
            .map(|(_, (p, _))| (p - pole).norm())
            .chain(self.num.iter().map(|(r, _)| (r - pole).norm()))
            .fold(f64::INFINITY, f64::min);
        let radius = if sep.is_finite() {
            (0.3 * sep).min(1.0)
        } else {
            0.5 * (1.0 + pole.norm())
        };
        let taylor = cauchy::taylor_coeffs(
            |x| self.eval_skipping_den(idx, x),
            pole,
            radius,
            order,
        );
        let mut out = vec![Complex64::new(0.0, 0.0); order];
        for (l, t) in taylor.into_iter().enumerate() {
            if !t.re.is_finite() || !t.im.is_finite() {
                return Err(Error::ResidueExtractionFailure {
                    pole,
                    detail: "non-finite Taylor coefficient".into(),
                });
            }
            out[order - l - 1] = t;
        }
        Ok(out)
    }
}

/// One exponential-polynomial term on either side of the level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpPolyTerm {
    pub root: Complex64,
    pub order: usize,
    pub coeff: Complex64,
}

/// A function given on `(-∞, b)` and `[b, ∞)` as a constant plus decaying
/// exponential-polynomial sums; the `x ≥ b` branch owns the boundary point.
#[derive(Debug, Clone)]
pub struct PiecewiseExpPoly {
    pub level: f64,
    pub below_constant: f64,
    /// Terms `coeff·(b-x)^{order-1} e^{-root·(b-x)}/(order-1)!` for `x < b`.
    pub below_terms: Vec<ExpPolyTerm>,
    pub above_constant: f64,
    /// Terms `coeff·(x-b)^{order-1} e^{-root·(x-b)}/(order-1)!` for `x ≥ b`.
    pub above_terms: Vec<ExpPolyTerm>,
}

impl PiecewiseExpPoly {
    pub fn eval(&self, x: f64) -> f64 {
        let mut v = Complex64::new(0.0, 0.0);
        if x < self.level {
            let t = self.level - x;
            for term in &self.below_terms {
                v += term.coeff * t.powi((term.order - 1) as i32) / factorial(term.order - 1)
                    * (-term.root * t).exp();
            }
            debug_assert!(v.im.abs() < 1e-10 * (1.0 + v.norm()), "imag {}", v.im);
            self.below_constant + v.re
        } else {
            let t = x - self.level;
            for term in &self.above_terms {
                v += term.coeff * t.powi((term.order - 1) as i32) / factorial(term.order - 1)
                    * (-term.root * t).exp();
            }
            debug_assert!(v.im.abs() < 1e-10 * (1.0 + v.norm()), "imag {}", v.im);
            self.above_constant + v.re
        }
    }

    /// `lim_{x↑b}`: constant plus the order-1 coefficients.
    pub fn left_limit(&self) -> f64 {
        let s: Complex64 = self
            .below_terms
            .iter()
            .filter(|t| t.order == 1)
            .map(|t| t.coeff)
            .sum();
        self.below_constant + s.re
    }

    pub fn right_value(&self) -> f64 {
        let s: Complex64 = self
            .above_terms
            .iter()
            .filter(|t| t.order == 1)
            .map(|t| t.coeff)
            .sum();
        self.above_constant + s.re
    }

    /// `lim_{x↑b} d/dx`.
    pub fn left_derivative(&self) -> f64 {
        let mut v = Complex64::new(0.0, 0.0);
        for t in &self.below_terms {
            if t.order == 1 {
                v += t.root * t.coeff;
            } else if t.order == 2 {
                v -= t.coeff;
            }
        }
        v.re
    }

    /// `d/dx` at `b` from the right.
    pub fn right_derivative(&self) -> f64 {
        let mut v = Complex64::new(0.0, 0.0);
        for t in &self.above_terms {
            if t.order == 1 {
                v -= t.root * t.coeff;
            } else if t.order == 2 {
                v += t.coeff;
            }
        }
        v.re
    }

    /// Jump at the level: `value(b) − lim_{x↑b}`.
    pub fn atom_at_level(&self) -> f64 {
        self.right_value() - self.left_limit()
    }
}

/// The rational function whose partial fractions are the Theorem coefficients,
/// with `ξ = p+q`: a simple pole at 0 with residue `p/ξ`, poles at the β's
/// (taken at ξ) and at `-γ` (taken at q), zeros at the rates.
pub fn f_fn(m: &ValidatedModel, p: f64, q: f64) -> Result<RationalFn> {
    assert!(p >= 0.0 && q > 0.0);
    let xi = p + q;
    let betas = roots_beta(m, xi)?;
    let gammas = roots_gamma(m, q)?;
    Ok(assemble_rational(m, &betas, &gammas, p / xi))
}

fn assemble_rational(
    m: &ValidatedModel,
    betas: &RootSet,
    gammas: &RootSet,
    scale: f64,
) -> RationalFn {
    let base = m.base();
    let mut prefactor = Complex64::new(scale, 0.0);
    let mut num = Vec::new();
    let mut den = vec![(Complex64::new(0.0, 0.0), 1usize)];
    for r in &betas.roots {
        prefactor *= (-r.value).powi(r.multiplicity as i32);
        den.push((r.value, r.multiplicity));
    }
    for r in &gammas.roots {
        prefactor *= r.value.powi(r.multiplicity as i32);
        den.push((-r.value, r.multiplicity));
    }
    if base.lambda_plus > 0.0 {
        for t in &base.jumps_up.terms {
            prefactor /= (-t.rate).powi(t.coeffs.len() as i32);
            num.push((t.rate, t.coeffs.len()));
        }
    }
    if base.lambda_minus > 0.0 {
        for t in &base.jumps_down.terms {
            prefactor /= t.rate.powi(t.coeffs.len() as i32);
            num.push((-t.rate, t.coeffs.len()));
        }
    }
    RationalFn {
        prefactor,
        num,
        den,
    }
}

/// Coefficient lists per root: `out[m][i-1]` is the weight of
/// `(b∓x)^{i-1} e^{∓root(b∓x)}/(i-1)!`.
fn coefficients_from(
    f: &RationalFn,
    betas: &RootSet,
    gammas: &RootSet,
    expected_zero_residue: f64,
) -> Result<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>)> {
    // Denominator layout from assemble_rational: entry 0 is the origin, then
    // betas, then the negated gammas.
    let zero_residue = if f.all_den_simple() {
        f.residue_at_simple(0)
    } else {
        f.partial_fractions_at(0)?[0]
    };
    if (zero_residue - expected_zero_residue).norm() > 1e-8 * (1.0 + expected_zero_residue.abs()) {
        return Err(Error::ResidueExtractionFailure {
            pole: Complex64::new(0.0, 0.0),
            detail: format!(
                "residue at 0 is {zero_residue}, expected {expected_zero_residue}"
            ),
        });
    }

    let simple = f.all_den_simple();
    let mut h = Vec::with_capacity(betas.roots.len());
    for (k, root) in betas.roots.iter().enumerate() {
        let idx = 1 + k;
        let coeffs = if simple {
            vec![f.residue_at_simple(idx)]
        } else {
            f.partial_fractions_at(idx)?
        };
        // H_{m,i} = (-1)^i a_{m,i}
        h.push(
            coeffs
                .into_iter()
                .enumerate()
                .map(|(i0, a)| if i0 % 2 == 0 { -a } else { a })
                .collect::<Vec<_>>(),
        );
        let _ = root;
    }
    let mut g = Vec::with_capacity(gammas.roots.len());
    for (n, root) in gammas.roots.iter().enumerate() {
        let idx = 1 + betas.roots.len() + n;
        let coeffs = if simple {
            vec![f.residue_at_simple(idx)]
        } else {
            f.partial_fractions_at(idx)?
        };
        g.push(coeffs);
        let _ = root;
    }
    Ok((h, g))
}

/// `V(x) = E_x[e^{-p∫_0^{e(q)} 1{U_s<b} ds}]` as a piecewise
/// exponential-polynomial: `q/ξ + Σ H` below `b`, `1 + Σ G` above.
pub fn occupation_laplace(m: &ValidatedModel, p: f64, q: f64) -> Result<PiecewiseExpPoly> {
    assert!(p >= 0.0 && q > 0.0);
    let xi = p + q;
    let betas = roots_beta(m, xi)?;
    let gammas = roots_gamma(m, q)?;
    let f = assemble_rational(m, &betas, &gammas, p / xi);
    let (h, g) = coefficients_from(&f, &betas, &gammas, p / xi)?;
    Ok(assemble_piecewise(m.level(), q / xi, 1.0, &betas, &gammas, &h, &g, 1.0))
}

#[allow(clippy::too_many_arguments)]
fn assemble_piecewise(
    level: f64,
    below_constant: f64,
    above_constant: f64,
    betas: &RootSet,
    gammas: &RootSet,
    h: &[Vec<Complex64>],
    g: &[Vec<Complex64>],
    coeff_scale: f64,
) -> PiecewiseExpPoly {
    let mut below_terms = Vec::new();
    for (root, coeffs) in betas.roots.iter().zip(h) {
        for (i0, c) in coeffs.iter().enumerate() {
            below_terms.push(ExpPolyTerm {
                root: root.value,
                order: i0 + 1,
                coeff: c * coeff_scale,
            });
        }
    }
    let mut above_terms = Vec::new();
    for (root, coeffs) in gammas.roots.iter().zip(g) {
        for (i0, c) in coeffs.iter().enumerate() {
            above_terms.push(ExpPolyTerm {
                root: root.value,
                order: i0 + 1,
                coeff: c * coeff_scale,
            });
        }
    }
    PiecewiseExpPoly {
        level,
        below_constant,
        below_terms,
        above_constant,
        above_terms,
    }
}

pub(crate) struct ExpectationParts {
    pub betas: RootSet,
    pub gammas: RootSet,
    /// `H⁰_{m,i}` at `h0[m][i-1]`.
    pub h0: Vec<Vec<Complex64>>,
    /// `G⁰_{n,i}` at `g0[n][i-1]`.
    pub g0: Vec<Vec<Complex64>>,
}

pub(crate) fn expectation_parts(m: &ValidatedModel, q: f64) -> Result<ExpectationParts> {
    assert!(q > 0.0);
    let betas = roots_beta(m, q)?;
    let gammas = roots_gamma(m, q)?;
    let f = assemble_rational(m, &betas, &gammas, 1.0);
    let (h0, g0) = coefficients_from(&f, &betas, &gammas, 1.0)?;
    Ok(ExpectationParts {
        betas,
        gammas,
        h0,
        g0,
    })
}

/// `E_x[∫_0^{e(q)} 1{U_s<b} ds]`: `(1/q)(1 − Σ H⁰)` below `b`,
/// `−(1/q) Σ G⁰` above. Computed directly from the `p→0` rational function,
/// never as a limit of Theorem coefficients.
pub fn occupation_expectation(m: &ValidatedModel, q: f64) -> Result<PiecewiseExpPoly> {
    let parts = expectation_parts(m, q)?;
    Ok(assemble_piecewise(
        m.level(),
        1.0 / q,
        0.0,
        &parts.betas,
        &parts.gammas,
        &parts.h0,
        &parts.g0,
        -1.0 / q,
    ))
}

/// `P_x(U_{e(q)} < b) = q · E_x[∫_0^{e(q)} 1{U_s<b} ds]`.
pub fn distribution_at_exp(m: &ValidatedModel, q: f64, x: f64) -> Result<f64> {
    Ok(q * occupation_expectation(m, q)?.eval(x))
}

/// Jump of `x ↦ P_x(U_{e(q)}<b)` at `x=b`: zero except in the σ=0, 0≤μ≤α
/// regime, where it equals minus the ratio of root products to rate products.
pub fn distribution_atom(m: &ValidatedModel, q: f64) -> Result<f64> {
    if m.regime() != Regime::ZeroVolMuBetweenZeroAndAlpha {
        return Ok(0.0);
    }
    let betas = roots_beta(m, q)?;
    let gammas = roots_gamma(m, q)?;
    let base = m.base();
    let mut v = Complex64::new(1.0, 0.0);
    for r in betas.roots.iter().chain(gammas.roots.iter()) {
        v *= r.value.powi(r.multiplicity as i32);
    }
    if base.lambda_plus > 0.0 {
        for t in &base.jumps_up.terms {
            v /= t.rate.powi(t.coeffs.len() as i32);
        }
    }
    if base.lambda_minus > 0.0 {
        for t in &base.jumps_down.terms {
            v /= t.rate.powi(t.coeffs.len() as i32);
        }
    }
    Ok(-realize(v, "distribution atom")?)
}

/// Left side of the factorization identity:
/// `−∫ e^{-φ(x-b)} d(P_x(U_{e(q)}<b))`, computed term by term from the
/// expectation coefficients (no quadrature):
/// `1 + φ·[Σ H⁰_mi/(β_m−φ)^i + Σ G⁰_ni/(γ_n+φ)^i]`.
pub fn identity_lhs(m: &ValidatedModel, q: f64, phi: Complex64) -> Result<Complex64> {
    let parts = expectation_parts(m, q)?;
    let beta1 = parts.betas.first();
    let gamma1 = parts.gammas.first();
    if phi.re <= -gamma1 + 1e-12 || phi.re >= beta1 - 1e-12 {
        return Err(Error::OutsideStrip {
            re: phi.re,
            gamma1,
            beta1,
        });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (root, coeffs) in parts.betas.roots.iter().zip(&parts.h0) {
        for (i0, c) in coeffs.iter().enumerate() {
            acc += c / (root.value - phi).powi((i0 + 1) as i32);
        }
    }
    for (root, coeffs) in parts.gammas.roots.iter().zip(&parts.g0) {
        for (i0, c) in coeffs.iter().enumerate() {
            acc += c / (root.value + phi).powi((i0 + 1) as i32);
        }
    }
    Ok(Complex64::new(1.0, 0.0) + phi * acc)
}

/// Right side of the identity: `Ẽ[e^{φ·sup Y_{e(q)}}]·E[e^{φ·inf X_{e(q)}}]`,
/// i.e. the positive factor at `−φ` times the negative factor at `φ`.
pub fn identity_rhs(m: &ValidatedModel, q: f64, phi: Complex64) -> Result<Complex64> {
    let pos = wienerhopf::pos_factor(m, q)?;
    let neg = wienerhopf::neg_factor(m, q)?;
    Ok(pos.eval(-phi)? * neg.eval(phi)?)
}

/// Expectation value for complex `q` (Talbot inversion), via root tracking and
/// simple-root residues only.
pub(crate) fn expectation_value_complex(
    m: &ValidatedModel,
    q: Complex64,
    x: f64,
) -> Result<Complex64> {
    let base = m.base();
    let (betas, _) = crate::charexp::tracked_exponent_roots(base, base.mu - m.alpha(), q)?;
    let (_, neg_roots) = crate::charexp::tracked_exponent_roots(base, base.mu, q)?;
    let gammas: Vec<Complex64> = neg_roots.iter().map(|w| -w).collect();

    let mut prefactor = Complex64::new(1.0, 0.0);
    let mut num: Vec<(Complex64, usize)> = Vec::new();
    for b in &betas {
        prefactor *= -b;
    }
    for g in &gammas {
        prefactor *= g;
    }
    if base.lambda_plus > 0.0 {
        for t in &base.jumps_up.terms {
            prefactor /= (-t.rate).powi(t.coeffs.len() as i32);
            num.push((t.rate, t.coeffs.len()));
        }
    }
    if base.lambda_minus > 0.0 {
        for t in &base.jumps_down.terms {
            prefactor /= t.rate.powi(t.coeffs.len() as i32);
            num.push((-t.rate, t.coeffs.len()));
        }
    }
    let numerator = |z: Complex64| -> Complex64 {
        let mut v = prefactor;
        for (r, o) in &num {
            v *= (z - r).powi(*o as i32);
        }
        v
    };

    let b_level = m.level();
    if x < b_level {
        // (1/q)(1 − Σ H⁰_m e^{β_m (x-b)}) with H⁰_m = −residue at β_m.
        let mut acc = Complex64::new(1.0, 0.0);
        for (k, bm) in betas.iter().enumerate() {
            let mut den = *bm;
            for (j, other) in betas.iter().enumerate() {
                if j != k {
                    den *= bm - other;
                }
            }
            for g in &gammas {
                den *= bm + g;
            }
            let residue = numerator(*bm) / den;
            acc -= (-residue) * (bm * (x - b_level)).exp();
        }
        Ok(acc / q)
    } else {
        let mut acc = Complex64::new(0.0, 0.0);
        for (n, gn) in gammas.iter().enumerate() {
            let mut den = -gn;
            for b in &betas {
                den *= -gn - b;
            }
            for (j, other) in gammas.iter().enumerate() {
                if j != n {
                    den *= -gn + other;
                }
            }
            let residue = numerator(-gn) / den;
            acc -= residue * (gn * (b_level - x)).exp();
        }
        Ok(acc / q)
    }
}

/// Boundary behavior of an assembled transform at the level, checked against
/// the regime's smoothness contract.
#[derive(Debug, Clone, Copy)]
pub struct SmoothnessReport {
    pub left_limit: f64,
    pub right_value: f64,
    pub left_derivative: f64,
    pub right_derivative: f64,
    pub atom: f64,
}

/// Verifies the regime table: σ>0 gives continuous value and derivative;
/// σ=0 with μ>α or μ<0 gives a continuous value; σ=0 with 0≤μ≤α gives a
/// strictly positive jump.
pub fn smoothness_report(v: &PiecewiseExpPoly, regime: Regime) -> Result<SmoothnessReport> {
    let report = SmoothnessReport {
        left_limit: v.left_limit(),
        right_value: v.right_value(),
        left_derivative: v.left_derivative(),
        right_derivative: v.right_derivative(),
        atom: v.atom_at_level(),
    };
    let value_jump = report.atom.abs();
    let deriv_jump = (report.right_derivative - report.left_derivative).abs();
    let ok = match regime {
        Regime::PositiveVolatility => value_jump < 1e-9 && deriv_jump < 1e-7,
        Regime::ZeroVolMuAboveAlpha | Regime::ZeroVolMuNegative => value_jump < 1e-9,
        Regime::ZeroVolMuBetweenZeroAndAlpha => report.atom > 0.0,
    };
    if !ok {
        return Err(Error::RegimeContractViolation(format!(
            "regime {regime:?}: value jump {value_jump:.3e}, derivative jump {deriv_jump:.3e}"
        )));
    }
    Ok(report)
}

//! Jump-diffusion model parameters, validation, and regime classification.
//!
//! The driving process is `X_t = X_0 + μt + σW_t + Σ Y⁺ − Σ Y⁻` where both jump
//! laws are finite mixtures of Erlang-type components, possibly with complex
//! rates and coefficients in conjugate pairs. The refracted process removes an
//! extra drift `α` whenever it sits strictly below the level `b`.

use num_complex::Complex64;
use std::fmt;

/// Normalization tolerance for `Σ c_kj = 1`.
pub const EPS_NORMALIZATION: f64 = 1e-10;
/// Allowed dip below zero on the density screening grid.
pub const EPS_DENSITY: f64 = 1e-9;
/// Points on the density screening grid.
const DENSITY_GRID_POINTS: usize = 400;
/// Two rates closer than this (relative) count as duplicates.
const EPS_RATE_SEPARATION: f64 = 1e-12;
/// Imaginary parts below this (relative) count as real.
const EPS_IMAG: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpSide {
    Positive,
    Negative,
}

impl fmt::Display for JumpSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpSide::Positive => write!(f, "positive"),
            JumpSide::Negative => write!(f, "negative"),
        }
    }
}

/// One mixture component: a rate and its coefficients indexed by Erlang order.
///
/// `coeffs[j-1]` weights the order-`j` density `rate^j y^{j-1} e^{-rate·y}/(j-1)!`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTerm {
    pub rate: Complex64,
    pub coeffs: Vec<Complex64>,
}

/// A finite mixture of Erlang-type components; exactly the class of densities
/// on `(0, ∞)` whose Laplace transform is a rational function.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RationalJumpDensity {
    pub terms: Vec<JumpTerm>,
}

impl RationalJumpDensity {
    pub fn empty() -> Self {
        RationalJumpDensity { terms: Vec::new() }
    }

    /// Single exponential density with the given rate.
    pub fn exponential(rate: f64) -> Self {
        RationalJumpDensity {
            terms: vec![JumpTerm {
                rate: Complex64::new(rate, 0.0),
                coeffs: vec![Complex64::new(1.0, 0.0)],
            }],
        }
    }

    /// Mixture of exponentials from `(rate, weight)` pairs.
    pub fn hyper_exponential(components: &[(f64, f64)]) -> Self {
        RationalJumpDensity {
            terms: components
                .iter()
                .map(|&(r, w)| JumpTerm {
                    rate: Complex64::new(r, 0.0),
                    coeffs: vec![Complex64::new(w, 0.0)],
                })
                .collect(),
        }
    }

    /// Erlang density of the given order (all mass on the top order).
    pub fn erlang(rate: f64, order: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); order];
        coeffs[order - 1] = Complex64::new(1.0, 0.0);
        RationalJumpDensity {
            terms: vec![JumpTerm {
                rate: Complex64::new(rate, 0.0),
                coeffs,
            }],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Σ m_k`: total Erlang order across components.
    pub fn total_order(&self) -> usize {
        self.terms.iter().map(|t| t.coeffs.len()).sum()
    }

    /// `Σ_k Σ_j c_kj`; equals the total mass of the density.
    pub fn coefficient_sum(&self) -> Complex64 {
        self.terms
            .iter()
            .flat_map(|t| t.coeffs.iter())
            .sum::<Complex64>()
    }

    /// Evaluates the (complex-valued) density at `y > 0`.
    pub fn density(&self, y: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for term in &self.terms {
            let e = (-term.rate * y).exp();
            let mut pow = term.rate; // rate^j
            let mut ypow = 1.0; // y^{j-1}
            let mut fact = 1.0; // (j-1)!
            for (idx, c) in term.coeffs.iter().enumerate() {
                let j = idx + 1;
                if j > 1 {
                    pow *= term.rate;
                    ypow *= y;
                    fact *= (j - 1) as f64;
                }
                acc += c * pow * ypow / fact * e;
            }
        }
        acc
    }

    /// Smallest real part among the rates, if any.
    pub fn min_rate_real_part(&self) -> Option<f64> {
        self.terms
            .iter()
            .map(|t| t.rate.re)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    /// True when every rate is real and every coefficient real and nonnegative,
    /// so the mixture can be sampled directly.
    pub fn is_direct_mixture(&self) -> bool {
        self.terms.iter().all(|t| {
            t.rate.im == 0.0
                && t.rate.re > 0.0
                && t.coeffs.iter().all(|c| c.im == 0.0 && c.re >= 0.0)
        })
    }

    /// Drops trailing zero coefficients and all-zero terms.
    fn canonicalize(&mut self) {
        for term in &mut self.terms {
            while term
                .coeffs
                .last()
                .is_some_and(|c| c.re == 0.0 && c.im == 0.0)
            {
                term.coeffs.pop();
            }
        }
        self.terms.retain(|t| !t.coeffs.is_empty());
    }
}

/// The driving jump diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    pub mu: f64,
    pub sigma: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub jumps_up: RationalJumpDensity,
    pub jumps_down: RationalJumpDensity,
}

impl LevyModel {
    /// Pure diffusion, no jumps.
    pub fn brownian(mu: f64, sigma: f64) -> Self {
        LevyModel {
            mu,
            sigma,
            lambda_plus: 0.0,
            lambda_minus: 0.0,
            jumps_up: RationalJumpDensity::empty(),
            jumps_down: RationalJumpDensity::empty(),
        }
    }
}

/// The refracted process `dU = dX − α·1{U<b} dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefractedModel {
    pub base: LevyModel,
    pub alpha: f64,
    pub b: f64,
}

/// The four drift/volatility classes that select formula branches everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    PositiveVolatility,
    ZeroVolMuAboveAlpha,
    ZeroVolMuBetweenZeroAndAlpha,
    ZeroVolMuNegative,
}

impl Regime {
    pub fn classify(sigma: f64, mu: f64, alpha: f64) -> Regime {
        if sigma > 0.0 {
            Regime::PositiveVolatility
        } else if mu > alpha {
            Regime::ZeroVolMuAboveAlpha
        } else if mu >= 0.0 {
            Regime::ZeroVolMuBetweenZeroAndAlpha
        } else {
            Regime::ZeroVolMuNegative
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::PositiveVolatility => "positive-volatility",
            Regime::ZeroVolMuAboveAlpha => "zero-vol-mu-above-alpha",
            Regime::ZeroVolMuBetweenZeroAndAlpha => "zero-vol-mu-between-zero-and-alpha",
            Regime::ZeroVolMuNegative => "zero-vol-mu-negative",
        };
        write!(f, "{s}")
    }
}

/// Point-mass indicators for the extremes at an exponential time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtomFlags {
    /// `Ȳ_{e(q)}` has an atom at 0 (σ=0 and μ ≤ α).
    pub y_has_atom_at_sup: bool,
    /// `X̲_{e(q)}` has an atom at 0 (σ=0 and μ ≥ 0).
    pub x_has_atom_at_inf: bool,
}

/// Every invariant a raw parameter bundle can break.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateRate {
        side: JumpSide,
        rate: Complex64,
    },
    SmallestRateNotReal {
        side: JumpSide,
        rate: Complex64,
    },
    CoefficientsNotNormalized {
        side: JumpSide,
        sum: Complex64,
    },
    ConjugatePairViolation {
        side: JumpSide,
        rate: Complex64,
    },
    NegativeDensity {
        side: JumpSide,
        y: f64,
        value: f64,
    },
    NegativeIntensity {
        side: JumpSide,
        value: f64,
    },
    NegativeVolatility {
        value: f64,
    },
    NegativeRefractionDrift {
        value: f64,
    },
    EmptyDensityWithPositiveIntensity {
        side: JumpSide,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateRate { side, rate } => {
                write!(f, "{side} side: duplicate rate {rate}")
            }
            Violation::SmallestRateNotReal { side, rate } => write!(
                f,
                "{side} side: rate of smallest real part ({rate}) must be real, positive, and strictly smallest"
            ),
            Violation::CoefficientsNotNormalized { side, sum } => {
                write!(f, "{side} side: coefficients sum to {sum}, expected 1")
            }
            Violation::ConjugatePairViolation { side, rate } => write!(
                f,
                "{side} side: complex rate {rate} lacks a conjugate partner with conjugate coefficients"
            ),
            Violation::NegativeDensity { side, y, value } => {
                write!(f, "{side} side: density({y}) = {value} < -{EPS_DENSITY}")
            }
            Violation::NegativeIntensity { side, value } => {
                write!(f, "{side} side: jump intensity {value} < 0")
            }
            Violation::NegativeVolatility { value } => write!(f, "volatility {value} < 0"),
            Violation::NegativeRefractionDrift { value } => {
                write!(f, "refraction drift {value} < 0")
            }
            Violation::EmptyDensityWithPositiveIntensity { side } => {
                write!(f, "{side} side: positive intensity with no density terms")
            }
        }
    }
}

/// Complete list of violated invariants; validation never aborts mid-list.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

/// A parameter bundle that passed every check; immutable afterwards and safe to share.
#[derive(Debug, Clone)]
pub struct ValidatedModel {
    model: RefractedModel,
    regime: Regime,
}

impl ValidatedModel {
    pub fn base(&self) -> &LevyModel {
        &self.model.base
    }

    pub fn alpha(&self) -> f64 {
        self.model.alpha
    }

    /// The refraction level `b`.
    pub fn level(&self) -> f64 {
        self.model.b
    }

    pub fn model(&self) -> &RefractedModel {
        &self.model
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn atom_flags(&self) -> AtomFlags {
        let m = &self.model;
        AtomFlags {
            y_has_atom_at_sup: m.base.sigma == 0.0 && m.base.mu <= m.alpha,
            x_has_atom_at_inf: m.base.sigma == 0.0 && m.base.mu >= 0.0,
        }
    }

    /// Same model with a different refraction level; no revalidation needed
    /// since `b` is unconstrained.
    pub fn with_level(&self, b: f64) -> ValidatedModel {
        let mut out = self.clone();
        out.model.b = b;
        out
    }
}

/// Checks every invariant and either returns the validated model or the full
/// list of violations.
pub fn validate(mut model: RefractedModel) -> Result<ValidatedModel, ValidationReport> {
    model.base.jumps_up.canonicalize();
    model.base.jumps_down.canonicalize();

    let mut violations = Vec::new();
    if model.base.sigma < 0.0 {
        violations.push(Violation::NegativeVolatility {
            value: model.base.sigma,
        });
    }
    if model.alpha < 0.0 {
        violations.push(Violation::NegativeRefractionDrift { value: model.alpha });
    }
    if model.base.lambda_plus < 0.0 {
        violations.push(Violation::NegativeIntensity {
            side: JumpSide::Positive,
            value: model.base.lambda_plus,
        });
    }
    if model.base.lambda_minus < 0.0 {
        violations.push(Violation::NegativeIntensity {
            side: JumpSide::Negative,
            value: model.base.lambda_minus,
        });
    }
    check_side(
        JumpSide::Positive,
        &model.base.jumps_up,
        model.base.lambda_plus,
        &mut violations,
    );
    check_side(
        JumpSide::Negative,
        &model.base.jumps_down,
        model.base.lambda_minus,
        &mut violations,
    );

    if violations.is_empty() {
        let regime = Regime::classify(model.base.sigma, model.base.mu, model.alpha);
        Ok(ValidatedModel { model, regime })
    } else {
        Err(ValidationReport { violations })
    }
}

fn check_side(
    side: JumpSide,
    density: &RationalJumpDensity,
    intensity: f64,
    violations: &mut Vec<Violation>,
) {
    if density.is_empty() {
        if intensity > 0.0 {
            violations.push(Violation::EmptyDensityWithPositiveIntensity { side });
        }
        return;
    }

    // Pairwise-distinct rates.
    for (i, a) in density.terms.iter().enumerate() {
        for b in density.terms.iter().skip(i + 1) {
            let scale = 1.0 + a.rate.norm().max(b.rate.norm());
            if (a.rate - b.rate).norm() <= EPS_RATE_SEPARATION * scale {
                violations.push(Violation::DuplicateRate {
                    side,
                    rate: a.rate,
                });
            }
        }
    }

    // Smallest real part must belong to a real, strictly positive, strictly
    // smallest rate.
    let min_re = density.min_rate_real_part().unwrap();
    let holders: Vec<&JumpTerm> = density
        .terms
        .iter()
        .filter(|t| t.rate.re <= min_re + EPS_RATE_SEPARATION * (1.0 + min_re.abs()))
        .collect();
    let smallest_ok = holders.len() == 1
        && holders[0].rate.im.abs() <= EPS_IMAG * (1.0 + min_re.abs())
        && min_re > 0.0;
    if !smallest_ok {
        violations.push(Violation::SmallestRateNotReal {
            side,
            rate: holders[0].rate,
        });
    }

    // Conjugate pairing: complex rates pair with conjugate rates and conjugate
    // coefficients; real rates carry real coefficients.
    for term in &density.terms {
        let scale = 1.0 + term.rate.norm();
        if term.rate.im.abs() <= EPS_IMAG * scale {
            if term
                .coeffs
                .iter()
                .any(|c| c.im.abs() > EPS_IMAG * (1.0 + c.norm()))
            {
                violations.push(Violation::ConjugatePairViolation {
                    side,
                    rate: term.rate,
                });
            }
            continue;
        }
        let partner = density.terms.iter().find(|t| {
            (t.rate - term.rate.conj()).norm() <= 1e-9 * scale
        });
        let paired = partner.is_some_and(|p| {
            p.coeffs.len() == term.coeffs.len()
                && p.coeffs
                    .iter()
                    .zip(term.coeffs.iter())
                    .all(|(a, b)| (a - b.conj()).norm() <= 1e-9 * (1.0 + b.norm()))
        });
        if !paired {
            violations.push(Violation::ConjugatePairViolation {
                side,
                rate: term.rate,
            });
        }
    }

    // Normalization.
    let sum = density.coefficient_sum();
    if (sum - Complex64::new(1.0, 0.0)).norm() > EPS_NORMALIZATION {
        violations.push(Violation::CoefficientsNotNormalized { side, sum });
    }

    // Nonnegativity screen on (0, 20/min Re(rate)].
    if min_re > 0.0 {
        let y_max = 20.0 / min_re;
        let h = y_max / DENSITY_GRID_POINTS as f64;
        for i in 1..=DENSITY_GRID_POINTS {
            let y = i as f64 * h;
            let v = density.density(y);
            if v.re < -EPS_DENSITY {
                violations.push(Violation::NegativeDensity {
                    side,
                    y,
                    value: v.re,
                });
                break;
            }
            if v.im.abs() > 1e-10 * (1.0 + v.norm()) {
                violations.push(Violation::ConjugatePairViolation {
                    side,
                    rate: Complex64::new(f64::NAN, f64::NAN),
                });
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_a() -> RefractedModel {
        RefractedModel {
            base: LevyModel {
                mu: 0.1,
                sigma: 0.2,
                lambda_plus: 1.0,
                lambda_minus: 1.0,
                jumps_up: RationalJumpDensity::exponential(2.0),
                jumps_down: RationalJumpDensity::exponential(3.0),
            },
            alpha: 0.05,
            b: 0.0,
        }
    }

    #[test]
    fn one_sided_exponential_is_valid() {
        let m = RefractedModel {
            base: LevyModel {
                mu: 0.0,
                sigma: 0.0,
                lambda_plus: 1.0,
                lambda_minus: 0.0,
                jumps_up: RationalJumpDensity::exponential(2.0),
                jumps_down: RationalJumpDensity::empty(),
            },
            alpha: 0.0,
            b: 0.0,
        };
        assert!(validate(m).is_ok());
    }

    #[test]
    fn duplicate_rate_is_rejected() {
        let mut m = model_a();
        m.base.jumps_up = RationalJumpDensity::hyper_exponential(&[(2.0, 0.5), (2.0, 0.5)]);
        let report = validate(m).unwrap_err();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::DuplicateRate { .. })));
    }

    #[test]
    fn unnormalized_coefficients_are_rejected() {
        let mut m = model_a();
        m.base.jumps_up = RationalJumpDensity::hyper_exponential(&[(2.0, 0.7), (4.0, 0.4)]);
        let report = validate(m).unwrap_err();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::CoefficientsNotNormalized { .. })));
    }

    #[test]
    fn validation_collects_all_violations() {
        let mut m = model_a();
        m.base.sigma = -1.0;
        m.base.lambda_minus = -0.5;
        m.base.jumps_up = RationalJumpDensity::hyper_exponential(&[(2.0, 0.7), (4.0, 0.4)]);
        let report = validate(m).unwrap_err();
        assert!(report.violations.len() >= 3);
    }

    #[test]
    fn unpaired_complex_rate_is_rejected() {
        let mut m = model_a();
        m.base.jumps_up = RationalJumpDensity {
            terms: vec![
                JumpTerm {
                    rate: Complex64::new(1.0, 0.0),
                    coeffs: vec![Complex64::new(0.6, 0.0)],
                },
                JumpTerm {
                    rate: Complex64::new(2.0, 1.0),
                    coeffs: vec![Complex64::new(0.4, 0.0)],
                },
            ],
        };
        let report = validate(m).unwrap_err();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::ConjugatePairViolation { .. })));
    }

    #[test]
    fn regime_classification_matches_predicates() {
        assert_eq!(
            Regime::classify(0.2, 0.1, 0.05),
            Regime::PositiveVolatility
        );
        assert_eq!(
            Regime::classify(0.0, 0.1, 0.05),
            Regime::ZeroVolMuAboveAlpha
        );
        assert_eq!(
            Regime::classify(0.0, 0.03, 0.05),
            Regime::ZeroVolMuBetweenZeroAndAlpha
        );
        assert_eq!(Regime::classify(0.0, -0.1, 0.05), Regime::ZeroVolMuNegative);
    }

    #[test]
    fn atom_flags_follow_the_regime() {
        let v = validate(model_a()).unwrap();
        let f = v.atom_flags();
        assert!(!f.y_has_atom_at_sup && !f.x_has_atom_at_inf);

        let mut m = model_a();
        m.base.sigma = 0.0;
        m.base.mu = 0.03;
        let v = validate(m).unwrap();
        let f = v.atom_flags();
        assert!(f.y_has_atom_at_sup && f.x_has_atom_at_inf);
        assert_eq!(v.regime(), Regime::ZeroVolMuBetweenZeroAndAlpha);

        let mut m = model_a();
        m.base.sigma = 0.0;
        m.base.mu = -0.1;
        let v = validate(m).unwrap();
        let f = v.atom_flags();
        assert!(f.y_has_atom_at_sup && !f.x_has_atom_at_inf);
        assert_eq!(v.regime(), Regime::ZeroVolMuNegative);
    }

    #[test]
    fn density_mass_closed_form_and_realness() {
        // Mixture with a conjugate pair: p(y) = c1·η1 e^{-η1 y} + 2Re(c2 (a+ib) e^{-(a+ib) y}).
        let d = RationalJumpDensity {
            terms: vec![
                JumpTerm {
                    rate: Complex64::new(1.0, 0.0),
                    coeffs: vec![Complex64::new(0.8, 0.0)],
                },
                JumpTerm {
                    rate: Complex64::new(2.0, 0.7),
                    coeffs: vec![Complex64::new(0.1, 0.02)],
                },
                JumpTerm {
                    rate: Complex64::new(2.0, -0.7),
                    coeffs: vec![Complex64::new(0.1, -0.02)],
                },
            ],
        };
        assert!((d.coefficient_sum() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        for i in 1..=64 {
            let y = i as f64 * 0.2;
            assert!(d.density(y).im.abs() < 1e-12);
        }
        let m = RefractedModel {
            base: LevyModel {
                mu: 0.0,
                sigma: 0.1,
                lambda_plus: 1.0,
                lambda_minus: 0.0,
                jumps_up: d,
                jumps_down: RationalJumpDensity::empty(),
            },
            alpha: 0.0,
            b: 0.0,
        };
        assert!(validate(m).is_ok());
    }

    #[test]
    fn erlang_component_total_order() {
        let d = RationalJumpDensity::erlang(2.0, 3);
        assert_eq!(d.total_order(), 3);
        assert!((d.coefficient_sum().re - 1.0).abs() < 1e-15);
    }
}

//! One-sided exit problems: the discounted law of the position at first
//! passage, split into a creeping atom and Erlang-type overshoot terms.
//!
//! The transform of the exit law at level offset `x` is a rational function of
//! the overshoot variable whose only poles sit at the jump rates; its
//! coefficients are extracted by Cauchy residues around each rate, and the
//! atom is whatever is left at a far evaluation point.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ValidatedModel;
use crate::numerics::cauchy;
use crate::wienerhopf::{self, factorial, realize, WienerHopfFactor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitDirection {
    /// X crossing below a level `x ≤ 0` (started at 0).
    DownX,
    /// Y crossing above a level `x ≥ 0` (started at 0).
    UpY,
}

/// One overshoot component `coeff · rate^j |y|^{j-1} e^{-rate·|y|}/(j-1)!`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvershootTerm {
    pub rate: Complex64,
    pub order: usize,
    pub coeff: Complex64,
}

/// Discounted first-passage law: creeping atom plus overshoot expansion.
#[derive(Debug, Clone)]
pub struct ExitLaw {
    pub direction: ExitDirection,
    pub q: f64,
    /// Level offset: `≥ 0` for `UpY`, `≤ 0` for `DownX`.
    pub offset: f64,
    /// `C₀(x)` or `D₀(x)`: discounted mass of hitting the level exactly.
    pub atom: f64,
    pub overshoot_terms: Vec<OvershootTerm>,
}

impl ExitLaw {
    /// `E[e^{-qτ}]`: the transform at `s = 0`.
    pub fn discounted_mass(&self) -> f64 {
        self.transform(0.0)
    }

    /// `atom + Σ coeff·(rate/(rate+s))^j` = `E[e^{-qτ - s·|overshoot|}]`.
    pub fn transform(&self, s: f64) -> f64 {
        let mut v = Complex64::new(self.atom, 0.0);
        for t in &self.overshoot_terms {
            v += t.coeff * (t.rate / (t.rate + s)).powi(t.order as i32);
        }
        debug_assert!(v.im.abs() < 1e-9 * (1.0 + v.norm()));
        v.re
    }

    /// Discounted overshoot density at distance `y > 0` past the level.
    pub fn overshoot_density(&self, y: f64) -> f64 {
        let mut v = Complex64::new(0.0, 0.0);
        for t in &self.overshoot_terms {
            v += t.coeff * t.rate.powi(t.order as i32) * y.powi((t.order - 1) as i32)
                / factorial(t.order - 1)
                * (-t.rate * y).exp();
        }
        debug_assert!(v.im.abs() < 1e-9 * (1.0 + v.norm()));
        v.re
    }
}

/// Law of `Y` first passing (strictly) above `x ≥ 0` from 0, killed at rate `q`.
pub fn exit_up_law(m: &ValidatedModel, q: f64, x: f64) -> Result<ExitLaw> {
    assert!(x >= 0.0, "exit_up_law requires x >= 0");
    assert!(q > 0.0, "exit_up_law requires q > 0");
    let factor = wienerhopf::pos_factor(m, q)?;
    let (atom, overshoot_terms) = extract(&factor, x)?;
    Ok(ExitLaw {
        direction: ExitDirection::UpY,
        q,
        offset: x,
        atom,
        overshoot_terms,
    })
}

/// Law of `X` first passing below `x ≤ 0` from 0, killed at rate `q`.
pub fn exit_down_law(m: &ValidatedModel, q: f64, x: f64) -> Result<ExitLaw> {
    assert!(x <= 0.0, "exit_down_law requires x <= 0");
    assert!(q > 0.0, "exit_down_law requires q > 0");
    let factor = wienerhopf::neg_factor(m, q)?;
    let (atom, overshoot_terms) = extract(&factor, -x)?;
    Ok(ExitLaw {
        direction: ExitDirection::DownX,
        q,
        offset: x,
        atom,
        overshoot_terms,
    })
}

/// Right side of the Pecherskii–Rogozin identity for the upward problem:
/// `(ψ⁺(θ)/ψ⁺(s) − 1)/(s−θ)`.
pub fn pr_rhs(m: &ValidatedModel, q: f64, theta: f64, s: f64) -> Result<f64> {
    assert!(theta > 0.0 && s >= 0.0);
    let sep = (theta - s).abs();
    if sep <= 1e-8 * (1.0 + theta.abs() + s.abs()) {
        return Err(Error::DegenerateArguments { separation: sep });
    }
    let f = wienerhopf::pos_factor(m, q)?;
    pr_value(&f, theta, s)
}

/// Mirror for the downward problem, built on `ψ⁻`.
pub fn pr_rhs_down(m: &ValidatedModel, q: f64, theta: f64, s: f64) -> Result<f64> {
    assert!(theta > 0.0 && s >= 0.0);
    let sep = (theta - s).abs();
    if sep <= 1e-8 * (1.0 + theta.abs() + s.abs()) {
        return Err(Error::DegenerateArguments { separation: sep });
    }
    let f = wienerhopf::neg_factor(m, q)?;
    pr_value(&f, theta, s)
}

fn pr_value(f: &WienerHopfFactor, theta: f64, s: f64) -> Result<f64> {
    let a = f.eval(Complex64::new(theta, 0.0))?;
    let b = f.eval(Complex64::new(s, 0.0))?;
    realize((a / b - 1.0) / (s - theta), "Pecherskii-Rogozin right side")
}

/// Shared coefficient extraction. `u = |x|` is the distance to the level; the
/// transform of the exit law equals `T(s)/ψ(s)` where `T` collects the
/// Leibniz-expanded derivative terms of the factor's partial fractions.
fn extract(factor: &WienerHopfFactor, u: f64) -> Result<(f64, Vec<OvershootTerm>)> {
    // Group partial fractions by root and build the weights
    // w_{k,d} = Σ_{j≥d} coeff_{k,j} u^{j-d}/(j-d)!.
    struct Group {
        root: Complex64,
        weights: Vec<Complex64>, // index d-1
    }
    let mut groups: Vec<Group> = Vec::new();
    for term in factor.partial_fraction_terms() {
        let g = match groups.iter_mut().find(|g| g.root == term.root) {
            Some(g) => g,
            None => {
                groups.push(Group {
                    root: term.root,
                    weights: Vec::new(),
                });
                groups.last_mut().unwrap()
            }
        };
        if g.weights.len() < term.order {
            g.weights.resize(term.order, Complex64::new(0.0, 0.0));
        }
        for d in 1..=term.order {
            g.weights[d - 1] +=
                term.coeff * u.powi((term.order - d) as i32) / factorial(term.order - d);
        }
    }
    for g in &mut groups {
        let decay = (-g.root * u).exp();
        for w in &mut g.weights {
            *w *= decay;
        }
    }

    let t_of = |s: Complex64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for g in &groups {
            let base = (s + g.root).inv();
            let mut p = Complex64::new(1.0, 0.0);
            for w in &g.weights {
                p *= base;
                acc += w * p;
            }
        }
        acc
    };
    let r_of = |s: Complex64| t_of(s) / factor.eval_product_unchecked(s);

    let rates = factor.rates().to_vec();
    let mut terms = Vec::new();
    let mut extracted: Vec<(Complex64, Vec<Complex64>)> = Vec::new();
    for (k, (rate, order)) in rates.iter().enumerate() {
        let center = -rate;
        let sep = rates
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, (r, _))| (r - rate).norm())
            .fold(f64::INFINITY, f64::min);
        let mut radius = if sep.is_finite() {
            (1e-2 * sep).min(1.0)
        } else {
            0.1 * (1.0 + rate.norm())
        };
        // Keep the contour clear of the factor's root points, where the
        // integrand is analytic but numerically extreme.
        for r in factor.roots() {
            let d = (-r.value - center).norm();
            if (d - radius).abs() < 1e-6 * (1.0 + radius) {
                radius *= 0.73;
            }
        }
        // h(s) = R(s)(s+rate)^{order}, with the cancelling factor removed
        // analytically from the product form.
        let h = |s: Complex64| -> Complex64 {
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, (r, o)) in rates.iter().enumerate() {
                if j != k {
                    denom *= ((s + r) / r).powi(*o as i32);
                }
            }
            for r in factor.roots() {
                denom *= (r.value / (s + r.value)).powi(r.multiplicity as i32);
            }
            t_of(s) * rate.powi(*order as i32) / denom
        };
        let taylor = cauchy::taylor_coeffs(h, center, radius, *order);
        let mut coeffs_by_d = vec![Complex64::new(0.0, 0.0); *order];
        for (l, t) in taylor.iter().enumerate() {
            let d = *order - l;
            if !t.re.is_finite() || !t.im.is_finite() {
                return Err(Error::ResidueExtractionFailure {
                    pole: center,
                    detail: "non-finite Taylor coefficient".into(),
                });
            }
            coeffs_by_d[d - 1] = *t;
        }
        for d in 1..=*order {
            terms.push(OvershootTerm {
                rate: *rate,
                order: d,
                coeff: coeffs_by_d[d - 1] / rate.powi(d as i32),
            });
        }
        extracted.push((*rate, coeffs_by_d));
    }

    // The atom is the constant left after removing every pole term; two far
    // evaluation points must agree on it.
    let far = 1.0
        + 2.0
            * rates
                .iter()
                .map(|(r, _)| r.norm())
                .chain(factor.roots().iter().map(|r| r.value.norm()))
                .fold(0.0f64, f64::max);
    let atom_at = |s0: Complex64| -> Complex64 {
        let mut v = r_of(s0);
        for (rate, coeffs) in &extracted {
            for (d_idx, c) in coeffs.iter().enumerate() {
                v -= c / (s0 + rate).powi((d_idx + 1) as i32);
            }
        }
        v
    };
    let a0 = atom_at(Complex64::new(far, 0.0));
    let a1 = atom_at(Complex64::new(1.7 * far + 0.3, 0.0));
    if (a0 - a1).norm() > 1e-8 * (1.0 + a0.norm()) {
        return Err(Error::ResidueExtractionFailure {
            pole: Complex64::new(far, 0.0),
            detail: format!("atom estimates disagree: {a0} vs {a1}"),
        });
    }
    let atom = realize(a0, "exit-law atom")?;
    // Clamp the numerical zero: regimes without creeping produce |atom| ~ 1e-14.
    let atom = if atom.abs() < 1e-12 { 0.0 } else { atom };

    Ok((atom, terms))
}

//! Characteristic exponents ψ, ψ̃ and the root sets of `ψ̃(z)=q` / `ψ(z)=q`.
//!
//! All root work happens in the Laplace-exponent variable `w = -iz`, where the
//! equation becomes `φ_c(w) = q` for a rational-plus-quadratic function with
//! drift `c`. Roots in the right half-plane (as `w`) are the β's of the
//! drift-reduced process; roots of the undrifted exponent in the left
//! half-plane give the γ's after negation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{JumpTerm, LevyModel, ValidatedModel};
use crate::numerics::aberth;
use crate::numerics::poly::Poly;

/// Residual bound for accepted roots: `|ψ̃(root)−q| ≤ tol·(1+|q|)`.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-9;
/// Cluster radius for multiplicity detection, relative.
const CLUSTER_TOL: f64 = 1e-7;
/// Relative distance below which an evaluation point counts as a pole.
const POLE_EPS: f64 = 1e-9;

fn active_up(model: &LevyModel) -> &[JumpTerm] {
    if model.lambda_plus > 0.0 {
        &model.jumps_up.terms
    } else {
        &[]
    }
}

fn active_down(model: &LevyModel) -> &[JumpTerm] {
    if model.lambda_minus > 0.0 {
        &model.jumps_down.terms
    } else {
        &[]
    }
}

/// `Σ m_k` over the active positive side.
pub(crate) fn total_up_order(model: &LevyModel) -> usize {
    active_up(model).iter().map(|t| t.coeffs.len()).sum()
}

/// `Σ n_k` over the active negative side.
pub(crate) fn total_down_order(model: &LevyModel) -> usize {
    active_down(model).iter().map(|t| t.coeffs.len()).sum()
}

/// Laplace exponent `φ_c(w) = ln E[e^{w X_1}]` with drift `c` in place of μ.
pub(crate) fn laplace_exponent(model: &LevyModel, drift: f64, w: Complex64) -> Complex64 {
    let mut v = 0.5 * model.sigma * model.sigma * w * w + drift * w;
    if model.lambda_plus > 0.0 {
        let mut acc = Complex64::new(-1.0, 0.0);
        for t in active_up(model) {
            let base = t.rate / (t.rate - w);
            let mut p = Complex64::new(1.0, 0.0);
            for c in &t.coeffs {
                p *= base;
                acc += c * p;
            }
        }
        v += model.lambda_plus * acc;
    }
    if model.lambda_minus > 0.0 {
        let mut acc = Complex64::new(-1.0, 0.0);
        for t in active_down(model) {
            let base = t.rate / (t.rate + w);
            let mut p = Complex64::new(1.0, 0.0);
            for d in &t.coeffs {
                p *= base;
                acc += d * p;
            }
        }
        v += model.lambda_minus * acc;
    }
    v
}

/// `order`-th derivative of the Laplace exponent, `order ≥ 1`.
pub(crate) fn laplace_exponent_derivative(
    model: &LevyModel,
    drift: f64,
    w: Complex64,
    order: usize,
) -> Complex64 {
    let mut v = match order {
        1 => model.sigma * model.sigma * w + drift,
        2 => Complex64::new(model.sigma * model.sigma, 0.0),
        _ => Complex64::new(0.0, 0.0),
    };
    let rising = |j: usize| -> f64 {
        // j (j+1) ... (j+order-1)
        (0..order).map(|l| (j + l) as f64).product()
    };
    if model.lambda_plus > 0.0 {
        for t in active_up(model) {
            let mut rate_pow = Complex64::new(1.0, 0.0);
            for (idx, c) in t.coeffs.iter().enumerate() {
                let j = idx + 1;
                rate_pow *= t.rate;
                let denom = (t.rate - w).powi((j + order) as i32);
                v += model.lambda_plus * c * rate_pow * rising(j) / denom;
            }
        }
    }
    if model.lambda_minus > 0.0 {
        let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
        for t in active_down(model) {
            let mut rate_pow = Complex64::new(1.0, 0.0);
            for (idx, d) in t.coeffs.iter().enumerate() {
                let j = idx + 1;
                rate_pow *= t.rate;
                let denom = (t.rate + w).powi((j + order) as i32);
                v += model.lambda_minus * sign * d * rate_pow * rising(j) / denom;
            }
        }
    }
    v
}

/// Characteristic exponent `ψ(z) = ln E[e^{izX_1}]`.
pub fn psi(model: &LevyModel, z: Complex64) -> Result<Complex64> {
    let w = Complex64::new(0.0, 1.0) * z;
    check_poles(model, w)?;
    Ok(laplace_exponent(model, model.mu, w))
}

/// `ψ̃(z) = ψ(z) − iαz`, the exponent of the drift-reduced process.
pub fn psi_tilde(model: &LevyModel, alpha: f64, z: Complex64) -> Result<Complex64> {
    let w = Complex64::new(0.0, 1.0) * z;
    check_poles(model, w)?;
    Ok(laplace_exponent(model, model.mu - alpha, w))
}

fn check_poles(model: &LevyModel, w: Complex64) -> Result<()> {
    for p in exponent_poles(model) {
        if (w - p).norm() <= POLE_EPS * (1.0 + p.norm()) {
            return Err(Error::PoleEvaluation {
                pole: p,
                eps: POLE_EPS * (1.0 + p.norm()),
            });
        }
    }
    Ok(())
}

/// Poles of the exponent in the `w` plane: `η_k` and `-ϑ_k`.
fn exponent_poles(model: &LevyModel) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = active_up(model).iter().map(|t| t.rate).collect();
    out.extend(active_down(model).iter().map(|t| -t.rate));
    out
}

/// `(φ_c(w) − q) · Π(η_k−w)^{m_k} · Π(ϑ_k+w)^{n_k}` as a polynomial in `w`.
fn cleared_polynomial(model: &LevyModel, drift: f64, q: Complex64) -> Poly {
    let up = active_up(model);
    let down = active_down(model);
    let one = Complex64::new(1.0, 0.0);

    let mut a = Poly::one();
    for t in up {
        a = a.mul_linear_pow(t.rate, -one, t.coeffs.len());
    }
    let mut b = Poly::one();
    for t in down {
        b = b.mul_linear_pow(t.rate, one, t.coeffs.len());
    }

    let lam_sum = model.lambda_plus * (!up.is_empty() as i32 as f64)
        + model.lambda_minus * (!down.is_empty() as i32 as f64);
    let base = Poly::new(vec![
        -q - lam_sum,
        Complex64::new(drift, 0.0),
        Complex64::new(0.5 * model.sigma * model.sigma, 0.0),
    ]);
    let mut p = base.mul(&a).mul(&b);

    for (ki, t) in up.iter().enumerate() {
        let mk = t.coeffs.len();
        let mut a_other = Poly::one();
        for (kj, t2) in up.iter().enumerate() {
            if kj != ki {
                a_other = a_other.mul_linear_pow(t2.rate, -one, t2.coeffs.len());
            }
        }
        let mut rate_pow = one;
        for (idx, c) in t.coeffs.iter().enumerate() {
            let j = idx + 1;
            rate_pow *= t.rate;
            let rest = Poly::one().mul_linear_pow(t.rate, -one, mk - j);
            let term = rest
                .mul(&a_other)
                .mul(&b)
                .scale(model.lambda_plus * c * rate_pow);
            p = p.add(&term);
        }
    }
    for (ki, t) in down.iter().enumerate() {
        let nk = t.coeffs.len();
        let mut b_other = Poly::one();
        for (kj, t2) in down.iter().enumerate() {
            if kj != ki {
                b_other = b_other.mul_linear_pow(t2.rate, one, t2.coeffs.len());
            }
        }
        let mut rate_pow = one;
        for (idx, d) in t.coeffs.iter().enumerate() {
            let j = idx + 1;
            rate_pow *= t.rate;
            let rest = Poly::one().mul_linear_pow(t.rate, one, nk - j);
            let term = rest
                .mul(&b_other)
                .mul(&a)
                .scale(model.lambda_minus * d * rate_pow);
            p = p.add(&term);
        }
    }
    p
}

/// A distinct root with its multiplicity. For the β side the value is the
/// scalar `β` (the solution is `z = -iβ`); for the γ side it is `γ` (`z = iγ`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootSide {
    /// Roots of `ψ̃(z)=q` with `Im(z)<0`, reported as β with `Re(β)>0`.
    LowerBeta,
    /// Roots of `ψ(z)=q` with `Im(z)>0`, reported as γ with `Re(γ)>0`.
    UpperGamma,
}

/// All distinct roots on one side, ordered by increasing real part; the first
/// root is real and simple.
#[derive(Debug, Clone)]
pub struct RootSet {
    pub side: RootSide,
    pub q: f64,
    pub roots: Vec<Root>,
}

impl RootSet {
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    /// The leading real simple root (β₁ or γ₁).
    pub fn first(&self) -> f64 {
        self.roots[0].value.re
    }

    pub fn all_simple(&self) -> bool {
        self.roots.iter().all(|r| r.multiplicity == 1)
    }
}

/// Expected total β multiplicity.
pub fn expected_beta_count(m: &ValidatedModel) -> usize {
    let base = m.base();
    let sm = total_up_order(base);
    if base.sigma == 0.0 && base.mu <= m.alpha() {
        sm
    } else {
        1 + sm
    }
}

/// Expected total γ multiplicity.
pub fn expected_gamma_count(m: &ValidatedModel) -> usize {
    let base = m.base();
    let sn = total_down_order(base);
    if base.sigma == 0.0 && base.mu >= 0.0 {
        sn
    } else {
        1 + sn
    }
}

/// Solves `ψ̃(z)=q` in the lower half-plane and reports the β's.
pub fn roots_beta(m: &ValidatedModel, q: f64) -> Result<RootSet> {
    assert!(q > 0.0, "roots_beta requires q > 0");
    let base = m.base();
    let all = solve_exponent_roots(base, base.mu - m.alpha(), Complex64::new(q, 0.0))?;
    let picked: Vec<Root> = all.into_iter().filter(|r| r.value.re > 0.0).collect();
    assemble(RootSide::LowerBeta, q, picked, expected_beta_count(m), base, base.mu - m.alpha())
}

/// Solves `ψ(z)=q` in the upper half-plane and reports the γ's.
pub fn roots_gamma(m: &ValidatedModel, q: f64) -> Result<RootSet> {
    assert!(q > 0.0, "roots_gamma requires q > 0");
    let base = m.base();
    let all = solve_exponent_roots(base, base.mu, Complex64::new(q, 0.0))?;
    let picked: Vec<Root> = all
        .into_iter()
        .filter(|r| r.value.re < 0.0)
        .map(|r| Root {
            value: -r.value,
            multiplicity: r.multiplicity,
        })
        .collect();
    assemble(RootSide::UpperGamma, q, picked, expected_gamma_count(m), base, base.mu)
}

fn assemble(
    side: RootSide,
    q: f64,
    mut roots: Vec<Root>,
    expected: usize,
    model: &LevyModel,
    drift: f64,
) -> Result<RootSet> {
    let found: usize = roots.iter().map(|r| r.multiplicity).sum();
    if found != expected {
        return Err(Error::RootCountMismatch {
            found,
            expected,
            side: match side {
                RootSide::LowerBeta => "beta",
                RootSide::UpperGamma => "gamma",
            },
        });
    }
    roots.sort_by(|a, b| {
        (a.value.re, a.value.im)
            .partial_cmp(&(b.value.re, b.value.im))
            .unwrap()
    });
    if !roots.is_empty() {
        let first = &mut roots[0];
        let scale = 1.0 + first.value.norm();
        if first.value.im.abs() > 1e-8 * scale || first.multiplicity != 1 {
            return Err(Error::InvariantViolation(format!(
                "leading {side:?} root {} (multiplicity {}) is not real and simple",
                first.value, first.multiplicity
            )));
        }
        first.value = Complex64::new(first.value.re, 0.0);
    }
    // Residual certification against the uncleared exponent.
    let sign = match side {
        RootSide::LowerBeta => 1.0,
        RootSide::UpperGamma => -1.0,
    };
    for r in &roots {
        let w = sign * r.value;
        let residual = (laplace_exponent(model, drift, w) - q).norm();
        if r.multiplicity == 1 && residual > ROOT_RESIDUAL_TOL * (1.0 + q.abs()) {
            return Err(Error::NonConvergence { iterations: 0 });
        }
    }
    Ok(RootSet { side, q, roots })
}

/// Full root list of `φ_drift(w) = q` with multiplicities, both half-planes.
fn solve_exponent_roots(model: &LevyModel, drift: f64, q: Complex64) -> Result<Vec<Root>> {
    let poly = cleared_polynomial(model, drift, q);
    let raw = aberth::find_roots(&poly)?;
    let clusters = cluster_and_polish(model, drift, q, raw)?;
    Ok(clusters)
}

fn cluster_and_polish(
    model: &LevyModel,
    drift: f64,
    q: Complex64,
    raw: Vec<Complex64>,
) -> Result<Vec<Root>> {
    let poles = exponent_poles(model);
    let mut kept: Vec<Complex64> = raw
        .into_iter()
        .filter(|r| {
            poles
                .iter()
                .all(|p| (r - p).norm() > CLUSTER_TOL * (1.0 + p.norm()))
        })
        .collect();
    kept.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());

    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for r in kept {
        match clusters
            .iter_mut()
            .find(|(c, _)| (r - *c).norm() <= CLUSTER_TOL * (1.0 + c.norm()))
        {
            Some((c, n)) => {
                *c = (*c * (*n as f64) + r) / ((*n + 1) as f64);
                *n += 1;
            }
            None => clusters.push((r, 1)),
        }
    }

    // Two Newton polish steps on the uncleared exponent, simple roots only.
    for (c, n) in clusters.iter_mut() {
        if *n != 1 {
            continue;
        }
        for _ in 0..2 {
            let h = laplace_exponent(model, drift, *c) - q;
            let d = laplace_exponent_derivative(model, drift, *c, 1);
            if d.norm() == 0.0 {
                break;
            }
            let next = *c - h / d;
            let h_next = laplace_exponent(model, drift, next) - q;
            if h_next.norm() <= h.norm() {
                *c = next;
            } else {
                break;
            }
        }
    }

    // Snap near-real roots, then enforce exact conjugate pairing.
    for (c, _) in clusters.iter_mut() {
        if c.im.abs() <= 1e-9 * (1.0 + c.norm()) {
            *c = Complex64::new(c.re, 0.0);
        }
    }
    if q.im == 0.0 && model_is_real(model) {
        symmetrize_conjugates(&mut clusters)?;
    }

    Ok(clusters
        .into_iter()
        .map(|(value, multiplicity)| Root {
            value,
            multiplicity,
        })
        .collect())
}

fn model_is_real(model: &LevyModel) -> bool {
    // Validated models are real-valued by the conjugate-pair invariant; this
    // only gates symmetrization for raw internal calls.
    let real_side = |terms: &[JumpTerm]| {
        terms.iter().all(|t| {
            t.rate.im == 0.0
                || terms
                    .iter()
                    .any(|u| (u.rate - t.rate.conj()).norm() <= 1e-9 * (1.0 + t.rate.norm()))
        })
    };
    real_side(active_up(model)) && real_side(active_down(model))
}

fn symmetrize_conjugates(clusters: &mut [(Complex64, usize)]) -> Result<()> {
    let n = clusters.len();
    let mut done = vec![false; n];
    for i in 0..n {
        if done[i] || clusters[i].0.im == 0.0 {
            continue;
        }
        let zi = clusters[i].0;
        let partner = (0..n).find(|&j| {
            j != i
                && !done[j]
                && (clusters[j].0 - zi.conj()).norm() <= 1e-6 * (1.0 + zi.norm())
                && clusters[j].1 == clusters[i].1
        });
        match partner {
            Some(j) => {
                let avg = (zi + clusters[j].0.conj()) / 2.0;
                clusters[i].0 = avg;
                clusters[j].0 = avg.conj();
                done[i] = true;
                done[j] = true;
            }
            None => {
                return Err(Error::InvariantViolation(format!(
                    "complex root {zi} of a real model has no conjugate partner"
                )))
            }
        }
    }
    Ok(())
}

/// Root groups of `φ_drift(w)=q` for complex `q` with `Re(q)` unrestricted,
/// obtained by continuation from the real anchor `|q|`. Returns the groups
/// that start in the right/left half-planes at the anchor. All roots along the
/// path must stay simple and well separated.
pub(crate) fn tracked_exponent_roots(
    model: &LevyModel,
    drift: f64,
    q: Complex64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let anchor = q.norm().max(1e-8);
    let start = solve_exponent_roots(model, drift, Complex64::new(anchor, 0.0))?;
    if start.iter().any(|r| r.multiplicity != 1) {
        return Err(Error::ComplexRootTrackingFailed(
            "anchor configuration has multiple roots".into(),
        ));
    }
    let values: Vec<Complex64> = start.iter().map(|r| r.value).collect();
    let positive: Vec<bool> = values.iter().map(|v| v.re > 0.0).collect();

    'attempt: for steps in [8usize, 16, 32, 64, 128] {
        let mut current = values.clone();
        for s in 1..=steps {
            let t = s as f64 / steps as f64;
            let qt = Complex64::new(anchor, 0.0) * (1.0 - t) + q * t;
            let fresh = match solve_exponent_roots(model, drift, qt) {
                Ok(f) => f,
                Err(_) => continue 'attempt,
            };
            if fresh.iter().any(|r| r.multiplicity != 1) || fresh.len() != current.len() {
                continue 'attempt;
            }
            let sep = min_pairwise_distance(&current);
            let mut assigned = vec![usize::MAX; current.len()];
            let mut used = vec![false; fresh.len()];
            for (i, c) in current.iter().enumerate() {
                let mut best = usize::MAX;
                let mut best_d = f64::INFINITY;
                for (j, f) in fresh.iter().enumerate() {
                    let d = (f.value - c).norm();
                    if d < best_d {
                        best_d = d;
                        best = j;
                    }
                }
                if best == usize::MAX || used[best] || best_d > 0.4 * sep {
                    continue 'attempt;
                }
                used[best] = true;
                assigned[i] = best;
            }
            for (i, &j) in assigned.iter().enumerate() {
                current[i] = fresh[j].value;
            }
        }
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (v, &is_pos) in current.iter().zip(&positive) {
            if is_pos {
                pos.push(*v);
            } else {
                neg.push(*v);
            }
        }
        return Ok((pos, neg));
    }
    Err(Error::ComplexRootTrackingFailed(format!(
        "no stable continuation path from {anchor} to {q}"
    )))
}

fn min_pairwise_distance(values: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in values.iter().enumerate() {
        for b in values.iter().skip(i + 1) {
            best = best.min((a - b).norm());
        }
    }
    if best.is_finite() {
        best
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;

    #[test]
    fn psi_vanishes_at_zero() {
        let m = fixtures::model_a();
        let v = psi(m.base(), Complex64::new(0.0, 0.0)).unwrap();
        assert!(v.norm() < 1e-15);
        let vt = psi_tilde(m.base(), m.alpha(), Complex64::new(0.0, 0.0)).unwrap();
        assert!(vt.norm() < 1e-15);
    }

    #[test]
    fn psi_pure_diffusion_hand_value() {
        // -σ²z²/2 + izμ at z=1: -0.02 + 0.1i
        let m = fixtures::brownian_refracted();
        let v = psi(m.base(), Complex64::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, -0.02, max_relative = 1e-14);
        assert_relative_eq!(v.im, 0.1, max_relative = 1e-14);
    }

    #[test]
    fn psi_model_a_matches_high_precision_oracle() {
        // Frozen from an independent 60-digit evaluation of the exponent.
        let m = fixtures::model_a();
        let v = psi(m.base(), Complex64::new(1.0, -0.5)).unwrap();
        assert_relative_eq!(v.re, -0.24947024673439767668, max_relative = 1e-14);
        assert_relative_eq!(v.im, 0.50896952104499275088, max_relative = 1e-14);
    }

    #[test]
    fn psi_tilde_linear_shift() {
        let m = fixtures::model_a();
        // α=0 reduces to ψ on a grid.
        for k in 0..8 {
            let z = Complex64::new(0.3 * k as f64 - 1.0, 0.2 * k as f64 - 0.7);
            let a = psi(m.base(), z).unwrap();
            let b = psi_tilde(m.base(), 0.0, z).unwrap();
            assert!((a - b).norm() < 1e-15);
        }
        // ψ̃(z) − ψ(z) = −iαz: at z=2i the difference is +α·2 = 0.1.
        let z = Complex64::new(0.0, 2.0);
        let d = psi_tilde(m.base(), 0.05, z).unwrap() - psi(m.base(), z).unwrap();
        assert_relative_eq!(d.re, 0.1, max_relative = 1e-12);
        assert!(d.im.abs() < 1e-14);
    }

    #[test]
    fn pole_evaluation_is_rejected() {
        let m = fixtures::model_a();
        // z = -iη with η=2 puts iz right on the pole.
        let z = Complex64::new(0.0, -2.0);
        assert!(matches!(
            psi(m.base(), z),
            Err(Error::PoleEvaluation { .. })
        ));
    }

    #[test]
    fn brownian_roots_match_quadratic_closed_forms() {
        let m = fixtures::brownian_refracted();
        let rb = roots_beta(&m, 0.1).unwrap();
        assert_eq!(rb.total_multiplicity(), 1);
        assert_relative_eq!(rb.first(), 1.3117376914898995958, max_relative = 1e-13);
        let rg = roots_gamma(&m, 0.1).unwrap();
        assert_eq!(rg.total_multiplicity(), 1);
        assert_relative_eq!(rg.first(), 5.8541019662496845446, max_relative = 1e-13);
    }

    #[test]
    fn model_a_counts_and_values() {
        let m = fixtures::model_a();
        let rb = roots_beta(&m, 0.1).unwrap();
        assert_eq!(rb.total_multiplicity(), 2);
        assert_relative_eq!(rb.roots[0].value.re, 0.29503920345005248446, max_relative = 1e-12);
        assert_relative_eq!(rb.roots[1].value.re, 9.1519701870890675896, max_relative = 1e-12);
        let rg = roots_gamma(&m, 0.1).unwrap();
        assert_eq!(rg.total_multiplicity(), 2);
        assert_relative_eq!(rg.roots[0].value.re, 1.0277251982007084908, max_relative = 1e-12);
        assert_relative_eq!(rg.roots[1].value.re, 13.416223684506454053, max_relative = 1e-12);
    }

    #[test]
    fn zero_vol_counts_drop_by_one() {
        let m = fixtures::zero_vol_between();
        let rb = roots_beta(&m, 0.1).unwrap();
        assert_eq!(rb.total_multiplicity(), 1); // = Σ m_k
        assert_relative_eq!(rb.first(), 0.3485587037391853517, max_relative = 1e-12);
        let rg = roots_gamma(&m, 0.1).unwrap();
        assert_eq!(rg.total_multiplicity(), 1); // = Σ n_k
        assert_relative_eq!(rg.first(), 0.92084063678995302477, max_relative = 1e-12);
    }

    #[test]
    fn residuals_certified_against_exponent() {
        let m = fixtures::model_a();
        for &q in &[0.05, 0.1, 0.5, 2.0] {
            let rb = roots_beta(&m, q).unwrap();
            for r in &rb.roots {
                let z = Complex64::new(0.0, -1.0) * r.value; // z = -iβ
                let res = (psi_tilde(m.base(), m.alpha(), z).unwrap() - q).norm();
                assert!(res <= ROOT_RESIDUAL_TOL * (1.0 + q), "residual {res}");
            }
            let rg = roots_gamma(&m, q).unwrap();
            for r in &rg.roots {
                let z = Complex64::new(0.0, 1.0) * r.value; // z = iγ
                let res = (psi(m.base(), z).unwrap() - q).norm();
                assert!(res <= ROOT_RESIDUAL_TOL * (1.0 + q), "residual {res}");
            }
        }
    }

    #[test]
    fn beta1_is_increasing_in_q() {
        let m = fixtures::model_a();
        let mut prev = 0.0;
        for k in 1..=20 {
            let q = 0.05 * k as f64;
            let b1 = roots_beta(&m, q).unwrap().first();
            assert!(b1 > prev, "β₁ not increasing at q={q}");
            prev = b1;
        }
    }

    #[test]
    fn alpha_zero_sides_partition_psi_roots() {
        // With α=0 the β side and negated γ side together are the nonzero
        // roots of ψ(z)=q split by half-plane.
        let m = fixtures::model_a_alpha_zero();
        let q = 0.2;
        let rb = roots_beta(&m, q).unwrap();
        let rg = roots_gamma(&m, q).unwrap();
        let all = solve_exponent_roots(m.base(), m.base().mu, Complex64::new(q, 0.0)).unwrap();
        assert_eq!(
            all.len(),
            rb.roots.len() + rg.roots.len(),
            "side split loses roots"
        );
        for r in &rb.roots {
            assert!(all.iter().any(|a| (a.value - r.value).norm() < 1e-9));
        }
        for r in &rg.roots {
            assert!(all.iter().any(|a| (a.value + r.value).norm() < 1e-9));
        }
    }

    #[test]
    fn conjugate_symmetry_for_complex_rate_model() {
        let m = fixtures::complex_rate_model();
        let rb = roots_beta(&m, 0.3).unwrap();
        for r in &rb.roots {
            if r.value.im != 0.0 {
                assert!(
                    rb.roots
                        .iter()
                        .any(|s| (s.value - r.value.conj()).norm() < 1e-12),
                    "unpaired root {}",
                    r.value
                );
            }
        }
        let rg = roots_gamma(&m, 0.3).unwrap();
        assert_eq!(rg.total_multiplicity(), expected_gamma_count(&m));
    }

    #[test]
    fn erlang_orders_enter_the_counts() {
        let m = fixtures::erlang_model();
        // up side Erlang order 3, down side order 2, σ>0: 1+3 and 1+2.
        assert_eq!(roots_beta(&m, 0.4).unwrap().total_multiplicity(), 4);
        assert_eq!(roots_gamma(&m, 0.4).unwrap().total_multiplicity(), 3);
    }

    #[test]
    fn tracked_roots_continue_to_complex_q() {
        let m = fixtures::model_a();
        let q = Complex64::new(0.08, 0.2);
        let (pos, neg) =
            tracked_exponent_roots(m.base(), m.base().mu - m.alpha(), q).unwrap();
        assert_eq!(pos.len() + neg.len(), 4);
        // Each tracked root still solves the exponent equation.
        for w in pos.iter().chain(neg.iter()) {
            let res = (laplace_exponent(m.base(), m.base().mu - m.alpha(), *w) - q).norm();
            assert!(res < 1e-8, "residual {res}");
        }
    }
}

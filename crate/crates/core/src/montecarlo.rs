//! Independent simulation oracle for the refracted SDE.
//!
//! Paths are exact where the analytics are most delicate: with σ=0 the drift
//! segments are piecewise linear and the crossing times of the level are
//! solved analytically, so the boundary atoms are not polluted by
//! discretization. With σ>0 the diffusion is Euler-stepped between exact
//! exponential jump epochs. Occupation uses the strict inequality `U < b`;
//! time spent exactly at the level does not count.
//!
//! Streams are keyed by `(seed, path index)`, so estimates are bit-identical
//! regardless of thread count; aggregation is an ordered reduction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{JumpTerm, ValidatedModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HorizonPolicy {
    /// Run every path to the fixed time `T`.
    Fixed(f64),
    /// Kill each path at an independent `e(q)` clock sampled per path.
    Exponential(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    /// Euler step for the diffusive part; ignored when σ=0.
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub horizon: HorizonPolicy,
}

impl SimConfig {
    fn check(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.n_paths == 0 {
            return Err(Error::InvariantViolation(
                "simulation needs dt > 0 and at least one path".into(),
            ));
        }
        match self.horizon {
            HorizonPolicy::Fixed(t) if t > 0.0 => Ok(()),
            HorizonPolicy::Exponential(q) if q > 0.0 => Ok(()),
            _ => Err(Error::InvariantViolation(
                "horizon must be a positive time or a positive rate".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub mean: f64,
    /// One standard error.
    pub std_error: f64,
    pub n_paths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    /// Time spent strictly below the level up to the horizon.
    pub occupation: f64,
    pub terminal: f64,
}

struct MixtureSampler {
    /// `(cumulative weight, rate, order)`.
    entries: Vec<(f64, f64, usize)>,
}

impl MixtureSampler {
    fn new(terms: &[JumpTerm]) -> Self {
        let mut entries = Vec::new();
        let mut cum = 0.0;
        for t in terms {
            for (idx, c) in t.coeffs.iter().enumerate() {
                if c.re > 0.0 {
                    cum += c.re;
                    entries.push((cum, t.rate.re, idx + 1));
                }
            }
        }
        // Normalized up to 1e-10 by validation; rescale so the last bin is 1.
        if let Some(last) = entries.last().map(|e| e.0) {
            for e in &mut entries {
                e.0 /= last;
            }
        }
        MixtureSampler { entries }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.gen();
        let (_, rate, order) = *self
            .entries
            .iter()
            .find(|(c, _, _)| u <= *c)
            .unwrap_or_else(|| self.entries.last().unwrap());
        let mut y = 0.0;
        for _ in 0..order {
            let e: f64 = rng.sample(Exp1);
            y += e / rate;
        }
        y
    }
}

fn require_sampleable(m: &ValidatedModel) -> Result<()> {
    let base = m.base();
    if base.lambda_plus > 0.0 && !base.jumps_up.is_direct_mixture() {
        return Err(Error::UnsampleableDensity(
            "positive-side mixture has complex or signed components".into(),
        ));
    }
    if base.lambda_minus > 0.0 && !base.jumps_down.is_direct_mixture() {
        return Err(Error::UnsampleableDensity(
            "negative-side mixture has complex or signed components".into(),
        ));
    }
    Ok(())
}

fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Ordered (path-index) aggregation with compensated summation.
fn aggregate(values: &[f64]) -> SimEstimate {
    let n = values.len();
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    let mean = (sum + comp) / n as f64;
    let mut var = 0.0;
    for &v in values {
        var += (v - mean) * (v - mean);
    }
    let std_error = if n > 1 {
        (var / ((n - 1) as f64 * n as f64)).sqrt()
    } else {
        0.0
    };
    SimEstimate {
        mean,
        std_error,
        n_paths: n,
    }
}

/// Simulates the refracted process from `x0` and returns per-path occupation
/// time below the level and the terminal position.
pub fn simulate_occupation(
    m: &ValidatedModel,
    x0: f64,
    cfg: &SimConfig,
) -> Result<Vec<PathOutcome>> {
    cfg.check()?;
    require_sampleable(m)?;
    let base = m.base();
    let up = if base.lambda_plus > 0.0 {
        Some(MixtureSampler::new(&base.jumps_up.terms))
    } else {
        None
    };
    let down = if base.lambda_minus > 0.0 {
        Some(MixtureSampler::new(&base.jumps_down.terms))
    } else {
        None
    };
    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            run_refracted_path(m, x0, cfg, up.as_ref(), down.as_ref(), &mut rng)
        })
        .collect();
    Ok(outcomes)
}

fn run_refracted_path(
    m: &ValidatedModel,
    x0: f64,
    cfg: &SimConfig,
    up: Option<&MixtureSampler>,
    down: Option<&MixtureSampler>,
    rng: &mut ChaCha8Rng,
) -> PathOutcome {
    let base = m.base();
    let (mu, sigma, alpha, b) = (base.mu, base.sigma, m.alpha(), m.level());
    let horizon = match cfg.horizon {
        HorizonPolicy::Fixed(t) => t,
        HorizonPolicy::Exponential(q) => {
            let e: f64 = rng.sample(Exp1);
            e / q
        }
    };
    let lambda_up = if up.is_some() { base.lambda_plus } else { 0.0 };
    let lambda_down = if down.is_some() { base.lambda_minus } else { 0.0 };
    let total_rate = lambda_up + lambda_down;

    let mut u = x0;
    let mut t = 0.0;
    let mut occ = 0.0;
    loop {
        let next_jump = if total_rate > 0.0 {
            let e: f64 = rng.sample(Exp1);
            t + e / total_rate
        } else {
            f64::INFINITY
        };
        let seg_end = next_jump.min(horizon);
        if sigma > 0.0 {
            while t < seg_end {
                let step = cfg.dt.min(seg_end - t);
                let below = u < b;
                if below {
                    occ += step;
                }
                let drift = if below { mu - alpha } else { mu };
                let z: f64 = rng.sample(StandardNormal);
                u += drift * step + sigma * step.sqrt() * z;
                t += step;
            }
        } else {
            advance_exact(&mut u, seg_end - t, &mut occ, mu, alpha, b);
            t = seg_end;
        }
        if next_jump >= horizon {
            break;
        }
        let up_jump = total_rate * rng.gen::<f64>() < lambda_up;
        if up_jump {
            u += up.unwrap().sample(rng);
        } else {
            u -= down.unwrap().sample(rng);
        }
    }
    PathOutcome {
        occupation: occ,
        terminal: u,
    }
}

/// Exact piecewise-linear drift advance for σ=0, with analytic crossings of
/// the level. At `u == b` the indicator is 0, so the slope is `μ` unless
/// `μ < 0`, which immediately re-enters the refracted region.
fn advance_exact(u: &mut f64, mut rem: f64, occ: &mut f64, mu: f64, alpha: f64, b: f64) {
    while rem > 0.0 {
        if *u < b || (*u == b && mu < 0.0) {
            let slope = mu - alpha;
            if slope > 0.0 {
                let hit = (b - *u) / slope;
                if hit <= rem {
                    *occ += hit;
                    *u = b;
                    rem -= hit;
                    continue;
                }
            }
            *occ += rem;
            *u += slope * rem;
            return;
        }
        let slope = mu;
        if slope < 0.0 && *u > b {
            let hit = (b - *u) / slope;
            if hit <= rem {
                *u = b;
                rem -= hit;
                continue;
            }
        }
        *u += slope * rem;
        return;
    }
}

/// Estimate of `V(x) = E_x[e^{-p·occupation}]`; the horizon must be the
/// exponential clock `e(q)`.
pub fn estimate_v(m: &ValidatedModel, x0: f64, p: f64, cfg: &SimConfig) -> Result<SimEstimate> {
    assert!(
        matches!(cfg.horizon, HorizonPolicy::Exponential(_)),
        "estimate_v needs an exponential horizon"
    );
    assert!(p >= 0.0);
    let outcomes = simulate_occupation(m, x0, cfg)?;
    let values: Vec<f64> = outcomes.iter().map(|o| (-p * o.occupation).exp()).collect();
    Ok(aggregate(&values))
}

/// Mean occupation time below the level up to the horizon.
pub fn estimate_occupation(m: &ValidatedModel, x0: f64, cfg: &SimConfig) -> Result<SimEstimate> {
    let outcomes = simulate_occupation(m, x0, cfg)?;
    let values: Vec<f64> = outcomes.iter().map(|o| o.occupation).collect();
    Ok(aggregate(&values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitTarget {
    /// `Y` (drift μ−α) crossing above `level ≥ 0` from 0.
    UpY,
    /// `X` (drift μ) crossing below `level ≤ 0` from 0.
    DownX,
}

/// Estimate of the discounted passage transform
/// `E[e^{-qτ - s·|overshoot|}·1{τ<∞}]` for the undeflected Lévy path.
pub fn estimate_exit(
    m: &ValidatedModel,
    q: f64,
    level: f64,
    target: ExitTarget,
    s: f64,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    cfg.check()?;
    require_sampleable(m)?;
    assert!(q > 0.0);
    let base = m.base();
    let drift = match target {
        ExitTarget::UpY => {
            assert!(level >= 0.0);
            base.mu - m.alpha()
        }
        ExitTarget::DownX => {
            assert!(level <= 0.0);
            base.mu
        }
    };
    // Instantaneous boundary: regular starts cross immediately.
    if level == 0.0 {
        let regular = match target {
            ExitTarget::UpY => base.sigma > 0.0 || drift > 0.0,
            ExitTarget::DownX => base.sigma > 0.0 || drift < 0.0,
        };
        if regular {
            return Ok(SimEstimate {
                mean: 1.0,
                std_error: 0.0,
                n_paths: cfg.n_paths,
            });
        }
    }
    let up = if base.lambda_plus > 0.0 {
        Some(MixtureSampler::new(&base.jumps_up.terms))
    } else {
        None
    };
    let down = if base.lambda_minus > 0.0 {
        Some(MixtureSampler::new(&base.jumps_down.terms))
    } else {
        None
    };
    let t_cap = 21.0 / q;
    let values: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            run_exit_path(
                base.sigma,
                drift,
                base.lambda_plus * up.is_some() as u8 as f64,
                base.lambda_minus * down.is_some() as u8 as f64,
                up.as_ref(),
                down.as_ref(),
                level,
                target,
                q,
                s,
                t_cap,
                cfg.dt,
                &mut rng,
            )
        })
        .collect();
    Ok(aggregate(&values))
}

#[allow(clippy::too_many_arguments)]
fn run_exit_path(
    sigma: f64,
    drift: f64,
    lambda_up: f64,
    lambda_down: f64,
    up: Option<&MixtureSampler>,
    down: Option<&MixtureSampler>,
    level: f64,
    target: ExitTarget,
    q: f64,
    s: f64,
    t_cap: f64,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let total_rate = lambda_up + lambda_down;
    let crossed = |u: f64| match target {
        ExitTarget::UpY => u >= level,
        ExitTarget::DownX => u <= level,
    };
    let overshoot = |u: f64| match target {
        ExitTarget::UpY => u - level,
        ExitTarget::DownX => level - u,
    };
    let mut u = 0.0f64;
    let mut t = 0.0f64;
    loop {
        let next_jump = if total_rate > 0.0 {
            let e: f64 = rng.sample(Exp1);
            t + e / total_rate
        } else {
            f64::INFINITY
        };
        let seg_end = next_jump.min(t_cap);
        if sigma > 0.0 {
            while t < seg_end {
                let step = dt.min(seg_end - t);
                let z: f64 = rng.sample(StandardNormal);
                u += drift * step + sigma * step.sqrt() * z;
                t += step;
                if crossed(u) {
                    return (-q * t - s * overshoot(u)).exp();
                }
            }
        } else {
            // Drift crossing is a creep: overshoot 0, exact time.
            let toward = match target {
                ExitTarget::UpY => drift > 0.0 && u < level,
                ExitTarget::DownX => drift < 0.0 && u > level,
            };
            if toward {
                let hit = (level - u) / drift;
                if t + hit <= seg_end {
                    return (-q * (t + hit)).exp();
                }
            }
            u += drift * (seg_end - t);
            t = seg_end;
        }
        if next_jump >= t_cap {
            return 0.0;
        }
        let up_jump = total_rate * rng.gen::<f64>() < lambda_up;
        if up_jump {
            u += up.unwrap().sample(rng);
        } else {
            u -= down.unwrap().sample(rng);
        }
        if crossed(u) {
            return (-q * t - s * overshoot(u)).exp();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{validate, LevyModel, RefractedModel};

    fn cfg(n: usize, horizon: HorizonPolicy) -> SimConfig {
        SimConfig {
            dt: 1e-3,
            n_paths: n,
            seed: 0x5eed,
            horizon,
        }
    }

    #[test]
    fn identical_seeds_give_bit_identical_estimates() {
        let m = fixtures::model_a();
        let c = cfg(400, HorizonPolicy::Exponential(0.5));
        let a = estimate_v(&m, -0.2, 0.3, &c).unwrap();
        let b = estimate_v(&m, -0.2, 0.3, &c).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn complex_mixture_is_rejected() {
        let m = fixtures::complex_rate_model();
        let c = cfg(10, HorizonPolicy::Exponential(0.5));
        assert!(matches!(
            estimate_v(&m, 0.0, 0.1, &c),
            Err(Error::UnsampleableDensity(_))
        ));
    }

    #[test]
    fn p_zero_is_exactly_one() {
        let m = fixtures::model_a();
        let c = cfg(200, HorizonPolicy::Exponential(0.5));
        let e = estimate_v(&m, 0.0, 0.0, &c).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn drift_only_paths_are_exact() {
        // No jumps, no volatility, upward drift above the level: never below.
        let m = validate(RefractedModel {
            base: LevyModel::brownian(0.1, 0.0),
            alpha: 0.0,
            b: 0.0,
        })
        .unwrap();
        let c = cfg(50, HorizonPolicy::Fixed(3.0));
        for o in simulate_occupation(&m, 0.5, &c).unwrap() {
            assert_eq!(o.occupation, 0.0);
            assert!((o.terminal - (0.5 + 0.3)).abs() < 1e-12);
        }
        // Starting below with the refracted slope still negative: below forever.
        let m = validate(RefractedModel {
            base: LevyModel::brownian(-0.1, 0.0),
            alpha: 0.05,
            b: 0.0,
        })
        .unwrap();
        for o in simulate_occupation(&m, -0.5, &c).unwrap() {
            assert_eq!(o.occupation, 3.0);
        }
    }

    #[test]
    fn refraction_kink_is_crossed_exactly() {
        // σ=0, μ>α: from below, the path reaches b at (b-x)/ (μ-α) and then
        // moves with slope μ.
        let m = validate(RefractedModel {
            base: LevyModel::brownian(0.2, 0.0),
            alpha: 0.05,
            b: 0.0,
        })
        .unwrap();
        let c = cfg(10, HorizonPolicy::Fixed(5.0));
        let hit = 0.3 / 0.15;
        for o in simulate_occupation(&m, -0.3, &c).unwrap() {
            assert!((o.occupation - hit).abs() < 1e-12);
            assert!((o.terminal - 0.2 * (5.0 - hit)).abs() < 1e-12);
        }
    }

    #[test]
    fn parked_at_level_counts_as_not_below() {
        // σ=0, μ=0, α>0: starting exactly at b the path stays there; the
        // strict inequality accrues nothing.
        let m = validate(RefractedModel {
            base: LevyModel::brownian(0.0, 0.0),
            alpha: 0.05,
            b: 0.0,
        })
        .unwrap();
        let c = cfg(10, HorizonPolicy::Fixed(2.0));
        for o in simulate_occupation(&m, 0.0, &c).unwrap() {
            assert_eq!(o.occupation, 0.0);
            assert_eq!(o.terminal, 0.0);
        }
    }

    #[test]
    fn symmetric_brownian_occupation_mean() {
        // E[∫_0^{e(1)} 1{W<0}] = 1/2 by symmetry.
        let m = validate(RefractedModel {
            base: LevyModel::brownian(0.0, 1.0),
            alpha: 0.0,
            b: 0.0,
        })
        .unwrap();
        let c = cfg(20_000, HorizonPolicy::Exponential(1.0));
        let e = estimate_occupation(&m, 0.0, &c).unwrap();
        assert!(
            (e.mean - 0.5).abs() <= 3.0 * e.std_error,
            "mean {} se {}",
            e.mean,
            e.std_error
        );
    }

    #[test]
    fn far_below_the_level_v_approaches_its_floor() {
        let m = fixtures::model_a();
        let (p, q) = (0.3, 0.5);
        let c = cfg(4_000, HorizonPolicy::Exponential(q));
        let e = estimate_v(&m, -60.0, p, &c).unwrap();
        assert!((e.mean - q / (p + q)).abs() <= 3.0 * e.std_error + 1e-6);
    }

    #[test]
    fn zero_vol_distribution_atom_visible_in_simulation() {
        // q·E[occupation] jumps across x=b by minus the distribution atom.
        let m = fixtures::zero_vol_between();
        let q = 0.5;
        let atom = crate::occupation::distribution_atom(&m, q).unwrap();
        assert!(atom < 0.0);
        let c = SimConfig {
            dt: 1e-3,
            n_paths: 300_000,
            seed: 7,
            horizon: HorizonPolicy::Exponential(q),
        };
        let at_level = estimate_occupation(&m, 0.0, &c).unwrap();
        let below = estimate_occupation(&m, -1e-9, &c).unwrap();
        let jump = q * (at_level.mean - below.mean);
        let se = q * (at_level.std_error.hypot(below.std_error));
        assert!(
            (jump - atom).abs() <= 3.0 * se,
            "jump {jump} vs atom {atom} (3se {})",
            3.0 * se
        );
    }

    #[test]
    fn instantaneous_exit_at_the_boundary() {
        let m = fixtures::model_a();
        let c = cfg(100, HorizonPolicy::Fixed(1.0));
        let e = estimate_exit(&m, 0.3, 0.0, ExitTarget::UpY, 0.0, &c).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn brownian_downward_passage_matches_closed_form() {
        let m = fixtures::brownian_refracted();
        let q = 0.1;
        let g1: f64 = 5.8541019662496845446;
        let c = SimConfig {
            dt: 2.5e-4,
            n_paths: 20_000,
            seed: 11,
            horizon: HorizonPolicy::Fixed(1.0), // ignored by estimate_exit
        };
        let e = estimate_exit(&m, q, -0.5, ExitTarget::DownX, 0.0, &c).unwrap();
        let want = (-0.5 * g1).exp();
        assert!(
            (e.mean - want).abs() <= 3.0 * e.std_error + 2e-3,
            "mean {} vs {} (se {})",
            e.mean,
            want,
            e.std_error
        );
    }
}

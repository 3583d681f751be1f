//! Power-law pressures p(r) = r^γ, internal energies h(r) = r^γ/(γ-1) and
//! their Bregman remainders.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Adiabatic exponent of one species.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PressureLaw {
    gamma: f64,
}

/// Which exponent hypothesis of the stability theorem a law satisfies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// γ ≥ 2 and 1 < α < d/2 + 1.
    CaseI,
    /// 2 - (α-1)/d ≤ γ < 2 and 1 < α ≤ d/2 + 1.
    CaseII,
    Outside,
}

fn check_density(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::param("r", format!("density {r} is negative or non-finite")))
    }
}

fn check_reference(rbar: f64) -> Result<()> {
    if rbar > 0.0 && rbar.is_finite() {
        Ok(())
    } else {
        Err(Error::param("r_bar", format!("reference density {rbar} is not positive")))
    }
}

impl PressureLaw {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 1.0 && gamma.is_finite() {
            Ok(Self { gamma })
        } else {
            Err(Error::param("gamma", format!("{gamma} must exceed 1")))
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn regime(&self, alpha: f64, dim: usize) -> Regime {
        let d = dim as f64;
        let g = self.gamma;
        if g >= 2.0 && alpha > 1.0 && alpha < d / 2.0 + 1.0 {
            Regime::CaseI
        } else if g < 2.0 && g >= 2.0 - (alpha - 1.0) / d && alpha > 1.0 && alpha <= d / 2.0 + 1.0 {
            Regime::CaseII
        } else {
            Regime::Outside
        }
    }

    /// Whether γ ≥ 2d/(d+α-1), needed for the interaction terms of a weak
    /// solution to be defined.
    pub fn interaction_admissible(&self, alpha: f64, dim: usize) -> bool {
        let d = dim as f64;
        self.gamma >= 2.0 * d / (d + alpha - 1.0)
    }

    /// p(r) without argument checks, for hot loops on validated data.
    #[inline]
    pub fn p(&self, r: f64) -> f64 {
        if self.gamma == 2.0 {
            r * r
        } else {
            r.powf(self.gamma)
        }
    }

    /// p'(r).
    #[inline]
    pub fn dp(&self, r: f64) -> f64 {
        if self.gamma == 2.0 {
            2.0 * r
        } else {
            self.gamma * r.powf(self.gamma - 1.0)
        }
    }

    /// h(r) = p(r)/(γ-1).
    #[inline]
    pub fn h(&self, r: f64) -> f64 {
        self.p(r) / (self.gamma - 1.0)
    }

    /// h'(r) = γ r^{γ-1}/(γ-1).
    #[inline]
    pub fn dh(&self, r: f64) -> f64 {
        if self.gamma == 2.0 {
            2.0 * r
        } else {
            self.gamma / (self.gamma - 1.0) * r.powf(self.gamma - 1.0)
        }
    }

    /// p(r|r̄) for r ≥ 0 and r̄ > 0, evaluated without cancellation.
    #[inline]
    pub fn p_rel(&self, r: f64, rbar: f64) -> f64 {
        let g = self.gamma;
        if g == 2.0 {
            let d = r - rbar;
            return d * d;
        }
        let x = r / rbar;
        let delta = x - 1.0;
        let phi = if delta.abs() < 1e-2 {
            // x^γ - 1 - γδ as a binomial series in δ
            let mut term = g * (g - 1.0) / 2.0 * delta * delta;
            let mut acc = term;
            for k in 3..12 {
                term *= (g - (k as f64 - 1.0)) / k as f64 * delta;
                acc += term;
            }
            acc
        } else {
            (g * delta.ln_1p()).exp_m1() - g * delta
        };
        (self.p(rbar) * phi).max(0.0)
    }

    /// h(r|r̄) = p(r|r̄)/(γ-1).
    #[inline]
    pub fn h_rel(&self, r: f64, rbar: f64) -> f64 {
        self.p_rel(r, rbar) / (self.gamma - 1.0)
    }

    pub fn pressure(&self, r: f64) -> Result<f64> {
        check_density(r)?;
        Ok(self.p(r))
    }

    pub fn internal_energy(&self, r: f64) -> Result<f64> {
        check_density(r)?;
        Ok(self.h(r))
    }

    pub fn rel_internal(&self, r: f64, rbar: f64) -> Result<f64> {
        check_density(r)?;
        check_reference(rbar)?;
        Ok(self.h_rel(r, rbar))
    }

    pub fn rel_pressure(&self, r: f64, rbar: f64) -> Result<f64> {
        check_density(r)?;
        check_reference(rbar)?;
        Ok(self.p_rel(r, rbar))
    }

    pub fn sound_speed(&self, r: f64) -> Result<f64> {
        check_density(r)?;
        Ok(self.dp(r).sqrt())
    }
}

/// Empirical constants of the lower bounds on h(r|r̄).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub gamma: f64,
    pub r_bar_min: f64,
    pub r_bar_max: f64,
    /// Split point between the quadratic and the power-law region.
    pub split: f64,
    /// inf h(r|r̄)/|r-r̄|² over r ∈ [0, split].
    pub quadratic_inf: f64,
    /// inf h(r|r̄)/|r-r̄|^γ over r > split.
    pub power_inf: f64,
    /// inf h(r|r̄)/|r-r̄|² over all sampled r.
    pub global_quadratic_inf: f64,
    pub samples_quadratic: usize,
    pub samples_power: usize,
}

/// Samples (r, r̄) with r̄ ∈ [δ̄, M̄] and reports the infima of the two ratios
/// bounding h(r|r̄) from below. The split point defaults to M̄ + 1.
pub fn lemma_lower_bound_check(
    law: &PressureLaw,
    r_bar_range: (f64, f64),
    samples: usize,
    split: Option<f64>,
    seed: u64,
) -> Result<LowerBoundReport> {
    let (lo, hi) = r_bar_range;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::Degenerate(format!("reference range [{lo}, {hi}]")));
    }
    if samples < 1000 {
        return Err(Error::param("samples", format!("{samples} is below 1000")));
    }
    let split = split.unwrap_or(hi + 1.0);
    if split <= hi {
        return Err(Error::param("split", format!("{split} must exceed {hi}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q_inf = f64::INFINITY;
    let mut p_inf = f64::INFINITY;
    let mut all_inf = f64::INFINITY;
    let (mut nq, mut np) = (0, 0);
    let g = law.gamma();
    for k in 0..samples {
        let rbar = rng.random_range(lo..=hi);
        // half the draws inside [0, split], half in (split, 10 split]
        let r = if k % 2 == 0 {
            rng.random_range(0.0..=split)
        } else {
            split + rng.random_range(0.0..=9.0 * split)
        };
        let d = (r - rbar).abs();
        if d == 0.0 {
            continue;
        }
        let hrel = law.h_rel(r, rbar);
        let quad = hrel / (d * d);
        all_inf = all_inf.min(quad);
        if r <= split {
            q_inf = q_inf.min(quad);
            nq += 1;
        } else {
            p_inf = p_inf.min(hrel / d.powf(g));
            np += 1;
        }
    }
    Ok(LowerBoundReport {
        gamma: g,
        r_bar_min: lo,
        r_bar_max: hi,
        split,
        quadratic_inf: q_inf,
        power_inf: p_inf,
        global_quadratic_inf: all_inf,
        samples_quadratic: nq,
        samples_power: np,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pressure_values() {
        let l2 = PressureLaw::new(2.0).unwrap();
        assert_eq!(l2.pressure(3.0).unwrap(), 9.0);
        assert_eq!(l2.pressure(0.0).unwrap(), 0.0);
        let l14 = PressureLaw::new(1.4).unwrap();
        let oracle = (1.4 * 2f64.ln()).exp();
        assert!((l14.pressure(2.0).unwrap() - oracle).abs() < 1e-14 * oracle);
        assert!(l2.pressure(-1.0).is_err());
        assert!(PressureLaw::new(1.0).is_err());
    }

    #[test]
    fn internal_energy_values() {
        assert_eq!(PressureLaw::new(2.0).unwrap().internal_energy(3.0).unwrap(), 9.0);
        assert!((PressureLaw::new(3.0).unwrap().internal_energy(2.0).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(PressureLaw::new(3.0).unwrap().internal_energy(0.0).unwrap(), 0.0);
    }

    #[test]
    fn bregman_values() {
        let l2 = PressureLaw::new(2.0).unwrap();
        assert_eq!(l2.rel_internal(3.0, 1.0).unwrap(), 4.0);
        assert_eq!(l2.rel_pressure(3.0, 1.0).unwrap(), 4.0);
        assert_eq!(l2.rel_internal(1.7, 1.7).unwrap(), 0.0);
        let l15 = PressureLaw::new(1.5).unwrap();
        // 2·4^1.5 - 2 - 3·(4-1)
        assert!((l15.rel_internal(4.0, 1.0).unwrap() - 5.0).abs() < 1e-13);
        let l3 = PressureLaw::new(3.0).unwrap();
        assert!((l3.rel_pressure(2.0, 1.0).unwrap() - 4.0).abs() < 1e-13);
        assert!(l3.rel_internal(1.0, 0.0).is_err());
        assert!(l3.rel_internal(-1.0, 1.0).is_err());
    }

    #[test]
    fn bregman_matches_naive_formula_away_from_cancellation() {
        for &g in &[1.5, 1.8, 3.0] {
            let l = PressureLaw::new(g).unwrap();
            for &(r, rb) in &[(0.0, 1.0), (0.3, 1.2), (2.5, 0.7), (1.005, 1.0)] {
                let naive = l.h(r) - l.h(rb) - l.dh(rb) * (r - rb);
                assert!((l.h_rel(r, rb) - naive).abs() < 1e-12 * (1.0 + naive.abs()));
            }
        }
    }

    #[test]
    fn sound_speeds() {
        assert_eq!(PressureLaw::new(2.0).unwrap().sound_speed(0.0).unwrap(), 0.0);
        assert!((PressureLaw::new(2.0).unwrap().sound_speed(1.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((PressureLaw::new(3.0).unwrap().sound_speed(2.0).unwrap() - 12f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn regimes() {
        let l2 = PressureLaw::new(2.0).unwrap();
        assert_eq!(l2.regime(1.5, 2), Regime::CaseI);
        assert_eq!(PressureLaw::new(1.8).unwrap().regime(1.6, 2), Regime::CaseII);
        assert_eq!(PressureLaw::new(1.5).unwrap().regime(1.2, 2), Regime::Outside);
    }

    #[test]
    fn lower_bound_report() {
        let r = lemma_lower_bound_check(&PressureLaw::new(2.0).unwrap(), (0.5, 2.0), 10_000, None, 1).unwrap();
        assert_eq!(r.quadratic_inf, 1.0);
        assert_eq!(r.split, 3.0);
        let r = lemma_lower_bound_check(&PressureLaw::new(1.8).unwrap(), (0.5, 2.0), 10_000, Some(3.0), 1).unwrap();
        assert!(r.quadratic_inf > 0.0 && r.power_inf > 0.0);
        // dense scan oracle on a 1e-3 grid
        let l = PressureLaw::new(1.8).unwrap();
        let mut q = f64::INFINITY;
        for a in 0..=150 {
            let rb = 0.5 + 0.01 * a as f64;
            for b in 0..=3000 {
                let x = 1e-3 * b as f64;
                if (x - rb).abs() > 1e-9 {
                    q = q.min(l.h_rel(x, rb) / (x - rb).powi(2));
                }
            }
        }
        assert!(r.quadratic_inf >= q * (1.0 - 1e-6));
        assert!(r.quadratic_inf <= q * 1.05);
        assert!(lemma_lower_bound_check(&l, (2.0, 1.0), 10_000, None, 1).is_err());
    }

    proptest! {
        #[test]
        fn bregman_nonnegative(r in 0.0..10.0f64, rb in 0.01..10.0f64, gi in 0usize..3) {
            let g = [1.5, 2.0, 3.0][gi];
            let l = PressureLaw::new(g).unwrap();
            let v = l.h_rel(r, rb);
            prop_assert!(v >= 0.0);
            if r != rb {
                prop_assert!(v > 0.0);
            }
        }

        #[test]
        fn second_derivative_relation(r in 0.1..5.0f64, g in 1.1..4.0f64) {
            let l = PressureLaw::new(g).unwrap();
            let e = 1e-4 * r;
            let h2 = (l.h(r + e) - 2.0 * l.h(r) + l.h(r - e)) / (e * e);
            let lhs = r * h2;
            let rhs = l.dp(r);
            prop_assert!((lhs - rhs).abs() <= 1e-6 * rhs);
        }

        #[test]
        fn quadratic_bound_for_large_gamma(r in 0.0..50.0f64, rb in 0.1..3.0f64, g in 2.0..4.0f64) {
            let l = PressureLaw::new(g).unwrap();
            let d = r - rb;
            prop_assume!(d.abs() > 1e-6);
            // for γ ≥ 2 the quadratic ratio is bounded below by min(1, r̄^{γ-2}) γ/2
            let c = (g / 2.0) * rb.powf(g - 2.0).min(1.0) * 0.5;
            prop_assert!(l.h_rel(r, rb) >= c * d * d * (1.0 - 1e-9));
        }
    }
}

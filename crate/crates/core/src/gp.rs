//! Closed-form high-SNR allocation.
//!
//! With the outage approximation `f_K ~ A_K prod P_k^{-m}` and the budget
//! `sum_k A_{k-1} P_k prod_{l<k} P_l^{-m} <= 1`, power allocation is a
//! geometric program with as many dual variables as terms plus one, so its
//! dual has a unique feasible point and the optimum is explicit.

use crate::allocation::{AllocationPolicy, ApproxCoefficients};
use crate::error::{invalid, Result};
use crate::harq::HarqConfig;
use crate::policy::PolicyKind;

#[derive(Debug, Clone, PartialEq)]
pub struct GpSolution {
    pub m: f64,
    /// Dual variables `delta_1 .. delta_{K+1}`.
    pub deltas: Vec<f64>,
    /// `lambda(delta) = sum_{i >= 2} delta_i = (m+1)^K - 1`.
    pub lambda_star: f64,
    pub powers: Vec<f64>,
    /// Approximate outage at the optimum.
    pub f_k: f64,
    pub ln_f_k: f64,
    pub diversity: f64,
}

impl GpSolution {
    pub fn policy(&self) -> AllocationPolicy {
        AllocationPolicy {
            powers: self.powers.clone(),
        }
    }
}

/// `delta_1 = 1`, `delta_i = m (m+1)^{K+1-i}` for `i = 2..=K+1`.
pub fn optimal_deltas(m: f64, rounds: usize) -> Vec<f64> {
    let mut d = vec![1.0];
    d.extend((2..=rounds + 1).map(|i| m * (m + 1.0).powi((rounds + 1 - i) as i32)));
    d
}

/// Residuals of the dual equality constraints
/// `-m delta_1 + delta_j - m sum_{i>j} delta_i = 0`, `j = 2..=K+1`.
pub fn dual_residuals(deltas: &[f64], m: f64) -> Vec<f64> {
    (1..deltas.len())
        .map(|j| -m * deltas[0] + deltas[j] - m * deltas[j + 1..].iter().sum::<f64>())
        .collect()
}

pub fn solve_gp(coeffs: &ApproxCoefficients, config: &HarqConfig) -> Result<GpSolution> {
    let k = config.rounds;
    if coeffs.rounds() != k {
        return Err(invalid("coefficients do not match the number of rounds"));
    }
    let m = coeffs
        .uniform_m()
        .ok_or_else(|| invalid("closed-form allocation needs the same fading shape in every round"))?;
    let deltas = optimal_deltas(m, k);
    let lambda: f64 = deltas[1..].iter().sum();
    let ln_lambda = lambda.ln();
    let ln_a = &coeffs.ln_a;

    // v(delta) = lambda^lambda A_K prod_{k=2}^{K+1} (A_{k-2}/delta_k)^{delta_k}
    let ln_f_k = lambda * ln_lambda
        + ln_a[k]
        + (2..=k + 1)
            .map(|i| deltas[i - 1] * (ln_a[i - 2] - deltas[i - 1].ln()))
            .sum::<f64>();

    // each budget term carries its share delta_{k+1}/lambda of the unit budget
    let mut ln_p = Vec::with_capacity(k);
    let mut ln_sum = 0.0;
    for r in 1..=k {
        let lp = deltas[r].ln() - ln_lambda - ln_a[r - 1] + m * ln_sum;
        ln_sum += lp;
        ln_p.push(lp);
    }
    Ok(GpSolution {
        m,
        lambda_star: lambda,
        powers: ln_p.iter().map(|x| x.exp()).collect(),
        f_k: ln_f_k.exp(),
        ln_f_k,
        diversity: diversity_order(PolicyKind::Gp, m, k),
        deltas,
    })
}

/// `sum_k A_{k-1} P_k prod_{l<k} P_l^{-m} - 1` for any powers.
pub fn budget_residual(powers: &[f64], coeffs: &ApproxCoefficients) -> f64 {
    let mut ln_prefix = 0.0;
    let mut total = 0.0;
    for (r, &p) in powers.iter().enumerate() {
        total += (coeffs.ln_a[r] + p.ln() + ln_prefix).exp();
        ln_prefix -= coeffs.m[r] * p.ln();
    }
    total - 1.0
}

pub fn verify_budget(sol: &GpSolution, coeffs: &ApproxCoefficients) -> f64 {
    budget_residual(&sol.powers, coeffs)
}

/// High-SNR slope of `-log f_K` against `log mean SNR`.
pub fn diversity_order(kind: PolicyKind, m: f64, rounds: usize) -> f64 {
    match kind {
        PolicyKind::Co => rounds as f64 * m,
        PolicyKind::Al | PolicyKind::Ad | PolicyKind::Gp => (m + 1.0).powi(rounds as i32) - 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NakagamiChannel;
    use crate::harq::Scheme;

    fn coeffs(scheme: Scheme, m: f64, db: f64, k: usize) -> (ApproxCoefficients, HarqConfig) {
        let cfg = HarqConfig::new(scheme, 1.5, k, f64::INFINITY).unwrap();
        let ch = NakagamiChannel::from_db(m, db).unwrap();
        (ApproxCoefficients::for_channel(&ch, &cfg).unwrap(), cfg)
    }

    #[test]
    fn delta_examples() {
        assert_eq!(optimal_deltas(1.0, 2), vec![1.0, 2.0, 1.0]);
        assert_eq!(optimal_deltas(2.0, 2), vec![1.0, 6.0, 2.0]);
        let (c, cfg) = coeffs(Scheme::Cc, 1.0, 20.0, 2);
        assert_eq!(solve_gp(&c, &cfg).unwrap().lambda_star, 3.0);
        let (c, cfg) = coeffs(Scheme::Cc, 2.0, 20.0, 2);
        assert_eq!(solve_gp(&c, &cfg).unwrap().lambda_star, 8.0);
    }

    #[test]
    fn dual_constraints_hold() {
        for k in 1..=6 {
            for &m in &[1.0, 2.0, 3.0] {
                let d = optimal_deltas(m, k);
                assert_eq!(d[0], 1.0);
                let lambda: f64 = d[1..].iter().sum();
                assert!((lambda - ((m + 1.0).powi(k as i32) - 1.0)).abs() < 1e-12 * lambda);
                for r in dual_residuals(&d, m) {
                    assert!(r.abs() <= 1e-12, "k={k} m={m} residual {r}");
                }
            }
        }
    }

    #[test]
    fn single_round_spends_unit_budget() {
        for &m in &[0.5, 1.0, 2.5] {
            let (c, cfg) = coeffs(Scheme::Ir, m, 10.0, 1);
            let s = solve_gp(&c, &cfg).unwrap();
            assert!((s.powers[0] - 1.0).abs() < 1e-14);
            assert!(verify_budget(&s, &c).abs() < 1e-14);
        }
    }

    #[test]
    fn budget_is_tight_and_primal_matches_dual() {
        for scheme in [Scheme::Cc, Scheme::Ir] {
            for k in 1..=4 {
                for &m in &[1.0, 2.0, 3.0] {
                    let (c, cfg) = coeffs(scheme, m, 15.0, k);
                    let s = solve_gp(&c, &cfg).unwrap();
                    assert!(s.powers.iter().all(|&p| p > 0.0));
                    assert!(verify_budget(&s, &c).abs() <= 1e-8);
                    let direct = c.ln_a[k] - m * s.powers.iter().map(|p| p.ln()).sum::<f64>();
                    assert!((direct - s.ln_f_k).abs() <= 1e-8, "{scheme} k={k} m={m}");
                }
            }
        }
    }

    #[test]
    fn perturbed_power_breaks_budget() {
        let (c, cfg) = coeffs(Scheme::Cc, 2.0, 20.0, 3);
        let s = solve_gp(&c, &cfg).unwrap();
        // raising the last power only adds to its own term
        let mut p = s.powers.clone();
        p[2] *= 1.01;
        assert!(budget_residual(&p, &c) > 0.0);
    }

    /// Largest first power keeping the budget, given the other powers.
    fn restore_first_power(p: &mut [f64], c: &ApproxCoefficients) -> bool {
        let res = |x: f64, p: &mut [f64]| {
            p[0] = x;
            budget_residual(p, c)
        };
        // the residual is convex in ln P_1: find its minimum, then the upper root
        let mut lo = p[0] * 1e-3;
        let mut hi = p[0] * 1e3;
        for _ in 0..200 {
            let a = lo * (hi / lo).powf(1.0 / 3.0);
            let b = lo * (hi / lo).powf(2.0 / 3.0);
            if res(a, p) < res(b, p) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let mut lo = (lo * hi).sqrt();
        if res(lo, p) > 0.0 {
            return false;
        }
        let mut hi = lo * 1e6;
        if res(hi, p) <= 0.0 {
            return false;
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if res(mid, p) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        p[0] = lo;
        true
    }

    #[test]
    fn local_optimality() {
        for &(m, k) in &[(1.0, 2), (2.0, 3), (3.0, 4)] {
            let (c, cfg) = coeffs(Scheme::Cc, m, 20.0, k);
            let s = solve_gp(&c, &cfg).unwrap();
            let f = |p: &[f64]| c.ln_a[k] - m * p.iter().map(|x| x.ln()).sum::<f64>();
            let mut checked = 0;
            for r in 0..k {
                for factor in [0.9, 1.1] {
                    let mut p = s.powers.clone();
                    p[r] *= factor;
                    if restore_first_power(&mut p, &c) {
                        checked += 1;
                        assert!(f(&p) >= s.ln_f_k - 1e-9, "m={m} k={k} round {} x{factor}", r + 1);
                    }
                }
            }
            assert!(checked >= k, "m={m} k={k}: only {checked} perturbations were restorable");
        }
    }

    #[test]
    fn diversity_examples() {
        assert_eq!(diversity_order(PolicyKind::Co, 2.0, 4), 8.0);
        assert_eq!(diversity_order(PolicyKind::Gp, 1.0, 2), 3.0);
        assert_eq!(diversity_order(PolicyKind::Gp, 2.0, 2), 8.0);
        assert_eq!(diversity_order(PolicyKind::Al, 2.0, 2), 8.0);
    }

    #[test]
    fn rejects_mixed_shapes() {
        let cfg = HarqConfig::new(Scheme::Cc, 1.0, 2, f64::INFINITY).unwrap();
        let a = NakagamiChannel::new(1.0, 10.0).unwrap();
        let b = NakagamiChannel::new(2.0, 10.0).unwrap();
        let c = crate::allocation::coeffs_cc(&[a, b], &cfg).unwrap();
        assert!(solve_gp(&c, &cfg).is_err());
    }
}

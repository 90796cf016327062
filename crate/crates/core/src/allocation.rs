//! Power allocation with one-bit feedback: one power per round, chosen
//! from a high-SNR approximation `f_k ~ f_{k-1} h_k / P_k^{m_k}` of the
//! per-round failure probabilities.

use std::f64::consts::{LN_2, PI};

use log::debug;

use crate::channel::NakagamiChannel;
use crate::error::{invalid, Error, Result};
use crate::harq::{HarqConfig, OutageReport, ReportSource, Scheme, AVERAGE_POWER_BUDGET};
use crate::policy::PowerPolicy;
use crate::quad::{gauss_kronrod, Tolerance};
use crate::special::ln_gamma;

/// Coefficients of the outage approximation for a given channel sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxCoefficients {
    pub scheme: Scheme,
    /// Fading shape of each round.
    pub m: Vec<f64>,
    /// Mean SNR of each round.
    pub mean_snr: Vec<f64>,
    /// `h_1 .. h_K`.
    pub h: Vec<f64>,
    /// `A_0 .. A_K`, `A_0 = 1`.
    pub a: Vec<f64>,
    /// Natural logs of `h`.
    pub ln_h: Vec<f64>,
    /// Natural logs of `a`.
    pub ln_a: Vec<f64>,
    /// Cumulative shapes `m~_0 = 0, m~_1, .., m~_K`.
    pub m_tilde: Vec<f64>,
    /// IR only: the limiting-cdf convolution values `g_0(R) .. g_K(R)`.
    pub g_of_rate: Option<Vec<f64>>,
}

impl ApproxCoefficients {
    pub fn rounds(&self) -> usize {
        self.h.len()
    }

    /// Same shape in every round.
    pub fn uniform_m(&self) -> Option<f64> {
        let m0 = *self.m.first()?;
        self.m.iter().all(|&m| m == m0).then_some(m0)
    }

    /// Coefficients for `config.rounds` rounds over the same channel.
    pub fn for_channel(ch: &NakagamiChannel, config: &HarqConfig) -> Result<Self> {
        let channels = vec![*ch; config.rounds];
        match config.scheme {
            Scheme::Cc => coeffs_cc(&channels, config),
            Scheme::Ir => coeffs_ir(&channels, config, Tolerance::new(1e-15, 1e-11)),
        }
    }
}

fn check_channels(channels: &[NakagamiChannel], config: &HarqConfig, scheme: Scheme) -> Result<()> {
    if config.scheme != scheme {
        return Err(invalid(format!("{scheme} coefficients requested for a {} configuration", config.scheme)));
    }
    if channels.len() != config.rounds {
        return Err(invalid(format!(
            "need one channel per round ({}), got {}",
            config.rounds,
            channels.len()
        )));
    }
    Ok(())
}

fn cumulative(m: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    for &x in m {
        out.push(out.last().unwrap() + x);
    }
    out
}

fn finish(scheme: Scheme, channels: &[NakagamiChannel], ln_h: Vec<f64>, ln_a: Vec<f64>, g: Option<Vec<f64>>) -> ApproxCoefficients {
    let m: Vec<f64> = channels.iter().map(|c| c.m()).collect();
    ApproxCoefficients {
        scheme,
        mean_snr: channels.iter().map(|c| c.mean_snr()).collect(),
        m_tilde: cumulative(&m),
        m,
        h: ln_h.iter().map(|x| x.exp()).collect(),
        a: ln_a.iter().map(|x| x.exp()).collect(),
        ln_h,
        ln_a,
        g_of_rate: g,
    }
}

/// Chase-combining coefficients from the saddlepoint tail approximation of
/// a sum of gamma variables.
pub fn coeffs_cc(channels: &[NakagamiChannel], config: &HarqConfig) -> Result<ApproxCoefficients> {
    check_channels(channels, config, Scheme::Cc)?;
    let ln_th = config.threshold().ln();
    let m: Vec<f64> = channels.iter().map(|c| c.m()).collect();
    let mt = cumulative(&m);

    let ln_h: Vec<f64> = (0..m.len())
        .map(|i| {
            let (mk, g) = (m[i], channels[i].mean_snr());
            if i == 0 {
                -0.5 * (2.0 * PI * mk).ln() + mk * (1.0 + ln_th - g.ln())
            } else {
                mk * (1.0 + ln_th + mk.ln() - g.ln() - mt[i + 1].ln()) + (mt[i] + 0.5) * (1.0 - mk / mt[i + 1]).ln()
            }
        })
        .collect();

    // A_k straight from its closed form, not as a product of the h_k.
    let mut ln_a = vec![0.0];
    let mut ln_prod = 0.0;
    for k in 1..=m.len() {
        let (mk, g) = (m[k - 1], channels[k - 1].mean_snr());
        ln_prod += mk * (mk.ln() - g.ln());
        let s = mt[k];
        ln_a.push(s * (1.0 + ln_th - s.ln()) - 0.5 * (2.0 * PI * s).ln() + ln_prod);
    }
    Ok(finish(Scheme::Cc, channels, ln_h, ln_a, None))
}

/// Chebyshev interpolant on `[0, b]`.
struct Chebyshev {
    b: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl Chebyshev {
    fn fit<F: FnMut(f64) -> f64>(b: f64, n: usize, mut f: F) -> Self {
        // second-kind points, barycentric weights (-1)^j, halved at the ends
        let nodes: Vec<f64> = (0..n)
            .map(|j| 0.5 * b * (1.0 - (PI * j as f64 / (n - 1) as f64).cos()))
            .collect();
        let values = nodes.iter().map(|&x| f(x)).collect();
        let weights = (0..n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n - 1 {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        Self { b, nodes, values, weights }
    }

    fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, self.b);
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&xj, &fj), &wj) in self.nodes.iter().zip(&self.values).zip(&self.weights) {
            let d = x - xj;
            if d == 0.0 {
                return fj;
            }
            let t = wj / d;
            num += t * fj;
            den += t;
        }
        num / den
    }
}

/// `((2^t - 1)/t)`, continuous at 0.
fn growth(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        LN_2 * (1.0 + 0.5 * LN_2 * t)
    } else {
        (t * LN_2).exp_m1() / t
    }
}

/// `g_k(t) = t^{m~_k} s_k(t)`: the scaled functions are smooth, so each is
/// stored as a Chebyshev interpolant and the next one follows from
///
/// `s_k(t) = int_0^1 u^{m~_{k-1}} (1-u)^{m_k - 1} s_{k-1}(t u) B_k(t (1-u)) du`,
/// `B_k(x) = m_k ln2 2^x ((2^x - 1)/x)^{m_k - 1}`,
///
/// evaluated with `1 - u = v^2` to tame the endpoint behaviour for `m_k < 1`.
/// Returns `g_0(R) .. g_K(R)`.
fn limiting_cdf_values(m: &[f64], rate: f64, tol: Tolerance) -> Result<Vec<f64>> {
    const NODES: usize = 40;
    let mt = cumulative(m);
    let mut out = vec![1.0];
    if m.is_empty() {
        return Ok(out);
    }
    let s1 = move |t: f64| growth(t).powf(m[0]);
    out.push(rate.powf(mt[1]) * s1(rate));
    let mut prev = Chebyshev::fit(rate, NODES, s1);

    for k in 2..=m.len() {
        let mk = m[k - 1];
        let lead = mt[k - 1];
        let kernel = |x: f64| mk * LN_2 * (x * LN_2).exp() * growth(x).powf(mk - 1.0);
        let mut failed = None;
        let mut s_k = |t: f64, prev: &Chebyshev| -> f64 {
            let r = gauss_kronrod(
                |v| {
                    let u = 1.0 - v * v;
                    2.0 * v.powf(2.0 * mk - 1.0) * u.powf(lead) * prev.eval(t * u) * kernel(t * v * v)
                },
                0.0,
                1.0,
                tol,
            );
            if !r.converged {
                failed = Some(r.abs_error);
            }
            r.value
        };
        let at_rate = s_k(rate, &prev);
        out.push(rate.powf(mt[k]) * at_rate);
        if k < m.len() {
            let next = Chebyshev::fit(rate, NODES, |t| s_k(t, &prev));
            prev = next;
        }
        if let Some(err) = failed {
            return Err(Error::NonConvergence {
                stage: format!("limiting cdf g_{k}"),
                detail: format!("quadrature error estimate {err:e}"),
            });
        }
    }
    Ok(out)
}

/// Incremental-redundancy coefficients from the limiting behaviour of the
/// accumulated mutual information at high SNR.
pub fn coeffs_ir(channels: &[NakagamiChannel], config: &HarqConfig, quad_tol: Tolerance) -> Result<ApproxCoefficients> {
    check_channels(channels, config, Scheme::Ir)?;
    let m: Vec<f64> = channels.iter().map(|c| c.m()).collect();
    let g = limiting_cdf_values(&m, config.rate, quad_tol)?;
    // per-round factor m^m / (mean^m Gamma(m + 1))
    let ln_c: Vec<f64> = channels
        .iter()
        .map(|c| {
            let mk = c.m();
            mk * (mk.ln() - c.mean_snr().ln()) - ln_gamma(mk + 1.0)
        })
        .collect();
    let ln_h = (0..m.len()).map(|i| g[i + 1].ln() - g[i].ln() + ln_c[i]).collect();
    let mut ln_a = vec![0.0];
    let mut acc = 0.0;
    for (k, c) in ln_c.iter().enumerate() {
        acc += c;
        ln_a.push(g[k + 1].ln() + acc);
    }
    Ok(finish(Scheme::Ir, channels, ln_h, ln_a, Some(g)))
}

/// One power per round.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPolicy {
    pub powers: Vec<f64>,
}

impl AllocationPolicy {
    pub fn new(powers: Vec<f64>) -> Result<Self> {
        if powers.is_empty() || powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("allocation needs at least one finite, nonnegative power"));
        }
        Ok(Self { powers })
    }
}

impl PowerPolicy for AllocationPolicy {
    fn rounds(&self) -> usize {
        self.powers.len()
    }

    fn power(&self, round: usize, _state: f64) -> f64 {
        self.powers[round - 1]
    }
}

/// Approximate failure probabilities of an allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxOutage {
    /// `f_0 .. f_K`.
    pub failure: Vec<f64>,
    /// Some round had `h_k / P_k^{m_k} >= 1`: the approximation is outside
    /// its range and `f_k` was clamped to `f_{k-1}`.
    pub clamped: bool,
}

pub fn approx_outage(coeffs: &ApproxCoefficients, policy: &AllocationPolicy) -> Result<ApproxOutage> {
    if policy.powers.len() != coeffs.rounds() {
        return Err(invalid("policy and coefficients disagree on the number of rounds"));
    }
    let mut failure = vec![1.0];
    let mut clamped = false;
    for (k, &p) in policy.powers.iter().enumerate() {
        let prev = failure[k];
        let f = if p <= 0.0 {
            prev
        } else {
            let ln_ratio = coeffs.ln_h[k] - coeffs.m[k] * p.ln();
            if ln_ratio >= 0.0 {
                clamped = true;
                prev
            } else {
                prev * ln_ratio.exp()
            }
        };
        failure.push(f.clamp(0.0, prev));
    }
    Ok(ApproxOutage { failure, clamped })
}

/// Terms of the allocation value recursion: the remaining Lagrangian cost
/// per unit of probability of reaching round `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueRecursion {
    /// `g_vals[k - 1]` belongs to round `k`.
    pub g_vals: Vec<f64>,
}

/// Closed-form stationary allocation for multiplier `lambda`, computed from
/// the last round backwards. A round whose continuation value is not
/// positive has no stationary point and is left silent.
pub fn solve_allocation_kkt(coeffs: &ApproxCoefficients, lambda: f64, p_max: f64) -> Result<(AllocationPolicy, ValueRecursion)> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(invalid(format!("multiplier must be positive, got {lambda}")));
    }
    let k_max = coeffs.rounds();
    let mut powers = vec![0.0; k_max];
    let mut g = vec![0.0; k_max];
    let mut next = 1.0;
    for k in (0..k_max).rev() {
        let (m, ln_h) = (coeffs.m[k], coeffs.ln_h[k]);
        if next <= 0.0 {
            powers[k] = 0.0;
            g[k] = -lambda + next;
        } else {
            let ln_p = ((m * next / lambda).ln() + ln_h) / (m + 1.0);
            let p = ln_p.exp().min(p_max);
            powers[k] = p;
            g[k] = lambda * (p - 1.0) + next * (ln_h - m * p.ln()).exp();
        }
        next = g[k];
    }
    Ok((AllocationPolicy { powers }, ValueRecursion { g_vals: g }))
}

fn approx_average_power(coeffs: &ApproxCoefficients, policy: &AllocationPolicy) -> Result<(f64, ApproxOutage)> {
    let ap = approx_outage(coeffs, policy)?;
    let k = policy.powers.len();
    let num: f64 = policy.powers.iter().zip(&ap.failure).map(|(p, f)| p * f).sum();
    let den: f64 = ap.failure[..k].iter().sum();
    Ok((num / den, ap))
}

#[derive(Debug, Clone)]
pub struct AllocationSolution {
    pub policy: AllocationPolicy,
    pub coefficients: ApproxCoefficients,
    /// Zero when the all-peak allocation already meets the budget.
    pub lambda: f64,
    pub values: Option<ValueRecursion>,
    pub approx: ApproxOutage,
    pub report: OutageReport,
}

/// Allocation meeting the average-power budget under the outage
/// approximation.
pub fn solve_allocation(ch: &NakagamiChannel, config: &HarqConfig) -> Result<AllocationSolution> {
    let coeffs = ApproxCoefficients::for_channel(ch, config)?;
    solve_allocation_with(coeffs, config)
}

/// As [`solve_allocation`] with precomputed (possibly per-round) coefficients.
pub fn solve_allocation_with(coeffs: ApproxCoefficients, config: &HarqConfig) -> Result<AllocationSolution> {
    const REL_TOL: f64 = 1e-4;
    let budget = AVERAGE_POWER_BUDGET;
    // the closed form copes with an unbounded peak, no proxy needed
    let p_max = config.peak_power;
    let k = config.rounds;
    if coeffs.rounds() != k {
        return Err(invalid("coefficients do not match the number of rounds"));
    }
    let done = |policy: AllocationPolicy, lambda: f64, values: Option<ValueRecursion>, coefficients: ApproxCoefficients| {
        let (p_bar, approx) = approx_average_power(&coefficients, &policy)?;
        let report = OutageReport::new(approx.failure.clone(), p_bar, ReportSource::Approximate)?;
        if approx.clamped {
            debug!("outage approximation clamped; the operating point is outside its high-SNR range");
        }
        Ok(AllocationSolution {
            policy,
            coefficients,
            lambda,
            values,
            approx,
            report,
        })
    };

    if k == 1 {
        // P_bar = P_1 f_0 / f_0: the budget fixes the power.
        return done(AllocationPolicy::new(vec![budget.min(p_max)])?, 0.0, None, coeffs);
    }
    if p_max.is_finite() {
        let all_peak = AllocationPolicy::new(vec![p_max; k])?;
        if approx_average_power(&coeffs, &all_peak)?.0 <= budget {
            return done(all_peak, 0.0, None, coeffs);
        }
    }

    let p_bar = |lambda: f64| -> Result<f64> {
        let (pol, _) = solve_allocation_kkt(&coeffs, lambda, p_max)?;
        Ok(approx_average_power(&coeffs, &pol)?.0)
    };

    // Sanity sweep: the average power should fall as the multiplier grows.
    // It can fail where the approximation is clamped (tiny multipliers).
    let sweep: Vec<f64> = (0..10)
        .map(|i| p_bar(10f64.powf(-4.0 + i as f64)))
        .collect::<Result<_>>()?;
    if sweep.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-9)) {
        debug!("average power is not monotone in the multiplier on the sanity sweep: {sweep:?}");
    }

    let mut lo = 1.0;
    let mut hi = 1.0;
    let mut steps = 0;
    if p_bar(1.0)? > budget {
        while p_bar(hi)? > budget {
            hi *= 4.0;
            steps += 1;
            if steps > 200 {
                return Err(Error::NonConvergence {
                    stage: "allocation multiplier bracket".into(),
                    detail: "average power stays above budget".into(),
                });
            }
        }
        lo = hi / 4.0;
    } else {
        while p_bar(lo)? <= budget {
            lo /= 4.0;
            steps += 1;
            if steps > 200 {
                return Err(Error::NonConvergence {
                    stage: "allocation multiplier bracket".into(),
                    detail: "average power stays below budget".into(),
                });
            }
        }
        hi = lo * 4.0;
    }
    // log-bisection; `hi` stays feasible
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let p = p_bar(mid)?;
        if p > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if (p / budget - 1.0).abs() <= REL_TOL && p <= budget {
            hi = mid;
            break;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    let (policy, values) = solve_allocation_kkt(&coeffs, hi, p_max)?;
    done(policy, hi, Some(values), coeffs)
}

//! One-dimensional quadrature: adaptive Simpson and adaptive Gauss–Kronrod.

/// Error targets for the adaptive rules. An interval is accepted once its
/// error estimate drops below `max(abs, rel * |estimate|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_depth: u32,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_depth: 48,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-12, 1e-6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub converged: bool,
}

/// Adaptive Simpson over `[a, b]`, optionally pre-split at `breaks`
/// (points where the integrand is only piecewise smooth).
pub fn simpson<F>(f: F, a: f64, b: f64, breaks: &[f64], tol: Tolerance) -> Integral
where
    F: Fn(f64) -> f64,
{
    let mut edges = Vec::with_capacity(breaks.len() + 2);
    edges.push(a);
    edges.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);
    edges.sort_by(|x, y| x.partial_cmp(y).unwrap());

    // Rough magnitude first so the relative target has something to hold on to.
    let panels = edges.len() - 1;
    let mut total = Integral {
        value: 0.0,
        abs_error: 0.0,
        converged: true,
    };
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let flo = f(lo);
        let fhi = f(hi);
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        let eps = tol.abs.max(tol.rel * whole.abs()) / panels as f64;
        let mut state = SimpsonState {
            abs_error: 0.0,
            converged: true,
        };
        let v = simpson_rec(&f, lo, flo, mid, fmid, hi, fhi, whole, eps, tol, 0, &mut state);
        total.value += v;
        total.abs_error += state.abs_error;
        total.converged &= state.converged;
    }
    total
}

struct SimpsonState {
    abs_error: f64,
    converged: bool,
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F>(
    f: &F,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    tol: Tolerance,
    depth: u32,
    state: &mut SimpsonState,
) -> f64
where
    F: Fn(f64) -> f64,
{
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    let local_eps = eps.max(tol.rel * (left + right).abs() * 0.5).max(f64::MIN_POSITIVE);
    if depth >= 4 && delta.abs() <= 15.0 * local_eps {
        state.abs_error += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    if depth >= tol.max_depth {
        state.abs_error += delta.abs() / 15.0;
        state.converged = false;
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, fa, lm, flm, m, fm, left, eps / 2.0, tol, depth + 1, state)
        + simpson_rec(f, m, fm, rm, frm, b, fb, right, eps / 2.0, tol, depth + 1, state)
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (G7/K15) with bisection of the worst
/// interval. Integrable endpoint singularities are handled by repeated
/// bisection since no node sits on an endpoint.
pub fn gauss_kronrod<F>(f: F, a: f64, b: f64, tol: Tolerance) -> Integral
where
    F: Fn(f64) -> f64,
{
    if b <= a {
        return Integral {
            value: 0.0,
            abs_error: 0.0,
            converged: true,
        };
    }
    let (v, e) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, v, e, 0u32)];
    let mut value = v;
    let mut error = e;
    let max_intervals = 4000;
    loop {
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target {
            return Integral {
                value,
                abs_error: error,
                converged: true,
            };
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (lo, hi, iv, ie, depth) = intervals.swap_remove(idx);
        if depth >= tol.max_depth * 2 || intervals.len() >= max_intervals {
            intervals.push((lo, hi, iv, ie, u32::MAX));
            return Integral {
                value,
                abs_error: error,
                converged: false,
            };
        }
        let mid = 0.5 * (lo + hi);
        let (lv, le) = gk15(&f, lo, mid);
        let (rv, re) = gk15(&f, mid, hi);
        value += lv + rv - iv;
        error += le + re - ie;
        intervals.push((lo, mid, lv, le, depth + 1));
        intervals.push((mid, hi, rv, re, depth + 1));
        if !value.is_finite() {
            return Integral {
                value,
                abs_error: f64::INFINITY,
                converged: false,
            };
        }
    }
}

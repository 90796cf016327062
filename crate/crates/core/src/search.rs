//! Scalar search helpers shared by the solvers.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Result of a one-dimensional minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
}

/// Golden-section minimization of a unimodal `f` on `[a, b]`, stopping after
/// `max_iter` reductions or once the bracket is narrower than `x_tol`.
pub fn golden_section<F>(mut f: F, a: f64, b: f64, x_tol: f64, max_iter: usize) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= x_tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        Minimum { x: c, value: fc }
    } else {
        Minimum { x: d, value: fd }
    }
}

/// Maximize `f` on `[a, b]` by a uniform scan followed by golden refinement
/// around the best scan point. Safe for functions with one interior hump and
/// flat tails where plain golden section could stall.
pub fn scan_then_maximize<F>(f: F, a: f64, b: f64, scan: usize, x_tol: f64) -> Minimum
where
    F: Fn(f64) -> f64,
{
    let scan = scan.max(3);
    let step = (b - a) / (scan - 1) as f64;
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..scan {
        let v = f(a + step * i as f64);
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    let lo = a + step * best.saturating_sub(1) as f64;
    let hi = (a + step * (best + 1) as f64).min(b);
    let m = golden_section(|x| -f(x), lo, hi, x_tol, 200);
    if -m.value >= best_v {
        Minimum {
            x: m.x,
            value: -m.value,
        }
    } else {
        Minimum {
            x: a + step * best as f64,
            value: best_v,
        }
    }
}

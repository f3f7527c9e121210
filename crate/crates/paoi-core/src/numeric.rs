//! Small numeric kernels shared by the analytical modules: adaptive
//! Gauss-Legendre panels, golden-section extremum search, and bisection for
//! monotone root finding.

use std::sync::OnceLock;

/// Order of the base Gauss-Legendre rule used per panel. High enough that a
/// single panel already integrates smooth low-degree integrands to machine
/// precision; adaptivity only kicks in near endpoint kinks.
const GL_ORDER: usize = 15;

/// Nodes and weights on [-1, 1], computed once by Newton iteration on the
/// Legendre recurrence (matches the tabulated values to full f64 precision).
fn gauss_legendre() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static RULE: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = [0.0; GL_ORDER];
        let mut weights = [0.0; GL_ORDER];
        for k in 0..n {
            // Chebyshev initial guess, then Newton on P_n(x).
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_eval(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_eval(n, x);
            nodes[k] = x;
            weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

/// Returns (P_n(x), P_n'(x)) via the three-term recurrence.
fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn gl_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct PanelBudgetExceeded;

/// Adaptive bisection of Gauss-Legendre panels to an absolute tolerance.
/// The error estimate per panel is |two halves - whole|; a panel is accepted
/// once the estimate drops below its width-proportional share of `abs_tol`.
pub(crate) fn integrate_adaptive(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<f64, PanelBudgetExceeded> {
    if lo == hi {
        return Ok(0.0);
    }
    let full_width = hi - lo;
    let mut stack = vec![(lo, hi, gl_panel(f, lo, hi))];
    let mut total = 0.0f64;
    let mut panels_used = 0usize;
    while let Some((a, b, whole)) = stack.pop() {
        panels_used += 1;
        if panels_used > max_panels {
            return Err(PanelBudgetExceeded);
        }
        let mid = 0.5 * (a + b);
        let left = gl_panel(f, a, mid);
        let right = gl_panel(f, mid, b);
        let err = (left + right - whole).abs();
        let share = abs_tol * ((b - a) / full_width).abs();
        // Floor the acceptance threshold at machine noise relative to the
        // running total so panels in the round-off regime terminate.
        if err <= share.max(1e-16 * total.abs()) || (b - a).abs() < 1e-14 * full_width.abs() {
            total += left + right;
        } else {
            stack.push((a, mid, left));
            stack.push((mid, b, right));
        }
    }
    Ok(total)
}

/// Golden-section search for the maximum of a unimodal (here: concave)
/// function on [lo, hi]. The endpoints are always evaluated as candidates so
/// boundary maxima are reported exactly at the boundary.
pub(crate) fn golden_max(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    x_tol: f64,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= x_tol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
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
    let xm = 0.5 * (a + b);
    let candidates = [(lo, f(lo)), (hi, f(hi)), (xm, f(xm)), (c, fc), (d, fd)];
    let mut best = candidates[0];
    for cand in &candidates[1..] {
        if cand.1 > best.1 {
            best = *cand;
        }
    }
    best
}

/// Minimum of a unimodal (convex) function via `golden_max` on its negation.
pub(crate) fn golden_min(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, x_tol: f64) -> (f64, f64) {
    let (x, neg) = golden_max(&|t| -f(t), lo, hi, x_tol);
    (x, -neg)
}

/// Binomial coefficient as f64; exact for all values that fit in the 53-bit
/// mantissa (n <= 56 covers every enumeration this crate performs).
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc.round()
}

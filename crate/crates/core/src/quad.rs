//! Adaptive Simpson quadrature.

const MAX_DEPTH: u32 = 50;

/// ∫ f over [a, b] to relative tolerance `rel_tol`.
///
/// The integrand should be smooth on [a, b]; split the range at known
/// discontinuities with [`integrate_pieces`].
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // A coarse pass sets the absolute scale so that the relative tolerance
    // refers to the whole integral, not to each panel.
    let n = 64;
    let h = (b - a) / n as f64;
    let mut scale = 0.0;
    for k in 0..=n {
        scale += f(a + k as f64 * h).abs();
    }
    scale *= h;
    let tol = (rel_tol * scale).max(f64::MIN_POSITIVE);

    // Seed with fixed panels so narrow features cannot hide between the first
    // three sample points.
    let mut total = 0.0;
    for k in 0..n {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == n { b } else { lo + h };
        let m = 0.5 * (lo + hi);
        let (fa, fm, fb) = (f(lo), f(m), f(hi));
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += recurse(f, lo, hi, fa, fm, fb, whole, tol / n as f64, MAX_DEPTH);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Integrates over [a, b] split at the given breakpoints (which may lie
/// outside the range or repeat).
///
/// Each piece is sampled strictly inside its endpoints, so a jump of `f`
/// exactly at a breakpoint is seen from the correct side.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], rel_tol: f64) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2)
        .map(|w| {
            let (lo, hi) = (w[0].next_up(), w[1].next_down());
            adaptive_simpson(&|x: f64| f(x.clamp(lo, hi)), w[0], w[1], rel_tol)
        })
        .sum()
}

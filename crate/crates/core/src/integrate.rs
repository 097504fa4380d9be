//! Dormand–Prince 5(4) embedded Runge–Kutta integrator on fixed-size real
//! state vectors.
//!
//! Steps are clipped so that every requested output time and every declared
//! breakpoint (a discontinuity of the right-hand side) is hit exactly; no
//! interpolation is involved in producing outputs.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 1e-10 }
    }
}

/// Gaps between stops below this fraction of max(|t|, 1) are crossed with a
/// single Euler step.
const SLIVER: f64 = 1e-12;

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ (fifth minus fourth order weights).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct Dopri5 {
    pub tol: Tolerances,
    /// Upper bound on the step size in ns.
    pub max_step: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            max_step: f64::INFINITY,
        }
    }
}

fn lin<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (w, k) in terms {
        let s = h * w;
        for i in 0..N {
            out[i] += s * k[i];
        }
    }
    out
}

impl Dopri5 {
    pub fn new(tol: Tolerances) -> Self {
        Self { tol, ..Self::default() }
    }

    fn error_norm<const N: usize>(&self, y: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let sc = self.tol.abs + self.tol.rel * y[i].abs().max(y_new[i].abs());
            let r = err[i] / sc;
            acc += r * r;
        }
        (acc / N as f64).sqrt()
    }

    fn initial_step<const N: usize, F>(&self, f: &mut F, t: f64, y: &[f64; N], f0: &[f64; N], span: f64) -> f64
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let norm = |v: &[f64; N], base: &[f64; N]| {
            let mut acc = 0.0;
            for i in 0..N {
                let sc = self.tol.abs + self.tol.rel * base[i].abs();
                acc += (v[i] / sc).powi(2);
            }
            (acc / N as f64).sqrt()
        };
        let d0 = norm(y, y);
        let d1 = norm(f0, y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        let y1 = lin(y, h0, &[(1.0, f0)]);
        let f1 = f(t + h0, &y1);
        let mut diff = [0.0; N];
        for i in 0..N {
            diff[i] = f1[i] - f0[i];
        }
        let d2 = norm(&diff, y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        (100.0 * h0).min(h1).min(span).min(self.max_step)
    }

    /// Integrates from `times[0]` and returns the state at every entry of
    /// `times` (strictly increasing; the first entry returns `y0`).
    ///
    /// Steps never straddle a breakpoint, and the right-hand side is only
    /// sampled strictly inside the current piece, so a jump exactly at a
    /// breakpoint is seen from the correct side.
    pub fn solve<const N: usize, F>(
        &self,
        mut f: F,
        y0: [f64; N],
        times: &[f64],
        breakpoints: &[f64],
    ) -> Result<(Vec<[f64; N]>, Stats)>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let mut stats = Stats::default();
        let mut out = Vec::with_capacity(times.len());
        let Some(&t_first) = times.first() else {
            return Ok((out, stats));
        };
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "output times must be strictly increasing".into(),
            ));
        }
        let t_last = *times.last().unwrap();

        let mut breaks: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > t_first && b < t_last)
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        // Outputs and breakpoints merged into one ordered list of stops.
        let mut stops: Vec<f64> = times.iter().chain(&breaks).copied().collect();
        stops.sort_by(f64::total_cmp);
        stops.dedup();

        let bounds_at = |t: f64| {
            let k = breaks.partition_point(|&b| b <= t);
            let lo = if k > 0 {
                breaks[k - 1].next_up()
            } else {
                f64::NEG_INFINITY
            };
            let hi = breaks.get(k).map_or(f64::INFINITY, |b| b.next_down());
            (lo, hi)
        };

        let mut t = t_first;
        let mut y = y0;
        out.push(y);
        let (mut lo, mut hi) = bounds_at(t);
        let mut k1 = f(t.clamp(lo, hi), &y);
        stats.evaluations += 1;
        let mut h = self.initial_step(&mut |s, v| f(s.clamp(lo, hi), v), t, &y, &k1, t_last - t_first);
        stats.evaluations += 1;
        let mut next_out = times.iter().skip(1).peekable();

        for &stop in stops.iter().skip(1) {
            while t < stop {
                let remaining = stop - t;
                if remaining <= SLIVER * t.abs().max(1.0) {
                    // An output time and a breakpoint a few ulps apart: one
                    // Euler step across the sliver is exact to rounding.
                    y = lin(&y, remaining, &[(1.0, &k1)]);
                    t = stop;
                    k1 = f(t.clamp(lo, hi), &y);
                    stats.evaluations += 1;
                    break;
                }
                let clipped = h >= remaining;
                let step = if clipped { remaining } else { h };
                if step < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepUnderflow { time: t, step });
                }
                let mut g = |s: f64, v: &[f64; N]| f(s.clamp(lo, hi), v);

                let k2 = g(t + C2 * step, &lin(&y, step, &[(A21, &k1)]));
                let k3 = g(t + C3 * step, &lin(&y, step, &[(A31, &k1), (A32, &k2)]));
                let k4 = g(t + C4 * step, &lin(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
                let k5 = g(
                    t + C5 * step,
                    &lin(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
                );
                let k6 = g(
                    t + step,
                    &lin(&y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
                );
                let y_new = lin(&y, step, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
                let t_new = if clipped { stop } else { t + step };
                let k7 = g(t_new, &y_new);
                stats.evaluations += 6;

                let mut err = [0.0; N];
                for i in 0..N {
                    err[i] = step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                }
                let e = self.error_norm(&y, &y_new, &err);
                if !e.is_finite() {
                    return Err(Error::StepUnderflow { time: t, step });
                }
                let factor = if e == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * e.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };

                if e <= 1.0 {
                    stats.accepted += 1;
                    t = t_new;
                    y = y_new;
                    k1 = k7;
                    // A clipped step says nothing about the natural step
                    // size, so only grow from unclipped ones.
                    let proposal = step * factor;
                    h = if clipped { h.max(proposal) } else { proposal }.min(self.max_step);
                } else {
                    stats.rejected += 1;
                    h = step * factor.min(1.0);
                }
            }
            if breaks.binary_search_by(|b| b.total_cmp(&stop)).is_ok() {
                // The right-hand side may jump here; restart the FSAL stage
                // on the far side.
                (lo, hi) = bounds_at(t);
                k1 = f(t.clamp(lo, hi), &y);
                stats.evaluations += 1;
            }
            if next_out.peek() == Some(&&stop) {
                next_out.next();
                out.push(y);
            }
        }
        Ok((out, stats))
    }
}

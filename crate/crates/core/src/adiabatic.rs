//! Instantaneous eigenstructure of the resonant ladder Hamiltonian, the dark
//! state, numeric reconstruction of the counterdiabatic term, adiabaticity
//! diagnostics and transfer-speed metrics.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::SymmetricEigen;

use crate::dynamics::Trajectory;
use crate::integrate::Dopri5;
use crate::model::{c, hermitian_deviation, Mat3, Vec3, C64, I};
use crate::pulses::{stirap_envelopes, StirapParams};
use crate::{Error, HamiltonianMatrix, Result};

/// Below this both envelopes count as off and the mixing angle is undefined.
pub const ENVELOPE_FLOOR: f64 = 1e-15;

/// Angles bounding the transfer for the speed-limit estimate, in rad.
pub const THETA_INITIAL: f64 = 0.03 * PI;
pub const THETA_FINAL: f64 = 0.4 * PI;

/// Θ = atan2(Ω01, Ω12) ∈ [0, π/2], or `None` when both envelopes are off.
pub fn mixing_angle(omega01: f64, omega12: f64) -> Option<f64> {
    if omega01.abs() < ENVELOPE_FLOOR && omega12.abs() < ENVELOPE_FLOOR {
        None
    } else {
        Some(omega01.atan2(omega12))
    }
}

/// Mixing angle that keeps its last defined value while both envelopes are
/// off.
#[derive(Debug, Clone, Copy, Default)]
pub struct MixingAngleTracker {
    last: f64,
}

impl MixingAngleTracker {
    pub fn new(initial: f64) -> Self {
        Self { last: initial }
    }

    pub fn update(&mut self, omega01: f64, omega12: f64) -> f64 {
        if let Some(theta) = mixing_angle(omega01, omega12) {
            self.last = theta;
        }
        self.last
    }
}

/// dΘ/dt for the truncated Gaussian pair; zero wherever one pulse is off.
pub fn mixing_angle_rate(t: f64, p: &StirapParams) -> f64 {
    let (a, b) = stirap_envelopes(t, p);
    let norm2 = a * a + b * b;
    if norm2 == 0.0 {
        return 0.0;
    }
    // Ω̇01 = −t/σ²·Ω01 and Ω̇12 = −(t − t_s)/σ²·Ω12.
    -p.t_s / (p.sigma * p.sigma) * a * b / norm2
}

/// |D⟩ = cosΘ·e^{iφ12}|0⟩ − sinΘ·e^{−iφ01}|2⟩.
pub fn dark_state(theta: f64, phi01: f64, phi12: f64) -> Vec3 {
    Vec3::new(
        C64::from_polar(theta.cos(), phi12),
        c(0.0),
        -C64::from_polar(theta.sin(), -phi01),
    )
}

/// The three dressed eigenvectors (|n+⟩, |n0⟩, |n−⟩) at mixing angle Θ for
/// real couplings.
pub fn dressed_basis(theta: f64) -> [Vec3; 3] {
    let (s, co) = theta.sin_cos();
    let r = FRAC_1_SQRT_2;
    [
        Vec3::new(c(r * s), c(r), c(r * co)),
        Vec3::new(c(co), c(0.0), c(-s)),
        Vec3::new(c(r * s), c(-r), c(r * co)),
    ]
}

/// Instantaneous eigenstructure ordered as (+, 0, −).
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticFrame {
    pub theta: f64,
    pub eigvals: [f64; 3],
    pub eigvecs: [Vec3; 3],
}

fn stirap_couplings(h: &Mat3) -> Result<(f64, f64)> {
    const TOL: f64 = 1e-12;
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let off = |z: C64, what: &str| -> Result<()> {
        if z.norm() > TOL * scale {
            Err(Error::NotStirapForm(format!("{what} = {z} must vanish")))
        } else {
            Ok(())
        }
    };
    let deviation = hermitian_deviation(h);
    if deviation > TOL * scale {
        return Err(Error::NotHermitian { deviation });
    }
    for k in 0..3 {
        off(h[(k, k)], "diagonal element")?;
    }
    off(h[(0, 2)], "the 0–2 element")?;
    off(C64::new(0.0, h[(0, 1)].im), "Im H01")?;
    off(C64::new(0.0, h[(1, 2)].im), "Im H12")?;
    let (a, b) = (2.0 * h[(0, 1)].re, 2.0 * h[(1, 2)].re);
    if a < 0.0 || b < 0.0 {
        return Err(Error::NotStirapForm("couplings must be nonnegative".into()));
    }
    if a == 0.0 && b == 0.0 {
        return Err(Error::NotStirapForm("both couplings vanish".into()));
    }
    Ok((a, b))
}

/// Analytic eigensystem of a resonant ladder Hamiltonian with real,
/// nonnegative 0–1 and 1–2 couplings and no 0–2 element.
pub fn eigensystem(h: &HamiltonianMatrix) -> Result<AdiabaticFrame> {
    let (a, b) = stirap_couplings(h.matrix())?;
    let half = 0.5 * a.hypot(b);
    let theta = a.atan2(b);
    Ok(AdiabaticFrame {
        theta,
        eigvals: [half, 0.0, -half],
        eigvecs: dressed_basis(theta),
    })
}

/// Scales `v` so its largest-magnitude component is real and positive.
fn fix_phase(v: Vec3) -> Vec3 {
    let k = (0..3).max_by(|&i, &j| v[i].norm().total_cmp(&v[j].norm())).unwrap();
    let z = v[k];
    v * (z.conj() / z.norm())
}

/// Eigensystem of an arbitrary Hermitian matrix from a general numeric
/// solver, ordered by descending eigenvalue with each vector's phase fixed.
/// `theta` is read from the moduli of the 0–1 and 1–2 elements.
pub fn numeric_frame(h: &Mat3, time: f64) -> Result<AdiabaticFrame> {
    let norm = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if norm < f64::MIN_POSITIVE {
        return Err(Error::Degenerate { time });
    }
    let eig = SymmetricEigen::new(*h);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigvals = order.map(|k| eig.eigenvalues[k]);
    if eigvals.windows(2).any(|w| w[0] - w[1] <= 1e-12 * norm) {
        return Err(Error::Degenerate { time });
    }
    Ok(AdiabaticFrame {
        theta: h[(0, 1)].norm().atan2(h[(1, 2)].norm()),
        eigvals,
        eigvecs: order.map(|k| fix_phase(eig.eigenvectors.column(k).into_owned())),
    })
}

/// Resonant ladder Hamiltonian with untruncated Gaussian envelopes.
pub fn smooth_stirap_hamiltonian(t: f64, p: &StirapParams) -> Mat3 {
    let g = |center: f64| (-(t - center).powi(2) / (2.0 * p.sigma * p.sigma)).exp();
    *HamiltonianMatrix::from_couplings(
        C64::from_polar(0.5 * p.omega01_peak * g(0.0), p.phi01),
        C64::from_polar(0.5 * p.omega12_peak * g(p.t_s), p.phi12),
        c(0.0),
    )
    .matrix()
}

/// Numeric eigenframes of `h(t)` at each time.
pub fn frame_series<F: Fn(f64) -> Mat3>(h: F, times: &[f64]) -> Result<Vec<AdiabaticFrame>> {
    times.iter().map(|&t| numeric_frame(&h(t), t)).collect()
}

/// Rebuilds H_cd = i Σₙ (|∂ₜn⟩⟨n| − ⟨n|∂ₜn⟩|n⟩⟨n|) from eigenframes sampled
/// on a uniform grid.
///
/// Derivatives are centered differences with the grid step (one-sided at
/// the ends). Neighbouring eigenvectors are rotated onto the phase of the
/// central one before differencing, so the result does not depend on the
/// solver's phase choice.
pub fn reverse_engineer_cd(times: &[f64], frames: &[AdiabaticFrame]) -> Result<Vec<Mat3>> {
    if times.len() != frames.len() || times.len() < 2 {
        return Err(Error::InvalidParameter("need at least two frames, one per time".into()));
    }
    let step = times[1] - times[0];
    if !(step > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step) {
        return Err(Error::InvalidParameter("frames must lie on a uniform grid".into()));
    }
    let aligned = |v: &Vec3, reference: &Vec3| {
        let ov = reference.dotc(v);
        if ov.norm() == 0.0 {
            *v
        } else {
            v * (ov.conj() / ov.norm())
        }
    };
    let last = frames.len() - 1;
    let out = (0..=last)
        .map(|k| {
            let (lo, hi) = (k.saturating_sub(1), (k + 1).min(last));
            let span = (hi - lo) as f64 * step;
            let mut h = Mat3::zeros();
            for n in 0..3 {
                let v = &frames[k].eigvecs[n];
                let prev = aligned(&frames[lo].eigvecs[n], v);
                let next = aligned(&frames[hi].eigvecs[n], v);
                let dv = (next - prev) / c(span);
                let berry = v.dotc(&dv);
                h += (dv * v.adjoint() - v * v.adjoint() * berry) * I;
            }
            (h + h.adjoint()) * c(0.5)
        })
        .collect();
    Ok(out)
}

/// A reconstructed counterdiabatic term, linearly interpolated between
/// samples and zero outside them.
#[derive(Debug, Clone)]
pub struct SampledCd {
    pub times: Vec<f64>,
    pub matrices: Vec<Mat3>,
}

impl SampledCd {
    pub fn at(&self, t: f64) -> Mat3 {
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        if !(t0..=t1).contains(&t) {
            return Mat3::zeros();
        }
        let step = (t1 - t0) / (self.times.len() - 1) as f64;
        let k = (((t - t0) / step) as usize).min(self.times.len() - 2);
        let w = (t - self.times[k]) / step;
        self.matrices[k] * c(1.0 - w) + self.matrices[k + 1] * c(w)
    }
}

/// Time window over which the smooth pulse pair carries Θ from ≈ 0 to
/// ≈ π/2: the sech of the counterdiabatic pulse decays by e⁻⁶ at each end.
pub fn reverse_engineering_window(p: &StirapParams) -> (f64, f64) {
    let center = 0.5 * p.t_s;
    let rate = p.sech_rate();
    let half = if rate > 0.0 {
        (6.0 / rate).max(5.0 * p.sigma)
    } else {
        5.0 * p.sigma
    };
    (center - half, center + half)
}

/// Numeric H_cd for the untruncated pulse pair, sampled every `step` ns.
pub fn reverse_engineer_stirap(p: &StirapParams, step: f64) -> Result<SampledCd> {
    let (lo, hi) = reverse_engineering_window(p);
    let n = ((hi - lo) / step).ceil() as usize;
    let dt = (hi - lo) / n as f64;
    let times: Vec<f64> = (0..=n).map(|k| lo + k as f64 * dt).collect();
    let frames = frame_series(|t| smooth_stirap_hamiltonian(t, p), &times)?;
    let matrices = reverse_engineer_cd(&times, &frames)?;
    Ok(SampledCd { times, matrices })
}

/// Local adiabaticity ratio |Θ̇|/√(Ω01² + Ω12²).
pub fn adiabaticity_ratio(t: f64, p: &StirapParams) -> Result<f64> {
    let (a, b) = stirap_envelopes(t, p);
    let norm = a.hypot(b);
    if norm == 0.0 {
        return Err(Error::InvalidParameter(format!("both envelopes vanish at t = {t}")));
    }
    Ok(mixing_angle_rate(t, p).abs() / norm)
}

/// Maximum of [`adiabaticity_ratio`] over `samples` points spanning the
/// pulses, skipping points where both envelopes are off.
pub fn max_adiabaticity_ratio(p: &StirapParams, samples: usize) -> f64 {
    let (lo, hi) = p.span();
    let n = samples.max(2) - 1;
    (0..=n)
        .filter_map(|k| adiabaticity_ratio(lo + (hi - lo) * k as f64 / n as f64, p).ok())
        .fold(0.0, f64::max)
}

/// Bare-basis amplitudes from the nonadiabatic amplitude equations.
#[derive(Debug, Clone)]
pub struct AmplitudeTrajectory {
    pub times: Vec<f64>,
    /// (c+, c0, c−) in the dressed basis.
    pub dressed: Vec<[C64; 3]>,
    pub bare: Vec<Vec3>,
}

impl AmplitudeTrajectory {
    pub fn populations(&self) -> Vec<[f64; 3]> {
        self.bare
            .iter()
            .map(|v| [v[0].norm_sqr(), v[1].norm_sqr(), v[2].norm_sqr()])
            .collect()
    }
}

fn to_bare(theta: f64, amp: &[C64; 3]) -> Vec3 {
    let basis = dressed_basis(theta);
    basis[0] * amp[0] + basis[1] * amp[1] + basis[2] * amp[2]
}

fn to_dressed(theta: f64, psi: &Vec3) -> [C64; 3] {
    dressed_basis(theta).map(|n| n.dotc(psi))
}

/// Integrates the coupled amplitude equations in the dressed basis,
///
///   ċ+ = −(i/2)Ω c+ + (Θ̇/√2) c0,
///   ċ0 = −(Θ̇/√2)(c+ + c−),
///   ċ− = +(i/2)Ω c− + (Θ̇/√2) c0,
///
/// for the truncated pulse pair with zero drive phases. Θ jumps where an
/// envelope is truncated, so the state is re-projected onto the new basis
/// at every truncation edge.
pub fn nonadiabatic_amplitudes(p: &StirapParams, psi0: &Vec3, times: &[f64]) -> Result<AmplitudeTrajectory> {
    p.validate()?;
    if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("need increasing output times".into()));
    }
    let (t_start, t_end) = (times[0], *times.last().unwrap());
    let mut edges: Vec<f64> = p
        .breakpoints()
        .into_iter()
        .filter(|&b| b > t_start && b < t_end)
        .collect();
    edges.insert(0, t_start);
    edges.push(t_end);

    // Θ(t) seen from inside a segment, held across gaps where both pulses
    // are off and before the first pulse switches on.
    let first = edges
        .windows(2)
        .find_map(|w| {
            let (a, b) = stirap_envelopes(0.5 * (w[0] + w[1]), p);
            mixing_angle(a, b).map(|_| {
                let (a, b) = stirap_envelopes(w[0].next_up(), p);
                a.atan2(b)
            })
        })
        .unwrap_or(0.0);
    let mut tracker = MixingAngleTracker::new(first);

    let solver = Dopri5::default();
    let mut psi = *psi0;
    let mut out = AmplitudeTrajectory {
        times: times.to_vec(),
        dressed: Vec::with_capacity(times.len()),
        bare: Vec::with_capacity(times.len()),
    };
    for (seg, w) in edges.windows(2).enumerate() {
        let (s, e) = (w[0], w[1]);
        let (lo, hi) = (s.next_up(), e.next_down());
        let mut theta_at = |t: f64| {
            let (a, b) = stirap_envelopes(t.clamp(lo, hi), p);
            tracker.update(a, b)
        };
        let amp = to_dressed(theta_at(s), &psi);
        let y0 = [amp[0].re, amp[0].im, amp[1].re, amp[1].im, amp[2].re, amp[2].im];
        let rhs = |t: f64, y: &[f64; 6]| {
            let t = t.clamp(lo, hi);
            let (a, b) = stirap_envelopes(t, p);
            let half = 0.5 * a.hypot(b);
            let k = mixing_angle_rate(t, p) * FRAC_1_SQRT_2;
            let (cp, c0, cm) = (C64::new(y[0], y[1]), C64::new(y[2], y[3]), C64::new(y[4], y[5]));
            let dp = -I * half * cp + k * c0;
            let d0 = -k * (cp + cm);
            let dm = I * half * cm + k * c0;
            [dp.re, dp.im, d0.re, d0.im, dm.re, dm.im]
        };
        let mut local: Vec<f64> = vec![s];
        local.extend(times.iter().copied().filter(|&t| t > s && t < e));
        local.push(e);
        let (ys, _) = solver.solve(rhs, y0, &local, &[])?;
        let to_amp = |y: &[f64; 6]| [C64::new(y[0], y[1]), C64::new(y[2], y[3]), C64::new(y[4], y[5])];
        for (t, y) in local.iter().zip(&ys) {
            let is_output = times.binary_search_by(|x| x.total_cmp(t)).is_ok();
            let already = seg > 0 && *t == s;
            if is_output && !already {
                let a = to_amp(y);
                out.dressed.push(a);
                out.bare.push(to_bare(theta_at(*t), &a));
            }
        }
        psi = to_bare(theta_at(e), &to_amp(ys.last().unwrap()));
    }
    Ok(out)
}

/// Transfer time and speed-limit estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMetrics {
    /// Time from the last p0 ≥ 0.99 to the first p2 ≥ 0.9; `None` if the
    /// trajectory never reaches p2 = 0.9.
    pub t_transfer_09: Option<f64>,
    pub t_qsl: f64,
    pub theta_i: f64,
    pub theta_f: f64,
}

/// 2·arccos|⟨D(Θi)|D(Θf)⟩|/Ω02max.
pub fn t_qsl(omega02_max: f64, theta_i: f64, theta_f: f64) -> Result<f64> {
    if !(omega02_max > 0.0) {
        return Err(Error::InvalidParameter("Ω02max must be > 0".into()));
    }
    let overlap = dark_state(theta_i, 0.0, 0.0)
        .dotc(&dark_state(theta_f, 0.0, 0.0))
        .norm();
    Ok(2.0 * overlap.min(1.0).acos() / omega02_max)
}

fn crossing(t: &[f64], y: &[f64], k: usize, level: f64) -> f64 {
    let (y0, y1) = (y[k], y[k + 1]);
    if y1 == y0 {
        return t[k];
    }
    t[k] + (level - y0) / (y1 - y0) * (t[k + 1] - t[k])
}

/// Locates the population thresholds with linear interpolation between
/// samples.
pub fn transfer_time(times: &[f64], pops: &[[f64; 3]]) -> Option<f64> {
    let p0: Vec<f64> = pops.iter().map(|p| p[0]).collect();
    let p2: Vec<f64> = pops.iter().map(|p| p[2]).collect();
    let i2 = p2.iter().position(|&x| x >= 0.9)?;
    if i2 == 0 {
        return None;
    }
    let i0 = p0[..i2].iter().rposition(|&x| x >= 0.99)?;
    let start = crossing(times, &p0, i0, 0.99);
    let end = crossing(times, &p2, i2 - 1, 0.9);
    Some(end - start)
}

pub fn transfer_metrics(traj: &Trajectory, omega02_max: f64) -> Result<TransferMetrics> {
    let pops: Vec<[f64; 3]> = traj.states.iter().map(|s| s.populations()).collect();
    Ok(TransferMetrics {
        t_transfer_09: transfer_time(&traj.times, &pops),
        t_qsl: t_qsl(omega02_max, THETA_INITIAL, THETA_FINAL)?,
        theta_i: THETA_INITIAL,
        theta_f: THETA_FINAL,
    })
}

//! Pulse envelopes, the two-photon amplitude map, ac-Stark shifts, dynamic
//! phase corrections and pulse areas.
//!
//! Time is measured from the maximum of the 0–1 pulse. Counter-intuitive
//! (STIRAP) ordering has `t_s < 0`. Both Gaussian pulses are hard-truncated at
//! ±3σ from their own maxima; the counterdiabatic pulse is zero only outside
//! the union of those two windows, so it stays defined even when both STIRAP
//! amplitudes are zero.

use serde::{Deserialize, Serialize};

use crate::quad::integrate_pieces;
use crate::{Error, Result};

/// Half-width of the Gaussian truncation window in units of σ.
pub const TRUNCATION_SIGMAS: f64 = 3.0;

/// Relative tolerance for every pulse-area integral.
pub const AREA_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StirapParams {
    /// Peak Rabi rate of the 0–1 (pump) pulse, rad/ns.
    pub omega01_peak: f64,
    /// Peak Rabi rate of the 1–2 (Stokes) pulse, rad/ns.
    pub omega12_peak: f64,
    /// Gaussian width, ns.
    pub sigma: f64,
    /// Delay of the 1–2 pulse maximum, ns.
    pub t_s: f64,
    pub phi01: f64,
    pub phi12: f64,
}

impl StirapParams {
    pub fn new(omega_peak: f64, sigma: f64, t_s: f64) -> Self {
        Self {
            omega01_peak: omega_peak,
            omega12_peak: omega_peak,
            sigma,
            t_s,
            phi01: 0.0,
            phi12: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma = {} must be > 0", self.sigma)));
        }
        if !(self.omega01_peak >= 0.0 && self.omega12_peak >= 0.0) {
            return Err(Error::InvalidParameter("peak Rabi rates must be >= 0".into()));
        }
        if !self.t_s.is_finite() {
            return Err(Error::InvalidParameter("t_s must be finite".into()));
        }
        Ok(())
    }

    pub fn window01(&self) -> (f64, f64) {
        let w = TRUNCATION_SIGMAS * self.sigma;
        (-w, w)
    }

    pub fn window12(&self) -> (f64, f64) {
        let w = TRUNCATION_SIGMAS * self.sigma;
        (self.t_s - w, self.t_s + w)
    }

    /// Earliest and latest instants at which any pulse can be nonzero.
    pub fn span(&self) -> (f64, f64) {
        let (a0, a1) = self.window01();
        let (b0, b1) = self.window12();
        (a0.min(b0), a1.max(b1))
    }

    /// True inside either Gaussian truncation window.
    pub fn in_support(&self, t: f64) -> bool {
        let (a0, a1) = self.window01();
        let (b0, b1) = self.window12();
        (a0..=a1).contains(&t) || (b0..=b1).contains(&t)
    }

    /// The union of both truncation windows as disjoint sorted intervals.
    pub fn support_intervals(&self) -> Vec<(f64, f64)> {
        let mut w = [self.window01(), self.window12()];
        w.sort_by(|a, b| a.0.total_cmp(&b.0));
        if w[1].0 <= w[0].1 {
            vec![(w[0].0, w[0].1.max(w[1].1))]
        } else {
            w.to_vec()
        }
    }

    /// Instants where some envelope is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (a0, a1) = self.window01();
        let (b0, b1) = self.window12();
        let mut v = vec![a0, a1, b0, b1];
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Rate |t_s|/σ² of the ideal counterdiabatic sech pulse; also its peak.
    pub fn sech_rate(&self) -> f64 {
        self.t_s.abs() / (self.sigma * self.sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdMode {
    /// A direct 0–2 coupling with the effective Ω02(t) and phase φ20.
    #[serde(alias = "ideal", alias = "ideal_effective")]
    IdealEffective,
    /// The physical off-resonant tone coupling 0–1 and 1–2 at detuning ±Δ.
    #[serde(alias = "two_photon")]
    TwoPhoton,
}

impl std::str::FromStr for CdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" | "ideal-effective" | "ideal_effective" => Ok(Self::IdealEffective),
            "two-photon" | "two_photon" => Ok(Self::TwoPhoton),
            _ => Err(Error::Unknown {
                kind: "counterdiabatic mode",
                name: s.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterdiabaticParams {
    pub mode: CdMode,
    /// Peak two-photon Rabi rate in rad/ns. `None` derives it from the ideal
    /// counterdiabatic peak |t_s|/σ² through the inverse effective map.
    pub omega_2ph_peak: Option<f64>,
    /// Phase of the two-photon tone; the loop phase follows φ20 = −2φ2ph − π.
    pub phi_2ph: f64,
    /// Two-photon detuning Δ = (ω01 − ω12)/2 in rad/ns.
    pub delta: f64,
    /// Multiplier on the effective Ω02 envelope.
    pub scale: f64,
}

impl CounterdiabaticParams {
    /// Ideal counterdiabatic drive at loop phase −π/2 (φ2ph = −π/4).
    pub fn ideal(delta: f64) -> Self {
        Self {
            mode: CdMode::IdealEffective,
            omega_2ph_peak: None,
            phi_2ph: -std::f64::consts::FRAC_PI_4,
            delta,
            scale: 1.0,
        }
    }

    pub fn two_photon(delta: f64) -> Self {
        Self {
            mode: CdMode::TwoPhoton,
            ..Self::ideal(delta)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == CdMode::TwoPhoton && (self.delta == 0.0 || !self.delta.is_finite()) {
            return Err(Error::InvalidParameter("two-photon detuning must be nonzero".into()));
        }
        if !(self.scale >= 0.0) {
            return Err(Error::InvalidParameter(format!("scale = {} must be >= 0", self.scale)));
        }
        if let Some(w) = self.omega_2ph_peak {
            if !(w >= 0.0) {
                return Err(Error::InvalidParameter("omega_2ph_peak must be >= 0".into()));
            }
            if self.delta == 0.0 {
                return Err(Error::InvalidParameter(
                    "an explicit two-photon amplitude needs a nonzero detuning".into(),
                ));
            }
        }
        Ok(())
    }

    /// Peak of the effective Ω02 envelope.
    pub fn omega02_peak(&self, p: &StirapParams) -> Result<f64> {
        let base = match self.omega_2ph_peak {
            Some(w) => effective_two_photon(w, self.delta)?,
            None => p.sech_rate(),
        };
        Ok(base * self.scale)
    }

    /// Peak of the two-photon Rabi rate that realizes [`Self::omega02_peak`].
    pub fn omega_2ph_peak(&self, p: &StirapParams) -> Result<f64> {
        two_photon_amplitude(self.omega02_peak(p)?, self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcStarkShifts {
    pub eps01: f64,
    pub eps12: f64,
    pub eps02: f64,
}

fn gaussian(t: f64, center: f64, sigma: f64) -> f64 {
    let x = (t - center) / sigma;
    (-0.5 * x * x).exp()
}

/// (Ω01(t), Ω12(t)) in rad/ns, each truncated outside its ±3σ window.
pub fn stirap_envelopes(t: f64, p: &StirapParams) -> (f64, f64) {
    let (a0, a1) = p.window01();
    let (b0, b1) = p.window12();
    let o01 = if (a0..=a1).contains(&t) {
        p.omega01_peak * gaussian(t, 0.0, p.sigma)
    } else {
        0.0
    };
    let o12 = if (b0..=b1).contains(&t) {
        p.omega12_peak * gaussian(t, p.t_s, p.sigma)
    } else {
        0.0
    };
    (o01, o12)
}

/// Time derivatives of [`stirap_envelopes`] (zero outside the windows).
pub fn stirap_envelope_rates(t: f64, p: &StirapParams) -> (f64, f64) {
    let (o01, o12) = stirap_envelopes(t, p);
    let s2 = p.sigma * p.sigma;
    (-t / s2 * o01, -(t - p.t_s) / s2 * o12)
}

/// Untruncated counterdiabatic envelope (|t_s|/σ²)·sech[(t_s/σ²)(t − t_s/2)]
/// for equal STIRAP peak amplitudes.
pub fn counterdiabatic_envelope(t: f64, sigma: f64, t_s: f64) -> f64 {
    let a = t_s / (sigma * sigma);
    let x = a * (t - 0.5 * t_s);
    // sech(x) = 2e^{-|x|}/(1 + e^{-2|x|}) stays finite for large |x|.
    let e = (-x.abs()).exp();
    a.abs() * 2.0 * e / (1.0 + e * e)
}

fn sech_shape(t: f64, p: &StirapParams) -> f64 {
    let a = p.sech_rate();
    if a == 0.0 {
        return 1.0;
    }
    counterdiabatic_envelope(t, p.sigma, p.t_s) / a
}

/// Effective Ω02(t) of the counterdiabatic drive: scaled, and zero outside
/// both STIRAP windows.
pub fn counterdiabatic_drive(t: f64, p: &StirapParams, cd: &CounterdiabaticParams) -> Result<f64> {
    if !p.in_support(t) {
        return Ok(0.0);
    }
    Ok(cd.omega02_peak(p)? * sech_shape(t, p))
}

/// Two-photon Rabi rate Ω2ph(t) ∝ sech^{1/2}, so that the effective coupling
/// √2Ω2ph²/(2Δ) follows the sech envelope.
pub fn two_photon_envelope(t: f64, p: &StirapParams, cd: &CounterdiabaticParams) -> Result<f64> {
    if !p.in_support(t) {
        return Ok(0.0);
    }
    Ok(cd.omega_2ph_peak(p)? * sech_shape(t, p).sqrt())
}

/// Effective 0–2 coupling √2·Ω2ph²/(2Δ) of an off-resonant two-photon drive.
pub fn effective_two_photon(omega_2ph: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::InvalidParameter("detuning must be nonzero".into()));
    }
    Ok(std::f64::consts::SQRT_2 * omega_2ph * omega_2ph / (2.0 * delta))
}

/// Inverse of [`effective_two_photon`]: Ω2ph = √(√2·Δ·Ω02).
pub fn two_photon_amplitude(omega02: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::InvalidParameter("detuning must be nonzero".into()));
    }
    let arg = std::f64::consts::SQRT_2 * delta * omega02;
    if arg < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Ω02 = {omega02} and Δ = {delta} have opposite signs"
        )));
    }
    Ok(arg.sqrt())
}

/// Second-order ac-Stark shifts of the three transitions under a two-photon
/// drive of instantaneous Rabi rate `omega_2ph_t`.
pub fn ac_stark(omega_2ph_t: f64, delta: f64) -> Result<AcStarkShifts> {
    if delta == 0.0 {
        return Err(Error::InvalidParameter("detuning must be nonzero".into()));
    }
    let base = omega_2ph_t * omega_2ph_t / delta;
    Ok(AcStarkShifts {
        eps01: base,
        eps12: -1.25 * base,
        eps02: -0.25 * base,
    })
}

/// Gudermannian gd(x) = atan(sinh x), the antiderivative of sech.
fn gudermannian(x: f64) -> f64 {
    x.sinh().atan()
}

/// Cumulative Stark-phase integrals (φ̃01, φ̃12, φ̃02)(t) = ∫_{−∞}^{t} ε dt′.
///
/// ε ∝ Ω2ph² ∝ sech, so the integral is closed-form. The dynamics integrator
/// carries the same integrals as extra state components; the two agree to
/// integrator tolerance.
pub fn dynamic_phase(t: f64, p: &StirapParams, cd: &CounterdiabaticParams) -> Result<[f64; 3]> {
    if cd.delta == 0.0 {
        return Err(Error::InvalidParameter("detuning must be nonzero".into()));
    }
    let peak = cd.omega_2ph_peak(p)?;
    if peak == 0.0 {
        return Ok([0.0; 3]);
    }
    let a = p.sech_rate();
    let center = 0.5 * p.t_s;
    let mut sech_integral = 0.0;
    for (lo, hi) in p.support_intervals() {
        if t <= lo {
            break;
        }
        let hi = hi.min(t);
        sech_integral += if a == 0.0 {
            hi - lo
        } else {
            (gudermannian(a * (hi - center)) - gudermannian(a * (lo - center))) / a
        };
    }
    let s = ac_stark(peak, cd.delta)?;
    Ok([
        s.eps01 * sech_integral,
        s.eps12 * sech_integral,
        s.eps02 * sech_integral,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseAreas {
    /// 𝒜 = ∫√(Ω01² + Ω12²) dt.
    pub stirap: f64,
    /// 𝒜02 = ∫Ω02 dt of the effective counterdiabatic drive.
    pub counterdiabatic: f64,
}

/// Areas of the truncated envelopes.
pub fn pulse_areas(p: &StirapParams, cd: Option<&CounterdiabaticParams>) -> Result<PulseAreas> {
    p.validate()?;
    let (lo, hi) = p.span();
    let breaks = p.breakpoints();
    let stirap = integrate_pieces(
        &|t| {
            let (a, b) = stirap_envelopes(t, p);
            a.hypot(b)
        },
        lo,
        hi,
        &breaks,
        AREA_REL_TOL,
    );
    let counterdiabatic = match cd {
        None => 0.0,
        Some(cd) => {
            let peak = cd.omega02_peak(p)?;
            peak * integrate_pieces(
                &|t| if p.in_support(t) { sech_shape(t, p) } else { 0.0 },
                lo,
                hi,
                &breaks,
                AREA_REL_TOL,
            )
        }
    };
    Ok(PulseAreas {
        stirap,
        counterdiabatic,
    })
}

/// 𝒜 of the Gaussian pair without truncation.
pub fn stirap_area_untruncated(p: &StirapParams) -> f64 {
    let lo = p.t_s.min(0.0) - 12.0 * p.sigma;
    let hi = p.t_s.max(0.0) + 12.0 * p.sigma;
    integrate_pieces(
        &|t| (p.omega01_peak * gaussian(t, 0.0, p.sigma)).hypot(p.omega12_peak * gaussian(t, p.t_s, p.sigma)),
        lo,
        hi,
        &[0.0, p.t_s],
        AREA_REL_TOL,
    )
}

/// ∫Ω02 dt of the untruncated sech pulse, by quadrature over a range wide
/// enough that the tails are below 1e-16 of the total.
pub fn counterdiabatic_area_untruncated(sigma: f64, t_s: f64) -> f64 {
    let a = (t_s / (sigma * sigma)).abs();
    if a == 0.0 {
        return 0.0;
    }
    let half = 40.0 / a;
    let c = 0.5 * t_s;
    integrate_pieces(
        &|t| counterdiabatic_envelope(t, sigma, t_s),
        c - half,
        c + half,
        &[c],
        AREA_REL_TOL,
    )
}

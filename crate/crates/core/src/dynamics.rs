//! Rotating-frame Hamiltonian assembly and Lindblad evolution.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::integrate::{Dopri5, Stats};
use crate::model::{c, lindblad_rhs, Mat3, C64};
use crate::pulses::{
    counterdiabatic_drive, dynamic_phase, stirap_envelopes, two_photon_envelope, CdMode, CounterdiabaticParams,
    StirapParams,
};
use crate::units::to_mhz;
use crate::{DecoherenceRates, Error, HamiltonianMatrix, QutritState, Result};

/// Guard added on each side of the pulse support by the default window, ns.
pub const WINDOW_GUARD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub stirap: StirapParams,
    /// `None` runs plain STIRAP.
    pub cd: Option<CounterdiabaticParams>,
    pub rates: DecoherenceRates,
    /// Constant shift of the loop phase Φ modelling mixer phase error, rad.
    pub phase_offset: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub stark_correction: bool,
}

impl ProtocolConfig {
    /// Config with the default window around the pulse support.
    pub fn new(stirap: StirapParams, cd: Option<CounterdiabaticParams>, rates: DecoherenceRates) -> Self {
        let (t_start, t_end) = default_window(&stirap);
        Self {
            stirap,
            cd,
            rates,
            phase_offset: 0.0,
            t_start,
            t_end,
            stark_correction: true,
        }
    }

    /// Recomputes the window after the pulse timing changed.
    pub fn with_default_window(mut self) -> Self {
        (self.t_start, self.t_end) = default_window(&self.stirap);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.stirap.validate()?;
        if let Some(cd) = &self.cd {
            cd.validate()?;
        }
        self.rates.validate()?;
        if !(self.t_start < self.t_end) {
            return Err(Error::InvalidParameter(format!(
                "window [{}, {}] is empty",
                self.t_start, self.t_end
            )));
        }
        let (lo, hi) = self.stirap.span();
        if self.t_start > lo || self.t_end < hi {
            return Err(Error::InvalidParameter(format!(
                "window [{}, {}] does not cover the pulses [{lo}, {hi}]",
                self.t_start, self.t_end
            )));
        }
        Ok(())
    }

    /// Whether cumulative Stark phases are fed back into the drive phases.
    pub fn stark_active(&self) -> bool {
        self.stark_correction && matches!(self.cd, Some(cd) if cd.mode == CdMode::TwoPhoton)
    }
}

/// [min(−3σ, t_s − 3σ), max(3σ, t_s + 3σ)] widened by the guard.
pub fn default_window(p: &StirapParams) -> (f64, f64) {
    let (lo, hi) = p.span();
    (lo - WINDOW_GUARD, hi + WINDOW_GUARD)
}

/// Loop-closing phase φ20 of the two-photon tone: −2φ2ph − π.
pub fn phi20_from_two_photon(phi_2ph: f64) -> f64 {
    -2.0 * phi_2ph - PI
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnvelopeSample {
    pub omega01: f64,
    pub omega12: f64,
    /// Effective 0–2 coupling.
    pub omega02: f64,
    /// Two-photon Rabi rate; zero in the ideal mode.
    pub omega_2ph: f64,
}

fn envelopes_at(t: f64, cfg: &ProtocolConfig) -> Result<EnvelopeSample> {
    let (omega01, omega12) = stirap_envelopes(t, &cfg.stirap);
    let (omega02, omega_2ph) = match &cfg.cd {
        None => (0.0, 0.0),
        Some(cd) => {
            let o02 = counterdiabatic_drive(t, &cfg.stirap, cd)?;
            let o2ph = match cd.mode {
                CdMode::IdealEffective => 0.0,
                CdMode::TwoPhoton => two_photon_envelope(t, &cfg.stirap, cd)?,
            };
            (o02, o2ph)
        }
    };
    Ok(EnvelopeSample {
        omega01,
        omega12,
        omega02,
        omega_2ph,
    })
}

/// H(t) for given cumulative Stark phases (φ̃01, φ̃12, φ̃02).
fn hamiltonian_with_phases(t: f64, cfg: &ProtocolConfig, stark: [f64; 3]) -> Result<Mat3> {
    let p = &cfg.stirap;
    let env = envelopes_at(t, cfg)?;
    let mut h01 = C64::from_polar(0.5 * env.omega01, p.phi01 + stark[0]);
    let mut h12 = C64::from_polar(0.5 * env.omega12, p.phi12 + stark[1]);
    let mut h02 = c(0.0);
    if let Some(cd) = &cfg.cd {
        match cd.mode {
            CdMode::IdealEffective => {
                let phi20 = phi20_from_two_photon(cd.phi_2ph) + cfg.phase_offset;
                h02 = C64::from_polar(0.5 * env.omega02, -phi20);
            }
            CdMode::TwoPhoton => {
                // Shifting φ2ph by −offset/2 moves φ20, and so Φ, by +offset.
                let phase = cd.phi_2ph - 0.5 * cfg.phase_offset + 0.5 * stark[2];
                let dt = cd.delta * t;
                h01 += C64::from_polar(0.5 * env.omega_2ph, phase - dt);
                h12 += C64::from_polar(0.5 * SQRT_2 * env.omega_2ph, phase + dt);
            }
        }
    }
    Ok(*HamiltonianMatrix::from_couplings(h01, h12, h02).matrix())
}

/// The Hamiltonian at time `t`, with closed-form Stark phases when the
/// correction is active.
pub fn hamiltonian_at(t: f64, cfg: &ProtocolConfig) -> Result<HamiltonianMatrix> {
    let stark = match (&cfg.cd, cfg.stark_active()) {
        (Some(cd), true) => dynamic_phase(t, &cfg.stirap, cd)?,
        _ => [0.0; 3],
    };
    HamiltonianMatrix::new(hamiltonian_with_phases(t, cfg, stark)?)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<QutritState>,
    /// Envelope values at each time; empty for evolutions driven by an
    /// arbitrary Hamiltonian.
    pub envelopes: Vec<EnvelopeSample>,
    pub stats: Stats,
}

impl Trajectory {
    pub fn populations(&self) -> Vec<[f64; 3]> {
        self.states.iter().map(QutritState::populations).collect()
    }

    pub fn final_state(&self) -> &QutritState {
        self.states.last().expect("trajectories are never empty")
    }

    /// The state at a sample time, if `t` is one of them.
    pub fn state_at(&self, t: f64) -> Option<&QutritState> {
        self.times
            .binary_search_by(|x| x.total_cmp(&t))
            .ok()
            .map(|k| &self.states[k])
    }

    pub fn max_population(&self, level: usize) -> f64 {
        self.states
            .iter()
            .map(|s| s.populations()[level])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with populations, coherences and envelopes (in MHz).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t_ns",
            "p0",
            "p1",
            "p2",
            "re_rho01",
            "im_rho01",
            "re_rho02",
            "im_rho02",
            "re_rho12",
            "im_rho12",
            "omega01_mhz",
            "omega12_mhz",
            "omega02_mhz",
            "omega_2ph_mhz",
        ])?;
        for (k, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            let m = s.matrix();
            let e = self.envelopes.get(k).copied().unwrap_or_default();
            let row = [
                *t,
                m[(0, 0)].re,
                m[(1, 1)].re,
                m[(2, 2)].re,
                m[(0, 1)].re,
                m[(0, 1)].im,
                m[(0, 2)].re,
                m[(0, 2)].im,
                m[(1, 2)].re,
                m[(1, 2)].im,
                to_mhz(e.omega01),
                to_mhz(e.omega12),
                to_mhz(e.omega02),
                to_mhz(e.omega_2ph),
            ];
            w.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform grid from `start` to `end` with step `dt`, always ending at `end`,
/// merged with `extra` times inside the range.
pub fn output_grid(start: f64, end: f64, dt: f64, extra: &[f64]) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(end > start) {
        return Err(Error::InvalidParameter(format!("bad grid [{start}, {end}] step {dt}")));
    }
    let n = ((end - start) / dt).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|k| start + k as f64 * dt).collect();
    if end - v[n] > 1e-9 * dt {
        v.push(end);
    } else {
        v[n] = end;
    }
    v.extend(extra.iter().copied().filter(|&t| t > start && t < end));
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * dt);
    Ok(v)
}

fn pack(rho: &Mat3) -> [f64; 9] {
    [
        rho[(0, 0)].re,
        rho[(1, 1)].re,
        rho[(2, 2)].re,
        rho[(0, 1)].re,
        rho[(0, 1)].im,
        rho[(0, 2)].re,
        rho[(0, 2)].im,
        rho[(1, 2)].re,
        rho[(1, 2)].im,
    ]
}

/// Rebuilds ρ from its nine real parameters; Hermitian by construction.
fn unpack(y: &[f64]) -> Mat3 {
    let r01 = C64::new(y[3], y[4]);
    let r02 = C64::new(y[5], y[6]);
    let r12 = C64::new(y[7], y[8]);
    Mat3::new(
        c(y[0]),
        r01,
        r02,
        r01.conj(),
        c(y[1]),
        r12,
        r02.conj(),
        r12.conj(),
        c(y[2]),
    )
}

fn to_states<const N: usize>(ys: &[[f64; N]]) -> Result<Vec<QutritState>> {
    ys.iter().map(|y| QutritState::new(unpack(y))).collect()
}

/// Integrates the master equation under `cfg` and emits the state at every
/// entry of `times`.
///
/// When the Stark correction is active, the three phase integrals are
/// carried as extra state components so they share the integrator's grid.
pub fn evolve_on(cfg: &ProtocolConfig, rho0: &QutritState, times: &[f64]) -> Result<Trajectory> {
    cfg.validate()?;
    let breaks = cfg.stirap.breakpoints();
    let solver = Dopri5::default();
    let rates = cfg.rates;
    let stark = cfg.stark_active();
    let delta = cfg.cd.map_or(1.0, |cd| cd.delta);

    // Configuration errors surface before integration, so the closure can
    // treat envelope evaluation as infallible.
    hamiltonian_with_phases(cfg.t_start, cfg, [0.0; 3])?;

    let mut y0 = [0.0; 12];
    y0[..9].copy_from_slice(&pack(rho0.matrix()));
    let rhs = |t: f64, y: &[f64; 12]| {
        let phases = [y[9], y[10], y[11]];
        let h =
            hamiltonian_with_phases(t, cfg, if stark { phases } else { [0.0; 3] }).expect("validated configuration");
        let d = lindblad_rhs(&h, &unpack(y), &rates);
        let mut out = [0.0; 12];
        out[..9].copy_from_slice(&pack(&d));
        if stark {
            let env = envelopes_at(t, cfg).expect("validated configuration");
            let base = env.omega_2ph * env.omega_2ph / delta;
            out[9] = base;
            out[10] = -1.25 * base;
            out[11] = -0.25 * base;
        }
        out
    };
    let (ys, stats) = solver.solve(rhs, y0, times, &breaks)?;
    let envelopes = times
        .iter()
        .map(|&t| envelopes_at(t, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: times.to_vec(),
        states: to_states(&ys)?,
        envelopes,
        stats,
    })
}

/// Evolves over the configured window with outputs every `dt_out` ns.
pub fn evolve(cfg: &ProtocolConfig, rho0: &QutritState, dt_out: f64) -> Result<Trajectory> {
    evolve_on(cfg, rho0, &output_grid(cfg.t_start, cfg.t_end, dt_out, &[])?)
}

/// Plain STIRAP from the ground state.
pub fn run_stirap(cfg: &ProtocolConfig, dt_out: f64) -> Result<Trajectory> {
    let plain = ProtocolConfig { cd: None, ..*cfg };
    evolve(&plain, &QutritState::ground(), dt_out)
}

/// Master-equation evolution under an arbitrary Hamiltonian `h(t)`, which
/// must be Hermitian. `breakpoints` mark discontinuities of `h`.
pub fn evolve_with<H: Fn(f64) -> Mat3>(
    h: H,
    rates: &DecoherenceRates,
    rho0: &QutritState,
    times: &[f64],
    breakpoints: &[f64],
) -> Result<Trajectory> {
    rates.validate()?;
    let rhs = |t: f64, y: &[f64; 9]| pack(&lindblad_rhs(&h(t), &unpack(y), rates));
    let (ys, stats) = Dopri5::default().solve(rhs, pack(rho0.matrix()), times, breakpoints)?;
    Ok(Trajectory {
        times: times.to_vec(),
        states: to_states(&ys)?,
        envelopes: Vec::new(),
        stats,
    })
}

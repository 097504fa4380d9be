//! Sampled intermediate-frequency control waveforms.
//!
//! Each drive is produced by single-sideband mixing of an IF quadrature
//! pair with a common local oscillator: RF = I·cos(ω_LO t) − Q·sin(ω_LO t).
//! The IF magnitude is |ω_LO − ω| and its sign selects the sideband, so the
//! mixed tone always lands on the intended transition frequency ω.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::ProtocolConfig;
use crate::pulses::{dynamic_phase, stirap_envelopes, two_photon_envelope};
use crate::{Error, Result};

/// Resonance drift tolerated by [`phase_lock_check`], rad.
pub const PHASE_LOCK_TOL: f64 = 1e-12;
const I16_FULL: f64 = i16::MAX as f64;
const HEADER_END: &str = "END_HEADER";
const CHANNELS: [&str; 6] = ["I01", "Q01", "I12", "Q12", "I2ph", "Q2ph"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformConfig {
    /// Local-oscillator frequency, rad/ns.
    pub lo_freq: f64,
    pub omega01_freq: f64,
    pub omega12_freq: f64,
    /// Two-photon tone; `None` places it on (ω01 + ω12)/2.
    pub omega_2ph_freq: Option<f64>,
    /// Samples per ns.
    pub sample_rate: f64,
    /// Rabi rate per volt (rad/ns/V) for the 01, 12 and two-photon drives.
    pub calibration: [f64; 3],
    /// Peak amplitudes in volts; `None` derives them from the protocol's
    /// Rabi peaks through `calibration`.
    pub amplitudes: Option<[f64; 3]>,
    /// Voltage mapped to the largest 16-bit code on export.
    pub full_scale: f64,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self {
            lo_freq: TAU * 6.92,
            omega01_freq: TAU * 6.99,
            omega12_freq: TAU * 6.62,
            omega_2ph_freq: None,
            sample_rate: 2.0,
            calibration: [0.5, 0.5, 0.5],
            amplitudes: None,
            full_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sideband {
    /// Tone at ω_LO + IF.
    Upper,
    /// Tone at ω_LO − IF.
    Lower,
}

impl Sideband {
    fn sign(self) -> f64 {
        match self {
            Self::Upper => 1.0,
            Self::Lower => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tone {
    Pump01,
    Stokes12,
    TwoPhoton,
}

impl WaveformConfig {
    pub fn omega_2ph(&self) -> f64 {
        self.omega_2ph_freq
            .unwrap_or(0.5 * (self.omega01_freq + self.omega12_freq))
    }

    pub fn carrier(&self, tone: Tone) -> f64 {
        match tone {
            Tone::Pump01 => self.omega01_freq,
            Tone::Stokes12 => self.omega12_freq,
            Tone::TwoPhoton => self.omega_2ph(),
        }
    }

    /// |ω_LO − ω| and the sideband that carries ω.
    pub fn intermediate(&self, tone: Tone) -> (f64, Sideband) {
        let diff = self.carrier(tone) - self.lo_freq;
        let side = if diff >= 0.0 { Sideband::Upper } else { Sideband::Lower };
        (diff.abs(), side)
    }

    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.sample_rate
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidParameter("sample_rate must be > 0".into()));
        }
        if !(self.full_scale > 0.0) {
            return Err(Error::InvalidParameter("full_scale must be > 0".into()));
        }
        if self.calibration.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::InvalidParameter("calibration coefficients must be > 0".into()));
        }
        if let Some(a) = self.amplitudes {
            if a.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::InvalidParameter("amplitudes must be >= 0".into()));
            }
        }
        for tone in [Tone::Pump01, Tone::Stokes12, Tone::TwoPhoton] {
            let (freq, _) = self.intermediate(tone);
            if !(freq > 0.0) {
                return Err(Error::InvalidParameter(format!("{tone:?} sits on the LO")));
            }
            if freq >= self.nyquist() {
                return Err(Error::Nyquist {
                    freq,
                    nyquist: self.nyquist(),
                });
            }
        }
        Ok(())
    }
}

/// One drive's SSB quadrature pair on a uniform grid starting at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    pub tone: Tone,
    pub if_freq: f64,
    pub sideband: Sideband,
    pub sample_rate: f64,
    pub t0: f64,
    /// Envelope in volts.
    pub envelope: Vec<f64>,
    pub i_samples: Vec<f64>,
    pub q_samples: Vec<f64>,
}

impl SampledWaveform {
    /// The programmed waveform Ã(t), which is the in-phase channel.
    pub fn samples(&self) -> &[f64] {
        &self.i_samples
    }

    pub fn len(&self) -> usize {
        self.i_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i_samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.sample_rate
    }

    /// Ideal upconversion I·cos(ω_LO t) − Q·sin(ω_LO t).
    pub fn mix_with_lo(&self, lo_freq: f64) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (s, c) = (lo_freq * self.time(k)).sin_cos();
                self.i_samples[k] * c - self.q_samples[k] * s
            })
            .collect()
    }
}

fn sample_times(proto: &ProtocolConfig, rate: f64) -> Vec<f64> {
    let n = ((proto.t_end - proto.t_start) * rate).floor() as usize + 1;
    (0..n).map(|k| proto.t_start + k as f64 / rate).collect()
}

fn quadrature_pair(
    tone: Tone,
    cfg: &WaveformConfig,
    times: &[f64],
    envelope: Vec<f64>,
    phase: impl Fn(usize) -> f64,
) -> SampledWaveform {
    let (if_freq, sideband) = cfg.intermediate(tone);
    let signed = sideband.sign() * if_freq;
    let (i_samples, q_samples) = times
        .iter()
        .zip(&envelope)
        .enumerate()
        .map(|(k, (&t, &a))| {
            let arg = signed * t + phase(k);
            (a * arg.sin(), a * (arg - FRAC_PI_2).sin())
        })
        .unzip();
    SampledWaveform {
        tone,
        if_freq,
        sideband,
        sample_rate: cfg.sample_rate,
        t0: times.first().copied().unwrap_or(0.0),
        envelope,
        i_samples,
        q_samples,
    }
}

/// Samples the 01, 12 and two-photon drives over the protocol window.
///
/// The drive phases carry the cumulative Stark phases (φ̃01, φ̃12, φ̃02/2)
/// whenever `stark_correction` is set and a two-photon tone exists, since
/// the hardware always realizes the 0–2 coupling through that tone.
pub fn synth_waveforms(cfg: &WaveformConfig, proto: &ProtocolConfig) -> Result<[SampledWaveform; 3]> {
    cfg.validate()?;
    proto.validate()?;
    let p = &proto.stirap;
    let times = sample_times(proto, cfg.sample_rate);

    let peak_2ph = match &proto.cd {
        Some(cd) => cd.omega_2ph_peak(p)?,
        None => 0.0,
    };
    let peaks = [p.omega01_peak, p.omega12_peak, peak_2ph];
    let volts = cfg
        .amplitudes
        .unwrap_or_else(|| std::array::from_fn(|k| peaks[k] / cfg.calibration[k]));
    let gain: [f64; 3] = std::array::from_fn(|k| if peaks[k] == 0.0 { 0.0 } else { volts[k] / peaks[k] });

    let mut env01 = Vec::with_capacity(times.len());
    let mut env12 = Vec::with_capacity(times.len());
    let mut env2ph = Vec::with_capacity(times.len());
    let mut stark = Vec::with_capacity(times.len());
    for &t in &times {
        let (o01, o12) = stirap_envelopes(t, p);
        env01.push(gain[0] * o01);
        env12.push(gain[1] * o12);
        match &proto.cd {
            Some(cd) => {
                env2ph.push(gain[2] * two_photon_envelope(t, p, cd)?);
                stark.push(if proto.stark_correction {
                    dynamic_phase(t, p, cd)?
                } else {
                    [0.0; 3]
                });
            }
            None => {
                env2ph.push(0.0);
                stark.push([0.0; 3]);
            }
        }
    }
    let phi_2ph = proto.cd.map_or(0.0, |cd| cd.phi_2ph);
    Ok([
        quadrature_pair(Tone::Pump01, cfg, &times, env01, |k| p.phi01 + stark[k][0]),
        quadrature_pair(Tone::Stokes12, cfg, &times, env12, |k| p.phi12 + stark[k][1]),
        quadrature_pair(Tone::TwoPhoton, cfg, &times, env2ph, |k| phi_2ph + 0.5 * stark[k][2]),
    ])
}

/// Drive phases entering the phase-lock relation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ToneLockPhases {
    pub phi01: f64,
    pub phi12: f64,
    pub phi_2ph: f64,
}

/// [2ω2ph(t − t_ref) + 2φ2ph] − [(ω01 + ω12)(t − t_ref) + φ01 + φ12].
///
/// Returns the value at `t_ref`, which fixes the loop phase as
/// Φ = −value − π, after checking that it has not drifted by time `t`.
pub fn phase_lock_check(cfg: &WaveformConfig, phases: &ToneLockPhases, t_ref: f64, t: f64) -> Result<f64> {
    let rate = 2.0 * cfg.omega_2ph() - cfg.omega01_freq - cfg.omega12_freq;
    let drift = rate * (t - t_ref);
    if drift.abs() > PHASE_LOCK_TOL {
        return Err(Error::ResonanceViolated { drift });
    }
    Ok(2.0 * phases.phi_2ph - phases.phi01 - phases.phi12)
}

/// Quantized multi-channel waveform as written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformFile {
    pub sample_rate: f64,
    pub t0: f64,
    pub full_scale: f64,
    pub channels: Vec<String>,
    /// `codes[c][k]` is sample k of channel c.
    pub codes: Vec<Vec<i16>>,
}

impl WaveformFile {
    /// Quantizes the I/Q pairs of the three drives; fails if any sample
    /// exceeds the full-scale voltage.
    pub fn from_waveforms(waves: &[SampledWaveform; 3], full_scale: f64) -> Result<Self> {
        if !(full_scale > 0.0) {
            return Err(Error::InvalidParameter("full_scale must be > 0".into()));
        }
        let quantize = |v: &[f64]| -> Result<Vec<i16>> {
            v.iter()
                .map(|&x| {
                    if x.abs() > full_scale {
                        Err(Error::InvalidParameter(format!(
                            "sample {x} V exceeds full scale {full_scale} V"
                        )))
                    } else {
                        Ok((x / full_scale * I16_FULL).round() as i16)
                    }
                })
                .collect()
        };
        let codes = waves
            .iter()
            .flat_map(|w| [&w.i_samples, &w.q_samples])
            .map(|v| quantize(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sample_rate: waves[0].sample_rate,
            t0: waves[0].t0,
            full_scale,
            channels: CHANNELS.iter().map(|s| s.to_string()).collect(),
            codes,
        })
    }

    pub fn samples(&self) -> usize {
        self.codes.first().map_or(0, Vec::len)
    }

    pub fn volts(&self, channel: usize) -> Vec<f64> {
        self.codes[channel]
            .iter()
            .map(|&c| f64::from(c) / I16_FULL * self.full_scale)
            .collect()
    }

    /// Text header terminated by `END_HEADER`, then little-endian i16
    /// samples interleaved across channels.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "sample_rate={:?}", self.sample_rate)?;
        writeln!(out, "t0={:?}", self.t0)?;
        writeln!(out, "full_scale={:?}", self.full_scale)?;
        writeln!(out, "channels={}", self.channels.join(","))?;
        writeln!(out, "samples={}", self.samples())?;
        writeln!(out, "{HEADER_END}")?;
        let mut bytes = Vec::with_capacity(2 * self.samples() * self.channels.len());
        for k in 0..self.samples() {
            for ch in &self.codes {
                bytes.extend_from_slice(&ch[k].to_le_bytes());
            }
        }
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn read<R: BufRead>(mut input: R) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        loop {
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                return Err(Error::Parse(format!("missing {HEADER_END}")));
            }
            let line = line.trim_end();
            if line == HEADER_END {
                break;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header line {line:?}")))?;
            fields.insert(key.to_string(), value.to_string());
        }
        let get = |key: &str| {
            fields
                .get(key)
                .ok_or_else(|| Error::Parse(format!("header lacks {key}")))
        };
        let num = |key: &str| -> Result<f64> { get(key)?.parse().map_err(|_| Error::Parse(format!("bad {key}"))) };
        let channels: Vec<String> = get("channels")?.split(',').map(str::to_string).collect();
        let samples: usize = get("samples")?
            .parse()
            .map_err(|_| Error::Parse("bad samples".into()))?;
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() != 2 * samples * channels.len() {
            return Err(Error::Parse(format!(
                "expected {} data bytes, found {}",
                2 * samples * channels.len(),
                bytes.len()
            )));
        }
        let mut codes = vec![Vec::with_capacity(samples); channels.len()];
        for (i, pair) in bytes.chunks_exact(2).enumerate() {
            codes[i % channels.len()].push(i16::from_le_bytes([pair[0], pair[1]]));
        }
        Ok(Self {
            sample_rate: num("sample_rate")?,
            t0: num("t0")?,
            full_scale: num("full_scale")?,
            channels,
            codes,
        })
    }
}

/// Debug export: one row per sample, volts for all six channels.
pub fn write_waveforms_csv<W: Write>(out: W, waves: &[SampledWaveform; 3]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t_ns"];
    header.extend(CHANNELS);
    w.write_record(&header)?;
    for k in 0..waves[0].len() {
        let mut row = vec![format!("{:?}", waves[0].time(k))];
        for wave in waves {
            row.push(format!("{:?}", wave.i_samples[k]));
            row.push(format!("{:?}", wave.q_samples[k]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

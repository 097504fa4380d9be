//! TOML run configuration in laboratory units.
//!
//! Frequencies are Ω/(2π) in MHz (carriers in GHz), times in ns, phases in
//! units of π and decay rates in 1/µs. [`RunConfig::from_toml`] resolves the
//! file into internal rad/ns types.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::ProtocolConfig;
use crate::pulses::{CdMode, CounterdiabaticParams, StirapParams};
use crate::sweep::{Output, SweepAxis, SweepGrid, SweepParam};
use crate::tomography::{LeakageCorrections, ReadoutModel};
use crate::units::{ghz, mhz, pi_units, rate_per_us};
use crate::waveform::WaveformConfig;
use crate::{DecoherenceRates, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StirapSection {
    pub omega01_mhz: f64,
    pub omega12_mhz: f64,
    pub sigma_ns: f64,
    pub t_s_ns: f64,
    #[serde(default)]
    pub phi01_pi: f64,
    #[serde(default)]
    pub phi12_pi: f64,
}

impl Default for StirapSection {
    fn default() -> Self {
        Self {
            omega01_mhz: 25.5,
            omega12_mhz: 25.5,
            sigma_ns: 20.0,
            t_s_ns: -30.0,
            phi01_pi: 0.0,
            phi12_pi: 0.0,
        }
    }
}

fn default_mode() -> CdMode {
    CdMode::IdealEffective
}
fn default_phi_2ph() -> f64 {
    -0.25
}
fn default_delta() -> f64 {
    185.0
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterdiabaticSection {
    #[serde(default = "default_mode")]
    pub mode: CdMode,
    /// Peak two-photon Rabi rate; derived from the ideal drive when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_2ph_mhz: Option<f64>,
    #[serde(default = "default_phi_2ph")]
    pub phi_2ph_pi: f64,
    #[serde(default = "default_delta")]
    pub delta_mhz: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

impl Default for CounterdiabaticSection {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            omega_2ph_mhz: None,
            phi_2ph_pi: default_phi_2ph(),
            delta_mhz: default_delta(),
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceSection {
    #[serde(default)]
    pub gamma01_per_us: f64,
    #[serde(default)]
    pub gamma12_per_us: f64,
    #[serde(default)]
    pub gamma_phi01_per_us: f64,
    #[serde(default)]
    pub gamma_phi12_per_us: f64,
}

fn default_dt_out() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(default)]
    pub phase_offset_pi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end_ns: Option<f64>,
    #[serde(default = "yes")]
    pub stark_correction: bool,
    #[serde(default = "default_dt_out")]
    pub dt_out_ns: f64,
    /// Time at which sweep populations are read; the window end if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout_ns: Option<f64>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            phase_offset_pi: 0.0,
            t_start_ns: None,
            t_end_ns: None,
            stark_correction: true,
            dt_out_ns: default_dt_out(),
            readout_ns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformSection {
    pub lo_ghz: f64,
    pub omega01_ghz: f64,
    pub omega12_ghz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_2ph_ghz: Option<f64>,
    pub sample_rate_per_ns: f64,
    /// Ω/(2π) in MHz produced by one volt, per drive (01, 12, two-photon).
    pub calibration_mhz_per_v: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes_v: Option<[f64; 3]>,
    pub full_scale_v: f64,
}

impl Default for WaveformSection {
    fn default() -> Self {
        Self {
            lo_ghz: 6.92,
            omega01_ghz: 6.99,
            omega12_ghz: 6.62,
            omega_2ph_ghz: None,
            sample_rate_per_ns: 2.0,
            calibration_mhz_per_v: [100.0, 100.0, 200.0],
            amplitudes_v: None,
            full_scale_v: 1.0,
        }
    }
}

impl WaveformSection {
    pub fn resolve(&self) -> WaveformConfig {
        WaveformConfig {
            lo_freq: ghz(self.lo_ghz),
            omega01_freq: ghz(self.omega01_ghz),
            omega12_freq: ghz(self.omega12_ghz),
            omega_2ph_freq: self.omega_2ph_ghz.map(ghz),
            sample_rate: self.sample_rate_per_ns,
            calibration: self.calibration_mhz_per_v.map(mhz),
            amplitudes: self.amplitudes_v,
            full_scale: self.full_scale_v,
        }
    }
}

/// Axis given either as explicit values or as an inclusive linear range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub param: SweepParam,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

impl AxisSection {
    pub fn resolve(&self) -> Result<SweepAxis> {
        match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => SweepAxis::new(self.param, v.clone()),
            (None, Some(a), Some(b), Some(n)) => SweepAxis::linspace(self.param, a, b, n),
            _ => Err(Error::InvalidParameter(format!(
                "axis {} needs either `values` or `start`, `stop` and `points`",
                self.param
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis1: AxisSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis2: Option<AxisSection>,
    pub outputs: Vec<Output>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn default_noise() -> f64 {
    0.02
}
fn default_leakage() -> [f64; 3] {
    [0.01, 0.01, 0.02]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographySection {
    /// Standard deviation of the readout noise, in trace units.
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// (ζ01, ζ12, ζ02).
    #[serde(default = "default_leakage")]
    pub leakage: [f64; 3],
    #[serde(default = "yes")]
    pub constrained: bool,
}

impl Default for TomographySection {
    fn default() -> Self {
        Self {
            noise_sigma: default_noise(),
            seed: 0,
            leakage: default_leakage(),
            constrained: true,
        }
    }
}

impl TomographySection {
    pub fn leakage(&self) -> Result<LeakageCorrections> {
        let [z01, z12, z02] = self.leakage;
        LeakageCorrections::new(z01, z12, z02)
    }

    pub fn readout_model(&self) -> ReadoutModel {
        ReadoutModel::default()
    }
}

/// The file as written; every section may be omitted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub stirap: StirapSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterdiabatic: Option<CounterdiabaticSection>,
    #[serde(default)]
    pub decoherence: DecoherenceSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub waveform: WaveformSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub tomography: TomographySection,
}

/// A resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub file: ConfigFile,
    pub protocol: ProtocolConfig,
    pub dt_out: f64,
    pub readout: Option<f64>,
    pub waveform: WaveformConfig,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn protocol(&self) -> Result<ProtocolConfig> {
        let s = &self.stirap;
        let stirap = StirapParams {
            omega01_peak: mhz(s.omega01_mhz),
            omega12_peak: mhz(s.omega12_mhz),
            sigma: s.sigma_ns,
            t_s: s.t_s_ns,
            phi01: pi_units(s.phi01_pi),
            phi12: pi_units(s.phi12_pi),
        };
        let cd = self.counterdiabatic.as_ref().map(|c| CounterdiabaticParams {
            mode: c.mode,
            omega_2ph_peak: c.omega_2ph_mhz.map(mhz),
            phi_2ph: pi_units(c.phi_2ph_pi),
            delta: mhz(c.delta_mhz),
            scale: c.scale,
        });
        let d = &self.decoherence;
        let rates = DecoherenceRates {
            gamma01: rate_per_us(d.gamma01_per_us),
            gamma12: rate_per_us(d.gamma12_per_us),
            gamma_phi01: rate_per_us(d.gamma_phi01_per_us),
            gamma_phi12: rate_per_us(d.gamma_phi12_per_us),
        };
        let mut cfg = ProtocolConfig::new(stirap, cd, rates);
        let p = &self.protocol;
        cfg.phase_offset = pi_units(p.phase_offset_pi);
        cfg.stark_correction = p.stark_correction;
        if let Some(t) = p.t_start_ns {
            cfg.t_start = t;
        }
        if let Some(t) = p.t_end_ns {
            cfg.t_end = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(self) -> Result<RunConfig> {
        let protocol = self.protocol()?;
        if !(self.protocol.dt_out_ns > 0.0) {
            return Err(Error::InvalidParameter("dt_out_ns must be > 0".into()));
        }
        let waveform = self.waveform.resolve();
        waveform.validate()?;
        self.tomography.leakage()?;
        Ok(RunConfig {
            dt_out: self.protocol.dt_out_ns,
            readout: self.protocol.readout_ns,
            protocol,
            waveform,
            file: self,
        })
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        ConfigFile::parse(text)?.resolve()
    }

    pub fn load(path: &Path) -> Result<Self> {
        ConfigFile::load(path)?.resolve()
    }

    /// The sweep described by the `[sweep]` section.
    pub fn sweep_grid(&self) -> Result<SweepGrid> {
        let s = self
            .file
            .sweep
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("the config has no [sweep] section".into()))?;
        let axis2 = s.axis2.as_ref().map(AxisSection::resolve).transpose()?;
        let mut grid = SweepGrid::new(s.axis1.resolve()?, axis2, self.protocol, s.outputs.clone());
        grid.dt_out = self.dt_out;
        grid.readout = self.readout;
        grid.validate()?;
        Ok(grid)
    }

    /// The resolved file as TOML, one line per entry, for output preambles.
    pub fn echo(&self) -> Result<Vec<String>> {
        Ok(self.file.to_toml()?.lines().map(str::to_string).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::to_mhz;
    use std::f64::consts::FRAC_PI_4;

    const EXAMPLE: &str = r#"
[stirap]
omega01_mhz = 25.5
omega12_mhz = 25.5
sigma_ns = 20
t_s_ns = -30

[counterdiabatic]
mode = "two-photon"
phi_2ph_pi = -0.25
delta_mhz = 185

[decoherence]
gamma01_per_us = 0.6
gamma12_per_us = 0.83

[protocol]
dt_out_ns = 0.5
readout_ns = 20

[sweep]
axis1 = { param = "sigma", start = 10, stop = 40, points = 4 }
axis2 = { param = "ts_over_sigma", values = [-1.0, -2.0] }
outputs = ["p2", "t_transfer_09_ns"]
"#;

    #[test]
    fn resolves_units() {
        let run = RunConfig::from_toml(EXAMPLE).unwrap();
        let p = &run.protocol;
        assert!((to_mhz(p.stirap.omega01_peak) - 25.5).abs() < 1e-12);
        let cd = p.cd.unwrap();
        assert_eq!(cd.mode, CdMode::TwoPhoton);
        assert!((cd.phi_2ph + FRAC_PI_4).abs() < 1e-15);
        assert!((p.rates.gamma12 - 0.83e-3).abs() < 1e-18);
        assert_eq!(run.readout, Some(20.0));
        let g = run.sweep_grid().unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g.axis1.values, vec![10.0, 20.0, 30.0, 40.0]);
        assert_eq!(g.dt_out, 0.5);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = EXAMPLE.replace("sigma_ns = 20", "sigma_ns = 20\nsigma_typo = 1");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::Parse(_))));
        let bad = EXAMPLE.replace("param = \"sigma\"", "param = \"tau\"");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let run = RunConfig::from_toml(EXAMPLE).unwrap();
        let again = RunConfig::from_toml(&run.echo().unwrap().join("\n")).unwrap();
        assert_eq!(again, run);
    }

    #[test]
    fn empty_file_uses_defaults() {
        let run = RunConfig::from_toml("").unwrap();
        assert!(run.protocol.cd.is_none());
        assert!(run.protocol.rates.is_zero());
        assert!(run.sweep_grid().is_err());
    }

    #[test]
    fn axis_needs_one_form() {
        let a = AxisSection {
            param: SweepParam::Sigma,
            values: Some(vec![1.0]),
            start: Some(0.0),
            stop: None,
            points: None,
        };
        assert!(a.resolve().is_err());
    }
}

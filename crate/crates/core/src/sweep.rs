//! One- and two-dimensional parameter sweeps and the figure presets.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adiabatic::{max_adiabaticity_ratio, t_qsl, transfer_time, THETA_FINAL, THETA_INITIAL};
use crate::dynamics::{evolve_on, output_grid, ProtocolConfig, Trajectory};
use crate::gauge::two_photon_phase_for;
use crate::pulses::{pulse_areas, CdMode, CounterdiabaticParams, StirapParams};
use crate::units::{mhz, pi_units, rate_per_us};
use crate::{DecoherenceRates, Error, QutritState, Result};

/// Samples used for the adiabaticity maximum.
const ADIABATICITY_SAMPLES: usize = 2001;

/// Sweepable parameters. Declaration order is the order in which the values
/// of a grid point are applied, so that σ is set before t_s/σ, STIRAP
/// phases before Φ, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    /// σ in ns; t_s is kept unless `ts_over_sigma` is also swept.
    #[serde(rename = "sigma")]
    Sigma,
    /// Signed t_s/σ.
    #[serde(rename = "ts_over_sigma")]
    TsOverSigma,
    /// Both STIRAP peaks, Ω/(2π) in MHz.
    #[serde(rename = "omega_peaks")]
    OmegaPeaks,
    /// Multiplier on both STIRAP peaks.
    #[serde(rename = "A_scale")]
    AScale,
    /// φ01 in units of π.
    #[serde(rename = "phi01")]
    Phi01,
    /// φ12 in units of π.
    #[serde(rename = "phi12")]
    Phi12,
    /// φ2ph in units of π.
    #[serde(rename = "phi_2ph")]
    Phi2ph,
    /// Multiplier on the counterdiabatic envelope.
    #[serde(rename = "A02_scale")]
    A02Scale,
    /// Loop phase in units of π, realized through φ2ph.
    #[serde(rename = "Phi")]
    LoopPhase,
}

impl SweepParam {
    pub const ALL: [Self; 9] = [
        Self::Sigma,
        Self::TsOverSigma,
        Self::OmegaPeaks,
        Self::AScale,
        Self::Phi01,
        Self::Phi12,
        Self::Phi2ph,
        Self::A02Scale,
        Self::LoopPhase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sigma => "sigma",
            Self::TsOverSigma => "ts_over_sigma",
            Self::OmegaPeaks => "omega_peaks",
            Self::AScale => "A_scale",
            Self::Phi01 => "phi01",
            Self::Phi12 => "phi12",
            Self::Phi2ph => "phi_2ph",
            Self::A02Scale => "A02_scale",
            Self::LoopPhase => "Phi",
        }
    }

    /// Column heading including the unit of the swept values.
    pub fn column(self) -> &'static str {
        match self {
            Self::Sigma => "sigma_ns",
            Self::TsOverSigma => "ts_over_sigma",
            Self::OmegaPeaks => "omega_peaks_mhz",
            Self::AScale => "A_scale",
            Self::Phi01 => "phi01_pi",
            Self::Phi12 => "phi12_pi",
            Self::Phi2ph => "phi_2ph_pi",
            Self::A02Scale => "A02_scale",
            Self::LoopPhase => "Phi_pi",
        }
    }

    fn cd_mut<'a>(cfg: &'a mut ProtocolConfig, name: &str) -> Result<&'a mut CounterdiabaticParams> {
        cfg.cd
            .as_mut()
            .ok_or_else(|| Error::InvalidParameter(format!("{name} needs a counterdiabatic drive")))
    }

    /// Sets this parameter on `cfg`; the window is not touched.
    pub fn apply(self, cfg: &mut ProtocolConfig, value: f64) -> Result<()> {
        let p = &mut cfg.stirap;
        match self {
            Self::Sigma => p.sigma = value,
            Self::TsOverSigma => p.t_s = value * p.sigma,
            Self::OmegaPeaks => {
                p.omega01_peak = mhz(value);
                p.omega12_peak = mhz(value);
            }
            Self::AScale => {
                p.omega01_peak *= value;
                p.omega12_peak *= value;
            }
            Self::Phi01 => p.phi01 = pi_units(value),
            Self::Phi12 => p.phi12 = pi_units(value),
            Self::Phi2ph => Self::cd_mut(cfg, self.name())?.phi_2ph = pi_units(value),
            Self::A02Scale => Self::cd_mut(cfg, self.name())?.scale = value,
            Self::LoopPhase => {
                let (phi01, phi12) = (p.phi01, p.phi12);
                Self::cd_mut(cfg, self.name())?.phi_2ph = two_photon_phase_for(phi01, phi12, pi_units(value));
            }
        }
        Ok(())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "sweep parameter",
                name: s.into(),
            })
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Output {
    #[serde(rename = "p0")]
    P0,
    #[serde(rename = "p1")]
    P1,
    #[serde(rename = "p2")]
    P2,
    #[serde(rename = "max_p1")]
    MaxP1,
    #[serde(rename = "t_transfer_09_ns")]
    TransferTime,
    #[serde(rename = "t_qsl_ns")]
    SpeedLimit,
    #[serde(rename = "area_A")]
    AreaStirap,
    #[serde(rename = "area_A02")]
    AreaCd,
    #[serde(rename = "max_adiabaticity_ratio")]
    MaxAdiabaticity,
}

impl Output {
    pub const ALL: [Self; 9] = [
        Self::P0,
        Self::P1,
        Self::P2,
        Self::MaxP1,
        Self::TransferTime,
        Self::SpeedLimit,
        Self::AreaStirap,
        Self::AreaCd,
        Self::MaxAdiabaticity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::P0 => "p0",
            Self::P1 => "p1",
            Self::P2 => "p2",
            Self::MaxP1 => "max_p1",
            Self::TransferTime => "t_transfer_09_ns",
            Self::SpeedLimit => "t_qsl_ns",
            Self::AreaStirap => "area_A",
            Self::AreaCd => "area_A02",
            Self::MaxAdiabaticity => "max_adiabaticity_ratio",
        }
    }

    fn needs_evolution(self) -> bool {
        matches!(self, Self::P0 | Self::P1 | Self::P2 | Self::MaxP1 | Self::TransferTime)
    }
}

impl FromStr for Output {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "sweep output",
                name: s.into(),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(param: SweepParam, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(format!("axis {param} has no values")));
        }
        Ok(Self { param, values })
    }

    /// `points` evenly spaced values from `start` to `stop` inclusive.
    pub fn linspace(param: SweepParam, start: f64, stop: f64, points: usize) -> Result<Self> {
        let values = match points {
            0 => Vec::new(),
            1 => vec![start],
            n => (0..n)
                .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
                .collect(),
        };
        Self::new(param, values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub axis1: SweepAxis,
    pub axis2: Option<SweepAxis>,
    pub base: ProtocolConfig,
    pub outputs: Vec<Output>,
    /// Sampling step of the trajectories, ns.
    pub dt_out: f64,
    /// Time at which p0, p1, p2 are read; `None` reads the end of the window.
    pub readout: Option<f64>,
}

impl SweepGrid {
    pub fn new(axis1: SweepAxis, axis2: Option<SweepAxis>, base: ProtocolConfig, outputs: Vec<Output>) -> Self {
        Self {
            axis1,
            axis2,
            base,
            outputs,
            dt_out: 0.1,
            readout: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a2) = &self.axis2 {
            if a2.param == self.axis1.param {
                return Err(Error::InvalidParameter(format!("{} is swept twice", a2.param)));
            }
        }
        if self.outputs.is_empty() {
            return Err(Error::InvalidParameter("no outputs requested".into()));
        }
        if !(self.dt_out > 0.0) {
            return Err(Error::InvalidParameter("dt_out must be > 0".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axis1.values.len() * self.axis2.as_ref().map_or(1, |a| a.values.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Axis values of every point, axis1-major.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        for &v1 in &self.axis1.values {
            match &self.axis2 {
                None => out.push(vec![v1]),
                Some(a2) => out.extend(a2.values.iter().map(|&v2| vec![v1, v2])),
            }
        }
        out
    }

    fn params(&self) -> Vec<SweepParam> {
        std::iter::once(self.axis1.param)
            .chain(self.axis2.as_ref().map(|a| a.param))
            .collect()
    }

    /// The protocol at one grid point, with the window refit to the pulses.
    pub fn config_at(&self, values: &[f64]) -> Result<ProtocolConfig> {
        let mut pairs: Vec<(SweepParam, f64)> = self.params().into_iter().zip(values.iter().copied()).collect();
        pairs.sort_by_key(|(p, _)| *p);
        let mut cfg = self.base;
        for (param, value) in pairs {
            param.apply(&mut cfg, value)?;
        }
        let cfg = cfg.with_default_window();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn columns(&self) -> Vec<String> {
        self.params()
            .iter()
            .map(|p| p.column().to_string())
            .chain(self.outputs.iter().map(|o| o.name().to_string()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub values: Vec<f64>,
    /// Set when the point failed; its values are then NaN.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// Comment lines written above the header.
    pub preamble: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// CSV with `#`-prefixed preamble lines and a trailing `error` column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for line in &self.preamble {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns.iter().map(String::as_str).chain(["error"]))?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.values.iter().map(|v| format!("{v:?}")).collect();
            rec.push(row.error.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn readout_populations(traj: &Trajectory, readout: Option<f64>) -> Result<[f64; 3]> {
    match readout {
        None => Ok(traj.final_state().populations()),
        Some(t) => traj
            .state_at(t)
            .map(QutritState::populations)
            .ok_or_else(|| Error::InvalidParameter(format!("readout time {t} ns lies outside the window"))),
    }
}

/// Evaluates the requested outputs for one protocol.
pub fn evaluate(cfg: &ProtocolConfig, outputs: &[Output], dt_out: f64, readout: Option<f64>) -> Result<Vec<f64>> {
    let traj = if outputs.iter().any(|o| o.needs_evolution()) {
        let extra: Vec<f64> = readout.into_iter().collect();
        let times = output_grid(cfg.t_start, cfg.t_end, dt_out, &extra)?;
        Some(evolve_on(cfg, &QutritState::ground(), &times)?)
    } else {
        None
    };
    let omega02_max = match &cfg.cd {
        Some(cd) => cd.omega02_peak(&cfg.stirap)?,
        None => 0.0,
    };
    let pops = traj.as_ref().map(|t| readout_populations(t, readout)).transpose()?;
    let areas = pulse_areas(&cfg.stirap, cfg.cd.as_ref())?;
    outputs
        .iter()
        .map(|o| {
            let traj = traj.as_ref();
            Ok(match o {
                Output::P0 => pops.expect("evolved")[0],
                Output::P1 => pops.expect("evolved")[1],
                Output::P2 => pops.expect("evolved")[2],
                Output::MaxP1 => traj.expect("evolved").max_population(1),
                Output::TransferTime => {
                    let traj = traj.expect("evolved");
                    transfer_time(&traj.times, &traj.populations()).unwrap_or(f64::NAN)
                }
                Output::SpeedLimit if omega02_max > 0.0 => t_qsl(omega02_max, THETA_INITIAL, THETA_FINAL)?,
                Output::SpeedLimit => f64::NAN,
                Output::AreaStirap => areas.stirap,
                Output::AreaCd => areas.counterdiabatic,
                Output::MaxAdiabaticity => max_adiabaticity_ratio(&cfg.stirap, ADIABATICITY_SAMPLES),
            })
        })
        .collect()
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Evaluates every grid point on a pool of `workers` threads (default: all
/// cores). Failed points become rows with NaN values and an error message.
pub fn run_sweep(grid: &SweepGrid, workers: Option<usize>) -> Result<ResultTable> {
    grid.validate()?;
    let points = grid.points();
    let rows = pool(workers)?.install(|| {
        points
            .par_iter()
            .map(|values| {
                let result = grid
                    .config_at(values)
                    .and_then(|cfg| evaluate(&cfg, &grid.outputs, grid.dt_out, grid.readout));
                let (outs, error) = match result {
                    Ok(v) => (v, None),
                    Err(e) => (vec![f64::NAN; grid.outputs.len()], Some(e.to_string())),
                };
                ResultRow {
                    values: values.iter().copied().chain(outs).collect(),
                    error,
                }
            })
            .collect()
    });
    Ok(ResultTable {
        preamble: Vec::new(),
        columns: grid.columns(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Time traces of STIRAP and saSTIRAP.
    Fig2,
    /// Transfer time over σ and t_s/σ, plain STIRAP.
    Fig3a,
    /// As [`Figure::Fig3a`] with the counterdiabatic drive.
    Fig3b,
    /// p2 over (φ12, φ2ph).
    Fig4a,
    /// p2 over (φ01, φ2ph).
    Fig4b,
    /// p2 over (φ12, φ01).
    Fig4c,
    /// p2 over the counterdiabatic area and φ2ph.
    Fig5,
    /// p2 over the STIRAP and counterdiabatic areas.
    Fig6,
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fig2" => Self::Fig2,
            "fig3a" => Self::Fig3a,
            "fig3b" => Self::Fig3b,
            "fig4" | "fig4a" => Self::Fig4a,
            "fig4b" => Self::Fig4b,
            "fig4c" => Self::Fig4c,
            "fig5" => Self::Fig5,
            "fig6" => Self::Fig6,
            _ => {
                return Err(Error::Unknown {
                    kind: "figure preset",
                    name: s.into(),
                })
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FigureOverrides {
    pub mode: Option<CdMode>,
    pub no_decoherence: bool,
    /// Points per axis.
    pub points: Option<usize>,
}

/// Points per axis of the figure grids.
pub const FIGURE_POINTS: usize = 41;
/// Readout time of the phase-plane scans, ns.
pub const FIG4_READOUT: f64 = 20.0;
/// Two-photon detuning Δ/(2π) of the presets, MHz.
pub const PRESET_DELTA_MHZ: f64 = 185.0;
/// Largest A02 scale of the area grid; Ω2ph/(2π) then peaks near 77 MHz.
pub const FIG6_MAX_A02_SCALE: f64 = 1.898;

/// Base protocol of the presets: Ω/(2π) = 25.5 MHz, σ = 20 ns, t_s = −30 ns,
/// Φ = −π/2 and the measured relaxation rates.
pub fn preset_protocol(overrides: &FigureOverrides) -> ProtocolConfig {
    let mut cd = CounterdiabaticParams::ideal(mhz(PRESET_DELTA_MHZ));
    if let Some(mode) = overrides.mode {
        cd.mode = mode;
    }
    let rates = if overrides.no_decoherence {
        DecoherenceRates::none()
    } else {
        DecoherenceRates {
            gamma01: rate_per_us(0.6),
            gamma12: rate_per_us(0.83),
            ..DecoherenceRates::none()
        }
    };
    ProtocolConfig::new(StirapParams::new(mhz(25.5), 20.0, -30.0), Some(cd), rates)
}

/// The sweep behind a figure; [`Figure::Fig2`] has none.
pub fn figure_grid(fig: Figure, overrides: &FigureOverrides) -> Result<SweepGrid> {
    let n = overrides.points.unwrap_or(FIGURE_POINTS);
    let base = preset_protocol(overrides);
    let lin = SweepAxis::linspace;
    use SweepParam as P;
    let phase_plane = |a: SweepParam, b: SweepParam| -> Result<SweepGrid> {
        let mut g = SweepGrid::new(
            lin(a, -1.0, 1.0, n)?,
            Some(lin(b, -1.0, 1.0, n)?),
            base,
            vec![Output::P0, Output::P1, Output::P2],
        );
        g.readout = Some(FIG4_READOUT);
        Ok(g)
    };
    let transfer_map = |cd: bool| -> Result<SweepGrid> {
        let base = ProtocolConfig {
            cd: if cd { base.cd } else { None },
            ..base
        };
        let mut outputs = vec![Output::P2, Output::MaxP1, Output::TransferTime];
        if cd {
            outputs.push(Output::SpeedLimit);
        }
        outputs.push(Output::MaxAdiabaticity);
        Ok(SweepGrid::new(
            lin(P::Sigma, 10.0, 40.0, n)?,
            Some(lin(P::TsOverSigma, -1.0, -3.0, n)?),
            base,
            outputs,
        ))
    };
    match fig {
        Figure::Fig2 => Err(Error::InvalidParameter("fig2 is a time trace, not a grid".into())),
        Figure::Fig3a => transfer_map(false),
        Figure::Fig3b => transfer_map(true),
        Figure::Fig4a => phase_plane(P::Phi12, P::Phi2ph),
        Figure::Fig4b => phase_plane(P::Phi01, P::Phi2ph),
        Figure::Fig4c => phase_plane(P::Phi12, P::Phi01),
        Figure::Fig5 => Ok(SweepGrid::new(
            lin(P::A02Scale, 0.0, 2.0, n)?,
            Some(lin(P::Phi2ph, -1.0, 1.0, n)?),
            base,
            vec![Output::AreaCd, Output::P2],
        )),
        Figure::Fig6 => Ok(SweepGrid::new(
            lin(P::OmegaPeaks, 0.0, 40.0, n)?,
            Some(lin(P::A02Scale, 0.0, FIG6_MAX_A02_SCALE, n)?),
            base,
            vec![Output::AreaStirap, Output::AreaCd, Output::P2],
        )),
    }
}

/// The fig2 preset: populations of plain STIRAP and saSTIRAP on one time grid.
pub fn figure2_table(overrides: &FigureOverrides, dt_out: f64) -> Result<ResultTable> {
    let sa = preset_protocol(overrides);
    let plain = ProtocolConfig { cd: None, ..sa };
    let times = output_grid(sa.t_start, sa.t_end, dt_out, &[])?;
    let a = evolve_on(&plain, &QutritState::ground(), &times)?.populations();
    let b = evolve_on(&sa, &QutritState::ground(), &times)?.populations();
    let rows = times
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(&t, (pa, pb))| ResultRow {
            values: std::iter::once(t)
                .chain(pa.iter().copied())
                .chain(pb.iter().copied())
                .collect(),
            error: None,
        })
        .collect();
    Ok(ResultTable {
        preamble: Vec::new(),
        columns: [
            "t_ns",
            "stirap_p0",
            "stirap_p1",
            "stirap_p2",
            "sastirap_p0",
            "sastirap_p1",
            "sastirap_p2",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    })
}

/// Runs a figure preset.
pub fn run_figure(fig: Figure, overrides: &FigureOverrides, workers: Option<usize>) -> Result<ResultTable> {
    match fig {
        Figure::Fig2 => figure2_table(overrides, 0.1),
        _ => run_sweep(&figure_grid(fig, overrides)?, workers),
    }
}

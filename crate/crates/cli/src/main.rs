use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sastirap::config::RunConfig;
use sastirap::dynamics::{evolve, Trajectory};
use sastirap::pulses::CdMode;
use sastirap::sweep::{run_figure, run_sweep, Figure, FigureOverrides, ResultTable};
use sastirap::tomography::{
    correct_calibrations, fit_populations, fit_populations_unconstrained, fit_standard_errors, mix_calibrations,
    read_trace, synthesize_trace, CalibrationTraces,
};
use sastirap::waveform::{synth_waveforms, write_waveforms_csv, WaveformFile};
use sastirap::{DecoherenceRates, QutritState};

#[derive(Parser)]
#[command(name = "sastirap", version, about = "Superadiabatic STIRAP simulation harness")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for emulated readout noise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Drop all relaxation and dephasing.
    #[arg(long, global = true)]
    no_decoherence: bool,
    /// Counterdiabatic drive model.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<CdMode>,
}

fn parse_mode(s: &str) -> std::result::Result<CdMode, String> {
    s.parse().map_err(|e: sastirap::Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one protocol and write the trajectory.
    Run,
    /// Evaluate the [sweep] grid of the configuration.
    Sweep,
    /// Run a figure preset (fig2, fig3a, fig3b, fig4a/b/c, fig5, fig6).
    Figure {
        name: String,
        /// Points per axis.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Control waveforms.
    #[command(subcommand)]
    Waveform(WaveformCommand),
    /// Three-level readout tomography.
    #[command(subcommand)]
    Tomo(TomoCommand),
}

#[derive(Subcommand)]
enum WaveformCommand {
    /// Write the 16-bit waveform file (and optionally a CSV copy).
    Export {
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TomoCommand {
    /// Fit populations to a readout trace. Without --trace the readout of the
    /// configured protocol is emulated with seeded noise.
    Fit {
        /// Measured trace as tau_ns,value CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Raw calibration traces for |0⟩, |1⟩, |2⟩.
        #[arg(long, num_args = 3, value_names = ["R0", "R1", "R2"])]
        calibration: Option<Vec<PathBuf>>,
    },
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut run = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
            None => RunConfig::from_toml("")?,
        };
        if self.no_decoherence {
            run.protocol.rates = DecoherenceRates::none();
            run.file.decoherence = Default::default();
        }
        if let Some(mode) = self.mode {
            let Some(cd) = run.protocol.cd.as_mut() else {
                bail!("--mode needs a [counterdiabatic] section");
            };
            cd.mode = mode;
            if let Some(section) = run.file.counterdiabatic.as_mut() {
                section.mode = mode;
            }
        }
        Ok(run)
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

fn preamble(out: &mut dyn Write, lines: &[String]) -> Result<()> {
    for line in lines {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

fn write_trajectory(out: &mut dyn Write, run: &RunConfig, traj: &Trajectory) -> Result<()> {
    preamble(out, &run.echo()?)?;
    traj.write_csv(out)?;
    Ok(())
}

fn write_table(out: &mut dyn Write, mut table: ResultTable, header: Vec<String>) -> Result<()> {
    table.preamble = header;
    table.write_csv(out)?;
    if table.failures() > 0 {
        eprintln!("{} of {} grid points failed", table.failures(), table.rows.len());
    }
    Ok(())
}

fn read_trace_file(path: &Path) -> Result<(f64, Vec<f64>)> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_trace(BufReader::new(f))?)
}

fn tomo_fit(common: &Common, trace: Option<&Path>, calibration: Option<&[PathBuf]>) -> Result<()> {
    let run = common.load()?;
    let tomo = &run.file.tomography;
    let leakage = tomo.leakage()?;
    let ideal = tomo.readout_model().traces()?;
    let raw = match calibration {
        Some(paths) => {
            let traces = paths.iter().map(|p| read_trace_file(p)).collect::<Result<Vec<_>>>()?;
            let step = traces[0].0;
            let [r0, r1, r2]: [Vec<f64>; 3] = traces
                .into_iter()
                .map(|(_, v)| v)
                .collect::<Vec<_>>()
                .try_into()
                .expect("three calibration files");
            CalibrationTraces::new(r0, r1, r2, step)?
        }
        None => mix_calibrations(&ideal, &leakage)?,
    };
    let cal = correct_calibrations(&raw, &leakage)?;
    let mut lines = run.echo()?;
    let meas = match trace {
        Some(path) => read_trace_file(path)?.1,
        None => {
            let traj = evolve(&run.protocol, &QutritState::ground(), run.dt_out)?;
            let state = match run.readout {
                Some(t) => traj
                    .state_at(t)
                    .with_context(|| format!("readout time {t} ns lies outside the window"))?,
                None => traj.final_state(),
            };
            let p = state.populations().map(|x| x.max(0.0));
            let total: f64 = p.iter().sum();
            let p = p.map(|x| x / total);
            let seed = common.seed.unwrap_or(tomo.seed);
            lines.push(format!("emulated readout of p = {p:?} with seed {seed}"));
            synthesize_trace(&p, &cal, tomo.noise_sigma, seed)?
        }
    };
    let p = if tomo.constrained {
        fit_populations(&meas, &cal)?
    } else {
        fit_populations_unconstrained(&meas, &cal)?
    };
    let se = fit_standard_errors(&cal, tomo.noise_sigma)?;
    let mut out = common.output()?;
    preamble(&mut out, &lines)?;
    writeln!(out, "p0,p1,p2,se0,se1,se2")?;
    writeln!(
        out,
        "{:?},{:?},{:?},{:?},{:?},{:?}",
        p[0], p[1], p[2], se[0], se[1], se[2]
    )?;
    out.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let common = &cli.common;
    match &cli.command {
        Command::Run => {
            let run = common.load()?;
            let traj = evolve(&run.protocol, &QutritState::ground(), run.dt_out)?;
            let mut out = common.output()?;
            write_trajectory(&mut out, &run, &traj)?;
            out.flush()?;
        }
        Command::Sweep => {
            let run = common.load()?;
            let grid = run.sweep_grid()?;
            let workers = common.workers.or(run.file.sweep.as_ref().and_then(|s| s.workers));
            let table = run_sweep(&grid, workers)?;
            let mut out = common.output()?;
            write_table(&mut out, table, run.echo()?)?;
            out.flush()?;
        }
        Command::Figure { name, points } => {
            let fig: Figure = name.parse()?;
            let overrides = FigureOverrides {
                mode: common.mode,
                no_decoherence: common.no_decoherence,
                points: *points,
            };
            let table = run_figure(fig, &overrides, common.workers)?;
            let header = vec![
                format!("figure = {name}"),
                format!("mode = {:?}", overrides.mode.unwrap_or(CdMode::IdealEffective)),
                format!("decoherence = {}", !overrides.no_decoherence),
            ];
            let mut out = common.output()?;
            write_table(&mut out, table, header)?;
            out.flush()?;
        }
        Command::Waveform(WaveformCommand::Export { csv }) => {
            let run = common.load()?;
            let waves = synth_waveforms(&run.waveform, &run.protocol)?;
            let file = WaveformFile::from_waveforms(&waves, run.waveform.full_scale)?;
            let mut out = common.output()?;
            file.write(&mut out)?;
            out.flush()?;
            if let Some(path) = csv {
                let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                write_waveforms_csv(BufWriter::new(f), &waves)?;
            }
        }
        Command::Tomo(TomoCommand::Fit { trace, calibration }) => {
            tomo_fit(common, trace.as_deref(), calibration.as_deref())?;
        }
    }
    Ok(())
}

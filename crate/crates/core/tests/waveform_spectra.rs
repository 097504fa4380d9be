//! Spectral checks of the sampled drives: envelope recovery by digital
//! demodulation and image suppression after ideal upconversion.

use std::f64::consts::PI;

use num_complex::Complex64;
use sastirap::dynamics::ProtocolConfig;
use sastirap::pulses::{CounterdiabaticParams, StirapParams};
use sastirap::units::mhz;
use sastirap::waveform::{synth_waveforms, SampledWaveform, Sideband, WaveformConfig};
use sastirap::DecoherenceRates;

fn protocol() -> ProtocolConfig {
    let mut cfg = ProtocolConfig::new(
        StirapParams::new(mhz(25.5), 20.0, -30.0),
        Some(CounterdiabaticParams::ideal(mhz(185.0))),
        DecoherenceRates::none(),
    );
    cfg.stark_correction = false;
    cfg
}

fn pump(sample_rate: f64) -> SampledWaveform {
    let cfg = WaveformConfig {
        sample_rate,
        ..Default::default()
    };
    let [pump, _, _] = synth_waveforms(&cfg, &protocol()).unwrap();
    pump
}

/// Hann-windowed sinc low-pass with unit DC gain.
fn low_pass(x: &[f64], cutoff: f64, sample_rate: f64, half_width_ns: f64) -> Vec<f64> {
    let half = (half_width_ns * sample_rate).round() as isize;
    let fc = cutoff / (2.0 * PI * sample_rate);
    let taps: Vec<f64> = (-half..=half)
        .map(|n| {
            let n = n as f64;
            let sinc = if n == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * n).sin() / (PI * n)
            };
            let hann = 0.5 * (1.0 + (PI * n / (half as f64 + 1.0)).cos());
            sinc * hann
        })
        .collect();
    let gain: f64 = taps.iter().sum();
    (0..x.len() as isize)
        .map(|k| {
            taps.iter()
                .enumerate()
                .filter_map(|(j, w)| {
                    let idx = k + j as isize - half;
                    (0..x.len() as isize).contains(&idx).then(|| w * x[idx as usize])
                })
                .sum::<f64>()
                / gain
        })
        .collect()
}

fn demodulation_rms_error(sample_rate: f64) -> f64 {
    let w = pump(sample_rate);
    let signed = match w.sideband {
        Sideband::Upper => w.if_freq,
        Sideband::Lower => -w.if_freq,
    };
    let phi = protocol().stirap.phi01;
    let mixed: Vec<f64> = (0..w.len())
        .map(|k| 2.0 * w.i_samples[k] * (signed * w.time(k) + phi).sin())
        .collect();
    let recovered = low_pass(&mixed, w.if_freq, sample_rate, 30.0);
    let peak = w.envelope.iter().copied().fold(0.0, f64::max);
    let sq: f64 = recovered.iter().zip(&w.envelope).map(|(r, e)| (r - e).powi(2)).sum();
    (sq / w.len() as f64).sqrt() / peak
}

#[test]
fn demodulation_recovers_gaussian_envelope() {
    for rate in [10.0, 20.0] {
        let err = demodulation_rms_error(rate);
        assert!(err < 0.01, "{rate} samples/ns: rms error {err}");
    }
}

/// Single-bin projection of `x` onto frequency `omega`.
fn bin(x: &[f64], w: &SampledWaveform, omega: f64) -> f64 {
    x.iter()
        .enumerate()
        .map(|(k, v)| v * Complex64::from_polar(1.0, -omega * w.time(k)))
        .sum::<Complex64>()
        .norm()
}

fn image_ratio_db(sample_rate: f64, single_sideband: bool) -> f64 {
    let cfg = WaveformConfig {
        sample_rate,
        ..Default::default()
    };
    let mut w = pump(sample_rate);
    if !single_sideband {
        w.q_samples.iter_mut().for_each(|q| *q = 0.0);
    }
    let rf = w.mix_with_lo(cfg.lo_freq);
    let wanted = cfg.omega01_freq;
    let image = 2.0 * cfg.lo_freq - wanted;
    20.0 * (bin(&rf, &w, image) / bin(&rf, &w, wanted)).log10()
}

#[test]
fn upconversion_suppresses_image_sideband() {
    for rate in [20.0, 40.0] {
        let db = image_ratio_db(rate, true);
        assert!(db < -60.0, "{rate} samples/ns: image at {db} dB");
    }
}

#[test]
fn in_phase_channel_alone_has_both_sidebands() {
    let db = image_ratio_db(20.0, false);
    assert!(db.abs() < 0.5, "image at {db} dB");
}

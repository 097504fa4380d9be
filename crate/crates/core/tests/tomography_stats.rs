//! Monte-Carlo checks of the noisy readout inversion against the linear
//! least-squares error model.

use sastirap::sweep::{figure2_table, FigureOverrides};
use sastirap::tomography::{
    correct_calibrations, fit_populations, fit_standard_errors, mix_calibrations, synthesize_trace, CalibrationTraces,
    LeakageCorrections, ReadoutModel,
};

const SEEDS: u64 = 1000;

fn calibration() -> CalibrationTraces {
    ReadoutModel::default().traces().unwrap()
}

fn span(cal: &CalibrationTraces) -> f64 {
    let (lo, hi) = cal
        .traces()
        .iter()
        .flat_map(|t| t.iter().copied())
        .fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi - lo
}

#[test]
fn noisy_fits_follow_predicted_standard_errors() {
    let cal = calibration();
    let sigma = 0.02 * span(&cal);
    let se = fit_standard_errors(&cal, sigma).unwrap();
    let truth = [0.2, 0.3, 0.5];
    let fits: Vec<[f64; 3]> = (0..SEEDS)
        .map(|seed| {
            let meas = synthesize_trace(&truth, &cal, sigma, seed).unwrap();
            fit_populations(&meas, &cal).unwrap()
        })
        .collect();
    let n = SEEDS as f64;
    for k in 0..3 {
        let errs: Vec<f64> = fits.iter().map(|p| p[k] - truth[k]).collect();
        let mean = errs.iter().sum::<f64>() / n;
        let std = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let inside = errs.iter().filter(|e| e.abs() <= 3.0 * se[k]).count() as f64 / n;
        assert!(mean.abs() < 3.0 * se[k] / n.sqrt(), "p{k} bias {mean} vs se {}", se[k]);
        assert!((std / se[k] - 1.0).abs() < 0.1, "p{k} spread {std} vs se {}", se[k]);
        assert!(inside >= 0.99, "p{k}: only {inside} within 3 se");
    }
}

#[test]
fn figure2_readout_recovers_populations() {
    let ideal = calibration();
    let z = LeakageCorrections::new(0.01, 0.01, 0.02).unwrap();
    let cal = correct_calibrations(&mix_calibrations(&ideal, &z).unwrap(), &z).unwrap();
    let sigma = 0.02 * span(&cal);
    let table = figure2_table(&FigureOverrides::default(), 5.0).unwrap();
    let mut worst = 0.0_f64;
    for (seed, row) in table.rows.iter().enumerate() {
        for offset in [1, 4] {
            let p: [f64; 3] = std::array::from_fn(|k| row.values[offset + k].max(0.0));
            let total: f64 = p.iter().sum();
            let p = p.map(|x| x / total);
            let meas = synthesize_trace(&p, &cal, sigma, seed as u64).unwrap();
            let fit = fit_populations(&meas, &cal).unwrap();
            for k in 0..3 {
                worst = worst.max((fit[k] - p[k]).abs());
            }
        }
    }
    assert!(worst < 0.01, "worst population error {worst}");
}

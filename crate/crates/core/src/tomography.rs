//! Three-level dispersive readout emulation and population inversion.
//!
//! A measured readout trace is modelled as the population-weighted sum of
//! three calibration traces, one per basis state. Calibration traces taken
//! after imperfect preparation are corrected for leakage before fitting.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::units::mhz;
use crate::{Error, Result};

/// Calibration matrices with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTraces {
    pub r0: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    /// Sampling interval of the traces, ns.
    pub tau_step: f64,
}

impl CalibrationTraces {
    pub fn new(r0: Vec<f64>, r1: Vec<f64>, r2: Vec<f64>, tau_step: f64) -> Result<Self> {
        let m = r0.len();
        if m < 3 || r1.len() != m || r2.len() != m {
            return Err(Error::InvalidParameter(format!(
                "calibration traces need equal lengths >= 3, got {}, {}, {}",
                r0.len(),
                r1.len(),
                r2.len()
            )));
        }
        if !(tau_step > 0.0) {
            return Err(Error::InvalidParameter("tau_step must be > 0".into()));
        }
        Ok(Self { r0, r1, r2, tau_step })
    }

    pub fn len(&self) -> usize {
        self.r0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r0.is_empty()
    }

    pub fn traces(&self) -> [&[f64]; 3] {
        [&self.r0, &self.r1, &self.r2]
    }

    /// The M×3 matrix with the traces as columns.
    pub fn matrix(&self) -> DMatrix<f64> {
        let m = self.len();
        DMatrix::from_fn(m, 3, |i, j| self.traces()[j][i])
    }

    /// Ratio of largest to smallest singular value of [`Self::matrix`].
    pub fn condition_number(&self) -> f64 {
        let sv = self.matrix().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    fn check_rank(&self) -> Result<()> {
        let condition = self.condition_number();
        if !(condition <= MAX_CONDITION) {
            return Err(Error::RankDeficient { condition });
        }
        Ok(())
    }
}

/// Settling-curve model of the readout response: the cavity field for state k
/// rings up from the origin to the IQ point `targets[k]`, decaying with time
/// constant `settle_ns[k]` while rotating at `detuning[k]` (rad/ns), and the
/// trace is its projection on a readout axis at `axis_angle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutModel {
    pub targets: [(f64, f64); 3],
    pub settle_ns: [f64; 3],
    pub detuning: [f64; 3],
    pub axis_angle: f64,
    pub samples: usize,
    pub tau_step: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self {
            targets: [(1.0, 0.0), (-0.5, 0.8), (-0.6, -0.9)],
            settle_ns: [300.0; 3],
            detuning: [mhz(2.0), mhz(-2.0), mhz(5.0)],
            axis_angle: 2.0 * PI / 3.0,
            samples: 2000,
            tau_step: 0.5,
        }
    }
}

impl ReadoutModel {
    pub fn traces(&self) -> Result<CalibrationTraces> {
        let (s, c) = self.axis_angle.sin_cos();
        let trace = |k: usize| -> Vec<f64> {
            let target = Complex64::new(self.targets[k].0, self.targets[k].1);
            let rate = Complex64::new(1.0 / self.settle_ns[k], self.detuning[k]);
            (0..self.samples)
                .map(|i| {
                    let tau = i as f64 * self.tau_step;
                    let field = target * (1.0 - (-rate * tau).exp());
                    field.re * c + field.im * s
                })
                .collect()
        };
        CalibrationTraces::new(trace(0), trace(1), trace(2), self.tau_step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageCorrections {
    pub zeta01: f64,
    pub zeta12: f64,
    pub zeta02: f64,
}

impl LeakageCorrections {
    pub fn new(zeta01: f64, zeta12: f64, zeta02: f64) -> Result<Self> {
        let z = Self { zeta01, zeta12, zeta02 };
        z.validate()?;
        Ok(z)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("zeta01", self.zeta01),
            ("zeta12", self.zeta12),
            ("zeta02", self.zeta02),
        ] {
            if !(0.0..0.5).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must lie in [0, 0.5)")));
            }
        }
        if self.zeta02 + self.zeta12 >= 1.0 {
            return Err(Error::InvalidParameter("zeta02 + zeta12 must be < 1".into()));
        }
        Ok(())
    }
}

fn combine(terms: &[(f64, &[f64])]) -> Vec<f64> {
    let m = terms[0].1.len();
    (0..m).map(|i| terms.iter().map(|(w, r)| w * r[i]).sum()).collect()
}

/// Forward leakage model: the trace recorded for state j mixes in the ideal
/// responses of the lower states, r_j = (1 − Σ ζij)·r̃_j + Σ ζij·r̃_i.
pub fn mix_calibrations(ideal: &CalibrationTraces, z: &LeakageCorrections) -> Result<CalibrationTraces> {
    z.validate()?;
    let r1 = combine(&[(1.0 - z.zeta01, &ideal.r1), (z.zeta01, &ideal.r0)]);
    let r2 = combine(&[
        (1.0 - z.zeta02 - z.zeta12, &ideal.r2),
        (z.zeta02, &ideal.r0),
        (z.zeta12, &ideal.r1),
    ]);
    CalibrationTraces::new(ideal.r0.clone(), r1, r2, ideal.tau_step)
}

/// Recovers ideal responses from leaky calibration traces.
pub fn correct_calibrations(raw: &CalibrationTraces, z: &LeakageCorrections) -> Result<CalibrationTraces> {
    z.validate()?;
    let d1 = 1.0 - z.zeta01;
    let d2 = 1.0 - z.zeta02 - z.zeta12;
    if d1 <= 0.0 || d2 <= 0.0 {
        return Err(Error::InvalidParameter("leakage denominator must be positive".into()));
    }
    let r0 = raw.r0.clone();
    let r1 = combine(&[(1.0 / d1, &raw.r1), (-z.zeta01 / d1, &r0)]);
    let r2 = combine(&[(1.0 / d2, &raw.r2), (-z.zeta02 / d2, &r0), (-z.zeta12 / d2, &r1)]);
    CalibrationTraces::new(r0, r1, r2, raw.tau_step)
}

fn check_probabilities(p: &[f64; 3]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || p.iter().any(|&x| x < -1e-12) {
        return Err(Error::InvalidParameter(format!("{p:?} is not a probability vector")));
    }
    Ok(())
}

/// Σ pᵢ rᵢ(τ) plus independent Gaussian noise of standard deviation
/// `noise_sigma`, drawn from a generator seeded with `seed`.
pub fn synthesize_trace(p: &[f64; 3], cal: &CalibrationTraces, noise_sigma: f64, seed: u64) -> Result<Vec<f64>> {
    check_probabilities(p)?;
    let mut trace = combine(&[(p[0], &cal.r0), (p[1], &cal.r1), (p[2], &cal.r2)]);
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut trace {
            *v += normal.sample(&mut rng);
        }
    } else if noise_sigma < 0.0 {
        return Err(Error::InvalidParameter("noise_sigma must be >= 0".into()));
    }
    Ok(trace)
}

fn check_lengths(meas: &[f64], cal: &CalibrationTraces) -> Result<()> {
    if meas.len() != cal.len() {
        return Err(Error::InvalidParameter(format!(
            "trace has {} samples, calibration has {}",
            meas.len(),
            cal.len()
        )));
    }
    Ok(())
}

fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone()
        .svd(true, true)
        .solve(b, 1e-300)
        .expect("SVD was computed with both factors")
}

/// Plain least squares without positivity or normalization.
pub fn fit_populations_unconstrained(meas: &[f64], cal: &CalibrationTraces) -> Result<[f64; 3]> {
    check_lengths(meas, cal)?;
    cal.check_rank()?;
    let x = least_squares(&cal.matrix(), &DVector::from_column_slice(meas));
    Ok([x[0], x[1], x[2]])
}

/// Minimizer of ‖meas − Σ pᵢ rᵢ‖² restricted to Σ pᵢ = 1 and to pᵢ = 0
/// outside `support`, or `None` when it leaves the simplex.
fn face_solution(meas: &DVector<f64>, cols: &[DVector<f64>; 3], support: &[usize]) -> Option<([f64; 3], f64)> {
    // Eliminate the last support index through the sum constraint:
    // r = meas − r_last, columns (r_k − r_last).
    let (&last, free) = support.split_last()?;
    let rhs = meas - &cols[last];
    let mut p = [0.0; 3];
    if free.is_empty() {
        p[last] = 1.0;
    } else {
        let a = DMatrix::from_columns(&free.iter().map(|&k| &cols[k] - &cols[last]).collect::<Vec<_>>());
        let x = least_squares(&a, &rhs);
        for (i, &k) in free.iter().enumerate() {
            p[k] = x[i];
        }
        p[last] = 1.0 - x.iter().sum::<f64>();
    }
    if p.iter().any(|&v| v < 0.0) {
        return None;
    }
    let model = &cols[0] * p[0] + &cols[1] * p[1] + &cols[2] * p[2];
    Some((p, (meas - model).norm_squared()))
}

/// Least-squares populations constrained to the probability simplex.
///
/// Every face of the simplex is solved exactly with equality-constrained
/// least squares and the feasible solution with the smallest residual is
/// returned; for a convex objective this is the constrained minimizer.
pub fn fit_populations(meas: &[f64], cal: &CalibrationTraces) -> Result<[f64; 3]> {
    check_lengths(meas, cal)?;
    cal.check_rank()?;
    let meas = DVector::from_column_slice(meas);
    let cols = cal.traces().map(DVector::from_column_slice);
    const FACES: [&[usize]; 7] = [&[0, 1, 2], &[0, 1], &[0, 2], &[1, 2], &[0], &[1], &[2]];
    FACES
        .iter()
        .filter_map(|s| face_solution(&meas, &cols, s))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| p)
        .ok_or_else(|| Error::InvalidParameter("no feasible population vector".into()))
}

/// Standard errors of the sum-constrained estimator for white noise of
/// standard deviation `noise_sigma` (valid while positivity is inactive).
pub fn fit_standard_errors(cal: &CalibrationTraces, noise_sigma: f64) -> Result<[f64; 3]> {
    cal.check_rank()?;
    let m = cal.matrix();
    // p = e2 + B q with q = (p0, p1): columns r0 − r2 and r1 − r2.
    let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, -1.0]);
    let a = &m * &b;
    let cov_q = (a.transpose() * &a).try_inverse().ok_or(Error::RankDeficient {
        condition: f64::INFINITY,
    })? * (noise_sigma * noise_sigma);
    let cov_p = &b * cov_q * b.transpose();
    Ok([cov_p[(0, 0)].sqrt(), cov_p[(1, 1)].sqrt(), cov_p[(2, 2)].sqrt()])
}

/// Writes one trace as `tau_ns,value` CSV.
pub fn write_trace<W: Write>(out: W, tau_step: f64, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tau_ns", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([format!("{:?}", i as f64 * tau_step), format!("{v:?}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `tau_ns,value` CSV, returning the sampling step and values.
pub fn read_trace<R: Read>(input: R) -> Result<(f64, Vec<f64>)> {
    let mut r = csv::Reader::from_reader(input);
    let mut taus = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| Error::Parse(format!("missing column {k}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(e.to_string()))
        };
        taus.push(parse(0)?);
        values.push(parse(1)?);
    }
    if values.len() < 2 {
        return Err(Error::Parse("a trace needs at least two samples".into()));
    }
    let step = taus[1] - taus[0];
    if taus
        .iter()
        .enumerate()
        .any(|(i, &t)| (t - taus[0] - i as f64 * step).abs() > 1e-9 * step.abs().max(1.0))
    {
        return Err(Error::Parse("tau_ns must be uniformly spaced".into()));
    }
    Ok((step, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cal() -> CalibrationTraces {
        ReadoutModel::default().traces().unwrap()
    }

    #[test]
    fn pure_and_mixed_traces() {
        let c = cal();
        assert_eq!(synthesize_trace(&[1.0, 0.0, 0.0], &c, 0.0, 1).unwrap(), c.r0);
        let half = synthesize_trace(&[0.0, 0.5, 0.5], &c, 0.0, 1).unwrap();
        for ((h, a), b) in half.iter().zip(&c.r1).zip(&c.r2) {
            assert!((h - 0.5 * (a + b)).abs() < 1e-15);
        }
        assert!(synthesize_trace(&[0.5, 0.0, 0.4], &c, 0.0, 1).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let c = cal();
        let a = synthesize_trace(&[0.2, 0.3, 0.5], &c, 0.01, 7).unwrap();
        let b = synthesize_trace(&[0.2, 0.3, 0.5], &c, 0.01, 7).unwrap();
        let d = synthesize_trace(&[0.2, 0.3, 0.5], &c, 0.01, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
    }

    #[test]
    fn fit_examples() {
        let c = cal();
        let p = fit_populations(&c.r2, &c).unwrap();
        assert!((p[2] - 1.0).abs() < 1e-12 && p[0].abs() < 1e-12 && p[1].abs() < 1e-12);
        let meas = combine(&[(0.8, &c.r2), (0.2, &c.r1)]);
        let p = fit_populations(&meas, &c).unwrap();
        for (a, b) in p.iter().zip([0.0, 0.2, 0.8]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constrained_fit_clips_to_simplex() {
        let c = cal();
        // Beyond the r2 vertex: the unconstrained fit leaves the simplex.
        let meas = combine(&[(1.3, &c.r2), (-0.3, &c.r0)]);
        let free = fit_populations_unconstrained(&meas, &c).unwrap();
        assert!(free[0] < 0.0);
        let p = fit_populations(&meas, &c).unwrap();
        assert!(p.iter().all(|&x| x >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_rejected() {
        let r = vec![1.0, 2.0, 3.0, 4.0];
        let c = CalibrationTraces::new(r.clone(), r.clone(), vec![0.0, 1.0, 0.0, 1.0], 1.0).unwrap();
        assert!(matches!(fit_populations(&r, &c), Err(Error::RankDeficient { .. })));
        assert!(CalibrationTraces::new(vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn leakage_bounds() {
        assert!(LeakageCorrections::new(0.5, 0.0, 0.0).is_err());
        assert!(LeakageCorrections::new(0.0, 0.0, -0.1).is_err());
        let z = LeakageCorrections::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(correct_calibrations(&cal(), &z).unwrap(), cal());
    }

    #[test]
    fn trace_csv_round_trip() {
        let c = cal();
        let mut buf = Vec::new();
        write_trace(&mut buf, c.tau_step, &c.r1).unwrap();
        let (step, values) = read_trace(buf.as_slice()).unwrap();
        assert_eq!(step, c.tau_step);
        assert_eq!(values, c.r1);
    }

    proptest! {
        #[test]
        fn noiseless_round_trip(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = (a.min(b), a.max(b));
            let p = [lo, hi - lo, 1.0 - hi];
            let c = cal();
            let fit = fit_populations(&synthesize_trace(&p, &c, 0.0, 0).unwrap(), &c).unwrap();
            for k in 0..3 {
                prop_assert!((fit[k] - p[k]).abs() < 1e-9);
            }
        }

        #[test]
        fn correction_inverts_mixing(z01 in 0.0f64..0.3, z12 in 0.0f64..0.3, z02 in 0.0f64..0.3) {
            let z = LeakageCorrections::new(z01, z12, z02).unwrap();
            let ideal = cal();
            let back = correct_calibrations(&mix_calibrations(&ideal, &z).unwrap(), &z).unwrap();
            for (x, y) in ideal.traces().iter().zip(back.traces()) {
                for (u, v) in x.iter().zip(y) {
                    prop_assert!((u - v).abs() < 1e-12);
                }
            }
        }
    }
}

//! Qutrit state, Hamiltonian and decoherence types shared by every module.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type Mat3 = Matrix3<C64>;
pub type Vec3 = Vector3<C64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-9;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest elementwise deviation |m_ij − conj(m_ji)|.
pub fn hermitian_deviation(m: &Mat3) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..3 {
        for j in i..3 {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn check_hermitian(m: &Mat3, tol: f64) -> Result<()> {
    let deviation = hermitian_deviation(m);
    if deviation > tol || !deviation.is_finite() {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &Mat3) -> [f64; 3] {
    let eig = SymmetricEigen::new(*m);
    let mut vals = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    vals.sort_by(f64::total_cmp);
    vals
}

/// A qutrit density matrix satisfying Hermiticity, unit trace and positivity
/// within the module tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QutritState {
    rho: Mat3,
}

impl QutritState {
    pub fn new(rho: Mat3) -> Result<Self> {
        check_hermitian(&rho, HERMITIAN_TOL)?;
        let trace = rho.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::BadTrace { trace });
        }
        let min = hermitian_eigenvalues(&rho)[0];
        if min < -POSITIVITY_TOL {
            return Err(Error::NotPositive { eigenvalue: min });
        }
        Ok(Self { rho })
    }

    /// |k⟩⟨k| for k ∈ {0, 1, 2}.
    pub fn basis(k: usize) -> Self {
        assert!(k < 3, "qutrit level {k} out of range");
        let mut rho = Mat3::zeros();
        rho[(k, k)] = c(1.0);
        Self { rho }
    }

    pub fn ground() -> Self {
        Self::basis(0)
    }

    /// |ψ⟩⟨ψ| for a (renormalized) state vector.
    pub fn pure(psi: &Vec3) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        let psi = psi / c(norm);
        Self::new(psi * psi.adjoint())
    }

    /// Diagonal state from a probability vector.
    pub fn mixture(p: [f64; 3]) -> Result<Self> {
        Self::new(Mat3::from_diagonal(&Vec3::new(c(p[0]), c(p[1]), c(p[2]))))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.rho
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.rho[(0, 0)].re, self.rho[(1, 1)].re, self.rho[(2, 2)].re]
    }

    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }

    /// Re-runs every invariant check; integrator output is built unchecked.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.rho).map(|_| ())
    }
}

/// Diagonal of ρ as (p0, p1, p2). Rejects matrices that are not Hermitian.
pub fn populations(rho: &Mat3) -> Result<[f64; 3]> {
    check_hermitian(rho, HERMITIAN_TOL)?;
    Ok([rho[(0, 0)].re, rho[(1, 1)].re, rho[(2, 2)].re])
}

/// A Hermitian 3×3 Hamiltonian in rad/ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianMatrix {
    h: Mat3,
}

impl HamiltonianMatrix {
    pub fn new(h: Mat3) -> Result<Self> {
        check_hermitian(&h, HERMITIAN_TOL)?;
        Ok(Self { h })
    }

    /// Builds the matrix from its upper off-diagonal elements ⟨0|H|1⟩,
    /// ⟨1|H|2⟩, ⟨0|H|2⟩; the diagonal is zero.
    pub fn from_couplings(h01: C64, h12: C64, h02: C64) -> Self {
        let z = C64::new(0.0, 0.0);
        Self {
            h: Mat3::new(z, h01, h02, h01.conj(), z, h12, h02.conj(), h12.conj(), z),
        }
    }

    pub fn zeros() -> Self {
        Self { h: Mat3::zeros() }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.h
    }
}

impl std::ops::Add for HamiltonianMatrix {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self { h: self.h + rhs.h }
    }
}

/// Relaxation and pure dephasing rates in 1/ns.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct DecoherenceRates {
    /// Relaxation |1⟩ → |0⟩.
    pub gamma01: f64,
    /// Relaxation |2⟩ → |1⟩.
    pub gamma12: f64,
    #[serde(default)]
    pub gamma_phi01: f64,
    #[serde(default)]
    pub gamma_phi12: f64,
}

impl DecoherenceRates {
    pub fn relaxation(gamma01: f64, gamma12: f64) -> Result<Self> {
        let r = Self {
            gamma01,
            gamma12,
            ..Self::default()
        };
        r.validate()?;
        Ok(r)
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma01", self.gamma01),
            ("gamma12", self.gamma12),
            ("gamma_phi01", self.gamma_phi01),
            ("gamma_phi12", self.gamma_phi12),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.gamma01 == 0.0 && self.gamma12 == 0.0 && self.gamma_phi01 == 0.0 && self.gamma_phi12 == 0.0
    }
}

/// Lindblad dissipator for relaxation channels L = |i⟩⟨i+1| and two
/// diagonal dephasing channels.
///
/// Dephasing of transition 0–1 uses L = √(γφ01/2)(|1⟩⟨1| − |0⟩⟨0|), so ρ01
/// decays at exactly γφ01 while ρ02 and ρ12 pick up γφ01/4 each; 1–2 is
/// analogous.
pub fn dissipator(rho: &Mat3, rates: &DecoherenceRates) -> Mat3 {
    let mut d = Mat3::zeros();

    // Relaxation i+1 → i, written out elementwise.
    for (i, g) in [(0usize, rates.gamma01), (1usize, rates.gamma12)] {
        if g == 0.0 {
            continue;
        }
        let up = i + 1;
        let p_up = rho[(up, up)];
        d[(i, i)] += p_up * g;
        d[(up, up)] -= p_up * g;
        for k in 0..3 {
            if k != up {
                d[(up, k)] -= rho[(up, k)] * (0.5 * g);
                d[(k, up)] -= rho[(k, up)] * (0.5 * g);
            }
        }
    }

    // Diagonal jump operators: D[L]ρ_jk = −(γ/2)(l_j − l_k)² ρ_jk.
    for (l, g) in [
        ([-1.0, 1.0, 0.0], rates.gamma_phi01 / 2.0),
        ([0.0, -1.0, 1.0], rates.gamma_phi12 / 2.0),
    ] {
        if g == 0.0 {
            continue;
        }
        for j in 0..3 {
            for k in 0..3 {
                let diff: f64 = l[j] - l[k];
                d[(j, k)] -= rho[(j, k)] * (0.5 * g * diff * diff);
            }
        }
    }
    d
}

/// Full generator dρ/dt = −i[H, ρ] + D(ρ).
pub fn lindblad_rhs(h: &Mat3, rho: &Mat3, rates: &DecoherenceRates) -> Mat3 {
    let hr = h * rho;
    let comm = hr - hr.adjoint();
    dissipator(rho, rates) - comm * I
}

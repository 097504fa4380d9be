//! Phase algebra of the three-level loop 0 → 1 → 2 → 0.
//!
//! A drive on link j→k enters the Hamiltonian as ⟨j|H|k⟩ ∝ e^{iφjk}, with
//! the closing link read as ⟨2|H|0⟩ ∝ e^{iφ20}. Local phase changes of the
//! basis states shift the link phases but not their sum Φ.

use std::f64::consts::{PI, TAU};

use crate::model::{Mat3, C64};
use crate::HamiltonianMatrix;

pub use crate::dynamics::phi20_from_two_photon;

/// Wraps an angle into (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Wrapped difference a − b.
pub fn phase_difference(a: f64, b: f64) -> f64 {
    wrap_phase(a - b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaquettePhases {
    pub phi01: f64,
    pub phi12: f64,
    pub phi20: f64,
}

impl PlaquettePhases {
    /// Link phases of a Hamiltonian; links with zero coupling read as 0.
    pub fn of(h: &HamiltonianMatrix) -> Self {
        let m = h.matrix();
        let arg = |z: C64| if z.norm() == 0.0 { 0.0 } else { z.arg() };
        Self {
            phi01: arg(m[(0, 1)]),
            phi12: arg(m[(1, 2)]),
            phi20: arg(m[(2, 0)]),
        }
    }

    /// Phases produced by STIRAP drives and a two-photon tone of phase φ2ph.
    pub fn from_two_photon(phi01: f64, phi12: f64, phi_2ph: f64) -> Self {
        Self {
            phi01,
            phi12,
            phi20: phi20_from_two_photon(phi_2ph),
        }
    }

    /// Peierls link variables (e^{iφ01}, e^{iφ12}, e^{iφ20}).
    pub fn links(&self) -> [C64; 3] {
        [self.phi01, self.phi12, self.phi20].map(|p| C64::from_polar(1.0, p))
    }
}

/// Φ = φ01 + φ12 + φ20 in (−π, π].
pub fn loop_phase(p: &PlaquettePhases) -> f64 {
    wrap_phase(p.phi01 + p.phi12 + p.phi20)
}

/// Loop phase from the product of the link variables, which is how it
/// appears in the Hamiltonian: arg(H01·H12·H20).
pub fn loop_phase_of(h: &HamiltonianMatrix) -> f64 {
    let m = h.matrix();
    wrap_phase((m[(0, 1)] * m[(1, 2)] * m[(2, 0)]).arg())
}

/// φ2ph that realizes loop phase Φ given the two STIRAP phases.
pub fn two_photon_phase_for(phi01: f64, phi12: f64, loop_phase: f64) -> f64 {
    0.5 * (phi01 + phi12 - PI - loop_phase)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaugeTransform {
    pub chi0: f64,
    pub chi1: f64,
    pub chi2: f64,
}

impl GaugeTransform {
    /// The transform that moves all of Φ onto the 2–0 link.
    pub fn to_closing_link(p: &PlaquettePhases) -> Self {
        Self {
            chi0: 0.0,
            chi1: -p.phi01,
            chi2: -p.phi01 - p.phi12,
        }
    }

    fn phases(&self) -> [f64; 3] {
        [self.chi0, self.chi1, self.chi2]
    }

    /// Link phases after the transform: φjk → φjk − χj + χk.
    pub fn apply_to(&self, p: &PlaquettePhases) -> PlaquettePhases {
        let [c0, c1, c2] = self.phases();
        PlaquettePhases {
            phi01: wrap_phase(p.phi01 - c0 + c1),
            phi12: wrap_phase(p.phi12 - c1 + c2),
            phi20: wrap_phase(p.phi20 - c2 + c0),
        }
    }
}

/// U H U† with U = diag(e^{−iχ0}, e^{−iχ1}, e^{−iχ2}).
pub fn apply_gauge(h: &HamiltonianMatrix, g: &GaugeTransform) -> HamiltonianMatrix {
    let chi = g.phases();
    let m = Mat3::from_fn(|j, k| h.matrix()[(j, k)] * C64::from_polar(1.0, chi[k] - chi[j]));
    HamiltonianMatrix::new(m).expect("a unitary conjugation keeps H Hermitian")
}

//! Conversions between quoted laboratory units and internal rad/ns.

use std::f64::consts::{PI, TAU};

/// Ω/(2π) in MHz → Ω in rad/ns.
pub fn mhz(x: f64) -> f64 {
    TAU * x * 1e-3
}

/// Ω in rad/ns → Ω/(2π) in MHz.
pub fn to_mhz(omega: f64) -> f64 {
    omega / (TAU * 1e-3)
}

/// ω/(2π) in GHz → ω in rad/ns.
pub fn ghz(x: f64) -> f64 {
    TAU * x
}

/// A decay rate quoted in MHz, read as events per µs (no 2π), in 1/ns.
///
/// Relaxation rates are quoted as inverse lifetimes, not as angular
/// frequencies, so they skip the 2π that [`mhz`] applies.
pub fn rate_per_us(x: f64) -> f64 {
    x * 1e-3
}

/// Inverse of [`rate_per_us`].
pub fn to_rate_per_us(gamma: f64) -> f64 {
    gamma * 1e3
}

/// Phase in units of π → rad.
pub fn pi_units(x: f64) -> f64 {
    x * PI
}

/// rad → units of π.
pub fn to_pi_units(phi: f64) -> f64 {
    phi / PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_invert() {
        assert!((to_mhz(mhz(25.5)) - 25.5).abs() < 1e-12);
        assert!((mhz(25.5) - 0.160_221_225_3).abs() < 1e-9);
        assert!((to_pi_units(pi_units(-0.25)) + 0.25).abs() < 1e-15);
        assert!((to_rate_per_us(rate_per_us(0.83)) - 0.83).abs() < 1e-15);
    }
}

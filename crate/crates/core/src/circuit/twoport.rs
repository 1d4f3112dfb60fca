//! Transmission (ABCD) matrices, cascading, and conversion to S-parameters.
//!
//! A [`TwoPort`] is stored in homogeneous form: the physical ABCD matrix is
//! `[[a, b], [c, d]] / scale`. Ordinary elements use `scale = 1`. Coupled-line
//! sections use `scale = Z21`, which keeps a perfectly decoupled section
//! (where `Z21 = 0` and the ABCD matrix does not exist) representable and
//! lets it cascade to an exact zero transmission. The matrix determinant is
//! tracked multiplicatively so that `S12` stays exact for long cascades.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Speed of light in mm·GHz.
pub const C0_MM_GHZ: f64 = 299.792_458;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const J: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPort {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
    scale: Complex64,
    det: Complex64,
}

impl TwoPort {
    pub fn identity() -> Self {
        TwoPort {
            a: ONE,
            b: ZERO,
            c: ZERO,
            d: ONE,
            scale: ONE,
            det: ONE,
        }
    }

    /// Plain ABCD matrix.
    pub fn from_abcd(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        TwoPort {
            a,
            b,
            c,
            d,
            scale: ONE,
            det: a * d - b * c,
        }
    }

    /// Two-port from open-circuit impedance parameters. Valid for `Z21 = 0`.
    pub fn from_impedance(z11: Complex64, z12: Complex64, z21: Complex64, z22: Complex64) -> Self {
        TwoPort {
            a: z11,
            b: z11 * z22 - z12 * z21,
            c: ONE,
            d: z22,
            scale: z21,
            det: z12 * z21,
        }
    }

    pub fn series_impedance(z: Complex64) -> Self {
        TwoPort::from_abcd(ONE, z, ZERO, ONE)
    }

    /// Normalized ABCD matrix, or `None` for a section with no transmission.
    pub fn abcd(&self) -> Option<[[Complex64; 2]; 2]> {
        if self.scale == ZERO {
            return None;
        }
        let s = self.scale;
        Some([[self.a / s, self.b / s], [self.c / s, self.d / s]])
    }

    /// Determinant of the normalized matrix (1 for reciprocal networks).
    pub fn determinant(&self) -> Option<Complex64> {
        if self.scale == ZERO {
            None
        } else {
            Some(self.det / (self.scale * self.scale))
        }
    }

    /// `self` followed by `rhs` (self nearer port 1).
    pub fn then(&self, rhs: &TwoPort) -> TwoPort {
        TwoPort {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
            scale: self.scale * rhs.scale,
            det: self.det * rhs.det,
        }
    }

    /// S-parameters `[s11, s12, s21, s22]` referenced to a real impedance.
    pub fn to_scattering(&self, z_ref: f64) -> Result<[Complex64; 4]> {
        if !(z_ref > 0.0) {
            return Err(Error::InvalidInput(format!(
                "reference impedance must be positive, got {z_ref}"
            )));
        }
        let b = self.b / z_ref;
        let c = self.c * z_ref;
        let den = self.a + b + c + self.d;
        if den == ZERO || !den.is_finite() {
            return Err(Error::ZeroDenominator);
        }
        let s11 = (self.a + b - c - self.d) / den;
        let s22 = (-self.a + b - c + self.d) / den;
        let s21 = 2.0 * self.scale / den;
        let s12 = if self.scale == ZERO {
            ZERO
        } else {
            2.0 * (self.det / self.scale) / den
        };
        Ok([s11, s12, s21, s22])
    }
}

/// Ordered product of two-ports, first element nearest port 1.
pub fn cascade(sections: &[TwoPort]) -> Result<TwoPort> {
    let (first, rest) = sections.split_first().ok_or(Error::EmptyCascade)?;
    Ok(rest.iter().fold(*first, |acc, s| acc.then(s)))
}

/// Phase constant times length, in radians, for a length in mm at `f` GHz.
pub fn electrical_length(eps_eff: f64, length_mm: f64, f_ghz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_ghz * eps_eff.sqrt() * length_mm / C0_MM_GHZ
}

/// Lossless uniform line of characteristic impedance `z0`.
pub fn line_two_port(z0: f64, eps_eff: f64, length_mm: f64, f_ghz: f64) -> Result<TwoPort> {
    if !(z0 > 0.0 && eps_eff >= 1.0 && length_mm >= 0.0 && f_ghz > 0.0) {
        return Err(Error::InvalidInput(format!(
            "line requires z0 > 0, eps_eff >= 1, L >= 0, f > 0 (got {z0}, {eps_eff}, {length_mm}, {f_ghz})"
        )));
    }
    Ok(line_from_angle(z0, electrical_length(eps_eff, length_mm, f_ghz)))
}

/// Lossless line given its electrical length in radians.
pub fn line_from_angle(z0: f64, theta: f64) -> TwoPort {
    let (sin, cos) = theta.sin_cos();
    TwoPort {
        a: Complex64::new(cos, 0.0),
        b: J * (z0 * sin),
        c: J * (sin / z0),
        d: Complex64::new(cos, 0.0),
        scale: ONE,
        det: ONE,
    }
}

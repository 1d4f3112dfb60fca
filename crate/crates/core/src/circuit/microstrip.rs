//! Quasi-static microstrip line and coupled-line models.
//!
//! Single lines use the Hammerstad–Jensen closed forms (zero strip
//! thickness) for the air impedance and the effective permittivity.
//!
//! A coupled pair is described by its even- and odd-mode impedances and
//! effective permittivities. The mode impedances scale the single-line air
//! impedance by the ratio of Cohn's zero-thickness coupled-strip conformal
//! mapping factors `K(k')/K(k)` to the isolated-strip factor, with an
//! equivalent ground spacing of `2h`. The gap enters only through
//! `tanh(π(w+s)/4h)`, so coupling vanishes exponentially with spacing and the
//! pair degenerates to two isolated microstrips. The mode permittivities are
//! pulled from the single-line value toward `εr` (even) and toward 1 (odd) in
//! proportion to the coupling ratio `(Fe − Fo)/(Fe + Fo)`.
//!
//! Validity window: `0.1 ≤ w/h ≤ 10`, `0.05 ≤ s/h ≤ 10`, `εr ≥ 1`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::twoport::{electrical_length, TwoPort};
use crate::error::{Error, Result};

/// Free-space wave impedance in ohms.
pub const ETA0: f64 = 376.730_313_668;

pub const WH_RANGE: (f64, f64) = (0.1, 10.0);
pub const SH_RANGE: (f64, f64) = (0.05, 10.0);

/// Share of the gap-induced permittivity shift applied to each mode.
const MODE_PERMITTIVITY_PULL: f64 = 0.4;

/// Angles closer than this to a multiple of π are treated as singular.
const SINGULAR_ANGLE: f64 = 1e-9;

/// Characteristic impedance and effective permittivity of a single strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineParams {
    pub z0: f64,
    pub eps_eff: f64,
}

/// Even/odd mode description of a symmetric coupled pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledModes {
    pub z0e: f64,
    pub z0o: f64,
    pub eps_e: f64,
    pub eps_o: f64,
}

impl CoupledModes {
    /// Same pair with both permittivities multiplied by `factor`.
    pub fn with_permittivity_factor(self, factor: f64) -> Self {
        CoupledModes {
            eps_e: self.eps_e * factor,
            eps_o: self.eps_o * factor,
            ..self
        }
    }
}

fn check_window(quantity: &'static str, value: f64, (min, max): (f64, f64)) -> Result<()> {
    if value.is_finite() && (min..=max).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfValidity {
            quantity,
            value,
            min,
            max,
        })
    }
}

fn check_substrate(h: f64, er: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "substrate height must be positive, got {h}"
        )));
    }
    if !(er >= 1.0 && er.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "relative permittivity must be at least 1, got {er}"
        )));
    }
    Ok(())
}

/// Air-filled impedance of a microstrip with width-to-height ratio `u`.
fn air_impedance(u: f64) -> f64 {
    let f = 6.0 + (2.0 * PI - 6.0) * (-(30.666 / u).powf(0.7528)).exp();
    ETA0 / (2.0 * PI) * (f / u + (1.0 + 4.0 / (u * u)).sqrt()).ln()
}

fn single_eps_eff(u: f64, er: f64) -> f64 {
    let u4 = u.powi(4);
    let a = 1.0 + ((u4 + (u / 52.0).powi(2)) / (u4 + 0.432)).ln() / 49.0 + (1.0 + (u / 18.1).powi(3)).ln() / 18.7;
    let b = 0.564 * ((er - 0.9) / (er + 3.0)).powf(0.053);
    (er + 1.0) / 2.0 + (er - 1.0) / 2.0 * (1.0 + 10.0 / u).powf(-a * b)
}

/// Single microstrip of width `w` on a substrate of height `h`.
pub fn microstrip_line(w: f64, h: f64, er: f64) -> Result<LineParams> {
    check_substrate(h, er)?;
    let u = w / h;
    check_window("w/h", u, WH_RANGE)?;
    let eps_eff = single_eps_eff(u, er);
    Ok(LineParams {
        z0: air_impedance(u) / eps_eff.sqrt(),
        eps_eff,
    })
}

/// Equivalent length extension of an open microstrip end, mm.
pub fn open_end_extension(w: f64, h: f64, er: f64) -> Result<f64> {
    check_substrate(h, er)?;
    let u = w / h;
    check_window("w/h", u, WH_RANGE)?;
    let e = single_eps_eff(u, er);
    Ok(0.412 * h * (e + 0.3) * (u + 0.264) / ((e - 0.258) * (u + 0.8)))
}

/// Arithmetic–geometric mean.
fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    0.5 * (a + b)
}

/// `K(k')/K(k)` for modulus `0 < k < 1`.
fn modulus_ratio(k: f64) -> f64 {
    let kp = ((1.0 - k) * (1.0 + k)).sqrt();
    agm(1.0, kp) / agm(1.0, k)
}

/// Even- and odd-mode parameters of a symmetric coupled microstrip pair.
pub fn microstrip_coupled_params(w: f64, s: f64, h: f64, er: f64) -> Result<CoupledModes> {
    check_substrate(h, er)?;
    check_window("w/h", w / h, WH_RANGE)?;
    check_window("s/h", s / h, SH_RANGE)?;
    let u = w / h;
    let z_air = air_impedance(u);
    let eps = single_eps_eff(u, er);

    let b = 2.0 * h;
    let k0 = (PI * w / (2.0 * b)).tanh();
    let t = (PI * (w + s) / (2.0 * b)).tanh();
    let isolated = modulus_ratio(k0);
    let fe = modulus_ratio(k0 * t) / isolated;
    let fo = modulus_ratio(k0 / t) / isolated;

    let coupling = (fe - fo) / (fe + fo);
    let eps_e = eps + MODE_PERMITTIVITY_PULL * coupling * (er - eps);
    let eps_o = eps - MODE_PERMITTIVITY_PULL * coupling * (eps - 1.0);

    Ok(CoupledModes {
        z0e: z_air * fe / eps_e.sqrt(),
        z0o: z_air * fo / eps_o.sqrt(),
        eps_e,
        eps_o,
    })
}

fn ensure_regular(theta: f64, f_ghz: f64, mode: &'static str) -> Result<()> {
    let r = theta.rem_euclid(PI);
    if r.min(PI - r) <= SINGULAR_ANGLE {
        Err(Error::SingularLength { freq_ghz: f_ghz, mode })
    } else {
        Ok(())
    }
}

/// Coupled-line section used between diagonally opposite ports with the two
/// remaining ports open.
pub fn coupled_section_two_port(modes: CoupledModes, length_mm: f64, f_ghz: f64) -> Result<TwoPort> {
    if !(length_mm > 0.0 && f_ghz > 0.0) {
        return Err(Error::InvalidInput(format!(
            "coupled section needs L > 0 and f > 0 (got {length_mm} mm, {f_ghz} GHz)"
        )));
    }
    let theta_e = electrical_length(modes.eps_e, length_mm, f_ghz);
    let theta_o = electrical_length(modes.eps_o, length_mm, f_ghz);
    ensure_regular(theta_e, f_ghz, "even")?;
    ensure_regular(theta_o, f_ghz, "odd")?;
    Ok(coupled_section_from_angles(modes.z0e, modes.z0o, theta_e, theta_o))
}

/// Same as [`coupled_section_two_port`] with explicit electrical lengths.
pub fn coupled_section_from_angles(z0e: f64, z0o: f64, theta_e: f64, theta_o: f64) -> TwoPort {
    let (se, ce) = theta_e.sin_cos();
    let (so, co) = theta_o.sin_cos();
    let minus_half_j = Complex64::new(0.0, -0.5);
    let z11 = minus_half_j * (z0e * ce / se + z0o * co / so);
    let z21 = minus_half_j * (z0e / se - z0o / so);
    TwoPort::from_impedance(z11, z21, z21, z11)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_end_extension_reference_value() {
        let dl = open_end_extension(0.383, 0.635, 10.2).unwrap();
        assert!((dl - 0.1759).abs() < 1e-4, "{dl}");
        assert!(open_end_extension(0.01, 0.635, 10.2).is_err());
    }

    #[test]
    fn coupled_params_reference_values() {
        let m = microstrip_coupled_params(0.575, 0.54, 0.635, 10.2).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(m.z0e, 54.7116) < 1e-4, "{m:?}");
        assert!(rel(m.z0o, 46.6138) < 1e-4, "{m:?}");
        assert!(rel(m.eps_e, 6.90281) < 1e-4, "{m:?}");
        assert!(rel(m.eps_o, 6.56255) < 1e-4, "{m:?}");
    }

    #[test]
    fn fifty_ohm_line_on_alumina_like_substrate() {
        // w/h = 1 on er = 10 is close to 48-49 ohm with eps_eff ~6.7.
        let p = microstrip_line(0.635, 0.635, 10.0).unwrap();
        assert!((p.z0 - 48.6).abs() < 1.5, "{p:?}");
        assert!((p.eps_eff - 6.67).abs() < 0.2, "{p:?}");
    }

    #[test]
    fn air_line_has_unit_permittivity() {
        let p = microstrip_line(0.5, 0.635, 1.0).unwrap();
        assert_eq!(p.eps_eff, 1.0);
        let m = microstrip_coupled_params(0.5, 0.3, 0.635, 1.0).unwrap();
        assert!((m.eps_e - 1.0).abs() <= 0.05 && (m.eps_o - 1.0).abs() <= 0.05);
    }

    #[test]
    fn wide_spacing_decouples() {
        let h = 0.635;
        let m = microstrip_coupled_params(0.575, 10.0 * h, h, 10.2).unwrap();
        assert!(m.z0e - m.z0o < 2.0, "{m:?}");
        assert!(m.z0e > m.z0o);
    }

    #[test]
    fn mode_ordering_and_bounds() {
        let er = 10.2;
        let m = microstrip_coupled_params(0.575, 0.54, 0.635, er).unwrap();
        assert!(m.z0e > m.z0o && m.z0o > 0.0);
        for eps in [m.eps_e, m.eps_o] {
            assert!((1.0..=er).contains(&eps));
        }
        assert!(m.eps_e > m.eps_o);
    }

    #[test]
    fn coupling_weakens_with_spacing() {
        let h = 0.635;
        let mut last = f64::INFINITY;
        for i in 0..=400 {
            let sh = 0.05 + (10.0 - 0.05) * i as f64 / 400.0;
            let m = microstrip_coupled_params(0.383, sh * h, h, 10.2).unwrap();
            let diff = m.z0e - m.z0o;
            assert!(diff < last, "s/h = {sh}: {diff} !< {last}");
            last = diff;
        }
    }

    #[test]
    fn window_violations_name_the_ratio() {
        let err = microstrip_coupled_params(0.383, 0.01, 0.635, 10.2).unwrap_err();
        assert!(err.to_string().contains("s/h"), "{err}");
        let err = microstrip_coupled_params(10.0, 0.5, 0.635, 10.2).unwrap_err();
        assert!(err.to_string().contains("w/h"), "{err}");
        assert!(microstrip_coupled_params(0.383, 0.2, 0.635, 0.5).is_err());
    }

    #[test]
    fn agm_reproduces_known_elliptic_ratio() {
        // K(1/sqrt2) = K'(1/sqrt2)
        assert!((modulus_ratio(std::f64::consts::FRAC_1_SQRT_2) - 1.0).abs() < 1e-15);
        // K(0.5) = 1.685750354812596, K'(0.5) = K(sqrt(3)/2) = 2.156515647499643
        let expected = 2.156_515_647_499_643 / 1.685_750_354_812_596;
        assert!((modulus_ratio(0.5) - expected).abs() < 1e-14);
    }

    #[test]
    fn decoupled_section_transmits_nothing() {
        for (th, z) in [(0.4, 60.0), (1.3, 45.0), (2.2, 80.0)] {
            let tp = coupled_section_from_angles(z, z, th, th);
            for z_ref in [25.0, 50.0, 75.0] {
                let s = tp.to_scattering(z_ref).unwrap();
                assert!(s[2].norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn lossless_section_is_unimodular_with_real_diagonal() {
        let tp = coupled_section_from_angles(72.0, 38.0, 1.21, 1.08);
        let m = tp.abcd().unwrap();
        assert!(m[0][0].im.abs() < 1e-12 && m[1][1].im.abs() < 1e-12);
        assert!(m[0][1].re.abs() < 1e-12 && m[1][0].re.abs() < 1e-12);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!((det - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn quarter_wave_section_matches_hand_reduction() {
        // At θ = π/2: Z11 = 0 and Z21 = -j(Z0e - Z0o)/2 =: -jX, so
        // A = D = 0, B = jX, C = j/X and S21 = -2j / (X/Zr + Zr/X).
        let (z0e, z0o, zr) = (70.0, 40.0, 50.0);
        let x: f64 = (z0e - z0o) / 2.0;
        let expected = Complex64::new(0.0, -2.0 / (x / zr + zr / x));
        let half_pi = std::f64::consts::FRAC_PI_2;
        let s = coupled_section_from_angles(z0e, z0o, half_pi, half_pi)
            .to_scattering(zr)
            .unwrap();
        assert!((s[2] - expected).norm() < 1e-12, "{} vs {}", s[2], expected);
        assert!((s[2].norm() - 0.550_458_715_596_330_3).abs() < 1e-12);
    }

    #[test]
    fn vanishing_length_blocks_transmission() {
        let modes = microstrip_coupled_params(0.383, 0.161, 0.635, 10.2).unwrap();
        let mut last = f64::INFINITY;
        for len in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
            let s = coupled_section_two_port(modes, len, 10.0)
                .unwrap()
                .to_scattering(50.0)
                .unwrap();
            let t = s[2].norm();
            assert!(t < last);
            last = t;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn singular_length_is_reported() {
        let modes = CoupledModes {
            z0e: 70.0,
            z0o: 40.0,
            eps_e: 1.0,
            eps_o: 1.0,
        };
        // half wavelength in air at 10 GHz
        let len = super::super::twoport::C0_MM_GHZ / 20.0;
        let err = coupled_section_two_port(modes, len, 10.0).unwrap_err();
        assert!(matches!(err, Error::SingularLength { mode: "even", .. }));
    }
}

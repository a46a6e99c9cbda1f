//! Beta-function family needed by the interference coefficients.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const CF_MAX_ITER: usize = 500;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// `ln Γ(x)` for `x > 0` (Lanczos, with reflection below 1/2).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x)Γ(1−x) = π / sin(πx)
        (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let t = x + LANCZOS_G + 0.5;
        let series = LANCZOS[1..]
            .iter()
            .enumerate()
            .fold(LANCZOS[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
    }
}

/// `B(x, y) = ∫₀¹ u^{x−1}(1−u)^{y−1} du`.
pub fn beta_fn(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
        return Err(Error::Domain(format!("beta_fn needs x, y > 0, got ({x}, {y})")));
    }
    Ok((ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)).exp())
}

/// Complementary incomplete Beta function `B′(x, y, z) = ∫_z¹ u^{x−1}(1−u)^{y−1} du`
/// for `x, y ∈ (0, 1)` and `z ∈ [0, 1]`.
pub fn beta_inc_comp(x: f64, y: f64, z: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0) {
        return Err(Error::Domain(format!(
            "beta_inc_comp needs x, y in (0, 1), got ({x}, {y})"
        )));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!("beta_inc_comp needs z in [0, 1], got {z}")));
    }
    if z == 1.0 {
        return Ok(0.0);
    }
    let full = beta_fn(x, y)?;
    if z == 0.0 {
        return Ok(full);
    }
    if z < (x + 1.0) / (x + y + 2.0) {
        // Lower tail converges fast here; subtract it from the full integral.
        Ok(full - lower_incomplete(x, y, z)?)
    } else {
        // ∫_z¹ u^{x−1}(1−u)^{y−1} du = ∫_0^{1−z} v^{y−1}(1−v)^{x−1} dv
        lower_incomplete(y, x, 1.0 - z)
    }
}

/// Regularized incomplete Beta function `I_z(a, b)`.
pub fn beta_reg(a: f64, b: f64, z: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!("beta_reg({a}, {b}, {z}) out of domain")));
    }
    if z == 0.0 || z == 1.0 {
        return Ok(z);
    }
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    if z < (a + 1.0) / (a + b + 2.0) {
        Ok((lower_incomplete(a, b, z)?.ln() - ln_beta).exp())
    } else {
        Ok(1.0 - (lower_incomplete(b, a, 1.0 - z)?.ln() - ln_beta).exp())
    }
}

/// Unregularized `∫₀^z u^{a−1}(1−u)^{b−1} du` by the continued fraction;
/// accurate when `z < (a+1)/(a+b+2)`.
fn lower_incomplete(a: f64, b: f64, z: f64) -> Result<f64> {
    let front = (a * z.ln() + b * (1.0 - z).ln()).exp() / a;
    Ok(front * continued_fraction(a, b, z)?)
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn continued_fraction(a: f64, b: f64, z: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * z / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let even = m * (b - m) * z / ((qam + m2) * (a + m2));
        d = 1.0 + even * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + even / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let odd = -(a + m) * (qab + m) * z / ((a + m2) * (qap + m2));
        d = 1.0 + odd * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + odd / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::Domain(format!(
        "incomplete beta continued fraction did not converge for ({a}, {b}, {z})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Tanh-sinh quadrature of `u^{x−1}(1−u)^{y−1}` over `[z, 1]`; endpoint
    /// singularities are integrable and the double-exponential map flattens
    /// them. Evaluated via distances to the endpoints to avoid cancellation.
    fn tanh_sinh_oracle(x: f64, y: f64, z: f64) -> f64 {
        let half = 0.5 * (1.0 - z);
        let h = 1.0 / 64.0;
        let mut sum = 0.0;
        let kmax = (8.0 / h) as i64;
        for k in -kmax..=kmax {
            let t = k as f64 * h;
            let s = 0.5 * PI * t.sinh();
            let w = 0.5 * PI * t.cosh() / s.cosh().powi(2);
            // distances from u to the left (z) and right (1) endpoints
            let (dl, dr) = if s >= 0.0 {
                let e = (-2.0 * s).exp();
                (2.0 * half / (1.0 + e), 2.0 * half * e / (1.0 + e))
            } else {
                let e = (2.0 * s).exp();
                (2.0 * half * e / (1.0 + e), 2.0 * half / (1.0 + e))
            };
            let u = z + dl;
            let one_minus_u = dr;
            if u <= 0.0 || one_minus_u <= 0.0 || w == 0.0 {
                continue;
            }
            sum += w * u.powf(x - 1.0) * one_minus_u.powf(y - 1.0);
        }
        sum * half * h
    }

    #[test]
    fn beta_of_ones() {
        assert!(rel(beta_fn(1.0, 1.0).unwrap(), 1.0) < 1e-13);
    }

    #[test]
    fn beta_of_halves_is_pi() {
        assert!(rel(beta_fn(0.5, 0.5).unwrap(), PI) < 1e-13);
    }

    #[test]
    fn beta_matches_reflection_identity() {
        // B(x, 1−x) = π / sin(πx)
        for x in [0.1, 0.25, 0.4, 2.0 / 3.0, 0.9] {
            assert!(rel(beta_fn(x, 1.0 - x).unwrap(), PI / (PI * x).sin()) < 1e-12);
        }
    }

    #[test]
    fn complementary_endpoints() {
        assert_eq!(beta_inc_comp(0.3, 0.6, 1.0).unwrap(), 0.0);
        assert!(rel(beta_inc_comp(0.5, 0.5, 0.0).unwrap(), beta_fn(0.5, 0.5).unwrap()) < 1e-15);
    }

    #[test]
    fn complementary_quarter_matches_quadrature_oracle() {
        let oracle = tanh_sinh_oracle(0.5, 0.5, 0.25);
        // arcsine closed form: π − 2 asin(√z) = 2π/3
        assert!(rel(oracle, 2.0 * PI / 3.0) < 1e-12);
        assert!(rel(beta_inc_comp(0.5, 0.5, 0.25).unwrap(), oracle) < 1e-10);
    }

    #[test]
    fn complementary_matches_oracle_on_grid() {
        for &x in &[0.2, 0.5, 0.8] {
            for &y in &[0.3, 0.5, 0.9] {
                for &z in &[0.01, 0.2, 0.5, 0.75, 0.97, 0.9999] {
                    let got = beta_inc_comp(x, y, z).unwrap();
                    let want = tanh_sinh_oracle(x, y, z);
                    assert!(rel(got, want) < 1e-10, "B'({x},{y},{z}) = {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(beta_fn(0.0, 1.0).is_err());
        assert!(beta_fn(1.0, -2.0).is_err());
        assert!(beta_inc_comp(1.0, 0.5, 0.5).is_err());
        assert!(beta_inc_comp(0.5, 0.5, 1.5).is_err());
    }

    #[test]
    fn regularized_is_consistent() {
        let (a, b) = (0.5, 0.5);
        for z in [0.1, 0.5, 0.9] {
            let i = beta_reg(a, b, z).unwrap();
            let comp = beta_inc_comp(a, b, z).unwrap() / beta_fn(a, b).unwrap();
            assert!((i + comp - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }
}

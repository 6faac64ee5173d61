//! Explicit constants of the representation: Gaussian majorant, bump
//! constants, exponent choices, the integral bounds on `∫h·div μ` and
//! `∫h·ν`, the Khasminskii threshold and the Kato constant.

pub mod kato;
pub mod lemma23;
pub mod occupation;

use serde::Serialize;

use crate::domain::unit_sphere_area;
use crate::error::{invalid, Result};

pub use kato::{kato_constant, KatoReport};
pub use lemma23::{lemma23_lhs_div, lemma23_lhs_pot, lp_norm, DivField, Lemma23Check};
pub use occupation::{occupation_bound_mc, probe_substream, OccupationReport, ProbeOccupation};

/// Heat-kernel and Green-function constants with θ and the diameter ς.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelConstants {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub theta: f64,
    pub varsigma: f64,
}

impl KernelConstants {
    /// Values for `A = I` (generator ½Δ): σ₁ = (2π)^{−d/2}, σ₂ = ½ and the
    /// Green constant of ½Δ on R^d (d ≥ 3; 0 otherwise).
    pub fn identity(d: usize, theta: f64, varsigma: f64) -> KernelConstants {
        KernelConstants {
            sigma1: (2.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0),
            sigma2: 0.5,
            sigma3: if d >= 3 { green_constant(d) } else { 0.0 },
            theta,
            varsigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1 > 0.0 && self.sigma2 > 0.0 && self.sigma3 >= 0.0 && self.varsigma > 0.0) {
            return Err(invalid(format!("kernel constants must be positive: {self:?}")));
        }
        if !(self.theta > 0.0 && self.theta < 0.5) {
            return Err(invalid(format!("θ = {} must lie in (0, ½)", self.theta)));
        }
        Ok(())
    }
}

/// Γ(d/2 − 1)/(2π^{d/2}): the Green function of ½Δ on R^d is this times
/// |x − y|^{2−d}.
pub fn green_constant(d: usize) -> f64 {
    assert!(d >= 3, "Green constant needs d ≥ 3");
    // Γ at integers and half-integers
    fn gamma_half(n2: usize) -> f64 {
        // Γ(n2/2)
        match n2 {
            1 => std::f64::consts::PI.sqrt(),
            2 => 1.0,
            _ => (n2 as f64 / 2.0 - 1.0) * gamma_half(n2 - 2),
        }
    }
    gamma_half(d - 2) / (2.0 * std::f64::consts::PI.powf(d as f64 / 2.0))
}

/// h(t,x,y) = σ₁ t^{−d/2} exp(−σ₂|x−y|²/t).
pub fn aronson_majorant(kc: &KernelConstants, d: usize, t: f64, x: &[f64], y: &[f64]) -> f64 {
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    kc.sigma1 * t.powf(-(d as f64) / 2.0) * (-kc.sigma2 * r2 / t).exp()
}

/// Largest M with e^r ≥ M r^γ for all r ≥ 0, namely (e/γ)^γ (1 at γ = 0).
pub fn bump_constant(gamma: f64) -> f64 {
    assert!(gamma >= 0.0, "bump exponent must be non-negative");
    if gamma == 0.0 {
        return 1.0;
    }
    (std::f64::consts::E / gamma).powf(gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentChoices {
    pub d: usize,
    pub p1: f64,
    pub q1: f64,
    pub alpha: f64,
    pub p2: f64,
    pub q2: f64,
    pub beta: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// Midpoint choices of α and β. For d = 1 the exponents are fixed:
/// p₁ = 2, α = ¾ (so that the bump exponent is 5/8), p₂ = 1, β = 0.
pub fn choose_exponents(d: usize, p1: f64, p2: f64) -> Result<ExponentChoices> {
    let m3 = bump_constant(5.0 / 8.0);
    if d == 1 {
        return Ok(ExponentChoices {
            d,
            p1: 2.0,
            q1: 2.0,
            alpha: 0.75,
            p2: 1.0,
            q2: f64::INFINITY,
            beta: 0.0,
            m1: m3,
            m2: 1.0,
            m3,
        });
    }
    let df = d as f64;
    if !(p1 > df) {
        return Err(invalid(format!("p1 = {p1} must exceed d = {d}")));
    }
    if !(p2 > df / 2.0) {
        return Err(invalid(format!("p2 = {p2} must exceed d/2 = {}", df / 2.0)));
    }
    let q1 = conjugate(p1);
    let q2 = conjugate(p2);
    let a_lo = (df * (1.0 - 1.0 / q1)).max(0.0);
    assert!(a_lo < 1.0, "empty α interval");
    let alpha = 0.5 * (a_lo + 1.0);
    let b_lo = df / 2.0 - 1.0;
    let b_hi = df / (2.0 * q2);
    assert!(b_lo < b_hi, "empty β interval");
    let beta = 0.5 * (b_lo + b_hi);
    Ok(ExponentChoices {
        d,
        p1,
        q1,
        alpha,
        p2,
        q2,
        beta,
        m1: bump_constant((df - alpha + 1.0) / 2.0),
        m2: bump_constant(beta),
        m3,
    })
}

/// ∫₀^ς r^{e} dr for e > −1.
fn radial_power_integral(e: f64, varsigma: f64) -> f64 {
    assert!(e > -1.0, "radial integral diverges for exponent {e}");
    varsigma.powf(e + 1.0) / (e + 1.0)
}

impl ExponentChoices {
    /// ∫₀^ς r^{d−q₁(d−α)−1} dr.
    pub fn div_radial_integral(&self, varsigma: f64) -> f64 {
        let d = self.d as f64;
        radial_power_integral(d - self.q1 * (d - self.alpha) - 1.0, varsigma)
    }

    /// ∫₀^ς r^{d−2βq₂−1} dr (for q₂ = ∞ only the exponent-0 case occurs).
    pub fn pot_radial_integral(&self, varsigma: f64) -> f64 {
        let d = self.d as f64;
        if self.q2.is_infinite() {
            return 1.0;
        }
        radial_power_integral(d - 2.0 * self.beta * self.q2 - 1.0, varsigma)
    }
}

/// Bound on |∫_D h(t,x,y) div μ(y) dy| given ‖μ‖_{L^{p₁}}.
pub fn lemma23_div_bound(kc: &KernelConstants, ec: &ExponentChoices, t: f64, mu_norm: f64) -> f64 {
    let d = ec.d as f64;
    let pre = 2.0 * kc.sigma1 / (kc.sigma2.powf((d - ec.alpha - 1.0) / 2.0) * ec.m1 * t.powf((1.0 + ec.alpha) / 2.0));
    pre * ec.div_radial_integral(kc.varsigma).powf(1.0 / ec.q1) * mu_norm
}

/// Bound on |∫_D h(t,x,y) ν(y) dy| given ‖ν‖_{L^{p₂}}.
pub fn lemma23_pot_bound(kc: &KernelConstants, ec: &ExponentChoices, t: f64, nu_norm: f64) -> f64 {
    let d = ec.d as f64;
    let pre = kc.sigma1 / (kc.sigma2.powf(ec.beta) * ec.m2 * t.powf(d / 2.0 - ec.beta));
    let radial = if ec.q2.is_infinite() {
        1.0
    } else {
        ec.pot_radial_integral(kc.varsigma).powf(1.0 / ec.q2)
    };
    pre * radial * nu_norm
}

/// M = θ[d − q(d−2)]^{1/q} / (σ₃ ς^{d/q−(d−2)}) with q conjugate to p.
pub fn khasminskii_threshold(kc: &KernelConstants, d: usize, p: f64) -> Result<f64> {
    let (q, base) = khasminskii_parts(kc, d, p)?;
    Ok(kc.theta * base.powf(1.0 / q) / (kc.sigma3 * kc.varsigma.powf(d as f64 / q - (d as f64 - 2.0))))
}

/// The same threshold with the surface measure of the unit sphere kept in
/// the polar-coordinates step: divided by |S^{d−1}|^{1/q}.
pub fn khasminskii_threshold_with_area(kc: &KernelConstants, d: usize, p: f64) -> Result<f64> {
    let (q, _) = khasminskii_parts(kc, d, p)?;
    Ok(khasminskii_threshold(kc, d, p)? / unit_sphere_area(d).powf(1.0 / q))
}

fn khasminskii_parts(kc: &KernelConstants, d: usize, p: f64) -> Result<(f64, f64)> {
    if d < 3 {
        return Err(invalid(format!(
            "the Khasminskii threshold is available for d ≥ 3 only (d = {d}); use the occupation estimate"
        )));
    }
    if !(p > d as f64 / 2.0) {
        return Err(invalid(format!("p = {p} must exceed d/2")));
    }
    if !(kc.sigma3 > 0.0) {
        return Err(invalid("σ₃ must be positive"));
    }
    let q = conjugate(p);
    let base = d as f64 - q * (d as f64 - 2.0);
    assert!(base > 0.0);
    Ok((q, base))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bump_constant_examples() {
        assert!((bump_constant(1.0) - std::f64::consts::E).abs() < 1e-15);
        assert!((bump_constant(0.625) - 2.507).abs() < 1e-3);
    }

    #[test]
    fn bump_constant_is_the_supremum() {
        for gamma in [0.3, 0.625, 1.0, 1.6875] {
            let m = bump_constant(gamma);
            let mut violated = false;
            for i in 1..=10_000 {
                let r = 50.0 * i as f64 / 10_000.0;
                assert!(r.exp() >= m * r.powf(gamma) * (1.0 - 1e-12));
                violated |= r.exp() < 1.001 * m * r.powf(gamma);
            }
            assert!(violated);
            assert!((gamma.exp() - m * gamma.powf(gamma)).abs() < 1e-9);
        }
    }

    #[test]
    fn exponent_examples() {
        let ec = choose_exponents(3, 4.0, 2.0).unwrap();
        assert!((ec.q1 - 4.0 / 3.0).abs() < 1e-15);
        assert!((ec.alpha - 0.875).abs() < 1e-12);
        assert!((ec.q2 - 2.0).abs() < 1e-15);
        assert!((ec.beta - 0.625).abs() < 1e-12);
        assert!(ec.div_radial_integral(1.0).is_finite() && ec.div_radial_integral(1.0) > 0.0);
        assert!(ec.pot_radial_integral(1.0).is_finite() && ec.pot_radial_integral(1.0) > 0.0);
        assert!(choose_exponents(2, 1.5, 2.0).is_err());
    }

    #[test]
    fn majorant_examples() {
        let kc = KernelConstants {
            sigma1: 1.0,
            sigma2: 1.0,
            sigma3: 1.0,
            theta: 0.25,
            varsigma: 1.0,
        };
        assert!((aronson_majorant(&kc, 1, 1.0, &[0.0], &[1.0]) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(aronson_majorant(&kc, 3, 0.5, &[0.1, 0.2, 0.3], &[0.1, 0.2, 0.3]), 0.5f64.powf(-1.5));
    }

    #[test]
    fn khasminskii_examples() {
        let kc = KernelConstants {
            sigma1: 1.0,
            sigma2: 1.0,
            sigma3: 1.0,
            theta: 0.25,
            varsigma: 1.0,
        };
        assert!((khasminskii_threshold(&kc, 3, 2.0).unwrap() - 0.25).abs() < 1e-15);
        let wide = KernelConstants { varsigma: 2.0, ..kc };
        assert!(khasminskii_threshold(&wide, 3, 2.0).unwrap() < 0.25);
        let unit_ball = KernelConstants::identity(3, 0.25, 2.0);
        assert!((khasminskii_threshold(&unit_ball, 3, 2.0).unwrap() - 1.1107).abs() < 1e-4);
        assert!(khasminskii_threshold(&kc, 2, 2.0).is_err());
    }

    #[test]
    fn green_constant_three_d() {
        assert!((green_constant(3) - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!((green_constant(4) - 1.0 / (2.0 * std::f64::consts::PI.powi(2))).abs() < 1e-15);
    }

    #[test]
    fn zero_norms_give_zero_bounds() {
        let kc = KernelConstants::identity(2, 0.25, 2f64.sqrt());
        let ec = choose_exponents(2, 3.0, 2.0).unwrap();
        assert_eq!(lemma23_div_bound(&kc, &ec, 0.1, 0.0), 0.0);
        assert_eq!(lemma23_pot_bound(&kc, &ec, 0.1, 0.0), 0.0);
    }

    #[test]
    fn one_d_branches_match_closed_forms() {
        let kc = KernelConstants {
            sigma1: 1.3,
            sigma2: 0.7,
            sigma3: 0.0,
            theta: 0.25,
            varsigma: 1.5,
        };
        let ec = choose_exponents(1, 0.0, 0.0).unwrap();
        let t: f64 = 0.3;
        let div = 2f64.powf(1.5) * kc.sigma1 * kc.sigma2.powf(0.375) * kc.varsigma.powf(0.25) / (ec.m3 * t.powf(0.875));
        assert!((lemma23_div_bound(&kc, &ec, t, 1.0) - div).abs() < 1e-12 * div);
        assert!((lemma23_pot_bound(&kc, &ec, t, 2.0) - 2.0 * kc.sigma1 / t.sqrt()).abs() < 1e-12);
        let unit = KernelConstants {
            sigma1: 1.0,
            sigma2: 1.0,
            ..kc
        };
        assert!((lemma23_pot_bound(&unit, &ec, 1.0, 1.0) - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn div_bound_time_scaling(t in 1e-3f64..10.0, p1 in 2.1f64..8.0) {
            let kc = KernelConstants::identity(2, 0.25, 1.0);
            let ec = choose_exponents(2, p1, 2.0).unwrap();
            let ratio = lemma23_div_bound(&kc, &ec, 2.0 * t, 1.0) / lemma23_div_bound(&kc, &ec, t, 1.0);
            prop_assert!((ratio - 2f64.powf(-(1.0 + ec.alpha) / 2.0)).abs() < 1e-12);
        }

        #[test]
        fn exponents_satisfy_constraints(d in 2usize..5, dp1 in 0.05f64..6.0, dp2 in 0.05f64..6.0) {
            let ec = choose_exponents(d, d as f64 + dp1, d as f64 / 2.0 + dp2).unwrap();
            let df = d as f64;
            prop_assert!((1.0 / ec.p1 + 1.0 / ec.q1 - 1.0).abs() < 1e-12);
            prop_assert!(ec.alpha > 0.0 && ec.alpha < 1.0);
            prop_assert!(ec.q1 < df / (df - ec.alpha));
            prop_assert!(df / 2.0 - 1.0 < ec.beta && ec.beta < df / (2.0 * ec.q2));
        }

        #[test]
        fn threshold_linear_in_theta(theta in 0.01f64..0.49, s in 0.5f64..4.0) {
            let kc = KernelConstants::identity(3, theta, s);
            let base = KernelConstants::identity(3, 0.1, s);
            let r = khasminskii_threshold(&kc, 3, 2.0).unwrap() / khasminskii_threshold(&base, 3, 2.0).unwrap();
            prop_assert!((r - theta / 0.1).abs() < 1e-12);
        }
    }
}

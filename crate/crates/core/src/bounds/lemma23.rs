//! Quadrature of `∫_D h(t,x,y) div μ(y) dy` and `∫_D h(t,x,y) ν(y) dy` over
//! boxes, for comparison with the closed-form bounds.

use serde::Serialize;

use crate::bounds::{aronson_majorant, lemma23_div_bound, lemma23_pot_bound, ExponentChoices, KernelConstants};
use crate::quadrature::integrate_box;

pub const LEMMA23_REL_TOL: f64 = 1e-6;

fn breaks_at(x: &[f64], extra: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..x.len())
        .map(|k| {
            let mut b = vec![x[k]];
            if let Some(e) = extra.get(k) {
                b.extend(e);
            }
            b
        })
        .collect()
}

/// |∫_box h(t,x,y) div μ(y) dy|.
#[allow(clippy::too_many_arguments)]
pub fn lemma23_lhs_div(
    kc: &KernelConstants,
    t: f64,
    x: &[f64],
    lo: &[f64],
    hi: &[f64],
    div_mu: &dyn Fn(&[f64]) -> f64,
    extra_breaks: &[Vec<f64>],
) -> f64 {
    let d = x.len();
    integrate_box(
        lo,
        hi,
        &breaks_at(x, extra_breaks),
        &mut |y| aronson_majorant(kc, d, t, x, y) * div_mu(y),
        LEMMA23_REL_TOL,
        1e-14,
    )
    .abs()
}

/// |∫_box h(t,x,y) ν(y) dy|.
pub fn lemma23_lhs_pot(
    kc: &KernelConstants,
    t: f64,
    x: &[f64],
    lo: &[f64],
    hi: &[f64],
    nu: &dyn Fn(&[f64]) -> f64,
    extra_breaks: &[Vec<f64>],
) -> f64 {
    let d = x.len();
    integrate_box(
        lo,
        hi,
        &breaks_at(x, extra_breaks),
        &mut |y| aronson_majorant(kc, d, t, x, y) * nu(y),
        LEMMA23_REL_TOL,
        1e-14,
    )
    .abs()
}

/// (∫_box |f|^p)^{1/p} for a magnitude function `f ≥ 0`.
pub fn lp_norm(lo: &[f64], hi: &[f64], f: &dyn Fn(&[f64]) -> f64, p: f64, breaks: &[Vec<f64>]) -> f64 {
    integrate_box(lo, hi, breaks, &mut |y| f(y).abs().powf(p), 1e-10, 1e-15).powf(1.0 / p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma23Check {
    pub kind: &'static str,
    pub d: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub lhs: f64,
    pub bound: f64,
    pub pass: bool,
}

/// A vector field μ given by its Euclidean magnitude and its divergence.
pub struct DivField<'a> {
    pub magnitude: &'a dyn Fn(&[f64]) -> f64,
    pub divergence: &'a dyn Fn(&[f64]) -> f64,
    /// Break points per axis (support edges).
    pub breaks: Vec<Vec<f64>>,
}

impl Lemma23Check {
    pub fn div(
        kc: &KernelConstants,
        ec: &ExponentChoices,
        t: f64,
        x: &[f64],
        lo: &[f64],
        hi: &[f64],
        mu: &DivField<'_>,
    ) -> Lemma23Check {
        let lhs = lemma23_lhs_div(kc, t, x, lo, hi, mu.divergence, &mu.breaks);
        let norm = lp_norm(lo, hi, mu.magnitude, ec.p1, &mu.breaks);
        let bound = lemma23_div_bound(kc, ec, t, norm);
        Lemma23Check {
            kind: "div",
            d: x.len(),
            t,
            x: x.to_vec(),
            lhs,
            bound,
            pass: lhs <= bound,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn pot(
        kc: &KernelConstants,
        ec: &ExponentChoices,
        t: f64,
        x: &[f64],
        lo: &[f64],
        hi: &[f64],
        nu: &dyn Fn(&[f64]) -> f64,
        breaks: &[Vec<f64>],
    ) -> Lemma23Check {
        let lhs = lemma23_lhs_pot(kc, t, x, lo, hi, nu, breaks);
        let norm = lp_norm(lo, hi, nu, ec.p2, breaks);
        let bound = lemma23_pot_bound(kc, ec, t, norm);
        Lemma23Check {
            kind: "pot",
            d: x.len(),
            t,
            x: x.to_vec(),
            lhs,
            bound,
            pass: lhs <= bound,
        }
    }
}

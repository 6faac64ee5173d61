//! The standard mollifier J and convolution with J_k = k^d J(k·).
//!
//! Convolutions use a tensor Gauss–Legendre rule on the cube around the
//! support ball with the kernel set to zero outside the ball. The
//! normalizing constant of J is computed with the same rule, so constants
//! are reproduced to rounding.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::coeffs::expr::{EvalError, FieldExpr};
use crate::domain::Domain;
use crate::error::{invalid, Result};
use crate::quadrature::gauss_legendre;

pub const DEFAULT_QUAD_PTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MollifierParams {
    pub k: u32,
    pub quad_pts: usize,
}

impl MollifierParams {
    pub fn new(k: u32) -> Self {
        MollifierParams {
            k,
            quad_pts: DEFAULT_QUAD_PTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("mollification index k must be positive"));
        }
        if self.quad_pts < 8 {
            return Err(invalid(format!(
                "quadrature needs at least 8 nodes per axis, got {}",
                self.quad_pts
            )));
        }
        Ok(())
    }
}

/// Anything that can be evaluated at a point.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: &[f64]) -> std::result::Result<f64, EvalError>;
}

impl ScalarField for FieldExpr {
    fn value(&self, x: &[f64]) -> std::result::Result<f64, EvalError> {
        self.eval(x)
    }
}

impl<T: ScalarField + ?Sized> ScalarField for &T {
    fn value(&self, x: &[f64]) -> std::result::Result<f64, EvalError> {
        (**self).value(x)
    }
}

/// Adapter for plain closures.
pub struct FnField<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ScalarField for FnField<F> {
    fn value(&self, x: &[f64]) -> std::result::Result<f64, EvalError> {
        Ok((self.0)(x))
    }
}

/// A field that is set to zero outside `domain` (closure of D keeps the formula).
#[derive(Debug, Clone)]
pub struct Extended {
    pub expr: FieldExpr,
    pub domain: Domain,
}

impl ScalarField for Extended {
    fn value(&self, x: &[f64]) -> std::result::Result<f64, EvalError> {
        if self.domain.contains(x) {
            self.expr.eval(x)
        } else {
            Ok(0.0)
        }
    }
}

fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// Tensor nodes (flattened) and weights on [−1,1]^d restricted to the open unit ball.
fn tensor_ball_rule(d: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let total = n.pow(d as u32);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let mut r2 = 0.0;
        let mut wt = 1.0;
        for k in 0..d {
            r2 += x[idx[k]] * x[idx[k]];
            wt *= w[idx[k]];
        }
        if r2 < 1.0 {
            for k in 0..d {
                nodes.push(x[idx[k]]);
            }
            weights.push(wt);
        }
        for k in 0..d {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
    (nodes, weights)
}

/// ∫ exp(−1/(1−|y|²)) over the unit ball, by the tensor rule; cached.
pub fn normalizer(d: usize, quad_pts: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("normalizer cache poisoned").get(&(d, quad_pts)) {
        return *v;
    }
    let (nodes, weights) = tensor_ball_rule(d, quad_pts);
    let v: f64 = weights
        .iter()
        .enumerate()
        .map(|(q, w)| {
            let r2: f64 = nodes[q * d..(q + 1) * d].iter().map(|y| y * y).sum();
            w * bump(r2)
        })
        .sum();
    cache.lock().expect("normalizer cache poisoned").insert((d, quad_pts), v);
    v
}

/// J_k(x) = k^d J(kx).
pub fn mollifier_kernel(mp: &MollifierParams, x: &[f64]) -> f64 {
    let d = x.len();
    let k = mp.k as f64;
    let r2: f64 = x.iter().map(|v| (k * v) * (k * v)).sum();
    if r2 >= 1.0 {
        return 0.0;
    }
    k.powi(d as i32) * bump(r2) / normalizer(d, mp.quad_pts)
}

/// x ↦ ∫ f(x − y) J_k(y) dy with precomputed offsets and weights.
#[derive(Debug, Clone)]
pub struct Mollified<F> {
    inner: F,
    d: usize,
    offsets: Vec<f64>,
    weights: Vec<f64>,
    params: MollifierParams,
}

impl<F> Mollified<F> {
    pub fn params(&self) -> MollifierParams {
        self.params
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }
}

pub fn mollify_field<F: ScalarField>(f: F, d: usize, mp: MollifierParams) -> Result<Mollified<F>> {
    mp.validate()?;
    if d == 0 || d > 8 {
        return Err(invalid(format!("mollification supports 1 ≤ d ≤ 8, got {d}")));
    }
    let (nodes, w) = tensor_ball_rule(d, mp.quad_pts);
    let norm = normalizer(d, mp.quad_pts);
    let scale = 1.0 / mp.k as f64;
    let offsets = nodes.iter().map(|y| y * scale).collect();
    let weights = w
        .iter()
        .enumerate()
        .map(|(q, wq)| {
            let r2: f64 = nodes[q * d..(q + 1) * d].iter().map(|y| y * y).sum();
            wq * bump(r2) / norm
        })
        .collect();
    Ok(Mollified {
        inner: f,
        d,
        offsets,
        weights,
        params: mp,
    })
}

/// Component-wise mollification of a vector field.
pub fn mollify_vector<F: ScalarField>(fs: Vec<F>, d: usize, mp: MollifierParams) -> Result<Vec<Mollified<F>>> {
    fs.into_iter().map(|f| mollify_field(f, d, mp)).collect()
}

impl<F: ScalarField> ScalarField for Mollified<F> {
    fn value(&self, x: &[f64]) -> std::result::Result<f64, EvalError> {
        let d = self.d;
        let mut y = [0.0f64; 8];
        let y = &mut y[..d];
        let mut acc = 0.0;
        for (q, w) in self.weights.iter().enumerate() {
            for k in 0..d {
                y[k] = x[k] - self.offsets[q * d + k];
            }
            acc += w * self.inner.value(y)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::expr::parse_field_expr;

    #[test]
    fn kernel_support_and_scaling() {
        let mp = MollifierParams::new(4);
        assert_eq!(mollifier_kernel(&mp, &[0.25, 0.0]), 0.0);
        assert_eq!(mollifier_kernel(&mp, &[0.3, 0.1]), 0.0);
        let j0 = bump(0.0) / normalizer(2, mp.quad_pts);
        assert!((mollifier_kernel(&mp, &[0.0, 0.0]) - 16.0 * j0).abs() < 1e-12);
    }

    #[test]
    fn kernel_has_unit_mass() {
        for d in 1..=3 {
            let mp = MollifierParams::new(3);
            let one = mollify_field(FnField(|_: &[f64]| 1.0), d, mp).unwrap();
            assert!((one.value(&vec![0.2; d]).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn mass_agrees_with_radial_integral() {
        // independent check of the normalizer via 1D adaptive quadrature in polar form
        let radial = crate::quadrature::adaptive(|r| 2.0 * std::f64::consts::PI * r * bump(r * r), 0.0, 1.0, &[], 1e-13, 1e-15);
        let tensor = normalizer(2, 48);
        assert!((radial - tensor).abs() / radial < 1e-6, "{radial} vs {tensor}");
    }

    #[test]
    fn preserves_constants_and_linears() {
        let mp = MollifierParams::new(10);
        let k = mollify_field(parse_field_expr("2.5").unwrap(), 2, mp).unwrap();
        assert!((k.value(&[0.3, 0.7]).unwrap() - 2.5).abs() < 1e-8);
        let lin = mollify_field(parse_field_expr("x1").unwrap(), 2, MollifierParams::new(50)).unwrap();
        assert!((lin.value(&[0.4, 0.6]).unwrap() - 0.4).abs() < 1e-6);
    }

    #[test]
    fn step_at_jump_is_half() {
        let step = FnField(|x: &[f64]| if x[0] > 0.0 { 1.0 } else { 0.0 });
        for d in 1..=2 {
            let m = mollify_field(&step, d, MollifierParams::new(5)).unwrap();
            assert!((m.value(&vec![0.0; d]).unwrap() - 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_coarse_rule() {
        let mp = MollifierParams { k: 2, quad_pts: 6 };
        assert!(mollify_field(FnField(|_: &[f64]| 1.0), 1, mp).is_err());
    }

    #[test]
    fn converges_for_smooth_fields() {
        let f = parse_field_expr("sin(3*x1)*cos(x2)").unwrap();
        let probes = [[0.2, 0.3], [0.5, 0.5], [0.9, 0.1]];
        let mut prev = f64::INFINITY;
        for k in [2u32, 4, 8, 16] {
            let m = mollify_field(&f, 2, MollifierParams::new(k)).unwrap();
            let err = probes
                .iter()
                .map(|p| (m.value(p).unwrap() - f.eval(p).unwrap()).abs())
                .fold(0.0, f64::max);
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-2);
    }
}

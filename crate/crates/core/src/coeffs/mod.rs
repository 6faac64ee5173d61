//! Coefficient fields of the operator and their structural checks.
//!
//! Off the domain the evaluated fields follow the extension rule `A = I`,
//! `b = b̂ = 0`, `c = 0`. Path and stencil code inside `D` uses the `*_raw`
//! accessors, which evaluate the formulas directly so that finite-difference
//! stencils straddling `∂D` stay smooth.

pub mod expr;
pub mod mollify;

use std::sync::Arc;

pub use expr::{parse_field_expr, EvalError, FieldExpr, ParseError};
pub use mollify::{
    mollifier_kernel, mollify_field, mollify_vector, Extended, FnField, Mollified, MollifierParams, ScalarField,
};

use crate::domain::Domain;
use crate::error::{invalid, Error, Result};
use crate::linalg::{sym_eigenvalues, symmetrize, MAX_DIM};

#[derive(Debug)]
struct Smoothed {
    bhat: Vec<Mollified<Extended>>,
    c: Mollified<Extended>,
    g: Mollified<Extended>,
}

/// The fields A, b, b̂, c, g on D, with ellipticity constant λ and exponent p.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    d: usize,
    domain: Domain,
    a: Vec<FieldExpr>,
    b: Vec<FieldExpr>,
    bhat: Vec<FieldExpr>,
    c: FieldExpr,
    g: FieldExpr,
    p: f64,
    lambda: f64,
    mollifier: Option<MollifierParams>,
    smooth: Option<Arc<Smoothed>>,
    a_const: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityReport {
    pub min_eig: f64,
    pub max_abs_entry: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct CoefficientSetBuilder {
    domain: Domain,
    a: Vec<FieldExpr>,
    b: Vec<FieldExpr>,
    bhat: Vec<FieldExpr>,
    c: FieldExpr,
    g: FieldExpr,
    p: Option<f64>,
    lambda: f64,
    mollifier: Option<MollifierParams>,
}

impl CoefficientSetBuilder {
    fn check_index(&self, i: usize) -> Result<()> {
        let d = self.domain.dim();
        if i >= d {
            return Err(invalid(format!("component index {} exceeds dimension {d}", i + 1)));
        }
        Ok(())
    }

    /// Sets a_ij (zero-based indices).
    pub fn a(mut self, i: usize, j: usize, src: &str) -> Result<Self> {
        self.check_index(i)?;
        self.check_index(j)?;
        let d = self.domain.dim();
        self.a[i * d + j] = parse_field_expr(src)?;
        Ok(self)
    }

    /// Sets the whole matrix from row-major sources.
    pub fn matrix(mut self, rows: &[&[&str]]) -> Result<Self> {
        let d = self.domain.dim();
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(invalid(format!("matrix must be {d}x{d}")));
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, src) in row.iter().enumerate() {
                self.a[i * d + j] = parse_field_expr(src)?;
            }
        }
        Ok(self)
    }

    pub fn b(mut self, i: usize, src: &str) -> Result<Self> {
        self.check_index(i)?;
        self.b[i] = parse_field_expr(src)?;
        Ok(self)
    }

    pub fn bhat(mut self, i: usize, src: &str) -> Result<Self> {
        self.check_index(i)?;
        self.bhat[i] = parse_field_expr(src)?;
        Ok(self)
    }

    pub fn c(mut self, src: &str) -> Result<Self> {
        self.c = parse_field_expr(src)?;
        Ok(self)
    }

    pub fn g(mut self, src: &str) -> Result<Self> {
        self.g = parse_field_expr(src)?;
        Ok(self)
    }

    pub fn set_a(mut self, i: usize, j: usize, e: FieldExpr) -> Self {
        let d = self.domain.dim();
        self.a[i * d + j] = e;
        self
    }

    pub fn set_b(mut self, i: usize, e: FieldExpr) -> Self {
        self.b[i] = e;
        self
    }

    pub fn set_bhat(mut self, i: usize, e: FieldExpr) -> Self {
        self.bhat[i] = e;
        self
    }

    pub fn set_c(mut self, e: FieldExpr) -> Self {
        self.c = e;
        self
    }

    pub fn set_g(mut self, e: FieldExpr) -> Self {
        self.g = e;
        self
    }

    pub fn p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn mollifier(mut self, mp: Option<MollifierParams>) -> Self {
        self.mollifier = mp;
        self
    }

    pub fn build(self) -> Result<CoefficientSet> {
        let d = self.domain.dim();
        if d == 0 || d > MAX_DIM {
            return Err(invalid(format!("dimension must be between 1 and {MAX_DIM}, got {d}")));
        }
        let p = self.p.unwrap_or(d as f64);
        if !(p > d as f64 / 2.0) {
            return Err(invalid(format!("p = {p} must exceed d/2 = {}", d as f64 / 2.0)));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(invalid(format!("lambda = {} must lie in (0, 1]", self.lambda)));
        }
        let fields = self
            .a
            .iter()
            .chain(&self.b)
            .chain(&self.bhat)
            .chain([&self.c, &self.g]);
        for f in fields {
            if f.arity() > d {
                return Err(invalid(format!("expression `{f}` uses x{} but d = {d}", f.arity())));
            }
        }
        let smooth = match self.mollifier {
            Some(mp) => {
                let ext = |e: &FieldExpr| Extended {
                    expr: e.clone(),
                    domain: self.domain.clone(),
                };
                Some(Arc::new(Smoothed {
                    bhat: mollify_vector(self.bhat.iter().map(ext).collect(), d, mp)?,
                    c: mollify_field(ext(&self.c), d, mp)?,
                    g: mollify_field(ext(&self.g), d, mp)?,
                }))
            }
            None => None,
        };
        let a_const = self.a.iter().all(|e| e.as_constant().is_some());
        let cs = CoefficientSet {
            d,
            domain: self.domain,
            a: self.a,
            b: self.b,
            bhat: self.bhat,
            c: self.c,
            g: self.g,
            p,
            lambda: self.lambda,
            mollifier: self.mollifier,
            smooth,
            a_const,
        };
        for x in cs.sample_points(9) {
            let gv = cs.eval_g(&x)?;
            if gv < 0.0 {
                return Err(invalid(format!("g = {gv} < 0 at {x:?}")));
            }
        }
        Ok(cs)
    }
}

impl CoefficientSet {
    /// Identity diffusion and vanishing lower-order terms on `domain`.
    pub fn builder(domain: Domain) -> CoefficientSetBuilder {
        let d = domain.dim();
        let mut a = vec![FieldExpr::zero(); d * d];
        for i in 0..d {
            a[i * d + i] = FieldExpr::constant(1.0);
        }
        CoefficientSetBuilder {
            domain,
            a,
            b: vec![FieldExpr::zero(); d],
            bhat: vec![FieldExpr::zero(); d],
            c: FieldExpr::zero(),
            g: FieldExpr::zero(),
            p: None,
            lambda: 1.0,
            mollifier: None,
        }
    }

    /// Brownian motion (A = I, no lower-order terms) on `domain`.
    pub fn laplacian(domain: Domain) -> CoefficientSet {
        CoefficientSet::builder(domain).build().expect("identity set is valid")
    }

    /// A builder pre-loaded with this set's fields.
    pub fn to_builder(&self) -> CoefficientSetBuilder {
        CoefficientSetBuilder {
            domain: self.domain.clone(),
            a: self.a.clone(),
            b: self.b.clone(),
            bhat: self.bhat.clone(),
            c: self.c.clone(),
            g: self.g.clone(),
            p: Some(self.p),
            lambda: self.lambda,
            mollifier: self.mollifier,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mollifier(&self) -> Option<MollifierParams> {
        self.mollifier
    }

    pub fn a_expr(&self, i: usize, j: usize) -> &FieldExpr {
        &self.a[i * self.d + j]
    }

    pub fn b_expr(&self, i: usize) -> &FieldExpr {
        &self.b[i]
    }

    pub fn bhat_expr(&self, i: usize) -> &FieldExpr {
        &self.bhat[i]
    }

    pub fn c_expr(&self) -> &FieldExpr {
        &self.c
    }

    pub fn g_expr(&self) -> &FieldExpr {
        &self.g
    }

    pub fn is_matrix_constant(&self) -> bool {
        self.a_const
    }

    pub fn is_b_zero(&self) -> bool {
        self.b.iter().all(FieldExpr::is_zero)
    }

    pub fn is_bhat_zero(&self) -> bool {
        self.bhat.iter().all(FieldExpr::is_zero)
    }

    pub fn is_c_zero(&self) -> bool {
        self.c.is_zero()
    }

    /// The set with b̂, c, g replaced by their index-k mollifications.
    pub fn with_mollifier(&self, mp: Option<MollifierParams>) -> Result<CoefficientSet> {
        self.to_builder().mollifier(mp).build()
    }

    /// A(x) for x ∈ D and the identity elsewhere.
    pub fn eval_matrix(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.d * self.d];
        self.matrix_into(x, &mut out, true)?;
        Ok(out)
    }

    /// A(x) into `out`; `extend` selects the off-D identity rule.
    #[inline]
    pub fn matrix_into(&self, x: &[f64], out: &mut [f64], extend: bool) -> Result<()> {
        let d = self.d;
        if extend && !self.domain.contains(x) {
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] = if i == j { 1.0 } else { 0.0 };
                }
            }
            return Ok(());
        }
        for (o, e) in out.iter_mut().zip(&self.a) {
            *o = e.eval(x).map_err(Error::eval_at(x))?;
        }
        Ok(())
    }

    #[inline]
    pub fn b_into(&self, x: &[f64], out: &mut [f64], extend: bool) -> Result<()> {
        if extend && !self.domain.contains(x) {
            out[..self.d].fill(0.0);
            return Ok(());
        }
        for (o, e) in out.iter_mut().zip(&self.b) {
            *o = e.eval(x).map_err(Error::eval_at(x))?;
        }
        Ok(())
    }

    pub fn eval_b(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.d];
        self.b_into(x, &mut out, true)?;
        Ok(out)
    }

    /// b̂(x): the mollified field when configured, else the formula
    /// (extended by zero off D when `extend`).
    #[inline]
    pub fn bhat_into(&self, x: &[f64], out: &mut [f64], extend: bool) -> Result<()> {
        if let Some(s) = &self.smooth {
            for (o, m) in out.iter_mut().zip(&s.bhat) {
                *o = m.value(x).map_err(Error::eval_at(x))?;
            }
            return Ok(());
        }
        if extend && !self.domain.contains(x) {
            out[..self.d].fill(0.0);
            return Ok(());
        }
        for (o, e) in out.iter_mut().zip(&self.bhat) {
            *o = e.eval(x).map_err(Error::eval_at(x))?;
        }
        Ok(())
    }

    pub fn eval_bhat(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.d];
        self.bhat_into(x, &mut out, true)?;
        Ok(out)
    }

    #[inline]
    pub fn c_at(&self, x: &[f64], extend: bool) -> Result<f64> {
        if let Some(s) = &self.smooth {
            return s.c.value(x).map_err(Error::eval_at(x));
        }
        if extend && !self.domain.contains(x) {
            return Ok(0.0);
        }
        self.c.eval(x).map_err(Error::eval_at(x))
    }

    pub fn eval_c(&self, x: &[f64]) -> Result<f64> {
        self.c_at(x, true)
    }

    pub fn eval_g(&self, x: &[f64]) -> Result<f64> {
        if let Some(s) = &self.smooth {
            return s.g.value(x).map_err(Error::eval_at(x));
        }
        if !self.domain.contains(x) {
            return Ok(0.0);
        }
        self.g.eval(x).map_err(Error::eval_at(x))
    }

    /// div b̂ by central differences of step `fd_step`.
    pub fn div_bhat(&self, x: &[f64], fd_step: f64) -> Result<f64> {
        let d = self.d;
        let mut y = [0.0; MAX_DIM];
        y[..d].copy_from_slice(x);
        let mut div = 0.0;
        for i in 0..d {
            let e = &self.bhat[i];
            if self.smooth.is_none() && e.as_constant().is_some() {
                continue;
            }
            let comp = |y: &[f64]| -> Result<f64> {
                match &self.smooth {
                    Some(s) => s.bhat[i].value(y).map_err(Error::eval_at(y)),
                    None => e.eval(y).map_err(Error::eval_at(y)),
                }
            };
            y[i] = x[i] + fd_step;
            let hi = comp(&y[..d])?;
            y[i] = x[i] - fd_step;
            let lo = comp(&y[..d])?;
            y[i] = x[i];
            div += (hi - lo) / (2.0 * fd_step);
        }
        Ok(div)
    }

    /// β_i = ½ Σ_j ∂_j a_ij by central differences of the formula.
    pub fn drift_correction_into(&self, x: &[f64], fd_step: f64, out: &mut [f64]) -> Result<()> {
        let d = self.d;
        out[..d].fill(0.0);
        if self.a_const {
            return Ok(());
        }
        let mut y = [0.0; MAX_DIM];
        y[..d].copy_from_slice(x);
        for j in 0..d {
            for i in 0..d {
                let e = &self.a[i * d + j];
                if e.as_constant().is_some() {
                    continue;
                }
                y[j] = x[j] + fd_step;
                let hi = e.eval(&y[..d]).map_err(Error::eval_at(&y[..d]))?;
                y[j] = x[j] - fd_step;
                let lo = e.eval(&y[..d]).map_err(Error::eval_at(&y[..d]))?;
                y[j] = x[j];
                out[i] += 0.5 * (hi - lo) / (2.0 * fd_step);
            }
        }
        Ok(())
    }

    /// Minimum eigenvalue of Ã and maximum |a_ij| over the sample points.
    pub fn check_uniform_ellipticity(&self, samples: &[Vec<f64>]) -> Result<EllipticityReport> {
        if samples.is_empty() {
            return Err(invalid("ellipticity check needs at least one sample point"));
        }
        let d = self.d;
        let mut min_eig = f64::INFINITY;
        let mut max_abs: f64 = 0.0;
        let mut a = vec![0.0; d * d];
        for x in samples {
            self.matrix_into(x, &mut a, false)?;
            max_abs = a.iter().fold(max_abs, |m, v| m.max(v.abs()));
            let ev = sym_eigenvalues(&symmetrize(&a, d), d);
            min_eig = min_eig.min(ev[0]);
        }
        let tol = 1e-12;
        Ok(EllipticityReport {
            min_eig,
            max_abs_entry: max_abs,
            pass: min_eig >= self.lambda - tol && max_abs <= 1.0 / self.lambda + tol,
        })
    }

    /// Interior lattice points: `n` per axis of the bounding box, kept if in D.
    pub fn sample_points(&self, n: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.domain.bbox();
        let d = self.d;
        let mut pts = Vec::new();
        let mut idx = vec![0usize; d];
        for _ in 0..n.pow(d as u32) {
            let x: Vec<f64> = (0..d)
                .map(|k| lo[k] + (hi[k] - lo[k]) * (idx[k] as f64 + 0.5) / n as f64)
                .collect();
            if self.domain.contains(&x) {
                pts.push(x);
            }
            for k in 0..d {
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
            }
        }
        pts
    }

    /// Largest value of (c − div b̂) − g over the sample points; ≤ 0 when g dominates.
    pub fn g_dominance_gap(&self, samples: &[Vec<f64>], fd_step: f64) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for x in samples {
            let v = self.eval_c(x)? - self.div_bhat(x, fd_step)? - self.eval_g(x)?;
            worst = worst.max(v);
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square() -> Domain {
        Domain::unit_cube(2)
    }

    #[test]
    fn matrix_examples() {
        let id = CoefficientSet::laplacian(square());
        assert_eq!(id.eval_matrix(&[0.3, 0.4]).unwrap(), vec![1.0, 0.0, 0.0, 1.0]);
        let cs = CoefficientSet::builder(square())
            .matrix(&[&["1", "0.4"], &["0", "1"]])
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(cs.eval_matrix(&[0.5, 0.5]).unwrap(), vec![1.0, 0.4, 0.0, 1.0]);
        assert_eq!(cs.eval_matrix(&[1.5, 0.5]).unwrap(), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn extension_zeroes_lower_order() {
        let cs = CoefficientSet::builder(square())
            .b(0, "1 + x1")
            .unwrap()
            .bhat(1, "x2")
            .unwrap()
            .c("3")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(cs.eval_b(&[2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(cs.eval_bhat(&[0.5, -1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(cs.eval_c(&[0.5, 1.0]).unwrap(), 0.0);
        assert_eq!(cs.eval_c(&[0.5, 0.5]).unwrap(), 3.0);
    }

    #[test]
    fn ellipticity_examples() {
        let pts = vec![vec![0.5, 0.5]];
        let id = CoefficientSet::laplacian(square());
        let r = id.check_uniform_ellipticity(&pts).unwrap();
        assert!(r.pass && r.min_eig == 1.0 && r.max_abs_entry == 1.0);

        let bad = CoefficientSet::builder(square())
            .matrix(&[&["1", "3"], &["3", "1"]])
            .unwrap()
            .lambda(0.2)
            .build()
            .unwrap();
        let r = bad.check_uniform_ellipticity(&pts).unwrap();
        assert!(!r.pass);
        assert!((r.min_eig + 2.0).abs() < 1e-12);

        let ok = CoefficientSet::builder(square())
            .matrix(&[&["1", "0.4"], &["0", "1"]])
            .unwrap()
            .lambda(0.5)
            .build()
            .unwrap();
        let r = ok.check_uniform_ellipticity(&ok.sample_points(5)).unwrap();
        assert!(r.pass);
        assert!((r.min_eig - 0.8).abs() < 1e-12);
    }

    #[test]
    fn structural_assumptions_enforced() {
        assert!(CoefficientSet::builder(square()).p(1.0).build().is_err());
        assert!(CoefficientSet::builder(square()).lambda(0.0).build().is_err());
        assert!(CoefficientSet::builder(square()).c("x3").unwrap().build().is_err());
        assert!(CoefficientSet::builder(square()).g("x1 - 0.5").unwrap().build().is_err());
        assert!(CoefficientSet::builder(square()).b(2, "1").is_err());
    }

    #[test]
    fn drift_correction_examples() {
        let cs = CoefficientSet::builder(square())
            .matrix(&[&["1 + x1^2", "0"], &["0", "1 + x1^2"]])
            .unwrap()
            .build()
            .unwrap();
        let mut beta = [0.0; 2];
        cs.drift_correction_into(&[0.5, 0.0], 1e-5, &mut beta).unwrap();
        assert!((beta[0] - 0.5).abs() < 1e-8 && beta[1].abs() < 1e-12);
        let k = CoefficientSet::builder(square())
            .matrix(&[&["1", "0.4"], &["0", "1"]])
            .unwrap()
            .build()
            .unwrap();
        k.drift_correction_into(&[0.5, 0.5], 1e-5, &mut beta).unwrap();
        assert_eq!(beta, [0.0, 0.0]);
    }

    #[test]
    fn divergence_examples() {
        let rot = CoefficientSet::builder(square())
            .bhat(0, "-x2")
            .unwrap()
            .bhat(1, "x1")
            .unwrap()
            .build()
            .unwrap();
        assert!(rot.div_bhat(&[0.3, 0.6], 1e-5).unwrap().abs() < 1e-9);
        let radial = CoefficientSet::builder(square())
            .bhat(0, "x1")
            .unwrap()
            .bhat(1, "x2")
            .unwrap()
            .build()
            .unwrap();
        assert!((radial.div_bhat(&[0.3, 0.6], 1e-5).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn mollified_g_stays_nonnegative() {
        let cs = CoefficientSet::builder(square())
            .g("abs(sin(7*x1))*x2")
            .unwrap()
            .mollifier(Some(MollifierParams::new(8)))
            .build()
            .unwrap();
        for x in cs.sample_points(7) {
            assert!(cs.eval_g(&x).unwrap() >= 0.0);
        }
    }

    fn matrix_strategy() -> impl Strategy<Value = Vec<f64>> {
        // diagonally dominant symmetric part keeps Ã ≥ λ with λ = 0.25
        (0.6f64..1.5, 0.6f64..1.5, -0.3f64..0.3, -1.0f64..1.0)
            .prop_map(|(a11, a22, s, k)| vec![a11, s + k * 0.5, s - k * 0.5, a22])
    }

    proptest! {
        #[test]
        fn symmetrize_idempotent_and_linear(a in matrix_strategy(), b in matrix_strategy(), t in -2.0f64..2.0) {
            let s = symmetrize(&a, 2);
            prop_assert_eq!(symmetrize(&s, 2), s.clone());
            let comb: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + t * y).collect();
            let lhs = symmetrize(&comb, 2);
            let sb = symmetrize(&b, 2);
            for k in 0..4 {
                prop_assert!((lhs[k] - (s[k] + t * sb[k])).abs() < 1e-12);
            }
            // the antisymmetric remainder has zero diagonal and is skew
            let r: Vec<f64> = a.iter().zip(&s).map(|(x, y)| x - y).collect();
            prop_assert_eq!(r[0], 0.0);
            prop_assert_eq!(r[3], 0.0);
            prop_assert!((r[1] + r[2]).abs() < 1e-15);
        }

        #[test]
        fn quadratic_form_within_ellipticity_band(a in matrix_strategy(), phi in 0.0f64..std::f64::consts::TAU) {
            let srcs: Vec<String> = a.iter().map(|v| format!("{v}")).collect();
            let cs = CoefficientSet::builder(square())
                .matrix(&[&[&srcs[0], &srcs[1]], &[&srcs[2], &srcs[3]]]).unwrap()
                .lambda(0.25)
                .build().unwrap();
            let pts = cs.sample_points(3);
            let rep = cs.check_uniform_ellipticity(&pts).unwrap();
            prop_assume!(rep.pass);
            let xi = [phi.cos(), phi.sin()];
            let s = symmetrize(&a, 2);
            let q: f64 = (0..2).map(|i| (0..2).map(|j| xi[i] * s[i * 2 + j] * xi[j]).sum::<f64>()).sum();
            prop_assert!(q >= 0.25 - 1e-12 && q <= 4.0 / 0.25 + 1e-12);
        }

        #[test]
        fn mollification_preserves_sign(k in 2u32..12, x in 0.05f64..0.95, y in 0.05f64..0.95) {
            let cs = CoefficientSet::builder(square())
                .g("max(0, x1 - 0.5) + abs(x2 - 0.3)").unwrap()
                .mollifier(Some(MollifierParams::new(k)))
                .build().unwrap();
            prop_assert!(cs.eval_g(&[x, y]).unwrap() >= 0.0);
        }
    }
}

//! ∫ f T_t g dx on the grid via the dense exponential of the generator.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::coeffs::{CoefficientSet, ScalarField};
use crate::error::{invalid, Error, Result};
use crate::oracle::assemble::generator_matrix;
use crate::oracle::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairingReport {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

/// Interior block of the discrete generator with mass weights.
#[derive(Debug, Clone)]
pub struct SemigroupOracle {
    grid: Arc<Grid>,
    interior: Vec<usize>,
    mass: DVector<f64>,
    generator: DMatrix<f64>,
    norm1: f64,
}

impl SemigroupOracle {
    pub fn new(cs: &CoefficientSet, grid: &Arc<Grid>) -> Result<SemigroupOracle> {
        let interior = grid.interior_indices();
        if interior.len() > 4000 {
            return Err(invalid(format!(
                "{} interior nodes is too many for a dense exponential",
                interior.len()
            )));
        }
        let l = generator_matrix(cs, grid)?.matrix;
        let n = interior.len();
        let mut pos = vec![usize::MAX; grid.num_nodes()];
        for (i, &g) in interior.iter().enumerate() {
            pos[g] = i;
        }
        let mut generator = DMatrix::<f64>::zeros(n, n);
        for (i, &r) in interior.iter().enumerate() {
            for (c, v) in l.row(r) {
                if pos[c] != usize::MAX {
                    generator[(i, pos[c])] += v;
                }
            }
        }
        let norm1 = (0..n).map(|j| generator.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let mass = DVector::from_iterator(n, interior.iter().map(|&i| grid.node_weight(i)));
        Ok(SemigroupOracle {
            grid: grid.clone(),
            interior,
            mass,
            generator,
            norm1,
        })
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    /// Nodal samples of a field on the interior nodes.
    pub fn sample<F: ScalarField>(&self, f: &F) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.interior.len());
        for (i, &g) in self.interior.iter().enumerate() {
            let x = self.grid.coord(g);
            out[i] = f.value(&x).map_err(Error::eval_at(&x))?;
        }
        Ok(out)
    }

    /// exp(tL) by scaling and squaring with Padé approximants.
    pub fn propagator(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(t > 0.0) {
            return Err(invalid("semigroup time must be positive"));
        }
        let e = (&self.generator * t).exp();
        if e.iter().any(|v| !v.is_finite()) {
            let depth = (t * self.norm1).log2().ceil().max(0.0) as i64;
            return Err(Error::Numerical(format!(
                "matrix exponential overflowed for t·‖L‖₁ = {:.3e}; suggested squaring depth {depth}",
                t * self.norm1
            )));
        }
        Ok(e)
    }

    /// Σ_i m_i f_i (e^{tL} g)_i.
    pub fn pairing<F: ScalarField, G: ScalarField>(&self, f: &F, g: &G, t: f64) -> Result<f64> {
        let fv = self.sample(f)?;
        let gv = self.sample(g)?;
        let tg = self.propagator(t)? * gv;
        Ok(fv.component_mul(&self.mass).dot(&tg))
    }

    /// Σ_i m_i f_i g_i (the t = 0 value).
    pub fn mass_pairing<F: ScalarField, G: ScalarField>(&self, f: &F, g: &G) -> Result<f64> {
        Ok(self.sample(f)?.component_mul(&self.mass).dot(&self.sample(g)?))
    }
}

/// Oracle pairing at `t` against a supplied Monte Carlo estimate.
pub fn semigroup_pairing<F: ScalarField, G: ScalarField>(
    cs: &CoefficientSet,
    grid: &Arc<Grid>,
    f: &F,
    g: &G,
    t: f64,
    mc_estimate: f64,
) -> Result<PairingReport> {
    let lhs = SemigroupOracle::new(cs, grid)?.pairing(f, g, t)?;
    Ok(PairingReport {
        t,
        lhs,
        rhs: mc_estimate,
        rel_err: (lhs - mc_estimate).abs() / lhs.abs().max(1e-300),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::FnField;
    use crate::domain::Domain;
    use std::f64::consts::PI;

    fn setup(delta: f64) -> (CoefficientSet, Arc<Grid>) {
        let dom = Domain::unit_cube(1);
        (CoefficientSet::laplacian(dom.clone()), Arc::new(Grid::for_domain(&dom, delta).unwrap()))
    }

    #[test]
    fn small_time_is_identity() {
        let (cs, g) = setup(1.0 / 100.0);
        let s = FnField(|x: &[f64]| (PI * x[0]).sin());
        let o = SemigroupOracle::new(&cs, &g).unwrap();
        let v = o.pairing(&s, &s, 1e-6).unwrap();
        assert!((v - 0.5).abs() / 0.5 < 1e-4);
    }

    #[test]
    fn eigenfunction_decay() {
        let s = FnField(|x: &[f64]| (PI * x[0]).sin());
        for (t, delta) in [(0.05, 1.0 / 50.0), (0.2, 1.0 / 50.0)] {
            let (cs, g) = setup(delta);
            let v = SemigroupOracle::new(&cs, &g).unwrap().pairing(&s, &s, t).unwrap();
            let exact = 0.5 * (-PI * PI * t / 2.0).exp();
            assert!((v - exact).abs() < exact * PI * PI * delta * delta, "{v} vs {exact}");
        }
    }

    #[test]
    fn report_relative_error() {
        let (cs, g) = setup(0.05);
        let s = FnField(|x: &[f64]| (PI * x[0]).sin());
        let r = semigroup_pairing(&cs, &g, &s, &s, 0.1, 0.3).unwrap();
        assert!((r.rel_err - (r.lhs - 0.3).abs() / r.lhs).abs() < 1e-15);
    }

    #[test]
    fn mollified_bhat_converges_in_k() {
        let dom = Domain::unit_cube(1);
        let g = Arc::new(Grid::for_domain(&dom, 1.0 / 40.0).unwrap());
        let f = FnField(|x: &[f64]| x[0] * (1.0 - x[0]));
        let mut vals = Vec::new();
        for k in [4u32, 8, 16, 32] {
            let cs = CoefficientSet::builder(dom.clone())
                .bhat(0, "0.5*x1")
                .unwrap()
                .mollifier(Some(crate::coeffs::MollifierParams::new(k)))
                .build()
                .unwrap();
            vals.push(SemigroupOracle::new(&cs, &g).unwrap().pairing(&f, &f, 0.1).unwrap());
        }
        let d1 = (vals[1] - vals[0]).abs();
        let d2 = (vals[2] - vals[1]).abs();
        let d3 = (vals[3] - vals[2]).abs();
        assert!(d2 < d1 && d3 < d2, "{vals:?}");
    }
}

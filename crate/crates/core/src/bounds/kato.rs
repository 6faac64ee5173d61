//! Smallest A(ε) with ∫ W η² ≤ ε∫|∇η|² + A(ε)∫η² on a grid, where
//! W = Σ(b_i² + b̂_i²) + |c|.

use std::sync::Arc;

use serde::Serialize;

use crate::coeffs::CoefficientSet;
use crate::error::{invalid, Error, Result};
use crate::linalg::MAX_DIM;
use crate::oracle::grid::{CoeffRule, Grid, NodeClass};
use crate::oracle::{SparseLu, SparseMatrix};

#[derive(Debug, Clone, Serialize)]
pub struct KatoReport {
    pub epsilon: f64,
    pub constant: f64,
    pub iterations: usize,
    /// Rayleigh quotient after each iteration (first 200).
    pub history: Vec<f64>,
}

const TOL: f64 = 1e-8;
const MAX_ITER: usize = 20_000;

/// |b|² + |b̂|² + |c| at one point.
pub fn kato_weight_at(cs: &CoefficientSet, x: &[f64], extend: bool) -> Result<f64> {
    let mut b = [0.0; MAX_DIM];
    let d = x.len();
    cs.b_into(x, &mut b[..d], extend)?;
    let mut s: f64 = b[..d].iter().map(|v| v * v).sum();
    cs.bhat_into(x, &mut b[..d], extend)?;
    s += b[..d].iter().map(|v| v * v).sum::<f64>();
    Ok(s + cs.c_at(x, extend)?.abs())
}

/// Kato weight at the non-exterior nodes (zero elsewhere).
pub fn kato_weight(cs: &CoefficientSet, grid: &Grid) -> Result<Vec<f64>> {
    let extend = grid.rule() == CoeffRule::Extended;
    let mut out = vec![0.0; grid.num_nodes()];
    for (i, w) in out.iter_mut().enumerate() {
        if grid.class(i) != NodeClass::Exterior {
            *w = kato_weight_at(cs, &grid.coord(i), extend)?;
        }
    }
    Ok(out)
}

/// Neumann stiffness ∫|∇η|² over the edges between non-exterior nodes.
pub fn neumann_stiffness(grid: &Grid) -> SparseMatrix {
    let d = grid.dim();
    let delta = grid.delta();
    let mut trips = Vec::new();
    for i in 0..grid.num_nodes() {
        if grid.class(i) == NodeClass::Exterior {
            continue;
        }
        for k in 0..d {
            let Some(m) = grid.neighbor(i, k, 1) else { continue };
            if grid.class(m) == NodeClass::Exterior {
                continue;
            }
            let s = grid.edge_weight(i, k) / (delta * delta);
            trips.extend([(i, i, s), (i, m, -s), (m, i, -s), (m, m, s)]);
        }
    }
    SparseMatrix::from_triplets(grid.num_nodes(), trips)
}

/// Top generalized eigenvalue of (W·M − εS, M) by power iteration on the
/// shifted inverse (σM − W·M + εS)⁻¹M with σ above max W.
pub fn kato_constant(cs: &CoefficientSet, grid: &Arc<Grid>, epsilon: f64) -> Result<KatoReport> {
    if !(epsilon >= 0.0) {
        return Err(invalid("ε must be non-negative"));
    }
    let nodes: Vec<usize> = (0..grid.num_nodes()).filter(|&i| grid.class(i) != NodeClass::Exterior).collect();
    let n = nodes.len();
    let mut pos = vec![usize::MAX; grid.num_nodes()];
    for (i, &g) in nodes.iter().enumerate() {
        pos[g] = i;
    }
    let w_all = kato_weight(cs, grid)?;
    let w: Vec<f64> = nodes.iter().map(|&i| w_all[i]).collect();
    let m: Vec<f64> = nodes.iter().map(|&i| grid.node_weight(i)).collect();
    let s = neumann_stiffness(grid);
    let s_local = SparseMatrix::from_triplets(n, s.restrict(&nodes, &pos));
    let wmax = w.iter().copied().fold(0.0, f64::max);
    let sigma = wmax + 1e-3 * (1.0 + wmax);
    let mut trips: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, (sigma - w[i]) * m[i])).collect();
    for r in 0..n {
        trips.extend(s_local.row(r).map(|(c, v)| (r, c, epsilon * v)));
    }
    let lu = SparseLu::factor(n, &trips)?;
    let rayleigh = |v: &[f64]| {
        let sv = s_local.mul_vec(v);
        let num: f64 = (0..n).map(|i| v[i] * (w[i] * m[i] * v[i] - epsilon * sv[i])).sum();
        let den: f64 = (0..n).map(|i| v[i] * m[i] * v[i]).sum();
        num / den
    };
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 1e-3 * (i % 7) as f64).collect();
    let mut history = Vec::new();
    let mut last = rayleigh(&v);
    for it in 1..=MAX_ITER {
        let rhs: Vec<f64> = (0..n).map(|i| m[i] * v[i]).collect();
        let y = lu.solve(&rhs)?;
        let norm = (0..n).map(|i| y[i] * y[i] * m[i]).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::Numerical("power iteration collapsed to zero".into()));
        }
        v = y.into_iter().map(|x| x / norm).collect();
        let rq = rayleigh(&v);
        if history.len() < 200 {
            history.push(rq);
        }
        if it >= 3 && (rq - last).abs() <= TOL * 1e-2 * rq.abs().max(1e-12) {
            return Ok(KatoReport {
                epsilon,
                constant: rq,
                iterations: it,
                history,
            });
        }
        last = rq;
    }
    Err(Error::Numerical(format!(
        "power iteration stagnated after {MAX_ITER} iterations; Rayleigh quotients {history:?}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;

    fn grid(delta: f64) -> Arc<Grid> {
        Arc::new(Grid::for_domain(&Domain::unit_cube(2), delta).unwrap())
    }

    #[test]
    fn constant_potential() {
        let cs = CoefficientSet::builder(Domain::unit_cube(2)).c("0.7").unwrap().build().unwrap();
        for eps in [0.0, 0.1, 1.0] {
            let r = kato_constant(&cs, &grid(0.125), eps).unwrap();
            assert!((r.constant - 0.7).abs() < 1e-7, "{r:?}");
        }
    }

    #[test]
    fn matches_dense_eigenvalue() {
        let cs = CoefficientSet::builder(Domain::unit_cube(2))
            .b(0, "sin(pi*x1)")
            .unwrap()
            .c("x2")
            .unwrap()
            .build()
            .unwrap();
        let g = grid(0.125);
        let eps = 0.01;
        let r = kato_constant(&cs, &g, eps).unwrap();
        let w = kato_weight(&cs, &g).unwrap();
        let s = neumann_stiffness(&g).to_dense();
        let n = g.num_nodes();
        let mut c = -s * eps;
        for i in 0..n {
            c[(i, i)] += w[i] * g.node_weight(i);
        }
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] /= (g.node_weight(i) * g.node_weight(j)).sqrt();
            }
        }
        let top = c.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((r.constant - top).abs() < 1e-6 * top.abs(), "{} vs {top}", r.constant);
    }

    #[test]
    fn nonincreasing_in_epsilon() {
        let cs = CoefficientSet::builder(Domain::unit_cube(2)).b(0, "sin(pi*x1)").unwrap().build().unwrap();
        let g = grid(0.125);
        let mut prev = f64::INFINITY;
        for eps in [0.0, 0.01, 0.05, 0.2] {
            let a = kato_constant(&cs, &g, eps).unwrap().constant;
            assert!(a <= prev + 1e-9);
            prev = a;
        }
    }
}

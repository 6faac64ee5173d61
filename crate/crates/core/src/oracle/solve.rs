//! Linear solves: the weak Dirichlet problem and the resolvent function ξ^H.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};

use crate::coeffs::{CoefficientSet, ScalarField};
use crate::error::{invalid, Error, Result};
use crate::linalg::MAX_DIM;
use crate::oracle::assemble::{assemble_e, assemble_e0_1, DiscreteBilinearForm, SparseMatrix};
use crate::oracle::grid::{spline_nodal, Grid, GridFunction, NodeClass};

/// Sparse LU factorization of a square system.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl SparseLu {
    pub fn factor(n: usize, trips: &[(usize, usize, f64)]) -> Result<SparseLu> {
        let t: Vec<Triplet<usize, usize, f64>> = trips.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
            .map_err(|e| Error::Numerical(format!("sparse matrix construction failed: {e:?}")))?;
        let lu = a
            .sp_lu()
            .map_err(|e| Error::Numerical(format!("sparse LU failed (singular system?): {e:?}")))?;
        Ok(SparseLu { n, lu })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut m = faer::Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        self.lu.solve_in_place(m.as_mut());
        let out: Vec<f64> = (0..self.n).map(|i| m[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("linear solve produced non-finite values (singular system)".into()));
        }
        Ok(out)
    }
}

/// Discrete weak solution with its relative residual
/// `max|K_II u_I + K_IB f_B| / (‖K‖∞·max|u|)`.
#[derive(Debug, Clone)]
pub struct DirichletSolution {
    pub u: GridFunction,
    pub residual: f64,
}

impl DirichletSolution {
    /// Interpolated value; cells with missing corners fall back to the
    /// average over the corners that carry values.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match self.u.interpolate(x) {
            Ok(v) => Ok(v),
            Err(_) => partial_interpolate(&self.u, x),
        }
    }
}

fn partial_interpolate(f: &GridFunction, x: &[f64]) -> Result<f64> {
    let g = &f.grid;
    let d = g.dim();
    let mut cell = [0usize; MAX_DIM];
    let mut frac = [0.0; MAX_DIM];
    g.locate(x, &mut cell[..d], &mut frac[..d])?;
    let mut acc = 0.0;
    let mut wsum = 0.0;
    for corner in 0..(1usize << d) {
        let mut m = [0usize; MAX_DIM];
        let mut w = 1.0;
        for k in 0..d {
            if corner >> k & 1 == 1 {
                m[k] = cell[k] + 1;
                w *= frac[k];
            } else {
                m[k] = cell[k];
                w *= 1.0 - frac[k];
            }
        }
        let v = f.values[g.index(&m[..d])];
        if v.is_finite() {
            acc += w * v;
            wsum += w;
        }
    }
    if wsum <= 0.0 {
        return Err(Error::Numerical(format!("no grid value near {x:?}")));
    }
    Ok(acc / wsum)
}

/// Boundary data at a boundary node: the node itself for boxes, its
/// projection onto the sphere for balls.
fn boundary_value<F: ScalarField>(grid: &Grid, idx: usize, f: &F) -> Result<f64> {
    let x = grid.coord(idx);
    let y = if matches!(grid.domain(), crate::domain::Domain::Ball { .. }) {
        let mut y = x.clone();
        grid.domain().project_to_boundary(&x, &mut y);
        y
    } else {
        x
    };
    f.value(&y).map_err(Error::eval_at(&y))
}

/// Solve E(u, φ_i) = 0 for interior φ_i with u = f on boundary nodes.
pub fn solve_dirichlet_weak<F: ScalarField>(cs: &CoefficientSet, grid: &Arc<Grid>, f: &F) -> Result<DirichletSolution> {
    let e = assemble_e(cs, grid)?;
    solve_dirichlet_with(&e, f)
}

/// As [`solve_dirichlet_weak`] with a pre-assembled form.
pub fn solve_dirichlet_with<F: ScalarField>(e: &DiscreteBilinearForm, f: &F) -> Result<DirichletSolution> {
    let grid = &e.grid;
    let n = grid.num_nodes();
    let interior = grid.interior_indices();
    if interior.is_empty() {
        return Err(invalid("grid has no interior nodes"));
    }
    let mut pos = vec![usize::MAX; n];
    for (i, &g) in interior.iter().enumerate() {
        pos[g] = i;
    }
    let mut values = vec![f64::NAN; n];
    for idx in 0..n {
        if grid.class(idx) == NodeClass::Boundary {
            values[idx] = boundary_value(grid, idx, f)?;
        }
    }
    let k = &e.matrix;
    let mut rhs = vec![0.0; interior.len()];
    for (i, &r) in interior.iter().enumerate() {
        for (c, v) in k.row(r) {
            if grid.class(c) == NodeClass::Boundary {
                rhs[i] -= v * values[c];
            }
        }
    }
    let trips = k.restrict(&interior, &pos);
    let lu = SparseLu::factor(interior.len(), &trips)?;
    let u = lu.solve(&rhs)?;
    for (i, &g) in interior.iter().enumerate() {
        values[g] = u[i];
    }
    let mut res: f64 = 0.0;
    for (i, &r) in interior.iter().enumerate() {
        let mut s = -rhs[i];
        for (c, v) in k.row(r) {
            if grid.class(c) == NodeClass::Interior {
                s += v * values[c];
            }
        }
        res = res.max(s.abs());
    }
    let umax = values.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = k.norm_inf() * umax.max(1e-300);
    Ok(DirichletSolution {
        u: GridFunction {
            grid: grid.clone(),
            values,
        },
        residual: res / scale,
    })
}

/// The discrete resolvent function: nodal values and nodal FD gradients,
/// both interpolated multilinearly.
#[derive(Debug, Clone)]
pub struct XiH {
    grid: Arc<Grid>,
    values: Vec<f64>,
    /// max_i |(K u − r)_i|.
    pub solve_residual: f64,
}

impl XiH {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn nodal_values(&self) -> &[f64] {
        &self.values
    }

    pub fn as_grid_function(&self) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.clone(),
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let mut g = [0.0; MAX_DIM];
        self.eval(x, &mut g)
    }

    /// Value at `x`; writes the gradient into `grad`. Quadratic spline, so
    /// the pair is exactly consistent.
    pub fn eval(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        spline_nodal(&self.grid, &self.values, x, grad)
    }
}

/// Edge-midpoint samples of ξ: one entry per (node, axis) with an upper
/// neighbour, `NaN` otherwise.
fn sample_edges<S>(grid: &Grid, mut sample: S) -> Result<Vec<f64>>
where
    S: FnMut(&[f64], usize) -> Result<f64>,
{
    let d = grid.dim();
    let mut x = vec![0.0; d];
    let mut out = vec![f64::NAN; grid.num_nodes() * d];
    for i in 0..grid.num_nodes() {
        for k in 0..d {
            if grid.neighbor(i, k, 1).is_none() {
                continue;
            }
            grid.coord_into(i, &mut x);
            x[k] += 0.5 * grid.delta();
            out[i * d + k] = sample(&x, k)?;
        }
    }
    Ok(out)
}

/// ∫⟨ξ, ∇h⟩ by edge quadrature from midpoint samples.
fn edge_pairing(grid: &Grid, xi_edges: &[f64], h: &[f64]) -> f64 {
    let d = grid.dim();
    let mut acc = 0.0;
    for i in 0..grid.num_nodes() {
        for k in 0..d {
            let Some(m) = grid.neighbor(i, k, 1) else { continue };
            acc += grid.edge_weight(i, k) * xi_edges[i * d + k] * (h[m] - h[i]) / grid.delta();
        }
    }
    acc
}

/// The linear system behind ξ^H, kept for identity checks.
pub struct ResolventSystem {
    pub form: DiscreteBilinearForm,
    xi_edges: Vec<f64>,
}

impl ResolventSystem {
    /// ∫⟨ξ, ∇h⟩ + E⁰₁(ξ^H, h) for a grid function `h`.
    pub fn identity_defect(&self, xi_h: &XiH, h: &[f64]) -> f64 {
        edge_pairing(&self.form.grid, &self.xi_edges, h) + self.form.form(&xi_h.values, h)
    }

    /// Largest defect over all nodal basis functions.
    pub fn max_basis_defect(&self, xi_h: &XiH) -> f64 {
        let grid = &self.form.grid;
        let n = grid.num_nodes();
        let d = grid.dim();
        let ku = self.form.matrix.mul_vec(&xi_h.values);
        let mut pair = vec![0.0; n];
        for i in 0..n {
            for k in 0..d {
                let Some(m) = grid.neighbor(i, k, 1) else { continue };
                let t = grid.edge_weight(i, k) * self.xi_edges[i * d + k] / grid.delta();
                pair[m] += t;
                pair[i] -= t;
            }
        }
        (0..n).map(|i| (pair[i] + ku[i]).abs()).fold(0.0, f64::max)
    }
}

fn solve_resolvent<S>(cs: &CoefficientSet, grid: &Arc<Grid>, sample: S) -> Result<(XiH, ResolventSystem)>
where
    S: FnMut(&[f64], usize) -> Result<f64>,
{
    if grid.interior_indices().len() != grid.num_nodes() {
        return Err(invalid("the resolvent equation needs a grid whose nodes are all unknowns (padded box)"));
    }
    let form = assemble_e0_1(cs, grid)?;
    let d = grid.dim();
    let n = grid.num_nodes();
    let xi_edges = sample_edges(grid, sample)?;
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        for k in 0..d {
            let Some(m) = grid.neighbor(i, k, 1) else { continue };
            let t = grid.edge_weight(i, k) * xi_edges[i * d + k] / grid.delta();
            rhs[i] += t;
            rhs[m] -= t;
        }
    }
    let trips = triplets_of(&form.matrix);
    let lu = SparseLu::factor(n, &trips)?;
    let values = lu.solve(&rhs)?;
    let ku = form.matrix.mul_vec(&values);
    let solve_residual = ku.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((
        XiH {
            grid: grid.clone(),
            values,
            solve_residual,
        },
        ResolventSystem { form, xi_edges },
    ))
}

fn triplets_of(m: &SparseMatrix) -> Vec<(usize, usize, f64)> {
    (0..m.dim()).flat_map(|r| m.row(r).map(move |(c, v)| (r, c, v))).collect()
}

/// ξ^H for a vector field given component-wise, on a padded-box grid.
pub fn solve_xi_h<F: ScalarField>(xi: &[F], cs: &CoefficientSet, grid: &Arc<Grid>) -> Result<(XiH, ResolventSystem)> {
    if xi.len() != grid.dim() {
        return Err(invalid(format!("ξ has {} components on a {}-dimensional grid", xi.len(), grid.dim())));
    }
    solve_resolvent(cs, grid, |x, k| xi[k].value(x).map_err(Error::eval_at(x)))
}

/// ξ^H for ξ = b̂ (extended by zero off D) on the standard padded box.
pub fn solve_xi_h_bhat(cs: &CoefficientSet, delta: f64) -> Result<XiH> {
    let grid = Arc::new(Grid::resolvent_box(cs.domain(), delta)?);
    let d = cs.dim();
    let mut buf = vec![0.0; d];
    let (xi, _) = solve_resolvent(cs, &grid, |x, k| {
        cs.bhat_into(x, &mut buf, true)?;
        Ok(buf[k])
    })?;
    Ok(xi)
}

/// 1D periodic surrogate on [0, 2π) with constant diffusion `a`: nodes and
/// nodal ξ^H.
pub fn solve_xi_h_periodic_1d<F: Fn(f64) -> f64>(xi: F, a: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 4 || !(a > 0.0) {
        return Err(invalid("periodic surrogate needs n ≥ 4 and a > 0"));
    }
    let delta = 2.0 * std::f64::consts::PI / n as f64;
    let nodes: Vec<f64> = (0..n).map(|i| i as f64 * delta).collect();
    let mut trips = Vec::with_capacity(4 * n);
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let m = (i + 1) % n;
        let s = 0.5 * a / delta;
        trips.extend([(i, i, s), (i, m, -s), (m, i, -s), (m, m, s)]);
        trips.push((i, i, delta));
        let t = xi(nodes[i] + 0.5 * delta);
        rhs[i] += t;
        rhs[m] -= t;
    }
    let lu = SparseLu::factor(n, &trips)?;
    Ok((nodes, lu.solve(&rhs)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::FnField;
    use crate::domain::Domain;

    #[test]
    fn harmonic_linear_reproduced() {
        let dom = Domain::unit_cube(2);
        let cs = CoefficientSet::laplacian(dom.clone());
        let g = Arc::new(Grid::for_domain(&dom, 1.0 / 16.0).unwrap());
        let sol = solve_dirichlet_weak(&cs, &g, &FnField(|x: &[f64]| x[0])).unwrap();
        assert!(sol.residual < 1e-10);
        for i in g.interior_indices() {
            assert!((sol.u.values[i] - g.coord(i)[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn constants_are_harmonic_on_ball() {
        let dom = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let cs = CoefficientSet::builder(dom.clone())
            .matrix(&[&["1", "0.3"], &["-0.3", "1+0.2*x1^2"]])
            .unwrap()
            .build()
            .unwrap();
        let g = Arc::new(Grid::for_domain(&dom, 0.05).unwrap());
        let sol = solve_dirichlet_weak(&cs, &g, &FnField(|_: &[f64]| 2.5)).unwrap();
        for i in g.interior_indices() {
            assert!((sol.u.values[i] - 2.5).abs() < 1e-10);
        }
        assert!((sol.value(&[0.3, -0.2]).unwrap() - 2.5).abs() < 1e-10);
    }

    #[test]
    fn potential_bvp_second_order() {
        let dom = Domain::unit_cube(1);
        let cs = CoefficientSet::builder(dom.clone()).c("-1").unwrap().build().unwrap();
        let exact = |x: f64| (2f64.sqrt() * (x - 0.5)).cosh() / (2f64.sqrt() / 2.0).cosh();
        let mut errs = Vec::new();
        for delta in [0.05, 0.025, 0.0125] {
            let g = Arc::new(Grid::for_domain(&dom, delta).unwrap());
            let sol = solve_dirichlet_weak(&cs, &g, &FnField(|_: &[f64]| 1.0)).unwrap();
            let err = g
                .interior_indices()
                .into_iter()
                .map(|i| (sol.u.values[i] - exact(g.coord(i)[0])).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[0] < 1e-3);
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn xi_h_of_zero_is_zero() {
        let dom = Domain::unit_cube(2);
        let cs = CoefficientSet::laplacian(dom.clone());
        let g = Arc::new(Grid::resolvent_box(&dom, 0.125).unwrap());
        let zero = FnField(|_: &[f64]| 0.0);
        let (xi, _) = solve_xi_h(&[&zero, &zero], &cs, &g).unwrap();
        assert!(xi.nodal_values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn periodic_fourier_mode() {
        for n in [64usize, 128] {
            let (x, u) = solve_xi_h_periodic_1d(f64::sin, 1.0, n).unwrap();
            let delta = 2.0 * std::f64::consts::PI / n as f64;
            let err = x.iter().zip(&u).map(|(x, u)| (u - 2.0 / 3.0 * x.cos()).abs()).fold(0.0, f64::max);
            let predicted = 2.0 / 3.0 * delta * delta / 72.0;
            assert!((err - predicted).abs() < 0.05 * predicted, "{err} vs {predicted}");
        }
    }

    #[test]
    fn resolvent_identity_holds_discretely() {
        let dom = Domain::unit_cube(2);
        let cs = CoefficientSet::builder(dom.clone())
            .matrix(&[&["1", "0.3"], &["-0.3", "1"]])
            .unwrap()
            .build()
            .unwrap();
        let g = Arc::new(Grid::resolvent_box(&dom, 1.0 / 16.0).unwrap());
        let f0 = FnField(|x: &[f64]| (3.0 * x[0]).sin() * x[1]);
        let f1 = FnField(|x: &[f64]| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let fields: [&dyn ScalarField; 2] = [&f0, &f1];
        let (xi, sys) = solve_xi_h(&fields, &cs, &g).unwrap();
        assert!(sys.max_basis_defect(&xi) < 1e-10);
        let h: Vec<f64> = (0..g.num_nodes()).map(|i| (g.coord(i)[0] * 5.0).cos() + g.coord(i)[1]).collect();
        let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(sys.identity_defect(&xi, &h).abs() <= 1e-8 * norm);
    }

    #[test]
    fn xi_h_gradient_interpolates() {
        let dom = Domain::unit_cube(1);
        let cs = CoefficientSet::laplacian(dom.clone());
        let g = Arc::new(Grid::resolvent_box(&dom, 1.0 / 64.0).unwrap());
        let f = FnField(|x: &[f64]| (-(x[0] - 0.5).powi(2) * 20.0).exp());
        let (xi, _) = solve_xi_h(&[&f], &cs, &g).unwrap();
        // at a cell midpoint the interpolated nodal gradient matches the cell slope to O(δ²)
        let x = g.lower()[0] + 51.5 * g.delta();
        let mut grad = [0.0];
        let v = xi.eval(&[x], &mut grad).unwrap();
        let e = 1e-3;
        let fd = (xi.value(&[x + e]).unwrap() - xi.value(&[x - e]).unwrap()) / (2.0 * e);
        assert!((grad[0] - fd).abs() < 0.02 * fd.abs().max(1.0), "{} vs {fd}", grad[0]);
        assert!(v.is_finite());
        assert!(xi.value(&[5.0]).is_err());
    }
}

//! Finite-difference bilinear forms.
//!
//! Entry `(i, j)` of every matrix is `E(φ_j, φ_i)`: rows index the test
//! function. Axis-aligned terms live on grid edges with the coefficient at the
//! edge midpoint; mixed second-order terms live on cells with the coefficient
//! at the cell centre and cell-averaged differences.

use std::sync::Arc;

use rayon::prelude::*;

use crate::coeffs::CoefficientSet;
use crate::error::{invalid, Result};
use crate::linalg::MAX_DIM;
use crate::oracle::grid::{CoeffRule, Grid, NodeClass};

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Duplicate entries are summed.
    pub fn from_triplets(n: usize, mut trips: Vec<(usize, usize, f64)>) -> SparseMatrix {
        trips.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(trips.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trips.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trips {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry present") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|(j, _)| *j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// vᵀ K u, i.e. the discrete form evaluated at (u, v).
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        (0..self.n)
            .map(|r| v[r] * self.row(r).map(|(c, a)| a * u[c]).sum::<f64>())
            .sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m = m.max((v - self.get(c, r)).abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Entries of `rows × cols` as local triplets; `col_pos` maps a global
    /// column to its local position (`usize::MAX` = dropped).
    pub fn restrict(&self, rows: &[usize], col_pos: &[usize]) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                let j = col_pos[c];
                if j != usize::MAX {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FormKind {
    /// E⁰ plus γ times the mass form.
    Energy { gamma: f64 },
    /// All four terms of E.
    Full,
    /// Discrete generator (see `generator_matrix`).
    Generator,
}

#[derive(Debug, Clone)]
pub struct DiscreteBilinearForm {
    pub kind: FormKind,
    pub matrix: SparseMatrix,
    pub grid: Arc<Grid>,
}

impl DiscreteBilinearForm {
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        self.matrix.form(u, v)
    }
}

#[derive(Clone, Copy)]
struct Terms {
    gamma: f64,
    lower: bool,
}

pub(crate) fn lives(grid: &Grid, idx: usize) -> bool {
    grid.class(idx) != NodeClass::Exterior
}

/// Coefficient sampler honouring the grid's rule.
struct Sampler<'a> {
    cs: &'a CoefficientSet,
    extend: bool,
}

impl Sampler<'_> {
    fn matrix(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.cs.matrix_into(x, out, self.extend)
    }
    fn b(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.cs.b_into(x, out, self.extend)
    }
    fn bhat(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.cs.bhat_into(x, out, self.extend)
    }
    fn c(&self, x: &[f64]) -> Result<f64> {
        self.cs.c_at(x, self.extend)
    }
}

fn row_triplets(cs: &CoefficientSet, grid: &Grid, node: usize, terms: Terms) -> Result<Vec<(usize, usize, f64)>> {
    let d = grid.dim();
    let delta = grid.delta();
    let s = Sampler {
        cs,
        extend: grid.rule() == CoeffRule::Extended,
    };
    let mut out = Vec::new();
    if !lives(grid, node) {
        return Ok(out);
    }
    let mut x = [0.0; MAX_DIM];
    let mut a = [0.0; MAX_DIM * MAX_DIM];
    let mut v = [0.0; MAX_DIM];
    let x = &mut x[..d];
    let mass = grid.node_weight(node);
    // edges starting at this node (each edge is owned by its lower end)
    for k in 0..d {
        let Some(m) = grid.neighbor(node, k, 1) else { continue };
        if !lives(grid, m) {
            continue;
        }
        let w = grid.edge_weight(node, k);
        grid.coord_into(node, x);
        x[k] += 0.5 * delta;
        s.matrix(x, &mut a[..d * d])?;
        let akk = a[k * d + k];
        // (row, col, s_row, s_col)
        let pairs = [(node, node, -1.0, -1.0), (node, m, -1.0, 1.0), (m, node, 1.0, -1.0), (m, m, 1.0, 1.0)];
        for &(r, c, sr, sc) in &pairs {
            out.push((r, c, 0.5 * w * akk * sr * sc / (delta * delta)));
        }
        if terms.lower {
            s.b(x, &mut v[..d])?;
            let bk = v[k];
            s.bhat(x, &mut v[..d])?;
            let bhk = v[k];
            for &(r, c, sr, sc) in &pairs {
                let val = -w * bk * 0.5 * sc / delta - w * bhk * (0.5 * sr + 0.5 * sc) / delta;
                if val != 0.0 {
                    out.push((r, c, val));
                }
            }
        }
    }
    // cells with this node as lower corner
    if d > 1 {
        let mut corners = [0usize; 16];
        let mut ok = true;
        for q in 0..(1usize << d) {
            let mut idx = node;
            for k in 0..d {
                if q >> k & 1 == 1 {
                    match grid.neighbor(idx, k, 1) {
                        Some(j) => idx = j,
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            if !ok || !lives(grid, idx) {
                ok = false;
                break;
            }
            corners[q] = idx;
        }
        if ok {
            grid.coord_into(node, x);
            for xk in x.iter_mut() {
                *xk += 0.5 * delta;
            }
            s.matrix(x, &mut a[..d * d])?;
            let w = delta.powi(d as i32);
            let avg = 1.0 / (1usize << (d - 1)) as f64 / delta;
            let ncorner = 1usize << d;
            for k in 0..d {
                for l in 0..d {
                    if k == l {
                        continue;
                    }
                    let akl = a[k * d + l];
                    if akl == 0.0 {
                        continue;
                    }
                    // D̄_k φ_c = ±avg for every corner c
                    for qr in 0..ncorner {
                        let sr = if qr >> l & 1 == 1 { avg } else { -avg };
                        for qc in 0..ncorner {
                            let sc = if qc >> k & 1 == 1 { avg } else { -avg };
                            out.push((corners[qr], corners[qc], 0.5 * w * akl * sc * sr));
                        }
                    }
                }
            }
        }
    }
    if terms.lower {
        grid.coord_into(node, x);
        let c = s.c(x)?;
        if c != 0.0 {
            out.push((node, node, -mass * c));
        }
    }
    if terms.gamma != 0.0 {
        out.push((node, node, terms.gamma * mass));
    }
    Ok(out)
}

fn assemble(cs: &CoefficientSet, grid: &Arc<Grid>, terms: Terms, kind: FormKind) -> Result<DiscreteBilinearForm> {
    if cs.dim() != grid.dim() {
        return Err(invalid(format!(
            "coefficients are {}-dimensional but the grid is {}-dimensional",
            cs.dim(),
            grid.dim()
        )));
    }
    let n = grid.num_nodes();
    let parts: Vec<Vec<(usize, usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| row_triplets(cs, grid, i, terms))
        .collect::<Result<_>>()?;
    let trips = parts.into_iter().flatten().collect();
    Ok(DiscreteBilinearForm {
        kind,
        matrix: SparseMatrix::from_triplets(n, trips),
        grid: grid.clone(),
    })
}

/// E⁰ + γ·mass.
pub fn assemble_e0_gamma(cs: &CoefficientSet, grid: &Arc<Grid>, gamma: f64) -> Result<DiscreteBilinearForm> {
    assemble(cs, grid, Terms { gamma, lower: false }, FormKind::Energy { gamma })
}

/// E⁰₁: the symmetric-part energy plus the mass form.
pub fn assemble_e0_1(cs: &CoefficientSet, grid: &Arc<Grid>) -> Result<DiscreteBilinearForm> {
    assemble_e0_gamma(cs, grid, 1.0)
}

pub fn assemble_e0(cs: &CoefficientSet, grid: &Arc<Grid>) -> Result<DiscreteBilinearForm> {
    assemble_e0_gamma(cs, grid, 0.0)
}

/// The full form E with drift, divergence drift and potential.
pub fn assemble_e(cs: &CoefficientSet, grid: &Arc<Grid>) -> Result<DiscreteBilinearForm> {
    assemble(cs, grid, Terms { gamma: 0.0, lower: true }, FormKind::Full)
}

/// `L_h = −K/m` on interior rows with `K` from [`assemble_e`]; rows of
/// non-interior nodes are empty and columns outside the interior are dropped
/// (zero exterior values).
pub fn generator_matrix(cs: &CoefficientSet, grid: &Arc<Grid>) -> Result<DiscreteBilinearForm> {
    let e = assemble_e(cs, grid)?;
    let n = grid.num_nodes();
    let mut trips = Vec::with_capacity(e.matrix.nnz());
    for r in 0..n {
        if grid.class(r) != NodeClass::Interior {
            continue;
        }
        let m = grid.node_weight(r);
        for (c, v) in e.matrix.row(r) {
            if grid.class(c) == NodeClass::Interior {
                trips.push((r, c, -v / m));
            }
        }
    }
    Ok(DiscreteBilinearForm {
        kind: FormKind::Generator,
        matrix: SparseMatrix::from_triplets(n, trips),
        grid: grid.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::quadrature::{adaptive, gauss_legendre, integrate_fixed};

    fn grid(d: usize, delta: f64) -> Arc<Grid> {
        Arc::new(Grid::for_domain(&Domain::unit_cube(d), delta).unwrap())
    }

    #[test]
    fn one_d_stencil() {
        let g = grid(1, 0.1);
        let cs = CoefficientSet::laplacian(Domain::unit_cube(1));
        let k = assemble_e0_1(&cs, &g).unwrap().matrix;
        let i = 5;
        assert!((k.get(i, i) - (0.5 * 2.0 / 0.01 * 0.1 + 0.1)).abs() < 1e-12);
        assert!((k.get(i, i + 1) - (-0.5 / 0.01 * 0.1)).abs() < 1e-12);
        assert!((k.get(i, i - 1) - (-0.5 / 0.01 * 0.1)).abs() < 1e-12);
        let l = generator_matrix(&cs, &g).unwrap().matrix;
        assert!((l.get(i, i) + 1.0 / 0.01).abs() < 1e-9);
        assert!((l.get(i, i + 1) - 0.5 / 0.01).abs() < 1e-9);
        assert_eq!(l.row(0).count(), 0);
    }

    #[test]
    fn symmetric_a_gives_symmetric_matrix() {
        let cs = CoefficientSet::builder(Domain::unit_cube(2))
            .matrix(&[&["1 + x1^2", "0.3*x2"], &["0.3*x2", "2"]])
            .unwrap()
            .build()
            .unwrap();
        let k = assemble_e0_1(&cs, &grid(2, 0.125)).unwrap().matrix;
        assert!(k.max_asymmetry() < 1e-12);
        let ns = CoefficientSet::builder(Domain::unit_cube(2))
            .matrix(&[&["1", "0.3"], &["-0.3", "1"]])
            .unwrap()
            .build()
            .unwrap();
        let kn = assemble_e0_1(&ns, &grid(2, 0.125)).unwrap().matrix;
        // the antisymmetric part integrates to a null Lagrangian
        let g = grid(2, 0.125);
        let u: Vec<f64> = (0..g.num_nodes()).map(|i| (g.coord(i)[0] * 3.0).sin()).collect();
        let v: Vec<f64> = (0..g.num_nodes()).map(|i| (g.coord(i)[1] * 2.0).cos() * g.coord(i)[0]).collect();
        let _ = kn.form(&u, &v);
        assert!(kn.max_asymmetry() > 1e-3);
    }

    #[test]
    fn quadratic_form_matches_quadrature() {
        // E⁰₁(u,u) for u = sin(πx1) on the unit square with A = I:
        // ½∫|∇u|² + ∫u² = ½·π²/2 + ½
        let exact = 0.25 * std::f64::consts::PI.powi(2) + 0.5;
        let cs = CoefficientSet::laplacian(Domain::unit_cube(2));
        let mut prev = f64::INFINITY;
        for delta in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0] {
            let g = grid(2, delta);
            let u: Vec<f64> = (0..g.num_nodes()).map(|i| (std::f64::consts::PI * g.coord(i)[0]).sin()).collect();
            let k = assemble_e0_1(&cs, &g).unwrap();
            let err = (k.form(&u, &u) - exact).abs();
            assert!(err < 2.0 * delta, "{err}");
            assert!(err < prev);
            prev = err;
        }
        // independent 1D check of the reference value
        let rule = gauss_legendre(20);
        let grad = integrate_fixed(|x| (std::f64::consts::PI * (std::f64::consts::PI * x).cos()).powi(2), 0.0, 1.0, &rule);
        let mass = adaptive(|x| (std::f64::consts::PI * x).sin().powi(2), 0.0, 1.0, &[], 1e-12, 1e-14);
        assert!((0.5 * grad + mass - exact).abs() < 1e-10);
    }

    #[test]
    fn full_form_reduces_to_e0() {
        let cs = CoefficientSet::builder(Domain::unit_cube(2))
            .matrix(&[&["1", "0.3"], &["-0.3", "1+x1"]])
            .unwrap()
            .build()
            .unwrap();
        let g = grid(2, 0.25);
        assert_eq!(assemble_e(&cs, &g).unwrap().matrix, assemble_e0(&cs, &g).unwrap().matrix);
    }

    #[test]
    fn constant_bhat_sums_by_parts() {
        let cs = CoefficientSet::builder(Domain::unit_cube(1)).bhat(0, "1.7").unwrap().build().unwrap();
        let g = grid(1, 0.1);
        let e = assemble_e(&cs, &g).unwrap().matrix;
        let e0 = assemble_e0(&cs, &g).unwrap().matrix;
        let interior = g.interior_indices();
        for &c in &interior {
            let sum: f64 = interior.iter().map(|&r| e.get(r, c) - e0.get(r, c)).sum();
            assert!(sum.abs() < 1e-12, "column {c}: {sum}");
        }
    }

    #[test]
    fn potential_sign() {
        let cs = CoefficientSet::builder(Domain::unit_cube(1)).c("-1").unwrap().build().unwrap();
        let g = grid(1, 0.05);
        let u: Vec<f64> = (0..g.num_nodes()).map(|i| 1.0 + g.coord(i)[0]).collect();
        let e = assemble_e(&cs, &g).unwrap();
        let e0 = assemble_e0(&cs, &g).unwrap();
        let mass: f64 = (0..g.num_nodes()).map(|i| g.node_weight(i) * u[i] * u[i]).sum();
        assert!((e.form(&u, &u) - e0.form(&u, &u) - mass).abs() < 1e-12);
    }

    #[test]
    fn generator_row_sums() {
        let cs = CoefficientSet::builder(Domain::unit_cube(2))
            .bhat(0, "sin(x1)*x2")
            .unwrap()
            .bhat(1, "x1^2")
            .unwrap()
            .c("0.5*x2")
            .unwrap()
            .b(0, "cos(x2)")
            .unwrap()
            .build()
            .unwrap();
        let g = grid(2, 1.0 / 32.0);
        let l = generator_matrix(&cs, &g).unwrap().matrix;
        let ones = vec![1.0; g.num_nodes()];
        let lu = l.mul_vec(&ones);
        let probe = g.index(&[16, 12]);
        let x = g.coord(probe);
        let expected = 0.5 * x[1] - x[1] * x[0].cos();
        assert!((lu[probe] - expected).abs() < 1e-3, "{} vs {expected}", lu[probe]);
    }

    #[test]
    fn generator_spectrum() {
        let cs = CoefficientSet::laplacian(Domain::unit_cube(1));
        let delta = 1.0 / 100.0;
        let g = grid(1, delta);
        let interior = g.interior_indices();
        let l = generator_matrix(&cs, &g).unwrap().matrix.to_dense();
        let sub = l.select_rows(&interior).select_columns(&interior);
        let sym = (&sub + sub.transpose()) * 0.5;
        let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for k in 1..=5 {
            let exact = -0.5 * (k as f64 * std::f64::consts::PI).powi(2);
            assert!((eig[k - 1] - exact).abs() < exact.abs() * delta * delta * (k * k) as f64);
        }
    }
}

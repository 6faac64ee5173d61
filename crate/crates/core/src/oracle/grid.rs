//! Uniform node grids over boxes, with interior/boundary classification.

use std::sync::Arc;

use crate::domain::Domain;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

/// Which coefficient values the forms sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffRule {
    /// Formulas evaluated directly (grids fitted to D).
    Raw,
    /// Off-D extension rule (grids on an enclosing box).
    Extended,
}

#[derive(Debug, Clone)]
pub struct Grid {
    d: usize,
    lower: Vec<f64>,
    delta: f64,
    n: Vec<usize>,
    strides: Vec<usize>,
    class: Vec<NodeClass>,
    domain: Domain,
    rule: CoeffRule,
}

fn aligned_cells(side: f64, delta: f64) -> Result<usize> {
    let cells = side / delta;
    let r = cells.round();
    if (cells - r).abs() > 1e-8 * r.max(1.0) || r < 2.0 {
        return Err(invalid(format!(
            "box side {side} is not a multiple (≥ 2) of the grid spacing {delta}"
        )));
    }
    Ok(r as usize)
}

impl Grid {
    fn raw(d: usize, lower: Vec<f64>, delta: f64, n: Vec<usize>, domain: Domain, rule: CoeffRule) -> Grid {
        let mut strides = vec![1; d];
        for k in 1..d {
            strides[k] = strides[k - 1] * n[k - 1];
        }
        let total = n.iter().product();
        Grid {
            d,
            lower,
            delta,
            n,
            strides,
            class: vec![NodeClass::Exterior; total],
            domain,
            rule,
        }
    }

    /// Grid over the bounding box of `dom`. Box sides of intervals and
    /// rectangles must be multiples of `delta`.
    pub fn for_domain(dom: &Domain, delta: f64) -> Result<Grid> {
        if !(delta > 0.0) {
            return Err(invalid("grid spacing must be positive"));
        }
        let d = dom.dim();
        let (lo, hi) = dom.bbox();
        let mut n = Vec::with_capacity(d);
        for k in 0..d {
            let cells = match dom {
                Domain::Ball { .. } => ((hi[k] - lo[k]) / delta).ceil() as usize,
                _ => aligned_cells(hi[k] - lo[k], delta)?,
            };
            n.push(cells + 1);
        }
        let mut g = Grid::raw(d, lo, delta, n, dom.clone(), CoeffRule::Raw);
        let mut x = vec![0.0; d];
        let mut m = vec![0usize; d];
        for idx in 0..g.num_nodes() {
            g.multi_into(idx, &mut m);
            let interior = match dom {
                Domain::Ball { center, radius } => {
                    g.coord_into(idx, &mut x);
                    let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                    r2.sqrt() < radius * (1.0 - 1e-12)
                }
                _ => (0..d).all(|k| m[k] > 0 && m[k] + 1 < g.n[k]),
            };
            if interior {
                g.class[idx] = NodeClass::Interior;
            }
        }
        // boundary: non-interior corners of cells that touch an interior node
        let interior: Vec<usize> = (0..g.num_nodes()).filter(|&i| g.class[i] == NodeClass::Interior).collect();
        let mut corner = vec![0usize; d];
        for i in interior {
            g.multi_into(i, &mut m);
            for offs in 0..3usize.pow(d as u32) {
                let mut o = offs;
                let mut ok = true;
                for k in 0..d {
                    let step = (o % 3) as isize - 1;
                    o /= 3;
                    let v = m[k] as isize + step;
                    if v < 0 || v >= g.n[k] as isize {
                        ok = false;
                        break;
                    }
                    corner[k] = v as usize;
                }
                if ok {
                    let j = g.index(&corner);
                    if g.class[j] == NodeClass::Exterior {
                        g.class[j] = NodeClass::Boundary;
                    }
                }
            }
        }
        Ok(g)
    }

    /// Grid over the bounding box of `dom` enlarged by `pad` (rounded up to a
    /// multiple of `delta`); every node is an unknown and coefficients follow
    /// the extension rule.
    pub fn padded_box(dom: &Domain, delta: f64, pad: f64) -> Result<Grid> {
        if !(delta > 0.0) || pad < 0.0 {
            return Err(invalid("padded grid needs delta > 0 and pad ≥ 0"));
        }
        let d = dom.dim();
        let (lo, hi) = dom.bbox();
        let pad_cells = (pad / delta - 1e-9).ceil().max(0.0) as usize;
        let padr = pad_cells as f64 * delta;
        let mut n = Vec::with_capacity(d);
        for k in 0..d {
            let cells = ((hi[k] - lo[k]) / delta - 1e-9).ceil() as usize + 2 * pad_cells;
            n.push(cells + 1);
        }
        let lower = lo.iter().map(|v| v - padr).collect();
        let mut g = Grid::raw(d, lower, delta, n, dom.clone(), CoeffRule::Extended);
        g.class.fill(NodeClass::Interior);
        Ok(g)
    }

    /// The padding used for resolvent solves: half the diameter.
    pub fn resolvent_box(dom: &Domain, delta: f64) -> Result<Grid> {
        Grid::padded_box(dom, delta, 0.5 * dom.diameter())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> Vec<f64> {
        (0..self.d)
            .map(|k| self.lower[k] + (self.n[k] - 1) as f64 * self.delta)
            .collect()
    }

    pub fn shape(&self) -> &[usize] {
        &self.n
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn rule(&self) -> CoeffRule {
        self.rule
    }

    pub fn num_nodes(&self) -> usize {
        self.class.len()
    }

    pub fn class(&self, idx: usize) -> NodeClass {
        self.class[idx]
    }

    pub fn index(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn multi_into(&self, idx: usize, m: &mut [usize]) {
        let mut r = idx;
        for k in 0..self.d {
            m[k] = r % self.n[k];
            r /= self.n[k];
        }
    }

    pub fn coord_into(&self, idx: usize, x: &mut [f64]) {
        let mut r = idx;
        for k in 0..self.d {
            x[k] = self.lower[k] + (r % self.n[k]) as f64 * self.delta;
            r /= self.n[k];
        }
    }

    pub fn coord(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        self.coord_into(idx, &mut x);
        x
    }

    /// Neighbour along `axis` in direction `dir` (±1).
    pub fn neighbor(&self, idx: usize, axis: usize, dir: isize) -> Option<usize> {
        let i = (idx / self.strides[axis]) % self.n[axis];
        let j = i as isize + dir;
        if j < 0 || j >= self.n[axis] as isize {
            None
        } else {
            Some((idx as isize + dir * self.strides[axis] as isize) as usize)
        }
    }

    /// Trapezoid factor (½ on box faces) along `axis`.
    pub fn face_factor(&self, idx: usize, axis: usize) -> f64 {
        let i = (idx / self.strides[axis]) % self.n[axis];
        if i == 0 || i + 1 == self.n[axis] {
            0.5
        } else {
            1.0
        }
    }

    /// Trapezoid mass weight of a node.
    pub fn node_weight(&self, idx: usize) -> f64 {
        (0..self.d).map(|k| self.face_factor(idx, k)).product::<f64>() * self.delta.powi(self.d as i32)
    }

    /// Weight of the edge from `idx` along `axis`.
    pub fn edge_weight(&self, idx: usize, axis: usize) -> f64 {
        (0..self.d)
            .filter(|&k| k != axis)
            .map(|k| self.face_factor(idx, k))
            .product::<f64>()
            * self.delta.powi(self.d as i32)
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&i| self.class[i] == NodeClass::Interior).collect()
    }

    /// Lower cell corner and local coordinates in [0,1]^d.
    pub fn locate(&self, x: &[f64], cell: &mut [usize], frac: &mut [f64]) -> Result<()> {
        for k in 0..self.d {
            let s = (x[k] - self.lower[k]) / self.delta;
            let cells = self.n[k] - 1;
            if !(s >= -1e-9 && s <= cells as f64 + 1e-9) {
                return Err(Error::Numerical(format!("point {x:?} lies outside the grid box")));
            }
            let i = (s.floor().max(0.0) as usize).min(cells - 1);
            cell[k] = i;
            frac[k] = (s - i as f64).clamp(0.0, 1.0);
        }
        Ok(())
    }
}

/// Nodal values on a grid (`NaN` at exterior nodes).
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl GridFunction {
    /// Multilinear interpolation; fails if a corner of the cell has no value.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        interpolate_nodal(&self.grid, x, |i| self.values[i])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().filter(|v| v.is_finite()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn interpolate_nodal<F: Fn(usize) -> f64>(grid: &Grid, x: &[f64], value: F) -> Result<f64> {
    let d = grid.dim();
    let mut cell = [0usize; 8];
    let mut frac = [0.0; 8];
    grid.locate(x, &mut cell[..d], &mut frac[..d])?;
    let base = grid.index(&cell[..d]);
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut idx = base;
        for k in 0..d {
            if corner >> k & 1 == 1 {
                w *= frac[k];
                idx += grid.strides[k];
            } else {
                w *= 1.0 - frac[k];
            }
        }
        if w == 0.0 {
            continue;
        }
        let v = value(idx);
        if !v.is_finite() {
            return Err(Error::Numerical(format!("interpolation at {x:?} touches a node without a value")));
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Tensor quadratic B-spline with the nodal values as coefficients: C¹,
/// O(δ²) accurate, and `grad` is the exact derivative of the returned value.
/// Needs one node of margin on every side of `x`.
pub(crate) fn spline_nodal(grid: &Grid, values: &[f64], x: &[f64], grad: &mut [f64]) -> Result<f64> {
    let d = grid.dim();
    let delta = grid.delta();
    let mut base = 0usize;
    let mut w = [[0.0; 3]; 3];
    let mut dw = [[0.0; 3]; 3];
    for k in 0..d {
        let u = (x[k] - grid.lower[k]) / delta;
        let n = u.round();
        if !(n >= 1.0 && n + 1.0 < grid.n[k] as f64) {
            return Err(Error::Numerical(format!("point {x:?} is too close to the edge of the grid box")));
        }
        let s = u - n;
        w[k] = [0.5 * (0.5 - s) * (0.5 - s), 0.75 - s * s, 0.5 * (0.5 + s) * (0.5 + s)];
        dw[k] = [(s - 0.5) / delta, -2.0 * s / delta, (0.5 + s) / delta];
        base += (n as usize - 1) * grid.strides[k];
    }
    let mut val = 0.0;
    grad[..d].iter_mut().for_each(|g| *g = 0.0);
    for m in 0..3usize.pow(d as u32) {
        let mut idx = base;
        let mut digits = [0usize; 3];
        let mut r = m;
        for k in 0..d {
            digits[k] = r % 3;
            r /= 3;
            idx += digits[k] * grid.strides[k];
        }
        let v = values[idx];
        let full: f64 = (0..d).map(|k| w[k][digits[k]]).product();
        val += full * v;
        for (k, g) in grad.iter_mut().enumerate().take(d) {
            let p: f64 = (0..d).map(|j| if j == k { dw[j][digits[j]] } else { w[j][digits[j]] }).product();
            *g += p * v;
        }
    }
    if !val.is_finite() {
        return Err(Error::Numerical(format!("spline at {x:?} touches a node without a value")));
    }
    Ok(val)
}

//! The Feynman–Kac exponent along a path:
//!
//! ```text
//! log Z_t = ∫ (ã⁻¹b)·dM − ½∫ bᵀã⁻¹b ds + ∫ c ds + D_t
//! ```
//!
//! where the divergence part `D_t` is either `−∫ div b̂ ds` (direct mode) or
//! `ξ^H(X_t) − ξ^H(X_0) − ∫∇ξ^H·dM − ∫ξ^H ds` with `ξ = b̂` (resolvent mode).
//! Stochastic integrals use the left-point rule.

use std::str::FromStr;

use crate::coeffs::{CoefficientSet, ScalarField};
use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky_solve, symmetrize, MAX_DIM};
use crate::oracle::XiH;
use crate::pathsim::{DiffusionPath, PathVisitor, StepRecord};

/// Exponents above this are reported as overflow.
pub const OVERFLOW_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceMode {
    Direct,
    Resolvent,
}

impl FromStr for DivergenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(DivergenceMode::Direct),
            "resolvent" => Ok(DivergenceMode::Resolvent),
            other => Err(Error::Config(format!("unknown divergence mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentAccumulator {
    pub girsanov: f64,
    pub quad: f64,
    pub potential: f64,
    pub divergence: f64,
    pub mode: DivergenceMode,
}

impl ExponentAccumulator {
    pub fn new(mode: DivergenceMode) -> Self {
        ExponentAccumulator {
            girsanov: 0.0,
            quad: 0.0,
            potential: 0.0,
            divergence: 0.0,
            mode,
        }
    }

    pub fn exponent(&self) -> f64 {
        self.girsanov - self.quad + self.potential + self.divergence
    }

    /// Accumulator for the concatenation of two consecutive path pieces.
    pub fn then(&self, later: &ExponentAccumulator) -> ExponentAccumulator {
        ExponentAccumulator {
            girsanov: self.girsanov + later.girsanov,
            quad: self.quad + later.quad,
            potential: self.potential + later.potential,
            divergence: self.divergence + later.divergence,
            mode: self.mode,
        }
    }
}

/// Z = exp(girsanov − quad + potential + divergence).
pub fn fk_weight(acc: &ExponentAccumulator) -> Result<f64> {
    let e = acc.exponent();
    if !e.is_finite() || e > OVERFLOW_EXPONENT {
        return Err(Error::Numerical(format!("weight exponent {e} overflows")));
    }
    Ok(e.exp())
}

/// Z_τ · f(X_τ) for an exited path.
pub fn fk_payoff<F: ScalarField>(path: &DiffusionPath, acc: &ExponentAccumulator, f: &F) -> Result<f64> {
    if !path.exited {
        return Err(invalid("payoff needs a path that reached the boundary"));
    }
    let x = path.final_state();
    Ok(fk_weight(acc)? * f.value(x).map_err(Error::eval_at(x))?)
}

/// (ã⁻¹b)(x)·ΔM and ½ bᵀã⁻¹b(x)·h.
pub fn girsanov_increment(cs: &CoefficientSet, x: &[f64], dm: &[f64], h: f64) -> Result<(f64, f64)> {
    let d = cs.dim();
    let b = cs.eval_b(x)?;
    if b.iter().all(|v| *v == 0.0) {
        return Ok((0.0, 0.0));
    }
    let s = symmetrize(&cs.eval_matrix(x)?, d);
    let mut l = [0.0; MAX_DIM * MAX_DIM];
    if !crate::linalg::cholesky_into(&s, d, &mut l) {
        return Err(Error::Numerical(format!("Ã is singular at {x:?}")));
    }
    let mut v = [0.0; MAX_DIM];
    cholesky_solve(&l, d, &b, &mut v);
    let dg = (0..d).map(|k| v[k] * dm[k]).sum();
    let dq = 0.5 * (0..d).map(|k| v[k] * b[k]).sum::<f64>() * h;
    Ok((dg, dq))
}

pub fn potential_increment(cs: &CoefficientSet, x: &[f64], h: f64) -> Result<f64> {
    Ok(cs.eval_c(x)? * h)
}

/// −div b̂(x)·h by central differences.
pub fn divergence_direct<F: ScalarField>(bhat: &[F], x: &[f64], h: f64, fd_step: f64) -> Result<f64> {
    let d = x.len();
    let mut y = x.to_vec();
    let mut div = 0.0;
    for (i, f) in bhat.iter().enumerate().take(d) {
        y[i] = x[i] + fd_step;
        let hi = f.value(&y).map_err(Error::eval_at(&y))?;
        y[i] = x[i] - fd_step;
        let lo = f.value(&y).map_err(Error::eval_at(&y))?;
        y[i] = x[i];
        div += (hi - lo) / (2.0 * fd_step);
    }
    Ok(-div * h)
}

/// ξ^H(X_t) − ξ^H(X_0) − Σ∇ξ^H(X_k)·ΔM_k − Σ ξ^H(X_k)Δt_k over the first `upto` steps.
pub fn divergence_resolvent(xi: &XiH, path: &DiffusionPath, upto: usize) -> Result<f64> {
    let n = upto.min(path.len());
    let d = path.states[0].len();
    let mut grad = vec![0.0; d];
    let start = xi.eval(&path.states[0], &mut grad)?;
    let mut acc = 0.0;
    for k in 0..n {
        let v = xi.eval(&path.states[k], &mut grad)?;
        let dt = path.times[k + 1] - path.times[k];
        acc -= grad.iter().zip(&path.dm[k]).map(|(g, m)| g * m).sum::<f64>();
        acc -= v * dt;
    }
    let end = xi.eval(&path.states[n], &mut grad)?;
    Ok(end - start + acc)
}

/// Streams the exponent along a path; snapshots it at checkpoints.
pub struct FkVisitor<'a> {
    cs: &'a CoefficientSet,
    mode: DivergenceMode,
    xi: Option<&'a XiH>,
    fd_step: f64,
    girsanov: bool,
    acc: ExponentAccumulator,
    xi_start: f64,
    checkpoints: Vec<f64>,
    horizon: Option<f64>,
    /// Exponent and state at each checkpoint reached before exit.
    pub snapshots: Vec<(ExponentAccumulator, Vec<f64>)>,
}

impl<'a> FkVisitor<'a> {
    /// `girsanov = false` drops the change-of-measure factor (for paths
    /// already simulated with drift b).
    pub fn new(
        cs: &'a CoefficientSet,
        mode: DivergenceMode,
        xi: Option<&'a XiH>,
        fd_step: f64,
        girsanov: bool,
    ) -> Result<Self> {
        if mode == DivergenceMode::Resolvent && xi.is_none() && !cs.is_bhat_zero() {
            return Err(invalid("resolvent mode needs a solved ξ^H"));
        }
        Ok(FkVisitor {
            cs,
            mode,
            xi,
            fd_step,
            girsanov: girsanov && !cs.is_b_zero(),
            acc: ExponentAccumulator::new(mode),
            xi_start: 0.0,
            checkpoints: Vec::new(),
            horizon: None,
            snapshots: Vec::new(),
        })
    }

    pub fn with_checkpoints(mut self, times: Vec<f64>) -> Self {
        self.checkpoints = times;
        self
    }

    pub fn with_horizon(mut self, t: f64) -> Self {
        self.horizon = Some(t);
        self
    }

    /// Must be called with the start point before running.
    pub fn start(&mut self, x0: &[f64]) -> Result<()> {
        self.acc = ExponentAccumulator::new(self.mode);
        self.snapshots.clear();
        self.xi_start = match (self.mode, self.xi) {
            (DivergenceMode::Resolvent, Some(xi)) => xi.value(x0)?,
            _ => 0.0,
        };
        Ok(())
    }

    fn closed(&self, x: &[f64]) -> Result<ExponentAccumulator> {
        let mut acc = self.acc;
        if let (DivergenceMode::Resolvent, Some(xi)) = (self.mode, self.xi) {
            acc.divergence += xi.value(x)? - self.xi_start;
        }
        Ok(acc)
    }

    /// Exponent at the final state.
    pub fn finish(&self, x_end: &[f64]) -> Result<ExponentAccumulator> {
        self.closed(x_end)
    }
}

impl PathVisitor for FkVisitor<'_> {
    fn on_step(&mut self, rec: &StepRecord<'_>) -> Result<()> {
        let cs = self.cs;
        let d = rec.x.len();
        let x = rec.x;
        if self.girsanov {
            let mut b = [0.0; MAX_DIM];
            cs.b_into(x, &mut b[..d], false)?;
            let mut v = [0.0; MAX_DIM];
            cholesky_solve(rec.chol, d, &b[..d], &mut v[..d]);
            let mut dg = 0.0;
            let mut bv = 0.0;
            for k in 0..d {
                dg += v[k] * rec.dm[k];
                bv += v[k] * b[k];
            }
            self.acc.girsanov += dg;
            self.acc.quad += 0.5 * bv * rec.dt;
        }
        if !cs.is_c_zero() || cs.mollifier().is_some() {
            self.acc.potential += cs.c_at(x, false)? * rec.dt;
        }
        if !cs.is_bhat_zero() {
            match self.mode {
                DivergenceMode::Direct => {
                    self.acc.divergence -= cs.div_bhat(x, self.fd_step)? * rec.dt;
                }
                DivergenceMode::Resolvent => {
                    let xi = self.xi.expect("checked at construction");
                    let mut g = [0.0; MAX_DIM];
                    let v = xi.eval(x, &mut g[..d])?;
                    let mut gm = 0.0;
                    for k in 0..d {
                        gm += g[k] * rec.dm[k];
                    }
                    self.acc.divergence -= gm + v * rec.dt;
                }
            }
        }
        Ok(())
    }

    fn checkpoints(&self) -> &[f64] {
        &self.checkpoints
    }

    fn on_checkpoint(&mut self, _index: usize, _t: f64, x: &[f64]) -> Result<()> {
        let acc = self.closed(x)?;
        self.snapshots.push((acc, x.to_vec()));
        Ok(())
    }

    fn horizon(&self) -> Option<f64> {
        self.horizon
    }
}

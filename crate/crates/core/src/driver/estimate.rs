//! Monte Carlo estimates of `u(x) = E_x[Z_τ f(X_τ)]` at probe points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::probe_substream;
use crate::coeffs::{CoefficientSet, FieldExpr, ScalarField};
use crate::driver::RunConfig;
use crate::error::{invalid, Error, Result};
use crate::functionals::{fk_weight, DivergenceMode, FkVisitor};
use crate::oracle::{solve_xi_h_bhat, XiH};
use crate::pathsim::{Dynamics, NoiseStream, PathConfig, PathEnd, Stepper};
use crate::stats::RunningStats;

/// Fraction of excluded paths above which a result is flagged.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub point: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub n_effective: u64,
    pub excluded: u64,
    pub config_hash: u64,
    /// Mean of the weight `Z_τ` alone, a check on the exponential moment.
    pub weight_mean: f64,
    pub weight_stderr: f64,
    pub unreliable: bool,
}

/// Outcome of one path: `None` when truncated or the weight overflowed.
pub type PathSample = Option<(f64, f64)>;

/// Everything needed to run paths for one coefficient set.
pub struct Estimator<'a> {
    pub cs: &'a CoefficientSet,
    pub f: &'a FieldExpr,
    pub pc: PathConfig,
    pub mode: DivergenceMode,
    pub xi: Option<XiH>,
    pub n_paths: usize,
}

impl<'a> Estimator<'a> {
    pub fn new(rc: &'a RunConfig) -> Result<Estimator<'a>> {
        Estimator::with_mode(rc, rc.divergence)
    }

    /// Solves for ξ^H only when the resolvent route is requested and b̂ ≠ 0.
    pub fn with_mode(rc: &'a RunConfig, mode: DivergenceMode) -> Result<Estimator<'a>> {
        let xi = if mode == DivergenceMode::Resolvent && !rc.coeffs.is_bhat_zero() {
            Some(solve_xi_h_bhat(&rc.coeffs, rc.xi_delta)?)
        } else {
            None
        };
        Ok(Estimator {
            cs: &rc.coeffs,
            f: &rc.boundary,
            pc: rc.path.clone(),
            mode,
            xi,
            n_paths: rc.n_paths,
        })
    }

    /// Per-path samples `(Z_τ f(X_τ), Z_τ)` in path-index order.
    pub fn samples(&self, probe: usize, x0: &[f64]) -> Result<Vec<PathSample>> {
        if !self.cs.domain().contains(x0) {
            return Err(invalid(format!("probe {x0:?} lies outside D")));
        }
        let stepper = Stepper::new(self.cs, &self.pc, Dynamics::Plain)?;
        let d = self.cs.dim();
        let fd = stepper.fd_step();
        (0..self.n_paths)
            .into_par_iter()
            .map(|i| {
                let mut noise = NoiseStream::new(self.pc.seed, probe_substream(probe, i), d);
                let mut v = FkVisitor::new(self.cs, self.mode, self.xi.as_ref(), fd, true)?;
                v.start(x0)?;
                let out = stepper.run(x0, &mut noise, &mut v)?;
                if out.end != PathEnd::Exited {
                    return Ok(None);
                }
                let acc = v.finish(&out.x)?;
                let Ok(z) = fk_weight(&acc) else { return Ok(None) };
                let fx = self.f.value(&out.x).map_err(Error::eval_at(&out.x))?;
                Ok(Some((z * fx, z)))
            })
            .collect()
    }

    pub fn estimate(&self, probe: usize, x0: &[f64], config_hash: u64) -> Result<EstimateResult> {
        let s = self.samples(probe, x0)?;
        Ok(summarize(x0, &s, config_hash))
    }
}

/// Reduces per-path samples with a pairwise tree over path order.
pub fn summarize(x0: &[f64], samples: &[PathSample], config_hash: u64) -> EstimateResult {
    let payoff: Vec<f64> = samples.iter().flatten().map(|s| s.0).collect();
    let weight: Vec<f64> = samples.iter().flatten().map(|s| s.1).collect();
    let sp = RunningStats::from_slice(&payoff);
    let sw = RunningStats::from_slice(&weight);
    let excluded = (samples.len() - payoff.len()) as u64;
    EstimateResult {
        point: x0.to_vec(),
        mean: sp.mean(),
        stderr: sp.stderr(),
        n_effective: sp.count(),
        excluded,
        config_hash,
        weight_mean: sw.mean(),
        weight_stderr: sw.stderr(),
        unreliable: excluded as f64 > MAX_EXCLUDED_FRACTION * samples.len() as f64 || sp.count() < 2,
    }
}

/// One estimate per probe of the config.
pub fn run_mc_estimate(rc: &RunConfig) -> Result<Vec<EstimateResult>> {
    check_ellipticity(&rc.coeffs)?;
    let est = Estimator::new(rc)?;
    let hash = rc.hash();
    rc.probes.iter().enumerate().map(|(p, x)| est.estimate(p, x, hash)).collect()
}

/// Field mode: estimates on a coarse lattice.
pub fn run_field_estimate(rc: &RunConfig, per_axis: usize) -> Result<Vec<EstimateResult>> {
    if per_axis == 0 {
        return Err(Error::Config("field.lattice must be positive".into()));
    }
    check_ellipticity(&rc.coeffs)?;
    let est = Estimator::new(rc)?;
    let hash = rc.hash();
    rc.coeffs
        .sample_points(per_axis)
        .iter()
        .enumerate()
        .map(|(p, x)| est.estimate(p, x, hash))
        .collect()
}

fn check_ellipticity(cs: &CoefficientSet) -> Result<()> {
    let r = cs.check_uniform_ellipticity(&cs.sample_points(8))?;
    if !r.pass {
        return Err(Error::Numerical(format!("A is not uniformly elliptic: {r:?}")));
    }
    Ok(())
}

//! Monte Carlo occupation functionals `E_x[∫₀^τ |w|(X_s) ds]` and
//! `E_x[exp ∫₀^τ |w|(X_s) ds]` under the dynamics with drift b.

use rayon::prelude::*;
use serde::Serialize;

use crate::coeffs::{CoefficientSet, ScalarField};
use crate::error::{invalid, Error, Result};
use crate::pathsim::{Dynamics, NoiseStream, PathConfig, PathEnd, PathVisitor, StepRecord, Stepper};
use crate::stats::RunningStats;

#[derive(Debug, Clone, Serialize)]
pub struct ProbeOccupation {
    pub point: Vec<f64>,
    pub occupation: f64,
    pub occupation_se: f64,
    pub exp_moment: f64,
    pub exp_moment_se: f64,
    pub truncated: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OccupationReport {
    pub probes: Vec<ProbeOccupation>,
    pub n_paths: usize,
    /// Largest occupation over the probes and its standard error.
    pub mean_occupation: f64,
    pub mean_occupation_se: f64,
    /// Largest exponential moment over the probes and its standard error.
    pub exp_moment: f64,
    pub exp_moment_se: f64,
}

impl OccupationReport {
    /// Whether the measured exponential moment respects 1/(1−θ) whenever
    /// the occupation is below θ (within `k` standard errors).
    pub fn khasminskii_consistent(&self, theta: f64, k: f64) -> bool {
        self.probes.iter().all(|p| {
            p.occupation - k * p.occupation_se > theta || p.exp_moment <= (1.0 + k * p.exp_moment_se / p.exp_moment.max(1e-300)) / (1.0 - theta)
        })
    }
}

struct Occupation<'a, W> {
    w: &'a W,
    acc: f64,
}

impl<W: ScalarField> PathVisitor for Occupation<'_, W> {
    fn on_step(&mut self, rec: &StepRecord<'_>) -> Result<()> {
        self.acc += self.w.value(rec.x).map_err(Error::eval_at(rec.x))?.abs() * rec.dt;
        Ok(())
    }
}

/// Substream of path `i` at probe `p`.
pub fn probe_substream(p: usize, i: usize) -> u64 {
    ((p as u64) << 40) | i as u64
}

pub fn occupation_bound_mc<W: ScalarField>(
    cs: &CoefficientSet,
    w: &W,
    probes: &[Vec<f64>],
    n_paths: usize,
    pc: &PathConfig,
) -> Result<OccupationReport> {
    if probes.is_empty() || n_paths < 2 {
        return Err(invalid("occupation estimate needs probes and at least two paths"));
    }
    let d = cs.dim();
    let stepper = Stepper::new(cs, pc, Dynamics::WithDrift)?;
    let mut out = Vec::with_capacity(probes.len());
    for (p, x0) in probes.iter().enumerate() {
        if !cs.domain().contains(x0) {
            return Err(invalid(format!("probe {x0:?} lies outside D")));
        }
        let samples: Vec<(f64, bool)> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut noise = NoiseStream::new(pc.seed, probe_substream(p, i), d);
                let mut v = Occupation { w, acc: 0.0 };
                let o = stepper.run(x0, &mut noise, &mut v)?;
                Ok((v.acc, o.end != PathEnd::Exited))
            })
            .collect::<Result<_>>()?;
        let truncated = samples.iter().filter(|s| s.1).count();
        if truncated * 100 > n_paths {
            return Err(Error::Numerical(format!(
                "{truncated} of {n_paths} paths from {x0:?} did not exit before the horizon"
            )));
        }
        let occ: Vec<f64> = samples.iter().filter(|s| !s.1).map(|s| s.0).collect();
        let ex: Vec<f64> = occ.iter().map(|a| a.exp()).collect();
        let so = RunningStats::from_slice(&occ);
        let se = RunningStats::from_slice(&ex);
        out.push(ProbeOccupation {
            point: x0.clone(),
            occupation: so.mean(),
            occupation_se: so.stderr(),
            exp_moment: se.mean(),
            exp_moment_se: se.stderr(),
            truncated,
        });
    }
    let worst = out
        .iter()
        .max_by(|a, b| a.occupation.total_cmp(&b.occupation))
        .expect("non-empty");
    let worst_exp = out
        .iter()
        .max_by(|a, b| a.exp_moment.total_cmp(&b.exp_moment))
        .expect("non-empty");
    Ok(OccupationReport {
        mean_occupation: worst.occupation,
        mean_occupation_se: worst.occupation_se,
        exp_moment: worst_exp.exp_moment,
        exp_moment_se: worst_exp.exp_moment_se,
        probes: out,
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::FnField;
    use crate::domain::Domain;

    #[test]
    fn zero_weight() {
        let cs = CoefficientSet::laplacian(Domain::unit_cube(1));
        let r = occupation_bound_mc(&cs, &FnField(|_: &[f64]| 0.0), &[vec![0.5]], 50, &PathConfig::new(1e-3, 1)).unwrap();
        assert_eq!(r.mean_occupation, 0.0);
        assert_eq!(r.exp_moment, 1.0);
    }

    #[test]
    fn constant_weight_in_one_d() {
        // E_x[τ] = x(1−x) for ½Δ on (0,1)
        let cs = CoefficientSet::laplacian(Domain::unit_cube(1));
        let kappa = 0.8;
        let probes = vec![vec![0.5], vec![0.2]];
        let r = occupation_bound_mc(&cs, &FnField(move |_: &[f64]| kappa), &probes, 4000, &PathConfig::new(1e-4, 7)).unwrap();
        for p in &r.probes {
            let x = p.point[0];
            let exact = kappa * x * (1.0 - x);
            assert!((p.occupation - exact).abs() < 4.0 * p.occupation_se + 0.6 * kappa * 0.01, "{p:?} vs {exact}");
        }
        assert!(r.khasminskii_consistent(0.25, 3.0));
    }
}

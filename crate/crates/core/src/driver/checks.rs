//! Cross-checks of the Monte Carlo solver: against the grid oracle, the
//! martingale property, the semigroup pairing and the pathwise divergence
//! identity.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::kato::kato_weight_at;
use crate::bounds::{
    choose_exponents, kato_constant, khasminskii_threshold, khasminskii_threshold_with_area, lemma23_div_bound,
    lemma23_pot_bound, lp_norm, occupation_bound_mc, probe_substream, ExponentChoices, KatoReport, KernelConstants,
    OccupationReport,
};
use crate::coeffs::{FieldExpr, FnField, ScalarField};
use crate::driver::estimate::{summarize, EstimateResult, Estimator, PathSample};
use crate::driver::RunConfig;
use crate::error::{invalid, Error, Result};
use crate::functionals::{divergence_resolvent, fk_weight, DivergenceMode, FkVisitor};
use crate::oracle::{solve_dirichlet_weak, solve_xi_h_bhat, DirichletSolution, Grid, SemigroupOracle};
use crate::pathsim::{
    simulate_path_with, CoarsenedNoise, Dynamics, NoiseStream, PathConfig, PathEnd, PathVisitor, StepRecord, Stepper,
};
use crate::stats::RunningStats;

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub point: Vec<f64>,
    pub mc: f64,
    pub mc_stderr: f64,
    /// Resolvent-route estimate on the same paths (only when b̂ ≠ 0).
    pub mc_resolvent: Option<f64>,
    pub mc_resolvent_stderr: Option<f64>,
    /// Standard error of the paired difference of the two routes.
    pub route_diff_stderr: Option<f64>,
    pub oracle: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub budget: f64,
    pub within_budget: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub oracle_residual: f64,
    pub step: f64,
    pub delta: f64,
    pub config_hash: u64,
}

impl CompareReport {
    pub fn max_rel_err(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_err).fold(0.0, f64::max)
    }

    /// Largest |direct − resolvent| in units of the joint standard error
    /// √(se₁² + se₂²).
    pub fn max_route_gap(&self) -> Option<f64> {
        self.rows
            .iter()
            .map(|r| {
                let d = (r.mc - r.mc_resolvent?).abs();
                let se = r.mc_stderr.hypot(r.mc_resolvent_stderr?);
                Some(if d == 0.0 { 0.0 } else { d / se })
            })
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.into_iter().fold(0.0, f64::max))
    }
}

/// Solve the weak problem on the config grid.
pub fn oracle_solution(rc: &RunConfig) -> Result<DirichletSolution> {
    let grid = Arc::new(Grid::for_domain(rc.coeffs.domain(), rc.grid_delta)?);
    solve_dirichlet_weak(&rc.coeffs, &grid, &rc.boundary)
}

fn paired_diff_stderr(a: &[PathSample], b: &[PathSample]) -> f64 {
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some(x.as_ref()?.0 - y.as_ref()?.0))
        .collect();
    RunningStats::from_slice(&d).stderr()
}

/// MC against the weak solution at every probe; `c_budget` scales the
/// discretization allowance `√h + δ²`.
pub fn compare_to_oracle(rc: &RunConfig, c_budget: f64) -> Result<CompareReport> {
    let sol = oracle_solution(rc)?;
    let hash = rc.hash();
    let direct = Estimator::with_mode(rc, DivergenceMode::Direct)?;
    let resolvent = if rc.coeffs.is_bhat_zero() {
        None
    } else {
        Some(Estimator::with_mode(rc, DivergenceMode::Resolvent)?)
    };
    let allowance = c_budget * (rc.path.step_h.sqrt() + rc.grid_delta * rc.grid_delta);
    let mut rows = Vec::with_capacity(rc.probes.len());
    for (p, x) in rc.probes.iter().enumerate() {
        let sd = direct.samples(p, x)?;
        let ed = summarize(x, &sd, hash);
        let (mr, mrs, dse) = match &resolvent {
            Some(est) => {
                let sr = est.samples(p, x)?;
                let er = summarize(x, &sr, hash);
                (Some(er.mean), Some(er.stderr), Some(paired_diff_stderr(&sd, &sr)))
            }
            None => (None, None, None),
        };
        let oracle = sol.value(x)?;
        let abs_err = (ed.mean - oracle).abs();
        let budget = 3.0 * ed.stderr + allowance;
        rows.push(CompareRow {
            point: x.clone(),
            mc: ed.mean,
            mc_stderr: ed.stderr,
            mc_resolvent: mr,
            mc_resolvent_stderr: mrs,
            route_diff_stderr: dse,
            oracle,
            abs_err,
            rel_err: abs_err / oracle.abs().max(1e-300),
            budget,
            within_budget: abs_err <= budget,
        });
    }
    Ok(CompareReport {
        rows,
        oracle_residual: sol.residual,
        step: rc.path.step_h,
        delta: rc.grid_delta,
        config_hash: hash,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleRow {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub deviation: f64,
    /// |deviation| / stderr (0 when both vanish).
    pub deviation_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleReport {
    pub point: Vec<f64>,
    pub u0: f64,
    pub rows: Vec<MartingaleRow>,
    pub excluded: usize,
    pub max_deviation_se: f64,
}

impl MartingaleReport {
    /// Every row within `k` standard errors plus an absolute allowance.
    pub fn flat_within(&self, k: f64, allowance: f64) -> bool {
        self.rows.iter().all(|r| r.deviation.abs() <= k * r.stderr + allowance)
    }
}

/// `E_x[u(X_{t∧τ}) Z_{t∧τ}]` against `u(x)` at each probe and time.
pub fn martingale_check(rc: &RunConfig, u: &DirichletSolution, times: &[f64]) -> Result<Vec<MartingaleReport>> {
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
        return Err(invalid("martingale times must be non-negative and increasing"));
    }
    let cs = &rc.coeffs;
    let est = Estimator::new(rc)?;
    let stepper = Stepper::new(cs, &rc.path, Dynamics::Plain)?;
    let fd = stepper.fd_step();
    let d = cs.dim();
    let t_last = *times.last().expect("non-empty");
    let nt = times.len();
    let mut out = Vec::new();
    for (p, x0) in rc.probes.iter().enumerate() {
        let u0 = u.value(x0)?;
        let samples: Vec<Option<Vec<f64>>> = (0..rc.n_paths)
            .into_par_iter()
            .map(|i| {
                let mut noise = NoiseStream::new(rc.path.seed, probe_substream(p, i), d);
                let mut v = FkVisitor::new(cs, est.mode, est.xi.as_ref(), fd, true)?
                    .with_checkpoints(times.to_vec())
                    .with_horizon(t_last);
                v.start(x0)?;
                let o = stepper.run(x0, &mut noise, &mut v)?;
                if o.end == PathEnd::Truncated {
                    return Ok(None);
                }
                let mut vals = Vec::with_capacity(nt);
                for (acc, x) in &v.snapshots {
                    let Ok(z) = fk_weight(acc) else { return Ok(None) };
                    vals.push(z * u.value(x)?);
                }
                if vals.len() < nt {
                    let acc = v.finish(&o.x)?;
                    let Ok(z) = fk_weight(&acc) else { return Ok(None) };
                    let fx = rc.boundary.value(&o.x).map_err(Error::eval_at(&o.x))?;
                    vals.resize(nt, z * fx);
                }
                Ok(Some(vals))
            })
            .collect::<Result<_>>()?;
        let kept: Vec<&Vec<f64>> = samples.iter().flatten().collect();
        let mut rows = Vec::with_capacity(nt);
        for (k, &t) in times.iter().enumerate() {
            let col: Vec<f64> = kept.iter().map(|v| v[k]).collect();
            let s = RunningStats::from_slice(&col);
            let dev = s.mean() - u0;
            rows.push(MartingaleRow {
                t,
                mean: s.mean(),
                stderr: s.stderr(),
                deviation: dev,
                deviation_se: if dev == 0.0 { 0.0 } else { dev.abs() / s.stderr() },
            });
        }
        out.push(MartingaleReport {
            point: x0.clone(),
            u0,
            max_deviation_se: rows.iter().map(|r| r.deviation_se).fold(0.0, f64::max),
            rows,
            excluded: samples.len() - kept.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupRow {
    pub t: f64,
    pub mc: f64,
    pub mc_stderr: f64,
    pub oracle: f64,
    pub rel_err: f64,
    /// Fraction of paths alive at t.
    pub survival: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentPoint {
    pub t: f64,
    /// max over probes of E_x[exp ∫₀ᵗ w(X_s) ds; t < τ].
    pub sup_moment: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupReport {
    pub rows: Vec<SemigroupRow>,
    pub volume: f64,
    pub n_paths: usize,
    pub grid_nodes: usize,
    pub moment_curve: Vec<MomentPoint>,
}

/// Uniform point of D by rejection from the bounding box.
pub fn sample_uniform<R: Rng>(rc_dom: &crate::domain::Domain, rng: &mut R) -> Vec<f64> {
    let (lo, hi) = rc_dom.bbox();
    loop {
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect();
        if rc_dom.contains(&x) {
            return x;
        }
    }
}

const START_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Moment-curve paths per probe.
const MOMENT_PATHS: usize = 10_000;

/// `∫ f(x) E_x[g(X_t) Z_t; t < τ] dx` by Monte Carlo against the
/// matrix-exponential oracle, for each `t` in `times`.
pub fn run_semigroup_check(rc: &RunConfig, f: &FieldExpr, g: &FieldExpr, times: &[f64]) -> Result<SemigroupReport> {
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || !(times[0] > 0.0) {
        return Err(invalid("semigroup times must be positive and increasing"));
    }
    let cs = &rc.coeffs;
    let dom = cs.domain();
    let d = cs.dim();
    let grid = Arc::new(Grid::for_domain(dom, rc.grid_delta)?);
    let oracle = SemigroupOracle::new(cs, &grid)?;
    let stepper = Stepper::new(cs, &rc.path, Dynamics::Plain)?;
    let fd = stepper.fd_step();
    let t_last = *times.last().expect("non-empty");
    let nt = times.len();
    let vol = dom.volume();
    // Each row: f(X0)·g(X_t)·Z_t per time (0 when killed), alive flags.
    let samples: Vec<Option<(Vec<f64>, Vec<bool>)>> = (0..rc.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut srng = ChaCha8Rng::seed_from_u64(rc.path.seed ^ START_SEED_SALT);
            srng.set_stream(i as u64);
            let x0 = sample_uniform(dom, &mut srng);
            let fx0 = f.value(&x0).map_err(Error::eval_at(&x0))?;
            let mut noise = NoiseStream::new(rc.path.seed, i as u64, d);
            let mut v = FkVisitor::new(cs, DivergenceMode::Direct, None, fd, true)?
                .with_checkpoints(times.to_vec())
                .with_horizon(t_last);
            v.start(&x0)?;
            let o = stepper.run(&x0, &mut noise, &mut v)?;
            if o.end == PathEnd::Truncated {
                return Ok(None);
            }
            let mut vals = vec![0.0; nt];
            let mut alive = vec![false; nt];
            for (k, (acc, x)) in v.snapshots.iter().enumerate() {
                let Ok(z) = fk_weight(acc) else { return Ok(None) };
                vals[k] = vol * fx0 * g.value(x).map_err(Error::eval_at(x))? * z;
                alive[k] = true;
            }
            Ok(Some((vals, alive)))
        })
        .collect::<Result<_>>()?;
    let kept: Vec<&(Vec<f64>, Vec<bool>)> = samples.iter().flatten().collect();
    if kept.len() * 100 < samples.len() * 99 {
        return Err(Error::Numerical(format!(
            "{} of {} semigroup paths overflowed or were truncated",
            samples.len() - kept.len(),
            samples.len()
        )));
    }
    let mut rows = Vec::with_capacity(nt);
    for (k, &t) in times.iter().enumerate() {
        let col: Vec<f64> = kept.iter().map(|s| s.0[k]).collect();
        let s = RunningStats::from_slice(&col);
        let alive = kept.iter().filter(|s| s.1[k]).count();
        let o = oracle.pairing(f, g, t)?;
        rows.push(SemigroupRow {
            t,
            mc: s.mean(),
            mc_stderr: s.stderr(),
            oracle: o,
            rel_err: (s.mean() - o).abs() / o.abs().max(1e-300),
            survival: alive as f64 / kept.len() as f64,
        });
    }
    let moment_curve = moment_curve(rc, times)?;
    Ok(SemigroupReport {
        rows,
        volume: vol,
        n_paths: rc.n_paths,
        grid_nodes: grid.interior_indices().len(),
        moment_curve,
    })
}

struct Occupation<'a> {
    rc: &'a RunConfig,
    acc: f64,
    checkpoints: Vec<f64>,
    t_last: f64,
    at: Vec<f64>,
}

impl PathVisitor for Occupation<'_> {
    fn on_step(&mut self, rec: &StepRecord<'_>) -> Result<()> {
        self.acc += kato_weight_at(&self.rc.coeffs, rec.x, false)? * rec.dt;
        Ok(())
    }

    fn checkpoints(&self) -> &[f64] {
        &self.checkpoints
    }

    fn on_checkpoint(&mut self, _index: usize, _t: f64, _x: &[f64]) -> Result<()> {
        self.at.push(self.acc);
        Ok(())
    }

    fn horizon(&self) -> Option<f64> {
        Some(self.t_last)
    }
}

/// sup over probes of `E_x[exp ∫₀ᵗ w; t < τ]` with w = |b|² + |b̂|² + |c|.
pub fn moment_curve(rc: &RunConfig, times: &[f64]) -> Result<Vec<MomentPoint>> {
    let cs = &rc.coeffs;
    let d = cs.dim();
    let stepper = Stepper::new(cs, &rc.path, Dynamics::Plain)?;
    let t_last = *times.last().ok_or_else(|| invalid("no times"))?;
    let n = rc.n_paths.min(MOMENT_PATHS);
    let mut best: Vec<MomentPoint> = times
        .iter()
        .map(|&t| MomentPoint {
            t,
            sup_moment: 0.0,
            stderr: 0.0,
        })
        .collect();
    for (p, x0) in rc.probes.iter().enumerate() {
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut noise = NoiseStream::new(rc.path.seed, probe_substream(p, i), d);
                let mut v = Occupation {
                    rc,
                    acc: 0.0,
                    checkpoints: times.to_vec(),
                    t_last,
                    at: Vec::new(),
                };
                stepper.run(x0, &mut noise, &mut v)?;
                let mut vals: Vec<f64> = v.at.iter().map(|a| a.exp()).collect();
                vals.resize(times.len(), 0.0);
                Ok(vals)
            })
            .collect::<Result<_>>()?;
        for (k, b) in best.iter_mut().enumerate() {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let s = RunningStats::from_slice(&col);
            if s.mean() > b.sup_moment {
                b.sup_moment = s.mean();
                b.stderr = s.stderr();
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma22Level {
    pub step: f64,
    pub delta: f64,
    /// RMS over paths of |direct − resolvent| divergence integrals.
    pub rms: f64,
    pub mean_abs: f64,
    pub xi_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma22Report {
    pub point: Vec<f64>,
    pub n_paths: usize,
    pub horizon: f64,
    pub levels: Vec<Lemma22Level>,
    /// rms[l] / rms[l+1] for consecutive levels.
    pub ratios: Vec<f64>,
}

/// Pathwise comparison of `−∫ div b̂ ds` with its resolvent representation,
/// on noise-coupled paths over a sequence of (h, δ) levels.
pub fn verify_lemma22(rc: &RunConfig) -> Result<Lemma22Report> {
    let cs = &rc.coeffs;
    if cs.is_bhat_zero() {
        return Err(Error::Config("verify-lemma22 needs a non-zero b̂".into()));
    }
    let prm = &rc.lemma22;
    let h_fine = *prm.steps.last().expect("validated non-empty");
    let factors: Vec<usize> = prm
        .steps
        .iter()
        .map(|h| {
            let r = h / h_fine;
            let k = r.round();
            if (r - k).abs() > 1e-9 * r || k < 1.0 {
                Err(Error::Config(format!("step {h} is not a multiple of the finest step {h_fine}")))
            } else {
                Ok(k as usize)
            }
        })
        .collect::<Result<_>>()?;
    let x0 = rc.probes.first().ok_or_else(|| Error::Config("no probe".into()))?.clone();
    let d = cs.dim();
    let mut levels = Vec::with_capacity(prm.steps.len());
    for ((&h, &delta), &factor) in prm.steps.iter().zip(&prm.deltas).zip(&factors) {
        let xi = solve_xi_h_bhat(cs, delta)?;
        let mut pc: PathConfig = rc.path.clone();
        pc.step_h = h;
        pc.t_max = Some(prm.horizon);
        pc.refine = None;
        let fd = pc.fd_step(cs.domain());
        let diffs: Vec<f64> = (0..prm.n_paths)
            .into_par_iter()
            .map(|i| {
                let mut noise = CoarsenedNoise::new(NoiseStream::new(pc.seed, i as u64, d), factor, d);
                let path = simulate_path_with(cs, &pc, &x0, Dynamics::Plain, &mut noise)?;
                let mut direct = 0.0;
                for k in 0..path.len() {
                    let dt = path.times[k + 1] - path.times[k];
                    direct -= cs.div_bhat(&path.states[k], fd)? * dt;
                }
                let res = divergence_resolvent(&xi, &path, path.len())?;
                Ok(direct - res)
            })
            .collect::<Result<_>>()?;
        let sq: Vec<f64> = diffs.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = diffs.iter().map(|v| v.abs()).collect();
        levels.push(Lemma22Level {
            step: h,
            delta,
            rms: RunningStats::from_slice(&sq).mean().sqrt(),
            mean_abs: RunningStats::from_slice(&ab).mean(),
            xi_residual: xi.solve_residual,
        });
    }
    let ratios = levels.windows(2).map(|w| w[0].rms / w[1].rms).collect();
    Ok(Lemma22Report {
        point: x0,
        n_paths: prm.n_paths,
        horizon: prm.horizon,
        levels,
        ratios,
    })
}

/// Per-probe estimates in both divergence routes.
pub fn both_routes(rc: &RunConfig) -> Result<(Vec<EstimateResult>, Vec<EstimateResult>)> {
    let hash = rc.hash();
    let a = Estimator::with_mode(rc, DivergenceMode::Direct)?;
    let b = Estimator::with_mode(rc, DivergenceMode::Resolvent)?;
    let mut ra = Vec::new();
    let mut rb = Vec::new();
    for (p, x) in rc.probes.iter().enumerate() {
        ra.push(a.estimate(p, x, hash)?);
        rb.push(b.estimate(p, x, hash)?);
    }
    Ok((ra, rb))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub kernel: KernelConstants,
    pub exponents: Option<ExponentChoices>,
    /// ‖g‖ in L^p(D) with p from the coefficient set.
    pub g_norm: f64,
    pub khasminskii: Option<f64>,
    pub khasminskii_with_area: Option<f64>,
    /// Sup over c − div b̂ − g on sample points (≤ 0 when g dominates).
    pub g_dominance_gap: f64,
    pub kato: Vec<KatoReport>,
    /// (t, div bound, pot bound) per unit field norm.
    pub bound_per_unit_norm: Vec<(f64, f64, f64)>,
    pub occupation: Option<OccupationReport>,
}

/// Occupation paths per probe in the bounds summary.
const OCCUPATION_PATHS: usize = 20_000;

/// The explicit constants for a config, plus a Monte Carlo occupation
/// estimate for |g| when the closed-form threshold is unavailable (d < 3).
pub fn run_bounds(rc: &RunConfig) -> Result<BoundsReport> {
    let cs = &rc.coeffs;
    let dom = cs.domain();
    let d = cs.dim();
    let kc = rc.kernel;
    let exponents = choose_exponents(d, rc.bounds.p1, rc.bounds.p2).ok();
    let (lo, hi) = dom.bbox();
    let p = cs.p();
    let g_abs = |y: &[f64]| if dom.contains(y) { cs.eval_g(y).unwrap_or(f64::NAN).abs() } else { 0.0 };
    let g_norm = lp_norm(&lo, &hi, &g_abs, p, &[]);
    let (kh, kha) = if d >= 3 {
        (
            Some(khasminskii_threshold(&kc, d, p)?),
            Some(khasminskii_threshold_with_area(&kc, d, p)?),
        )
    } else {
        (None, None)
    };
    let fd = rc.path.fd_step(dom);
    let gap = cs.g_dominance_gap(&cs.sample_points(16), fd)?;
    let grid = Arc::new(Grid::for_domain(dom, rc.grid_delta)?);
    let kato = rc
        .bounds
        .epsilons
        .iter()
        .map(|&e| kato_constant(cs, &grid, e))
        .collect::<Result<_>>()?;
    let bound_per_unit_norm = match &exponents {
        Some(ec) => rc
            .bounds
            .times
            .iter()
            .map(|&t| (t, lemma23_div_bound(&kc, ec, t, 1.0), lemma23_pot_bound(&kc, ec, t, 1.0)))
            .collect(),
        None => Vec::new(),
    };
    let occupation = if d < 3 {
        let mut pc = rc.path.clone();
        pc.refine = None;
        let w = FnField(|y: &[f64]| cs.eval_g(y).unwrap_or(f64::NAN));
        Some(occupation_bound_mc(cs, &w, &rc.probes, rc.n_paths.min(OCCUPATION_PATHS), &pc)?)
    } else {
        None
    };
    Ok(BoundsReport {
        kernel: kc,
        exponents,
        g_norm,
        khasminskii: kh,
        khasminskii_with_area: kha,
        g_dominance_gap: gap,
        kato,
        bound_per_unit_norm,
        occupation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(extra: &str) -> RunConfig {
        RunConfig::parse(&format!(
            "domain.kind = box\ndomain.lower = 0,0\ndomain.upper = 1,1\nf = x1\nprobes = 0.5,0.5; 0.3,0.6\npaths = 2000\nstep = 1e-3\ngrid.delta = 0.0625\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn compare_harmonic() {
        let r = compare_to_oracle(&harmonic(""), 1.0).unwrap();
        for row in &r.rows {
            assert!((row.oracle - row.point[0]).abs() < 1e-10);
            assert!(row.within_budget, "{row:?}");
            assert!(row.mc_resolvent.is_none());
        }
    }

    #[test]
    fn martingale_time_zero_is_exact() {
        let rc = harmonic("");
        let u = oracle_solution(&rc).unwrap();
        let r = martingale_check(&rc, &u, &[0.0, 0.05, 0.1]).unwrap();
        for m in &r {
            assert_eq!(m.rows[0].deviation, 0.0);
            assert!(m.flat_within(3.0, 0.01), "{m:?}");
        }
    }

    #[test]
    fn uniform_sampler_stays_inside() {
        let dom = crate::domain::Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..2000).map(|_| sample_uniform(&dom, &mut rng)).collect();
        assert!(pts.iter().all(|p| dom.contains(p)));
        let mean_r2 = pts.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum::<f64>() / 2000.0;
        // E|X|² = 1/2 for the uniform law on the unit disk
        assert!((mean_r2 - 0.5).abs() < 0.03);
    }

    #[test]
    fn semigroup_small_time() {
        let rc = RunConfig::parse(
            "domain.kind = interval\ndomain.lower = 0\ndomain.upper = 1\nprobes = 0.5\npaths = 2000\nstep = 1e-5\ngrid.delta = 0.02",
        )
        .unwrap();
        let s: FieldExpr = "sin(pi*x1)".parse().unwrap();
        let r = run_semigroup_check(&rc, &s, &s, &[1e-4]).unwrap();
        let row = &r.rows[0];
        assert!((row.oracle - 0.5).abs() < 2e-3, "{row:?}");
        assert!((row.mc - row.oracle).abs() < 4.0 * row.mc_stderr + 0.01, "{row:?}");
    }
}

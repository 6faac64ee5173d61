//! Euler–Maruyama simulation of the diffusion generated by
//! `½ ∂_j(a_ij ∂_i ·)` inside `D`, stopped at the exit time.
//!
//! A step from `x` draws `ΔM = σ(x)√h·z` with `σσᵀ = Ã(x)` and moves to
//! `x + β(x)h + ΔM`, where `β_i = ½ Σ_j ∂_j a_ij`. If the new point leaves
//! `D`, the segment is bisected to the crossing, the step is cut to the
//! fraction `θ` of its length, and the state is placed on `∂D`.
//!
//! The [`Stepper`] streams steps to a [`PathVisitor`], so estimators never
//! store trajectories; [`simulate_path`] is the recording front end.

pub mod noise;

pub use crate::domain::Domain;
pub use noise::{CoarsenedNoise, NoiseSource, NoiseStream, ZeroNoise};

use crate::coeffs::CoefficientSet;
use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky_into, lower_mul, symmetrize, MAX_DIM};

/// Shortens steps near the boundary: inside a band of width
/// `band·√(h·tr Ã)` around `∂D` the step is `h/divisor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRefinement {
    pub band: f64,
    pub divisor: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub step_h: f64,
    /// Simulation horizon; `None` means 50·ς².
    pub t_max: Option<f64>,
    pub seed: u64,
    pub substream: u64,
    pub exit_tol: f64,
    /// Finite-difference step for ∂a_ij; `None` means 1e−5·ς.
    pub fd_step: Option<f64>,
    pub refine: Option<BoundaryRefinement>,
}

impl PathConfig {
    pub fn new(step_h: f64, seed: u64) -> Self {
        PathConfig {
            step_h,
            t_max: None,
            seed,
            substream: 0,
            exit_tol: 1e-9,
            fd_step: None,
            refine: None,
        }
    }

    pub fn with_substream(&self, substream: u64) -> Self {
        PathConfig {
            substream,
            ..self.clone()
        }
    }

    pub fn horizon(&self, dom: &Domain) -> f64 {
        self.t_max.unwrap_or_else(|| 50.0 * dom.diameter().powi(2))
    }

    pub fn fd_step(&self, dom: &Domain) -> f64 {
        self.fd_step.unwrap_or_else(|| 1e-5 * dom.diameter())
    }

    pub fn validate(&self, dom: &Domain) -> Result<()> {
        if !(self.step_h > 0.0 && self.step_h.is_finite()) {
            return Err(invalid(format!("step_h = {} must be positive", self.step_h)));
        }
        if self.step_h > self.horizon(dom) {
            return Err(invalid("step_h exceeds t_max"));
        }
        if !(self.exit_tol > 0.0 && self.exit_tol < dom.inradius()) {
            return Err(invalid(format!(
                "exit_tol = {} must be positive and below the inradius {}",
                self.exit_tol,
                dom.inradius()
            )));
        }
        if let Some(r) = self.refine {
            if !(r.band > 0.0) || r.divisor == 0 {
                return Err(invalid("boundary refinement needs band > 0 and divisor ≥ 1"));
            }
        }
        Ok(())
    }
}

/// `Plain` simulates X; `WithDrift` adds b to the drift (the Q-dynamics).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    Plain,
    WithDrift,
}

/// One completed step as seen by a visitor. Integrands belong at `x`.
#[derive(Debug)]
pub struct StepRecord<'a> {
    pub index: u64,
    pub t: f64,
    pub dt: f64,
    pub x: &'a [f64],
    pub dm: &'a [f64],
    pub x_next: &'a [f64],
    pub exited: bool,
    /// Lower Cholesky factor of Ã(x), row-major d×d.
    pub chol: &'a [f64],
}

pub trait PathVisitor {
    fn on_step(&mut self, rec: &StepRecord<'_>) -> Result<()>;

    /// Times at which the path must land exactly; must be increasing.
    fn checkpoints(&self) -> &[f64] {
        &[]
    }

    fn on_checkpoint(&mut self, _index: usize, _t: f64, _x: &[f64]) -> Result<()> {
        Ok(())
    }

    /// Stop (without exit) at this time.
    fn horizon(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathEnd {
    Exited,
    Horizon,
    Truncated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub end: PathEnd,
    pub t: f64,
    pub x: Vec<f64>,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitCrossing {
    pub exited: bool,
    pub x_boundary: Vec<f64>,
    pub theta: f64,
}

/// Locates the first crossing of `[x_prev, x_next]` with ∂D by bisection.
pub fn detect_exit(dom: &Domain, x_prev: &[f64], x_next: &[f64], exit_tol: f64) -> ExitCrossing {
    let d = x_prev.len();
    if dom.contains(x_next) {
        return ExitCrossing {
            exited: false,
            x_boundary: x_next.to_vec(),
            theta: 1.0,
        };
    }
    let mut xb = vec![0.0; d];
    let theta = bisect_exit(dom, x_prev, x_next, exit_tol, &mut xb);
    ExitCrossing {
        exited: true,
        x_boundary: xb,
        theta,
    }
}

fn bisect_exit(dom: &Domain, x: &[f64], xn: &[f64], exit_tol: f64, out: &mut [f64]) -> f64 {
    let d = x.len();
    let len: f64 = x.iter().zip(xn).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut y = [0.0; MAX_DIM];
    while (hi - lo) * len > exit_tol {
        let mid = 0.5 * (lo + hi);
        for k in 0..d {
            y[k] = x[k] + mid * (xn[k] - x[k]);
        }
        if dom.contains(&y[..d]) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    for k in 0..d {
        y[k] = x[k] + hi * (xn[k] - x[k]);
    }
    dom.project_to_boundary(&y[..d], out);
    hi
}

/// σ(Ã) for a symmetric positive definite input.
pub fn sigma_factor(a_sym: &[f64], d: usize) -> Result<Vec<f64>> {
    crate::linalg::sigma_factor(a_sym, d)
}

/// β(x) = ½ Σ_j ∂_j a_ij(x) by central differences.
pub fn drift_correction(cs: &CoefficientSet, x: &[f64], fd_step: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; cs.dim()];
    cs.drift_correction_into(x, fd_step, &mut out)?;
    Ok(out)
}

/// One Euler step from `x` with the given standard normal vector.
pub fn step_euler(cs: &CoefficientSet, x: &[f64], h: f64, noise: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = cs.dim();
    let a = cs.eval_matrix(x)?;
    let l = sigma_factor(&symmetrize(&a, d), d)?;
    let beta = drift_correction(cs, x, 1e-5 * cs.domain().diameter())?;
    let mut dm = vec![0.0; d];
    lower_mul(&l, d, noise, &mut dm);
    for v in dm.iter_mut() {
        *v *= h.sqrt();
    }
    let x_next = (0..d).map(|k| x[k] + beta[k] * h + dm[k]).collect();
    Ok((x_next, dm))
}

pub struct Stepper<'a> {
    cs: &'a CoefficientSet,
    dynamics: Dynamics,
    h: f64,
    t_max: f64,
    exit_tol: f64,
    fd_step: f64,
    refine: Option<BoundaryRefinement>,
    const_chol: Option<[f64; MAX_DIM * MAX_DIM]>,
}

impl<'a> Stepper<'a> {
    pub fn new(cs: &'a CoefficientSet, pc: &PathConfig, dynamics: Dynamics) -> Result<Self> {
        let dom = cs.domain();
        pc.validate(dom)?;
        let d = cs.dim();
        let const_chol = if cs.is_matrix_constant() {
            let x0 = cs
                .sample_points(3)
                .into_iter()
                .next()
                .unwrap_or_else(|| dom.bbox().0);
            let mut a = [0.0; MAX_DIM * MAX_DIM];
            cs.matrix_into(&x0, &mut a[..d * d], false)?;
            let s = symmetrize(&a[..d * d], d);
            let mut l = [0.0; MAX_DIM * MAX_DIM];
            if !cholesky_into(&s, d, &mut l) {
                return Err(Error::Numerical("symmetric part of A is not positive definite".into()));
            }
            Some(l)
        } else {
            None
        };
        Ok(Stepper {
            cs,
            dynamics,
            h: pc.step_h,
            t_max: pc.horizon(dom),
            exit_tol: pc.exit_tol,
            fd_step: pc.fd_step(dom),
            refine: pc.refine,
            const_chol,
        })
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        self.cs
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn run<N: NoiseSource, V: PathVisitor>(&self, x0: &[f64], noise: &mut N, visitor: &mut V) -> Result<PathOutcome> {
        let cs = self.cs;
        let dom = cs.domain();
        let d = cs.dim();
        if x0.len() != d || !dom.contains(x0) {
            return Err(invalid(format!("start point {x0:?} is not in D")));
        }
        let checkpoints: Vec<f64> = visitor.checkpoints().to_vec();
        let visitor_horizon = visitor.horizon();
        let horizon = visitor_horizon.map_or(self.t_max, |h| h.min(self.t_max));

        let mut x = [0.0; MAX_DIM];
        x[..d].copy_from_slice(x0);
        let mut xn = [0.0; MAX_DIM];
        let mut a = [0.0; MAX_DIM * MAX_DIM];
        let mut s = [0.0; MAX_DIM * MAX_DIM];
        let mut l = self.const_chol.unwrap_or([0.0; MAX_DIM * MAX_DIM]);
        let mut beta = [0.0; MAX_DIM];
        let mut bv = [0.0; MAX_DIM];
        let mut z = [0.0; MAX_DIM];
        let mut dm = [0.0; MAX_DIM];
        let mut xb = [0.0; MAX_DIM];

        let mut t = 0.0f64;
        let mut step = 0u64;
        let mut next_cp = 0usize;
        while next_cp < checkpoints.len() && checkpoints[next_cp] <= 0.0 {
            visitor.on_checkpoint(next_cp, 0.0, &x[..d])?;
            next_cp += 1;
        }

        loop {
            if t >= horizon {
                let end = if visitor_horizon.is_some_and(|h| h <= self.t_max) {
                    PathEnd::Horizon
                } else {
                    PathEnd::Truncated
                };
                return Ok(PathOutcome {
                    end,
                    t,
                    x: x[..d].to_vec(),
                    steps: step,
                });
            }

            if self.const_chol.is_none() {
                cs.matrix_into(&x[..d], &mut a[..d * d], false)?;
                for i in 0..d {
                    for j in 0..d {
                        s[i * d + j] = 0.5 * (a[i * d + j] + a[j * d + i]);
                    }
                }
                if !cholesky_into(&s[..d * d], d, &mut l) {
                    return Err(Error::Numerical(format!(
                        "symmetric part of A is not positive definite at {:?}",
                        &x[..d]
                    )));
                }
                cs.drift_correction_into(&x[..d], self.fd_step, &mut beta)?;
            }

            let mut h = self.h;
            if let Some(r) = self.refine {
                let tr: f64 = (0..d).map(|i| (0..=i).map(|k| l[i * d + k] * l[i * d + k]).sum::<f64>()).sum();
                if dom.distance_to_boundary(&x[..d]) < r.band * (h * tr).sqrt() {
                    h /= r.divisor as f64;
                }
            }
            let mut target = horizon;
            if next_cp < checkpoints.len() {
                target = target.min(checkpoints[next_cp]);
            }
            let remaining = target - t;
            let lands = remaining <= h * (1.0 + 1e-9);
            let mut dt = if lands { remaining } else { h };

            noise.next_normals(&mut z[..d]);
            lower_mul(&l[..d * d], d, &z[..d], &mut dm[..d]);
            let sq = dt.sqrt();
            for v in dm[..d].iter_mut() {
                *v *= sq;
            }
            if self.dynamics == Dynamics::WithDrift {
                cs.b_into(&x[..d], &mut bv[..d], false)?;
            }
            for k in 0..d {
                xn[k] = x[k] + (beta[k] + bv[k]) * dt + dm[k];
            }

            let exited = !dom.contains(&xn[..d]);
            if exited {
                let theta = bisect_exit(dom, &x[..d], &xn[..d], self.exit_tol, &mut xb[..d]);
                xn[..d].copy_from_slice(&xb[..d]);
                for v in dm[..d].iter_mut() {
                    *v *= theta;
                }
                dt *= theta;
            }

            visitor.on_step(&StepRecord {
                index: step,
                t,
                dt,
                x: &x[..d],
                dm: &dm[..d],
                x_next: &xn[..d],
                exited,
                chol: &l[..d * d],
            })?;

            step += 1;
            t = if lands && !exited { target } else { t + dt };
            x[..d].copy_from_slice(&xn[..d]);

            if exited {
                return Ok(PathOutcome {
                    end: PathEnd::Exited,
                    t,
                    x: x[..d].to_vec(),
                    steps: step,
                });
            }
            while next_cp < checkpoints.len() && checkpoints[next_cp] <= t {
                visitor.on_checkpoint(next_cp, t, &x[..d])?;
                next_cp += 1;
            }
        }
    }
}

/// Discretized trajectory up to exit (or the horizon).
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionPath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `dm[k]` is the martingale increment over `[times[k], times[k+1]]`.
    pub dm: Vec<Vec<f64>>,
    pub exited: bool,
    pub tau: Option<f64>,
    pub truncated: bool,
}

impl DiffusionPath {
    pub fn len(&self) -> usize {
        self.dm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dm.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("path has a start point")
    }
}

#[derive(Default)]
struct Recorder {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    dm: Vec<Vec<f64>>,
}

impl PathVisitor for Recorder {
    fn on_step(&mut self, rec: &StepRecord<'_>) -> Result<()> {
        self.times.push(rec.t + rec.dt);
        self.states.push(rec.x_next.to_vec());
        self.dm.push(rec.dm.to_vec());
        Ok(())
    }
}

/// Records a full path from `x0` with noise from `(pc.seed, pc.substream)`.
pub fn simulate_path(cs: &CoefficientSet, pc: &PathConfig, x0: &[f64]) -> Result<DiffusionPath> {
    let mut noise = NoiseStream::new(pc.seed, pc.substream, cs.dim());
    simulate_path_with(cs, pc, x0, Dynamics::Plain, &mut noise)
}

pub fn simulate_path_with<N: NoiseSource>(
    cs: &CoefficientSet,
    pc: &PathConfig,
    x0: &[f64],
    dynamics: Dynamics,
    noise: &mut N,
) -> Result<DiffusionPath> {
    let stepper = Stepper::new(cs, pc, dynamics)?;
    let mut rec = Recorder {
        times: vec![0.0],
        states: vec![x0.to_vec()],
        dm: Vec::new(),
    };
    let out = stepper.run(x0, noise, &mut rec)?;
    Ok(DiffusionPath {
        times: rec.times,
        states: rec.states,
        dm: rec.dm,
        exited: out.end == PathEnd::Exited,
        tau: (out.end == PathEnd::Exited).then_some(out.t),
        truncated: out.end == PathEnd::Truncated,
    })
}

/// Writes `t, x1..xd, dM1..dMd` rows for a recorded path.
pub fn write_trace<W: std::io::Write>(path: &DiffusionPath, mut w: W) -> std::io::Result<()> {
    let d = path.states[0].len();
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|k| format!("x{k}")));
    header.extend((1..=d).map(|k| format!("dM{k}")));
    writeln!(w, "{}", header.join(","))?;
    for (k, (t, x)) in path.times.iter().zip(&path.states).enumerate() {
        let mut row = vec![format!("{t:.16e}")];
        row.extend(x.iter().map(|v| format!("{v:.16e}")));
        match path.dm.get(k) {
            Some(dm) => row.extend(dm.iter().map(|v| format!("{v:.16e}"))),
            None => row.extend(std::iter::repeat_n(String::new(), d)),
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_examples() {
        let iv = Domain::interval(0.0, 1.0).unwrap();
        assert!(!detect_exit(&iv, &[0.3], &[0.4], 1e-9).exited);
        let e = detect_exit(&iv, &[0.9], &[1.1], 1e-9);
        assert!(e.exited);
        assert!((e.x_boundary[0] - 1.0).abs() <= 1e-9);
        assert!((e.theta - 0.5).abs() <= 1e-8);
        let ball = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let e = detect_exit(&ball, &[0.9, 0.0], &[1.2, 0.0], 1e-9);
        assert!(e.exited && (e.x_boundary[0] - 1.0).abs() < 1e-9 && e.x_boundary[1].abs() < 1e-12);
    }

    #[test]
    fn zero_noise_identity_stays_put() {
        let cs = CoefficientSet::laplacian(Domain::unit_cube(2));
        let (xn, dm) = step_euler(&cs, &[0.3, 0.4], 0.01, &[0.0, 0.0]).unwrap();
        assert_eq!(xn, vec![0.3, 0.4]);
        assert_eq!(dm, vec![0.0, 0.0]);
    }

    #[test]
    fn deterministic_given_seed() {
        let cs = CoefficientSet::builder(Domain::unit_cube(2))
            .matrix(&[&["1 + 0.3*x1", "0.2"], &["-0.1", "1"]])
            .unwrap()
            .build()
            .unwrap();
        let pc = PathConfig::new(1e-3, 11).with_substream(4);
        let a = simulate_path(&cs, &pc, &[0.5, 0.5]).unwrap();
        let b = simulate_path(&cs, &pc, &[0.5, 0.5]).unwrap();
        assert_eq!(a, b);
        assert!(a.exited);
        let last = a.final_state();
        assert!(cs.domain().distance_to_boundary(last) <= 1e-9);
        for x in &a.states[..a.states.len() - 1] {
            assert!(cs.domain().contains(x));
        }
        assert!((a.times.last().unwrap() - a.tau.unwrap()).abs() < 1e-15);
    }

    #[test]
    fn checkpoints_are_hit_exactly() {
        struct Cp(Vec<f64>, Vec<f64>);
        impl PathVisitor for Cp {
            fn on_step(&mut self, _: &StepRecord<'_>) -> Result<()> {
                Ok(())
            }
            fn checkpoints(&self) -> &[f64] {
                &self.0
            }
            fn on_checkpoint(&mut self, _: usize, t: f64, _: &[f64]) -> Result<()> {
                self.1.push(t);
                Ok(())
            }
            fn horizon(&self) -> Option<f64> {
                Some(0.0105)
            }
        }
        let cs = CoefficientSet::laplacian(Domain::interval(-10.0, 10.0).unwrap());
        let st = Stepper::new(&cs, &PathConfig::new(1e-3, 1), Dynamics::Plain).unwrap();
        let mut v = Cp(vec![0.0, 0.0025, 0.01], Vec::new());
        let out = st.run(&[0.0], &mut NoiseStream::new(1, 0, 1), &mut v).unwrap();
        assert_eq!(v.1, vec![0.0, 0.0025, 0.01]);
        assert_eq!(out.end, PathEnd::Horizon);
        assert_eq!(out.t, 0.0105);
    }

    #[test]
    fn truncation_flagged() {
        let cs = CoefficientSet::laplacian(Domain::interval(0.0, 1.0).unwrap());
        let mut pc = PathConfig::new(1e-3, 3);
        pc.t_max = Some(0.002);
        let p = simulate_path(&cs, &pc, &[0.5]).unwrap();
        assert!(p.truncated && !p.exited && p.tau.is_none());
    }

    #[test]
    fn trace_has_header() {
        let cs = CoefficientSet::laplacian(Domain::interval(0.0, 1.0).unwrap());
        let p = simulate_path(&cs, &PathConfig::new(1e-2, 3), &[0.5]).unwrap();
        let mut buf = Vec::new();
        write_trace(&p, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,x1,dM1\n"));
        assert_eq!(s.lines().count(), p.states.len() + 1);
    }
}

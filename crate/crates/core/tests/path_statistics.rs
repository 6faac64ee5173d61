//! Distributional checks on simulated paths against closed forms.

use fkdirichlet::pathsim::{simulate_path, PathConfig};
use fkdirichlet::stats::RunningStats;
use fkdirichlet::{CoefficientSet, Domain};

fn paths(cs: &CoefficientSet, h: f64, x0: &[f64], n: usize) -> Vec<fkdirichlet::pathsim::DiffusionPath> {
    let pc = PathConfig::new(h, 77);
    (0..n as u64).map(|i| simulate_path(cs, &pc.with_substream(i), x0).unwrap()).collect()
}

#[test]
fn exit_time_of_interval_matches_x_one_minus_x() {
    let cs = CoefficientSet::laplacian(Domain::interval(0.0, 1.0).unwrap());
    let ps = paths(&cs, 1e-4, &[0.3], 3000);
    let taus: Vec<f64> = ps.iter().map(|p| p.tau.unwrap()).collect();
    let s = RunningStats::from_slice(&taus);
    // E τ = x(1 − x) for ½ d²/dx²
    assert!((s.mean() - 0.21).abs() < 3.0 * s.stderr() + 0.005, "{} ± {}", s.mean(), s.stderr());
    let right: Vec<f64> = ps.iter().map(|p| if p.final_state()[0] > 0.5 { 1.0 } else { 0.0 }).collect();
    let r = RunningStats::from_slice(&right);
    assert!((r.mean() - 0.3).abs() < 3.0 * r.stderr() + 0.01);
}

#[test]
fn martingale_increments_have_the_symmetric_covariance() {
    let cs = CoefficientSet::builder(Domain::unit_cube(2))
        .matrix(&[&["2", "0.8"], &["-0.2", "1"]])
        .unwrap()
        .build()
        .unwrap();
    let h = 1e-4;
    let ps = paths(&cs, h, &[0.5, 0.5], 200);
    let mut s = [0.0f64; 3];
    let mut n = 0.0;
    for p in &ps {
        for dm in &p.dm[..p.len() - 1] {
            s[0] += dm[0] * dm[0];
            s[1] += dm[0] * dm[1];
            s[2] += dm[1] * dm[1];
            n += h;
        }
    }
    // symmetric part [[2, 0.3], [0.3, 1]]
    for (got, want) in s.iter().map(|v| v / n).zip([2.0, 0.3, 1.0]) {
        assert!((got - want).abs() < 0.03, "{got} vs {want}");
    }
}

#[test]
fn stopped_states_sit_on_the_boundary() {
    let dom = Domain::ball(vec![0.0, 0.0, 0.0], 1.0).unwrap();
    let cs = CoefficientSet::laplacian(dom.clone());
    for p in paths(&cs, 1e-3, &[0.2, 0.0, -0.1], 100) {
        assert!(p.exited);
        let r = p.final_state().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((r - 1.0).abs() < 1e-6, "{r}");
        assert!(p.states[..p.states.len() - 1].iter().all(|x| dom.contains(x)));
    }
}

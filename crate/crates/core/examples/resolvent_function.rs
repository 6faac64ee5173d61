//! ξ^H for ξ = sin on the circle, and the pathwise divergence identity on one path.

use fkdirichlet::functionals::divergence_resolvent;
use fkdirichlet::oracle::{solve_xi_h_bhat, solve_xi_h_periodic_1d};
use fkdirichlet::pathsim::{simulate_path, PathConfig};
use fkdirichlet::{CoefficientSet, Domain};

fn main() -> fkdirichlet::Result<()> {
    for n in [32, 64, 128, 256] {
        let (x, u) = solve_xi_h_periodic_1d(f64::sin, 1.0, n)?;
        let err = x.iter().zip(&u).map(|(x, u)| (u - 2.0 / 3.0 * x.cos()).abs()).fold(0.0, f64::max);
        println!("n = {n:<4} max |ξ^H − (2/3)cos| = {err:.3e}");
    }

    let cs = CoefficientSet::builder(Domain::unit_cube(2))
        .bhat(0, "(x1-0.5)*max(0, 1-16*((x1-0.5)^2+(x2-0.5)^2))^4")?
        .bhat(1, "0.5*(x2-0.5)*max(0, 1-16*((x1-0.5)^2+(x2-0.5)^2))^4")?
        .build()?;
    let xi = solve_xi_h_bhat(&cs, 1.0 / 64.0)?;
    let mut pc = PathConfig::new(1e-4, 5);
    pc.t_max = Some(0.5);
    let fd = pc.fd_step(cs.domain());
    let path = simulate_path(&cs, &pc, &[0.5, 0.5])?;
    let mut direct = 0.0;
    for k in 0..path.len() {
        direct -= cs.div_bhat(&path.states[k], fd)? * (path.times[k + 1] - path.times[k]);
    }
    let res = divergence_resolvent(&xi, &path, path.len())?;
    println!("−∫div b̂ ds: direct {direct:.6}, resolvent {res:.6}");
    Ok(())
}

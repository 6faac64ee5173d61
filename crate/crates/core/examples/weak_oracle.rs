//! Finite-difference weak solution of a non-symmetric problem under grid refinement.

use std::sync::Arc;

use fkdirichlet::coeffs::FnField;
use fkdirichlet::oracle::{solve_dirichlet_weak, Grid};
use fkdirichlet::{CoefficientSet, Domain};

fn main() -> fkdirichlet::Result<()> {
    let dom = Domain::unit_cube(2);
    let cs = CoefficientSet::builder(dom.clone())
        .matrix(&[&["1", "0.3"], &["-0.3", "1"]])?
        .b(0, "0.5*sin(pi*x2)")?
        .b(1, "0.3*cos(pi*x1)")?
        .bhat(0, "0.25*x1^2")?
        .bhat(1, "-0.2*x2")?
        .c("0.5*x1*x2")?
        .build()?;
    let f = FnField(|x: &[f64]| 1.0 + 0.5 * x[0] + 0.25 * x[1] * x[1]);
    let probe = [0.3, 0.6];
    let mut prev: Option<f64> = None;
    for n in [16, 32, 64, 128] {
        let grid = Arc::new(Grid::for_domain(&dom, 1.0 / n as f64)?);
        let sol = solve_dirichlet_weak(&cs, &grid, &f)?;
        let u = sol.value(&probe)?;
        let change = prev.map(|p| format!("{:.2e}", (u - p).abs())).unwrap_or_default();
        println!("δ = 1/{n:<4} u{probe:?} = {u:.7}  change {change:>9}  residual {:.1e}", sol.residual);
        prev = Some(u);
    }
    Ok(())
}

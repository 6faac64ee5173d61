//! ⟨f, P_t g⟩ from the matrix exponential of the grid generator.

use std::f64::consts::PI;
use std::sync::Arc;

use fkdirichlet::coeffs::FnField;
use fkdirichlet::oracle::{Grid, SemigroupOracle};
use fkdirichlet::{CoefficientSet, Domain};

fn main() -> fkdirichlet::Result<()> {
    let dom = Domain::unit_cube(1);
    let grid = Arc::new(Grid::for_domain(&dom, 1.0 / 200.0)?);
    let sin = FnField(|x: &[f64]| (PI * x[0]).sin());
    let lap = SemigroupOracle::new(&CoefficientSet::laplacian(dom.clone()), &grid)?;
    let full = CoefficientSet::builder(dom)
        .b(0, "0.5*cos(pi*x1)")?
        .bhat(0, "0.3*x1")?
        .c("-0.5+0.4*x1")?
        .build()?;
    let full = SemigroupOracle::new(&full, &grid)?;
    println!("{:>5} {:>12} {:>12} {:>12}", "t", "laplacian", "½e^(−π²t/2)", "full");
    for t in [0.01, 0.05, 0.1, 0.2, 0.5, 1.0] {
        let exact = 0.5 * (-PI * PI * t / 2.0).exp();
        println!("{t:>5} {:>12.7} {exact:>12.7} {:>12.7}", lap.pairing(&sin, &sin, t)?, full.pairing(&sin, &sin, t)?);
    }
    Ok(())
}

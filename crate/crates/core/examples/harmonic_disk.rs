//! Exit-point estimate of the harmonic function x1 on the unit disk.

use fkdirichlet::coeffs::FnField;
use fkdirichlet::driver::Estimator;
use fkdirichlet::functionals::DivergenceMode;
use fkdirichlet::pathsim::PathConfig;
use fkdirichlet::{CoefficientSet, Domain};

fn main() -> fkdirichlet::Result<()> {
    let cs = CoefficientSet::laplacian(Domain::ball(vec![0.0, 0.0], 1.0)?);
    let f = fkdirichlet::parse_field_expr("x1")?;
    let est = Estimator {
        cs: &cs,
        f: &f,
        pc: PathConfig::new(1e-3, 7),
        mode: DivergenceMode::Direct,
        xi: None,
        n_paths: 20_000,
    };
    let exact = FnField(|x: &[f64]| x[0]);
    println!("{:>6} {:>6} {:>10} {:>9} {:>8}", "x1", "x2", "mc", "stderr", "exact");
    for (p, x) in [[0.0, 0.0], [0.5, 0.0], [0.3, -0.6], [-0.8, 0.1]].iter().enumerate() {
        let r = est.estimate(p, x, 0)?;
        println!("{:>6} {:>6} {:>10.5} {:>9.5} {:>8.3}", x[0], x[1], r.mean, r.stderr, exact.0(x));
    }
    Ok(())
}

//! u'' /2 − u = 0 on (0,1) with u = 1 at both ends, against cosh.

use fkdirichlet::driver::Estimator;
use fkdirichlet::functionals::DivergenceMode;
use fkdirichlet::pathsim::PathConfig;
use fkdirichlet::{CoefficientSet, Domain};

fn main() -> fkdirichlet::Result<()> {
    let cs = CoefficientSet::builder(Domain::interval(0.0, 1.0)?).c("-1")?.build()?;
    let one = fkdirichlet::FieldExpr::constant(1.0);
    let k = 2f64.sqrt();
    for h in [1e-2, 1e-3, 1e-4] {
        let est = Estimator {
            cs: &cs,
            f: &one,
            pc: PathConfig::new(h, 3),
            mode: DivergenceMode::Direct,
            xi: None,
            n_paths: 10_000,
        };
        for x in [0.25, 0.5] {
            let r = est.estimate(0, &[x], 0)?;
            let exact = (k * (x - 0.5)).cosh() / (k * 0.5).cosh();
            println!("h = {h:<7} x = {x:<5} mc = {:.5} ± {:.5}  exact = {exact:.5}", r.mean, r.stderr);
        }
    }
    Ok(())
}

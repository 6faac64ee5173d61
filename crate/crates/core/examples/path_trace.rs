//! Dump one stopped path as CSV (time, state, martingale increment).

use fkdirichlet::pathsim::{simulate_path, write_trace, PathConfig};
use fkdirichlet::{CoefficientSet, Domain};

fn main() -> fkdirichlet::Result<()> {
    let cs = CoefficientSet::builder(Domain::unit_cube(2))
        .matrix(&[&["1+0.5*x1", "0.3"], &["-0.3", "1"]])?
        .build()?;
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let path = simulate_path(&cs, &PathConfig::new(1e-3, seed), &[0.5, 0.5])?;
    eprintln!("{} steps, exit at t = {:.4}", path.len(), path.times.last().unwrap());
    write_trace(&path, std::io::stdout().lock()).map_err(fkdirichlet::Error::io("stdout"))
}

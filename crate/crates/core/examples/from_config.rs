//! Run a config file through the Monte Carlo estimator and print a CSV report.
//!
//! cargo run --release --example from_config -- crates/core/configs/harmonic_disk.cfg 20000

use fkdirichlet::driver::report::Estimates;
use fkdirichlet::driver::{render, run_mc_estimate, ReportFormat, RunConfig};

fn main() -> fkdirichlet::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "crates/core/configs/harmonic_disk.cfg".into());
    let mut rc = RunConfig::from_file(path.as_ref())?;
    if let Some(n) = args.next() {
        rc = rc.with_overrides(&[("paths", n)])?;
    }
    let res = run_mc_estimate(&rc)?;
    print!("{}", render(&Estimates(&res), ReportFormat::Csv)?);
    Ok(())
}

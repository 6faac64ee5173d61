use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fkdirichlet::driver::report::{fmt_f64, sidecar, Estimates, Martingale, Table};
use fkdirichlet::driver::{self, RunConfig, Tabular};
use fkdirichlet::oracle::export::{write_binary, write_csv};
use fkdirichlet::{Error, Result};

#[derive(Parser)]
#[command(name = "fkdirichlet", version, about = "Monte Carlo Feynman-Kac solver for divergence-form Dirichlet problems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[arg(long, global = true)]
    step: Option<f64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["csv", "json", "text"])]
    format: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Monte Carlo estimates at the probes (or on a lattice with field.lattice).
    Solve,
    /// Finite-difference weak solution.
    Oracle,
    /// Monte Carlo against the finite-difference solution.
    Compare,
    /// Kernel constants, thresholds, Kato constants and occupation estimates.
    Bounds,
    /// Semigroup pairing: Monte Carlo against the matrix exponential.
    Semigroup,
    /// Pathwise divergence identity under (h, δ) refinement.
    #[command(name = "verify-lemma22")]
    VerifyLemma22,
    /// Martingale flatness of u(X) Z along paths.
    Martingale,
}

impl Cmd {
    fn stem(self) -> &'static str {
        match self {
            Cmd::Solve => "solve",
            Cmd::Oracle => "oracle",
            Cmd::Compare => "compare",
            Cmd::Bounds => "bounds",
            Cmd::Semigroup => "semigroup",
            Cmd::VerifyLemma22 => "verify-lemma22",
            Cmd::Martingale => "martingale",
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let rc = RunConfig::from_file(path)?;
    let mut ov: Vec<(&str, String)> = Vec::new();
    if let Some(s) = cli.seed {
        ov.push(("seed", s.to_string()));
    }
    if let Some(n) = cli.paths {
        ov.push(("paths", n.to_string()));
    }
    if let Some(h) = cli.step {
        ov.push(("step", h.to_string()));
    }
    if let Some(f) = &cli.format {
        ov.push(("format", f.clone()));
    }
    if let Some(o) = &cli.out {
        ov.push(("out", o.display().to_string()));
    }
    if ov.is_empty() {
        Ok(rc)
    } else {
        rc.with_overrides(&ov)
    }
}

fn emit<T: Tabular>(rc: &RunConfig, cmd: Cmd, report: &T) -> Result<()> {
    match &rc.out_dir {
        Some(dir) => {
            let p = driver::emit_report(report, rc.format, dir, cmd.stem())?;
            sidecar(dir, cmd.stem(), &format!("config_hash {:016x}", rc.hash()))?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{}", driver::render(report, rc.format)?),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<i32> {
    let rc = load(cli)?;
    let cmd = cli.cmd;
    match cmd {
        Cmd::Solve => {
            let res = match rc.field_lattice {
                Some(n) => driver::run_field_estimate(&rc, n)?,
                None => driver::run_mc_estimate(&rc)?,
            };
            emit(&rc, cmd, &Estimates(&res))?;
            if res.iter().any(|r| r.unreliable) {
                eprintln!("some estimates are flagged unreliable (too many excluded paths)");
                return Ok(3);
            }
        }
        Cmd::Oracle => {
            let sol = driver::oracle_solution(&rc)?;
            let d = rc.coeffs.dim();
            let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
            header.push("u".into());
            let rows = rc
                .probes
                .iter()
                .map(|x| {
                    let mut r: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
                    r.push(fmt_f64(sol.value(x)?));
                    Ok(r)
                })
                .collect::<Result<_>>()?;
            emit(&rc, cmd, &Table { kind: "oracle", header, rows })?;
            if let Some(dir) = &rc.out_dir {
                let csv = dir.join("oracle_grid.csv");
                let f = File::create(&csv).map_err(Error::io(&csv))?;
                write_csv(&sol.u, BufWriter::new(f)).map_err(Error::io(&csv))?;
                let bin = dir.join("oracle_grid.bin");
                let f = File::create(&bin).map_err(Error::io(&bin))?;
                write_binary(&sol.u, BufWriter::new(f)).map_err(Error::io(&bin))?;
                sidecar(dir, cmd.stem(), &format!("relative residual {:e}", sol.residual))?;
            }
        }
        Cmd::Compare => emit(&rc, cmd, &driver::compare_to_oracle(&rc, 1.0)?)?,
        Cmd::Bounds => emit(&rc, cmd, &driver::run_bounds(&rc)?)?,
        Cmd::Semigroup => {
            let s = &rc.semigroup;
            emit(&rc, cmd, &driver::run_semigroup_check(&rc, &s.f, &s.g, &s.times)?)?
        }
        Cmd::VerifyLemma22 => emit(&rc, cmd, &driver::verify_lemma22(&rc)?)?,
        Cmd::Martingale => {
            let u = driver::oracle_solution(&rc)?;
            emit(&rc, cmd, &Martingale(&driver::martingale_check(&rc, &u, &rc.martingale_times)?))?
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Report rendering. Payloads carry no timestamps; those go to a sidecar
//! `.log` file next to the report.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::driver::checks::{BoundsReport, CompareReport, Lemma22Report, MartingaleReport, SemigroupReport};
use crate::driver::estimate::EstimateResult;
use crate::driver::ReportFormat;
use crate::error::{invalid, Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Full-precision float (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A report that can be laid out as a table.
pub trait Tabular: Serialize {
    /// Short name used for the JSON `kind` field and file stems.
    fn kind(&self) -> &'static str;
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<String>>;
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn coord_header(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

#[derive(Serialize)]
pub struct Estimates<'a>(pub &'a [EstimateResult]);

impl Tabular for Estimates<'_> {
    fn kind(&self) -> &'static str {
        "estimates"
    }

    fn header(&self) -> Vec<String> {
        let d = self.0.first().map_or(0, |r| r.point.len());
        let mut h = coord_header("x", d);
        for s in ["mean", "stderr", "n_effective", "excluded", "config_hash", "weight_mean", "weight_stderr", "unreliable"] {
            h.push(s.into());
        }
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.0
            .iter()
            .map(|r| {
                let mut row: Vec<String> = r.point.iter().map(|v| fmt_f64(*v)).collect();
                row.extend([
                    fmt_f64(r.mean),
                    fmt_f64(r.stderr),
                    r.n_effective.to_string(),
                    r.excluded.to_string(),
                    format!("{:016x}", r.config_hash),
                    fmt_f64(r.weight_mean),
                    fmt_f64(r.weight_stderr),
                    r.unreliable.to_string(),
                ]);
                row
            })
            .collect()
    }
}

impl Tabular for CompareReport {
    fn kind(&self) -> &'static str {
        "compare"
    }

    fn header(&self) -> Vec<String> {
        let d = self.rows.first().map_or(0, |r| r.point.len());
        let mut h = coord_header("x", d);
        for s in [
            "mc",
            "mc_stderr",
            "mc_resolvent",
            "mc_resolvent_stderr",
            "route_diff_stderr",
            "oracle",
            "abs_err",
            "rel_err",
            "budget",
            "within_budget",
        ] {
            h.push(s.into());
        }
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row: Vec<String> = r.point.iter().map(|v| fmt_f64(*v)).collect();
                row.extend([
                    fmt_f64(r.mc),
                    fmt_f64(r.mc_stderr),
                    opt(r.mc_resolvent),
                    opt(r.mc_resolvent_stderr),
                    opt(r.route_diff_stderr),
                    fmt_f64(r.oracle),
                    fmt_f64(r.abs_err),
                    fmt_f64(r.rel_err),
                    fmt_f64(r.budget),
                    r.within_budget.to_string(),
                ]);
                row
            })
            .collect()
    }
}

#[derive(Serialize)]
pub struct Martingale<'a>(pub &'a [MartingaleReport]);

impl Tabular for Martingale<'_> {
    fn kind(&self) -> &'static str {
        "martingale"
    }

    fn header(&self) -> Vec<String> {
        let d = self.0.first().map_or(0, |r| r.point.len());
        let mut h = coord_header("x", d);
        for s in ["u0", "t", "mean", "stderr", "deviation", "deviation_se"] {
            h.push(s.into());
        }
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for m in self.0 {
            for r in &m.rows {
                let mut row: Vec<String> = m.point.iter().map(|v| fmt_f64(*v)).collect();
                row.extend([
                    fmt_f64(m.u0),
                    fmt_f64(r.t),
                    fmt_f64(r.mean),
                    fmt_f64(r.stderr),
                    fmt_f64(r.deviation),
                    fmt_f64(r.deviation_se),
                ]);
                out.push(row);
            }
        }
        out
    }
}

impl Tabular for SemigroupReport {
    fn kind(&self) -> &'static str {
        "semigroup"
    }

    fn header(&self) -> Vec<String> {
        ["t", "mc", "mc_stderr", "oracle", "rel_err", "survival", "sup_moment", "sup_moment_stderr"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .zip(&self.moment_curve)
            .map(|(r, m)| {
                vec![
                    fmt_f64(r.t),
                    fmt_f64(r.mc),
                    fmt_f64(r.mc_stderr),
                    fmt_f64(r.oracle),
                    fmt_f64(r.rel_err),
                    fmt_f64(r.survival),
                    fmt_f64(m.sup_moment),
                    fmt_f64(m.stderr),
                ]
            })
            .collect()
    }
}

impl Tabular for Lemma22Report {
    fn kind(&self) -> &'static str {
        "lemma22"
    }

    fn header(&self) -> Vec<String> {
        ["step", "delta", "rms", "mean_abs", "xi_residual", "ratio_to_next"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.levels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                vec![
                    fmt_f64(l.step),
                    fmt_f64(l.delta),
                    fmt_f64(l.rms),
                    fmt_f64(l.mean_abs),
                    fmt_f64(l.xi_residual),
                    opt(self.ratios.get(i).copied()),
                ]
            })
            .collect()
    }
}

impl Tabular for BoundsReport {
    fn kind(&self) -> &'static str {
        "bounds"
    }

    fn header(&self) -> Vec<String> {
        vec!["quantity".into(), "value".into()]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let kc = &self.kernel;
        let mut r = vec![
            vec!["sigma1".into(), fmt_f64(kc.sigma1)],
            vec!["sigma2".into(), fmt_f64(kc.sigma2)],
            vec!["sigma3".into(), fmt_f64(kc.sigma3)],
            vec!["theta".into(), fmt_f64(kc.theta)],
            vec!["varsigma".into(), fmt_f64(kc.varsigma)],
            vec!["g_norm".into(), fmt_f64(self.g_norm)],
            vec!["khasminskii".into(), opt(self.khasminskii)],
            vec!["khasminskii_with_area".into(), opt(self.khasminskii_with_area)],
            vec!["g_dominance_gap".into(), fmt_f64(self.g_dominance_gap)],
        ];
        if let Some(ec) = &self.exponents {
            for (k, v) in [("p1", ec.p1), ("alpha", ec.alpha), ("p2", ec.p2), ("beta", ec.beta)] {
                r.push(vec![k.into(), fmt_f64(v)]);
            }
        }
        for k in &self.kato {
            r.push(vec![format!("kato[eps={}]", k.epsilon), fmt_f64(k.constant)]);
        }
        for (t, a, b) in &self.bound_per_unit_norm {
            r.push(vec![format!("div_bound[t={t}]"), fmt_f64(*a)]);
            r.push(vec![format!("pot_bound[t={t}]"), fmt_f64(*b)]);
        }
        if let Some(o) = &self.occupation {
            r.push(vec!["occupation_max".into(), fmt_f64(o.mean_occupation)]);
            r.push(vec!["occupation_max_stderr".into(), fmt_f64(o.mean_occupation_se)]);
            r.push(vec!["exp_moment_max".into(), fmt_f64(o.exp_moment)]);
            r.push(vec!["exp_moment_max_stderr".into(), fmt_f64(o.exp_moment_se)]);
        }
        r
    }
}

/// Generic table of already-formatted cells (bounds and similar summaries).
#[derive(Serialize)]
pub struct Table {
    pub kind: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Tabular for Table {
    fn kind(&self) -> &'static str {
        self.kind
    }

    fn header(&self) -> Vec<String> {
        self.header.clone()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows.clone()
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    data: &'a T,
}

pub fn render<T: Tabular>(report: &T, format: ReportFormat) -> Result<String> {
    let rows = report.rows();
    if rows.is_empty() {
        return Err(invalid("nothing to report"));
    }
    let header = report.header();
    Ok(match format {
        ReportFormat::Csv => {
            let mut s = header.join(",");
            s.push('\n');
            for r in &rows {
                s.push_str(&r.join(","));
                s.push('\n');
            }
            s
        }
        ReportFormat::Json => {
            let env = Envelope {
                schema_version: SCHEMA_VERSION,
                kind: report.kind(),
                data: report,
            };
            let mut s = serde_json::to_string_pretty(&env).map_err(|e| Error::Numerical(format!("JSON encoding failed: {e}")))?;
            s.push('\n');
            s
        }
        ReportFormat::Text => {
            let widths: Vec<usize> = (0..header.len())
                .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
                .collect();
            let mut s = String::new();
            let line = |s: &mut String, cells: &[String]| {
                let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
                let _ = writeln!(s, "{}", parts.join("  ").trim_end());
            };
            line(&mut s, &header);
            for r in &rows {
                line(&mut s, r);
            }
            s
        }
    })
}

/// Writes `<dir>/<stem>.<ext>` and appends a timestamped line to `<dir>/<stem>.log`.
pub fn emit_report<T: Tabular>(report: &T, format: ReportFormat, dir: &Path, stem: &str) -> Result<PathBuf> {
    let body = render(report, format)?;
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    fs::write(&path, body).map_err(Error::io(&path))?;
    sidecar(dir, stem, &format!("wrote {} ({} rows)", path.display(), report.rows().len()))?;
    Ok(path)
}

pub fn sidecar(dir: &Path, stem: &str, msg: &str) -> Result<()> {
    let path = dir.join(format!("{stem}.log"));
    let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let mut f = fs::OpenOptions::new().create(true).append(true).open(&path).map_err(Error::io(&path))?;
    writeln!(f, "{ts:.3} {msg}").map_err(Error::io(&path))
}

/// Parses CSV written by [`render`] for [`Estimates`].
pub fn read_estimates_csv(text: &str) -> Result<Vec<EstimateResult>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?.split(',').collect();
    let d = header.iter().take_while(|h| h.starts_with('x')).count();
    if header.len() != d + 8 {
        return Err(Error::Config(format!("unexpected estimate header {header:?}")));
    }
    let bad = |what: &str, v: &str| Error::Config(format!("bad {what} `{v}` in estimate CSV"));
    let f = |v: &str| v.parse::<f64>().map_err(|_| bad("number", v));
    let u = |v: &str| v.parse::<u64>().map_err(|_| bad("count", v));
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            if c.len() != header.len() {
                return Err(Error::Config(format!("row has {} fields, expected {}", c.len(), header.len())));
            }
            Ok(EstimateResult {
                point: c[..d].iter().map(|v| f(v)).collect::<Result<_>>()?,
                mean: f(c[d])?,
                stderr: f(c[d + 1])?,
                n_effective: u(c[d + 2])?,
                excluded: u(c[d + 3])?,
                config_hash: u64::from_str_radix(c[d + 4], 16).map_err(|_| bad("hash", c[d + 4]))?,
                weight_mean: f(c[d + 5])?,
                weight_stderr: f(c[d + 6])?,
                unreliable: c[d + 7].parse().map_err(|_| bad("flag", c[d + 7]))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<EstimateResult> {
        vec![EstimateResult {
            point: vec![0.1, 1.0 / 3.0],
            mean: std::f64::consts::PI / 7.0,
            stderr: 1.234_567_890_123_456_7e-5,
            n_effective: 99_000,
            excluded: 12,
            config_hash: 0xdead_beef_0123_4567,
            weight_mean: 0.9,
            weight_stderr: 1e-3,
            unreliable: false,
        }]
    }

    #[test]
    fn csv_round_trips_exactly() {
        let r = sample();
        let text = render(&Estimates(&r), ReportFormat::Csv).unwrap();
        assert!(text.starts_with("x1,x2,mean,stderr,n_effective,excluded,config_hash"));
        assert_eq!(read_estimates_csv(&text).unwrap(), r);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(render(&Estimates(&[]), ReportFormat::Json).is_err());
    }

    #[test]
    fn emission_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample();
        for fmt in [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Text] {
            let a = fs::read(emit_report(&Estimates(&r), fmt, dir.path(), "a").unwrap()).unwrap();
            let b = fs::read(emit_report(&Estimates(&r), fmt, dir.path(), "b").unwrap()).unwrap();
            assert_eq!(a, b);
        }
        let json = fs::read_to_string(dir.path().join("a.json")).unwrap();
        assert!(json.contains("\"schema_version\": 1"));
        assert!(fs::read_to_string(dir.path().join("a.log")).unwrap().lines().count() == 3);
    }
}

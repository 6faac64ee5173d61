//! Flat `key=value` run configuration with dotted keys.
//!
//! ```text
//! # comment
//! domain.kind = box
//! domain.lower = 0,0
//! domain.upper = 1,1
//! A.11 = "1"
//! A.12 = "0.3"
//! b.1 = "sin(pi*x2)"
//! f = "x1"
//! probes = 0.5,0.5; 0.25,0.75
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::bounds::KernelConstants;
use crate::coeffs::{parse_field_expr, CoefficientSet, FieldExpr, MollifierParams};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::functionals::DivergenceMode;
use crate::pathsim::{BoundaryRefinement, PathConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Text,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            other => Err(Error::Config(format!("unknown format `{other}` (csv, json, text)"))),
        }
    }
}

impl ReportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Text => "txt",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SemigroupParams {
    pub f: FieldExpr,
    pub g: FieldExpr,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BoundsParams {
    pub p1: f64,
    pub p2: f64,
    pub epsilons: Vec<f64>,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Lemma22Params {
    /// Step sizes, coarsest first; each must be an integer multiple of the next.
    pub steps: Vec<f64>,
    /// Grid spacings for ξ^H, one per step.
    pub deltas: Vec<f64>,
    pub n_paths: usize,
    /// Simulated time per path.
    pub horizon: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub coeffs: CoefficientSet,
    pub boundary: FieldExpr,
    pub path: PathConfig,
    pub probes: Vec<Vec<f64>>,
    pub n_paths: usize,
    pub divergence: DivergenceMode,
    pub grid_delta: f64,
    pub xi_delta: f64,
    pub kernel: KernelConstants,
    pub out_dir: Option<PathBuf>,
    pub format: ReportFormat,
    pub semigroup: SemigroupParams,
    pub martingale_times: Vec<f64>,
    pub bounds: BoundsParams,
    pub lemma22: Lemma22Params,
    /// Points per axis for the lattice (field) mode.
    pub field_lattice: Option<usize>,
    entries: BTreeMap<String, String>,
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| cfg(format!("`{key}`: `{v}` is not a number")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_f64(key, s)).collect()
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    let x = parse_f64(key, v)?;
    if x < 0.0 || x.fract() != 0.0 || x > 1e15 {
        return Err(cfg(format!("`{key}`: `{v}` is not a non-negative integer")));
    }
    Ok(x as usize)
}

fn parse_points(key: &str, v: &str) -> Result<Vec<Vec<f64>>> {
    v.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_list(key, s))
        .collect()
}

fn expr(key: &str, v: &str) -> Result<FieldExpr> {
    parse_field_expr(v).map_err(|e| cfg(format!("`{key}`: {e}")))
}

/// Parse `key = value` lines; quotes around values are stripped and `#`
/// outside quotes starts a comment.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let mut quoted = false;
        let end = raw
            .char_indices()
            .find(|&(_, ch)| {
                if ch == '"' {
                    quoted = !quoted;
                }
                ch == '#' && !quoted
            })
            .map_or(raw.len(), |(i, _)| i);
        let line = raw[..end].trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| cfg(format!("line {}: expected key=value, got `{line}`", n + 1)))?;
        let k = k.trim().to_string();
        let mut v = v.trim();
        if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
            v = &v[1..v.len() - 1];
        }
        if map.insert(k.clone(), v.to_string()).is_some() {
            return Err(cfg(format!("line {}: duplicate key `{k}`", n + 1)));
        }
    }
    Ok(map)
}

/// First 8 bytes of SHA-256 over the sorted `key=value` lines.
pub fn config_hash(entries: &BTreeMap<String, String>) -> u64 {
    let mut h = Sha256::new();
    for (k, v) in entries {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    let out = h.finalize();
    u64::from_be_bytes(out[..8].try_into().expect("digest has 32 bytes"))
}

fn parse_domain(m: &BTreeMap<String, String>) -> Result<Domain> {
    let kind = m.get("domain.kind").map(String::as_str).unwrap_or("box");
    let get = |k: &str| m.get(k).ok_or_else(|| cfg(format!("missing `{k}` for domain.kind = {kind}")));
    match kind {
        "interval" => Domain::interval(parse_f64("domain.lower", get("domain.lower")?)?, parse_f64("domain.upper", get("domain.upper")?)?),
        "box" | "hyperrectangle" | "rectangle" => {
            Domain::hyperrectangle(parse_list("domain.lower", get("domain.lower")?)?, parse_list("domain.upper", get("domain.upper")?)?)
        }
        "ball" => Domain::ball(parse_list("domain.center", get("domain.center")?)?, parse_f64("domain.radius", get("domain.radius")?)?),
        other => Err(cfg(format!("unknown domain.kind `{other}` (interval, box, ball)"))),
    }
}

const KNOWN: &[&str] = &[
    "domain.kind",
    "domain.lower",
    "domain.upper",
    "domain.center",
    "domain.radius",
    "c",
    "g",
    "p",
    "lambda",
    "mollifier.k",
    "mollifier.quad_pts",
    "f",
    "probes",
    "paths",
    "step",
    "seed",
    "t_max",
    "exit_tol",
    "fd_step",
    "refine.band",
    "refine.divisor",
    "divergence",
    "grid.delta",
    "xi.delta",
    "kernel.sigma1",
    "kernel.sigma2",
    "kernel.sigma3",
    "theta",
    "out",
    "format",
    "semigroup.f",
    "semigroup.g",
    "semigroup.t",
    "martingale.times",
    "bounds.p1",
    "bounds.p2",
    "bounds.epsilon",
    "bounds.t",
    "lemma22.steps",
    "lemma22.deltas",
    "lemma22.paths",
    "lemma22.horizon",
    "field.lattice",
];

fn component(key: &str, prefix: &str, d: usize, two: bool) -> Result<Option<(usize, usize)>> {
    let Some(rest) = key.strip_prefix(prefix) else { return Ok(None) };
    let digits: Vec<usize> = rest
        .chars()
        .map(|c| c.to_digit(10).map(|v| v as usize))
        .collect::<Option<_>>()
        .ok_or_else(|| cfg(format!("bad component index in `{key}`")))?;
    let ok = if two { digits.len() == 2 } else { digits.len() == 1 };
    if !ok || digits.iter().any(|&i| i == 0 || i > d) {
        return Err(cfg(format!("`{key}`: indices must be 1..={d}")));
    }
    Ok(Some((digits[0] - 1, if two { digits[1] - 1 } else { 0 })))
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::from_entries(parse_entries(text)?)
    }

    pub fn from_entries(m: BTreeMap<String, String>) -> Result<RunConfig> {
        let domain = parse_domain(&m)?;
        let d = domain.dim();
        let mut bld = CoefficientSet::builder(domain.clone());
        for (k, v) in &m {
            if let Some((i, j)) = component(k, "A.", d, true)? {
                bld = bld.set_a(i, j, expr(k, v)?);
            } else if let Some((i, _)) = component(k, "bhat.", d, false)? {
                bld = bld.set_bhat(i, expr(k, v)?);
            } else if let Some((i, _)) = component(k, "b.", d, false)? {
                bld = bld.set_b(i, expr(k, v)?);
            } else if !KNOWN.contains(&k.as_str()) {
                return Err(cfg(format!("unknown key `{k}`")));
            }
        }
        let get = |k: &str| m.get(k).map(String::as_str);
        if let Some(v) = get("c") {
            bld = bld.set_c(expr("c", v)?);
        }
        if let Some(v) = get("g") {
            bld = bld.set_g(expr("g", v)?);
        }
        if let Some(v) = get("p") {
            bld = bld.p(parse_f64("p", v)?);
        }
        if let Some(v) = get("lambda") {
            bld = bld.lambda(parse_f64("lambda", v)?);
        }
        if let Some(v) = get("mollifier.k") {
            let mut mp = MollifierParams::new(parse_usize("mollifier.k", v)? as u32);
            if let Some(q) = get("mollifier.quad_pts") {
                mp.quad_pts = parse_usize("mollifier.quad_pts", q)?;
            }
            bld = bld.mollifier(Some(mp));
        }
        let coeffs = bld.build().map_err(|e| match e {
            Error::Invalid(s) => Error::Config(s),
            other => other,
        })?;
        let boundary = match get("f") {
            Some(v) => expr("f", v)?,
            None => FieldExpr::constant(1.0),
        };
        let mut path = PathConfig::new(
            get("step").map(|v| parse_f64("step", v)).transpose()?.unwrap_or(1e-3),
            get("seed").map(|v| parse_usize("seed", v)).transpose()?.unwrap_or(1) as u64,
        );
        path.t_max = get("t_max").map(|v| parse_f64("t_max", v)).transpose()?;
        if let Some(v) = get("exit_tol") {
            path.exit_tol = parse_f64("exit_tol", v)?;
        }
        path.fd_step = get("fd_step").map(|v| parse_f64("fd_step", v)).transpose()?;
        if let Some(v) = get("refine.band") {
            path.refine = Some(BoundaryRefinement {
                band: parse_f64("refine.band", v)?,
                divisor: get("refine.divisor").map(|v| parse_usize("refine.divisor", v)).transpose()?.unwrap_or(4) as u32,
            });
        }
        let probes = match get("probes") {
            Some(v) => parse_points("probes", v)?,
            None => vec![domain.bbox().0.iter().zip(domain.bbox().1).map(|(a, b)| 0.5 * (a + b)).collect()],
        };
        let n_paths = get("paths").map(|v| parse_usize("paths", v)).transpose()?.unwrap_or(10_000);
        let divergence = get("divergence").map(DivergenceMode::from_str).transpose()?.unwrap_or(DivergenceMode::Direct);
        let grid_delta = get("grid.delta").map(|v| parse_f64("grid.delta", v)).transpose()?.unwrap_or(1.0 / 64.0);
        let xi_delta = get("xi.delta").map(|v| parse_f64("xi.delta", v)).transpose()?.unwrap_or(grid_delta);
        let varsigma = domain.diameter();
        let theta = get("theta").map(|v| parse_f64("theta", v)).transpose()?.unwrap_or(0.25);
        let mut kernel = KernelConstants::identity(d, theta, varsigma);
        if let Some(v) = get("kernel.sigma1") {
            kernel.sigma1 = parse_f64("kernel.sigma1", v)?;
        }
        if let Some(v) = get("kernel.sigma2") {
            kernel.sigma2 = parse_f64("kernel.sigma2", v)?;
        }
        if let Some(v) = get("kernel.sigma3") {
            kernel.sigma3 = parse_f64("kernel.sigma3", v)?;
        }
        let format = get("format").map(ReportFormat::from_str).transpose()?.unwrap_or(ReportFormat::Text);
        let semigroup = SemigroupParams {
            f: get("semigroup.f").map(|v| expr("semigroup.f", v)).transpose()?.unwrap_or(FieldExpr::constant(1.0)),
            g: get("semigroup.g").map(|v| expr("semigroup.g", v)).transpose()?.unwrap_or(FieldExpr::constant(1.0)),
            times: get("semigroup.t").map(|v| parse_list("semigroup.t", v)).transpose()?.unwrap_or(vec![0.1]),
        };
        let martingale_times = get("martingale.times")
            .map(|v| parse_list("martingale.times", v))
            .transpose()?
            .unwrap_or(vec![0.05, 0.1, 0.2, 0.4]);
        let bounds = BoundsParams {
            p1: get("bounds.p1").map(|v| parse_f64("bounds.p1", v)).transpose()?.unwrap_or(d as f64 + 1.0),
            p2: get("bounds.p2").map(|v| parse_f64("bounds.p2", v)).transpose()?.unwrap_or(d as f64 / 2.0 + 1.0),
            epsilons: get("bounds.epsilon").map(|v| parse_list("bounds.epsilon", v)).transpose()?.unwrap_or(vec![0.01, 0.1, 1.0]),
            times: get("bounds.t").map(|v| parse_list("bounds.t", v)).transpose()?.unwrap_or(vec![0.01, 0.1, 1.0]),
        };
        let lemma22 = Lemma22Params {
            steps: get("lemma22.steps").map(|v| parse_list("lemma22.steps", v)).transpose()?.unwrap_or(vec![4e-3, 2e-3, 1e-3]),
            deltas: get("lemma22.deltas")
                .map(|v| parse_list("lemma22.deltas", v))
                .transpose()?
                .unwrap_or(vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]),
            n_paths: get("lemma22.paths").map(|v| parse_usize("lemma22.paths", v)).transpose()?.unwrap_or(100),
            horizon: get("lemma22.horizon").map(|v| parse_f64("lemma22.horizon", v)).transpose()?.unwrap_or(0.5),
        };
        let field_lattice = get("field.lattice").map(|v| parse_usize("field.lattice", v)).transpose()?;
        let rc = RunConfig {
            coeffs,
            boundary,
            path,
            probes,
            n_paths,
            divergence,
            grid_delta,
            xi_delta,
            kernel,
            out_dir: get("out").map(PathBuf::from),
            format,
            semigroup,
            martingale_times,
            bounds,
            lemma22,
            field_lattice,
            entries: m,
        };
        rc.validate()?;
        Ok(rc)
    }

    pub fn validate(&self) -> Result<()> {
        let dom = self.coeffs.domain();
        let d = dom.dim();
        for p in &self.probes {
            if p.len() != d || !dom.contains(p) {
                return Err(cfg(format!("probe {p:?} is not a point of D")));
            }
        }
        if self.n_paths < 100 {
            return Err(cfg(format!("paths = {} must be at least 100", self.n_paths)));
        }
        if !(self.grid_delta > 0.0 && self.xi_delta > 0.0) {
            return Err(cfg("grid spacings must be positive"));
        }
        if self.lemma22.steps.len() != self.lemma22.deltas.len() || self.lemma22.steps.is_empty() {
            return Err(cfg("lemma22.steps and lemma22.deltas must have the same non-zero length"));
        }
        self.kernel.validate().map_err(|e| cfg(e.to_string()))?;
        self.path.validate(dom).map_err(|e| cfg(e.to_string()))?;
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn hash(&self) -> u64 {
        config_hash(&self.entries)
    }

    /// Re-parse with some keys replaced (command-line overrides).
    pub fn with_overrides(&self, overrides: &[(&str, String)]) -> Result<RunConfig> {
        let mut m = self.entries.clone();
        for (k, v) in overrides {
            m.insert((*k).to_string(), v.clone());
        }
        RunConfig::from_entries(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
# non-symmetric case
domain.kind = box
domain.lower = 0,0
domain.upper = 1,1
A.11 = "1"
A.12 = "0.3"
A.21 = "-0.3"
A.22 = "1"
b.1 = "0.5*sin(pi*x2)"
bhat.2 = "-0.2*x2"
c = "0.5*x1*x2"
f = "1 + 0.5*x1"
probes = 0.5,0.5; 0.25,0.75
paths = 1000
step = 1e-3
"#;

    #[test]
    fn parses_sample() {
        let rc = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(rc.coeffs.dim(), 2);
        assert_eq!(rc.probes, vec![vec![0.5, 0.5], vec![0.25, 0.75]]);
        assert_eq!(rc.coeffs.a_expr(0, 1).eval(&[0.0, 0.0]).unwrap(), 0.3);
        assert_eq!(rc.coeffs.a_expr(1, 0).eval(&[0.0, 0.0]).unwrap(), -0.3);
        assert_eq!(rc.coeffs.bhat_expr(1).eval(&[0.0, 2.0]).unwrap(), -0.4);
        assert_eq!(rc.n_paths, 1000);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::parse(SAMPLE).unwrap();
        let b = RunConfig::parse(&format!("{SAMPLE}\n# trailing comment\n")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = a.with_overrides(&[("seed", "9".into())]).unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(c.path.seed, 9);
    }

    #[test]
    fn trailing_comments_are_dropped() {
        let m = parse_entries("seed = 4   # four\nf = \"x1 + 1\" # quoted\n").unwrap();
        assert_eq!(m["seed"], "4");
        assert_eq!(m["f"], "x1 + 1");
    }

    #[test]
    fn errors_are_config_errors() {
        for bad in [
            "domain.kind = torus",
            "domain.kind = box\ndomain.lower = 0\ndomain.upper = 1\nA.12 = 1",
            "domain.kind = interval\ndomain.lower = 0\ndomain.upper = 1\nwat = 3",
            "domain.kind = interval\ndomain.lower = 0\ndomain.upper = 1\npaths = 10",
            "domain.kind = interval\ndomain.lower = 0\ndomain.upper = 1\nprobes = 2",
            "domain.kind = interval\ndomain.lower = 0\ndomain.upper = 1\nc = sin(",
            "no equals sign",
        ] {
            let e = RunConfig::parse(bad).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{bad}: {e}");
        }
    }
}

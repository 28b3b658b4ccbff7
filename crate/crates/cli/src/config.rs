//! Run configuration: a flat `block.key = value` text format.
//!
//! ```text
//! # 1D interval
//! kernel.s = 0.5
//! kernel.p = 2
//! grid.dim = 1
//! grid.a = -1
//! grid.b = 1
//! grid.N = 64
//! solve.seed = 7
//! ```
//!
//! Blank lines and everything after `#` are ignored. Every key may appear at
//! most once, and unknown keys are rejected. Real values accept fractions
//! such as `1/12`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use frac_eig_core::{
    build_grid_1d, build_grid_2d, AssemblyOptions, Grid, Kernel, Mask, Multiplier, Rect, SolveMode,
    SolveOptions,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Environment variable that overrides `solve.seed`.
pub const SEED_ENV: &str = "FRAC_EIG_SEED";

const KEYS: &[&str] = &[
    "kernel.s",
    "kernel.p",
    "kernel.multiplier",
    "kernel.lam_lo",
    "kernel.lam_hi",
    "grid.dim",
    "grid.a",
    "grid.b",
    "grid.N",
    "grid.box",
    "grid.h",
    "grid.mask",
    "assembly.near_field_radius",
    "assembly.tail_refine",
    "solve.tol",
    "solve.max_iters",
    "solve.seed",
    "solve.mode",
    "solve.enforce_sign",
    "output.dir",
    "output.formats",
    "output.dump_eigenfunction",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError { line: Some(line), message: message.into() }
    }

    fn new(message: impl Into<String>) -> Self {
        ConfigError { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelConfig {
    pub s: f64,
    pub p: f64,
    pub multiplier: String,
    pub lam_lo: f64,
    pub lam_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "geometry", rename_all = "lowercase")]
pub enum GridConfig {
    Interval { a: f64, b: f64, cells: usize },
    Box { lo: [f64; 2], hi: [f64; 2], h: f64, mask: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub mode: SolveMode,
    pub enforce_sign: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
    pub dump_eigenfunction: bool,
}

impl OutputConfig {
    pub fn json(&self) -> bool {
        self.formats.contains(&Format::Json)
    }

    pub fn csv(&self) -> bool {
        self.formats.contains(&Format::Csv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    pub assembly: AssemblyOptions,
    pub solve: SolveConfig,
    pub output: OutputConfig,
}

/// The part of a config that determines numerical results. Output
/// location and formats are excluded so reruns elsewhere hash the same.
#[derive(Serialize)]
struct Hashed<'a> {
    kernel: &'a KernelConfig,
    grid: &'a GridConfig,
    assembly: &'a AssemblyOptions,
    solve: &'a SolveConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kernel: KernelConfig { s: 0.5, p: 2.0, multiplier: "one".into(), lam_lo: 1.0, lam_hi: 1.0 },
            grid: GridConfig::Interval { a: -1.0, b: 1.0, cells: 64 },
            assembly: AssemblyOptions::default(),
            solve: SolveConfig { tol: 1e-10, max_iters: 50_000, seed: 0, mode: SolveMode::First, enforce_sign: true },
            output: OutputConfig {
                dir: PathBuf::from("frac-eig-out"),
                formats: vec![Format::Json, Format::Csv],
                dump_eigenfunction: false,
            },
        }
    }
}

fn parse_real(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
            let d: f64 = d.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
            n / d
        }
        None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_int<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("`{s}` is not a nonnegative integer"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{s}` is not true or false")),
    }
}

/// `x0,x1,y0,y1` (commas or whitespace).
fn parse_box(s: &str) -> Result<([f64; 2], [f64; 2]), String> {
    let parts: Vec<&str> = s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).collect();
    if parts.len() != 4 {
        return Err(format!("`{s}` is not `x0,x1,y0,y1`"));
    }
    let v = parts.iter().map(|t| parse_real(t)).collect::<Result<Vec<_>, _>>()?;
    if !(v[0] < v[1] && v[2] < v[3]) {
        return Err(format!("box `{s}` is empty"));
    }
    Ok(([v[0], v[2]], [v[1], v[3]]))
}

/// Comma-separated list of reals, as used by `sweep --s/--p`.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(parse_real).collect()
}

struct Entries {
    items: Vec<(usize, String, String)>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        let pos = self.items.iter().position(|(_, k, _)| k == key)?;
        let (line, _, v) = self.items.remove(pos);
        Some((line, v))
    }

    fn get<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            Some((line, v)) => parse(&v).map(Some).map_err(|e| ConfigError::at(line, format!("{key}: {e}"))),
            None => Ok(None),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_with_seed(text, None)
    }

    /// Parses `text`; a `seed_override` replaces `solve.seed`.
    pub fn parse_with_seed(text: &str, seed_override: Option<&str>) -> Result<Self, ConfigError> {
        let mut items: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `block.key = value`, got `{content}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError::at(line, format!("unknown key `{k}`")));
            }
            if let Some((first, ..)) = items.iter().find(|(_, key, _)| key == k) {
                return Err(ConfigError::at(line, format!("duplicate key `{k}` (first set on line {first})")));
            }
            if v.is_empty() {
                return Err(ConfigError::at(line, format!("missing value for `{k}`")));
            }
            items.push((line, k.to_string(), v.to_string()));
        }
        let mut e = Entries { items };
        let d = RunConfig::default();

        let multiplier = e.get("kernel.multiplier", |v| Ok(v.to_string()))?.unwrap_or(d.kernel.multiplier);
        let (lo_default, hi_default) = match multiplier.as_str() {
            "one" => (1.0, 1.0),
            "sin_bump" => (0.5, 1.5),
            other => return Err(ConfigError::new(format!("kernel.multiplier: unknown builtin `{other}`"))),
        };
        let kernel = KernelConfig {
            s: e.get("kernel.s", parse_real)?.unwrap_or(d.kernel.s),
            p: e.get("kernel.p", parse_real)?.unwrap_or(d.kernel.p),
            multiplier,
            lam_lo: e.get("kernel.lam_lo", parse_real)?.unwrap_or(lo_default),
            lam_hi: e.get("kernel.lam_hi", parse_real)?.unwrap_or(hi_default),
        };

        let dim: usize = e.get("grid.dim", parse_int)?.unwrap_or(1);
        let grid = match dim {
            1 => {
                for key in ["grid.box", "grid.mask"] {
                    if let Some((line, _)) = e.take(key) {
                        return Err(ConfigError::at(line, format!("`{key}` requires grid.dim = 2")));
                    }
                }
                let a = e.get("grid.a", parse_real)?.unwrap_or(-1.0);
                let b = e.get("grid.b", parse_real)?.unwrap_or(1.0);
                if !(a < b) {
                    return Err(ConfigError::new(format!("grid: need a < b, got a = {a}, b = {b}")));
                }
                let cells: Option<usize> = e.get("grid.N", parse_int)?;
                let h = e.get("grid.h", parse_real)?;
                let cells = match (cells, h) {
                    (Some(_), Some(_)) => return Err(ConfigError::new("grid: set either grid.N or grid.h, not both")),
                    (Some(n), None) => n,
                    (None, Some(h)) => {
                        let n = (b - a) / h;
                        if !(h > 0.0) || (n - n.round()).abs() > 1e-9 * n.max(1.0) {
                            return Err(ConfigError::new(format!("grid.h = {h} does not divide ({a}, {b})")));
                        }
                        n.round() as usize
                    }
                    (None, None) => 64,
                };
                if cells == 0 {
                    return Err(ConfigError::new("grid.N must be at least 1"));
                }
                GridConfig::Interval { a, b, cells }
            }
            2 => {
                for key in ["grid.a", "grid.b", "grid.N"] {
                    if let Some((line, _)) = e.take(key) {
                        return Err(ConfigError::at(line, format!("`{key}` requires grid.dim = 1")));
                    }
                }
                let (lo, hi) = e.get("grid.box", parse_box)?.unwrap_or(([0.0, 0.0], [1.0, 1.0]));
                let h = e.get("grid.h", parse_real)?.unwrap_or(1.0 / 12.0);
                if !(h > 0.0) {
                    return Err(ConfigError::new(format!("grid.h = {h} must be positive")));
                }
                let mask = e.get("grid.mask", |v| Ok(v.to_string()))?.unwrap_or_else(|| "all".into());
                if Mask::builtin(&mask).is_none() {
                    return Err(ConfigError::new(format!("grid.mask: unknown builtin `{mask}`")));
                }
                GridConfig::Box { lo, hi, h, mask }
            }
            _ => return Err(ConfigError::new(format!("grid.dim = {dim} is not 1 or 2"))),
        };

        let assembly = AssemblyOptions {
            near_field_radius: e.get("assembly.near_field_radius", parse_int)?.unwrap_or(d.assembly.near_field_radius),
            tail_refine: e.get("assembly.tail_refine", parse_int)?.unwrap_or(d.assembly.tail_refine),
        };
        if assembly.tail_refine == 0 {
            return Err(ConfigError::new("assembly.tail_refine must be at least 1"));
        }

        let mode = e
            .get("solve.mode", |v| match v {
                "first" => Ok(SolveMode::First),
                "odd" => Ok(SolveMode::Odd),
                _ => Err(format!("`{v}` is not first or odd")),
            })?
            .unwrap_or(d.solve.mode);
        let mut seed = e.get("solve.seed", parse_int)?.unwrap_or(d.solve.seed);
        if let Some(s) = seed_override {
            seed = parse_int(s.trim()).map_err(|m| ConfigError::new(format!("{SEED_ENV}: {m}")))?;
        }
        let solve = SolveConfig {
            tol: e.get("solve.tol", parse_real)?.unwrap_or(d.solve.tol),
            max_iters: e.get("solve.max_iters", parse_int)?.unwrap_or(d.solve.max_iters),
            seed,
            mode,
            enforce_sign: e.get("solve.enforce_sign", parse_bool)?.unwrap_or(d.solve.enforce_sign),
        };

        let formats = e
            .get("output.formats", |v| {
                let mut out = Vec::new();
                for t in v.split(',').map(str::trim) {
                    let f = match t {
                        "json" => Format::Json,
                        "csv" => Format::Csv,
                        _ => return Err(format!("`{t}` is not json or csv")),
                    };
                    if !out.contains(&f) {
                        out.push(f);
                    }
                }
                Ok(out)
            })?
            .unwrap_or(d.output.formats);
        let output = OutputConfig {
            dir: e.get("output.dir", |v| Ok(PathBuf::from(v)))?.unwrap_or(d.output.dir),
            formats,
            dump_eigenfunction: e.get("output.dump_eigenfunction", parse_bool)?.unwrap_or(false),
        };
        debug_assert!(e.items.is_empty());

        let cfg = RunConfig { kernel, grid, assembly, solve, output };
        cfg.kernel().map_err(|err| ConfigError::new(err.to_string()))?;
        cfg.solve_options().validate().map_err(|err| ConfigError::new(err.to_string()))?;
        Ok(cfg)
    }

    /// Reads `path` and applies the `FRAC_EIG_SEED` override.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let seed = std::env::var(SEED_ENV).ok();
        Self::parse_with_seed(&text, seed.as_deref())
            .map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))
    }

    pub fn dim(&self) -> usize {
        match self.grid {
            GridConfig::Interval { .. } => 1,
            GridConfig::Box { .. } => 2,
        }
    }

    pub fn kernel(&self) -> frac_eig_core::Result<Kernel> {
        self.kernel_with(self.kernel.s, self.kernel.p)
    }

    pub fn kernel_with(&self, s: f64, p: f64) -> frac_eig_core::Result<Kernel> {
        let m = Multiplier::builtin(&self.kernel.multiplier).ok_or_else(|| {
            frac_eig_core::Error::InvalidParameter(format!("unknown multiplier `{}`", self.kernel.multiplier))
        })?;
        Kernel::with_multiplier(s, p, self.dim(), m, self.kernel.lam_lo, self.kernel.lam_hi)
    }

    pub fn build_grid(&self) -> frac_eig_core::Result<Arc<Grid>> {
        let g = match &self.grid {
            GridConfig::Interval { a, b, cells } => build_grid_1d(*a, *b, *cells)?,
            GridConfig::Box { lo, hi, h, mask } => {
                let m = Mask::builtin(mask).ok_or_else(|| {
                    frac_eig_core::Error::InvalidGrid(format!("unknown mask `{mask}`"))
                })?;
                build_grid_2d(Rect::new(*lo, *hi), *h, &m)?
            }
        };
        Ok(Arc::new(g))
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.solve.tol,
            max_iters: self.solve.max_iters,
            seed: self.solve.seed,
            mode: self.solve.mode,
            enforce_sign: self.solve.enforce_sign,
            ..SolveOptions::default()
        }
    }

    fn hashed(&self) -> Hashed<'_> {
        Hashed { kernel: &self.kernel, grid: &self.grid, assembly: &self.assembly, solve: &self.solve }
    }

    /// SHA-256 over the canonical JSON of the result-determining blocks.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.hashed()).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Config echo stored in every record: the hashed blocks only.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self.hashed()).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_text() {
        let c = RunConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn full_2d_config() {
        let c = RunConfig::parse(
            "kernel.s = 0.4 # order\nkernel.p = 3\nkernel.multiplier = sin_bump\ngrid.dim = 2\n\
             grid.box = -1, 1, -1, 1\ngrid.h = 1/8\ngrid.mask = disk\nsolve.mode = odd\n\
             output.formats = csv\noutput.dump_eigenfunction = true\n",
        )
        .unwrap();
        assert_eq!(c.kernel.lam_lo, 0.5);
        assert_eq!(c.grid, GridConfig::Box { lo: [-1.0, -1.0], hi: [1.0, 1.0], h: 0.125, mask: "disk".into() });
        assert_eq!(c.solve.mode, SolveMode::Odd);
        assert!(c.output.csv() && !c.output.json());
        assert!(!c.build_grid().unwrap().is_empty());
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let e = RunConfig::parse("kernel.s = 0.5\nsolver.tol = 1e-8\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.message.contains("solver.tol"));
        let e = RunConfig::parse("kernel.s = 0.5\nkernel.s = 0.6\n").unwrap_err();
        assert!(e.message.contains("duplicate"));
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "kernel.s = 1.5",
            "kernel.p = 1",
            "kernel.s = abc",
            "grid.N = -3",
            "grid.N = 0",
            "grid.dim = 3",
            "grid.box = 0,1,0,1",
            "grid.dim = 2\ngrid.N = 8",
            "grid.dim = 2\ngrid.mask = star",
            "grid.h = 0.3",
            "solve.mode = second",
            "solve.enforce_sign = yes",
            "solve.tol = 0",
            "output.formats = json,xml",
            "kernel.multiplier = gauss",
            "kernel.lam_lo = 2\nkernel.lam_hi = 1",
            "just a line",
        ] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn fractions_and_h_for_intervals() {
        let c = RunConfig::parse("grid.a = 0\ngrid.b = 1\ngrid.h = 1/16\n").unwrap();
        assert_eq!(c.grid, GridConfig::Interval { a: 0.0, b: 1.0, cells: 16 });
        assert_eq!(parse_list("0.3, 1/2,0.7").unwrap(), vec![0.3, 0.5, 0.7]);
        assert!(parse_list("").unwrap().is_empty());
    }

    #[test]
    fn seed_override_and_hash() {
        let text = "kernel.p = 3\nsolve.seed = 4\noutput.dir = a\n";
        let a = RunConfig::parse(text).unwrap();
        let b = RunConfig::parse_with_seed(text, Some("9")).unwrap();
        assert_eq!(b.solve.seed, 9);
        assert_ne!(a.hash(), b.hash());
        let c = RunConfig::parse("kernel.p = 3\nsolve.seed = 4\noutput.dir = b\n").unwrap();
        assert_eq!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
        assert!(RunConfig::parse_with_seed(text, Some("x")).is_err());
    }
}

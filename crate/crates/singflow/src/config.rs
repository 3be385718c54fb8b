//! Run configuration: `key = value` files, command-line flags and
//! `SINGFLOW_TOL_*` environment overrides. Flags win over the file.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use singflow_core::model::{PotentialSpec, Tolerances};

use crate::CliError;

/// Every tunable parameter, all optional so file and flags can be merged.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Params {
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long = "lambda-l", allow_hyphen_values = true)]
    pub lambda_l: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    #[arg(long = "anchor-k")]
    pub anchor_k: Option<f64>,
    #[arg(long = "anchor-delta", allow_hyphen_values = true)]
    pub anchor_delta: Option<f64>,
    #[arg(long = "scattering-length", allow_hyphen_values = true)]
    pub scattering_length: Option<f64>,
    /// Comma-separated radii.
    #[arg(long)]
    pub cutoffs: Option<String>,
    /// Branch index or `cycle`.
    #[arg(long)]
    pub branch: Option<String>,
    #[arg(long = "k-min")]
    pub k_min: Option<f64>,
    #[arg(long = "k-max")]
    pub k_max: Option<f64>,
    #[arg(long = "k-points")]
    pub k_points: Option<usize>,
    #[arg(long = "r-min")]
    pub r_min: Option<f64>,
    #[arg(long = "r-max")]
    pub r_max: Option<f64>,
    #[arg(long = "r-points")]
    pub r_points: Option<usize>,
    /// Cutoff for `tune`.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long = "kappa-min")]
    pub kappa_min: Option<f64>,
    #[arg(long = "kappa-max")]
    pub kappa_max: Option<f64>,
    #[arg(long = "x-min")]
    pub x_min: Option<f64>,
    #[arg(long = "x-max")]
    pub x_max: Option<f64>,
    #[arg(long = "x-points")]
    pub x_points: Option<usize>,
    /// Comma-separated subset of 0,1,2.
    #[arg(long)]
    pub orders: Option<String>,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim().parse().map_err(|_| CliError::Config(format!("bad value for {key}: {v:?}")))
}

impl Params {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Params, CliError> {
        let mut p = Params::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
            p.set(k.trim(), v.trim())?;
        }
        Ok(p)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        match key.replace('_', "-").as_str() {
            "n" => self.n = Some(parse(key, v)?),
            "lambda-l" => self.lambda_l = Some(parse(key, v)?),
            "phi" => self.phi = Some(parse(key, v)?),
            "anchor-k" => self.anchor_k = Some(parse(key, v)?),
            "anchor-delta" => self.anchor_delta = Some(parse(key, v)?),
            "scattering-length" => self.scattering_length = Some(parse(key, v)?),
            "cutoffs" => self.cutoffs = Some(v.to_string()),
            "branch" => self.branch = Some(v.to_string()),
            "k-min" => self.k_min = Some(parse(key, v)?),
            "k-max" => self.k_max = Some(parse(key, v)?),
            "k-points" => self.k_points = Some(parse(key, v)?),
            "r-min" => self.r_min = Some(parse(key, v)?),
            "r-max" => self.r_max = Some(parse(key, v)?),
            "r-points" => self.r_points = Some(parse(key, v)?),
            "r" => self.r = Some(parse(key, v)?),
            "kappa-min" => self.kappa_min = Some(parse(key, v)?),
            "kappa-max" => self.kappa_max = Some(parse(key, v)?),
            "x-min" => self.x_min = Some(parse(key, v)?),
            "x-max" => self.x_max = Some(parse(key, v)?),
            "x-points" => self.x_points = Some(parse(key, v)?),
            "orders" => self.orders = Some(v.to_string()),
            "format" => self.format = Some(v.to_string()),
            "out" => self.out = Some(PathBuf::from(v)),
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Fields set in `flags` replace those in `self`.
    pub fn overridden_by(self, flags: Params) -> Params {
        macro_rules! pick {
            ($($f:ident),*) => { Params { $($f: flags.$f.or(self.$f)),* } };
        }
        pick!(
            n, lambda_l, phi, anchor_k, anchor_delta, scattering_length, cutoffs, branch, k_min, k_max, k_points, r_min,
            r_max, r_points, r, kappa_min, kappa_max, x_min, x_max, x_points, orders, format, out
        )
    }

    /// Set fields as ordered (key, value) pairs for the metadata echo.
    pub fn echo(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        macro_rules! put {
            ($($name:literal => $f:ident),*) => { $( if let Some(v) = &self.$f { m.insert($name, format!("{v:?}")); } )* };
        }
        put!("n" => n, "lambda-l" => lambda_l, "phi" => phi, "anchor-k" => anchor_k, "anchor-delta" => anchor_delta,
            "scattering-length" => scattering_length, "cutoffs" => cutoffs, "branch" => branch, "k-min" => k_min,
            "k-max" => k_max, "k-points" => k_points, "r-min" => r_min, "r-max" => r_max, "r-points" => r_points,
            "r" => r, "kappa-min" => kappa_min, "kappa-max" => kappa_max, "x-min" => x_min, "x-max" => x_max,
            "x-points" => x_points, "orders" => orders, "format" => format);
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseSource {
    Phi(f64),
    Anchor { k: f64, delta: f64 },
    ScatteringLength(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchChoice {
    /// Lowest branch with a root at each cutoff.
    Lowest,
    Fixed(u32),
    Cycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: Params,
    pub spec: PotentialSpec,
    pub phase: PhaseSource,
    pub cutoffs: Vec<f64>,
    pub branch: BranchChoice,
    pub k_grid: Vec<f64>,
    pub r_range: (f64, f64),
    pub r_points: usize,
    pub r: f64,
    pub kappa_window: (f64, f64),
    pub x_grid: Vec<f64>,
    pub orders: Vec<u32>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub tol: Tolerances,
}

fn list(key: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(|t| parse(key, t)).collect()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect(),
    }
}

/// Applies `SINGFLOW_TOL_*` overrides from the given variables.
pub fn tolerances_from_env<I: IntoIterator<Item = (String, String)>>(vars: I) -> Result<Tolerances, CliError> {
    let mut t = Tolerances::default();
    for (k, v) in vars {
        match k.as_str() {
            "SINGFLOW_TOL_ODE_REL_TOL" => t.ode_rel_tol = parse(&k, &v)?,
            "SINGFLOW_TOL_ROOT_TOL" => t.root_tol = parse(&k, &v)?,
            "SINGFLOW_TOL_PHASE_TOL" => t.phase_tol = parse(&k, &v)?,
            "SINGFLOW_TOL_POINTS_PER_WAVELENGTH" => t.points_per_wavelength = parse(&k, &v)?,
            _ => {}
        }
    }
    t.validate()?;
    Ok(t)
}

impl RunConfig {
    pub fn from_params(params: Params, tol: Tolerances) -> Result<RunConfig, CliError> {
        let p = &params;
        let n = p.n.unwrap_or(4);
        let spec = PotentialSpec::new(n, p.lambda_l.unwrap_or(1.0))?;
        let phase = match (p.phi, p.anchor_k, p.anchor_delta, p.scattering_length) {
            (Some(phi), None, None, None) => PhaseSource::Phi(phi),
            (None, Some(k), Some(delta), None) => PhaseSource::Anchor { k, delta },
            (None, None, None, Some(a)) => PhaseSource::ScatteringLength(a),
            (None, None, None, None) => PhaseSource::Phi(0.0),
            _ => return Err(CliError::Config("give exactly one of phi, anchor-k with anchor-delta, scattering-length".into())),
        };
        let cutoffs = match &p.cutoffs {
            Some(s) => list("cutoffs", s)?,
            None => vec![0.16, 0.08, 0.04, 0.02, 0.01],
        };
        if cutoffs.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(CliError::Config("cutoffs must lie in (0, 1)".into()));
        }
        let branch = match p.branch.as_deref().map(str::trim) {
            None | Some("lowest") => BranchChoice::Lowest,
            Some("cycle") => BranchChoice::Cycle,
            Some(s) => BranchChoice::Fixed(parse("branch", s)?),
        };
        let (k_min, k_max, k_points) = (p.k_min.unwrap_or(0.05), p.k_max.unwrap_or(0.5), p.k_points.unwrap_or(10));
        if k_points > 0 && !(k_min > 0.0 && k_max >= k_min) {
            return Err(CliError::Config("need 0 < k-min <= k-max".into()));
        }
        let (r_min, r_max) = (p.r_min.unwrap_or(0.01), p.r_max.unwrap_or(0.3));
        if !(r_min > 0.0 && r_max < 1.0 && r_min <= r_max) {
            return Err(CliError::Config("need 0 < r-min <= r-max < 1".into()));
        }
        let r_points = p.r_points.unwrap_or(60);
        let r = p.r.unwrap_or(0.1);
        if !(r > 0.0 && r < 1.0) {
            return Err(CliError::Config("r must lie in (0, 1)".into()));
        }
        let kappa_window = (p.kappa_min.unwrap_or(1e-4), p.kappa_max.unwrap_or(1.0));
        if !(kappa_window.0 > 0.0 && kappa_window.1 > kappa_window.0) {
            return Err(CliError::Config("need 0 < kappa-min < kappa-max".into()));
        }
        let s = spec.lambda_l.sqrt();
        let (x_min, x_max) = (p.x_min.unwrap_or(0.1 * s), p.x_max.unwrap_or(10.0 * s));
        let x_points = p.x_points.unwrap_or(41);
        if x_points > 0 && !(x_min > 0.0 && x_max >= x_min) {
            return Err(CliError::Config("need 0 < x-min <= x-max".into()));
        }
        let orders: Vec<u32> = match &p.orders {
            Some(s) => s.split(',').filter(|t| !t.trim().is_empty()).map(|t| parse("orders", t)).collect::<Result<_, _>>()?,
            None => vec![0, 1, 2],
        };
        if orders.iter().any(|&o| o > 2) {
            return Err(CliError::Config("orders must be a subset of 0,1,2".into()));
        }
        let format = match p.format.as_deref().map(str::trim) {
            None | Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            Some(f) => return Err(CliError::Config(format!("unknown format {f:?}"))),
        };
        Ok(RunConfig {
            spec,
            phase,
            cutoffs,
            branch,
            k_grid: linspace(k_min, k_max, k_points),
            r_range: (r_min, r_max),
            r_points,
            r,
            kappa_window,
            x_grid: logspace(x_min, x_max, x_points),
            orders,
            format,
            out: p.out.clone(),
            tol,
            params,
        })
    }
}

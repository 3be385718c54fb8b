//! The six sub-commands. Grid points fan out over rayon; rows come back in
//! grid order.

use rayon::prelude::*;
use serde_json::json;
use singflow_core::flow::{exterior_nodes, lowest_branch, trace_flow_tol, tune_counterterm_tol, BranchPolicy};
use singflow_core::model::{nu_of, Counterterm};
use singflow_core::perturbation::{exact_zero_energy_n4, PerturbativeSeries};
use singflow_core::solver::{bound_states_shooting, phase_shift, reduce_half_pi, unwrap_phases, PhasePoint};
use singflow_core::zero_energy::{phase_from_observable, spectrum_index_near, spectrum_n2, Observable, ZeroEnergyPhase};

use crate::config::{BranchChoice, PhaseSource, RunConfig};
use crate::dataset::{Cell, Dataset};
use crate::CliError;

pub const FLOW_COLUMNS: [&str; 7] = ["R", "lambda_S_numeric", "H_numeric", "H_formula_A", "H_formula_B", "branch", "near_pole"];
pub const PHASES_COLUMNS: [&str; 6] = ["k", "E", "R", "delta", "delta_unwrapped", "stability"];
pub const ERRORS_COLUMNS: [&str; 5] = ["log_E", "log_abs_delta_diff", "pair", "fitted_slope", "flag"];
pub const SPECTRUM_COLUMNS: [&str; 5] = ["m", "kappa_shooting", "kappa_formula", "ratio_to_previous", "e_to_minus_pi_over_nu"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Flow,
    Phases,
    Errors,
    Spectrum,
    Perturb,
    Tune,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Flow => "flow",
            Command::Phases => "phases",
            Command::Errors => "errors",
            Command::Spectrum => "spectrum",
            Command::Perturb => "perturb",
            Command::Tune => "tune",
        }
    }
}

pub fn resolve_phase(cfg: &RunConfig) -> Result<ZeroEnergyPhase, CliError> {
    let n = cfg.spec.n;
    Ok(match cfg.phase {
        PhaseSource::Phi(phi) => ZeroEnergyPhase::new(n, phi),
        PhaseSource::Anchor { k, delta } => phase_from_observable(&cfg.spec, Observable::PhaseAtK { k_ref: k, delta_ref: delta }, &cfg.tol)?,
        PhaseSource::ScatteringLength(a) => phase_from_observable(&cfg.spec, Observable::ScatteringLength(a), &cfg.tol)?,
    })
}

fn branch_at(cfg: &RunConfig, ph: &ZeroEnergyPhase, r: f64) -> Result<u32, CliError> {
    Ok(match cfg.branch {
        BranchChoice::Fixed(m) => m,
        _ => lowest_branch(&cfg.spec, ph, r)?,
    })
}

fn tuned(cfg: &RunConfig, ph: &ZeroEnergyPhase, r: f64, m: u32) -> Result<Counterterm, CliError> {
    Ok(tune_counterterm_tol(&cfg.spec, ph, r, m, &cfg.tol)?)
}

fn scan(cfg: &RunConfig, ct: &Counterterm) -> Result<Vec<PhasePoint>, CliError> {
    let mut pts = cfg
        .k_grid
        .par_iter()
        .map(|&k| phase_shift(&cfg.spec, ct, k, &cfg.tol))
        .collect::<Result<Vec<_>, _>>()?;
    unwrap_phases(&mut pts);
    Ok(pts)
}

fn header(cmd: Command, cfg: &RunConfig, d: &mut Dataset) {
    d.meta("command", cmd.name());
    d.meta("tool", format!("singflow {}", env!("CARGO_PKG_VERSION")));
    for (k, v) in cfg.params.echo() {
        d.meta(&format!("config.{k}"), v);
    }
    let t = &cfg.tol;
    d.meta(
        "tolerances",
        format!(
            "ode_rel_tol={:e} root_tol={:e} phase_tol={:e} points_per_wavelength={}",
            t.ode_rel_tol, t.root_tol, t.phase_tol, t.points_per_wavelength
        ),
    );
    d.meta("reproducibility", "deterministic; the same configuration on the same build gives identical rows");
}

fn phase_meta(d: &mut Dataset, ph: &ZeroEnergyPhase) {
    d.meta("phi_mod_pi", format!("{:.12e}", ph.phi));
}

pub fn cmd_flow(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let mut d = Dataset::new(&FLOW_COLUMNS);
    header(Command::Flow, cfg, &mut d);
    let ph = resolve_phase(cfg)?;
    phase_meta(&mut d, &ph);
    let (r_min, r_max) = cfg.r_range;
    let grid: Vec<f64> = if cfg.r_points <= 1 {
        vec![r_min]
    } else {
        (0..cfg.r_points).map(|i| r_min * (r_max / r_min).powf(i as f64 / (cfg.r_points - 1) as f64)).collect()
    };
    let policy = match cfg.branch {
        BranchChoice::Fixed(m) => BranchPolicy::FixedBranch(m),
        BranchChoice::Lowest => {
            let mut m = 0;
            for &r in &grid {
                m = m.max(lowest_branch(&cfg.spec, &ph, r)?);
            }
            BranchPolicy::FixedBranch(m)
        }
        BranchChoice::Cycle => {
            let r_top = *grid.last().unwrap();
            let nodes = exterior_nodes(&cfg.spec, &ph, &grid)?.iter().filter(|&&p| p < r_top).count();
            BranchPolicy::FixedBoundStateCount(lowest_branch(&cfg.spec, &ph, r_top)? + nodes as u32)
        }
    };
    d.meta("policy", format!("{policy:?}"));
    let trace = trace_flow_tol(&cfg.spec, &ph, cfg.r_range, grid.len(), policy, &cfg.tol)?;
    for s in &trace.samples {
        let (ls, h) = s.numeric.as_ref().map(|p| (p.lambda_s, p.h)).unwrap_or((f64::NAN, f64::NAN));
        d.push(vec![
            Cell::Num(s.r),
            Cell::Num(ls),
            Cell::Num(h),
            Cell::Num(s.formula_a.h),
            Cell::Num(s.formula_b.h),
            Cell::Int(s.branch as i64),
            Cell::Bool(s.near_pole),
        ]);
    }
    Ok(d)
}

pub fn cmd_phases(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let mut d = Dataset::new(&PHASES_COLUMNS);
    header(Command::Phases, cfg, &mut d);
    let ph = resolve_phase(cfg)?;
    phase_meta(&mut d, &ph);
    let per_cutoff = cfg
        .cutoffs
        .par_iter()
        .map(|&r| {
            let ct = tuned(cfg, &ph, r, branch_at(cfg, &ph, r)?)?;
            Ok((r, scan(cfg, &ct)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    for (r, pts) in per_cutoff {
        for p in pts {
            d.push(vec![
                Cell::Num(p.k),
                Cell::Num(0.5 * p.k * p.k),
                Cell::Num(r),
                Cell::Num(p.delta),
                Cell::Num(p.delta_unwrapped),
                Cell::Num(p.stability),
            ]);
        }
    }
    Ok(d)
}

/// Least-squares slope of y against x over finite pairs.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(&x, &y)| (x, y)).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Cutoff pair and its per-k phase differences.
pub type PairDiffs = Vec<((f64, f64), Vec<f64>)>;

/// delta_R(k) - delta_R'(k) mod pi for each pair of adjacent cutoffs.
pub fn pair_differences(cfg: &RunConfig, ph: &ZeroEnergyPhase) -> Result<PairDiffs, CliError> {
    let pairs: Vec<(f64, f64)> = cfg.cutoffs.windows(2).map(|w| (w[0], w[1])).collect();
    pairs
        .par_iter()
        .map(|&(r, rp)| {
            let m = branch_at(cfg, ph, r)?.max(branch_at(cfg, ph, rp)?);
            let a = scan(cfg, &tuned(cfg, ph, r, m)?)?;
            let b = scan(cfg, &tuned(cfg, ph, rp, m)?)?;
            let diff = a.iter().zip(&b).map(|(p, q)| reduce_half_pi(p.delta - q.delta)).collect();
            Ok(((r, rp), diff))
        })
        .collect()
}

pub fn cmd_errors(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let mut d = Dataset::new(&ERRORS_COLUMNS);
    header(Command::Errors, cfg, &mut d);
    d.meta("log_base", "e");
    let ph = resolve_phase(cfg)?;
    phase_meta(&mut d, &ph);
    let log_e: Vec<f64> = cfg.k_grid.iter().map(|k| (0.5 * k * k).ln()).collect();
    for ((r, rp), diff) in pair_differences(cfg, &ph)? {
        let logs: Vec<f64> = diff.iter().map(|v| v.abs().ln()).collect();
        let slope = fit_slope(&log_e, &logs);
        let flag = if r == rp {
            "identical_pair"
        } else if slope.is_none() {
            "slope_undefined"
        } else {
            ""
        };
        let label = format!("{r}/{rp}");
        for (le, la) in log_e.iter().zip(&logs) {
            d.push(vec![
                Cell::Num(*le),
                Cell::Num(*la),
                Cell::Text(label.clone()),
                Cell::Num(slope.unwrap_or(f64::NAN)),
                Cell::Text(flag.into()),
            ]);
        }
    }
    Ok(d)
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Dataset, CliError> {
    if cfg.spec.n != 2 {
        return Err(CliError::Config("spectrum needs n = 2".into()));
    }
    let mut d = Dataset::new(&SPECTRUM_COLUMNS);
    header(Command::Spectrum, cfg, &mut d);
    let ph = resolve_phase(cfg)?;
    phase_meta(&mut d, &ph);
    let lam = cfg.spec.lambda_l;
    let nu = nu_of(lam)?;
    let r = cfg.params.r.unwrap_or(1e-3);
    let (kmin, kmax) = cfg.kappa_window;
    let mut m = branch_at(cfg, &ph, r)?;
    let mut ct = tuned(cfg, &ph, r, m)?;
    while ct.lambda_s < 4.0 * kmax * kmax {
        m += 1;
        ct = tuned(cfg, &ph, r, m)?;
    }
    d.meta("cutoff", format!("R={r:e} branch={m}"));
    let states = bound_states_shooting(&cfg.spec, &ct, (kmin, kmax), &cfg.tol)?;
    let geo = (-std::f64::consts::PI / nu).exp();
    let mut prev: Option<f64> = None;
    for s in states {
        let idx = spectrum_index_near(lam, &ph, s.kappa)?;
        let formula = spectrum_n2(lam, &ph, idx..=idx)?.first().map(|b| b.kappa).unwrap_or(f64::NAN);
        d.push(vec![
            Cell::Int(s.m as i64),
            Cell::Num(s.kappa),
            Cell::Num(formula),
            Cell::Num(prev.map(|p| s.kappa / p).unwrap_or(f64::NAN)),
            Cell::Num(geo),
        ]);
        prev = Some(s.kappa);
    }
    Ok(d)
}

pub fn cmd_perturb(cfg: &RunConfig) -> Result<Dataset, CliError> {
    if cfg.spec.n != 4 {
        return Err(CliError::Config("perturb needs n = 4".into()));
    }
    let order_cols: Vec<String> = cfg.orders.iter().map(|o| format!("u_order{o}")).collect();
    let mut cols = vec!["x", "u_exact"];
    cols.extend(order_cols.iter().map(String::as_str));
    let mut d = Dataset::new(&cols);
    header(Command::Perturb, cfg, &mut d);
    let ph = resolve_phase(cfg)?;
    phase_meta(&mut d, &ph);
    let lam = cfg.spec.lambda_l;
    let series = PerturbativeSeries::new(&ph, lam)?;
    let rows = cfg
        .x_grid
        .par_iter()
        .map(|&x| {
            let mut row = vec![Cell::Num(x), Cell::Num(exact_zero_energy_n4(&ph, lam, x)?)];
            // a diverging Born quadrature is reported as a missing value
            row.extend(cfg.orders.iter().map(|&o| Cell::Num(series.eval(o, x).unwrap_or(f64::NAN))));
            Ok(row)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    for r in rows {
        d.push(r);
    }
    Ok(d)
}

/// JSON object {R, lambda_S, H, branch, phi_mod_pi}.
pub fn cmd_tune(cfg: &RunConfig) -> Result<serde_json::Value, CliError> {
    let ph = resolve_phase(cfg)?;
    let m = branch_at(cfg, &ph, cfg.r)?;
    let ct = tuned(cfg, &ph, cfg.r, m)?;
    Ok(json!({ "R": ct.r, "lambda_S": ct.lambda_s, "H": ct.h(), "branch": ct.branch, "phi_mod_pi": ph.phi }))
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<String, CliError> {
    let d = match cmd {
        Command::Flow => cmd_flow(cfg)?,
        Command::Phases => cmd_phases(cfg)?,
        Command::Errors => cmd_errors(cfg)?,
        Command::Spectrum => cmd_spectrum(cfg)?,
        Command::Perturb => cmd_perturb(cfg)?,
        Command::Tune => return Ok(cmd_tune(cfg)?.to_string() + "\n"),
    };
    Ok(match cfg.format {
        crate::config::Format::Csv => d.to_csv(),
        crate::config::Format::Json => d.to_json(),
    })
}

//! Running coupling of the square-well counterterm.
//!
//! With H = sqrt(lambda_S) R and g = R u'(R)/u(R) from the exterior zero-energy
//! solution, matching reads H cot H = g. Branch m is H in [m pi, (m+1) pi).

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::model::{Counterterm, PotentialSpec, Tolerances};
use crate::roots::{brent, brent_with};
use crate::solver::{phase_shift, reduce_half_pi};
use crate::zero_energy::{closed_form_log_derivative, exterior_log_derivative, zero_energy_wavefunction, ZeroEnergyPhase};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowSource {
    NumericRoot,
    BranchFormulaA,
    BranchFormulaB,
}

/// One sample of the running coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowPoint {
    pub r: f64,
    pub lambda_s: f64,
    pub h: f64,
    pub branch: u32,
    pub source: FlowSource,
}

/// Closed-form estimate of H with its validity bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchEstimate {
    pub h: f64,
    /// |RHS| R, i.e. |g|.
    pub indicator: f64,
    /// Leading neglected term of the expansion, in units of H.
    pub error_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchPolicy {
    FixedBranch(u32),
    /// Start on the given branch at the largest R and drop one branch each time
    /// R decreases through a node of the exterior solution.
    FixedBoundStateCount(u32),
}

/// One grid point of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub r: f64,
    pub branch: u32,
    pub numeric: Option<FlowPoint>,
    pub formula_a: FlowPoint,
    pub formula_b: FlowPoint,
    pub a_error: f64,
    pub b_error: f64,
    /// |g| = |RHS| R.
    pub indicator: f64,
    pub near_pole: bool,
    /// Why no numeric root exists here, if it does not.
    pub gap: Option<String>,
}

impl FlowSample {
    /// The closed form whose own error estimate is smaller.
    pub fn preferred(&self) -> FlowSource {
        if self.a_error <= self.b_error {
            FlowSource::BranchFormulaA
        } else {
            FlowSource::BranchFormulaB
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    /// Ordered by increasing R.
    pub samples: Vec<FlowSample>,
    pub policy: BranchPolicy,
    pub pole_locations: Vec<f64>,
}

/// g threshold above which a sample is flagged as near a pole.
pub const NEAR_POLE_G: f64 = 100.0;

/// Exterior zero-energy log-derivative at R.
pub fn matching_rhs(spec: &PotentialSpec, phase: &ZeroEnergyPhase, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("cutoff R = {r} outside (0, 1)"));
    }
    exterior_log_derivative(spec, phase, r)
}

/// lambda_S on branch m reproducing the exterior log-derivative at R.
pub fn tune_counterterm(spec: &PotentialSpec, phase: &ZeroEnergyPhase, r: f64, m: u32) -> Result<Counterterm> {
    tune_counterterm_tol(spec, phase, r, m, &Tolerances::default())
}

pub fn tune_counterterm_tol(spec: &PotentialSpec, phase: &ZeroEnergyPhase, r: f64, m: u32, tol: &Tolerances) -> Result<Counterterm> {
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("cutoff R = {r} outside (0, 1)"));
    }
    let (u, du) = zero_energy_wavefunction(spec, phase, r)?;
    tune_to_state(r, u, du, m, tol)
}

/// Solves H cos H u - sin H R u' = 0 on branch m; no poles on the bracket.
pub(crate) fn tune_to_state(r: f64, u: f64, du: f64, m: u32, tol: &Tolerances) -> Result<Counterterm> {
    let norm = u.abs() + r * du.abs();
    let (u, du) = (u / norm, du / norm);
    let lo = m as f64 * PI;
    let hi = lo + PI;
    let xtol = (tol.root_tol * r * r / (2.0 * hi)).max(1e-300);
    let h = if m == 0 {
        // divide out the trivial root at H = 0
        let f = |h: f64| {
            let sinc = if h.abs() < 1e-8 { 1.0 - h * h / 6.0 } else { h.sin() / h };
            h.cos() * u - sinc * r * du
        };
        let g = r * du / u;
        if !(u != 0.0 && g < 1.0) {
            return Err(Error::BranchInfeasible { branch: 0, reason: format!("lowest branch needs R u'/u < 1, got {g}") });
        }
        brent_with(f, 0.0, PI, f(0.0), f(PI), xtol, 300)?
    } else {
        let f = |h: f64| h * h.cos() * u - h.sin() * r * du;
        if u == 0.0 {
            lo
        } else {
            brent_with(f, lo, hi, f(lo), f(hi), xtol, 300)?
        }
    };
    // keep the stored branch consistent with [m pi, (m+1) pi)
    let h = if h >= hi { hi * (1.0 - f64::EPSILON) } else { h.max(lo) };
    Ok(Counterterm { r, lambda_s: (h / r).powi(2), branch: m })
}

fn closed_form_g(spec: &PotentialSpec, phase: &ZeroEnergyPhase, r: f64) -> Result<f64> {
    Ok(r * closed_form_log_derivative(spec, phase, r, false)?)
}

/// H = j pi (1 - 1/(1 - g)), the expansion about H = j pi where |g| is large.
/// For n = 2 this is j pi sin(theta - b)/sin(theta + b), b = atan(1/(2 nu)).
pub fn branch_formula_a(spec: &PotentialSpec, phase: &ZeroEnergyPhase, r: f64, j: u32) -> Result<BranchEstimate> {
    let g = closed_form_g(spec, phase, r)?;
    Ok(formula_a_from_g(g, j))
}

fn formula_a_from_g(g: f64, j: u32) -> BranchEstimate {
    let jp = j as f64 * PI;
    let h = if g.is_infinite() { jp } else { jp * (1.0 - 1.0 / (1.0 - g)) };
    let eps = h - jp;
    let error_estimate = if j == 0 { f64::INFINITY } else { eps.abs().powi(3) / (3.0 * h.abs().max(1e-300)) };
    BranchEstimate { h, indicator: g.abs(), error_estimate }
}

/// H = (m + 1/2) pi - g/((m + 1/2) pi), the expansion about the zero of cot.
pub fn branch_formula_b(spec: &PotentialSpec, phase: &ZeroEnergyPhase, r: f64, m: u32) -> Result<BranchEstimate> {
    let g = closed_form_g(spec, phase, r)?;
    Ok(formula_b_from_g(g, m))
}

fn formula_b_from_g(g: f64, m: u32) -> BranchEstimate {
    let h0 = (m as f64 + 0.5) * PI;
    let h = h0 - g / h0;
    let eps = h - h0;
    BranchEstimate { h, indicator: g.abs(), error_estimate: eps * eps / (h0 * h.abs().max(1e-300)) }
}

/// Multiple of pi that formula A expands about for branch m.
pub fn formula_a_multiple(g: f64, m: u32) -> u32 {
    if g > 1.0 {
        m
    } else {
        m + 1
    }
}

fn sample(spec: &PotentialSpec, phase: &ZeroEnergyPhase, r: f64, m: u32, tol: &Tolerances) -> Result<FlowSample> {
    let g = closed_form_g(spec, phase, r)?;
    let fa = formula_a_from_g(g, formula_a_multiple(g, m));
    let fb = formula_b_from_g(g, m);
    let point = |h: f64, source| FlowPoint { r, lambda_s: (h / r).powi(2), h, branch: m, source };
    let (numeric, gap) = match tune_counterterm_tol(spec, phase, r, m, tol) {
        Ok(ct) => (Some(FlowPoint { r, lambda_s: ct.lambda_s, h: ct.h(), branch: m, source: FlowSource::NumericRoot }), None),
        Err(e @ Error::BranchInfeasible { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    Ok(FlowSample {
        r,
        branch: m,
        numeric,
        formula_a: point(fa.h, FlowSource::BranchFormulaA),
        formula_b: point(fb.h, FlowSource::BranchFormulaB),
        a_error: fa.error_estimate,
        b_error: fb.error_estimate,
        indicator: g.abs(),
        near_pole: g.abs() > NEAR_POLE_G,
        gap,
    })
}

fn exterior_u(spec: &PotentialSpec, phase: &ZeroEnergyPhase, r: f64) -> f64 {
    zero_energy_wavefunction(spec, phase, r).map(|p| p.0).unwrap_or(f64::NAN)
}

/// Radii in [grid[0], grid[last]] where the exterior zero-energy solution
/// vanishes, i.e. the poles of the matching condition.
pub fn exterior_nodes(spec: &PotentialSpec, phase: &ZeroEnergyPhase, grid: &[f64]) -> Result<Vec<f64>> {
    let mut poles = Vec::new();
    for w in grid.windows(2) {
        let (ua, ub) = (exterior_u(spec, phase, w[0]), exterior_u(spec, phase, w[1]));
        if ua == 0.0 {
            poles.push(w[0]);
        } else if ua.signum() != ub.signum() && ub != 0.0 {
            poles.push(brent(|r| exterior_u(spec, phase, r), w[0], w[1], 1e-15 * w[1])?);
        }
    }
    if let Some(&last) = grid.last() {
        if exterior_u(spec, phase, last) == 0.0 {
            poles.push(last);
        }
    }
    Ok(poles)
}

/// Traces the flow on a log-spaced grid over [r_min, r_max].
pub fn trace_flow(
    spec: &PotentialSpec,
    phase: &ZeroEnergyPhase,
    r_range: (f64, f64),
    grid_points: usize,
    policy: BranchPolicy,
) -> Result<FlowTrace> {
    trace_flow_tol(spec, phase, r_range, grid_points, policy, &Tolerances::default())
}

pub fn trace_flow_tol(
    spec: &PotentialSpec,
    phase: &ZeroEnergyPhase,
    r_range: (f64, f64),
    grid_points: usize,
    policy: BranchPolicy,
    tol: &Tolerances,
) -> Result<FlowTrace> {
    let (r_min, r_max) = r_range;
    if !(r_min > 0.0 && r_max < 1.0 && r_min <= r_max) {
        return domain(format!("R range ({r_min}, {r_max}) must lie in (0, 1)"));
    }
    if grid_points == 0 {
        return domain("grid needs at least one point");
    }
    let grid: Vec<f64> = if grid_points == 1 || r_min == r_max {
        vec![r_min]
    } else {
        (0..grid_points)
            .map(|i| r_min * (r_max / r_min).powf(i as f64 / (grid_points - 1) as f64))
            .collect()
    };
    let poles = exterior_nodes(spec, phase, &grid)?;
    let mut samples = Vec::with_capacity(grid.len());
    match policy {
        BranchPolicy::FixedBranch(m) => {
            for &r in &grid {
                samples.push(sample(spec, phase, r, m, tol)?);
            }
        }
        BranchPolicy::FixedBoundStateCount(m0) => {
            // walk down from the largest R, one branch lower per pole crossed
            let mut m = m0 as i64;
            let mut pole_iter = poles.iter().rev().peekable();
            let mut rev = Vec::with_capacity(grid.len());
            for &r in grid.iter().rev() {
                while let Some(&&p) = pole_iter.peek() {
                    if p >= r && p < r_max {
                        m -= 1;
                        pole_iter.next();
                    } else if p >= r_max {
                        pole_iter.next();
                    } else {
                        break;
                    }
                }
                if m < 0 {
                    let mut s = sample(spec, phase, r, 0, tol)?;
                    s.numeric = None;
                    s.gap = Some("no branch left below m = 0 for this bound-state count".into());
                    rev.push(s);
                } else {
                    rev.push(sample(spec, phase, r, m as u32, tol)?);
                }
            }
            rev.reverse();
            samples = rev;
        }
    }
    Ok(FlowTrace { samples, policy, pole_locations: poles })
}

/// Radius used to anchor phase-shift inversion.
pub fn anchor_radius(spec: &PotentialSpec) -> f64 {
    if spec.n >= 3 {
        0.005 * spec.lambda_l.powf(1.0 / (spec.n as f64 - 2.0)).min(1.0)
    } else {
        0.005
    }
}

/// Lowest branch with a root at R for the given phase.
pub fn lowest_branch(spec: &PotentialSpec, phase: &ZeroEnergyPhase, r: f64) -> Result<u32> {
    let g = r * matching_rhs(spec, phase, r)?;
    Ok(if g < 1.0 { 0 } else { 1 })
}

/// Finds phi with delta(k_ref) = delta_ref (mod pi) by tuning a counterterm at
/// the anchor radius for each trial phi.
pub(crate) fn phase_for_phase_shift(spec: &PotentialSpec, k_ref: f64, delta_ref: f64, tol: &Tolerances) -> Result<ZeroEnergyPhase> {
    if !(k_ref > 0.0) {
        return domain("reference wavenumber must be positive");
    }
    let ra = anchor_radius(spec);
    let delta_at = |phi: f64| -> Result<f64> {
        let ph = ZeroEnergyPhase::new(spec.n, phi);
        let (u, du) = zero_energy_wavefunction(spec, &ph, ra)?;
        let g = ra * du / u;
        let m = if g < 1.0 { 0 } else { 1 };
        let ct = tune_to_state(ra, u, du, m, tol)?;
        Ok(phase_shift(spec, &ct, k_ref, tol)?.delta)
    };
    let npts = 72;
    let grid: Vec<f64> = (0..=npts).map(|i| -0.5 * PI + PI * i as f64 / npts as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&p| delta_at(p).map(|d| reduce_half_pi(d - delta_ref))).collect::<Result<_>>()?;
    let mut best: Option<f64> = None;
    for i in 0..npts {
        let (a, b) = (vals[i], vals[i + 1]);
        // a genuine crossing is small on both sides; a wrap of the reduced
        // difference jumps by about pi
        if a.signum() == b.signum() || (a - b).abs() > 0.5 * PI {
            continue;
        }
        let root = brent_with(
            |p| delta_at(p).map(|d| reduce_half_pi(d - delta_ref)).unwrap_or(f64::NAN),
            grid[i],
            grid[i + 1],
            a,
            b,
            1e-13,
            200,
        )?;
        best = Some(root);
        break;
    }
    match best {
        Some(phi) => Ok(ZeroEnergyPhase::new(spec.n, phi)),
        None => Err(Error::Infeasible(format!("no phase reproduces delta({k_ref}) = {delta_ref}"))),
    }
}

//! WKB wavefunctions, the leading energy correction of the short-distance
//! amplitude, and the cutoff error functional.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::flow::tune_counterterm;
use crate::model::{wkb_phase_scale, Counterterm, PotentialSpec};
use crate::quad::integrate;
use crate::roots::brent;
use crate::zero_energy::{zero_energy_wavefunction, ZeroEnergyPhase};

/// Minimum value of the validity indicators.
pub const WKB_VALIDITY: f64 = 5.0;

/// u = p^(-1/2) cos(int_{x0}^x p), p = sqrt(eta^2 + lambda_L f(x)/x^n).
#[derive(Debug, Clone, PartialEq)]
pub struct WkbSolution {
    pub spec: PotentialSpec,
    pub eta: f64,
    pub x0: f64,
}

impl WkbSolution {
    fn q(&self, x: f64) -> f64 {
        self.eta * self.eta + self.spec.tail(x)
    }

    fn p(&self, x: f64) -> f64 {
        self.q(x).sqrt()
    }

    /// Large-x indicator eta^3 / (n lambda_L x^(-n-1) / 2).
    pub fn large_x_indicator(&self, x: f64) -> f64 {
        let n = self.spec.n as f64;
        self.eta.powi(3) / (0.5 * n * self.spec.lambda_l * x.powf(-n - 1.0))
    }

    pub fn is_valid(&self, x: f64) -> bool {
        wkb_phase_scale(&self.spec, x) >= WKB_VALIDITY || self.large_x_indicator(x) >= WKB_VALIDITY
    }

    /// int_{x0}^{x} p(x') dx'.
    pub fn phase(&self, x: f64) -> Result<f64> {
        let (v, _) = integrate(|t| self.p(t), self.x0, x, 1e-13, 1e-11)?;
        Ok(v)
    }

    pub fn amplitude(&self, x: f64) -> f64 {
        self.q(x).powf(-0.25)
    }
}

fn profile_slope(spec: &PotentialSpec, x: f64) -> f64 {
    let h = 1e-6 * x.max(1e-12);
    (spec.profile.eval(x + h) - spec.profile.eval((x - h).max(0.0))) / (x + h - (x - h).max(0.0))
}

/// WKB value and derivative at x.
pub fn wkb_wavefunction(sol: &WkbSolution, x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return domain("WKB radius must be positive");
    }
    if !sol.is_valid(x) {
        return Err(Error::Validity { indicator: wkb_phase_scale(&sol.spec, x).max(sol.large_x_indicator(x)) });
    }
    let s = &sol.spec;
    let n = s.n as f64;
    let f = s.profile.eval(x);
    let dq = s.lambda_l * (profile_slope(s, x) - n * f / x) / x.powf(n);
    let q = sol.q(x);
    let p = q.sqrt();
    let th = sol.phase(x)?;
    let (sn, cs) = th.sin_cos();
    let amp = q.powf(-0.25);
    let damp = -0.25 * dq * q.powf(-1.25);
    Ok((amp * cs, damp * cs - amp * p * sn))
}

/// 1 - (eta^2/2) PV int_0^x u0/u0' dx'. The integrand has simple poles at the
/// zeros of u0'; each is excised with a symmetric window of half-width
/// 1e-4 of the local wavelength. The region below x/100 (x/1e4 for n = 2)
/// contributes below 1e-8 of the total and is dropped.
pub fn energy_correction(spec: &PotentialSpec, phase: &ZeroEnergyPhase, x: f64, eta: f64) -> Result<f64> {
    if !(x > 0.0) {
        return domain("radius must be positive");
    }
    let scale = wkb_phase_scale(spec, x);
    if spec.n > 2 && scale < WKB_VALIDITY {
        return Err(Error::Validity { indicator: scale });
    }
    if eta == 0.0 {
        return Ok(1.0);
    }
    let lo = if spec.n == 2 { 1e-4 * x } else { 1e-2 * x };
    let ratio = |t: f64| -> f64 {
        let (u, du) = zero_energy_wavefunction(spec, phase, t).unwrap_or((f64::NAN, 1.0));
        u / du
    };
    let du = |t: f64| zero_energy_wavefunction(spec, phase, t).map(|p| p.1).unwrap_or(f64::NAN);
    // sample in the local phase variable: 16 points per half period
    let local_wl = |t: f64| 2.0 * PI / spec.tail(t).sqrt().max(1.0 / t);
    let mut grid = vec![lo];
    while *grid.last().unwrap() < x {
        let t = *grid.last().unwrap();
        grid.push((t + local_wl(t) / 32.0).min(x));
    }
    let mut poles = Vec::new();
    for w in grid.windows(2) {
        let (a, b) = (du(w[0]), du(w[1]));
        if a.signum() != b.signum() {
            poles.push(brent(du, w[0], w[1], 1e-15 * w[1])?);
        }
    }
    let mut edges = vec![lo];
    for &p in &poles {
        let hw = 1e-4 * local_wl(p);
        edges.push(p - hw);
        edges.push(p + hw);
    }
    edges.push(x);
    let mut total = 0.0;
    for pair in edges.chunks(2) {
        let (a, b) = (pair[0], pair[1]);
        if b > a {
            total += integrate(ratio, a, b, 1e-16, 1e-10)?.0;
        }
    }
    Ok(1.0 - 0.5 * eta * eta * total)
}

/// Cutoff error functional between two tuned counterterms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub r: f64,
    pub r_prime: f64,
    /// 2 (N_{R'} - N_R), N_X = int_0^X u_X(x;0)^2 dx with the exterior
    /// normalised like the closed-form solution.
    pub e_value: f64,
    /// R^(n/2-1) u^3/u' at R, the order-of-magnitude form.
    pub scale_estimate: f64,
    /// R^(3n/2-1)/sqrt(lambda_L).
    pub envelope_law: f64,
    /// C^2 a^2 of the zero-energy asymptote u -> C (x - a) (n >= 4, else NaN).
    pub asymptote_c2a2: f64,
}

impl ErrorEstimate {
    /// k^2-law prediction c k^2 E with a fitted constant.
    pub fn predicted_delta_error(&self, k: f64, constant: f64) -> f64 {
        constant * k * k * self.e_value
    }

    /// First-order effective-range prediction of delta_R(k) - delta_R'(k),
    /// -E k sin^2(delta)/(2 C^2 a^2).
    pub fn first_order_delta_diff(&self, k: f64, delta: f64) -> f64 {
        -self.e_value * k * delta.sin().powi(2) / (2.0 * self.asymptote_c2a2)
    }
}

fn interior_norm(ct: &Counterterm, u_r: f64) -> f64 {
    let q = ct.lambda_s.sqrt();
    let r = ct.r;
    let s = (q * r).sin();
    if s == 0.0 {
        return f64::NAN;
    }
    let amp = u_r / s;
    if q == 0.0 {
        return amp * amp * r.powi(3) / 3.0;
    }
    amp * amp * (0.5 * r - (2.0 * q * r).sin() / (4.0 * q))
}

fn check_tuned(spec: &PotentialSpec, phase: &ZeroEnergyPhase, ct: &Counterterm) -> Result<(f64, f64)> {
    let (u, du) = zero_energy_wavefunction(spec, phase, ct.r)?;
    let q = ct.lambda_s.sqrt();
    let (s, c) = (q * ct.r).sin_cos();
    // zero-energy Wronskian of interior sin(qx) and exterior solution at R
    let w = s * du - q * c * u;
    let scale = (s.abs() + c.abs() * q * ct.r) * (u.abs() + ct.r * du.abs()) / ct.r;
    if w.abs() > 1e-8 * scale {
        return Err(Error::Precondition(format!("counterterm at R = {} is not tuned to this phase", ct.r)));
    }
    Ok((u, du))
}

fn asymptote_c2a2(spec: &PotentialSpec, phase: &ZeroEnergyPhase) -> f64 {
    if spec.n < 4 {
        return f64::NAN;
    }
    let xb = 1e6 * spec.lambda_l.powf(1.0 / (spec.n as f64 - 2.0)).max(1.0);
    match zero_energy_wavefunction(spec, phase, xb) {
        Ok((u, du)) => {
            let a = xb - u / du;
            du * du * a * a
        }
        Err(_) => f64::NAN,
    }
}

/// Error functional for cutoffs R (ct) and R' < R (ct_prime), both tuned to `phase`.
pub fn error_functional(spec: &PotentialSpec, phase: &ZeroEnergyPhase, ct: &Counterterm, ct_prime: &Counterterm) -> Result<ErrorEstimate> {
    if !(ct_prime.r <= ct.r) {
        return domain("R' must not exceed R");
    }
    let (u, du) = check_tuned(spec, phase, ct)?;
    let (up, _) = check_tuned(spec, phase, ct_prime)?;
    let n_r = interior_norm(ct, u);
    let mut n_rp = interior_norm(ct_prime, up);
    if ct_prime.r < ct.r {
        let ext = |t: f64| zero_energy_wavefunction(spec, phase, t).map(|p| p.0 * p.0).unwrap_or(f64::NAN);
        n_rp += integrate(ext, ct_prime.r, ct.r, 1e-300, 1e-12)?.0;
    }
    let e_value = if ct_prime.r == ct.r && ct_prime.lambda_s == ct.lambda_s { 0.0 } else { 2.0 * (n_rp - n_r) };
    let n = spec.n as f64;
    Ok(ErrorEstimate {
        r: ct.r,
        r_prime: ct_prime.r,
        e_value,
        scale_estimate: ct.r.powf(n / 2.0 - 1.0) * u.powi(3) / du,
        envelope_law: ct.r.powf(1.5 * n - 1.0) / spec.lambda_l.sqrt(),
        asymptote_c2a2: asymptote_c2a2(spec, phase),
    })
}

/// Tunes both cutoffs on branch `m` and evaluates the functional.
pub fn error_functional_tuned(spec: &PotentialSpec, phase: &ZeroEnergyPhase, r: f64, r_prime: f64, m: u32) -> Result<ErrorEstimate> {
    let ct = tune_counterterm(spec, phase, r, m)?;
    let ctp = tune_counterterm(spec, phase, r_prime, m)?;
    error_functional(spec, phase, &ct, &ctp)
}

/// max |E(R'', R''/2)| over one local oscillation period around R.
pub fn error_envelope(spec: &PotentialSpec, phase: &ZeroEnergyPhase, r: f64, m: u32) -> Result<f64> {
    let n = spec.n as f64;
    let period = if spec.n == 2 {
        PI / (spec.lambda_l - 0.25).sqrt()
    } else {
        // theta = c R^(1-n/2); d theta/d ln R = -(n/2-1) theta
        let c = spec.lambda_l.sqrt() / (n / 2.0 - 1.0);
        PI / ((n / 2.0 - 1.0) * c * r.powf(1.0 - n / 2.0))
    };
    let mut best: f64 = 0.0;
    for i in 0..16 {
        let rr = r * (period * (i as f64 / 15.0 - 0.5)).exp();
        if let Ok(e) = error_functional_tuned(spec, phase, rr, 0.5 * rr, m) {
            best = best.max(e.e_value.abs());
        }
    }
    Ok(best)
}

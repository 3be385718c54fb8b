//! Closed-form zero-energy solutions of u'' + lambda_L u/x^n = 0, their
//! phases, scattering lengths and the n = 2 bound-state spectrum.
//!
//! Conventions:
//! * n = 2: u = sqrt(x) cos(nu ln x + phi)
//! * n >= 3: u -> x^(n/4) cos(c x^(1-n/2) + phi) as x -> 0, c = sqrt(lambda_L)/(n/2 - 1),
//!   extended to all x by the Bessel solution sqrt(x) Z_a(c x^(1-n/2)), a = 1/(n-2).
//!
//! Differentiating the n >= 3 form gives
//! u'/u = n/(4x) + sqrt(lambda_L) x^(-n/2) tan(theta) (plus sign), which is the
//! sign consistent with a = sqrt(lambda_L) tan(phi) for n = 4.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::model::{nu_of, PotentialSpec, Tolerances};
use crate::solver::{reduce_half_pi, BoundStateResult};
use crate::specfun::{bessel_j, bessel_y_int, gamma, im_log_gamma_one_plus_i};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseConvention {
    /// sqrt(x) cos(nu ln x + phi)
    LogPeriodic,
    /// x^(n/4) cos(c x^(1-n/2) + phi)
    PowerLaw,
}

/// Zero-energy short-distance phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroEnergyPhase {
    pub n: u32,
    /// Reduced to (-pi/2, pi/2].
    pub phi: f64,
    /// Unreduced representative.
    pub phi_raw: f64,
    pub convention: PhaseConvention,
}

impl ZeroEnergyPhase {
    pub fn new(n: u32, phi_raw: f64) -> Self {
        let convention = if n == 2 { PhaseConvention::LogPeriodic } else { PhaseConvention::PowerLaw };
        ZeroEnergyPhase { n, phi: reduce_half_pi(phi_raw), phi_raw, convention }
    }

    /// Same physics, representative shifted by a multiple of pi so that it is
    /// closest to `target`.
    pub fn with_raw_near(self, target: f64) -> Self {
        let shift = ((target - self.phi) / PI).round();
        ZeroEnergyPhase { phi_raw: self.phi + shift * PI, ..self }
    }
}

/// Observable used to fix the phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    ScatteringLength(f64),
    PhaseAtK { k_ref: f64, delta_ref: f64 },
    /// E = -kappa^2 in units of 1/(2 M r0^2).
    BoundStateEnergy(f64),
}

fn check(spec: &PotentialSpec, phase: &ZeroEnergyPhase, x: f64) -> Result<()> {
    if spec.n != phase.n {
        return domain(format!("phase for n = {} used with n = {}", phase.n, spec.n));
    }
    if !(x > 0.0) {
        return domain(format!("radius x = {x} must be positive"));
    }
    if spec.n == 2 {
        nu_of(spec.lambda_l)?;
    }
    Ok(())
}

fn c_coef(spec: &PotentialSpec) -> f64 {
    spec.lambda_l.sqrt() / (spec.n as f64 / 2.0 - 1.0)
}

/// Argument of the short-distance cosine without the phase.
fn theta0(spec: &PotentialSpec, x: f64) -> f64 {
    if spec.n == 2 {
        (spec.lambda_l - 0.25).sqrt() * x.ln()
    } else {
        c_coef(spec) * x.powf(1.0 - spec.n as f64 / 2.0)
    }
}

/// sqrt(x) Z(z) with Z a Bessel combination; returns (u, u').
fn bessel_solution(spec: &PotentialSpec, phi: f64, x: f64) -> Result<(f64, f64)> {
    let n = spec.n as f64;
    let a = 1.0 / (n - 2.0);
    let beta = a * PI;
    let c = c_coef(spec);
    let z = c * x.powf(1.0 - n / 2.0);
    let psi = phi + 0.5 * beta + 0.25 * PI;
    let rho = (0.5 * PI * c).sqrt();
    let (zv, zd) = if spec.n == 3 {
        let j = bessel_j(a, z)?;
        let y = bessel_y_int(1, z)?;
        let (s, co) = psi.sin_cos();
        (rho * (co * j.value - s * y.value), rho * (co * j.derivative_value - s * y.derivative_value))
    } else {
        let jp = bessel_j(a, z)?;
        let jm = bessel_j(-a, z)?;
        let ca = rho * (beta - psi).sin() / beta.sin();
        let cb = rho * psi.sin() / beta.sin();
        (ca * jp.value + cb * jm.value, ca * jp.derivative_value + cb * jm.derivative_value)
    };
    let sx = x.sqrt();
    let dz = -(n / 2.0 - 1.0) * z / x;
    Ok((sx * zv, 0.5 / sx * zv + sx * zd * dz))
}

/// Exact zero-energy wavefunction and derivative at x for phase phi.
pub fn zero_energy_wavefunction(spec: &PotentialSpec, phase: &ZeroEnergyPhase, x: f64) -> Result<(f64, f64)> {
    check(spec, phase, x)?;
    wavefunction_phi(spec, phase.phi_raw, x)
}

fn wavefunction_phi(spec: &PotentialSpec, phi: f64, x: f64) -> Result<(f64, f64)> {
    match spec.n {
        2 => {
            let nu = (spec.lambda_l - 0.25).sqrt();
            let th = nu * x.ln() + phi;
            let (s, c) = th.sin_cos();
            let sx = x.sqrt();
            Ok((sx * c, (0.5 * c - nu * s) / sx))
        }
        4 => {
            let sl = spec.lambda_l.sqrt();
            let th = sl / x + phi;
            let (s, c) = th.sin_cos();
            Ok((x * c, c + sl * s / x))
        }
        _ => bessel_solution(spec, phi, x),
    }
}

/// u'/u of the exact zero-energy solution (canonical convention).
pub fn exterior_log_derivative(spec: &PotentialSpec, phase: &ZeroEnergyPhase, x: f64) -> Result<f64> {
    let (u, du) = zero_energy_wavefunction(spec, phase, x)?;
    if u.abs() <= 1e-13 * du.abs() * x {
        return Err(Error::Pole { x });
    }
    Ok(du / u)
}

/// Closed-form log-derivative from the short-distance form, with the sign of
/// the tan term as obtained by differentiation (`printed_sign = false`) or as
/// printed in the reference formula (`printed_sign = true`). Exact for n = 2, 4.
pub fn closed_form_log_derivative(spec: &PotentialSpec, phase: &ZeroEnergyPhase, x: f64, printed_sign: bool) -> Result<f64> {
    check(spec, phase, x)?;
    let th = theta0(spec, x) + phase.phi_raw;
    if spec.n == 2 {
        let nu = (spec.lambda_l - 0.25).sqrt();
        return Ok((0.5 - nu * th.tan()) / x);
    }
    let n = spec.n as f64;
    let s = if printed_sign { -1.0 } else { 1.0 };
    Ok(n / (4.0 * x) + s * spec.lambda_l.sqrt() * x.powf(-n / 2.0) * th.tan())
}

/// a_4 = sqrt(lambda_L) tan(phi_4).
pub fn scattering_length_n4(lambda_l: f64, phase: &ZeroEnergyPhase) -> Result<f64> {
    if phase.n != 4 {
        return domain("scattering_length_n4 needs an n = 4 phase");
    }
    let c = phase.phi.cos();
    if c.abs() < 1e-15 {
        return Err(Error::Infeasible("phi_4 at pi/2: infinite scattering length (unitary limit)".into()));
    }
    Ok(lambda_l.sqrt() * phase.phi.tan())
}

/// Scattering length of the exact solution for any n >= 4.
pub fn scattering_length(spec: &PotentialSpec, phase: &ZeroEnergyPhase) -> Result<f64> {
    check(spec, phase, 1.0)?;
    if spec.n < 4 {
        return domain("scattering length needs n >= 4");
    }
    if spec.n == 4 {
        return scattering_length_n4(spec.lambda_l, phase);
    }
    let n = spec.n as f64;
    let a = 1.0 / (n - 2.0);
    let beta = a * PI;
    let psi = phase.phi + 0.5 * beta + 0.25 * PI;
    let sb = psi.sin();
    if sb.abs() < 1e-15 {
        return Err(Error::Infeasible("infinite scattering length".into()));
    }
    let ratio = (beta - psi).sin() / sb;
    let c = c_coef(spec);
    Ok(-ratio * (0.5 * c).powf(2.0 * a) * gamma(1.0 - a) / gamma(1.0 + a))
}

/// Phase whose exact solution has log-derivative `l` at radius x.
pub fn phase_from_log_derivative(spec: &PotentialSpec, x: f64, l: f64) -> Result<ZeroEnergyPhase> {
    let probe = ZeroEnergyPhase::new(spec.n, 0.0);
    check(spec, &probe, x)?;
    // u(x; phi) = cos(phi) C(x) - sin(phi) S(x)
    let (c, dc) = wavefunction_phi(spec, 0.0, x)?;
    let (s, ds) = wavefunction_phi(spec, -0.5 * PI, x)?;
    let num = dc - l * c;
    let den = ds - l * s;
    let phi = reduce_half_pi(num.atan2(den));
    let raw_estimate = reduce_half_pi(phi + theta0(spec, x)) - theta0(spec, x);
    Ok(ZeroEnergyPhase::new(spec.n, phi).with_raw_near(raw_estimate))
}

/// Phase from u'(x)/u(x) given as a pair, robust at nodes of u.
pub fn phase_from_state(spec: &PotentialSpec, x: f64, u: f64, du: f64) -> Result<ZeroEnergyPhase> {
    let probe = ZeroEnergyPhase::new(spec.n, 0.0);
    check(spec, &probe, x)?;
    let (c, dc) = wavefunction_phi(spec, 0.0, x)?;
    let (s, ds) = wavefunction_phi(spec, -0.5 * PI, x)?;
    // cos(phi)(C' u - C u') = sin(phi)(S' u - S u')
    let num = dc * u - c * du;
    let den = ds * u - s * du;
    let phi = reduce_half_pi(num.atan2(den));
    let raw_estimate = reduce_half_pi(phi + theta0(spec, x)) - theta0(spec, x);
    Ok(ZeroEnergyPhase::new(spec.n, phi).with_raw_near(raw_estimate))
}

/// Bound-state decay constants kappa_m = 2 exp((phi_2 + Im ln Gamma(1+i nu) - (m+1/2) pi)/nu),
/// E_m = -kappa_m^2.
pub fn spectrum_n2(lambda_l: f64, phase: &ZeroEnergyPhase, m_range: std::ops::RangeInclusive<i32>) -> Result<Vec<BoundStateResult>> {
    if phase.n != 2 {
        return domain("spectrum_n2 needs an n = 2 phase");
    }
    let nu = nu_of(lambda_l)?;
    let g = im_log_gamma_one_plus_i(nu);
    Ok(m_range
        .map(|m| {
            let kappa = 2.0 * ((phase.phi_raw + g - (m as f64 + 0.5) * PI) / nu).exp();
            BoundStateResult { m: m.max(0) as u32, kappa, energy: -kappa * kappa, inward_mismatch: 0.0 }
        })
        .collect())
}

/// Spectrum index m (possibly negative) whose formula kappa is closest to `kappa` in log scale.
pub fn spectrum_index_near(lambda_l: f64, phase: &ZeroEnergyPhase, kappa: f64) -> Result<i32> {
    let nu = nu_of(lambda_l)?;
    let g = im_log_gamma_one_plus_i(nu);
    let m = (phase.phi_raw + g - nu * (0.5 * kappa).ln()) / PI - 0.5;
    Ok(m.round() as i32)
}

/// Fixes phi from one observable.
pub fn phase_from_observable(spec: &PotentialSpec, obs: Observable, tol: &Tolerances) -> Result<ZeroEnergyPhase> {
    spec.validate()?;
    match obs {
        Observable::ScatteringLength(a) => {
            if spec.n < 4 {
                return domain("scattering-length input needs n >= 4");
            }
            if spec.n == 4 {
                return Ok(ZeroEnergyPhase::new(4, (a / spec.lambda_l.sqrt()).atan()));
            }
            let n = spec.n as f64;
            let ai = 1.0 / (n - 2.0);
            let beta = ai * PI;
            let c = c_coef(spec);
            // (A, B) = (ratio, 1)
            let ratio = -a * gamma(1.0 + ai) / ((0.5 * c).powf(2.0 * ai) * gamma(1.0 - ai));
            let psi = (beta.sin()).atan2(ratio + beta.cos());
            Ok(ZeroEnergyPhase::new(spec.n, psi - 0.5 * beta - 0.25 * PI))
        }
        Observable::BoundStateEnergy(e) => {
            if spec.n != 2 {
                return domain("bound-state input needs n = 2");
            }
            if !(e < 0.0) {
                return domain("bound-state energy must be negative");
            }
            let nu = nu_of(spec.lambda_l)?;
            let kappa = (-e).sqrt();
            let phi = nu * (0.5 * kappa).ln() - im_log_gamma_one_plus_i(nu) + 0.5 * PI;
            Ok(ZeroEnergyPhase::new(2, phi))
        }
        Observable::PhaseAtK { k_ref, delta_ref } => crate::flow::phase_for_phase_shift(spec, k_ref, delta_ref, tol),
    }
}

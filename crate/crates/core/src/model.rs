//! Dimensionless problem definition.
//!
//! Lengths are measured in units of the curvature scale r0 and wavenumbers in
//! units of 1/r0, so the exterior equation reads
//! u'' + (eta^2 + lambda_L f(x)/x^n) u = 0.

use crate::error::{domain, Error, Result};

/// Long-range shape function multiplying the singular tail.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Unity,
    /// Samples (x, f(x)) sorted by x. The first sample must sit at x = 0 with f = 1.
    Tabulated(Vec<(f64, f64)>),
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::Unity => Ok(()),
            Profile::Tabulated(s) => {
                if s.len() < 2 {
                    return domain("tabulated profile needs at least two samples");
                }
                if s[0].0.abs() > 1e-12 || (s[0].1 - 1.0).abs() > 1e-12 {
                    return domain("tabulated profile must start with f(0) = 1");
                }
                if s.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return domain("tabulated profile abscissae must increase");
                }
                if s.iter().any(|p| !p.1.is_finite()) {
                    return domain("tabulated profile values must be finite");
                }
                Ok(())
            }
        }
    }

    /// f(x), interpolated with a local four-point cubic. Held constant past the
    /// last sample.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Unity => 1.0,
            Profile::Tabulated(s) => {
                let n = s.len();
                if x <= s[0].0 {
                    return 1.0;
                }
                if x >= s[n - 1].0 {
                    return s[n - 1].1;
                }
                let i = s.partition_point(|p| p.0 <= x) - 1;
                if n < 4 {
                    let (x0, f0) = s[i];
                    let (x1, f1) = s[i + 1];
                    return f0 + (f1 - f0) * (x - x0) / (x1 - x0);
                }
                let lo = i.saturating_sub(1).min(n - 4);
                let pts = &s[lo..lo + 4];
                let mut acc = 0.0;
                for (j, pj) in pts.iter().enumerate() {
                    let mut w = 1.0;
                    for (l, pl) in pts.iter().enumerate() {
                        if l != j {
                            w *= (x - pl.0) / (pj.0 - pl.0);
                        }
                    }
                    acc += w * pj.1;
                }
                acc
            }
        }
    }
}

/// Long-distance potential -lambda_L f(x)/x^n.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub n: u32,
    pub lambda_l: f64,
    pub profile: Profile,
    /// Physical curvature scale, only used for unit conversion.
    pub r0: f64,
}

impl PotentialSpec {
    /// Unity profile, r0 = 1.
    pub fn new(n: u32, lambda_l: f64) -> Result<Self> {
        let s = PotentialSpec { n, lambda_l, profile: Profile::Unity, r0: 1.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return domain(format!("n = {} but the tail must have n >= 2", self.n));
        }
        if !(self.lambda_l > 0.0) || !self.lambda_l.is_finite() {
            return domain(format!("lambda_L = {} must be positive", self.lambda_l));
        }
        if self.n == 2 && self.lambda_l <= 0.25 {
            return domain(format!("n = 2 requires lambda_L > 1/4, got {}", self.lambda_l));
        }
        if !(self.r0 > 0.0) {
            return domain("r0 must be positive");
        }
        self.profile.validate()
    }

    /// The tail term lambda_L f(x)/x^n.
    #[inline]
    pub fn tail(&self, x: f64) -> f64 {
        self.lambda_l * self.profile.eval(x) / x.powi(self.n as i32)
    }
}

/// Square-well regulator of radius R and depth lambda_S.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Counterterm {
    pub r: f64,
    pub lambda_s: f64,
    pub branch: u32,
}

impl Counterterm {
    /// Builds a counterterm and assigns the branch from H = sqrt(lambda_S) R.
    pub fn from_depth(r: f64, lambda_s: f64) -> Result<Self> {
        if !(r > 0.0) || !(lambda_s >= 0.0) || !lambda_s.is_finite() {
            return domain(format!("invalid counterterm R = {r}, lambda_S = {lambda_s}"));
        }
        let h = lambda_s.sqrt() * r;
        Ok(Counterterm { r, lambda_s, branch: (h / std::f64::consts::PI).floor() as u32 })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.lambda_s.sqrt() * self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyKind {
    Scattering,
    /// Bound state with eta = i kappa.
    Bound { kappa: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPoint {
    pub eta: f64,
    pub kind: EnergyKind,
}

impl EnergyPoint {
    pub fn scattering(eta: f64) -> Self {
        EnergyPoint { eta, kind: EnergyKind::Scattering }
    }

    pub fn zero() -> Self {
        Self::scattering(0.0)
    }

    pub fn bound(kappa: f64) -> Self {
        EnergyPoint { eta: 0.0, kind: EnergyKind::Bound { kappa } }
    }

    /// eta^2 for scattering, -kappa^2 for bound states.
    #[inline]
    pub fn eta_sq(&self) -> f64 {
        match self.kind {
            EnergyKind::Scattering => self.eta * self.eta,
            EnergyKind::Bound { kappa } => -kappa * kappa,
        }
    }

    /// Energy E = eta^2/(2M r0^2) in physical units.
    pub fn energy(&self, mass: f64, r0: f64) -> f64 {
        self.eta_sq() / (2.0 * mass * r0 * r0)
    }
}

/// Integration and root-finding tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub ode_rel_tol: f64,
    pub root_tol: f64,
    pub phase_tol: f64,
    pub points_per_wavelength: u32,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { ode_rel_tol: 1e-10, root_tol: 1e-12, phase_tol: 1e-6, points_per_wavelength: 40 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.ode_rel_tol) || !pos(self.root_tol) || !pos(self.phase_tol) {
            return domain("tolerances must be strictly positive");
        }
        if self.points_per_wavelength < 16 {
            return Err(Error::Domain(format!(
                "points_per_wavelength = {} is below the minimum of 16",
                self.points_per_wavelength
            )));
        }
        Ok(())
    }
}

/// (r, k) -> (x, eta) = (r/r0, k r0).
pub fn to_dimensionless(r: f64, k: f64, spec: &PotentialSpec) -> Result<(f64, f64)> {
    if !(spec.r0 > 0.0) {
        return domain("r0 must be positive");
    }
    if r < 0.0 {
        return domain("r must be non-negative");
    }
    Ok((r / spec.r0, k * spec.r0))
}

/// Inverse of [`to_dimensionless`].
pub fn from_dimensionless(x: f64, eta: f64, spec: &PotentialSpec) -> Result<(f64, f64)> {
    if !(spec.r0 > 0.0) {
        return domain("r0 must be positive");
    }
    Ok((x * spec.r0, eta / spec.r0))
}

/// nu = sqrt(lambda_L - 1/4) for the strong n = 2 case.
pub fn nu_of(lambda_l: f64) -> Result<f64> {
    if !(lambda_l > 0.25) {
        return domain(format!("lambda_L = {lambda_l} is not above 1/4"));
    }
    Ok((lambda_l - 0.25).sqrt())
}

/// (2/n) sqrt(lambda_L f(x)) / x^(n/2 - 1). Much larger than one means the
/// short-distance WKB form is reliable.
pub fn wkb_phase_scale(spec: &PotentialSpec, x: f64) -> f64 {
    let n = spec.n as f64;
    (2.0 / n) * (spec.lambda_l * spec.profile.eval(x)).sqrt() / x.powf(n / 2.0 - 1.0)
}

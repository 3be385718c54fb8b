//! Weak-coupling expansion of the n = 4 scattering length and Born iterates
//! of the zero-energy wavefunction.

use crate::error::{domain, Error, Result};
use crate::model::Counterterm;
use crate::quad::integrate;
use crate::zero_energy::ZeroEnergyPhase;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakCouplingA4 {
    pub value: f64,
    /// R (lambda_L/R^2)^2, size of the first dropped term.
    pub error_bar: f64,
    /// lambda_L/R^2.
    pub indicator: f64,
    /// [R(1 - t), -(1 + t + t^2)/(3R)], so value = c0 + c1 lambda_L.
    pub terms: [f64; 2],
}

fn tan_ratio(ct: &Counterterm) -> Result<f64> {
    let h = ct.h();
    if h.cos().abs() < 1e-12 {
        return Err(Error::Pole { x: ct.r });
    }
    Ok(if h == 0.0 { 1.0 } else { h.tan() / h })
}

/// a4/R = (1 - t) - (1 + t + t^2) lambda_L/(3R^2), t = tan(H)/H.
pub fn a4_weak_coupling(ct: &Counterterm, lambda_l: f64) -> Result<WeakCouplingA4> {
    if !(lambda_l >= 0.0) || !(ct.r > 0.0) {
        return domain("need lambda_L >= 0 and R > 0");
    }
    let t = tan_ratio(ct)?;
    let r = ct.r;
    let c0 = r * (1.0 - t);
    let c1 = -(1.0 + t + t * t) / (3.0 * r);
    let ind = lambda_l / (r * r);
    Ok(WeakCouplingA4 { value: c0 + c1 * lambda_l, error_bar: r * ind * ind, indicator: ind, terms: [c0, c1] })
}

/// Exact n = 4 scattering length for a square well plus 1/x^4 tail, both
/// zero-energy solutions matched at R. Stays finite as lambda_L -> 0.
pub fn a4_exact(ct: &Counterterm, lambda_l: f64) -> Result<f64> {
    if !(lambda_l >= 0.0) || !(ct.r > 0.0) {
        return domain("need lambda_L >= 0 and R > 0");
    }
    let r = ct.r;
    let h = ct.h();
    if h.sin().abs() < 1e-300 {
        return Err(Error::Pole { x: r });
    }
    // g = R u'/u of the interior solution
    let g = if h == 0.0 { 1.0 } else { h / h.tan() };
    let x = r * (g - 1.0);
    let s = lambda_l.sqrt();
    let y = s / r;
    let tan_y = y.tan();
    let tau_over_s = if y == 0.0 { 1.0 / r } else { tan_y / (y * r) };
    Ok((x - s * tan_y) / (1.0 + x * tau_over_s))
}

/// x cos(sqrt(lambda)/x + phi)/cos(phi), normalised to the asymptote x - a4.
pub fn exact_zero_energy_n4(phase: &ZeroEnergyPhase, lambda_l: f64, x: f64) -> Result<f64> {
    if phase.n != 4 {
        return domain("exact form needs n = 4");
    }
    let c = phase.phi.cos();
    if c == 0.0 {
        return Err(Error::Pole { x });
    }
    Ok(x * (lambda_l.sqrt() / x + phase.phi).cos() / c)
}

/// Born series around the free solution x - a4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbativeSeries {
    pub a4: f64,
    pub lambda_l: f64,
}

impl PerturbativeSeries {
    pub fn new(phase: &ZeroEnergyPhase, lambda_l: f64) -> Result<Self> {
        if phase.n != 4 {
            return domain("Born iterates need n = 4");
        }
        if !(lambda_l >= 0.0) {
            return domain("lambda_L must be non-negative");
        }
        Ok(PerturbativeSeries { a4: lambda_l.sqrt() * phase.phi.tan(), lambda_l })
    }

    /// u_j(x) alone.
    pub fn iterate(&self, j: u32, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return domain("radius must be positive");
        }
        if j == 0 {
            return Ok(x - self.a4);
        }
        // t = 1/x': -int_0^{1/x} (t - x t^2) u_{j-1}(1/t) dt
        let mut failed = None;
        let f = |t: f64| {
            if t == 0.0 {
                // (t - x t^2) u(1/t) -> 1 for j - 1 = 0, -> 0 otherwise
                return if j == 1 { 1.0 } else { 0.0 };
            }
            match self.iterate(j - 1, 1.0 / t) {
                Ok(v) => (t - x * t * t) * v,
                Err(e) => {
                    failed = Some(e);
                    0.0
                }
            }
        };
        let tol = if j == 1 { 1e-13 } else { 1e-10 };
        let (v, _) = integrate(f, 0.0, 1.0 / x, 1e-300, tol)
            .map_err(|e| Error::Resolution(format!("Born iterate {j} diverges at x = {x}: {e}")))?;
        if let Some(e) = failed {
            return Err(e);
        }
        Ok(-v)
    }

    /// sum_{j <= order} lambda_L^j u_j(x).
    pub fn eval(&self, order: u32, x: f64) -> Result<f64> {
        if order > 2 {
            return domain("order must be 0, 1 or 2");
        }
        let mut s = 0.0;
        for j in 0..=order {
            s += self.lambda_l.powi(j as i32) * self.iterate(j, x)?;
        }
        Ok(s)
    }
}

pub fn born_iterates(phase: &ZeroEnergyPhase, lambda_l: f64, order: u32, x: f64) -> Result<f64> {
    PerturbativeSeries::new(phase, lambda_l)?.eval(order, x)
}

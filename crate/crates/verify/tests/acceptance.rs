//! One PASS/FAIL line per acceptance criterion. Tolerances are pinned below.
//! INFO lines carry supplementary measurements.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{rngs::StdRng, Rng, SeedableRng};
use singflow::commands::fit_slope;
use singflow_verify::{geomspace, info, Report};
use singflow_core::flow::{lowest_branch, trace_flow, tune_counterterm, BranchPolicy, FlowSample, FlowSource};
use singflow_core::model::{Counterterm, EnergyPoint, PotentialSpec, Tolerances};
use singflow_core::perturbation::{a4_exact, a4_weak_coupling, exact_zero_energy_n4, PerturbativeSeries};
use singflow_core::solver::{
    bound_states_shooting, integrate_exterior, interior_state, phase_shift, reduce_half_pi, scattering_length_numeric, wronskian,
    BoundaryState,
};
use singflow_core::specfun::bessel_j;
use singflow_core::wkb::error_functional_tuned;
use singflow_core::zero_energy::{
    phase_from_observable, phase_from_state, scattering_length_n4, spectrum_index_near, spectrum_n2, zero_energy_wavefunction,
    Observable, ZeroEnergyPhase,
};

const CUTOFFS: [f64; 5] = [0.16, 0.08, 0.04, 0.02, 0.01];
const ANCHOR_TOL: f64 = 2e-4;
const CURVE_TOL: f64 = 0.01;
const RUNTIME_S: f64 = 30.0;
const PHI_TOL: f64 = 5e-3;
const SLOPE: f64 = 2.0;
const SLOPE_TOL: f64 = 0.3;
const FORMULA_TOL: f64 = 0.01;
const PERIOD_TOL: f64 = 1e-4;
const RATIO_TOL: f64 = 0.01;
const ENERGY_TOL: f64 = 0.02;
const A_TOL: f64 = 1e-5;
const WEAK_FACTOR: f64 = 5.0;
const WEAK_ZERO_TOL: f64 = 1e-12;
const WRONSKIAN_TOL: f64 = 1e-9;
const CLOSED_FORM_TOL: f64 = 1e-8;

fn s4() -> PotentialSpec {
    PotentialSpec::new(4, 1.0).unwrap()
}

fn tol() -> Tolerances {
    Tolerances::default()
}

fn tuned_lowest(spec: &PotentialSpec, ph: &ZeroEnergyPhase, r: f64) -> Counterterm {
    tune_counterterm(spec, ph, r, lowest_branch(spec, ph, r).unwrap()).unwrap()
}

fn anchored(delta: f64) -> ZeroEnergyPhase {
    phase_from_observable(&s4(), Observable::PhaseAtK { k_ref: 0.1, delta_ref: delta }, &tol()).unwrap()
}

fn criterion_1(rep: &mut Report) {
    let t0 = Instant::now();
    let spec = s4();
    let ph = anchored(0.1);
    let mut ks = geomspace(0.02, 0.3, 15);
    ks.push(0.1);
    let curves: Vec<Vec<f64>> = CUTOFFS
        .iter()
        .map(|&r| {
            let ct = tuned_lowest(&spec, &ph, r);
            ks.iter().map(|&k| phase_shift(&spec, &ct, k, &tol()).unwrap().delta).collect()
        })
        .collect();
    let anchor_err = curves.iter().map(|c| (c[ks.len() - 1] - 0.1).abs()).fold(0.0, f64::max);
    let mut spread: f64 = 0.0;
    for i in 0..ks.len() {
        for a in &curves {
            for b in &curves {
                spread = spread.max(reduce_half_pi(a[i] - b[i]).abs());
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    rep.line(
        1,
        anchor_err <= ANCHOR_TOL && spread <= CURVE_TOL && secs < RUNTIME_S,
        "natural-case phase shifts, five cutoffs",
        format!(
            "max |delta(0.1) - 0.1| = {anchor_err:.2e} (tol {ANCHOR_TOL:e}), max spread k <= 0.3 = {spread:.2e} (tol {CURVE_TOL}), {secs:.2} s (limit {RUNTIME_S} s)"
        ),
    );
}

fn criterion_2(rep: &mut Report) {
    let nat = anchored(0.1);
    let unnat = anchored(PI / 3.0);
    let dn = (nat.phi.tan() - (-101.298f64).tan()).abs();
    let du = reduce_half_pi(unnat.phi - reduce_half_pi(-98.954)).abs();
    info(2, format!("natural phi mod pi = {:.6}, tan = {:.6}; reference tan(-101.298) = {:.6}", nat.phi, nat.phi.tan(), (-101.298f64).tan()));
    info(2, format!("unnatural phi mod pi = {:.6}; reference -98.954 mod pi = {:.6}", unnat.phi, reduce_half_pi(-98.954)));
    let a_nat = scattering_length_n4(1.0, &nat).unwrap();
    info(2, format!("natural scattering length a = {a_nat:.6}; effective-range check k cot delta(0.1) = {:.6}", 0.1 / 0.1f64.tan()));
    rep.line(
        2,
        dn <= PHI_TOL && du <= PHI_TOL,
        "phase recovered from delta(0.1) anchors",
        format!("|tan diff| natural = {dn:.3e}, |phi diff| unnatural = {du:.3e} (tol {PHI_TOL:e})"),
    );
}

fn criterion_3(rep: &mut Report) {
    let spec = s4();
    let ks = geomspace(0.05, 0.5, 10);
    let logk: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, delta) in [("natural", 0.1), ("unnatural", PI / 3.0)] {
        let ph = anchored(delta);
        let cts: Vec<Counterterm> = CUTOFFS.iter().map(|&r| tune_counterterm(&spec, &ph, r, 1).unwrap()).collect();
        let curves: Vec<Vec<f64>> = cts.iter().map(|ct| ks.iter().map(|&k| phase_shift(&spec, ct, k, &tol()).unwrap().delta).collect()).collect();
        let mut slopes = Vec::new();
        for i in 0..4 {
            let ys: Vec<f64> = (0..ks.len()).map(|j| reduce_half_pi(curves[i][j] - curves[i + 1][j]).abs().ln()).collect();
            let s = fit_slope(&logk, &ys).unwrap_or(f64::NAN);
            ok &= (s - SLOPE).abs() <= SLOPE_TOL;
            slopes.push(format!("{s:.3}"));
            // first-order functional against the measured difference
            let e = error_functional_tuned(&spec, &ph, CUTOFFS[i], CUTOFFS[i + 1], 1).unwrap();
            let worst = (0..ks.len())
                .map(|j| {
                    let meas = reduce_half_pi(curves[i][j] - curves[i + 1][j]);
                    let pred = e.first_order_delta_diff(ks[j], curves[i][j]);
                    (meas / pred).abs().max((pred / meas).abs())
                })
                .fold(0.0, f64::max);
            info(
                3,
                format!(
                    "{name} ({}, {}): E = {:.4e}, first-order prediction within factor {worst:.2} of measured over k in [0.05, 0.5]",
                    CUTOFFS[i],
                    CUTOFFS[i + 1],
                    e.e_value
                ),
            );
        }
        parts.push(format!("{name} slopes [{}]", slopes.join(", ")));
        // size scaling of the functional
        let rs = geomspace(0.02, 0.2, 8);
        let es: Vec<f64> = rs.iter().map(|&r| error_functional_tuned(&spec, &ph, r, 0.5 * r, 1).unwrap().e_value.abs().ln()).collect();
        let lr: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
        info(3, format!("{name}: log-log slope of |E(R, R/2)| over R in [0.02, 0.2] = {:.3} (power law 3n/2 - 1 = 5)", fit_slope(&lr, &es).unwrap()));
    }
    rep.line(3, ok, "k^2 error law for four cutoff pairs", format!("{} (want {SLOPE} +/- {SLOPE_TOL})", parts.join("; ")));
}

fn preferred_h(s: &FlowSample) -> f64 {
    match s.preferred() {
        FlowSource::BranchFormulaB => s.formula_b.h,
        _ => s.formula_a.h,
    }
}

fn sample_at(spec: &PotentialSpec, ph: &ZeroEnergyPhase, r: f64, m: u32) -> FlowSample {
    trace_flow(spec, ph, (r, r), 1, BranchPolicy::FixedBranch(m)).unwrap().samples.remove(0)
}

/// (worst preferred-formula error, worst handoff mismatch). The handoff is
/// located by bisecting R to where the two error estimates are equal.
fn formula_fidelity(spec: &PotentialSpec, ph: &ZeroEnergyPhase, samples: &[FlowSample]) -> (f64, f64) {
    let mut worst: f64 = 0.0;
    let mut hand: f64 = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let Some(num) = &s.numeric else { continue };
        worst = worst.max((preferred_h(s) - num.h).abs() / num.h);
        let Some(p) = samples.get(i + 1) else { continue };
        if p.preferred() == s.preferred() || p.branch != s.branch {
            continue;
        }
        let d = |x: &FlowSample| x.a_error - x.b_error;
        let (mut lo, mut hi) = (s.r, p.r);
        let d_lo = d(s);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if (d(&sample_at(spec, ph, mid, s.branch)) > 0.0) == (d_lo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c = sample_at(spec, ph, 0.5 * (lo + hi), s.branch);
        if let Some(n) = &c.numeric {
            hand = hand.max((c.formula_a.h - c.formula_b.h).abs() / n.h);
        }
    }
    (worst, hand)
}

fn criterion_4(rep: &mut Report) {
    let spec = s4();
    let ph = anchored(0.1);
    let run = |m: u32| formula_fidelity(&spec, &ph, &trace_flow(&spec, &ph, (0.01, 0.3), 400, BranchPolicy::FixedBranch(m)).unwrap().samples);
    let (w1, h1) = run(1);
    for m in [3, 8] {
        let (w, h) = run(m);
        info(4, format!("branch {m}: worst closed-form error {:.3}%, handoff mismatch {:.3}%", 100.0 * w, 100.0 * h));
    }
    rep.line(
        4,
        w1 <= FORMULA_TOL && h1 <= FORMULA_TOL,
        "closed-form branch formulas vs numeric root, n=4, R in [0.01, 0.3]",
        format!("branch 1: worst error {:.3}%, handoff mismatch {:.3}% (tol {}%)", 100.0 * w1, 100.0 * h1, 100.0 * FORMULA_TOL),
    );
}

fn criterion_5(rep: &mut Report) {
    let spec = PotentialSpec::new(2, 1.25).unwrap();
    let ph = ZeroEnergyPhase::new(2, 0.0);
    let period = PI;
    let (r_lo, r_hi) = (0.5 * (-2.0 * period).exp(), 0.5);
    let pts = 241;
    // grid spacing divides the period exactly: 120 points per period
    let per = 120;
    let h_at = |tr: &[FlowSample], i: usize| tr[i].numeric.as_ref().map(|p| p.h).unwrap_or(f64::NAN);
    let cyc_m0 = lowest_branch(&spec, &ph, r_hi).unwrap() + 2;
    let cyc = trace_flow(&spec, &ph, (r_lo, r_hi), pts, BranchPolicy::FixedBoundStateCount(cyc_m0)).unwrap().samples;
    let fix = trace_flow(&spec, &ph, (r_lo, r_hi), pts, BranchPolicy::FixedBranch(2)).unwrap().samples;
    let mut cyc_dev: f64 = 0.0;
    let mut fix_dev: f64 = 0.0;
    let mut rhs_dev: f64 = 0.0;
    for i in 0..pts - per {
        let (a, b) = (h_at(&cyc, i), h_at(&cyc, i + per));
        if a.is_finite() && b.is_finite() {
            cyc_dev = cyc_dev.max(((a - b) / b).abs());
            let (ga, gb) = (a / a.tan(), b / b.tan());
            rhs_dev = rhs_dev.max((ga - gb).abs() / gb.abs().max(1.0));
        }
        fix_dev = fix_dev.max(((h_at(&fix, i) - h_at(&fix, i + per)) / h_at(&fix, i + per)).abs());
    }
    info(5, format!("fixed branch 2: max relative change of H over one period = {fix_dev:.2e}"));
    info(5, format!("bound-state-count policy: max change of H cot H over one period = {rhs_dev:.2e}; branch drops by one per period"));
    let (w, h) = formula_fidelity(&spec, &ph, &fix);
    let (wc, hc) = formula_fidelity(&spec, &ph, &cyc);
    info(5, format!("closed forms: fixed branch worst {:.3}% (handoff {:.3}%), counting policy worst {:.3}% (handoff {:.3}%)", 100.0 * w, 100.0 * h, 100.0 * wc, 100.0 * hc));
    rep.line(
        5,
        cyc_dev <= PERIOD_TOL && w.max(wc) <= FORMULA_TOL,
        "n=2 limit cycle under fixed bound-state count",
        format!("max relative change of H over one period = {cyc_dev:.3e} (tol {PERIOD_TOL:e}); closed forms worst {:.3}% (tol {}%)", 100.0 * w.max(wc), 100.0 * FORMULA_TOL),
    );
}

fn criterion_6(rep: &mut Report) {
    let mut ok = true;
    let mut parts = Vec::new();
    for nu in [1.0f64, 2.0] {
        let lam = nu * nu + 0.25;
        let spec = PotentialSpec::new(2, lam).unwrap();
        let ph = ZeroEnergyPhase::new(2, 0.3);
        let r = 1e-3;
        let ct = tune_counterterm(&spec, &ph, r, lowest_branch(&spec, &ph, r).unwrap() + 2).unwrap();
        let geo = (-PI / nu).exp();
        let states = bound_states_shooting(&spec, &ct, (2.0 * geo.powi(4) * 0.9, 2.0), &tol()).unwrap();
        let ratio_err = states.windows(2).map(|w| (w[1].kappa / w[0].kappa / geo - 1.0).abs()).fold(0.0, f64::max);
        let mut e_err: f64 = 0.0;
        for s in states.iter().filter(|s| s.kappa * r < 1e-3) {
            let idx = spectrum_index_near(lam, &ph, s.kappa).unwrap();
            let k = spectrum_n2(lam, &ph, idx..=idx).unwrap()[0].kappa;
            e_err = e_err.max((k * k / (s.kappa * s.kappa) - 1.0).abs());
        }
        ok &= states.len() >= 3 && ratio_err <= RATIO_TOL && e_err <= ENERGY_TOL;
        parts.push(format!("nu={nu}: {} states, ratio err {:.2e}, energy err {:.2e}", states.len(), ratio_err, e_err));
    }
    rep.line(6, ok, "geometric n=2 spectrum", format!("{} (tol {RATIO_TOL}, {ENERGY_TOL})", parts.join("; ")));
}

fn criterion_7(rep: &mut Report) {
    let spec = s4();
    let mut rng = StdRng::seed_from_u64(20240917);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let ls: f64 = rng.gen_range(50.0..5000.0);
        let r: f64 = rng.gen_range(0.02..0.2);
        let ct = Counterterm::from_depth(r, ls).unwrap();
        let st = interior_state(&ct, &EnergyPoint::zero()).unwrap();
        let ph = phase_from_state(&spec, r, st.u, st.du).unwrap();
        let a = scattering_length_n4(1.0, &ph).unwrap();
        let a_num = scattering_length_numeric(&spec, &ct, &tol()).unwrap();
        worst = worst.max((a_num - a).abs() / a.abs().max(1.0));
    }
    rep.line(7, worst <= A_TOL, "ODE intercept vs sqrt(lambda) tan(phi), 20 random wells", format!("worst error {worst:.2e} (tol {A_TOL:e})"));
}

fn criterion_8(rep: &mut Report) {
    let mut worst_ratio: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    let mut zero_err: f64 = 0.0;
    for r in [0.2, 0.5, 1.0] {
        for h in [0.3, 0.9, 1.3, 2.5] {
            let ct = Counterterm::from_depth(r, (h / r) * (h / r)).unwrap();
            let w0 = a4_weak_coupling(&ct, 0.0).unwrap().value;
            zero_err = zero_err.max((w0 - a4_exact(&ct, 0.0).unwrap()).abs() / w0.abs());
            for x in [1e-4, 1e-3, 1e-2] {
                let lam = x * r * r;
                let exact = a4_exact(&ct, lam).unwrap();
                let rel = (a4_weak_coupling(&ct, lam).unwrap().value - exact).abs() / exact.abs();
                worst_ratio = worst_ratio.max(rel / (x * x));
                worst_abs = worst_abs.max((rel * exact.abs() / r) / (x * x));
            }
        }
    }
    info(8, format!("max |error|/R / (lambda/R^2)^2 = {worst_abs:.3}; the relative form is inflated where a4 -> 0 as sqrt(lambda_S) R -> 0"));
    rep.line(
        8,
        worst_ratio <= WEAK_FACTOR && zero_err <= WEAK_ZERO_TOL,
        "weak-coupling scattering length",
        format!("max rel err / (lambda/R^2)^2 = {worst_ratio:.3} (limit {WEAK_FACTOR}), lambda=0 error {zero_err:.1e} (tol {WEAK_ZERO_TOL:e})"),
    );
}

fn criterion_9(rep: &mut Report) {
    let lam: f64 = 1.0;
    let s = lam.sqrt();
    let ph = ZeroEnergyPhase::new(4, -0.8512923177);
    let series = PerturbativeSeries::new(&ph, lam).unwrap();
    let errs = |x: f64| -> [f64; 3] {
        let ex = exact_zero_energy_n4(&ph, lam, x).unwrap();
        [0, 1, 2].map(|o| (series.eval(o, x).unwrap_or(f64::INFINITY) - ex).abs())
    };
    let outer = geomspace(3.0 * s, 10.0 * s, 25);
    let reduce_ok = outer.iter().all(|&x| {
        let e = errs(x);
        e[0] > e[1] && e[1] > e[2]
    });
    let inner = geomspace(0.1 * s, s / 3.0, 25);
    let mut sup = [0.0f64; 3];
    let mut pointwise = 0;
    for &x in &inner {
        let e = errs(x);
        for j in 0..3 {
            sup[j] = sup[j].max(e[j]);
        }
        if e[0] < e[1] && e[1] < e[2] {
            pointwise += 1;
        }
    }
    info(9, format!("pointwise growth holds at {pointwise}/{} inner points", inner.len()));
    let grow_ok = sup[0] < sup[1] && sup[1] < sup[2];
    rep.line(
        9,
        reduce_ok && grow_ok,
        "Born orders vs exact n=4 solution",
        format!(
            "monotone reduction on [3, 10]: {reduce_ok}; sup errors on [0.1, 1/3]: {:.3e} < {:.3e} < {:.3e}",
            sup[0], sup[1], sup[2]
        ),
    );
}

fn criterion_10(rep: &mut Report) {
    let mut rng = StdRng::seed_from_u64(7);
    // Wronskian constancy
    let mut w_err: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(2..7u32);
        let spec = PotentialSpec::new(n, rng.gen_range(0.5..4.0)).unwrap();
        let ep = EnergyPoint::scattering(rng.gen_range(0.0..2.0));
        let a0 = BoundaryState::new(0.3, 1.0, 0.0);
        let b0 = BoundaryState::new(0.3, 0.0, 1.0);
        for x in [1.0, 5.0, 20.0] {
            let a = integrate_exterior(&spec, a0, &ep, x, &tol()).unwrap();
            let b = integrate_exterior(&spec, b0, &ep, x, &tol()).unwrap();
            w_err = w_err.max((wronskian(&a, &b).unwrap() - 1.0).abs());
        }
    }
    // Bessel identity J_v J'_{-v} - J'_v J_{-v} = -2 sin(v pi)/(pi z)
    let mut b_err: f64 = 0.0;
    for _ in 0..200 {
        let nu: f64 = rng.gen_range(0.05..2.95);
        if (nu - nu.round()).abs() < 0.05 {
            continue;
        }
        let z: f64 = rng.gen_range(0.1..40.0);
        let (a, b) = (bessel_j(nu, z).unwrap(), bessel_j(-nu, z).unwrap());
        let w = a.value * b.derivative_value - a.derivative_value * b.value;
        let want = -2.0 * (nu * PI).sin() / (PI * z);
        b_err = b_err.max((w - want).abs() / want.abs());
    }
    // closed-form zero-energy solutions
    let mut c_err: f64 = 0.0;
    for (n, lam) in [(2u32, 1.25), (4, 1.0)] {
        let spec = PotentialSpec::new(n, lam).unwrap();
        let ph = ZeroEnergyPhase::new(n, 0.4);
        let (u, du) = zero_energy_wavefunction(&spec, &ph, 0.05).unwrap();
        for x in [0.2, 0.6, 1.0] {
            let out = integrate_exterior(&spec, BoundaryState::new(0.05, u, du), &EnergyPoint::zero(), x, &tol()).unwrap();
            let (eu, edu) = zero_energy_wavefunction(&spec, &ph, x).unwrap();
            let scale = eu.abs() + x * edu.abs();
            c_err = c_err.max((out.u - eu).abs().max(x * (out.du - edu).abs()) / scale);
        }
    }
    // branch jump: neighbouring branches at one cutoff differ only inside the k^2 envelope
    let spec = s4();
    let ph = anchored(0.1);
    let r = 0.04;
    let mut env_ratio: f64 = 0.0;
    for m in 1..4 {
        let a = tune_counterterm(&spec, &ph, r, m).unwrap();
        let b = tune_counterterm(&spec, &ph, r, m + 1).unwrap();
        for k in [0.05, 0.1, 0.2, 0.3] {
            let d = reduce_half_pi(phase_shift(&spec, &a, k, &tol()).unwrap().delta - phase_shift(&spec, &b, k, &tol()).unwrap().delta);
            env_ratio = env_ratio.max(d.abs() / (k * k * r));
        }
    }
    let ok = w_err <= WRONSKIAN_TOL && b_err <= WRONSKIAN_TOL && c_err <= CLOSED_FORM_TOL && env_ratio <= 1.0;
    rep.line(
        10,
        ok,
        "property suites",
        format!(
            "Wronskian drift {w_err:.1e}, Bessel identity {b_err:.1e} (tol {WRONSKIAN_TOL:e}); closed-form regression {c_err:.1e} (tol {CLOSED_FORM_TOL:e}); branch-jump |d delta|/(k^2 R) max {env_ratio:.3} (limit 1)"
        ),
    );
}

#[test]
fn acceptance() {
    let mut rep = Report::default();
    criterion_1(&mut rep);
    criterion_2(&mut rep);
    criterion_3(&mut rep);
    criterion_4(&mut rep);
    criterion_5(&mut rep);
    criterion_6(&mut rep);
    criterion_7(&mut rep);
    criterion_8(&mut rep);
    criterion_9(&mut rep);
    criterion_10(&mut rep);
    println!("{}", rep.summary());
    assert!(rep.failed.is_empty(), "failing criteria: {:?}", rep.failed);
}

//! Self-check battery behind the CLI `validate` command. Each check reruns a
//! compact version of one library guarantee against an independent reference
//! and reports pass/fail together with the measured numbers. `fast` trades
//! Monte-Carlo paths and grid resolution for runtime.

use crate::cgf::{
    cgf_increment, cumulants, heston_ode_reference, joint_cgf, multi_cgf,
    rough_heston_adams_reference,
};
use crate::kernels::gamma_resolvent;
use crate::riccati::{comparison_bounds, solve_volterra, ConvexNonlinearity, Rv};
use crate::simulate::{
    empirical_cgf, mean_and_se, simulate_afi_thinning, simulate_afv, HawkesSpec, SimConfig,
};
use crate::{AffineModel, AfvModel, ForwardCurve, JumpLaw, JumpSpec, Kernel, Result, ScalingFamily};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn run_check(name: &str, body: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match body() {
        Ok((pass, detail)) => CheckResult {
            name: name.into(),
            pass,
            detail,
        },
        Err(e) => CheckResult {
            name: name.into(),
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn heston_model(rho: f64) -> Result<AffineModel> {
    let kernel = Kernel::exponential(0.3, 1.2)?;
    let curve = ForwardCurve::heston_implied(0.04, 0.05, 1.2)?;
    Ok(AfvModel::new(kernel, curve, rho)?.into())
}

fn desk_jumps() -> Result<JumpSpec> {
    JumpSpec::new(JumpLaw::dirac(1.0)?, JumpLaw::dirac(1.0)?, 0.25, 0.25)
}

fn desk_scaling() -> Result<ScalingFamily> {
    let s = 0.5_f64.sqrt();
    ScalingFamily::new(
        Kernel::exponential(1.0, 1.2)?,
        ForwardCurve::flat(0.04)?,
        JumpSpec::new(JumpLaw::dirac(s)?, JumpLaw::dirac(s)?, 0.3, 0.7)?,
    )
}

fn classical_cgf(fast: bool) -> Result<(bool, String)> {
    let dt = if fast { 2e-3 } else { 1e-3 };
    let tol = 1e-5;
    let model = heston_model(-0.7)?;
    let us: &[f64] = if fast { &[0.5] } else { &[0.1, 0.5, 0.9] };
    let mut worst = 0.0_f64;
    for &u in us {
        let got = cgf_increment(&model, u, 1.0, dt)?;
        let want = heston_ode_reference(u, -0.7, 0.3, 1.2, 0.05, 0.04, 1.0, dt)?.cgf;
        worst = worst.max((got - want).abs());
    }
    Ok((worst < tol, format!("max |CGF - ODE oracle| = {worst:.3e} (tol {tol:.1e})")))
}

fn rough_cgf(fast: bool) -> Result<(bool, String)> {
    let (dt, tol) = if fast { (2e-3, 2e-3) } else { (1e-3, 1e-3) };
    let kernel = Kernel::mittag_leffler(0.3, 0.6, 1.2)?;
    let curve = ForwardCurve::rough_heston_implied(0.04, 0.05, 1.2, 0.6)?;
    let model: AffineModel = AfvModel::new(kernel, curve, -0.7)?.into();
    let got = cgf_increment(&model, 0.5, 1.0, dt)?;
    let want = rough_heston_adams_reference(0.5, -0.7, 0.3, 0.6, 1.2, 0.05, 0.04, 1.0, dt)?.cgf;
    let gap = (got - want).abs();
    Ok((gap < tol, format!("|CGF - Adams oracle| = {gap:.3e} (tol {tol:.1e})")))
}

fn resolvent_identities(fast: bool) -> Result<(bool, String)> {
    let (horizon, dt): (f64, f64) = if fast { (10.0, 5e-3) } else { (20.0, 2e-3) };
    let tol = if fast { 1e-4 } else { 1e-5 };
    let n = (horizon / dt).round() as usize;

    let phi = Kernel::exponential(1.0, 1.7)?;
    let resolvent = gamma_resolvent(&phi, 0.5, n, dt)?;
    let closed = Kernel::exponential(1.0, 1.2)?;
    let mut worst = 0.0_f64;
    for i in 1..=n.min(4000) {
        let t = dt * i as f64;
        let gap = (resolvent.eval(t)? - closed.eval(t)?).abs() / closed.eval(t)?.max(1e-12);
        worst = worst.max(gap);
    }

    let constant = Kernel::constant(0.8)?;
    let const_res = gamma_resolvent(&constant, 0.5, n.min(2000), dt)?;
    let mut worst_const = 0.0_f64;
    for i in 1..=n.min(2000) {
        let t = dt * i as f64;
        let want = 0.8 * (0.4 * t).exp();
        worst_const = worst_const.max((const_res.eval(t)? - want).abs() / want);
    }

    let mut worst_laplace = 0.0_f64;
    for z in [0.5, 1.0, 2.0] {
        let lhs = resolvent.laplace(z)?;
        let k = phi.laplace(z)?;
        worst_laplace = worst_laplace.max((lhs - k / (1.0 - 0.5 * k)).abs());
    }
    let lap_tol = if fast { 1e-4 } else { 1e-5 };
    let pass = worst < tol && worst_const < tol && worst_laplace < lap_tol;
    Ok((
        pass,
        format!(
            "exp gap {worst:.3e}, const gap {worst_const:.3e} (tol {tol:.1e}); \
             Laplace residual {worst_laplace:.3e} (tol {lap_tol:.1e})"
        ),
    ))
}

fn comparison_sandwich(fast: bool) -> Result<(bool, String)> {
    let dt = if fast { 1e-2 } else { 2e-3 };
    let kernel = Kernel::exponential(0.3, 1.2)?;
    let h = Rv::new(0.5, -0.7)?;
    let a = |t: f64| -0.1 * (-t).exp();
    let sol = solve_volterra(&h, &kernel, &a, 1.0, dt)?;
    let bounds = comparison_bounds(&h, &kernel, &a, 1.0, dt)?;
    let ws = h.w_star()?;
    let mut violations = 0usize;
    for (i, (&f, &r1)) in sol.f.iter().zip(&bounds.bound).enumerate() {
        let t = dt * i as f64;
        if !(ws < r1 && r1 <= f + 1e-12 && (i == 0 || f < a(t))) {
            violations += 1;
        }
    }
    Ok((
        violations == 0,
        format!(
            "lower-case sandwich w* < r1 <= f < a: {violations} violations over {} nodes",
            sol.f.len()
        ),
    ))
}

fn mc_afv(fast: bool) -> Result<(bool, String)> {
    let (n_paths, dt) = if fast { (4_000, 5e-3) } else { (20_000, 2e-3) };
    let kernel = Kernel::exponential(0.3, 1.2)?;
    let curve = ForwardCurve::heston_implied(0.04, 0.05, 1.2)?;
    let afv = AfvModel::new(kernel, curve, -0.7)?;
    let batch = simulate_afv(&afv, &SimConfig::new(1.0, dt, n_paths, 42)?)?;
    let model: AffineModel = afv.into();

    let (mart, mart_se) = empirical_cgf(&batch.x, 1.0)?;
    let (got, se) = empirical_cgf(&batch.x, 0.5)?;
    let want = cgf_increment(&model, 0.5, 1.0, 1e-3)?;
    let gap = (got - want).abs();
    let pass = gap <= 3.0 * se && mart.abs() <= 3.0 * mart_se;
    Ok((
        pass,
        format!(
            "CGF(0.5): MC {got:.5} vs solver {want:.5} (gap {gap:.2e}, 3se {:.2e}); \
             martingale defect {mart:.2e} (3se {:.2e})",
            3.0 * se,
            3.0 * mart_se
        ),
    ))
}

fn hawkes_mean(fast: bool) -> Result<(bool, String)> {
    let n_paths = if fast { 5_000 } else { 20_000 };
    let hawkes = HawkesSpec::new(1.0, Kernel::exponential(1.0, 1.7)?, desk_jumps()?)?;
    let batch = simulate_afi_thinning(&hawkes, 1.0, n_paths, 42)?;
    let resolvent = Kernel::exponential(1.0, 1.2)?;
    let want = 1.0 + 0.5 * resolvent.primitive(1.0)?;
    let (mean, se) = mean_and_se(&batch.lambda)?;
    let gap = (mean - want).abs();
    Ok((
        gap <= 3.0 * se,
        format!("E[lambda_T]: MC {mean:.5} vs mu(1 + g*int kappa) = {want:.5} (gap {gap:.2e}, 3se {:.2e})", 3.0 * se),
    ))
}

fn hf_limit(fast: bool) -> Result<(bool, String)> {
    let fam = desk_scaling()?;
    let coarse = fam.r_gap_report(1e-2, 21, 21)?;
    let fine = fam.r_gap_report(1e-4, 21, 21)?;
    let monotone = fine.sup_value_gap < coarse.sup_value_gap;
    let order = (coarse.sup_value_gap / fine.sup_value_gap).ln() / 100.0_f64.ln();
    let order_ok = (0.35..=0.65).contains(&order);

    let dt = if fast { 1e-2 } else { 2e-3 };
    let report = fam.cgf_convergence_experiment(0.5, 1.0, dt, &[1e-1, 1e-2, 1e-3])?;
    let gaps: Vec<f64> = report.rows.iter().map(|r| r.riccati_gap).collect();
    let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
    let pass = monotone && order_ok && shrinking;
    Ok((
        pass,
        format!(
            "R-gap order {order:.3} (want ~0.5); Riccati gaps {:.2e} -> {:.2e} -> {:.2e}",
            gaps[0], gaps[1], gaps[2]
        ),
    ))
}

fn exact_identities(_fast: bool) -> Result<(bool, String)> {
    let dt = 1e-2;
    let model = heston_model(-0.7)?;
    let inc = cgf_increment(&model, 0.4, 0.5, dt)?;
    let multi = multi_cgf(&model, &[0.0, 0.25, 0.5], &[0.4, 0.4], dt)?;
    let joint = joint_cgf(&model, 0.4, &|_| 0.0, 0.5, 0.25, dt)?;
    let e0 = cgf_increment(&model, 0.0, 0.5, dt)?;
    let e1 = cgf_increment(&model, 1.0, 0.5, dt)?;
    let kernel = Kernel::exponential(0.3, 1.2)?;
    let trivial = gamma_resolvent(&kernel, 0.0, 100, dt)?;
    let mut res_gap = 0.0_f64;
    for i in 1..=100 {
        let t = dt * i as f64;
        res_gap = res_gap.max((trivial.eval(t)? - kernel.eval(t)?).abs());
    }
    let worst = (multi - inc)
        .abs()
        .max((joint - inc).abs())
        .max(e0.abs())
        .max(e1.abs())
        .max(res_gap);
    Ok((
        worst <= 1e-10,
        format!("multi/joint collapse, endpoint CGFs, gamma=0 resolvent: max defect {worst:.3e} (tol 1e-10)"),
    ))
}

fn afv_mean_identity(fast: bool) -> Result<(bool, String)> {
    let dt = if fast { 2e-3 } else { 1e-3 };
    let model = heston_model(-0.7)?;
    let (mean, var) = cumulants(&model, 1.0, dt)?;
    // ∫₀¹ξ₀ for the classical curve: θT + (V₀ − θ)(1 − e^{−λT})/λ
    let integral = 0.05 + (0.04 - 0.05) * (1.0 - (-1.2_f64).exp()) / 1.2;
    let gap = (mean - (-0.5 * integral)).abs();
    Ok((
        gap < 1e-6 && var > 0.0,
        format!("CGF' at 0: {mean:.8} vs -(1/2)∫ξ₀ = {:.8} (gap {gap:.2e}, tol 1e-6)", -0.5 * integral),
    ))
}

/// Run the full battery; `fast` uses coarser grids and fewer Monte-Carlo
/// paths (suitable for an interactive smoke check).
pub fn run_audit(fast: bool) -> Vec<CheckResult> {
    vec![
        run_check("classical-cgf-oracle", || classical_cgf(fast)),
        run_check("rough-cgf-oracle", || rough_cgf(fast)),
        run_check("resolvent-identities", || resolvent_identities(fast)),
        run_check("comparison-sandwich", || comparison_sandwich(fast)),
        run_check("mc-afv-vs-cgf", || mc_afv(fast)),
        run_check("hawkes-mean-intensity", || hawkes_mean(fast)),
        run_check("hf-limit-gaps", || hf_limit(fast)),
        run_check("exact-identities", || exact_identities(fast)),
        run_check("afv-mean-identity", || afv_mean_identity(fast)),
    ]
}

//! High-frequency scaling: an order-flow family whose marks shrink like √ε
//! while the event intensity grows like 1/ε converges to a forward-variance
//! diffusion. This module exposes the rescaled nonlinearity, the limit model
//! and quantitative convergence experiments.

use crate::cgf::{
    cgf_increment_with_grid, multi_cgf, quad_against_curve, AffineModel, AfiModel, AfvModel,
    ForwardCurve,
};
use crate::kernels::Kernel;
use crate::riccati::{
    solve_riccati, solve_riccati_multi, ConvexNonlinearity, JumpSpec, NonlinearityFamily,
    RLambda, Rv,
};
use crate::{Error, Real, Result};

/// Coefficients of the limit diffusion: p is the share of the (unit) total
/// mark second moment carried by the buy side, c = √(pγ₊² + (1−p)γ₋²) the
/// limit vol-of-vol factor and ρ = (pγ₊ − (1−p)γ₋)/c the limit leverage.
#[derive(Debug, Clone, Copy)]
pub struct LimitParams<T: Real> {
    pub p: T,
    pub c: T,
    pub rho: T,
}

/// ε-indexed family of order-flow models sharing the memory kernel κ and the
/// baseline curve ξ₀: at scale ε the marks are multiplied by √ε and the
/// baseline intensity by 1/ε. The base marks must carry unit total second
/// moment, which pins the limit coefficients.
#[derive(Debug, Clone)]
pub struct ScalingFamily<T: Real> {
    pub kernel: Kernel<T>,
    pub curve: ForwardCurve<T>,
    pub jumps: JumpSpec<T>,
}

fn validate_eps<T: Real>(eps: T) -> Result<()> {
    if !(eps > T::zero() && eps <= T::one() && eps.is_finite()) {
        return Err(Error::Domain(format!(
            "scaling parameter eps must lie in (0, 1], got {eps}"
        )));
    }
    Ok(())
}

impl<T: Real> ScalingFamily<T> {
    pub fn new(kernel: Kernel<T>, curve: ForwardCurve<T>, jumps: JumpSpec<T>) -> Result<Self> {
        if !kernel.is_decreasing() {
            return Err(Error::Domain(
                "scaling family: the memory kernel must be non-increasing".into(),
            ));
        }
        let total = jumps.law_plus.second_moment() + jumps.law_minus.second_moment();
        if (total - T::one()).abs() > T::of(1e-9) {
            return Err(Error::Domain(format!(
                "scaling family: total mark second moment must equal 1, got {total}; \
                 rescale the marks by 1/sqrt({total}) (JumpSpec::scaled_marks)"
            )));
        }
        Ok(ScalingFamily {
            kernel,
            curve,
            jumps,
        })
    }

    pub fn limit_params(&self) -> Result<LimitParams<T>> {
        let m2p = self.jumps.law_plus.second_moment();
        let m2m = self.jumps.law_minus.second_moment();
        let p = m2p / (m2p + m2m);
        let q = T::one() - p;
        let (gp, gm) = (self.jumps.gamma_plus, self.jumps.gamma_minus);
        let c2 = p * gp * gp + q * gm * gm;
        if !(c2 > T::zero()) {
            return Err(Error::Domain(
                "scaling family: degenerate limit, pγ₊² + (1−p)γ₋² must be positive".into(),
            ));
        }
        let c = c2.sqrt();
        Ok(LimitParams {
            p,
            c,
            rho: (p * gp - q * gm) / c,
        })
    }

    /// Forward-variance model reached in the ε → 0 limit: kernel cκ,
    /// correlation ρ, same forward curve.
    pub fn limit_model(&self) -> Result<AfvModel<T>> {
        let lp = self.limit_params()?;
        AfvModel::new(self.kernel.scale(lp.c)?, self.curve.clone(), lp.rho)
    }

    /// Concrete order-flow model at scale ε (marks √ε·x, curve ξ₀/ε).
    pub fn model_at(&self, eps: T) -> Result<AfiModel<T>> {
        validate_eps(eps)?;
        AfiModel::new(
            self.kernel.clone(),
            self.curve.scale(T::one() / eps)?,
            self.jumps.scaled_marks(eps.sqrt())?,
        )
    }

    /// H̃_ε(w) = ε⁻¹ R_λ^{√ε marks}(u, w), the nonlinearity of the rescaled
    /// Riccati equation (the solved g̃ = g_ε/ε pairs with the unscaled ξ₀).
    pub fn scaled_nonlinearity(&self, u: T, eps: T) -> Result<ScaledNonlinearity<T>> {
        validate_eps(eps)?;
        Ok(ScaledNonlinearity {
            inner: RLambda::new(u, self.jumps.scaled_marks(eps.sqrt())?)?,
            inv_eps: T::one() / eps,
        })
    }

    pub fn scaled_family(&self, eps: T) -> Box<NonlinearityFamily<'_, T>> {
        Box::new(move |u| {
            Ok(Box::new(self.scaled_nonlinearity(u, eps)?) as Box<dyn ConvexNonlinearity<T>>)
        })
    }

    /// |w*(H̃_ε) − w*(R_V)/c|, the gap between the rescaled root and its limit.
    pub fn w_star_gap(&self, u: T, eps: T) -> Result<T> {
        let lp = self.limit_params()?;
        let ws_eps = self.scaled_nonlinearity(u, eps)?.w_star()?;
        let ws_lim = Rv::new(u, lp.rho)?.w_star()? / lp.c;
        Ok((ws_eps - ws_lim).abs())
    }

    /// Sup-norm gaps between H̃_ε and the limit quadratic R_V(u, cw) — values
    /// and both partial derivatives — over a (u, w) ∈ [0,1] × [−1,0] grid.
    pub fn r_gap_report(&self, eps: T, n_u: usize, n_w: usize) -> Result<RGapReport<T>> {
        validate_eps(eps)?;
        if n_u < 2 || n_w < 2 {
            return Err(Error::Domain("r_gap_report: need at least a 2x2 grid".into()));
        }
        let lp = self.limit_params()?;
        let spec = self.jumps.scaled_marks(eps.sqrt())?;
        let m_x = spec.m_x();
        let inv_eps = T::one() / eps;
        let half = T::of(0.5);
        let (mut dv, mut du, mut dw) = (T::zero(), T::zero(), T::zero());
        for iu in 0..n_u {
            let u = T::of(iu as f64 / (n_u - 1) as f64);
            let h = RLambda::new(u, spec.clone())?;
            for iw in 0..n_w {
                let w = -T::of(iw as f64 / (n_w - 1) as f64);
                let eta = lp.c * w;
                let value_lim = half * (u * u - u) + lp.rho * u * eta + half * eta * eta;
                let du_exact = inv_eps
                    * (spec.law_plus.psi_deriv(u + w * spec.gamma_plus)
                        - spec.law_minus.psi_deriv(-u + w * spec.gamma_minus)
                        - m_x);
                dv = dv.max((h.eval(w) * inv_eps - value_lim).abs());
                du = du.max((du_exact - (u - half + lp.rho * eta)).abs());
                dw = dw.max((h.deriv(w) * inv_eps - lp.c * (lp.rho * u + eta)).abs());
            }
        }
        Ok(RGapReport {
            eps,
            sup_value_gap: dv,
            sup_du_gap: du,
            sup_dw_gap: dw,
        })
    }

    /// Sweep ε and compare the rescaled Riccati solution and CGF against the
    /// limit model at the same grid resolution. The fitted order is the
    /// log-log least-squares slope of the Riccati sup-gap in ε.
    pub fn cgf_convergence_experiment(
        &self,
        u: T,
        horizon: T,
        dt: T,
        eps_list: &[T],
    ) -> Result<ConvergenceReport<T>> {
        if eps_list.is_empty() {
            return Err(Error::Domain("cgf_convergence_experiment: empty eps list".into()));
        }
        let limit: AffineModel<T> = self.limit_model()?.into();
        let (limit_cgf, limit_grid) = cgf_increment_with_grid(&limit, u, horizon, dt)?;
        let mut rows = Vec::with_capacity(eps_list.len());
        for &eps in eps_list {
            let family = self.scaled_family(eps);
            let grid = solve_riccati(family.as_ref(), &self.kernel, u, horizon, dt)?;
            let mut sup = T::zero();
            for (a, b) in grid.g.iter().zip(&limit_grid.g) {
                sup = sup.max((*a - *b).abs());
            }
            let n = grid.g.len() - 1;
            let (g, gl) = (&grid.g, &grid.g_left);
            let cgf = quad_against_curve(&self.curve, dt, n, &|k| (gl[n - k], g[n - k - 1]))?;
            rows.push(ConvergenceRow {
                eps,
                riccati_gap: sup,
                cgf_gap: (cgf - limit_cgf).abs(),
            });
        }
        let fitted_order = fit_log_slope(
            &rows.iter().map(|r| r.eps).collect::<Vec<_>>(),
            &rows.iter().map(|r| r.riccati_gap).collect::<Vec<_>>(),
        )?;
        Ok(ConvergenceReport {
            rows,
            fitted_order,
            limit_cgf,
        })
    }

    /// Multi-increment analogue: (rescaled CGF, limit CGF) for the functional
    /// Σₖ uₖ(X_{t_{k+1}} − X_{t_k}).
    pub fn multi_cgf_gap(
        &self,
        times: &[T],
        u_vec: &[T],
        dt: T,
        eps: T,
    ) -> Result<(T, T)> {
        let family = self.scaled_family(eps);
        let grid = solve_riccati_multi(family.as_ref(), &self.kernel, times, u_vec, dt)?;
        let n = grid.g.len() - 1;
        let (g, gl) = (&grid.g, &grid.g_left);
        let scaled = quad_against_curve(&self.curve, dt, n, &|k| (gl[n - k], g[n - k - 1]))?;
        let limit: AffineModel<T> = self.limit_model()?.into();
        let lim = multi_cgf(&limit, times, u_vec, dt)?;
        Ok((scaled, lim))
    }
}

/// ε⁻¹ R_λ(u, ·) with marks scaled by √ε; converges to R_V(u, c·) as ε → 0.
#[derive(Debug, Clone)]
pub struct ScaledNonlinearity<T: Real> {
    inner: RLambda<T>,
    inv_eps: T,
}

impl<T: Real> ConvexNonlinearity<T> for ScaledNonlinearity<T> {
    fn eval(&self, w: T) -> T {
        self.inner.eval(w) * self.inv_eps
    }

    fn deriv(&self, w: T) -> T {
        self.inner.deriv(w) * self.inv_eps
    }

    fn as_dyn(&self) -> &dyn ConvexNonlinearity<T> {
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RGapReport<T: Real> {
    pub eps: T,
    pub sup_value_gap: T,
    pub sup_du_gap: T,
    pub sup_dw_gap: T,
}

#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow<T: Real> {
    pub eps: T,
    /// sup over grid nodes of |g̃_ε − g_limit|.
    pub riccati_gap: T,
    pub cgf_gap: T,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport<T: Real> {
    pub rows: Vec<ConvergenceRow<T>>,
    pub fitted_order: T,
    pub limit_cgf: T,
}

/// Least-squares slope of ln(y) against ln(x).
fn fit_log_slope<T: Real>(xs: &[T], ys: &[T]) -> Result<T> {
    if xs.len() < 2 {
        return Err(Error::Domain("fit_log_slope: need at least 2 points".into()));
    }
    let n = T::of(xs.len() as f64);
    let mut lx = Vec::with_capacity(xs.len());
    let mut ly = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > T::zero() && y > T::zero()) {
            return Err(Error::Numerical(format!(
                "fit_log_slope: needs positive data, got ({x}, {y})"
            )));
        }
        lx.push(x.ln());
        ly.push(y.ln());
    }
    let mx = lx.iter().fold(T::zero(), |s, &v| s + v) / n;
    let my = ly.iter().fold(T::zero(), |s, &v| s + v) / n;
    let mut num = T::zero();
    let mut den = T::zero();
    for (&x, &y) in lx.iter().zip(&ly) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == T::zero() {
        return Err(Error::Numerical("fit_log_slope: degenerate abscissae".into()));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::JumpLaw;

    fn desk_family() -> ScalingFamily<f64> {
        let s = 0.5_f64.sqrt();
        ScalingFamily::new(
            Kernel::exponential(1.0, 1.2).unwrap(),
            ForwardCurve::flat(0.04).unwrap(),
            JumpSpec::new(
                JumpLaw::dirac(s).unwrap(),
                JumpLaw::dirac(s).unwrap(),
                0.3,
                0.7,
            )
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn limit_params_match_hand_computation() {
        let lp = desk_family().limit_params().unwrap();
        assert!((lp.p - 0.5).abs() < 1e-15);
        assert!((lp.c - 0.29_f64.sqrt()).abs() < 1e-15);
        assert!((lp.rho - (-0.2 / 0.29_f64.sqrt())).abs() < 1e-15);
        assert!((lp.rho - (-0.3713906763541037)).abs() < 1e-15);
    }

    #[test]
    fn normalization_gate_names_the_fix() {
        let err = ScalingFamily::new(
            Kernel::exponential(1.0, 1.2).unwrap(),
            ForwardCurve::flat(0.04).unwrap(),
            JumpSpec::new(
                JumpLaw::dirac(1.0).unwrap(),
                JumpLaw::dirac(1.0).unwrap(),
                0.3,
                0.7,
            )
            .unwrap(),
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("second moment"), "{msg}");
        assert!(msg.contains("rescale"), "{msg}");
    }

    #[test]
    fn r_gaps_shrink_like_sqrt_eps() {
        let fam = desk_family();
        let coarse = fam.r_gap_report(1e-2, 21, 21).unwrap();
        let fine = fam.r_gap_report(1e-4, 21, 21).unwrap();
        for (a, b) in [
            (coarse.sup_value_gap, fine.sup_value_gap),
            (coarse.sup_du_gap, fine.sup_du_gap),
            (coarse.sup_dw_gap, fine.sup_dw_gap),
        ] {
            assert!(b < a, "gap did not shrink: {a:e} -> {b:e}");
            let ratio = a / b;
            assert!(
                (5.0..20.0).contains(&ratio),
                "expected ~sqrt(eps) decay (ratio 10), got {ratio}"
            );
        }
        assert!(fine.sup_value_gap < 5e-3);
    }

    #[test]
    fn scaled_nonlinearity_matches_hand_formula() {
        let fam = desk_family();
        let (u, w, eps) = (0.4, -0.55, 1e-2_f64);
        let h = fam.scaled_nonlinearity(u, eps).unwrap();
        let s = 0.5_f64.sqrt() * eps.sqrt();
        let psi = |v: f64| (v * s).exp() - 1.0;
        let m_x = psi(1.0) + psi(-1.0);
        let hand = (psi(u + w * 0.3) + psi(-u + w * 0.7)
            - u * m_x
            - w * (0.3 * s + 0.7 * s))
            / eps;
        assert!((h.eval(w) - hand).abs() < 1e-12 * hand.abs().max(1.0));
    }

    #[test]
    fn w_star_approaches_scaled_limit_root() {
        let fam = desk_family();
        let g3 = fam.w_star_gap(0.3, 1e-3).unwrap();
        let g2 = fam.w_star_gap(0.3, 1e-2).unwrap();
        let g1 = fam.w_star_gap(0.3, 1e-1).unwrap();
        assert!(g3 < g2 && g2 < g1, "{g1:e} {g2:e} {g3:e}");
        assert!(g3 < 1e-2, "{g3:e}");
    }

    #[test]
    fn convergence_experiment_reports_sqrt_order() {
        let fam = desk_family();
        let report = fam
            .cgf_convergence_experiment(0.5, 0.5, 1e-2, &[1e-1, 1e-2, 1e-3])
            .unwrap();
        let gaps: Vec<f64> = report.rows.iter().map(|r| r.riccati_gap).collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
        assert!(
            (0.3..0.7).contains(&report.fitted_order),
            "order {}",
            report.fitted_order
        );
        let cgfs: Vec<f64> = report.rows.iter().map(|r| r.cgf_gap).collect();
        assert!(cgfs[0] > cgfs[2], "{cgfs:?}");
    }

    #[test]
    fn multi_gap_shrinks() {
        let fam = desk_family();
        let times = [0.0, 0.5, 1.0];
        let u_vec = [0.35, 0.2];
        let (s2, l) = fam.multi_cgf_gap(&times, &u_vec, 1e-2, 1e-2).unwrap();
        let (s3, l3) = fam.multi_cgf_gap(&times, &u_vec, 1e-2, 1e-3).unwrap();
        assert_eq!(l, l3);
        assert!((s3 - l).abs() < (s2 - l).abs());
    }

    #[test]
    fn model_at_scales_marks_and_curve() {
        let fam = desk_family();
        let model = fam.model_at(1e-2).unwrap();
        let m2 = model.jumps.law_plus.second_moment() + model.jumps.law_minus.second_moment();
        assert!((m2 - 1e-2).abs() < 1e-15);
        assert!((model.curve.eval(0.3).unwrap() - 4.0).abs() < 1e-12);
        assert!(fam.model_at(0.0).is_err());
        assert!(fam.model_at(1.5).is_err());
    }
}

//! Forward curves, affine models and CGF evaluation, plus independent
//! reference schemes (classical ODE and fractional Adams) used to validate
//! the convolution solver.

use crate::kernels::Kernel;
use crate::ml::mittag_leffler;
use crate::riccati::{
    solve_riccati, solve_riccati_ic, solve_riccati_multi, ConvexNonlinearity, JumpSpec,
    NonlinearityFamily, RLambda, RiccatiGrid, Rv,
};
use crate::special::ln_gamma;
use crate::{lattice_steps, Error, Real, Result};

/// Forward variance / forward intensity curve s ↦ ξ₀(s) ≥ 0.
#[derive(Debug, Clone)]
pub enum ForwardCurve<T: Real> {
    Flat {
        v0: T,
    },
    /// θ + (v₀ − θ)e^{−λs}: the curve implied by a classical mean-reverting
    /// square-root variance started at v₀.
    HestonImplied {
        v0: T,
        theta: T,
        mean_reversion: T,
    },
    /// v₀ + (θ − v₀)·λ sᵅ E_{α,α+1}(−λsᵅ): rough analogue of the above.
    RoughHestonImplied {
        v0: T,
        theta: T,
        mean_reversion: T,
        alpha: T,
    },
    /// μ(1 + γ̂∫₀ˢκ): stationary-input intensity curve of a Hawkes system
    /// with post-resolvent kernel κ.
    HawkesImplied {
        mu: T,
        gamma_hat: T,
        kernel: Kernel<T>,
    },
    /// Piecewise-linear with constant extrapolation outside the abscissae.
    Tabulated {
        ts: Vec<T>,
        vals: Vec<T>,
    },
}

impl<T: Real> ForwardCurve<T> {
    pub fn flat(v0: T) -> Result<Self> {
        ensure_nonneg("flat curve level", v0)?;
        Ok(ForwardCurve::Flat { v0 })
    }

    pub fn heston_implied(v0: T, theta: T, mean_reversion: T) -> Result<Self> {
        ensure_nonneg("initial variance", v0)?;
        ensure_nonneg("long-run level", theta)?;
        ensure_nonneg("mean reversion", mean_reversion)?;
        Ok(ForwardCurve::HestonImplied {
            v0,
            theta,
            mean_reversion,
        })
    }

    pub fn rough_heston_implied(v0: T, theta: T, mean_reversion: T, alpha: T) -> Result<Self> {
        ensure_nonneg("initial variance", v0)?;
        ensure_nonneg("long-run level", theta)?;
        ensure_nonneg("mean reversion", mean_reversion)?;
        if !(alpha > T::of(0.5) && alpha < T::one()) {
            return Err(Error::Domain(format!(
                "rough curve: alpha must lie in (1/2, 1), got {alpha}"
            )));
        }
        Ok(ForwardCurve::RoughHestonImplied {
            v0,
            theta,
            mean_reversion,
            alpha,
        })
    }

    pub fn tabulated(ts: Vec<T>, vals: Vec<T>) -> Result<Self> {
        if ts.is_empty() || ts.len() != vals.len() {
            return Err(Error::Domain(
                "tabulated curve: need matching non-empty ts/vals".into(),
            ));
        }
        if !ts.windows(2).all(|w| w[1] > w[0]) || !ts.iter().all(|t| t.is_finite() && *t >= T::zero())
        {
            return Err(Error::Domain(
                "tabulated curve: abscissae must be finite, >= 0 and strictly increasing".into(),
            ));
        }
        if !vals.iter().all(|v| v.is_finite() && *v >= T::zero()) {
            return Err(Error::Domain(
                "tabulated curve: values must be finite and >= 0".into(),
            ));
        }
        Ok(ForwardCurve::Tabulated { ts, vals })
    }

    pub fn eval(&self, s: T) -> Result<T> {
        if !(s >= T::zero()) {
            return Err(Error::Domain(format!("curve: time must be >= 0, got {s}")));
        }
        match self {
            ForwardCurve::Flat { v0 } => Ok(*v0),
            ForwardCurve::HestonImplied {
                v0,
                theta,
                mean_reversion,
            } => Ok(*theta + (*v0 - *theta) * (-*mean_reversion * s).exp()),
            ForwardCurve::RoughHestonImplied {
                v0,
                theta,
                mean_reversion,
                alpha,
            } => {
                if s == T::zero() {
                    return Ok(*v0);
                }
                let sa = s.powf(*alpha);
                let e = mittag_leffler(*alpha, *alpha + T::one(), -*mean_reversion * sa)?;
                Ok(*v0 + (*theta - *v0) * *mean_reversion * sa * e)
            }
            ForwardCurve::HawkesImplied {
                mu,
                gamma_hat,
                kernel,
            } => Ok(*mu * (T::one() + *gamma_hat * kernel.primitive(s)?)),
            ForwardCurve::Tabulated { ts, vals } => {
                let n = ts.len();
                if s <= ts[0] {
                    return Ok(vals[0]);
                }
                if s >= ts[n - 1] {
                    return Ok(vals[n - 1]);
                }
                let mut lo = 0;
                let mut hi = n - 1;
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if ts[mid] <= s {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let w = (s - ts[lo]) / (ts[hi] - ts[lo]);
                Ok(vals[lo] + w * (vals[hi] - vals[lo]))
            }
        }
    }

    /// Curve scaled by c ≥ 0.
    pub fn scale(&self, c: T) -> Result<Self> {
        ensure_nonneg("curve scale factor", c)?;
        Ok(match self {
            ForwardCurve::Flat { v0 } => ForwardCurve::Flat { v0: *v0 * c },
            ForwardCurve::HestonImplied {
                v0,
                theta,
                mean_reversion,
            } => ForwardCurve::HestonImplied {
                v0: *v0 * c,
                theta: *theta * c,
                mean_reversion: *mean_reversion,
            },
            ForwardCurve::RoughHestonImplied {
                v0,
                theta,
                mean_reversion,
                alpha,
            } => ForwardCurve::RoughHestonImplied {
                v0: *v0 * c,
                theta: *theta * c,
                mean_reversion: *mean_reversion,
                alpha: *alpha,
            },
            ForwardCurve::HawkesImplied {
                mu,
                gamma_hat,
                kernel,
            } => ForwardCurve::HawkesImplied {
                mu: *mu * c,
                gamma_hat: *gamma_hat,
                kernel: kernel.clone(),
            },
            ForwardCurve::Tabulated { ts, vals } => ForwardCurve::Tabulated {
                ts: ts.clone(),
                vals: vals.iter().map(|&v| v * c).collect(),
            },
        })
    }
}

fn ensure_nonneg<T: Real>(what: &str, v: T) -> Result<()> {
    if !(v >= T::zero() && v.is_finite()) {
        return Err(Error::Domain(format!(
            "{what} must be finite and >= 0, got {v}"
        )));
    }
    Ok(())
}

/// ξ₀(s) = μ(1 + γ̂∫₀ˢκ(r)dr): the forward intensity curve of a Hawkes
/// process with baseline μ whose post-resolvent kernel is κ.
pub fn hawkes_implied_curve<T: Real>(mu: T, kernel: &Kernel<T>, gamma_hat: T) -> Result<ForwardCurve<T>> {
    ensure_nonneg("baseline intensity", mu)?;
    ensure_nonneg("gamma_hat", gamma_hat)?;
    Ok(ForwardCurve::HawkesImplied {
        mu,
        gamma_hat,
        kernel: kernel.clone(),
    })
}

/// Affine forward variance model: dX = −½V dt + √V(ρ dW + √(1−ρ²) dW⊥).
#[derive(Debug, Clone)]
pub struct AfvModel<T: Real> {
    pub kernel: Kernel<T>,
    pub curve: ForwardCurve<T>,
    pub rho: T,
}

impl<T: Real> AfvModel<T> {
    pub fn new(kernel: Kernel<T>, curve: ForwardCurve<T>, rho: T) -> Result<Self> {
        if !(rho >= -T::one() && rho <= T::one()) {
            return Err(Error::Domain(format!(
                "AFV model: rho must lie in [-1,1], got {rho}"
            )));
        }
        if !kernel.is_decreasing() {
            return Err(Error::Domain(
                "AFV model: kernel must be non-increasing".into(),
            ));
        }
        Ok(AfvModel {
            kernel,
            curve,
            rho,
        })
    }
}

/// Affine forward intensity model: two-sided marked Hawkes order flow with
/// common intensity λ and post-resolvent kernel κ.
#[derive(Debug, Clone)]
pub struct AfiModel<T: Real> {
    pub kernel: Kernel<T>,
    pub curve: ForwardCurve<T>,
    pub jumps: JumpSpec<T>,
}

impl<T: Real> AfiModel<T> {
    pub fn new(kernel: Kernel<T>, curve: ForwardCurve<T>, jumps: JumpSpec<T>) -> Result<Self> {
        Ok(AfiModel {
            kernel,
            curve,
            jumps,
        })
    }
}

#[derive(Debug, Clone)]
pub enum AffineModel<T: Real> {
    Afv(AfvModel<T>),
    Afi(AfiModel<T>),
}

impl<T: Real> From<AfvModel<T>> for AffineModel<T> {
    fn from(m: AfvModel<T>) -> Self {
        AffineModel::Afv(m)
    }
}

impl<T: Real> From<AfiModel<T>> for AffineModel<T> {
    fn from(m: AfiModel<T>) -> Self {
        AffineModel::Afi(m)
    }
}

impl<T: Real> AffineModel<T> {
    pub fn kernel(&self) -> &Kernel<T> {
        match self {
            AffineModel::Afv(m) => &m.kernel,
            AffineModel::Afi(m) => &m.kernel,
        }
    }

    pub fn curve(&self) -> &ForwardCurve<T> {
        match self {
            AffineModel::Afv(m) => &m.curve,
            AffineModel::Afi(m) => &m.curve,
        }
    }

    pub fn nonlinearity(&self, u: T) -> Result<Box<dyn ConvexNonlinearity<T>>> {
        match self {
            AffineModel::Afv(m) => Ok(Box::new(Rv::new(u, m.rho)?)),
            AffineModel::Afi(m) => Ok(Box::new(RLambda::new(u, m.jumps.clone())?)),
        }
    }

    pub fn family(&self) -> Box<NonlinearityFamily<'_, T>> {
        Box::new(move |u| self.nonlinearity(u))
    }
}

/// ∫₀^{nΔt} g(·)ξ₀(s)ds by per-panel Simpson with the piecewise-linear g
/// (midpoint value = endpoint average); exact for linear g × linear ξ₀.
/// `panel(k)` returns (g at the left s-endpoint, g at the right s-endpoint).
pub(crate) fn quad_against_curve<T: Real>(
    curve: &ForwardCurve<T>,
    dt: T,
    n: usize,
    panel: &dyn Fn(usize) -> (T, T),
) -> Result<T> {
    let half = T::of(0.5);
    let two = T::of(2.0);
    let c = dt / T::of(6.0);
    let mut acc = T::zero();
    let mut xi0 = curve.eval(T::zero())?;
    for k in 0..n {
        let s0 = dt * T::of(k as f64);
        let xim = curve.eval(s0 + dt * half)?;
        let xi1 = curve.eval(s0 + dt)?;
        let (ga, gb) = panel(k);
        acc += c * (ga * xi0 + two * (ga + gb) * xim + gb * xi1);
        xi0 = xi1;
    }
    Ok(acc)
}

/// log E[exp(u(X_T − X_0))] together with the solved Riccati grid.
pub fn cgf_increment_with_grid<T: Real>(
    model: &AffineModel<T>,
    u: T,
    horizon: T,
    dt: T,
) -> Result<(T, RiccatiGrid<T>)> {
    let grid = solve_riccati(model.family().as_ref(), model.kernel(), u, horizon, dt)?;
    let n = grid.g.len() - 1;
    let (g, gl) = (&grid.g, &grid.g_left);
    let cgf = quad_against_curve(model.curve(), dt, n, &|k| (gl[n - k], g[n - k - 1]))?;
    Ok((cgf, grid))
}

/// log E[exp(u(X_T − X_0))].
pub fn cgf_increment<T: Real>(model: &AffineModel<T>, u: T, horizon: T, dt: T) -> Result<T> {
    cgf_increment_with_grid(model, u, horizon, dt).map(|(c, _)| c)
}

/// log E[exp(Σₖ uₖ(X_{t_{k+1}} − X_{t_k}))] for 0 = t₀ ≤ … ≤ tₙ = T.
pub fn multi_cgf<T: Real>(
    model: &AffineModel<T>,
    times: &[T],
    u_vec: &[T],
    dt: T,
) -> Result<T> {
    let grid = solve_riccati_multi(model.family().as_ref(), model.kernel(), times, u_vec, dt)?;
    let n = grid.g.len() - 1;
    let (g, gl) = (&grid.g, &grid.g_left);
    // the s-left endpoint of panel k sits at backward time (n−k)Δt, approached
    // from below, so it takes the left limit across nonlinearity junctions
    quad_against_curve(model.curve(), dt, n, &|k| (gl[n - k], g[n - k - 1]))
}

/// Joint transform log E[exp(u(X_T − X_0) + ∫_T^{T+Δ} h(T+Δ−s)ξ_T(s)ds)]:
/// the payoff couples the increment with a functional of the time-T forward
/// curve over [T, T+Δ]. `h` (≤ 0) is read on [0, Δ], h(Δ) as a left limit.
pub fn joint_cgf<T: Real>(
    model: &AffineModel<T>,
    u: T,
    h: &dyn Fn(T) -> T,
    horizon: T,
    delta: T,
    dt: T,
) -> Result<T> {
    let h_nl = model.nonlinearity(u)?;
    if h_nl.eval(T::zero()) == T::zero() {
        // degenerate u: supported only for vanishing h (the plain increment)
        let k = lattice_steps(delta, dt, "joint horizon")?;
        for j in 0..=k {
            if h(dt * T::of(j as f64)) != T::zero() {
                return Err(Error::Domain(
                    "joint_cgf: u in {0,1} is degenerate and only supports h = 0".into(),
                ));
            }
        }
        return cgf_increment(model, u, horizon, dt);
    }
    let ic = solve_riccati_ic(h_nl.as_ref(), model.kernel(), h, delta, horizon, dt)?;
    let n = ic.grid.g.len() - 1;
    let (g, gl) = (&ic.grid.g, &ic.grid.g_left);
    quad_against_curve(model.curve(), dt, n, &|k| (gl[n - k], g[n - k - 1]))
}

/// First two cumulants of X_T − X_0 by one-sided finite differences of the
/// CGF at 0 (ε = 1e-4; the mean estimate is O(ε²) accurate, the variance
/// O(ε)).
pub fn cumulants<T: Real>(model: &AffineModel<T>, horizon: T, dt: T) -> Result<(T, T)> {
    let eps = T::of(1e-4);
    let c1 = cgf_increment(model, eps, horizon, dt)?;
    let c2 = cgf_increment(model, eps + eps, horizon, dt)?;
    let mean = (T::of(4.0) * c1 - c2) / (eps + eps);
    let var = (c2 - c1 - c1) / (eps * eps);
    Ok((mean, var))
}

/// Classical mean-reverting reference: ψ′ = ½(u²−u) + (ζρu − λ)ψ + ½ζ²ψ²,
/// ψ(0) = 0, integrated by RK4 at step Δt/10; CGF = v₀ψ(T) + λθ∫₀^Tψ.
#[derive(Debug, Clone)]
pub struct HestonReference<T: Real> {
    pub ts: Vec<T>,
    pub psi: Vec<T>,
    pub cgf: T,
}

#[allow(clippy::too_many_arguments)]
pub fn heston_ode_reference<T: Real>(
    u: T,
    rho: T,
    zeta: T,
    mean_reversion: T,
    theta: T,
    v0: T,
    horizon: T,
    dt: T,
) -> Result<HestonReference<T>> {
    if !(u >= T::zero() && u <= T::one()) {
        return Err(Error::Domain(format!("reference: u must lie in [0,1], got {u}")));
    }
    let n = lattice_steps(horizon, dt, "reference horizon")?;
    let half = T::of(0.5);
    let c0 = half * (u * u - u);
    let c1 = zeta * rho * u - mean_reversion;
    let c2 = half * zeta * zeta;
    let f = |p: T| c0 + c1 * p + c2 * p * p;

    let sub = 10;
    let h = dt / T::of(sub as f64);
    let mut psi = Vec::with_capacity(n + 1);
    let mut ts = Vec::with_capacity(n + 1);
    psi.push(T::zero());
    ts.push(T::zero());
    let (mut p, mut integral) = (T::zero(), T::zero());
    let two = T::of(2.0);
    let six = T::of(6.0);
    for i in 0..n {
        for _ in 0..sub {
            // RK4 on the pair (ψ, ∫ψ)
            let k1 = f(p);
            let j1 = p;
            let k2 = f(p + half * h * k1);
            let j2 = p + half * h * k1;
            let k3 = f(p + half * h * k2);
            let j3 = p + half * h * k2;
            let k4 = f(p + h * k3);
            let j4 = p + h * k3;
            p += h / six * (k1 + two * k2 + two * k3 + k4);
            integral += h / six * (j1 + two * j2 + two * j3 + j4);
        }
        psi.push(p);
        ts.push(dt * T::of((i + 1) as f64));
    }
    let cgf = v0 * p + mean_reversion * theta * integral;
    Ok(HestonReference { ts, psi, cgf })
}

/// Fractional-Adams reference for the rough mean-reverting model:
/// ψ = I^α[½(u²−u) + (ζρu − λ)ψ + ½ζ²ψ²] by the predictor–corrector scheme;
/// CGF = v₀(I^{1−α}ψ)(T) + λθ∫₀^Tψ with the fractional integral evaluated by
/// product integration against the power kernel.
#[derive(Debug, Clone)]
pub struct RoughReference<T: Real> {
    pub ts: Vec<T>,
    pub psi: Vec<T>,
    pub cgf: T,
}

#[allow(clippy::too_many_arguments)]
pub fn rough_heston_adams_reference<T: Real>(
    u: T,
    rho: T,
    zeta: T,
    alpha: T,
    mean_reversion: T,
    theta: T,
    v0: T,
    horizon: T,
    dt: T,
) -> Result<RoughReference<T>> {
    if !(u >= T::zero() && u <= T::one()) {
        return Err(Error::Domain(format!("reference: u must lie in [0,1], got {u}")));
    }
    if !(alpha > T::of(0.5) && alpha < T::one()) {
        return Err(Error::Domain(format!(
            "rough reference: alpha must lie in (1/2, 1), got {alpha}"
        )));
    }
    let n = lattice_steps(horizon, dt, "reference horizon")?;
    let half = T::of(0.5);
    let c0 = half * (u * u - u);
    let c1 = zeta * rho * u - mean_reversion;
    let c2 = half * zeta * zeta;
    let f = |p: T| c0 + c1 * p + c2 * p * p;

    let ap1 = alpha + T::one();
    let mut pow_a = Vec::with_capacity(n + 2);
    let mut pow_a1 = Vec::with_capacity(n + 2);
    for k in 0..=(n + 1) {
        let kk = T::of(k as f64);
        pow_a.push(kk.powf(alpha));
        pow_a1.push(kk.powf(ap1));
    }
    let ha = dt.powf(alpha);
    let pred_c = ha / ln_gamma(alpha + T::one()).exp();
    let corr_c = ha / ln_gamma(alpha + T::of(2.0)).exp();

    let mut psi = vec![T::zero(); n + 1];
    let mut fv = vec![T::zero(); n + 1];
    fv[0] = f(T::zero());
    for i in 1..=n {
        let mut pred = T::zero();
        for k in 0..i {
            pred += (pow_a[i - k] - pow_a[i - k - 1]) * fv[k];
        }
        pred *= pred_c;
        let ti = T::of(i as f64);
        let a0 = pow_a1[i - 1] - (ti - T::one() - alpha) * pow_a[i];
        let mut corr = a0 * fv[0] + f(pred);
        for k in 1..i {
            let j = i - k;
            corr += (pow_a1[j + 1] + pow_a1[j - 1] - T::of(2.0) * pow_a1[j]) * fv[k];
        }
        psi[i] = corr_c * corr;
        fv[i] = f(psi[i]);
    }

    // ∫₀^Tψ by trapezoid and (I^{1−α}ψ)(T) by product integration against
    // τ^{−α}/Γ(1−α) in time-to-maturity τ = T − s
    let mut integral = T::zero();
    for i in 0..n {
        integral += half * dt * (psi[i] + psi[i + 1]);
    }
    let one_m = T::one() - alpha;
    let two_m = T::of(2.0) - alpha;
    let mut frac = T::zero();
    for m in 0..n {
        let t0 = dt * T::of(m as f64);
        let t1 = dt * T::of((m + 1) as f64);
        let m0 = (t1.powf(one_m) - t0.powf(one_m)) / one_m;
        let m1 = (t1.powf(two_m) - t0.powf(two_m)) / two_m;
        let wa = (t1 * m0 - m1) / dt; // weight of ψ at τ = t0 (node n − m)
        let wb = (m1 - t0 * m0) / dt; // weight of ψ at τ = t1 (node n − m − 1)
        frac += wa * psi[n - m] + wb * psi[n - m - 1];
    }
    frac /= ln_gamma(one_m).exp();

    let cgf = v0 * frac + mean_reversion * theta * integral;
    let ts = (0..=n).map(|i| dt * T::of(i as f64)).collect();
    Ok(RoughReference { ts, psi, cgf })
}

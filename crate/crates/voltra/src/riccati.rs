//! Convex nonlinearities, convolution-Riccati solvers and comparison bounds.

use crate::kernels::{ConvWeights, Kernel};
use crate::special::adaptive_simpson;
use crate::{lattice_steps, Error, Real, Result};

/// Convex nonlinearity H on (−∞, w_max] with H(w_max) ≤ 0, a unique negative
/// root w_* (H′(w_*) < 0) and leftmost argmin w₀; the decreasing envelope H̄
/// flattens H right of w₀.
pub trait ConvexNonlinearity<T: Real>: Send + Sync {
    fn eval(&self, w: T) -> T;
    fn deriv(&self, w: T) -> T;

    fn w_max(&self) -> T {
        T::zero()
    }

    /// Unique root w_* < 0; errors when H(w₀) ≥ 0 (degenerate instance).
    fn w_star(&self) -> Result<T> {
        bisect_w_star(self.as_dyn())
    }

    /// Leftmost argmin w₀ (the clamp point of the envelope).
    fn argmin(&self) -> Result<T> {
        bisect_argmin(self.as_dyn())
    }

    /// Decreasing envelope H̄(w) = H(min(w, w₀)).
    fn envelope(&self, w: T) -> Result<T> {
        let w0 = self.argmin()?;
        Ok(self.eval(if w < w0 { w } else { w0 }))
    }

    #[doc(hidden)]
    fn as_dyn(&self) -> &dyn ConvexNonlinearity<T>;
}

pub(crate) fn bisect_argmin<T: Real>(h: &dyn ConvexNonlinearity<T>) -> Result<T> {
    let wmax = h.w_max();
    if h.deriv(wmax) <= T::zero() {
        return Ok(wmax);
    }
    let mut step = T::one().max(wmax.abs());
    let mut lo = wmax - step;
    let mut tries = 0;
    while h.deriv(lo) > T::zero() {
        tries += 1;
        if tries > 60 {
            return Err(Error::Domain(
                "argmin: H' has no sign change on (-W, w_max] for escalating W; convexity \
                 assumption violated"
                    .into(),
            ));
        }
        step = step + step;
        lo = wmax - step;
    }
    let mut hi = wmax;
    for _ in 0..200 {
        let mid = (lo + hi) / T::of(2.0);
        if h.deriv(mid) > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= T::of(1e-14) * T::one().max(mid.abs()) {
            break;
        }
    }
    Ok((lo + hi) / T::of(2.0))
}

pub(crate) fn bisect_w_star<T: Real>(h: &dyn ConvexNonlinearity<T>) -> Result<T> {
    let w0 = h.argmin()?;
    if h.eval(w0) >= T::zero() {
        return Err(Error::Domain(
            "w_star: min H >= 0, no negative root exists (degenerate nonlinearity, e.g. u in \
             {0,1})"
                .into(),
        ));
    }
    let mut step = T::one().max(w0.abs());
    let mut lo = w0 - step;
    let mut tries = 0;
    while h.eval(lo) <= T::zero() {
        tries += 1;
        if tries > 60 {
            return Err(Error::Domain(
                "w_star: no sign change of H on (-W, w0] for escalating W; convexity assumption \
                 violated"
                    .into(),
            ));
        }
        step = step + step;
        lo = w0 - step;
    }
    let mut hi = w0; // H(lo) > 0 > H(hi)
    for _ in 0..200 {
        let mid = (lo + hi) / T::of(2.0);
        if h.eval(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::of(1e-15) * T::one().max(mid.abs()) {
            break;
        }
    }
    Ok((lo + hi) / T::of(2.0))
}

/// Variance nonlinearity R_V(u,·): w ↦ ½(u²−u) + ρuw + ½w².
#[derive(Debug, Clone, Copy)]
pub struct Rv<T: Real> {
    pub u: T,
    pub rho: T,
}

impl<T: Real> Rv<T> {
    pub fn new(u: T, rho: T) -> Result<Self> {
        if !(u >= T::zero() && u <= T::one()) {
            return Err(Error::Domain(format!("R_V: u must lie in [0,1], got {u}")));
        }
        if !(rho >= -T::one() && rho <= T::one()) {
            return Err(Error::Domain(format!(
                "R_V: rho must lie in [-1,1], got {rho}"
            )));
        }
        Ok(Rv { u, rho })
    }
}

impl<T: Real> ConvexNonlinearity<T> for Rv<T> {
    fn eval(&self, w: T) -> T {
        let half = T::of(0.5);
        half * (self.u * self.u - self.u) + self.rho * self.u * w + half * w * w
    }

    fn deriv(&self, w: T) -> T {
        self.rho * self.u + w
    }

    fn w_star(&self) -> Result<T> {
        if self.u == T::zero() || self.u == T::one() {
            return Err(Error::Domain(
                "w_star: R_V degenerate at u in {0,1} (H(0) = 0)".into(),
            ));
        }
        let ru = self.rho * self.u;
        let disc = ru * ru + self.u - self.u * self.u;
        Ok(-ru - disc.sqrt())
    }

    fn argmin(&self) -> Result<T> {
        // unconstrained minimum at −ρu, clamped to the domain (−∞, 0]
        Ok((-self.rho * self.u).min(T::zero()))
    }

    fn as_dyn(&self) -> &dyn ConvexNonlinearity<T> {
        self
    }
}

pub fn r_v<T: Real>(u: T, w: T, rho: T) -> Result<T> {
    if !(w <= T::zero()) {
        return Err(Error::Domain(format!("R_V: w must be <= 0, got {w}")));
    }
    Ok(Rv::new(u, rho)?.eval(w))
}

/// Jump-size law on [0, ∞) with exponential moments: ∫eˣζ(dx) < ∞.
#[derive(Debug, Clone)]
pub enum JumpLaw<T: Real> {
    Dirac { size: T },
    Exponential { mean: T },
    Discrete { points: Vec<T>, weights: Vec<T> },
}

impl<T: Real> JumpLaw<T> {
    pub fn dirac(size: T) -> Result<Self> {
        if !(size >= T::zero() && size.is_finite() && size < T::of(700.0)) {
            return Err(Error::Domain(format!(
                "Dirac jump law: size must be finite, >= 0 and small enough for e^x moments, got {size}"
            )));
        }
        Ok(JumpLaw::Dirac { size })
    }

    /// Exponential law with the given mean; mean < 1 keeps ∫eˣζ(dx) finite.
    pub fn exponential(mean: T) -> Result<Self> {
        if !(mean > T::zero() && mean < T::one()) {
            return Err(Error::Domain(format!(
                "Exponential jump law: mean must lie in (0,1) so that e^x is integrable, got {mean}"
            )));
        }
        Ok(JumpLaw::Exponential { mean })
    }

    pub fn discrete(points: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::Domain(
                "Discrete jump law: need matching non-empty points/weights".into(),
            ));
        }
        if !points
            .iter()
            .all(|x| x.is_finite() && *x >= T::zero() && *x < T::of(700.0))
        {
            return Err(Error::Domain(
                "Discrete jump law: points must be finite, >= 0 and small enough for e^x moments"
                    .into(),
            ));
        }
        if !weights.iter().all(|w| w.is_finite() && *w > T::zero()) {
            return Err(Error::Domain(
                "Discrete jump law: weights must be positive".into(),
            ));
        }
        let total = weights.iter().fold(T::zero(), |s, &w| s + w);
        if (total - T::one()).abs() > T::of(1e-9) {
            return Err(Error::Domain(format!(
                "Discrete jump law: weights must sum to 1 (got {total})"
            )));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(JumpLaw::Discrete { points, weights })
    }

    /// ψ(v) = ∫(e^{vx} − 1)ζ(dx).
    pub fn psi(&self, v: T) -> T {
        match self {
            JumpLaw::Dirac { size } => (v * *size).exp_m1(),
            JumpLaw::Exponential { mean } => {
                let vm = v * *mean;
                if vm >= T::one() {
                    T::infinity()
                } else {
                    vm / (T::one() - vm)
                }
            }
            JumpLaw::Discrete { points, weights } => points
                .iter()
                .zip(weights)
                .fold(T::zero(), |s, (&x, &w)| s + w * (v * x).exp_m1()),
        }
    }

    /// ψ′(v) = ∫x e^{vx} ζ(dx).
    pub fn psi_deriv(&self, v: T) -> T {
        match self {
            JumpLaw::Dirac { size } => *size * (v * *size).exp(),
            JumpLaw::Exponential { mean } => {
                let vm = v * *mean;
                if vm >= T::one() {
                    T::infinity()
                } else {
                    let d = T::one() - vm;
                    *mean / (d * d)
                }
            }
            JumpLaw::Discrete { points, weights } => points
                .iter()
                .zip(weights)
                .fold(T::zero(), |s, (&x, &w)| s + w * x * (v * x).exp()),
        }
    }

    pub fn mean(&self) -> T {
        match self {
            JumpLaw::Dirac { size } => *size,
            JumpLaw::Exponential { mean } => *mean,
            JumpLaw::Discrete { points, weights } => points
                .iter()
                .zip(weights)
                .fold(T::zero(), |s, (&x, &w)| s + w * x),
        }
    }

    pub fn second_moment(&self) -> T {
        match self {
            JumpLaw::Dirac { size } => *size * *size,
            JumpLaw::Exponential { mean } => T::of(2.0) * *mean * *mean,
            JumpLaw::Discrete { points, weights } => points
                .iter()
                .zip(weights)
                .fold(T::zero(), |s, (&x, &w)| s + w * x * x),
        }
    }

    /// Pushforward under x ↦ cx (marks scaled by c > 0).
    pub fn scaled(&self, c: T) -> Result<Self> {
        if !(c > T::zero() && c.is_finite()) {
            return Err(Error::Domain(format!(
                "jump law scale factor must be positive, got {c}"
            )));
        }
        match self {
            JumpLaw::Dirac { size } => JumpLaw::dirac(*size * c),
            JumpLaw::Exponential { mean } => JumpLaw::exponential(*mean * c),
            JumpLaw::Discrete { points, weights } => JumpLaw::discrete(
                points.iter().map(|&x| x * c).collect(),
                weights.clone(),
            ),
        }
    }
}

/// Two-sided jump specification: laws ζ± and impact coefficients γ± ≥ 0.
#[derive(Debug, Clone)]
pub struct JumpSpec<T: Real> {
    pub law_plus: JumpLaw<T>,
    pub law_minus: JumpLaw<T>,
    pub gamma_plus: T,
    pub gamma_minus: T,
}

impl<T: Real> JumpSpec<T> {
    pub fn new(law_plus: JumpLaw<T>, law_minus: JumpLaw<T>, gamma_plus: T, gamma_minus: T) -> Result<Self> {
        for (name, g) in [("gamma_plus", gamma_plus), ("gamma_minus", gamma_minus)] {
            if !(g >= T::zero() && g.is_finite()) {
                return Err(Error::Domain(format!(
                    "JumpSpec: {name} must be finite and >= 0, got {g}"
                )));
            }
        }
        Ok(JumpSpec {
            law_plus,
            law_minus,
            gamma_plus,
            gamma_minus,
        })
    }

    pub fn psi_plus(&self, v: T) -> T {
        self.law_plus.psi(v)
    }

    pub fn psi_minus(&self, v: T) -> T {
        self.law_minus.psi(v)
    }

    /// m_X = ψ₊(1) + ψ₋(−1), the compensator slope of the log-price.
    pub fn m_x(&self) -> T {
        self.law_plus.psi(T::one()) + self.law_minus.psi(-T::one())
    }

    pub fn mean_plus(&self) -> T {
        self.law_plus.mean()
    }

    pub fn mean_minus(&self) -> T {
        self.law_minus.mean()
    }

    /// γ₊m₊ + γ₋m₋, the compensator slope of the intensity feedback.
    pub fn impact_mean(&self) -> T {
        self.gamma_plus * self.law_plus.mean() + self.gamma_minus * self.law_minus.mean()
    }

    pub fn gamma_hat(&self) -> T {
        self.gamma_plus + self.gamma_minus
    }

    /// Marks scaled by c (both sides); impact coefficients unchanged.
    pub fn scaled_marks(&self, c: T) -> Result<Self> {
        Ok(JumpSpec {
            law_plus: self.law_plus.scaled(c)?,
            law_minus: self.law_minus.scaled(c)?,
            gamma_plus: self.gamma_plus,
            gamma_minus: self.gamma_minus,
        })
    }
}

/// Order-flow nonlinearity R_λ(u,·) for a given jump specification.
#[derive(Debug, Clone)]
pub struct RLambda<T: Real> {
    pub u: T,
    pub spec: JumpSpec<T>,
    m_x: T,
    impact_mean: T,
}

impl<T: Real> RLambda<T> {
    pub fn new(u: T, spec: JumpSpec<T>) -> Result<Self> {
        if !(u >= T::zero() && u <= T::one()) {
            return Err(Error::Domain(format!(
                "R_lambda: u must lie in [0,1], got {u}"
            )));
        }
        let m_x = spec.m_x();
        let impact_mean = spec.impact_mean();
        Ok(RLambda {
            u,
            spec,
            m_x,
            impact_mean,
        })
    }
}

impl<T: Real> ConvexNonlinearity<T> for RLambda<T> {
    fn eval(&self, w: T) -> T {
        let ap = self.u + w * self.spec.gamma_plus;
        let am = -self.u + w * self.spec.gamma_minus;
        self.spec.psi_plus(ap) + self.spec.psi_minus(am) - self.u * self.m_x
            - w * self.impact_mean
    }

    fn deriv(&self, w: T) -> T {
        let ap = self.u + w * self.spec.gamma_plus;
        let am = -self.u + w * self.spec.gamma_minus;
        self.spec.gamma_plus * self.spec.law_plus.psi_deriv(ap)
            + self.spec.gamma_minus * self.spec.law_minus.psi_deriv(am)
            - self.impact_mean
    }

    fn as_dyn(&self) -> &dyn ConvexNonlinearity<T> {
        self
    }
}

pub fn r_lambda<T: Real>(u: T, w: T, spec: &JumpSpec<T>) -> Result<T> {
    if !(w <= T::zero()) {
        return Err(Error::Domain(format!("R_lambda: w must be <= 0, got {w}")));
    }
    Ok(RLambda::new(u, spec.clone())?.eval(w))
}

/// Solved Riccati trajectory on a uniform grid: g(tᵢ) = H(f(tᵢ)),
/// f = κ⋆g. `residuals` is the independent-quadrature defect
/// |g(tᵢ) − H((κ⋆g)(tᵢ))| (exact panel moments near the kernel singularity,
/// midpoint evaluation beyond), and `residual` its maximum.
#[derive(Debug, Clone)]
pub struct RiccatiGrid<T: Real> {
    pub u: Option<T>,
    pub dt: T,
    pub horizon: T,
    pub ts: Vec<T>,
    pub g: Vec<T>,
    /// Left limit g(tᵢ⁻); differs from `g` only at nodes where the
    /// nonlinearity switches (piecewise-u or initial-condition junctions).
    /// Quadrature panels ending at tᵢ must use this value.
    pub g_left: Vec<T>,
    pub f: Vec<T>,
    pub residuals: Vec<T>,
    pub residual: T,
}

impl<T: Real> RiccatiGrid<T> {
    fn zeros(u: Option<T>, dt: T, n: usize) -> Self {
        let ts = (0..=n).map(|i| dt * T::of(i as f64)).collect::<Vec<_>>();
        let horizon = ts[n];
        RiccatiGrid {
            u,
            dt,
            horizon,
            ts,
            g: vec![T::zero(); n + 1],
            g_left: vec![T::zero(); n + 1],
            f: vec![T::zero(); n + 1],
            residuals: vec![T::zero(); n + 1],
            residual: T::zero(),
        }
    }
}

pub type NonlinearityFamily<'a, T> =
    dyn Fn(T) -> Result<Box<dyn ConvexNonlinearity<T>>> + 'a;

struct Segment<T: Real> {
    h: Box<dyn ConvexNonlinearity<T>>,
    h0: T,
    w_star: Option<T>,
}

impl<T: Real> Segment<T> {
    fn prepare(h: Box<dyn ConvexNonlinearity<T>>) -> Result<Self> {
        let h0 = h.eval(T::zero());
        if h0 > T::zero() {
            return Err(Error::Domain(format!(
                "nonlinearity violates H(0) <= 0 (got {h0:e})"
            )));
        }
        let w_star = if h0 == T::zero() {
            None // degenerate: no negative root, exact-zero dynamics from zero history
        } else {
            Some(h.w_star()?)
        };
        Ok(Segment { h, h0, w_star })
    }
}

/// One implicit step: solve x = c + b₀·H(x) by safeguarded Newton inside a
/// sign-change bracket.
fn implicit_step<T: Real>(
    h: &dyn ConvexNonlinearity<T>,
    b0: T,
    c: T,
    x_init: T,
    w_star: Option<T>,
) -> Result<T> {
    let phi = |x: T| x - c - b0 * h.eval(x);
    let (mut lo, mut hi);
    match w_star {
        Some(ws) if phi(ws) < T::zero() && phi(c) >= T::zero() => {
            lo = ws;
            hi = c;
        }
        None if phi(c) <= T::zero() && phi(T::zero()) >= T::zero() => {
            lo = c;
            hi = T::zero();
        }
        _ => {
            // general fallback: probe the usual suspects, then expand left
            let mut cands = vec![c, T::zero()];
            if let Some(ws) = w_star {
                cands.push(ws);
            }
            let Some(h_end) = cands.iter().copied().find(|&x| phi(x) >= T::zero()) else {
                return Err(Error::Convergence(
                    "implicit step: no upper bracket endpoint; reduce dt".into(),
                ));
            };
            hi = h_end;
            let mut step = T::one().max(hi.abs());
            lo = hi - step;
            let mut tries = 0;
            while phi(lo) >= T::zero() {
                tries += 1;
                if tries > 60 {
                    return Err(Error::Convergence(
                        "implicit step: no sign change for the scalar solve; reduce dt".into(),
                    ));
                }
                step = step + step;
                lo = hi - step;
            }
        }
    }

    let tol = T::of(1e-14) * T::one().max(c.abs());
    let mut x = if x_init > lo && x_init < hi {
        x_init
    } else {
        (lo + hi) / T::of(2.0)
    };
    for _ in 0..60 {
        let fx = phi(x);
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= T::of(4.0) * T::epsilon() * T::one().max(x.abs()) {
            return Ok((lo + hi) / T::of(2.0));
        }
        let d = T::one() - b0 * h.deriv(x);
        let xn = x - fx / d;
        x = if xn.is_finite() && xn > lo && xn < hi {
            xn
        } else {
            (lo + hi) / T::of(2.0)
        };
    }
    Err(Error::Convergence(
        "implicit step did not converge in 60 iterations; reduce dt".into(),
    ))
}

fn clamp_eval<T: Real>(seg: &Segment<T>, x: T) -> T {
    let v = seg.h.eval(x);
    if seg.w_star.is_some() {
        v.min(T::zero())
    } else {
        v
    }
}

/// Shared march: f(tᵢ) = forcing(tᵢ) + Σⱼ wᵢⱼ H_{seg}(f(tⱼ)), implicit in the
/// diagonal weight. `seg_of` selects the active nonlinearity per node; where
/// consecutive nodes disagree (a junction), g carries a double value: the panel
/// ending at tᵢ belongs to the outgoing segment, so the implicit step and the
/// panel-right value `g_left` use it, while the node value `g` used by later
/// panel-left endpoints switches to the incoming segment. Returns
/// (g, g_left, f); g_left == g except at junctions.
fn march<T: Real>(
    weights: &ConvWeights<T>,
    n: usize,
    segs: &[Segment<T>],
    seg_of: &dyn Fn(usize) -> usize,
    forcing: &dyn Fn(usize) -> T,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let b0 = weights.diag();
    let mut g = vec![T::zero(); n + 1];
    let mut gl = vec![T::zero(); n + 1];
    let mut f = vec![T::zero(); n + 1];
    g[0] = segs[seg_of(0)].h0;
    gl[0] = g[0];
    for i in 1..=n {
        let mut acc = T::zero();
        for k in 0..i.saturating_sub(1) {
            let m = i - k - 1;
            acc += weights.a(m) * g[k] + weights.b(m) * gl[k + 1];
        }
        acc += weights.a(0) * g[i - 1];
        let c = forcing(i) + acc;
        let out = &segs[seg_of(i - 1)];
        let inc = seg_of(i);
        if out.h0 == T::zero() && c == T::zero() {
            // exact-zero dynamics (degenerate segment, zero history)
            g[i] = segs[inc].h0;
            continue;
        }
        let fi = implicit_step(out.h.as_ref(), b0, c, f[i - 1], out.w_star)?;
        if let Some(ws) = out.w_star {
            if fi > T::of(1e-9) || fi <= ws {
                return Err(Error::BoundViolation(format!(
                    "f(t_{i}) = {fi:e} escaped (w_*, 0] = ({ws:e}, 0]"
                )));
            }
        }
        f[i] = fi;
        gl[i] = clamp_eval(out, fi);
        g[i] = if inc == seg_of(i - 1) {
            gl[i]
        } else {
            if let Some(ws) = segs[inc].w_star {
                if fi <= ws {
                    return Err(Error::BoundViolation(format!(
                        "f(t_{i}) = {fi:e} is at or below the incoming segment's root w_* = {ws:e}"
                    )));
                }
            }
            clamp_eval(&segs[inc], fi)
        };
    }
    Ok((g, gl, f))
}

/// Independent-quadrature residual |g(tᵢ) − H((κ⋆g)(tᵢ))|: panel moments are
/// exact (same product-integration weights) for the four lags nearest the
/// kernel singularity, midpoint quadrature beyond. `pl`/`pr` give the
/// convolution integrand at the left/right end of each panel (they differ
/// from `g` only at an initial-condition junction).
fn residual_diag<T: Real>(
    kernel: &Kernel<T>,
    weights: &ConvWeights<T>,
    pl: &[T],
    pr: &[T],
    g: &[T],
    h_eval: &dyn Fn(usize, T) -> T,
    start: usize,
) -> Result<Vec<T>> {
    let n = g.len() - 1;
    let dt = weights.dt;
    let half = T::of(0.5);
    let mut mid = vec![T::zero(); n];
    for (m, v) in mid.iter_mut().enumerate().skip(4) {
        *v = kernel.eval(dt * (T::of(m as f64) + half))?;
    }
    let mut res = vec![T::zero(); n + 1];
    for i in start.max(1)..=n {
        let mut acc = T::zero();
        let exact = 4.min(i);
        for m in 0..exact {
            let k = i - m - 1;
            acc += weights.a(m) * pl[k] + weights.b(m) * pr[k];
        }
        for m in exact..i {
            let k = i - m - 1;
            acc += mid[m] * (pl[k] + pr[k]) * half * dt;
        }
        res[i] = (g[i] - h_eval(i, acc)).abs();
    }
    Ok(res)
}

fn max_abs<T: Real>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Solve g(t) = H_u((κ⋆g)(t)) on [0, horizon]. u ∈ {0,1} short-circuits to
/// the exact zero solution (H_u(0) = 0 there for both shipped families).
pub fn solve_riccati<T: Real>(
    family: &NonlinearityFamily<'_, T>,
    kernel: &Kernel<T>,
    u: T,
    horizon: T,
    dt: T,
) -> Result<RiccatiGrid<T>> {
    if !(u >= T::zero() && u <= T::one()) {
        return Err(Error::Domain(format!("solve_riccati: u must lie in [0,1], got {u}")));
    }
    let n = lattice_steps(horizon, dt, "solve_riccati horizon")?;
    let h = family(u)?;
    if h.eval(T::zero()) == T::zero() {
        return Ok(RiccatiGrid::zeros(Some(u), dt, n));
    }
    let seg = Segment::prepare(h)?;
    let weights = ConvWeights::build(kernel, n, dt)?;
    let segs = [seg];
    let (g, g_left, f) = march(&weights, n, &segs, &|_| 0, &|_| T::zero())?;
    let residuals = residual_diag(
        kernel,
        &weights,
        &g[..n],
        &g_left[1..],
        &g,
        &|_, w| segs[0].h.eval(w),
        1,
    )?;
    let residual = max_abs(&residuals);
    let ts = (0..=n).map(|i| dt * T::of(i as f64)).collect();
    Ok(RiccatiGrid {
        u: Some(u),
        dt,
        horizon,
        ts,
        g,
        g_left,
        f,
        residuals,
        residual,
    })
}

/// General non-linear Volterra solve f(t) = a(t) + (κ⋆H(f))(t); `a` is an
/// arbitrary continuous forcing (the comparison-theorem test vehicle).
pub fn solve_volterra<T: Real>(
    h: &dyn ConvexNonlinearity<T>,
    kernel: &Kernel<T>,
    a: &dyn Fn(T) -> T,
    horizon: T,
    dt: T,
) -> Result<RiccatiGrid<T>> {
    let n = lattice_steps(horizon, dt, "solve_volterra horizon")?;
    let weights = ConvWeights::build(kernel, n, dt)?;
    let b0 = weights.diag();
    let h0 = h.eval(T::zero());
    let w_star = if h0 == T::zero() { None } else { Some(h.w_star()?) };

    let mut g = vec![T::zero(); n + 1];
    let mut f = vec![T::zero(); n + 1];
    f[0] = a(T::zero());
    g[0] = h.eval(f[0]);
    for i in 1..=n {
        let mut acc = T::zero();
        for k in 0..i.saturating_sub(1) {
            let m = i - k - 1;
            acc += weights.a(m) * g[k] + weights.b(m) * g[k + 1];
        }
        acc += weights.a(0) * g[i - 1];
        let c = a(dt * T::of(i as f64)) + acc;
        f[i] = implicit_step(h, b0, c, f[i - 1], w_star)?;
        g[i] = h.eval(f[i]);
    }
    let residuals = vec![T::zero(); n + 1]; // defect tracking not meaningful against arbitrary forcing
    let ts = (0..=n).map(|i| dt * T::of(i as f64)).collect();
    Ok(RiccatiGrid {
        u: None,
        dt,
        horizon,
        ts,
        g_left: g.clone(),
        g,
        f,
        residuals,
        residual: T::zero(),
    })
}

/// Riccati solve with an initial segment: g = h on [0, Δ), then
/// g(t) = H((κ⋆g)(t)) on [Δ, Δ+T]. Gate: ∫₀^Δ κ(Δ−s)h(s)ds > w_*.
#[derive(Debug, Clone)]
pub struct IcSolve<T: Real> {
    pub grid: RiccatiGrid<T>,
    /// h sampled at the lattice nodes 0..=Δ/Δt (last value = left limit at Δ).
    pub h_nodes: Vec<T>,
    pub delta_steps: usize,
    /// Contribution of the initial segment to (κ⋆g)(Δ + jΔt), j = 0..=T/Δt.
    pub forcing: Vec<T>,
}

pub fn solve_riccati_ic<T: Real>(
    h_nl: &dyn ConvexNonlinearity<T>,
    kernel: &Kernel<T>,
    h: &dyn Fn(T) -> T,
    delta: T,
    horizon: T,
    dt: T,
) -> Result<IcSolve<T>> {
    let k_steps = lattice_steps(delta, dt, "initial-segment length")?;
    let m_steps = lattice_steps(horizon, dt, "solve horizon")?;
    let n = k_steps + m_steps;
    let weights = ConvWeights::build(kernel, n, dt)?;
    let b0 = weights.diag();

    let mut h_nodes = Vec::with_capacity(k_steps + 1);
    for j in 0..=k_steps {
        let v = h(dt * T::of(j as f64));
        if !(v <= T::zero() && v.is_finite()) {
            return Err(Error::Domain(format!(
                "initial condition must be <= 0 and finite; h({}) = {v}",
                dt * T::of(j as f64)
            )));
        }
        h_nodes.push(v);
    }

    // forcing[j] = Σ over initial-segment panels of the product-integration
    // contribution to the convolution at node k_steps + j
    let mut forcing = Vec::with_capacity(m_steps + 1);
    for j in 0..=m_steps {
        let i = k_steps + j;
        let mut acc = T::zero();
        for k in 0..k_steps {
            let m = i - k - 1;
            acc += weights.a(m) * h_nodes[k] + weights.b(m) * h_nodes[k + 1];
        }
        forcing.push(acc);
    }

    let h0 = h_nl.eval(T::zero());
    if h0 >= T::zero() {
        return Err(Error::Domain(
            "solve_riccati_ic: H(0) must be < 0 (degenerate nonlinearity)".into(),
        ));
    }
    let w_star = h_nl.w_star()?;
    if !(forcing[0] > w_star) {
        return Err(Error::Domain(format!(
            "initial-condition hypothesis fails: (kappa*h)(Delta) = {:e} <= w_* = {w_star:e}",
            forcing[0]
        )));
    }

    let mut g = vec![T::zero(); n + 1];
    let mut f = vec![T::zero(); n + 1];
    // convolution over the h-segment at nodes inside [0, Δ]
    for i in 1..k_steps {
        let mut acc = T::zero();
        for k in 0..i {
            let m = i - k - 1;
            acc += weights.a(m) * h_nodes[k] + weights.b(m) * h_nodes[k + 1];
        }
        f[i] = acc;
    }
    g[..=k_steps.min(n)].copy_from_slice(&h_nodes[..=k_steps.min(n)]);
    // junction node: the convolution is fully explicit (integrand = h there)
    f[k_steps] = forcing[0];
    g[k_steps] = h_nl.eval(forcing[0]).min(T::zero());
    for j in 1..=m_steps {
        let i = k_steps + j;
        let mut acc = forcing[j];
        for k in k_steps..i.saturating_sub(1) {
            let m = i - k - 1;
            acc += weights.a(m) * g[k] + weights.b(m) * g[k + 1];
        }
        acc += weights.a(0) * g[i - 1];
        let fi = implicit_step(h_nl, b0, acc, f[i - 1], Some(w_star))?;
        if fi <= w_star {
            return Err(Error::BoundViolation(format!(
                "(kappa*g)(t_{i}) = {fi:e} fell to w_* = {w_star:e}"
            )));
        }
        f[i] = fi;
        g[i] = h_nl.eval(fi).min(T::zero());
    }

    // residual over the solved region; panel values left of the junction are h
    let pl: Vec<T> = (0..n)
        .map(|j| if j < k_steps { h_nodes[j] } else { g[j] })
        .collect();
    let pr: Vec<T> = (0..n)
        .map(|j| if j + 1 <= k_steps { h_nodes[j + 1] } else { g[j + 1] })
        .collect();
    let residuals = residual_diag(kernel, &weights, &pl, &pr, &g, &|_, w| h_nl.eval(w), k_steps)?;
    let residual = max_abs(&residuals);
    let ts: Vec<T> = (0..=n).map(|i| dt * T::of(i as f64)).collect();
    let mut g_left = g.clone();
    g_left[k_steps] = h_nodes[k_steps]; // left limit at the junction is h(Δ⁻)
    Ok(IcSolve {
        grid: RiccatiGrid {
            u: None,
            dt,
            horizon: ts[n],
            ts,
            g,
            g_left,
            f,
            residuals,
            residual,
        },
        h_nodes,
        delta_steps: k_steps,
        forcing,
    })
}

/// Multi-horizon backward recursion: on backward time τ ∈ [T−t_{k+1}, T−t_k)
/// the nonlinearity H_{u_k} is active. Requires t₀ = 0, lattice-aligned times
/// and w_*(u₀) ≤ … ≤ w_*(u_{n−1}).
pub fn solve_riccati_multi<T: Real>(
    family: &NonlinearityFamily<'_, T>,
    kernel: &Kernel<T>,
    times: &[T],
    u_vec: &[T],
    dt: T,
) -> Result<RiccatiGrid<T>> {
    if times.len() < 2 || times.len() != u_vec.len() + 1 {
        return Err(Error::Domain(
            "solve_riccati_multi: need times = [t0, ..., tn] with one u per increment".into(),
        ));
    }
    let horizon = times[times.len() - 1];
    if times[0].abs() > T::of(1e-12) * T::one().max(horizon) {
        return Err(Error::Domain(format!(
            "solve_riccati_multi: t0 must be 0, got {}",
            times[0]
        )));
    }
    let n = lattice_steps(horizon, dt, "solve_riccati_multi horizon")?;
    let mut marks = Vec::with_capacity(times.len());
    for &t in times {
        let m = (t / dt).round();
        if (t - m * dt).abs() > T::of(1e-9) * T::one().max(horizon) {
            return Err(Error::Domain(format!(
                "solve_riccati_multi: time {t} is not on the dt = {dt} lattice"
            )));
        }
        marks.push(m.as_f64() as usize);
    }
    if marks.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain(
            "solve_riccati_multi: times must be non-decreasing".into(),
        ));
    }

    // drop zero-length increments (they contribute the factor 1)
    let mut segs: Vec<Segment<T>> = Vec::new();
    let mut kept_marks: Vec<usize> = vec![0];
    let mut w_stars: Vec<T> = Vec::new();
    for (k, &u) in u_vec.iter().enumerate() {
        if marks[k + 1] == marks[k] {
            continue;
        }
        if !(u >= T::zero() && u <= T::one()) {
            return Err(Error::Domain(format!(
                "solve_riccati_multi: u must lie in [0,1], got {u}"
            )));
        }
        let seg = Segment::prepare(family(u)?)?;
        w_stars.push(seg.w_star.unwrap_or(T::zero()));
        segs.push(seg);
        kept_marks.push(marks[k + 1]);
    }
    if segs.is_empty() {
        return Err(Error::Domain(
            "solve_riccati_multi: total horizon must be positive".into(),
        ));
    }
    for k in 0..w_stars.len() - 1 {
        let slop = T::of(1e-12) * T::one().max(w_stars[k].abs());
        if w_stars[k] > w_stars[k + 1] + slop {
            return Err(Error::Domain(format!(
                "solve_riccati_multi: root ordering violated between increments {k} and {}: \
                 w_*({:e}) > w_*({:e})",
                k + 1,
                w_stars[k],
                w_stars[k + 1]
            )));
        }
    }

    // node i (backward time iΔt) → active segment
    let nseg = segs.len();
    let mut seg_idx = vec![0usize; n + 1];
    for k in 0..nseg {
        let (lo, hi) = (n - kept_marks[k + 1], n - kept_marks[k]);
        for s in seg_idx.iter_mut().take(hi).skip(lo) {
            *s = k;
        }
    }
    seg_idx[n] = 0;

    let weights = ConvWeights::build(kernel, n, dt)?;
    let (g, g_left, f) = march(&weights, n, &segs, &|i| seg_idx[i], &|_| T::zero())?;
    let residuals = residual_diag(
        kernel,
        &weights,
        &g[..n],
        &g_left[1..],
        &g,
        &|i, w| segs[seg_idx[i]].h.eval(w),
        1,
    )?;
    let residual = max_abs(&residuals);
    let ts = (0..=n).map(|i| dt * T::of(i as f64)).collect();
    Ok(RiccatiGrid {
        u: None,
        dt,
        horizon,
        ts,
        g,
        g_left,
        f,
        residuals,
        residual,
    })
}

/// Which comparison-theorem regime a forcing function falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundCase {
    /// a non-decreasing into (w_*, w_max], staying left of the argmin: lower
    /// bound r₁ from Q₁ on H.
    Lower,
    /// as `Lower` but a crosses the argmin: Q̄₁ on the decreasing envelope H̄.
    LowerEnvelope,
    /// a ≡ w_*: the solution is identically w_*.
    Constant,
    /// a non-increasing below w_*: upper bound r₂ from Q₂.
    Upper,
}

#[derive(Debug, Clone)]
pub struct ComparisonBounds<T: Real> {
    pub case: BoundCase,
    pub ts: Vec<T>,
    /// r₁(tᵢ) (Lower/LowerEnvelope), w_* (Constant) or r₂(tᵢ) (Upper).
    pub bound: Vec<T>,
    pub w_star: T,
}

/// A-priori bounds for f(t) = a(t) + (κ⋆H(f))(t) by quadrature of the phase
/// integrals Q₁/Q̄₁/Q₂ and monotone inversion against ∫₀ᵗκ. The logarithmic
/// part near w_* is split off analytically via the tangent minorant
/// H′(w_*)(ζ−w_*); the remainder is regular and integrated adaptively.
pub fn comparison_bounds<T: Real>(
    h: &dyn ConvexNonlinearity<T>,
    kernel: &Kernel<T>,
    a: &dyn Fn(T) -> T,
    horizon: T,
    dt: T,
) -> Result<ComparisonBounds<T>> {
    let n = lattice_steps(horizon, dt, "comparison_bounds horizon")?;
    let ts: Vec<T> = (0..=n).map(|i| dt * T::of(i as f64)).collect();
    let avals: Vec<T> = ts.iter().map(|&t| a(t)).collect();
    let w_star = h.w_star()?;
    let w0 = h.argmin()?;
    let wmax = h.w_max();
    let hp = h.deriv(w_star);
    if !(hp < T::zero()) {
        return Err(Error::Domain(format!(
            "comparison_bounds: H'(w_*) must be negative, got {hp:e}"
        )));
    }
    let scale = T::one().max(w_star.abs());
    let slop = T::of(1e-12) * scale;

    let a0 = avals[0];
    let amin = avals.iter().fold(T::infinity(), |m, &v| m.min(v));
    let amax = avals.iter().fold(-T::infinity(), |m, &v| m.max(v));
    let nondec = avals.windows(2).all(|w| w[1] >= w[0] - slop);
    let noninc = avals.windows(2).all(|w| w[1] <= w[0] + slop);

    if avals
        .iter()
        .all(|&v| (v - w_star).abs() <= T::of(1e-10) * scale)
    {
        return Ok(ComparisonBounds {
            case: BoundCase::Constant,
            ts,
            bound: vec![w_star; n + 1],
            w_star,
        });
    }

    // floor the distance to w_* when evaluating the regularized integrand to
    // dodge catastrophic cancellation in (H − tangent); inactive for
    // realistic targets (see the clamp on the inversion domain)
    let floor = T::of(1e-6) * scale;
    let reg = |zeta: T| {
        let z = if zeta - w_star < floor { w_star + floor } else { zeta };
        let l = hp * (z - w_star);
        let hv = h.eval(z.min(w0));
        (hv - l) / (l * hv)
    };
    let reg_upper = |zeta: T| {
        let z = if w_star - zeta < floor { w_star - floor } else { zeta };
        let l = hp * (z - w_star);
        let hv = h.eval(z);
        (l - hv) / (l * hv)
    };
    let qtol = T::of(1e-11);
    let clamp = T::of(1e-14) * scale;

    if nondec && amin > w_star && amax <= wmax + slop {
        let case = if amax <= w0 + slop {
            BoundCase::Lower
        } else {
            BoundCase::LowerEnvelope
        };
        let q1 = |w: T| -> T {
            let log_part = -((a0 - w_star) / (w - w_star)).ln() / hp;
            let smooth = adaptive_simpson(&reg, w, a0, qtol);
            log_part + smooth
        };
        let mut bound = Vec::with_capacity(n + 1);
        for &t in &ts {
            let target = kernel.primitive(t)?;
            let mut lo = w_star + clamp;
            let mut hi = a0;
            for _ in 0..200 {
                if hi - lo <= T::of(1e-11) {
                    break;
                }
                let mid = (lo + hi) / T::of(2.0);
                if q1(mid) < target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            bound.push(lo); // lower endpoint: bias keeps w_* < r1 <= f robust
        }
        return Ok(ComparisonBounds {
            case,
            ts,
            bound,
            w_star,
        });
    }

    if noninc && amax < w_star - slop {
        let q2 = |w: T| -> T {
            let log_part = ((w_star - w) / (w_star - a0)).ln() / hp;
            let smooth = adaptive_simpson(&reg_upper, a0, w, qtol);
            log_part + smooth
        };
        let mut bound = Vec::with_capacity(n + 1);
        for &t in &ts {
            let target = kernel.primitive(t)?;
            let mut lo = a0;
            let mut hi = w_star - clamp;
            for _ in 0..200 {
                if hi - lo <= T::of(1e-11) {
                    break;
                }
                let mid = (lo + hi) / T::of(2.0);
                if q2(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            bound.push(hi); // upper endpoint: bias keeps f <= r2 < w_* robust
        }
        return Ok(ComparisonBounds {
            case: BoundCase::Upper,
            ts,
            bound,
            w_star,
        });
    }

    Err(Error::Domain(
        "comparison_bounds: forcing is not in any comparison class (non-decreasing into \
         (w_*, w_max], constant = w_*, or non-increasing below w_*)"
            .into(),
    ))
}

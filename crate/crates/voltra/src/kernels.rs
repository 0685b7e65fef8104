//! Kernel catalog, product-integration convolution weights, γ-resolvents and
//! Laplace transforms.

use crate::ml::mittag_leffler;
use crate::special::{adaptive_simpson, beta, gamma};
use crate::{Error, Real, Result};

/// Decreasing L₂-kernel κ with analytic metadata.
///
/// Analytic variants: `Constant(ζ)`, `Exponential(ζ,λ): ζe^{−λx}`,
/// `PowerLaw(ζ,α): ζx^{α−1}`, `MittagLeffler(ζ,α,λ): ζx^{α−1}E_{α,α}(−λxᵅ)`.
/// `Tabulated` interpolates linearly between abscissae; singular tables carry
/// explicit first-panel moments (∫κ, ∫sκ over [0, t₀]).
#[derive(Debug, Clone)]
pub enum Kernel<T: Real> {
    Constant { zeta: T },
    Exponential { zeta: T, lambda: T },
    PowerLaw { zeta: T, alpha: T },
    MittagLeffler { zeta: T, alpha: T, lambda: T },
    Tabulated(TabulatedKernel<T>),
}

#[derive(Debug, Clone)]
pub struct TabulatedKernel<T: Real> {
    ts: Vec<T>,
    vals: Vec<T>,
    /// (∫₀^{t₀}κ, ∫₀^{t₀}sκ) for tables whose kernel is singular left of t₀.
    first_panel: Option<(T, T)>,
    cum0: Vec<T>, // ∫₀^{ts[i]} κ
    cum1: Vec<T>, // ∫₀^{ts[i]} sκ(s) ds
    decreasing: bool,
    log_convex: bool,
}

fn ensure<T>(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}

impl<T: Real> Kernel<T> {
    pub fn constant(zeta: T) -> Result<Self> {
        ensure::<T>(zeta >= T::zero() && zeta.is_finite(), || {
            format!("Constant kernel: zeta must be finite and >= 0, got {zeta}")
        })?;
        Ok(Kernel::Constant { zeta })
    }

    pub fn exponential(zeta: T, lambda: T) -> Result<Self> {
        ensure::<T>(zeta >= T::zero() && zeta.is_finite(), || {
            format!("Exponential kernel: zeta must be finite and >= 0, got {zeta}")
        })?;
        ensure::<T>(lambda >= T::zero() && lambda.is_finite(), || {
            format!("Exponential kernel: lambda must be finite and >= 0, got {lambda}")
        })?;
        Ok(Kernel::Exponential { zeta, lambda })
    }

    pub fn power_law(zeta: T, alpha: T) -> Result<Self> {
        ensure::<T>(zeta >= T::zero() && zeta.is_finite(), || {
            format!("PowerLaw kernel: zeta must be finite and >= 0, got {zeta}")
        })?;
        ensure::<T>(alpha > T::of(0.5) && alpha <= T::one(), || {
            format!("PowerLaw kernel: alpha must lie in (1/2, 1] for an L2 decreasing kernel, got {alpha}")
        })?;
        Ok(Kernel::PowerLaw { zeta, alpha })
    }

    pub fn mittag_leffler(zeta: T, alpha: T, lambda: T) -> Result<Self> {
        ensure::<T>(zeta >= T::zero() && zeta.is_finite(), || {
            format!("MittagLeffler kernel: zeta must be finite and >= 0, got {zeta}")
        })?;
        ensure::<T>(alpha > T::of(0.5) && alpha <= T::one(), || {
            format!(
                "MittagLeffler kernel: alpha must lie in (1/2, 1] for an L2 decreasing kernel, got {alpha}"
            )
        })?;
        ensure::<T>(lambda >= T::zero() && lambda.is_finite(), || {
            format!("MittagLeffler kernel: lambda must be finite and >= 0, got {lambda}")
        })?;
        Ok(Kernel::MittagLeffler {
            zeta,
            alpha,
            lambda,
        })
    }

    /// Tabulated kernel. `first_panel = Some((m0, m1))` marks the table as
    /// singular left of `ts[0]` (evaluation there is an error; quadrature uses
    /// the supplied moments). With `None` and `ts[0] > 0` the kernel is
    /// extrapolated by `vals[0]` toward 0⁺.
    pub fn tabulated(ts: Vec<T>, vals: Vec<T>, first_panel: Option<(T, T)>) -> Result<Self> {
        TabulatedKernel::new(ts, vals, first_panel).map(Kernel::Tabulated)
    }

    /// κ(x). Singular variants reject x = 0.
    pub fn eval(&self, x: T) -> Result<T> {
        ensure::<T>(x >= T::zero() && x.is_finite(), || {
            format!("kernel evaluation needs x >= 0, got {x}")
        })?;
        match self {
            Kernel::Constant { zeta } => Ok(*zeta),
            Kernel::Exponential { zeta, lambda } => Ok(*zeta * (-*lambda * x).exp()),
            Kernel::PowerLaw { zeta, alpha } => {
                if *alpha == T::one() {
                    return Ok(*zeta);
                }
                if x == T::zero() {
                    return Err(Error::Singularity);
                }
                Ok(*zeta * x.powf(*alpha - T::one()))
            }
            Kernel::MittagLeffler {
                zeta,
                alpha,
                lambda,
            } => {
                if *alpha == T::one() {
                    return Ok(*zeta * (-*lambda * x).exp());
                }
                if x == T::zero() {
                    return Err(Error::Singularity);
                }
                let z = -*lambda * x.powf(*alpha);
                Ok(*zeta * x.powf(*alpha - T::one()) * mittag_leffler(*alpha, *alpha, z)?)
            }
            Kernel::Tabulated(tab) => tab.eval(x),
        }
    }

    /// ∫₀ᵗ κ(s) ds.
    pub fn primitive(&self, t: T) -> Result<T> {
        ensure::<T>(t >= T::zero() && t.is_finite(), || {
            format!("kernel primitive needs t >= 0, got {t}")
        })?;
        if t == T::zero() {
            return Ok(T::zero());
        }
        match self {
            Kernel::Constant { zeta } => Ok(*zeta * t),
            Kernel::Exponential { zeta, lambda } => {
                if *lambda == T::zero() {
                    Ok(*zeta * t)
                } else {
                    Ok(*zeta * (-(-*lambda * t).exp_m1()) / *lambda)
                }
            }
            Kernel::PowerLaw { zeta, alpha } => Ok(*zeta * t.powf(*alpha) / *alpha),
            Kernel::MittagLeffler {
                zeta,
                alpha,
                lambda,
            } => {
                let w = -*lambda * t.powf(*alpha);
                Ok(*zeta * t.powf(*alpha) * mittag_leffler(*alpha, *alpha + T::one(), w)?)
            }
            Kernel::Tabulated(tab) => Ok(tab.primitive(t)),
        }
    }

    /// ∫₀ᵗ s·κ(s) ds (first moment; drives the product-integration weights).
    pub fn first_moment(&self, t: T) -> Result<T> {
        ensure::<T>(t >= T::zero() && t.is_finite(), || {
            format!("kernel first moment needs t >= 0, got {t}")
        })?;
        if t == T::zero() {
            return Ok(T::zero());
        }
        let one = T::one();
        match self {
            Kernel::Constant { zeta } => Ok(*zeta * t * t / T::of(2.0)),
            Kernel::Exponential { zeta, lambda } => {
                if *lambda == T::zero() {
                    Ok(*zeta * t * t / T::of(2.0))
                } else {
                    let lt = *lambda * t;
                    // ζ(1 − (1+λt)e^{−λt})/λ²; stable via expm1 for small λt
                    let em = (-lt).exp();
                    Ok(*zeta * (one - (one + lt) * em) / (*lambda * *lambda))
                }
            }
            Kernel::PowerLaw { zeta, alpha } => {
                Ok(*zeta * t.powf(*alpha + one) / (*alpha + one))
            }
            Kernel::MittagLeffler {
                zeta,
                alpha,
                lambda,
            } => {
                let w = -*lambda * t.powf(*alpha);
                let e1 = mittag_leffler(*alpha, *alpha + one, w)?;
                let e2 = mittag_leffler(*alpha, *alpha + T::of(2.0), w)?;
                Ok(*zeta * t.powf(*alpha + one) * (e1 - e2))
            }
            Kernel::Tabulated(tab) => Ok(tab.first_moment(t)),
        }
    }

    /// (κ⋆κ)(t) in closed form; `None` for tabulated kernels.
    pub fn conv_square(&self, t: T) -> Result<Option<T>> {
        if t == T::zero() {
            return Ok(Some(T::zero()));
        }
        let one = T::one();
        let two = T::of(2.0);
        match self {
            Kernel::Constant { zeta } => Ok(Some(*zeta * *zeta * t)),
            Kernel::Exponential { zeta, lambda } => {
                Ok(Some(*zeta * *zeta * t * (-*lambda * t).exp()))
            }
            Kernel::PowerLaw { zeta, alpha } => {
                let b = beta(*alpha, *alpha);
                Ok(Some(*zeta * *zeta * b * t.powf(two * *alpha - one)))
            }
            Kernel::MittagLeffler {
                zeta,
                alpha,
                lambda,
            } => {
                let a = *alpha;
                let w = -*lambda * t.powf(a);
                let e2a = mittag_leffler(a, two * a, w)?;
                let e2am = mittag_leffler(a, two * a - one, w)?;
                let prab = e2a + (e2am - (two * a - one) * e2a) / a;
                Ok(Some(*zeta * *zeta * t.powf(two * a - one) * prab))
            }
            Kernel::Tabulated(_) => Ok(None),
        }
    }

    /// Laplace transform κ̂(z), z > 0.
    ///
    /// Closed forms: Constant ζ/z, Exponential ζ/(z+λ), MittagLeffler
    /// ζ/(zᵅ+λ). PowerLaw follows the ζz^{−α} convention (the Γ(α)
    /// normalization is absorbed into the definition there; note that this is
    /// the transform of ζxᵅ⁻¹/Γ(α), not of `eval`). Tabulated kernels are
    /// integrated by exponential-weighted product integration with a
    /// constant-value tail beyond the last abscissa.
    pub fn laplace(&self, z: T) -> Result<T> {
        ensure::<T>(z > T::zero() && z.is_finite(), || {
            format!("laplace transform needs z > 0, got {z}")
        })?;
        match self {
            Kernel::Constant { zeta } => Ok(*zeta / z),
            Kernel::Exponential { zeta, lambda } => Ok(*zeta / (z + *lambda)),
            Kernel::PowerLaw { zeta, alpha } => Ok(*zeta * z.powf(-*alpha)),
            Kernel::MittagLeffler {
                zeta,
                alpha,
                lambda,
            } => Ok(*zeta / (z.powf(*alpha) + *lambda)),
            Kernel::Tabulated(tab) => Ok(tab.laplace(z)),
        }
    }

    pub fn is_decreasing(&self) -> bool {
        match self {
            Kernel::Constant { .. }
            | Kernel::Exponential { .. }
            | Kernel::PowerLaw { .. }
            | Kernel::MittagLeffler { .. } => true,
            Kernel::Tabulated(tab) => tab.decreasing,
        }
    }

    pub fn is_log_convex(&self) -> bool {
        match self {
            Kernel::Constant { .. }
            | Kernel::Exponential { .. }
            | Kernel::PowerLaw { .. }
            | Kernel::MittagLeffler { .. } => true,
            Kernel::Tabulated(tab) => tab.log_convex,
        }
    }

    /// Singularity exponent α when κ(x) ~ xᵅ⁻¹ near 0, if unbounded there.
    pub fn singular_alpha(&self) -> Option<T> {
        match self {
            Kernel::PowerLaw { alpha, .. } | Kernel::MittagLeffler { alpha, .. }
                if *alpha < T::one() =>
            {
                Some(*alpha)
            }
            Kernel::Tabulated(tab) => tab.first_panel.map(|(m0, m1)| {
                let h = tab.ts[0];
                let r = m1 / (m0 * h);
                r / (T::one() - r)
            }),
            _ => None,
        }
    }

    /// κ multiplied by a positive scalar.
    pub fn scale(&self, c: T) -> Result<Self> {
        ensure::<T>(c > T::zero() && c.is_finite(), || {
            format!("kernel scale factor must be positive, got {c}")
        })?;
        Ok(match self {
            Kernel::Constant { zeta } => Kernel::Constant { zeta: *zeta * c },
            Kernel::Exponential { zeta, lambda } => Kernel::Exponential {
                zeta: *zeta * c,
                lambda: *lambda,
            },
            Kernel::PowerLaw { zeta, alpha } => Kernel::PowerLaw {
                zeta: *zeta * c,
                alpha: *alpha,
            },
            Kernel::MittagLeffler {
                zeta,
                alpha,
                lambda,
            } => Kernel::MittagLeffler {
                zeta: *zeta * c,
                alpha: *alpha,
                lambda: *lambda,
            },
            Kernel::Tabulated(tab) => {
                let vals = tab.vals.iter().map(|&v| v * c).collect();
                let fp = tab.first_panel.map(|(m0, m1)| (m0 * c, m1 * c));
                Kernel::Tabulated(TabulatedKernel::new(tab.ts.clone(), vals, fp).expect(
                    "scaling a valid table preserves validity",
                ))
            }
        })
    }

    /// Panel average (1/(b−a))∫ₐᵇκ — the weight the simulators use.
    pub fn average_on(&self, a: T, b: T) -> Result<T> {
        ensure::<T>(b > a && a >= T::zero(), || {
            format!("average_on needs 0 <= a < b, got a={a}, b={b}")
        })?;
        Ok((self.primitive(b)? - self.primitive(a)?) / (b - a))
    }

    /// (∫₀ᵗκ, ∫₀ᵗκ²) — the L₁/L₂ audit integrals. The L₂ integral is exact
    /// for Constant/Exponential/PowerLaw, quadrature with a power-model head
    /// for MittagLeffler and singular tables.
    pub fn integrability(&self, t: T) -> Result<(T, T)> {
        ensure::<T>(t > T::zero() && t.is_finite(), || {
            format!("integrability horizon must be positive, got {t}")
        })?;
        let l1 = self.primitive(t)?;
        let one = T::one();
        let two = T::of(2.0);
        let l2 = match self {
            Kernel::Constant { zeta } => *zeta * *zeta * t,
            Kernel::Exponential { zeta, lambda } => {
                if *lambda == T::zero() {
                    *zeta * *zeta * t
                } else {
                    *zeta * *zeta * (-(-two * *lambda * t).exp_m1()) / (two * *lambda)
                }
            }
            Kernel::PowerLaw { zeta, alpha } => {
                *zeta * *zeta * t.powf(two * *alpha - one) / (two * *alpha - one)
            }
            Kernel::MittagLeffler { zeta, alpha, .. } => {
                // head: κ ≈ ζ s^{α−1}/Γ(α) on [0, h0]
                let h0 = t * T::of(1e-6);
                let g = gamma(*alpha);
                let head = *zeta * *zeta / (g * g) * h0.powf(two * *alpha - one)
                    / (two * *alpha - one);
                let f = |s: T| {
                    let v = self.eval(s).unwrap_or(T::zero());
                    v * v
                };
                let tail = adaptive_simpson(&f, h0, t, T::of(1e-10) * (one + l1 * l1));
                head + tail
            }
            Kernel::Tabulated(tab) => tab.l2_integral(t),
        };
        Ok((l1, l2))
    }
}

impl<T: Real> TabulatedKernel<T> {
    fn new(ts: Vec<T>, vals: Vec<T>, first_panel: Option<(T, T)>) -> Result<Self> {
        ensure::<T>(ts.len() >= 2 && ts.len() == vals.len(), || {
            format!(
                "tabulated kernel needs >= 2 samples with matching lengths (got {} and {})",
                ts.len(),
                vals.len()
            )
        })?;
        ensure::<T>(
            ts.iter().all(|x| x.is_finite() && *x >= T::zero()),
            || "tabulated kernel abscissae must be finite and >= 0".into(),
        )?;
        ensure::<T>(
            ts.windows(2).all(|w| w[1] > w[0]),
            || "tabulated kernel abscissae must be strictly increasing".into(),
        )?;
        ensure::<T>(
            vals.iter().all(|v| v.is_finite() && *v >= T::zero()),
            || "tabulated kernel values must be finite and >= 0".into(),
        )?;
        if let Some((m0, m1)) = first_panel {
            let h = ts[0];
            ensure::<T>(h > T::zero(), || {
                "singular tabulated kernel needs ts[0] > 0".into()
            })?;
            ensure::<T>(m0 > T::zero() && m1 > T::zero() && m1 < m0 * h, || {
                format!(
                    "first-panel moments must satisfy 0 < m1 < m0·t0 (got m0={m0}, m1={m1}, t0={h})"
                )
            })?;
        }

        let n = ts.len();
        let mut cum0 = vec![T::zero(); n];
        let mut cum1 = vec![T::zero(); n];
        cum0[0] = match first_panel {
            Some((m0, _)) => m0,
            None => vals[0] * ts[0],
        };
        cum1[0] = match first_panel {
            Some((_, m1)) => m1,
            None => vals[0] * ts[0] * ts[0] / T::of(2.0),
        };
        let six = T::of(6.0);
        for i in 1..n {
            let (a, b) = (ts[i - 1], ts[i]);
            let (fa, fb) = (vals[i - 1], vals[i]);
            let h = b - a;
            cum0[i] = cum0[i - 1] + h * (fa + fb) / T::of(2.0);
            cum1[i] = cum1[i - 1]
                + h * (fa * (T::of(2.0) * a + b) + fb * (a + T::of(2.0) * b)) / six;
        }

        let slack = T::of(1e-9) * vals.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        let decreasing = vals.windows(2).all(|w| w[1] <= w[0] + slack)
            && first_panel
                .map(|(m0, _)| m0 / ts[0] + slack >= vals[0])
                .unwrap_or(true);
        let log_convex = vals.iter().all(|&v| v > T::zero()) && {
            let ln: Vec<T> = vals.iter().map(|v| v.ln()).collect();
            (1..n - 1).all(|i| {
                let dl = (ln[i] - ln[i - 1]) / (ts[i] - ts[i - 1]);
                let dr = (ln[i + 1] - ln[i]) / (ts[i + 1] - ts[i]);
                dr >= dl - T::of(1e-7) * (T::one() + dl.abs())
            })
        };

        Ok(TabulatedKernel {
            ts,
            vals,
            first_panel,
            cum0,
            cum1,
            decreasing,
            log_convex,
        })
    }

    pub fn abscissae(&self) -> &[T] {
        &self.ts
    }

    pub fn values(&self) -> &[T] {
        &self.vals
    }

    pub fn first_panel_moments(&self) -> Option<(T, T)> {
        self.first_panel
    }

    /// Inferred power-model parameters for the singular first panel:
    /// κ ≈ c·s^{p−1} fitted to the supplied moments.
    fn head_power(&self) -> Option<(T, T)> {
        self.first_panel.map(|(m0, m1)| {
            let h = self.ts[0];
            let r = m1 / (m0 * h);
            let p = r / (T::one() - r);
            (p, m0)
        })
    }

    fn eval(&self, x: T) -> Result<T> {
        let n = self.ts.len();
        if x < self.ts[0] {
            return if self.first_panel.is_some() {
                Err(Error::Singularity)
            } else {
                Ok(self.vals[0])
            };
        }
        if x >= self.ts[n - 1] {
            return Ok(self.vals[n - 1]);
        }
        let idx = match self.ts.binary_search_by(|t| t.partial_cmp(&x).unwrap()) {
            Ok(i) => return Ok(self.vals[i]),
            Err(i) => i, // x ∈ (ts[i-1], ts[i])
        };
        let (a, b) = (self.ts[idx - 1], self.ts[idx]);
        let w = (x - a) / (b - a);
        Ok(self.vals[idx - 1] * (T::one() - w) + self.vals[idx] * w)
    }

    fn head_primitive(&self, t: T) -> (T, T) {
        // (∫₀ᵗκ, ∫₀ᵗ sκ) for t ≤ ts[0]
        match self.head_power() {
            Some((p, m0)) => {
                let h = self.ts[0];
                let (_, m1) = self.first_panel.unwrap();
                let ratio = t / h;
                (m0 * ratio.powf(p), m1 * ratio.powf(p + T::one()))
            }
            None => (
                self.vals[0] * t,
                self.vals[0] * t * t / T::of(2.0),
            ),
        }
    }

    fn primitive(&self, t: T) -> T {
        self.moments(t).0
    }

    fn first_moment(&self, t: T) -> T {
        self.moments(t).1
    }

    fn moments(&self, t: T) -> (T, T) {
        let n = self.ts.len();
        if t <= self.ts[0] {
            return self.head_primitive(t);
        }
        if t >= self.ts[n - 1] {
            let end = self.ts[n - 1];
            let v = self.vals[n - 1];
            return (
                self.cum0[n - 1] + v * (t - end),
                self.cum1[n - 1] + v * (t * t - end * end) / T::of(2.0),
            );
        }
        let idx = self
            .ts
            .partition_point(|x| *x <= t); // ts[idx-1] <= t < ts[idx]
        let (a, b) = (self.ts[idx - 1], self.ts[idx]);
        let (fa, fb) = (self.vals[idx - 1], self.vals[idx]);
        let ft = fa + (fb - fa) * (t - a) / (b - a);
        let h = t - a;
        let m0 = self.cum0[idx - 1] + h * (fa + ft) / T::of(2.0);
        let m1 = self.cum1[idx - 1]
            + h * (fa * (T::of(2.0) * a + t) + ft * (a + T::of(2.0) * t)) / T::of(6.0);
        (m0, m1)
    }

    fn laplace(&self, z: T) -> T {
        let n = self.ts.len();
        let one = T::one();
        // first panel
        let mut acc = match self.first_panel {
            Some((m0, m1)) => m0 - z * m1, // e^{−zs} ≈ 1 − zs on the short panel
            None => {
                let h = self.ts[0];
                if h > T::zero() {
                    self.vals[0] * (one - (-z * h).exp()) / z
                } else {
                    T::zero()
                }
            }
        };
        // interior panels: exact exponential moments against the linear interpolant
        for i in 1..n {
            let (a, b) = (self.ts[i - 1], self.ts[i]);
            let (fa, fb) = (self.vals[i - 1], self.vals[i]);
            let (ea, eb) = ((-z * a).exp(), (-z * b).exp());
            let i0 = (ea - eb) / z;
            let i1 = ((a * z + one) * ea - (b * z + one) * eb) / (z * z);
            acc += fa * i0 + (fb - fa) / (b - a) * (i1 - a * i0);
        }
        // constant tail beyond the last abscissa
        acc + self.vals[n - 1] * (-z * self.ts[n - 1]).exp() / z
    }

    fn l2_integral(&self, t: T) -> T {
        let n = self.ts.len();
        let three = T::of(3.0);
        let mut acc = match self.head_power() {
            Some((p, m0)) => {
                // κ ≈ c s^{p−1}, c = m0·p/h^p ⇒ ∫κ² = c²·s^{2p−1}/(2p−1)
                let h = self.ts[0];
                let two_p = T::of(2.0) * p;
                if two_p > T::one() {
                    let c = m0 * p / h.powf(p);
                    let s = t.min(h);
                    c * c * s.powf(two_p - T::one()) / (two_p - T::one())
                } else {
                    T::infinity()
                }
            }
            None => self.vals[0] * self.vals[0] * self.ts[0].min(t),
        };
        for i in 1..n {
            if t <= self.ts[i - 1] {
                break;
            }
            let (a, b) = (self.ts[i - 1], self.ts[i].min(t));
            let fa = self.vals[i - 1];
            let fb = self.eval(b).unwrap_or(self.vals[i]);
            acc += (b - a) * (fa * fa + fa * fb + fb * fb) / three;
        }
        if t > self.ts[n - 1] {
            let v = self.vals[n - 1];
            acc += v * v * (t - self.ts[n - 1]);
        }
        acc
    }
}

/// Product-integration convolution weights on a uniform grid: exact for
/// piecewise-linear integrands. Stationary in the lag, so only the per-lag
/// pair (A(m), B(m)) is stored:
/// (κ⋆f)(tᵢ) = Σ_{k<i} A(i−k−1)·f(t_k) + B(i−k−1)·f(t_{k+1}).
#[derive(Debug, Clone)]
pub struct ConvWeights<T: Real> {
    pub dt: T,
    pub n: usize,
    a: Vec<T>,
    b: Vec<T>,
}

impl<T: Real> ConvWeights<T> {
    pub fn build(kernel: &Kernel<T>, n: usize, dt: T) -> Result<Self> {
        ensure::<T>(n >= 1, || "conv_weights: need n >= 1".into())?;
        ensure::<T>(dt > T::zero() && dt.is_finite(), || {
            format!("conv_weights: dt must be positive, got {dt}")
        })?;
        let mut p0 = Vec::with_capacity(n + 1);
        let mut p1 = Vec::with_capacity(n + 1);
        for m in 0..=n {
            let t = dt * T::of(m as f64);
            p0.push(kernel.primitive(t)?);
            p1.push(kernel.first_moment(t)?);
        }
        let mut a = vec![T::zero(); n];
        let mut b = vec![T::zero(); n];
        for m in 0..n {
            let tm = dt * T::of(m as f64);
            let tm1 = dt * T::of((m + 1) as f64);
            let m0 = p0[m + 1] - p0[m];
            let m1 = p1[m + 1] - p1[m];
            a[m] = (m1 - tm * m0) / dt;
            b[m] = (tm1 * m0 - m1) / dt;
        }
        Ok(ConvWeights { dt, n, a, b })
    }

    #[inline]
    pub fn a(&self, m: usize) -> T {
        self.a[m]
    }

    #[inline]
    pub fn b(&self, m: usize) -> T {
        self.b[m]
    }

    /// Diagonal weight w_{i,i} (the implicit weight in the Riccati march).
    #[inline]
    pub fn diag(&self) -> T {
        self.b[0]
    }

    /// Full row weight w_{i,j} for (κ⋆f)(tᵢ) = Σ_j w_{i,j} f(t_j).
    pub fn weight(&self, i: usize, j: usize) -> T {
        assert!(i <= self.n && j <= i && i >= 1);
        if j == i {
            self.b[0]
        } else if j == 0 {
            self.a[i - 1]
        } else {
            self.a[i - j - 1] + self.b[i - j]
        }
    }

    /// (κ⋆f) at every node, f given at nodes 0..=n (piecewise linear).
    pub fn convolve(&self, f: &[T]) -> Vec<T> {
        assert!(f.len() <= self.n + 1);
        let mut out = vec![T::zero(); f.len()];
        for (i, o) in out.iter_mut().enumerate().skip(1) {
            let mut acc = T::zero();
            for k in 0..i {
                let m = i - k - 1;
                acc += self.a[m] * f[k] + self.b[m] * f[k + 1];
            }
            *o = acc;
        }
        out
    }

    /// Row sum Σ_j w_{i,j}; equals ∫₀^{tᵢ}κ exactly by construction.
    pub fn row_sum(&self, i: usize) -> T {
        let mut s = T::zero();
        for m in 0..i {
            s += self.a[m] + self.b[m];
        }
        s
    }
}

/// γ-resolvent: the kernel r solving r = κ + γ(κ⋆r), tabulated on the grid
/// {Δt, …, nΔt}. γ < 0 requires log-convexity of κ. γ = 0 returns κ itself.
///
/// Smooth kernels use direct collocation of the second-kind equation; kernels
/// singular at 0 are handled through d = r − κ, which solves
/// d = γ(κ⋆κ) + γ(κ⋆d) with a bounded right side (κ⋆κ in closed form), and a
/// power-profile first panel d(s) ∝ s^{2α−1}. Singular *tabulated* kernels are
/// rejected (no closed-form κ⋆κ).
pub fn gamma_resolvent<T: Real>(kernel: &Kernel<T>, gamma: T, n: usize, dt: T) -> Result<Kernel<T>> {
    ensure::<T>(gamma.is_finite(), || "gamma_resolvent: gamma must be finite".into())?;
    if gamma < T::zero() && !kernel.is_log_convex() {
        return Err(Error::Domain(
            "gamma_resolvent: gamma < 0 requires a log-convex kernel".into(),
        ));
    }
    if gamma == T::zero() {
        return Ok(kernel.clone());
    }
    ensure::<T>(n >= 2, || "gamma_resolvent: need n >= 2 grid steps".into())?;
    let w = ConvWeights::build(kernel, n, dt)?;

    let singular = kernel.singular_alpha().is_some();
    if singular && matches!(kernel, Kernel::Tabulated(_)) {
        return Err(Error::Domain(
            "gamma_resolvent: singular tabulated kernels are unsupported (no closed-form \
             kappa*kappa); re-tabulate from an analytic variant"
                .into(),
        ));
    }

    if !singular {
        let mut r = Vec::with_capacity(n + 1);
        r.push(kernel.eval(T::zero())?);
        let denom = T::one() - gamma * w.b(0);
        ensure::<T>(denom.abs() > T::of(1e-12), || {
            "gamma_resolvent: diagonal 1 - gamma*B(0) vanishes; reduce dt".into()
        })?;
        for i in 1..=n {
            let mut acc = T::zero();
            for k in 0..i.saturating_sub(1) {
                let m = i - k - 1;
                acc += w.a(m) * r[k] + w.b(m) * r[k + 1];
            }
            acc += w.a(0) * r[i - 1];
            let ri = (kernel.eval(dt * T::of(i as f64))? + gamma * acc) / denom;
            r.push(ri);
        }
        check_resolvent_sign(&r, gamma)?;
        let ts = (0..=n).map(|i| dt * T::of(i as f64)).collect();
        return Kernel::tabulated(ts, r, None);
    }

    // singular analytic kernel: d-form
    let alpha = kernel.singular_alpha().expect("checked singular");
    let p = T::of(2.0) * alpha - T::one();
    let nsub = 12usize;
    // geometric subdivision of the first panel: 0, dt/2^(nsub-1), ..., dt
    let mut subs = Vec::with_capacity(nsub + 1);
    subs.push(T::zero());
    for j in 0..nsub {
        subs.push(dt * T::of(2f64.powi(-((nsub - 1 - j) as i32))));
    }
    // first-panel coefficient: ∫₀^Δt κ(tᵢ−s)·(s/Δt)^p ds ≈ fpc(i)·d₁
    let first_panel_coeff = |i: usize| -> Result<T> {
        let ti = dt * T::of(i as f64);
        let mut acc = T::zero();
        for j in 0..subs.len() - 1 {
            let (s0, s1) = (subs[j], subs[j + 1]);
            let m0 = kernel.primitive(ti - s0)? - kernel.primitive(ti - s1)?;
            let m1 = kernel.first_moment(ti - s0)? - kernel.first_moment(ti - s1)?;
            let f0 = (s0 / dt).powf(p);
            let f1 = (s1 / dt).powf(p);
            acc += f0 * m0 + (f1 - f0) / (s1 - s0) * ((ti - s0) * m0 - m1);
        }
        Ok(acc)
    };

    let mut d = vec![T::zero(); n + 1];
    let mut q = vec![T::zero(); n + 1];
    for (i, qi) in q.iter_mut().enumerate().skip(1) {
        let t = dt * T::of(i as f64);
        *qi = gamma
            * kernel
                .conv_square(t)?
                .expect("analytic kernels carry closed-form conv_square");
    }
    let fpc1 = first_panel_coeff(1)?;
    let denom1 = T::one() - gamma * fpc1;
    ensure::<T>(denom1.abs() > T::of(1e-12), || {
        "gamma_resolvent: singular first-panel system degenerate; reduce dt".into()
    })?;
    d[1] = q[1] / denom1;
    let denom = T::one() - gamma * w.b(0);
    ensure::<T>(denom.abs() > T::of(1e-12), || {
        "gamma_resolvent: diagonal 1 - gamma*B(0) vanishes; reduce dt".into()
    })?;
    for i in 2..=n {
        let mut acc = first_panel_coeff(i)? * d[1];
        for k in 1..i - 1 {
            let m = i - k - 1;
            acc += w.a(m) * d[k] + w.b(m) * d[k + 1];
        }
        acc += w.a(0) * d[i - 1];
        d[i] = (q[i] + gamma * acc) / denom;
    }

    let mut ts = Vec::with_capacity(n);
    let mut vals = Vec::with_capacity(n);
    for i in 1..=n {
        ts.push(dt * T::of(i as f64));
        vals.push(kernel.eval(dt * T::of(i as f64))? + d[i]);
    }
    check_resolvent_sign(&vals, gamma)?;
    let m0 = kernel.primitive(dt)? + d[1] * dt / (T::of(2.0) * alpha);
    let m1 = kernel.first_moment(dt)? + d[1] * dt * dt / (T::of(2.0) * alpha + T::one());
    Kernel::tabulated(ts, vals, Some((m0, m1)))
}

fn check_resolvent_sign<T: Real>(r: &[T], gamma: T) -> Result<()> {
    if gamma < T::zero() {
        return Ok(()); // r ≥ 0 is only guaranteed for γ ≥ 0
    }
    let scale = r.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let tol = T::of(1e-10) * scale.max(T::one());
    match r.iter().enumerate().find(|(_, &v)| v < -tol) {
        Some((i, &v)) => Err(Error::Numerical(format!(
            "gamma_resolvent: negative resolvent value {v:e} at node {i} (gamma >= 0 should give r >= 0)"
        ))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_catalog_examples() {
        let k = Kernel::exponential(0.3, 1.2).unwrap();
        assert_eq!(k.eval(0.0).unwrap(), 0.3);
        let k = Kernel::mittag_leffler(1.0, 1.0, 1.2).unwrap();
        assert!((k.eval(2.0).unwrap() - (-2.4_f64).exp()).abs() < 1e-15);
        let k = Kernel::power_law(1.0, 0.6).unwrap();
        assert!((k.eval(4.0).unwrap() - 4.0_f64.powf(-0.4)).abs() < 1e-15);
        assert!(matches!(k.eval(0.0), Err(Error::Singularity)));
    }

    #[test]
    fn primitive_examples() {
        let k = Kernel::<f64>::constant(0.3).unwrap();
        assert!((k.primitive(2.0).unwrap() - 0.6).abs() < 1e-15);
        let k = Kernel::<f64>::exponential(1.0, 2.0).unwrap();
        assert!((k.primitive(1e3).unwrap() - 0.5).abs() < 1e-12); // limit ζ/λ
    }

    #[test]
    fn ml_primitive_matches_quadrature() {
        // independent check: adaptive quadrature with singular substitution
        // s = y^{1/α}: ∫₀ᵗκ(s)ds = ∫₀^{tᵅ} κ(y^{1/α})·y^{1/α−1}/α dy
        let k = Kernel::mittag_leffler(1.0, 0.6, 1.0).unwrap();
        let alpha = 0.6;
        let f = |y: f64| {
            if y == 0.0 {
                // integrand → E_{α,α}(0)/α at y→0 after the substitution
                return crate::special::recip_gamma(alpha) / alpha;
            }
            let s = y.powf(1.0 / alpha);
            k.eval(s).unwrap() * s.powf(1.0 - alpha) / alpha
        };
        let want = adaptive_simpson(&f, 0.0, 1.0_f64.powf(alpha), 1e-12);
        let got = k.primitive(1.0).unwrap();
        assert!(
            (got - want).abs() < 1e-9,
            "ML primitive {got} vs quadrature {want}"
        );
    }

    #[test]
    fn first_moment_matches_quadrature() {
        for k in [
            Kernel::exponential(0.7, 1.3).unwrap(),
            Kernel::mittag_leffler(0.5, 0.7, 2.0).unwrap(),
            Kernel::power_law(1.1, 0.8).unwrap(),
        ] {
            let f = |s: f64| if s == 0.0 { 0.0 } else { s * k.eval(s).unwrap() };
            let want = adaptive_simpson(&f, 1e-12, 1.5, 1e-12);
            let got = k.first_moment(1.5).unwrap();
            assert!(
                (got - want).abs() < 1e-7,
                "{k:?}: first moment {got} vs {want}"
            );
        }
    }

    #[test]
    fn conv_square_matches_direct_convolution() {
        for k in [
            Kernel::exponential(0.7, 1.3).unwrap(),
            Kernel::mittag_leffler(1.0, 0.6, 1.5).unwrap(),
            Kernel::power_law(1.0, 0.6).unwrap(),
            Kernel::constant(0.4).unwrap(),
        ] {
            let t = 0.8_f64;
            // (κ⋆κ)(t) = ∫κ(t−s)κ(s)ds, symmetric: 2∫₀^{t/2}
            let f = |s: f64| {
                if s == 0.0 {
                    return 0.0;
                }
                k.eval(t - s).unwrap() * k.eval(s).unwrap()
            };
            let half = adaptive_simpson(&f, 1e-13, t / 2.0, 1e-12);
            let wedge = {
                // singular part near s→0: κ(s) ~ c s^{α−1}; integrate model
                match k.singular_alpha() {
                    Some(a) => {
                        let c = k.eval(1e-13).unwrap() / 1e-13_f64.powf(a - 1.0);
                        k.eval(t).unwrap() * c * 1e-13_f64.powf(a) / a
                    }
                    None => 0.0,
                }
            };
            let want = 2.0 * (half + wedge);
            let got = k.conv_square(t).unwrap().unwrap();
            assert!(
                (got - want).abs() < 2e-8 * want.abs().max(1.0),
                "{k:?}: conv_square {got} vs quadrature {want}"
            );
        }
    }

    #[test]
    fn laplace_closed_forms() {
        let k = Kernel::<f64>::exponential(1.0, 2.0).unwrap();
        assert!((k.laplace(1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let k = Kernel::<f64>::mittag_leffler(1.0, 0.6, 1.0).unwrap();
        assert!((k.laplace(1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tabulated_roundtrip_and_laplace() {
        // tabulate an exponential kernel and compare laplace/eval/primitive
        let k = Kernel::exponential(0.8, 1.5).unwrap();
        let n = 4000usize;
        let dt = 5e-3;
        let ts: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let vals: Vec<f64> = ts.iter().map(|&t| k.eval(t).unwrap()).collect();
        let tab = Kernel::tabulated(ts, vals, None).unwrap();
        assert!(tab.is_decreasing());
        assert!(tab.is_log_convex());
        assert!((tab.eval(0.33).unwrap() - k.eval(0.33).unwrap()).abs() < 1e-5);
        assert!((tab.primitive(7.0).unwrap() - k.primitive(7.0).unwrap()).abs() < 1e-5);
        for z in [0.5, 1.0, 2.0] {
            let got = tab.laplace(z).unwrap();
            let want = k.laplace(z).unwrap();
            assert!((got - want).abs() < 1e-4, "z={z}: {got} vs {want}");
        }
    }

    #[test]
    fn conv_weights_exactness() {
        // constant kernel applied to f ≡ 1
        let k = Kernel::<f64>::constant(1.0).unwrap();
        let w = ConvWeights::build(&k, 2, 1.0).unwrap();
        let out = w.convolve(&[1.0, 1.0, 1.0]);
        assert!((out[2] - 2.0).abs() < 1e-15);

        // exponential kernel, f ≡ 1: (κ⋆f)(tᵢ) = 1 − e^{−tᵢ} exactly
        let k = Kernel::exponential(1.0, 1.0).unwrap();
        let n = 8;
        let w = ConvWeights::build(&k, n, 0.5).unwrap();
        let f = vec![1.0; n + 1];
        let out = w.convolve(&f);
        for (i, &v) in out.iter().enumerate() {
            let want = 1.0 - (-(i as f64) * 0.5).exp();
            assert!((v - want).abs() < 1e-14, "node {i}: {v} vs {want}");
        }

        // power-law kernel against f(s) = s: Beta integral at t = 1
        let k = Kernel::power_law(1.0, 0.6).unwrap();
        let n = 100;
        let dt = 1e-2;
        let w = ConvWeights::build(&k, n, dt).unwrap();
        let f: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let out = w.convolve(&f);
        let want = 1.0 / (0.6 * 1.6); // B(0.6, 2)
        assert!(
            (out[n] - want).abs() < 1e-13,
            "Beta integral: {} vs {want}",
            out[n]
        );
    }

    #[test]
    fn conv_weight_row_sums_and_positivity() {
        for k in [
            Kernel::exponential(0.3, 1.2).unwrap(),
            Kernel::mittag_leffler(0.3, 0.6, 1.2).unwrap(),
            Kernel::power_law(1.0, 0.55).unwrap(),
        ] {
            let n = 50;
            let dt = 0.02;
            let w = ConvWeights::build(&k, n, dt).unwrap();
            for m in 0..n {
                assert!(w.a(m) >= 0.0 && w.b(m) >= 0.0, "negative weight at lag {m}");
            }
            for i in [1usize, 7, 50] {
                let want = k.primitive(i as f64 * dt).unwrap();
                let got = w.row_sum(i);
                assert!(
                    (got - want).abs() < 1e-13 * want.max(1.0),
                    "{k:?} row {i}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn resolvent_gamma_zero_is_identity() {
        let k = Kernel::mittag_leffler(0.3, 0.6, 1.2).unwrap();
        let r = gamma_resolvent(&k, 0.0, 100, 1e-2).unwrap();
        // exact pass-through, same variant
        match (k, r) {
            (
                Kernel::MittagLeffler {
                    zeta: z1,
                    alpha: a1,
                    lambda: l1,
                },
                Kernel::MittagLeffler {
                    zeta: z2,
                    alpha: a2,
                    lambda: l2,
                },
            ) => {
                assert_eq!((z1, a1, l1), (z2, a2, l2));
            }
            _ => panic!("gamma=0 must return the kernel unchanged"),
        }
    }

    #[test]
    fn resolvent_rejects_gamma_negative_without_log_convexity() {
        // a non-log-convex table: a bump
        let ts = vec![0.0, 0.5, 1.0, 1.5];
        let vals = vec![1.0, 1.0, 0.2, 0.1999];
        let tab = Kernel::tabulated(ts, vals, None).unwrap();
        assert!(!tab.is_log_convex());
        assert!(matches!(
            gamma_resolvent(&tab, -0.5, 10, 0.1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn integrability_audit() {
        let (l1, l2) = Kernel::exponential(1.0, 2.0)
            .unwrap()
            .integrability(3.0)
            .unwrap();
        assert!((l1 - (1.0 - (-6.0_f64).exp()) / 2.0).abs() < 1e-14);
        assert!((l2 - (1.0 - (-12.0_f64).exp()) / 4.0).abs() < 1e-14);
        let (l1, l2) = Kernel::<f64>::mittag_leffler(1.0, 0.6, 1.0)
            .unwrap()
            .integrability(1.0)
            .unwrap();
        assert!(l1.is_finite() && l2.is_finite() && l1 > 0.0 && l2 > 0.0);
    }
}

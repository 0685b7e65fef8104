//! Monte-Carlo engines: forward-variance paths, grid order-flow paths and an
//! exact thinning simulator for the raw Hawkes description, plus empirical
//! CGF / distribution diagnostics.

use crate::cgf::{AfiModel, AfvModel};
use crate::kernels::Kernel;
use crate::riccati::{JumpLaw, JumpSpec};
use crate::{lattice_steps, Error, Result, SimReal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// Common Monte-Carlo configuration. Every source of randomness derives from
/// `seed`: path p uses an independent counter-based stream `p + 1` of the
/// same seeded generator, so results are reproducible and independent of the
/// number of worker threads.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig<T: crate::Real> {
    pub horizon: T,
    pub dt: T,
    pub n_paths: usize,
    pub seed: u64,
}

impl<T: crate::Real> SimConfig<T> {
    pub fn new(horizon: T, dt: T, n_paths: usize, seed: u64) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::Domain("n_paths must be >= 1".into()));
        }
        lattice_steps(horizon, dt, "simulation horizon")?;
        Ok(SimConfig {
            horizon,
            dt,
            n_paths,
            seed,
        })
    }
}

/// Terminal state of a diffusion path batch.
#[derive(Debug, Clone)]
pub struct PathBatch<T: crate::Real> {
    pub horizon: T,
    pub dt: T,
    pub seed: u64,
    /// X_T − X_0 per path.
    pub x: Vec<T>,
    /// Terminal variance V_T per path.
    pub v: Vec<T>,
    /// Fraction of (path, node) pairs where the variance was truncated at 0.
    pub clamped_fraction: T,
}

/// Events of one order-flow path (diagnostic output of the thinning scheme).
#[derive(Debug, Clone)]
pub struct EventStream<T: crate::Real> {
    pub times: Vec<T>,
    /// Signed marks: +size for buys, −size for sells.
    pub marks: Vec<T>,
    /// Intensity immediately after each event.
    pub intensities: Vec<T>,
}

/// Terminal state of an order-flow path batch.
#[derive(Debug, Clone)]
pub struct AfiBatch<T: crate::Real> {
    pub horizon: T,
    pub seed: u64,
    /// X_T − X_0 per path.
    pub x: Vec<T>,
    /// Terminal intensity λ_T per path.
    pub lambda: Vec<T>,
    /// Total event count per path.
    pub counts: Vec<u64>,
    /// Fraction of (path, node) pairs where the intensity was truncated at 0
    /// (grid scheme only; the thinning scheme is exact and never clamps).
    pub clamped_fraction: T,
    /// Branching ratio (γ₊m₊ + γ₋m₋)·∫φ of the raw description (thinning
    /// scheme only); ≥ 1 means the cascade is unstable.
    pub branching: T,
    /// Event log of path 0 (thinning scheme only).
    pub sample_path: Option<EventStream<T>>,
}

/// Convolution state for the intensity/variance memory. Exponential and
/// constant kernels admit an O(1) geometric update; other shapes fall back to
/// the direct O(n²) panel-averaged convolution.
enum Memory<T: crate::Real> {
    Geometric { w0: T, ratio: T, acc: T },
    Direct { w: Vec<T>, z: Vec<T> },
}

impl<T: crate::Real> Memory<T> {
    fn build(kernel: &Kernel<T>, n: usize, dt: T) -> Result<Self> {
        match kernel {
            Kernel::Exponential { lambda, .. } => Ok(Memory::Geometric {
                w0: kernel.average_on(T::zero(), dt)?,
                ratio: (-*lambda * dt).exp(),
                acc: T::zero(),
            }),
            Kernel::Constant { .. } => Ok(Memory::Geometric {
                w0: kernel.average_on(T::zero(), dt)?,
                ratio: T::one(),
                acc: T::zero(),
            }),
            _ => {
                let mut w = Vec::with_capacity(n);
                for m in 0..n {
                    w.push(kernel.average_on(dt * T::of(m as f64), dt * T::of((m + 1) as f64))?);
                }
                Ok(Memory::Direct {
                    w,
                    z: Vec::with_capacity(n),
                })
            }
        }
    }

    fn fresh(&self) -> Self {
        match self {
            Memory::Geometric { w0, ratio, .. } => Memory::Geometric {
                w0: *w0,
                ratio: *ratio,
                acc: T::zero(),
            },
            Memory::Direct { w, .. } => Memory::Direct {
                w: w.clone(),
                z: Vec::with_capacity(w.len()),
            },
        }
    }

    /// Σ_{j<i} ω_{i−1−j} z_j for the current node i.
    fn contribution(&self) -> T {
        match self {
            Memory::Geometric { w0, acc, .. } => *w0 * *acc,
            Memory::Direct { w, z } => {
                let i = z.len();
                let mut s = T::zero();
                for (j, &zj) in z.iter().enumerate() {
                    s += w[i - 1 - j] * zj;
                }
                s
            }
        }
    }

    fn push(&mut self, innovation: T) {
        match self {
            Memory::Geometric { ratio, acc, .. } => *acc = *ratio * *acc + innovation,
            Memory::Direct { z, .. } => z.push(innovation),
        }
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(path as u64 + 1);
    rng
}

/// Sample the forward-variance model: full-truncation scheme for
/// V(tᵢ) = ξ₀(tᵢ) + Σ_{j<i} ω_{i−1−j}√V⁺(tⱼ)ΔWⱼ with panel-averaged kernel
/// weights, and the exact discrete exponential-martingale update for X.
pub fn simulate_afv<T: SimReal>(model: &AfvModel<T>, cfg: &SimConfig<T>) -> Result<PathBatch<T>> {
    let n = lattice_steps(cfg.horizon, cfg.dt, "simulate_afv horizon")?;
    if cfg.n_paths == 0 {
        return Err(Error::Domain("n_paths must be >= 1".into()));
    }
    let dt = cfg.dt;
    let mut xi = Vec::with_capacity(n + 1);
    for i in 0..=n {
        xi.push(model.curve.eval(dt * T::of(i as f64))?);
    }
    let memory0 = Memory::build(&model.kernel, n, dt)?;
    let rho = model.rho;
    let rho_perp = (T::one() - rho * rho).sqrt();
    let sqrt_dt = dt.sqrt();
    let half = T::of(0.5);

    let rows: Vec<(T, T, u64)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p);
            let mut mem = memory0.fresh();
            let mut x = T::zero();
            let mut clamps = 0u64;
            for i in 0..n {
                let v = xi[i] + mem.contribution();
                let vp = if v < T::zero() {
                    clamps += 1;
                    T::zero()
                } else {
                    v
                };
                let sv = vp.sqrt();
                let dw = T::std_normal(&mut rng) * sqrt_dt;
                let dw_perp = T::std_normal(&mut rng) * sqrt_dt;
                x += -half * vp * dt + sv * (rho * dw + rho_perp * dw_perp);
                mem.push(sv * dw);
            }
            let v_final = xi[n] + mem.contribution();
            (x, v_final, clamps)
        })
        .collect();

    let mut x = Vec::with_capacity(cfg.n_paths);
    let mut v = Vec::with_capacity(cfg.n_paths);
    let mut clamps = 0u64;
    for (xp, vp, c) in rows {
        x.push(xp);
        v.push(vp);
        clamps += c;
    }
    let clamped_fraction = T::of(clamps as f64 / (cfg.n_paths as f64 * n as f64));
    Ok(PathBatch {
        horizon: cfg.horizon,
        dt,
        seed: cfg.seed,
        x,
        v,
        clamped_fraction,
    })
}

fn sample_jump<T: SimReal, R: Rng + ?Sized>(law: &JumpLaw<T>, rng: &mut R) -> T {
    match law {
        JumpLaw::Dirac { size } => *size,
        JumpLaw::Exponential { mean } => *mean * T::exp1(rng),
        JumpLaw::Discrete { points, weights } => {
            let u = T::unit_uniform(rng);
            let mut acc = T::zero();
            for (x, w) in points.iter().zip(weights) {
                acc += *w;
                if u <= acc {
                    return *x;
                }
            }
            points[points.len() - 1]
        }
    }
}

/// Euler-type grid scheme for the order-flow model: per step each side draws
/// Poisson(λ⁺Δt) events, the intensity memory is driven by the compensated
/// innovation γ₊(S⁺ − m₊λ⁺Δt) + γ₋(S⁻ − m₋λ⁺Δt), and X uses the same
/// truncated intensity in jumps and compensator so that e^X stays an exact
/// discrete martingale.
pub fn simulate_afi_grid<T: SimReal>(model: &AfiModel<T>, cfg: &SimConfig<T>) -> Result<AfiBatch<T>> {
    let n = lattice_steps(cfg.horizon, cfg.dt, "simulate_afi_grid horizon")?;
    if cfg.n_paths == 0 {
        return Err(Error::Domain("n_paths must be >= 1".into()));
    }
    let dt = cfg.dt;
    let mut xi = Vec::with_capacity(n + 1);
    for i in 0..=n {
        xi.push(model.curve.eval(dt * T::of(i as f64))?);
    }
    let memory0 = Memory::build(&model.kernel, n, dt)?;
    let jumps = &model.jumps;
    let (gp, gm) = (jumps.gamma_plus, jumps.gamma_minus);
    let (mp, mm) = (jumps.mean_plus(), jumps.mean_minus());
    let m_x = jumps.m_x();

    let rows: Vec<(T, T, u64, u64)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, p);
            let mut mem = memory0.fresh();
            let mut x = T::zero();
            let mut clamps = 0u64;
            let mut events = 0u64;
            for i in 0..n {
                let lam = xi[i] + mem.contribution();
                let lamp = if lam < T::zero() {
                    clamps += 1;
                    T::zero()
                } else {
                    lam
                };
                let mean = lamp * dt;
                let n_plus = T::poisson(&mut rng, mean);
                let n_minus = T::poisson(&mut rng, mean);
                events += n_plus + n_minus;
                let mut s_plus = T::zero();
                for _ in 0..n_plus {
                    s_plus += sample_jump(&jumps.law_plus, &mut rng);
                }
                let mut s_minus = T::zero();
                for _ in 0..n_minus {
                    s_minus += sample_jump(&jumps.law_minus, &mut rng);
                }
                x += s_plus - s_minus - m_x * mean;
                mem.push(gp * (s_plus - mp * mean) + gm * (s_minus - mm * mean));
            }
            let lam_final = xi[n] + mem.contribution();
            (x, lam_final, events, clamps)
        })
        .collect();

    let mut x = Vec::with_capacity(cfg.n_paths);
    let mut lambda = Vec::with_capacity(cfg.n_paths);
    let mut counts = Vec::with_capacity(cfg.n_paths);
    let mut clamps = 0u64;
    for (xp, lp, ev, c) in rows {
        x.push(xp);
        lambda.push(lp);
        counts.push(ev);
        clamps += c;
    }
    let clamped_fraction = T::of(clamps as f64 / (cfg.n_paths as f64 * n as f64));
    Ok(AfiBatch {
        horizon: cfg.horizon,
        seed: cfg.seed,
        x,
        lambda,
        counts,
        clamped_fraction,
        branching: T::zero(),
        sample_path: None,
    })
}

/// Raw two-sided Hawkes description: baseline μ, excitation kernel φ, impact
/// coefficients and mark laws. Both sides share the common intensity
/// λ(t) = μ + Σ_e γ_{side(e)}·mark_e·φ(t − t_e) (total event rate 2λ).
#[derive(Debug, Clone)]
pub struct HawkesSpec<T: crate::Real> {
    pub mu: T,
    pub phi: Kernel<T>,
    pub jumps: JumpSpec<T>,
}

impl<T: crate::Real> HawkesSpec<T> {
    pub fn new(mu: T, phi: Kernel<T>, jumps: JumpSpec<T>) -> Result<Self> {
        if !(mu >= T::zero() && mu.is_finite()) {
            return Err(Error::Domain(format!(
                "Hawkes baseline must be finite and >= 0, got {mu}"
            )));
        }
        Ok(HawkesSpec { mu, phi, jumps })
    }
}

const EVENT_CAP: u64 = 10_000_000;

/// Exact event-by-event simulation by Ogata thinning. Requires a bounded
/// non-increasing φ (the running intensity right after an event dominates the
/// future); singular or non-monotone kernels must use the grid scheme. The
/// compensator ∫λ is accumulated exactly through the kernel primitive.
/// Super-critical inputs are allowed but capped at 1e7 events per path.
pub fn simulate_afi_thinning<T: SimReal>(
    hawkes: &HawkesSpec<T>,
    horizon: T,
    n_paths: usize,
    seed: u64,
) -> Result<AfiBatch<T>> {
    if n_paths == 0 {
        return Err(Error::Domain("n_paths must be >= 1".into()));
    }
    if !(horizon > T::zero() && horizon.is_finite()) {
        return Err(Error::Domain(format!(
            "thinning horizon must be positive, got {horizon}"
        )));
    }
    if !hawkes.phi.is_decreasing() || hawkes.phi.singular_alpha().is_some() {
        return Err(Error::Domain(
            "thinning requires a bounded non-increasing excitation kernel; use the grid scheme \
             for singular or non-monotone kernels"
                .into(),
        ));
    }
    let phi0 = hawkes.phi.eval(T::zero())?;
    let jumps = &hawkes.jumps;
    let m_x = jumps.m_x();
    let impact_mean = jumps.impact_mean();
    let branching = impact_mean * hawkes.phi.primitive(T::of(1e6))?;
    let mu = hawkes.mu;
    let two = T::of(2.0);
    let half = T::of(0.5);

    let rows: Vec<Result<(T, T, u64, Option<EventStream<T>>)>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut times: Vec<T> = Vec::new();
            let mut kicks: Vec<T> = Vec::new();
            let mut log = if p == 0 {
                Some(EventStream {
                    times: Vec::new(),
                    marks: Vec::new(),
                    intensities: Vec::new(),
                })
            } else {
                None
            };
            let eval_lambda = |t: T, times: &[T], kicks: &[T]| -> Result<T> {
                let mut lam = mu;
                for (te, k) in times.iter().zip(kicks) {
                    lam += *k * hawkes.phi.eval(t - *te)?;
                }
                Ok(lam)
            };
            let mut t = T::zero();
            let mut bound = mu.max(T::of(1e-300)); // λ(0) = μ
            let mut x_jumps = T::zero();
            let mut comp = mu * horizon; // ∫λ = μT + Σ kick·Φ(T − t_e)
            loop {
                if bound <= T::zero() {
                    break; // dead process (μ = 0, no memory left)
                }
                t += T::exp1(&mut rng) / (two * bound);
                if t >= horizon {
                    break;
                }
                let lam_t = eval_lambda(t, &times, &kicks)?;
                if T::unit_uniform(&mut rng) * bound <= lam_t {
                    let buy = T::unit_uniform(&mut rng) < half;
                    let (law, gamma) = if buy {
                        (&jumps.law_plus, jumps.gamma_plus)
                    } else {
                        (&jumps.law_minus, jumps.gamma_minus)
                    };
                    let mark = sample_jump(law, &mut rng);
                    let kick = gamma * mark;
                    times.push(t);
                    kicks.push(kick);
                    if times.len() as u64 > EVENT_CAP {
                        return Err(Error::Instability(format!(
                            "thinning path {p} exceeded {EVENT_CAP} events; the cascade is \
                             super-critical (branching {branching:e})"
                        )));
                    }
                    x_jumps += if buy { mark } else { -mark };
                    comp += kick * hawkes.phi.primitive(horizon - t)?;
                    bound = lam_t + kick * phi0;
                    if let Some(stream) = log.as_mut() {
                        stream.times.push(t);
                        stream.marks.push(if buy { mark } else { -mark });
                        stream.intensities.push(bound);
                    }
                } else {
                    bound = lam_t; // φ non-increasing: current value dominates the future
                }
            }
            let lam_final = eval_lambda(horizon, &times, &kicks)?;
            let x = x_jumps - m_x * comp;
            Ok((x, lam_final, times.len() as u64, log))
        })
        .collect();

    let mut x = Vec::with_capacity(n_paths);
    let mut lambda = Vec::with_capacity(n_paths);
    let mut counts = Vec::with_capacity(n_paths);
    let mut sample_path = None;
    for row in rows {
        let (xp, lp, ev, log) = row?;
        x.push(xp);
        lambda.push(lp);
        counts.push(ev);
        if let Some(stream) = log {
            sample_path = Some(stream);
        }
    }
    Ok(AfiBatch {
        horizon,
        seed,
        x,
        lambda,
        counts,
        clamped_fraction: T::zero(),
        branching,
        sample_path,
    })
}

/// Numerically careful sum (pairwise splitting).
pub fn pairwise_sum<T: crate::Real>(xs: &[T]) -> T {
    if xs.len() <= 16 {
        return xs.iter().fold(T::zero(), |s, &x| s + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and its standard error.
pub fn mean_and_se<T: crate::Real>(xs: &[T]) -> Result<(T, T)> {
    if xs.len() < 2 {
        return Err(Error::Domain("need at least 2 samples".into()));
    }
    let n = T::of(xs.len() as f64);
    let mean = pairwise_sum(xs) / n;
    let sq: Vec<T> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - T::one());
    Ok((mean, (var / n).sqrt()))
}

/// Empirical CGF ln(1/n Σ e^{u·xᵢ}) with a delta-method standard error
/// sd(e^{uX})/(√n · mean(e^{uX})). A degenerate sample returns zero error.
pub fn empirical_cgf<T: crate::Real>(xs: &[T], u: T) -> Result<(T, T)> {
    if xs.len() < 2 {
        return Err(Error::Domain("empirical_cgf: need at least 2 samples".into()));
    }
    let ys: Vec<T> = xs.iter().map(|&x| (u * x).exp()).collect();
    let (mean, se) = mean_and_se(&ys)?;
    if !(mean > T::zero() && mean.is_finite()) {
        return Err(Error::Numerical(format!(
            "empirical_cgf: sample mean of e^(uX) is not finite/positive ({mean})"
        )));
    }
    Ok((mean.ln(), se / mean))
}

/// Two-sample Kolmogorov–Smirnov statistic sup|F̂_a − F̂_b|.
pub fn ks_two_sample<T: crate::Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("ks_two_sample: empty sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("non-NaN samples"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("non-NaN samples"));
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = T::zero();
    while i < na && j < nb {
        let (xa, xb) = (a[i], b[j]);
        if xa <= xb {
            i += 1;
        }
        if xb <= xa {
            j += 1;
        }
        let fa = T::of(i as f64 / na as f64);
        let fb = T::of(j as f64 / nb as f64);
        d = d.max((fa - fb).abs());
    }
    Ok(d)
}

/// 1% critical value of the two-sample KS statistic (asymptotic).
pub fn ks_critical_1pct<T: crate::Real>(n: usize, m: usize) -> T {
    T::of(1.628) * T::of((n as f64 + m as f64) / (n as f64 * m as f64)).sqrt()
}

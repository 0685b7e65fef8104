//! Affine forward variance (AFV) and affine forward order-flow intensity (AFI)
//! models: kernel/resolvent algebra, convolution-Riccati solvers with a-priori
//! bounds, CGF evaluation, Monte-Carlo simulators and high-frequency-limit
//! experiments.
//!
//! The numerical core is generic over the scalar type through [`Real`]
//! (implemented for `f32` and `f64`); the concrete `f64` aliases below are the
//! intended entry point for most users.

use std::fmt;

use num_traits::{Float, FromPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};

pub mod audit;
pub mod cgf;
pub mod kernels;
pub mod ml;
pub mod riccati;
pub mod scaling;
pub mod simulate;
pub mod special;

/// Scalar type the numerics are generic over.
pub trait Real:
    Float
    + FromPrimitive
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + fmt::Display
    + fmt::Debug
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

/// Sampling extension for scalars used by the Monte-Carlo engines.
pub trait SimReal: Real {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn exp1<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: Self) -> u64;
}

macro_rules! impl_sim_real {
    ($t:ty) => {
        impl SimReal for $t {
            #[inline]
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }
            #[inline]
            fn exp1<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Exp1.sample(rng)
            }
            #[inline]
            fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.gen::<$t>()
            }
            #[inline]
            fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: Self) -> u64 {
                if mean <= 0.0 {
                    return 0;
                }
                Poisson::new(mean as f64).expect("positive mean").sample(rng) as u64
            }
        }
    };
}

impl_sim_real!(f64);
impl_sim_real!(f32);

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("domain: {0}")]
    Domain(String),
    #[error("singular kernel evaluation at x = 0")]
    Singularity,
    #[error("accuracy: attained estimate {attained:e} exceeds target {requested:e}")]
    Accuracy { attained: f64, requested: f64 },
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("bound violation: {0}")]
    BoundViolation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("instability: {0}")]
    Instability(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Concrete `f64` aliases — the default precision for desk use.
pub type Kernel = kernels::Kernel<f64>;
pub type ConvWeights = kernels::ConvWeights<f64>;
pub type ForwardCurve = cgf::ForwardCurve<f64>;
pub type AffineModel = cgf::AffineModel<f64>;
pub type AfvModel = cgf::AfvModel<f64>;
pub type AfiModel = cgf::AfiModel<f64>;
pub type JumpSpec = riccati::JumpSpec<f64>;
pub type JumpLaw = riccati::JumpLaw<f64>;
pub type RiccatiGrid = riccati::RiccatiGrid<f64>;
pub type ScalingFamily = scaling::ScalingFamily<f64>;
pub type SimConfig = simulate::SimConfig<f64>;

pub(crate) fn lattice_steps<T: Real>(horizon: T, dt: T, what: &str) -> Result<usize> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::Domain(format!("{what}: dt must be positive, got {dt}")));
    }
    if !(horizon > T::zero()) || !horizon.is_finite() {
        return Err(Error::Domain(format!(
            "{what}: horizon must be positive, got {horizon}"
        )));
    }
    let ratio = (horizon / dt).as_f64();
    let n = ratio.round();
    if (ratio - n).abs() > 1e-6 * n.max(1.0) {
        return Err(Error::Domain(format!(
            "{what}: horizon {horizon} is not a multiple of dt {dt}"
        )));
    }
    Ok(n as usize)
}

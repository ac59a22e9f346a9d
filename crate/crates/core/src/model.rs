//! Unnormalized log-densities, tempering, the weight function and the two
//! benchmark targets.
//!
//! Everything is kept in log-space. A log-density of `-inf` means zero density;
//! NaN is rejected as soon as it is observed.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ImcError, Result};
use crate::rng::RandomSource;
use crate::scalar::{log_sum_exp, Scalar};

/// Log of an unnormalized density on `R^dim`.
pub trait LogDensity<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    /// Raw evaluation; `x.len() == self.dim()` is assumed.
    fn eval_unchecked(&self, x: &[T]) -> T;

    /// Checked evaluation: dimension and NaN are validated.
    fn eval(&self, x: &[T]) -> Result<T> {
        check_dim(self.dim(), x)?;
        let v = self.eval_unchecked(x);
        if v.is_nan() {
            return Err(ImcError::NanDensity);
        }
        Ok(v)
    }
}

/// Exact i.i.d. sampler for a distribution on `R^dim`.
pub trait ExactSampler<T: Scalar>: Send + Sync {
    fn sample(&self, rng: &mut RandomSource) -> Vec<T>;
}

pub(crate) fn check_dim<T>(dim: usize, x: &[T]) -> Result<()> {
    if x.len() != dim {
        return Err(ImcError::DimensionMismatch { expected: dim, got: x.len() });
    }
    Ok(())
}

impl<T: Scalar, D: LogDensity<T> + ?Sized> LogDensity<T> for Box<D> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_unchecked(&self, x: &[T]) -> T {
        (**self).eval_unchecked(x)
    }
}

impl<T: Scalar, D: LogDensity<T> + ?Sized> LogDensity<T> for Arc<D> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_unchecked(&self, x: &[T]) -> T {
        (**self).eval_unchecked(x)
    }
}

impl<T: Scalar, D: LogDensity<T> + ?Sized> LogDensity<T> for &D {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_unchecked(&self, x: &[T]) -> T {
        (**self).eval_unchecked(x)
    }
}

impl<T: Scalar, S: ExactSampler<T> + ?Sized> ExactSampler<T> for Box<S> {
    fn sample(&self, rng: &mut RandomSource) -> Vec<T> {
        (**self).sample(rng)
    }
}

impl<T: Scalar, S: ExactSampler<T> + ?Sized> ExactSampler<T> for Arc<S> {
    fn sample(&self, rng: &mut RandomSource) -> Vec<T> {
        (**self).sample(rng)
    }
}

impl<T: Scalar, S: ExactSampler<T> + ?Sized> ExactSampler<T> for &S {
    fn sample(&self, rng: &mut RandomSource) -> Vec<T> {
        (**self).sample(rng)
    }
}

/// A density and a sampler for the same distribution, e.g. an analytic
/// instrumental density for independent proposals.
pub trait SamplerDensity<T: Scalar>: LogDensity<T> + ExactSampler<T> {}
impl<T: Scalar, D: LogDensity<T> + ExactSampler<T> + ?Sized> SamplerDensity<T> for D {}

/// Closure-backed log-density.
pub struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F> FnDensity<F> {
    pub fn new(dim: usize, f: F) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self { dim, f }
    }
}

impl<T: Scalar, F: Fn(&[T]) -> T + Send + Sync> LogDensity<T> for FnDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval_unchecked(&self, x: &[T]) -> T {
        (self.f)(x)
    }
}

/// `beta * log target(x)`: the target raised to the power `beta`.
#[derive(Clone, Debug)]
pub struct Tempered<D> {
    base: D,
    beta: f64,
}

impl<D> Tempered<D> {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn base(&self) -> &D {
        &self.base
    }
}

impl<T: Scalar, D: LogDensity<T>> LogDensity<T> for Tempered<D> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval_unchecked(&self, x: &[T]) -> T {
        let v = self.base.eval_unchecked(x);
        if v == T::neg_infinity() {
            v
        } else {
            T::lit(self.beta) * v
        }
    }
}

/// Flattens `target` by the exponent `beta` in `(0, 1]`.
pub fn tempered<D>(target: D, beta: f64) -> Result<Tempered<D>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(ImcError::InvalidBeta(beta));
    }
    Ok(Tempered { base: target, beta })
}

/// Mixture of isotropic Gaussians `sum_i w_i N(x; mu_i, scale^2 I)`.
///
/// The default built by [`gaussian_mixture`] has unit weights and unit
/// scale, so its log-density is `log sum_i phi_d(x; mu_i, I)` (not averaged).
#[derive(Clone, Debug)]
pub struct GaussianMixture<T> {
    dim: usize,
    means: Vec<Vec<T>>,
    log_weights: Vec<T>,
    scale: T,
}

pub fn gaussian_mixture<T: Scalar>(dim: usize, means: Vec<Vec<T>>) -> Result<GaussianMixture<T>> {
    GaussianMixture::new(dim, means)
}

impl<T: Scalar> GaussianMixture<T> {
    pub fn new(dim: usize, means: Vec<Vec<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(ImcError::InvalidParameter { name: "dim", reason: "must be positive".into() });
        }
        if means.is_empty() {
            return Err(ImcError::InvalidParameter { name: "means", reason: "need at least one component".into() });
        }
        for m in &means {
            check_dim(dim, m)?;
        }
        let log_weights = vec![T::zero(); means.len()];
        Ok(Self { dim, means, log_weights, scale: T::one() })
    }

    /// Sets the common standard deviation of every component.
    pub fn with_scale(mut self, scale: T) -> Result<Self> {
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(ImcError::InvalidParameter { name: "scale", reason: format!("must be positive, got {scale}") });
        }
        self.scale = scale;
        Ok(self)
    }

    /// Sets nonnegative component weights (not necessarily normalized).
    pub fn with_weights(mut self, weights: &[T]) -> Result<Self> {
        if weights.len() != self.means.len() {
            return Err(ImcError::DimensionMismatch { expected: self.means.len(), got: weights.len() });
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) || weights.iter().all(|w| *w == T::zero()) {
            return Err(ImcError::InvalidParameter { name: "weights", reason: "must be finite, nonnegative, not all zero".into() });
        }
        self.log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(self)
    }

    pub fn means(&self) -> &[Vec<T>] {
        &self.means
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    fn log_component(&self, i: usize, x: &[T]) -> T {
        let half = T::lit(0.5);
        let s2 = self.scale * self.scale;
        let sq: T = x.iter().zip(&self.means[i]).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let d = T::lit(self.dim as f64);
        self.log_weights[i] - half * sq / s2 - half * d * (T::TAU()).ln() - d * self.scale.ln()
    }
}

impl<T: Scalar> LogDensity<T> for GaussianMixture<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_unchecked(&self, x: &[T]) -> T {
        let terms: Vec<T> = (0..self.means.len()).map(|i| self.log_component(i, x)).collect();
        log_sum_exp(&terms)
    }
}

impl<T: Scalar> ExactSampler<T> for GaussianMixture<T> {
    fn sample(&self, rng: &mut RandomSource) -> Vec<T> {
        let k = if self.means.len() == 1 {
            0
        } else {
            let max = self.log_weights.iter().copied().fold(T::neg_infinity(), T::max);
            let probs: Vec<f64> = self.log_weights.iter().map(|&w| (w - max).exp().as_f64()).collect();
            let total: f64 = probs.iter().sum();
            let mut u = rng.uniform() * total;
            let mut k = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                if u < *p {
                    k = i;
                    break;
                }
                u -= p;
            }
            k
        };
        self.means[k]
            .iter()
            .map(|&m| {
                let z: f64 = rng.sample(StandardNormal);
                m + self.scale * T::lit(z)
            })
            .collect()
    }
}

/// Ring-shaped target with two modes per coordinate (`2^dim` modes in total):
///
/// `-0.5 ((|x| - 2) / 0.1)^2 + sum_i log(exp(-0.5 ((x_i + 3) / 0.6)^2) + exp(-0.5 ((x_i - 3) / 0.6)^2))`
#[derive(Clone, Copy, Debug)]
pub struct RingBimodal {
    dim: usize,
}

pub fn ring_bimodal(dim: usize) -> Result<RingBimodal> {
    if dim == 0 {
        return Err(ImcError::InvalidParameter { name: "dim", reason: "must be positive".into() });
    }
    Ok(RingBimodal { dim })
}

impl<T: Scalar> LogDensity<T> for RingBimodal {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_unchecked(&self, x: &[T]) -> T {
        let half = T::lit(0.5);
        let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
        let radial = (norm - T::lit(2.0)) / T::lit(0.1);
        let mut acc = -half * radial * radial;
        for &xi in x {
            let a = (xi + T::lit(3.0)) / T::lit(0.6);
            let b = (xi - T::lit(3.0)) / T::lit(0.6);
            acc = acc + log_sum_exp(&[-half * a * a, -half * b * b]);
        }
        acc
    }
}

/// Isotropic multivariate Student-t with `nu` degrees of freedom.
#[derive(Clone, Debug)]
pub struct StudentT<T> {
    dim: usize,
    nu: f64,
    location: Vec<T>,
    scale: T,
}

impl<T: Scalar> StudentT<T> {
    pub fn new(location: Vec<T>, scale: T, nu: f64) -> Result<Self> {
        if location.is_empty() {
            return Err(ImcError::InvalidParameter { name: "location", reason: "empty".into() });
        }
        if !(nu > 0.0) || !(scale > T::zero()) {
            return Err(ImcError::InvalidParameter { name: "nu/scale", reason: "must be positive".into() });
        }
        Ok(Self { dim: location.len(), nu, location, scale })
    }
}

impl<T: Scalar> LogDensity<T> for StudentT<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_unchecked(&self, x: &[T]) -> T {
        let sq: T = x
            .iter()
            .zip(&self.location)
            .map(|(&a, &m)| {
                let z = (a - m) / self.scale;
                z * z
            })
            .sum();
        let nu = T::lit(self.nu);
        let d = T::lit(self.dim as f64);
        -(nu + d) * T::lit(0.5) * (T::one() + sq / nu).ln() - d * self.scale.ln()
    }
}

impl<T: Scalar> ExactSampler<T> for StudentT<T> {
    fn sample(&self, rng: &mut RandomSource) -> Vec<T> {
        let chi = rand_distr::ChiSquared::new(self.nu).expect("nu > 0");
        let g: f64 = chi.sample(rng);
        let factor = (self.nu / g).sqrt();
        self.location
            .iter()
            .map(|&m| {
                let z: f64 = rng.sample(StandardNormal);
                m + self.scale * T::lit(z * factor)
            })
            .collect()
    }
}

/// `rho_kappa(x) = kappa * pi_U(x) / pi_tilde_U(x)`, evaluated in log-space.
#[derive(Clone, Debug)]
pub struct WeightFunction<P, I> {
    kappa: f64,
    target: P,
    instrumental: I,
}

impl<P, I> WeightFunction<P, I> {
    pub fn new<T: Scalar>(kappa: f64, target: P, instrumental: I) -> Result<Self>
    where
        P: LogDensity<T>,
        I: LogDensity<T>,
    {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(ImcError::InvalidParameter { name: "kappa", reason: format!("must be positive and finite, got {kappa}") });
        }
        if target.dim() != instrumental.dim() {
            return Err(ImcError::DimensionMismatch { expected: target.dim(), got: instrumental.dim() });
        }
        Ok(Self { kappa, target, instrumental })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        assert!(kappa > 0.0 && kappa.is_finite());
        self.kappa = kappa;
        self
    }

    pub fn target(&self) -> &P {
        &self.target
    }

    pub fn instrumental(&self) -> &I {
        &self.instrumental
    }

    /// `log pi_U(x) - log pi_tilde_U(x)`, i.e. the log weight at `kappa = 1`.
    pub fn unit_log_weight<T: Scalar>(&self, x: &[T]) -> Result<T>
    where
        P: LogDensity<T>,
        I: LogDensity<T>,
    {
        let lt = self.target.eval(x)?;
        if lt == T::neg_infinity() {
            return Ok(T::neg_infinity());
        }
        let li = self.instrumental.eval(x)?;
        if li == T::neg_infinity() {
            return Err(ImcError::DominationViolation { step: None });
        }
        Ok(lt - li)
    }

    pub fn log_weight<T: Scalar>(&self, x: &[T]) -> Result<T>
    where
        P: LogDensity<T>,
        I: LogDensity<T>,
    {
        Ok(T::lit(self.kappa.ln()) + self.unit_log_weight(x)?)
    }

    pub fn weight<T: Scalar>(&self, x: &[T]) -> Result<T>
    where
        P: LogDensity<T>,
        I: LogDensity<T>,
    {
        Ok(self.log_weight(x)?.exp())
    }
}

/// Free-function form of [`WeightFunction::weight`].
pub fn weight<T, P, I>(wf: &WeightFunction<P, I>, x: &[T]) -> Result<T>
where
    T: Scalar,
    P: LogDensity<T>,
    I: LogDensity<T>,
{
    wf.weight(x)
}

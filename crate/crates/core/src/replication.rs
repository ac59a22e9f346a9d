//! Replication-count laws: integer-valued draws whose mean equals the weight.
//!
//! Every law here is unbiased: `E[N] = rho` for the weight `rho` it is handed.
//! [`OptimalLaw`] attains the smallest possible variance `<rho>(1 - <rho>)`
//! among integer laws with that mean.

use rand::Rng;

use crate::error::{ImcError, Result};
use crate::model::LogDensity;
use crate::rng::RandomSource;
use crate::scalar::{floor_frac, Scalar};

fn check_rho<T: Scalar>(rho: T) -> Result<()> {
    if !rho.is_finite() {
        return Err(ImcError::NonFiniteWeight { value: rho.as_f64(), step: None });
    }
    if rho < T::zero() {
        return Err(ImcError::InvalidParameter { name: "rho", reason: format!("weight must be nonnegative, got {rho}") });
    }
    Ok(())
}

fn to_count<T: Scalar>(v: T) -> Result<u64> {
    v.to_u64().ok_or(ImcError::NonFiniteWeight { value: v.as_f64(), step: None })
}

/// `floor(rho) + 1` with probability `frac(rho)`, else `floor(rho)`.
///
/// The branch is `u < frac(rho)` with strict inequality.
pub fn draw_optimal<T: Scalar>(rho: T, rng: &mut RandomSource) -> Result<u64> {
    check_rho(rho)?;
    let (fl, fr) = floor_frac(rho);
    let base = to_count(fl)?;
    let u = T::lit(rng.uniform());
    Ok(if u < fr { base + 1 } else { base })
}

/// Rejection-chain acceptance: `1` with probability `target_ratio / m`.
pub fn draw_bernoulli_rejection<T: Scalar>(target_ratio: T, m: T, rng: &mut RandomSource) -> Result<u64> {
    check_rho(target_ratio)?;
    if !(m > T::zero()) || !m.is_finite() {
        return Err(ImcError::InvalidParameter { name: "m", reason: format!("bound must be positive, got {m}") });
    }
    if target_ratio > m {
        return Err(ImcError::DominationViolation { step: None });
    }
    let p = target_ratio / m;
    let u = T::lit(rng.uniform());
    Ok(u64::from(u < p))
}

/// Geometric success probability and Bernoulli thinning of the
/// self-regenerative law; `alpha / q == rho`.
fn osr_params<T: Scalar>(rho: T) -> (T, T) {
    let alpha = rho.min(T::one());
    let q = if rho == T::zero() { T::one() } else { (T::one() / rho).min(T::one()) };
    (alpha, q)
}

/// `V * S` with `V ~ Bernoulli(min(1, rho))` and `S` geometric on `{1, 2, ..}`
/// with success probability `min(1, 1 / rho)`.
pub fn draw_osr<T: Scalar>(rho: T, rng: &mut RandomSource) -> Result<u64> {
    check_rho(rho)?;
    let (alpha, q) = osr_params(rho);
    let u = T::lit(rng.uniform());
    if !(u < alpha) {
        return Ok(0);
    }
    if q >= T::one() {
        return Ok(1);
    }
    let geo = rand_distr::Geometric::new(q.as_f64()).map_err(|e| ImcError::InvalidParameter { name: "q", reason: e.to_string() })?;
    Ok(1 + rng.sample(geo))
}

/// `kappa * v / u`, the weight of the fully pseudo-marginal chain.
pub fn full_pm_weight<T: Scalar>(u: T, v: T, kappa: T) -> Result<T> {
    if u == T::zero() {
        return Err(ImcError::DivisionByZero("instrumental estimate u is zero"));
    }
    if !(u > T::zero()) || !(v >= T::zero()) || !(kappa > T::zero()) {
        return Err(ImcError::InvalidParameter { name: "u/v/kappa", reason: "u, kappa must be positive and v nonnegative".into() });
    }
    Ok(kappa * v / u)
}

/// A distribution over replication counts parameterized by its mean.
pub trait ReplicationLaw<T: Scalar>: Send + Sync {
    fn name(&self) -> &'static str;

    fn draw(&self, rho: T, rng: &mut RandomSource) -> Result<u64>;

    /// Mean of the law at weight `rho`; equals `rho` for every law here.
    fn mean(&self, rho: T) -> T {
        rho
    }

    fn variance(&self, rho: T) -> Result<T>;

    /// Probabilities of `0..=n_max`.
    fn pmf(&self, rho: T, n_max: usize) -> Result<Vec<T>>;

    /// `sum_{n > n_max} n p_n`, in closed form.
    fn tail_mean(&self, rho: T, n_max: usize) -> Result<T>;
}

impl<T: Scalar, L: ReplicationLaw<T> + ?Sized> ReplicationLaw<T> for Box<L> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn draw(&self, rho: T, rng: &mut RandomSource) -> Result<u64> {
        (**self).draw(rho, rng)
    }
    fn mean(&self, rho: T) -> T {
        (**self).mean(rho)
    }
    fn variance(&self, rho: T) -> Result<T> {
        (**self).variance(rho)
    }
    fn pmf(&self, rho: T, n_max: usize) -> Result<Vec<T>> {
        (**self).pmf(rho, n_max)
    }
    fn tail_mean(&self, rho: T, n_max: usize) -> Result<T> {
        (**self).tail_mean(rho, n_max)
    }
}

/// Exact pmf of `law` at `rho` truncated to `0..=n_max`.
pub fn law_pmf<T: Scalar, L: ReplicationLaw<T> + ?Sized>(law: &L, rho: T, n_max: usize) -> Result<Vec<T>> {
    law.pmf(rho, n_max)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OptimalLaw;

impl<T: Scalar> ReplicationLaw<T> for OptimalLaw {
    fn name(&self) -> &'static str {
        "optimal"
    }

    fn draw(&self, rho: T, rng: &mut RandomSource) -> Result<u64> {
        draw_optimal(rho, rng)
    }

    fn variance(&self, rho: T) -> Result<T> {
        check_rho(rho)?;
        let (_, fr) = floor_frac(rho);
        Ok(fr * (T::one() - fr))
    }

    fn pmf(&self, rho: T, n_max: usize) -> Result<Vec<T>> {
        check_rho(rho)?;
        let (fl, fr) = floor_frac(rho);
        let base = to_count(fl)? as usize;
        let mut p = vec![T::zero(); n_max + 1];
        if base <= n_max {
            p[base] = T::one() - fr;
        }
        if base < n_max && fr > T::zero() {
            p[base + 1] = fr;
        }
        Ok(p)
    }

    fn tail_mean(&self, rho: T, n_max: usize) -> Result<T> {
        check_rho(rho)?;
        let (fl, fr) = floor_frac(rho);
        let base = to_count(fl)? as usize;
        let mut t = T::zero();
        if base > n_max {
            t = t + fl * (T::one() - fr);
        }
        if base + 1 > n_max {
            t = t + (fl + T::one()) * fr;
        }
        Ok(t)
    }
}

/// Bernoulli replication (the rejection chain); requires `rho <= 1`.
#[derive(Clone, Copy, Debug, Default)]
pub struct BernoulliLaw;

impl<T: Scalar> ReplicationLaw<T> for BernoulliLaw {
    fn name(&self) -> &'static str {
        "bernoulli_rejection"
    }

    fn draw(&self, rho: T, rng: &mut RandomSource) -> Result<u64> {
        draw_bernoulli_rejection(rho, T::one(), rng)
    }

    fn variance(&self, rho: T) -> Result<T> {
        check_rho(rho)?;
        if rho > T::one() {
            return Err(ImcError::DominationViolation { step: None });
        }
        Ok(rho * (T::one() - rho))
    }

    fn pmf(&self, rho: T, n_max: usize) -> Result<Vec<T>> {
        check_rho(rho)?;
        if rho > T::one() {
            return Err(ImcError::DominationViolation { step: None });
        }
        let mut p = vec![T::zero(); n_max + 1];
        p[0] = T::one() - rho;
        if n_max >= 1 {
            p[1] = rho;
        }
        Ok(p)
    }

    fn tail_mean(&self, rho: T, n_max: usize) -> Result<T> {
        check_rho(rho)?;
        Ok(if n_max == 0 { rho } else { T::zero() })
    }
}

/// Optimal self-regenerative law: Bernoulli-thinned geometric counts.
#[derive(Clone, Copy, Debug, Default)]
pub struct OsrLaw;

impl<T: Scalar> ReplicationLaw<T> for OsrLaw {
    fn name(&self) -> &'static str {
        "osr"
    }

    fn draw(&self, rho: T, rng: &mut RandomSource) -> Result<u64> {
        draw_osr(rho, rng)
    }

    fn variance(&self, rho: T) -> Result<T> {
        check_rho(rho)?;
        let (alpha, q) = osr_params(rho);
        let second = alpha * (T::lit(2.0) - q) / (q * q);
        Ok((second - rho * rho).max(T::zero()))
    }

    fn pmf(&self, rho: T, n_max: usize) -> Result<Vec<T>> {
        check_rho(rho)?;
        let (alpha, q) = osr_params(rho);
        let mut p = vec![T::zero(); n_max + 1];
        p[0] = T::one() - alpha;
        let mut tail = alpha * q;
        for pn in p.iter_mut().skip(1) {
            *pn = tail;
            tail = tail * (T::one() - q);
        }
        Ok(p)
    }

    fn tail_mean(&self, rho: T, n_max: usize) -> Result<T> {
        check_rho(rho)?;
        let (alpha, q) = osr_params(rho);
        if alpha == T::zero() {
            return Ok(T::zero());
        }
        // S | S > n_max has the law of n_max + S (memorylessness)
        let survive = (T::one() - q).powi(n_max as i32);
        let conditional = T::lit(n_max as f64) + T::one() / q;
        Ok(if n_max == 0 { alpha / q } else { alpha * survive * conditional })
    }
}

/// Nonnegative unbiased estimate of an unnormalized density at `x`.
pub trait UnbiasedEstimator<X: ?Sized, T: Scalar>: Send + Sync {
    fn sample(&self, x: &X, rng: &mut RandomSource) -> Result<T>;

    /// Log of a draw; overridden by estimators that can stay in log-space.
    fn sample_log(&self, x: &X, rng: &mut RandomSource) -> Result<T> {
        Ok(self.sample(x, rng)?.ln())
    }
}

/// Mean-one multiplicative noise `eps` such that `W = pi_U(x) * eps`.
pub trait RelativeNoise: Send + Sync {
    /// `log eps` for one draw (may be `-inf` when `eps = 0`).
    fn sample_log_factor(&self, rng: &mut RandomSource) -> f64;
}

/// `eps` uniform on `{low, high}` with `low + high = 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPointNoise {
    low: f64,
    high: f64,
}

impl TwoPointNoise {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low >= 0.0) || !(high >= low) || ((low + high) - 2.0).abs() > 1e-12 {
            return Err(ImcError::InvalidParameter { name: "two_point", reason: format!("need 0 <= low <= high and low + high = 2, got ({low}, {high})") });
        }
        Ok(Self { low, high })
    }

    pub fn values(&self) -> (f64, f64) {
        (self.low, self.high)
    }
}

impl RelativeNoise for TwoPointNoise {
    fn sample_log_factor(&self, rng: &mut RandomSource) -> f64 {
        if rng.uniform() < 0.5 {
            self.low.ln()
        } else {
            self.high.ln()
        }
    }
}

/// `eps = exp(sigma Z - sigma^2 / 2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogNormalNoise {
    sigma: f64,
}

impl LogNormalNoise {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(ImcError::InvalidParameter { name: "sigma", reason: format!("must be nonnegative, got {sigma}") });
        }
        Ok(Self { sigma })
    }
}

impl RelativeNoise for LogNormalNoise {
    fn sample_log_factor(&self, rng: &mut RandomSource) -> f64 {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        self.sigma * z - 0.5 * self.sigma * self.sigma
    }
}

impl<N: RelativeNoise + ?Sized> RelativeNoise for Box<N> {
    fn sample_log_factor(&self, rng: &mut RandomSource) -> f64 {
        (**self).sample_log_factor(rng)
    }
}

/// Unbiased estimator `pi_U(x) * eps` built from an exact density and mean-one noise.
#[derive(Clone, Debug)]
pub struct NoisyDensityEstimator<D, N> {
    pub density: D,
    pub noise: N,
}

impl<T: Scalar, D: LogDensity<T>, N: RelativeNoise> UnbiasedEstimator<[T], T> for NoisyDensityEstimator<D, N> {
    fn sample(&self, x: &[T], rng: &mut RandomSource) -> Result<T> {
        Ok(self.sample_log(x, rng)?.exp())
    }

    fn sample_log(&self, x: &[T], rng: &mut RandomSource) -> Result<T> {
        let base = self.density.eval(x)?;
        let eps = T::lit(self.noise.sample_log_factor(rng));
        Ok(if base == T::neg_infinity() { base } else { base + eps })
    }
}

/// Plug-in pseudo-marginal replication: the optimal law at
/// `kappa * W / pi_tilde_U(x)` with `W` drawn from `estimator`.
pub fn draw_pseudo_marginal<X, T, E>(x: &X, kappa: T, log_instrumental_at_x: T, estimator: &E, rng: &mut RandomSource) -> Result<u64>
where
    X: ?Sized,
    T: Scalar,
    E: UnbiasedEstimator<X, T> + ?Sized,
{
    if !log_instrumental_at_x.is_finite() {
        return Err(ImcError::DominationViolation { step: None });
    }
    let log_w = estimator.sample_log(x, rng)?;
    if log_w.is_nan() || log_w == T::infinity() {
        return Err(ImcError::NonFiniteWeight { value: log_w.exp().as_f64(), step: None });
    }
    if log_w == T::neg_infinity() {
        // the uniform is still consumed to keep the stream aligned
        return draw_optimal(T::zero(), rng);
    }
    let rho_hat = (kappa.ln() + log_w - log_instrumental_at_x).exp();
    draw_optimal(rho_hat, rng)
}

/// Pseudo-marginal law seen through its weight: the optimal law applied to
/// `rho * eps` with mean-one noise `eps`.
#[derive(Clone, Debug)]
pub struct PseudoMarginalLaw<N> {
    pub noise: N,
}

impl<T: Scalar, N: RelativeNoise> ReplicationLaw<T> for PseudoMarginalLaw<N> {
    fn name(&self) -> &'static str {
        "pseudo_marginal"
    }

    fn draw(&self, rho: T, rng: &mut RandomSource) -> Result<u64> {
        check_rho(rho)?;
        let log_eps = self.noise.sample_log_factor(rng);
        if rho == T::zero() || log_eps == f64::NEG_INFINITY {
            return draw_optimal(T::zero(), rng);
        }
        let rho_hat = (rho.ln() + T::lit(log_eps)).exp();
        draw_optimal(rho_hat, rng)
    }

    fn variance(&self, _rho: T) -> Result<T> {
        Err(ImcError::UnsupportedLaw("pseudo_marginal"))
    }

    fn pmf(&self, _rho: T, _n_max: usize) -> Result<Vec<T>> {
        Err(ImcError::UnsupportedLaw("pseudo_marginal"))
    }

    fn tail_mean(&self, _rho: T, _n_max: usize) -> Result<T> {
        Err(ImcError::UnsupportedLaw("pseudo_marginal"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnDensity;
    use proptest::prelude::*;

    fn sample_moments<F: FnMut(&mut RandomSource) -> u64>(n: usize, seed: u64, mut f: F) -> (f64, f64) {
        let mut rng = RandomSource::new(seed, 0);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = f(&mut rng) as f64;
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / n as f64;
        (mean, s2 / n as f64 - mean * mean)
    }

    #[test]
    fn optimal_integer_and_zero() {
        let mut rng = RandomSource::new(0, 0);
        for _ in 0..1000 {
            assert_eq!(draw_optimal(3.0f64, &mut rng).unwrap(), 3);
            assert_eq!(draw_optimal(0.0f64, &mut rng).unwrap(), 0);
        }
        assert_eq!(ReplicationLaw::<f64>::variance(&OptimalLaw, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn optimal_distribution_on_uniform_grid() {
        // replay the decision rule over a fine grid of u values
        let rho = 2.3f64;
        let (fl, fr) = floor_frac(rho);
        let grid = 100_000;
        let threes = (0..grid).filter(|k| (*k as f64 + 0.5) / (grid as f64) < fr).count();
        assert_eq!(fl, 2.0);
        assert!((threes as f64 / grid as f64 - 0.3).abs() < 1e-4);
        let v = ReplicationLaw::<f64>::variance(&OptimalLaw, rho).unwrap();
        assert!((v - 0.21).abs() < 1e-12);
        let p = law_pmf(&OptimalLaw, rho, 4).unwrap();
        let expected = [0.0, 0.0, 0.7, 0.3, 0.0];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_support_is_floor_and_ceil() {
        let mut rng = RandomSource::new(5, 0);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..1_000_000 {
            seen.insert(draw_optimal(4.6f64, &mut rng).unwrap());
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![4, 5]);
    }

    #[test]
    fn non_finite_weights_rejected() {
        let mut rng = RandomSource::new(0, 0);
        for bad in [f64::NAN, f64::INFINITY] {
            assert!(matches!(draw_optimal(bad, &mut rng), Err(ImcError::NonFiniteWeight { .. })));
            assert!(matches!(draw_osr(bad, &mut rng), Err(ImcError::NonFiniteWeight { .. })));
        }
        assert!(draw_optimal(-1.0f64, &mut rng).is_err());
    }

    #[test]
    fn bernoulli_edges_and_frequency() {
        let mut rng = RandomSource::new(1, 0);
        for _ in 0..1000 {
            assert_eq!(draw_bernoulli_rejection(2.0f64, 2.0, &mut rng).unwrap(), 1);
            assert_eq!(draw_bernoulli_rejection(0.0f64, 2.0, &mut rng).unwrap(), 0);
        }
        assert!(matches!(draw_bernoulli_rejection(2.5f64, 2.0, &mut rng), Err(ImcError::DominationViolation { .. })));
        let n = 1_000_000;
        let (mean, _) = sample_moments(n, 2, |r| draw_bernoulli_rejection(1.0f64, 4.0, r).unwrap());
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((mean - 0.25).abs() < 4.0 * se);
        let p = law_pmf(&BernoulliLaw, 0.25f64, 1).unwrap();
        assert_eq!(p, vec![0.75, 0.25]);
    }

    #[test]
    fn osr_edges_and_moments() {
        let mut rng = RandomSource::new(3, 0);
        for _ in 0..1000 {
            assert_eq!(draw_osr(0.0f64, &mut rng).unwrap(), 0);
            assert_eq!(draw_osr(1.0f64, &mut rng).unwrap(), 1);
        }
        let n = 1_000_000;
        let (mean, var) = sample_moments(n, 4, |r| draw_osr(2.5f64, r).unwrap());
        let analytic_var = ReplicationLaw::<f64>::variance(&OsrLaw, 2.5).unwrap();
        assert!((analytic_var - 3.75).abs() < 1e-12);
        assert!((mean - 2.5).abs() < 4.0 * (analytic_var / n as f64).sqrt());
        assert!(var >= 0.25);
    }

    #[test]
    fn osr_pmf_mean_with_geometric_tail() {
        let rho = 2.5f64;
        let n_max = 50;
        let p = law_pmf(&OsrLaw, rho, n_max).unwrap();
        // independent tail: sum_{n > N} n * alpha q (1-q)^{n-1} by direct summation far out
        let (alpha, q) = (1.0f64, 0.4f64);
        let tail: f64 = (n_max + 1..5000).map(|n| n as f64 * alpha * q * (1.0 - q).powi(n as i32 - 1)).sum();
        let mean: f64 = p.iter().enumerate().map(|(n, pn)| n as f64 * pn).sum::<f64>() + tail;
        assert!((mean - rho).abs() < 1e-9);
        let closed = ReplicationLaw::<f64>::tail_mean(&OsrLaw, rho, n_max).unwrap();
        assert!((closed - tail).abs() < 1e-12);
    }

    #[test]
    fn pseudo_marginal_degenerate_estimators() {
        let log_pi = -1.2f64;
        let log_tilde = -2.0f64;
        let kappa = 1.3f64;
        let rho = kappa * (log_pi - log_tilde).exp();
        let exact = NoisyDensityEstimator { density: FnDensity::new(1, move |_: &[f64]| log_pi), noise: TwoPointNoise::new(1.0, 1.0).unwrap() };
        let mut a = RandomSource::new(6, 0);
        let mut b = RandomSource::new(6, 0);
        for _ in 0..1000 {
            let pm = draw_pseudo_marginal(&[0.0][..], kappa, log_tilde, &exact, &mut a).unwrap();
            // the noise consumes one uniform before the optimal draw
            b.uniform();
            let opt = draw_optimal(rho, &mut b).unwrap();
            assert_eq!(pm, opt);
        }
        let zero = NoisyDensityEstimator { density: FnDensity::new(1, |_: &[f64]| f64::NEG_INFINITY), noise: LogNormalNoise::new(0.5).unwrap() };
        for _ in 0..100 {
            assert_eq!(draw_pseudo_marginal(&[0.0][..], kappa, log_tilde, &zero, &mut a).unwrap(), 0);
        }
        assert!(draw_pseudo_marginal(&[0.0][..], kappa, f64::NEG_INFINITY, &exact, &mut a).is_err());
    }

    #[test]
    fn pseudo_marginal_two_point_variance_decomposition() {
        let log_pi = 0.4f64;
        let log_tilde = -0.3f64;
        let kappa = 0.9f64;
        let rho = kappa * (log_pi - log_tilde).exp();
        let est = NoisyDensityEstimator { density: FnDensity::new(1, move |_: &[f64]| log_pi), noise: TwoPointNoise::new(0.5, 1.5).unwrap() };
        let n = 1_000_000;
        let (mean, var) = sample_moments(n, 7, |r| draw_pseudo_marginal(&[0.0][..], kappa, log_tilde, &est, r).unwrap());
        // exhaustive conditioning on the two values of W
        let cond = |r: f64| {
            let f = r - r.floor();
            f * (1.0 - f)
        };
        let (lo, hi) = (0.5 * rho, 1.5 * rho);
        let var_w_term = 0.5 * (lo - rho).powi(2) + 0.5 * (hi - rho).powi(2);
        let expected_var = var_w_term + 0.5 * cond(lo) + 0.5 * cond(hi);
        // exact pmf of N by enumeration, for the fourth central moment
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for r in [lo, hi] {
            let f = r - r.floor();
            atoms.push((r.floor(), 0.5 * (1.0 - f)));
            atoms.push((r.floor() + 1.0, 0.5 * f));
        }
        let m4: f64 = atoms.iter().map(|(v, p)| p * (v - rho).powi(4)).sum();
        let enum_var: f64 = atoms.iter().map(|(v, p)| p * (v - rho).powi(2)).sum();
        assert!((enum_var - expected_var).abs() < 1e-12);
        assert!((mean - rho).abs() < 4.0 * (expected_var / n as f64).sqrt(), "mean {mean} vs {rho}");
        let se_var = ((m4 - expected_var * expected_var) / n as f64).sqrt();
        assert!((var - expected_var).abs() < 4.0 * se_var, "var {var} vs {expected_var}");
    }

    #[test]
    fn full_pm_weight_arithmetic() {
        assert_eq!(full_pm_weight(3.0f64, 3.0, 1.0).unwrap(), 1.0);
        assert_eq!(full_pm_weight(3.0f64, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(full_pm_weight(4.0f64, 3.0, 2.0).unwrap(), 1.5);
        assert!(matches!(full_pm_weight(0.0f64, 1.0, 1.0), Err(ImcError::DivisionByZero(_))));
    }

    #[test]
    fn pseudo_marginal_law_has_no_pmf() {
        let law = PseudoMarginalLaw { noise: LogNormalNoise::new(0.3).unwrap() };
        assert!(matches!(law_pmf(&law, 1.0f64, 3), Err(ImcError::UnsupportedLaw(_))));
    }

    #[test]
    fn optimal_bounded_by_weight_bound() {
        let bound = 6.4f64;
        let mut rng = RandomSource::new(12, 0);
        for k in 0..=640 {
            let rho = bound * k as f64 / 640.0;
            for _ in 0..50 {
                assert!(draw_optimal(rho, &mut rng).unwrap() <= bound.floor() as u64 + 1);
            }
        }
    }

    proptest! {
        #[test]
        fn analytic_laws_are_unbiased(rho in 0.0f64..20.0) {
            let n_max = 30;
            let opt = law_pmf(&OptimalLaw, rho, n_max).unwrap();
            let m: f64 = opt.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
            prop_assert!((m - rho).abs() < 1e-9);
            prop_assert!((opt.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let osr = law_pmf(&OsrLaw, rho, n_max).unwrap();
            let tail = ReplicationLaw::<f64>::tail_mean(&OsrLaw, rho, n_max).unwrap();
            let m: f64 = osr.iter().enumerate().map(|(n, p)| n as f64 * p).sum::<f64>() + tail;
            prop_assert!((m - rho).abs() < 1e-9 * rho.max(1.0));
            if rho <= 1.0 {
                let b = law_pmf(&BernoulliLaw, rho, 1).unwrap();
                prop_assert!((b[1] - rho).abs() < 1e-15);
            }
        }

        #[test]
        fn optimal_variance_is_minimal(rho in 0.0f64..20.0) {
            let opt: f64 = ReplicationLaw::<f64>::variance(&OptimalLaw, rho).unwrap();
            let f = rho - rho.floor();
            prop_assert!((opt - f * (1.0 - f)).abs() < 1e-15);
            let osr: f64 = ReplicationLaw::<f64>::variance(&OsrLaw, rho).unwrap();
            prop_assert!(osr >= opt - 1e-12);
        }
    }
}

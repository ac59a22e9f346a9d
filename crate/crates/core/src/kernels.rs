//! Instrumental Markov kernels leaving the instrumental distribution invariant.
//!
//! Continuous kernels act on `Vec<T>` states; [`FiniteKernel`] walks an explicit
//! stochastic matrix over state indices.

use std::marker::PhantomData;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ImcError, Result};
use crate::linalg::Matrix;
use crate::model::{check_dim, ExactSampler, LogDensity, SamplerDensity};
use crate::oracle::FiniteChainSpec;
use crate::rng::RandomSource;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition<S> {
    pub state: S,
    pub accepted: bool,
}

/// One step of a Markov kernel with a known invariant distribution.
pub trait InstrumentalKernel: Send + Sync {
    type State: Clone + Send;

    fn step(&self, current: &Self::State, rng: &mut RandomSource) -> Result<Transition<Self::State>>;
}

impl<K: InstrumentalKernel + ?Sized> InstrumentalKernel for Box<K> {
    type State = K::State;
    fn step(&self, current: &Self::State, rng: &mut RandomSource) -> Result<Transition<Self::State>> {
        (**self).step(current, rng)
    }
}

impl<K: InstrumentalKernel + ?Sized> InstrumentalKernel for &K {
    type State = K::State;
    fn step(&self, current: &Self::State, rng: &mut RandomSource) -> Result<Transition<Self::State>> {
        (**self).step(current, rng)
    }
}

/// Metropolis accept/reject on a log acceptance ratio.
///
/// A zero-density current point (`current_log = -inf`) accepts any proposal of
/// positive density; a zero-density proposal is always rejected. One uniform is
/// consumed per call regardless of the branch so streams stay aligned.
fn metropolis_accept(current_log: f64, proposed_log: f64, rng: &mut RandomSource) -> bool {
    let u = rng.uniform();
    if proposed_log == f64::NEG_INFINITY {
        return false;
    }
    if current_log == f64::NEG_INFINITY {
        return true;
    }
    let log_ratio = proposed_log - current_log;
    log_ratio >= 0.0 || u < log_ratio.exp()
}

/// Gaussian random-walk Metropolis step `x' = x + step_size * z`.
pub fn rwm_step<T: Scalar, D: LogDensity<T> + ?Sized>(
    target: &D,
    x: &[T],
    step_size: f64,
    rng: &mut RandomSource,
) -> Result<(Vec<T>, bool)> {
    check_dim(target.dim(), x)?;
    let proposal: Vec<T> = x
        .iter()
        .map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            v + T::lit(step_size * z)
        })
        .collect();
    let lc = target.eval(x)?.as_f64();
    let lp = target.eval(&proposal)?.as_f64();
    if metropolis_accept(lc, lp, rng) {
        Ok((proposal, true))
    } else {
        Ok((x.to_vec(), false))
    }
}

/// Independence Metropolis-Hastings step with proposal density `q`.
pub fn independent_mh_step<T, D, Q>(target: &D, proposal: &Q, x: &[T], rng: &mut RandomSource) -> Result<(Vec<T>, bool)>
where
    T: Scalar,
    D: LogDensity<T> + ?Sized,
    Q: SamplerDensity<T> + ?Sized,
{
    check_dim(target.dim(), x)?;
    let y = proposal.sample(rng);
    let lq_y = proposal.eval(&y)?.as_f64();
    if lq_y == f64::NEG_INFINITY {
        return Err(ImcError::DominationViolation { step: None });
    }
    let lp_y = target.eval(&y)?.as_f64();
    let lp_x = target.eval(x)?.as_f64();
    // log importance weights of the current point and the candidate
    let w_y = if lp_y == f64::NEG_INFINITY { f64::NEG_INFINITY } else { lp_y - lq_y };
    let w_x = if lp_x == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        let lq_x = proposal.eval(x)?.as_f64();
        if lq_x == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            lp_x - lq_x
        }
    };
    if metropolis_accept(w_x, w_y, rng) {
        Ok((y, true))
    } else {
        Ok((x.to_vec(), false))
    }
}

/// Exact draw from the instrumental distribution; the current state is ignored.
pub fn iid_step<T: Scalar, S: ExactSampler<T> + ?Sized>(sampler: &S, rng: &mut RandomSource) -> Vec<T> {
    sampler.sample(rng)
}

/// Draws the next index of the chain with transition matrix `spec.q`.
pub fn finite_step<T: Scalar>(spec: &FiniteChainSpec<T>, state_index: usize, rng: &mut RandomSource) -> Result<usize> {
    sample_row(spec.q.row(checked_index(state_index, spec.m())?), rng)
}

fn checked_index(i: usize, len: usize) -> Result<usize> {
    if i >= len {
        return Err(ImcError::IndexOutOfRange { index: i, len });
    }
    Ok(i)
}

fn sample_row<T: Scalar>(row: &[T], rng: &mut RandomSource) -> Result<usize> {
    let u = T::lit(rng.uniform());
    let mut acc = T::zero();
    let mut last_positive = 0;
    for (j, &p) in row.iter().enumerate() {
        if p > T::zero() {
            last_positive = j;
        }
        acc = acc + p;
        if u < acc {
            return Ok(j);
        }
    }
    // u landed in the rounding gap above the cumulative sum
    Ok(last_positive)
}

#[derive(Clone, Debug)]
pub struct RandomWalkMetropolis<T, D> {
    pub target: D,
    pub step_size: f64,
    _scalar: PhantomData<fn() -> T>,
}

impl<T: Scalar, D: LogDensity<T>> RandomWalkMetropolis<T, D> {
    pub fn new(target: D, step_size: f64) -> Result<Self> {
        if !(step_size > 0.0) || !step_size.is_finite() {
            return Err(ImcError::InvalidParameter { name: "step_size", reason: format!("must be positive, got {step_size}") });
        }
        Ok(Self { target, step_size, _scalar: PhantomData })
    }
}

impl<T: Scalar, D: LogDensity<T>> InstrumentalKernel for RandomWalkMetropolis<T, D> {
    type State = Vec<T>;
    fn step(&self, current: &Vec<T>, rng: &mut RandomSource) -> Result<Transition<Vec<T>>> {
        let (state, accepted) = rwm_step(&self.target, current, self.step_size, rng)?;
        Ok(Transition { state, accepted })
    }
}

#[derive(Clone, Debug)]
pub struct IndependentMetropolis<T, D, Q> {
    pub target: D,
    pub proposal: Q,
    _scalar: PhantomData<fn() -> T>,
}

impl<T: Scalar, D: LogDensity<T>, Q: SamplerDensity<T>> IndependentMetropolis<T, D, Q> {
    pub fn new(target: D, proposal: Q) -> Result<Self> {
        if target.dim() != proposal.dim() {
            return Err(ImcError::DimensionMismatch { expected: target.dim(), got: proposal.dim() });
        }
        Ok(Self { target, proposal, _scalar: PhantomData })
    }
}

impl<T: Scalar, D: LogDensity<T>, Q: SamplerDensity<T>> InstrumentalKernel for IndependentMetropolis<T, D, Q> {
    type State = Vec<T>;
    fn step(&self, current: &Vec<T>, rng: &mut RandomSource) -> Result<Transition<Vec<T>>> {
        let (state, accepted) = independent_mh_step(&self.target, &self.proposal, current, rng)?;
        Ok(Transition { state, accepted })
    }
}

/// `Q(x, .) = pi_tilde` for every `x`.
#[derive(Clone, Debug)]
pub struct IidKernel<T, S> {
    pub sampler: S,
    _scalar: PhantomData<fn() -> T>,
}

impl<T: Scalar, S: ExactSampler<T>> IidKernel<T, S> {
    pub fn new(sampler: S) -> Self {
        Self { sampler, _scalar: PhantomData }
    }
}

impl<T: Scalar, S: ExactSampler<T>> InstrumentalKernel for IidKernel<T, S> {
    type State = Vec<T>;
    fn step(&self, _current: &Vec<T>, rng: &mut RandomSource) -> Result<Transition<Vec<T>>> {
        Ok(Transition { state: iid_step(&self.sampler, rng), accepted: true })
    }
}

/// Markov chain on `{0, .., m-1}` with an explicit row-stochastic matrix.
#[derive(Clone, Debug)]
pub struct FiniteKernel<T> {
    q: Matrix<T>,
}

impl<T: Scalar> FiniteKernel<T> {
    pub fn new(q: Matrix<T>) -> Result<Self> {
        if !q.is_square() {
            return Err(ImcError::InvalidSpec("transition matrix must be square".into()));
        }
        Ok(Self { q })
    }

    pub fn from_spec(spec: &FiniteChainSpec<T>) -> Self {
        Self { q: spec.q.clone() }
    }
}

impl<T: Scalar> InstrumentalKernel for FiniteKernel<T> {
    type State = usize;
    fn step(&self, current: &usize, rng: &mut RandomSource) -> Result<Transition<usize>> {
        let i = checked_index(*current, self.q.rows())?;
        let j = sample_row(self.q.row(i), rng)?;
        Ok(Transition { state: j, accepted: j != i })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gaussian_mixture, FnDensity, StudentT};

    #[test]
    fn uphill_proposal_always_accepted() {
        // flat target: every ratio is exactly 1
        let flat = FnDensity::new(1, |_: &[f64]| 0.0);
        let mut rng = RandomSource::new(1, 0);
        for _ in 0..1000 {
            let (_, acc) = rwm_step(&flat, &[0.0], 1.0, &mut rng).unwrap();
            assert!(acc);
        }
        // increasing density in the direction of the proposal
        let mut rng = RandomSource::new(2, 0);
        let up = FnDensity::new(1, |x: &[f64]| -x[0].abs());
        let mut x = vec![10.0];
        for _ in 0..200 {
            let mut probe = rng.clone();
            let z: f64 = probe.sample(StandardNormal);
            let (next, acc) = rwm_step(&up, &x, 0.5, &mut rng).unwrap();
            if (x[0] + 0.5 * z).abs() <= x[0].abs() {
                assert!(acc);
            }
            x = next;
        }
    }

    #[test]
    fn zero_density_proposal_rejected() {
        let boxed = FnDensity::new(1, |x: &[f64]| if x[0].abs() < 1e-3 { 0.0 } else { f64::NEG_INFINITY });
        let mut rng = RandomSource::new(5, 0);
        for _ in 0..500 {
            let (y, acc) = rwm_step(&boxed, &[0.0], 10.0, &mut rng).unwrap();
            if acc {
                assert!(y[0].abs() < 1e-3);
            } else {
                assert_eq!(y, vec![0.0]);
            }
        }
        let nowhere = FnDensity::new(1, |x: &[f64]| if x[0] == 0.0 { 0.0 } else { f64::NEG_INFINITY });
        for _ in 0..500 {
            let (_, acc) = rwm_step(&nowhere, &[0.0], 1.0, &mut rng).unwrap();
            assert!(!acc);
        }
    }

    #[test]
    fn rwm_dimension_checked() {
        let g = gaussian_mixture(2, vec![vec![0.0, 0.0]]).unwrap();
        let mut rng = RandomSource::new(0, 0);
        assert!(matches!(rwm_step(&g, &[0.0], 1.0, &mut rng), Err(ImcError::DimensionMismatch { .. })));
    }

    #[test]
    fn rwm_standard_gaussian_moments() {
        let g = gaussian_mixture(1, vec![vec![0.0f64]]).unwrap();
        let k = RandomWalkMetropolis::new(g, 2.4).unwrap();
        let mut rng = RandomSource::new(9, 0);
        let n = 1_000_000;
        let mut x = vec![0.0];
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            x = k.step(&x, &mut rng).unwrap().state;
            xs.push(x[0]);
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // standard error with batch means to account for autocorrelation
        let b = 1000;
        let bm: Vec<f64> = xs.chunks(n / b).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let bvar = bm.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        let se = (bvar / b as f64).sqrt();
        assert!(mean.abs() < 4.0 * se, "mean {mean} se {se}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn imh_proposal_equal_to_target_always_accepts() {
        let g = gaussian_mixture(2, vec![vec![1.0, -1.0]]).unwrap();
        let k = IndependentMetropolis::new(g.clone(), g).unwrap();
        let mut rng = RandomSource::new(4, 0);
        let mut x = vec![1.0, -1.0];
        for _ in 0..1000 {
            let t = k.step(&x, &mut rng).unwrap();
            assert!(t.accepted);
            x = t.state;
        }
    }

    #[test]
    fn imh_from_zero_density_accepts_first_positive() {
        let target = FnDensity::new(1, |x: &[f64]| if x[0] > 100.0 { f64::NEG_INFINITY } else { -0.5 * x[0] * x[0] });
        let prop = gaussian_mixture(1, vec![vec![0.0]]).unwrap();
        let mut rng = RandomSource::new(8, 0);
        let (y, acc) = independent_mh_step(&target, &prop, &[1000.0], &mut rng).unwrap();
        assert!(acc);
        assert!(y[0] < 100.0);
    }

    #[test]
    fn imh_student_proposal_moments() {
        let target = gaussian_mixture(1, vec![vec![0.0f64]]).unwrap();
        let prop = StudentT::new(vec![0.0], 1.5, 4.0).unwrap();
        let k = IndependentMetropolis::new(target, prop).unwrap();
        let mut rng = RandomSource::new(13, 0);
        let n = 1_000_000;
        let mut x = vec![0.0];
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            x = k.step(&x, &mut rng).unwrap().state;
            s1 += x[0];
            s2 += x[0] * x[0];
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        // acceptance is high with this proposal, so autocorrelation is mild
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn iid_determinism_and_independence() {
        let g = gaussian_mixture(1, vec![vec![0.0f64]]).unwrap();
        let mut a = RandomSource::new(21, 0);
        let mut b = RandomSource::new(21, 0);
        for _ in 0..100 {
            assert_eq!(iid_step(&g, &mut a), iid_step(&g, &mut b));
        }
        let mut s1 = RandomSource::new(21, 1);
        let mut s2 = RandomSource::new(21, 2);
        let n = 1_000_000;
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = iid_step(&g, &mut s1)[0];
            let y = iid_step(&g, &mut s2)[0];
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - sx / nf * sy / nf;
        let corr = cov / ((sxx / nf - (sx / nf).powi(2)) * (syy / nf - (sy / nf).powi(2))).sqrt();
        assert!(corr.abs() < 4.0 / nf.sqrt(), "corr {corr}");
    }

    #[test]
    fn iid_gaussian_passes_ks() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let g = gaussian_mixture(1, vec![vec![0.0f64]]).unwrap();
        let mut rng = RandomSource::new(34, 0);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| iid_step(&g, &mut rng)[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let norm = Normal::new(0.0, 1.0).unwrap();
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = norm.cdf(x);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // asymptotic Kolmogorov critical value at level 1e-3
        let crit = 1.9495 / (n as f64).sqrt();
        assert!(d < crit, "D = {d}");
    }

    #[test]
    fn finite_step_degenerate_rows() {
        let spec = crate::oracle::make_random_spec::<f64>(3, 3, 1).unwrap();
        let mut id = spec.clone();
        id.q = Matrix::identity(3);
        let mut rng = RandomSource::new(0, 0);
        for s in 0..3 {
            for _ in 0..100 {
                assert_eq!(finite_step(&id, s, &mut rng).unwrap(), s);
            }
        }
        let mut shift = spec.clone();
        shift.q = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]);
        for _ in 0..100 {
            assert_eq!(finite_step(&shift, 0, &mut rng).unwrap(), 1);
        }
        assert!(matches!(finite_step(&spec, 3, &mut rng), Err(ImcError::IndexOutOfRange { .. })));
    }

    #[test]
    fn finite_step_frequencies() {
        let spec = crate::oracle::make_random_spec::<f64>(4, 8, 77).unwrap();
        let mut rng = RandomSource::new(77, 0);
        let n = 1_000_000;
        let mut counts = [[0usize; 4]; 4];
        let mut visits = [0usize; 4];
        let mut s = 0;
        for _ in 0..n {
            let t = finite_step(&spec, s, &mut rng).unwrap();
            counts[s][t] += 1;
            visits[s] += 1;
            s = t;
        }
        for i in 0..4 {
            for j in 0..4 {
                let p = spec.q[(i, j)];
                let v = visits[i] as f64;
                let se = (p * (1.0 - p) / v).sqrt();
                let f = counts[i][j] as f64 / v;
                assert!((f - p).abs() <= 4.0 * se + 1e-12, "Q[{i},{j}] = {p}, freq {f}");
            }
        }
    }
}

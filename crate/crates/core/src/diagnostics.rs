//! Effective sample sizes, κ scans, plug-in CLT variance and MSE harnesses.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{draw_counts, RunLengthSample};
use crate::error::{ImcError, Result};
use crate::linalg::{eigen_moduli, Matrix};
use crate::oracle::FiniteChainSpec;
use crate::replication::{OptimalLaw, ReplicationLaw};
use crate::rng::RandomSource;
use crate::scalar::Scalar;

/// Smallest accepted spectral gap `1 - |lambda_2(Q)|` for a Poisson solve.
pub const MIN_SPECTRAL_GAP: f64 = 1e-6;

/// `(sum N)^2 / sum N^2`.
pub fn ess_kappa(counts: &[u64]) -> Result<f64> {
    let (s, s2) = counts.iter().fold((0.0f64, 0.0f64), |(s, s2), &c| {
        let c = c as f64;
        (s + c, s2 + c * c)
    });
    if s == 0.0 {
        return Err(ImcError::EmptyChain);
    }
    Ok(s * s / s2)
}

/// `(sum w)^2 / sum w^2`.
pub fn ess_is<T: Scalar>(weights: &[T]) -> Result<T> {
    let s: T = weights.iter().copied().sum();
    if !(s > T::zero()) {
        return Err(ImcError::AllZeroWeights);
    }
    // rescale by the largest weight so the squares cannot overflow
    let top = weights.iter().copied().fold(T::zero(), T::max);
    let s = s / top;
    let s2: T = weights.iter().map(|&w| (w / top) * (w / top)).sum();
    Ok(s * s / s2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaScanRow {
    pub kappa: f64,
    pub ess_kappa: f64,
    pub ess_is: f64,
    pub chain_length: u64,
}

/// Redraws optimal-law counts at each `kappa` on fixed unit weights.
/// Row `i` uses stream `rng.stream_id() + i + 1` of `rng.seed()`, so rows are
/// independent of each other and of the grid order.
pub fn kappa_scan<T: Scalar>(weights: &[T], kappas: &[T], rng: &RandomSource) -> Result<Vec<KappaScanRow>> {
    let ess_is = ess_is(weights)?.as_f64();
    kappas
        .par_iter()
        .enumerate()
        .map(|(i, &kappa)| {
            if !(kappa > T::zero()) {
                return Err(ImcError::InvalidParameter { name: "kappa", reason: format!("must be positive, got {kappa}") });
            }
            let mut r = rng.stream(rng.stream_id().wrapping_add(i as u64 + 1));
            let counts = draw_counts(weights, kappa, &OptimalLaw, &mut r)?;
            let chain_length = counts.iter().sum();
            let ess = if chain_length == 0 { 0.0 } else { ess_kappa(&counts)? };
            Ok(KappaScanRow { kappa: kappa.as_f64(), ess_kappa: ess, ess_is, chain_length })
        })
        .collect()
}

/// `k` points log-spaced from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..k).map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp()).collect()
        }
    }
}

/// Ordinary least squares `y = slope * x + intercept`; returns `(slope, intercept, r2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonSolution<T> {
    pub h: Vec<T>,
    /// `||(I - Q) H - f||_inf`.
    pub residual: T,
    /// Infinity-norm condition number of `I - Q + 1 pi_tilde^T`.
    pub condition_number: T,
    pub spectral_gap: f64,
}

/// Solves `(I - Q) H = f` with `pi_tilde^T H = 0`.
pub fn poisson_solve<T: Scalar>(spec: &FiniteChainSpec<T>, f: &[T]) -> Result<PoissonSolution<T>> {
    let m = spec.m();
    if f.len() != m {
        return Err(ImcError::DimensionMismatch { expected: m, got: f.len() });
    }
    let mean: T = spec.pi_tilde.iter().zip(f).map(|(&p, &v)| p * v).sum();
    let scale = f.iter().fold(T::one(), |a, v| a.max(v.abs()));
    let mean_tol = T::lit(1e-10).max(T::eps_times(16.0 * m as f64)) * scale;
    if mean.abs() > mean_tol {
        return Err(ImcError::MeanNotZero(mean.as_f64()));
    }
    let moduli = eigen_moduli(&spec.q);
    let spectral_gap = 1.0 - moduli.get(1).copied().unwrap_or(0.0);
    if spectral_gap < MIN_SPECTRAL_GAP {
        return Err(ImcError::SingularSystem(format!("spectral gap {spectral_gap:e} below {MIN_SPECTRAL_GAP:e}")));
    }
    let a = Matrix::from_fn(m, m, |i, j| {
        let delta = if i == j { T::one() } else { T::zero() };
        delta - spec.q[(i, j)] + spec.pi_tilde[j]
    });
    let inv = a.inverse()?;
    let h = inv.mul_vec(f);
    let qh = spec.q.mul_vec(&h);
    let residual = (0..m).map(|i| (h[i] - qh[i] - f[i]).abs()).fold(T::zero(), T::max);
    let condition_number = a.norm_inf() * inv.norm_inf();
    Ok(PoissonSolution { h, residual, condition_number, spectral_gap })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltVarianceReport<T> {
    pub sigma2_total: T,
    /// `kappa * sigma_tilde^2(rho h0)`.
    pub sigma2_instrumental: T,
    /// `sigma_hat^2(h0, kappa) / kappa`.
    pub sigma2_replication: T,
    /// `sigma_tilde^2(rho h0)`, unscaled.
    pub sigma2_tilde: T,
    /// `pi_tilde(h0^2)`.
    pub pi_tilde_h0_sq: T,
    pub pi_h: T,
}

/// `sigma_tilde^2(rho h0) = 2 pi_tilde(rho h0 H) - pi_tilde((rho h0)^2)` and `pi_tilde(h0^2)`.
fn instrumental_variance<T: Scalar>(spec: &FiniteChainSpec<T>, h: &[T]) -> Result<(T, T, Vec<T>, T)> {
    let m = spec.m();
    if h.len() != m {
        return Err(ImcError::DimensionMismatch { expected: m, got: h.len() });
    }
    let pi_h = spec.pi_expectation(h);
    let h0: Vec<T> = h.iter().map(|&v| v - pi_h).collect();
    let rho = spec.unit_weights();
    let f: Vec<T> = (0..m).map(|x| rho[x] * h0[x]).collect();
    // exact zero mean up to rounding in pi_h
    let drift: T = (0..m).map(|x| spec.pi_tilde[x] * f[x]).sum();
    let f: Vec<T> = f.iter().map(|&v| v - drift).collect();
    let sol = poisson_solve(spec, &f)?;
    let sigma2_tilde: T = (0..m).map(|x| spec.pi_tilde[x] * (T::lit(2.0) * f[x] * sol.h[x] - f[x] * f[x])).sum();
    let pi_tilde_h0_sq: T = (0..m).map(|x| spec.pi_tilde[x] * h0[x] * h0[x]).sum();
    Ok((sigma2_tilde, pi_tilde_h0_sq, h0, pi_h))
}

/// Asymptotic variance `kappa sigma_tilde^2(rho h0) + sigma_hat^2(h0, kappa) / kappa`
/// of the expanded-chain average, with replication variance from `law` at `kappa`.
pub fn clt_variance_plugin<T: Scalar, L: ReplicationLaw<T> + ?Sized>(spec: &FiniteChainSpec<T>, h: &[T], kappa: T, law: &L) -> Result<CltVarianceReport<T>> {
    if !(kappa > T::zero()) {
        return Err(ImcError::InvalidParameter { name: "kappa", reason: format!("must be positive, got {kappa}") });
    }
    let (sigma2_tilde, pi_tilde_h0_sq, h0, pi_h) = instrumental_variance(spec, h)?;
    let rho = spec.unit_weights();
    let mut sigma_hat = T::zero();
    for x in 0..spec.m() {
        if h0[x] != T::zero() {
            sigma_hat = sigma_hat + h0[x] * h0[x] * law.variance(kappa * rho[x])? * spec.pi_tilde[x];
        }
    }
    let sigma2_instrumental = kappa * sigma2_tilde;
    let sigma2_replication = sigma_hat / kappa;
    Ok(CltVarianceReport { sigma2_total: sigma2_instrumental + sigma2_replication, sigma2_instrumental, sigma2_replication, sigma2_tilde, pi_tilde_h0_sq, pi_h })
}

/// Same as [`clt_variance_plugin`] with the count variances read off the spec's own `R_tilde` at `spec.kappa`.
pub fn clt_variance_spec<T: Scalar>(spec: &FiniteChainSpec<T>, h: &[T]) -> Result<CltVarianceReport<T>> {
    let (sigma2_tilde, pi_tilde_h0_sq, h0, pi_h) = instrumental_variance(spec, h)?;
    let moments = spec.count_moments();
    let sigma_hat: T = (0..spec.m()).map(|x| h0[x] * h0[x] * moments[x].1.max(T::zero()) * spec.pi_tilde[x]).sum();
    let sigma2_instrumental = spec.kappa * sigma2_tilde;
    let sigma2_replication = sigma_hat / spec.kappa;
    Ok(CltVarianceReport { sigma2_total: sigma2_instrumental + sigma2_replication, sigma2_instrumental, sigma2_replication, sigma2_tilde, pi_tilde_h0_sq, pi_h })
}

/// `kappa = sqrt(pi_tilde(h0^2) / sigma_tilde^2(rho h0)) / 2`.
pub fn kappa_opt<T: Scalar>(spec: &FiniteChainSpec<T>, h: &[T]) -> Result<T> {
    let (sigma2_tilde, pi_tilde_h0_sq, _, _) = instrumental_variance(spec, h)?;
    if !(sigma2_tilde > T::zero()) {
        return Err(ImcError::DegenerateVariance);
    }
    Ok(T::lit(0.5) * (pi_tilde_h0_sq / sigma2_tilde).sqrt())
}

/// Mean of `(estimate(r) - true_value)^2` over `r = 0..replications`,
/// evaluated in parallel and reduced in replication order.
pub fn empirical_mse<F>(replications: usize, true_value: f64, estimate: F) -> Result<f64>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    if replications < 2 {
        return Err(ImcError::InvalidParameter { name: "replications", reason: "need at least 2".into() });
    }
    let errs: Vec<f64> = (0..replications).into_par_iter().map(|r| estimate(r).map(|v| (v - true_value).powi(2))).collect::<Result<_>>()?;
    Ok(errs.iter().sum::<f64>() / replications as f64)
}

/// Batch-means estimate of the asymptotic variance of the running mean of `values`.
/// Not an autocorrelation-based bulk ESS.
pub fn batch_means_variance(values: &[f64], batches: usize) -> Result<f64> {
    if batches < 2 || values.len() < 2 * batches {
        return Err(ImcError::InvalidParameter { name: "batches", reason: format!("{batches} batches over {} values", values.len()) });
    }
    let b = values.len() / batches;
    let means: Vec<f64> = values.chunks_exact(b).take(batches).map(|c| c.iter().sum::<f64>() / b as f64).collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(b as f64 * var)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub ess_kappa: f64,
    pub ess_is: f64,
    pub chain_length: u64,
    pub kappa: f64,
    pub extra: BTreeMap<String, f64>,
}

impl DiagnosticsReport {
    /// ESS of a run-length sample. `ess_kappa` is 0 for an empty expanded chain.
    pub fn from_sample<S, T: Scalar>(sample: &RunLengthSample<S, T>, kappa: T) -> Result<Self> {
        let chain_length = sample.total_count();
        let ess_kappa = if chain_length == 0 { 0.0 } else { ess_kappa(&sample.counts)? };
        Ok(Self { ess_kappa, ess_is: ess_is(&sample.weights)?.as_f64(), chain_length, kappa: kappa.as_f64(), extra: BTreeMap::new() })
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::make_random_spec;
    use proptest::prelude::*;

    #[test]
    fn ess_examples() {
        assert_eq!(ess_kappa(&[1, 1, 1, 1]).unwrap(), 4.0);
        assert_eq!(ess_kappa(&[2, 0, 0, 0]).unwrap(), 1.0);
        assert!((ess_kappa(&[1, 2, 1]).unwrap() - 16.0 / 6.0).abs() < 1e-15);
        assert_eq!(ess_kappa(&[0, 0]), Err(ImcError::EmptyChain));
        assert!((ess_is(&[0.7f64; 9]).unwrap() - 9.0).abs() < 1e-12);
        assert_eq!(ess_is(&[0.0f64, 2.0, 0.0]).unwrap(), 1.0);
        assert!((ess_is(&[1.0f64, 3.0]).unwrap() - 1.6).abs() < 1e-15);
        assert_eq!(ess_is(&[0.0f64; 3]), Err(ImcError::AllZeroWeights));
        assert!((ess_is(&[1e300f64, 1e300]).unwrap() - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ess_kappa_bounds(counts in proptest::collection::vec(0u64..20, 1..50), pad in 0usize..10) {
            let positive = counts.iter().filter(|&&c| c > 0).count();
            prop_assume!(positive > 0);
            let e = ess_kappa(&counts).unwrap();
            prop_assert!(e >= 1.0 - 1e-12 && e <= positive as f64 + 1e-9);
            let mut padded = counts.clone();
            padded.extend(std::iter::repeat(0).take(pad));
            prop_assert_eq!(ess_kappa(&padded).unwrap(), e);
        }

        #[test]
        fn ess_is_bounds(w in proptest::collection::vec(0.0f64..5.0, 1..50)) {
            prop_assume!(w.iter().any(|&v| v > 0.0));
            let e = ess_is(&w).unwrap();
            prop_assert!(e >= 1.0 - 1e-12 && e <= w.len() as f64 + 1e-9);
        }
    }

    #[test]
    fn scan_integer_counts_give_full_ess() {
        let w = vec![0.5f64; 40];
        let rows = kappa_scan(&w, &[2.0, 4.0, 10.0], &RandomSource::new(1, 0)).unwrap();
        for r in rows {
            assert_eq!(r.ess_kappa, 40.0);
            assert_eq!(r.chain_length as f64, r.kappa * 20.0);
        }
    }

    #[test]
    fn scan_limit_and_linearity() {
        let mut rng = RandomSource::new(9, 0);
        let w: Vec<f64> = (0..2000).map(|_| (2.0 * rng.uniform()).exp()).collect();
        let total: f64 = w.iter().sum();
        let kappas = log_spaced(0.01, 1e4, 25);
        let rows = kappa_scan(&w, &kappas, &RandomSource::new(9, 1)).unwrap();
        let last = rows.last().unwrap();
        assert!((last.ess_kappa - last.ess_is).abs() / last.ess_is < 0.02);
        let (slope, intercept, r2) = linear_fit(&kappas, &rows.iter().map(|r| r.chain_length as f64).collect::<Vec<_>>());
        assert!((slope / total - 1.0).abs() < 1e-3 && r2 > 0.999, "{slope} {intercept} {r2}");
        assert_eq!(rows, kappa_scan(&w, &kappas, &RandomSource::new(9, 1)).unwrap());
    }

    #[test]
    fn log_spacing_endpoints() {
        let g = log_spaced(0.1, 1000.0, 5);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[4] - 1000.0).abs() < 1e-9 && (g[2] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_trivial_cases() {
        let spec = make_random_spec::<f64>(4, 4, 2).unwrap();
        let zero = poisson_solve(&spec, &[0.0; 4]).unwrap();
        assert!(zero.h.iter().all(|&v| v == 0.0));
        let mut iid = spec.clone();
        iid.q = Matrix::from_rows(&vec![spec.pi_tilde.clone(); 4]);
        let f0 = [1.0, -2.0, 0.5, 3.0];
        let mean: f64 = (0..4).map(|i| spec.pi_tilde[i] * f0[i]).sum();
        let f: Vec<f64> = f0.iter().map(|v| v - mean).collect();
        let s = poisson_solve(&iid, &f).unwrap();
        assert!(s.h.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(matches!(poisson_solve(&spec, &f0), Err(ImcError::MeanNotZero(_))));
    }

    #[test]
    fn poisson_matches_neumann_series() {
        for seed in 0..5 {
            let spec = make_random_spec::<f64>(4, 4, seed).unwrap();
            let f0 = [1.0, -2.0, 0.5, 3.0];
            let mean: f64 = (0..4).map(|i| spec.pi_tilde[i] * f0[i]).sum();
            let f: Vec<f64> = f0.iter().map(|v| v - mean).collect();
            let s = poisson_solve(&spec, &f).unwrap();
            assert!(s.residual < 1e-10);
            assert!(s.condition_number.is_finite() && s.condition_number >= 1.0);
            let mut series = vec![0.0; 4];
            let mut term = f.clone();
            for _ in 0..20_000 {
                series.iter_mut().zip(&term).for_each(|(a, b)| *a += b);
                term = spec.q.mul_vec(&term);
            }
            assert!(series.iter().zip(&s.h).all(|(a, b)| (a - b).abs() < 1e-8), "seed {seed}: {series:?} vs {:?}", s.h);
        }
    }

    #[test]
    fn poisson_rejects_reducible() {
        let spec = crate::oracle::reducible_spec::<f64>();
        assert!(matches!(poisson_solve(&spec, &[0.0, 0.0]), Err(ImcError::SingularSystem(_))));
    }

    #[test]
    fn clt_identity_and_constant() {
        let q = crate::oracle::metropolized_walk(&[0.2, 0.3, 0.5]);
        let pi = vec![0.2, 0.3, 0.5];
        let spec = FiniteChainSpec::with_optimal_law(q, pi.clone(), pi, 1.0, 2).unwrap();
        let h = [1.0, 4.0, -1.0];
        let r = clt_variance_plugin(&spec, &h, 1.0, &OptimalLaw).unwrap();
        assert_eq!(r.sigma2_replication, 0.0);
        assert_eq!(r.sigma2_total, r.sigma2_tilde);
        assert_eq!(r.sigma2_total, r.sigma2_instrumental + r.sigma2_replication);
        let c = clt_variance_plugin(&spec, &[2.0; 3], 1.0, &OptimalLaw).unwrap();
        assert!(c.sigma2_total.abs() < 1e-14);
    }

    #[test]
    fn clt_spec_and_law_agree() {
        for seed in 0..5 {
            let spec = make_random_spec::<f64>(4, 4, seed).unwrap();
            let h = [1.0, -2.0, 0.5, 3.0];
            let a = clt_variance_plugin(&spec, &h, spec.kappa, &OptimalLaw).unwrap();
            let b = clt_variance_spec(&spec, &h).unwrap();
            assert!((a.sigma2_total - b.sigma2_total).abs() < 1e-12 * a.sigma2_total.max(1.0));
            assert!(a.sigma2_replication >= 0.0 && a.sigma2_instrumental >= 0.0);
        }
    }

    #[test]
    fn kappa_opt_bound() {
        for seed in 0..10 {
            let spec = make_random_spec::<f64>(4, 4, seed).unwrap();
            let h = [1.0, -2.0, 0.5, 3.0];
            let k = kappa_opt(&spec, &h).unwrap();
            let r = clt_variance_plugin(&spec, &h, k, &OptimalLaw).unwrap();
            let bound = (r.pi_tilde_h0_sq * r.sigma2_tilde).sqrt();
            assert!(r.sigma2_total <= bound * (1.0 + 1e-12), "seed {seed}");
        }
    }

    #[test]
    fn mse_harness() {
        assert_eq!(empirical_mse(10, 3.0, |_| Ok(3.0)).unwrap(), 0.0);
        let reps = 4000;
        let v: f64 = 2.0;
        let mse = empirical_mse(reps, 0.0, |r| {
            use rand_distr::{Distribution, StandardNormal};
            let z: f64 = StandardNormal.sample(&mut RandomSource::new(77, r as u64));
            Ok(v.sqrt() * z)
        })
        .unwrap();
        assert!((mse - v).abs() < 4.0 * v * (2.0 / reps as f64).sqrt());
        assert!(empirical_mse(1, 0.0, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn batch_means_on_iid() {
        let mut rng = RandomSource::new(4, 0);
        let v: Vec<f64> = (0..100_000).map(|_| rng.uniform()).collect();
        let s = batch_means_variance(&v, 50).unwrap();
        assert!((s - 1.0 / 12.0).abs() < 0.03, "{s}");
    }

    #[test]
    fn report_from_sample() {
        let s = RunLengthSample { points: vec![0, 1, 2], counts: vec![1, 2, 1], weights: vec![1.0f64, 3.0, 0.0] };
        let r = DiagnosticsReport::from_sample(&s, 1.0).unwrap().with("alpha", 1.0);
        assert_eq!(r.chain_length, 4);
        assert!((r.ess_kappa - 16.0 / 6.0).abs() < 1e-15);
        assert!((r.ess_is - 1.6).abs() < 1e-15);
        assert_eq!(r.extra["alpha"], 1.0);
    }
}

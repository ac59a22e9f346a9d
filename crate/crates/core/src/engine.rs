//! Runs the importance Markov chain and computes its estimators.
//!
//! The output is the run-length form: each instrumental point with its
//! replication count and its `kappa = 1` weight. The expanded chain is only
//! ever produced lazily by [`expand`].
//!
//! Randomness is split in two streams derived from the caller's source: the
//! instrumental kernel consumes the source itself, replication counts (and
//! weight estimators) consume a sibling stream. Changing the law therefore
//! never perturbs the instrumental trajectory.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{ImcError, Result};
use crate::kernels::InstrumentalKernel;
use crate::model::{LogDensity, WeightFunction};
use crate::replication::{ReplicationLaw, UnbiasedEstimator};
use crate::rng::RandomSource;
use crate::scalar::Scalar;

/// Stream id of the replication stream paired with `rng`.
pub fn count_stream(rng: &RandomSource) -> RandomSource {
    rng.stream(rng.stream_id() ^ (1 << 63))
}

/// Source of the `kappa = 1` log weight `log(pi_U / pi_tilde_U)` at a state.
/// Deterministic sources ignore `rng`.
pub trait WeightSource<S: ?Sized, T: Scalar>: Send + Sync {
    fn unit_log_weight(&self, state: &S, rng: &mut RandomSource) -> Result<T>;
}

impl<T: Scalar, P: LogDensity<T>, I: LogDensity<T>> WeightSource<Vec<T>, T> for WeightFunction<P, I> {
    fn unit_log_weight(&self, state: &Vec<T>, _rng: &mut RandomSource) -> Result<T> {
        WeightFunction::unit_log_weight(self, state)
    }
}

impl<S: ?Sized, T: Scalar, W: WeightSource<S, T> + ?Sized> WeightSource<S, T> for &W {
    fn unit_log_weight(&self, state: &S, rng: &mut RandomSource) -> Result<T> {
        (**self).unit_log_weight(state, rng)
    }
}

impl<S: ?Sized, T: Scalar, W: WeightSource<S, T> + ?Sized> WeightSource<S, T> for Box<W> {
    fn unit_log_weight(&self, state: &S, rng: &mut RandomSource) -> Result<T> {
        (**self).unit_log_weight(state, rng)
    }
}

/// Tabulated weights on `{0, .., m-1}`.
#[derive(Clone, Debug)]
pub struct TableWeights<T> {
    log_weights: Vec<T>,
}

impl<T: Scalar> TableWeights<T> {
    pub fn new(weights: &[T]) -> Self {
        Self { log_weights: weights.iter().map(|w| w.ln()).collect() }
    }
}

impl<T: Scalar> WeightSource<usize, T> for TableWeights<T> {
    fn unit_log_weight(&self, state: &usize, _rng: &mut RandomSource) -> Result<T> {
        self.log_weights.get(*state).copied().ok_or(ImcError::IndexOutOfRange { index: *state, len: self.log_weights.len() })
    }
}

/// Pseudo-marginal weight `W / pi_tilde_U(x)` with `W` an unbiased estimate
/// of `pi_U(x)`.
#[derive(Clone, Debug)]
pub struct EstimatedWeight<E, I> {
    pub estimator: E,
    pub instrumental: I,
}

impl<T, E, I> WeightSource<Vec<T>, T> for EstimatedWeight<E, I>
where
    T: Scalar,
    E: UnbiasedEstimator<[T], T>,
    I: LogDensity<T>,
{
    fn unit_log_weight(&self, state: &Vec<T>, rng: &mut RandomSource) -> Result<T> {
        let log_w = self.estimator.sample_log(state, rng)?;
        if log_w.is_nan() || log_w == T::infinity() {
            return Err(ImcError::NonFiniteWeight { value: log_w.as_f64(), step: None });
        }
        if log_w == T::neg_infinity() {
            return Ok(log_w);
        }
        let li = self.instrumental.eval(state)?;
        if li == T::neg_infinity() {
            return Err(ImcError::DominationViolation { step: None });
        }
        Ok(log_w - li)
    }
}

/// Instrumental points with their replication counts and `kappa = 1` weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLengthSample<S, T> {
    pub points: Vec<S>,
    pub counts: Vec<u64>,
    pub weights: Vec<T>,
}

impl<S, T: Scalar> RunLengthSample<S, T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Length of the expanded chain.
    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Number of instrumental points replicated at least once.
    pub fn positive_count(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Same points and weights with fresh counts drawn at `kappa`.
    pub fn redraw<L: ReplicationLaw<T> + ?Sized>(&self, law: &L, kappa: T, rng: &mut RandomSource) -> Result<Self>
    where
        S: Clone,
    {
        Ok(Self { points: self.points.clone(), counts: draw_counts(&self.weights, kappa, law, rng)?, weights: self.weights.clone() })
    }
}

/// One state `(x, n)` of the augmented chain: `n` copies of `x` remain after this one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AugmentedState<S> {
    pub x: S,
    pub n: u64,
}

/// Instrumental trajectory and its weights, before replication.
#[derive(Clone, Debug, PartialEq)]
pub struct InstrumentalRun<S, T> {
    pub points: Vec<S>,
    pub weights: Vec<T>,
    pub accepted: usize,
}

/// Advances `kernel` through `burn_in` discarded steps, then records
/// `n_steps` points with their unit weights.
pub fn run_instrumental<K, W, T>(kernel: &K, weights: &W, x0: K::State, n_steps: usize, burn_in: usize, rng: &mut RandomSource) -> Result<InstrumentalRun<K::State, T>>
where
    K: InstrumentalKernel,
    W: WeightSource<K::State, T> + ?Sized,
    T: Scalar,
{
    if n_steps == 0 {
        return Err(ImcError::InvalidParameter { name: "n_steps", reason: "must be at least 1".into() });
    }
    let mut weight_rng = count_stream(rng).stream(rng.stream_id() ^ (1 << 62));
    let mut x = x0;
    for _ in 0..burn_in {
        x = kernel.step(&x, rng)?.state;
    }
    let mut points = Vec::with_capacity(n_steps);
    let mut out_weights = Vec::with_capacity(n_steps);
    let mut accepted = 0;
    for k in 0..n_steps {
        let t = kernel.step(&x, rng).map_err(|e| e.at(k))?;
        accepted += usize::from(t.accepted);
        x = t.state;
        let lw = weights.unit_log_weight(&x, &mut weight_rng).map_err(|e| e.at(k))?;
        let w = lw.exp();
        if !w.is_finite() {
            return Err(ImcError::NonFiniteWeight { value: w.as_f64(), step: Some(k) });
        }
        points.push(x.clone());
        out_weights.push(w);
    }
    Ok(InstrumentalRun { points, weights: out_weights, accepted })
}

/// Replication counts `N_i ~ law(kappa * w_i)`.
pub fn draw_counts<T: Scalar, L: ReplicationLaw<T> + ?Sized>(weights: &[T], kappa: T, law: &L, rng: &mut RandomSource) -> Result<Vec<u64>> {
    weights.iter().enumerate().map(|(k, &w)| law.draw(kappa * w, rng).map_err(|e| e.at(k))).collect()
}

/// Semi-Markov form of the importance Markov chain: `n_steps` instrumental
/// points, each replicated `N_k ~ law(kappa * w(X_k))` times.
#[allow(clippy::too_many_arguments)]
pub fn run_semi_markov<K, L, W, T>(kernel: &K, law: &L, weights: &W, kappa: T, x0: K::State, n_steps: usize, burn_in: usize, rng: &mut RandomSource) -> Result<RunLengthSample<K::State, T>>
where
    K: InstrumentalKernel,
    L: ReplicationLaw<T> + ?Sized,
    W: WeightSource<K::State, T> + ?Sized,
    T: Scalar,
{
    let mut counts_rng = count_stream(rng);
    let run = run_instrumental(kernel, weights, x0, n_steps, burn_in, rng)?;
    let counts = draw_counts(&run.weights, kappa, law, &mut counts_rng)?;
    Ok(RunLengthSample { points: run.points, counts, weights: run.weights })
}

/// Lazily unrolls a run-length sample into the augmented chain.
pub fn expand<S, T>(sample: &RunLengthSample<S, T>) -> impl Iterator<Item = AugmentedState<&S>> + '_ {
    sample.points.iter().zip(&sample.counts).flat_map(|(x, &c)| (0..c).rev().map(move |n| AugmentedState { x, n }))
}

/// `kappa = alpha * n / sum(w)`, so the expanded chain has expected length `alpha * n`.
pub fn tune_kappa<T: Scalar>(weights: &[T], alpha: T) -> Result<T> {
    if !(alpha > T::zero()) {
        return Err(ImcError::InvalidParameter { name: "alpha", reason: format!("must be positive, got {alpha}") });
    }
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(ImcError::AllZeroWeights);
    }
    Ok(alpha * T::lit(weights.len() as f64) / total)
}

/// `(sum_i N_i h(x_i) / sum_i N_i, sum_i N_i)`.
pub fn estimate_imc<S, T: Scalar>(sample: &RunLengthSample<S, T>, h: impl Fn(&S) -> T) -> Result<(T, u64)> {
    let total = sample.total_count();
    if total == 0 {
        return Err(ImcError::EmptyChain);
    }
    let acc: T = sample.points.iter().zip(&sample.counts).filter(|(_, &c)| c > 0).map(|(x, &c)| T::lit(c as f64) * h(x)).sum();
    Ok((acc / T::lit(total as f64), total))
}

/// Self-normalized importance sampling estimate from the stored weights.
pub fn estimate_is<S, T: Scalar>(sample: &RunLengthSample<S, T>, h: impl Fn(&S) -> T) -> Result<T> {
    let total: T = sample.weights.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(ImcError::AllZeroWeights);
    }
    let acc: T = sample.points.iter().zip(&sample.weights).filter(|(_, &w)| w > T::zero()).map(|(x, &w)| w * h(x)).sum();
    Ok(acc / total)
}

/// Writes `sample` as CSV: a `# {json}` metadata line, then the header
/// `index,count,weight,x_1..x_d` and one row per instrumental point.
pub fn write_csv<M: Serialize, W: Write>(sample: &RunLengthSample<Vec<f64>, f64>, metadata: &M, mut out: W) -> std::io::Result<()> {
    let meta = serde_json::to_string(metadata).map_err(std::io::Error::other)?;
    writeln!(out, "# {meta}")?;
    let dim = sample.points.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string(), "count".to_string(), "weight".to_string()];
    header.extend((1..=dim).map(|i| format!("x_{i}")));
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(3 + dim);
    for (i, ((x, c), wt)) in sample.points.iter().zip(&sample.counts).zip(&sample.weights).enumerate() {
        record.clear();
        record.push(i.to_string());
        record.push(c.to_string());
        record.push(format!("{wt:e}"));
        record.extend(x.iter().map(|v| format!("{v:e}")));
        w.write_record(&record)?;
    }
    w.flush()
}

/// Reads back [`write_csv`] output, returning the metadata JSON and the sample.
pub fn read_csv<R: BufRead>(mut input: R) -> std::io::Result<(serde_json::Value, RunLengthSample<Vec<f64>, f64>)> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    let meta_text = first.trim_end().strip_prefix("# ").ok_or_else(|| std::io::Error::other("missing metadata line"))?;
    let meta: serde_json::Value = serde_json::from_str(meta_text).map_err(std::io::Error::other)?;
    let mut r = csv::Reader::from_reader(input);
    let mut sample = RunLengthSample { points: Vec::new(), counts: Vec::new(), weights: Vec::new() };
    for rec in r.records() {
        let rec = rec?;
        let parse = |s: &str| s.parse::<f64>().map_err(std::io::Error::other);
        sample.counts.push(rec[1].parse::<u64>().map_err(std::io::Error::other)?);
        sample.weights.push(parse(&rec[2])?);
        sample.points.push(rec.iter().skip(3).map(parse).collect::<std::io::Result<Vec<f64>>>()?);
    }
    Ok((meta, sample))
}

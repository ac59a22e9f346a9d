use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{ExperimentConfig, KappaPolicy, KernelSpec, TargetSpec};
use super::experiment::{Experiment, ReplicationOutput};
use crate::diagnostics::{ess_is, ess_kappa, kappa_scan, linear_fit, log_spaced, DiagnosticsReport, KappaScanRow};
use crate::engine::{count_stream, draw_counts, estimate_imc, estimate_is, write_csv, RunLengthSample};
use crate::error::{ImcError, Result};
use crate::linalg::{l1_distance, Matrix};
use crate::oracle::{bar_pi_closed_form, first_marginal, log_linear_fit, make_random_spec, p_matrix, p_matrix_series, reducible_spec, s_matrix, stationary, tv_decay, FiniteChainSpec, SpecTolerances};
use crate::replication::{OptimalLaw, OsrLaw};
use crate::rng::RandomSource;

fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| ImcError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn sample_file(replications: usize, r: usize) -> String {
    if replications == 1 {
        "sample.csv".into()
    } else {
        format!("sample_{r:04}.csv")
    }
}

fn alpha(config: &ExperimentConfig) -> Option<f64> {
    match config.kappa {
        KappaPolicy::Tuned { alpha } => Some(alpha),
        KappaPolicy::Fixed(_) => None,
    }
}

fn kernel_name(config: &ExperimentConfig) -> &'static str {
    match config.kernel {
        KernelSpec::Rwm { .. } => "rwm",
        KernelSpec::Iid => "iid",
        KernelSpec::Imh { .. } => "imh",
        KernelSpec::Finite => "finite",
    }
}

/// Everything `run` wrote, for callers that want it in memory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub replications: Vec<ReplicationOutput>,
    pub diagnostics: Vec<DiagnosticsReport>,
}

/// Runs every replication and writes `sample[_rrrr].csv`, `metadata.json`
/// and `diagnostics.json` to `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let exp = Experiment::new(config.clone())?;
    let outputs = exp.run_all()?;
    fs::create_dir_all(out)?;
    let mut diagnostics = Vec::with_capacity(outputs.len());
    for o in &outputs {
        let meta = json!({
            "config": config,
            "seed": config.seed,
            "replication": o.replication,
            "kappa": o.kappa,
            "effective_kappa": o.effective_kappa,
            "alpha": alpha(config),
            "law": exp.law_name(),
            "kernel": kernel_name(config),
            "n_steps": config.n_steps,
            "burn_in": config.burn_in,
        });
        let file = fs::File::create(out.join(sample_file(config.replications, o.replication)))?;
        let mut w = BufWriter::new(file);
        write_csv(&o.sample, &meta, &mut w)?;
        w.flush()?;
        let mut d = DiagnosticsReport::from_sample(&o.sample, o.kappa)?
            .with("effective_kappa", o.effective_kappa)
            .with("acceptance_rate", o.acceptance_rate)
            .with("expected_chain_length", o.expected_chain_length)
            .with("positive_copies", o.sample.positive_count() as f64);
        if let Some(spec) = exp.finite_spec() {
            let occupation = occupation(&o.sample, spec.m());
            d = d.with("occupation_l1_error", l1_distance(&occupation, &spec.pi));
        }
        diagnostics.push(d);
    }
    let replications: Vec<_> = outputs
        .iter()
        .map(|o| {
            json!({
                "replication": o.replication,
                "file": sample_file(config.replications, o.replication),
                "kappa": o.kappa,
                "effective_kappa": o.effective_kappa,
                "chain_length": o.sample.total_count(),
                "expected_chain_length": o.expected_chain_length,
                "positive_copies": o.sample.positive_count(),
                "acceptance_rate": o.acceptance_rate,
            })
        })
        .collect();
    write_json(&out.join("metadata.json"), &json!({"config": config, "seed": config.seed, "law": exp.law_name(), "kernel": kernel_name(config), "alpha": alpha(config), "replications": replications}))?;
    write_json(&out.join("diagnostics.json"), &json!({"config": config, "seed": config.seed, "reports": diagnostics}))?;
    Ok(RunSummary { replications: outputs, diagnostics })
}

/// Expanded-chain state frequencies of a finite-target sample.
fn occupation(sample: &RunLengthSample<Vec<f64>, f64>, m: usize) -> Vec<f64> {
    let mut occ = vec![0.0; m];
    for (p, &c) in sample.points.iter().zip(&sample.counts) {
        occ[p[0] as usize] += c as f64;
    }
    let total: f64 = occ.iter().sum();
    if total > 0.0 {
        occ.iter_mut().for_each(|v| *v /= total);
    }
    occ
}

/// Tolerances of the `verify` checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyTolerances {
    pub row_sum: f64,
    pub rejection_invariance: f64,
    pub decomposition: f64,
    pub invariance: f64,
    pub marginal: f64,
    pub stationary: f64,
    pub slem_margin: f64,
    pub tv_slope: f64,
    pub tv_residual: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self { row_sum: 1e-12, rejection_invariance: 1e-10, decomposition: 1e-12, invariance: 1e-10, marginal: 1e-10, stationary: 1e-10, slem_margin: 1e-8, tv_slope: -1e-3, tv_residual: 0.5 }
    }
}

impl VerifyTolerances {
    /// Applies `name=value`.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "row_sum" => &mut self.row_sum,
            "rejection_invariance" => &mut self.rejection_invariance,
            "decomposition" => &mut self.decomposition,
            "invariance" => &mut self.invariance,
            "marginal" => &mut self.marginal,
            "stationary" => &mut self.stationary,
            "slem_margin" => &mut self.slem_margin,
            "tv_slope" => &mut self.tv_slope,
            "tv_residual" => &mut self.tv_residual,
            other => return Err(ImcError::Config { path: format!("tolerances.{other}"), reason: "unknown tolerance".into() }),
        };
        *slot = value;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "four")]
    pub m: usize,
    #[serde(default = "three")]
    pub n_max: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub tolerances: VerifyTolerances,
    /// Adds the two-state identity chain, which must fail the uniqueness check.
    #[serde(default)]
    pub include_reducible: bool,
    #[serde(default = "sixty")]
    pub tv_lags: usize,
    #[serde(default = "thirty")]
    pub tv_window: usize,
}

fn four() -> usize {
    4
}
fn three() -> usize {
    3
}
fn sixty() -> usize {
    60
}
fn thirty() -> usize {
    30
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { m: 4, n_max: 3, seeds: default_seeds(), tolerances: VerifyTolerances::default(), include_reducible: false, tv_lags: 60, tv_window: 30 }
    }
}

impl VerifyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| ImcError::Config { path: e.path().to_string(), reason: e.inner().to_string() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), passed: value <= tolerance, value: Some(value), tolerance: Some(tolerance), error: None }
    }

    fn failed(name: &str, e: &ImcError) -> Self {
        Self { name: name.into(), passed: false, value: None, tolerance: None, error: Some(e.to_string()) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecReport {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub m: usize,
    pub n_max: usize,
    pub kappa: f64,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_eigenvalue_modulus: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub specs: Vec<SpecReport>,
    pub passed: bool,
}

fn max_row_deviation(p: &Matrix<f64>) -> f64 {
    (0..p.rows()).map(|i| (p.row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
}

/// Runs every oracle check on one spec; failures are recorded, never raised.
pub fn verify_spec(spec: &FiniteChainSpec<f64>, label: &str, seed: Option<u64>, cfg: &VerifyConfig) -> SpecReport {
    let tol = &cfg.tolerances;
    let mut checks = Vec::new();
    let mut report = SpecReport { label: label.into(), seed, m: spec.m(), n_max: spec.n_max(), kappa: spec.kappa, checks: Vec::new(), tv_slope: None, tv_residual: None, second_eigenvalue_modulus: None, passed: false };
    let spec_tol = SpecTolerances { row_sum: tol.row_sum, ..SpecTolerances::for_scalar::<f64>() };
    match spec.validate(spec_tol) {
        Ok(()) => checks.push(Check { name: "spec_valid".into(), passed: true, value: None, tolerance: None, error: None }),
        Err(e) => checks.push(Check::failed("spec_valid", &e)),
    }
    match s_matrix(spec) {
        Ok(s) => {
            let acc = spec.acceptance();
            let mut nu: Vec<f64> = (0..spec.m()).map(|x| acc[x] * spec.pi_tilde[x]).collect();
            let total: f64 = nu.iter().sum();
            nu.iter_mut().for_each(|v| *v /= total);
            checks.push(Check::below("rejection_invariance", l1_distance(&s.vec_mul(&nu), &nu), tol.rejection_invariance));
        }
        Err(e) => checks.push(Check::failed("rejection_invariance", &e)),
    }
    let p = match p_matrix(spec) {
        Ok(p) => p,
        Err(e) => {
            checks.push(Check::failed("p_matrix", &e));
            report.checks = checks;
            return report;
        }
    };
    checks.push(Check::below("p_row_sums", max_row_deviation(&p), tol.row_sum));
    match p_matrix_series(spec, 500) {
        Ok(series) => checks.push(Check::below("p_decompositions_agree", series.max_abs_diff(&p), tol.decomposition)),
        Err(e) => checks.push(Check::failed("p_decompositions_agree", &e)),
    }
    let bar_pi = bar_pi_closed_form(spec);
    checks.push(Check::below("invariance", l1_distance(&p.vec_mul(&bar_pi), &bar_pi), tol.invariance));
    checks.push(Check::below("first_marginal", l1_distance(&first_marginal(spec, &bar_pi), &spec.pi), tol.marginal));
    match stationary(&p) {
        Ok(st) => {
            checks.push(Check::below("stationary_matches_closed_form", l1_distance(&st.distribution, &bar_pi), tol.stationary));
            if let Some(slem) = st.second_eigenvalue_modulus {
                report.second_eigenvalue_modulus = Some(slem);
                checks.push(Check::below("spectral_gap", slem, 1.0 - tol.slem_margin));
            }
        }
        Err(e) => checks.push(Check::failed("stationary_matches_closed_form", &e)),
    }
    let mut xi0 = vec![0.0; p.rows()];
    xi0[0] = 1.0;
    match tv_decay(&p, &xi0, &bar_pi, cfg.tv_lags) {
        Ok(tv) => {
            let (slope, resid) = log_linear_fit(&tv, cfg.tv_window);
            report.tv_slope = Some(slope);
            report.tv_residual = Some(resid);
            // exact convergence in finitely many steps has slope -inf and no residual
            let exact = slope == f64::NEG_INFINITY;
            checks.push(Check { name: "tv_slope".into(), passed: slope < tol.tv_slope, value: Some(slope), tolerance: Some(tol.tv_slope), error: None });
            checks.push(Check { name: "tv_log_linear".into(), passed: exact || resid <= tol.tv_residual, value: (!exact).then_some(resid), tolerance: Some(tol.tv_residual), error: None });
        }
        Err(e) => checks.push(Check::failed("tv_slope", &e)),
    }
    report.passed = checks.iter().all(|c| c.passed);
    report.checks = checks;
    report
}

/// Oracle report over `cfg.seeds`, in seed order.
pub fn verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut specs: Vec<SpecReport> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let spec = make_random_spec::<f64>(cfg.m, cfg.n_max, seed)?;
            Ok(verify_spec(&spec, &format!("random_m{}_n{}_seed{seed}", cfg.m, cfg.n_max), Some(seed), cfg))
        })
        .collect::<Result<_>>()?;
    if cfg.include_reducible {
        specs.push(verify_spec(&reducible_spec::<f64>(), "reducible_identity", None, cfg));
    }
    let passed = specs.iter().all(|s| s.passed);
    Ok(VerifyReport { config: cfg.clone(), specs, passed })
}

/// Writes `verify.json` and returns the report.
pub fn verify_to(cfg: &VerifyConfig, out: &Path) -> Result<VerifyReport> {
    let report = verify(cfg)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("verify.json"), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSummary {
    pub rows: Vec<KappaScanRow>,
    pub sum_weights: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `|ESS_kappa - ESS_IS| / ESS_IS` at the largest κ.
    pub final_relative_gap: f64,
}

/// κ scan on replication 0's instrumental chain.
pub fn ess_scan_rows(config: &ExperimentConfig) -> Result<ScanSummary> {
    let exp = Experiment::new(config.clone())?;
    let (run, _) = exp.instrumental_run(0)?;
    let sum_weights: f64 = run.weights.iter().sum();
    if !(sum_weights > 0.0) {
        return Err(ImcError::AllZeroWeights);
    }
    let n = run.weights.len() as f64;
    let scan = config.scan.clone().unwrap_or(super::config::ScanSpec { kappa_min: None, kappa_max: None, points: 30 });
    let lo = scan.kappa_min.unwrap_or(0.01 * n / sum_weights);
    // the top of the default grid has expected mean count 2000, comfortably past 10^3
    let hi = scan.kappa_max.unwrap_or(2000.0 * n / sum_weights);
    if !(lo > 0.0 && hi >= lo) || scan.points < 2 {
        return Err(ImcError::Config { path: "scan".into(), reason: format!("need 0 < kappa_min <= kappa_max and at least 2 points, got [{lo}, {hi}] x {}", scan.points) });
    }
    let grid = log_spaced(lo, hi, scan.points);
    let rows = kappa_scan(&run.weights, &grid, &RandomSource::new(config.seed, 1 << 40))?;
    let lengths: Vec<f64> = rows.iter().map(|r| r.chain_length as f64).collect();
    let (slope, intercept, r2) = linear_fit(&grid, &lengths);
    let last = rows.last().expect("at least two rows");
    let final_relative_gap = (last.ess_kappa - last.ess_is).abs() / last.ess_is;
    Ok(ScanSummary { rows, sum_weights, slope, intercept, r2, final_relative_gap })
}

/// Writes `scan.csv` (columns `kappa,ess_kappa,ess_is,chain_length`) and `scan.json`.
pub fn ess_scan(config: &ExperimentConfig, out: &Path) -> Result<ScanSummary> {
    let summary = ess_scan_rows(config)?;
    fs::create_dir_all(out)?;
    let mut f = BufWriter::new(fs::File::create(out.join("scan.csv"))?);
    writeln!(f, "# {}", json!({"config": config, "seed": config.seed}))?;
    let mut w = csv::Writer::from_writer(f);
    for row in &summary.rows {
        w.serialize(row).map_err(|e| ImcError::Io(e.to_string()))?;
    }
    w.flush()?;
    write_json(&out.join("scan.json"), &json!({"config": config, "seed": config.seed, "summary": &summary}))?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    /// `imc`, `is`, `imh` or `osr`.
    pub method: String,
    pub moments: Vec<i32>,
    pub mse: Vec<f64>,
    pub mean_ess_kappa: Option<f64>,
    pub mean_ess_is: f64,
    /// Mean number of instrumental draws kept at least once.
    pub positive_copies: f64,
    pub mean_chain_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub n_steps: usize,
    pub replications: usize,
    pub true_moments: Vec<f64>,
    pub results: Vec<BenchResult>,
}

/// `E[X^k]` for `X ~ N(mu, 1)`.
fn gaussian_raw_moment(mu: f64, k: i32) -> f64 {
    // sum_j C(k, j) mu^(k-j) E[Z^j], E[Z^j] = (j-1)!! for even j
    let mut total = 0.0;
    let mut binom = 1.0;
    let mut double_fact = 1.0;
    for j in 0..=k {
        if j > 0 {
            binom *= (k - j + 1) as f64 / j as f64;
        }
        if j % 2 == 0 {
            if j >= 2 {
                double_fact *= (j - 1) as f64;
            }
            total += binom * mu.powi(k - j) * double_fact;
        }
    }
    total
}

/// True first-coordinate moments, from the config or in closed form.
fn true_moments(config: &ExperimentConfig, exp: &Experiment, moments: &[i32]) -> Result<Vec<f64>> {
    if let Some(v) = config.bench.as_ref().and_then(|b| b.true_moments.clone()) {
        if v.len() != moments.len() {
            return Err(ImcError::Config { path: "bench.true_moments".into(), reason: format!("expected {} values", moments.len()) });
        }
        return Ok(v);
    }
    match (&config.target, &exp.model) {
        (TargetSpec::RingBimodal { .. }, _) => {
            if moments.iter().any(|k| k % 2 == 0) {
                return Err(ImcError::Config { path: "bench.true_moments".into(), reason: "even moments of the ring target need explicit values".into() });
            }
            Ok(vec![0.0; moments.len()])
        }
        (TargetSpec::GaussianMixture { .. }, super::experiment::Model::Continuous { .. }) => {
            let means = match &config.target {
                TargetSpec::GaussianMixture { means: Some(m), .. } => m.clone(),
                _ => return Err(ImcError::Config { path: "bench.true_moments".into(), reason: "give explicit means or true moments".into() }),
            };
            Ok(moments.iter().map(|&k| means.iter().map(|mu| gaussian_raw_moment(mu[0], k)).sum::<f64>() / means.len() as f64).collect())
        }
        _ => Err(ImcError::Config { path: "target".into(), reason: "bench needs a continuous target".into() }),
    }
}

struct BenchRep {
    est: [Vec<f64>; 4],
    ess_kappa: [f64; 2],
    ess_is: f64,
    positive: [f64; 4],
    length: [f64; 4],
}

/// Compares IMC, IS, independent MH and OSR on the same i.i.d. instrumental draws.
pub fn bench_report(config: &ExperimentConfig) -> Result<BenchReport> {
    if config.kernel != KernelSpec::Iid {
        return Err(ImcError::Config { path: "kernel.name".into(), reason: "bench needs the `iid` kernel".into() });
    }
    let exp = Experiment::new(config.clone())?;
    let moments = config.bench.as_ref().map(|b| b.moments.clone()).unwrap_or_else(|| vec![1, 3, 5, 7]);
    let truth = true_moments(config, &exp, &moments)?;
    let n = config.n_steps;
    let reps: Vec<BenchRep> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let (run, mut counts_rng) = exp.instrumental_run(r)?;
            let kappa = exp.kappa_for(&run.weights)?;
            let mut osr_rng = count_stream(&counts_rng);
            let mut imh_rng = RandomSource::new(config.seed, r as u64 | (1 << 61));
            let imc = RunLengthSample { points: run.points, counts: draw_counts(&run.weights, kappa, &OptimalLaw, &mut counts_rng)?, weights: run.weights };
            let osr_counts = draw_counts(&imc.weights, kappa, &OsrLaw, &mut osr_rng)?;
            // independent MH on the same proposals: accept y with probability min(1, w(y) / w(x))
            let mut imh_counts = vec![0u64; n];
            let mut cur = 0usize;
            let mut distinct = 1.0;
            imh_counts[0] = 1;
            for k in 1..n {
                let u = imh_rng.uniform();
                if u * imc.weights[cur] < imc.weights[k] {
                    cur = k;
                    distinct += 1.0;
                }
                imh_counts[cur] += 1;
            }
            let osr = RunLengthSample { points: imc.points.clone(), counts: osr_counts, weights: imc.weights.clone() };
            let imh = RunLengthSample { points: imc.points.clone(), counts: imh_counts, weights: imc.weights.clone() };
            let h = |k: i32| move |x: &Vec<f64>| x[0].powi(k);
            let mut est: [Vec<f64>; 4] = Default::default();
            for &k in &moments {
                est[0].push(estimate_imc(&imc, h(k))?.0);
                est[1].push(estimate_is(&imc, h(k))?);
                est[2].push(estimate_imc(&imh, h(k))?.0);
                est[3].push(estimate_imc(&osr, h(k))?.0);
            }
            Ok(BenchRep {
                est,
                ess_kappa: [ess_kappa(&imc.counts)?, ess_kappa(&osr.counts)?],
                ess_is: ess_is(&imc.weights)?,
                positive: [imc.positive_count() as f64, n as f64, distinct, osr.positive_count() as f64],
                length: [imc.total_count() as f64, n as f64, n as f64, osr.total_count() as f64],
            })
        })
        .collect::<Result<_>>()?;
    let reps_f = reps.len() as f64;
    let mean = |f: &dyn Fn(&BenchRep) -> f64| reps.iter().map(f).sum::<f64>() / reps_f;
    let results = ["imc", "is", "imh", "osr"]
        .iter()
        .enumerate()
        .map(|(m, name)| BenchResult {
            method: name.to_string(),
            moments: moments.clone(),
            mse: (0..moments.len()).map(|j| mean(&|r| (r.est[m][j] - truth[j]).powi(2))).collect(),
            mean_ess_kappa: match m {
                0 => Some(mean(&|r| r.ess_kappa[0])),
                3 => Some(mean(&|r| r.ess_kappa[1])),
                _ => None,
            },
            mean_ess_is: mean(&|r| r.ess_is),
            positive_copies: mean(&|r| r.positive[m]),
            mean_chain_length: mean(&|r| r.length[m]),
        })
        .collect();
    Ok(BenchReport { n_steps: n, replications: config.replications, true_moments: truth, results })
}

/// Writes `bench.json`.
pub fn bench(config: &ExperimentConfig, out: &Path) -> Result<BenchReport> {
    let report = bench_report(config)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("bench.json"), &json!({"config": config, "seed": config.seed, "report": &report}))?;
    Ok(report)
}

/// Mean over replications of `||I_IMC(x) - mean||^2`, the squared error of
/// the estimated target mean vector.
pub fn mean_vector_mse(config: &ExperimentConfig, true_mean: &[f64]) -> Result<f64> {
    let exp = Experiment::new(config.clone())?;
    crate::diagnostics::empirical_mse(config.replications.max(2), 0.0, |r| {
        let o = exp.run_replication(r)?;
        let mut sq = 0.0;
        for (j, &mu) in true_mean.iter().enumerate() {
            let (v, _) = estimate_imc(&o.sample, |x| x[j])?;
            sq += (v - mu).powi(2);
        }
        Ok(sq.sqrt())
    })
}

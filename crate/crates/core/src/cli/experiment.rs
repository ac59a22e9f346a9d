use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, InstrumentalSpec, KappaPolicy, KernelSpec, LawSpec, NoiseSpec, TargetSpec};
use crate::engine::{count_stream, draw_counts, run_instrumental, InstrumentalRun, RunLengthSample, TableWeights};
use crate::error::{ImcError, Result};
use crate::kernels::{FiniteKernel, IidKernel, IndependentMetropolis, InstrumentalKernel, RandomWalkMetropolis};
use crate::model::{gaussian_mixture, ring_bimodal, tempered, LogDensity, SamplerDensity, StudentT, WeightFunction};
use crate::oracle::{make_random_spec, FiniteChainSpec};
use crate::replication::{BernoulliLaw, LogNormalNoise, OptimalLaw, OsrLaw, PseudoMarginalLaw, ReplicationLaw, TwoPointNoise};
use crate::rng::RandomSource;

pub type DynDensity = Arc<dyn LogDensity<f64>>;
pub type DynSampler = Arc<dyn SamplerDensity<f64>>;
type DynKernel = Box<dyn InstrumentalKernel<State = Vec<f64>>>;

/// Instrumental density, with an exact sampler when one exists.
#[derive(Clone)]
pub struct Instrumental {
    pub density: DynDensity,
    pub sampler: Option<DynSampler>,
}

/// Replication law plus the factor applied to κ before drawing
/// (`1 / m` for the rejection law, 1 otherwise).
pub struct Law {
    pub law: Box<dyn ReplicationLaw<f64>>,
    pub kappa_factor: f64,
}

pub enum Model {
    Continuous { target: DynDensity, instrumental: Instrumental, kernel: DynKernel, weights: WeightFunction<DynDensity, DynDensity>, x0: Vec<f64> },
    Finite { spec: Box<FiniteChainSpec<f64>>, kernel: FiniteKernel<f64>, weights: TableWeights<f64>, x0: usize },
}

/// A validated config with every component built.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: Model,
    pub law: Law,
}

/// Output of one replication; finite states are stored as one-coordinate points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationOutput {
    pub replication: usize,
    #[serde(skip)]
    pub sample: RunLengthSample<Vec<f64>, f64>,
    /// κ as set by the policy.
    pub kappa: f64,
    /// κ handed to the law, after the rejection-law rescaling.
    pub effective_kappa: f64,
    pub acceptance_rate: f64,
    /// `effective_kappa * sum rho_U`, the conditional mean of the chain length.
    pub expected_chain_length: f64,
}

fn cfg_err(path: &str, e: impl std::fmt::Display) -> ImcError {
    ImcError::Config { path: path.into(), reason: e.to_string() }
}

/// Target log-density; for a Gaussian mixture with `n_components`, the means
/// are drawn `N(0, mean_sd^2 I)` from stream 0 of `means_seed`.
pub fn build_target(spec: &TargetSpec) -> Result<DynDensity> {
    match spec {
        TargetSpec::GaussianMixture { dim, means, n_components, mean_sd, means_seed } => {
            let means = match (means, n_components) {
                (Some(m), _) => m.clone(),
                (None, Some(k)) => {
                    let mut rng = RandomSource::new(*means_seed, 0);
                    (0..*k)
                        .map(|_| {
                            (0..*dim)
                                .map(|_| {
                                    let z: f64 = StandardNormal.sample(&mut rng);
                                    mean_sd * z
                                })
                                .collect()
                        })
                        .collect()
                }
                (None, None) => return Err(cfg_err("target.n_components", "give either `means` or `n_components`")),
            };
            Ok(Arc::new(gaussian_mixture(*dim, means).map_err(|e| cfg_err("target.means", e))?))
        }
        TargetSpec::RingBimodal { dim } => Ok(Arc::new(ring_bimodal(*dim).map_err(|e| cfg_err("target.dim", e))?)),
        TargetSpec::Finite { .. } => Err(cfg_err("target.name", "finite targets have no density")),
    }
}

/// Means `2 s / sqrt(dim)` over all sign vectors `s`.
pub fn ring_means(dim: usize) -> Result<Vec<Vec<f64>>> {
    if dim == 0 || dim > 16 {
        return Err(ImcError::InvalidParameter { name: "dim", reason: format!("ring mixture supports 1..=16 dimensions, got {dim}") });
    }
    let r = 2.0 / (dim as f64).sqrt();
    Ok((0..1u32 << dim).map(|s| (0..dim).map(|i| if s >> i & 1 == 1 { r } else { -r }).collect()).collect())
}

pub fn build_instrumental(spec: &InstrumentalSpec, target: &DynDensity, path: &str) -> Result<Instrumental> {
    let dim = target.dim();
    let sampled = |s: DynSampler| Instrumental { density: s.clone(), sampler: Some(s) };
    Ok(match spec {
        InstrumentalSpec::Same => Instrumental { density: target.clone(), sampler: None },
        InstrumentalSpec::Tempered { beta } => Instrumental { density: Arc::new(tempered(target.clone(), *beta).map_err(|e| cfg_err(&format!("{path}.beta"), e))?), sampler: None },
        InstrumentalSpec::GaussianMixture { means, scale } => {
            let g = gaussian_mixture(dim, means.clone()).and_then(|g| g.with_scale(*scale)).map_err(|e| cfg_err(&format!("{path}.means"), e))?;
            sampled(Arc::new(g))
        }
        InstrumentalSpec::RingMixture { scale } => {
            let g = ring_means(dim).and_then(|m| gaussian_mixture(dim, m)).and_then(|g| g.with_scale(*scale)).map_err(|e| cfg_err(&format!("{path}.scale"), e))?;
            sampled(Arc::new(g))
        }
        InstrumentalSpec::StudentT { location, scale, nu } => {
            if location.len() != dim {
                return Err(cfg_err(&format!("{path}.location"), format!("expected length {dim}, got {}", location.len())));
            }
            sampled(Arc::new(StudentT::new(location.clone(), *scale, *nu).map_err(|e| cfg_err(path, e))?))
        }
    })
}

pub fn build_law(spec: &LawSpec) -> Result<Law> {
    Ok(match spec {
        LawSpec::Optimal => Law { law: Box::new(OptimalLaw), kappa_factor: 1.0 },
        LawSpec::BernoulliRejection { m } => Law { law: Box::new(BernoulliLaw), kappa_factor: 1.0 / m },
        LawSpec::Osr => Law { law: Box::new(OsrLaw), kappa_factor: 1.0 },
        LawSpec::PseudoMarginal { noise } => {
            let law: Box<dyn ReplicationLaw<f64>> = match noise {
                NoiseSpec::TwoPoint { low, high } => Box::new(PseudoMarginalLaw { noise: TwoPointNoise::new(*low, *high).map_err(|e| cfg_err("law.noise", e))? }),
                NoiseSpec::LogNormal { sigma } => Box::new(PseudoMarginalLaw { noise: LogNormalNoise::new(*sigma).map_err(|e| cfg_err("law.noise.sigma", e))? }),
            };
            Law { law, kappa_factor: 1.0 }
        }
    })
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let law = build_law(&config.law)?;
        let model = match &config.target {
            TargetSpec::Finite { m, n_max, spec_seed } => {
                let spec = make_random_spec::<f64>(*m, *n_max, *spec_seed).map_err(|e| cfg_err("target", e))?;
                let x0 = match &config.x0 {
                    Some(v) => {
                        let x = v[0];
                        if !(x >= 0.0 && x.fract() == 0.0 && (x as usize) < *m) {
                            return Err(cfg_err("x0", format!("state {x} is not in 0..{m}")));
                        }
                        x as usize
                    }
                    None => 0,
                };
                Model::Finite { kernel: FiniteKernel::from_spec(&spec), weights: TableWeights::new(&spec.unit_weights()), spec: Box::new(spec), x0 }
            }
            target_spec => {
                let target = build_target(target_spec)?;
                let instrumental = build_instrumental(&config.instrumental, &target, "instrumental")?;
                let kernel: DynKernel = match &config.kernel {
                    KernelSpec::Rwm { step_size } => Box::new(RandomWalkMetropolis::new(instrumental.density.clone(), *step_size).map_err(|e| cfg_err("kernel.step_size", e))?),
                    KernelSpec::Iid => {
                        let s = instrumental.sampler.clone().ok_or_else(|| cfg_err("kernel.name", "`iid` needs an instrumental with an exact sampler"))?;
                        Box::new(IidKernel::new(s))
                    }
                    KernelSpec::Imh { proposal } => {
                        let p = build_instrumental(proposal, &target, "kernel.proposal")?;
                        let s = p.sampler.ok_or_else(|| cfg_err("kernel.proposal.kind", "proposal needs an exact sampler"))?;
                        Box::new(IndependentMetropolis::new(instrumental.density.clone(), s).map_err(|e| cfg_err("kernel.proposal", e))?)
                    }
                    KernelSpec::Finite => unreachable!("rejected by validate"),
                };
                let weights = WeightFunction::new::<f64>(1.0, target.clone(), instrumental.density.clone())?;
                let x0 = config.x0.clone().unwrap_or_else(|| vec![0.0; target.dim()]);
                Model::Continuous { target, instrumental, kernel, weights, x0 }
            }
        };
        Ok(Self { config, model, law })
    }

    /// Stream `(seed, replication)`.
    pub fn rng(&self, replication: usize) -> RandomSource {
        RandomSource::new(self.config.seed, replication as u64)
    }

    /// Instrumental chain of one replication, plus the stream reserved for its counts.
    pub fn instrumental_run(&self, replication: usize) -> Result<(InstrumentalRun<Vec<f64>, f64>, RandomSource)> {
        let mut rng = self.rng(replication);
        let counts_rng = count_stream(&rng);
        let (n, burn) = (self.config.n_steps, self.config.burn_in);
        let run = match &self.model {
            Model::Continuous { kernel, weights, x0, .. } => run_instrumental(kernel, weights, x0.clone(), n, burn, &mut rng)?,
            Model::Finite { kernel, weights, x0, .. } => {
                let r = run_instrumental(kernel, weights, *x0, n, burn, &mut rng)?;
                InstrumentalRun { points: r.points.into_iter().map(|x| vec![x as f64]).collect(), weights: r.weights, accepted: r.accepted }
            }
        };
        Ok((run, counts_rng))
    }

    /// κ under the configured policy for the given unit weights.
    pub fn kappa_for(&self, weights: &[f64]) -> Result<f64> {
        match self.config.kappa {
            KappaPolicy::Fixed(k) => Ok(k),
            KappaPolicy::Tuned { alpha } => crate::engine::tune_kappa(weights, alpha),
        }
    }

    pub fn run_replication(&self, replication: usize) -> Result<ReplicationOutput> {
        let (run, mut counts_rng) = self.instrumental_run(replication)?;
        let kappa = self.kappa_for(&run.weights)?;
        let effective_kappa = kappa * self.law.kappa_factor;
        let counts = draw_counts(&run.weights, effective_kappa, &self.law.law, &mut counts_rng)?;
        let expected_chain_length = effective_kappa * run.weights.iter().sum::<f64>();
        let acceptance_rate = run.accepted as f64 / self.config.n_steps as f64;
        Ok(ReplicationOutput { replication, sample: RunLengthSample { points: run.points, counts, weights: run.weights }, kappa, effective_kappa, acceptance_rate, expected_chain_length })
    }

    /// All replications, in parallel, returned in replication order.
    pub fn run_all(&self) -> Result<Vec<ReplicationOutput>> {
        (0..self.config.replications).into_par_iter().map(|r| self.run_replication(r)).collect()
    }

    pub fn law_name(&self) -> &'static str {
        self.law.law.name()
    }

    pub fn finite_spec(&self) -> Option<&FiniteChainSpec<f64>> {
        match &self.model {
            Model::Finite { spec, .. } => Some(spec),
            Model::Continuous { .. } => None,
        }
    }
}

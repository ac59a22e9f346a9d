use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ImcError, Result};

/// One experiment: target, instrumental, kernel, replication law and κ policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    #[serde(default)]
    pub instrumental: InstrumentalSpec,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub law: LawSpec,
    pub kappa: KappaPolicy,
    pub n_steps: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Starting point of the instrumental chain; the origin (or state 0) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchSpec>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// `sum_i phi_d(x; mu_i, I)`. Means are given explicitly or drawn
    /// i.i.d. `N(0, mean_sd^2 I)` from `means_seed`.
    GaussianMixture {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        means: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_components: Option<usize>,
        #[serde(default = "ten")]
        mean_sd: f64,
        #[serde(default)]
        means_seed: u64,
    },
    RingBimodal {
        dim: usize,
    },
    /// Random finite chain; `Q`, `pi_tilde` and the count law come from the spec.
    Finite {
        m: usize,
        n_max: usize,
        spec_seed: u64,
    },
}

fn ten() -> f64 {
    10.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstrumentalSpec {
    #[default]
    Same,
    Tempered {
        beta: f64,
    },
    GaussianMixture {
        means: Vec<Vec<f64>>,
        #[serde(default = "unit")]
        scale: f64,
    },
    /// Gaussian mixture centred on the `2^dim` points `2 s / sqrt(dim)`, `s` a sign vector.
    RingMixture {
        #[serde(default = "ring_scale")]
        scale: f64,
    },
    StudentT {
        location: Vec<f64>,
        scale: f64,
        nu: f64,
    },
}

fn unit() -> f64 {
    1.0
}

fn ring_scale() -> f64 {
    0.35
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// Random-walk Metropolis on the instrumental density.
    Rwm { step_size: f64 },
    /// Exact draws from the instrumental density.
    Iid,
    /// Independent Metropolis on the instrumental density with the given proposal.
    Imh { proposal: InstrumentalSpec },
    /// Transition matrix of a finite target.
    Finite,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    #[default]
    Optimal,
    /// Rejection law: one copy with probability `kappa * rho_U / m`.
    BernoulliRejection { m: f64 },
    Osr,
    PseudoMarginal { noise: NoiseSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    TwoPoint { low: f64, high: f64 },
    LogNormal { sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KappaPolicy {
    Fixed(f64),
    /// `kappa = alpha * n / sum rho_U` from the realized instrumental chain.
    Tuned { alpha: f64 },
}

/// Log-spaced κ grid for `ess-scan`. Defaults run from `kappa_min = 0.01 n / sum w`
/// to `kappa_max = 1000 n / sum w` (mean count 1000).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_max: Option<f64>,
    #[serde(default = "scan_points")]
    pub points: usize,
}

fn scan_points() -> usize {
    30
}

/// Moments of the first coordinate compared by `bench`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    #[serde(default = "odd_moments")]
    pub moments: Vec<i32>,
    /// Exact moments under the target; zero for every odd moment when absent
    /// and the target is sign-symmetric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_moments: Option<Vec<f64>>,
}

fn odd_moments() -> Vec<i32> {
    vec![1, 3, 5, 7]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| ImcError::Config { path: e.path().to_string(), reason: e.inner().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn err(path: &str, reason: impl Into<String>) -> ImcError {
        ImcError::Config { path: path.into(), reason: reason.into() }
    }

    /// Cross-field checks that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Self::err("n_steps", "must be at least 1"));
        }
        if self.replications == 0 {
            return Err(Self::err("replications", "must be at least 1"));
        }
        match self.kappa {
            KappaPolicy::Fixed(k) if !(k > 0.0 && k.is_finite()) => return Err(Self::err("kappa.fixed", "must be positive and finite")),
            KappaPolicy::Tuned { alpha } if !(alpha > 0.0 && alpha.is_finite()) => return Err(Self::err("kappa.tuned.alpha", "must be positive and finite")),
            _ => {}
        }
        let finite_target = matches!(self.target, TargetSpec::Finite { .. });
        let finite_kernel = matches!(self.kernel, KernelSpec::Finite);
        if finite_target != finite_kernel {
            return Err(Self::err("kernel.name", "the `finite` kernel pairs exactly with the `finite` target"));
        }
        if finite_target && self.instrumental != InstrumentalSpec::Same {
            return Err(Self::err("instrumental.kind", "a finite target carries its own instrumental law"));
        }
        if finite_target && matches!(self.law, LawSpec::PseudoMarginal { .. }) {
            return Err(Self::err("law.name", "pseudo_marginal needs a continuous target"));
        }
        if let TargetSpec::GaussianMixture { means: None, n_components: None, .. } = self.target {
            return Err(Self::err("target.n_components", "give either `means` or `n_components`"));
        }
        if let Some(x0) = &self.x0 {
            let want = self.dim();
            if x0.len() != want {
                return Err(Self::err("x0", format!("expected length {want}, got {}", x0.len())));
            }
        }
        if let LawSpec::BernoulliRejection { m } = self.law {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Self::err("law.m", "must be positive and finite"));
            }
        }
        Ok(())
    }

    /// Dimension of a point (1 for a finite target).
    pub fn dim(&self) -> usize {
        match self.target {
            TargetSpec::GaussianMixture { dim, .. } | TargetSpec::RingBimodal { dim } => dim,
            TargetSpec::Finite { .. } => 1,
        }
    }
}

//! Expectation values over `|ψ(s)|²`.
//!
//! Three estimators share one interface, [`Ensemble`]:
//!
//! * `ExactFull` enumerates all `2^L` basis states.
//! * `ExactSector` sums the `L + 1` magnetization sectors with binomial
//!   multiplicities. It is exact only for observables that depend on the
//!   configuration through `M` alone, which holds for the `α = 0` local energy.
//! * `Metropolis` runs independent single-spin-flip chains.
//!
//! Exact partial sums are reduced in a fixed chunk order, and chain seeds are
//! derived from one master seed, so results do not depend on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ansatz::{log_amplitude, log_amplitude_ratio, AnsatzParams};
use crate::model::{ModelSpec, SpinConfig};

/// Largest `L` that full enumeration accepts unless configured otherwise.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

const CHUNK: u64 = 1 << 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("full enumeration of L = {sites} exceeds the cap of {cap} sites; use metropolis sampling")]
    TooLarge { sites: usize, cap: usize },
    #[error("sector summation requires the fully-connected model (alpha = 0), got alpha = {alpha}")]
    SectorRequiresFullyConnected { alpha: f64 },
    #[error("metropolis needs at least one chain and one sweep")]
    EmptyRun,
    #[error(
        "non-finite log-amplitude ratio {log_ratio} in chain {chain} at sweep {sweep} \
         (site {site}, magnetization {magnetization})"
    )]
    NonFinite {
        chain: usize,
        sweep: usize,
        site: usize,
        magnetization: i64,
        log_ratio: f64,
    },
}

/// A sampled or exactly summed expectation value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedValue {
    pub mean: f64,
    /// Zero for exact summation.
    pub variance_of_mean: f64,
    pub n_samples: u64,
}

impl EstimatedValue {
    pub fn exact(mean: f64, n_samples: u64) -> Self {
        Self {
            mean,
            variance_of_mean: 0.0,
            n_samples,
        }
    }

    pub fn std_error(&self) -> f64 {
        self.variance_of_mean.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    #[default]
    ExactFull,
    ExactSector,
    Metropolis,
}

impl SamplingMode {
    pub fn is_exact(self) -> bool {
        !matches!(self, SamplingMode::Metropolis)
    }

    pub fn name(self) -> &'static str {
        match self {
            SamplingMode::ExactFull => "exact-full",
            SamplingMode::ExactSector => "exact-sector",
            SamplingMode::Metropolis => "metropolis",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub mode: SamplingMode,
    pub n_chains: usize,
    /// Recorded sweeps per chain; one sweep is `L` proposed flips.
    pub n_sweeps: usize,
    /// Discarded sweeps per chain; `None` means `10 L`.
    pub n_burnin: Option<usize>,
    pub rng_seed: u64,
    pub enumeration_cap: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            mode: SamplingMode::ExactFull,
            n_chains: 8,
            n_sweeps: 1000,
            n_burnin: None,
            rng_seed: 0,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl SamplerConfig {
    pub fn exact_full() -> Self {
        Self::default()
    }

    pub fn exact_sector() -> Self {
        Self {
            mode: SamplingMode::ExactSector,
            ..Self::default()
        }
    }

    pub fn metropolis(n_chains: usize, n_sweeps: usize, rng_seed: u64) -> Self {
        Self {
            mode: SamplingMode::Metropolis,
            n_chains,
            n_sweeps,
            rng_seed,
            ..Self::default()
        }
    }

    pub fn burnin_sweeps(&self, sites: usize) -> usize {
        self.n_burnin.unwrap_or(10 * sites)
    }
}

/// Samples (or exact weights) drawn from `|ψ|²` for one parameter vector.
#[derive(Debug, Clone)]
pub struct Ensemble<'a> {
    model: &'a ModelSpec,
    params: &'a AnsatzParams,
    kind: EnsembleKind,
}

#[derive(Debug, Clone)]
enum EnsembleKind {
    Full { shift: f64 },
    Sector { weighted: Vec<(f64, SpinConfig)> },
    Markov { chains: Vec<Vec<SpinConfig>>, acceptance: f64 },
}

impl<'a> Ensemble<'a> {
    pub fn build(
        model: &'a ModelSpec,
        params: &'a AnsatzParams,
        cfg: &SamplerConfig,
    ) -> Result<Self, SamplerError> {
        let kind = match cfg.mode {
            SamplingMode::ExactFull => {
                let l = model.sites();
                if l > cfg.enumeration_cap || l > 62 {
                    return Err(SamplerError::TooLarge {
                        sites: l,
                        cap: cfg.enumeration_cap.min(62),
                    });
                }
                // Any constant works; the largest log-amplitude keeps exp() finite.
                let shift = (0..=l)
                    .map(|n| params.log_amplitude_at(2 * n as i64 - l as i64))
                    .fold(f64::NEG_INFINITY, f64::max);
                EnsembleKind::Full { shift }
            }
            SamplingMode::ExactSector => {
                if !model.is_fully_connected() {
                    return Err(SamplerError::SectorRequiresFullyConnected {
                        alpha: model.alpha(),
                    });
                }
                EnsembleKind::Sector {
                    weighted: sector_weights(model.sites(), params),
                }
            }
            SamplingMode::Metropolis => {
                let (chains, acceptance) = run_chains(model, params, cfg)?;
                EnsembleKind::Markov { chains, acceptance }
            }
        };
        Ok(Self {
            model,
            params,
            kind,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        self.model
    }

    pub fn params(&self) -> &AnsatzParams {
        self.params
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self.kind, EnsembleKind::Markov { .. })
    }

    /// Fraction of accepted Metropolis proposals (1 for exact ensembles).
    pub fn acceptance_rate(&self) -> f64 {
        match &self.kind {
            EnsembleKind::Markov { acceptance, .. } => *acceptance,
            _ => 1.0,
        }
    }

    /// Stored Metropolis samples, by chain.
    pub fn chains(&self) -> Option<&[Vec<SpinConfig>]> {
        match &self.kind {
            EnsembleKind::Markov { chains, .. } => Some(chains),
            _ => None,
        }
    }

    pub fn expect<F>(&self, f: F) -> EstimatedValue
    where
        F: Fn(&SpinConfig) -> f64 + Sync,
    {
        self.expect_many(1, |c, out| out[0] = f(c))[0]
    }

    /// Expectation of a vector-valued observable; `f` fills an `n_out` slice.
    pub fn expect_many<F>(&self, n_out: usize, f: F) -> Vec<EstimatedValue>
    where
        F: Fn(&SpinConfig, &mut [f64]) + Sync,
    {
        match &self.kind {
            EnsembleKind::Full { shift } => self.full_sum(*shift, n_out, &f),
            EnsembleKind::Sector { weighted } => {
                let mut acc = vec![0.0; n_out];
                let mut buf = vec![0.0; n_out];
                for (w, c) in weighted {
                    f(c, &mut buf);
                    for (a, b) in acc.iter_mut().zip(&buf) {
                        *a += w * b;
                    }
                }
                acc.into_iter()
                    .map(|m| EstimatedValue::exact(m, weighted.len() as u64))
                    .collect()
            }
            EnsembleKind::Markov { chains, .. } => chain_estimates(chains, n_out, &f),
        }
    }

    fn full_sum<F>(&self, shift: f64, n_out: usize, f: &F) -> Vec<EstimatedValue>
    where
        F: Fn(&SpinConfig, &mut [f64]) + Sync,
    {
        let l = self.model.sites();
        let dim = 1u64 << l;
        let n_chunks = dim.div_ceil(CHUNK);
        let partials: Vec<(f64, Vec<f64>)> = (0..n_chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut norm = 0.0;
                let mut acc = vec![0.0; n_out];
                let mut buf = vec![0.0; n_out];
                let end = ((chunk + 1) * CHUNK).min(dim);
                for bits in chunk * CHUNK..end {
                    let c = SpinConfig::from_bits(bits, l);
                    let w = (2.0 * (log_amplitude(self.params, &c) - shift)).exp();
                    norm += w;
                    f(&c, &mut buf);
                    for (a, b) in acc.iter_mut().zip(&buf) {
                        *a += w * b;
                    }
                }
                (norm, acc)
            })
            .collect();
        let mut norm = 0.0;
        let mut acc = vec![0.0; n_out];
        for (n, a) in partials {
            norm += n;
            for (x, y) in acc.iter_mut().zip(a) {
                *x += y;
            }
        }
        acc.into_iter()
            .map(|m| EstimatedValue::exact(m / norm, dim))
            .collect()
    }
}

/// Normalized sector weights `C(L, n↑) |ψ(M)|² / Z` with a representative
/// configuration for each sector.
fn sector_weights(sites: usize, params: &AnsatzParams) -> Vec<(f64, SpinConfig)> {
    let mut log_binom = 0.0;
    let logs: Vec<f64> = (0..=sites)
        .map(|n| {
            if n > 0 {
                log_binom += ((sites - n + 1) as f64 / n as f64).ln();
            }
            log_binom + 2.0 * params.log_amplitude_at(2 * n as i64 - sites as i64)
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|x| (x - top).exp()).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter()
        .enumerate()
        .map(|(n, w)| (w / z, SpinConfig::with_up_count(sites, n)))
        .collect()
}

fn run_chains(
    model: &ModelSpec,
    params: &AnsatzParams,
    cfg: &SamplerConfig,
) -> Result<(Vec<Vec<SpinConfig>>, f64), SamplerError> {
    if cfg.n_chains == 0 || cfg.n_sweeps == 0 {
        return Err(SamplerError::EmptyRun);
    }
    let results: Vec<Result<(Vec<SpinConfig>, u64), SamplerError>> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|chain| run_chain(model, params, cfg, chain))
        .collect();
    let mut chains = Vec::with_capacity(cfg.n_chains);
    let mut accepted = 0u64;
    for r in results {
        let (samples, acc) = r?;
        accepted += acc;
        chains.push(samples);
    }
    let proposals =
        (cfg.n_chains * (cfg.n_sweeps + cfg.burnin_sweeps(model.sites())) * model.sites()) as f64;
    Ok((chains, accepted as f64 / proposals))
}

fn run_chain(
    model: &ModelSpec,
    params: &AnsatzParams,
    cfg: &SamplerConfig,
    chain: usize,
) -> Result<(Vec<SpinConfig>, u64), SamplerError> {
    let l = model.sites();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(chain as u64);
    let spins: Vec<i8> = (0..l)
        .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
        .collect();
    let mut config = SpinConfig::new(spins).expect("spins are ±1");
    let burnin = cfg.burnin_sweeps(l);
    let mut samples = Vec::with_capacity(cfg.n_sweeps);
    let mut accepted = 0u64;
    for sweep in 0..burnin + cfg.n_sweeps {
        for _ in 0..l {
            let site = rng.random_range(0..l);
            let log_ratio = log_amplitude_ratio(params, &config, site);
            if !log_ratio.is_finite() {
                return Err(SamplerError::NonFinite {
                    chain,
                    sweep,
                    site,
                    magnetization: config.magnetization(),
                    log_ratio,
                });
            }
            let u: f64 = rng.random();
            if log_ratio >= 0.0 || u < (2.0 * log_ratio).exp() {
                config.flip(site);
                accepted += 1;
            }
        }
        if sweep >= burnin {
            samples.push(config.clone());
        }
    }
    Ok((samples, accepted))
}

/// Mean over chains of per-chain means; the error bar comes from the spread
/// of those means (or of ten batch means when only one chain ran).
fn chain_estimates<F>(chains: &[Vec<SpinConfig>], n_out: usize, f: &F) -> Vec<EstimatedValue>
where
    F: Fn(&SpinConfig, &mut [f64]) + Sync,
{
    let groups: Vec<&[SpinConfig]> = if chains.len() >= 2 {
        chains.iter().map(Vec::as_slice).collect()
    } else {
        let only = &chains[0];
        let size = (only.len() / 10).max(1);
        only.chunks(size).filter(|c| c.len() == size).collect()
    };
    let group_means: Vec<Vec<f64>> = groups
        .par_iter()
        .map(|g| {
            let mut acc = vec![0.0; n_out];
            let mut buf = vec![0.0; n_out];
            for c in g.iter() {
                f(c, &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b;
                }
            }
            acc.iter().map(|a| a / g.len() as f64).collect()
        })
        .collect();
    let n_groups = group_means.len() as f64;
    let total: u64 = groups.iter().map(|g| g.len() as u64).sum();
    (0..n_out)
        .map(|k| {
            let mean = group_means.iter().map(|g| g[k]).sum::<f64>() / n_groups;
            let variance_of_mean = if group_means.len() > 1 {
                group_means.iter().map(|g| (g[k] - mean).powi(2)).sum::<f64>()
                    / (n_groups - 1.0)
                    / n_groups
            } else {
                0.0
            };
            EstimatedValue {
                mean,
                variance_of_mean,
                n_samples: total,
            }
        })
        .collect()
}

/// Exact average of `local_fn` over all `2^L` configurations.
pub fn expect_exact_full<F>(
    model: &ModelSpec,
    params: &AnsatzParams,
    local_fn: F,
) -> Result<EstimatedValue, SamplerError>
where
    F: Fn(&SpinConfig) -> f64 + Sync,
{
    Ok(Ensemble::build(model, params, &SamplerConfig::exact_full())?.expect(local_fn))
}

/// Exact average of a function of `M` using the `L + 1` magnetization sectors.
pub fn expect_exact_sector<F>(
    model: &ModelSpec,
    params: &AnsatzParams,
    local_fn: F,
) -> Result<EstimatedValue, SamplerError>
where
    F: Fn(i64) -> f64 + Sync,
{
    Ok(Ensemble::build(model, params, &SamplerConfig::exact_sector())?
        .expect(|c| local_fn(c.magnetization())))
}

/// Metropolis estimate of `local_fn`.
pub fn metropolis_sample<F>(
    model: &ModelSpec,
    params: &AnsatzParams,
    cfg: &SamplerConfig,
    local_fn: F,
) -> Result<EstimatedValue, SamplerError>
where
    F: Fn(&SpinConfig) -> f64 + Sync,
{
    let cfg = SamplerConfig {
        mode: SamplingMode::Metropolis,
        ..cfg.clone()
    };
    Ok(Ensemble::build(model, params, &cfg)?.expect(local_fn))
}
